//! Minimal SVG path plots: polylines and markers in world coordinates with
//! an axis box, no plotting dependencies.

use std::fmt::Write as _;

type Polyline = (Vec<(f64, f64)>, &'static str, f64);

pub struct Plot {
    title: String,
    lines: Vec<Polyline>,
    markers: Vec<((f64, f64), &'static str, f64)>,
}

const W: f64 = 720.0;
const H: f64 = 540.0;
const MARGIN: f64 = 56.0;

impl Plot {
    pub fn new(title: &str) -> Self {
        Self {
            title: title.to_string(),
            lines: Vec::new(),
            markers: Vec::new(),
        }
    }

    pub fn polyline(&mut self, pts: impl IntoIterator<Item = (f64, f64)>, color: &'static str, width: f64) {
        let pts: Vec<(f64, f64)> = pts.into_iter().collect();
        if pts.len() >= 2 {
            self.lines.push((pts, color, width));
        }
    }

    pub fn marker(&mut self, p: (f64, f64), color: &'static str, radius: f64) {
        self.markers.push((p, color, radius));
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut min_x = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut min_y = f64::INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        let all = self
            .lines
            .iter()
            .flat_map(|(pts, _, _)| pts.iter())
            .chain(self.markers.iter().map(|(p, _, _)| p));
        for &(x, y) in all {
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);
        }
        if !min_x.is_finite() {
            return (0.0, 1.0, 0.0, 1.0);
        }
        let pad_x = ((max_x - min_x) * 0.05).max(0.01);
        let pad_y = ((max_y - min_y) * 0.05).max(0.01);
        (min_x - pad_x, max_x + pad_x, min_y - pad_y, max_y + pad_y)
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        // Equal scale on both axes so paths keep their aspect ratio.
        let scale = ((W - 2.0 * MARGIN) / (x1 - x0)).min((H - 2.0 * MARGIN) / (y1 - y0));
        let to_px = |x: f64, y: f64| {
            (
                MARGIN + (x - x0) * scale,
                H - MARGIN - (y - y0) * scale,
            )
        };
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
        );
        let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r##"<rect x="{m}" y="{m}" width="{w}" height="{h}" fill="none" stroke="#888" stroke-width="1"/>"##,
            m = MARGIN,
            w = W - 2.0 * MARGIN,
            h = H - 2.0 * MARGIN
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="24" font-family="monospace" font-size="14">{}</text>"#,
            MARGIN, self.title
        );
        // Extent labels on the axis box.
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="monospace" font-size="11">({:.2}, {:.2}) m</text>"#,
            MARGIN,
            H - MARGIN + 16.0,
            x0,
            y0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="monospace" font-size="11" text-anchor="end">({:.2}, {:.2}) m</text>"#,
            W - MARGIN,
            MARGIN - 8.0,
            x1,
            y1
        );
        for (pts, color, width) in &self.lines {
            let mut d = String::new();
            for (i, &(x, y)) in pts.iter().enumerate() {
                let (px, py) = to_px(x, y);
                let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, px, py);
            }
            let _ = writeln!(
                svg,
                r#"<path d="{}" fill="none" stroke="{}" stroke-width="{}"/>"#,
                d.trim_end(),
                color,
                width
            );
        }
        for &((x, y), color, r) in &self.markers {
            let (px, py) = to_px(x, y);
            let _ = writeln!(
                svg,
                r#"<circle cx="{px:.2}" cy="{py:.2}" r="{r}" fill="{color}"/>"#
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}
