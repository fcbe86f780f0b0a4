//! File formats: CSV traces and tables, gait/parameter JSON, estimate logs.
//!
//! Floats are written with enough digits to round-trip exactly, so identical
//! runs produce byte-identical files.

use crate::estimation::StateEstimate;
use crate::gait::{Gait, GaitParams};
use crate::planner::{PlanRecord, Trajectory};
use crate::sensing::{SensorCalibration, SensorFrame};
use crate::sim::{ActionKind, ActionSpec, ActionTable, ActionTransform, RolloutTrace, TabulatedAction};
use crate::symmetry::FaceId;
use crate::topology::TENDON_COUNT;
use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("bad file content: {0}")]
    Malformed(String),
}

fn fmt(v: f64) -> String {
    // Shortest representation that round-trips; stable across runs.
    format!("{v:?}")
}

// ---------------------------------------------------------------------------
// Rollout traces
// ---------------------------------------------------------------------------

/// CoM trace: `t,com_x,com_y,com_z,face`.
pub fn write_com_trace<W: Write>(w: W, trace: &RolloutTrace) -> Result<(), FileError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "com_x", "com_y", "com_z", "face"])?;
    for s in &trace.samples {
        let com = s.com();
        out.write_record([
            fmt(s.t),
            fmt(com.x),
            fmt(com.y),
            fmt(com.z),
            format!("{:?}", s.face),
        ])?;
    }
    out.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Action tables
// ---------------------------------------------------------------------------

/// `action_id,kind,left_range_mm,right_range_mm,dtheta_rad,tx_m,ty_m`.
pub fn write_action_table<W: Write>(w: W, table: &ActionTable) -> Result<(), FileError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "action_id",
        "kind",
        "left_range_mm",
        "right_range_mm",
        "dtheta_rad",
        "tx_m",
        "ty_m",
    ])?;
    for a in table {
        out.write_record([
            a.id.to_string(),
            a.spec.kind.name().to_string(),
            fmt(a.spec.left_range * 1e3),
            fmt(a.spec.right_range * 1e3),
            fmt(a.transform.dtheta),
            fmt(a.transform.tx),
            fmt(a.transform.ty),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_action_table<R: Read>(r: R) -> Result<ActionTable, FileError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut table = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| -> Result<f64, FileError> {
            rec.get(i)
                .ok_or_else(|| FileError::Malformed(format!("missing column {i}")))?
                .parse()
                .map_err(|e| FileError::Malformed(format!("bad float: {e}")))
        };
        let kind = match rec.get(1) {
            Some("rolling") => ActionKind::Rolling,
            Some("ccw_turn") => ActionKind::CcwTurn,
            Some("cw_turn") => ActionKind::CwTurn,
            other => {
                return Err(FileError::Malformed(format!("unknown action kind {other:?}")))
            }
        };
        table.push(TabulatedAction {
            id: rec
                .get(0)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| FileError::Malformed("bad action id".into()))?,
            spec: ActionSpec {
                kind,
                left_range: get(2)? * 1e-3,
                right_range: get(3)? * 1e-3,
            },
            transform: ActionTransform {
                dtheta: get(4)?,
                tx: get(5)?,
                ty: get(6)?,
            },
        });
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

/// `x_m,y_m,segment_id`.
pub fn write_trajectory<W: Write>(w: W, traj: &Trajectory) -> Result<(), FileError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x_m", "y_m", "segment_id"])?;
    for (p, s) in traj.waypoints().iter().zip(traj.segment_ids()) {
        out.write_record([fmt(p.x), fmt(p.y), s.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trajectory<R: Read>(r: R) -> Result<Trajectory, FileError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut pts = Vec::new();
    let mut ids = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let x: f64 = rec
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| FileError::Malformed("bad x_m".into()))?;
        let y: f64 = rec
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| FileError::Malformed("bad y_m".into()))?;
        let id: usize = rec.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
        pts.push(Vector2::new(x, y));
        ids.push(id);
    }
    Trajectory::with_segments(pts, ids)
        .map_err(|e| FileError::Malformed(format!("invalid trajectory: {e}")))
}

// ---------------------------------------------------------------------------
// Sensor frames and calibration
// ---------------------------------------------------------------------------

/// One row per frame: timestamp, nine lengths, two bar direction vectors.
pub fn write_sensor_frames<W: Write>(w: W, frames: &[SensorFrame]) -> Result<(), FileError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = vec!["t".into()];
    for name in ["A", "B", "C", "D", "E", "F", "p03", "p14", "p25"] {
        header.push(format!("len_{name}_m"));
    }
    for b in 0..2 {
        for a in ["x", "y", "z"] {
            header.push(format!("bar{b}_{a}"));
        }
    }
    out.write_record(&header)?;
    for f in frames {
        let mut row = vec![fmt(f.timestamp)];
        row.extend(f.tendon_lengths.iter().map(|&v| fmt(v)));
        for dir in &f.bar_dirs {
            row.push(fmt(dir.x));
            row.push(fmt(dir.y));
            row.push(fmt(dir.z));
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sensor_frames<R: Read>(r: R) -> Result<Vec<SensorFrame>, FileError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut frames = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let vals: Result<Vec<f64>, _> = rec.iter().map(|s| s.parse::<f64>()).collect();
        let vals = vals.map_err(|e| FileError::Malformed(format!("bad float: {e}")))?;
        if vals.len() != 1 + TENDON_COUNT + 6 {
            return Err(FileError::Malformed(format!(
                "expected {} columns, got {}",
                1 + TENDON_COUNT + 6,
                vals.len()
            )));
        }
        let mut lengths = [0.0; TENDON_COUNT];
        lengths.copy_from_slice(&vals[1..1 + TENDON_COUNT]);
        frames.push(SensorFrame {
            timestamp: vals[0],
            tendon_lengths: lengths,
            bar_dirs: [
                Vector3::new(vals[10], vals[11], vals[12]),
                Vector3::new(vals[13], vals[14], vals[15]),
            ],
        });
    }
    Ok(frames)
}

/// `tendon_id,slope,intercept,residual_rms` (mm / pF units).
pub fn write_calibrations<W: Write>(
    w: W,
    cals: &[(String, SensorCalibration)],
) -> Result<(), FileError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["tendon_id", "slope", "intercept", "residual_rms"])?;
    for (id, c) in cals {
        out.write_record([id.clone(), fmt(c.slope), fmt(c.intercept), fmt(c.residual_rms)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_calibrations<R: Read>(r: R) -> Result<Vec<(String, SensorCalibration)>, FileError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64, FileError> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| FileError::Malformed(format!("bad column {i}")))
        };
        out.push((
            rec.get(0).unwrap_or("").to_string(),
            SensorCalibration {
                slope: num(1)?,
                intercept: num(2)?,
                residual_rms: num(3)?,
            },
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Gait files
// ---------------------------------------------------------------------------

/// On-disk gait parameters, in the units the robot's tables use
/// (millimeters and percent).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaitParamsFile {
    pub min_length_mm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_left_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_right_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance_high_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance_low_pct: Option<f64>,
    pub max_speed: f64,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl GaitParamsFile {
    pub fn to_params(&self) -> Result<GaitParams, FileError> {
        let left = self
            .range_left_mm
            .or(self.range_mm)
            .ok_or_else(|| FileError::Malformed("missing range".into()))?;
        let right = self.range_right_mm.or(self.range_mm).unwrap_or(left);
        let tol_high = self
            .tolerance_high_pct
            .or(self.tolerance_pct)
            .ok_or_else(|| FileError::Malformed("missing tolerance".into()))?;
        let tol_low = self.tolerance_low_pct.or(self.tolerance_pct).unwrap_or(tol_high);
        let mut p = GaitParams::uniform(
            self.min_length_mm * 1e-3,
            left * 1e-3,
            tol_high / 100.0,
            self.max_speed,
            self.kp,
            self.ki,
            self.kd,
        );
        p.range_right = right * 1e-3;
        p.tolerance_low = tol_low / 100.0;
        p.validate()
            .map_err(|e| FileError::Malformed(e.to_string()))?;
        Ok(p)
    }

    pub fn from_params(p: &GaitParams) -> Self {
        let uniform_range = (p.range_left - p.range_right).abs() < 1e-12;
        let uniform_tol = (p.tolerance_high - p.tolerance_low).abs() < 1e-12;
        Self {
            min_length_mm: p.min_length * 1e3,
            range_mm: uniform_range.then_some(p.range_left * 1e3),
            range_left_mm: (!uniform_range).then_some(p.range_left * 1e3),
            range_right_mm: (!uniform_range).then_some(p.range_right * 1e3),
            tolerance_pct: uniform_tol.then_some(p.tolerance_high * 100.0),
            tolerance_high_pct: (!uniform_tol).then_some(p.tolerance_high * 100.0),
            tolerance_low_pct: (!uniform_tol).then_some(p.tolerance_low * 100.0),
            max_speed: p.max_speed,
            kp: p.kp,
            ki: p.ki,
            kd: p.kd,
        }
    }
}

/// Gait file: `{name, params{...}, steps[[6 floats]...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaitFile {
    pub name: String,
    pub params: GaitParamsFile,
    pub steps: Vec<[f64; 6]>,
    #[serde(default)]
    pub cycle_face_advance: i8,
}

impl GaitFile {
    pub fn to_gait(&self) -> Result<Gait, FileError> {
        if self.steps.is_empty() {
            return Err(FileError::Malformed("gait has no steps".into()));
        }
        Ok(Gait::new(
            &self.name,
            self.steps.clone(),
            self.params.to_params()?,
            self.cycle_face_advance,
        ))
    }

    pub fn from_gait(g: &Gait) -> Self {
        Self {
            name: g.name.clone(),
            params: GaitParamsFile::from_params(&g.params),
            steps: g.steps.iter().map(|s| s.targets).collect(),
            cycle_face_advance: g.cycle_face_advance,
        }
    }
}

pub fn read_gait<R: Read>(r: R) -> Result<Gait, FileError> {
    let file: GaitFile = serde_json::from_reader(r)?;
    file.to_gait()
}

pub fn write_gait<W: Write>(w: W, gait: &Gait) -> Result<(), FileError> {
    serde_json::to_writer_pretty(w, &GaitFile::from_gait(gait))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Estimate logs
// ---------------------------------------------------------------------------

/// One line per frame in the estimation replay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub t: f64,
    /// World-frame node positions (rotation applied), canonical encoding.
    pub nodes: [[f64; 3]; 6],
    /// ZYX Euler angles of the estimated orientation: yaw, pitch, roll.
    pub euler_zyx: [f64; 3],
    pub shape_residual: f64,
    pub orientation_residual: f64,
}

impl EstimateRecord {
    pub fn new(t: f64, est: &StateEstimate) -> Self {
        let world = est.world_shape();
        let (yaw, pitch, roll) = est.euler_zyx();
        Self {
            t,
            nodes: (*world.nodes()).map(|p| [p.x, p.y, p.z]),
            euler_zyx: [yaw, pitch, roll],
            shape_residual: est.residuals.0,
            orientation_residual: est.residuals.1,
        }
    }
}

/// JSON-lines estimate log.
pub fn write_estimates<W: Write>(mut w: W, records: &[EstimateRecord]) -> Result<(), FileError> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    Ok(())
}

/// `t,rmse_fraction` RMSE report against ground truth.
pub fn write_rmse<W: Write>(w: W, rows: &[(f64, f64)]) -> Result<(), FileError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "rmse_fraction_of_bar_length"])?;
    for &(t, rmse) in rows {
        out.write_record([fmt(t), fmt(rmse)])?;
    }
    out.flush()?;
    Ok(())
}

/// JSON-lines plan log.
pub fn write_plan_log<W: Write>(mut w: W, records: &[PlanRecord]) -> Result<(), FileError> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    Ok(())
}

/// `progress,error_fraction` error-vs-arclength report.
pub fn write_tracking_error<W: Write>(
    w: W,
    records: &[PlanRecord],
    bar_length: f64,
) -> Result<(), FileError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["progress", "error_fraction_of_bar_length"])?;
    for r in records {
        out.write_record([fmt(r.progress), fmt(r.cross_track_error / bar_length)])?;
    }
    out.flush()?;
    Ok(())
}

/// Ground-truth node log for estimation replays: one row per frame with
/// 18 coordinates.
pub fn write_truth_shapes<W: Write>(
    w: W,
    rows: &[(f64, crate::shape::RobotShape)],
) -> Result<(), FileError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    for n in 0..6 {
        for a in ["x", "y", "z"] {
            header.push(format!("n{n}_{a}"));
        }
    }
    out.write_record(&header)?;
    for (t, shape) in rows {
        let mut row = vec![fmt(*t)];
        for n in shape.nodes() {
            row.push(fmt(n.x));
            row.push(fmt(n.y));
            row.push(fmt(n.z));
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_truth_shapes<R: Read>(
    r: R,
) -> Result<Vec<(f64, crate::shape::RobotShape)>, FileError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let vals: Result<Vec<f64>, _> = rec.iter().map(|s| s.parse::<f64>()).collect();
        let vals = vals.map_err(|e| FileError::Malformed(format!("bad float: {e}")))?;
        if vals.len() != 19 {
            return Err(FileError::Malformed("expected 19 columns".into()));
        }
        let mut nodes = [Vector3::zeros(); 6];
        for n in 0..6 {
            nodes[n] = Vector3::new(vals[1 + 3 * n], vals[2 + 3 * n], vals[3 + 3 * n]);
        }
        rows.push((vals[0], crate::shape::RobotShape::new(nodes)));
    }
    Ok(rows)
}

/// Face as written in trace CSVs.
pub fn face_name(face: FaceId) -> &'static str {
    match face {
        FaceId::F0 => "F0",
        FaceId::F1 => "F1",
        FaceId::F2 => "F2",
    }
}
