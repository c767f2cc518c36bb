//! Run records and their on-disk form.
//!
//! `trajectory.csv` has the fixed header `t, state…, u_d…, u…, h, psi1,
//! qp_status`; `constraints.csv` carries the constraint row per step;
//! `summary.json` the terminal summary; `epochs.jsonl` (optional) one line per
//! scan with the barrier primitives.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::barrier::{EllipsoidBarrier, LocalBarrier};
use crate::error::{CbfError, Result};
use crate::filter::QpStatus;

use super::engine::{input_labels, state_labels};
use super::scenario::Scenario;

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub state: Vec<f64>,
    pub u_d: Vec<f64>,
    pub u: Vec<f64>,
    pub h: f64,
    pub psi1: f64,
    pub status: QpStatus,
    /// Constraint row `a·u + b ≥ 0`.
    pub a: Vec<f64>,
    pub b: f64,
    pub goal_index: usize,
    /// Obstacles whose interior contains the position.
    pub penetrations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveRecord {
    pub center: Vec<f64>,
    /// Column-major rotation from primitive axes to world axes.
    pub rotation: Vec<f64>,
    pub semi_axes: Vec<f64>,
    /// Safe inside rather than outside.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub inward: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub t: f64,
    pub origin: Vec<f64>,
    pub detections: usize,
    pub rays: usize,
    pub primitives: Vec<PrimitiveRecord>,
}

impl EpochRecord {
    pub fn new(b: &LocalBarrier, t: f64) -> Self {
        let dim = b.dim;
        let detections = b.primitives[..b.detection_count]
            .iter()
            .filter(|e| is_hit(b, e))
            .count();
        let primitives = b
            .primitives
            .iter()
            .map(|e| PrimitiveRecord {
                center: e.center.iter().take(dim).copied().collect(),
                rotation: e.rotation.iter().copied().collect(),
                semi_axes: e
                    .inv_sq_axes
                    .iter()
                    .take(dim)
                    .map(|v| 1.0 / v.sqrt())
                    .collect(),
                inward: e.inward,
            })
            .collect();
        Self {
            epoch: b.epoch,
            t,
            origin: b.scan_origin.iter().take(dim).copied().collect(),
            detections,
            rays: b.detection_count,
            primitives,
        }
    }
}

/// Free rays put their primitive at the sensing radius; hits sit closer.
fn is_hit(b: &LocalBarrier, e: &EllipsoidBarrier) -> bool {
    (e.center - b.scan_origin).norm() < b.r_bar - 1e-9
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    InfeasibleAbort,
    IntegrationFailure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub plant: String,
    pub seed: u64,
    pub outcome: Outcome,
    pub message: String,
    pub steps: usize,
    pub epochs: usize,
    pub final_time: f64,
    pub min_h: f64,
    pub min_h_time: f64,
    pub min_psi1: f64,
    pub min_psi1_time: f64,
    pub final_goal_distance: f64,
    pub final_state: Vec<f64>,
    pub active_steps: usize,
    pub infeasible_steps: usize,
    pub penetrating_steps: usize,
    pub command_clamps: usize,
    pub max_orthonormality_error: f64,
    pub safe: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub state_labels: Vec<String>,
    pub input_labels: Vec<String>,
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
    pub summary: RunSummary,
}

impl RunLog {
    pub fn new(s: &Scenario) -> Self {
        Self {
            state_labels: state_labels(s.plant).into_iter().map(String::from).collect(),
            input_labels: input_labels(s.plant).into_iter().map(String::from).collect(),
            steps: Vec::new(),
            epochs: Vec::new(),
            summary: RunSummary {
                name: s.name.clone(),
                plant: s.plant.as_str().into(),
                seed: s.run.seed,
                outcome: Outcome::Completed,
                message: String::new(),
                steps: 0,
                epochs: 0,
                final_time: 0.0,
                min_h: f64::INFINITY,
                min_h_time: 0.0,
                min_psi1: f64::INFINITY,
                min_psi1_time: 0.0,
                final_goal_distance: f64::NAN,
                final_state: Vec::new(),
                active_steps: 0,
                infeasible_steps: 0,
                penetrating_steps: 0,
                command_clamps: 0,
                max_orthonormality_error: 0.0,
                safe: false,
            },
        }
    }

    pub fn push_step(&mut self, r: StepRecord) {
        let s = &mut self.summary;
        if r.h < s.min_h {
            s.min_h = r.h;
            s.min_h_time = r.t;
        }
        if r.psi1 < s.min_psi1 {
            s.min_psi1 = r.psi1;
            s.min_psi1_time = r.t;
        }
        match r.status {
            QpStatus::Active => s.active_steps += 1,
            QpStatus::Infeasible => s.infeasible_steps += 1,
            QpStatus::Inactive => {}
        }
        if r.penetrations > 0 {
            s.penetrating_steps += 1;
        }
        s.final_time = r.t;
        self.steps.push(r);
    }

    pub fn finish(&mut self, outcome: Outcome, message: String, goal_distance: f64, final_state: &[f64]) {
        let s = &mut self.summary;
        s.outcome = outcome;
        s.message = message;
        s.steps = self.steps.len();
        s.epochs = self.epochs.len();
        s.final_goal_distance = goal_distance;
        s.final_state = final_state.to_vec();
        s.safe = s.is_safe();
    }

    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("t");
        for l in &self.state_labels {
            out.push(',');
            out.push_str(l);
        }
        for prefix in ["u_d_", "u_"] {
            for l in &self.input_labels {
                out.push(',');
                out.push_str(prefix);
                out.push_str(l);
            }
        }
        out.push_str(",h,psi1,qp_status\n");
        for r in &self.steps {
            write!(out, "{}", r.t).unwrap();
            for v in r.state.iter().chain(&r.u_d).chain(&r.u) {
                write!(out, ",{v}").unwrap();
            }
            writeln!(out, ",{},{},{}", r.h, r.psi1, r.status.as_str()).unwrap();
        }
        out
    }

    pub fn constraints_csv(&self) -> String {
        let mut out = String::from("t");
        for l in &self.input_labels {
            write!(out, ",a_{l}").unwrap();
        }
        out.push_str(",b,slack,goal_index,penetrations\n");
        for r in &self.steps {
            write!(out, "{}", r.t).unwrap();
            for v in &r.a {
                write!(out, ",{v}").unwrap();
            }
            let slack: f64 = r.a.iter().zip(&r.u).map(|(a, u)| a * u).sum::<f64>() + r.b;
            writeln!(out, ",{},{},{},{}", r.b, slack, r.goal_index, r.penetrations).unwrap();
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serialises") + "\n"
    }

    pub fn epochs_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e).expect("epoch serialises"));
            out.push('\n');
        }
        out
    }

    /// Writes `trajectory.csv`, `constraints.csv`, `summary.json` and, when
    /// asked, `epochs.jsonl` into `dir`.
    pub fn write(&self, dir: &Path, with_epochs: bool) -> Result<()> {
        let io = |e: std::io::Error| CbfError::Scenario(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        fs::write(dir.join("trajectory.csv"), self.trajectory_csv()).map_err(io)?;
        fs::write(dir.join("constraints.csv"), self.constraints_csv()).map_err(io)?;
        fs::write(dir.join("summary.json"), self.summary_json()).map_err(io)?;
        if with_epochs {
            fs::write(dir.join("epochs.jsonl"), self.epochs_jsonl()).map_err(io)?;
        }
        Ok(())
    }
}
