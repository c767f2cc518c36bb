//! Scenario files: JSON, unknown keys rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::barrier::{BarrierGeometry, BufferConfig};
use crate::error::{CbfError, Result};
use crate::filter::{CascadeConfig, ClassKLinear, FilterMode};
use crate::homotopy::HomotopyParams;
use crate::perception::{Fov, World};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    /// Planar unicycle, state `(q_x, q_y, v, θ)`.
    Unicycle,
    /// Attitude-stabilised quadrotor; the filter sees `(q, p)`.
    QuadFull,
    /// Quadrotor replaced by its double-integrator approximation.
    QuadApprox,
}

impl PlantKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlantKind::Unicycle => "unicycle",
            PlantKind::QuadFull => "quad_full",
            PlantKind::QuadApprox => "quad_approx",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            PlantKind::Unicycle => 2,
            _ => 3,
        }
    }

    /// Length of `initial_state` in a scenario file.
    pub fn initial_state_len(&self) -> usize {
        match self {
            PlantKind::Unicycle => 4,
            _ => 6,
        }
    }

    /// Relative degree of a position-only barrier on this plant.
    pub fn relative_degree(&self) -> usize {
        2
    }
}

fn default_lambda() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CbfParams {
    /// Soft-min sharpness inside each local barrier.
    pub kappa1: f64,
    /// Soft-max sharpness across the window.
    pub kappa: f64,
    /// Window size `N`.
    pub window: usize,
    /// Rays per scan `P`.
    pub rays: usize,
    /// Field-of-view boundary samples `L` (sector sensors only).
    #[serde(default)]
    pub fov_samples: usize,
    /// Perception period `T_s` (s).
    pub sample_period: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    pub relative_degree: usize,
    pub alpha1: f64,
    #[serde(default)]
    pub alpha2: Option<f64>,
    pub d_w: f64,
    pub d_s: f64,
    pub r_bar: f64,
    /// Sensor sector width in degrees; absent for a full circle or sphere.
    #[serde(default)]
    pub fov_degrees: Option<f64>,
    /// Minimum range of boundary samples that receive a primitive; defaults
    /// to `d_w + d_s`.
    #[serde(default)]
    pub fov_clearance: Option<f64>,
}

impl CbfParams {
    pub fn fov(&self) -> Fov {
        match self.fov_degrees {
            Some(deg) if deg < 360.0 => Fov::Sector(deg.to_radians()),
            _ => Fov::Full,
        }
    }

    pub fn geometry(&self) -> BarrierGeometry {
        let mut g = BarrierGeometry::new(self.d_w, self.d_s, self.r_bar);
        if let Some(c) = self.fov_clearance {
            g.fov_clearance = c;
        }
        g
    }

    pub fn cascade(&self) -> Result<CascadeConfig> {
        let mut alphas = vec![ClassKLinear::new(self.alpha1)?];
        if self.relative_degree >= 2 {
            let a2 = self.alpha2.ok_or_else(|| {
                CbfError::Scenario("alpha2 is required for relative degree 2".into())
            })?;
            alphas.push(ClassKLinear::new(a2)?);
        }
        CascadeConfig::new(alphas)
    }

    pub fn buffer_config(&self) -> Result<BufferConfig> {
        Ok(BufferConfig {
            window: self.window,
            sample_period: self.sample_period,
            kappa: self.kappa,
            homotopy: HomotopyParams::new(self.relative_degree, self.lambda)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunParams {
    /// Simulated time (s).
    pub duration: f64,
    /// Integration step (s); must divide the perception period.
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_goal_radius() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub world: World,
    pub plant: PlantKind,
    /// Unicycle `(q_x, q_y, v, θ)`; quadrotors `(q, p)`.
    pub initial_state: Vec<f64>,
    /// Waypoints visited in order; the last one is the goal.
    pub goals: Vec<Vec<f64>>,
    /// Distance at which the next waypoint is selected.
    #[serde(default = "default_goal_radius")]
    pub goal_radius: f64,
    pub cbf: CbfParams,
    pub run: RunParams,
    #[serde(default)]
    pub filter_mode: FilterMode,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CbfError::Scenario(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CbfError::Scenario(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    /// Integration steps per perception period.
    pub fn steps_per_epoch(&self) -> Result<usize> {
        let ratio = self.cbf.sample_period / self.run.dt;
        let steps = ratio.round();
        if !(steps >= 1.0) || (ratio - steps).abs() > 1e-6 * steps {
            return Err(CbfError::Scenario(format!(
                "dt = {} must divide the perception period {}",
                self.run.dt, self.cbf.sample_period
            )));
        }
        Ok(steps as usize)
    }

    /// Number of integration steps covering the duration.
    pub fn total_steps(&self) -> usize {
        (self.run.duration / self.run.dt + 1e-9).floor().max(0.0) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "minimal",
        "world": {"dimension": 2, "bounds": {"min": [-5, -5], "max": [5, 5]}},
        "plant": "unicycle",
        "initial_state": [0, 0, 0, 0],
        "goals": [[3, 0]],
        "cbf": {"kappa1": 20, "kappa": 20, "window": 2, "rays": 100, "sample_period": 0.2,
                "relative_degree": 2, "alpha1": 20, "alpha2": 20, "d_w": 0.3, "d_s": 0.3, "r_bar": 5},
        "run": {"duration": 1, "dt": 0.005}
    }"#;

    #[test]
    fn minimal_file_uses_defaults() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(s.cbf.lambda, 1.0);
        assert_eq!(s.filter_mode, FilterMode::Strict);
        assert_eq!(s.cbf.fov(), Fov::Full);
        assert_eq!(s.run.seed, 0);
        assert_eq!(s.steps_per_epoch().unwrap(), 40);
        assert_eq!(s.total_steps(), 200);
        assert_eq!(s.cbf.geometry().fov_clearance, 0.6);
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("\"goals\"", "\"colour\": 1, \"goals\"");
        assert!(Scenario::from_json(&text).is_err());
        let text = MINIMAL.replace("\"r_bar\": 5", "\"r_bar\": 5, \"gamma\": 2");
        assert!(Scenario::from_json(&text).is_err());
    }

    #[test]
    fn step_must_divide_period() {
        let mut s = Scenario::from_json(MINIMAL).unwrap();
        s.run.dt = 0.003;
        assert!(s.steps_per_epoch().is_err());
    }

    #[test]
    fn sector_fov_and_missing_alpha2() {
        let mut s = Scenario::from_json(MINIMAL).unwrap();
        s.cbf.fov_degrees = Some(100.0);
        assert_eq!(s.cbf.fov(), Fov::Sector(100f64.to_radians()));
        s.cbf.alpha2 = None;
        assert!(s.cbf.cascade().is_err());
    }
}
