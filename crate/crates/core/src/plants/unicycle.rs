use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use super::PlantFields;

/// Goal distance below which the heading to the goal is undefined and the
/// nominal controller only brakes.
pub const GOAL_EPS: f64 = 1e-6;

/// Position, speed and heading; inputs are `(v̇, θ̇)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnicycleState {
    pub q_x: f64,
    pub q_y: f64,
    pub v: f64,
    pub theta: f64,
}

impl UnicycleState {
    pub fn new(q_x: f64, q_y: f64, v: f64, theta: f64) -> Self {
        Self { q_x, q_y, v, theta }
    }

    /// Panics unless `x` has exactly four entries.
    pub fn from_vector(x: &DVector<f64>) -> Self {
        assert_eq!(x.len(), 4, "unicycle state has four entries");
        Self::new(x[0], x[1], x[2], x[3])
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.q_x, self.q_y, self.v, self.theta])
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.q_x, self.q_y)
    }

    /// Heading wrapped to (−π, π].
    pub fn wrapped_heading(&self) -> f64 {
        let w = self.theta.rem_euclid(2.0 * PI);
        if w > PI {
            w - 2.0 * PI
        } else {
            w
        }
    }
}

pub fn unicycle_fields(x: &UnicycleState) -> PlantFields {
    let (s, c) = x.theta.sin_cos();
    let f = DVector::from_vec(vec![x.v * c, x.v * s, 0.0, 0.0]);
    let mut g = DMatrix::zeros(4, 2);
    g[(2, 0)] = 1.0;
    g[(3, 1)] = 1.0;
    let mut dfdx = DMatrix::zeros(4, 4);
    dfdx[(0, 2)] = c;
    dfdx[(0, 3)] = -x.v * s;
    dfdx[(1, 2)] = s;
    dfdx[(1, 3)] = x.v * c;
    PlantFields { f, g, dfdx }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnicycleGains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl Default for UnicycleGains {
    fn default() -> Self {
        Self {
            k1: 0.5,
            k2: 3.0,
            k3: 3.0,
        }
    }
}

/// Nominal go-to-goal controller. At the goal itself it brakes.
pub fn unicycle_desired(x: &UnicycleState, goal: &Vector2<f64>, gains: &UnicycleGains) -> DVector<f64> {
    let UnicycleGains { k1, k2, k3 } = *gains;
    let dq = x.position() - goal;
    let rho = dq.norm();
    if rho < GOAL_EPS {
        return DVector::from_vec(vec![-(k1 + k3) * x.v, 0.0]);
    }
    let delta = dq.y.atan2(dq.x) - x.theta + PI;
    let (sd, cd) = delta.sin_cos();
    let u1 = -(k1 + k3) * x.v + (1.0 + k1 * k3) * rho * cd + k1 * (rho * k2 + x.v) * sd * sd;
    let u2 = (k2 + x.v / rho) * sd;
    DVector::from_vec(vec![u1, u2])
}
