//! Control-affine plant models and their nominal controllers.

mod quadrotor;
mod unicycle;

pub use quadrotor::{
    euler_angles, euler_rates, quad_approx_fields, quad_command_map, quad_desired, quad_full_step,
    reconstruct_acceleration, QuadCommands, QuadParams, QuadrotorState, COMMAND_EPS, UZ_CLAMP_MARGIN,
};
pub use unicycle::{unicycle_desired, unicycle_fields, UnicycleGains, UnicycleState, GOAL_EPS};

use nalgebra::{DMatrix, DVector};

use crate::error::{CbfError, Result};

/// `ẋ = f(x) + g(x) u` evaluated at one state, with the drift Jacobian.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantFields {
    pub f: DVector<f64>,
    pub g: DMatrix<f64>,
    pub dfdx: DMatrix<f64>,
}

impl PlantFields {
    pub fn state_dim(&self) -> usize {
        self.f.len()
    }

    pub fn input_dim(&self) -> usize {
        self.g.ncols()
    }

    pub fn xdot(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.f + &self.g * u
    }
}

/// One classical RK4 step of `ẋ = rhs(t, x)`.
pub fn rk4_step<F>(mut rhs: F, t: f64, x: &DVector<f64>, dt: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = rhs(t, x)?;
    let k2 = rhs(t + 0.5 * dt, &(x + 0.5 * dt * &k1))?;
    let k3 = rhs(t + 0.5 * dt, &(x + 0.5 * dt * &k2))?;
    let k4 = rhs(t + dt, &(x + dt * &k3))?;
    let next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if next.iter().any(|v| !v.is_finite()) {
        return Err(CbfError::Integration {
            t,
            reason: "state became non-finite".into(),
        });
    }
    Ok(next)
}
