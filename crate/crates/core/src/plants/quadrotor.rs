use nalgebra::{DMatrix, DVector, Matrix3, SVector, Vector3};
use serde::{Deserialize, Serialize};

use super::PlantFields;
use crate::error::{CbfError, Result};

/// Smallest admissible `u_z + g` for the command inversion.
pub const COMMAND_EPS: f64 = 1e-6;
/// Singular vertical commands are raised to `−g + UZ_CLAMP_MARGIN`.
pub const UZ_CLAMP_MARGIN: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadParams {
    pub mass: f64,
    pub gravity: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        Self {
            mass: 0.1,
            gravity: 9.81,
            k1: 3.4e3,
            k2: 116.67,
            k3: 1950.0,
            k4: 3.9e3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadrotorState {
    pub q: Vector3<f64>,
    pub p: Vector3<f64>,
    /// Body to inertial rotation.
    pub r: Matrix3<f64>,
    /// Body angular velocity.
    pub omega: Vector3<f64>,
    pub thrust: f64,
}

type Packed = SVector<f64, 19>;

impl QuadrotorState {
    /// Level hover at `q`.
    pub fn hover(q: Vector3<f64>, params: &QuadParams) -> Self {
        Self {
            q,
            p: Vector3::zeros(),
            r: Matrix3::identity(),
            omega: Vector3::zeros(),
            thrust: params.mass * params.gravity,
        }
    }

    /// Position and velocity, the state seen by the safety filter.
    pub fn translational(&self) -> DVector<f64> {
        DVector::from_iterator(6, self.q.iter().chain(self.p.iter()).copied())
    }

    pub fn orthonormality_error(&self) -> f64 {
        (self.r * self.r.transpose() - Matrix3::identity()).norm()
    }

    fn pack(&self) -> Packed {
        let mut v = Packed::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.q);
        v.fixed_rows_mut::<3>(3).copy_from(&self.p);
        for (i, x) in self.r.iter().enumerate() {
            v[6 + i] = *x;
        }
        v.fixed_rows_mut::<3>(15).copy_from(&self.omega);
        v[18] = self.thrust;
        v
    }

    fn unpack(v: &Packed) -> Self {
        Self {
            q: v.fixed_rows::<3>(0).into_owned(),
            p: v.fixed_rows::<3>(3).into_owned(),
            r: Matrix3::from_column_slice(&v.as_slice()[6..15]),
            omega: v.fixed_rows::<3>(15).into_owned(),
            thrust: v[18],
        }
    }
}

/// Attitude and thrust set-points. The inner loop uses a zero yaw-rate command.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadCommands {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub thrust: f64,
}

/// 3-2-1 Euler angles `(φ, θ, ψ)` of `R = R_z(ψ) R_y(θ) R_x(φ)`.
pub fn euler_angles(r: &Matrix3<f64>) -> Vector3<f64> {
    let phi = r[(2, 1)].atan2(r[(2, 2)]);
    let theta = -r[(2, 0)].clamp(-1.0, 1.0).asin();
    let psi = r[(1, 0)].atan2(r[(0, 0)]);
    Vector3::new(phi, theta, psi)
}

/// Euler-angle rates `(φ̇, θ̇, ψ̇)` from body rates.
pub fn euler_rates(angles: &Vector3<f64>, omega: &Vector3<f64>) -> Vector3<f64> {
    let (sphi, cphi) = angles[0].sin_cos();
    let theta = angles[1];
    let (p, q, r) = (omega[0], omega[1], omega[2]);
    let a = q * sphi + r * cphi;
    Vector3::new(p + a * theta.tan(), q * cphi - r * sphi, a / theta.cos())
}

fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

fn derivative(x: &Packed, cmd: &QuadCommands, params: &QuadParams) -> Packed {
    let s = QuadrotorState::unpack(x);
    let e3 = Vector3::z();
    let angles = euler_angles(&s.r);
    let rates = euler_rates(&angles, &s.omega);
    let (sphi, cphi) = angles[0].sin_cos();
    let (sth, cth) = angles[1].sin_cos();
    let w = Matrix3::new(1.0, 0.0, -sth, 0.0, cphi, sphi * cth, 0.0, -sphi, cphi * cth);
    let pd = Vector3::new(
        params.k1 * (cmd.roll - angles[0]) - params.k2 * rates[0],
        params.k1 * (cmd.pitch - angles[1]) - params.k2 * rates[1],
        -params.k3 * rates[2],
    );
    let mut d = Packed::zeros();
    d.fixed_rows_mut::<3>(0).copy_from(&s.p);
    let acc = s.thrust / params.mass * (s.r * e3) - params.gravity * e3;
    d.fixed_rows_mut::<3>(3).copy_from(&acc);
    let r_dot = s.r * skew(&s.omega);
    for (i, v) in r_dot.iter().enumerate() {
        d[6 + i] = *v;
    }
    d.fixed_rows_mut::<3>(15).copy_from(&(w * pd));
    d[18] = params.k4 * (cmd.thrust - s.thrust);
    d
}

/// Nearest rotation in Frobenius norm.
fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut out = u * v_t;
    if out.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        out = u * v_t;
    }
    out
}

/// One RK4 step of the attitude-stabilised model with commands held over the
/// step, followed by re-orthonormalisation of `R`.
pub fn quad_full_step(
    state: &QuadrotorState,
    cmd: &QuadCommands,
    params: &QuadParams,
    t: f64,
    dt: f64,
) -> Result<QuadrotorState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(CbfError::InvalidArgument(format!("step must be positive, got {dt}")));
    }
    let x = state.pack();
    let k1 = derivative(&x, cmd, params);
    let k2 = derivative(&(x + 0.5 * dt * k1), cmd, params);
    let k3 = derivative(&(x + 0.5 * dt * k2), cmd, params);
    let k4 = derivative(&(x + dt * k3), cmd, params);
    let next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if next.iter().any(|v| !v.is_finite()) {
        return Err(CbfError::Integration {
            t,
            reason: format!("quadrotor state became non-finite (dt = {dt})"),
        });
    }
    let mut out = QuadrotorState::unpack(&next);
    out.r = orthonormalize(&out.r);
    out.thrust = out.thrust.max(0.0);
    Ok(out)
}

/// Inverts a commanded inertial acceleration into attitude and thrust
/// set-points. Fails when `u_z + g ≤ COMMAND_EPS`.
pub fn quad_command_map(u: &Vector3<f64>, params: &QuadParams) -> Result<QuadCommands> {
    let denom = u.z + params.gravity;
    if !(denom > COMMAND_EPS) || !u.iter().all(|v| v.is_finite()) {
        return Err(CbfError::SingularCommand(u.z));
    }
    let pitch = (u.x / denom).atan();
    let roll = (-u.y * pitch.cos() / denom).atan();
    let thrust = denom * params.mass / (roll.cos() * pitch.cos());
    Ok(QuadCommands {
        yaw: 0.0,
        pitch,
        roll,
        thrust,
    })
}

/// Inertial acceleration produced by the set-points once the inner loop has
/// converged (zero yaw).
pub fn reconstruct_acceleration(cmd: &QuadCommands, params: &QuadParams) -> Vector3<f64> {
    let (sth, cth) = cmd.pitch.sin_cos();
    let (sphi, cphi) = cmd.roll.sin_cos();
    let (spsi, cpsi) = cmd.yaw.sin_cos();
    let body_z = Vector3::new(
        cpsi * sth * cphi + spsi * sphi,
        spsi * sth * cphi - cpsi * sphi,
        cth * cphi,
    );
    cmd.thrust / params.mass * body_z - params.gravity * Vector3::z()
}

/// Double-integrator approximation on `x = (q, p)`.
pub fn quad_approx_fields(x: &DVector<f64>) -> PlantFields {
    assert_eq!(x.len(), 6, "translational state has six entries");
    let mut f = DVector::zeros(6);
    f.rows_mut(0, 3).copy_from(&x.rows(3, 3));
    let mut g = DMatrix::zeros(6, 3);
    let mut dfdx = DMatrix::zeros(6, 6);
    for i in 0..3 {
        g[(3 + i, i)] = 1.0;
        dfdx[(i, 3 + i)] = 1.0;
    }
    PlantFields { f, g, dfdx }
}

pub fn quad_desired(q: &Vector3<f64>, p: &Vector3<f64>, goal: &Vector3<f64>) -> Vector3<f64> {
    (goal - q).map(|e| 3.0 * e.tanh()) - 2.0 * p
}
