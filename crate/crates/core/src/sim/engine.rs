//! Closed loop: scan at every `kT_s`, rebuild the barrier buffer, filter the
//! nominal control at every integration stage, integrate.

use nalgebra::{DVector, Vector2, Vector3};

use crate::barrier::{build_local_barrier, BarrierBuffer, LocalBarrier};
use crate::error::{CbfError, Result};
use crate::filter::{cascade, solve_qp, CascadeConfig, ConstraintRow, FilterMode, QpStatus};
use crate::perception::{fov_boundary, scan, Fov, ScanParams, World};
use crate::plants::{
    quad_approx_fields, quad_command_map, quad_desired, quad_full_step, rk4_step,
    unicycle_desired, unicycle_fields, QuadCommands, QuadParams, QuadrotorState, UnicycleGains,
    UnicycleState, COMMAND_EPS, UZ_CLAMP_MARGIN,
};

use super::log::{EpochRecord, Outcome, RunLog, RunSummary, StepRecord};
use super::scenario::{PlantKind, Scenario};

/// Tolerance on `h` and `ψ₁` used for the "safe" verdict.
pub const SAFETY_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
enum PlantState {
    Unicycle(DVector<f64>),
    Approx(DVector<f64>),
    Full(QuadrotorState),
}

impl PlantState {
    fn initial(scenario: &Scenario, quad: &QuadParams) -> Self {
        let x0 = DVector::from_column_slice(&scenario.initial_state);
        match scenario.plant {
            PlantKind::Unicycle => PlantState::Unicycle(x0),
            PlantKind::QuadApprox => PlantState::Approx(x0),
            PlantKind::QuadFull => {
                let mut s = QuadrotorState::hover(Vector3::new(x0[0], x0[1], x0[2]), quad);
                s.p = Vector3::new(x0[3], x0[4], x0[5]);
                PlantState::Full(s)
            }
        }
    }

    /// State seen by the barrier and the filter.
    fn filter_state(&self) -> DVector<f64> {
        match self {
            PlantState::Unicycle(x) | PlantState::Approx(x) => x.clone(),
            PlantState::Full(s) => s.translational(),
        }
    }

    fn position(&self) -> Vector3<f64> {
        match self {
            PlantState::Unicycle(x) => Vector3::new(x[0], x[1], 0.0),
            PlantState::Approx(x) => Vector3::new(x[0], x[1], x[2]),
            PlantState::Full(s) => s.q,
        }
    }

    fn heading(&self) -> f64 {
        match self {
            PlantState::Unicycle(x) => x[3],
            _ => 0.0,
        }
    }

    fn logged(&self) -> Vec<f64> {
        match self {
            PlantState::Unicycle(x) => {
                let s = UnicycleState::from_vector(x);
                vec![s.q_x, s.q_y, s.v, s.wrapped_heading()]
            }
            PlantState::Approx(x) => x.iter().copied().collect(),
            PlantState::Full(s) => {
                let e = crate::plants::euler_angles(&s.r);
                let mut v: Vec<f64> = s.q.iter().chain(s.p.iter()).copied().collect();
                v.extend(e.iter());
                v.extend(s.omega.iter());
                v.push(s.thrust);
                v
            }
        }
    }
}

pub fn state_labels(plant: PlantKind) -> Vec<&'static str> {
    match plant {
        PlantKind::Unicycle => vec!["q_x", "q_y", "v", "theta"],
        PlantKind::QuadApprox => vec!["q_x", "q_y", "q_z", "p_x", "p_y", "p_z"],
        PlantKind::QuadFull => vec![
            "q_x", "q_y", "q_z", "p_x", "p_y", "p_z", "roll", "pitch", "yaw", "omega_x", "omega_y",
            "omega_z", "thrust",
        ],
    }
}

pub fn input_labels(plant: PlantKind) -> Vec<&'static str> {
    match plant {
        PlantKind::Unicycle => vec!["1", "2"],
        _ => vec!["x", "y", "z"],
    }
}

/// Filter output at one `(x, t)`.
#[derive(Clone, Debug)]
struct ControlEval {
    u_d: DVector<f64>,
    u: DVector<f64>,
    h: f64,
    psi1: f64,
    status: QpStatus,
    row: ConstraintRow,
}

struct Controller {
    plant: PlantKind,
    cascade: CascadeConfig,
    mode: FilterMode,
    gains: UnicycleGains,
}

impl Controller {
    fn eval(&self, buffer: &BarrierBuffer, x: &DVector<f64>, t: f64, goal: &[f64]) -> Result<ControlEval> {
        let (fields, u_d) = match self.plant {
            PlantKind::Unicycle => {
                let s = UnicycleState::from_vector(x);
                let u_d = unicycle_desired(&s, &Vector2::new(goal[0], goal[1]), &self.gains);
                (unicycle_fields(&s), u_d)
            }
            PlantKind::QuadApprox | PlantKind::QuadFull => {
                let q = Vector3::new(x[0], x[1], x[2]);
                let p = Vector3::new(x[3], x[4], x[5]);
                let u_d = quad_desired(&q, &p, &Vector3::new(goal[0], goal[1], goal[2]));
                (quad_approx_fields(x), DVector::from_column_slice(u_d.as_slice()))
            }
        };
        let jet = buffer.composite(x, t)?;
        let eval = cascade(&jet, &fields, &self.cascade)?;
        let sol = solve_qp(&eval.row, &u_d, self.mode)?;
        Ok(ControlEval {
            u_d,
            u: sol.u,
            h: eval.h,
            psi1: eval.psi1,
            status: sol.status,
            row: eval.row,
        })
    }
}

struct Perception<'a> {
    world: &'a World,
    scenario: &'a Scenario,
}

impl Perception<'_> {
    fn local_barrier(&self, state: &PlantState, epoch: u64) -> Result<LocalBarrier> {
        let cbf = &self.scenario.cbf;
        let origin = state.position();
        let params = ScanParams {
            rays: cbf.rays,
            r_bar: cbf.r_bar,
            fov: cbf.fov(),
            heading: state.heading(),
        };
        let s = scan(self.world, &origin, &params, epoch)?;
        let samples = match (cbf.fov(), cbf.fov_samples) {
            (Fov::Sector(width), l) if l > 0 => {
                Some(fov_boundary(&origin, state.heading(), width, cbf.r_bar, l)?)
            }
            _ => None,
        };
        build_local_barrier(&s, samples.as_ref(), &cbf.geometry(), cbf.kappa1)
    }
}

/// Maps a filtered acceleration to inner-loop set-points, raising singular
/// vertical commands. Returns whether the command was clamped.
fn full_commands(u: &DVector<f64>, quad: &QuadParams) -> Result<(QuadCommands, bool)> {
    let mut acc = Vector3::new(u[0], u[1], u[2]);
    let mut clamped = false;
    if acc.z + quad.gravity <= COMMAND_EPS {
        log::warn!(
            "vertical command {:.4} is at or below -g; clamped to {:.4}",
            acc.z,
            -quad.gravity + UZ_CLAMP_MARGIN
        );
        acc.z = -quad.gravity + UZ_CLAMP_MARGIN;
        clamped = true;
    }
    Ok((quad_command_map(&acc, quad)?, clamped))
}

fn step_record(t: f64, state: &PlantState, c: &ControlEval, goal_index: usize, penetrations: usize) -> StepRecord {
    StepRecord {
        t,
        state: state.logged(),
        u_d: c.u_d.iter().copied().collect(),
        u: c.u.iter().copied().collect(),
        h: c.h,
        psi1: c.psi1,
        status: c.status,
        a: c.row.a.iter().copied().collect(),
        b: c.row.b,
        goal_index,
        penetrations,
    }
}

/// Runs a scenario to completion or to the first abort. Invalid scenarios are
/// errors; infeasibility in strict mode and integration failures end the run
/// early and are reported in the log's outcome.
pub fn run(scenario: &Scenario) -> Result<RunLog> {
    let diagnostics = static_diagnostics(scenario);
    if !diagnostics.is_empty() {
        return Err(CbfError::Scenario(diagnostics.join("; ")));
    }
    let quad = QuadParams::default();
    let spe = scenario.steps_per_epoch()?;
    let n_steps = scenario.total_steps();
    let dt = scenario.run.dt;
    let world = &scenario.world;
    let perception = Perception { world, scenario };
    let controller = Controller {
        plant: scenario.plant,
        cascade: scenario.cbf.cascade()?,
        mode: scenario.filter_mode,
        gains: UnicycleGains::default(),
    };
    let goals = &scenario.goals;

    let mut state = PlantState::initial(scenario, &quad);
    let mut goal_index = 0usize;
    let mut log = RunLog::new(scenario);
    let mut outcome = Outcome::Completed;
    let mut message = String::new();

    let first = perception.local_barrier(&state, 0)?;
    log.epochs.push(EpochRecord::new(&first, 0.0));
    let mut buffer = BarrierBuffer::new(first, scenario.cbf.buffer_config()?)?;

    for i in 0..=n_steps {
        let t = i as f64 * dt;
        if i > 0 && i % spe == 0 {
            let epoch = (i / spe) as u64;
            let next = match perception.local_barrier(&state, epoch) {
                Ok(b) => b,
                Err(e) => {
                    outcome = Outcome::IntegrationFailure;
                    message = format!("perception failed at t = {t}: {e}");
                    break;
                }
            };
            log.epochs.push(EpochRecord::new(&next, t));
            buffer = buffer.advance(next)?;
        }

        let x = state.filter_state();
        let control = match controller.eval(&buffer, &x, t, &goals[goal_index]) {
            Ok(c) => c,
            Err(e) => {
                (outcome, message) = abort_outcome(e, t);
                break;
            }
        };
        let penetrations = world.penetrated_by(&state.position()).len();
        log.push_step(step_record(t, &state, &control, goal_index, penetrations));
        if i == n_steps {
            break;
        }

        let goal = &goals[goal_index];
        let stepped = match &state {
            PlantState::Unicycle(x) | PlantState::Approx(x) => {
                let plant = scenario.plant;
                let rhs = |tau: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
                    let c = controller.eval(&buffer, y, tau, goal)?;
                    Ok(match plant {
                        PlantKind::Unicycle => unicycle_fields(&UnicycleState::from_vector(y)).xdot(&c.u),
                        _ => quad_approx_fields(y).xdot(&c.u),
                    })
                };
                rk4_step(rhs, t, x, dt).map(|next| match plant {
                    PlantKind::Unicycle => PlantState::Unicycle(next),
                    _ => PlantState::Approx(next),
                })
            }
            PlantState::Full(s) => full_commands(&control.u, &quad).and_then(|(cmd, clamped)| {
                if clamped {
                    log.summary.command_clamps += 1;
                }
                quad_full_step(s, &cmd, &quad, t, dt).map(PlantState::Full)
            }),
        };
        state = match stepped {
            Ok(s) => s,
            Err(e) => {
                (outcome, message) = abort_outcome(e, t);
                break;
            }
        };
        if let PlantState::Full(s) = &state {
            log.summary.max_orthonormality_error =
                log.summary.max_orthonormality_error.max(s.orthonormality_error());
        }
        if goal_index + 1 < goals.len() && goal_distance(&state, &goals[goal_index]) < scenario.goal_radius {
            goal_index += 1;
        }
    }

    let final_distance = goal_distance(&state, goals.last().expect("validated goals"));
    log.finish(outcome, message, final_distance, &state.logged());
    Ok(log)
}

fn abort_outcome(e: CbfError, t: f64) -> (Outcome, String) {
    match e {
        CbfError::Infeasible { .. } => (Outcome::InfeasibleAbort, format!("t = {t}: {e}")),
        other => (Outcome::IntegrationFailure, format!("t = {t}: {other}")),
    }
}

fn goal_distance(state: &PlantState, goal: &[f64]) -> f64 {
    let p = state.position();
    goal.iter()
        .enumerate()
        .map(|(i, g)| (p[i] - g).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Checks that need no perception: shapes, signs and plant consistency.
fn static_diagnostics(s: &Scenario) -> Vec<String> {
    let mut out = Vec::new();
    let c = &s.cbf;
    if let Err(e) = s.world.validate() {
        out.push(format!("invalid world: {e}"));
    }
    let dim = s.plant.dimension();
    if s.world.dimension != dim {
        out.push(format!(
            "plant {} needs a {dim}-dimensional world, got {}",
            s.plant.as_str(),
            s.world.dimension
        ));
    }
    if s.initial_state.len() != s.plant.initial_state_len() {
        out.push(format!(
            "initial state for {} needs {} entries, got {}",
            s.plant.as_str(),
            s.plant.initial_state_len(),
            s.initial_state.len()
        ));
    }
    if s.initial_state.iter().any(|v| !v.is_finite()) {
        out.push("initial state must be finite".into());
    }
    if s.goals.is_empty() {
        out.push("at least one goal is required".into());
    }
    for (i, g) in s.goals.iter().enumerate() {
        if g.len() != dim || g.iter().any(|v| !v.is_finite()) {
            out.push(format!("goal {i} must have {dim} finite coordinates"));
        }
    }
    if !(s.goal_radius > 0.0) {
        out.push("goal radius must be positive".into());
    }
    let alpha2_bad = c.relative_degree >= 2 && !c.alpha2.is_some_and(|a| a > 0.0);
    if !(c.alpha1 > 0.0) || alpha2_bad {
        out.push("class-K gain must be positive".into());
    }
    if c.relative_degree != s.plant.relative_degree() {
        out.push(format!(
            "relative degree {} does not match plant {} (needs {})",
            c.relative_degree,
            s.plant.as_str(),
            s.plant.relative_degree()
        ));
    }
    for (name, v) in [
        ("kappa1", c.kappa1),
        ("kappa", c.kappa),
        ("sample_period", c.sample_period),
        ("d_w", c.d_w),
        ("d_s", c.d_s),
        ("r_bar", c.r_bar),
        ("dt", s.run.dt),
    ] {
        if !(v.is_finite() && v > 0.0) {
            out.push(format!("{name} must be positive"));
        }
    }
    if !(c.lambda.is_finite() && c.lambda >= 1.0) {
        out.push("lambda must be at least 1".into());
    }
    if !(s.run.duration.is_finite() && s.run.duration >= 0.0) {
        out.push("duration must be non-negative".into());
    }
    if c.window == 0 {
        out.push("window N must be at least 1".into());
    }
    if c.rays == 0 {
        out.push("rays P must be at least 1".into());
    }
    if let Some(deg) = c.fov_degrees {
        if !(deg > 0.0 && deg <= 360.0) {
            out.push("fov_degrees must be in (0, 360]".into());
        } else if deg < 360.0 {
            if dim != 2 {
                out.push("a limited field of view is only supported for planar plants".into());
            }
            if c.fov_samples < 2 {
                out.push("a limited field of view needs fov_samples >= 2".into());
            }
        }
    }
    if s.run.dt > 0.0 && c.sample_period > 0.0 {
        if let Err(e) = s.steps_per_epoch() {
            out.push(e.to_string());
        }
    }
    if s.plant == PlantKind::QuadFull {
        // Explicit RK4 loses stability on the thrust lag beyond k4·dt ≈ 2.78.
        let k4 = QuadParams::default().k4;
        if s.run.dt * k4 > 2.5 {
            out.push(format!(
                "dt = {} is too large for the thrust loop (need dt <= {:.2e})",
                s.run.dt,
                2.5 / k4
            ));
        }
    }
    out
}

/// Diagnostics for a scenario; empty when it can be run. Beyond the static
/// checks, the initial state must lie in the safe set of the first scan:
/// `h(x₀, 0) ≥ 0` and `ψ₁(x₀, 0) ≥ 0`.
pub fn validate(s: &Scenario) -> Vec<String> {
    let mut out = static_diagnostics(s);
    if !out.is_empty() {
        return out;
    }
    let quad = QuadParams::default();
    let state = PlantState::initial(s, &quad);
    let inside = s.world.penetrated_by(&state.position());
    if !inside.is_empty() {
        out.push(format!("initial state unsafe: inside obstacle {}", inside[0]));
        return out;
    }
    let first = match (Perception { world: &s.world, scenario: s }).local_barrier(&state, 0) {
        Ok(b) => b,
        Err(e) => {
            out.push(format!("first scan failed: {e}"));
            return out;
        }
    };
    let result = s.cbf.cascade().and_then(|cascade_cfg| {
        let buffer = BarrierBuffer::new(first, s.cbf.buffer_config()?)?;
        let x = state.filter_state();
        let jet = buffer.composite(&x, 0.0)?;
        let fields = match s.plant {
            PlantKind::Unicycle => unicycle_fields(&UnicycleState::from_vector(&x)),
            _ => quad_approx_fields(&x),
        };
        cascade(&jet, &fields, &cascade_cfg)
    });
    match result {
        Ok(eval) => {
            if eval.h < 0.0 {
                out.push(format!("initial state unsafe: h(x0, 0) = {:.6}", eval.h));
            } else if eval.psi1 < 0.0 {
                out.push(format!("initial state unsafe: psi1(x0, 0) = {:.6}", eval.psi1));
            }
        }
        Err(e) => out.push(format!("initial barrier evaluation failed: {e}")),
    }
    out
}

impl RunSummary {
    /// Safe when no obstacle was entered and `h`, `ψ₁` stayed above
    /// `−SAFETY_TOL`.
    pub fn is_safe(&self) -> bool {
        self.penetrating_steps == 0 && self.min_h >= -SAFETY_TOL && self.min_psi1 >= -SAFETY_TOL
    }
}
