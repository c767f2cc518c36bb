//! Local barriers synthesized from range scans and the time-varying
//! soft-maximum composite over the most recent ones.
//!
//! Each detection `(r, θ)` yields an ellipse (ellipsoid in 3-D)
//! `σ(p) = (p - c)ᵀ R P Rᵀ (p - c) - 1` stretching from the detected point
//! out to the sensor range; a local barrier is the soft minimum of all of
//! them. The composite keeps the `N + 1` newest local barriers and blends
//! the newest in and the oldest out with the smooth step η.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DVector, Matrix3, Vector3};

use crate::error::{CbfError, Result};
use crate::homotopy::{eta_triplet, HomotopyParams};
use crate::jet::{Jet2, PointJet};
use crate::perception::{FovBoundarySamples, Scan};
use crate::soft_compose::{softmax_jet, softmin_weights, SoftParams};

/// Weights below this threshold are dropped from the jet accumulation.
const NEGLIGIBLE_WEIGHT: f64 = 1e-20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarrierGeometry {
    /// Semi-minor axis length (m).
    pub d_w: f64,
    /// Safety margin added to the semi-major axis (m).
    pub d_s: f64,
    /// Sensor range (m).
    pub r_bar: f64,
    /// Sector-edge samples closer than this to the sensor are not turned into
    /// ellipses, so the sensor position itself stays outside every edge ellipse.
    /// Directions outside the sector are closed off by pseudo-detections at
    /// this range.
    pub fov_clearance: f64,
}

impl BarrierGeometry {
    pub fn new(d_w: f64, d_s: f64, r_bar: f64) -> Self {
        Self {
            d_w,
            d_s,
            r_bar,
            fov_clearance: d_w + d_s,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.d_w.is_finite() && self.d_w > 0.0) {
            return Err(CbfError::InvalidArgument("d_w must be positive".into()));
        }
        if !(self.d_s.is_finite() && self.d_s >= 0.0) {
            return Err(CbfError::InvalidArgument("d_s must be nonnegative".into()));
        }
        if !(self.r_bar.is_finite() && self.r_bar > 0.0) {
            return Err(CbfError::InvalidArgument("r_bar must be positive".into()));
        }
        if !(self.fov_clearance.is_finite() && self.fov_clearance >= 0.0) {
            return Err(CbfError::InvalidArgument("fov_clearance must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One ellipse/ellipsoid primitive. Planar primitives leave the third axis
/// unused (zero inverse-square length, identity rotation row).
#[derive(Clone, Debug, PartialEq)]
pub struct EllipsoidBarrier {
    pub dim: usize,
    pub center: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    /// `(a⁻², d_w⁻², d_w⁻²)`; the last entry is zero in the plane.
    pub inv_sq_axes: Vector3<f64>,
    /// Negated primitive, nonnegative inside instead of outside.
    pub inward: bool,
    /// `R P Rᵀ`.
    shape: Matrix3<f64>,
}

impl EllipsoidBarrier {
    /// Primitive for a detection at `range` along `direction` (unit) from
    /// `origin`.
    pub fn from_detection(
        dim: usize,
        origin: &Vector3<f64>,
        direction: &Vector3<f64>,
        range: f64,
        geom: &BarrierGeometry,
    ) -> Result<Self> {
        if !(range.is_finite() && range >= 0.0 && range <= geom.r_bar + 1e-12) {
            return Err(CbfError::InvalidArgument(format!(
                "detected range {range} outside [0, {}]",
                geom.r_bar
            )));
        }
        let range = range.min(geom.r_bar);
        let semi_major = (geom.r_bar - range) / 2.0 + geom.d_s;
        if semi_major <= 0.0 {
            return Err(CbfError::InvalidArgument(
                "degenerate ellipse: zero semi-major axis (d_s = 0 and no free range)".into(),
            ));
        }
        let center = origin + (geom.r_bar + range) / 2.0 * direction;
        let minor = geom.d_w.powi(-2);
        let (rotation, inv_sq_axes) = match dim {
            2 => {
                let (s, c) = (direction.y, direction.x);
                (
                    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
                    Vector3::new(semi_major.powi(-2), minor, 0.0),
                )
            }
            3 => (frame_from_direction(direction), Vector3::new(semi_major.powi(-2), minor, minor)),
            d => {
                return Err(CbfError::InvalidArgument(format!(
                    "unsupported primitive dimension {d}"
                )))
            }
        };
        let orth = (rotation * rotation.transpose() - Matrix3::identity()).amax();
        if orth > 1e-9 {
            return Err(CbfError::Numerical(format!(
                "primitive rotation not orthonormal (|RRᵀ - I| = {orth:e})"
            )));
        }
        let shape = rotation * Matrix3::from_diagonal(&inv_sq_axes) * rotation.transpose();
        Ok(Self {
            dim,
            center,
            rotation,
            inv_sq_axes,
            inward: false,
            shape,
        })
    }

    /// `1 − ‖p − origin‖² / radius²`: nonnegative on the sensed ball only.
    pub fn sensing_range(dim: usize, origin: &Vector3<f64>, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(CbfError::InvalidArgument("sensing radius must be positive".into()));
        }
        if !(dim == 2 || dim == 3) {
            return Err(CbfError::InvalidArgument(format!("unsupported primitive dimension {dim}")));
        }
        let mut inv_sq_axes = Vector3::repeat(radius.powi(-2));
        if dim == 2 {
            inv_sq_axes[2] = 0.0;
        }
        Ok(Self {
            dim,
            center: *origin,
            rotation: Matrix3::identity(),
            inv_sq_axes,
            inward: true,
            shape: Matrix3::from_diagonal(&inv_sq_axes),
        })
    }

    fn sign(&self) -> f64 {
        if self.inward {
            -1.0
        } else {
            1.0
        }
    }

    pub fn semi_major(&self) -> f64 {
        self.inv_sq_axes[0].powf(-0.5)
    }

    pub fn shape(&self) -> &Matrix3<f64> {
        &self.shape
    }

    pub fn value(&self, p: &Vector3<f64>) -> f64 {
        let d = p - self.center;
        self.sign() * (d.dot(&(self.shape * d)) - 1.0)
    }

    pub fn jet(&self, p: &Vector3<f64>) -> PointJet {
        let d = p - self.center;
        let qd = self.shape * d;
        let sign = self.sign();
        PointJet {
            dim: self.dim,
            value: sign * (d.dot(&qd) - 1.0),
            grad: 2.0 * sign * qd,
            hess: 2.0 * sign * self.shape,
        }
    }
}

/// Orthonormal frame whose first column is the ray direction; the other two
/// columns are the local azimuth and elevation directions.
fn frame_from_direction(direction: &Vector3<f64>) -> Matrix3<f64> {
    let d = direction.normalize();
    let horizontal = (d.x * d.x + d.y * d.y).sqrt();
    let (e_az, e_el) = if horizontal > 1e-12 {
        let e_az = Vector3::new(-d.y / horizontal, d.x / horizontal, 0.0);
        (e_az, d.cross(&e_az))
    } else {
        // Straight up or down; any horizontal pair completes the frame.
        let e_az = Vector3::y();
        (e_az, d.cross(&e_az))
    };
    Matrix3::from_columns(&[d, e_az, e_el])
}

/// Soft minimum of one epoch's primitives.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalBarrier {
    pub epoch: u64,
    pub dim: usize,
    pub kappa1: f64,
    pub scan_origin: Vector3<f64>,
    pub r_bar: f64,
    pub primitives: Vec<EllipsoidBarrier>,
    /// How many leading primitives came from detections. Field-of-view
    /// primitives follow, then the sensing-range primitive last.
    pub detection_count: usize,
}

pub fn build_local_barrier(
    scan: &Scan,
    fov_samples: Option<&FovBoundarySamples>,
    geom: &BarrierGeometry,
    kappa1: f64,
) -> Result<LocalBarrier> {
    geom.validate()?;
    if !(kappa1.is_finite() && kappa1 > 0.0) {
        return Err(CbfError::InvalidArgument("kappa1 must be positive".into()));
    }
    if scan.rays.is_empty() {
        return Err(CbfError::InvalidArgument("cannot build a barrier from an empty scan".into()));
    }
    let mut primitives = Vec::with_capacity(
        scan.rays.len() + fov_samples.map_or(0, |f| f.points.len()),
    );
    for ray in &scan.rays {
        primitives.push(EllipsoidBarrier::from_detection(
            scan.dimension,
            &scan.origin,
            &ray.direction,
            ray.range,
            geom,
        )?);
    }
    let detection_count = primitives.len();
    if let Some(samples) = fov_samples {
        for point in &samples.points {
            let offset = point - samples.origin;
            let range = offset.norm();
            if range < geom.fov_clearance || range <= 0.0 {
                continue;
            }
            primitives.push(EllipsoidBarrier::from_detection(
                scan.dimension,
                &samples.origin,
                &(offset / range),
                range,
                geom,
            )?);
        }
        if geom.fov_clearance > 0.0 {
            // Same angular density as the scan.
            let spacing = samples.fov / scan.rays.len() as f64;
            let count = ((2.0 * PI - samples.fov) / spacing).ceil() as usize;
            for dir in samples.rear_directions(count) {
                primitives.push(EllipsoidBarrier::from_detection(
                    scan.dimension,
                    &samples.origin,
                    &dir,
                    geom.fov_clearance.min(geom.r_bar),
                    geom,
                )?);
            }
        }
    }
    primitives.push(EllipsoidBarrier::sensing_range(scan.dimension, &scan.origin, geom.r_bar)?);
    Ok(LocalBarrier {
        epoch: scan.epoch,
        dim: scan.dimension,
        kappa1,
        scan_origin: scan.origin,
        r_bar: geom.r_bar,
        primitives,
        detection_count,
    })
}

impl LocalBarrier {
    /// Position of a state vector: its first `dim` entries.
    pub fn position_of(&self, state: &DVector<f64>) -> Vector3<f64> {
        let mut p = Vector3::zeros();
        for i in 0..self.dim {
            p[i] = state[i];
        }
        p
    }

    pub fn value_at(&self, p: &Vector3<f64>) -> f64 {
        let sigmas: Vec<f64> = self.primitives.iter().map(|e| e.value(p)).collect();
        let params = SoftParams::new(self.kappa1, sigmas.len()).expect("nonempty barrier");
        softmin_weights(&params, &sigmas).expect("finite primitives").value
    }

    /// Soft-min jet in position space.
    pub fn point_jet(&self, p: &Vector3<f64>) -> PointJet {
        let mut sigmas = Vec::with_capacity(self.primitives.len());
        let mut grads = Vec::with_capacity(self.primitives.len());
        for e in &self.primitives {
            let d = p - e.center;
            let qd = e.shape * d;
            let sign = e.sign();
            sigmas.push(sign * (d.dot(&qd) - 1.0));
            grads.push(2.0 * sign * qd);
        }
        let params = SoftParams::new(self.kappa1, sigmas.len()).expect("nonempty barrier");
        let soft = softmin_weights(&params, &sigmas).expect("finite primitives");

        let mut grad = Vector3::zeros();
        let mut hess = Matrix3::zeros();
        let mut moment = Matrix3::zeros();
        for ((w, g), e) in soft.weights.iter().zip(&grads).zip(&self.primitives) {
            if *w < NEGLIGIBLE_WEIGHT {
                continue;
            }
            grad += *w * g;
            hess += (2.0 * w * e.sign()) * e.shape;
            moment += *w * (g * g.transpose());
        }
        moment -= grad * grad.transpose();
        hess -= self.kappa1 * moment;
        PointJet {
            dim: self.dim,
            value: soft.value,
            grad,
            hess,
        }
    }

    /// Jet of `b_k` over `(x, t)`; all time derivatives vanish.
    pub fn eval(&self, state: &DVector<f64>) -> Jet2 {
        Jet2::from_position(&self.point_jet(&self.position_of(state)), state.len())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BufferConfig {
    /// Window size `N`.
    pub window: usize,
    /// Perception period `T_s` (s).
    pub sample_period: f64,
    /// Soft-max sharpness κ.
    pub kappa: f64,
    pub homotopy: HomotopyParams,
}

impl BufferConfig {
    fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(CbfError::InvalidArgument("window N must be at least 1".into()));
        }
        if !(self.sample_period.is_finite() && self.sample_period > 0.0) {
            return Err(CbfError::InvalidArgument("sample period must be positive".into()));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(CbfError::InvalidArgument("kappa must be positive".into()));
        }
        Ok(())
    }
}

/// The `N + 1` most recent local barriers `b_k, …, b_{k−N}`.
#[derive(Clone, Debug)]
pub struct BarrierBuffer {
    /// Newest first.
    history: VecDeque<Arc<LocalBarrier>>,
    config: BufferConfig,
    epoch: u64,
}

/// Round-off allowance on the epoch interval, in units of `T_s`.
const EPOCH_SLACK: f64 = 1e-9;

impl BarrierBuffer {
    /// Warm buffer whose whole history is the first barrier.
    pub fn new(first: LocalBarrier, config: BufferConfig) -> Result<Self> {
        config.validate()?;
        let epoch = first.epoch;
        let first = Arc::new(first);
        let history = (0..=config.window).map(|_| Arc::clone(&first)).collect();
        Ok(Self {
            history,
            config,
            epoch,
        })
    }

    /// Buffer with an explicit history `[b_k, b_{k−1}, …, b_{k−N}]`.
    pub fn from_history(history: Vec<LocalBarrier>, config: BufferConfig) -> Result<Self> {
        config.validate()?;
        if history.len() != config.window + 1 {
            return Err(CbfError::InvalidArgument(format!(
                "history must hold N + 1 = {} barriers, got {}",
                config.window + 1,
                history.len()
            )));
        }
        let epoch = history[0].epoch;
        Ok(Self {
            history: history.into_iter().map(Arc::new).collect(),
            config,
            epoch,
        })
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn config(&self) -> &BufferConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    /// `b_{k−lag}`.
    pub fn barrier(&self, lag: usize) -> &LocalBarrier {
        &self.history[lag]
    }

    pub fn barriers(&self) -> impl Iterator<Item = &LocalBarrier> {
        self.history.iter().map(|b| b.as_ref())
    }

    pub fn epoch_start(&self) -> f64 {
        self.epoch as f64 * self.config.sample_period
    }

    /// Shifts the history by one, dropping `b_{k−N}`.
    pub fn advance(&self, next: LocalBarrier) -> Result<Self> {
        if next.epoch != self.epoch + 1 {
            return Err(CbfError::InvalidArgument(format!(
                "expected barrier for epoch {}, got {}",
                self.epoch + 1,
                next.epoch
            )));
        }
        let mut history = self.history.clone();
        history.pop_back();
        history.push_front(Arc::new(next));
        Ok(Self {
            history,
            config: self.config.clone(),
            epoch: self.epoch + 1,
        })
    }

    /// Position of the epoch clock, `t/T_s − k`, validated against the
    /// buffer's interval. The closed right end is accepted: there the blend
    /// has finished and the value equals the next epoch's left end.
    pub fn phase(&self, t: f64) -> Result<f64> {
        let tau = t / self.config.sample_period - self.epoch as f64;
        if !(-EPOCH_SLACK..=1.0 + EPOCH_SLACK).contains(&tau) {
            return Err(CbfError::StaleBuffer {
                t,
                epoch: self.epoch,
                start: self.epoch_start(),
                end: self.epoch_start() + self.config.sample_period,
            });
        }
        Ok(tau.clamp(0.0, 1.0))
    }

    /// Composite barrier `h(x, t)` with its 2-jet over `(x, t)`.
    pub fn composite(&self, state: &DVector<f64>, t: f64) -> Result<Jet2> {
        let tau = self.phase(t)?;
        let [e0, e1, e2] = eta_triplet(&self.config.homotopy, tau)?;
        let ts = self.config.sample_period;
        let n = state.len();
        let window = self.config.window;

        let newest = self.history[0].point_jet(&self.history[0].position_of(state));
        let oldest_barrier = &self.history[window];
        let oldest = oldest_barrier.point_jet(&oldest_barrier.position_of(state));

        let mut args = Vec::with_capacity(window);
        for lag in 1..window {
            let b = &self.history[lag];
            args.push(Jet2::from_position(&b.point_jet(&b.position_of(state)), n));
        }

        // η(τ) b_k + (1 − η(τ)) b_{k−N} and its time derivatives.
        let mut blend = Jet2::constant(0.0, n);
        let diff_v = newest.value - oldest.value;
        blend.value = e0 * newest.value + (1.0 - e0) * oldest.value;
        let dim = newest.dim;
        for i in 0..dim {
            blend.grad[i] = e0 * newest.grad[i] + (1.0 - e0) * oldest.grad[i];
            let dxt = e1 / ts * (newest.grad[i] - oldest.grad[i]);
            blend.hess[(i, n)] = dxt;
            blend.hess[(n, i)] = dxt;
            for j in 0..dim {
                blend.hess[(i, j)] = e0 * newest.hess[(i, j)] + (1.0 - e0) * oldest.hess[(i, j)];
            }
        }
        blend.grad[n] = e1 / ts * diff_v;
        blend.hess[(n, n)] = e2 / (ts * ts) * diff_v;
        args.push(blend);

        let params = SoftParams::new(self.config.kappa, window)?;
        let jet = softmax_jet(&params, &args)?;
        if !jet.is_finite() {
            return Err(CbfError::Numerical(format!(
                "composite barrier is not finite at t = {t}"
            )));
        }
        Ok(jet)
    }
}
