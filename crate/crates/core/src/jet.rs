//! Second-order jets over the joint (state, time) space.
//!
//! A [`Jet2`] over an `n`-dimensional state stores the value of a scalar field
//! together with its dense gradient and Hessian in the `n + 1` coordinates
//! `(x_1, ..., x_n, t)`. Time is always the last coordinate.

use nalgebra::{DMatrix, DVector, DVectorView, Matrix3, Vector3};

#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    /// Gradient in `(x, t)`, length `n + 1`.
    pub grad: DVector<f64>,
    /// Symmetric Hessian in `(x, t)`, shape `(n + 1) x (n + 1)`.
    pub hess: DMatrix<f64>,
}

impl Jet2 {
    /// A jet with no derivatives over an `n`-dimensional state.
    pub fn constant(value: f64, state_dim: usize) -> Self {
        Self {
            value,
            grad: DVector::zeros(state_dim + 1),
            hess: DMatrix::zeros(state_dim + 1, state_dim + 1),
        }
    }

    /// Lifts a jet computed in position space into `(x, t)` space. The position
    /// occupies the first `pos.dim` state coordinates; all other derivatives,
    /// including every time derivative, are zero.
    pub fn from_position(pos: &PointJet, state_dim: usize) -> Self {
        let mut jet = Self::constant(pos.value, state_dim);
        for i in 0..pos.dim {
            jet.grad[i] = pos.grad[i];
            for j in 0..pos.dim {
                jet.hess[(i, j)] = pos.hess[(i, j)];
            }
        }
        jet
    }

    /// Number of (x, t) coordinates.
    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn state_dim(&self) -> usize {
        self.grad.len() - 1
    }

    pub fn grad_x(&self) -> DVectorView<'_, f64> {
        self.grad.rows(0, self.state_dim())
    }

    pub fn d_t(&self) -> f64 {
        self.grad[self.state_dim()]
    }

    pub fn d_tt(&self) -> f64 {
        let n = self.state_dim();
        self.hess[(n, n)]
    }

    /// Mixed derivative ∇ₓ ∂/∂t.
    pub fn d_xt(&self) -> DVector<f64> {
        let n = self.state_dim();
        self.hess.view((0, n), (n, 1)).column(0).into_owned()
    }

    pub fn hess_xx(&self) -> DMatrix<f64> {
        let n = self.state_dim();
        self.hess.view((0, 0), (n, n)).into_owned()
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|v| v.is_finite())
            && self.hess.iter().all(|v| v.is_finite())
    }
}

/// Value, gradient and Hessian of a field of position only.
///
/// Positions are stored in three components; planar fields leave the third
/// component (and the matching Hessian row/column) at zero and set `dim = 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointJet {
    pub dim: usize,
    pub value: f64,
    pub grad: Vector3<f64>,
    pub hess: Matrix3<f64>,
}

impl PointJet {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            value: 0.0,
            grad: Vector3::zeros(),
            hess: Matrix3::zeros(),
        }
    }
}
