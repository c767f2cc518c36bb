//! Higher-order barrier cascade and the single-constraint QP safety filter.
//!
//! With `ψ₀ = h` and `ψ₁ = ∂h/∂t + L_f h + α₁(h)`, the filter solves
//!
//! ```text
//! min ‖u − u_d‖²  s.t.  a·u + b ≥ 0,
//! a = L_g ψ_{r−1},  b = ∂ψ_{r−1}/∂t + L_f ψ_{r−1} + α_r(ψ_{r−1})
//! ```
//!
//! in closed form by projecting `u_d` onto the half-space.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, CbfError, Result};
use crate::jet::Jet2;
use crate::plants::PlantFields;

/// Constraint-normal norm below which the QP is treated as infeasible.
pub const MIN_NORMAL_NORM: f64 = 1e-10;

/// Linear extended class-K function `α(s) = gain · s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassKLinear(f64);

impl ClassKLinear {
    pub fn new(gain: f64) -> Result<Self> {
        if !(gain.is_finite() && gain > 0.0) {
            return Err(CbfError::InvalidArgument(format!(
                "class-K gain must be positive, got {gain}"
            )));
        }
        Ok(Self(gain))
    }

    pub fn gain(&self) -> f64 {
        self.0
    }

    pub fn apply(&self, s: f64) -> f64 {
        self.0 * s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CascadeConfig {
    alphas: Vec<ClassKLinear>,
}

impl CascadeConfig {
    /// One gain per cascade level; the relative degree is the number of gains.
    pub fn new(alphas: Vec<ClassKLinear>) -> Result<Self> {
        if alphas.is_empty() || alphas.len() > 2 {
            return Err(CbfError::InvalidArgument(format!(
                "relative degree must be 1 or 2, got {}",
                alphas.len()
            )));
        }
        Ok(Self { alphas })
    }

    pub fn relative_degree(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[ClassKLinear] {
        &self.alphas
    }
}

/// ψ₁ with the derivatives the second cascade level needs.
#[derive(Clone, Debug, PartialEq)]
pub struct Psi1 {
    pub value: f64,
    pub grad_x: DVector<f64>,
    pub d_t: f64,
}

fn check_dims(h: &Jet2, fields: &PlantFields) -> Result<()> {
    let n = h.state_dim();
    if fields.f.len() != n || fields.dfdx.nrows() != n || fields.dfdx.ncols() != n || fields.g.nrows() != n
    {
        return Err(CbfError::InvalidArgument(format!(
            "plant fields do not match a {n}-dimensional barrier jet"
        )));
    }
    Ok(())
}

pub fn psi1(h: &Jet2, fields: &PlantFields, alpha1: ClassKLinear) -> Result<Psi1> {
    check_dims(h, fields)?;
    let grad = h.grad_x().into_owned();
    let value = h.d_t() + grad.dot(&fields.f) + alpha1.apply(h.value);
    let grad_x = h.d_xt()
        + h.hess_xx() * &fields.f
        + fields.dfdx.transpose() * &grad
        + alpha1.gain() * &grad;
    let d_t = h.d_tt() + h.d_xt().dot(&fields.f) + alpha1.gain() * h.d_t();
    Ok(Psi1 {
        value,
        grad_x,
        d_t,
    })
}

/// Affine constraint `a·u + b ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintRow {
    pub a: DVector<f64>,
    pub b: f64,
}

impl ConstraintRow {
    pub fn slack(&self, u: &DVector<f64>) -> f64 {
        self.a.dot(u) + self.b
    }
}

/// Cascade values and the resulting constraint at one `(x, t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeEval {
    pub h: f64,
    /// ψ₁; equals `h` itself for relative degree 1.
    pub psi1: f64,
    pub row: ConstraintRow,
}

pub fn cascade(h: &Jet2, fields: &PlantFields, config: &CascadeConfig) -> Result<CascadeEval> {
    check_dims(h, fields)?;
    let alphas = config.alphas();
    let (psi1_value, row) = match config.relative_degree() {
        1 => {
            let grad = h.grad_x().into_owned();
            let a = fields.g.transpose() * &grad;
            let b = h.d_t() + grad.dot(&fields.f) + alphas[0].apply(h.value);
            (h.value, ConstraintRow { a, b })
        }
        _ => {
            let p = psi1(h, fields, alphas[0])?;
            let a = fields.g.transpose() * &p.grad_x;
            let b = p.d_t + p.grad_x.dot(&fields.f) + alphas[1].apply(p.value);
            (p.value, ConstraintRow { a, b })
        }
    };
    if !(row.b.is_finite() && row.a.iter().all(|v| v.is_finite()) && psi1_value.is_finite()) {
        return Err(CbfError::Numerical(format!(
            "non-finite constraint: h = {}, psi1 = {psi1_value}, a = {:?}, b = {}",
            h.value,
            row.a.as_slice(),
            row.b
        )));
    }
    Ok(CascadeEval {
        h: h.value,
        psi1: psi1_value,
        row,
    })
}

pub fn constraint_row(h: &Jet2, fields: &PlantFields, config: &CascadeConfig) -> Result<ConstraintRow> {
    Ok(cascade(h, fields, config)?.row)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Infeasibility is an error.
    #[default]
    Strict,
    /// Infeasibility passes `u_d` through and flags the step.
    Lenient,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Inactive,
    Active,
    Infeasible,
}

impl QpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            QpStatus::Inactive => "inactive",
            QpStatus::Active => "active",
            QpStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub u: DVector<f64>,
    pub status: QpStatus,
}

pub fn solve_qp(row: &ConstraintRow, u_d: &DVector<f64>, mode: FilterMode) -> Result<QpSolution> {
    if row.a.len() != u_d.len() {
        return Err(CbfError::InvalidArgument(format!(
            "constraint has {} columns but u_d has {} entries",
            row.a.len(),
            u_d.len()
        )));
    }
    ensure_finite(row.a.as_slice(), "constraint normal")?;
    ensure_finite(&[row.b], "constraint offset")?;
    ensure_finite(u_d.as_slice(), "desired control")?;
    let slack = row.slack(u_d);
    if slack >= 0.0 {
        return Ok(QpSolution {
            u: u_d.clone(),
            status: QpStatus::Inactive,
        });
    }
    let norm_sq = row.a.norm_squared();
    if norm_sq.sqrt() > MIN_NORMAL_NORM {
        let u = u_d - (slack / norm_sq) * &row.a;
        return Ok(QpSolution {
            u,
            status: QpStatus::Active,
        });
    }
    match mode {
        FilterMode::Strict => Err(CbfError::Infeasible {
            a_norm: norm_sq.sqrt(),
            slack,
        }),
        FilterMode::Lenient => Ok(QpSolution {
            u: u_d.clone(),
            status: QpStatus::Infeasible,
        }),
    }
}
