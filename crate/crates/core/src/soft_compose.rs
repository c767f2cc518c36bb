//! Log-sum-exp soft minimum and soft maximum with exact 2-jet propagation.
//!
//! ```text
//! softmin_κ(z) = -(1/κ) log Σ exp(-κ zᵢ)
//! softmax_κ(z) =  (1/κ) log Σ exp( κ zᵢ) - (log N)/κ
//! ```
//!
//! Both are evaluated after factoring out the extreme argument so that
//! `κ·z` never reaches the exponential unshifted.

use nalgebra::{DMatrix, DVector};

use crate::error::{CbfError, Result};
use crate::jet::Jet2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SoftParams {
    kappa: f64,
    n_args: usize,
}

impl SoftParams {
    pub fn new(kappa: f64, n_args: usize) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(CbfError::InvalidArgument(format!(
                "soft-min/max sharpness must be positive, got {kappa}"
            )));
        }
        if n_args == 0 {
            return Err(CbfError::InvalidArgument(
                "soft-min/max needs at least one argument".into(),
            ));
        }
        Ok(Self { kappa, n_args })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn n_args(&self) -> usize {
        self.n_args
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Min,
    Max,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Min => -1.0,
            Side::Max => 1.0,
        }
    }
}

/// Value of the soft extremum together with the normalized log-sum-exp
/// weights `wᵢ = ∂value/∂zᵢ` (nonnegative, summing to one).
#[derive(Clone, Debug, PartialEq)]
pub struct SoftWeights {
    pub value: f64,
    pub weights: Vec<f64>,
}

fn check_args(params: &SoftParams, len: usize) -> Result<()> {
    if len != params.n_args {
        return Err(CbfError::InvalidArgument(format!(
            "expected {} arguments, got {len}",
            params.n_args
        )));
    }
    Ok(())
}

fn soft_weights(side: Side, params: &SoftParams, z: &[f64]) -> Result<SoftWeights> {
    check_args(params, z.len())?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(CbfError::InvalidArgument(
            "soft-min/max arguments must be finite".into(),
        ));
    }
    let s = side.sign();
    let kappa = params.kappa;
    let pivot = match side {
        Side::Min => z.iter().copied().fold(f64::INFINITY, f64::min),
        Side::Max => z.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    let mut weights: Vec<f64> = z.iter().map(|&zi| (s * kappa * (zi - pivot)).exp()).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let mut value = pivot + s * total.ln() / kappa;
    if side == Side::Max {
        value -= (z.len() as f64).ln() / kappa;
    }
    Ok(SoftWeights { value, weights })
}

/// Soft minimum together with its argument weights.
pub fn softmin_weights(params: &SoftParams, z: &[f64]) -> Result<SoftWeights> {
    soft_weights(Side::Min, params, z)
}

/// Soft maximum together with its argument weights.
pub fn softmax_weights(params: &SoftParams, z: &[f64]) -> Result<SoftWeights> {
    soft_weights(Side::Max, params, z)
}

pub fn softmin(params: &SoftParams, z: &[f64]) -> Result<f64> {
    Ok(soft_weights(Side::Min, params, z)?.value)
}

pub fn softmax(params: &SoftParams, z: &[f64]) -> Result<f64> {
    Ok(soft_weights(Side::Max, params, z)?.value)
}

fn soft_jet(side: Side, params: &SoftParams, args: &[Jet2]) -> Result<Jet2> {
    check_args(params, args.len())?;
    let dim = args[0].dim();
    if args.iter().any(|j| j.dim() != dim || j.hess.nrows() != dim) {
        return Err(CbfError::InvalidArgument(
            "soft-min/max jets must share one dimension".into(),
        ));
    }
    let values: Vec<f64> = args.iter().map(|j| j.value).collect();
    let SoftWeights { value, weights } = soft_weights(side, params, &values)?;

    let mut grad = DVector::zeros(dim);
    let mut hess = DMatrix::zeros(dim, dim);
    let mut second_moment = DMatrix::zeros(dim, dim);
    for (w, jet) in weights.iter().zip(args) {
        grad.axpy(*w, &jet.grad, 1.0);
        hess += *w * &jet.hess;
        second_moment.ger(*w, &jet.grad, &jet.grad, 1.0);
    }
    // Weight covariance term: ±κ (Σ wᵢ gᵢgᵢᵀ − ḡḡᵀ).
    second_moment.ger(-1.0, &grad, &grad, 1.0);
    hess += (side.sign() * params.kappa) * second_moment;
    Ok(Jet2 { value, grad, hess })
}

pub fn softmin_jet(params: &SoftParams, args: &[Jet2]) -> Result<Jet2> {
    soft_jet(Side::Min, params, args)
}

pub fn softmax_jet(params: &SoftParams, args: &[Jet2]) -> Result<Jet2> {
    soft_jet(Side::Max, params, args)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(kappa: f64, n: usize) -> SoftParams {
        SoftParams::new(kappa, n).unwrap()
    }

    /// Direct evaluation of the defining sums without any shifting.
    fn naive_softmin(kappa: f64, z: &[f64]) -> f64 {
        -(z.iter().map(|v| (-kappa * v).exp()).sum::<f64>()).ln() / kappa
    }

    fn naive_softmax(kappa: f64, z: &[f64]) -> f64 {
        (z.iter().map(|v| (kappa * v).exp()).sum::<f64>()).ln() / kappa
            - (z.len() as f64).ln() / kappa
    }

    #[test]
    fn single_argument_is_identity() {
        assert_eq!(softmin(&p(20.0, 1), &[5.0]).unwrap(), 5.0);
        assert_eq!(softmax(&p(20.0, 1), &[5.0]).unwrap(), 5.0);
    }

    #[test]
    fn equal_arguments_closed_forms() {
        let v = softmin(&p(20.0, 2), &[0.0, 0.0]).unwrap();
        assert!((v + 2f64.ln() / 20.0).abs() < 1e-15);
        assert!((v + 0.034657).abs() < 1e-6);
        for n in 1..=8 {
            let z = vec![3.25; n];
            assert!((softmax(&p(20.0, n), &z).unwrap() - 3.25).abs() < 1e-14);
        }
    }

    #[test]
    fn two_point_brackets_match_direct_evaluation() {
        let lo = softmin(&p(20.0, 2), &[0.0, 1.0]).unwrap();
        assert!(lo >= -(2f64.ln()) / 20.0 && lo < 0.0);
        assert!((lo - naive_softmin(20.0, &[0.0, 1.0])).abs() < 1e-15);

        let hi = softmax(&p(20.0, 2), &[0.0, 1.0]).unwrap();
        assert!(hi > 1.0 - 2f64.ln() / 20.0 && hi <= 1.0);
        assert!((hi - naive_softmax(20.0, &[0.0, 1.0])).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SoftParams::new(0.0, 2).is_err());
        assert!(SoftParams::new(1.0, 0).is_err());
        assert!(softmin(&p(1.0, 2), &[0.0, f64::NAN]).is_err());
        assert!(softmax(&p(1.0, 2), &[0.0, f64::INFINITY]).is_err());
        assert!(softmax(&p(1.0, 3), &[0.0, 1.0]).is_err());
    }

    #[test]
    fn large_arguments_do_not_overflow() {
        let z = [1e6, -1e6, 5e5, 1e6 - 1.0];
        let lo = softmin(&p(100.0, 4), &z).unwrap();
        let hi = softmax(&p(100.0, 4), &z).unwrap();
        assert!(lo.is_finite() && hi.is_finite());
        assert_eq!(lo, -1e6);
        // Only one argument attains the max, so the lower bound is tight.
        assert!(hi <= 1e6 && hi >= 1e6 - 4f64.ln() / 100.0 - 1e-9);
    }

    #[test]
    fn one_jet_passes_through() {
        let mut j = Jet2::constant(0.7, 2);
        j.grad = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        j.hess = DMatrix::from_fn(3, 3, |i, k| (i + k) as f64);
        assert_eq!(softmin_jet(&p(20.0, 1), &[j.clone()]).unwrap(), j);
        assert_eq!(softmax_jet(&p(20.0, 1), &[j.clone()]).unwrap(), j);
    }

    #[test]
    fn equal_values_average_gradients() {
        let mut a = Jet2::constant(1.0, 1);
        let mut b = Jet2::constant(1.0, 1);
        a.grad = DVector::from_vec(vec![2.0, 0.0]);
        b.grad = DVector::from_vec(vec![0.0, 4.0]);
        for jet in [
            softmin_jet(&p(20.0, 2), &[a.clone(), b.clone()]).unwrap(),
            softmax_jet(&p(20.0, 2), &[a.clone(), b.clone()]).unwrap(),
        ] {
            assert!((jet.grad[0] - 1.0).abs() < 1e-15);
            assert!((jet.grad[1] - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn jet_dimension_mismatch_is_rejected() {
        let a = Jet2::constant(1.0, 1);
        let b = Jet2::constant(1.0, 2);
        assert!(softmin_jet(&p(1.0, 2), &[a, b]).is_err());
    }

    /// Four smooth scalar fields on R³ with closed-form derivatives; the
    /// composed jet is compared with central differences of the composed value.
    fn test_fields(x: &[f64; 3], coeffs: &[[f64; 4]; 4]) -> Vec<Jet2> {
        coeffs
            .iter()
            .map(|c| {
                // f = c0 sin(x0) + c1 x1² + c2 x0 x2 + c3 exp(0.3 x1)
                let value = c[0] * x[0].sin() + c[1] * x[1] * x[1] + c[2] * x[0] * x[2]
                    + c[3] * (0.3 * x[1]).exp();
                let grad = DVector::from_vec(vec![
                    c[0] * x[0].cos() + c[2] * x[2],
                    2.0 * c[1] * x[1] + 0.3 * c[3] * (0.3 * x[1]).exp(),
                    c[2] * x[0],
                ]);
                let mut hess = DMatrix::zeros(3, 3);
                hess[(0, 0)] = -c[0] * x[0].sin();
                hess[(1, 1)] = 2.0 * c[1] + 0.09 * c[3] * (0.3 * x[1]).exp();
                hess[(0, 2)] = c[2];
                hess[(2, 0)] = c[2];
                Jet2 { value, grad, hess }
            })
            .collect()
    }

    #[test]
    fn random_jets_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let kappa = [1.0, 5.0, 20.0][rng.gen_range(0..3)];
            let params = p(kappa, 4);
            let mut coeffs = [[0.0; 4]; 4];
            for row in coeffs.iter_mut() {
                for c in row.iter_mut() {
                    *c = rng.gen_range(-1.0..1.0);
                }
            }
            let x = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            for min_side in [true, false] {
                let compose = |x: &[f64; 3]| {
                    let jets = test_fields(x, &coeffs);
                    if min_side {
                        softmin_jet(&params, &jets).unwrap()
                    } else {
                        softmax_jet(&params, &jets).unwrap()
                    }
                };
                let jet = compose(&x);
                let h = 1e-6;
                for i in 0..3 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[i] += h;
                    xm[i] -= h;
                    let (jp, jm) = (compose(&xp), compose(&xm));
                    let fd = (jp.value - jm.value) / (2.0 * h);
                    assert!((fd - jet.grad[i]).abs() <= 1e-6 * jet.grad[i].abs().max(1.0));
                    for k in 0..3 {
                        let fd = (jp.grad[k] - jm.grad[k]) / (2.0 * h);
                        let scale = jet.hess.amax().max(1.0);
                        assert!(
                            (fd - jet.hess[(k, i)]).abs() <= 1e-6 * scale,
                            "hessian ({k},{i}): fd {fd} vs {}",
                            jet.hess[(k, i)]
                        );
                    }
                }
            }
        }
    }

    fn args() -> impl Strategy<Value = (f64, Vec<f64>)> {
        (
            prop::sample::select(vec![1.0, 10.0, 20.0, 100.0]),
            prop::collection::vec(-50.0f64..50.0, 1..=8),
        )
    }

    proptest! {
        #[test]
        fn sandwich_bounds_hold((kappa, z) in args()) {
            let n = z.len();
            let params = p(kappa, n);
            let lo = softmin(&params, &z).unwrap();
            let hi = softmax(&params, &z).unwrap();
            let min = z.iter().copied().fold(f64::INFINITY, f64::min);
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let slack = (n as f64).ln() / kappa;
            prop_assert!(min - slack <= lo + 1e-12);
            prop_assert!(lo < min + 1e-12);
            prop_assert!(max - slack < hi + 1e-12);
            prop_assert!(hi <= max + 1e-12);
        }

        #[test]
        fn permutation_invariant((kappa, z) in args(), seed in any::<u64>()) {
            let params = p(kappa, z.len());
            let mut shuffled = z.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.gen_range(0..=i));
            }
            prop_assert!((softmin(&params, &z).unwrap() - softmin(&params, &shuffled).unwrap()).abs() < 1e-12);
            prop_assert!((softmax(&params, &z).unwrap() - softmax(&params, &shuffled).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn monotone_in_each_argument((kappa, z) in args(), idx in any::<prop::sample::Index>(), bump in 0.0f64..5.0) {
            let params = p(kappa, z.len());
            let mut raised = z.clone();
            raised[idx.index(z.len())] += bump;
            prop_assert!(softmin(&params, &raised).unwrap() >= softmin(&params, &z).unwrap() - 1e-12);
            prop_assert!(softmax(&params, &raised).unwrap() >= softmax(&params, &z).unwrap() - 1e-12);
        }

        #[test]
        fn translation_equivariant((kappa, z) in args(), c in -100.0f64..100.0) {
            let params = p(kappa, z.len());
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            prop_assert!((softmin(&params, &shifted).unwrap() - softmin(&params, &z).unwrap() - c).abs() < 1e-10);
            prop_assert!((softmax(&params, &shifted).unwrap() - softmax(&params, &z).unwrap() - c).abs() < 1e-10);
        }

        #[test]
        fn huge_inputs_stay_finite(z in prop::collection::vec(-1e6f64..1e6, 1..=8)) {
            let params = p(100.0, z.len());
            prop_assert!(softmin(&params, &z).unwrap().is_finite());
            prop_assert!(softmax(&params, &z).unwrap().is_finite());
        }
    }
}
