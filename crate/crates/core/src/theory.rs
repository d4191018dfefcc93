//! Executable form of the knowledge-gain monotonicity argument for SGD.
//!
//! With `A` the weights at the start of an epoch, `B` the accumulated
//! gradient and `C = A − ηB`, the `p = 2` gain satisfies
//! `G(C) − G(A) ≥ D(η) / (N γ)` where
//!
//! ```text
//! D(η) = [tr(BᵀB) − (‖B‖₂²/‖A‖₂²) tr(AᵀA)] η² − [2 tr(AᵀB) + 2 (‖B‖₂/‖A‖₂) tr(AᵀA)] η
//! ```
//!
//! so `D(η) ≥ 0` (and with it monotonicity) holds for every η above the
//! positive root whenever the leading coefficient is positive.

use crate::error::{AdasError, Result};
use crate::lowrank::singular_values;
use crate::metrics::GainNorm;
use crate::tensor::Matrix;

/// Relative cutoff below which a singular value of `A` is not counted in its rank.
const RANK_TOL: f64 = 1e-12;

/// Gain over the full raw spectrum, normalised by the short side of `m`.
pub fn raw_knowledge_gain(m: &Matrix, norm: GainNorm) -> Result<f64> {
    let spectrum = singular_values(m)?;
    let top = spectrum.largest();
    if top <= 0.0 {
        return Err(AdasError::Input(
            "knowledge gain is undefined for a zero matrix".into(),
        ));
    }
    let total: f64 = spectrum
        .values
        .iter()
        .map(|&s| match norm {
            GainNorm::L1 => s / top,
            GainNorm::L2 => (s / top) * (s / top),
        })
        .sum();
    Ok(total / spectrum.l as f64)
}

/// The two coefficient groups of `D(η) = quadratic·η² − linear·η`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticTerms {
    /// `tr(BᵀB) − (‖B‖₂²/‖A‖₂²) tr(AᵀA)`.
    pub quadratic: f64,
    /// `2 tr(AᵀB) + 2 (‖B‖₂/‖A‖₂) tr(AᵀA)`.
    pub linear: f64,
}

impl QuadraticTerms {
    pub fn new(a_mat: &Matrix, b_mat: &Matrix) -> Result<Self> {
        a_mat.check_same_shape(b_mat)?;
        let norm_a = singular_values(a_mat)?.largest();
        if norm_a <= 0.0 {
            return Err(AdasError::Input("A must be nonzero".into()));
        }
        let norm_b = singular_values(b_mat)?.largest();
        let ratio = norm_b / norm_a;
        let tr_aa = a_mat.frobenius_dot(a_mat)?;
        let tr_ab = a_mat.frobenius_dot(b_mat)?;
        let tr_bb = b_mat.frobenius_dot(b_mat)?;
        Ok(Self {
            quadratic: tr_bb - ratio * ratio * tr_aa,
            linear: 2.0 * tr_ab + 2.0 * ratio * tr_aa,
        })
    }

    pub fn eval(&self, eta: f64) -> f64 {
        self.quadratic * eta * eta - self.linear * eta
    }
}

pub fn quadratic_d(a_mat: &Matrix, b_mat: &Matrix, eta: f64) -> Result<f64> {
    Ok(QuadraticTerms::new(a_mat, b_mat)?.eval(eta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    /// Smallest step size guaranteeing `D(η) ≥ 0`; 0 when infeasible.
    pub eta_lower: f64,
    /// `D(eta_lower)`.
    pub d_value: f64,
    /// Leading coefficient of `D`.
    pub denominator: f64,
    pub feasible: bool,
}

pub fn lr_lower_bound(a_mat: &Matrix, b_mat: &Matrix) -> Result<BoundReport> {
    let terms = QuadraticTerms::new(a_mat, b_mat)?;
    let feasible = terms.quadratic > 0.0;
    let eta_lower = if feasible {
        (terms.linear / terms.quadratic).max(0.0)
    } else {
        0.0
    };
    Ok(BoundReport {
        eta_lower,
        d_value: terms.eval(eta_lower),
        denominator: terms.quadratic,
        feasible,
    })
}

/// Leading coefficient of the `p = 1` quadratic,
/// `tr(BᵀB) − N″ (‖B‖₂²/‖A‖₂²) tr(AᵀA)` with `N″ = rank(A)`.
///
/// Nonnegativity is what the `p = 1` argument assumes; it can fail once `A`
/// has accumulated structure, so this is reported, never enforced.
pub fn p1_leading_coefficient(a_mat: &Matrix, b_mat: &Matrix) -> Result<f64> {
    a_mat.check_same_shape(b_mat)?;
    let sa = singular_values(a_mat)?;
    let top = sa.largest();
    if top <= 0.0 {
        return Err(AdasError::Input("A must be nonzero".into()));
    }
    let rank_a = sa.values.iter().filter(|&&s| s > RANK_TOL * top).count() as f64;
    let norm_b = singular_values(b_mat)?.largest();
    let ratio = norm_b / top;
    Ok(b_mat.frobenius_dot(b_mat)? - rank_a * ratio * ratio * a_mat.frobenius_dot(a_mat)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_gain_examples() {
        let g = raw_knowledge_gain(&Matrix::identity(5), GainNorm::L2).unwrap();
        assert!((g - 1.0).abs() < 1e-15);
        let g = raw_knowledge_gain(&Matrix::diag(&[2.0, 1.0]), GainNorm::L2).unwrap();
        assert!((g - 0.625).abs() < 1e-15);
        assert!(raw_knowledge_gain(&Matrix::zeros(3, 3), GainNorm::L1).is_err());
    }

    #[test]
    fn d_vanishes_at_zero_step() {
        let a = Matrix::from_fn(3, 4, |r, c| (r * 4 + c) as f64 - 5.0);
        let b = Matrix::from_fn(3, 4, |r, c| ((r + 2 * c) % 3) as f64);
        assert_eq!(quadratic_d(&a, &b, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn d_with_b_equal_a_is_linear() {
        let a = Matrix::from_fn(3, 3, |r, c| (r as f64 + 1.0) * if r == c { 2.0 } else { 0.3 });
        let terms = QuadraticTerms::new(&a, &a).unwrap();
        assert_eq!(terms.quadratic, 0.0);
        let tr = a.frobenius_dot(&a).unwrap();
        let d = quadratic_d(&a, &a, 0.7).unwrap();
        assert!((d + 4.0 * tr * 0.7).abs() < 1e-12 * tr);
    }

    #[test]
    fn zero_update_is_infeasible() {
        let a = Matrix::identity(3);
        let r = lr_lower_bound(&a, &Matrix::zeros(3, 3)).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.eta_lower, 0.0);
    }

    #[test]
    fn negative_numerator_clamps_to_zero() {
        // tr(AᵀB) = −1.1 outweighs (‖B‖₂/‖A‖₂)·tr(AᵀA) = 1.01
        let a = Matrix::diag(&[1.0, 0.1, 0.0, 0.0]);
        let b = Matrix::diag(&[-1.0, -1.0, 1.0, 1.0]);
        let r = lr_lower_bound(&a, &b).unwrap();
        assert!(r.feasible, "{r:?}");
        assert_eq!(r.eta_lower, 0.0);
        assert_eq!(r.d_value, 0.0);
    }

    #[test]
    fn shape_and_zero_errors() {
        let a = Matrix::identity(2);
        assert!(matches!(quadratic_d(&a, &Matrix::identity(3), 0.1), Err(AdasError::Shape(_))));
        assert!(lr_lower_bound(&Matrix::zeros(2, 2), &a).is_err());
        assert!(p1_leading_coefficient(&Matrix::zeros(2, 2), &a).is_err());
    }
}
