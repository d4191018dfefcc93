//! Singular spectra and the global analytic empirical VBMF estimate.
//!
//! For an `L × M` matrix (`L ≤ M`, transposed internally otherwise) with
//! singular values `γ_1 ≥ … ≥ γ_L`, the empirical variational Bayes solution
//! with flat priors keeps every component whose squared singular value
//! exceeds `M σ² x̄` and shrinks it in closed form. The noise variance `σ²`
//! is the minimiser of the VB free energy over a bounded interval.

use nalgebra::DMatrix;

use crate::error::{AdasError, Result};
use crate::tensor::Matrix;

/// Constant of the analytic threshold `τ̄ = TAU_BAR_COEFF · √α`.
pub const TAU_BAR_COEFF: f64 = 2.5129;

/// Singular values below this fraction of `σ₁` count as exact zeros.
pub const ZERO_CUTOFF: f64 = 1e-12;

/// Absolute tolerance on the rescaled noise variance.
pub const SIGMA2_TOL: f64 = 1e-12;

/// Interior samples used to bracket the free-energy minimum before the
/// golden-section refinement.
const BRACKET_SCAN: usize = 256;

/// Descending singular values of an `L × M` matrix, `L ≤ M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularSpectrum {
    pub values: Vec<f64>,
    /// Short side of the source matrix.
    pub l: usize,
    /// Long side of the source matrix.
    pub m: usize,
}

impl SingularSpectrum {
    pub fn sum_squares(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn largest(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvbmfResult {
    pub estimated_rank: usize,
    /// Singular values of the low-rank estimate, descending.
    pub shrunk_values: Vec<f64>,
    /// Estimated noise variance. Zero only for an all-zero input.
    pub noise_variance: f64,
    /// Retention cutoff on raw singular values, `√(M σ² x̄)`.
    pub threshold: f64,
}

pub fn singular_values(m: &Matrix) -> Result<SingularSpectrum> {
    if !m.is_finite() {
        return Err(AdasError::NonFinite(format!(
            "{}x{} matrix has non-finite entries",
            m.rows(),
            m.cols()
        )));
    }
    let dm = DMatrix::from_row_slice(m.rows(), m.cols(), m.data());
    let svd = nalgebra::SVD::try_new(dm, false, false, f64::EPSILON, 0)
        .ok_or_else(|| AdasError::Numerical("SVD did not converge".into()))?;
    let mut values: Vec<f64> = svd.singular_values.iter().map(|v| v.max(0.0)).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(SingularSpectrum {
        values,
        l: m.rows().min(m.cols()),
        m: m.rows().max(m.cols()),
    })
}

/// Spectral norm `‖m‖₂`.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    Ok(singular_values(m)?.largest())
}

/// `(τ̄, x̄)` for aspect ratio `α = L/M`.
pub fn analytic_threshold(l: usize, m: usize) -> (f64, f64) {
    let alpha = l as f64 / m as f64;
    let tau_bar = TAU_BAR_COEFF * alpha.sqrt();
    (tau_bar, (1.0 + tau_bar) * (1.0 + alpha / tau_bar))
}

fn tau(x: f64, alpha: f64) -> f64 {
    let s = x - (1.0 + alpha);
    0.5 * (s + (s * s - 4.0 * alpha).max(0.0).sqrt())
}

/// Raw spectrum with values below `ZERO_CUTOFF · σ₁` set to exactly zero.
fn cleaned(spectrum: &SingularSpectrum) -> Vec<f64> {
    let cutoff = ZERO_CUTOFF * spectrum.largest();
    spectrum
        .values
        .iter()
        .map(|&v| if v < cutoff { 0.0 } else { v })
        .collect()
}

/// Search interval for `σ²`.
///
/// Lower end: `max(γ_{k+1}² / (M x̄), mean(γ_{k+1..L}²) / M)` with
/// `k = min(⌈L/(1+α)⌉ − 1, L)`. Upper end: `Σγ² / (L M)`.
pub fn sigma2_bounds(spectrum: &SingularSpectrum) -> (f64, f64) {
    let (l, m) = (spectrum.l, spectrum.m);
    let values = cleaned(spectrum);
    let mut full = values.clone();
    full.resize(l, 0.0);
    let alpha = l as f64 / m as f64;
    let (_, x_bar) = analytic_threshold(l, m);
    let k = ((l as f64 / (1.0 + alpha)).ceil() as usize)
        .saturating_sub(1)
        .min(l - 1);
    let tail = &full[k..];
    let tail_mean = tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64;
    let lower = (full[k] * full[k] / (m as f64 * x_bar)).max(tail_mean / m as f64);
    let upper = full.iter().map(|v| v * v).sum::<f64>() / (l * m) as f64;
    (lower.min(upper), upper)
}

/// VB free energy (up to an additive constant) as a function of `σ²`.
///
/// Exact zeros in the spectrum enter only through `log σ²`, which is the
/// σ²-dependent part of their contribution.
pub fn free_energy(spectrum: &SingularSpectrum, sigma2: f64) -> f64 {
    let (l, m) = (spectrum.l, spectrum.m);
    let alpha = l as f64 / m as f64;
    let (_, x_bar) = analytic_threshold(l, m);
    let values = cleaned(spectrum);
    let mut energy = 0.0;
    let mut zeros = l;
    for &g in values.iter().filter(|&&g| g > 0.0) {
        zeros -= 1;
        let x = g * g / (m as f64 * sigma2);
        energy += x - x.ln();
        if x > x_bar {
            let t = tau(x, alpha);
            energy += (t + 1.0).ln() + alpha * (t / alpha + 1.0).ln() - t;
        }
    }
    energy + zeros as f64 * sigma2.ln()
}

/// Closed-form VB shrinkage of a retained singular value `γ`.
pub fn shrink(gamma: f64, l: usize, m: usize, sigma2: f64) -> f64 {
    let (l, m) = (l as f64, m as f64);
    let g2 = gamma * gamma;
    let a = 1.0 - (l + m) * sigma2 / g2;
    let disc = (a * a - 4.0 * l * m * sigma2 * sigma2 / (g2 * g2)).max(0.0);
    0.5 * gamma * (a + disc.sqrt())
}

/// Thresholds and shrinks the spectrum at a fixed noise variance.
pub fn evbmf_at_variance(spectrum: &SingularSpectrum, sigma2: f64) -> EvbmfResult {
    let (l, m) = (spectrum.l, spectrum.m);
    let (_, x_bar) = analytic_threshold(l, m);
    let cut2 = m as f64 * sigma2 * x_bar;
    let shrunk_values: Vec<f64> = cleaned(spectrum)
        .into_iter()
        .take_while(|&g| g > 0.0 && g * g > cut2)
        .map(|g| shrink(g, l, m, sigma2))
        .take_while(|&s| s > 0.0)
        .collect();
    EvbmfResult {
        estimated_rank: shrunk_values.len(),
        shrunk_values,
        noise_variance: sigma2,
        threshold: cut2.sqrt(),
    }
}

/// Minimises `f` on `[lo, hi]` by golden-section search to absolute width `tol`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    let mid = 0.5 * (lo + hi);
    // The bracket midpoint is never evaluated; fall back to the best probe.
    let fm = f(mid);
    if fm <= fc && fm <= fd {
        mid
    } else if fc <= fd {
        c
    } else {
        d
    }
}

/// Empirical noise variance: the free-energy minimiser within [`sigma2_bounds`].
pub fn estimate_noise_variance(spectrum: &SingularSpectrum) -> f64 {
    let (lower, upper) = sigma2_bounds(spectrum);
    if upper <= 0.0 {
        return 0.0;
    }
    if lower >= upper {
        return upper;
    }
    // Work on σ² / upper so the tolerance is relative to the problem's scale.
    let objective = |s: f64| free_energy(spectrum, s * upper);
    let (lo, hi) = (lower / upper, 1.0);
    let step = (hi - lo) / BRACKET_SCAN as f64;
    let best = (0..BRACKET_SCAN)
        .map(|i| lo + (i as f64 + 0.5) * step)
        .map(|s| (s, objective(s)))
        .fold((f64::NAN, f64::INFINITY), |acc, (s, v)| if v < acc.1 { (s, v) } else { acc });
    let (a, b) = if best.0.is_nan() {
        (lo, hi)
    } else {
        ((best.0 - step).max(lo), (best.0 + step).min(hi))
    };
    golden_section(objective, a, b, SIGMA2_TOL) * upper
}

pub fn evbmf_spectrum(spectrum: &SingularSpectrum) -> EvbmfResult {
    let sigma2 = estimate_noise_variance(spectrum);
    if sigma2 <= 0.0 {
        return EvbmfResult {
            estimated_rank: 0,
            shrunk_values: Vec::new(),
            noise_variance: 0.0,
            threshold: 0.0,
        };
    }
    evbmf_at_variance(spectrum, sigma2)
}

/// Empirical VBMF of `m`: rank estimate, shrunk singular values and noise variance.
pub fn evbmf(m: &Matrix) -> Result<EvbmfResult> {
    Ok(evbmf_spectrum(&singular_values(m)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_spectrum() {
        let s = singular_values(&Matrix::diag(&[1.0, 3.0])).unwrap();
        assert!((s.values[0] - 3.0).abs() < 1e-14);
        assert!((s.values[1] - 1.0).abs() < 1e-14);
        assert_eq!((s.l, s.m), (2, 2));
    }

    #[test]
    fn zero_matrix() {
        let z = Matrix::zeros(4, 7);
        let s = singular_values(&z).unwrap();
        assert_eq!(s.values, vec![0.0; 4]);
        let r = evbmf(&Matrix::zeros(8, 16)).unwrap();
        assert_eq!(r.estimated_rank, 0);
        assert!(r.shrunk_values.is_empty());
    }

    #[test]
    fn rejects_non_finite() {
        let m = Matrix::new(1, 2, vec![1.0, f64::NAN]).unwrap();
        assert!(matches!(singular_values(&m), Err(AdasError::NonFinite(_))));
        assert!(evbmf(&m).is_err());
    }

    #[test]
    fn threshold_constants() {
        let (tau_bar, x_bar) = analytic_threshold(1, 1);
        assert_eq!(tau_bar, 2.5129);
        assert!((x_bar - 3.5129 * (1.0 + 1.0 / 2.5129)).abs() < 1e-15);
    }

    #[test]
    fn shrink_is_below_raw() {
        for &g in &[2.0, 5.0, 40.0] {
            let s = shrink(g, 10, 20, 0.01);
            assert!(s > 0.0 && s < g);
        }
        // negligible noise leaves the value essentially untouched
        assert!((shrink(10.0, 4, 4, 1e-12) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn single_column_degenerates() {
        // a lone singular value sets both bounds, so x = 1 < x̄ and nothing survives
        let m = Matrix::new(5, 1, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let r = evbmf(&m).unwrap();
        assert_eq!(r.estimated_rank, 0);
        assert!(r.noise_variance > 0.0);
    }

    #[test]
    fn noiseless_rank_one_is_retained() {
        let u = [1.0, -2.0, 0.5, 3.0, 1.5, -1.0];
        let v = [2.0, 1.0, -1.0, 0.5];
        let m = Matrix::from_fn(6, 4, |r, c| 10.0 * u[r] * v[c]);
        let r = evbmf(&m).unwrap();
        assert_eq!(r.estimated_rank, 1);
        let raw = singular_values(&m).unwrap().values[0];
        assert!(r.shrunk_values[0] <= raw);
        assert!((r.shrunk_values[0] - raw).abs() / raw < 1e-6);
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let x = golden_section(|x| (x - 0.3).powi(2), 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-9);
    }
}
