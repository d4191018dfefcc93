//! Randomised check of the step-size bound for monotone `p = 2` gain.

use std::fmt;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{AdasError, Result};
use crate::metrics::GainNorm;
use crate::rng;
use crate::tensor::Matrix;
use crate::theory::{lr_lower_bound, p1_leading_coefficient, raw_knowledge_gain, QuadraticTerms};

/// Slack allowed on `D(η) ≥ 0` and on `G(A − ηB) ≥ G(A)`.
pub const THEORY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryCheckConfig {
    pub trials: usize,
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
    /// Use `B = 0` in every trial.
    pub zero_update: bool,
}

impl Default for TheoryCheckConfig {
    fn default() -> Self {
        Self { trials: 1000, seed: 1, rows: 8, cols: 8, zero_update: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TheoryReport {
    pub trials: usize,
    pub feasible: usize,
    /// Feasible pairs × probed step sizes.
    pub checks: usize,
    pub d_violations: usize,
    pub gain_violations: usize,
    /// Smallest `D(η)` seen at the probed step sizes.
    pub min_d: f64,
    /// Pairs where the leading coefficient of the `p = 1` quadratic is negative.
    pub p1_assumption_failures: usize,
    /// Feasible probes where the `p = 1` gain dropped.
    pub p1_gain_decreases: usize,
}

impl TheoryReport {
    pub fn passed(&self) -> bool {
        self.d_violations == 0 && self.gain_violations == 0
    }

    pub fn p1_failure_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.p1_assumption_failures as f64 / self.trials as f64
        }
    }
}

impl fmt::Display for TheoryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "trials: {}", self.trials)?;
        writeln!(f, "feasible: {}", self.feasible)?;
        writeln!(f, "checks: {}", self.checks)?;
        writeln!(f, "d_violations: {}", self.d_violations)?;
        writeln!(f, "gain_violations: {}", self.gain_violations)?;
        writeln!(f, "min_d: {:e}", self.min_d)?;
        writeln!(
            f,
            "p1_assumption_failures: {} ({:.4})",
            self.p1_assumption_failures,
            self.p1_failure_rate()
        )?;
        writeln!(f, "p1_gain_decreases: {}", self.p1_gain_decreases)?;
        write!(f, "result: {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut rng::Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn normalized(m: Matrix) -> Matrix {
    let n = m.frobenius_norm();
    if n > 0.0 {
        m.scaled(1.0 / n)
    } else {
        m
    }
}

/// A spiked Gaussian: `s·uvᵀ + G`, scaled to unit Frobenius norm. Larger
/// spikes mean lower stable rank.
fn spiked(rows: usize, cols: usize, spike: f64, rng: &mut rng::Rng) -> Matrix {
    let u: Vec<f64> = (0..rows).map(|_| StandardNormal.sample(&mut *rng)).collect();
    let v: Vec<f64> = (0..cols).map(|_| StandardNormal.sample(&mut *rng)).collect();
    let g = gaussian(rows, cols, rng);
    normalized(Matrix::from_fn(rows, cols, |r, c| spike * u[r] * v[c] + g.get(r, c)))
}

/// Draws `(A, B)` pairs, keeps those where the bound exists, and checks
/// `D(η) ≥ −tol` and `G₂(A − ηB) ≥ G₂(A) − tol` at η = bound and 2·bound.
pub fn theory_check(cfg: &TheoryCheckConfig) -> Result<TheoryReport> {
    if cfg.trials == 0 {
        return Err(AdasError::config("trials", "must be >= 1"));
    }
    if cfg.rows == 0 || cfg.cols == 0 {
        return Err(AdasError::config("rows", "matrix dimensions must be >= 1"));
    }
    let mut rng = rng::seeded(cfg.seed);
    let mut report = TheoryReport { trials: cfg.trials, min_d: f64::INFINITY, ..Default::default() };
    for _ in 0..cfg.trials {
        let spike_a = rng.random_range(0.0..3.0);
        let a = spiked(cfg.rows, cfg.cols, spike_a, &mut rng);
        let b = if cfg.zero_update {
            Matrix::zeros(cfg.rows, cfg.cols)
        } else {
            let spike_b = rng.random_range(0.0..1.5);
            spiked(cfg.rows, cfg.cols, spike_b, &mut rng)
        };

        if p1_leading_coefficient(&a, &b)? < 0.0 {
            report.p1_assumption_failures += 1;
        }
        let bound = lr_lower_bound(&a, &b)?;
        if !bound.feasible {
            continue;
        }
        report.feasible += 1;
        let terms = QuadraticTerms::new(&a, &b)?;
        let g2_a = raw_knowledge_gain(&a, GainNorm::L2)?;
        let g1_a = raw_knowledge_gain(&a, GainNorm::L1)?;
        for eta in [bound.eta_lower, 2.0 * bound.eta_lower] {
            report.checks += 1;
            let d = terms.eval(eta);
            report.min_d = report.min_d.min(d);
            if d < -THEORY_TOL {
                report.d_violations += 1;
            }
            let c = a.sub_scaled(eta, &b)?;
            if c.frobenius_norm() == 0.0 {
                continue;
            }
            if raw_knowledge_gain(&c, GainNorm::L2)? < g2_a - THEORY_TOL {
                report.gain_violations += 1;
            }
            if raw_knowledge_gain(&c, GainNorm::L1)? < g1_a - THEORY_TOL {
                report.p1_gain_decreases += 1;
            }
        }
    }
    if report.checks == 0 {
        report.min_d = 0.0;
    }
    Ok(report)
}
