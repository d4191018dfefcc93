//! Independent reference computations used as test oracles.
//!
//! Nothing here calls into the decomposition or metric code under test;
//! only plain containers (`Matrix`, `Network` parameter access) are shared.

#![allow(dead_code)]

use adas_core::micronet::{Batch, Network};
use adas_core::rng;
use adas_core::Matrix;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian_matrix(rows: usize, cols: usize, std: f64, seed: u64) -> Matrix {
    let mut r = rng::seeded(seed);
    Matrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(&mut r);
        std * z
    })
}

/// One-sided Jacobi SVD: orthogonalise column pairs by plane rotations
/// until every pair is orthogonal; the column norms are the singular values.
pub fn jacobi_singular_values(m: &Matrix) -> Vec<f64> {
    let m = if m.cols() > m.rows() { m.transpose() } else { m.clone() };
    let (rows, cols) = (m.rows(), m.cols());
    let mut a: Vec<Vec<f64>> = (0..cols).map(|c| (0..rows).map(|r| m.get(r, c)).collect()).collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for i in 0..cols {
            for j in i + 1..cols {
                let alpha: f64 = a[i].iter().map(|v| v * v).sum();
                let beta: f64 = a[j].iter().map(|v| v * v).sum();
                let gamma: f64 = a[i].iter().zip(&a[j]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..rows {
                    let (x, y) = (a[i][k], a[j][k]);
                    a[i][k] = c * x - s * y;
                    a[j][k] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = a.iter().map(|col| col.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, descending.
pub fn jacobi_eigenvalues(sym: &Matrix) -> Vec<f64> {
    let n = sym.rows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|r| (0..n).map(|c| sym.get(r, c)).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| a[r][c] * a[r][c])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// `mᵀm` by explicit loops.
pub fn gram(m: &Matrix) -> Matrix {
    Matrix::from_fn(m.cols(), m.cols(), |i, j| (0..m.rows()).map(|r| m.get(r, i) * m.get(r, j)).sum())
}

/// `tr(XᵀY)` by an explicit double loop over `(XᵀY)_{jj}`.
pub fn trace_xty(x: &Matrix, y: &Matrix) -> f64 {
    let mut tr = 0.0;
    for j in 0..x.cols() {
        for r in 0..x.rows() {
            tr += x.get(r, j) * y.get(r, j);
        }
    }
    tr
}

// ---------------------------------------------------------------------------
// EVBMF free-energy grid oracle
// ---------------------------------------------------------------------------

/// Everything the oracle needs about an `L × M` matrix (`L ≤ M`).
#[derive(Debug, Clone)]
pub struct EvbmfProblem {
    pub l: usize,
    pub m: usize,
    /// Length `L`, descending, tiny values already zeroed.
    pub s: Vec<f64>,
}

impl EvbmfProblem {
    pub fn from_matrix(mat: &Matrix) -> Self {
        let mut s = jacobi_singular_values(mat);
        let (l, m) = (mat.rows().min(mat.cols()), mat.rows().max(mat.cols()));
        s.resize(l, 0.0);
        let top = s[0];
        for v in &mut s {
            if *v < 1e-12 * top {
                *v = 0.0;
            }
        }
        Self { l, m, s }
    }

    fn alpha(&self) -> f64 {
        self.l as f64 / self.m as f64
    }

    pub fn xubar(&self) -> f64 {
        let tauubar = 2.5129 * self.alpha().sqrt();
        (1.0 + tauubar) * (1.0 + self.alpha() / tauubar)
    }

    pub fn bounds(&self) -> (f64, f64) {
        let (l, m) = (self.l as f64, self.m as f64);
        let eh_ub = ((l / (1.0 + self.alpha())).ceil() as usize - 1).min(self.l - 1);
        let upper = self.s.iter().map(|v| v * v).sum::<f64>() / (l * m);
        let tail: Vec<f64> = self.s[eh_ub..].iter().map(|v| v * v).collect();
        let lower_a = self.s[eh_ub].powi(2) / (m * self.xubar());
        let lower_b = tail.iter().sum::<f64>() / tail.len() as f64 / m;
        (lower_a.max(lower_b).min(upper), upper)
    }

    /// Free energy arranged as: Σ_{x≤x̄}(x − ln x) + Σ_{x>x̄}[(x − τ) + ln((τ+1)/x)
    /// + α ln(τ/α + 1)] + (L − H) ln σ², with H the nonzero count.
    pub fn objective(&self, sigma2: f64) -> f64 {
        let alpha = self.alpha();
        let xubar = self.xubar();
        let nz: Vec<f64> = self.s.iter().copied().filter(|&v| v > 0.0).collect();
        let h = nz.len();
        let mut term1 = 0.0;
        let (mut term2, mut term3, mut term4) = (0.0, 0.0, 0.0);
        for g in nz {
            let x = g * g / (self.m as f64 * sigma2);
            if x > xubar {
                let b = x - (1.0 + alpha);
                let tau = 0.5 * (b + (b * b - 4.0 * alpha).sqrt());
                term2 += x - tau;
                term3 += ((tau + 1.0) / x).ln();
                term4 += alpha * (tau / alpha + 1.0).ln();
            } else {
                term1 += x - x.ln();
            }
        }
        term1 + term2 + term3 + term4 + (self.l - h) as f64 * sigma2.ln()
    }

    /// Grid search of σ² over the bounds at spacing 1e-6 of the interval,
    /// then repeated local re-gridding around the best point.
    pub fn grid_minimum(&self) -> (f64, f64) {
        let (lo, hi) = self.bounds();
        if hi <= 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        if lo >= hi {
            return (hi, self.objective(hi));
        }
        const N: usize = 1_000_000;
        let step = (hi - lo) / N as f64;
        let mut best = (hi, self.objective(hi));
        for i in 1..N {
            let s = lo + i as f64 * step;
            let v = self.objective(s);
            if v < best.1 {
                best = (s, v);
            }
        }
        let mut half = step;
        for _ in 0..6 {
            let a = (best.0 - half).max(lo);
            let b = (best.0 + half).min(hi);
            let k = 2000;
            let st = (b - a) / k as f64;
            for i in 0..=k {
                let s = a + i as f64 * st;
                if s <= 0.0 {
                    continue;
                }
                let v = self.objective(s);
                if v < best.1 {
                    best = (s, v);
                }
            }
            half = st;
        }
        best
    }

    /// Retained and shrunk values at a given σ².
    pub fn shrunk_at(&self, sigma2: f64) -> Vec<f64> {
        let (l, m) = (self.l as f64, self.m as f64);
        let threshold = (m * sigma2 * self.xubar()).sqrt();
        self.s
            .iter()
            .copied()
            .filter(|&g| g > threshold && g > 0.0)
            .map(|g| {
                let r = (l + m) * sigma2 / (g * g);
                let disc = (1.0 - r).powi(2) - 4.0 * l * m * sigma2 * sigma2 / g.powi(4);
                g / 2.0 * (1.0 - r + disc.max(0.0).sqrt())
            })
            .collect()
    }
}

/// Planted low-rank signal with orthonormal factors and Gaussian noise.
pub fn planted(rows: usize, cols: usize, sigmas: &[f64], noise_std: f64, seed: u64) -> Matrix {
    let mut r = rng::seeded(seed);
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| -> f64 { StandardNormal.sample(&mut r) }).collect() };
    let orthonormal = |vs: Vec<Vec<f64>>| {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for mut v in vs {
            for q in &out {
                let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
            }
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.iter_mut().for_each(|a| *a /= n);
            out.push(v);
        }
        out
    };
    let u = orthonormal((0..sigmas.len()).map(|_| draw(rows)).collect());
    let v = orthonormal((0..sigmas.len()).map(|_| draw(cols)).collect());
    let noise = draw(rows * cols);
    Matrix::from_fn(rows, cols, |i, j| {
        let signal: f64 = sigmas.iter().enumerate().map(|(k, s)| s * u[k][i] * v[k][j]).sum();
        signal + noise_std * noise[i * cols + j]
    })
}

// ---------------------------------------------------------------------------
// Finite-difference gradient oracle
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Clone)]
pub struct GradCheck {
    pub checked: usize,
    /// Coordinates whose ±h probes cross a ReLU or pooling switch.
    pub skipped: usize,
    pub max_rel_error: f64,
    pub worst: Option<(usize, usize, f64, f64)>,
}

fn pattern(net: &Network, batch: &Batch) -> Vec<Vec<u64>> {
    batch.inputs.iter().map(|x| net.activation_pattern(x)).collect()
}

fn set_param(net: &mut Network, array: usize, idx: usize, value: f64) {
    net.param_arrays_mut()[array][idx] = value;
}

/// Central differences `(f(θ+h) − f(θ−h)) / 2h` for every coordinate,
/// compared to `analytic` by `|a − n| / max(|a|, |n|, floor)`.
pub fn finite_difference_check(
    net: &Network,
    batch: &Batch,
    analytic: &[Vec<f64>],
    h: f64,
    floor: f64,
) -> GradCheck {
    let mut probe = net.clone();
    let base = pattern(net, batch);
    let mut out = GradCheck::default();
    let sizes: Vec<usize> = net.param_arrays().iter().map(|a| a.len()).collect();
    for (array, &len) in sizes.iter().enumerate() {
        for idx in 0..len {
            let theta = net.param_arrays()[array][idx];
            set_param(&mut probe, array, idx, theta + h);
            let plus_pattern = pattern(&probe, batch);
            let f_plus = probe.loss(batch).unwrap();
            set_param(&mut probe, array, idx, theta - h);
            let minus_pattern = pattern(&probe, batch);
            let f_minus = probe.loss(batch).unwrap();
            set_param(&mut probe, array, idx, theta);
            if plus_pattern != base || minus_pattern != base {
                out.skipped += 1;
                continue;
            }
            let numeric = (f_plus - f_minus) / (2.0 * h);
            let a = analytic[array][idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            out.checked += 1;
            if rel > out.max_rel_error {
                out.max_rel_error = rel;
                out.worst = Some((array, idx, a, numeric));
            }
        }
    }
    out
}
