//! Special persymmetric q-Racah kernel: q-Pochhammer symbols, the grid,
//! the factor coefficients, orthogonality weights and monic polynomials.
//!
//! Everything here is dimensionless. The jacobi module applies the
//! physical scale `ω²(k1 − k0 q^{1/2})² / 4(r² − 1)`.

use crate::error::{CradleError, Result};
use crate::Boundary;

/// Base `q`, its square root `qbar`, grid parameter `gamma` and order `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QParams {
    pub q: f64,
    pub qbar: f64,
    pub gamma: f64,
    pub n: usize,
}

impl QParams {
    /// Builds the parameters from `qbar` so that `q = qbar²` holds to one rounding.
    pub fn new(qbar: f64, gamma: f64, n: usize) -> Result<Self> {
        if !(qbar > 0.0 && qbar < 1.0) {
            return Err(CradleError::InvalidDesign(format!(
                "qbar must lie in (0, 1), got {qbar}"
            )));
        }
        if n < 1 {
            return Err(CradleError::InvalidDesign("N must be at least 1".into()));
        }
        let q = qbar * qbar;
        if !gamma.is_finite() || (gamma * q).abs() >= 1.0 {
            return Err(CradleError::Positivity(format!(
                "|gamma q| must be below 1, got {}",
                (gamma * q).abs()
            )));
        }
        Ok(QParams { q, qbar, gamma, n })
    }

    /// `q^k` for any integer exponent.
    #[inline]
    pub fn qpow(&self, k: i64) -> f64 {
        self.q.powi(k as i32)
    }

    fn g2(&self) -> f64 {
        self.gamma * self.gamma
    }
}

/// `(a; q)_k = Π_{j<k} (1 − a q^j)`.
pub fn q_pochhammer(a: f64, q: f64, k: usize) -> f64 {
    let mut p = 1.0;
    let mut qj = 1.0;
    for _ in 0..k {
        p *= 1.0 - a * qj;
        qj *= q;
    }
    p
}

/// Grid point `μ(x) = q^{−x} + γ² q^{x+1}`.
pub fn grid_mu(x: usize, p: &QParams) -> f64 {
    let x = x as i64;
    p.qpow(-x) + p.g2() * p.qpow(x + 1)
}

/// Normalized factors `(A_n, C_n)`; `A_N` and `C_0` come out as exact zeros.
pub fn racah_factors(n: usize, p: &QParams) -> Result<(f64, f64)> {
    if n > p.n {
        return Err(CradleError::InvalidDesign(format!(
            "factor index {n} outside 0..={}",
            p.n
        )));
    }
    let (ni, nn) = (n as i64, p.n as i64);
    let g2 = p.g2();
    let a = (1.0 - g2 * p.qpow(2 * ni + 2)) * (1.0 - p.qpow(2 * ni - 2 * nn))
        / ((1.0 + p.qpow(2 * ni - nn)) * (1.0 + p.qpow(2 * ni - nn + 1)));
    let c = (1.0 - p.qpow(2 * ni)) * (g2 * p.q - p.qpow(2 * ni - 2 * nn - 1))
        / ((1.0 + p.qpow(2 * ni - nn - 1)) * (1.0 + p.qpow(2 * ni - nn)));
    if !a.is_finite() || !c.is_finite() {
        return Err(CradleError::Conditioning(format!(
            "factor n = {n} is not representable (q = {}, N = {})",
            p.q, p.n
        )));
    }
    Ok((a, c))
}

/// All factors `A_0..A_N` and `C_0..C_N`.
pub fn racah_factor_arrays(p: &QParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut a = Vec::with_capacity(p.n + 1);
    let mut c = Vec::with_capacity(p.n + 1);
    for n in 0..=p.n {
        let (an, cn) = racah_factors(n, p)?;
        a.push(an);
        c.push(cn);
    }
    Ok((a, c))
}

/// Largest over smallest nonzero factor magnitude. Above ~1e14 the
/// monic recurrence no longer carries relative accuracy.
pub fn conditioning_ratio(p: &QParams) -> Result<f64> {
    let (a, _) = racah_factor_arrays(p)?;
    let mags: Vec<f64> = a.iter().map(|v| v.abs()).filter(|v| *v > 0.0).collect();
    let hi = mags.iter().cloned().fold(0.0, f64::max);
    let lo = mags.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(if lo.is_finite() { hi / lo } else { 1.0 })
}

/// Orthogonality weights on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    pub weights: Vec<f64>,
    pub grid: Vec<f64>,
}

impl WeightTable {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Weights `w_x`, evaluated as a running product in `x`.
///
/// The free-free variant uses the reduced form, whose `(1 + q^x)` factor
/// is replaced by 1 at `x = 0` (the limit of the general formula).
pub fn weight_table(p: &QParams, variant: Boundary) -> Result<WeightTable> {
    let weights = match variant {
        Boundary::FixedFixed => general_weights(p),
        Boundary::FreeFree => {
            let target = -p.qbar;
            if ((p.gamma * p.q) - target).abs() > 1e-12 * target.abs() {
                return Err(CradleError::InvalidDesign(format!(
                    "free-free weights need gamma q = -q^(1/2), got {}",
                    p.gamma * p.q
                )));
            }
            free_free_weights(p)
        }
    };
    if let Some((x, w)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| !(w.is_finite() && **w > 0.0))
    {
        return Err(CradleError::Positivity(format!("weight w_{x} = {w}")));
    }
    let grid = (0..=p.n).map(|x| grid_mu(x, p)).collect();
    Ok(WeightTable { weights, grid })
}

fn general_weights(p: &QParams) -> Vec<f64> {
    let (q, n, g2) = (p.q, p.n, p.g2());
    let gq = p.gamma * q;
    let norm = q_pochhammer(gq, q, n) * q_pochhammer(-gq, q, n)
        / (q_pochhammer(-1.0, q, n) * q_pochhammer(g2 * q * q, q, n));
    let qn = p.qpow(n as i64);
    let mut out = Vec::with_capacity(n + 1);
    let mut run = 1.0;
    for x in 0..=n {
        let xi = x as i64;
        // (1 − γ²q^{2x+1}) / (1 − γ²q^{x+1}) is 0/0 at x = 0 when γ²q = 1.
        let extra = if x == 0 {
            1.0
        } else {
            (1.0 - g2 * p.qpow(2 * xi + 1)) / (1.0 - g2 * p.qpow(xi + 1))
        };
        out.push(run * extra * norm);
        if x < n {
            run *= (p.qpow(xi) - qn) * (1.0 - g2 * p.qpow(xi + 2))
                / ((1.0 - p.qpow(xi + 1)) * (1.0 - g2 * p.qpow(n as i64 + 2 + xi)));
        }
    }
    out
}

fn free_free_weights(p: &QParams) -> Vec<f64> {
    let (q, n) = (p.q, p.n);
    let norm = q_pochhammer(p.qbar, q, n) * q_pochhammer(-p.qbar, q, n)
        / (q_pochhammer(-1.0, q, n) * q_pochhammer(q, q, n));
    let qn = p.qpow(n as i64);
    let edge = |x: usize| if x == 0 { 1.0 } else { 1.0 + p.qpow(x as i64) };
    let mut out = Vec::with_capacity(n + 1);
    let mut run = norm;
    for x in 0..=n {
        out.push(run * edge(x));
        if x < n {
            let xi = x as i64;
            run *= (p.qpow(xi) - qn) / (1.0 - p.qpow(n as i64 + 1 + xi));
        }
    }
    out
}

/// Monic three-term recurrence `P_{n+1} = (x − b_n) P_n − u_n P_{n−1}`.
///
/// `offsq[0]` is unused padding so that `offsq[n]` is `u_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialEvaluator {
    pub diag: Vec<f64>,
    pub offsq: Vec<f64>,
}

impl PolynomialEvaluator {
    pub fn new(diag: Vec<f64>, offsq: Vec<f64>) -> Self {
        debug_assert_eq!(diag.len(), offsq.len());
        PolynomialEvaluator { diag, offsq }
    }

    /// Dimensionless recurrence of the kernel itself: `b_n = 1 + γ²q − (A_n + C_n)`.
    pub fn from_params(p: &QParams) -> Result<Self> {
        let (a, c) = racah_factor_arrays(p)?;
        let shift = 1.0 + p.g2() * p.q;
        let diag = (0..=p.n).map(|n| shift - (a[n] + c[n])).collect();
        let mut offsq = vec![0.0; p.n + 1];
        for n in 1..=p.n {
            offsq[n] = a[n - 1] * c[n];
        }
        Ok(PolynomialEvaluator { diag, offsq })
    }

    pub fn degree(&self) -> usize {
        self.diag.len() - 1
    }

    /// `P_n(x)`.
    pub fn eval_monic(&self, n: usize, x: f64) -> f64 {
        self.eval_all_upto(n, x)[n]
    }

    /// `P_0(x) .. P_{N}(x)`.
    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        self.eval_all_upto(self.degree(), x)
    }

    /// `P_0(x) .. P_{N+1}(x)`; the last entry vanishes on the spectrum.
    pub fn eval_all_plus_one(&self, x: f64) -> Vec<f64> {
        self.eval_all_upto(self.degree() + 1, x)
    }

    fn eval_all_upto(&self, n: usize, x: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(1.0);
        if n == 0 {
            return out;
        }
        out.push(x - self.diag[0]);
        for k in 1..n {
            let next = (x - self.diag[k]) * out[k] - self.offsq[k] * out[k - 1];
            out.push(next);
        }
        out
    }

    /// Products `u_1 ⋯ u_n` for `n = 0..=N`.
    pub fn norms(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.diag.len());
        let mut acc = 1.0;
        out.push(acc);
        for u in &self.offsq[1..] {
            acc *= u;
            out.push(acc);
        }
        out
    }
}

/// Normalized polynomial `P̃_n(μ(x))` as a terminating basic hypergeometric sum.
pub fn eval_hypergeometric_check(n: usize, x: usize, p: &QParams) -> f64 {
    hypergeometric_sum(n, x, p).0
}

/// The sum together with its largest term, which bounds the cancellation error.
pub fn hypergeometric_sum(n: usize, x: usize, p: &QParams) -> (f64, f64) {
    let q = p.q;
    let (ni, nn, xi) = (n as i64, p.n as i64, x as i64);
    let g2 = p.g2();
    let mut sum = 0.0;
    let mut biggest: f64 = 0.0;
    let mut term: f64 = 1.0;
    for k in 0..=ni {
        sum += term;
        biggest = biggest.max(term.abs());
        if term == 0.0 || k == ni {
            break;
        }
        let num = (1.0 - p.qpow(-ni + k))
            * (1.0 + p.qpow(ni - nn + k))
            * (1.0 - p.qpow(-xi + k))
            * (1.0 - g2 * p.qpow(xi + 1 + k));
        let den = (1.0 - p.qpow(-nn + k))
            * (1.0 - p.gamma * p.qpow(1 + k))
            * (1.0 + p.gamma * p.qpow(1 + k))
            * (1.0 - p.qpow(1 + k));
        term *= num / den * q;
    }
    (sum, biggest)
}

/// `A_{n−1} ⋯ A_0`, the factor linking `P̃_n` to the monic `P_n`.
pub fn monic_scale(n: usize, p: &QParams) -> Result<f64> {
    let mut s = 1.0;
    for j in 0..n {
        s *= racah_factors(j, p)?.0;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(qbar: f64, gamma: f64, n: usize) -> QParams {
        QParams::new(qbar, gamma, n).unwrap()
    }

    #[test]
    fn pochhammer_examples() {
        assert_eq!(q_pochhammer(0.3, 0.4, 0), 1.0);
        assert_eq!(q_pochhammer(0.5, 0.5, 2), 0.375);
        assert_eq!(q_pochhammer(0.0, 0.7, 7), 1.0);
        let q = 0.37;
        for k in 0..10 {
            let step = q_pochhammer(0.8, q, k) * (1.0 - 0.8 * q.powi(k as i32));
            assert_relative_eq!(q_pochhammer(0.8, q, k + 1), step, max_relative = 1e-15);
        }
    }

    #[test]
    fn grid_examples() {
        let p = params(0.5, 1.0, 3);
        assert_eq!(grid_mu(0, &p), 1.0 + p.q);
        assert_eq!(grid_mu(1, &p), 4.0625);
        let m = params(0.5, -1.0, 3);
        for x in 0..=3 {
            assert_eq!(grid_mu(x, &p), grid_mu(x, &m));
        }
    }

    #[test]
    fn factors_vanish_at_ends_and_mirror() {
        for &(qbar, gamma, n) in &[(0.27, 3.7, 5), (0.6, 0.9, 8), (0.9, -0.5, 12)] {
            let p = params(qbar, gamma, n);
            let (a, c) = racah_factor_arrays(&p).unwrap();
            assert_eq!(c[0], 0.0);
            assert_eq!(a[n], 0.0);
            for k in 0..=n {
                assert_relative_eq!(c[n - k], a[k], max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn factors_report_overflow() {
        let p = params(1e-6, 0.0, 40);
        assert!(matches!(
            racah_factors(0, &p),
            Err(CradleError::Conditioning(_))
        ));
    }

    #[test]
    fn weights_normalized_and_positive() {
        for &(qbar, gamma, n) in &[(0.27, 3.7, 5), (0.6, 0.9, 8), (0.9, -0.5, 12), (0.2, 0.0, 3)] {
            let w = weight_table(&params(qbar, gamma, n), Boundary::FixedFixed).unwrap();
            assert!((w.total() - 1.0).abs() < 1e-12);
            assert!(w.weights.iter().all(|v| *v > 0.0));
            assert!(w.grid.windows(2).all(|g| g[1] > g[0]));
        }
    }

    #[test]
    fn free_free_weights_match_general() {
        for &(qbar, n) in &[(0.2679491924311227, 1), (0.2679491924311227, 6), (0.1010205144336438, 12)] {
            let p = params(qbar, -qbar / (qbar * qbar), n);
            let ff = weight_table(&p, Boundary::FreeFree).unwrap();
            let gen = weight_table(&p, Boundary::FixedFixed).unwrap();
            for (a, b) in ff.weights.iter().zip(&gen.weights) {
                assert_relative_eq!(*a, *b, max_relative = 1e-12);
            }
            assert!((ff.total() - 1.0).abs() < 1e-12);
        }
        let p = params(0.2679491924311227, -1.0 / 0.2679491924311227, 1);
        let w = weight_table(&p, Boundary::FreeFree).unwrap();
        assert_relative_eq!(w.weights[0], 0.5, max_relative = 1e-14);
        assert_relative_eq!(w.weights[1], 0.5, max_relative = 1e-14);
    }

    #[test]
    fn free_free_weights_need_matching_gamma() {
        let p = params(0.3, 0.5, 3);
        assert!(weight_table(&p, Boundary::FreeFree).is_err());
    }

    #[test]
    fn monic_low_degrees() {
        let p = params(0.5, 0.7, 4);
        let ev = PolynomialEvaluator::from_params(&p).unwrap();
        assert_eq!(ev.eval_monic(0, 3.3), 1.0);
        assert_eq!(ev.eval_monic(1, 3.3), 3.3 - ev.diag[0]);
    }

    #[test]
    fn orthogonality_by_direct_sum() {
        let p = params(0.9, 0.6, 6);
        let ev = PolynomialEvaluator::from_params(&p).unwrap();
        let w = weight_table(&p, Boundary::FixedFixed).unwrap();
        let norms = ev.norms();
        let mut g12 = 0.0;
        for (wx, mu) in w.weights.iter().zip(&w.grid) {
            g12 += wx * ev.eval_monic(1, *mu) * ev.eval_monic(2, *mu);
        }
        assert!(g12.abs() < 1e-10 * (norms[1] * norms[2]).sqrt());
    }

    #[test]
    fn hypergeometric_edges() {
        let p = params(0.7, 0.4, 5);
        for x in 0..=5 {
            assert_eq!(eval_hypergeometric_check(0, x, &p), 1.0);
        }
        for n in 0..=5 {
            assert_eq!(eval_hypergeometric_check(n, 0, &p), 1.0);
        }
    }

    #[test]
    fn hypergeometric_matches_monic() {
        // The alternating sum loses digits as q approaches 1, so the error is
        // measured against its largest term.
        let cases = [(0.9, 0.6, 10), (0.8, 0.6, 10), (0.7, -0.3, 10), (0.75, 1.1, 6), (0.5, 0.2, 8), (0.3, 2.0, 5)];
        for &(qbar, gamma, n) in &cases {
            let p = params(qbar, gamma, n);
            let ev = PolynomialEvaluator::from_params(&p).unwrap();
            for m in 0..=n {
                let scale = monic_scale(m, &p).unwrap();
                for x in 0..=n {
                    let mono = ev.eval_monic(m, grid_mu(x, &p));
                    let (sum, big) = hypergeometric_sum(m, x, &p);
                    let tol = 1e-9 * (scale * big).abs().max(mono.abs());
                    assert!((mono - scale * sum).abs() <= tol, "q={} n={m} x={x}", p.q);
                }
            }
        }
    }
}
