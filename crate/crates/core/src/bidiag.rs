//! Eigen-decomposition of `J = shift·I + GᵀG` for a lower-bidiagonal `G`.
//!
//! `G` is `(N+2)×(N+1)` with `G[i][i] = √|C_i|` and `G[i+1][i] = −√|A_i|`,
//! so `GᵀG` is the stiffness operator with negative off-diagonals. A
//! Givens QR brings `G` to square upper-bidiagonal form, then implicit
//! zero-shift QR sweeps find its singular values. Neither stage subtracts,
//! so small eigenvalues keep full relative accuracy even when `‖J‖` is
//! twenty orders of magnitude above them.

use crate::error::{CradleError, Result};

const MAX_SWEEPS: usize = 20_000;
const REL_TOL: f64 = 1e-17;

/// Sorted eigenvalues, matching eigenvector rows and the sweep count.
#[derive(Debug, Clone)]
pub struct FactoredEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub sweeps: usize,
}

#[inline]
fn rot(f: f64, g: f64) -> (f64, f64, f64) {
    if g == 0.0 {
        (if f >= 0.0 { 1.0 } else { -1.0 }, 0.0, f.abs())
    } else if f == 0.0 {
        (0.0, g.signum(), g.abs())
    } else {
        let r = f.hypot(g);
        (f / r, g / r, r)
    }
}

/// Diagonalizes `shift + GᵀG` built from factors `a` (A_i ≤ 0) and `c` (C_i ≤ 0).
///
/// Rows of `vectors` are unit eigenvectors with a positive first component.
pub fn factored_eigen(shift: f64, a: &[f64], c: &[f64]) -> Result<FactoredEigen> {
    let n = a.len();
    assert_eq!(n, c.len(), "factor arrays differ in length");
    assert!(n > 0, "empty factor arrays");
    if let Some(bad) = a.iter().chain(c).find(|v| !(v.is_finite() && **v <= 0.0)) {
        return Err(CradleError::Positivity(format!(
            "factors must be finite and non-positive, found {bad}"
        )));
    }
    let gd: Vec<f64> = c.iter().map(|v| (-v).sqrt()).collect();
    let gl: Vec<f64> = a.iter().map(|v| -(-v).sqrt()).collect();

    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    let mut cur = gd[0];
    for i in 0..n {
        let (cs, sn, r) = rot(cur, gl[i]);
        d[i] = r;
        if i + 1 < n {
            e[i] = sn * gd[i + 1];
            cur = cs * gd[i + 1];
        }
    }

    let mut vt: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut sweeps = 0;
    loop {
        let mut done = true;
        for i in 0..e.len() {
            if e[i] == 0.0 || e[i].abs() <= REL_TOL * d[i].abs().min(d[i + 1].abs()) {
                e[i] = 0.0;
            } else {
                done = false;
            }
        }
        if done {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(CradleError::NoConvergence { sweeps });
        }
        sweeps += 1;
        zero_shift_sweep(&mut d, &mut e, &mut vt);
    }

    let mut order: Vec<usize> = (0..n).collect();
    let values_raw: Vec<f64> = d.iter().map(|s| shift + s * s).collect();
    order.sort_by(|&i, &j| values_raw[i].total_cmp(&values_raw[j]));
    let values = order.iter().map(|&i| values_raw[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let mut row = vt[i].clone();
            let lead = row.iter().find(|v| **v != 0.0).copied().unwrap_or(1.0);
            if lead < 0.0 {
                row.iter_mut().for_each(|v| *v = -*v);
            }
            row
        })
        .collect();
    Ok(FactoredEigen { values, vectors, sweeps })
}

/// One Demmel–Kahan zero-shift QR sweep on the upper bidiagonal `(d, e)`.
fn zero_shift_sweep(d: &mut [f64], e: &mut [f64], vt: &mut [Vec<f64>]) {
    let n = d.len();
    if n < 2 {
        return;
    }
    let mut cs = 1.0;
    let mut oldcs = 1.0;
    let mut oldsn = 0.0;
    for i in 0..n - 1 {
        let (c1, s1, r) = rot(d[i] * cs, e[i]);
        cs = c1;
        if i > 0 {
            e[i - 1] = oldsn * r;
        }
        let (c2, s2, r2) = rot(oldcs * r, d[i + 1] * s1);
        oldcs = c2;
        oldsn = s2;
        d[i] = r2;
        let (lo, hi) = vt.split_at_mut(i + 1);
        for (x, y) in lo[i].iter_mut().zip(hi[0].iter_mut()) {
            let t = *y;
            *y = c1 * t - s1 * *x;
            *x = s1 * t + c1 * *x;
        }
    }
    let h = d[n - 1] * cs;
    e[n - 2] = h * oldsn;
    d[n - 1] = h * oldcs;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_free_free() {
        let f = factored_eigen(0.0, &[-0.5, 0.0], &[0.0, -0.5]).unwrap();
        assert!(f.values[0].abs() < 1e-16);
        assert!((f.values[1] - 1.0).abs() < 1e-15);
        let s = 0.5f64.sqrt();
        assert!((f.vectors[0][0] - s).abs() < 1e-15 && (f.vectors[0][1] - s).abs() < 1e-15);
        assert!((f.vectors[1][0] - s).abs() < 1e-15 && (f.vectors[1][1] + s).abs() < 1e-15);
    }

    #[test]
    fn single_site() {
        let f = factored_eigen(2.0, &[-1.5], &[-0.25]).unwrap();
        assert!((f.values[0] - 3.75).abs() < 1e-15);
        assert_eq!(f.vectors, vec![vec![1.0]]);
    }

    #[test]
    fn rejects_positive_factor() {
        assert!(factored_eigen(0.0, &[0.5, 0.0], &[0.0, -0.5]).is_err());
    }

    #[test]
    fn uniform_chain_matches_sine_modes() {
        // Fixed-fixed uniform chain: eigenvalues 2 − 2cos(kπ/(n+1)).
        let n = 7;
        let f = factored_eigen(0.0, &vec![-1.0; n], &vec![-1.0; n]).unwrap();
        for (k, x) in f.values.iter().enumerate() {
            let th = (k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64;
            let exact = 4.0 * (th / 2.0).sin().powi(2);
            assert!((x - exact).abs() < 1e-14 * exact.max(1.0), "{x} vs {exact}");
        }
    }
}
