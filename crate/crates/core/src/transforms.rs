//! Isospectral deformation of persymmetric chains and spectral surgery by
//! Christoffel transforms.
//!
//! The deformation rotates each mirror pair of sites `(i, N−i)` by a
//! common angle. It keeps the spectrum and trades perfect transfer for a
//! split `(1−2α, 2√(α(1−α)))` between the two ends. Surgery multiplies the
//! weights by `(x − x_k)` to remove a spectral point and shrinks the matrix
//! by one site per step.

use serde::{Deserialize, Serialize};

use crate::error::{CradleError, Result};
use crate::jacobi::{eigensystem_numeric, EigenSystem, JacobiMatrix};
use crate::qkernel::WeightTable;
use crate::synthesis::{chain_from_gamma, gamma_vector, synthesize_free_free_ladder, ChainSpec};
use crate::Boundary;

const PERSYMMETRY_TOL: f64 = 1e-8;
const ZERO_TOL: f64 = 1e-13;
const SPECTRUM_TOL: f64 = 1e-9;

/// Deformation angle and the central index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeformationParams {
    pub alpha: f64,
    /// `sin 2θ = 1 − 2α`, `cos 2θ = 2√(α(1−α))`.
    pub theta: f64,
    /// `N = 2j+1` or `N = 2j`.
    pub j: usize,
    pub n: usize,
}

impl DeformationParams {
    pub fn new(alpha: f64, n: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CradleError::AlphaOutOfRange(alpha));
        }
        let theta = 0.5 * (1.0 - 2.0 * alpha).atan2(2.0 * (alpha * (1.0 - alpha)).sqrt());
        let j = if n % 2 == 1 { (n - 1) / 2 } else { n / 2 };
        Ok(DeformationParams { alpha, theta, j, n })
    }

    /// `(c, s)` with `c + s = √(2(1−α))` and `c − s = √(2α)`.
    pub fn rotation(&self) -> (f64, f64) {
        let a = self.alpha.sqrt();
        let b = (1.0 - self.alpha).sqrt();
        ((b + a) / 2f64.sqrt(), (b - a) / 2f64.sqrt())
    }

    /// Symmetric involution acting on the mirror planes `(i, N−i)`, `i < N−i`,
    /// as `[[c, s], [s, −c]]`; the center site of an even chain is fixed.
    pub fn v_matrix(&self) -> Vec<Vec<f64>> {
        let s = self.n + 1;
        let (c, sn) = self.rotation();
        let mut v = vec![vec![0.0; s]; s];
        for i in 0..s {
            let m = self.n - i;
            if i < m {
                v[i][i] = c;
                v[i][m] = sn;
                v[m][i] = sn;
                v[m][m] = -c;
            } else if i == m {
                v[i][i] = 1.0;
            }
        }
        v
    }
}

fn check_persymmetric(jac: &JacobiMatrix) -> Result<()> {
    let n = jac.order();
    let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE);
    for i in 0..=n {
        if rel(jac.factor_a[i], jac.factor_c[n - i]) > PERSYMMETRY_TOL {
            return Err(CradleError::InvalidDesign(format!(
                "factors are not mirror symmetric at site {i}"
            )));
        }
    }
    Ok(())
}

/// Deformed matrix: `Ã_j = 2α A_j`, `C̃_{N−j} = 2(1−α) C_{N−j}`, all else unchanged.
///
/// For odd `N` this gives `ũ_{j+1} = 4α(1−α) u_{j+1}`; for even `N`,
/// `ũ_j = 2(1−α) u_j` and `ũ_{j+1} = 2α u_{j+1}`.
pub fn deform_jacobi(jac: &JacobiMatrix, alpha: f64) -> Result<JacobiMatrix> {
    let p = DeformationParams::new(alpha, jac.order())?;
    check_persymmetric(jac)?;
    let n = jac.order();
    if n == 0 {
        return Ok(jac.clone());
    }
    let mut a = jac.factor_a.clone();
    let mut c = jac.factor_c.clone();
    a[p.j] *= 2.0 * alpha;
    c[n - p.j] *= 2.0 * (1.0 - alpha);
    JacobiMatrix::from_factors(jac.boundary, jac.shift, a, c)
}

/// Eigenvectors of the deformed matrix.
///
/// Rows with even `n` scale by `c + s` on the near half and `c − s` on the
/// far half; odd rows the other way round. The center of an even chain is
/// unchanged.
pub fn deform_eigensystem(eig: &EigenSystem, alpha: f64) -> Result<EigenSystem> {
    let n = eig.size() - 1;
    let p = DeformationParams::new(alpha, n)?;
    let (c, s) = p.rotation();
    let vectors = eig
        .vectors
        .iter()
        .enumerate()
        .map(|(row, u)| {
            let sg = if row % 2 == 0 { 1.0 } else { -1.0 };
            u.iter()
                .enumerate()
                .map(|(i, v)| {
                    if 2 * i < n {
                        v * (c + sg * s)
                    } else if 2 * i > n {
                        v * (c - sg * s)
                    } else {
                        *v
                    }
                })
                .collect()
        })
        .collect();
    Ok(EigenSystem { values: eig.values.clone(), vectors })
}

/// Rescales an undeformed mirror-symmetric chain.
///
/// With `f = α/(1−α)`: odd `N` takes `m_i → f m_i` for `i > j`,
/// `K_{j+1} → 2α K_{j+1}`, `K_i → f K_i` for `i > j+1`; even `N` takes
/// `m_j → m_j / (2(1−α))` and `m_i, K_i → f m_i, f K_i` for `i > j`.
pub fn deform_chain(chain: &ChainSpec, alpha: f64) -> Result<ChainSpec> {
    chain.validate()?;
    if (chain.alpha - 0.5).abs() > 1e-15 {
        return Err(CradleError::InvalidDesign("source chain is already deformed".into()));
    }
    let n = chain.order();
    let p = DeformationParams::new(alpha, n)?;
    let f = alpha / (1.0 - alpha);
    let j = p.j;
    let mut m = chain.masses.clone();
    let mut k = chain.full_springs();
    if n % 2 == 1 {
        for (i, mi) in m.iter_mut().enumerate() {
            if i > j {
                *mi *= f;
            }
        }
        for (i, ki) in k.iter_mut().enumerate() {
            if i == j + 1 {
                *ki *= 2.0 * alpha;
            } else if i > j + 1 {
                *ki *= f;
            }
        }
    } else {
        for (i, mi) in m.iter_mut().enumerate() {
            if i == j {
                *mi /= 2.0 * (1.0 - alpha);
            } else if i > j {
                *mi *= f;
            }
        }
        for (i, ki) in k.iter_mut().enumerate() {
            if i > j {
                *ki *= f;
            }
        }
    }
    let springs = match chain.boundary {
        Boundary::FixedFixed => k,
        Boundary::FreeFree => k[1..k.len() - 1].to_vec(),
    };
    ChainSpec::new(chain.boundary, m, springs, alpha, chain.omega)
}

// ---------------------------------------------------------------------------
// Surgery

/// One Christoffel step removing the spectral point `x_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChristoffelStep {
    pub k: usize,
    pub removed: f64,
    /// `E_n = P_{n+1}(x_k) / P_n(x_k)` for `n < N`.
    pub ratios: Vec<f64>,
    /// Normalization of the new weights.
    pub norm: f64,
    pub weights: Vec<f64>,
    pub grid: Vec<f64>,
    pub diag: Vec<f64>,
    pub offsq: Vec<f64>,
}

/// Recurrence coefficients, weights and spectrum after surgery.
#[derive(Debug, Clone, PartialEq)]
pub struct SurgeryResult {
    pub weights: WeightTable,
    pub jacobi: JacobiMatrix,
    pub steps: Vec<ChristoffelStep>,
    /// Largest relative mismatch between `b̌_n, b̌_{N−n}` and `ǔ_n, ǔ_{N+1−n}`
    /// in the raw recurrence output.
    pub mirror_defect: f64,
}

/// Ratios `E_n = P_{n+1}(x)/P_n(x)` at an eigenvalue `x`.
///
/// The forward recurrence `E_n = x − b_n − u_n/E_{n−1}` cancels toward the
/// far end, where `E_n → E_N = 0`; the backward one
/// `E_{n−1} = u_n/(x − b_n − E_n)` is accurate there. Both are run and
/// spliced at the index where they agree best. A root of some `P_{n+1}`
/// shows up as a forward value, or a backward denominator, cancelling to
/// rounding level against its own terms.
fn twisted_ratios(x: f64, diag: &[f64], offsq: &[f64], k: usize) -> Result<Vec<f64>> {
    let n = diag.len() - 1;
    let mut fwd = Vec::with_capacity(n);
    let mut fwd_terms = Vec::with_capacity(n);
    for i in 0..n {
        let prev = if i == 0 { 0.0 } else { offsq[i] / fwd[i - 1] };
        fwd.push(x - diag[i] - prev);
        fwd_terms.push((x - diag[i]).abs() + prev.abs());
    }
    let mut bwd = vec![0.0; n];
    let mut den = vec![0.0; n];
    let mut den_terms = vec![0.0; n];
    let mut e_next = 0.0;
    for i in (0..n).rev() {
        den[i] = x - diag[i + 1] - e_next;
        den_terms[i] = (x - diag[i + 1]).abs() + f64::abs(e_next);
        bwd[i] = offsq[i + 1] / den[i];
        e_next = bwd[i];
    }
    let gap = |i: usize| {
        let m = fwd[i].abs().max(bwd[i].abs());
        if m > 0.0 && m.is_finite() { (fwd[i] - bwd[i]).abs() / m } else { f64::INFINITY }
    };
    let twist = (0..n).min_by(|&i, &j| gap(i).total_cmp(&gap(j))).unwrap_or(0);
    let vanishes = |i: usize| {
        let (v, t) = if i < twist { (fwd[i], fwd_terms[i]) } else { (den[i], den_terms[i]) };
        !(v.is_finite() && v.abs() > ZERO_TOL * t)
    };
    if let Some(i) = (0..n).find(|&i| vanishes(i)) {
        // A vanishing backward denominator at `i` is a root of `P_i`.
        let degree = if i < twist { i + 1 } else { i };
        return Err(CradleError::Surgery(format!("P_{degree}(x_{k}) vanishes")));
    }
    Ok((0..n).map(|i| if i < twist { fwd[i] } else { bwd[i] }).collect())
}

fn christoffel(weights: &[f64], grid: &[f64], diag: &[f64], offsq: &[f64], k: usize) -> Result<ChristoffelStep> {
    let size = diag.len();
    if size < 2 {
        return Err(CradleError::Surgery("cannot remove a point from a single-site chain".into()));
    }
    let x = grid[k];
    let e = twisted_ratios(x, diag, offsq, k)?;
    let en = |n: usize| if n < size - 1 { e[n] } else { 0.0 };
    let new_diag: Vec<f64> = (0..size - 1).map(|n| diag[n + 1] + en(n + 1) - en(n)).collect();
    let mut new_off = vec![0.0; size - 1];
    for n in 1..size - 1 {
        new_off[n] = offsq[n] * e[n] / e[n - 1];
    }
    let mut new_w = Vec::with_capacity(size - 1);
    let mut new_grid = Vec::with_capacity(size - 1);
    for (s, (w, g)) in weights.iter().zip(grid).enumerate() {
        if s != k {
            new_w.push((g - x) * w);
            new_grid.push(*g);
        }
    }
    let total: f64 = new_w.iter().sum();
    let norm = 1.0 / total;
    new_w.iter_mut().for_each(|w| *w *= norm);
    Ok(ChristoffelStep {
        k,
        removed: x,
        ratios: e,
        norm,
        weights: new_w,
        grid: new_grid,
        diag: new_diag,
        offsq: new_off,
    })
}

/// Factors `J = s + GᵀG` with `s` the smallest eigenvalue, `Č_0 = 0`,
/// `Ǎ_n = s − b_n − Č_n`, `Č_{n+1} = u_{n+1}/Ǎ_n`.
///
/// The elimination cancels once `|Ǎ_n| ≪ |Č_n|`, which happens past the
/// center, so only the first half is eliminated and the rest is mirrored
/// from `Ǎ_n = Č_{N−n}`.
fn refactor(boundary: Boundary, diag: &[f64], offsq: &[f64], shift: f64) -> Result<JacobiMatrix> {
    let size = diag.len();
    let n = size - 1;
    let half = n / 2;
    let mut a = vec![0.0; size];
    let mut c = vec![0.0; size];
    for i in 0..=half {
        a[i] = shift - diag[i] - c[i];
        if !(a[i] < 0.0) && i < n {
            return Err(CradleError::Positivity(format!("refactored A_{i} = {} is not negative", a[i])));
        }
        if i < half {
            c[i + 1] = offsq[i + 1] / a[i];
        }
    }
    for i in 0..=half {
        if n - i > half || (n - i == half && n % 2 == 1) {
            c[n - i] = a[i];
            a[n - i] = c[i];
        }
    }
    if n == 0 {
        a[0] = 0.0;
    }
    JacobiMatrix::from_factors(boundary, shift, a, c)
}

fn mirror_mismatch(diag: &[f64], offsq: &[f64]) -> f64 {
    let n = diag.len() - 1;
    let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE);
    let db = (0..=n).map(|i| rel(diag[i], diag[n - i])).fold(0.0, f64::max);
    let du = (1..=n).map(|i| rel(offsq[i], offsq[n + 1 - i])).fold(0.0, f64::max);
    db.max(du)
}

fn finish(boundary: Boundary, steps: Vec<ChristoffelStep>) -> Result<SurgeryResult> {
    let last = steps.last().expect("at least one step");
    if let Some(w) = last.weights.iter().find(|w| !(**w > 0.0)) {
        return Err(CradleError::Surgery(format!("surgered weight {w} is not positive")));
    }
    let shift = last.grid.iter().copied().fold(f64::INFINITY, f64::min);
    let mirror_defect = mirror_mismatch(&last.diag, &last.offsq);
    // The diagonal is resolved best in the far half and the off-diagonal in
    // the near half; mirror symmetry lets each be read from its good side.
    let n = last.diag.len() - 1;
    let diag: Vec<f64> = (0..=n).map(|i| last.diag[i.max(n - i)]).collect();
    let offsq: Vec<f64> = (0..=n).map(|i| if i == 0 { 0.0 } else { last.offsq[i.min(n + 1 - i)] }).collect();
    let jacobi = refactor(boundary, &diag, &offsq, shift)?;
    let check = eigensystem_numeric(&jacobi)?;
    let top = last.grid.last().copied().unwrap_or(1.0);
    let spectral_error = check
        .values
        .iter()
        .zip(&last.grid)
        .map(|(a, b)| if *b == 0.0 { a.abs() / top } else { (a - b).abs() / b.abs() })
        .fold(0.0, f64::max);
    if !(spectral_error <= SPECTRUM_TOL) {
        return Err(CradleError::Conditioning(format!(
            "surgered matrix misses the kept spectrum by {spectral_error:e} (mirror defect {mirror_defect:e})"
        )));
    }
    let weights = WeightTable { weights: last.weights.clone(), grid: last.grid.clone() };
    Ok(SurgeryResult { weights, jacobi, steps, mirror_defect })
}

/// Removes one extreme spectral point, `k = 0` or `k = N`.
///
/// Weights stay positive only at the ends, so interior indices are rejected.
pub fn surgery_remove_end(weights: &[f64], grid: &[f64], jac: &JacobiMatrix, k: usize) -> Result<SurgeryResult> {
    let n = jac.order();
    if k != 0 && k != n {
        return Err(CradleError::InteriorSurgery { k });
    }
    check_inputs(weights, grid, jac)?;
    let step = christoffel(weights, grid, &jac.diag, &jac.offsq, k)?;
    finish(jac.boundary, vec![step])
}

/// Removes the adjacent pair `(x_k, x_{k+1})` with two Christoffel steps,
/// giving weights `C (x_s − x_k)(x_s − x_{k+1}) w_s`.
pub fn surgery_remove_pair(weights: &[f64], grid: &[f64], jac: &JacobiMatrix, k: usize) -> Result<SurgeryResult> {
    let n = jac.order();
    if k + 1 > n {
        return Err(CradleError::Surgery(format!("pair ({k}, {}) is out of range for N = {n}", k + 1)));
    }
    if n < 2 {
        return Err(CradleError::Surgery("pair removal needs N ≥ 2".into()));
    }
    check_inputs(weights, grid, jac)?;
    // Removing x_{k+1} first keeps the intermediate index of x_k fixed; if a
    // polynomial vanishes on that path the other order is tried.
    let upper_first = christoffel(weights, grid, &jac.diag, &jac.offsq, k + 1)
        .and_then(|a| christoffel(&a.weights, &a.grid, &a.diag, &a.offsq, k).map(|b| vec![a, b]));
    let steps = match upper_first {
        Ok(steps) => steps,
        Err(first_err) => {
            let a = christoffel(weights, grid, &jac.diag, &jac.offsq, k).map_err(|_| first_err.clone())?;
            let b = christoffel(&a.weights, &a.grid, &a.diag, &a.offsq, k).map_err(|_| first_err)?;
            vec![a, b]
        }
    };
    finish(jac.boundary, steps)
}

fn check_inputs(weights: &[f64], grid: &[f64], jac: &JacobiMatrix) -> Result<()> {
    if weights.len() != jac.size() || grid.len() != jac.size() {
        return Err(CradleError::Surgery("weights, grid and matrix sizes differ".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(CradleError::Surgery("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Parses `"k,k+1;k',k'+1"` into pair start indices.
pub fn parse_surgery(spec: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let idx: Vec<usize> = part
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| CradleError::Surgery(format!("cannot parse surgery pair '{part}'")))?;
        match idx.as_slice() {
            [a, b] if *b == a + 1 => out.push(*a),
            [k] => return Err(CradleError::InteriorSurgery { k: *k }),
            _ => return Err(CradleError::Surgery(format!("'{part}' is not an adjacent pair k,k+1"))),
        }
    }
    Ok(out)
}

/// Removes entries `k` and `k+1` from an integer sequence.
pub fn remove_pair_from_sequence(kseq: &[i64], k: usize) -> Vec<i64> {
    kseq.iter()
        .enumerate()
        .filter(|(i, _)| *i != k && *i != k + 1)
        .map(|(_, v)| *v)
        .collect()
}

/// Chain realizing a surgered matrix.
pub fn synthesize_surgered(result: &SurgeryResult, m0: f64, omega: f64) -> Result<ChainSpec> {
    let jac = &result.jacobi;
    match jac.boundary {
        Boundary::FreeFree => {
            if jac.shift.abs() > 0.0 {
                return Err(CradleError::Surgery("free-free surgery must keep the zero mode".into()));
            }
            synthesize_free_free_ladder(jac, m0, omega)
        }
        Boundary::FixedFixed => {
            let eig = eigensystem_numeric(jac)?;
            let gamma = gamma_vector(&eig)?;
            chain_from_gamma(&gamma, jac, m0, omega)
        }
    }
}
