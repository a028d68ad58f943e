//! Persymmetric Jacobi matrix of a design and its eigensystem.
//!
//! The matrix is kept in factored form `J = shift + GᵀG` (see [`crate::bidiag`]):
//! `b_n = shift − (A_n + C_n)` and `u_n = A_{n−1} C_n` are derived from the
//! factors. All operators and eigenvectors use the physical sign gauge, i.e.
//! off-diagonal entries `−√u_n`.

use serde::{Deserialize, Serialize};

use crate::bidiag::factored_eigen;
use crate::error::{CradleError, Result};
use crate::qkernel::{racah_factor_arrays, weight_table, PolynomialEvaluator};
use crate::spectrum::{eigenvalues, SpectralDesign};
use crate::Boundary;

/// Tridiagonal operator with its factor arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobiMatrix {
    pub boundary: Boundary,
    pub shift: f64,
    pub factor_a: Vec<f64>,
    pub factor_c: Vec<f64>,
    pub diag: Vec<f64>,
    /// `offsq[n] = u_n` for `n ≥ 1`; `offsq[0] = 0`.
    pub offsq: Vec<f64>,
}

impl JacobiMatrix {
    /// Builds the matrix from non-positive factors and checks `u_n > 0`.
    pub fn from_factors(boundary: Boundary, shift: f64, a: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if a.len() != c.len() || a.is_empty() {
            return Err(CradleError::InvalidDesign("factor arrays must have equal, nonzero length".into()));
        }
        if let Some(v) = a.iter().chain(&c).find(|v| !(v.is_finite() && **v <= 0.0)) {
            return Err(CradleError::Positivity(format!("factor {v} is not a finite non-positive number")));
        }
        let size = a.len();
        let diag: Vec<f64> = (0..size).map(|n| shift - (a[n] + c[n])).collect();
        let mut offsq = vec![0.0; size];
        for n in 1..size {
            offsq[n] = a[n - 1] * c[n];
            if !(offsq[n] > 0.0) {
                return Err(CradleError::Positivity(format!("u_{n} = {} is not positive", offsq[n])));
            }
        }
        Ok(JacobiMatrix { boundary, shift, factor_a: a, factor_c: c, diag, offsq })
    }

    /// Number of sites `N + 1`.
    pub fn size(&self) -> usize {
        self.diag.len()
    }

    /// Order `N`.
    pub fn order(&self) -> usize {
        self.diag.len() - 1
    }

    pub fn evaluator(&self) -> PolynomialEvaluator {
        PolynomialEvaluator::new(self.diag.clone(), self.offsq.clone())
    }

    /// Dense matrix with off-diagonals `−√u_n`.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let s = self.size();
        let mut m = vec![vec![0.0; s]; s];
        for i in 0..s {
            m[i][i] = self.diag[i];
            if i > 0 {
                let off = -self.offsq[i].sqrt();
                m[i][i - 1] = off;
                m[i - 1][i] = off;
            }
        }
        m
    }

    /// Largest relative mismatch of `b_{N−n}` vs `b_n` and `u_{N+1−n}` vs `u_n`.
    pub fn persymmetry_error(&self) -> f64 {
        let n = self.order();
        let mut err: f64 = 0.0;
        for i in 0..=n {
            err = err.max(rel(self.diag[i], self.diag[n - i]));
        }
        for i in 1..=n {
            err = err.max(rel(self.offsq[i], self.offsq[n + 1 - i]));
        }
        err
    }

    /// Applies the operator to `v` using the factored form.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let gv = self.apply_g(v);
        let mut out = self.apply_gt(&gv);
        for (o, x) in out.iter_mut().zip(v) {
            *o += self.shift * x;
        }
        out
    }

    /// `G v`, length `N + 2`.
    pub fn apply_g(&self, v: &[f64]) -> Vec<f64> {
        let s = self.size();
        let mut out = vec![0.0; s + 1];
        for i in 0..s {
            out[i] += (-self.factor_c[i]).sqrt() * v[i];
            out[i + 1] -= (-self.factor_a[i]).sqrt() * v[i];
        }
        out
    }

    fn apply_gt(&self, w: &[f64]) -> Vec<f64> {
        (0..self.size())
            .map(|i| (-self.factor_c[i]).sqrt() * w[i] - (-self.factor_a[i]).sqrt() * w[i + 1])
            .collect()
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Jacobi matrix of a design: kernel factors scaled by the design prefactor.
pub fn build_jacobi(design: &SpectralDesign) -> Result<JacobiMatrix> {
    let p = design.qparams()?;
    let (a, c) = racah_factor_arrays(&p)?;
    let pref = design.prefactor();
    let a: Vec<f64> = a.into_iter().map(|v| pref * v).collect();
    let c: Vec<f64> = c.into_iter().map(|v| pref * v).collect();
    let shift = match design.boundary {
        Boundary::FixedFixed => design.x0(),
        Boundary::FreeFree => 0.0,
    };
    JacobiMatrix::from_factors(design.boundary, shift, a, c)
}

/// Ascending eigenvalues and orthonormal eigenvector rows `U[n][i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl EigenSystem {
    pub fn size(&self) -> usize {
        self.values.len()
    }

    /// `max |Σ_i U_{ni} U_{mi} − δ_{nm}|`.
    pub fn orthonormality_error(&self) -> f64 {
        let s = self.size();
        let mut err: f64 = 0.0;
        for n in 0..s {
            for m in n..s {
                let dot: f64 = self.vectors[n].iter().zip(&self.vectors[m]).map(|(a, b)| a * b).sum();
                let target = if n == m { 1.0 } else { 0.0 };
                err = err.max((dot - target).abs());
            }
        }
        err
    }

    /// `max |U_{n,N−i} − (−1)^n U_{ni}|`.
    pub fn mirror_error(&self) -> f64 {
        let s = self.size();
        let mut err: f64 = 0.0;
        for (n, row) in self.vectors.iter().enumerate() {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            for i in 0..s {
                err = err.max((row[s - 1 - i] - sign * row[i]).abs());
            }
        }
        err
    }

    /// Deviation from `Σ_{n even} U_{ni}U_{nk} = (δ_{ik} + δ_{i,N−k})/2` and its odd analog.
    pub fn parity_sum_error(&self) -> f64 {
        let s = self.size();
        let mut err: f64 = 0.0;
        for i in 0..s {
            for k in 0..s {
                let mut even = 0.0;
                let mut odd = 0.0;
                for (n, row) in self.vectors.iter().enumerate() {
                    if n % 2 == 0 {
                        even += row[i] * row[k];
                    } else {
                        odd += row[i] * row[k];
                    }
                }
                let d = if i == k { 1.0 } else { 0.0 };
                let m = if i == s - 1 - k { 1.0 } else { 0.0 };
                err = err.max((even - 0.5 * (d + m)).abs());
                err = err.max((odd - 0.5 * (d - m)).abs());
            }
        }
        err
    }

    /// `max |(U J Uᵀ)_{nm} − x_n δ_{nm}| / max(x_n, x_m)`, evaluated through the factors.
    ///
    /// A zero eigenvalue is measured against the largest one instead.
    pub fn reconstruction_error(&self, jac: &JacobiMatrix) -> f64 {
        let gu: Vec<Vec<f64>> = self.vectors.iter().map(|v| jac.apply_g(v)).collect();
        let top = self.values.iter().cloned().fold(0.0, f64::max);
        let s = self.size();
        let mut err: f64 = 0.0;
        for n in 0..s {
            for m in n..s {
                let dot: f64 = self.vectors[n].iter().zip(&self.vectors[m]).map(|(a, b)| a * b).sum();
                let gg: f64 = gu[n].iter().zip(&gu[m]).map(|(a, b)| a * b).sum();
                let entry = jac.shift * dot + gg;
                let target = if n == m { self.values[n] } else { 0.0 };
                let mut scale = self.values[n].max(self.values[m]);
                if scale <= 0.0 {
                    scale = top;
                }
                err = err.max((entry - target).abs() / scale);
            }
        }
        err
    }

    /// `U_{n0}²`, which equals the orthogonality weights.
    pub fn first_column_squared(&self) -> Vec<f64> {
        self.vectors.iter().map(|r| r[0] * r[0]).collect()
    }

    /// Angular frequencies `ω_n = √x_n`, clamped at zero.
    pub fn frequencies(&self) -> Vec<f64> {
        self.values.iter().map(|x| x.max(0.0).sqrt()).collect()
    }
}

/// Numeric eigensystem from the factored form (works for any chain matrix).
pub fn eigensystem_numeric(jac: &JacobiMatrix) -> Result<EigenSystem> {
    let f = factored_eigen(jac.shift, &jac.factor_a, &jac.factor_c)?;
    Ok(EigenSystem { values: f.values, vectors: f.vectors })
}

/// Eigensystem of a design: eigenvalues `(ω k_n)²` straight from the
/// eigenintegers, eigenvectors from the factored solver with `U_{n0} > 0`.
/// This is the production route.
pub fn eigensystem_design(jac: &JacobiMatrix, design: &SpectralDesign) -> Result<EigenSystem> {
    let numeric = eigensystem_numeric(jac)?;
    let values: Vec<f64> = design.kseq.iter().map(|k| (design.omega * *k as f64).powi(2)).collect();
    if values.len() != numeric.values.len() {
        return Err(CradleError::InvalidDesign("design and matrix sizes differ".into()));
    }
    Ok(EigenSystem { values, vectors: numeric.vectors })
}

/// Eigenvectors from the orthogonal polynomials,
/// `U_{ni} = (−1)^i √w_n P_i(x_n) / √(u_1⋯u_i)`.
///
/// The forward recurrence cancels catastrophically once the factor
/// magnitudes spread too far, so the result is checked for
/// orthonormality and rejected above `1e-8`.
pub fn eigensystem_analytic(jac: &JacobiMatrix, design: &SpectralDesign) -> Result<EigenSystem> {
    let weights = weight_table(&design.qparams()?, design.boundary)?;
    let values = eigenvalues(design);
    let ev = jac.evaluator();
    let norms = ev.norms();
    let vectors: Vec<Vec<f64>> = values
        .iter()
        .zip(&weights.weights)
        .map(|(x, w)| {
            let p = ev.eval_all(*x);
            let sw = w.sqrt();
            p.iter()
                .zip(&norms)
                .enumerate()
                .map(|(i, (pi, nrm))| {
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    sign * sw * pi / nrm.sqrt()
                })
                .collect()
        })
        .collect();
    let eig = EigenSystem { values, vectors };
    let err = eig.orthonormality_error();
    if !(err <= 1e-8) {
        return Err(CradleError::Conditioning(format!(
            "polynomial eigenvectors lost orthonormality ({err:.1e}) at N = {}",
            design.n
        )));
    }
    Ok(eig)
}
