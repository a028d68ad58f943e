//! Inverse problem: masses and springs from a Jacobi eigensystem, and the
//! forward map from a chain back to its Jacobi matrix.
//!
//! Chain ↔ matrix convention: `b_i = (K_i + K_{i+1})/m_i` and
//! `u_i = K_i²/(m_{i−1} m_i)`, i.e. factors `A_i = −K_{i+1}/m_i` and
//! `C_i = −K_i/m_i` with `K_0 = K_{N+1} = 0` for free ends.

use serde::{Deserialize, Serialize};

use crate::error::{CradleError, Result};
use crate::jacobi::{EigenSystem, JacobiMatrix};
use crate::qkernel::weight_table;
use crate::spectrum::{eigenvalues, SpectralDesign};
use crate::Boundary;

/// Physical chain: masses `m_0..m_N` and springs.
///
/// `springs` holds `K_0..K_{N+1}` for fixed ends and `K_1..K_N` for free ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub boundary: Boundary,
    pub masses: Vec<f64>,
    pub springs: Vec<f64>,
    pub alpha: f64,
    pub omega: f64,
}

impl ChainSpec {
    pub fn new(boundary: Boundary, masses: Vec<f64>, springs: Vec<f64>, alpha: f64, omega: f64) -> Result<Self> {
        let chain = ChainSpec { boundary, masses, springs, alpha, omega };
        chain.validate()?;
        Ok(chain)
    }

    /// Checks lengths and strict positivity.
    pub fn validate(&self) -> Result<()> {
        if self.masses.is_empty() {
            return Err(CradleError::Synthesis("chain has no masses".into()));
        }
        let n = self.masses.len() - 1;
        let expected = match self.boundary {
            Boundary::FixedFixed => n + 2,
            Boundary::FreeFree => n,
        };
        if self.springs.len() != expected {
            return Err(CradleError::Synthesis(format!(
                "{} chain with {} masses needs {expected} springs, got {}",
                self.boundary,
                n + 1,
                self.springs.len()
            )));
        }
        if let Some((i, m)) = self.masses.iter().enumerate().find(|(_, m)| !(m.is_finite() && **m > 0.0)) {
            return Err(CradleError::Synthesis(format!("mass m_{i} = {m} is not positive")));
        }
        let offset = if self.boundary == Boundary::FreeFree { 1 } else { 0 };
        if let Some((i, k)) = self.springs.iter().enumerate().find(|(_, k)| !(k.is_finite() && **k > 0.0)) {
            return Err(CradleError::Synthesis(format!("spring K_{} = {k} is not positive", i + offset)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CradleError::AlphaOutOfRange(self.alpha));
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(CradleError::Synthesis(format!("omega = {} is not positive", self.omega)));
        }
        Ok(())
    }

    /// Order `N` (number of masses minus one).
    pub fn order(&self) -> usize {
        self.masses.len() - 1
    }

    /// `K_0..K_{N+1}` with zero end springs for free ends.
    pub fn full_springs(&self) -> Vec<f64> {
        match self.boundary {
            Boundary::FixedFixed => self.springs.clone(),
            Boundary::FreeFree => {
                let mut k = Vec::with_capacity(self.springs.len() + 2);
                k.push(0.0);
                k.extend_from_slice(&self.springs);
                k.push(0.0);
                k
            }
        }
    }

    /// Largest relative deviation from `m_{N−i} = m_i`, `K_{N+1−i} = K_i`.
    pub fn mirror_error(&self) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());
        let m = &self.masses;
        let k = &self.springs;
        let em = (0..m.len()).map(|i| rel(m[i], m[m.len() - 1 - i])).fold(0.0, f64::max);
        let ek = (0..k.len()).map(|i| rel(k[i], k[k.len() - 1 - i])).fold(0.0, f64::max);
        em.max(ek)
    }

    /// `√m_i`, converting weighted momenta `p_i` to physical `P_i = √m_i p_i`.
    pub fn sqrt_masses(&self) -> Vec<f64> {
        self.masses.iter().map(|m| m.sqrt()).collect()
    }
}

/// Intermediate quantities of a synthesis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisWorkspace {
    pub gamma_vec: Vec<f64>,
    pub yvec: Vec<f64>,
    pub scale: f64,
}

/// `Γ_i = Σ_s U_{2s,i} U_{2s,0} / x_{2s}`, the half-sum of the first and last
/// columns of `A⁻¹`.
pub fn gamma_vector(eig: &EigenSystem) -> Result<Vec<f64>> {
    if let Some(x) = eig.values.iter().find(|x| !(**x > 0.0)) {
        return Err(CradleError::Synthesis(format!(
            "eigenvalue {x} is not positive; zero modes need the free-free route"
        )));
    }
    let s = eig.size();
    let mut g = vec![0.0; s];
    for n in (0..s).step_by(2) {
        let row = &eig.vectors[n];
        let c = row[0] / eig.values[n];
        for (gi, ui) in g.iter_mut().zip(row) {
            *gi += c * ui;
        }
    }
    Ok(g)
}

/// `Γ_i = Σ_s (w_{2s}/x_{2s}) (−1)^i P_i(x_{2s}) / √(u_1⋯u_i)`.
///
/// Inherits the loss of accuracy of the forward recurrence; only meaningful
/// for small `N`.
pub fn gamma_vector_polynomial(jac: &JacobiMatrix, design: &SpectralDesign) -> Result<Vec<f64>> {
    let w = weight_table(&design.qparams()?, design.boundary)?;
    let x = eigenvalues(design);
    let ev = jac.evaluator();
    let norms = ev.norms();
    let s = jac.size();
    let mut g = vec![0.0; s];
    for n in (0..s).step_by(2) {
        if !(x[n] > 0.0) {
            return Err(CradleError::Synthesis("zero eigenvalue in fixed-fixed route".into()));
        }
        let p = ev.eval_all(x[n]);
        for i in 0..s {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            g[i] += w.weights[n] / x[n] * sign * p[i] / norms[i].sqrt();
        }
    }
    Ok(g)
}

/// `Γ = ½ J⁻¹ (e_0 + e_N)` by an `LDLᵀ` factorization that never subtracts.
///
/// Requires `shift + |C_0| > 0`, i.e. a positive definite matrix.
pub fn gamma_vector_direct(jac: &JacobiMatrix) -> Result<Vec<f64>> {
    let s = jac.size();
    let a: Vec<f64> = jac.factor_a.iter().map(|v| -v).collect();
    let c: Vec<f64> = jac.factor_c.iter().map(|v| -v).collect();
    // Schur complements: pivot_i = a_i + t_i with t_i ≥ shift.
    let mut t = vec![0.0; s];
    t[0] = jac.shift + c[0];
    for i in 1..s {
        t[i] = jac.shift + c[i] * t[i - 1] / (t[i - 1] + a[i - 1]);
    }
    if !(t[0] > 0.0) {
        return Err(CradleError::Synthesis("matrix is singular; use the free-free route".into()));
    }
    let piv: Vec<f64> = (0..s).map(|i| a[i] + t[i]).collect();
    let off: Vec<f64> = (0..s).map(|i| if i == 0 { 0.0 } else { (a[i - 1] * c[i]).sqrt() }).collect();
    let solve = |rhs: &[f64]| {
        let mut y = rhs.to_vec();
        for i in 1..s {
            y[i] += off[i] / piv[i - 1] * y[i - 1];
        }
        let mut z = vec![0.0; s];
        z[s - 1] = y[s - 1] / piv[s - 1];
        for i in (0..s - 1).rev() {
            z[i] = y[i] / piv[i] + off[i + 1] / piv[i] * z[i + 1];
        }
        z
    };
    let mut e0 = vec![0.0; s];
    e0[0] = 1.0;
    let mut en = vec![0.0; s];
    en[s - 1] = 1.0;
    let z0 = solve(&e0);
    let zn = solve(&en);
    Ok(z0.iter().zip(&zn).map(|(p, q)| 0.5 * (p + q)).collect())
}

/// Mirror-symmetric fixed-fixed chain from a `Γ` vector:
/// `m_i = m_0 (Γ_i/Γ_0)²`, `K_i = m_0 Γ_{i−1}Γ_i √u_i / Γ_0²`, `K_0 = K_{N+1} = m_0/(2Γ_0)`.
pub fn chain_from_gamma(gamma: &[f64], jac: &JacobiMatrix, m0: f64, omega: f64) -> Result<ChainSpec> {
    let s = gamma.len();
    let g0 = gamma[0];
    if !(g0 > 0.0) {
        return Err(CradleError::Synthesis(format!("Γ_0 = {g0} is not positive")));
    }
    let masses: Vec<f64> = gamma.iter().map(|g| m0 * (g / g0).powi(2)).collect();
    let mut springs = Vec::with_capacity(s + 1);
    springs.push(m0 / (2.0 * g0));
    for i in 1..s {
        springs.push(m0 * (gamma[i - 1] / g0) * (gamma[i] / g0) * jac.offsq[i].sqrt());
    }
    springs.push(m0 / (2.0 * g0));
    ChainSpec::new(Boundary::FixedFixed, masses, springs, 0.5, omega)
}

/// Fixed-fixed synthesis through the eigen-sum form of `Γ`.
pub fn synthesize_fixed_fixed(eig: &EigenSystem, jac: &JacobiMatrix, m0: f64, omega: f64) -> Result<ChainSpec> {
    if jac.boundary != Boundary::FixedFixed {
        return Err(CradleError::Synthesis("fixed-fixed synthesis needs a fixed-fixed matrix".into()));
    }
    let gamma = gamma_vector(eig)?;
    chain_from_gamma(&gamma, jac, m0, omega)
}

/// Ladder `y_0 = b_0`, `y_i = b_i − u_i / y_{i−1}`; equals `−A_i` on q-Racah designs.
pub fn y_ladder(jac: &JacobiMatrix) -> Vec<f64> {
    let mut y = Vec::with_capacity(jac.size());
    y.push(jac.diag[0]);
    for i in 1..jac.size() {
        let prev = y[i - 1];
        y.push(jac.diag[i] - jac.offsq[i] / prev);
    }
    y
}

/// Free-free chain from the factors: `K_{i+1} = −A_i m_i`, `m_{i+1} = K_{i+1}/(−C_{i+1})`.
pub fn synthesize_free_free_ladder(jac: &JacobiMatrix, m0: f64, omega: f64) -> Result<ChainSpec> {
    if jac.shift != 0.0 || jac.factor_c[0] != 0.0 || *jac.factor_a.last().unwrap() != 0.0 {
        return Err(CradleError::Synthesis(
            "free-free ladder needs zero shift and vanishing end factors".into(),
        ));
    }
    let s = jac.size();
    let mut masses = Vec::with_capacity(s);
    let mut springs = Vec::with_capacity(s - 1);
    masses.push(m0);
    for i in 0..s - 1 {
        let k = -jac.factor_a[i] * masses[i];
        springs.push(k);
        masses.push(k / -jac.factor_c[i + 1]);
    }
    ChainSpec::new(Boundary::FreeFree, masses, springs, 0.5, omega)
}

/// Free-free chain from the closed-form products.
///
/// The q-Pochhammer quotients overflow when written out, so the mass ratio
/// is accumulated one factor pair at a time.
pub fn synthesize_free_free(design: &SpectralDesign, m0: f64) -> Result<ChainSpec> {
    if design.boundary != Boundary::FreeFree {
        return Err(CradleError::Synthesis("closed-form free-free synthesis needs a free-free design".into()));
    }
    let q = design.q;
    let n = design.n as i32;
    let pref = design.prefactor();
    let mut masses = Vec::with_capacity(design.n + 1);
    let mut run = 1.0;
    let edge0 = 1.0 + q.powi(-n);
    for i in 0..=n {
        masses.push(m0 * run * (1.0 + q.powi(2 * i - n)) / edge0);
        if i < n {
            let k = i;
            run *= (1.0 - q.powi(1 + 2 * k)) * (1.0 - q.powi(-2 * n + 2 * k))
                / ((1.0 - q.powi(2 + 2 * k)) * (1.0 - q.powi(-2 * n + 1 + 2 * k)));
        }
    }
    let springs = (1..=n)
        .map(|i| {
            pref * (1.0 - q.powi(2 * i)) * (q.powi(2 * i - 2 * n - 1) - 1.0)
                / ((1.0 + q.powi(2 * i - n - 1)) * (1.0 + q.powi(2 * i - n)))
                * masses[i as usize]
        })
        .collect();
    ChainSpec::new(Boundary::FreeFree, masses, springs, 0.5, design.omega)
}

/// Jacobi matrix of a chain in mass-weighted coordinates.
pub fn chain_to_jacobi(chain: &ChainSpec) -> Result<JacobiMatrix> {
    chain.validate()?;
    let k = chain.full_springs();
    let m = &chain.masses;
    let a = (0..m.len()).map(|i| -k[i + 1] / m[i]).collect();
    let c = (0..m.len()).map(|i| -k[i] / m[i]).collect();
    JacobiMatrix::from_factors(chain.boundary, 0.0, a, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jacobi::{build_jacobi, eigensystem_design, eigensystem_numeric};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs())
    }

    fn fixed_grid() -> Vec<SpectralDesign> {
        let mut out = Vec::new();
        for (k0, k1) in [(1, 2), (2, 3), (1, 4), (3, 4)] {
            for r in 2..=3 {
                for n in 1..=12 {
                    out.push(SpectralDesign::fixed_fixed(r, k0, k1, n).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn gamma_routes_agree() {
        for d in fixed_grid() {
            let j = build_jacobi(&d).unwrap();
            let e = eigensystem_design(&j, &d).unwrap();
            let g = gamma_vector(&e).unwrap();
            let direct = gamma_vector_direct(&j).unwrap();
            for i in 0..=d.n {
                assert!(rel(g[i], direct[i]) < 1e-10, "{:?} i={i} {}", (d.r, d.k0, d.k1, d.n), rel(g[i], direct[i]));
                assert!(rel(g[i], g[d.n - i]) < 1e-10);
            }
            if d.n <= 4 {
                let poly = gamma_vector_polynomial(&j, &d).unwrap();
                for i in 0..=d.n {
                    assert!(rel(g[i], poly[i]) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn single_mode_gamma() {
        let e = EigenSystem { values: vec![2.5], vectors: vec![vec![1.0]] };
        assert_eq!(gamma_vector(&e).unwrap(), vec![0.4]);
        let zero = EigenSystem { values: vec![0.0, 1.0], vectors: vec![vec![1.0, 0.0], vec![0.0, 1.0]] };
        assert!(gamma_vector(&zero).is_err());
    }

    #[test]
    fn fixed_fixed_round_trip() {
        for d in fixed_grid() {
            let j = build_jacobi(&d).unwrap();
            let e = eigensystem_design(&j, &d).unwrap();
            let chain = synthesize_fixed_fixed(&e, &j, 1.0, d.omega).unwrap();
            assert!(chain.mirror_error() < 1e-9);
            let back = chain_to_jacobi(&chain).unwrap();
            for i in 0..=d.n {
                assert!(rel(back.diag[i], j.diag[i]) < 1e-9);
            }
            for i in 1..=d.n {
                assert!(rel(back.offsq[i], j.offsq[i]) < 1e-9);
            }
            let spec = eigensystem_numeric(&back).unwrap();
            for (x, k) in spec.values.iter().zip(&d.kseq) {
                let exact = (*k as f64).powi(2);
                assert!(rel(*x, exact) < 1e-8);
            }
        }
    }

    #[test]
    fn free_free_routes_agree() {
        for r in 2..=5 {
            for n in 1..=12 {
                let d = SpectralDesign::free_free(r, n).unwrap();
                let j = build_jacobi(&d).unwrap();
                let closed = synthesize_free_free(&d, 1.0).unwrap();
                let ladder = synthesize_free_free_ladder(&j, 1.0, 1.0).unwrap();
                for (a, b) in closed.masses.iter().zip(&ladder.masses) {
                    assert!(rel(*a, *b) < 1e-9);
                }
                for (a, b) in closed.springs.iter().zip(&ladder.springs) {
                    assert!(rel(*a, *b) < 1e-9);
                }
                assert!(closed.mirror_error() < 1e-9);
                for i in 0..=n {
                    assert!(-j.factor_a[i] >= 0.0);
                }
            }
        }
    }

    #[test]
    fn y_ladder_traces_factors() {
        // The recurrence subtracts nearly equal terms near i = N; past these
        // sizes its f64 evaluation drifts above 1e-11 (not the identity).
        for (r, nmax) in [(2, 10), (3, 8), (4, 7), (5, 6)] {
            for n in 1..=nmax {
                let d = SpectralDesign::free_free(r, n).unwrap();
                let j = build_jacobi(&d).unwrap();
                let y = y_ladder(&j);
                for (i, yi) in y.iter().enumerate() {
                    assert!((yi + j.factor_a[i]).abs() <= 1e-11 * j.diag[i], "r={r} n={n} i={i}");
                }
            }
        }
    }

    #[test]
    fn two_mass_anchor() {
        let d = SpectralDesign::free_free(2, 1).unwrap();
        let c = synthesize_free_free(&d, 1.0).unwrap();
        assert!((c.masses[1] - 1.0).abs() < 1e-15);
        assert!((c.springs[0] - 0.5).abs() < 1e-15);
        // Two equal masses: ω_1 = √(2K/m).
        assert!(((2.0 * c.springs[0] / c.masses[0]).sqrt() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_mass_forward_map() {
        let c = ChainSpec::new(Boundary::FreeFree, vec![2.0, 3.0], vec![1.5], 0.5, 1.0).unwrap();
        let j = chain_to_jacobi(&c).unwrap();
        assert_eq!(j.diag, vec![0.75, 0.5]);
        assert!((j.offsq[1] - 1.5 * 1.5 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn free_free_kernel_vector() {
        let d = SpectralDesign::free_free(3, 5).unwrap();
        let c = synthesize_free_free(&d, 1.0).unwrap();
        let j = chain_to_jacobi(&c).unwrap();
        let v = c.sqrt_masses();
        let jv = j.apply(&v);
        let scale = j.diag.iter().cloned().fold(0.0, f64::max) * v.iter().cloned().fold(0.0, f64::max);
        assert!(jv.iter().all(|x| x.abs() < 1e-12 * scale));
    }

    #[test]
    fn invalid_chains_rejected() {
        assert!(ChainSpec::new(Boundary::FreeFree, vec![1.0, 1.0], vec![1.0, 1.0], 0.5, 1.0).is_err());
        assert!(ChainSpec::new(Boundary::FixedFixed, vec![1.0, -1.0], vec![1.0; 3], 0.5, 1.0).is_err());
        assert!(ChainSpec::new(Boundary::FixedFixed, vec![1.0, 1.0], vec![1.0; 3], 1.0, 1.0).is_err());
    }
}
