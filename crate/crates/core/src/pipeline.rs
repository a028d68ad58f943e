//! End-to-end construction and verification of chains.
//!
//! `realize` turns design integers into a chain, applying surgery and
//! then deformation when requested. `verify_chain` re-derives everything
//! that can be checked from a chain and its declared eigenintegers.

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    evolve, evolve_fraction, revival_schedule, verlet_oracle, verlet_step_bound, Fraction, InitialState,
    IntegerSpectrum, RevivalSource, TrajectoryState,
};
use crate::error::{CradleError, Result};
use crate::jacobi::{build_jacobi, eigensystem_design, eigensystem_numeric, EigenSystem, JacobiMatrix};
use crate::spectrum::{validate_pst_spectrum, SpectralDesign, DEFAULT_MAX_N};
use crate::synthesis::{
    chain_to_jacobi, synthesize_fixed_fixed, synthesize_free_free, synthesize_free_free_ladder, ChainSpec,
};
use crate::transforms::{
    deform_chain, deform_eigensystem, remove_pair_from_sequence, surgery_remove_pair,
};
use crate::{par, Boundary};

/// Everything needed to build one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRequest {
    pub n: usize,
    pub r: i64,
    pub k0: i64,
    pub k1: i64,
    pub boundary: Boundary,
    pub omega: f64,
    pub m0: f64,
    pub pbar: f64,
    pub alpha: Option<f64>,
    /// Start indices `k` of adjacent pairs `(k, k+1)`, applied in order.
    pub surgery: Vec<usize>,
    pub max_n: usize,
}

impl DesignRequest {
    pub fn new(boundary: Boundary, r: i64, k0: i64, k1: i64, n: usize) -> Self {
        DesignRequest {
            n,
            r,
            k0,
            k1,
            boundary,
            omega: 1.0,
            m0: 1.0,
            pbar: 1.0,
            alpha: None,
            surgery: Vec::new(),
            max_n: DEFAULT_MAX_N,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(0.5)
    }
}

/// A built chain together with its spectral data.
#[derive(Debug, Clone)]
pub struct Realization {
    pub design: SpectralDesign,
    pub kseq: Vec<i64>,
    pub chain: ChainSpec,
    /// Mass-weighted operator of `chain`.
    pub jacobi: JacobiMatrix,
    pub eigen: EigenSystem,
    pub alpha: f64,
    pub pbar: f64,
    /// Largest raw mirror defect over the surgery steps.
    pub surgery_defect: Option<f64>,
}

impl Realization {
    pub fn spectrum(&self) -> IntegerSpectrum {
        IntegerSpectrum { omega: self.design.omega, kseq: self.kseq.clone() }
    }

    pub fn revival_source(&self, surgered: bool) -> RevivalSource {
        source_for(&self.design, &self.kseq, surgered)
    }

    pub fn tstar(&self) -> f64 {
        self.design.tstar()
    }
}

fn source_for(design: &SpectralDesign, kseq: &[i64], surgered: bool) -> RevivalSource {
    if surgered {
        RevivalSource::Sequence { kseq: kseq.to_vec() }
    } else {
        RevivalSource::Design { k0: design.k0, k1: design.k1, r: design.r, boundary: design.boundary }
    }
}

/// Design → (surgery) → chain → (deformation).
pub fn realize(req: &DesignRequest) -> Result<Realization> {
    for (name, v) in [("m0", req.m0), ("pbar", req.pbar)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(CradleError::InvalidDesign(format!("{name} must be positive, got {v}")));
        }
    }
    let alpha = req.alpha();
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CradleError::AlphaOutOfRange(alpha));
    }
    let design = SpectralDesign::with_cap(req.boundary, req.r, req.k0, req.k1, req.n, req.omega, req.max_n)?;
    let mut jac = build_jacobi(&design)?;
    let mut eig = eigensystem_design(&jac, &design)?;
    let mut kseq = design.kseq.clone();
    let mut defect: Option<f64> = None;
    let mut weights = eig.first_column_squared();
    for &k in &req.surgery {
        let res = surgery_remove_pair(&weights, &eig.values, &jac, k)?;
        defect = Some(defect.unwrap_or(0.0).max(res.mirror_defect));
        kseq = remove_pair_from_sequence(&kseq, k);
        jac = res.jacobi;
        weights = res.weights.weights;
        let numeric = eigensystem_numeric(&jac)?;
        let values = kseq.iter().map(|k| (design.omega * *k as f64).powi(2)).collect();
        eig = EigenSystem { values, vectors: numeric.vectors };
    }
    let mut chain = if !req.surgery.is_empty() {
        match design.boundary {
            Boundary::FreeFree => synthesize_free_free_ladder(&jac, req.m0, design.omega)?,
            Boundary::FixedFixed => synthesize_fixed_fixed(&eig, &jac, req.m0, design.omega)?,
        }
    } else {
        match design.boundary {
            Boundary::FreeFree => synthesize_free_free(&design, req.m0)?,
            Boundary::FixedFixed => synthesize_fixed_fixed(&eig, &jac, req.m0, design.omega)?,
        }
    };
    if alpha != 0.5 {
        chain = deform_chain(&chain, alpha)?;
        eig = deform_eigensystem(&eig, alpha)?;
    }
    let jacobi = chain_to_jacobi(&chain)?;
    Ok(Realization { design, kseq, chain, jacobi, eigen: eig, alpha, pbar: req.pbar, surgery_defect: defect })
}

/// Builds many requests concurrently.
pub fn realize_all(reqs: &[DesignRequest]) -> Vec<Result<Realization>> {
    par::map(reqs, realize)
}

/// Sequential counterpart of [`realize_all`].
pub fn realize_all_seq(reqs: &[DesignRequest]) -> Vec<Result<Realization>> {
    par::map_seq(reqs, realize)
}

// ---------------------------------------------------------------------------
// Verification

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

/// All checks run on a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Tolerances used by [`verify_chain`].
pub const SPECTRUM_TOL: f64 = 1e-8;
pub const MOMENTUM_TOL: f64 = 1e-8;
pub const MIRROR_TOL: f64 = 1e-9;
pub const ENERGY_TOL: f64 = 1e-10;
pub const ORACLE_TOL: f64 = 1e-5;
/// The Verlet cross-check is skipped above this top eigeninteger.
pub const ORACLE_MAX_K: i64 = 200;

/// What a chain claims to be.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainClaim {
    pub kseq: Vec<i64>,
    pub source: RevivalSource,
    pub pbar: f64,
}

fn check(name: &str, value: f64, tolerance: f64, detail: String) -> Check {
    Check { name: name.into(), passed: value.is_finite() && value <= tolerance, value, tolerance, detail }
}

/// Re-derives spectrum, transfer, revivals, energy and the Verlet oracle
/// for a chain and the eigenintegers it claims.
pub fn verify_chain(chain: &ChainSpec, claim: &ChainClaim) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    chain.validate()?;
    let alpha = chain.alpha;
    let undeformed = (alpha - 0.5).abs() <= 1e-15;
    if claim.kseq.len() != chain.masses.len() {
        return Err(CradleError::InvalidDesign(format!(
            "{} eigenintegers declared for {} masses",
            claim.kseq.len(),
            chain.masses.len()
        )));
    }
    let pst = validate_pst_spectrum(&claim.kseq);
    checks.push(check(
        "integer_spectrum",
        if pst.passed() { 0.0 } else { 1.0 },
        0.0,
        if pst.passed() { "alternating parity, coprime".into() } else { format!("{:?}", pst.violations) },
    ));

    if undeformed {
        let m = chain.mirror_error();
        checks.push(check("mirror_symmetry", m, MIRROR_TOL, format!("max relative mirror mismatch {m:.3e}")));
    }

    let jac = chain_to_jacobi(chain)?;
    let numeric = eigensystem_numeric(&jac)?;
    let omega = chain.omega;
    let target: Vec<f64> = claim.kseq.iter().map(|k| (omega * *k as f64).powi(2)).collect();
    let top = target.last().copied().unwrap_or(1.0);
    let spec_err = numeric
        .values
        .iter()
        .zip(&target)
        .map(|(x, t)| if *t == 0.0 { x.abs() / top } else { (x - t).abs() / t })
        .fold(0.0, f64::max);
    let spectrum_ok = spec_err <= SPECTRUM_TOL;
    checks.push(check("spectrum", spec_err, SPECTRUM_TOL, format!("max relative deviation from (omega k_n)^2: {spec_err:.3e}")));

    // With a confirmed integer spectrum the phases are exact; otherwise the
    // chain's own numeric frequencies are used.
    let ispec = IntegerSpectrum { omega, kseq: claim.kseq.clone() };
    let spec_opt = if spectrum_ok { Some(&ispec) } else { None };
    let eig = if spectrum_ok {
        EigenSystem { values: target.clone(), vectors: numeric.vectors.clone() }
    } else {
        numeric.clone()
    };
    let n = chain.order();
    let init = InitialState::kick(n + 1, claim.pbar);
    let tstar = std::f64::consts::PI / omega;
    let at = |num: u64, den: u64| -> TrajectoryState {
        match spec_opt {
            Some(s) => evolve_fraction(&eig, s, &init, Fraction { num, den }),
            None => evolve(&eig, &init, tstar * num as f64 / den as f64),
        }
    };

    let st = at(1, 1);
    let p0 = st.p[0] / claim.pbar;
    let pn = st.p[n] / claim.pbar;
    let interior = st.p[1..n].iter().map(|v| v.abs()).fold(0.0, f64::max) / claim.pbar;
    let want0 = (1.0 - 2.0 * alpha).abs();
    let wantn = 2.0 * (alpha * (1.0 - alpha)).sqrt();
    let end_err = (p0.abs() - want0).abs().max((pn.abs() - wantn).abs()).max(interior);
    let name = if undeformed { "perfect_transfer" } else { "end_split" };
    checks.push(check(
        name,
        end_err,
        MOMENTUM_TOL,
        format!("t*: p_0/pbar = {p0:.12}, p_N/pbar = {pn:.12}, max interior {interior:.3e}"),
    ));
    if !undeformed {
        notes.push(format!("no PST (alpha = {alpha} != 1/2); end split (|1-2a|, 2sqrt(a(1-a))) = ({want0:.6}, {wantn:.6})"));
    }

    let schedule = revival_schedule(&claim.source, alpha, tstar)?;
    if schedule.entries.is_empty() {
        notes.push("no fractional revival orders for this spectrum".into());
    }
    let mut rev_err: f64 = 0.0;
    let mut events = 0usize;
    for entry in &schedule.entries {
        for ev in &entry.events {
            let st = at(ev.l, entry.z);
            let e0 = (st.p[0] / claim.pbar - ev.p0).abs();
            let en = (st.p[n] / claim.pbar - ev.pn).abs();
            let inner = st.p[1..n].iter().map(|v| v.abs()).fold(0.0, f64::max) / claim.pbar;
            rev_err = rev_err.max(e0).max(en).max(inner);
            events += 1;
        }
    }
    checks.push(check(
        "fractional_revival",
        rev_err,
        MOMENTUM_TOL,
        format!("{} orders, {events} events, max deviation {rev_err:.3e}", schedule.entries.len()),
    ));

    let e0 = at(0, 1).energy(&jac);
    let energy_drift = [(1u64, 7u64), (3, 7), (1, 1)]
        .iter()
        .map(|(a, b)| (at(*a, *b).energy(&jac) - e0).abs() / e0)
        .fold(0.0, f64::max);
    checks.push(check("energy", energy_drift, ENERGY_TOL, format!("relative drift {energy_drift:.3e}")));

    let kmax = claim.kseq.iter().map(|k| k.abs()).max().unwrap_or(0);
    if kmax <= ORACLE_MAX_K {
        let bound = verlet_step_bound(chain)?;
        let dt = bound / 400.0;
        let times: Vec<f64> = (1..=4).map(|i| tstar * i as f64 / 4.0).collect();
        let phys = verlet_oracle(chain, claim.pbar, dt, &times)?;
        let mut err: f64 = 0.0;
        for ps in &phys {
            let w = ps.weighted(chain);
            let exact = evolve(&numeric, &init, ps.t);
            let scale = exact.p.iter().chain(&exact.q).map(|v| v.abs()).fold(0.0, f64::max);
            let d = w.p.iter().zip(&exact.p).chain(w.q.iter().zip(&exact.q)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            err = err.max(d / scale);
        }
        checks.push(check("verlet_oracle", err, ORACLE_TOL, format!("max relative deviation over 4 times, dt = {dt:.3e}")));
    } else {
        notes.push(format!("Verlet cross-check skipped: top eigeninteger {kmax} > {ORACLE_MAX_K}"));
    }
    Ok(VerifyReport { checks, notes })
}

/// Verification of a freshly built realization.
pub fn verify_realization(real: &Realization, surgered: bool) -> Result<VerifyReport> {
    let claim = ChainClaim { kseq: real.kseq.clone(), source: real.revival_source(surgered), pbar: real.pbar };
    verify_chain(&real.chain, &claim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_designs_verify() {
        for req in [
            DesignRequest::new(Boundary::FreeFree, 2, 0, 1, 4),
            DesignRequest::new(Boundary::FixedFixed, 2, 1, 2, 5),
            DesignRequest::new(Boundary::FixedFixed, 3, 2, 3, 8),
        ] {
            let real = realize(&req).unwrap();
            let rep = verify_realization(&real, false).unwrap();
            assert!(rep.passed(), "{rep:#?}");
        }
    }

    #[test]
    fn deformed_design_verifies_without_pst() {
        let mut req = DesignRequest::new(Boundary::FixedFixed, 2, 1, 2, 3);
        req.alpha = Some(0.3);
        let real = realize(&req).unwrap();
        let rep = verify_realization(&real, false).unwrap();
        assert!(rep.passed(), "{rep:#?}");
        assert!(rep.get("perfect_transfer").is_none());
        assert!(rep.notes.iter().any(|n| n.contains("no PST")));
    }

    #[test]
    fn surgered_design_verifies() {
        let mut req = DesignRequest::new(Boundary::FreeFree, 2, 0, 1, 6);
        req.surgery = vec![5];
        let real = realize(&req).unwrap();
        assert_eq!(real.chain.masses.len(), 5);
        let rep = verify_realization(&real, true).unwrap();
        assert!(rep.passed(), "{rep:#?}");
    }

    #[test]
    fn perturbed_chain_fails() {
        let real = realize(&DesignRequest::new(Boundary::FixedFixed, 2, 1, 2, 4)).unwrap();
        let mut chain = real.chain.clone();
        chain.masses[1] *= 1.01;
        let claim = ChainClaim { kseq: real.kseq.clone(), source: real.revival_source(false), pbar: 1.0 };
        let rep = verify_chain(&chain, &claim).unwrap();
        assert!(!rep.passed());
        assert!(!rep.get("spectrum").unwrap().passed);
        assert!(!rep.get("perfect_transfer").unwrap().passed);
    }

    #[test]
    fn sweep_matches_sequential() {
        let reqs: Vec<DesignRequest> = (2..8).map(|n| DesignRequest::new(Boundary::FreeFree, 3, 0, 1, n)).collect();
        let a = realize_all(&reqs);
        let b = realize_all_seq(&reqs);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.as_ref().unwrap().chain, y.as_ref().unwrap().chain);
        }
    }
}
