//! Normal-mode evolution, transfer fidelity, fractional-revival schedules
//! and a velocity-Verlet oracle in physical coordinates.
//!
//! State vectors are mass-weighted: `q_i = √m_i x_i`, `p_i = P_i / √m_i`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{CradleError, Result};
use crate::jacobi::{eigensystem_numeric, EigenSystem, JacobiMatrix};
use crate::synthesis::{chain_to_jacobi, ChainSpec};
use crate::{par, Boundary};

/// Kick amplitude and transfer time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub pbar: f64,
    pub tstar: f64,
    pub times: Vec<f64>,
}

impl SimulationConfig {
    pub fn new(pbar: f64, omega: f64) -> Result<Self> {
        if !(pbar.is_finite() && pbar > 0.0) {
            return Err(CradleError::InvalidDesign(format!("pbar must be positive, got {pbar}")));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(CradleError::InvalidDesign(format!("omega must be positive, got {omega}")));
        }
        Ok(SimulationConfig { pbar, tstar: PI / omega, times: Vec::new() })
    }
}

/// Mass-weighted positions and momenta at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState {
    pub t: f64,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl TrajectoryState {
    /// `½ pᵀp + ½ qᵀJq`.
    pub fn energy(&self, jac: &JacobiMatrix) -> f64 {
        let jq = jac.apply(&self.q);
        let kin: f64 = self.p.iter().map(|p| p * p).sum();
        let pot: f64 = self.q.iter().zip(&jq).map(|(a, b)| a * b).sum();
        0.5 * (kin + pot)
    }

    /// Physical momenta `P_i = √m_i p_i`.
    pub fn physical_momenta(&self, chain: &ChainSpec) -> Vec<f64> {
        self.p.iter().zip(&chain.masses).map(|(p, m)| p * m.sqrt()).collect()
    }
}

/// Initial condition `(q(0), p(0))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl InitialState {
    /// Momentum `p̄` on the first mass, everything else at rest.
    pub fn kick(size: usize, pbar: f64) -> Self {
        let mut p = vec![0.0; size];
        p[0] = pbar;
        InitialState { q: vec![0.0; size], p }
    }
}

/// Time as an exact fraction of `t*` when mode frequencies are integer
/// multiples of `ω`; phases are then reduced in integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

/// Frequencies `ω_n = ω k_n` of an eigensystem with integer spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegerSpectrum {
    pub omega: f64,
    pub kseq: Vec<i64>,
}

struct Modes<'a> {
    eig: &'a EigenSystem,
    freq: Vec<f64>,
    qhat: Vec<f64>,
    phat: Vec<f64>,
}

impl<'a> Modes<'a> {
    fn new(eig: &'a EigenSystem, freq: Vec<f64>, init: &InitialState) -> Self {
        let proj = |v: &[f64]| -> Vec<f64> {
            eig.vectors.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
        };
        Modes { eig, freq, qhat: proj(&init.q), phat: proj(&init.p) }
    }

    /// Assemble the state from per-mode `(cos θ_n, sin θ_n)` at time `t`.
    fn state(&self, t: f64, phases: impl Iterator<Item = (f64, f64)>) -> TrajectoryState {
        let s = self.eig.size();
        let mut q = vec![0.0; s];
        let mut p = vec![0.0; s];
        for (n, (c, sn)) in phases.enumerate() {
            let w = self.freq[n];
            let (qa, pa) = (self.qhat[n], self.phat[n]);
            let (qn, pn) = if w == 0.0 {
                (qa + pa * t, pa)
            } else {
                (qa * c + pa * sn / w, -qa * w * sn + pa * c)
            };
            for (i, u) in self.eig.vectors[n].iter().enumerate() {
                q[i] += u * qn;
                p[i] += u * pn;
            }
        }
        TrajectoryState { t, q, p }
    }
}

/// Exact normal-mode state at time `t`; `sin(ω_0 t)/ω_0 → t` for a zero mode.
pub fn evolve(eig: &EigenSystem, init: &InitialState, t: f64) -> TrajectoryState {
    let m = Modes::new(eig, eig.frequencies(), init);
    let phases: Vec<(f64, f64)> = m.freq.iter().map(|w| ((w * t).cos(), (w * t).sin())).collect();
    m.state(t, phases.into_iter())
}

/// State at `t = (num/den) t*` with phases `π k_n num/den` reduced modulo `2π` exactly.
pub fn evolve_fraction(eig: &EigenSystem, spec: &IntegerSpectrum, init: &InitialState, at: Fraction) -> TrajectoryState {
    let freq: Vec<f64> = spec.kseq.iter().map(|k| spec.omega * *k as f64).collect();
    let m = Modes::new(eig, freq, init);
    let den = at.den as i128;
    let phases: Vec<(f64, f64)> = spec
        .kseq
        .iter()
        .map(|k| {
            let r = ((*k as i128) * (at.num as i128)).rem_euclid(2 * den);
            let th = PI * r as f64 / den as f64;
            (th.cos(), th.sin())
        })
        .collect();
    let t = PI / spec.omega * at.num as f64 / at.den as f64;
    m.state(t, phases.into_iter())
}

/// States at many sample times, computed concurrently.
pub fn sample_trajectory(eig: &EigenSystem, init: &InitialState, times: &[f64]) -> Vec<TrajectoryState> {
    par::map(times, |t| evolve(eig, init, *t))
}

/// Sequential counterpart of [`sample_trajectory`].
pub fn sample_trajectory_seq(eig: &EigenSystem, init: &InitialState, times: &[f64]) -> Vec<TrajectoryState> {
    par::map_seq(times, |t| evolve(eig, init, *t))
}

/// Transfer outcome at `t*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    /// `p_N(t*) / p̄`, signed.
    pub pn_over_pbar: f64,
    /// `max_{i<N} |p_i(t*)| / p̄`.
    pub residual: f64,
}

impl Fidelity {
    pub fn passes(&self, tol: f64) -> bool {
        (self.pn_over_pbar.abs() - 1.0).abs() < tol && self.residual < tol
    }
}

/// `p_N(t*)/p̄` and the largest leftover momentum elsewhere.
///
/// With an integer spectrum the phases at `t*` are exact.
pub fn pst_fidelity(eig: &EigenSystem, spec: Option<&IntegerSpectrum>, config: &SimulationConfig) -> Fidelity {
    let init = InitialState::kick(eig.size(), config.pbar);
    let st = match spec {
        Some(s) => evolve_fraction(eig, s, &init, Fraction { num: 1, den: 1 }),
        None => evolve(eig, &init, config.tstar),
    };
    fidelity_of(&st, config.pbar)
}

fn fidelity_of(st: &TrajectoryState, pbar: f64) -> Fidelity {
    let n = st.p.len() - 1;
    let residual = st.p[..n].iter().map(|v| v.abs()).fold(0.0, f64::max) / pbar;
    Fidelity { pn_over_pbar: st.p[n] / pbar, residual }
}

// ---------------------------------------------------------------------------
// Fractional revival

/// Congruence family that makes `cos(ω_n τ)` depend only on the parity of `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevivalCondition {
    /// `r ≡ 0 (mod Z)`.
    RMultiple,
    /// `r k0 ≡ k1` and `r k1 ≡ k0 (mod Z)`.
    SwappedSeeds,
    /// `r k0 ≡ 0` and `r k1 ≡ k0 ≡ −k0 (mod Z)`.
    FirstSeedAnnihilated,
    /// `r k0 ≡ k1 ≡ −k1` and `r k1 ≡ 0 (mod Z)`.
    SecondSeedAnnihilated,
    /// Free ends: `r ≡ 0 (mod Z)`.
    FreeEnds,
    /// Direct check of `k_{2s} ≡ ±k_0`, `k_{2s+1} ≡ ±k_1 (mod 2Z)` on a finite sequence.
    SequenceScan,
}

impl RevivalCondition {
    pub fn label(&self) -> &'static str {
        match self {
            RevivalCondition::RMultiple => "r = 0 mod Z",
            RevivalCondition::SwappedSeeds => "r k0 = k1, r k1 = k0 mod Z",
            RevivalCondition::FirstSeedAnnihilated => "r k0 = 0, r k1 = k0 = -k0 mod Z",
            RevivalCondition::SecondSeedAnnihilated => "r k0 = k1 = -k1, r k1 = 0 mod Z",
            RevivalCondition::FreeEnds => "free ends, r = 0 mod Z",
            RevivalCondition::SequenceScan => "k_n = +-k_(n mod 2) mod 2Z",
        }
    }
}

/// One revival order with the conditions it satisfies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevivalOrder {
    pub z: u64,
    pub conditions: Vec<RevivalCondition>,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn divisors_from_two(n: i64) -> Vec<u64> {
    let n = n.unsigned_abs();
    let mut out = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            if d * d != n {
                out.push(n / d);
            }
        }
        d += 1;
    }
    out.retain(|d| *d >= 2);
    out.sort_unstable();
    out
}

/// All revival orders `Z ≥ 2` of the infinite eigeninteger sequence.
///
/// Each condition family pins `Z` to the divisors of one integer, so the
/// enumeration is finite.
pub fn revival_orders(k0: i64, k1: i64, r: i64, boundary: Boundary) -> Vec<RevivalOrder> {
    let mut found: std::collections::BTreeMap<u64, Vec<RevivalCondition>> = Default::default();
    let mut add = |bound: i64, cond: RevivalCondition| {
        if bound == 0 {
            return;
        }
        for z in divisors_from_two(bound) {
            let entry = found.entry(z).or_default();
            if !entry.contains(&cond) {
                entry.push(cond);
            }
        }
    };
    match boundary {
        Boundary::FreeFree => add(r, RevivalCondition::FreeEnds),
        Boundary::FixedFixed => {
            add(r, RevivalCondition::RMultiple);
            add(gcd(r * k0 - k1, r * k1 - k0), RevivalCondition::SwappedSeeds);
            add(gcd(gcd(r * k0, r * k1 - k0), 2 * k0), RevivalCondition::FirstSeedAnnihilated);
            add(gcd(gcd(r * k0 - k1, 2 * k1), r * k1), RevivalCondition::SecondSeedAnnihilated);
        }
    }
    found.into_iter().map(|(z, conditions)| RevivalOrder { z, conditions }).collect()
}

fn sequence_admits(kseq: &[i64], z: u64) -> bool {
    let m = 2 * z as i128;
    let ok = |k: i64, seed: i64| {
        let (k, s) = (k as i128, seed as i128);
        (k - s).rem_euclid(m) == 0 || (k + s).rem_euclid(m) == 0
    };
    kseq.iter().enumerate().all(|(n, k)| ok(*k, kseq[n % 2]))
}

/// Revival orders of a finite sequence (e.g. after surgery), by direct check.
///
/// Candidates are the divisors of `(k_2 ± k_0)/2`, which any order must divide.
pub fn revival_orders_scan(kseq: &[i64]) -> Vec<u64> {
    if kseq.len() < 3 {
        return Vec::new();
    }
    let mut cands: Vec<u64> = Vec::new();
    for v in [kseq[2] - kseq[0], kseq[2] + kseq[0]] {
        if v != 0 && v % 2 == 0 {
            cands.extend(divisors_from_two(v / 2));
        }
    }
    cands.sort_unstable();
    cands.dedup();
    cands.into_iter().filter(|z| sequence_admits(kseq, *z)).collect()
}

/// Where a schedule's orders come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RevivalSource {
    /// Unmodified design: condition families on `(k0, k1, r)`.
    Design { k0: i64, k1: i64, r: i64, boundary: Boundary },
    /// Arbitrary finite eigeninteger sequence.
    Sequence { kseq: Vec<i64> },
}

impl RevivalSource {
    fn seeds(&self) -> (i64, i64) {
        match self {
            RevivalSource::Design { k0, k1, .. } => (*k0, *k1),
            RevivalSource::Sequence { kseq } => (kseq[0], kseq.get(1).copied().unwrap_or(kseq[0])),
        }
    }

    pub fn orders(&self) -> Vec<RevivalOrder> {
        match self {
            RevivalSource::Design { k0, k1, r, boundary } => revival_orders(*k0, *k1, *r, *boundary),
            RevivalSource::Sequence { kseq } => revival_orders_scan(kseq)
                .into_iter()
                .map(|z| RevivalOrder { z, conditions: vec![RevivalCondition::SequenceScan] })
                .collect(),
        }
    }
}

fn cos_pi_fraction(k: i64, l: u64, z: u64) -> f64 {
    let m = 2 * z as i128;
    let r = ((k as i128) * (l as i128)).rem_euclid(m);
    (PI * r as f64 / z as f64).cos()
}

fn prediction_from_seeds(k0: i64, k1: i64, z: u64, l: u64, alpha: f64) -> (f64, f64) {
    let ca = cos_pi_fraction(k0, l, z);
    let cb = cos_pi_fraction(k1, l, z);
    let p0 = (1.0 - alpha) * ca + alpha * cb;
    let pn = (alpha * (1.0 - alpha)).sqrt() * (ca - cb);
    (p0, pn)
}

/// Closed-form `(p_0, p_N)/p̄` at `τ_{ℓ,Z} = (ℓ/Z) t*` for deformation `α`.
///
/// At `α = ½` this is the product-of-cosines form; with free ends
/// `(cos², sin²)(ℓπ/2Z)`; at `ℓ = Z` it gives `(−1)^{k0} (1 − 2α, 2√(α(1−α)))`.
pub fn revival_prediction(source: &RevivalSource, z: u64, l: u64, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CradleError::AlphaOutOfRange(alpha));
    }
    if l > z {
        return Err(CradleError::InvalidDesign(format!("l = {l} exceeds Z = {z}")));
    }
    if !source.orders().iter().any(|o| o.z == z) {
        return Err(CradleError::UnknownRevivalOrder { z });
    }
    let (k0, k1) = source.seeds();
    Ok(prediction_from_seeds(k0, k1, z, l, alpha))
}

/// A single revival event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevivalEvent {
    pub l: u64,
    pub tau: f64,
    pub p0: f64,
    pub pn: f64,
}

/// Events `ℓ = 1..Z−1` for one order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevivalEntry {
    pub z: u64,
    pub conditions: Vec<RevivalCondition>,
    pub events: Vec<RevivalEvent>,
}

/// Every fractional-revival order with its times and predicted end momenta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevivalSchedule {
    pub tstar: f64,
    pub alpha: f64,
    pub entries: Vec<RevivalEntry>,
}

impl RevivalSchedule {
    /// All `(τ, ℓ, Z)` triples, ordered by time.
    pub fn times(&self) -> Vec<(f64, u64, u64)> {
        let mut out: Vec<(f64, u64, u64)> = self
            .entries
            .iter()
            .flat_map(|e| e.events.iter().map(move |ev| (ev.tau, ev.l, e.z)))
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }
}

/// Builds the full schedule; `ℓ = 0` and `ℓ = Z` are left out since they are
/// the initial state and the transfer itself.
pub fn revival_schedule(source: &RevivalSource, alpha: f64, tstar: f64) -> Result<RevivalSchedule> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CradleError::AlphaOutOfRange(alpha));
    }
    let (k0, k1) = source.seeds();
    let entries = source
        .orders()
        .into_iter()
        .map(|o| {
            let events = (1..o.z)
                .map(|l| {
                    let (p0, pn) = prediction_from_seeds(k0, k1, o.z, l, alpha);
                    RevivalEvent { l, tau: tstar * l as f64 / o.z as f64, p0, pn }
                })
                .collect();
            RevivalEntry { z: o.z, conditions: o.conditions, events }
        })
        .collect();
    Ok(RevivalSchedule { tstar, alpha, entries })
}

/// Largest deviation between simulated and predicted end momenta over the
/// schedule, and the largest interior momentum, both in units of `p̄`.
pub fn revival_errors(
    eig: &EigenSystem,
    spec: &IntegerSpectrum,
    schedule: &RevivalSchedule,
    pbar: f64,
) -> (f64, f64) {
    let init = InitialState::kick(eig.size(), pbar);
    let jobs: Vec<(u64, &RevivalEvent)> = schedule
        .entries
        .iter()
        .flat_map(|e| e.events.iter().map(move |ev| (e.z, ev)))
        .collect();
    let errs = par::map(&jobs, |(z, ev)| {
        let st = evolve_fraction(eig, spec, &init, Fraction { num: ev.l, den: *z });
        let n = st.p.len() - 1;
        let end = ((st.p[0] / pbar - ev.p0).abs()).max((st.p[n] / pbar - ev.pn).abs());
        let interior = st.p[1..n].iter().map(|v| v.abs()).fold(0.0, f64::max) / pbar;
        (end, interior)
    });
    errs.into_iter().fold((0.0, 0.0), |(a, b), (c, d)| (f64::max(a, c), f64::max(b, d)))
}

// ---------------------------------------------------------------------------
// Verlet oracle

/// Physical state of the integrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalState {
    pub t: f64,
    pub x: Vec<f64>,
    pub momentum: Vec<f64>,
    /// Largest relative deviation of the total energy from its initial value.
    pub energy_drift: f64,
}

impl PhysicalState {
    /// Converts to mass-weighted coordinates.
    pub fn weighted(&self, chain: &ChainSpec) -> TrajectoryState {
        let q = self.x.iter().zip(&chain.masses).map(|(x, m)| x * m.sqrt()).collect();
        let p = self.momentum.iter().zip(&chain.masses).map(|(p, m)| p / m.sqrt()).collect();
        TrajectoryState { t: self.t, q, p }
    }
}

fn forces(k: &[f64], x: &[f64], out: &mut [f64]) {
    let s = x.len();
    for i in 0..s {
        let left = if i == 0 { x[i] } else { x[i] - x[i - 1] };
        let right = if i + 1 == s { x[i] } else { x[i] - x[i + 1] };
        out[i] = -k[i] * left - k[i + 1] * right;
    }
}

fn chain_energy(k: &[f64], m: &[f64], x: &[f64], v: &[f64]) -> f64 {
    let s = x.len();
    let mut e = 0.0;
    for i in 0..s {
        e += 0.5 * m[i] * v[i] * v[i];
    }
    e += 0.5 * k[0] * x[0] * x[0] + 0.5 * k[s] * x[s - 1] * x[s - 1];
    for i in 1..s {
        let d = x[i] - x[i - 1];
        e += 0.5 * k[i] * d * d;
    }
    e
}

/// Largest step the oracle accepts: one fiftieth of the fastest period.
pub fn verlet_step_bound(chain: &ChainSpec) -> Result<f64> {
    let jac = chain_to_jacobi(chain)?;
    let eig = eigensystem_numeric(&jac)?;
    let wmax = eig.values.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    Ok(if wmax > 0.0 { 2.0 * PI / wmax / 50.0 } else { f64::INFINITY })
}

/// Velocity-Verlet integration of the physical chain from the initial kick
/// `P_0 = √m_0 p̄`, sampled at each of `times` (ascending).
pub fn verlet_oracle(chain: &ChainSpec, pbar: f64, dt: f64, times: &[f64]) -> Result<Vec<PhysicalState>> {
    let bound = verlet_step_bound(chain)?;
    if !(dt > 0.0 && dt <= bound) {
        return Err(CradleError::StepTooLarge { dt, bound });
    }
    let k = chain.full_springs();
    let m = &chain.masses;
    let s = m.len();
    let mut x = vec![0.0; s];
    let mut v = vec![0.0; s];
    v[0] = pbar / m[0].sqrt();
    let e0 = chain_energy(&k, m, &x, &v);
    let mut f = vec![0.0; s];
    forces(&k, &x, &mut f);
    let mut t = 0.0;
    let mut drift: f64 = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        while t < target {
            let h = dt.min(target - t);
            for i in 0..s {
                v[i] += 0.5 * h * f[i] / m[i];
                x[i] += h * v[i];
            }
            forces(&k, &x, &mut f);
            for i in 0..s {
                v[i] += 0.5 * h * f[i] / m[i];
            }
            t += h;
            if (target - t).abs() < 1e-12 * dt {
                t = target;
            }
        }
        let e = chain_energy(&k, m, &x, &v);
        drift = drift.max((e - e0).abs() / e0);
        out.push(PhysicalState {
            t,
            x: x.clone(),
            momentum: v.iter().zip(m).map(|(v, m)| v * m).collect(),
            energy_drift: drift,
        });
    }
    Ok(out)
}
