//! Commands behind the `cradle` binary: build a chain document, simulate
//! it, list its fractional revivals, and verify it.

use std::io::Write;
use std::path::Path;

use cradle::dynamics::{
    evolve, evolve_fraction, revival_schedule, Fraction, InitialState, IntegerSpectrum, RevivalSchedule,
    RevivalSource, TrajectoryState,
};
use cradle::jacobi::{eigensystem_numeric, EigenSystem, JacobiMatrix};
use cradle::pipeline::{realize, verify_chain, ChainClaim, DesignRequest, VerifyReport, SPECTRUM_TOL};
use cradle::synthesis::{chain_to_jacobi, ChainSpec};
use cradle::{par, Boundary, CradleError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DOCUMENT_VERSION: u32 = 1;
pub const AUTO_SAMPLES: u64 = 200;

/// Failure classes, each with its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {0}", .0.code())]
    Core(#[from] CradleError),
    #[error("E_INPUT: {0}")]
    Input(String),
    #[error("E_IO: {0}")]
    Io(String),
    #[error("verification failed")]
    Verify(Box<VerifyReport>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(_) | CliError::Input(_) => 2,
            CliError::Verify(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Design parameters as recorded in a document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignBlock {
    #[serde(rename = "N")]
    pub n: usize,
    pub r: i64,
    pub k0: i64,
    pub k1: i64,
    pub omega: f64,
    pub m0: f64,
    pub alpha: f64,
    /// Removed adjacent pairs `[k, k+1]`, in application order.
    pub surgery: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub q: f64,
    pub gamma: f64,
    #[serde(rename = "Omega")]
    pub big_omega: f64,
    pub tstar: f64,
    /// Eigenintegers of the final chain (after surgery).
    pub kseq: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    /// SHA-256 of the canonical JSON of the design block.
    pub input_hash: String,
}

/// The chain-spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDocument {
    pub version: u32,
    pub boundary: Boundary,
    pub masses: Vec<f64>,
    pub springs: Vec<f64>,
    pub design: DesignBlock,
    pub derived: Derived,
    pub provenance: Provenance,
}

impl ChainDocument {
    pub fn chain(&self) -> CliResult<ChainSpec> {
        Ok(ChainSpec::new(
            self.boundary,
            self.masses.clone(),
            self.springs.clone(),
            self.design.alpha,
            self.design.omega,
        )?)
    }

    pub fn revival_source(&self) -> RevivalSource {
        if self.design.surgery.is_empty() {
            RevivalSource::Design { k0: self.design.k0, k1: self.design.k1, r: self.design.r, boundary: self.boundary }
        } else {
            RevivalSource::Sequence { kseq: self.derived.kseq.clone() }
        }
    }

    pub fn claim(&self, pbar: f64) -> ChainClaim {
        ChainClaim { kseq: self.derived.kseq.clone(), source: self.revival_source(), pbar }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let doc: ChainDocument =
            serde_json::from_str(text).map_err(|e| CliError::Input(format!("malformed chain document: {e}")))?;
        if doc.version != DOCUMENT_VERSION {
            return Err(CliError::Input(format!("unsupported document version {}", doc.version)));
        }
        Ok(doc)
    }
}

pub fn input_hash(block: &DesignBlock) -> String {
    let canonical = serde_json::to_vec(block).expect("design block serializes");
    format!("{:x}", Sha256::digest(canonical))
}

/// Builds the document for a request.
pub fn cmd_design(req: &DesignRequest) -> CliResult<ChainDocument> {
    let real = realize(req)?;
    let d = &real.design;
    let design = DesignBlock {
        n: req.n,
        r: req.r,
        k0: req.k0,
        k1: req.k1,
        omega: req.omega,
        m0: req.m0,
        alpha: real.alpha,
        surgery: req.surgery.iter().map(|k| [*k, k + 1]).collect(),
    };
    let provenance = Provenance { tool_version: env!("CARGO_PKG_VERSION").into(), input_hash: input_hash(&design) };
    Ok(ChainDocument {
        version: DOCUMENT_VERSION,
        boundary: real.chain.boundary,
        masses: real.chain.masses.clone(),
        springs: real.chain.springs.clone(),
        design,
        derived: Derived { q: d.q, gamma: d.gamma, big_omega: d.big_omega, tstar: d.tstar(), kseq: real.kseq.clone() },
        provenance,
    })
}

/// Sample times: exact fractions of `t*`, or explicit values.
#[derive(Debug, Clone, PartialEq)]
pub enum Times {
    /// `AUTO_SAMPLES` points over `[0, t*]` plus every revival time.
    Auto,
    Fractions(Vec<Fraction>),
    Explicit(Vec<f64>),
}

pub fn parse_times(s: &str) -> CliResult<Times> {
    let s = s.trim();
    if s == "auto" {
        return Ok(Times::Auto);
    }
    let vals: std::result::Result<Vec<f64>, _> = s.split(',').map(|v| v.trim().parse::<f64>()).collect();
    match vals {
        Ok(v) if v.iter().all(|t| t.is_finite() && *t >= 0.0) && !v.is_empty() => Ok(Times::Explicit(v)),
        _ => Err(CliError::Input(format!("times must be 'auto' or a comma list of non-negative numbers, got '{s}'"))),
    }
}

/// Prepared system for simulating a document.
pub struct Simulator {
    pub chain: ChainSpec,
    pub jacobi: JacobiMatrix,
    pub eigen: EigenSystem,
    /// Present when the chain's spectrum matches its declared eigenintegers.
    pub exact: Option<IntegerSpectrum>,
    pub tstar: f64,
    pub pbar: f64,
}

impl Simulator {
    pub fn new(doc: &ChainDocument, pbar: f64) -> CliResult<Self> {
        if !(pbar.is_finite() && pbar > 0.0) {
            return Err(CliError::Input(format!("pbar must be positive, got {pbar}")));
        }
        let chain = doc.chain()?;
        let jacobi = chain_to_jacobi(&chain)?;
        let numeric = eigensystem_numeric(&jacobi)?;
        let omega = chain.omega;
        let target: Vec<f64> = doc.derived.kseq.iter().map(|k| (omega * *k as f64).powi(2)).collect();
        let top = target.last().copied().unwrap_or(1.0);
        let matches = target.len() == numeric.values.len()
            && numeric.values.iter().zip(&target).all(|(x, t)| {
                if *t == 0.0 { x.abs() <= SPECTRUM_TOL * top } else { (x - t).abs() <= SPECTRUM_TOL * t }
            });
        let (eigen, exact) = if matches {
            let spec = IntegerSpectrum { omega, kseq: doc.derived.kseq.clone() };
            (EigenSystem { values: target, vectors: numeric.vectors }, Some(spec))
        } else {
            (numeric, None)
        };
        Ok(Simulator { chain, jacobi, eigen, exact, tstar: std::f64::consts::PI / omega, pbar })
    }

    pub fn state_at_fraction(&self, f: Fraction) -> TrajectoryState {
        let init = InitialState::kick(self.eigen.size(), self.pbar);
        match &self.exact {
            Some(s) => evolve_fraction(&self.eigen, s, &init, f),
            None => evolve(&self.eigen, &init, self.tstar * f.num as f64 / f.den as f64),
        }
    }

    pub fn state_at(&self, t: f64) -> TrajectoryState {
        let init = InitialState::kick(self.eigen.size(), self.pbar);
        evolve(&self.eigen, &init, t)
    }
}

/// One trajectory sample with weighted and physical momenta and energy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub t: f64,
    pub p: Vec<f64>,
    pub physical: Vec<f64>,
    pub energy: f64,
}

pub fn cmd_simulate(doc: &ChainDocument, times: &Times, pbar: f64) -> CliResult<Vec<Row>> {
    let sim = Simulator::new(doc, pbar)?;
    let states: Vec<TrajectoryState> = match times {
        Times::Explicit(ts) => par::map(ts, |t| sim.state_at(*t)),
        Times::Fractions(fs) => par::map(fs, |f| sim.state_at_fraction(*f)),
        Times::Auto => {
            let mut fs: Vec<Fraction> = (0..AUTO_SAMPLES).map(|i| Fraction { num: i, den: AUTO_SAMPLES - 1 }).collect();
            let sched = revival_schedule(&doc.revival_source(), doc.design.alpha, sim.tstar)?;
            for e in &sched.entries {
                fs.extend(e.events.iter().map(|ev| Fraction { num: ev.l, den: e.z }));
            }
            fs.sort_by(|a, b| (a.num as u128 * b.den as u128).cmp(&(b.num as u128 * a.den as u128)));
            par::map(&fs, |f| sim.state_at_fraction(*f))
        }
    };
    Ok(states
        .into_iter()
        .map(|st| Row {
            t: st.t,
            physical: st.physical_momenta(&sim.chain),
            energy: st.energy(&sim.jacobi),
            p: st.p,
        })
        .collect())
}

pub fn write_rows_csv<W: Write>(rows: &[Row], out: W) -> CliResult<()> {
    let n = rows.first().map(|r| r.p.len()).unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| format!("p_{i}")));
    header.extend((0..n).map(|i| format!("P_{i}")));
    header.push("E".into());
    w.write_record(&header).map_err(|e| CliError::Io(e.to_string()))?;
    for r in rows {
        let mut rec = vec![format!("{:.17e}", r.t)];
        rec.extend(r.p.iter().chain(&r.physical).map(|v| format!("{v:.17e}")));
        rec.push(format!("{:.17e}", r.energy));
        w.write_record(&rec).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn cmd_schedule(doc: &ChainDocument) -> CliResult<RevivalSchedule> {
    let sched = revival_schedule(&doc.revival_source(), doc.design.alpha, doc.derived.tstar)?;
    if doc.design.surgery.is_empty() {
        // Z = r always qualifies for an unmodified design.
        assert!(!sched.entries.is_empty(), "design schedule cannot be empty");
    }
    Ok(sched)
}

pub fn write_schedule_csv<W: Write>(sched: &RevivalSchedule, out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["Z", "l", "tau", "p0", "pN", "conditions"]).map_err(|e| CliError::Io(e.to_string()))?;
    for e in &sched.entries {
        let conds: Vec<&str> = e.conditions.iter().map(|c| c.label()).collect();
        for ev in &e.events {
            w.write_record([
                e.z.to_string(),
                ev.l.to_string(),
                format!("{:.17e}", ev.tau),
                format!("{:.17e}", ev.p0),
                format!("{:.17e}", ev.pn),
                conds.join("; "),
            ])
            .map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

/// Runs every check; a failing report comes back as [`CliError::Verify`].
pub fn cmd_verify(doc: &ChainDocument, pbar: f64) -> CliResult<VerifyReport> {
    let chain = doc.chain()?;
    let report = verify_chain(&chain, &doc.claim(pbar))?;
    if report.passed() {
        Ok(report)
    } else {
        Err(CliError::Verify(Box::new(report)))
    }
}

pub fn write_report_csv<W: Write>(report: &VerifyReport, out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["check", "passed", "value", "tolerance", "detail"]).map_err(|e| CliError::Io(e.to_string()))?;
    for c in &report.checks {
        w.write_record([
            c.name.to_string(),
            c.passed.to_string(),
            format!("{:.17e}", c.value),
            format!("{:.17e}", c.tolerance),
            c.detail.clone(),
        ])
        .map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn render_report(report: &VerifyReport) -> String {
    let mut s = String::new();
    for c in &report.checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        s.push_str(&format!("{tag} {:<20} {:.3e} (tol {:.0e})  {}\n", c.name, c.value, c.tolerance, c.detail));
    }
    for n in &report.notes {
        s.push_str(&format!("NOTE {n}\n"));
    }
    s.push_str(if report.passed() { "RESULT PASS\n" } else { "RESULT FAIL\n" });
    s
}

pub fn read_document(path: &Path) -> CliResult<ChainDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    ChainDocument::from_json(&text)
}

/// Writes to `path`, or stdout when absent.
pub fn emit(path: Option<&Path>, body: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, body).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_round_trip_is_exact() {
        let doc = cmd_design(&DesignRequest::new(Boundary::FixedFixed, 3, 2, 3, 7)).unwrap();
        let back = ChainDocument::from_json(&doc.to_json()).unwrap();
        assert_eq!(doc, back);
        assert_eq!(doc.to_json(), back.to_json());
    }

    #[test]
    fn hash_depends_on_design_only() {
        let a = cmd_design(&DesignRequest::new(Boundary::FreeFree, 2, 0, 1, 4)).unwrap();
        let b = cmd_design(&DesignRequest::new(Boundary::FreeFree, 2, 0, 1, 4)).unwrap();
        let c = cmd_design(&DesignRequest::new(Boundary::FreeFree, 2, 0, 1, 5)).unwrap();
        assert_eq!(a.provenance.input_hash, b.provenance.input_hash);
        assert_ne!(a.provenance.input_hash, c.provenance.input_hash);
        assert_eq!(a.provenance.input_hash.len(), 64);
    }

    #[test]
    fn parse_times_forms() {
        assert_eq!(parse_times("auto").unwrap(), Times::Auto);
        assert_eq!(parse_times("0, 1.5").unwrap(), Times::Explicit(vec![0.0, 1.5]));
        assert!(parse_times("x").is_err());
        assert!(parse_times("-1").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Core(CradleError::SameParity { k0: 1, k1: 3 }).exit_code(), 2);
        assert_eq!(CliError::Io("x".into()).exit_code(), 4);
    }
}
