//! Integer eigenfrequencies on the q̌-hyperbolic lattice and the derived
//! design parameters.

use serde::{Deserialize, Serialize};

use crate::error::{CradleError, Result};
use crate::qkernel::QParams;
use crate::Boundary;

/// Default cap on `N`; beyond it the factor magnitudes span more than f64 can resolve.
pub const DEFAULT_MAX_N: usize = 16;

/// `q̌ = r − √(r² − 1)`, evaluated as `1 / (r + √(r² − 1))` to avoid cancellation.
pub fn qbar_from_r(r: i64) -> Result<f64> {
    if r < 2 {
        return Err(CradleError::InvalidDesign(format!("r must be >= 2, got {r}")));
    }
    let r = r as f64;
    Ok(1.0 / (r + (r * r - 1.0).sqrt()))
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

/// Checks the admissibility of the seed pair `(k0, k1)`.
pub fn check_seeds(k0: i64, k1: i64, boundary: Boundary) -> Result<()> {
    if k0 < 0 || k1 <= k0 {
        return Err(CradleError::InvalidDesign(format!(
            "need 0 <= k0 < k1, got k0 = {k0}, k1 = {k1}"
        )));
    }
    if (k0 + k1) % 2 == 0 {
        return Err(CradleError::SameParity { k0, k1 });
    }
    let g = gcd(k0, k1);
    if g != 1 {
        return Err(CradleError::CommonFactor { k0, k1, factor: g });
    }
    match boundary {
        Boundary::FreeFree if (k0, k1) != (0, 1) => Err(CradleError::InvalidDesign(format!(
            "free-free designs require (k0, k1) = (0, 1), got ({k0}, {k1})"
        ))),
        Boundary::FixedFixed if k0 == 0 => Err(CradleError::InvalidDesign(
            "k0 = 0 gives a zero mode; use the free-free boundary".into(),
        )),
        _ => Ok(()),
    }
}

/// `k_0..k_N` from `k_{n+1} = 2r k_n − k_{n−1}` in checked 64-bit arithmetic.
pub fn eigenintegers(k0: i64, k1: i64, r: i64, n: usize, boundary: Boundary) -> Result<Vec<i64>> {
    qbar_from_r(r)?;
    check_seeds(k0, k1, boundary)?;
    let mut ks = vec![k0];
    if n >= 1 {
        ks.push(k1);
    }
    let two_r = 2 * r;
    for i in 2..=n {
        let next = two_r
            .checked_mul(ks[i - 1])
            .and_then(|v| v.checked_sub(ks[i - 2]))
            .ok_or(CradleError::IntegerOverflow { n: i })?;
        ks.push(next);
    }
    Ok(ks)
}

/// `(Ω, d, γ)` with `k_n = Ω(q̌^{−n} + d q̌^{n+1})` and `γ = d`.
pub fn affine_params(k0: i64, k1: i64, qbar: f64) -> (f64, f64, f64) {
    let (k0, k1) = (k0 as f64, k1 as f64);
    let big_omega = (k1 - k0 * qbar) / (1.0 / qbar - qbar);
    let gamma_q = (k0 - k1 * qbar) / (k1 - k0 * qbar);
    let d = gamma_q / (qbar * qbar);
    (big_omega, d, d)
}

/// Integer design data together with every derived parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDesign {
    pub boundary: Boundary,
    pub r: i64,
    pub k0: i64,
    pub k1: i64,
    pub n: usize,
    pub omega: f64,
    pub qbar: f64,
    pub q: f64,
    pub big_omega: f64,
    pub d: f64,
    pub gamma: f64,
    pub kseq: Vec<i64>,
}

impl SpectralDesign {
    /// Validated design with the default size cap.
    pub fn new(boundary: Boundary, r: i64, k0: i64, k1: i64, n: usize, omega: f64) -> Result<Self> {
        Self::with_cap(boundary, r, k0, k1, n, omega, DEFAULT_MAX_N)
    }

    pub fn with_cap(
        boundary: Boundary,
        r: i64,
        k0: i64,
        k1: i64,
        n: usize,
        omega: f64,
        max_n: usize,
    ) -> Result<Self> {
        if n < 1 {
            return Err(CradleError::InvalidDesign("N must be at least 1".into()));
        }
        if n > max_n {
            return Err(CradleError::SizeCap { n, cap: max_n });
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(CradleError::InvalidDesign(format!("omega must be positive, got {omega}")));
        }
        let kseq = eigenintegers(k0, k1, r, n, boundary)?;
        let qbar = qbar_from_r(r)?;
        let (big_omega, d, gamma) = affine_params(k0, k1, qbar);
        Ok(SpectralDesign {
            boundary,
            r,
            k0,
            k1,
            n,
            omega,
            qbar,
            q: qbar * qbar,
            big_omega,
            d,
            gamma,
            kseq,
        })
    }

    pub fn free_free(r: i64, n: usize) -> Result<Self> {
        Self::new(Boundary::FreeFree, r, 0, 1, n, 1.0)
    }

    pub fn fixed_fixed(r: i64, k0: i64, k1: i64, n: usize) -> Result<Self> {
        Self::new(Boundary::FixedFixed, r, k0, k1, n, 1.0)
    }

    pub fn with_omega(mut self, omega: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(CradleError::InvalidDesign(format!("omega must be positive, got {omega}")));
        }
        self.omega = omega;
        Ok(self)
    }

    pub fn qparams(&self) -> Result<QParams> {
        QParams::new(self.qbar, self.gamma, self.n)
    }

    /// Physical scale `ω²(k1 − k0 q^{1/2})² / 4(r² − 1)` of the kernel factors.
    pub fn prefactor(&self) -> f64 {
        let r = self.r as f64;
        let s = self.k1 as f64 - self.k0 as f64 * self.qbar;
        self.omega * self.omega * s * s / (4.0 * (r * r - 1.0))
    }

    /// Lowest eigenvalue `ω² k0²`, the diagonal shift of the Jacobi matrix.
    pub fn x0(&self) -> f64 {
        let k = self.omega * self.k0 as f64;
        k * k
    }

    /// Transfer time `t* = π / ω`.
    pub fn tstar(&self) -> f64 {
        std::f64::consts::PI / self.omega
    }

    /// `Ω(q̌^{−n} + d q̌^{n+1})`, the real-valued lattice form of `k_n`.
    pub fn lattice_k(&self, n: usize) -> f64 {
        let n = n as i32;
        self.big_omega * (self.qbar.powi(-n) + self.d * self.qbar.powi(n + 1))
    }

    /// Whether `|γq| < 1`, the positivity branch the kernel relies on.
    pub fn positivity_branch(&self) -> bool {
        (self.gamma * self.q).abs() < 1.0
    }
}

/// Closed-form eigenvalues `x_n = ω_n²`, with the free-free zero mode pinned to 0.
pub fn eigenvalues(design: &SpectralDesign) -> Vec<f64> {
    let pref = design.prefactor();
    let q = design.q;
    (0..=design.n)
        .map(|n| {
            let ni = n as i32;
            match design.boundary {
                Boundary::FreeFree if n == 0 => 0.0,
                Boundary::FreeFree => pref * (q.powi(-ni) + q.powi(ni) - 2.0),
                Boundary::FixedFixed => {
                    let g = design.gamma;
                    pref * (q.powi(-ni) + g * g * q.powi(ni + 1) + 2.0 * g * design.qbar)
                }
            }
        })
        .collect()
}

/// One violated transfer condition on an integer frequency sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PstViolation {
    TooShort,
    NotIncreasing { n: usize },
    EvenGap { n: usize, gap: i64 },
    CommonFactor { gcd: i64 },
}

/// Outcome of [`validate_pst_spectrum`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PstReport {
    pub violations: Vec<PstViolation>,
}

impl PstReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Strictly increasing, odd gaps, no common factor.
pub fn validate_pst_spectrum(kseq: &[i64]) -> PstReport {
    let mut violations = Vec::new();
    if kseq.len() < 2 {
        violations.push(PstViolation::TooShort);
        return PstReport { violations };
    }
    for (n, pair) in kseq.windows(2).enumerate() {
        let gap = pair[1] - pair[0];
        if gap <= 0 {
            violations.push(PstViolation::NotIncreasing { n });
        }
        if gap % 2 == 0 {
            violations.push(PstViolation::EvenGap { n, gap });
        }
    }
    let g = kseq.iter().fold(0, |acc, k| gcd(acc, *k));
    if g != 1 {
        violations.push(PstViolation::CommonFactor { gcd: g });
    }
    PstReport { violations }
}
