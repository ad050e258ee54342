//! Algebra of boundary and bias parameters.
//!
//! The open ASEP on sites `1..=N` has bulk hop rates `1` (rightward) and `q`
//! (leftward), injection/extraction rates `alpha`/`gamma` at the left
//! boundary and `delta`/`beta` at the right boundary.  The large-scale
//! behaviour is governed by four effective constants `A, B, C, D`: `A` and
//! `B` are the two real roots of
//!
//! ```text
//!     beta x^2 - (1 - q - beta + delta) x - delta = 0,
//! ```
//!
//! with `A >= 0 >= B`, and `C >= 0 >= D` are the analogous roots with
//! `(alpha, gamma)` in place of `(beta, delta)`.  The effective reservoir
//! densities are `rho_left = 1/(1+C)` and `rho_right = A/(1+A)`.

use crate::{Error, Result};
use std::collections::BTreeMap;
use std::fmt;

/// Tolerance used when testing `A = 1`, `C = 1`, `A = C`, `AC = 1` for phase
/// classification.  Callers working with N-dependent scaling families should
/// classify on the scaling parameters, not on floating-point `A, C`.
pub const PHASE_TOL: f64 = 1e-12;

/// The five boundary/bias rates plus the system size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryParams {
    /// Left-boundary injection rate (must be > 0).
    pub alpha: f64,
    /// Right-boundary extraction rate (must be > 0).
    pub beta: f64,
    /// Left-boundary extraction rate (>= 0).
    pub gamma: f64,
    /// Right-boundary injection rate (>= 0).
    pub delta: f64,
    /// Leftward bulk hop rate, in [0, 1).
    pub q: f64,
    /// Number of lattice sites.
    pub n_sites: usize,
}

impl BoundaryParams {
    pub fn new(
        alpha: f64,
        beta: f64,
        gamma: f64,
        delta: f64,
        q: f64,
        n_sites: usize,
    ) -> Result<Self> {
        let p = BoundaryParams {
            alpha,
            beta,
            gamma,
            delta,
            q,
            n_sites,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "beta must be > 0, got {}",
                self.beta
            )));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "delta must be >= 0, got {}",
                self.delta
            )));
        }
        if !(0.0..1.0).contains(&self.q) {
            return Err(Error::InvalidParameter(format!(
                "q must lie in [0, 1), got {}",
                self.q
            )));
        }
        if self.n_sites == 0 {
            return Err(Error::InvalidParameter("n_sites must be >= 1".into()));
        }
        Ok(())
    }

    /// Serialize to a flat key=value block (one key per line), full decimal
    /// precision.  Keys: alpha, beta, gamma, delta, q, n_sites.
    pub fn to_kv(&self) -> String {
        format!(
            "alpha={:.17e}\nbeta={:.17e}\ngamma={:.17e}\ndelta={:.17e}\nq={:.17e}\nn_sites={}\n",
            self.alpha, self.beta, self.gamma, self.delta, self.q, self.n_sites
        )
    }

    /// Parse from a flat key=value block.  Unknown keys are ignored so the
    /// block can be embedded in a larger config.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut map: BTreeMap<&str, &str> = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((k, v)) = line.split_once('=') {
                map.insert(k.trim(), v.trim());
            }
        }
        let get = |k: &str| -> Result<&str> {
            map.get(k)
                .copied()
                .ok_or_else(|| Error::Config(format!("missing key `{k}`")))
        };
        let getf = |k: &str| -> Result<f64> {
            get(k)?
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad float for `{k}`: {e}")))
        };
        BoundaryParams::new(
            getf("alpha")?,
            getf("beta")?,
            getf("gamma")?,
            getf("delta")?,
            getf("q")?,
            get("n_sites")?
                .parse::<usize>()
                .map_err(|e| Error::Config(format!("bad integer for `n_sites`: {e}")))?,
        )
    }
}

/// Phase of the open ASEP as a function of the effective constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// `max(A, C) <= 1` (excluding the sub-cases below).
    MaxCurrent,
    /// `A > max(1, C)`.
    HighDensity,
    /// `C > max(1, A)`.
    LowDensity,
    /// `A = C > 1`.
    CoexistenceLine,
    /// `A = C = 1`.
    TriplePoint,
    /// `AC = 1` with `A, C != 1`: the stationary measure is product Bernoulli.
    ProductLine,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::MaxCurrent => "max-current",
            Phase::HighDensity => "high-density",
            Phase::LowDensity => "low-density",
            Phase::CoexistenceLine => "coexistence-line",
            Phase::TriplePoint => "triple-point",
            Phase::ProductLine => "product-line",
        };
        f.write_str(s)
    }
}

/// Fan/shock annotation: sign of `AC - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `AC < 1`.
    Fan,
    /// `AC > 1`.
    Shock,
    /// `AC = 1` within tolerance.
    ProductLine,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::Fan => "fan",
            Regime::Shock => "shock",
            Regime::ProductLine => "product-line",
        };
        f.write_str(s)
    }
}

/// Effective constants derived from the boundary rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveConstants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// Effective left-reservoir density `1/(1+C)`.
    pub rho_left: f64,
    /// Effective right-reservoir density `A/(1+A)`.
    pub rho_right: f64,
    pub phase: Phase,
    pub regime: Regime,
}

/// Roots of `r x^2 - (1 - q - r + s) x - s = 0`, returned as
/// `(plus_root, minus_root)` with `plus_root >= 0 >= minus_root`.
///
/// Both roots are real (discriminant `(1-q-r+s)^2 + 4 r s >= 0`), the plus
/// root is nonnegative and the minus root lies in `[-1, 0]`: the quadratic
/// evaluated at `-1` equals `1 - q > 0` and at `0` equals `-s <= 0`.
fn quadratic_roots(r: f64, s: f64, q: f64) -> (f64, f64) {
    let m = 1.0 - q - r + s;
    let disc = (m * m + 4.0 * r * s).sqrt();
    ((m + disc) / (2.0 * r), (m - disc) / (2.0 * r))
}

/// Compute `A, B, C, D`, the reservoir densities, and the phase.
///
/// `A, B` come from `(beta, delta)`; `C, D` come from `(alpha, gamma)`.
pub fn effective_constants(p: &BoundaryParams) -> Result<EffectiveConstants> {
    p.validate()?;
    let (a, b) = quadratic_roots(p.beta, p.delta, p.q);
    let (c, d) = quadratic_roots(p.alpha, p.gamma, p.q);
    let rho_left = 1.0 / (1.0 + c);
    let rho_right = a /(1.0 + a);
    let (phase, regime) = classify_phase_raw(a, c);
    Ok(EffectiveConstants {
        a,
        b,
        c,
        d,
        rho_left,
        rho_right,
        phase,
        regime,
    })
}

/// Phase classification from `(A, C)` alone.
pub fn classify_phase(a: f64, c: f64) -> Phase {
    classify_phase_raw(a, c).0
}

/// Fan/shock/product-line annotation from the sign of `AC - 1`.
pub fn classify_regime(a: f64, c: f64) -> Regime {
    classify_phase_raw(a, c).1
}

fn classify_phase_raw(a: f64, c: f64) -> (Phase, Regime) {
    let prod = a * c;
    let regime = if (prod - 1.0).abs() <= PHASE_TOL {
        Regime::ProductLine
    } else if prod < 1.0 {
        Regime::Fan
    } else {
        Regime::Shock
    };
    let phase = if (a - 1.0).abs() <= PHASE_TOL && (c - 1.0).abs() <= PHASE_TOL {
        Phase::TriplePoint
    } else if (prod - 1.0).abs() <= PHASE_TOL {
        Phase::ProductLine
    } else if a > 1.0 && a > c + PHASE_TOL {
        Phase::HighDensity
    } else if c > 1.0 && c > a + PHASE_TOL {
        Phase::LowDensity
    } else if a.max(c) <= 1.0 + PHASE_TOL {
        Phase::MaxCurrent
    } else {
        // a = c > 1 within tolerance
        Phase::CoexistenceLine
    };
    (phase, regime)
}

/// Invert target effective constants `(A, C)` into boundary rates satisfying
/// Liggett's condition `alpha + gamma/q = 1`, `beta + delta/q = 1`
/// (for `q > 0`; for `q = 0` this degenerates to `gamma = delta = 0`):
///
/// ```text
///   alpha = 1/(1+C),  beta = 1/(1+A),  gamma = q (1 - alpha),  delta = q (1 - beta).
/// ```
///
/// Substituting back into [`effective_constants`] reproduces `(A, C)` to
/// machine precision, and forces `B = D = -q` exactly.
pub fn liggett_params_from_targets(
    a_target: f64,
    c_target: f64,
    q: f64,
    n_sites: usize,
) -> Result<BoundaryParams> {
    if !(a_target > 0.0) || !(c_target > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "targets must be positive, got A={a_target}, C={c_target}"
        )));
    }
    let alpha = 1.0 / (1.0 + c_target);
    let beta = 1.0 / (1.0 + a_target);
    let gamma = q * (1.0 - alpha);
    let delta = q * (1.0 - beta);
    BoundaryParams::new(alpha, beta, gamma, delta, q, n_sites)
}

/// Scaling family near the triple point.
///
/// For system size `N`: `q = exp(-psi N^{-kappa})` and the targets are
/// `A = exp(-A_tilde N^{-1/2})`, `C = exp(-C_tilde N^{-1/2})`, converted to
/// boundary rates via [`liggett_params_from_targets`].  Under Liggett's
/// condition the remaining constants are `B = D = -q`, i.e.
/// `B_tilde = D_tilde = 0` in the scaled parametrization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingSpec {
    /// Bias-decay exponent in [0, 1/2].
    pub kappa: f64,
    /// Bias scale (> 0); `q = exp(-psi N^{-kappa})`.
    pub psi: f64,
    pub a_tilde: f64,
    pub c_tilde: f64,
}

impl ScalingSpec {
    pub fn new(kappa: f64, psi: f64, a_tilde: f64, c_tilde: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&kappa) {
            return Err(Error::InvalidParameter(format!(
                "kappa must lie in [0, 1/2], got {kappa}"
            )));
        }
        if !(psi > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "psi must be > 0, got {psi}"
            )));
        }
        Ok(ScalingSpec {
            kappa,
            psi,
            a_tilde,
            c_tilde,
        })
    }

    /// The bias at size `N`.
    pub fn q_at(&self, n: usize) -> f64 {
        (-self.psi * (n as f64).powf(-self.kappa)).exp()
    }
}

/// Instantiate the scaling family at size `N`.
pub fn triple_point_family(spec: &ScalingSpec, n: usize) -> Result<BoundaryParams> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("N must be >= 2, got {n}")));
    }
    let sqrt_n = (n as f64).sqrt();
    let a = (-spec.a_tilde / sqrt_n).exp();
    let c = (-spec.c_tilde / sqrt_n).exp();
    liggett_params_from_targets(a, c, spec.q_at(n), n)
}
