//! Special functions: infinite q-Pochhammer symbols, complex log-Gamma,
//! the contour-integral representation of the stationary current, and the
//! asymptotic correction functions `F`, `H`, `F_tilde`.
//!
//! Everything that can overflow a double (`e^{N ln 4}` saddle factors,
//! `e^{pi^2/(6 eps)}` Pochhammer prefactors, Gamma functions of large
//! argument) is accumulated in the log domain; only ratios are
//! exponentiated.

use crate::params::{effective_constants, BoundaryParams};
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Result of evaluating `(x; q)_infinity = prod_{k>=0} (1 - x q^k)`.
#[derive(Debug, Clone, Copy)]
pub struct QPochhammerEval {
    /// Principal-branch log of the product (sum of factor logs); log-scaled
    /// so huge/tiny products stay representable.
    pub log_value: Complex64,
    /// Number of retained factors.
    pub terms: usize,
    /// Certified bound on the dropped tail of the log-sum.
    pub tail_bound: f64,
    /// Set when some factor is exactly zero; the product is exactly zero
    /// and `log_value` is meaningless.
    pub is_zero: bool,
}

impl QPochhammerEval {
    pub fn value(&self) -> Complex64 {
        if self.is_zero {
            Complex64::new(0.0, 0.0)
        } else {
            self.log_value.exp()
        }
    }
}

/// Infinite q-Pochhammer symbol `(x; q)_infinity` with a certified
/// truncation: factors are retained until the dropped log-tail is below
/// `tol`.  Uses `|ln(1-w)| <= 2|w|` for `|w| <= 1/2`, so the tail bound is
/// `2 |x| q^K / (1-q)`.
pub fn qpochhammer(x: Complex64, q: f64, tol: f64) -> Result<QPochhammerEval> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!(
            "q must lie in [0,1), got {q}"
        )));
    }
    if x.norm() == 0.0 {
        return Ok(QPochhammerEval {
            log_value: Complex64::new(0.0, 0.0),
            terms: 0,
            tail_bound: 0.0,
            is_zero: false,
        });
    }
    if q == 0.0 {
        let f = Complex64::new(1.0, 0.0) - x;
        if f.norm() == 0.0 {
            return Ok(QPochhammerEval {
                log_value: Complex64::new(f64::NEG_INFINITY, 0.0),
                terms: 1,
                tail_bound: 0.0,
                is_zero: true,
            });
        }
        return Ok(QPochhammerEval {
            log_value: f.ln(),
            terms: 1,
            tail_bound: 0.0,
            is_zero: false,
        });
    }
    // K large enough that 2|x| q^K/(1-q) <= tol and |x| q^K <= 1/2.
    let r = x.norm();
    let k_tol = ((tol * (1.0 - q) / (2.0 * r)).ln() / q.ln()).ceil().max(1.0);
    let k_half = ((0.5 / r).ln() / q.ln()).ceil().max(0.0);
    let k = (k_tol.max(k_half) as usize).max(1);
    let mut log_sum = Complex64::new(0.0, 0.0);
    let mut qk = 1.0f64;
    for _ in 0..k {
        let f = Complex64::new(1.0, 0.0) - x * qk;
        if f.norm() == 0.0 {
            return Ok(QPochhammerEval {
                log_value: Complex64::new(f64::NEG_INFINITY, 0.0),
                terms: k,
                tail_bound: 0.0,
                is_zero: true,
            });
        }
        log_sum += f.ln();
        qk *= q;
    }
    Ok(QPochhammerEval {
        log_value: log_sum,
        terms: k,
        tail_bound: 2.0 * r * qk / (1.0 - q),
        is_zero: false,
    })
}

// Stirling-series coefficients B_{2n} / (2n (2n-1)).
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
];

fn log_sin_pi(z: Complex64) -> Complex64 {
    // sin(pi z) = e^{-i pi z} (e^{2 i pi z} - 1) / (2i); stable for
    // Im(z) >= 0 where |e^{2 i pi z}| <= 1.
    debug_assert!(z.im >= 0.0);
    let two_i_pi_z = Complex64::new(0.0, 2.0 * PI) * z;
    -Complex64::new(0.0, PI) * z + (two_i_pi_z.exp() - 1.0).ln()
        - Complex64::new(0.0, 0.5 * PI).exp().ln()
        - Complex64::new(2.0f64.ln(), 0.0)
}

/// Principal-branch complex log-Gamma via the Stirling series with
/// recurrence shifting (and the reflection formula left of `Re z = 1/2`).
///
/// The imaginary part is branch-consistent with the series construction;
/// the real part (hence `|Gamma|` and all products used downstream) is
/// accurate to about 1e-13 relative on the tested domain.
pub fn log_gamma(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.floor() {
        return Err(Error::Domain(format!("log_gamma pole at z = {}", z.re)));
    }
    if z.im < 0.0 {
        return Ok(log_gamma(z.conj())?.conj());
    }
    if z.re < 0.5 {
        // Reflection: Gamma(z) Gamma(1-z) = pi / sin(pi z).
        let rest = log_gamma(Complex64::new(1.0, 0.0) - z)?;
        return Ok(Complex64::new(PI.ln(), 0.0) - log_sin_pi(z) - rest);
    }
    let mut shift = Complex64::new(0.0, 0.0);
    let mut w = z;
    while w.re < 15.0 {
        shift -= w.ln();
        w += 1.0;
    }
    let mut series = Complex64::new(0.0, 0.0);
    let w2 = w * w;
    let mut pow = w;
    for c in STIRLING {
        series += c / pow;
        pow *= w2;
    }
    Ok((w - 0.5) * w.ln() - w + 0.5 * (2.0 * PI).ln() + series + shift)
}

/// `2 Re ln Gamma(z)`, i.e. `ln |Gamma(z)|^2 = ln (Gamma(z) Gamma(conj z))`.
fn log_abs_gamma_sq(z: Complex64) -> Result<f64> {
    Ok(2.0 * log_gamma(z)?.re)
}

/// Required margin between the unit contour and the nearest Pochhammer
/// pole/zero ring: refuse when `1 - max(|A|,|B|,|C|,|D|) < this`.
pub const CONTOUR_MARGIN: f64 = 1e-4;

/// Result of a contour-integral current evaluation.
#[derive(Debug, Clone, Copy)]
pub struct ContourCurrent {
    pub j: f64,
    /// Change between the last two node-doubling levels.
    pub est_error: f64,
    /// Final node count.
    pub nodes: usize,
}

/// Stationary current of the open ASEP from its contour-integral
/// representation:
///
/// ```text
///   J_N = (1-q)/4 * [ 1 + I_num / I_den ],
///   I   = (1/4pi) int_0^{2pi} e^{N f(z)} g(z; q) (weight) dphi,  z = e^{i phi},
/// ```
///
/// where `f(z) = ln(2 + z + 1/z)`, the numerator weight is
/// `4/(2+z+1/z) - 1 = tan^2(phi/2)`, and
/// `g = (z^2, z^{-2}; q)_inf / prod_{X in {A,B,C,D}} (Xz, X z^{-1}; q)_inf`.
///
/// On the unit circle `z^{-1} = conj(z)`, so every Pochhammer pair has the
/// form `|(w; q)_inf|^2` and `g` is real and nonnegative; the integrand is
/// accumulated as `exp(2N ln cos(phi/2) + ln g [+ 2 ln tan(phi/2)])` in the
/// log domain (the constant `e^{N ln 4}` cancels in the ratio).  Midpoint
/// nodes avoid the integrable log-singularities at `z = +-1`; node count is
/// doubled until successive estimates agree within `tol`.
///
/// Valid only when all of `|A|,|B|,|C|,|D| < 1` with margin
/// [`CONTOUR_MARGIN`]; otherwise the circle contour is wrong (or numerically
/// hopeless) and an error directs the caller to the exact solver.
pub fn contour_current(p: &BoundaryParams, tol: f64) -> Result<ContourCurrent> {
    let n = p.n_sites;
    if n < 2 {
        return Err(Error::InvalidParameter("contour current needs N >= 2".into()));
    }
    let e = effective_constants(p)?;
    let consts = [e.a, e.b, e.c, e.d];
    let maxmod = consts.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if 1.0 - maxmod < CONTOUR_MARGIN {
        return Err(Error::Domain(format!(
            "unit-circle contour invalid: max(|A|,|B|,|C|,|D|) = {maxmod:.6} \
             too close to 1 (need margin {CONTOUR_MARGIN}); use the exact \
             solver or the asymptotic expansion"
        )));
    }
    let q = p.q;
    let ptol = 1e-14;
    // Log-integrand at angle phi, without the numerator weight.
    let log_base = |phi: f64| -> Result<f64> {
        let z = Complex64::from_polar(1.0, phi);
        let mut lg = 2.0 * qpochhammer(z * z, q, ptol)?.log_value.re;
        for &c in &consts {
            lg -= 2.0 * qpochhammer(z * c, q, ptol)?.log_value.re;
        }
        Ok(2.0 * n as f64 * (phi / 2.0).cos().abs().ln() + lg)
    };
    let mut m = 64 * (n as f64).sqrt().ceil() as usize;
    if m % 2 == 1 {
        m += 1;
    }
    let eval = |m: usize| -> Result<f64> {
        let mut den_terms = Vec::with_capacity(m);
        let mut num_terms = Vec::with_capacity(m);
        for j in 0..m {
            let phi = 2.0 * PI * (j as f64 + 0.5) / m as f64;
            let base = log_base(phi)?;
            den_terms.push(base);
            num_terms.push(base + 2.0 * (phi / 2.0).tan().abs().ln());
        }
        let lse = |terms: &[f64]| -> (f64, f64) {
            let shift = terms.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let sum: f64 = terms.iter().map(|&t| (t - shift).exp()).sum();
            (shift, sum)
        };
        let (sh_n, s_n) = lse(&num_terms);
        let (sh_d, s_d) = lse(&den_terms);
        let ratio = (sh_n - sh_d).exp() * s_n / s_d;
        Ok((1.0 - q) / 4.0 * (1.0 + ratio))
    };
    let mut j_prev = eval(m)?;
    loop {
        m *= 2;
        if m > (1 << 22) {
            return Err(Error::Convergence(format!(
                "contour quadrature did not converge below {tol} by M = {m}"
            )));
        }
        let j_next = eval(m)?;
        let diff = (j_next - j_prev).abs();
        if diff < tol {
            return Ok(ContourCurrent {
                j: j_next,
                est_error: diff,
                nodes: m,
            });
        }
        j_prev = j_next;
    }
}

/// Quadrature controls for the Gaussian-weighted integrals in `F`/`F_tilde`.
#[derive(Debug, Clone, Copy)]
pub struct AsymptoticInputs {
    /// Truncation half-width (Gaussian weight `e^{-X^2/4}` at the cut).
    pub half_width: f64,
    /// Initial node spacing; halved until the result is stable.
    pub spacing: f64,
    /// Relative stability tolerance for step-halving.
    pub tol: f64,
}

impl Default for AsymptoticInputs {
    fn default() -> Self {
        AsymptoticInputs {
            half_width: 12.0,
            spacing: 0.05,
            tol: 1e-12,
        }
    }
}

fn step_halving_ratio(
    quad: &AsymptoticInputs,
    ratio_at: impl Fn(f64) -> f64,
) -> f64 {
    let mut h = quad.spacing;
    let mut prev = ratio_at(h);
    for _ in 0..24 {
        h /= 2.0;
        let next = ratio_at(h);
        if (next - prev).abs() <= quad.tol * next.abs().max(1.0) {
            return next;
        }
        prev = next;
    }
    prev
}

/// First-order current correction at the triple point for bias exponent
/// `kappa < 1/2`:
///
/// ```text
///   F(At, Ct) = (1/4) * int e^{-x^2/4} x^4 / ((x^2+At^2)(x^2+Ct^2)) dx
///             / int e^{-x^2/4} x^2 / ((x^2+At^2)(x^2+Ct^2)) dx.
/// ```
///
/// Symmetric in its arguments, increasing in each, with limit 3/2.
pub fn asymptotic_f(a_tilde: f64, c_tilde: f64, quad: &AsymptoticInputs) -> Result<f64> {
    if !(a_tilde > 0.0 && c_tilde > 0.0) {
        return Err(Error::InvalidParameter(
            "F requires positive arguments".into(),
        ));
    }
    let a2 = a_tilde * a_tilde;
    let c2 = c_tilde * c_tilde;
    let x_max = quad.half_width;
    let ratio_at = |h: f64| -> f64 {
        // Even integrand: midpoint rule on (0, X], doubled (factor cancels).
        let mut num = 0.0;
        let mut den = 0.0;
        let steps = (x_max / h).ceil() as usize;
        for i in 0..steps {
            let x = (i as f64 + 0.5) * h;
            let x2 = x * x;
            let base = (-x2 / 4.0).exp() * x2 / ((x2 + a2) * (x2 + c2));
            den += base;
            num += base * x2;
        }
        0.25 * num / den
    };
    Ok(step_halving_ratio(quad, ratio_at))
}

/// Log of the spectral weight
/// `H(At, Ct; x) = |Gamma((At+ix)/psi)|^2 |Gamma((Ct+ix)/psi)|^2
///                 * y sinh(pi y) / pi`, with `y = 2x/psi`.
///
/// Returns `-infinity` at `x = 0` (where `H` vanishes).  `H` is even in `x`
/// and strictly positive for `x != 0`.
pub fn log_h(a_tilde: f64, c_tilde: f64, x: f64, psi: f64) -> Result<f64> {
    if !(a_tilde > 0.0 && c_tilde > 0.0 && psi > 0.0) {
        return Err(Error::InvalidParameter(
            "H requires positive A~, C~, psi".into(),
        ));
    }
    if x == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let y = (2.0 * x / psi).abs();
    // ln(y sinh(pi y)/pi), overflow-safe: sinh(t) = e^t (1 - e^{-2t})/2.
    let log_recip = y.ln() + PI * y + ((1.0 - (-2.0 * PI * y).exp()) / 2.0).ln() - PI.ln();
    let la = log_abs_gamma_sq(Complex64::new(a_tilde / psi, x / psi))?;
    let lc = log_abs_gamma_sq(Complex64::new(c_tilde / psi, x / psi))?;
    Ok(la + lc + log_recip)
}

/// `H` itself (may overflow for large arguments; prefer [`log_h`]).
pub fn asymptotic_h(a_tilde: f64, c_tilde: f64, x: f64, psi: f64) -> Result<f64> {
    Ok(log_h(a_tilde, c_tilde, x, psi)?.exp())
}

/// First-order current correction at the triple point for `kappa = 1/2`:
///
/// ```text
///   F~(At, Ct) = (1/4) * int e^{-x^2/4} x^2 H(At,Ct;x) dx
///              / int e^{-x^2/4} H(At,Ct;x) dx,
/// ```
///
/// computed with log-sum-exp accumulation (the Gamma factors overflow
/// doubles already around `At/psi ~ 30`).
pub fn asymptotic_f_tilde(
    a_tilde: f64,
    c_tilde: f64,
    psi: f64,
    quad: &AsymptoticInputs,
) -> Result<f64> {
    let x_max = quad.half_width;
    let ratio_at = |h: f64| -> f64 {
        let steps = (x_max / h).ceil() as usize;
        let mut log_terms_den = Vec::with_capacity(steps);
        let mut log_terms_num = Vec::with_capacity(steps);
        for i in 0..steps {
            let x = (i as f64 + 0.5) * h;
            let lt = -x * x / 4.0 + log_h(a_tilde, c_tilde, x, psi).expect("log_h");
            log_terms_den.push(lt);
            log_terms_num.push(lt + 2.0 * x.ln());
        }
        let lse = |terms: &[f64]| -> (f64, f64) {
            let shift = terms.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            (shift, terms.iter().map(|&t| (t - shift).exp()).sum())
        };
        let (sh_n, s_n) = lse(&log_terms_num);
        let (sh_d, s_d) = lse(&log_terms_den);
        0.25 * (sh_n - sh_d).exp() * s_n / s_d
    };
    // Validate inputs once before the closure is used.
    log_h(a_tilde, c_tilde, 1.0, psi)?;
    Ok(step_halving_ratio(quad, ratio_at))
}

/// Leading-order expansions of the log-Pochhammer functions in the
/// `q = e^{-eps} -> 1` regime:
///
/// ```text
///   A+(eps, w) = -pi^2/(6 eps) - (w - 1/2) ln eps + (1/2) ln(2 pi) - ln Gamma(w),
///   A-(eps, w) =  pi^2/(12 eps) - (w - 1/2) ln 2,
/// ```
///
/// with `A+` the expansion of `ln (q^w; q)_inf` and `A-` that of
/// `ln (-q^w; q)_inf`.  Valid for `|Im w| <= 2/eps`.
pub fn ck_expansion(eps: f64, w: Complex64) -> Result<(Complex64, Complex64)> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("eps must be > 0".into()));
    }
    if w.im.abs() > 2.0 / eps {
        return Err(Error::Domain(format!(
            "|Im w| = {} exceeds 2/eps = {}",
            w.im.abs(),
            2.0 / eps
        )));
    }
    let a_plus = -PI * PI / (6.0 * eps) - (w - 0.5) * eps.ln()
        + 0.5 * (2.0 * PI).ln()
        - log_gamma(w)?;
    let a_minus = Complex64::new(PI * PI / (12.0 * eps), 0.0) - (w - 0.5) * 2.0f64.ln();
    Ok((a_plus, a_minus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact;
    use crate::params::liggett_params_from_targets;

    fn close(x: f64, y: f64, tol: f64) -> bool {
        (x - y).abs() <= tol
    }

    #[test]
    fn qpochhammer_basics() {
        let one = Complex64::new(1.0, 0.0);
        let r = qpochhammer(Complex64::new(0.0, 0.0), 0.7, 1e-12).unwrap();
        assert_eq!(r.value(), one);
        let r = qpochhammer(Complex64::new(0.3, 0.0), 0.0, 1e-12).unwrap();
        assert!((r.value() - Complex64::new(0.7, 0.0)).norm() < 1e-15);
        // Exact zero: the k = 0 factor vanishes at x = 1.
        let r = qpochhammer(one, 0.5, 1e-12).unwrap();
        assert!(r.is_zero);
        assert_eq!(r.value(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn qpochhammer_functional_equation() {
        // (x; q)_inf = (1 - x)(xq; q)_inf at (0.3, 0.7).
        let x = Complex64::new(0.3, 0.0);
        let q = 0.7;
        let lhs = qpochhammer(x, q, 1e-14).unwrap().value();
        let rhs = (Complex64::new(1.0, 0.0) - x)
            * qpochhammer(x * q, q, 1e-14).unwrap().value();
        assert!((lhs - rhs).norm() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn qpochhammer_tail_bound_honored() {
        let x = Complex64::new(0.6, 0.3);
        let q = 0.85;
        let r = qpochhammer(x, q, 1e-10).unwrap();
        // Recompute with extra terms directly.
        let mut log_sum = Complex64::new(0.0, 0.0);
        let mut qk = 1.0f64;
        for _ in 0..r.terms + 10 {
            log_sum += (Complex64::new(1.0, 0.0) - x * qk).ln();
            qk *= q;
        }
        assert!((log_sum - r.log_value).norm() <= r.tail_bound);
        assert!(r.tail_bound <= 1e-10);
    }

    #[test]
    fn log_gamma_factorials_and_identity() {
        let g1 = log_gamma(Complex64::new(1.0, 0.0)).unwrap().exp();
        assert!((g1 - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        let g5 = log_gamma(Complex64::new(5.0, 0.0)).unwrap().exp();
        assert!((g5 - Complex64::new(24.0, 0.0)).norm() < 1e-11);
        // 1/(Gamma(iy) Gamma(-iy)) = y sinh(pi y)/pi.
        for &y in &[0.5, 1.0, 2.0, 5.0] {
            let lg = log_gamma(Complex64::new(0.0, y)).unwrap()
                + log_gamma(Complex64::new(0.0, -y)).unwrap();
            let lhs = (-lg).exp().re;
            let rhs = y * (PI * y).sinh() / PI;
            assert!(
                (lhs - rhs).abs() < 1e-10 * rhs.max(1.0),
                "y={y}: {lhs} vs {rhs}"
            );
        }
        // At y = 1: sinh(pi)/pi ~ 3.67608.
        let lg = log_gamma(Complex64::new(0.0, 1.0)).unwrap()
            + log_gamma(Complex64::new(0.0, -1.0)).unwrap();
        assert!(close((-lg).exp().re, (PI).sinh() / PI, 1e-10));
        assert!(close((-lg).exp().re, 3.67608, 1e-5));
    }

    #[test]
    fn log_gamma_conjugate_product_positive_and_poles() {
        for &x in &[0.25f64, 0.5, 1.0, 2.5, 7.0] {
            for &y in &[0.1f64, 0.5, 1.0, 3.0] {
                let p = (log_gamma(Complex64::new(x, y)).unwrap()
                    + log_gamma(Complex64::new(x, -y)).unwrap())
                .exp();
                assert!(p.re > 0.0 && p.im.abs() < 1e-10 * p.re, "x={x} y={y}: {p}");
            }
        }
        assert!(log_gamma(Complex64::new(0.0, 0.0)).is_err());
        assert!(log_gamma(Complex64::new(-3.0, 0.0)).is_err());
    }

    #[test]
    fn contour_matches_exact_solver() {
        // Fixed point with A = 2/3, B = -1/2, C = 9/11, D = -1/2.
        for n in 2..=8usize {
            let p = BoundaryParams::new(0.55, 0.6, 0.225, 0.2, 0.5, n).unwrap();
            let g = exact::build_generator(&p).unwrap();
            let mu = exact::stationary(&g).unwrap();
            let j_exact = exact::stationary_current_exact(&mu, &p).unwrap();
            let j_contour = contour_current(&p, 1e-10).unwrap().j;
            assert!(
                close(j_contour, j_exact, 1e-8),
                "N={n}: contour {j_contour} vs exact {j_exact}"
            );
        }
        // TASEP-like point with A = C = 1/9, B = D = 0.
        let p = BoundaryParams::new(0.9, 0.9, 0.0, 0.0, 0.0, 4).unwrap();
        let g = exact::build_generator(&p).unwrap();
        let mu = exact::stationary(&g).unwrap();
        let j_exact = exact::stationary_current_exact(&mu, &p).unwrap();
        let j_contour = contour_current(&p, 1e-10).unwrap().j;
        assert!(close(j_contour, j_exact, 1e-8));
    }

    #[test]
    fn contour_refuses_near_unit_constants() {
        // At the exact triple point A = C = 1: no margin.
        let p = liggett_params_from_targets(1.0, 1.0, 0.5, 8).unwrap();
        assert!(contour_current(&p, 1e-8).is_err());
    }

    #[test]
    fn f_symmetry_monotonicity_and_limit() {
        let quad = AsymptoticInputs::default();
        let f12 = asymptotic_f(1.0, 2.0, &quad).unwrap();
        let f21 = asymptotic_f(2.0, 1.0, &quad).unwrap();
        assert!(close(f12, f21, 1e-12));
        let mut prev = 0.0;
        for &a in &[0.25, 0.5, 1.0, 2.0, 4.0] {
            let f = asymptotic_f(a, 1.0, &quad).unwrap();
            assert!(f > prev, "F not increasing at A~ = {a}");
            prev = f;
        }
        let f_big = asymptotic_f(50.0, 50.0, &quad).unwrap();
        assert!((1.45..=1.50).contains(&f_big), "F(50,50) = {f_big}");
    }

    #[test]
    fn h_positive_even_and_vanishing_at_zero() {
        assert_eq!(log_h(1.0, 1.0, 0.0, 1.0).unwrap(), f64::NEG_INFINITY);
        for &a in &[0.5, 1.0, 2.0] {
            for &c in &[0.5, 1.0, 2.0] {
                for &x in &[0.5, 1.0, 2.0] {
                    let lh = log_h(a, c, x, 1.0).unwrap();
                    assert!(lh.is_finite(), "H not positive at ({a},{c},{x})");
                    let lh_neg = log_h(a, c, -x, 1.0).unwrap();
                    assert!(close(lh, lh_neg, 1e-12 * lh.abs().max(1.0)));
                }
            }
        }
    }

    #[test]
    fn f_tilde_increasing_for_large_a() {
        let quad = AsymptoticInputs::default();
        let mut prev = 0.0;
        for &a in &[8.0, 16.0, 32.0] {
            let f = asymptotic_f_tilde(a, 1.0, 1.0, &quad).unwrap();
            assert!(f > prev, "F~ not increasing at A~ = {a}: {f} <= {prev}");
            prev = f;
        }
    }

    #[test]
    fn ck_expansion_values_and_domain() {
        let (_, a_minus) = ck_expansion(1.0, Complex64::new(1.0, 0.0)).unwrap();
        let expect = PI * PI / 12.0 - 0.5 * 2.0f64.ln();
        assert!(close(a_minus.re, expect, 1e-14));
        assert!(a_minus.im.abs() < 1e-14);
        let (a_plus, _) = ck_expansion(0.3, Complex64::new(2.0, 0.0)).unwrap();
        assert!(a_plus.im.abs() < 1e-12);
        assert!(ck_expansion(0.1, Complex64::new(0.0, 30.0)).is_err());
    }

    #[test]
    fn ck_expansion_matches_qpochhammer_near_one() {
        // ln (q; q)_inf at q = e^{-eps} vs A+(eps, 1).
        let eps: f64 = 0.05;
        let w = Complex64::new(1.0, 0.0);
        let q = (-eps).exp();
        let direct = qpochhammer(Complex64::new(q, 0.0), q, 1e-14)
            .unwrap()
            .log_value
            .re;
        let (a_plus, _) = ck_expansion(eps, w).unwrap();
        let envelope = 10.0 * (eps * 4.0 + eps.sqrt() * 2.0f64.powf(2.25));
        assert!(
            (direct - a_plus.re).abs() < envelope,
            "direct {direct} vs expansion {} (envelope {envelope})",
            a_plus.re
        );
    }
}
