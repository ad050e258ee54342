//! Exact small-N computations on the full 2^N configuration space.
//!
//! Configurations of the `N`-site open segment are encoded as integers: bit
//! `x-1` of the index is the occupancy of site `x`.  The continuous-time
//! generator acts by nearest-neighbour swaps (`(1,0) -> (0,1)` at rate 1,
//! `(0,1) -> (1,0)` at rate `q`) and boundary flips (site 1 fills at rate
//! `alpha`, empties at rate `gamma`; site `N` empties at rate `beta`, fills
//! at rate `delta`).

use crate::params::BoundaryParams;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Largest supported system size for exact enumeration (16384 states).
pub const MAX_EXACT_SITES: usize = 14;

/// Largest state count handled by the dense LU stationary solver; beyond
/// this, power iteration on the uniformized chain is used.
const DENSE_SOLVE_CAP: usize = 4096;

/// Sparse rate matrix over the 2^N configuration space.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    pub n_sites: usize,
    pub n_states: usize,
    /// Outgoing transitions per state: `(target_state, rate)`, rate > 0.
    pub rows: Vec<Vec<(usize, f64)>>,
    /// Diagonal entries (negative total out-rate per state).
    pub diag: Vec<f64>,
}

impl GeneratorMatrix {
    /// Row-vector product `out = v G` (distribution evolution direction).
    pub fn left_mul(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n_states);
        for (o, (vi, di)) in out.iter_mut().zip(v.iter().zip(self.diag.iter())) {
            *o = vi * di;
        }
        for (s, row) in self.rows.iter().enumerate() {
            let vs = v[s];
            for &(t, r) in row {
                out[t] += vs * r;
            }
        }
    }

    /// Uniformization rate: the maximum total out-rate over states.
    pub fn uniformization_rate(&self) -> f64 {
        self.diag.iter().fold(0.0f64, |m, d| m.max(-d))
    }
}

/// Probability vector over all configurations, indexed by binary encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDist(pub Vec<f64>);

impl ExactDist {
    /// Dirac mass at one configuration.
    pub fn dirac(n_states: usize, state: usize) -> Self {
        let mut p = vec![0.0; n_states];
        p[state] = 1.0;
        ExactDist(p)
    }

    /// Product Bernoulli(rho) measure on `n_sites` sites.
    pub fn bernoulli(n_sites: usize, rho: f64) -> Self {
        let n_states = 1usize << n_sites;
        let mut p = vec![0.0; n_states];
        for (s, ps) in p.iter_mut().enumerate() {
            let k = (s as u64).count_ones() as i32;
            *ps = rho.powi(k) * (1.0 - rho).powi(n_sites as i32 - k);
        }
        ExactDist(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Assemble the generator for the `N`-site open segment.
pub fn build_generator(p: &BoundaryParams) -> Result<GeneratorMatrix> {
    p.validate()?;
    let n = p.n_sites;
    if n > MAX_EXACT_SITES {
        return Err(Error::SizeLimit(format!(
            "exact enumeration supports N <= {MAX_EXACT_SITES}, got {n}"
        )));
    }
    let n_states = 1usize << n;
    let mut rows = vec![Vec::with_capacity(n + 1); n_states];
    let mut diag = vec![0.0; n_states];
    for s in 0..n_states {
        let mut push = |t: usize, r: f64| {
            if r > 0.0 {
                rows[s].push((t, r));
                diag[s] -= r;
            }
        };
        // Bulk swaps across edges {x, x+1}, bits (x-1, x).
        for b in 0..n - 1 {
            let left = s >> b & 1;
            let right = s >> (b + 1) & 1;
            if left != right {
                let t = s ^ (0b11 << b);
                push(t, if left == 1 { 1.0 } else { p.q });
            }
        }
        // Left boundary (site 1, bit 0).
        if s & 1 == 0 {
            push(s | 1, p.alpha);
        } else {
            push(s & !1, p.gamma);
        }
        // Right boundary (site N, bit n-1).
        let hi = 1usize << (n - 1);
        if s & hi == 0 {
            push(s | hi, p.delta);
        } else {
            push(s & !hi, p.beta);
        }
    }
    Ok(GeneratorMatrix {
        n_sites: n,
        n_states,
        rows,
        diag,
    })
}

/// Solve `mu G = 0`, normalized.
///
/// Up to 4096 states, a dense LU solve of the transposed balance equations
/// (one equation replaced by the normalization constraint) is used and the
/// diagonal of `U` gives a cheap conditioning proxy.  Beyond that, power
/// iteration on the uniformized chain `P = I + G/Lambda` is used.  Either
/// way the residual `||mu G||_inf` is checked to be below 1e-12.
pub fn stationary(g: &GeneratorMatrix) -> Result<ExactDist> {
    let n = g.n_states;
    let mut mu = if n <= DENSE_SOLVE_CAP {
        // Columns of M are the balance equations: M[t][s] = G[s][t].
        let mut m = DMatrix::<f64>::zeros(n, n);
        for s in 0..n {
            m[(s, s)] = g.diag[s];
        }
        for (s, row) in g.rows.iter().enumerate() {
            for &(t, r) in row {
                m[(t, s)] += r;
            }
        }
        // Replace the last balance equation with normalization.
        for s in 0..n {
            m[(n - 1, s)] = 1.0;
        }
        let mut rhs = DVector::<f64>::zeros(n);
        rhs[n - 1] = 1.0;
        let lu = m.lu();
        let sol = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Convergence("singular balance system".into()))?;
        sol.iter().copied().collect::<Vec<f64>>()
    } else {
        power_iteration_stationary(g)?
    };
    // Clean tiny negative round-off and renormalize.
    let mut total = 0.0;
    for x in mu.iter_mut() {
        if *x < 0.0 {
            if *x < -1e-12 {
                return Err(Error::Convergence(format!(
                    "stationary solve produced negative mass {x}"
                )));
            }
            *x = 0.0;
        }
        total += *x;
    }
    for x in mu.iter_mut() {
        *x /= total;
    }
    let mut res = vec![0.0; n];
    g.left_mul(&mu, &mut res);
    let rmax = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if rmax > 1e-12 {
        return Err(Error::Convergence(format!(
            "stationary residual {rmax:.3e} exceeds 1e-12"
        )));
    }
    Ok(ExactDist(mu))
}

fn power_iteration_stationary(g: &GeneratorMatrix) -> Result<Vec<f64>> {
    let n = g.n_states;
    let lambda = g.uniformization_rate();
    let mut mu = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..2_000_000 {
        g.left_mul(&mu, &mut next);
        let mut delta = 0.0f64;
        for (m, nx) in mu.iter_mut().zip(next.iter()) {
            let new = *m + *nx / lambda;
            delta = delta.max((new - *m).abs());
            *m = new;
        }
        if delta < 1e-16 {
            return Ok(mu);
        }
    }
    Err(Error::Convergence(
        "power iteration did not reach fixed point".into(),
    ))
}

/// Exact stationary current across the bond {1, 2}:
/// `J_N = mu(eta(1)=1, eta(2)=0) - q mu(eta(1)=0, eta(2)=1)`.
///
/// For N = 1 there is no bulk bond and the equivalent boundary inflow
/// `alpha mu(eta(1)=0) - gamma mu(eta(1)=1)` is returned instead.
pub fn stationary_current_exact(mu: &ExactDist, p: &BoundaryParams) -> Result<f64> {
    if p.n_sites == 1 {
        return Ok(p.alpha * mu.0[0] - p.gamma * mu.0[1]);
    }
    let mut forward = 0.0;
    let mut backward = 0.0;
    for (s, &w) in mu.0.iter().enumerate() {
        match s & 0b11 {
            0b01 => forward += w,
            0b10 => backward += w,
            _ => {}
        }
    }
    Ok(forward - p.q * backward)
}

/// Evolve a distribution for time `t` by uniformization.
///
/// With `Lambda` the uniformization rate and `P = I + G/Lambda`, the result
/// is `sum_k Poisson(Lambda t)(k) * d0 P^k`, truncated once the accumulated
/// Poisson mass reaches `1 - tol`; the discarded tail has total variation
/// mass at most `tol`.
pub fn evolve(d0: &ExactDist, g: &GeneratorMatrix, t: f64, tol: f64) -> Result<ExactDist> {
    if t < 0.0 {
        return Err(Error::InvalidParameter("t must be >= 0".into()));
    }
    if t == 0.0 {
        return Ok(d0.clone());
    }
    let n = g.n_states;
    let lambda = g.uniformization_rate();
    let lt = lambda * t;
    let mut cur = d0.0.clone();
    let mut tmp = vec![0.0; n];
    let mut out = vec![0.0; n];
    // Poisson weights accumulated in the log domain to avoid overflow.
    let mut log_w = -lt; // ln Poisson(lt)(0)
    let mut cum = 0.0f64;
    let mut k: u64 = 0;
    loop {
        let w = log_w.exp();
        cum += w;
        if w > 0.0 {
            for (o, c) in out.iter_mut().zip(cur.iter()) {
                *o += w * c;
            }
        }
        if cum >= 1.0 - tol {
            break;
        }
        if k > 50_000_000 {
            return Err(Error::Convergence("uniformization truncation runaway".into()));
        }
        // cur := cur P = cur + (cur G)/Lambda
        g.left_mul(&cur, &mut tmp);
        for (c, d) in cur.iter_mut().zip(tmp.iter()) {
            *c += d / lambda;
        }
        k += 1;
        log_w += lt.ln() - (k as f64).ln();
    }
    // Renormalize the truncated sum.
    let total: f64 = out.iter().sum();
    for o in out.iter_mut() {
        *o /= total;
    }
    Ok(ExactDist(out))
}

/// Total variation distance `max_S |d(S) - d'(S)| = (1/2) sum |d - d'|`.
pub fn tv(d: &ExactDist, d2: &ExactDist) -> f64 {
    assert_eq!(d.len(), d2.len(), "tv: index sets differ");
    0.5 * d
        .0
        .iter()
        .zip(d2.0.iter())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
}

/// Result of an exact mixing-time computation.
#[derive(Debug, Clone, Copy)]
pub struct MixingResult {
    pub t_mix: f64,
    /// A Dirac initial state attaining the worst TV at the located time.
    pub worst_initial: usize,
    /// Worst-case TV at `t_mix` (just below epsilon).
    pub residual: f64,
}

/// Worst TV distance to `mu` over all Dirac initial states at time `t`.
pub fn worst_tv_at(g: &GeneratorMatrix, mu: &ExactDist, t: f64, tol: f64) -> (f64, usize) {
    (0..g.n_states)
        .into_par_iter()
        .map(|s| {
            let d = evolve(&ExactDist::dirac(g.n_states, s), g, t, tol).expect("evolve");
            (tv(&d, mu), s)
        })
        .reduce(
            || (f64::NEG_INFINITY, 0),
            |a, b| if b.0 > a.0 { b } else { a },
        )
}

/// Epsilon-mixing time: the infimum over `t` of the worst-over-initial-states
/// TV distance to stationarity dropping below `epsilon`, located by bracket
/// doubling followed by bisection to absolute tolerance `tol_t` (if
/// `tol_t <= 0`, the default `1e-3 * T_hi` is used).
pub fn mixing_time(p: &BoundaryParams, epsilon: f64, tol_t: f64) -> Result<MixingResult> {
    if !(0.0 < epsilon && epsilon < 1.0) {
        return Err(Error::InvalidParameter("epsilon must lie in (0,1)".into()));
    }
    let g = build_generator(p)?;
    let mu = stationary(&g)?;
    let evolve_tol = 1e-13;
    let mut hi = 1.0;
    let mut lo = 0.0;
    loop {
        let (w, _) = worst_tv_at(&g, &mu, hi, evolve_tol);
        if w < epsilon {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::Convergence("mixing-time bracket runaway".into()));
        }
    }
    let tol_t = if tol_t > 0.0 { tol_t } else { 1e-3 * hi };
    while hi - lo > tol_t {
        let mid = 0.5 * (lo + hi);
        let (w, _) = worst_tv_at(&g, &mu, mid, evolve_tol);
        if w < epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (residual, worst_initial) = worst_tv_at(&g, &mu, hi, evolve_tol);
    Ok(MixingResult {
        t_mix: hi,
        worst_initial,
        residual,
    })
}

/// Infinity-norm of `Ber_N(rho) G`: near zero iff the product Bernoulli(rho)
/// measure is stationary for the given parameters.
pub fn check_product_stationarity(p: &BoundaryParams, rho: f64) -> Result<f64> {
    let g = build_generator(p)?;
    let ber = ExactDist::bernoulli(p.n_sites, rho);
    let mut res = vec![0.0; g.n_states];
    g.left_mul(&ber.0, &mut res);
    Ok(res.iter().fold(0.0f64, |m, r| m.max(r.abs())))
}

/// Detailed-balance residual of the blocking measure on a finite window.
///
/// The window has `window` sites at positions `1..=window`, frozen empty to
/// the left and full to the right, with only internal swaps active (rate 1
/// rightward, rate `q` leftward).  Particle number is conserved, and within
/// each particle-number class the tilted measure
/// `pi(eta) ~ prod_x q^{-x eta(x)}` should satisfy detailed balance:
/// `pi(eta) * 1 = pi(eta^{x,x+1}) * q` for every rightward swap.  Returns
/// the maximum absolute residual over all swap pairs and all classes, with
/// `pi` normalized within each class.
pub fn check_blocking_reversibility(q: f64, window: usize) -> Result<f64> {
    if !(0.0 < q && q < 1.0) {
        return Err(Error::InvalidParameter("q must lie in (0,1)".into()));
    }
    if window == 0 || window > 12 {
        return Err(Error::SizeLimit("window must lie in 1..=12".into()));
    }
    let n_states = 1usize << window;
    // Unnormalized weights, computed in the log domain.
    let log_w: Vec<f64> = (0..n_states)
        .map(|s| {
            let mut lw = 0.0;
            for b in 0..window {
                if s >> b & 1 == 1 {
                    lw -= (b as f64 + 1.0) * q.ln();
                }
            }
            lw
        })
        .collect();
    // Class normalizers by particle number.
    let mut class_max = vec![f64::NEG_INFINITY; window + 1];
    for s in 0..n_states {
        let k = (s as u32).count_ones() as usize;
        class_max[k] = class_max[k].max(log_w[s]);
    }
    let mut class_z = vec![0.0f64; window + 1];
    for s in 0..n_states {
        let k = (s as u32).count_ones() as usize;
        class_z[k] += (log_w[s] - class_max[k]).exp();
    }
    let mut worst = 0.0f64;
    for s in 0..n_states {
        let k = (s as u32).count_ones() as usize;
        let pi_s = (log_w[s] - class_max[k]).exp() / class_z[k];
        for b in 0..window - 1 {
            if s >> b & 1 == 1 && s >> (b + 1) & 1 == 0 {
                let t = s ^ (0b11 << b);
                let pi_t = (log_w[t] - class_max[k]).exp() / class_z[k];
                worst = worst.max((pi_s * 1.0 - pi_t * q).abs());
            }
        }
    }
    Ok(worst)
}

/// Unnormalized single-site blocking marginal `q^{-x} / (1 + q^{-x})`: the
/// probability that the blocking measure centred at the origin occupies
/// site `x`.
pub fn blocking_marginal(q: f64, x: i64) -> f64 {
    // Written to avoid overflow for large |x|.
    let t = q.powi(x as i32);
    1.0 / (1.0 + t)
}
