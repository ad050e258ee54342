//! Experiment orchestration: flat key-value configs, deterministic replica
//! fan-out, CSV emission with provenance headers, and least-squares scaling
//! fits.
//!
//! Reproducibility contract: identical config + master seed produce
//! byte-identical CSV output.  Replicas are distributed over worker threads
//! but derive their randomness from `(master_seed, replica_index)` alone and
//! are aggregated in replica order, so output is independent of the worker
//! count.

use crate::coupling::{coalescence_time, CoalescenceOutcome, CoupledEnsemble, ExtendedDisagreement};
use crate::engine::{
    run, sample_bernoulli, second_class_halfwidth, seed_for, track_second_class, Configuration,
    EventStream, Lattice,
};
use crate::exact::{
    build_generator, mixing_time, stationary, stationary_current_exact, MAX_EXACT_SITES,
};
use crate::params::{effective_constants, BoundaryParams, ScalingSpec};
use crate::specialfn::{
    asymptotic_f, contour_current, AsymptoticInputs,
};
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Format a float with 17 significant digits (round-trippable for f64).
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Flat experiment configuration.  Parsed from `key = value` lines with `#`
/// comments; unknown keys are rejected to catch typos.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Strictly increasing system-size list.
    pub ns: Vec<usize>,
    /// Replica count per table point.
    pub replicas: u64,
    /// Total-variation threshold for mixing statistics.
    pub epsilon: f64,
    /// Master seed; every replica stream derives from it.
    pub master_seed: u64,
    /// Optional cap on applied events per run.
    pub event_budget: Option<u64>,
    /// Triple-point scaling family (used when explicit rates are absent).
    pub scaling: ScalingSpec,
    /// Explicit boundary rates; when set they override the scaling family.
    pub explicit: Option<(f64, f64, f64, f64, f64)>,
    /// Background density for second-class tracking / variance sweeps.
    pub rho: f64,
    /// Horizon grid for second-class sweeps.
    pub horizons: Vec<f64>,
    /// Coalescence cap as a multiple of `N^{3/2+kappa} / (1-q)`.
    pub cap_multiplier: f64,
    /// Current evaluation method: `exact`, `contour`, or `asymptotic`.
    pub method: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            ns: vec![32, 64, 128, 256],
            replicas: 100,
            epsilon: 0.25,
            master_seed: 1,
            event_budget: None,
            scaling: ScalingSpec::new(0.0, (2.0f64).ln(), 0.0, 0.0).expect("valid default"),
            explicit: None,
            rho: 0.5,
            horizons: vec![100.0, 200.0, 400.0, 800.0, 1600.0],
            cap_multiplier: 40.0,
            method: "exact".into(),
        }
    }
}

impl ExperimentConfig {
    /// Parse from flat key-value text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut kappa = cfg.scaling.kappa;
        let mut psi = cfg.scaling.psi;
        let mut a_tilde = cfg.scaling.a_tilde;
        let mut c_tilde = cfg.scaling.c_tilde;
        let mut rates: BTreeMap<&str, f64> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| Error::Config(format!("line {}: bad {what}", lineno + 1));
            match key {
                "ns" => {
                    cfg.ns = value
                        .split(',')
                        .map(|s| s.trim().parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad("ns list"))?;
                }
                "horizons" => {
                    cfg.horizons = value
                        .split(',')
                        .map(|s| s.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad("horizons list"))?;
                }
                "replicas" => cfg.replicas = value.parse().map_err(|_| bad("replicas"))?,
                "epsilon" => cfg.epsilon = value.parse().map_err(|_| bad("epsilon"))?,
                "seed" => cfg.master_seed = value.parse().map_err(|_| bad("seed"))?,
                "event_budget" => {
                    cfg.event_budget = Some(value.parse().map_err(|_| bad("event_budget"))?)
                }
                "rho" => cfg.rho = value.parse().map_err(|_| bad("rho"))?,
                "cap_multiplier" => {
                    cfg.cap_multiplier = value.parse().map_err(|_| bad("cap_multiplier"))?
                }
                "method" => cfg.method = value.to_string(),
                "kappa" => kappa = value.parse().map_err(|_| bad("kappa"))?,
                "psi" => psi = value.parse().map_err(|_| bad("psi"))?,
                "a_tilde" => a_tilde = value.parse().map_err(|_| bad("a_tilde"))?,
                "c_tilde" => c_tilde = value.parse().map_err(|_| bad("c_tilde"))?,
                "alpha" | "beta" | "gamma" | "delta" | "q" => {
                    let v: f64 = value.parse().map_err(|_| bad(key))?;
                    rates.insert(
                        match key {
                            "alpha" => "alpha",
                            "beta" => "beta",
                            "gamma" => "gamma",
                            "delta" => "delta",
                            _ => "q",
                        },
                        v,
                    );
                }
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key '{other}'",
                        lineno + 1
                    )))
                }
            }
        }
        if !rates.is_empty() {
            let get = |k: &str| -> Result<f64> {
                rates
                    .get(k)
                    .copied()
                    .ok_or_else(|| Error::Config(format!("explicit rates require '{k}'")))
            };
            cfg.explicit = Some((
                get("alpha")?,
                get("beta")?,
                get("gamma")?,
                get("delta")?,
                get("q")?,
            ));
        }
        cfg.scaling = ScalingSpec::new(kappa, psi, a_tilde, c_tilde)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas < 1 {
            return Err(Error::Config("replicas must be >= 1".into()));
        }
        if self.ns.is_empty() || !self.ns.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("ns must be a strictly increasing list".into()));
        }
        Ok(())
    }

    /// Boundary parameters for system size `n`: the explicit rates if
    /// given, otherwise the triple-point scaling family.
    pub fn params_for(&self, n: usize) -> Result<BoundaryParams> {
        match self.explicit {
            Some((alpha, beta, gamma, delta, q)) => {
                BoundaryParams::new(alpha, beta, gamma, delta, q, n)
            }
            None => crate::params::triple_point_family(&self.scaling, n),
        }
    }
}

// ---------------------------------------------------------------------------
// Table / CSV
// ---------------------------------------------------------------------------

/// A CSV table with a `# meta:` provenance header block.
#[derive(Debug, Clone)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            meta: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl Into<String>) {
        self.meta.push((key.to_string(), value.into()));
    }

    /// Standard provenance entries carried by every emitted table.
    pub fn provenance(&mut self, cfg: &ExperimentConfig) {
        self.meta("seed", cfg.master_seed.to_string());
        self.meta("build", build_id());
        self.meta(
            "event_budget",
            cfg.event_budget.map_or("none".into(), |b| b.to_string()),
        );
    }

    pub fn row(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len(), self.header.len(), "row width mismatch");
        self.rows.push(cells);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# meta: {k}={v}");
        }
        let _ = writeln!(out, "{}", self.header.join(","));
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.join(","));
        }
        out
    }
}

/// Build identifier embedded in table provenance.
pub fn build_id() -> String {
    format!("asep-{}", env!("CARGO_PKG_VERSION"))
}

// ---------------------------------------------------------------------------
// Least-squares fits
// ---------------------------------------------------------------------------

/// Ordinary-least-squares line fit, used on `(log N, log statistic)` pairs.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<FitResult> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidParameter(
            "fit requires at least two (x, y) points".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("degenerate fit abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(u, v)| v - (intercept + slope * u))
        .collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
        residuals,
    })
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Coalescence-time sweep over the configured size list, with a power-law
/// fit of the median against `N`.  Replicas exceeding the time cap are
/// reported as censored; a size with more than 5% censoring (or a
/// single-replica run) refuses the fit.
pub fn sweep_coalescence(cfg: &ExperimentConfig) -> Result<(Table, FitResult)> {
    cfg.validate()?;
    if cfg.replicas < 2 {
        return Err(Error::InvalidParameter(
            "coalescence fit requires at least 2 replicas".into(),
        ));
    }
    let mut table = Table::new(&[
        "N", "kappa", "psi", "A_tilde", "C_tilde", "replica", "seed", "tau_or_cap",
        "censored_flag",
    ]);
    table.provenance(cfg);
    let mut log_n = Vec::new();
    let mut log_med = Vec::new();
    let mut valid = true;
    for &n in &cfg.ns {
        let p = cfg.params_for(n)?;
        let cap = cfg.cap_multiplier * (n as f64).powf(1.5 + cfg.scaling.kappa) / (1.0 - p.q);
        let outcomes: Vec<CoalescenceOutcome> = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| {
                let ens = CoupledEnsemble::new(
                    Lattice::OpenSegment { n },
                    vec![
                        Configuration::full(Lattice::OpenSegment { n }),
                        Configuration::empty(Lattice::OpenSegment { n }),
                    ],
                    vec![p, p],
                )
                .expect("valid ensemble");
                let mut stream = ens.stream(cfg.master_seed, (n as u64) << 32 | r);
                coalescence_time(&p, &mut stream, cap).expect("finite cap")
            })
            .collect();
        let mut times = Vec::new();
        let mut censored = 0u64;
        for (r, o) in outcomes.iter().enumerate() {
            if o.is_censored() {
                censored += 1;
            } else {
                times.push(o.time_or_cap());
            }
            let seed = u64::from_le_bytes(
                seed_for(cfg.master_seed, (n as u64) << 32 | r as u64)[..8]
                    .try_into()
                    .unwrap(),
            );
            table.row(vec![
                n.to_string(),
                fmt_float(cfg.scaling.kappa),
                fmt_float(cfg.scaling.psi),
                fmt_float(cfg.scaling.a_tilde),
                fmt_float(cfg.scaling.c_tilde),
                r.to_string(),
                seed.to_string(),
                fmt_float(o.time_or_cap()),
                (o.is_censored() as u8).to_string(),
            ]);
        }
        let frac = censored as f64 / cfg.replicas as f64;
        if frac > 0.05 {
            valid = false;
            table.meta(
                &format!("warning_n{n}"),
                format!("censored fraction {frac:.3} exceeds 0.05"),
            );
            continue;
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        log_n.push((n as f64).ln());
        log_med.push(median(&times).ln());
    }
    table.meta("valid", if valid { "1" } else { "0" });
    if !valid {
        return Err(Error::InvalidParameter(
            "coalescence fit refused: censored fraction above 5% at some size".into(),
        ));
    }
    let fit = ols_fit(&log_n, &log_med)?;
    table.meta("fit_slope", fmt_float(fit.slope));
    table.meta("fit_intercept", fmt_float(fit.intercept));
    table.meta("fit_r_squared", fmt_float(fit.r_squared));
    Ok((table, fit))
}

/// Contour-integral current over the scaling family, reported as the
/// second-order correction `Delta_N = N (4 J_N / (1-q) - 1)` against its
/// quadrature target.
pub fn sweep_current_asymptotics(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let quad = AsymptoticInputs::default();
    let f_target = asymptotic_f(cfg.scaling.a_tilde, cfg.scaling.c_tilde, &quad)?;
    let mut table = Table::new(&[
        "N", "q", "J_contour", "delta_N", "F_target", "rel_gap", "valid",
    ]);
    table.provenance(cfg);
    table.meta("kappa", fmt_float(cfg.scaling.kappa));
    table.meta("psi", fmt_float(cfg.scaling.psi));
    for &n in &cfg.ns {
        let p = cfg.params_for(n)?;
        match contour_current(&p, 1e-12) {
            Ok(cc) => {
                let delta = n as f64 * (4.0 * cc.j / (1.0 - p.q) - 1.0);
                let gap = (delta - f_target).abs() / f_target.abs().max(f64::MIN_POSITIVE);
                table.row(vec![
                    n.to_string(),
                    fmt_float(p.q),
                    fmt_float(cc.j),
                    fmt_float(delta),
                    fmt_float(f_target),
                    fmt_float(gap),
                    "1".into(),
                ]);
            }
            Err(e) => {
                table.meta(&format!("error_n{n}"), e.to_string());
                table.row(vec![
                    n.to_string(),
                    fmt_float(p.q),
                    "nan".into(),
                    "nan".into(),
                    fmt_float(f_target),
                    "nan".into(),
                    "0".into(),
                ]);
            }
        }
    }
    Ok(table)
}

/// Per-size statistics of one variance sweep point.
#[derive(Debug, Clone, Copy)]
pub struct VariancePoint {
    pub n: usize,
    pub horizon: f64,
    pub mean: f64,
    pub variance: f64,
    pub expected_mean: f64,
}

/// Sample variance of the time-`T` boundary current on the product line
/// (`T = N^{3/2}/(1-q)`), from Bernoulli(rho) starts.
pub fn sweep_current_variance(cfg: &ExperimentConfig) -> Result<(Table, Vec<VariancePoint>)> {
    cfg.validate()?;
    let mut table = Table::new(&[
        "N", "T", "replicas", "mean_J", "var_J", "var_over_N", "expected_mean", "se_mean",
    ]);
    table.provenance(cfg);
    let mut points = Vec::new();
    for &n in &cfg.ns {
        let p = cfg.params_for(n)?;
        let horizon = (n as f64).powf(1.5) / (1.0 - p.q);
        let lattice = Lattice::OpenSegment { n };
        let currents: Vec<f64> = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| {
                let replica = (n as u64) << 32 | r;
                let mut stream = EventStream::new(lattice, &p, cfg.master_seed, replica);
                // Draw the initial condition from the stream's own RNG so
                // one seed fixes the whole replica.
                let initial = sample_bernoulli(lattice, cfg.rho, stream.rng_mut());
                let rec = run(&initial, &p, horizon, &[], &mut stream, cfg.event_budget)
                    .expect("valid run");
                rec.ledger.get(1) as f64
            })
            .collect();
        let m = currents.iter().sum::<f64>() / currents.len() as f64;
        let var = currents.iter().map(|j| (j - m) * (j - m)).sum::<f64>()
            / (currents.len() as f64 - 1.0).max(1.0);
        let expected = horizon * cfg.rho * (1.0 - cfg.rho) * (1.0 - p.q);
        points.push(VariancePoint {
            n,
            horizon,
            mean: m,
            variance: var,
            expected_mean: expected,
        });
        table.row(vec![
            n.to_string(),
            fmt_float(horizon),
            cfg.replicas.to_string(),
            fmt_float(m),
            fmt_float(var),
            fmt_float(var / n as f64),
            fmt_float(expected),
            fmt_float((var / currents.len() as f64).sqrt()),
        ]);
    }
    Ok((table, points))
}

/// Per-horizon statistics of one second-class sweep point.
#[derive(Debug, Clone, Copy)]
pub struct SecondClassPoint {
    pub horizon: f64,
    pub replicas_used: u64,
    pub mean: f64,
    pub variance: f64,
}

/// Second-class particle displacement on the integer lattice: one run per
/// replica, sampled at every configured horizon.  Runs whose influence cone
/// reaches the frozen window edge are excluded and reported.
pub fn sweep_second_class(
    cfg: &ExperimentConfig,
    q: f64,
) -> Result<(Table, Vec<SecondClassPoint>, Option<FitResult>)> {
    cfg.validate()?;
    if cfg.horizons.is_empty() {
        return Err(Error::Config("second-class sweep needs horizons".into()));
    }
    let mut horizons = cfg.horizons.clone();
    horizons.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let t_max = *horizons.last().unwrap();
    let halfwidth = second_class_halfwidth(cfg.rho, q, t_max, crate::engine::SECOND_CLASS_GUARD);
    let paths: Vec<Option<Vec<(f64, i64)>>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let lattice = Lattice::IntegerWindow {
                left: -halfwidth,
                right: halfwidth,
            };
            // Window lattices have no boundary slots; alpha/beta are dummies
            // that exist only to satisfy validation.
            let p = BoundaryParams::new(1.0, 1.0, 0.0, 0.0, q, lattice.n_sites())
                .expect("bulk-only params");
            let mut stream = EventStream::new(lattice, &p, cfg.master_seed, r);
            let rec = track_second_class(
                cfg.rho,
                q,
                t_max,
                &horizons,
                &mut stream,
                halfwidth,
                cfg.event_budget,
            )
            .expect("valid tracking run");
            if rec.window_escaped || rec.budget_exceeded {
                None
            } else {
                Some(rec.tracked_path)
            }
        })
        .collect();
    let excluded = paths.iter().filter(|p| p.is_none()).count() as u64;
    let mut table = Table::new(&["t", "replicas_used", "mean_Z", "var_Z", "expected_drift"]);
    table.provenance(cfg);
    table.meta("rho", fmt_float(cfg.rho));
    table.meta("q", fmt_float(q));
    table.meta("halfwidth", halfwidth.to_string());
    table.meta("excluded_replicas", excluded.to_string());
    let speed = (1.0 - q) * (1.0 - 2.0 * cfg.rho);
    let mut points = Vec::new();
    let mut log_t = Vec::new();
    let mut log_var = Vec::new();
    for &t in horizons.iter() {
        // tracked_path starts with the initial point (0, 0); look samples up
        // by time rather than by index.
        let zs: Vec<f64> = paths
            .iter()
            .flatten()
            .map(|path| {
                path.iter()
                    .find(|&&(s, _)| s == t)
                    .expect("sampled horizon present in tracked path")
                    .1 as f64
            })
            .collect();
        if zs.len() < 2 {
            return Err(Error::InvalidParameter(
                "too few surviving replicas for second-class statistics".into(),
            ));
        }
        let m = zs.iter().sum::<f64>() / zs.len() as f64;
        let var =
            zs.iter().map(|z| (z - m) * (z - m)).sum::<f64>() / (zs.len() as f64 - 1.0);
        points.push(SecondClassPoint {
            horizon: t,
            replicas_used: zs.len() as u64,
            mean: m,
            variance: var,
        });
        table.row(vec![
            fmt_float(t),
            zs.len().to_string(),
            fmt_float(m),
            fmt_float(var),
            fmt_float(speed * t),
        ]);
        if var > 0.0 {
            log_t.push(t.ln());
            log_var.push(var.ln());
        }
    }
    let fit = if log_t.len() >= 2 {
        let f = ols_fit(&log_t, &log_var)?;
        table.meta("var_exponent", fmt_float(f.slope));
        table.meta("var_exponent_r_squared", fmt_float(f.r_squared));
        Some(f)
    } else {
        None
    };
    Ok((table, points, fit))
}

/// Exact mixing times (small systems) paired with Monte Carlo coalescence
/// statistics at the same parameters.
pub fn mix_exact_table(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let mut table = Table::new(&[
        "N",
        "epsilon",
        "t_mix",
        "worst_initial_state",
        "residual",
        "tau_coal_median",
        "p_coal_le_tmix",
    ]);
    table.provenance(cfg);
    for &n in &cfg.ns {
        if n > MAX_EXACT_SITES {
            return Err(Error::SizeLimit(format!(
                "exact mixing requires N <= {MAX_EXACT_SITES}, got {n}"
            )));
        }
        let p = cfg.params_for(n)?;
        let mix = mixing_time(&p, cfg.epsilon, 0.0)?;
        let mut times: Vec<f64> = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| {
                let ens = CoupledEnsemble::new(
                    Lattice::OpenSegment { n },
                    vec![
                        Configuration::full(Lattice::OpenSegment { n }),
                        Configuration::empty(Lattice::OpenSegment { n }),
                    ],
                    vec![p, p],
                )
                .expect("valid ensemble");
                let mut stream = ens.stream(cfg.master_seed, (n as u64) << 32 | r);
                coalescence_time(&p, &mut stream, f64::INFINITY)
                    .expect("uncapped")
                    .time_or_cap()
            })
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let p_le = times.iter().filter(|&&t| t <= mix.t_mix).count() as f64
            / times.len() as f64;
        table.row(vec![
            n.to_string(),
            fmt_float(cfg.epsilon),
            fmt_float(mix.t_mix),
            mix.worst_initial.to_string(),
            fmt_float(mix.residual),
            fmt_float(median(&times)),
            fmt_float(p_le),
        ]);
    }
    Ok(table)
}

/// Exact stationary current table.
pub fn exact_current_table(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let mut table = Table::new(&["N", "alpha", "beta", "gamma", "delta", "q", "J_exact"]);
    table.provenance(cfg);
    for &n in &cfg.ns {
        if n > MAX_EXACT_SITES {
            return Err(Error::SizeLimit(format!(
                "exact current requires N <= {MAX_EXACT_SITES}, got {n}"
            )));
        }
        let p = cfg.params_for(n)?;
        let g = build_generator(&p)?;
        let mu = stationary(&g)?;
        let j = stationary_current_exact(&mu, &p)?;
        table.row(vec![
            n.to_string(),
            fmt_float(p.alpha),
            fmt_float(p.beta),
            fmt_float(p.gamma),
            fmt_float(p.delta),
            fmt_float(p.q),
            fmt_float(j),
        ]);
    }
    Ok(table)
}

/// Stationary current by the configured method (`exact`, `contour`, or
/// `asymptotic`), with effective constants and an error estimate.
pub fn current_table(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate()?;
    let mut table = Table::new(&[
        "N", "q", "A", "B", "C", "D", "J", "method", "est_error",
    ]);
    table.provenance(cfg);
    let quad = AsymptoticInputs::default();
    for &n in &cfg.ns {
        let p = cfg.params_for(n)?;
        let ec = effective_constants(&p)?;
        let (j, err) = match cfg.method.as_str() {
            "exact" => {
                if n > MAX_EXACT_SITES {
                    return Err(Error::SizeLimit(format!(
                        "exact method requires N <= {MAX_EXACT_SITES}, got {n}"
                    )));
                }
                let g = build_generator(&p)?;
                let mu = stationary(&g)?;
                (stationary_current_exact(&mu, &p)?, 1e-12)
            }
            "contour" => {
                let cc = contour_current(&p, 1e-12)?;
                (cc.j, cc.est_error)
            }
            "asymptotic" => {
                let f = asymptotic_f(cfg.scaling.a_tilde, cfg.scaling.c_tilde, &quad)?;
                let j = (1.0 - p.q) / 4.0 * (1.0 + f / n as f64);
                // Second-order expansion: the neglected term is o(1/N).
                (j, (1.0 - p.q) / (n as f64).powf(1.5))
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown method '{other}' (expected exact|contour|asymptotic)"
                )))
            }
        };
        table.row(vec![
            n.to_string(),
            fmt_float(p.q),
            fmt_float(ec.a),
            fmt_float(ec.b),
            fmt_float(ec.c),
            fmt_float(ec.d),
            fmt_float(j),
            cfg.method.clone(),
            fmt_float(err),
        ]);
    }
    Ok(table)
}

/// Self-check table for the special-function stack: internal identities
/// evaluated at reference points with pass/fail flags.
pub fn specialfn_check_table(cfg: &ExperimentConfig) -> Result<Table> {
    use crate::specialfn::{asymptotic_h, ck_expansion, log_gamma, qpochhammer};
    use num_complex::Complex64;
    let mut table = Table::new(&["check", "value", "reference", "abs_error", "pass"]);
    table.provenance(cfg);
    let mut push = |name: &str, value: f64, reference: f64, tol: f64| {
        let err = (value - reference).abs();
        table.row(vec![
            name.to_string(),
            fmt_float(value),
            fmt_float(reference),
            fmt_float(err),
            ((err <= tol) as u8).to_string(),
        ]);
    };
    // (x; q)_inf functional equation: (x;q) = (1-x)(qx;q).
    let q = 0.5;
    let x = Complex64::new(0.3, 0.2);
    let lhs = qpochhammer(x, q, 1e-14)?.value();
    let rhs = (Complex64::new(1.0, 0.0) - x) * qpochhammer(q * x, q, 1e-14)?.value();
    push("qpochhammer_functional_eq", (lhs - rhs).norm(), 0.0, 1e-12);
    // log Gamma recurrence at a complex point.
    let z = Complex64::new(2.5, 1.5);
    let rec = (log_gamma(z + 1.0)? - log_gamma(z)? - z.ln()).norm();
    push("log_gamma_recurrence", rec, 0.0, 1e-12);
    // Gamma(1/2) = sqrt(pi).
    let g_half = log_gamma(Complex64::new(0.5, 0.0))?.re.exp();
    push("gamma_half", g_half, std::f64::consts::PI.sqrt(), 1e-12);
    // F symmetry.
    let quad = AsymptoticInputs::default();
    let f12 = asymptotic_f(1.0, 2.0, &quad)?;
    let f21 = asymptotic_f(2.0, 1.0, &quad)?;
    push("f_symmetry", (f12 - f21).abs(), 0.0, 1e-12);
    // H positivity at a reference point.
    let h = asymptotic_h(1.0, 1.0, 1.0, 1.0)?;
    push("h_positive", if h > 0.0 { 1.0 } else { 0.0 }, 1.0, 0.0);
    // Boundary-value expansion at a benign point: recombining the two
    // branch values against a direct evaluation of their defining formulas.
    let eps = 0.05;
    let w = Complex64::new(1.25, 0.5);
    let (plus, minus) = ck_expansion(eps, w)?;
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let plus_ref = Complex64::new(-pi2 / (6.0 * eps), 0.0)
        - (w - 0.5) * Complex64::new(eps.ln(), 0.0)
        + 0.5 * (2.0 * std::f64::consts::PI).ln()
        - log_gamma(w)?;
    let minus_ref = Complex64::new(pi2 / (12.0 * eps), 0.0)
        - (w - 0.5) * Complex64::new(2.0f64.ln(), 0.0);
    push("expansion_plus", (plus - plus_ref).norm(), 0.0, 1e-12);
    push("expansion_minus", (minus - minus_ref).norm(), 0.0, 1e-12);
    Ok(table)
}

// ---------------------------------------------------------------------------
// Extended-disagreement current identity (harness-level wrapper)
// ---------------------------------------------------------------------------

/// Run the extended disagreement process and report the current-identity
/// residual at the given sample times; all residuals are exactly zero on
/// valid trajectories.
pub fn current_identity_residuals(
    rho: f64,
    alpha: f64,
    gamma: f64,
    q: f64,
    halfwidth: i64,
    sample_times: &[f64],
    master_seed: u64,
    replica: u64,
) -> Result<Vec<i64>> {
    let mut rng = ChaCha8Rng::from_seed(seed_for(master_seed, replica));
    let mut xd = ExtendedDisagreement::new_bernoulli(halfwidth, rho, alpha, gamma, q, &mut rng)?;
    let mut stream = xd.stream(master_seed, replica ^ 0x5eed_c0de);
    let mut out = Vec::with_capacity(sample_times.len());
    let mut times = sample_times.to_vec();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut idx = 0;
    loop {
        let ev = stream.next_event();
        while idx < times.len() && times[idx] < ev.t {
            out.push(xd.current_identity_residual());
            idx += 1;
        }
        if idx == times.len() {
            break;
        }
        xd.extended_step(&ev);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parse_defaults_overrides_and_errors() {
        let cfg = ExperimentConfig::parse(
            "# comment\nns = 4, 8\nreplicas = 7\nkappa = 0.25\npsi = 1.0\nseed = 42\n",
        )
        .unwrap();
        assert_eq!(cfg.ns, vec![4, 8]);
        assert_eq!(cfg.replicas, 7);
        assert_eq!(cfg.master_seed, 42);
        assert_eq!(cfg.scaling.kappa, 0.25);
        assert!(ExperimentConfig::parse("nonsense_key = 3\n").is_err());
        assert!(ExperimentConfig::parse("ns = 8, 4\n").is_err());
        // Explicit rates must be complete.
        assert!(ExperimentConfig::parse("alpha = 0.5\n").is_err());
        let cfg = ExperimentConfig::parse(
            "alpha = 0.5\nbeta = 0.5\ngamma = 0.25\ndelta = 0.25\nq = 0.5\nns = 6\n",
        )
        .unwrap();
        let p = cfg.params_for(6).unwrap();
        assert_eq!((p.alpha, p.q, p.n_sites), (0.5, 0.5, 6));
    }

    #[test]
    fn float_formatting_has_17_significant_digits() {
        let s = fmt_float(0.125);
        assert_eq!(s, "1.2500000000000000e-1");
        let x = std::f64::consts::PI;
        assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn ols_fit_recovers_exact_line_and_rejects_degenerate() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let fit = ols_fit(&x, &y).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!((fit.intercept + 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
        assert!(ols_fit(&[1.0], &[1.0]).is_err());
        assert!(ols_fit(&[2.0, 2.0], &[1.0, 3.0]).is_err());
    }

    #[test]
    fn exact_current_table_and_rerun_byte_identity() {
        let cfg = ExperimentConfig::parse(
            "alpha = 1.0\nbeta = 1.0\ngamma = 0.0\ndelta = 0.0\nq = 0.0\nns = 1,2,3\n",
        )
        .unwrap();
        let csv1 = exact_current_table(&cfg).unwrap().to_csv();
        let csv2 = exact_current_table(&cfg).unwrap().to_csv();
        assert_eq!(csv1, csv2);
        // Catalan ratio at N=1: J = 1/2.
        let row = csv1.lines().find(|l| l.starts_with("1,")).unwrap();
        let j: f64 = row.split(',').last().unwrap().parse().unwrap();
        assert!((j - 0.5).abs() < 1e-12);
        assert!(csv1.starts_with("# meta: seed="));
    }

    #[test]
    fn mix_exact_and_coalescence_reruns_are_deterministic() {
        let cfg = ExperimentConfig::parse(
            "alpha = 0.5\nbeta = 0.5\ngamma = 0.25\ndelta = 0.25\nq = 0.5\nns = 3\nreplicas = 20\nseed = 9\n",
        )
        .unwrap();
        let a = mix_exact_table(&cfg).unwrap().to_csv();
        let b = mix_exact_table(&cfg).unwrap().to_csv();
        assert_eq!(a, b);
        // Coalescence sweep determinism on a tiny instance.
        let mut cfg2 = cfg.clone();
        cfg2.ns = vec![3, 4];
        cfg2.cap_multiplier = 1e6;
        let (t1, f1) = sweep_coalescence(&cfg2).unwrap();
        let (t2, f2) = sweep_coalescence(&cfg2).unwrap();
        assert_eq!(t1.to_csv(), t2.to_csv());
        assert_eq!(f1.slope, f2.slope);
        // Single replica refuses the fit.
        cfg2.replicas = 1;
        assert!(sweep_coalescence(&cfg2).is_err());
    }

    #[test]
    fn current_table_methods_agree_on_small_system() {
        let base = "alpha = 0.55\nbeta = 0.6\ngamma = 0.225\ndelta = 0.2\nq = 0.5\nns = 4\n";
        let exact = {
            let cfg = ExperimentConfig::parse(&format!("{base}method = exact\n")).unwrap();
            current_table(&cfg).unwrap()
        };
        let contour = {
            let cfg = ExperimentConfig::parse(&format!("{base}method = contour\n")).unwrap();
            current_table(&cfg).unwrap()
        };
        let j = |t: &Table| t.rows[0][6].parse::<f64>().unwrap();
        assert!((j(&exact) - j(&contour)).abs() < 1e-8);
    }

    #[test]
    fn specialfn_check_all_pass() {
        let cfg = ExperimentConfig::default();
        let table = specialfn_check_table(&cfg).unwrap();
        for row in &table.rows {
            assert_eq!(row[4], "1", "check {} failed: {:?}", row[0], row);
        }
    }

    #[test]
    fn current_identity_wrapper_zero_residuals() {
        let residuals =
            current_identity_residuals(0.5, 0.55, 0.225, 0.5, 8, &[1.0, 2.0, 5.0], 3, 0)
                .unwrap();
        assert_eq!(residuals, vec![0, 0, 0]);
    }
}
