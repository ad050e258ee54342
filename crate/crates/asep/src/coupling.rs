//! Shared-clock couplings of exclusion processes.
//!
//! Every construction in this module consumes a single [`EventStream`] and
//! interprets each `(t, slot, u)` event in all coupled chains at once; no
//! product chains with separate randomness appear anywhere.  This makes the
//! pathwise identities (order preservation, the two-lattice current
//! identity, the class bookkeeping of the diminished projection) hold
//! exactly rather than in distribution.
//!
//! Chains with different boundary rates are coupled by thinning: each
//! boundary slot fires at the maximal rate over the ensemble and chain `i`
//! accepts the event iff `u <= rate_i / rate_max`.  Acceptance regions are
//! then nested, which is what preserves componentwise order for ordered
//! parameters.

use crate::engine::{
    apply_event, Configuration, CurrentLedger, Event, EventStream, Lattice, Slot,
};
use crate::params::BoundaryParams;
use crate::{Error, Result};
use rand::Rng;

// ---------------------------------------------------------------------------
// Basic coupling of binary chains
// ---------------------------------------------------------------------------

/// Several binary chains over one lattice, driven by one event stream.
#[derive(Debug, Clone)]
pub struct CoupledEnsemble {
    pub lattice: Lattice,
    pub params: Vec<BoundaryParams>,
    pub configs: Vec<Configuration>,
    pub ledgers: Vec<CurrentLedger>,
    q: f64,
    max_alpha: f64,
    max_gamma: f64,
    max_beta: f64,
    max_delta: f64,
}

impl CoupledEnsemble {
    pub fn new(
        lattice: Lattice,
        initials: Vec<Configuration>,
        params: Vec<BoundaryParams>,
    ) -> Result<Self> {
        if initials.len() != params.len() || initials.is_empty() {
            return Err(Error::InvalidParameter(
                "need one initial configuration per parameter set".into(),
            ));
        }
        let q = params[0].q;
        for p in &params {
            p.validate()?;
            if p.q != q {
                return Err(Error::InvalidParameter(
                    "all coupled chains must share the bias q".into(),
                ));
            }
        }
        for c in &initials {
            if c.lattice != lattice {
                return Err(Error::InvalidParameter(
                    "initial configuration lattice mismatch".into(),
                ));
            }
        }
        let ledgers = initials
            .iter()
            .map(|_| CurrentLedger::for_lattice(lattice))
            .collect();
        let fold = |f: fn(&BoundaryParams) -> f64| {
            params.iter().map(f).fold(0.0f64, |a, b| a.max(b))
        };
        Ok(CoupledEnsemble {
            lattice,
            max_alpha: fold(|p| p.alpha),
            max_gamma: fold(|p| p.gamma),
            max_beta: fold(|p| p.beta),
            max_delta: fold(|p| p.delta),
            params,
            configs: initials,
            ledgers,
            q,
        })
    }

    /// Event stream firing every slot at the ensemble-maximal rate.
    pub fn stream(&self, master_seed: u64, replica_index: u64) -> EventStream {
        EventStream::with_rates(
            self.lattice.active_edges(),
            1.0 + self.q,
            match self.lattice {
                Lattice::OpenSegment { .. } => vec![
                    (Slot::LeftIn, self.max_alpha),
                    (Slot::LeftOut, self.max_gamma),
                    (Slot::RightOut, self.max_beta),
                    (Slot::RightIn, self.max_delta),
                ],
                Lattice::HalfLineWindow { .. } => vec![
                    (Slot::LeftIn, self.max_alpha),
                    (Slot::LeftOut, self.max_gamma),
                ],
                Lattice::IntegerWindow { .. } => vec![],
            },
            master_seed,
            replica_index,
        )
    }

    /// Whether chain `i` accepts a boundary event with mark `u` (edge
    /// events are always shared).
    pub fn accepts(&self, i: usize, slot: Slot, u: f64) -> bool {
        let ratio = |r: f64, m: f64| m == 0.0 || u <= r / m;
        match slot {
            Slot::Edge(_) => true,
            Slot::LeftIn => ratio(self.params[i].alpha, self.max_alpha),
            Slot::LeftOut => ratio(self.params[i].gamma, self.max_gamma),
            Slot::RightOut => ratio(self.params[i].beta, self.max_beta),
            Slot::RightIn => ratio(self.params[i].delta, self.max_delta),
        }
    }

    /// Apply one event to every accepting chain.
    pub fn step(&mut self, ev: &Event) {
        for i in 0..self.configs.len() {
            if self.accepts(i, ev.slot, ev.u) {
                apply_event(&mut self.configs[i], &mut self.ledgers[i], ev, self.q);
            }
        }
    }

    /// Run until `horizon`.
    pub fn run_until(&mut self, horizon: f64, stream: &mut EventStream) {
        loop {
            let ev = stream.next_event();
            if ev.t > horizon {
                return;
            }
            self.step(&ev);
        }
    }
}

/// Componentwise domination `a(x) >= b(x)` for all sites.
pub fn dominates(a: &Configuration, b: &Configuration) -> bool {
    a.occupancy()
        .iter()
        .zip(b.occupancy().iter())
        .all(|(x, y)| x >= y)
}

/// Number of sites where the two configurations differ.
pub fn disagreement_count(a: &Configuration, b: &Configuration) -> usize {
    a.occupancy()
        .iter()
        .zip(b.occupancy().iter())
        .filter(|(x, y)| x != y)
        .count()
}

// ---------------------------------------------------------------------------
// Coalescence time from extremal starts
// ---------------------------------------------------------------------------

/// Outcome of a coalescence measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoalescenceOutcome {
    /// First event time after which the two extremal chains agree.
    Coalesced(f64),
    /// Still apart when the time cap was reached.
    Censored(f64),
}

impl CoalescenceOutcome {
    pub fn time_or_cap(&self) -> f64 {
        match *self {
            CoalescenceOutcome::Coalesced(t) | CoalescenceOutcome::Censored(t) => t,
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self, CoalescenceOutcome::Censored(_))
    }
}

/// Coalescence time of the all-full and all-empty starts under the basic
/// coupling: the first event time at which the two configurations are
/// identical (exact equality, maintained incrementally).
pub fn coalescence_time(
    p: &BoundaryParams,
    stream: &mut EventStream,
    cap: f64,
) -> Result<CoalescenceOutcome> {
    let lattice = Lattice::OpenSegment { n: p.n_sites };
    let mut hi = Configuration::full(lattice);
    let mut lo = Configuration::empty(lattice);
    let mut lhi = CurrentLedger::for_lattice(lattice);
    let mut llo = CurrentLedger::for_lattice(lattice);
    let mut disagreements = p.n_sites;
    let (first, last) = lattice.sites();
    loop {
        let ev = stream.next_event();
        if ev.t > cap {
            return Ok(CoalescenceOutcome::Censored(cap));
        }
        let touched: [i64; 2] = match ev.slot {
            Slot::Edge(x) => [x, x + 1],
            Slot::LeftIn | Slot::LeftOut => [first, first],
            Slot::RightOut | Slot::RightIn => [last, last],
        };
        let delta_before = touched_disagreement(&hi, &lo, touched);
        apply_event(&mut hi, &mut lhi, &ev, p.q);
        apply_event(&mut lo, &mut llo, &ev, p.q);
        let delta_after = touched_disagreement(&hi, &lo, touched);
        disagreements = disagreements + delta_after - delta_before;
        if disagreements == 0 {
            return Ok(CoalescenceOutcome::Coalesced(ev.t));
        }
    }
}

fn touched_disagreement(a: &Configuration, b: &Configuration, touched: [i64; 2]) -> usize {
    let mut d = (a.get(touched[0]) != b.get(touched[0])) as usize;
    if touched[1] != touched[0] {
        d += (a.get(touched[1]) != b.get(touched[1])) as usize;
    }
    d
}

// ---------------------------------------------------------------------------
// Censoring
// ---------------------------------------------------------------------------

/// Piecewise-constant, right-continuous schedule of blocked edges, built
/// before (and independently of) the run.
#[derive(Debug, Clone, Default)]
pub struct CensorSchedule {
    /// `(start_time, blocked edges)`, start times strictly increasing; the
    /// segment is in force on `[start, next_start)`.  Before the first
    /// start time nothing is blocked.
    segments: Vec<(f64, Vec<i64>)>,
}

impl CensorSchedule {
    pub fn empty() -> Self {
        CensorSchedule::default()
    }

    pub fn new(segments: Vec<(f64, Vec<i64>)>) -> Result<Self> {
        if !segments.windows(2).all(|w| w[0].0 < w[1].0) {
            return Err(Error::InvalidParameter(
                "censor segment start times must be strictly increasing".into(),
            ));
        }
        Ok(CensorSchedule { segments })
    }

    pub fn is_blocked(&self, t: f64, edge: i64) -> bool {
        let idx = self.segments.partition_point(|&(s, _)| s <= t);
        if idx == 0 {
            return false;
        }
        self.segments[idx - 1].1.contains(&edge)
    }
}

/// Like [`crate::engine::run`] but edge events on blocked edges are no-ops
/// (boundary slots are never censored).
pub fn censored_run(
    initial: &Configuration,
    p: &BoundaryParams,
    horizon: f64,
    schedule: &[f64],
    censor: &CensorSchedule,
    stream: &mut EventStream,
) -> Result<crate::engine::TrajectoryRecord> {
    if horizon < 0.0 {
        return Err(Error::InvalidParameter("horizon must be >= 0".into()));
    }
    let mut cfg = initial.clone();
    let mut ledger = CurrentLedger::for_lattice(cfg.lattice);
    let mut snapshots = Vec::with_capacity(schedule.len());
    let mut sched = schedule.iter().copied().peekable();
    let mut events: u64 = 0;
    loop {
        let ev = stream.next_event();
        if ev.t > horizon {
            break;
        }
        while let Some(&s) = sched.peek() {
            if s < ev.t {
                snapshots.push((s, cfg.clone()));
                sched.next();
            } else {
                break;
            }
        }
        let blocked = matches!(ev.slot, Slot::Edge(x) if censor.is_blocked(ev.t, x));
        if !blocked {
            apply_event(&mut cfg, &mut ledger, &ev, p.q);
            events += 1;
        }
    }
    for s in sched {
        if s <= horizon {
            snapshots.push((s, cfg.clone()));
        }
    }
    Ok(crate::engine::TrajectoryRecord {
        snapshots,
        final_config: cfg,
        ledger,
        tracked_path: Vec::new(),
        events_applied: events,
        final_time: horizon,
        budget_exceeded: false,
        window_escaped: false,
    })
}

// ---------------------------------------------------------------------------
// Extended disagreement process (full-line vs half-line chain)
// ---------------------------------------------------------------------------

/// Labels of the extended disagreement process between a full-line chain
/// `eta^Z` and a half-line chain `eta^N` (boundary rates `alpha`, `gamma`
/// at site 1), ordered `One > APrime > A > B > BPrime > Zero`.
///
/// Pair semantics `(eta^Z(x), eta^N(x))`:
/// `One = (1,1)`, `A = (1,0)`, `B = (0,1)`, `Zero = (0,0)`,
/// `APrime = (1,1)` marked, `BPrime = (0,0)` marked (the marks record an
/// annihilated `(A,B)` pair).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XiMod {
    One,
    APrime,
    A,
    B,
    BPrime,
    Zero,
}

impl XiMod {
    /// Priority rank: 0 highest (`One`) to 5 lowest (`Zero`).
    pub fn rank(self) -> u8 {
        match self {
            XiMod::One => 0,
            XiMod::APrime => 1,
            XiMod::A => 2,
            XiMod::B => 3,
            XiMod::BPrime => 4,
            XiMod::Zero => 5,
        }
    }

    /// Occupancy of the full-line marginal (`{A, APrime, One}` occupied).
    pub fn eta_z(self) -> u8 {
        matches!(self, XiMod::One | XiMod::APrime | XiMod::A) as u8
    }

    /// Occupancy of the half-line marginal (`{B, APrime, One}` occupied).
    pub fn eta_n(self) -> u8 {
        matches!(self, XiMod::One | XiMod::APrime | XiMod::B) as u8
    }
}

fn rank_to_label(rank: u8) -> XiMod {
    match rank {
        0 => XiMod::One,
        1 => XiMod::APrime,
        2 => XiMod::A,
        3 => XiMod::B,
        4 => XiMod::BPrime,
        _ => XiMod::Zero,
    }
}

/// Bulk update of a label pair under one edge event: sort by priority
/// (higher priority ends right under a rightward mark), except that an
/// adjacent `{A, B}` pair annihilates into the marked pair `(B', A')`
/// (rightward) or `(A', B')` (leftward).  Returns the new pair and whether
/// a mark was created.
pub fn sort_labels(a: XiMod, b: XiMod, rightward: bool) -> (XiMod, XiMod, bool) {
    if a == b {
        return (a, b, false);
    }
    let pair = (a, b);
    if pair == (XiMod::A, XiMod::B) || pair == (XiMod::B, XiMod::A) {
        return if rightward {
            (XiMod::BPrime, XiMod::APrime, true)
        } else {
            (XiMod::APrime, XiMod::BPrime, true)
        };
    }
    let (lo, hi) = if a.rank() < b.rank() {
        (a.rank(), b.rank())
    } else {
        (b.rank(), a.rank())
    };
    let (l, r) = if rightward { (hi, lo) } else { (lo, hi) };
    (rank_to_label(l), rank_to_label(r), false)
}

/// The extended disagreement process on an integer window containing the
/// special edge `{0, 1}`, with per-event current ledgers for both marginals
/// and the running counts needed for the pathwise current identity
///
/// ```text
///   J^N_t = J^Z_t + #B_t - #A_t          (sum over sites x >= 1),
/// ```
///
/// where `J^Z` counts net rightward crossings of the bond `{0, 1}` in the
/// full-line marginal and `J^N` counts the net inflow at site 1 of the
/// half-line marginal.
#[derive(Debug, Clone)]
pub struct ExtendedDisagreement {
    pub window: Lattice,
    labels: Vec<XiMod>,
    pub alpha: f64,
    pub gamma: f64,
    pub q: f64,
    /// Net rightward crossings of bond `{0,1}` by the full-line marginal.
    pub j_z: i64,
    /// Net particle inflow at site 1 of the half-line marginal.
    pub j_n: i64,
    /// Cumulative count of `APrime` marks created.
    pub marks_a: u64,
    /// Cumulative count of `BPrime` marks created.
    pub marks_b: u64,
}

impl ExtendedDisagreement {
    /// Common Bernoulli(rho) start: on `x >= 1` both marginals share the
    /// sampled value (labels `One`/`Zero`); on `x <= 0` only the full-line
    /// marginal is populated (labels `A`/`Zero`).
    pub fn new_bernoulli(
        halfwidth: i64,
        rho: f64,
        alpha: f64,
        gamma: f64,
        q: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if halfwidth < 2 {
            return Err(Error::InvalidParameter("halfwidth must be >= 2".into()));
        }
        let window = Lattice::IntegerWindow {
            left: -halfwidth,
            right: halfwidth,
        };
        let (lo, hi) = window.sites();
        let mut labels = Vec::with_capacity(window.n_sites());
        for x in lo..=hi {
            let occ = rng.gen::<f64>() < rho;
            labels.push(match (occ, x >= 1) {
                (true, true) => XiMod::One,
                (false, true) => XiMod::Zero,
                (true, false) => XiMod::A,
                (false, false) => XiMod::Zero,
            });
        }
        Ok(ExtendedDisagreement {
            window,
            labels,
            alpha,
            gamma,
            q,
            j_z: 0,
            j_n: 0,
            marks_a: 0,
            marks_b: 0,
        })
    }

    /// Event stream for this process: all active window edges plus the
    /// half-line boundary clocks at site 1.
    pub fn stream(&self, master_seed: u64, replica_index: u64) -> EventStream {
        EventStream::with_rates(
            self.window.active_edges(),
            1.0 + self.q,
            vec![(Slot::LeftIn, self.alpha), (Slot::LeftOut, self.gamma)],
            master_seed,
            replica_index,
        )
    }

    pub fn label(&self, x: i64) -> XiMod {
        let (lo, _) = self.window.sites();
        self.labels[(x - lo) as usize]
    }

    fn set(&mut self, x: i64, v: XiMod) {
        let (lo, _) = self.window.sites();
        let i = (x - lo) as usize;
        self.labels[i] = v;
    }

    /// Full-line marginal as a binary configuration over the window.
    pub fn project_z(&self) -> Configuration {
        let bits: Vec<u8> = self.labels.iter().map(|l| l.eta_z()).collect();
        Configuration::from_bits(self.window, &bits)
    }

    /// Half-line marginal over `x >= 1` (window sites below 1 are reported
    /// empty).
    pub fn project_n(&self) -> Configuration {
        let (lo, _) = self.window.sites();
        let bits: Vec<u8> = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| if lo + i as i64 >= 1 { l.eta_n() } else { 0 })
            .collect();
        Configuration::from_bits(self.window, &bits)
    }

    /// `#B - #A` over sites `x >= 1`.
    pub fn second_class_imbalance(&self) -> i64 {
        let (lo, _) = self.window.sites();
        self.labels
            .iter()
            .enumerate()
            .filter(|(i, _)| lo + *i as i64 >= 1)
            .map(|(_, l)| match l {
                XiMod::B => 1i64,
                XiMod::A => -1i64,
                _ => 0,
            })
            .sum()
    }

    /// Residual of the pathwise current identity; zero on every valid
    /// trajectory.
    pub fn current_identity_residual(&self) -> i64 {
        self.j_n - self.j_z - self.second_class_imbalance()
    }

    /// Apply one event.
    pub fn extended_step(&mut self, ev: &Event) {
        let right = ev.u <= 1.0 / (1.0 + self.q);
        match ev.slot {
            Slot::Edge(0) => {
                let a = self.label(0);
                let b = self.label(1);
                if right {
                    match (a, b) {
                        (XiMod::A, XiMod::Zero) => {
                            self.set(0, XiMod::Zero);
                            self.set(1, XiMod::A);
                            self.j_z += 1;
                        }
                        (XiMod::A, XiMod::B) => {
                            self.set(0, XiMod::Zero);
                            self.set(1, XiMod::One);
                            self.j_z += 1;
                        }
                        (XiMod::A, XiMod::BPrime) => {
                            self.set(0, XiMod::Zero);
                            self.set(1, XiMod::One);
                            self.j_z += 1;
                            // The half-line marginal gains a particle at 1.
                            self.j_n += 1;
                        }
                        _ => {}
                    }
                } else {
                    match (a, b) {
                        (XiMod::Zero, XiMod::APrime) | (XiMod::Zero, XiMod::One) => {
                            self.set(0, XiMod::A);
                            self.set(1, XiMod::B);
                            self.j_z -= 1;
                        }
                        (XiMod::Zero, XiMod::A) => {
                            self.set(0, XiMod::A);
                            self.set(1, XiMod::Zero);
                            self.j_z -= 1;
                        }
                        _ => {}
                    }
                }
            }
            Slot::Edge(x) => {
                let a = self.label(x);
                let b = self.label(x + 1);
                if a == b {
                    return;
                }
                let (l, r, marked) = sort_labels(a, b, right);
                self.set(x, l);
                self.set(x + 1, r);
                if marked {
                    self.marks_a += 1;
                    self.marks_b += 1;
                }
            }
            Slot::LeftIn => {
                let old = self.label(1);
                let new = match old {
                    XiMod::Zero | XiMod::BPrime | XiMod::B => XiMod::B,
                    XiMod::A | XiMod::APrime | XiMod::One => XiMod::One,
                };
                if old.eta_n() == 0 {
                    self.j_n += 1;
                }
                self.set(1, new);
            }
            Slot::LeftOut => {
                let old = self.label(1);
                let new = match old {
                    XiMod::BPrime | XiMod::B | XiMod::Zero => XiMod::Zero,
                    XiMod::APrime | XiMod::One | XiMod::A => XiMod::A,
                };
                if old.eta_n() == 1 {
                    self.j_n -= 1;
                }
                self.set(1, new);
            }
            _ => {}
        }
        debug_assert!(self.sites_left_of_one_valid());
    }

    fn sites_left_of_one_valid(&self) -> bool {
        let (lo, _) = self.window.sites();
        (lo..=0).all(|x| matches!(self.label(x), XiMod::A | XiMod::Zero))
    }
}

// ---------------------------------------------------------------------------
// Partially ordered multi-species open ASEP (the chi process)
// ---------------------------------------------------------------------------

/// Site labels of the partially ordered multi-species process: first-class
/// particles (`One`), holes (`Zero`), and second-class particles of types
/// -1 through 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChiAtom {
    Zero,
    TwoM1,
    Two0,
    Two1,
    Two2,
    Two3,
    Two4,
    Two5,
    One,
}

impl ChiAtom {
    /// Partial-order rank (types 0/1 and 3/4 share a rank: incomparable).
    pub fn rank(self) -> u8 {
        match self {
            ChiAtom::Zero => 0,
            ChiAtom::TwoM1 => 1,
            ChiAtom::Two0 | ChiAtom::Two1 => 2,
            ChiAtom::Two2 => 3,
            ChiAtom::Two3 | ChiAtom::Two4 => 4,
            ChiAtom::Two5 => 5,
            ChiAtom::One => 6,
        }
    }

    /// Disagreement value of the extremal pair `(eta1, eta2)`:
    /// 0 = both empty, 1 = both occupied, 2 = disagree.
    pub fn xi(self) -> u8 {
        match self {
            ChiAtom::Zero | ChiAtom::TwoM1 | ChiAtom::Two0 => 0,
            ChiAtom::Two1 | ChiAtom::Two2 | ChiAtom::Two3 => 2,
            ChiAtom::Two4 | ChiAtom::Two5 | ChiAtom::One => 1,
        }
    }

    /// Disagreement class of the stationary pair `(eta3, eta4)`.
    pub fn zeta_class(self) -> u8 {
        match self {
            ChiAtom::Zero | ChiAtom::TwoM1 | ChiAtom::Two1 => 0,
            ChiAtom::Two0 | ChiAtom::Two2 | ChiAtom::Two4 => 2,
            ChiAtom::Two3 | ChiAtom::Two5 | ChiAtom::One => 1,
        }
    }

    /// Whether this atom carries the annihilation mark (types -1 and 5).
    pub fn starred(self) -> bool {
        matches!(self, ChiAtom::TwoM1 | ChiAtom::Two5)
    }

    /// Second-class type index, if any (-1 to 5).
    pub fn second_class_type(self) -> Option<i8> {
        match self {
            ChiAtom::TwoM1 => Some(-1),
            ChiAtom::Two0 => Some(0),
            ChiAtom::Two1 => Some(1),
            ChiAtom::Two2 => Some(2),
            ChiAtom::Two3 => Some(3),
            ChiAtom::Two4 => Some(4),
            ChiAtom::Two5 => Some(5),
            _ => None,
        }
    }

    pub const ALL: [ChiAtom; 9] = [
        ChiAtom::Zero,
        ChiAtom::TwoM1,
        ChiAtom::Two0,
        ChiAtom::Two1,
        ChiAtom::Two2,
        ChiAtom::Two3,
        ChiAtom::Two4,
        ChiAtom::Two5,
        ChiAtom::One,
    ];
}

/// Encode a `(zeta_class, xi, starred)` triple into an atom.  The pairs
/// `(zeta, xi) in {(0,1), (1,0)}` are unreachable and rejected.
pub fn encode_chi(zeta_class: u8, xi: u8, starred: bool) -> Result<ChiAtom> {
    let atom = match (zeta_class, xi) {
        (0, 0) => {
            if starred {
                ChiAtom::TwoM1
            } else {
                ChiAtom::Zero
            }
        }
        (1, 1) => {
            if starred {
                ChiAtom::Two5
            } else {
                ChiAtom::One
            }
        }
        (2, 0) => ChiAtom::Two0,
        (0, 2) => ChiAtom::Two1,
        (2, 2) => ChiAtom::Two2,
        (1, 2) => ChiAtom::Two3,
        (2, 1) => ChiAtom::Two4,
        other => {
            return Err(Error::Domain(format!(
                "unreachable (zeta, xi) pair {other:?}"
            )))
        }
    };
    if starred && !atom.starred() && !matches!(atom, ChiAtom::Zero | ChiAtom::One) {
        return Err(Error::Domain(format!(
            "mark not representable on (zeta, xi) = ({zeta_class}, {xi})"
        )));
    }
    Ok(atom)
}

/// One exit of a second-class particle at site 1, logged for the
/// diminished projection: `true` for types 4 and 5, `false` for 1..3.
pub type ExitBit = bool;

/// The partially ordered multi-species open ASEP.
///
/// Four binary chains are carried explicitly as ground truth: `eta1, eta2`
/// (extremal starts, boundary rates `p`), `eta3` (rates `p`, typically
/// started from a stationarity-adjacent state) and `eta4` (rates `p2` with
/// `alpha' >= alpha`, `beta' >= beta`, `gamma' <= gamma`, `delta' <= delta`).
/// The labeled disagreement `zeta` of `(eta3, eta4)` is carried as a full
/// six-label array (its annihilation marks `A'`, `B'` still count as
/// disagreement sites for the atom encoding).  The atom array itself
/// evolves by sorting in the partial order, with the two incomparable
/// collisions producing the starred types -1 and 5; its `(zeta, xi)`
/// projection is asserted against the chains in debug builds.
#[derive(Debug, Clone)]
pub struct ChiProcess {
    pub n: usize,
    pub p: BoundaryParams,
    pub p2: BoundaryParams,
    atoms: Vec<ChiAtom>,
    zeta: Vec<XiMod>,
    pub eta1: Configuration,
    pub eta2: Configuration,
    pub eta3: Configuration,
    pub eta4: Configuration,
    /// Exit log at site 1 (chronological order; latest last).
    pub exits: Vec<ExitBit>,
    /// Class index of the diminished projection.
    pub m: i64,
    /// Scratch ledger shared by the four chains (currents not tracked).
    ledger: CurrentLedger,
}

/// Disagreement class of a labeled pair: 0 = both empty, 1 = both
/// occupied, 2 = disagreement site, where the marked labels `A'`, `B'`
/// remain class 2.
pub fn label_class(l: XiMod) -> u8 {
    match l {
        XiMod::Zero => 0,
        XiMod::One => 1,
        _ => 2,
    }
}

impl ChiProcess {
    /// Build from explicit chain states.  Requires the sandwich
    /// `eta1 >= eta3 >= eta2` componentwise and ordered parameters.
    pub fn from_chains(
        p: BoundaryParams,
        p2: BoundaryParams,
        eta1: Configuration,
        eta2: Configuration,
        eta3: Configuration,
        eta4: Configuration,
    ) -> Result<Self> {
        p.validate()?;
        p2.validate()?;
        if p.q != p2.q {
            return Err(Error::InvalidParameter("chains must share q".into()));
        }
        if !(p2.alpha >= p.alpha && p2.beta >= p.beta && p2.gamma <= p.gamma && p2.delta <= p.delta)
        {
            return Err(Error::InvalidParameter(
                "need alpha' >= alpha, beta' >= beta, gamma' <= gamma, delta' <= delta".into(),
            ));
        }
        if !(dominates(&eta1, &eta3) && dominates(&eta3, &eta2)) {
            return Err(Error::InvalidParameter(
                "need eta1 >= eta3 >= eta2 componentwise".into(),
            ));
        }
        let n = p.n_sites;
        let lattice = Lattice::OpenSegment { n };
        let mut atoms = Vec::with_capacity(n);
        let mut zeta = Vec::with_capacity(n);
        for x in 1..=n as i64 {
            let xi = xi_of(eta1.get(x), eta2.get(x));
            let z = match (eta3.get(x), eta4.get(x)) {
                (0, 0) => XiMod::Zero,
                (1, 1) => XiMod::One,
                (1, 0) => XiMod::A,
                _ => XiMod::B,
            };
            zeta.push(z);
            atoms.push(encode_chi(label_class(z), xi, false)?);
        }
        let m0 = atoms
            .iter()
            .filter(|a| matches!(a, ChiAtom::Two1 | ChiAtom::Two2 | ChiAtom::Two3))
            .count() as i64;
        Ok(ChiProcess {
            n,
            p,
            p2,
            atoms,
            zeta,
            eta1,
            eta2,
            eta3,
            eta4,
            exits: Vec::new(),
            m: m0,
            ledger: CurrentLedger::for_lattice(lattice),
        })
    }

    /// Standard start for coalescence-style runs: `eta1` full, `eta2`
    /// empty, `eta3 = eta4` from a common configuration.
    pub fn extremal(
        p: BoundaryParams,
        p2: BoundaryParams,
        middle: Configuration,
    ) -> Result<Self> {
        let lattice = Lattice::OpenSegment { n: p.n_sites };
        ChiProcess::from_chains(
            p,
            p2,
            Configuration::full(lattice),
            Configuration::empty(lattice),
            middle.clone(),
            middle,
        )
    }

    pub fn atom(&self, x: i64) -> ChiAtom {
        self.atoms[(x - 1) as usize]
    }

    pub fn atoms(&self) -> &[ChiAtom] {
        &self.atoms
    }

    /// Labeled disagreement of the stationary pair at site `x`.
    pub fn zeta(&self, x: i64) -> XiMod {
        self.zeta[(x - 1) as usize]
    }

    /// Event stream: edge clocks plus boundary slots at the maximal rates
    /// `alpha', gamma, beta', delta`.
    pub fn stream(&self, master_seed: u64, replica_index: u64) -> EventStream {
        EventStream::with_rates(
            Lattice::OpenSegment { n: self.n }.active_edges(),
            1.0 + self.p.q,
            vec![
                (Slot::LeftIn, self.p2.alpha),
                (Slot::LeftOut, self.p.gamma),
                (Slot::RightOut, self.p2.beta),
                (Slot::RightIn, self.p.delta),
            ],
            master_seed,
            replica_index,
        )
    }

    fn set_atom(&mut self, x: i64, a: ChiAtom) {
        self.atoms[(x - 1) as usize] = a;
    }

    /// Apply one event.
    pub fn chi_step(&mut self, ev: &Event) {
        let q = self.p.q;
        match ev.slot {
            Slot::Edge(x) => {
                let right = ev.u <= 1.0 / (1.0 + q);
                let a = self.atom(x);
                let b = self.atom(x + 1);
                if a != b {
                    let set = |s: &mut Self, l: ChiAtom, r: ChiAtom| {
                        s.set_atom(x, l);
                        s.set_atom(x + 1, r);
                    };
                    let pair = (a, b);
                    if pair == (ChiAtom::Two3, ChiAtom::Two4)
                        || pair == (ChiAtom::Two4, ChiAtom::Two3)
                    {
                        // Incomparable 3/4 collision: mark as types 2 and 5.
                        if right {
                            set(self, ChiAtom::Two2, ChiAtom::Two5);
                        } else {
                            set(self, ChiAtom::Two5, ChiAtom::Two2);
                        }
                    } else if pair == (ChiAtom::Two0, ChiAtom::Two1)
                        || pair == (ChiAtom::Two1, ChiAtom::Two0)
                    {
                        // Incomparable 0/1 collision: mark as types -1 and 2.
                        if right {
                            set(self, ChiAtom::TwoM1, ChiAtom::Two2);
                        } else {
                            set(self, ChiAtom::Two2, ChiAtom::TwoM1);
                        }
                    } else if a.rank() != b.rank() {
                        let (lo, hi) = if a.rank() < b.rank() { (a, b) } else { (b, a) };
                        // Rightward marks put higher ranks right.
                        if right {
                            set(self, lo, hi);
                        } else {
                            set(self, hi, lo);
                        }
                    }
                }
                let (zl, zr, _) =
                    sort_labels(self.zeta(x), self.zeta(x + 1), right);
                self.zeta[(x - 1) as usize] = zl;
                self.zeta[x as usize] = zr;
                for cfg in [&mut self.eta1, &mut self.eta2, &mut self.eta3, &mut self.eta4] {
                    apply_event(cfg, &mut self.ledger, ev, q);
                }
            }
            slot => {
                let site = match slot {
                    Slot::LeftIn | Slot::LeftOut => 1i64,
                    _ => self.n as i64,
                };
                let old = self.atom(site);
                // Thinned acceptance: the slot fires at the maximal rate
                // over {p, p2}; each chain accepts its own fraction.
                let (rate_p, rate_p2, max) = match slot {
                    Slot::LeftIn => (self.p.alpha, self.p2.alpha, self.p2.alpha),
                    Slot::LeftOut => (self.p.gamma, self.p2.gamma, self.p.gamma),
                    Slot::RightOut => (self.p.beta, self.p2.beta, self.p2.beta),
                    Slot::RightIn => (self.p.delta, self.p2.delta, self.p.delta),
                    Slot::Edge(_) => unreachable!(),
                };
                let acc_p = max == 0.0 || ev.u <= rate_p / max;
                let acc_p2 = max == 0.0 || ev.u <= rate_p2 / max;
                if acc_p {
                    apply_event(&mut self.eta1, &mut self.ledger, ev, q);
                    apply_event(&mut self.eta2, &mut self.ledger, ev, q);
                    apply_event(&mut self.eta3, &mut self.ledger, ev, q);
                }
                if acc_p2 {
                    apply_event(&mut self.eta4, &mut self.ledger, ev, q);
                }
                if acc_p || acc_p2 {
                    let full = acc_p && acc_p2;
                    let z = self.zeta(site);
                    let z_new = match (slot, full, acc_p2) {
                        // Both chains updated: marks are destroyed.
                        (Slot::LeftIn | Slot::RightIn, true, _) => XiMod::One,
                        (Slot::LeftOut | Slot::RightOut, true, _) => XiMod::Zero,
                        // Only the primed chain injects at the left.
                        (Slot::LeftIn, false, true) => match z {
                            XiMod::Zero | XiMod::BPrime | XiMod::B => XiMod::B,
                            XiMod::A | XiMod::APrime | XiMod::One => XiMod::One,
                        },
                        // Only the unprimed chain extracts at the left.
                        (Slot::LeftOut, false, false) => match z {
                            XiMod::One | XiMod::APrime | XiMod::B => XiMod::B,
                            XiMod::A | XiMod::BPrime | XiMod::Zero => XiMod::Zero,
                        },
                        // Only the primed chain extracts at the right.
                        (Slot::RightOut, false, true) => match z {
                            XiMod::One | XiMod::APrime | XiMod::A => XiMod::A,
                            XiMod::B | XiMod::BPrime | XiMod::Zero => XiMod::Zero,
                        },
                        // Only the unprimed chain injects at the right.
                        (Slot::RightIn, false, false) => match z {
                            XiMod::Zero | XiMod::BPrime | XiMod::A => XiMod::A,
                            XiMod::B | XiMod::APrime | XiMod::One => XiMod::One,
                        },
                        _ => unreachable!("acceptance nesting violated"),
                    };
                    self.zeta[(site - 1) as usize] = z_new;
                    let xi = xi_of(self.eta1.get(site), self.eta2.get(site));
                    let new = encode_chi(label_class(z_new), xi, false)
                        .expect("reachable pair");
                    self.set_atom(site, new);
                    self.record_boundary_bookkeeping(site, old, new);
                }
            }
        }
        debug_assert!(self.consistent());
    }

    fn record_boundary_bookkeeping(&mut self, site: i64, old: ChiAtom, new: ChiAtom) {
        let was_second = old.second_class_type().map_or(false, |t| t >= 1);
        let is_second = new.second_class_type().map_or(false, |t| t >= 1);
        if site == 1 && was_second && !is_second {
            // A second-class particle of type 1..5 exits at the left.
            let t = old.second_class_type().unwrap();
            self.exits.push(t >= 4);
        }
        if site == self.n as i64 && !is_second {
            if let Some(t) = old.second_class_type() {
                if (1..=3).contains(&t) {
                    // A type-1..3 particle is removed at the right: the
                    // diminished projection drops one class.
                    self.m -= 1;
                }
            }
        }
    }

    /// Class/disagreement consistency of the atom array against the
    /// explicitly carried chains: the atom's disagreement value matches
    /// `(eta1, eta2)`, its class matches the labeled disagreement, and the
    /// labeled disagreement projects back onto `(eta3, eta4)`.
    pub fn consistent(&self) -> bool {
        (1..=self.n as i64).all(|x| {
            let a = self.atom(x);
            let z = self.zeta(x);
            a.xi() == xi_of(self.eta1.get(x), self.eta2.get(x))
                && a.zeta_class() == label_class(z)
                && z.eta_z() == self.eta3.get(x)
                && z.eta_n() == self.eta4.get(x)
        })
    }
}

fn xi_of(e1: u8, e2: u8) -> u8 {
    match (e1, e2) {
        (0, 0) => 0,
        (1, 1) => 1,
        (1, 0) => 2,
        _ => panic!("extremal chains out of order"),
    }
}

// ---------------------------------------------------------------------------
// Diminished projection
// ---------------------------------------------------------------------------

/// Binary configuration on the integers with finitely many particles left
/// of / holes right of its class index: the diminished projection of a
/// [`ChiProcess`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiminishedState {
    /// Finite window of occupancies; sites left of `first_pos` are empty,
    /// sites at `first_pos + word.len()` and beyond are full.
    pub word: Vec<u8>,
    pub first_pos: i64,
    /// Class index: the state lies in the family indexed by `m`.
    pub m: i64,
}

impl DiminishedState {
    pub fn occupancy(&self, x: i64) -> u8 {
        if x < self.first_pos {
            0
        } else if x >= self.first_pos + self.word.len() as i64 {
            1
        } else {
            self.word[(x - self.first_pos) as usize]
        }
    }

    /// The unique class index implied by the occupancies (number of holes
    /// right of `n` equals number of particles at or left of `n`): equals
    /// `zeros(word) + first_pos - 1`.
    pub fn class(&self) -> i64 {
        let zeros = self.word.iter().filter(|&&v| v == 0).count() as i64;
        zeros + self.first_pos - 1
    }

    /// Ground state of class `m` (all empty at sites `<= m`, full above).
    pub fn ground(m: i64) -> Self {
        DiminishedState {
            word: Vec::new(),
            first_pos: m + 1,
            m,
        }
    }
}

/// Diminished projection of the current chi state: the exit log (latest
/// exit leftmost, types 4/5 mapped to 1, types 1..3 to 0) concatenated with
/// the in-system second-class particles in site order under the same map,
/// extended by zeros left / ones right and shifted so the configuration
/// lies in class `m`.
pub fn diminish(chi: &ChiProcess) -> DiminishedState {
    let mut word: Vec<u8> = chi.exits.iter().rev().map(|&b| b as u8).collect();
    for a in chi.atoms() {
        if let Some(t) = a.second_class_type() {
            if t >= 1 {
                word.push((t >= 4) as u8);
            }
        }
    }
    let zeros = word.iter().filter(|&&v| v == 0).count() as i64;
    let state = DiminishedState {
        word,
        first_pos: chi.m - zeros + 1,
        m: chi.m,
    };
    debug_assert_eq!(state.class(), state.m);
    state
}
