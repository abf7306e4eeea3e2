//! Monte Carlo estimation of the ergodic sum rate.
//!
//! Every trial regenerates user positions and small-scale fading from its own
//! random stream `stream(seed, trial)`. Trial results are collected in trial
//! order and reduced sequentially, so a report is bit-identical for any
//! thread count.

use std::fmt;
use std::str::FromStr;

use crate::channel::{
    build_correlation, draw_channel, sample_placement, stream, CorrelationModel, UserPlacement,
};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::parallel::Exec;
use crate::rate_approx::{approx_rate_with, SelectionRule};
use crate::selection::{default_alpha_grid, select_lus, select_rus, select_sus, solve_kstar_with, KStarResult, SusParams};
use crate::zf::{evaluate_link, zf_precode};

/// Discard fraction above which a report is flagged.
pub const DISCARD_WARN_FRACTION: f64 = 1e-4;

/// A concrete per-slot selection rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    /// K users uniformly at random.
    Random(usize),
    /// The K users nearest to the base station.
    Nearest(usize),
    /// Greedy semi-orthogonal selection on estimated channels of all N candidates.
    SemiOrthogonal { alpha: f64 },
}

impl Policy {
    /// The pre-log for a decision serving `k` users.
    pub fn prelog(&self, cfg: &SystemConfig, k: usize) -> f64 {
        match self {
            // every candidate sends pilots
            Policy::SemiOrthogonal { .. } => cfg.prelog(cfg.num_candidates),
            _ => cfg.prelog(k),
        }
    }

    /// Per-slot selection probability of each candidate given the positions,
    /// when the rule fixes it.
    pub fn selection_probability(&self, cfg: &SystemConfig, placement: &UserPlacement) -> Option<Vec<f64>> {
        let n = cfg.num_candidates;
        match *self {
            Policy::Random(k) => Some(vec![k as f64 / n as f64; n]),
            Policy::Nearest(k) => {
                let mut p = vec![0.0; n];
                for i in select_lus(k, placement) {
                    p[i] = 1.0;
                }
                Some(p)
            }
            Policy::SemiOrthogonal { .. } => None,
        }
    }

    fn check(&self, cfg: &SystemConfig) -> Result<()> {
        let k = match *self {
            Policy::Random(k) | Policy::Nearest(k) => k,
            Policy::SemiOrthogonal { alpha } => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(Error::InvalidArgument(format!("alpha_sus {alpha} outside (0, 1]")));
                }
                return Ok(());
            }
        };
        if k == 0 || k > cfg.num_antennas || k > cfg.num_candidates {
            return Err(Error::InvalidArgument(format!(
                "cannot serve K={k} users with M={} antennas and N={} candidates",
                cfg.num_antennas, cfg.num_candidates
            )));
        }
        if k >= cfg.coherence_symbols {
            return Err(Error::InvalidArgument(format!("K={k} leaves no data symbols (T={})", cfg.coherence_symbols)));
        }
        Ok(())
    }
}

/// The schemes compared by the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// K*_RUS users at random.
    KStarRus,
    /// The K*_LUS nearest users.
    KStarLus,
    /// Conventional random selection of M users.
    Rus,
    /// Semi-orthogonal user selection with a tuned threshold.
    Sus,
    /// K users at random.
    FixedRus(usize),
    /// The K nearest users.
    FixedLus(usize),
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::KStarRus => "kstar-rus",
            Scheme::KStarLus => "kstar-lus",
            Scheme::Rus => "rus",
            Scheme::Sus => "sus",
            Scheme::FixedRus(_) => "k-rus",
            Scheme::FixedLus(_) => "k-lus",
        }
    }

    /// The same rule with the active count pinned to `k`.
    pub fn with_k(self, k: usize) -> Scheme {
        match self {
            Scheme::KStarRus | Scheme::Rus | Scheme::FixedRus(_) => Scheme::FixedRus(k),
            Scheme::KStarLus | Scheme::FixedLus(_) => Scheme::FixedLus(k),
            Scheme::Sus => Scheme::Sus,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::FixedRus(k) | Scheme::FixedLus(k) => write!(f, "{}:{}", self.name(), k),
            _ => f.write_str(self.name()),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    /// Accepts `kstar-rus`, `kstar-lus`, `rus`, `sus`, `k-rus:K`, `k-lus:K`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown scheme '{s}'"));
        match s {
            "kstar-rus" => Ok(Scheme::KStarRus),
            "kstar-lus" => Ok(Scheme::KStarLus),
            "rus" => Ok(Scheme::Rus),
            "sus" => Ok(Scheme::Sus),
            _ => {
                let (head, k) = s.split_once(':').ok_or_else(bad)?;
                let k: usize = k.parse().map_err(|_| bad())?;
                match head {
                    "k-rus" => Ok(Scheme::FixedRus(k)),
                    "k-lus" => Ok(Scheme::FixedLus(k)),
                    _ => Err(bad()),
                }
            }
        }
    }
}

/// Settings for tuning the semi-orthogonality threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SusTuning {
    pub grid: Vec<f64>,
    pub trials: usize,
}

impl Default for SusTuning {
    fn default() -> Self {
        SusTuning { grid: default_alpha_grid(), trials: 1000 }
    }
}

/// A scheme bound to a configuration: the policy to simulate plus the
/// analytic side information that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScheme {
    pub scheme: Scheme,
    pub policy: Policy,
    pub kstar: Option<KStarResult>,
    /// Deterministic approximation at the chosen K, when one exists.
    pub approx_rate: Option<f64>,
    pub alpha_sus: Option<f64>,
}

impl ResolvedScheme {
    /// Active users per slot, when fixed by the scheme.
    pub fn k(&self) -> Option<usize> {
        match self.policy {
            Policy::Random(k) | Policy::Nearest(k) => Some(k),
            Policy::SemiOrthogonal { .. } => None,
        }
    }
}

fn fixed_approx(cfg: &SystemConfig, k: usize, rule: SelectionRule) -> Option<f64> {
    let corr = build_correlation(cfg.num_antennas, cfg.corr_coef).ok()?;
    approx_rate_with(cfg, &corr, k, rule).ok().map(|a| a.value)
}

pub fn resolve_scheme(cfg: &SystemConfig, scheme: Scheme, sus: &SusTuning, exec: Exec) -> Result<ResolvedScheme> {
    cfg.validate()?;
    let resolved = match scheme {
        Scheme::KStarRus | Scheme::KStarLus => {
            let rule = if scheme == Scheme::KStarRus { SelectionRule::Random } else { SelectionRule::Nearest };
            let ks = solve_kstar_with(cfg, rule, exec)?;
            let policy = match rule {
                SelectionRule::Random => Policy::Random(ks.k_star),
                SelectionRule::Nearest => Policy::Nearest(ks.k_star),
            };
            ResolvedScheme { scheme, policy, approx_rate: Some(ks.rate_at_kstar()), kstar: Some(ks), alpha_sus: None }
        }
        Scheme::Rus => ResolvedScheme {
            scheme,
            policy: Policy::Random(cfg.num_antennas),
            kstar: None,
            approx_rate: None,
            alpha_sus: None,
        },
        Scheme::FixedRus(k) => ResolvedScheme {
            scheme,
            policy: Policy::Random(k),
            kstar: None,
            approx_rate: fixed_approx(cfg, k, SelectionRule::Random),
            alpha_sus: None,
        },
        Scheme::FixedLus(k) => ResolvedScheme {
            scheme,
            policy: Policy::Nearest(k),
            kstar: None,
            approx_rate: fixed_approx(cfg, k, SelectionRule::Nearest),
            alpha_sus: None,
        },
        Scheme::Sus => {
            let (params, _) = tune_alpha_sus(cfg, &sus.grid, sus.trials, exec)?;
            ResolvedScheme {
                scheme,
                policy: Policy::SemiOrthogonal { alpha: params.alpha },
                kstar: None,
                approx_rate: None,
                alpha_sus: Some(params.alpha),
            }
        }
    };
    resolved.policy.check(cfg)?;
    Ok(resolved)
}

/// Outcome of one slot: who was served and at what rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub indices: Vec<usize>,
    /// Per-user rate in bits/s/Hz, pre-log applied.
    pub rates: Vec<f64>,
}

impl SlotOutcome {
    pub fn sum_rate(&self) -> f64 {
        self.rates.iter().sum()
    }
}

/// Selects, precodes and evaluates one slot for fixed positions. Returns
/// `Ok(None)` when the Gram matrix is too ill-conditioned to use.
pub fn run_slot<R: rand::Rng + ?Sized>(
    cfg: &SystemConfig,
    corr: &CorrelationModel,
    policy: &Policy,
    placement: &UserPlacement,
    rng: &mut R,
) -> Result<Option<SlotOutcome>> {
    let (indices, ch) = match *policy {
        Policy::Random(k) => {
            let idx = select_rus(k, cfg.num_candidates, rng);
            let ch = draw_channel(cfg, corr, &placement.distances_of(&idx), rng);
            (idx, ch)
        }
        Policy::Nearest(k) => {
            let idx = select_lus(k, placement);
            let ch = draw_channel(cfg, corr, &placement.distances_of(&idx), rng);
            (idx, ch)
        }
        Policy::SemiOrthogonal { alpha } => {
            let all = draw_channel(cfg, corr, &placement.radii, rng);
            let idx = select_sus(&all.g_hat, alpha, cfg.num_antennas);
            let ch = all.select_rows(&idx);
            (idx, ch)
        }
    };
    let pre = match zf_precode(&ch, cfg.tx_power_mw()) {
        Ok(p) => p,
        Err(Error::IllConditioned { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let link = evaluate_link(&ch, &pre, cfg);
    let prelog = policy.prelog(cfg, indices.len());
    let rates = link.per_user_rate.iter().map(|r| prelog * r).collect();
    Ok(Some(SlotOutcome { indices, rates }))
}

/// One independent trial: fresh positions, selection, fading and ZF.
pub fn run_trial(cfg: &SystemConfig, corr: &CorrelationModel, policy: &Policy, trial: u64) -> Result<Option<SlotOutcome>> {
    let mut rng = stream(cfg.seed, trial);
    let placement = sample_placement(cfg, &mut rng);
    run_slot(cfg, corr, policy, &placement, &mut rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub policy: Policy,
    pub trials: usize,
    pub discarded: usize,
    /// Mean sum rate, bits/s/Hz.
    pub mean: f64,
    pub stderr: f64,
    /// 95% confidence half-width, `1.96 * stderr`.
    pub ci95: f64,
    /// Mean number of served users.
    pub mean_active: f64,
    pub warning: bool,
}

impl SimulationReport {
    pub fn interval(&self) -> (f64, f64) {
        (self.mean - self.ci95, self.mean + self.ci95)
    }
}

pub fn ergodic_rate(cfg: &SystemConfig, policy: Policy, trials: usize, exec: Exec) -> Result<SimulationReport> {
    cfg.validate()?;
    policy.check(cfg)?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let corr = build_correlation(cfg.num_antennas, cfg.corr_coef)?;
    let outcomes = exec.map(trials, |t| {
        run_trial(cfg, &corr, &policy, t as u64).map(|o| o.map(|s| (s.sum_rate(), s.indices.len())))
    });

    let mut rates = Vec::with_capacity(trials);
    let mut active = 0usize;
    for o in outcomes {
        if let Some((r, k)) = o? {
            rates.push(r);
            active += k;
        }
    }
    let discarded = trials - rates.len();
    if rates.is_empty() {
        return Err(Error::IllConditioned { condition: f64::INFINITY });
    }
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let var = if rates.len() > 1 {
        rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let stderr = (var / n).sqrt();
    Ok(SimulationReport {
        policy,
        trials,
        discarded,
        mean,
        stderr,
        ci95: 1.96 * stderr,
        mean_active: active as f64 / n,
        warning: discarded as f64 / trials as f64 >= DISCARD_WARN_FRACTION,
    })
}

/// Picks the threshold with the best simulated sum rate, smallest on ties.
pub fn tune_alpha_sus(
    cfg: &SystemConfig,
    grid: &[f64],
    trials: usize,
    exec: Exec,
) -> Result<(SusParams, Vec<(f64, SimulationReport)>)> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("alpha_sus grid is empty".into()));
    }
    if grid.iter().any(|&a| !(a > 0.0 && a <= 1.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("alpha_sus grid must be increasing within (0, 1]".into()));
    }
    let mut results = Vec::with_capacity(grid.len());
    for &alpha in grid {
        results.push((alpha, ergodic_rate(cfg, Policy::SemiOrthogonal { alpha }, trials, exec)?));
    }
    let means: Vec<f64> = results.iter().map(|(_, r)| r.mean).collect();
    let best = crate::selection::argmax_first(&means).expect("grid is not empty");
    Ok((SusParams { alpha: grid[best] }, results))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    PowerDbm,
    Candidates,
    ActiveK,
    Rho,
    Delta,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::PowerDbm => "power_dbm",
            SweepAxis::Candidates => "candidates_n",
            SweepAxis::ActiveK => "active_k",
            SweepAxis::Rho => "rho",
            SweepAxis::Delta => "delta",
        }
    }

    /// The configuration at one sweep point; for `ActiveK` the configuration
    /// is unchanged and the scheme is pinned instead.
    pub fn apply(self, cfg: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut out = cfg.clone();
        let as_count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::InvalidArgument(format!("{} needs a positive integer, got {value}", self.name())))
            }
        };
        match self {
            SweepAxis::PowerDbm => out.tx_power_dbm = value,
            SweepAxis::Candidates => out.num_candidates = as_count()?,
            SweepAxis::ActiveK => {
                as_count()?;
            }
            SweepAxis::Rho => out.est_error = value,
            SweepAxis::Delta => out.corr_coef = value,
        }
        out.validate()?;
        Ok(out)
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power_dbm" => Ok(SweepAxis::PowerDbm),
            "candidates_n" => Ok(SweepAxis::Candidates),
            "active_k" => Ok(SweepAxis::ActiveK),
            "rho" => Ok(SweepAxis::Rho),
            "delta" => Ok(SweepAxis::Delta),
            _ => Err(Error::InvalidArgument(format!("unknown sweep axis '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub scheme: Scheme,
    pub outcome: Result<(ResolvedScheme, SimulationReport)>,
}

/// Runs every scheme at every axis value. A failing point is recorded in its
/// row and the sweep continues.
pub fn sweep(
    cfg: &SystemConfig,
    axis: SweepAxis,
    values: &[f64],
    schemes: &[Scheme],
    trials: usize,
    sus: &SusTuning,
    exec: Exec,
) -> Vec<SweepRow> {
    let mut rows = Vec::with_capacity(values.len() * schemes.len());
    for &value in values {
        for &scheme in schemes {
            let outcome = (|| {
                let point = axis.apply(cfg, value)?;
                let scheme = if axis == SweepAxis::ActiveK { scheme.with_k(value as usize) } else { scheme };
                let resolved = resolve_scheme(&point, scheme, sus, exec)?;
                let report = ergodic_rate(&point, resolved.policy, trials, exec)?;
                Ok((resolved, report))
            })();
            rows.push(SweepRow { value, scheme, outcome });
        }
    }
    rows
}

/// Distances of the first `k` candidates of one placement drawn from a
/// dedicated stream, for fixed-geometry experiments.
pub fn fixed_distances(cfg: &SystemConfig, k: usize) -> Vec<f64> {
    let mut rng = stream(cfg.seed, u64::MAX);
    let placement = sample_placement(&SystemConfig { num_candidates: k.max(1), ..cfg.clone() }, &mut rng);
    placement.radii[..k].to_vec()
}
