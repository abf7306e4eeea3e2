//! Long-term fairness over windows of fixed large-scale fading.
//!
//! Within a window the candidate positions are frozen while the small-scale
//! fading is redrawn every slot. For each candidate the window yields a
//! selection probability `w_n` and a served rate `R_n` (its mean rate over
//! the slots in which it was active); Jain's index of the products `w_n R_n`
//! is the window's fairness. When the rule fixes `w_n` (random or nearest
//! selection) the exact value is used, otherwise the observed frequency.

use crate::channel::{build_correlation, sample_placement, stream};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::parallel::Exec;
use crate::sim::{run_slot, Policy};

/// Jain's index `(sum x)^2 / (n sum x^2)`; NaN when every entry is zero.
pub fn jain_index(x: &[f64]) -> f64 {
    let sum: f64 = x.iter().sum();
    let sq: f64 = x.iter().map(|v| v * v).sum();
    if sq == 0.0 {
        return f64::NAN;
    }
    sum * sum / (x.len() as f64 * sq)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairnessReport {
    pub policy: Policy,
    pub windows: usize,
    pub slots_per_window: usize,
    pub discarded_slots: usize,
    /// Mean per-window index.
    pub jfi_mean: f64,
    pub jfi_std: f64,
    /// Mean per-window index when `w_n R_n` is taken as the candidate's plain
    /// window-average rate (observed frequency times served rate).
    pub jfi_empirical_mean: f64,
    /// Long-run average rate of each candidate index over all slots.
    pub avg_rate: Vec<f64>,
    /// Long-run selection frequency of each candidate index.
    pub selection_freq: Vec<f64>,
}

struct WindowStats {
    jfi: f64,
    jfi_empirical: f64,
    rate_sum: Vec<f64>,
    served: Vec<usize>,
    slots_used: usize,
}

pub fn fairness(
    cfg: &SystemConfig,
    policy: Policy,
    windows: usize,
    slots_per_window: usize,
    exec: Exec,
) -> Result<FairnessReport> {
    cfg.validate()?;
    if windows == 0 || slots_per_window == 0 {
        return Err(Error::InvalidArgument("windows and slots_per_window must be positive".into()));
    }
    // same admissibility rules as the rate simulation
    crate::sim::ergodic_rate(cfg, policy, 1, Exec::Sequential)?;
    let corr = build_correlation(cfg.num_antennas, cfg.corr_coef)?;
    let n = cfg.num_candidates;

    let per_window = exec.map(windows, |w| -> Result<WindowStats> {
        let mut rng = stream(cfg.seed, w as u64);
        let placement = sample_placement(cfg, &mut rng);
        let mut rate_sum = vec![0.0; n];
        let mut served = vec![0usize; n];
        let mut slots_used = 0;
        for _ in 0..slots_per_window {
            if let Some(slot) = run_slot(cfg, &corr, &policy, &placement, &mut rng)? {
                slots_used += 1;
                for (&i, &r) in slot.indices.iter().zip(&slot.rates) {
                    rate_sum[i] += r;
                    served[i] += 1;
                }
            }
        }
        let slots = slots_used.max(1) as f64;
        let prob = policy
            .selection_probability(cfg, &placement)
            .unwrap_or_else(|| served.iter().map(|&s| s as f64 / slots).collect());
        let weighted: Vec<f64> = (0..n)
            .map(|i| if served[i] == 0 { 0.0 } else { prob[i] * rate_sum[i] / served[i] as f64 })
            .collect();
        let empirical: Vec<f64> = rate_sum.iter().map(|r| r / slots).collect();
        Ok(WindowStats {
            jfi: jain_index(&weighted),
            jfi_empirical: jain_index(&empirical),
            rate_sum,
            served,
            slots_used,
        })
    });

    let mut jfis = Vec::with_capacity(windows);
    let mut jfis_emp = Vec::with_capacity(windows);
    let mut rate_total = vec![0.0; n];
    let mut served_total = vec![0usize; n];
    let mut used = 0usize;
    for w in per_window {
        let w = w?;
        jfis.push(w.jfi);
        jfis_emp.push(w.jfi_empirical);
        used += w.slots_used;
        for i in 0..n {
            rate_total[i] += w.rate_sum[i];
            served_total[i] += w.served[i];
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let jfi_mean = mean(&jfis);
    let jfi_std = if windows > 1 {
        (jfis.iter().map(|j| (j - jfi_mean).powi(2)).sum::<f64>() / (windows - 1) as f64).sqrt()
    } else {
        0.0
    };
    let denom = used.max(1) as f64;
    Ok(FairnessReport {
        policy,
        windows,
        slots_per_window,
        discarded_slots: windows * slots_per_window - used,
        jfi_mean,
        jfi_std,
        jfi_empirical_mean: mean(&jfis_emp),
        avg_rate: rate_total.iter().map(|r| r / denom).collect(),
        selection_freq: served_total.iter().map(|&s| s as f64 / denom).collect(),
    })
}
