//! System parameters shared by the analytic and Monte Carlo paths.

use crate::error::{Error, Result};

/// Converts a power in dBm to milliwatts.
pub fn dbm_to_linear(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Scalar parameters of a single-cell TDD downlink.
///
/// Powers are kept in dBm as configured; [`SystemConfig::tx_power_mw`] and
/// [`SystemConfig::noise_power_mw`] give the linear values every formula uses.
/// `pathloss_ref` is the linear pathloss at 1 m, distances are in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub num_antennas: usize,
    pub num_candidates: usize,
    pub coherence_symbols: usize,
    pub tx_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub pathloss_ref: f64,
    pub pathloss_exp: f64,
    pub est_error: f64,
    pub corr_coef: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub seed: u64,
    pub trials: usize,
}

impl Default for SystemConfig {
    /// The reference operating point: M = 32, N = 64, T = 196, P = 30 dBm,
    /// noise -96 dBm, c = 10^-3.53, alpha = 3.76, annulus 35..250 m, perfect
    /// CSI, uncorrelated antennas.
    fn default() -> Self {
        SystemConfig {
            num_antennas: 32,
            num_candidates: 64,
            coherence_symbols: 196,
            tx_power_dbm: 30.0,
            noise_power_dbm: -96.0,
            pathloss_ref: 10f64.powf(-3.53),
            pathloss_exp: 3.76,
            est_error: 0.0,
            corr_coef: 0.0,
            r_min: 35.0,
            r_max: 250.0,
            seed: 0x5eed,
            trials: 10_000,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_antennas == 0 {
            return fail("num_antennas must be positive".into());
        }
        if self.num_candidates < self.num_antennas {
            return fail(format!(
                "num_candidates ({}) must be at least num_antennas ({})",
                self.num_candidates, self.num_antennas
            ));
        }
        if self.coherence_symbols == 0 {
            return fail("coherence_symbols must be positive".into());
        }
        if !self.tx_power_dbm.is_finite() || !self.noise_power_dbm.is_finite() {
            return fail("powers must be finite".into());
        }
        if !(self.pathloss_ref > 0.0 && self.pathloss_ref.is_finite()) {
            return fail("pathloss_ref must be positive".into());
        }
        if !(self.pathloss_exp > 0.0 && self.pathloss_exp.is_finite()) {
            return fail("pathloss_exp must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.est_error) {
            return fail(format!("est_error {} outside [0, 1]", self.est_error));
        }
        if !(0.0..1.0).contains(&self.corr_coef) {
            return fail(format!("corr_coef {} outside [0, 1)", self.corr_coef));
        }
        if !(self.r_min > 0.0 && self.r_max > self.r_min && self.r_max.is_finite()) {
            return fail(format!(
                "need 0 < r_min < r_max, got r_min={} r_max={}",
                self.r_min, self.r_max
            ));
        }
        if self.trials == 0 {
            return fail("trials must be positive".into());
        }
        Ok(())
    }

    pub fn tx_power_mw(&self) -> f64 {
        dbm_to_linear(self.tx_power_dbm)
    }

    pub fn noise_power_mw(&self) -> f64 {
        dbm_to_linear(self.noise_power_dbm)
    }

    /// Large-scale fading coefficient `c * d^-alpha`.
    pub fn pathloss(&self, distance: f64) -> f64 {
        self.pathloss_ref * distance.powf(-self.pathloss_exp)
    }

    /// Fraction of the coherence slot left for data after `k` pilot symbols.
    pub fn prelog(&self, k: usize) -> f64 {
        (1.0 - k as f64 / self.coherence_symbols as f64).max(0.0)
    }

    /// Checks that `k` active users are admissible for the analytic model
    /// (1 <= K < M and K < T).
    pub fn check_active(&self, k: usize) -> Result<()> {
        if k == 0 || k >= self.num_antennas {
            return Err(Error::InvalidArgument(format!(
                "active users K={} must satisfy 1 <= K < M={}",
                k, self.num_antennas
            )));
        }
        if k >= self.coherence_symbols {
            return Err(Error::InvalidArgument(format!(
                "active users K={} must be below T={}",
                k, self.coherence_symbols
            )));
        }
        Ok(())
    }
}
