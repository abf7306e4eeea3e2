//! Distance laws of users placed uniformly in the annulus `r_min <= r <= r_max`,
//! and of the k-th nearest of N such users.

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::hypergeometric::hyp2f1;
use crate::quadrature::integrate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    Unordered,
    /// k-th smallest of the N candidates, 1-based.
    OrderStatistic(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceLaw {
    pub r_min: f64,
    pub r_max: f64,
    pub candidates: usize,
    pub kind: DistanceKind,
}

/// `ln(n!)`.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// `ln B(k, N - k + 1) = ln((k-1)! (N-k)! / N!)`.
fn ln_beta_order(k: usize, n: usize) -> f64 {
    ln_factorial(k - 1) + ln_factorial(n - k) - ln_factorial(n)
}

impl DistanceLaw {
    pub fn unordered(cfg: &SystemConfig) -> Self {
        DistanceLaw { r_min: cfg.r_min, r_max: cfg.r_max, candidates: cfg.num_candidates, kind: DistanceKind::Unordered }
    }

    pub fn order_statistic(cfg: &SystemConfig, k: usize) -> Result<Self> {
        if k == 0 || k > cfg.num_candidates {
            return Err(Error::InvalidArgument(format!(
                "order statistic k={k} outside 1..={}",
                cfg.num_candidates
            )));
        }
        Ok(DistanceLaw {
            r_min: cfg.r_min,
            r_max: cfg.r_max,
            candidates: cfg.num_candidates,
            kind: DistanceKind::OrderStatistic(k),
        })
    }

    fn span(&self) -> f64 {
        self.r_max * self.r_max - self.r_min * self.r_min
    }

    /// CDF of a single uniformly placed user's distance.
    pub fn parent_cdf(&self, r: f64) -> f64 {
        ((r * r - self.r_min * self.r_min) / self.span()).clamp(0.0, 1.0)
    }

    pub fn parent_pdf(&self, r: f64) -> f64 {
        if r < self.r_min || r > self.r_max {
            0.0
        } else {
            2.0 * r / self.span()
        }
    }

    pub fn pdf(&self, r: f64) -> f64 {
        let parent = self.parent_pdf(r);
        let k = match self.kind {
            DistanceKind::Unordered => return parent,
            DistanceKind::OrderStatistic(k) => k,
        };
        if parent == 0.0 {
            return 0.0;
        }
        let n = self.candidates;
        let f = self.parent_cdf(r);
        let mut log = -ln_beta_order(k, n) + parent.ln();
        if k > 1 {
            if f == 0.0 {
                return 0.0;
            }
            log += (k - 1) as f64 * f.ln();
        }
        if n > k {
            if f == 1.0 {
                return 0.0;
            }
            log += (n - k) as f64 * (-f).ln_1p();
        }
        log.exp()
    }

    /// `E[d^alpha]` in closed form.
    pub fn moment(&self, alpha: f64) -> Result<f64> {
        match self.kind {
            DistanceKind::Unordered => Ok(moment_unordered(self.r_min, self.r_max, alpha)),
            DistanceKind::OrderStatistic(k) => {
                let z = 1.0 - (self.r_max / self.r_min).powi(2);
                Ok(self.r_min.powf(alpha)
                    * hyp2f1(k as f64, -alpha / 2.0, self.candidates as f64 + 1.0, z)?)
            }
        }
    }

    /// Expectation of `g(d)` by adaptive quadrature of the density.
    pub fn expect<G: Fn(f64) -> f64>(&self, g: G, abs_tol: f64, rel_tol: f64) -> Result<f64> {
        integrate(|r| g(r) * self.pdf(r), self.r_min, self.r_max, abs_tol, rel_tol)
    }

    /// `E[d^alpha]` by quadrature; the cross-check for [`DistanceLaw::moment`].
    pub fn moment_by_quadrature(&self, alpha: f64) -> Result<f64> {
        self.expect(|r| r.powf(alpha), 0.0, 1e-13)
    }
}

/// `2 (r_max^{a+2} - r_min^{a+2}) / ((a + 2)(r_max^2 - r_min^2))`.
pub fn moment_unordered(r_min: f64, r_max: f64, alpha: f64) -> f64 {
    2.0 * (r_max.powf(alpha + 2.0) - r_min.powf(alpha + 2.0))
        / ((alpha + 2.0) * (r_max * r_max - r_min * r_min))
}

/// Order-statistic moments `E[d_(k)^alpha]` for k = 1..=count.
pub fn order_moments(cfg: &SystemConfig, count: usize) -> Result<Vec<f64>> {
    (1..=count)
        .map(|k| DistanceLaw::order_statistic(cfg, k)?.moment(cfg.pathloss_exp))
        .collect()
}
