//! Gauss hypergeometric function for the argument range used by the
//! order-statistic distance moments.

use crate::error::{Error, Result};

const MAX_TERMS: usize = 1_000_000;
const REL_STOP: f64 = 1e-15;

/// Plain power series, valid for `|z| < 1`.
fn series(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        sum += term;
        if term == 0.0 || term.abs() < REL_STOP * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::NoConvergence { what: "2F1 series", iterations: MAX_TERMS })
}

/// `2F1(a, b; c; z)` for `z < 1`.
///
/// Negative arguments go through the Pfaff transformation
/// `2F1(a, b; c; z) = (1 - z)^-b 2F1(c - a, b; c; z / (z - 1))`, which maps
/// `(-inf, 0)` onto `(0, 1)`.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if c <= 0.0 && c.fract() == 0.0 {
        return Err(Error::InvalidArgument(format!("2F1 undefined for c = {c}")));
    }
    if !(z < 1.0) {
        return Err(Error::InvalidArgument(format!("2F1 argument z = {z} not supported (need z < 1)")));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if z < 0.0 {
        let w = z / (z - 1.0);
        return Ok((1.0 - z).powf(-b) * series(c - a, b, c, w)?);
    }
    series(a, b, c, z)
}
