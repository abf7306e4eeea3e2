//! Adaptive Gauss-Legendre quadrature (15-point panels, recursive bisection).

use std::sync::OnceLock;

use crate::error::{Error, Result};

const ORDER: usize = 15;
const MAX_DEPTH: usize = 40;
const INITIAL_PANELS: usize = 8;

struct Rule {
    nodes: [f64; ORDER],
    weights: [f64; ORDER],
}

/// Legendre `P_n(x)` and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let mut nodes = [0.0; ORDER];
        let mut weights = [0.0; ORDER];
        for i in 0..ORDER {
            // Chebyshev-like initial guess, then Newton
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (ORDER as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(ORDER, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(ORDER, x);
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        Rule { nodes, weights }
    })
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let r = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    half * r.nodes.iter().zip(&r.weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>()
}

fn refine<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: usize) -> Result<f64> {
    let mid = 0.5 * (a + b);
    let left = panel(f, a, mid);
    let right = panel(f, mid, b);
    let split = left + right;
    if (split - whole).abs() <= tol {
        return Ok(split);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::NoConvergence { what: "adaptive quadrature", iterations: depth });
    }
    Ok(refine(f, a, mid, left, 0.5 * tol, depth + 1)? + refine(f, mid, b, right, 0.5 * tol, depth + 1)?)
}

/// Integrates `f` over `[a, b]` to `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let width = (b - a) / INITIAL_PANELS as f64;
    let bounds: Vec<(f64, f64)> = (0..INITIAL_PANELS)
        .map(|i| (a + width * i as f64, if i + 1 == INITIAL_PANELS { b } else { a + width * (i + 1) as f64 }))
        .collect();
    let coarse: Vec<f64> = bounds.iter().map(|&(lo, hi)| panel(&f, lo, hi)).collect();
    let estimate: f64 = coarse.iter().sum();
    let tol = abs_tol.max(rel_tol * estimate.abs());
    let per_panel = tol / INITIAL_PANELS as f64;
    let mut total = 0.0;
    for (&(lo, hi), &whole) in bounds.iter().zip(&coarse) {
        total += refine(&f, lo, hi, whole, per_panel, 0)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rule_is_exact_for_high_degree_polynomials() {
        let r = rule();
        assert_relative_eq!(r.weights.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
        // 15 points integrate degree 29 exactly
        let v = panel(&|x: f64| x.powi(28), -1.0, 1.0);
        assert_relative_eq!(v, 2.0 / 29.0, max_relative = 1e-12);
    }

    #[test]
    fn smooth_integrals() {
        let v = integrate(f64::sin, 0.0, std::f64::consts::PI, 1e-12, 0.0).unwrap();
        assert_relative_eq!(v, 2.0, epsilon = 1e-12);
        let v = integrate(|x: f64| (-x * x).exp(), -6.0, 6.0, 1e-13, 0.0).unwrap();
        assert_relative_eq!(v, std::f64::consts::PI.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn sharp_peak_is_resolved() {
        let w = 1e-3;
        let v = integrate(|x: f64| w / ((x - 0.3).powi(2) + w * w), 0.0, 1.0, 1e-10, 0.0).unwrap();
        let exact = (0.7f64 / w).atan() + (0.3f64 / w).atan();
        assert_relative_eq!(v, exact, epsilon = 1e-9);
    }

    #[test]
    fn empty_interval() {
        assert_eq!(integrate(|x| x, 2.0, 2.0, 1e-9, 0.0).unwrap(), 0.0);
    }
}
