//! Expectations over a standard normal variable.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::{GaussHermite, GaussLegendre};

pub const DEFAULT_NODES: usize = 101;

/// `E[f(g)]`, `g ~ N(0,1)`, by `nodes`-point Gauss–Hermite after the
/// substitution `g = √2·x`. Accurate for smooth `f`.
pub fn hermite_expectation(nodes: usize, f: impl Fn(f64) -> f64) -> f64 {
    let rule = GaussHermite::new(NonZeroUsize::new(nodes.max(1)).expect("nonzero"));
    rule.integrate(|x| f(std::f64::consts::SQRT_2 * x)) / PI.sqrt()
}

/// Half-width of the integration window; the normal density is below
/// 1e-300 outside it.
const WINDOW: f64 = 38.0;
const PANEL_WIDTH: f64 = 0.5;
const PANEL_NODES: usize = 30;

/// `E[f(g)]` for `f` smooth between the given breakpoints, by composite
/// Gauss–Legendre with panel edges at every breakpoint.
pub fn piecewise_expectation(breakpoints: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let rule = GaussLegendre::new(NonZeroUsize::new(PANEL_NODES).expect("nonzero"));
    let mut edges = vec![-WINDOW, WINDOW];
    edges.extend(breakpoints.iter().copied().filter(|b| b.abs() < WINDOW));
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let panels = ((b - a) / PANEL_WIDTH).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            total += rule.integrate(lo, lo + h, |x| f(x) * density(x));
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_moments() {
        assert!((hermite_expectation(101, |_| 1.0) - 1.0).abs() < 1e-13);
        assert!((hermite_expectation(101, |g| g * g) - 1.0).abs() < 1e-12);
        assert!((hermite_expectation(101, |g| g.powi(4)) - 3.0).abs() < 1e-11);
        assert!((piecewise_expectation(&[0.0], |g| g * g) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn absolute_moment_needs_breakpoint() {
        let exact = (2.0 / PI).sqrt();
        assert!((piecewise_expectation(&[0.0], f64::abs) - exact).abs() < 1e-13);
    }
}
