//! Composite trapezoid rules and Richardson checks.

/// Trapezoid rule over samples on a uniform grid of `[0, 1]`.
pub fn trapezoid_unit(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let h = 1.0 / (n - 1) as f64;
    trapezoid_uniform(samples, h)
}

/// Trapezoid rule over equally spaced samples with spacing `h`.
pub fn trapezoid_uniform(samples: &[f64], h: f64) -> f64 {
    match samples {
        [] | [_] => 0.0,
        [first, inner @ .., last] => h * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

/// Trapezoid rule of `f` on `[a, b]` with `n` panels.
pub fn trapezoid_fn(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n.max(1);
    let h = (b - a) / n as f64;
    let mut sum = 0.5 * (f(a) + f(b));
    for i in 1..n {
        sum += f(a + i as f64 * h);
    }
    sum * h
}

/// A trapezoid estimate together with its Richardson extrapolation from
/// the half-resolution rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RichardsonEstimate {
    pub value: f64,
    pub half_resolution: f64,
    pub extrapolated: f64,
}

impl RichardsonEstimate {
    /// `|value − extrapolated|`, the estimated error of `value`.
    pub fn error(&self) -> f64 {
        (self.value - self.extrapolated).abs()
    }
}

/// Trapezoid with `n` and `n/2` panels and the second-order Richardson
/// combination `(4 I_n − I_{n/2}) / 3`.
pub fn trapezoid_richardson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> RichardsonEstimate {
    let n = n.max(2) & !1;
    let fine = trapezoid_fn(&f, a, b, n);
    let coarse = trapezoid_fn(&f, a, b, n / 2);
    RichardsonEstimate {
        value: fine,
        half_resolution: coarse,
        extrapolated: (4.0 * fine - coarse) / 3.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_linear() {
        let s: alloc::vec::Vec<f64> = (0..=10).map(|i| 3.0 * i as f64 / 10.0 + 1.0).collect();
        assert!((trapezoid_unit(&s) - 2.5).abs() < 1e-14);
        assert_eq!(trapezoid_unit(&[4.0]), 0.0);
    }

    #[test]
    fn second_order_convergence() {
        let f = |x: f64| libm::exp(x);
        let exact = core::f64::consts::E - 1.0;
        let e1 = (trapezoid_fn(f, 0.0, 1.0, 50) - exact).abs();
        let e2 = (trapezoid_fn(f, 0.0, 1.0, 100) - exact).abs();
        assert!((e1 / e2 - 4.0).abs() < 0.01);
        let r = trapezoid_richardson(f, 0.0, 1.0, 100);
        assert!((r.extrapolated - exact).abs() < 1e-9);
        assert!(r.error() < 2e-5);
    }
}
