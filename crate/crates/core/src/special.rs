//! Gamma function via the Lanczos approximation (g = 7, 9 terms).

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural logarithm of |Γ(x)|.
///
/// Uses the reflection formula below 1/2. Poles (non-positive integers)
/// return +∞.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let s = (PI * x).sin();
        if s == 0.0 {
            return f64::INFINITY;
        }
        return (PI / s.abs()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEFFS[0];
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Γ(x) for x > 0.
pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Γ(n) = (n-1)! and Γ(n + 1/2) = (2n)! √π / (4^n n!), accumulated as
    // plain products so they share nothing with the Lanczos series.
    fn factorial_gamma(n: u32) -> f64 {
        (1..n).map(f64::from).product()
    }

    fn half_integer_gamma(n: u32) -> f64 {
        // Γ(n + 1/2) = √π · Π_{k=1..n} (k - 1/2)
        PI.sqrt() * (1..=n).map(|k| f64::from(k) - 0.5).product::<f64>()
    }

    #[test]
    fn integers_match_factorials() {
        for n in 1..=50u32 {
            let exact = factorial_gamma(n);
            let rel = (gamma(f64::from(n)) - exact).abs() / exact;
            assert!(rel < 1e-12, "n={n}: rel err {rel:e}");
        }
    }

    #[test]
    fn half_integers_match_products() {
        for n in 0..50u32 {
            let x = f64::from(n) + 0.5;
            let exact = half_integer_gamma(n);
            let rel = (gamma(x) - exact).abs() / exact;
            assert!(rel < 1e-12, "x={x}: rel err {rel:e}");
        }
    }

    #[test]
    fn recurrence_holds_on_fractional_arguments() {
        let mut x = 0.55;
        while x < 49.0 {
            let lhs = ln_gamma(x + 1.0);
            let rhs = x.ln() + ln_gamma(x);
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0), "x={x}");
            x += 0.37;
        }
    }

    #[test]
    fn reflection_below_one_half() {
        // Γ(1/4) Γ(3/4) = π √2
        let prod = gamma(0.25) * gamma(0.75);
        assert!((prod - PI * 2f64.sqrt()).abs() < 1e-12);
        assert!(ln_gamma(0.0).is_infinite());
    }
}
