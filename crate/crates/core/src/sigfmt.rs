//! Fixed-decimal formatting with six significant digits.
//!
//! All CSV cells and human-readable numbers go through [`sig6`] so that
//! artifacts produced from the same inputs are byte-identical across
//! platforms and diffable as golden files.

/// Round to six significant digits.
pub fn round_sig6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let exp = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(5 - exp);
    (x * scale).round() / scale
}

/// Format in fixed decimal with six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded = round_sig6(x);
    let mut exp = rounded.abs().log10().floor() as i32;
    // Rounding can push the leading digit into the next decade (9.999999 -> 10).
    if rounded.abs() >= 10f64.powi(exp + 1) {
        exp += 1;
    }
    let decimals = (5 - exp).max(0) as usize;
    format!("{rounded:.decimals$}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(9.541634), "9.54163");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(0.001234564), "0.00123456");
        assert_eq!(sig6(10.0), "10.0000");
        assert_eq!(sig6(9.9999999), "10.0000");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(-2.5), "-2.50000");
        assert_eq!(sig6(25_000_000.0), "25000000");
        assert_eq!(sig6(25_000_001.0), "25000000");
    }

    #[test]
    fn rounding_is_idempotent() {
        for &x in &[3.14159265, 0.000912345678, 87654321.0, 1.0 / 3.0] {
            let once = round_sig6(x);
            assert_eq!(once, round_sig6(once));
            assert_eq!(sig6(x), sig6(once));
        }
    }
}
