//! Number formatting for reports.

/// `x` rounded to 6 significant digits, printed without trailing zeros or exponent.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    if rounded == 0.0 {
        return "0".into();
    }
    rounded.to_string()
}

#[cfg(test)]
mod tests {
    use super::sig6;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(8.485281374238571), "8.48528");
        assert_eq!(sig6(30.0), "30");
        assert_eq!(sig6(-5.0), "-5");
        assert_eq!(sig6(1234567.0), "1234570");
        assert_eq!(sig6(0.000123456789), "0.000123457");
        assert_eq!(sig6(-0.0), "0");
    }
}
