//! Byte-stable number formatting for CSV exports.

/// Formats `x` with 9 significant digits, rounding half to even.
///
/// Plain decimal notation is used for decimal exponents in `-5..9`,
/// scientific otherwise; trailing fractional zeros are trimmed.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_owned();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".to_owned()
        } else if x > 0.0 {
            "inf".to_owned()
        } else {
            "-inf".to_owned()
        };
    }
    // std's exact formatting rounds the binary value correctly, ties to even.
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("`e` formatting always has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    debug_assert_eq!(digits.len(), 9);

    if (-5..9).contains(&exp) {
        let body = if exp >= 0 {
            let split = exp as usize + 1;
            format!("{}.{}", &digits[..split], &digits[split..])
        } else {
            format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
        };
        format!("{sign}{}", trim_fraction(&body))
    } else {
        let body = format!("{}.{}", &digits[..1], &digits[1..]);
        format!("{sign}{}e{exp}", trim_fraction(&body))
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `sig9` for present values, empty cell otherwise.
pub fn opt(x: Option<f64>) -> String {
    x.map(sig9).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_and_scientific() {
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(6.0), "6");
        assert_eq!(sig9(13.5), "13.5");
        assert_eq!(sig9(-0.5), "-0.5");
        assert_eq!(sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(sig9(2.0 / 3.0), "0.666666667");
        assert_eq!(sig9(123456789.0), "123456789");
        assert_eq!(sig9(1234567890.0), "1.23456789e9");
        assert_eq!(sig9(5e12), "5e12");
        assert_eq!(sig9(1.5e-7), "1.5e-7");
        assert_eq!(sig9(0.000012345), "0.000012345");
    }

    #[test]
    fn ties_round_to_even() {
        assert_eq!(sig9(123456789.5), "123456790");
        assert_eq!(sig9(123456788.5), "123456788");
    }

    #[test]
    fn missing_values_are_empty() {
        assert_eq!(opt(None), "");
        assert_eq!(opt(Some(0.25)), "0.25");
    }
}
