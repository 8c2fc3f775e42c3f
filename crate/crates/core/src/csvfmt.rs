//! Number formatting shared by every CSV writer: 9 significant digits, `%g` style.

pub fn sig9(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    // Rounding to 9 digits can bump the exponent (9.999999999 -> 10.0000000).
    let sci = format!("{:.8e}", v);
    let exp = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse::<i32>().ok())
        .unwrap_or(exp);
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim(format!("{:.*}", decimals, v))
    } else {
        let (mantissa, e) = sci.split_once('e').expect("scientific format");
        format!("{}e{}", trim(mantissa.to_string()), e)
    }
}

fn trim(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn bool01(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats() {
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(1.0), "1");
        assert_eq!(sig9(0.1), "0.1");
        assert_eq!(sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(sig9(-2.5), "-2.5");
        assert_eq!(sig9(123456789.4), "123456789");
        assert_eq!(sig9(9.9999999999), "10");
        assert_eq!(sig9(1.5e12), "1.5e12");
        assert_eq!(sig9(2.0e-7), "2e-7");
        assert_eq!(sig9(f64::INFINITY), "inf");
    }

    #[test]
    fn nine_digits_round_trip_closely() {
        for v in [std::f64::consts::PI, 1e-4 * std::f64::consts::E, 12345.6789012] {
            let back: f64 = sig9(v).parse().unwrap();
            assert!(((back - v) / v).abs() < 1e-8);
        }
    }
}
