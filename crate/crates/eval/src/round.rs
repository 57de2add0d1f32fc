/// Formats `x` with `places` decimals, rounding ties away from zero.
///
/// Works on the exact decimal expansion of the float, so `0.125` becomes
/// `0.13` while `0.1249999` stays `0.12`. Non-finite values print as-is.
pub fn fmt_half_up(x: f64, places: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    // 1100 fractional digits cover the exact expansion of any f64.
    let exact = format!("{:.1100}", x.abs());
    let (int_part, frac) = exact.split_once('.').expect("fixed-point format has a point");
    let mut digits: Vec<u8> = int_part.bytes().chain(frac.bytes().take(places)).map(|b| b - b'0').collect();
    let round_up = frac.as_bytes()[places] >= b'5';
    if round_up {
        let mut k = digits.len();
        loop {
            if k == 0 {
                digits.insert(0, 1);
                break;
            }
            k -= 1;
            if digits[k] == 9 {
                digits[k] = 0;
            } else {
                digits[k] += 1;
                break;
            }
        }
    }
    let split = digits.len() - places;
    let mut out = String::new();
    let is_zero = digits.iter().all(|&d| d == 0);
    if x < 0.0 && !is_zero {
        out.push('-');
    }
    out.extend(digits[..split].iter().map(|d| char::from(b'0' + d)));
    if places > 0 {
        out.push('.');
        out.extend(digits[split..].iter().map(|d| char::from(b'0' + d)));
    }
    out
}

/// Two-decimal rendering used throughout the reports.
pub fn fmt2(x: f64) -> String {
    fmt_half_up(x, 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_round_up() {
        assert_eq!(fmt2(0.125), "0.13");
        assert_eq!(fmt2(79.125), "79.13");
        assert_eq!(fmt2(2.5), "2.50");
        assert_eq!(fmt_half_up(2.5, 0), "3");
        assert_eq!(fmt2(1.005), "1.00"); // stored slightly below the tie
        assert_eq!(fmt2(99.995), "100.00"); // stored slightly above it
        assert_eq!(fmt2(99.9951), "100.00");
    }

    #[test]
    fn negatives_round_away_from_zero() {
        assert_eq!(fmt2(-0.125), "-0.13");
        assert_eq!(fmt2(-0.001), "0.00");
        assert_eq!(fmt2(-22.5), "-22.50");
    }

    #[test]
    fn plain_values() {
        assert_eq!(fmt2(0.0), "0.00");
        assert_eq!(fmt2(90.5), "90.50");
        assert_eq!(fmt2(319.1), "319.10");
        assert_eq!(fmt2(2.22), "2.22");
        assert_eq!(fmt2(100.0), "100.00");
    }
}
