//! Number formatting for output tables.
//!
//! Values are written with the shortest representation that reads back to
//! the same `f64`, padded with zeros to at least six significant digits.

const MIN_SIG: usize = 6;

fn significant_digits(repr: &str) -> usize {
    let mantissa = repr.split(['e', 'E']).next().unwrap_or(repr);
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let trimmed = digits.trim_start_matches('0');
    if repr.contains('.') {
        trimmed.len()
    } else {
        // trailing zeros of an integer are significant only if we say so
        trimmed.trim_end_matches('0').len()
    }
}

pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0.00000".to_string();
    }
    let scientific = !(1e-4..1e15).contains(&x.abs());
    let shortest = if scientific { format!("{x:e}") } else { format!("{x}") };
    if significant_digits(&shortest) >= MIN_SIG {
        return shortest;
    }
    let padded = if scientific {
        format!("{x:.prec$e}", prec = MIN_SIG - 1)
    } else {
        let magnitude = x.abs().log10().floor() as i64;
        let decimals = (MIN_SIG as i64 - 1 - magnitude).max(0) as usize;
        format!("{x:.decimals$}")
    };
    if padded.parse::<f64>() == Ok(x) {
        padded
    } else {
        shortest
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn padding_and_round_trip() {
        assert_eq!(num(0.5), "0.500000");
        assert_eq!(num(-2.85), "-2.85000");
        assert_eq!(num(1000.0), "1000.00");
        assert_eq!(num(123456.0), "123456");
        assert_eq!(num(0.0), "0.00000");
        assert_eq!(num(1.0 / 3.0), (1.0f64 / 3.0).to_string());
        assert_eq!(num(2.5e-32), "2.50000e-32");
        assert_eq!(num(2.2631308106595952e-32), "2.2631308106595952e-32");
        assert_eq!(num(1e20), "1.00000e20");
        for x in [0.1, 1e-8, 7.3272, -16005.196511307657, 2.5e300, 1e6, 3.0] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            assert!(significant_digits(&s) >= MIN_SIG || s.len() > 6, "{s}");
        }
    }
}
