//! Helpers shared by the line-oriented data formats (curves, battery
//! parameters, scenario files).

use std::num::ParseFloatError;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid number `{text}`")]
pub struct NumberError {
    pub text: String,
}

impl From<(&str, ParseFloatError)> for NumberError {
    fn from((text, _): (&str, ParseFloatError)) -> Self {
        NumberError { text: text.to_string() }
    }
}

/// Parses a numeric token.
///
/// Besides plain decimals and `e` exponents this accepts fractions (`7/9`)
/// and the datasheet shorthand `2.16^{-4}`, which means `2.16e-4`.
pub fn parse_number(token: &str) -> Result<f64, NumberError> {
    let token = token.trim();
    let bad = || NumberError { text: token.to_string() };

    let value = if let Some((mantissa, rest)) = token.split_once('^') {
        let exponent = rest
            .strip_prefix('{')
            .and_then(|r| r.strip_suffix('}'))
            .unwrap_or(rest);
        let m: f64 = mantissa.parse().map_err(|_| bad())?;
        let e: i32 = exponent.parse().map_err(|_| bad())?;
        // Going through the decimal string keeps 2.16^{-4} bit-identical to 2.16e-4.
        format!("{m}e{e}").parse::<f64>().map_err(|_| bad())?
    } else if let Some((num, den)) = token.split_once('/') {
        let n: f64 = num.parse().map_err(|_| bad())?;
        let d: f64 = den.parse().map_err(|_| bad())?;
        if d == 0.0 {
            return Err(bad());
        }
        n / d
    } else {
        token.parse::<f64>().map_err(|_| bad())?
    };

    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

/// Yields `(line_number, tokens)` for every non-blank line with `#` comments
/// stripped. Line numbers are 1-based.
pub fn significant_lines(source: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    source.lines().enumerate().filter_map(|(idx, raw)| {
        let line = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            None
        } else {
            Some((idx + 1, tokens))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn datasheet_exponent_shorthand() {
        assert_eq!(parse_number("8.29^{-18}").unwrap(), 8.29e-18);
        assert_eq!(parse_number("-2.16^{-4}").unwrap(), -2.16e-4);
        assert_eq!(parse_number("1.5^-3").unwrap(), 1.5e-3);
    }

    #[test]
    fn fractions_and_plain() {
        assert_eq!(parse_number("7/9").unwrap(), 7.0 / 9.0);
        assert_eq!(parse_number("-681.89").unwrap(), -681.89);
        assert_eq!(parse_number("1.00e+06").unwrap(), 1.0e6);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_number("abc").is_err());
        assert!(parse_number("1/0").is_err());
        assert!(parse_number("2^{x}").is_err());
        assert!(parse_number("inf").is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let src = "# header\n\n  pmin 1 # trailing\n\tqmax 2\n";
        let lines: Vec<_> = significant_lines(src).collect();
        assert_eq!(lines, vec![(3, vec!["pmin", "1"]), (4, vec!["qmax", "2"])]);
    }
}
