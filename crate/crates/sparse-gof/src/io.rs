//! Parsers for the plain-text value files used by the command line:
//! one value per line, `#` comments, probabilities optionally as exact
//! rationals `a/b`.

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::statistics::{CountsVector, ProbabilityVector};

/// Values parsed from a probability file. The vector is rational when
/// every entry was written as `a/b`, float otherwise.
#[derive(Debug, Clone)]
pub enum ParsedNumbers {
    Floats(Vec<f64>),
    Rationals(Vec<BigRational>),
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let stripped = line.split('#').next().unwrap_or("").trim();
        if stripped.is_empty() {
            None
        } else {
            Some((i + 1, stripped))
        }
    })
}

fn parse_rational(token: &str) -> Option<BigRational> {
    let (num, den) = token.split_once('/')?;
    let num: BigInt = num.trim().parse().ok()?;
    let den: BigInt = den.trim().parse().ok()?;
    if den == BigInt::from(0) {
        return None;
    }
    Some(BigRational::new(num, den))
}

/// Parses one value per line; the result is rational only if every line is.
pub fn parse_numbers(text: &str) -> Result<ParsedNumbers> {
    let mut rationals = Vec::new();
    let mut all_rational = true;
    let mut floats = Vec::new();
    for (line_no, token) in content_lines(text) {
        if token.contains('/') {
            match parse_rational(token) {
                Some(r) => {
                    use num_traits::ToPrimitive;
                    floats.push(r.to_f64().unwrap_or(f64::NAN));
                    rationals.push(r);
                }
                None => {
                    return Err(Error::Parse(format!(
                        "line {line_no}: cannot parse {token:?} as a rational a/b"
                    )))
                }
            }
        } else {
            all_rational = false;
            match token.parse::<f64>() {
                Ok(v) => floats.push(v),
                Err(_) => {
                    return Err(Error::Parse(format!(
                        "line {line_no}: cannot parse {token:?} as a number"
                    )))
                }
            }
        }
    }
    if floats.is_empty() {
        return Err(Error::Parse("no values found".into()));
    }
    if all_rational {
        Ok(ParsedNumbers::Rationals(rationals))
    } else {
        Ok(ParsedNumbers::Floats(floats))
    }
}

/// Parses a probability file into a validated vector, exact when possible.
pub fn parse_probabilities(text: &str) -> Result<ProbabilityVector> {
    match parse_numbers(text)? {
        ParsedNumbers::Floats(v) => ProbabilityVector::new(v),
        ParsedNumbers::Rationals(v) => ProbabilityVector::from_rationals(v),
    }
}

/// Parses a counts file of non-negative integers.
pub fn parse_counts(text: &str) -> Result<CountsVector> {
    let mut counts = Vec::new();
    for (line_no, token) in content_lines(text) {
        match token.parse::<u64>() {
            Ok(v) => counts.push(v),
            Err(_) => {
                return Err(Error::Parse(format!(
                    "line {line_no}: cannot parse {token:?} as a non-negative integer count"
                )))
            }
        }
    }
    CountsVector::new(counts)
}

/// Parses a plain list of floats (moment/cumulant vectors, x grids).
pub fn parse_floats(text: &str) -> Result<Vec<f64>> {
    match parse_numbers(text)? {
        ParsedNumbers::Floats(v) => Ok(v),
        ParsedNumbers::Rationals(v) => {
            use num_traits::ToPrimitive;
            Ok(v.iter().map(|r| r.to_f64().unwrap_or(f64::NAN)).collect())
        }
    }
}
