//! Command orchestration for whisker-lab: configuration, the staged
//! pipeline, machine-readable artifacts and the verification report.

pub mod checks;
pub mod output;
pub mod pipeline;
pub mod plot;

pub use checks::{check_registry, Check, CheckOutcome, Status};
pub use output::to_json_string;
pub use pipeline::{load_config, Context, RunReport};

use whisker_core::Error;

/// Exit status contract: 0 pass, 1 numeric failure, 2 configuration error.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::NonDiophantine { .. } | Error::Toml(_) | Error::Json(_) | Error::Io(_)) => 2,
        Some(_) => 1,
        None if err.downcast_ref::<std::io::Error>().is_some() => 2,
        None if err.downcast_ref::<ParseError>().is_some() => 2,
        None => 1,
    }
}

/// Malformed command-line value.
#[derive(Debug)]
pub struct ParseError(pub String);

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cannot parse {}", self.0)
    }
}

impl std::error::Error for ParseError {}

/// Parses `a`, `bi`, `a+bi`, `a-bi` (also with `j`).
pub fn parse_complex(s: &str) -> Result<num_complex::Complex64, ParseError> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || ParseError(format!("complex number '{s}'"));
    if t.is_empty() {
        return Err(bad());
    }
    let body = t.strip_suffix(['i', 'j']);
    let Some(body) = body else {
        return t.parse::<f64>().map(num_complex::Complex64::from).map_err(|_| bad());
    };
    // split at the last sign that is not an exponent sign or the leading sign
    let bytes = body.as_bytes();
    let mut split = None;
    for k in (1..bytes.len()).rev() {
        if (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
            split = Some(k);
            break;
        }
    }
    let im_of = |x: &str| -> Result<f64, ParseError> {
        match x {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => x.parse::<f64>().map_err(|_| bad()),
        }
    };
    match split {
        Some(k) => {
            let re = body[..k].parse::<f64>().map_err(|_| bad())?;
            Ok(num_complex::Complex64::new(re, im_of(&body[k..])?))
        }
        None => Ok(num_complex::Complex64::new(0.0, im_of(body)?)),
    }
}

/// `psi=0.3` or `psi=0.3,1.2`; a single value is broadcast to all angles.
pub fn parse_section(s: &str, dim: usize) -> Result<Vec<f64>, ParseError> {
    let bad = || ParseError(format!("section '{s}' (expected psi=<value>[,<value>..])"));
    let rhs = s.strip_prefix("psi=").or_else(|| s.strip_prefix("theta=")).ok_or_else(bad)?;
    let vals: Vec<f64> = rhs.split(',').map(|v| v.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    match vals.len() {
        1 => Ok(vec![vals[0]; dim]),
        n if n == dim => Ok(vals),
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        let c = |s| parse_complex(s).unwrap();
        assert_eq!(c("5+0.5i"), num_complex::Complex64::new(5.0, 0.5));
        assert_eq!(c("-1-2i"), num_complex::Complex64::new(-1.0, -2.0));
        assert_eq!(c("3"), num_complex::Complex64::new(3.0, 0.0));
        assert_eq!(c("0.5i"), num_complex::Complex64::new(0.0, 0.5));
        assert_eq!(c("-i"), num_complex::Complex64::new(0.0, -1.0));
        assert_eq!(c("1e-3+2e+1j"), num_complex::Complex64::new(1e-3, 20.0));
        assert!(parse_complex("abc").is_err());
    }

    #[test]
    fn sections() {
        assert_eq!(parse_section("psi=0", 2).unwrap(), vec![0.0, 0.0]);
        assert_eq!(parse_section("psi=0.1,0.2", 2).unwrap(), vec![0.1, 0.2]);
        assert!(parse_section("phi=0", 1).is_err());
    }
}
