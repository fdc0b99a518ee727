//! Episode CSV: header `theta,b[,regime]`, one episode per row.

use std::io::{Read, Write};
use std::path::Path;

use tlc_core::estimator::{Episode, Regime};

use crate::error::{CliError, Result};

/// Reads episodes, rejecting non-finite shocks and negative or NaN bailouts
/// with the offending line number.
pub fn read_episodes(path: &Path) -> Result<Vec<Episode>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_episodes(file, &path.display().to_string())
}

pub fn parse_episodes<R: Read>(input: R, origin: &str) -> Result<Vec<Episode>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| CliError::Validation(format!("{origin}: {e}")))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let with_regime = match names.as_slice() {
        ["theta", "b"] => false,
        ["theta", "b", "regime"] => true,
        _ => {
            return Err(CliError::Validation(format!(
                "{origin}:1: header must be `theta,b` or `theta,b,regime`, found `{}`",
                names.join(",")
            )))
        }
    };

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Validation(format!("{origin}: {e}")))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let at = |msg: String| CliError::Validation(format!("{origin}:{line}: {msg}"));
        let field = |i: usize, name: &str| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<f64>().map_err(|_| at(format!("{name} `{raw}` is not a number")))
        };
        let theta = field(0, "theta")?;
        let b = field(1, "b")?;
        if !theta.is_finite() {
            return Err(at(format!("theta = {theta} is not finite")));
        }
        if b.is_nan() {
            return Err(at("b is NaN".into()));
        }
        if !(b >= 0.0) || !b.is_finite() {
            return Err(at(format!("b = {b} must be finite and non-negative")));
        }
        let regime = if with_regime {
            match record.get(2).unwrap_or("") {
                "" => None,
                s => Some(s.parse::<Regime>().map_err(at)?),
            }
        } else {
            None
        };
        out.push(Episode { theta, b, regime });
    }
    Ok(out)
}

/// Writes episodes with shortest round-trip float formatting and LF endings.
pub fn write_episodes<W: Write>(out: W, episodes: &[Episode]) -> Result<()> {
    let with_regime = episodes.iter().any(|e| e.regime.is_some());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let fail = |e: csv::Error| CliError::Validation(format!("csv: {e}"));
    if with_regime {
        w.write_record(["theta", "b", "regime"]).map_err(fail)?;
    } else {
        w.write_record(["theta", "b"]).map_err(fail)?;
    }
    for e in episodes {
        let theta = e.theta.to_string();
        let b = e.b.to_string();
        if with_regime {
            let r = e.regime.map(|r| r.as_str()).unwrap_or("");
            w.write_record([theta.as_str(), b.as_str(), r]).map_err(fail)?;
        } else {
            w.write_record([theta.as_str(), b.as_str()]).map_err(fail)?;
        }
    }
    w.flush().map_err(|e| CliError::Validation(format!("csv: {e}")))?;
    Ok(())
}

pub fn write_episodes_file(path: &Path, episodes: &[Episode]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_episodes(std::io::BufWriter::new(file), episodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let eps = vec![Episode::new(0.1, 0.0), Episode::new(1.0 / 3.0, 0.25)];
        let mut buf = Vec::new();
        write_episodes(&mut buf, &eps).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("theta,b\n"));
        assert!(!text.contains('\r'));
        assert_eq!(parse_episodes(buf.as_slice(), "mem").unwrap(), eps);
    }

    #[test]
    fn regime_column_round_trips() {
        let mut e = Episode::new(1.0, 0.5);
        e.regime = Some(Regime::Interior);
        let mut buf = Vec::new();
        write_episodes(&mut buf, &[e]).unwrap();
        assert_eq!(parse_episodes(buf.as_slice(), "mem").unwrap(), vec![e]);
    }

    #[test]
    fn rejects_bad_rows_with_line_numbers() {
        let err = parse_episodes("theta,b\n0.1,0\n0.2,-1\n".as_bytes(), "d.csv").unwrap_err();
        assert!(err.to_string().starts_with("d.csv:3:"), "{err}");
        let err = parse_episodes("theta,b\n0.1,NaN\n".as_bytes(), "d.csv").unwrap_err();
        assert!(err.to_string().contains("d.csv:2: b is NaN"), "{err}");
        let err = parse_episodes("theta,b\n0.1,x\n".as_bytes(), "d.csv").unwrap_err();
        assert!(err.to_string().contains("not a number"), "{err}");
        let err = parse_episodes("x,y\n".as_bytes(), "d.csv").unwrap_err();
        assert!(err.to_string().contains("header"), "{err}");
        let err = parse_episodes("theta,b,regime\n0.1,0,sideways\n".as_bytes(), "d.csv").unwrap_err();
        assert!(err.to_string().contains("unknown regime"), "{err}");
    }
}
