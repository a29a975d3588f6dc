//! `start:stop:count:{lin|geom}` sweep specifications.

use crate::error::CliError;
use crate::units::{parse_with_default, Kind};

/// Expands a grid spec. Bare endpoints are read in `default_unit`.
pub fn parse_grid(spec: &str, kind: Kind, default_unit: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::config(format!("--grid `{spec}`: {why}"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 4 {
        return Err(bad("expected start:stop:count:{lin|geom}"));
    }
    let start = parse_with_default("--grid start", parts[0], kind, Some(default_unit))?;
    let stop = parse_with_default("--grid stop", parts[1], kind, Some(default_unit))?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad("count must be a positive integer"))?;
    if count == 0 {
        return Err(bad("count must be a positive integer"));
    }
    if start < 0.0 || stop < start {
        return Err(bad("need 0 ≤ start ≤ stop"));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let m = (count - 1) as f64;
    match parts[3].trim() {
        "lin" => Ok((0..count).map(|i| if i + 1 == count { stop } else { start + (stop - start) * i as f64 / m }).collect()),
        "geom" => {
            if start <= 0.0 {
                return Err(bad("a geometric grid needs start > 0"));
            }
            Ok((0..count).map(|i| if i + 1 == count { stop } else { start * (stop / start).powf(i as f64 / m) }).collect())
        }
        other => Err(bad(&format!("spacing `{other}` is neither lin nor geom"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lin_and_geom() {
        assert_eq!(parse_grid("0:25:6:lin", Kind::Temperature, "mK").unwrap().len(), 6);
        let g = parse_grid("0:25:6:lin", Kind::Temperature, "mK").unwrap();
        assert_eq!(g[0], 0.0);
        assert_eq!(g[5], 25e-3);
        let g = parse_grid("1kHz:1MHz:4:geom", Kind::Frequency, "MHz").unwrap();
        assert!((g[1] - 1e4).abs() < 1e-6 && g[3] == 1e6);
        assert_eq!(parse_grid("0:0:1:lin", Kind::Temperature, "mK").unwrap(), vec![0.0]);
    }

    #[test]
    fn rejects_malformed() {
        for s in ["0:1:3", "0:1:x:lin", "0:1:3:log", "0:1:3:geom", "2:1:3:lin", "0:1:0:lin"] {
            assert!(matches!(parse_grid(s, Kind::Frequency, "MHz"), Err(CliError::Config(_))), "{s}");
        }
    }
}
