//! Cause-effect pair files: one sample per line, two whitespace-separated
//! numbers, blank lines ignored.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use causal_core::cause_effect::Direction;

use crate::error::{CliError, ErrorCode, Result};

pub fn parse_pairs(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (k, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 2 {
            return Err(CliError::new(
                ErrorCode::PairFormat,
                format!("line {}: expected 2 fields, found {}", k + 1, fields.len()),
            ));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| CliError::new(ErrorCode::PairFormat, format!("line {}: `{s}` is not a number", k + 1)))
        };
        x.push(num(fields[0])?);
        y.push(num(fields[1])?);
    }
    if x.is_empty() {
        return Err(CliError::new(ErrorCode::PairFormat, "no samples"));
    }
    Ok((x, y))
}

pub fn read_pair_file(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_pairs(&text).map_err(|e| CliError::new(e.code, format!("{}: {}", path.display(), e.message)))
}

/// Ground-truth directions, one pair per line: `<id> <direction>` where the
/// direction is `->` / `x->y` / `XtoY` or `<-` / `y->x` / `YtoX`. Lines in
/// the six-column Tuebingen `pairmeta` layout (`id cause_start cause_end
/// effect_start effect_end weight`) are accepted too. `#` starts a comment.
pub fn parse_metadata(text: &str) -> Result<BTreeMap<String, Direction>> {
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.is_empty() {
            continue;
        }
        let bad = || CliError::new(ErrorCode::Metadata, format!("line {}: cannot read `{}`", k + 1, raw.trim()));
        let dir = match f.as_slice() {
            [_, d] => match *d {
                "->" | "x->y" | "XtoY" => Direction::XtoY,
                "<-" | "y->x" | "YtoX" => Direction::YtoX,
                _ => return Err(bad()),
            },
            [_, cs, _, es, _, _] => match (*cs, *es) {
                ("1", "2") => Direction::XtoY,
                ("2", "1") => Direction::YtoX,
                _ => return Err(bad()),
            },
            _ => return Err(bad()),
        };
        out.insert(f[0].to_string(), dir);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(parse_pairs("1 2\n3 4\n").unwrap(), (vec![1.0, 3.0], vec![2.0, 4.0]));
        assert_eq!(parse_pairs("1 2\n3 4\n\n").unwrap(), (vec![1.0, 3.0], vec![2.0, 4.0]));
        let e = parse_pairs("1 2 3\n").unwrap_err();
        assert_eq!(e.code, ErrorCode::PairFormat);
        assert!(e.message.contains("line 1"));
        assert!(parse_pairs("1 a\n").is_err());
        assert!(parse_pairs("\n\n").is_err());
    }

    #[test]
    fn metadata_layouts() {
        let m = parse_metadata("p1 ->\np2 YtoX # note\n0003 1 1 2 2 1\n").unwrap();
        assert_eq!(m["p1"], Direction::XtoY);
        assert_eq!(m["p2"], Direction::YtoX);
        assert_eq!(m["0003"], Direction::XtoY);
        assert!(parse_metadata("p1 sideways\n").is_err());
    }
}
