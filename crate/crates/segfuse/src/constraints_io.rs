//! Constraint files: one `ML <m> <l>` or `CL <m> <l>` per line with
//! row-major linear pixel indices. `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use segfuse_core::{close_constraints, ConstraintSet, RawConstraints};

use crate::error::{read_text, write_file, Error, Result};

pub fn parse_constraints(text: &str, path: &Path) -> Result<RawConstraints> {
    let mut raw = RawConstraints::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [kind, m, l] = fields[..] else {
            return Err(Error::parse(path, i + 1, "expected `ML <m> <l>` or `CL <m> <l>`"));
        };
        let index =
            |s: &str| s.parse::<usize>().map_err(|_| Error::parse(path, i + 1, format!("{s:?} is not a pixel index")));
        let (m, l) = (index(m)?, index(l)?);
        if m == l {
            return Err(Error::parse(path, i + 1, format!("pixel {m} paired with itself")));
        }
        match kind {
            "ML" | "ml" => raw.must_link.push((m, l)),
            "CL" | "cl" => raw.cannot_link.push((m, l)),
            other => return Err(Error::parse(path, i + 1, format!("unknown constraint kind {other:?}"))),
        }
    }
    Ok(raw)
}

/// Reads, deduplicates and closes a constraint file.
pub fn read_constraints(path: &Path) -> Result<ConstraintSet> {
    let raw = parse_constraints(&read_text(path)?, path)?;
    Ok(close_constraints(&raw)?)
}

/// Declared pairs only; the must-link closure is recomputed on read.
pub fn format_constraints(cons: &ConstraintSet) -> String {
    let mut out = String::new();
    for (m, l) in cons.declared_must_link() {
        writeln!(out, "ML {m} {l}").expect("writing to a string");
    }
    for (m, l) in cons.cannot_link() {
        writeln!(out, "CL {m} {l}").expect("writing to a string");
    }
    out
}

pub fn write_constraints(path: &Path, cons: &ConstraintSet) -> Result<()> {
    write_file(path, format_constraints(cons).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ConstraintSet> {
        Ok(close_constraints(&parse_constraints(text, Path::new("c.txt"))?)?)
    }

    #[test]
    fn small_files() {
        let c = parse("# header\nML 0 1\nCL 0 2 # trailing\n\nML 1 0\n").unwrap();
        assert_eq!(c.declared_must_link().iter().copied().collect::<Vec<_>>(), vec![(0, 1)]);
        assert_eq!(c.cannot_link().iter().copied().collect::<Vec<_>>(), vec![(0, 2)]);
        assert!(parse("").unwrap().is_empty());
        assert!(parse("ML 0 1\nML 1 2\nCL 0 2\n").is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        for (text, line) in [("ML 0 1\nXX 1 2\n", 2), ("\n\nML 0\n", 3), ("ML 0 a\n", 1), ("CL 3 3\n", 1)] {
            match parse_constraints(text, Path::new("c.txt")) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn format_round_trips() {
        let c = parse("ML 4 2\nML 2 9\nCL 4 5\n").unwrap();
        assert_eq!(parse(&format_constraints(&c)).unwrap(), c);
    }
}
