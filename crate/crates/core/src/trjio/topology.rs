//! Minimal topology text format.
//!
//! ```text
//! 341
//! 0 2 4 7
//! 0 CA 1.000 2.000 3.000
//! 2 CA ...
//! ```
//!
//! Line 1 is the atom count, line 2 the whitespace-separated mobile indices,
//! followed by one `index name x y z` reference row (nm) per mobile atom in
//! the same order.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::System;

pub fn parse_topology(text: &str, path: &Path) -> Result<System> {
    let err = |line: usize, msg: String| Error::Topology {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (ln, first) = lines.next().ok_or_else(|| err(1, "empty topology".into()))?;
    let n_atoms: usize = first
        .trim()
        .parse()
        .map_err(|_| err(ln, format!("expected atom count, got '{}'", first.trim())))?;

    let (ln, second) = lines.next().ok_or_else(|| err(2, "missing mobile index line".into()))?;
    let mobile: Vec<usize> = second
        .split_whitespace()
        .map(|tok| tok.parse().map_err(|_| err(ln, format!("bad index '{tok}'"))))
        .collect::<Result<_>>()?;

    let mut names = Vec::with_capacity(mobile.len());
    let mut reference = Vec::with_capacity(mobile.len());
    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(err(ln, format!("expected 5 fields, got {}", fields.len())));
        }
        let index: usize = fields[0]
            .parse()
            .map_err(|_| err(ln, format!("bad index '{}'", fields[0])))?;
        let k = reference.len();
        if mobile.get(k) != Some(&index) {
            return Err(err(ln, format!("reference row {k} is for atom {index}, expected {:?}", mobile.get(k))));
        }
        let mut xyz = [0.0; 3];
        for (c, f) in xyz.iter_mut().zip(&fields[2..]) {
            *c = f.parse().map_err(|_| err(ln, format!("bad coordinate '{f}'")))?;
        }
        names.push(fields[1].to_string());
        reference.push(xyz);
    }
    System::new(n_atoms, names, mobile, reference).map_err(|e| err(0, e.to_string()))
}

pub fn read_topology(path: impl AsRef<Path>) -> Result<System> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_topology(&text, path)
}

pub fn format_topology(system: &System) -> String {
    let mut s = String::new();
    writeln!(s, "{}", system.n_atoms()).unwrap();
    let indices: Vec<String> = system.mobile_indices().iter().map(|i| i.to_string()).collect();
    writeln!(s, "{}", indices.join(" ")).unwrap();
    for (k, (&i, p)) in system
        .mobile_indices()
        .iter()
        .zip(system.reference_positions())
        .enumerate()
    {
        let name = system.atom_names().get(k).map_or("X", |n| n.as_str());
        writeln!(s, "{i} {name} {} {} {}", p[0], p[1], p[2]).unwrap();
    }
    s
}

pub fn write_topology(system: &System, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_topology(system)).map_err(|e| Error::io(path, e))
}

/// Conventional topology path next to a trajectory: `traj.seq` → `traj.seq.top`.
pub fn topology_path(trajectory: impl AsRef<Path>) -> PathBuf {
    let mut s = trajectory.as_ref().as_os_str().to_owned();
    s.push(".top");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let system = System::new(
            10,
            vec!["CA".into(), "CB".into(), "N".into()],
            vec![1, 4, 9],
            vec![[0.1, -2.5, 3.0], [1.0 / 3.0, 0.0, 7.25], [-0.0001, 9.99, 1e-7]],
        )
        .unwrap();
        let text = format_topology(&system);
        assert_eq!(parse_topology(&text, Path::new("t")).unwrap(), system);
    }

    #[test]
    fn rejects_malformed() {
        let p = Path::new("t");
        assert!(parse_topology("", p).is_err());
        assert!(parse_topology("x\n", p).is_err());
        assert!(parse_topology("3\n0 1\n0 A 0 0 0\n", p).is_err());
        assert!(parse_topology("3\n0 1\n0 A 0 0 0\n2 A 0 0 0\n", p).is_err());
        assert!(parse_topology("3\n0 5\n0 A 0 0 0\n5 A 0 0 0\n", p).is_err());
        assert!(parse_topology("3\n0\n0 A 0 0\n", p).is_err());
        match parse_topology("3\n0\n0 A 0 zz 0\n", p) {
            Err(Error::Topology { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
