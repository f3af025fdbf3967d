//! CSV snapshots of coefficient fields.
//!
//! Header `k1,re,im` (1D) or `k1,k2,re,im` (2D), one row per stored mode in
//! lexicographic order, values written with 17 significant digits so that a
//! save/load cycle is lossless.

use std::collections::btree_map::Entry;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{KsError, Result};
use crate::spectral::{CoefficientMap, SpectrumField, TorusGrid, Trajectory};

/// Parsed snapshot contents, before a period length is attached.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub dim: usize,
    pub coeffs: CoefficientMap,
}

impl Snapshot {
    /// Largest `|k_j|` present, at least 1.
    pub fn inferred_cutoff(&self) -> usize {
        self.coeffs
            .keys()
            .map(|k| k[0].unsigned_abs().max(k[1].unsigned_abs()) as usize)
            .max()
            .unwrap_or(1)
            .max(1)
    }

    /// Places the coefficients on a grid with the given periods. The cutoff
    /// defaults to the inferred one.
    pub fn to_field(&self, lengths: &[f64], cutoff: Option<usize>) -> Result<SpectrumField> {
        if lengths.len() != self.dim {
            return Err(KsError::DimensionMismatch {
                expected: self.dim,
                got: lengths.len(),
            });
        }
        let grid = TorusGrid::new(lengths, cutoff.unwrap_or_else(|| self.inferred_cutoff()))?;
        let mut field = SpectrumField::zeros(&grid);
        for (&k, &v) in &self.coeffs {
            field.set(k, v)?;
        }
        Ok(field)
    }
}

fn header(dim: usize) -> &'static str {
    if dim == 1 {
        "k1,re,im"
    } else {
        "k1,k2,re,im"
    }
}

/// Renders a field in snapshot format.
pub fn format_snapshot(field: &SpectrumField) -> String {
    let dim = field.grid().dim();
    let mut out = String::with_capacity(48 * field.coeffs().len() + 16);
    out.push_str(header(dim));
    out.push('\n');
    for (k, c) in field.iter() {
        if dim == 1 {
            let _ = writeln!(out, "{},{:.16e},{:.16e}", k[0], c.re, c.im);
        } else {
            let _ = writeln!(out, "{},{},{:.16e},{:.16e}", k[0], k[1], c.re, c.im);
        }
    }
    out
}

/// Parses snapshot text. Malformed rows, duplicate or zero wavevectors and
/// non-finite values are rejected with the offending (1-based) line number.
pub fn parse_snapshot(text: &str) -> Result<Snapshot> {
    let mut lines = text.lines().enumerate();
    let dim = loop {
        match lines.next() {
            None => {
                return Err(KsError::Parse {
                    line: 1,
                    message: "missing header".into(),
                })
            }
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((i, l)) => {
                let h: String = l.chars().filter(|c| !c.is_whitespace()).collect();
                break match h.as_str() {
                    "k1,re,im" => 1,
                    "k1,k2,re,im" => 2,
                    _ => {
                        return Err(KsError::Parse {
                            line: i + 1,
                            message: format!("unrecognised header {l:?}"),
                        })
                    }
                };
            }
        }
    };

    let mut coeffs = CoefficientMap::new();
    for (i, raw) in lines {
        let line = i + 1;
        let row = raw.trim();
        if row.is_empty() {
            continue;
        }
        let err = |message: String| KsError::Parse { line, message };
        let cells: Vec<&str> = row.split(',').map(str::trim).collect();
        if cells.len() != dim + 2 {
            return Err(err(format!(
                "expected {} columns, found {}",
                dim + 2,
                cells.len()
            )));
        }
        let mut k = [0i32; 2];
        for (j, cell) in cells[..dim].iter().enumerate() {
            k[j] = cell
                .parse()
                .map_err(|_| err(format!("bad wavevector component {cell:?}")))?;
        }
        let mut parts = [0.0f64; 2];
        for (j, cell) in cells[dim..].iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| err(format!("bad number {cell:?}")))?;
            if !v.is_finite() {
                return Err(err(format!("non-finite value {cell:?}")));
            }
            parts[j] = v;
        }
        if k == [0, 0] {
            return Err(err("zero mode present; snapshots are mean-free".into()));
        }
        if k.iter().any(|c| c.unsigned_abs() > (i32::MAX as u32) / 4) {
            return Err(err(format!("wavevector {k:?} out of range")));
        }
        match coeffs.entry(k) {
            Entry::Occupied(_) => return Err(err(format!("duplicate wavevector {k:?}"))),
            Entry::Vacant(v) => {
                v.insert(Complex64::new(parts[0], parts[1]));
            }
        }
    }
    Ok(Snapshot { dim, coeffs })
}

/// Parses a snapshot onto a known grid. Rows beyond the cutoff are an error.
pub fn parse_snapshot_on(text: &str, grid: &TorusGrid) -> Result<SpectrumField> {
    let snap = parse_snapshot(text)?;
    if snap.dim != grid.dim() {
        return Err(KsError::DimensionMismatch {
            expected: grid.dim(),
            got: snap.dim,
        });
    }
    if let Some(k) = snap.coeffs.keys().find(|&&k| !grid.contains(k)) {
        return Err(KsError::InvalidGrid(format!(
            "snapshot mode {k:?} lies outside cutoff {}",
            grid.cutoff()
        )));
    }
    snap.to_field(grid.lengths(), Some(grid.cutoff()))
}

pub fn save_snapshot(field: &SpectrumField, path: &Path) -> Result<()> {
    fs::write(path, format_snapshot(field))?;
    Ok(())
}

/// Loads a snapshot. Without a grid the periods default to `2 pi` and the
/// cutoff is inferred.
pub fn load_snapshot(path: &Path, grid: Option<&TorusGrid>) -> Result<SpectrumField> {
    let text = fs::read_to_string(path)?;
    match grid {
        Some(g) => parse_snapshot_on(&text, g),
        None => {
            let snap = parse_snapshot(&text)?;
            let lengths = vec![2.0 * std::f64::consts::PI; snap.dim];
            snap.to_field(&lengths, None)
        }
    }
}

/// Trajectory in long form: header `t,k1[,k2],re,im`, nodes in time order.
pub fn format_trajectory(traj: &Trajectory) -> String {
    let dim = traj.grid().dim();
    let mut out = String::new();
    out.push_str("t,");
    out.push_str(header(dim));
    out.push('\n');
    for (&t, field) in traj.times().iter().zip(traj.fields()) {
        for (k, c) in field.iter() {
            if dim == 1 {
                let _ = writeln!(out, "{t:.16e},{},{:.16e},{:.16e}", k[0], c.re, c.im);
            } else {
                let _ = writeln!(
                    out,
                    "{t:.16e},{},{},{:.16e},{:.16e}",
                    k[0], k[1], c.re, c.im
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn two_dimensional_row() {
        let s = parse_snapshot("k1,k2,re,im\n1,-1,0.5,0.25\n").unwrap();
        assert_eq!(s.dim, 2);
        assert_eq!(s.coeffs[&[1, -1]], Complex64::new(0.5, 0.25));
        let f = s.to_field(&[PI, PI], None).unwrap();
        assert_eq!(f.grid().cutoff(), 1);
        assert_eq!(f.get([1, -1]), Complex64::new(0.5, 0.25));
    }

    #[test]
    fn rejects_bad_rows_with_line_numbers() {
        let cases = [
            ("k1,re,im\n1,1,0\n0,1,0\n", 3),
            ("k1,re,im\n1,1,0\n1,2,0\n", 3),
            ("k1,re,im\n1,1\n", 2),
            ("k1,re,im\nx,1,0\n", 2),
            ("k1,re,im\n1,nan,0\n", 2),
            ("k1,re,im\n1,inf,0\n", 2),
            ("k,re,im\n1,0,0\n", 1),
            ("", 1),
        ];
        for (text, line) in cases {
            match parse_snapshot(text) {
                Err(KsError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn grid_checks() {
        let g = TorusGrid::line(PI, 2).unwrap();
        assert!(parse_snapshot_on("k1,re,im\n3,1,0\n", &g).is_err());
        assert!(parse_snapshot_on("k1,k2,re,im\n1,1,1,0\n", &g).is_err());
        let f = parse_snapshot_on("k1,re,im\n-1,1,0\n1,1,0\n", &g).unwrap();
        assert_eq!(f.grid(), &g);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let g = TorusGrid::plane(1.0, 2.0, 3).unwrap();
        let f = SpectrumField::from_fn(&g, |k| {
            Complex64::new((k[0] as f64 / 7.0).sin(), 1.0 / (k[1] as f64 + 0.3))
        });
        save_snapshot(&f, &path).unwrap();
        assert_eq!(load_snapshot(&path, Some(&g)).unwrap(), f);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("k1,k2,re,im\n-3,-3,"));
    }

    proptest! {
        #[test]
        fn roundtrip_is_lossless(vals in proptest::collection::vec((any::<f64>(), any::<f64>()), 24)) {
            let g = TorusGrid::plane(3.0, 5.0, 2).unwrap();
            let coeffs = vals
                .into_iter()
                .map(|(a, b)| Complex64::new(
                    if a.is_finite() { a } else { 0.0 },
                    if b.is_finite() { b } else { 0.0 },
                ))
                .collect();
            let f = SpectrumField::from_packed(&g, coeffs).unwrap();
            let back = parse_snapshot_on(&format_snapshot(&f), &g).unwrap();
            prop_assert_eq!(back.to_map(), f.to_map());
        }

        #[test]
        fn parser_never_panics(s in "\\PC*") {
            let _ = parse_snapshot(&s);
        }
    }
}
