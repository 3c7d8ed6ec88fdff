//! FIELD3 snapshot format and CSV helpers.
//!
//! A snapshot is one ASCII header line
//!
//! ```text
//! FIELD3 v1 N=<N> components=<C> dtype=f64 endian=little
//! ```
//!
//! followed by `C · N³` raw little-endian 64-bit floats, component-major
//! with x varying fastest within each component. Velocity fields use
//! `components=3`; flow-map Jacobians use the 9-component variant.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::field::{MatrixField, VectorField};
use crate::grid::Grid;
use crate::{Error, Result};

fn write_header(w: &mut impl Write, n: usize, components: usize) -> Result<()> {
    writeln!(w, "FIELD3 v1 N={n} components={components} dtype=f64 endian=little")?;
    Ok(())
}

fn write_components(w: &mut impl Write, comps: &[&[f64]]) -> Result<()> {
    for comp in comps {
        for v in *comp {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_field3(path: &Path, f: &VectorField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, f.grid().n(), 3)?;
    write_components(&mut w, &[f.comp(0), f.comp(1), f.comp(2)])?;
    w.flush()?;
    Ok(())
}

pub fn write_matrix9(path: &Path, m: &MatrixField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, m.grid().n(), 9)?;
    let comps: Vec<&[f64]> = m.components().iter().map(|c| c.as_slice()).collect();
    write_components(&mut w, &comps)?;
    w.flush()?;
    Ok(())
}

/// Parsed header of a snapshot file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotHeader {
    pub n: usize,
    pub components: usize,
}

fn parse_header(line: &str) -> Result<SnapshotHeader> {
    let bad = |why: &str| Error::SnapshotFormat(format!("{why}: '{line}'"));
    let mut parts = line.split_whitespace();
    if parts.next() != Some("FIELD3") {
        return Err(bad("missing FIELD3 magic"));
    }
    if parts.next() != Some("v1") {
        return Err(bad("unsupported version"));
    }
    let mut n = None;
    let mut components = None;
    for part in parts {
        match part.split_once('=') {
            Some(("N", v)) => n = v.parse().ok(),
            Some(("components", v)) => components = v.parse().ok(),
            Some(("dtype", "f64")) | Some(("endian", "little")) => {}
            Some(("dtype", other)) => {
                return Err(bad(&format!("unsupported dtype '{other}'")));
            }
            Some(("endian", other)) => {
                return Err(bad(&format!("unsupported endianness '{other}'")));
            }
            _ => return Err(bad(&format!("unrecognized header field '{part}'"))),
        }
    }
    match (n, components) {
        (Some(n), Some(components)) => Ok(SnapshotHeader { n, components }),
        _ => Err(bad("header must carry N= and components=")),
    }
}

fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, Vec<Vec<f64>>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = Vec::new();
    // Read the header line byte-wise so the binary payload stays untouched.
    loop {
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte)?;
        if byte[0] == b'\n' {
            break;
        }
        line.push(byte[0]);
        if line.len() > 256 {
            return Err(Error::SnapshotFormat("unterminated header line".into()));
        }
    }
    let header = parse_header(
        std::str::from_utf8(&line)
            .map_err(|_| Error::SnapshotFormat("header is not UTF-8".into()))?,
    )?;
    let grid = Grid::new(header.n).map_err(|_| {
        Error::SnapshotFormat(format!("snapshot resolution {} is unsupported", header.n))
    })?;
    let len = grid.len();
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    let expected = header.components * len * 8;
    if payload.len() != expected {
        return Err(Error::SnapshotFormat(format!(
            "payload is {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let mut comps = Vec::with_capacity(header.components);
    for c in 0..header.components {
        let mut v = Vec::with_capacity(len);
        let base = c * len * 8;
        for i in 0..len {
            let b: [u8; 8] = payload[base + i * 8..base + i * 8 + 8]
                .try_into()
                .expect("slice of 8 bytes");
            v.push(f64::from_le_bytes(b));
        }
        comps.push(v);
    }
    Ok((header, comps))
}

pub fn read_field3(path: &Path) -> Result<VectorField> {
    let (header, mut comps) = read_snapshot(path)?;
    if header.components != 3 {
        return Err(Error::SnapshotFormat(format!(
            "expected a 3-component snapshot, got {}",
            header.components
        )));
    }
    let grid = Grid::new(header.n)?;
    let c2 = comps.pop().expect("3 components");
    let c1 = comps.pop().expect("3 components");
    let c0 = comps.pop().expect("3 components");
    VectorField::from_components(grid, [c0, c1, c2])
}

pub fn read_matrix9(path: &Path) -> Result<MatrixField> {
    let (header, comps) = read_snapshot(path)?;
    if header.components != 9 {
        return Err(Error::SnapshotFormat(format!(
            "expected a 9-component snapshot, got {}",
            header.components
        )));
    }
    let grid = Grid::new(header.n)?;
    MatrixField::from_entries(grid, comps)
}

/// Header echo plus norms, for the `inspect` command.
#[derive(Debug, Clone)]
pub struct SnapshotReport {
    pub header: SnapshotHeader,
    /// Per-component (max |·|, L²) over the grid.
    pub component_norms: Vec<(f64, f64)>,
}

impl std::fmt::Display for SnapshotReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "FIELD3 v1 N={} components={} dtype=f64 endian=little",
            self.header.n, self.header.components
        )?;
        for (c, (max, l2)) in self.component_norms.iter().enumerate() {
            writeln!(f, "component {c}: max = {max:.6e}, l2 = {l2:.6e}")?;
        }
        Ok(())
    }
}

pub fn inspect(path: &Path) -> Result<SnapshotReport> {
    let (header, comps) = read_snapshot(path)?;
    let grid = Grid::new(header.n)?;
    let h3 = grid.spacing().powi(3);
    let component_norms = comps
        .iter()
        .map(|c| {
            let max = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let l2 = (h3 * c.iter().map(|v| v * v).sum::<f64>()).sqrt();
            (max, l2)
        })
        .collect();
    Ok(SnapshotReport {
        header,
        component_norms,
    })
}
