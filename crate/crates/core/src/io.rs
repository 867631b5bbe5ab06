//! Plain-text and binary file formats.
//!
//! Phantom (text):
//!
//! ```text
//! <radius> <side> <N> <region count> <mu_a0>
//! region <id> <center x> <center y> <radius> <multiplier>     (one per region)
//! <ordinal> <x> <y> <mu_a>                                    (one per voxel)
//! ```
//!
//! Measurements (CSV): a `# noise_level=<p> seed=<n>` line, then columns
//! `pair_index,detector,source,fluence,background_fluence`.
//!
//! Sensitivity matrix (binary, little-endian): magic `DOTJACB\0`, `M` and `N`
//! as `u64`, `alpha0` as `f64`, grid hash as `u64`, then `M·N` row-major `f64`.
//!
//! Absorption maps (CSV): columns `ordinal,x,y,mu_a`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{DotError, Result};
use crate::forward::MeasurementSet;
use crate::geometry::{ContrastRegion, Phantom, Point2, ProbeLayout, VoxelGrid};
use crate::rytov::SensitivityMatrix;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| DotError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| DotError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| DotError::io(path, e))
}

/// Phantom with the grid parameters it was rasterized on.
#[derive(Clone, Debug, PartialEq)]
pub struct PhantomFile {
    pub radius: f64,
    pub side: f64,
    pub phantom: Phantom,
}

pub fn format_phantom(phantom: &Phantom, grid: &VoxelGrid) -> String {
    let mut out = format!(
        "{} {} {} {} {}\n",
        grid.radius,
        grid.side,
        grid.len(),
        phantom.regions.len(),
        phantom.mu_a0
    );
    for (k, r) in phantom.regions.iter().enumerate() {
        out.push_str(&format!(
            "region {k} {} {} {} {}\n",
            r.center.x, r.center.y, r.radius, r.multiplier
        ));
    }
    for (j, (c, mu)) in grid.centroids().iter().zip(&phantom.mu_a).enumerate() {
        out.push_str(&format!("{j} {} {} {mu}\n", c.x, c.y));
    }
    out
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| DotError::parse("phantom", format!("line {line}: missing {what}")))?
        .parse()
        .map_err(|_| DotError::parse("phantom", format!("line {line}: bad {what}")))
}

pub fn parse_phantom(text: &str) -> Result<PhantomFile> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (ln, header) = lines
        .next()
        .ok_or_else(|| DotError::parse("phantom", "empty file"))?;
    let mut h = header.split_whitespace();
    let radius: f64 = field(h.next(), ln + 1, "radius")?;
    let side: f64 = field(h.next(), ln + 1, "side")?;
    let n: usize = field(h.next(), ln + 1, "voxel count")?;
    let n_regions: usize = field(h.next(), ln + 1, "region count")?;
    let mu_a0: f64 = field(h.next(), ln + 1, "mu_a0")?;
    let mut regions = Vec::with_capacity(n_regions);
    for k in 0..n_regions {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| DotError::parse("phantom", format!("missing region {k}")))?;
        let mut t = line.split_whitespace();
        if t.next() != Some("region") {
            return Err(DotError::parse(
                "phantom",
                format!("line {}: expected region record", ln + 1),
            ));
        }
        let id: usize = field(t.next(), ln + 1, "region id")?;
        if id != k {
            return Err(DotError::parse(
                "phantom",
                format!("line {}: region {id} out of order", ln + 1),
            ));
        }
        regions.push(ContrastRegion {
            center: Point2::new(field(t.next(), ln + 1, "x")?, field(t.next(), ln + 1, "y")?),
            radius: field(t.next(), ln + 1, "radius")?,
            multiplier: field(t.next(), ln + 1, "multiplier")?,
        });
    }
    let mut mu_a = Vec::with_capacity(n);
    for (ln, line) in lines {
        let mut t = line.split_whitespace();
        let ordinal: usize = field(t.next(), ln + 1, "ordinal")?;
        if ordinal != mu_a.len() {
            return Err(DotError::parse(
                "phantom",
                format!("line {}: voxel {ordinal} out of order", ln + 1),
            ));
        }
        let _x: f64 = field(t.next(), ln + 1, "x")?;
        let _y: f64 = field(t.next(), ln + 1, "y")?;
        mu_a.push(field(t.next(), ln + 1, "mu_a")?);
    }
    if mu_a.len() != n {
        return Err(DotError::parse(
            "phantom",
            format!("{} voxels listed, header says {n}", mu_a.len()),
        ));
    }
    Ok(PhantomFile {
        radius,
        side,
        phantom: Phantom {
            mu_a0,
            regions,
            mu_a,
        },
    })
}

#[derive(Serialize, Deserialize)]
struct MeasurementRow {
    pair_index: usize,
    detector: usize,
    source: usize,
    fluence: f64,
    background_fluence: f64,
}

pub fn format_measurements(m: &MeasurementSet) -> Result<String> {
    let mut buf = format!("# noise_level={} seed={}\n", m.noise_level, m.seed).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for i in 0..m.len() {
            let (detector, source) = m.layout.pair(i);
            w.serialize(MeasurementRow {
                pair_index: i,
                detector,
                source,
                fluence: m.fluence[i],
                background_fluence: m.background_fluence[i],
            })
            .map_err(|e| DotError::parse("measurements", e))?;
        }
        w.flush().map_err(|e| DotError::parse("measurements", e))?;
    }
    String::from_utf8(buf).map_err(|e| DotError::parse("measurements", e))
}

/// Parses a measurement CSV for the given probe layout.
pub fn parse_measurements(text: &str, layout: &ProbeLayout) -> Result<MeasurementSet> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let meta = first.strip_prefix('#').ok_or_else(|| {
        DotError::parse("measurements", "missing '# noise_level=.. seed=..' line")
    })?;
    let mut noise_level = None;
    let mut seed = None;
    for kv in meta.split_whitespace() {
        match kv.split_once('=') {
            Some(("noise_level", v)) => noise_level = v.parse::<f64>().ok(),
            Some(("seed", v)) => seed = v.parse::<u64>().ok(),
            _ => {}
        }
    }
    let (noise_level, seed) = noise_level
        .zip(seed)
        .ok_or_else(|| DotError::parse("measurements", "bad noise_level or seed"))?;
    let mut fluence = Vec::with_capacity(layout.n_pairs());
    let mut background_fluence = Vec::with_capacity(layout.n_pairs());
    for row in csv::Reader::from_reader(rest.as_bytes()).deserialize::<MeasurementRow>() {
        let row = row.map_err(|e| DotError::parse("measurements", e))?;
        if row.pair_index != fluence.len()
            || layout.pair_index(row.detector, row.source) != row.pair_index
        {
            return Err(DotError::parse(
                "measurements",
                format!("pair {} does not match the probe layout", row.pair_index),
            ));
        }
        fluence.push(row.fluence);
        background_fluence.push(row.background_fluence);
    }
    if fluence.len() != layout.n_pairs() {
        return Err(DotError::parse(
            "measurements",
            format!(
                "{} pairs listed, layout has {}",
                fluence.len(),
                layout.n_pairs()
            ),
        ));
    }
    Ok(MeasurementSet {
        layout: layout.clone(),
        fluence,
        background_fluence,
        noise_level,
        seed,
    })
}

const JACOBIAN_MAGIC: &[u8; 8] = b"DOTJACB\0";

pub fn write_jacobian<W: Write>(j: &SensitivityMatrix, mut w: W) -> Result<()> {
    let mut put = |b: &[u8]| w.write_all(b).map_err(|e| DotError::parse("jacobian", e));
    put(JACOBIAN_MAGIC)?;
    put(&(j.n_pairs() as u64).to_le_bytes())?;
    put(&(j.n_voxels() as u64).to_le_bytes())?;
    put(&j.alpha0.to_le_bytes())?;
    put(&j.grid_hash.to_le_bytes())?;
    let mut row = Vec::with_capacity(8 * j.n_voxels());
    for r in 0..j.n_pairs() {
        row.clear();
        for c in 0..j.n_voxels() {
            row.extend_from_slice(&j.entries[(r, c)].to_le_bytes());
        }
        put(&row)?;
    }
    w.flush().map_err(|e| DotError::parse("jacobian", e))
}

pub fn read_jacobian<R: Read>(mut r: R) -> Result<SensitivityMatrix> {
    let mut take = |n: usize| -> Result<Vec<u8>> {
        let mut b = vec![0u8; n];
        r.read_exact(&mut b)
            .map_err(|e| DotError::parse("jacobian", e))?;
        Ok(b)
    };
    if take(8)? != JACOBIAN_MAGIC {
        return Err(DotError::parse("jacobian", "bad magic"));
    }
    let word = |b: Vec<u8>| -> [u8; 8] { b.try_into().expect("eight bytes") };
    let m = u64::from_le_bytes(word(take(8)?)) as usize;
    let n = u64::from_le_bytes(word(take(8)?)) as usize;
    let alpha0 = f64::from_le_bytes(word(take(8)?));
    let grid_hash = u64::from_le_bytes(word(take(8)?));
    if m.checked_mul(n).is_none_or(|mn| mn > 1 << 28) {
        return Err(DotError::parse(
            "jacobian",
            format!("implausible shape {m}×{n}"),
        ));
    }
    let data = take(8 * m * n)?;
    let values: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
        .collect();
    Ok(SensitivityMatrix {
        entries: DMatrix::from_row_slice(m, n, &values),
        alpha0,
        grid_hash,
    })
}

/// Sensitivity matrix as CSV, one row per measurement pair.
pub fn jacobian_csv(j: &SensitivityMatrix) -> String {
    let mut out = format!("# alpha0={} grid_hash={}\n", j.alpha0, j.grid_hash);
    for r in 0..j.n_pairs() {
        let row: Vec<String> = (0..j.n_voxels())
            .map(|c| format!("{:e}", j.entries[(r, c)]))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Serialize, Deserialize)]
struct MapRow {
    ordinal: usize,
    x: f64,
    y: f64,
    mu_a: f64,
}

pub fn format_map(mu_a: &[f64], grid: &VoxelGrid) -> Result<String> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for (j, (c, &v)) in grid.centroids().iter().zip(mu_a).enumerate() {
            w.serialize(MapRow {
                ordinal: j,
                x: c.x,
                y: c.y,
                mu_a: v,
            })
            .map_err(|e| DotError::parse("absorption map", e))?;
        }
        w.flush()
            .map_err(|e| DotError::parse("absorption map", e))?;
    }
    String::from_utf8(buf).map_err(|e| DotError::parse("absorption map", e))
}

pub fn parse_map(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(text.as_bytes()).deserialize::<MapRow>() {
        let row = row.map_err(|e| DotError::parse("absorption map", e))?;
        if row.ordinal != out.len() {
            return Err(DotError::parse(
                "absorption map",
                format!("voxel {} out of order", row.ordinal),
            ));
        }
        out.push(row.mu_a);
    }
    Ok(out)
}
