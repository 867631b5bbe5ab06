//! Per-sample records, aggregate tables and heatmaps.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::SampleEval;
use crate::error::{DotError, Result};
use crate::geometry::VoxelGrid;

/// Intensity bins, as multiples of the background absorption.
pub const MULTIPLIER_BINS: [u8; 3] = [3, 4, 5];

/// One row of the per-sample CSV: one true region of one reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerSampleRecord {
    pub sample_id: usize,
    pub method: String,
    pub noise: f64,
    pub region_id: usize,
    pub bin: u8,
    pub acr: Option<f64>,
    pub tpr: f64,
    pub precision: f64,
}

impl PerSampleRecord {
    pub fn from_eval(sample_id: usize, method: &str, noise: f64, eval: &SampleEval) -> Vec<Self> {
        eval.regions
            .iter()
            .map(|r| Self {
                sample_id,
                method: method.to_string(),
                noise,
                region_id: r.region,
                bin: r.multiplier,
                acr: r.acr,
                tpr: eval.tpr,
                precision: eval.precision,
            })
            .collect()
    }
}

pub fn write_per_sample_csv<W: Write>(records: &[PerSampleRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)
            .map_err(|e| DotError::parse("per-sample csv", e))?;
    }
    w.flush()
        .map_err(|e| DotError::parse("per-sample csv", e))?;
    Ok(())
}

pub fn read_per_sample_csv<R: Read>(input: R) -> Result<Vec<PerSampleRecord>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(|e| DotError::parse("per-sample csv", e)))
        .collect()
}

/// Mean and population standard deviation of the ACR values in one bin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinStats {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub method: String,
    pub noise: f64,
    /// Aligned with [`MULTIPLIER_BINS`]; `None` when no region of that bin
    /// was recovered.
    pub acr: Vec<Option<BinStats>>,
    pub tpr_mean: f64,
    pub tpr_std: f64,
    pub precision_mean: f64,
    /// Fraction of true regions with no attributed component.
    pub missed_rate: f64,
    pub n_samples: usize,
}

/// Aggregate table, one row per (method, noise level).
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<TableRow>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn same_noise(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

/// Mean ± std per (method, noise, bin) and mean TPR per (method, noise).
pub fn aggregate(
    records: &[PerSampleRecord],
    methods: &[String],
    noise_levels: &[f64],
) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(DotError::InvalidArgument(
            "no per-sample results to aggregate".into(),
        ));
    }
    if methods.is_empty() || noise_levels.is_empty() {
        return Err(DotError::InvalidArgument(
            "empty method or noise list".into(),
        ));
    }
    let mut rows = Vec::with_capacity(methods.len() * noise_levels.len());
    for method in methods {
        for &noise in noise_levels {
            let subset: Vec<&PerSampleRecord> = records
                .iter()
                .filter(|r| &r.method == method && same_noise(r.noise, noise))
                .collect();
            if subset.is_empty() {
                return Err(DotError::InvalidArgument(format!(
                    "no results for method {method} at noise {noise}"
                )));
            }
            let mut samples: Vec<(usize, f64, f64)> = subset
                .iter()
                .map(|r| (r.sample_id, r.tpr, r.precision))
                .collect();
            samples.sort_by_key(|s| s.0);
            samples.dedup_by_key(|s| s.0);
            let tprs: Vec<f64> = samples.iter().map(|s| s.1).collect();
            let precisions: Vec<f64> = samples.iter().map(|s| s.2).collect();
            let (tpr_mean, tpr_std) = mean_std(&tprs);
            let acr = MULTIPLIER_BINS
                .iter()
                .map(|&bin| {
                    let v: Vec<f64> = subset
                        .iter()
                        .filter(|r| r.bin == bin)
                        .filter_map(|r| r.acr)
                        .collect();
                    (!v.is_empty()).then(|| {
                        let (mean, std) = mean_std(&v);
                        BinStats {
                            mean,
                            std,
                            count: v.len(),
                        }
                    })
                })
                .collect();
            let missed = subset.iter().filter(|r| r.acr.is_none()).count();
            rows.push(TableRow {
                method: method.clone(),
                noise,
                acr,
                tpr_mean,
                tpr_std,
                precision_mean: mean_std(&precisions).0,
                missed_rate: missed as f64 / subset.len() as f64,
                n_samples: samples.len(),
            });
        }
    }
    Ok(EvalReport { rows })
}

impl EvalReport {
    pub fn row(&self, method: &str, noise: f64) -> Option<&TableRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && same_noise(r.noise, noise))
    }

    /// CSV mirroring the layout of the comparison table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,noise");
        for bin in MULTIPLIER_BINS {
            out.push_str(&format!(",acr_{bin}x_mean,acr_{bin}x_std,acr_{bin}x_count"));
        }
        out.push_str(",tpr_mean,tpr_std,precision_mean,missed_rate,n_samples\n");
        for r in &self.rows {
            out.push_str(&format!("{},{}", r.method, r.noise));
            for b in &r.acr {
                match b {
                    Some(s) => out.push_str(&format!(",{:.6e},{:.6e},{}", s.mean, s.std, s.count)),
                    None => out.push_str(",,,0"),
                }
            }
            out.push_str(&format!(
                ",{:.6},{:.6},{:.6},{:.6},{}\n",
                r.tpr_mean, r.tpr_std, r.precision_mean, r.missed_rate, r.n_samples
            ));
        }
        out
    }
}

/// Plain PGM rendering of an absorption map, top row = largest `y`.
pub fn pgm_heatmap(mu_a: &[f64], grid: &VoxelGrid, mu_a0: f64) -> String {
    let mut out = format!(
        "P2\n# gray = round(255 * clamp((mu_a - {mu_a0}) / (4 * {mu_a0}), 0, 1)); outside the domain = 0\n{} {}\n255\n",
        grid.n_cols, grid.n_rows
    );
    for row in (0..grid.n_rows).rev() {
        let line: Vec<String> = (0..grid.n_cols)
            .map(|col| {
                grid.index(row, col).map_or(0, |j| {
                    let t = ((mu_a[j] - mu_a0) / (4.0 * mu_a0)).clamp(0.0, 1.0);
                    (255.0 * t).round() as u32
                })
            })
            .map(|g| g.to_string())
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}
