//! Rytov linearization of the diffusion model.
//!
//! With `u = u0·e^{ψ}` and a small absorption perturbation `δμ_a`, the
//! log-amplitude fluctuation at detector `d` for source `s` is linear in
//! `δμ_a`. The free-space kernel of `[Δ − α²]` and the reciprocity of the
//! background field give, per voxel `j` and pair `i = (l, k)`,
//!
//! ```text
//! J_ij = ΔV_j / U0(s_k, d_l) · G(d_l − r_j) · (1/D) · U0(s_k, r_j)
//! ```
//!
//! so that `log(u/u0) ≈ −J δμ_a`. All entries of `J` are positive; the
//! reconstruction right-hand side is the attenuation `−log(u/u0)`.

mod bessel;
mod tikhonov;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

pub use bessel::k0;
pub use tikhonov::{filter_factor, tikhonov_filtered_solve, FilteredSvd};

use crate::error::{DotError, Result};
use crate::forward::MeasurementSet;
use crate::geometry::{DomainSpec, Point2, ProbeLayout, VoxelGrid};

/// Free-space Green's function of `[Δ − α²]` in 2D: `G(r) = K0(α|r|) / 2π`.
pub fn greens_modified_helmholtz(alpha: f64, r: &Point2) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(DotError::InvalidArgument(format!(
            "attenuation {alpha} must be positive"
        )));
    }
    let dist = r.norm();
    if dist == 0.0 {
        return Err(DotError::Singularity(
            "Green's function evaluated at zero distance".into(),
        ));
    }
    Ok(greens_at_distance(alpha, dist))
}

#[inline]
fn greens_at_distance(alpha: f64, dist: f64) -> f64 {
    k0(alpha * dist) / (2.0 * PI)
}

/// Homogeneous free-space fluence at `a` for a source at `b` (or vice versa):
/// `U0(a, b) = (S0 / D)·G(a − b)`.
pub fn background_fluence_greens(spec: &DomainSpec, a: &Point2, b: &Point2) -> Result<f64> {
    let g = greens_modified_helmholtz(spec.alpha0(), &a.sub(b))?;
    Ok(spec.source_intensity / spec.diffusion() * g)
}

/// Dense `M × N` Rytov sensitivity matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityMatrix {
    pub entries: DMatrix<f64>,
    pub alpha0: f64,
    pub grid_hash: u64,
}

impl SensitivityMatrix {
    pub fn n_pairs(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_voxels(&self) -> usize {
        self.entries.ncols()
    }
}

/// Assemble the sensitivity matrix, clamping probe-to-centroid distances
/// below half a voxel side to half a voxel side.
pub fn assemble_jacobian(
    spec: &DomainSpec,
    grid: &VoxelGrid,
    layout: &ProbeLayout,
) -> Result<SensitivityMatrix> {
    spec.validate()?;
    let alpha = spec.alpha0();
    let d = spec.diffusion();
    let s0_over_d = spec.source_intensity / d;
    let min_dist = 0.5 * grid.side;
    let n = grid.len();
    let m = layout.n_pairs();
    let centroids = grid.centroids();

    // Source-to-voxel and detector-to-voxel kernels are shared by many rows.
    let kernel_rows = |probes: &[Point2]| -> Vec<Vec<f64>> {
        probes
            .iter()
            .map(|p| {
                centroids
                    .iter()
                    .map(|c| greens_at_distance(alpha, p.dist(c).max(min_dist)))
                    .collect()
            })
            .collect()
    };
    let g_src = kernel_rows(&layout.sources);
    let g_det = kernel_rows(&layout.detectors);

    let mut rows = vec![0.0; m * n];
    rows.par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(i, row)| {
            let (l, k) = layout.pair(i);
            let u0_sd = s0_over_d
                * greens_modified_helmholtz(alpha, &layout.sources[k].sub(&layout.detectors[l]))?;
            for (j, v) in row.iter_mut().enumerate() {
                let u0_sr = s0_over_d * g_src[k][j];
                *v = grid.volume(j) / u0_sd * g_det[l][j] / d * u0_sr;
            }
            Ok::<(), DotError>(())
        })?;
    Ok(SensitivityMatrix {
        entries: DMatrix::from_row_slice(m, n, &rows),
        alpha0: alpha,
        grid_hash: grid.fingerprint(),
    })
}

/// Log-ratio data `y = log(u/u0)`, pair-ordered.
#[derive(Clone, Debug, PartialEq)]
pub struct RytovData {
    pub values: Vec<f64>,
    pub noise_level: f64,
}

impl RytovData {
    /// `−y = log(u0/u)`, the data matched by `J δμ_a`.
    pub fn attenuation(&self) -> Vec<f64> {
        self.values.iter().map(|v| -v).collect()
    }
}

pub fn rytov_transform(m: &MeasurementSet) -> Result<RytovData> {
    let values = m
        .fluence
        .iter()
        .zip(&m.background_fluence)
        .enumerate()
        .map(|(i, (&u, &u0))| {
            if u > 0.0 && u0 > 0.0 {
                Ok((u / u0).ln())
            } else {
                Err(DotError::Domain(format!(
                    "non-positive fluence at pair {i}"
                )))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RytovData {
        values,
        noise_level: m.noise_level,
    })
}
