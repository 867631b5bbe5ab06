//! Segmentation-based reconstruction scores.
//!
//! A reconstruction is thresholded, split into 4-connected components, and
//! each component is attributed to the nearest true contrast region. ACR is
//! the mean reconstructed absorption over the pixels attributed to a region;
//! TPR is the fraction of true region pixels recovered above threshold.

mod report;

use std::collections::VecDeque;

pub use report::{
    aggregate, pgm_heatmap, read_per_sample_csv, write_per_sample_csv, BinStats, EvalReport,
    PerSampleRecord, TableRow, MULTIPLIER_BINS,
};

use crate::error::{DotError, Result};
use crate::geometry::{Phantom, Point2, VoxelGrid};

/// Default segmentation threshold as a multiple of the background absorption.
pub const DEFAULT_THRESHOLD_RATIO: f64 = 1.5;

#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    /// Voxel ordinals, ascending.
    pub voxels: Vec<usize>,
    pub centroid: Point2,
    pub mean_mu_a: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentedReconstruction {
    /// Per voxel: 0 for background, `k + 1` for component `k`.
    pub labels: Vec<usize>,
    /// Ordered by smallest voxel ordinal.
    pub components: Vec<Component>,
    pub threshold: f64,
}

impl SegmentedReconstruction {
    pub fn mask(&self) -> Vec<bool> {
        self.labels.iter().map(|&l| l != 0).collect()
    }
}

/// 4-connected components of `{j : mu_a[j] > threshold}`.
pub fn segment(mu_a: &[f64], grid: &VoxelGrid, threshold: f64) -> Result<SegmentedReconstruction> {
    if mu_a.len() != grid.len() {
        return Err(DotError::InvalidArgument(format!(
            "map has {} values for {} voxels",
            mu_a.len(),
            grid.len()
        )));
    }
    if !threshold.is_finite() {
        return Err(DotError::InvalidArgument("threshold must be finite".into()));
    }
    let mut labels = vec![0usize; mu_a.len()];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for seed in 0..mu_a.len() {
        if labels[seed] != 0 || !(mu_a[seed] > threshold) {
            continue;
        }
        let label = components.len() + 1;
        labels[seed] = label;
        queue.push_back(seed);
        let mut voxels = Vec::new();
        while let Some(j) = queue.pop_front() {
            voxels.push(j);
            for nb in grid.neighbors4(j) {
                if labels[nb] == 0 && mu_a[nb] > threshold {
                    labels[nb] = label;
                    queue.push_back(nb);
                }
            }
        }
        voxels.sort_unstable();
        let k = voxels.len() as f64;
        let (sx, sy) = voxels.iter().fold((0.0, 0.0), |(sx, sy), &j| {
            let c = grid.centroid(j);
            (sx + c.x, sy + c.y)
        });
        let mean_mu_a = voxels.iter().map(|&j| mu_a[j]).sum::<f64>() / k;
        components.push(Component {
            voxels,
            centroid: Point2::new(sx / k, sy / k),
            mean_mu_a,
        });
    }
    Ok(SegmentedReconstruction {
        labels,
        components,
        threshold,
    })
}

/// Region index for every component: the region whose center is nearest to
/// the component centroid, lower index on ties.
pub fn assign_components(seg: &SegmentedReconstruction, truth: &Phantom) -> Result<Vec<usize>> {
    if truth.regions.is_empty() {
        return Err(DotError::InvalidArgument(
            "ground truth has no contrast region".into(),
        ));
    }
    Ok(seg
        .components
        .iter()
        .map(|c| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (r, region) in truth.regions.iter().enumerate() {
                let d = c.centroid.dist(&region.center);
                if d < best_d {
                    best = r;
                    best_d = d;
                }
            }
            best
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionAcr {
    pub region: usize,
    pub multiplier: u8,
    /// `None` when no component was attributed to the region.
    pub acr: Option<f64>,
}

/// Mean reconstructed absorption over all pixels of the components
/// attributed to each true region.
pub fn acr(
    mu_a: &[f64],
    seg: &SegmentedReconstruction,
    assignment: &[usize],
    truth: &Phantom,
) -> Vec<RegionAcr> {
    truth
        .regions
        .iter()
        .enumerate()
        .map(|(r, region)| {
            let (sum, count) = seg
                .components
                .iter()
                .zip(assignment)
                .filter(|(_, &a)| a == r)
                .flat_map(|(c, _)| c.voxels.iter())
                .fold((0.0, 0usize), |(s, n), &j| (s + mu_a[j], n + 1));
            RegionAcr {
                region: r,
                multiplier: region.multiplier,
                acr: (count > 0).then(|| sum / count as f64),
            }
        })
        .collect()
}

fn truth_mask(truth: &Phantom) -> Vec<bool> {
    truth.mu_a.iter().map(|&v| v > truth.mu_a0).collect()
}

/// Recall: recovered true-region pixels over all true-region pixels.
pub fn tpr(seg: &SegmentedReconstruction, truth: &Phantom) -> Result<f64> {
    let truth_mask = truth_mask(truth);
    let total = truth_mask.iter().filter(|&&t| t).count();
    if truth.regions.is_empty() || total == 0 {
        return Err(DotError::InvalidArgument(
            "ground truth has no contrast pixels".into(),
        ));
    }
    let hit = seg
        .labels
        .iter()
        .zip(&truth_mask)
        .filter(|(&l, &t)| l != 0 && t)
        .count();
    Ok(hit as f64 / total as f64)
}

/// Precision: recovered pixels that lie in a true region over all recovered
/// pixels; 0 when nothing is recovered.
pub fn precision(seg: &SegmentedReconstruction, truth: &Phantom) -> f64 {
    let truth_mask = truth_mask(truth);
    let labelled = seg.labels.iter().filter(|&&l| l != 0).count();
    if labelled == 0 {
        return 0.0;
    }
    let hit = seg
        .labels
        .iter()
        .zip(&truth_mask)
        .filter(|(&l, &t)| l != 0 && t)
        .count();
    hit as f64 / labelled as f64
}

/// Scores of one reconstruction.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleEval {
    pub tpr: f64,
    pub precision: f64,
    pub regions: Vec<RegionAcr>,
}

pub fn evaluate_sample(
    mu_a: &[f64],
    grid: &VoxelGrid,
    truth: &Phantom,
    threshold: f64,
) -> Result<SampleEval> {
    let seg = segment(mu_a, grid, threshold)?;
    let assignment = assign_components(&seg, truth)?;
    Ok(SampleEval {
        tpr: tpr(&seg, truth)?,
        precision: precision(&seg, truth),
        regions: acr(mu_a, &seg, &assignment, truth),
    })
}
