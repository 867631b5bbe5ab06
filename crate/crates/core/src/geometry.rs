//! Semidisk domain, voxelization, probe layout and random phantoms.
//!
//! The domain is the upper half disk `{x² + y² < R², y > 0}`. Sources sit on
//! the straight boundary, inset by a small distance; detectors lie on the
//! semicircular arc.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{DotError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn sub(&self, other: &Point2) -> Point2 {
        Point2::new(self.x - other.x, self.y - other.y)
    }
}

/// Physical and probe parameters of the semidisk phantom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    /// Semidisk radius (cm).
    pub radius: f64,
    /// Background absorption coefficient (cm⁻¹).
    pub mu_a0: f64,
    /// Reduced scattering coefficient (1 − g)·μ_s (cm⁻¹).
    pub reduced_scattering: f64,
    /// Accommodation coefficient A_c of the Robin condition.
    pub accommodation: f64,
    /// Source intensity S0 (W).
    pub source_intensity: f64,
    pub n_sources: usize,
    pub n_detectors: usize,
    /// Distance of the sources from the straight boundary (cm).
    pub source_inset: f64,
    /// Upper bound on admissible absorption (cm⁻¹).
    pub mu_a_bound: f64,
    /// Upper bound on admissible reduced scattering (cm⁻¹).
    pub scattering_bound: f64,
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self {
            radius: 5.0,
            mu_a0: 0.01,
            reduced_scattering: 0.1,
            accommodation: 1.0,
            source_intensity: 1.0,
            n_sources: 19,
            n_detectors: 20,
            source_inset: 0.1,
            mu_a_bound: 1.0,
            scattering_bound: 100.0,
        }
    }
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(DotError::InvalidArgument(msg.to_string()));
        if !(self.radius > 0.0) {
            return bad("radius must be positive");
        }
        if !(self.mu_a0 > 0.0 && self.mu_a0 <= self.mu_a_bound) {
            return bad("mu_a0 must lie in (0, mu_a_bound]");
        }
        if !(self.reduced_scattering > 0.0 && self.reduced_scattering <= self.scattering_bound) {
            return bad("reduced scattering must lie in (0, scattering_bound]");
        }
        if !(self.accommodation > 0.0) {
            return bad("accommodation coefficient must be positive");
        }
        if !(self.source_intensity > 0.0) {
            return bad("source intensity must be positive");
        }
        if !(self.source_inset > 0.0 && self.source_inset < self.radius) {
            return bad("source inset must lie in (0, radius)");
        }
        if self.n_sources == 0 || self.n_detectors == 0 {
            return bad("at least one source and one detector are required");
        }
        Ok(())
    }

    /// Diffusion coefficient D = 1 / (3 (1 − g) μ_s), in cm.
    pub fn diffusion(&self) -> f64 {
        1.0 / (3.0 * self.reduced_scattering)
    }

    /// Attenuation of the modified Helmholtz operator, α = √(μ_a0 / D).
    pub fn alpha0(&self) -> f64 {
        (self.mu_a0 / self.diffusion()).sqrt()
    }

    /// Robin coefficient 1 / (2 A_c).
    pub fn robin(&self) -> f64 {
        0.5 / self.accommodation
    }

    pub fn n_pairs(&self) -> usize {
        self.n_sources * self.n_detectors
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.y > 0.0 && p.norm() < self.radius
    }
}

/// Square voxels whose centroids fall strictly inside the semidisk.
///
/// Voxels are indexed by ordinal `j` in row-major order over the bounding box
/// `[-R, R] × [0, R]`; row 0 is the bottom row.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    pub radius: f64,
    pub side: f64,
    pub n_rows: usize,
    pub n_cols: usize,
    centroids: Vec<Point2>,
    cells: Vec<(usize, usize)>,
    mask: Vec<Option<usize>>,
}

impl VoxelGrid {
    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn centroids(&self) -> &[Point2] {
        &self.centroids
    }

    pub fn centroid(&self, j: usize) -> Point2 {
        self.centroids[j]
    }

    /// Area ΔV_j of voxel `j` (all voxels are full squares).
    pub fn volume(&self, _j: usize) -> f64 {
        self.side * self.side
    }

    /// `(row, col)` of voxel `j`.
    pub fn cell(&self, j: usize) -> (usize, usize) {
        self.cells[j]
    }

    /// Voxel ordinal at `(row, col)`, if that cell is inside the domain.
    pub fn index(&self, row: usize, col: usize) -> Option<usize> {
        if row >= self.n_rows || col >= self.n_cols {
            return None;
        }
        self.mask[row * self.n_cols + col]
    }

    /// Lattice centroid of `(row, col)`, whether or not it is in the domain.
    pub fn lattice_point(&self, row: usize, col: usize) -> Point2 {
        Point2::new(
            -self.radius + (col as f64 + 0.5) * self.side,
            (row as f64 + 0.5) * self.side,
        )
    }

    /// 4-neighbours of voxel `j` that are inside the domain.
    pub fn neighbors4(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        let (r, c) = self.cells[j];
        let candidates = [
            (r.wrapping_sub(1), c),
            (r + 1, c),
            (r, c.wrapping_sub(1)),
            (r, c + 1),
        ];
        candidates
            .into_iter()
            .filter_map(move |(rr, cc)| self.index(rr, cc))
    }

    /// Stable fingerprint of the grid layout.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = Sha256::new();
        hasher.update(self.radius.to_le_bytes());
        hasher.update(self.side.to_le_bytes());
        hasher.update((self.len() as u64).to_le_bytes());
        for c in &self.centroids {
            hasher.update(c.x.to_le_bytes());
            hasher.update(c.y.to_le_bytes());
        }
        let digest = hasher.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }
}

/// Voxelize the semidisk with square voxels of the given side.
pub fn build_grid(spec: &DomainSpec, side: f64) -> Result<VoxelGrid> {
    if !(side > 0.0 && side < spec.radius) {
        return Err(DotError::InvalidArgument(format!(
            "voxel side {side} must lie in (0, radius = {})",
            spec.radius
        )));
    }
    let radius = spec.radius;
    let n_cols = (2.0 * radius / side).ceil() as usize;
    let n_rows = (radius / side).ceil() as usize;
    let mut grid = VoxelGrid {
        radius,
        side,
        n_rows,
        n_cols,
        centroids: Vec::new(),
        cells: Vec::new(),
        mask: vec![None; n_rows * n_cols],
    };
    for row in 0..n_rows {
        for col in 0..n_cols {
            let p = grid.lattice_point(row, col);
            if spec.contains(&p) {
                grid.mask[row * n_cols + col] = Some(grid.centroids.len());
                grid.centroids.push(p);
                grid.cells.push((row, col));
            }
        }
    }
    if grid.is_empty() {
        return Err(DotError::InvalidArgument(format!(
            "voxel side {side} leaves no voxel inside the domain"
        )));
    }
    Ok(grid)
}

/// Source and detector positions.
///
/// Measurement pairs are ordered source-major: pair `i = k·n_d + l` holds
/// detector `l` and source `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeLayout {
    pub sources: Vec<Point2>,
    pub detectors: Vec<Point2>,
}

impl ProbeLayout {
    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn n_detectors(&self) -> usize {
        self.detectors.len()
    }

    pub fn n_pairs(&self) -> usize {
        self.sources.len() * self.detectors.len()
    }

    pub fn pair_index(&self, detector: usize, source: usize) -> usize {
        source * self.detectors.len() + detector
    }

    /// `(detector, source)` of pair `i`.
    pub fn pair(&self, i: usize) -> (usize, usize) {
        let nd = self.detectors.len();
        (i % nd, i / nd)
    }
}

/// Sources evenly spaced along the diameter at height `source_inset`, numbered
/// left to right; detectors at arc angles `(l + ½)·π / n_d`, numbered
/// counterclockwise from the rightmost one.
pub fn place_probes(spec: &DomainSpec) -> Result<ProbeLayout> {
    if spec.n_sources == 0 || spec.n_detectors == 0 {
        return Err(DotError::InvalidArgument(
            "at least one source and one detector are required".into(),
        ));
    }
    let r = spec.radius;
    let ns = spec.n_sources as f64;
    let sources = (0..spec.n_sources)
        .map(|k| {
            Point2::new(
                -r + 2.0 * r * (k as f64 + 1.0) / (ns + 1.0),
                spec.source_inset,
            )
        })
        .collect();
    let nd = spec.n_detectors as f64;
    let detectors = (0..spec.n_detectors)
        .map(|l| {
            let theta = std::f64::consts::PI * (l as f64 + 0.5) / nd;
            Point2::new(r * theta.cos(), r * theta.sin())
        })
        .collect();
    Ok(ProbeLayout { sources, detectors })
}

/// Circular inclusion with absorption `multiplier · μ_a0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrastRegion {
    pub center: Point2,
    pub radius: f64,
    pub multiplier: u8,
}

impl ContrastRegion {
    pub fn contains(&self, p: &Point2) -> bool {
        self.center.dist(p) < self.radius
    }
}

/// Absorption at `p` for a background `mu_a0` with the given inclusions.
pub fn absorption_at(mu_a0: f64, regions: &[ContrastRegion], p: &Point2) -> f64 {
    regions
        .iter()
        .find(|r| r.contains(p))
        .map_or(mu_a0, |r| f64::from(r.multiplier) * mu_a0)
}

/// Ground-truth absorption map on a voxel grid plus its generating disks.
#[derive(Clone, Debug, PartialEq)]
pub struct Phantom {
    pub mu_a0: f64,
    pub regions: Vec<ContrastRegion>,
    pub mu_a: Vec<f64>,
}

impl Phantom {
    /// Rasterize `regions` by the centroid-in-disk rule.
    pub fn rasterize(grid: &VoxelGrid, mu_a0: f64, regions: Vec<ContrastRegion>) -> Self {
        let mu_a = grid
            .centroids()
            .iter()
            .map(|c| absorption_at(mu_a0, &regions, c))
            .collect();
        Self {
            mu_a0,
            regions,
            mu_a,
        }
    }

    pub fn background(grid: &VoxelGrid, mu_a0: f64) -> Self {
        Self::rasterize(grid, mu_a0, Vec::new())
    }

    /// Voxels whose centroid lies inside region `r`.
    pub fn region_voxels(&self, grid: &VoxelGrid, r: usize) -> Vec<usize> {
        let region = &self.regions[r];
        grid.centroids()
            .iter()
            .enumerate()
            .filter(|(_, c)| region.contains(c))
            .map(|(j, _)| j)
            .collect()
    }
}

/// Prior over random phantoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomPrior {
    pub min_radius: f64,
    pub max_radius: f64,
    /// Minimum clearance between a disk and the domain boundary (cm).
    pub boundary_margin: f64,
    /// Extra gap between two disks beyond touching (cm).
    pub separation: f64,
    pub multipliers: Vec<u8>,
    pub max_retries: usize,
}

impl Default for PhantomPrior {
    fn default() -> Self {
        Self {
            min_radius: 0.5,
            max_radius: 1.25,
            boundary_margin: 0.25,
            separation: 0.25,
            multipliers: vec![3, 4, 5],
            max_retries: 1000,
        }
    }
}

impl PhantomPrior {
    /// Default prior with the overlap gap tied to the voxel side.
    pub fn for_grid(grid: &VoxelGrid) -> Self {
        Self {
            separation: grid.side,
            ..Self::default()
        }
    }

    fn fits(&self, spec: &DomainSpec, region: &ContrastRegion) -> bool {
        let m = self.boundary_margin;
        region.center.norm() + region.radius <= spec.radius - m
            && region.center.y - region.radius >= m
    }
}

/// Draw one or two non-overlapping disks and rasterize them.
pub fn sample_phantom(spec: &DomainSpec, grid: &VoxelGrid, seed: u64) -> Result<Phantom> {
    sample_phantom_with(spec, grid, &PhantomPrior::for_grid(grid), seed)
}

pub fn sample_phantom_with(
    spec: &DomainSpec,
    grid: &VoxelGrid,
    prior: &PhantomPrior,
    seed: u64,
) -> Result<Phantom> {
    if prior.multipliers.is_empty()
        || !(prior.min_radius > 0.0 && prior.min_radius <= prior.max_radius)
    {
        return Err(DotError::InvalidArgument("invalid phantom prior".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_regions = rng.random_range(1..=2usize);
    let multipliers: Vec<u8> = (0..n_regions)
        .map(|_| prior.multipliers[rng.random_range(0..prior.multipliers.len())])
        .collect();
    let r = spec.radius;
    for _ in 0..prior.max_retries {
        let mut regions = Vec::with_capacity(n_regions);
        for &multiplier in &multipliers {
            let radius = rng.random_range(prior.min_radius..=prior.max_radius);
            let lo = prior.boundary_margin + radius;
            if lo >= r - lo {
                break;
            }
            let center = Point2::new(
                rng.random_range(-r + lo..r - lo),
                rng.random_range(lo..r - lo),
            );
            regions.push(ContrastRegion {
                center,
                radius,
                multiplier,
            });
        }
        if regions.len() != n_regions || !regions.iter().all(|g| prior.fits(spec, g)) {
            continue;
        }
        if n_regions == 2 {
            let (a, b) = (&regions[0], &regions[1]);
            if a.center.dist(&b.center) <= a.radius + b.radius + prior.separation {
                continue;
            }
        }
        return Ok(Phantom::rasterize(grid, spec.mu_a0, regions));
    }
    Err(DotError::Geometry(format!(
        "phantom sampling exceeded {} retries (seed {seed})",
        prior.max_retries
    )))
}
