//! Steady-state diffusion forward model.
//!
//! Solves `−∇·(D∇u) + μ_a u = S0·δ(r − s)` on the semidisk with the Robin
//! condition `D ∇u·n + u / (2A_c) = 0` using piecewise-linear elements. The
//! point source is loaded as the Galerkin projection of the Dirac mass, i.e.
//! with the barycentric weights of the source inside its element.

mod banded;
mod mesh;
mod noise;

use std::sync::Arc;

pub use banded::{BandedCholesky, BandedMatrix};
pub use mesh::FemMesh;
pub use noise::{add_noise, NoiseReading};

use crate::error::{DotError, Result};
use crate::geometry::{absorption_at, ContrastRegion, DomainSpec, Point2, ProbeLayout};

/// Nodal fluence for one source.
#[derive(Clone, Debug)]
pub struct FluenceField {
    pub mesh: Arc<FemMesh>,
    pub values: Vec<f64>,
    pub source_index: usize,
}

impl FluenceField {
    pub fn value_at(&self, p: &Point2) -> Result<f64> {
        self.mesh.interpolate(&self.values, p)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::MIN, f64::max)
    }
}

/// Detector readings for every source-detector pair, ordered as in
/// [`ProbeLayout::pair`].
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSet {
    pub layout: ProbeLayout,
    pub fluence: Vec<f64>,
    pub background_fluence: Vec<f64>,
    pub noise_level: f64,
    pub seed: u64,
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.fluence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fluence.is_empty()
    }
}

/// Finite-element discretization of the diffusion problem on a fixed mesh.
///
/// The diffusion and Robin parts do not depend on the absorption and are
/// assembled once; the background (homogeneous) system is factored once.
#[derive(Debug)]
pub struct ForwardModel {
    spec: DomainSpec,
    mesh: Arc<FemMesh>,
    base: BandedMatrix,
    background: BandedCholesky,
    background_absorption: Vec<f64>,
}

impl ForwardModel {
    pub fn new(spec: &DomainSpec, mesh_size: f64) -> Result<Self> {
        spec.validate()?;
        if mesh_size > spec.source_inset + 1e-12 {
            return Err(DotError::InvalidArgument(format!(
                "mesh size {mesh_size} does not resolve the source inset {}",
                spec.source_inset
            )));
        }
        let mesh = Arc::new(FemMesh::semidisk(spec.radius, mesh_size)?);
        Self::with_mesh(spec, mesh)
    }

    pub fn with_mesh(spec: &DomainSpec, mesh: Arc<FemMesh>) -> Result<Self> {
        let mut base = BandedMatrix::zeros(mesh.n_nodes(), mesh.half_bandwidth());
        let d = spec.diffusion();
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let p = tri.map(|i| mesh.nodes[i]);
            let area = mesh.area(t);
            let b = [p[1].y - p[2].y, p[2].y - p[0].y, p[0].y - p[1].y];
            let c = [p[2].x - p[1].x, p[0].x - p[2].x, p[1].x - p[0].x];
            for i in 0..3 {
                for j in 0..=i {
                    base.add(
                        tri[i],
                        tri[j],
                        d * (b[i] * b[j] + c[i] * c[j]) / (4.0 * area),
                    );
                }
            }
        }
        let beta = spec.robin();
        for (e, edge) in mesh.boundary_edges.iter().enumerate() {
            let len = mesh.edge_length(e);
            base.add(edge[0], edge[0], beta * len / 3.0);
            base.add(edge[1], edge[1], beta * len / 3.0);
            base.add(edge[0], edge[1], beta * len / 6.0);
        }
        let background_absorption = vec![spec.mu_a0; mesh.triangles.len()];
        let background = Self::factor_with(&base, &mesh, &background_absorption)?;
        Ok(Self {
            spec: spec.clone(),
            mesh,
            base,
            background,
            background_absorption,
        })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn mesh(&self) -> &Arc<FemMesh> {
        &self.mesh
    }

    /// Per-element absorption from inclusion disks, sampled at element centroids.
    pub fn element_absorption(&self, regions: &[ContrastRegion]) -> Vec<f64> {
        (0..self.mesh.triangles.len())
            .map(|t| absorption_at(self.spec.mu_a0, regions, &self.mesh.centroid(t)))
            .collect()
    }

    fn factor_with(base: &BandedMatrix, mesh: &FemMesh, mu_a: &[f64]) -> Result<BandedCholesky> {
        let mut a = base.clone();
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let m = mu_a[t] * mesh.area(t) / 12.0;
            for i in 0..3 {
                for j in 0..=i {
                    a.add(tri[i], tri[j], if i == j { 2.0 * m } else { m });
                }
            }
        }
        a.cholesky()
    }

    fn factor(&self, mu_a: &[f64]) -> Result<BandedCholesky> {
        if mu_a.len() != self.mesh.triangles.len() {
            return Err(DotError::InvalidArgument(format!(
                "absorption field has {} entries for {} elements",
                mu_a.len(),
                self.mesh.triangles.len()
            )));
        }
        if let Some(t) = mu_a.iter().position(|&m| !(m > 0.0)) {
            return Err(DotError::InvalidArgument(format!(
                "non-positive absorption on element {t}"
            )));
        }
        if mu_a == self.background_absorption.as_slice() {
            return Ok(self.background.clone());
        }
        Self::factor_with(&self.base, &self.mesh, mu_a)
    }

    fn load(&self, source: &Point2) -> Result<Vec<f64>> {
        // Probes on the true arc sit just outside the chords; snap like readings do.
        let (t, w) = self.mesh.locate_or_snap(source, self.mesh.h)?;
        let mut b = vec![0.0; self.mesh.n_nodes()];
        for (k, &node) in self.mesh.triangles[t].iter().enumerate() {
            b[node] = self.spec.source_intensity * w[k];
        }
        Ok(b)
    }

    /// Fluence for a point source at `source` with per-element absorption.
    pub fn solve_diffusion(&self, mu_a: &[f64], source: &Point2) -> Result<FluenceField> {
        let chol = self.factor(mu_a)?;
        self.solve_with(&chol, source, 0)
    }

    fn solve_with(
        &self,
        chol: &BandedCholesky,
        source: &Point2,
        index: usize,
    ) -> Result<FluenceField> {
        let values = chol.solve(&self.load(source)?);
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(DotError::SolverFailure {
                pivot: i,
                detail: "non-finite fluence".into(),
            });
        }
        Ok(FluenceField {
            mesh: Arc::clone(&self.mesh),
            values,
            source_index: index,
        })
    }

    /// One fluence field per source sharing a single factorization.
    pub fn solve_sources(&self, mu_a: &[f64], sources: &[Point2]) -> Result<Vec<FluenceField>> {
        let chol = self.factor(mu_a)?;
        sources
            .iter()
            .enumerate()
            .map(|(k, s)| self.solve_with(&chol, s, k))
            .collect()
    }

    /// Detector readings (pair-ordered) for the given absorption field.
    pub fn detector_readings(&self, layout: &ProbeLayout, mu_a: &[f64]) -> Result<Vec<f64>> {
        let fields = self.solve_sources(mu_a, &layout.sources)?;
        let mut out = vec![0.0; layout.n_pairs()];
        for (k, field) in fields.iter().enumerate() {
            for (l, d) in layout.detectors.iter().enumerate() {
                out[layout.pair_index(l, k)] = field.value_at(d)?;
            }
        }
        Ok(out)
    }

    /// Noise-free perturbed and background readings for a phantom's inclusions.
    pub fn simulate_measurements(
        &self,
        layout: &ProbeLayout,
        regions: &[ContrastRegion],
    ) -> Result<MeasurementSet> {
        let background_fluence = self.detector_readings(layout, &self.background_absorption)?;
        let fluence = if regions.is_empty() {
            background_fluence.clone()
        } else {
            self.detector_readings(layout, &self.element_absorption(regions))?
        };
        if let Some(i) = fluence
            .iter()
            .chain(&background_fluence)
            .position(|&v| !(v > 0.0))
        {
            return Err(DotError::Numeric(format!(
                "non-positive simulated fluence at entry {i}"
            )));
        }
        Ok(MeasurementSet {
            layout: layout.clone(),
            fluence,
            background_fluence,
            noise_level: 0.0,
            seed: 0,
        })
    }

    /// `(∫ μ_a u dΩ, ∮ u / (2A_c) ds)` for a computed field.
    pub fn power_balance(&self, field: &FluenceField, mu_a: &[f64]) -> (f64, f64) {
        let u = &field.values;
        let absorbed = self
            .mesh
            .triangles
            .iter()
            .enumerate()
            .map(|(t, tri)| {
                mu_a[t] * self.mesh.area(t) * tri.iter().map(|&i| u[i]).sum::<f64>() / 3.0
            })
            .sum();
        let beta = self.spec.robin();
        let outflow = self
            .mesh
            .boundary_edges
            .iter()
            .enumerate()
            .map(|(e, ed)| beta * self.mesh.edge_length(e) * 0.5 * (u[ed[0]] + u[ed[1]]))
            .sum();
        (absorbed, outflow)
    }
}
