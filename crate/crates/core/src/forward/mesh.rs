//! Conforming triangulation of the semidisk built ring by ring.
//!
//! Ring `i` is a semicircle of radius `i·R/n` carrying nodes at uniform angles
//! in `[0, π]`; consecutive rings are stitched into a triangle strip by
//! merging their angle sequences. Numbering runs ring by ring, which keeps the
//! system matrix banded with half-bandwidth close to the outer ring size.

use std::f64::consts::PI;

use crate::error::{DotError, Result};
use crate::geometry::Point2;

#[derive(Clone, Debug)]
pub struct FemMesh {
    pub nodes: Vec<Point2>,
    /// Counterclockwise node triples.
    pub triangles: Vec<[usize; 3]>,
    /// Boundary segments; arc edges first, then the diameter.
    pub boundary_edges: Vec<[usize; 2]>,
    pub radius: f64,
    pub h: f64,
    locator: Locator,
}

impl FemMesh {
    /// Mesh the semidisk of the given radius with target edge length `h`.
    pub fn semidisk(radius: f64, h: f64) -> Result<Self> {
        if !(radius > 0.0 && h > 0.0 && h < radius) {
            return Err(DotError::InvalidArgument(format!(
                "mesh size {h} must lie in (0, radius = {radius})"
            )));
        }
        let n_rings = (radius / h).ceil() as usize;
        let dr = radius / n_rings as f64;
        let mut nodes = vec![Point2::new(0.0, 0.0)];
        let mut rings: Vec<Vec<usize>> = vec![vec![0]];
        for i in 1..=n_rings {
            let r = dr * i as f64;
            let segments = ((PI * r / dr).round() as usize).max(2);
            let ring: Vec<usize> = (0..=segments)
                .map(|j| {
                    let p = if j == segments {
                        Point2::new(-r, 0.0)
                    } else {
                        let t = PI * j as f64 / segments as f64;
                        Point2::new(r * t.cos(), r * t.sin())
                    };
                    nodes.push(p);
                    nodes.len() - 1
                })
                .collect();
            rings.push(ring);
        }

        let mut triangles = Vec::new();
        for w in rings.windows(2) {
            stitch(&nodes, &w[0], &w[1], &mut triangles);
        }

        let outer = rings.last().expect("at least one ring");
        let mut boundary_edges: Vec<[usize; 2]> = outer.windows(2).map(|w| [w[0], w[1]]).collect();
        for w in rings.windows(2) {
            boundary_edges.push([w[0][0], w[1][0]]);
            boundary_edges.push([*w[0].last().unwrap(), *w[1].last().unwrap()]);
        }

        let locator = Locator::build(&nodes, &triangles, radius, 2.0 * dr);
        Ok(Self {
            nodes,
            triangles,
            boundary_edges,
            radius,
            h: dr,
            locator,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(&self.nodes[a], &self.nodes[b], &self.nodes[c])
    }

    pub fn centroid(&self, t: usize) -> Point2 {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        Point2::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.boundary_edges[e];
        self.nodes[a].dist(&self.nodes[b])
    }

    /// Largest `|i − j|` over node pairs sharing a triangle.
    pub fn half_bandwidth(&self) -> usize {
        self.triangles
            .iter()
            .map(|t| {
                let mx = t.iter().max().unwrap();
                let mn = t.iter().min().unwrap();
                mx - mn
            })
            .max()
            .unwrap_or(0)
    }

    /// Containing triangle and barycentric weights of `p`.
    pub fn locate(&self, p: &Point2) -> Option<(usize, [f64; 3])> {
        let (t, w) = self.nearest_triangle(p)?;
        (w.iter().all(|&l| l >= -1e-10)).then_some((t, w))
    }

    /// Like [`locate`](Self::locate) but accepts points up to `tol` outside
    /// the polygonal hull (e.g. detectors on the true arc, which sits just
    /// outside the chords), snapping them onto the nearest element.
    pub fn locate_or_snap(&self, p: &Point2, tol: f64) -> Result<(usize, [f64; 3])> {
        let outside =
            || DotError::Geometry(format!("point ({}, {}) lies outside the mesh", p.x, p.y));
        let (t, w) = self.nearest_triangle(p).ok_or_else(outside)?;
        if w.iter().all(|&l| l >= -1e-10) {
            return Ok((t, w));
        }
        let clamped = w.map(|l| l.max(0.0));
        let s: f64 = clamped.iter().sum();
        let clamped = clamped.map(|l| l / s);
        let tri = self.triangles[t].map(|i| self.nodes[i]);
        let q = Point2::new(
            clamped[0] * tri[0].x + clamped[1] * tri[1].x + clamped[2] * tri[2].x,
            clamped[0] * tri[0].y + clamped[1] * tri[1].y + clamped[2] * tri[2].y,
        );
        if q.dist(p) <= tol {
            Ok((t, clamped))
        } else {
            Err(outside())
        }
    }

    /// Interpolate nodal values at `p` (snapping within one mesh size).
    pub fn interpolate(&self, values: &[f64], p: &Point2) -> Result<f64> {
        let (t, w) = self.locate_or_snap(p, self.h)?;
        let tri = self.triangles[t];
        Ok(w[0] * values[tri[0]] + w[1] * values[tri[1]] + w[2] * values[tri[2]])
    }

    fn nearest_triangle(&self, p: &Point2) -> Option<(usize, [f64; 3])> {
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for t in self.locator.candidates(p) {
            let tri = self.triangles[t].map(|i| self.nodes[i]);
            let w = barycentric(&tri, p);
            let score = w[0].min(w[1]).min(w[2]);
            if best.as_ref().is_none_or(|b| score > b.2) {
                best = Some((t, w, score));
            }
        }
        best.map(|(t, w, _)| (t, w))
    }
}

fn signed_area(a: &Point2, b: &Point2, c: &Point2) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

fn barycentric(tri: &[Point2; 3], p: &Point2) -> [f64; 3] {
    let area = signed_area(&tri[0], &tri[1], &tri[2]);
    let l0 = signed_area(p, &tri[1], &tri[2]) / area;
    let l1 = signed_area(&tri[0], p, &tri[2]) / area;
    [l0, l1, 1.0 - l0 - l1]
}

fn angle(p: &Point2) -> f64 {
    p.y.atan2(p.x).max(0.0)
}

/// Triangulate the strip between an inner and an outer semicircular polyline.
fn stitch(nodes: &[Point2], inner: &[usize], outer: &[usize], out: &mut Vec<[usize; 3]>) {
    let (m, n) = (inner.len() - 1, outer.len() - 1);
    let (mut p, mut q) = (0, 0);
    let ang = |i: usize| {
        // the last node of each ring sits at angle π; atan2 of (−r, 0) is π
        // but guard against −0.0 round-off
        let a = angle(&nodes[i]);
        if nodes[i].x < 0.0 && nodes[i].y == 0.0 {
            PI
        } else {
            a
        }
    };
    while p < m || q < n {
        let advance_outer = if p == m {
            true
        } else if q == n {
            false
        } else {
            ang(outer[q + 1]) <= ang(inner[p + 1])
        };
        let tri = if advance_outer {
            q += 1;
            [inner[p], outer[q - 1], outer[q]]
        } else {
            p += 1;
            [inner[p - 1], outer[q], inner[p]]
        };
        let [a, b, c] = tri;
        if signed_area(&nodes[a], &nodes[b], &nodes[c]) > 0.0 {
            out.push([a, b, c]);
        } else {
            out.push([a, c, b]);
        }
    }
}

/// Uniform bucket grid over the bounding box for point location.
#[derive(Clone, Debug)]
struct Locator {
    x0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl Locator {
    fn build(nodes: &[Point2], triangles: &[[usize; 3]], radius: f64, cell: f64) -> Self {
        let x0 = -radius;
        let nx = (2.0 * radius / cell).ceil() as usize + 1;
        let ny = (radius / cell).ceil() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (t, tri) in triangles.iter().enumerate() {
            let pts = tri.map(|i| nodes[i]);
            let (xmin, xmax) = pts
                .iter()
                .fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.x), a.1.max(p.x)));
            let (ymin, ymax) = pts
                .iter()
                .fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.y), a.1.max(p.y)));
            let (i0, i1) = (
                Self::clampi((xmin - x0) / cell, nx),
                Self::clampi((xmax - x0) / cell, nx),
            );
            let (j0, j1) = (Self::clampi(ymin / cell, ny), Self::clampi(ymax / cell, ny));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(t);
                }
            }
        }
        Self {
            x0,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    fn clampi(v: f64, n: usize) -> usize {
        (v.floor().max(0.0) as usize).min(n - 1)
    }

    /// Triangles registered in the 3×3 block of buckets around `p`.
    fn candidates(&self, p: &Point2) -> impl Iterator<Item = usize> + '_ {
        let i = Self::clampi((p.x - self.x0) / self.cell, self.nx);
        let j = Self::clampi(p.y / self.cell, self.ny);
        let (i0, i1) = (i.saturating_sub(1), (i + 1).min(self.nx - 1));
        let (j0, j1) = (j.saturating_sub(1), (j + 1).min(self.ny - 1));
        (j0..=j1)
            .flat_map(move |jj| (i0..=i1).map(move |ii| jj * self.nx + ii))
            .flat_map(move |b| self.buckets[b].iter().copied())
    }
}
