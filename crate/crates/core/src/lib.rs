//! Diffuse optical tomography (DOT) reconstruction toolkit.
//!
//! The crate covers the whole continuous-wave pipeline on a 2D semidisk:
//!
//! * [`geometry`]: domain, voxel grid, probe layout and random phantoms.
//! * [`forward`]: P1 finite-element solver of the steady diffusion equation
//!   with Robin boundary conditions, synthetic measurements and noise.
//! * [`rytov`]: modified-Helmholtz Green's function, the Rytov sensitivity
//!   matrix, log-ratio data and the Tikhonov-filtered SVD baseline.
//! * [`variational`]: soft thresholding, forward-backward splitting, Bregman
//!   iterations with an l1 penalty and cross-validated Elastic-Net.
//! * [`nn`]: dense and convolutional networks trained by plain SGD, assembled
//!   into a learned-SVD reconstruction model.
//! * [`metrics`]: connected-component segmentation, ACR and TPR scores and
//!   aggregate comparison tables.
//! * [`pipeline`]: seeded end-to-end experiment stages used by the CLI.

pub mod error;
pub mod forward;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod rytov;
pub mod variational;

pub use error::{DotError, Result};
pub use geometry::{ContrastRegion, DomainSpec, Phantom, Point2, ProbeLayout, VoxelGrid};
