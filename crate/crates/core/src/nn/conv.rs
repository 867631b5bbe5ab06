use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Activation, Trainable};
use crate::error::{DotError, Result};
use crate::geometry::VoxelGrid;

const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;
const CENTER: usize = TAPS / 2;
const NONE: u32 = u32::MAX;

/// Rectangular pixel lattice with the voxel grid embedded in it; pixels
/// outside the domain are held at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Pixel index of every voxel ordinal.
    pub voxel_pixels: Vec<usize>,
    inside: Vec<bool>,
    /// Source pixel of each 3×3 tap for each output pixel.
    taps: Vec<u32>,
}

impl Raster {
    pub fn new(n_rows: usize, n_cols: usize, voxel_pixels: Vec<usize>) -> Result<Self> {
        let n_pixels = n_rows * n_cols;
        let mut inside = vec![false; n_pixels];
        for &p in &voxel_pixels {
            if p >= n_pixels || inside[p] {
                return Err(DotError::InvalidArgument(format!(
                    "invalid or repeated pixel {p}"
                )));
            }
            inside[p] = true;
        }
        let mut taps = vec![NONE; n_pixels * TAPS];
        for r in 0..n_rows {
            for c in 0..n_cols {
                for dr in 0..KERNEL {
                    for dc in 0..KERNEL {
                        let (rr, cc) = ((r + dr).wrapping_sub(1), (c + dc).wrapping_sub(1));
                        if rr < n_rows && cc < n_cols {
                            taps[(r * n_cols + c) * TAPS + dr * KERNEL + dc] =
                                (rr * n_cols + cc) as u32;
                        }
                    }
                }
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            voxel_pixels,
            inside,
            taps,
        })
    }

    pub fn from_grid(grid: &VoxelGrid) -> Self {
        let pixels = (0..grid.len())
            .map(|j| {
                let (r, c) = grid.cell(j);
                r * grid.n_cols + c
            })
            .collect();
        Self::new(grid.n_rows, grid.n_cols, pixels).expect("grid cells are distinct")
    }

    pub fn n_pixels(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn n_voxels(&self) -> usize {
        self.voxel_pixels.len()
    }

    fn scatter(&self, voxels: &[f64]) -> DMatrix<f64> {
        let mut img = DMatrix::zeros(1, self.n_pixels());
        for (&p, &v) in self.voxel_pixels.iter().zip(voxels) {
            img[(0, p)] = v;
        }
        img
    }

    fn gather(&self, img: &DMatrix<f64>) -> Vec<f64> {
        self.voxel_pixels.iter().map(|&p| img[(0, p)]).collect()
    }

    fn im2col(&self, input: &DMatrix<f64>) -> DMatrix<f64> {
        let (channels, n) = (input.nrows(), self.n_pixels());
        let mut col = DMatrix::zeros(channels * TAPS, n);
        for p in 0..n {
            let taps = &self.taps[p * TAPS..(p + 1) * TAPS];
            let mut out = col.column_mut(p);
            for ch in 0..channels {
                for (t, &src) in taps.iter().enumerate() {
                    if src != NONE {
                        out[ch * TAPS + t] = input[(ch, src as usize)];
                    }
                }
            }
        }
        col
    }

    fn col2im(&self, col: &DMatrix<f64>, channels: usize) -> DMatrix<f64> {
        let mut img = DMatrix::zeros(channels, self.n_pixels());
        for p in 0..self.n_pixels() {
            let taps = &self.taps[p * TAPS..(p + 1) * TAPS];
            for ch in 0..channels {
                for (t, &src) in taps.iter().enumerate() {
                    if src != NONE {
                        img[(ch, src as usize)] += col[(ch * TAPS + t, p)];
                    }
                }
            }
        }
        img
    }

    fn mask(&self, img: &mut DMatrix<f64>) {
        for (p, &inside) in self.inside.iter().enumerate() {
            if !inside {
                img.column_mut(p).fill(0.0);
            }
        }
    }
}

/// 3×3 same-padding convolution; weights are `c_out × (c_in·9)`, tap-minor.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub weights: DMatrix<f64>,
    pub biases: DVector<f64>,
    pub activation: Activation,
}

impl ConvLayer {
    pub fn zeros(in_channels: usize, out_channels: usize, activation: Activation) -> Self {
        Self {
            in_channels,
            out_channels,
            weights: DMatrix::zeros(out_channels, in_channels * TAPS),
            biases: DVector::zeros(out_channels),
            activation,
        }
    }

    /// Sets the centre tap linking `input` to `output`.
    pub fn set_center(&mut self, output: usize, input: usize, value: f64) {
        self.weights[(output, input * TAPS + CENTER)] = value;
    }
}

struct LayerCache {
    col: DMatrix<f64>,
    pre: DMatrix<f64>,
    out: DMatrix<f64>,
}

/// Single-channel-in, single-channel-out convolutional network on a raster.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvNet {
    pub raster: Raster,
    pub layers: Vec<ConvLayer>,
}

impl ConvNet {
    pub fn new(raster: Raster, layers: Vec<ConvLayer>) -> Result<Self> {
        if layers.is_empty()
            || layers[0].in_channels != 1
            || layers[layers.len() - 1].out_channels != 1
        {
            return Err(DotError::InvalidArgument(
                "convolution stack must map 1 channel to 1 channel".into(),
            ));
        }
        for w in layers.windows(2) {
            if w[0].out_channels != w[1].in_channels {
                return Err(DotError::InvalidArgument(
                    "channel counts do not chain".into(),
                ));
            }
        }
        for l in &layers {
            if l.weights.shape() != (l.out_channels, l.in_channels * TAPS)
                || l.biases.len() != l.out_channels
            {
                return Err(DotError::InvalidArgument(
                    "convolution parameter shape mismatch".into(),
                ));
            }
        }
        Ok(Self { raster, layers })
    }

    /// `1 → c → c → 1` relu stack whose weights are zero except a centre-tap
    /// path through channel 0, so the network starts as the identity on
    /// non-negative inputs.
    pub fn delta(raster: Raster, channels: usize) -> Self {
        let mut layers = vec![
            ConvLayer::zeros(1, channels, Activation::Relu),
            ConvLayer::zeros(channels, channels, Activation::Relu),
            ConvLayer::zeros(channels, 1, Activation::Identity),
        ];
        for l in &mut layers {
            l.set_center(0, 0, 1.0);
        }
        Self { raster, layers }
    }

    /// The delta network plus small uniform noise of amplitude `scale` on
    /// every weight.
    pub fn denoiser(raster: Raster, channels: usize, scale: f64, seed: u64) -> Self {
        let mut net = Self::delta(raster, channels);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in &mut net.layers {
            l.weights.apply(|w| *w += rng.random_range(-scale..scale));
        }
        net
    }

    fn forward_image(&self, voxels: &[f64]) -> (Vec<LayerCache>, DMatrix<f64>) {
        let mut a = self.raster.scatter(voxels);
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let col = self.raster.im2col(&a);
            let mut pre = &layer.weights * &col;
            for (mut row, b) in pre.row_iter_mut().zip(layer.biases.iter()) {
                row.add_scalar_mut(*b);
            }
            let act = layer.activation;
            let mut out = pre.map(|z| act.apply(z));
            self.raster.mask(&mut out);
            a = out.clone();
            caches.push(LayerCache { col, pre, out });
        }
        (caches, a)
    }

    pub fn forward(&self, voxels: &[f64]) -> Result<Vec<f64>> {
        if voxels.len() != self.raster.n_voxels() {
            return Err(DotError::InvalidArgument(format!(
                "map has {} values, network expects {}",
                voxels.len(),
                self.raster.n_voxels()
            )));
        }
        let (_, out) = self.forward_image(voxels);
        Ok(self.raster.gather(&out))
    }

    /// Parameter gradients of `Σ_b ½‖f(x_b) − t_b‖²`, weights then biases per layer.
    pub fn gradients(
        &self,
        inputs: &DMatrix<f64>,
        targets: &DMatrix<f64>,
    ) -> (Vec<(DMatrix<f64>, DVector<f64>)>, Vec<f64>) {
        let mut grads: Vec<(DMatrix<f64>, DVector<f64>)> = self
            .layers
            .iter()
            .map(|l| {
                (
                    DMatrix::zeros(l.weights.nrows(), l.weights.ncols()),
                    DVector::zeros(l.out_channels),
                )
            })
            .collect();
        let mut losses = Vec::with_capacity(inputs.ncols());
        for b in 0..inputs.ncols() {
            let x: Vec<f64> = inputs.column(b).iter().copied().collect();
            let (caches, out) = self.forward_image(&x);
            let mut delta_img = DMatrix::zeros(1, self.raster.n_pixels());
            let mut loss = 0.0;
            for (j, &p) in self.raster.voxel_pixels.iter().enumerate() {
                let r = out[(0, p)] - targets[(j, b)];
                delta_img[(0, p)] = r;
                loss += r * r;
            }
            losses.push(loss);
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let cache = &caches[l];
                let act = layer.activation;
                self.raster.mask(&mut delta_img);
                delta_img
                    .zip_zip_apply(&cache.pre, &cache.out, |d, z, a| *d *= act.derivative(z, a));
                grads[l]
                    .0
                    .gemm(1.0, &delta_img, &cache.col.transpose(), 1.0);
                grads[l].1 += delta_img.column_sum();
                if l > 0 {
                    let dcol = layer.weights.tr_mul(&delta_img);
                    delta_img = self.raster.col2im(&dcol, layer.in_channels);
                }
            }
        }
        (grads, losses)
    }
}

impl Trainable for ConvNet {
    fn input_dim(&self) -> usize {
        self.raster.n_voxels()
    }

    fn output_dim(&self) -> usize {
        self.raster.n_voxels()
    }

    fn sgd_step(
        &mut self,
        inputs: &DMatrix<f64>,
        targets: &DMatrix<f64>,
        lr: f64,
    ) -> Result<Vec<f64>> {
        let (grads, losses) = self.gradients(inputs, targets);
        if lr != 0.0 {
            // Batch mean of the gradients of ½‖o − t‖².
            let scale = 1.0 / inputs.ncols() as f64;
            for (layer, (gw, gb)) in self.layers.iter_mut().zip(&grads) {
                layer.weights.zip_apply(gw, |w, g| *w -= lr * scale * g);
                layer.biases.axpy(-lr * scale, gb, 1.0);
            }
        }
        Ok(losses)
    }
}
