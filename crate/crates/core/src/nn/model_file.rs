//! Binary model file.
//!
//! All integers are little-endian `u32`, all reals little-endian `f64`.
//!
//! ```text
//! magic "DOTLSVD\0", version
//! clamp range (lo, hi)
//! measurement normalization: count, lo[count], hi[count]
//! signal normalization:      count, lo[count], hi[count]
//! 5 dense networks (data encoder, data decoder, signal encoder,
//!   signal decoder, bridge), each: layer count, then per layer
//!   in, out, activation tag (u8), weights row-major out×in, biases[out]
//! denoiser flag (u8); when 1:
//!   raster rows, cols, voxel count, voxel pixel indices
//!   layer count, then per layer in, out, activation tag (u8),
//!   weights row-major out×(in·9), biases[out]
//! ```

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use super::{Activation, ConvLayer, ConvNet, DenseLayer, LsvdModel, MinMax, MlpNetwork, Raster};
use crate::error::{DotError, Result};

const MAGIC: &[u8; 8] = b"DOTLSVD\0";
const VERSION: u32 = 1;

struct Out<W: Write> {
    w: W,
}

impl<W: Write> Out<W> {
    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.w
            .write_all(b)
            .map_err(|e| DotError::parse("model file", e))
    }

    fn u32(&mut self, v: usize) -> Result<()> {
        let v =
            u32::try_from(v).map_err(|_| DotError::parse("model file", "dimension exceeds u32"))?;
        self.bytes(&v.to_le_bytes())
    }

    fn f64s<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) -> Result<()> {
        for v in vs {
            self.bytes(&v.to_le_bytes())?;
        }
        Ok(())
    }

    fn matrix(&mut self, m: &DMatrix<f64>) -> Result<()> {
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                self.bytes(&m[(r, c)].to_le_bytes())?;
            }
        }
        Ok(())
    }

    fn norm(&mut self, n: &MinMax) -> Result<()> {
        self.u32(n.lo.len())?;
        self.f64s(&n.lo)?;
        self.f64s(&n.hi)
    }

    fn mlp(&mut self, net: &MlpNetwork) -> Result<()> {
        self.u32(net.layers.len())?;
        for l in &net.layers {
            self.u32(l.input_dim())?;
            self.u32(l.output_dim())?;
            self.bytes(&[l.activation.tag()])?;
            self.matrix(&l.weights)?;
            self.f64s(l.biases.iter())?;
        }
        Ok(())
    }

    fn conv(&mut self, net: &ConvNet) -> Result<()> {
        self.u32(net.raster.n_rows)?;
        self.u32(net.raster.n_cols)?;
        self.u32(net.raster.voxel_pixels.len())?;
        for &p in &net.raster.voxel_pixels {
            self.u32(p)?;
        }
        self.u32(net.layers.len())?;
        for l in &net.layers {
            self.u32(l.in_channels)?;
            self.u32(l.out_channels)?;
            self.bytes(&[l.activation.tag()])?;
            self.matrix(&l.weights)?;
            self.f64s(l.biases.iter())?;
        }
        Ok(())
    }
}

struct In<R: Read> {
    r: R,
}

impl<R: Read> In<R> {
    fn bytes<const K: usize>(&mut self) -> Result<[u8; K]> {
        let mut b = [0u8; K];
        self.r
            .read_exact(&mut b)
            .map_err(|e| DotError::parse("model file", e))?;
        Ok(b)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.bytes()?) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn activation(&mut self) -> Result<Activation> {
        let [tag] = self.bytes::<1>()?;
        Activation::from_tag(tag)
            .ok_or_else(|| DotError::parse("model file", format!("unknown activation tag {tag}")))
    }

    fn dim(&mut self) -> Result<usize> {
        let d = self.u32()?;
        if d > 1 << 24 {
            return Err(DotError::parse(
                "model file",
                format!("implausible dimension {d}"),
            ));
        }
        Ok(d)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_row_slice(
            rows,
            cols,
            &self.f64s(rows * cols)?,
        ))
    }

    fn norm(&mut self) -> Result<MinMax> {
        let n = self.dim()?;
        let lo = self.f64s(n)?;
        let hi = self.f64s(n)?;
        Ok(MinMax { lo, hi })
    }

    fn mlp(&mut self) -> Result<MlpNetwork> {
        let n = self.dim()?;
        let mut layers = Vec::with_capacity(n);
        for _ in 0..n {
            let (input, output) = (self.dim()?, self.dim()?);
            let activation = self.activation()?;
            let weights = self.matrix(output, input)?;
            let biases = DVector::from_vec(self.f64s(output)?);
            layers.push(DenseLayer {
                weights,
                biases,
                activation,
            });
        }
        MlpNetwork::new(layers).map_err(|e| DotError::parse("model file", e))
    }

    fn conv(&mut self) -> Result<ConvNet> {
        let (rows, cols, n) = (self.dim()?, self.dim()?, self.dim()?);
        let pixels = (0..n).map(|_| self.u32()).collect::<Result<Vec<_>>>()?;
        let raster =
            Raster::new(rows, cols, pixels).map_err(|e| DotError::parse("model file", e))?;
        let n_layers = self.dim()?;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let (cin, cout) = (self.dim()?, self.dim()?);
            let activation = self.activation()?;
            let weights = self.matrix(cout, cin * 9)?;
            let biases = DVector::from_vec(self.f64s(cout)?);
            layers.push(ConvLayer {
                in_channels: cin,
                out_channels: cout,
                weights,
                biases,
                activation,
            });
        }
        ConvNet::new(raster, layers).map_err(|e| DotError::parse("model file", e))
    }
}

pub fn write_model<W: Write>(model: &LsvdModel, w: W) -> Result<()> {
    let mut out = Out { w };
    out.bytes(MAGIC)?;
    out.u32(VERSION as usize)?;
    out.f64s([&model.mu_a_range.0, &model.mu_a_range.1])?;
    out.norm(&model.measurement_norm)?;
    out.norm(&model.signal_norm)?;
    for net in [
        &model.dae_encoder,
        &model.dae_decoder,
        &model.sae_encoder,
        &model.sae_decoder,
        &model.bridge,
    ] {
        out.mlp(net)?;
    }
    match &model.denoiser {
        Some(d) => {
            out.bytes(&[1])?;
            out.conv(d)?;
        }
        None => out.bytes(&[0])?,
    }
    out.w.flush().map_err(|e| DotError::parse("model file", e))
}

pub fn read_model<R: Read>(r: R) -> Result<LsvdModel> {
    let mut input = In { r };
    if &input.bytes::<8>()? != MAGIC {
        return Err(DotError::parse("model file", "bad magic"));
    }
    let version = input.u32()?;
    if version != VERSION as usize {
        return Err(DotError::parse(
            "model file",
            format!("unsupported version {version}"),
        ));
    }
    let mu_a_range = (input.f64()?, input.f64()?);
    let measurement_norm = input.norm()?;
    let signal_norm = input.norm()?;
    let dae_encoder = input.mlp()?;
    let dae_decoder = input.mlp()?;
    let sae_encoder = input.mlp()?;
    let sae_decoder = input.mlp()?;
    let bridge = input.mlp()?;
    let denoiser = match input.bytes::<1>()? {
        [0] => None,
        [1] => Some(input.conv()?),
        [f] => {
            return Err(DotError::parse(
                "model file",
                format!("bad denoiser flag {f}"),
            ))
        }
    };
    let model = LsvdModel {
        dae_encoder,
        dae_decoder,
        sae_encoder,
        sae_decoder,
        bridge,
        denoiser,
        measurement_norm,
        signal_norm,
        mu_a_range,
    };
    model
        .validate()
        .map_err(|e| DotError::parse("model file", e))?;
    Ok(model)
}
