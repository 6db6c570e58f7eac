use std::borrow::Cow;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::{
    xavier_uniform, Layer, LayerKind, Mode, NnError, Param, Parameterized, Result, Scalar, Tensor,
};

/// Output extent of a convolution along one axis: `(in + 2·pad − k) / stride + 1`,
/// or `None` when the kernel does not fit.
pub fn conv_output_extent(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if stride == 0 || kernel == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    channels: usize,
    height: usize,
    width: usize,
    out_channels: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
    out_h: usize,
    out_w: usize,
}

impl Geometry {
    fn new(input: &[usize], weights: &[usize], stride: usize, padding: usize) -> Result<Self> {
        let (&[_, c, h, w], &[co, ci, kh, kw]) = (input, weights) else {
            return Err(NnError::Shape {
                context: "conv2d expects input [n, c, h, w] and weights [co, ci, kh, kw]".into(),
                expected: vec![],
                actual: [input, weights].concat(),
            });
        };
        if c != ci {
            return Err(NnError::Shape {
                context: format!("conv2d input channels ({c}) vs weight input channels ({ci})"),
                expected: vec![ci],
                actual: vec![c],
            });
        }
        if stride == 0 {
            return Err(NnError::Config("conv2d stride must be >= 1".into()));
        }
        let out_h = conv_output_extent(h, kh, stride, padding);
        let out_w = conv_output_extent(w, kw, stride, padding);
        let (Some(out_h), Some(out_w)) = (out_h, out_w) else {
            return Err(NnError::Shape {
                context: format!("conv2d kernel {kh}x{kw} larger than padded input {h}x{w} (pad {padding})"),
                expected: vec![kh, kw],
                actual: vec![h, w],
            });
        };
        Ok(Geometry {
            channels: c,
            height: h,
            width: w,
            out_channels: co,
            kh,
            kw,
            stride,
            padding,
            out_h,
            out_w,
        })
    }

    fn patch_len(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    fn in_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.padding == 0
    }

    /// Source pixel for output row/col and kernel offset, if inside the image.
    #[inline]
    fn source(&self, out: usize, k: usize, extent: usize) -> Option<usize> {
        let pos = (out * self.stride + k) as isize - self.padding as isize;
        (pos >= 0 && (pos as usize) < extent).then_some(pos as usize)
    }

    /// Unfolds one sample into a `[c·kh·kw, out_h·out_w]` column matrix.
    fn im2col<'a>(&self, x: &'a [Scalar]) -> Cow<'a, [Scalar]> {
        if self.is_pointwise() {
            return Cow::Borrowed(x);
        }
        let p = self.positions();
        let mut cols = vec![0.0; self.patch_len() * p];
        for c in 0..self.channels {
            let plane = &x[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = ((c * self.kh + ki) * self.kw + kj) * p;
                    for oy in 0..self.out_h {
                        let Some(iy) = self.source(oy, ki, self.height) else {
                            continue;
                        };
                        let src = &plane[iy * self.width..(iy + 1) * self.width];
                        let dst = &mut cols[row + oy * self.out_w..row + (oy + 1) * self.out_w];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            if let Some(ix) = self.source(ox, kj, self.width) {
                                *d = src[ix];
                            }
                        }
                    }
                }
            }
        }
        Cow::Owned(cols)
    }

    /// Adjoint of `im2col`: scatters column gradients back onto the image.
    fn col2im(&self, cols: &[Scalar], dx: &mut [Scalar]) {
        if self.is_pointwise() {
            dx.copy_from_slice(cols);
            return;
        }
        let p = self.positions();
        for c in 0..self.channels {
            let plane = &mut dx[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = ((c * self.kh + ki) * self.kw + kj) * p;
                    for oy in 0..self.out_h {
                        let Some(iy) = self.source(oy, ki, self.height) else {
                            continue;
                        };
                        let src = &cols[row + oy * self.out_w..row + (oy + 1) * self.out_w];
                        let dst = &mut plane[iy * self.width..(iy + 1) * self.width];
                        for (ox, &g) in src.iter().enumerate() {
                            if let Some(ix) = self.source(ox, kj, self.width) {
                                dst[ix] += g;
                            }
                        }
                    }
                }
            }
        }
    }
}

#[inline]
fn axpy(alpha: Scalar, x: &[Scalar], y: &mut [Scalar]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn dot(a: &[Scalar], b: &[Scalar]) -> Scalar {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// 2-D cross-correlation of `[n, c, h, w]` input with `[co, c, kh, kw]` weights.
pub fn conv2d_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let g = Geometry::new(input.shape(), weights.shape(), stride, padding)?;
    if bias.shape() != [g.out_channels] {
        return Err(NnError::shape("conv2d bias", &[g.out_channels], bias.shape()));
    }
    let n = input.shape()[0];
    let (k, p) = (g.patch_len(), g.positions());
    let w = weights.data();
    let b = bias.data();
    let mut out = vec![0.0; n * g.out_channels * p];
    out.par_chunks_mut(g.out_channels * p)
        .zip(input.data().par_chunks(g.in_len()))
        .for_each(|(y, x)| {
            let cols = g.im2col(x);
            for co in 0..g.out_channels {
                let yrow = &mut y[co * p..(co + 1) * p];
                yrow.fill(b[co]);
                for (ki, &wv) in w[co * k..(co + 1) * k].iter().enumerate() {
                    axpy(wv, &cols[ki * p..(ki + 1) * p], yrow);
                }
            }
        });
    Tensor::new(&[n, g.out_channels, g.out_h, g.out_w], out)
}

/// Gradients of a convolution with respect to its three operands.
#[derive(Clone, Debug)]
pub struct Conv2dGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Exact gradients of [`conv2d_forward`] given the upstream gradient.
///
/// Per-sample weight gradients are computed in parallel and then summed in
/// sample order, so the result is independent of the thread count.
pub fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    grad_output: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<Conv2dGrads> {
    let g = Geometry::new(input.shape(), weights.shape(), stride, padding)?;
    let n = input.shape()[0];
    let expected = [n, g.out_channels, g.out_h, g.out_w];
    if grad_output.shape() != expected {
        return Err(NnError::shape("conv2d grad_output", &expected, grad_output.shape()));
    }
    let (k, p) = (g.patch_len(), g.positions());
    let w = weights.data();
    let mut dx = vec![0.0; input.len()];
    let per_sample: Vec<(Vec<Scalar>, Vec<Scalar>)> = dx
        .par_chunks_mut(g.in_len())
        .zip(input.data().par_chunks(g.in_len()))
        .zip(grad_output.data().par_chunks(g.out_channels * p))
        .map(|((dxs, x), dy)| {
            let cols = g.im2col(x);
            let mut dw = vec![0.0; g.out_channels * k];
            let mut db = vec![0.0; g.out_channels];
            let mut dcols = vec![0.0; k * p];
            for co in 0..g.out_channels {
                let dyrow = &dy[co * p..(co + 1) * p];
                db[co] = dyrow.iter().sum();
                for ki in 0..k {
                    dw[co * k + ki] = dot(dyrow, &cols[ki * p..(ki + 1) * p]);
                    axpy(w[co * k + ki], dyrow, &mut dcols[ki * p..(ki + 1) * p]);
                }
            }
            g.col2im(&dcols, dxs);
            (dw, db)
        })
        .collect();

    let mut dw = vec![0.0; weights.len()];
    let mut db = vec![0.0; g.out_channels];
    for (sw, sb) in &per_sample {
        axpy(1.0, sw, &mut dw);
        axpy(1.0, sb, &mut db);
    }
    Ok(Conv2dGrads {
        input: Tensor::new(input.shape(), dx)?,
        weights: Tensor::new(weights.shape(), dw)?,
        bias: Tensor::new(&[g.out_channels], db)?,
    })
}

/// Convolution layer with square kernels.
#[derive(Clone, Debug)]
pub struct Conv2d {
    pub weight: Param,
    pub bias: Param,
    pub stride: usize,
    pub padding: usize,
    cache: Option<Tensor>,
}

impl Conv2d {
    /// Xavier-initialized weights, zero bias.
    pub fn new(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if stride == 0 || kernel == 0 {
            return Err(NnError::Config(format!(
                "{name}: kernel and stride must be >= 1"
            )));
        }
        let weight = xavier_uniform(&[out_channels, in_channels, kernel, kernel], rng)?;
        Ok(Self::from_tensors(
            name,
            weight,
            Tensor::zeros(&[out_channels]),
            stride,
            padding,
        ))
    }

    pub fn from_tensors(name: &str, weight: Tensor, bias: Tensor, stride: usize, padding: usize) -> Self {
        Conv2d {
            weight: Param::new(format!("{name}.weight"), weight),
            bias: Param::new(format!("{name}.bias"), bias),
            stride,
            padding,
            cache: None,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.value.shape()[1]
    }
}

impl Parameterized for Conv2d {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

impl Layer for Conv2d {
    fn kind(&self) -> LayerKind {
        LayerKind::Conv2d
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        let out = self.infer(input)?;
        self.cache = Some(input.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let input = self.cache.as_ref().ok_or(NnError::NoCache("conv2d"))?;
        let grads = conv2d_backward(input, &self.weight.value, grad_output, self.stride, self.padding)?;
        if !self.weight.frozen {
            self.weight.grad.add_assign(&grads.weights)?;
            self.bias.grad.add_assign(&grads.bias)?;
        }
        Ok(grads.input)
    }

    fn infer(&self, input: &Tensor) -> Result<Tensor> {
        conv2d_forward(input, &self.weight.value, &self.bias.value, self.stride, self.padding)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_extent_formula() {
        assert_eq!(conv_output_extent(64, 3, 2, 1), Some(32));
        assert_eq!(conv_output_extent(5, 3, 1, 0), Some(3));
        assert_eq!(conv_output_extent(1, 3, 1, 1), Some(1));
        assert_eq!(conv_output_extent(2, 5, 1, 0), None);
    }

    #[test]
    fn identity_pointwise_kernel() {
        let x = Tensor::from_fn(&[2, 2, 3, 3], |i| i as Scalar - 7.0);
        let mut w = Tensor::zeros(&[2, 2, 1, 1]);
        w.data_mut()[0] = 1.0;
        w.data_mut()[3] = 1.0;
        let y = conv2d_forward(&x, &w, &Tensor::zeros(&[2]), 1, 0).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn all_ones_kernel_sums_window() {
        let x = Tensor::full(&[1, 1, 3, 3], 1.0);
        let w = Tensor::full(&[1, 1, 3, 3], 1.0);
        let y = conv2d_forward(&x, &w, &Tensor::zeros(&[1]), 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[9.0]);
    }

    #[test]
    fn padding_counts_only_real_pixels() {
        let x = Tensor::full(&[1, 1, 2, 2], 1.0);
        let w = Tensor::full(&[1, 1, 3, 3], 1.0);
        let y = conv2d_forward(&x, &w, &Tensor::zeros(&[1]), 1, 1).unwrap();
        assert_eq!(y.data(), &[4.0, 4.0, 4.0, 4.0]);
    }

    #[test]
    fn channel_mismatch_names_dimensions() {
        let x = Tensor::zeros(&[1, 3, 4, 4]);
        let w = Tensor::zeros(&[2, 4, 3, 3]);
        let err = conv2d_forward(&x, &w, &Tensor::zeros(&[2]), 1, 1).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(3)") && msg.contains("(4)"), "{msg}");
    }

    #[test]
    fn zero_stride_rejected() {
        let x = Tensor::zeros(&[1, 1, 4, 4]);
        let w = Tensor::zeros(&[1, 1, 3, 3]);
        assert!(conv2d_forward(&x, &w, &Tensor::zeros(&[1]), 0, 1).is_err());
    }
}
