//! 2-D cross-correlation and dilated causal 1-D convolution.
//!
//! The tape ops lower each sample to an im2col matrix and call GEMM. The
//! `*_direct` functions are plain sliding-window loops kept as the reference
//! the fast path is tested against.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::autograd::{Backward, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Resolved extents of one 2-D convolution. Output extents use the floor
/// rule `(H + 2p - k) / s + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dGeometry {
    pub batch: usize,
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl Conv2dGeometry {
    pub fn new(input: &[usize], weight: &[usize], stride: usize, padding: usize) -> Result<Self> {
        if input.len() != 4 {
            return Err(Error::dim("conv2d", "input rank", 4, input.len()));
        }
        if weight.len() != 4 {
            return Err(Error::dim("conv2d", "weight rank", 4, weight.len()));
        }
        if stride == 0 {
            return Err(Error::param("stride", "must be >= 1"));
        }
        let [batch, in_channels, height, width] = [input[0], input[1], input[2], input[3]];
        let [out_channels, w_in, kernel_h, kernel_w] = [weight[0], weight[1], weight[2], weight[3]];
        if w_in != in_channels {
            return Err(Error::dim("conv2d", "in_channels", w_in, in_channels));
        }
        let out_h = out_extent("height", height, kernel_h, stride, padding)?;
        let out_w = out_extent("width", width, kernel_w, stride, padding)?;
        Ok(Conv2dGeometry {
            batch,
            in_channels,
            height,
            width,
            out_channels,
            kernel_h,
            kernel_w,
            stride,
            padding,
            out_h,
            out_w,
        })
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    fn is_pointwise(&self) -> bool {
        self.kernel_h == 1 && self.kernel_w == 1 && self.stride == 1 && self.padding == 0
    }

    pub fn output_shape(&self) -> [usize; 4] {
        [self.batch, self.out_channels, self.out_h, self.out_w]
    }
}

fn out_extent(axis: &str, size: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    let padded = size + 2 * padding;
    if kernel == 0 || kernel > padded {
        return Err(Error::geometry(
            "conv2d",
            format!("{axis}: kernel {kernel} does not fit padded extent {padded}"),
        ));
    }
    Ok((padded - kernel) / stride + 1)
}

fn check_bias<T: Scalar>(op: &'static str, bias: Option<&Var<T>>, out_channels: usize) -> Result<()> {
    if let Some(b) = bias {
        if b.shape() != [out_channels] {
            return Err(Error::dim(op, "bias", out_channels, b.value().numel()));
        }
    }
    Ok(())
}

/// Sliding-window reference implementation.
pub fn conv2d_direct<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let g = Conv2dGeometry::new(input.shape(), weight.shape(), stride, padding)?;
    let (x, w) = (input.data(), weight.data());
    let mut out = vec![T::zero(); g.batch * g.out_channels * g.positions()];
    for n in 0..g.batch {
        for o in 0..g.out_channels {
            let b = bias.map_or(T::zero(), |b| b.data()[o]);
            for oy in 0..g.out_h {
                for ox in 0..g.out_w {
                    let mut acc = b;
                    for c in 0..g.in_channels {
                        for ky in 0..g.kernel_h {
                            let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                            if iy < 0 || iy >= g.height as isize {
                                continue;
                            }
                            for kx in 0..g.kernel_w {
                                let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                                if ix < 0 || ix >= g.width as isize {
                                    continue;
                                }
                                let xi = ((n * g.in_channels + c) * g.height + iy as usize) * g.width + ix as usize;
                                let wi = ((o * g.in_channels + c) * g.kernel_h + ky) * g.kernel_w + kx;
                                acc = acc + x[xi] * w[wi];
                            }
                        }
                    }
                    out[((n * g.out_channels + o) * g.out_h + oy) * g.out_w + ox] = acc;
                }
            }
        }
    }
    Ok(Tensor::from_parts(g.output_shape().to_vec(), out))
}

/// Unfolds one sample `[Cin, H, W]` into `[Cin*kh*kw, Ho*Wo]`.
fn im2col<T: Scalar>(g: &Conv2dGeometry, x: &[T], cols: &mut [T]) {
    let p = g.positions();
    for c in 0..g.in_channels {
        let plane = &x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..g.kernel_h {
            for kx in 0..g.kernel_w {
                let row = (c * g.kernel_h + ky) * g.kernel_w + kx;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                    let line = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    if iy < 0 || iy >= g.height as isize {
                        line.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    for (ox, d) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                        *d = if ix < 0 || ix >= g.width as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters-adds columns back into `[Cin, H, W]`.
fn col2im<T: Scalar>(g: &Conv2dGeometry, cols: &[T], dx: &mut [T]) {
    let p = g.positions();
    for c in 0..g.in_channels {
        let plane = &mut dx[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..g.kernel_h {
            for kx in 0..g.kernel_w {
                let row = (c * g.kernel_h + ky) * g.kernel_w + kx;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.padding as isize;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let line = &mut plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    for ox in 0..g.out_w {
                        let ix = (ox * g.stride + kx) as isize - g.padding as isize;
                        if ix >= 0 && (ix as usize) < g.width {
                            line[ix as usize] = line[ix as usize] + src[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

/// im2col + GEMM forward pass; numerically equivalent to [`conv2d_direct`]
/// up to summation order.
pub fn conv2d_im2col<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let g = Conv2dGeometry::new(input.shape(), weight.shape(), stride, padding)?;
    Ok(conv2d_forward(&g, input.data(), weight.data(), bias.map(|b| b.data())))
}

fn conv2d_forward<T: Scalar>(g: &Conv2dGeometry, x: &[T], w: &[T], bias: Option<&[T]>) -> Tensor<T> {
    let (k, p) = (g.patch_len(), g.positions());
    let in_len = g.in_channels * g.height * g.width;
    let out_len = g.out_channels * p;
    let mut out = vec![T::zero(); g.batch * out_len];
    let mut cols = if g.is_pointwise() { Vec::new() } else { vec![T::zero(); k * p] };
    for n in 0..g.batch {
        let xs = &x[n * in_len..(n + 1) * in_len];
        let ys = &mut out[n * out_len..(n + 1) * out_len];
        let beta = if let Some(b) = bias {
            for (o, row) in ys.chunks_exact_mut(p).enumerate() {
                row.fill(b[o]);
            }
            T::one()
        } else {
            T::zero()
        };
        let rhs: &[T] = if g.is_pointwise() {
            xs
        } else {
            im2col(g, xs, &mut cols);
            &cols
        };
        T::gemm(false, false, g.out_channels, k, p, T::one(), w, rhs, beta, ys);
    }
    Tensor::from_parts(g.output_shape().to_vec(), out)
}

struct Conv2dBackward<T> {
    geom: Conv2dGeometry,
    input: Arc<Tensor<T>>,
    weight: Arc<Tensor<T>>,
}

impl<T: Scalar> Backward<T> for Conv2dBackward<T> {
    fn backward(&self, grad: &Tensor<T>, needs: &[bool]) -> Vec<Option<Tensor<T>>> {
        let g = &self.geom;
        let (k, p) = (g.patch_len(), g.positions());
        let in_len = g.in_channels * g.height * g.width;
        let out_len = g.out_channels * p;
        let (x, w, dy) = (self.input.data(), self.weight.data(), grad.data());

        let mut dx = needs[0].then(|| vec![T::zero(); x.len()]);
        let mut dw = needs[1].then(|| vec![T::zero(); w.len()]);
        let mut cols = vec![T::zero(); k * p];
        for n in 0..g.batch {
            let dys = &dy[n * out_len..(n + 1) * out_len];
            if let Some(dw) = dw.as_mut() {
                let xs = &x[n * in_len..(n + 1) * in_len];
                let rhs: &[T] = if g.is_pointwise() {
                    xs
                } else {
                    im2col(g, xs, &mut cols);
                    &cols
                };
                T::gemm(false, true, g.out_channels, p, k, T::one(), dys, rhs, T::one(), dw);
            }
            if let Some(dx) = dx.as_mut() {
                let dxs = &mut dx[n * in_len..(n + 1) * in_len];
                if g.is_pointwise() {
                    T::gemm(true, false, k, g.out_channels, p, T::one(), w, dys, T::one(), dxs);
                } else {
                    T::gemm(true, false, k, g.out_channels, p, T::one(), w, dys, T::zero(), &mut cols);
                    col2im(g, &cols, dxs);
                }
            }
        }
        let mut result = vec![
            dx.map(|d| Tensor::from_parts(self.input.shape().to_vec(), d)),
            dw.map(|d| Tensor::from_parts(self.weight.shape().to_vec(), d)),
        ];
        if needs.len() > 2 {
            result.push(needs[2].then(|| channel_sums(dy, g.batch, g.out_channels, p)));
        }
        result
    }
}

fn channel_sums<T: Scalar>(dy: &[T], batch: usize, channels: usize, inner: usize) -> Tensor<T> {
    let mut db = vec![T::zero(); channels];
    for n in 0..batch {
        for (o, acc) in db.iter_mut().enumerate() {
            let row = &dy[(n * channels + o) * inner..(n * channels + o + 1) * inner];
            *acc = *acc + row.iter().copied().sum::<T>();
        }
    }
    Tensor::from_parts(vec![channels], db)
}

/// Causal convolution extents: `[N, Cin, L]` with weight `[Cout, Cin, k]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Causal1dGeometry {
    batch: usize,
    in_channels: usize,
    len: usize,
    out_channels: usize,
    kernel: usize,
    dilation: usize,
}

impl Causal1dGeometry {
    fn new(input: &[usize], weight: &[usize], dilation: usize) -> Result<Self> {
        if input.len() != 3 {
            return Err(Error::dim("causal_conv1d", "input rank", 3, input.len()));
        }
        if weight.len() != 3 {
            return Err(Error::dim("causal_conv1d", "weight rank", 3, weight.len()));
        }
        if dilation == 0 {
            return Err(Error::param("dilation", "must be >= 1"));
        }
        if weight[1] != input[1] {
            return Err(Error::dim("causal_conv1d", "in_channels", weight[1], input[1]));
        }
        Ok(Causal1dGeometry {
            batch: input[0],
            in_channels: input[1],
            len: input[2],
            out_channels: weight[0],
            kernel: weight[2],
            dilation,
        })
    }

    /// Input time feeding tap `j` at output time `t`, if not in the left pad.
    #[inline]
    fn source(&self, t: usize, j: usize) -> Option<usize> {
        let back = (self.kernel - 1 - j) * self.dilation;
        t.checked_sub(back)
    }
}

/// Reference loop form of the causal convolution.
pub fn causal_conv1d_direct<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    dilation: usize,
) -> Result<Tensor<T>> {
    let g = Causal1dGeometry::new(input.shape(), weight.shape(), dilation)?;
    let (x, w) = (input.data(), weight.data());
    let mut out = vec![T::zero(); g.batch * g.out_channels * g.len];
    for n in 0..g.batch {
        for o in 0..g.out_channels {
            for t in 0..g.len {
                let mut acc = bias.map_or(T::zero(), |b| b.data()[o]);
                for i in 0..g.in_channels {
                    for j in 0..g.kernel {
                        if let Some(s) = g.source(t, j) {
                            acc = acc + w[(o * g.in_channels + i) * g.kernel + j] * x[(n * g.in_channels + i) * g.len + s];
                        }
                    }
                }
                out[(n * g.out_channels + o) * g.len + t] = acc;
            }
        }
    }
    Ok(Tensor::from_parts(vec![g.batch, g.out_channels, g.len], out))
}

fn causal_im2col<T: Scalar>(g: &Causal1dGeometry, x: &[T], cols: &mut [T]) {
    for i in 0..g.in_channels {
        let series = &x[i * g.len..(i + 1) * g.len];
        for j in 0..g.kernel {
            let row = &mut cols[(i * g.kernel + j) * g.len..(i * g.kernel + j + 1) * g.len];
            for (t, d) in row.iter_mut().enumerate() {
                *d = g.source(t, j).map_or(T::zero(), |s| series[s]);
            }
        }
    }
}

fn causal_col2im<T: Scalar>(g: &Causal1dGeometry, cols: &[T], dx: &mut [T]) {
    for i in 0..g.in_channels {
        let series = &mut dx[i * g.len..(i + 1) * g.len];
        for j in 0..g.kernel {
            let row = &cols[(i * g.kernel + j) * g.len..(i * g.kernel + j + 1) * g.len];
            for (t, v) in row.iter().enumerate() {
                if let Some(s) = g.source(t, j) {
                    series[s] = series[s] + *v;
                }
            }
        }
    }
}

struct CausalConv1dBackward<T> {
    geom: Causal1dGeometry,
    input: Arc<Tensor<T>>,
    weight: Arc<Tensor<T>>,
}

impl<T: Scalar> Backward<T> for CausalConv1dBackward<T> {
    fn backward(&self, grad: &Tensor<T>, needs: &[bool]) -> Vec<Option<Tensor<T>>> {
        let g = &self.geom;
        let k = g.in_channels * g.kernel;
        let in_len = g.in_channels * g.len;
        let out_len = g.out_channels * g.len;
        let (x, w, dy) = (self.input.data(), self.weight.data(), grad.data());
        let mut dx = needs[0].then(|| vec![T::zero(); x.len()]);
        let mut dw = needs[1].then(|| vec![T::zero(); w.len()]);
        let mut cols = vec![T::zero(); k * g.len];
        for n in 0..g.batch {
            let dys = &dy[n * out_len..(n + 1) * out_len];
            if let Some(dw) = dw.as_mut() {
                causal_im2col(g, &x[n * in_len..(n + 1) * in_len], &mut cols);
                T::gemm(false, true, g.out_channels, g.len, k, T::one(), dys, &cols, T::one(), dw);
            }
            if let Some(dx) = dx.as_mut() {
                T::gemm(true, false, k, g.out_channels, g.len, T::one(), w, dys, T::zero(), &mut cols);
                causal_col2im(g, &cols, &mut dx[n * in_len..(n + 1) * in_len]);
            }
        }
        let mut result = vec![
            dx.map(|d| Tensor::from_parts(self.input.shape().to_vec(), d)),
            dw.map(|d| Tensor::from_parts(self.weight.shape().to_vec(), d)),
        ];
        if needs.len() > 2 {
            result.push(needs[2].then(|| channel_sums(dy, g.batch, g.out_channels, g.len)));
        }
        result
    }
}

impl<T: Scalar> Tape<T> {
    /// 2-D cross-correlation of `[N, Cin, H, W]` with `[Cout, Cin, kh, kw]`,
    /// plus an optional per-channel bias.
    pub fn conv2d(
        &mut self,
        input: &Var<T>,
        weight: &Var<T>,
        bias: Option<&Var<T>>,
        stride: usize,
        padding: usize,
    ) -> Result<Var<T>> {
        let geom = Conv2dGeometry::new(input.shape(), weight.shape(), stride, padding)?;
        check_bias("conv2d", bias, geom.out_channels)?;
        let out = conv2d_forward(
            &geom,
            input.value().data(),
            weight.value().data(),
            bias.map(|b| b.value().data()),
        );
        let mut parents = vec![input, weight];
        parents.extend(bias);
        let backward = Conv2dBackward {
            geom,
            input: input.shared().clone(),
            weight: weight.shared().clone(),
        };
        Ok(self.record(out, &parents, backward))
    }

    /// Dilated causal convolution of `[N, Cin, L]` with `[Cout, Cin, k]`.
    /// The input is implicitly left-padded by `(k-1)*dilation` zeros so the
    /// output has length `L` and position `t` only sees inputs `<= t`.
    pub fn causal_conv1d(
        &mut self,
        input: &Var<T>,
        weight: &Var<T>,
        bias: Option<&Var<T>>,
        dilation: usize,
    ) -> Result<Var<T>> {
        let geom = Causal1dGeometry::new(input.shape(), weight.shape(), dilation)?;
        check_bias("causal_conv1d", bias, geom.out_channels)?;
        let k = geom.in_channels * geom.kernel;
        let in_len = geom.in_channels * geom.len;
        let out_len = geom.out_channels * geom.len;
        let (x, w) = (input.value().data(), weight.value().data());
        let mut out = vec![T::zero(); geom.batch * out_len];
        let mut cols = vec![T::zero(); k * geom.len];
        for n in 0..geom.batch {
            let ys = &mut out[n * out_len..(n + 1) * out_len];
            let beta = match bias {
                Some(b) => {
                    for (o, row) in ys.chunks_exact_mut(geom.len).enumerate() {
                        row.fill(b.value().data()[o]);
                    }
                    T::one()
                }
                None => T::zero(),
            };
            causal_im2col(&geom, &x[n * in_len..(n + 1) * in_len], &mut cols);
            T::gemm(false, false, geom.out_channels, k, geom.len, T::one(), w, &cols, beta, ys);
        }
        let out = Tensor::from_parts(vec![geom.batch, geom.out_channels, geom.len], out);
        let mut parents = vec![input, weight];
        parents.extend(bias);
        let backward = CausalConv1dBackward {
            geom,
            input: input.shared().clone(),
            weight: weight.shared().clone(),
        };
        Ok(self.record(out, &parents, backward))
    }
}
