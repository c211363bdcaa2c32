//! Size-preserving 2-D convolution with zero "same" padding.
//!
//! Each batch item is lowered to a column matrix (`c_in·kh·kw × h·w`) and the
//! convolution becomes one matrix product per item. Batch items are always
//! processed in ascending order, so weight and bias gradients accumulate in a
//! fixed order and repeated runs are bit-identical.

use crate::error::{Error, Result};
use crate::real::{MatRef, Real};

use super::{ensure_same_shape, Shape, Tensor};

/// Filter bank `weights[o, i, dy, dx]` plus one bias per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel<T = f32> {
    weights: Tensor<T>,
    bias: Vec<T>,
}

impl<T: Real> ConvKernel<T> {
    /// `weights` is laid out as `c_out × c_in × kh × kw`.
    pub fn new(weights: Tensor<T>, bias: Vec<T>) -> Result<Self> {
        let s = weights.shape();
        if s.h % 2 == 0 || s.w % 2 == 0 {
            return Err(Error::Config(format!(
                "kernel size {}x{} must be odd in both directions",
                s.h, s.w
            )));
        }
        if s.n == 0 || s.c == 0 {
            return Err(Error::Config(format!("kernel {s} has no channels")));
        }
        if bias.len() != s.n {
            return Err(Error::Config(format!(
                "kernel with {} output channels needs {} biases, got {}",
                s.n,
                s.n,
                bias.len()
            )));
        }
        Ok(ConvKernel { weights, bias })
    }

    pub fn zeros(c_out: usize, c_in: usize, kh: usize, kw: usize) -> Result<Self> {
        Self::new(
            Tensor::zeros(Shape::new(c_out, c_in, kh, kw)),
            vec![T::zero(); c_out],
        )
    }

    pub fn c_out(&self) -> usize {
        self.weights.shape().n
    }

    pub fn c_in(&self) -> usize {
        self.weights.shape().c
    }

    pub fn kh(&self) -> usize {
        self.weights.shape().h
    }

    pub fn kw(&self) -> usize {
        self.weights.shape().w
    }

    pub fn weights(&self) -> &Tensor<T> {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Tensor<T> {
        &mut self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn cast<U: Real>(&self) -> ConvKernel<U> {
        ConvKernel {
            weights: self.weights.cast(),
            bias: self.bias.iter().map(|&b| U::from_f64_lossy(b.as_f64())).collect(),
        }
    }

    fn patch_len(&self) -> usize {
        self.c_in() * self.kh() * self.kw()
    }

    fn check_input(&self, input: Shape) -> Result<()> {
        if input.c != self.c_in() {
            return Err(Error::Config(format!(
                "convolution expects {} input channels, tensor {input} has {}",
                self.c_in(),
                input.c
            )));
        }
        Ok(())
    }
}

/// Gradients of a convolution with respect to its input and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T = f32> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Vec<T>,
}

/// `out[n,o,y,x] = bias[o] + Σ input[n,i,y+dy−ph,x+dx−pw]·w[o,i,dy,dx]`, zero outside the image.
pub fn conv2d_forward<T: Real>(input: &Tensor<T>, kernel: &ConvKernel<T>) -> Result<Tensor<T>> {
    kernel.check_input(input.shape())?;
    let s = input.shape();
    let hw = s.plane();
    let k = kernel.patch_len();
    let c_out = kernel.c_out();
    let mut out = Tensor::zeros(s.with_channels(c_out));
    let mut col = Vec::new();

    for n in 0..s.n {
        let col_ref = lower(input.sample(n), s, kernel.kh(), kernel.kw(), &mut col);
        let out_n = out.sample_mut(n);
        for (o, plane) in out_n.chunks_exact_mut(hw).enumerate() {
            plane.fill(kernel.bias[o]);
        }
        T::gemm(
            c_out,
            k,
            hw,
            MatRef::row_major(kernel.weights.data(), k),
            MatRef::row_major(col_ref, hw),
            T::one(),
            out_n,
        );
    }
    Ok(out)
}

/// Backward pass of [`conv2d_forward`].
pub fn conv2d_backward<T: Real>(
    input: &Tensor<T>,
    kernel: &ConvKernel<T>,
    grad_output: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let (grad_input, weights, bias) = backward_impl(input, kernel, grad_output, true)?;
    Ok(ConvGrads {
        input: grad_input.expect("input gradient requested"),
        weights,
        bias,
    })
}

/// Parameter gradients only; the first layer of a network never needs the input gradient.
pub(crate) fn conv2d_backward_params<T: Real>(
    input: &Tensor<T>,
    kernel: &ConvKernel<T>,
    grad_output: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<T>)> {
    let (_, weights, bias) = backward_impl(input, kernel, grad_output, false)?;
    Ok((weights, bias))
}

type BackwardParts<T> = (Option<Tensor<T>>, Tensor<T>, Vec<T>);

fn backward_impl<T: Real>(
    input: &Tensor<T>,
    kernel: &ConvKernel<T>,
    grad_output: &Tensor<T>,
    want_input: bool,
) -> Result<BackwardParts<T>> {
    kernel.check_input(input.shape())?;
    let s = input.shape();
    ensure_same_shape("conv2d_backward", s.with_channels(kernel.c_out()), grad_output.shape())?;

    let hw = s.plane();
    let k = kernel.patch_len();
    let c_out = kernel.c_out();
    let (kh, kw) = (kernel.kh(), kernel.kw());

    let mut grad_w = Tensor::zeros(kernel.weights.shape());
    let mut grad_b = vec![T::zero(); c_out];
    let mut grad_in = want_input.then(|| Tensor::zeros(s));
    let mut col = Vec::new();
    let mut grad_col = if want_input { vec![T::zero(); k * hw] } else { Vec::new() };

    for n in 0..s.n {
        let g_n = grad_output.sample(n);
        for (o, plane) in g_n.chunks_exact(hw).enumerate() {
            let mut acc = grad_b[o];
            for &g in plane {
                acc += g;
            }
            grad_b[o] = acc;
        }

        let col_ref = lower(input.sample(n), s, kh, kw, &mut col);
        // dW (c_out × k) += dY (c_out × hw) · colᵀ (hw × k)
        T::gemm(
            c_out,
            hw,
            k,
            MatRef::row_major(g_n, hw),
            MatRef::transposed(col_ref, hw),
            T::one(),
            grad_w.data_mut(),
        );

        if let Some(grad_in) = grad_in.as_mut() {
            // dcol (k × hw) = Wᵀ (k × c_out) · dY (c_out × hw)
            T::gemm(
                k,
                c_out,
                hw,
                MatRef::transposed(kernel.weights.data(), k),
                MatRef::row_major(g_n, hw),
                T::zero(),
                &mut grad_col,
            );
            raise(&grad_col, s, kh, kw, grad_in.sample_mut(n));
        }
    }
    Ok((grad_in, grad_w, grad_b))
}

/// Column matrix of one batch item: row `(i, dy, dx)`, column `(y, x)`.
/// 1×1 kernels use the sample itself.
fn lower<'a, T: Real>(sample: &'a [T], s: Shape, kh: usize, kw: usize, col: &'a mut Vec<T>) -> &'a [T] {
    if kh == 1 && kw == 1 {
        return sample;
    }
    let (h, w) = (s.h, s.w);
    let (ph, pw) = (kh / 2, kw / 2);
    let hw = h * w;
    col.clear();
    col.resize(s.c * kh * kw * hw, T::zero());

    let mut row = 0;
    for i in 0..s.c {
        let plane = &sample[i * hw..(i + 1) * hw];
        for dy in 0..kh {
            for dx in 0..kw {
                let dst = &mut col[row * hw..(row + 1) * hw];
                let (x_lo, x_hi) = valid_range(w, dx, pw);
                for y in 0..h {
                    let sy = y + dy;
                    if sy < ph || sy - ph >= h || x_lo >= x_hi {
                        continue;
                    }
                    let src_row = &plane[(sy - ph) * w..(sy - ph + 1) * w];
                    dst[y * w + x_lo..y * w + x_hi]
                        .copy_from_slice(&src_row[x_lo + dx - pw..x_hi + dx - pw]);
                }
                row += 1;
            }
        }
    }
    col
}

/// Adjoint of [`lower`]: scatters a column-matrix gradient back onto the image.
fn raise<T: Real>(grad_col: &[T], s: Shape, kh: usize, kw: usize, out: &mut [T]) {
    let (h, w) = (s.h, s.w);
    let (ph, pw) = (kh / 2, kw / 2);
    let hw = h * w;

    let mut row = 0;
    for i in 0..s.c {
        let plane = &mut out[i * hw..(i + 1) * hw];
        for dy in 0..kh {
            for dx in 0..kw {
                let src = &grad_col[row * hw..(row + 1) * hw];
                let (x_lo, x_hi) = valid_range(w, dx, pw);
                for y in 0..h {
                    let sy = y + dy;
                    if sy < ph || sy - ph >= h || x_lo >= x_hi {
                        continue;
                    }
                    let dst_row = &mut plane[(sy - ph) * w..(sy - ph + 1) * w];
                    for (d, &g) in dst_row[x_lo + dx - pw..x_hi + dx - pw]
                        .iter_mut()
                        .zip(&src[y * w + x_lo..y * w + x_hi])
                    {
                        *d += g;
                    }
                }
                row += 1;
            }
        }
    }
}

/// Output columns `x` for which `x + dx − pw` lies inside `[0, w)`.
fn valid_range(w: usize, dx: usize, pw: usize) -> (usize, usize) {
    let lo = pw.saturating_sub(dx);
    let hi = (w + pw).saturating_sub(dx).min(w);
    (lo, hi.max(lo))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(shape: Shape, scale: f64) -> Tensor<f64> {
        let mut v = 0.37;
        Tensor::from_fn(shape, |_, _, _, _| {
            v = (v * 3.7 + 0.11) % 1.0;
            (v - 0.5) * scale
        })
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let input = Tensor::<f32>::from_fn(Shape::new(1, 1, 3, 3), |_, _, y, x| (y * 3 + x) as f32);
        let mut k = ConvKernel::<f32>::zeros(1, 1, 1, 1).unwrap();
        k.weights_mut().data_mut()[0] = 1.0;
        assert_eq!(conv2d_forward(&input, &k).unwrap(), input);

        // Same through the lowered path: a 3×3 kernel with only the centre tap set.
        let mut k3 = ConvKernel::<f32>::zeros(1, 1, 3, 3).unwrap();
        k3.weights_mut().set(0, 0, 1, 1, 1.0);
        assert_eq!(conv2d_forward(&input, &k3).unwrap(), input);
    }

    #[test]
    fn zero_weights_give_bias_planes() {
        let input = seq(Shape::new(2, 3, 4, 5), 2.0);
        let mut k = ConvKernel::<f64>::zeros(2, 3, 3, 3).unwrap();
        k.bias_mut().copy_from_slice(&[1.5, -0.25]);
        let out = conv2d_forward(&input, &k).unwrap();
        assert_eq!(out.shape(), Shape::new(2, 2, 4, 5));
        for n in 0..2 {
            assert!(out.plane(n, 0).iter().all(|&v| v == 1.5));
            assert!(out.plane(n, 1).iter().all(|&v| v == -0.25));
        }
    }

    #[test]
    fn rejects_bad_kernels_and_inputs() {
        assert!(ConvKernel::<f32>::zeros(1, 1, 2, 3).is_err());
        assert!(ConvKernel::<f32>::new(Tensor::zeros(Shape::new(2, 1, 3, 3)), vec![0.0]).is_err());
        let k = ConvKernel::<f32>::zeros(1, 2, 3, 3).unwrap();
        let wrong = Tensor::<f32>::zeros(Shape::new(1, 3, 4, 4));
        assert!(matches!(conv2d_forward(&wrong, &k), Err(Error::Config(_))));
        let input = Tensor::<f32>::zeros(Shape::new(1, 2, 4, 4));
        let bad_grad = Tensor::<f32>::zeros(Shape::new(1, 2, 4, 4));
        assert!(matches!(
            conv2d_backward(&input, &k, &bad_grad),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn zero_upstream_gradient() {
        let input = seq(Shape::new(1, 2, 5, 5), 1.0);
        let k = ConvKernel::new(seq(Shape::new(3, 2, 3, 3), 1.0), vec![0.1, 0.2, 0.3]).unwrap();
        let g = conv2d_backward(&input, &k, &Tensor::zeros(Shape::new(1, 3, 5, 5))).unwrap();
        assert!(g.input.data().iter().all(|&v| v == 0.0));
        assert!(g.weights.data().iter().all(|&v| v == 0.0));
        assert!(g.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_chain_rule() {
        let (a, w, g) = (1.5f64, -2.0f64, 0.75f64);
        let input = Tensor::from_vec(Shape::new(1, 1, 1, 1), vec![a]).unwrap();
        let k = ConvKernel::new(Tensor::from_vec(Shape::new(1, 1, 1, 1), vec![w]).unwrap(), vec![0.3]).unwrap();
        let grads = conv2d_backward(&input, &k, &Tensor::from_vec(Shape::new(1, 1, 1, 1), vec![g]).unwrap()).unwrap();
        assert_eq!(grads.weights.data(), &[a * g]);
        assert_eq!(grads.bias, vec![g]);
        assert_eq!(grads.input.data(), &[w * g]);
    }

    #[test]
    fn params_only_backward_matches_full() {
        let input = seq(Shape::new(2, 2, 6, 5), 1.0);
        let k = ConvKernel::new(seq(Shape::new(3, 2, 5, 3), 1.0), vec![0.0; 3]).unwrap();
        let gout = seq(Shape::new(2, 3, 6, 5), 1.0);
        let full = conv2d_backward(&input, &k, &gout).unwrap();
        let (w, b) = conv2d_backward_params(&input, &k, &gout).unwrap();
        assert_eq!(full.weights, w);
        assert_eq!(full.bias, b);
    }

    #[test]
    fn kernel_wider_than_image() {
        // 5×5 kernel on a 2×2 image: most taps fall outside and read zero.
        let input = Tensor::<f64>::from_vec(Shape::new(1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let k = ConvKernel::new(Tensor::full(Shape::new(1, 1, 5, 5), 1.0), vec![0.0]).unwrap();
        let out = conv2d_forward(&input, &k).unwrap();
        assert_eq!(out.data(), &[10.0; 4]);
    }
}
