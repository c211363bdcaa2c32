//! Slow, obviously-correct reference computations for tests.
//!
//! Nothing here shares code with `drpnn-core`; everything works on plain
//! `f64` slices with explicit dimensions so a bug in the library cannot
//! leak into the value it is checked against.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dimensions `(n, c, h, w)` or `(c_out, c_in, kh, kw)`.
pub type Dims = (usize, usize, usize, usize);

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut impl Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn len(d: Dims) -> usize {
    d.0 * d.1 * d.2 * d.3
}

/// Seven nested loops over (n, o, y, x, i, dy, dx); zero padding of `k/2`.
pub fn conv2d_direct(input: &[f64], di: Dims, weights: &[f64], dk: Dims, bias: &[f64]) -> Vec<f64> {
    let (n_b, c_in, h, w) = di;
    let (c_out, k_in, kh, kw) = dk;
    assert_eq!(c_in, k_in);
    let (ph, pw) = ((kh - 1) as isize / 2, (kw - 1) as isize / 2);
    let mut out = vec![0.0; n_b * c_out * h * w];
    for n in 0..n_b {
        for o in 0..c_out {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = bias[o];
                    for i in 0..c_in {
                        for dy in 0..kh {
                            for dx in 0..kw {
                                let sy = y as isize + dy as isize - ph;
                                let sx = x as isize + dx as isize - pw;
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                    continue;
                                }
                                let iv = input[((n * c_in + i) * h + sy as usize) * w + sx as usize];
                                let wv = weights[((o * c_in + i) * kh + dy) * kw + dx];
                                acc += iv * wv;
                            }
                        }
                    }
                    out[((n * c_out + o) * h + y) * w + x] = acc;
                }
            }
        }
    }
    out
}

/// One layer of the reference network.
pub struct RefLayer {
    pub weights: Vec<f64>,
    pub dims: Dims,
    pub bias: Vec<f64>,
}

/// Straight-line residual network: layers 1..L−1 with ReLU (the last of them
/// only when `relu_before_skip`), add the input, then layer L without activation.
pub fn residual_forward(layers: &[RefLayer], relu_before_skip: bool, input: &[f64], di: Dims) -> Vec<f64> {
    let l_count = layers.len();
    let (n, _, h, w) = di;
    let mut x = input.to_vec();
    let mut c = di.1;
    for (idx, layer) in layers[..l_count - 1].iter().enumerate() {
        let mut y = conv2d_direct(&x, (n, c, h, w), &layer.weights, layer.dims, &layer.bias);
        let is_last_body = idx == l_count - 2;
        if !is_last_body || relu_before_skip {
            for v in &mut y {
                *v = v.max(0.0);
            }
        }
        x = y;
        c = layer.dims.0;
    }
    assert_eq!(x.len(), input.len(), "residual branch must restore the input width");
    let stage1: Vec<f64> = x.iter().zip(input).map(|(a, b)| a + b).collect();
    let last = &layers[l_count - 1];
    conv2d_direct(&stage1, di, &last.weights, last.dims, &last.bias)
}

/// `(f(x + h e_i) − f(x − h e_i)) / 2h` for every coordinate.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + step;
            let plus = f(&p);
            p[i] = x[i] - step;
            let minus = f(&p);
            p[i] = x[i];
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

/// `|a − b| / max(|a|, |b|, floor)`; the floor keeps near-zero entries from
/// turning rounding noise into huge relative errors.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| relative_error(x, y, floor))
        .fold(0.0, f64::max)
}

/// Keys cubic convolution kernel.
pub fn keys(x: f64, a: f64) -> f64 {
    let t = x.abs();
    if t <= 1.0 {
        (a + 2.0) * t.powi(3) - (a + 3.0) * t.powi(2) + 1.0
    } else if t < 2.0 {
        a * t.powi(3) - 5.0 * a * t.powi(2) + 8.0 * a * t - 4.0 * a
    } else {
        0.0
    }
}

/// Resamples one `h × w` plane to `oh × ow` by evaluating the 2-D product
/// kernel at every source pixel within reach (edge-clamped), normalising by
/// the total weight. `stretch` = 1 for upsampling, `scale` for anti-aliased
/// downsampling.
fn resample_pointwise(plane: &[f64], h: usize, w: usize, oh: usize, ow: usize, ratio: f64, stretch: f64) -> Vec<f64> {
    let reach = (2.0 * stretch).ceil() as isize + 2;
    let mut out = vec![0.0; oh * ow];
    for oy in 0..oh {
        let cy = (oy as f64 + 0.5) * ratio - 0.5;
        for ox in 0..ow {
            let cx = (ox as f64 + 0.5) * ratio - 0.5;
            let (mut acc, mut total) = (0.0, 0.0);
            for jy in (cy.floor() as isize - reach)..=(cy.floor() as isize + reach) {
                let wy = keys((jy as f64 - cy) / stretch, -0.5);
                if wy == 0.0 {
                    continue;
                }
                let sy = jy.clamp(0, h as isize - 1) as usize;
                for jx in (cx.floor() as isize - reach)..=(cx.floor() as isize + reach) {
                    let wx = keys((jx as f64 - cx) / stretch, -0.5);
                    if wx == 0.0 {
                        continue;
                    }
                    let sx = jx.clamp(0, w as isize - 1) as usize;
                    acc += wy * wx * plane[sy * w + sx];
                    total += wy * wx;
                }
            }
            out[oy * ow + ox] = acc / total;
        }
    }
    out
}

pub fn bicubic_upsample_pointwise(plane: &[f64], h: usize, w: usize, scale: usize) -> Vec<f64> {
    resample_pointwise(plane, h, w, h * scale, w * scale, 1.0 / scale as f64, 1.0)
}

pub fn bicubic_downsample_pointwise(plane: &[f64], h: usize, w: usize, scale: usize) -> Vec<f64> {
    resample_pointwise(plane, h, w, h / scale, w / scale, scale as f64, scale as f64)
}

/// Universal quality index of one band, averaged over non-overlapping
/// `window × window` blocks, with the degenerate-block convention (equal
/// means and zero variances → 1, different means → 0).
pub fn q_band(x: &[f64], y: &[f64], h: usize, w: usize, window: usize) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0;
    for by in 0..h / window {
        for bx in 0..w / window {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for r in by * window..(by + 1) * window {
                for c in bx * window..(bx + 1) * window {
                    xs.push(x[r * w + c]);
                    ys.push(y[r * w + c]);
                }
            }
            let m = xs.len() as f64;
            let mx = xs.iter().sum::<f64>() / m;
            let my = ys.iter().sum::<f64>() / m;
            let vx = xs.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / (m - 1.0);
            let vy = ys.iter().map(|v| (v - my).powi(2)).sum::<f64>() / (m - 1.0);
            let cxy = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (m - 1.0);
            if vx + vy == 0.0 {
                sum += if mx == my { 1.0 } else { 0.0 };
                count += 1;
            } else if mx * mx + my * my != 0.0 {
                sum += 4.0 * cxy * mx * my / ((vx + vy) * (mx * mx + my * my));
                count += 1;
            }
        }
    }
    (count > 0).then(|| sum / count as f64)
}
