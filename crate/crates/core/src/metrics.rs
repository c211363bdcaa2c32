//! Reference-based quality indices for fused multispectral images:
//! Q (universal image quality index), ERGAS, SAM and SCC.
//!
//! All accumulation is done in f64 regardless of the tensor precision.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{ensure_same_shape, Tensor};

pub const DEFAULT_Q_WINDOW: usize = 32;

/// The four indices for one fused/reference pair, in the usual column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub q: f64,
    pub ergas: f64,
    pub sam_degrees: f64,
    pub scc: f64,
    pub scale: usize,
    pub bands: usize,
    pub q_window: usize,
}

impl MetricsReport {
    pub const HEADER: &'static str = "Q\tERGAS\tSAM\tSCC";

    /// Tab-separated `Q ERGAS SAM SCC` line.
    pub fn to_line(&self) -> String {
        format!("{:.4}\t{:.4}\t{:.4}\t{:.4}", self.q, self.ergas, self.sam_degrees, self.scc)
    }

    /// Key-value form including the settings the numbers depend on.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serialises")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Metric(format!("bad metrics report: {e}")))
    }

    /// Strictly better than `other` on all four indices.
    pub fn beats(&self, other: &MetricsReport) -> bool {
        self.q > other.q && self.ergas < other.ergas && self.sam_degrees < other.sam_degrees && self.scc > other.scc
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Q {:.4}  ERGAS {:.4}  SAM {:.4}°  SCC {:.4}",
            self.q, self.ergas, self.sam_degrees, self.scc
        )
    }
}

fn check_pair<T: Real>(op: &'static str, fused: &Tensor<T>, reference: &Tensor<T>) -> Result<()> {
    ensure_same_shape(op, reference.shape(), fused.shape())?;
    if reference.is_empty() {
        return Err(Error::Metric(format!("{op}: empty images")));
    }
    Ok(())
}

fn block_q(x: &[f64], y: &[f64]) -> Option<f64> {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        vx += da * da;
        vy += db * db;
        cxy += da * db;
    }
    // the common 1/(m−1) normalisation cancels in the ratio
    if vx + vy == 0.0 {
        return Some(if mx == my { 1.0 } else { 0.0 });
    }
    let mean_term = mx * mx + my * my;
    if mean_term == 0.0 {
        return None;
    }
    Some(4.0 * cxy * mx * my / ((vx + vy) * mean_term))
}

/// Block-averaged universal image quality index over non-overlapping
/// `window × window` blocks (partial blocks at the right/bottom are ignored),
/// averaged over blocks then over bands and batch items.
///
/// Blocks with zero variance in both images score 1 when their means agree
/// and 0 otherwise; blocks whose means are both zero are skipped.
pub fn q_index<T: Real>(fused: &Tensor<T>, reference: &Tensor<T>, window: usize) -> Result<f64> {
    check_pair("Q", fused, reference)?;
    let s = reference.shape();
    if window < 2 {
        return Err(Error::Metric(format!("Q window must be at least 2, got {window}")));
    }
    if window > s.h || window > s.w {
        return Err(Error::Metric(format!("Q window {window} larger than image {}x{}", s.h, s.w)));
    }
    let mut band_sum = 0.0;
    let mut bands = 0usize;
    let mut bx = Vec::with_capacity(window * window);
    let mut by = Vec::with_capacity(window * window);
    for n in 0..s.n {
        for c in 0..s.c {
            let (fp, rp) = (fused.plane(n, c), reference.plane(n, c));
            let (mut sum, mut count) = (0.0, 0usize);
            for y0 in (0..=s.h - window).step_by(window) {
                for x0 in (0..=s.w - window).step_by(window) {
                    bx.clear();
                    by.clear();
                    for y in y0..y0 + window {
                        let row = y * s.w;
                        bx.extend(fp[row + x0..row + x0 + window].iter().map(|v| v.as_f64()));
                        by.extend(rp[row + x0..row + x0 + window].iter().map(|v| v.as_f64()));
                    }
                    if let Some(q) = block_q(&bx, &by) {
                        sum += q;
                        count += 1;
                    }
                }
            }
            if count > 0 {
                band_sum += sum / count as f64;
                bands += 1;
            }
        }
    }
    if bands == 0 {
        return Err(Error::Metric("Q undefined: every block has zero mean".into()));
    }
    Ok(band_sum / bands as f64)
}

/// `100/scale · sqrt(mean_b (RMSE_b / μ_b)²)` with `μ_b` the reference band mean.
pub fn ergas<T: Real>(fused: &Tensor<T>, reference: &Tensor<T>, scale: usize) -> Result<f64> {
    check_pair("ERGAS", fused, reference)?;
    if scale < 2 {
        return Err(Error::Metric(format!("ERGAS scale must be at least 2, got {scale}")));
    }
    let s = reference.shape();
    let mut acc = 0.0;
    for c in 0..s.c {
        let (mut se, mut sum) = (0.0, 0.0);
        for n in 0..s.n {
            for (&f, &r) in fused.plane(n, c).iter().zip(reference.plane(n, c)) {
                let (f, r) = (f.as_f64(), r.as_f64());
                se += (f - r) * (f - r);
                sum += r;
            }
        }
        let count = (s.n * s.plane()) as f64;
        let mean = sum / count;
        if mean == 0.0 {
            return Err(Error::Metric(format!("ERGAS undefined: reference band {c} has zero mean")));
        }
        let rmse = (se / count).sqrt();
        acc += (rmse / mean).powi(2);
    }
    Ok(100.0 / scale as f64 * (acc / s.c as f64).sqrt())
}

/// Mean spectral angle in degrees over pixels where both spectra are nonzero.
pub fn sam<T: Real>(fused: &Tensor<T>, reference: &Tensor<T>) -> Result<f64> {
    check_pair("SAM", fused, reference)?;
    let s = reference.shape();
    if s.c < 2 {
        return Err(Error::Metric("SAM needs at least two bands".into()));
    }
    let (mut total, mut count) = (0.0, 0usize);
    for n in 0..s.n {
        for p in 0..s.plane() {
            let (mut nf, mut nr) = (0.0, 0.0);
            for c in 0..s.c {
                nf += fused.plane(n, c)[p].as_f64().powi(2);
                nr += reference.plane(n, c)[p].as_f64().powi(2);
            }
            if nf == 0.0 || nr == 0.0 {
                continue;
            }
            let (nf, nr) = (nf.sqrt(), nr.sqrt());
            // arccos of the normalised dot product, evaluated as
            // 2·atan2(|f̂ − r̂|, |f̂ + r̂|) to stay accurate near 0°
            let (mut diff, mut sum) = (0.0, 0.0);
            for c in 0..s.c {
                let f = fused.plane(n, c)[p].as_f64() / nf;
                let r = reference.plane(n, c)[p].as_f64() / nr;
                diff += (f - r) * (f - r);
                sum += (f + r) * (f + r);
            }
            total += 2.0 * diff.sqrt().atan2(sum.sqrt());
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Metric("SAM undefined: every pixel has a zero spectrum".into()));
    }
    Ok((total / count as f64).to_degrees())
}

/// 8-neighbour Laplacian `[[−1,−1,−1],[−1,8,−1],[−1,−1,−1]]` on interior pixels.
fn laplacian_interior(plane: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(h.saturating_sub(2) * w.saturating_sub(2));
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let mut acc = 9.0 * plane[y * w + x];
            for dy in 0..3 {
                for dx in 0..3 {
                    acc -= plane[(y + dy - 1) * w + x + dx - 1];
                }
            }
            out.push(acc);
        }
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let m = a.len() as f64;
    let ma = a.iter().sum::<f64>() / m;
    let mb = b.iter().sum::<f64>() / m;
    let (mut va, mut vb, mut cab) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
        cab += (x - ma) * (y - mb);
    }
    if vb == 0.0 {
        return None;
    }
    if va == 0.0 {
        return Some(0.0);
    }
    Some((cab / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}

fn plane_f64<T: Real>(t: &Tensor<T>, n: usize, c: usize) -> Vec<f64> {
    t.plane(n, c).iter().map(|v| v.as_f64()).collect()
}

fn scc_planes(pairs: impl Iterator<Item = (Vec<f64>, Vec<f64>)>, h: usize, w: usize) -> Result<f64> {
    if h < 3 || w < 3 {
        return Err(Error::Metric(format!("SCC needs images of at least 3x3, got {h}x{w}")));
    }
    let (mut sum, mut count) = (0.0, 0usize);
    for (f, r) in pairs {
        let lf = laplacian_interior(&f, h, w);
        let lr = laplacian_interior(&r, h, w);
        if let Some(rho) = pearson(&lf, &lr) {
            sum += rho;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Metric("SCC undefined: every high-passed reference band is constant".into()));
    }
    Ok(sum / count as f64)
}

/// Spatial correlation coefficient: Pearson correlation of Laplacian
/// high-pass images per band, averaged over bands.
///
/// The filter is evaluated on interior pixels only, so the index ignores
/// per-band offsets exactly. Bands whose filtered reference is constant are
/// skipped; a constant filtered fused band against a varying reference scores 0.
pub fn scc<T: Real>(fused: &Tensor<T>, reference: &Tensor<T>) -> Result<f64> {
    check_pair("SCC", fused, reference)?;
    let s = reference.shape();
    let pairs = (0..s.n).flat_map(|n| (0..s.c).map(move |c| (n, c)));
    scc_planes(
        pairs.map(|(n, c)| (plane_f64(fused, n, c), plane_f64(reference, n, c))),
        s.h,
        s.w,
    )
}

/// SCC of every fused band against the panchromatic image, for full-resolution
/// data where no multispectral reference exists.
pub fn scc_against_pan<T: Real>(fused: &Tensor<T>, pan: &Tensor<T>) -> Result<f64> {
    let s = fused.shape();
    ensure_same_shape("SCC vs PAN", s.with_channels(1), pan.shape())?;
    let pairs = (0..s.n).flat_map(|n| (0..s.c).map(move |c| (n, c)));
    scc_planes(
        pairs.map(|(n, c)| (plane_f64(fused, n, c), plane_f64(pan, n, 0))),
        s.h,
        s.w,
    )
}

pub fn evaluate_all<T: Real>(fused: &Tensor<T>, reference: &Tensor<T>, scale: usize, window: usize) -> Result<MetricsReport> {
    Ok(MetricsReport {
        q: q_index(fused, reference, window)?,
        ergas: ergas(fused, reference, scale)?,
        sam_degrees: sam(fused, reference)?,
        scc: scc(fused, reference)?,
        scale,
        bands: reference.shape().c,
        q_window: window,
    })
}
