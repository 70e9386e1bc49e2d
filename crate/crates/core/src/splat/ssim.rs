//! Structural similarity over cost images (dynamic range 1), with its gradient
//! with respect to the first image.
//!
//! Local statistics use an 11×11 Gaussian window (σ = 1.5). Near the border
//! the window is truncated to the image and renormalized, so constant images
//! keep exact local means everywhere.

use crate::error::Result;
use crate::semantics::CostImage;

pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

const RADIUS: usize = 5;
const SIGMA: f64 = 1.5;

/// Normalized, border-truncated 1D window weights for every position.
struct Window {
    rows: Vec<(usize, Vec<f64>)>,
}

impl Window {
    fn new(n: usize) -> Self {
        let kernel: Vec<f64> = (0..=2 * RADIUS)
            .map(|k| {
                let d = k as f64 - RADIUS as f64;
                (-d * d / (2.0 * SIGMA * SIGMA)).exp()
            })
            .collect();
        let rows = (0..n)
            .map(|p| {
                let lo = p.saturating_sub(RADIUS);
                let hi = (p + RADIUS).min(n - 1);
                let w: Vec<f64> = (lo..=hi).map(|q| kernel[q + RADIUS - p]).collect();
                let s: f64 = w.iter().sum();
                (lo, w.into_iter().map(|x| x / s).collect())
            })
            .collect();
        Self { rows }
    }
}

struct Filter {
    w: usize,
    h: usize,
    wx: Window,
    wy: Window,
}

impl Filter {
    fn new(w: usize, h: usize) -> Self {
        Self { w, h, wx: Window::new(w), wy: Window::new(h) }
    }

    /// out[p] = Σ_q w(p, q)·img[q]
    fn apply(&self, img: &[f64]) -> Vec<f64> {
        let (w, h) = (self.w, self.h);
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            let row = &img[y * w..(y + 1) * w];
            for (x, (lo, ws)) in self.wx.rows.iter().enumerate() {
                tmp[y * w + x] = ws.iter().zip(&row[*lo..]).map(|(a, b)| a * b).sum();
            }
        }
        let mut out = vec![0.0; w * h];
        for (y, (lo, ws)) in self.wy.rows.iter().enumerate() {
            for x in 0..w {
                out[y * w + x] = ws.iter().enumerate().map(|(k, a)| a * tmp[(lo + k) * w + x]).sum();
            }
        }
        out
    }

    /// out[q] = Σ_p w(p, q)·img[p]
    fn apply_transposed(&self, img: &[f64]) -> Vec<f64> {
        let (w, h) = (self.w, self.h);
        let mut tmp = vec![0.0; w * h];
        for (y, (lo, ws)) in self.wy.rows.iter().enumerate() {
            for (k, a) in ws.iter().enumerate() {
                let src = &img[y * w..(y + 1) * w];
                let dst = &mut tmp[(lo + k) * w..(lo + k + 1) * w];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for (x, (lo, ws)) in self.wx.rows.iter().enumerate() {
                let v = tmp[y * w + x];
                for (k, a) in ws.iter().enumerate() {
                    out[y * w + lo + k] += a * v;
                }
            }
        }
        out
    }
}

struct Moments {
    mu_a: Vec<f64>,
    mu_b: Vec<f64>,
    e_aa: Vec<f64>,
    e_bb: Vec<f64>,
    e_ab: Vec<f64>,
}

fn moments(f: &Filter, a: &[f64], b: &[f64]) -> Moments {
    let aa: Vec<f64> = a.iter().map(|x| x * x).collect();
    let bb: Vec<f64> = b.iter().map(|x| x * x).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    Moments {
        mu_a: f.apply(a),
        mu_b: f.apply(b),
        e_aa: f.apply(&aa),
        e_bb: f.apply(&bb),
        e_ab: f.apply(&ab),
    }
}

/// Mean local SSIM. Symmetric in its arguments.
pub fn ssim(a: &CostImage, b: &CostImage) -> Result<f64> {
    a.same_shape(b)?;
    let f = Filter::new(a.width, a.height);
    let m = moments(&f, &a.values, &b.values);
    let n = a.values.len() as f64;
    let mut total = 0.0;
    for p in 0..a.values.len() {
        let (ma, mb) = (m.mu_a[p], m.mu_b[p]);
        let var_a = m.e_aa[p] - ma * ma;
        let var_b = m.e_bb[p] - mb * mb;
        let cov = m.e_ab[p] - ma * mb;
        let num = (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2);
        let den = (ma * ma + mb * mb + SSIM_C1) * (var_a + var_b + SSIM_C2);
        total += num / den;
    }
    Ok(total / n)
}

/// SSIM and its gradient with respect to every pixel of `a`.
pub fn ssim_with_grad(a: &CostImage, b: &CostImage) -> Result<(f64, Vec<f64>)> {
    a.same_shape(b)?;
    let f = Filter::new(a.width, a.height);
    let m = moments(&f, &a.values, &b.values);
    let len = a.values.len();
    let n = len as f64;
    let mut total = 0.0;
    let mut d_mu = vec![0.0; len];
    let mut d_eaa = vec![0.0; len];
    let mut d_eab = vec![0.0; len];
    for p in 0..len {
        let (ma, mb) = (m.mu_a[p], m.mu_b[p]);
        let var_a = m.e_aa[p] - ma * ma;
        let var_b = m.e_bb[p] - mb * mb;
        let cov = m.e_ab[p] - ma * mb;
        let a1 = 2.0 * ma * mb + SSIM_C1;
        let a2 = 2.0 * cov + SSIM_C2;
        let b1 = ma * ma + mb * mb + SSIM_C1;
        let b2 = var_a + var_b + SSIM_C2;
        let s = a1 * a2 / (b1 * b2);
        total += s;
        d_mu[p] = (2.0 * mb * a2 - 2.0 * mb * a1) / (b1 * b2) - s * (2.0 * ma / b1 - 2.0 * ma / b2);
        d_eaa[p] = -s / b2;
        d_eab[p] = 2.0 * a1 / (b1 * b2);
    }
    let g_mu = f.apply_transposed(&d_mu);
    let g_eaa = f.apply_transposed(&d_eaa);
    let g_eab = f.apply_transposed(&d_eab);
    let grad = (0..len)
        .map(|q| (g_mu[q] + 2.0 * a.values[q] * g_eaa[q] + b.values[q] * g_eab[q]) / n)
        .collect();
    Ok((total / n, grad))
}
