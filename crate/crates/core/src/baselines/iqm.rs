//! Reduced image-quality feature set. Full-reference measures compare the
//! gray image with a blurred copy of itself; the rest are no-reference
//! statistics.

use std::f64::consts::PI;

use super::{to_grayscale, Gray};
use crate::data::Image;

pub const IQM_DIM: usize = 18;

pub const IQM_NAMES: [&str; IQM_DIM] = [
    "mse",
    "psnr",
    "snr",
    "max_diff",
    "avg_diff",
    "nae",
    "structural_content",
    "ncc",
    "mean_angle_similarity",
    "total_edge_diff",
    "laplacian_var",
    "mean_r",
    "mean_g",
    "mean_b",
    "std_r",
    "std_g",
    "std_b",
    "colorfulness",
];

/// Value used for PSNR and SNR when the two images are identical.
pub const PSNR_CAP: f64 = 100.0;

pub const BLUR_SIGMA: f64 = 1.17;

fn blur_weights() -> [[f64; 3]; 3] {
    let mut w = [[0.0; 3]; 3];
    let mut total = 0.0;
    for (dy, row) in w.iter_mut().enumerate() {
        for (dx, v) in row.iter_mut().enumerate() {
            let d2 = ((dx as f64 - 1.0).powi(2) + (dy as f64 - 1.0).powi(2)) as f64;
            *v = (-d2 / (2.0 * BLUR_SIGMA * BLUR_SIGMA)).exp();
            total += *v;
        }
    }
    w.iter_mut().flatten().for_each(|v| *v /= total);
    w
}

/// 3×3 Gaussian blur with replicated borders, written as
/// `I + Σ w (I_k − I)` so constant regions stay bit-exact.
pub fn blur3(img: &Gray) -> Gray {
    let w = blur_weights();
    let mut out = img.clone();
    for y in 0..img.height {
        for x in 0..img.width {
            let c = img.get(x, y);
            let mut acc = 0.0;
            for (dy, row) in w.iter().enumerate() {
                for (dx, wk) in row.iter().enumerate() {
                    acc += wk * (img.clamped(x as isize + dx as isize - 1, y as isize + dy as isize - 1) - c);
                }
            }
            out.data[y * img.width + x] = c + acc;
        }
    }
    out
}

/// Sobel gradient magnitude with replicated borders.
pub fn sobel_magnitude(img: &Gray) -> Vec<f64> {
    let mut out = Vec::with_capacity(img.data.len());
    for y in 0..img.height as isize {
        for x in 0..img.width as isize {
            let p = |dx: isize, dy: isize| img.clamped(x + dx, y + dy);
            let gx = p(1, -1) + 2.0 * p(1, 0) + p(1, 1) - p(-1, -1) - 2.0 * p(-1, 0) - p(-1, 1);
            let gy = p(-1, 1) + 2.0 * p(0, 1) + p(1, 1) - p(-1, -1) - 2.0 * p(0, -1) - p(1, -1);
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    out
}

/// Variance of the 4-neighbor Laplacian over interior pixels.
pub fn laplacian_variance(img: &Gray) -> f64 {
    if img.width < 3 || img.height < 3 {
        return 0.0;
    }
    let mut vals = Vec::new();
    for y in 1..img.height - 1 {
        for x in 1..img.width - 1 {
            let l = img.get(x - 1, y) + img.get(x + 1, y) + img.get(x, y - 1) + img.get(x, y + 1) - 4.0 * img.get(x, y);
            vals.push(l);
        }
    }
    mean_std(&vals).1.powi(2)
}

/// Population mean and standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, var.sqrt())
}

fn capped_db(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        return PSNR_CAP;
    }
    (10.0 * (num / den).log10()).min(PSNR_CAP)
}

pub fn mse(a: &Gray, b: &Gray) -> f64 {
    a.data.iter().zip(&b.data).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.data.len() as f64
}

/// Peak signal 1.0; identical images give [`PSNR_CAP`].
pub fn psnr(a: &Gray, b: &Gray) -> f64 {
    capped_db(1.0, mse(a, b))
}

pub fn iqm_features(image: &Image) -> Vec<f64> {
    let gray = to_grayscale(image);
    let blurred = blur3(&gray);
    let (i, r) = (&gray.data, &blurred.data);
    let n = i.len() as f64;

    let sum_sq: f64 = i.iter().map(|x| x * x).sum();
    let diff_sq: f64 = i.iter().zip(r).map(|(x, y)| (x - y).powi(2)).sum();
    let abs_diff: f64 = i.iter().zip(r).map(|(x, y)| (x - y).abs()).sum();
    let abs_sum: f64 = i.iter().map(|x| x.abs()).sum();
    let ref_sq: f64 = r.iter().map(|x| x * x).sum();
    let cross: f64 = i.iter().zip(r).map(|(x, y)| x * y).sum();

    let mse = diff_sq / n;
    let psnr = capped_db(1.0, mse);
    let snr = if sum_sq == 0.0 { PSNR_CAP } else { capped_db(sum_sq, diff_sq) };
    let max_diff = i.iter().zip(r).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let avg_diff = i.iter().zip(r).map(|(x, y)| x - y).sum::<f64>() / n;
    let nae = if abs_sum == 0.0 { 0.0 } else { abs_diff / abs_sum };
    let sc = if ref_sq == 0.0 { 1.0 } else { sum_sq / ref_sq };
    let ncc = if sum_sq == 0.0 { 1.0 } else { cross / sum_sq };

    let channels: Vec<Gray> = (0..3)
        .map(|c| Gray::from_plane(image.width(), image.height(), image.plane(c)))
        .collect();
    let blurred_channels: Vec<Gray> = channels.iter().map(blur3).collect();
    let mut angle = 0.0;
    for k in 0..i.len() {
        let a = [channels[0].data[k], channels[1].data[k], channels[2].data[k]];
        let b = [blurred_channels[0].data[k], blurred_channels[1].data[k], blurred_channels[2].data[k]];
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na > 0.0 && nb > 0.0 {
            angle += (dot / (na * nb)).clamp(-1.0, 1.0).acos();
        }
    }
    let mas = 1.0 - 2.0 / PI * angle / n;

    let ted = sobel_magnitude(&gray)
        .iter()
        .zip(sobel_magnitude(&blurred))
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n;
    let lap = laplacian_variance(&gray);

    let stats: Vec<(f64, f64)> = channels.iter().map(|c| mean_std(&c.data)).collect();
    let rg: Vec<f64> = (0..i.len()).map(|k| channels[0].data[k] - channels[1].data[k]).collect();
    let yb: Vec<f64> = (0..i.len())
        .map(|k| 0.5 * (channels[0].data[k] + channels[1].data[k]) - channels[2].data[k])
        .collect();
    let (m_rg, s_rg) = mean_std(&rg);
    let (m_yb, s_yb) = mean_std(&yb);
    let colorfulness = (s_rg * s_rg + s_yb * s_yb).sqrt() + 0.3 * (m_rg * m_rg + m_yb * m_yb).sqrt();

    vec![
        mse,
        psnr,
        snr,
        max_diff,
        avg_diff,
        nae,
        sc,
        ncc,
        mas,
        ted,
        lap,
        stats[0].0,
        stats[1].0,
        stats[2].0,
        stats[0].1,
        stats[1].1,
        stats[2].1,
        colorfulness,
    ]
}
