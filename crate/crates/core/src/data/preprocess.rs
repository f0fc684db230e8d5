use super::image::Image;
use super::manifest::Sample;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Smallest accepted input extent.
pub const MIN_EXTENT: usize = 8;

/// Center-crops `image` to its largest centered square and resizes it
/// bilinearly (half-pixel centers, replicated borders) to `height`×`width`.
/// Returns a `[3, height, width]` tensor with values in [0, 1].
pub fn preprocess(image: &Image, height: usize, width: usize) -> Result<Tensor<f32>> {
    let out = resize_square(image, height, width)?;
    Ok(out.to_tensor())
}

/// Image-valued form of [`preprocess`].
pub fn resize_square(image: &Image, height: usize, width: usize) -> Result<Image> {
    let (w, h) = (image.width(), image.height());
    if w < MIN_EXTENT || h < MIN_EXTENT {
        return Err(Error::InvalidArgument(format!(
            "image {w}x{h} is smaller than {MIN_EXTENT}x{MIN_EXTENT}"
        )));
    }
    if height == 0 || width == 0 {
        return Err(Error::InvalidArgument("target size must be positive".into()));
    }
    let side = w.min(h);
    let (x0, y0) = ((w - side) / 2, (h - side) / 2);
    let sy = side as f64 / height as f64;
    let sx = side as f64 / width as f64;

    let axis = |i: usize, scale: f64| -> (usize, usize, f32) {
        let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (side - 1) as f64);
        let lo = s.floor() as usize;
        let hi = (lo + 1).min(side - 1);
        (lo, hi, (s - lo as f64) as f32)
    };
    let xs: Vec<_> = (0..width).map(|i| axis(i, sx)).collect();
    let ys: Vec<_> = (0..height).map(|i| axis(i, sy)).collect();

    let mut out = Image::new(width, height);
    for c in 0..3 {
        let src = image.plane(c);
        let at = |x: usize, y: usize| src[(y0 + y) * w + x0 + x];
        let dst = out.plane_mut(c);
        for (oy, &(y_lo, y_hi, fy)) in ys.iter().enumerate() {
            for (ox, &(x_lo, x_hi, fx)) in xs.iter().enumerate() {
                let top = at(x_lo, y_lo) + fx * (at(x_hi, y_lo) - at(x_lo, y_lo));
                let bottom = at(x_lo, y_hi) + fx * (at(x_hi, y_hi) - at(x_lo, y_hi));
                dst[oy * width + ox] = (top + fy * (bottom - top)).clamp(0.0, 1.0);
            }
        }
    }
    Ok(out)
}

/// Indices of `n` frames spread uniformly over `total`: `round(i(T-1)/(n-1))`
/// with halves rounded up. When `total < n` every frame is returned.
pub fn select_frame_indices(total: usize, n: usize) -> Vec<usize> {
    if total == 0 || n == 0 {
        return Vec::new();
    }
    if total <= n {
        return (0..total).collect();
    }
    if n == 1 {
        return vec![0];
    }
    let b = n - 1;
    (0..n).map(|i| (2 * i * (total - 1) + b) / (2 * b)).collect()
}

/// Picks frames from a video with [`select_frame_indices`].
pub fn select_frames<F: Clone>(frames: &[F], n: usize) -> Vec<F> {
    select_frame_indices(frames.len(), n)
        .into_iter()
        .map(|i| frames[i].clone())
        .collect()
}

/// Keeps `n` uniformly spaced frames of every video. Videos stay in order of
/// first appearance; frames within a video are ordered by frame index.
pub fn select_video_frames(samples: &[Sample], n: usize) -> Vec<Sample> {
    let mut order: Vec<&str> = Vec::new();
    let mut videos: std::collections::HashMap<&str, Vec<&Sample>> = Default::default();
    for s in samples {
        let e = videos.entry(s.video_id.as_str()).or_default();
        if e.is_empty() {
            order.push(&s.video_id);
        }
        e.push(s);
    }
    let mut out = Vec::new();
    for id in order {
        let mut frames = videos.remove(id).unwrap_or_default();
        frames.sort_by_key(|s| s.frame_index);
        out.extend(select_frames(&frames, n).into_iter().cloned());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_resize() {
        let img = Image::from_fn(16, 16, |x, y| [x as f32 / 15.0, y as f32 / 15.0, 0.3]);
        let out = resize_square(&img, 16, 16).unwrap();
        for (a, b) in img.data().iter().zip(out.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_stays_constant() {
        let img = Image::from_fn(37, 23, |_, _| [0.25, 0.5, 0.75]);
        let t = preprocess(&img, 10, 10).unwrap();
        assert_eq!(t.shape(), &[3, 10, 10]);
        assert!(t.data()[..100].iter().all(|v| (v - 0.25).abs() < 1e-6));
        assert!(t.data()[200..].iter().all(|v| (v - 0.75).abs() < 1e-6));
    }

    #[test]
    fn checkerboard_downsample_keeps_mean() {
        let img = Image::from_fn(32, 32, |x, y| {
            let v = ((x + y) % 2) as f32;
            [v, v, v]
        });
        let out = resize_square(&img, 16, 16).unwrap();
        let mean: f32 = out.plane(0).iter().sum::<f32>() / 256.0;
        assert!((mean - 0.5).abs() < 1e-3);
    }

    #[test]
    fn crops_center_square() {
        // left and right thirds differ from the middle; only the middle survives
        let img = Image::from_fn(30, 10, |x, _| if (10..20).contains(&x) { [1.0; 3] } else { [0.0; 3] });
        let out = resize_square(&img, 10, 10).unwrap();
        assert!(out.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn rejects_tiny() {
        assert!(preprocess(&Image::new(7, 20), 8, 8).is_err());
    }

    #[test]
    fn frame_selection() {
        assert_eq!(select_frame_indices(20, 20), (0..20).collect::<Vec<_>>());
        assert_eq!(select_frame_indices(5, 20), vec![0, 1, 2, 3, 4]);
        let idx = select_frame_indices(40, 20);
        let oracle: Vec<usize> = (0..20).map(|i| ((39 * i) as f64 / 19.0).round() as usize).collect();
        assert_eq!(idx, oracle);
        assert_eq!(idx[0], 0);
        assert_eq!(idx[19], 39);
        assert_eq!(select_frames(&["a", "b", "c"], 1), vec!["a"]);
    }
}
