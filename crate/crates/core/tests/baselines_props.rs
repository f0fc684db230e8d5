use pixbis_core::baselines::iqm::{iqm_features, BLUR_SIGMA, PSNR_CAP};
use pixbis_core::baselines::lbp::{is_uniform, lbp_codes, uniform_lbp_histogram, uniform_lookup, LBP_BINS};
use pixbis_core::baselines::{linear_train, to_grayscale, Gray, LinearConfig};
use pixbis_core::data::{Image, Label};
use proptest::prelude::*;

/// Bit-by-bit circular transition count.
fn oracle_transitions(code: u8) -> u32 {
    (0..8).filter(|&i| (code >> i) & 1 != (code >> ((i + 1) % 8)) & 1).count() as u32
}

#[test]
fn uniform_patterns_match_transition_oracle() {
    let mut uniform = 0;
    for code in 0..=255u8 {
        let expected = oracle_transitions(code) <= 2;
        assert_eq!(is_uniform(code), expected, "code {code:08b}");
        uniform += usize::from(expected);
    }
    assert_eq!(uniform, 58);

    let table = uniform_lookup();
    let mut seen = vec![false; LBP_BINS - 1];
    for code in 0..=255u8 {
        let bin = table[code as usize] as usize;
        if oracle_transitions(code) <= 2 {
            assert!(!seen[bin], "bin {bin} shared");
            seen[bin] = true;
        } else {
            assert_eq!(bin, LBP_BINS - 1);
        }
    }
    assert!(seen.iter().all(|&s| s));
}

/// Neighbor ring walked by angle, starting at the top-left corner and turning
/// clockwise in image coordinates (y down).
fn oracle_code(img: &Gray, x: usize, y: usize) -> u8 {
    let ring = [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2), (1, 2), (0, 2), (0, 1)];
    let c = img.data[y * img.width + x];
    let mut code = 0u8;
    for (bit, (ox, oy)) in ring.iter().enumerate() {
        let v = img.data[(y + oy - 1) * img.width + (x + ox - 1)];
        if v >= c {
            code += 1 << bit;
        }
    }
    code
}

/// Images on a 1/256 grid so that adding a 1/256 multiple is exact.
fn dyadic_image() -> impl Strategy<Value = (usize, usize, Vec<u8>)> {
    (3usize..=16, 3usize..=16).prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(0u8..=127, w * h)))
}

fn gray(w: usize, h: usize, levels: &[u8], shift: u8) -> Gray {
    let data = levels.iter().map(|&v| f64::from(v + shift) / 256.0).collect();
    Gray::new(w, h, data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn lbp_histogram_properties((w, h, levels) in dyadic_image(), shift in 0u8..=128) {
        let img = gray(w, h, &levels, 0);
        let hist = uniform_lbp_histogram(&img).unwrap();
        prop_assert_eq!(hist.len(), LBP_BINS);
        prop_assert!(hist.iter().all(|&v| v >= 0.0 && v.is_finite()));
        prop_assert!((hist.iter().sum::<f64>() - 1.0).abs() <= 1e-9);

        let codes = lbp_codes(&img).unwrap();
        let mut k = 0;
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                prop_assert_eq!(codes[k], oracle_code(&img, x, y));
                k += 1;
            }
        }

        let brighter = gray(w, h, &levels, shift);
        prop_assert_eq!(uniform_lbp_histogram(&brighter).unwrap(), hist);
    }
}

fn oracle_gray(img: &Image) -> Vec<f64> {
    let mut out = Vec::new();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let [r, g, b] = img.rgb(x, y);
            out.push(0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b));
        }
    }
    out
}

fn at(v: &[f64], w: usize, h: usize, x: isize, y: isize) -> f64 {
    let x = x.clamp(0, w as isize - 1) as usize;
    let y = y.clamp(0, h as isize - 1) as usize;
    v[y * w + x]
}

fn oracle_blur(v: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut k = [[0.0; 3]; 3];
    let mut total = 0.0;
    for dy in -1i32..=1 {
        for dx in -1i32..=1 {
            let e = (-f64::from(dx * dx + dy * dy) / (2.0 * BLUR_SIGMA * BLUR_SIGMA)).exp();
            k[(dy + 1) as usize][(dx + 1) as usize] = e;
            total += e;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut s = 0.0;
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    s += k[(dy + 1) as usize][(dx + 1) as usize] / total * at(v, w, h, x + dx, y + dy);
                }
            }
            out[y as usize * w + x as usize] = s;
        }
    }
    out
}

fn oracle_sobel(v: &[f64], w: usize, h: usize) -> Vec<f64> {
    let kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
    let mut out = Vec::new();
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (mut gx, mut gy) = (0.0, 0.0);
            for j in 0..3 {
                for i in 0..3 {
                    let p = at(v, w, h, x + i as isize - 1, y + j as isize - 1);
                    gx += kx[j][i] * p;
                    gy += kx[i][j] * p;
                }
            }
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    out
}

fn small_image() -> impl Strategy<Value = Image> {
    (1usize..=8, 1usize..=8).prop_flat_map(|(w, h)| {
        prop::collection::vec(0.0f32..=1.0, 3 * w * h)
            .prop_map(move |data| Image::from_planar(w, h, data).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn full_reference_measures_match_direct_sums(img in small_image()) {
        let (w, h) = (img.width(), img.height());
        let n = (w * h) as f64;
        let i = oracle_gray(&img);
        let r = oracle_blur(&i, w, h);
        let f = iqm_features(&img);

        let mut sq = 0.0;
        for k in 0..i.len() {
            sq += (i[k] - r[k]) * (i[k] - r[k]);
        }
        let mse = sq / n;
        prop_assert!((f[0] - mse).abs() <= 1e-9, "mse {} vs {}", f[0], mse);

        let psnr = if mse == 0.0 { PSNR_CAP } else { (10.0 * (1.0 / mse).log10()).min(PSNR_CAP) };
        prop_assert!((f[1] - psnr).abs() <= 1e-9 * psnr.abs().max(1.0), "psnr {} vs {}", f[1], psnr);

        let (si, sr) = (oracle_sobel(&i, w, h), oracle_sobel(&r, w, h));
        let ted = si.iter().zip(&sr).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
        prop_assert!((f[9] - ted).abs() <= 1e-9, "edge {} vs {}", f[9], ted);

        prop_assert!(f.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn iqm_of_constant_and_gray_images() {
    let img = Image::from_fn(6, 5, |_, _| [0.4, 0.4, 0.4]);
    let f = iqm_features(&img);
    assert_eq!(f[0], 0.0);
    assert_eq!(f[1], PSNR_CAP);
    assert_eq!(f[7], 1.0);
    assert_eq!(f[10], 0.0);
    let textured = Image::from_fn(7, 7, |x, y| {
        let v = ((x * 3 + y * 5) % 7) as f32 / 7.0;
        [v, v, v]
    });
    assert!(iqm_features(&textured)[17].abs() < 1e-12);
}

#[test]
fn grayscale_weights() {
    let img = Image::from_fn(1, 3, |_, y| match y {
        0 => [1.0, 1.0, 1.0],
        1 => [1.0, 0.0, 0.0],
        _ => [0.25, 0.25, 0.25],
    });
    let g = to_grayscale(&img);
    assert!((g.data[0] - 1.0).abs() < 1e-12);
    assert!((g.data[1] - 0.299).abs() < 1e-12);
    assert!((g.data[2] - 0.25).abs() < 1e-12);
}

/// Standardization uses the training features only, so the fitted model
/// depends on nothing else.
#[test]
fn linear_fit_is_deterministic() {
    let features: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * 7 % 5) as f64]).collect();
    let labels: Vec<Label> = (0..20)
        .map(|i| if i >= 10 { Label::Bonafide } else { Label::Attack })
        .collect();
    let a = linear_train(&features, &labels, LinearConfig::default()).unwrap();
    let b = linear_train(&features, &labels, LinearConfig::default()).unwrap();
    assert_eq!(a, b);
}
