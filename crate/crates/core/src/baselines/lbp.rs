use std::sync::OnceLock;

use super::Gray;
use crate::error::{Error, Result};

pub const LBP_BINS: usize = 59;

/// Neighbor offsets `(dx, dy)`, clockwise from the top-left; neighbor `i`
/// sets bit `i`.
pub const NEIGHBORS: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0)];

/// Circular 0/1 transitions of an 8-bit pattern.
pub fn transitions(code: u8) -> u32 {
    (code ^ code.rotate_right(1)).count_ones()
}

pub fn is_uniform(code: u8) -> bool {
    transitions(code) <= 2
}

/// Bin of every 8-bit code: uniform codes take bins 0..58 in ascending code
/// order, all others share bin 58.
pub fn uniform_lookup() -> &'static [u8; 256] {
    static TABLE: OnceLock<[u8; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [0u8; 256];
        let mut next = 0u8;
        for code in 0..=255u8 {
            table[code as usize] = if is_uniform(code) {
                next += 1;
                next - 1
            } else {
                (LBP_BINS - 1) as u8
            };
        }
        table
    })
}

/// LBP code of every interior pixel, row-major over the `(w-2)×(h-2)` interior.
pub fn lbp_codes(img: &Gray) -> Result<Vec<u8>> {
    let (w, h) = (img.width, img.height);
    if w < 3 || h < 3 {
        return Err(Error::InvalidArgument(format!("LBP needs at least 3x3 pixels, got {w}x{h}")));
    }
    let mut out = Vec::with_capacity((w - 2) * (h - 2));
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let c = img.get(x, y);
            let mut code = 0u8;
            for (i, (dx, dy)) in NEIGHBORS.iter().enumerate() {
                let n = img.get((x as isize + dx) as usize, (y as isize + dy) as usize);
                if n >= c {
                    code |= 1 << i;
                }
            }
            out.push(code);
        }
    }
    Ok(out)
}

/// Normalized 59-bin uniform LBP histogram (radius 1, 8 neighbors).
pub fn uniform_lbp_histogram(img: &Gray) -> Result<Vec<f64>> {
    let codes = lbp_codes(img)?;
    let table = uniform_lookup();
    let mut counts = [0usize; LBP_BINS];
    for c in &codes {
        counts[table[*c as usize] as usize] += 1;
    }
    let n = codes.len() as f64;
    Ok(counts.iter().map(|&c| c as f64 / n).collect())
}
