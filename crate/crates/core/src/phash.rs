//! 64-bit DCT perceptual hash.
//!
//! Recipe: box-resample to 32x32, 2-D type-II DCT, keep the 8x8
//! lowest-frequency block, drop the DC coefficient, and set each bit by a
//! strict comparison against the median of the 63 AC coefficients. The DC
//! slot (bit 0) is always 0, which makes the hash invariant to positive
//! gain and constant intensity offsets.

use crate::error::{CoreError, Result};

const RESAMPLE: usize = 32;
const BLOCK: usize = 8;

/// 64-bit perceptual fingerprint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PHash64 {
    pub bits: u64,
}

impl PHash64 {
    pub fn to_hex(self) -> String {
        format!("{:016x}", self.bits)
    }
}

/// Grayscale image as a row-major intensity matrix.
#[derive(Debug, Clone)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(CoreError::Invalid(format!(
                "pixel count {} != {width}x{height}",
                pixels.len()
            )));
        }
        Ok(GrayImage { width, height, pixels })
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }
}

/// Computes the 64-bit DCT hash of a grayscale image (at least 8x8).
pub fn phash_compute(image: &GrayImage) -> Result<PHash64> {
    if image.width < BLOCK || image.height < BLOCK {
        return Err(CoreError::Invalid(format!(
            "image {}x{} smaller than 8x8",
            image.width, image.height
        )));
    }
    if image.pixels.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(CoreError::Invalid("intensities must be finite and nonnegative".into()));
    }
    let small = box_resample(image, RESAMPLE, RESAMPLE);
    let coeffs = dct2d(&small, RESAMPLE);

    // 8x8 low-frequency block, row-major; index 0 is DC.
    let mut block = [0.0f64; BLOCK * BLOCK];
    for v in 0..BLOCK {
        for u in 0..BLOCK {
            block[v * BLOCK + u] = coeffs[v * RESAMPLE + u];
        }
    }
    let mut ac: Vec<f64> = block[1..].to_vec();
    ac.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if ac.len() % 2 == 1 {
        ac[ac.len() / 2]
    } else {
        (ac[ac.len() / 2 - 1] + ac[ac.len() / 2]) / 2.0
    };

    // Strict comparison with a scale-relative slack: coefficients equal to
    // the median up to float noise count as not-greater, so a constant image
    // (all AC exactly zero in exact arithmetic) hashes to all-zero bits.
    let scale = image.pixels.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    let eps = 1e-9 * scale.max(f64::MIN_POSITIVE);

    let mut bits = 0u64;
    for (i, c) in block.iter().enumerate().skip(1) {
        if *c > median + eps {
            bits |= 1 << i;
        }
    }
    Ok(PHash64 { bits })
}

/// S_ph = 64 - HammingDist.
pub fn phash_similarity(a: PHash64, b: PHash64) -> u32 {
    64 - (a.bits ^ b.bits).count_ones()
}

pub fn hamming_distance(a: PHash64, b: PHash64) -> u32 {
    (a.bits ^ b.bits).count_ones()
}

/// Area-weighted box filter to `ow` x `oh`. Linear in the input, and exact
/// (average of 2^k integers) when dimensions divide evenly by powers of two.
fn box_resample(image: &GrayImage, ow: usize, oh: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; ow * oh];
    let sx = image.width as f64 / ow as f64;
    let sy = image.height as f64 / oh as f64;
    for oy in 0..oh {
        let y0 = oy as f64 * sy;
        let y1 = (oy + 1) as f64 * sy;
        for ox in 0..ow {
            let x0 = ox as f64 * sx;
            let x1 = (ox + 1) as f64 * sx;
            let mut acc = 0.0;
            let mut area = 0.0;
            let mut y = y0.floor() as usize;
            while (y as f64) < y1 && y < image.height {
                let hy = (y1.min((y + 1) as f64) - y0.max(y as f64)).max(0.0);
                let mut x = x0.floor() as usize;
                while (x as f64) < x1 && x < image.width {
                    let wx = (x1.min((x + 1) as f64) - x0.max(x as f64)).max(0.0);
                    acc += image.at(x, y) * wx * hy;
                    area += wx * hy;
                    x += 1;
                }
                y += 1;
            }
            out[oy * ow + ox] = acc / area;
        }
    }
    out
}

/// 2-D type-II DCT (orthonormal scaling is irrelevant here; bits compare
/// coefficients against their own median).
fn dct2d(input: &[f64], n: usize) -> Vec<f64> {
    // separable: rows then columns, with a precomputed cosine table
    let mut table = vec![0.0f64; n * n];
    for k in 0..n {
        for i in 0..n {
            table[k * n + i] =
                (std::f64::consts::PI / n as f64 * (i as f64 + 0.5) * k as f64).cos();
        }
    }
    let mut rows = vec![0.0f64; n * n];
    for y in 0..n {
        for k in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += input[y * n + i] * table[k * n + i];
            }
            rows[y * n + k] = acc;
        }
    }
    let mut out = vec![0.0f64; n * n];
    for x in 0..n {
        for k in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += rows[i * n + x] * table[k * n + i];
            }
            out[k * n + x] = acc;
        }
    }
    out
}

/// Reads a binary PGM (P5, 8-bit) image.
pub fn read_pgm(data: &[u8]) -> Result<GrayImage> {
    let mut pos = 0usize;
    let token = |pos: &mut usize| -> Result<String> {
        // skip whitespace and '#' comments
        loop {
            while *pos < data.len() && data[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < data.len() && data[*pos] == b'#' {
                while *pos < data.len() && data[*pos] != b'\n' {
                    *pos += 1;
                }
            } else {
                break;
            }
        }
        let start = *pos;
        while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(CoreError::Invalid("truncated PGM header".into()));
        }
        Ok(String::from_utf8_lossy(&data[start..*pos]).into_owned())
    };
    if token(&mut pos)? != "P5" {
        return Err(CoreError::Invalid("not a P5 PGM".into()));
    }
    let width: usize = token(&mut pos)?.parse().map_err(|_| CoreError::Invalid("bad width".into()))?;
    let height: usize =
        token(&mut pos)?.parse().map_err(|_| CoreError::Invalid("bad height".into()))?;
    let maxval: usize =
        token(&mut pos)?.parse().map_err(|_| CoreError::Invalid("bad maxval".into()))?;
    if maxval == 0 || maxval > 255 {
        return Err(CoreError::Invalid(format!("unsupported maxval {maxval}")));
    }
    pos += 1; // single whitespace after maxval
    let need = width * height;
    if data.len() < pos + need {
        return Err(CoreError::Invalid("truncated PGM pixel data".into()));
    }
    let pixels: Vec<f64> = data[pos..pos + need].iter().map(|b| *b as f64).collect();
    GrayImage::new(width, height, pixels)
}

/// Writes a binary PGM (P5, 8-bit); intensities are clamped to [0,255].
pub fn write_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(image.pixels.iter().map(|p| p.round().clamp(0.0, 255.0) as u8));
    out
}
