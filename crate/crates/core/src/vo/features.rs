//! Preprocessing, pyramid corner detection, oriented binary descriptors and
//! descriptor matching.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::VoConfig;
use crate::error::{Error, Result};
use crate::fft::gaussian_blur;
use crate::grid::Plane;

pub const DESCRIPTOR_BITS: usize = 256;
const WORDS: usize = DESCRIPTOR_BITS / 64;
/// Keypoints keep this distance from the level border.
const BORDER: usize = 16;
const ORIENTATION_RADIUS: isize = 15;
const PATTERN_RADIUS: f64 = 13.0;
const PATTERN_SIGMA: f64 = 31.0 / 5.0;
const DESCRIPTOR_SMOOTHING: f64 = 2.0;
const HARRIS_K: f64 = 0.04;
const HARRIS_WINDOW: f64 = 1.5;
const NMS_RADIUS: isize = 2;

pub type Descriptor = [u64; WORDS];

#[derive(Clone, Debug, PartialEq)]
pub struct Keypoint {
    /// Level-0 pixel coordinates (pixel centers at integers).
    pub x: f64,
    pub y: f64,
    pub pyramid_level: usize,
    pub score: f64,
    /// Intensity-centroid orientation, radians.
    pub angle: f64,
    pub descriptor: Descriptor,
}

/// `clamp(in + amount·(in − blur(in, radius)), 0, 1)`.
pub fn unsharp_mask(image: &Plane, amount: f64, radius: f64) -> Result<Plane> {
    if !(amount >= 0.0) || !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "unsharp mask needs amount >= 0 and radius > 0, got {amount}, {radius}"
        )));
    }
    if amount == 0.0 {
        return Ok(image.clone());
    }
    let blurred = gaussian_blur(image, radius);
    Ok(image.zip_map(&blurred, |i, b| (i + amount * (i - b)).clamp(0.0, 1.0)))
}

/// Fixed point-pair sampling pattern, a function of the seed only.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingPattern {
    pairs: Vec<[(f64, f64); 2]>,
}

impl SamplingPattern {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0F_B1A5);
        let normal = Normal::new(0.0, PATTERN_SIGMA).expect("sigma");
        let point = |rng: &mut ChaCha8Rng| loop {
            let (x, y): (f64, f64) = (normal.sample(rng), normal.sample(rng));
            if x.hypot(y) <= PATTERN_RADIUS {
                return (x, y);
            }
        };
        let pairs = (0..DESCRIPTOR_BITS)
            .map(|_| {
                let a = point(&mut rng);
                let mut b = point(&mut rng);
                while b == a {
                    b = (b.0 + rng.random_range(-1.0..1.0), b.1);
                }
                [a, b]
            })
            .collect();
        SamplingPattern { pairs }
    }
}

struct Level {
    image: Plane,
    smooth: Plane,
    scale: f64,
}

fn build_pyramid(image: &Plane, config: &VoConfig) -> Vec<Level> {
    let (w, h) = image.dims();
    let mut levels = Vec::new();
    for l in 0..config.pyramid_levels {
        let scale = config.scale_factor.powi(l as i32);
        let lw = (w as f64 / scale).round() as usize;
        let lh = (h as f64 / scale).round() as usize;
        if lw < 2 * BORDER + 1 || lh < 2 * BORDER + 1 {
            break;
        }
        let img = if l == 0 {
            image.clone()
        } else {
            let sigma = 0.6 * (scale * scale - 1.0).sqrt();
            let src = gaussian_blur(image, sigma);
            Plane::from_fn(lw, lh, |x, y| {
                src.sample_bilinear((x as f64 + 0.5) * scale - 0.5, (y as f64 + 0.5) * scale - 0.5)
            })
        };
        let smooth = gaussian_blur(&img, DESCRIPTOR_SMOOTHING);
        levels.push(Level {
            image: img,
            smooth,
            scale,
        });
    }
    levels
}

fn harris(image: &Plane) -> Plane {
    let (w, h) = image.dims();
    let grad = |x: usize, y: usize| {
        let g = |dx: isize, dy: isize| image.get_clamped(x as isize + dx, y as isize + dy);
        let gx = (g(1, -1) + 2.0 * g(1, 0) + g(1, 1) - g(-1, -1) - 2.0 * g(-1, 0) - g(-1, 1)) / 8.0;
        let gy = (g(-1, 1) + 2.0 * g(0, 1) + g(1, 1) - g(-1, -1) - 2.0 * g(0, -1) - g(1, -1)) / 8.0;
        (gx, gy)
    };
    let mut ixx = Plane::new(w, h);
    let mut iyy = Plane::new(w, h);
    let mut ixy = Plane::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let (gx, gy) = grad(x, y);
            ixx.set(x, y, gx * gx);
            iyy.set(x, y, gy * gy);
            ixy.set(x, y, gx * gy);
        }
    }
    let (a, b, c) = (
        gaussian_blur(&ixx, HARRIS_WINDOW),
        gaussian_blur(&iyy, HARRIS_WINDOW),
        gaussian_blur(&ixy, HARRIS_WINDOW),
    );
    Plane::from_fn(w, h, |x, y| {
        let (a, b, c) = (a.get(x, y), b.get(x, y), c.get(x, y));
        a * b - c * c - HARRIS_K * (a + b) * (a + b)
    })
}

/// Offset of the vertex of the parabola through three samples.
fn parabola_peak(l: f64, c: f64, r: f64) -> f64 {
    let den = l - 2.0 * c + r;
    if den.abs() < 1e-300 {
        0.0
    } else {
        (0.5 * (l - r) / den).clamp(-0.5, 0.5)
    }
}

struct Candidate {
    x: f64,
    y: f64,
    ix: usize,
    iy: usize,
    score: f64,
}

fn corners(response: &Plane, threshold_rel: f64) -> Vec<Candidate> {
    let (w, h) = response.dims();
    let max = response.data().iter().cloned().fold(0.0, f64::max);
    let threshold = (threshold_rel * max).max(1e-12);
    let mut out = Vec::new();
    for y in BORDER..h - BORDER {
        'px: for x in BORDER..w - BORDER {
            let v = response.get(x, y);
            if v <= threshold {
                continue;
            }
            for dy in -NMS_RADIUS..=NMS_RADIUS {
                for dx in -NMS_RADIUS..=NMS_RADIUS {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let n = response.get((x as isize + dx) as usize, (y as isize + dy) as usize);
                    // ties go to the first pixel in raster order
                    let earlier = dy < 0 || (dy == 0 && dx < 0);
                    if n > v || (n == v && earlier) {
                        continue 'px;
                    }
                }
            }
            let ox = parabola_peak(response.get(x - 1, y), v, response.get(x + 1, y));
            let oy = parabola_peak(response.get(x, y - 1), v, response.get(x, y + 1));
            out.push(Candidate {
                x: x as f64 + ox,
                y: y as f64 + oy,
                ix: x,
                iy: y,
                score: v,
            });
        }
    }
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.iy.cmp(&b.iy)).then(a.ix.cmp(&b.ix)));
    out
}

fn orientation(image: &Plane, x: usize, y: usize) -> f64 {
    let (mut m10, mut m01) = (0.0, 0.0);
    let r = ORIENTATION_RADIUS;
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy > r * r {
                continue;
            }
            let v = image.get_clamped(x as isize + dx, y as isize + dy);
            m10 += dx as f64 * v;
            m01 += dy as f64 * v;
        }
    }
    m01.atan2(m10)
}

fn describe(smooth: &Plane, x: f64, y: f64, angle: f64, pattern: &SamplingPattern) -> Descriptor {
    let (s, c) = angle.sin_cos();
    let sample = |(px, py): (f64, f64)| smooth.sample_bilinear(x + c * px - s * py, y + s * px + c * py);
    let mut d = [0u64; WORDS];
    for (i, [a, b]) in pattern.pairs.iter().enumerate() {
        if sample(*a) < sample(*b) {
            d[i / 64] |= 1 << (i % 64);
        }
    }
    d
}

/// Features per level, geometric in the level area, summing to `total`.
fn level_budget(total: usize, levels: usize, scale: f64) -> Vec<usize> {
    let f = 1.0 / (scale * scale);
    let weights: Vec<f64> = (0..levels).map(|l| f.powi(l as i32)).collect();
    let sum: f64 = weights.iter().sum();
    let mut budget: Vec<usize> = weights
        .iter()
        .map(|w| (total as f64 * w / sum).floor() as usize)
        .collect();
    let used: usize = budget.iter().sum();
    if let Some(first) = budget.first_mut() {
        *first += total - used;
    }
    budget
}

/// Corner keypoints over the pyramid with oriented descriptors.
pub fn detect_features(image: &Plane, config: &VoConfig) -> Vec<Keypoint> {
    let pattern = SamplingPattern::new(config.seed);
    detect_with_pattern(image, config, &pattern)
}

pub fn detect_with_pattern(image: &Plane, config: &VoConfig, pattern: &SamplingPattern) -> Vec<Keypoint> {
    let levels = build_pyramid(image, config);
    if levels.is_empty() {
        return Vec::new();
    }
    let budget = level_budget(config.max_features, levels.len(), config.scale_factor);
    let per_level = crate::par::map_range(levels.len(), |l| {
        let level = &levels[l];
        let response = harris(&level.image);
        corners(&response, config.corner_threshold)
            .into_iter()
            .take(budget[l])
            .map(|c| {
                let angle = orientation(&level.image, c.ix, c.iy);
                Keypoint {
                    x: (c.x + 0.5) * level.scale - 0.5,
                    y: (c.y + 0.5) * level.scale - 0.5,
                    pyramid_level: l,
                    score: c.score,
                    angle,
                    descriptor: describe(&level.smooth, c.x, c.y, angle, pattern),
                }
            })
            .collect::<Vec<_>>()
    });
    per_level.into_iter().flatten().collect()
}

pub fn hamming(a: &Descriptor, b: &Descriptor) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// Nearest and second-nearest distances from `d` into `set`.
fn nearest(d: &Descriptor, set: &[Keypoint]) -> Option<(usize, u32, u32)> {
    let mut best = None;
    let mut second = u32::MAX;
    for (j, k) in set.iter().enumerate() {
        let dist = hamming(d, &k.descriptor);
        match best {
            None => best = Some((j, dist)),
            Some((_, bd)) if dist < bd => {
                second = bd;
                best = Some((j, dist));
            }
            _ => second = second.min(dist),
        }
    }
    best.map(|(j, d)| (j, d, second))
}

/// Mutual nearest neighbours under Hamming distance that pass the ratio test
/// and the distance cap, ordered by index into `a`.
pub fn match_features(a: &[Keypoint], b: &[Keypoint], ratio: f64, max_distance: u32) -> Vec<(usize, usize)> {
    let forward = crate::par::map_slice(a, |k| nearest(&k.descriptor, b));
    let backward = crate::par::map_slice(b, |k| nearest(&k.descriptor, a).map(|n| n.0));
    let mut out = Vec::new();
    for (i, f) in forward.iter().enumerate() {
        let Some((j, best, second)) = *f else { continue };
        if best > max_distance || backward[j] != Some(i) {
            continue;
        }
        if second != u32::MAX && best as f64 >= ratio * second as f64 {
            continue;
        }
        out.push((i, j));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkerboard(w: usize, h: usize, cell: usize) -> Plane {
        Plane::from_fn(w, h, |x, y| if (x / cell + y / cell) % 2 == 0 { 0.8 } else { 0.2 })
    }

    #[test]
    fn unsharp_identity_cases() {
        let img = checkerboard(20, 20, 5);
        assert_eq!(unsharp_mask(&img, 0.0, 2.0).unwrap(), img);
        let flat = Plane::filled(10, 10, 0.4);
        let out = unsharp_mask(&flat, 3.0, 2.0).unwrap();
        assert!(out.max_abs_diff_interior(&flat, 0) < 1e-12);
        assert!(unsharp_mask(&img, -1.0, 2.0).is_err());
    }

    #[test]
    fn unsharp_steepens_step() {
        let step = Plane::from_fn(40, 1, |x, _| if x < 20 { 0.3 } else { 0.7 });
        let soft = gaussian_blur(&step, 1.0);
        let sharp = unsharp_mask(&soft, 1.0, 2.0).unwrap();
        let g0 = soft.get(20, 0) - soft.get(19, 0);
        let g1 = sharp.get(20, 0) - sharp.get(19, 0);
        assert!(g1 > g0);
    }

    #[test]
    fn constant_image_has_no_features() {
        let img = Plane::filled(120, 100, 0.5);
        assert!(detect_features(&img, &VoConfig::default()).is_empty());
    }

    #[test]
    fn checkerboard_corners() {
        let cell = 16;
        let img = checkerboard(160, 128, cell);
        let kps = detect_features(&img, &VoConfig::default());
        assert!(!kps.is_empty());
        for k in &kps {
            // corners sit between pixels, at multiples of the cell minus one half
            let cx = ((k.x + 0.5) / cell as f64).round() * cell as f64 - 0.5;
            let cy = ((k.y + 0.5) / cell as f64).round() * cell as f64 - 0.5;
            assert!((k.x - cx).hypot(k.y - cy) <= 1.5, "{} {} level {}", k.x, k.y, k.pyramid_level);
        }
        assert_eq!(kps, detect_features(&img, &VoConfig::default()));
    }

    #[test]
    fn budget_sums() {
        let b = level_budget(1000, 4, 1.2);
        assert_eq!(b.iter().sum::<usize>(), 1000);
        assert!(b.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn disjoint_sets_do_not_match() {
        let mk = |bits: u64| Keypoint {
            x: 0.0,
            y: 0.0,
            pyramid_level: 0,
            score: 1.0,
            angle: 0.0,
            descriptor: [bits; 4],
        };
        let a = vec![mk(0), mk(0x0F0F)];
        let b = vec![mk(u64::MAX), mk(!0x0F0Fu64)];
        assert!(match_features(&a, &b, 0.8, 64).is_empty());
        let m = match_features(&a, &a, 0.8, 64);
        assert_eq!(m, vec![(0, 0), (1, 1)]);
    }
}
