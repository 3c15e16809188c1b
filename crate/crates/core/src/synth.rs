//! Procedural RGB-D test scenes: textured fronto-parallel planes seen by a
//! pinhole camera that translates parallel to them.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Plane, RgbImage};
use crate::intrinsics::Intrinsics;
use crate::io::{write_depth_png, write_intrinsics, write_listing, write_rgb_png, write_tum, DEFAULT_DEPTH_SCALE};
use crate::render::SceneFrame;
use crate::vo::{Pose, Trajectory};

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Value in `[0.05, 0.95)` for texel `(i, j)` of a surface, per channel.
fn texel(seed: u64, surface: u64, i: i64, j: i64, channel: usize) -> f64 {
    let mut h = splitmix(seed ^ surface.wrapping_mul(0xA24B_AED4_963E_E407));
    h = splitmix(h ^ i as u64);
    h = splitmix(h ^ (j as u64).rotate_left(32));
    h = splitmix(h ^ channel as u64);
    0.05 + 0.9 * (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Fronto-parallel plane at depth `z`, optionally limited to a world-space
/// rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TexturedPlane {
    pub depth: f64,
    pub extent: Option<[f64; 4]>,
    /// Texel side in meters.
    pub texel: f64,
}

impl TexturedPlane {
    fn contains(&self, x: f64, y: f64) -> bool {
        self.extent
            .is_none_or(|[x0, x1, y0, y1]| x >= x0 && x <= x1 && y >= y0 && y <= y1)
    }
}

/// Planes sorted near to far; the first hit along a ray is visible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneScene {
    pub planes: Vec<TexturedPlane>,
    pub seed: u64,
}

impl PlaneScene {
    /// One plane filling the view, one texel per pixel at `fx`.
    pub fn single(depth: f64, fx: f64, seed: u64) -> Self {
        PlaneScene {
            planes: vec![TexturedPlane {
                depth,
                extent: None,
                texel: depth / fx,
            }],
            seed,
        }
    }

    /// A near plane covering `x ≤ edge_x, y ≤ edge_y` in front of an
    /// unbounded far plane.
    pub fn two_planes(near: f64, far: f64, edge_x: f64, edge_y: f64, fx: f64, seed: u64) -> Self {
        PlaneScene {
            planes: vec![
                TexturedPlane {
                    depth: near,
                    extent: Some([f64::NEG_INFINITY, edge_x, f64::NEG_INFINITY, edge_y]),
                    texel: near / fx,
                },
                TexturedPlane {
                    depth: far,
                    extent: None,
                    texel: far / fx,
                },
            ],
            seed,
        }
    }

    /// Renders from a camera at `position` with axes aligned to the world.
    /// `supersample` rays per pixel side are box-averaged for color; depth
    /// comes from the center ray.
    pub fn render(
        &self,
        width: usize,
        height: usize,
        k: &Intrinsics,
        position: Vector3<f64>,
        supersample: usize,
    ) -> Result<SceneFrame> {
        if self.planes.is_empty() || supersample == 0 {
            return Err(Error::InvalidArgument("scene needs planes and supersample >= 1".into()));
        }
        let hit = |u: f64, v: f64| -> Option<(usize, f64, f64)> {
            let (dx, dy) = ((u - k.cx) / k.fx, (v - k.cy) / k.fy);
            self.planes.iter().enumerate().find_map(|(i, p)| {
                let z = p.depth - position.z;
                let (x, y) = (position.x + dx * z, position.y + dy * z);
                p.contains(x, y).then_some((i, x, y))
            })
        };
        let n = supersample as f64;
        let mut rgb = RgbImage::new(width, height);
        let mut depth = Plane::new(width, height);
        for py in 0..height {
            for px in 0..width {
                let mut acc = [0.0; 3];
                let mut count = 0.0;
                for sy in 0..supersample {
                    for sx in 0..supersample {
                        let u = px as f64 - 0.5 + (sx as f64 + 0.5) / n;
                        let v = py as f64 - 0.5 + (sy as f64 + 0.5) / n;
                        if let Some((i, x, y)) = hit(u, v) {
                            let t = self.planes[i].texel;
                            let (ti, tj) = ((x / t).floor() as i64, (y / t).floor() as i64);
                            for (c, a) in acc.iter_mut().enumerate() {
                                *a += texel(self.seed, i as u64, ti, tj, c);
                            }
                            count += 1.0;
                        }
                    }
                }
                for (c, a) in acc.iter().enumerate() {
                    rgb.channels[c].set(px, py, if count > 0.0 { a / count } else { 0.0 });
                }
                let d = hit(px as f64, py as f64).map_or(0.0, |(i, _, _)| self.planes[i].depth - position.z);
                depth.set(px, py, d);
            }
        }
        SceneFrame::new(rgb, depth, *k)
    }
}

/// A camera path through a [`PlaneScene`] with ground-truth poses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSequence {
    pub width: usize,
    pub height: usize,
    pub intrinsics: Intrinsics,
    pub scene: PlaneScene,
    pub frames: usize,
    /// Total x travel, meters; y follows a shallow arc so the path is not
    /// collinear.
    pub travel: f64,
    pub arc: f64,
    pub frame_rate: f64,
    pub supersample: usize,
}

impl SynthSequence {
    /// Two-plane scene at `near`/`far` meters with `fx = width · 0.78`.
    pub fn two_plane(width: usize, height: usize, frames: usize, near: f64, far: f64, seed: u64) -> Self {
        let f = width as f64 * 250.0 / 320.0;
        let intrinsics = Intrinsics {
            fx: f,
            fy: f,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
        };
        SynthSequence {
            width,
            height,
            intrinsics,
            scene: PlaneScene::two_planes(near, far, 0.1, 0.25, f, seed),
            frames,
            travel: 0.5,
            arc: 0.03,
            frame_rate: 30.0,
            supersample: 3,
        }
    }

    pub fn position(&self, i: usize) -> Vector3<f64> {
        let s = if self.frames > 1 {
            i as f64 / (self.frames - 1) as f64
        } else {
            0.0
        };
        Vector3::new(self.travel * s, self.arc * (std::f64::consts::PI * s).sin(), 0.0)
    }

    pub fn timestamp(&self, i: usize) -> f64 {
        i as f64 / self.frame_rate
    }

    pub fn frame(&self, i: usize) -> Result<SceneFrame> {
        self.scene
            .render(self.width, self.height, &self.intrinsics, self.position(i), self.supersample)
    }

    pub fn ground_truth(&self) -> Result<Trajectory> {
        let poses = (0..self.frames)
            .map(|i| Pose::new(Matrix3::identity(), self.position(i), self.timestamp(i)))
            .collect::<Result<Vec<_>>>()?;
        Trajectory::new(poses)
    }

    /// Writes a TUM-layout dataset folder: `rgb/`, `depth/`, listings,
    /// `groundtruth.txt` and `intrinsics.txt`.
    pub fn write_dataset(&self, root: &Path) -> Result<()> {
        let frames = crate::par::map_range(self.frames, |i| {
            let f = self.frame(i)?;
            let name = format!("{i:06}.png");
            write_rgb_png(&root.join("rgb").join(&name), &f.rgb)?;
            write_depth_png(&root.join("depth").join(&name), &f.depth, DEFAULT_DEPTH_SCALE)?;
            Ok(name)
        });
        let mut rgb = Vec::with_capacity(self.frames);
        let mut depth = Vec::with_capacity(self.frames);
        for (i, name) in frames.into_iter().enumerate() {
            let name = name?;
            rgb.push((self.timestamp(i), format!("rgb/{name}")));
            depth.push((self.timestamp(i), format!("depth/{name}")));
        }
        write_listing(&root.join("rgb.txt"), &rgb)?;
        write_listing(&root.join("depth.txt"), &depth)?;
        write_tum(&root.join("groundtruth.txt"), &self.ground_truth()?)?;
        write_intrinsics(&root.join("intrinsics.txt"), &self.intrinsics, DEFAULT_DEPTH_SCALE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_plane_is_one_texel_per_pixel() {
        let k = Intrinsics::new(100.0, 100.0, 15.5, 11.5).unwrap();
        let f = PlaneScene::single(2.0, 100.0, 3).render(32, 24, &k, Vector3::zeros(), 1).unwrap();
        assert!(f.depth.data().iter().all(|&d| d == 2.0));
        let g = &f.rgb.channels[1];
        let distinct: std::collections::BTreeSet<u64> = g.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(distinct.len(), 32 * 24);
    }

    #[test]
    fn two_plane_depths_and_anchoring() {
        let seq = SynthSequence::two_plane(64, 48, 5, 1.0, 2.0, 9);
        let a = seq.frame(0).unwrap();
        assert!(a.depth.data().iter().all(|&d| d == 1.0 || d == 2.0));
        assert!(a.depth.data().contains(&1.0) && a.depth.data().contains(&2.0));
        // the near edge sits at x = 0.1 m, right of the optical axis at frame 0
        assert_eq!(a.depth.get(0, 0), 1.0);
        assert_eq!(a.depth.get(63, 0), 2.0);
        let gt = seq.ground_truth().unwrap();
        assert_eq!(gt.len(), 5);
        assert!((gt.poses()[4].translation.x - 0.5).abs() < 1e-15);
    }
}
