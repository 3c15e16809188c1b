use rustfft::num_complex::Complex64;

use super::bins::DepthBins;
use crate::error::{Error, Result};
use crate::fft::{convolve_direct, PaddedFft, FFT_KERNEL_THRESHOLD};
use crate::grid::{Plane, RgbImage};
use crate::intrinsics::Intrinsics;
use crate::optics::PsfBank;

/// Coverage below this leaves the layer undefined at a pixel.
pub const COVERAGE_THRESHOLD: f64 = 1e-3;
pub const COVERAGE_EPS: f64 = 1e-6;

/// All-in-focus linear RGB plus metric z-depth (0 or NaN = invalid).
#[derive(Clone, Debug, PartialEq)]
pub struct SceneFrame {
    pub rgb: RgbImage,
    pub depth: Plane,
    pub intrinsics: Intrinsics,
}

impl SceneFrame {
    pub fn new(rgb: RgbImage, depth: Plane, intrinsics: Intrinsics) -> Result<Self> {
        if rgb.dims() != depth.dims() {
            return Err(Error::InvalidArgument(format!(
                "rgb is {:?} but depth is {:?}",
                rgb.dims(),
                depth.dims()
            )));
        }
        if !rgb.is_finite() {
            return Err(Error::InvalidArgument("rgb contains non-finite values".into()));
        }
        Ok(SceneFrame {
            rgb,
            depth,
            intrinsics,
        })
    }
}

pub fn is_valid_depth(d: f64) -> bool {
    d.is_finite() && d > 0.0
}

/// Per-pixel bin assignment. Bin indices follow [`DepthBins`] order (0 is the
/// nearest layer).
#[derive(Clone, Debug, PartialEq)]
pub struct LayerDecomposition {
    width: usize,
    height: usize,
    layer_index: Vec<usize>,
    invalid: Vec<bool>,
    centers: Vec<f64>,
}

impl LayerDecomposition {
    pub fn from_indices(
        width: usize,
        height: usize,
        layer_index: Vec<usize>,
        bins: &DepthBins,
    ) -> Result<Self> {
        if layer_index.len() != width * height {
            return Err(Error::InvalidArgument("layer index size mismatch".into()));
        }
        if layer_index.iter().any(|&i| i >= bins.count()) {
            return Err(Error::InvalidArgument("layer index out of range".into()));
        }
        Ok(LayerDecomposition {
            width,
            height,
            invalid: vec![false; layer_index.len()],
            layer_index,
            centers: bins.centers().to_vec(),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn layer_index(&self) -> &[usize] {
        &self.layer_index
    }

    /// Pixels whose input depth was invalid (assigned to the farthest bin).
    pub fn invalid(&self) -> &[bool] {
        &self.invalid
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn count(&self) -> usize {
        self.centers.len()
    }

    /// Binary occlusion mask of layer `bin`.
    pub fn mask(&self, bin: usize) -> Plane {
        let data = self
            .layer_index
            .iter()
            .map(|&i| if i == bin { 1.0 } else { 0.0 })
            .collect();
        Plane::from_vec(self.width, self.height, data).expect("dims")
    }

    pub fn is_present(&self, bin: usize) -> bool {
        self.layer_index.contains(&bin)
    }

    /// Depth map holding the assigned bin center at each pixel.
    pub fn quantized_depth(&self) -> Plane {
        let data = self.layer_index.iter().map(|&i| self.centers[i]).collect();
        Plane::from_vec(self.width, self.height, data).expect("dims")
    }
}

pub fn quantize_depth(frame: &SceneFrame, bins: &DepthBins) -> LayerDecomposition {
    quantize_depth_map(&frame.depth, bins)
}

pub fn quantize_depth_map(depth: &Plane, bins: &DepthBins) -> LayerDecomposition {
    let far = bins.count() - 1;
    let mut layer_index = Vec::with_capacity(depth.data().len());
    let mut invalid = Vec::with_capacity(depth.data().len());
    for &d in depth.data() {
        if is_valid_depth(d) {
            layer_index.push(bins.nearest(d));
            invalid.push(false);
        } else {
            layer_index.push(far);
            invalid.push(true);
        }
    }
    LayerDecomposition {
        width: depth.width(),
        height: depth.height(),
        layer_index,
        invalid,
        centers: bins.centers().to_vec(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodedFrame {
    pub rgb: RgbImage,
    /// Fingerprint of the PSF bank that produced the frame.
    pub provenance: String,
}

/// Blurs `(a, b)` with one kernel. Large kernels pack both planes into a
/// single complex transform.
fn blur_pair(
    a: &Plane,
    b: &Plane,
    kernel: &Plane,
    plan: Option<&PaddedFft>,
) -> (Plane, Plane) {
    match plan {
        None => (convolve_direct(a, kernel), convolve_direct(b, kernel)),
        Some(fft) => {
            let spectrum = fft.kernel_spectrum(kernel);
            let pa = fft.pad(a);
            let pb = fft.pad(b);
            let mut buf: Vec<Complex64> = pa
                .data()
                .iter()
                .zip(pb.data())
                .map(|(&x, &y)| Complex64::new(x, y))
                .collect();
            fft.fft().forward(&mut buf);
            buf.iter_mut().zip(&spectrum).for_each(|(v, k)| *v *= k);
            fft.fft().inverse(&mut buf);
            let w = fft.fft().width();
            let m = fft.margin();
            let (iw, ih) = a.dims();
            let re = Plane::from_fn(iw, ih, |x, y| buf[(y + m) * w + x + m].re);
            let im = Plane::from_fn(iw, ih, |x, y| buf[(y + m) * w + x + m].im);
            (re, im)
        }
    }
}

/// Occlusion-aware layered rendering, composited far to near.
pub fn render_coded(
    frame: &SceneFrame,
    decomposition: &LayerDecomposition,
    bank: &PsfBank,
) -> Result<CodedFrame> {
    if bank.depth_bins() != decomposition.centers() {
        return Err(Error::InvalidArgument(
            "PSF bank bins differ from the decomposition bins".into(),
        ));
    }
    if frame.rgb.dims() != decomposition.dims() {
        return Err(Error::InvalidArgument(
            "decomposition size differs from the frame".into(),
        ));
    }
    let (w, h) = frame.rgb.dims();
    let ksize = bank.kernel_size();
    let mut seen = vec![false; bank.len()];
    decomposition.layer_index().iter().for_each(|&i| seen[i] = true);
    let present: Vec<usize> = (0..bank.len()).rev().filter(|&d| seen[d]).collect();
    let padded = (ksize >= FFT_KERNEL_THRESHOLD).then(|| PaddedFft::new(w, h, ksize / 2 + 1));

    let channels = crate::par::map_range(3, |c| {
        let image = &frame.rgb.channels[c];
        let mut out = Plane::new(w, h);
        // far to near; the chunking bounds memory without changing the result
        for chunk in present.chunks(8) {
            let blurred = crate::par::map_slice(chunk, |&d| {
                let mask = decomposition.mask(d);
                let kernel = bank.kernel(d, c);
                blur_pair(&image.zip_map(&mask, |i, o| i * o), &mask, kernel, padded.as_ref())
            });
            for (layer, coverage) in blurred {
                composite(&mut out, &layer, &coverage);
            }
        }
        out
    });
    let [r, g, b]: [Plane; 3] = channels.try_into().expect("three channels");
    Ok(CodedFrame {
        rgb: RgbImage::from_planes(r, g, b)?,
        provenance: bank.fingerprint().to_string(),
    })
}

/// `out ← α·(L/C) + (1 − α)·out` where the layer is defined.
pub fn composite(out: &mut Plane, layer: &Plane, coverage: &Plane) {
    for ((o, &l), &c) in out
        .data_mut()
        .iter_mut()
        .zip(layer.data())
        .zip(coverage.data())
    {
        if c > COVERAGE_THRESHOLD {
            let alpha = c.clamp(0.0, 1.0);
            *o = alpha * (l / c.max(COVERAGE_EPS)) + (1.0 - alpha) * *o;
        }
    }
}
