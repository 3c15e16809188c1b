//! 2D FFT, convolution with replicate padding, and separable filters.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Plane;

/// Kernels at least this wide go through the FFT path in [`convolve`].
pub const FFT_KERNEL_THRESHOLD: usize = 15;

/// Smallest `n' >= n` whose only prime factors are 2, 3 and 5.
pub fn next_fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Planned forward/inverse 2D transform for a fixed `width × height`.
pub struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// In-place unnormalized forward transform of row-major data.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_fwd, &self.col_fwd);
    }

    /// In-place inverse transform, normalized by `1 / (width·height)`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_inv, &self.col_inv);
        let s = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    fn run(&self, data: &mut [Complex64], row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len());
        row.process(data);
        let mut t = transpose(data, self.width, self.height);
        col.process(&mut t);
        let back = transpose(&t, self.height, self.width);
        data.copy_from_slice(&back);
    }

    pub fn forward_real(&self, plane: &Plane) -> Vec<Complex64> {
        assert_eq!(plane.dims(), (self.width, self.height));
        let mut buf: Vec<Complex64> = plane
            .data()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        self.forward(&mut buf);
        buf
    }

    /// Inverse transform keeping the real part.
    pub fn inverse_real(&self, mut spectrum: Vec<Complex64>) -> Plane {
        self.inverse(&mut spectrum);
        let data = spectrum.into_iter().map(|c| c.re).collect();
        Plane::from_vec(self.width, self.height, data).expect("fft dims")
    }

    /// Spectrum of an odd-sized kernel placed with its center at the origin.
    pub fn kernel_spectrum(&self, kernel: &Plane) -> Vec<Complex64> {
        let (kw, kh) = kernel.dims();
        assert!(kw % 2 == 1 && kh % 2 == 1, "kernel sides must be odd");
        assert!(kw <= self.width && kh <= self.height, "kernel larger than transform");
        let (cx, cy) = (kw / 2, kh / 2);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len()];
        for ky in 0..kh {
            let y = (ky + self.height - cy) % self.height;
            for kx in 0..kw {
                let x = (kx + self.width - cx) % self.width;
                buf[y * self.width + x] = Complex64::new(kernel.get(kx, ky), 0.0);
            }
        }
        self.forward(&mut buf);
        buf
    }
}

fn transpose(data: &[Complex64], width: usize, height: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for y in 0..height {
        for x in 0..width {
            out[x * height + y] = data[y * width + x];
        }
    }
    out
}

/// Pads images of a fixed size by replication before transforming, and crops
/// back after the inverse. The padded size is rounded up to a fast length.
pub struct PaddedFft {
    width: usize,
    height: usize,
    margin: usize,
    fft: Fft2,
}

impl PaddedFft {
    pub fn new(width: usize, height: usize, margin: usize) -> Self {
        let pw = next_fast_len(width + 2 * margin);
        let ph = next_fast_len(height + 2 * margin);
        PaddedFft {
            width,
            height,
            margin,
            fft: Fft2::new(pw, ph),
        }
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    pub fn pad(&self, plane: &Plane) -> Plane {
        assert_eq!(plane.dims(), (self.width, self.height));
        let m = self.margin as isize;
        Plane::from_fn(self.fft.width, self.fft.height, |x, y| {
            plane.get_clamped(x as isize - m, y as isize - m)
        })
    }

    pub fn forward(&self, plane: &Plane) -> Vec<Complex64> {
        self.fft.forward_real(&self.pad(plane))
    }

    pub fn inverse_crop(&self, spectrum: Vec<Complex64>) -> Plane {
        let full = self.fft.inverse_real(spectrum);
        full.crop(self.margin, self.margin, self.width, self.height)
    }

    pub fn kernel_spectrum(&self, kernel: &Plane) -> Vec<Complex64> {
        self.fft.kernel_spectrum(kernel)
    }
}

/// 2D convolution `out(x) = Σ_u k(u) · img(x − u)` with replicate padding,
/// kernel centered. Dispatches on kernel size.
pub fn convolve(image: &Plane, kernel: &Plane) -> Plane {
    if kernel.width().max(kernel.height()) >= FFT_KERNEL_THRESHOLD {
        convolve_fft(image, kernel)
    } else {
        convolve_direct(image, kernel)
    }
}

pub fn convolve_direct(image: &Plane, kernel: &Plane) -> Plane {
    let (kw, kh) = kernel.dims();
    let (cx, cy) = ((kw / 2) as isize, (kh / 2) as isize);
    let (w, h) = image.dims();
    let mut out = Plane::new(w, h);
    crate::par::for_each_row(out.data_mut(), w, |y, row| {
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for ky in 0..kh {
                let sy = y as isize - (ky as isize - cy);
                for kx in 0..kw {
                    let sx = x as isize - (kx as isize - cx);
                    acc += kernel.get(kx, ky) * image.get_clamped(sx, sy);
                }
            }
            *o = acc;
        }
    });
    out
}

pub fn convolve_fft(image: &Plane, kernel: &Plane) -> Plane {
    let margin = kernel.width().max(kernel.height()) / 2 + 1;
    let plan = PaddedFft::new(image.width(), image.height(), margin);
    let k = plan.kernel_spectrum(kernel);
    let mut s = plan.forward(image);
    s.iter_mut().zip(&k).for_each(|(a, b)| *a *= b);
    plan.inverse_crop(s)
}

/// Mean over a `window × window` neighborhood, replicate borders.
pub fn box_filter(image: &Plane, window: usize) -> Plane {
    assert!(window % 2 == 1, "box window must be odd");
    let r = (window / 2) as isize;
    let norm = 1.0 / window as f64;
    let horizontal = separable_pass(image, |src, x, y| {
        let mut acc = 0.0;
        for dx in -r..=r {
            acc += src.get_clamped(x as isize + dx, y as isize);
        }
        acc * norm
    });
    separable_pass(&horizontal, |src, x, y| {
        let mut acc = 0.0;
        for dy in -r..=r {
            acc += src.get_clamped(x as isize, y as isize + dy);
        }
        acc * norm
    })
}

/// Sampled, normalized 1D Gaussian taps with radius `ceil(3σ)`.
pub fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut taps: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

pub fn gaussian_blur(image: &Plane, sigma: f64) -> Plane {
    let taps = gaussian_taps(sigma);
    let r = (taps.len() / 2) as isize;
    let horizontal = separable_pass(image, |src, x, y| {
        taps.iter()
            .enumerate()
            .map(|(i, t)| t * src.get_clamped(x as isize + i as isize - r, y as isize))
            .sum()
    });
    separable_pass(&horizontal, |src, x, y| {
        taps.iter()
            .enumerate()
            .map(|(i, t)| t * src.get_clamped(x as isize, y as isize + i as isize - r))
            .sum()
    })
}

fn separable_pass(src: &Plane, f: impl Fn(&Plane, usize, usize) -> f64 + Sync + Send) -> Plane {
    let (w, h) = src.dims();
    let mut out = Plane::new(w, h);
    crate::par::for_each_row(out.data_mut(), w, |y, row| {
        for (x, o) in row.iter_mut().enumerate() {
            *o = f(src, x, y);
        }
    });
    out
}
