use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::layers::CodedFrame;
use crate::error::{Error, Result};

/// Additive zero-mean Gaussian noise, clamped at zero. Channels draw from one
/// seeded stream in R, G, B order.
pub fn add_sensor_noise(frame: &CodedFrame, gaussian_sigma: f64, seed: u64) -> Result<CodedFrame> {
    if !(gaussian_sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise sigma must be >= 0, got {gaussian_sigma}"
        )));
    }
    if gaussian_sigma == 0.0 {
        return Ok(frame.clone());
    }
    let normal = Normal::new(0.0, gaussian_sigma).expect("finite sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = frame.clone();
    for plane in out.rgb.channels.iter_mut() {
        for v in plane.data_mut() {
            *v = (*v + normal.sample(&mut rng)).max(0.0);
        }
    }
    Ok(out)
}
