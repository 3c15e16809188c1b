//! Zernike polynomials over the unit disk, Noll-indexed and Noll-normalized.

use crate::error::{Error, Result};

/// Radial degree `n` and signed azimuthal frequency `m` for a Noll index.
/// `m > 0` selects the cosine term, `m < 0` the sine term.
pub fn noll_to_nm(j: usize) -> Result<(u32, i32)> {
    if j < 1 {
        return Err(Error::InvalidArgument(format!(
            "Noll index must be >= 1, got {j}"
        )));
    }
    let mut n = 0usize;
    while (n + 1) * (n + 2) / 2 < j {
        n += 1;
    }
    let k = j - n * (n + 1) / 2;
    let p = n % 2;
    let abs_m = 2 * ((k + p) / 2) - p;
    let m = if abs_m == 0 {
        0
    } else if j % 2 == 0 {
        abs_m as i32
    } else {
        -(abs_m as i32)
    };
    Ok((n as u32, m))
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Radial polynomial `R_n^|m|(rho)`.
pub fn radial(n: u32, m: i32, rho: f64) -> f64 {
    let m = m.unsigned_abs();
    if (n - m) % 2 == 1 {
        return 0.0;
    }
    let mut acc = 0.0;
    for k in 0..=(n - m) / 2 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let c = sign * factorial(n - k)
            / (factorial(k) * factorial((n + m) / 2 - k) * factorial((n - m) / 2 - k));
        acc += c * rho.powi((n - 2 * k) as i32);
    }
    acc
}

/// `Z_j(rho, theta)` with Noll normalization (unit RMS over the disk).
pub fn zernike_eval(noll_index: usize, rho: f64, theta: f64) -> Result<f64> {
    let (n, m) = noll_to_nm(noll_index)?;
    let r = radial(n, m, rho);
    let n1 = f64::from(n + 1);
    Ok(match m.cmp(&0) {
        std::cmp::Ordering::Equal => n1.sqrt() * r,
        std::cmp::Ordering::Greater => (2.0 * n1).sqrt() * r * (f64::from(m) * theta).cos(),
        std::cmp::Ordering::Less => (2.0 * n1).sqrt() * r * (f64::from(-m) * theta).sin(),
    })
}
