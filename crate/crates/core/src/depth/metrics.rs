use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Plane;

pub const DEFAULT_MAX_DEPTH: f64 = 6.0;
pub const NEAR_RANGE: f64 = 3.0;
pub const DELTA1_THRESHOLD: f64 = 1.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthMetrics {
    pub abs_rel: f64,
    pub rmse: f64,
    pub delta1: f64,
    pub l1: f64,
    /// `None` when no valid ground truth lies under 3 m.
    pub l1_under_3m: Option<f64>,
    pub valid_pixel_count: usize,
}

impl DepthMetrics {
    /// Flat `key=value` lines.
    pub fn to_report(&self) -> String {
        let under = self
            .l1_under_3m
            .map_or_else(|| "nan".to_string(), |v| v.to_string());
        format!(
            "abs_rel={}\nrmse={}\ndelta1={}\nl1={}\nl1_under_3m={}\nvalid_pixel_count={}\n",
            self.abs_rel, self.rmse, self.delta1, self.l1, under, self.valid_pixel_count
        )
    }
}

fn check_dims(pred: &Plane, gt: &Plane) -> Result<()> {
    if pred.dims() != gt.dims() {
        return Err(Error::InvalidArgument(format!(
            "prediction is {:?} but ground truth is {:?}",
            pred.dims(),
            gt.dims()
        )));
    }
    Ok(())
}

pub fn compute_depth_metrics(pred: &Plane, gt: &Plane, max_depth: f64) -> Result<DepthMetrics> {
    check_dims(pred, gt)?;
    let mut n = 0usize;
    let (mut rel, mut sq, mut abs, mut good) = (0.0, 0.0, 0.0, 0usize);
    let (mut near_abs, mut near_n) = (0.0, 0usize);
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        if !(g.is_finite() && g > 0.0 && g <= max_depth) {
            continue;
        }
        let e = p - g;
        n += 1;
        rel += e.abs() / g;
        sq += e * e;
        abs += e.abs();
        if (p / g).max(g / p) < DELTA1_THRESHOLD {
            good += 1;
        }
        if g < NEAR_RANGE {
            near_abs += e.abs();
            near_n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyInput(
            "no valid ground-truth pixels within range".into(),
        ));
    }
    let nf = n as f64;
    Ok(DepthMetrics {
        abs_rel: rel / nf,
        rmse: (sq / nf).sqrt(),
        delta1: good as f64 / nf,
        l1: abs / nf,
        l1_under_3m: (near_n > 0).then(|| near_abs / near_n as f64),
        valid_pixel_count: n,
    })
}

/// Pixels used by the training losses: any finite, nonnegative target.
fn loss_pairs<'a>(pred: &'a Plane, gt: &'a Plane) -> impl Iterator<Item = (f64, f64)> + 'a {
    pred.data()
        .iter()
        .zip(gt.data())
        .filter(|(_, &g)| g.is_finite() && g >= 0.0)
        .map(|(&p, &g)| (p, g))
}

pub fn l1_loss(pred: &Plane, gt: &Plane) -> Result<f64> {
    check_dims(pred, gt)?;
    let (sum, n) = loss_pairs(pred, gt).fold((0.0, 0usize), |(s, n), (p, g)| (s + (p - g).abs(), n + 1));
    if n == 0 {
        return Err(Error::EmptyInput("no valid pixels for the loss".into()));
    }
    Ok(sum / n as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 2.0,
            beta: 0.3,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "loss weights need alpha > 0 and finite beta: {self:?}"
            )));
        }
        Ok(())
    }

    /// `alpha^(−beta·depth)`.
    pub fn weight(&self, depth: f64) -> f64 {
        self.alpha.powf(-self.beta * depth)
    }
}

pub fn depth_weighted_loss(pred: &Plane, gt: &Plane, weights: LossWeights) -> Result<f64> {
    check_dims(pred, gt)?;
    weights.validate()?;
    let (sum, n) = loss_pairs(pred, gt).fold((0.0, 0usize), |(s, n), (p, g)| {
        let e = p - g;
        (s + weights.weight(g) * e * e, n + 1)
    });
    if n == 0 {
        return Err(Error::EmptyInput("no valid pixels for the loss".into()));
    }
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> Plane {
        Plane::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn identical_maps() {
        let g = p(&[1.0, 2.0, 5.0]);
        let m = compute_depth_metrics(&g, &g, 6.0).unwrap();
        assert_eq!((m.abs_rel, m.rmse, m.l1, m.delta1), (0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn single_pixel() {
        let m = compute_depth_metrics(&p(&[3.0]), &p(&[2.0]), 6.0).unwrap();
        assert!((m.abs_rel - 0.5).abs() < 1e-12);
        assert!((m.rmse - 1.0).abs() < 1e-12);
        assert!((m.l1 - 1.0).abs() < 1e-12);
        assert_eq!(m.delta1, 0.0);
        assert!((m.l1_under_3m.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_pixels() {
        let m = compute_depth_metrics(&p(&[1.2, 4.0]), &p(&[1.0, 4.0]), 6.0).unwrap();
        assert_eq!(m.delta1, 1.0);
        assert!((m.l1 - 0.1).abs() < 1e-12);
        assert!((m.l1_under_3m.unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn invalid_and_out_of_range_excluded() {
        let m = compute_depth_metrics(&p(&[1.0, 9.0, 3.0, 7.0]), &p(&[1.0, 0.0, f64::NAN, 7.0]), 6.0);
        assert!(matches!(m, Ok(ref m) if m.valid_pixel_count == 1));
        assert!(matches!(
            compute_depth_metrics(&p(&[1.0]), &p(&[0.0]), 6.0),
            Err(Error::EmptyInput(_))
        ));
        let m = compute_depth_metrics(&p(&[4.0]), &p(&[5.0]), 6.0).unwrap();
        assert!(m.l1_under_3m.is_none());
    }

    #[test]
    fn losses() {
        let g = p(&[1.0, 2.0]);
        assert_eq!(l1_loss(&g, &g).unwrap(), 0.0);
        assert!((l1_loss(&g.map(|v| v + 0.5), &g).unwrap() - 0.5).abs() < 1e-15);
        assert!((l1_loss(&p(&[1.5, 1.0]), &g).unwrap() - 0.75).abs() < 1e-15);
        let w = LossWeights::default();
        assert!((depth_weighted_loss(&p(&[1.0]), &p(&[0.0]), w).unwrap() - 1.0).abs() < 1e-15);
        let v = depth_weighted_loss(&p(&[2.0]), &p(&[1.0]), w).unwrap();
        assert!((v - 0.812_252_396_356_235_6).abs() < 1e-12);
        let mse = depth_weighted_loss(&p(&[1.5, 1.0]), &g, LossWeights { alpha: 2.0, beta: 0.0 }).unwrap();
        assert!((mse - 0.625).abs() < 1e-15);
        assert!(l1_loss(&p(&[1.0]), &p(&[f64::NAN])).is_err());
        assert!(depth_weighted_loss(&g, &g, LossWeights { alpha: 0.0, beta: 0.3 }).is_err());
    }
}
