use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::depth::DepthMetrics;
use crate::error::{Error, Result};
use crate::io::DatasetIndex;
use crate::pipeline::{build_optics, run_sequence, PipelineConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    /// Mask grid cells per side at fixed cell pitch.
    MaskSize,
    /// In-focus distance, meters.
    FocusDistance,
}

impl std::str::FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mask_size" => Ok(AblationAxis::MaskSize),
            "focus_distance" => Ok(AblationAxis::FocusDistance),
            _ => Err(Error::InvalidArgument(format!(
                "unknown ablation axis {s:?} (expected mask_size or focus_distance)"
            ))),
        }
    }
}

impl std::fmt::Display for AblationAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AblationAxis::MaskSize => "mask_size",
            AblationAxis::FocusDistance => "focus_distance",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub axis: AblationAxis,
    pub values: Vec<f64>,
}

impl AblationSpec {
    pub fn new(axis: AblationAxis, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("ablation needs at least one value".into()));
        }
        for (i, v) in values.iter().enumerate() {
            if values[..i].contains(v) {
                return Err(Error::InvalidArgument(format!("duplicate ablation value {v}")));
            }
            let ok = match axis {
                AblationAxis::MaskSize => *v >= 1.0 && v.fract() == 0.0 && *v <= 4096.0,
                AblationAxis::FocusDistance => *v > 0.0 && v.is_finite(),
            };
            if !ok {
                return Err(Error::InvalidArgument(format!("invalid {axis} value {v}")));
            }
        }
        Ok(AblationSpec { axis, values })
    }

    fn base_value(&self, base: &PipelineConfig) -> f64 {
        match self.axis {
            AblationAxis::MaskSize => base.mask.grid as f64,
            AblationAxis::FocusDistance => base.camera.focus_distance,
        }
    }

    fn configure(&self, base: &PipelineConfig, value: f64) -> Result<PipelineConfig> {
        let mut c = base.clone();
        match self.axis {
            AblationAxis::MaskSize => {
                if c.mask.file.is_some() {
                    return Err(Error::InvalidConfiguration(
                        "a mask size sweep needs a Zernike mask, not a mask file".into(),
                    ));
                }
                c.mask.grid = value as usize;
            }
            AblationAxis::FocusDistance => c.camera.focus_distance = value,
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub value: f64,
    pub is_base: bool,
    /// Median over trials.
    pub ate: Option<f64>,
    pub trial_ates: Vec<f64>,
    /// Per-field median over trials.
    pub metrics: Option<DepthMetrics>,
    pub fallbacks: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub axis: AblationAxis,
    pub trials: usize,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn median_metrics(all: &[DepthMetrics]) -> Option<DepthMetrics> {
    let first = all.first()?;
    let m = |f: fn(&DepthMetrics) -> f64| median(all.iter().map(f).collect());
    let under: Vec<f64> = all.iter().filter_map(|x| x.l1_under_3m).collect();
    Some(DepthMetrics {
        abs_rel: m(|x| x.abs_rel),
        rmse: m(|x| x.rmse),
        delta1: m(|x| x.delta1),
        l1: m(|x| x.l1),
        l1_under_3m: (!under.is_empty()).then(|| median(under)),
        valid_pixel_count: first.valid_pixel_count,
    })
}

fn run_row(spec: &AblationSpec, base: &PipelineConfig, dataset: &DatasetIndex, value: f64) -> Result<AblationRow> {
    let config = spec.configure(base, value)?;
    let optics = build_optics(&config)?;
    let gt = dataset.ground_truth(config.dataset.gt_axis_flip)?;
    let timestamps = dataset.timestamps();
    let mut ates = Vec::new();
    let mut metrics = Vec::new();
    let mut fallbacks = 0;
    for t in 0..config.eval.trials {
        let mut c = config.clone();
        c.seed = config.seed.wrapping_add(t as u64);
        c.vo.seed = config.vo.seed.wrapping_add(t as u64);
        let out = run_sequence(dataset.len(), &timestamps, |i| dataset.load_frame(i), gt.as_ref(), &c, &optics)?;
        ates.extend(out.ate());
        metrics.extend(out.metrics);
        fallbacks += out.odometry.fallbacks();
    }
    Ok(AblationRow {
        value,
        is_base: false,
        ate: (!ates.is_empty()).then(|| median(ates.clone())),
        trial_ates: ates,
        metrics: median_metrics(&metrics),
        fallbacks,
        error: None,
    })
}

/// One row per value plus the base value (added when missing), sorted
/// ascending. A failing row records its error; the sweep continues.
pub fn run_ablation(spec: &AblationSpec, base: &PipelineConfig, dataset: &DatasetIndex) -> Result<AblationTable> {
    base.validate()?;
    let base_value = spec.base_value(base);
    let mut values = spec.values.clone();
    if !values.contains(&base_value) {
        values.push(base_value);
    }
    values.sort_by(f64::total_cmp);
    let rows = crate::par::map_slice(&values, |&v| {
        let mut row = run_row(spec, base, dataset, v).unwrap_or_else(|e| AblationRow {
            value: v,
            is_base: false,
            ate: None,
            trial_ates: Vec::new(),
            metrics: None,
            fallbacks: 0,
            error: Some(e.to_string()),
        });
        row.is_base = v == base_value;
        row
    });
    Ok(AblationTable {
        axis: spec.axis,
        trials: base.eval.trials,
        rows,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.6}"))
}

/// Aligned plain-text table, one line per row.
pub fn format_ablation_table(table: &AblationTable) -> String {
    let header = [
        table.axis.to_string(),
        "ate_m".into(),
        "abs_rel".into(),
        "rmse_m".into(),
        "delta1".into(),
        "l1_m".into(),
        "l1_lt3m".into(),
        "fallbacks".into(),
        "status".into(),
    ];
    let mut lines = vec![header.to_vec()];
    for r in &table.rows {
        let m = r.metrics.as_ref();
        let value = if r.is_base {
            format!("{}*", r.value)
        } else {
            r.value.to_string()
        };
        lines.push(vec![
            value,
            opt(r.ate),
            opt(m.map(|m| m.abs_rel)),
            opt(m.map(|m| m.rmse)),
            opt(m.map(|m| m.delta1)),
            opt(m.map(|m| m.l1)),
            opt(m.and_then(|m| m.l1_under_3m)),
            r.fallbacks.to_string(),
            r.error.as_ref().map_or("ok".into(), |e| format!("error: {e}")),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
        .collect();
    let mut s = String::new();
    for l in &lines {
        let cells: Vec<String> = l
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (v, w))| if c + 1 == l.len() { v.clone() } else { format!("{v:<w$}") })
            .collect();
        let _ = writeln!(s, "{}", cells.join("  "));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(AblationSpec::new(AblationAxis::MaskSize, vec![]).is_err());
        assert!(AblationSpec::new(AblationAxis::MaskSize, vec![11.0, 11.0]).is_err());
        assert!(AblationSpec::new(AblationAxis::MaskSize, vec![11.5]).is_err());
        assert!(AblationSpec::new(AblationAxis::FocusDistance, vec![-1.0]).is_err());
        assert!(AblationSpec::new(AblationAxis::FocusDistance, vec![0.5, 2.5]).is_ok());
    }

    #[test]
    fn medians() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
