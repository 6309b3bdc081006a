use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground-truth widths above this are excluded from evaluation by default (meters).
pub const DEFAULT_MAX_WIDTH: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthErrorStats {
    pub n_nodes: usize,
    /// Mean of `ŷ − y`.
    pub bias_m: f64,
    /// Mean of `(ŷ − y) / y` over nodes with `y > 0`, in percent. `None` when no such node.
    pub pct_bias: Option<f64>,
    pub mean_abs_m: f64,
    pub median_abs_m: f64,
    /// Pairs dropped because `y` exceeded the cutoff.
    pub n_excluded_gt_over_max: usize,
    /// Nodes with `y = 0`, kept for the absolute statistics but left out of `pct_bias`.
    pub n_zero_gt: usize,
}

/// Median with the two middle elements averaged for even lengths.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Error statistics of predicted widths `ŷ` against references `y`, given as `(ŷ, y)` pairs.
pub fn width_error_stats(pairs: &[(f64, f64)], max_width: f64) -> Result<WidthErrorStats> {
    if let Some((p, y)) = pairs
        .iter()
        .find(|(p, y)| !p.is_finite() || !y.is_finite() || *y < 0.0 || *p < 0.0)
    {
        return Err(Error::InvalidValue(format!(
            "widths must be finite and non-negative, got prediction {p} against {y}"
        )));
    }
    let kept: Vec<(f64, f64)> = pairs.iter().copied().filter(|&(_, y)| y <= max_width).collect();
    let n_excluded = pairs.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::EmptyEvaluation(format!(
            "no pairs left after dropping {n_excluded} with reference width over {max_width} m"
        )));
    }

    let n = kept.len() as f64;
    let bias_m = kept.iter().map(|(p, y)| p - y).sum::<f64>() / n;
    let mut abs: Vec<f64> = kept.iter().map(|(p, y)| (p - y).abs()).collect();
    let mean_abs_m = abs.iter().sum::<f64>() / n;
    let median_abs_m = median(&mut abs).unwrap_or(0.0);

    let ratios: Vec<f64> = kept
        .iter()
        .filter(|(_, y)| *y > 0.0)
        .map(|(p, y)| (p - y) / y)
        .collect();
    let n_zero_gt = kept.len() - ratios.len();
    let pct_bias = (!ratios.is_empty()).then(|| 100.0 * ratios.iter().sum::<f64>() / ratios.len() as f64);

    Ok(WidthErrorStats {
        n_nodes: kept.len(),
        bias_m,
        pct_bias,
        mean_abs_m,
        median_abs_m,
        n_excluded_gt_over_max: n_excluded,
        n_zero_gt,
    })
}
