//! Geometric length-scale schedule: step `k` owns flip counts `m` with
//! `growth^k <= m < growth^(k+1)`.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// One band of the schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleBand {
    pub k: usize,
    /// `L_k = growth^k`.
    pub lower: f64,
    /// `L_{k+1}`.
    pub upper: f64,
    /// Integers in `[lower, upper)`; empty once the band outgrows the chain.
    pub distances: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleSchedule {
    pub growth: f64,
    pub bands: Vec<ScaleBand>,
}

impl ScaleSchedule {
    pub fn band(&self, k: usize) -> &ScaleBand {
        &self.bands[k]
    }

    /// `L_k`.
    pub fn length_scale(&self, k: usize) -> f64 {
        self.bands[k].lower
    }

    /// Largest integer distance strictly below `L_{k+1}`, clipped to `limit`.
    /// This is the top of the cumulative window `[1, L_{k+1})` the engine
    /// targets at step `k`.
    pub fn cumulative_max_distance(&self, k: usize, limit: usize) -> usize {
        let upper = self.bands[k].upper;
        let mut top = upper.ceil() as usize;
        while top as f64 >= upper {
            top -= 1;
        }
        top.min(limit)
    }
}

/// Build the schedule for `k = 0..=k_max`. The same power table provides the
/// upper bound of band `k` and the lower bound of band `k+1`, so the bands
/// tile the integers `>= 1` exactly.
pub fn scale_bands(growth: f64, k_max: usize) -> Result<ScaleSchedule> {
    if !(growth > 1.0) || !growth.is_finite() {
        return Err(CoreError::InvalidArgument(format!(
            "schedule growth must be finite and > 1, got {growth}"
        )));
    }
    let mut scales = Vec::with_capacity(k_max + 2);
    let mut l = 1.0f64;
    for _ in 0..=k_max + 1 {
        scales.push(l);
        l *= growth;
    }
    let mut bands = Vec::with_capacity(k_max + 1);
    let mut m = 1usize;
    for k in 0..=k_max {
        let lower = scales[k];
        let upper = scales[k + 1];
        let mut distances = Vec::new();
        while (m as f64) < upper {
            if m as f64 >= lower {
                distances.push(m);
            }
            m += 1;
        }
        bands.push(ScaleBand { k, lower, upper, distances });
    }
    Ok(ScaleSchedule { growth, bands })
}
