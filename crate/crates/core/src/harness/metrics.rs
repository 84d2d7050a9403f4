use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{search_rng, FailureReason, TaskOutcome};
use crate::llm::TaskKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthStats {
    pub depth: usize,
    pub slots: usize,
    pub candidates: usize,
    pub valid: usize,
    pub unique_viable: usize,
}

/// Per-task result, the unit every metric is computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task: TaskKind,
    pub task_id: String,
    pub method: String,
    pub generator: String,
    pub discriminator: String,
    pub accuracy: Option<f64>,
    pub seed: u64,
    pub n_correct: usize,
    pub n_outputs: usize,
    pub failure_reason: Option<FailureReason>,
    pub depths: Vec<DepthStats>,
    pub wall_time_ms: u64,
}

impl RunRecord {
    pub fn from_outcome(
        task: TaskKind,
        method: &str,
        accuracy: Option<f64>,
        outcome: &TaskOutcome,
        wall_time_ms: u64,
    ) -> Self {
        RunRecord {
            task,
            task_id: outcome.task_id.clone(),
            method: method.to_string(),
            generator: outcome.generator.clone(),
            discriminator: outcome.discriminator.clone(),
            accuracy,
            seed: outcome.seed,
            n_correct: outcome.n_correct,
            n_outputs: outcome.n_outputs,
            failure_reason: outcome.failure_reason,
            depths: outcome
                .levels
                .iter()
                .map(|l| DepthStats {
                    depth: l.depth,
                    slots: l.slots,
                    candidates: l.candidates.len(),
                    valid: l.valid_count(),
                    unique_viable: l.unique_viable,
                })
                .collect(),
            wall_time_ms,
        }
    }

    /// `n_correct / n_outputs`, zero when nothing was output.
    pub fn success_ratio(&self) -> f64 {
        if self.n_outputs == 0 {
            0.0
        } else {
            self.n_correct as f64 / self.n_outputs as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no records to aggregate")]
    Empty,
    #[error("{name} = {value} is outside {range}")]
    Range {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
}

/// Mean of per-task ratios; tasks without outputs count as zero. The sum
/// runs over sorted ratios so the result does not depend on record order.
pub fn average_success_rate(records: &[RunRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let ratios: Vec<f64> = records.iter().map(RunRecord::success_ratio).collect();
    Ok(sorted_mean(&ratios))
}

fn sorted_mean(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationQuality {
    /// Index `d` holds depth `d + 1`.
    pub per_depth: Vec<f64>,
    pub overall: f64,
}

/// Unique viable candidates over requested slots, averaged across the
/// records that reached each depth; `overall` averages the depths.
pub fn generation_quality(records: &[RunRecord]) -> GenerationQuality {
    let max_depth = records.iter().map(|r| r.depths.len()).max().unwrap_or(0);
    let per_depth: Vec<f64> = (0..max_depth)
        .map(|d| {
            let ratios: Vec<f64> = records
                .iter()
                .filter_map(|r| r.depths.get(d))
                .map(|s| {
                    if s.slots == 0 {
                        0.0
                    } else {
                        s.unique_viable as f64 / s.slots as f64
                    }
                })
                .collect();
            sorted_mean(&ratios)
        })
        .collect();
    let overall = if per_depth.is_empty() {
        0.0
    } else {
        per_depth.iter().sum::<f64>() / per_depth.len() as f64
    };
    GenerationQuality { per_depth, overall }
}

/// Probability that a width-one search with per-slot oracle agents succeeds
/// when every state offers both viable and inviable steps.
pub fn closed_form_success(
    p_gen: f64,
    p_disc: f64,
    k: u32,
    depth: u32,
) -> Result<f64, MetricsError> {
    for (name, value) in [("p_gen", p_gen), ("p_disc", p_disc)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(MetricsError::Range {
                name,
                value,
                range: "[0, 1]",
            });
        }
    }
    if k == 0 {
        return Err(MetricsError::Range {
            name: "k",
            value: 0.0,
            range: "1..",
        });
    }
    let per_depth = (1.0 - (1.0 - p_gen).powi(k as i32)) * p_disc;
    Ok(per_depth.powi(depth as i32))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one task at one sweep point. `None` stands for a run outside
/// any sweep point, such as the random-discriminator row.
pub fn derive_seed(master: u64, task_index: usize, point: Option<f64>) -> u64 {
    let point_bits = point.map_or(u64::MAX, f64::to_bits);
    splitmix64(splitmix64(splitmix64(master) ^ task_index as u64) ^ point_bits)
}

/// Percentile bootstrap interval for the mean of `values`.
pub fn bootstrap_ci(values: &[f64], resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    if values.is_empty() || resamples == 0 {
        return (0.0, 0.0);
    }
    let mut rng = search_rng(seed);
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let lo = ((resamples as f64) * alpha).floor() as usize;
    let hi = (((resamples as f64) * (1.0 - alpha)).ceil() as usize).clamp(1, resamples) - 1;
    (means[lo.min(resamples - 1)], means[hi])
}

/// Bootstrap interval for `mean(b) - mean(a)` resampling tasks jointly.
pub fn paired_bootstrap_diff(
    a: &[f64],
    b: &[f64],
    resamples: usize,
    level: f64,
    seed: u64,
) -> (f64, f64) {
    assert_eq!(a.len(), b.len(), "paired samples");
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    bootstrap_ci(&diffs, resamples, level, seed)
}
