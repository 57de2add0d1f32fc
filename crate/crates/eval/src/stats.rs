use serde::{Deserialize, Serialize};

/// Mean and sample standard deviation of one metric across repeats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepeatStats {
    pub mean: f64,
    pub sample_std: f64,
    pub repeats: usize,
    /// Only one repeat was available, so `sample_std` is 0 by convention.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub single: bool,
}

/// Arithmetic mean and n−1 standard deviation. `None` for an empty slice.
pub fn repeat_stats(values: &[f64]) -> Option<RepeatStats> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sample_std = if n == 1 {
        0.0
    } else {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    };
    Some(RepeatStats {
        mean,
        sample_std,
        repeats: n,
        single: n == 1,
    })
}
