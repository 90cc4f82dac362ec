use serde::{Deserialize, Serialize};

use super::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBucket {
    pub start_ns: u64,
    pub count: u64,
}

/// Summary of an RTT sample set. All values in nanoseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: u64,
    pub mean: f64,
    pub min: u64,
    pub max: u64,
    pub p50: u64,
    pub p99: u64,
    pub p999: u64,
    /// Population standard deviation.
    pub stddev: f64,
    pub bucket_width_ns: u64,
    /// Nonempty buckets in ascending order.
    pub histogram: Vec<HistogramBucket>,
}

impl LatencyStats {
    /// `max == mean == min`: every sample took the same time.
    pub fn is_isochronous(&self) -> bool {
        self.min == self.max && self.mean == self.min as f64
    }
}

/// Nearest-rank percentile over an ascending slice: the value at rank
/// `ceil(n * num / den)`, ranks counted from 1.
pub fn nearest_rank(sorted: &[u64], num: u64, den: u64) -> u64 {
    let n = sorted.len() as u64;
    let rank = (n * num).div_ceil(den).max(1);
    sorted[(rank - 1) as usize]
}

pub fn compute_stats(samples: &[u64], bucket_width_ns: u64) -> Result<LatencyStats, LabError> {
    if samples.is_empty() {
        return Err(LabError::EmptySampleSet);
    }
    if bucket_width_ns == 0 {
        return Err(LabError::InvalidConfig(
            "histogram bucket width must be positive".into(),
        ));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let sum: u128 = sorted.iter().map(|&v| u128::from(v)).sum();
    let mean = sum as f64 / n as f64;
    let var = sorted
        .iter()
        .map(|&v| {
            let d = v as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n as f64;

    let mut histogram: Vec<HistogramBucket> = Vec::new();
    for &v in &sorted {
        let start_ns = v / bucket_width_ns * bucket_width_ns;
        match histogram.last_mut() {
            Some(b) if b.start_ns == start_ns => b.count += 1,
            _ => histogram.push(HistogramBucket { start_ns, count: 1 }),
        }
    }

    Ok(LatencyStats {
        count: n as u64,
        mean,
        min: sorted[0],
        max: sorted[n - 1],
        p50: nearest_rank(&sorted, 50, 100),
        p99: nearest_rank(&sorted, 99, 100),
        p999: nearest_rank(&sorted, 999, 1000),
        stddev: var.sqrt(),
        bucket_width_ns,
        histogram,
    })
}
