//! Stage totals, slowdown/speedup ratios and energy metrics.
//!
//! Every ratio is `floor(value / reference)`, computed on exact integer
//! nanoseconds.

use serde::{Deserialize, Serialize};

use super::LabError;
use crate::units::Micros;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRow {
    pub label: String,
    pub latency: Micros,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyWarning {
    pub expected: Micros,
    pub computed: Micros,
}

impl std::fmt::Display for ConsistencyWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "stage rows sum to {} us but the expected total is {} us",
            self.computed, self.expected
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTotal {
    pub total: Micros,
    pub warning: Option<ConsistencyWarning>,
}

/// Exact sum of the stage rows, checked against `expected` when given.
pub fn stage_total(rows: &[Micros], expected: Option<Micros>) -> StageTotal {
    let total: Micros = rows.iter().copied().sum();
    let warning = expected
        .filter(|e| *e != total)
        .map(|expected| ConsistencyWarning {
            expected,
            computed: total,
        });
    StageTotal { total, warning }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub label: String,
    pub mean: Micros,
    #[serde(default)]
    pub max: Option<Micros>,
}

impl LatencyRow {
    pub fn new(label: impl Into<String>, mean: Micros, max: Option<Micros>) -> Self {
        LatencyRow {
            label: label.into(),
            mean,
            max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub mean_us: Micros,
    pub max_us: Option<Micros>,
    pub mean_ratio: u64,
    pub max_ratio: Option<u64>,
}

pub fn comparison_table(
    rows: &[LatencyRow],
    reference_label: &str,
) -> Result<Vec<ComparisonRow>, LabError> {
    let reference = rows
        .iter()
        .find(|r| r.label == reference_label)
        .ok_or_else(|| LabError::MissingReference(reference_label.to_string()))?;
    let nonpositive = || LabError::NonpositiveReference(reference_label.to_string());
    if reference.mean == Micros::ZERO || reference.max == Some(Micros::ZERO) {
        return Err(nonpositive());
    }
    rows.iter()
        .map(|r| {
            let mean_ratio = r.mean.ratio_floor(reference.mean).ok_or_else(nonpositive)?;
            let max_ratio = match (r.max, reference.max) {
                (Some(m), Some(rm)) => Some(m.ratio_floor(rm).ok_or_else(nonpositive)?),
                _ => None,
            };
            Ok(ComparisonRow {
                label: r.label.clone(),
                mean_us: r.mean,
                max_us: r.max,
                mean_ratio,
                max_ratio,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyMetrics {
    pub power_watts: f64,
    pub message_rate_hz: f64,
    pub frequency_per_watt: f64,
    pub energy_per_message_joules: f64,
}

impl EnergyMetrics {
    pub fn new(power_watts: f64, message_rate_hz: f64) -> Result<Self, LabError> {
        let valid = |v: f64| v.is_finite() && v > 0.0;
        if !valid(power_watts) {
            return Err(LabError::NonpositiveInput("power_watts"));
        }
        if !valid(message_rate_hz) {
            return Err(LabError::NonpositiveInput("message_rate_hz"));
        }
        Ok(EnergyMetrics {
            power_watts,
            message_rate_hz,
            frequency_per_watt: message_rate_hz / power_watts,
            energy_per_message_joules: power_watts / message_rate_hz,
        })
    }

    /// Normalized to 1 W, for when only the frequency-per-Watt figure is known.
    pub fn from_frequency_per_watt(frequency_per_watt: f64) -> Result<Self, LabError> {
        Self::new(1.0, frequency_per_watt)
    }
}

pub fn energy_metrics(power_watts: f64, message_rate_hz: f64) -> Result<EnergyMetrics, LabError> {
    EnergyMetrics::new(power_watts, message_rate_hz)
}

/// `floor(a / b)` of two frequency-per-Watt figures.
pub fn efficiency_ratio(
    a_frequency_per_watt: f64,
    b_frequency_per_watt: f64,
) -> Result<u64, LabError> {
    let valid = |v: f64| v.is_finite() && v > 0.0;
    if !valid(a_frequency_per_watt) || !valid(b_frequency_per_watt) {
        return Err(LabError::NonpositiveInput("frequency_per_watt"));
    }
    Ok((a_frequency_per_watt / b_frequency_per_watt).floor() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn us(s: &str) -> Micros {
        s.parse().unwrap()
    }

    #[test]
    fn stage_totals() {
        assert_eq!(
            stage_total(&[us("0.7"), us("2.3"), us("2")], None).total,
            us("5")
        );
        let t = stage_total(&[us("70"), us("835"), us("139")], Some(us("1044")));
        assert_eq!((t.total, t.warning), (us("1044"), None));
        let t = stage_total(&[us("71"), us("141"), us("155")], Some(us("369")));
        assert_eq!(t.total, us("367"));
        let w = t.warning.unwrap();
        assert_eq!((w.computed, w.expected), (us("367"), us("369")));
        assert_eq!(stage_total(&[], None).total, Micros::ZERO);
    }

    #[test]
    fn ratios_are_floored() {
        let rows = vec![
            LatencyRow::new("hw", us("5"), Some(us("11"))),
            LatencyRow::new("dds1", us("1044"), Some(us("336750"))),
            LatencyRow::new("dds2", us("314"), Some(us("22769"))),
        ];
        let t = comparison_table(&rows, "hw").unwrap();
        assert_eq!(t[0].mean_ratio, 1);
        assert_eq!(t[1].mean_ratio, 208);
        assert_eq!(t[1].max_ratio, Some(30613));
        assert_eq!(t[2].mean_ratio, 62);
        assert_eq!(t[2].max_ratio, Some(2069));
    }

    #[test]
    fn comparison_errors() {
        let rows = vec![LatencyRow::new("a", us("1"), None)];
        assert!(matches!(
            comparison_table(&rows, "b"),
            Err(LabError::MissingReference(_))
        ));
        let rows = vec![LatencyRow::new("a", Micros::ZERO, None)];
        assert!(matches!(
            comparison_table(&rows, "a"),
            Err(LabError::NonpositiveReference(_))
        ));
    }

    #[test]
    fn energy() {
        let e = energy_metrics(1.0, 1.0).unwrap();
        assert_eq!(e.energy_per_message_joules, 1.0);
        assert_eq!(e.frequency_per_watt, 1.0);
        let e = energy_metrics(2.5, 400.0).unwrap();
        assert!((e.frequency_per_watt * e.energy_per_message_joules - 1.0).abs() < 1e-12);
        assert_eq!(efficiency_ratio(281_690.0, 518.0).unwrap(), 543);
        assert!(energy_metrics(0.0, 1.0).is_err());
        assert!(energy_metrics(1.0, -1.0).is_err());
        assert!(energy_metrics(f64::NAN, 1.0).is_err());
        assert!(efficiency_ratio(1.0, 0.0).is_err());
    }
}
