//! Regenerates the published comparison tables from the bundled inputs.

use serde::{Deserialize, Serialize};

use super::tables::{
    comparison_table, efficiency_ratio, stage_total, ComparisonRow, ConsistencyWarning, LatencyRow,
    StageRow,
};
use super::LabError;
use crate::units::Micros;

/// The bundled `fixtures/published_inputs.toml`.
pub const PUBLISHED_INPUTS: &str = include_str!("../../fixtures/published_inputs.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageInput {
    pub layer: String,
    pub us: Micros,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownColumnInput {
    pub label: String,
    pub printed_total: Micros,
    pub stages: Vec<StageInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownInput {
    pub title: String,
    pub reference: String,
    pub layers: Vec<String>,
    #[serde(rename = "column")]
    pub columns: Vec<BreakdownColumnInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonInput {
    pub title: String,
    pub reference: String,
    pub rows: Vec<LatencyRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRowInput {
    pub label: String,
    pub frequency_per_watt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyInput {
    pub title: String,
    pub reference: String,
    pub energy_per_message_uj: String,
    pub rows: Vec<EnergyRowInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedInputs {
    pub breakdown: BreakdownInput,
    pub isochrony: ComparisonInput,
    pub ip_cores: ComparisonInput,
    pub energy: EnergyInput,
}

impl PublishedInputs {
    pub fn bundled() -> Self {
        Self::parse(PUBLISHED_INPUTS).expect("bundled fixture parses")
    }

    pub fn parse(text: &str) -> Result<Self, LabError> {
        toml::from_str(text).map_err(|e| LabError::InvalidConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakdownColumn {
    pub label: String,
    pub stages: Vec<StageRow>,
    pub total: Micros,
    pub printed_total: Micros,
    pub speedup: u64,
    pub warning: Option<ConsistencyWarning>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakdownTable {
    pub title: String,
    pub reference: String,
    pub layers: Vec<String>,
    pub columns: Vec<BreakdownColumn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub title: String,
    pub reference: String,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub label: String,
    pub frequency_per_watt: f64,
    pub ratio: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTable {
    pub title: String,
    pub reference: String,
    pub rows: Vec<EnergyRow>,
    pub printed_energy_per_message_uj: String,
    /// `1 / (2 * frequency_per_watt)` of the first row, in µJ: each counted
    /// exchange is a ping plus its echo.
    pub derived_energy_per_message_uj: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TablesReport {
    pub breakdown: BreakdownTable,
    pub isochrony: ComparisonTable,
    pub ip_cores: ComparisonTable,
    pub energy: EnergyTable,
}

fn comparison(input: &ComparisonInput) -> Result<ComparisonTable, LabError> {
    Ok(ComparisonTable {
        title: input.title.clone(),
        reference: input.reference.clone(),
        rows: comparison_table(&input.rows, &input.reference)?,
    })
}

pub fn reproduce(inputs: &PublishedInputs) -> Result<TablesReport, LabError> {
    let b = &inputs.breakdown;
    let totals: Vec<_> = b
        .columns
        .iter()
        .map(|c| {
            let rows: Vec<Micros> = c.stages.iter().map(|s| s.us).collect();
            stage_total(&rows, Some(c.printed_total))
        })
        .collect();
    let totals_as_rows: Vec<LatencyRow> = b
        .columns
        .iter()
        .zip(&totals)
        .map(|(c, t)| LatencyRow::new(c.label.clone(), t.total, None))
        .collect();
    let speedups = comparison_table(&totals_as_rows, &b.reference)?;
    let columns = b
        .columns
        .iter()
        .zip(totals)
        .zip(speedups)
        .map(|((c, t), s)| BreakdownColumn {
            label: c.label.clone(),
            stages: c
                .stages
                .iter()
                .map(|s| StageRow {
                    label: s.layer.clone(),
                    latency: s.us,
                })
                .collect(),
            total: t.total,
            printed_total: c.printed_total,
            speedup: s.mean_ratio,
            warning: t.warning,
        })
        .collect();

    let e = &inputs.energy;
    let reference = e
        .rows
        .iter()
        .find(|r| r.label == e.reference)
        .ok_or_else(|| LabError::MissingReference(e.reference.clone()))?;
    let rows = e
        .rows
        .iter()
        .map(|r| {
            Ok(EnergyRow {
                label: r.label.clone(),
                frequency_per_watt: r.frequency_per_watt,
                ratio: efficiency_ratio(r.frequency_per_watt, reference.frequency_per_watt)?,
            })
        })
        .collect::<Result<Vec<_>, LabError>>()?;
    let first = rows.first().ok_or(LabError::EmptySampleSet)?;
    let derived = 1e6 / (2.0 * first.frequency_per_watt);

    Ok(TablesReport {
        breakdown: BreakdownTable {
            title: b.title.clone(),
            reference: b.reference.clone(),
            layers: b.layers.clone(),
            columns,
        },
        isochrony: comparison(&inputs.isochrony)?,
        ip_cores: comparison(&inputs.ip_cores)?,
        energy: EnergyTable {
            title: e.title.clone(),
            reference: e.reference.clone(),
            rows,
            printed_energy_per_message_uj: e.energy_per_message_uj.clone(),
            derived_energy_per_message_uj: derived,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_inputs_reproduce() {
        let t = reproduce(&PublishedInputs::bundled()).unwrap();
        let totals: Vec<_> = t
            .breakdown
            .columns
            .iter()
            .map(|c| (c.total.to_string(), c.speedup, c.warning.is_some()))
            .collect();
        assert_eq!(
            totals,
            vec![
                ("5.000".to_string(), 1, false),
                ("1044.000".to_string(), 208, false),
                ("314.000".to_string(), 62, false),
                ("367.000".to_string(), 73, true),
            ]
        );
        let iso: Vec<_> = t
            .isochrony
            .rows
            .iter()
            .map(|r| (r.mean_ratio, r.max_ratio))
            .collect();
        assert_eq!(
            iso,
            vec![
                (1, Some(1)),
                (208, Some(30613)),
                (62, Some(2069)),
                (73, Some(9979)),
                (75, Some(502))
            ]
        );
        let cores: Vec<_> = t.ip_cores.rows.iter().map(|r| r.mean_ratio).collect();
        assert_eq!(cores, vec![1, 180, 40000]);
        assert_eq!(t.energy.rows[0].ratio, 543);
        assert_eq!(t.energy.rows[1].ratio, 1);
        assert!((t.energy.derived_energy_per_message_uj - 1.775).abs() < 0.001);
    }
}
