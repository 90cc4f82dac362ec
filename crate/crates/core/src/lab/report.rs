//! Report assembly and rendering.
//!
//! Reports are plain serde structs whose field order is the declaration
//! order, so JSON and CSV output is stable. Microsecond values are
//! [`Micros`], which always render with three decimals.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{BenchConfig, TransportKind};
use super::harness::SampleSet;
use super::published::TablesReport;
use super::stats::{HistogramBucket, LatencyStats};
use super::tables::{stage_total, ComparisonRow, ConsistencyWarning};
use super::LabError;
use crate::ros2::LayerTotals;
use crate::transport::{ClockRate, Stage, StageLatencyModel};
use crate::units::Micros;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
    Text,
}

impl FromStr for ReportFormat {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "text" => Ok(ReportFormat::Text),
            other => Err(LabError::InvalidConfig(format!("unknown format {other:?}"))),
        }
    }
}

fn us_from_f64_ns(ns: f64) -> Micros {
    Micros::from_ns(ns.round() as u64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub transport: TransportKind,
    pub started_unix_ns: u64,
    pub finished_unix_ns: u64,
    pub measured: u64,
    pub warmup_discarded: u64,
    pub dropped: u64,
    pub stale: u64,
    pub lost: u64,
}

/// [`LatencyStats`] in microseconds, rounded to the nearest nanosecond.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub count: u64,
    pub mean: Micros,
    pub min: Micros,
    pub p50: Micros,
    pub p99: Micros,
    pub p999: Micros,
    pub max: Micros,
    pub stddev: Micros,
}

impl From<&LatencyStats> for LatencySummary {
    fn from(s: &LatencyStats) -> Self {
        LatencySummary {
            count: s.count,
            mean: us_from_f64_ns(s.mean),
            min: Micros::from_ns(s.min),
            p50: Micros::from_ns(s.p50),
            p99: Micros::from_ns(s.p99),
            p999: Micros::from_ns(s.p999),
            max: Micros::from_ns(s.max),
            stddev: us_from_f64_ns(s.stddev),
        }
    }
}

/// Mean time spent in one layer per message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerRow {
    pub layer: String,
    pub publish: Micros,
    pub receive: Micros,
}

fn layer_rows(publish: &LayerTotals, receive: &LayerTotals) -> Vec<LayerRow> {
    let (p, r) = (publish.mean_ns(), receive.mean_ns());
    Stage::ALL
        .iter()
        .enumerate()
        .map(|(i, s)| LayerRow {
            layer: s.label().to_string(),
            publish: us_from_f64_ns(p[i]),
            receive: us_from_f64_ns(r[i]),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PingReport {
    pub config: BenchConfig,
    pub run: RunSummary,
    pub latency_us: LatencySummary,
    pub layers_us: Vec<LayerRow>,
    pub bucket_width_ns: u64,
    pub histogram: Vec<HistogramBucket>,
}

impl PingReport {
    pub fn new(set: &SampleSet, stats: &LatencyStats) -> Self {
        PingReport {
            config: set.config.clone(),
            run: RunSummary {
                transport: set.config.transport,
                started_unix_ns: set.started_unix_ns,
                finished_unix_ns: set.finished_unix_ns,
                measured: set.samples.len() as u64,
                warmup_discarded: set.warmup_discarded,
                dropped: set.dropped,
                stale: set.stale,
                lost: set.lost,
            },
            latency_us: stats.into(),
            layers_us: layer_rows(&set.layers.publish, &set.layers.receive),
            bucket_width_ns: stats.bucket_width_ns,
            histogram: stats.histogram.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelStageRow {
    pub stage: String,
    pub round_trip: Micros,
    pub one_way_ps: u64,
    pub cycles: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelReport {
    pub clock_mhz: ClockRate,
    pub stages: Vec<ModelStageRow>,
    /// Exact sum of the round-trip rows.
    pub stage_total: Micros,
    pub one_way_cycles: u64,
    pub one_way: Micros,
    pub round_trip: Micros,
}

impl ModelReport {
    pub fn new(round_trip_rows: [Micros; 3], clock: ClockRate) -> Self {
        let model = StageLatencyModel::from_round_trip(round_trip_rows, clock);
        ModelReport {
            clock_mhz: clock,
            stages: Stage::ALL
                .iter()
                .zip(round_trip_rows)
                .map(|(s, rt)| ModelStageRow {
                    stage: s.label().to_string(),
                    round_trip: rt,
                    one_way_ps: model.stage_ps(*s),
                    cycles: model.stage_cycles(*s),
                })
                .collect(),
            stage_total: stage_total(&round_trip_rows, None).total,
            one_way_cycles: model.one_way_cycles(),
            one_way: Micros::from_ns(model.one_way_ns()),
            round_trip: Micros::from_ns(model.round_trip_ns()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Report {
    Ping(PingReport),
    Model(ModelReport),
    Tables(TablesReport),
}

pub fn emit_report(report: &Report, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => match report {
            Report::Ping(r) => ping_csv(r),
            Report::Model(r) => model_csv(r),
            Report::Tables(r) => tables_csv(r),
        },
        ReportFormat::Text => match report {
            Report::Ping(r) => ping_text(r),
            Report::Model(r) => model_text(r),
            Report::Tables(r) => tables_text(r),
        },
    }
}

pub fn read_report_json(text: &str) -> Result<Report, LabError> {
    serde_json::from_str(text).map_err(|e| LabError::InvalidReport(e.to_string()))
}

fn to_csv<R: Serialize>(rows: impl IntoIterator<Item = R>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// `label,mean_us,max_us,mean_ratio,max_ratio`, one line per row.
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    if rows.is_empty() {
        return "label,mean_us,max_us,mean_ratio,max_ratio\n".to_string();
    }
    to_csv(rows)
}

/// `bucket_start_ns,count` for external plotting.
pub fn histogram_csv(histogram: &[HistogramBucket]) -> String {
    let mut out = String::from("bucket_start_ns,count\n");
    for b in histogram {
        let _ = writeln!(out, "{},{}", b.start_ns, b.count);
    }
    out
}

fn ping_csv(r: &PingReport) -> String {
    let l = &r.latency_us;
    let mut out = String::from(
        "transport,measured,warmup_discarded,dropped,stale,lost,\
         mean_us,min_us,p50_us,p99_us,p999_us,max_us,stddev_us\n",
    );
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.run.transport,
        r.run.measured,
        r.run.warmup_discarded,
        r.run.dropped,
        r.run.stale,
        r.run.lost,
        l.mean,
        l.min,
        l.p50,
        l.p99,
        l.p999,
        l.max,
        l.stddev
    );
    out
}

fn model_csv(r: &ModelReport) -> String {
    let mut out = String::from("stage,round_trip_us,one_way_ps,cycles\n");
    for s in &r.stages {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            s.stage, s.round_trip, s.one_way_ps, s.cycles
        );
    }
    let _ = writeln!(
        out,
        "total,{},{},{}",
        r.stage_total,
        r.stages.iter().map(|s| s.one_way_ps).sum::<u64>(),
        r.one_way_cycles
    );
    out
}

#[derive(Serialize)]
struct TablesCsvRow<'a> {
    table: &'a str,
    label: &'a str,
    mean_us: Option<Micros>,
    max_us: Option<Micros>,
    mean_ratio: Option<u64>,
    max_ratio: Option<u64>,
    frequency_per_watt: Option<f64>,
}

fn tables_csv(r: &TablesReport) -> String {
    let mut rows = Vec::new();
    for c in &r.breakdown.columns {
        rows.push(TablesCsvRow {
            table: "breakdown",
            label: &c.label,
            mean_us: Some(c.total),
            max_us: None,
            mean_ratio: Some(c.speedup),
            max_ratio: None,
            frequency_per_watt: None,
        });
    }
    for (name, t) in [("isochrony", &r.isochrony), ("ip_cores", &r.ip_cores)] {
        for row in &t.rows {
            rows.push(TablesCsvRow {
                table: name,
                label: &row.label,
                mean_us: Some(row.mean_us),
                max_us: row.max_us,
                mean_ratio: Some(row.mean_ratio),
                max_ratio: row.max_ratio,
                frequency_per_watt: None,
            });
        }
    }
    for row in &r.energy.rows {
        rows.push(TablesCsvRow {
            table: "energy",
            label: &row.label,
            mean_us: None,
            max_us: None,
            mean_ratio: Some(row.ratio),
            max_ratio: None,
            frequency_per_watt: Some(row.frequency_per_watt),
        });
    }
    to_csv(rows)
}

/// Left-aligned columns separated by ` | `.
fn render_grid(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate().take(cols) {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = (0..cols)
            .map(|i| {
                let cell = cells.get(i).map(String::as_str).unwrap_or("");
                format!("{cell:<w$}", w = widths[i])
            })
            .collect();
        padded.join(" | ").trim_end().to_string()
    };
    let mut out = line(header);
    out.push('\n');
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&rule.join("-+-"));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

fn ratio_cell(value: Micros, ratio: u64) -> String {
    format!("{value} ({ratio}x)")
}

fn warning_line(label: &str, w: &ConsistencyWarning) -> String {
    format!("warning: {label}: {w}\n")
}

fn tables_text(r: &TablesReport) -> String {
    let mut out = String::new();

    let b = &r.breakdown;
    let _ = writeln!(out, "{}", b.title);
    let mut header = vec!["layer".to_string()];
    header.extend(b.columns.iter().map(|c| c.label.clone()));
    let mut rows: Vec<Vec<String>> = b
        .layers
        .iter()
        .map(|layer| {
            let mut row = vec![layer.clone()];
            for c in &b.columns {
                let cell = c
                    .stages
                    .iter()
                    .find(|s| &s.label == layer)
                    .map(|s| s.latency.to_string())
                    .unwrap_or_default();
                row.push(cell);
            }
            row
        })
        .collect();
    let mut total = vec!["Total in us (speedup)".to_string()];
    total.extend(b.columns.iter().map(|c| ratio_cell(c.total, c.speedup)));
    rows.push(total);
    out.push_str(&render_grid(&header, &rows));
    for c in &b.columns {
        if let Some(w) = &c.warning {
            out.push_str(&warning_line(&c.label, w));
        }
    }

    for t in [&r.isochrony, &r.ip_cores] {
        out.push('\n');
        let _ = writeln!(out, "{}", t.title);
        let mut header = vec![String::new()];
        header.extend(t.rows.iter().map(|row| row.label.clone()));
        let mut mean = vec!["Mean latency (slowdown)".to_string()];
        mean.extend(
            t.rows
                .iter()
                .map(|row| ratio_cell(row.mean_us, row.mean_ratio)),
        );
        let mut rows = vec![mean];
        if t.rows.iter().any(|row| row.max_us.is_some()) {
            let mut max = vec!["Max. latency (slowdown)".to_string()];
            max.extend(t.rows.iter().map(|row| match (row.max_us, row.max_ratio) {
                (Some(m), Some(q)) => ratio_cell(m, q),
                _ => String::new(),
            }));
            rows.push(max);
        }
        out.push_str(&render_grid(&header, &rows));
    }

    let e = &r.energy;
    out.push('\n');
    let _ = writeln!(out, "{}", e.title);
    let header = vec!["platform".to_string(), "frequency per Watt".to_string()];
    let rows: Vec<Vec<String>> = e
        .rows
        .iter()
        .map(|row| {
            vec![
                row.label.clone(),
                format!("{} ({}x)", row.frequency_per_watt, row.ratio),
            ]
        })
        .collect();
    out.push_str(&render_grid(&header, &rows));
    let _ = writeln!(
        out,
        "energy per message: {:.3} uJ (one ping plus its echo per counted exchange; expected {} uJ)",
        e.derived_energy_per_message_uj, e.printed_energy_per_message_uj
    );
    out
}

fn ping_text(r: &PingReport) -> String {
    let mut out = String::new();
    let run = &r.run;
    let _ = writeln!(
        out,
        "ping-pong over {}: {} measured, {} warmup discarded, {} dropped, {} stale, {} lost",
        run.transport, run.measured, run.warmup_discarded, run.dropped, run.stale, run.lost
    );
    let _ = write!(out, "payload padding {} bytes, ", r.config.payload_padding);
    if run.transport == TransportKind::Udp {
        let _ = write!(out, "peer {}, ", r.config.peer);
    }
    let _ = writeln!(out, "histogram bucket {} ns", r.bucket_width_ns);
    out.push('\n');
    let l = &r.latency_us;
    let header: Vec<String> = ["", "mean", "min", "p50", "p99", "p99.9", "max", "stddev"]
        .map(String::from)
        .to_vec();
    let row = vec![
        "RTT (us)".to_string(),
        l.mean.to_string(),
        l.min.to_string(),
        l.p50.to_string(),
        l.p99.to_string(),
        l.p999.to_string(),
        l.max.to_string(),
        l.stddev.to_string(),
    ];
    out.push_str(&render_grid(&header, &[row]));
    out.push('\n');
    let header: Vec<String> = ["layer", "publish (us)", "receive (us)"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = r
        .layers_us
        .iter()
        .map(|row| {
            vec![
                row.layer.clone(),
                row.publish.to_string(),
                row.receive.to_string(),
            ]
        })
        .collect();
    out.push_str(&render_grid(&header, &rows));
    out
}

fn model_text(r: &ModelReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "stage latency model at {} MHz", r.clock_mhz);
    let header: Vec<String> = ["stage", "round trip (us)", "one way (ps)", "cycles"]
        .map(String::from)
        .to_vec();
    let mut rows: Vec<Vec<String>> = r
        .stages
        .iter()
        .map(|s| {
            vec![
                s.stage.clone(),
                s.round_trip.to_string(),
                s.one_way_ps.to_string(),
                s.cycles.to_string(),
            ]
        })
        .collect();
    rows.push(vec![
        "total".to_string(),
        r.stage_total.to_string(),
        String::new(),
        r.one_way_cycles.to_string(),
    ]);
    out.push_str(&render_grid(&header, &rows));
    let _ = writeln!(out, "one way: {} us", r.one_way);
    let _ = writeln!(out, "round trip: {} us", r.round_trip);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::published::{reproduce, PublishedInputs};
    use crate::lab::{compute_stats, run_pingpong};

    fn tables() -> Report {
        Report::Tables(reproduce(&PublishedInputs::bundled()).unwrap())
    }

    fn ping() -> Report {
        let config = BenchConfig {
            sample_count: 20,
            warmup_count: 2,
            transport: TransportKind::Virtual,
            ..BenchConfig::default()
        };
        let mut set = run_pingpong(&config).unwrap();
        set.started_unix_ns = 1;
        set.finished_unix_ns = 2;
        // layer timings are host measurements even on the virtual transport
        set.layers = Default::default();
        let stats = compute_stats(&set.samples, config.histogram_bucket_ns).unwrap();
        Report::Ping(PingReport::new(&set, &stats))
    }

    #[test]
    fn deterministic_output() {
        for format in [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Text] {
            assert_eq!(
                emit_report(&tables(), format),
                emit_report(&tables(), format)
            );
            assert_eq!(emit_report(&ping(), format), emit_report(&ping(), format));
        }
    }

    #[test]
    fn json_roundtrip() {
        for report in [
            tables(),
            ping(),
            Report::Model(ModelReport::new(
                BenchConfig::default().stages,
                ClockRate::from_mhz(156).unwrap(),
            )),
        ] {
            let text = emit_report(&report, ReportFormat::Json);
            assert_eq!(read_report_json(&text).unwrap(), report);
        }
    }

    #[test]
    fn comparison_csv_shape() {
        let Report::Tables(t) = tables() else {
            unreachable!()
        };
        let csv = comparison_csv(&t.isochrony.rows);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + t.isochrony.rows.len());
        assert_eq!(lines[0], "label,mean_us,max_us,mean_ratio,max_ratio");
        assert_eq!(lines[2], "ROS 2 + DDS1,1044.000,336750.000,208,30613");
        assert_eq!(comparison_csv(&[]).lines().count(), 1);
    }

    #[test]
    fn micros_have_three_decimals() {
        let text = emit_report(&ping(), ReportFormat::Json);
        assert!(text.contains("\"mean\": \"5.000\""), "{text}");
        let csv = emit_report(&ping(), ReportFormat::Csv);
        assert!(csv
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("virtual,20,2,0,0,0,5.000,5.000"));
    }

    #[test]
    fn text_tables_shape() {
        let text = emit_report(&tables(), ReportFormat::Text);
        assert!(text.contains("Total in us (speedup)"));
        assert!(text.contains("5.000 (1x)"));
        assert!(text.contains("1044.000 (208x)"));
        assert!(text.contains("367.000 (73x)"));
        assert!(text.contains("warning: ROS 2 + DDS3: stage rows sum to 367.000 us but the expected total is 369.000 us"));
        assert!(text.contains("336750.000 (30613x)"));
        assert!(text.contains("281690 (543x)"));
        assert!(text.contains("energy per message: 1.775 uJ"));
    }

    #[test]
    fn model_report() {
        let r = ModelReport::new(
            BenchConfig::default().stages,
            ClockRate::from_mhz(156).unwrap(),
        );
        let cycles: Vec<_> = r.stages.iter().map(|s| s.cycles).collect();
        assert_eq!(cycles, vec![55, 179, 156]);
        assert_eq!(r.one_way_cycles, 390);
        assert_eq!(r.stage_total.to_string(), "5.000");
        assert_eq!(r.round_trip.to_string(), "5.000");
        assert_eq!(r.one_way.to_string(), "2.500");
    }

    #[test]
    fn histogram_export() {
        let h = [
            HistogramBucket {
                start_ns: 0,
                count: 3,
            },
            HistogramBucket {
                start_ns: 100,
                count: 1,
            },
        ];
        assert_eq!(histogram_csv(&h), "bucket_start_ns,count\n0,3\n100,1\n");
    }
}
