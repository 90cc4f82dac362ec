use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use rtpslab::lab::{
    compute_stats, emit_report, histogram_csv, read_report_json, reproduce, run_echo, run_pingpong,
    BenchConfig, ModelReport, PingReport, PublishedInputs, Report, ReportFormat, TransportKind,
};
use rtpslab::{ClockRate, Locator, Micros};

/// Ping-pong latency laboratory for a modeled ROS 2 / RTPS datapath.
#[derive(Debug, Parser)]
#[command(name = "rtpslab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Echo every ping back to the initiator. Listens on the configured
    /// peer address and replies to the bind address, so one config file
    /// serves both sides.
    Echo {
        #[command(flatten)]
        bench: BenchArgs,
    },
    /// Run the ping-pong initiator and report RTT statistics.
    Ping {
        #[command(flatten)]
        bench: BenchArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Also write the RTT histogram as `bucket_start_ns,count` CSV.
        #[arg(long, value_name = "PATH")]
        histogram: Option<PathBuf>,
    },
    /// Evaluate the per-stage latency model: cycles, one-way and RTT.
    Model {
        #[command(flatten)]
        bench: BenchArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Regenerate the published comparison and energy tables.
    Tables {
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Re-render a JSON report in another format.
    ReportConvert {
        /// A report previously written with `--format json`.
        input: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
}

/// Overrides for [`BenchConfig`]; flags win over the config file.
#[derive(Debug, Args)]
struct BenchArgs {
    /// TOML config file; flags override its values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Measured exchanges.
    #[arg(long, value_name = "N")]
    samples: Option<u64>,
    /// Exchanges run and discarded before measuring.
    #[arg(long, value_name = "N")]
    warmup: Option<u64>,
    /// Extra payload bytes after the sequence number and timestamp.
    #[arg(long, value_name = "BYTES")]
    padding: Option<usize>,
    #[arg(long, value_name = "udp|virtual")]
    transport: Option<TransportKind>,
    /// Round-trip latency per layer in µs: udpip,rtps,ros2.
    #[arg(long, value_name = "A,B,C", value_delimiter = ',')]
    stages: Option<Vec<Micros>>,
    #[arg(long, value_name = "F")]
    clock_mhz: Option<ClockRate>,
    /// Initiator socket address.
    #[arg(long, value_name = "ADDR:PORT")]
    bind: Option<Locator>,
    /// Echo socket address.
    #[arg(long, value_name = "ADDR:PORT")]
    peer: Option<Locator>,
    #[arg(long, value_name = "NS")]
    histogram_bucket_ns: Option<u64>,
    /// Per-exchange timeout.
    #[arg(long, value_name = "MS")]
    timeout_ms: Option<u64>,
    /// Give up after this many timeouts in a row.
    #[arg(long, value_name = "N")]
    max_consecutive_timeouts: Option<u32>,
    #[arg(long, value_name = "ID")]
    host_id: Option<u32>,
    /// Initial virtual time in ns.
    #[arg(long, value_name = "NS")]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_name = "json|csv|text", default_value = "text")]
    format: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl BenchArgs {
    fn resolve(&self) -> Result<BenchConfig, Failure> {
        let mut c = match &self.config {
            Some(path) => BenchConfig::load(path).map_err(|e| Failure::Usage(e.to_string()))?,
            None => BenchConfig::default(),
        };
        if let Some(v) = self.samples {
            c.sample_count = v;
        }
        if let Some(v) = self.warmup {
            c.warmup_count = v;
        }
        if let Some(v) = self.padding {
            c.payload_padding = v;
        }
        if let Some(v) = self.transport {
            c.transport = v;
        }
        if let Some(v) = &self.stages {
            c.stages = <[Micros; 3]>::try_from(v.as_slice()).map_err(|_| {
                Failure::Usage(format!("--stages takes exactly 3 values, got {}", v.len()))
            })?;
        }
        if let Some(v) = self.clock_mhz {
            c.clock_mhz = v;
        }
        if let Some(v) = self.bind {
            c.bind = v;
        }
        if let Some(v) = self.peer {
            c.peer = v;
        }
        if let Some(v) = self.histogram_bucket_ns {
            c.histogram_bucket_ns = v;
        }
        if let Some(v) = self.timeout_ms {
            c.timeout_ms = v;
        }
        if let Some(v) = self.max_consecutive_timeouts {
            c.max_consecutive_timeouts = v;
        }
        if let Some(v) = self.host_id {
            c.host_id = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        c.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(c)
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Failure::Runtime(format!("writing {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit(report: &Report, output: &OutputArgs) -> Result<(), Failure> {
    write_out(output.out.as_deref(), &emit_report(report, output.format))
}

fn run(command: Command) -> Result<(), Failure> {
    let runtime = |e: rtpslab::LabError| Failure::Runtime(e.to_string());
    match command {
        Command::Echo { bench } => {
            let config = bench.resolve()?;
            eprintln!(
                "echo listening on {}, replying to {}",
                config.peer, config.bind
            );
            match run_echo(&config) {
                Ok(never) => match never {},
                Err(e) => Err(runtime(e)),
            }
        }
        Command::Ping {
            bench,
            output,
            histogram,
        } => {
            let config = bench.resolve()?;
            let set = run_pingpong(&config).map_err(runtime)?;
            let stats = compute_stats(&set.samples, config.histogram_bucket_ns).map_err(runtime)?;
            if let Some(path) = histogram {
                write_out(Some(&path), &histogram_csv(&stats.histogram))?;
            }
            emit(&Report::Ping(PingReport::new(&set, &stats)), &output)
        }
        Command::Model { bench, output } => {
            let config = bench.resolve()?;
            emit(
                &Report::Model(ModelReport::new(config.stages, config.clock_mhz)),
                &output,
            )
        }
        Command::Tables { output } => {
            let tables = reproduce(&PublishedInputs::bundled()).map_err(runtime)?;
            emit(&Report::Tables(tables), &output)
        }
        Command::ReportConvert { input, output } => {
            let text = std::fs::read_to_string(&input)
                .map_err(|e| Failure::Usage(format!("{}: {e}", input.display())))?;
            let report = read_report_json(&text).map_err(|e| Failure::Usage(e.to_string()))?;
            emit(&report, &output)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
