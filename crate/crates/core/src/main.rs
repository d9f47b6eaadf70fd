use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use moesi_sim::generators::{Workload, WorkloadKind, WorkloadSpec, DEFAULT_REFS};
use moesi_sim::scheme::DEFAULT_COUNTER_CEILING;
use moesi_sim::sweep::{self, SweepPlan};
use moesi_sim::trace::{ReadError, TraceReader};
use moesi_sim::{run, CacheGeometry, ReportFormat, RunConfig, Scheme, SchemeConfig, SimError};

const EXIT_USAGE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_VIOLATION: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "moesi-sim", version, about = "Trace-driven MOESI coherence simulator with hybrid write policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Locks,
    Arrays,
    Server,
}

impl From<Kind> for WorkloadKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Locks => WorkloadKind::Locks,
            Kind::Arrays => WorkloadKind::Arrays,
            Kind::Server => WorkloadKind::PseudoServer,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, clap::Args)]
struct GeometryArgs {
    /// Sets per cache (power of two).
    #[arg(long, default_value_t = CacheGeometry::DEFAULT_SETS)]
    sets: usize,
    /// Ways per set.
    #[arg(long, default_value_t = CacheGeometry::DEFAULT_WAYS)]
    ways: usize,
    /// Block size in bytes (power of two).
    #[arg(long, default_value_t = CacheGeometry::DEFAULT_BLOCK_SIZE)]
    block_size: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic trace.
    Generate {
        #[arg(value_enum)]
        workload: Kind,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..=16))]
        cores: u64,
        #[arg(long, default_value_t = DEFAULT_REFS, value_parser = clap::value_parser!(u64).range(1..))]
        refs: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Arrays: elements per row.
        #[arg(long)]
        row_length: Option<u64>,
        /// Locks: bytes in each core's private range.
        #[arg(long)]
        private_bytes: Option<u64>,
        /// Server: bytes in the public section.
        #[arg(long)]
        public_bytes: Option<u64>,
        /// Server: bytes in each client's private slice.
        #[arg(long)]
        slice_bytes: Option<u64>,
    },
    /// Replay a trace and report bus traffic.
    Simulate {
        trace: PathBuf,
        /// inv | upd | threshold:<T> | adapted | sharers:<K>
        #[arg(long, value_parser = parse_scheme)]
        scheme: Scheme,
        /// Core count; inferred from the trace when omitted.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..=16))]
        cores: Option<u64>,
        /// Check coherence invariants after every reference.
        #[arg(long)]
        verify: bool,
        /// Report file; the report goes to stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[command(flatten)]
        geometry: GeometryArgs,
        #[arg(long, default_value_t = DEFAULT_COUNTER_CEILING, value_parser = clap::value_parser!(u8).range(1..))]
        counter_ceiling: u8,
        /// Count a core's own read hits toward its line counters.
        #[arg(long)]
        count_local_reads: bool,
    },
    /// Run the workload × cores × scheme matrix.
    Sweep {
        /// Plan file of `key = value` lines; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated generated workloads (locks,arrays,server).
        #[arg(long)]
        workloads: Option<String>,
        /// Comma-separated external trace files.
        #[arg(long)]
        traces: Option<String>,
        /// Comma-separated core counts.
        #[arg(long)]
        cores: Option<String>,
        /// Comma-separated schemes; `sharers:*` sweeps K from 2 to the core count.
        #[arg(long)]
        schemes: Option<String>,
        #[arg(long)]
        refs: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Keep generated traces in this directory.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
        #[arg(long)]
        verify: bool,
        /// Combined CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse::<Scheme>().map_err(|e| e.to_string())
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Failure { code: EXIT_INPUT, message: message.to_string() }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let code = match e {
            SimError::Violation { .. } => EXIT_VIOLATION,
            _ => EXIT_INPUT,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::input(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Generate {
            workload,
            cores,
            refs,
            seed,
            out,
            row_length,
            private_bytes,
            public_bytes,
            slice_bytes,
        } => {
            let mut spec = WorkloadSpec::new(workload.into(), cores as usize, refs, seed);
            match &mut spec.workload {
                Workload::Locks(p) => {
                    if let Some(v) = private_bytes {
                        p.private_bytes = v;
                    }
                }
                Workload::Arrays(p) => {
                    if let Some(v) = row_length {
                        p.row_length = v;
                    }
                }
                Workload::PseudoServer(p) => {
                    if let Some(v) = public_bytes {
                        p.public_bytes = v;
                    }
                    if let Some(v) = slice_bytes {
                        p.slice_bytes = v;
                    }
                }
            }
            spec.validate().map_err(Failure::input)?;
            let written = match &out {
                Some(path) => spec.write_trace(File::create(path)?)?,
                None => spec.write_trace(io::stdout().lock())?,
            };
            if let Some(path) = out {
                eprintln!("wrote {written} records to {}", path.display());
            }
            Ok(())
        }
        Command::Simulate {
            trace,
            scheme,
            cores,
            verify,
            report,
            format,
            geometry,
            counter_ceiling,
            count_local_reads,
        } => {
            let cores = match cores {
                Some(c) => c as usize,
                None => infer_cores(&trace)?,
            };
            let geom = CacheGeometry::new(geometry.sets, geometry.ways, geometry.block_size, cores)
                .map_err(Failure::input)?;
            let mut cfg = SchemeConfig::new(scheme)
                .with_counter_ceiling(counter_ceiling)
                .map_err(Failure::input)?;
            cfg.count_local_reads = count_local_reads;
            let reader = TraceReader::new(BufReader::new(File::open(&trace)?));
            let metrics = run(reader, geom, cfg, verify)?;

            let config = RunConfig {
                scheme: scheme.to_string(),
                num_cores: cores,
                num_sets: geom.num_sets(),
                ways: geom.ways(),
                block_size_bytes: geom.block_size_bytes(),
                counter_ceiling,
                verify,
                trace: Some(trace.display().to_string()),
            };
            let format = match format {
                Format::Json => ReportFormat::Json,
                Format::Csv => ReportFormat::Csv,
            };
            let rendered = metrics.render(&config, format);
            let t = metrics.totals();
            let summary = format!(
                "total={} read_reqs={} invalidates={} updates={} writebacks={} loads={} stores={}",
                t.transactions(),
                t.read_reqs,
                t.invalidates,
                t.updates,
                t.writebacks,
                t.loads,
                t.stores
            );
            match report {
                Some(path) => {
                    fs::write(&path, rendered)?;
                    println!("{summary}");
                }
                None => {
                    io::stdout().lock().write_all(rendered.as_bytes())?;
                    eprintln!("{summary}");
                }
            }
            Ok(())
        }
        Command::Sweep {
            config,
            workloads,
            traces,
            cores,
            schemes,
            refs,
            seed,
            trace_dir,
            verify,
            out,
        } => {
            let mut plan = match &config {
                Some(path) => SweepPlan::parse(&fs::read_to_string(path)?).map_err(Failure::input)?,
                None => SweepPlan::default(),
            };
            if traces.is_some() && workloads.is_none() && config.is_none() {
                plan.workloads.clear();
            }
            let overrides = [
                ("workloads", workloads),
                ("traces", traces),
                ("cores", cores),
                ("schemes", schemes),
                ("refs", refs.map(|v| v.to_string())),
                ("seed", seed.map(|v| v.to_string())),
            ];
            for (key, value) in overrides {
                if let Some(v) = value {
                    plan.set(key, &v).map_err(Failure::input)?;
                }
            }
            if let Some(d) = trace_dir {
                plan.trace_dir = Some(d);
            }
            if verify {
                plan.verify = true;
            }
            if let Some(o) = out {
                plan.output = Some(o);
            }

            let report = sweep::execute(&plan)?;
            let csv = report.to_csv();
            match &plan.output {
                Some(path) => fs::write(path, &csv)?,
                None => io::stdout().lock().write_all(csv.as_bytes())?,
            }
            for f in &report.failures {
                let scheme = f.scheme.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
                eprintln!("cell failed: {} cores={} scheme={}: {}", f.workload, f.cores, scheme, f.error);
            }
            if !report.failures.is_empty() {
                return Err(Failure::input(format!("{} cell(s) failed", report.failures.len())));
            }
            Ok(())
        }
    }
}

/// One more than the largest core id in the trace (1 for an empty trace).
fn infer_cores(path: &Path) -> Result<usize, Failure> {
    let mut max = 0;
    for item in TraceReader::new(BufReader::new(File::open(path)?)) {
        match item {
            Ok((_, r)) => max = max.max(r.core),
            Err(ReadError::Parse(e)) => return Err(SimError::Trace(e).into()),
            Err(e @ ReadError::Io { .. }) => return Err(Failure::input(e)),
        }
    }
    Ok(max + 1)
}
