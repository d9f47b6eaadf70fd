//! Workload × core-count × scheme experiment matrix.
//!
//! Generated workloads are written to trace files once per `(workload,
//! cores)` pair and every scheme replays that same file, so all schemes in a
//! cell group see an identical reference stream. Cells run in parallel and
//! are independent; the combined report is sorted, so neither the order of
//! the plan's axes nor the degree of parallelism changes the output.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::engine::run;
use crate::error::{ConfigError, SimError};
use crate::generators::{Workload, WorkloadKind, WorkloadSpec, DEFAULT_REFS};
use crate::metrics::MetricsTable;
use crate::scheme::{Scheme, SchemeConfig};
use crate::trace::TraceReader;
use crate::types::{CacheGeometry, MAX_CORES};

/// Where a workload's references come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WorkloadSource {
    /// Synthesized per core count with the plan's `refs` and `seed`.
    Generated(Workload),
    /// An existing trace file, replayed at every core count.
    External(PathBuf),
}

impl WorkloadSource {
    pub fn name(&self) -> String {
        match self {
            WorkloadSource::Generated(w) => w.kind().name().to_string(),
            WorkloadSource::External(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
        }
    }
}

/// One entry on the scheme axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeAxis {
    Fixed(Scheme),
    /// `sharers:*`: every minimum-sharer count from 2 to the cell's core count.
    SharersRange,
}

impl SchemeAxis {
    pub fn expand(self, cores: usize) -> Vec<Scheme> {
        match self {
            SchemeAxis::Fixed(s) => vec![s],
            SchemeAxis::SharersRange => (2..=cores as u32)
                .map(|k| Scheme::NumSharers { min_sharers: k })
                .collect(),
        }
    }
}

impl FromStr for SchemeAxis {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "sharers:*" {
            Ok(SchemeAxis::SharersRange)
        } else {
            s.parse().map(SchemeAxis::Fixed)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepPlan {
    pub workloads: Vec<WorkloadSource>,
    pub core_counts: Vec<usize>,
    pub schemes: Vec<SchemeAxis>,
    pub refs: u64,
    pub seed: u64,
    pub num_sets: usize,
    pub ways: usize,
    pub block_size: u64,
    pub counter_ceiling: u8,
    pub verify: bool,
    /// Keep generated traces here; a temporary directory is used otherwise.
    pub trace_dir: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for SweepPlan {
    fn default() -> Self {
        SweepPlan {
            workloads: WorkloadKind::ALL
                .iter()
                .map(|&k| WorkloadSource::Generated(Workload::default_for(k)))
                .collect(),
            core_counts: vec![2, 4, 8, 16],
            schemes: default_schemes(),
            refs: DEFAULT_REFS,
            seed: 1,
            num_sets: CacheGeometry::DEFAULT_SETS,
            ways: CacheGeometry::DEFAULT_WAYS,
            block_size: CacheGeometry::DEFAULT_BLOCK_SIZE,
            counter_ceiling: crate::scheme::DEFAULT_COUNTER_CEILING,
            verify: false,
            trace_dir: None,
            output: None,
        }
    }
}

/// inv, upd, threshold:1..=3, adapted, sharers:2..=cores.
pub fn default_schemes() -> Vec<SchemeAxis> {
    let mut v = vec![
        SchemeAxis::Fixed(Scheme::InvalidateOnly),
        SchemeAxis::Fixed(Scheme::UpdateOnly),
    ];
    v.extend((1..=3).map(|t| SchemeAxis::Fixed(Scheme::Threshold { threshold: t })));
    v.push(SchemeAxis::Fixed(Scheme::AdaptedMoesi));
    v.push(SchemeAxis::SharersRange);
    v
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

impl SweepPlan {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Plan(m.to_string()));
        if self.workloads.is_empty() {
            return bad("no workloads");
        }
        if self.core_counts.is_empty() {
            return bad("no core counts");
        }
        if self.schemes.is_empty() {
            return bad("no schemes");
        }
        if let Some(c) = self.core_counts.iter().find(|c| !(1..=MAX_CORES).contains(c)) {
            return Err(ConfigError::Plan(format!("core count {c} outside 1..={MAX_CORES}")));
        }
        if self.refs == 0 {
            return bad("refs must be positive");
        }
        CacheGeometry::new(self.num_sets, self.ways, self.block_size, 1)?;
        SchemeConfig::new(Scheme::InvalidateOnly).with_counter_ceiling(self.counter_ceiling)?;
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let plan_err = |m: String| ConfigError::Plan(m);
        let num = |v: &str| -> Result<u64, ConfigError> {
            v.parse().map_err(|_| plan_err(format!("`{key}` expects an integer, got `{v}`")))
        };
        match key {
            "workloads" => {
                let generated = split_list(value)
                    .map(|w| w.parse::<WorkloadKind>().map(|k| WorkloadSource::Generated(Workload::default_for(k))))
                    .collect::<Result<Vec<_>, _>>()?;
                self.workloads.retain(|w| matches!(w, WorkloadSource::External(_)));
                self.workloads.extend(generated);
            }
            "traces" => {
                self.workloads.retain(|w| matches!(w, WorkloadSource::Generated(_)));
                self.workloads
                    .extend(split_list(value).map(|p| WorkloadSource::External(PathBuf::from(p))));
            }
            "cores" => {
                self.core_counts = split_list(value)
                    .map(|c| num(c).map(|c| c as usize))
                    .collect::<Result<_, _>>()?;
            }
            "schemes" => {
                self.schemes = split_list(value).map(str::parse).collect::<Result<_, _>>()?;
            }
            "refs" => self.refs = num(value)?,
            "seed" => self.seed = num(value)?,
            "sets" => self.num_sets = num(value)? as usize,
            "ways" => self.ways = num(value)? as usize,
            "block_size" => self.block_size = num(value)?,
            "counter_ceiling" => {
                self.counter_ceiling = u8::try_from(num(value)?)
                    .map_err(|_| plan_err("counter_ceiling must fit in 8 bits".into()))?
            }
            "verify" => {
                self.verify = value
                    .parse()
                    .map_err(|_| plan_err(format!("`verify` expects true or false, got `{value}`")))?
            }
            "trace_dir" => self.trace_dir = Some(PathBuf::from(value)),
            "out" | "output" => self.output = Some(PathBuf::from(value)),
            "row_length" | "private_bytes" | "public_bytes" | "slice_bytes" => {
                let v = num(value)?;
                for w in &mut self.workloads {
                    match (key, w) {
                        ("row_length", WorkloadSource::Generated(Workload::Arrays(p))) => p.row_length = v,
                        ("private_bytes", WorkloadSource::Generated(Workload::Locks(p))) => p.private_bytes = v,
                        ("public_bytes", WorkloadSource::Generated(Workload::PseudoServer(p))) => p.public_bytes = v,
                        ("slice_bytes", WorkloadSource::Generated(Workload::PseudoServer(p))) => p.slice_bytes = v,
                        _ => {}
                    }
                }
            }
            other => return Err(plan_err(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses a plan file of `key = value` lines on top of the defaults.
    /// `#` starts a comment. Keys are applied in file order.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut plan = SweepPlan::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                ConfigError::Plan(format!("line {}: expected `key = value`", i + 1))
            })?;
            plan.set(k.trim(), v.trim())
                .map_err(|e| ConfigError::Plan(format!("line {}: {e}", i + 1)))?;
        }
        Ok(plan)
    }
}

/// One result row of the combined report.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SweepRow {
    pub workload: String,
    pub cores: usize,
    pub scheme: Scheme,
    pub read_reqs: u64,
    pub invalidates: u64,
    pub updates: u64,
    pub total: u64,
}

impl SweepRow {
    fn new(workload: String, cores: usize, scheme: Scheme, m: &MetricsTable) -> Self {
        let t = m.totals();
        SweepRow {
            workload,
            cores,
            scheme,
            read_reqs: t.read_reqs,
            invalidates: t.invalidates,
            updates: t.updates,
            total: t.transactions(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct CellFailure {
    pub workload: String,
    pub cores: usize,
    /// `None` when the trace could not be produced at all.
    pub scheme: Option<Scheme>,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<CellFailure>,
}

pub const SWEEP_CSV_HEADER: &str = "workload,cores,scheme,param,read_reqs,invalidates,updates,total";

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(SWEEP_CSV_HEADER.split(',')).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.workload.clone(),
                r.cores.to_string(),
                r.scheme.name().to_string(),
                r.scheme.param().map(|p| p.to_string()).unwrap_or_default(),
                r.read_reqs.to_string(),
                r.invalidates.to_string(),
                r.updates.to_string(),
                r.total.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    /// The row for a given cell, if it ran.
    pub fn row(&self, workload: &str, cores: usize, scheme: Scheme) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.workload == workload && r.cores == cores && r.scheme == scheme)
    }
}

struct TraceGroup {
    workload: String,
    cores: usize,
    path: Result<PathBuf, String>,
}

struct ScratchDir {
    path: PathBuf,
    remove: bool,
}

impl Drop for ScratchDir {
    fn drop(&mut self) {
        if self.remove {
            let _ = fs::remove_dir_all(&self.path);
        }
    }
}

fn scratch_dir(plan: &SweepPlan) -> std::io::Result<ScratchDir> {
    match &plan.trace_dir {
        Some(p) => {
            fs::create_dir_all(p)?;
            Ok(ScratchDir { path: p.clone(), remove: false })
        }
        None => {
            let nanos = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_nanos())
                .unwrap_or(0);
            let path = std::env::temp_dir().join(format!("moesi-sim-{}-{nanos}", std::process::id()));
            fs::create_dir_all(&path)?;
            Ok(ScratchDir { path, remove: true })
        }
    }
}

fn simulate_file(path: &Path, geometry: CacheGeometry, scheme: SchemeConfig, verify: bool) -> Result<MetricsTable, SimError> {
    let reader = TraceReader::new(BufReader::new(File::open(path)?));
    run(reader, geometry, scheme, verify)
}

/// Runs every cell of `plan`. Failing cells are reported in
/// [`SweepReport::failures`] while the rest still run.
pub fn execute(plan: &SweepPlan) -> Result<SweepReport, SimError> {
    plan.validate()?;
    let scratch = scratch_dir(plan)?;

    let mut pairs = Vec::new();
    for w in &plan.workloads {
        for &cores in &plan.core_counts {
            pairs.push((w, cores));
        }
    }
    let groups: Vec<TraceGroup> = pairs
        .par_iter()
        .map(|&(w, cores)| {
            let name = w.name();
            let path = match w {
                WorkloadSource::External(p) => Ok(p.clone()),
                WorkloadSource::Generated(workload) => {
                    let spec = WorkloadSpec {
                        workload: *workload,
                        num_cores: cores,
                        num_refs: plan.refs,
                        seed: plan.seed,
                    };
                    let path = scratch.path.join(format!("{name}-{cores}c-{}r-s{}.trace", plan.refs, plan.seed));
                    File::create(&path)
                        .and_then(|f| spec.write_trace(f))
                        .map(|_| path)
                        .map_err(|e| e.to_string())
                }
            };
            TraceGroup { workload: name, cores, path }
        })
        .collect();

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        match &g.path {
            Err(e) => failures.push(CellFailure {
                workload: g.workload.clone(),
                cores: g.cores,
                scheme: None,
                error: e.clone(),
            }),
            Ok(_) => {
                for axis in &plan.schemes {
                    for scheme in axis.expand(g.cores) {
                        cells.push((gi, scheme));
                    }
                }
            }
        }
    }
    cells.sort_unstable_by_key(|&(gi, s)| (gi, s));
    cells.dedup();

    let results: Vec<Result<SweepRow, CellFailure>> = cells
        .par_iter()
        .map(|&(gi, scheme)| {
            let g = &groups[gi];
            let path = g.path.as_ref().expect("only traced groups have cells");
            let fail = |e: String| CellFailure {
                workload: g.workload.clone(),
                cores: g.cores,
                scheme: Some(scheme),
                error: e,
            };
            let geometry = CacheGeometry::new(plan.num_sets, plan.ways, plan.block_size, g.cores)
                .map_err(|e| fail(e.to_string()))?;
            let cfg = SchemeConfig::new(scheme)
                .with_counter_ceiling(plan.counter_ceiling)
                .map_err(|e| fail(e.to_string()))?;
            simulate_file(path, geometry, cfg, plan.verify)
                .map(|m| SweepRow::new(g.workload.clone(), g.cores, scheme, &m))
                .map_err(|e| fail(e.to_string()))
        })
        .collect();

    let mut rows = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(f) => failures.push(f),
        }
    }
    rows.sort();
    failures.sort();
    Ok(SweepReport { rows, failures })
}
