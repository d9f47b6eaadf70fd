//! Per-core event counters and report rendering.
//!
//! The headline number of a run is the grand total of bus requests: read
//! requests plus invalidates plus updates over all cores. Writebacks are
//! tracked alongside but never enter that total.

use serde::{Deserialize, Serialize};

use crate::types::{CoreId, TxnKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Load,
    Store,
    ReadReq,
    Invalidate,
    Update,
    Writeback,
}

impl From<TxnKind> for EventKind {
    fn from(kind: TxnKind) -> Self {
        match kind {
            TxnKind::ReadReq => EventKind::ReadReq,
            TxnKind::InvalidateReq => EventKind::Invalidate,
            TxnKind::UpdateReq => EventKind::Update,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreCounts {
    pub loads: u64,
    pub stores: u64,
    pub read_reqs: u64,
    pub invalidates: u64,
    pub updates: u64,
    pub writebacks: u64,
}

impl CoreCounts {
    /// Bus requests issued by this core.
    pub fn transactions(&self) -> u64 {
        self.read_reqs + self.invalidates + self.updates
    }

    fn add(&mut self, other: &CoreCounts) {
        self.loads += other.loads;
        self.stores += other.stores;
        self.read_reqs += other.read_reqs;
        self.invalidates += other.invalidates;
        self.updates += other.updates;
        self.writebacks += other.writebacks;
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetricsTable {
    per_core: Vec<CoreCounts>,
}

impl MetricsTable {
    pub fn new(num_cores: usize) -> Self {
        MetricsTable {
            per_core: vec![CoreCounts::default(); num_cores],
        }
    }

    pub fn from_counts(per_core: Vec<CoreCounts>) -> Self {
        MetricsTable { per_core }
    }

    pub fn record(&mut self, core: CoreId, event: EventKind) {
        let c = &mut self.per_core[core];
        let slot = match event {
            EventKind::Load => &mut c.loads,
            EventKind::Store => &mut c.stores,
            EventKind::ReadReq => &mut c.read_reqs,
            EventKind::Invalidate => &mut c.invalidates,
            EventKind::Update => &mut c.updates,
            EventKind::Writeback => &mut c.writebacks,
        };
        *slot += 1;
    }

    pub fn num_cores(&self) -> usize {
        self.per_core.len()
    }

    pub fn per_core(&self) -> &[CoreCounts] {
        &self.per_core
    }

    pub fn core(&self, core: CoreId) -> &CoreCounts {
        &self.per_core[core]
    }

    /// Column sums over all cores.
    pub fn totals(&self) -> CoreCounts {
        let mut t = CoreCounts::default();
        for c in &self.per_core {
            t.add(c);
        }
        t
    }

    /// Grand total of bus requests.
    pub fn total_transactions(&self) -> u64 {
        self.totals().transactions()
    }

    pub fn render(&self, config: &RunConfig, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => self.render_json(config),
            ReportFormat::Csv => self.render_csv(),
        }
    }

    fn render_json(&self, config: &RunConfig) -> String {
        let report = JsonReport {
            config: config.clone(),
            per_core: self
                .per_core
                .iter()
                .enumerate()
                .map(|(core, c)| CoreRow {
                    core,
                    counts: *c,
                    total: c.transactions(),
                })
                .collect(),
            totals: TotalsRow {
                counts: self.totals(),
                total: self.total_transactions(),
            },
        };
        let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
        s.push('\n');
        s
    }

    fn render_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        let mut row = |label: String, c: &CoreCounts| {
            w.write_record([
                label,
                c.loads.to_string(),
                c.stores.to_string(),
                c.read_reqs.to_string(),
                c.invalidates.to_string(),
                c.updates.to_string(),
                c.writebacks.to_string(),
            ])
            .expect("in-memory write");
        };
        for (core, c) in self.per_core.iter().enumerate() {
            row(core.to_string(), c);
        }
        row("total".to_string(), &self.totals());
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    /// Parses a CSV report produced by [`MetricsTable::render`]. The `total`
    /// row must equal the column sums.
    pub fn parse_csv(text: &str) -> Result<Self, ReportParseError> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers()?.clone();
        if header.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(ReportParseError::Format(format!("unexpected header {header:?}")));
        }
        let mut per_core = Vec::new();
        let mut total = None;
        for rec in rdr.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<u64, ReportParseError> {
                rec[i]
                    .parse()
                    .map_err(|_| ReportParseError::Format(format!("bad count `{}`", &rec[i])))
            };
            let counts = CoreCounts {
                loads: num(1)?,
                stores: num(2)?,
                read_reqs: num(3)?,
                invalidates: num(4)?,
                updates: num(5)?,
                writebacks: num(6)?,
            };
            if &rec[0] == "total" {
                total = Some(counts);
            } else if rec[0].parse::<usize>().ok() == Some(per_core.len()) {
                per_core.push(counts);
            } else {
                return Err(ReportParseError::Format(format!("unexpected row label `{}`", &rec[0])));
            }
        }
        let table = MetricsTable { per_core };
        match total {
            Some(t) if t == table.totals() => Ok(table),
            Some(_) => Err(ReportParseError::Format("total row disagrees with column sums".into())),
            None => Err(ReportParseError::Format("missing total row".into())),
        }
    }

    /// Parses a JSON report, returning its config and table.
    pub fn parse_json(text: &str) -> Result<(RunConfig, Self), ReportParseError> {
        let report: JsonReport = serde_json::from_str(text)?;
        for (i, row) in report.per_core.iter().enumerate() {
            if row.core != i {
                return Err(ReportParseError::Format(format!("per_core[{i}] has core {}", row.core)));
            }
        }
        let table = MetricsTable {
            per_core: report.per_core.iter().map(|r| r.counts).collect(),
        };
        if report.totals.counts != table.totals() {
            return Err(ReportParseError::Format("totals disagree with per-core sums".into()));
        }
        Ok((report.config, table))
    }
}

pub const CSV_HEADER: [&str; 7] = [
    "core",
    "loads",
    "stores",
    "read_reqs",
    "invalidates",
    "updates",
    "writebacks",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Run parameters echoed into JSON reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scheme: String,
    pub num_cores: usize,
    pub num_sets: usize,
    pub ways: usize,
    pub block_size_bytes: u64,
    pub counter_ceiling: u8,
    pub verify: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct JsonReport {
    config: RunConfig,
    per_core: Vec<CoreRow>,
    totals: TotalsRow,
}

#[derive(Serialize, Deserialize)]
struct CoreRow {
    core: usize,
    #[serde(flatten)]
    counts: CoreCounts,
    total: u64,
}

#[derive(Serialize, Deserialize)]
struct TotalsRow {
    #[serde(flatten)]
    counts: CoreCounts,
    total: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportParseError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Format(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn config(cores: usize) -> RunConfig {
        RunConfig {
            scheme: "inv".into(),
            num_cores: cores,
            num_sets: 64,
            ways: 4,
            block_size_bytes: 64,
            counter_ceiling: 15,
            verify: false,
            trace: None,
        }
    }

    #[test]
    fn record_increments_one_counter() {
        let mut t = MetricsTable::new(4);
        t.record(2, EventKind::ReadReq);
        assert_eq!(t.core(2).read_reqs, 1);
        t.record(2, EventKind::Writeback);
        let c = t.core(2);
        assert_eq!(
            c.loads + c.stores + c.read_reqs + c.invalidates + c.updates + c.writebacks,
            2
        );
    }

    #[test]
    fn grand_total_excludes_writebacks() {
        let mut t = MetricsTable::new(2);
        t.record(0, EventKind::ReadReq);
        t.record(1, EventKind::ReadReq);
        t.record(0, EventKind::Invalidate);
        t.record(1, EventKind::Writeback);
        assert_eq!(t.total_transactions(), 3);
    }

    #[test]
    fn zero_table_csv() {
        let t = MetricsTable::new(3);
        let csv = t.render(&config(3), ReportFormat::Csv);
        assert_eq!(
            csv,
            "core,loads,stores,read_reqs,invalidates,updates,writebacks\n\
             0,0,0,0,0,0,0\n1,0,0,0,0,0,0\n2,0,0,0,0,0,0\ntotal,0,0,0,0,0,0\n"
        );
    }

    #[test]
    fn json_shape() {
        let mut t = MetricsTable::new(2);
        t.record(1, EventKind::Update);
        let v: serde_json::Value =
            serde_json::from_str(&t.render(&config(2), ReportFormat::Json)).unwrap();
        assert_eq!(v["config"]["scheme"], "inv");
        assert_eq!(v["per_core"][1]["updates"], 1);
        assert_eq!(v["per_core"][1]["total"], 1);
        assert_eq!(v["totals"]["total"], 1);
        let keys: Vec<_> = v["per_core"][0].as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 8);
    }

    #[test]
    fn parse_rejects_inconsistent_total() {
        let bad = "core,loads,stores,read_reqs,invalidates,updates,writebacks\n0,1,0,0,0,0,0\ntotal,2,0,0,0,0,0\n";
        assert!(MetricsTable::parse_csv(bad).is_err());
    }

    fn table() -> impl Strategy<Value = MetricsTable> {
        prop::collection::vec(prop::array::uniform6(0u64..1_000_000), 1..=16).prop_map(|rows| {
            MetricsTable::from_counts(
                rows.into_iter()
                    .map(|r| CoreCounts {
                        loads: r[0],
                        stores: r[1],
                        read_reqs: r[2],
                        invalidates: r[3],
                        updates: r[4],
                        writebacks: r[5],
                    })
                    .collect(),
            )
        })
    }

    proptest! {
        #[test]
        fn renderings_round_trip_and_agree(t in table()) {
            let cfg = config(t.num_cores());
            let csv = t.render(&cfg, ReportFormat::Csv);
            let json = t.render(&cfg, ReportFormat::Json);
            let from_csv = MetricsTable::parse_csv(&csv).unwrap();
            let (cfg2, from_json) = MetricsTable::parse_json(&json).unwrap();
            prop_assert_eq!(&from_csv, &t);
            prop_assert_eq!(&from_json, &t);
            prop_assert_eq!(&cfg2, &cfg);
            prop_assert_eq!(from_csv.render(&cfg, ReportFormat::Csv), csv);
            prop_assert_eq!(from_json.render(&cfg2, ReportFormat::Json), json);
        }

        #[test]
        fn totals_are_column_sums(t in table()) {
            let mut sums = [0u64; 6];
            for c in t.per_core() {
                for (s, v) in sums.iter_mut().zip([c.loads, c.stores, c.read_reqs, c.invalidates, c.updates, c.writebacks]) {
                    *s += v;
                }
            }
            let tot = t.totals();
            prop_assert_eq!(sums, [tot.loads, tot.stores, tot.read_reqs, tot.invalidates, tot.updates, tot.writebacks]);
            prop_assert_eq!(t.total_transactions(), sums[2] + sums[3] + sums[4]);
        }
    }
}
