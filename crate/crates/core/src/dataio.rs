//! Flow datasets: CSV ingestion, the synthetic UAV traffic generator, and
//! the binarize / balance / split steps of the benchmark protocol.
//!
//! Canonical CSV column order:
//! `flow_id,label,t_first,t_last,bytes_fwd,bytes_bwd,total_bytes,total_packets,packet_times,packet_sizes`
//! with per-packet lists joined by `;` and absent values left empty.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowfeat::{FlowClass, FlowRecord};
use crate::util::{derive_seed, sha256_hex};

pub const CANONICAL_COLUMNS: [&str; 10] =
    ["flow_id", "label", "t_first", "t_last", "bytes_fwd", "bytes_bwd", "total_bytes", "total_packets", "packet_times", "packet_sizes"];

const LIST_SEP: char = ';';
const MAX_DIAGNOSTICS: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    Ingested { path: String, rows: usize, skipped: usize },
    Synthetic { seed: u64, config_hash: String },
    Binarized,
    Balanced { strategy: BalanceStrategy, seed: u64 },
    Subset { part: String, ratio: f64, seed: u64, size: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<FlowRecord>,
    /// Set once labels are read as Normal = -1 / attack = +1. Original
    /// classes stay on the records.
    binary: bool,
    provenance: Vec<Provenance>,
}

impl Dataset {
    pub fn new(records: Vec<FlowRecord>, provenance: Provenance) -> Self {
        Dataset { records, binary: false, provenance: vec![provenance] }
    }

    pub fn records(&self) -> &[FlowRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn class_counts(&self) -> BTreeMap<FlowClass, usize> {
        let mut m = BTreeMap::new();
        for r in &self.records {
            *m.entry(r.label).or_insert(0) += 1;
        }
        m
    }

    /// Binary labels (Normal -1, attack +1) regardless of the binary flag.
    pub fn labels(&self) -> Vec<i8> {
        self.records.iter().map(|r| r.label.binary()).collect()
    }

    /// (positives, negatives) under the binary map.
    pub fn binary_counts(&self) -> (usize, usize) {
        let pos = self.records.iter().filter(|r| r.label.binary() > 0).count();
        (pos, self.records.len() - pos)
    }

    fn derived(&self, indices: &[usize], step: Provenance) -> Dataset {
        let mut provenance = self.provenance.clone();
        provenance.push(step);
        Dataset { records: indices.iter().map(|&i| self.records[i].clone()).collect(), binary: self.binary, provenance }
    }

    pub fn subset(&self, indices: &[usize], part: &str, ratio: f64, seed: u64) -> Dataset {
        self.derived(indices, Provenance::Subset { part: part.into(), ratio, seed, size: indices.len() })
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CANONICAL_COLUMNS)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let list =
            |v: &Option<Vec<f64>>| v.as_ref().map(|xs| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(&LIST_SEP.to_string())).unwrap_or_default();
        for (i, r) in self.records.iter().enumerate() {
            w.write_record([
                i.to_string(),
                r.label.name().to_string(),
                r.t_first.to_string(),
                r.t_last.to_string(),
                opt(r.bytes_fwd),
                opt(r.bytes_bwd),
                r.total_bytes.to_string(),
                r.total_packets.to_string(),
                list(&r.packet_times),
                list(&r.packet_sizes),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn provenance_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            records: usize,
            binary: bool,
            class_counts: BTreeMap<FlowClass, usize>,
            provenance: &'a [Provenance],
        }
        Ok(serde_json::to_string_pretty(&Sidecar {
            records: self.len(),
            binary: self.binary,
            class_counts: self.class_counts(),
            provenance: &self.provenance,
        })?)
    }
}

/// Logical field -> CSV header name. Missing keys fall back to the
/// canonical names; a header that is absent from the file simply leaves the
/// optional field unset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub label: String,
    pub t_first: String,
    pub t_last: String,
    /// Used when `t_first` / `t_last` are unavailable: the flow is placed at t = 0.
    pub duration: String,
    pub total_packets: String,
    pub total_bytes: String,
    pub bytes_fwd: String,
    pub bytes_bwd: String,
    pub packet_times: String,
    pub packet_sizes: String,
    pub iat_cv: String,
    pub jitter: String,
    pub pmr: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            label: "label".into(),
            t_first: "t_first".into(),
            t_last: "t_last".into(),
            duration: "duration".into(),
            total_packets: "total_packets".into(),
            total_bytes: "total_bytes".into(),
            bytes_fwd: "bytes_fwd".into(),
            bytes_bwd: "bytes_bwd".into(),
            packet_times: "packet_times".into(),
            packet_sizes: "packet_sizes".into(),
            iat_cv: "iat_cv".into(),
            jitter: "jitter".into(),
            pmr: "pmr".into(),
        }
    }
}

impl ColumnMap {
    pub fn from_json(text: &str) -> Result<ColumnMap> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: usize,
    pub skipped: usize,
    /// First few skip reasons, `row N: reason`.
    pub diagnostics: Vec<String>,
    /// Optional logical fields with no matching header.
    pub unmapped: Vec<String>,
}

struct Columns {
    label: usize,
    times: TimeCols,
    total_packets: usize,
    total_bytes: usize,
    bytes_fwd: Option<usize>,
    bytes_bwd: Option<usize>,
    packet_times: Option<usize>,
    packet_sizes: Option<usize>,
    iat_cv: Option<usize>,
    jitter: Option<usize>,
    pmr: Option<usize>,
}

enum TimeCols {
    Span(usize, usize),
    Duration(usize),
}

fn parse_num(field: &str, cell: &str) -> std::result::Result<f64, String> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| format!("non-numeric {field} {cell:?}"))
}

fn parse_opt(field: &str, cell: Option<&str>) -> std::result::Result<Option<f64>, String> {
    match cell.map(str::trim) {
        None | Some("") => Ok(None),
        Some(c) => parse_num(field, c).map(Some),
    }
}

fn parse_list(field: &str, cell: Option<&str>) -> std::result::Result<Option<Vec<f64>>, String> {
    match cell.map(str::trim) {
        None | Some("") => Ok(None),
        Some(c) => c.split(LIST_SEP).map(|p| parse_num(field, p)).collect::<std::result::Result<_, _>>().map(Some),
    }
}

fn parse_row(rec: &csv::StringRecord, cols: &Columns) -> std::result::Result<FlowRecord, String> {
    let get = |i: usize| rec.get(i).unwrap_or("");
    let opt = |i: Option<usize>| i.and_then(|i| rec.get(i));
    let label_cell = get(cols.label);
    let label = FlowClass::parse(label_cell).ok_or_else(|| format!("unknown label {label_cell:?}"))?;
    let (t_first, t_last) = match cols.times {
        TimeCols::Span(a, b) => (parse_num("t_first", get(a))?, parse_num("t_last", get(b))?),
        TimeCols::Duration(d) => (0.0, parse_num("duration", get(d))?),
    };
    let packets = parse_num("total_packets", get(cols.total_packets))?;
    if packets < 0.0 || packets.fract() != 0.0 {
        return Err(format!("total_packets {packets} is not a count"));
    }
    let mut flow = FlowRecord::aggregate(t_first, t_last, packets as u64, parse_num("total_bytes", get(cols.total_bytes))?, label);
    flow.bytes_fwd = parse_opt("bytes_fwd", opt(cols.bytes_fwd))?;
    flow.bytes_bwd = parse_opt("bytes_bwd", opt(cols.bytes_bwd))?;
    flow.packet_times = parse_list("packet_times", opt(cols.packet_times))?;
    flow.packet_sizes = parse_list("packet_sizes", opt(cols.packet_sizes))?;
    flow.iat_cv = parse_opt("iat_cv", opt(cols.iat_cv))?;
    flow.jitter = parse_opt("jitter", opt(cols.jitter))?;
    flow.pmr = parse_opt("pmr", opt(cols.pmr))?;
    flow.validate().map_err(|e| e.to_string())?;
    Ok(flow)
}

/// Reads a flow CSV from any reader. `source` names the input in provenance.
pub fn ingest_reader<R: std::io::Read>(reader: R, map: &ColumnMap, source: &str) -> Result<(Dataset, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::EmptyInput("csv file"));
    }
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mut missing = Vec::new();
    let mut must = |field: &str, name: &str| {
        let idx = find(name);
        if idx.is_none() {
            missing.push(format!("{field} ({name})"));
        }
        idx.unwrap_or(0)
    };
    let label = must("label", &map.label);
    let total_packets = must("total_packets", &map.total_packets);
    let total_bytes = must("total_bytes", &map.total_bytes);
    let times = match (find(&map.t_first), find(&map.t_last), find(&map.duration)) {
        (Some(a), Some(b), _) => TimeCols::Span(a, b),
        (_, _, Some(d)) => TimeCols::Duration(d),
        _ => {
            missing.push(format!("t_first/t_last ({}/{}) or duration ({})", map.t_first, map.t_last, map.duration));
            TimeCols::Duration(0)
        }
    };
    if !missing.is_empty() {
        return Err(Error::MissingColumns(missing.join(", ")));
    }

    let mut report = IngestReport::default();
    let mut optional = |field: &str, name: &str| {
        let idx = find(name);
        if idx.is_none() {
            report.unmapped.push(field.to_string());
        }
        idx
    };
    let cols = Columns {
        label,
        times,
        total_packets,
        total_bytes,
        bytes_fwd: optional("bytes_fwd", &map.bytes_fwd),
        bytes_bwd: optional("bytes_bwd", &map.bytes_bwd),
        packet_times: optional("packet_times", &map.packet_times),
        packet_sizes: optional("packet_sizes", &map.packet_sizes),
        iat_cv: optional("iat_cv", &map.iat_cv),
        jitter: optional("jitter", &map.jitter),
        pmr: optional("pmr", &map.pmr),
    };

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        report.rows += 1;
        let parsed = row.map_err(|e| e.to_string()).and_then(|r| parse_row(&r, &cols));
        match parsed {
            Ok(f) => records.push(f),
            Err(reason) => {
                report.skipped += 1;
                if report.diagnostics.len() < MAX_DIAGNOSTICS {
                    report.diagnostics.push(format!("row {}: {reason}", i + 1));
                }
            }
        }
    }
    if report.rows == 0 {
        return Err(Error::EmptyInput("csv file"));
    }
    let ds = Dataset::new(records, Provenance::Ingested { path: source.into(), rows: report.rows, skipped: report.skipped });
    Ok((ds, report))
}

pub fn ingest_csv(path: &Path, map: &ColumnMap) -> Result<(Dataset, IngestReport)> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file, map, &path.display().to_string())
}

/// Class-conditional generative parameters. Ranges are sampled uniformly
/// per flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub count: usize,
    /// Packet-rate multiplier relative to the Normal base rate.
    pub rate_mult: (f64, f64),
    /// Fraction of bytes travelling backward.
    pub bwd_fraction: (f64, f64),
    /// Gamma shape of inter-arrival times; CV = 1/sqrt(shape).
    pub iat_shape: f64,
    /// Mean packet size multiplier.
    pub size_mult: (f64, f64),
    /// 0 = smooth arrivals, towards 1 = on/off bursts.
    pub burstiness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    /// Median packet rate of Normal flows, packets/s.
    pub base_rate: f64,
    pub rate_sigma: f64,
    /// Median flow duration target, seconds.
    pub base_duration: f64,
    pub duration_sigma: f64,
    /// Median mean packet size, bytes.
    pub base_size: f64,
    pub min_packets: u64,
    pub max_packets: u64,
    pub classes: BTreeMap<FlowClass, ClassProfile>,
}

impl Default for SynthConfig {
    /// 2,000 flows at attack prevalence 0.786.
    fn default() -> Self {
        let mut classes = BTreeMap::new();
        let p = |count, rate_mult, bwd_fraction, iat_shape, size_mult, burstiness| ClassProfile {
            count,
            rate_mult,
            bwd_fraction,
            iat_shape,
            size_mult,
            burstiness,
        };
        classes.insert(FlowClass::Normal, p(428, (0.7, 1.4), (0.25, 0.5), 4.0, (0.8, 1.25), 0.0));
        classes.insert(FlowClass::Flooding, p(393, (6.0, 12.0), (0.02, 0.2), 4.0, (0.4, 0.8), 0.9));
        classes.insert(FlowClass::Blackhole, p(393, (0.3, 0.8), (0.0, 0.03), 4.0, (0.5, 0.9), 0.0));
        classes.insert(FlowClass::Wormhole, p(393, (0.4, 0.9), (0.0, 0.06), 2.5, (0.6, 1.0), 0.2));
        classes.insert(FlowClass::Sybil, p(393, (0.5, 1.0), (0.2, 0.5), 0.2, (0.7, 1.1), 0.0));
        SynthConfig {
            seed: 7,
            base_rate: 40.0,
            rate_sigma: 0.35,
            base_duration: 2.0,
            duration_sigma: 0.4,
            base_size: 420.0,
            min_packets: 3,
            max_packets: 1500,
            classes,
        }
    }
}

impl SynthConfig {
    pub fn total(&self) -> usize {
        self.classes.values().map(|c| c.count).sum()
    }

    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.total() == 0 {
            return bad("all class counts are zero".into());
        }
        if !(self.base_rate > 0.0 && self.base_duration > 0.0 && self.base_size > 0.0) {
            return bad("base rate, duration and size must be positive".into());
        }
        if !(self.rate_sigma >= 0.0 && self.duration_sigma >= 0.0) {
            return bad("log-normal sigmas must be non-negative".into());
        }
        if self.min_packets < 1 || self.max_packets < self.min_packets {
            return bad(format!("packet bounds [{}, {}] invalid", self.min_packets, self.max_packets));
        }
        for (class, c) in &self.classes {
            let ranges = [c.rate_mult, c.bwd_fraction, c.size_mult];
            if ranges.iter().any(|(lo, hi)| !(lo <= hi) || *lo < 0.0) {
                return bad(format!("{class}: invalid range"));
            }
            if c.rate_mult.0 <= 0.0 || c.size_mult.0 <= 0.0 || c.bwd_fraction.1 > 1.0 {
                return bad(format!("{class}: range out of domain"));
            }
            if !(c.iat_shape > 0.0) || !(0.0..1.0).contains(&c.burstiness) {
                return bad(format!("{class}: iat_shape must be > 0 and burstiness in [0, 1)"));
            }
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn synth_flow(cfg: &SynthConfig, class: FlowClass, prof: &ClassProfile, rng: &mut ChaCha8Rng) -> FlowRecord {
    let rate_ln = LogNormal::new(cfg.base_rate.ln(), cfg.rate_sigma).expect("validated sigma");
    let dur_ln = LogNormal::new(cfg.base_duration.ln(), cfg.duration_sigma).expect("validated sigma");
    let rate = rate_ln.sample(rng) * uniform(rng, prof.rate_mult);
    let target = dur_ln.sample(rng);
    let n = ((rate * target).round() as u64).clamp(cfg.min_packets, cfg.max_packets);

    // gamma inter-arrivals with mean 1/rate, modulated by a sticky on/off
    // state so bursts cluster in time
    let iat = Gamma::new(prof.iat_shape, 1.0 / (prof.iat_shape * rate)).expect("validated shape");
    let (fast, slow) = (1.0 - prof.burstiness, 1.0 + prof.burstiness);
    let mut bursting = rng.random_bool(0.5);
    let start = rng.random_range(0.0..100.0);
    let mut times = Vec::with_capacity(n as usize);
    let mut t = start;
    times.push(t);
    for _ in 1..n {
        if rng.random_bool(0.05) {
            bursting = !bursting;
        }
        t += iat.sample(rng) * if bursting { fast } else { slow };
        times.push(t);
    }

    let mean_size = cfg.base_size * uniform(rng, prof.size_mult);
    let size_noise = Gamma::new(8.0, 1.0 / 8.0).expect("constant shape");
    let sizes: Vec<f64> = (0..n).map(|_| (mean_size * size_noise.sample(rng)).round().max(40.0)).collect();
    let total: f64 = sizes.iter().sum();
    let bwd = (total * uniform(rng, prof.bwd_fraction)).round();

    let mut flow = FlowRecord::aggregate(start, t, n, total, class);
    flow.bytes_fwd = Some(total - bwd);
    flow.bytes_bwd = Some(bwd);
    flow.packet_times = Some(times);
    flow.packet_sizes = Some(sizes);
    flow
}

/// Labelled synthetic flows, classes in canonical order. Each class draws
/// from its own derived stream, so classes generate independently.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let per_class: Vec<Vec<FlowRecord>> = FlowClass::ALL
        .par_iter()
        .enumerate()
        .map(|(ci, class)| match cfg.classes.get(class) {
            Some(prof) => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[ci as u64]));
                (0..prof.count).map(|_| synth_flow(cfg, *class, prof, &mut rng)).collect()
            }
            None => Vec::new(),
        })
        .collect();
    let records = per_class.into_iter().flatten().collect();
    Ok(Dataset::new(records, Provenance::Synthetic { seed: cfg.seed, config_hash: cfg.hash() }))
}

pub fn binarize(ds: &Dataset) -> Dataset {
    if ds.binary {
        return ds.clone();
    }
    let mut out = ds.clone();
    out.binary = true;
    out.provenance.push(Provenance::Binarized);
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BalanceStrategy {
    #[default]
    Undersample,
    None,
}

fn label_groups(ds: &Dataset) -> (Vec<usize>, Vec<usize>) {
    (0..ds.len()).partition(|&i| ds.records[i].label.binary() > 0)
}

/// Undersamples the majority class to the minority count. Kept records
/// stay in their original order.
pub fn balance(ds: &Dataset, strategy: BalanceStrategy, seed: u64) -> Result<Dataset> {
    if !ds.binary {
        return Err(Error::Config("balance needs a binarized dataset".into()));
    }
    let (pos, neg) = label_groups(ds);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::DegenerateLabels);
    }
    let step = Provenance::Balanced { strategy, seed };
    let keep: Vec<usize> = match strategy {
        BalanceStrategy::None => (0..ds.len()).collect(),
        BalanceStrategy::Undersample => {
            let (mut major, minor) = if pos.len() >= neg.len() { (pos, neg) } else { (neg, pos) };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            major.shuffle(&mut rng);
            major.truncate(minor.len());
            let mut keep: Vec<usize> = major.into_iter().chain(minor).collect();
            keep.sort_unstable();
            keep
        }
    };
    Ok(ds.derived(&keep, step))
}

/// Disjoint train/test index sets, stratified by binary label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    train_indices: Vec<usize>,
    test_indices: Vec<usize>,
    ratio: f64,
    seed: u64,
    len: usize,
}

impl Split {
    pub fn train_indices(&self) -> &[usize] {
        &self.train_indices
    }

    pub fn test_indices(&self) -> &[usize] {
        &self.test_indices
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Materialises both parts. The dataset must be the one the split was
    /// drawn from.
    pub fn apply(&self, ds: &Dataset) -> Result<(Dataset, Dataset)> {
        if ds.len() != self.len {
            return Err(Error::DimensionMismatch { expected: self.len, got: ds.len() });
        }
        Ok((ds.subset(&self.train_indices, "train", self.ratio, self.seed), ds.subset(&self.test_indices, "test", self.ratio, self.seed)))
    }
}

pub fn split(ds: &Dataset, ratio: f64, seed: u64) -> Result<Split> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidHyper(format!("split ratio {ratio} not in (0, 1)")));
    }
    let (pos, neg) = label_groups(ds);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (name, mut group) in [("negative", neg), ("positive", pos)] {
        if group.len() < 2 {
            return Err(Error::Config(format!("{name} class has {} member(s); need at least 2 to split", group.len())));
        }
        group.shuffle(&mut rng);
        let k = ((group.len() as f64 * ratio).round() as usize).clamp(1, group.len() - 1);
        train.extend_from_slice(&group[..k]);
        test.extend_from_slice(&group[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train_indices: train, test_indices: test, ratio, seed, len: ds.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowfeat::{extract, FeatureConfig};

    const FIXTURE: &str = "\
flow_id,label,t_first,t_last,bytes_fwd,bytes_bwd,total_bytes,total_packets,packet_times,packet_sizes
0,Normal,1.5,3.5,600,400,1000,4,1.5;2;3;3.5,250;250;250;250
1,flooding,0,0.5,900,,900,3,,
2,Sybil,10,12,,,64,1,,
";

    fn small_ds(pos: usize, neg: usize) -> Dataset {
        let mut recs = Vec::new();
        for i in 0..pos + neg {
            let class = if i < pos { FlowClass::Flooding } else { FlowClass::Normal };
            recs.push(FlowRecord::aggregate(0.0, 1.0 + i as f64, 5, 100.0, class));
        }
        binarize(&Dataset::new(recs, Provenance::Synthetic { seed: 0, config_hash: String::new() }))
    }

    #[test]
    fn fixture_parses_exactly() {
        let (ds, rep) = ingest_reader(FIXTURE.as_bytes(), &ColumnMap::default(), "fixture").unwrap();
        assert_eq!(rep.rows, 3);
        assert_eq!(rep.skipped, 0);
        assert_eq!(ds.len(), 3);
        let r = &ds.records()[0];
        assert_eq!(r.label, FlowClass::Normal);
        assert_eq!((r.t_first, r.t_last), (1.5, 3.5));
        assert_eq!((r.bytes_fwd, r.bytes_bwd), (Some(600.0), Some(400.0)));
        assert_eq!(r.packet_times.as_deref(), Some(&[1.5, 2.0, 3.0, 3.5][..]));
        assert_eq!(r.packet_sizes.as_deref(), Some(&[250.0; 4][..]));
        let r = &ds.records()[1];
        assert_eq!(r.label, FlowClass::Flooding);
        assert_eq!((r.bytes_fwd, r.bytes_bwd, r.packet_times.as_ref()), (Some(900.0), None, None));
        assert_eq!(ds.records()[2].total_packets, 1);
        assert!(rep.unmapped.contains(&"iat_cv".to_string()));
    }

    #[test]
    fn malformed_and_unknown_rows_skipped() {
        let text = "label,duration,total_packets,total_bytes\nNormal,abc,3,10\nDdos,1,3,10\nNormal,2,3,10\n";
        let (ds, rep) = ingest_reader(text.as_bytes(), &ColumnMap::default(), "t").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(rep.skipped, 2);
        assert!(rep.diagnostics[0].contains("duration"));
        assert!(rep.diagnostics[1].contains("unknown label"));
        assert_eq!(ds.records()[0].t_last, 2.0);
    }

    #[test]
    fn column_map_renames_headers() {
        let text = "Class,Dur,Pkts,Bytes\nWormhole,0.5,4,800\n";
        let map = ColumnMap::from_json(r#"{"label":"Class","duration":"Dur","total_packets":"Pkts","total_bytes":"Bytes"}"#).unwrap();
        let (ds, _) = ingest_reader(text.as_bytes(), &map, "t").unwrap();
        assert_eq!(ds.records()[0].label, FlowClass::Wormhole);
    }

    #[test]
    fn missing_columns_and_empty_file_are_errors() {
        let r = ingest_reader("label,total_packets\nNormal,3\n".as_bytes(), &ColumnMap::default(), "t");
        assert!(matches!(r, Err(Error::MissingColumns(_))));
        let r = ingest_reader("".as_bytes(), &ColumnMap::default(), "t");
        assert!(matches!(r, Err(Error::EmptyInput(_))));
        let r = ingest_reader(CANONICAL_COLUMNS.join(",").as_bytes(), &ColumnMap::default(), "t");
        assert!(matches!(r, Err(Error::EmptyInput(_))));
    }

    #[test]
    fn canonical_csv_round_trips() {
        let mut cfg = SynthConfig::default();
        for c in cfg.classes.values_mut() {
            c.count = 6;
        }
        let ds = synth_generate(&cfg).unwrap();
        let text = ds.to_csv().unwrap();
        let (back, rep) = ingest_reader(text.as_bytes(), &ColumnMap::default(), "t").unwrap();
        assert_eq!(rep.skipped, 0);
        assert_eq!(back.records(), ds.records());
    }

    #[test]
    fn synth_is_deterministic_and_counted() {
        let cfg = SynthConfig::default();
        let a = synth_generate(&cfg).unwrap();
        let b = synth_generate(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2000);
        let (pos, neg) = a.binary_counts();
        assert_eq!((pos, neg), (1572, 428));
        assert!((pos as f64 / 2000.0 - 0.786).abs() < 1e-12);
        let mut other = cfg.clone();
        other.seed = 8;
        assert_ne!(synth_generate(&other).unwrap(), a);
    }

    #[test]
    fn synth_zero_counts_refused() {
        let mut cfg = SynthConfig::default();
        for c in cfg.classes.values_mut() {
            c.count = 0;
        }
        assert!(matches!(synth_generate(&cfg), Err(Error::Config(_))));
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(|a, b| a.total_cmp(b));
        v[v.len() / 2]
    }

    #[test]
    fn synth_class_signatures() {
        let mut cfg = SynthConfig::default();
        for c in cfg.classes.values_mut() {
            c.count = 500;
        }
        let ds = synth_generate(&cfg).unwrap();
        let fc = FeatureConfig::default();
        let feat =
            |class: FlowClass, col: usize| median(ds.records().iter().filter(|r| r.label == class).map(|r| extract(r, &fc).unwrap().values[col]).collect());
        use FlowClass::*;
        assert!(feat(Blackhole, 5) > feat(Normal, 5));
        assert!(feat(Wormhole, 5) > feat(Normal, 5));
        assert!(feat(Blackhole, 5) > 0.9);
        assert!(feat(Flooding, 1).ln_1p() > feat(Normal, 1).ln_1p());
        assert!(feat(Flooding, 1) > 5.0 * feat(Normal, 1));
        assert!(feat(Flooding, 7) > feat(Normal, 7));
        assert!(feat(Blackhole, 2) < feat(Normal, 2));
        assert!(feat(Wormhole, 2) < feat(Normal, 2));
        assert!(feat(Sybil, 4) >= 3.0 * feat(Normal, 4));
        assert!(feat(Sybil, 6) >= 3.0 * feat(Normal, 6));
    }

    #[test]
    fn binarize_is_idempotent() {
        let ds = small_ds(3, 2);
        assert_eq!(binarize(&ds), ds);
        let all_normal = Dataset::new(vec![FlowRecord::aggregate(0.0, 1.0, 2, 2.0, FlowClass::Normal); 3], Provenance::Binarized);
        assert!(binarize(&all_normal).labels().iter().all(|&y| y == -1));
        let cfg = SynthConfig::default();
        let b = binarize(&synth_generate(&cfg).unwrap());
        assert_eq!(b.binary_counts().0, 4 * 393);
        assert_eq!(b.class_counts()[&FlowClass::Sybil], 393);
    }

    #[test]
    fn undersample_matches_minority() {
        let ds = small_ds(100, 40);
        let b = balance(&ds, BalanceStrategy::Undersample, 3).unwrap();
        assert_eq!(b.binary_counts(), (40, 40));
        assert_eq!(b, balance(&ds, BalanceStrategy::Undersample, 3).unwrap());
        let bal = small_ds(20, 20);
        let again = balance(&bal, BalanceStrategy::Undersample, 9).unwrap();
        assert_eq!(again.records(), bal.records());
        assert_eq!(balance(&ds, BalanceStrategy::None, 0).unwrap().len(), 140);
        assert!(matches!(balance(&small_ds(5, 0), BalanceStrategy::Undersample, 0), Err(Error::DegenerateLabels)));
    }

    #[test]
    fn stratified_split_arithmetic() {
        let ds = small_ds(80, 20);
        let s = split(&ds, 0.8, 11).unwrap();
        let (train, test) = s.apply(&ds).unwrap();
        assert_eq!(train.binary_counts(), (64, 16));
        assert_eq!(test.binary_counts(), (16, 4));
        let mut all: Vec<usize> = s.train_indices().iter().chain(s.test_indices()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_ne!(split(&ds, 0.8, 12).unwrap().train_indices(), s.train_indices());
        assert_eq!(split(&ds, 0.8, 11).unwrap(), s);
        assert!(split(&small_ds(5, 1), 0.5, 0).is_err());
        assert!(split(&ds, 1.0, 0).is_err());
    }
}
