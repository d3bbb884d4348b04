//! Engineered 8-dimensional flow representation.
//!
//! Order: `[T, r_p, r_b, s_mean, CV_dt, DAR, J, PMR]`. Features move through
//! three stages (raw, log-transformed, standardized) and each transform
//! checks the stage it is given.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_FEATURES: usize = 8;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = ["duration", "packet_rate", "byte_rate", "mean_packet_size", "iat_cv", "dar", "jitter", "pmr"];

/// Columns replaced by `ln(1 + x)`: packet rate, byte rate, PMR.
pub const LOG_COLUMNS: [usize; 3] = [1, 2, 7];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FlowClass {
    Normal,
    Blackhole,
    Flooding,
    Sybil,
    Wormhole,
}

impl FlowClass {
    pub const ALL: [FlowClass; 5] = [FlowClass::Normal, FlowClass::Blackhole, FlowClass::Flooding, FlowClass::Sybil, FlowClass::Wormhole];

    pub fn name(&self) -> &'static str {
        match self {
            FlowClass::Normal => "Normal",
            FlowClass::Blackhole => "Blackhole",
            FlowClass::Flooding => "Flooding",
            FlowClass::Sybil => "Sybil",
            FlowClass::Wormhole => "Wormhole",
        }
    }

    /// Normal maps to -1, every attack to +1.
    pub fn binary(&self) -> i8 {
        if *self == FlowClass::Normal {
            -1
        } else {
            1
        }
    }

    pub fn parse(s: &str) -> Option<FlowClass> {
        let s = s.trim();
        FlowClass::ALL.into_iter().find(|c| c.name().eq_ignore_ascii_case(s))
    }
}

impl std::fmt::Display for FlowClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Raw flow attributes. Timing detail (packet timestamps, sizes, window
/// rates) is optional; aggregate corpora may supply precomputed CV, jitter
/// and PMR instead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub t_first: f64,
    pub t_last: f64,
    #[serde(default)]
    pub packet_times: Option<Vec<f64>>,
    #[serde(default)]
    pub packet_sizes: Option<Vec<f64>>,
    #[serde(default)]
    pub bytes_fwd: Option<f64>,
    #[serde(default)]
    pub bytes_bwd: Option<f64>,
    pub total_bytes: f64,
    pub total_packets: u64,
    pub label: FlowClass,
    #[serde(default)]
    pub window_rates: Option<Vec<f64>>,
    #[serde(default)]
    pub iat_cv: Option<f64>,
    #[serde(default)]
    pub jitter: Option<f64>,
    #[serde(default)]
    pub pmr: Option<f64>,
}

impl FlowRecord {
    /// Minimal record from aggregate counters.
    pub fn aggregate(t_first: f64, t_last: f64, total_packets: u64, total_bytes: f64, label: FlowClass) -> Self {
        FlowRecord {
            t_first,
            t_last,
            packet_times: None,
            packet_sizes: None,
            bytes_fwd: None,
            bytes_bwd: None,
            total_bytes,
            total_packets,
            label,
            window_rates: None,
            iat_cv: None,
            jitter: None,
            pmr: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidFlow(m));
        if self.total_packets == 0 {
            return bad("flow has zero packets".into());
        }
        if !(self.t_first.is_finite() && self.t_last.is_finite()) || self.t_first < 0.0 || self.t_last < 0.0 {
            return bad(format!("negative or non-finite time ({}, {})", self.t_first, self.t_last));
        }
        if self.t_last < self.t_first {
            return bad(format!("t_last {} precedes t_first {}", self.t_last, self.t_first));
        }
        if !(self.total_bytes >= 0.0) {
            return bad(format!("negative byte count {}", self.total_bytes));
        }
        for v in [self.bytes_fwd, self.bytes_bwd].into_iter().flatten() {
            if !(v >= 0.0) {
                return bad(format!("negative directional byte count {v}"));
            }
        }
        if let Some(times) = &self.packet_times {
            if times.len() as u64 != self.total_packets {
                return bad(format!("{} timestamps for {} packets", times.len(), self.total_packets));
            }
            if times.iter().any(|t| !(*t >= 0.0)) {
                return bad("negative packet timestamp".into());
            }
            if times.windows(2).any(|w| w[1] < w[0]) {
                return bad("packet timestamps not sorted".into());
            }
        }
        if let Some(sizes) = &self.packet_sizes {
            if sizes.len() as u64 != self.total_packets {
                return bad(format!("{} sizes for {} packets", sizes.len(), self.total_packets));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Raw,
    Logged,
    Standardized,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Raw => "raw",
            Stage::Logged => "logged",
            Stage::Standardized => "standardized",
        }
    }

    fn parse(s: &str) -> Option<Stage> {
        [Stage::Raw, Stage::Logged, Stage::Standardized].into_iter().find(|st| st.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; NUM_FEATURES],
    pub stage: Stage,
    /// CV, jitter or PMR were imputed because timing detail was missing.
    pub imputed: bool,
}

impl FeatureVector {
    fn expect_stage(&self, expected: Stage) -> Result<()> {
        if self.stage != expected {
            return Err(Error::WrongStage { expected, got: self.stage });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Sliding-window length for PMR, seconds.
    pub pmr_window: f64,
    pub dar_epsilon: f64,
    /// Duration floor used in rates when `T = 0`.
    pub min_duration: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { pmr_window: 0.1, dar_epsilon: 1e-9, min_duration: 1e-6 }
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Maximum windowed byte rate over the whole-flow byte rate. Windows of
/// length `w` hop by `w/2` from the first packet; the last window is
/// right-aligned on the final packet. Never below 1.
fn peak_to_mean(rel_times: &[f64], sizes: &[f64], duration: f64, total_bytes: f64, w: f64) -> f64 {
    if duration < w || total_bytes <= 0.0 {
        return 1.0;
    }
    let mean_rate = total_bytes / duration;
    let hop = w / 2.0;
    let mut starts: Vec<f64> = Vec::new();
    let mut k = 0u64;
    loop {
        let s = k as f64 * hop;
        if s + w > duration {
            break;
        }
        starts.push(s);
        k += 1;
    }
    starts.push(duration - w);
    let mut best: f64 = 1.0;
    let (mut lo, mut hi, mut bytes) = (0usize, 0usize, 0.0f64);
    // starts are non-decreasing, so a two-pointer sweep suffices
    for s in starts {
        let e = s + w;
        while hi < rel_times.len() && rel_times[hi] <= e {
            bytes += sizes[hi];
            hi += 1;
        }
        while lo < hi && rel_times[lo] < s {
            bytes -= sizes[lo];
            lo += 1;
        }
        best = best.max(bytes / w / mean_rate);
    }
    best
}

/// Raw 8-feature vector for one flow.
pub fn extract(flow: &FlowRecord, cfg: &FeatureConfig) -> Result<FeatureVector> {
    flow.validate()?;
    let n = flow.total_packets;
    let duration = flow.t_last - flow.t_first;
    let t_eff = if duration > 0.0 { duration } else { cfg.min_duration };
    let b_tot = flow.total_bytes;
    let packet_rate = n as f64 / t_eff;
    let byte_rate = b_tot / t_eff;
    let mean_size = b_tot / n as f64;

    let mut imputed = false;
    let dar = match (flow.bytes_fwd, flow.bytes_bwd) {
        (Some(f), Some(b)) => (f - b).abs() / (f + b + cfg.dar_epsilon),
        _ => {
            imputed = true;
            0.0
        }
    };

    let (cv, jitter, pmr) = match &flow.packet_times {
        Some(times) => {
            let dts: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
            let cv = if dts.is_empty() {
                0.0
            } else {
                let (mu, sigma) = mean_std(&dts);
                if mu > 0.0 {
                    sigma / mu
                } else {
                    0.0
                }
            };
            let jitter = if n < 3 { 0.0 } else { dts.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (n - 2) as f64 };
            let rel: Vec<f64> = times.iter().map(|t| t - flow.t_first).collect();
            let sizes = flow.packet_sizes.clone().unwrap_or_else(|| vec![mean_size; times.len()]);
            let pmr = peak_to_mean(&rel, &sizes, duration, b_tot, cfg.pmr_window);
            (cv, jitter, pmr)
        }
        None => {
            let pmr = match (&flow.pmr, &flow.window_rates) {
                (Some(p), _) => Some(p.max(1.0)),
                (None, Some(rates)) if byte_rate > 0.0 && !rates.is_empty() => Some(rates.iter().fold(1.0f64, |m, r| m.max(r / byte_rate))),
                _ => None,
            };
            if flow.iat_cv.is_none() || flow.jitter.is_none() || pmr.is_none() {
                imputed = true;
            }
            (flow.iat_cv.unwrap_or(0.0), flow.jitter.unwrap_or(0.0), pmr.unwrap_or(1.0))
        }
    };

    Ok(FeatureVector { values: [duration, packet_rate, byte_rate, mean_size, cv, dar, jitter, pmr], stage: Stage::Raw, imputed })
}

/// `ln(1 + x)` on the rate columns.
pub fn log_transform(fv: &FeatureVector) -> Result<FeatureVector> {
    fv.expect_stage(Stage::Raw)?;
    let mut out = *fv;
    for &c in &LOG_COLUMNS {
        out.values[c] = fv.values[c].ln_1p();
    }
    out.stage = Stage::Logged;
    Ok(out)
}

/// Per-coordinate mean and population standard deviation of the training
/// split. Immutable once fitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    means: [f64; NUM_FEATURES],
    stddevs: [f64; NUM_FEATURES],
}

impl Standardizer {
    pub fn fit(train: &[FeatureVector]) -> Result<Standardizer> {
        if train.len() < 2 {
            return Err(Error::EmptyInput("standardizer needs at least 2 samples"));
        }
        let mut means = [0.0; NUM_FEATURES];
        let mut stddevs = [0.0; NUM_FEATURES];
        for fv in train {
            fv.expect_stage(Stage::Logged)?;
        }
        for c in 0..NUM_FEATURES {
            let col: Vec<f64> = train.iter().map(|fv| fv.values[c]).collect();
            let (m, s) = mean_std(&col);
            if !(s > 1e-12 * (1.0 + m.abs())) {
                return Err(Error::DegenerateFeature { index: c, name: FEATURE_NAMES[c] });
            }
            means[c] = m;
            stddevs[c] = s;
        }
        Ok(Standardizer { means, stddevs })
    }

    pub fn means(&self) -> &[f64; NUM_FEATURES] {
        &self.means
    }

    pub fn stddevs(&self) -> &[f64; NUM_FEATURES] {
        &self.stddevs
    }

    pub fn apply(&self, fv: &FeatureVector) -> Result<FeatureVector> {
        fv.expect_stage(Stage::Logged)?;
        let mut out = *fv;
        for c in 0..NUM_FEATURES {
            out.values[c] = (fv.values[c] - self.means[c]) / self.stddevs[c];
        }
        out.stage = Stage::Standardized;
        Ok(out)
    }
}

pub fn standardizer_fit(train: &[FeatureVector]) -> Result<Standardizer> {
    Standardizer::fit(train)
}

pub fn standardize(fv: &FeatureVector, s: &Standardizer) -> Result<FeatureVector> {
    s.apply(fv)
}

/// Feature matrix as CSV: `class,target,stage,<8 feature names>`.
pub fn features_to_csv(features: &[FeatureVector], classes: &[FlowClass]) -> Result<String> {
    if features.len() != classes.len() {
        return Err(Error::DimensionMismatch { expected: features.len(), got: classes.len() });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["class", "target", "stage"];
    header.extend(FEATURE_NAMES);
    w.write_record(&header)?;
    for (fv, cls) in features.iter().zip(classes) {
        let mut rec = vec![cls.name().to_string(), cls.binary().to_string(), fv.stage.name().to_string()];
        rec.extend(fv.values.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn features_from_csv(text: &str) -> Result<(Vec<FeatureVector>, Vec<FlowClass>)> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let bad = |m: String| Error::Config(format!("feature csv: {m}"));
    let mut feats = Vec::new();
    let mut classes = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 3 + NUM_FEATURES {
            return Err(bad(format!("expected {} columns, got {}", 3 + NUM_FEATURES, rec.len())));
        }
        let cls = FlowClass::parse(&rec[0]).ok_or_else(|| bad(format!("unknown class {}", &rec[0])))?;
        let stage = Stage::parse(&rec[2]).ok_or_else(|| bad(format!("unknown stage {}", &rec[2])))?;
        let mut values = [0.0; NUM_FEATURES];
        for (c, v) in values.iter_mut().enumerate() {
            *v = rec[3 + c].parse().map_err(|_| bad(format!("bad number {}", &rec[3 + c])))?;
        }
        feats.push(FeatureVector { values, stage, imputed: false });
        classes.push(cls);
    }
    Ok((feats, classes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn timed(times: Vec<f64>, sizes: Option<Vec<f64>>, fwd: f64, bwd: f64) -> FlowRecord {
        let n = times.len() as u64;
        let total = sizes.as_ref().map_or(100.0 * n as f64, |s| s.iter().sum());
        FlowRecord {
            t_first: times[0],
            t_last: *times.last().unwrap(),
            packet_times: Some(times),
            packet_sizes: sizes,
            bytes_fwd: Some(fwd),
            bytes_bwd: Some(bwd),
            total_bytes: total,
            total_packets: n,
            label: FlowClass::Normal,
            window_rates: None,
            iat_cv: None,
            jitter: None,
            pmr: None,
        }
    }

    #[test]
    fn basic_rates() {
        let f = FlowRecord::aggregate(1.0, 3.0, 4, 4000.0, FlowClass::Normal);
        let v = extract(&f, &FeatureConfig::default()).unwrap().values;
        assert_eq!(&v[..4], &[2.0, 2.0, 2000.0, 1000.0]);
    }

    #[test]
    fn constant_spacing_has_no_dispersion() {
        let f = timed(vec![0.0, 0.5, 1.0, 1.5, 2.0], None, 300.0, 200.0);
        let v = extract(&f, &FeatureConfig::default()).unwrap().values;
        assert_abs_diff_eq!(v[4], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[6], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn dar_extremes() {
        let cfg = FeatureConfig::default();
        let f = timed(vec![0.0, 1.0], None, 1000.0, 0.0);
        assert_abs_diff_eq!(extract(&f, &cfg).unwrap().values[5], 1000.0 / (1000.0 + 1e-9), epsilon = 1e-15);
        let f = timed(vec![0.0, 1.0], None, 700.0, 700.0);
        assert_eq!(extract(&f, &cfg).unwrap().values[5], 0.0);
        let f = timed(vec![0.0, 1.0], None, 0.0, 0.0);
        assert_eq!(extract(&f, &cfg).unwrap().values[5], 0.0);
    }

    #[test]
    fn cv_and_jitter_hand_values() {
        // dt = [1, 2, 3]; mean 2, population sd sqrt(2/3)
        let f = timed(vec![0.0, 1.0, 3.0, 6.0], None, 1.0, 1.0);
        let v = extract(&f, &FeatureConfig::default()).unwrap().values;
        assert_abs_diff_eq!(v[4], (2.0f64 / 3.0).sqrt() / 2.0, epsilon = 1e-15);
        // |2-1| + |3-2| over N-2 = 2
        assert_abs_diff_eq!(v[6], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn pmr_hand_value() {
        // 1 s flow, 100 ms windows, five 100 B packets; three land in [0.4, 0.5]
        let f = timed(vec![0.0, 0.4, 0.45, 0.5, 1.0].into_iter().collect(), Some(vec![100.0; 5]), 1.0, 1.0);
        let v = extract(&f, &FeatureConfig::default()).unwrap().values;
        // mean rate 500 B/s; window [0.4, 0.5] holds 300 B -> 3000 B/s
        assert_abs_diff_eq!(v[7], 6.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_flows() {
        let cfg = FeatureConfig::default();
        let single = timed(vec![5.0], None, 100.0, 0.0);
        let v = extract(&single, &cfg).unwrap().values;
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], 1.0 / 1e-6);
        assert_eq!((v[4], v[6], v[7]), (0.0, 0.0, 1.0));
        let short = timed(vec![0.0, 0.01, 0.02], None, 1.0, 2.0);
        assert_eq!(extract(&short, &cfg).unwrap().values[7], 1.0);
        let mut zero = FlowRecord::aggregate(0.0, 1.0, 0, 0.0, FlowClass::Normal);
        assert!(matches!(extract(&zero, &cfg), Err(Error::InvalidFlow(_))));
        zero.total_packets = 1;
        zero.t_first = -1.0;
        assert!(extract(&zero, &cfg).is_err());
    }

    #[test]
    fn aggregate_flows_are_flagged() {
        let mut f = FlowRecord::aggregate(0.0, 2.0, 10, 1000.0, FlowClass::Sybil);
        let v = extract(&f, &FeatureConfig::default()).unwrap();
        assert!(v.imputed);
        assert_eq!((v.values[4], v.values[6], v.values[7]), (0.0, 0.0, 1.0));
        f.bytes_fwd = Some(600.0);
        f.bytes_bwd = Some(400.0);
        f.iat_cv = Some(0.7);
        f.jitter = Some(0.02);
        f.window_rates = Some(vec![100.0, 2500.0]);
        let v = extract(&f, &FeatureConfig::default()).unwrap();
        assert!(!v.imputed);
        assert_eq!((v.values[4], v.values[6], v.values[7]), (0.7, 0.02, 5.0));
    }

    #[test]
    fn log_stage_rules() {
        let f = FlowRecord::aggregate(0.0, 1.0, 1, std::f64::consts::E - 1.0, FlowClass::Normal);
        let raw = extract(&f, &FeatureConfig::default()).unwrap();
        let logged = log_transform(&raw).unwrap();
        assert_abs_diff_eq!(logged.values[2], 1.0, epsilon = 1e-15);
        for c in [0, 3, 4, 5, 6] {
            assert_eq!(logged.values[c].to_bits(), raw.values[c].to_bits());
        }
        assert!(matches!(log_transform(&logged), Err(Error::WrongStage { .. })));
        let mut z = raw;
        z.values[1] = 0.0;
        assert_eq!(log_transform(&z).unwrap().values[1], 0.0);
    }

    fn logged(values: [f64; 8]) -> FeatureVector {
        FeatureVector { values, stage: Stage::Logged, imputed: false }
    }

    #[test]
    fn standardizer_rules() {
        let a = logged([1.0; 8]);
        assert!(matches!(Standardizer::fit(&[a, a]), Err(Error::DegenerateFeature { index: 0, .. })));
        assert!(Standardizer::fit(&[a]).is_err());
        let s = Standardizer::fit(&[logged([-1.0; 8]), logged([1.0; 8])]).unwrap();
        assert_eq!(s.means(), &[0.0; 8]);
        assert_eq!(s.stddevs(), &[1.0; 8]);
        let z = s.apply(&logged([0.0; 8])).unwrap();
        assert_eq!(z.values, [0.0; 8]);
        assert!(s.apply(&z).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let fv = [logged([0.5, 1.0, 2.0, 3.0, 0.1, 0.9, 0.01, 1.5])];
        let text = features_to_csv(&fv, &[FlowClass::Flooding]).unwrap();
        assert!(text.starts_with("class,target,stage,duration,packet_rate"));
        let (back, cls) = features_from_csv(&text).unwrap();
        assert_eq!(back[0].values, fv[0].values);
        assert_eq!(cls, vec![FlowClass::Flooding]);
    }

    proptest! {
        #[test]
        fn dar_bounded_and_shift_invariant(
            gaps in prop::collection::vec(0.0f64..0.2, 1..60),
            sizes in prop::collection::vec(40.0f64..1500.0, 60),
            fwd in 0.0f64..1e6,
            bwd in 0.0f64..1e6,
            shift in 0.0f64..1000.0,
        ) {
            let mut t = 0.37;
            let mut times = vec![t];
            for g in &gaps {
                t += g;
                times.push(t);
            }
            let sz: Vec<f64> = sizes[..times.len()].to_vec();
            let f = timed(times.clone(), Some(sz.clone()), fwd, bwd);
            let shifted = timed(times.iter().map(|x| x + shift).collect(), Some(sz), fwd, bwd);
            let cfg = FeatureConfig::default();
            let a = extract(&f, &cfg).unwrap().values;
            let b = extract(&shifted, &cfg).unwrap().values;
            prop_assert!((0.0..=1.0).contains(&a[5]));
            prop_assert!(a[7] >= 1.0);
            for c in 0..8 {
                let tol = 1e-6 * (1.0 + a[c].abs());
                prop_assert!((a[c] - b[c]).abs() <= tol, "col {} {} vs {}", c, a[c], b[c]);
            }
        }
    }
}
