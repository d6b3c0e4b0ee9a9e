//! Window statistics and the 42-feature vector.
//!
//! Each of the seven statistics is computed per axis on the 8 filtered
//! readings (features 1-21) and again on the 8 DFT bin magnitudes of the same
//! window (features 22-42). Within a domain the features are grouped by
//! statistic, then axis: `meanaccx, meanaccy, meanaccz, varianceaccx, ...`.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::dsp::{self, DspError, Window, WindowTriple};
use crate::ingest::{Activity, LabeledSeries};
use crate::WINDOW_LEN;

pub const FEATURE_COUNT: usize = 42;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("expected {WINDOW_LEN} values, got {0}")]
    WindowLength(usize),
    #[error("unknown feature name {0:?}")]
    UnknownFeature(String),
    #[error("feature {0} listed twice")]
    DuplicateFeature(FeatureId),
    #[error("series has {0} samples, need at least {WINDOW_LEN} for one window")]
    TooShort(usize),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Statistic {
    Mean,
    Variance,
    StdDev,
    Iqr,
    Kurtosis,
    Skewness,
    Energy,
}

impl Statistic {
    pub const ALL: [Statistic; 7] = [
        Statistic::Mean,
        Statistic::Variance,
        Statistic::StdDev,
        Statistic::Iqr,
        Statistic::Kurtosis,
        Statistic::Skewness,
        Statistic::Energy,
    ];

    fn stem(self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::Variance => "variance",
            Statistic::StdDev => "standarddeviation",
            Statistic::Iqr => "iqr",
            Statistic::Kurtosis => "kurtosis",
            Statistic::Skewness => "skewness",
            Statistic::Energy => "energy",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Time,
    Frequency,
}

/// One of the 42 features, identified by its position in the canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureId(u8);

impl FeatureId {
    pub fn new(index: usize) -> Option<FeatureId> {
        (index < FEATURE_COUNT).then_some(FeatureId(index as u8))
    }

    pub fn from_parts(domain: Domain, stat: Statistic, axis: usize) -> FeatureId {
        assert!(axis < 3);
        let d = match domain {
            Domain::Time => 0,
            Domain::Frequency => 21,
        };
        let s = Statistic::ALL.iter().position(|x| *x == stat).unwrap();
        FeatureId((d + 3 * s + axis) as u8)
    }

    pub fn all() -> impl Iterator<Item = FeatureId> {
        (0..FEATURE_COUNT as u8).map(FeatureId)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn domain(self) -> Domain {
        if self.index() < 21 {
            Domain::Time
        } else {
            Domain::Frequency
        }
    }

    pub fn statistic(self) -> Statistic {
        Statistic::ALL[(self.index() % 21) / 3]
    }

    pub fn axis(self) -> usize {
        self.index() % 3
    }

    pub fn name(self) -> String {
        let prefix = if self.domain() == Domain::Frequency { "f" } else { "" };
        let axis = ["x", "y", "z"][self.axis()];
        format!("{prefix}{}acc{axis}", self.statistic().stem())
    }

    /// Resolves a canonical name, case-insensitively. The misspellings
    /// `fqracc*` and `igracc*` found in the preset feature lists resolve to
    /// `fiqracc*` and `iqracc*`.
    pub fn parse(name: &str) -> Result<FeatureId, FeatureError> {
        let lower = name.trim().to_ascii_lowercase();
        let canonical = match lower.strip_suffix(['x', 'y', 'z']).map(|s| (s, &lower[s.len()..])) {
            Some(("fqracc", axis)) => format!("fiqracc{axis}"),
            Some(("igracc", axis)) => format!("iqracc{axis}"),
            Some(("figracc", axis)) => format!("fiqracc{axis}"),
            _ => lower,
        };
        FeatureId::all().find(|f| f.name() == canonical).ok_or_else(|| FeatureError::UnknownFeature(name.to_string()))
    }

    /// Resolves a list of names, rejecting unknown or repeated entries.
    pub fn parse_list<S: AsRef<str>>(names: &[S]) -> Result<Vec<FeatureId>, FeatureError> {
        let mut seen = HashSet::new();
        names
            .iter()
            .map(|n| {
                let id = FeatureId::parse(n.as_ref())?;
                if !seen.insert(id) {
                    return Err(FeatureError::DuplicateFeature(id));
                }
                Ok(id)
            })
            .collect()
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for FeatureId {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureId::parse(s)
    }
}

impl Serialize for FeatureId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for FeatureId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        FeatureId::parse(&name).map_err(serde::de::Error::custom)
    }
}

/// The seven statistics of one 8-value window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowStats {
    pub mean: f64,
    pub variance: f64,
    pub stddev: f64,
    pub iqr: f64,
    pub energy: f64,
    pub kurtosis: f64,
    pub skewness: f64,
}

impl WindowStats {
    pub fn get(&self, stat: Statistic) -> f64 {
        match stat {
            Statistic::Mean => self.mean,
            Statistic::Variance => self.variance,
            Statistic::StdDev => self.stddev,
            Statistic::Iqr => self.iqr,
            Statistic::Kurtosis => self.kurtosis,
            Statistic::Skewness => self.skewness,
            Statistic::Energy => self.energy,
        }
    }
}

/// Population moments of the window. Quartiles are Tukey hinges (medians of
/// the lower and upper four sorted values). A window with zero spread has
/// kurtosis and skewness 0.
pub fn window_statistics(values: &[f64]) -> Result<WindowStats, FeatureError> {
    let w: &[f64; WINDOW_LEN] = values.try_into().map_err(|_| FeatureError::WindowLength(values.len()))?;
    Ok(stats_of(w))
}

fn stats_of(x: &[f64; WINDOW_LEN]) -> WindowStats {
    let n = WINDOW_LEN as f64;
    if x.iter().all(|v| *v == x[0]) {
        let c = x[0];
        return WindowStats {
            mean: c,
            variance: 0.0,
            stddev: 0.0,
            iqr: 0.0,
            energy: c * c,
            kurtosis: 0.0,
            skewness: 0.0,
        };
    }
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4, mut sq) = (0.0, 0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
        sq += v * v;
    }
    let variance = m2 / n;
    let (kurtosis, skewness) = if m2 > 0.0 { (n * m4 / (m2 * m2), n.sqrt() * m3 / m2.powf(1.5)) } else { (0.0, 0.0) };

    let mut sorted = *x;
    sorted.sort_unstable_by(f64::total_cmp);
    let half = WINDOW_LEN / 2;
    let q1 = (sorted[half / 2 - 1] + sorted[half / 2]) / 2.0;
    let q3 = (sorted[half + half / 2 - 1] + sorted[half + half / 2]) / 2.0;

    WindowStats { mean, variance, stddev: variance.sqrt(), iqr: q3 - q1, energy: sq / n, kurtosis, skewness }
}

/// The 42 features of one window, in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_COUNT],
    pub label: Option<Activity>,
}

impl FeatureVector {
    pub fn get(&self, id: FeatureId) -> f64 {
        self.values[id.index()]
    }

    /// Values of `ids`, in that order.
    pub fn project(&self, ids: &[FeatureId]) -> Vec<f64> {
        ids.iter().map(|id| self.get(*id)).collect()
    }
}

pub fn extract_features(t: &WindowTriple) -> FeatureVector {
    let mut values = [0.0; FEATURE_COUNT];
    for (axis, w) in t.axes.iter().enumerate() {
        let time = stats_of(w.values());
        let freq = stats_of(&dsp::dft_magnitudes(w));
        for stat in Statistic::ALL {
            values[FeatureId::from_parts(Domain::Time, stat, axis).index()] = time.get(stat);
            values[FeatureId::from_parts(Domain::Frequency, stat, axis).index()] = freq.get(stat);
        }
    }
    FeatureVector { values, label: t.label }
}

/// Computes only the features in a fixed subset, skipping the (domain, axis)
/// statistic blocks nobody asked for.
#[derive(Clone, Debug)]
pub struct FeatureExtractor {
    ids: Vec<FeatureId>,
    // [axis][domain]
    needed: [[bool; 2]; 3],
}

impl FeatureExtractor {
    pub fn new(ids: &[FeatureId]) -> Self {
        let mut needed = [[false; 2]; 3];
        for id in ids {
            let d = (id.domain() == Domain::Frequency) as usize;
            needed[id.axis()][d] = true;
        }
        FeatureExtractor { ids: ids.to_vec(), needed }
    }

    pub fn ids(&self) -> &[FeatureId] {
        &self.ids
    }

    /// Feature values of `axes` in the order of `ids`.
    pub fn extract(&self, axes: &[Window; 3]) -> Vec<f64> {
        let mut stats: [[Option<WindowStats>; 2]; 3] = [[None; 2]; 3];
        for (axis, w) in axes.iter().enumerate() {
            if self.needed[axis][0] {
                stats[axis][0] = Some(stats_of(w.values()));
            }
            if self.needed[axis][1] {
                stats[axis][1] = Some(stats_of(&dsp::dft_magnitudes(w)));
            }
        }
        self.ids
            .iter()
            .map(|id| {
                let d = (id.domain() == Domain::Frequency) as usize;
                stats[id.axis()][d].expect("stats computed for every requested block").get(id.statistic())
            })
            .collect()
    }
}

/// Feature rows with optional labels; the unit of training and evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureDataset {
    feature_names: Vec<FeatureId>,
    rows: Vec<Vec<f64>>,
    labels: Option<Vec<Activity>>,
}

impl FeatureDataset {
    pub fn new(
        feature_names: Vec<FeatureId>,
        rows: Vec<Vec<f64>>,
        labels: Option<Vec<Activity>>,
    ) -> Result<Self, FeatureError> {
        let mut seen = HashSet::new();
        if let Some(dup) = feature_names.iter().find(|f| !seen.insert(**f)) {
            return Err(FeatureError::DuplicateFeature(*dup));
        }
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != feature_names.len()) {
            return Err(FeatureError::InvalidDataset(format!(
                "row {i} has {} values for {} features",
                rows[i].len(),
                feature_names.len()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != rows.len() {
                return Err(FeatureError::InvalidDataset(format!("{} labels for {} rows", l.len(), rows.len())));
            }
        }
        Ok(FeatureDataset { feature_names, rows, labels })
    }

    pub fn from_vectors(vectors: &[FeatureVector]) -> Self {
        let rows = vectors.iter().map(|v| v.values.to_vec()).collect();
        let labels = vectors.iter().map(|v| v.label).collect::<Option<Vec<_>>>();
        let labels = if vectors.is_empty() { None } else { labels };
        FeatureDataset { feature_names: FeatureId::all().collect(), rows, labels }
    }

    pub fn feature_names(&self) -> &[FeatureId] {
        &self.feature_names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> Option<&[Activity]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Column position of `id`, if present.
    pub fn column_of(&self, id: FeatureId) -> Option<usize> {
        self.feature_names.iter().position(|f| *f == id)
    }

    /// Projects onto `ids`, in that order. Every id must be a column.
    pub fn select_ids(&self, ids: &[FeatureId]) -> Result<FeatureDataset, FeatureError> {
        let cols = ids
            .iter()
            .map(|id| self.column_of(*id).ok_or_else(|| FeatureError::UnknownFeature(id.name())))
            .collect::<Result<Vec<_>, _>>()?;
        let rows = self.rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
        FeatureDataset::new(ids.to_vec(), rows, self.labels.clone())
    }

    /// Projects onto named columns (aliases accepted, duplicates rejected).
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<FeatureDataset, FeatureError> {
        self.select_ids(&FeatureId::parse_list(names)?)
    }

    /// Rows at `indices` (repeats allowed), in that order.
    pub fn subset(&self, indices: &[usize]) -> FeatureDataset {
        FeatureDataset {
            feature_names: self.feature_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Writes the feature CSV: one column per feature name, then `activity`
    /// when labeled.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<(), FeatureError> {
        let mut header: Vec<String> = self.feature_names.iter().map(|f| f.name()).collect();
        if self.labels.is_some() {
            header.push("activity".into());
        }
        writeln!(writer, "{}", header.join(","))?;
        let mut line = String::new();
        for (i, row) in self.rows.iter().enumerate() {
            line.clear();
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&v.to_string());
            }
            if let Some(l) = &self.labels {
                line.push(',');
                line.push_str(&l[i].code().to_string());
            }
            writeln!(writer, "{line}")?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<FeatureDataset, FeatureError> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        let mut names: Vec<&str> = header.iter().collect();
        let labeled = names.last() == Some(&"activity");
        if labeled {
            names.pop();
        }
        let ids = FeatureId::parse_list(&names)?;
        let width = header.len();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() == 1 && record[0].is_empty() {
                continue;
            }
            if record.len() != width {
                return Err(FeatureError::Parse {
                    line,
                    msg: format!("expected {width} columns, found {}", record.len()),
                });
            }
            let row = (0..ids.len())
                .map(|j| match record[j].parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(FeatureError::Parse { line, msg: format!("bad value {:?}", &record[j]) }),
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
            if labeled {
                let field = &record[ids.len()];
                let a = field
                    .parse::<u8>()
                    .ok()
                    .and_then(Activity::from_code)
                    .ok_or_else(|| FeatureError::Parse { line, msg: format!("unknown activity code {field:?}") })?;
                labels.push(a);
            }
        }
        FeatureDataset::new(ids, rows, labeled.then_some(labels))
    }
}

/// Median-filters each axis, cuts windows every `stride` samples and extracts
/// the 42 features per window. Rows come out in window order.
pub fn featurize(series: &LabeledSeries, filter_width: usize, stride: usize) -> Result<FeatureDataset, FeatureError> {
    dsp::check_filter_width(filter_width)?;
    if stride == 0 {
        return Err(DspError::ZeroStride.into());
    }
    if series.len() < WINDOW_LEN {
        return Err(FeatureError::TooShort(series.len()));
    }
    let axes = [
        dsp::median_filter(&series.axis(0), filter_width)?,
        dsp::median_filter(&series.axis(1), filter_width)?,
        dsp::median_filter(&series.axis(2), filter_width)?,
    ];
    let triples = dsp::windows_from_axes(&axes, series.labels(), stride)?;
    let vectors: Vec<FeatureVector> = triples.iter().map(extract_features).collect();
    let mut ds = FeatureDataset::from_vectors(&vectors);
    if series.labels().is_none() {
        ds.labels = None;
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{synthesize, Sample, SynthParams};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn names_are_canonical_and_complete() {
        let names: Vec<String> = FeatureId::all().map(|f| f.name()).collect();
        assert_eq!(names.len(), 42);
        assert_eq!(names[0], "meanaccx");
        assert_eq!(names[5], "varianceaccz");
        assert_eq!(names[6], "standarddeviationaccx");
        assert_eq!(names[9], "iqraccx");
        assert_eq!(names[12], "kurtosisaccx");
        assert_eq!(names[15], "skewnessaccx");
        assert_eq!(names[20], "energyaccz");
        assert_eq!(names[21], "fmeanaccx");
        assert_eq!(names[30], "fiqraccx");
        assert_eq!(names[41], "fenergyaccz");
        let unique: HashSet<_> = names.iter().collect();
        assert_eq!(unique.len(), 42);
        for (i, n) in names.iter().enumerate() {
            assert_eq!(FeatureId::parse(n).unwrap().index(), i);
        }
    }

    #[test]
    fn typo_aliases_resolve() {
        assert_eq!(FeatureId::parse("fqraccy").unwrap().name(), "fiqraccy");
        assert_eq!(FeatureId::parse("igraccx").unwrap().name(), "iqraccx");
        assert_eq!(FeatureId::parse("MeanAccX").unwrap().name(), "meanaccx");
        assert!(FeatureId::parse("medianaccx").is_err());
        assert!(matches!(FeatureId::parse_list(&["meanaccx", "meanaccx"]), Err(FeatureError::DuplicateFeature(_))));
    }

    #[test]
    fn two_level_window() {
        let s = window_statistics(&[1.0, 1.0, 1.0, 1.0, 3.0, 3.0, 3.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.variance, 1.0);
        assert_eq!(s.stddev, 1.0);
        assert_eq!(s.energy, 5.0);
        assert_eq!(s.skewness, 0.0);
        assert_eq!(s.kurtosis, 1.0);
        assert_eq!(s.iqr, 2.0);
    }

    #[test]
    fn constant_window() {
        let s = window_statistics(&[0.1; 8]).unwrap();
        assert_eq!(s.mean, 0.1);
        assert_eq!((s.variance, s.stddev, s.iqr, s.kurtosis, s.skewness), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(s.energy, 0.1 * 0.1);
    }

    #[test]
    fn hinges_of_one_to_eight() {
        let s = window_statistics(&[8.0, 3.0, 1.0, 5.0, 2.0, 7.0, 4.0, 6.0]).unwrap();
        assert_eq!(s.iqr, 4.0);
    }

    #[test]
    fn wrong_length_is_an_error() {
        assert!(matches!(window_statistics(&[1.0; 7]), Err(FeatureError::WindowLength(7))));
        assert!(matches!(window_statistics(&[1.0; 9]), Err(FeatureError::WindowLength(9))));
    }

    fn triple(x: [f64; 8], y: [f64; 8], z: [f64; 8]) -> WindowTriple {
        WindowTriple { start: 0, axes: [Window(x), Window(y), Window(z)], label: Some(Activity::Idle) }
    }

    #[test]
    fn gravity_only_triple() {
        let fv = extract_features(&triple([0.0; 8], [0.0; 8], [9.81; 8]));
        let get = |n: &str| fv.get(FeatureId::parse(n).unwrap());
        assert_eq!(get("meanaccz"), 9.81);
        for n in ["varianceaccx", "varianceaccy", "varianceaccz"] {
            assert_eq!(get(n), 0.0);
        }
        assert!((get("fmeanaccz") - 9.81).abs() < 1e-12);
        assert_eq!(get("fmeanaccx"), 0.0);
        assert_eq!(fv.label, Some(Activity::Idle));
    }

    #[test]
    fn extractor_subset_matches_full_vector() {
        let t = triple(
            [1.0, 4.0, 2.0, 8.0, 5.0, 7.0, 0.5, 3.0],
            [-1.0, 0.0, 2.0, 2.0, -3.0, 1.0, 0.0, 4.0],
            [9.0, 9.5, 10.0, 9.7, 9.9, 10.2, 9.1, 9.6],
        );
        let full = extract_features(&t);
        let ids = FeatureId::parse_list(&["fkurtosisaccz", "meanaccx", "skewnessaccz", "fqraccy"]).unwrap();
        let ex = FeatureExtractor::new(&ids);
        assert_eq!(ex.extract(&t.axes), full.project(&ids));
        let all: Vec<_> = FeatureId::all().collect();
        assert_eq!(FeatureExtractor::new(&all).extract(&t.axes), full.values.to_vec());
    }

    proptest! {
        #[test]
        fn per_axis_identities(
            x in prop::array::uniform8(-30f64..30.0),
            y in prop::array::uniform8(-30f64..30.0),
            z in prop::array::uniform8(-30f64..30.0),
        ) {
            let fv = extract_features(&triple(x, y, z));
            for axis in 0..3 {
                let g = |d, s| fv.get(FeatureId::from_parts(d, s, axis));
                let var = g(Domain::Time, Statistic::Variance);
                let energy = g(Domain::Time, Statistic::Energy);
                let mean = g(Domain::Time, Statistic::Mean);
                prop_assert!((var - (energy - mean * mean)).abs() <= 1e-9 * energy.max(var).max(1e-300));
                let fenergy = g(Domain::Frequency, Statistic::Energy);
                prop_assert!(close(fenergy, 8.0 * energy, 1e-6));
            }
        }

        #[test]
        fn shift_invariance(x in prop::array::uniform8(-10f64..10.0), c in -50f64..50.0) {
            let a = window_statistics(&x).unwrap();
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let b = window_statistics(&shifted).unwrap();
            prop_assume!(a.variance > 1e-3);
            prop_assert!((b.mean - (a.mean + c)).abs() <= 1e-9 * (a.mean + c).abs().max(1.0));
            // Adding c re-rounds each value, so compare spread statistics
            // against the spread scale rather than bit-for-bit.
            prop_assert!(close(a.variance, b.variance, 1e-9 * (1.0 + c.abs() / a.stddev).powi(2)));
            prop_assert!((a.iqr - b.iqr).abs() <= 1e-9 * (a.iqr.abs() + c.abs() + 1.0));
            prop_assert!((a.skewness - b.skewness).abs() <= 1e-6 * (1.0 + c.abs() / a.stddev));
            prop_assert!((a.kurtosis - b.kurtosis).abs() <= 1e-6 * (1.0 + c.abs() / a.stddev));
        }

        #[test]
        fn positive_scaling(x in prop::array::uniform8(-10f64..10.0), s in 0.01f64..100.0) {
            let a = window_statistics(&x).unwrap();
            let scaled: Vec<f64> = x.iter().map(|v| v * s).collect();
            let b = window_statistics(&scaled).unwrap();
            prop_assume!(a.variance > 1e-6);
            prop_assert!(close(b.variance, a.variance * s * s, 1e-9));
            prop_assert!(close(b.stddev, a.stddev * s, 1e-9));
            prop_assert!(close(b.iqr, a.iqr * s, 1e-9));
            prop_assert!(close(b.energy, a.energy * s * s, 1e-9));
            prop_assert!(close(b.skewness, a.skewness, 1e-9) || (a.skewness - b.skewness).abs() < 1e-12);
            prop_assert!(close(b.kurtosis, a.kurtosis, 1e-9));
        }
    }

    #[test]
    fn featurize_row_counts_and_labels() {
        let samples: Vec<Sample> = (0..80).map(|i| Sample::new(i as f64, 0.0, 9.81)).collect();
        let labeled = LabeledSeries::new(samples.clone(), Some(vec![Activity::Jogging; 80]), 250.0).unwrap();
        let ds = featurize(&labeled, 3, 8).unwrap();
        assert_eq!(ds.len(), 10);
        assert_eq!(ds.n_features(), 42);
        assert!(ds.labels().unwrap().iter().all(|l| *l == Activity::Jogging));

        let unlabeled = LabeledSeries::unlabeled(samples, 250.0).unwrap();
        let ds = featurize(&unlabeled, 3, 8).unwrap();
        assert_eq!(ds.len(), 10);
        assert!(ds.labels().is_none());

        let short = LabeledSeries::unlabeled(vec![Sample::new(0.0, 0.0, 0.0); 7], 250.0).unwrap();
        assert!(matches!(featurize(&short, 3, 8), Err(FeatureError::TooShort(7))));
    }

    #[test]
    fn running_windows_vary_more_than_idle() {
        let p = SynthParams::with_seed(11);
        let mean_var = |a| {
            let ds = featurize(&synthesize(a, 10.0, &p).unwrap(), 3, 8).unwrap();
            let col = ds.column_of(FeatureId::parse("varianceaccx").unwrap()).unwrap();
            ds.rows().iter().map(|r| r[col]).sum::<f64>() / ds.len() as f64
        };
        assert!(mean_var(Activity::Running) > mean_var(Activity::Idle));
    }

    #[test]
    fn dataset_csv_roundtrip_and_select() {
        let p = SynthParams::with_seed(5);
        let ds = featurize(&synthesize(Activity::FastWalking, 1.0, &p).unwrap(), 3, 8).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        assert_eq!(FeatureDataset::read_csv(buf.as_slice()).unwrap(), ds);

        let sub = ds.select(&["energyaccz", "igraccx"]).unwrap();
        assert_eq!(sub.n_features(), 2);
        assert_eq!(sub.rows()[3][1], ds.rows()[3][9]);
        assert_eq!(sub.labels(), ds.labels());
        let mut buf = Vec::new();
        sub.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("energyaccz,iqraccx,activity\n"));
        assert!(ds.select(&["nope"]).is_err());
        assert!(ds.select(&["meanaccx", "meanaccx"]).is_err());
    }
}
