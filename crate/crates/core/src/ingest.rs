//! Labeled accelerometer recordings: the CSV format and a seeded generator.
//!
//! Files look like
//!
//! ```text
//! accx,accy,accz,activity
//! 13.9151,-5.58328,-3.60088,2
//! ```
//!
//! The `activity` column is optional. There is no timestamp column; time is
//! the row index divided by the sample rate.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::DEFAULT_SAMPLE_RATE_HZ;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("bad header {found:?}: expected accx,accy,accz[,activity]")]
    Header { found: String },
    #[error("unknown activity {0:?}")]
    UnknownActivity(String),
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("invalid synthesis parameters: {0}")]
    InvalidParams(String),
    #[error("duration must be positive, got {0}")]
    Duration(f64),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The seven recognised activities. Codes 0 and 2 come from the recorded
/// dataset; the rest follow the recording order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Activity {
    Idle = 0,
    SlowWalking = 1,
    NormalWalking = 2,
    FastWalking = 3,
    Jogging = 4,
    Running = 5,
    Jumping = 6,
}

impl Activity {
    pub const COUNT: usize = 7;

    pub const ALL: [Activity; Activity::COUNT] = [
        Activity::Idle,
        Activity::SlowWalking,
        Activity::NormalWalking,
        Activity::FastWalking,
        Activity::Jogging,
        Activity::Running,
        Activity::Jumping,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: u8) -> Option<Activity> {
        Activity::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Activity::Idle => "Idle",
            Activity::SlowWalking => "SlowWalking",
            Activity::NormalWalking => "NormalWalking",
            Activity::FastWalking => "FastWalking",
            Activity::Jogging => "Jogging",
            Activity::Running => "Running",
            Activity::Jumping => "Jumping",
        }
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<Activity> for u8 {
    fn from(a: Activity) -> u8 {
        a.code()
    }
}

impl TryFrom<u8> for Activity {
    type Error = IngestError;

    fn try_from(code: u8) -> Result<Self, Self::Error> {
        Activity::from_code(code).ok_or_else(|| IngestError::UnknownActivity(code.to_string()))
    }
}

/// Accepts the canonical name in any case, with or without `-`/`_`
/// separators (`slow-walking`, `SlowWalking`, `slow_walking`), or the code.
impl FromStr for Activity {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        if let Ok(code) = trimmed.parse::<u8>() {
            return Activity::try_from(code);
        }
        let folded: String =
            trimmed.chars().filter(|c| *c != '-' && *c != '_' && *c != ' ').flat_map(char::to_lowercase).collect();
        Activity::ALL
            .into_iter()
            .find(|a| a.name().to_lowercase() == folded)
            .ok_or_else(|| IngestError::UnknownActivity(s.to_string()))
    }
}

/// One triaxial reading in m/s².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

impl Sample {
    pub fn new(ax: f64, ay: f64, az: f64) -> Self {
        Sample { ax, ay, az }
    }

    pub fn is_finite(&self) -> bool {
        self.ax.is_finite() && self.ay.is_finite() && self.az.is_finite()
    }

    pub fn axis(&self, axis: usize) -> f64 {
        match axis {
            0 => self.ax,
            1 => self.ay,
            2 => self.az,
            _ => panic!("axis index {axis} out of range"),
        }
    }
}

/// Time-ordered samples with optional per-sample labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSeries {
    samples: Vec<Sample>,
    labels: Option<Vec<Activity>>,
    sample_rate_hz: f64,
}

impl LabeledSeries {
    pub fn new(samples: Vec<Sample>, labels: Option<Vec<Activity>>, sample_rate_hz: f64) -> Result<Self, IngestError> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(IngestError::InvalidSeries(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        if let Some(labels) = &labels {
            if labels.len() != samples.len() {
                return Err(IngestError::InvalidSeries(format!(
                    "{} labels for {} samples",
                    labels.len(),
                    samples.len()
                )));
            }
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(IngestError::InvalidSeries(format!("sample {i} is not finite")));
        }
        Ok(LabeledSeries { samples, labels, sample_rate_hz })
    }

    pub fn unlabeled(samples: Vec<Sample>, sample_rate_hz: f64) -> Result<Self, IngestError> {
        Self::new(samples, None, sample_rate_hz)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn labels(&self) -> Option<&[Activity]> {
        self.labels.as_deref()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// One axis as a contiguous vector (0 = x, 1 = y, 2 = z).
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.axis(axis)).collect()
    }

    /// Appends `other`. Both must share the sample rate and both be labeled
    /// or both unlabeled.
    pub fn extend(&mut self, other: &LabeledSeries) -> Result<(), IngestError> {
        if other.sample_rate_hz != self.sample_rate_hz {
            return Err(IngestError::InvalidSeries("sample rates differ".into()));
        }
        match (&mut self.labels, &other.labels) {
            (Some(mine), Some(theirs)) => mine.extend_from_slice(theirs),
            (None, None) => {}
            _ if self.samples.is_empty() => self.labels = other.labels.clone(),
            _ => return Err(IngestError::InvalidSeries("cannot mix labeled and unlabeled".into())),
        }
        self.samples.extend_from_slice(&other.samples);
        Ok(())
    }
}

/// A parsed CSV row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Row {
    pub sample: Sample,
    pub label: Option<Activity>,
}

/// Row-at-a-time reader over the accelerometer CSV format. Used directly by
/// the replay source; [`parse_csv`] collects it.
pub struct CsvRows<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    labeled: bool,
    header_err: Option<IngestError>,
    done: bool,
}

impl<R: Read> CsvRows<R> {
    pub fn new(reader: R) -> Self {
        let mut rdr =
            csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
        let mut labeled = false;
        let mut header_err = None;
        let mut first = csv::StringRecord::new();
        match rdr.read_record(&mut first) {
            Ok(true) => {
                let cols: Vec<&str> = first.iter().collect();
                match cols.as_slice() {
                    ["accx", "accy", "accz"] => {}
                    ["accx", "accy", "accz", "activity"] => labeled = true,
                    _ => {
                        header_err = Some(IngestError::Header { found: cols.join(",") });
                    }
                }
            }
            // Completely empty input reads as an empty unlabeled series.
            Ok(false) => {}
            Err(e) => header_err = Some(e.into()),
        }
        CsvRows { records: rdr.into_records(), labeled, header_err, done: false }
    }

    pub fn is_labeled(&self) -> bool {
        self.labeled
    }

    fn parse_record(&self, record: &csv::StringRecord) -> Result<Row, IngestError> {
        let line = record.position().map_or(0, |p| p.line());
        let expected = if self.labeled { 4 } else { 3 };
        if record.len() != expected {
            return Err(IngestError::Parse {
                line,
                msg: format!("expected {expected} columns, found {}", record.len()),
            });
        }
        let mut vals = [0.0f64; 3];
        for (i, v) in vals.iter_mut().enumerate() {
            let field = &record[i];
            *v = field
                .parse::<f64>()
                .map_err(|_| IngestError::Parse { line, msg: format!("not a number: {field:?}") })?;
            if !v.is_finite() {
                return Err(IngestError::Parse { line, msg: format!("non-finite value {field:?}") });
            }
        }
        let label = if self.labeled {
            let field = &record[3];
            let code = field
                .parse::<u8>()
                .ok()
                .and_then(Activity::from_code)
                .ok_or_else(|| IngestError::Parse { line, msg: format!("unknown activity code {field:?}") })?;
            Some(code)
        } else {
            None
        };
        Ok(Row { sample: Sample::new(vals[0], vals[1], vals[2]), label })
    }
}

impl<R: Read> Iterator for CsvRows<R> {
    type Item = Result<Row, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        if let Some(e) = self.header_err.take() {
            self.done = true;
            return Some(Err(e));
        }
        loop {
            let record = match self.records.next()? {
                Ok(r) => r,
                Err(e) => return Some(Err(e.into())),
            };
            // Tolerate blank lines (e.g. a trailing one).
            if record.len() == 1 && record[0].is_empty() {
                continue;
            }
            return Some(self.parse_record(&record));
        }
    }
}

/// Reads a whole CSV stream. The file carries no rate, so the caller supplies
/// it.
pub fn parse_csv<R: Read>(reader: R, sample_rate_hz: f64) -> Result<LabeledSeries, IngestError> {
    let rows = CsvRows::new(reader);
    let labeled = rows.is_labeled();
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for row in rows {
        let row = row?;
        samples.push(row.sample);
        if let Some(l) = row.label {
            labels.push(l);
        }
    }
    LabeledSeries::new(samples, labeled.then_some(labels), sample_rate_hz)
}

/// Writes `series` in the CSV format. Values use the shortest decimal form
/// that parses back to the same `f64`.
pub fn write_csv<W: Write>(mut writer: W, series: &LabeledSeries) -> Result<(), IngestError> {
    let labels = series.labels();
    if labels.is_some() {
        writer.write_all(b"accx,accy,accz,activity\n")?;
    } else {
        writer.write_all(b"accx,accy,accz\n")?;
    }
    for (i, s) in series.samples().iter().enumerate() {
        match labels {
            Some(l) => writeln!(writer, "{},{},{},{}", s.ax, s.ay, s.az, l[i].code())?,
            None => writeln!(writer, "{},{},{}", s.ax, s.ay, s.az)?,
        }
    }
    writer.flush()?;
    Ok(())
}

/// Motion model for one activity: a sinusoid of `amplitude` (scaled per axis
/// by `axis_gain`) at `frequency_hz` plus Gaussian noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivityProfile {
    pub amplitude: f64,
    pub frequency_hz: f64,
    pub noise_std: f64,
    pub axis_gain: [f64; 3],
}

impl ActivityProfile {
    pub const fn new(amplitude: f64, frequency_hz: f64, noise_std: f64) -> Self {
        ActivityProfile { amplitude, frequency_hz, noise_std, axis_gain: [1.0, 1.0, 1.0] }
    }
}

/// Per-axis phase offsets of the synthetic motion (radians).
pub const AXIS_PHASE: [f64; 3] = [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0];

/// Parameters of the synthetic recording generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    /// Indexed by activity code.
    pub profiles: [ActivityProfile; Activity::COUNT],
    /// Gravity component on each axis (m/s²).
    pub gravity: [f64; 3],
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        let mut jumping = ActivityProfile::new(12.0, 2.9, 2.7);
        jumping.axis_gain = [0.2, 0.2, 1.4];
        SynthParams {
            profiles: [
                ActivityProfile::new(0.0, 0.0, 0.3),
                ActivityProfile::new(0.9, 0.9, 0.39),
                ActivityProfile::new(4.3, 1.3, 0.47),
                ActivityProfile::new(6.4, 2.2, 0.58),
                ActivityProfile::new(10.5, 2.7, 0.69),
                ActivityProfile::new(12.0, 3.0, 2.0),
                jumping,
            ],
            gravity: [0.0, 0.0, 9.81],
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn with_seed(seed: u64) -> Self {
        SynthParams { seed, ..Default::default() }
    }

    pub fn profile(&self, activity: Activity) -> &ActivityProfile {
        &self.profiles[activity.index()]
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: String| Err(IngestError::InvalidParams(m));
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad(format!("sample rate {}", self.sample_rate_hz));
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return bad("gravity must be finite".into());
        }
        for (a, p) in Activity::ALL.iter().zip(&self.profiles) {
            let fields = [p.amplitude, p.frequency_hz, p.noise_std];
            if !fields.iter().chain(&p.axis_gain).all(|v| v.is_finite() && *v >= 0.0) {
                return bad(format!("{a}: amplitude, frequency, noise and gains must be finite and >= 0"));
            }
        }
        // Intensity ordering Idle -> Running; Jumping stands apart.
        for pair in self.profiles[..=Activity::Running.index()].windows(2) {
            if pair[1].amplitude < pair[0].amplitude || pair[1].frequency_hz < pair[0].frequency_hz {
                return bad("amplitude and frequency must be non-decreasing from Idle to Running".into());
            }
        }
        Ok(())
    }
}

/// Generates `duration_s` seconds of `activity`. Deterministic in all
/// arguments including `params.seed`; each activity draws noise from its own
/// stream of the seeded generator.
pub fn synthesize(activity: Activity, duration_s: f64, params: &SynthParams) -> Result<LabeledSeries, IngestError> {
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(IngestError::Duration(duration_s));
    }
    params.validate()?;
    let n = (duration_s * params.sample_rate_hz).floor() as usize;
    let p = params.profile(activity);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(activity.code() as u64);
    let noise = Normal::new(0.0, p.noise_std).map_err(|e| IngestError::InvalidParams(e.to_string()))?;

    let omega = 2.0 * PI * p.frequency_hz;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / params.sample_rate_hz;
            let mut v = [0.0; 3];
            for (axis, out) in v.iter_mut().enumerate() {
                let motion = p.amplitude * p.axis_gain[axis] * (omega * t + AXIS_PHASE[axis]).sin();
                *out = params.gravity[axis] + motion + noise.sample(&mut rng);
            }
            Sample::new(v[0], v[1], v[2])
        })
        .collect();
    LabeledSeries::new(samples, Some(vec![activity; n]), params.sample_rate_hz)
}

/// Concatenates `duration_s`-long segments of each activity in order.
pub fn synthesize_sequence(segments: &[(Activity, f64)], params: &SynthParams) -> Result<LabeledSeries, IngestError> {
    let mut out = LabeledSeries::new(Vec::new(), Some(Vec::new()), params.sample_rate_hz)?;
    for &(activity, duration) in segments {
        out.extend(&synthesize(activity, duration, params)?)?;
    }
    Ok(out)
}
