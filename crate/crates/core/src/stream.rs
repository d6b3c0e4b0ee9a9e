//! Real-time recognition: filter the incoming samples, classify every
//! 8-sample window, take the majority of each block of votes and charge
//! calories for the winning activity.

use std::collections::VecDeque;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::mpsc::{sync_channel, Receiver};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{self, median_of_odd, DspError, Window};
use crate::features::FeatureExtractor;
use crate::ingest::{Activity, CsvRows, IngestError, Row, Sample};
use crate::learn::{LearnError, TrainedModel};
use crate::{DEFAULT_SAMPLE_RATE_HZ, WINDOW_LEN};

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("no votes to decide from")]
    EmptyVotes,
    #[error("weight must be positive, got {0} kg")]
    Weight(f64),
    #[error("elapsed time must be non-negative, got {0} s")]
    Elapsed(f64),
    #[error("invalid stream configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// MET value per activity (kcal per kg per hour).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetTable([f64; Activity::COUNT]);

impl Default for MetTable {
    fn default() -> Self {
        MetTable([1.3, 2.0, 3.5, 4.3, 7.0, 14.5, 11.8])
    }
}

impl MetTable {
    pub fn new(values: [f64; Activity::COUNT]) -> Result<Self, StreamError> {
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(StreamError::Config("MET values must be positive".into()));
        }
        Ok(MetTable(values))
    }

    pub fn get(&self, a: Activity) -> f64 {
        self.0[a.index()]
    }
}

/// Calories burnt over `elapsed_s` seconds: `y · w · MET / 3600`.
pub fn calories(activity: Activity, elapsed_s: f64, weight_kg: f64, met: &MetTable) -> Result<f64, StreamError> {
    if !(weight_kg > 0.0 && weight_kg.is_finite()) {
        return Err(StreamError::Weight(weight_kg));
    }
    if !(elapsed_s >= 0.0 && elapsed_s.is_finite()) {
        return Err(StreamError::Elapsed(elapsed_s));
    }
    Ok(elapsed_s * weight_kg * met.get(activity) / (60.0 * 60.0))
}

/// Histogram of a vote buffer.
pub fn vote_histogram(votes: &[Activity]) -> [u32; Activity::COUNT] {
    let mut h = [0; Activity::COUNT];
    for v in votes {
        h[v.index()] += 1;
    }
    h
}

/// The most frequent vote; ties go to the smallest activity code.
pub fn majority_vote(votes: &[Activity]) -> Result<Activity, StreamError> {
    dsp::majority_label(votes).ok_or(StreamError::EmptyVotes)
}

/// How `elapsed_s` is measured for each decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ElapsedMode {
    /// Stream time covered by the block: votes · window / sample rate.
    #[default]
    StreamTime,
    /// Wall time since the previous decision (or since the first sample).
    WallClock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub weight_kg: f64,
    pub votes_per_decision: usize,
    pub window: usize,
    pub filter_width: usize,
    pub sample_rate_hz: f64,
    /// Replay pacing multiplier; 0 replays as fast as possible.
    pub replay_rate: f64,
    pub elapsed: ElapsedMode,
    pub met: MetTable,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            weight_kg: 70.0,
            votes_per_decision: 10,
            window: WINDOW_LEN,
            filter_width: 3,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            replay_rate: 0.0,
            elapsed: ElapsedMode::StreamTime,
            met: MetTable::default(),
        }
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<(), StreamError> {
        if !(self.weight_kg > 0.0 && self.weight_kg.is_finite()) {
            return Err(StreamError::Weight(self.weight_kg));
        }
        if self.votes_per_decision == 0 {
            return Err(StreamError::Config("votes per decision must be at least 1".into()));
        }
        if self.window != WINDOW_LEN {
            return Err(StreamError::Config(format!("window must be {WINDOW_LEN} samples")));
        }
        dsp::check_filter_width(self.filter_width)?;
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(StreamError::Config(format!("sample rate {}", self.sample_rate_hz)));
        }
        if !(self.replay_rate >= 0.0 && self.replay_rate.is_finite()) {
            return Err(StreamError::Config(format!("replay rate {}", self.replay_rate)));
        }
        Ok(())
    }

    /// Stream seconds covered by one decision block.
    pub fn block_seconds(&self) -> f64 {
        (self.votes_per_decision * self.window) as f64 / self.sample_rate_hz
    }
}

/// One smoothed decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "EventRecord", try_from = "EventRecord")]
pub struct RecognitionEvent {
    pub decision_index: u64,
    pub activity: Activity,
    pub elapsed_s: f64,
    pub kcal_delta: f64,
    pub kcal_total: f64,
    /// Vote counts by activity code.
    pub votes: [u32; Activity::COUNT],
}

/// JSON-lines layout of a [`RecognitionEvent`].
#[derive(Clone, Debug, Serialize, Deserialize)]
struct EventRecord {
    decision_index: u64,
    activity_code: u8,
    activity_name: String,
    elapsed_s: f64,
    kcal_delta: f64,
    kcal_total: f64,
    votes: [u32; Activity::COUNT],
}

impl From<RecognitionEvent> for EventRecord {
    fn from(e: RecognitionEvent) -> Self {
        EventRecord {
            decision_index: e.decision_index,
            activity_code: e.activity.code(),
            activity_name: e.activity.name().to_string(),
            elapsed_s: e.elapsed_s,
            kcal_delta: e.kcal_delta,
            kcal_total: e.kcal_total,
            votes: e.votes,
        }
    }
}

impl TryFrom<EventRecord> for RecognitionEvent {
    type Error = IngestError;

    fn try_from(r: EventRecord) -> Result<Self, Self::Error> {
        Ok(RecognitionEvent {
            decision_index: r.decision_index,
            activity: Activity::try_from(r.activity_code)?,
            elapsed_s: r.elapsed_s,
            kcal_delta: r.kcal_delta,
            kcal_total: r.kcal_total,
            votes: r.votes,
        })
    }
}

impl RecognitionEvent {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }
}

/// Centered running median over a stream, producing the same values as
/// [`dsp::median_filter`] on the whole sequence. Output `i` is released once
/// sample `i + width/2` has arrived; [`StreamingMedian::finish`] flushes the
/// tail using the last sample as the boundary value.
#[derive(Clone, Debug)]
pub struct StreamingMedian {
    width: usize,
    half: usize,
    /// Raw values with indices `base..received`.
    history: VecDeque<f64>,
    base: usize,
    received: usize,
    emitted: usize,
    scratch: Vec<f64>,
}

impl StreamingMedian {
    pub fn new(width: usize) -> Result<Self, DspError> {
        dsp::check_filter_width(width)?;
        Ok(StreamingMedian {
            width,
            half: width / 2,
            history: VecDeque::with_capacity(width + 1),
            base: 0,
            received: 0,
            emitted: 0,
            scratch: vec![0.0; width],
        })
    }

    fn median_at(&mut self, i: usize) -> f64 {
        let last = self.received - 1;
        for (k, slot) in self.scratch.iter_mut().enumerate() {
            let j = (i + k).saturating_sub(self.half).min(last);
            let j = if i + k < self.half { 0 } else { j };
            *slot = self.history[j.max(self.base) - self.base];
        }
        median_of_odd(&mut self.scratch)
    }

    pub fn push(&mut self, x: f64) -> Option<f64> {
        self.history.push_back(x);
        self.received += 1;
        if self.received <= self.half {
            return None;
        }
        let i = self.emitted;
        let out = self.median_at(i);
        self.emitted += 1;
        // Output i+1 needs raw values from i+1-half on (clamped at 0).
        let keep_from = (self.emitted).saturating_sub(self.half);
        while self.base < keep_from && self.history.len() > 1 {
            self.history.pop_front();
            self.base += 1;
        }
        Some(out)
    }

    /// Remaining outputs once the input has ended.
    pub fn finish(&mut self) -> Vec<f64> {
        let mut out = Vec::new();
        while self.emitted < self.received {
            let i = self.emitted;
            out.push(self.median_at(i));
            self.emitted += 1;
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

/// Incremental recognizer. Feed samples with [`Recognizer::push`]; each call
/// returns at most one event. Call [`Recognizer::finish`] at end of stream;
/// a partial vote block is dropped.
pub struct Recognizer<'m> {
    model: &'m TrainedModel,
    cfg: StreamConfig,
    extractor: FeatureExtractor,
    filters: [StreamingMedian; 3],
    window: [Vec<f64>; 3],
    votes: Vec<Activity>,
    decision_index: u64,
    kcal_total: f64,
    last_decision: Option<Instant>,
}

impl<'m> Recognizer<'m> {
    pub fn new(model: &'m TrainedModel, cfg: StreamConfig) -> Result<Self, StreamError> {
        cfg.validate()?;
        if model.feature_names.is_empty() {
            return Err(StreamError::Config("model has no features".into()));
        }
        let f = || StreamingMedian::new(cfg.filter_width);
        Ok(Recognizer {
            model,
            extractor: FeatureExtractor::new(&model.feature_names),
            filters: [f()?, f()?, f()?],
            window: [Vec::with_capacity(WINDOW_LEN), Vec::with_capacity(WINDOW_LEN), Vec::with_capacity(WINDOW_LEN)],
            votes: Vec::with_capacity(cfg.votes_per_decision),
            decision_index: 0,
            kcal_total: 0.0,
            last_decision: None,
            cfg,
        })
    }

    pub fn kcal_total(&self) -> f64 {
        self.kcal_total
    }

    pub fn push(&mut self, s: Sample) -> Result<Option<RecognitionEvent>, StreamError> {
        if !s.is_finite() {
            return Err(IngestError::InvalidSeries("non-finite sample in stream".into()).into());
        }
        if self.last_decision.is_none() {
            self.last_decision = Some(Instant::now());
        }
        let filtered = [self.filters[0].push(s.ax), self.filters[1].push(s.ay), self.filters[2].push(s.az)];
        match filtered {
            [Some(x), Some(y), Some(z)] => self.accept([x, y, z]),
            _ => Ok(None),
        }
    }

    pub fn finish(mut self) -> Result<Vec<RecognitionEvent>, StreamError> {
        let [x, y, z] = [self.filters[0].finish(), self.filters[1].finish(), self.filters[2].finish()];
        let mut events = Vec::new();
        for ((x, y), z) in x.into_iter().zip(y).zip(z) {
            if let Some(e) = self.accept([x, y, z])? {
                events.push(e);
            }
        }
        Ok(events)
    }

    fn accept(&mut self, v: [f64; 3]) -> Result<Option<RecognitionEvent>, StreamError> {
        for (w, x) in self.window.iter_mut().zip(v) {
            w.push(x);
        }
        if self.window[0].len() < WINDOW_LEN {
            return Ok(None);
        }
        let axes = [0, 1, 2].map(|a| Window::from_slice(&self.window[a]).expect("full window"));
        for w in &mut self.window {
            w.clear();
        }
        let row = self.extractor.extract(&axes);
        let vote = self.model.predict_row(&row)?.activity;
        self.votes.push(vote);
        if self.votes.len() < self.cfg.votes_per_decision {
            return Ok(None);
        }
        let activity = majority_vote(&self.votes)?;
        let votes = vote_histogram(&self.votes);
        self.votes.clear();
        let elapsed_s = match self.cfg.elapsed {
            ElapsedMode::StreamTime => self.cfg.block_seconds(),
            ElapsedMode::WallClock => {
                let now = Instant::now();
                let since = self.last_decision.map_or(0.0, |t| now.duration_since(t).as_secs_f64());
                self.last_decision = Some(now);
                since
            }
        };
        let kcal_delta = calories(activity, elapsed_s, self.cfg.weight_kg, &self.cfg.met)?;
        self.kcal_total += kcal_delta;
        let event = RecognitionEvent {
            decision_index: self.decision_index,
            activity,
            elapsed_s,
            kcal_delta,
            kcal_total: self.kcal_total,
            votes,
        };
        self.decision_index += 1;
        Ok(Some(event))
    }
}

/// Runs `source` through a [`Recognizer`], handing each event to `on_event`
/// as soon as it is decided.
pub fn run_stream_with<I, E>(
    source: I,
    model: &TrainedModel,
    cfg: &StreamConfig,
    mut on_event: impl FnMut(&RecognitionEvent) -> Result<(), StreamError>,
) -> Result<(), StreamError>
where
    I: IntoIterator<Item = Result<Sample, E>>,
    StreamError: From<E>,
{
    let mut rec = Recognizer::new(model, cfg.clone())?;
    for s in source {
        if let Some(e) = rec.push(s?)? {
            on_event(&e)?;
        }
    }
    for e in rec.finish()? {
        on_event(&e)?;
    }
    Ok(())
}

/// Collects every event of a stream.
pub fn run_stream<I, E>(
    source: I,
    model: &TrainedModel,
    cfg: &StreamConfig,
) -> Result<Vec<RecognitionEvent>, StreamError>
where
    I: IntoIterator<Item = Result<Sample, E>>,
    StreamError: From<E>,
{
    let mut out = Vec::new();
    run_stream_with(source, model, cfg, |e| {
        out.push(e.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Rows of a CSV file delivered by a producer thread at
/// `sample_rate_hz × multiplier` rows per wall-clock second (as fast as
/// possible for multiplier 0), over a bounded channel.
pub struct Replay {
    rx: Receiver<Result<Row, IngestError>>,
    handle: Option<JoinHandle<()>>,
}

const REPLAY_CHANNEL_BOUND: usize = 1024;

pub fn replay(path: &Path, sample_rate_hz: f64, multiplier: f64) -> Result<Replay, StreamError> {
    if !(multiplier >= 0.0 && multiplier.is_finite()) {
        return Err(StreamError::Config(format!("replay multiplier {multiplier}")));
    }
    if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
        return Err(StreamError::Config(format!("sample rate {sample_rate_hz}")));
    }
    let file = File::open(path)?;
    let (tx, rx) = sync_channel(REPLAY_CHANNEL_BOUND);
    let handle = thread::spawn(move || {
        let start = Instant::now();
        let period = if multiplier > 0.0 { 1.0 / (sample_rate_hz * multiplier) } else { 0.0 };
        for (i, row) in CsvRows::new(BufReader::new(file)).enumerate() {
            if period > 0.0 {
                let due = start + Duration::from_secs_f64(i as f64 * period);
                let now = Instant::now();
                if due > now {
                    thread::sleep(due - now);
                }
            }
            let failed = row.is_err();
            if tx.send(row).is_err() || failed {
                break;
            }
        }
    });
    Ok(Replay { rx, handle: Some(handle) })
}

impl Replay {
    /// Just the samples, for feeding [`run_stream`].
    pub fn samples(self) -> impl Iterator<Item = Result<Sample, IngestError>> {
        self.map(|r| r.map(|row| row.sample))
    }
}

impl Iterator for Replay {
    type Item = Result<Row, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.rx.recv() {
            Ok(item) => Some(item),
            Err(_) => {
                if let Some(h) = self.handle.take() {
                    let _ = h.join();
                }
                None
            }
        }
    }
}
