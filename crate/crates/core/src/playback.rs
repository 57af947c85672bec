//! Frame playback with time dilation. Frames are offered to an estimator on a
//! schedule stretched by `1 / rate_factor`; in drop mode a frame that arrives
//! while the estimator is busy is skipped rather than queued.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slow-motion factor giving the estimator five times the source interval.
pub const SLOMO_RATE: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlaybackError {
    #[error("frame list is empty")]
    EmptyFrames,
    #[error("frame {0}: timestamp does not increase")]
    NonMonotonicFrames(usize),
    #[error("rate factor must be positive, got {0}")]
    InvalidRate(f64),
    #[error("no timing spans on tracked frames")]
    NoTrackedFrames,
    #[error("invalid estimator spec: {0}")]
    InvalidSpec(String),
    #[error("frame CSV: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEvent {
    pub index: usize,
    pub t_source: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

impl FrameEvent {
    pub fn new(index: usize, t_source: f64) -> Self {
        Self {
            index,
            t_source,
            payload: None,
        }
    }
}

/// `n` frames at `hz`, starting at time zero.
pub fn uniform_frames(n: usize, hz: f64) -> Vec<FrameEvent> {
    (0..n).map(|i| FrameEvent::new(i, i as f64 / hz)).collect()
}

pub fn check_frames(frames: &[FrameEvent]) -> Result<(), PlaybackError> {
    if frames.is_empty() {
        return Err(PlaybackError::EmptyFrames);
    }
    match frames.windows(2).find(|w| !(w[1].t_source > w[0].t_source)) {
        Some(w) => Err(PlaybackError::NonMonotonicFrames(w[1].index)),
        None => Ok(()),
    }
}

/// Reads `index,t_source` rows.
pub fn parse_frames(csv_text: &str) -> Result<Vec<FrameEvent>, PlaybackError> {
    #[derive(Deserialize)]
    struct Row {
        index: usize,
        t_source: f64,
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let frames = reader
        .deserialize()
        .map(|r| {
            r.map(|row: Row| FrameEvent::new(row.index, row.t_source))
                .map_err(|e| PlaybackError::Csv(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    check_frames(&frames)?;
    Ok(frames)
}

pub fn write_frames(frames: &[FrameEvent]) -> String {
    let mut out = String::from("index,t_source\n");
    for f in frames {
        out.push_str(&format!("{},{}\n", f.index, f.t_source));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DeliveryMode {
    /// Skip frames that arrive while the estimator is busy.
    RealtimeDrop,
    /// Process every frame in order, each after the previous one finishes.
    EveryFrame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClockKind {
    Wall,
    /// Time advances by the durations the estimator reports.
    Virtual,
}

impl FromStr for DeliveryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "realtime_drop" | "drop" => Ok(Self::RealtimeDrop),
            "every_frame" => Ok(Self::EveryFrame),
            other => Err(format!("unknown playback mode '{other}'")),
        }
    }
}

impl FromStr for ClockKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wall" => Ok(Self::Wall),
            "virtual" => Ok(Self::Virtual),
            other => Err(format!("unknown clock '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaybackConfig {
    pub rate_factor: f64,
    pub mode: DeliveryMode,
    pub clock: ClockKind,
}

impl PlaybackConfig {
    pub fn new(rate_factor: f64, mode: DeliveryMode, clock: ClockKind) -> Result<Self, PlaybackError> {
        if !(rate_factor > 0.0 && rate_factor.is_finite()) {
            return Err(PlaybackError::InvalidRate(rate_factor));
        }
        Ok(Self {
            rate_factor,
            mode,
            clock,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSpan {
    pub frame: usize,
    pub component: String,
    pub duration: f64,
}

/// What an estimator returns for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub tracked: bool,
    pub spans: Vec<TimingSpan>,
}

impl FrameOutcome {
    pub fn duration(&self) -> f64 {
        self.spans.iter().map(|s| s.duration).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct EstimatorFault(pub String);

pub trait Estimator {
    fn process(&mut self, frame: &FrameEvent) -> Result<FrameOutcome, EstimatorFault>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveredFrame {
    pub index: usize,
    /// Seconds since playback start.
    pub t_delivery: f64,
    pub tracked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultRecord {
    pub frame: usize,
    pub message: String,
}

/// Outcome of one playback. Frames that faulted are listed in `dropped` too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub config: PlaybackConfig,
    pub delivered: Vec<DeliveredFrame>,
    pub dropped: Vec<usize>,
    pub spans: Vec<TimingSpan>,
    pub faults: Vec<FaultRecord>,
}

impl RunLog {
    fn new(config: PlaybackConfig) -> Self {
        Self {
            config,
            delivered: Vec::new(),
            dropped: Vec::new(),
            spans: Vec::new(),
            faults: Vec::new(),
        }
    }

    fn record(&mut self, frame: &FrameEvent, t_delivery: f64, result: Result<FrameOutcome, EstimatorFault>) {
        match result {
            Ok(outcome) => {
                self.delivered.push(DeliveredFrame {
                    index: frame.index,
                    t_delivery,
                    tracked: outcome.tracked,
                });
                self.spans.extend(outcome.spans);
            }
            Err(fault) => {
                self.dropped.push(frame.index);
                self.faults.push(FaultRecord {
                    frame: frame.index,
                    message: fault.0,
                });
            }
        }
    }

    fn sort(&mut self) {
        self.delivered.sort_by_key(|d| d.index);
        self.dropped.sort_unstable();
        self.faults.sort_by_key(|f| f.frame);
        self.spans.sort_by_key(|s| s.frame);
    }

    pub fn delivered_indices(&self) -> Vec<usize> {
        self.delivered.iter().map(|d| d.index).collect()
    }
}

/// Delivery offsets from playback start: `(t_i − t_0) / rate_factor`.
pub fn schedule(frames: &[FrameEvent], config: &PlaybackConfig) -> Result<Vec<f64>, PlaybackError> {
    check_frames(frames)?;
    if !(config.rate_factor > 0.0) {
        return Err(PlaybackError::InvalidRate(config.rate_factor));
    }
    let t0 = frames[0].t_source;
    Ok(frames
        .iter()
        .map(|f| (f.t_source - t0) / config.rate_factor)
        .collect())
}

pub fn run<E: Estimator + Send>(
    frames: &[FrameEvent],
    estimator: &mut E,
    config: &PlaybackConfig,
) -> Result<RunLog, PlaybackError> {
    let plan = schedule(frames, config)?;
    let mut log = match config.clock {
        ClockKind::Virtual => run_virtual(frames, &plan, estimator, config),
        ClockKind::Wall => match config.mode {
            DeliveryMode::EveryFrame => run_wall_sequential(frames, &plan, estimator, config),
            DeliveryMode::RealtimeDrop => run_wall_drop(frames, &plan, estimator, config),
        },
    };
    log.sort();
    Ok(log)
}

fn run_virtual<E: Estimator>(
    frames: &[FrameEvent],
    plan: &[f64],
    estimator: &mut E,
    config: &PlaybackConfig,
) -> RunLog {
    let mut log = RunLog::new(*config);
    let mut busy_until = f64::NEG_INFINITY;
    for (frame, &t) in frames.iter().zip(plan) {
        let start = match config.mode {
            DeliveryMode::RealtimeDrop if t < busy_until => {
                log.dropped.push(frame.index);
                continue;
            }
            DeliveryMode::RealtimeDrop => t,
            DeliveryMode::EveryFrame => t.max(busy_until),
        };
        let result = estimator.process(frame);
        busy_until = start + result.as_ref().map_or(0.0, FrameOutcome::duration);
        log.record(frame, start, result);
    }
    log
}

fn sleep_until(start: Instant, offset: f64) {
    let target = start + Duration::from_secs_f64(offset.max(0.0));
    let now = Instant::now();
    if target > now {
        std::thread::sleep(target - now);
    }
}

fn run_wall_sequential<E: Estimator>(
    frames: &[FrameEvent],
    plan: &[f64],
    estimator: &mut E,
    config: &PlaybackConfig,
) -> RunLog {
    let mut log = RunLog::new(*config);
    let start = Instant::now();
    for (frame, &t) in frames.iter().zip(plan) {
        sleep_until(start, t);
        let delivered = start.elapsed().as_secs_f64();
        let result = estimator.process(frame);
        log.record(frame, delivered, result);
    }
    log
}

/// Delivery runs on the calling thread and never waits for the estimator,
/// which runs on a worker thread and signals availability through `busy`.
fn run_wall_drop<E: Estimator + Send>(
    frames: &[FrameEvent],
    plan: &[f64],
    estimator: &mut E,
    config: &PlaybackConfig,
) -> RunLog {
    let busy = AtomicBool::new(false);
    let (frame_tx, frame_rx) = mpsc::channel::<(usize, f64)>();
    let mut log = RunLog::new(*config);

    let results = std::thread::scope(|scope| {
        let worker = scope.spawn(|| {
            let mut out = Vec::new();
            for (pos, delivered) in frame_rx {
                let result = estimator.process(&frames[pos]);
                out.push((pos, delivered, result));
                busy.store(false, Ordering::Release);
            }
            out
        });

        let start = Instant::now();
        for (pos, &t) in plan.iter().enumerate() {
            sleep_until(start, t);
            if busy.load(Ordering::Acquire) {
                log.dropped.push(frames[pos].index);
                continue;
            }
            busy.store(true, Ordering::Release);
            frame_tx
                .send((pos, start.elapsed().as_secs_f64()))
                .expect("worker alive while sender exists");
        }
        drop(frame_tx);
        worker.join().expect("estimator worker panicked")
    });

    for (pos, delivered, result) in results {
        log.record(&frames[pos], delivered, result);
    }
    log
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentProfile {
    pub component: String,
    pub count: usize,
    pub total_s: f64,
    pub mean_s: f64,
}

/// Mean duration per component over spans on tracked frames, components in
/// order of first appearance.
pub fn aggregate_profile(logs: &[RunLog]) -> Result<Vec<ComponentProfile>, PlaybackError> {
    let mut order: Vec<String> = Vec::new();
    let mut acc: HashMap<String, (usize, f64)> = HashMap::new();
    for log in logs {
        let tracked: HashSet<usize> = log
            .delivered
            .iter()
            .filter(|d| d.tracked)
            .map(|d| d.index)
            .collect();
        for span in log.spans.iter().filter(|s| tracked.contains(&s.frame)) {
            let entry = acc.entry(span.component.clone()).or_insert_with(|| {
                order.push(span.component.clone());
                (0, 0.0)
            });
            entry.0 += 1;
            entry.1 += span.duration;
        }
    }
    if order.is_empty() {
        return Err(PlaybackError::NoTrackedFrames);
    }
    Ok(order
        .into_iter()
        .map(|component| {
            let (count, total_s) = acc[&component];
            ComponentProfile {
                component,
                count,
                total_s,
                mean_s: total_s / count as f64,
            }
        })
        .collect())
}

pub fn write_profile(profile: &[ComponentProfile]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in profile {
        w.serialize(p).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

/// Per-component duration: either fixed or drawn uniformly from a range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_s: Option<f64>,
}

impl ComponentSpec {
    pub fn fixed(name: &str, duration_s: f64) -> Self {
        Self {
            name: name.to_string(),
            duration_s: Some(duration_s),
            min_s: None,
            max_s: None,
        }
    }

    pub fn uniform(name: &str, min_s: f64, max_s: f64) -> Self {
        Self {
            name: name.to_string(),
            duration_s: None,
            min_s: Some(min_s),
            max_s: Some(max_s),
        }
    }
}

/// Synthetic estimator description, read from TOML:
///
/// ```toml
/// seed = 7
/// tracked_probability = 0.95
///
/// [[component]]
/// name = "feature_extraction"
/// duration_s = 0.010
///
/// [[component]]
/// name = "matching"
/// min_s = 0.004
/// max_s = 0.008
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "always")]
    pub tracked_probability: f64,
    #[serde(rename = "component")]
    pub components: Vec<ComponentSpec>,
}

fn always() -> f64 {
    1.0
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            tracked_probability: 1.0,
            components: vec![
                ComponentSpec::fixed("feature_extraction", 0.060),
                ComponentSpec::fixed("matching", 0.030),
                ComponentSpec::fixed("pose_optimization", 0.030),
            ],
        }
    }
}

impl EstimatorSpec {
    pub fn validate(&self) -> Result<(), PlaybackError> {
        let bad = |m: String| Err(PlaybackError::InvalidSpec(m));
        if self.components.is_empty() {
            return bad("no components".into());
        }
        if !(0.0..=1.0).contains(&self.tracked_probability) {
            return bad(format!("tracked_probability {} outside [0, 1]", self.tracked_probability));
        }
        for c in &self.components {
            match (c.duration_s, c.min_s, c.max_s) {
                (Some(d), None, None) if d >= 0.0 && d.is_finite() => {}
                (None, Some(lo), Some(hi)) if lo >= 0.0 && lo <= hi && hi.is_finite() => {}
                _ => {
                    return bad(format!(
                        "component '{}' needs a non-negative duration_s or a min_s <= max_s range",
                        c.name
                    ))
                }
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, PlaybackError> {
        let spec: Self = toml::from_str(text).map_err(|e| PlaybackError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }
}

/// Stand-in estimator emitting one span per configured component. Draws for a
/// frame depend only on the seed and the frame index.
#[derive(Debug, Clone)]
pub struct SyntheticEstimator {
    spec: EstimatorSpec,
    sleep: bool,
}

impl SyntheticEstimator {
    pub fn new(spec: EstimatorSpec) -> Result<Self, PlaybackError> {
        spec.validate()?;
        Ok(Self { spec, sleep: false })
    }

    /// Makes `process` actually take the declared time, for wall-clock runs.
    pub fn sleeping(mut self, sleep: bool) -> Self {
        self.sleep = sleep;
        self
    }
}

impl Estimator for SyntheticEstimator {
    fn process(&mut self, frame: &FrameEvent) -> Result<FrameOutcome, EstimatorFault> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(frame.index as u64);
        let spans: Vec<TimingSpan> = self
            .spec
            .components
            .iter()
            .map(|c| TimingSpan {
                frame: frame.index,
                component: c.name.clone(),
                duration: match (c.duration_s, c.min_s, c.max_s) {
                    (Some(d), _, _) => d,
                    (None, Some(lo), Some(hi)) if hi > lo => rng.gen_range(lo..hi),
                    (None, Some(lo), _) => lo,
                    _ => 0.0,
                },
            })
            .collect();
        let tracked = rng.gen::<f64>() < self.spec.tracked_probability;
        let outcome = FrameOutcome { tracked, spans };
        if self.sleep {
            std::thread::sleep(Duration::from_secs_f64(outcome.duration()));
        }
        Ok(outcome)
    }
}

impl fmt::Display for DeliveryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::RealtimeDrop => "REALTIME_DROP",
            Self::EveryFrame => "EVERY_FRAME",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed(d: f64) -> SyntheticEstimator {
        SyntheticEstimator::new(EstimatorSpec {
            seed: 1,
            tracked_probability: 1.0,
            components: vec![ComponentSpec::fixed("work", d)],
        })
        .unwrap()
    }

    fn cfg(rate: f64, mode: DeliveryMode) -> PlaybackConfig {
        PlaybackConfig::new(rate, mode, ClockKind::Virtual).unwrap()
    }

    #[test]
    fn schedule_dilates() {
        let frames = uniform_frames(4, 20.0);
        let plan = schedule(&frames, &cfg(0.2, DeliveryMode::RealtimeDrop)).unwrap();
        for w in plan.windows(2) {
            assert!((w[1] - w[0] - 0.25).abs() < 1e-12);
        }
        let same = schedule(&frames, &cfg(1.0, DeliveryMode::RealtimeDrop)).unwrap();
        assert!(same.iter().zip(&frames).all(|(d, f)| (d - f.t_source).abs() < 1e-15));
    }

    #[test]
    fn schedule_rejects_equal_stamps() {
        let frames = vec![FrameEvent::new(0, 1.0), FrameEvent::new(1, 1.0)];
        assert_eq!(
            schedule(&frames, &cfg(1.0, DeliveryMode::EveryFrame)),
            Err(PlaybackError::NonMonotonicFrames(1))
        );
        assert_eq!(
            PlaybackConfig::new(0.0, DeliveryMode::EveryFrame, ClockKind::Virtual),
            Err(PlaybackError::InvalidRate(0.0))
        );
    }

    #[test]
    fn busy_estimator_drops_frames() {
        let frames = uniform_frames(10, 20.0);
        let log = run(&frames, &mut fixed(0.120), &cfg(1.0, DeliveryMode::RealtimeDrop)).unwrap();
        assert_eq!(log.delivered_indices(), vec![0, 3, 6, 9]);
        assert_eq!(log.dropped.len(), 6);
        let slow = run(&frames, &mut fixed(0.120), &cfg(SLOMO_RATE, DeliveryMode::RealtimeDrop)).unwrap();
        assert!(slow.dropped.is_empty());
    }

    #[test]
    fn every_frame_never_drops() {
        let frames = uniform_frames(10, 20.0);
        let log = run(&frames, &mut fixed(1.0), &cfg(1.0, DeliveryMode::EveryFrame)).unwrap();
        assert_eq!(log.delivered_indices(), (0..10).collect::<Vec<_>>());
        assert!(log.dropped.is_empty());
        assert!((log.delivered[9].t_delivery - 9.0).abs() < 1e-12);
    }

    struct Faulty;

    impl Estimator for Faulty {
        fn process(&mut self, frame: &FrameEvent) -> Result<FrameOutcome, EstimatorFault> {
            if frame.index == 1 {
                return Err(EstimatorFault("lost".into()));
            }
            Ok(FrameOutcome {
                tracked: true,
                spans: vec![],
            })
        }
    }

    #[test]
    fn faults_count_as_dropped() {
        let frames = uniform_frames(3, 10.0);
        let log = run(&frames, &mut Faulty, &cfg(1.0, DeliveryMode::EveryFrame)).unwrap();
        assert_eq!(log.delivered_indices(), vec![0, 2]);
        assert_eq!(log.dropped, vec![1]);
        assert_eq!(log.faults[0].message, "lost");
    }

    #[test]
    fn profile_means() {
        let spans = vec![
            TimingSpan {
                frame: 0,
                component: "feature_extraction".into(),
                duration: 0.010,
            },
            TimingSpan {
                frame: 1,
                component: "feature_extraction".into(),
                duration: 0.020,
            },
        ];
        let mut log = RunLog::new(cfg(1.0, DeliveryMode::EveryFrame));
        for i in 0..2 {
            log.delivered.push(DeliveredFrame {
                index: i,
                t_delivery: i as f64,
                tracked: true,
            });
        }
        log.spans = spans;
        let p = aggregate_profile(std::slice::from_ref(&log)).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p[0].mean_s - 0.015).abs() < 1e-15);
        assert_eq!(p[0].count, 2);

        log.delivered.iter_mut().for_each(|d| d.tracked = false);
        assert_eq!(aggregate_profile(&[log]), Err(PlaybackError::NoTrackedFrames));
    }

    #[test]
    fn synthetic_spans_and_tracking() {
        let frames = uniform_frames(3, 10.0);
        let mut est = SyntheticEstimator::new(EstimatorSpec {
            seed: 0,
            tracked_probability: 1.0,
            components: vec![ComponentSpec::fixed("pose_opt", 0.005)],
        })
        .unwrap();
        let log = run(&frames, &mut est, &cfg(1.0, DeliveryMode::EveryFrame)).unwrap();
        assert_eq!(log.spans.len(), 3);
        assert!(log.spans.iter().all(|s| s.duration == 0.005));

        let mut never = SyntheticEstimator::new(EstimatorSpec {
            tracked_probability: 0.0,
            ..EstimatorSpec::default()
        })
        .unwrap();
        let log = run(&frames, &mut never, &cfg(1.0, DeliveryMode::EveryFrame)).unwrap();
        assert!(log.delivered.iter().all(|d| !d.tracked));
    }

    #[test]
    fn spec_toml() {
        let text = "seed = 3\ntracked_probability = 0.5\n\n[[component]]\nname = \"a\"\nduration_s = 0.01\n\n[[component]]\nname = \"b\"\nmin_s = 0.001\nmax_s = 0.002\n";
        let spec = EstimatorSpec::from_toml(text).unwrap();
        assert_eq!(spec.components.len(), 2);
        assert_eq!(EstimatorSpec::from_toml(&spec.to_toml()).unwrap(), spec);
        let bad = "[[component]]\nname = \"a\"\nmin_s = 0.2\nmax_s = 0.1\n";
        assert!(matches!(EstimatorSpec::from_toml(bad), Err(PlaybackError::InvalidSpec(_))));
        assert!(matches!(
            EstimatorSpec::from_toml("component = []"),
            Err(PlaybackError::InvalidSpec(_))
        ));
    }

    #[test]
    fn frames_csv() {
        let frames = uniform_frames(3, 4.0);
        assert_eq!(parse_frames(&write_frames(&frames)).unwrap(), frames);
        assert_eq!(
            parse_frames("index,t_source\n0,1.0\n1,0.5\n"),
            Err(PlaybackError::NonMonotonicFrames(1))
        );
    }

    #[test]
    fn wall_clock_drop_mode() {
        let frames = uniform_frames(6, 50.0);
        let mut est = fixed(0.0).sleeping(true);
        let log = run(&frames, &mut est, &PlaybackConfig::new(1.0, DeliveryMode::RealtimeDrop, ClockKind::Wall).unwrap()).unwrap();
        assert_eq!(log.delivered.len() + log.dropped.len(), 6);
        for d in &log.delivered {
            let scheduled = d.index as f64 * 0.02;
            assert!(d.t_delivery >= scheduled - 1e-9);
        }
    }
}
