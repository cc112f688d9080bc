//! IMU-based idle detection: frame assembly from four 9-axis sensors,
//! 500-sample sliding windows at 30 Hz, the recurrent binary classifier
//! with training and gradient verification, a synthetic data generator,
//! and evaluation metrics.
//!
//! Canonical feature order inside a 36-wide frame: sensors in the order
//! left_wrist, right_wrist, left_hand, right_hand; within each sensor
//! the 9 axes accel x,y,z then gyro x,y,z then mag x,y,z.

pub mod lstm;
pub mod synth;
pub mod train;

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::action::IntentLabel;
use crate::geom::Vec3;
use crate::world::TICK_S;

pub use lstm::{
    gradient_check, load_weights, lstm_backward, lstm_forward, save_weights, GateWeights,
    LstmError, LstmGrads, LstmParams, Seq,
};
pub use synth::{synth_dataset, SynthConfig, SynthError};
pub use train::{train, LossCurve, TrainConfig, TrainError, TrainOutcome};

/// Frames per classification window (16.67 s at 30 Hz).
pub const WINDOW_LEN: usize = 500;
/// Feature width of one frame: 4 sensors × 9 axes.
pub const FRAME_FEATURES: usize = 36;
pub const SENSOR_COUNT: usize = 4;
/// Default frame offset between consecutive decisions (0.5 s).
pub const DEFAULT_STRIDE: usize = 15;
/// Default decision threshold on the Working probability.
pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Tolerance when checking that consecutive frames are one tick apart.
pub const FRAME_GAP_TOL: f64 = 1e-6;

pub const IMU_TRACE_HEADER: &str = "tandem-imu-trace-v1";

/// Sensor placement; the order here fixes the feature layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sensor {
    LeftWrist,
    RightWrist,
    LeftHand,
    RightHand,
}

impl Sensor {
    pub const ALL: [Sensor; SENSOR_COUNT] =
        [Sensor::LeftWrist, Sensor::RightWrist, Sensor::LeftHand, Sensor::RightHand];

    pub fn index(self) -> usize {
        match self {
            Sensor::LeftWrist => 0,
            Sensor::RightWrist => 1,
            Sensor::LeftHand => 2,
            Sensor::RightHand => 3,
        }
    }
}

impl std::fmt::Display for Sensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sensor::LeftWrist => "left_wrist",
            Sensor::RightWrist => "right_wrist",
            Sensor::LeftHand => "left_hand",
            Sensor::RightHand => "right_hand",
        })
    }
}

impl std::str::FromStr for Sensor {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "left_wrist" => Ok(Sensor::LeftWrist),
            "right_wrist" => Ok(Sensor::RightWrist),
            "left_hand" => Ok(Sensor::LeftHand),
            "right_hand" => Ok(Sensor::RightHand),
            other => Err(format!("unknown sensor {other:?}")),
        }
    }
}

/// One 9-axis measurement from one sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    pub sensor: Sensor,
    pub accel: Vec3,
    pub gyro: Vec3,
    pub mag: Vec3,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ImuError {
    #[error("imu sample contains non-finite values (t={t})")]
    NonFinite { t: f64 },
    #[error("tick at t={t} missing sensor {sensor}")]
    MissingSensor { t: f64, sensor: String },
    #[error("tick at t={t} has duplicate sensor {sensor}")]
    DuplicateSensor { t: f64, sensor: String },
    #[error("sample at t={got} grouped under tick t={tick}")]
    TimestampMismatch { tick: f64, got: f64 },
}

impl ImuSample {
    pub fn new(t: f64, sensor: Sensor, accel: Vec3, gyro: Vec3, mag: Vec3) -> Result<Self, ImuError> {
        let finite = t.is_finite()
            && crate::geom::is_finite(accel)
            && crate::geom::is_finite(gyro)
            && crate::geom::is_finite(mag);
        if !finite {
            return Err(ImuError::NonFinite { t });
        }
        Ok(Self { t, sensor, accel, gyro, mag })
    }
}

/// One tick of fused features, assembled only when all four sensors
/// reported.
#[derive(Debug, Clone, PartialEq)]
pub struct ImuFrame {
    pub t: f64,
    pub features: [f64; FRAME_FEATURES],
}

/// Fuses the four per-sensor samples of one tick into a frame.
pub fn assemble_frame(t: f64, samples: &[ImuSample]) -> Result<ImuFrame, ImuError> {
    let mut seen = [false; SENSOR_COUNT];
    let mut features = [0.0; FRAME_FEATURES];
    for s in samples {
        if (s.t - t).abs() > 1e-9 {
            return Err(ImuError::TimestampMismatch { tick: t, got: s.t });
        }
        let idx = s.sensor.index();
        if seen[idx] {
            return Err(ImuError::DuplicateSensor { t, sensor: s.sensor.to_string() });
        }
        seen[idx] = true;
        let base = idx * 9;
        features[base..base + 3].copy_from_slice(&s.accel);
        features[base + 3..base + 6].copy_from_slice(&s.gyro);
        features[base + 6..base + 9].copy_from_slice(&s.mag);
    }
    for (idx, sensor) in Sensor::ALL.iter().enumerate() {
        if !seen[idx] {
            return Err(ImuError::MissingSensor { t, sensor: sensor.to_string() });
        }
    }
    Ok(ImuFrame { t, features })
}

/// A 500×36 classification window.
#[derive(Debug, Clone, PartialEq)]
pub struct ImuWindow {
    pub start_t: f64,
    data: Vec<f64>,
    pub label: Option<IntentLabel>,
}

impl ImuWindow {
    pub fn from_frames(frames: &[ImuFrame]) -> Result<Self, WindowError> {
        if frames.len() != WINDOW_LEN {
            return Err(WindowError::BadLength { got: frames.len() });
        }
        let mut data = Vec::with_capacity(WINDOW_LEN * FRAME_FEATURES);
        for f in frames {
            data.extend_from_slice(&f.features);
        }
        Ok(Self { start_t: frames[0].t, data, label: None })
    }

    /// Directly from a flat 500×36 row-major buffer.
    pub fn from_flat(start_t: f64, data: Vec<f64>, label: Option<IntentLabel>) -> Result<Self, WindowError> {
        if data.len() != WINDOW_LEN * FRAME_FEATURES {
            return Err(WindowError::BadLength { got: data.len() / FRAME_FEATURES });
        }
        Ok(Self { start_t, data, label })
    }

    pub fn with_label(mut self, label: IntentLabel) -> Self {
        self.label = Some(label);
        self
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * FRAME_FEATURES..(i + 1) * FRAME_FEATURES]
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    pub fn seq(&self) -> Seq<'_> {
        Seq::new(&self.data, WINDOW_LEN, FRAME_FEATURES).expect("window shape is fixed")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WindowError {
    #[error("window needs exactly {WINDOW_LEN} frames, got {got}")]
    BadLength { got: usize },
    #[error("stride must be >= 1")]
    BadStride,
    #[error("frame timeline gap at t={t}")]
    Gap { t: f64 },
}

/// Every contiguous 500-frame window of a gap-free 30 Hz frame
/// timeline, advancing `stride` frames between windows.
pub fn window_stream(frames: &[ImuFrame], stride: usize) -> Result<Vec<ImuWindow>, WindowError> {
    if stride == 0 {
        return Err(WindowError::BadStride);
    }
    for pair in frames.windows(2) {
        if (pair[1].t - pair[0].t - TICK_S).abs() > FRAME_GAP_TOL {
            return Err(WindowError::Gap { t: pair[1].t });
        }
    }
    let mut out = Vec::new();
    if frames.len() < WINDOW_LEN {
        return Ok(out);
    }
    let mut off = 0;
    while off + WINDOW_LEN <= frames.len() {
        out.push(ImuWindow::from_frames(&frames[off..off + WINDOW_LEN])?);
        off += stride;
    }
    Ok(out)
}

/// Threshold rule on the Working probability; a tie reads as Working.
pub fn classify_window(prob: f64, threshold: f64) -> IntentLabel {
    debug_assert!((0.0..=1.0).contains(&prob));
    if prob >= threshold {
        IntentLabel::Working
    } else {
        IntentLabel::Idle
    }
}

/// Confusion counts and derived rates with Working as the positive
/// class. Rates whose denominator is zero are undefined, not 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub true_pos: u64,
    pub false_pos: u64,
    pub true_neg: u64,
    pub false_neg: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_score: Option<f64>,
}

/// F = 2pr/(p+r); undefined when the denominator vanishes.
pub fn f_score_from(precision: f64, recall: f64) -> Option<f64> {
    let denom = precision + recall;
    if denom > 0.0 {
        Some(2.0 * precision * recall / denom)
    } else {
        None
    }
}

impl EvalReport {
    pub fn from_counts(true_pos: u64, false_pos: u64, true_neg: u64, false_neg: u64) -> Self {
        let ratio = |num: u64, den: u64| if den > 0 { Some(num as f64 / den as f64) } else { None };
        let precision = ratio(true_pos, true_pos + false_pos);
        let recall = ratio(true_pos, true_pos + false_neg);
        let f_score = match (precision, recall) {
            (Some(p), Some(r)) => f_score_from(p, r),
            _ => None,
        };
        Self { true_pos, false_pos, true_neg, false_neg, precision, recall, f_score }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("empty dataset")]
    Empty,
    #[error("window {index} is unlabeled")]
    Unlabeled { index: usize },
    #[error(transparent)]
    Lstm(#[from] LstmError),
}

/// Runs the classifier over a labeled dataset and tallies the
/// confusion counts.
pub fn eval_metrics(
    params: &LstmParams,
    dataset: &[ImuWindow],
    threshold: f64,
) -> Result<EvalReport, EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::Empty);
    }
    let (mut tp, mut fp, mut tn, mut fne) = (0u64, 0u64, 0u64, 0u64);
    for (index, w) in dataset.iter().enumerate() {
        let truth = w.label.ok_or(EvalError::Unlabeled { index })?;
        let prob = lstm_forward(params, w.seq())?;
        let predicted = classify_window(prob, threshold);
        match (truth, predicted) {
            (IntentLabel::Working, IntentLabel::Working) => tp += 1,
            (IntentLabel::Idle, IntentLabel::Working) => fp += 1,
            (IntentLabel::Idle, IntentLabel::Idle) => tn += 1,
            (IntentLabel::Working, IntentLabel::Idle) => fne += 1,
        }
    }
    Ok(EvalReport::from_counts(tp, fp, tn, fne))
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ImuStreamError {
    #[error("out-of-order imu frame: {got} after {prev}")]
    OutOfOrder { prev: f64, got: f64 },
    #[error("frame timeline gap at t={t}")]
    Gap { t: f64 },
}

/// One classifier decision on the window ending at `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuDecision {
    pub t: f64,
    pub prob: f64,
    pub label: IntentLabel,
}

/// Streaming wrapper: accumulates frames, fires a decision once 500
/// have arrived and then every `stride` frames.
#[derive(Debug, Clone)]
pub struct ImuClassifier {
    params: LstmParams,
    stride: usize,
    threshold: f64,
    ring: VecDeque<[f64; FRAME_FEATURES]>,
    frames_seen: usize,
    last_t: Option<f64>,
    flat: Vec<f64>,
}

impl ImuClassifier {
    pub fn new(params: LstmParams, stride: usize, threshold: f64) -> Result<Self, LstmError> {
        params.validate()?;
        if params.input != FRAME_FEATURES {
            return Err(LstmError::Dim {
                what: format!("streaming classifier needs input {FRAME_FEATURES}, params have {}", params.input),
            });
        }
        if stride == 0 {
            return Err(LstmError::Dim { what: "stride must be >= 1".into() });
        }
        Ok(Self {
            params,
            stride,
            threshold,
            ring: VecDeque::with_capacity(WINDOW_LEN),
            frames_seen: 0,
            last_t: None,
            flat: Vec::with_capacity(WINDOW_LEN * FRAME_FEATURES),
        })
    }

    pub fn params(&self) -> &LstmParams {
        &self.params
    }

    /// Consumes one frame; returns a decision when one fires.
    pub fn push_frame(&mut self, frame: &ImuFrame) -> Result<Option<ImuDecision>, ImuStreamError> {
        if let Some(prev) = self.last_t {
            let dt = frame.t - prev;
            if dt <= 0.0 {
                return Err(ImuStreamError::OutOfOrder { prev, got: frame.t });
            }
            if (dt - TICK_S).abs() > FRAME_GAP_TOL {
                return Err(ImuStreamError::Gap { t: frame.t });
            }
        }
        self.last_t = Some(frame.t);
        if self.ring.len() == WINDOW_LEN {
            self.ring.pop_front();
        }
        self.ring.push_back(frame.features);
        self.frames_seen += 1;
        if self.ring.len() < WINDOW_LEN || (self.frames_seen - WINDOW_LEN) % self.stride != 0 {
            return Ok(None);
        }
        self.flat.clear();
        for row in &self.ring {
            self.flat.extend_from_slice(row);
        }
        let seq = Seq::new(&self.flat, WINDOW_LEN, FRAME_FEATURES).expect("ring is full");
        let prob = lstm_forward(&self.params, seq).expect("dims checked at construction");
        Ok(Some(ImuDecision { t: frame.t, prob, label: classify_window(prob, self.threshold) }))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ImuTraceError {
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("line 1: expected header {IMU_TRACE_HEADER:?}")]
    BadHeader,
    #[error("line {line}: {what}")]
    Malformed { line: usize, what: String },
}

/// Reads an IMU trace: header, then one `t sensor ax ay az gx gy gz
/// mx my mz` record per line.
pub fn read_imu_trace<R: BufRead>(reader: R) -> Result<Vec<ImuSample>, ImuTraceError> {
    let mut samples = Vec::new();
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim_end() == IMU_TRACE_HEADER => {}
        Some(Ok(_)) | None => return Err(ImuTraceError::BadHeader),
        Some(Err(e)) => return Err(ImuTraceError::Io(e)),
    }
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let lineno = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 11 {
            return Err(ImuTraceError::Malformed {
                line: lineno,
                what: format!("expected 11 fields, got {}", fields.len()),
            });
        }
        let t: f64 = fields[0].parse().map_err(|_| ImuTraceError::Malformed {
            line: lineno,
            what: format!("bad timestamp {:?}", fields[0]),
        })?;
        let sensor: Sensor = fields[1].parse().map_err(|e| ImuTraceError::Malformed {
            line: lineno,
            what: e,
        })?;
        let mut v = [0.0f64; 9];
        for (slot, field) in v.iter_mut().zip(&fields[2..]) {
            *slot = field.parse().map_err(|_| ImuTraceError::Malformed {
                line: lineno,
                what: format!("bad number {field:?}"),
            })?;
        }
        let sample = ImuSample::new(
            t,
            sensor,
            [v[0], v[1], v[2]],
            [v[3], v[4], v[5]],
            [v[6], v[7], v[8]],
        )
        .map_err(|e| ImuTraceError::Malformed { line: lineno, what: e.to_string() })?;
        samples.push(sample);
    }
    Ok(samples)
}

pub fn write_imu_trace<W: Write>(mut w: W, samples: &[ImuSample]) -> std::io::Result<()> {
    writeln!(w, "{IMU_TRACE_HEADER}")?;
    for s in samples {
        writeln!(
            w,
            "{} {} {} {} {} {} {} {} {} {} {}",
            s.t, s.sensor, s.accel[0], s.accel[1], s.accel[2], s.gyro[0], s.gyro[1], s.gyro[2],
            s.mag[0], s.mag[1], s.mag[2]
        )?;
    }
    Ok(())
}

/// Groups a time-ordered sample stream into frames: each run of equal
/// timestamps must contain all four sensors exactly once.
pub fn frames_from_samples(samples: &[ImuSample]) -> Result<Vec<ImuFrame>, ImuError> {
    let mut frames = Vec::new();
    let mut i = 0;
    while i < samples.len() {
        let t = samples[i].t;
        let mut j = i;
        while j < samples.len() && samples[j].t == t {
            j += 1;
        }
        frames.push(assemble_frame(t, &samples[i..j])?);
        i = j;
    }
    Ok(frames)
}
