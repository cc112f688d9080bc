//! Gaze-based intent classification. A ray from the head pose is cast
//! against named workspace boxes (areas of interest); dwell hysteresis
//! turns the raw per-sample region into a stable Working/Idle stream.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::action::IntentLabel;
use crate::geom::{self, Aabb, Vec3};

/// Tolerance on the gaze direction norm: |direction| must lie within
/// 1 ± this value.
pub const DIRECTION_NORM_TOL: f64 = 1e-6;

/// Header line of a gaze trace file.
pub const TRACE_HEADER: &str = "tandem-gaze-trace-v1";
/// Header line of a label file produced by classification.
pub const LABELS_HEADER: &str = "tandem-labels-v1";

/// One gaze measurement: head position and a unit view direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample {
    pub t: f64,
    pub origin: Vec3,
    pub direction: Vec3,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GazeSampleError {
    #[error("gaze sample contains non-finite values")]
    NonFinite,
    #[error("gaze direction norm {norm} outside 1 ± {DIRECTION_NORM_TOL}")]
    NotUnit { norm: f64 },
}

impl GazeSample {
    pub fn new(t: f64, origin: Vec3, direction: Vec3) -> Result<Self, GazeSampleError> {
        if !t.is_finite() || !geom::is_finite(origin) || !geom::is_finite(direction) {
            return Err(GazeSampleError::NonFinite);
        }
        let norm = geom::norm(direction);
        if (norm - 1.0).abs() > DIRECTION_NORM_TOL {
            return Err(GazeSampleError::NotUnit { norm });
        }
        Ok(Self { t, origin, direction })
    }
}

/// What a gaze region means for the Working/Idle decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AoiRole {
    HumanWorkspace,
    RobotArea,
    PartsTable,
}

impl AoiRole {
    /// Working evidence only while the gaze rests on the human's own
    /// workspace; looking anywhere else (including off all boxes) reads
    /// as exploring elsewhere, i.e. Idle evidence.
    pub fn label_side(self) -> IntentLabel {
        match self {
            AoiRole::HumanWorkspace => IntentLabel::Working,
            AoiRole::RobotArea | AoiRole::PartsTable => IntentLabel::Idle,
        }
    }
}

impl std::fmt::Display for AoiRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AoiRole::HumanWorkspace => "human_workspace",
            AoiRole::RobotArea => "robot_area",
            AoiRole::PartsTable => "parts_table",
        })
    }
}

/// A named axis-aligned box the gaze ray is tested against.
#[derive(Debug, Clone, PartialEq)]
pub struct Aoi {
    pub name: String,
    pub bounds: Aabb,
    pub role: AoiRole,
}

/// Result of a collision query: which box the ray enters first.
#[derive(Debug, Clone, PartialEq)]
pub struct AoiHit {
    pub name: String,
    pub entry: f64,
}

/// Index-level collision query used by the classifier hot path.
/// Among intersected boxes returns the smallest non-negative entry
/// distance; ties keep the earliest box in the list.
pub fn cast_ray_idx(origin: Vec3, direction: Vec3, aois: &[Aoi]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, aoi) in aois.iter().enumerate() {
        if let Some(entry) = aoi.bounds.ray_entry(origin, direction) {
            match best {
                Some((_, d)) if d <= entry => {}
                _ => best = Some((i, entry)),
            }
        }
    }
    best
}

/// Collision query for one gaze sample against a set of boxes.
pub fn cast_ray(sample: &GazeSample, aois: &[Aoi]) -> Option<AoiHit> {
    cast_ray_idx(sample.origin, sample.direction, aois)
        .map(|(i, entry)| AoiHit { name: aois[i].name.clone(), entry })
}

/// Debounce policy: a new region must persist `dwell_s` before the
/// label flips. `dwell_s = 0` recovers the raw per-ray rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazePolicy {
    pub dwell_s: f64,
    pub initial: IntentLabel,
}

impl Default for GazePolicy {
    fn default() -> Self {
        Self { dwell_s: 0.5, initial: IntentLabel::Working }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GazeSetupError {
    #[error("no human_workspace AOI in set")]
    NoHumanWorkspace,
    #[error("{count} human_workspace AOIs in set, expected exactly one")]
    MultipleHumanWorkspace { count: usize },
    #[error("duplicate AOI name {name:?}")]
    DuplicateAoiName { name: String },
    #[error("dwell must be finite and non-negative, got {dwell_s}")]
    InvalidDwell { dwell_s: f64 },
}

/// Checks the scenario-level AOI invariants: unique names, exactly one
/// human_workspace box.
pub fn validate_aois(aois: &[Aoi]) -> Result<(), GazeSetupError> {
    let mut seen = std::collections::BTreeSet::new();
    for aoi in aois {
        if !seen.insert(aoi.name.as_str()) {
            return Err(GazeSetupError::DuplicateAoiName { name: aoi.name.clone() });
        }
    }
    let count = aois.iter().filter(|a| a.role == AoiRole::HumanWorkspace).count();
    match count {
        1 => Ok(()),
        0 => Err(GazeSetupError::NoHumanWorkspace),
        _ => Err(GazeSetupError::MultipleHumanWorkspace { count }),
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GazeStreamError {
    #[error("out-of-order gaze timestamp: {got} after {prev}")]
    OutOfOrder { prev: f64, got: f64 },
}

/// Streaming classifier: a pure fold over the sample stream with a
/// small explicit state, so instances move freely across threads.
#[derive(Debug, Clone)]
pub struct GazeClassifier {
    aois: Vec<Aoi>,
    policy: GazePolicy,
    last_t: Option<f64>,
    current: IntentLabel,
    pending: Option<(IntentLabel, f64)>,
}

impl GazeClassifier {
    pub fn new(aois: Vec<Aoi>, policy: GazePolicy) -> Result<Self, GazeSetupError> {
        validate_aois(&aois)?;
        if !policy.dwell_s.is_finite() || policy.dwell_s < 0.0 {
            return Err(GazeSetupError::InvalidDwell { dwell_s: policy.dwell_s });
        }
        Ok(Self { aois, policy, last_t: None, current: policy.initial, pending: None })
    }

    pub fn label(&self) -> IntentLabel {
        self.current
    }

    /// Consumes one sample and returns the (possibly flipped) label.
    pub fn push(&mut self, sample: &GazeSample) -> Result<IntentLabel, GazeStreamError> {
        if let Some(prev) = self.last_t {
            if sample.t <= prev {
                return Err(GazeStreamError::OutOfOrder { prev, got: sample.t });
            }
        }
        self.last_t = Some(sample.t);

        let side = match cast_ray_idx(sample.origin, sample.direction, &self.aois) {
            Some((i, _)) => self.aois[i].role.label_side(),
            None => IntentLabel::Idle,
        };
        if side == self.current {
            self.pending = None;
        } else {
            let since = match self.pending {
                Some((p, since)) if p == side => since,
                _ => {
                    self.pending = Some((side, sample.t));
                    sample.t
                }
            };
            if sample.t - since >= self.policy.dwell_s {
                self.current = side;
                self.pending = None;
            }
        }
        Ok(self.current)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GazeError {
    #[error(transparent)]
    Setup(#[from] GazeSetupError),
    #[error(transparent)]
    Stream(#[from] GazeStreamError),
}

/// Classifies a whole time-ordered stream; one output per input.
pub fn classify_gaze(
    samples: &[GazeSample],
    aois: &[Aoi],
    policy: GazePolicy,
) -> Result<Vec<(f64, IntentLabel)>, GazeError> {
    let mut clf = GazeClassifier::new(aois.to_vec(), policy)?;
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        let label = clf.push(s)?;
        out.push((s.t, label));
    }
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("line 1: expected header {TRACE_HEADER:?}")]
    BadHeader,
    #[error("line {line}: {what}")]
    Malformed { line: usize, what: String },
}

/// Reads a gaze trace: header line, then one `t ox oy oz dx dy dz`
/// record per line. Sample invariants are enforced per record.
pub fn read_trace<R: BufRead>(reader: R) -> Result<Vec<GazeSample>, TraceError> {
    let mut samples = Vec::new();
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim_end() == TRACE_HEADER => {}
        Some(Ok(_)) | None => return Err(TraceError::BadHeader),
        Some(Err(e)) => return Err(TraceError::Io(e)),
    }
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let lineno = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(TraceError::Malformed {
                line: lineno,
                what: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let mut v = [0.0f64; 7];
        for (slot, field) in v.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| TraceError::Malformed {
                line: lineno,
                what: format!("bad number {field:?}"),
            })?;
        }
        let sample = GazeSample::new(v[0], [v[1], v[2], v[3]], [v[4], v[5], v[6]])
            .map_err(|e| TraceError::Malformed { line: lineno, what: e.to_string() })?;
        samples.push(sample);
    }
    Ok(samples)
}

pub fn write_trace<W: Write>(mut w: W, samples: &[GazeSample]) -> std::io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for s in samples {
        writeln!(
            w,
            "{} {} {} {} {} {} {}",
            s.t, s.origin[0], s.origin[1], s.origin[2], s.direction[0], s.direction[1],
            s.direction[2]
        )?;
    }
    Ok(())
}

pub fn write_labels<W: Write>(mut w: W, labels: &[(f64, IntentLabel)]) -> std::io::Result<()> {
    writeln!(w, "{LABELS_HEADER}")?;
    for (t, label) in labels {
        writeln!(w, "{t} {label}")?;
    }
    Ok(())
}
