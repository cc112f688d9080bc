//! The six-action vocabulary shared by the world model, the planner and the
//! executor, plus the binary intent label the perception channels produce.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::world::Pose;

/// Output of an intent classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntentLabel {
    Working,
    Idle,
}

impl fmt::Display for IntentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntentLabel::Working => write!(f, "working"),
            IntentLabel::Idle => write!(f, "idle"),
        }
    }
}

impl std::str::FromStr for IntentLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "working" => Ok(IntentLabel::Working),
            "idle" => Ok(IntentLabel::Idle),
            other => Err(format!("unknown intent label `{other}`")),
        }
    }
}

/// Human intent as tracked in the world state; `Unknown` until first perceive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HumanIntent {
    Working,
    Idle,
    Unknown,
}

impl From<IntentLabel> for HumanIntent {
    fn from(l: IntentLabel) -> Self {
        match l {
            IntentLabel::Working => HumanIntent::Working,
            IntentLabel::Idle => HumanIntent::Idle,
        }
    }
}

impl fmt::Display for HumanIntent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HumanIntent::Working => write!(f, "working"),
            HumanIntent::Idle => write!(f, "idle"),
            HumanIntent::Unknown => write!(f, "unknown"),
        }
    }
}

/// Identifier of a workspace object.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectId(pub String);

impl ObjectId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<&str> for ObjectId {
    fn from(s: &str) -> Self {
        ObjectId(s.to_owned())
    }
}

/// Which intent channel a `perceive` action samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerceiveChannel {
    Gaze,
    Imu,
}

impl fmt::Display for PerceiveChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerceiveChannel::Gaze => write!(f, "gaze"),
            PerceiveChannel::Imu => write!(f, "imu"),
        }
    }
}

impl std::str::FromStr for PerceiveChannel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaze" => Ok(PerceiveChannel::Gaze),
            "imu" => Ok(PerceiveChannel::Imu),
            other => Err(format!("unknown channel `{other}` (expected gaze or imu)")),
        }
    }
}

/// Machine-checkable condition a `wait` action blocks on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaitCondition {
    IntentIs(IntentLabel),
}

impl WaitCondition {
    pub fn satisfied_by(&self, label: IntentLabel) -> bool {
        match self {
            WaitCondition::IntentIs(want) => *want == label,
        }
    }
}

impl fmt::Display for WaitCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WaitCondition::IntentIs(l) => write!(f, "intent=={l}"),
        }
    }
}

/// Effect tag applied by a `manipulate` action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ManipulateEffect {
    /// Take one item out of a container (e.g. a screw out of the screw box).
    DecrementCount,
    /// Fasten the object (screwing a part in place).
    Fasten,
}

impl fmt::Display for ManipulateEffect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManipulateEffect::DecrementCount => write!(f, "decrement"),
            ManipulateEffect::Fasten => write!(f, "fasten"),
        }
    }
}

/// One of the six primitive actions, with bound parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PrimitiveAction {
    Grasp(ObjectId),
    Release(ObjectId),
    Move { waypoint: String, target: Pose },
    Manipulate(ObjectId, ManipulateEffect),
    Wait(WaitCondition),
    Perceive(PerceiveChannel),
}

impl PrimitiveAction {
    pub fn kind(&self) -> &'static str {
        match self {
            PrimitiveAction::Grasp(_) => "grasp",
            PrimitiveAction::Release(_) => "release",
            PrimitiveAction::Move { .. } => "move",
            PrimitiveAction::Manipulate(_, _) => "manipulate",
            PrimitiveAction::Wait(_) => "wait",
            PrimitiveAction::Perceive(_) => "perceive",
        }
    }
}

impl fmt::Display for PrimitiveAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrimitiveAction::Grasp(id) => write!(f, "grasp({id})"),
            PrimitiveAction::Release(id) => write!(f, "release({id})"),
            PrimitiveAction::Move { waypoint, .. } => write!(f, "move({waypoint})"),
            PrimitiveAction::Manipulate(id, e) => write!(f, "manipulate({id},{e})"),
            PrimitiveAction::Wait(c) => write!(f, "wait({c})"),
            PrimitiveAction::Perceive(c) => write!(f, "perceive({c})"),
        }
    }
}
