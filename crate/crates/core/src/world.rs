//! Interaction state and the effect semantics of primitive actions.
//!
//! The state tracks the four interaction features: end-effector availability,
//! agent poses, object poses and object characteristics, plus the perceived
//! human intent and the set of delivered objects. States are immutable
//! values; applying an effect returns a new state.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::action::{
    HumanIntent, ManipulateEffect, ObjectId, PrimitiveAction,
};
use crate::geom::{is_finite, Aabb, Quat, Vec3};

/// Simulation tick length in seconds (sensor rate 30 Hz).
pub const TICK_S: f64 = 1.0 / 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quat,
}

impl Pose {
    pub fn new(position: Vec3, orientation: Quat) -> Result<Self, WorldError> {
        if !is_finite(position) {
            return Err(WorldError::NonFinitePosition);
        }
        Ok(Pose { position, orientation })
    }

    pub fn at(position: Vec3) -> Self {
        Pose { position, orientation: Quat::identity() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Leg,
    Seat,
    Crossbar,
    ScrewBox,
    Screwdriver,
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ObjectKind::Leg => "leg",
            ObjectKind::Seat => "seat",
            ObjectKind::Crossbar => "crossbar",
            ObjectKind::ScrewBox => "screw_box",
            ObjectKind::Screwdriver => "screwdriver",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for ObjectKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "leg" => Ok(ObjectKind::Leg),
            "seat" => Ok(ObjectKind::Seat),
            "crossbar" => Ok(ObjectKind::Crossbar),
            "screw_box" => Ok(ObjectKind::ScrewBox),
            "screwdriver" => Ok(ObjectKind::Screwdriver),
            other => Err(format!("unknown object kind `{other}`")),
        }
    }
}

/// Object characteristics; `content_count` is meaningful for containers and
/// `fastened` for parts that get screwed in place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Characteristics {
    pub kind: ObjectKind,
    pub graspable: bool,
    pub extent: Vec3,
    pub content_count: Option<u32>,
    pub fastened: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub id: ObjectId,
    pub pose: Pose,
    pub characteristics: Characteristics,
}

impl ObjectRecord {
    pub fn validate(&self) -> Result<(), WorldError> {
        if self.characteristics.extent.iter().any(|e| *e <= 0.0) {
            return Err(WorldError::NonPositiveExtent { id: self.id.clone() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Left,
    Right,
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arm::Left => write!(f, "left"),
            Arm::Right => write!(f, "right"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Availability {
    Free,
    Holding(ObjectId),
    Moving,
}

impl fmt::Display for Availability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Availability::Free => write!(f, "free"),
            Availability::Holding(id) => write!(f, "holding:{id}"),
            Availability::Moving => write!(f, "moving"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndEffectorStatus {
    pub arm: Arm,
    pub availability: Availability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPoses {
    pub robot: Pose,
    pub human: Pose,
}

/// The full interaction state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    /// Seconds since scenario start; non-decreasing under applied effects.
    pub time: f64,
    pub effectors: Vec<EndEffectorStatus>,
    pub agents: AgentPoses,
    pub objects: BTreeMap<ObjectId, ObjectRecord>,
    pub human_intent: HumanIntent,
    pub delivered: BTreeSet<ObjectId>,
}

impl WorldState {
    pub fn new(robot: Pose, human: Pose) -> Self {
        WorldState {
            time: 0.0,
            effectors: vec![
                EndEffectorStatus { arm: Arm::Left, availability: Availability::Free },
                EndEffectorStatus { arm: Arm::Right, availability: Availability::Free },
            ],
            agents: AgentPoses { robot, human },
            objects: BTreeMap::new(),
            human_intent: HumanIntent::Unknown,
            delivered: BTreeSet::new(),
        }
    }

    pub fn add_object(&mut self, record: ObjectRecord) -> Result<(), WorldError> {
        record.validate()?;
        if self.objects.contains_key(&record.id) {
            return Err(WorldError::DuplicateObject { id: record.id });
        }
        self.objects.insert(record.id.clone(), record);
        Ok(())
    }

    pub fn holder_of(&self, id: &ObjectId) -> Option<Arm> {
        self.effectors
            .iter()
            .find(|e| e.availability == Availability::Holding(id.clone()))
            .map(|e| e.arm)
    }

    pub fn free_effector(&self) -> Option<usize> {
        self.effectors.iter().position(|e| e.availability == Availability::Free)
    }

    /// Checks the structural invariants: holding slots reference existing
    /// objects, no object held twice, delivered is a subset of the table.
    pub fn check_invariants(&self) -> Result<(), WorldError> {
        let mut held = BTreeSet::new();
        for e in &self.effectors {
            if let Availability::Holding(id) = &e.availability {
                if !self.objects.contains_key(id) {
                    return Err(WorldError::UnknownObject { id: id.clone() });
                }
                if !held.insert(id.clone()) {
                    return Err(WorldError::HeldTwice { id: id.clone() });
                }
            }
        }
        for id in &self.delivered {
            if !self.objects.contains_key(id) {
                return Err(WorldError::UnknownObject { id: id.clone() });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorldError {
    #[error("position has non-finite components")]
    NonFinitePosition,
    #[error("object `{id}` has a non-positive extent component")]
    NonPositiveExtent { id: ObjectId },
    #[error("object id `{id}` already present")]
    DuplicateObject { id: ObjectId },
    #[error("unknown object id `{id}`")]
    UnknownObject { id: ObjectId },
    #[error("object `{id}` held by more than one effector")]
    HeldTwice { id: ObjectId },
}

/// Why an action is not applicable in a given state.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("precondition violation for {action}: {reason}")]
pub struct PreconditionViolation {
    pub action: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EffectError {
    #[error(transparent)]
    Precondition(#[from] PreconditionViolation),
    #[error("unknown object id `{id}`")]
    UnknownObject { id: ObjectId },
}

/// Per-action durations in seconds; scenario configuration, not constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionDurations {
    pub grasp_s: f64,
    pub release_s: f64,
    pub move_s: f64,
    pub manipulate_s: f64,
    pub perceive_s: f64,
}

impl Default for ActionDurations {
    // Defaults make one fetch cycle (move, grasp, move, release) take about
    // twenty seconds.
    fn default() -> Self {
        ActionDurations {
            grasp_s: 2.0,
            release_s: 1.5,
            move_s: 8.0,
            manipulate_s: 2.0,
            perceive_s: 0.0,
        }
    }
}

impl ActionDurations {
    pub fn of(&self, action: &PrimitiveAction) -> f64 {
        match action {
            PrimitiveAction::Grasp(_) => self.grasp_s,
            PrimitiveAction::Release(_) => self.release_s,
            PrimitiveAction::Move { .. } => self.move_s,
            PrimitiveAction::Manipulate(_, _) => self.manipulate_s,
            PrimitiveAction::Perceive(_) => self.perceive_s,
            // A blocked wait advances one tick per poll.
            PrimitiveAction::Wait(_) => TICK_S,
        }
    }
}

/// Everything `apply_effect` needs besides the state and the action.
#[derive(Debug, Clone)]
pub struct EffectContext {
    pub durations: ActionDurations,
    /// Releases inside this region mark the object delivered.
    pub delivery_zone: Option<Aabb>,
}

impl Default for EffectContext {
    fn default() -> Self {
        EffectContext { durations: ActionDurations::default(), delivery_zone: None }
    }
}

/// Pure applicability check. `Ok(())` iff the action can run; the error names
/// the first failing condition.
pub fn check_precondition(
    state: &WorldState,
    action: &PrimitiveAction,
) -> Result<(), PreconditionViolation> {
    let fail = |reason: &str| {
        Err(PreconditionViolation { action: action.to_string(), reason: reason.to_owned() })
    };
    match action {
        PrimitiveAction::Grasp(id) => {
            let Some(obj) = state.objects.get(id) else {
                return fail("unknown object id");
            };
            if !obj.characteristics.graspable {
                return fail("object not graspable");
            }
            if state.holder_of(id).is_some() {
                return fail("object already held");
            }
            if state.free_effector().is_none() {
                return fail("no free effector");
            }
            Ok(())
        }
        PrimitiveAction::Release(id) => {
            if !state.objects.contains_key(id) {
                return fail("unknown object id");
            }
            if state.holder_of(id).is_none() {
                return fail("object not held by any effector");
            }
            Ok(())
        }
        PrimitiveAction::Move { .. } => Ok(()),
        PrimitiveAction::Manipulate(id, effect) => {
            let Some(obj) = state.objects.get(id) else {
                return fail("unknown object id");
            };
            match effect {
                ManipulateEffect::DecrementCount => match obj.characteristics.content_count {
                    None => fail("object is not a container"),
                    Some(0) => fail("empty container"),
                    Some(_) => Ok(()),
                },
                ManipulateEffect::Fasten => {
                    if obj.characteristics.fastened {
                        fail("already fastened")
                    } else {
                        Ok(())
                    }
                }
            }
        }
        // wait and perceive are always applicable
        PrimitiveAction::Wait(_) => Ok(()),
        PrimitiveAction::Perceive(_) => Ok(()),
    }
}

/// Applies one action's effect, returning the successor state. Time advances
/// by the action's configured duration. Effects never create or delete
/// object ids.
pub fn apply_effect(
    state: &WorldState,
    action: &PrimitiveAction,
    ctx: &EffectContext,
) -> Result<WorldState, EffectError> {
    check_precondition(state, action)?;
    let mut next = state.clone();
    next.time += ctx.durations.of(action);
    match action {
        PrimitiveAction::Grasp(id) => {
            let slot = next.free_effector().expect("checked by precondition");
            next.effectors[slot].availability = Availability::Holding(id.clone());
        }
        PrimitiveAction::Release(id) => {
            let slot = next
                .effectors
                .iter()
                .position(|e| e.availability == Availability::Holding(id.clone()))
                .expect("checked by precondition");
            next.effectors[slot].availability = Availability::Free;
            let drop_pose = next.agents.robot;
            if let Some(obj) = next.objects.get_mut(id) {
                obj.pose = drop_pose;
            }
            if let Some(zone) = &ctx.delivery_zone {
                if zone.contains(next.agents.robot.position) {
                    next.delivered.insert(id.clone());
                }
            }
        }
        PrimitiveAction::Move { target, .. } => {
            next.agents.robot = *target;
            // Held objects travel with the arm.
            let held: Vec<ObjectId> = next
                .effectors
                .iter()
                .filter_map(|e| match &e.availability {
                    Availability::Holding(id) => Some(id.clone()),
                    _ => None,
                })
                .collect();
            for id in held {
                if let Some(obj) = next.objects.get_mut(&id) {
                    obj.pose = *target;
                }
            }
        }
        PrimitiveAction::Manipulate(id, effect) => {
            let obj = next.objects.get_mut(id).expect("checked by precondition");
            match effect {
                ManipulateEffect::DecrementCount => {
                    if let Some(c) = obj.characteristics.content_count.as_mut() {
                        *c -= 1;
                    }
                }
                ManipulateEffect::Fasten => obj.characteristics.fastened = true,
            }
        }
        PrimitiveAction::Wait(_) | PrimitiveAction::Perceive(_) => {}
    }
    Ok(next)
}

fn fmt_pose(p: &Pose) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        p.position[0], p.position[1], p.position[2],
        p.orientation.w, p.orientation.x, p.orientation.y, p.orientation.z
    )
}

fn parse_pose(s: &str) -> Option<Pose> {
    let v: Vec<f64> = s.split(',').map(|x| x.parse().ok()).collect::<Option<_>>()?;
    if v.len() != 7 {
        return None;
    }
    Some(Pose {
        position: [v[0], v[1], v[2]],
        orientation: Quat::new(v[3], v[4], v[5], v[6]).ok()?,
    })
}

impl WorldState {
    /// One-line snapshot. Field order is fixed: time, effectors (declaration
    /// order), robot pose, human pose, objects (sorted by id), intent,
    /// delivered set (sorted). Floats use shortest round-trip formatting, so
    /// writing the parsed value back reproduces the line byte for byte.
    pub fn snapshot_line(&self) -> String {
        let eff = self
            .effectors
            .iter()
            .map(|e| format!("{}:{}", e.arm, e.availability))
            .collect::<Vec<_>>()
            .join(",");
        let objs = self
            .objects
            .values()
            .map(|o| {
                let c = &o.characteristics;
                let count = match c.content_count {
                    Some(n) => n.to_string(),
                    None => "-".to_owned(),
                };
                format!(
                    "{}:{}:{}:{},{},{}:{}:{}:{}",
                    o.id,
                    c.kind,
                    if c.graspable { "g" } else { "n" },
                    c.extent[0], c.extent[1], c.extent[2],
                    count,
                    if c.fastened { "f" } else { "u" },
                    fmt_pose(&o.pose),
                )
            })
            .collect::<Vec<_>>()
            .join(";");
        let delivered =
            self.delivered.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",");
        format!(
            "t={} eff={} robot={} human={} obj={} intent={} delivered={}",
            self.time,
            eff,
            fmt_pose(&self.agents.robot),
            fmt_pose(&self.agents.human),
            objs,
            self.human_intent,
            delivered,
        )
    }

    /// Parses a line produced by [`WorldState::snapshot_line`].
    pub fn parse_snapshot_line(line: &str) -> Result<WorldState, SnapshotParseError> {
        let err = |what: &str| SnapshotParseError { what: what.to_owned() };
        let mut fields = BTreeMap::new();
        for part in line.split(' ') {
            let (k, v) = part.split_once('=').ok_or_else(|| err("missing key=value"))?;
            fields.insert(k.to_owned(), v.to_owned());
        }
        let get = |k: &str| fields.get(k).cloned().ok_or_else(|| err(k));
        let time: f64 = get("t")?.parse().map_err(|_| err("time"))?;
        let mut effectors = Vec::new();
        let eff_raw = get("eff")?;
        for item in eff_raw.split(',').filter(|s| !s.is_empty()) {
            let mut bits = item.splitn(2, ':');
            let arm = match bits.next() {
                Some("left") => Arm::Left,
                Some("right") => Arm::Right,
                _ => return Err(err("effector arm")),
            };
            let availability = match bits.next() {
                Some("free") => Availability::Free,
                Some("moving") => Availability::Moving,
                Some(h) if h.starts_with("holding:") => {
                    Availability::Holding(ObjectId(h["holding:".len()..].to_owned()))
                }
                _ => return Err(err("effector availability")),
            };
            effectors.push(EndEffectorStatus { arm, availability });
        }
        let robot = parse_pose(&get("robot")?).ok_or_else(|| err("robot pose"))?;
        let human = parse_pose(&get("human")?).ok_or_else(|| err("human pose"))?;
        let mut objects = BTreeMap::new();
        let obj_raw = get("obj")?;
        for item in obj_raw.split(';').filter(|s| !s.is_empty()) {
            let bits: Vec<&str> = item.split(':').collect();
            if bits.len() != 7 {
                return Err(err("object record"));
            }
            let id = ObjectId(bits[0].to_owned());
            let kind: ObjectKind = bits[1].parse().map_err(|_| err("object kind"))?;
            let graspable = bits[2] == "g";
            let extent: Vec<f64> = bits[3]
                .split(',')
                .map(|x| x.parse().ok())
                .collect::<Option<_>>()
                .ok_or_else(|| err("object extent"))?;
            if extent.len() != 3 {
                return Err(err("object extent"));
            }
            let content_count = if bits[4] == "-" {
                None
            } else {
                Some(bits[4].parse().map_err(|_| err("content count"))?)
            };
            let fastened = bits[5] == "f";
            let pose = parse_pose(bits[6]).ok_or_else(|| err("object pose"))?;
            objects.insert(
                id.clone(),
                ObjectRecord {
                    id,
                    pose,
                    characteristics: Characteristics {
                        kind,
                        graspable,
                        extent: [extent[0], extent[1], extent[2]],
                        content_count,
                        fastened,
                    },
                },
            );
        }
        let human_intent = match get("intent")?.as_str() {
            "working" => HumanIntent::Working,
            "idle" => HumanIntent::Idle,
            "unknown" => HumanIntent::Unknown,
            _ => return Err(err("intent")),
        };
        let mut delivered = BTreeSet::new();
        for d in get("delivered")?.split(',').filter(|s| !s.is_empty()) {
            delivered.insert(ObjectId(d.to_owned()));
        }
        Ok(WorldState {
            time,
            effectors,
            agents: AgentPoses { robot, human },
            objects,
            human_intent,
            delivered,
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("malformed state snapshot: {what}")]
pub struct SnapshotParseError {
    pub what: String,
}
