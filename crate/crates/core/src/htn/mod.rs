//! Hierarchical task network planner and step executor.
//!
//! Domains are authored as text (grammar in docs/domain-grammar.md) and
//! loaded with [`load_domain`]. [`decompose`] turns a root task into a
//! flat plan of primitive actions by depth-first expansion: methods are
//! tried in declaration order and the first one whose precondition
//! holds is committed; a projected copy of the world state is threaded
//! through the subtasks so later preconditions see earlier effects.
//! [`execute_step`] replays a plan one action at a time against the
//! live state, blocking on `wait` until the supplied percept satisfies
//! the condition.

mod parse;

pub use parse::{load_domain, DomainError};

use std::collections::BTreeMap;
use std::fmt;

use crate::action::{
    IntentLabel, ManipulateEffect, ObjectId, PerceiveChannel, PrimitiveAction, WaitCondition,
};
use crate::world::{apply_effect, EffectContext, EffectError, Pose, WorldState, TICK_S};

/// An argument slot in a method body: either one of the method's own
/// parameters or a literal symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Var(String),
    Const(String),
}

/// A task or primitive invocation as written in the domain text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Call {
    pub name: String,
    pub args: Vec<Term>,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredKind {
    Exists,
    Delivered,
    Holding,
    FreeEffector,
    HasCount,
    Fastened,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pred {
    pub negated: bool,
    pub kind: PredKind,
    pub args: Vec<Term>,
}

#[derive(Debug, Clone)]
pub struct MethodDef {
    pub task: String,
    pub name: String,
    pub params: Vec<String>,
    pub pre: Vec<Pred>,
    pub(crate) raw_pre: Vec<(bool, Call)>,
    pub subtasks: Vec<Call>,
}

/// A validated domain: task arities plus methods in declaration order.
#[derive(Debug, Clone)]
pub struct Domain {
    pub name: String,
    pub(crate) tasks: BTreeMap<String, usize>,
    pub(crate) methods: Vec<MethodDef>,
    pub(crate) methods_by_task: BTreeMap<String, Vec<usize>>,
}

impl Domain {
    pub fn task_arity(&self, name: &str) -> Option<usize> {
        self.tasks.get(name).copied()
    }

    pub fn methods_of(&self, task: &str) -> impl Iterator<Item = &MethodDef> {
        self.methods_by_task
            .get(task)
            .into_iter()
            .flatten()
            .map(|&i| &self.methods[i])
    }
}

/// A ground compound task: the planner's input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskInstance {
    pub name: String,
    pub args: Vec<String>,
}

impl TaskInstance {
    pub fn new(name: &str, args: &[&str]) -> Self {
        TaskInstance { name: name.into(), args: args.iter().map(|s| s.to_string()).collect() }
    }
}

impl fmt::Display for TaskInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            write!(f, "{}", self.name)
        } else {
            write!(f, "{}({})", self.name, self.args.join(","))
        }
    }
}

/// One primitive action plus the chain of task/method expansions that
/// produced it, root first. Entries look like
/// `deliver_leg(leg_2)::fetch_then_wait`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanStep {
    pub action: PrimitiveAction,
    pub path: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
}

pub const PLAN_HEADER: &str = "tandem-plan-v1";

impl Plan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn count_kind(&self, kind: &str) -> usize {
        self.steps.iter().filter(|s| s.action.kind() == kind).count()
    }

    /// Versioned text dump, one line per step.
    pub fn dump(&self) -> String {
        let mut out = String::from(PLAN_HEADER);
        out.push('\n');
        for (i, step) in self.steps.iter().enumerate() {
            out.push_str(&format!("{i} {} | {}\n", step.action, step.path.join(" > ")));
        }
        out
    }
}

/// Everything `decompose` needs besides domain and state: waypoint
/// poses, which channel `perceive(active)` binds to, the effect
/// context used for state projection, and the recursion budget.
#[derive(Debug, Clone)]
pub struct DecomposeEnv {
    pub waypoints: BTreeMap<String, Pose>,
    pub channel: PerceiveChannel,
    pub ctx: EffectContext,
    pub depth_limit: usize,
}

pub const DEFAULT_DEPTH_LIMIT: usize = 64;

impl DecomposeEnv {
    pub fn new(waypoints: BTreeMap<String, Pose>, channel: PerceiveChannel) -> Self {
        DecomposeEnv {
            waypoints,
            channel,
            ctx: EffectContext::default(),
            depth_limit: DEFAULT_DEPTH_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecomposeError {
    #[error("no applicable method for {task} (state: {state_summary})")]
    NoApplicableMethod { task: String, state_summary: String },
    #[error("depth limit {limit} exceeded while expanding {task}")]
    DepthLimitExceeded { limit: usize, task: String },
    #[error("unknown task {name}")]
    UnknownTask { name: String },
    #[error("task {task} takes {expected} argument(s), got {got}")]
    BadArity { task: String, expected: usize, got: usize },
    #[error("unknown waypoint {name}")]
    UnknownWaypoint { name: String },
    #[error("projection failed inside committed method {method}: {source}")]
    Projection {
        method: String,
        #[source]
        source: EffectError,
    },
}

/// Compact state description for no-applicable-method errors.
fn state_summary(state: &WorldState) -> String {
    let delivered: Vec<&str> = state.delivered.iter().map(|o| o.as_str()).collect();
    let held: Vec<String> = state
        .objects
        .keys()
        .filter(|id| state.holder_of(id).is_some())
        .map(|id| id.as_str().to_owned())
        .collect();
    format!(
        "t={:.2} delivered=[{}] held=[{}] objects={}",
        state.time,
        delivered.join(","),
        held.join(","),
        state.objects.len()
    )
}

fn resolve_term(term: &Term, bind: &BTreeMap<String, String>) -> String {
    match term {
        Term::Const(c) => c.clone(),
        // Load-time validation guarantees every Var is a method param.
        Term::Var(v) => bind[v].clone(),
    }
}

fn eval_pred(pred: &Pred, state: &WorldState, bind: &BTreeMap<String, String>) -> bool {
    let arg = |i: usize| ObjectId(resolve_term(&pred.args[i], bind));
    let truth = match pred.kind {
        PredKind::Exists => state.objects.contains_key(&arg(0)),
        PredKind::Delivered => state.delivered.contains(&arg(0)),
        PredKind::Holding => state.holder_of(&arg(0)).is_some(),
        PredKind::FreeEffector => state.free_effector().is_some(),
        PredKind::HasCount => state
            .objects
            .get(&arg(0))
            .and_then(|o| o.characteristics.content_count)
            .map(|n| n > 0)
            .unwrap_or(false),
        PredKind::Fastened => state
            .objects
            .get(&arg(0))
            .map(|o| o.characteristics.fastened)
            .unwrap_or(false),
    };
    truth != pred.negated
}

/// Instantiates one primitive call under the given bindings.
fn ground_primitive(
    call: &Call,
    bind: &BTreeMap<String, String>,
    env: &DecomposeEnv,
) -> Result<PrimitiveAction, DecomposeError> {
    let arg = |i: usize| resolve_term(&call.args[i], bind);
    Ok(match call.name.as_str() {
        "grasp" => PrimitiveAction::Grasp(ObjectId(arg(0))),
        "release" => PrimitiveAction::Release(ObjectId(arg(0))),
        "move" => {
            let name = arg(0);
            let target = env
                .waypoints
                .get(&name)
                .copied()
                .ok_or(DecomposeError::UnknownWaypoint { name: name.clone() })?;
            PrimitiveAction::Move { waypoint: name, target }
        }
        "manipulate" => {
            let effect = match arg(1).as_str() {
                "decrement" => ManipulateEffect::DecrementCount,
                _ => ManipulateEffect::Fasten,
            };
            PrimitiveAction::Manipulate(ObjectId(arg(0)), effect)
        }
        "wait" => {
            let label =
                if arg(0) == "idle" { IntentLabel::Idle } else { IntentLabel::Working };
            PrimitiveAction::Wait(WaitCondition::IntentIs(label))
        }
        "perceive" => {
            let channel = match arg(0).as_str() {
                "gaze" => PerceiveChannel::Gaze,
                "imu" => PerceiveChannel::Imu,
                _ => env.channel,
            };
            PrimitiveAction::Perceive(channel)
        }
        other => unreachable!("load-time validation admits only primitives, got {other}"),
    })
}

fn is_primitive(name: &str) -> bool {
    parse::PRIMITIVES.iter().any(|(n, _)| *n == name)
}

/// Expands `root` into a plan of primitive actions. Deterministic:
/// same domain, root and state always yield the same plan.
pub fn decompose(
    domain: &Domain,
    root: &TaskInstance,
    state: &WorldState,
    env: &DecomposeEnv,
) -> Result<Plan, DecomposeError> {
    let mut steps = Vec::new();
    let mut projected = state.clone();
    let mut path = Vec::new();
    expand(domain, root, &mut projected, env, 0, &mut path, &mut steps)?;
    Ok(Plan { steps })
}

fn expand(
    domain: &Domain,
    task: &TaskInstance,
    state: &mut WorldState,
    env: &DecomposeEnv,
    depth: usize,
    path: &mut Vec<String>,
    steps: &mut Vec<PlanStep>,
) -> Result<(), DecomposeError> {
    if depth >= env.depth_limit {
        return Err(DecomposeError::DepthLimitExceeded {
            limit: env.depth_limit,
            task: task.to_string(),
        });
    }
    let arity = domain
        .task_arity(&task.name)
        .ok_or_else(|| DecomposeError::UnknownTask { name: task.name.clone() })?;
    if task.args.len() != arity {
        return Err(DecomposeError::BadArity {
            task: task.name.clone(),
            expected: arity,
            got: task.args.len(),
        });
    }

    // First method whose precondition holds is committed; failures
    // inside its subtasks propagate rather than falling through to a
    // later method, so a broken expansion surfaces as an error.
    let method = domain
        .methods_of(&task.name)
        .find(|m| {
            let bind: BTreeMap<String, String> =
                m.params.iter().cloned().zip(task.args.iter().cloned()).collect();
            m.pre.iter().all(|p| eval_pred(p, state, &bind))
        })
        .ok_or_else(|| DecomposeError::NoApplicableMethod {
            task: task.to_string(),
            state_summary: state_summary(state),
        })?;

    let bind: BTreeMap<String, String> =
        method.params.iter().cloned().zip(task.args.iter().cloned()).collect();
    path.push(format!("{task}::{}", method.name));
    for call in &method.subtasks {
        if is_primitive(&call.name) {
            let action = ground_primitive(call, &bind, env)?;
            *state = apply_effect(state, &action, &env.ctx).map_err(|source| {
                DecomposeError::Projection {
                    method: format!("{}/{}", method.task, method.name),
                    source,
                }
            })?;
            steps.push(PlanStep { action, path: path.clone() });
        } else {
            let sub = TaskInstance {
                name: call.name.clone(),
                args: call.args.iter().map(|t| resolve_term(t, &bind)).collect(),
            };
            expand(domain, &sub, state, env, depth + 1, path, steps)?;
        }
    }
    path.pop();
    Ok(())
}

/// What the executor did with the current step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepRecord {
    /// A non-wait action ran and the cursor advanced.
    Applied { action: PrimitiveAction },
    /// The wait condition held; cursor advanced, one tick consumed.
    WaitReleased { condition: WaitCondition },
    /// The wait condition did not hold; cursor unchanged, one tick consumed.
    WaitBlocked { condition: WaitCondition },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error("cursor {cursor} past end of plan ({len} steps)")]
    PlanExhausted { cursor: usize, len: usize },
    #[error(transparent)]
    Effect(#[from] EffectError),
}

/// Runs one plan step against the live state.
///
/// `percept` is the latest classifier output on the plan's active
/// channel, if any. It refreshes `state.human_intent` only at perceive
/// and wait steps (intent changes only through perception) and gates
/// wait release. A blocked wait leaves the cursor alone and burns one
/// tick, so callers can drive waits tick by tick.
pub fn execute_step(
    plan: &Plan,
    cursor: usize,
    state: &WorldState,
    percept: Option<IntentLabel>,
    ctx: &EffectContext,
) -> Result<(usize, WorldState, StepRecord), ExecError> {
    let step = plan
        .steps
        .get(cursor)
        .ok_or(ExecError::PlanExhausted { cursor, len: plan.steps.len() })?;
    match &step.action {
        PrimitiveAction::Wait(cond) => {
            let mut next = state.clone();
            if let Some(label) = percept {
                next.human_intent = label.into();
            }
            next.time += TICK_S;
            if percept.map(|l| cond.satisfied_by(l)).unwrap_or(false) {
                Ok((cursor + 1, next, StepRecord::WaitReleased { condition: cond.clone() }))
            } else {
                Ok((cursor, next, StepRecord::WaitBlocked { condition: cond.clone() }))
            }
        }
        PrimitiveAction::Perceive(_) => {
            let mut next = apply_effect(state, &step.action, ctx)?;
            if let Some(label) = percept {
                next.human_intent = label.into();
            }
            Ok((cursor + 1, next, StepRecord::Applied { action: step.action.clone() }))
        }
        action => {
            let next = apply_effect(state, action, ctx)?;
            Ok((cursor + 1, next, StepRecord::Applied { action: action.clone() }))
        }
    }
}

/// The stool assembly domain shipped with the toolkit.
pub const STOOL_DOMAIN_TEXT: &str = include_str!("../../data/stool.domain");

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Availability, Characteristics, ObjectKind, ObjectRecord};
    use crate::Aabb;
    use proptest::prelude::*;

    fn pose(x: f64, y: f64, z: f64) -> Pose {
        Pose::at([x, y, z])
    }

    /// Seven parts on the parts table, matching the shipped scenario.
    fn stool_state() -> WorldState {
        let mut s = WorldState::new(pose(0.0, 1.5, 0.9), pose(0.0, -0.5, 1.25));
        let mut add = |id: &str, kind: ObjectKind, extent: [f64; 3], count: Option<u32>| {
            let n = s.objects.len() as f64;
            s.add_object(ObjectRecord {
                id: ObjectId(id.into()),
                pose: pose(-0.9 + 0.2 * n, 0.9, 0.8),
                characteristics: Characteristics {
                    kind,
                    graspable: true,
                    extent: extent,
                    content_count: count,
                    fastened: false,
                },
            })
            .unwrap();
        };
        add("seat", ObjectKind::Seat, [0.3, 0.3, 0.04], None);
        add("leg_1", ObjectKind::Leg, [0.04, 0.04, 0.4], None);
        add("leg_2", ObjectKind::Leg, [0.04, 0.04, 0.4], None);
        add("leg_3", ObjectKind::Leg, [0.04, 0.04, 0.4], None);
        add("leg_4", ObjectKind::Leg, [0.04, 0.04, 0.4], None);
        add("screw_box", ObjectKind::ScrewBox, [0.1, 0.1, 0.05], Some(8));
        add("screwdriver", ObjectKind::Screwdriver, [0.03, 0.03, 0.2], None);
        s
    }

    fn stool_env() -> DecomposeEnv {
        let mut waypoints = BTreeMap::new();
        waypoints.insert("parts_table".into(), pose(-0.5, 0.9, 0.9));
        waypoints.insert("human_table".into(), pose(0.0, 0.0, 1.0));
        waypoints.insert("robot_home".into(), pose(0.0, 1.5, 0.9));
        let mut env = DecomposeEnv::new(waypoints, PerceiveChannel::Gaze);
        env.ctx.delivery_zone =
            Some(Aabb::new([-0.4, -0.3, 0.5], [0.4, 0.3, 1.2]).unwrap());
        env
    }

    fn stool_domain() -> Domain {
        load_domain(STOOL_DOMAIN_TEXT).expect("shipped domain loads")
    }

    #[test]
    fn pick_and_place_expands_to_fetch_cycle() {
        let domain = stool_domain();
        let plan = decompose(
            &domain,
            &TaskInstance::new("pick_and_place", &["leg_1", "human_table"]),
            &stool_state(),
            &stool_env(),
        )
        .unwrap();
        let kinds: Vec<&str> = plan.steps.iter().map(|s| s.action.kind()).collect();
        assert_eq!(kinds, ["move", "grasp", "move", "release"]);
        assert_eq!(
            plan.steps[1].action,
            PrimitiveAction::Grasp(ObjectId("leg_1".into()))
        );
        assert_eq!(
            plan.steps[0].path,
            vec!["pick_and_place(leg_1,human_table)::shuttle".to_string()]
        );
    }

    #[test]
    fn full_stool_plan_releases_every_deliverable_part() {
        let domain = stool_domain();
        let plan = decompose(
            &domain,
            &TaskInstance::new("assemble_stool", &[]),
            &stool_state(),
            &stool_env(),
        )
        .unwrap();
        assert_eq!(plan.count_kind("release"), 7);
        assert_eq!(plan.count_kind("wait"), 5);
        assert_eq!(plan.count_kind("perceive"), 5);
        // every wait is directly preceded by a perceive
        for (i, step) in plan.steps.iter().enumerate() {
            if step.action.kind() == "wait" {
                assert_eq!(plan.steps[i - 1].action.kind(), "perceive");
            }
        }
        // provenance of the first grasp runs root -> step -> fetch
        let grasp = plan.steps.iter().find(|s| s.action.kind() == "grasp").unwrap();
        assert_eq!(grasp.path.len(), 3);
        assert_eq!(grasp.path[0], "assemble_stool::five_steps");
    }

    #[test]
    fn decompose_is_deterministic() {
        let domain = stool_domain();
        let root = TaskInstance::new("assemble_stool", &[]);
        let a = decompose(&domain, &root, &stool_state(), &stool_env()).unwrap();
        let b = decompose(&domain, &root, &stool_state(), &stool_env()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dump(), b.dump());
    }

    #[test]
    fn plan_dump_is_versioned_and_indexed() {
        let domain = stool_domain();
        let plan = decompose(
            &domain,
            &TaskInstance::new("await_idle", &[]),
            &stool_state(),
            &stool_env(),
        )
        .unwrap();
        let dump = plan.dump();
        let mut lines = dump.lines();
        assert_eq!(lines.next(), Some(PLAN_HEADER));
        assert_eq!(lines.next(), Some("0 move(robot_home) | await_idle::park_and_watch"));
        assert!(dump.lines().count() == plan.len() + 1);
    }

    #[test]
    fn missing_part_reports_no_applicable_method_with_state() {
        let domain = stool_domain();
        let mut state = stool_state();
        state.objects.remove(&ObjectId("seat".into()));
        let err = decompose(
            &domain,
            &TaskInstance::new("deliver_base", &[]),
            &state,
            &stool_env(),
        )
        .unwrap_err();
        match &err {
            DecomposeError::NoApplicableMethod { task, state_summary } => {
                assert_eq!(task, "deliver_base");
                assert!(state_summary.contains("objects=6"), "{state_summary}");
            }
            other => panic!("wrong error: {other:?}"),
        }
    }

    #[test]
    fn unknown_waypoint_is_reported_by_name() {
        let domain = stool_domain();
        let mut env = stool_env();
        env.waypoints.remove("robot_home");
        let err = decompose(
            &domain,
            &TaskInstance::new("await_idle", &[]),
            &stool_state(),
            &env,
        )
        .unwrap_err();
        assert_eq!(err, DecomposeError::UnknownWaypoint { name: "robot_home".into() });
    }

    #[test]
    fn depth_limit_stops_primitive_consuming_recursion() {
        // Recursion is legal because each pass emits a primitive, so
        // only the depth limit can stop it.
        let text = "
            domain looper
            task spin
            method spin forever {
              do move(somewhere)
              do spin
            }
        ";
        let domain = load_domain(text).unwrap();
        let mut env = stool_env();
        env.waypoints.insert("somewhere".into(), pose(0.0, 0.0, 1.0));
        let err = decompose(
            &domain,
            &TaskInstance::new("spin", &[]),
            &stool_state(),
            &env,
        )
        .unwrap_err();
        assert!(matches!(err, DecomposeError::DepthLimitExceeded { limit: 64, .. }));
    }

    #[test]
    fn unconsuming_cycle_is_rejected_at_load() {
        let text = "
            domain looper
            task a
            task b
            method a to_b { do b }
            method b back { do a }
        ";
        let err = load_domain(text).unwrap_err();
        match err {
            DomainError::Validate { scope, what } => {
                assert!(scope.starts_with("method "), "{scope}");
                assert!(what.contains("without consuming a primitive"), "{what}");
            }
            other => panic!("wrong error: {other:?}"),
        }
    }

    #[test]
    fn self_recursion_behind_a_primitive_loads() {
        let text = "
            domain ok
            task spin
            method spin forever {
              do move(somewhere)
              do spin
            }
        ";
        assert!(load_domain(text).is_ok());
    }

    #[test]
    fn parse_error_carries_line_and_column() {
        let text = "domain x\ntask a\nmethod a m {\n  do grasp(obj\n}\n";
        let err = load_domain(text).unwrap_err();
        match err {
            DomainError::Parse { line, col, what } => {
                assert_eq!(line, 5);
                assert_eq!(col, 1);
                assert!(what.contains("')'"), "{what}");
            }
            other => panic!("wrong error: {other:?}"),
        }
    }

    #[test]
    fn validation_errors_name_the_offending_method() {
        let cases: [(&str, &str); 5] = [
            (
                "domain x\ntask a\nmethod a m { do grasp(one, two) }",
                "primitive grasp takes 1",
            ),
            (
                "domain x\ntask a\nmethod a m { do mystery(one) }",
                "unknown task or action mystery",
            ),
            (
                "domain x\ntask a\nmethod a m { pre sparkly(one) do move(home) }",
                "unknown predicate sparkly",
            ),
            ("domain x\ntask a\ntask b\nmethod a m { do b }\nmethod b n { do move(home) }\nmethod a q { }", "empty subtask list"),
            (
                "domain x\ntask a(p)\nmethod a m { do move(home) }",
                "arity 1, method binds 0",
            ),
        ];
        for (text, expect) in cases {
            let err = load_domain(text).unwrap_err();
            match err {
                DomainError::Validate { scope, what } => {
                    assert!(scope.contains("method"), "{scope}");
                    assert!(what.contains(expect), "wanted {expect:?} in {what:?}");
                }
                other => panic!("wrong error for {expect:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn task_without_method_is_rejected() {
        let text = "domain x\ntask a\ntask orphan\nmethod a m { do move(home) }";
        let err = load_domain(text).unwrap_err();
        assert_eq!(
            err,
            DomainError::Validate {
                scope: "task orphan".into(),
                what: "no decomposition method declared".into()
            }
        );
    }

    #[test]
    fn wait_blocks_until_percept_matches_then_releases() {
        let domain = stool_domain();
        let env = stool_env();
        let plan = decompose(
            &domain,
            &TaskInstance::new("await_idle", &[]),
            &stool_state(),
            &env,
        )
        .unwrap();
        // move, perceive, wait(idle)
        let (cursor, state, _) =
            execute_step(&plan, 0, &stool_state(), None, &env.ctx).unwrap();
        let (cursor, state, rec) =
            execute_step(&plan, cursor, &state, Some(IntentLabel::Working), &env.ctx).unwrap();
        assert!(matches!(rec, StepRecord::Applied { .. }));
        assert_eq!(cursor, 2);

        let t_before = state.time;
        let (cursor, state, rec) =
            execute_step(&plan, cursor, &state, Some(IntentLabel::Working), &env.ctx).unwrap();
        assert_eq!(cursor, 2, "working percept must not release wait(idle)");
        assert!(matches!(rec, StepRecord::WaitBlocked { .. }));
        assert!((state.time - t_before - TICK_S).abs() < 1e-12);

        let (cursor, state, rec) =
            execute_step(&plan, cursor, &state, None, &env.ctx).unwrap();
        assert_eq!(cursor, 2, "absent percept must not release the wait");
        assert!(matches!(rec, StepRecord::WaitBlocked { .. }));

        let (cursor, state, rec) =
            execute_step(&plan, cursor, &state, Some(IntentLabel::Idle), &env.ctx).unwrap();
        assert_eq!(cursor, 3);
        assert!(matches!(rec, StepRecord::WaitReleased { .. }));
        assert!((state.time - t_before - 3.0 * TICK_S).abs() < 1e-12);
        assert_eq!(
            execute_step(&plan, cursor, &state, None, &env.ctx).unwrap_err(),
            ExecError::PlanExhausted { cursor: 3, len: 3 }
        );
    }

    #[test]
    fn perceive_updates_world_intent() {
        let domain = stool_domain();
        let env = stool_env();
        let plan = decompose(
            &domain,
            &TaskInstance::new("await_idle", &[]),
            &stool_state(),
            &env,
        )
        .unwrap();
        let (cursor, state, _) =
            execute_step(&plan, 0, &stool_state(), None, &env.ctx).unwrap();
        assert_eq!(state.human_intent, crate::action::HumanIntent::Unknown);
        let (_, state, _) =
            execute_step(&plan, cursor, &state, Some(IntentLabel::Idle), &env.ctx).unwrap();
        assert_eq!(state.human_intent, crate::action::HumanIntent::Idle);
    }

    /// Replays a plan to completion with an eventually-idle percept
    /// stream; returns the final state and tick count spent waiting.
    fn replay(
        plan: &Plan,
        mut state: WorldState,
        ctx: &EffectContext,
        percept_at: impl Fn(u64) -> Option<IntentLabel>,
        max_steps: u64,
    ) -> Option<(WorldState, u64)> {
        let mut cursor = 0;
        let mut calls = 0u64;
        while cursor < plan.len() {
            if calls >= max_steps {
                return None;
            }
            let percept = percept_at(calls);
            let (c, s, _) = execute_step(plan, cursor, &state, percept, ctx).unwrap();
            cursor = c;
            state = s;
            calls += 1;
        }
        Some((state, calls))
    }

    #[test]
    fn full_plan_replay_delivers_all_parts_and_frees_arms() {
        let domain = stool_domain();
        let env = stool_env();
        let state = stool_state();
        let plan =
            decompose(&domain, &TaskInstance::new("assemble_stool", &[]), &state, &env).unwrap();
        // percept: idle on every poll, so each wait releases immediately
        let (end, _) =
            replay(&plan, state, &env.ctx, |_| Some(IntentLabel::Idle), 10_000).unwrap();
        assert_eq!(end.delivered.len(), 7);
        assert!(end
            .effectors
            .iter()
            .all(|e| e.availability == Availability::Free));
        end.check_invariants().unwrap();
    }

    #[test]
    fn never_idle_percept_stalls_at_first_wait() {
        let domain = stool_domain();
        let env = stool_env();
        let state = stool_state();
        let plan =
            decompose(&domain, &TaskInstance::new("assemble_stool", &[]), &state, &env).unwrap();
        let first_wait = plan
            .steps
            .iter()
            .position(|s| s.action.kind() == "wait")
            .unwrap();
        let mut cursor = 0;
        let mut st = state;
        for _ in 0..200 {
            let (c, s, _) =
                execute_step(&plan, cursor, &st, Some(IntentLabel::Working), &env.ctx).unwrap();
            cursor = c;
            st = s;
        }
        assert_eq!(cursor, first_wait);
    }

    proptest! {
        /// Plan soundness: wherever the parts start out, the full plan
        /// replays with zero precondition violations and delivers all
        /// seven parts.
        #[test]
        fn plan_is_sound_over_randomized_layouts(
            xs in proptest::collection::vec(-1.2f64..1.2, 7),
            ys in proptest::collection::vec(0.6f64..1.2, 7),
            parts_x in -1.0f64..1.0,
            home_y in 1.2f64..1.8,
        ) {
            let domain = stool_domain();
            let mut state = stool_state();
            for (i, id) in ["seat", "leg_1", "leg_2", "leg_3", "leg_4", "screw_box", "screwdriver"]
                .iter()
                .enumerate()
            {
                state.objects.get_mut(&ObjectId(id.to_string())).unwrap().pose =
                    pose(xs[i], ys[i], 0.8);
            }
            let mut env = stool_env();
            env.waypoints.insert("parts_table".into(), pose(parts_x, 0.9, 0.9));
            env.waypoints.insert("robot_home".into(), pose(0.0, home_y, 0.9));

            let plan = decompose(
                &domain,
                &TaskInstance::new("assemble_stool", &[]),
                &state,
                &env,
            ).unwrap();
            let (end, _) = replay(&plan, state, &env.ctx, |_| Some(IntentLabel::Idle), 10_000)
                .expect("plan replays to completion");
            prop_assert_eq!(end.delivered.len(), 7);
            end.check_invariants().unwrap();
        }

        /// Progress: percept streams that eventually turn idle always
        /// finish; the finish time is monotone in the idle onset.
        #[test]
        fn eventually_idle_streams_always_finish(onset in 0u64..150) {
            let domain = stool_domain();
            let env = stool_env();
            let state = stool_state();
            let plan = decompose(
                &domain,
                &TaskInstance::new("assemble_stool", &[]),
                &state,
                &env,
            ).unwrap();
            let percept = |call: u64| {
                if call >= onset { Some(IntentLabel::Idle) } else { Some(IntentLabel::Working) }
            };
            let out = replay(&plan, state, &env.ctx, percept, 50_000);
            prop_assert!(out.is_some());
        }
    }
}
