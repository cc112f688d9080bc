//! Scripted human agent. Runs an ordered activity list (assemble steps
//! gated on the robot's deliveries, deliberate idle stretches timed by
//! the script), points its gaze at sampled AOI targets, and streams
//! IMU frames from the class-appropriate motion generator. One emitter
//! call per tick produces one gaze ray and one four-sensor frame.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gaze::{Aoi, AoiRole, GazeSample};
use crate::geom::{normalize, sub, Vec3};
use crate::imu::synth::{IdleMotion, MotionFrame, SynthConfig, WorkingMotion};
use crate::world::TICK_S;

/// Time-share targets per AOI role plus how often the gaze retargets.
/// Fractions must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GazeProfile {
    #[serde(default)]
    pub human_workspace: f64,
    #[serde(default)]
    pub robot_area: f64,
    #[serde(default)]
    pub parts_table: f64,
    pub switch_hz: f64,
}

impl GazeProfile {
    pub fn fraction(&self, role: AoiRole) -> f64 {
        match role {
            AoiRole::HumanWorkspace => self.human_workspace,
            AoiRole::RobotArea => self.robot_area,
            AoiRole::PartsTable => self.parts_table,
        }
    }

    pub fn sum(&self) -> f64 {
        self.human_workspace + self.robot_area + self.parts_table
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityKind {
    Assemble,
    IdleWait,
}

/// One scripted activity. `motion` names a generator profile from the
/// scenario's motion_profiles table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Activity {
    pub kind: ActivityKind,
    pub duration_s: f64,
    pub gaze: GazeProfile,
    #[serde(default = "default_motion_name")]
    pub motion: String,
}

pub fn default_motion_name() -> String {
    "default".into()
}

/// What the human did this tick.
#[derive(Debug, Clone)]
pub struct HumanTick {
    pub gaze: GazeSample,
    pub frame: MotionFrame,
    /// Ground truth: true while an assemble activity is running.
    pub working: bool,
    /// Assemble ordinal that started this tick, if any.
    pub assemble_started: Option<usize>,
    /// Assemble ordinal that ended this tick (the tick emits idle already).
    pub assemble_ended: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    /// Next assemble is queued, its parts are not delivered yet: idle.
    PendingAssemble,
    RunningAssemble,
    RunningIdleWait,
    /// Script finished: idle forever.
    Exhausted,
}

enum Motion {
    Working(WorkingMotion),
    Idle(IdleMotion),
}

const ROLES: [AoiRole; 3] = [AoiRole::HumanWorkspace, AoiRole::RobotArea, AoiRole::PartsTable];

/// Gaze retargeting process. Segment lengths are seeded draws around
/// 1/switch_hz; the role for each segment is picked by largest time
/// deficit against the profile fractions, which pins empirical
/// time-shares to the profile far faster than independent sampling.
/// During assemble, glances away from the workspace are capped below
/// the classifier dwell and never chained, so a working human can
/// never look away long enough to read as idle.
struct GazeProcess {
    profile: GazeProfile,
    cap_ticks: u64,
    capped: bool,
    role: AoiRole,
    target: Vec3,
    left: u64,
    served: [f64; 3],
    total: f64,
}

impl GazeProcess {
    fn start(profile: GazeProfile, capped: bool, cap_ticks: u64) -> Self {
        GazeProcess {
            profile,
            cap_ticks,
            capped,
            role: AoiRole::HumanWorkspace,
            target: [0.0; 3],
            left: 0,
            served: [0.0; 3],
            total: 0.0,
        }
    }

    fn pick_role(&self, prev: AoiRole) -> AoiRole {
        if self.capped && prev != AoiRole::HumanWorkspace {
            // never two consecutive away-glances while assembling
            return AoiRole::HumanWorkspace;
        }
        let mut best = None;
        for (i, role) in ROLES.into_iter().enumerate() {
            let f = self.profile.fraction(role);
            if f <= 0.0 {
                continue;
            }
            let deficit = f * (self.total + 1.0) - self.served[i];
            match best {
                Some((d, _)) if d >= deficit => {}
                _ => best = Some((deficit, role)),
            }
        }
        best.map(|(_, r)| r).unwrap_or(AoiRole::HumanWorkspace)
    }

    fn segment_ticks(&self, role: AoiRole, rng: &mut ChaCha8Rng) -> u64 {
        let secs = rng.random_range(0.5..1.5) / self.profile.switch_hz;
        let ticks = (secs / TICK_S).round().max(1.0) as u64;
        if self.capped && role != AoiRole::HumanWorkspace {
            ticks.min(self.cap_ticks.max(1))
        } else {
            ticks
        }
    }

    /// Advances one tick; returns the current target point.
    fn step(&mut self, aois: &[Aoi], rng: &mut ChaCha8Rng) -> Vec3 {
        if self.left == 0 {
            let role = self.pick_role(self.role);
            let aoi = aois.iter().find(|a| a.role == role).expect("validated roles");
            // Sample inside the middle 70% of the box so rays enter it
            // cleanly rather than grazing a face.
            let mut p = [0.0f64; 3];
            for i in 0..3 {
                let u: f64 = rng.random_range(0.15..0.85);
                p[i] = aoi.bounds.min[i] + u * (aoi.bounds.max[i] - aoi.bounds.min[i]);
            }
            self.left = self.segment_ticks(role, rng);
            self.role = role;
            self.target = p;
        }
        let idx = ROLES.iter().position(|r| *r == self.role).unwrap();
        self.served[idx] += 1.0;
        self.total += 1.0;
        self.left -= 1;
        self.target
    }
}

pub struct HumanEmitter {
    head: Vec3,
    aois: Vec<Aoi>,
    idle_gaze: GazeProfile,
    glance_cap_ticks: u64,
    activities: Vec<Activity>,
    durations_ticks: Vec<u64>,
    motion_profiles: BTreeMap<String, SynthConfig>,
    idx: usize,
    mode: Mode,
    remaining: u64,
    assembles_done: usize,
    gaze: GazeProcess,
    motion: Motion,
    rng: ChaCha8Rng,
}

impl HumanEmitter {
    /// `durations_ticks` are the resolved per-activity durations (the
    /// caller applies any scripted jitter before handing them over).
    pub fn new(
        head: Vec3,
        aois: Vec<Aoi>,
        idle_gaze: GazeProfile,
        glance_cap_s: f64,
        activities: Vec<Activity>,
        durations_ticks: Vec<u64>,
        motion_profiles: BTreeMap<String, SynthConfig>,
        mut rng: ChaCha8Rng,
    ) -> Self {
        assert_eq!(activities.len(), durations_ticks.len());
        let glance_cap_ticks = (glance_cap_s / TICK_S).floor().max(1.0) as u64;
        let default_cfg =
            motion_profiles.get("default").cloned().unwrap_or_default();
        let motion = Motion::Idle(IdleMotion::start(&mut rng, &default_cfg));
        let mut emitter = HumanEmitter {
            head,
            aois,
            idle_gaze,
            glance_cap_ticks,
            activities,
            durations_ticks,
            motion_profiles,
            idx: 0,
            mode: Mode::Exhausted,
            remaining: 0,
            assembles_done: 0,
            gaze: GazeProcess::start(idle_gaze, false, glance_cap_ticks),
            motion,
            rng,
        };
        emitter.mode = emitter.entry_mode();
        if emitter.mode == Mode::RunningIdleWait {
            emitter.begin_current();
        }
        emitter
    }

    /// Mode on arriving at activity `idx` (before any trigger fires).
    fn entry_mode(&self) -> Mode {
        match self.activities.get(self.idx).map(|a| a.kind) {
            Some(ActivityKind::Assemble) => Mode::PendingAssemble,
            Some(ActivityKind::IdleWait) => Mode::RunningIdleWait,
            None => Mode::Exhausted,
        }
    }

    fn motion_cfg(&self, idx: usize) -> SynthConfig {
        let name = self
            .activities
            .get(idx)
            .map(|a| a.motion.as_str())
            .unwrap_or("default");
        self.motion_profiles.get(name).cloned().unwrap_or_default()
    }

    /// Starts the activity at `idx`: resets motion generator and gaze
    /// process to the activity's profile.
    fn begin_current(&mut self) {
        let activity = self.activities[self.idx].clone();
        let cfg = self.motion_cfg(self.idx);
        self.remaining = self.durations_ticks[self.idx];
        match activity.kind {
            ActivityKind::Assemble => {
                self.mode = Mode::RunningAssemble;
                self.motion = Motion::Working(WorkingMotion::start(&mut self.rng, &cfg));
                self.gaze = GazeProcess::start(activity.gaze, true, self.glance_cap_ticks);
            }
            ActivityKind::IdleWait => {
                self.mode = Mode::RunningIdleWait;
                self.motion = Motion::Idle(IdleMotion::start(&mut self.rng, &cfg));
                self.gaze = GazeProcess::start(activity.gaze, false, self.glance_cap_ticks);
            }
        }
    }

    /// Leaves the running activity and settles into the next mode,
    /// resetting generators for the idle-side phases.
    fn finish_current(&mut self) {
        self.idx += 1;
        self.mode = self.entry_mode();
        match self.mode {
            Mode::RunningAssemble => unreachable!("entry modes never start running"),
            Mode::RunningIdleWait => self.begin_current(),
            Mode::PendingAssemble | Mode::Exhausted => {
                let cfg = self.motion_cfg(self.idx.min(self.activities.len().saturating_sub(1)));
                self.motion = Motion::Idle(IdleMotion::start(&mut self.rng, &cfg));
                self.gaze = GazeProcess::start(self.idle_gaze, false, self.glance_cap_ticks);
            }
        }
    }

    /// Count of assemble activities in the script.
    pub fn assemble_count(&self) -> usize {
        self.activities.iter().filter(|a| a.kind == ActivityKind::Assemble).count()
    }

    /// One tick. `ready_assembles` counts how many assemble steps have
    /// their parts fully delivered; a queued assemble starts the tick
    /// its ordinal falls below that count (and never before the script
    /// reaches it).
    pub fn step(&mut self, tick: u64, ready_assembles: usize) -> HumanTick {
        let mut started = None;
        let mut ended = None;

        // close out a finished activity first: its end tick emits the
        // follow-up phase, so ground-truth transitions align with the
        // emitted streams
        if matches!(self.mode, Mode::RunningAssemble | Mode::RunningIdleWait) && self.remaining == 0
        {
            if self.mode == Mode::RunningAssemble {
                ended = Some(self.assembles_done);
                self.assembles_done += 1;
            }
            self.finish_current();
        }

        if self.mode == Mode::PendingAssemble && self.assembles_done < ready_assembles {
            self.begin_current();
            started = Some(self.assembles_done);
        }

        if matches!(self.mode, Mode::RunningAssemble | Mode::RunningIdleWait) {
            self.remaining -= 1;
        }

        let target = self.gaze.step(&self.aois, &mut self.rng);
        let direction = normalize(sub(target, self.head)).expect("head outside every aoi");
        let gaze = GazeSample::new(tick as f64 * TICK_S, self.head, direction)
            .expect("emitter produces finite unit rays");
        let frame = match &mut self.motion {
            Motion::Working(g) => g.next_frame(&mut self.rng),
            Motion::Idle(g) => g.next_frame(&mut self.rng),
        };

        HumanTick {
            gaze,
            frame,
            working: self.mode == Mode::RunningAssemble,
            assemble_started: started,
            assemble_ended: ended,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::cast_ray_idx;
    use crate::geom::Aabb;
    use rand::SeedableRng;

    fn test_aois() -> Vec<Aoi> {
        vec![
            Aoi {
                name: "bench".into(),
                bounds: Aabb::new([-0.45, -0.3, 0.85], [0.45, 0.3, 1.35]).unwrap(),
                role: AoiRole::HumanWorkspace,
            },
            Aoi {
                name: "robot".into(),
                bounds: Aabb::new([-0.6, 1.1, 1.2], [0.6, 1.9, 1.8]).unwrap(),
                role: AoiRole::RobotArea,
            },
            Aoi {
                name: "parts".into(),
                bounds: Aabb::new([0.7, -1.9, 0.7], [1.5, -1.1, 1.3]).unwrap(),
                role: AoiRole::PartsTable,
            },
        ]
    }

    const HEAD: Vec3 = [0.0, -0.55, 1.55];

    fn emitter(activities: Vec<Activity>, seed: u64) -> HumanEmitter {
        let ticks: Vec<u64> = activities
            .iter()
            .map(|a| (a.duration_s / TICK_S).round().max(1.0) as u64)
            .collect();
        HumanEmitter::new(
            HEAD,
            test_aois(),
            GazeProfile {
                human_workspace: 0.0,
                robot_area: 0.7,
                parts_table: 0.3,
                switch_hz: 1.0,
            },
            0.3,
            activities,
            ticks,
            BTreeMap::new(),
            ChaCha8Rng::seed_from_u64(seed),
        )
    }

    fn assemble(duration_s: f64, hw: f64, switch_hz: f64) -> Activity {
        let rest = (1.0 - hw) / 2.0;
        Activity {
            kind: ActivityKind::Assemble,
            duration_s,
            gaze: GazeProfile {
                human_workspace: hw,
                robot_area: rest,
                parts_table: rest,
                switch_hz,
            },
            motion: default_motion_name(),
        }
    }

    fn hit_role(emitted: &GazeSample, aois: &[Aoi]) -> Option<AoiRole> {
        cast_ray_idx(emitted.origin, emitted.direction, aois).map(|(i, _)| aois[i].role)
    }

    #[test]
    fn pure_workspace_profile_always_hits_workspace() {
        let mut e = emitter(vec![assemble(60.0, 1.0, 2.0)], 1);
        let aois = test_aois();
        for tick in 0..1800u64 {
            let out = e.step(tick, 1);
            assert_eq!(hit_role(&out.gaze, &aois), Some(AoiRole::HumanWorkspace), "tick {tick}");
            assert!(out.working);
        }
    }

    #[test]
    fn idle_profile_fractions_hold_over_10k_ticks() {
        // spec-level check: 0.7 / 0.3 split within ±2%
        let mut e = emitter(vec![], 42);
        let aois = test_aois();
        let mut robot = 0usize;
        let mut parts = 0usize;
        let n = 10_000u64;
        for tick in 0..n {
            let out = e.step(tick, 0);
            match hit_role(&out.gaze, &aois) {
                Some(AoiRole::RobotArea) => robot += 1,
                Some(AoiRole::PartsTable) => parts += 1,
                other => panic!("idle gaze hit {other:?}"),
            }
            assert!(!out.working);
        }
        let fr = robot as f64 / n as f64;
        let fp = parts as f64 / n as f64;
        assert!((fr - 0.7).abs() < 0.02, "robot_area fraction {fr}");
        assert!((fp - 0.3).abs() < 0.02, "parts_table fraction {fp}");
    }

    #[test]
    fn away_glances_never_reach_the_dwell_cap() {
        // cap 0.3 s = 9 ticks; any longer continuous away-run while
        // assembling could flip the gaze classifier to idle
        let mut e = emitter(vec![assemble(120.0, 0.8, 2.0)], 7);
        let aois = test_aois();
        let mut run = 0u64;
        let mut longest = 0u64;
        for tick in 0..3600u64 {
            let out = e.step(tick, 1);
            if hit_role(&out.gaze, &aois) == Some(AoiRole::HumanWorkspace) {
                run = 0;
            } else {
                run += 1;
                longest = longest.max(run);
            }
        }
        assert!(longest <= 9, "longest away-glance run {longest} ticks");
        assert!(longest > 0, "profile with 20% away share never glanced");
    }

    #[test]
    fn assemble_starts_only_once_its_parts_arrive() {
        let mut e = emitter(vec![assemble(1.0, 1.0, 2.0), assemble(1.0, 1.0, 2.0)], 3);
        // nothing delivered: stays pending and idle
        for tick in 0..=100u64 {
            let out = e.step(tick, 0);
            assert!(!out.working);
            assert_eq!(out.assemble_started, None);
        }
        // first delivery lands: starts immediately, runs 30 ticks, ends
        let out = e.step(101, 1);
        assert_eq!(out.assemble_started, Some(0));
        assert!(out.working);
        for tick in 102..131u64 {
            assert!(e.step(tick, 1).working);
        }
        let out = e.step(131, 1);
        assert_eq!(out.assemble_ended, Some(0));
        assert!(!out.working, "end tick already emits idle");
        // second assemble needs the second delivery even though the
        // first one is long done
        let out = e.step(132, 1);
        assert!(!out.working);
        let out = e.step(133, 2);
        assert_eq!(out.assemble_started, Some(1));
        assert!(out.working);
    }

    #[test]
    fn idle_wait_runs_on_its_own_clock() {
        let activities = vec![
            Activity {
                kind: ActivityKind::IdleWait,
                duration_s: 1.0,
                gaze: GazeProfile {
                    human_workspace: 0.0,
                    robot_area: 1.0,
                    parts_table: 0.0,
                    switch_hz: 1.0,
                },
                motion: default_motion_name(),
            },
            assemble(1.0, 1.0, 2.0),
        ];
        let mut e = emitter(activities, 9);
        // idle_wait occupies the first 30 ticks even with parts ready
        for tick in 0..30u64 {
            let out = e.step(tick, 1);
            assert!(!out.working);
            assert_eq!(out.assemble_started, None, "tick {tick}");
        }
        // then the queued assemble starts on the standing delivery
        let out = e.step(30, 1);
        assert_eq!(out.assemble_started, Some(0));
        assert!(out.working);
    }

    #[test]
    fn same_seed_same_stream() {
        let mk = || {
            let mut e = emitter(vec![assemble(5.0, 0.9, 2.0)], 11);
            (0..300u64)
                .map(|t| {
                    let out = e.step(t, 1);
                    (out.gaze.direction, out.frame)
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(mk(), mk());
    }
}
