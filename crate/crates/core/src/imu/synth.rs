//! Synthetic IMU generator. Working motion superposes 0.5–3 Hz
//! sinusoidal limb oscillations with per-sensor phase jitter on top of
//! sensor noise; Idle motion is sensor noise plus a slow mean-reverting
//! drift, with constant gravity on the accelerometer z axes in both
//! classes. The streaming generators ([`WorkingMotion`], [`IdleMotion`])
//! emit one frame per tick so the simulator can run them for arbitrary
//! activity lengths; [`synth_dataset`] cuts fresh 500-frame windows from
//! them for training. Deterministic per seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::action::IntentLabel;
use crate::world::TICK_S;

use super::{ImuWindow, FRAME_FEATURES, SENSOR_COUNT, WINDOW_LEN};

/// One frame of raw 9-axis readings for all four sensors, in the
/// canonical sensor order.
pub type MotionFrame = [[f64; 9]; SENSOR_COUNT];

/// All generator knobs. Amplitudes are m/s² on the accelerometers;
/// gyro oscillation scales from the same components; magnetometers see
/// a static field plus noise in both classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Oscillation band of working-limb motion.
    pub freq_lo_hz: f64,
    pub freq_hi_hz: f64,
    /// Sinusoidal components per motion episode.
    pub components: usize,
    /// Per-component accelerometer amplitude range.
    pub accel_amp_lo: f64,
    pub accel_amp_hi: f64,
    /// Gyro amplitude as a fraction of the accel amplitude.
    pub gyro_amp_scale: f64,
    /// Std of the per-sensor phase offset (rad), decorrelating limbs.
    pub phase_jitter_sd: f64,
    /// White sensor noise on every axis, both classes.
    pub noise_sd: f64,
    /// Innovation std of the idle drift process.
    pub idle_drift_sd: f64,
    /// Mean-reversion factor of the idle drift (stationary std is
    /// idle_drift_sd / sqrt(1 - rho^2)), so drift stays bounded no
    /// matter how long an idle stretch runs.
    pub idle_drift_rho: f64,
    /// Gravity on accelerometer z.
    pub gravity: f64,
    /// Static magnetic field magnitude (µT) split over the axes.
    pub mag_base: f64,
    pub mag_noise_sd: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            freq_lo_hz: 0.5,
            freq_hi_hz: 3.0,
            components: 3,
            accel_amp_lo: 0.8,
            accel_amp_hi: 3.0,
            gyro_amp_scale: 0.6,
            phase_jitter_sd: 0.4,
            noise_sd: 0.15,
            idle_drift_sd: 0.02,
            idle_drift_rho: 0.995,
            gravity: 9.81,
            mag_base: 45.0,
            mag_noise_sd: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("n_per_class must be >= 1")]
    EmptyClass,
    #[error("invalid generator config: {what}")]
    BadConfig { what: String },
}

pub(crate) fn validate(cfg: &SynthConfig) -> Result<(), SynthError> {
    let bad = |what: &str| Err(SynthError::BadConfig { what: what.into() });
    if !(cfg.freq_lo_hz > 0.0 && cfg.freq_hi_hz > cfg.freq_lo_hz) {
        return bad("frequency band");
    }
    if cfg.components == 0 {
        return bad("components");
    }
    if !(cfg.accel_amp_lo > 0.0 && cfg.accel_amp_hi >= cfg.accel_amp_lo) {
        return bad("amplitude range");
    }
    if cfg.noise_sd < 0.0 || cfg.idle_drift_sd < 0.0 || cfg.mag_noise_sd < 0.0 {
        return bad("negative noise level");
    }
    if !(0.0..1.0).contains(&cfg.idle_drift_rho) {
        return bad("idle_drift_rho must be in [0, 1)");
    }
    Ok(())
}

/// Static field direction: mostly north + down, fixed across windows.
fn mag_field(cfg: &SynthConfig) -> [f64; 3] {
    [0.4 * cfg.mag_base, 0.1 * cfg.mag_base, -0.9 * cfg.mag_base]
}

fn noise_dist(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd.max(f64::MIN_POSITIVE)).unwrap()
}

/// Streaming Working-class generator: motion components are drawn once
/// at start and the phase clock runs from the start tick, so a restart
/// models a genuinely new motion episode.
#[derive(Debug, Clone)]
pub struct WorkingMotion {
    comps: Vec<(f64, f64, f64)>,
    sensor_phase: Vec<f64>,
    gyro_amp_scale: f64,
    freq_hi_hz: f64,
    gravity: f64,
    mag: [f64; 3],
    noise: Normal<f64>,
    mag_noise: Normal<f64>,
    tick: u64,
}

impl WorkingMotion {
    pub fn start(rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> Self {
        let jitter = noise_dist(cfg.phase_jitter_sd);
        let comps = (0..cfg.components)
            .map(|_| {
                (
                    rng.random_range(cfg.freq_lo_hz..cfg.freq_hi_hz),
                    rng.random_range(cfg.accel_amp_lo..=cfg.accel_amp_hi),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        let sensor_phase = (0..SENSOR_COUNT).map(|_| jitter.sample(rng)).collect();
        WorkingMotion {
            comps,
            sensor_phase,
            gyro_amp_scale: cfg.gyro_amp_scale,
            freq_hi_hz: cfg.freq_hi_hz,
            gravity: cfg.gravity,
            mag: mag_field(cfg),
            noise: noise_dist(cfg.noise_sd),
            mag_noise: noise_dist(cfg.mag_noise_sd),
            tick: 0,
        }
    }

    pub fn next_frame(&mut self, rng: &mut ChaCha8Rng) -> MotionFrame {
        let t = self.tick as f64 * TICK_S;
        self.tick += 1;
        let mut frame = [[0.0f64; 9]; SENSOR_COUNT];
        for (s, out) in frame.iter_mut().enumerate() {
            for axis in 0..3 {
                // Axes take the same components a third of a cycle apart.
                let axis_off = axis as f64 * std::f64::consts::TAU / 3.0;
                let mut a = 0.0;
                let mut g = 0.0;
                for &(f, amp, phase) in &self.comps {
                    let arg =
                        std::f64::consts::TAU * f * t + phase + self.sensor_phase[s] + axis_off;
                    a += amp * arg.sin();
                    g += self.gyro_amp_scale * amp * (f / self.freq_hi_hz) * arg.cos();
                }
                out[axis] = a + self.noise.sample(rng);
                out[3 + axis] = g + self.noise.sample(rng);
            }
            out[2] += self.gravity;
            for axis in 0..3 {
                out[6 + axis] = self.mag[axis] + self.mag_noise.sample(rng);
            }
        }
        frame
    }
}

/// Streaming Idle-class generator: white noise around a mean-reverting
/// per-sensor drift started from its stationary distribution, so idle
/// stretches of any length look like the training windows.
#[derive(Debug, Clone)]
pub struct IdleMotion {
    drift: [[f64; 6]; SENSOR_COUNT],
    rho: f64,
    step: Normal<f64>,
    gravity: f64,
    mag: [f64; 3],
    noise: Normal<f64>,
    mag_noise: Normal<f64>,
}

impl IdleMotion {
    pub fn start(rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> Self {
        let stationary_sd =
            cfg.idle_drift_sd / (1.0 - cfg.idle_drift_rho * cfg.idle_drift_rho).sqrt();
        let init = noise_dist(stationary_sd);
        let mut drift = [[0.0f64; 6]; SENSOR_COUNT];
        for sensor in drift.iter_mut() {
            for d in sensor.iter_mut() {
                *d = init.sample(rng);
            }
        }
        IdleMotion {
            drift,
            rho: cfg.idle_drift_rho,
            step: noise_dist(cfg.idle_drift_sd),
            gravity: cfg.gravity,
            mag: mag_field(cfg),
            noise: noise_dist(cfg.noise_sd),
            mag_noise: noise_dist(cfg.mag_noise_sd),
        }
    }

    pub fn next_frame(&mut self, rng: &mut ChaCha8Rng) -> MotionFrame {
        let mut frame = [[0.0f64; 9]; SENSOR_COUNT];
        for (s, out) in frame.iter_mut().enumerate() {
            for d in self.drift[s].iter_mut() {
                *d = self.rho * *d + self.step.sample(rng);
            }
            for axis in 0..3 {
                let g = if axis == 2 { self.gravity } else { 0.0 };
                out[axis] = g + self.drift[s][axis] + self.noise.sample(rng);
                out[3 + axis] = self.drift[s][3 + axis] + self.noise.sample(rng);
            }
            for axis in 0..3 {
                out[6 + axis] = self.mag[axis] + self.mag_noise.sample(rng);
            }
        }
        frame
    }
}

fn window_from<G>(mut next: G, label: IntentLabel) -> ImuWindow
where
    G: FnMut() -> MotionFrame,
{
    let mut data = Vec::with_capacity(WINDOW_LEN * FRAME_FEATURES);
    for _ in 0..WINDOW_LEN {
        let frame = next();
        for sensor in frame {
            data.extend_from_slice(&sensor);
        }
    }
    ImuWindow::from_flat(0.0, data, Some(label)).expect("generator shape")
}

/// `n_per_class` Working windows followed by `n_per_class` Idle ones,
/// each window cut from a freshly started generator.
pub fn synth_dataset(
    seed: u64,
    n_per_class: usize,
    cfg: &SynthConfig,
) -> Result<Vec<ImuWindow>, SynthError> {
    if n_per_class == 0 {
        return Err(SynthError::EmptyClass);
    }
    validate(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * n_per_class);
    for _ in 0..n_per_class {
        let mut generator = WorkingMotion::start(&mut rng, cfg);
        out.push(window_from(|| generator.next_frame(&mut rng), IntentLabel::Working));
    }
    for _ in 0..n_per_class {
        let mut generator = IdleMotion::start(&mut rng, cfg);
        out.push(window_from(|| generator.next_frame(&mut rng), IntentLabel::Idle));
    }
    Ok(out)
}

/// Mean per-window variance of the accelerometer features, the
/// signal-energy summary used to sanity-check separability.
pub fn mean_accel_energy(windows: &[ImuWindow]) -> f64 {
    let accel_cols: Vec<usize> =
        (0..SENSOR_COUNT).flat_map(|s| (0..3).map(move |a| s * 9 + a)).collect();
    let mut total = 0.0;
    for w in windows {
        let mut energy = 0.0;
        for &col in &accel_cols {
            let mut mean = 0.0;
            for r in 0..WINDOW_LEN {
                mean += w.row(r)[col];
            }
            mean /= WINDOW_LEN as f64;
            let mut var = 0.0;
            for r in 0..WINDOW_LEN {
                let d = w.row(r)[col] - mean;
                var += d * d;
            }
            energy += var / WINDOW_LEN as f64;
        }
        total += energy / accel_cols.len() as f64;
    }
    total / windows.len() as f64
}
