//! Single-layer LSTM binary classifier: forward recurrence, hand-written
//! backpropagation through time, finite-difference gradient verification,
//! and the weights file format.
//!
//! Gate equations (gate order i, f, g, o throughout):
//!   i_t = sigmoid(W_i x_t + U_i h_{t-1} + b_i)
//!   f_t = sigmoid(W_f x_t + U_f h_{t-1} + b_f)
//!   g_t = tanh   (W_g x_t + U_g h_{t-1} + b_g)
//!   o_t = sigmoid(W_o x_t + U_o h_{t-1} + b_o)
//!   c_t = f_t * c_{t-1} + i_t * g_t
//!   h_t = o_t * tanh(c_t)
//! with h_0 = c_0 = 0, readout p = sigmoid(w_out . h_T + b_out), and
//! inputs z-normalized by the stored per-feature (mean, std).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::action::IntentLabel;

/// Weights of one gate: input matrix (H×F row-major), recurrent matrix
/// (H×H row-major), bias (H).
#[derive(Debug, Clone, PartialEq)]
pub struct GateWeights {
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

/// Full parameter set of the classifier, including the feature
/// normalization fitted on the training split so inference is
/// self-contained.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input: usize,
    pub hidden: usize,
    /// Gate order: input, forget, candidate, output.
    pub gates: [GateWeights; 4],
    pub w_out: Vec<f64>,
    pub b_out: f64,
    pub norm_mean: Vec<f64>,
    pub norm_std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LstmError {
    #[error("dimension mismatch: {what}")]
    Dim { what: String },
    #[error("non-finite parameter in {what}")]
    NonFinite { what: String },
    #[error("normalization std must be > 0 (feature {index})")]
    BadStd { index: usize },
}

impl LstmParams {
    /// All-zero parameters with identity normalization.
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let gate = || GateWeights {
            w: vec![0.0; hidden * input],
            u: vec![0.0; hidden * hidden],
            b: vec![0.0; hidden],
        };
        Self {
            input,
            hidden,
            gates: [gate(), gate(), gate(), gate()],
            w_out: vec![0.0; hidden],
            b_out: 0.0,
            norm_mean: vec![0.0; input],
            norm_std: vec![1.0; input],
        }
    }

    /// Small-uniform seeded init. The forget bias starts at 1 so the
    /// cell retains memory before training has shaped the gates.
    pub fn init(input: usize, hidden: usize, seed: u64, scale: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(input, hidden);
        for gate in &mut p.gates {
            for v in gate.w.iter_mut().chain(gate.u.iter_mut()).chain(gate.b.iter_mut()) {
                *v = rng.random_range(-scale..scale);
            }
        }
        for v in &mut p.w_out {
            *v = rng.random_range(-scale..scale);
        }
        p.b_out = rng.random_range(-scale..scale);
        for b in &mut p.gates[1].b {
            *b = 1.0;
        }
        p
    }

    pub fn validate(&self) -> Result<(), LstmError> {
        let (h, f) = (self.hidden, self.input);
        if h == 0 || f == 0 {
            return Err(LstmError::Dim { what: "zero-sized layer".into() });
        }
        for (gi, gate) in self.gates.iter().enumerate() {
            let name = ["i", "f", "g", "o"][gi];
            if gate.w.len() != h * f || gate.u.len() != h * h || gate.b.len() != h {
                return Err(LstmError::Dim { what: format!("gate {name}") });
            }
            if !gate.w.iter().chain(&gate.u).chain(&gate.b).all(|v| v.is_finite()) {
                return Err(LstmError::NonFinite { what: format!("gate {name}") });
            }
        }
        if self.w_out.len() != h {
            return Err(LstmError::Dim { what: "w_out".into() });
        }
        if !self.w_out.iter().all(|v| v.is_finite()) || !self.b_out.is_finite() {
            return Err(LstmError::NonFinite { what: "readout".into() });
        }
        if self.norm_mean.len() != f || self.norm_std.len() != f {
            return Err(LstmError::Dim { what: "normalization".into() });
        }
        if !self.norm_mean.iter().all(|v| v.is_finite()) {
            return Err(LstmError::NonFinite { what: "norm_mean".into() });
        }
        for (i, s) in self.norm_std.iter().enumerate() {
            if !s.is_finite() || *s <= 0.0 {
                return Err(LstmError::BadStd { index: i });
            }
        }
        Ok(())
    }

    /// Number of trainable parameters (normalization constants are
    /// fitted, not trained).
    pub fn trainable_count(&self) -> usize {
        let (h, f) = (self.hidden, self.input);
        4 * (h * f + h * h + h) + h + 1
    }

    /// Flat parameter order: per gate (i, f, g, o) the blocks w, u, b;
    /// then w_out, then b_out. Shared by the weights file and the
    /// gradient check.
    pub fn trainable_mut(&mut self, idx: usize) -> &mut f64 {
        let (h, f) = (self.hidden, self.input);
        let per_gate = h * f + h * h + h;
        if idx < 4 * per_gate {
            let gate = &mut self.gates[idx / per_gate];
            let mut off = idx % per_gate;
            if off < h * f {
                return &mut gate.w[off];
            }
            off -= h * f;
            if off < h * h {
                return &mut gate.u[off];
            }
            return &mut gate.b[off - h * h];
        }
        let off = idx - 4 * per_gate;
        if off < h {
            return &mut self.w_out[off];
        }
        debug_assert_eq!(off, h);
        &mut self.b_out
    }
}

/// Gradients in the same shape and flat order as the trainables.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrads {
    pub gates: [GateWeights; 4],
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

impl LstmGrads {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let p = LstmParams::zeros(input, hidden);
        Self { gates: p.gates, w_out: p.w_out, b_out: p.b_out }
    }

    pub fn trainable(&self, idx: usize) -> f64 {
        let h = self.w_out.len();
        let f = self.gates[0].w.len() / h;
        let per_gate = h * f + h * h + h;
        if idx < 4 * per_gate {
            let gate = &self.gates[idx / per_gate];
            let mut off = idx % per_gate;
            if off < h * f {
                return gate.w[off];
            }
            off -= h * f;
            if off < h * h {
                return gate.u[off];
            }
            return gate.b[off - h * h];
        }
        let off = idx - 4 * per_gate;
        if off < h {
            return self.w_out[off];
        }
        self.b_out
    }

    pub fn add_scaled(&mut self, other: &LstmGrads, s: f64) {
        for (g, o) in self.gates.iter_mut().zip(&other.gates) {
            for (a, b) in g.w.iter_mut().zip(&o.w) {
                *a += s * b;
            }
            for (a, b) in g.u.iter_mut().zip(&o.u) {
                *a += s * b;
            }
            for (a, b) in g.b.iter_mut().zip(&o.b) {
                *a += s * b;
            }
        }
        for (a, b) in self.w_out.iter_mut().zip(&other.w_out) {
            *a += s * b;
        }
        self.b_out += s * other.b_out;
    }

    pub fn scale(&mut self, s: f64) {
        for g in &mut self.gates {
            for v in g.w.iter_mut().chain(g.u.iter_mut()).chain(g.b.iter_mut()) {
                *v *= s;
            }
        }
        for v in &mut self.w_out {
            *v *= s;
        }
        self.b_out *= s;
    }

    pub fn global_norm(&self) -> f64 {
        let mut s = 0.0;
        for g in &self.gates {
            for v in g.w.iter().chain(&g.u).chain(&g.b) {
                s += v * v;
            }
        }
        for v in &self.w_out {
            s += v * v;
        }
        s += self.b_out * self.b_out;
        s.sqrt()
    }
}

/// Borrowed T×F feature matrix, row per timestep.
#[derive(Debug, Clone, Copy)]
pub struct Seq<'a> {
    data: &'a [f64],
    pub steps: usize,
    pub features: usize,
}

impl<'a> Seq<'a> {
    pub fn new(data: &'a [f64], steps: usize, features: usize) -> Result<Self, LstmError> {
        if data.len() != steps * features || steps == 0 {
            return Err(LstmError::Dim {
                what: format!("sequence {}x{} vs {} values", steps, features, data.len()),
            });
        }
        Ok(Self { data, steps, features })
    }

    fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.features..(t + 1) * self.features]
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Numerically stable binary cross-entropy from the logit.
pub fn bce_with_logit(logit: f64, y: f64) -> f64 {
    logit.max(0.0) - logit * y + (-logit.abs()).exp().ln_1p()
}

fn label_target(label: IntentLabel) -> f64 {
    match label {
        IntentLabel::Working => 1.0,
        IntentLabel::Idle => 0.0,
    }
}

/// out[r] += M x for a row-major rows×cols matrix.
fn matvec_add(m: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        let mut s = 0.0;
        for (a, b) in row.iter().zip(x) {
            s += a * b;
        }
        out[r] += s;
    }
}

/// out[c] += M^T x for a row-major rows×cols matrix.
fn matvec_t_add(m: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        let xr = x[r];
        for (o, a) in out.iter_mut().zip(row) {
            *o += xr * a;
        }
    }
}

/// Lean recurrence keeping only the current h and c. Returns the
/// readout logit.
pub fn forward_logit(params: &LstmParams, seq: Seq) -> Result<f64, LstmError> {
    if seq.features != params.input {
        return Err(LstmError::Dim {
            what: format!("sequence has {} features, params expect {}", seq.features, params.input),
        });
    }
    let h = params.hidden;
    let mut hid = vec![0.0; h];
    let mut cell = vec![0.0; h];
    let mut xn = vec![0.0; params.input];
    let mut acts = vec![0.0; 4 * h];
    for t in 0..seq.steps {
        let x = seq.row(t);
        for j in 0..params.input {
            xn[j] = (x[j] - params.norm_mean[j]) / params.norm_std[j];
        }
        for (gi, gate) in params.gates.iter().enumerate() {
            let a = &mut acts[gi * h..(gi + 1) * h];
            a.copy_from_slice(&gate.b);
            matvec_add(&gate.w, h, params.input, &xn, a);
            matvec_add(&gate.u, h, h, &hid, a);
        }
        for r in 0..h {
            let i = sigmoid(acts[r]);
            let f = sigmoid(acts[h + r]);
            let g = acts[2 * h + r].tanh();
            let o = sigmoid(acts[3 * h + r]);
            cell[r] = f * cell[r] + i * g;
            hid[r] = o * cell[r].tanh();
        }
    }
    let mut logit = params.b_out;
    for (w, v) in params.w_out.iter().zip(&hid) {
        logit += w * v;
    }
    Ok(logit)
}

/// Probability of Working for the sequence. Pure: identical inputs
/// give identical bits.
pub fn lstm_forward(params: &LstmParams, seq: Seq) -> Result<f64, LstmError> {
    Ok(sigmoid(forward_logit(params, seq)?))
}

/// Per-step values saved by the cached forward pass for BPTT.
pub(crate) struct ForwardCache {
    xn: Vec<f64>,     // T×F normalized inputs
    gates: Vec<f64>,  // T×4H activated gate values, blocks i,f,g,o
    cell: Vec<f64>,   // T×H
    hid: Vec<f64>,    // T×H
    pub logit: f64,
}

pub(crate) fn forward_cached(params: &LstmParams, seq: Seq) -> Result<ForwardCache, LstmError> {
    if seq.features != params.input {
        return Err(LstmError::Dim {
            what: format!("sequence has {} features, params expect {}", seq.features, params.input),
        });
    }
    let (h, tlen, flen) = (params.hidden, seq.steps, params.input);
    let mut cache = ForwardCache {
        xn: vec![0.0; tlen * flen],
        gates: vec![0.0; tlen * 4 * h],
        cell: vec![0.0; tlen * h],
        hid: vec![0.0; tlen * h],
        logit: 0.0,
    };
    let mut acts = vec![0.0; 4 * h];
    let mut hid_prev = vec![0.0; h];
    let mut cell_prev = vec![0.0; h];
    for t in 0..tlen {
        let x = seq.row(t);
        let xn = &mut cache.xn[t * flen..(t + 1) * flen];
        for j in 0..flen {
            xn[j] = (x[j] - params.norm_mean[j]) / params.norm_std[j];
        }
        for (gi, gate) in params.gates.iter().enumerate() {
            let a = &mut acts[gi * h..(gi + 1) * h];
            a.copy_from_slice(&gate.b);
            matvec_add(&gate.w, h, flen, xn, a);
            matvec_add(&gate.u, h, h, &hid_prev, a);
        }
        for r in 0..h {
            let i = sigmoid(acts[r]);
            let f = sigmoid(acts[h + r]);
            let g = acts[2 * h + r].tanh();
            let o = sigmoid(acts[3 * h + r]);
            let c = f * cell_prev[r] + i * g;
            cache.gates[t * 4 * h + r] = i;
            cache.gates[t * 4 * h + h + r] = f;
            cache.gates[t * 4 * h + 2 * h + r] = g;
            cache.gates[t * 4 * h + 3 * h + r] = o;
            cache.cell[t * h + r] = c;
            let hv = o * c.tanh();
            cache.hid[t * h + r] = hv;
            cell_prev[r] = c;
            hid_prev[r] = hv;
        }
    }
    cache.logit = params.b_out;
    for (w, v) in params.w_out.iter().zip(&cache.hid[(tlen - 1) * h..]) {
        cache.logit += w * v;
    }
    Ok(cache)
}

/// Cross-entropy loss and its gradient w.r.t. every trainable
/// parameter, by backpropagation through the unrolled recurrence.
pub fn lstm_backward(
    params: &LstmParams,
    seq: Seq,
    label: IntentLabel,
) -> Result<(f64, LstmGrads), LstmError> {
    let cache = forward_cached(params, seq)?;
    let y = label_target(label);
    let loss = bce_with_logit(cache.logit, y);
    let (h, tlen, flen) = (params.hidden, seq.steps, params.input);
    let mut grads = LstmGrads::zeros(flen, h);

    let dlogit = sigmoid(cache.logit) - y;
    grads.b_out = dlogit;
    let last_hid = &cache.hid[(tlen - 1) * h..];
    for r in 0..h {
        grads.w_out[r] = dlogit * last_hid[r];
    }

    let mut dh: Vec<f64> = params.w_out.iter().map(|w| dlogit * w).collect();
    let mut dc = vec![0.0; h];
    let mut da = vec![0.0; 4 * h];
    for t in (0..tlen).rev() {
        let gates = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
        let cell = &cache.cell[t * h..(t + 1) * h];
        for r in 0..h {
            let (i, f, g, o) = (gates[r], gates[h + r], gates[2 * h + r], gates[3 * h + r]);
            let tc = cell[r].tanh();
            let c_prev = if t == 0 { 0.0 } else { cache.cell[(t - 1) * h + r] };
            let do_ = dh[r] * tc;
            let dct = dc[r] + dh[r] * o * (1.0 - tc * tc);
            let di = dct * g;
            let dg = dct * i;
            let df = dct * c_prev;
            dc[r] = dct * f;
            da[r] = di * i * (1.0 - i);
            da[h + r] = df * f * (1.0 - f);
            da[2 * h + r] = dg * (1.0 - g * g);
            da[3 * h + r] = do_ * o * (1.0 - o);
        }
        let xn = &cache.xn[t * flen..(t + 1) * flen];
        let prev_hid: Option<&[f64]> =
            if t == 0 { None } else { Some(&cache.hid[(t - 1) * h..t * h]) };
        for r in &mut dh {
            *r = 0.0;
        }
        for gi in 0..4 {
            let a = &da[gi * h..(gi + 1) * h];
            let gate = &mut grads.gates[gi];
            for r in 0..h {
                let ar = a[r];
                let row = &mut gate.w[r * flen..(r + 1) * flen];
                for (slot, xj) in row.iter_mut().zip(xn) {
                    *slot += ar * xj;
                }
                gate.b[r] += ar;
                if let Some(ph) = prev_hid {
                    let urow = &mut gate.u[r * h..(r + 1) * h];
                    for (slot, hj) in urow.iter_mut().zip(ph) {
                        *slot += ar * hj;
                    }
                }
            }
            matvec_t_add(&params.gates[gi].u, h, h, a, &mut dh);
        }
    }
    Ok((loss, grads))
}

/// Maximum relative error between analytic and central-difference
/// gradients over every trainable parameter:
/// |a − n| / max(|a|, |n|, 1e-12). Deterministic; parameter slots are
/// checked independently in parallel.
pub fn gradient_check(
    params: &LstmParams,
    seq: Seq,
    label: IntentLabel,
    epsilon: f64,
) -> Result<f64, LstmError> {
    let (_, grads) = lstm_backward(params, seq, label)?;
    let y = label_target(label);
    let n = params.trainable_count();
    (0..n)
        .into_par_iter()
        .map(|k| {
            let mut p = params.clone();
            *p.trainable_mut(k) += epsilon;
            let lp = bce_with_logit(forward_logit(&p, seq)?, y);
            *p.trainable_mut(k) -= 2.0 * epsilon;
            let lm = bce_with_logit(forward_logit(&p, seq)?, y);
            let numeric = (lp - lm) / (2.0 * epsilon);
            let analytic = grads.trainable(k);
            Ok((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12))
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

// ---------------------------------------------------------------------
// Weights file: magic, u32 input, u32 hidden, then every trainable in
// flat order, then norm_mean and norm_std; all values little-endian
// f64. A structured-text export exists for inspection.
// ---------------------------------------------------------------------

pub const WEIGHTS_MAGIC: &[u8; 8] = b"TDMLSTM1";
pub const WEIGHTS_TEXT_HEADER: &str = "tandem-lstm-text-v1";

#[derive(Debug, thiserror::Error)]
pub enum WeightsIoError {
    #[error("weights i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a weights file (bad magic)")]
    BadMagic,
    #[error("weights file truncated")]
    Truncated,
    #[error("weights file invalid: {0}")]
    Invalid(#[from] LstmError),
}

pub fn save_weights<W: std::io::Write>(mut w: W, params: &LstmParams) -> Result<(), WeightsIoError> {
    params.validate()?;
    w.write_all(WEIGHTS_MAGIC)?;
    w.write_all(&(params.input as u32).to_le_bytes())?;
    w.write_all(&(params.hidden as u32).to_le_bytes())?;
    let mut write_f64 = |v: f64| w.write_all(&v.to_le_bytes());
    for gate in &params.gates {
        for v in gate.w.iter().chain(&gate.u).chain(&gate.b) {
            write_f64(*v)?;
        }
    }
    for v in &params.w_out {
        write_f64(*v)?;
    }
    write_f64(params.b_out)?;
    for v in params.norm_mean.iter().chain(&params.norm_std) {
        write_f64(*v)?;
    }
    Ok(())
}

pub fn load_weights<R: std::io::Read>(mut r: R) -> Result<LstmParams, WeightsIoError> {
    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic)?;
    if &magic != WEIGHTS_MAGIC {
        return Err(WeightsIoError::BadMagic);
    }
    let mut dim = [0u8; 4];
    read_exact(&mut r, &mut dim)?;
    let input = u32::from_le_bytes(dim) as usize;
    read_exact(&mut r, &mut dim)?;
    let hidden = u32::from_le_bytes(dim) as usize;
    if input == 0 || hidden == 0 || input > 1 << 20 || hidden > 1 << 20 {
        return Err(WeightsIoError::Invalid(LstmError::Dim {
            what: format!("header dims {input}x{hidden}"),
        }));
    }
    let mut p = LstmParams::zeros(input, hidden);
    {
        let mut read_f64 = |slot: &mut f64| -> Result<(), WeightsIoError> {
            let mut b = [0u8; 8];
            read_exact(&mut r, &mut b)?;
            *slot = f64::from_le_bytes(b);
            Ok(())
        };
        for gi in 0..4 {
            let gate = &mut p.gates[gi];
            for v in gate.w.iter_mut().chain(gate.u.iter_mut()).chain(gate.b.iter_mut()) {
                read_f64(v)?;
            }
        }
        for v in &mut p.w_out {
            read_f64(v)?;
        }
        read_f64(&mut p.b_out)?;
        for v in p.norm_mean.iter_mut().chain(p.norm_std.iter_mut()) {
            read_f64(v)?;
        }
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(WeightsIoError::Invalid(LstmError::Dim {
            what: "trailing bytes after weights".into(),
        }));
    }
    p.validate()?;
    Ok(p)
}

fn read_exact<R: std::io::Read>(r: &mut R, buf: &mut [u8]) -> Result<(), WeightsIoError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            WeightsIoError::Truncated
        } else {
            WeightsIoError::Io(e)
        }
    })
}

/// Human-readable dump of the full parameter set.
pub fn export_weights_text<W: std::io::Write>(
    mut w: W,
    params: &LstmParams,
) -> std::io::Result<()> {
    writeln!(w, "{WEIGHTS_TEXT_HEADER}")?;
    writeln!(w, "input {}", params.input)?;
    writeln!(w, "hidden {}", params.hidden)?;
    let write_mat = |w: &mut W, name: &str, m: &[f64], rows: usize, cols: usize| {
        writeln!(w, "{name} {rows}x{cols}")?;
        for r in 0..rows {
            let row: Vec<String> =
                m[r * cols..(r + 1) * cols].iter().map(|v| v.to_string()).collect();
            writeln!(w, "  {}", row.join(" "))?;
        }
        Ok::<(), std::io::Error>(())
    };
    for (gi, gate) in params.gates.iter().enumerate() {
        let name = ["i", "f", "g", "o"][gi];
        write_mat(&mut w, &format!("gate_{name}_w"), &gate.w, params.hidden, params.input)?;
        write_mat(&mut w, &format!("gate_{name}_u"), &gate.u, params.hidden, params.hidden)?;
        write_mat(&mut w, &format!("gate_{name}_b"), &gate.b, 1, params.hidden)?;
    }
    write_mat(&mut w, "w_out", &params.w_out, 1, params.hidden)?;
    writeln!(w, "b_out {}", params.b_out)?;
    write_mat(&mut w, "norm_mean", &params.norm_mean, 1, params.input)?;
    write_mat(&mut w, "norm_std", &params.norm_std, 1, params.input)?;
    Ok(())
}
