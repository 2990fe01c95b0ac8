//! Stage 2: contractive fully-convolutional autoencoder.
//!
//! The encoder squeezes a `(2r+1) x (2r+1) x 6` summary tensor through
//! three stride-2 convolutions, a global average pool and a linear head
//! into a `d_R`-dimensional embedding; the decoder mirrors it with
//! nearest-neighbor upsampling back to the input shape. Training
//! minimizes mean squared reconstruction error plus `lambda_c` times a
//! stochastic estimate of the squared encoder Jacobian norm: one random
//! unit direction per example per step, evaluated by a central difference
//! of the encoder (`probe_step`), whose exact parameter gradient is then
//! backpropagated.
//!
//! Everything runs in f64, single-threaded, from one seeded generator:
//! the same seed and corpus reproduce the training log and final weights
//! bit for bit. Model files quantize weights to f32.

mod net;

pub use net::Activation;

use crate::error::{Error, Result};
use crate::summary::{ReachabilitySummary, SummaryArchive, CHANNELS};
use crate::tilegrid::TileId;
use net::{
    broadcast_backward, broadcast_forward, gap_backward, gap_forward, sigmoid, upsample_backward,
    upsample_forward, Conv, Linear,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::io::{BufRead, Write};
use std::path::Path;

const CAE_MAGIC: &str = "CAE1";
const TRAIN_STREAM: u64 = 0x7472_6169;
const PROBE_STREAM: u64 = 0x7072_6f62;

/// Autoencoder hyperparameters. `seed` fully determines weight
/// initialization, batch order and probe directions.
#[derive(Debug, Clone, PartialEq)]
pub struct CaeConfig {
    pub d_r: usize,
    pub in_channels: usize,
    /// Input side length, `2r + 1`.
    pub input_hw: usize,
    /// Encoder channel widths; the decoder mirrors them.
    pub channels: [usize; 3],
    pub kernel: usize,
    pub stride: usize,
    /// Contractive penalty weight.
    pub lambda_c: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub activation: Activation,
    /// Central-difference step for the Jacobian probe.
    pub probe_step: f64,
}

impl CaeConfig {
    pub fn new(d_r: usize, input_hw: usize) -> CaeConfig {
        CaeConfig {
            d_r,
            in_channels: CHANNELS,
            input_hw,
            channels: [16, 32, 64],
            kernel: 3,
            stride: 2,
            lambda_c: 0.1,
            learning_rate: 1e-3,
            momentum: 0.9,
            batch_size: 32,
            epochs: 100,
            seed: 42,
            activation: Activation::LeakyRelu(0.1),
            probe_step: 1e-3,
        }
    }

    pub fn for_archive(d_r: usize, archive: &SummaryArchive) -> CaeConfig {
        CaeConfig::new(d_r, archive.side())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if self.d_r < 1 {
            return bad(format!("d_r must be >= 1, got {}", self.d_r));
        }
        if self.in_channels < 1 || self.input_hw < 1 {
            return bad("input shape must be nonzero".into());
        }
        if self.channels.iter().any(|&c| c == 0) {
            return bad("channel widths must be nonzero".into());
        }
        if self.kernel == 0 || self.kernel % 2 == 0 || self.stride == 0 {
            return bad("kernel must be odd and stride nonzero".into());
        }
        if self.lambda_c < 0.0 {
            return bad(format!("lambda_c must be >= 0, got {}", self.lambda_c));
        }
        if self.learning_rate <= 0.0 || self.batch_size == 0 {
            return bad("learning_rate and batch_size must be positive".into());
        }
        if self.probe_step <= 0.0 {
            return bad("probe_step must be positive".into());
        }
        Ok(())
    }

    fn input_dim(&self) -> usize {
        self.in_channels * self.input_hw * self.input_hw
    }
}

/// The trained (or freshly initialized) autoencoder.
#[derive(Debug, Clone)]
pub struct CaeModel {
    pub cfg: CaeConfig,
    enc_convs: Vec<Conv>,
    enc_fc: Linear,
    dec_fc: Linear,
    dec_convs: Vec<Conv>,
    /// Spatial sizes through the encoder: input, after conv1..conv3.
    sizes: [(usize, usize); 4],
}

impl CaeModel {
    /// Builds the architecture and initializes weights from `cfg.seed`
    /// with fan-in-scaled uniform draws; biases start at zero.
    pub fn init(cfg: &CaeConfig) -> Result<CaeModel> {
        cfg.validate()?;
        let ch = cfg.channels;
        let mut sizes = [(cfg.input_hw, cfg.input_hw); 4];
        let probe = Conv::new(1, 1, cfg.kernel, cfg.stride);
        for i in 0..3 {
            sizes[i + 1] = probe.out_size(sizes[i].0, sizes[i].1);
        }
        let mut model = CaeModel {
            cfg: cfg.clone(),
            enc_convs: vec![
                Conv::new(cfg.in_channels, ch[0], cfg.kernel, cfg.stride),
                Conv::new(ch[0], ch[1], cfg.kernel, cfg.stride),
                Conv::new(ch[1], ch[2], cfg.kernel, cfg.stride),
            ],
            enc_fc: Linear::new(ch[2], cfg.d_r),
            dec_fc: Linear::new(cfg.d_r, ch[2]),
            dec_convs: vec![
                Conv::new(ch[2], ch[1], cfg.kernel, 1),
                Conv::new(ch[1], ch[0], cfg.kernel, 1),
                Conv::new(ch[0], cfg.in_channels, cfg.kernel, 1),
            ],
            sizes,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for conv in model.enc_convs.iter_mut().chain(model.dec_convs.iter_mut()) {
            let fan_in = conv.in_c * conv.k * conv.k;
            init_uniform(&mut conv.w, fan_in, &mut rng);
        }
        let fan = model.enc_fc.in_d;
        init_uniform(&mut model.enc_fc.w, fan, &mut rng);
        let fan = model.dec_fc.in_d;
        init_uniform(&mut model.dec_fc.w, fan, &mut rng);
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        self.cfg.input_dim()
    }

    pub fn param_count(&self) -> usize {
        self.param_buffers().iter().map(|b| b.len()).sum()
    }

    /// Embedding of one input tensor (length [`CaeModel::input_dim`]).
    pub fn encode(&self, x: &[f64]) -> Vec<f64> {
        let mut t = Trace::default();
        t.input.extend_from_slice(x);
        self.encode_trace(&mut t);
        t.emb
    }

    /// Full round trip through encoder and decoder.
    pub fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        let mut t = Trace::default();
        t.input.extend_from_slice(x);
        self.encode_trace(&mut t);
        self.decode_trace(&mut t);
        t.dec_act[2].clone()
    }

    fn encode_trace(&self, t: &mut Trace) {
        let a = self.cfg.activation;
        let s = self.sizes;
        debug_assert_eq!(t.input.len(), self.input_dim());
        let Trace {
            input,
            enc_pre,
            enc_act,
            pooled,
            emb,
            ..
        } = t;
        self.enc_convs[0].forward(input, s[0].0, s[0].1, &mut enc_pre[0]);
        apply_activation(a, &enc_pre[0], &mut enc_act[0]);
        self.enc_convs[1].forward(&enc_act[0], s[1].0, s[1].1, &mut enc_pre[1]);
        apply_activation(a, &enc_pre[1], &mut enc_act[1]);
        self.enc_convs[2].forward(&enc_act[1], s[2].0, s[2].1, &mut enc_pre[2]);
        apply_activation(a, &enc_pre[2], &mut enc_act[2]);
        gap_forward(&enc_act[2], self.cfg.channels[2], s[3].0 * s[3].1, pooled);
        self.enc_fc.forward(pooled, emb);
    }

    fn decode_trace(&self, t: &mut Trace) {
        let a = self.cfg.activation;
        let s = self.sizes;
        let ch = self.cfg.channels;
        let Trace {
            emb,
            dec_fc_out,
            bcast,
            ups,
            dec_pre,
            dec_act,
            ..
        } = t;
        self.dec_fc.forward(emb, dec_fc_out);
        broadcast_forward(dec_fc_out, ch[2], s[3].0 * s[3].1, bcast);
        upsample_forward(bcast, ch[2], s[3], s[2], &mut ups[0]);
        self.dec_convs[0].forward(&ups[0], s[2].0, s[2].1, &mut dec_pre[0]);
        apply_activation(a, &dec_pre[0], &mut dec_act[0]);
        upsample_forward(&dec_act[0], ch[1], s[2], s[1], &mut ups[1]);
        self.dec_convs[1].forward(&ups[1], s[1].0, s[1].1, &mut dec_pre[1]);
        apply_activation(a, &dec_pre[1], &mut dec_act[1]);
        upsample_forward(&dec_act[1], ch[0], s[1], s[0], &mut ups[2]);
        self.dec_convs[2].forward(&ups[2], s[0].0, s[0].1, &mut dec_pre[2]);
        dec_act[2].clear();
        if a.output_is_sigmoid() {
            dec_act[2].extend(dec_pre[2].iter().map(|&z| sigmoid(z)));
        } else {
            dec_act[2].extend_from_slice(&dec_pre[2]);
        }
    }

    /// Backprop from a gradient on the reconstruction down to the
    /// embedding; conv/linear gradients accumulate into `grads`.
    fn backward_decoder(&self, t: &Trace, gy: &[f64], grads: &mut Grads) -> Vec<f64> {
        let a = self.cfg.activation;
        let s = self.sizes;
        let ch = self.cfg.channels;
        let mut g_pre: Vec<f64> = if a.output_is_sigmoid() {
            gy.iter()
                .zip(&t.dec_act[2])
                .map(|(&g, &y)| g * y * (1.0 - y))
                .collect()
        } else {
            gy.to_vec()
        };
        let mut g_ups = Vec::new();
        let (gw, gb) = grads.pair(DEC_CONV_BASE + 4);
        self.dec_convs[2].backward(&t.ups[2], s[0].0, s[0].1, &g_pre, &mut g_ups, gw, gb);
        let mut g_act = Vec::new();
        upsample_backward(&g_ups, ch[0], s[1], s[0], &mut g_act);

        mul_activation_derivative(a, &t.dec_pre[1], &mut g_act);
        g_pre = g_act;
        let (gw, gb) = grads.pair(DEC_CONV_BASE + 2);
        self.dec_convs[1].backward(&t.ups[1], s[1].0, s[1].1, &g_pre, &mut g_ups, gw, gb);
        let mut g_act = Vec::new();
        upsample_backward(&g_ups, ch[1], s[2], s[1], &mut g_act);

        mul_activation_derivative(a, &t.dec_pre[0], &mut g_act);
        g_pre = g_act;
        let (gw, gb) = grads.pair(DEC_CONV_BASE);
        self.dec_convs[0].backward(&t.ups[0], s[2].0, s[2].1, &g_pre, &mut g_ups, gw, gb);
        let mut g_bcast = Vec::new();
        upsample_backward(&g_ups, ch[2], s[3], s[2], &mut g_bcast);

        let mut g_fc_out = Vec::new();
        broadcast_backward(&g_bcast, ch[2], s[3].0 * s[3].1, &mut g_fc_out);
        let mut g_emb = Vec::new();
        let (gw, gb) = grads.pair(DEC_FC);
        self.dec_fc.backward(&t.emb, &g_fc_out, &mut g_emb, gw, gb);
        g_emb
    }

    /// Backprop from a gradient on the embedding through the encoder.
    fn backward_encoder(&self, t: &Trace, g_emb: &[f64], grads: &mut Grads) {
        let a = self.cfg.activation;
        let s = self.sizes;
        let mut g_pooled = Vec::new();
        let (gw, gb) = grads.pair(ENC_FC);
        self.enc_fc.backward(&t.pooled, g_emb, &mut g_pooled, gw, gb);
        let mut g_act = Vec::new();
        gap_backward(&g_pooled, self.cfg.channels[2], s[3].0 * s[3].1, &mut g_act);

        mul_activation_derivative(a, &t.enc_pre[2], &mut g_act);
        let mut g_prev = Vec::new();
        let (gw, gb) = grads.pair(4);
        self.enc_convs[2].backward(&t.enc_act[1], s[2].0, s[2].1, &g_act, &mut g_prev, gw, gb);

        mul_activation_derivative(a, &t.enc_pre[1], &mut g_prev);
        let mut g_act = Vec::new();
        let (gw, gb) = grads.pair(2);
        self.enc_convs[1].backward(&t.enc_act[0], s[1].0, s[1].1, &g_prev, &mut g_act, gw, gb);

        mul_activation_derivative(a, &t.enc_pre[0], &mut g_act);
        let mut g_input = Vec::new();
        let (gw, gb) = grads.pair(0);
        self.enc_convs[0].backward(&t.input, s[0].0, s[0].1, &g_act, &mut g_input, gw, gb);
    }

    /// Parameter buffers in declaration order (the order weights are
    /// initialized, serialized, and indexed by [`Grads`]).
    fn param_buffers(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::with_capacity(16);
        for c in &self.enc_convs {
            out.push(&c.w);
            out.push(&c.b);
        }
        out.push(&self.enc_fc.w);
        out.push(&self.enc_fc.b);
        out.push(&self.dec_fc.w);
        out.push(&self.dec_fc.b);
        for c in &self.dec_convs {
            out.push(&c.w);
            out.push(&c.b);
        }
        out
    }

    fn param_buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::with_capacity(16);
        for c in &mut self.enc_convs {
            out.push(&mut c.w);
            out.push(&mut c.b);
        }
        out.push(&mut self.enc_fc.w);
        out.push(&mut self.enc_fc.b);
        out.push(&mut self.dec_fc.w);
        out.push(&mut self.dec_fc.b);
        for c in &mut self.dec_convs {
            out.push(&mut c.w);
            out.push(&mut c.b);
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn zero_weights(&mut self) {
        for buf in self.param_buffers_mut() {
            buf.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Serializes as CAE1: a text header with the full configuration and
    /// parameter count, then every parameter buffer as little-endian f32
    /// in declaration order.
    pub fn save<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let c = &self.cfg;
        writeln!(w, "{CAE_MAGIC}")?;
        writeln!(w, "d_r={}", c.d_r)?;
        writeln!(w, "in_channels={}", c.in_channels)?;
        writeln!(w, "input_hw={}", c.input_hw)?;
        writeln!(w, "channels={},{},{}", c.channels[0], c.channels[1], c.channels[2])?;
        writeln!(w, "kernel={}", c.kernel)?;
        writeln!(w, "stride={}", c.stride)?;
        writeln!(w, "lambda_c={}", c.lambda_c)?;
        writeln!(w, "learning_rate={}", c.learning_rate)?;
        writeln!(w, "momentum={}", c.momentum)?;
        writeln!(w, "batch_size={}", c.batch_size)?;
        writeln!(w, "epochs={}", c.epochs)?;
        writeln!(w, "seed={}", c.seed)?;
        writeln!(w, "activation={}", c.activation)?;
        writeln!(w, "probe_step={}", c.probe_step)?;
        writeln!(w, "params={}", self.param_count())?;
        writeln!(w, "end_header")?;
        let mut buf = Vec::new();
        for b in self.param_buffers() {
            buf.clear();
            for &v in b {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn save_file(&self, path: &Path) -> Result<()> {
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        self.save(std::io::BufWriter::new(&mut tmp))?;
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    pub fn load<R: BufRead>(mut r: R, origin: &Path) -> Result<CaeModel> {
        let mut header = Vec::new();
        loop {
            let mut line = String::new();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::format(origin, "truncated header"));
            }
            let line = line.trim_end().to_string();
            if line == "end_header" {
                break;
            }
            header.push(line);
        }
        if header.first().map(String::as_str) != Some(CAE_MAGIC) {
            return Err(Error::format(origin, "bad magic: expected CAE1"));
        }
        let kv: std::collections::BTreeMap<&str, &str> =
            header[1..].iter().filter_map(|l| l.split_once('=')).collect();
        let get = |k: &str| -> Result<&str> {
            kv.get(k)
                .copied()
                .ok_or_else(|| Error::format(origin, format!("missing header key {k}")))
        };
        macro_rules! parse_key {
            ($k:literal) => {
                get($k)?
                    .parse()
                    .map_err(|_| Error::format(origin, concat!("bad value for ", $k)))?
            };
        }
        let channels_raw = get("channels")?;
        let mut channels = [0usize; 3];
        let parts: Vec<&str> = channels_raw.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::format(origin, "channels must have 3 entries"));
        }
        for (slot, p) in channels.iter_mut().zip(parts) {
            *slot = p
                .parse()
                .map_err(|_| Error::format(origin, "bad value for channels"))?;
        }
        let cfg = CaeConfig {
            d_r: parse_key!("d_r"),
            in_channels: parse_key!("in_channels"),
            input_hw: parse_key!("input_hw"),
            channels,
            kernel: parse_key!("kernel"),
            stride: parse_key!("stride"),
            lambda_c: parse_key!("lambda_c"),
            learning_rate: parse_key!("learning_rate"),
            momentum: parse_key!("momentum"),
            batch_size: parse_key!("batch_size"),
            epochs: parse_key!("epochs"),
            seed: parse_key!("seed"),
            activation: get("activation")?
                .parse()
                .map_err(|e| Error::format(origin, e))?,
            probe_step: parse_key!("probe_step"),
        };
        let declared: usize = parse_key!("params");
        let mut model = CaeModel::init(&cfg)?;
        if declared != model.param_count() {
            return Err(Error::format(
                origin,
                format!(
                    "params={declared} does not match architecture ({})",
                    model.param_count()
                ),
            ));
        }
        for b in model.param_buffers_mut() {
            let mut bytes = vec![0u8; b.len() * 4];
            r.read_exact(&mut bytes)
                .map_err(|_| Error::format(origin, "truncated weight payload"))?;
            for (i, v) in b.iter_mut().enumerate() {
                *v = f64::from(f32::from_le_bytes(bytes[i * 4..i * 4 + 4].try_into().unwrap()));
            }
        }
        let mut trailer = Vec::new();
        r.read_to_end(&mut trailer)?;
        if !trailer.is_empty() {
            return Err(Error::format(origin, "trailing bytes after weights"));
        }
        Ok(model)
    }

    pub fn load_file(path: &Path) -> Result<CaeModel> {
        let f = std::fs::File::open(path)?;
        CaeModel::load(std::io::BufReader::new(f), path)
    }
}

// Parameter buffer indices (w, b pairs) in declaration order.
const ENC_FC: usize = 6;
const DEC_FC: usize = 8;
const DEC_CONV_BASE: usize = 10;

fn init_uniform(buf: &mut [f64], fan_in: usize, rng: &mut ChaCha8Rng) {
    let bound = 1.0 / (fan_in as f64).sqrt();
    for v in buf {
        *v = rng.gen_range(-bound..bound);
    }
}

fn apply_activation(a: Activation, pre: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(pre.iter().map(|&z| a.apply(z)));
}

fn mul_activation_derivative(a: Activation, pre: &[f64], g: &mut [f64]) {
    for (gi, &z) in g.iter_mut().zip(pre) {
        *gi *= a.derivative(z);
    }
}

/// All intermediate activations of one forward pass.
#[derive(Debug, Default, Clone)]
struct Trace {
    input: Vec<f64>,
    enc_pre: [Vec<f64>; 3],
    enc_act: [Vec<f64>; 3],
    pooled: Vec<f64>,
    emb: Vec<f64>,
    dec_fc_out: Vec<f64>,
    bcast: Vec<f64>,
    ups: [Vec<f64>; 3],
    dec_pre: [Vec<f64>; 3],
    dec_act: [Vec<f64>; 3],
}

impl Trace {
    fn set_input(&mut self, x: &[f64]) {
        self.input.clear();
        self.input.extend_from_slice(x);
    }
}

/// Gradient buffers aligned with `param_buffers` order.
struct Grads(Vec<Vec<f64>>);

impl Grads {
    fn zeros_of(model: &CaeModel) -> Grads {
        Grads(model.param_buffers().iter().map(|b| vec![0.0; b.len()]).collect())
    }

    fn zero(&mut self) {
        for b in &mut self.0 {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// `(w, b)` buffers for the layer whose weight buffer sits at `i`.
    fn pair(&mut self, i: usize) -> (&mut Vec<f64>, &mut Vec<f64>) {
        let (head, tail) = self.0.split_at_mut(i + 1);
        (&mut head[i], &mut tail[0])
    }
}

/// Per-epoch training diagnostics, averaged over samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub recon_mse: f64,
    pub contractive: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,recon_mse,contractive,total\n");
        for e in &self.epochs {
            s.push_str(&format!(
                "{},{},{},{}\n",
                e.epoch, e.recon_mse, e.contractive, e.total
            ));
        }
        s
    }
}

/// Embedding of one tile.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub tile: TileId,
    pub values: Vec<f32>,
}

/// 90/10 train/validation split, fixed by a stable hash of the quadkey.
pub fn split_by_quadkey(archive: &SummaryArchive) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (i, t) in archive.tiles.iter().enumerate() {
        let qk = crate::tilegrid::tile_to_quadkey(t.center);
        if crate::hash::fnv1a64(qk.as_bytes()) % 10 == 0 {
            val.push(i);
        } else {
            train.push(i);
        }
    }
    if train.is_empty() {
        // Tiny corpora: train on everything rather than nothing.
        train = (0..archive.tiles.len()).collect();
        val.clear();
    }
    (train, val)
}

pub(crate) fn expand_tile(t: &ReachabilitySummary, side: usize, out: &mut Vec<f64>) {
    out.clear();
    out.resize(side * side * CHANNELS, 0.0);
    for &(idx, ch) in &t.pixels {
        let base = idx as usize * CHANNELS;
        for (c, &v) in ch.iter().enumerate() {
            out[base + c] = f64::from(v);
        }
    }
}

fn unit_direction(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-300 {
        v[0] = 1.0;
    } else {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Trains on the archive's train split, returning the model and the
/// per-epoch loss log. Aborts with a diagnostic on a non-finite loss.
pub fn train(archive: &SummaryArchive, cfg: &CaeConfig) -> Result<(CaeModel, TrainLog)> {
    cfg.validate()?;
    if archive.tiles.is_empty() {
        return Err(Error::Parameter("cannot train on an empty archive".into()));
    }
    check_shape(cfg, archive)?;
    let side = archive.side();
    let (train_idx, _) = split_by_quadkey(archive);

    let mut model = CaeModel::init(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ TRAIN_STREAM);
    let mut grads = Grads::zeros_of(&model);
    let mut velocity: Vec<Vec<f64>> = model
        .param_buffers()
        .iter()
        .map(|b| vec![0.0; b.len()])
        .collect();
    let mut order = train_idx;
    let mut trace = Trace::default();
    let mut plus = Trace::default();
    let mut minus = Trace::default();
    let mut x = Vec::new();
    let numel = cfg.input_dim() as f64;
    let h = cfg.probe_step;
    let mut log = TrainLog::default();

    for epoch in 0..cfg.epochs {
        shuffle(&mut order, &mut rng);
        let mut epoch_mse = 0.0;
        let mut epoch_pen = 0.0;
        let mut seen = 0usize;
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            grads.zero();
            let bsz = batch.len() as f64;
            let mut batch_mse = 0.0;
            let mut batch_pen = 0.0;
            for &ti in batch {
                expand_tile(&archive.tiles[ti], side, &mut x);
                trace.set_input(&x);
                model.encode_trace(&mut trace);
                model.decode_trace(&mut trace);
                let y = &trace.dec_act[2];
                let mut mse = 0.0;
                let gy: Vec<f64> = y
                    .iter()
                    .zip(&x)
                    .map(|(&yi, &xi)| {
                        let r = yi - xi;
                        mse += r * r;
                        2.0 * r / (numel * bsz)
                    })
                    .collect();
                batch_mse += mse / numel;
                let g_emb = model.backward_decoder(&trace, &gy, &mut grads);
                model.backward_encoder(&trace, &g_emb, &mut grads);

                if cfg.lambda_c > 0.0 {
                    let v = unit_direction(x.len(), &mut rng);
                    plus.input.clear();
                    minus.input.clear();
                    for (i, &xi) in x.iter().enumerate() {
                        plus.input.push(xi + h * v[i]);
                        minus.input.push(xi - h * v[i]);
                    }
                    model.encode_trace(&mut plus);
                    model.encode_trace(&mut minus);
                    let mut pen = 0.0;
                    let g_plus: Vec<f64> = plus
                        .emb
                        .iter()
                        .zip(&minus.emb)
                        .map(|(&ep, &em)| {
                            let g = (ep - em) / (2.0 * h);
                            pen += g * g;
                            cfg.lambda_c * g / (bsz * h)
                        })
                        .collect();
                    batch_pen += pen;
                    let g_minus: Vec<f64> = g_plus.iter().map(|&g| -g).collect();
                    model.backward_encoder(&plus, &g_plus, &mut grads);
                    model.backward_encoder(&minus, &g_minus, &mut grads);
                }
            }
            let batch_loss = (batch_mse + cfg.lambda_c * batch_pen) / bsz;
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch: epoch + 1,
                    step,
                    value: batch_loss,
                });
            }
            sgd_step(&mut model, &grads, &mut velocity, cfg);
            epoch_mse += batch_mse;
            epoch_pen += batch_pen;
            seen += batch.len();
        }
        let n = seen as f64;
        log.epochs.push(EpochStats {
            epoch: epoch + 1,
            recon_mse: epoch_mse / n,
            contractive: epoch_pen / n,
            total: (epoch_mse + cfg.lambda_c * epoch_pen) / n,
        });
    }
    Ok((model, log))
}

fn sgd_step(model: &mut CaeModel, grads: &Grads, velocity: &mut [Vec<f64>], cfg: &CaeConfig) {
    for ((buf, vel), g) in model
        .param_buffers_mut()
        .into_iter()
        .zip(velocity.iter_mut())
        .zip(&grads.0)
    {
        for i in 0..buf.len() {
            vel[i] = cfg.momentum * vel[i] - cfg.learning_rate * g[i];
            buf[i] += vel[i];
        }
    }
}

fn shuffle(order: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
}

fn check_shape(cfg: &CaeConfig, archive: &SummaryArchive) -> Result<()> {
    if cfg.input_hw != archive.side() {
        return Err(Error::ArtifactMismatch {
            field: "r",
            expected: ((cfg.input_hw as u32).saturating_sub(1) / 2).to_string(),
            actual: archive.r().to_string(),
        });
    }
    if cfg.in_channels != CHANNELS {
        return Err(Error::ArtifactMismatch {
            field: "channels",
            expected: CHANNELS.to_string(),
            actual: cfg.in_channels.to_string(),
        });
    }
    Ok(())
}

/// The full training objective for one input at the current parameters:
/// reconstruction MSE plus `lambda_c` times the probe-direction Jacobian
/// estimate. Used by the gradient check.
fn objective(model: &CaeModel, x: &[f64], probe: Option<&[f64]>) -> f64 {
    let mut t = Trace::default();
    t.set_input(x);
    model.encode_trace(&mut t);
    model.decode_trace(&mut t);
    let numel = x.len() as f64;
    let mse: f64 = t.dec_act[2]
        .iter()
        .zip(x)
        .map(|(&y, &xi)| (y - xi) * (y - xi))
        .sum::<f64>()
        / numel;
    let pen = match probe {
        Some(v) => {
            let h = model.cfg.probe_step;
            let mut p = Trace::default();
            let mut m = Trace::default();
            for (i, &xi) in x.iter().enumerate() {
                p.input.push(xi + h * v[i]);
                m.input.push(xi - h * v[i]);
            }
            model.encode_trace(&mut p);
            model.encode_trace(&mut m);
            p.emb
                .iter()
                .zip(&m.emb)
                .map(|(&ep, &em)| {
                    let g = (ep - em) / (2.0 * h);
                    g * g
                })
                .sum()
        }
        None => 0.0,
    };
    mse + model.cfg.lambda_c * pen
}

/// Compares the analytic gradient of the full objective against central
/// finite differences for every parameter and returns the worst relative
/// error, `|a - n| / max(|a| + |n|, 1e-3)` (the floor keeps near-zero
/// gradients from inflating the ratio).
///
/// The check must run at a generic point: when a leaky-rectifier
/// pre-activation lies within `fd_step` (times the local sensitivity) of
/// zero, the difference interval straddles the kink and the numeric side
/// stops being a derivative estimate.
pub fn gradient_check(cfg: &CaeConfig, input: &[f64], fd_step: f64) -> Result<f64> {
    let mut model = CaeModel::init(cfg)?;
    if input.len() != model.input_dim() {
        return Err(Error::Parameter(format!(
            "gradient_check input has {} values, expected {}",
            input.len(),
            model.input_dim()
        )));
    }
    let probe: Option<Vec<f64>> = if cfg.lambda_c > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ PROBE_STREAM);
        Some(unit_direction(input.len(), &mut rng))
    } else {
        None
    };

    // Analytic pass, batch of one.
    let mut grads = Grads::zeros_of(&model);
    let mut trace = Trace::default();
    trace.set_input(input);
    model.encode_trace(&mut trace);
    model.decode_trace(&mut trace);
    let numel = input.len() as f64;
    let gy: Vec<f64> = trace.dec_act[2]
        .iter()
        .zip(input)
        .map(|(&y, &x)| 2.0 * (y - x) / numel)
        .collect();
    let g_emb = model.backward_decoder(&trace, &gy, &mut grads);
    model.backward_encoder(&trace, &g_emb, &mut grads);
    if let Some(v) = &probe {
        let h = cfg.probe_step;
        let mut plus = Trace::default();
        let mut minus = Trace::default();
        for (i, &xi) in input.iter().enumerate() {
            plus.input.push(xi + h * v[i]);
            minus.input.push(xi - h * v[i]);
        }
        model.encode_trace(&mut plus);
        model.encode_trace(&mut minus);
        let g_plus: Vec<f64> = plus
            .emb
            .iter()
            .zip(&minus.emb)
            .map(|(&ep, &em)| cfg.lambda_c * ((ep - em) / (2.0 * h)) / h)
            .collect();
        let g_minus: Vec<f64> = g_plus.iter().map(|&g| -g).collect();
        model.backward_encoder(&plus, &g_plus, &mut grads);
        model.backward_encoder(&minus, &g_minus, &mut grads);
    }

    // Numeric pass.
    let mut worst = 0.0f64;
    let n_buffers = grads.0.len();
    for b in 0..n_buffers {
        for i in 0..grads.0[b].len() {
            let old = model.param_buffers()[b][i];
            model.param_buffers_mut()[b][i] = old + fd_step;
            let up = objective(&model, input, probe.as_deref());
            model.param_buffers_mut()[b][i] = old - fd_step;
            let down = objective(&model, input, probe.as_deref());
            model.param_buffers_mut()[b][i] = old;
            let numeric = (up - down) / (2.0 * fd_step);
            let analytic = grads.0[b][i];
            let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-3);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

/// Deterministic forward pass over every tile in the archive (quadkey
/// order); errors when the model was trained for a different summary
/// shape.
pub fn embed(model: &CaeModel, archive: &SummaryArchive) -> Result<Vec<EmbeddingVector>> {
    check_shape(&model.cfg, archive)?;
    let side = archive.side();
    let mut trace = Trace::default();
    let mut x = Vec::new();
    let mut out = Vec::with_capacity(archive.tiles.len());
    for t in &archive.tiles {
        expand_tile(t, side, &mut x);
        trace.set_input(&x);
        model.encode_trace(&mut trace);
        let values: Vec<f32> = trace.emb.iter().map(|&v| v as f32).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!(
                "non-finite embedding for tile {}",
                t.center
            )));
        }
        out.push(EmbeddingVector {
            tile: t.center,
            values,
        });
    }
    Ok(out)
}

/// Mean squared directional derivative of the encoder over `inputs`,
/// `probes` random unit directions each: the quantity the contractive
/// penalty regularizes.
pub fn jacobian_norm_estimate(
    model: &CaeModel,
    inputs: &[Vec<f64>],
    probes: usize,
    seed: u64,
) -> f64 {
    if inputs.is_empty() || probes == 0 {
        return 0.0;
    }
    let h = model.cfg.probe_step;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plus = Trace::default();
    let mut minus = Trace::default();
    let mut total = 0.0;
    for x in inputs {
        for _ in 0..probes {
            let v = unit_direction(x.len(), &mut rng);
            plus.input.clear();
            minus.input.clear();
            for (i, &xi) in x.iter().enumerate() {
                plus.input.push(xi + h * v[i]);
                minus.input.push(xi - h * v[i]);
            }
            model.encode_trace(&mut plus);
            model.encode_trace(&mut minus);
            total += plus
                .emb
                .iter()
                .zip(&minus.emb)
                .map(|(&ep, &em)| {
                    let g = (ep - em) / (2.0 * h);
                    g * g
                })
                .sum::<f64>();
        }
    }
    total / (inputs.len() * probes) as f64
}
