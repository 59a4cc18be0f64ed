//! Strict JSON run configuration.
//!
//! Parsing walks the raw JSON tree so that every problem in a file is
//! reported at once: unknown keys, wrong types and out-of-range values all
//! land in the same list, each prefixed by its dotted path.

use std::fmt::Display;
use std::path::PathBuf;

use gmi_core::blockmem::MAX_BLOCK_LENGTH;
use gmi_core::channels::MAX_QUANTIZER_BITS;
use gmi_core::linksim::{Decoder, FrontEndChoice, EXHAUSTIVE_CAP, MAX_LN_MESSAGES};
use gmi_core::quadrature::MAX_ORDER;
use gmi_core::{ChannelModel, Nonlinearity, QuadConfig};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub channel: Option<ChannelModel>,
    /// Input energy E_s; 1 when the `input` block is absent.
    pub energy: f64,
    pub sweep: Option<SweepGrid>,
    pub simulate: Option<SimulateSpec>,
    pub block: Option<BlockSpec>,
    pub output: Option<PathBuf>,
    pub seed: u64,
    pub quad_order: Option<usize>,
}

/// Points of an analysis sweep. SNR points keep E_s fixed and set the
/// channel noise to E_s/snr; energy points keep the channel as given.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepGrid {
    Snr(Vec<f64>),
    Energy(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RateGrid {
    Nats(Vec<f64>),
    /// Multiples of the analytic GMI of the chosen front end.
    GmiFractions(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSpec {
    pub rates: RateGrid,
    pub block_lengths: Vec<usize>,
    pub trials: u64,
    pub front_end: FrontEndChoice,
    pub decoder: Decoder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub impulse_response: Vec<f64>,
    pub noise_var: f64,
    pub block_lengths: Vec<usize>,
}

impl RunConfig {
    pub fn quad(&self) -> QuadConfig {
        self.quad_order.map(QuadConfig::with_order).unwrap_or_default()
    }

    pub fn require_channel(&self) -> Result<&ChannelModel, CliError> {
        self.channel.as_ref().ok_or_else(|| CliError::Config(vec!["channel: required for this command".into()]))
    }
}

pub fn check_quad_order(order: usize) -> Result<(), String> {
    if (1..=MAX_ORDER).contains(&order) {
        Ok(())
    } else {
        Err(format!("quad_order: {order} not in 1..={MAX_ORDER}"))
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let root: Value = serde_json::from_str(text).map_err(|e| CliError::Config(vec![format!("invalid JSON: {e}")]))?;
    let mut c = Checker::default();
    let cfg = c.run_config(&root);
    match cfg {
        Some(cfg) if c.errors.is_empty() => Ok(cfg),
        _ => Err(CliError::Config(c.errors)),
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

#[derive(Default)]
struct Checker {
    errors: Vec<String>,
}

impl Checker {
    fn fail(&mut self, path: &str, msg: impl Display) {
        self.errors.push(format!("{path}: {msg}"));
    }

    fn check(&mut self, ok: bool, path: &str, msg: impl Display) {
        if !ok {
            self.fail(path, msg);
        }
    }

    fn object<'v>(&mut self, v: &'v Value, path: &str, allowed: &[&str]) -> Option<&'v Map<String, Value>> {
        let Some(map) = v.as_object() else {
            self.fail(if path.is_empty() { "<root>" } else { path }, "expected an object");
            return None;
        };
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                self.fail(&join(path, key), "unknown key");
            }
        }
        Some(map)
    }

    fn required<'v>(&mut self, map: &'v Map<String, Value>, path: &str, key: &str) -> Option<&'v Value> {
        let v = map.get(key);
        if v.is_none() {
            self.fail(&join(path, key), "missing");
        }
        v
    }

    fn number(&mut self, v: &Value, path: &str) -> Option<f64> {
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.fail(path, format!("expected a number, got {v}"));
                None
            }
        }
    }

    fn integer(&mut self, v: &Value, path: &str) -> Option<u64> {
        let n = v.as_u64();
        if n.is_none() {
            self.fail(path, format!("expected a non-negative integer, got {v}"));
        }
        n
    }

    fn string<'v>(&mut self, v: &'v Value, path: &str) -> Option<&'v str> {
        let s = v.as_str();
        if s.is_none() {
            self.fail(path, format!("expected a string, got {v}"));
        }
        s
    }

    fn list<T>(&mut self, v: &Value, path: &str, mut item: impl FnMut(&mut Self, &Value, &str) -> Option<T>) -> Option<Vec<T>> {
        let Some(items) = v.as_array() else {
            self.fail(path, "expected an array");
            return None;
        };
        if items.is_empty() {
            self.fail(path, "must not be empty");
            return None;
        }
        let mut out = Vec::with_capacity(items.len());
        let mut ok = true;
        for (i, x) in items.iter().enumerate() {
            match item(self, x, &format!("{path}[{i}]")) {
                Some(x) => out.push(x),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn positive(&mut self, v: &Value, path: &str) -> Option<f64> {
        let x = self.number(v, path)?;
        self.check(x > 0.0, path, format!("must be > 0, got {x}"));
        (x > 0.0).then_some(x)
    }

    fn run_config(&mut self, root: &Value) -> Option<RunConfig> {
        let map = self.object(
            root,
            "",
            &["channel", "input", "sweep", "simulate", "block", "output", "seed", "quad_order"],
        )?;
        let channel = map.get("channel").map(|v| self.channel(v, "channel"));
        let energy = match map.get("input") {
            Some(v) => self.input(v),
            None => Some(1.0),
        };
        let sweep = map.get("sweep").map(|v| self.sweep(v));
        let simulate = map.get("simulate").map(|v| self.simulate(v));
        let block = map.get("block").map(|v| self.block(v));
        let output = map.get("output").map(|v| self.string(v, "output").map(PathBuf::from));
        let seed = match map.get("seed") {
            Some(v) => self.integer(v, "seed"),
            None => Some(0),
        };
        let quad_order = match map.get("quad_order") {
            Some(v) => self.integer(v, "quad_order").and_then(|o| match check_quad_order(o as usize) {
                Ok(()) => Some(Some(o as usize)),
                Err(e) => {
                    self.errors.push(e);
                    None
                }
            }),
            None => Some(None),
        };
        if let Some(Some(SimulateSpec { rates: RateGrid::Nats(rates), block_lengths, decoder, .. })) = &simulate {
            self.message_budget(rates, block_lengths, *decoder);
        }
        Some(RunConfig {
            channel: transpose(channel)?,
            energy: energy?,
            sweep: transpose(sweep)?,
            simulate: transpose(simulate)?,
            block: transpose(block)?,
            output: transpose(output)?,
            seed: seed?,
            quad_order: quad_order?,
        })
    }

    fn input(&mut self, v: &Value) -> Option<f64> {
        let map = self.object(v, "input", &["energy"])?;
        let e = self.required(map, "input", "energy")?;
        self.positive(e, "input.energy")
    }

    fn channel(&mut self, v: &Value, path: &str) -> Option<ChannelModel> {
        let map = v.as_object();
        let kind = match map.and_then(|m| m.get("kind")) {
            Some(k) => self.string(k, &join(path, "kind"))?,
            None => {
                self.object(v, path, &["kind"])?;
                self.fail(&join(path, "kind"), "missing");
                return None;
            }
        };
        let allowed: &[&str] = match kind {
            "awgn" | "sign_quantizer" => &["kind", "noise_var"],
            "hard_clip" => &["kind", "clip_level", "noise_var"],
            "uniform_quantizer" => &["kind", "bits", "step", "noise_var"],
            "nonlinearity" => &["kind", "shape", "level", "gain", "noise_var"],
            other => {
                self.fail(
                    &join(path, "kind"),
                    format!(
                        "unknown channel kind {other:?} (expected awgn, hard_clip, sign_quantizer, \
                         uniform_quantizer or nonlinearity)"
                    ),
                );
                return None;
            }
        };
        let map = self.object(v, path, allowed)?;
        let noise_var = self.required(map, path, "noise_var").and_then(|v| {
            let p = join(path, "noise_var");
            let x = self.number(v, &p)?;
            self.check(x >= 0.0, &p, format!("must be >= 0, got {x}"));
            (x >= 0.0).then_some(x)
        });
        let positive_field = |c: &mut Self, key: &str| {
            c.required(map, path, key).and_then(|v| c.positive(v, &join(path, key)))
        };
        match kind {
            "awgn" => Some(ChannelModel::Awgn { noise_var: noise_var? }),
            "sign_quantizer" => Some(ChannelModel::SignQuantizer { noise_var: noise_var? }),
            "hard_clip" => {
                let clip_level = positive_field(self, "clip_level");
                Some(ChannelModel::HardClip { clip_level: clip_level?, noise_var: noise_var? })
            }
            "uniform_quantizer" => {
                let bits = self.required(map, path, "bits").and_then(|v| {
                    let p = join(path, "bits");
                    let b = self.integer(v, &p)?;
                    let ok = (1..=MAX_QUANTIZER_BITS as u64).contains(&b);
                    self.check(ok, &p, format!("{b} not in 1..={MAX_QUANTIZER_BITS}"));
                    ok.then_some(b as u32)
                });
                let step = positive_field(self, "step");
                Some(ChannelModel::UniformQuantizer { bits: bits?, step: step?, noise_var: noise_var? })
            }
            _ => {
                let shape = self.required(map, path, "shape").and_then(|v| self.string(v, &join(path, "shape")));
                let shape = shape.and_then(|s| {
                    let needs: &[&str] = match s {
                        "identity" | "cubic" | "abs" => &[],
                        "clip" | "soft_limiter" => &["level"],
                        "tanh" => &["gain"],
                        other => {
                            self.fail(
                                &join(path, "shape"),
                                format!("unknown shape {other:?} (expected identity, clip, cubic, abs, soft_limiter or tanh)"),
                            );
                            return None;
                        }
                    };
                    for key in ["level", "gain"] {
                        if map.contains_key(key) && !needs.contains(&key) {
                            self.fail(&join(path, key), format!("not used by shape {s:?}"));
                        }
                    }
                    Some(match s {
                        "identity" => Nonlinearity::Identity,
                        "cubic" => Nonlinearity::Cubic,
                        "abs" => Nonlinearity::Abs,
                        "clip" => Nonlinearity::Clip { level: positive_field(self, "level")? },
                        "soft_limiter" => Nonlinearity::SoftLimiter { level: positive_field(self, "level")? },
                        _ => Nonlinearity::Tanh { gain: positive_field(self, "gain")? },
                    })
                });
                Some(ChannelModel::DeterministicNonlinearity { shape: shape?, noise_var: noise_var? })
            }
        }
    }

    fn sweep(&mut self, v: &Value) -> Option<SweepGrid> {
        let map = self.object(v, "sweep", &["snr", "energy"])?;
        match (map.get("snr"), map.get("energy")) {
            (Some(s), None) => self.list(s, "sweep.snr", Self::positive).map(SweepGrid::Snr),
            (None, Some(e)) => self.list(e, "sweep.energy", Self::positive).map(SweepGrid::Energy),
            _ => {
                self.fail("sweep", "exactly one of snr, energy is required");
                None
            }
        }
    }

    fn block_lengths(&mut self, map: &Map<String, Value>, path: &str, max: u64) -> Option<Vec<usize>> {
        let v = self.required(map, path, "block_lengths")?;
        self.list(v, &join(path, "block_lengths"), |c, x, p| {
            let n = c.integer(x, p)?;
            let ok = (1..=max).contains(&n);
            c.check(ok, p, format!("{n} not in 1..={max}"));
            ok.then_some(n as usize)
        })
    }

    fn simulate(&mut self, v: &Value) -> Option<SimulateSpec> {
        let path = "simulate";
        let map = self.object(v, path, &["rates_nats", "gmi_fractions", "block_lengths", "trials", "front_end", "decoder"])?;
        let rates = match (map.get("rates_nats"), map.get("gmi_fractions")) {
            (Some(r), None) => self.list(r, "simulate.rates_nats", Self::positive).map(RateGrid::Nats),
            (None, Some(f)) => self.list(f, "simulate.gmi_fractions", Self::positive).map(RateGrid::GmiFractions),
            _ => {
                self.fail(path, "exactly one of rates_nats, gmi_fractions is required");
                None
            }
        };
        let block_lengths = self.block_lengths(map, path, 1 << 20);
        let trials = self.required(map, path, "trials").and_then(|v| {
            let t = self.integer(v, "simulate.trials")?;
            self.check(t > 0, "simulate.trials", "must be positive");
            (t > 0).then_some(t)
        });
        let front_end = match map.get("front_end") {
            None => Some(FrontEndChoice::Canonical),
            Some(v) => match self.string(v, "simulate.front_end")? {
                "canonical" => Some(FrontEndChoice::Canonical),
                "identity" => Some(FrontEndChoice::Identity),
                other => {
                    self.fail("simulate.front_end", format!("unknown front end {other:?} (expected canonical or identity)"));
                    None
                }
            },
        };
        let decoder = match map.get("decoder") {
            None => Some(Decoder::Auto),
            Some(v) => match self.string(v, "simulate.decoder")? {
                "auto" => Some(Decoder::Auto),
                "exhaustive" => Some(Decoder::Exhaustive),
                "conditional" => Some(Decoder::Conditional),
                other => {
                    self.fail("simulate.decoder", format!("unknown decoder {other:?} (expected auto, exhaustive or conditional)"));
                    None
                }
            },
        };
        Some(SimulateSpec {
            rates: rates?,
            block_lengths: block_lengths?,
            trials: trials?,
            front_end: front_end?,
            decoder: decoder?,
        })
    }

    fn message_budget(&mut self, rates: &[f64], block_lengths: &[usize], decoder: Decoder) {
        for &r in rates {
            for &n in block_lengths {
                let ln_m = n as f64 * r;
                if ln_m > MAX_LN_MESSAGES {
                    self.fail("simulate", format!("rate {r} at n={n} gives ln M = {ln_m} above {MAX_LN_MESSAGES}"));
                } else if decoder == Decoder::Exhaustive && ln_m.exp().ceil() > EXHAUSTIVE_CAP as f64 {
                    self.fail(
                        "simulate.decoder",
                        format!("rate {r} at n={n} needs more than {EXHAUSTIVE_CAP} codewords for exhaustive decoding"),
                    );
                }
            }
        }
    }

    fn block(&mut self, v: &Value) -> Option<BlockSpec> {
        let path = "block";
        let map = self.object(v, path, &["impulse_response", "noise_var", "block_lengths"])?;
        let h = self.required(map, path, "impulse_response").and_then(|v| {
            let h = self.list(v, "block.impulse_response", Self::number)?;
            let ok = h.iter().any(|&t| t != 0.0);
            self.check(ok, "block.impulse_response", "must have a nonzero tap");
            ok.then_some(h)
        });
        let noise_var = self.required(map, path, "noise_var").and_then(|v| self.positive(v, "block.noise_var"));
        let block_lengths = self.block_lengths(map, path, MAX_BLOCK_LENGTH as u64);
        Some(BlockSpec { impulse_response: h?, noise_var: noise_var?, block_lengths: block_lengths? })
    }
}

fn transpose<T>(v: Option<Option<T>>) -> Option<Option<T>> {
    match v {
        None => Some(None),
        Some(None) => None,
        Some(Some(x)) => Some(Some(x)),
    }
}

/// Compact channel label for tables, e.g. `hard_clip(clip_level=1,noise_var=0.25)`.
pub fn describe(ch: &ChannelModel) -> String {
    match *ch {
        ChannelModel::Awgn { noise_var } => format!("awgn(noise_var={noise_var})"),
        ChannelModel::HardClip { clip_level, noise_var } => format!("hard_clip(clip_level={clip_level},noise_var={noise_var})"),
        ChannelModel::SignQuantizer { noise_var } => format!("sign_quantizer(noise_var={noise_var})"),
        ChannelModel::UniformQuantizer { bits, step, noise_var } => {
            format!("uniform_quantizer(bits={bits},step={step},noise_var={noise_var})")
        }
        ChannelModel::DeterministicNonlinearity { shape, noise_var } => {
            let shape = match shape {
                Nonlinearity::Identity => "identity".to_string(),
                Nonlinearity::Cubic => "cubic".to_string(),
                Nonlinearity::Abs => "abs".to_string(),
                Nonlinearity::Clip { level } => format!("clip,level={level}"),
                Nonlinearity::SoftLimiter { level } => format!("soft_limiter,level={level}"),
                Nonlinearity::Tanh { gain } => format!("tanh,gain={gain}"),
            };
            format!("nonlinearity({shape},noise_var={noise_var})")
        }
    }
}
