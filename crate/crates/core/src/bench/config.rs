//! Plain-text experiment configuration.
//!
//! ```text
//! # comment
//! [objective]
//! kind = moons_mlp
//! samples = 300
//!
//! [bench]
//! optimiser = adam
//! lr = 0.05
//! seeds = 0,1,2
//! ```
//!
//! Sections flatten into dotted keys (`objective.kind`). Every key must be
//! part of the schema below; unknown keys are rejected.
//!
//! | section | keys |
//! |---|---|
//! | `objective` | `kind` (quadratic, carrillo, moons_mlp, circles_mlp), `dim`, `center`, `shift`, `samples`, `noise`, `factor`, `data_seed`, `data_path`, `hidden`, `activation`, `val_fraction`, `test_fraction`, `init_scale`, `batch_size`, `batch_laps` |
//! | `sde` | `steps` (T), `mode` (standard, rescaled) |
//! | `mc` | `samples` (m), `runs` (paths per step) |
//! | `net` | `num_layers`, `width`, `frequencies`, `activation` |
//! | `pio` | `traj_batch`, `patience`, `anneal`, `val_trajectories`, `truncate` |
//! | `bench` | `optimiser`, `steps`, `seeds`, `out_dir`, `wall_clock`, `lr`, `grad_clip`, `beta1`, `beta2`, `sigma` |
//! | `sweep` | `runs`, `steps`, `seed`, and one range per swept hyperparameter |
//!
//! Sweep ranges: `log:LO:HI`, `uniform:LO:HI`, `int:LO:HI` (inclusive) or
//! `choice:A,B,C`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::driftnet::{DriftNetSpec, Variant};
use crate::targets::{
    make_circles, make_moons, model_objective, Activation, BatchMode, Carrillo, Dataset, LossKind, Objective,
    Quadratic, SplitFractions, TargetModel,
};
use crate::{Error, Result};

const OBJECTIVE_KEYS: &[&str] = &[
    "kind",
    "dim",
    "center",
    "shift",
    "samples",
    "noise",
    "factor",
    "data_seed",
    "data_path",
    "hidden",
    "activation",
    "val_fraction",
    "test_fraction",
    "init_scale",
    "batch_size",
    "batch_laps",
];
const SDE_KEYS: &[&str] = &["steps", "mode"];
const MC_KEYS: &[&str] = &["samples", "runs"];
const NET_KEYS: &[&str] = &["num_layers", "width", "frequencies", "activation"];
const PIO_KEYS: &[&str] = &["traj_batch", "patience", "anneal", "val_trajectories", "truncate"];
const BENCH_KEYS: &[&str] = &[
    "optimiser",
    "steps",
    "seeds",
    "out_dir",
    "wall_clock",
    "lr",
    "grad_clip",
    "beta1",
    "beta2",
    "sigma",
];
const SWEEP_KEYS: &[&str] = &["runs", "steps", "seed"];

/// Hyperparameter names understood by [`OptimiserSpec`].
pub const HYPER_KEYS: &[&str] = &[
    "lr",
    "grad_clip",
    "batch_size",
    "batch_laps",
    "beta1",
    "beta2",
    "sigma",
    "num_layers",
    "T",
    "traj_batch",
    "m",
];

/// Flat `section.key → value` map.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

fn known(key: &str) -> bool {
    let Some((section, name)) = key.split_once('.') else {
        return false;
    };
    let list = match section {
        "objective" => OBJECTIVE_KEYS,
        "sde" => SDE_KEYS,
        "mc" => MC_KEYS,
        "net" => NET_KEYS,
        "pio" => PIO_KEYS,
        "bench" => BENCH_KEYS,
        "sweep" => {
            return SWEEP_KEYS.contains(&name) || HYPER_KEYS.contains(&name);
        }
        _ => return false,
    };
    list.contains(&name)
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("line {}: unterminated section header", lineno + 1)))?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{line}'", lineno + 1)))?;
            let key = if section.is_empty() {
                k.trim().to_string()
            } else {
                format!("{section}.{}", k.trim())
            };
            if !known(&key) {
                return Err(Error::Config(format!("line {}: unknown key '{key}'", lineno + 1)));
            }
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets or overrides one dotted key.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !known(key) {
            return Err(Error::Config(format!("unknown key '{key}'")));
        }
        self.entries.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("cannot parse value '{v}' of key '{key}'")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.raw(key).map(|v| parse_list(key, v)).transpose()
    }
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| Error::Config(format!("cannot parse list item '{s}' of key '{key}'")))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OptimiserKind {
    Sgd,
    Adam,
    Adagrad,
    Langevin,
    Mcsfp,
    Pio,
    PioGrad,
}

impl OptimiserKind {
    pub const ALL: [OptimiserKind; 7] = [
        OptimiserKind::Sgd,
        OptimiserKind::Adam,
        OptimiserKind::Adagrad,
        OptimiserKind::Langevin,
        OptimiserKind::Mcsfp,
        OptimiserKind::Pio,
        OptimiserKind::PioGrad,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            OptimiserKind::Sgd => "sgd",
            OptimiserKind::Adam => "adam",
            OptimiserKind::Adagrad => "adagrad",
            OptimiserKind::Langevin => "langevin",
            OptimiserKind::Mcsfp => "mcsfp",
            OptimiserKind::Pio => "pio",
            OptimiserKind::PioGrad => "pio_grad",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown optimiser '{s}'")))
    }

    pub fn required(&self) -> &'static [&'static str] {
        match self {
            OptimiserKind::Sgd | OptimiserKind::Adam | OptimiserKind::Adagrad => &["lr"],
            OptimiserKind::Langevin | OptimiserKind::Pio | OptimiserKind::PioGrad => &["lr", "sigma"],
            OptimiserKind::Mcsfp => &["sigma"],
        }
    }

    pub fn allowed(&self) -> &'static [&'static str] {
        match self {
            OptimiserKind::Sgd | OptimiserKind::Adagrad => &["lr", "grad_clip", "batch_size", "batch_laps"],
            OptimiserKind::Adam => &["lr", "grad_clip", "batch_size", "batch_laps", "beta1", "beta2"],
            OptimiserKind::Langevin => &["lr", "sigma", "grad_clip", "batch_size", "batch_laps"],
            OptimiserKind::Mcsfp => &["sigma", "T", "m", "traj_batch", "batch_size", "batch_laps"],
            OptimiserKind::Pio | OptimiserKind::PioGrad => &[
                "lr",
                "sigma",
                "grad_clip",
                "batch_size",
                "batch_laps",
                "num_layers",
                "T",
                "traj_batch",
            ],
        }
    }

    /// Whether the optimiser anneals a Boltzmann temperature.
    pub fn is_diffusion(&self) -> bool {
        matches!(self, OptimiserKind::Mcsfp | OptimiserKind::Pio | OptimiserKind::PioGrad)
    }
}

/// Optimiser kind plus its hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimiserSpec {
    kind: OptimiserKind,
    hyper: BTreeMap<String, f64>,
}

/// Keys whose values must be positive integers.
const INTEGER_KEYS: &[&str] = &["batch_laps", "num_layers", "T", "traj_batch", "m"];

impl OptimiserSpec {
    pub fn new(kind: OptimiserKind, hyper: BTreeMap<String, f64>) -> Result<Self> {
        let spec = Self { kind, hyper };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_pairs(kind: OptimiserKind, pairs: &[(&str, f64)]) -> Result<Self> {
        Self::new(kind, pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }

    fn validate(&self) -> Result<()> {
        for key in self.hyper.keys() {
            if !self.kind.allowed().contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "hyperparameter '{key}' is not accepted by optimiser {} (allowed: {})",
                    self.kind.name(),
                    self.kind.allowed().join(", ")
                )));
            }
        }
        for key in self.kind.required() {
            if !self.hyper.contains_key(*key) {
                return Err(Error::Config(format!(
                    "optimiser {} requires hyperparameter '{key}'",
                    self.kind.name()
                )));
            }
        }
        for (k, v) in &self.hyper {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::Config(format!("hyperparameter '{k}' must be finite and >= 0, got {v}")));
            }
            if INTEGER_KEYS.contains(&k.as_str()) && (v.fract() != 0.0 || *v < 1.0) {
                return Err(Error::Config(format!("hyperparameter '{k}' must be a positive integer, got {v}")));
            }
        }
        if k_in(&self.hyper, "batch_size").is_some_and(|v| v.fract() != 0.0) {
            return Err(Error::Config("batch_size must be an integer (0 = full batch)".into()));
        }
        if let Some(s) = k_in(&self.hyper, "sigma") {
            let upper_ok = s <= 1.0 || self.kind == OptimiserKind::Langevin;
            if !(s > 0.0 || self.kind == OptimiserKind::Langevin) || !upper_ok {
                return Err(Error::Config(format!("sigma must lie in (0, 1] for {}, got {s}", self.kind.name())));
            }
        }
        for b in ["beta1", "beta2"] {
            if k_in(&self.hyper, b).is_some_and(|v| v >= 1.0) {
                return Err(Error::Config(format!("{b} must lie in [0, 1)")));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> OptimiserKind {
        self.kind
    }

    pub fn hyper(&self) -> &BTreeMap<String, f64> {
        &self.hyper
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        k_in(&self.hyper, key)
    }

    pub fn get_or(&self, key: &str, default: f64) -> f64 {
        self.get(key).unwrap_or(default)
    }

    /// Copy with one hyperparameter replaced (validated).
    pub fn with(&self, key: &str, value: f64) -> Result<Self> {
        let mut hyper = self.hyper.clone();
        hyper.insert(key.to_string(), value);
        Self::new(self.kind, hyper)
    }

    pub fn batch_mode(&self) -> BatchMode {
        match self.get("batch_size") {
            Some(size) if size >= 1.0 => BatchMode::Minibatch {
                size: size as usize,
                laps: self.get_or("batch_laps", 1.0) as usize,
            },
            _ => BatchMode::Full,
        }
    }

    /// `key=value` pairs in key order, for logs and leaderboards.
    pub fn describe(&self) -> String {
        let parts: Vec<String> = self.hyper.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{} [{}]", self.kind.name(), parts.join(", "))
    }
}

fn k_in(map: &BTreeMap<String, f64>, key: &str) -> Option<f64> {
    map.get(key).copied()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectiveKey {
    Quadratic,
    Carrillo,
    MoonsMlp,
    CirclesMlp,
}

impl ObjectiveKey {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(Self::Quadratic),
            "carrillo" => Ok(Self::Carrillo),
            "moons_mlp" => Ok(Self::MoonsMlp),
            "circles_mlp" => Ok(Self::CirclesMlp),
            other => Err(Error::Config(format!(
                "unknown objective '{other}' (expected quadratic, carrillo, moons_mlp or circles_mlp)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Quadratic => "quadratic",
            Self::Carrillo => "carrillo",
            Self::MoonsMlp => "moons_mlp",
            Self::CirclesMlp => "circles_mlp",
        }
    }

    pub fn is_dataset(&self) -> bool {
        matches!(self, Self::MoonsMlp | Self::CirclesMlp)
    }
}

/// Everything needed to rebuild an objective deterministically.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveSpec {
    pub key: ObjectiveKey,
    /// Dimension of analytic objectives.
    pub dim: usize,
    /// Quadratic centre (defaults to the origin).
    pub center: Option<Vec<f64>>,
    /// Carrillo shift (defaults to the origin).
    pub shift: Option<Vec<f64>>,
    pub samples: usize,
    pub noise: f64,
    pub factor: f64,
    pub data_seed: u64,
    pub data_path: Option<PathBuf>,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub fractions: SplitFractions,
    /// Half-width of the uniform box analytic baselines start from.
    pub init_scale: f64,
}

impl ObjectiveSpec {
    pub fn new(key: ObjectiveKey) -> Self {
        let (samples, noise, hidden) = match key {
            ObjectiveKey::CirclesMlp => (300, 0.05, vec![12]),
            _ => (300, 0.1, vec![10]),
        };
        Self {
            key,
            dim: 2,
            center: None,
            shift: None,
            samples,
            noise,
            factor: 0.5,
            data_seed: 0,
            data_path: None,
            hidden,
            activation: Activation::Tanh,
            fractions: SplitFractions::default(),
            init_scale: 3.0,
        }
    }

    pub fn from_config(cfg: &Config) -> Result<Self> {
        let key = ObjectiveKey::parse(cfg.raw("objective.kind").unwrap_or("quadratic"))?;
        let mut spec = Self::new(key);
        spec.dim = cfg.get_or("objective.dim", spec.dim)?;
        spec.center = cfg.get_list("objective.center")?;
        spec.shift = cfg.get_list("objective.shift")?;
        spec.samples = cfg.get_or("objective.samples", spec.samples)?;
        spec.noise = cfg.get_or("objective.noise", spec.noise)?;
        spec.factor = cfg.get_or("objective.factor", spec.factor)?;
        spec.data_seed = cfg.get_or("objective.data_seed", spec.data_seed)?;
        spec.data_path = cfg.raw("objective.data_path").map(PathBuf::from);
        if let Some(h) = cfg.get_list("objective.hidden")? {
            spec.hidden = h;
        }
        if let Some(a) = cfg.raw("objective.activation") {
            spec.activation = parse_activation(a)?;
        }
        let val = cfg.get_or("objective.val_fraction", spec.fractions.val)?;
        let test = cfg.get_or("objective.test_fraction", spec.fractions.test)?;
        spec.fractions = SplitFractions {
            train: 1.0 - val - test,
            val,
            test,
        };
        spec.init_scale = cfg.get_or("objective.init_scale", spec.init_scale)?;
        if let Some(c) = &spec.center {
            spec.dim = c.len();
        }
        if let Some(s) = &spec.shift {
            spec.dim = s.len();
        }
        Ok(spec)
    }

    fn model(&self) -> Result<TargetModel> {
        let mut widths = vec![2];
        widths.extend_from_slice(&self.hidden);
        widths.push(1);
        TargetModel::new(widths, self.activation)
    }

    pub fn dataset(&self) -> Result<Dataset> {
        if let Some(path) = &self.data_path {
            return Dataset::read_csv(path, self.fractions, self.data_seed);
        }
        let mut data = match self.key {
            ObjectiveKey::MoonsMlp => make_moons(self.samples, self.noise, self.data_seed)?,
            ObjectiveKey::CirclesMlp => make_circles(self.samples, self.noise, self.factor, self.data_seed)?,
            _ => return Err(Error::invalid(format!("objective {} has no dataset", self.key.name()))),
        };
        if self.fractions != SplitFractions::default() {
            data.resplit(self.fractions, self.data_seed)?;
        }
        Ok(data)
    }

    pub fn build(&self, batch_mode: BatchMode) -> Result<Objective> {
        match self.key {
            ObjectiveKey::Quadratic => {
                let c = self.center.clone().unwrap_or_else(|| vec![0.0; self.dim]);
                Objective::new(Quadratic::new(c)).with_batch_mode(batch_mode)
            }
            ObjectiveKey::Carrillo => {
                let s = self.shift.clone().unwrap_or_else(|| vec![0.0; self.dim]);
                Objective::new(Carrillo::new(s)?).with_batch_mode(batch_mode)
            }
            ObjectiveKey::MoonsMlp | ObjectiveKey::CirclesMlp => {
                model_objective(&self.model()?, self.dataset()?, LossKind::Bce, batch_mode)
            }
        }
    }

    /// Seeded starting point for gradient baselines: uniform in
    /// `[−init_scale, init_scale]ⁿ` for analytic objectives, Glorot-uniform
    /// weights and zero biases for classifiers.
    pub fn init_phi(&self, seed: u64) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1417_0000_0000_0000);
        if !self.key.is_dataset() {
            let dim = self.build(BatchMode::Full)?.dim();
            return Ok((0..dim).map(|_| rng.random_range(-self.init_scale..=self.init_scale)).collect());
        }
        let model = self.model()?;
        let mut phi = Vec::with_capacity(model.param_count());
        for w in model.widths().windows(2) {
            let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
            phi.extend((0..w[0] * w[1]).map(|_| rng.random_range(-limit..limit)));
            phi.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Ok(phi)
    }
}

fn parse_activation(s: &str) -> Result<Activation> {
    match s {
        "tanh" => Ok(Activation::Tanh),
        "relu" => Ok(Activation::Relu),
        other => Err(Error::Config(format!("unknown activation '{other}' (expected tanh or relu)"))),
    }
}

/// Structural settings that are not swept.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSettings {
    pub steps: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub wall_clock: bool,
    pub rescaled: bool,
    pub net_width: usize,
    pub net_frequencies: usize,
    pub net_activation: Activation,
    pub patience: usize,
    pub anneal: f64,
    pub val_trajectories: usize,
    pub truncate: Option<usize>,
    /// Write one final-state path per diffusion run.
    pub dump_trajectory: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            steps: 100,
            seeds: vec![0],
            out_dir: PathBuf::from("runs"),
            wall_clock: false,
            rescaled: false,
            net_width: 64,
            net_frequencies: crate::driftnet::DEFAULT_FREQUENCIES,
            net_activation: Activation::Relu,
            patience: 10,
            anneal: 0.5,
            val_trajectories: 64,
            truncate: None,
            dump_trajectory: false,
        }
    }
}

impl RunSettings {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let d = Self::default();
        let mode = cfg.raw("sde.mode").unwrap_or("standard");
        let rescaled = match mode {
            "standard" => false,
            "rescaled" => true,
            other => return Err(Error::Config(format!("unknown sde.mode '{other}'"))),
        };
        let truncate: usize = cfg.get_or("pio.truncate", 0)?;
        Ok(Self {
            steps: cfg.get_or("bench.steps", d.steps)?,
            seeds: cfg.get_list("bench.seeds")?.unwrap_or(d.seeds),
            out_dir: cfg.raw("bench.out_dir").map(PathBuf::from).unwrap_or(d.out_dir),
            wall_clock: cfg.get_or("bench.wall_clock", d.wall_clock)?,
            rescaled,
            net_width: cfg.get_or("net.width", d.net_width)?,
            net_frequencies: cfg.get_or("net.frequencies", d.net_frequencies)?,
            net_activation: match cfg.raw("net.activation") {
                Some(a) => parse_activation(a)?,
                None => d.net_activation,
            },
            patience: cfg.get_or("pio.patience", d.patience)?,
            anneal: cfg.get_or("pio.anneal", d.anneal)?,
            val_trajectories: cfg.get_or("pio.val_trajectories", d.val_trajectories)?,
            truncate: (truncate > 0).then_some(truncate),
            dump_trajectory: false,
        })
    }

    /// Drift network shape for an `n`-dimensional objective.
    pub fn net_spec(&self, n: usize, num_layers: usize, variant: Variant) -> DriftNetSpec {
        DriftNetSpec::new(n)
            .widths(vec![self.net_width; num_layers.max(1)])
            .frequencies(self.net_frequencies)
            .variant(variant)
            .activation(self.net_activation)
    }
}

/// Hyperparameter values from the structural sections, used when `[bench]`
/// does not name them.
fn hyper_from_sections(cfg: &Config, kind: OptimiserKind) -> Result<BTreeMap<String, f64>> {
    let mut hyper = BTreeMap::new();
    let sources: &[(&str, &str)] = &[
        ("batch_size", "objective.batch_size"),
        ("batch_laps", "objective.batch_laps"),
        ("T", "sde.steps"),
        ("m", "mc.samples"),
        ("num_layers", "net.num_layers"),
    ];
    for (name, key) in sources {
        if kind.allowed().contains(name) {
            if let Some(v) = cfg.get::<f64>(key)? {
                hyper.insert(name.to_string(), v);
            }
        }
    }
    let traj_key = if kind == OptimiserKind::Mcsfp { "mc.runs" } else { "pio.traj_batch" };
    if kind.allowed().contains(&"traj_batch") {
        if let Some(v) = cfg.get::<f64>(traj_key)? {
            hyper.insert("traj_batch".into(), v);
        }
    }
    for name in ["lr", "grad_clip", "beta1", "beta2", "sigma"] {
        if let Some(v) = cfg.get::<f64>(&format!("bench.{name}"))? {
            if !kind.allowed().contains(&name) {
                return Err(Error::Config(format!(
                    "bench.{name} is not a hyperparameter of optimiser {}",
                    kind.name()
                )));
            }
            hyper.insert(name.to_string(), v);
        }
    }
    Ok(hyper)
}

/// Parsed experiment: objective, optimiser and run settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub objective: ObjectiveSpec,
    pub optimiser: OptimiserSpec,
    pub settings: RunSettings,
}

impl ExperimentConfig {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let kind = OptimiserKind::parse(cfg.raw("bench.optimiser").unwrap_or("adam"))?;
        let optimiser = OptimiserSpec::new(kind, hyper_from_sections(cfg, kind)?)?;
        Ok(Self {
            objective: ObjectiveSpec::from_config(cfg)?,
            optimiser,
            settings: RunSettings::from_config(cfg)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParamRange {
    LogUniform(f64, f64),
    Uniform(f64, f64),
    /// Inclusive integer range.
    Int(i64, i64),
    Choice(Vec<f64>),
}

impl ParamRange {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad sweep range '{s}'"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let pair = |rest: &str| -> Result<(f64, f64)> {
            let (a, b) = rest.split_once(':').ok_or_else(bad)?;
            Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
        };
        let range = match kind.trim() {
            "log" => {
                let (a, b) = pair(rest)?;
                ParamRange::LogUniform(a, b)
            }
            "uniform" => {
                let (a, b) = pair(rest)?;
                ParamRange::Uniform(a, b)
            }
            "int" => {
                let (a, b) = pair(rest)?;
                if a.fract() != 0.0 || b.fract() != 0.0 {
                    return Err(bad());
                }
                ParamRange::Int(a as i64, b as i64)
            }
            "choice" => ParamRange::Choice(parse_list("sweep", rest)?),
            _ => return Err(bad()),
        };
        range.validate()?;
        Ok(range)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            ParamRange::LogUniform(a, b) => *a > 0.0 && a <= b,
            ParamRange::Uniform(a, b) => a <= b,
            ParamRange::Int(a, b) => a <= b,
            ParamRange::Choice(v) => !v.is_empty(),
        };
        if !ok {
            return Err(Error::Config(format!("empty or invalid sweep range {self:?}")));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            ParamRange::LogUniform(a, b) => (a.ln() + (b.ln() - a.ln()) * rng.random::<f64>()).exp(),
            ParamRange::Uniform(a, b) => a + (b - a) * rng.random::<f64>(),
            ParamRange::Int(a, b) => rng.random_range(*a..=*b) as f64,
            ParamRange::Choice(v) => v[rng.random_range(0..v.len())],
        }
    }
}

/// Random-search sweep definition.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub n_runs: usize,
    pub steps_per_run: usize,
    pub ranges: Vec<(String, ParamRange)>,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::Config("sweep needs runs >= 1".into()));
        }
        for (k, r) in &self.ranges {
            if !HYPER_KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("cannot sweep unknown hyperparameter '{k}'")));
            }
            r.validate()?;
        }
        Ok(())
    }

    pub fn from_config(cfg: &Config) -> Result<Self> {
        let mut ranges = Vec::new();
        for key in cfg.keys() {
            if let Some(name) = key.strip_prefix("sweep.") {
                if HYPER_KEYS.contains(&name) {
                    ranges.push((name.to_string(), ParamRange::parse(cfg.raw(key).unwrap())?));
                }
            }
        }
        let spec = Self {
            n_runs: cfg.get_or("sweep.runs", 16)?,
            steps_per_run: cfg.get_or("sweep.steps", 64)?,
            ranges,
            seed: cfg.get_or("sweep.seed", 0)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}
