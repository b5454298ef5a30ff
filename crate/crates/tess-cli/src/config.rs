//! Run configuration as a flat list of dotted keys. A config file holds one
//! `key = value` pair per line, `#` starts a comment, and unknown keys or
//! unparseable values fail with the line number. Settings resolve field by
//! field: built-in defaults, then the config file, then the TESS_SEED
//! environment variable, then command-line overrides.

use crate::error::{CliError, CliResult};
use tess_core::learning::{AdamParams, UpdateDirection};
use tess_core::lif::LifParams;
use tess_core::lsg::BasisKind;
use tess_core::traces::TraceParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    ToyDense,
    ToyConv,
    Vgg9Paper,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::ToyDense => "toy-dense",
            Preset::ToyConv => "toy-conv",
            Preset::Vgg9Paper => "vgg9-paper",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerKind {
    Plateau,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateMode {
    PerSample,
    PerStep,
}

/// Every tunable of a run, typed. The canonical text form lists all keys in
/// sorted order so identical configs serialize to identical bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub basis_head: BasisKind,
    pub basis_hidden: BasisKind,
    pub data_noise: f64,
    pub data_samples: usize,
    pub data_source: String,
    pub lif: LifParams,
    pub log_timing: bool,
    pub model_ch1: usize,
    pub model_ch2: usize,
    pub model_hidden: usize,
    pub model_preset: Preset,
    pub adam: AdamParams,
    pub optimizer_kind: OptimizerKind,
    pub optimizer_lr: f64,
    pub out_dir: String,
    pub scheduler_factor: f64,
    pub scheduler_kind: SchedulerKind,
    pub scheduler_patience: u32,
    pub trace: TraceParams,
    pub train_batch_size: usize,
    pub train_epochs: u32,
    pub train_seed: u64,
    pub train_threads: usize,
    pub update_direction: UpdateDirection,
    pub update_mode: UpdateMode,
    pub update_t_l: u32,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            basis_head: BasisKind::Identity,
            basis_hidden: BasisKind::SquareWave,
            data_noise: 0.05,
            data_samples: 400,
            data_source: String::from("synth:2x64x10"),
            lif: LifParams::default(),
            log_timing: false,
            model_ch1: 8,
            model_ch2: 16,
            model_hidden: 64,
            model_preset: Preset::ToyDense,
            adam: AdamParams::default(),
            optimizer_kind: OptimizerKind::Adam,
            optimizer_lr: 0.001,
            out_dir: String::from("out"),
            scheduler_factor: 0.5,
            scheduler_kind: SchedulerKind::Plateau,
            scheduler_patience: 5,
            trace: TraceParams::default(),
            train_batch_size: 16,
            train_epochs: 20,
            train_seed: 1,
            train_threads: 1,
            update_direction: UpdateDirection::Descent,
            update_mode: UpdateMode::PerSample,
            update_t_l: 0,
        }
    }
}

fn parse_f64(v: &str) -> Result<f64, String> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("expected a finite number, got '{v}'")),
    }
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got '{v}'")),
    }
}

fn parse_int<T: core::str::FromStr>(v: &str, what: &str) -> Result<T, String> {
    v.parse::<T>().map_err(|_| format!("expected {what}, got '{v}'"))
}

fn basis_name(b: BasisKind) -> &'static str {
    match b {
        BasisKind::SquareWave => "square-wave",
        BasisKind::Identity => "identity",
    }
}

fn parse_basis(v: &str) -> Result<BasisKind, String> {
    match v {
        "square-wave" => Ok(BasisKind::SquareWave),
        "identity" => Ok(BasisKind::Identity),
        _ => Err(format!("expected square-wave or identity, got '{v}'")),
    }
}

impl RunConfig {
    /// Sets one dotted key from its text value. The error is a bare message;
    /// callers add file and line context.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "basis.head" => self.basis_head = parse_basis(value)?,
            "basis.hidden" => self.basis_hidden = parse_basis(value)?,
            "data.noise" => self.data_noise = parse_f64(value)?,
            "data.samples" => self.data_samples = parse_int(value, "a sample count")?,
            "data.source" => self.data_source = String::from(value),
            "lif.gamma" => self.lif.gamma = parse_f64(value)?,
            "lif.psi_amplitude" => self.lif.psi_amplitude = parse_f64(value)?,
            "lif.v_th" => self.lif.v_th = parse_f64(value)?,
            "log.timing" => self.log_timing = parse_bool(value)?,
            "model.ch1" => self.model_ch1 = parse_int(value, "a channel count")?,
            "model.ch2" => self.model_ch2 = parse_int(value, "a channel count")?,
            "model.hidden" => self.model_hidden = parse_int(value, "a layer width")?,
            "model.preset" => {
                self.model_preset = match value {
                    "toy-dense" => Preset::ToyDense,
                    "toy-conv" => Preset::ToyConv,
                    "vgg9-paper" => Preset::Vgg9Paper,
                    _ => {
                        return Err(format!(
                            "expected toy-dense, toy-conv or vgg9-paper, got '{value}'"
                        ))
                    }
                }
            }
            "optimizer.beta1" => self.adam.beta1 = parse_f64(value)?,
            "optimizer.beta2" => self.adam.beta2 = parse_f64(value)?,
            "optimizer.epsilon" => self.adam.epsilon = parse_f64(value)?,
            "optimizer.kind" => {
                self.optimizer_kind = match value {
                    "adam" => OptimizerKind::Adam,
                    "sgd" => OptimizerKind::Sgd,
                    _ => return Err(format!("expected adam or sgd, got '{value}'")),
                }
            }
            "optimizer.lr" => self.optimizer_lr = parse_f64(value)?,
            "out.dir" => self.out_dir = String::from(value),
            "scheduler.factor" => self.scheduler_factor = parse_f64(value)?,
            "scheduler.kind" => {
                self.scheduler_kind = match value {
                    "plateau" => SchedulerKind::Plateau,
                    "fixed" => SchedulerKind::Fixed,
                    _ => return Err(format!("expected plateau or fixed, got '{value}'")),
                }
            }
            "scheduler.patience" => self.scheduler_patience = parse_int(value, "an epoch count")?,
            "trace.alpha_post" => self.trace.alpha_post = parse_f64(value)?,
            "trace.alpha_pre" => self.trace.alpha_pre = parse_f64(value)?,
            "trace.lambda_post" => self.trace.lambda_post = parse_f64(value)?,
            "trace.lambda_pre" => self.trace.lambda_pre = parse_f64(value)?,
            "train.batch_size" => self.train_batch_size = parse_int(value, "a batch size")?,
            "train.epochs" => self.train_epochs = parse_int(value, "an epoch count")?,
            "train.seed" => self.train_seed = parse_int(value, "an unsigned seed")?,
            "train.threads" => self.train_threads = parse_int(value, "a thread count")?,
            "update.direction" => {
                self.update_direction = match value {
                    "descent" => UpdateDirection::Descent,
                    "as-written" => UpdateDirection::AsWritten,
                    _ => return Err(format!("expected descent or as-written, got '{value}'")),
                }
            }
            "update.mode" => {
                self.update_mode = match value {
                    "per-sample" => UpdateMode::PerSample,
                    "per-step" => UpdateMode::PerStep,
                    _ => return Err(format!("expected per-sample or per-step, got '{value}'")),
                }
            }
            "update.t_l" => self.update_t_l = parse_int(value, "a step count")?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Applies a config file's text. Errors carry the file name and the
    /// 1-based line number.
    pub fn apply_file_text(&mut self, name: &str, text: &str) -> CliResult<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("{name}:{}: expected 'key = value'", idx + 1))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|msg| CliError::Config(format!("{name}:{}: {msg}", idx + 1)))?;
        }
        Ok(())
    }

    /// Applies the TESS_SEED environment variable when present.
    pub fn apply_seed_env(&mut self, var: Option<&str>) -> CliResult<()> {
        if let Some(v) = var {
            self.train_seed = v
                .trim()
                .parse::<u64>()
                .map_err(|_| CliError::Config(format!("TESS_SEED: expected an unsigned seed, got '{v}'")))?;
        }
        Ok(())
    }

    /// Applies `key=value` pairs given on the command line, in order.
    pub fn apply_overrides(&mut self, pairs: &[String]) -> CliResult<()> {
        for pair in pairs {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set {pair}: expected key=value")))?;
            self.set(key.trim(), value.trim())
                .map_err(|msg| CliError::Config(format!("--set {pair}: {msg}")))?;
        }
        Ok(())
    }

    /// The normalized text form: every key in sorted order, one per line.
    /// Parsing this text reproduces the config exactly.
    pub fn canonical(&self) -> String {
        let dir_name = match self.update_direction {
            UpdateDirection::Descent => "descent",
            UpdateDirection::AsWritten => "as-written",
        };
        let mode_name = match self.update_mode {
            UpdateMode::PerSample => "per-sample",
            UpdateMode::PerStep => "per-step",
        };
        let opt_name = match self.optimizer_kind {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        };
        let sched_name = match self.scheduler_kind {
            SchedulerKind::Plateau => "plateau",
            SchedulerKind::Fixed => "fixed",
        };
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        put("basis.head", basis_name(self.basis_head).into());
        put("basis.hidden", basis_name(self.basis_hidden).into());
        put("data.noise", format!("{}", self.data_noise));
        put("data.samples", format!("{}", self.data_samples));
        put("data.source", self.data_source.clone());
        put("lif.gamma", format!("{}", self.lif.gamma));
        put("lif.psi_amplitude", format!("{}", self.lif.psi_amplitude));
        put("lif.v_th", format!("{}", self.lif.v_th));
        put("log.timing", format!("{}", self.log_timing));
        put("model.ch1", format!("{}", self.model_ch1));
        put("model.ch2", format!("{}", self.model_ch2));
        put("model.hidden", format!("{}", self.model_hidden));
        put("model.preset", self.model_preset.name().into());
        put("optimizer.beta1", format!("{}", self.adam.beta1));
        put("optimizer.beta2", format!("{}", self.adam.beta2));
        put("optimizer.epsilon", format!("{}", self.adam.epsilon));
        put("optimizer.kind", opt_name.into());
        put("optimizer.lr", format!("{}", self.optimizer_lr));
        put("out.dir", self.out_dir.clone());
        put("scheduler.factor", format!("{}", self.scheduler_factor));
        put("scheduler.kind", sched_name.into());
        put("scheduler.patience", format!("{}", self.scheduler_patience));
        put("trace.alpha_post", format!("{}", self.trace.alpha_post));
        put("trace.alpha_pre", format!("{}", self.trace.alpha_pre));
        put("trace.lambda_post", format!("{}", self.trace.lambda_post));
        put("trace.lambda_pre", format!("{}", self.trace.lambda_pre));
        put("train.batch_size", format!("{}", self.train_batch_size));
        put("train.epochs", format!("{}", self.train_epochs));
        put("train.seed", format!("{}", self.train_seed));
        put("train.threads", format!("{}", self.train_threads));
        put("update.direction", dir_name.into());
        put("update.mode", mode_name.into());
        put("update.t_l", format!("{}", self.update_t_l));
        s
    }

    /// Rebuilds a config from canonical text, as stored in checkpoints.
    pub fn from_canonical(name: &str, text: &str) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::default();
        cfg.apply_file_text(name, text)?;
        Ok(cfg)
    }

    /// Cross-field checks that individual key parses cannot see.
    pub fn validate(&self) -> CliResult<()> {
        self.lif.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.trace.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.adam.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.optimizer_lr > 0.0) {
            return Err(CliError::Config("optimizer.lr must be positive".into()));
        }
        if self.scheduler_kind == SchedulerKind::Plateau {
            if self.scheduler_patience == 0 {
                return Err(CliError::Config("scheduler.patience must be positive".into()));
            }
            if !(self.scheduler_factor > 0.0 && self.scheduler_factor < 1.0) {
                return Err(CliError::Config("scheduler.factor must be in (0, 1)".into()));
            }
        }
        if !(0.0..=1.0).contains(&self.data_noise) {
            return Err(CliError::Config("data.noise must be in [0, 1]".into()));
        }
        if self.data_samples == 0 {
            return Err(CliError::Config("data.samples must be positive".into()));
        }
        if self.train_batch_size == 0 {
            return Err(CliError::Config("train.batch_size must be positive".into()));
        }
        if self.train_threads == 0 {
            return Err(CliError::Config("train.threads must be positive".into()));
        }
        if self.model_hidden == 0 || self.model_ch1 == 0 || self.model_ch2 == 0 {
            return Err(CliError::Config("model widths must be positive".into()));
        }
        if self.update_mode == UpdateMode::PerStep && self.train_batch_size != 1 {
            return Err(CliError::Config(
                "update.mode = per-step needs train.batch_size = 1".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_round_trips_exactly() {
        let mut cfg = RunConfig::default();
        cfg.set("trace.alpha_post", "-1").unwrap();
        cfg.set("optimizer.lr", "0.0005").unwrap();
        cfg.set("model.preset", "toy-conv").unwrap();
        cfg.set("data.source", "synthframe:4x1x16x16x6").unwrap();
        let text = cfg.canonical();
        let back = RunConfig::from_canonical("mem", &text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.canonical(), text);
    }

    #[test]
    fn every_default_key_survives_a_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.canonical();
        assert_eq!(text.lines().count(), 33);
        let back = RunConfig::from_canonical("mem", &text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn file_errors_carry_the_line_number() {
        let mut cfg = RunConfig::default();
        let err = cfg
            .apply_file_text("run.cfg", "train.epochs = 5\nbogus.key = 1\n")
            .unwrap_err();
        assert!(err.to_string().contains("run.cfg:2"), "{err}");
        assert!(err.to_string().contains("bogus.key"), "{err}");

        let err = cfg
            .apply_file_text("run.cfg", "# fine\ntrain.epochs = soon\n")
            .unwrap_err();
        assert!(err.to_string().contains("run.cfg:2"), "{err}");
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let mut cfg = RunConfig::default();
        cfg.apply_file_text("c", "\n# note\ntrain.seed = 9 # trailing\n\n").unwrap();
        assert_eq!(cfg.train_seed, 9);
    }

    #[test]
    fn later_layers_override_earlier_ones_field_by_field() {
        let mut cfg = RunConfig::default();
        cfg.apply_file_text("c", "train.seed = 2\ntrain.epochs = 7\n").unwrap();
        cfg.apply_seed_env(Some("33")).unwrap();
        cfg.apply_overrides(&[String::from("train.seed=44")]).unwrap();
        assert_eq!(cfg.train_seed, 44);
        assert_eq!(cfg.train_epochs, 7);
        assert_eq!(cfg.train_batch_size, RunConfig::default().train_batch_size);
    }

    #[test]
    fn env_seed_overrides_the_file_but_not_explicit_flags() {
        let mut cfg = RunConfig::default();
        cfg.apply_file_text("c", "train.seed = 2\n").unwrap();
        cfg.apply_seed_env(Some("33")).unwrap();
        assert_eq!(cfg.train_seed, 33);
        assert!(cfg.apply_seed_env(Some("a few")).is_err());
    }

    #[test]
    fn per_step_mode_requires_unit_batches() {
        let mut cfg = RunConfig::default();
        cfg.set("update.mode", "per-step").unwrap();
        assert!(cfg.validate().is_err());
        cfg.set("train.batch_size", "1").unwrap();
        cfg.validate().unwrap();
    }
}
