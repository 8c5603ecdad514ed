use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::JointConfig;
use crate::cae::{CaeArch, Normalization};
use crate::error::{Error, Result};
use crate::metalearn::MetaConfig;
use crate::numerics::OutputActivation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    OmlCae,
    Cae,
    JointCae,
    QpskMle,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::OmlCae, Method::Cae, Method::JointCae, Method::QpskMle];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::OmlCae => "oml_cae",
            Method::Cae => "cae",
            Method::JointCae => "joint_cae",
            Method::QpskMle => "qpsk_mle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::config("methods", format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Paper,
    Desk,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Profile::Paper),
            "desk" => Ok(Profile::Desk),
            _ => Err(Error::config("profile", format!("expected `paper` or `desk`, got `{s}`"))),
        }
    }
}

/// Hidden width used by the desk profile. The full 256-wide network does
/// not fit the desk time budget on one core.
pub const DESK_HIDDEN: usize = 64;

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub profile: Profile,
    pub bits: u32,
    pub channel_uses: usize,
    pub snr_db: Vec<f64>,
    pub shots: Vec<usize>,
    pub n_sequences: usize,
    pub rho: f64,
    pub methods: Vec<Method>,
    pub n_eval: usize,
    pub seed: u64,
    pub hidden: usize,
    pub encoder_output: OutputActivation,
    pub normalization: Normalization,
    /// Leading sequences excluded from summary means.
    pub warmup: usize,
    /// Worker threads for grid cells; 0 picks the number of cores.
    pub threads: usize,
    pub out_dir: PathBuf,
    pub meta: MetaConfig,
    pub joint: JointConfig,
}

impl ExperimentConfig {
    pub fn for_profile(profile: Profile) -> Self {
        let meta = match profile {
            Profile::Paper => MetaConfig::paper(),
            Profile::Desk => MetaConfig::desk(),
        };
        let (n_sequences, hidden, n_eval) = match profile {
            Profile::Paper => (300, crate::cae::DEFAULT_HIDDEN, 10_000),
            Profile::Desk => (60, DESK_HIDDEN, 4000),
        };
        Self {
            profile,
            bits: 4,
            channel_uses: 2,
            snr_db: vec![5.0],
            shots: vec![1, 2, 3, 4, 5],
            n_sequences,
            rho: 0.99,
            methods: Method::ALL.to_vec(),
            n_eval,
            seed: 0,
            hidden,
            encoder_output: OutputActivation::Linear,
            normalization: Normalization::PerBatch,
            warmup: meta.buffer_capacity,
            threads: 0,
            out_dir: PathBuf::from("results"),
            meta,
            joint: JointConfig::default(),
        }
    }

    pub fn arch(&self) -> Result<CaeArch> {
        CaeArch::new(
            self.bits,
            self.channel_uses,
            self.hidden,
            self.encoder_output,
            self.normalization,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits == 0 || self.bits > 16 {
            return Err(Error::config("bits", "must be in 1..=16"));
        }
        if self.channel_uses == 0 {
            return Err(Error::config("channel_uses", "must be >= 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "at least one method is required"));
        }
        if self.methods.contains(&Method::QpskMle) && self.bits as usize != 2 * self.channel_uses {
            return Err(Error::config(
                "methods",
                format!(
                    "qpsk_mle needs bits = 2 * channel_uses, got bits {} and channel_uses {}",
                    self.bits, self.channel_uses
                ),
            ));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::config("snr_db", "needs at least one finite value"));
        }
        if self.shots.is_empty() || self.shots.contains(&0) {
            return Err(Error::config("shots", "needs at least one entry, all >= 1"));
        }
        if self.n_sequences == 0 {
            return Err(Error::config("n_sequences", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::config("rho", "must lie in [0, 1]"));
        }
        if self.n_eval == 0 {
            return Err(Error::config("n_eval", "must be >= 1"));
        }
        if self.hidden == 0 {
            return Err(Error::config("hidden", "must be >= 1"));
        }
        if self.encoder_output == OutputActivation::Softmax {
            return Err(Error::config("encoder_output", "softmax is not a valid encoder head"));
        }
        if self.warmup >= self.n_sequences {
            return Err(Error::config("warmup", "must be smaller than n_sequences"));
        }
        if self.joint.store_capacity == Some(0) {
            return Err(Error::config("joint.store_capacity", "must be >= 1"));
        }
        self.meta.validate().map_err(|e| match e {
            Error::Config { key, reason } => Error::config(format!("meta.{key}"), reason),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::ConfigParse(e.to_string()))
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaOverrides {
    pub inner_lr: Option<f64>,
    pub outer_lr: Option<f64>,
    pub adapt_steps: Option<usize>,
    pub outer_iters: Option<usize>,
    pub tasks_per_update: Option<usize>,
    pub lr_step_size: Option<u64>,
    pub lr_gamma: Option<f64>,
    pub finetune_iters: Option<usize>,
    pub buffer_capacity: Option<usize>,
    pub query_shots: Option<usize>,
    pub continue_schedule: Option<bool>,
    pub second_order: Option<bool>,
}

/// Settings as written in a config file or on the command line; unset
/// fields fall back to the profile defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub profile: Option<Profile>,
    pub bits: Option<u32>,
    pub channel_uses: Option<usize>,
    pub snr_db: Option<Vec<f64>>,
    pub shots: Option<Vec<usize>>,
    pub n_sequences: Option<usize>,
    pub rho: Option<f64>,
    pub methods: Option<Vec<Method>>,
    pub n_eval: Option<usize>,
    pub seed: Option<u64>,
    pub hidden: Option<usize>,
    pub encoder_output: Option<OutputActivation>,
    pub normalization: Option<Normalization>,
    pub warmup: Option<usize>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub meta: MetaOverrides,
    pub joint: Option<JointConfig>,
    /// Shorthand for `meta.buffer_capacity`.
    #[serde(skip)]
    pub buffer_size: Option<usize>,
}

impl ConfigOverrides {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Fields set in `other` win.
    pub fn merge(self, other: ConfigOverrides) -> ConfigOverrides {
        macro_rules! pick {
            ($($f:ident),*) => { ConfigOverrides { $($f: other.$f.or(self.$f),)* meta: MetaOverrides {
                inner_lr: other.meta.inner_lr.or(self.meta.inner_lr),
                outer_lr: other.meta.outer_lr.or(self.meta.outer_lr),
                adapt_steps: other.meta.adapt_steps.or(self.meta.adapt_steps),
                outer_iters: other.meta.outer_iters.or(self.meta.outer_iters),
                tasks_per_update: other.meta.tasks_per_update.or(self.meta.tasks_per_update),
                lr_step_size: other.meta.lr_step_size.or(self.meta.lr_step_size),
                lr_gamma: other.meta.lr_gamma.or(self.meta.lr_gamma),
                finetune_iters: other.meta.finetune_iters.or(self.meta.finetune_iters),
                buffer_capacity: other.meta.buffer_capacity.or(self.meta.buffer_capacity),
                query_shots: other.meta.query_shots.or(self.meta.query_shots),
                continue_schedule: other.meta.continue_schedule.or(self.meta.continue_schedule),
                second_order: other.meta.second_order.or(self.meta.second_order),
            } } };
        }
        pick!(
            profile,
            bits,
            channel_uses,
            snr_db,
            shots,
            n_sequences,
            rho,
            methods,
            n_eval,
            seed,
            hidden,
            encoder_output,
            normalization,
            warmup,
            threads,
            out_dir,
            joint,
            buffer_size
        )
    }

    /// Apply over the defaults of the selected profile and validate.
    pub fn resolve(self) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig::for_profile(self.profile.unwrap_or_default());
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(
            bits,
            channel_uses,
            snr_db,
            shots,
            n_sequences,
            rho,
            methods,
            n_eval,
            seed,
            hidden,
            encoder_output,
            normalization,
            threads,
            out_dir,
            joint
        );
        let m = &self.meta;
        macro_rules! set_meta {
            ($($f:ident),*) => { $(if let Some(v) = m.$f { c.meta.$f = v; })* };
        }
        set_meta!(
            inner_lr,
            outer_lr,
            adapt_steps,
            outer_iters,
            tasks_per_update,
            lr_step_size,
            lr_gamma,
            finetune_iters,
            buffer_capacity,
            continue_schedule,
            second_order
        );
        if m.query_shots.is_some() {
            c.meta.query_shots = m.query_shots;
        }
        if let Some(b) = self.buffer_size {
            c.meta.buffer_capacity = b;
        }
        c.warmup = self.warmup.unwrap_or(c.meta.buffer_capacity);
        c.validate()?;
        Ok(c)
    }
}

/// Parse a comma-separated list such as `1,2,5`.
pub fn parse_list<T: FromStr>(key: &str, text: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::config(key, format!("cannot parse `{s}`")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_paper_defaults() {
        let c = ConfigOverrides::from_toml_str("").unwrap().resolve().unwrap();
        assert_eq!(c.meta.inner_lr, 0.05);
        assert_eq!(c.meta.outer_lr, 1e-4);
        assert_eq!(c.meta.buffer_capacity, 15);
        assert_eq!(c.meta.outer_iters, 6000);
        assert_eq!(c.n_sequences, 300);
        assert_eq!(c.hidden, 256);
        assert_eq!(c.warmup, 15);
    }

    #[test]
    fn desk_profile() {
        let c = ConfigOverrides::from_toml_str("profile = \"desk\"").unwrap().resolve().unwrap();
        assert_eq!((c.n_sequences, c.meta.outer_iters, c.meta.finetune_iters), (60, 1500, 300));
        assert_eq!(c.n_eval, 4000);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            ConfigOverrides::from_toml_str("bitz = 4"),
            Err(Error::ConfigParse(_))
        ));
        assert!(ConfigOverrides::from_toml_str("[meta]\nalpha = 1.0").is_err());
    }

    #[test]
    fn later_layer_wins() {
        let file = ConfigOverrides::from_toml_str("bits = 6\nchannel_uses = 3\n[meta]\nouter_iters = 10").unwrap();
        let cli = ConfigOverrides {
            bits: Some(4),
            channel_uses: Some(2),
            ..Default::default()
        };
        let c = file.merge(cli).resolve().unwrap();
        assert_eq!((c.bits, c.channel_uses, c.meta.outer_iters), (4, 2, 10));
    }

    #[test]
    fn qpsk_shape_error_names_key() {
        let o = ConfigOverrides {
            bits: Some(3),
            channel_uses: Some(2),
            methods: Some(vec![Method::QpskMle]),
            ..Default::default()
        };
        match o.resolve() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "methods"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn meta_errors_are_prefixed() {
        let o = ConfigOverrides::from_toml_str("[meta]\ntasks_per_update = 0").unwrap();
        match o.resolve() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "meta.tasks_per_update"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_list::<usize>("shots", "1,2, 3").unwrap(), vec![1, 2, 3]);
        assert!(parse_list::<usize>("shots", "1,x").is_err());
        assert_eq!(
            parse_list::<Method>("methods", "qpsk_mle,cae").unwrap(),
            vec![Method::QpskMle, Method::Cae]
        );
    }

    #[test]
    fn resolved_config_round_trips_as_toml() {
        let c = ExperimentConfig::for_profile(Profile::Desk);
        let text = c.to_toml().unwrap();
        let back = ConfigOverrides::from_toml_str(&text).unwrap().resolve().unwrap();
        assert_eq!(back, c);
    }
}
