//! Experiment configuration files (TOML).
//!
//! ```toml
//! protocol = "DL04_INCUM"        # DL04 | DL04_INCUM | MDI_DL04 | QMF
//! seeds = [1, 2, 3]
//! capacity_mode = "TwoBasis"     # or "ZBasisOnly"
//!
//! [channel]
//! length_km = 10.0
//! flip_prob_z = 0.01
//! flip_prob_x = 0.01
//! eve_gain_model = { collecting = {} }   # or "equal_reception"
//!
//! [eve]
//! strategy = "intercept_resend"
//! basis_policy = "random_zx"
//! fraction = 0.2
//!
//! [session]
//! n_photons = 20000
//! message_bits = 256
//!
//! [sweep]
//! variable = "length_km"         # length_km | flip_prob | eve_fraction
//! start = 0.0
//! stop = 50.0
//! steps = 6
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use qsdc_core::channel::ChannelParams;
use qsdc_core::protocols::{
    BasisPolicy, Dl04Config, EveStrategy, MdiConfig, DEFAULT_ABORT_THRESHOLD, DEFAULT_CHECK_BIT_FRACTION,
};
use qsdc_core::qmf::QmfSessionConfig;
use qsdc_core::security::CapacityMode;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "DL04")]
    Dl04,
    #[serde(rename = "DL04_INCUM")]
    Dl04Incum,
    #[serde(rename = "MDI_DL04")]
    MdiDl04,
    #[serde(rename = "QMF")]
    Qmf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    LengthKm,
    /// Sets both flip probabilities.
    FlipProb,
    /// Intercept-resend fraction; keeps the configured basis policy.
    EveFraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.start + step * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSpec {
    pub n_photons: usize,
    /// Random message length; if absent, 80% of the expected message slots
    /// (QMF: 1024 bits).
    pub message_bits: Option<usize>,
    pub check_fraction: f64,
    pub dber_abort_threshold: f64,
    pub qber_abort_threshold: f64,
    pub check_bit_fraction: f64,
    pub entangled_fraction: f64,
    pub charlie_honest: bool,
    pub record_rounds: bool,
}

impl Default for SessionSpec {
    fn default() -> Self {
        Self {
            n_photons: 10_000,
            message_bits: None,
            check_fraction: 0.5,
            dber_abort_threshold: DEFAULT_ABORT_THRESHOLD,
            qber_abort_threshold: DEFAULT_ABORT_THRESHOLD,
            check_bit_fraction: DEFAULT_CHECK_BIT_FRACTION,
            entangled_fraction: 0.5,
            charlie_honest: true,
            record_rounds: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub transcripts: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("qsdc-out"),
            transcripts: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub seeds: Vec<u64>,
    #[serde(default = "default_mode")]
    pub capacity_mode: CapacityMode,
    #[serde(default)]
    pub channel: ChannelParams,
    #[serde(default)]
    pub eve: EveStrategy,
    #[serde(default)]
    pub session: SessionSpec,
    #[serde(default)]
    pub qmf: QmfSessionConfig,
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_mode() -> CapacityMode {
    CapacityMode::TwoBasis
}

/// Everything one sweep point needs.
#[derive(Debug, Clone)]
pub struct PointSetup {
    pub index: usize,
    pub sweep_value: Option<f64>,
    pub channel: ChannelParams,
    pub eve: EveStrategy,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// `QSDC_SEEDS` (comma-separated) and `QSDC_OUT_DIR` replace the file's values.
    pub fn apply_env(&mut self) -> Result<(), CliError> {
        if let Ok(seeds) = std::env::var("QSDC_SEEDS") {
            self.seeds = parse_seeds(&seeds)?;
        }
        if let Ok(dir) = std::env::var("QSDC_OUT_DIR") {
            self.output.dir = PathBuf::from(dir);
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<PointSetup> {
        let Some(sweep) = &self.sweep else {
            return vec![PointSetup {
                index: 0,
                sweep_value: None,
                channel: self.channel,
                eve: self.eve,
            }];
        };
        sweep
            .values()
            .into_iter()
            .enumerate()
            .map(|(index, v)| {
                let mut channel = self.channel;
                let mut eve = self.eve;
                match sweep.variable {
                    SweepVariable::LengthKm => channel.length_km = v,
                    SweepVariable::FlipProb => {
                        channel.flip_prob_z = v;
                        channel.flip_prob_x = v;
                    }
                    SweepVariable::EveFraction => {
                        let basis_policy = match eve {
                            EveStrategy::InterceptResend { basis_policy, .. } => basis_policy,
                            EveStrategy::None => BasisPolicy::RandomZX,
                        };
                        eve = EveStrategy::InterceptResend {
                            basis_policy,
                            fraction: v,
                        };
                    }
                }
                PointSetup {
                    index,
                    sweep_value: Some(v),
                    channel,
                    eve,
                }
            })
            .collect()
    }

    pub fn dl04_config(&self, channel: ChannelParams) -> Dl04Config {
        let s = &self.session;
        let mut cfg = Dl04Config::new(s.n_photons, channel).with_incum(self.protocol == Protocol::Dl04Incum);
        cfg.check_fraction = s.check_fraction;
        cfg.dber_abort_threshold = s.dber_abort_threshold;
        cfg.qber_abort_threshold = s.qber_abort_threshold;
        cfg.check_bit_fraction = s.check_bit_fraction;
        cfg.capacity_mode = self.capacity_mode;
        cfg.record_rounds = s.record_rounds;
        cfg
    }

    pub fn mdi_config(&self, channel: ChannelParams) -> MdiConfig {
        let s = &self.session;
        let mut cfg = MdiConfig::new(s.n_photons, channel);
        cfg.entangled_fraction = s.entangled_fraction;
        cfg.dber_abort_threshold = s.dber_abort_threshold;
        cfg.qber_abort_threshold = s.qber_abort_threshold;
        cfg.check_bit_fraction = s.check_bit_fraction;
        cfg.capacity_mode = self.capacity_mode;
        cfg.record_rounds = s.record_rounds;
        cfg
    }

    pub fn qmf_config(&self, channel: ChannelParams) -> QmfSessionConfig {
        QmfSessionConfig {
            channel,
            ..self.qmf.clone()
        }
    }

    /// Message length for a point when none is configured: 80% of the
    /// expected number of message slots.
    pub fn message_len(&self, channel: &ChannelParams) -> usize {
        if let Some(n) = self.session.message_bits {
            return n;
        }
        let s = &self.session;
        let q = channel.reception_rate();
        let slots = match self.protocol {
            Protocol::Qmf => return 1024,
            Protocol::Dl04 | Protocol::Dl04Incum => s.n_photons as f64 * q * (1.0 - s.check_fraction),
            Protocol::MdiDl04 => s.n_photons as f64 * q * q * s.entangled_fraction,
        };
        (slots * (1.0 - s.check_bit_fraction) * 0.8).floor() as usize
    }

    /// Rejects anything a session would refuse, before any output is written.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if let Some(s) = &self.sweep {
            if s.steps == 0 || !s.start.is_finite() || !s.stop.is_finite() {
                return bad("sweep needs finite bounds and at least one step".into());
            }
        }
        for p in self.points() {
            let at = |e: &dyn std::fmt::Display| {
                CliError::Config(match p.sweep_value {
                    Some(v) => format!("sweep value {v}: {e}"),
                    None => e.to_string(),
                })
            };
            p.channel.validate().map_err(|e| at(&e))?;
            p.eve.validate().map_err(|e| at(&e))?;
            match self.protocol {
                Protocol::Dl04 | Protocol::Dl04Incum => self.dl04_config(p.channel).validate().map_err(|e| at(&e))?,
                Protocol::MdiDl04 => self.mdi_config(p.channel).validate().map_err(|e| at(&e))?,
                Protocol::Qmf => self.qmf_config(p.channel).validate().map_err(|e| at(&e))?,
            }
        }
        Ok(())
    }
}

pub fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| CliError::Config(format!("bad seed {s:?}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_values_include_both_ends() {
        let s = SweepSpec {
            variable: SweepVariable::LengthKm,
            start: 0.0,
            stop: 120.0,
            steps: 13,
        };
        let v = s.values();
        assert_eq!(v.len(), 13);
        assert_eq!(v[0], 0.0);
        assert!((v[12] - 120.0).abs() < 1e-12);
    }

    #[test]
    fn minimal_config_parses() {
        let cfg = ExperimentConfig::from_toml("protocol = \"DL04\"\nseeds = [7]\n").unwrap();
        assert_eq!(cfg.protocol, Protocol::Dl04);
        assert_eq!(cfg.points().len(), 1);
        cfg.validate().unwrap();
    }

    #[test]
    fn eve_fraction_sweep_builds_strategies() {
        let cfg = ExperimentConfig::from_toml(
            "protocol = \"DL04\"\nseeds = [1]\n[sweep]\nvariable = \"eve_fraction\"\nstart = 0.0\nstop = 1.0\nsteps = 3\n",
        )
        .unwrap();
        let p = cfg.points();
        assert!(matches!(p[2].eve, EveStrategy::InterceptResend { fraction, .. } if fraction == 1.0));
    }

    #[test]
    fn invalid_sweep_is_a_config_error() {
        let cfg = ExperimentConfig::from_toml(
            "protocol = \"DL04\"\nseeds = [1]\n[sweep]\nvariable = \"flip_prob\"\nstart = 0.0\nstop = 1.5\nsteps = 4\n",
        )
        .unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn seeds_from_text() {
        assert_eq!(parse_seeds("1, 2,3").unwrap(), vec![1, 2, 3]);
        assert!(parse_seeds("1,x").is_err());
    }
}
