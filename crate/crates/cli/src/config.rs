//! Experiment configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use acsm_core::diffnet::Precision;
use acsm_core::pde::{PdeKind, PdeProblem};
use acsm_core::sampler::SamplerKind;
use acsm_core::trainer::{TrainConfig, DEFAULT_EPSILON_SCHEDULE};
use anyhow::{bail, Context, Result};
use serde::Deserialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    /// `kdv`, `cahn_hilliard`, `cahn_hilliard_case2` or `advection`.
    pub name: String,
    pub horizon: Option<f64>,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub speed: Option<f64>,
    pub lambda_ic: Option<f64>,
    pub lambda_res: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(default = "d_layers")]
    pub hidden_layers: usize,
    #[serde(default = "d_width")]
    pub hidden_width: usize,
    #[serde(default = "d_harmonics")]
    pub harmonics: usize,
    #[serde(default = "d_precision")]
    pub precision: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    #[serde(default = "d_kinds")]
    pub kinds: Vec<String>,
    #[serde(alias = "N_r")]
    pub n_r: usize,
    #[serde(alias = "N_t")]
    pub n_t: usize,
    #[serde(default = "d_resample")]
    pub resample_interval: usize,
    #[serde(default = "d_probes")]
    pub probes_per_slice: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerSection {
    #[serde(default = "d_schedule")]
    pub epsilon_schedule: Vec<f64>,
    #[serde(default = "d_total")]
    pub total_iterations: usize,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_log")]
    pub log_interval: usize,
    #[serde(default = "d_ic")]
    pub n_ic: usize,
    #[serde(default = "d_seeds")]
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    /// REFSOL file; relative paths resolve against the config file.
    pub path: Option<PathBuf>,
    #[serde(default = "d_ref_nx")]
    pub n_x: usize,
    #[serde(default = "d_ref_dt")]
    pub dt: f64,
    #[serde(default = "d_snap")]
    pub n_snap: usize,
    #[serde(default = "d_eval_nx")]
    pub eval_nx: usize,
}

impl Default for ReferenceSection {
    fn default() -> Self {
        Self {
            path: None,
            n_x: d_ref_nx(),
            dt: d_ref_dt(),
            n_snap: d_snap(),
            eval_nx: d_eval_nx(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, alias = "N_r")]
    pub n_r: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: ProblemSection,
    network: NetworkSection,
    sampler: SamplerSection,
    trainer: TrainerSection,
    #[serde(default)]
    reference: ReferenceSection,
    #[serde(default)]
    sweep: SweepSection,
    output: OutputSection,
}

/// A parsed configuration file together with its verbatim text.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub network: NetworkSection,
    pub sampler: SamplerSection,
    pub trainer: TrainerSection,
    pub reference: ReferenceSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
    pub source_text: String,
    pub base_dir: PathBuf,
    pub kinds: Vec<SamplerKind>,
    pub precision: Precision,
}

fn d_layers() -> usize {
    4
}
fn d_width() -> usize {
    128
}
fn d_harmonics() -> usize {
    10
}
fn d_precision() -> String {
    "f64".into()
}
fn d_kinds() -> Vec<String> {
    SamplerKind::ALL.iter().map(|k| k.as_str().to_string()).collect()
}
fn d_resample() -> usize {
    1000
}
fn d_probes() -> usize {
    64
}
fn d_schedule() -> Vec<f64> {
    DEFAULT_EPSILON_SCHEDULE.to_vec()
}
fn d_total() -> usize {
    100_000
}
fn d_lr() -> f64 {
    1e-3
}
fn d_log() -> usize {
    100
}
fn d_ic() -> usize {
    256
}
fn d_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3]
}
fn d_ref_nx() -> usize {
    512
}
fn d_ref_dt() -> f64 {
    1e-5
}
fn d_snap() -> usize {
    101
}
fn d_eval_nx() -> usize {
    256
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text)?;
        let kinds = raw
            .sampler
            .kinds
            .iter()
            .map(|k| k.parse::<SamplerKind>())
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if kinds.is_empty() {
            bail!("sampler.kinds is empty");
        }
        if raw.trainer.seeds.is_empty() {
            bail!("trainer.seeds is empty");
        }
        let precision: Precision = raw.network.precision.parse()?;
        let cfg = Self {
            problem: raw.problem,
            network: raw.network,
            sampler: raw.sampler,
            trainer: raw.trainer,
            reference: raw.reference,
            sweep: raw.sweep,
            output: raw.output,
            source_text: text.to_string(),
            base_dir: base_dir.to_path_buf(),
            kinds,
            precision,
        };
        cfg.train_config(cfg.kinds[0], cfg.trainer.seeds[0], cfg.sampler.n_r)?.validate()?;
        Ok(cfg)
    }

    /// First 16 hex digits of the SHA-256 of the config text.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.source_text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn pde_problem(&self) -> Result<PdeProblem> {
        let p = &self.problem;
        let mut problem = match p.name.as_str() {
            "kdv" => PdeProblem::kdv(),
            "cahn_hilliard" | "cahn_hilliard_case1" => PdeProblem::cahn_hilliard_case1(),
            "cahn_hilliard_case2" => PdeProblem::cahn_hilliard_case2(),
            "advection" => PdeProblem::advection(),
            other => bail!("unknown problem `{other}`"),
        };
        if let Some(h) = p.horizon {
            problem.horizon = h;
        }
        match &mut problem.kind {
            PdeKind::CahnHilliard { r1, r2 } => {
                *r1 = p.r1.unwrap_or(*r1);
                *r2 = p.r2.unwrap_or(*r2);
            }
            PdeKind::Kdv { lambda1, lambda2 } => {
                *lambda1 = p.lambda1.unwrap_or(*lambda1);
                *lambda2 = p.lambda2.unwrap_or(*lambda2);
            }
            PdeKind::Advection { speed } => *speed = p.speed.unwrap_or(*speed),
        }
        if let Some(v) = p.lambda_ic {
            problem.weights.ic = v;
        }
        if let Some(v) = p.lambda_res {
            problem.weights.res = v;
        }
        problem.validate()?;
        Ok(problem)
    }

    pub fn train_config(&self, sampler: SamplerKind, seed: u64, n_r: usize) -> Result<TrainConfig> {
        let base = TrainConfig::new(self.pde_problem()?);
        Ok(TrainConfig {
            hidden_layers: self.network.hidden_layers,
            hidden_width: self.network.hidden_width,
            harmonics: self.network.harmonics,
            n_r,
            n_t: self.sampler.n_t,
            epsilon_schedule: self.trainer.epsilon_schedule.clone(),
            total_iterations: self.trainer.total_iterations,
            resample_interval: self.sampler.resample_interval,
            sampler,
            seed,
            log_interval: self.trainer.log_interval,
            n_ic: self.trainer.n_ic,
            probes_per_slice: self.sampler.probes_per_slice,
            learning_rate: self.trainer.learning_rate,
            precision: self.precision,
            eval_nx: self.reference.eval_nx,
            eval_nt: self.reference.n_snap,
            ..base
        })
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output.dir)
    }

    pub fn reference_path(&self) -> Option<PathBuf> {
        self.reference.path.as_deref().map(|p| self.resolve(p))
    }
}
