//! JSON experiment configs. Unknown keys are rejected and every error names
//! the key it came from.

use std::path::Path;

use serde::Deserialize;
use serde::de::DeserializeOwned;

use nllr_core::cone::{ConeKind, ConeSpec};
use nllr_core::harness::{Algorithm, ExperimentSpec, InitKind, SolverSettings, Sweep};
use nllr_core::models::{mu_constant, GradientRoute, LinkKind};
use nllr_core::tensor::read_tensor;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub link: String,
    #[serde(default)]
    pub sigma: f64,
    /// Overrides the link's default gradient.
    pub route: Option<String>,
    /// Single-index constant; defaults to the link's computed value.
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StructureConfig {
    Unconstrained { dims: Vec<usize> },
    Sparse { n: usize, k: usize },
    LowRankMatrix { dims: [usize; 2], rank: usize },
    Tucker { dims: [usize; 3], rank: [usize; 3] },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepConfig {
    M(Vec<usize>),
    Sigma(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitConfig {
    Spectral,
    TensorSpectral,
    Perturbed { rho: f64 },
    /// Tensor file, relative to the config file.
    Provided { path: String },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmName {
    Pgd,
    Rgd,
    Fgd,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverJson {
    pub step: Option<f64>,
    pub max_iters: usize,
    pub normalize: bool,
    pub tol: f64,
    pub record_every: usize,
    pub skip_rebalance: bool,
}

impl Default for SolverJson {
    fn default() -> Self {
        let d = SolverSettings::default();
        SolverJson {
            step: d.step,
            max_iters: d.max_iters,
            normalize: d.normalize,
            tol: d.tol,
            record_every: d.record_every,
            skip_rebalance: d.skip_rebalance,
        }
    }
}

/// Config for `nllr run`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub structure: StructureConfig,
    /// Sample size; may be omitted when `sweep.m` is given.
    pub m: Option<usize>,
    pub sweep: Option<SweepConfig>,
    pub trials: usize,
    pub base_seed: u64,
    pub algorithm: AlgorithmName,
    pub init: InitConfig,
    #[serde(default)]
    pub solver: SolverJson,
}

/// Config for `nllr probe`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub model: ModelConfig,
    pub structure: StructureConfig,
    #[serde(default)]
    pub m: usize,
    pub base_seed: u64,
    /// Defaults to the oracle's canonical step.
    pub eta: Option<f64>,
    pub num_test_points: usize,
    pub radius: f64,
}

fn key_err(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {msg}"))
}

/// Byte offset of a 1-based (line, column) position.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let parsed: Result<T, _> = serde_path_to_error::deserialize(&mut de);
    let value = parsed.map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        match inner.classify() {
            serde_json::error::Category::Syntax | serde_json::error::Category::Eof => {
                let offset = byte_offset(text, inner.line(), inner.column());
                CliError::Config(format!("malformed JSON at byte {offset}: {inner}"))
            }
            _ => key_err(&path, inner),
        }
    })?;
    // trailing garbage is rejected by the deserializer's end check
    de.end().map_err(|e| {
        let offset = byte_offset(text, e.line(), e.column());
        CliError::Config(format!("malformed JSON at byte {offset}: {e}"))
    })?;
    Ok(value)
}

pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_json(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Link by its snake_case name. `sigma` is the additive noise level where
/// the link has one.
pub fn link_from_name(name: &str, sigma: f64) -> Option<LinkKind> {
    Some(match name {
        "identity" => LinkKind::Identity { sigma },
        "abs" => LinkKind::Abs { sigma },
        "sign" => LinkKind::Sign,
        "logistic" => LinkKind::Logistic,
        "probit" => LinkKind::Probit,
        "poisson" => LinkKind::Poisson,
        "truncated_unit" => LinkKind::TruncatedUnit,
        "centered_sigmoid" => LinkKind::CenteredSigmoid,
        "pca_additive" => LinkKind::PcaAdditive { sigma },
        _ => return None,
    })
}

impl ModelConfig {
    pub fn link(&self) -> Result<LinkKind, CliError> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(key_err("model.sigma", format!("{} must be finite and non-negative", self.sigma)));
        }
        let link = link_from_name(&self.link, self.sigma)
            .ok_or_else(|| key_err("model.link", format!("unknown link `{}`", self.link)))?;
        if self.sigma != 0.0 && !matches!(link, LinkKind::Identity { .. } | LinkKind::Abs { .. } | LinkKind::PcaAdditive { .. }) {
            return Err(key_err("model.sigma", format!("link `{}` has no noise level", self.link)));
        }
        Ok(link)
    }

    pub fn route(&self, link: &LinkKind) -> Result<Option<GradientRoute>, CliError> {
        let Some(name) = &self.route else {
            if self.mu.is_some() {
                return Err(key_err("model.mu", "only used with route `single_index`"));
            }
            return Ok(None);
        };
        if self.mu.is_some() && name != "single_index" {
            return Err(key_err("model.mu", "only used with route `single_index`"));
        }
        let route = match name.as_str() {
            "least_squares" => GradientRoute::LeastSquares,
            "glm" => GradientRoute::Glm,
            "amplitude" => GradientRoute::Amplitude,
            "one_bit" => GradientRoute::OneBit,
            "single_index" => {
                let mu = match self.mu {
                    Some(mu) => mu,
                    None => mu_constant(link).map_err(|e| key_err("model.mu", e))?,
                };
                if !(mu > 0.0) {
                    return Err(key_err("model.mu", format!("{mu} must be positive")));
                }
                GradientRoute::SingleIndex { mu }
            }
            other => return Err(key_err("model.route", format!("unknown route `{other}`"))),
        };
        Ok(Some(route))
    }
}

impl StructureConfig {
    pub fn cone(&self) -> Result<ConeSpec, CliError> {
        let cone = match self {
            StructureConfig::Unconstrained { dims } => {
                if dims.is_empty() || dims.len() > 3 {
                    return Err(key_err("structure.dims", "needs one to three entries"));
                }
                let mut d = [1usize; 3];
                d[..dims.len()].copy_from_slice(dims);
                ConeSpec::new(ConeKind::Unconstrained, d)
            }
            StructureConfig::Sparse { n, k } => ConeSpec::vector(*n, ConeKind::Sparse(*k)),
            StructureConfig::LowRankMatrix { dims, rank } => ConeSpec::low_rank_matrix(dims[0], dims[1], *rank),
            StructureConfig::Tucker { dims, rank } => ConeSpec::tucker(*dims, *rank),
        };
        cone.map_err(|e| key_err("structure", e))
    }
}

impl RunConfig {
    /// Resolves the config into a validated experiment; `base_dir` anchors
    /// relative tensor paths.
    pub fn to_spec(&self, base_dir: &Path) -> Result<ExperimentSpec, CliError> {
        let link = self.model.link()?;
        let route = self.model.route(&link)?;
        let structure = self.structure.cone()?;
        let pca = matches!(link, LinkKind::PcaAdditive { .. });
        let m = match (self.m, &self.sweep) {
            (Some(m), _) => m,
            (None, Some(SweepConfig::M(ms))) => ms.first().copied().unwrap_or(0),
            (None, _) if pca => 0,
            (None, _) => return Err(key_err("m", "missing (required unless `sweep.m` is given)")),
        };
        let sweep = self.sweep.as_ref().map(|s| match s {
            SweepConfig::M(v) => Sweep::M(v.clone()),
            SweepConfig::Sigma(v) => Sweep::Sigma(v.clone()),
        });
        let algorithm = match self.algorithm {
            AlgorithmName::Pgd => Algorithm::Pgd,
            AlgorithmName::Rgd => Algorithm::Rgd,
            AlgorithmName::Fgd => Algorithm::Fgd,
        };
        let init = match &self.init {
            InitConfig::Spectral => InitKind::Spectral,
            InitConfig::TensorSpectral => InitKind::TensorSpectral,
            InitConfig::Perturbed { rho } => InitKind::Perturbed(*rho),
            InitConfig::Provided { path } => {
                let p = base_dir.join(path);
                InitKind::Provided(read_tensor(&p).map_err(|e| CliError::input(Some(&p), e))?)
            }
        };
        let s = &self.solver;
        if let Some(step) = s.step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(key_err("solver.step", format!("{step} must be positive")));
            }
        }
        if !(s.tol >= 0.0) {
            return Err(key_err("solver.tol", "must be non-negative"));
        }
        if s.record_every == 0 {
            return Err(key_err("solver.record_every", "must be at least 1"));
        }
        let spec = ExperimentSpec {
            link,
            route,
            structure,
            m,
            sweep,
            trials: self.trials,
            base_seed: self.base_seed,
            algorithm,
            init,
            solver: SolverSettings {
                step: s.step,
                max_iters: s.max_iters,
                normalize: s.normalize,
                tol: s.tol,
                record_every: s.record_every,
                skip_rebalance: s.skip_rebalance,
            },
        };
        spec.validate().map_err(|e| CliError::Config(format!("invalid experiment: {e}")))?;
        Ok(spec)
    }
}
