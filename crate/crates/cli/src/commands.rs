use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nllr_core::cone::ConeSpec;
use nllr_core::harness::{raic_probe, random_tucker_truth, run_experiment, AggregateResult};
use nllr_core::models::{
    default_route, generate_observations, make_oracle, pca_observation, Design, GradientOracle, GradientRoute,
    LinkKind,
};
use nllr_core::random::{rng_from_seed, TrialRng};
use nllr_core::solvers::{rgd, Metric, Reference, SolverConfig};
use nllr_core::tensor::{read_tensor, thosvd, write_tensor, Tensor3};

use crate::config::{link_from_name, read_config, ProbeConfig, RunConfig, StructureConfig};
use crate::error::CliError;
use crate::output::{probe_csv, summary_csv, trajectory_csv};

pub const THREADS_ENV: &str = "NLLR_THREADS";

/// Runs `f` on a pool sized by `NLLR_THREADS`, or on the global pool when
/// the variable is unset.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(f()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV}={raw:?} is not a positive integer")))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build a {n}-thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn config_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub config: PathBuf,
    /// Directory receiving `trajectory.csv` and `summary.csv`.
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub timing: bool,
}

#[derive(Debug)]
pub struct RunOutput {
    pub result: AggregateResult,
    pub trajectory_path: PathBuf,
    pub summary_path: PathBuf,
}

pub fn cmd_run(args: &RunArgs) -> Result<RunOutput, CliError> {
    let cfg: RunConfig = read_config(&args.config)?;
    let mut spec = cfg.to_spec(config_dir(&args.config))?;
    if let Some(seed) = args.seed {
        spec.base_seed = seed;
    }
    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let result = with_pool(|| run_experiment(&spec))?.map_err(|e| CliError::Config(e.to_string()))?;
    let trajectory_path = args.out.join("trajectory.csv");
    let summary_path = args.out.join("summary.csv");
    write_file(&trajectory_path, &trajectory_csv(&result, args.timing))?;
    write_file(&summary_path, &summary_csv(&result))?;
    if result.all_failed() {
        let first = result
            .points
            .iter()
            .flat_map(|p| &p.records)
            .find_map(|r| r.failure.clone())
            .unwrap_or_default();
        let total: usize = result.points.iter().map(|p| p.trials).sum();
        return Err(CliError::Failed(format!("all {total} trials failed; first failure: {first}")));
    }
    Ok(RunOutput { result, trajectory_path, summary_path })
}

#[derive(Debug, Clone)]
pub struct ProbeArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

/// Samples `(‖U − X‖_F, residual)` pairs for a random Tucker truth and
/// writes them as CSV.
pub fn cmd_probe(args: &ProbeArgs) -> Result<Vec<(f64, f64)>, CliError> {
    let cfg: ProbeConfig = read_config(&args.config)?;
    let link = cfg.model.link()?;
    let route = cfg.model.route(&link)?;
    let StructureConfig::Tucker { dims, rank } = cfg.structure else {
        return Err(CliError::Config("`structure.kind`: probe needs a tucker structure".into()));
    };
    let cone = cfg.structure.cone()?;
    if (0..3).any(|j| 2 * rank[j] > dims[j]) {
        return Err(CliError::Config("`structure.rank`: probe needs 2·rank ≤ dims in every mode".into()));
    }
    if !(cfg.radius > 0.0 && cfg.radius.is_finite()) {
        return Err(CliError::Config(format!("`radius`: {} must be positive", cfg.radius)));
    }
    let mut rng = rng_from_seed(args.seed.unwrap_or(cfg.base_seed));
    let truth = random_tucker_truth(cone.dims, rank, &mut rng).map_err(|e| CliError::input(None, e))?;
    let oracle = build_oracle(&truth, link, route, cfg.m, &mut rng)?;
    let eta = match cfg.eta {
        Some(e) if !(e > 0.0 && e.is_finite()) => return Err(CliError::Config(format!("`eta`: {e} must be positive"))),
        Some(e) => e,
        None => oracle.step(),
    };
    let pairs = raic_probe(&oracle, &truth, rank, eta, cfg.num_test_points, cfg.radius, &mut rng)
        .map_err(CliError::solver)?;
    write_file(&args.out, &probe_csv(&pairs))?;
    Ok(pairs)
}

fn build_oracle(
    truth: &Tensor3,
    link: LinkKind,
    route: Option<GradientRoute>,
    m: usize,
    rng: &mut TrialRng,
) -> Result<GradientOracle, CliError> {
    if let LinkKind::PcaAdditive { sigma } = link {
        let y = pca_observation(truth, sigma, rng).map_err(|e| CliError::input(None, e))?;
        return Ok(GradientOracle::pca(y));
    }
    if m == 0 {
        return Err(CliError::Config("`m`: must be at least 1".into()));
    }
    let route = match route {
        Some(r) => r,
        None => default_route(&link).map_err(|e| CliError::Config(format!("`model.route`: {e}")))?,
    };
    let design = Design::gaussian(m, truth.dims, rng);
    let data = generate_observations(design, truth, link, rng).map_err(|e| CliError::input(None, e))?;
    make_oracle(Arc::new(data), route).map_err(|e| CliError::Config(e.to_string()))
}

#[derive(Debug, Clone)]
pub struct RecoverArgs {
    pub truth: PathBuf,
    pub init: PathBuf,
    pub link: String,
    pub sigma: f64,
    pub m: usize,
    pub rank: [usize; 3],
    pub iters: usize,
    pub step: Option<f64>,
    pub normalize: bool,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoverMetrics {
    pub final_error: f64,
    pub phaseless_error: f64,
    pub psnr: f64,
}

impl RecoverMetrics {
    pub fn line(&self) -> String {
        format!(
            "final_error={:.6e} phaseless_error={:.6e} psnr={:.4}",
            self.final_error, self.phaseless_error, self.psnr
        )
    }
}

/// `20·log10(peak/RMSE)` with `peak = max|truth|`, on the sign-aligned
/// reconstruction. RMSE is floored at `peak·ε` so an exact match stays
/// finite.
pub fn psnr(recon: &Tensor3, truth: &Tensor3) -> f64 {
    let peak = truth.max_abs();
    let d = Metric::Phaseless.distance(recon, truth);
    let rmse = (d * d / truth.len() as f64).sqrt().max(peak * f64::EPSILON);
    20.0 * (peak / rmse).log10()
}

/// Simulates measurements of a loaded tensor and recovers it with RGD from
/// a loaded initial guess.
pub fn cmd_recover(args: &RecoverArgs) -> Result<RecoverMetrics, CliError> {
    let truth = read_tensor(&args.truth).map_err(|e| CliError::input(Some(&args.truth), e))?;
    let init = read_tensor(&args.init).map_err(|e| CliError::input(Some(&args.init), e))?;
    if truth.dims != init.dims {
        return Err(CliError::Config(format!(
            "init dims {:?} do not match truth dims {:?}",
            init.dims, truth.dims
        )));
    }
    if !(args.sigma >= 0.0 && args.sigma.is_finite()) {
        return Err(CliError::Config(format!("--sigma {} must be non-negative", args.sigma)));
    }
    let link = link_from_name(&args.link, args.sigma)
        .ok_or_else(|| CliError::Config(format!("--link: unknown link `{}`", args.link)))?;
    let cone = ConeSpec::tucker(truth.dims, args.rank).map_err(|e| CliError::Config(format!("--rank: {e}")))?;
    let mut rng = rng_from_seed(args.seed);
    let oracle = build_oracle(&truth, link, None, args.m, &mut rng)?;
    // data-driven guesses are rarely of exact rank
    let (x0, _) = thosvd(&init, args.rank).map_err(|e| CliError::Config(format!("--rank: {e}")))?;
    let mut config = SolverConfig::new(cone, args.iters);
    config.step = args.step;
    config.normalize = args.normalize;
    let reference = Reference { truth: truth.clone(), metric: Metric::for_link(&link) };
    let traj = rgd(&oracle, &x0, args.rank, &config, Some(&reference)).map_err(CliError::solver)?;
    let recon = traj.final_iterate;
    write_tensor(&args.out, &recon).map_err(|e| CliError::input(Some(&args.out), e))?;
    Ok(RecoverMetrics {
        final_error: Metric::Frobenius.distance(&recon, &truth),
        phaseless_error: Metric::Phaseless.distance(&recon, &truth),
        psnr: psnr(&recon, &truth),
    })
}
