//! Monte-Carlo experiments: ground truth, trials, aggregation, rate fits and
//! the empirical RAIC probe.

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::cone::{dual_norm_probe, project, sphere_normalize, ConeKind, ConeSpec};
use crate::error::{Error, Result};
use crate::init::{factorize_init, perturbed_init, tensor_spectral_init};
use crate::linalg::{thin_qr, Mat};
use crate::models::{
    default_route, generate_observations, make_oracle, pca_observation, Design, GradientOracle, GradientRoute,
    LinkKind,
};
use crate::random::{normal_mat, normal_tensor, normal_vec, rng_from_seed, unit_sphere_tensor, TrialRng};
use crate::solvers::{fgd, pgd, rgd, Metric, Reference, SolverConfig, Trajectory};
use crate::tensor::{mode_products, thosvd, Tensor3};

// ---------------------------------------------------------------------------
// Ground truth
// ---------------------------------------------------------------------------

/// `S ×_j U_j` with a normalized Gaussian core and orthonormal factors.
pub fn random_tucker_truth<R: Rng + ?Sized>(dims: [usize; 3], rank: [usize; 3], rng: &mut R) -> Result<Tensor3> {
    if (0..3).any(|j| rank[j] == 0 || rank[j] > dims[j]) {
        return Err(Error::RankOutOfRange(format!("rank {:?} for dims {:?}", rank, dims)));
    }
    let core = sphere_normalize(&normal_tensor(rng, rank))?;
    let f: Vec<Mat> = (0..3).map(|j| thin_qr(&normal_mat(rng, dims[j], rank[j])).0).collect();
    mode_products(&core, [&f[0], &f[1], &f[2]])
}

/// `UVᵀ/‖UVᵀ‖_F` with Gaussian `U`, `V`.
pub fn random_lowrank_matrix_truth<R: Rng + ?Sized>(n1: usize, n2: usize, r: usize, rng: &mut R) -> Result<Mat> {
    if r == 0 || r > n1.min(n2) {
        return Err(Error::RankOutOfRange(format!("rank {r} for {n1}x{n2}")));
    }
    let u = normal_mat(rng, n1, r);
    let v = normal_mat(rng, n2, r);
    let z = u.matmul_t(&v)?;
    Ok(z.scale(1.0 / z.fro_norm()))
}

/// Unit vector with a uniformly drawn support of size `k`.
pub fn random_sparse_truth<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Tensor3> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("sparsity {k} for length {n}")));
    }
    let support = rand::seq::index::sample(rng, n, k).into_vec();
    let values = normal_vec(rng, k);
    let mut x = vec![0.0; n];
    for (i, v) in support.into_iter().zip(values) {
        x[i] = v;
    }
    sphere_normalize(&Tensor3::vector(x))
}

fn random_truth(cone: &ConeSpec, rng: &mut TrialRng) -> Result<Tensor3> {
    let d = cone.dims;
    match cone.kind {
        ConeKind::TuckerTensor(r) => random_tucker_truth(d, r, rng),
        ConeKind::LowRankMatrix(r) => Ok(Tensor3::from_mat(&random_lowrank_matrix_truth(d[0], d[1], r, rng)?)),
        ConeKind::Sparse(k) => {
            let x = random_sparse_truth(d.iter().product(), k, rng)?;
            Tensor3::from_vec(d, x.data)
        }
        ConeKind::Unconstrained => Ok(unit_sphere_tensor(rng, d)),
    }
}

// ---------------------------------------------------------------------------
// Experiment spec
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Pgd,
    Rgd,
    Fgd,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitKind {
    /// Projection of `(1/m) Σ y_i A_i`.
    Spectral,
    /// U-statistic spectral method (Tucker cones).
    TensorSpectral,
    /// `normalize(project(ρX + (1−ρ)S))`.
    Perturbed(f64),
    Provided(Tensor3),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    M(Vec<usize>),
    Sigma(Vec<f64>),
}

/// Solver settings without the cone, which comes from the structure.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub step: Option<f64>,
    pub max_iters: usize,
    pub normalize: bool,
    pub tol: f64,
    pub record_every: usize,
    pub skip_rebalance: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { step: None, max_iters: 20, normalize: false, tol: 0.0, record_every: 1, skip_rebalance: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub link: LinkKind,
    /// `None` uses the link's default route.
    pub route: Option<GradientRoute>,
    pub structure: ConeSpec,
    pub m: usize,
    pub sweep: Option<Sweep>,
    pub trials: usize,
    pub base_seed: u64,
    pub algorithm: Algorithm,
    pub init: InitKind,
    pub solver: SolverSettings,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.trials >= 1_000_000 {
            return Err(Error::InvalidParameter("trials must be below 10^6".into()));
        }
        let pca = matches!(self.link, LinkKind::PcaAdditive { .. });
        match (self.algorithm, self.structure.kind) {
            (Algorithm::Rgd, ConeKind::TuckerTensor(_)) | (Algorithm::Fgd, ConeKind::LowRankMatrix(_)) => {}
            (Algorithm::Pgd, _) => {}
            (a, k) => return Err(Error::InvalidParameter(format!("{a:?} cannot run on a {k:?} structure"))),
        }
        if self.init == InitKind::TensorSpectral && !matches!(self.structure.kind, ConeKind::TuckerTensor(_)) {
            return Err(Error::InvalidParameter("tensor_spectral init needs a Tucker structure".into()));
        }
        if let InitKind::Perturbed(rho) = self.init {
            if !(0.0..=1.0).contains(&rho) {
                return Err(Error::InvalidParameter(format!("rho = {rho} outside [0, 1]")));
            }
        }
        if let InitKind::Provided(t) = &self.init {
            if t.dims != self.structure.dims {
                return Err(Error::DimensionMismatch(format!(
                    "provided init {:?} vs structure {:?}",
                    t.dims, self.structure.dims
                )));
            }
        }
        if pca && self.init == InitKind::TensorSpectral {
            return Err(Error::InvalidParameter("pca_additive has no sensing design".into()));
        }
        let ms: Vec<usize> = match &self.sweep {
            Some(Sweep::M(v)) => v.clone(),
            _ => vec![self.m],
        };
        if ms.is_empty() || (!pca && ms.contains(&0)) {
            return Err(Error::InvalidParameter("m must be at least 1".into()));
        }
        if self.init == InitKind::TensorSpectral && ms.iter().any(|&m| m < 2) {
            return Err(Error::InvalidParameter("tensor_spectral init needs m ≥ 2".into()));
        }
        if let Some(Sweep::Sigma(v)) = &self.sweep {
            if v.is_empty() || v.iter().any(|&s| !(s >= 0.0)) {
                return Err(Error::InvalidParameter("sigma sweep needs non-negative values".into()));
            }
            if !matches!(self.link, LinkKind::Identity { .. } | LinkKind::Abs { .. } | LinkKind::PcaAdditive { .. }) {
                return Err(Error::InvalidParameter(format!("link {} has no noise level to sweep", self.link)));
            }
        }
        if self.link.sigma() < 0.0 {
            return Err(Error::InvalidParameter("sigma must be non-negative".into()));
        }
        if self.solver.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be at least 1".into()));
        }
        Ok(())
    }

    /// `(sweep value, m, link)` per sweep point.
    pub fn sweep_points(&self) -> Vec<(f64, usize, LinkKind)> {
        match &self.sweep {
            None => vec![(self.m as f64, self.m, self.link)],
            Some(Sweep::M(ms)) => ms.iter().map(|&m| (m as f64, m, self.link)).collect(),
            Some(Sweep::Sigma(ss)) => ss.iter().map(|&s| (s, self.m, with_sigma(self.link, s))).collect(),
        }
    }

    fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            cone: self.structure,
            step: s.step,
            max_iters: s.max_iters,
            normalize: s.normalize,
            tol: s.tol,
            record_every: s.record_every,
            skip_rebalance: s.skip_rebalance,
        }
    }
}

fn with_sigma(link: LinkKind, sigma: f64) -> LinkKind {
    match link {
        LinkKind::Identity { .. } => LinkKind::Identity { sigma },
        LinkKind::Abs { .. } => LinkKind::Abs { sigma },
        LinkKind::PcaAdditive { .. } => LinkKind::PcaAdditive { sigma },
        other => other,
    }
}

/// `base_seed ⊕ (sweep_index·10⁶ + trial_index)`.
pub fn trial_seed(base_seed: u64, sweep_index: usize, trial_index: usize) -> u64 {
    base_seed ^ (sweep_index as u64 * 1_000_000 + trial_index as u64)
}

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub init_error: f64,
    /// `None` when the trial failed.
    pub trajectory: Option<Trajectory>,
    pub final_error: Option<f64>,
    pub failure: Option<String>,
    pub wallclock_ms: f64,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

struct Prepared {
    truth: Tensor3,
    oracle: GradientOracle,
    x0: Tensor3,
}

fn prepare(spec: &ExperimentSpec, m: usize, link: LinkKind, rng: &mut TrialRng) -> Result<Prepared> {
    let cone = &spec.structure;
    let truth = random_truth(cone, rng)?;
    let normalize = spec.solver.normalize;
    let finish = |x: Tensor3| if normalize { sphere_normalize(&x) } else { Ok(x) };
    if let LinkKind::PcaAdditive { sigma } = link {
        let y = pca_observation(&truth, sigma, rng)?;
        let x0 = match &spec.init {
            InitKind::Spectral | InitKind::TensorSpectral => finish(project(cone, &y)?)?,
            InitKind::Perturbed(rho) => perturbed_init(&truth, *rho, cone, rng)?,
            InitKind::Provided(t) => t.clone(),
        };
        return Ok(Prepared { truth, oracle: GradientOracle::pca(y), x0 });
    }
    let design = Design::gaussian(m, cone.dims, rng);
    let data = generate_observations(design, &truth, link, rng)?;
    let route = match spec.route {
        Some(r) => r,
        None => default_route(&link)?,
    };
    let x0 = match &spec.init {
        InitKind::Spectral => finish(project(cone, &data.design.weighted_mean(&data.y))?)?,
        InitKind::TensorSpectral => {
            let ConeKind::TuckerTensor(r) = cone.kind else {
                return Err(Error::InvalidParameter("tensor_spectral init needs a Tucker structure".into()));
            };
            finish(tensor_spectral_init(&data, r)?)?
        }
        InitKind::Perturbed(rho) => perturbed_init(&truth, *rho, cone, rng)?,
        InitKind::Provided(t) => t.clone(),
    };
    let oracle = make_oracle(Arc::new(data), route)?;
    Ok(Prepared { truth, oracle, x0 })
}

fn solve(spec: &ExperimentSpec, p: &Prepared, reference: &Reference) -> Result<Trajectory> {
    let cfg = spec.solver_config();
    match (spec.algorithm, spec.structure.kind) {
        (Algorithm::Pgd, _) => pgd(&p.oracle, &p.x0, &cfg, Some(reference)),
        (Algorithm::Rgd, ConeKind::TuckerTensor(r)) => rgd(&p.oracle, &p.x0, r, &cfg, Some(reference)),
        (Algorithm::Fgd, ConeKind::LowRankMatrix(r)) => {
            let p0 = factorize_init(&p.x0.to_mat(), r)?;
            fgd(&p.oracle, &p0, &cfg, Some(reference))
        }
        (a, k) => Err(Error::InvalidParameter(format!("{a:?} cannot run on a {k:?} structure"))),
    }
}

/// One trial of one sweep point. Errors are reported in the record.
pub fn run_trial(spec: &ExperimentSpec, sweep_index: usize, trial: usize) -> TrialRecord {
    let start = Instant::now();
    let seed = trial_seed(spec.base_seed, sweep_index, trial);
    let points = spec.sweep_points();
    let (_, m, link) = points[sweep_index];
    let mut rng = rng_from_seed(seed);
    let metric = Metric::for_link(&link);
    let mut record = TrialRecord {
        trial,
        seed,
        init_error: f64::NAN,
        trajectory: None,
        final_error: None,
        failure: None,
        wallclock_ms: 0.0,
    };
    match prepare(spec, m, link, &mut rng) {
        Err(e) => record.failure = Some(format!("setup: {e}")),
        Ok(p) => {
            record.init_error = metric.distance(&p.x0, &p.truth);
            let reference = Reference { truth: p.truth.clone(), metric };
            match solve(spec, &p, &reference) {
                Ok(traj) => {
                    if let Some(e0) = traj.initial_error() {
                        record.init_error = e0;
                    }
                    record.final_error = traj.final_error();
                    record.trajectory = Some(traj);
                }
                Err(e) => record.failure = Some(e.to_string()),
            }
        }
    }
    record.wallclock_ms = start.elapsed().as_secs_f64() * 1e3;
    record
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub sweep_value: f64,
    pub m: usize,
    pub trials: usize,
    pub failures: usize,
    pub mean_final_error: f64,
    pub median_final_error: f64,
    /// Sample standard deviation; 0 with fewer than two successes.
    pub std_final_error: f64,
    pub curve_iters: Vec<usize>,
    pub mean_curve: Vec<f64>,
    pub median_curve: Vec<f64>,
    pub records: Vec<TrialRecord>,
}

#[derive(Debug, Clone)]
pub struct AggregateResult {
    pub spec: ExperimentSpec,
    pub points: Vec<SweepResult>,
}

impl AggregateResult {
    pub fn all_failed(&self) -> bool {
        self.points.iter().all(|p| p.failures == p.trials)
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn aggregate(sweep_value: f64, m: usize, records: Vec<TrialRecord>) -> SweepResult {
    let finals: Vec<f64> = records.iter().filter_map(|r| r.final_error).collect();
    let n = finals.len();
    let mean = if n > 0 { finals.iter().sum::<f64>() / n as f64 } else { f64::NAN };
    let std = if n > 1 {
        (finals.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let trajs: Vec<&Trajectory> = records.iter().filter_map(|r| r.trajectory.as_ref()).collect();
    let curve_iters = trajs.iter().max_by_key(|t| t.iters.len()).map(|t| t.iters.clone()).unwrap_or_default();
    let mut mean_curve = Vec::with_capacity(curve_iters.len());
    let mut median_curve = Vec::with_capacity(curve_iters.len());
    for &t in &curve_iters {
        let vals: Vec<f64> = trajs.iter().filter_map(|tr| tr.error_at(t)).collect();
        mean_curve.push(vals.iter().sum::<f64>() / vals.len().max(1) as f64);
        median_curve.push(median(&vals));
    }
    SweepResult {
        sweep_value,
        m,
        trials: records.len(),
        failures: records.iter().filter(|r| r.failed()).count(),
        mean_final_error: mean,
        median_final_error: median(&finals),
        std_final_error: std,
        curve_iters,
        mean_curve,
        median_curve,
        records,
    }
}

fn run_with(spec: &ExperimentSpec, parallel: bool) -> Result<AggregateResult> {
    spec.validate()?;
    let points = spec.sweep_points();
    let mut out = Vec::with_capacity(points.len());
    for (si, &(value, m, _)) in points.iter().enumerate() {
        let records: Vec<TrialRecord> = if parallel {
            (0..spec.trials).into_par_iter().map(|t| run_trial(spec, si, t)).collect()
        } else {
            (0..spec.trials).map(|t| run_trial(spec, si, t)).collect()
        };
        out.push(aggregate(value, m, records));
    }
    Ok(AggregateResult { spec: spec.clone(), points: out })
}

/// Runs every trial on the current rayon pool; results do not depend on
/// the pool size.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<AggregateResult> {
    run_with(spec, true)
}

pub fn run_experiment_serial(spec: &ExperimentSpec) -> Result<AggregateResult> {
    run_with(spec, false)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParameter("need at least two paired points".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter("log-log fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("x values are all equal".into()));
    }
    Ok(sxy / sxx)
}

// ---------------------------------------------------------------------------
// RAIC probe
// ---------------------------------------------------------------------------

/// `dual_norm_probe(U − X − η·h(U), r)`.
pub fn raic_residual(oracle: &GradientOracle, u: &Tensor3, x: &Tensor3, r: [usize; 3], eta: f64) -> Result<f64> {
    let g = oracle.gradient(u)?;
    let mut res = u.sub(x)?;
    res.axpy(-eta, &g)?;
    dual_norm_probe(&res, r)
}

/// `(‖U − X‖_F, residual)` at `num_test_points` rank-`r` points
/// `U = thosvd(X + ρ_k S_k, r)`, `ρ_k = radius·(k+1)/num_test_points`.
pub fn raic_probe<R: Rng + ?Sized>(
    oracle: &GradientOracle,
    x: &Tensor3,
    r: [usize; 3],
    eta: f64,
    num_test_points: usize,
    radius: f64,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("radius {radius} must be positive")));
    }
    let mut out = Vec::with_capacity(num_test_points);
    for k in 0..num_test_points {
        let rho = radius * (k + 1) as f64 / num_test_points as f64;
        let s = unit_sphere_tensor(rng, x.dims);
        let mut z = x.clone();
        z.axpy(rho, &s)?;
        let (u, _) = thosvd(&z, r)?;
        let dist = u.sub(x)?.fro_norm();
        out.push((dist, raic_residual(oracle, &u, x, r, eta)?));
    }
    Ok(out)
}
