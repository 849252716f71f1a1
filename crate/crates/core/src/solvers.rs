//! Projected, Riemannian and factorized gradient descent.

use std::time::Instant;

use crate::cone::{project, sphere_normalize, ConeSpec};
use crate::error::{Error, Result};
use crate::linalg::{singular_values, thin_qr, truncated_svd, Mat};
use crate::models::{GradientOracle, LinkKind};
use crate::tensor::{lambda_from_spectra, tangent_project, thosvd_with_spectra, Tensor3};

/// An iterate whose error exceeds this multiple of the initial error is
/// treated as divergent.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub cone: ConeSpec,
    /// `None` selects the oracle's canonical step (PGD, RGD) or
    /// `0.5·step/‖Z₀‖_op` (FGD).
    pub step: Option<f64>,
    pub max_iters: usize,
    /// Pull every iterate back to the unit sphere.
    pub normalize: bool,
    /// Stop once `‖x_{t+1} − x_t‖_F ≤ tol`; 0 disables.
    pub tol: f64,
    pub record_every: usize,
    pub skip_rebalance: bool,
}

impl SolverConfig {
    pub fn new(cone: ConeSpec, max_iters: usize) -> Self {
        SolverConfig {
            cone,
            step: None,
            max_iters,
            normalize: false,
            tol: 0.0,
            record_every: 1,
            skip_rebalance: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(s) = self.step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter(format!("step {s} must be positive")));
            }
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter("tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Frobenius,
    /// `min(‖u − x‖, ‖u + x‖)`
    Phaseless,
}

impl Metric {
    pub fn for_link(link: &LinkKind) -> Self {
        if link.is_abs() {
            Metric::Phaseless
        } else {
            Metric::Frobenius
        }
    }

    pub fn distance(&self, u: &Tensor3, x: &Tensor3) -> f64 {
        let minus: f64 = u.data.iter().zip(&x.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        match self {
            Metric::Frobenius => minus,
            Metric::Phaseless => {
                let plus: f64 = u.data.iter().zip(&x.data).map(|(a, b)| (a + b) * (a + b)).sum::<f64>().sqrt();
                minus.min(plus)
            }
        }
    }
}

/// Phaseless distance for the `Abs` link, Frobenius otherwise.
pub fn error_metric(u: &Tensor3, x: &Tensor3, link: &LinkKind) -> f64 {
    Metric::for_link(link).distance(u, x)
}

/// Ground truth the trajectory is scored against.
#[derive(Debug, Clone)]
pub struct Reference {
    pub truth: Tensor3,
    pub metric: Metric,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub iters: Vec<usize>,
    /// Error at each recorded iteration; empty without a reference.
    pub errors: Vec<f64>,
    /// Recorded iterates; only kept without a reference.
    pub iterates: Vec<Tensor3>,
    /// Milliseconds since the solver started, per recorded iteration.
    pub elapsed_ms: Vec<f64>,
    pub final_iterate: Tensor3,
    pub stopped_early: bool,
}

impl Trajectory {
    pub fn final_error(&self) -> Option<f64> {
        self.errors.last().copied()
    }

    pub fn initial_error(&self) -> Option<f64> {
        self.errors.first().copied()
    }

    /// Error at iteration `t`, carrying the last value forward.
    pub fn error_at(&self, t: usize) -> Option<f64> {
        let mut out = None;
        for (i, e) in self.iters.iter().zip(&self.errors) {
            if *i <= t {
                out = Some(*e);
            }
        }
        out
    }
}

/// Records iterations and watches for divergence.
struct Recorder<'a> {
    reference: Option<&'a Reference>,
    every: usize,
    start: Instant,
    initial: f64,
    traj: Trajectory,
}

impl<'a> Recorder<'a> {
    fn new(reference: Option<&'a Reference>, every: usize, x0: &Tensor3) -> Result<Self> {
        if let Some(r) = reference {
            if r.truth.dims != x0.dims {
                return Err(Error::DimensionMismatch(format!(
                    "reference {:?} vs iterate {:?}",
                    r.truth.dims, x0.dims
                )));
            }
        }
        let mut rec = Recorder {
            reference,
            every,
            start: Instant::now(),
            initial: 0.0,
            traj: Trajectory {
                iters: Vec::new(),
                errors: Vec::new(),
                iterates: Vec::new(),
                elapsed_ms: Vec::new(),
                final_iterate: x0.clone(),
                stopped_early: false,
            },
        };
        rec.initial = rec.error(x0).unwrap_or(0.0);
        rec.push(0, x0);
        Ok(rec)
    }

    fn error(&self, x: &Tensor3) -> Option<f64> {
        self.reference.map(|r| r.metric.distance(x, &r.truth))
    }

    fn push(&mut self, t: usize, x: &Tensor3) {
        self.traj.iters.push(t);
        self.traj.elapsed_ms.push(self.start.elapsed().as_secs_f64() * 1e3);
        match self.error(x) {
            Some(e) => self.traj.errors.push(e),
            None => self.traj.iterates.push(x.clone()),
        }
    }

    /// Divergence checks, then records `x` if `t` is due or `last`.
    fn step(&mut self, t: usize, x: &Tensor3, last: bool) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::Divergence { iter: t, reason: "non-finite iterate".into() });
        }
        if let Some(e) = self.error(x) {
            if e > DIVERGENCE_FACTOR * self.initial.max(1e-12) {
                return Err(Error::Divergence {
                    iter: t,
                    reason: format!("error {e:.3e} exceeds {DIVERGENCE_FACTOR}× initial {:.3e}", self.initial),
                });
            }
        }
        if last || t.is_multiple_of(self.every) {
            self.push(t, x);
        }
        Ok(())
    }

    fn finish(mut self, x: Tensor3, stopped_early: bool) -> Trajectory {
        self.traj.final_iterate = x;
        self.traj.stopped_early = stopped_early;
        self.traj
    }
}

fn checked_gradient(oracle: &GradientOracle, x: &Tensor3, t: usize) -> Result<Tensor3> {
    let g = oracle.gradient(x)?;
    if !g.is_finite() {
        return Err(Error::Divergence { iter: t, reason: "non-finite gradient".into() });
    }
    Ok(g)
}

fn diff_norm(a: &Tensor3, b: &Tensor3) -> f64 {
    a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// PGD
// ---------------------------------------------------------------------------

/// `x ← [normalize] ∘ project(x − η·h(x))`.
pub fn pgd(
    oracle: &GradientOracle,
    x0: &Tensor3,
    config: &SolverConfig,
    reference: Option<&Reference>,
) -> Result<Trajectory> {
    config.validate()?;
    if x0.dims != config.cone.dims || oracle.dims() != x0.dims {
        return Err(Error::DimensionMismatch(format!(
            "x0 {:?}, cone {:?}, oracle {:?}",
            x0.dims,
            config.cone.dims,
            oracle.dims()
        )));
    }
    let eta = config.step.unwrap_or(oracle.step());
    let mut x = if config.normalize { sphere_normalize(x0)? } else { x0.clone() };
    let mut rec = Recorder::new(reference, config.record_every, &x)?;
    let mut early = false;
    for t in 1..=config.max_iters {
        let g = checked_gradient(oracle, &x, t)?;
        let mut z = x.clone();
        z.axpy(-eta, &g)?;
        let mut next = project(&config.cone, &z)?;
        if config.normalize {
            next = sphere_normalize(&next)?;
        }
        early = config.tol > 0.0 && diff_norm(&next, &x) <= config.tol;
        rec.step(t, &next, early || t == config.max_iters)?;
        x = next;
        if early {
            break;
        }
    }
    Ok(rec.finish(x, early))
}

// ---------------------------------------------------------------------------
// RGD
// ---------------------------------------------------------------------------

/// Riemannian gradient descent on Tucker rank `rank` with T-HOSVD
/// retraction.
pub fn rgd(
    oracle: &GradientOracle,
    x0: &Tensor3,
    rank: [usize; 3],
    config: &SolverConfig,
    reference: Option<&Reference>,
) -> Result<Trajectory> {
    config.validate()?;
    if oracle.dims() != x0.dims {
        return Err(Error::DimensionMismatch(format!("x0 {:?} vs oracle {:?}", x0.dims, oracle.dims())));
    }
    let eta = config.step.unwrap_or(oracle.step());
    let (_, _, spectra) = thosvd_with_spectra(x0, rank)?;
    lambda_from_spectra(&spectra, rank)?;
    let mut x = if config.normalize { sphere_normalize(x0)? } else { x0.clone() };
    let mut rec = Recorder::new(reference, config.record_every, &x)?;
    let mut early = false;
    for t in 1..=config.max_iters {
        let (_, point, _) = thosvd_with_spectra(&x, rank)?;
        let g = checked_gradient(oracle, &x, t)?;
        let rg = tangent_project(&point, &g).map_err(|e| match e {
            Error::Singular(_) => Error::RankCollapse { iter: t },
            other => other,
        })?;
        let mut z = x.clone();
        z.axpy(-eta, &rg)?;
        if !z.is_finite() {
            return Err(Error::Divergence { iter: t, reason: "non-finite iterate".into() });
        }
        let (mut next, _, spectra) = thosvd_with_spectra(&z, rank)?;
        lambda_from_spectra(&spectra, rank).map_err(|_| Error::RankCollapse { iter: t })?;
        if config.normalize {
            next = sphere_normalize(&next)?;
        }
        early = config.tol > 0.0 && diff_norm(&next, &x) <= config.tol;
        rec.step(t, &next, early || t == config.max_iters)?;
        x = next;
        if early {
            break;
        }
    }
    Ok(rec.finish(x, early))
}

// ---------------------------------------------------------------------------
// FGD
// ---------------------------------------------------------------------------

/// Factors of `Z = U·Vᵀ`.
#[derive(Debug, Clone)]
pub struct FactorPair {
    pub u: Mat,
    pub v: Mat,
}

impl FactorPair {
    pub fn new(u: Mat, v: Mat) -> Result<Self> {
        if u.cols != v.cols {
            return Err(Error::DimensionMismatch(format!("factor ranks {} vs {}", u.cols, v.cols)));
        }
        if u.cols == 0 || u.cols > u.rows.min(v.rows) {
            return Err(Error::RankOutOfRange(format!(
                "rank {} for a {}x{} product",
                u.cols, u.rows, v.rows
            )));
        }
        Ok(FactorPair { u, v })
    }

    pub fn product(&self) -> Mat {
        self.u.matmul_t(&self.v).expect("factor shapes checked at construction")
    }

    pub fn product_tensor(&self) -> Tensor3 {
        Tensor3::from_mat(&self.product())
    }

    /// `‖UᵀU − VᵀV‖_max`.
    pub fn imbalance(&self) -> f64 {
        let a = self.u.t_matmul(&self.u).expect("square gram");
        let b = self.v.t_matmul(&self.v).expect("square gram");
        a.sub(&b).expect("same rank").max_abs()
    }

    fn scaled(&self, c: f64) -> FactorPair {
        FactorPair { u: self.u.scale(c), v: self.v.scale(c) }
    }
}

fn scale_columns(m: &Mat, s: &[f64]) -> Mat {
    let mut out = m.clone();
    for i in 0..m.rows {
        for (j, sj) in s.iter().enumerate() {
            out.data[i * m.cols + j] *= sj;
        }
    }
    out
}

/// Re-split `U·Vᵀ` so that `UᵀU = VᵀV`.
pub fn rebalance(p: &FactorPair) -> FactorPair {
    let r = p.u.cols;
    let (q1, r1) = thin_qr(&p.u);
    let (q2, r2) = thin_qr(&p.v);
    let core = r1.matmul_t(&r2).expect("r×r factors");
    let svd = truncated_svd(&core, r).expect("full rank request on an r×r matrix");
    let root: Vec<f64> = svd.s.iter().map(|s| s.max(0.0).sqrt()).collect();
    let u = q1.matmul(&scale_columns(&svd.u, &root)).expect("shapes");
    let v = q2.matmul(&scale_columns(&svd.v, &root)).expect("shapes");
    FactorPair { u, v }
}

/// Factorized gradient descent with rebalancing.
pub fn fgd(
    oracle: &GradientOracle,
    p0: &FactorPair,
    config: &SolverConfig,
    reference: Option<&Reference>,
) -> Result<Trajectory> {
    Ok(fgd_with_factors(oracle, p0, config, reference)?.0)
}

/// [`fgd`], also returning the final factors.
pub fn fgd_with_factors(
    oracle: &GradientOracle,
    p0: &FactorPair,
    config: &SolverConfig,
    reference: Option<&Reference>,
) -> Result<(Trajectory, FactorPair)> {
    config.validate()?;
    let dims = [p0.u.rows, p0.v.rows, 1];
    if oracle.dims() != dims {
        return Err(Error::DimensionMismatch(format!("factors {:?} vs oracle {:?}", dims, oracle.dims())));
    }
    let mut p = if config.skip_rebalance { p0.clone() } else { rebalance(p0) };
    if config.normalize {
        let n = p.product().fro_norm();
        if !(n > 0.0) {
            return Err(Error::DegenerateInput("initial factors multiply to zero".into()));
        }
        p = p.scaled(n.powf(-0.5));
    }
    let mut z = p.product_tensor();
    let eta = match config.step {
        Some(s) => s,
        None => {
            let op = singular_values(&z.to_mat()).first().copied().unwrap_or(0.0);
            if !(op > 0.0) {
                return Err(Error::DegenerateInput("initial product has zero operator norm".into()));
            }
            0.5 * oracle.step() / op
        }
    };
    let mut rec = Recorder::new(reference, config.record_every, &z)?;
    let mut early = false;
    for t in 1..=config.max_iters {
        let g = checked_gradient(oracle, &z, t)?.to_mat();
        let gv = g.matmul(&p.v)?;
        let gtu = g.t_matmul(&p.u)?;
        let mut next = FactorPair { u: p.u.sub(&gv.scale(eta))?, v: p.v.sub(&gtu.scale(eta))? };
        if !config.skip_rebalance {
            next = rebalance(&next);
        }
        if config.normalize {
            let n = next.product().fro_norm();
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::Divergence { iter: t, reason: format!("product norm {n}") });
            }
            next = next.scaled(n.powf(-0.5));
        }
        let zn = next.product_tensor();
        early = config.tol > 0.0 && diff_norm(&zn, &z) <= config.tol;
        rec.step(t, &zn, early || t == config.max_iters)?;
        p = next;
        z = zn;
        if early {
            break;
        }
    }
    Ok((rec.finish(z, early), p))
}
