//! Observation models: links, Gaussian designs, response generation and the
//! per-model gradient oracles.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::quadrature::{hermite_expectation, piecewise_expectation, DEFAULT_NODES};
use crate::random::normal_vec;
use crate::tensor::Tensor3;

/// Poisson rates above this are rejected.
pub const POISSON_RATE_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkKind {
    Identity { sigma: f64 },
    Abs { sigma: f64 },
    Sign,
    Logistic,
    Probit,
    Poisson,
    TruncatedUnit,
    CenteredSigmoid,
    PcaAdditive { sigma: f64 },
}

impl LinkKind {
    pub fn sigma(&self) -> f64 {
        match *self {
            LinkKind::Identity { sigma } | LinkKind::Abs { sigma } | LinkKind::PcaAdditive { sigma } => sigma,
            _ => 0.0,
        }
    }

    pub fn is_abs(&self) -> bool {
        matches!(self, LinkKind::Abs { .. })
    }

    /// Noiseless response function `f`.
    pub fn apply(&self, t: f64) -> f64 {
        match self {
            LinkKind::Identity { .. } | LinkKind::PcaAdditive { .. } => t,
            LinkKind::Abs { .. } => t.abs(),
            LinkKind::Sign => sign(t),
            LinkKind::Logistic => sigmoid(t),
            LinkKind::Probit => normal_cdf(t),
            LinkKind::Poisson => t.exp(),
            LinkKind::TruncatedUnit => sign(t) * t.abs().min(1.0),
            LinkKind::CenteredSigmoid => sigmoid(t) - 0.5,
        }
    }

    /// Points where `apply` or its derivative is discontinuous.
    fn breakpoints(&self) -> &'static [f64] {
        match self {
            LinkKind::Abs { .. } | LinkKind::Sign => &[0.0],
            LinkKind::TruncatedUnit => &[-1.0, 0.0, 1.0],
            _ => &[],
        }
    }
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            LinkKind::Identity { .. } => "identity",
            LinkKind::Abs { .. } => "abs",
            LinkKind::Sign => "sign",
            LinkKind::Logistic => "logistic",
            LinkKind::Probit => "probit",
            LinkKind::Poisson => "poisson",
            LinkKind::TruncatedUnit => "truncated_unit",
            LinkKind::CenteredSigmoid => "centered_sigmoid",
            LinkKind::PcaAdditive { .. } => "pca_additive",
        };
        f.write_str(name)
    }
}

/// `sign(0) = +1`.
#[inline]
pub fn sign(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn normal_cdf(t: f64) -> f64 {
    0.5 * erfc(-t / SQRT_2)
}

#[inline]
fn normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

// ---------------------------------------------------------------------------
// Constants
// ---------------------------------------------------------------------------

/// `E[f(g)]` with the rule matched to the link's smoothness; `nodes` is
/// the Gauss–Hermite order used for smooth links.
fn link_expectation(link: &LinkKind, nodes: usize, h: impl Fn(f64) -> f64) -> f64 {
    if link.breakpoints().is_empty() {
        hermite_expectation(nodes, h)
    } else {
        piecewise_expectation(link.breakpoints(), h)
    }
}

/// `μ = E[g·f(g)]` with `nodes`-point Gauss–Hermite for smooth links.
pub fn mu_constant_with_nodes(link: &LinkKind, nodes: usize) -> Result<f64> {
    match link {
        LinkKind::Abs { .. } | LinkKind::PcaAdditive { .. } => {
            Err(Error::UnsupportedLink(format!("{link} has no positive single-index constant")))
        }
        _ => Ok(link_expectation(link, nodes, |g| g * link.apply(g))),
    }
}

pub fn mu_constant(link: &LinkKind) -> Result<f64> {
    mu_constant_with_nodes(link, DEFAULT_NODES)
}

/// `E[s'(g)]` for the GLM mean functions.
pub fn glm_mean_slope_with_nodes(link: &LinkKind, nodes: usize) -> Result<f64> {
    let h: fn(f64) -> f64 = match link {
        LinkKind::Logistic => |g| {
            let s = sigmoid(g);
            s * (1.0 - s)
        },
        LinkKind::Probit => normal_pdf,
        LinkKind::Poisson => f64::exp,
        _ => return Err(Error::UnsupportedLink(format!("{link} is not a GLM link"))),
    };
    Ok(hermite_expectation(nodes, h))
}

/// `η = 1/E[s'(g)]`.
pub fn glm_step_size(link: &LinkKind) -> Result<f64> {
    Ok(1.0 / glm_mean_slope_with_nodes(link, DEFAULT_NODES)?)
}

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

/// `m` sensing tensors stored contiguously.
#[derive(Debug, Clone)]
pub struct Design {
    pub dims: [usize; 3],
    pub m: usize,
    pub data: Vec<f64>,
}

impl Design {
    pub fn gaussian<R: Rng + ?Sized>(m: usize, dims: [usize; 3], rng: &mut R) -> Self {
        let n: usize = dims.iter().product();
        Design { dims, m, data: normal_vec(rng, m * n) }
    }

    pub fn from_elements(elements: &[Tensor3]) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty design".into()))?;
        let mut data = Vec::with_capacity(elements.len() * first.len());
        for e in elements {
            if e.dims != first.dims {
                return Err(Error::DimensionMismatch("design elements differ in shape".into()));
            }
            data.extend_from_slice(&e.data);
        }
        Ok(Design { dims: first.dims, m: elements.len(), data })
    }

    pub fn element_len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn element(&self, i: usize) -> &[f64] {
        let n = self.element_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn element_tensor(&self, i: usize) -> Tensor3 {
        Tensor3 { dims: self.dims, data: self.element(i).to_vec() }
    }

    /// `⟨A_i, U⟩` for every `i`.
    pub fn inner_products(&self, u: &Tensor3) -> Vec<f64> {
        (0..self.m).map(|i| dot(self.element(i), &u.data)).collect()
    }

    /// `(1/m) Σ w_i A_i`.
    pub fn weighted_mean(&self, w: &[f64]) -> Tensor3 {
        let mut out = Tensor3::zeros(self.dims);
        for (i, &wi) in w.iter().enumerate() {
            if wi != 0.0 {
                axpy(wi, self.element(i), &mut out.data);
            }
        }
        out.scale(1.0 / self.m as f64)
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub design: Design,
    pub y: Vec<f64>,
    pub link: LinkKind,
}

impl Dataset {
    pub fn m(&self) -> usize {
        self.y.len()
    }
}

fn poisson_sample<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<f64> {
    if !(lambda.is_finite() && lambda <= POISSON_RATE_CAP) {
        return Err(Error::InvalidParameter(format!("Poisson rate {lambda} exceeds {POISSON_RATE_CAP}")));
    }
    if lambda <= 30.0 {
        let u: f64 = rng.random();
        let mut p = (-lambda).exp();
        let mut cdf = p;
        let mut k = 0u32;
        while u > cdf && k < 1000 {
            k += 1;
            p *= lambda / k as f64;
            cdf += p;
        }
        Ok(k as f64)
    } else {
        let z: f64 = StandardNormal.sample(rng);
        Ok((lambda + lambda.sqrt() * z + 0.5).floor().max(0.0))
    }
}

/// Responses `y_i = f(⟨A_i, X⟩)` with the link's noise model.
pub fn generate_observations<R: Rng + ?Sized>(
    design: Design,
    x: &Tensor3,
    link: LinkKind,
    rng: &mut R,
) -> Result<Dataset> {
    if design.dims != x.dims {
        return Err(Error::DimensionMismatch(format!("design {:?} vs truth {:?}", design.dims, x.dims)));
    }
    if link.sigma() < 0.0 {
        return Err(Error::InvalidParameter("negative noise level".into()));
    }
    let t = design.inner_products(x);
    let mut y = Vec::with_capacity(design.m);
    for &ti in &t {
        let yi = match link {
            LinkKind::Identity { sigma } | LinkKind::Abs { sigma } => {
                let noise = if sigma > 0.0 {
                    let z: f64 = StandardNormal.sample(rng);
                    sigma * z
                } else {
                    0.0
                };
                link.apply(ti) + noise
            }
            LinkKind::Sign | LinkKind::TruncatedUnit | LinkKind::CenteredSigmoid => link.apply(ti),
            LinkKind::Logistic | LinkKind::Probit => {
                let u: f64 = rng.random();
                if u < link.apply(ti) {
                    1.0
                } else {
                    0.0
                }
            }
            LinkKind::Poisson => poisson_sample(ti.exp(), rng)?,
            LinkKind::PcaAdditive { .. } => {
                return Err(Error::UnsupportedLink(
                    "pca_additive observes a tensor; use pca_observation".into(),
                ))
            }
        };
        y.push(yi);
    }
    Ok(Dataset { design, y, link })
}

/// `Y = X + E` with i.i.d. `N(0, σ²)` entries in `E`.
pub fn pca_observation<R: Rng + ?Sized>(x: &Tensor3, sigma: f64, rng: &mut R) -> Result<Tensor3> {
    if sigma < 0.0 {
        return Err(Error::InvalidParameter("negative noise level".into()));
    }
    let mut y = x.clone();
    if sigma > 0.0 {
        for (v, e) in y.data.iter_mut().zip(normal_vec(rng, x.len())) {
            *v += sigma * e;
        }
    }
    Ok(y)
}

// ---------------------------------------------------------------------------
// Gradient oracles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientRoute {
    /// `(1/m) Σ (⟨A_i,U⟩ − y_i) A_i`
    LeastSquares,
    /// `(1/m) Σ (⟨A_i,U⟩ − y_i/μ) A_i`
    SingleIndex { mu: f64 },
    /// `(1/m) Σ (s(⟨A_i,U⟩) − y_i) A_i`
    Glm,
    /// `(1/m) Σ (|⟨A_i,U⟩| − y_i) sign(⟨A_i,U⟩) A_i`
    Amplitude,
    /// `(1/m) Σ (sign(⟨A_i,U⟩) − y_i) A_i`
    OneBit,
}

/// The route each link uses unless told otherwise.
pub fn default_route(link: &LinkKind) -> Result<GradientRoute> {
    Ok(match link {
        LinkKind::Identity { .. } => GradientRoute::LeastSquares,
        LinkKind::Abs { .. } => GradientRoute::Amplitude,
        LinkKind::Sign => GradientRoute::OneBit,
        LinkKind::Logistic | LinkKind::Probit | LinkKind::Poisson => GradientRoute::Glm,
        LinkKind::TruncatedUnit | LinkKind::CenteredSigmoid => {
            GradientRoute::SingleIndex { mu: mu_constant(link)? }
        }
        LinkKind::PcaAdditive { .. } => {
            return Err(Error::UnsupportedLink("pca_additive uses GradientOracle::pca".into()))
        }
    })
}

type GradFn = dyn Fn(&Tensor3) -> Tensor3 + Send + Sync;

#[derive(Clone)]
enum OracleKind {
    Sample { data: Arc<Dataset>, route: GradientRoute },
    Pca { y: Tensor3 },
    Custom(Arc<GradFn>),
}

/// Maps the current iterate to the model's gradient and carries the
/// canonical step size.
#[derive(Clone)]
pub struct GradientOracle {
    dims: [usize; 3],
    step: f64,
    kind: OracleKind,
}

impl fmt::Debug for GradientOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            OracleKind::Sample { route, .. } => format!("{route:?}"),
            OracleKind::Pca { .. } => "Pca".into(),
            OracleKind::Custom(_) => "Custom".into(),
        };
        f.debug_struct("GradientOracle")
            .field("dims", &self.dims)
            .field("step", &self.step)
            .field("kind", &kind)
            .finish()
    }
}

pub fn make_oracle(data: Arc<Dataset>, route: GradientRoute) -> Result<GradientOracle> {
    if data.m() == 0 || data.design.m != data.m() {
        return Err(Error::InvalidParameter("dataset must have m ≥ 1 matching responses".into()));
    }
    let step = match route {
        GradientRoute::LeastSquares | GradientRoute::Amplitude => 1.0,
        GradientRoute::SingleIndex { mu } => {
            if !(mu > 0.0) {
                return Err(Error::InvalidParameter(format!("single-index constant μ = {mu} must be positive")));
            }
            1.0
        }
        GradientRoute::Glm => glm_step_size(&data.link)?,
        GradientRoute::OneBit => {
            if data.y.iter().any(|&y| y != 1.0 && y != -1.0) {
                return Err(Error::InvalidParameter("one-bit route needs ±1 responses".into()));
            }
            (PI / 2.0).sqrt()
        }
    };
    Ok(GradientOracle { dims: data.design.dims, step, kind: OracleKind::Sample { data, route } })
}

impl GradientOracle {
    /// `U − Y`.
    pub fn pca(y: Tensor3) -> Self {
        GradientOracle { dims: y.dims, step: 1.0, kind: OracleKind::Pca { y } }
    }

    pub fn from_fn(
        dims: [usize; 3],
        step: f64,
        f: impl Fn(&Tensor3) -> Tensor3 + Send + Sync + 'static,
    ) -> Self {
        GradientOracle { dims, step, kind: OracleKind::Custom(Arc::new(f)) }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn dataset(&self) -> Option<&Dataset> {
        match &self.kind {
            OracleKind::Sample { data, .. } => Some(data),
            _ => None,
        }
    }

    pub fn gradient(&self, u: &Tensor3) -> Result<Tensor3> {
        if u.dims != self.dims {
            return Err(Error::DimensionMismatch(format!("iterate {:?} vs oracle {:?}", u.dims, self.dims)));
        }
        match &self.kind {
            OracleKind::Pca { y } => u.sub(y),
            OracleKind::Custom(f) => Ok(f(u)),
            OracleKind::Sample { data, route } => Ok(sample_gradient(data, *route, u)),
        }
    }
}

fn sample_gradient(data: &Dataset, route: GradientRoute, u: &Tensor3) -> Tensor3 {
    let link = data.link;
    let design = &data.design;
    let mut g = Tensor3::zeros(u.dims);
    for (i, &yi) in data.y.iter().enumerate() {
        let a = design.element(i);
        let t = dot(a, &u.data);
        let w = match route {
            GradientRoute::LeastSquares => t - yi,
            GradientRoute::SingleIndex { mu } => t - yi / mu,
            GradientRoute::Glm => link.apply(t) - yi,
            GradientRoute::Amplitude => (t.abs() - yi) * sign(t),
            GradientRoute::OneBit => sign(t) - yi,
        };
        if w != 0.0 {
            axpy(w, a, &mut g.data);
        }
    }
    g.scale(1.0 / data.m() as f64)
}
