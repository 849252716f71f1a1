//! Order-3 tensors, unfoldings, mode products, T-HOSVD and the tangent
//! space projection of the fixed-Tucker-rank manifold.
//!
//! Layout is row-major with the third index fastest: entry `(i1, i2, i3)`
//! lives at `i1·n2·n3 + i2·n3 + i3`. Vectors and matrices are the
//! degenerate shapes `(n, 1, 1)` and `(n1, n2, 1)`.
//!
//! Modes are numbered 1, 2, 3. Unfoldings:
//! - mode 1: `M[i1, i2·n3 + i3]` (a plain reshape)
//! - mode 2: `M[i2, i1·n3 + i3]`
//! - mode 3: `M[i3, i1·n2 + i2]`

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Threshold for the core pseudoinverse in [`tangent_project`].
pub const PINV_REL_TOL: f64 = 1e-12;
/// Relative floor below which a singular value counts as zero in
/// [`lambda_extremes`].
pub const RANK_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub dims: [usize; 3],
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Tensor3 { dims, data: vec![0.0; dims.iter().product()] }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if data.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} values for dims {:?}",
                data.len(),
                dims
            )));
        }
        Ok(Tensor3 { dims, data })
    }

    /// A vector as an `(n, 1, 1)` tensor.
    pub fn vector(v: Vec<f64>) -> Self {
        Tensor3 { dims: [v.len(), 1, 1], data: v }
    }

    /// A matrix as an `(n1, n2, 1)` tensor.
    pub fn from_mat(m: &Mat) -> Self {
        Tensor3 { dims: [m.rows, m.cols, 1], data: m.data.clone() }
    }

    /// The mode-1 unfolding; for `(n1, n2, 1)` tensors this is the matrix.
    pub fn to_mat(&self) -> Mat {
        Mat { rows: self.dims[0], cols: self.dims[1] * self.dims[2], data: self.data.clone() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        (i1 * self.dims[1] + i2) * self.dims[2] + i3
    }

    #[inline]
    pub fn get(&self, i1: usize, i2: usize, i3: usize) -> f64 {
        self.data[self.index(i1, i2, i3)]
    }

    #[inline]
    pub fn set(&mut self, i1: usize, i2: usize, i3: usize, v: f64) {
        let k = self.index(i1, i2, i3);
        self.data[k] = v;
    }

    fn check_same(&self, other: &Tensor3) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(())
    }

    pub fn add(&self, other: &Tensor3) -> Result<Tensor3> {
        self.check_same(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Tensor3 { dims: self.dims, data })
    }

    pub fn sub(&self, other: &Tensor3) -> Result<Tensor3> {
        self.check_same(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Tensor3 { dims: self.dims, data })
    }

    pub fn scale(&self, c: f64) -> Tensor3 {
        Tensor3 { dims: self.dims, data: self.data.iter().map(|x| c * x).collect() }
    }

    /// `self += a·x`.
    pub fn axpy(&mut self, a: f64, x: &Tensor3) -> Result<()> {
        self.check_same(x)?;
        linalg::axpy(a, &x.data, &mut self.data);
        Ok(())
    }

    pub fn fro_norm(&self) -> f64 {
        linalg::dot(&self.data, &self.data).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Mode-`mode` unfolding.
    pub fn matricize(&self, mode: usize) -> Mat {
        let [n1, n2, n3] = self.dims;
        match mode {
            1 => Mat { rows: n1, cols: n2 * n3, data: self.data.clone() },
            2 => {
                let mut m = Mat::zeros(n2, n1 * n3);
                for i1 in 0..n1 {
                    for i2 in 0..n2 {
                        let src = &self.data[(i1 * n2 + i2) * n3..(i1 * n2 + i2 + 1) * n3];
                        let dst = i2 * n1 * n3 + i1 * n3;
                        m.data[dst..dst + n3].copy_from_slice(src);
                    }
                }
                m
            }
            3 => {
                let mut m = Mat::zeros(n3, n1 * n2);
                for i1 in 0..n1 {
                    for i2 in 0..n2 {
                        for i3 in 0..n3 {
                            m.data[i3 * n1 * n2 + i1 * n2 + i2] = self.data[(i1 * n2 + i2) * n3 + i3];
                        }
                    }
                }
                m
            }
            _ => panic!("mode must be 1, 2 or 3, got {mode}"),
        }
    }
}

/// Inverse of [`Tensor3::matricize`].
pub fn dematricize(m: &Mat, mode: usize, dims: [usize; 3]) -> Result<Tensor3> {
    let [n1, n2, n3] = dims;
    let (rows, cols) = match mode {
        1 => (n1, n2 * n3),
        2 => (n2, n1 * n3),
        3 => (n3, n1 * n2),
        _ => return Err(Error::InvalidParameter(format!("mode {mode}"))),
    };
    if m.rows != rows || m.cols != cols {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} unfolding for dims {:?} mode {mode}",
            m.rows, m.cols, dims
        )));
    }
    let mut t = Tensor3::zeros(dims);
    match mode {
        1 => t.data.copy_from_slice(&m.data),
        2 => {
            for i1 in 0..n1 {
                for i2 in 0..n2 {
                    let src = i2 * n1 * n3 + i1 * n3;
                    t.data[(i1 * n2 + i2) * n3..(i1 * n2 + i2 + 1) * n3]
                        .copy_from_slice(&m.data[src..src + n3]);
                }
            }
        }
        _ => {
            for i1 in 0..n1 {
                for i2 in 0..n2 {
                    for i3 in 0..n3 {
                        t.data[(i1 * n2 + i2) * n3 + i3] = m.data[i3 * n1 * n2 + i1 * n2 + i2];
                    }
                }
            }
        }
    }
    Ok(t)
}

/// `A ×_mode B`, i.e. `[A ×₁ B]_{i,j,k} = Σ_l A_{l,j,k} B_{i,l}`.
pub fn mode_product(a: &Tensor3, b: &Mat, mode: usize) -> Result<Tensor3> {
    if !(1..=3).contains(&mode) {
        return Err(Error::InvalidParameter(format!("mode {mode}")));
    }
    if b.cols != a.dims[mode - 1] {
        return Err(Error::DimensionMismatch(format!(
            "matrix with {} columns against mode {mode} of size {}",
            b.cols,
            a.dims[mode - 1]
        )));
    }
    let mut dims = a.dims;
    dims[mode - 1] = b.rows;
    let prod = b.matmul(&a.matricize(mode))?;
    dematricize(&prod, mode, dims)
}

/// `A ×₁ B₁ ×₂ B₂ ×₃ B₃`.
pub fn mode_products(a: &Tensor3, b: [&Mat; 3]) -> Result<Tensor3> {
    let t = mode_product(a, b[0], 1)?;
    let t = mode_product(&t, b[1], 2)?;
    mode_product(&t, b[2], 3)
}

pub fn inner(a: &Tensor3, b: &Tensor3) -> Result<f64> {
    a.check_same(b)?;
    Ok(linalg::dot(&a.data, &b.data))
}

pub fn fro_norm(a: &Tensor3) -> f64 {
    a.fro_norm()
}

// ---------------------------------------------------------------------------
// Tucker format
// ---------------------------------------------------------------------------

/// `core ×₁ U₁ ×₂ U₂ ×₃ U₃` with orthonormal factors.
#[derive(Debug, Clone)]
pub struct TuckerPoint {
    pub core: Tensor3,
    pub factors: [Mat; 3],
}

impl TuckerPoint {
    pub fn reconstruct(&self) -> Tensor3 {
        mode_products(&self.core, [&self.factors[0], &self.factors[1], &self.factors[2]])
            .expect("tucker point with consistent shapes")
    }

    pub fn rank(&self) -> [usize; 3] {
        self.core.dims
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.factors[0].rows, self.factors[1].rows, self.factors[2].rows]
    }
}

fn check_tucker_rank(dims: [usize; 3], r: [usize; 3]) -> Result<()> {
    for j in 0..3 {
        if r[j] == 0 || r[j] > dims[j] {
            return Err(Error::RankOutOfRange(format!("rank {:?} for dims {:?}", r, dims)));
        }
    }
    Ok(())
}

/// T-HOSVD plus the full singular spectrum of every unfolding.
pub(crate) fn thosvd_with_spectra(
    a: &Tensor3,
    r: [usize; 3],
) -> Result<(Tensor3, TuckerPoint, [Vec<f64>; 3])> {
    check_tucker_rank(a.dims, r)?;
    let mut factors = Vec::with_capacity(3);
    let mut spectra = Vec::with_capacity(3);
    for j in 0..3 {
        let (u, s) = linalg::left_singular(&a.matricize(j + 1), r[j])?;
        factors.push(u);
        spectra.push(s);
    }
    let factors: [Mat; 3] = factors.try_into().expect("three factors");
    let spectra: [Vec<f64>; 3] = spectra.try_into().expect("three spectra");
    let ut = [factors[0].transpose(), factors[1].transpose(), factors[2].transpose()];
    let core = mode_products(a, [&ut[0], &ut[1], &ut[2]])?;
    let point = TuckerPoint { core, factors };
    Ok((point.reconstruct(), point, spectra))
}

/// Truncated HOSVD: `Â = A ×_j U_jU_jᵀ` with `U_j` the top-`r_j` left
/// singular vectors of the mode-`j` unfolding.
pub fn thosvd(a: &Tensor3, r: [usize; 3]) -> Result<(Tensor3, TuckerPoint)> {
    let (t, p, _) = thosvd_with_spectra(a, r)?;
    Ok((t, p))
}

/// Number of singular values above `tol·σ_max` per unfolding.
pub fn tucker_rank(a: &Tensor3, tol: f64) -> [usize; 3] {
    let mut out = [0; 3];
    for j in 0..3 {
        let s = linalg::singular_values(&a.matricize(j + 1));
        let smax = s.first().copied().unwrap_or(0.0);
        out[j] = s.iter().filter(|&&x| x > tol * smax).count();
    }
    out
}

pub(crate) fn lambda_from_spectra(spectra: &[Vec<f64>; 3], r: [usize; 3]) -> Result<(f64, f64, f64)> {
    let mut lmin = f64::INFINITY;
    let mut lmax: f64 = 0.0;
    for j in 0..3 {
        let s = &spectra[j];
        if r[j] == 0 || r[j] > s.len() {
            return Err(Error::RankOutOfRange(format!("rank {:?}", r)));
        }
        let s1 = s[0];
        let sr = s[r[j] - 1];
        if !(s1 > 0.0) || sr < RANK_REL_TOL * s1 {
            return Err(Error::RankDeficient { mode: j + 1 });
        }
        lmin = lmin.min(sr);
        lmax = lmax.max(s1);
    }
    Ok((lmin, lmax, lmax / lmin))
}

/// `(Λ_min, Λ_max, κ)` for a tensor of Tucker rank exactly `r`.
pub fn lambda_extremes(a: &Tensor3, r: [usize; 3]) -> Result<(f64, f64, f64)> {
    check_tucker_rank(a.dims, r)?;
    let spectra = [
        linalg::singular_values(&a.matricize(1)),
        linalg::singular_values(&a.matricize(2)),
        linalg::singular_values(&a.matricize(3)),
    ];
    lambda_from_spectra(&spectra, r)
}

/// Orthogonal projection of `z` onto the tangent space of the
/// fixed-Tucker-rank manifold at `point`.
pub fn tangent_project(point: &TuckerPoint, z: &Tensor3) -> Result<Tensor3> {
    if z.dims != point.dims() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs tangent point {:?}",
            z.dims,
            point.dims()
        )));
    }
    let u = &point.factors;
    let ut = [u[0].transpose(), u[1].transpose(), u[2].transpose()];
    let c_tilde = mode_products(z, [&ut[0], &ut[1], &ut[2]])?;
    let mut out = mode_products(&c_tilde, [&u[0], &u[1], &u[2]])?;
    for j in 0..3 {
        let mut w = z.clone();
        for k in 0..3 {
            if k != j {
                w = mode_product(&w, &ut[k], k + 1)?;
            }
        }
        let mw = w.matricize(j + 1);
        let perp = mw.sub(&u[j].matmul(&ut[j].matmul(&mw)?)?)?;
        let cj = point.core.matricize(j + 1);
        let (p, kept) = linalg::pinv(&cj, PINV_REL_TOL);
        if kept < cj.rows {
            return Err(Error::Singular(format!(
                "mode-{} core unfolding has rank {kept} < {}",
                j + 1,
                cj.rows
            )));
        }
        let vj = perp.matmul(&p)?;
        let mut term = mode_product(&point.core, &vj, j + 1)?;
        for k in 0..3 {
            if k != j {
                term = mode_product(&term, &u[k], k + 1)?;
            }
        }
        out.axpy(1.0, &term)?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

/// `n1 n2 n3` on the first line, then one value per line in layout order.
pub fn to_text(a: &Tensor3) -> String {
    let mut s = String::with_capacity(a.len() * 25 + 32);
    let _ = writeln!(s, "{} {} {}", a.dims[0], a.dims[1], a.dims[2]);
    for v in &a.data {
        let _ = writeln!(s, "{v:.16e}");
    }
    s
}

pub fn from_text(text: &str) -> Result<Tensor3> {
    let mut tokens = text.split_ascii_whitespace();
    let mut dims = [0usize; 3];
    for (j, d) in dims.iter_mut().enumerate() {
        let tok = tokens
            .next()
            .ok_or_else(|| Error::Parse(format!("missing dimension {}", j + 1)))?;
        *d = tok.parse().map_err(|_| Error::Parse(format!("bad dimension '{tok}'")))?;
    }
    let n: usize = dims.iter().product();
    let mut data = Vec::with_capacity(n);
    for tok in tokens {
        let v: f64 = tok.parse().map_err(|_| Error::Parse(format!("bad value '{tok}'")))?;
        data.push(v);
    }
    if data.len() != n {
        return Err(Error::Parse(format!("expected {n} values for dims {:?}, found {}", dims, data.len())));
    }
    Ok(Tensor3 { dims, data })
}

pub fn read_tensor(path: &Path) -> Result<Tensor3> {
    from_text(&std::fs::read_to_string(path)?)
}

pub fn write_tensor(path: &Path, a: &Tensor3) -> Result<()> {
    std::fs::write(path, to_text(a))?;
    Ok(())
}
