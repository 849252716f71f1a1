//! Dense row-major matrices and the SVD/QR kernels used by the tensor code.

use faer::Mat as FMat;

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch("ragged rows".into()));
            }
            data.extend_from_slice(row);
        }
        Ok(Mat { rows: r, cols: c, data })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        let n = other.cols;
        for i in 0..self.rows {
            let orow = &mut out.data[i * n..(i + 1) * n];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times transpose of {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Mat::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot(self.row(i), other.row(j));
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Mat) -> Result<Mat> {
        self.transpose().matmul(other)
    }

    pub fn sub(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, |a, b| a + b)
    }

    fn zip_with(&self, other: &Mat, f: impl Fn(f64, f64) -> f64) -> Result<Mat> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(Mat { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, c: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| c * x).collect() }
    }

    pub fn fro_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    fn to_faer(&self) -> FMat<f64> {
        FMat::from_fn(self.rows, self.cols, |i, j| self.data[i * self.cols + j])
    }

    fn from_faer(m: faer::MatRef<'_, f64>) -> Mat {
        let mut out = Mat::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.data[i * m.ncols() + j] = m[(i, j)];
            }
        }
        out
    }
}

/// Dot product with four independent accumulators.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += a·x`.
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

// ---------------------------------------------------------------------------
// SVD
// ---------------------------------------------------------------------------

/// Top singular triplets: `u` is rows×r, `v` is cols×r.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

impl SvdResult {
    /// `U · diag(s) · Vᵀ`.
    pub fn reconstruct(&self) -> Mat {
        let mut us = self.u.clone();
        for i in 0..us.rows {
            for (k, s) in self.s.iter().enumerate() {
                us.data[i * us.cols + k] *= s;
            }
        }
        us.matmul_t(&self.v).expect("consistent svd shapes")
    }
}

/// Full thin SVD sorted by descending singular value, unsigned.
fn sorted_svd(m: &Mat) -> Result<(FMat<f64>, Vec<f64>, FMat<f64>)> {
    if !m.data.iter().all(|x| x.is_finite()) {
        return Err(Error::DegenerateInput("svd of a non-finite matrix".into()));
    }
    let svd = m
        .to_faer()
        .thin_svd()
        .map_err(|e| Error::DegenerateInput(format!("svd failed: {e:?}")))?;
    let (u, v) = (svd.U(), svd.V());
    let k = m.rows.min(m.cols);
    let s: Vec<f64> = (0..k).map(|i| svd.S()[i]).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let u_sorted = FMat::from_fn(u.nrows(), k, |i, j| u[(i, order[j])]);
    let s_sorted = order.iter().map(|&j| s[j]).collect();
    let v_sorted = FMat::from_fn(v.nrows(), k, |i, j| v[(i, order[j])]);
    Ok((u_sorted, s_sorted, v_sorted))
}

/// Sign flip for column `j` so the largest-magnitude entry is positive
/// (ties go to the lowest index).
fn sign_of_column(u: &FMat<f64>, j: usize) -> f64 {
    let mut best = 0usize;
    let mut best_abs = -1.0;
    for i in 0..u.nrows() {
        let a = u[(i, j)].abs();
        if a > best_abs {
            best_abs = a;
            best = i;
        }
    }
    if u[(best, j)] < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn check_rank(m: &Mat, r: usize) -> Result<()> {
    let max = m.rows.min(m.cols);
    if r == 0 || r > max {
        return Err(Error::RankOutOfRange(format!(
            "r = {r} for a {}x{} matrix",
            m.rows, m.cols
        )));
    }
    Ok(())
}

/// Top-`r` singular triplets with the deterministic sign convention.
pub fn truncated_svd(m: &Mat, r: usize) -> Result<SvdResult> {
    check_rank(m, r)?;
    let (u, s, v) = sorted_svd(m)?;
    let mut um = Mat::zeros(m.rows, r);
    let mut vm = Mat::zeros(m.cols, r);
    for j in 0..r {
        let sg = sign_of_column(&u, j);
        for i in 0..m.rows {
            um.set(i, j, sg * u[(i, j)]);
        }
        for i in 0..m.cols {
            vm.set(i, j, sg * v[(i, j)]);
        }
    }
    Ok(SvdResult { u: um, s: s[..r].to_vec(), v: vm })
}

/// Top-`r` left singular vectors plus the full list of singular values.
pub fn left_singular(m: &Mat, r: usize) -> Result<(Mat, Vec<f64>)> {
    check_rank(m, r)?;
    let (u, s, _) = sorted_svd(m)?;
    let mut um = Mat::zeros(m.rows, r);
    for j in 0..r {
        let sg = sign_of_column(&u, j);
        for i in 0..m.rows {
            um.set(i, j, sg * u[(i, j)]);
        }
    }
    Ok((um, s))
}

/// All singular values, descending.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    if m.rows == 0 || m.cols == 0 {
        return Vec::new();
    }
    match sorted_svd(m) {
        Ok((_, s, _)) => s,
        Err(_) => vec![f64::NAN; m.rows.min(m.cols)],
    }
}

/// Moore–Penrose pseudoinverse; singular values below `rel_tol·σ_max` are
/// treated as zero. Also returns the number of retained singular values.
pub fn pinv(m: &Mat, rel_tol: f64) -> (Mat, usize) {
    let k = m.rows.min(m.cols);
    if k == 0 {
        return (Mat::zeros(m.cols, m.rows), 0);
    }
    let svd = match truncated_svd(m, k) {
        Ok(svd) => svd,
        Err(_) => return (Mat { rows: m.cols, cols: m.rows, data: vec![f64::NAN; m.data.len()] }, 0),
    };
    let smax = svd.s[0];
    let mut out = Mat::zeros(m.cols, m.rows);
    let mut kept = 0;
    for (idx, &s) in svd.s.iter().enumerate() {
        if smax <= 0.0 || s < rel_tol * smax {
            continue;
        }
        kept += 1;
        for i in 0..m.cols {
            let vi = svd.v.get(i, idx) / s;
            for j in 0..m.rows {
                out.data[i * m.rows + j] += vi * svd.u.get(j, idx);
            }
        }
    }
    (out, kept)
}

/// Thin QR: `q` is rows×k, `r` is k×cols with k = min(rows, cols).
pub fn thin_qr(m: &Mat) -> (Mat, Mat) {
    let qr = m.to_faer().qr();
    let r = qr.thin_R();
    // faer keeps R upper trapezoidal; zero anything below the diagonal to be safe
    let mut r = Mat::from_faer(r);
    for i in 0..r.rows {
        for j in 0..i.min(r.cols) {
            r.set(i, j, 0.0);
        }
    }
    (Mat::from_faer(qr.compute_thin_Q().as_ref()), r)
}
