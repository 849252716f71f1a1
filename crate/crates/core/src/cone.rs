//! Structure sets, their (quasi-)projections, sphere normalization and the
//! dual-norm probe.

use crate::error::{Error, Result};
use crate::linalg::truncated_svd;
use crate::tensor::{thosvd, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    Unconstrained,
    /// At most `k` nonzero entries.
    Sparse(usize),
    /// `(n1, n2, 1)` matrices of rank at most `r`.
    LowRankMatrix(usize),
    /// Tucker rank at most `(r1, r2, r3)`.
    TuckerTensor([usize; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConeSpec {
    pub kind: ConeKind,
    pub dims: [usize; 3],
}

impl ConeSpec {
    pub fn new(kind: ConeKind, dims: [usize; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidParameter(format!("ambient dims {:?}", dims)));
        }
        let ok = match kind {
            ConeKind::Unconstrained => true,
            ConeKind::Sparse(k) => k >= 1 && k <= dims.iter().product(),
            ConeKind::LowRankMatrix(r) => dims[2] == 1 && r >= 1 && r <= dims[0].min(dims[1]),
            ConeKind::TuckerTensor(r) => (0..3).all(|j| r[j] >= 1 && r[j] <= dims[j]),
        };
        if !ok {
            return Err(Error::InvalidParameter(format!("{:?} for ambient dims {:?}", kind, dims)));
        }
        Ok(ConeSpec { kind, dims })
    }

    pub fn vector(n: usize, kind: ConeKind) -> Result<Self> {
        ConeSpec::new(kind, [n, 1, 1])
    }

    pub fn tucker(dims: [usize; 3], r: [usize; 3]) -> Result<Self> {
        ConeSpec::new(ConeKind::TuckerTensor(r), dims)
    }

    pub fn low_rank_matrix(n1: usize, n2: usize, r: usize) -> Result<Self> {
        ConeSpec::new(ConeKind::LowRankMatrix(r), [n1, n2, 1])
    }
}

/// Projection onto the cone. For Tucker cones this is T-HOSVD, which is
/// quasi-optimal with factor √3.
pub fn project(cone: &ConeSpec, v: &Tensor3) -> Result<Tensor3> {
    if v.dims != cone.dims {
        return Err(Error::DimensionMismatch(format!("{:?} vs cone {:?}", v.dims, cone.dims)));
    }
    match cone.kind {
        ConeKind::Unconstrained => Ok(v.clone()),
        ConeKind::Sparse(k) => Ok(hard_threshold(v, k)),
        ConeKind::LowRankMatrix(r) => {
            let svd = truncated_svd(&v.to_mat(), r)?;
            Ok(Tensor3::from_mat(&svd.reconstruct()))
        }
        ConeKind::TuckerTensor(r) => Ok(thosvd(v, r)?.0),
    }
}

/// Keep the `k` largest-magnitude entries; ties keep the lower index.
fn hard_threshold(v: &Tensor3, k: usize) -> Tensor3 {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v.data[b].abs().total_cmp(&v.data[a].abs()).then(a.cmp(&b)));
    let mut out = Tensor3::zeros(v.dims);
    for &i in idx.iter().take(k) {
        out.data[i] = v.data[i];
    }
    out
}

pub fn sphere_normalize(v: &Tensor3) -> Result<Tensor3> {
    let n = v.fro_norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::DegenerateInput(format!("cannot normalize a tensor of norm {n}")));
    }
    Ok(v.scale(1.0 / n))
}

/// `‖thosvd(R, 2r)‖_F`, a lower bound `v` on the dual norm over rank-`r`
/// differences with the true value in `[v, √3·v]`.
pub fn dual_norm_probe(rr: &Tensor3, r: [usize; 3]) -> Result<f64> {
    let r2 = [2 * r[0], 2 * r[1], 2 * r[2]];
    if (0..3).any(|j| r[j] == 0 || r2[j] > rr.dims[j]) {
        return Err(Error::RankOutOfRange(format!("2·{:?} exceeds dims {:?}", r, rr.dims)));
    }
    Ok(thosvd(rr, r2)?.0.fro_norm())
}
