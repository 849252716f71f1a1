//! Initializations: the U-statistic tensor spectral method, the simple
//! spectral estimate, perturbed-truth starts and factor extraction.

use rand::Rng;

use crate::cone::{project, sphere_normalize, ConeSpec};
use crate::error::{Error, Result};
use crate::linalg::{truncated_svd, Mat};
use crate::models::Dataset;
use crate::random::unit_sphere_tensor;
use crate::solvers::FactorPair;
use crate::tensor::{mode_products, Tensor3};

/// `Σ_i w_i · M(A_i) M(A_i)ᵀ` for the mode-`mode` unfolding `M`.
fn weighted_unfolding_gram(data: &Dataset, weights: &[f64], mode: usize) -> Mat {
    let [n1, n2, n3] = data.design.dims;
    let nw = data.design.dims[mode - 1];
    let mut g = Mat::zeros(nw, nw);
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let a = data.design.element(i);
        match mode {
            1 => {
                let len = n2 * n3;
                for p in 0..n1 {
                    let rp = &a[p * len..(p + 1) * len];
                    for q in p..n1 {
                        g.data[p * nw + q] += w * crate::linalg::dot(rp, &a[q * len..(q + 1) * len]);
                    }
                }
            }
            2 => {
                for i1 in 0..n1 {
                    let block = &a[i1 * n2 * n3..(i1 + 1) * n2 * n3];
                    for p in 0..n2 {
                        let rp = &block[p * n3..(p + 1) * n3];
                        for q in p..n2 {
                            g.data[p * nw + q] += w * crate::linalg::dot(rp, &block[q * n3..(q + 1) * n3]);
                        }
                    }
                }
            }
            _ => {
                for fiber in a.chunks_exact(n3) {
                    for p in 0..n3 {
                        let wp = w * fiber[p];
                        if wp == 0.0 {
                            continue;
                        }
                        for q in p..n3 {
                            g.data[p * nw + q] += wp * fiber[q];
                        }
                    }
                }
            }
        }
    }
    for p in 0..nw {
        for q in 0..p {
            g.data[p * nw + q] = g.data[q * nw + p];
        }
    }
    g
}

/// `N̂_w = [S_w S_wᵀ − Σ_i M_w(y_i A_i) M_w(y_i A_i)ᵀ] / (m(m−1))` with
/// `S_w = Σ_i M_w(y_i A_i)`; equal to the pairwise U-statistic.
pub fn u_statistic_moment(data: &Dataset, mode: usize) -> Result<Mat> {
    let m = data.m();
    if m < 2 {
        return Err(Error::InvalidParameter(format!("spectral initialization needs m ≥ 2, got {m}")));
    }
    if !(1..=3).contains(&mode) {
        return Err(Error::InvalidParameter(format!("mode {mode}")));
    }
    let s = data.design.weighted_mean(&data.y).scale(m as f64).matricize(mode);
    let sq: Vec<f64> = data.y.iter().map(|y| y * y).collect();
    let diag = weighted_unfolding_gram(data, &sq, mode);
    let mut n = s.matmul_t(&s)?.sub(&diag)?;
    let denom = (m * (m - 1)) as f64;
    for v in n.data.iter_mut() {
        *v /= denom;
    }
    Ok(n)
}

/// Spectral estimate `(1/m Σ y_i A_i) ×_j Û_jÛ_jᵀ`, not normalized.
pub fn tensor_spectral_init(data: &Dataset, r: [usize; 3]) -> Result<Tensor3> {
    let dims = data.design.dims;
    let mut proj = Vec::with_capacity(3);
    for j in 0..3 {
        if r[j] == 0 || r[j] > dims[j] {
            return Err(Error::RankOutOfRange(format!("rank {:?} for dims {:?}", r, dims)));
        }
        let n = u_statistic_moment(data, j + 1)?;
        let sym = n.add(&n.transpose())?.scale(0.5);
        let u = truncated_svd(&sym, r[j])?.u;
        proj.push(u.matmul_t(&u)?);
    }
    let mean = data.design.weighted_mean(&data.y);
    mode_products(&mean, [&proj[0], &proj[1], &proj[2]])
}

/// `normalize(project(cone, (1/m) Σ y_i A_i))`.
pub fn simple_spectral_init(data: &Dataset, cone: &ConeSpec) -> Result<Tensor3> {
    if data.m() == 0 {
        return Err(Error::InvalidParameter("empty dataset".into()));
    }
    sphere_normalize(&project(cone, &data.design.weighted_mean(&data.y))?)
}

/// `normalize(project(cone, ρX + (1−ρ)S))` with `S` uniform on the unit
/// sphere.
pub fn perturbed_init<R: Rng + ?Sized>(x: &Tensor3, rho: f64, cone: &ConeSpec, rng: &mut R) -> Result<Tensor3> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("rho = {rho} outside [0, 1]")));
    }
    let s = unit_sphere_tensor(rng, x.dims);
    let mut z = s.scale(1.0 - rho);
    z.axpy(rho, x)?;
    sphere_normalize(&project(cone, &z)?)
}

/// `U₀ = Ũ√Σ`, `V₀ = Ṽ√Σ` from the rank-`r` SVD of `Z₀`.
pub fn factorize_init(z0: &Mat, r: usize) -> Result<FactorPair> {
    let svd = truncated_svd(z0, r)?;
    let root: Vec<f64> = svd.s.iter().map(|s| s.sqrt()).collect();
    let mut u = svd.u;
    let mut v = svd.v;
    for (mat, cols) in [(&mut u, r), (&mut v, r)] {
        for i in 0..mat.rows {
            for j in 0..cols {
                mat.data[i * cols + j] *= root[j];
            }
        }
    }
    FactorPair::new(u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Design, LinkKind};
    use crate::random::{normal_tensor, rng_from_seed};

    #[test]
    fn zero_responses_give_zero_start() {
        let mut rng = rng_from_seed(1);
        let design = Design::gaussian(10, [3, 4, 2], &mut rng);
        let data = Dataset { design, y: vec![0.0; 10], link: LinkKind::Identity { sigma: 0.0 } };
        let x0 = tensor_spectral_init(&data, [1, 1, 1]).unwrap();
        assert!(x0.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn needs_two_samples() {
        let mut rng = rng_from_seed(2);
        let design = Design::gaussian(1, [2, 2, 2], &mut rng);
        let data = Dataset { design, y: vec![1.0], link: LinkKind::Identity { sigma: 0.0 } };
        assert!(tensor_spectral_init(&data, [1, 1, 1]).is_err());
    }

    #[test]
    fn single_nonzero_response() {
        let mut rng = rng_from_seed(3);
        let design = Design::gaussian(4, [5, 1, 1], &mut rng);
        let mut y = vec![0.0; 4];
        y[2] = -3.0;
        let a2 = design.element_tensor(2);
        let data = Dataset { design, y, link: LinkKind::Identity { sigma: 0.0 } };
        let cone = ConeSpec::vector(5, crate::cone::ConeKind::Unconstrained).unwrap();
        let x0 = simple_spectral_init(&data, &cone).unwrap();
        let expect = sphere_normalize(&a2.scale(-1.0)).unwrap();
        assert!(x0.sub(&expect).unwrap().fro_norm() < 1e-14);
    }

    #[test]
    fn perturbed_rho_one_returns_truth() {
        let mut rng = rng_from_seed(4);
        let cone = ConeSpec::tucker([4, 5, 3], [2, 2, 2]).unwrap();
        let x = sphere_normalize(&project(&cone, &normal_tensor(&mut rng, [4, 5, 3])).unwrap()).unwrap();
        let x0 = perturbed_init(&x, 1.0, &cone, &mut rng).unwrap();
        assert!(x0.sub(&x).unwrap().fro_norm() < 1e-10);
        let x1 = perturbed_init(&x, 0.3, &cone, &mut rng).unwrap();
        assert!((x1.fro_norm() - 1.0).abs() < 1e-12);
        assert!(perturbed_init(&x, 1.5, &cone, &mut rng).is_err());
    }

    #[test]
    fn factorize_rank_one() {
        let u = [0.6, 0.8];
        let w = [0.0, 1.0, 0.0];
        let mut z = Mat::zeros(2, 3);
        for i in 0..2 {
            for j in 0..3 {
                z.set(i, j, u[i] * w[j]);
            }
        }
        let p = factorize_init(&z, 1).unwrap();
        assert!((p.u.get(0, 0) - 0.6).abs() < 1e-12 && (p.u.get(1, 0) - 0.8).abs() < 1e-12);
        assert!((p.v.get(1, 0) - 1.0).abs() < 1e-12);
    }
}
