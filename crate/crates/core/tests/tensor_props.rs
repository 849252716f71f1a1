use nllr_core::linalg::{singular_values, truncated_svd, Mat};
use nllr_core::random::{normal_mat, normal_tensor, rng_from_seed, unit_sphere_tensor};
use nllr_core::tensor::{
    dematricize, inner, lambda_extremes, mode_product, mode_products, tangent_project, thosvd, tucker_rank,
    Tensor3, TuckerPoint,
};
use proptest::prelude::*;

fn brute_contraction(a: &Tensor3, b: [&Mat; 3]) -> Tensor3 {
    let dims = [b[0].rows, b[1].rows, b[2].rows];
    let mut out = Tensor3::zeros(dims);
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let mut s = 0.0;
                for p in 0..a.dims[0] {
                    for q in 0..a.dims[1] {
                        for r in 0..a.dims[2] {
                            s += a.get(p, q, r) * b[0].get(i, p) * b[1].get(j, q) * b[2].get(k, r);
                        }
                    }
                }
                out.set(i, j, k, s);
            }
        }
    }
    out
}

fn kron(a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros(a.rows * b.rows, a.cols * b.cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out.set(i * b.rows + k, j * b.cols + l, a.get(i, j) * b.get(k, l));
                }
            }
        }
    }
    out
}

fn random_point(dims: [usize; 3], r: [usize; 3], seed: u64) -> TuckerPoint {
    let mut rng = rng_from_seed(seed);
    let core = normal_tensor(&mut rng, r);
    let factors = [0, 1, 2].map(|j| nllr_core::linalg::thin_qr(&normal_mat(&mut rng, dims[j], r[j])).0);
    TuckerPoint { core, factors }
}

#[test]
fn kronecker_identity_matches_brute_force() {
    let mut rng = rng_from_seed(10);
    let a = normal_tensor(&mut rng, [3, 3, 3]);
    let b = [normal_mat(&mut rng, 2, 3), normal_mat(&mut rng, 2, 3), normal_mat(&mut rng, 2, 3)];
    let fast = mode_products(&a, [&b[0], &b[1], &b[2]]).unwrap();
    let slow = brute_contraction(&a, [&b[0], &b[1], &b[2]]);
    assert!(fast.sub(&slow).unwrap().fro_norm() <= 1e-12);
    let k = kron(&b[1], &b[2]);
    let rhs = b[0].matmul(&a.matricize(1)).unwrap().matmul_t(&k).unwrap();
    assert!(slow.matricize(1).sub(&rhs).unwrap().fro_norm() <= 1e-10);
}

#[test]
fn dematricize_example_and_errors() {
    let m = Mat::from_rows(&[&[1.0, 2.0, 3.0, 4.0], &[5.0, 6.0, 7.0, 8.0]]).unwrap();
    let t = dematricize(&m, 1, [2, 2, 2]).unwrap();
    assert_eq!(t.data, (1..=8).map(f64::from).collect::<Vec<_>>());
    assert!(dematricize(&m, 2, [2, 4, 1]).is_err());
    assert!(mode_product(&t, &Mat::identity(2), 4).is_err());
}

#[test]
fn tucker_rank_of_generic_point() {
    let full = random_point([2, 2, 2], [2, 2, 2], 1);
    assert_eq!(tucker_rank(&full.reconstruct(), 1e-9), [2, 2, 2]);
    let p = random_point([6, 7, 8], [2, 3, 2], 2);
    assert_eq!(tucker_rank(&p.reconstruct(), 1e-9), [2, 3, 2]);
}

#[test]
fn lambda_extremes_match_per_mode_svds() {
    let x = random_point([6, 5, 7], [2, 2, 2], 3).reconstruct();
    let (lmin, lmax, kappa) = lambda_extremes(&x, [2, 2, 2]).unwrap();
    let s: Vec<Vec<f64>> = (1..=3).map(|j| singular_values(&x.matricize(j))).collect();
    let want_min = s.iter().map(|v| v[1]).fold(f64::INFINITY, f64::min);
    let want_max = s.iter().map(|v| v[0]).fold(0.0, f64::max);
    assert!(lmin <= lmax);
    assert!((lmin - want_min).abs() < 1e-12 && (lmax - want_max).abs() < 1e-12);
    assert!((kappa - want_max / want_min).abs() < 1e-10);
}

/// Orthonormal basis of the tangent space, built from its spanning set.
fn tangent_basis(p: &TuckerPoint) -> Mat {
    let dims = p.dims();
    let r = p.rank();
    let n: usize = dims.iter().product();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for a in 0..r[0] {
        for b in 0..r[1] {
            for c in 0..r[2] {
                let mut e = Tensor3::zeros(r);
                e.set(a, b, c, 1.0);
                cols.push(mode_products(&e, [&p.factors[0], &p.factors[1], &p.factors[2]]).unwrap().data);
            }
        }
    }
    for j in 0..3 {
        for i in 0..dims[j] {
            for q in 0..r[j] {
                let mut f = p.factors.clone();
                let mut e = Mat::zeros(dims[j], r[j]);
                e.set(i, q, 1.0);
                f[j] = e;
                cols.push(mode_products(&p.core, [&f[0], &f[1], &f[2]]).unwrap().data);
            }
        }
    }
    let mut span = Mat::zeros(n, cols.len());
    for (k, c) in cols.iter().enumerate() {
        for i in 0..n {
            span.set(i, k, c[i]);
        }
    }
    let s = singular_values(&span);
    let rank = s.iter().filter(|&&v| v > 1e-10 * s[0]).count();
    truncated_svd(&span, rank).unwrap().u
}

fn apply_basis_projection(q: &Mat, z: &Tensor3) -> Tensor3 {
    let coeff: Vec<f64> = (0..q.cols).map(|k| (0..q.rows).map(|i| q.get(i, k) * z.data[i]).sum()).collect();
    let mut out = Tensor3::zeros(z.dims);
    for i in 0..q.rows {
        out.data[i] = (0..q.cols).map(|k| q.get(i, k) * coeff[k]).sum();
    }
    out
}

#[test]
fn tangent_projection_matches_explicit_basis() {
    let p = random_point([4, 4, 4], [2, 2, 2], 4);
    let q = tangent_basis(&p);
    // dimension r1r2r3 + Σ r_j(n_j − r_j)
    assert_eq!(q.cols, 8 + 3 * 2 * 2);
    let mut rng = rng_from_seed(5);
    for _ in 0..5 {
        let z = normal_tensor(&mut rng, [4, 4, 4]);
        let w = normal_tensor(&mut rng, [4, 4, 4]);
        let pz = tangent_project(&p, &z).unwrap();
        let pw = tangent_project(&p, &w).unwrap();
        assert!(pz.sub(&apply_basis_projection(&q, &z)).unwrap().fro_norm() <= 1e-9);
        let lhs = inner(&pz, &w).unwrap();
        let rhs = inner(&z, &pw).unwrap();
        assert!((lhs - rhs).abs() <= 1e-9);
        assert!(pz.fro_norm() <= z.fro_norm() + 1e-12);
    }
}

#[test]
fn tangent_projection_fixes_base_point_and_is_idempotent() {
    let p = random_point([5, 6, 4], [2, 3, 2], 6);
    let x = p.reconstruct();
    assert!(tangent_project(&p, &x).unwrap().sub(&x).unwrap().fro_norm() <= 1e-9);
    let mut rng = rng_from_seed(7);
    let z = normal_tensor(&mut rng, x.dims);
    let pz = tangent_project(&p, &z).unwrap();
    let ppz = tangent_project(&p, &pz).unwrap();
    assert!(ppz.sub(&pz).unwrap().fro_norm() <= 1e-9);
    let t = tucker_rank(&pz, 1e-9);
    assert!(t[0] <= 4 && t[1] <= 6 && t[2] <= 4);
}

#[test]
fn tangent_projection_rejects_singular_core() {
    let mut p = random_point([4, 4, 4], [2, 2, 2], 8);
    p.core = Tensor3::zeros([2, 2, 2]);
    p.core.set(0, 0, 0, 1.0);
    assert!(tangent_project(&p, &Tensor3::zeros([4, 4, 4])).is_err());
}

#[test]
fn tangent_curvature_bound() {
    let mut checked = 0;
    for seed in 0..20 {
        let p = random_point([6, 7, 5], [2, 2, 2], 100 + seed);
        let x = p.reconstruct();
        let (lmin, _, _) = lambda_extremes(&x, [2, 2, 2]).unwrap();
        let mut rng = rng_from_seed(200 + seed);
        for scale in [0.01, 0.03, 0.08] {
            let s = unit_sphere_tensor(&mut rng, x.dims);
            let mut z = x.clone();
            z.axpy(scale * lmin, &s).unwrap();
            let (y, py) = thosvd(&z, [2, 2, 2]).unwrap();
            let d = y.sub(&x).unwrap().fro_norm();
            if d > 0.1 * lmin {
                continue;
            }
            let gap = x.sub(&tangent_project(&py, &x).unwrap()).unwrap().fro_norm();
            assert!(gap <= 3.0 * d * d / lmin + 1e-12, "gap {gap} d {d} lmin {lmin}");
            checked += 1;
        }
    }
    assert!(checked >= 40);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn unfolding_round_trip(n1 in 1usize..=6, n2 in 1usize..=7, n3 in 1usize..=8, seed in any::<u64>()) {
        let a = normal_tensor(&mut rng_from_seed(seed), [n1, n2, n3]);
        for mode in 1..=3 {
            prop_assert_eq!(dematricize(&a.matricize(mode), mode, a.dims).unwrap(), a.clone());
        }
    }

    #[test]
    fn cauchy_schwarz(seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let a = normal_tensor(&mut rng, [3, 4, 2]);
        let b = normal_tensor(&mut rng, [3, 4, 2]);
        prop_assert!(inner(&a, &b).unwrap().abs() <= a.fro_norm() * b.fro_norm() + 1e-12);
    }

    #[test]
    fn thosvd_quasi_optimal(seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let a = normal_tensor(&mut rng, [5, 4, 6]);
        let b = random_point([5, 4, 6], [2, 2, 3], seed ^ 0xabc).reconstruct();
        let (ah, _) = thosvd(&a, [2, 2, 3]).unwrap();
        let lhs = ah.sub(&b).unwrap().fro_norm();
        let rhs = (3f64.sqrt() + 1.0) * a.sub(&b).unwrap().fro_norm();
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn tangent_projection_is_linear(seed in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let p = random_point([4, 5, 3], [2, 2, 2], seed);
        let mut rng = rng_from_seed(seed.wrapping_add(1));
        let z = normal_tensor(&mut rng, [4, 5, 3]);
        let w = normal_tensor(&mut rng, [4, 5, 3]);
        let mut comb = z.scale(alpha);
        comb.axpy(beta, &w).unwrap();
        let lhs = tangent_project(&p, &comb).unwrap();
        let mut rhs = tangent_project(&p, &z).unwrap().scale(alpha);
        rhs.axpy(beta, &tangent_project(&p, &w).unwrap()).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().fro_norm() <= 1e-9);
    }

    #[test]
    fn svd_sign_convention_is_reproducible(seed in any::<u64>()) {
        let m = normal_mat(&mut rng_from_seed(seed), 5, 9);
        let a = truncated_svd(&m, 4).unwrap();
        let b = truncated_svd(&m, 4).unwrap();
        prop_assert_eq!(a.u.data, b.u.data);
        prop_assert_eq!(a.v.data, b.v.data);
        prop_assert_eq!(a.s, b.s);
    }
}
