use nllr_core::cone::{dual_norm_probe, project, sphere_normalize, ConeKind, ConeSpec};
use nllr_core::linalg::Mat;
use nllr_core::random::{normal_mat, normal_tensor, normal_vec, rng_from_seed, unit_sphere_tensor};
use nllr_core::tensor::{inner, mode_products, thosvd, Tensor3};
use proptest::prelude::*;

fn dist(a: &Tensor3, b: &Tensor3) -> f64 {
    a.sub(b).unwrap().fro_norm()
}

#[test]
fn sparse_projection_beats_every_support() {
    let cone = ConeSpec::vector(5, ConeKind::Sparse(2)).unwrap();
    let mut rng = rng_from_seed(1);
    for _ in 0..50 {
        let v = Tensor3::vector(normal_vec(&mut rng, 5));
        let p = project(&cone, &v).unwrap();
        let best = dist(&v, &p);
        for i in 0..5 {
            for j in (i + 1)..5 {
                // best 2-sparse approximation on support {i, j}
                let mut w = vec![0.0; 5];
                w[i] = v.data[i];
                w[j] = v.data[j];
                assert!(best <= dist(&v, &Tensor3::vector(w)) + 1e-15);
            }
        }
    }
}

#[test]
fn low_rank_members_unchanged() {
    let mut rng = rng_from_seed(2);
    let z = normal_mat(&mut rng, 6, 2).matmul_t(&normal_mat(&mut rng, 5, 2)).unwrap();
    let cone = ConeSpec::low_rank_matrix(6, 5, 3).unwrap();
    let t = Tensor3::from_mat(&z);
    assert!(dist(&project(&cone, &t).unwrap(), &t) <= 1e-10);
}

#[test]
fn probe_of_cone_member_is_its_norm() {
    let mut rng = rng_from_seed(3);
    let core = normal_tensor(&mut rng, [2, 2, 2]);
    let f: Vec<Mat> = (0..3).map(|_| normal_mat(&mut rng, 5, 2)).collect();
    let r = mode_products(&core, [&f[0], &f[1], &f[2]]).unwrap();
    let v = dual_norm_probe(&r, [1, 1, 1]).unwrap();
    assert!((v - r.fro_norm()).abs() <= 1e-10 * r.fro_norm());
}

#[test]
fn probe_dominates_random_search() {
    let mut rng = rng_from_seed(4);
    let r = normal_tensor(&mut rng, [4, 4, 4]);
    let probe = dual_norm_probe(&r, [1, 1, 1]).unwrap();
    let mut best: f64 = 0.0;
    for _ in 0..2000 {
        let core = normal_tensor(&mut rng, [2, 2, 2]);
        let f: Vec<Mat> = (0..3).map(|_| normal_mat(&mut rng, 4, 2)).collect();
        let w = sphere_normalize(&mode_products(&core, [&f[0], &f[1], &f[2]]).unwrap()).unwrap();
        best = best.max(inner(&w, &r).unwrap());
    }
    assert!(probe >= best, "probe {probe} < random search {best}");
    assert!(probe <= r.fro_norm());
}

#[test]
fn normalize_contraction_bound() {
    let mut rng = rng_from_seed(5);
    let mut checked = 0;
    for k in 0..400 {
        let y = unit_sphere_tensor(&mut rng, [6, 1, 1]);
        let eps = 0.5 * (k as f64 + 1.0) / 400.0;
        let mut x = y.clone();
        x.axpy(eps, &unit_sphere_tensor(&mut rng, [6, 1, 1])).unwrap();
        if x.fro_norm() < 0.99 {
            continue;
        }
        let d = dist(&x, &y);
        let lhs = dist(&sphere_normalize(&x).unwrap(), &y);
        assert!(lhs <= (1.0 + 2.0 * d.sqrt()) * d + 1e-15);
        checked += 1;
    }
    assert!(checked > 100);
}

fn cones() -> Vec<(ConeSpec, [usize; 3])> {
    vec![
        (ConeSpec::vector(12, ConeKind::Sparse(3)).unwrap(), [12, 1, 1]),
        (ConeSpec::low_rank_matrix(7, 6, 2).unwrap(), [7, 6, 1]),
        (ConeSpec::tucker([5, 4, 6], [2, 2, 3]).unwrap(), [5, 4, 6]),
        (ConeSpec::vector(4, ConeKind::Unconstrained).unwrap(), [4, 1, 1]),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn projection_idempotent(seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        for (cone, dims) in cones() {
            let v = normal_tensor(&mut rng, dims);
            let p = project(&cone, &v).unwrap();
            let pp = project(&cone, &p).unwrap();
            match cone.kind {
                ConeKind::TuckerTensor(_) => prop_assert!(dist(&p, &pp) <= 1e-9),
                ConeKind::LowRankMatrix(_) => prop_assert!(dist(&p, &pp) <= 1e-10 * p.fro_norm().max(1.0)),
                _ => prop_assert_eq!(p, pp),
            }
        }
    }

    #[test]
    fn projection_within_twice_distance_to_members(seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        for (cone, dims) in cones() {
            let b = project(&cone, &normal_tensor(&mut rng, dims)).unwrap();
            let v = normal_tensor(&mut rng, dims);
            let lhs = dist(&project(&cone, &v).unwrap(), &b);
            prop_assert!(lhs <= 2.0 * dist(&v, &b) + 1e-12);
        }
    }

    #[test]
    fn probe_below_frobenius(seed in any::<u64>()) {
        let r = normal_tensor(&mut rng_from_seed(seed), [4, 6, 5]);
        prop_assert!(dual_norm_probe(&r, [1, 2, 2]).unwrap() <= r.fro_norm() * (1.0 + 1e-12));
        let (low, _) = thosvd(&r, [2, 2, 2]).unwrap();
        prop_assert!(dual_norm_probe(&low, [1, 1, 1]).unwrap() <= low.fro_norm() * (1.0 + 1e-12));
    }
}
