use cloudprint::attacksim::{attack, AttackKind, AttackSpec};
use cloudprint::estimator::{align, apply_alignment};
use cloudprint::geometry::{
    self, cosine, distance, haar_rotation, isoclinic_rotation, random_rotation_in_plane,
    random_unit_direction, PointCloud, RotationMatrix, RstOrder, RstParams,
};
use cloudprint::verifier::{similarity_score, t_test, Verdict};
use cloudprint::wmvuln::{distribution_distance, matrixkey_residual, MatrixKeyScheme};
use nalgebra::DVector;
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn cloud_strategy(max_dim: usize) -> impl Strategy<Value = PointCloud> {
    (2..=max_dim, 3usize..12).prop_flat_map(|(dim, count)| {
        prop::collection::vec(-5.0f64..5.0, dim * count)
            .prop_map(move |data| PointCloud::from_flat(count, dim, data).unwrap())
    })
}

fn nonzero_rows(cloud: &PointCloud) -> bool {
    cloud.row_norms().iter().all(|&n| n > 1e-3)
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn order_strategy() -> impl Strategy<Value = RstOrder> {
    prop::sample::select(RstOrder::ALL.to_vec())
}

fn unit_cloud(count: usize, dim: usize, seed: u64) -> PointCloud {
    let rows: Vec<Vec<f64>> = (0..count as u64)
        .map(|i| random_unit_direction(dim, seed * 10_000 + i).unwrap())
        .collect();
    PointCloud::from_rows(&rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rotation_preserves_norms_angles_and_distances(cloud in cloud_strategy(24), seed in any::<u64>()) {
        prop_assume!(nonzero_rows(&cloud));
        let r = haar_rotation(cloud.dim(), seed).unwrap();
        let out = geometry::rotate(&cloud, &r).unwrap();
        let origin = vec![0.0; cloud.dim()];
        for i in 0..cloud.count() {
            let j = (i + 1) % cloud.count();
            prop_assert!((distance(out.row(i), &origin) - distance(cloud.row(i), &origin)).abs() <= TOL);
            let c0 = cosine(cloud.row(i), cloud.row(j)).unwrap();
            prop_assert!((cosine(out.row(i), out.row(j)).unwrap() - c0).abs() <= TOL);
            prop_assert!((distance(out.row(i), out.row(j)) - distance(cloud.row(i), cloud.row(j))).abs() <= TOL);
        }
    }

    #[test]
    fn scaling_preserves_angles_and_distance_ratios(cloud in cloud_strategy(24), alpha in 0.1f64..10.0) {
        prop_assume!(nonzero_rows(&cloud));
        let out = geometry::scale(&cloud, alpha).unwrap();
        for i in 0..cloud.count() {
            let j = (i + 1) % cloud.count();
            let k = (i + 2) % cloud.count();
            let c0 = cosine(cloud.row(i), cloud.row(j)).unwrap();
            prop_assert!((cosine(out.row(i), out.row(j)).unwrap() - c0).abs() <= TOL);
            let dk = distance(cloud.row(i), cloud.row(k));
            prop_assume!(dk > 1e-3);
            let ratio = distance(cloud.row(i), cloud.row(j)) / dk;
            let scaled = distance(out.row(i), out.row(j)) / distance(out.row(i), out.row(k));
            prop_assert!((scaled - ratio).abs() <= TOL);
        }
    }

    #[test]
    fn translation_preserves_distances_and_angles_at_a_point(
        cloud in cloud_strategy(24),
        shift in prop::collection::vec(-10.0f64..10.0, 24),
    ) {
        let d = &shift[..cloud.dim()];
        let out = geometry::translate(&cloud, d).unwrap();
        for i in 0..cloud.count() {
            let j = (i + 1) % cloud.count();
            let k = (i + 2) % cloud.count();
            prop_assert!((distance(out.row(i), out.row(j)) - distance(cloud.row(i), cloud.row(j))).abs() <= TOL);
            let (a0, b0) = (sub(cloud.row(i), cloud.row(k)), sub(cloud.row(j), cloud.row(k)));
            let (a1, b1) = (sub(out.row(i), out.row(k)), sub(out.row(j), out.row(k)));
            let origin = vec![0.0; cloud.dim()];
            if distance(&a0, &origin) < 1e-3 || distance(&b0, &origin) < 1e-3 {
                continue;
            }
            let before = cosine(&a0, &b0).unwrap();
            let after = cosine(&a1, &b1).unwrap();
            prop_assert!((after - before).abs() <= TOL);
        }
    }

    #[test]
    fn planar_rotations_are_valid_and_seeded(dim in 2usize..64, deg in -180.0f64..=180.0, seed in any::<u64>()) {
        let r = random_rotation_in_plane(dim, deg, seed).unwrap();
        prop_assert!(RotationMatrix::new(r.as_matrix().clone()).is_ok());
        prop_assert_eq!(r, random_rotation_in_plane(dim, deg, seed).unwrap());
    }

    #[test]
    fn noiseless_attacks_align_exactly(
        dim in 2usize..10,
        seed in 0u64..1_000,
        order in order_strategy(),
        kind in prop::sample::select(AttackKind::ALL.to_vec()),
    ) {
        let victim = unit_cloud(80, dim, seed);
        let spec = AttackSpec { order, ..AttackSpec::new(kind, seed) };
        let (attacked, _) = attack(&victim, &spec).unwrap();
        let est = align(&attacked, &victim).unwrap();
        prop_assert!(est.alignment_error <= 1e-9);
        prop_assert!((est.rotation.as_matrix().determinant() - 1.0).abs() <= 1e-9);
        let back = apply_alignment(&attacked, &est).unwrap();
        for (a, b) in back.as_slice().iter().zip(victim.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-7);
        }
    }

    #[test]
    fn single_attacks_keep_downstream_geometry(
        dim in 2usize..16,
        seed in 0u64..1_000,
        kind in prop::sample::select(vec![AttackKind::Rotation, AttackKind::Scaling, AttackKind::Translation]),
    ) {
        let cloud = unit_cloud(20, dim, seed);
        let (out, _) = attack(&cloud, &AttackSpec::new(kind, seed)).unwrap();
        for i in 0..cloud.count() {
            let j = (i + 1) % cloud.count();
            if kind != AttackKind::Translation {
                let c0 = cosine(cloud.row(i), cloud.row(j)).unwrap();
                prop_assert!((cosine(out.row(i), out.row(j)).unwrap() - c0).abs() <= TOL);
            }
            if kind != AttackKind::Scaling {
                let d0 = distance(cloud.row(i), cloud.row(j));
                prop_assert!((distance(out.row(i), out.row(j)) - d0).abs() <= TOL);
            }
        }
    }

    #[test]
    fn score_of_a_cloud_with_itself_is_zero(cloud in cloud_strategy(16)) {
        prop_assert_eq!(similarity_score(&cloud, &cloud).unwrap(), 0.0);
    }

    #[test]
    fn p_value_does_not_increase_with_the_gap(
        scores in prop::collection::vec(0.5f64..1.5, 2..8),
        a in 0.0f64..2.0,
        b in 0.0f64..2.0,
    ) {
        let mu = scores.iter().sum::<f64>() / scores.len() as f64;
        let (near, far) = if a <= b { (a, b) } else { (b, a) };
        let sigma_ok = scores.iter().any(|&x| (x - mu).abs() > 1e-9);
        prop_assume!(sigma_ok);
        let p_near = t_test(mu + near, &scores).unwrap().p;
        let p_far = t_test(mu - far, &scores).unwrap().p;
        prop_assert!(p_far <= p_near * (1.0 + 1e-12));
        prop_assert!((0.0..=1.0).contains(&p_near));
        prop_assert_eq!(Verdict::from_p(p_far, 1e-3) == Verdict::Stolen, p_far <= 1e-3);
    }

    #[test]
    fn embmarker_distance_flips_under_minus_identity_and_ignores_scale(
        seed in 0u64..1_000,
        alpha in 0.1f64..10.0,
    ) {
        let dim = 8;
        let s0 = unit_cloud(10, dim, seed);
        let s1 = unit_cloud(12, dim, seed + 1);
        let t = random_unit_direction(dim, seed + 2).unwrap();
        let d = distribution_distance(&s0, &s1, &t).unwrap();
        let neg = isoclinic_rotation(dim, 180.0, seed).unwrap();
        let d_rot = distribution_distance(
            &geometry::rotate(&s0, &neg).unwrap(),
            &geometry::rotate(&s1, &neg).unwrap(),
            &t,
        ).unwrap();
        prop_assert!((d_rot + d).abs() <= 1e-12);
        let d_scaled = distribution_distance(
            &geometry::scale(&s0, alpha).unwrap(),
            &geometry::scale(&s1, alpha).unwrap(),
            &t,
        ).unwrap();
        prop_assert!((d_scaled - d).abs() <= 1e-12);
    }

    #[test]
    fn matrix_key_residual_formulas(
        dim in 2usize..24,
        extra in 0usize..4,
        seed in 0u64..1_000,
        alpha in 0.1f64..10.0,
        shift in prop::collection::vec(-10.0f64..10.0, 28),
    ) {
        let key = MatrixKeyScheme::random_rectangular(dim + extra, dim, seed).unwrap();
        let out_dim = key.output_dim();
        let e_o = random_unit_direction(dim, seed).unwrap();
        let scaling = RstParams::new(RotationMatrix::identity(out_dim), alpha, DVector::zeros(out_dim), RstOrder::Rst).unwrap();
        let r = matrixkey_residual(&key, &e_o, &scaling).unwrap();
        prop_assert!((r - (alpha - 1.0).abs()).abs() <= 1e-10);
        let d = DVector::from_column_slice(&shift[..out_dim]);
        let translation = RstParams::new(RotationMatrix::identity(out_dim), 1.0, d.clone(), RstOrder::Rst).unwrap();
        let r = matrixkey_residual(&key, &e_o, &translation).unwrap();
        prop_assert!((r - (key.pinv() * d).norm()).abs() <= 1e-10);
    }
}

#[test]
fn generators_are_bit_identical_for_equal_seeds() {
    assert_eq!(haar_rotation(32, 4).unwrap(), haar_rotation(32, 4).unwrap());
    assert_eq!(
        random_unit_direction(17, 9).unwrap(),
        random_unit_direction(17, 9).unwrap()
    );
    let spec = AttackSpec::new(AttackKind::Mixed, 3);
    let v = unit_cloud(30, 5, 1);
    assert_eq!(attack(&v, &spec).unwrap(), attack(&v, &spec).unwrap());
}
