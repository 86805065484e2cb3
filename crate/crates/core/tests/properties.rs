use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use unimetric::abelian::{abelian_frame_at, AbelianProfiles, Grid};
use unimetric::adhm::adhm_frame_raw;
use unimetric::algebra::{haar_frame, orthonormality_defect, projector_defects, stack_frame, HermitianBasis};
use unimetric::metrics::DampingExponents;
use unimetric::nr::{nr_frame_raw, NrSpec};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn haar_frames_are_orthonormal(seed in any::<u64>(), m in 1usize..9, k in 0usize..8) {
        let n = 1 + k % m;
        let u = haar_frame(m, n, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(orthonormality_defect(u.matrix()) < 1e-12);
        let (idem, herm, tr) = projector_defects(&u.projector());
        prop_assert!(idem < 1e-12 && herm < 1e-12 && (tr - n as f64).abs() < 1e-12);
    }

    #[test]
    fn stacking_preserves_orthonormality(seed in any::<u64>(), copies in 1usize..5) {
        let u = haar_frame(4, 2, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(orthonormality_defect(&stack_frame(u.matrix(), copies)) < 1e-12);
    }

    #[test]
    fn adhm_frame_is_orthonormal(
        x in prop::array::uniform4(-50.0f64..50.0),
        a in prop::array::uniform4(-5.0f64..5.0),
        rho in 0.05f64..20.0,
    ) {
        let t = [a[0], a[1], a[2], a[3], rho];
        prop_assert!(orthonormality_defect(&adhm_frame_raw(&x, &t)) < 1e-12);
    }

    #[test]
    fn abelian_frame_has_unit_norm(
        x in prop::collection::vec(-20.0f64..20.0, 3),
        theta in prop::collection::vec(-100.0f64..100.0, 2),
        theta_d in -100.0f64..100.0,
    ) {
        let u = abelian_frame_at(&AbelianProfiles::default_for(3).unwrap(), &x, &theta, theta_d).unwrap();
        prop_assert!(orthonormality_defect(&u) < 1e-14);
    }

    #[test]
    fn nr_frame_is_orthonormal(lambda in prop::collection::vec(-3.0f64..3.0, 2), x in prop::collection::vec(-2.0f64..2.0, 2)) {
        let basis = HermitianBasis::shifted_gell_mann(1).unwrap();
        let samples = vec![vec![vec![3.0, 3.0]], vec![vec![-3.0, -3.0]]];
        let spec = NrSpec::fit(basis, 2, 2.0, &samples).unwrap();
        let u = nr_frame_raw(&vec![lambda], &x, &spec).unwrap();
        prop_assert!(orthonormality_defect(&u) < 1e-12);
    }

    #[test]
    fn grid_indexing_round_trips(points in prop::collection::vec(3usize..9, 1..4), pick in any::<prop::sample::Index>()) {
        let d = points.len();
        let grid = Grid::new(vec![-1.0; d], vec![1.0; d], points).unwrap();
        let flat = pick.index(grid.len());
        let idx = grid.multi_index(flat);
        let back: usize = idx.iter().enumerate().map(|(mu, k)| k * grid.stride(mu)).sum();
        prop_assert_eq!(back, flat);
        let p = grid.point(flat);
        for mu in 0..d {
            prop_assert!((p[mu] - grid.coord(mu, idx[mu])).abs() < 1e-15);
        }
    }

    #[test]
    fn damping_exponents_reject_zero(exps in prop::collection::vec(0u32..4, 0..5)) {
        let ok = DampingExponents::new(exps.clone()).is_ok();
        prop_assert_eq!(ok, !exps.is_empty() && !exps.contains(&0));
    }
}
