use proptest::prelude::*;

use bakrylab::discretization::{Field, RadialGrid, WeightedLaplacian};
use bakrylab::geometry::ModelSpace;
use bakrylab::solver::{solve, PdeProblem, SourceTerm};

fn space(kind: u8) -> ModelSpace {
    match kind {
        0 => ModelSpace::euclidean(3).unwrap(),
        1 => ModelSpace::hyperbolic(3, 1.0).unwrap(),
        _ => ModelSpace::gaussian_soliton(3, 0.5).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn heat_flow_stays_within_initial_range(
        kind in 0u8..3,
        values in prop::collection::vec(0.1f64..5.0, 33),
        dt in 1e-3f64..0.5,
    ) {
        let grid = RadialGrid::new(4.0, 33).unwrap();
        let initial = Field::new(values).unwrap();
        let (lo, hi) = (initial.min(), initial.max());
        let p = PdeProblem::new(space(kind), grid, 1.0, SourceTerm::zero(), initial, 1.0, 1.0, dt).unwrap();
        let sol = solve(&p).unwrap();
        prop_assert!(sol.min() >= lo * (1.0 - 1e-12));
        prop_assert!(sol.max() <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn absorption_keeps_solution_positive(
        values in prop::collection::vec(0.5f64..3.0, 33),
        q in -2.0f64..0.0,
        alpha in 1.0f64..3.0,
    ) {
        let grid = RadialGrid::new(4.0, 33).unwrap();
        let initial = Field::new(values).unwrap();
        let hi = initial.max();
        let p = PdeProblem::new(space(0), grid, alpha, SourceTerm::Constant { value: q }, initial, 0.5, 0.5, 1e-2)
            .unwrap();
        let sol = solve(&p).unwrap();
        prop_assert!(sol.min() > 0.0);
        prop_assert!(sol.max() <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn zero_flux_operator_is_symmetric(
        kind in 0u8..3,
        u in prop::collection::vec(-1.0f64..1.0, 65),
        v in prop::collection::vec(-1.0f64..1.0, 65),
    ) {
        let grid = RadialGrid::new(5.0, 65).unwrap();
        let op = WeightedLaplacian::new(&space(kind), &grid).unwrap();
        let a = op.inner_product(&op.apply_neumann(&u).unwrap(), &v).unwrap();
        let b = op.inner_product(&u, &op.apply_neumann(&v).unwrap()).unwrap();
        let scale = op.inner_product(&op.apply_neumann(&u).unwrap(), &op.apply_neumann(&u).unwrap()).unwrap().sqrt()
            * op.inner_product(&v, &v).unwrap().sqrt();
        prop_assert!((a - b).abs() <= 1e-10 * scale.max(1e-300));
    }
}
