use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use zgen::fock::{
    discrete_gaussian, grid_propagator, normal_ordered, sliced_evolution, smatrix_first_order, vacuum_amplitude,
    FockOperator, FockSpace, TimeGrid,
};
use zgen::genfun::{green, smatrix_series, z_series, SeriesOptions};
use zgen::lattice::{build_kernel, propagator, Boundary, ModelSpec};
use zgen::oracle::moment_oracle;

// The symbolic first-order S-matrix, realized with normal-ordered operators,
// against the first-order part of the sliced evolution.
#[test]
fn symbolic_smatrix_matches_operator_first_order() {
    let space = FockSpace::new(12, 1.0).unwrap();
    let grid = TimeGrid::new(0.0, 2.0, 60).unwrap();
    let lambda = 0.01;
    let delta = Arc::new(grid_propagator(&space, &grid).unwrap());
    let options = SeriesOptions { vertex_weights: Some(vec![grid.dt(); grid.steps()]), ..SeriesOptions::default() };
    let orders = smatrix_series(&delta, 1, &options).unwrap();
    let times = grid.times();
    let mut symbolic = FockOperator::new(nalgebra::DMatrix::zeros(space.dim(), space.dim()));
    for (fields, c) in &orders[1].terms {
        let at: Vec<f64> = fields.iter().map(|&k| times[k]).collect();
        symbolic = symbolic.add(&normal_ordered(&space, &at).scale(c * lambda));
    }
    for n in [2, 4] {
        let operator = smatrix_first_order(&space, &grid, lambda, n, 0).unwrap();
        let s = symbolic.element(n, 0);
        assert!((operator - s).norm() < 1e-6 * s.norm(), "n={n}: {operator} vs {s}");
    }
    assert_eq!(symbolic.element(0, 0), Complex64::new(0.0, 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn free_green_functions_match_pairing_sums(
        n in 1usize..=4,
        raw in proptest::collection::vec(0usize..4, 1..=4),
        periodic in any::<bool>(),
    ) {
        let boundary = if periodic { Boundary::Periodic } else { Boundary::Dirichlet };
        let spec = if n == 1 { ModelSpec::point(1.0, 0.1, 0.0) } else { ModelSpec::chain(n, 1.0, 1.0, 0.1, boundary, 0.0) };
        let delta = Arc::new(propagator(&build_kernel(&spec).unwrap()).unwrap());
        let series = z_series(&delta, 0).unwrap().normalize().unwrap();
        let mut points: Vec<usize> = raw.iter().map(|x| x % n).collect();
        points.extend(points.clone());
        let a = green(&series, &points).unwrap().per_order[0];
        let b = moment_oracle(&delta, &points).unwrap();
        prop_assert!((a - b).norm() <= 1e-10 * b.norm().max(1.0));
    }

    // Without interaction the sliced product reproduces the Gaussian on the
    // same grid up to truncation.
    #[test]
    fn free_sliced_evolution_is_the_discrete_gaussian(
        samples in proptest::collection::vec(-0.3f64..0.3, 4..=24),
    ) {
        let space = FockSpace::new(20, 1.0).unwrap();
        let grid = TimeGrid::new(0.0, 3.0, samples.len()).unwrap();
        let u = sliced_evolution(&space, &grid, 0.0, &samples).unwrap();
        let rhs = discrete_gaussian(&space, &grid, &samples).unwrap();
        prop_assert!((vacuum_amplitude(&u) - rhs).norm() < 1e-10);
        prop_assert!(u.unitarity_defect() < 1e-10);
    }
}
