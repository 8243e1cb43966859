use proptest::prelude::*;

use riskeig::discretize::{assemble_operator, GridDomain, MarkovPolicy};
use riskeig::eigen::{principal_eigenpair, EigenPair};
use riskeig::model::{Atom, JumpKernel, ModelSpec};
use riskeig::simulate::{simulate_path, Control};
use riskeig::stats::{log_sum_exp, pairwise_sum};

#[derive(Debug, Clone)]
struct Params {
    p: f64,
    q: f64,
    a: f64,
    c0: f64,
    c1: f64,
    atoms: Vec<(f64, f64)>,
}

fn params() -> impl Strategy<Value = Params> {
    (-1.0..1.0, -2.0..0.5, 0.2..1.5, -1.0..1.0, -1.0..1.0, prop::collection::vec((-0.8..0.8, 0.1..1.5), 0..3))
        .prop_map(|(p, q, a, c0, c1, atoms)| Params { p, q, a, c0, c1, atoms })
}

fn model(pr: &Params) -> ModelSpec {
    let Params { p, q, a, c0, c1, .. } = pr.clone();
    let mut b = ModelSpec::builder(1)
        .drift(move |x, _, o| o[0] = p + q * x[0])
        .constant_diffusion(a)
        .cost(move |x, _| c0 + c1 * (2.0 * x[0]).sin());
    if !pr.atoms.is_empty() {
        let atoms = pr.atoms.iter().map(|&(m, w)| Atom { mark: vec![m], weight: w }).collect();
        b = b.kernel(JumpKernel::translation(atoms).unwrap());
    }
    b.build().unwrap()
}

fn solve(model: &ModelSpec, grid: &GridDomain) -> EigenPair {
    let op = assemble_operator(model, grid, &MarkovPolicy::constant(grid, 0), true).unwrap();
    principal_eigenpair(&op, 1e-10, 10_000).unwrap()
}

fn grid(half: f64) -> GridDomain {
    GridDomain::with_spacing(&[(-half, half)], &[0.05]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn assembled_operators_are_metzler(pr in params()) {
        let g = grid(1.0);
        let op = assemble_operator(&model(&pr), &g, &MarkovPolicy::constant(&g, 0), false).unwrap();
        for i in 0..op.n() {
            let (cols, vals) = op.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                prop_assert!(c == i || v >= 0.0);
            }
            // without cost, mass can only leak through the boundary
            prop_assert!(op.row_sum(i) <= 1e-9);
        }
    }

    #[test]
    fn eigenvector_positive_and_anchored(pr in params()) {
        let g = grid(1.0);
        let pair = solve(&model(&pr), &g);
        prop_assert!(pair.psi.iter().all(|&v| v > 0.0));
        prop_assert!((pair.psi[g.anchor()] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cost_shift_moves_eigenvalue(pr in params(), k in -5.0f64..5.0) {
        let g = grid(1.0);
        let m = model(&pr);
        let base = solve(&m, &g);
        let shifted = solve(&m.shifted_cost(k), &g);
        prop_assert!((shifted.lambda - base.lambda - k).abs() < 1e-9);
    }

    #[test]
    fn eigenvalue_monotone_in_potential(pr in params(), bump in 0.0f64..2.0, center in -1.0f64..1.0) {
        let g = grid(1.0);
        let m = model(&pr);
        let base = solve(&m, &g).lambda;
        let c0 = pr.c0;
        let c1 = pr.c1;
        let raised = m.with_cost(move |x, _| c0 + c1 * (2.0 * x[0]).sin() + bump * (-(x[0] - center).powi(2)).exp());
        prop_assert!(solve(&raised, &g).lambda >= base - 1e-12);
    }

    #[test]
    fn eigenvalue_monotone_in_domain(pr in params()) {
        let m = model(&pr);
        prop_assert!(solve(&m, &grid(1.5)).lambda > solve(&m, &grid(1.0)).lambda);
    }

    #[test]
    fn paths_reproducible(pr in params(), seed in any::<u64>()) {
        let m = model(&pr);
        let a = simulate_path(&m, &Control::Constant(0), &[0.1], 1.0, 0.01, seed).unwrap();
        let b = simulate_path(&m, &Control::Constant(0), &[0.1], 1.0, 0.01, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn log_sum_exp_is_stable(values in prop::collection::vec(-50.0f64..50.0, 1..64), offset in -600.0f64..600.0) {
        let shifted: Vec<f64> = values.iter().map(|v| v + offset).collect();
        let naive = values.iter().map(|v| v.exp()).sum::<f64>().ln();
        prop_assert!((log_sum_exp(&shifted) - offset - naive).abs() < 1e-9);
    }

    #[test]
    fn pairwise_sum_matches_sequential(values in prop::collection::vec(-1.0f64..1.0, 0..300)) {
        let seq: f64 = values.iter().sum();
        prop_assert!((pairwise_sum(&values) - seq).abs() < 1e-12);
    }
}
