//! Shared fixtures for the criterion benchmarks under `benches/`.

use riskeig::discretize::GridDomain;
use riskeig::model::catalog::{CatalogModel, CostSpec};
use riskeig::ModelSpec;

/// Controlled OU with a Gaussian cost bump: two actions, no jumps.
pub fn controlled_ou() -> ModelSpec {
    CatalogModel::new("ou-controlled").with_cost(CostSpec::Gaussian { height: 1.0, width: 1.0 }).build().expect("catalog model")
}

/// Jump-diffusion example with a quadratic cost.
pub fn jump_model(dim: usize) -> ModelSpec {
    let mut cat = CatalogModel::new("ex1.1").with_cost(CostSpec::Quadratic { coef: 0.1 });
    cat.dim = dim;
    cat.build().expect("catalog model")
}

pub fn square(radius: f64, dim: usize, resolution: usize) -> GridDomain {
    GridDomain::centered_box(radius, dim, resolution).expect("grid")
}
