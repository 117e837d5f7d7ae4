//! Fixtures shared by the benchmarks.

use kirchhoff_core::{Field2D, GridSpec, GroundState, MinimizeConfig, PotentialSpec, Problem};

/// Supercritical harmonic problem at `b` with a grid resolving its blow-up scale.
pub fn harmonic_case(b: f64, n: usize) -> (Problem, MinimizeConfig) {
    let gs = GroundState::reference();
    let a = 2.0 * gs.a_star();
    let eps = (b * gs.a_star() / (a - gs.a_star())).sqrt();
    let mut config = MinimizeConfig::new(GridSpec::new(8.0 * eps, n).expect("valid grid"));
    config.init = kirchhoff_core::Init::Gaussian {
        center: [0.0, 0.0],
        sigma: eps,
    };
    config.dt = 0.1 * eps * eps;
    config.dt_max = 1e4;
    (Problem::new(a, b, Some(PotentialSpec::harmonic())), config)
}

/// Unit-mass Gaussian on `grid`.
pub fn gaussian(grid: &GridSpec, sigma: f64) -> Field2D {
    let raw = Field2D::from_fn(grid.clone(), |x, y| {
        (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
    });
    kirchhoff_core::field::normalize(&raw).expect("nonzero field")
}
