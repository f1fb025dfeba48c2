#![allow(dead_code)]

use apflow::coefficients::{
    Dissipation, EllipticCoefficients, NonlinearTerm, NonlinearitySpec, ScalarProfile, SpatialProfile,
};
use apflow::process::Model;
use apflow::spectral_field::{Field, Grid};
use apflow::symbols::QuasiPeriodicSignal;

/// `a(τ) = 1 + 0.5 cos τ`, `ν₀ = 0.5`.
pub fn oscillating_a() -> EllipticCoefficients {
    EllipticCoefficients::new(1, vec![QuasiPeriodicSignal::single(1.0, 1.0, 0.5, 0.0).unwrap()], 0.5).unwrap()
}

pub fn damping() -> NonlinearTerm {
    NonlinearTerm::new(QuasiPeriodicSignal::constant(-1.0), SpatialProfile::constant(1.0), ScalarProfile::Identity)
}

/// `F = −u + cos(τ)·sech(x)·tanh(u)`.
pub fn standard_nonlinearity() -> NonlinearitySpec {
    NonlinearitySpec::new(vec![
        damping(),
        NonlinearTerm::new(
            QuasiPeriodicSignal::single(0.0, 1.0, 1.0, 0.0).unwrap(),
            SpatialProfile::sech(1.0),
            ScalarProfile::Tanh,
        ),
    ])
}

/// `F = −u + cos(τ)·sech(x)`.
pub fn forced_damping() -> NonlinearitySpec {
    NonlinearitySpec::new(vec![
        damping(),
        NonlinearTerm::new(
            QuasiPeriodicSignal::single(0.0, 1.0, 1.0, 0.0).unwrap(),
            SpatialProfile::sech(1.0),
            ScalarProfile::One,
        ),
    ])
}

pub fn linear_damping() -> NonlinearitySpec {
    NonlinearitySpec::new(vec![damping()]).with_dissipation(Dissipation::linear(1.0))
}

pub fn standard_model(n: usize, half_width: f64) -> Model {
    Model::new(Grid::new(1, half_width, n).unwrap(), oscillating_a(), standard_nonlinearity()).unwrap()
}

pub fn gaussian(grid: Grid) -> Field {
    Field::from_fn(grid, |x| (-x[0] * x[0]).exp())
}
