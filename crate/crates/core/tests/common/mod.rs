#![allow(dead_code)]

use hoslab_core::operator::OperatorHandle;
use hoslab_core::potential::{eval_potential, PotentialFamily, PotentialFields, PotentialSpec};
use hoslab_core::{rng, Field, Grid, C64};
use std::f64::consts::PI;

pub const L: f64 = 3.0 * PI;

pub struct Model {
    pub grid: Grid,
    pub potential: PotentialFields,
    pub a: OperatorHandle,
    pub b: OperatorHandle,
    pub sum: OperatorHandle,
}

pub fn surrogate(dim: usize, n: usize) -> Model {
    let grid = Grid::new(dim, n, L).unwrap();
    let spec = PotentialSpec::new(PotentialFamily::PeriodicSurrogate { r: 2.0 }, 0.6, 2.0).unwrap();
    let potential = eval_potential(&spec, &grid).unwrap();
    let a = OperatorHandle::bilaplacian(&grid, 1.0).unwrap();
    let b = OperatorHandle::multiplication(potential.value(), 1.0).unwrap();
    let sum = OperatorHandle::sum(&a, &b).unwrap();
    Model { grid, potential, a, b, sum }
}

pub fn random_field(grid: &Grid, seed: u64, task: &str) -> Field {
    let mut s = rng::stream(seed, task);
    Field::new(grid, rng::complex_normal_vec(&mut s, grid.len())).unwrap()
}

pub fn random_real_field(grid: &Grid, seed: u64, task: &str) -> Field {
    let mut s = rng::stream(seed, task);
    Field::from_real(grid, &rng::normal_vec(&mut s, grid.len())).unwrap()
}

pub fn rel(a: &Field, b: &Field) -> f64 {
    (a - b).norm_p(2.0) / b.norm_p(2.0)
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
