#![allow(dead_code)]

use num_complex::Complex64;
use passfl::{Scenario, SystemParams};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn cgauss<R: Rng>(rng: &mut R, scale: f64) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(re * scale, im * scale)
}

/// Reference physics with a custom transmit power.
pub fn params_dbm(power_dbm: f64) -> SystemParams {
    SystemParams::new(5e9, 1.4, 1e-12, 1e-3 * 10f64.powf(power_dbm / 10.0), 1e6, 32.0, None).unwrap()
}

pub fn scenario(edge: f64, elements: usize, seed: u64) -> Scenario {
    Scenario::random(edge, 5.0, elements, None, &[500; 8], seed).unwrap()
}

/// Random positive weights summing to one.
pub fn simplex<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| 0.1 + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}
