#![allow(dead_code)]

use lossmodes::canonical::{build_canonical, CanonicalSystem};
use lossmodes::linalg::{rank_cutoff, spectral_norm, sym_eigen};
use lossmodes::{CMat, System};
use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let m = cmat(rng, n, n);
    (&m + m.adjoint()) * Complex::new(0.5, 0.0)
}

pub fn unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    cmat(rng, n, n).qr().q()
}

pub fn canonical(sys: &System) -> CanonicalSystem<f64> {
    build_canonical(sys, 1e-10).expect("canonical form")
}

/// Smallest nonzero eigenvalue of `B`, read off the symmetric eigenproblem.
pub fn b_min(can: &CanonicalSystem<f64>) -> f64 {
    let (v, _) = sym_eigen(&can.b_mat);
    let top = v.iter().cloned().fold(0.0, f64::max);
    let cut = rank_cutoff(top, v.len(), v.len(), None);
    v.iter().cloned().filter(|x| *x > cut).fold(f64::INFINITY, f64::min)
}

/// `2 ‖Ω‖ / b_min`.
pub fn beta_star(can: &CanonicalSystem<f64>) -> f64 {
    2.0 * spectral_norm(&can.omega) / b_min(can)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
