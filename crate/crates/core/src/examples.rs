//! Worked systems: the two-loop circuit, the damped oscillator, and seeded
//! random instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::numerical_rank_real;
use crate::model::{LagrangianSystem, State};
use crate::scalar::{cr, CVec, RMat, Scalar};

/// Inductances `l1`, `l2`, capacitances `c1`, `c2`, `c12`, resistance `r2`
/// and resistance scale `ell`. `c12 = ∞` removes the coupling capacitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub l1: f64,
    pub l2: f64,
    pub c1: f64,
    pub c2: f64,
    pub c12: f64,
    pub r2: f64,
    pub ell: f64,
}

impl CircuitParams {
    pub fn unit(r2: f64) -> Self {
        Self { l1: 1.0, l2: 1.0, c1: 1.0, c2: 1.0, c12: 1.0, r2, ell: 1.0 }
    }

    /// `R₂ / ℓ`.
    pub fn beta(&self) -> f64 {
        self.r2 / self.ell
    }

    fn check(&self) -> Result<()> {
        let positive = [("l1", self.l1), ("l2", self.l2), ("c1", self.c1), ("c2", self.c2), ("ell", self.ell)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.c12 > 0.0) {
            return Err(Error::Parameter(format!("c12 must be positive, got {}", self.c12)));
        }
        if !(self.r2.is_finite() && self.r2 >= 0.0) {
            return Err(Error::Parameter(format!("r2 must be nonnegative and finite, got {}", self.r2)));
        }
        Ok(())
    }
}

/// `α = diag(L₁, L₂)`, `θ = 0`, `R = diag(0, ℓ)`, `β = R₂/ℓ`, and the
/// capacitance network in `η`.
pub fn build_circuit<T: Scalar>(p: &CircuitParams) -> Result<LagrangianSystem<T>> {
    p.check()?;
    let k12 = 1.0 / p.c12;
    let l = T::lit;
    let alpha = RMat::from_row_slice(2, 2, &[l(p.l1), T::zero(), T::zero(), l(p.l2)]);
    let eta = RMat::from_row_slice(2, 2, &[l(1.0 / p.c1 + k12), l(-k12), l(-k12), l(1.0 / p.c2 + k12)]);
    let r = RMat::from_row_slice(2, 2, &[T::zero(), T::zero(), T::zero(), l(p.ell)]);
    LagrangianSystem::new(alpha, RMat::zeros(2, 2), eta, r, l(p.beta()))
}

/// Unit mass, unit spring and unit damper, `β = 0`.
pub fn build_damped_oscillator<T: Scalar>() -> LagrangianSystem<T> {
    let one = RMat::from_element(1, 1, T::one());
    LagrangianSystem::new(one.clone(), RMat::zeros(1, 1), one.clone(), one, T::zero())
        .expect("scalar oscillator is well formed")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSystemOptions {
    /// Rank of `η`; `None` means `n`.
    pub eta_rank: Option<usize>,
    /// Redraw until `Ker η ∩ Ker R = {0}`.
    pub require_nondegenerate: bool,
    pub beta: f64,
    pub max_attempts: usize,
}

impl Default for RandomSystemOptions {
    fn default() -> Self {
        Self { eta_rank: None, require_nondegenerate: false, beta: 0.0, max_attempts: 100 }
    }
}

#[derive(Debug, Clone)]
pub struct RandomSystem<T: Scalar> {
    pub system: LagrangianSystem<T>,
    pub nondegenerate: bool,
}

fn uniform_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> RMat<f64> {
    RMat::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn cast<T: Scalar>(m: &RMat<f64>) -> RMat<T> {
    m.map(T::lit)
}

/// Seeded random system with `α = GᵀG + nI`, `η = HᵀH`, `R` of exact rank
/// `n_r` and, when `gyro`, a random skew `θ`.
pub fn random_system<T: Scalar>(n: usize, n_r: usize, gyro: bool, seed: u64) -> Result<RandomSystem<T>> {
    random_system_with(n, n_r, gyro, seed, &RandomSystemOptions::default())
}

pub fn random_system_with<T: Scalar>(
    n: usize,
    n_r: usize,
    gyro: bool,
    seed: u64,
    opts: &RandomSystemOptions,
) -> Result<RandomSystem<T>> {
    if n == 0 || n_r == 0 || n_r > n {
        return Err(Error::Parameter(format!("need 1 <= n_r <= n, got n = {n}, n_r = {n_r}")));
    }
    if gyro && n < 2 {
        return Err(Error::Parameter("a nonzero skew-symmetric theta needs n >= 2".into()));
    }
    let eta_rank = opts.eta_rank.unwrap_or(n);
    if eta_rank > n {
        return Err(Error::Parameter(format!("eta rank {eta_rank} exceeds n = {n}")));
    }
    if opts.require_nondegenerate && eta_rank + n_r < n {
        return Err(Error::Parameter(format!(
            "rank eta + rank R = {} < n = {n}; Ker eta ∩ Ker R cannot be trivial",
            eta_rank + n_r
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..opts.max_attempts.max(1) {
        let g = uniform_mat(&mut rng, n, n);
        let alpha = g.transpose() * &g + RMat::identity(n, n) * n as f64;
        let h = uniform_mat(&mut rng, eta_rank, n);
        let eta = h.transpose() * &h;
        let u = uniform_mat(&mut rng, n, n_r);
        let r = &u * u.transpose();
        let theta = if gyro {
            let s = uniform_mat(&mut rng, n, n);
            &s - s.transpose()
        } else {
            RMat::zeros(n, n)
        };
        if numerical_rank_real(&r, None) != n_r || numerical_rank_real(&eta, None) != eta_rank {
            continue;
        }
        if gyro && theta.amax() == 0.0 {
            continue;
        }
        let nondegenerate = numerical_rank_real(&(&eta + &r), None) == n;
        if opts.require_nondegenerate && !nondegenerate {
            continue;
        }
        let system = LagrangianSystem::new(cast(&alpha), cast(&theta), cast(&eta), cast(&r), T::lit(opts.beta))?;
        return Ok(RandomSystem { system, nondegenerate });
    }
    Err(Error::Parameter(format!("no admissible system after {} attempts", opts.max_attempts)))
}

/// Seeded real initial state with entries uniform in `[-1, 1]`.
pub fn random_state<T: Scalar>(n: usize, seed: u64) -> State<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || CVec::from_fn(n, |_, _| cr(T::lit(rng.gen_range(-1.0..1.0))));
    let q = draw();
    State::new(q, draw())
}
