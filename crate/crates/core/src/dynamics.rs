//! Time integration of the equations of motion, energy balance along
//! trajectories, and virial and equipartition diagnostics.

use nalgebra::{Complex, ComplexField};
use serde::Serialize;

use crate::canonical::build_canonical;
use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::model::{energies, EnergyBreakdown, LagrangianSystem, State};
use crate::pencil::PencilEig;
use crate::scalar::{ci, hdot, to_complex, CMat, CVec, Scalar};
use crate::spectral::is_overdamped;
use crate::tolerances::Tolerances;

/// Uniformly sampled solution. `virial[k] = (αQ̇, Q)` at `times[k]`.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Scalar> {
    pub times: Vec<T>,
    pub states: Vec<State<T>>,
    pub energies: Vec<EnergyBreakdown<T>>,
    pub virial: Vec<Complex<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Spacing of the sample grid.
    pub fn spacing(&self) -> T {
        if self.times.len() < 2 {
            T::zero()
        } else {
            self.times[1] - self.times[0]
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions<T: Scalar> {
    pub t_end: T,
    /// Largest internal step; every multiple of `dt_max` is hit exactly.
    pub dt_max: T,
    /// Record every `stride`-th multiple of `dt_max`.
    pub stride: usize,
    pub rtol: f64,
    pub atol: f64,
}

impl<T: Scalar> IntegrateOptions<T> {
    pub fn new(t_end: T, dt_max: T, tol: &Tolerances) -> Self {
        Self { t_end, dt_max, stride: 1, rtol: tol.integrator_rtol, atol: tol.integrator_atol }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }
}

const MAX_STEPS: usize = 50_000_000;

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// First-order right-hand side for `y = [Q; Q̇]`.
struct Rhs<T: Scalar> {
    n: usize,
    alpha_inv: CMat<T>,
    damp: CMat<T>,
    eta: CMat<T>,
}

impl<T: Scalar> Rhs<T> {
    fn new(sys: &LagrangianSystem<T>) -> Result<Self> {
        let chol = sys
            .alpha
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPsd { min_eigenvalue: f64::NAN })?;
        let damp = &sys.theta * T::lit(2.0) + &sys.r_mat * sys.beta;
        Ok(Self { n: sys.n(), alpha_inv: to_complex(&chol.inverse()), damp: to_complex(&damp), eta: to_complex(&sys.eta) })
    }

    fn eval(&self, y: &CVec<T>, force: &CVec<T>) -> CVec<T> {
        let n = self.n;
        let q = y.rows(0, n);
        let qd = y.rows(n, n);
        let acc = &self.alpha_inv * (force - &self.damp * qd - &self.eta * q);
        let mut out = CVec::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&qd);
        out.rows_mut(n, n).copy_from(&acc);
        out
    }
}

fn sample<T: Scalar>(sys: &LagrangianSystem<T>, y: &CVec<T>, force: &CVec<T>) -> Result<(State<T>, EnergyBreakdown<T>, Complex<T>)> {
    let n = sys.n();
    let s = State::new(y.rows(0, n).into_owned(), y.rows(n, n).into_owned());
    let e = energies(sys, &s, force)?;
    let g = hdot(&(to_complex(&sys.alpha) * &s.qdot), &s.q);
    Ok((s, e, g))
}

/// Adaptive Dormand–Prince integration of the equations of motion at loss `beta`.
pub fn integrate<T: Scalar, F: Fn(T) -> CVec<T>>(
    sys: &LagrangianSystem<T>,
    beta: T,
    initial: &State<T>,
    force: F,
    opts: &IntegrateOptions<T>,
) -> Result<Trajectory<T>> {
    if !(opts.t_end > T::zero()) || !(opts.dt_max > T::zero()) {
        return Err(Error::Parameter("t_end and dt_max must be positive".into()));
    }
    let sys = sys.with_beta(beta);
    let n = sys.n();
    crate::model::check_vec(&initial.q, n, "initial coordinates")?;
    crate::model::check_vec(&initial.qdot, n, "initial velocities")?;
    let rhs = Rhs::new(&sys)?;
    let mut y = CVec::zeros(2 * n);
    y.rows_mut(0, n).copy_from(&initial.q);
    y.rows_mut(n, n).copy_from(&initial.qdot);

    // A final interval shorter than a tiny fraction of dt_max is merged into the previous one.
    let ratio = (opts.t_end / opts.dt_max).as_f64();
    let n_grid = ((ratio * (1.0 - 1e-9)).ceil() as usize).max(1);
    let grid = |k: usize| -> T {
        if k >= n_grid {
            opts.t_end
        } else {
            opts.dt_max * T::lit(k as f64)
        }
    };
    let mut traj = Trajectory { times: Vec::new(), states: Vec::new(), energies: Vec::new(), virial: Vec::new() };
    let push = |traj: &mut Trajectory<T>, t: T, y: &CVec<T>| -> Result<()> {
        let (s, e, g) = sample(&sys, y, &force(t))?;
        traj.times.push(t);
        traj.states.push(s);
        traj.energies.push(e);
        traj.virial.push(g);
        Ok(())
    };
    push(&mut traj, T::zero(), &y)?;

    let rtol = T::lit(opts.rtol);
    let atol = T::lit(opts.atol);
    let mut t = T::zero();
    let mut h = opts.dt_max;
    let mut k0 = rhs.eval(&y, &force(t));
    let mut steps = 0usize;
    for k in 1..=n_grid {
        let target = grid(k);
        while t < target {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::Stiff { t: t.as_f64(), step: h.as_f64() });
            }
            let last = target - t <= h * T::lit(1.01);
            let step = if last { target - t } else { h };
            if step <= T::lit(1e-14) * T::one().max(t.abs()) {
                return Err(Error::Stiff { t: t.as_f64(), step: step.as_f64() });
            }
            let mut ks: Vec<CVec<T>> = Vec::with_capacity(7);
            ks.push(k0.clone());
            for i in 1..7 {
                let mut yi = y.clone();
                for (j, kj) in ks.iter().enumerate() {
                    if A[i][j] != 0.0 {
                        yi += kj * Complex::from(step * T::lit(A[i][j]));
                    }
                }
                ks.push(rhs.eval(&yi, &force(t + step * T::lit(C[i]))));
            }
            let mut y5 = y.clone();
            let mut err = CVec::zeros(2 * n);
            for i in 0..7 {
                y5 += &ks[i] * Complex::from(step * T::lit(B5[i]));
                err += &ks[i] * Complex::from(step * T::lit(B5[i] - B4[i]));
            }
            let mut enorm = T::zero();
            for i in 0..2 * n {
                let sc = atol + rtol * y[i].modulus().max(y5[i].modulus());
                enorm = enorm.max(err[i].modulus() / sc);
            }
            if enorm <= T::one() {
                t = if last { target } else { t + step };
                y = y5;
                // First-same-as-last: the seventh stage is f at the accepted point.
                k0 = ks.pop().unwrap();
            }
            let fac = if enorm == T::zero() {
                T::lit(5.0)
            } else {
                (T::lit(0.9) * enorm.powf(T::lit(-0.2))).min(T::lit(5.0)).max(T::lit(0.2))
            };
            if !last || enorm > T::one() {
                h = (step * fac).min(opts.dt_max);
            }
        }
        if k % opts.stride == 0 || k == n_grid {
            push(&mut traj, t, &y)?;
        }
    }
    Ok(traj)
}

/// Fourth-order central difference of `f` at interior index `i` with spacing `h`.
fn d4<T: Scalar>(f: &[T], i: usize, h: T) -> T {
    (f[i - 2] - T::lit(8.0) * f[i - 1] + T::lit(8.0) * f[i + 1] - f[i + 2]) / (T::lit(12.0) * h)
}

fn check_uniform<T: Scalar>(times: &[T]) -> Result<T> {
    if times.len() < 5 {
        return Err(Error::Sampling(format!("{} samples; at least 5 are needed", times.len())));
    }
    let h = times[1] - times[0];
    let bad = times.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > T::lit(1e-9) * h.max(T::one()));
    // The final sample may be shortened to land on t_end; drop it from the check.
    let core = &times[..times.len() - 1];
    if bad && core.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > T::lit(1e-9) * h.max(T::one())) {
        return Err(Error::Sampling("samples are not uniformly spaced".into()));
    }
    Ok(h)
}

/// Number of leading samples on the uniform grid; a shortened final
/// interval is excluded.
fn uniform_len<T: Scalar>(times: &[T], h: T) -> usize {
    let m = times.len();
    if m >= 2 && ((times[m - 1] - times[m - 2]) - h).abs() > T::lit(1e-9) * h {
        m - 1
    } else {
        m
    }
}

/// Characteristic rate `‖A(β)‖`.
pub fn characteristic_rate<T: Scalar>(sys: &LagrangianSystem<T>, tol: &Tolerances) -> Result<T> {
    let can = build_canonical(sys, tol.validation)?;
    Ok(spectral_norm(&can.operator(sys.beta)))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BalanceReport {
    /// `max |dH/dt + 2R − Re(Q̇,F)| / (‖A‖ max H + max |Re(Q̇,F)|)` over interior samples.
    pub max_residual: f64,
    /// Largest increase of `H` between consecutive samples, relative to `max H`.
    pub max_energy_increase: f64,
}

/// Checks `dH/dt = −2R + Re(Q̇,F)` by fourth-order central differences.
pub fn energy_balance_residual<T: Scalar, F: Fn(T) -> CVec<T>>(
    sys: &LagrangianSystem<T>,
    beta: T,
    traj: &Trajectory<T>,
    force: F,
    tol: &Tolerances,
) -> Result<BalanceReport> {
    let h = check_uniform(&traj.times)?;
    let sys = sys.with_beta(beta);
    let rate = characteristic_rate(&sys, tol)?;
    if rate > T::zero() && h * rate > T::lit(2.0 * std::f64::consts::PI / 5.0) {
        return Err(Error::Sampling(format!(
            "spacing {:e} gives fewer than 5 samples per characteristic period",
            h.as_f64()
        )));
    }
    let m = traj.len();
    let uniform = uniform_len(&traj.times, h);
    if uniform < 5 {
        return Err(Error::Sampling("too few uniform samples".into()));
    }
    let mut energy = Vec::with_capacity(m);
    let mut power = Vec::with_capacity(m);
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let e = energies(&sys, s, &force(*t))?;
        energy.push(e.total);
        power.push(e.work_rate - e.dissipated_power);
    }
    let hmax = energy.iter().copied().fold(T::zero(), |a, b| a.max(b.abs()));
    let wmax = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(t, s)| hdot(&s.qdot, &force(*t)).re.abs())
        .fold(T::zero(), |a, b| a.max(b));
    let scale = (rate * hmax + wmax).max(T::MIN_POSITIVE);
    let mut worst = T::zero();
    for i in 2..uniform - 2 {
        worst = worst.max((d4(&energy, i, h) - power[i]).abs());
    }
    let max_increase = energy.windows(2).map(|w| w[1] - w[0]).fold(T::zero(), |a, b| a.max(b));
    Ok(BalanceReport {
        max_residual: (worst / scale).as_f64(),
        max_energy_increase: (max_increase / hmax.max(T::MIN_POSITIVE)).as_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VirialBranch {
    /// `Re ζ ≠ 0`: `T = V − (Im ζ/Re ζ)² Re(Q̇,θQ)`.
    Oscillatory,
    /// `Re ζ = 0`, `ζ = 0`.
    ZeroFrequency,
    /// `Re ζ = 0`, `ζ ≠ 0` and `(Q̇,θQ) = 0`.
    ThetaMomentVanishes,
    /// `Re ζ = 0`, `ζ ≠ 0` and `(Q̇,θQ) ≠ 0` within tolerance.
    Undecided,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct VirialReport {
    pub kinetic: f64,
    pub potential: f64,
    pub lhs: f64,
    /// `V − (Im ζ/Re ζ)² Re(Q̇,θQ)`; only meaningful when `Re ζ ≠ 0`.
    pub rhs: f64,
    /// Relative to `|T| + |V|`.
    pub residual: f64,
    pub equipartition: bool,
    pub theta_moment: f64,
    /// `|(Q̇,θQ)|` relative to `‖Q̇‖‖θ‖‖Q‖`.
    pub theta_moment_abs: f64,
    pub branch: VirialBranch,
}

/// Virial identity at `t = 0` for the eigenmode `Q = q e^{−iζt}`.
pub fn virial_check<T: Scalar>(
    sys: &LagrangianSystem<T>,
    pe: &PencilEig<T>,
    beta: T,
    tol: &Tolerances,
) -> Result<VirialReport> {
    let res = pe.relative_residual(sys, beta);
    if !(res <= T::lit(tol.residual)) {
        return Err(Error::Precondition(format!("pencil residual {:e} too large", res.as_f64())));
    }
    let n = sys.n();
    let zeta = pe.zeta;
    let s = State::new(pe.q.clone(), &pe.q * (-ci::<T>() * zeta));
    let e = energies(&sys.with_beta(beta), &s, &CVec::zeros(n))?;
    let moment = hdot(&s.qdot, &(to_complex(&sys.theta) * &s.q));
    let (t, v) = (e.kinetic, e.potential);
    let denom = (t.abs() + v.abs()).max(T::MIN_POSITIVE);
    let theta_norm = crate::linalg::spectral_norm_real(&sys.theta);
    let moment_scale = (s.qdot.norm() * s.q.norm() * theta_norm).max(T::MIN_POSITIVE);
    let theta_moment_abs = (moment.modulus() / moment_scale).as_f64();
    let oscillatory = !is_overdamped(zeta, tol.overdamped);
    let (rhs, residual, branch) = if oscillatory {
        let ratio = zeta.im / zeta.re;
        let rhs = v - ratio * ratio * moment.re;
        (rhs.as_f64(), ((t - rhs).abs() / denom).as_f64(), VirialBranch::Oscillatory)
    } else {
        let zscale = T::one().max(sys.scale());
        let branch = if zeta.modulus() <= T::lit(tol.residual) * zscale {
            VirialBranch::ZeroFrequency
        } else if theta_norm == T::zero() || theta_moment_abs <= tol.residual {
            VirialBranch::ThetaMomentVanishes
        } else {
            VirialBranch::Undecided
        };
        (f64::NAN, f64::NAN, branch)
    };
    let equipartition = !sys.is_gyroscopic() && oscillatory && (t - v).abs() <= T::lit(1e-8) * denom;
    Ok(VirialReport {
        kinetic: t.as_f64(),
        potential: v.as_f64(),
        lhs: t.as_f64(),
        rhs,
        residual,
        equipartition,
        theta_moment: moment.re.as_f64(),
        theta_moment_abs,
        branch,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TimeAverages {
    pub window: f64,
    /// `⟨T − V⟩`, trapezoidal.
    pub avg_l: f64,
    /// `⟨T⟩ − ⟨V⟩` from separate averages.
    pub avg_t_minus_v: f64,
    /// `(Re G(T_w) − Re G(0)) / (2 T_w)`, the exact average of `½ d Re G/dt`.
    pub avg_dg_dt: f64,
    /// `max |L − ½ d Re G/dt|` at interior samples, relative to `max H`.
    pub pointwise_residual: f64,
    pub initial_energy: f64,
}

/// Time averages of the Lagrangian and the virial over `[0, window]` for an
/// unforced conservative trajectory.
pub fn time_average_virial<T: Scalar>(sys: &LagrangianSystem<T>, traj: &Trajectory<T>, window: T) -> Result<TimeAverages> {
    if sys.beta != T::zero() {
        return Err(Error::Inapplicable(
            "the time-averaged virial theorem presumes bounded conservative motion (beta = 0)".into(),
        ));
    }
    let h = check_uniform(&traj.times)?;
    let m = traj.times.iter().take_while(|t| **t <= window + T::lit(1e-9) * window).count();
    if m < 5 {
        return Err(Error::Sampling("window holds fewer than 5 samples".into()));
    }
    let tw = traj.times[m - 1];
    if tw <= T::zero() {
        return Err(Error::Sampling("empty averaging window".into()));
    }
    let trap = |f: &dyn Fn(usize) -> T| -> T {
        let mut acc = T::zero();
        for i in 0..m - 1 {
            acc += (f(i) + f(i + 1)) * T::lit(0.5) * (traj.times[i + 1] - traj.times[i]);
        }
        acc / tw
    };
    let e = &traj.energies;
    let avg_l = trap(&|i| e[i].kinetic - e[i].potential);
    let avg_t = trap(&|i| e[i].kinetic);
    let avg_v = trap(&|i| e[i].potential);
    let avg_dg = (traj.virial[m - 1].re - traj.virial[0].re) / (T::lit(2.0) * tw);
    let g: Vec<T> = traj.virial[..m].iter().map(|z| z.re).collect();
    let hmax = e[..m].iter().fold(T::zero(), |a, b| a.max(b.total.abs())).max(T::MIN_POSITIVE);
    let mut worst = T::zero();
    for i in 2..uniform_len(&traj.times[..m], h).saturating_sub(2) {
        let l = e[i].kinetic - e[i].potential;
        worst = worst.max((l - T::lit(0.5) * d4(&g, i, h)).abs());
    }
    Ok(TimeAverages {
        window: tw.as_f64(),
        avg_l: avg_l.as_f64(),
        avg_t_minus_v: (avg_t - avg_v).as_f64(),
        avg_dg_dt: avg_dg.as_f64(),
        pointwise_residual: (worst / hmax).as_f64(),
        initial_energy: e[0].total.as_f64(),
    })
}

/// Least-squares slope of `−ln ‖v(t)‖² = −ln 2H(t)` over samples in `[t0, t1]`.
pub fn fitted_decay_rate<T: Scalar>(traj: &Trajectory<T>, t0: T, t1: T) -> Result<f64> {
    let pts: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.energies)
        .filter(|(t, e)| **t >= t0 && **t <= t1 && e.total > T::zero())
        .map(|(t, e)| (t.as_f64(), (2.0 * e.total.as_f64()).ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Sampling("decay fit needs at least two samples with positive energy".into()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(-sxy / sxx)
}

/// `|Re ζ| ∫H / ∫2R` over one cycle starting at `t0`.
pub fn energy_quality_factor<T: Scalar>(traj: &Trajectory<T>, re_zeta: T, t0: T) -> Result<f64> {
    let w = re_zeta.abs();
    if w == T::zero() {
        return Err(Error::Precondition("no oscillation: Re zeta = 0".into()));
    }
    let t1 = t0 + T::lit(2.0 * std::f64::consts::PI) / w;
    let idx: Vec<usize> = (0..traj.len()).filter(|&i| traj.times[i] >= t0 && traj.times[i] <= t1).collect();
    if idx.len() < 5 {
        return Err(Error::Sampling("cycle holds fewer than 5 samples".into()));
    }
    let (mut stored, mut lost) = (T::zero(), T::zero());
    for p in idx.windows(2) {
        let dt = traj.times[p[1]] - traj.times[p[0]];
        let (a, b) = (&traj.energies[p[0]], &traj.energies[p[1]]);
        stored += (a.total + b.total) * dt * T::lit(0.5);
        lost += (a.dissipated_power + b.dissipated_power) * dt * T::lit(0.5);
    }
    if lost <= T::zero() {
        return Ok(f64::INFINITY);
    }
    Ok((w * stored / lost).as_f64())
}

/// Initial state of the eigenmode `Q = q e^{−iζt}`.
pub fn eigenmode_state<T: Scalar>(pe: &PencilEig<T>) -> State<T> {
    State::new(pe.q.clone(), &pe.q * (-ci::<T>() * pe.zeta))
}

/// Complex `Q(t) = q e^{−iζt}`.
pub fn eigenmode_at<T: Scalar>(pe: &PencilEig<T>, t: T) -> CVec<T> {
    &pe.q * (-ci::<T>() * pe.zeta * Complex::from(t)).exp()
}
