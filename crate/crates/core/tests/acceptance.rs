//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use lossmodes::asymptotics::{asymptotic_spectrum, classify_overdamping, predict_eigenvalues, thresholds};
use lossmodes::dynamics::{
    eigenmode_state, energy_balance_residual, fitted_decay_rate, integrate, virial_check, IntegrateOptions,
};
use lossmodes::examples::{build_circuit, build_damped_oscillator, random_system, random_system_with, CircuitParams, RandomSystemOptions};
use lossmodes::linalg::{match_multisets, numerical_rank, spectral_norm};
use lossmodes::model::{loss_fraction, State};
use lossmodes::pencil::{canonical_to_pencil, det_equivalence, schur_identities};
use lossmodes::spectral::{
    check_symmetry, damping_split_report, dichotomy, eigenvalue_bounds_check, mode_set, projector_algebra,
};
use lossmodes::{CMat, CVec, Tolerances};
use nalgebra::Complex;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn tol() -> Tolerances {
    Tolerances::default()
}

fn xi(beta: f64) -> [Complex<f64>; 2] {
    let d = Complex::new(1.0 - beta * beta / 4.0, 0.0).sqrt();
    let c = Complex::new(0.0, -beta / 2.0);
    [c + d, c - d]
}

fn closed_form_spectrum() -> Outcome {
    let start = Instant::now();
    let sys = build_damped_oscillator::<f64>();
    let can = canonical(&sys);
    let mut worst = 0.0f64;
    for beta in [0.0, 0.5, 1.0, 1.9, 2.0, 2.1, 3.0, 10.0, 100.0] {
        let ms = mode_set(&can.operator(beta), &tol()).map_err(|e| e.to_string())?;
        let m = match_multisets(&ms.values(), &xi(beta), f64::INFINITY);
        let cap = if beta == 2.0 { 1e-6 } else { 1e-10 };
        ensure(m.max_distance <= cap, || format!("beta = {beta}: error {:e} > {cap:e}", m.max_distance))?;
        if beta != 2.0 {
            worst = worst.max(m.max_distance);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 1.0, || format!("runtime {elapsed:.2} s"))?;
    Ok(format!("max error {worst:e} off the critical point, {elapsed:.3} s"))
}

fn spectral_equivalence() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for k in 0..100u64 {
        let gyro = k % 2 == 1;
        let n = r.gen_range(if gyro { 2 } else { 1 }..=6);
        let n_r = r.gen_range(1..=n);
        let sys = random_system::<f64>(n, n_r, gyro, 1000 + k).map_err(|e| e.to_string())?.system;
        let can = canonical(&sys);
        let zeta = Complex::new(r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0));
        let beta = r.gen_range(0.0..5.0);
        let d = det_equivalence(&sys, &can, zeta, beta);
        worst = worst.max(d.relerr);
        ensure(d.relerr <= 1e-8, || format!("case {k}: relerr {:e}", d.relerr))?;
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 5.0, || format!("runtime {elapsed:.2} s"))?;
    Ok(format!("100 triples, max relerr {worst:e}, {elapsed:.3} s"))
}

fn spectral_symmetry() -> Outcome {
    let mut r = rng(3);
    let (mut gap, mut imag, mut pairing) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..100u64 {
        let gyro = k % 2 == 0;
        let n = r.gen_range(if gyro { 2 } else { 1 }..=6);
        let n_r = r.gen_range(1..=n);
        let sys = random_system::<f64>(n, n_r, gyro, 2000 + k).map_err(|e| e.to_string())?.system;
        let can = canonical(&sys);
        let beta = r.gen_range(0.1..5.0);
        let a = can.operator(beta);
        let ms = mode_set(&a, &tol()).map_err(|e| e.to_string())?;
        let s = check_symmetry(&a, &ms, false, &tol());
        ensure(s.mirror_matched, || format!("system {k}: mirror gap {:e}", s.mirror_gap))?;
        ensure(s.conjugate_pairing_residual <= 1e-8, || {
            format!("system {k}: conjugated eigenvector residual {:e}", s.conjugate_pairing_residual)
        })?;
        gap = gap.max(s.mirror_gap);
        pairing = pairing.max(s.conjugate_pairing_residual);

        let a0 = can.operator(0.0);
        let ms0 = mode_set(&a0, &tol()).map_err(|e| e.to_string())?;
        let omega = spectral_norm(&can.omega);
        let im = ms0.values().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        ensure(im <= 1e-8 * omega, || format!("system {k}: |Im| {im:e} at zero loss"))?;
        imag = imag.max(im / omega);
    }
    Ok(format!("100 systems, mirror gap {gap:e}, eigenvector pairing {pairing:e}, lossless |Im|/‖Ω‖ {imag:e}"))
}

struct DichotomyCase {
    n: usize,
    n_r: usize,
    omega_max: f64,
    b_min: f64,
    beta: f64,
    d: lossmodes::spectral::DichotomyResult<f64>,
    algebra: f64,
}

fn dichotomy_cases() -> Result<Vec<DichotomyCase>, String> {
    let mut r = rng(4);
    let mut out = Vec::new();
    for k in 0..50u64 {
        let n = r.gen_range(2..=6);
        let n_r = r.gen_range(1..n);
        let sys = random_system::<f64>(n, n_r, k % 2 == 1, 3000 + k).map_err(|e| e.to_string())?.system;
        let can = canonical(&sys);
        let beta = 3.0 * beta_star(&can);
        let a = can.operator(beta);
        let d = dichotomy(&a, &tol()).map_err(|e| format!("system {k}: {e}"))?;
        let algebra = projector_algebra(&a, &d).max();
        out.push(DichotomyCase { n, n_r, omega_max: spectral_norm(&can.omega), b_min: b_min(&can), beta, d, algebra });
    }
    Ok(out)
}

fn dichotomy_counts() -> Outcome {
    let cases = dichotomy_cases()?;
    let mut worst = 0.0f64;
    for (k, c) in cases.iter().enumerate() {
        ensure(c.d.sigma1.len() == c.n_r && c.d.sigma0.len() == 2 * c.n - c.n_r, || {
            format!("system {k}: |σ1| = {}, |σ0| = {}, N = {}, N_R = {}", c.d.sigma1.len(), c.d.sigma0.len(), c.n, c.n_r)
        })?;
        let sep = c
            .d
            .sigma0
            .iter()
            .flat_map(|a| c.d.sigma1.iter().map(move |b| (a - b).norm()))
            .fold(f64::INFINITY, f64::min);
        ensure(sep > 0.0, || format!("system {k}: σ0 and σ1 intersect"))?;
        ensure(c.algebra <= 1e-8, || format!("system {k}: projector residual {:e}", c.algebra))?;
        ensure(c.d.rank_p1 == c.n_r, || format!("system {k}: rank p1 = {}", c.d.rank_p1))?;
        worst = worst.max(c.algebra);
    }
    Ok(format!("50 systems, max projector residual {worst:e}"))
}

fn damping_bands() -> Outcome {
    let cases = dichotomy_cases()?;
    let mut max_q = 0.0f64;
    for (k, c) in cases.iter().enumerate() {
        let floor = c.beta * c.b_min - c.omega_max;
        for z in &c.d.sigma1 {
            ensure(-z.im >= floor * (1.0 - 1e-12), || format!("system {k}: −Im ζ = {:e} < {floor:e}", -z.im))?;
            let q = -0.5 * z.re.abs() / z.im;
            ensure(q < 0.5, || format!("system {k}: Q = {q}"))?;
            max_q = max_q.max(q);
        }
        let rep = damping_split_report(&c.d, c.omega_max, c.b_min, c.beta);
        ensure(rep.violations.is_empty(), || format!("system {k}: {:?}", rep.violations))?;
    }
    Ok(format!("50 systems, zero violations, largest high-loss Q {max_q:.3e}"))
}

fn complete_overdamping() -> Outcome {
    let mut r = rng(6);
    for k in 0..50u64 {
        let n = r.gen_range(1..=6);
        let sys = random_system::<f64>(n, n, false, 4000 + k).map_err(|e| e.to_string())?.system;
        let can = canonical(&sys);
        let thr = thresholds(&sys, &can, &tol()).map_err(|e| e.to_string())?;
        let ms = mode_set(&can.operator(thr.beta_star), &tol()).map_err(|e| e.to_string())?;
        for z in ms.values() {
            ensure(z.re.abs() <= 1e-7 * z.im.abs().max(1.0), || format!("system {k}: ζ = {z}"))?;
        }
    }
    let sys = build_damped_oscillator::<f64>();
    let can = canonical(&sys);
    let ms = mode_set(&can.operator(1.0), &tol()).map_err(|e| e.to_string())?;
    ensure(ms.overdamped_count() == 0, || format!("damper at β = 1: {} overdamped", ms.overdamped_count()))?;
    Ok("50 full-rank systems fully overdamped at β*, damper oscillatory at β*/2".into())
}

/// Real roots of `det C(−iλ, 50)` for the unit circuit,
/// `(λ² + 2)(λ² − 50λ + 2) − 1`, counted by sign changes on a fine grid.
fn circuit_real_root_count(beta: f64) -> usize {
    let p = |l: f64| (l * l + 2.0) * (l * l - beta * l + 2.0) - 1.0;
    let mut grid: Vec<f64> = (0..=200_000).map(|i| -8.0 + 12.0 * i as f64 / 200_000.0).map(|e| 10f64.powf(e)).collect();
    grid.extend((0..=200_000).map(|i| -10f64.powi(-8) - 2.0 * beta * i as f64 / 200_000.0));
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.windows(2).filter(|w| p(w[0]).signum() != p(w[1]).signum()).count()
}

fn selective_overdamping() -> Outcome {
    let sys = build_circuit::<f64>(&CircuitParams::unit(50.0)).map_err(|e| e.to_string())?;
    let can = canonical(&sys);
    let rep = classify_overdamping(&sys, &can, 50.0, &tol()).map_err(|e| e.to_string())?;
    let n_r = loss_fraction(&sys, None).map_err(|e| e.to_string())?.n_r;
    let roots = circuit_real_root_count(50.0);
    ensure(rep.overdamped == 2 && rep.oscillatory == 2, || format!("circuit: {} / {}", rep.overdamped, rep.oscillatory))?;
    ensure(rep.kappa == 1 && n_r == 1, || format!("κ = {}, N_R = {n_r}", rep.kappa))?;
    ensure(roots == rep.overdamped, || format!("root oracle counts {roots} real roots"))?;

    let mut r = rng(7);
    for k in 0..50u64 {
        let n = r.gen_range(2..=6);
        let n_r = r.gen_range(1..n);
        let eta_rank = r.gen_range(n - n_r..=n);
        let opts = RandomSystemOptions { eta_rank: Some(eta_rank), require_nondegenerate: true, ..Default::default() };
        let sys = random_system_with::<f64>(n, n_r, false, 5000 + k, &opts).map_err(|e| e.to_string())?.system;
        let can = canonical(&sys);
        let thr = thresholds(&sys, &can, &tol()).map_err(|e| e.to_string())?;
        let beta = 1e3 * thr.beta_star.max(1e-3);
        let rep = classify_overdamping(&sys, &can, beta, &tol()).map_err(|e| e.to_string())?;
        ensure(rep.overdamped == 2 * n_r, || {
            format!("system {k} (N = {n}, N_R = {n_r}, rank η = {eta_rank}): {} overdamped", rep.overdamped)
        })?;
        ensure(rep.all_claims_hold(), || format!("system {k}: {:?}", rep.claims))?;
    }
    Ok(format!("circuit 2 + 2 with {roots} oracle roots, 50 random systems at 2 N_R"))
}

fn asymptotic_orders() -> Outcome {
    let betas = [1e2, 1e3, 1e4];
    let mut systems = vec![build_circuit::<f64>(&CircuitParams::unit(0.0)).map_err(|e| e.to_string())?];
    for k in 0..10u64 {
        let n = 2 + (k as usize % 4);
        let n_r = 1 + (k as usize % (n - 1));
        systems.push(random_system::<f64>(n, n_r, k >= 5, 6000 + k).map_err(|e| e.to_string())?.system);
    }
    let (mut hi_fits, mut lo_fits) = (Vec::new(), Vec::new());
    for (s, sys) in systems.iter().enumerate() {
        let can = canonical(sys);
        let asym = asymptotic_spectrum(&can, &tol()).map_err(|e| e.to_string())?;
        let np = 2 * sys.n();
        let mut hi_err = vec![Vec::new(); np];
        let mut lo_err = vec![Vec::new(); np];
        for &beta in &betas {
            let preds = predict_eigenvalues(&asym, beta);
            let ms = mode_set(&can.operator(beta), &tol()).map_err(|e| e.to_string())?;
            let pz: Vec<Complex<f64>> = preds.iter().map(|p| p.zeta).collect();
            let m = match_multisets(&pz, &ms.values(), f64::INFINITY);
            let vals = ms.values();
            for (i, j, _) in m.pairs {
                let z = vals[j];
                if preds[i].high_loss {
                    hi_err[i].push((z - pz[i]).norm());
                } else {
                    lo_err[i].push((z.re - pz[i].re).abs());
                }
            }
        }
        let floor = 1e-11;
        for e in hi_err.iter().filter(|e| e.len() == 3) {
            if e.iter().all(|v| *v > floor) {
                hi_fits.push((s, log_slope(&betas, e)));
            }
        }
        for e in lo_err.iter().filter(|e| e.len() == 3) {
            if e.iter().all(|v| *v > floor) {
                lo_fits.push((s, log_slope(&betas, e)));
            }
        }
    }
    ensure(!hi_fits.is_empty() && !lo_fits.is_empty(), || "no fits collected".into())?;
    for (s, p) in &hi_fits {
        ensure((p + 1.0).abs() <= 0.3, || format!("system {s}: high-loss exponent {p:.3}"))?;
    }
    for (s, p) in &lo_fits {
        ensure((p + 2.0).abs() <= 0.3, || format!("system {s}: low-loss Re exponent {p:.3}"))?;
    }
    let span = |f: &[(usize, f64)]| {
        let lo = f.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        let hi = f.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        format!("[{lo:.3}, {hi:.3}]")
    };
    Ok(format!(
        "{} high-loss fits in {}, {} low-loss fits in {}",
        hi_fits.len(),
        span(&hi_fits),
        lo_fits.len(),
        span(&lo_fits)
    ))
}

fn virial_equipartition() -> Outcome {
    let mut r = rng(9);
    let mut gyro_modes = 0;
    let mut worst = 0.0f64;
    let mut k = 0u64;
    while gyro_modes < 100 {
        let n = r.gen_range(2..=6);
        let n_r = r.gen_range(1..=n);
        let sys = random_system::<f64>(n, n_r, true, 7000 + k).map_err(|e| e.to_string())?.system;
        k += 1;
        let can = canonical(&sys);
        let beta = r.gen_range(0.1..2.0);
        let ms = mode_set(&can.operator(beta), &tol()).map_err(|e| e.to_string())?;
        for m in ms.modes.iter().filter(|m| !m.overdamped && !m.marginal) {
            let pe = canonical_to_pencil(&sys, &can, m.zeta, &m.w, beta, 1e-8).map_err(|e| e.to_string())?;
            let v = virial_check(&sys, &pe, beta, &tol()).map_err(|e| e.to_string())?;
            ensure(v.residual <= 1e-8, || format!("system {k}: virial residual {:e}", v.residual))?;
            worst = worst.max(v.residual);
            gyro_modes += 1;
        }
    }

    let (mut eq_modes, mut broken) = (0, 0);
    for k in 0..30u64 {
        let n = 1 + (k as usize % 5);
        let n_r = 1 + (k as usize % n);
        let sys = random_system::<f64>(n, n_r, false, 8000 + k).map_err(|e| e.to_string())?.system;
        let can = canonical(&sys);
        let thr = thresholds(&sys, &can, &tol()).map_err(|e| e.to_string())?;
        for beta in [0.5, 3.0 * thr.beta_star] {
            let ms = mode_set(&can.operator(beta), &tol()).map_err(|e| e.to_string())?;
            for m in ms.modes.iter().filter(|m| !m.marginal) {
                let pe = canonical_to_pencil(&sys, &can, m.zeta, &m.w, beta, 1e-8).map_err(|e| e.to_string())?;
                // Direct evaluation: T = ½|ζ|²(q,αq), V = ½(q,ηq) when θ = 0.
                let qa = pe.q.dotc(&(sys.alpha.map(|x| Complex::new(x, 0.0)) * &pe.q)).re;
                let qe = pe.q.dotc(&(sys.eta.map(|x| Complex::new(x, 0.0)) * &pe.q)).re;
                let (t, v) = (0.5 * m.zeta.norm_sqr() * qa, 0.5 * qe);
                let rep = virial_check(&sys, &pe, beta, &tol()).map_err(|e| e.to_string())?;
                ensure((rep.kinetic - t).abs() <= 1e-10 * (t + v) && (rep.potential - v).abs() <= 1e-10 * (t + v), || {
                    format!("system {k}: energies disagree with direct evaluation")
                })?;
                if !m.overdamped {
                    ensure((t - v).abs() <= 1e-8 * (t + v), || format!("system {k}: |T − V| = {:e}", (t - v).abs()))?;
                    eq_modes += 1;
                } else if -m.zeta.im >= 2.0 * thr.omega_max {
                    ensure((t - v).abs() > 0.1 * (t + v), || format!("system {k}: equipartition not broken"))?;
                    broken += 1;
                }
            }
        }
    }
    ensure(eq_modes > 0 && broken > 0, || "empty mode sample".into())?;
    Ok(format!(
        "{gyro_modes} gyroscopic modes (max residual {worst:e}), {eq_modes} equipartitioned, {broken} broken"
    ))
}

fn energy_balance() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_rate = 0.0f64;
    let unforced = |n: usize| move |_: f64| CVec::zeros(n);
    for k in 0..6u64 {
        let n = 2 + (k as usize % 3);
        let sys = random_system::<f64>(n, 1, k % 2 == 1, 9000 + k).map_err(|e| e.to_string())?.system;
        let mut r = rng(100 + k);
        let s0 = State::new(cmat(&mut r, n, 1).column(0).into_owned(), cmat(&mut r, n, 1).column(0).into_owned());
        for beta in [0.0, 1.0] {
            let sys = sys.with_beta(beta);
            let can = canonical(&sys);
            let rate = spectral_norm(&can.operator(beta));
            let period = 2.0 * std::f64::consts::PI / rate;
            let opts = IntegrateOptions::new(20.0 * period, period / 100.0, &tol());
            let tr = integrate(&sys, beta, &s0, unforced(n), &opts).map_err(|e| e.to_string())?;
            let rep = energy_balance_residual(&sys, beta, &tr, unforced(n), &tol()).map_err(|e| e.to_string())?;
            ensure(rep.max_residual <= 1e-5, || format!("system {k}, β = {beta}: residual {:e}", rep.max_residual))?;
            worst = worst.max(rep.max_residual);

            if beta > 0.0 {
                let ms = mode_set(&can.operator(beta), &tol()).map_err(|e| e.to_string())?;
                for m in ms.modes.iter().filter(|m| m.zeta.im < -1e-6) {
                    let pe = canonical_to_pencil(&sys, &can, m.zeta, &m.w, beta, 1e-8).map_err(|e| e.to_string())?;
                    let decade = 10f64.ln() / (-2.0 * m.zeta.im);
                    let dt = (period / 50.0).min(decade / 200.0);
                    let tr = integrate(&sys, beta, &eigenmode_state(&pe), unforced(n), &IntegrateOptions::new(decade, dt, &tol()))
                        .map_err(|e| e.to_string())?;
                    let fit = fitted_decay_rate(&tr, 0.0, decade).map_err(|e| e.to_string())?;
                    let expected = -2.0 * m.zeta.im;
                    let rel = (fit - expected).abs() / expected;
                    ensure(rel <= 0.01, || format!("system {k}: decay {fit:e} vs {expected:e}"))?;
                    worst_rate = worst_rate.max(rel);
                }
            }
        }
    }
    Ok(format!("max balance residual {worst:e}, max decay-rate error {worst_rate:e}"))
}

fn bounds_generality() -> Outcome {
    let mut r = rng(11);
    let mut worst = f64::NEG_INFINITY;
    for k in 0..200 {
        let m = cmat(&mut r, 6, 6);
        let rep = eigenvalue_bounds_check(&m, 1e-10 * spectral_norm(&m)).map_err(|e| e.to_string())?;
        ensure(rep.holds, || format!("matrix {k}: {rep:?}"))?;
        worst = worst.max(rep.worst_disc_excess);
    }
    for k in 0..50 {
        let n = 6;
        let rank = r.gen_range(1..n);
        let u = unitary(&mut r, n);
        let gam = CVec::from_fn(n, |i, _| {
            if i < rank {
                let s = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
                Complex::new(s * r.gen_range(4.0..8.0), 0.0)
            } else {
                Complex::new(0.0, 0.0)
            }
        });
        let im = &u * CMat::from_diagonal(&gam) * u.adjoint();
        let h = hermitian(&mut r, n);
        let re = &h * Complex::new(1.0 / spectral_norm(&h), 0.0);
        let m = re + im * Complex::new(0.0, 1.0);
        let d = dichotomy(&m, &tol()).map_err(|e| format!("matrix {k}: {e}"))?;
        ensure(d.rank_im == rank && d.rank_p0 == n - rank, || {
            format!("matrix {k}: rank Im = {} (built {rank}), rank p0 = {}", d.rank_im, d.rank_p0)
        })?;
        ensure(numerical_rank(&d.p1, None) == rank, || format!("matrix {k}: rank p1"))?;
    }
    Ok(format!("200 discs hold (worst excess {worst:e}), 50 dichotomy ranks match"))
}

fn schur_block_identities() -> Outcome {
    let mut r = rng(12);
    let (mut aitken, mut comm, mut limit) = (0.0f64, 0.0f64, 0.0f64);
    let mut singular_cases = 0;
    for k in 0..100 {
        let b = r.gen_range(1..=4);
        let p = cmat(&mut r, b, b);
        let q = cmat(&mut r, b, b);
        let kind = k % 3;
        let s = if kind == 2 {
            let rank = r.gen_range(0..b);
            cmat(&mut r, b, rank.max(1)) * cmat(&mut r, rank.max(1), b) * Complex::new(if rank == 0 { 0.0 } else { 1.0 }, 0.0)
        } else {
            cmat(&mut r, b, b)
        };
        let rr = if kind == 0 {
            cmat(&mut r, b, b)
        } else {
            let (c0, c1, c2) = (r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
            CMat::identity(b, b) * Complex::new(c0, 0.0) + &s * Complex::new(c1, 0.0) + &s * &s * Complex::new(c2, 0.0)
        };
        let rep = schur_identities(&p, &q, &rr, &s).map_err(|e| format!("case {k}: {e}"))?;
        if kind < 2 {
            let a = rep.aitken_residual.ok_or_else(|| format!("case {k}: no factorization"))?;
            ensure(a <= 1e-10, || format!("case {k}: reconstruction {a:e}"))?;
            aitken = aitken.max(a);
        }
        if kind >= 1 {
            let g = rep.commuting_det_gap.ok_or_else(|| format!("case {k}: commuting identity not evaluated"))?;
            ensure(g <= 1e-8, || format!("case {k}: commuting gap {g:e}"))?;
            comm = comm.max(g);
            for e in &rep.epsilon_checks {
                ensure(e.identity_gap <= 1e-8, || format!("case {k}: ε = {:e} gap {:e}", e.epsilon, e.identity_gap))?;
            }
            let last = rep.epsilon_checks.last().ok_or("no ε ladder")?;
            ensure(last.limit_gap <= 1e-6, || format!("case {k}: ε-limit gap {:e}", last.limit_gap))?;
            limit = limit.max(last.limit_gap);
            if rep.aitken_residual.is_none() {
                singular_cases += 1;
            }
        }
    }
    ensure(singular_cases > 0, || "no singular S exercised".into())?;
    Ok(format!(
        "reconstruction {aitken:e}, commuting gap {comm:e}, ε-limit gap {limit:e}, {singular_cases} singular S"
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("closed-form spectrum", closed_form_spectrum),
        ("spectral equivalence", spectral_equivalence),
        ("spectral symmetry", spectral_symmetry),
        ("dichotomy and counts", dichotomy_counts),
        ("damping bands and Q bound", damping_bands),
        ("complete overdamping", complete_overdamping),
        ("selective overdamping", selective_overdamping),
        ("asymptotic orders", asymptotic_orders),
        ("virial and equipartition", virial_equipartition),
        ("energy balance", energy_balance),
        ("general matrix bounds", bounds_generality),
        ("Schur identities", schur_block_identities),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
