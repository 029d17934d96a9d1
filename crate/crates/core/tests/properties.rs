//! Property tests over randomly generated systems.

mod common;

use common::*;
use lossmodes::asymptotics::{asymptotic_spectrum, fundamental_inequalities, is_nondegenerate, thresholds};
use lossmodes::canonical::{energetic_equivalence_check, psd_sqrt, psd_sqrt_2x2};
use lossmodes::dynamics::{
    eigenmode_state, energy_quality_factor, integrate, IntegrateOptions,
};
use lossmodes::examples::{random_system, random_system_with, RandomSystemOptions};
use lossmodes::linalg::{match_multisets, numerical_rank_real, singular_values, spectral_norm, spectral_norm_real};
use lossmodes::model::{energies, loss_fraction, validate_system};
use lossmodes::pencil::{
    canonical_to_pencil, det_equivalence, hamiltonian_matrix, operator_factors, pencil_eval, pencil_scale,
    pencil_to_canonical, PencilEig,
};
use lossmodes::spectral::{check_symmetry, eigensolve, eigenvalue_bounds_check, mode_set, quality_factor};
use lossmodes::{CMat, CVec, RMat, State, System, Tolerances};
use nalgebra::Complex;
use proptest::prelude::*;

fn tol() -> Tolerances {
    Tolerances::default()
}

/// `(n, n_r, gyro, seed)` with `gyro` only for `n ≥ 2`.
fn shape(max_n: usize) -> impl Strategy<Value = (usize, usize, bool, u64)> {
    (1..=max_n, 0.0..1.0f64, any::<bool>(), any::<u64>()).prop_map(|(n, f, g, s)| {
        let n_r = (1 + (f * n as f64) as usize).min(n);
        (n, n_r, g && n >= 2, s)
    })
}

fn system(max_n: usize) -> impl Strategy<Value = System> {
    shape(max_n).prop_map(|(n, n_r, g, s)| random_system::<f64>(n, n_r, g, s).unwrap().system)
}

fn state(n: usize, seed: u64) -> State {
    let mut r = rng(seed);
    State::new(cmat(&mut r, n, 1).column(0).into_owned(), cmat(&mut r, n, 1).column(0).into_owned())
}

fn real_state(n: usize, seed: u64) -> (State, State) {
    let mut r = rng(seed);
    let m = cmat(&mut r, n, 2);
    let re = |k: usize| m.column(k).map(|z| Complex::new(z.re, 0.0));
    let im = |k: usize| m.column(k).map(|z| Complex::new(z.im, 0.0));
    (State::new(re(0), re(1)), State::new(im(0), im(1)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_systems_validate(sys in system(6)) {
        prop_assert!(validate_system(&sys, 1e-10).overall);
    }

    #[test]
    fn total_energy_is_kinetic_plus_potential(sys in system(6), seed in any::<u64>()) {
        let s = state(sys.n(), seed);
        let e = energies(&sys, &s, &CVec::zeros(sys.n())).unwrap();
        prop_assert!((e.total - e.kinetic - e.potential).abs() <= 1e-13 * e.total.abs().max(1.0));
    }

    #[test]
    fn energy_is_additive_over_real_and_imaginary_parts(sys in system(6), seed in any::<u64>()) {
        let (x, y) = real_state(sys.n(), seed);
        let i = Complex::new(0.0, 1.0);
        let z = State::new(&x.q + &y.q * i, &x.qdot + &y.qdot * i);
        let f = CVec::zeros(sys.n());
        let (ez, ex, ey) = (energies(&sys, &z, &f).unwrap(), energies(&sys, &x, &f).unwrap(), energies(&sys, &y, &f).unwrap());
        let scale = ez.total.abs().max(1e-300);
        prop_assert!((ez.kinetic - ex.kinetic - ey.kinetic).abs() <= 1e-12 * scale);
        prop_assert!((ez.potential - ex.potential - ey.potential).abs() <= 1e-12 * scale);
        prop_assert!((ez.total - ex.total - ey.total).abs() <= 1e-12 * scale);
    }

    #[test]
    fn loss_fraction_is_scale_invariant(sys in system(6), c in 1e-3..1e3f64) {
        let mut scaled = sys.clone();
        scaled.r_mat *= c;
        prop_assert_eq!(loss_fraction(&sys, None).unwrap(), loss_fraction(&scaled, None).unwrap());
    }

    #[test]
    fn symmetric_theta_is_rejected(sys in system(4), seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = cmat(&mut r, sys.n(), sys.n()).map(|z| z.re);
        let mut bad = sys.clone();
        bad.theta += &s + s.transpose();
        let rep = validate_system(&bad, 1e-10);
        prop_assert!(rep.failures().any(|c| c.name == "theta skew-symmetry"));
    }

    #[test]
    fn rank_b_equals_rank_r(sys in system(6)) {
        let can = canonical(&sys);
        prop_assert_eq!(numerical_rank_real(&can.b_mat, None), numerical_rank_real(&sys.r_mat, None));
    }

    #[test]
    fn operator_is_purely_imaginary(sys in system(6), beta in 0.0..100.0f64) {
        let a = canonical(&sys).operator(beta);
        let gap = (a.adjoint() + a.transpose()).camax();
        prop_assert!(gap <= 4.0 * f64::EPSILON * a.camax().max(1.0));
    }

    #[test]
    fn energetic_equivalence(sys in system(6), beta in 0.0..10.0f64, seed in any::<u64>()) {
        let sys = sys.with_beta(beta);
        let can = canonical(&sys);
        let s = state(sys.n(), seed);
        let f = state(sys.n(), seed ^ 1).q;
        let r = energetic_equivalence_check(&sys, &can, &s, &f).unwrap();
        prop_assert!(r.max() <= 1e-10, "{:?}", r);
    }

    #[test]
    fn psd_sqrt_squares_back(seed in any::<u64>(), n in 1..=6usize, rank in 0..=6usize) {
        let mut r = rng(seed);
        let g = cmat(&mut r, rank.min(n), n).map(|z| z.re);
        let m = g.transpose() * g;
        let s = psd_sqrt(&m, 1e-10).unwrap();
        prop_assert!((&s * &s - &m).amax() <= 1e-10 * m.amax().max(1e-300));
        if n == 2 {
            let t = psd_sqrt_2x2(&m).unwrap();
            prop_assert!((t - s).amax() <= 1e-7 * m.amax().sqrt().max(1e-300));
        }
    }

    #[test]
    fn det_equivalence_holds(sys in system(6), re in -7.0..7.0f64, im in -7.0..7.0f64, beta in 0.0..100.0f64) {
        let can = canonical(&sys);
        let d = det_equivalence(&sys, &can, Complex::new(re, im), beta);
        prop_assert!(d.relerr <= 1e-8, "{:?}", d);
    }

    #[test]
    fn four_factor_product(sys in system(6), re in -5.0..5.0f64, im in -5.0..5.0f64, beta in 0.0..10.0f64) {
        prop_assume!(re.abs() + im.abs() > 1e-3);
        let can = canonical(&sys);
        let z = Complex::new(re, im);
        let [a, b, c, d] = operator_factors(&sys, &can, z, beta).unwrap();
        let n2 = 2 * sys.n();
        let target = CMat::identity(n2, n2) * z - can.operator(beta);
        let scale = spectral_norm(&target).max(1.0);
        prop_assert!(spectral_norm(&(a * b * c * d - &target)) <= 1e-9 * scale);
    }

    #[test]
    fn three_spectra_agree(sys in system(5), beta in 0.0..5.0f64) {
        let can = canonical(&sys);
        let ms = mode_set(&can.operator(beta), &tol()).unwrap();
        let m = hamiltonian_matrix(&sys, beta).unwrap();
        let im = m.map(|x| Complex::new(0.0, x));
        let e = eigensolve(&im).unwrap();
        let matched = match_multisets(&ms.values(), &e.values, 1e-7);
        prop_assert!(matched.matched, "gap {:e}", matched.max_distance);
        for z in ms.values() {
            let c = pencil_eval(&sys, z, beta);
            let sv = singular_values(&c);
            prop_assert!(sv[sv.len() - 1] <= 1e-8 * pencil_scale(&sys, z, beta));
        }
    }

    #[test]
    fn eigenvector_maps_round_trip(sys in system(5), beta in 0.0..5.0f64) {
        let can = canonical(&sys);
        let ms = mode_set(&can.operator(beta), &tol()).unwrap();
        for md in ms.modes.iter().filter(|m| m.zeta.norm() > 1e-6 && !m.marginal) {
            let pe = canonical_to_pencil(&sys, &can, md.zeta, &md.w, beta, 1e-8).unwrap();
            let w = pencil_to_canonical(&sys, &pe, beta, 1e-8).unwrap();
            let back = canonical_to_pencil(&sys, &can, md.zeta, &w, beta, 1e-8).unwrap();
            let c = back.q.dotc(&pe.q) / back.q.dotc(&back.q);
            prop_assert!((&back.q * c - &pe.q).norm() <= 1e-8 * pe.q.norm());
        }
    }

    #[test]
    fn dissipativity_and_symmetry(sys in system(6), beta in 0.0..20.0f64) {
        let can = canonical(&sys);
        let a = can.operator(beta);
        let ms = mode_set(&a, &tol()).unwrap();
        for z in ms.values() {
            prop_assert!(z.im <= 1e-8 * ms.a_norm);
        }
        let s = check_symmetry(&a, &ms, beta == 0.0, &tol());
        prop_assert!(s.mirror_matched);
        let a0 = can.operator(0.0);
        let ms0 = mode_set(&a0, &tol()).unwrap();
        let s0 = check_symmetry(&a0, &ms0, true, &tol());
        prop_assert!(s0.origin_gap.unwrap() <= 1e-7);
        prop_assert!(s0.max_imag_ratio.unwrap() <= 1e-8);
    }

    #[test]
    fn discs_contain_the_spectrum(seed in any::<u64>(), n in 1..=7usize) {
        let mut r = rng(seed);
        let m = cmat(&mut r, n, n);
        let rep = eigenvalue_bounds_check(&m, 1e-10 * spectral_norm(&m)).unwrap();
        prop_assert!(rep.holds, "{:?}", rep);
    }

    #[test]
    fn omega_norm_is_omega_max(sys in system(6)) {
        let sys = System { theta: RMat::zeros(sys.n(), sys.n()), ..sys };
        let can = canonical(&sys);
        let thr = thresholds(&sys, &can, &tol()).unwrap();
        prop_assert!((thr.omega_max - spectral_norm(&can.omega)).abs() <= 1e-9 * thr.omega_max.max(1.0));
    }

    #[test]
    fn rayleigh_identities(sys in system(5), beta in 0.05..5.0f64) {
        let sys = System { theta: RMat::zeros(sys.n(), sys.n()), ..sys };
        let can = canonical(&sys);
        let thr = thresholds(&sys, &can, &tol()).unwrap();
        let ms = mode_set(&can.operator(beta), &tol()).unwrap();
        for md in ms.modes.iter().filter(|m| m.zeta.norm() > 1e-6 && !m.marginal) {
            let pe = canonical_to_pencil(&sys, &can, md.zeta, &md.w, beta, 1e-8).unwrap();
            let rep = fundamental_inequalities(&sys, &thr, &pe, beta, &tol()).unwrap();
            prop_assert!(rep.holds, "{:?}", rep);
        }
    }

    #[test]
    fn generator_is_deterministic((n, n_r, g, s) in shape(6)) {
        let a = random_system::<f64>(n, n_r, g, s).unwrap().system;
        let b = random_system::<f64>(n, n_r, g, s).unwrap().system;
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn k_factorizes_the_hamiltonian_form(sys in system(8)) {
        let can = canonical(&sys);
        let mh = sys.hamiltonian_block().unwrap();
        let gap = spectral_norm_real(&(can.k_block.transpose() * &can.k_block - &mh));
        prop_assert!(gap <= 1e-10 * spectral_norm_real(&mh));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn low_loss_null_count_is_n_r(n in 2..=6usize, f in 0.0..1.0f64, e in 0.0..1.0f64, seed in any::<u64>()) {
        let n_r = 1 + ((n - 1) as f64 * f) as usize;
        let eta_rank = n - n_r + ((n_r as f64) * e) as usize;
        let opts = RandomSystemOptions { eta_rank: Some(eta_rank.min(n)), require_nondegenerate: true, ..Default::default() };
        let sys = random_system_with::<f64>(n, n_r, false, seed, &opts).unwrap().system;
        prop_assert!(is_nondegenerate(&sys, &tol()));
        let asym = asymptotic_spectrum(&canonical(&sys), &tol()).unwrap();
        prop_assert_eq!(asym.kappa, n_r);
        let g = asym.gram();
        prop_assert!((g - CMat::identity(2 * n, 2 * n)).camax() <= 1e-10);
        prop_assert!(asym.low_loss.iter().all(|l| l.d >= -1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn unforced_energy_never_increases(sys in system(3), beta in 0.0..3.0f64, seed in any::<u64>()) {
        let can = canonical(&sys.with_beta(beta));
        let period = 2.0 * std::f64::consts::PI / spectral_norm(&can.operator(beta));
        let opts = IntegrateOptions::new(5.0 * period, period / 40.0, &tol());
        let n = sys.n();
        let tr = integrate(&sys, beta, &state(n, seed), |_| CVec::zeros(n), &opts).unwrap();
        let h0 = tr.energies[0].total;
        for w in tr.energies.windows(2) {
            prop_assert!(w[1].total <= w[0].total + 1e-9 * h0);
        }
    }

    #[test]
    fn energy_quality_factor_matches_closed_form(sys in system(3), beta in 0.1..2.0f64) {
        let sys = sys.with_beta(beta);
        let can = canonical(&sys);
        let ms = mode_set(&can.operator(beta), &tol()).unwrap();
        let n = sys.n();
        for md in ms.modes.iter().filter(|m| !m.overdamped && !m.marginal && m.zeta.re > 0.0) {
            let pe: PencilEig<f64> = canonical_to_pencil(&sys, &can, md.zeta, &md.w, beta, 1e-8).unwrap();
            let period = 2.0 * std::f64::consts::PI / md.zeta.re;
            let opts = IntegrateOptions::new(period * 1.01, period / 400.0, &tol());
            let tr = integrate(&sys, beta, &eigenmode_state(&pe), |_| CVec::zeros(n), &opts).unwrap();
            let q = energy_quality_factor(&tr, md.zeta.re, 0.0).unwrap();
            let closed = quality_factor(md.zeta, 1e-12).unwrap();
            prop_assert!((q - closed).abs() <= 1e-6 * closed.max(1.0), "{} vs {}", q, closed);
        }
    }
}
