//! Large-loss spectral data, eigenvalue and Q predictions, and overdamping theory.

use nalgebra::{Complex, ComplexField};
use serde::Serialize;

use crate::canonical::CanonicalSystem;
use crate::error::{Error, Result};
use crate::linalg::{herm_eigen, match_multisets, numerical_rank, numerical_rank_real, rank_cutoff, sym_eigen};
use crate::model::{energies, loss_fraction, LagrangianSystem, State};
use crate::pencil::PencilEig;
use crate::scalar::{c, ci, cr, hdot, re_form, CMat, CVec, Scalar};
use crate::spectral::{is_overdamped, mode_order, mode_set, ModeClass, ModeSet};
use crate::tolerances::Tolerances;

/// Orthonormal bases of `Ran B` and `Ker B` and the blocks of `Ω` in them.
#[derive(Debug, Clone)]
pub struct LossDecomposition<T: Scalar> {
    /// Columns are eigenvectors of `B` with nonzero eigenvalue, ordered by eigenvalue descending.
    pub ran_basis: CMat<T>,
    pub ker_basis: CMat<T>,
    /// Nonzero eigenvalues of `B`, descending; `B₂` is diagonal in `ran_basis`.
    pub b_values: Vec<T>,
    pub b2: CMat<T>,
    /// `Ω` restricted to `Ran B`.
    pub omega2: CMat<T>,
    /// `Ω` restricted to `Ker B`.
    pub omega1: CMat<T>,
    /// Coupling block `P_B Ω P_B⊥`, mapping `Ker B` coordinates to `Ran B` coordinates.
    pub theta: CMat<T>,
}

impl<T: Scalar> LossDecomposition<T> {
    /// `[[Ω₂, Θ], [Θ*, Ω₁]]`.
    pub fn reassemble(&self) -> CMat<T> {
        let (r, k) = (self.omega2.nrows(), self.omega1.nrows());
        let mut m = CMat::zeros(r + k, r + k);
        m.view_mut((0, 0), (r, r)).copy_from(&self.omega2);
        m.view_mut((0, r), (r, k)).copy_from(&self.theta);
        m.view_mut((r, 0), (k, r)).copy_from(&self.theta.adjoint());
        m.view_mut((r, r), (k, k)).copy_from(&self.omega1);
        m
    }

    /// `[U V]`, the full orthonormal basis.
    pub fn basis(&self) -> CMat<T> {
        let (n, r) = (self.ran_basis.nrows(), self.ran_basis.ncols());
        let mut m = CMat::zeros(n, n);
        m.view_mut((0, 0), (n, r)).copy_from(&self.ran_basis);
        m.view_mut((0, r), (n, n - r)).copy_from(&self.ker_basis);
        m
    }
}

pub fn decompose_loss_subspace<T: Scalar>(can: &CanonicalSystem<T>, tol: &Tolerances) -> Result<LossDecomposition<T>> {
    let (vals, vecs) = sym_eigen(&can.b_mat);
    let n2 = vals.len();
    let rank = numerical_rank_real(&can.b_mat, tol.rank);
    if rank == 0 {
        return Err(Error::Invariant("B has rank 0".into()));
    }
    // Ascending order: the top `rank` eigenvalues span Ran B.
    let ran_idx: Vec<usize> = (n2 - rank..n2).rev().collect();
    let ker_idx: Vec<usize> = (0..n2 - rank).collect();
    let pick = |idx: &[usize]| {
        let mut m = CMat::zeros(n2, idx.len());
        for (k, &i) in idx.iter().enumerate() {
            m.set_column(k, &vecs.column(i).map(cr));
        }
        m
    };
    let u = pick(&ran_idx);
    let v = pick(&ker_idx);
    let b_values: Vec<T> = ran_idx.iter().map(|&i| vals[i]).collect();
    let b2 = CMat::from_diagonal(&nalgebra::DVector::from_iterator(rank, b_values.iter().map(|b| cr(*b))));
    let omega2 = u.adjoint() * &can.omega * &u;
    let omega1 = v.adjoint() * &can.omega * &v;
    let theta = u.adjoint() * &can.omega * &v;
    Ok(LossDecomposition { ran_basis: u, ker_basis: v, b_values, b2, omega2, omega1, theta })
}

#[derive(Debug, Clone)]
pub struct HighLossDatum<T: Scalar> {
    pub b: T,
    pub rho: T,
    pub w0: CVec<T>,
    /// `b` is repeated; `ρ` and `w0` come from diagonalizing `Ω₂` on the cluster.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct LowLossDatum<T: Scalar> {
    pub rho: T,
    pub d: T,
    pub w0: CVec<T>,
    /// `ρ` is repeated; `d` and `w0` come from diagonalizing `Θ*B₂⁻¹Θ` on the cluster.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct AsymptoticSpectrum<T: Scalar> {
    pub n_r: usize,
    pub high_loss: Vec<HighLossDatum<T>>,
    pub low_loss: Vec<LowLossDatum<T>>,
    /// `dim Ker Ω₁`.
    pub kappa: usize,
}

impl<T: Scalar> AsymptoticSpectrum<T> {
    /// Gram matrix of all limiting eigenvectors.
    pub fn gram(&self) -> CMat<T> {
        let all: Vec<&CVec<T>> =
            self.high_loss.iter().map(|h| &h.w0).chain(self.low_loss.iter().map(|l| &l.w0)).collect();
        CMat::from_fn(all.len(), all.len(), |i, j| hdot(all[i], all[j]))
    }

    pub fn any_degenerate(&self) -> bool {
        self.high_loss.iter().any(|h| h.degenerate)
    }
}

/// Groups indices of an ascending or descending sequence into clusters of
/// values closer than `gap`.
fn clusters<T: Scalar>(vals: &[T], gap: T) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, v) in vals.iter().enumerate() {
        match out.last_mut() {
            Some(cl) if (*v - vals[*cl.last().unwrap()]).abs() <= gap => cl.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}

/// Re-diagonalizes `op` on each cluster of the basis `basis` (columns) and
/// returns `(eigenvalue of op, rotated basis vector, cluster size > 1)` per column.
fn split_clusters<T: Scalar>(basis: &CMat<T>, op: &CMat<T>, groups: &[Vec<usize>]) -> Vec<(T, CVec<T>, bool)> {
    let mut out = vec![(T::zero(), CVec::zeros(basis.nrows()), false); basis.ncols()];
    for g in groups {
        let mut sub = CMat::zeros(basis.nrows(), g.len());
        for (k, &i) in g.iter().enumerate() {
            sub.set_column(k, &basis.column(i));
        }
        let (vals, vecs) = herm_eigen(&(sub.adjoint() * op * &sub));
        let rotated = &sub * vecs;
        for (k, &i) in g.iter().enumerate() {
            out[i] = (vals[k], rotated.column(k).clone_owned(), g.len() > 1);
        }
    }
    out
}

pub fn asymptotic_spectrum<T: Scalar>(can: &CanonicalSystem<T>, tol: &Tolerances) -> Result<AsymptoticSpectrum<T>> {
    let dec = decompose_loss_subspace(can, tol)?;
    let n_r = dec.b_values.len();
    let omega_scale = T::one().max(can.omega_norm());
    let gap = T::lit(1e-8) * omega_scale;
    let b_scale = dec.b_values[0];

    // High-loss data. Ω₂ is diagonalized on clusters of equal b.
    let b_groups = clusters(&dec.b_values, T::lit(1e-8) * b_scale);
    let omega2_full = dec.ran_basis.clone() * &dec.omega2 * dec.ran_basis.adjoint();
    let hi = split_clusters(&dec.ran_basis, &omega2_full, &b_groups);
    let mut high_loss: Vec<HighLossDatum<T>> = hi
        .into_iter()
        .enumerate()
        .map(|(j, (_, w0, degenerate))| {
            let rho = hdot(&w0, &(&can.omega * &w0)).re;
            HighLossDatum { b: dec.b_values[j], rho, w0, degenerate }
        })
        .collect();
    high_loss.sort_by(|x, y| y.b.partial_cmp(&x.b).unwrap_or(std::cmp::Ordering::Equal));

    // Low-loss data. Θ*B₂⁻¹Θ is diagonalized on clusters of equal ρ.
    let (rho_vals, rho_vecs) = herm_eigen(&dec.omega1);
    let ker_rot = &dec.ker_basis * rho_vecs;
    let binv = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        n_r,
        dec.b_values.iter().map(|b| cr(T::one() / *b)),
    ));
    // Θ*B₂⁻¹Θ in the ambient space: V (Θ* B₂⁻¹ Θ) V*.
    let d_small = dec.theta.adjoint() * binv * &dec.theta;
    let d_full = &dec.ker_basis * d_small * dec.ker_basis.adjoint();
    let rvals: Vec<T> = rho_vals.iter().copied().collect();
    let lo = split_clusters(&ker_rot, &d_full, &clusters(&rvals, gap));
    let mut low_loss: Vec<LowLossDatum<T>> = lo
        .into_iter()
        .map(|(d, w0, degenerate)| {
            let rho = hdot(&w0, &(&can.omega * &w0)).re;
            LowLossDatum { rho, d, w0, degenerate }
        })
        .collect();
    low_loss.sort_by(|x, y| {
        x.rho
            .partial_cmp(&y.rho)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.d.partial_cmp(&y.d).unwrap_or(std::cmp::Ordering::Equal))
    });

    let kappa = dec.omega1.nrows() - numerical_rank(&dec.omega1, tol.rank);
    Ok(AsymptoticSpectrum { n_r, high_loss, low_loss, kappa })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    pub zeta: Complex<f64>,
    pub high_loss: bool,
    /// Index into the corresponding high- or low-loss list.
    pub index: usize,
}

/// `−ib_jβ + ρ_j` for high-loss and `ρ_j − id_j/β` for low-loss modes.
pub fn predict_eigenvalues<T: Scalar>(asym: &AsymptoticSpectrum<T>, beta: T) -> Vec<Prediction> {
    let beta = beta.as_f64();
    let hi = asym.high_loss.iter().enumerate().map(|(i, h)| Prediction {
        zeta: Complex::new(h.rho.as_f64(), -h.b.as_f64() * beta),
        high_loss: true,
        index: i,
    });
    let lo = asym.low_loss.iter().enumerate().map(|(i, l)| Prediction {
        zeta: Complex::new(l.rho.as_f64(), -l.d.as_f64() / beta),
        high_loss: false,
        index: i,
    });
    hi.chain(lo).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum PredictedQ {
    Finite(f64),
    /// `d_j = 0` with `ρ_j ≠ 0`; reported, not asserted as a theorem.
    Infinite,
    /// `ρ_j = 0`; Q decreases to zero.
    Zero,
}

/// `½|ρ|/(bβ)` for high-loss and `½|ρ|β/d` for low-loss modes.
pub fn predict_q_factors<T: Scalar>(asym: &AsymptoticSpectrum<T>, beta: T, omega_norm: T) -> Vec<PredictedQ> {
    let beta_f = beta.as_f64();
    let rho_zero = 1e-10 * omega_norm.as_f64().max(1.0);
    let d_zero = 1e-12 * omega_norm.as_f64().max(1.0);
    let mut out: Vec<PredictedQ> = asym
        .high_loss
        .iter()
        .map(|h| {
            let rho = h.rho.as_f64().abs();
            if rho <= rho_zero {
                PredictedQ::Zero
            } else {
                PredictedQ::Finite(0.5 * rho / (h.b.as_f64() * beta_f))
            }
        })
        .collect();
    out.extend(asym.low_loss.iter().map(|l| {
        let rho = l.rho.as_f64().abs();
        let d = l.d.as_f64();
        if rho <= rho_zero {
            PredictedQ::Zero
        } else if d <= d_zero {
            PredictedQ::Infinite
        } else {
            PredictedQ::Finite(0.5 * rho * beta_f / d)
        }
    }));
    out
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Thresholds {
    pub omega_max: f64,
    pub omega_min: Option<f64>,
    pub b_min: f64,
    /// `2 ω_max / b_min`.
    pub beta_star: f64,
    /// `|ω_max − ‖Ω‖|`.
    pub omega_norm_gap: f64,
    /// `|b_min − min nonzero σ(B)|`.
    pub b_min_gap: f64,
}

fn require_gyro_free<T: Scalar>(sys: &LagrangianSystem<T>) -> Result<()> {
    if sys.is_gyroscopic() {
        return Err(Error::Unsupported(
            "overdamping theory covers gyroscope-free systems (theta = 0) only; gyroscopic overdamping is out of scope"
                .into(),
        ));
    }
    Ok(())
}

/// Smallest eigenvalue above the numerical rank cutoff.
fn smallest_positive<T: Scalar>(vals: &[T], rel: Option<f64>) -> Option<T> {
    let top = vals.iter().copied().fold(T::zero(), |a, b| a.max(b.abs()));
    if top == T::zero() {
        return None;
    }
    let cut = rank_cutoff(top, vals.len(), vals.len(), rel);
    vals.iter().copied().filter(|v| *v > cut).reduce(|a, b| a.min(b))
}

/// `ω_max = √max σ(α⁻¹η)`, `ω_min`, `b_min = min nonzero σ(α⁻¹R)`, `β* = 2ω_max/b_min`.
///
/// `α⁻¹η` and `α⁻¹R` are similar to `K_pηK_p` and `R̃`, which are symmetric.
pub fn thresholds<T: Scalar>(sys: &LagrangianSystem<T>, can: &CanonicalSystem<T>, tol: &Tolerances) -> Result<Thresholds> {
    require_gyro_free(sys)?;
    let keta = &can.k_p * &sys.eta * &can.k_p;
    let (ev, _) = sym_eigen(&keta);
    let ev: Vec<T> = ev.iter().copied().collect();
    let top = ev.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let omega_max = top.max(T::zero()).sqrt();
    let omega_min = smallest_positive(&ev, tol.rank).map(|v| v.sqrt().as_f64());
    let (rv, _) = sym_eigen(&can.r_tilde);
    let rv: Vec<T> = rv.iter().copied().collect();
    let b_min = smallest_positive(&rv, tol.rank).ok_or_else(|| Error::Invariant("R has no nonzero eigenvalue".into()))?;
    let (bv, _) = sym_eigen(&can.b_mat);
    let bv: Vec<T> = bv.iter().copied().collect();
    let b_min_b = smallest_positive(&bv, tol.rank).unwrap_or(T::zero());
    let omega_norm = can.omega_norm();

    let omega_norm_gap = (omega_max - omega_norm).abs().as_f64();
    let b_min_gap = (b_min - b_min_b).abs().as_f64();
    let scale = T::one().max(omega_max).as_f64();
    if omega_norm_gap > 1e-9 * scale || b_min_gap > 1e-9 * b_min.as_f64().max(1.0) {
        return Err(Error::Invariant(format!(
            "threshold cross-check failed: |omega_max - ‖Omega‖| = {omega_norm_gap:e}, b_min gap = {b_min_gap:e}"
        )));
    }
    Ok(Thresholds {
        omega_max: omega_max.as_f64(),
        omega_min,
        b_min: b_min.as_f64(),
        beta_star: 2.0 * omega_max.as_f64() / b_min.as_f64(),
        omega_norm_gap,
        b_min_gap,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FundamentalReport {
    /// `√((q,ηq)/(q,αq))`.
    pub frequency_quotient: f64,
    /// `(β/2)(q,Rq)/(q,αq)`.
    pub damping_quotient: f64,
    /// `ω_max − frequency_quotient`.
    pub upper_margin: f64,
    /// `frequency_quotient − ω_min`, when `η` is invertible.
    pub lower_margin: Option<f64>,
    /// `damping_quotient − (β/2) b_min`, when `R` has full rank.
    pub full_rank_margin: Option<f64>,
    pub oscillatory: bool,
    /// `|damping_quotient + Im ζ|`, for oscillatory modes.
    pub damping_identity_gap: Option<f64>,
    /// `|frequency_quotient − |ζ||`, for oscillatory modes.
    pub modulus_identity_gap: Option<f64>,
    /// `−Im ζ < |ζ|`, for oscillatory modes.
    pub strict_damping: Option<bool>,
    /// `−Im ζ ≥ ω_max`, which certifies `Re ζ = 0`.
    pub high_damping_certificate: bool,
    /// `η` invertible and `|ζ| < ω_min`, which certifies `Re ζ = 0`.
    pub low_modulus_certificate: bool,
    pub equipartition: bool,
    /// Equipartition only inside the frequency band.
    pub equipartition_band_ok: bool,
    pub holds: bool,
}

/// Evaluates the Rayleigh-quotient inequalities for a pencil eigenpair of a
/// gyroscope-free system.
pub fn fundamental_inequalities<T: Scalar>(
    sys: &LagrangianSystem<T>,
    thr: &Thresholds,
    pe: &PencilEig<T>,
    beta: T,
    tol: &Tolerances,
) -> Result<FundamentalReport> {
    require_gyro_free(sys)?;
    let res = pe.relative_residual(sys, beta);
    if res > T::lit(tol.residual) {
        return Err(Error::Precondition(format!("pencil residual {:e} too large", res.as_f64())));
    }
    let q = &pe.q;
    let qa = re_form(q, &sys.alpha, q);
    let freq = (re_form(q, &sys.eta, q) / qa).max(T::zero()).sqrt().as_f64();
    let damp = (beta * T::lit(0.5) * re_form(q, &sys.r_mat, q) / qa).as_f64();
    let n = sys.n();
    let eta_invertible = numerical_rank_real(&sys.eta, tol.rank) == n;
    let full_rank = numerical_rank_real(&sys.r_mat, tol.rank) == n;
    let z = Complex::new(pe.zeta.re.as_f64(), pe.zeta.im.as_f64());
    let oscillatory = !is_overdamped(pe.zeta, tol.overdamped);
    let s = tol.bounds * thr.omega_max.max(1.0).max(beta.as_f64());

    let upper_margin = thr.omega_max - freq;
    let lower_margin = if eta_invertible { thr.omega_min.map(|w| freq - w) } else { None };
    let full_rank_margin = full_rank.then(|| damp - 0.5 * beta.as_f64() * thr.b_min);
    let (damping_identity_gap, modulus_identity_gap, strict_damping) = if oscillatory {
        (Some((damp + z.im).abs()), Some((freq - z.norm()).abs()), Some(-z.im < z.norm()))
    } else {
        (None, None, None)
    };
    // Certificates need a margin of `s`; at the band edge rounding decides the side.
    let high_damping_certificate = -z.im > thr.omega_max + s;
    let low_modulus_certificate = eta_invertible && thr.omega_min.is_some_and(|w| z.norm() < w - s);

    let st = State::new(q.clone(), q * (-ci::<T>() * pe.zeta));
    let e = energies(sys, &st, &CVec::zeros(n))?;
    let tv = (e.kinetic + e.potential).abs().as_f64();
    let equipartition = (e.kinetic - e.potential).abs().as_f64() <= 1e-8 * tv;
    let in_band = z.norm() <= thr.omega_max + s && lower_margin.map_or(true, |_| z.norm() >= thr.omega_min.unwrap() - s);
    let equipartition_band_ok = !equipartition || in_band;

    let mut holds = upper_margin >= -s && lower_margin.map_or(true, |m| m >= -s);
    holds &= full_rank_margin.map_or(true, |m| m >= -s);
    let id_tol = tol.residual * z.norm().max(thr.omega_max).max(1.0);
    holds &= damping_identity_gap.map_or(true, |g| g <= id_tol);
    holds &= modulus_identity_gap.map_or(true, |g| g <= id_tol);
    holds &= strict_damping.unwrap_or(true);
    if high_damping_certificate || low_modulus_certificate {
        holds &= !oscillatory;
    }
    holds &= equipartition_band_ok;
    Ok(FundamentalReport {
        frequency_quotient: freq,
        damping_quotient: damp,
        upper_margin,
        lower_margin,
        full_rank_margin,
        oscillatory,
        damping_identity_gap,
        modulus_identity_gap,
        strict_damping,
        high_damping_certificate,
        low_modulus_certificate,
        equipartition,
        equipartition_band_ok,
        holds,
    })
}

/// `Ker η ∩ Ker R = {0}`, equivalently `η + R` positive definite.
pub fn is_nondegenerate<T: Scalar>(sys: &LagrangianSystem<T>, tol: &Tolerances) -> bool {
    numerical_rank_real(&(&sys.eta + &sys.r_mat), tol.rank) == sys.n()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Complete,
    Selective,
    BelowThreshold,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeFlag {
    pub zeta: Complex<f64>,
    pub overdamped: bool,
    pub marginal: bool,
    pub class: Option<ModeClass>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Claim {
    pub name: String,
    pub applicable: bool,
    pub holds: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OverdampingReport {
    pub beta: f64,
    pub regime: Regime,
    pub n: usize,
    pub n_r: usize,
    pub overdamped: usize,
    pub oscillatory: usize,
    pub kappa: usize,
    pub nondegenerate: bool,
    pub thresholds: Thresholds,
    pub modes: Vec<ModeFlag>,
    pub claims: Vec<Claim>,
    pub warnings: Vec<String>,
}

impl OverdampingReport {
    pub fn all_claims_hold(&self) -> bool {
        self.claims.iter().all(|c| c.holds != Some(false))
    }
}

/// Counts overdamped modes at `beta` and checks the complete, high-loss and
/// large-loss overdamping claims that apply.
pub fn classify_overdamping<T: Scalar>(
    sys: &LagrangianSystem<T>,
    can: &CanonicalSystem<T>,
    beta: T,
    tol: &Tolerances,
) -> Result<OverdampingReport> {
    require_gyro_free(sys)?;
    let thr = thresholds(sys, can, tol)?;
    let n = sys.n();
    let n_r = loss_fraction(sys, tol.rank)?.n_r;
    let nondegenerate = is_nondegenerate(sys, tol);
    let ms = mode_set(&can.operator(beta), tol)?;
    let asym = asymptotic_spectrum(can, tol)?;
    let b = beta.as_f64();

    let overdamped = ms.overdamped_count();
    let regime = if n_r == n && b >= thr.beta_star {
        Regime::Complete
    } else if n_r < n && b > thr.beta_star {
        Regime::Selective
    } else {
        Regime::BelowThreshold
    };

    let mut claims = Vec::new();
    let mut warnings = Vec::new();
    let a_app = n_r == n && b >= thr.beta_star;
    claims.push(Claim {
        name: "full-rank loss above threshold overdamps every mode".into(),
        applicable: a_app,
        holds: a_app.then(|| overdamped == 2 * n),
    });
    let b_app = n_r < n && b > thr.beta_star;
    let high_loss_ok = ms
        .modes
        .iter()
        .filter(|m| m.class == Some(ModeClass::Sigma1))
        .all(|m| m.overdamped);
    let sigma1_count = ms.modes.iter().filter(|m| m.class == Some(ModeClass::Sigma1)).count();
    claims.push(Claim {
        name: "every high-loss mode is overdamped above threshold".into(),
        applicable: b_app,
        holds: b_app.then(|| high_loss_ok && sigma1_count == n_r),
    });
    let calib = b >= 10.0 * thr.beta_star.max(1.0);
    let c_app = calib && nondegenerate;
    if calib && !nondegenerate {
        warnings.push("Ker eta ∩ Ker R is nontrivial; large-loss mode counts are not asserted".into());
    }
    claims.push(Claim {
        name: "large loss overdamps exactly 2 N_R modes".into(),
        applicable: c_app,
        holds: c_app.then(|| overdamped == 2 * n_r),
    });
    claims.push(Claim {
        name: "kappa equals N_R".into(),
        applicable: nondegenerate,
        holds: nondegenerate.then(|| asym.kappa == n_r),
    });
    if asym.any_degenerate() {
        warnings.push("repeated nonzero eigenvalues of B; first-order asymptotics flagged".into());
    }

    let modes = ms
        .modes
        .iter()
        .map(|m| ModeFlag {
            zeta: Complex::new(m.zeta.re.as_f64(), m.zeta.im.as_f64()),
            overdamped: m.overdamped,
            marginal: m.marginal,
            class: m.class,
        })
        .collect();
    Ok(OverdampingReport {
        beta: b,
        regime,
        n,
        n_r,
        overdamped,
        oscillatory: 2 * n - overdamped,
        kappa: asym.kappa,
        nondegenerate,
        thresholds: thr,
        modes,
        claims,
        warnings,
    })
}

/// Eigenvalues of `A(β)` along a grid, ordered consistently by continuation.
#[derive(Debug, Clone)]
pub struct Tracks<T: Scalar> {
    pub betas: Vec<T>,
    /// `values[k][j]` is track `j` at `betas[k]`.
    pub values: Vec<Vec<Complex<T>>>,
    /// Mode sets at each grid point, in track order.
    pub mode_sets: Vec<ModeSet<T>>,
}

const MAX_HALVINGS: usize = 8;

fn sorted_modes<T: Scalar>(can: &CanonicalSystem<T>, beta: T, tol: &Tolerances) -> Result<ModeSet<T>> {
    mode_set(&can.operator(beta), tol)
}

/// Assigns `next` to the predicted positions; `None` when some prediction
/// has two candidates of comparable distance.
fn assign<T: Scalar>(pred: &[Complex<T>], next: &[Complex<T>], floor: T) -> Option<Vec<usize>> {
    let m = match_multisets(pred, next, f64::INFINITY);
    let mut perm = vec![usize::MAX; pred.len()];
    for (i, j, d) in &m.pairs {
        perm[*i] = *j;
        let d = T::lit(*d);
        let rival = next
            .iter()
            .enumerate()
            .filter(|(k, _)| k != j)
            .map(|(_, z)| (*z - pred[*i]).modulus())
            .fold(T::max_value().unwrap_or(T::one()), |a, b| a.min(b));
        if d > floor && rival <= T::lit(2.0) * d {
            return None;
        }
    }
    Some(perm)
}

/// Nearest-neighbour continuation of the spectrum with linear extrapolation
/// and step halving when the assignment is ambiguous.
pub fn track_modes<T: Scalar>(can: &CanonicalSystem<T>, grid: &[T], tol: &Tolerances) -> Result<Tracks<T>> {
    if grid.is_empty() {
        return Err(Error::Parameter("empty beta grid".into()));
    }
    let first = sorted_modes(can, grid[0], tol)?;
    let mut cur_vals = first.values();
    let mut prev_vals: Option<(T, Vec<Complex<T>>)> = None;
    let mut cur_beta = grid[0];
    let mut out_vals = vec![cur_vals.clone()];
    let mut out_sets = vec![first];
    let floor = T::lit(1e-9) * T::one().max(can.omega_norm());

    for &target in &grid[1..] {
        let mut depth = 0;
        let mut step = target - cur_beta;
        while cur_beta < target || (step < T::zero() && cur_beta > target) {
            let b_next = if (target - cur_beta).abs() <= step.abs() { target } else { cur_beta + step };
            let ms = sorted_modes(can, b_next, tol)?;
            let next = ms.values();
            let pred: Vec<Complex<T>> = match &prev_vals {
                Some((pb, pv)) if (cur_beta - *pb).abs() > T::zero() => {
                    let f = (b_next - cur_beta) / (cur_beta - *pb);
                    cur_vals.iter().zip(pv).map(|(c, p)| *c + (*c - *p) * f).collect()
                }
                _ => cur_vals.clone(),
            };
            match assign(&pred, &next, floor) {
                Some(perm) => {
                    let ordered: Vec<Complex<T>> = perm.iter().map(|&j| next[j]).collect();
                    let mut modes = Vec::with_capacity(perm.len());
                    for &j in &perm {
                        modes.push(ms.modes[j].clone());
                    }
                    prev_vals = Some((cur_beta, cur_vals));
                    cur_vals = ordered;
                    cur_beta = b_next;
                    if b_next == target {
                        out_vals.push(cur_vals.clone());
                        out_sets.push(ModeSet { modes, a_norm: ms.a_norm });
                    }
                    depth = 0;
                    step = target - cur_beta;
                }
                None => {
                    depth += 1;
                    if depth > MAX_HALVINGS {
                        return Err(Error::Tracking {
                            beta: b_next.as_f64(),
                            reason: "eigenvalues collide; continuation remains ambiguous after step halving".into(),
                        });
                    }
                    step = step * T::lit(0.5);
                }
            }
        }
    }
    Ok(Tracks { betas: grid.to_vec(), values: out_vals, mode_sets: out_sets })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrackQ {
    pub values: Vec<Complex<f64>>,
    pub q: Vec<f64>,
    pub nondecreasing: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct QGrowthReport {
    pub betas: Vec<f64>,
    pub tracks: Vec<TrackQ>,
    pub all_nondecreasing: bool,
}

/// Tracks the oscillatory low-loss modes over `grid` and checks that their Q
/// does not decrease (1% slack).
pub fn oscillatory_q_growth<T: Scalar>(
    sys: &LagrangianSystem<T>,
    can: &CanonicalSystem<T>,
    grid: &[T],
    tol: &Tolerances,
) -> Result<QGrowthReport> {
    require_gyro_free(sys)?;
    if grid.len() < 2 {
        return Err(Error::Precondition("Q growth fit needs at least two loss values".into()));
    }
    let n_r = loss_fraction(sys, tol.rank)?.n_r;
    if n_r == sys.n() {
        return Err(Error::Precondition("full-rank loss has no oscillatory modes at large loss".into()));
    }
    if !is_nondegenerate(sys, tol) {
        return Err(Error::Precondition("Ker eta ∩ Ker R is nontrivial".into()));
    }
    let thr = thresholds(sys, can, tol)?;
    if grid.iter().any(|b| b.as_f64() <= thr.beta_star) {
        return Err(Error::Precondition(format!("grid must lie above beta* = {:e}", thr.beta_star)));
    }
    let tr = track_modes(can, grid, tol)?;
    let last = tr.values.len() - 1;
    let mut tracks = Vec::new();
    for j in 0..tr.values[0].len() {
        let z_end = tr.values[last][j];
        if is_overdamped(z_end, tol.overdamped) {
            continue;
        }
        let values: Vec<Complex<f64>> =
            tr.values.iter().map(|v| Complex::new(v[j].re.as_f64(), v[j].im.as_f64())).collect();
        let q: Vec<f64> = values
            .iter()
            .map(|z| if z.im < 0.0 { -0.5 * z.re.abs() / z.im } else { f64::INFINITY })
            .collect();
        let nondecreasing = q.windows(2).all(|w| w[1].is_infinite() || w[1] >= w[0] * (1.0 - 0.01));
        tracks.push(TrackQ { values, q, nondecreasing });
    }
    let all_nondecreasing = tracks.iter().all(|t| t.nondecreasing);
    Ok(QGrowthReport { betas: grid.iter().map(|b| b.as_f64()).collect(), tracks, all_nondecreasing })
}

/// Predictions paired with computed eigenvalues by greedy matching.
pub fn pair_predictions<T: Scalar>(
    preds: &[Prediction],
    computed: &[Complex<T>],
) -> Vec<(Prediction, Complex<f64>)> {
    let pz: Vec<Complex<f64>> = preds.iter().map(|p| p.zeta).collect();
    let cz: Vec<Complex<f64>> = computed.iter().map(|z| c(z.re.as_f64(), z.im.as_f64())).collect();
    let m = match_multisets(&pz, &cz, f64::INFINITY);
    let mut out: Vec<(Prediction, Complex<f64>)> = m.pairs.iter().map(|(i, j, _)| (preds[*i], cz[*j])).collect();
    out.sort_by(|a, b| mode_order(&a.0.zeta, &b.0.zeta));
    out
}
