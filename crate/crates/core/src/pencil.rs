//! The quadratic pencil `C(ζ,β) = ζ²α + iζ(2θ + βR) − η` and its link to `A(β)`.

use nalgebra::{Complex, ComplexField};
use serde::Serialize;

use crate::canonical::{psd_sqrt, symplectic_j, CanonicalSystem};
use crate::error::{Error, Result};
use crate::linalg::{log_det, spectral_norm, spectral_norm_real, LogDet};
use crate::model::LagrangianSystem;
use crate::scalar::{ci, cr, to_complex, CMat, CVec, RMat, Scalar};

pub fn pencil_eval<T: Scalar>(sys: &LagrangianSystem<T>, zeta: Complex<T>, beta: T) -> CMat<T> {
    let damp = &sys.theta * T::lit(2.0) + &sys.r_mat * beta;
    let a = to_complex(&sys.alpha) * (zeta * zeta);
    let d = to_complex(&damp) * (ci::<T>() * zeta);
    a + d - to_complex(&sys.eta)
}

/// Scale of `C(ζ,β)` used in residual bounds: `|ζ|²‖α‖ + |ζ|(2‖θ‖ + β‖R‖) + ‖η‖`.
pub fn pencil_scale<T: Scalar>(sys: &LagrangianSystem<T>, zeta: Complex<T>, beta: T) -> T {
    let z = zeta.modulus();
    z * z * spectral_norm_real(&sys.alpha)
        + z * (T::lit(2.0) * spectral_norm_real(&sys.theta) + beta * spectral_norm_real(&sys.r_mat))
        + spectral_norm_real(&sys.eta)
}

/// A pencil eigenpair `C(ζ,β)q = 0`.
#[derive(Debug, Clone)]
pub struct PencilEig<T: Scalar> {
    pub zeta: Complex<T>,
    pub q: CVec<T>,
}

impl<T: Scalar> PencilEig<T> {
    /// `‖C(ζ,β)q‖ / (‖q‖ · scale)`.
    pub fn relative_residual(&self, sys: &LagrangianSystem<T>, beta: T) -> T {
        let r = (pencil_eval(sys, self.zeta, beta) * &self.q).norm();
        let denom = self.q.norm() * pencil_scale(sys, self.zeta, beta);
        if denom > T::zero() {
            r / denom
        } else {
            r
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DetEquivalence {
    pub lhs: Complex<f64>,
    pub rhs: Complex<f64>,
    pub relerr: f64,
}

/// `|a − b| / (|a| + |b|)` evaluated in log form so that huge or tiny
/// determinants neither overflow nor underflow.
pub fn logdet_relerr<T: Scalar>(a: &LogDet<T>, b: &LogDet<T>) -> f64 {
    match (a.singular, b.singular) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        (false, false) => {
            let ratio = (b.phase / a.phase) * (b.log_abs - a.log_abs).exp();
            ((cr(T::one()) - ratio).modulus() / (T::one() + ratio.modulus())).as_f64()
        }
    }
}

fn to_c64<T: Scalar>(z: Complex<T>) -> Complex<f64> {
    Complex::new(z.re.as_f64(), z.im.as_f64())
}

/// Compares `det(ζ1 − A(β))` with `det C(ζ,β) / det α`.
pub fn det_equivalence<T: Scalar>(
    sys: &LagrangianSystem<T>,
    can: &CanonicalSystem<T>,
    zeta: Complex<T>,
    beta: T,
) -> DetEquivalence {
    let n2 = 2 * sys.n();
    let lhs_m = CMat::<T>::identity(n2, n2) * zeta - can.operator(beta);
    let lhs = log_det(&lhs_m);
    let c = log_det(&pencil_eval(sys, zeta, beta));
    let a = log_det(&to_complex(&sys.alpha));
    let rhs = if c.singular {
        c
    } else {
        LogDet { log_abs: c.log_abs - a.log_abs, phase: c.phase / a.phase, singular: false }
    };
    DetEquivalence { lhs: to_c64(lhs.value()), rhs: to_c64(rhs.value()), relerr: logdet_relerr(&lhs, &rhs) }
}

/// The four factors whose product is `ζ1 − A(β)` for `ζ ≠ 0`:
/// `[[K_p, ζ⁻¹iΦᵀ], [0, 1]] · diag(ζ⁻¹, ζ) · diag(C, 1) · [[K_p, 0], [−ζ⁻¹iΦ, 1]]`.
pub fn operator_factors<T: Scalar>(
    sys: &LagrangianSystem<T>,
    can: &CanonicalSystem<T>,
    zeta: Complex<T>,
    beta: T,
) -> Result<[CMat<T>; 4]> {
    if zeta.modulus() == T::zero() {
        return Err(Error::Unsupported("factorization requires a nonzero spectral parameter".into()));
    }
    let n = sys.n();
    let zinv = cr(T::one()) / zeta;
    let kp = to_complex(&can.k_p);
    let phi = to_complex(&can.phi);
    let eye = CMat::<T>::identity(n, n);

    let mut f1 = CMat::identity(2 * n, 2 * n);
    f1.view_mut((0, 0), (n, n)).copy_from(&kp);
    f1.view_mut((0, n), (n, n)).copy_from(&(phi.transpose() * (zinv * ci::<T>())));

    let mut f2 = CMat::zeros(2 * n, 2 * n);
    f2.view_mut((0, 0), (n, n)).copy_from(&(&eye * zinv));
    f2.view_mut((n, n), (n, n)).copy_from(&(&eye * zeta));

    let mut f3 = CMat::identity(2 * n, 2 * n);
    f3.view_mut((0, 0), (n, n)).copy_from(&pencil_eval(sys, zeta, beta));

    let mut f4 = CMat::identity(2 * n, 2 * n);
    f4.view_mut((0, 0), (n, n)).copy_from(&kp.transpose());
    f4.view_mut((n, 0), (n, n)).copy_from(&(phi * (-zinv * ci::<T>())));

    Ok([f1, f2, f3, f4])
}

/// Relative residual of a canonical eigenpair: `‖Aw − ζw‖ / (‖w‖‖A‖)`.
pub fn operator_residual<T: Scalar>(a: &CMat<T>, zeta: Complex<T>, w: &CVec<T>) -> T {
    let r = (a * w - w * zeta).norm();
    let denom = w.norm() * spectral_norm(a);
    if denom > T::zero() {
        r / denom
    } else {
        r
    }
}

/// `w = [−iζ√α q; √η q]`.
pub fn pencil_to_canonical<T: Scalar>(
    sys: &LagrangianSystem<T>,
    pe: &PencilEig<T>,
    beta: T,
    tol: f64,
) -> Result<CVec<T>> {
    if pe.zeta.modulus() == T::zero() {
        return Err(Error::Unsupported("the eigenvector map is undefined at zero eigenvalue".into()));
    }
    let res = pe.relative_residual(sys, beta);
    if res > T::lit(tol) {
        return Err(Error::Precondition(format!("pencil residual {:e} exceeds {tol:e}", res.as_f64())));
    }
    let n = sys.n();
    let sa = to_complex(&psd_sqrt(&sys.alpha, 1e-10)?);
    let se = to_complex(&psd_sqrt(&sys.eta, 1e-10)?);
    let mut w = CVec::zeros(2 * n);
    w.rows_mut(0, n).copy_from(&(sa * &pe.q * (-ci::<T>() * pe.zeta)));
    w.rows_mut(n, n).copy_from(&(se * &pe.q));
    Ok(w)
}

/// `q = (i/ζ) K_p φ` where `φ` is the top block of `w`.
pub fn canonical_to_pencil<T: Scalar>(
    sys: &LagrangianSystem<T>,
    can: &CanonicalSystem<T>,
    zeta: Complex<T>,
    w: &CVec<T>,
    beta: T,
    tol: f64,
) -> Result<PencilEig<T>> {
    if zeta.modulus() == T::zero() {
        return Err(Error::Unsupported("the eigenvector map is undefined at zero eigenvalue".into()));
    }
    let n = sys.n();
    if w.len() != 2 * n {
        return Err(Error::Dimension(format!("eigenvector has length {}, expected {}", w.len(), 2 * n)));
    }
    let top = w.rows(0, n).clone_owned();
    if top.norm() <= T::lit(tol) * w.norm() {
        return Err(Error::Inconsistent("top block of a nonzero-eigenvalue eigenvector vanishes".into()));
    }
    let q = to_complex(&can.k_p) * top * (ci::<T>() / zeta);
    let pe = PencilEig { zeta, q };
    let res = pe.relative_residual(sys, beta);
    if res > T::lit(tol) {
        return Err(Error::Precondition(format!(
            "recovered pencil residual {:e} exceeds {tol:e}; input is not an eigenpair",
            res.as_f64()
        )));
    }
    Ok(pe)
}

/// `M(β) = (J − [[βR, 0], [0, 0]]) M_H`.
pub fn hamiltonian_matrix<T: Scalar>(sys: &LagrangianSystem<T>, beta: T) -> Result<RMat<T>> {
    let n = sys.n();
    let mut left = symplectic_j::<T>(n);
    let mut tl = left.view_mut((0, 0), (n, n));
    tl -= &sys.r_mat * beta;
    Ok(left * sys.hamiltonian_block()?)
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsilonCheck {
    pub epsilon: f64,
    /// Gap between `det M_ε` and `det(P S_ε − Q R)` with `S_ε = S + ε1`.
    pub identity_gap: f64,
    /// Gap between `det M_ε` and `det M`.
    pub limit_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SchurReport {
    /// Reconstruction error of the block factorization, relative to `‖M‖`.
    pub aitken_residual: Option<f64>,
    /// Gap between `det M` and `det S · det(P − QS⁻¹R)`.
    pub schur_det_gap: Option<f64>,
    pub commuting: bool,
    /// Gap between `det M` and `det(PS − QR)`.
    pub commuting_det_gap: Option<f64>,
    pub epsilon_checks: Vec<EpsilonCheck>,
}

pub const EPSILON_LADDER: [f64; 3] = [1e-4, 1e-6, 1e-8];

fn assemble<T: Scalar>(p: &CMat<T>, q: &CMat<T>, r: &CMat<T>, s: &CMat<T>) -> CMat<T> {
    let (a, b) = (p.nrows(), s.nrows());
    let mut m = CMat::zeros(a + b, a + b);
    m.view_mut((0, 0), (a, a)).copy_from(p);
    m.view_mut((0, a), (a, b)).copy_from(q);
    m.view_mut((a, 0), (b, a)).copy_from(r);
    m.view_mut((a, a), (b, b)).copy_from(s);
    m
}

/// Product of column norms, an upper bound on `|det M|`.
fn hadamard_bound<T: Scalar>(m: &CMat<T>) -> T {
    m.column_iter().fold(T::one(), |acc, c| acc * c.norm())
}

/// Relative gap that falls back to the Hadamard bound when both values are
/// negligible against it.
fn det_gap<T: Scalar>(a: Complex<T>, b: Complex<T>, bound: T) -> f64 {
    let gap = (a - b).modulus();
    let size = a.modulus() + b.modulus();
    let floor = bound * T::lit(1e-8);
    if size > floor {
        (gap / size).as_f64()
    } else if bound > T::zero() {
        (gap / bound).as_f64()
    } else {
        gap.as_f64()
    }
}

fn invertible<T: Scalar>(s: &CMat<T>) -> Option<CMat<T>> {
    let sv = crate::linalg::singular_values(s);
    let smax = sv.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let smin = sv.iter().copied().fold(smax, |a, b| a.min(b));
    if smax == T::zero() || smin <= T::lit(s.nrows() as f64) * T::EPSILON * smax * T::lit(1e3) {
        return None;
    }
    s.clone().try_inverse()
}

/// `M = [[1, QS⁻¹], [0, 1]] · diag(P − QS⁻¹R, S) · [[1, 0], [S⁻¹R, 1]]`.
pub fn aitken_factors<T: Scalar>(
    p: &CMat<T>,
    q: &CMat<T>,
    r: &CMat<T>,
    s: &CMat<T>,
) -> Result<[CMat<T>; 3]> {
    let sinv = invertible(s).ok_or_else(|| {
        Error::Precondition("S is singular; use the commuting-block determinant identity instead".into())
    })?;
    let (a, b) = (p.nrows(), s.nrows());
    let mut upper = CMat::identity(a + b, a + b);
    upper.view_mut((0, a), (a, b)).copy_from(&(q * &sinv));
    let mut mid = CMat::zeros(a + b, a + b);
    mid.view_mut((0, 0), (a, a)).copy_from(&(p - q * &sinv * r));
    mid.view_mut((a, a), (b, b)).copy_from(s);
    let mut lower = CMat::identity(a + b, a + b);
    lower.view_mut((a, 0), (b, a)).copy_from(&(&sinv * r));
    Ok([upper, mid, lower])
}

fn check_blocks<T: Scalar>(p: &CMat<T>, q: &CMat<T>, r: &CMat<T>, s: &CMat<T>) -> Result<()> {
    let (a, b) = (p.nrows(), s.nrows());
    let ok = p.is_square()
        && s.is_square()
        && q.nrows() == a
        && q.ncols() == b
        && r.nrows() == b
        && r.ncols() == a;
    if !ok {
        return Err(Error::Dimension("blocks are not conformable".into()));
    }
    Ok(())
}

/// Verifies the block factorization and the Schur-complement determinant
/// identities. The commuting-block identity `det M = det(PS − QR)` needs
/// square blocks of equal size with `RS = SR`.
pub fn schur_identities<T: Scalar>(p: &CMat<T>, q: &CMat<T>, r: &CMat<T>, s: &CMat<T>) -> Result<SchurReport> {
    check_blocks(p, q, r, s)?;
    let m = assemble(p, q, r, s);
    let det_m = log_det(&m).value();
    let bound = hadamard_bound(&m);
    let mnorm = spectral_norm(&m);

    let (aitken_residual, schur_det_gap) = match aitken_factors(p, q, r, s) {
        Ok([u, d, l]) => {
            let recon = &u * &d * &l;
            let res = (recon - &m).norm() / mnorm.max(T::MIN_POSITIVE);
            let a = p.nrows();
            let b = s.nrows();
            let schur = d.view((0, 0), (a, a)).clone_owned();
            let via = log_det(&d.view((a, a), (b, b)).clone_owned()).value() * log_det(&schur).value();
            (Some(res.as_f64()), Some(det_gap(det_m, via, bound)))
        }
        Err(Error::Precondition(_)) => (None, None),
        Err(e) => return Err(e),
    };

    let same = p.nrows() == s.nrows();
    let commute_tol = T::lit(1e-12) * (r.norm() * s.norm()).max(T::MIN_POSITIVE);
    let commuting = same && (r * s - s * r).norm() <= commute_tol;
    if !commuting && aitken_residual.is_none() {
        return Err(Error::Precondition(
            "S is singular and RS != SR; neither determinant identity applies".into(),
        ));
    }

    let mut commuting_det_gap = None;
    let mut epsilon_checks = Vec::new();
    if commuting {
        let direct = log_det(&(p * s - q * r)).value();
        commuting_det_gap = Some(det_gap(det_m, direct, bound));
        let n = s.nrows();
        for eps in EPSILON_LADDER {
            let s_eps = s + CMat::<T>::identity(n, n) * cr(T::lit(eps));
            let m_eps = assemble(p, q, r, &s_eps);
            let det_eps = log_det(&m_eps).value();
            let ident = log_det(&(p * &s_eps - q * r)).value();
            epsilon_checks.push(EpsilonCheck {
                epsilon: eps,
                identity_gap: det_gap(det_eps, ident, hadamard_bound(&m_eps)),
                limit_gap: det_gap(det_eps, det_m, bound),
            });
        }
    }
    Ok(SchurReport { aitken_residual, schur_det_gap, commuting, commuting_det_gap, epsilon_checks })
}
