//! Canonical first-order form `v̇ = −iA(β)v + f` built from the factorization `M_H = KᵀK`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm_real, sym_eigen};
use crate::model::{check_vec, LagrangianSystem, State};
use crate::scalar::{ci, hdot, to_complex, CMat, CVec, RMat, Scalar};

/// Positive semidefinite square root through the symmetric eigendecomposition.
///
/// Eigenvalues in `[-tol·‖m‖, 0)` are clamped to zero.
pub fn psd_sqrt<T: Scalar>(m: &RMat<T>, tol: f64) -> Result<RMat<T>> {
    let (vals, vecs) = sym_eigen(m);
    let norm = vals.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    let floor = -T::lit(tol) * norm;
    if let Some(&min) = vals.iter().next() {
        if min < floor {
            return Err(Error::NotPsd { min_eigenvalue: min.as_f64() });
        }
    }
    let roots = vals.map(|v| v.max(T::zero()).sqrt());
    Ok(symmetrize(&(&vecs * RMat::from_diagonal(&roots) * vecs.transpose())))
}

/// Closed-form root of a 2×2 PSD matrix: `(√det·1 + M) / √(tr M + 2√det)`.
pub fn psd_sqrt_2x2<T: Scalar>(m: &RMat<T>) -> Result<RMat<T>> {
    if m.nrows() != 2 || m.ncols() != 2 {
        return Err(Error::Dimension("closed-form square root needs a 2x2 matrix".into()));
    }
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let sdet = det.max(T::zero()).sqrt();
    let denom2 = m.trace() + T::lit(2.0) * sdet;
    if denom2 <= T::zero() {
        return Ok(RMat::zeros(2, 2));
    }
    Ok((RMat::identity(2, 2) * sdet + m) / denom2.sqrt())
}

/// `m^{-1/2}` from the eigendecomposition of `m` itself.
fn spd_inv_sqrt<T: Scalar>(m: &RMat<T>) -> Result<(RMat<T>, T)> {
    let (vals, vecs) = sym_eigen(m);
    let n = vals.len();
    let lo = vals[0];
    let hi = vals[n - 1];
    let cond = if lo > T::zero() { hi / lo } else { T::max_value().unwrap_or(hi) };
    if lo <= T::lit(n as f64) * T::EPSILON * hi.abs() {
        return Err(Error::Conditioning { condition: cond.as_f64() });
    }
    let inv_roots = vals.map(|v| T::one() / v.sqrt());
    Ok((symmetrize(&(&vecs * RMat::from_diagonal(&inv_roots) * vecs.transpose())), cond))
}

fn symmetrize<T: Scalar>(m: &RMat<T>) -> RMat<T> {
    (m + m.transpose()) * T::lit(0.5)
}

/// Blocks of the canonical form.
///
/// `K = [[K_p, −K_pθ], [0, K_q]]` with `K_p = √α⁻¹`, `K_q = √η`, so that the
/// top block of `v = K[P; Q]` is `√α Q̇`.
#[derive(Debug, Clone)]
pub struct CanonicalSystem<T: Scalar> {
    pub n: usize,
    pub k_p: RMat<T>,
    pub k_q: RMat<T>,
    pub k_block: RMat<T>,
    /// `Φ = K_q K_p`.
    pub phi: RMat<T>,
    /// `R̃ = K_p R K_p`.
    pub r_tilde: RMat<T>,
    /// `Ω = [[−2iK_pθK_p, −iΦᵀ], [iΦ, 0]]`.
    pub omega: CMat<T>,
    /// `B = diag(R̃, 0)`.
    pub b_mat: RMat<T>,
    /// Condition number of `α`.
    pub alpha_condition: T,
}

pub fn build_canonical<T: Scalar>(sys: &LagrangianSystem<T>, tol: f64) -> Result<CanonicalSystem<T>> {
    let n = sys.n();
    let (k_p, alpha_condition) = spd_inv_sqrt(&sys.alpha)?;
    let k_q = psd_sqrt(&sys.eta, tol)?;
    let phi = &k_q * &k_p;
    let r_tilde = symmetrize(&(&k_p * &sys.r_mat * &k_p));

    let mut k_block = RMat::zeros(2 * n, 2 * n);
    k_block.view_mut((0, 0), (n, n)).copy_from(&k_p);
    k_block.view_mut((0, n), (n, n)).copy_from(&(-&k_p * &sys.theta));
    k_block.view_mut((n, n), (n, n)).copy_from(&k_q);

    let mut omega = CMat::zeros(2 * n, 2 * n);
    if sys.is_gyroscopic() {
        let kt = &k_p * &sys.theta * &k_p;
        // K_pθK_p is skew; store its exactly skew part so Ω_p is exactly Hermitian.
        let kt = (&kt - kt.transpose()) * T::lit(0.5);
        omega.view_mut((0, 0), (n, n)).copy_from(&to_complex(&kt).map(|z| z * ci::<T>() * T::lit(-2.0)));
    }
    omega.view_mut((0, n), (n, n)).copy_from(&to_complex(&phi.transpose()).map(|z| -z * ci::<T>()));
    omega.view_mut((n, 0), (n, n)).copy_from(&to_complex(&phi).map(|z| z * ci::<T>()));

    let mut b_mat = RMat::zeros(2 * n, 2 * n);
    b_mat.view_mut((0, 0), (n, n)).copy_from(&r_tilde);

    Ok(CanonicalSystem { n, k_p, k_q, k_block, phi, r_tilde, omega, b_mat, alpha_condition })
}

/// `J = [[0, −1], [1, 0]]` in `N`-blocks.
pub fn symplectic_j<T: Scalar>(n: usize) -> RMat<T> {
    let mut j = RMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = -T::one();
        j[(n + i, i)] = T::one();
    }
    j
}

impl<T: Scalar> CanonicalSystem<T> {
    /// `A(β) = Ω − iβB`.
    pub fn operator(&self, beta: T) -> CMat<T> {
        let b = to_complex(&self.b_mat).map(|z| z * ci::<T>() * beta);
        &self.omega - b
    }

    /// The real matrix `−iA(β) = KJKᵀ − βB`.
    pub fn real_generator(&self, beta: T) -> RMat<T> {
        let n = self.n;
        let mut x = RMat::zeros(2 * n, 2 * n);
        for i in 0..2 * n {
            for j in 0..2 * n {
                // −iΩ is real because Ω is purely imaginary.
                x[(i, j)] = self.omega[(i, j)].im;
            }
        }
        x - &self.b_mat * beta
    }

    /// `‖Ω‖`, which equals `ω_max`.
    pub fn omega_norm(&self) -> T {
        spectral_norm_real(&self.real_generator(T::zero()))
    }

    /// `v = K [αQ̇ + θQ; Q]`.
    pub fn state_to_force_vars(&self, sys: &LagrangianSystem<T>, s: &State<T>) -> Result<CVec<T>> {
        let n = self.n;
        check_vec(&s.q, n, "coordinates")?;
        check_vec(&s.qdot, n, "velocities")?;
        let p = to_complex(&sys.alpha) * &s.qdot + to_complex(&sys.theta) * &s.q;
        let mut u = CVec::zeros(2 * n);
        u.rows_mut(0, n).copy_from(&p);
        u.rows_mut(n, n).copy_from(&s.q);
        Ok(to_complex(&self.k_block) * u)
    }

    /// `f = [K_p F; 0]`.
    pub fn force_vars(&self, force: &CVec<T>) -> Result<CVec<T>> {
        let n = self.n;
        check_vec(force, n, "force")?;
        let mut f = CVec::zeros(2 * n);
        f.rows_mut(0, n).copy_from(&(to_complex(&self.k_p) * force));
        Ok(f)
    }
}

pub fn system_operator<T: Scalar>(can: &CanonicalSystem<T>, beta: T) -> CMat<T> {
    can.operator(beta)
}

/// Normalized gaps between the canonical and Lagrangian energetics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EquivalenceResiduals {
    pub energy: f64,
    pub dissipation: f64,
    pub work: f64,
}

impl EquivalenceResiduals {
    pub fn max(&self) -> f64 {
        self.energy.max(self.dissipation).max(self.work)
    }
}

fn relgap<T: Scalar>(a: T, b: T, bound: T) -> f64 {
    let gap = (a - b).abs();
    if bound > T::zero() {
        (gap / bound).as_f64()
    } else {
        gap.as_f64()
    }
}

/// Compares `½(v,v)`, `β(v,Bv)`, `Re(v,f)` with `H`, `2R`, `Re(Q̇,F)`.
///
/// Each gap is divided by the Cauchy–Schwarz bound of the Lagrangian side.
pub fn energetic_equivalence_check<T: Scalar>(
    sys: &LagrangianSystem<T>,
    can: &CanonicalSystem<T>,
    s: &State<T>,
    force: &CVec<T>,
) -> Result<EquivalenceResiduals> {
    let e = crate::model::energies(sys, s, force)?;
    let v = can.state_to_force_vars(sys, s)?;
    let f = can.force_vars(force)?;
    let half = T::lit(0.5);
    let u = half * v.norm_squared();
    let w_dis = sys.beta * hdot(&v, &(to_complex(&can.b_mat) * &v)).re;
    let w = hdot(&v, &f).re;

    let qd2 = s.qdot.norm_squared();
    let q2 = s.q.norm_squared();
    let e_bound = half * (spectral_norm_real(&sys.alpha) * qd2 + spectral_norm_real(&sys.eta) * q2);
    let d_bound = sys.beta * spectral_norm_real(&sys.r_mat) * qd2;
    let w_bound = s.qdot.norm() * force.norm();
    Ok(EquivalenceResiduals {
        energy: relgap(u, e.total, e_bound),
        dissipation: relgap(w_dis, e.dissipated_power, d_bound),
        work: relgap(w, e.work_rate, w_bound),
    })
}

/// `Ω` evaluated directly as `iKJKᵀ`; an independent route for checks.
pub fn omega_from_k<T: Scalar>(can: &CanonicalSystem<T>) -> CMat<T> {
    let kjk = &can.k_block * symplectic_j::<T>(can.n) * can.k_block.transpose();
    to_complex(&kjk).map(|z| z * ci::<T>())
}
