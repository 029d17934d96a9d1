//! The dissipative Lagrangian system `α Q̈ + (2θ + βR) Q̇ + η Q = F` and its energetics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, max_asymmetry, max_skew_defect, numerical_rank_real, spectral_norm_real, sym_eigen};
use crate::scalar::{hdot, to_complex, CVec, RMat, Scalar};

/// Kinetic form `alpha`, gyroscopic form `theta`, potential form `eta`,
/// Rayleigh form `r_mat` and loss parameter `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianSystem<T: Scalar> {
    pub alpha: RMat<T>,
    pub theta: RMat<T>,
    pub eta: RMat<T>,
    pub r_mat: RMat<T>,
    pub beta: T,
}

impl<T: Scalar> LagrangianSystem<T> {
    /// Checks shapes and finiteness only. Definiteness is left to [`validate_system`].
    pub fn new(alpha: RMat<T>, theta: RMat<T>, eta: RMat<T>, r_mat: RMat<T>, beta: T) -> Result<Self> {
        let n = alpha.nrows();
        if n == 0 {
            return Err(Error::Dimension("system must have at least one degree of freedom".into()));
        }
        for (name, m) in [("alpha", &alpha), ("theta", &theta), ("eta", &eta), ("R", &r_mat)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if !all_finite(m) {
                return Err(Error::NonFinite(format!("{name} has non-finite entries")));
            }
        }
        if !beta.is_finite() {
            return Err(Error::NonFinite("beta is not finite".into()));
        }
        Ok(Self { alpha, theta, eta, r_mat, beta })
    }

    pub fn n(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn with_beta(&self, beta: T) -> Self {
        Self { beta, ..self.clone() }
    }

    pub fn is_gyroscopic(&self) -> bool {
        self.theta.iter().any(|x| *x != T::zero())
    }

    /// Largest of the operator norms of the four forms; the reference scale for
    /// relative tolerances.
    pub fn scale(&self) -> T {
        [&self.alpha, &self.theta, &self.eta, &self.r_mat]
            .iter()
            .map(|m| spectral_norm_real(m))
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// `M_L = [[α, θ], [θᵀ, −η]]`, the Lagrangian as a quadratic form in `[Q̇; Q]`.
    pub fn lagrangian_block(&self) -> RMat<T> {
        let n = self.n();
        let mut m = RMat::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.alpha);
        m.view_mut((0, n), (n, n)).copy_from(&self.theta);
        m.view_mut((n, 0), (n, n)).copy_from(&self.theta.transpose());
        m.view_mut((n, n), (n, n)).copy_from(&(-&self.eta));
        m
    }

    /// `M_H = [[α⁻¹, −α⁻¹θ], [θα⁻¹, θᵀα⁻¹θ + η]]`, the Hamiltonian as a quadratic form in `[P; Q]`.
    pub fn hamiltonian_block(&self) -> Result<RMat<T>> {
        let n = self.n();
        let ainv = self
            .alpha
            .clone()
            .try_inverse()
            .ok_or(Error::Conditioning { condition: f64::INFINITY })?;
        let ainv = (&ainv + ainv.transpose()) * T::lit(0.5);
        let mut m = RMat::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&ainv);
        m.view_mut((0, n), (n, n)).copy_from(&(-&ainv * &self.theta));
        m.view_mut((n, 0), (n, n)).copy_from(&(&self.theta * &ainv));
        m.view_mut((n, n), (n, n))
            .copy_from(&(self.theta.transpose() * &ainv * &self.theta + &self.eta));
        Ok(m)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Minimum eigenvalue for definiteness checks, largest defect for symmetry checks.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub overall: bool,
    /// Condition number of `alpha`; reported, never capped.
    pub alpha_condition: f64,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Checks every structural invariant against `tol` relative to the system scale.
pub fn validate_system<T: Scalar>(sys: &LagrangianSystem<T>, tol: f64) -> ValidationReport {
    let scale = sys.scale().max(T::MIN_POSITIVE);
    let thr = T::lit(tol) * scale;
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, margin: T| {
        checks.push(Check { name: name.to_string(), passed, margin: margin.as_f64() });
    };

    let a_asym = max_asymmetry(&sys.alpha);
    push("alpha symmetry", a_asym <= thr, a_asym);
    let (a_eig, _) = sym_eigen(&sys.alpha);
    let a_min = a_eig[0];
    let a_max = a_eig[a_eig.len() - 1];
    push("alpha positive definite", a_min > thr, a_min);

    let t_def = max_skew_defect(&sys.theta);
    push("theta skew-symmetry", t_def <= thr, t_def);

    let e_asym = max_asymmetry(&sys.eta);
    push("eta symmetry", e_asym <= thr, e_asym);
    let e_min = sym_eigen(&sys.eta).0[0];
    push("eta positive semidefinite", e_min >= -thr, e_min);

    let r_asym = max_asymmetry(&sys.r_mat);
    push("R symmetry", r_asym <= thr, r_asym);
    let r_min = sym_eigen(&sys.r_mat).0[0];
    push("R positive semidefinite", r_min >= -thr, r_min);
    let r_norm = spectral_norm_real(&sys.r_mat);
    push("R nonzero", r_norm > thr, r_norm);

    push("beta nonnegative", sys.beta >= T::zero(), sys.beta);

    let overall = checks.iter().all(|c| c.passed);
    let alpha_condition = if a_min > T::zero() { (a_max / a_min).as_f64() } else { f64::INFINITY };
    ValidationReport { checks, overall, alpha_condition }
}

/// Fails with the first violated invariant.
pub fn require_valid<T: Scalar>(sys: &LagrangianSystem<T>, tol: f64) -> Result<()> {
    let report = validate_system(sys, tol);
    let first = report.failures().next().cloned();
    match first {
        None => Ok(()),
        Some(c) => Err(Error::Invariant(format!("{} fails (margin {:e})", c.name, c.margin))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossFraction {
    pub n_r: usize,
    pub n: usize,
    pub delta_r: f64,
    pub two_component: bool,
}

/// `N_R = rank R` and `δ_R = N_R / N`.
pub fn loss_fraction<T: Scalar>(sys: &LagrangianSystem<T>, rank_tol: Option<f64>) -> Result<LossFraction> {
    let n = sys.n();
    let n_r = numerical_rank_real(&sys.r_mat, rank_tol);
    if n_r == 0 {
        return Err(Error::Invariant("R has numerical rank 0".into()));
    }
    Ok(LossFraction { n_r, n, delta_r: n_r as f64 / n as f64, two_component: n_r < n })
}

/// Coordinates `Q` and velocities `Q̇`, both complex.
#[derive(Debug, Clone, PartialEq)]
pub struct State<T: Scalar> {
    pub q: CVec<T>,
    pub qdot: CVec<T>,
}

impl<T: Scalar> State<T> {
    pub fn new(q: CVec<T>, qdot: CVec<T>) -> Self {
        Self { q, qdot }
    }

    pub fn zeros(n: usize) -> Self {
        Self { q: CVec::zeros(n), qdot: CVec::zeros(n) }
    }

    pub fn norm_sq(&self) -> T {
        self.q.norm_squared() + self.qdot.norm_squared()
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.q.len() != n || self.qdot.len() != n {
            return Err(Error::Dimension(format!(
                "state has sizes ({}, {}), expected {n}",
                self.q.len(),
                self.qdot.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown<T: Scalar> {
    pub kinetic: T,
    pub potential: T,
    pub total: T,
    pub dissipated_power: T,
    pub work_rate: T,
}

pub(crate) fn check_vec<T: Scalar>(v: &CVec<T>, n: usize, what: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::Dimension(format!("{what} has length {}, expected {n}", v.len())));
    }
    Ok(())
}

/// `T = ½(Q̇,αQ̇) + ½Re(Q̇,θQ)`, `V = ½(Q,ηQ) − ½Re(Q̇,θQ)`, `2R = β(Q̇,RQ̇)`, work `Re(Q̇,F)`.
pub fn energies<T: Scalar>(sys: &LagrangianSystem<T>, s: &State<T>, force: &CVec<T>) -> Result<EnergyBreakdown<T>> {
    let n = sys.n();
    s.check(n)?;
    check_vec(force, n, "force")?;
    let half = T::lit(0.5);
    let a_term = hdot(&s.qdot, &(to_complex(&sys.alpha) * &s.qdot)).re;
    let g_term = hdot(&s.qdot, &(to_complex(&sys.theta) * &s.q)).re;
    let e_term = hdot(&s.q, &(to_complex(&sys.eta) * &s.q)).re;
    let r_term = hdot(&s.qdot, &(to_complex(&sys.r_mat) * &s.qdot)).re;
    let kinetic = half * a_term + half * g_term;
    let potential = half * e_term - half * g_term;
    Ok(EnergyBreakdown {
        kinetic,
        potential,
        // Summed from the θ-free forms so the gyroscopic terms cancel exactly.
        total: half * a_term + half * e_term,
        dissipated_power: sys.beta * r_term,
        work_rate: hdot(&s.qdot, force).re,
    })
}

/// `αQ̈ + (2θ + βR)Q̇ + ηQ − F`.
pub fn el_residual<T: Scalar>(
    sys: &LagrangianSystem<T>,
    s: &State<T>,
    qddot: &CVec<T>,
    force: &CVec<T>,
) -> Result<CVec<T>> {
    let n = sys.n();
    s.check(n)?;
    check_vec(qddot, n, "acceleration")?;
    check_vec(force, n, "force")?;
    let damp = &sys.theta * T::lit(2.0) + &sys.r_mat * sys.beta;
    Ok(to_complex(&sys.alpha) * qddot + to_complex(&damp) * &s.qdot + to_complex(&sys.eta) * &s.q - force)
}
