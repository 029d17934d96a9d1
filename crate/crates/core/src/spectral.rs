//! Eigenmodes of `A(β)`, spectral symmetry, disc bounds, the modal dichotomy
//! and quality factors. The bounds and dichotomy work for any square matrix.

use nalgebra::linalg::Schur;
use nalgebra::{Complex, ComplexField};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{herm_eigen, im_part, match_multisets, numerical_rank, re_part, singular_values, spectral_norm};
use crate::scalar::{cr, CMat, CVec, RMat, Scalar};
use crate::tolerances::Tolerances;

const SCHUR_MAX_ITER: usize = 10_000;

/// Raw eigendecomposition: unit eigenvectors stored as columns.
#[derive(Debug, Clone)]
pub struct Eigen<T: Scalar> {
    pub values: Vec<Complex<T>>,
    pub vectors: CMat<T>,
    pub residuals: Vec<T>,
    /// Eigenvalues whose computed eigenvectors are numerically parallel to
    /// another one in the same cluster.
    pub defective: Vec<bool>,
}

fn schur_complex<T: Scalar>(a: &CMat<T>) -> Result<(CMat<T>, CMat<T>)> {
    let s = Schur::try_new(a.clone(), T::EPSILON, SCHUR_MAX_ITER).ok_or_else(|| {
        Error::Solver(format!(
            "complex Schur iteration did not converge (matrix norm {:e}, smallest singular value {:e})",
            spectral_norm(a).as_f64(),
            singular_values(a).iter().copied().fold(T::max_value().unwrap_or(T::one()), |x, y| x.min(y)).as_f64()
        ))
    })?;
    Ok(s.unpack())
}

/// Eigenvectors of an upper-triangular matrix by back substitution.
///
/// Near-zero pivots are replaced by `eps·‖T‖`, so defective clusters yield
/// nearly parallel vectors rather than a failure.
fn triangular_eigenvectors<T: Scalar>(t: &CMat<T>) -> CMat<T> {
    let n = t.nrows();
    let tnorm = t.norm().max(T::MIN_POSITIVE);
    let smin = T::EPSILON * tnorm;
    let mut x = CMat::zeros(n, n);
    for k in 0..n {
        let lam = t[(k, k)];
        x[(k, k)] = cr(T::one());
        for i in (0..k).rev() {
            let mut s = cr(T::zero());
            for j in i + 1..=k {
                s += t[(i, j)] * x[(j, k)];
            }
            let mut d = t[(i, i)] - lam;
            if d.modulus() < smin {
                d = cr(smin);
            }
            x[(i, k)] = -s / d;
        }
        let nk = x.column(k).norm();
        if nk > T::zero() {
            let mut col = x.column_mut(k);
            col.unscale_mut(nk);
        }
    }
    x
}

/// Rotates `w` so that its first non-negligible entry is real and positive,
/// then scales to unit norm.
pub fn normalize_phase<T: Scalar>(w: &mut CVec<T>) {
    let nrm = w.norm();
    if nrm == T::zero() {
        return;
    }
    w.unscale_mut(nrm);
    let big = w.iter().fold(T::zero(), |a, z| a.max(z.modulus()));
    let cut = big * T::lit(1e-8);
    if let Some(z) = w.iter().find(|z| z.modulus() > cut).copied() {
        let ph = z.conj().unscale(z.modulus());
        w.apply(|x| *x *= ph);
    }
}

fn residual_of<T: Scalar>(a: &CMat<T>, zeta: Complex<T>, w: &CVec<T>) -> T {
    (a * w - w * zeta).norm()
}

/// One inverse-iteration step toward the eigenvector of `zeta`.
fn refine<T: Scalar>(a: &CMat<T>, zeta: Complex<T>, w: &CVec<T>, anorm: T) -> CVec<T> {
    let n = a.nrows();
    let mut shift = zeta;
    for _ in 0..3 {
        let m = a - CMat::<T>::identity(n, n) * shift;
        if let Some(y) = m.lu().solve(w) {
            if y.iter().all(|z| z.re.is_finite() && z.im.is_finite()) && y.norm() > T::zero() {
                return y;
            }
        }
        shift += cr(T::EPSILON * anorm.max(T::one()));
    }
    w.clone()
}

/// `true` when every entry of `a` is purely imaginary, so `−ia` is real.
fn is_imaginary<T: Scalar>(a: &CMat<T>) -> bool {
    a.iter().all(|z| z.re == T::zero())
}

/// Eigenvalues of the real matrix `−ia`, mapped back by `ζ = iμ`.
///
/// The real Schur form keeps eigenvalues of real blocks exactly real, so
/// purely imaginary `ζ` stay exactly on the imaginary axis and conjugate
/// pairs of `μ` give exactly mirrored pairs `ζ`, `−conj ζ`.
fn eigenvalues_via_real_generator<T: Scalar>(a: &CMat<T>) -> Result<Vec<Complex<T>>> {
    let x = RMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].im);
    let s = Schur::try_new(x, T::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Solver("real Schur iteration did not converge".into()))?;
    Ok(s.complex_eigenvalues().iter().map(|mu| Complex::new(-mu.im, mu.re)).collect())
}

/// Dense eigendecomposition of a complex square matrix.
///
/// Eigenvalues come from the symmetric solver when `a` is Hermitian, from the
/// real Schur form of `−ia` when `a` is purely imaginary, and from the complex
/// Schur form otherwise. Eigenvectors come from back
/// substitution in the Schur form followed by one inverse-iteration step
/// at the reported eigenvalue.
pub fn eigensolve<T: Scalar>(a: &CMat<T>) -> Result<Eigen<T>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension("eigensolve needs a square matrix".into()));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("matrix passed to eigensolve".into()));
    }
    if n == 0 {
        return Ok(Eigen { values: vec![], vectors: CMat::zeros(0, 0), residuals: vec![], defective: vec![] });
    }
    let anorm = spectral_norm(a);
    // Hermitian input (zero loss) takes the symmetric route so the eigenvalues are exactly real.
    let herm_gap = (a - a.adjoint()).iter().fold(T::zero(), |m, z| m.max(z.modulus()));
    let (values, start): (Vec<Complex<T>>, CMat<T>) = if herm_gap <= T::lit(64.0) * T::EPSILON * anorm {
        let (vals, vecs) = herm_eigen(a);
        (vals.iter().map(|v| cr(*v)).collect(), vecs)
    } else {
        let (q, t) = schur_complex(a)?;
        let schur_values: Vec<Complex<T>> = (0..n).map(|i| t[(i, i)]).collect();
        let schur_vectors = &q * triangular_eigenvectors(&t);
        if is_imaginary(a) {
            let vals = eigenvalues_via_real_generator(a)?;
            let m = match_multisets(&vals, &schur_values, f64::INFINITY);
            let mut start = CMat::zeros(n, n);
            for (i, j, _) in m.pairs {
                start.set_column(i, &schur_vectors.column(j));
            }
            (vals, start)
        } else {
            (schur_values, schur_vectors)
        }
    };

    let mut vectors = CMat::zeros(n, n);
    let mut residuals = Vec::with_capacity(n);
    for (k, &zeta) in values.iter().enumerate() {
        let w0: CVec<T> = start.column(k).clone_owned();
        let mut w1 = refine(a, zeta, &w0, anorm);
        let n1 = w1.norm();
        w1.unscale_mut(n1);
        let (r0, r1) = (residual_of(a, zeta, &w0), residual_of(a, zeta, &w1));
        let mut w = if r1 <= r0 { w1 } else { w0 };
        normalize_phase(&mut w);
        residuals.push(residual_of(a, zeta, &w));
        vectors.set_column(k, &w);
    }

    let defective = detect_defective(&values, &vectors, anorm);
    Ok(Eigen { values, vectors, residuals, defective })
}

/// Flags eigenvalues in tight clusters whose eigenvectors are nearly parallel.
fn detect_defective<T: Scalar>(values: &[Complex<T>], vectors: &CMat<T>, anorm: T) -> Vec<bool> {
    let n = values.len();
    let close = T::lit(1e-6) * anorm.max(T::one());
    let mut flags = vec![false; n];
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).modulus() <= close {
                let overlap = vectors.column(i).dotc(&vectors.column(j)).modulus();
                if overlap > T::one() - T::lit(1e-6) {
                    flags[i] = true;
                    flags[j] = true;
                }
            }
        }
    }
    flags
}

/// `Q = −½|Re ζ| / Im ζ`, `+∞` for `Im ζ = 0`.
pub fn quality_factor<T: Scalar>(zeta: Complex<T>, tol_imag: T) -> Result<T> {
    if zeta.im > tol_imag {
        return Err(Error::Invariant(format!(
            "Im zeta = {:e} > 0 violates dissipativity",
            zeta.im.as_f64()
        )));
    }
    if zeta.im >= T::zero() {
        return Ok(T::one() / T::zero());
    }
    Ok(-T::lit(0.5) * zeta.re.abs() / zeta.im)
}

/// Whether `|Re ζ| ≤ tol·max(1, |Im ζ|)`.
pub fn is_overdamped<T: Scalar>(zeta: Complex<T>, tol: f64) -> bool {
    zeta.re.abs() <= T::lit(tol) * T::one().max(zeta.im.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeClass {
    Sigma0,
    Sigma1,
}

#[derive(Debug, Clone)]
pub struct Mode<T: Scalar> {
    pub zeta: Complex<T>,
    pub w: CVec<T>,
    pub residual: T,
    /// Present only when the dichotomy hypothesis holds.
    pub class: Option<ModeClass>,
    pub overdamped: bool,
    /// `|Re ζ|` within a factor 10 of the overdamping threshold, or the
    /// eigenvalue sits in a coalescing cluster.
    pub marginal: bool,
    pub defective: bool,
    pub q_factor: T,
}

#[derive(Debug, Clone)]
pub struct ModeSet<T: Scalar> {
    pub modes: Vec<Mode<T>>,
    pub a_norm: T,
}

impl<T: Scalar> ModeSet<T> {
    pub fn values(&self) -> Vec<Complex<T>> {
        self.modes.iter().map(|m| m.zeta).collect()
    }

    pub fn vectors(&self) -> CMat<T> {
        let n = self.modes.first().map_or(0, |m| m.w.len());
        let mut w = CMat::zeros(n, self.modes.len());
        for (k, m) in self.modes.iter().enumerate() {
            w.set_column(k, &m.w);
        }
        w
    }

    pub fn overdamped_count(&self) -> usize {
        self.modes.iter().filter(|m| m.overdamped).count()
    }
}

/// Ordering used everywhere modes are listed: `−Im ζ` descending, then `Re ζ` ascending.
pub fn mode_order<T: Scalar>(a: &Complex<T>, b: &Complex<T>) -> std::cmp::Ordering {
    use std::cmp::Ordering::Equal;
    (-a.im)
        .partial_cmp(&-b.im)
        .unwrap_or(Equal)
        .reverse()
        .then(a.re.partial_cmp(&b.re).unwrap_or(Equal))
}

/// Eigenmodes of a dissipative operator with the residual and dissipativity contracts enforced.
pub fn mode_set<T: Scalar>(a: &CMat<T>, tol: &Tolerances) -> Result<ModeSet<T>> {
    let eig = eigensolve(a)?;
    let a_norm = spectral_norm(a);
    let scale = a_norm.max(T::MIN_POSITIVE);
    let tol_imag = T::lit(tol.dissipativity) * scale;
    let classes = disc_classes(a, &eig.values, tol).ok();
    let mut modes = Vec::with_capacity(eig.values.len());
    for (k, &zeta) in eig.values.iter().enumerate() {
        let residual = eig.residuals[k];
        if residual > T::lit(tol.residual) * scale {
            return Err(Error::Solver(format!(
                "eigenpair {k} residual {:e} exceeds {:e}·‖A‖ (‖A‖ = {:e})",
                residual.as_f64(),
                tol.residual,
                a_norm.as_f64()
            )));
        }
        let q_factor = quality_factor(zeta, tol_imag)?;
        let ratio = zeta.re.abs() / T::one().max(zeta.im.abs());
        let tod = T::lit(tol.overdamped);
        let overdamped = ratio <= tod;
        let near_threshold = ratio <= tod * T::lit(10.0) && ratio > tod / T::lit(10.0);
        let coalescing = eig
            .values
            .iter()
            .enumerate()
            .any(|(j, z)| j != k && (*z - zeta).modulus() <= T::lit(1e-6) * T::one().max(a_norm));
        modes.push(Mode {
            zeta,
            w: eig.vectors.column(k).clone_owned(),
            residual,
            class: classes.as_ref().map(|c| c[k]),
            overdamped,
            marginal: near_threshold || (coalescing && ratio <= tod * T::lit(10.0)),
            defective: eig.defective[k],
            q_factor,
        });
    }
    modes.sort_by(|x, y| mode_order(&x.zeta, &y.zeta));
    Ok(ModeSet { modes, a_norm })
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryReport {
    /// Largest distance in the matching of `σ` with `−conj σ`.
    pub mirror_gap: f64,
    pub mirror_matched: bool,
    /// Largest `‖A conj(w) + conj(ζ) conj(w)‖ / ‖A‖` over the basis.
    pub conjugate_pairing_residual: f64,
    /// At `β = 0`: largest distance in the matching of `σ` with `−σ`.
    pub origin_gap: Option<f64>,
    /// At `β = 0`: largest `|Im ζ| / ‖A‖`.
    pub max_imag_ratio: Option<f64>,
}

/// Checks `σ = −conj σ` and the conjugation map on eigenvectors; at zero
/// loss also `σ = −σ ⊂ ℝ`.
pub fn check_symmetry<T: Scalar>(a: &CMat<T>, ms: &ModeSet<T>, lossless: bool, tol: &Tolerances) -> SymmetryReport {
    let vals = ms.values();
    let mirrored: Vec<_> = vals.iter().map(|z| -z.conj()).collect();
    let m = match_multisets(&vals, &mirrored, tol.matching);
    let scale = ms.a_norm.max(T::MIN_POSITIVE);
    let pairing = ms
        .modes
        .iter()
        .map(|md| {
            let wc = md.w.map(|z| z.conj());
            ((a * &wc + &wc * md.zeta.conj()).norm() / scale).as_f64()
        })
        .fold(0.0, f64::max);
    let (origin_gap, max_imag_ratio) = if lossless {
        let neg: Vec<_> = vals.iter().map(|z| -*z).collect();
        let o = match_multisets(&vals, &neg, tol.matching);
        let im = vals.iter().map(|z| (z.im.abs() / scale).as_f64()).fold(0.0, f64::max);
        (Some(o.max_distance), Some(im))
    } else {
        (None, None)
    };
    SymmetryReport {
        mirror_gap: m.max_distance,
        mirror_matched: m.matched,
        conjugate_pairing_residual: pairing,
        origin_gap,
        max_imag_ratio,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundEntry {
    pub zeta: Complex<f64>,
    /// Distance from `ζ` to the nearest disc centre `iγ`.
    pub disc_distance: f64,
    pub witness_gamma: f64,
    /// `|Im ζ| − (|γ| − ‖Re M‖)`, nonnegative when the lower bound holds.
    pub lower_slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub re_norm: f64,
    pub im_norm: f64,
    pub gammas: Vec<f64>,
    pub entries: Vec<BoundEntry>,
    /// Largest `dist(ζ, σ(i Im M)) − ‖Re M‖`.
    pub worst_disc_excess: f64,
    /// Largest `|Im ζ| − ‖Im M‖`.
    pub worst_imag_excess: f64,
    pub worst_lower_violation: f64,
    pub holds: bool,
}

/// Disc containment `σ(M) ⊂ ∪ {|ζ − iγ| ≤ ‖Re M‖}` and `‖Im M‖ ≥ |Im ζ| ≥ |γ| − ‖Re M‖`.
pub fn eigenvalue_bounds_check<T: Scalar>(m: &CMat<T>, slack: f64) -> Result<BoundsReport> {
    let eig = eigensolve(m)?;
    let re = re_part(m);
    let im = im_part(m);
    let re_norm = spectral_norm(&re).as_f64();
    let im_norm = spectral_norm(&im).as_f64();
    let gammas: Vec<f64> = herm_eigen(&im).0.iter().map(|g| g.as_f64()).collect();
    let mut entries = Vec::new();
    let (mut disc, mut imx, mut low) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
    for z in &eig.values {
        let z = Complex::new(z.re.as_f64(), z.im.as_f64());
        let (dist, g) = gammas
            .iter()
            .map(|&g| ((z - Complex::new(0.0, g)).norm(), g))
            .fold((f64::INFINITY, 0.0), |acc, x| if x.0 < acc.0 { x } else { acc });
        let lower_slack = z.im.abs() - (g.abs() - re_norm);
        disc = disc.max(dist - re_norm);
        imx = imx.max(z.im.abs() - im_norm);
        low = low.max(-lower_slack);
        entries.push(BoundEntry { zeta: z, disc_distance: dist, witness_gamma: g, lower_slack });
    }
    let holds = disc <= slack && imx <= slack && low <= slack;
    Ok(BoundsReport {
        re_norm,
        im_norm,
        gammas,
        entries,
        worst_disc_excess: disc,
        worst_imag_excess: imx,
        worst_lower_violation: low,
        holds,
    })
}

/// Ingredients of the dichotomy hypothesis for a matrix.
#[derive(Debug, Clone)]
struct DichotomySetup<T: Scalar> {
    re_norm: T,
    /// Nonzero eigenvalues of `Im a`.
    gammas: Vec<T>,
    rank_im: usize,
}

fn dichotomy_setup<T: Scalar>(a: &CMat<T>, tol: &Tolerances) -> Result<DichotomySetup<T>> {
    let re_norm = spectral_norm(&re_part(a));
    let im = im_part(a);
    let rank_im = numerical_rank(&im, tol.rank);
    let (vals, _) = herm_eigen(&im);
    let mut by_size: Vec<T> = vals.iter().copied().collect();
    by_size.sort_by(|x, y| y.abs().partial_cmp(&x.abs()).unwrap_or(std::cmp::Ordering::Equal));
    let gammas: Vec<T> = by_size.into_iter().take(rank_im).collect();
    let Some(min_gamma) = gammas.iter().map(|g| g.abs()).reduce(|x, y| x.min(y)) else {
        return Err(Error::Precondition("Im part vanishes; no nonzero gamma, dichotomy hypothesis unsatisfiable".into()));
    };
    if min_gamma <= T::lit(2.0) * re_norm {
        return Err(Error::Precondition(format!(
            "dichotomy needs min|gamma| > 2‖Re a‖; achieved ratio min|gamma|/‖Re a‖ = {:e}",
            (min_gamma / re_norm).as_f64()
        )));
    }
    Ok(DichotomySetup { re_norm, gammas, rank_im })
}

fn classify_one<T: Scalar>(z: Complex<T>, setup: &DichotomySetup<T>, slack: T) -> Result<ModeClass> {
    let r = setup.re_norm + slack;
    let in0 = z.modulus() <= r;
    let in1 = setup.gammas.iter().any(|g| (z - Complex::new(T::zero(), *g)).modulus() <= r);
    match (in0, in1) {
        (true, false) => Ok(ModeClass::Sigma0),
        (false, true) => Ok(ModeClass::Sigma1),
        (true, true) => Err(Error::Ambiguous(format!(
            "eigenvalue {:e}{:+e}i lies in both disc families",
            z.re.as_f64(),
            z.im.as_f64()
        ))),
        (false, false) => Err(Error::Ambiguous(format!(
            "eigenvalue {:e}{:+e}i lies outside every disc",
            z.re.as_f64(),
            z.im.as_f64()
        ))),
    }
}

fn disc_classes<T: Scalar>(a: &CMat<T>, values: &[Complex<T>], tol: &Tolerances) -> Result<Vec<ModeClass>> {
    let setup = dichotomy_setup(a, tol)?;
    let slack = T::lit(tol.bounds) * T::one().max(spectral_norm(a));
    values.iter().map(|z| classify_one(*z, &setup, slack)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectorRoute {
    DualBasis,
    SchurReorder,
}

#[derive(Debug, Clone)]
pub struct DichotomyResult<T: Scalar> {
    pub sigma0: Vec<Complex<T>>,
    pub sigma1: Vec<Complex<T>>,
    pub p0: CMat<T>,
    pub p1: CMat<T>,
    /// `½ min |γ_j|`.
    pub r0: T,
    pub rank_p0: usize,
    pub rank_p1: usize,
    pub rank_im: usize,
    pub re_norm: T,
    pub route: ProjectorRoute,
}

/// `Σ_{j ∈ sel} w_j ṽ_j*` with `ṽ_j*` the rows of `W⁻¹`.
pub fn projector_dual_basis<T: Scalar>(vectors: &CMat<T>, select: &[bool]) -> Option<CMat<T>> {
    let n = vectors.nrows();
    let winv = vectors.clone().try_inverse()?;
    let mut p = CMat::zeros(n, n);
    for (j, &s) in select.iter().enumerate() {
        if s {
            p += vectors.column(j) * winv.row(j);
        }
    }
    Some(p)
}

/// `c`, `s`, `r` with `[c s; −conj(s) c] [f; g] = [r; 0]`.
fn givens<T: Scalar>(f: Complex<T>, g: Complex<T>) -> (T, Complex<T>) {
    let (af, ag) = (f.modulus(), g.modulus());
    if ag == T::zero() {
        return (T::one(), cr(T::zero()));
    }
    if af == T::zero() {
        return (T::zero(), g.conj().unscale(ag));
    }
    let rho = (af * af + ag * ag).sqrt();
    (af / rho, f.unscale(af) * g.conj().unscale(rho))
}

/// Swaps diagonal entries `k` and `k+1` of the upper-triangular `t`,
/// updating the Schur vectors `q`.
fn swap_adjacent<T: Scalar>(t: &mut CMat<T>, q: &mut CMat<T>, k: usize) {
    let n = t.nrows();
    let (t11, t22) = (t[(k, k)], t[(k + 1, k + 1)]);
    let (c, s) = givens(t[(k, k + 1)], t22 - t11);
    let cc = cr(c);
    // Rows k, k+1 from column k+2 on.
    for j in k + 2..n {
        let (x, y) = (t[(k, j)], t[(k + 1, j)]);
        t[(k, j)] = cc * x + s * y;
        t[(k + 1, j)] = cc * y - s.conj() * x;
    }
    // Columns k, k+1 above row k.
    let sc = s.conj();
    for i in 0..k {
        let (x, y) = (t[(i, k)], t[(i, k + 1)]);
        t[(i, k)] = cc * x + sc * y;
        t[(i, k + 1)] = cc * y - s * x;
    }
    t[(k, k)] = t22;
    t[(k + 1, k + 1)] = t11;
    for i in 0..n {
        let (x, y) = (q[(i, k)], q[(i, k + 1)]);
        q[(i, k)] = cc * x + sc * y;
        q[(i, k + 1)] = cc * y - s * x;
    }
}

/// Spectral projector onto the invariant subspace of the eigenvalues for
/// which `select` is true, through a reordered Schur form and a triangular
/// Sylvester solve. Works for defective matrices.
pub fn projector_schur<T: Scalar>(a: &CMat<T>, select: impl Fn(Complex<T>) -> bool) -> Result<CMat<T>> {
    let n = a.nrows();
    let (mut q, mut t) = schur_complex(a)?;
    // Bubble selected eigenvalues to the leading block.
    let mut k1 = 0;
    for j in 0..n {
        if select(t[(j, j)]) {
            let mut i = j;
            while i > k1 {
                swap_adjacent(&mut t, &mut q, i - 1);
                i -= 1;
            }
            k1 += 1;
        }
    }
    let k2 = n - k1;
    // Solve T11 R − R T22 = T12 column by column.
    let mut r = CMat::<T>::zeros(k1, k2);
    let tnorm = t.norm().max(T::MIN_POSITIVE);
    for j in 0..k2 {
        let mut rhs: CVec<T> = t.view((0, k1 + j), (k1, 1)).clone_owned().column(0).clone_owned();
        for i in 0..j {
            rhs += r.column(i) * t[(k1 + i, k1 + j)];
        }
        let lam = t[(k1 + j, k1 + j)];
        for row in (0..k1).rev() {
            let mut s = rhs[row];
            for col in row + 1..k1 {
                s -= t[(row, col)] * r[(col, j)];
            }
            let d = t[(row, row)] - lam;
            if d.modulus() < T::EPSILON * tnorm {
                return Err(Error::Ambiguous("selected and complementary eigenvalues coincide".into()));
            }
            r[(row, j)] = s / d;
        }
    }
    let mut pt = CMat::<T>::zeros(n, n);
    for i in 0..k1 {
        pt[(i, i)] = cr(T::one());
    }
    pt.view_mut((0, k1), (k1, k2)).copy_from(&r);
    Ok(&q * pt * q.adjoint())
}

/// Splits the spectrum of `a` into `σ0` (near the origin) and `σ1` (near
/// the nonzero `iγ_j`) with the associated spectral projectors.
pub fn dichotomy<T: Scalar>(a: &CMat<T>, tol: &Tolerances) -> Result<DichotomyResult<T>> {
    let setup = dichotomy_setup(a, tol)?;
    let eig = eigensolve(a)?;
    let slack = T::lit(tol.bounds) * T::one().max(spectral_norm(a));
    let classes: Vec<ModeClass> =
        eig.values.iter().map(|z| classify_one(*z, &setup, slack)).collect::<Result<_>>()?;
    let select: Vec<bool> = classes.iter().map(|c| *c == ModeClass::Sigma1).collect();
    let n = a.nrows();

    let sv = singular_values(&eig.vectors);
    let cond = sv[0] / sv[sv.len() - 1].max(T::MIN_POSITIVE);
    let well_conditioned = cond < T::lit(1e8) && !eig.defective.iter().any(|d| *d);
    let dual = if well_conditioned { projector_dual_basis(&eig.vectors, &select) } else { None };
    let (p1, route) = match dual {
        Some(p) => (p, ProjectorRoute::DualBasis),
        None => {
            let setup_ref = &setup;
            let p = projector_schur(a, |z| classify_one(z, setup_ref, slack) == Ok(ModeClass::Sigma1))?;
            (p, ProjectorRoute::SchurReorder)
        }
    };
    let p0 = CMat::<T>::identity(n, n) - &p1;
    let sigma0 = eig.values.iter().zip(&select).filter(|(_, s)| !**s).map(|(z, _)| *z).collect();
    let sigma1 = eig.values.iter().zip(&select).filter(|(_, s)| **s).map(|(z, _)| *z).collect();
    let min_gamma = setup.gammas.iter().map(|g| g.abs()).fold(T::max_value().unwrap_or(T::one()), |x, y| x.min(y));
    Ok(DichotomyResult {
        sigma0,
        sigma1,
        rank_p0: numerical_rank(&p0, tol.rank),
        rank_p1: numerical_rank(&p1, tol.rank),
        p0,
        p1,
        r0: min_gamma * T::lit(0.5),
        rank_im: setup.rank_im,
        re_norm: setup.re_norm,
        route,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectorAlgebra {
    pub complement: f64,
    pub orthogonality: f64,
    pub idempotency: f64,
    pub invariance: f64,
}

impl ProjectorAlgebra {
    pub fn max(&self) -> f64 {
        self.complement.max(self.orthogonality).max(self.idempotency).max(self.invariance)
    }
}

/// Residuals of `P0 + P1 = 1`, `P0 P1 = 0`, `P_i² = P_i` and `A P_i = P_i A P_i`,
/// relative to `‖P_i‖` and `‖A‖`.
pub fn projector_algebra<T: Scalar>(a: &CMat<T>, d: &DichotomyResult<T>) -> ProjectorAlgebra {
    let n = a.nrows();
    let eye = CMat::<T>::identity(n, n);
    let pn = T::one().max(spectral_norm(&d.p0)).max(spectral_norm(&d.p1));
    let an = spectral_norm(a).max(T::MIN_POSITIVE);
    let rel = |m: CMat<T>, s: T| (spectral_norm(&m) / s).as_f64();
    ProjectorAlgebra {
        complement: rel(&d.p0 + &d.p1 - &eye, pn),
        orthogonality: rel(&d.p0 * &d.p1, pn * pn).max(rel(&d.p1 * &d.p0, pn * pn)),
        idempotency: rel(&d.p0 * &d.p0 - &d.p0, pn * pn).max(rel(&d.p1 * &d.p1 - &d.p1, pn * pn)),
        invariance: rel(a * &d.p0 - &d.p0 * a * &d.p0, an * pn * pn)
            .max(rel(a * &d.p1 - &d.p1 * a * &d.p1, an * pn * pn)),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DampingSplitReport {
    /// `βb_min − ω_max`.
    pub high_loss_floor: f64,
    pub low_loss_ceiling: f64,
    /// `½ ω_max / (βb_min − ω_max)`.
    pub q_bound: f64,
    pub max_high_loss_q: f64,
    pub violations: Vec<String>,
}

/// Evaluates the damping bands of the two spectral parts and the high-loss Q bound.
pub fn damping_split_report<T: Scalar>(d: &DichotomyResult<T>, omega_max: T, b_min: T, beta: T) -> DampingSplitReport {
    let floor = beta * b_min - omega_max;
    let slack = T::lit(1e-8) * T::one().max(beta * b_min);
    let mut violations = Vec::new();
    for z in &d.sigma0 {
        let damp = -z.im;
        if damp < -slack || damp > omega_max + slack {
            violations.push(format!("low-loss eigenvalue {:e}{:+e}i outside [0, {:e}]", z.re.as_f64(), z.im.as_f64(), omega_max.as_f64()));
        }
    }
    let q_bound = T::lit(0.5) * omega_max / floor;
    let mut max_q = T::zero();
    for z in &d.sigma1 {
        if -z.im < floor - slack {
            violations.push(format!("high-loss eigenvalue {:e}{:+e}i below {:e}", z.re.as_f64(), z.im.as_f64(), floor.as_f64()));
        }
        let q = if z.im < T::zero() { -T::lit(0.5) * z.re.abs() / z.im } else { T::one() / T::zero() };
        max_q = max_q.max(q);
        if q > q_bound + slack || q >= T::lit(0.5) {
            violations.push(format!("high-loss Q {:e} exceeds bound {:e}", q.as_f64(), q_bound.as_f64()));
        }
    }
    DampingSplitReport {
        high_loss_floor: floor.as_f64(),
        low_loss_ceiling: omega_max.as_f64(),
        q_bound: q_bound.as_f64(),
        max_high_loss_q: max_q.as_f64(),
        violations,
    }
}

/// Like [`damping_split_report`], but any violation is an error.
pub fn dichotomy_damping_split<T: Scalar>(
    d: &DichotomyResult<T>,
    omega_max: T,
    b_min: T,
    beta: T,
) -> Result<DampingSplitReport> {
    let rep = damping_split_report(d, omega_max, b_min, beta);
    match rep.violations.first() {
        Some(v) => Err(Error::Invariant(v.clone())),
        None => Ok(rep),
    }
}
