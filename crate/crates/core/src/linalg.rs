//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Complex, ComplexField, SymmetricEigen};

use crate::scalar::{ci, cr, CMat, CVec, RMat, RVec, Scalar};

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sym_eigen<T: Scalar>(m: &RMat<T>) -> (RVec<T>, RMat<T>) {
    let sym = (m + m.transpose()) * T::lit(0.5);
    let eig = SymmetricEigen::new(sym);
    sort_eigen(eig.eigenvalues, eig.eigenvectors)
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
pub fn herm_eigen<T: Scalar>(m: &CMat<T>) -> (RVec<T>, CMat<T>) {
    let herm = (m + m.adjoint()) * cr(T::lit(0.5));
    let eig = SymmetricEigen::new(herm);
    sort_eigen(eig.eigenvalues, eig.eigenvectors)
}

fn sort_eigen<T: Scalar, N: nalgebra::Scalar + Copy>(
    values: RVec<T>,
    vectors: nalgebra::DMatrix<N>,
) -> (RVec<T>, nalgebra::DMatrix<N>) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
    let sorted_vals = RVec::from_iterator(n, order.iter().map(|&i| values[i]));
    let sorted_vecs = nalgebra::DMatrix::from_fn(vectors.nrows(), n, |r, k| vectors[(r, order[k])]);
    (sorted_vals, sorted_vecs)
}

/// Singular values in descending order.
pub fn singular_values<T: Scalar>(m: &CMat<T>) -> RVec<T> {
    if m.is_empty() {
        return RVec::zeros(0);
    }
    let mut sv: Vec<T> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    RVec::from_vec(sv)
}

pub fn singular_values_real<T: Scalar>(m: &RMat<T>) -> RVec<T> {
    if m.is_empty() {
        return RVec::zeros(0);
    }
    let mut sv: Vec<T> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    RVec::from_vec(sv)
}

/// Operator 2-norm.
pub fn spectral_norm<T: Scalar>(m: &CMat<T>) -> T {
    singular_values(m).iter().copied().fold(T::zero(), |a, b| a.max(b))
}

pub fn spectral_norm_real<T: Scalar>(m: &RMat<T>) -> T {
    singular_values_real(m).iter().copied().fold(T::zero(), |a, b| a.max(b))
}

/// Cutoff below which singular values count as zero.
///
/// Default rule: `max(rows, cols) * eps * sigma_max`. A relative override
/// replaces the `max(rows, cols) * eps` factor.
pub fn rank_cutoff<T: Scalar>(sigma_max: T, rows: usize, cols: usize, rel: Option<f64>) -> T {
    let factor = match rel {
        Some(r) => T::lit(r),
        None => T::lit(rows.max(cols) as f64) * T::EPSILON,
    };
    factor * sigma_max
}

/// Numerical rank of a set of descending singular values.
pub fn rank_of<T: Scalar>(sv: &RVec<T>, rows: usize, cols: usize, rel: Option<f64>) -> usize {
    let Some(&smax) = sv.iter().next() else { return 0 };
    if smax <= T::zero() {
        return 0;
    }
    let cut = rank_cutoff(smax, rows, cols, rel);
    sv.iter().filter(|&&s| s > cut).count()
}

pub fn numerical_rank<T: Scalar>(m: &CMat<T>, rel: Option<f64>) -> usize {
    rank_of(&singular_values(m), m.nrows(), m.ncols(), rel)
}

pub fn numerical_rank_real<T: Scalar>(m: &RMat<T>, rel: Option<f64>) -> usize {
    rank_of(&singular_values_real(m), m.nrows(), m.ncols(), rel)
}

/// Largest entry of the skew part `|M - M^T| / 2`.
pub fn max_asymmetry<T: Scalar>(m: &RMat<T>) -> T {
    (m - m.transpose()).amax() * T::lit(0.5)
}

/// Largest entry of the symmetric part `|M + M^T| / 2`.
pub fn max_skew_defect<T: Scalar>(m: &RMat<T>) -> T {
    (m + m.transpose()).amax() * T::lit(0.5)
}

pub fn all_finite<T: Scalar>(m: &RMat<T>) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Hermitian part `(M + M*) / 2`.
pub fn re_part<T: Scalar>(m: &CMat<T>) -> CMat<T> {
    (m + m.adjoint()) * cr(T::lit(0.5))
}

/// `(M - M*) / 2i`, which is Hermitian.
pub fn im_part<T: Scalar>(m: &CMat<T>) -> CMat<T> {
    (m - m.adjoint()) * (ci::<T>() * T::lit(-0.5))
}

/// Determinant represented as `exp(log_abs) * phase`.
#[derive(Debug, Clone, Copy)]
pub struct LogDet<T: Scalar> {
    pub log_abs: T,
    pub phase: Complex<T>,
    pub singular: bool,
}

impl<T: Scalar> LogDet<T> {
    pub fn value(&self) -> Complex<T> {
        if self.singular {
            Complex::new(T::zero(), T::zero())
        } else {
            self.phase * self.log_abs.exp()
        }
    }
}

/// Determinant via LU with partial pivoting, in log-magnitude/phase form.
pub fn log_det<T: Scalar>(m: &CMat<T>) -> LogDet<T> {
    if m.nrows() == 0 {
        return LogDet { log_abs: T::zero(), phase: cr(T::one()), singular: false };
    }
    let lu = m.clone().lu();
    let sign: Complex<T> = lu.p().determinant();
    let u = lu.u();
    let mut log_abs = T::zero();
    let mut phase = sign;
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        let r = d.modulus();
        if r == T::zero() {
            return LogDet { log_abs: T::min_value().unwrap_or(T::zero()), phase: cr(T::zero()), singular: true };
        }
        log_abs += r.ln();
        phase *= d.unscale(r);
    }
    let pm = phase.modulus();
    LogDet { log_abs, phase: phase.unscale(pm), singular: false }
}

pub fn det<T: Scalar>(m: &CMat<T>) -> Complex<T> {
    log_det(m).value()
}

/// Right singular vectors for the `count` smallest singular values of a
/// square matrix, returned as columns together with those singular values
/// (ascending).
pub fn smallest_right_singular<T: Scalar>(m: &CMat<T>, count: usize) -> (CMat<T>, Vec<T>) {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[a]
            .partial_cmp(&svd.singular_values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    // A wide input has implicit zero singular values beyond the returned ones.
    let count = count.min(order.len());
    let mut cols = CMat::<T>::zeros(n, count);
    let mut values = Vec::with_capacity(count);
    for (k, &idx) in order.iter().take(count).enumerate() {
        let v: CVec<T> = v_t.row(idx).adjoint();
        cols.set_column(k, &v);
        values.push(svd.singular_values[idx]);
    }
    (cols, values)
}

/// Orthonormal basis of the numerical kernel of `m`.
pub fn kernel_basis<T: Scalar>(m: &CMat<T>, rel: Option<f64>) -> CMat<T> {
    let n = m.ncols();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    // Pad to square so the SVD returns a full right basis.
    let rows = m.nrows().max(n);
    let mut sq = CMat::<T>::zeros(rows, n);
    sq.rows_mut(0, m.nrows()).copy_from(m);
    let rank = numerical_rank(&sq, rel);
    smallest_right_singular(&sq, n - rank).0
}

/// Result of pairing two eigenvalue lists.
#[derive(Debug, Clone)]
pub struct Matching {
    /// `(index in a, index in b, distance)` in the order pairs were chosen.
    pub pairs: Vec<(usize, usize, f64)>,
    pub max_distance: f64,
    /// Whether both lists have equal length and every pair is within the cap.
    pub matched: bool,
}

/// Greedy nearest-pair matching of two complex multisets.
///
/// Pairs are chosen in order of increasing distance; ties are broken by the
/// lexicographic order of `(Re, Im)` of the first element.
pub fn match_multisets<T: Scalar>(a: &[Complex<T>], b: &[Complex<T>], cap: f64) -> Matching {
    let mut cand: Vec<(f64, f64, f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            cand.push(((*x - *y).modulus().as_f64(), x.re.as_f64(), x.im.as_f64(), i, j));
        }
    }
    cand.sort_by(|p, q| {
        p.0.partial_cmp(&q.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(p.1.partial_cmp(&q.1).unwrap_or(std::cmp::Ordering::Equal))
            .then(p.2.partial_cmp(&q.2).unwrap_or(std::cmp::Ordering::Equal))
            .then(p.4.cmp(&q.4))
    });
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut pairs = Vec::new();
    let mut max_distance: f64 = 0.0;
    for (d, _, _, i, j) in cand {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        max_distance = max_distance.max(d);
        pairs.push((i, j, d));
    }
    let matched = a.len() == b.len() && max_distance <= cap;
    Matching { pairs, max_distance, matched }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::to_complex;

    #[test]
    fn log_det_matches_direct_determinant() {
        let m = RMat::<f64>::from_row_slice(3, 3, &[2.0, 1.0, 0.0, -1.0, 3.0, 2.0, 0.5, 0.0, 1.0]);
        let direct = m.determinant();
        let ld = log_det(&to_complex(&m));
        assert!((ld.value().re - direct).abs() < 1e-12);
        assert!(ld.value().im.abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_has_zero_determinant() {
        let m = RMat::<f64>::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(det(&to_complex(&m)).modulus() < 1e-12);
        assert_eq!(numerical_rank_real(&m, None), 1);
    }

    #[test]
    fn kernel_basis_spans_null_space() {
        let m = RMat::<f64>::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let k = kernel_basis(&to_complex(&m), None);
        assert_eq!(k.ncols(), 1);
        assert!((k[(2, 0)].modulus() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matching_pairs_nearest_first() {
        let a = [Complex::new(0.0, 0.0), Complex::new(1.0, 0.0)];
        let b = [Complex::new(1.0, 1e-9), Complex::new(0.0, -1e-9)];
        let m = match_multisets(&a, &b, 1e-7);
        assert!(m.matched);
        assert!(m.max_distance < 2e-9);
    }

    #[test]
    fn re_and_im_parts_recombine() {
        let m = CMat::<f64>::from_fn(3, 3, |i, j| Complex::new(i as f64 - j as f64 * 0.3, (i * j) as f64 + 0.1));
        let back = re_part(&m) + im_part(&m) * ci::<f64>();
        assert!((back - &m).norm() < 1e-12);
        assert!((im_part(&m) - im_part(&m).adjoint()).norm() < 1e-12);
    }
}
