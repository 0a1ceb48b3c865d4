//! Dense complex linear algebra for rank and null-space questions, plus
//! water-filling power allocation.
//!
//! Matrices are `nalgebra` types. The SVD and Hermitian eigensolver are
//! delegated to `faer`, whose complex bidiagonal SVD stays accurate on the
//! rank-deficient inputs this crate is built around.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix. Channels are stored amplitude-linear.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Default relative tolerance for rank decisions: `sigma_i > tol * sigma_max`.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Thin singular value decomposition `A = U diag(s) V^H`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// Descending, non-negative; length `min(rows, cols)`.
    pub singular_values: Vec<f64>,
    /// `rows x min(rows, cols)`, orthonormal columns.
    pub left_vectors: ComplexMatrix,
    /// `cols x min(rows, cols)`, orthonormal columns.
    pub right_vectors: ComplexMatrix,
}

impl SvdResult {
    pub fn max_singular_value(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Number of singular values above `rel_tol * sigma_max`; zero for the zero matrix.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let smax = self.max_singular_value();
        if smax <= 0.0 {
            return 0;
        }
        let cut = rel_tol * smax;
        self.singular_values.iter().filter(|&&s| s > cut).count()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let mut us = self.left_vectors.clone();
        for (j, &s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(s);
        }
        us * self.right_vectors.adjoint()
    }
}

/// Power split over parallel subchannels.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    /// Watts per stream, in the order the gains were given.
    pub per_stream_power: Vec<f64>,
    /// Water level `mu` in watts.
    pub water_level: f64,
}

impl PowerAllocation {
    pub fn total(&self) -> f64 {
        self.per_stream_power.iter().sum()
    }

    /// `sum_i log2(1 + g_i p_i / noise)`.
    pub fn rate_bits(&self, gains: &[f64], noise_power: f64) -> f64 {
        gains
            .iter()
            .zip(&self.per_stream_power)
            .map(|(g, p)| (1.0 + g * p / noise_power).log2())
            .sum()
    }
}

fn check_nonempty(a: &ComplexMatrix) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::EmptyMatrix {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(())
}

fn check_tol(rel_tol: f64) -> Result<()> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "relative tolerance must lie in (0, 1), got {rel_tol}"
        )));
    }
    Ok(())
}

/// Thin SVD with singular values sorted in descending order.
pub fn svd(a: &ComplexMatrix) -> Result<SvdResult> {
    check_nonempty(a)?;
    let (m, n) = a.shape();
    let k = m.min(n);

    // pin the factors of an all-zero input to the identity
    if a.iter().all(|z| *z == ZERO) {
        return Ok(SvdResult {
            singular_values: vec![0.0; k],
            left_vectors: DMatrix::identity(m, k),
            right_vectors: DMatrix::identity(n, k),
        });
    }

    let dec = to_faer(a).thin_svd().map_err(|_| Error::NoConvergence)?;
    let u = dec.U();
    let v = dec.V();
    let s: Vec<f64> = dec.S().column_vector().iter().map(|z| z.re).collect();

    let mut order: Vec<usize> = (0..k).collect();
    // stable: equal values keep their original order
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));

    let mut left = ComplexMatrix::zeros(m, k);
    let mut right = ComplexMatrix::zeros(n, k);
    let mut values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        values.push(s[src].max(0.0));
        for i in 0..m {
            left[(i, dst)] = u[(i, src)];
        }
        for i in 0..n {
            right[(i, dst)] = v[(i, src)];
        }
    }
    Ok(SvdResult {
        singular_values: values,
        left_vectors: left,
        right_vectors: right,
    })
}

fn to_faer(a: &ComplexMatrix) -> faer::Mat<Complex64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Result<Vec<f64>> {
    check_nonempty(a)?;
    if a.nrows() != a.ncols() {
        return Err(Error::dim("Hermitian eigenproblem", format!("{0}x{0}", a.nrows()), format!("{}x{}", a.nrows(), a.ncols())));
    }
    let values = to_faer(a)
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|_| Error::NoConvergence)?;
    Ok(values)
}

/// Count of singular values strictly above `rel_tol * sigma_max`.
pub fn numerical_rank(a: &ComplexMatrix, rel_tol: f64) -> Result<usize> {
    check_tol(rel_tol)?;
    Ok(svd(a)?.rank(rel_tol))
}

/// Orthonormal basis of `{x : A x = 0}` with `cols(a) - rank(a)` columns.
///
/// The row space comes from the SVD; its orthogonal complement is completed by
/// pivoted Gram-Schmidt on the columns of `I - V V^H`.
pub fn null_space_basis(a: &ComplexMatrix, rel_tol: f64) -> Result<ComplexMatrix> {
    check_tol(rel_tol)?;
    let dec = svd(a)?;
    let n = a.ncols();
    let r = dec.rank(rel_tol);
    let row_space = dec.right_vectors.columns(0, r).into_owned();
    Ok(orthogonal_complement(&row_space, n))
}

/// Orthonormal completion of the orthonormal columns `basis` (`n x r`) to `C^n`.
pub(crate) fn orthogonal_complement(basis: &ComplexMatrix, n: usize) -> ComplexMatrix {
    let r = basis.ncols();
    let want = n - r;
    if want == 0 {
        return ComplexMatrix::zeros(n, 0);
    }
    let mut residual: ComplexMatrix = DMatrix::identity(n, n) - basis * basis.adjoint();
    let mut out = ComplexMatrix::zeros(n, want);
    let mut norms: Vec<f64> = residual.column_iter().map(|c| c.norm_squared()).collect();

    for slot in 0..want {
        let mut pivot = 0;
        for (j, &v) in norms.iter().enumerate() {
            if v > norms[pivot] {
                pivot = j;
            }
        }
        let mut q = residual.column(pivot).into_owned();
        // re-orthogonalize against everything accepted so far
        for prev in [basis.columns(0, r), out.columns(0, slot)] {
            let coeff = prev.adjoint() * &q;
            q -= prev * coeff;
        }
        q.normalize_mut();
        for (j, norm) in norms.iter_mut().enumerate() {
            let proj = q.dotc(&residual.column(j));
            let mut col = residual.column_mut(j);
            col.axpy(-proj, &q, Complex64::new(1.0, 0.0));
            *norm = col.norm_squared();
        }
        norms[pivot] = -1.0;
        out.set_column(slot, &q);
    }
    out
}

/// Moore-Penrose pseudo-inverse, discarding singular values at or below
/// `rel_tol * sigma_max`. The zero matrix maps to the transposed-shape zero.
pub fn pseudo_inverse(a: &ComplexMatrix, rel_tol: f64) -> Result<ComplexMatrix> {
    check_tol(rel_tol)?;
    let dec = svd(a)?;
    let r = dec.rank(rel_tol);
    let mut v = dec.right_vectors.columns(0, r).into_owned();
    for (j, s) in dec.singular_values.iter().take(r).enumerate() {
        v.column_mut(j).unscale_mut(*s);
    }
    Ok(v * dec.left_vectors.columns(0, r).adjoint())
}

/// Capacity-maximizing allocation `p_i = max(0, mu - noise / g_i)` with
/// `sum p_i = total_power`.
///
/// Streams are ranked by gain; equal gains keep their input order.
pub fn water_filling(gains: &[f64], total_power: f64, noise_power: f64) -> Result<PowerAllocation> {
    if gains.is_empty() {
        return Err(Error::InvalidArgument("water-filling needs at least one gain".into()));
    }
    if let Some(g) = gains.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
        return Err(Error::InvalidArgument(format!("gains must be positive and finite, got {g}")));
    }
    if !(total_power > 0.0) || !(noise_power > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "power budget and noise power must be positive (got {total_power}, {noise_power})"
        )));
    }

    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&i, &j| gains[j].total_cmp(&gains[i]));
    let floors: Vec<f64> = order.iter().map(|&i| noise_power / gains[i]).collect();

    let mut active = floors.len();
    let mut level = 0.0;
    while active > 0 {
        let sum: f64 = floors[..active].iter().sum();
        level = (total_power + sum) / active as f64;
        if level > floors[active - 1] {
            break;
        }
        active -= 1;
    }

    let mut power = vec![0.0; gains.len()];
    for (rank, &i) in order.iter().enumerate().take(active) {
        power[i] = level - floors[rank];
    }
    // absorb rounding so the budget is met to the last ulp we can manage
    let spent: f64 = power.iter().sum();
    if spent > 0.0 {
        let fix = total_power / spent;
        power.iter_mut().for_each(|p| *p *= fix);
    }
    Ok(PowerAllocation {
        per_stream_power: power,
        water_level: level,
    })
}

/// Converts a real slice to a column of complex values.
pub fn column_from(values: &[Complex64]) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(values.len(), 1, values)
}

/// Largest entry modulus.
pub fn max_abs(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise difference between `a` and `a^H`.
pub fn hermitian_asymmetry(a: &ComplexMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::complex_gaussian;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn diag(values: &[f64]) -> ComplexMatrix {
        let n = values.len();
        ComplexMatrix::from_fn(n, n, |i, j| if i == j { c(values[i]) } else { ZERO })
    }

    fn orthonormality_error(q: &ComplexMatrix) -> f64 {
        let k = q.ncols();
        max_abs(&(q.adjoint() * q - ComplexMatrix::identity(k, k)))
    }

    #[test]
    fn diagonal_singular_values() {
        let s = svd(&diag(&[3.0, 2.0, 1.0])).unwrap();
        for (got, want) in s.singular_values.iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        let s = svd(&diag(&[1.0, 3.0, 2.0])).unwrap();
        assert!((s.singular_values[0] - 3.0).abs() < 1e-14);
        assert!((s.singular_values[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_matrix_svd() {
        let s = svd(&ComplexMatrix::zeros(4, 8)).unwrap();
        assert_eq!(s.singular_values, vec![0.0; 4]);
        assert!(orthonormality_error(&s.left_vectors) < 1e-15);
        assert!(orthonormality_error(&s.right_vectors) < 1e-15);
        assert_eq!(numerical_rank(&ComplexMatrix::zeros(4, 8), DEFAULT_RANK_TOL).unwrap(), 0);
    }

    #[test]
    fn empty_matrix_is_an_error() {
        assert!(matches!(svd(&ComplexMatrix::zeros(0, 3)), Err(Error::EmptyMatrix { .. })));
    }

    #[test]
    fn random_reconstruction() {
        for (m, n) in [(4, 8), (8, 4), (6, 6)] {
            let a = complex_gaussian(m, n, 1.0, 11);
            let s = svd(&a).unwrap();
            let err = (s.reconstruct() - &a).norm() / a.norm();
            assert!(err < 1e-10, "{m}x{n}: {err}");
            assert!(orthonormality_error(&s.left_vectors) < 1e-10);
            assert!(orthonormality_error(&s.right_vectors) < 1e-10);
            assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn svd_is_deterministic() {
        let a = complex_gaussian(4, 8, 1.0, 5);
        let x = svd(&a).unwrap();
        let y = svd(&a).unwrap();
        assert_eq!(x.singular_values, y.singular_values);
        assert_eq!(x.left_vectors, y.left_vectors);
    }

    #[test]
    fn ranks_of_simple_matrices() {
        assert_eq!(numerical_rank(&ComplexMatrix::identity(4, 4), DEFAULT_RANK_TOL).unwrap(), 4);
        let a = complex_gaussian(4, 1, 1.0, 1);
        let b = complex_gaussian(8, 1, 1.0, 2);
        let outer = &a * b.adjoint();
        assert_eq!(numerical_rank(&outer, DEFAULT_RANK_TOL).unwrap(), 1);
    }

    #[test]
    fn rank_tolerance_must_be_in_unit_interval() {
        let eye = ComplexMatrix::identity(2, 2);
        assert!(numerical_rank(&eye, 0.0).is_err());
        assert!(numerical_rank(&eye, 1.0).is_err());
    }

    #[test]
    fn null_space_of_coordinate_row() {
        let a = ComplexMatrix::from_row_slice(1, 4, &[c(1.0), ZERO, ZERO, ZERO]);
        let b = null_space_basis(&a, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(b.shape(), (4, 3));
        assert!(orthonormality_error(&b) < 1e-14);
        for j in 0..3 {
            assert!(b[(0, j)].norm() < 1e-15);
        }
    }

    #[test]
    fn null_space_of_full_rank_is_empty() {
        let b = null_space_basis(&ComplexMatrix::identity(4, 4), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(b.shape(), (4, 0));
    }

    #[test]
    fn null_space_residual() {
        let a = complex_gaussian(2, 6, 1.0, 21);
        let b = null_space_basis(&a, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(b.ncols(), 4);
        assert!(orthonormality_error(&b) < 1e-12);
        let smax = svd(&a).unwrap().max_singular_value();
        assert!(max_abs(&(&a * &b)) < 1e-8 * smax);
    }

    #[test]
    fn pseudo_inverse_cases() {
        let p = pseudo_inverse(&diag(&[2.0, 4.0]), DEFAULT_RANK_TOL).unwrap();
        assert!(max_abs(&(p - diag(&[0.5, 0.25]))) < 1e-15);

        let z = pseudo_inverse(&ComplexMatrix::zeros(2, 3), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(z, ComplexMatrix::zeros(3, 2));

        let a = complex_gaussian(4, 8, 1.0, 3);
        let p = pseudo_inverse(&a, DEFAULT_RANK_TOL).unwrap();
        let eye = &a * &p;
        assert!(max_abs(&(eye - ComplexMatrix::identity(4, 4))) < 1e-8);
    }

    #[test]
    fn moore_penrose_conditions_on_rank_deficient_input() {
        let u = complex_gaussian(5, 2, 1.0, 8);
        let v = complex_gaussian(2, 7, 1.0, 9);
        let a = u * v;
        let p = pseudo_inverse(&a, DEFAULT_RANK_TOL).unwrap();
        let scale = a.norm();
        assert!((&a * &p * &a - &a).norm() < 1e-8 * scale);
        assert!((&p * &a * &p - &p).norm() < 1e-8 * p.norm());
        let ap = &a * &p;
        assert!((&ap - ap.adjoint()).norm() < 1e-8);
        let pa = &p * &a;
        assert!((&pa - pa.adjoint()).norm() < 1e-8);
    }

    #[test]
    fn water_filling_single_stream() {
        let w = water_filling(&[1.0], 1.0, 0.1).unwrap();
        assert_eq!(w.per_stream_power, vec![1.0]);
        assert!((w.rate_bits(&[1.0], 0.1) - 11f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn water_filling_symmetric() {
        let w = water_filling(&[1.0, 1.0], 2.0, 0.1).unwrap();
        assert!((w.per_stream_power[0] - 1.0).abs() < 1e-12);
        assert!((w.per_stream_power[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn water_filling_drops_weak_streams() {
        let w = water_filling(&[10.0, 0.01], 1.0, 1.0).unwrap();
        assert_eq!(w.per_stream_power[1], 0.0);
        assert!((w.per_stream_power[0] - 1.0).abs() < 1e-12);
        for (p, g) in w.per_stream_power.iter().zip([10.0, 0.01]) {
            let want = (w.water_level - 1.0 / g).max(0.0);
            assert!((p - want).abs() < 1e-12);
        }
    }

    #[test]
    fn water_filling_rejects_bad_input() {
        assert!(water_filling(&[], 1.0, 1.0).is_err());
        assert!(water_filling(&[1.0, 0.0], 1.0, 1.0).is_err());
        assert!(water_filling(&[1.0], 0.0, 1.0).is_err());
        assert!(water_filling(&[1.0], 1.0, 0.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn low_rank(rows: usize, cols: usize, rank: usize, seed: u64) -> ComplexMatrix {
            complex_gaussian(rows, rank, 1.0, seed) * complex_gaussian(rank, cols, 1.0, seed ^ 0x9e37)
        }

        fn orthonormal_error(q: &ComplexMatrix) -> f64 {
            max_abs(&(q.adjoint() * q - ComplexMatrix::identity(q.ncols(), q.ncols())))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn svd_reconstructs_rank_deficient(rows in 1usize..10, cols in 1usize..40, r in 1usize..6, seed in any::<u64>()) {
                let r = r.min(rows).min(cols);
                let a = low_rank(rows, cols, r, seed);
                let dec = svd(&a).unwrap();
                let err = max_abs(&(dec.reconstruct() - &a));
                prop_assert!(err <= 1e-12 * max_abs(&a).max(1.0), "reconstruction error {err}");
                prop_assert!(dec.singular_values.windows(2).all(|w| w[0] >= w[1]));
                prop_assert!(orthonormal_error(&dec.left_vectors) < 1e-12);
                prop_assert!(orthonormal_error(&dec.right_vectors) < 1e-12);
                prop_assert_eq!(dec.rank(DEFAULT_RANK_TOL), r);
            }

            #[test]
            fn null_space_is_annihilated(rows in 1usize..6, cols in 2usize..20, r in 1usize..6, seed in any::<u64>()) {
                let r = r.min(rows).min(cols);
                let a = low_rank(rows, cols, r, seed);
                let basis = null_space_basis(&a, DEFAULT_RANK_TOL).unwrap();
                prop_assert_eq!(basis.ncols(), cols - r);
                if basis.ncols() > 0 {
                    prop_assert!(max_abs(&(&a * &basis)) < 1e-10 * max_abs(&a));
                    prop_assert!(orthonormal_error(&basis) < 1e-12);
                }
            }

            #[test]
            fn water_filling_meets_kkt(gains in prop::collection::vec(1e-3f64..1e3, 1..8), total in 1e-3f64..1e3, noise in 1e-3f64..10.0) {
                let alloc = water_filling(&gains, total, noise).unwrap();
                let p = &alloc.per_stream_power;
                prop_assert!(p.iter().all(|&x| x >= 0.0));
                prop_assert!((p.iter().sum::<f64>() - total).abs() <= 1e-9 * total);
                for (g, x) in gains.iter().zip(p) {
                    let floor = noise / g;
                    if *x > 0.0 {
                        prop_assert!((x + floor - alloc.water_level).abs() <= 1e-8 * alloc.water_level.max(1.0));
                    } else {
                        prop_assert!(floor >= alloc.water_level - 1e-9 * alloc.water_level.max(1.0));
                    }
                }
            }
        }
    }
}
