//! Dense matrix kernels the rest of the toolkit is written against:
//! SVD, eigendecomposition, linear solves, rank decisions.
//!
//! All routines operate on `nalgebra` dynamic matrices with `f64` scalars
//! (complex results use `Complex<f64>`). Factorizations are delegated to
//! nalgebra; the eigenvector stage runs shifted inverse iteration on top of
//! the real Schur eigenvalues.

use nalgebra::{Complex, DMatrix, DVector, Schur, SymmetricEigen, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Default relative threshold below which singular values count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Full SVD of a real matrix, singular values nonincreasing.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// Orthonormal left singular vectors, one column per singular value.
    pub left: DMatrix<f64>,
    /// Nonincreasing, nonnegative singular values.
    pub singular_values: DVector<f64>,
    /// Orthonormal right singular vectors (columns, not transposed).
    pub right: DMatrix<f64>,
    /// Count of singular values above `rank_tol * sigma_1`.
    pub truncation_rank: usize,
}

/// Eigenpairs of a real square matrix. Values are sorted by descending
/// modulus; complex values appear in conjugate pairs with the positive
/// imaginary part first. Vectors have unit 2-norm.
#[derive(Debug, Clone)]
pub struct EigResult {
    pub values: Vec<C64>,
    pub vectors: DMatrix<C64>,
}

pub fn validate_finite(m: &DMatrix<f64>, context: &str) -> Result<()> {
    for col in 0..m.ncols() {
        for row in 0..m.nrows() {
            if !m[(row, col)].is_finite() {
                return Err(Error::NonFinite {
                    context: context.to_string(),
                    row,
                    col,
                });
            }
        }
    }
    Ok(())
}

/// Number of values strictly above `rank_tol` times the largest value.
pub fn rank_at_tol(singular_values: &[f64], rank_tol: f64) -> usize {
    let sigma1 = singular_values.first().copied().unwrap_or(0.0);
    if sigma1 <= 0.0 {
        return 0;
    }
    singular_values
        .iter()
        .take_while(|&&s| s > rank_tol * sigma1)
        .count()
}

pub fn svd(m: &DMatrix<f64>) -> Result<SvdResult> {
    svd_with_tol(m, DEFAULT_RANK_TOL)
}

pub fn svd_with_tol(m: &DMatrix<f64>, rank_tol: f64) -> Result<SvdResult> {
    if m.is_empty() {
        return Err(Error::InvalidParameter("svd of an empty matrix".into()));
    }
    validate_finite(m, "svd input")?;
    let (rows, cols) = m.shape();
    let svd = SVD::try_new(m.clone(), true, true, f64::EPSILON, 100_000)
        .ok_or(Error::SvdFailure { rows, cols })?;
    let left = svd.u.expect("left singular vectors requested");
    let right = svd.v_t.expect("right singular vectors requested").transpose();
    let singular_values = svd.singular_values;
    debug_assert!(singular_values
        .as_slice()
        .windows(2)
        .all(|w| w[0] >= w[1]));
    let truncation_rank = rank_at_tol(singular_values.as_slice(), rank_tol);
    Ok(SvdResult {
        left,
        singular_values,
        right,
        truncation_rank,
    })
}

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
/// Used for correlation matrices, which are symmetric PSD by construction.
pub fn symmetric_eig(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if !m.is_square() {
        return Err(dim_mismatch("symmetric_eig expects a square matrix", m, m));
    }
    let n = m.nrows();
    let se = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 100_000).ok_or(Error::EigFailure {
        n,
        residual: f64::INFINITY,
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].partial_cmp(&se.eigenvalues[a]).unwrap());
    let values = DVector::from_iterator(n, order.iter().map(|&i| se.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Eigenvalues only (no vectors), via the real Schur form.
pub fn eigenvalues_only(m: &DMatrix<f64>) -> Result<Vec<C64>> {
    if !m.is_square() {
        return Err(dim_mismatch("eig expects a square matrix", m, m));
    }
    validate_finite(m, "eig input")?;
    let n = m.nrows();
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 100_000).ok_or(Error::EigFailure {
        n,
        residual: f64::INFINITY,
    })?;
    let mut values: Vec<C64> = schur.complex_eigenvalues().iter().copied().collect();
    sort_eigenvalues(&mut values);
    Ok(values)
}

pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues_only(m)?
        .first()
        .map(|l| l.norm())
        .unwrap_or(0.0))
}

/// All eigenpairs of a real square matrix.
///
/// Eigenvalues come from the real Schur form; each eigenvector is then
/// recovered by inverse iteration with the (slightly perturbed) eigenvalue
/// as shift. Conjugate-pair vectors are filled in by conjugation so the
/// pairing is exact.
pub fn eig(m: &DMatrix<f64>) -> Result<EigResult> {
    if !m.is_square() {
        return Err(dim_mismatch("eig expects a square matrix", m, m));
    }
    validate_finite(m, "eig input")?;
    let n = m.nrows();
    if n == 0 {
        return Err(Error::InvalidParameter("eig of an empty matrix".into()));
    }
    let scale = m.norm();
    if scale == 0.0 {
        return Ok(EigResult {
            values: vec![C64::new(0.0, 0.0); n],
            vectors: DMatrix::identity(n, n).map(|x| C64::new(x, 0.0)),
        });
    }

    let mut values = eigenvalues_only(m)?;
    sort_eigenvalues(&mut values);
    let mc = complexify(m);

    let mut vectors = DMatrix::<C64>::zeros(n, n);
    let mut worst_residual = 0.0_f64;
    let mut i = 0;
    while i < n {
        let lambda = values[i];
        let (v, residual) = inverse_iteration(&mc, lambda, scale);
        worst_residual = worst_residual.max(residual);
        vectors.set_column(i, &v);
        let paired = lambda.im != 0.0
            && i + 1 < n
            && values[i + 1].re == lambda.re
            && values[i + 1].im == -lambda.im;
        if paired {
            let conj = v.map(|z| z.conj());
            vectors.set_column(i + 1, &conj);
            i += 2;
        } else {
            i += 1;
        }
    }

    if worst_residual > 1e-8 * scale {
        return Err(Error::EigFailure {
            n,
            residual: worst_residual,
        });
    }
    Ok(EigResult { values, vectors })
}

/// Solve `A X = B` for square real or complex `A` via LU with partial
/// pivoting plus one step of iterative refinement.
pub fn solve_linear<T>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DMatrix<T>>
where
    T: nalgebra::ComplexField<RealField = f64> + Copy,
{
    if !a.is_square() {
        return Err(dim_mismatch("solve_linear expects a square matrix", a, b));
    }
    if a.nrows() != b.nrows() {
        return Err(dim_mismatch("solve_linear dimension mismatch", a, b));
    }
    let lu = a.clone().lu();
    let cond_estimate = pivot_condition_estimate(&lu);
    if !(cond_estimate < 1e12) {
        return Err(Error::SingularMatrix { cond_estimate });
    }
    let mut x = lu.solve(b).ok_or(Error::SingularMatrix {
        cond_estimate: f64::INFINITY,
    })?;
    // One refinement pass tightens the residual toward machine precision.
    let residual = b - a * &x;
    if let Some(dx) = lu.solve(&residual) {
        x += dx;
    }
    Ok(x)
}

pub fn solve_linear_vec<T>(a: &DMatrix<T>, b: &DVector<T>) -> Result<DVector<T>>
where
    T: nalgebra::ComplexField<RealField = f64> + Copy,
{
    let b_mat = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    let x = solve_linear(a, &b_mat)?;
    Ok(DVector::from_column_slice(x.as_slice()))
}

pub fn complexify(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

// Ratio of extreme LU pivot magnitudes, a cheap condition proxy.
fn pivot_condition_estimate<T>(lu: &nalgebra::LU<T, nalgebra::Dyn, nalgebra::Dyn>) -> f64
where
    T: nalgebra::ComplexField<RealField = f64> + Copy,
{
    let u = lu.u();
    let diag = u.diagonal();
    let mut max_p = 0.0_f64;
    let mut min_p = f64::INFINITY;
    for d in diag.iter() {
        let p = d.modulus();
        max_p = max_p.max(p);
        min_p = min_p.min(p);
    }
    if min_p == 0.0 {
        f64::INFINITY
    } else {
        max_p / min_p
    }
}

fn sort_eigenvalues(values: &mut [C64]) {
    // Descending modulus; ties by descending real part, then descending
    // imaginary part so a conjugate's positive member comes first.
    values.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap()
            .then(b.re.partial_cmp(&a.re).unwrap())
            .then(b.im.partial_cmp(&a.im).unwrap())
    });
}

fn start_vector(n: usize, attempt: u64) -> DVector<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0E16_5EED ^ attempt);
    let v = DVector::from_fn(n, |_, _| C64::new(rng.gen::<f64>() * 2.0 - 1.0, 0.0));
    let norm = v.norm();
    v / C64::new(norm, 0.0)
}

fn inverse_iteration(mc: &DMatrix<C64>, lambda: C64, scale: f64) -> (DVector<C64>, f64) {
    let n = mc.nrows();
    let mut best_v = start_vector(n, 0);
    let mut best_res = f64::INFINITY;

    'attempts: for attempt in 0..4u64 {
        // Exact shifts make A - lambda*I numerically singular, which is what
        // drives the iteration; only retreat to a perturbed shift when the
        // factorization degenerates completely.
        let pert = scale * 1e-13 * 4.0_f64.powi(attempt as i32);
        let shift = lambda + C64::new(pert, pert);
        let mut shifted = mc.clone();
        for d in 0..n {
            shifted[(d, d)] -= shift;
        }
        let lu = shifted.lu();
        let mut v = start_vector(n, attempt);
        for _ in 0..8 {
            let w = match lu.solve(&v) {
                Some(w) => w,
                None => continue 'attempts,
            };
            let norm = w.norm();
            if !norm.is_finite() || norm == 0.0 {
                continue 'attempts;
            }
            v = w / C64::new(norm, 0.0);
            let residual = (mc * &v - &v * lambda).norm();
            if residual < best_res {
                best_res = residual;
                best_v = v.clone();
            }
            if best_res <= 1e-12 * scale {
                break 'attempts;
            }
        }
        if best_res <= 1e-10 * scale {
            break;
        }
    }

    fix_phase(&mut best_v);
    (best_v, best_res)
}

// Rotate so the largest-magnitude component is real positive; makes
// vectors of real eigenvalues real and the output deterministic.
fn fix_phase(v: &mut DVector<C64>) {
    let mut k = 0;
    let mut best = 0.0_f64;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best {
            best = m;
            k = i;
        }
    }
    if best > 0.0 {
        let phase = v[k] / C64::new(best, 0.0);
        let rot = phase.conj();
        for z in v.iter_mut() {
            *z *= rot;
        }
    }
}

fn dim_mismatch<T1: nalgebra::Scalar, T2: nalgebra::Scalar>(
    context: &str,
    a: &DMatrix<T1>,
    b: &DMatrix<T2>,
) -> Error {
    Error::DimensionMismatch {
        context: context.to_string(),
        left_rows: a.nrows(),
        left_cols: a.ncols(),
        right_rows: b.nrows(),
        right_cols: b.ncols(),
    }
}
