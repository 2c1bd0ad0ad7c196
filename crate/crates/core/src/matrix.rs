//! Dense complex linear algebra: Hermitian eigendecomposition, singular values,
//! polar decomposition and spectral calculus.
//!
//! Everything is double precision. Tolerances are stated relative to the norm
//! of the input so that the same thresholds work across scales.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense square complex matrix. Every routine in the crate works on this type.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Relative tolerance used to decide whether a matrix is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues at or below `POSITIVITY_FLOOR * ‖A‖` are treated as zero.
pub const POSITIVITY_FLOOR: f64 = 1e-12;
/// Singular values below `RANK_TOL * σ_max` are exact zeros.
pub const RANK_TOL: f64 = 1e-14;

const EIGEN_EPS: f64 = 1e-15;
const MAX_SWEEPS: usize = 10_000;
const MAX_JACOBI_SWEEPS: usize = 100;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

pub fn from_real_diag(values: &[f64]) -> ComplexMatrix {
    let n = values.len();
    ComplexMatrix::from_fn(n, n, |i, j| if i == j { c(values[i], 0.0) } else { c(0.0, 0.0) })
}

/// Builds a matrix from row-major complex entries.
pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<ComplexMatrix> {
    let n = rows.len();
    for row in rows {
        if row.len() != n {
            return Err(Error::NotSquare { rows: n, cols: row.len() });
        }
    }
    let m = ComplexMatrix::from_fn(n, n, |i, j| rows[i][j]);
    validate(&m)?;
    Ok(m)
}

/// Checks the `ComplexMatrix` invariants: square and finite.
pub fn validate(a: &ComplexMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

pub fn trace(a: &ComplexMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

pub fn dagger(a: &ComplexMatrix) -> ComplexMatrix {
    a.adjoint()
}

/// Hilbert–Schmidt inner product ⟨X, Y⟩ = Tr(X* Y).
pub fn hs_inner(x: &ComplexMatrix, y: &ComplexMatrix) -> Complex64 {
    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
}

pub fn frobenius(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

/// Singular value decomposition `A = U diag(σ) V*` with σ sorted descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

pub fn svd(a: &ComplexMatrix) -> Result<Svd> {
    validate(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(Svd { u: a.clone(), singular_values: vec![], v: a.clone() });
    }
    let (w, v) = one_sided_jacobi(a)?;
    let norms: Vec<f64> = (0..n).map(|k| w.column(k).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let top = norms[order[0]];
    let mut u = ComplexMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    let mut filled = 0;
    for (k, &i) in order.iter().enumerate() {
        let sigma = norms[i];
        if sigma > RANK_TOL * top && sigma > 0.0 {
            u.set_column(k, &w.column(i).unscale(sigma));
            filled = k + 1;
        }
        s.push(sigma);
    }
    complete_orthonormal(&mut u, filled);
    let v_sorted = ComplexMatrix::from_fn(n, n, |r, k| v[(r, order[k])]);
    Ok(Svd { u, singular_values: s, v: v_sorted })
}

/// Hestenes iteration: right-multiplies `A` by plane rotations until its
/// columns are mutually orthogonal. Returns `(AV, V)`.
fn one_sided_jacobi(a: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = a.ncols();
    let mut w = a.clone();
    let mut v = identity(n);
    let tol = n as f64 * f64::EPSILON;
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = w.column(i).norm_squared();
                let beta = w.column(j).norm_squared();
                let gamma = w.column(i).dotc(&w.column(j));
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for m in [&mut w, &mut v] {
                    for r in 0..m.nrows() {
                        let x = m[(r, i)];
                        let y = m[(r, j)] * phase.conj();
                        m[(r, i)] = x * cs - y * sn;
                        m[(r, j)] = x * sn + y * cs;
                    }
                }
            }
        }
        if !rotated {
            return Ok((w, v));
        }
    }
    Err(Error::ConvergenceFailure("svd"))
}

/// Fills columns `filled..` of `u` with an orthonormal complement of the first
/// `filled` columns, by Gram–Schmidt on standard basis vectors.
fn complete_orthonormal(u: &mut ComplexMatrix, filled: usize) {
    let n = u.nrows();
    let mut k = filled;
    for e in 0..n {
        if k == n {
            break;
        }
        let mut x = nalgebra::DVector::<Complex64>::zeros(n);
        x[e] = c(1.0, 0.0);
        for _ in 0..2 {
            for j in 0..k {
                let proj = u.column(j).dotc(&x);
                x -= u.column(j) * proj;
            }
        }
        let norm = x.norm();
        if norm > 0.5 / (n as f64).sqrt() {
            u.set_column(k, &x.unscale(norm));
            k += 1;
        }
    }
}

/// Singular values, descending, with values below `RANK_TOL·σ_max` set to zero.
pub fn singular_values(a: &ComplexMatrix) -> Result<Vec<f64>> {
    let mut s = svd(a)?.singular_values;
    if let Some(&top) = s.first() {
        for x in s.iter_mut() {
            if *x < RANK_TOL * top {
                *x = 0.0;
            }
        }
    }
    Ok(s)
}

/// Operator norm ‖A‖_∞ (largest singular value).
pub fn op_norm(a: &ComplexMatrix) -> f64 {
    singular_values(a).map(|s| s.first().copied().unwrap_or(0.0)).unwrap_or(f64::NAN)
}

/// Deviation ‖A − A*‖ measured in the Frobenius norm (an upper bound on the operator norm).
pub fn hermiticity_defect(a: &ComplexMatrix) -> f64 {
    frobenius(&(a - a.adjoint()))
}

pub fn check_hermitian(a: &ComplexMatrix) -> Result<()> {
    validate(a)?;
    let defect = hermiticity_defect(a);
    if defect > HERMITIAN_TOL * (1.0 + frobenius(a)) {
        return Err(Error::NotHermitian { deviation: defect });
    }
    Ok(())
}

/// Spectral resolution of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Unitary whose columns are the matching eigenvectors.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V diag(f(λ)) V*`.
    pub fn apply<F: Fn(f64) -> Complex64>(&self, f: F) -> ComplexMatrix {
        let n = self.dim();
        let v = &self.vectors;
        let fv: Vec<Complex64> = self.values.iter().map(|&l| f(l)).collect();
        let scaled = ComplexMatrix::from_fn(n, n, |i, k| v[(i, k)] * fv[k]);
        scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply(|l| c(l, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// The positivity floor used for inverses, logarithms and negative powers.
    pub fn floor(&self) -> f64 {
        POSITIVITY_FLOOR * self.max_abs()
    }

    pub fn require_positive_definite(&self) -> Result<()> {
        let min = self.values.first().copied().unwrap_or(0.0);
        let floor = self.floor();
        if min <= floor {
            return Err(Error::NotPositiveDefinite { eigenvalue: min, floor });
        }
        Ok(())
    }
}

/// Makes the first non-negligible component real positive.
fn fix_phase(v: &mut ComplexMatrix, col: usize) {
    let n = v.nrows();
    let scale = (0..n).map(|i| v[(i, col)].norm()).fold(0.0, f64::max);
    if let Some(i) = (0..n).find(|&i| v[(i, col)].norm() > 1e-8 * scale) {
        let z = v[(i, col)];
        let phase = z.conj() / z.norm();
        for r in 0..n {
            v[(r, col)] *= phase;
        }
        v[(i, col)] = c(v[(i, col)].norm(), 0.0);
    }
}

fn lex_key(v: &ComplexMatrix, col: usize) -> Vec<f64> {
    (0..v.nrows()).flat_map(|i| [v[(i, col)].re, v[(i, col)].im]).collect()
}

/// Eigendecomposition of a Hermitian matrix with ascending eigenvalues and
/// phase-fixed eigenvectors.
pub fn eig_hermitian(a: &ComplexMatrix) -> Result<HermitianEigen> {
    check_hermitian(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(HermitianEigen { values: vec![], vectors: a.clone() });
    }
    let sym = (a + a.adjoint()).scale(0.5);
    let dec = sym
        .try_symmetric_eigen(EIGEN_EPS, MAX_SWEEPS)
        .ok_or(Error::ConvergenceFailure("hermitian eigensolver"))?;
    let mut vecs = dec.eigenvectors.clone();
    for k in 0..n {
        fix_phase(&mut vecs, k);
    }
    let scale = dec.eigenvalues.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let (li, lj) = (dec.eigenvalues[i], dec.eigenvalues[j]);
        if (li - lj).abs() <= 1e-14 * scale {
            let (ki, kj) = (lex_key(&vecs, i), lex_key(&vecs, j));
            kj.partial_cmp(&ki).unwrap_or(std::cmp::Ordering::Equal)
        } else {
            li.total_cmp(&lj)
        }
    });
    let values = order.iter().map(|&k| dec.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, k| vecs[(r, order[k])]);
    Ok(HermitianEigen { values, vectors })
}

/// Scalar functions applied through the spectral theorem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatrixFn {
    /// `A^s` for real `s`.
    Power(f64),
    /// `A^z = exp(z log A)` for complex `z`; needs a positive definite input.
    ComplexPower(Complex64),
    Exp,
    /// `exp(z A)`.
    ScaledExp(Complex64),
    Log,
}

/// Applies `f` on the spectrum of a Hermitian matrix.
///
/// Logarithms, negative powers and complex powers require a positive definite
/// input. Non-integer positive powers accept positive semidefinite input,
/// clamping eigenvalues inside the positivity floor to zero.
pub fn matrix_function(a: &ComplexMatrix, f: MatrixFn) -> Result<ComplexMatrix> {
    let eig = eig_hermitian(a)?;
    spectral_function(&eig, f)
}

pub fn spectral_function(eig: &HermitianEigen, f: MatrixFn) -> Result<ComplexMatrix> {
    let floor = eig.floor();
    let min = eig.values.first().copied().unwrap_or(0.0);
    match f {
        MatrixFn::Exp => Ok(eig.apply(|l| c(l.exp(), 0.0))),
        MatrixFn::ScaledExp(z) => Ok(eig.apply(|l| (z * l).exp())),
        MatrixFn::Log => {
            eig.require_positive_definite()?;
            Ok(eig.apply(|l| c(l.ln(), 0.0)))
        }
        MatrixFn::ComplexPower(z) => {
            if z == c(0.0, 0.0) {
                return Ok(identity(eig.dim()));
            }
            eig.require_positive_definite()?;
            Ok(eig.apply(|l| (z * l.ln()).exp()))
        }
        MatrixFn::Power(s) => {
            if s.fract() == 0.0 && s >= 0.0 {
                let k = s as i32;
                return Ok(eig.apply(|l| c(l.powi(k), 0.0)));
            }
            if s < 0.0 {
                eig.require_positive_definite()?;
                return Ok(eig.apply(|l| c(l.powf(s), 0.0)));
            }
            if min < -floor {
                return Err(Error::NotPositiveDefinite { eigenvalue: min, floor });
            }
            Ok(eig.apply(|l| if l <= floor { c(0.0, 0.0) } else { c(l.powf(s), 0.0) }))
        }
    }
}

/// Polar decomposition `A = U|A|`.
#[derive(Debug, Clone)]
pub struct PolarParts {
    /// Partial isometry with `U*U` the projection onto the range of `|A|`.
    pub isometry: ComplexMatrix,
    /// Positive semidefinite modulus `|A| = (A*A)^{1/2}`.
    pub modulus: ComplexMatrix,
    /// A unitary extending `isometry` (equal to it when `A` is invertible).
    pub unitary: ComplexMatrix,
}

pub fn polar(a: &ComplexMatrix) -> Result<PolarParts> {
    let Svd { u, singular_values, v } = svd(a)?;
    let n = a.nrows();
    let cut = RANK_TOL * singular_values.first().copied().unwrap_or(0.0);
    let rank = singular_values.iter().filter(|&&s| s > cut && s > 0.0).count();
    let sigma: Vec<Complex64> =
        singular_values.iter().map(|&s| c(if s > cut { s } else { 0.0 }, 0.0)).collect();
    let v_scaled = ComplexMatrix::from_fn(n, n, |i, k| v[(i, k)] * sigma[k]);
    let modulus = v_scaled * v.adjoint();
    let modulus = (&modulus + modulus.adjoint()).scale(0.5);
    let u_r = u.columns(0, rank).into_owned();
    let v_r = v.columns(0, rank).into_owned();
    let isometry = u_r * v_r.adjoint();
    let unitary = &u * v.adjoint();
    Ok(PolarParts { isometry, modulus, unitary })
}

/// Matrix exponential of an arbitrary square matrix by scaling and squaring
/// around a truncated Taylor series.
pub fn expm(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm1 * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let b = a.scale(scale);
    let mut term = identity(n);
    let mut sum = identity(n);
    for k in 1..=24 {
        term = &term * &b / c(k as f64, 0.0);
        sum += &term;
        if frobenius(&term) <= 1e-18 * frobenius(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_ginibre, random_hermitian, random_positive_definite};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pauli_x() -> ComplexMatrix {
        from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]]).unwrap()
    }

    #[test]
    fn diagonal_spectrum_sorted() {
        let eig = eig_hermitian(&from_real_diag(&[2.0, 1.0])).unwrap();
        assert_eq!(eig.values, vec![1.0, 2.0]);
        // permutation of identity columns, phase fixed to +1
        assert!((eig.vectors[(1, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((eig.vectors[(0, 1)] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn pauli_x_spectrum() {
        let eig = eig_hermitian(&pauli_x()).unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-14);
        assert!((eig.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_reconstruction_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_hermitian(&mut rng, 6);
            let eig = eig_hermitian(&a).unwrap();
            let res = op_norm(&(&a - eig.reconstruct()));
            assert!(res < 1e-12, "residual {res}");
            let vv = eig.vectors.adjoint() * &eig.vectors;
            assert!(op_norm(&(vv - identity(6))) < 1e-12);
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let a = from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]]).unwrap();
        assert!(matches!(eig_hermitian(&a), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn non_square_and_non_finite_rejected() {
        let a = ComplexMatrix::zeros(2, 3);
        assert!(matches!(validate(&a), Err(Error::NotSquare { .. })));
        let mut b = identity(2);
        b[(0, 1)] = c(f64::NAN, 0.0);
        assert_eq!(validate(&b), Err(Error::NonFinite));
    }

    #[test]
    fn square_root_of_diagonal() {
        let r = matrix_function(&from_real_diag(&[4.0, 9.0]), MatrixFn::Power(0.5)).unwrap();
        assert!(op_norm(&(r - from_real_diag(&[2.0, 3.0]))) < 1e-14);
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let r = matrix_function(&ComplexMatrix::zeros(3, 3), MatrixFn::Exp).unwrap();
        assert!(op_norm(&(r - identity(3))) < 1e-15);
    }

    #[test]
    fn log_exp_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let a = random_positive_definite(&mut rng, 5);
            let l = matrix_function(&a, MatrixFn::Log).unwrap();
            let back = matrix_function(&l, MatrixFn::Exp).unwrap();
            assert!(op_norm(&(back - &a)) < 1e-10 * (1.0 + op_norm(&a)));
        }
    }

    #[test]
    fn log_of_singular_fails() {
        let a = from_real_diag(&[1.0, 0.0]);
        assert!(matches!(matrix_function(&a, MatrixFn::Log), Err(Error::NotPositiveDefinite { .. })));
        assert!(matches!(
            matrix_function(&a, MatrixFn::Power(-0.5)),
            Err(Error::NotPositiveDefinite { .. })
        ));
        // positive fractional powers are fine on the semidefinite cone
        let r = matrix_function(&a, MatrixFn::Power(0.5)).unwrap();
        assert!(op_norm(&(r - &a)) < 1e-15);
    }

    #[test]
    fn power_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_positive_definite(&mut rng, 4);
        for (s, t) in [(0.5, 0.25), (-0.3, 1.7), (2.0, -1.0)] {
            let lhs = matrix_function(&a, MatrixFn::Power(s)).unwrap()
                * matrix_function(&a, MatrixFn::Power(t)).unwrap();
            let rhs = matrix_function(&a, MatrixFn::Power(s + t)).unwrap();
            assert!(op_norm(&(lhs - rhs)) < 1e-10);
        }
    }

    #[test]
    fn polar_of_positive_definite_and_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_positive_definite(&mut rng, 4);
        let parts = polar(&p).unwrap();
        assert!(op_norm(&(&parts.modulus - &p)) < 1e-12);
        assert!(op_norm(&(&parts.isometry - identity(4))) < 1e-12);

        let w = crate::random::random_unitary(&mut rng, 4);
        let parts = polar(&w).unwrap();
        assert!(op_norm(&(&parts.isometry - &w)) < 1e-12);
        assert!(op_norm(&(&parts.modulus - identity(4))) < 1e-12);
    }

    #[test]
    fn polar_residual_and_modulus_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let a = random_ginibre(&mut rng, 4);
            let parts = polar(&a).unwrap();
            assert!(op_norm(&(&a - &parts.isometry * &parts.modulus)) < 1e-11);
            let via_sqrt = matrix_function(&(a.adjoint() * &a), MatrixFn::Power(0.5)).unwrap();
            assert!(op_norm(&(&parts.modulus - via_sqrt)) < 1e-10);
        }
    }

    #[test]
    fn svd_of_rank_deficient_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for k in 0..200 {
            let d = 2 + k % 7;
            let a = crate::random::random_psd(&mut rng, d, 1 + k % d).scale(1.0 + k as f64);
            let dec = svd(&a).unwrap();
            let rec = &dec.u * from_real_diag(&dec.singular_values) * dec.v.adjoint();
            let scale = frobenius(&a);
            assert!(frobenius(&(rec - &a)) < 1e-13 * scale, "{k}");
            assert!(frobenius(&(dec.u.adjoint() * &dec.u - identity(d))) < 1e-13);
            assert!(frobenius(&(dec.v.adjoint() * &dec.v - identity(d))) < 1e-13);
            // PSD input: singular values are the eigenvalues
            let mut eig = eig_hermitian(&a).unwrap().values;
            eig.reverse();
            for (s, e) in dec.singular_values.iter().zip(&eig) {
                assert!((s - e.max(0.0)).abs() < 1e-13 * scale, "{k}: {s} vs {e}");
            }
        }
    }

    #[test]
    fn polar_rank_deficient_isometry_is_partial() {
        let a = from_real_diag(&[3.0, 0.0]);
        let parts = polar(&a).unwrap();
        let proj = parts.isometry.adjoint() * &parts.isometry;
        assert!(op_norm(&(proj - from_real_diag(&[1.0, 0.0]))) < 1e-14);
        assert!(op_norm(&(&a - &parts.isometry * &parts.modulus)) < 1e-14);
    }

    #[test]
    fn expm_matches_spectral_exp() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_hermitian(&mut rng, 5);
        let a = h.map(|z| z * c(0.0, 1.3));
        let spectral = matrix_function(&h, MatrixFn::ScaledExp(c(0.0, 1.3))).unwrap();
        assert!(op_norm(&(expm(&a) - spectral)) < 1e-12);
    }
}
