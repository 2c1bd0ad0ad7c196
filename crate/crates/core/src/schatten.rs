//! Schatten norms on a matrix algebra with its trace, the weighted functional
//! τ_H, and executable forms of the Hölder, Minkowski, duality and
//! interpolation inequalities.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{self, c, ComplexMatrix, MatrixFn};
use crate::report::{format_index, BoundReport};

/// Tolerance on index constraints such as Σ 1/p_i = 1.
pub const INDEX_TOL: f64 = 1e-12;

/// A Schatten index `p ∈ [1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SchattenIndex {
    Finite(f64),
    Infinity,
}

impl SchattenIndex {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_infinite() && p > 0.0 {
            Ok(SchattenIndex::Infinity)
        } else if p.is_finite() && p >= 1.0 {
            Ok(SchattenIndex::Finite(p))
        } else {
            Err(Error::InvalidIndex(p))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            SchattenIndex::Finite(p) => p,
            SchattenIndex::Infinity => f64::INFINITY,
        }
    }

    /// `1/p`, zero for `p = ∞`.
    pub fn reciprocal(self) -> f64 {
        match self {
            SchattenIndex::Finite(p) => 1.0 / p,
            SchattenIndex::Infinity => 0.0,
        }
    }

    /// The conjugate index `q` with `1/p + 1/q = 1`.
    pub fn conjugate(self) -> Self {
        match self {
            SchattenIndex::Infinity => SchattenIndex::Finite(1.0),
            SchattenIndex::Finite(p) if p == 1.0 => SchattenIndex::Infinity,
            SchattenIndex::Finite(p) => SchattenIndex::Finite(p / (p - 1.0)),
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, SchattenIndex::Infinity)
    }
}

impl fmt::Display for SchattenIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_index(self.value()))
    }
}

impl From<SchattenIndex> for f64 {
    fn from(p: SchattenIndex) -> f64 {
        p.value()
    }
}

/// `(Σ σ_i^p)^{1/p}` for descending singular values, scaled to avoid overflow.
pub fn norm_from_singular_values(s: &[f64], p: SchattenIndex) -> f64 {
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0.0;
    }
    match p {
        SchattenIndex::Infinity => top,
        SchattenIndex::Finite(p) => top * s.iter().map(|x| (x / top).powf(p)).sum::<f64>().powf(1.0 / p),
    }
}

/// `‖A‖_p = τ(|A|^p)^{1/p}`; the operator norm for `p = ∞`.
pub fn schatten_norm(a: &ComplexMatrix, p: SchattenIndex) -> f64 {
    match matrix::singular_values(a) {
        Ok(s) => norm_from_singular_values(&s, p),
        Err(_) => f64::NAN,
    }
}

/// Shorthand for [`schatten_norm`] with a raw index.
pub fn norm_p(a: &ComplexMatrix, p: f64) -> f64 {
    match SchattenIndex::new(p) {
        Ok(idx) => schatten_norm(a, idx),
        Err(_) => f64::NAN,
    }
}

fn require_psd(h: &ComplexMatrix) -> Result<matrix::HermitianEigen> {
    let eig = matrix::eig_hermitian(h)?;
    let floor = eig.floor();
    if let Some(&min) = eig.values.first() {
        if min < -floor.max(1e-14) {
            return Err(Error::NotPositiveDefinite { eigenvalue: min, floor });
        }
    }
    Ok(eig)
}

/// `τ_H(A) = τ(HA)` for a positive semidefinite weight `H`.
pub fn weighted_functional(h: &ComplexMatrix, a: &ComplexMatrix) -> Result<Complex64> {
    require_psd(h)?;
    check_same_dim(h, a)?;
    Ok(matrix::trace(&(h * a)))
}

/// The symmetric form `τ(H^{1/2} A H^{1/2})`, which agrees with [`weighted_functional`].
pub fn weighted_functional_sandwich(h: &ComplexMatrix, a: &ComplexMatrix) -> Result<Complex64> {
    let eig = require_psd(h)?;
    check_same_dim(h, a)?;
    let root = matrix::spectral_function(&eig, MatrixFn::Power(0.5))?;
    Ok(matrix::trace(&(&root * a * &root)))
}

fn check_same_dim(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    matrix::validate(a)?;
    matrix::validate(b)?;
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.nrows() });
    }
    Ok(())
}

fn join_indices(entries: &[(&str, SchattenIndex)]) -> String {
    entries.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

/// k-factor Hölder: `τ(|A_1⋯A_k|) ≤ Π ‖A_i‖_{p_i}` when `Σ 1/p_i = 1`.
pub fn check_holder(mats: &[ComplexMatrix], indices: &[SchattenIndex]) -> Result<BoundReport> {
    if mats.is_empty() || mats.len() != indices.len() {
        return Err(Error::IndexMismatch(format!(
            "{} matrices but {} indices",
            mats.len(),
            indices.len()
        )));
    }
    let total: f64 = indices.iter().map(|p| p.reciprocal()).sum();
    if (total - 1.0).abs() > INDEX_TOL {
        return Err(Error::IndexMismatch(format!("sum of reciprocals is {total}, expected 1")));
    }
    for m in &mats[1..] {
        check_same_dim(&mats[0], m)?;
    }
    let mut product = mats[0].clone();
    for m in &mats[1..] {
        product = &product * m;
    }
    let lhs = schatten_norm(&product, SchattenIndex::Finite(1.0));
    let rhs: f64 = mats.iter().zip(indices).map(|(m, &p)| schatten_norm(m, p)).product();
    let labels: Vec<String> = (1..=indices.len()).map(|i| format!("p{i}")).collect();
    let tagged: Vec<(&str, SchattenIndex)> = labels.iter().map(|s| s.as_str()).zip(indices.iter().copied()).collect();
    Ok(BoundReport::new("holder", mats[0].nrows(), join_indices(&tagged), lhs, rhs))
}

/// `‖AB‖_r ≤ ‖A‖_p ‖B‖_q` when `1/p + 1/q = 1/r`.
pub fn check_three_term_holder(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    p: SchattenIndex,
    q: SchattenIndex,
    r: SchattenIndex,
) -> Result<BoundReport> {
    let gap = p.reciprocal() + q.reciprocal() - r.reciprocal();
    if gap.abs() > INDEX_TOL {
        return Err(Error::IndexMismatch(format!("1/p + 1/q - 1/r = {gap}")));
    }
    check_same_dim(a, b)?;
    let lhs = schatten_norm(&(a * b), r);
    let rhs = schatten_norm(a, p) * schatten_norm(b, q);
    Ok(BoundReport::new(
        "three_term_holder",
        a.nrows(),
        join_indices(&[("p", p), ("q", q), ("r", r)]),
        lhs,
        rhs,
    ))
}

/// `‖A + B‖_p ≤ ‖A‖_p + ‖B‖_p`.
pub fn check_minkowski(a: &ComplexMatrix, b: &ComplexMatrix, p: SchattenIndex) -> Result<BoundReport> {
    check_same_dim(a, b)?;
    let lhs = schatten_norm(&(a + b), p);
    let rhs = schatten_norm(a, p) + schatten_norm(b, p);
    Ok(BoundReport::new("minkowski", a.nrows(), join_indices(&[("p", p)]), lhs, rhs))
}

/// A norming element `B` of the unit ball of `L_q`, `q` conjugate to `p`, with
/// `τ(AB) = ‖A‖_p`. Returns `B` and the attained value `Re τ(AB)`.
pub fn dual_witness(a: &ComplexMatrix, p: SchattenIndex) -> Result<(ComplexMatrix, f64)> {
    let matrix::Svd { u, singular_values, v } = matrix::svd(a)?;
    let top = singular_values.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Err(Error::ZeroInput);
    }
    let n = a.nrows();
    let cut = matrix::RANK_TOL * top;
    // A = U Σ V*, so B = V D U* gives τ(AB) = Σ σ_i d_i.
    let weights: Vec<f64> = match p {
        SchattenIndex::Finite(pp) if pp == 1.0 => vec![1.0; n],
        SchattenIndex::Infinity => (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(),
        SchattenIndex::Finite(pp) => {
            let norm = norm_from_singular_values(&singular_values, p);
            singular_values
                .iter()
                .map(|&s| if s > cut { (s / norm).powf(pp - 1.0) } else { 0.0 })
                .collect()
        }
    };
    let v_scaled = ComplexMatrix::from_fn(n, n, |i, k| v[(i, k)] * c(weights[k], 0.0));
    let b = v_scaled * u.adjoint();
    let attained = matrix::trace(&(a * &b)).re;
    Ok((b, attained))
}

/// Interpolation bound for `p < r < q`:
/// `‖A‖_r ≤ ‖A‖_p^{p(q−r)/(r(q−p))} ‖A‖_q^{q(r−p)/(r(q−p))}` for finite `q`, and
/// `‖A‖_r ≤ ‖A‖_p^{p/r} ‖A‖_∞^{1−p/r}` for `q = ∞`.
pub fn check_interpolation(a: &ComplexMatrix, p: SchattenIndex, r: SchattenIndex, q: SchattenIndex) -> Result<BoundReport> {
    let (pv, rv, qv) = (p.value(), r.value(), q.value());
    if !(pv < rv && rv < qv) {
        return Err(Error::IndexOrdering { p: pv, r: rv, q: qv });
    }
    matrix::validate(a)?;
    let s = matrix::singular_values(a)?;
    let lhs = norm_from_singular_values(&s, r);
    let np = norm_from_singular_values(&s, p);
    let nq = norm_from_singular_values(&s, q);
    let rhs = if q.is_infinite() {
        np.powf(pv / rv) * nq.powf(1.0 - pv / rv)
    } else {
        let ep = pv * (qv - rv) / (rv * (qv - pv));
        let eq = qv * (rv - pv) / (rv * (qv - pv));
        np.powf(ep) * nq.powf(eq)
    };
    Ok(BoundReport::new(
        "interpolation",
        a.nrows(),
        join_indices(&[("p", p), ("r", r), ("q", q)]),
        lhs,
        rhs,
    ))
}

/// `τ(|A|^n)^{1/n}`, which tends to `‖A‖_∞`.
pub fn growth_diagnostic(a: &ComplexMatrix, n: u32) -> f64 {
    schatten_norm(a, SchattenIndex::Finite(n.max(1) as f64))
}

/// `|τ(|A|^n)^{1/n} − ‖A‖_∞| ≤ ‖A‖_∞ (dim^{1/n} − 1) + 1e−9`.
pub fn check_growth_law(a: &ComplexMatrix, n: u32) -> Result<BoundReport> {
    matrix::validate(a)?;
    let s = matrix::singular_values(a)?;
    let top = s.first().copied().unwrap_or(0.0);
    let g = norm_from_singular_values(&s, SchattenIndex::Finite(n.max(1) as f64));
    let dim = a.nrows() as f64;
    let rhs = top * (dim.powf(1.0 / n.max(1) as f64) - 1.0) + 1e-9;
    Ok(BoundReport::new("growth_law", a.nrows(), format!("n={n}"), (g - top).abs(), rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{from_real_diag, identity, op_norm};
    use crate::random::{random_ginibre, random_psd, random_unitary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn idx(p: f64) -> SchattenIndex {
        SchattenIndex::new(p).unwrap()
    }

    #[test]
    fn index_validation_and_conjugates() {
        assert!(SchattenIndex::new(0.5).is_err());
        assert!(SchattenIndex::new(f64::NAN).is_err());
        assert_eq!(idx(1.0).conjugate(), SchattenIndex::Infinity);
        assert_eq!(idx(f64::INFINITY).conjugate(), idx(1.0));
        assert!((idx(3.0).conjugate().value() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn diagonal_norms() {
        let a = from_real_diag(&[3.0, 4.0]);
        assert!((schatten_norm(&a, idx(1.0)) - 7.0).abs() < 1e-14);
        assert!((schatten_norm(&a, idx(2.0)) - 5.0).abs() < 1e-14);
        assert!((schatten_norm(&a, SchattenIndex::Infinity) - 4.0).abs() < 1e-14);
        assert!((schatten_norm(&identity(2), idx(2.0)) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn two_norm_is_frobenius() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a = random_ginibre(&mut rng, 5);
            let oracle = matrix::trace(&(a.adjoint() * &a)).re.sqrt();
            assert!((schatten_norm(&a, idx(2.0)) - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_functional_examples() {
        let rho = from_real_diag(&[0.5, 0.5]);
        let sx = matrix::from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]]).unwrap();
        assert!(weighted_functional(&rho, &sx).unwrap().norm() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_ginibre(&mut rng, 4);
        let got = weighted_functional(&identity(4), &a).unwrap();
        assert!((got - matrix::trace(&a)).norm() < 1e-14);
        for _ in 0..10 {
            let h = random_psd(&mut rng, 4, 2);
            let a = random_psd(&mut rng, 4, 4);
            let x = weighted_functional(&h, &a).unwrap();
            let y = weighted_functional_sandwich(&h, &a).unwrap();
            assert!((x - y).norm() < 1e-11);
        }
    }

    #[test]
    fn holder_examples() {
        let r = check_holder(&[identity(2), identity(2)], &[idx(2.0), idx(2.0)]).unwrap();
        assert!((r.lhs - 2.0).abs() < 1e-14 && (r.rhs - 2.0).abs() < 1e-14 && r.slack.abs() < 1e-14);
        let r = check_holder(&[from_real_diag(&[1.0, 0.0]), from_real_diag(&[0.0, 1.0])], &[idx(2.0), idx(2.0)]).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!((r.rhs - 1.0).abs() < 1e-15);
        assert!(matches!(
            check_holder(&[identity(2), identity(2)], &[idx(2.0), idx(3.0)]),
            Err(Error::IndexMismatch(_))
        ));
    }

    #[test]
    fn three_term_equality_and_unitary_cases() {
        let a = from_real_diag(&[2.0, 1.0, 0.0]);
        let b = from_real_diag(&[3.0, 0.5, 0.0]);
        let r = check_three_term_holder(&a, &b, idx(4.0), idx(4.0), idx(2.0)).unwrap();
        // aligned supports with |A|^p ∝ |B|^q gives equality; here check slack stays nonnegative
        assert!(r.slack >= -1e-12);
        let a = from_real_diag(&[2.0, 1.0]);
        let r = check_three_term_holder(&a, &a, idx(4.0), idx(4.0), idx(2.0)).unwrap();
        assert!(r.slack.abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = random_unitary(&mut rng, 3);
        let b = random_ginibre(&mut rng, 3);
        let r = check_three_term_holder(&u, &b, SchattenIndex::Infinity, idx(3.0), idx(3.0)).unwrap();
        assert!((r.lhs - schatten_norm(&b, idx(3.0))).abs() < 1e-12);
        assert!(r.slack >= -1e-12);
    }

    #[test]
    fn minkowski_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_ginibre(&mut rng, 3);
        let r = check_minkowski(&a, &(-&a), idx(1.5)).unwrap();
        assert!(r.lhs < 1e-14);
        let r = check_minkowski(&a, &a, idx(3.0)).unwrap();
        assert!(r.slack.abs() < 1e-12);
    }

    #[test]
    fn dual_witness_diagonal() {
        let a = from_real_diag(&[3.0, 4.0]);
        let (b, attained) = dual_witness(&a, idx(2.0)).unwrap();
        assert!((attained - 5.0).abs() < 1e-13);
        assert!(op_norm(&(b - from_real_diag(&[0.6, 0.8]))) < 1e-13);
    }

    #[test]
    fn dual_witness_unitary_infinity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let w = random_unitary(&mut rng, 3);
        let (b, attained) = dual_witness(&w, SchattenIndex::Infinity).unwrap();
        assert!((attained - 1.0).abs() < 1e-12);
        assert!((schatten_norm(&b, idx(1.0)) - 1.0).abs() < 1e-12);
        assert_eq!(matrix::singular_values(&b).unwrap().iter().filter(|&&s| s > 1e-12).count(), 1);
    }

    #[test]
    fn dual_witness_rejects_zero() {
        assert_eq!(dual_witness(&ComplexMatrix::zeros(2, 2), idx(2.0)).unwrap_err(), Error::ZeroInput);
    }

    #[test]
    fn dual_witness_rank_deficient() {
        let a = from_real_diag(&[2.0, 0.0, 0.0]);
        for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            let (b, attained) = dual_witness(&a, idx(p)).unwrap();
            assert!((attained - 2.0).abs() < 1e-12);
            assert!(schatten_norm(&b, idx(p).conjugate()) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn interpolation_rank_one_equality() {
        let a = from_real_diag(&[1.7, 0.0, 0.0]);
        for (p, r, q) in [(1.0, 2.0, 3.0), (1.0, 1.5, f64::INFINITY), (2.0, 5.0, 7.0)] {
            let rep = check_interpolation(&a, idx(p), idx(r), idx(q)).unwrap();
            assert!(rep.slack.abs() < 1e-12, "{rep:?}");
        }
        assert!(matches!(
            check_interpolation(&a, idx(2.0), idx(1.5), idx(3.0)),
            Err(Error::IndexOrdering { .. })
        ));
    }

    #[test]
    fn interpolation_flat_spectrum() {
        let rep = check_interpolation(&identity(4), idx(1.0), idx(2.0), idx(4.0)).unwrap();
        assert!((rep.lhs - 2.0).abs() < 1e-14);
        assert!(rep.slack >= -1e-14);
    }

    #[test]
    fn growth_law_envelope() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let a = random_ginibre(&mut rng, 5);
            let r = check_growth_law(&a, 64).unwrap();
            assert!(r.slack >= 0.0);
        }
    }
}
