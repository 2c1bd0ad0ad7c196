//! GNS representation of a faithful state on a matrix algebra in the
//! Hilbert–Schmidt model, with the Tomita operators S, J, Δ, the modular flow
//! and the KMS two-point function.
//!
//! Vectors of the GNS space are matrices `X` with `⟨X, Y⟩ = τ(X*Y)`,
//! cyclic vector `Ω = ρ^{1/2}` and `π(A)X = AX`. Then `ΔX = ρXρ^{−1}`,
//! `JX = X*` and `S X = ρ^{−1/2} X* ρ^{1/2}`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{self, c, ComplexMatrix, HermitianEigen, MatrixFn};
use crate::random::{random_ginibre, shard_rng};
use crate::report::BoundReport;
use crate::schatten::{norm_from_singular_values, SchattenIndex};

pub type RealMatrix = DMatrix<f64>;

/// Tolerance for the modular invariants.
pub const MODULAR_TOL: f64 = 1e-10;
/// Tolerance for the agreement of the assembled and closed-form S.
pub const ASSEMBLY_TOL: f64 = 1e-9;
/// Tolerance for the KMS boundary identity.
pub const KMS_TOL: f64 = 1e-9;

/// Which sign of β the dynamics is parameterized for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BetaConvention {
    /// Dynamics is the modular flow `ρ^{it}·ρ^{−it}`; KMS at β = −1.
    Modular,
    /// Dynamics is the reversed flow `α_t = τ_{−t}`; KMS at β = +1.
    Reversed,
}

impl BetaConvention {
    pub fn beta(self) -> f64 {
        match self {
            BetaConvention::Modular => -1.0,
            BetaConvention::Reversed => 1.0,
        }
    }

    fn direction(self) -> f64 {
        -self.beta()
    }
}

/// A faithful state together with its GNS data.
#[derive(Debug, Clone)]
pub struct GnsContext {
    pub dim: usize,
    pub rho: ComplexMatrix,
    pub rho_eigen: HermitianEigen,
    /// Cyclic vector `ρ^{1/2}`.
    pub omega: ComplexMatrix,
    pub beta_convention: BetaConvention,
    log_eigs: Vec<f64>,
}

/// Eigen-grid data of the modular operators.
#[derive(Debug, Clone)]
pub struct ModularData {
    /// `delta_grid[i][j] = p_i / p_j`, the eigenvalue of Δ on `|e_i⟩⟨e_j|`.
    pub delta_grid: Vec<Vec<f64>>,
}

pub fn build_gns(rho: &ComplexMatrix) -> Result<GnsContext> {
    let rho_eigen = matrix::eig_hermitian(rho)?;
    let min = rho_eigen.values.first().copied().unwrap_or(0.0);
    if min <= rho_eigen.floor() {
        return Err(Error::NotFaithful { min_eigenvalue: min });
    }
    let tr = matrix::trace(rho).re;
    if (tr - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { trace: tr });
    }
    let omega = matrix::spectral_function(&rho_eigen, MatrixFn::Power(0.5))?;
    let log_eigs = rho_eigen.values.iter().map(|p| p.ln()).collect();
    Ok(GnsContext {
        dim: rho.nrows(),
        rho: (rho + rho.adjoint()).scale(0.5),
        rho_eigen,
        omega,
        beta_convention: BetaConvention::Modular,
        log_eigs,
    })
}

impl GnsContext {
    pub fn with_beta_convention(mut self, convention: BetaConvention) -> Self {
        self.beta_convention = convention;
        self
    }

    pub fn beta(&self) -> f64 {
        self.beta_convention.beta()
    }

    /// Eigenvalues `p_i` of ρ, ascending.
    pub fn spectrum(&self) -> &[f64] {
        &self.rho_eigen.values
    }

    pub fn log_spectrum(&self) -> &[f64] {
        &self.log_eigs
    }

    pub fn eigenbasis(&self) -> &ComplexMatrix {
        &self.rho_eigen.vectors
    }

    /// `V* X V`.
    pub fn to_eigenbasis(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let v = self.eigenbasis();
        v.adjoint() * x * v
    }

    /// `V X V*`.
    pub fn from_eigenbasis(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let v = self.eigenbasis();
        v * x * v.adjoint()
    }

    /// `ρ^z` for complex `z`.
    pub fn rho_power(&self, z: Complex64) -> ComplexMatrix {
        self.rho_eigen.apply(|p| (z * p.ln()).exp())
    }

    pub fn log_rho(&self) -> ComplexMatrix {
        self.rho_eigen.apply(|p| c(p.ln(), 0.0))
    }

    /// `φ(A) = τ(ρA)`.
    pub fn state(&self, a: &ComplexMatrix) -> Complex64 {
        matrix::trace(&(&self.rho * a))
    }

    /// `⟨Ω, π(A)Ω⟩`.
    pub fn vector_state(&self, a: &ComplexMatrix) -> Complex64 {
        matrix::hs_inner(&self.omega, &(a * &self.omega))
    }

    /// `Δ^z X = ρ^z X ρ^{−z}`, evaluated on the eigen-grid.
    pub fn delta_power(&self, x: &ComplexMatrix, z: Complex64) -> ComplexMatrix {
        let xt = self.to_eigenbasis(x);
        let l = &self.log_eigs;
        let scaled = ComplexMatrix::from_fn(self.dim, self.dim, |a, b| xt[(a, b)] * (z * (l[a] - l[b])).exp());
        self.from_eigenbasis(&scaled)
    }

    /// `ΔX = ρXρ^{−1}`.
    pub fn delta(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.delta_power(x, c(1.0, 0.0))
    }

    /// `JX = X*`.
    pub fn j(&self, x: &ComplexMatrix) -> ComplexMatrix {
        x.adjoint()
    }

    /// Closed form of the Tomita operator, `S X = ρ^{−1/2} X* ρ^{1/2}`.
    pub fn s(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.delta_power(&x.adjoint(), c(-0.5, 0.0))
    }

    /// The modular automorphism group `τ_t(A) = Δ^{it} A Δ^{−it} = ρ^{it} A ρ^{−it}`.
    pub fn modular_flow(&self, a: &ComplexMatrix, t: f64) -> ComplexMatrix {
        self.delta_power(a, c(0.0, t))
    }

    /// The dynamics of the selected β convention, continued to complex time.
    pub fn dynamics(&self, a: &ComplexMatrix, z: Complex64) -> ComplexMatrix {
        self.delta_power(a, c(0.0, self.beta_convention.direction()) * z)
    }

    /// `F_{A,B}(z) = φ(A α_z(B))`; under the modular convention this is
    /// `τ(ρ A ρ^{iz} B ρ^{−iz})`.
    pub fn kms_two_point(&self, a: &ComplexMatrix, b: &ComplexMatrix, z: Complex64) -> Complex64 {
        self.state(&(a * self.dynamics(b, z)))
    }

    /// `|F(t + iβ) − φ(α_t(B) A)|`.
    pub fn kms_deviation(&self, a: &ComplexMatrix, b: &ComplexMatrix, t: f64) -> f64 {
        let lhs = self.kms_two_point(a, b, c(t, self.beta()));
        let rhs = self.state(&(self.dynamics(b, c(t, 0.0)) * a));
        (lhs - rhs).norm()
    }

    pub fn modular_data(&self) -> ModularData {
        let p = self.spectrum();
        ModularData { delta_grid: p.iter().map(|pi| p.iter().map(|pj| pi / pj).collect()).collect() }
    }
}

pub fn modular_flow(ctx: &GnsContext, a: &ComplexMatrix, t: f64) -> ComplexMatrix {
    ctx.modular_flow(a, t)
}

pub fn kms_two_point(ctx: &GnsContext, a: &ComplexMatrix, b: &ComplexMatrix, z: Complex64) -> Complex64 {
    ctx.kms_two_point(a, b, z)
}

fn unit_op<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let g = random_ginibre(rng, dim);
    let n = matrix::op_norm(&g);
    g.scale(1.0 / n)
}

/// One KMS boundary report per trial with random `A`, `B` of unit norm and
/// `t ∈ [−2, 2]`; the deviation is `lhs` and the tolerance is `rhs`.
pub fn kms_check(ctx: &GnsContext, trials: usize, seed: u64) -> Vec<BoundReport> {
    (0..trials)
        .map(|k| {
            let mut rng = shard_rng(seed, "kms", k as u64);
            let a = unit_op(&mut rng, ctx.dim);
            let b = unit_op(&mut rng, ctx.dim);
            let t = rng.random_range(-2.0..2.0);
            BoundReport::residual(
                "kms_boundary",
                ctx.dim,
                format!("beta={};t={t:.6}", ctx.beta()),
                ctx.kms_deviation(&a, &b, t),
                KMS_TOL,
            )
            .with_seed(seed)
        })
        .collect()
}

// ---- real doubling of the Hilbert–Schmidt space ----
//
// A vector X is flattened column-major, vec(AXB) = (Bᵀ ⊗ A) vec X, and a complex
// vector x becomes (Re x, Im x). A linear map M is [[Re M, −Im M], [Im M, Re M]];
// the antilinear map x ↦ M x̄ is [[Re M, Im M], [Im M, −Re M]].

pub fn vectorize(x: &ComplexMatrix) -> Vec<Complex64> {
    x.as_slice().to_vec()
}

pub fn unvectorize(v: &[Complex64], dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(dim, dim, v)
}

fn real_linear(m: &ComplexMatrix) -> RealMatrix {
    let n = m.nrows();
    RealMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = m[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

fn real_antilinear(m: &ComplexMatrix) -> RealMatrix {
    let n = m.nrows();
    RealMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = m[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) => z.re,
            (false, false) => -z.re,
            _ => z.im,
        }
    })
}

fn real_vector(v: &[Complex64]) -> Vec<f64> {
    v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)).collect()
}

/// Permutation with `vec(Xᵀ) = P vec(X)`.
fn transpose_permutation(dim: usize) -> ComplexMatrix {
    let n = dim * dim;
    let mut p = ComplexMatrix::zeros(n, n);
    for i in 0..dim {
        for j in 0..dim {
            p[(j + i * dim, i + j * dim)] = c(1.0, 0.0);
        }
    }
    p
}

fn real_op_norm(m: &RealMatrix) -> f64 {
    m.clone().singular_values().iter().fold(0.0, |a: f64, &b| a.max(b))
}

/// The Tomita operators as explicit real matrices on the doubled HS space.
#[derive(Debug, Clone)]
pub struct AssembledModular {
    /// S assembled from its defining action `AΩ ↦ A*Ω` on a basis.
    pub s: RealMatrix,
    /// Isometric part of the polar decomposition of the assembled S.
    pub j: RealMatrix,
    /// Modulus of the assembled S, i.e. Δ^{1/2}.
    pub delta_half: RealMatrix,
}

/// Closed-form real representations of S, J, Δ^{1/2}, Δ, Δ^{−1}.
#[derive(Debug, Clone)]
pub struct ClosedModular {
    pub s: RealMatrix,
    pub j: RealMatrix,
    pub delta_half: RealMatrix,
    pub delta: RealMatrix,
    pub delta_inv: RealMatrix,
}

/// Builds S from `S(E_ij Ω) = E_ji Ω`, `S(i E_ij Ω) = −i E_ji Ω` and splits it
/// with a real polar decomposition.
pub fn assemble_modular(ctx: &GnsContext) -> Result<AssembledModular> {
    let d = ctx.dim;
    let n = d * d;
    let mut domain = RealMatrix::zeros(2 * n, 2 * n);
    let mut image = RealMatrix::zeros(2 * n, 2 * n);
    let mut col = 0;
    for i in 0..d {
        for j in 0..d {
            let mut e = ComplexMatrix::zeros(d, d);
            e[(i, j)] = c(1.0, 0.0);
            let x = &e * &ctx.omega;
            let y = e.adjoint() * &ctx.omega;
            for (scale, conj_scale) in [(c(1.0, 0.0), c(1.0, 0.0)), (c(0.0, 1.0), c(0.0, -1.0))] {
                let dv = real_vector(&vectorize(&x.map(|z| z * scale)));
                let iv = real_vector(&vectorize(&y.map(|z| z * conj_scale)));
                domain.column_mut(col).copy_from_slice(&dv);
                image.column_mut(col).copy_from_slice(&iv);
                col += 1;
            }
        }
    }
    let inv = domain.try_inverse().ok_or(Error::ConvergenceFailure("S assembly: singular basis"))?;
    let s = image * inv;
    let svd = s.clone().svd(true, true);
    let u = svd.u.ok_or(Error::ConvergenceFailure("S polar: U"))?;
    let v_t = svd.v_t.ok_or(Error::ConvergenceFailure("S polar: V"))?;
    let sigma = RealMatrix::from_diagonal(&svd.singular_values);
    let j = &u * &v_t;
    let delta_half = v_t.transpose() * sigma * &v_t;
    let delta_half = (&delta_half + delta_half.transpose()) * 0.5;
    Ok(AssembledModular { s, j, delta_half })
}

pub fn closed_modular(ctx: &GnsContext) -> ClosedModular {
    let d = ctx.dim;
    let left_right = |z: f64| {
        // X ↦ ρ^z X ρ^{−z}
        let l = ctx.rho_power(c(z, 0.0));
        let r = ctx.rho_power(c(-z, 0.0));
        matrix::kron(&r.transpose(), &l)
    };
    let perm = transpose_permutation(d);
    // X ↦ ρ^{−1/2} X* ρ^{1/2} = ρ^{−1/2} conj(Xᵀ) ρ^{1/2}
    let s_lin = matrix::kron(&ctx.rho_power(c(0.5, 0.0)).transpose(), &ctx.rho_power(c(-0.5, 0.0))) * &perm;
    ClosedModular {
        s: real_antilinear(&s_lin),
        j: real_antilinear(&perm),
        delta_half: real_linear(&left_right(0.5)),
        delta: real_linear(&left_right(1.0)),
        delta_inv: real_linear(&left_right(-1.0)),
    }
}

/// All modular invariants as residual reports, including the two-route
/// comparison of the assembled and closed-form Tomita operators.
pub fn modular_invariants(ctx: &GnsContext) -> Result<Vec<BoundReport>> {
    let d = ctx.dim;
    let n2 = 2 * d * d;
    let closed = closed_modular(ctx);
    let assembled = assemble_modular(ctx)?;
    let eye = RealMatrix::identity(n2, n2);
    let omega = nalgebra::DVector::from_vec(real_vector(&vectorize(&ctx.omega)));
    let scale = |m: &RealMatrix| real_op_norm(m).max(1.0);

    let s_polar = real_op_norm(&(&closed.s - &closed.j * &closed.delta_half)) / scale(&closed.s);
    let j_sq = real_op_norm(&(&closed.j * &closed.j - &eye));
    let jdj = real_op_norm(&(&closed.j * &closed.delta * &closed.j - &closed.delta_inv)) / scale(&closed.delta_inv);
    let delta_omega = (&closed.delta * &omega - &omega).norm();
    let j_omega = (&closed.j * &omega - &omega).norm();
    let s_routes = real_op_norm(&(&assembled.s - &closed.s)) / scale(&closed.s);
    let j_routes = real_op_norm(&(&assembled.j - &closed.j));
    let dh_routes = real_op_norm(&(&assembled.delta_half - &closed.delta_half)) / scale(&closed.delta_half);

    let row = |name: &str, dev: f64, tol: f64| BoundReport::residual(name, d, "", dev, tol);
    Ok(vec![
        row("modular_s_eq_j_delta_half", s_polar, MODULAR_TOL),
        row("modular_j_squared", j_sq, MODULAR_TOL),
        row("modular_j_delta_j", jdj, MODULAR_TOL),
        row("modular_delta_omega", delta_omega, MODULAR_TOL),
        row("modular_j_omega", j_omega, MODULAR_TOL),
        row("modular_s_assembled_vs_closed", s_routes, ASSEMBLY_TOL),
        row("modular_j_assembled_vs_closed", j_routes, ASSEMBLY_TOL),
        row("modular_delta_half_assembled_vs_closed", dh_routes, ASSEMBLY_TOL),
    ])
}

/// `π(Q)X = QX` on the HS space, as a `d² × d²` matrix.
pub fn left_multiplier(q: &ComplexMatrix) -> ComplexMatrix {
    matrix::kron(&matrix::identity(q.nrows()), q)
}

/// `JQJ X = X Q*` on the HS space.
pub fn conjugated_multiplier(q: &ComplexMatrix) -> ComplexMatrix {
    matrix::kron(&q.map(|z| z.conj()), &matrix::identity(q.nrows()))
}

/// Schatten norm of `π(Q)` in the represented algebra (equals `d^{1/s}‖Q‖_s`).
pub fn represented_norm(q: &ComplexMatrix, s: SchattenIndex) -> f64 {
    let sv = matrix::singular_values(&left_multiplier(q)).unwrap_or_default();
    norm_from_singular_values(&sv, s)
}

/// `|‖π(Q)‖_s − ‖JQJ‖_s|` as a residual report.
pub fn check_jqj_symmetry(q: &ComplexMatrix, s: SchattenIndex) -> BoundReport {
    let a = represented_norm(q, s);
    let sv = matrix::singular_values(&conjugated_multiplier(q)).unwrap_or_default();
    let b = norm_from_singular_values(&sv, s);
    BoundReport::residual("jqj_norm_symmetry", q.nrows(), format!("s={s}"), (a - b).abs() / a.max(1.0), MODULAR_TOL)
}
