//! Multiple-time modular vectors, their norm bounds, and the perturbed KMS
//! vector as an ordered-simplex series.
//!
//! All computations take place in the eigenbasis of ρ, where Δ acts on the
//! matrix unit `|a⟩⟨b|` by `p_a / p_b` and the perturbation acts as the left
//! multiplier `π(Q)X = QX`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansional::{exp_tail, RemainderPolicy, SeriesBudget};
use crate::matrix::{self, c, frobenius, op_norm, ComplexMatrix, MatrixFn};
use crate::modular::{self, GnsContext};
use crate::quadrature::GaussRule;
use crate::random::{random_ginibre, shard_rng};
use crate::report::BoundReport;
use crate::schatten::{norm_p, SchattenIndex};
use crate::simplex::divided_difference_exp;

/// Tolerance for the norm bounds of multiple-time vectors.
pub const TR_TOL: f64 = 1e-9;

/// The ordered simplex `S^n_α = {t : t_i < 0, −α < Σ t_i < 0}` and its tube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexDomain {
    pub n: usize,
    pub alpha: f64,
}

impl SimplexDomain {
    pub fn new(n: usize) -> Self {
        SimplexDomain { n, alpha: 0.5 }
    }

    /// Membership of the closure: `t_i ≤ 0` and `Σ t_i ≥ −α`.
    pub fn contains_closure(&self, t: &[f64]) -> bool {
        t.len() == self.n && t.iter().all(|&x| x <= 0.0) && t.iter().sum::<f64>() >= -self.alpha - 1e-15
    }

    pub fn contains_interior(&self, t: &[f64]) -> bool {
        t.len() == self.n && t.iter().all(|&x| x < 0.0) && t.iter().sum::<f64>() > -self.alpha
    }

    /// Tube membership through the imaginary parts.
    pub fn tube_contains(&self, z: &[Complex64], interior: bool) -> bool {
        let im: Vec<f64> = z.iter().map(|w| w.im).collect();
        if interior {
            self.contains_interior(&im)
        } else {
            self.contains_closure(&im)
        }
    }
}

/// Data for `A^n(z_1..z_n)Φ = Δ^{iz_n} Q_n ⋯ Δ^{iz_1} Q_1 Φ`.
#[derive(Debug, Clone)]
pub struct MultiTimeConfig {
    pub ctx: GnsContext,
    pub q_list: Vec<ComplexMatrix>,
    pub z_list: Vec<Complex64>,
    pub p: SchattenIndex,
    pub q: SchattenIndex,
}

impl MultiTimeConfig {
    pub fn new(ctx: GnsContext, q_list: Vec<ComplexMatrix>, z_list: Vec<Complex64>, q: SchattenIndex) -> Self {
        MultiTimeConfig { ctx, q_list, z_list, p: q.conjugate(), q }
    }

    pub fn order(&self) -> usize {
        self.q_list.len()
    }

    fn validate(&self) -> Result<()> {
        if self.q_list.len() != self.z_list.len() {
            return Err(Error::DimensionMismatch { expected: self.q_list.len(), found: self.z_list.len() });
        }
        for q in &self.q_list {
            matrix::validate(q)?;
            if q.nrows() != self.ctx.dim {
                return Err(Error::DimensionMismatch { expected: self.ctx.dim, found: q.nrows() });
            }
        }
        Ok(())
    }
}

fn check_strip(z: &[Complex64]) -> Result<()> {
    for w in z {
        if !(w.im >= -0.5 && w.im <= 0.0) {
            return Err(Error::DomainViolation(format!("Im z = {} outside [-1/2, 0]", w.im)));
        }
    }
    Ok(())
}

fn multi_time_eigenbasis(ctx: &GnsContext, q_tilde: &[ComplexMatrix], z: &[Complex64]) -> ComplexMatrix {
    let d = ctx.dim;
    let l = ctx.log_spectrum();
    let p = ctx.spectrum();
    let mut x = ComplexMatrix::from_fn(d, d, |a, b| if a == b { c(p[a].sqrt(), 0.0) } else { c(0.0, 0.0) });
    for (q, &w) in q_tilde.iter().zip(z) {
        let y = q * &x;
        let iw = c(0.0, 1.0) * w;
        x = ComplexMatrix::from_fn(d, d, |a, b| y[(a, b)] * (iw * (l[a] - l[b])).exp());
    }
    x
}

/// Evaluates `Δ^{iz_n} Q_n ⋯ Δ^{iz_1} Q_1 Φ` on the eigen-grid of Δ.
pub fn multi_time_vector(cfg: &MultiTimeConfig) -> Result<ComplexMatrix> {
    cfg.validate()?;
    check_strip(&cfg.z_list)?;
    let q_tilde: Vec<ComplexMatrix> = cfg.q_list.iter().map(|q| cfg.ctx.to_eigenbasis(q)).collect();
    Ok(cfg.ctx.from_eigenbasis(&multi_time_eigenbasis(&cfg.ctx, &q_tilde, &cfg.z_list)))
}

/// Naive evaluation with explicit `d² × d²` superoperators, for cross-checks.
pub fn multi_time_vector_naive(cfg: &MultiTimeConfig) -> Result<ComplexMatrix> {
    cfg.validate()?;
    check_strip(&cfg.z_list)?;
    let ctx = &cfg.ctx;
    let d = ctx.dim;
    let mut v = nalgebra::DVector::from_vec(modular::vectorize(&ctx.omega));
    for (q, &w) in cfg.q_list.iter().zip(&cfg.z_list) {
        let iw = c(0.0, 1.0) * w;
        let delta = matrix::kron(&ctx.rho_power(-iw).transpose(), &ctx.rho_power(iw));
        v = delta * (modular::left_multiplier(q) * v);
    }
    Ok(modular::unvectorize(v.as_slice(), d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrBound {
    Tr0,
    Tr1,
}

/// `‖H‖_p^{1/2} Π ‖π(Q_i)‖_{2nq}` with `H` the rank-one projector onto `Φ`.
fn tr0_rhs(cfg: &MultiTimeConfig) -> f64 {
    let n = cfg.order() as f64;
    let s = 2.0 * n * cfg.q.value();
    cfg.q_list.iter().map(|q| modular::represented_norm(q, SchattenIndex::Finite(s).min_inf())).product()
}

/// `max_l Π_{j≤l} ‖π(Q_j)‖_{4lq} Π_{j>l} ‖π(Q_j)‖_{4(n−l)q}`.
fn tr1_rhs(cfg: &MultiTimeConfig) -> f64 {
    let n = cfg.order();
    let qv = cfg.q.value();
    (0..n)
        .map(|l| {
            cfg.q_list
                .iter()
                .enumerate()
                .map(|(j, q)| {
                    let s = if j < l { 4.0 * l as f64 * qv } else { 4.0 * (n - l) as f64 * qv };
                    modular::represented_norm(q, SchattenIndex::Finite(s).min_inf())
                })
                .product::<f64>()
        })
        .fold(0.0, f64::max)
}

trait MinInf {
    fn min_inf(self) -> SchattenIndex;
}

impl MinInf for SchattenIndex {
    fn min_inf(self) -> SchattenIndex {
        match self {
            SchattenIndex::Finite(s) if s.is_infinite() => SchattenIndex::Infinity,
            other => other,
        }
    }
}

/// Sample points of the closed tube over `S^n_{1/2}`: the `n + 1` extremal
/// imaginary patterns (all zero, or a single coordinate at −1/2) with random
/// real parts, followed by random interior points, `total` in all.
pub fn tube_samples<R: Rng + ?Sized>(rng: &mut R, n: usize, total: usize) -> Vec<Vec<Complex64>> {
    let mut out = Vec::with_capacity(total);
    let mut pattern = 0;
    while out.len() < total && pattern <= n {
        let z = (0..n)
            .map(|j| c(rng.random_range(-3.0..3.0), if pattern > 0 && j == pattern - 1 { -0.5 } else { 0.0 }))
            .collect();
        out.push(z);
        pattern += 1;
    }
    while out.len() < total {
        // uniform on the simplex via normalized exponentials, scaled into depth 1/2
        let e: Vec<f64> = (0..=n).map(|_| -rng.random_range(f64::MIN_POSITIVE..1.0).ln()).collect();
        let sum: f64 = e.iter().sum();
        let z = (0..n).map(|j| c(rng.random_range(-3.0..3.0), -0.5 * e[j] / sum)).collect();
        out.push(z);
    }
    out
}

/// Bound checks for the multiple-time vector over sampled points of the closed
/// tube. For TR0 the hypothesis `‖JQ_iJ‖ = ‖Q_i‖` is verified first and a second
/// right-hand side `‖H^{1/2}‖_{2p} Π ‖π(Q_i)‖_{2nq}` is reported alongside.
pub fn check_tr_bounds(cfg: &MultiTimeConfig, which: TrBound, samples: usize, seed: u64) -> Result<Vec<BoundReport>> {
    cfg.validate()?;
    let n = cfg.order();
    let d = cfg.ctx.dim;
    if which == TrBound::Tr0 {
        let s = SchattenIndex::Finite(2.0 * n as f64 * cfg.q.value()).min_inf();
        for q in &cfg.q_list {
            let r = modular::check_jqj_symmetry(q, s);
            if r.lhs > r.rhs {
                return Err(Error::HypothesisViolated(format!("‖JQJ‖ differs from ‖Q‖ by {}", r.lhs)));
            }
        }
    }
    let rhs = match which {
        TrBound::Tr0 => tr0_rhs(cfg),
        TrBound::Tr1 => tr1_rhs(cfg),
    };
    // H is the projector onto the unit vector Φ: ‖H‖_p = ‖H^{1/2}‖_{2p}^2 = 1
    let h_p: f64 = 1.0;
    let h_half_2p: f64 = 1.0;
    let q_tilde: Vec<ComplexMatrix> = cfg.q_list.iter().map(|q| cfg.ctx.to_eigenbasis(q)).collect();
    let mut rng = shard_rng(seed, "tr_samples", n as u64);
    let points = tube_samples(&mut rng, n, samples);
    let name = match which {
        TrBound::Tr0 => "tr0",
        TrBound::Tr1 => "tr1",
    };
    let mut rows = Vec::with_capacity(points.len() * 2);
    for (k, z) in points.iter().enumerate() {
        let lhs = frobenius(&multi_time_eigenbasis(&cfg.ctx, &q_tilde, z));
        let idx = format!("n={n};q={};point={k}", cfg.q);
        rows.push(BoundReport::new(name, d, idx.clone(), lhs, h_p.sqrt() * rhs).with_seed(seed));
        if which == TrBound::Tr0 {
            rows.push(BoundReport::new("tr0_alt", d, idx, lhs, h_half_2p * rhs).with_seed(seed));
        }
    }
    Ok(rows)
}

/// Contour integral of `w ↦ ⟨ξ, A^n(z)Φ⟩` around a triangle in the `coordinate`-th
/// variable, other variables fixed at `cfg.z_list`. `lhs = |∮|` and
/// `rhs = 1e−8 · perimeter · max|integrand|`.
pub fn morera_analyticity_probe(
    cfg: &MultiTimeConfig,
    coordinate: usize,
    triangle: [Complex64; 3],
    seed: u64,
) -> Result<BoundReport> {
    cfg.validate()?;
    let n = cfg.order();
    if coordinate >= n {
        return Err(Error::DomainViolation(format!("coordinate {coordinate} out of range for n = {n}")));
    }
    let domain = SimplexDomain::new(n);
    for &v in &triangle {
        let mut z = cfg.z_list.clone();
        z[coordinate] = v;
        if !domain.tube_contains(&z, true) {
            return Err(Error::DomainViolation(format!("vertex {v} is not interior to the tube")));
        }
    }
    let d = cfg.ctx.dim;
    let mut rng = shard_rng(seed, "morera", coordinate as u64);
    let xi = random_ginibre(&mut rng, d);
    let xi = xi.scale(1.0 / frobenius(&xi));
    let q_tilde: Vec<ComplexMatrix> = cfg.q_list.iter().map(|q| cfg.ctx.to_eigenbasis(q)).collect();
    let xi_tilde = cfg.ctx.to_eigenbasis(&xi);
    let integrand = |w: Complex64| {
        let mut z = cfg.z_list.clone();
        z[coordinate] = w;
        matrix::hs_inner(&xi_tilde, &multi_time_eigenbasis(&cfg.ctx, &q_tilde, &z))
    };
    let rule = GaussRule::new(32);
    let mut total = c(0.0, 0.0);
    let mut perimeter = 0.0;
    let mut max_abs: f64 = 0.0;
    for k in 0..3 {
        let (a, b) = (triangle[k], triangle[(k + 1) % 3]);
        let half = (b - a) * 0.5;
        perimeter += (b - a).norm();
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let g = integrand(a + half * (x + 1.0));
            max_abs = max_abs.max(g.norm());
            total += g * half * w;
        }
    }
    Ok(BoundReport::new(
        "morera",
        d,
        format!("n={n};coordinate={coordinate}"),
        total.norm(),
        1e-8 * perimeter * max_abs,
    )
    .with_seed(seed))
}

/// Per-order record of a series evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub order: usize,
    pub term_norm: f64,
    pub partial_norm: f64,
    pub certified_tail: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub rows: Vec<TraceRow>,
}

impl ConvergenceTrace {
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn final_tail(&self) -> f64 {
        self.rows.last().map(|r| r.certified_tail).unwrap_or(f64::INFINITY)
    }
}

/// Terms `X_0..X_order` of `e^{T(K + σ L_Q)} Ω` with `K = log Δ`, in the original
/// basis. The n-th term is `σ^n Σ_paths Π Q̃ · f[ℓ_path − ℓ_b]`, with `f = e^{T·}`
/// and a path of rows starting at column index `b`. Divided differences depend
/// only on the multiset of visited rows, so paths are aggregated by visit counts.
pub fn series_terms(ctx: &GnsContext, q: &ComplexMatrix, t: Complex64, sign: f64, order: usize) -> Vec<ComplexMatrix> {
    let d = ctx.dim;
    let qt = ctx.to_eigenbasis(q);
    let l = ctx.log_spectrum();
    let p = ctx.spectrum();
    let mut dd_cache: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
    let mut dd = |counts: &[u8]| -> Complex64 {
        if let Some(v) = dd_cache.get(counts) {
            return *v;
        }
        let nodes: Vec<f64> = counts.iter().enumerate().flat_map(|(a, &k)| std::iter::repeat_n(l[a], k as usize)).collect();
        let v = divided_difference_exp(&nodes, t);
        dd_cache.insert(counts.to_vec(), v);
        v
    };
    let mut terms = vec![ComplexMatrix::zeros(d, d); order + 1];
    for b in 0..d {
        let shift = (-t * l[b]).exp() * p[b].sqrt();
        let mut start = vec![0u8; d];
        start[b] = 1;
        let mut states: BTreeMap<(Vec<u8>, usize), Complex64> = BTreeMap::new();
        states.insert((start, b), c(1.0, 0.0));
        for (n, term) in terms.iter_mut().enumerate() {
            let s = sign.powi(n as i32);
            for ((counts, row), coef) in &states {
                term[(*row, b)] += coef * dd(counts) * shift * s;
            }
            if n == order {
                break;
            }
            let mut next: BTreeMap<(Vec<u8>, usize), Complex64> = BTreeMap::new();
            for ((counts, row), coef) in &states {
                for j in 0..d {
                    let w = qt[(j, *row)];
                    if w == c(0.0, 0.0) {
                        continue;
                    }
                    let mut k = counts.clone();
                    k[j] += 1;
                    *next.entry((k, j)).or_insert(c(0.0, 0.0)) += coef * w;
                }
            }
            states = next;
        }
    }
    terms.iter().map(|x| ctx.from_eigenbasis(x)).collect()
}

/// `κ^{|Re T|} (|T| ‖Q‖)^n / n!` summed over `n > order`, `κ = p_max / p_min`.
pub fn certified_series_tail(ctx: &GnsContext, q_norm: f64, t: Complex64, order: usize) -> f64 {
    let p = ctx.spectrum();
    let kappa = p[p.len() - 1] / p[0];
    kappa.powf(t.re.abs()) * exp_tail(t.norm() * q_norm, order)
}

fn choose_series_order(ctx: &GnsContext, q_norm: f64, t: Complex64, budget: &SeriesBudget) -> Result<(usize, f64)> {
    match budget.remainder_policy {
        RemainderPolicy::FixedOrder => Ok((budget.max_order, certified_series_tail(ctx, q_norm, t, budget.max_order))),
        RemainderPolicy::CertifiedTail => {
            for n in 0..=budget.max_order {
                let tail = certified_series_tail(ctx, q_norm, t, n);
                if tail <= budget.tolerance {
                    return Ok((n, tail));
                }
            }
            Err(Error::BudgetExhausted {
                order: budget.max_order,
                tail_bound: certified_series_tail(ctx, q_norm, t, budget.max_order),
            })
        }
    }
}

fn summed_series(ctx: &GnsContext, q: &ComplexMatrix, t: Complex64, sign: f64, budget: &SeriesBudget) -> Result<(ComplexMatrix, ConvergenceTrace)> {
    if q.nrows() != ctx.dim {
        return Err(Error::DimensionMismatch { expected: ctx.dim, found: q.nrows() });
    }
    let q_norm = op_norm(q);
    let (order, _) = choose_series_order(ctx, q_norm, t, budget)?;
    let terms = series_terms(ctx, q, t, sign, order);
    let mut sum = ComplexMatrix::zeros(ctx.dim, ctx.dim);
    let mut rows = Vec::with_capacity(terms.len());
    for (n, term) in terms.iter().enumerate() {
        sum += term;
        rows.push(TraceRow {
            order: n,
            term_norm: frobenius(term),
            partial_norm: frobenius(&sum),
            certified_tail: certified_series_tail(ctx, q_norm, t, n),
        });
    }
    Ok((sum, ConvergenceTrace { rows }))
}

/// The perturbed vector `Φ = Σ_n (−1)^n ∫_{S^n} Δ^{t_n}QΔ^{t_{n−1}−t_n}Q⋯Δ^{t_1−t_2}QΩ dt`
/// over the ordered simplex of depth 1/2, i.e. `e^{(log Δ − π(Q))/2} Ω`.
pub fn perturbed_kms_vector(ctx: &GnsContext, q: &ComplexMatrix, budget: &SeriesBudget) -> Result<(ComplexMatrix, ConvergenceTrace)> {
    matrix::check_hermitian(q)?;
    summed_series(ctx, q, c(0.5, 0.0), -1.0, budget)
}

/// Density-side closed form `e^{(log ρ − Q)/2} = e^{−(h+Q)/2}`, `h = −log ρ`.
pub fn perturbed_kms_oracle(ctx: &GnsContext, q: &ComplexMatrix) -> Result<ComplexMatrix> {
    matrix::matrix_function(&(ctx.log_rho() - q), MatrixFn::Exp).and_then(|e| matrix::matrix_function(&e, MatrixFn::Power(0.5)))
}

/// Normalized perturbed density `e^{−(h+Q)}/Z'`.
pub fn perturbed_density(ctx: &GnsContext, q: &ComplexMatrix) -> Result<ComplexMatrix> {
    let e = matrix::matrix_function(&(ctx.log_rho() - q), MatrixFn::Exp)?;
    let z = matrix::trace(&e).re;
    Ok(e.scale(1.0 / z))
}

/// Series value against the closed form.
pub fn check_perturbed_vector(ctx: &GnsContext, q: &ComplexMatrix, budget: &SeriesBudget, tol: f64) -> Result<BoundReport> {
    let (phi, trace) = perturbed_kms_vector(ctx, q, budget)?;
    let oracle = perturbed_kms_oracle(ctx, q)?;
    let order = trace.rows.len().saturating_sub(1);
    Ok(BoundReport::residual(
        "perturbed_vector_oracle",
        ctx.dim,
        format!("order={order}"),
        frobenius(&(phi - oracle)),
        tol,
    ))
}

/// Order-by-order domination
/// `‖X_n‖ ≤ (1/2)^n/n! · max{‖Q‖_{4q}‖Q‖_{4(n−1)q}^{n−1}, ‖Q‖_{4nq}^n} · ‖H‖_p^{1/2}`
/// with norms of `π(Q)` in the represented algebra.
pub fn check_cr1_domination(trace: &ConvergenceTrace, q: &ComplexMatrix, q_index: SchattenIndex) -> Vec<BoundReport> {
    let qv = q_index.value();
    let rn = |s: f64| modular::represented_norm(q, SchattenIndex::Finite(s).min_inf());
    let mut factorial = 1.0;
    trace
        .rows
        .iter()
        .filter(|r| r.order >= 1)
        .map(|r| {
            let n = r.order;
            factorial *= n as f64;
            let first = rn(4.0 * qv) * if n > 1 { rn(4.0 * (n - 1) as f64 * qv).powi(n as i32 - 1) } else { 1.0 };
            let second = rn(4.0 * n as f64 * qv).powi(n as i32);
            let rhs = 0.5f64.powi(n as i32) / factorial * first.max(second);
            BoundReport::new("cr1_domination", q.nrows(), format!("n={n};q={q_index}"), r.term_norm, rhs)
        })
        .collect()
}

/// For positive `Q`: `τ(Q^{4zq})^{1/4q} τ(Q^{4(n−z)q})^{1/4q} ≤ ‖Q‖_{4q}‖Q‖_{4(n−1)q}^{n−1}`
/// at the given real `z ∈ [1, n−1]`.
pub fn check_cr1_interpolation(q: &ComplexMatrix, n: usize, q_index: f64, zs: &[f64]) -> Result<Vec<BoundReport>> {
    let eig = matrix::eig_hermitian(q)?;
    if eig.values[0] < -eig.floor().max(1e-14) {
        return Err(Error::NotPositiveDefinite { eigenvalue: eig.values[0], floor: eig.floor() });
    }
    let tr_pow = |s: f64| eig.values.iter().map(|&v| v.max(0.0).powf(s)).sum::<f64>();
    let rhs = norm_p(q, 4.0 * q_index) * norm_p(q, 4.0 * (n - 1) as f64 * q_index).powi(n as i32 - 1);
    zs.iter()
        .map(|&z| {
            if !(1.0..=(n - 1) as f64).contains(&z) {
                return Err(Error::DomainViolation(format!("z = {z} outside [1, {}]", n - 1)));
            }
            let e = 1.0 / (4.0 * q_index);
            let lhs = tr_pow(4.0 * z * q_index).powf(e) * tr_pow(4.0 * (n as f64 - z) * q_index).powf(e);
            Ok(BoundReport::new("cr1_interpolation", q.nrows(), format!("n={n};q={q_index};z={z}"), lhs, rhs))
        })
        .collect()
}

/// Builds the state of the series vector and checks it against the perturbed
/// density (trace distance) and the KMS boundary identity at β = +1 for the
/// perturbed dynamics `α_t(A) = e^{it(h+Q)} A e^{−it(h+Q)}`.
pub fn perturbed_state_kms_check(
    ctx: &GnsContext,
    q: &ComplexMatrix,
    budget: &SeriesBudget,
    trials: usize,
    seed: u64,
) -> Result<Vec<BoundReport>> {
    let d = ctx.dim;
    let (phi, _) = perturbed_kms_vector(ctx, q, budget)?;
    let gram = &phi * phi.adjoint();
    let sigma = gram.scale(1.0 / matrix::trace(&gram).re);
    let target = perturbed_density(ctx, q)?;
    let distance = 0.5 * norm_p(&(&sigma - &target), 1.0);
    let generator = q - ctx.log_rho();
    let gen_eig = matrix::eig_hermitian(&generator)?;
    let k = gen_eig.values.clone();
    let v = gen_eig.vectors.clone();
    let state = |a: &ComplexMatrix| matrix::trace(&(&sigma * a));
    let dynamics = |a: &ComplexMatrix, z: Complex64| {
        let at = v.adjoint() * a * &v;
        let moved = ComplexMatrix::from_fn(d, d, |i, j| at[(i, j)] * (c(0.0, 1.0) * z * (k[i] - k[j])).exp());
        &v * moved * v.adjoint()
    };
    let mut rows = vec![BoundReport::residual("perturbed_state_trace_distance", d, "", distance, 1e-7).with_seed(seed)];
    for trial in 0..trials {
        let mut rng = shard_rng(seed, "perturbed_kms", trial as u64);
        let a = random_ginibre(&mut rng, d);
        let a = a.scale(1.0 / op_norm(&a));
        let b = random_ginibre(&mut rng, d);
        let b = b.scale(1.0 / op_norm(&b));
        let t = rng.random_range(-2.0..2.0);
        let lhs = state(&(&a * dynamics(&b, c(t, 1.0))));
        let rhs = state(&(dynamics(&b, c(t, 0.0)) * &a));
        rows.push(
            BoundReport::residual("perturbed_kms_boundary", d, format!("beta=1;t={t:.6}"), (lhs - rhs).norm(), 1e-7)
                .with_seed(seed),
        );
    }
    Ok(rows)
}

/// Compares `Σ_n ∫ … ` at complex depth `z` (the expansion of
/// `e^{z(log Δ + π(Q))}Ω`) with the same exponential of the Hermitian
/// superoperator `log Δ + π(Q)` on the `d²`-dimensional GNS space.
pub fn analytic_exponential_identity(ctx: &GnsContext, q: &ComplexMatrix, z: Complex64, budget: &SeriesBudget) -> Result<BoundReport> {
    matrix::check_hermitian(q)?;
    if !(z.re > 0.0 && z.re < 0.5) {
        return Err(Error::DomainViolation(format!("Re z = {} outside (0, 1/2)", z.re)));
    }
    let (series, _) = summed_series(ctx, q, z, 1.0, budget)?;
    let oracle = analytic_exponential_oracle(ctx, q, z)?;
    Ok(BoundReport::residual(
        "analytic_exponential_identity",
        ctx.dim,
        format!("z={}{:+}i", z.re, z.im),
        frobenius(&(series - oracle)),
        1e-6,
    ))
}

/// `e^{z(log Δ + π(Q))} Ω` by exponentiating the superoperator.
pub fn analytic_exponential_oracle(ctx: &GnsContext, q: &ComplexMatrix, z: Complex64) -> Result<ComplexMatrix> {
    let d = ctx.dim;
    let id = matrix::identity(d);
    let log_rho = ctx.log_rho();
    let k = matrix::kron(&id, &log_rho) - matrix::kron(&log_rho.transpose(), &id);
    let gen = k + modular::left_multiplier(q);
    let gen = (&gen + gen.adjoint()).scale(0.5);
    let e = matrix::matrix_function(&gen, MatrixFn::ScaledExp(z))?;
    let v = e * nalgebra::DVector::from_vec(modular::vectorize(&ctx.omega));
    Ok(modular::unvectorize(v.as_slice(), d))
}

/// Drops the eigencomponents of `Q` with `|λ| > cut`.
pub fn spectral_cut(q: &ComplexMatrix, cut: f64) -> Result<(ComplexMatrix, usize)> {
    let eig = matrix::eig_hermitian(q)?;
    let kept = eig.values.iter().filter(|v| v.abs() <= cut).count();
    if kept == eig.dim() {
        return Ok((q.clone(), kept));
    }
    Ok((eig.apply(|v| if v.abs() <= cut { c(v, 0.0) } else { c(0.0, 0.0) }), kept))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub cut: f64,
    pub retained: usize,
    pub difference: f64,
}

/// `‖Φ(Q_k) − Φ(Q)‖` for spectral cuts `Q_k` of `Q` at increasing levels.
pub fn approximation_stability(ctx: &GnsContext, q: &ComplexMatrix, cuts: &[f64], budget: &SeriesBudget) -> Result<Vec<StabilityRow>> {
    if cuts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::DomainViolation("cuts must be strictly increasing".into()));
    }
    let (full, _) = perturbed_kms_vector(ctx, q, budget)?;
    cuts.iter()
        .map(|&cut| {
            let (qk, retained) = spectral_cut(q, cut)?;
            let (phi, _) = perturbed_kms_vector(ctx, &qk, budget)?;
            Ok(StabilityRow { cut, retained, difference: frobenius(&(phi - &full)) })
        })
        .collect()
}

/// Monotonicity of the stability differences, strict where the retained set
/// grows, and the final difference below `final_tol`.
pub fn check_stability(rows: &[StabilityRow], dim: usize, final_tol: f64) -> Vec<BoundReport> {
    let mut out = Vec::new();
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let idx = format!("cut={}->{}", a.cut, b.cut);
        if b.retained > a.retained {
            out.push(BoundReport::new("stability_strict_decrease", dim, idx, b.difference, a.difference));
        } else {
            out.push(BoundReport::new("stability_monotone", dim, idx, b.difference, a.difference + 1e-14));
        }
    }
    if let Some(last) = rows.last() {
        out.push(BoundReport::residual("stability_final", dim, format!("cut={}", last.cut), last.difference, final_tol));
    }
    out
}
