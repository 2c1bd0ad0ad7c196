//! Randomized instance generators for every verification suite. Each function
//! draws one instance from the supplied generator and returns its report rows.

use std::f64::consts::E;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::expansional::{self, OperatorPath, SeriesBudget, Side};
use crate::exponentiable::{self as ex, ClosedFormName, ClosedFormParams, ExponentiabilityCertificate, Lambda, StepFunction};
use crate::matrix::{self, c, from_real_diag, op_norm, ComplexMatrix};
use crate::modular::{self, build_gns, BetaConvention};
use crate::perturbation::{self as pt, MultiTimeConfig, TrBound};
use crate::random::{
    random_density, random_ginibre, random_hermitian_with_norm, random_positive_definite, random_psd, random_unitary,
};
use crate::report::BoundReport;
use crate::schatten::{self, schatten_norm, SchattenIndex};

/// Rows of one instance: checked rows, rows reported but not asserted, and
/// exponentiability certificates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutput {
    pub rows: Vec<BoundReport>,
    pub diagnostics: Vec<BoundReport>,
    pub certificates: Vec<NamedCertificate>,
}

impl InstanceOutput {
    pub fn rows(rows: Vec<BoundReport>) -> Self {
        InstanceOutput { rows, ..Default::default() }
    }

    pub fn extend(&mut self, other: InstanceOutput) {
        self.rows.extend(other.rows);
        self.diagnostics.extend(other.diagnostics);
        self.certificates.extend(other.certificates);
    }
}

/// A certificate together with the verdict the suite expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCertificate {
    pub name: String,
    pub expected: ex::Verdict,
    pub certificate: ExponentiabilityCertificate,
}

fn index_from_reciprocal(r: f64) -> SchattenIndex {
    if r <= 0.0 {
        SchattenIndex::Infinity
    } else {
        SchattenIndex::Finite(1.0 / r)
    }
}

/// Ginibre matrix with a random overall scale, or a low-rank positive matrix.
pub fn random_operand<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let scale = 10f64.powf(rng.random_range(-1.0..1.0));
    if rng.random_bool(0.2) {
        let rank = rng.random_range(1..=dim);
        random_psd(rng, dim, rank).scale(scale)
    } else {
        random_ginibre(rng, dim).scale(scale)
    }
}

fn hermitian_with_norm_in<R: Rng + ?Sized>(rng: &mut R, dim: usize, range: impl rand::distr::uniform::SampleRange<f64>) -> ComplexMatrix {
    let norm = rng.random_range(range);
    random_hermitian_with_norm(rng, dim, norm)
}

fn random_index<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64, p_inf: f64) -> SchattenIndex {
    if rng.random_bool(p_inf) {
        SchattenIndex::Infinity
    } else {
        SchattenIndex::Finite(rng.random_range(lo..hi))
    }
}

pub fn holder_instance<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<BoundReport> {
    let k = rng.random_range(2..=4);
    let mut recips: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    if rng.random_bool(0.2) {
        let j = rng.random_range(0..k);
        recips[j] = 0.0;
    }
    let total: f64 = recips.iter().sum();
    let indices: Vec<SchattenIndex> = recips.iter().map(|r| index_from_reciprocal(r / total)).collect();
    let mats: Vec<ComplexMatrix> = (0..k).map(|_| random_operand(rng, dim)).collect();
    schatten::check_holder(&mats, &indices)
}

pub fn three_term_instance<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<BoundReport> {
    let (mut a, mut b): (f64, f64) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
    if a + b > 1.0 {
        a = 1.0 - a;
        b = 1.0 - b;
    }
    if rng.random_bool(0.15) {
        a = 0.0;
    }
    if a + b == 0.0 {
        b = 0.5;
    }
    let x = random_operand(rng, dim);
    let y = random_operand(rng, dim);
    schatten::check_three_term_holder(&x, &y, index_from_reciprocal(a), index_from_reciprocal(b), index_from_reciprocal(a + b))
}

pub fn minkowski_instance<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<BoundReport> {
    let p = random_index(rng, 1.0, 8.0, 0.15);
    let x = random_operand(rng, dim);
    let y = if rng.random_bool(0.2) { x.scale(rng.random_range(0.1..3.0)) } else { random_operand(rng, dim) };
    schatten::check_minkowski(&x, &y, p)
}

pub fn interpolation_instance<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<BoundReport> {
    let p: f64 = rng.random_range(1.0..4.0);
    let r = p + rng.random_range(0.05..4.0);
    let q = if rng.random_bool(0.25) { SchattenIndex::Infinity } else { SchattenIndex::Finite(r + rng.random_range(0.05..4.0)) };
    let a = random_operand(rng, dim);
    schatten::check_interpolation(&a, SchattenIndex::Finite(p), SchattenIndex::Finite(r), q)
}

pub fn growth_instance<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<BoundReport> {
    let a = random_operand(rng, dim);
    schatten::check_growth_law(&a, rng.random_range(1..=24))
}

/// The Schatten indices sampled by the duality checks.
pub const DUALITY_INDICES: [f64; 5] = [1.0, 1.5, 2.0, 3.0, f64::INFINITY];

/// Attainment `τ(AB) = ‖A‖_p` by the dual witness, `‖B‖_q ≤ 1`, and
/// `max_k |τ(AB_k)| ≤ ‖A‖_p` over random `B_k` in the unit ball of `L_q`.
pub fn duality_instance<R: Rng + ?Sized>(rng: &mut R, dim: usize, p: SchattenIndex, probes: usize) -> Result<Vec<BoundReport>> {
    let a = random_operand(rng, dim);
    let q = p.conjugate();
    let norm = schatten_norm(&a, p);
    let (b, attained) = schatten::dual_witness(&a, p)?;
    let idx = format!("p={p}");
    let mut best: f64 = 0.0;
    let at = a.transpose();
    for _ in 0..probes {
        let g = random_operand(rng, dim);
        let radius: f64 = rng.random_range(0.0..=1.0);
        let probe = g.scale(radius / schatten_norm(&g, q));
        // τ(AB) = Σ_ij A_ij B_ji
        let t: Complex64 = at.iter().zip(probe.iter()).map(|(x, y)| x * y).sum();
        best = best.max(t.norm());
    }
    Ok(vec![
        BoundReport::residual("duality_attained", dim, idx.clone(), (attained - norm).abs() / norm.max(1.0), 1e-9),
        BoundReport::new("duality_witness_ball", dim, idx.clone(), schatten_norm(&b, q), 1.0 + 1e-12),
        BoundReport::new("duality_probes", dim, idx, best, norm),
    ])
}

pub fn modular_instance<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<Vec<BoundReport>> {
    let ctx = build_gns(&random_density(rng, dim))?;
    let mut rows = modular::modular_invariants(&ctx)?;
    let q = random_ginibre(rng, dim);
    rows.push(modular::check_jqj_symmetry(&q, SchattenIndex::Finite(rng.random_range(1.0..6.0))));
    Ok(rows)
}

/// `triples` KMS boundary checks of one random state under both conventions.
pub fn kms_instance<R: Rng + ?Sized>(rng: &mut R, dim: usize, triples: usize, seed: u64) -> Result<Vec<BoundReport>> {
    let ctx = build_gns(&random_density(rng, dim))?;
    let mut rows = modular::kms_check(&ctx, triples, seed);
    let reversed = ctx.with_beta_convention(BetaConvention::Reversed);
    rows.extend(modular::kms_check(&reversed, triples, seed));
    Ok(rows)
}

pub fn expansional_instance<R: Rng + ?Sized>(rng: &mut R, dim: usize, budget: &SeriesBudget) -> Result<InstanceOutput> {
    let a = hermitian_with_norm_in(rng, dim, 0.1..1.0);
    let b = hermitian_with_norm_in(rng, dim, 0.1..2.0);
    let t = rng.random_range(0.05..=1.0);
    let mut out = InstanceOutput::default();
    out.rows.push(expansional::interchange_identity(&a, &b, t, budget)?);
    out.diagnostics.push(expansional::interchange_left_variant(&a, &b, t, budget)?);

    let a0 = random_ginibre(rng, dim).scale(0.5);
    let a1 = random_ginibre(rng, dim).scale(0.5);
    let (t1, t2) = (rng.random_range(0.1..0.6), rng.random_range(0.1..0.4));
    let path = OperatorPath::affine(a0, a1, t1 + t2);
    out.rows.extend(expansional::check_cocycle_properties(&path, t1, t2, budget)?);
    out.rows.extend(expansional::check_term_domination(&path, t1 + t2, Side::Right, budget)?);
    out.rows.push(expansional::check_derivative_law(&path, t1, 1e-3, budget)?);

    let ctx = build_gns(&random_density(rng, dim))?;
    let q = hermitian_with_norm_in(rng, dim, 0.1..1.0);
    let x = random_ginibre(rng, dim);
    let x = x.scale(1.0 / op_norm(&x));
    let (s1, s2) = (rng.random_range(0.05..1.0), rng.random_range(0.05..1.0));
    out.rows.extend(expansional::check_relative_cocycle(&ctx, &q, &x, s1, s2, budget)?);
    out.diagnostics.extend(expansional::relative_cocycle_variants(&ctx, &q, &x, s1, budget)?);
    Ok(out)
}

fn example1_closed(lambda: f64) -> f64 {
    let x = lambda.exp();
    2.0 * x.exp_m1() * lambda.exp_m1() / x
}

/// `Σ_{n≤orders} λ^n/n! Σ_{m≤levels} m^n μ_m` summed with plain loops, the
/// inner sums in increasing `m`.
pub fn double_sum_reference(mu: impl Fn(usize) -> f64, lambda: f64, orders: usize, levels: usize) -> f64 {
    let mut total = 0.0;
    let mut coeff = 1.0;
    for n in 1..=orders {
        coeff *= lambda / n as f64;
        let inner: f64 = (1..=levels).map(|m| (m as f64).powi(n as i32) * mu(m)).sum();
        total += coeff * inner;
    }
    total
}

fn verdict_row(name: &str, indices: &str, ok: bool) -> BoundReport {
    BoundReport::residual(name, 1, indices, if ok { 0.0 } else { 1.0 }, 0.0)
}

/// Reference values of the worked examples; independent of dimension and seed.
pub fn exponentiable_reference(budget: &SeriesBudget) -> Result<InstanceOutput> {
    let mut out = InstanceOutput::default();
    let e1 = StepFunction::example1();
    let e2 = StepFunction::example2();
    let mut cert = |name: String, expected: ex::Verdict, certificate: ExponentiabilityCertificate| {
        out.certificates.push(NamedCertificate { name, expected, certificate });
    };

    let mut rows = Vec::new();
    for lambda in [0.5, 1.0, 2.0] {
        let c1 = ex::exponentiable_series(&e1, 1.0, Lambda::Finite(lambda), budget)?;
        let closed = example1_closed(lambda);
        let dev = c1.value.map(|v| (v - closed).abs() / closed).unwrap_or(f64::INFINITY);
        rows.push(BoundReport::residual("example1_closed_form", 1, format!("p=1;lambda={lambda}"), dev, 1e-9));
        cert(format!("example1;lambda={lambda}"), ex::Verdict::Converges, c1);
    }
    let c_inf = ex::exponentiable_series(&e1, 1.0, Lambda::Infinite, budget)?;
    rows.push(verdict_row("example1_every_lambda", "p=1;lambda=inf", c_inf.converges()));
    cert("example1;lambda=inf".into(), ex::Verdict::Converges, c_inf);

    let mu2 = |m: usize| {
        let r = 1.0 / (2.0 * E);
        2.0 * (r.powi(m as i32) - r.powi(m as i32 + 1))
    };
    let c2 = ex::exponentiable_series(&e2, 1.0, Lambda::Finite(1.0), budget)?;
    let oracle = double_sum_reference(mu2, 1.0, 120, 80);
    let v2 = c2.value.unwrap_or(f64::INFINITY);
    rows.push(BoundReport::residual("example2_oracle", 1, "p=1;lambda=1", (v2 - oracle).abs(), 1e-10));
    out.diagnostics.push(BoundReport::residual("example2_alternate_constant", 1, "p=1;lambda=1", (v2 - (E - 1.0)).abs(), 1e-10));
    cert("example2;lambda=1".into(), ex::Verdict::Converges, c2);

    let doubled = e2.scaled(2.0)?;
    let cd = ex::exponentiable_series(&doubled, 1.0, Lambda::Finite(1.0), budget)?;
    let witness = cd.divergence_witness;
    rows.push(verdict_row("example2_doubled_diverges", "p=1;lambda=1", cd.diverges()));
    rows.push(BoundReport::new("example2_doubled_witness_ratio", 1, "p=1", 1.0, witness.map(|w| w.ratio).unwrap_or(0.0)));
    rows.push(BoundReport::residual(
        "example2_doubled_witness_value",
        1,
        "p=1",
        witness.map(|w| (w.ratio - E / 2.0).abs()).unwrap_or(f64::INFINITY),
        1e-12,
    ));
    rows.push(verdict_row("example2_doubled_witness_reproducible", "p=1", witness.is_some_and(|w| ex::verify_witness(&doubled, 1.0, &w))));
    cert("example2_doubled;lambda=1".into(), ex::Verdict::Diverges, cd);
    let c2_inf = ex::exponentiable_series(&e2, 1.0, Lambda::Infinite, budget)?;
    rows.push(verdict_row("example2_not_every_lambda", "p=1;lambda=inf", c2_inf.diverges()));
    cert("example2;lambda=inf".into(), ex::Verdict::Diverges, c2_inf);

    let net = StepFunction::projection_net(1.0)?;
    let cn = ex::exponentiable_series(&net, 1.0, Lambda::Finite(1.0), budget)?;
    rows.push(BoundReport::new("projection_net_bound", 1, "p=1", cn.value.unwrap_or(f64::INFINITY), 1.0));
    cert("projection_net;p=1".into(), ex::Verdict::Converges, cn);

    rows.push(ex::scaling_law_check(&e1, 2.0, 1.0, budget)?);
    rows.push(ex::scaling_law_check(&e2, 2.0, 1.0, budget)?);
    let probe = ex::convexity_probe(&e2, &e1.scaled(0.5)?, 0.5, 1.0, budget, ex::DEFAULT_REFINEMENT_CAP)?;
    rows.push(probe.bound);
    cert("convex_combination;theta=0.5".into(), ex::Verdict::Converges, probe.certificate);

    // nested classes: smaller λ, smaller value
    let lower = ex::exponentiable_series(&e1, 1.0, Lambda::Finite(0.5), budget)?;
    let upper = ex::exponentiable_series(&e1, 1.0, Lambda::Finite(1.0), budget)?;
    rows.push(BoundReport::new(
        "nested_classes",
        1,
        "lambda=0.5<1",
        lower.value.unwrap_or(f64::INFINITY),
        upper.value.unwrap_or(0.0),
    ));

    // membership at p = 1 and q = 3 of the cube-root profile gives membership at r = 2
    let root3 = StepFunction::closed_form(ClosedFormName::Example1, ClosedFormParams { scale: 1.0, root: 3.0 })?;
    let wide = SeriesBudget::new(budget.max_order.max(60), budget.tolerance);
    for p in [1.0, 3.0, 2.0] {
        let cp = ex::exponentiable_series(&root3, p, Lambda::Finite(1.0), &wide)?;
        rows.push(verdict_row("membership_interpolation", &format!("p={p}"), cp.converges()));
        cert(format!("example1_cube_root;p={p}"), ex::Verdict::Converges, cp);
    }

    let lp = ex::lp_norm_step(&e1, 1.0)?;
    rows.push(BoundReport::residual("example1_l1_norm", 1, "p=1", (lp - 2.0 * (E - 1.0)).abs() / lp, 1e-11));
    let prof = ex::measurability_profile(&e1, &[0.0, 2.5, 10.0])?;
    rows.push(BoundReport::residual("example1_tail_measure", 1, "lambda=2.5", (prof[1].1 - 1.0 / 3.0).abs(), 1e-15));
    rows.push(BoundReport::residual("example1_total_measure", 1, "lambda=0", (prof[0].1 - 2.0).abs(), 1e-15));
    let residuals: Vec<f64> = [5.0, 10.0, 15.0].iter().map(|&c| ex::density_approximation(&e1, 1.0, c).map(|r| r.1)).collect::<Result<_>>()?;
    for (i, w) in residuals.windows(2).enumerate() {
        rows.push(BoundReport::new("density_residual_decrease", 1, format!("cut_index={i}"), w[1], w[0] * (1.0 - 1e-12)));
    }
    out.rows.extend(rows);
    Ok(out)
}

/// Matrix series of a random matrix: value against a direct sum over singular
/// values, and the growth envelope `‖A‖ ≤ τ(|A|^n)^{1/n} ≤ d^{1/n}‖A‖`.
pub fn exponentiable_matrix_instance<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<Vec<BoundReport>> {
    let a = random_ginibre(rng, dim).scale(rng.random_range(0.2..2.0));
    let p = [1.0, 2.0, 3.5][rng.random_range(0..3)];
    let lambda = rng.random_range(0.1..2.0);
    let m = ex::exponentiable_matrix(&a, 1.0, p, lambda)?;
    let s = matrix::singular_values(&a)?;
    let top = s.iter().cloned().fold(0.0, f64::max);
    let mut direct = 0.0;
    for n in 1..=400 {
        let nf = n as f64;
        // ln τ(|A|^{np}) = np·ln s_max + ln Σ (s/s_max)^{np}
        let ln_tr = nf * p * top.ln() + s.iter().map(|x| (x / top).powf(nf * p)).sum::<f64>().ln();
        direct += (nf * lambda.ln() - ex::ln_factorial(n) + ln_tr / p).exp();
    }
    let value = m.certificate.value.unwrap_or(f64::INFINITY);
    let idx = format!("p={p};lambda={lambda:.6}");
    let mut rows = vec![BoundReport::residual("matrix_series_value", dim, idx, (value - direct).abs() / direct.max(1.0), 1e-12)];
    for &(n, g) in m.growth.iter().filter(|(n, _)| n.is_power_of_two()) {
        let top = m.operator_norm;
        rows.push(BoundReport::new("matrix_growth_lower", dim, format!("n={n}"), top, g * (1.0 + 1e-12)));
        rows.push(BoundReport::new("matrix_growth_upper", dim, format!("n={n}"), g, top * (dim as f64).powf(1.0 / n as f64) * (1.0 + 1e-12)));
    }
    Ok(rows)
}

/// Series against the closed form at order 12, per-order domination for
/// `q ∈ {∞, 2, 1}`, the state-level checks, and the complex-depth identity.
pub fn perturbation_instance<R: Rng + ?Sized>(rng: &mut R, dim: usize, budget: &SeriesBudget, seed: u64) -> Result<Vec<BoundReport>> {
    let ctx = build_gns(&random_density(rng, dim))?;
    let q = hermitian_with_norm_in(rng, dim, 0.1..=1.0);
    let mut rows = vec![pt::check_perturbed_vector(&ctx, &q, &SeriesBudget::fixed(12), 1e-6)?];
    let (_, trace) = pt::perturbed_kms_vector(&ctx, &q, budget)?;
    for qi in [SchattenIndex::Infinity, SchattenIndex::Finite(2.0), SchattenIndex::Finite(1.0)] {
        rows.extend(pt::check_cr1_domination(&trace, &q, qi));
    }
    rows.extend(pt::perturbed_state_kms_check(&ctx, &q, budget, 10, seed)?);
    let z = c(rng.random_range(0.05..0.45), rng.random_range(-1.0..1.0));
    rows.push(pt::analytic_exponential_identity(&ctx, &q, z, budget)?);
    let pos = random_positive_definite(rng, dim);
    let n = rng.random_range(2..=4);
    let zs: Vec<f64> = (0..=8).map(|k| 1.0 + (n as f64 - 2.0) * k as f64 / 8.0).collect();
    rows.extend(pt::check_cr1_interpolation(&pos, n, [1.0, 2.0][rng.random_range(0..2)], &zs)?);
    Ok(rows)
}

/// TR0 and TR1 over sampled points of the closed tube, and one analyticity probe.
pub fn tr_instance<R: Rng + ?Sized>(rng: &mut R, dim: usize, n: usize, samples: usize, seed: u64) -> Result<Vec<BoundReport>> {
    let ctx = build_gns(&random_density(rng, dim))?;
    let qs: Vec<ComplexMatrix> = (0..n).map(|_| random_ginibre(rng, dim).scale(rng.random_range(0.2..2.0))).collect();
    let q = [SchattenIndex::Infinity, SchattenIndex::Finite(2.0), SchattenIndex::Finite(1.0)][rng.random_range(0..3)];
    let z: Vec<Complex64> = (0..n).map(|_| c(rng.random_range(-1.0..1.0), -0.05 * rng.random_range(0.1..1.0))).collect();
    let cfg = MultiTimeConfig::new(ctx, qs, z, q);
    let mut rows = pt::check_tr_bounds(&cfg, TrBound::Tr0, samples, seed)?;
    rows.extend(pt::check_tr_bounds(&cfg, TrBound::Tr1, samples, seed)?);
    let coordinate = rng.random_range(0..n);
    let tri = [
        c(rng.random_range(-1.0..1.0), -rng.random_range(0.05..0.3)),
        c(rng.random_range(-1.0..1.0), -rng.random_range(0.05..0.3)),
        c(rng.random_range(-1.0..1.0), -rng.random_range(0.05..0.3)),
    ];
    rows.push(pt::morera_analyticity_probe(&cfg, coordinate, tri, seed)?);
    Ok(rows)
}

const SPREAD: [f64; 6] = [0.05, -0.2, 0.5, -0.9, 0.12, -0.35];
/// Spectral cuts used by the stability checks.
pub const STABILITY_CUTS: [f64; 4] = [0.1, 0.3, 0.6, 1.0];

/// `‖Φ(Q_k) − Φ(Q)‖` over spectral cuts of a `Q` with a spread spectrum.
pub fn stability_instance<R: Rng + ?Sized>(rng: &mut R, dim: usize, budget: &SeriesBudget) -> Result<Vec<BoundReport>> {
    let ctx = build_gns(&random_density(rng, dim))?;
    let u = random_unitary(rng, dim);
    let spectrum: Vec<f64> = (0..dim).map(|i| SPREAD[i % SPREAD.len()] * (1.0 - 0.01 * (i / SPREAD.len()) as f64)).collect();
    let q = &u * from_real_diag(&spectrum) * u.adjoint();
    let q = (&q + q.adjoint()).scale(0.5);
    let rows = pt::approximation_stability(&ctx, &q, &STABILITY_CUTS, budget)?;
    Ok(pt::check_stability(&rows, dim, 1e-8))
}
