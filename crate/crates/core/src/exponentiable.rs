//! Exponentiable elements of `L_p`: certificates for the series
//! `Σ_{n≥1} λ^n ‖|A|^n‖_p / n!` on matrices and on positive step functions
//! of the commutative algebra `L_∞(ℝ)` with Lebesgue measure.
//!
//! A step function is a level sequence `m ↦ (v_m, μ_m)` with `v_m` strictly
//! increasing. Infinite sequences are summed lazily and stopped once a
//! geometric bound on the remaining levels is below `1e−12` of the partial sum.

use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansional::{exp_tail, RemainderPolicy, SeriesBudget};
use crate::matrix::{self, ComplexMatrix};
use crate::report::BoundReport;
use crate::schatten::{norm_from_singular_values, SchattenIndex};

/// Hard cap on the number of levels visited by one certified sum.
pub const LEVEL_CAP: usize = 100_000;
/// Relative size of the certified tail at which level sums stop.
pub const RELATIVE_TAIL: f64 = 1e-12;
/// Partial-sum threshold recorded by divergence witnesses.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;
/// Default cap on the number of levels in a common refinement.
pub const DEFAULT_REFINEMENT_CAP: usize = 10_000;
const DIVERGENCE_SCAN: usize = 64;
const MERGE_FLOOR: f64 = 1e-300;
const TAIL_CHECK_EVERY: usize = 16;

/// `ln n!`, exact summation below 32 and Stirling's series above.
pub fn ln_factorial(n: usize) -> f64 {
    if n < 32 {
        return (2..=n).map(|k| (k as f64).ln()).sum();
    }
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

/// `ln Σ_{k>n} x^k/k!` without overflow for large `x`.
fn ln_exp_tail(x: f64, n: usize) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if x < 30.0 {
        return exp_tail(x, n).ln();
    }
    // e^{-x} Σ_{k≤n} x^k/k! is a Poisson lower tail
    let lower: f64 = (0..=n).map(|k| (k as f64 * x.ln() - x - ln_factorial(k)).exp()).sum();
    if lower < 0.5 {
        x + (-lower).ln_1p()
    } else {
        exp_tail(x, n).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedFormName {
    /// `μ_m = 2m/(m+1)!`: `f = m` on `1/(m+1)! ≤ |x| < 1/m!`.
    Example1,
    /// `μ_m = 2((2e)^{−m} − (2e)^{−m−1})`: `f = m` on `(2e)^{−m−1} ≤ |x| < (2e)^{−m}`.
    Example2,
    /// `μ_n = τ(P_n) − τ(P_{n+1})` with `τ(P_n) = 1/((e^n − 1)2^n)`.
    ProjectionNet,
}

fn default_one() -> f64 {
    1.0
}

/// `v_m = scale · m^{1/root}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedFormParams {
    #[serde(default = "default_one")]
    pub scale: f64,
    #[serde(default = "default_one")]
    pub root: f64,
}

impl Default for ClosedFormParams {
    fn default() -> Self {
        ClosedFormParams { scale: 1.0, root: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ClosedForm {
    name: ClosedFormName,
    scale: f64,
    root: f64,
}

fn net_trace(n: f64) -> f64 {
    1.0 / (n.exp_m1() * 2f64.powf(n))
}

fn net_ratio(n: f64) -> f64 {
    n.exp_m1() / (2.0 * (n + 1.0).exp_m1())
}

impl ClosedForm {
    fn value(&self, m: usize) -> f64 {
        self.scale * (m as f64).powf(1.0 / self.root)
    }

    fn ln_measure(&self, m: usize) -> f64 {
        let x = m as f64;
        match self.name {
            ClosedFormName::Example1 => LN_2 + x.ln() - ln_factorial(m + 1),
            ClosedFormName::Example2 => LN_2 - x * (1.0 + LN_2) + (-1.0 / (2.0 * E)).ln_1p(),
            ClosedFormName::ProjectionNet => -x.exp_m1().ln() - x * LN_2 + (-net_ratio(x)).ln_1p(),
        }
    }

    fn measure(&self, m: usize) -> f64 {
        let x = m as f64;
        match self.name {
            ClosedFormName::Example1 if m < 170 => 2.0 * x / (2..=m + 1).map(|k| k as f64).product::<f64>(),
            ClosedFormName::Example2 if m < 300 => {
                let r = 1.0 / (2.0 * E);
                2.0 * r.powi(m as i32) * (1.0 - r)
            }
            ClosedFormName::ProjectionNet if m < 300 => net_trace(x) * (1.0 - net_ratio(x)),
            _ => self.ln_measure(m).exp(),
        }
    }

    fn tail_measure(&self, m: usize) -> f64 {
        let x = m as f64;
        match self.name {
            ClosedFormName::Example1 => (LN_2 - ln_factorial(m)).exp(),
            ClosedFormName::Example2 => 2.0 * (-x * (1.0 + LN_2)).exp(),
            ClosedFormName::ProjectionNet => net_trace(x),
        }
    }

    /// `sup_{k≥m} μ_{k+1}/μ_k`.
    fn mu_ratio_upper(&self, m: usize) -> f64 {
        let x = m as f64;
        match self.name {
            ClosedFormName::Example1 => (x + 1.0) / (x * (x + 2.0)),
            ClosedFormName::Example2 => 1.0 / (2.0 * E),
            ClosedFormName::ProjectionNet => 1.0 / (2.0 * E - 1.0),
        }
    }

    /// `inf_{k≥m} μ_{k+1}/μ_k`.
    fn mu_ratio_lower(&self, m: usize) -> f64 {
        match self.name {
            ClosedFormName::Example1 => 0.0,
            ClosedFormName::Example2 => 1.0 / (2.0 * E),
            ClosedFormName::ProjectionNet => net_ratio(m as f64) * (1.0 - 1.0 / (2.0 * E)),
        }
    }

    fn mu_ratio_limit(&self) -> f64 {
        match self.name {
            ClosedFormName::Example1 => 0.0,
            ClosedFormName::Example2 | ClosedFormName::ProjectionNet => 1.0 / (2.0 * E),
        }
    }

    /// `u_m = v_m^s = scale^s m^a`, `a = s/root`; increment `u_{m+1} − u_m`.
    fn increment(&self, m: usize, s: f64) -> f64 {
        let a = s / self.root;
        self.scale.powf(s) * ((m as f64 + 1.0).powf(a) - (m as f64).powf(a))
    }

    fn sup_increment(&self, m: usize, s: f64) -> f64 {
        if s / self.root <= 1.0 {
            self.increment(m, s)
        } else {
            f64::INFINITY
        }
    }

    fn inf_increment(&self, m: usize, s: f64) -> f64 {
        if s / self.root >= 1.0 {
            self.increment(m, s)
        } else {
            0.0
        }
    }

    /// Upper bound for `sup_{k≥m}` of the ratio of consecutive majorant terms.
    fn ratio_upper(&self, m: usize, maj: Majorant, gamma: f64) -> f64 {
        let growth = match maj {
            Majorant::Power { s } => (1.0 + 1.0 / m as f64).powf(s / self.root),
            Majorant::Exp { lambda, s } => (lambda * self.sup_increment(m, s)).exp(),
        };
        growth * self.mu_ratio_upper(m).powf(gamma)
    }

    /// Lower bound for `inf_{k≥m}` of the ratio of consecutive majorant terms.
    fn ratio_lower(&self, m: usize, maj: Majorant, gamma: f64) -> f64 {
        let growth = match maj {
            Majorant::Power { .. } => 1.0,
            Majorant::Exp { lambda, s } => (lambda * self.inf_increment(m, s)).exp(),
        };
        growth * self.mu_ratio_lower(m).powf(gamma)
    }

    fn first_level_above(&self, threshold: f64) -> usize {
        if threshold < self.value(1) {
            return 1;
        }
        let mut m = ((threshold / self.scale).powf(self.root).floor() as usize).max(1);
        while m > 1 && self.value(m - 1) > threshold {
            m -= 1;
        }
        while self.value(m) <= threshold {
            m += 1;
        }
        m
    }
}

/// Dominating per-level weight with a closed-form consecutive ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Majorant {
    Power { s: f64 },
    Exp { lambda: f64, s: f64 },
}

impl Majorant {
    fn ln(&self, v: f64) -> f64 {
        match *self {
            Majorant::Power { s } => s * v.ln(),
            Majorant::Exp { lambda, s } => lambda * v.powf(s),
        }
    }
}

/// Per-level weights `w(v)`; all are convex, increasing and vanish at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Weight {
    Power { s: f64 },
    ExpM1 { lambda: f64, s: f64 },
    ExpTail { lambda: f64, s: f64, n: usize },
}

impl Weight {
    fn value(&self, v: f64) -> f64 {
        match *self {
            Weight::Power { s } => v.powf(s),
            Weight::ExpM1 { lambda, s } => (lambda * v.powf(s)).exp_m1(),
            Weight::ExpTail { lambda, s, n } => exp_tail(lambda * v.powf(s), n),
        }
    }

    fn majorant(&self) -> Majorant {
        match *self {
            Weight::Power { s } => Majorant::Power { s },
            Weight::ExpM1 { lambda, s } | Weight::ExpTail { lambda, s, .. } => Majorant::Exp { lambda, s },
        }
    }

    fn ln(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match *self {
            Weight::Power { s } => s * v.ln(),
            Weight::ExpM1 { lambda, s } => {
                let a = lambda * v.powf(s);
                if a > 1.0 {
                    a + (-(-a).exp()).ln_1p()
                } else {
                    a.exp_m1().ln()
                }
            }
            Weight::ExpTail { lambda, s, n } => ln_exp_tail(lambda * v.powf(s), n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combination {
    /// `θ f + (1 − θ) g`.
    Convex(f64),
    /// `f g`.
    Product,
}

impl Combination {
    fn apply(&self, a: f64, b: f64) -> f64 {
        match *self {
            Combination::Convex(theta) => theta * a + (1.0 - theta) * b,
            Combination::Product => a * b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct MergedLevel {
    value: f64,
    measure: f64,
    upper: f64,
    /// Component levels covering the top of the region below this level.
    f_next: Option<usize>,
    g_next: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
enum Generator {
    ClosedForm(ClosedForm),
    FiniteList { levels: Vec<(f64, f64)>, suffix: Vec<f64> },
    Combined { f: Box<StepFunction>, g: Box<StepFunction>, op: Combination, levels: Vec<MergedLevel>, complete: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    ClosedForm,
    FiniteList,
    Combined,
}

/// JSON form of a step function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepFunctionLiteral {
    ClosedForm {
        name: ClosedFormName,
        #[serde(default)]
        params: ClosedFormParams,
    },
    FiniteList {
        levels: Vec<(f64, f64)>,
    },
    Combined {
        f: Box<StepFunctionLiteral>,
        g: Box<StepFunctionLiteral>,
        op: Combination,
    },
}

/// Geometric ratio bound for `v_m^s μ_m` from level `from_level` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioCertificate {
    pub from_level: usize,
    pub ratio: f64,
    pub exponent: f64,
}

/// A positive step function in canonical form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepFunctionLiteral", into = "StepFunctionLiteral")]
pub struct StepFunction {
    generator: Generator,
}

impl TryFrom<StepFunctionLiteral> for StepFunction {
    type Error = Error;

    fn try_from(lit: StepFunctionLiteral) -> Result<Self> {
        match lit {
            StepFunctionLiteral::ClosedForm { name, params } => StepFunction::closed_form(name, params),
            StepFunctionLiteral::FiniteList { levels } => StepFunction::finite_list(&levels),
            StepFunctionLiteral::Combined { f, g, op } => {
                StepFunction::combine(&(*f).try_into()?, &(*g).try_into()?, op, DEFAULT_REFINEMENT_CAP)
            }
        }
    }
}

impl From<StepFunction> for StepFunctionLiteral {
    fn from(f: StepFunction) -> Self {
        match f.generator {
            Generator::ClosedForm(c) => {
                StepFunctionLiteral::ClosedForm { name: c.name, params: ClosedFormParams { scale: c.scale, root: c.root } }
            }
            Generator::FiniteList { levels, .. } => StepFunctionLiteral::FiniteList { levels },
            Generator::Combined { f, g, op, .. } => {
                StepFunctionLiteral::Combined { f: Box::new((*f).into()), g: Box::new((*g).into()), op }
            }
        }
    }
}

/// Partial sum with a certified bound on what was left out.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Summation {
    sum: f64,
    tail: f64,
    levels: usize,
}

impl Summation {
    fn upper(&self) -> f64 {
        self.sum + self.tail
    }
}

impl StepFunction {
    pub fn closed_form(name: ClosedFormName, params: ClosedFormParams) -> Result<Self> {
        if !(params.scale.is_finite() && params.scale > 0.0) {
            return Err(Error::InvalidStepFunction(format!("scale must be positive, got {}", params.scale)));
        }
        if !(params.root.is_finite() && params.root >= 1.0) {
            return Err(Error::InvalidStepFunction(format!("root must be at least 1, got {}", params.root)));
        }
        Ok(StepFunction { generator: Generator::ClosedForm(ClosedForm { name, scale: params.scale, root: params.root }) })
    }

    pub fn example1() -> Self {
        Self::closed_form(ClosedFormName::Example1, ClosedFormParams::default()).unwrap()
    }

    pub fn example2() -> Self {
        Self::closed_form(ClosedFormName::Example2, ClosedFormParams::default()).unwrap()
    }

    /// Commutative shadow of `A = Σ n^{1/p}(P_n − P_{n+1})`.
    pub fn projection_net(p: f64) -> Result<Self> {
        Self::closed_form(ClosedFormName::ProjectionNet, ClosedFormParams { scale: 1.0, root: p })
    }

    /// Levels `(v, μ)` in any order; equal values are merged.
    pub fn finite_list(levels: &[(f64, f64)]) -> Result<Self> {
        let mut sorted = Vec::with_capacity(levels.len());
        for &(v, mu) in levels {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidStepFunction(format!("level value {v} must be finite and nonnegative")));
            }
            if !(mu.is_finite() && mu > 0.0) {
                return Err(Error::InvalidStepFunction(format!("level measure {mu} must be finite and positive")));
            }
            sorted.push((v, mu));
        }
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
        for (v, mu) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += mu,
                _ => merged.push((v, mu)),
            }
        }
        let mut suffix = vec![0.0; merged.len() + 1];
        for i in (0..merged.len()).rev() {
            suffix[i] = suffix[i + 1] + merged[i].1;
        }
        Ok(StepFunction { generator: Generator::FiniteList { levels: merged, suffix } })
    }

    /// Comonotone combination on the common refinement of the two level sets.
    pub fn combine(f: &StepFunction, g: &StepFunction, op: Combination, cap: usize) -> Result<Self> {
        if let Combination::Convex(theta) = op {
            if !(0.0..=1.0).contains(&theta) {
                return Err(Error::DomainViolation(format!("θ = {theta} outside [0, 1]")));
            }
        }
        let (levels, complete) = merge_levels(f, g, op, cap)?;
        Ok(StepFunction {
            generator: Generator::Combined { f: Box::new(f.clone()), g: Box::new(g.clone()), op, levels, complete },
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let lit: StepFunctionLiteral =
            serde_json::from_str(text).map_err(|e| Error::InvalidStepFunction(format!("line {}: {e}", e.line())))?;
        lit.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&StepFunctionLiteral::from(self.clone())).expect("literal serializes")
    }

    pub fn kind(&self) -> GeneratorKind {
        match self.generator {
            Generator::ClosedForm(_) => GeneratorKind::ClosedForm,
            Generator::FiniteList { .. } => GeneratorKind::FiniteList,
            Generator::Combined { .. } => GeneratorKind::Combined,
        }
    }

    /// Number of levels, `None` for infinite sequences.
    pub fn len(&self) -> Option<usize> {
        match &self.generator {
            Generator::ClosedForm(_) => None,
            Generator::FiniteList { levels, .. } => Some(levels.len()),
            Generator::Combined { levels, complete, .. } => complete.then_some(levels.len()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    /// Largest level value, for generators with finitely many levels.
    pub fn sup_level(&self) -> Option<f64> {
        let k = self.len()?;
        Some((1..=k).filter_map(|m| self.level(m)).fold(0.0, |a, (v, _)| a.max(v)))
    }

    /// `(v_m, μ_m)` for `m ≥ 1`.
    pub fn level(&self, m: usize) -> Option<(f64, f64)> {
        if m == 0 {
            return None;
        }
        match &self.generator {
            Generator::ClosedForm(c) => Some((c.value(m), c.measure(m))),
            Generator::FiniteList { levels, .. } => levels.get(m - 1).copied(),
            Generator::Combined { levels, .. } => levels.get(m - 1).map(|l| (l.value, l.measure)),
        }
    }

    /// `Σ_{k≥m} μ_k`.
    pub fn tail_measure(&self, m: usize) -> f64 {
        let m = m.max(1);
        match &self.generator {
            Generator::ClosedForm(c) => c.tail_measure(m),
            Generator::FiniteList { suffix, .. } => suffix.get(m - 1).copied().unwrap_or(0.0),
            Generator::Combined { levels, .. } => levels.get(m - 1).map(|l| l.upper).unwrap_or(0.0),
        }
    }

    pub fn total_measure(&self) -> f64 {
        self.tail_measure(1)
    }

    /// `c f`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::DomainViolation(format!("scale factor {c} must be positive")));
        }
        match &self.generator {
            Generator::ClosedForm(cf) => {
                Self::closed_form(cf.name, ClosedFormParams { scale: cf.scale * c, root: cf.root })
            }
            Generator::FiniteList { levels, .. } => {
                Self::finite_list(&levels.iter().map(|&(v, mu)| (c * v, mu)).collect::<Vec<_>>())
            }
            Generator::Combined { f, g, op, levels, .. } => {
                let (fs, gs) = match op {
                    Combination::Convex(_) => (f.scaled(c)?, g.scaled(c)?),
                    Combination::Product => (f.scaled(c)?, (**g).clone()),
                };
                Self::combine(&fs, &gs, *op, levels.len().max(DEFAULT_REFINEMENT_CAP))
            }
        }
    }

    /// Index of the first level with `v_m > threshold`, if any.
    fn first_level_above(&self, threshold: f64) -> Option<usize> {
        match &self.generator {
            Generator::ClosedForm(c) => Some(c.first_level_above(threshold)),
            Generator::FiniteList { levels, .. } => levels.iter().position(|l| l.0 > threshold).map(|i| i + 1),
            Generator::Combined { levels, .. } => levels.iter().position(|l| l.value > threshold).map(|i| i + 1),
        }
    }

    /// Levels with `v_m ≤ cut`, i.e. `f · 1{f ≤ cut}`.
    pub fn truncated(&self, cut: f64) -> Result<Self> {
        let end = match self.first_level_above(cut) {
            Some(m) => m - 1,
            None => self.len().unwrap_or(0),
        };
        if end > LEVEL_CAP {
            return Err(Error::RefinementOverflow { cap: LEVEL_CAP });
        }
        let levels: Vec<(f64, f64)> = (1..=end).filter_map(|m| self.level(m)).collect();
        Self::finite_list(&levels)
    }

    /// Geometric ratio bound for `Σ v_m^s μ_m`.
    pub fn ratio_certificate(&self, s: f64) -> Option<RatioCertificate> {
        match &self.generator {
            Generator::ClosedForm(c) => (1..=1000).find_map(|m| {
                let r = c.ratio_upper(m, Majorant::Power { s }, 1.0);
                (r < 1.0).then_some(RatioCertificate { from_level: m, ratio: r, exponent: s })
            }),
            Generator::FiniteList { levels, .. } => {
                Some(RatioCertificate { from_level: levels.len() + 1, ratio: 0.0, exponent: s })
            }
            Generator::Combined { levels, complete, .. } => {
                complete.then_some(RatioCertificate { from_level: levels.len() + 1, ratio: 0.0, exponent: s })
            }
        }
    }

    /// `Σ_{m≥from} w(v_m) μ_m` with a certified tail.
    fn certified_sum(&self, from: usize, w: Weight) -> Result<Summation> {
        let from = from.max(1);
        match &self.generator {
            Generator::ClosedForm(c) => closed_sum(c, from, w),
            Generator::FiniteList { levels, .. } => {
                let sum = levels.iter().skip(from - 1).map(|&(v, mu)| weighted(w, v, mu, mu.ln())).sum();
                Ok(Summation { sum, tail: 0.0, levels: levels.len().saturating_sub(from - 1) })
            }
            Generator::Combined { f, g, op, levels, complete } => {
                let mut sum = 0.0;
                let count = levels.len();
                for i in (from - 1)..count {
                    let l = &levels[i];
                    sum += weighted(w, l.value, l.measure, l.measure.ln());
                    let last = i + 1 == count;
                    if last && *complete {
                        return Ok(Summation { sum, tail: 0.0, levels: i + 2 - from });
                    }
                    if (i + 2 - from).is_multiple_of(TAIL_CHECK_EVERY) || last {
                        let tail = combined_tail(f, g, *op, l, w)?;
                        if tail <= RELATIVE_TAIL * sum || tail == 0.0 {
                            return Ok(Summation { sum, tail, levels: i + 2 - from });
                        }
                    }
                }
                if *complete {
                    Ok(Summation { sum, tail: 0.0, levels: 0 })
                } else {
                    Err(Error::TailNotCertified(format!("combined tail not below {RELATIVE_TAIL:e} after refinement")))
                }
            }
        }
    }

    /// `Σ_m v_m^s μ_m`.
    pub fn power_integral(&self, s: f64) -> Result<f64> {
        Ok(self.certified_sum(1, Weight::Power { s })?.sum)
    }
}

/// `w(v) μ`, through logarithms only when `w(v)` or `μ` leave the float range.
fn weighted(w: Weight, v: f64, mu: f64, ln_mu: f64) -> f64 {
    let direct = w.value(v) * mu;
    if direct.is_finite() && (direct > 0.0 || v == 0.0) {
        direct
    } else {
        (w.ln(v) + ln_mu).exp()
    }
}

fn closed_sum(c: &ClosedForm, from: usize, w: Weight) -> Result<Summation> {
    let maj = w.majorant();
    let mut sum = 0.0;
    for m in from.. {
        let v = c.value(m);
        let ln_mu = c.ln_measure(m);
        sum += weighted(w, v, c.measure(m), ln_mu);
        if !sum.is_finite() {
            return Err(Error::TailNotCertified(format!("partial sum overflowed at level {m}")));
        }
        let r = c.ratio_upper(m, maj, 1.0);
        if r < 1.0 {
            let tail = (maj.ln(v) + ln_mu).exp() * r / (1.0 - r);
            if tail <= RELATIVE_TAIL * sum || tail == 0.0 {
                return Ok(Summation { sum, tail, levels: m + 1 - from });
            }
        }
        if m + 1 - from >= LEVEL_CAP {
            break;
        }
    }
    Err(Error::TailNotCertified(format!("no geometric tail below {RELATIVE_TAIL:e} within {LEVEL_CAP} levels")))
}

/// Bound for the weighted sum of a combination over the region below `level`,
/// from pointwise convexity (or AM–GM for products) of the weight.
fn combined_tail(f: &StepFunction, g: &StepFunction, op: Combination, level: &MergedLevel, w: Weight) -> Result<f64> {
    let part = |h: &StepFunction, next: Option<usize>, w: Weight| -> Result<f64> {
        match next {
            None => Ok(0.0),
            Some(k) => Ok(h.certified_sum(k.max(1), w)?.upper()),
        }
    };
    match op {
        Combination::Convex(theta) => {
            Ok(theta * part(f, level.f_next, w)? + (1.0 - theta) * part(g, level.g_next, w)?)
        }
        Combination::Product => match w {
            Weight::Power { s } => {
                let w2 = Weight::Power { s: 2.0 * s };
                Ok(0.5 * part(f, level.f_next, w2)? + 0.5 * part(g, level.g_next, w2)?)
            }
            _ => Err(Error::TailNotCertified("exponential weights of products have no tail bound".into())),
        },
    }
}

/// Walks the decreasing rearrangements of `f` and `g` from the bottom level
/// up, merging breakpoints `Σ_{k≥m} μ_k` of both.
fn merge_levels(f: &StepFunction, g: &StepFunction, op: Combination, cap: usize) -> Result<(Vec<MergedLevel>, bool)> {
    let breakpoint = |h: &StepFunction, idx: usize| -> f64 {
        // lower end of the piece with index idx; idx 0 is the zero region above the support
        if idx == 0 {
            h.total_measure()
        } else {
            h.tail_measure(idx + 1)
        }
    };
    let value = |h: &StepFunction, idx: usize| -> f64 {
        if idx == 0 {
            0.0
        } else {
            h.level(idx).map(|l| l.0).unwrap_or(0.0)
        }
    };
    let mut cur = f.total_measure().max(g.total_measure());
    let mut fi = if cur > f.total_measure() { 0 } else { 1 };
    let mut gi = if cur > g.total_measure() { 0 } else { 1 };
    let mut levels: Vec<MergedLevel> = Vec::new();
    loop {
        let nf = breakpoint(f, fi);
        let ng = breakpoint(g, gi);
        let next = nf.max(ng);
        let val = op.apply(value(f, fi), value(g, gi));
        let measure = cur - next;
        if nf >= next {
            fi += 1;
        }
        if ng >= next {
            gi += 1;
        }
        let f_next = (next > 0.0).then_some(fi);
        let g_next = (next > 0.0).then_some(gi);
        if measure > 0.0 {
            match levels.last_mut() {
                Some(last) if last.value == val => {
                    last.measure += measure;
                    last.f_next = f_next;
                    last.g_next = g_next;
                }
                _ => {
                    if levels.len() >= cap {
                        return Err(Error::RefinementOverflow { cap });
                    }
                    levels.push(MergedLevel { value: val, measure, upper: cur, f_next, g_next });
                }
            }
        }
        cur = next;
        if cur <= 0.0 {
            return Ok((levels, true));
        }
        if cur < MERGE_FLOOR {
            return Ok((levels, false));
        }
    }
}

/// `(Σ_m v_m^p μ_m)^{1/p}`.
pub fn lp_norm_step(f: &StepFunction, p: f64) -> Result<f64> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidIndex(p));
    }
    Ok(f.certified_sum(1, Weight::Power { s: p })?.sum.powf(1.0 / p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lambda {
    Finite(f64),
    Infinite,
}

impl From<f64> for Lambda {
    fn from(x: f64) -> Self {
        if x == f64::INFINITY {
            Lambda::Infinite
        } else {
            Lambda::Finite(x)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converges,
    Diverges,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesRoute {
    /// `Σ_m μ_m (e^{λ v_m} − 1)`, exact for `p = 1`.
    Exchange,
    /// Outer sum over `n` of level sums `Σ_m v_m^{np} μ_m`.
    Double,
    /// Asymptotic ratios, for `λ = ∞`.
    Asymptotic,
    /// Finite-dimensional matrix series.
    Matrix,
}

/// Level from which consecutive lower-bound terms grow by at least `ratio`,
/// and a partial sum exceeding `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceWitness {
    pub lambda: f64,
    pub start_level: usize,
    pub ratio: f64,
    pub order: usize,
    pub partial_sum: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentiabilityCertificate {
    pub verdict: Verdict,
    pub value: Option<f64>,
    pub orders_used: usize,
    pub levels_used: usize,
    pub tail_bound: f64,
    pub divergence_witness: Option<DivergenceWitness>,
    pub route: SeriesRoute,
}

impl ExponentiabilityCertificate {
    fn inconclusive(route: SeriesRoute, tail_bound: f64, orders_used: usize) -> Self {
        ExponentiabilityCertificate {
            verdict: Verdict::Inconclusive,
            value: None,
            orders_used,
            levels_used: 0,
            tail_bound,
            divergence_witness: None,
            route,
        }
    }

    pub fn converges(&self) -> bool {
        self.verdict == Verdict::Converges
    }

    pub fn diverges(&self) -> bool {
        self.verdict == Verdict::Diverges
    }
}

/// Lower-bound terms: `μ_m (e^{λ v_m} − 1)` for `p = 1`, and the single-level
/// bound `μ_m^{1/p}(e^{λ v_m} − 1)` otherwise.
fn witness_term(f: &StepFunction, m: usize, lambda: f64, p: f64) -> f64 {
    match f.level(m) {
        Some((v, mu)) => (Weight::ExpM1 { lambda, s: 1.0 }.ln(v) + mu.ln() / p).exp(),
        None => 0.0,
    }
}

fn find_witness(f: &StepFunction, p: f64, lambda: f64) -> Option<DivergenceWitness> {
    let Generator::ClosedForm(c) = &f.generator else {
        return None;
    };
    let gamma = 1.0 / p;
    let maj = Majorant::Exp { lambda, s: 1.0 };
    let start = (1..=DIVERGENCE_SCAN).find(|&m| {
        let r = c.ratio_lower(m, maj, gamma);
        if p == 1.0 {
            r >= 1.0
        } else {
            r > 1.0
        }
    })?;
    let ratio = c.ratio_lower(start, maj, gamma);
    let mut partial = 0.0;
    let mut order = start;
    for m in 1..=LEVEL_CAP {
        let t = witness_term(f, m, lambda, p);
        partial = if p == 1.0 { partial + t } else { t };
        order = m;
        if partial > DIVERGENCE_THRESHOLD {
            break;
        }
    }
    Some(DivergenceWitness { lambda, start_level: start, ratio, order, partial_sum: partial, threshold: DIVERGENCE_THRESHOLD })
}

/// Recomputes a divergence witness from scratch.
pub fn verify_witness(f: &StepFunction, p: f64, w: &DivergenceWitness) -> bool {
    let Generator::ClosedForm(c) = &f.generator else {
        return false;
    };
    let r = c.ratio_lower(w.start_level, Majorant::Exp { lambda: w.lambda, s: 1.0 }, 1.0 / p);
    let grows = if p == 1.0 { r >= 1.0 } else { r > 1.0 };
    let partial = if p == 1.0 {
        (1..=w.order).map(|m| witness_term(f, m, w.lambda, p)).sum::<f64>()
    } else {
        witness_term(f, w.order, w.lambda, p)
    };
    grows && (r - w.ratio).abs() <= 1e-12 * r && partial == w.partial_sum
}

/// `Σ_{n≥1} λ^n ‖f^n‖_p / n!` with a convergence or divergence certificate.
pub fn exponentiable_series(f: &StepFunction, p: f64, lambda: Lambda, budget: &SeriesBudget) -> Result<ExponentiabilityCertificate> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidIndex(p));
    }
    let lambda = match lambda {
        Lambda::Infinite => return asymptotic_certificate(f, p, budget),
        Lambda::Finite(x) if x.is_finite() && x >= 0.0 => x,
        Lambda::Finite(x) => return Err(Error::DomainViolation(format!("λ = {x} must be finite and nonnegative"))),
    };
    let route = if p == 1.0 { SeriesRoute::Exchange } else { SeriesRoute::Double };
    if lambda == 0.0 || f.is_empty() {
        return Ok(ExponentiabilityCertificate {
            verdict: Verdict::Converges,
            value: Some(0.0),
            orders_used: 0,
            levels_used: 0,
            tail_bound: 0.0,
            divergence_witness: None,
            route,
        });
    }
    if let Some(w) = find_witness(f, p, lambda) {
        return Ok(ExponentiabilityCertificate {
            verdict: Verdict::Diverges,
            value: None,
            orders_used: 0,
            levels_used: w.order,
            tail_bound: f64::INFINITY,
            divergence_witness: Some(w),
            route,
        });
    }
    if p == 1.0 {
        exchange_series(f, lambda, budget)
    } else {
        double_series(f, p, lambda, budget)
    }
}

fn exchange_series(f: &StepFunction, lambda: f64, budget: &SeriesBudget) -> Result<ExponentiabilityCertificate> {
    let s = match f.certified_sum(1, Weight::ExpM1 { lambda, s: 1.0 }) {
        Ok(s) => s,
        Err(Error::TailNotCertified(_)) => return Ok(ExponentiabilityCertificate::inconclusive(SeriesRoute::Exchange, f64::INFINITY, 0)),
        Err(e) => return Err(e),
    };
    let verdict = if s.tail <= budget.tolerance * s.sum.max(1.0) { Verdict::Converges } else { Verdict::Inconclusive };
    Ok(ExponentiabilityCertificate {
        verdict,
        value: (verdict == Verdict::Converges).then_some(s.sum),
        orders_used: 0,
        levels_used: s.levels,
        tail_bound: s.tail,
        divergence_witness: None,
        route: SeriesRoute::Exchange,
    })
}

/// Outer truncation after order `N` is bounded through `x^{1/p} ≤ (1 − 1/p) + x/p`:
/// `(1 − 1/p) Σ_{n>N} λ^n/n! + (1/p) Σ_m μ_m Σ_{n>N} (λ v_m^p)^n/n!`,
/// and for bounded support also by `(Σ μ)^{1/p} Σ_{n>N} (λ v_max)^n/n!`.
fn double_series(f: &StepFunction, p: f64, lambda: f64, budget: &SeriesBudget) -> Result<ExponentiabilityCertificate> {
    let bounded = f.sup_level().map(|v| (f.total_measure().powf(1.0 / p), lambda * v));
    let mut value = 0.0;
    let mut level_error = 0.0;
    let mut coeff = 1.0;
    let mut levels = 0;
    let mut last_tail = f64::INFINITY;
    for n in 1..=budget.max_order {
        coeff *= lambda / n as f64;
        let s = match f.certified_sum(1, Weight::Power { s: n as f64 * p }) {
            Ok(s) => s,
            Err(Error::TailNotCertified(_)) => return Ok(ExponentiabilityCertificate::inconclusive(SeriesRoute::Double, last_tail, n - 1)),
            Err(e) => return Err(e),
        };
        levels = levels.max(s.levels);
        value += coeff * s.sum.powf(1.0 / p);
        level_error += coeff * (s.upper().powf(1.0 / p) - s.sum.powf(1.0 / p));
        let outer = match f.certified_sum(1, Weight::ExpTail { lambda, s: p, n }) {
            Ok(t) => (1.0 - 1.0 / p) * exp_tail(lambda, n) + t.upper() / p,
            Err(Error::TailNotCertified(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        let outer = match bounded {
            Some((mass, x)) => outer.min(mass * exp_tail(x, n)),
            None => outer,
        };
        last_tail = outer + level_error;
        let done = last_tail <= budget.tolerance * value.max(1.0);
        if done && budget.remainder_policy == RemainderPolicy::CertifiedTail {
            return Ok(ExponentiabilityCertificate {
                verdict: Verdict::Converges,
                value: Some(value),
                orders_used: n,
                levels_used: levels,
                tail_bound: last_tail,
                divergence_witness: None,
                route: SeriesRoute::Double,
            });
        }
    }
    let verdict = if last_tail <= budget.tolerance * value.max(1.0) { Verdict::Converges } else { Verdict::Inconclusive };
    Ok(ExponentiabilityCertificate {
        verdict,
        value: (verdict == Verdict::Converges).then_some(value),
        orders_used: budget.max_order,
        levels_used: levels,
        tail_bound: last_tail,
        divergence_witness: None,
        route: SeriesRoute::Double,
    })
}

/// Membership for every `λ`: from the limits of the measure ratio and of the
/// increments of `v_m^p`.
fn asymptotic_certificate(f: &StepFunction, p: f64, budget: &SeriesBudget) -> Result<ExponentiabilityCertificate> {
    let all = |verdict| ExponentiabilityCertificate {
        verdict,
        value: None,
        orders_used: 0,
        levels_used: 0,
        tail_bound: 0.0,
        divergence_witness: None,
        route: SeriesRoute::Asymptotic,
    };
    match &f.generator {
        Generator::FiniteList { .. } => Ok(all(Verdict::Converges)),
        Generator::Combined { complete: true, .. } => Ok(all(Verdict::Converges)),
        Generator::Combined { f: a, g: b, op: Combination::Convex(_), .. } => {
            let ca = asymptotic_certificate(a, p, budget)?;
            let cb = asymptotic_certificate(b, p, budget)?;
            Ok(all(if ca.converges() && cb.converges() { Verdict::Converges } else { Verdict::Inconclusive }))
        }
        Generator::Combined { .. } => Ok(all(Verdict::Inconclusive)),
        Generator::ClosedForm(c) => {
            let a = p / c.root;
            let limit = c.mu_ratio_limit();
            if (limit == 0.0 && a <= 1.0) || (a < 1.0 && limit < 1.0) {
                return Ok(all(Verdict::Converges));
            }
            // linear growth of v (p = 1) or of v itself (p > 1) against a geometric measure
            let linear = if p == 1.0 { a == 1.0 } else { c.root == 1.0 };
            if linear && limit > 0.0 {
                let step = if p == 1.0 { c.scale.powf(p) } else { c.scale };
                let lambda = 2.0 * (1.0 / limit).ln() / (p * step) + 1.0;
                let cert = exponentiable_series(f, p, Lambda::Finite(lambda), budget)?;
                if cert.diverges() {
                    return Ok(ExponentiabilityCertificate { divergence_witness: cert.divergence_witness, ..all(Verdict::Diverges) });
                }
            }
            Ok(all(Verdict::Inconclusive))
        }
    }
}

/// Finite-dimensional series with the trace `tau_scale · Tr`, and the growth
/// diagnostic `τ(|A|^n)^{1/n}` for `n = 1..=growth_orders`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixExponentiability {
    pub certificate: ExponentiabilityCertificate,
    pub growth: Vec<(usize, f64)>,
    pub operator_norm: f64,
}

pub fn exponentiable_matrix(a: &ComplexMatrix, tau_scale: f64, p: f64, lambda: f64) -> Result<MatrixExponentiability> {
    matrix::validate(a)?;
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidIndex(p));
    }
    if !(tau_scale.is_finite() && tau_scale > 0.0) {
        return Err(Error::DomainViolation(format!("trace scale {tau_scale} must be positive")));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::DomainViolation(format!("λ = {lambda} must be finite and nonnegative")));
    }
    let s = matrix::singular_values(a)?;
    let top = s.first().copied().unwrap_or(0.0);
    let d = a.nrows() as f64;
    let norm_n = |n: usize| -> f64 {
        let powered: Vec<f64> = s.iter().map(|x| x.powi(n as i32)).collect();
        tau_scale.powf(1.0 / p) * norm_from_singular_values(&powered, SchattenIndex::Finite(p))
    };
    let mut value = 0.0;
    let mut coeff = 1.0;
    let mut n = 0;
    let envelope = (tau_scale * d).powf(1.0 / p);
    let tail = loop {
        n += 1;
        coeff *= lambda / n as f64;
        value += coeff * norm_n(n);
        let tail = envelope * exp_tail(lambda * top, n);
        if tail <= 1e-15 * value.max(1.0) || n >= 100_000 {
            break tail;
        }
    };
    let growth = (1..=32).map(|k| (k, tau_scale.powf(1.0 / k as f64) * norm_from_singular_values(&s, SchattenIndex::Finite(k as f64)))).collect();
    Ok(MatrixExponentiability {
        certificate: ExponentiabilityCertificate {
            verdict: Verdict::Converges,
            value: Some(value),
            orders_used: n,
            levels_used: s.len(),
            tail_bound: tail,
            divergence_witness: None,
            route: SeriesRoute::Matrix,
        },
        growth,
        operator_norm: top,
    })
}

/// Certificate for `θ f + (1 − θ) g` and the bound
/// `value ≤ θ value(f) + (1 − θ) value(g) + tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityProbe {
    pub certificate: ExponentiabilityCertificate,
    pub bound: BoundReport,
}

pub fn convexity_probe(f: &StepFunction, g: &StepFunction, theta: f64, p: f64, budget: &SeriesBudget, cap: usize) -> Result<ConvexityProbe> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::DomainViolation(format!("θ = {theta} outside [0, 1]")));
    }
    let cf = exponentiable_series(f, p, Lambda::Finite(1.0), budget)?;
    let cg = exponentiable_series(g, p, Lambda::Finite(1.0), budget)?;
    let (Some(vf), Some(vg)) = (cf.value, cg.value) else {
        return Err(Error::DomainViolation("both inputs must converge at λ = 1".into()));
    };
    let certificate = if theta == 0.0 {
        cg
    } else if theta == 1.0 {
        cf
    } else {
        let h = StepFunction::combine(f, g, Combination::Convex(theta), cap)?;
        exponentiable_series(&h, p, Lambda::Finite(1.0), budget)?
    };
    let rhs = theta * vf + (1.0 - theta) * vg;
    let lhs = certificate.value.unwrap_or(f64::INFINITY);
    let bound = BoundReport::new("convexity", 1, format!("p={p};theta={theta}"), lhs, rhs + budget.tolerance * rhs.max(1.0));
    Ok(ConvexityProbe { certificate, bound })
}

/// `f ∈ 𝔈_{p,λ}` iff `λ f ∈ 𝔈_{p,1}`, with equal series values.
pub fn scaling_law_check(f: &StepFunction, lambda: f64, p: f64, budget: &SeriesBudget) -> Result<BoundReport> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::DomainViolation(format!("λ = {lambda} must be positive")));
    }
    let direct = exponentiable_series(f, p, Lambda::Finite(lambda), budget)?;
    let scaled = exponentiable_series(&f.scaled(lambda)?, p, Lambda::Finite(1.0), budget)?;
    let idx = format!("p={p};lambda={lambda}");
    let deviation = match (direct.verdict, scaled.verdict) {
        (Verdict::Converges, Verdict::Converges) => {
            let (a, b) = (direct.value.unwrap_or(0.0), scaled.value.unwrap_or(0.0));
            (a - b).abs() / a.abs().max(1.0)
        }
        (Verdict::Diverges, Verdict::Diverges) => {
            let (a, b) = (direct.divergence_witness.map(|w| w.ratio), scaled.divergence_witness.map(|w| w.ratio));
            match (a, b) {
                (Some(a), Some(b)) => (a - b).abs() / a.abs().max(1.0),
                _ => f64::INFINITY,
            }
        }
        (Verdict::Inconclusive, Verdict::Inconclusive) => 0.0,
        _ => f64::INFINITY,
    };
    Ok(BoundReport::residual("scaling_law", 1, idx, deviation, 1e-9))
}

/// `(t, τ(E_{(t,∞)}))` for each threshold `t`.
pub fn measurability_profile(f: &StepFunction, thresholds: &[f64]) -> Result<Vec<(f64, f64)>> {
    thresholds
        .iter()
        .map(|&t| {
            if !t.is_finite() {
                return Err(Error::DomainViolation(format!("threshold {t} must be finite")));
            }
            let tail = match f.first_level_above(t) {
                Some(m) => f.tail_measure(m),
                None => 0.0,
            };
            Ok((t, tail))
        })
        .collect()
}

/// Spectral cut `g = f 1{f ≤ cut}` and the exact `p`-norm of `f − g`.
pub fn density_approximation(f: &StepFunction, p: f64, cut: f64) -> Result<(StepFunction, f64)> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidIndex(p));
    }
    let g = f.truncated(cut)?;
    let residual = match f.first_level_above(cut) {
        Some(m) => f.certified_sum(m, Weight::Power { s: p })?.sum.powf(1.0 / p),
        None => 0.0,
    };
    Ok((g, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{c, identity};

    fn example1_closed(lambda: f64) -> f64 {
        let x = lambda.exp();
        2.0 * x.exp_m1() * lambda.exp_m1() / x
    }

    /// Direct double sum `Σ_n λ^n/n! Σ_m v_m^n μ_m` with plain loops.
    fn double_sum_oracle(v: impl Fn(usize) -> f64, mu: impl Fn(usize) -> f64, lambda: f64, orders: usize, levels: usize) -> f64 {
        let mut total = 0.0;
        for n in 1..=orders {
            let mut inner = 0.0;
            for m in 1..=levels {
                inner += v(m).powi(n as i32) * mu(m);
            }
            let mut coeff = 1.0;
            for k in 1..=n {
                coeff *= lambda / k as f64;
            }
            total += coeff * inner;
        }
        total
    }

    fn mu1(m: usize) -> f64 {
        let mut f = 1.0;
        for k in 2..=m + 1 {
            f *= k as f64;
        }
        2.0 * m as f64 / f
    }

    fn mu2(m: usize) -> f64 {
        let r = 1.0 / (2.0 * E);
        2.0 * (r.powi(m as i32) - r.powi(m as i32 + 1))
    }

    #[test]
    fn ln_factorial_matches_products() {
        let mut acc = 0.0;
        for n in 1..=170 {
            acc += (n as f64).ln();
            assert!((ln_factorial(n) - acc).abs() < 1e-12 * acc.max(1.0), "{n}");
        }
    }

    #[test]
    fn measures_are_consistent() {
        for f in [StepFunction::example1(), StepFunction::example2(), StepFunction::projection_net(2.0).unwrap()] {
            for m in 1..20 {
                let (_, mu) = f.level(m).unwrap();
                let diff = f.tail_measure(m) - f.tail_measure(m + 1);
                assert!((mu - diff).abs() < 1e-13 * mu.max(1e-300) + 1e-300, "{m}: {mu} vs {diff}");
            }
        }
        assert!((StepFunction::example1().total_measure() - 2.0).abs() < 1e-15);
        assert!((StepFunction::example2().total_measure() - 1.0 / E).abs() < 1e-15);
        assert!((mu1(5) - StepFunction::example1().level(5).unwrap().1).abs() < 1e-17);
        assert!((mu2(3) - StepFunction::example2().level(3).unwrap().1).abs() < 1e-18);
    }

    #[test]
    fn ratio_bounds_hold_on_actual_levels() {
        for f in [StepFunction::example1(), StepFunction::example2(), StepFunction::projection_net(1.0).unwrap()] {
            let Generator::ClosedForm(c) = f.generator else { unreachable!() };
            for m in 1..40 {
                let r = (c.ln_measure(m + 1) - c.ln_measure(m)).exp();
                assert!(r <= c.mu_ratio_upper(m) * (1.0 + 1e-12), "{m}");
                assert!(r >= c.mu_ratio_lower(m) * (1.0 - 1e-12), "{m}");
            }
        }
    }

    #[test]
    fn lp_norm_examples() {
        let single = StepFunction::finite_list(&[(2.0, 0.5)]).unwrap();
        assert!((lp_norm_step(&single, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let indicator = StepFunction::finite_list(&[(1.0, 1.0)]).unwrap();
        for p in [1.0, 1.5, 3.0, 10.0] {
            assert!((lp_norm_step(&indicator, p).unwrap() - 1.0).abs() < 1e-15);
        }
        // 2 Σ m²/(m+1)! = 2(e − 1)
        let direct: f64 = (1..40).map(|m| m as f64 * mu1(m)).sum();
        let got = lp_norm_step(&StepFunction::example1(), 1.0).unwrap();
        assert!((got - direct).abs() < 2e-12 * direct);
        assert!((got - 2.0 * (E - 1.0)).abs() < 2e-12 * got);
    }

    #[test]
    fn example1_closed_form_and_oracle() {
        let b = SeriesBudget::default();
        for lambda in [0.5, 1.0, 2.0] {
            let cert = exponentiable_series(&StepFunction::example1(), 1.0, Lambda::Finite(lambda), &b).unwrap();
            assert!(cert.converges());
            let v = cert.value.unwrap();
            assert!((v - example1_closed(lambda)).abs() < 2e-12 * v, "{lambda}");
            let oracle = double_sum_oracle(|m| m as f64, mu1, lambda, 160, 60);
            assert!((v - oracle).abs() < 1e-11 * v, "{v} vs {oracle}");
        }
        assert!((example1_closed(1.0) - 17.89440).abs() < 1e-5);
    }

    #[test]
    fn example2_converges_and_doubled_diverges() {
        let b = SeriesBudget::default();
        let cert = exponentiable_series(&StepFunction::example2(), 1.0, Lambda::Finite(1.0), &b).unwrap();
        let v = cert.value.unwrap();
        let oracle = double_sum_oracle(|m| m as f64, mu2, 1.0, 120, 80);
        assert!((v - oracle).abs() < 1e-12, "{v} vs {oracle}");
        assert!((v - 2.0 * (E - 1.0) / E).abs() < 1e-12);

        let doubled = StepFunction::example2().scaled(2.0).unwrap();
        let cert = exponentiable_series(&doubled, 1.0, Lambda::Finite(1.0), &b).unwrap();
        assert!(cert.diverges());
        let w = cert.divergence_witness.unwrap();
        assert!((w.ratio - E / 2.0).abs() < 1e-14);
        assert!(w.partial_sum > DIVERGENCE_THRESHOLD);
        assert!(verify_witness(&doubled, 1.0, &w));
    }

    #[test]
    fn lambda_infinity_separates_the_examples() {
        let b = SeriesBudget::default();
        assert!(exponentiable_series(&StepFunction::example1(), 1.0, Lambda::Infinite, &b).unwrap().converges());
        let c2 = exponentiable_series(&StepFunction::example2(), 1.0, Lambda::Infinite, &b).unwrap();
        assert!(c2.diverges() && c2.divergence_witness.is_some());
    }

    #[test]
    fn projection_net_is_bounded_by_one() {
        let b = SeriesBudget::default();
        let cert = exponentiable_series(&StepFunction::projection_net(1.0).unwrap(), 1.0, Lambda::Finite(1.0), &b).unwrap();
        let v = cert.value.unwrap();
        assert!(v > 0.0 && v <= 1.0, "{v}");
        // at p = 2 the series Σ ‖|A|^n‖_2/n! of the n^{1/2} levels converges too
        let cert = exponentiable_series(&StepFunction::projection_net(2.0).unwrap(), 2.0, Lambda::Finite(1.0), &SeriesBudget::new(60, 1e-10)).unwrap();
        assert!(cert.converges(), "{cert:?}");
    }

    #[test]
    fn double_route_agrees_with_exchange_at_p_one() {
        let f = StepFunction::example1();
        let b = SeriesBudget::new(60, 1e-12);
        let ex = exponentiable_series(&f, 1.0, Lambda::Finite(1.0), &b).unwrap().value.unwrap();
        let db = double_series(&f, 1.0, 1.0, &b).unwrap();
        assert!(db.converges());
        assert!((ex - db.value.unwrap()).abs() < 1e-10 * ex);
    }

    #[test]
    fn double_route_matches_plain_loops_for_p_two() {
        let f = StepFunction::closed_form(ClosedFormName::Example1, ClosedFormParams { scale: 1.0, root: 2.0 }).unwrap();
        let cert = exponentiable_series(&f, 2.0, Lambda::Finite(1.0), &SeriesBudget::new(60, 1e-10)).unwrap();
        assert!(cert.converges(), "{cert:?}");
        let mut oracle = 0.0;
        let mut coeff = 1.0;
        for n in 1..=60 {
            coeff /= n as f64;
            let inner: f64 = (1..=80).map(|m| (m as f64).powi(n) * mu1(m)).sum();
            oracle += coeff * inner.sqrt();
        }
        assert!((cert.value.unwrap() - oracle).abs() < 1e-9 * oracle, "{:?} vs {oracle}", cert.value);
    }

    #[test]
    fn matrix_series() {
        let z = ComplexMatrix::zeros(3, 3);
        assert_eq!(exponentiable_matrix(&z, 1.0, 1.0, 1.0).unwrap().certificate.value, Some(0.0));
        let id = identity(2);
        let m = exponentiable_matrix(&id, 1.0, 1.0, 1.0).unwrap();
        assert!((m.certificate.value.unwrap() - 2.0 * (E - 1.0)).abs() < 1e-14);
        let a = crate::matrix::from_real_diag(&[3.0, 1.0]) * c(0.0, 1.0);
        let m = exponentiable_matrix(&a, 1.0, 2.0, 0.5).unwrap();
        let want: f64 = (1..60)
            .map(|n| {
                let mut coeff = 1.0;
                for k in 1..=n {
                    coeff *= 0.5 / k as f64;
                }
                coeff * (9f64.powi(n) + 1.0).sqrt()
            })
            .sum();
        assert!((m.certificate.value.unwrap() - want).abs() < 1e-12 * want);
        for (n, g) in &m.growth {
            assert!(*g >= 3.0 - 1e-12 && *g <= 3.0 * 2f64.powf(1.0 / *n as f64) + 1e-12);
        }
    }

    #[test]
    fn convexity_cases() {
        let b = SeriesBudget::default();
        let f = StepFunction::example2();
        let g = StepFunction::example1().scaled(0.5).unwrap();
        let probe = convexity_probe(&f, &g, 0.0, 1.0, &b, DEFAULT_REFINEMENT_CAP).unwrap();
        let cg = exponentiable_series(&g, 1.0, Lambda::Finite(1.0), &b).unwrap();
        assert_eq!(probe.certificate, cg);
        let same = convexity_probe(&f, &f, 0.3, 1.0, &b, DEFAULT_REFINEMENT_CAP).unwrap();
        let cf = exponentiable_series(&f, 1.0, Lambda::Finite(1.0), &b).unwrap();
        assert!((same.certificate.value.unwrap() - cf.value.unwrap()).abs() < 1e-12);
        let probe = convexity_probe(&f, &g, 0.5, 1.0, &b, DEFAULT_REFINEMENT_CAP).unwrap();
        assert!(probe.certificate.converges());
        assert!(probe.bound.slack >= 0.0, "{:?}", probe.bound);
        assert!(matches!(convexity_probe(&f, &g, 0.5, 1.0, &b, 3), Err(Error::RefinementOverflow { cap: 3 })));
    }

    #[test]
    fn combination_of_finite_lists_by_hand() {
        let f = StepFunction::finite_list(&[(1.0, 1.0), (3.0, 1.0)]).unwrap();
        let g = StepFunction::finite_list(&[(2.0, 0.5)]).unwrap();
        let h = StepFunction::combine(&f, &g, Combination::Convex(0.5), 100).unwrap();
        // rearranged: f* = 3 on (0,1], 1 on (1,2]; g* = 2 on (0,0.5]
        let want = [(0.5, 1.0), (1.5, 0.5), (2.5, 0.5)];
        assert_eq!(h.len(), Some(3));
        for (m, &(v, mu)) in want.iter().enumerate() {
            let (hv, hm) = h.level(m + 1).unwrap();
            assert!((hv - v).abs() < 1e-15 && (hm - mu).abs() < 1e-15);
        }
        let p = StepFunction::combine(&f, &g, Combination::Product, 100).unwrap();
        assert!((p.power_integral(1.0).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn scaling_law_cases() {
        let b = SeriesBudget::default();
        let r = scaling_law_check(&StepFunction::example1(), 1.0, 1.0, &b).unwrap();
        assert_eq!(r.lhs, 0.0);
        let r = scaling_law_check(&StepFunction::example1(), 2.0, 1.0, &b).unwrap();
        assert!(r.lhs < 1e-9, "{r:?}");
        let r = scaling_law_check(&StepFunction::example2(), 2.0, 1.0, &b).unwrap();
        assert!(r.lhs < 1e-12, "{r:?}");
    }

    #[test]
    fn measurability_cases() {
        let f = StepFunction::example1();
        let prof = measurability_profile(&f, &[0.0, 2.5, 10.0, 100.0]).unwrap();
        assert!((prof[0].1 - 2.0).abs() < 1e-15);
        assert!((prof[1].1 - 1.0 / 3.0).abs() < 1e-15);
        assert!(prof.windows(2).all(|w| w[1].1 <= w[0].1));
        assert!(prof[3].1 < 1e-150);
        let fl = StepFunction::finite_list(&[(1.0, 0.2), (4.0, 0.1)]).unwrap();
        assert_eq!(measurability_profile(&fl, &[5.0]).unwrap()[0].1, 0.0);
    }

    #[test]
    fn density_cases() {
        let f = StepFunction::example1();
        let (_, r0) = density_approximation(&f, 1.0, 0.0).unwrap();
        assert!((r0 - lp_norm_step(&f, 1.0).unwrap()).abs() < 1e-15);
        let rs: Vec<f64> = [5.0, 10.0, 15.0].iter().map(|&c| density_approximation(&f, 1.0, c).unwrap().1).collect();
        assert!(rs[0] > rs[1] && rs[1] > rs[2] && rs[2] > 0.0);
        let direct: f64 = (6..60).map(|m| m as f64 * mu1(m)).sum();
        assert!((rs[0] - direct).abs() < 2e-12 * direct);
        let fl = StepFunction::finite_list(&[(1.0, 0.2), (4.0, 0.1)]).unwrap();
        let (g, r) = density_approximation(&fl, 2.0, 10.0).unwrap();
        assert_eq!(r, 0.0);
        assert_eq!(g, fl);
    }

    #[test]
    fn json_literals_round_trip() {
        let text = r#"{"kind":"closed_form","name":"example1","params":{"scale":1.0,"root":1.0}}"#;
        let f = StepFunction::from_json(text).unwrap();
        assert_eq!(f, StepFunction::example1());
        assert_eq!(StepFunction::from_json(&f.to_json()).unwrap(), f);
        let g = StepFunction::from_json(r#"{"kind":"finite_list","levels":[[2.0,0.5],[1.0,0.25]]}"#).unwrap();
        assert_eq!(g.level(1), Some((1.0, 0.25)));
        assert!(StepFunction::from_json(r#"{"kind":"finite_list","levels":[[1.0,-1.0]]}"#).is_err());
        assert!(StepFunction::from_json(r#"{"kind":"closed_form","name":"example3"}"#).is_err());
        let cert = exponentiable_series(&g, 1.0, Lambda::Finite(1.0), &SeriesBudget::default()).unwrap();
        let json = serde_json::to_value(&cert).unwrap();
        assert_eq!(json["verdict"], "converges");
        assert!(json.get("tail_bound").is_some() && json.get("divergence_witness").is_some());
    }
}
