//! Ordered-simplex integrals of exponentials,
//! `W(μ_1..μ_n; T) = ∫_{0≤t_n≤…≤t_1≤T} exp(Σ μ_k t_k) dt`.
//!
//! `W` equals the divided difference of `x ↦ e^{Tx}` on the nodes
//! `c_0 = 0, c_k = μ_1 + … + μ_k`. When `|T|·spread` is moderate the
//! divided difference is summed as a centered power series in `T`; otherwise
//! it is built by Newton's recursion on sorted nodes, where any block of nodes
//! closer than the confluence threshold is evaluated by a short Taylor
//! expansion around its mean instead of by subtraction.

use num_complex::Complex64;

/// Node spreads with `spread · max(|T|, 1)` below this are treated as confluent.
pub const CONFLUENCE_TOL: f64 = 1e-6;
/// Number of Taylor terms used for confluent blocks.
pub const TAYLOR_TERMS: usize = 8;
/// Largest `|T|·spread` summed by the centered power series.
pub const SERIES_RADIUS: f64 = 8.0;
const MAX_SERIES_TERMS: usize = 400;

/// Complete homogeneous symmetric polynomials `h_0..=h_k` of `ys`.
fn complete_homogeneous(ys: &[f64], k: usize) -> Vec<f64> {
    let mut h = vec![0.0; k + 1];
    h[0] = 1.0;
    for &y in ys {
        for j in 1..=k {
            h[j] += y * h[j - 1];
        }
    }
    h
}

/// Divided difference of `e^{Tx}` over a block of nearly equal nodes.
fn confluent_block(nodes: &[f64], t: Complex64) -> Complex64 {
    let m = nodes.len() - 1;
    let mean = nodes.iter().sum::<f64>() / nodes.len() as f64;
    let ys: Vec<f64> = nodes.iter().map(|x| x - mean).collect();
    let h = complete_homogeneous(&ys, TAYLOR_TERMS);
    // DD of (x − mean)^k over m+1 nodes is h_{k−m}(y)
    let mut coeff = Complex64::new(1.0, 0.0);
    for k in 1..=m {
        coeff *= t / k as f64;
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for (j, hj) in h.iter().enumerate() {
        sum += coeff * *hj;
        coeff *= t / (m + j + 1) as f64;
    }
    (t * mean).exp() * sum
}

/// `e^{T·mean} Σ_{j≥0} T^{m+j}/(m+j)! h_j(x − mean)` over `m+1` nodes, summed
/// until the terms stop contributing.
fn centered_series(nodes: &[f64], t: Complex64) -> Complex64 {
    let m = nodes.len() - 1;
    let mean = nodes.iter().sum::<f64>() / nodes.len() as f64;
    let ys: Vec<f64> = nodes.iter().map(|x| x - mean).collect();
    let radius = ys.iter().fold(0.0_f64, |a, y| a.max(y.abs())) * t.norm();
    let terms = ((radius * std::f64::consts::E).ceil() as usize + 40).min(MAX_SERIES_TERMS);
    let h = complete_homogeneous(&ys, terms);
    let mut coeff = Complex64::new(1.0, 0.0);
    for k in 1..=m {
        coeff *= t / k as f64;
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for (j, hj) in h.iter().enumerate() {
        sum += coeff * *hj;
        coeff *= t / (m + j + 1) as f64;
    }
    (t * mean).exp() * sum
}

/// Divided difference `f[x_0, …, x_n]` of `f(x) = e^{Tx}`.
pub fn divided_difference_exp(nodes: &[f64], t: Complex64) -> Complex64 {
    let n = nodes.len();
    if n == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let mut x = nodes.to_vec();
    x.sort_by(f64::total_cmp);
    if (x[n - 1] - x[0]) * t.norm() <= SERIES_RADIUS {
        return centered_series(&x, t);
    }
    newton_divided_difference(&x, t)
}

/// Newton's recursion on sorted nodes with confluent blocks.
fn newton_divided_difference(x: &[f64], t: Complex64) -> Complex64 {
    let n = x.len();
    let scale = t.norm().max(1.0);
    // table[i] holds f[x_i, …, x_{i+level}]
    let mut table: Vec<Complex64> = x.iter().map(|&xi| (t * xi).exp()).collect();
    for level in 1..n {
        for i in 0..n - level {
            let j = i + level;
            let gap = x[j] - x[i];
            table[i] = if gap * scale < CONFLUENCE_TOL {
                confluent_block(&x[i..=j], t)
            } else {
                (table[i + 1] - table[i]) / gap
            };
        }
    }
    table[0]
}

/// Partial sums `0, μ_1, μ_1 + μ_2, …`.
pub fn accumulated_nodes(mu: &[f64]) -> Vec<f64> {
    let mut nodes = Vec::with_capacity(mu.len() + 1);
    let mut acc = 0.0;
    nodes.push(0.0);
    for &m in mu {
        acc += m;
        nodes.push(acc);
    }
    nodes
}

/// `W(μ; T)` for complex `T`.
pub fn simplex_weight_complex(mu: &[f64], t: Complex64) -> Complex64 {
    divided_difference_exp(&accumulated_nodes(mu), t)
}

/// `W(μ_1..μ_n; T) = ∫_{0≤t_n≤…≤t_1≤T} exp(Σ μ_k t_k) dt`.
pub fn simplex_weight(mu: &[f64], t: f64) -> f64 {
    simplex_weight_complex(mu, Complex64::new(t, 0.0)).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussRule;

    /// Nested Gauss–Legendre evaluation of the recursion
    /// `W(μ_1..μ_n; T) = ∫_0^T e^{μ_1 s} W(μ_2..μ_n; s) ds`.
    fn nested_quadrature(mu: &[f64], t: f64, rule: &GaussRule) -> f64 {
        if mu.is_empty() {
            return 1.0;
        }
        rule.integrate(0.0, t, |s| (mu[0] * s).exp() * nested_quadrature(&mu[1..], s, rule))
    }

    #[test]
    fn trivial_orders() {
        assert_eq!(simplex_weight(&[], 0.7), 1.0);
        assert!((simplex_weight(&[0.0], 0.7) - 0.7).abs() < 1e-15);
        let mu = 1.3;
        assert!((simplex_weight(&[mu], 0.7) - ((mu * 0.7f64).exp() - 1.0) / mu).abs() < 1e-15);
    }

    #[test]
    fn confluent_second_order() {
        let t: f64 = 0.5;
        let want = t.exp() - 1.0 - t;
        let got = simplex_weight(&[1.0, -1.0], t);
        assert!((got - want).abs() < 1e-15);
        let rule = GaussRule::new(16);
        assert!((got - nested_quadrature(&[1.0, -1.0], t, &rule)).abs() < 1e-12);
    }

    #[test]
    fn matches_quadrature_on_mixed_nodes() {
        let rule = GaussRule::new(16);
        let cases: [&[f64]; 5] = [
            &[0.3, -1.2, 0.9],
            &[2.0, -2.0, 2.0, -2.0],
            &[1e-8, 0.0, -1e-8],
            &[0.0, 0.0, 0.0, 0.0],
            &[0.7, 1e-7, -0.7, 0.4],
        ];
        for mu in cases {
            let got = simplex_weight(mu, 0.5);
            let want = nested_quadrature(mu, 0.5, &rule);
            assert!((got - want).abs() < 1e-12, "{mu:?}: {got} vs {want}");
        }
    }

    #[test]
    fn all_zero_exponents_give_simplex_volume() {
        let t: f64 = 0.5;
        assert!((simplex_weight(&[0.0; 4], t) - t.powi(4) / 24.0).abs() < 1e-16);
    }

    #[test]
    fn complex_time_matches_opitz_formula() {
        let mu = [0.4, -1.1, 0.3];
        let t = Complex64::new(0.3, -0.2);
        let nodes = accumulated_nodes(&mu);
        let n = nodes.len();
        let z = crate::matrix::ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                t * nodes[i]
            } else if i == j + 1 {
                t
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let e = crate::matrix::expm(&z);
        // Opitz: f(Z)_{n,0} = f[x_0..x_n] for Z lower bidiagonal, and e^{T·}(Z) = exp(TZ)
        let want = e[(n - 1, 0)];
        let got = simplex_weight_complex(&mu, t);
        assert!((got - want).norm() < 1e-13, "{got} vs {want}");
    }

    #[test]
    fn series_and_newton_routes_agree_where_both_are_accurate() {
        let t = Complex64::new(0.5, 0.0);
        for nodes in [vec![0.0, 1.0, 3.0], vec![-2.0, 0.5, 1.5, 4.0], vec![0.0, 2.0, 2.0 + 1e-9]] {
            let mut sorted = nodes.clone();
            sorted.sort_by(f64::total_cmp);
            let a = centered_series(&sorted, t);
            let b = newton_divided_difference(&sorted, t);
            assert!((a - b).norm() < 1e-13 * a.norm().max(1.0), "{nodes:?}: {a} vs {b}");
        }
    }

    /// `(1/2πi)∮ e^{Tz}/Π(z − x_i) dz` by the trapezoidal rule on a circle.
    fn contour_oracle(nodes: &[f64], t: Complex64, radius: f64, points: usize) -> Complex64 {
        let center = nodes.iter().sum::<f64>() / nodes.len() as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..points {
            let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / points as f64);
            let z = center + w * radius;
            let denom: Complex64 = nodes.iter().map(|&x| z - x).product();
            acc += (t * z).exp() / denom * w * radius;
        }
        acc / points as f64
    }

    #[test]
    fn high_order_repeated_nodes_stay_accurate() {
        let mut nodes = vec![0.0; 12];
        nodes.extend(std::iter::repeat_n(-0.35, 10));
        let t = Complex64::new(0.5, 0.0);
        let want = contour_oracle(&nodes, t, 44.0, 1024);
        let got = divided_difference_exp(&nodes, t);
        assert!((got - want).norm() < 1e-10 * want.norm(), "{got} vs {want}");
    }

    #[test]
    fn wide_spread_uses_newton_route() {
        let rule = GaussRule::new(16);
        let mu = [30.0, -45.0];
        let got = simplex_weight(&mu, 0.5);
        let want = nested_quadrature(&mu, 0.5, &rule);
        assert!((got - want).abs() < 1e-9 * want.abs(), "{got} vs {want}");
    }
}
