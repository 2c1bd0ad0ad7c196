//! Gauss–Legendre rules and the matching spectral integration matrix.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [−1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `P_n(x)` and `P_n'(x)`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Values `P_0(x) .. P_{m}(x)`.
fn legendre_table(m: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; m + 1];
    p[0] = 1.0;
    if m >= 1 {
        p[1] = x;
    }
    for k in 2..=m {
        p[k] = ((2 * k - 1) as f64 * x * p[k - 1] - (k - 1) as f64 * p[k - 2]) / k as f64;
    }
    p
}

/// Gauss–Legendre rule together with its integration matrix:
/// `integral[i][j] = ∫_{−1}^{x_i} ℓ_j(s) ds` where `ℓ_j` is the Lagrange basis on the nodes.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub integral: Vec<Vec<f64>>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        // ℓ_j(x) = w_j Σ_k (2k+1)/2 P_k(x_j) P_k(x), and ∫P_k = (P_{k+1} − P_{k−1})/(2k+1)
        let tables: Vec<Vec<f64>> = nodes.iter().map(|&x| legendre_table(n, x)).collect();
        let integral = (0..n)
            .map(|i| {
                let pi = &tables[i];
                (0..n)
                    .map(|j| {
                        let pj = &tables[j];
                        let mut acc = 0.5 * (pi[1] + 1.0);
                        for k in 1..n {
                            acc += 0.5 * pj[k] * (pi[k + 1] - pi[k - 1]);
                        }
                        weights[j] * acc
                    })
                    .collect()
            })
            .collect();
        GaussRule { nodes, weights, integral }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// ∫_a^b f over a single panel.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(mid + half * x)).sum::<f64>() * half
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 16, 32] {
            let (_, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_for_polynomials() {
        let rule = GaussRule::new(16);
        for k in 0..31 {
            let got = rule.integrate(0.0, 1.0, |x| x.powi(k));
            assert!((got - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "degree {k}");
        }
    }

    #[test]
    fn integration_matrix_reproduces_antiderivatives() {
        let rule = GaussRule::new(16);
        for k in 0..15 {
            for (i, &x) in rule.nodes.iter().enumerate() {
                let got: f64 = (0..16).map(|j| rule.integral[i][j] * rule.nodes[j].powi(k)).sum();
                let want = (x.powi(k + 1) - (-1.0f64).powi(k + 1)) / (k as f64 + 1.0);
                assert!((got - want).abs() < 1e-13, "k={k} i={i}: {got} vs {want}");
            }
        }
    }
}
