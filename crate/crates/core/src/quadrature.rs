//! Collapsed Gauss–Jacobi product rules on simplices.

use nalgebra::{DMatrix, SymmetricEigen};

/// Points per collapsed direction of the default rule; exact through total degree 15.
pub const DEFAULT_POINTS: usize = 8;

/// A quadrature rule on the reference `k`-simplex.
#[derive(Clone, Debug)]
pub struct SimplexRule {
    /// Barycentric coordinates, `k + 1` per point.
    pub points: Vec<Vec<f64>>,
    /// Weights summing to one, so `Σ w f` is the mean of `f`.
    pub weights: Vec<f64>,
}

impl SimplexRule {
    /// Conical product of `q`-point Gauss–Jacobi rules, exact for total degree `2q - 1`.
    pub fn new(k: usize, q: usize) -> Self {
        if k == 0 {
            return SimplexRule { points: vec![vec![1.0]], weights: vec![1.0] };
        }
        let lines: Vec<(Vec<f64>, Vec<f64>)> = (1..=k).map(|i| gauss_jacobi_unit(q, (k - i) as f64)).collect();
        let mut points = Vec::with_capacity(q.pow(k as u32));
        let mut weights = Vec::with_capacity(points.capacity());
        let mut idx = vec![0usize; k];
        loop {
            let mut y = vec![0.0; k];
            let mut rest = 1.0;
            let mut w = 1.0;
            for i in 0..k {
                let (x, wx) = (&lines[i].0[idx[i]], &lines[i].1[idx[i]]);
                y[i] = rest * x;
                rest *= 1.0 - x;
                w *= wx;
            }
            let mut bary = Vec::with_capacity(k + 1);
            bary.push(1.0 - y.iter().sum::<f64>());
            bary.extend(y);
            points.push(bary);
            weights.push(w);
            let mut i = k;
            loop {
                if i == 0 {
                    return SimplexRule { points, weights };
                }
                i -= 1;
                idx[i] += 1;
                if idx[i] < q {
                    break;
                }
                idx[i] = 0;
            }
        }
    }

    pub fn default_for(k: usize) -> Self {
        Self::new(k, DEFAULT_POINTS)
    }

    /// Mean of `f` over the simplex.
    pub fn mean(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

/// Golub–Welsch nodes and normalized weights on `[0, 1]` for the weight `(1 - x)^a`.
pub fn gauss_jacobi_unit(q: usize, a: f64) -> (Vec<f64>, Vec<f64>) {
    // Jacobi weight (1 - t)^a (1 + t)^b on [-1, 1] with b = 0.
    let b = 0.0;
    let mut j = DMatrix::<f64>::zeros(q, q);
    for n in 0..q {
        let nf = n as f64;
        let s = 2.0 * nf + a + b;
        j[(n, n)] = if n == 0 { (b - a) / (a + b + 2.0) } else { (b * b - a * a) / (s * (s + 2.0)) };
        if n + 1 < q {
            let m = nf + 1.0;
            let s = 2.0 * m + a + b;
            let beta = 4.0 * m * (m + a) * (m + b) * (m + a + b) / (s * s * (s + 1.0) * (s - 1.0));
            j[(n, n + 1)] = beta.sqrt();
            j[(n + 1, n)] = beta.sqrt();
        }
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> =
        (0..q).map(|i| ((eig.eigenvalues[i] + 1.0) / 2.0, eig.eigenvectors[(0, i)].powi(2))).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    (pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1 / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn weights_sum_to_one_and_points_lie_inside() {
        for k in 0..=4 {
            let rule = SimplexRule::new(k, 5);
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for p in &rule.points {
                assert!(p.iter().all(|x| *x >= -1e-15));
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn exact_on_dirichlet_moments() {
        // mean of λ^α over the k-simplex is k! Πα_i! / (k + |α|)!
        let rule = SimplexRule::default_for(3);
        for alpha in [[0u32, 0, 0, 0], [2, 1, 0, 3], [0, 5, 5, 5], [15, 0, 0, 0], [4, 4, 4, 3]] {
            let exact = factorial(3) * alpha.iter().map(|&a| factorial(a)).product::<f64>()
                / factorial(3 + alpha.iter().sum::<u32>());
            let got = rule.mean(|p| p.iter().zip(&alpha).map(|(x, &a)| x.powi(a as i32)).product());
            assert!((got - exact).abs() <= 1e-13 * exact, "{alpha:?}: {got} vs {exact}");
        }
    }

    #[test]
    fn gauss_legendre_on_unit_interval() {
        let (x, w) = gauss_jacobi_unit(2, 0.0);
        let r = 0.5 / 3f64.sqrt();
        assert!((x[0] - (0.5 - r)).abs() < 1e-15 && (x[1] - (0.5 + r)).abs() < 1e-15);
        assert!((w[0] - 0.5).abs() < 1e-15);
    }
}
