//! Truncated multivariate Taylor polynomials ("jets") for exact partial
//! derivatives of closed-form functions.
//!
//! A jet of order `K` in `n` variables stores the Taylor coefficients
//! `c_α = ∂^α f(x)/α!` for every multi-index with `|α| ≤ K`.

use std::collections::HashMap;
use std::sync::Arc;

pub type MultiIndex = Vec<u8>;

/// Monomial bookkeeping shared by all jets of one shape.
#[derive(Debug)]
pub struct JetSpace {
    vars: usize,
    order: usize,
    monomials: Vec<MultiIndex>,
    index: HashMap<MultiIndex, usize>,
    /// `(i, j, k)` with `monomials[i] + monomials[j] = monomials[k]`.
    products: Vec<(u32, u32, u32)>,
    factorials: Vec<f64>,
}

/// All multi-indices in `vars` variables with total degree exactly `degree`,
/// in lexicographically decreasing order (`(d,0,…)` first).
pub fn multi_indices_of_degree(vars: usize, degree: usize) -> Vec<MultiIndex> {
    fn rec(vars: usize, left: usize, prefix: &mut Vec<u8>, out: &mut Vec<MultiIndex>) {
        if prefix.len() + 1 == vars {
            prefix.push(left as u8);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in (0..=left).rev() {
            prefix.push(a as u8);
            rec(vars, left - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if vars == 0 {
        if degree == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(vars, degree, &mut Vec::with_capacity(vars), &mut out);
    out
}

/// Multi-indices with `|α| ≤ max_order`, graded.
pub fn multi_indices_up_to(vars: usize, max_order: usize) -> Vec<MultiIndex> {
    (0..=max_order)
        .flat_map(|d| multi_indices_of_degree(vars, d))
        .collect()
}

pub fn alpha_factorial(alpha: &[u8]) -> f64 {
    alpha
        .iter()
        .map(|&a| (1..=a as u64).product::<u64>() as f64)
        .product()
}

impl JetSpace {
    pub fn new(vars: usize, order: usize) -> Arc<Self> {
        let monomials = multi_indices_up_to(vars, order);
        let index: HashMap<MultiIndex, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let mut products = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            let da: usize = a.iter().map(|&v| v as usize).sum();
            for (j, b) in monomials.iter().enumerate() {
                let db: usize = b.iter().map(|&v| v as usize).sum();
                if da + db > order {
                    continue;
                }
                let sum: MultiIndex = a.iter().zip(b).map(|(x, y)| x + y).collect();
                products.push((i as u32, j as u32, index[&sum] as u32));
            }
        }
        let factorials = monomials.iter().map(|m| alpha_factorial(m)).collect();
        Arc::new(Self {
            vars,
            order,
            monomials,
            index,
            products,
            factorials,
        })
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[MultiIndex] {
        &self.monomials
    }

    pub fn position(&self, alpha: &[u8]) -> Option<usize> {
        self.index.get(alpha).copied()
    }
}

#[derive(Debug, Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, value: f64) -> Self {
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = value;
        Self {
            space: space.clone(),
            coeffs,
        }
    }

    /// The coordinate function `x_i` expanded at `value`.
    pub fn variable(space: &Arc<JetSpace>, i: usize, value: f64) -> Self {
        let mut j = Self::constant(space, value);
        if space.order >= 1 {
            let mut e = vec![0u8; space.vars];
            e[i] = 1;
            j.coeffs[space.index[&e]] = 1.0;
        }
        j
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coefficient(&self, alpha: &[u8]) -> f64 {
        self.space.position(alpha).map_or(0.0, |i| self.coeffs[i])
    }

    /// `∂^α f` at the expansion point (zero beyond the jet order).
    pub fn partial(&self, alpha: &[u8]) -> f64 {
        self.space
            .position(alpha)
            .map_or(0.0, |i| self.coeffs[i] * self.space.factorials[i])
    }

    /// All partials in the order of [`JetSpace::monomials`].
    pub fn partials(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .zip(&self.space.factorials)
            .map(|(c, f)| c * f)
            .collect()
    }

    /// `Σ_i ∂_i² f`.
    pub fn laplacian(&self) -> f64 {
        let mut e = vec![0u8; self.space.vars];
        let mut sum = 0.0;
        for i in 0..self.space.vars {
            e[i] = 2;
            sum += 2.0 * self.coefficient(&e);
            e[i] = 0;
        }
        sum
    }

    pub fn add(&self, other: &Jet) -> Jet {
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Jet {
            space: self.space.clone(),
            coeffs,
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(i, j, k) in &self.space.products {
            coeffs[k as usize] += self.coeffs[i as usize] * other.coeffs[j as usize];
        }
        Jet {
            space: self.space.clone(),
            coeffs,
        }
    }

    /// `g ∘ self` for a univariate `g` with Taylor coefficients
    /// `taylor[k] = g^{(k)}(self.value())/k!`.
    pub fn compose(&self, taylor: &[f64]) -> Jet {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut out = Jet::constant(&self.space, taylor[0]);
        let mut power = Jet::constant(&self.space, 1.0);
        for &t in taylor.iter().take(self.space.order + 1).skip(1) {
            power = power.mul(&h);
            for (o, p) in out.coeffs.iter_mut().zip(&power.coeffs) {
                *o += t * p;
            }
        }
        out
    }

    pub fn powf(&self, p: f64) -> Jet {
        self.compose(&powf_taylor(self.value(), p, self.space.order))
    }

    pub fn exp(&self) -> Jet {
        self.compose(&exp_taylor(self.value(), self.space.order))
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }
}

/// Taylor coefficients of `s ↦ s^p` at `a`: `binom(p, k)·a^{p−k}`.
pub fn powf_taylor(a: f64, p: f64, order: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(order + 1);
    let mut binom = 1.0;
    for k in 0..=order {
        out.push(binom * a.powf(p - k as f64));
        binom *= (p - k as f64) / (k as f64 + 1.0);
    }
    out
}

/// Taylor coefficients of `exp` at `a`.
pub fn exp_taylor(a: f64, order: usize) -> Vec<f64> {
    let e = a.exp();
    let mut out = Vec::with_capacity(order + 1);
    let mut fact = 1.0;
    for k in 0..=order {
        if k > 0 {
            fact *= k as f64;
        }
        out.push(e / fact);
    }
    out
}

/// Taylor coefficients of the product of two univariate series.
pub fn taylor_product(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().min(b.len());
    (0..n)
        .map(|k| (0..=k).map(|i| a[i] * b[k - i]).sum())
        .collect()
}

/// The jet of `r = ‖x‖` at `x` (requires `x ≠ 0`).
pub fn radius_jet(space: &Arc<JetSpace>, x: &[f64]) -> Jet {
    let mut r2 = Jet::constant(space, 0.0);
    for (i, &xi) in x.iter().enumerate() {
        let v = Jet::variable(space, i, xi);
        r2 = r2.add(&v.mul(&v));
    }
    r2.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn monomial_counts() {
        assert_eq!(multi_indices_up_to(3, 3).len(), 20);
        assert_eq!(multi_indices_of_degree(3, 2).len(), 6);
        assert_eq!(multi_indices_of_degree(2, 1), vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(alpha_factorial(&[2, 0, 3]), 12.0);
    }

    #[test]
    fn polynomial_partials() {
        // f = x^2 y + 3y at (2, -1): ∂x = 2xy = -4, ∂y = x^2 + 3 = 7, ∂x∂x = 2y = -2,
        // ∂x∂y = 2x = 4, ∂xxy = 2.
        let s = JetSpace::new(2, 3);
        let x = Jet::variable(&s, 0, 2.0);
        let y = Jet::variable(&s, 1, -1.0);
        let f = x.mul(&x).mul(&y).add(&y.scale(3.0));
        assert_abs_diff_eq!(f.value(), -7.0);
        assert_abs_diff_eq!(f.partial(&[1, 0]), -4.0);
        assert_abs_diff_eq!(f.partial(&[0, 1]), 7.0);
        assert_abs_diff_eq!(f.partial(&[2, 0]), -2.0);
        assert_abs_diff_eq!(f.partial(&[1, 1]), 4.0);
        assert_abs_diff_eq!(f.partial(&[2, 1]), 2.0);
        assert_abs_diff_eq!(f.partial(&[0, 3]), 0.0);
    }

    #[test]
    fn univariate_compositions() {
        let s = JetSpace::new(1, 4);
        let t = Jet::variable(&s, 0, 0.7);
        let e = t.exp();
        for k in 0..=4u8 {
            assert_abs_diff_eq!(e.partial(&[k]), 0.7f64.exp(), epsilon = 1e-14);
        }
        let p = t.powf(2.5);
        assert_abs_diff_eq!(p.partial(&[2]), 2.5 * 1.5 * 0.7f64.powf(0.5), epsilon = 1e-14);
        assert_abs_diff_eq!(p.partial(&[3]), 2.5 * 1.5 * 0.5 * 0.7f64.powf(-0.5), epsilon = 1e-14);
    }

    #[test]
    fn radius_derivatives() {
        let s = JetSpace::new(3, 2);
        let r = radius_jet(&s, &[1.0, 2.0, 2.0]);
        assert_abs_diff_eq!(r.value(), 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.partial(&[1, 0, 0]), 1.0 / 3.0, epsilon = 1e-15);
        // ∂x∂y r = -xy/r^3
        assert_abs_diff_eq!(r.partial(&[1, 1, 0]), -2.0 / 27.0, epsilon = 1e-15);
        // Δr = 2/r in R^3
        assert_abs_diff_eq!(r.laplacian(), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn series_product() {
        assert_eq!(taylor_product(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]), vec![4.0, 13.0, 28.0]);
    }
}
