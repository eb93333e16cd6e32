//! Symmetric tridiagonal matrices: products, Sturm-sequence bisection,
//! inverse iteration and the elimination recurrence used by the time steppers.

use crate::{Error, Result};

/// Symmetric tridiagonal matrix stored by its diagonal and sub-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1), "off-diagonal length must be n - 1");
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.len()];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
    }

    /// Quadratic form `x^T A x`.
    pub fn form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.off[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.off[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &SymTridiag) -> SymTridiag {
        SymTridiag {
            diag: self.diag.iter().zip(&other.diag).map(|(a, b)| a + alpha * b).collect(),
            off: self.off.iter().zip(&other.off).map(|(a, b)| a + alpha * b).collect(),
        }
    }

    /// `self + diag(d)`.
    pub fn add_diag(&self, d: &[f64]) -> SymTridiag {
        SymTridiag { diag: self.diag.iter().zip(d).map(|(a, b)| a + b).collect(), off: self.off.clone() }
    }

    pub fn scale(&self, s: f64) -> SymTridiag {
        SymTridiag { diag: self.diag.iter().map(|a| a * s).collect(), off: self.off.iter().map(|a| a * s).collect() }
    }

    /// `D^{-1/2} A D^{-1/2}` for a positive diagonal `D`; reduces the pencil
    /// `(A, D)` to a standard symmetric problem with the same eigenvalues.
    pub fn congruence_scaled(&self, d: &[f64]) -> SymTridiag {
        let s: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
        SymTridiag {
            diag: self.diag.iter().zip(&s).map(|(a, si)| a * si * si).collect(),
            off: self.off.iter().enumerate().map(|(i, a)| a * s[i] * s[i + 1]).collect(),
        }
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x` (negative pivots of `A - xI = LDL^T`).
    pub fn sturm_count(&self, x: f64) -> usize {
        let n = self.len();
        if n == 0 {
            return 0;
        }
        let guard = f64::MIN_POSITIVE.sqrt() * (1.0 + self.norm_inf());
        let mut count = 0;
        let mut q = self.diag[0] - x;
        for i in 0..n {
            if i > 0 {
                let e = self.off[i - 1];
                q = (self.diag[i] - x) - e * e / q;
            }
            if q.abs() < guard {
                q = -guard;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// `k`-th smallest eigenvalue (0-based) by bisection on the Sturm count.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        assert!(k < self.len());
        let (mut lo, mut hi) = self.gershgorin();
        let pad = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        lo -= pad;
        hi += pad;
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalue(0)
    }

    /// Eigenpair `k` by bisection and inverse iteration; eigenvector has unit
    /// Euclidean norm and nonnegative sum.
    pub fn eigenpair(&self, k: usize) -> Result<(f64, Vec<f64>)> {
        let n = self.len();
        let lambda = self.eigenvalue(k);
        let scale = self.norm_inf().max(1.0);
        // Shift slightly off the eigenvalue so the factorization stays finite.
        let shift = lambda - 4.0 * f64::EPSILON * scale;
        let lu = GeneralTridiagLu::factor(self, shift);
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * ((i * 7919 % 113) as f64 / 113.0)).collect();
        normalize(&mut x);
        let mut residual = f64::INFINITY;
        let max_iter = 8;
        for _ in 0..max_iter {
            let mut y = lu.solve(&x);
            if y.iter().any(|v| !v.is_finite()) {
                break;
            }
            normalize(&mut y);
            x = y;
            let ax = self.matvec(&x);
            residual = ax.iter().zip(&x).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
            if residual <= 1e-13 * scale {
                break;
            }
        }
        if !(residual <= 1e-10 * scale) {
            return Err(Error::EigenNoConvergence { iterations: max_iter, residual });
        }
        if x.iter().sum::<f64>() < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        // Residual correction: remove the part of the rounding error that the
        // near-singular solve can still resolve, then take the Rayleigh quotient.
        let res_of = |x: &[f64], l: f64| {
            let ax = self.matvec(x);
            ax.iter().zip(x).map(|(a, b)| (a - l * b).powi(2)).sum::<f64>()
        };
        let mut lambda = lambda;
        for _ in 0..2 {
            let ax = self.matvec(&x);
            let rq: f64 = ax.iter().zip(&x).map(|(a, b)| a * b).sum();
            let r: Vec<f64> = ax.iter().zip(&x).map(|(a, b)| a - rq * b).collect();
            let mut d = lu.solve(&r);
            let along: f64 = d.iter().zip(&x).map(|(a, b)| a * b).sum();
            d.iter_mut().zip(&x).for_each(|(di, xi)| *di -= along * xi);
            let mut y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - b).collect();
            normalize(&mut y);
            let ay = self.matvec(&y);
            let rq_y: f64 = ay.iter().zip(&y).map(|(a, b)| a * b).sum();
            if res_of(&y, rq_y) < res_of(&x, lambda) {
                x = y;
                lambda = rq_y;
            } else {
                break;
            }
        }
        Ok((lambda, x))
    }
}

fn normalize(x: &mut [f64]) {
    let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nrm > 0.0 {
        x.iter_mut().for_each(|v| *v /= nrm);
    }
}

/// LU factorization with partial pivoting of `A - shift I` for a symmetric
/// tridiagonal `A`; used by inverse iteration where the shifted matrix is
/// indefinite and nearly singular.
struct GeneralTridiagLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    ipiv: Vec<bool>,
}

impl GeneralTridiagLu {
    fn factor(a: &SymTridiag, shift: f64) -> Self {
        let n = a.len();
        let mut d: Vec<f64> = a.diag.iter().map(|v| v - shift).collect();
        let mut dl = a.off.clone();
        let mut du = a.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut ipiv = vec![false; n];
        let tiny = f64::MIN_POSITIVE.sqrt();
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                ipiv[i] = true;
            }
        }
        if n > 0 && d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        Self { dl, d, du, du2, ipiv }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut x = b.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.ipiv[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] -= self.dl[i] * x[i];
        }
        if n == 0 {
            return x;
        }
        x[n - 1] /= self.d[n - 1];
        if n > 1 {
            x[n - 2] = (x[n - 2] - self.du[n - 2] * x[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - self.du[i] * x[i + 1] - self.du2[i] * x[i + 2]) / self.d[i];
        }
        x
    }
}

/// `LDL^T`-style elimination of a symmetric tridiagonal matrix without pivoting.
///
/// Fails when a pivot drops below `1e-14 * max|diag|`.
#[derive(Debug, Clone)]
pub struct TridiagFactor {
    /// Reciprocal pivots.
    inv_pivot: Vec<f64>,
    /// Multipliers `l_i = off_i / pivot_i`.
    mult: Vec<f64>,
    off: Vec<f64>,
}

impl TridiagFactor {
    /// Factor `a`; on breakdown returns the offending row in the error.
    pub fn new(a: &SymTridiag) -> std::result::Result<Self, (usize, f64)> {
        let n = a.len();
        let max_diag = a.diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let threshold = 1e-14 * max_diag;
        let mut inv_pivot = vec![0.0; n];
        let mut mult = vec![0.0; n.saturating_sub(1)];
        let mut piv = a.diag[0];
        for i in 0..n {
            if i > 0 {
                piv = a.diag[i] - mult[i - 1] * a.off[i - 1];
            }
            if !(piv.abs() > threshold) {
                return Err((i, piv));
            }
            inv_pivot[i] = 1.0 / piv;
            if i + 1 < n {
                mult[i] = a.off[i] / piv;
            }
        }
        Ok(Self { inv_pivot, mult, off: a.off.clone() })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 1..n {
            x[i] -= self.mult[i - 1] * x[i - 1];
        }
        x[n - 1] *= self.inv_pivot[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = (x[i] - self.off[i] * x[i + 1]) * self.inv_pivot[i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn laplacian(n: usize) -> SymTridiag {
        SymTridiag::new(vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn sturm_counts_2x2() {
        // [[1, -1], [-1, 3]]: eigenvalues 2 -+ sqrt(2)
        let a = SymTridiag::new(vec![1.0, 3.0], vec![-1.0]);
        assert_eq!(a.sturm_count(0.0), 0);
        assert_eq!(a.sturm_count(1.0), 1);
        assert_eq!(a.sturm_count(4.0), 2);
        assert!((a.eigenvalue(0) - (2.0 - 2f64.sqrt())).abs() < 1e-14);
        assert!((a.eigenvalue(1) - (2.0 + 2f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn laplacian_spectrum() {
        let n = 60;
        let a = laplacian(n);
        for k in 0..n {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert!((a.eigenvalue(k) - exact).abs() < 1e-13, "k={k}");
        }
        let (l, v) = a.eigenpair(0).unwrap();
        let r: f64 = a.matvec(&v).iter().zip(&v).map(|(x, y)| (x - l * y).powi(2)).sum::<f64>().sqrt();
        assert!(r < 1e-12);
        assert!(v.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn factor_detects_singular() {
        // [[1, 1], [1, 1]] is singular.
        let a = SymTridiag::new(vec![1.0, 1.0], vec![1.0]);
        let e = TridiagFactor::new(&a).unwrap_err();
        assert_eq!(e.0, 1);
    }

    proptest! {
        #[test]
        fn factor_solves_dominant_systems(
            d in prop::collection::vec(3.0f64..10.0, 2..40),
            seed in 0u64..1000,
        ) {
            let n = d.len();
            let off: Vec<f64> = (0..n - 1).map(|i| (((i as u64 * 31 + seed) % 17) as f64 / 17.0) - 0.5).collect();
            let a = SymTridiag::new(d, off);
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let b = a.matvec(&x);
            let f = TridiagFactor::new(&a).unwrap();
            let y = f.solve(&b);
            for (u, v) in x.iter().zip(&y) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }

        #[test]
        fn eigenvalues_sorted_and_counted(
            d in prop::collection::vec(-5.0f64..5.0, 3..30),
        ) {
            let n = d.len();
            let a = SymTridiag::new(d, vec![1.0; n - 1]);
            let ev: Vec<f64> = (0..n).map(|k| a.eigenvalue(k)).collect();
            prop_assert!(ev.windows(2).all(|w| w[0] <= w[1] + 1e-12));
            let trace: f64 = a.diag.iter().sum();
            prop_assert!((ev.iter().sum::<f64>() - trace).abs() < 1e-9);
        }
    }
}
