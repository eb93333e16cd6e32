//! Conjugate gradients for symmetric positive operators given as closures,
//! in an arbitrary inner product.

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final residual norm relative to `|b|`.
    pub rel_residual: f64,
    pub converged: bool,
    /// Quadratic functional `0.5 <Ax, x> - <b, x>` after each iteration.
    pub energy: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 1000 }
    }
}

/// Solve `A x = b` from `x = 0`.
pub fn solve<A, I>(apply: A, b: &[f64], inner: I, opts: CgOptions) -> CgOutcome
where
    A: FnMut(&[f64]) -> Vec<f64>,
    I: Fn(&[f64], &[f64]) -> f64,
{
    solve_from(apply, b, vec![0.0; b.len()], inner, opts)
}

pub fn solve_from<A, I>(mut apply: A, b: &[f64], x0: Vec<f64>, inner: I, opts: CgOptions) -> CgOutcome
where
    A: FnMut(&[f64]) -> Vec<f64>,
    I: Fn(&[f64], &[f64]) -> f64,
{
    let n = b.len();
    let b_norm = inner(b, b).sqrt();
    let mut x = x0;
    if b_norm == 0.0 && x.iter().all(|&v| v == 0.0) {
        return CgOutcome { x, iterations: 0, rel_residual: 0.0, converged: true, energy: vec![0.0] };
    }
    let scale = if b_norm > 0.0 { b_norm } else { 1.0 };

    let ax = apply(&x);
    let mut r: Vec<f64> = (0..n).map(|i| b[i] - ax[i]).collect();
    let mut p = r.clone();
    let mut rr = inner(&r, &r);
    // J(x) = -0.5 (<b, x> + <r, x>) since Ax = b - r
    let energy_of = |x: &[f64], r: &[f64]| -0.5 * (inner(b, x) + inner(r, x));
    let mut energy = vec![energy_of(&x, &r)];
    let mut it = 0;
    while rr.sqrt() / scale > opts.tol && it < opts.max_iter {
        let ap = apply(&p);
        let pap = inner(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = inner(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        it += 1;
        energy.push(energy_of(&x, &r));
    }
    let rel = rr.sqrt() / scale;
    CgOutcome { x, iterations: it, rel_residual: rel, converged: rel <= opts.tol, energy }
}

/// Euclidean inner product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
