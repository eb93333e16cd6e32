//! Discrete Hardy-Poincaré inequalities as generalized tridiagonal
//! eigenproblems.
//!
//! Every right-hand form is diagonal, so `lambda_min(S, D)` is computed as
//! `lambda_min(D^{-1/2} S D^{-1/2})` by Sturm bisection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::mesh::Mesh1D;
use crate::tridiag::SymTridiag;
use crate::{Error, Result, MU_STAR};

/// Relative change allowed between a constant at `n` and at `2n`.
pub const REFINEMENT_TOL: f64 = 0.2;

/// Values below this are treated as zero by the refinement test.
const ZERO_FLOOR: f64 = 1e-9;

/// Quadratic forms on interior-node vectors, all scaled by the quadrature
/// weight so that `u^T K u` approximates `int |u'|^2` and so on.
#[derive(Debug, Clone)]
pub struct QuadForms {
    pub gamma: f64,
    pub h: f64,
    /// `int |u'|^2`.
    pub k: SymTridiag,
    /// Diagonal of `int u^2` (equal to `h`).
    pub m: Vec<f64>,
    /// Diagonal of `int u^2 / delta^2`.
    pub w2: Vec<f64>,
    /// Diagonal of `int u^2 / delta^gamma`.
    pub wgamma: Vec<f64>,
    /// `int delta^{2-gamma} |u'|^2` with midpoint weights.
    pub wg2: SymTridiag,
}

impl QuadForms {
    pub fn new(mesh: &Mesh1D, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 2.0) {
            return Err(Error::InvalidParameter(format!("gamma must lie in (0, 2), got {gamma}")));
        }
        Ok(Self::build(mesh, gamma))
    }

    fn build(mesh: &Mesh1D, gamma: f64) -> Self {
        let n = mesh.n;
        let h = mesh.h;
        let k = SymTridiag::new(vec![2.0 / h; n], vec![-1.0 / h; n - 1]);
        let m = vec![h; n];
        let w2 = mesh.delta.iter().map(|d| h / (d * d)).collect();
        let wgamma = mesh.delta.iter().map(|d| h * d.powf(-gamma)).collect();
        // c[j] weights the difference u_{j+1} - u_j across the cell (j h, (j+1) h)
        let c: Vec<f64> = (0..=n)
            .map(|j| {
                let xm = (j as f64 + 0.5) * h;
                Mesh1D::delta_at(xm).powf(2.0 - gamma)
            })
            .collect();
        let wg2 = SymTridiag::new(
            (0..n).map(|i| (c[i] + c[i + 1]) / h).collect(),
            (0..n - 1).map(|i| -c[i + 1] / h).collect(),
        );
        Self { gamma, h, k, m, w2, wgamma, wg2 }
    }

    pub fn n(&self) -> usize {
        self.m.len()
    }

    /// `K - mu W2 - a1 Wgamma`.
    pub fn hardy_remainder(&self, mu: f64, a1: f64) -> SymTridiag {
        let d: Vec<f64> = self.w2.iter().zip(&self.wgamma).map(|(w, g)| -mu * w - a1 * g).collect();
        self.k.add_diag(&d)
    }
}

/// Smallest eigenvalue of `S x = lambda D x` for a positive diagonal `D`.
pub fn gen_min_eigenvalue(s: &SymTridiag, d: &[f64]) -> f64 {
    s.congruence_scaled(d).min_eigenvalue()
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::InvalidParameter(format!("gamma must lie in (0, 2), got {gamma}")));
    }
    Ok(())
}

/// Smallest value of `int |u'|^2 / int u^2/delta^2` on the mesh.
pub fn rayleigh_hardy(mesh: &Mesh1D) -> Result<f64> {
    if mesh.n < 10 {
        return Err(Error::InvalidParameter(format!("need n >= 10, got {}", mesh.n)));
    }
    let f = QuadForms::build(mesh, 1.0);
    Ok(gen_min_eigenvalue(&f.k, &f.w2))
}

/// `A2 = max(0, -lambda_min(K - mu W2 - a1 Wgamma, M))`.
pub fn find_a2(forms: &QuadForms, mu: f64, a1: f64) -> f64 {
    (-gen_min_eigenvalue(&forms.hardy_remainder(mu, a1), &forms.m)).max(0.0)
}

/// `A3 = max(0, -lambda_min((K - mu W2) - Wg2, M))` on the unit interval.
pub fn find_a3(forms: &QuadForms, mu: f64) -> f64 {
    let s = forms.hardy_remainder(mu, 0.0).axpy(-1.0, &forms.wg2);
    (-gen_min_eigenvalue(&s, &forms.m)).max(0.0)
}

/// `A4(a5) = max(0, -lambda_min(K - mu W2 - a5 (Wg2 + a1 Wgamma), M))`.
pub fn a4_for(forms: &QuadForms, mu: f64, a1: f64, a5: f64) -> f64 {
    let s = forms.hardy_remainder(mu, a5 * a1).axpy(-a5, &forms.wg2);
    (-gen_min_eigenvalue(&s, &forms.m)).max(0.0)
}

/// Whether `coarse` and `fine` agree to the refinement tolerance.
pub fn refinement_stable(coarse: f64, fine: f64) -> bool {
    if !(coarse.is_finite() && fine.is_finite()) {
        return false;
    }
    let scale = coarse.abs().max(fine.abs());
    scale <= ZERO_FLOOR || (coarse - fine).abs() < REFINEMENT_TOL * scale
}

/// Dyadic grid `2^6, 2^5, ..., 2^-20`, largest first.
pub fn a1_grid() -> Vec<f64> {
    (-20..=6).rev().map(|k| 2f64.powi(k)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct A1Choice {
    pub a1: f64,
    pub a2: f64,
    pub a2_refined: f64,
}

/// Largest `A1` on [`a1_grid`] whose `A2` is refinement-stable between
/// meshes with `n` and `2n` nodes.
pub fn select_a1(n: usize, mu: f64, gamma: f64) -> Result<A1Choice> {
    check_gamma(gamma)?;
    let coarse = QuadForms::build(&Mesh1D::new(n)?, gamma);
    let fine = QuadForms::build(&Mesh1D::new(2 * n)?, gamma);
    for a1 in a1_grid() {
        let a2 = find_a2(&coarse, mu, a1);
        let a2_refined = find_a2(&fine, mu, a1);
        if refinement_stable(a2, a2_refined) {
            return Ok(A1Choice { a1, a2, a2_refined });
        }
    }
    Err(Error::Exhausted(format!("no refinement-stable A1 for mu = {mu}, gamma = {gamma}, n = {n}")))
}

/// Descending search `a5 = 1, 1/2, 1/4, ...` for the first pair with `A4`
/// stable between `n` and `2n`. Returns `(A4, A5)`.
pub fn find_a4_a5(mesh: &Mesh1D, mu: f64, gamma: f64, a1: f64) -> Result<(f64, f64)> {
    check_gamma(gamma)?;
    if !(a1 > 0.0) {
        return Err(Error::InvalidParameter(format!("A1 must be positive, got {a1}")));
    }
    let coarse = QuadForms::build(mesh, gamma);
    let fine = QuadForms::build(&Mesh1D::new(2 * mesh.n)?, gamma);
    for k in 0..=20 {
        let a5 = 0.5f64.powi(k);
        let a4 = a4_for(&coarse, mu, a1, a5);
        if refinement_stable(a4, a4_for(&fine, mu, a1, a5)) {
            return Ok((a4, a5));
        }
    }
    Err(Error::Exhausted(format!("no refinement-stable (A4, A5) for mu = {mu}, gamma = {gamma}")))
}

/// Smallest `A >= 0` with `lambda_min(K - mu* W2 + A M - a1 Wgamma, M) >= -tol`,
/// found by bisection.
pub fn compute_a0_gamma(mesh: &Mesh1D, gamma: f64, a1: f64) -> Result<f64> {
    if !(0.0..2.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma must lie in [0, 2), got {gamma}")));
    }
    if !(a1 > 0.0) {
        return Err(Error::InvalidParameter(format!("A1 must be positive, got {a1}")));
    }
    let forms = QuadForms::build(mesh, if gamma == 0.0 { 1.0 } else { gamma });
    let wgamma: Vec<f64> = if gamma == 0.0 { forms.m.clone() } else { forms.wgamma.clone() };
    let base = forms.k.add_diag(&forms.w2.iter().zip(&wgamma).map(|(w, g)| -MU_STAR * w - a1 * g).collect::<Vec<_>>());
    let lam = |a: f64| gen_min_eigenvalue(&base.add_diag(&forms.m.iter().map(|m| a * m).collect::<Vec<_>>()), &forms.m);
    let lam0 = lam(0.0);
    let tol = 1e-10 * lam0.abs().max(1.0);
    if lam0 >= -tol {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while lam(hi) < -tol {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::Bracket { lo, hi });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if lam(mid) >= -tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Worst slacks of the two-sided norm equivalence over random vectors,
/// each relative to `Phi(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormEquivalence {
    /// `min (Phi - lower) / Phi`.
    pub lower_slack: f64,
    /// `min (upper - Phi) / Phi`.
    pub upper_slack: f64,
    pub upper_factor: f64,
    pub samples: usize,
}

/// Two-sided bound for `Phi(u) = u^T (K - mu W2 + a0 M) u`:
///
/// ```text
/// (1 - mu+/mu*) (K + a0 M) + (mu+/mu*) a1 Wgamma  <=  Phi  <=  (1 + mu-/mu*) (K + a0 M)
/// ```
///
/// The lower bound uses `K - mu* W2 + a0 M >= a1 Wgamma`, the defining property of `a0`.
pub fn check_norm_equivalence(
    forms: &QuadForms,
    mu: f64,
    a0: f64,
    a1: f64,
    sample_count: usize,
    seed: u64,
) -> Result<NormEquivalence> {
    if mu > MU_STAR {
        return Err(Error::InvalidParameter(format!("need mu <= 1/4, got {mu}")));
    }
    let n = forms.n();
    let mu_p = mu.max(0.0);
    let mu_m = (-mu).max(0.0);
    let upper_factor = 1.0 + mu_m / MU_STAR;
    let phi = forms.k.add_diag(&forms.w2.iter().zip(&forms.m).map(|(w, m)| -mu * w + a0 * m).collect::<Vec<_>>());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out =
        NormEquivalence { lower_slack: f64::INFINITY, upper_slack: f64::INFINITY, upper_factor, samples: sample_count };
    for s in 0..sample_count {
        // alternate rough and smooth samples so both ends of the spectrum are probed
        let u: Vec<f64> = if s % 2 == 0 {
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
        } else {
            let modes: Vec<(f64, f64)> = (1..=4).map(|k| (k as f64, rng.random_range(-1.0..1.0))).collect();
            (0..n)
                .map(|i| {
                    let x = (i + 1) as f64 * forms.h;
                    modes.iter().map(|(k, a)| a * (k * std::f64::consts::PI * x).sin()).sum()
                })
                .collect()
        };
        let quad = |d: &[f64]| -> f64 { u.iter().zip(d).map(|(v, w)| v * v * w).sum() };
        let k = forms.k.form(&u);
        let mass = quad(&forms.m);
        let val = phi.form(&u);
        let base = k + a0 * mass;
        let lower = (1.0 - mu_p / MU_STAR) * base + (mu_p / MU_STAR) * a1 * quad(&forms.wgamma);
        let upper = upper_factor * base;
        if val <= 0.0 {
            return Err(Error::PropertyFailure(format!("Phi(u) = {val} is not positive")));
        }
        out.lower_slack = out.lower_slack.min((val - lower) / val);
        out.upper_slack = out.upper_slack.min((upper - val) / val);
    }
    if out.lower_slack < -1e-9 || out.upper_slack < -1e-9 {
        return Err(Error::PropertyFailure(format!(
            "norm equivalence violated: lower slack {}, upper slack {}",
            out.lower_slack, out.upper_slack
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HardyReport {
    pub mu: f64,
    pub gamma: f64,
    pub n: usize,
    pub rayleigh_min: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub a0: f64,
    /// False when no refinement-stable constants were found; the affected
    /// fields are then NaN.
    pub converged: bool,
}

impl HardyReport {
    pub const CSV_HEADER: [&'static str; 10] = ["mu", "gamma", "n", "rayleigh_min", "A1", "A2", "A3", "A4", "A5", "A0"];

    pub fn csv_row(&self) -> Vec<f64> {
        vec![
            self.mu,
            self.gamma,
            self.n as f64,
            self.rayleigh_min,
            self.a1,
            self.a2,
            self.a3,
            self.a4,
            self.a5,
            self.a0,
        ]
    }
}

/// All constants for one `(mu, gamma, n)`.
pub fn hardy_report(n: usize, mu: f64, gamma: f64) -> Result<HardyReport> {
    check_gamma(gamma)?;
    let mesh = Mesh1D::new(n)?;
    let forms = QuadForms::build(&mesh, gamma);
    let rayleigh_min = rayleigh_hardy(&mesh)?;
    let a3 = find_a3(&forms, mu);
    let mut rep = HardyReport {
        mu,
        gamma,
        n,
        rayleigh_min,
        a1: f64::NAN,
        a2: f64::NAN,
        a3,
        a4: f64::NAN,
        a5: f64::NAN,
        a0: f64::NAN,
        converged: false,
    };
    let choice = match select_a1(n, mu, gamma) {
        Ok(c) => c,
        Err(Error::Exhausted(_)) => return Ok(rep),
        Err(e) => return Err(e),
    };
    rep.a1 = choice.a1;
    rep.a2 = choice.a2;
    rep.a0 = compute_a0_gamma(&mesh, gamma, choice.a1)?;
    match find_a4_a5(&mesh, mu, gamma, choice.a1) {
        Ok((a4, a5)) => {
            rep.a4 = a4;
            rep.a5 = a5;
            rep.converged = true;
        }
        Err(Error::Exhausted(_)) => {}
        Err(e) => return Err(e),
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forms_structure() {
        let m = Mesh1D::new(20).unwrap();
        let f = QuadForms::new(&m, 1.5).unwrap();
        for i in 0..20 {
            assert!(f.w2[i] >= 4.0 * f.m[i]);
            assert!(f.wgamma[i] > 0.0);
        }
        // Wg2 <= K since delta^{2-gamma} <= 1
        let diff = f.k.axpy(-1.0, &f.wg2);
        assert!(diff.min_eigenvalue() > 0.0);
        assert!(QuadForms::new(&m, 2.0).is_err());
        assert!(QuadForms::new(&m, 0.0).is_err());
    }

    #[test]
    fn constant_vector_forms() {
        // sum over cells of c (u_{j+1} - u_j)^2 / h: only the two boundary cells contribute
        let m = Mesh1D::new(9).unwrap();
        let f = QuadForms::new(&m, 1.0).unwrap();
        let ones = vec![1.0; 9];
        let k = f.k.form(&ones);
        assert!((k - 2.0 / m.h).abs() < 1e-12);
        let c = (0.5 * m.h).powf(1.0);
        assert!((f.wg2.form(&ones) - 2.0 * c / m.h).abs() < 1e-12);
    }

    #[test]
    fn rayleigh_bounds() {
        let m = Mesh1D::new(100).unwrap();
        let r = rayleigh_hardy(&m).unwrap();
        assert!(r > 0.25 && r < 0.45, "{r}");
        assert!(rayleigh_hardy(&Mesh1D::new(9).unwrap()).is_err());
    }

    #[test]
    fn a2_zero_when_laplacian_dominates() {
        let m = Mesh1D::new(200).unwrap();
        let f = QuadForms::new(&m, 1.5).unwrap();
        assert_eq!(find_a2(&f, 0.0, 1e-6), 0.0);
        // larger A1 needs a positive shift
        assert!(find_a2(&f, 0.25, 64.0) > 0.0);
    }

    #[test]
    fn a3_zero_without_potential() {
        let m = Mesh1D::new(200).unwrap();
        for g in [1.1, 1.5, 1.9] {
            let f = QuadForms::new(&m, g).unwrap();
            assert_eq!(find_a3(&f, 0.0), 0.0);
        }
    }

    #[test]
    fn a2_monotone_in_a1_and_mu() {
        let m = Mesh1D::new(200).unwrap();
        let f = QuadForms::new(&m, 1.5).unwrap();
        let mut prev = 0.0;
        for a1 in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let a2 = find_a2(&f, 0.1, a1);
            assert!(a2 >= prev);
            prev = a2;
        }
        assert!(find_a2(&f, 0.25, 4.0) >= find_a2(&f, 0.0, 4.0));
    }

    #[test]
    fn a0_matches_shift_identity() {
        // lambda_min(S + A M, M) = lambda_min(S, M) + A, so bisection must land on the closed form
        let m = Mesh1D::new(150).unwrap();
        let f = QuadForms::new(&m, 1.5).unwrap();
        for a1 in [1.0, 16.0, 64.0] {
            let a0 = compute_a0_gamma(&m, 1.5, a1).unwrap();
            let direct = find_a2(&f, MU_STAR, a1);
            assert!((a0 - direct).abs() <= 1e-9 * direct.max(1.0), "{a0} vs {direct}");
        }
    }

    #[test]
    fn a0_nondecreasing_in_a1() {
        let m = Mesh1D::new(100).unwrap();
        let vals: Vec<f64> =
            [1e-3, 1.0, 10.0, 100.0, 1e3].iter().map(|&a| compute_a0_gamma(&m, 1.5, a).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0]));
        assert!(vals[4] > 100.0);
    }

    #[test]
    fn norm_equivalence_cases() {
        let m = Mesh1D::new(300).unwrap();
        let f = QuadForms::new(&m, 1.5).unwrap();
        let a1 = 1.0;
        let a0 = compute_a0_gamma(&m, 1.5, a1).unwrap();
        let r = check_norm_equivalence(&f, 0.0, a0, a1, 50, 1).unwrap();
        assert!(r.lower_slack.abs() < 1e-12 && r.upper_slack.abs() < 1e-12);
        let r = check_norm_equivalence(&f, -1.0, a0, a1, 50, 1).unwrap();
        assert_eq!(r.upper_factor, 5.0);
        assert!(r.lower_slack >= 0.0 && r.upper_slack >= 0.0);
        let r = check_norm_equivalence(&f, 0.25, a0, a1, 50, 1).unwrap();
        assert!(r.lower_slack >= -1e-9);
        assert!(check_norm_equivalence(&f, 0.3, a0, a1, 5, 1).is_err());
    }

    #[test]
    fn refinement_rule() {
        assert!(refinement_stable(0.0, 0.0));
        assert!(refinement_stable(1.0, 1.1));
        assert!(!refinement_stable(1.0, 1.3));
        assert!(!refinement_stable(f64::NAN, 1.0));
    }

    #[test]
    fn a4_a5_without_potential() {
        let m = Mesh1D::new(200).unwrap();
        let (a4, a5) = find_a4_a5(&m, 0.0, 1.5, 1e-3).unwrap();
        assert!(a5 >= 0.5);
        assert!(a4 < 1e-6);
        let f = QuadForms::new(&m, 1.5).unwrap();
        assert!(a4_for(&f, 0.0, 1e-3, 0.5) < 1e-6);
    }
}
