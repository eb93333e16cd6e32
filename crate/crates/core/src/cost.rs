//! Optimal stabilization cost
//!
//! ```text
//! J(f) = 1/2 int_Q u^2 + 1/2 int_0^T |f|^2,     f supported in omega,
//! ```
//!
//! for the regularized operator started from its ground state, and the
//! lower bound obtained by projecting the dynamics on that ground state.

use serde::Serialize;

use crate::cg::{self, CgOptions};
use crate::mesh::{Mesh1D, RegionMasks};
use crate::operator::{assemble, ControlTrajectory, OperatorSpec, Propagator, Regularization, TimeGrid};
use crate::spectral::ground_state_of;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CostProblem {
    pub mu: f64,
    pub eps: f64,
    pub t_final: f64,
    pub nt: usize,
    /// Defaults to the unit ground state of the regularized operator.
    pub u0: Option<Vec<f64>>,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl CostProblem {
    pub fn new(mu: f64, eps: f64, t_final: f64, nt: usize) -> Self {
        Self { mu, eps, t_final, nt, u0: None, cg_tol: 1e-8, cg_max_iter: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostResult {
    pub mu: f64,
    pub eps: f64,
    pub t_final: f64,
    pub lambda0: f64,
    /// `|phi0|_{L2(omega)}`.
    pub phi0_omega: f64,
    pub j_opt: f64,
    /// Cost of the uncontrolled run.
    pub j_free: f64,
    /// `None` when `lambda0 >= 0`.
    pub analytic_lower: Option<f64>,
    pub cg_iters: usize,
    pub converged: bool,
    /// `rho^k = <u^k, phi0>` for `k = 0..=nt`.
    pub rho: Vec<f64>,
    /// `zeta^k = <f^k, phi0>` for `k = 0..nt`.
    pub zeta: Vec<f64>,
    /// `J` after each CG iteration.
    pub j_history: Vec<f64>,
    #[serde(skip)]
    pub control: ControlTrajectory,
    #[serde(skip)]
    pub phi0: Vec<f64>,
    #[serde(skip)]
    pub eig_residual: f64,
}

/// Trapezoid weight of level `k` out of `0..=nt`.
fn trap(k: usize, nt: usize) -> f64 {
    if k == 0 || k == nt {
        0.5
    } else {
        1.0
    }
}

/// Discrete `J` of a control and its trajectory.
pub fn cost_value(mesh: &Mesh1D, tg: TimeGrid, traj: &[Vec<f64>], f: Option<&ControlTrajectory>) -> f64 {
    let state: f64 = traj.iter().enumerate().map(|(k, u)| trap(k, tg.nt) * mesh.inner(u, u)).sum::<f64>() * tg.dt;
    let ctrl: f64 = f.map_or(0.0, |f| f.iter().map(|fk| mesh.inner(fk, fk)).sum::<f64>() * tg.dt);
    0.5 * (state + ctrl)
}

/// Lower bound on the optimal cost from the projected dynamics, written
/// in terms of the growth rate `g = -lambda0 > 0`:
///
/// ```text
/// min{ (e^{2gT} - 1) / (16 g),  g (1 - e^{-2gT}) / (4 |phi0|^2_omega) }
/// ```
pub fn analytic_lower_bound(lambda0: f64, phi0_l2_omega: f64, t_final: f64) -> Result<f64> {
    if !(lambda0 < 0.0) {
        return Err(Error::NotApplicable(format!("bound needs lambda0 < 0, got {lambda0}")));
    }
    let g = -lambda0;
    let first = (2.0 * g * t_final).exp_m1() / (16.0 * g);
    let w = phi0_l2_omega * phi0_l2_omega;
    let second = if w > 0.0 { g * -(-2.0 * g * t_final).exp_m1() / (4.0 * w) } else { f64::INFINITY };
    Ok(first.min(second))
}

pub fn minimize_cost(mesh: &Mesh1D, masks: &RegionMasks, p: &CostProblem) -> Result<CostResult> {
    if !(p.eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {}", p.eps)));
    }
    if mesh.h > p.eps / 10.0 {
        return Err(Error::UnderResolved { h: mesh.h, limit: p.eps / 10.0 });
    }
    let tg = TimeGrid::new(p.t_final, p.nt)?;
    let op = assemble(OperatorSpec::new(p.mu, Regularization::Quadratic(p.eps)), mesh)?;
    let (lambda0, phi0, eig_residual) = ground_state_of(&op, mesh)?;
    let u0 = match &p.u0 {
        Some(u) if u.len() != mesh.n => {
            return Err(Error::Dimension(format!("u0 has {} entries, mesh has {}", u.len(), mesh.n)))
        }
        Some(u) => u.clone(),
        None => phi0.clone(),
    };
    let prop = Propagator::new(&op, tg)?;
    let n = mesh.n;
    let nt = tg.nt;
    let dt = tg.dt;
    let om = &masks.omega;
    let m = om.len();

    let scatter = |x: &[f64]| -> ControlTrajectory {
        (0..nt)
            .map(|k| {
                let mut fk = vec![0.0; n];
                for (j, &i) in om.iter().enumerate() {
                    fk[i] = x[k * m + j];
                }
                fk
            })
            .collect()
    };
    // S^dagger y with y given at levels 1..=nt (index 0 ignored)
    let adjoint = |y: &[Vec<f64>]| -> Vec<f64> {
        let mut out = vec![0.0; nt * m];
        let mut z = vec![0.0; n];
        for j in (1..=nt).rev() {
            let w = trap(j, nt);
            for i in 0..n {
                z[i] += w * y[j][i];
            }
            prop.step(&mut z, None);
            let k = j - 1;
            for (jj, &i) in om.iter().enumerate() {
                out[k * m + jj] = dt * z[i];
            }
        }
        out
    };

    let free = prop.forward(&u0, None);
    let j_free = cost_value(mesh, tg, &free, None);
    let b: Vec<f64> = adjoint(&free).iter().map(|v| -v).collect();
    let zero = vec![0.0; n];
    let apply = |x: &[f64]| -> Vec<f64> {
        let f = scatter(x);
        let u = prop.forward(&zero, Some(&f));
        let s = adjoint(&u);
        x.iter().zip(&s).map(|(a, b)| a + b).collect()
    };
    let out = cg::solve(apply, &b, cg::dot, CgOptions { tol: p.cg_tol, max_iter: p.cg_max_iter });

    let f = scatter(&out.x);
    let traj = prop.forward(&u0, Some(&f));
    let j_opt = cost_value(mesh, tg, &traj, Some(&f));
    let c = dt * mesh.h;
    let j_history = out.energy.iter().map(|e| j_free + c * e).collect();

    let phi0_omega = (om.iter().map(|&i| phi0[i] * phi0[i]).sum::<f64>() * mesh.h).sqrt();
    let analytic_lower = analytic_lower_bound(lambda0, phi0_omega, p.t_final).ok();
    let rho = traj.iter().map(|u| mesh.inner(u, &phi0)).collect();
    let zeta = f.iter().map(|fk| mesh.inner(fk, &phi0)).collect();

    Ok(CostResult {
        mu: p.mu,
        eps: p.eps,
        t_final: p.t_final,
        lambda0,
        phi0_omega,
        j_opt,
        j_free,
        analytic_lower,
        cg_iters: out.iterations,
        converged: out.converged,
        rho,
        zeta,
        j_history,
        control: f,
        phi0,
        eig_residual,
    })
}

/// `sum_k |rho^{k+1} - rho^k + dt lambda0 rho^{k+1} - dt zeta^k|`.
pub fn verify_duhamel(result: &CostResult, tg: TimeGrid) -> Result<f64> {
    if result.rho.len() != tg.nt + 1 || result.zeta.len() != tg.nt {
        return Err(Error::Dimension("projected trajectories do not match the time grid".into()));
    }
    let dt = tg.dt;
    Ok((0..tg.nt)
        .map(|k| {
            let (a, b) = (result.rho[k], result.rho[k + 1]);
            (b - a + dt * result.lambda0 * b - dt * result.zeta[k]).abs()
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_regions, Interval};

    fn masks(mesh: &Mesh1D) -> RegionMasks {
        build_regions(mesh, Interval::new(0.3, 0.7), Interval::new(0.4, 0.6), 0.1).unwrap()
    }

    #[test]
    fn bound_closed_form() {
        let b = analytic_lower_bound(-10.0, 0.1f64.sqrt(), 1.0).unwrap();
        let first = (20f64.exp() - 1.0) / 160.0;
        let second = 10.0 * (1.0 - (-20f64).exp()) / 0.4;
        assert!((b - first.min(second)).abs() <= 1e-12 * b);
        assert_eq!(b, second);
        // small growth: first term tends to T/8, second to 0
        let b = analytic_lower_bound(-1e-9, 0.0, 2.0).unwrap();
        assert!((b - 0.25).abs() < 1e-6);
        assert!(analytic_lower_bound(-1e-9, 1.0, 2.0).unwrap() < 1e-15);
        assert!(matches!(analytic_lower_bound(0.0, 1.0, 1.0), Err(Error::NotApplicable(_))));
        // empty support leaves only the first term
        let b = analytic_lower_bound(-2.0, 0.0, 1.0).unwrap();
        assert!((b - (4f64.exp() - 1.0) / 32.0).abs() < 1e-12);
    }

    #[test]
    fn empty_control_gives_free_cost() {
        let m = Mesh1D::new(200).unwrap();
        let r = masks(&m).with_empty_control();
        let res = minimize_cost(&m, &r, &CostProblem::new(0.5, 0.1, 0.5, 50)).unwrap();
        assert_eq!(res.cg_iters, 0);
        assert_eq!(res.j_opt, res.j_free);
    }

    #[test]
    fn laplacian_below_free_value() {
        let m = Mesh1D::new(200).unwrap();
        let r = masks(&m);
        let res = minimize_cost(&m, &r, &CostProblem::new(0.0, 0.1, 1.0, 400)).unwrap();
        assert!(res.converged);
        let pi2 = std::f64::consts::PI.powi(2);
        let free_exact = 0.5 * (1.0 - (-2.0 * pi2).exp()) / (2.0 * pi2);
        assert!(res.j_opt <= res.j_free);
        assert!(res.j_opt <= free_exact * 1.02);
        assert!(res.j_history.windows(2).all(|w| w[1] <= w[0] + 1e-14 * w[0].abs()));
    }

    #[test]
    fn history_ends_at_optimum() {
        let m = Mesh1D::new(300).unwrap();
        let r = masks(&m);
        let res = minimize_cost(&m, &r, &CostProblem::new(0.5, 0.05, 0.5, 100)).unwrap();
        let last = *res.j_history.last().unwrap();
        assert!((last - res.j_opt).abs() <= 1e-8 * res.j_opt);
    }

    #[test]
    fn full_control_is_cheaper() {
        let m = Mesh1D::new(300).unwrap();
        let r = masks(&m);
        let p = CostProblem::new(0.5, 0.05, 0.5, 100);
        let part = minimize_cost(&m, &r, &p).unwrap();
        let full = minimize_cost(&m, &r.clone().with_full_control(), &p).unwrap();
        assert!(full.j_opt <= part.j_opt * (1.0 + 1e-9));
    }

    #[test]
    fn duhamel_projection() {
        let m = Mesh1D::new(400).unwrap();
        let r = masks(&m);
        let p = CostProblem::new(0.5, 0.05, 0.5, 100);
        let res = minimize_cost(&m, &r, &p).unwrap();
        let tg = TimeGrid::new(0.5, 100).unwrap();
        assert!(verify_duhamel(&res, tg).unwrap() <= 1e-9 * 100.0);

        // no control: rho follows the discrete exponential
        let empty = r.with_empty_control();
        let res = minimize_cost(&m, &empty, &p).unwrap();
        let g = 1.0 / (1.0 + tg.dt * res.lambda0);
        for (k, rho) in res.rho.iter().enumerate() {
            assert!((rho - g.powi(k as i32)).abs() < 1e-9 * g.powi(k as i32).max(1.0));
        }
    }

    #[test]
    fn resolution_guard() {
        let m = Mesh1D::new(100).unwrap();
        let r = masks(&m);
        assert!(matches!(
            minimize_cost(&m, &r, &CostProblem::new(0.5, 0.05, 0.5, 10)),
            Err(Error::UnderResolved { .. })
        ));
    }
}
