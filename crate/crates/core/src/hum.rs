//! Penalized HUM null controls and observability estimates.
//!
//! The Gramian maps terminal adjoint data to the state it steers from rest:
//! `Lambda v_T = u_f(T)` with `f = v 1_omega`. Its quadratic form is the
//! observed energy `sum_k dt int_omega (v^k)^2`, so it is symmetric and
//! positive semidefinite at the discrete level.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cg::{self, CgOptions};
use crate::mesh::{Mesh1D, RegionMasks};
use crate::operator::{assemble, ControlTrajectory, OperatorSpec, Propagator, TimeGrid};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct HumProblem {
    pub mesh: Mesh1D,
    pub spec: OperatorSpec,
    pub tg: TimeGrid,
    pub masks: RegionMasks,
    pub u0: Vec<f64>,
    pub penalty: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl HumProblem {
    pub fn new(mesh: Mesh1D, spec: OperatorSpec, tg: TimeGrid, masks: RegionMasks, u0: Vec<f64>, penalty: f64) -> Self {
        Self { mesh, spec, tg, masks, u0, penalty, cg_tol: 1e-10, cg_max_iter: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HumResult {
    #[serde(skip)]
    pub v_t_star: Vec<f64>,
    /// `f^k = v^k 1_omega` for `k = 0..nt`.
    #[serde(skip)]
    pub control: ControlTrajectory,
    #[serde(skip)]
    pub final_state: Vec<f64>,
    pub u0_norm: f64,
    pub final_norm: f64,
    /// `sum_k dt int_omega (f^k)^2`.
    pub control_cost: f64,
    /// Smallest `<Lambda p, p> / <p, p>` over the CG search directions.
    pub gram_min_eig_est: f64,
    pub cg_iters: usize,
    pub converged: bool,
    /// `|(Lambda + penalty) v_T + u_free(T)|`.
    pub el_residual: f64,
    /// `|u_free(T)|`, the scale of `el_residual`.
    pub el_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservabilityEstimate {
    /// Largest `|v(0)|^2 / <Lambda v_T, v_T>` found.
    pub c_t_est: f64,
    pub iterations: usize,
    /// The ratio became numerically unbounded (Gramian null direction).
    pub unbounded: bool,
    #[serde(skip)]
    pub witness: Vec<f64>,
    /// Ratio after each outer iteration.
    pub history: Vec<f64>,
}

/// Assembled propagator plus the problem data.
pub struct Hum<'a> {
    pub p: &'a HumProblem,
    prop: Propagator,
}

impl<'a> Hum<'a> {
    pub fn new(p: &'a HumProblem) -> Result<Self> {
        let n = p.mesh.n;
        if p.u0.len() != n {
            return Err(Error::Dimension(format!("u0 has {} entries, mesh has {n}", p.u0.len())));
        }
        if !(p.penalty >= 0.0) {
            return Err(Error::InvalidParameter(format!("penalty must be >= 0, got {}", p.penalty)));
        }
        if p.u0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("u0 must be finite".into()));
        }
        let op = assemble(p.spec, &p.mesh)?;
        Ok(Self { p, prop: Propagator::new(&op, p.tg)? })
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.p.mesh.inner(a, b)
    }

    /// Adjoint levels `v^0..v^nt`.
    pub fn adjoint(&self, v_t: &[f64]) -> Vec<Vec<f64>> {
        self.prop.adjoint(v_t)
    }

    /// `f^k = v^k 1_omega`, `k = 0..nt`.
    pub fn control_of(&self, v: &[Vec<f64>]) -> ControlTrajectory {
        let ind = self.p.masks.omega_indicator();
        v[..self.p.tg.nt].iter().map(|vk| vk.iter().zip(&ind).map(|(a, b)| a * b).collect()).collect()
    }

    pub fn gramian_apply(&self, v_t: &[f64]) -> Vec<f64> {
        let v = self.adjoint(v_t);
        let f = self.control_of(&v);
        self.prop.forward_final(&vec![0.0; v_t.len()], Some(&f))
    }

    /// `sum_k dt int_omega (v^k)^2` for the adjoint started at `v_t`.
    pub fn observed_energy(&self, v_t: &[f64]) -> f64 {
        let v = self.adjoint(v_t);
        self.control_energy(&self.control_of(&v))
    }

    pub fn control_energy(&self, f: &ControlTrajectory) -> f64 {
        f.iter().map(|fk| self.inner(fk, fk)).sum::<f64>() * self.p.tg.dt
    }

    /// `v(0)` from `v_T`.
    pub fn observe_initial(&self, v_t: &[f64]) -> Vec<f64> {
        let mut v = v_t.to_vec();
        for _ in 0..self.p.tg.nt {
            self.prop.step(&mut v, None);
        }
        v
    }

    pub fn free_final(&self) -> Vec<f64> {
        self.prop.forward_final(&self.p.u0, None)
    }

    pub fn solve(&self) -> HumResult {
        let p = self.p;
        let n = p.mesh.n;
        let u_free = self.free_final();
        let rhs: Vec<f64> = u_free.iter().map(|v| -v).collect();
        let mut min_ray = f64::INFINITY;
        let apply = |x: &[f64]| -> Vec<f64> {
            let g = self.gramian_apply(x);
            let xx = self.inner(x, x);
            if xx > 0.0 {
                min_ray = min_ray.min(self.inner(&g, x) / xx);
            }
            g.iter().zip(x).map(|(a, b)| a + p.penalty * b).collect()
        };
        let out = cg::solve(apply, &rhs, |a, b| self.inner(a, b), CgOptions { tol: p.cg_tol, max_iter: p.cg_max_iter });
        let v_t = out.x;
        let v = self.adjoint(&v_t);
        let control = self.control_of(&v);
        let final_state = self.prop.forward_final(&p.u0, Some(&control));
        let lam_v = self.gramian_apply(&v_t);
        let el: Vec<f64> = (0..n).map(|i| lam_v[i] + p.penalty * v_t[i] + u_free[i]).collect();
        HumResult {
            u0_norm: p.mesh.norm(&p.u0),
            final_norm: p.mesh.norm(&final_state),
            control_cost: self.control_energy(&control),
            gram_min_eig_est: min_ray,
            cg_iters: out.iterations,
            converged: out.converged,
            el_residual: p.mesh.norm(&el),
            el_scale: p.mesh.norm(&u_free),
            v_t_star: v_t,
            control,
            final_state,
        }
    }

    /// Worst `|<La, b> - <a, Lb>| / (|La||b| + |a||Lb|)` over random pairs.
    pub fn symmetry_defect(&self, samples: usize, seed: u64) -> f64 {
        let n = self.p.mesh.n;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let la = self.gramian_apply(&a);
            let lb = self.gramian_apply(&b);
            let m = &self.p.mesh;
            let scale = m.norm(&la) * m.norm(&b) + m.norm(&a) * m.norm(&lb);
            if scale > 0.0 {
                worst = worst.max((self.inner(&la, &b) - self.inner(&a, &lb)).abs() / scale);
            }
        }
        worst
    }

    /// Power iteration for the largest `|v(0)|^2 / <Lambda x, x>`, i.e. the top
    /// eigenvalue of `Lambda^{-1} B^* B` with `B x = v(0)`. Each step solves
    /// with the Gramian by an inner CG.
    pub fn estimate_ct(&self, iters: usize, seed: u64) -> Result<ObservabilityEstimate> {
        if iters < 10 {
            return Err(Error::InvalidParameter(format!("need at least 10 iterations, got {iters}")));
        }
        let n = self.p.mesh.n;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut best = 0.0;
        let mut witness = x.clone();
        let mut history = Vec::with_capacity(iters);
        let mut unbounded = false;
        for _ in 0..iters {
            let bx = self.observe_initial(&x);
            let num = self.inner(&bx, &bx);
            let den = self.inner(&self.gramian_apply(&x), &x);
            let ratio = if den > 0.0 { num / den } else { f64::INFINITY };
            history.push(ratio);
            if !ratio.is_finite() || ratio > 1e14 {
                unbounded = true;
                best = f64::INFINITY;
                witness = x.clone();
                break;
            }
            if ratio > best {
                best = ratio;
                witness = x.clone();
            }
            // B^* = B since every step solves with the same symmetric matrix
            let bbx = self.observe_initial(&bx);
            // near convergence Lambda^{-1} B^* B x is close to ratio * x
            let out = cg::solve_from(
                |y| self.gramian_apply(y),
                &bbx,
                x.iter().map(|v| ratio * v).collect(),
                |a, b| self.inner(a, b),
                CgOptions { tol: 1e-10, max_iter: 200 },
            );
            let norm = self.p.mesh.norm(&out.x);
            if !(norm > 0.0 && norm.is_finite()) {
                break;
            }
            x = out.x.iter().map(|v| v / norm).collect();
        }
        Ok(ObservabilityEstimate { c_t_est: best, iterations: history.len(), unbounded, witness, history })
    }
}

pub fn gramian_apply(p: &HumProblem, v_t: &[f64]) -> Result<Vec<f64>> {
    Ok(Hum::new(p)?.gramian_apply(v_t))
}

pub fn solve_hum(p: &HumProblem) -> Result<HumResult> {
    Ok(Hum::new(p)?.solve())
}

pub fn estimate_ct(p: &HumProblem, iters: usize, seed: u64) -> Result<ObservabilityEstimate> {
    Hum::new(p)?.estimate_ct(iters, seed)
}
