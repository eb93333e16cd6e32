//! Regularized singular operator `A = -d^2/dx^2 - V` and the controlled /
//! adjoint time steppers.
//!
//! Implicit Euler with the source of step `k` entering at level `k + 1`:
//!
//! ```text
//! (I + dt A) u^{k+1} = u^k + dt f^k,        k = 0..nt-1
//! (I + dt A) v^k     = v^{k+1},             v^nt = v_T
//! ```
//!
//! With `A` symmetric the second recurrence is the exact transpose of the
//! first, so `<u^nt, v_T> = <u^0, v^0> + sum_k dt <f^k, v^k>` holds to
//! round-off for any data.

use serde::{Deserialize, Serialize};

use crate::mesh::{Mesh1D, RegionMasks};
use crate::tridiag::{SymTridiag, TridiagFactor};
use crate::{Error, Result};

/// How the inverse-square potential is tamed near the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "param", rename_all = "lowercase")]
pub enum Regularization {
    /// `mu / delta^2`, evaluated at nodes (always finite on a uniform mesh).
    None,
    /// `mu / (delta + 1/m)^2`.
    Shift(f64),
    /// `mu / (delta^2 + eps^2)`.
    Quadratic(f64),
}

impl Regularization {
    pub fn label(&self) -> String {
        match self {
            Regularization::None => "raw".to_string(),
            Regularization::Shift(m) => format!("shift({m})"),
            Regularization::Quadratic(e) => format!("quadratic({e})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub mu: f64,
    pub reg: Regularization,
}

impl OperatorSpec {
    pub fn new(mu: f64, reg: Regularization) -> Self {
        Self { mu, reg }
    }

    pub fn raw(mu: f64) -> Self {
        Self::new(mu, Regularization::None)
    }

    pub fn potential_at(&self, delta: f64) -> f64 {
        match self.reg {
            Regularization::None => self.mu / (delta * delta),
            Regularization::Shift(m) => self.mu / (delta + 1.0 / m).powi(2),
            Regularization::Quadratic(eps) => self.mu / (delta * delta + eps * eps),
        }
    }

    pub fn potential(&self, mesh: &Mesh1D) -> Vec<f64> {
        mesh.delta.iter().map(|&d| self.potential_at(d)).collect()
    }

    fn validate(&self, mesh: &Mesh1D) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::InvalidParameter(format!("mu must be finite, got {}", self.mu)));
        }
        match self.reg {
            Regularization::Shift(m) if !(m > 0.0) => {
                Err(Error::InvalidParameter(format!("shift parameter m must be positive, got {m}")))
            }
            Regularization::Quadratic(e) if !(e > 0.0) => {
                Err(Error::InvalidParameter(format!("eps must be positive, got {e}")))
            }
            Regularization::None if mesh.delta.iter().any(|&d| d < mesh.h * (1.0 - 1e-12)) => {
                Err(Error::InvalidParameter("raw potential needs delta >= h at every node".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Assembled `A = -Δ_h - V` on interior nodes (Dirichlet).
#[derive(Debug, Clone)]
pub struct TridiagOperator {
    pub spec: OperatorSpec,
    pub h: f64,
    pub potential: Vec<f64>,
    pub matrix: SymTridiag,
}

impl TridiagOperator {
    pub fn n(&self) -> usize {
        self.potential.len()
    }

    /// True when the unregularized potential was used.
    pub fn is_raw(&self) -> bool {
        matches!(self.spec.reg, Regularization::None)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.matvec(x)
    }
}

pub fn assemble(spec: OperatorSpec, mesh: &Mesh1D) -> Result<TridiagOperator> {
    spec.validate(mesh)?;
    let h2 = mesh.h * mesh.h;
    let potential = spec.potential(mesh);
    let diag = potential.iter().map(|v| 2.0 / h2 - v).collect();
    let off = vec![-1.0 / h2; mesh.n - 1];
    Ok(TridiagOperator { spec, h: mesh.h, potential, matrix: SymTridiag::new(diag, off) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_final: f64,
    pub nt: usize,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(t_final: f64, nt: usize) -> Result<Self> {
        if nt < 2 {
            return Err(Error::InvalidParameter(format!("need nt >= 2, got {nt}")));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!("T must be positive, got {t_final}")));
        }
        Ok(Self { t_final, nt, dt: t_final / nt as f64 })
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.nt).map(|k| self.time(k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    ImplicitEuler,
    /// Forward runs only; the adjoint is defined for implicit Euler.
    CrankNicolson,
}

/// States at levels `0..=nt`.
pub type Trajectory = Vec<Vec<f64>>;

/// Sources for steps `0..nt`; entry `k` enters level `k + 1`.
pub type ControlTrajectory = Vec<Vec<f64>>;

/// Factored `I + dt A`, reused for every step of both directions.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub tg: TimeGrid,
    factor: TridiagFactor,
    n: usize,
}

impl Propagator {
    pub fn new(op: &TridiagOperator, tg: TimeGrid) -> Result<Self> {
        let n = op.n();
        let id = SymTridiag::new(vec![1.0; n], vec![0.0; n - 1]);
        let b = id.axpy(tg.dt, &op.matrix);
        let factor = TridiagFactor::new(&b).map_err(|(row, pivot)| Error::SolverBreakdown { step: 1, row, pivot })?;
        Ok(Self { tg, factor, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// One implicit step `u <- (I + dt A)^{-1}(u + dt f)`.
    pub fn step(&self, u: &mut [f64], f: Option<&[f64]>) {
        if let Some(f) = f {
            for (ui, fi) in u.iter_mut().zip(f) {
                *ui += self.tg.dt * fi;
            }
        }
        self.factor.solve_in_place(u);
    }

    pub fn forward(&self, u0: &[f64], f: Option<&ControlTrajectory>) -> Trajectory {
        let mut traj = Vec::with_capacity(self.tg.nt + 1);
        let mut u = u0.to_vec();
        traj.push(u.clone());
        for k in 0..self.tg.nt {
            self.step(&mut u, f.map(|f| f[k].as_slice()));
            traj.push(u.clone());
        }
        traj
    }

    /// Final state only.
    pub fn forward_final(&self, u0: &[f64], f: Option<&ControlTrajectory>) -> Vec<f64> {
        let mut u = u0.to_vec();
        for k in 0..self.tg.nt {
            self.step(&mut u, f.map(|f| f[k].as_slice()));
        }
        u
    }

    pub fn adjoint(&self, v_t: &[f64]) -> Trajectory {
        let nt = self.tg.nt;
        let mut traj = vec![Vec::new(); nt + 1];
        let mut v = v_t.to_vec();
        traj[nt] = v.clone();
        for k in (0..nt).rev() {
            self.factor.solve_in_place(&mut v);
            traj[k] = v.clone();
        }
        traj
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Dimension(format!("{what}: expected {want}, got {got}")));
    }
    Ok(())
}

fn masked(f: &ControlTrajectory, mask: &RegionMasks) -> ControlTrajectory {
    f.iter().map(|fk| fk.iter().enumerate().map(|(i, v)| if mask.in_omega(i) { *v } else { 0.0 }).collect()).collect()
}

/// Controlled forward run; `f` is restricted to the control region.
pub fn step_forward(
    op: &TridiagOperator,
    tg: TimeGrid,
    u0: &[f64],
    f: Option<&ControlTrajectory>,
    mask: &RegionMasks,
) -> Result<Trajectory> {
    step_forward_with(op, tg, u0, f, mask, Scheme::ImplicitEuler)
}

pub fn step_forward_with(
    op: &TridiagOperator,
    tg: TimeGrid,
    u0: &[f64],
    f: Option<&ControlTrajectory>,
    mask: &RegionMasks,
    scheme: Scheme,
) -> Result<Trajectory> {
    let n = op.n();
    check_len("initial datum", u0.len(), n)?;
    if let Some(f) = f {
        check_len("control time levels", f.len(), tg.nt)?;
        for fk in f {
            check_len("control nodes", fk.len(), n)?;
        }
    }
    let fm = f.map(|f| masked(f, mask));
    match scheme {
        Scheme::ImplicitEuler => Ok(Propagator::new(op, tg)?.forward(u0, fm.as_ref())),
        Scheme::CrankNicolson => crank_nicolson(op, tg, u0, fm.as_ref()),
    }
}

fn crank_nicolson(op: &TridiagOperator, tg: TimeGrid, u0: &[f64], f: Option<&ControlTrajectory>) -> Result<Trajectory> {
    let n = op.n();
    let id = SymTridiag::new(vec![1.0; n], vec![0.0; n - 1]);
    let lhs = id.axpy(0.5 * tg.dt, &op.matrix);
    let rhs = id.axpy(-0.5 * tg.dt, &op.matrix);
    let factor = TridiagFactor::new(&lhs).map_err(|(row, pivot)| Error::SolverBreakdown { step: 1, row, pivot })?;
    let mut traj = Vec::with_capacity(tg.nt + 1);
    let mut u = u0.to_vec();
    traj.push(u.clone());
    for k in 0..tg.nt {
        let mut next = rhs.matvec(&u);
        if let Some(f) = f {
            for (a, b) in next.iter_mut().zip(&f[k]) {
                *a += tg.dt * b;
            }
        }
        factor.solve_in_place(&mut next);
        u = next;
        traj.push(u.clone());
    }
    Ok(traj)
}

/// Backward adjoint run, the exact transpose of [`step_forward`].
pub fn step_adjoint(op: &TridiagOperator, tg: TimeGrid, v_t: &[f64]) -> Result<Trajectory> {
    check_len("terminal datum", v_t.len(), op.n())?;
    Ok(Propagator::new(op, tg)?.adjoint(v_t))
}

/// Residual of the discrete duality identity with its natural scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityCheck {
    pub residual: f64,
    pub scale: f64,
}

impl DualityCheck {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.residual
        } else {
            self.residual / self.scale
        }
    }
}

/// `|<u(T), v_T> - sum_k dt <f^k, v^k>_omega - <u_0, v(0)>|`.
#[allow(clippy::too_many_arguments)]
pub fn check_duality(
    mesh: &Mesh1D,
    u_traj: &Trajectory,
    v_traj: &Trajectory,
    f: Option<&ControlTrajectory>,
    u0: &[f64],
    v_t: &[f64],
    mask: &RegionMasks,
    tg: TimeGrid,
) -> Result<DualityCheck> {
    check_len("state levels", u_traj.len(), tg.nt + 1)?;
    check_len("adjoint levels", v_traj.len(), tg.nt + 1)?;
    let n = mesh.n;
    for (name, v) in [("u0", u0), ("vT", v_t)] {
        check_len(name, v.len(), n)?;
    }
    if u_traj.iter().chain(v_traj).any(|v| v.len() != n) {
        return Err(Error::Dimension("trajectory node count differs from mesh".into()));
    }
    let u_t = &u_traj[tg.nt];
    let lhs = mesh.inner(u_t, v_t);
    let init = mesh.inner(u0, &v_traj[0]);
    let mut src = 0.0;
    let mut scale = mesh.norm(u_t) * mesh.norm(v_t) + mesh.norm(u0) * mesh.norm(&v_traj[0]);
    if let Some(f) = f {
        check_len("control levels", f.len(), tg.nt)?;
        for (k, fk) in f.iter().enumerate() {
            check_len("control nodes", fk.len(), n)?;
            let vk = &v_traj[k];
            let s: f64 = mask.omega.iter().map(|&i| fk[i] * vk[i]).sum::<f64>() * mesh.h;
            src += tg.dt * s;
            scale += tg.dt * mesh.norm(fk) * mesh.norm(vk);
        }
    }
    Ok(DualityCheck { residual: (lhs - src - init).abs(), scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, build_regions, Interval};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn regions(mesh: &Mesh1D) -> RegionMasks {
        build_regions(mesh, Interval::new(0.3, 0.7), Interval::new(0.4, 0.6), 0.1).unwrap()
    }

    #[test]
    fn assembly_values() {
        let m = build_mesh(3).unwrap();
        let op = assemble(OperatorSpec::raw(0.0), &m).unwrap();
        assert_eq!(op.matrix.diag, vec![32.0; 3]);
        assert_eq!(op.matrix.off, vec![-16.0; 2]);

        let s = OperatorSpec::new(0.25, Regularization::Quadratic(0.1));
        assert!((s.potential_at(0.25) - 3.4483).abs() < 1e-4);
        let s = OperatorSpec::new(0.25, Regularization::Shift(10.0));
        assert!((s.potential_at(0.2) - 2.7778).abs() < 1e-4);
    }

    #[test]
    fn potential_symmetric() {
        let m = build_mesh(50).unwrap();
        for reg in [Regularization::None, Regularization::Shift(7.0), Regularization::Quadratic(0.03)] {
            let v = OperatorSpec::new(0.3, reg).potential(&m);
            for i in 0..50 {
                assert_eq!(v[i], v[49 - i]);
            }
        }
    }

    #[test]
    fn bad_regularization_rejected() {
        let m = build_mesh(10).unwrap();
        assert!(assemble(OperatorSpec::new(0.1, Regularization::Quadratic(0.0)), &m).is_err());
        assert!(assemble(OperatorSpec::new(0.1, Regularization::Shift(-1.0)), &m).is_err());
    }

    #[test]
    fn free_heat_decay_matches_exponential() {
        let m = build_mesh(500).unwrap();
        let op = assemble(OperatorSpec::raw(0.0), &m).unwrap();
        let tg = TimeGrid::new(0.1, 2000).unwrap();
        let u0: Vec<f64> = m.nodes.iter().map(|x| (PI * x).sin()).collect();
        let traj = step_forward(&op, tg, &u0, None, &regions(&m)).unwrap();
        let ratio = m.norm(&traj[tg.nt]) / m.norm(&u0);
        let exact = (-PI * PI * 0.1).exp();
        assert!((ratio / exact - 1.0).abs() < 0.02, "{ratio} vs {exact}");
    }

    #[test]
    fn zero_data_zero_trajectory() {
        let m = build_mesh(20).unwrap();
        let op = assemble(OperatorSpec::raw(0.25), &m).unwrap();
        let tg = TimeGrid::new(0.5, 10).unwrap();
        let f = vec![vec![0.0; 20]; 10];
        let traj = step_forward(&op, tg, &[0.0; 20], Some(&f), &regions(&m)).unwrap();
        assert!(traj.iter().flatten().all(|&v| v == 0.0));
        let adj = step_adjoint(&op, tg, &[0.0; 20]).unwrap();
        assert!(adj.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_heat_matches_exponential() {
        let m = build_mesh(500).unwrap();
        let op = assemble(OperatorSpec::raw(0.0), &m).unwrap();
        let tg = TimeGrid::new(0.1, 2000).unwrap();
        let vt: Vec<f64> = m.nodes.iter().map(|x| (PI * x).sin()).collect();
        let adj = step_adjoint(&op, tg, &vt).unwrap();
        let decay = (-PI * PI * 0.1).exp();
        let err: Vec<f64> = adj[0].iter().zip(&vt).map(|(a, b)| a - decay * b).collect();
        assert!(m.norm(&err) / (decay * m.norm(&vt)) < 0.02);
    }

    #[test]
    fn supercritical_ground_state_grows() {
        let m = build_mesh(400).unwrap();
        let spec = OperatorSpec::new(0.5, Regularization::Quadratic(0.005));
        let op = assemble(spec, &m).unwrap();
        let (lambda, phi) = op.matrix.eigenpair(0).unwrap();
        assert!(lambda < 0.0);
        let tg = TimeGrid::new(0.2, 100).unwrap();
        let traj = step_forward(&op, tg, &phi, None, &regions(&m)).unwrap();
        let norms: Vec<f64> = traj.iter().map(|u| m.norm(u)).collect();
        assert!(norms.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn duality_exact_for_random_data() {
        let m = build_mesh(200).unwrap();
        let r = regions(&m);
        let op = assemble(OperatorSpec::new(0.25, Regularization::Shift(201.0)), &m).unwrap();
        let tg = TimeGrid::new(0.5, 500).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rv = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let u0 = rv(200);
        let vt = rv(200);
        let f: ControlTrajectory = (0..500).map(|_| rv(200)).collect();
        let u = step_forward(&op, tg, &u0, Some(&f), &r).unwrap();
        let v = step_adjoint(&op, tg, &vt).unwrap();
        let d = check_duality(&m, &u, &v, Some(&f), &u0, &vt, &r, tg).unwrap();
        assert!(d.relative() <= 1e-11, "{:?}", d);

        // no control, trivial data
        let d = check_duality(&m, &u, &v, None, &u0, &vt, &r, tg);
        assert!(d.is_ok());
        let zero = vec![0.0; 200];
        let u = step_forward(&op, tg, &zero, Some(&f), &r).unwrap();
        let v = step_adjoint(&op, tg, &zero).unwrap();
        let d = check_duality(&m, &u, &v, Some(&f), &zero, &zero, &r, tg).unwrap();
        assert_eq!(d.residual, 0.0);
    }

    #[test]
    fn duality_dimension_mismatch() {
        let m = build_mesh(20).unwrap();
        let r = regions(&m);
        let op = assemble(OperatorSpec::raw(0.0), &m).unwrap();
        let tg = TimeGrid::new(0.5, 10).unwrap();
        let u0 = vec![1.0; 20];
        let u = step_forward(&op, tg, &u0, None, &r).unwrap();
        let v = step_adjoint(&op, tg, &u0).unwrap();
        let other = TimeGrid::new(0.5, 11).unwrap();
        assert!(matches!(check_duality(&m, &u, &v, None, &u0, &u0, &r, other), Err(Error::Dimension(_))));
    }

    #[test]
    fn energy_dissipation_subcritical_raw() {
        let m = build_mesh(300).unwrap();
        let op = assemble(OperatorSpec::raw(0.25), &m).unwrap();
        let tg = TimeGrid::new(0.3, 60).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u0: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..1.0)).collect();
        let traj = step_forward(&op, tg, &u0, None, &regions(&m)).unwrap();
        for w in traj.windows(2) {
            assert!(m.norm(&w[1]) <= m.norm(&w[0]) * (1.0 + 1e-14));
        }
    }

    #[test]
    fn symmetric_data_stays_symmetric() {
        let m = build_mesh(101).unwrap();
        let r = regions(&m);
        let op = assemble(OperatorSpec::new(0.2, Regularization::Quadratic(0.05)), &m).unwrap();
        let tg = TimeGrid::new(0.2, 40).unwrap();
        let u0: Vec<f64> = m.delta.iter().map(|d| d * d).collect();
        let f: ControlTrajectory = (0..40).map(|_| m.delta.clone()).collect();
        let traj = step_forward(&op, tg, &u0, Some(&f), &r).unwrap();
        let u = &traj[40];
        for i in 0..101 {
            assert!((u[i] - u[100 - i]).abs() < 1e-12 * u[50].abs().max(1.0));
        }
    }

    #[test]
    fn crank_nicolson_converges_faster() {
        let m = build_mesh(200).unwrap();
        let op = assemble(OperatorSpec::raw(0.0), &m).unwrap();
        let r = regions(&m);
        let u0: Vec<f64> = m.nodes.iter().map(|x| (PI * x).sin()).collect();
        let lam = op.matrix.eigenvalue(0);
        let exact = (-lam * 0.1).exp() * m.norm(&u0);
        let err = |scheme, nt| {
            let tg = TimeGrid::new(0.1, nt).unwrap();
            let t = step_forward_with(&op, tg, &u0, None, &r, scheme).unwrap();
            (m.norm(&t[nt]) - exact).abs()
        };
        let ie = err(Scheme::ImplicitEuler, 50);
        let cn = err(Scheme::CrankNicolson, 50);
        assert!(cn < ie / 10.0);
        // second order: halving dt cuts the error by about four
        let ratio = err(Scheme::CrankNicolson, 50) / err(Scheme::CrankNicolson, 100);
        assert!(ratio > 3.5 && ratio < 4.5, "{ratio}");
    }

    #[test]
    fn singular_step_reported() {
        // n = 3, mu = 4: first pivot of I + dt A is 1 + dt (32 - 64) = 0 for dt = 1/32.
        let m = build_mesh(3).unwrap();
        let op = assemble(OperatorSpec::raw(4.0), &m).unwrap();
        let tg = TimeGrid::new(10.0 / 32.0, 10).unwrap();
        match step_adjoint(&op, tg, &[1.0; 3]) {
            Err(Error::SolverBreakdown { row, .. }) => assert_eq!(row, 0),
            other => panic!("expected breakdown, got {:?}", other.map(|t| t.len())),
        }
    }
}
