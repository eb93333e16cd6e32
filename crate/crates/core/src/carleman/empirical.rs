//! Both sides of the Carleman inequality on discrete adjoint trajectories.
//!
//! The factor `exp(-2 R sigma_min)` is common to every integrand and is
//! dropped; it cancels in the ratio and does not change which side vanishes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::lognum::LogNum;
use super::weights::{WeightConfig, Weights};
use crate::mesh::{Mesh1D, RegionMasks};
use crate::operator::{TimeGrid, Trajectory};
use crate::{Error, Result};

/// Below `exp(-745)` the weight is an f64 zero anyway.
const LN_WEIGHT_FLOOR: f64 = -745.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CarlemanSides {
    /// `ln` of the five left-hand integrals.
    pub ln_lhs_terms: [f64; 5],
    pub ln_rhs_terms: [f64; 2],
    pub ln_lhs: f64,
    pub ln_rhs: f64,
    /// Space-time nodes carrying a nonzero weight.
    pub support: usize,
}

impl CarlemanSides {
    pub fn lhs_positive(&self) -> bool {
        self.ln_lhs > f64::NEG_INFINITY
    }

    pub fn rhs_positive(&self) -> bool {
        self.ln_rhs > f64::NEG_INFINITY
    }

    pub fn ln_ratio(&self) -> f64 {
        self.ln_lhs - self.ln_rhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalCarleman {
    pub runs: Vec<CarlemanSides>,
    pub ln_min_ratio: f64,
    pub ln_max_ratio: f64,
}

impl EmpiricalCarleman {
    pub fn max_ratio(&self) -> f64 {
        self.ln_max_ratio.exp()
    }
}

struct Precomputed {
    ln_theta: Vec<f64>,
    time_w: Vec<f64>,
    /// `sigma(x_i, t_k) - min sigma`, by level then node.
    excess: Vec<Vec<f64>>,
}

fn precompute(w: &Weights, tg: TimeGrid) -> Result<Precomputed> {
    let nt = tg.nt;
    if nt < 3 {
        return Err(Error::InvalidParameter("need at least 3 time levels".into()));
    }
    let mut sig = Vec::with_capacity(nt - 1);
    let mut ln_theta = Vec::with_capacity(nt - 1);
    let mut time_w = Vec::with_capacity(nt - 1);
    for k in 1..nt {
        let s = w.eval_weights(tg.time(k))?;
        ln_theta.push(s.theta[0].ln());
        time_w.push(if k == 1 || k == nt - 1 { 0.5 * tg.dt } else { tg.dt });
        sig.push(s.sigma);
    }
    let min = sig
        .iter()
        .flatten()
        .copied()
        .fold(None, |m: Option<LogNum>, s| Some(m.map_or(s, |m| m.min(s))))
        .expect("non-empty");
    let excess = sig.iter().map(|row| row.iter().map(|&s| (s - min).to_f64()).collect()).collect();
    Ok(Precomputed { ln_theta, time_w, excess })
}

fn sides(w: &Weights, mesh: &Mesh1D, masks: &RegionMasks, a1: f64, pre: &Precomputed, v: &Trajectory) -> CarlemanSides {
    let p = &w.params;
    let (lam, r, g) = (p.lambda, p.r, p.gamma);
    let ln_r0 = p.r0.ln();
    let (ln_lam, ln_r) = (lam.ln(), r.ln());
    let n = mesh.n;
    let mut layer = vec![false; n];
    let mut o_set = vec![false; n];
    let mut om0 = vec![false; n];
    masks.boundary_layer.iter().for_each(|&i| layer[i] = true);
    masks.o_set.iter().for_each(|&i| o_set[i] = true);
    masks.omega0.iter().for_each(|&i| om0[i] = true);

    let mut lhs = [LogNum::ZERO; 5];
    let mut rhs = [LogNum::ZERO; 2];
    let mut support = 0;
    for (j, row) in pre.excess.iter().enumerate() {
        let vk = &v[j + 1];
        let ln_th = pre.ln_theta[j];
        let ln_tw = (pre.time_w[j] * mesh.h).ln();
        for i in 0..n {
            let ln_e = -2.0 * r * row[i];
            if ln_e < LN_WEIGHT_FLOOR {
                continue;
            }
            support += 1;
            let d = mesh.delta[i];
            let ln_d = d.ln();
            let vi = vk[i];
            let left = if i > 0 { vk[i - 1] } else { 0.0 };
            let right = if i + 1 < n { vk[i + 1] } else { 0.0 };
            let vx = (right - left) / (2.0 * mesh.h);
            let base = ln_e + ln_tw;
            let ln_v2 = (vi * vi).ln();
            let ln_vx2 = (vx * vx).ln();
            let ln_scaled = lam * (ln_d - ln_r0);
            let ln_phi = lam * w.fields.psi[i];

            lhs[0] = lhs[0] + LogNum::exp(base + ln_r + ln_th) * (d.powf(2.0 - g) * vx * vx + a1 * vi * vi / d.powf(g));
            let grad3 = LogNum::exp(base + 2.0 * ln_lam + ln_r + ln_th + ln_scaled + ln_phi + ln_vx2);
            let zero3 =
                LogNum::exp(base + 4.0 * ln_lam + 3.0 * ln_r + 3.0 * ln_th + 3.0 * (ln_scaled + ln_phi) + ln_v2);
            if layer[i] {
                lhs[1] = lhs[1] + LogNum::exp(base + ln_lam + ln_r + ln_th + (lam - 2.0) * (ln_d - ln_r0) + ln_vx2);
                lhs[3] = lhs[3] + LogNum::exp(base + 3.0 * ln_r + 3.0 * ln_th + 2.0 * ln_d + ln_v2);
            }
            if o_set[i] {
                lhs[2] = lhs[2] + grad3;
                lhs[4] = lhs[4] + zero3;
            }
            if om0[i] {
                rhs[0] = rhs[0] + zero3;
                rhs[1] = rhs[1] + grad3;
            }
        }
    }
    let ln_lhs = lhs.iter().copied().sum::<LogNum>().ln_abs();
    let ln_rhs = rhs.iter().copied().sum::<LogNum>().ln_abs();
    CarlemanSides {
        ln_lhs_terms: lhs.map(|t| t.ln_abs()),
        ln_rhs_terms: rhs.map(|t| t.ln_abs()),
        ln_lhs,
        ln_rhs,
        support,
    }
}

/// Evaluate both sides on every trajectory; `v[k]` is the adjoint at level `k`.
pub fn empirical_carleman(
    w: &Weights,
    mesh: &Mesh1D,
    masks: &RegionMasks,
    tg: TimeGrid,
    a1: f64,
    runs: &[Trajectory],
) -> Result<EmpiricalCarleman> {
    if (w.params.t_final - tg.t_final).abs() > 1e-12 * tg.t_final {
        return Err(Error::Dimension("weight horizon and time grid differ".into()));
    }
    for v in runs {
        if v.len() != tg.nt + 1 || v.iter().any(|l| l.len() != mesh.n) {
            return Err(Error::Dimension("trajectory shape does not match the grids".into()));
        }
    }
    let pre = precompute(w, tg)?;
    let mut out = Vec::with_capacity(runs.len());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in runs {
        let s = sides(w, mesh, masks, a1, &pre, v);
        if s.lhs_positive() && !s.rhs_positive() {
            return Err(Error::PropertyFailure("observation side vanishes while the weighted energy does not".into()));
        }
        if s.lhs_positive() {
            lo = lo.min(s.ln_ratio());
            hi = hi.max(s.ln_ratio());
        }
        out.push(s);
    }
    Ok(EmpiricalCarleman { runs: out, ln_min_ratio: lo, ln_max_ratio: hi })
}

/// `count` terminal states with i.i.d. uniform `[-1, 1]` nodal values.
pub fn random_terminal_states(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RSelection {
    pub r: f64,
    /// `(R, ln max ratio)` for every tried amplitude.
    pub history: Vec<(f64, f64)>,
    pub stable: bool,
}

/// Double `R` from `1` until the max ratio changes by less than `2x`.
pub fn select_r(
    cfg: &WeightConfig,
    mesh: &Mesh1D,
    masks: &RegionMasks,
    tg: TimeGrid,
    a1: f64,
    runs: &[Trajectory],
    max_doublings: usize,
) -> Result<RSelection> {
    let mut history = Vec::new();
    let mut r = 1.0;
    for _ in 0..=max_doublings {
        let w = Weights::build(mesh, masks, &WeightConfig { r, ..*cfg })?;
        let e = empirical_carleman(&w, mesh, masks, tg, a1, runs)?;
        if let Some(&(_, prev)) = history.last() {
            let prev: f64 = prev;
            if (e.ln_max_ratio - prev).abs() <= 2f64.ln() {
                history.push((r, e.ln_max_ratio));
                return Ok(RSelection { r, history, stable: true });
            }
        }
        history.push((r, e.ln_max_ratio));
        r *= 2.0;
    }
    Ok(RSelection { r: r / 2.0, history, stable: false })
}
