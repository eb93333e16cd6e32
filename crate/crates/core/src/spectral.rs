//! Ground state of `-u'' - mu/(delta^2 + eps^2) u` and its behaviour as the
//! regularization is removed.

use serde::Serialize;

use crate::mesh::Mesh1D;
use crate::operator::{assemble, OperatorSpec, Regularization, TridiagOperator};
use crate::{Error, Result, MU_STAR};

/// Localization norms on `{delta >= beta}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Localization {
    pub beta: f64,
    pub l2: f64,
    pub h1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralPoint {
    pub mu: f64,
    pub eps: f64,
    pub n: usize,
    pub lambda0: f64,
    /// Second eigenvalue, for the spectral gap.
    pub lambda1: f64,
    /// Unit L2 norm, nonnegative.
    #[serde(skip)]
    pub phi0: Vec<f64>,
    pub residual: f64,
    pub loc: Vec<Localization>,
}

impl SpectralPoint {
    pub fn loc_at(&self, beta: f64) -> Option<&Localization> {
        self.loc.iter().find(|l| l.beta == beta)
    }
}

/// `L2` and `H1` norms of `phi` restricted to `{delta >= beta}`. The `H1`
/// part uses forward differences over every cell starting at a node of the set.
pub fn localization(mesh: &Mesh1D, phi: &[f64], beta: f64) -> Localization {
    let mut l2 = 0.0;
    let mut grad = 0.0;
    for i in 0..mesh.n {
        if mesh.delta[i] >= beta {
            l2 += phi[i] * phi[i];
            let next = if i + 1 < mesh.n { phi[i + 1] } else { 0.0 };
            grad += (next - phi[i]).powi(2);
        }
    }
    l2 *= mesh.h;
    grad /= mesh.h;
    Localization { beta, l2: l2.sqrt(), h1: (l2 + grad).sqrt() }
}

/// Ground state of an assembled operator, scaled to unit `L2` norm.
pub fn ground_state_of(op: &TridiagOperator, mesh: &Mesh1D) -> Result<(f64, Vec<f64>, f64)> {
    let (lambda, mut v) = op.matrix.eigenpair(0)?;
    let s = 1.0 / mesh.h.sqrt();
    v.iter_mut().for_each(|x| *x *= s);
    let av = op.matrix.matvec(&v);
    let residual = av.iter().zip(&v).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max) * mesh.h.sqrt();
    Ok((lambda, v, residual))
}

pub fn ground_state(mesh: &Mesh1D, mu: f64, eps: f64, betas: &[f64]) -> Result<SpectralPoint> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let op = assemble(OperatorSpec::new(mu, Regularization::Quadratic(eps)), mesh)?;
    let (lambda0, phi0, residual) = ground_state_of(&op, mesh)?;
    let lambda1 = op.matrix.eigenvalue(1);
    let loc = betas.iter().map(|&b| localization(mesh, &phi0, b)).collect();
    Ok(SpectralPoint { mu, eps, n: mesh.n, lambda0, lambda1, phi0, residual, loc })
}

/// `lambda0 ~ -c eps^{-p}` fitted on the points with `lambda0 < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerFit {
    pub c: f64,
    pub p: f64,
    pub points: usize,
}

pub fn fit_power_law(points: &[SpectralPoint]) -> Option<PowerFit> {
    let data: Vec<(f64, f64)> =
        points.iter().filter(|p| p.lambda0 < 0.0).map(|p| ((1.0 / p.eps).ln(), (-p.lambda0).ln())).collect();
    if data.len() < 2 {
        return None;
    }
    let m = data.len() as f64;
    let mx = data.iter().map(|d| d.0).sum::<f64>() / m;
    let my = data.iter().map(|d| d.1).sum::<f64>() / m;
    let sxx: f64 = data.iter().map(|d| (d.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = data.iter().map(|d| (d.0 - mx) * (d.1 - my)).sum();
    let p = sxy / sxx;
    Some(PowerFit { c: (my - p * mx).exp(), p, points: data.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl Regime {
    pub fn of(mu: f64) -> Self {
        if mu < MU_STAR {
            Regime::Subcritical
        } else if mu == MU_STAR {
            Regime::Critical
        } else {
            Regime::Supercritical
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupSweep {
    pub mu: f64,
    pub regime: Regime,
    pub points: Vec<SpectralPoint>,
    pub fit: Option<PowerFit>,
    /// Monotonicity checks that failed, in words.
    pub violations: Vec<String>,
}

/// Ground states along a strictly decreasing `eps_list`.
///
/// Recorded checks: `lambda0` nonincreasing as `eps` shrinks (always, the
/// potential is monotone in `eps`); for `mu > 1/4` additionally strictly
/// decreasing, and `loc_h1(beta)` decreasing over the points with `eps < beta/4`.
pub fn blowup_sweep(mesh: &Mesh1D, mu: f64, eps_list: &[f64], betas: &[f64]) -> Result<BlowupSweep> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("eps list must be strictly decreasing".into()));
    }
    if let Some(&eps_min) = eps_list.last() {
        if mesh.h > eps_min / 10.0 {
            return Err(Error::UnderResolved { h: mesh.h, limit: eps_min / 10.0 });
        }
    }
    let points = eps_list.iter().map(|&e| ground_state(mesh, mu, e, betas)).collect::<Result<Vec<_>>>()?;
    Ok(summarize_sweep(mu, points))
}

/// Checks and fit for points already computed (possibly in parallel).
pub fn summarize_sweep(mu: f64, points: Vec<SpectralPoint>) -> BlowupSweep {
    let regime = Regime::of(mu);
    let mut violations = Vec::new();
    for w in points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let tol = 1e-10 * a.lambda0.abs().max(1.0);
        if b.lambda0 > a.lambda0 + tol {
            violations.push(format!("lambda0 increased from eps {} to {}", a.eps, b.eps));
        } else if regime == Regime::Supercritical && b.lambda0 >= a.lambda0 {
            violations.push(format!("lambda0 not strictly decreasing from eps {} to {}", a.eps, b.eps));
        }
    }
    if regime == Regime::Supercritical {
        if let Some(first) = points.first() {
            for loc in &first.loc {
                let beta = loc.beta;
                let series: Vec<(f64, f64)> = points
                    .iter()
                    .filter(|p| p.eps < beta / 4.0)
                    .filter_map(|p| p.loc_at(beta).map(|l| (p.eps, l.h1)))
                    .collect();
                for w in series.windows(2) {
                    if w[1].1 >= w[0].1 {
                        violations
                            .push(format!("loc_h1(beta = {beta}) did not decrease from eps {} to {}", w[0].0, w[1].0));
                    }
                }
            }
        }
    }
    let fit = fit_power_law(&points);
    BlowupSweep { mu, regime, points, fit, violations }
}
