//! Pointwise inequalities for `tau`, `T1`, `T2`, `T3` on sampled points.
//!
//! Inequalities with explicit constants are asserted; the existential
//! constants are returned as the tightest sampled value.

use serde::Serialize;

use super::lognum::LogNum;
use super::weights::{PointWeights, WeightConfig, Weights};
use crate::mesh::{Mesh1D, RegionMasks};
use crate::Result;

pub const SLACK_TOL: f64 = 1e-12;
const MAX_FAILURES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// `delta < r0`
    Layer,
    /// `delta > r0`, outside the closure of `omega0`
    O,
    /// `delta > r0`
    OTilde,
    /// outside the closure of `omega0`
    OffOmega0,
    Omega0,
    All,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::Layer => "layer",
            Region::O => "o",
            Region::OTilde => "o_tilde",
            Region::OffOmega0 => "off_omega0",
            Region::Omega0 => "omega0",
            Region::All => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub id: &'static str,
    pub region: Region,
    pub samples: usize,
    pub min_slack: f64,
    pub passed: bool,
    /// Worst sample `(x, slack)`.
    pub witness: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Failure {
    pub x: f64,
    pub region: Region,
    pub id: &'static str,
    pub slack: f64,
}

/// Tightest sampled values of the existential constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct MeasuredConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub d1: f64,
    pub d2: f64,
    /// Common value of `D3 = D4` needed for the lower bound on `T2` in the layer.
    pub d3_d4: f64,
    pub d5: f64,
    pub d6: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropositionReport {
    pub lambda: f64,
    pub r0: f64,
    pub samples: usize,
    pub checks: Vec<CheckResult>,
    pub constants: MeasuredConstants,
    /// First failures, capped.
    pub failures: Vec<Failure>,
    pub all_passed: bool,
}

impl PropositionReport {
    pub fn check(&self, id: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.id == id)
    }
}

/// `T1`, `T2`, `T3` from their displayed formulas in one dimension.
pub fn t_terms(pw: &PointWeights, lambda: f64) -> (LogNum, LogNum, LogNum) {
    let (d, dd, psi, dpsi, d2psi, a) = (pw.delta, pw.ddelta, pw.psi, pw.dpsi, pw.d2psi, pw.alpha);
    let g2 = pw.dtau * pw.dtau;
    let t1 = g2 * (2.0 * psi * (2.0 - a) + 2.0 * d * d * d2psi + 4.0 * (2.0 - a) * d * dd * dpsi - d * d * a * d2psi);

    // |psi'|^2 - (delta' psi')^2, identically zero since |delta'| = 1
    let defect = LogNum::new(dpsi * dpsi - (dd * dpsi) * (dd * dpsi));
    let k = LogNum::exp(pw.ln_k);
    let dl = |p: f64| LogNum::new(d).powf(p);
    let t2 = defect
        * ((LogNum::new(d * d) + k * dl(lambda) * lambda)
            * (LogNum::new(5.0 * d * d * psi) + k * dl(lambda) * (lambda * (2.0 - psi)))
            * 4.0
            + k * (k * k * dl(3.0 * lambda - 2.0) * (2.0 * lambda.powi(3))
                + dl(lambda + 2.0) * (lambda * lambda * (8.0 * psi * (1.0 - psi) - 2.0))
                + k * dl(2.0 * lambda) * (4.0 * lambda * lambda)
                + dl(lambda + 2.0) * (2.0 * lambda)));

    let l = lambda;
    let bracket = (l * l * (2.0 - a) - l * (2.0 - a))
        + 2.0 * l * l * d * (2.0 - a) * dd * dpsi
        + l * l * d * d * (2.0 - a) * dpsi * dpsi
        - l * a * d * d * d2psi
        + 2.0 * l * d * d * d2psi;
    let t3 = k * dl(lambda - 2.0) * g2 * bracket;
    (t1, t2, t3)
}

/// `count` points spread evenly over `(0, 1)` minus the band `|x - 1/2| < 4h`.
pub fn sample_points(count: usize, h: f64) -> Vec<f64> {
    let band = 4.0 * h;
    let len = 1.0 - 2.0 * band;
    (0..count)
        .map(|j| {
            let y = (j as f64 + 0.5) / count as f64 * len;
            if y < 0.5 - band {
                y
            } else {
                y + 2.0 * band
            }
        })
        .collect()
}

struct Tracker {
    checks: Vec<CheckResult>,
    failures: Vec<Failure>,
}

impl Tracker {
    fn record(&mut self, idx: usize, x: f64, slack: f64) {
        let c = &mut self.checks[idx];
        c.samples += 1;
        if slack < c.min_slack {
            c.min_slack = slack;
            c.witness = Some((x, slack));
        }
        if slack < -SLACK_TOL {
            c.passed = false;
            if self.failures.len() < MAX_FAILURES {
                self.failures.push(Failure { x, region: c.region, id: c.id, slack });
            }
        }
    }
}

const CHECKS: [(&str, Region); 9] = [
    ("delta_lap", Region::Layer),
    ("delta_hess", Region::Layer),
    ("phi_hess", Region::Layer),
    ("phi_lap", Region::O),
    ("t1_layer", Region::Layer),
    ("t2_o_tilde", Region::OTilde),
    ("t3_off_omega0", Region::OffOmega0),
    ("grad_tau_layer", Region::Layer),
    ("grad_tau_o", Region::O),
];

pub fn sample_propositions(w: &Weights, h: f64, sample_count: usize) -> PropositionReport {
    let p = &w.params;
    let (lam, r0) = (p.lambda, p.r0);
    let (a0, b0) = (w.psi1.omega0.lo, w.psi1.omega0.hi);
    let mut tr = Tracker {
        checks: CHECKS
            .iter()
            .map(|&(id, region)| CheckResult {
                id,
                region,
                samples: 0,
                min_slack: f64::INFINITY,
                passed: true,
                witness: None,
            })
            .collect(),
        failures: vec![],
    };
    let mut c = MeasuredConstants::default();
    let dpsi_sup = p.varpi * w.norms.sup_d1;
    let ln_r0 = r0.ln();

    for x in sample_points(sample_count, h) {
        let pw = w.at(x);
        let d = pw.delta;
        let ln_d = d.ln();
        let layer = d < r0;
        let in_closed_omega0 = x >= a0 && x <= b0;
        let o_tilde = d > r0;
        let o = o_tilde && !in_closed_omega0;
        let omega0 = x > a0 && x < b0;
        let ln_phi = lam * pw.psi;
        let g2 = pw.dtau * pw.dtau;
        let (t1, t2, t3) = t_terms(&pw, lam);
        let zero = LogNum::ZERO;
        let k = LogNum::exp(pw.ln_k);

        c.c1 = c.c1.max(pw.lap_tau_delta.abs());
        let phi_scale = LogNum::exp(lam.ln() + (lam - 2.0) * (ln_d - ln_r0) + ln_phi);
        c.c3 = c.c3.max((-(pw.lap_tau_phi / phi_scale)).to_f64());
        let t3_scale = k * LogNum::exp(2.0 * lam.ln() + (lam - 2.0) * ln_d) * g2;
        c.d5 = c.d5.max((t3 / t3_scale).to_f64());

        if layer {
            c.c2 = c.c2.max(pw.lap_tau_delta.abs());
            let hess = LogNum::new(pw.lap_tau_delta);
            tr.record(0, x, hess.rel_slack(zero));
            tr.record(1, x, hess.rel_slack(zero));
            tr.record(2, x, pw.lap_tau_phi.rel_slack(phi_scale * 0.5));
            tr.record(4, x, t1.rel_slack(g2));
            tr.record(7, x, g2.rel_slack(LogNum::new(d * d)));
            let t2_scale =
                k * LogNum::exp(2.0 * lam.ln() + (lam + 2.0) * ln_d) * (dpsi_sup * dpsi_sup) * (pw.psi * pw.psi + 1.0);
            c.d3_d4 = c.d3_d4.max((-(t2 / t2_scale)).to_f64());
        }
        let o_scale = LogNum::exp(lam * (ln_d - ln_r0) + ln_phi);
        if o {
            tr.record(3, x, pw.lap_tau_phi.rel_slack(o_scale * (lam * lam)));
            tr.record(8, x, g2.rel_slack(o_scale * o_scale * (lam * lam)));
            c.d1 = c.d1.max((-(t1 / g2)).to_f64());
        }
        if o_tilde {
            tr.record(5, x, t2.rel_slack(zero));
        }
        if !in_closed_omega0 {
            let rhs = (k * LogNum::new(d).powf(lam - 2.0) + o_scale) * g2 * (lam * lam);
            tr.record(6, x, t3.rel_slack(rhs));
        }
        if omega0 {
            c.d2 = c.d2.max((t1.abs() / g2).to_f64());
            c.d6 = c.d6.max((g2 / (o_scale * o_scale * (lam * lam))).to_f64());
        }
    }
    c.c1 = c.c1.max(0.0);
    let all_passed = tr.checks.iter().all(|c| c.passed);
    PropositionReport {
        lambda: lam,
        r0,
        samples: sample_count,
        checks: tr.checks,
        constants: c,
        failures: tr.failures,
        all_passed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaTrial {
    pub lambda: f64,
    pub passed: bool,
    pub failed_checks: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaSearch {
    pub trials: Vec<LambdaTrial>,
    pub lambda0: Option<f64>,
    /// Every grid value above a passing one also passes.
    pub monotone: bool,
}

/// Smallest grid `lambda` for which every asserted inequality holds.
pub fn find_lambda0(
    mesh: &Mesh1D,
    masks: &RegionMasks,
    template: &WeightConfig,
    grid: &[f64],
    sample_count: usize,
) -> Result<LambdaSearch> {
    if grid.windows(2).any(|g| g[1] <= g[0]) {
        return Err(crate::Error::InvalidParameter("lambda grid must be increasing".into()));
    }
    let mut trials = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let w = Weights::build(mesh, masks, &WeightConfig { lambda, ..*template })?;
        let rep = sample_propositions(&w, mesh.h, sample_count);
        trials.push(LambdaTrial {
            lambda,
            passed: rep.all_passed,
            failed_checks: rep.checks.iter().filter(|c| !c.passed).map(|c| c.id).collect(),
        });
    }
    let first = trials.iter().position(|t| t.passed);
    let monotone = first.is_none_or(|i| trials[i..].iter().all(|t| t.passed));
    Ok(LambdaSearch { lambda0: first.map(|i| trials[i].lambda), trials, monotone })
}
