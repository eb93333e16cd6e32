//! `theta`, `psi`, `phi`, `tau`, `sigma` and the admissibility rules for
//! `r0` and `varpi`.

use serde::Serialize;

use super::lognum::LogNum;
use super::psi::{build_psi1_from, Psi1, Psi1Norms};
use crate::mesh::{Mesh1D, RegionMasks};
use crate::{Error, Result};

/// Diameter of the unit interval.
pub const R_OMEGA: f64 = 1.0;

/// User-facing knobs; everything else is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightConfig {
    pub lambda: f64,
    /// `None` picks the smallest value meeting the computable rules.
    pub varpi: Option<f64>,
    pub varpi0_target: f64,
    pub gamma: f64,
    pub r: f64,
    pub t_final: f64,
    /// Exponent `k` in `theta = (t (T - t))^-k`.
    pub theta_k: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig { lambda: 2.0, varpi: None, varpi0_target: 1.0, gamma: 1.5, r: 1.0, t_final: 0.5, theta_k: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightParams {
    pub lambda: f64,
    pub r0: f64,
    pub varpi: f64,
    pub varpi0: f64,
    pub gamma: f64,
    /// `ln C_lambda`; the offset itself overflows for moderate `lambda varpi`.
    pub ln_c_lambda: f64,
    pub r: f64,
    pub t_final: f64,
    pub theta_k: f64,
    pub d_psi1: f64,
}

impl WeightParams {
    pub fn c_lambda(&self) -> LogNum {
        LogNum::exp(self.ln_c_lambda)
    }

    /// `[theta, theta', theta'']` at `t` in `(0, T)`.
    pub fn theta(&self, t: f64) -> Result<[f64; 3]> {
        let tt = self.t_final;
        if !(t > 0.0 && t < tt) {
            return Err(Error::SingularTime(t));
        }
        let k = self.theta_k;
        let q = t * (tt - t);
        let dq = tt - 2.0 * t;
        let th = q.powf(-k);
        Ok([th, -k * th / q * dq, k * (k + 1.0) * th / (q * q) * dq * dq + 2.0 * k * th / q])
    }
}

/// Every pointwise quantity at one `x`, with `D^2 delta = 0` and `|delta'| = 1`.
#[derive(Debug, Clone, Copy)]
pub struct PointWeights {
    pub x: f64,
    pub delta: f64,
    pub ddelta: f64,
    pub psi: f64,
    pub dpsi: f64,
    pub d2psi: f64,
    pub alpha: f64,
    /// `ln(phi / r0^lambda)`.
    pub ln_k: f64,
    pub tau_delta: f64,
    pub dtau_delta: f64,
    pub lap_tau_delta: f64,
    pub tau_phi: LogNum,
    pub dtau_phi: LogNum,
    pub lap_tau_phi: LogNum,
    pub tau: LogNum,
    pub dtau: LogNum,
}

/// Quintic step: `0` for `delta <= r0/2`, `1` for `delta >= r0`.
pub fn alpha_cutoff(delta: f64, r0: f64) -> f64 {
    let t = ((delta - 0.5 * r0) / (0.5 * r0)).clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

#[derive(Debug, Clone)]
pub struct Weights {
    pub params: WeightParams,
    pub psi1: Psi1,
    pub norms: Psi1Norms,
    pub fields: WeightFields,
}

/// Node values on the mesh.
#[derive(Debug, Clone, Serialize)]
pub struct WeightFields {
    pub x: Vec<f64>,
    pub psi1: Vec<f64>,
    pub psi: Vec<f64>,
    pub alpha: Vec<f64>,
    pub ln_phi: Vec<f64>,
    pub tau_delta: Vec<f64>,
    #[serde(skip)]
    pub tau_phi: Vec<LogNum>,
    #[serde(skip)]
    pub tau: Vec<LogNum>,
    #[serde(skip)]
    pub dtau: Vec<LogNum>,
}

impl WeightFields {
    pub fn ln_tau(&self) -> Vec<f64> {
        self.tau.iter().map(|t| t.ln_abs()).collect()
    }
}

/// `sigma(., t)` and its space derivative on the nodes.
#[derive(Debug, Clone)]
pub struct SigmaSlice {
    pub t: f64,
    pub theta: [f64; 3],
    pub sigma: Vec<LogNum>,
    pub dsigma: Vec<LogNum>,
}

/// The computable `varpi` lower bounds, without the self-referential entry.
pub fn default_varpi(d_psi1: f64, r0: f64, varpi0: f64) -> f64 {
    let w2 = varpi0 * varpi0;
    [1.0, 2.0 / w2 * (1.0 + 2.0 * d_psi1 / r0), 4.0 * d_psi1 / w2, 24.0 * d_psi1 * R_OMEGA / w2, 2.0 / varpi0]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

impl Weights {
    pub fn build(mesh: &Mesh1D, masks: &RegionMasks, cfg: &WeightConfig) -> Result<Self> {
        if !(cfg.lambda > 1.0) {
            return Err(Error::InvalidParameter(format!("lambda must exceed 1, got {}", cfg.lambda)));
        }
        if !(cfg.gamma > 1.0 && cfg.gamma < 2.0) {
            return Err(Error::InvalidParameter(format!("gamma must lie in (1, 2), got {}", cfg.gamma)));
        }
        if !(cfg.t_final > 0.0 && cfg.r > 0.0 && cfg.theta_k > 0.0) {
            return Err(Error::InvalidParameter("T, R and k must be positive".into()));
        }
        let psi1 = build_psi1_from(masks.r0, masks.omega0_iv, cfg.varpi0_target)?;
        let norms = psi1.norms();
        // `D` over the closed interval, so it does not drift with h.
        let d_psi1 = psi1
            .d_const(mesh)
            .max(psi1.eval(0.0)[1] - psi1.eval(0.0)[0])
            .max((-psi1.eval(1.0)[1] - psi1.eval(1.0)[0]).abs());
        let varpi = match cfg.varpi {
            Some(v) if v >= 1.0 => v,
            Some(v) => return Err(Error::InvalidParameter(format!("varpi must be >= 1, got {v}"))),
            None => default_varpi(d_psi1, masks.r0, psi1.varpi0),
        };
        let mut params = WeightParams {
            lambda: cfg.lambda,
            r0: masks.r0,
            varpi,
            varpi0: psi1.varpi0,
            gamma: cfg.gamma,
            ln_c_lambda: 0.0,
            r: cfg.r,
            t_final: cfg.t_final,
            theta_k: cfg.theta_k,
            d_psi1,
        };
        let mut w = Weights { params, psi1, norms, fields: empty_fields() };
        // tau peaks where both delta and psi do; include the continuum maximizers.
        let mut tau_max = LogNum::ZERO;
        for x in mesh.nodes.iter().copied().chain([w.psi1.peak, 0.5]) {
            tau_max = tau_max.max(w.at(x).tau);
        }
        params.ln_c_lambda = tau_max.ln_abs() + 2f64.ln();
        w.params = params;
        w.fields = w.node_fields(mesh);
        Ok(w)
    }

    pub fn at(&self, x: f64) -> PointWeights {
        let p = &self.params;
        let lam = p.lambda;
        let delta = Mesh1D::delta_at(x);
        let ddelta = if x < 0.5 { 1.0 } else { -1.0 };
        let [s0, s1, s2, _] = self.psi1.eval(x);
        let psi = p.varpi * (s0 + 1.0);
        let dpsi = p.varpi * s1;
        let d2psi = p.varpi * s2;
        let alpha = alpha_cutoff(delta, p.r0);
        let ln_k = lam * psi - lam * p.r0.ln();
        let ln_d = delta.ln();

        let tau_delta = delta * delta * psi;
        let dtau_delta = 2.0 * delta * ddelta * psi + delta * delta * dpsi;
        let lap_tau_delta = 2.0 * psi + 4.0 * delta * ddelta * dpsi + delta * delta * d2psi;

        let tau_phi = LogNum::exp(ln_k + lam * ln_d);
        let dtau_phi = LogNum::exp(ln_k + lam.ln() + (lam - 1.0) * ln_d) * (ddelta + delta * dpsi);
        let bracket =
            (lam - 1.0) + 2.0 * lam * delta * ddelta * dpsi + delta * delta * d2psi + lam * delta * delta * dpsi * dpsi;
        let lap_tau_phi = LogNum::exp(ln_k + lam.ln() + (lam - 2.0) * ln_d) * bracket;

        PointWeights {
            x,
            delta,
            ddelta,
            psi,
            dpsi,
            d2psi,
            alpha,
            ln_k,
            tau_delta,
            dtau_delta,
            lap_tau_delta,
            tau_phi,
            dtau_phi,
            lap_tau_phi,
            tau: tau_phi + tau_delta,
            dtau: dtau_phi + dtau_delta,
        }
    }

    fn node_fields(&self, mesh: &Mesh1D) -> WeightFields {
        let mut f = empty_fields();
        for &x in &mesh.nodes {
            let pw = self.at(x);
            f.x.push(x);
            f.psi1.push(self.psi1.eval(x)[0]);
            f.psi.push(pw.psi);
            f.alpha.push(pw.alpha);
            f.ln_phi.push(self.params.lambda * pw.psi);
            f.tau_delta.push(pw.tau_delta);
            f.tau_phi.push(pw.tau_phi);
            f.tau.push(pw.tau);
            f.dtau.push(pw.dtau);
        }
        f
    }

    /// `sigma = theta (C - tau)` and `sigma_x = -theta tau_x` at time `t`.
    pub fn eval_weights(&self, t: f64) -> Result<SigmaSlice> {
        let theta = self.params.theta(t)?;
        let th = LogNum::new(theta[0]);
        let c = self.params.c_lambda();
        let sigma = self.fields.tau.iter().map(|&tau| th * (c - tau)).collect();
        let dsigma = self.fields.dtau.iter().map(|&d| -(th * d)).collect();
        Ok(SigmaSlice { t, theta, sigma, dsigma })
    }
}

fn empty_fields() -> WeightFields {
    WeightFields {
        x: vec![],
        psi1: vec![],
        psi: vec![],
        alpha: vec![],
        ln_phi: vec![],
        tau_delta: vec![],
        tau_phi: vec![],
        tau: vec![],
        dtau: vec![],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleStatus {
    Pass,
    Fail,
    Deferred,
}

/// One entry of the `r0` min-list or the `varpi` max-list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleEntry {
    pub list: &'static str,
    pub index: usize,
    pub expr: &'static str,
    /// The bound the parameter is compared against, when computable.
    pub bound: Option<f64>,
    pub status: RuleStatus,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility {
    pub r0: f64,
    pub varpi: f64,
    pub varpi0: f64,
    pub d_psi1: f64,
    pub psi_sup: f64,
    pub dpsi_sup: f64,
    pub d2psi_sup: f64,
    pub entries: Vec<RuleEntry>,
}

impl Admissibility {
    pub fn failures(&self) -> impl Iterator<Item = &RuleEntry> {
        self.entries.iter().filter(|e| e.status == RuleStatus::Fail)
    }
}

/// Evaluate both rule lists against the chosen `r0` and `varpi`.
pub fn admissibility(w: &Weights) -> Admissibility {
    let p = &w.params;
    let (r0, varpi, w0, d) = (p.r0, p.varpi, p.varpi0, p.d_psi1);
    let ps = varpi * (w.norms.sup + 1.0);
    let dps = varpi * w.norms.sup_d1;
    let d2ps = varpi * w.norms.sup_d2;
    let mut entries = Vec::new();

    let mut r0_rule = |index, expr, bound: f64| {
        entries.push(RuleEntry {
            list: "r0",
            index,
            expr,
            bound: Some(bound),
            status: if r0 <= bound { RuleStatus::Pass } else { RuleStatus::Fail },
            note: String::new(),
        });
    };
    r0_rule(1, "1", 1.0);
    r0_rule(2, "2|psi|/(4|Dpsi| + |D2psi|)", 2.0 * ps / (4.0 * dps + d2ps));
    r0_rule(3, "1/(R sqrt(4|Dpsi|^2 + 2|D2psi|))", 1.0 / (R_OMEGA * (4.0 * dps * dps + 2.0 * d2ps).sqrt()));
    r0_rule(4, "|psi|/(2(2-gamma)|Dpsi|)", ps / (2.0 * (2.0 - p.gamma) * dps));
    entries.push(RuleEntry {
        list: "r0",
        index: 5,
        expr: "(M2/(4|mu||Dpsi|))^(1/(gamma-1))",
        bound: None,
        status: RuleStatus::Deferred,
        note: format!("holds iff M2 >= 4|mu| * {:.6e} for the given mu", dps * r0.powf(p.gamma - 1.0)),
    });
    let mut r0_rule = |index, expr, bound: f64| {
        entries.push(RuleEntry {
            list: "r0",
            index,
            expr,
            bound: Some(bound),
            status: if r0 <= bound { RuleStatus::Pass } else { RuleStatus::Fail },
            note: String::new(),
        });
    };
    r0_rule(6, "1/sqrt(8 D |Dpsi|/varpi0 + 3|D2psi|)", 1.0 / (8.0 * d * dps / w0 + 3.0 * d2ps).sqrt());
    r0_rule(7, "2|psi|/(|Dpsi|^2 + (1 + 2|psi|)|Dpsi|)", 2.0 * ps / (dps * dps + (1.0 + 2.0 * ps) * dps));
    r0_rule(8, "1/(|Dpsi|^2 + 2|Dpsi|)", 1.0 / (dps * dps + 2.0 * dps));
    r0_rule(9, "3|psi|^2/(4|Dpsi|)", 3.0 * ps * ps / (4.0 * dps));
    entries.push(RuleEntry {
        list: "r0",
        index: 10,
        expr: "1/(|Dpsi| sqrt(D3|psi|^2 + D4))",
        bound: None,
        status: RuleStatus::Deferred,
        note: format!(
            "holds iff D3 * {:.6e} + D4 <= {:.6e}; compare with the sampled D3, D4",
            ps * ps,
            1.0 / (r0 * dps).powi(2)
        ),
    });

    let mut varpi_rule = |index, expr, bound: f64, note: String| {
        entries.push(RuleEntry {
            list: "varpi",
            index,
            expr,
            bound: Some(bound),
            status: if varpi >= bound { RuleStatus::Pass } else { RuleStatus::Fail },
            note,
        });
    };
    let w2 = w0 * w0;
    varpi_rule(1, "1", 1.0, String::new());
    let self_ref = w.norms.sup_d2;
    let note = if w2 > self_ref {
        format!(
            "|D2psi| = varpi * {self_ref:.6}; satisfiable for varpi >= {:.6e}",
            (1.0 + 2.0 * d / r0) / (w2 - self_ref)
        )
    } else {
        format!("|D2psi| = varpi * {self_ref:.6} >= varpi * varpi0^2: unsatisfiable for every varpi")
    };
    varpi_rule(2, "(1/varpi0^2)(1 + 2D/r0 + |D2psi|)", (1.0 + 2.0 * d / r0 + d2ps) / w2, note);
    varpi_rule(3, "(2/varpi0^2)(1 + 2D/r0)", 2.0 / w2 * (1.0 + 2.0 * d / r0), String::new());
    varpi_rule(4, "4D/varpi0^2", 4.0 * d / w2, String::new());
    varpi_rule(5, "24 D R/varpi0^2", 24.0 * d * R_OMEGA / w2, String::new());
    varpi_rule(6, "2/varpi0", 2.0 / w0, String::new());
    entries.push(RuleEntry {
        list: "varpi",
        index: 7,
        expr: "varpi varpi0 > 2 C_Omega",
        bound: None,
        status: RuleStatus::Deferred,
        note: format!("holds iff C_Omega < {:.6e}", varpi * w0 / 2.0),
    });

    Admissibility { r0, varpi, varpi0: w0, d_psi1: d, psi_sup: ps, dpsi_sup: dps, d2psi_sup: d2ps, entries }
}

/// `|sigma_x| / (theta delta) = |tau_x| / delta` near the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxReport {
    pub n: usize,
    pub lambda: f64,
    pub nodes: usize,
    pub ln_max_ratio: f64,
    pub ln_first_ratio: f64,
    /// Limit of the ratio at the boundary when finite (`lambda >= 2`).
    pub ln_limit: Option<f64>,
}

impl FluxReport {
    pub fn max_ratio(&self) -> f64 {
        self.ln_max_ratio.exp()
    }
}

pub fn check_boundary_flux(w: &Weights, mesh: &Mesh1D) -> Result<FluxReport> {
    let p = &w.params;
    if !(p.lambda > 1.0) {
        return Err(Error::InvalidParameter("flux check needs lambda > 1".into()));
    }
    let mut max = LogNum::ZERO;
    let mut first = None;
    let mut count = 0;
    for (i, &x) in mesh.nodes.iter().enumerate() {
        let d = mesh.delta[i];
        if d >= 0.5 * p.r0 {
            continue;
        }
        let ratio = w.fields.dtau[i].abs() / LogNum::new(d);
        if x < 0.5 && first.is_none() {
            first = Some(ratio);
        }
        max = max.max(ratio);
        count += 1;
    }
    let first = first.ok_or_else(|| Error::InvalidParameter("no nodes inside r0/2".into()))?;
    // tau_x/delta -> 2 psi(0) + lambda phi(0)/r0^lambda delta^(lambda-2) at the boundary
    let ln_limit = if p.lambda > 2.0 {
        Some((2.0 * p.varpi).ln())
    } else if p.lambda == 2.0 {
        Some((LogNum::new(2.0 * p.varpi) + LogNum::exp(2f64.ln() + 2.0 * p.varpi - 2.0 * p.r0.ln())).ln_abs())
    } else {
        None
    };
    Ok(FluxReport {
        n: mesh.n,
        lambda: p.lambda,
        nodes: count,
        ln_max_ratio: max.ln_abs(),
        ln_first_ratio: first.ln_abs(),
        ln_limit,
    })
}
