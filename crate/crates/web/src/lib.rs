//! WebAssembly bindings for the browser demo. Each export returns a JSON
//! string; the plain functions underneath are usable (and tested) natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use heatctl_core::carleman::{WeightConfig, Weights};
use heatctl_core::hum::{Hum, HumProblem};
use heatctl_core::mesh::build_regions;
use heatctl_core::operator::{assemble, Propagator};
use heatctl_core::spectral::ground_state;
use heatctl_core::{Interval, Mesh1D, OperatorSpec, Regularization, Result, TimeGrid};

/// Largest mesh the page will ask for.
pub const MAX_N: usize = 4000;

#[derive(Debug, Serialize)]
pub struct GroundStateCurve {
    pub mu: f64,
    pub eps: Vec<f64>,
    pub lambda0: Vec<f64>,
    pub x: Vec<f64>,
    /// Ground state at the smallest `eps`.
    pub phi0: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct WeightProfile {
    pub lambda: f64,
    pub varpi: f64,
    pub x: Vec<f64>,
    pub psi1: Vec<f64>,
    pub alpha: Vec<f64>,
    pub ln_phi: Vec<f64>,
    pub ln_tau: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct ControlRun {
    pub final_ratio: f64,
    pub control_cost: f64,
    pub cg_iters: usize,
    pub converged: bool,
    pub t: Vec<f64>,
    /// `|u(t)|` with the HUM control.
    pub controlled_norm: Vec<f64>,
    pub free_norm: Vec<f64>,
}

fn mesh(n: usize) -> Result<Mesh1D> {
    if n > MAX_N {
        return Err(heatctl_core::Error::InvalidParameter(format!("n = {n} exceeds {MAX_N}")));
    }
    Mesh1D::new(n)
}

pub fn ground_state_curve(mu: f64, n: usize, eps: &[f64]) -> Result<GroundStateCurve> {
    let m = mesh(n)?;
    let points = eps.iter().map(|&e| ground_state(&m, mu, e, &[])).collect::<Result<Vec<_>>>()?;
    let last = points
        .iter()
        .min_by(|a, b| a.eps.total_cmp(&b.eps))
        .ok_or_else(|| heatctl_core::Error::InvalidParameter("empty eps list".into()))?;
    Ok(GroundStateCurve {
        mu,
        eps: points.iter().map(|p| p.eps).collect(),
        lambda0: points.iter().map(|p| p.lambda0).collect(),
        x: m.nodes.clone(),
        phi0: last.phi0.clone(),
    })
}

pub fn weight_profile(lambda: f64, r0: f64, n: usize) -> Result<WeightProfile> {
    let m = mesh(n)?;
    let masks = build_regions(&m, Interval::new(0.3, 0.7), Interval::new(0.4, 0.6), r0)?;
    let w = Weights::build(&m, &masks, &WeightConfig { lambda, ..Default::default() })?;
    let f = &w.fields;
    Ok(WeightProfile {
        lambda,
        varpi: w.params.varpi,
        x: f.x.clone(),
        psi1: f.psi1.clone(),
        alpha: f.alpha.clone(),
        ln_phi: f.ln_phi.clone(),
        ln_tau: f.tau.iter().map(|t| t.ln_abs()).collect(),
    })
}

pub fn control_run(mu: f64, n: usize, nt: usize, penalty: f64) -> Result<ControlRun> {
    let m = mesh(n)?;
    let masks = build_regions(&m, Interval::new(0.3, 0.7), Interval::new(0.4, 0.6), 0.1)?;
    let tg = TimeGrid::new(0.5, nt)?;
    let spec = OperatorSpec::new(mu, Regularization::Shift(n as f64 + 1.0));
    let u0: Vec<f64> = m.nodes.iter().map(|&x| (std::f64::consts::PI * x).sin()).collect();
    let p = HumProblem::new(m.clone(), spec, tg, masks, u0.clone(), penalty);
    let res = Hum::new(&p)?.solve();
    let prop = Propagator::new(&assemble(spec, &m)?, tg)?;
    let controlled = prop.forward(&u0, Some(&res.control));
    let free = prop.forward(&u0, None);
    Ok(ControlRun {
        final_ratio: res.final_norm / res.u0_norm,
        control_cost: res.control_cost,
        cg_iters: res.cg_iters,
        converged: res.converged,
        t: tg.times(),
        controlled_norm: controlled.iter().map(|u| m.norm(u)).collect(),
        free_norm: free.iter().map(|u| m.norm(u)).collect(),
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = groundStateCurve)]
pub fn ground_state_curve_js(mu: f64, n: usize, eps: &[f64]) -> std::result::Result<String, JsError> {
    to_js(ground_state_curve(mu, n, eps))
}

#[wasm_bindgen(js_name = weightProfile)]
pub fn weight_profile_js(lambda: f64, r0: f64, n: usize) -> std::result::Result<String, JsError> {
    to_js(weight_profile(lambda, r0, n))
}

#[wasm_bindgen(js_name = controlRun)]
pub fn control_run_js(mu: f64, n: usize, nt: usize, penalty: f64) -> std::result::Result<String, JsError> {
    to_js(control_run(mu, n, nt, penalty))
}
