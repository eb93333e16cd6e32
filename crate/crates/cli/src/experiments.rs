//! One function per experiment. Each writes its files and returns the
//! checked invariants plus a JSON summary for the manifest.

use rayon::prelude::*;
use serde_json::{json, Value};

use heatctl_core::carleman::{
    admissibility, check_boundary_flux, empirical_carleman, find_lambda0, random_terminal_states, sample_propositions,
    select_r, RuleStatus, WeightConfig, Weights,
};
use heatctl_core::cost::{minimize_cost, verify_duhamel, CostProblem};
use heatctl_core::hardy::{check_norm_equivalence, hardy_report, select_a1, HardyReport, QuadForms};
use heatctl_core::hum::{Hum, HumProblem};
use heatctl_core::mesh::build_regions;
use heatctl_core::operator::{assemble, Propagator, Trajectory};
use heatctl_core::spectral::{ground_state, summarize_sweep};
use heatctl_core::{Error, Mesh1D, OperatorSpec, RegionMasks, Regularization, TimeGrid, MU_STAR};

use crate::config::{Experiment, ExperimentConfig};
use crate::output::{Invariant, OutDir};
use crate::row;

#[derive(Debug)]
pub enum RunError {
    Usage(String),
    Numerical(String),
    Property(String),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidMesh(_)
            | Error::RegionNesting(_)
            | Error::R0Overlap { .. }
            | Error::InvalidParameter(_)
            | Error::Dimension(_)
            | Error::UnderResolved { .. }
            | Error::InfeasibleSlope { .. }
            | Error::SingularTime(_)
            | Error::NotApplicable(_) => RunError::Usage(msg),
            Error::PropertyFailure(_) => RunError::Property(msg),
            _ => RunError::Numerical(msg),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Numerical(format!("i/o: {e}"))
    }
}

pub struct Outcome {
    pub invariants: Vec<Invariant>,
    pub summary: Value,
}

type Run = Result<Outcome, RunError>;

struct Ctx {
    mesh: Mesh1D,
    masks: RegionMasks,
}

fn ctx(cfg: &ExperimentConfig) -> Result<Ctx, RunError> {
    let mesh = Mesh1D::new(cfg.n())?;
    let masks = build_regions(&mesh, cfg.omega_iv(), cfg.omega0_iv(), cfg.r0)?;
    Ok(Ctx { mesh, masks })
}

pub fn dispatch(cfg: &ExperimentConfig, out: &mut OutDir) -> Run {
    match cfg.experiment() {
        Experiment::Hardy => hardy(cfg, out),
        Experiment::Spectrum => spectrum(cfg, out),
        Experiment::Blowup => blowup(cfg, out),
        Experiment::Stabilize => stabilize(cfg, out),
        Experiment::Weights => weights(cfg, out),
        Experiment::Carleman => carleman(cfg, out),
        Experiment::Control => control(cfg, out),
        Experiment::Observability => observability(cfg, out),
    }
}

fn hardy(cfg: &ExperimentConfig, out: &mut OutDir) -> Run {
    let n = cfg.n();
    let pairs: Vec<(f64, f64)> =
        cfg.mu_list.iter().flat_map(|&mu| cfg.gammas().into_iter().map(move |g| (mu, g))).collect();
    let reports: Vec<HardyReport> =
        pairs.par_iter().map(|&(mu, g)| hardy_report(n, mu, g)).collect::<Result<_, _>>()?;
    let mesh = Mesh1D::new(n)?;
    let mut inv = vec![];
    let rayleigh = reports.first().map_or(f64::NAN, |r| r.rayleigh_min);
    inv.push(Invariant::new(
        "rayleigh_above_critical",
        rayleigh > MU_STAR,
        format!("min Rayleigh quotient {rayleigh}"),
    ));
    let mut equiv = vec![];
    for r in reports.iter().filter(|r| r.mu <= MU_STAR) {
        inv.push(Invariant::new(
            format!("constants_converged(mu={}, gamma={})", r.mu, r.gamma),
            r.converged,
            "refinement-stable A1..A5 found".to_string(),
        ));
        if r.converged {
            let forms = QuadForms::new(&mesh, r.gamma)?;
            let res = check_norm_equivalence(&forms, r.mu, r.a0, r.a1, 200, cfg.seed);
            inv.push(Invariant::new(
                format!("norm_equivalence(mu={}, gamma={})", r.mu, r.gamma),
                res.is_ok(),
                match &res {
                    Ok(e) => format!("lower slack {}, upper slack {}", e.lower_slack, e.upper_slack),
                    Err(e) => e.to_string(),
                },
            ));
            if let Ok(e) = res {
                equiv.push(json!({"mu": r.mu, "gamma": r.gamma, "result": e}));
            }
        }
    }
    let rows: Vec<_> = reports
        .iter()
        .map(|r| {
            let v = r.csv_row();
            let mut row = row![v[0], v[1], r.n];
            row.extend(v[3..].iter().map(|&x| x.into()));
            row
        })
        .collect();
    out.csv("hardy_report.csv", &HardyReport::CSV_HEADER, &rows)?;
    out.dat(
        "hardy.dat",
        &["mu", "gamma", "A2", "A0"],
        &[reports.iter().map(|r| vec![r.mu, r.gamma, r.a2, r.a0]).collect()],
    )?;
    Ok(Outcome { invariants: inv, summary: json!({"reports": reports, "norm_equivalence": equiv}) })
}

fn spectrum(cfg: &ExperimentConfig, out: &mut OutDir) -> Run {
    let mesh = Mesh1D::new(cfg.n())?;
    let mu = cfg.mu();
    let p = ground_state(&mesh, mu, cfg.eps, &cfg.betas)?;
    let op = assemble(OperatorSpec::new(mu, Regularization::Quadratic(cfg.eps)), &mesh)?;
    let scale = op.matrix.norm_inf();
    let mut header = vec!["mu", "eps", "n", "lambda0", "lambda1", "residual"];
    let mut r = row![mu, cfg.eps, mesh.n, p.lambda0, p.lambda1, p.residual];
    let names: Vec<(String, String)> =
        p.loc.iter().map(|l| (format!("loc_l2_{}", l.beta), format!("loc_h1_{}", l.beta))).collect();
    for ((a, b), l) in names.iter().zip(&p.loc) {
        header.push(a);
        header.push(b);
        r.push(l.l2.into());
        r.push(l.h1.into());
    }
    out.csv("spectrum.csv", &header, &[r])?;
    out.dat("phi0.dat", &["x", "phi0"], &[mesh.nodes.iter().zip(&p.phi0).map(|(&x, &v)| vec![x, v]).collect()])?;
    let inv = vec![Invariant::new(
        "eigen_residual",
        p.residual <= 1e-10 * scale,
        format!("residual {} against operator norm {scale}", p.residual),
    )];
    Ok(Outcome { invariants: inv, summary: json!({"point": p, "operator_norm": scale}) })
}

fn blowup(cfg: &ExperimentConfig, out: &mut OutDir) -> Run {
    let mesh = Mesh1D::new(cfg.n())?;
    let mu = cfg.mu();
    let points =
        cfg.eps_list.par_iter().map(|&e| ground_state(&mesh, mu, e, &cfg.betas)).collect::<Result<Vec<_>, _>>()?;
    let sweep = summarize_sweep(mu, points);
    let mut rows = vec![];
    for p in &sweep.points {
        for l in &p.loc {
            rows.push(row![mu, p.eps, p.n, p.lambda0, l.beta, l.l2, l.h1]);
        }
    }
    out.csv("blowup.csv", &["mu", "eps", "n", "lambda0", "beta", "loc_l2_beta", "loc_h1_beta"], &rows)?;
    out.json("fit.json", &json!({"mu": mu, "regime": sweep.regime, "fit": sweep.fit, "violations": sweep.violations}))?;
    out.dat(
        "blowup.dat",
        &["eps", "lambda0", "loc_h1_first_beta"],
        &[sweep.points.iter().map(|p| vec![p.eps, p.lambda0, p.loc.first().map_or(f64::NAN, |l| l.h1)]).collect()],
    )?;
    let inv = vec![Invariant::new("sweep_monotone", sweep.violations.is_empty(), sweep.violations.join("; "))];
    Ok(Outcome { invariants: inv, summary: json!({"sweep": sweep}) })
}

fn stabilize(cfg: &ExperimentConfig, out: &mut OutDir) -> Run {
    let c = ctx(cfg)?;
    let mu = cfg.mu();
    let nt = cfg.nt();
    let tg = TimeGrid::new(cfg.t_final, nt)?;
    let results = cfg
        .eps_list
        .par_iter()
        .map(|&eps| {
            let mut p = CostProblem::new(mu, eps, cfg.t_final, nt);
            if let Some(t) = cfg.cg_tol {
                p.cg_tol = t;
            }
            if let Some(m) = cfg.cg_max_iter {
                p.cg_max_iter = m;
            }
            minimize_cost(&c.mesh, &c.masks, &p)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut inv = vec![];
    let mut rows = vec![];
    let mut dat = vec![];
    let mut duhamel = vec![];
    for r in &results {
        let bound = r.analytic_lower.unwrap_or(f64::NAN);
        rows.push(row![mu, r.eps, cfg.t_final, r.lambda0, r.j_opt, bound, r.cg_iters]);
        dat.push(vec![r.eps, r.j_opt, bound]);
        if let Some(b) = r.analytic_lower {
            let scale = r.j_opt.abs().max(b.abs());
            inv.push(Invariant::new(
                format!("cost_above_bound(eps={})", r.eps),
                r.j_opt >= b - 1e-6 * scale,
                format!("J_opt {} vs bound {b}", r.j_opt),
            ));
        }
        inv.push(Invariant::new(
            format!("cg_converged(eps={})", r.eps),
            r.converged,
            format!("{} iterations", r.cg_iters),
        ));
        let d = verify_duhamel(r, tg)?;
        let scale = r.rho.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        inv.push(Invariant::new(
            format!("duhamel(eps={})", r.eps),
            d <= 1e-10 * scale.max(1e-300) * nt as f64,
            format!("summed defect {d}, max |rho| {scale}"),
        ));
        duhamel.push(d);
    }
    out.csv("stabilize.csv", &["mu", "eps", "T", "lambda0", "J_opt", "analytic_lower", "cg_iters"], &rows)?;
    out.dat("stabilize.dat", &["eps", "J_opt", "analytic_lower"], &[dat])?;
    let growth = match (results.first(), results.last()) {
        (Some(a), Some(b)) => b.j_opt / a.j_opt,
        _ => f64::NAN,
    };
    Ok(Outcome {
        invariants: inv,
        summary: json!({"cost_growth": growth, "duhamel_defects": duhamel,
            "results": results.iter().map(|r| json!({"eps": r.eps, "lambda0": r.lambda0, "j_opt": r.j_opt,
                "j_free": r.j_free, "analytic_lower": r.analytic_lower, "phi0_omega": r.phi0_omega,
                "cg_iters": r.cg_iters})).collect::<Vec<_>>()}),
    })
}

fn weight_config(cfg: &ExperimentConfig) -> WeightConfig {
    WeightConfig {
        lambda: cfg.lambda,
        varpi: cfg.varpi,
        varpi0_target: cfg.varpi0_target,
        gamma: cfg.gamma,
        r: cfg.carleman_r.unwrap_or(1.0),
        t_final: cfg.t_final,
        theta_k: cfg.theta_k,
    }
}

fn weights(cfg: &ExperimentConfig, out: &mut OutDir) -> Run {
    let c = ctx(cfg)?;
    let wc = weight_config(cfg);
    let w = Weights::build(&c.mesh, &c.masks, &wc)?;
    let adm = admissibility(&w);
    let props = sample_propositions(&w, c.mesh.h, cfg.samples);
    let search = find_lambda0(&c.mesh, &c.masks, &wc, &cfg.lambda_grid, cfg.samples)?;
    let flux = check_boundary_flux(&w, &c.mesh)?;
    let fine_mesh = Mesh1D::new(2 * c.mesh.n)?;
    let fine_masks = build_regions(&fine_mesh, cfg.omega_iv(), cfg.omega0_iv(), cfg.r0)?;
    let flux_fine = check_boundary_flux(&Weights::build(&fine_mesh, &fine_masks, &wc)?, &fine_mesh)?;
    let flux_change = (flux_fine.ln_max_ratio - flux.ln_max_ratio).exp() - 1.0;

    out.json(
        "weights.json",
        &json!({
            "params": w.params,
            "psi1": {"peak": w.psi1.peak, "slope_left": w.psi1.slope_left,
                     "slope_right": w.psi1.slope_right, "norms": w.norms},
            "varpi0": w.params.varpi0,
            "d_psi1": w.params.d_psi1,
            "lambda0": search.lambda0,
            "lambda_search": search,
            "rules": adm,
            "propositions": {"checks": props.checks, "constants": props.constants, "samples": props.samples},
            "flux": [flux, flux_fine],
        }),
    )?;
    let rows: Vec<_> = props.failures.iter().map(|f| row![f.x, f.region.label(), f.id, f.slack]).collect();
    out.csv("sampler_failures.csv", &["x", "region", "inequality", "slack"], &rows)?;
    let f = &w.fields;
    out.dat(
        "weights.dat",
        &["x", "psi1", "psi", "alpha", "ln_phi", "ln_tau"],
        &[(0..c.mesh.n)
            .map(|i| vec![f.x[i], f.psi1[i], f.psi[i], f.alpha[i], f.ln_phi[i], f.tau[i].ln_abs()])
            .collect()],
    )?;

    let inv = vec![
        Invariant::new(
            format!("propositions(lambda={})", wc.lambda),
            props.all_passed,
            props.checks.iter().filter(|c| !c.passed).map(|c| c.id).collect::<Vec<_>>().join(", "),
        ),
        Invariant::new("lambda0_found", search.lambda0.is_some(), format!("{:?}", search.lambda0)),
        Invariant::new(
            "flux_refinement",
            flux_change.abs() <= 0.1,
            format!("max ratio changes by {flux_change} from n = {} to {}", c.mesh.n, fine_mesh.n),
        ),
    ];
    let failed_rules: Vec<String> = adm.failures().map(|e| format!("{}[{}]", e.list, e.index)).collect();
    let deferred = adm.entries.iter().filter(|e| e.status == RuleStatus::Deferred).count();
    Ok(Outcome {
        invariants: inv,
        summary: json!({"lambda0": search.lambda0, "failed_rules": failed_rules, "deferred_rules": deferred,
            "constants": props.constants, "flux_change": flux_change}),
    })
}

fn carleman(cfg: &ExperimentConfig, out: &mut OutDir) -> Run {
    let c = ctx(cfg)?;
    let mu = cfg.mu();
    let nt = cfg.nt();
    let spec = OperatorSpec::new(mu, cfg.regularization());
    let op = assemble(spec, &c.mesh)?;
    let terminal = random_terminal_states(c.mesh.n, cfg.runs, cfg.seed);
    let adjoints = |nt: usize| -> Result<(TimeGrid, Vec<Trajectory>), RunError> {
        let tg = TimeGrid::new(cfg.t_final, nt)?;
        let prop = Propagator::new(&op, tg)?;
        Ok((tg, terminal.par_iter().map(|v| prop.adjoint(v)).collect()))
    };
    let a1 = select_a1(c.mesh.n, mu, cfg.gamma)?.a1;
    let (tg, runs) = adjoints(nt)?;
    let wc = weight_config(cfg);
    let selection = match cfg.carleman_r {
        Some(_) => None,
        None => Some(select_r(&wc, &c.mesh, &c.masks, tg, a1, &runs, 20)?),
    };
    let r = selection.as_ref().map_or(wc.r, |s| s.r);
    let wc = WeightConfig { r, ..wc };
    let w = Weights::build(&c.mesh, &c.masks, &wc)?;
    let emp = empirical_carleman(&w, &c.mesh, &c.masks, tg, a1, &runs)?;
    let (tg2, runs2) = adjoints(2 * nt)?;
    let emp2 = empirical_carleman(&w, &c.mesh, &c.masks, tg2, a1, &runs2)?;

    let rows: Vec<_> = emp
        .runs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut r = row![i, s.ln_lhs, s.ln_rhs, s.ln_ratio(), s.support];
            r.extend(s.ln_lhs_terms.iter().chain(&s.ln_rhs_terms).map(|&v| v.into()));
            r
        })
        .collect();
    out.csv(
        "carleman.csv",
        &[
            "run", "ln_lhs", "ln_rhs", "ln_ratio", "support", "ln_l1", "ln_l2", "ln_l3", "ln_l4", "ln_l5", "ln_m1",
            "ln_m2",
        ],
        &rows,
    )?;
    let drift = emp2.ln_max_ratio - emp.ln_max_ratio;
    out.json(
        "carleman.json",
        &json!({"mu": mu, "reg": spec.reg.label(), "a1": a1, "params": w.params, "r_selection": selection,
            "ln_min_ratio": emp.ln_min_ratio, "ln_max_ratio": emp.ln_max_ratio,
            "ln_max_ratio_nt_doubled": emp2.ln_max_ratio}),
    )?;
    let inv = vec![Invariant::new(
        "nt_doubling_stable",
        drift.abs() <= 2f64.ln(),
        format!("ln max ratio moves by {drift} from nt = {nt} to {}", 2 * nt),
    )];
    Ok(Outcome {
        invariants: inv,
        summary: json!({"r": r, "r_stable": selection.as_ref().map(|s| s.stable),
            "ln_max_ratio": emp.ln_max_ratio, "ln_max_ratio_nt_doubled": emp2.ln_max_ratio,
            "support": emp.runs.first().map(|s| s.support)}),
    })
}

fn hum_problem(cfg: &ExperimentConfig, c: &Ctx, reg: Regularization) -> Result<HumProblem, RunError> {
    let tg = TimeGrid::new(cfg.t_final, cfg.nt())?;
    let u0: Vec<f64> = c.mesh.nodes.iter().map(|&x| (std::f64::consts::PI * x).sin()).collect();
    let mut p = HumProblem::new(c.mesh.clone(), OperatorSpec::new(cfg.mu(), reg), tg, c.masks.clone(), u0, cfg.penalty);
    if let Some(t) = cfg.cg_tol {
        p.cg_tol = t;
    }
    if let Some(m) = cfg.cg_max_iter {
        p.cg_max_iter = m;
    }
    Ok(p)
}

const HUM_HEADER: [&str; 10] =
    ["mu", "reg", "T", "n", "nt", "penalty", "final_norm", "control_cost", "cg_iters", "CT_est"];

fn control(cfg: &ExperimentConfig, out: &mut OutDir) -> Run {
    let c = ctx(cfg)?;
    let reg = cfg.regularization();
    let p = hum_problem(cfg, &c, reg)?;
    let hum = Hum::new(&p)?;
    let res = hum.solve();
    let sym = hum.symmetry_defect(5, cfg.seed);
    let nt = p.tg.nt;
    out.csv(
        "control.csv",
        &HUM_HEADER,
        &[row![
            p.spec.mu,
            reg.label(),
            cfg.t_final,
            c.mesh.n,
            nt,
            cfg.penalty,
            res.final_norm,
            res.control_cost,
            res.cg_iters,
            f64::NAN
        ]],
    )?;
    let stride = nt.div_ceil(100).max(1);
    let blocks: Vec<Vec<Vec<f64>>> = (0..nt)
        .step_by(stride)
        .map(|k| {
            let t = p.tg.time(k);
            c.mesh.nodes.iter().zip(&res.control[k]).map(|(&x, &f)| vec![t, x, f]).collect()
        })
        .collect();
    out.dat("control_trajectory.dat", &["t", "x", "f"], &blocks)?;
    if cfg.dump_trajectory {
        let op = assemble(p.spec, &c.mesh)?;
        let traj = Propagator::new(&op, p.tg)?.forward(&p.u0, Some(&res.control));
        let rows: Vec<_> = traj
            .iter()
            .enumerate()
            .flat_map(|(k, u)| {
                let t = p.tg.time(k);
                u.iter().enumerate().map(move |(i, &v)| row![k, t, i, v])
            })
            .collect();
        out.csv("trajectory.csv", &["k", "t", "node", "value"], &rows)?;
    }
    let ratio = res.final_norm / res.u0_norm;
    let inv = vec![
        Invariant::new("cg_converged", res.converged, format!("{} iterations", res.cg_iters)),
        Invariant::new("gramian_symmetric", sym <= 1e-11, format!("relative defect {sym}")),
        Invariant::new(
            "null_control",
            ratio <= cfg.target_ratio,
            format!("final/initial norm {ratio} against {}", cfg.target_ratio),
        ),
    ];
    Ok(Outcome { invariants: inv, summary: json!({"result": res, "symmetry_defect": sym, "final_ratio": ratio}) })
}

fn observability(cfg: &ExperimentConfig, out: &mut OutDir) -> Run {
    let c = ctx(cfg)?;
    let ests = cfg
        .shift_list
        .par_iter()
        .map(|&m| -> Result<_, RunError> {
            let p = hum_problem(cfg, &c, Regularization::Shift(m))?;
            let e = Hum::new(&p)?.estimate_ct(cfg.ct_iters, cfg.seed)?;
            Ok((m, e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mu = cfg.mu();
    let rows: Vec<_> = ests
        .iter()
        .map(|(m, e)| {
            row![
                mu,
                Regularization::Shift(*m).label(),
                cfg.t_final,
                c.mesh.n,
                cfg.nt(),
                cfg.penalty,
                f64::NAN,
                f64::NAN,
                e.iterations,
                e.c_t_est
            ]
        })
        .collect();
    out.csv("observability.csv", &HUM_HEADER, &rows)?;
    out.dat("observability.dat", &["m", "CT_est"], &[ests.iter().map(|(m, e)| vec![*m, e.c_t_est]).collect()])?;
    let growth = match (ests.first(), ests.last()) {
        (Some(a), Some(b)) => b.1.c_t_est / a.1.c_t_est,
        _ => f64::NAN,
    };
    let inv = ests
        .iter()
        .map(|(m, e)| {
            Invariant::new(format!("estimate_finite(m={m})"), e.c_t_est.is_finite(), format!("{}", e.c_t_est))
        })
        .collect();
    Ok(Outcome {
        invariants: inv,
        summary: json!({"growth": growth, "estimates": ests.iter().map(|(m, e)| json!({"m": m, "estimate": e})).collect::<Vec<_>>()}),
    })
}
