//! One function per run command. Each writes its artifacts and returns the
//! stdout summary.

use anyhow::Result;
use serde_json::{json, Value};
use xover_core::fixtures;
use xover_core::simulation::two_stage_run;
use xover_core::{
    assemble, misspec_table, optimize, relative_d_efficiency, sensitivity, DesignProblem, OptimizationResult,
};

use crate::config::{Command, RunConfig};
use crate::output::{fmt6, matrix_csv, table, Outputs};

pub fn execute(cfg: &RunConfig, out: &mut Outputs) -> Result<String> {
    match cfg.command {
        Command::Optimize => run_optimize(cfg, out),
        Command::Efficiency => run_efficiency(cfg, out),
        Command::MisspecTable => run_misspec(cfg, out),
        Command::Simulate => run_simulate(cfg, out),
        Command::DumpMatrices => run_dump(cfg, out),
    }
}

fn problem_json(prob: &DesignProblem<f64>) -> Value {
    json!({
        "t": prob.treatments(),
        "p": prob.periods(),
        "family": prob.family(),
        "sequences": prob.sequences(),
        "theta": prob.theta(),
        "working_correlation": prob.correlation().kind().name(),
        "true_correlation": prob.true_correlation().map(|c| c.kind().name()),
    })
}

fn weights_csv(res: &OptimizationResult<f64>) -> String {
    let mut body = String::from("sequence,weight,objective,converged,restarts\n");
    for (seq, w) in res.design.iter() {
        body.push_str(&format!(
            "{seq},{},{:.6e},{},{}\n",
            fmt6(w),
            res.objective_value,
            res.converged,
            res.restart_objectives.len()
        ));
    }
    body
}

fn run_optimize(cfg: &RunConfig, out: &mut Outputs) -> Result<String> {
    let prob = cfg.problem()?;
    let opt = cfg.optimizer_config();
    let res = optimize(&prob, &opt)?;
    out.csv("weights.csv", &weights_csv(&res))?;
    out.json(
        "result.json",
        json!({
            "command": "optimize",
            "problem": problem_json(&prob),
            "optimizer": opt,
            "weights": res.design,
            "objective_value": res.objective_value,
            "log_objective": res.log_objective,
            "converged": res.converged,
            "iterations": res.iterations,
            "restart_spread": res.restart_spread,
            "restart_objectives": res.restart_objectives,
        }),
    )?;
    let rows: Vec<Vec<String>> = res.design.iter().map(|(s, w)| vec![s.to_string(), fmt6(w)]).collect();
    Ok(format!(
        "{}\ndet Var(tau) per subject: {:.6e}\niterations: {}  restart spread: {:.3e}\n",
        table(&["sequence", "weight"], &rows),
        res.objective_value,
        res.iterations,
        res.restart_spread
    ))
}

fn run_efficiency(cfg: &RunConfig, out: &mut Outputs) -> Result<String> {
    let truth = cfg.problem()?;
    let assumed = cfg.assumed_problem(&truth)?;
    let opt = cfg.optimizer_config();
    let best = optimize(&truth, &opt)?;
    let chosen = optimize(&assumed, &opt)?;
    let efficiency = relative_d_efficiency(&truth, &assumed, &opt)?;
    // the sensitivity measure compares two parameter values under one correlation
    let loss = (truth.correlation() == assumed.correlation())
        .then(|| sensitivity(&truth, &assumed, &chosen.design))
        .transpose()?;
    let mut metrics = format!("metric,value\nefficiency,{}\n", fmt6(efficiency));
    if let Some(s) = loss {
        metrics.push_str(&format!("sensitivity,{}\n", fmt6(s)));
    }
    out.csv("efficiency.csv", &metrics)?;
    let mut designs = String::from("sequence,weight_true,weight_assumed\n");
    let mut rows = Vec::new();
    for ((seq, wt), (_, wa)) in best.design.iter().zip(chosen.design.iter()) {
        designs.push_str(&format!("{seq},{},{}\n", fmt6(wt), fmt6(wa)));
        rows.push(vec![seq.to_string(), fmt6(wt), fmt6(wa)]);
    }
    out.csv("designs.csv", &designs)?;
    out.json(
        "efficiency.json",
        json!({
            "command": "efficiency",
            "true_problem": problem_json(&truth),
            "assumed_problem": problem_json(&assumed),
            "efficiency": efficiency,
            "sensitivity": loss,
            "true_optimal": best.design,
            "assumed_optimal": chosen.design,
        }),
    )?;
    let mut summary = table(&["sequence", "optimal (true)", "optimal (assumed)"], &rows);
    summary.push_str(&format!("\nrelative D-efficiency: {}\n", fmt6(efficiency)));
    if let Some(s) = loss {
        summary.push_str(&format!("sensitivity: {}\n", fmt6(s)));
    }
    Ok(summary)
}

fn run_misspec(cfg: &RunConfig, out: &mut Outputs) -> Result<String> {
    let base = cfg.problem()?;
    let (theta1, theta2, structures) = cfg.misspec_inputs()?;
    let tbl = misspec_table(&base, &theta1, &theta2, &structures, &cfg.optimizer_config())?;
    out.csv("misspec.csv", &tbl.to_csv())?;
    let rows: Vec<Vec<String>> = tbl
        .rows
        .iter()
        .map(|r| {
            vec![
                r.true_name.clone(),
                r.working_name.clone(),
                fmt6(r.efficiency[0]),
                fmt6(r.efficiency[1]),
            ]
        })
        .collect();
    let worst = tbl.rows.iter().flat_map(|r| r.efficiency).fold(f64::INFINITY, f64::min);
    Ok(format!(
        "{}\nlowest efficiency: {}\n",
        table(&["true", "working", "efficiency theta1", "efficiency theta2"], &rows),
        fmt6(worst)
    ))
}

fn run_simulate(cfg: &RunConfig, out: &mut Outputs) -> Result<String> {
    let sim = cfg.two_stage_config()?;
    let rep = two_stage_run(&sim)?;
    let metrics = format!(
        "metric,value\nmse_uniform,{}\nmse_optimal,{}\nratio,{}\nexcluded_uniform,{}\nexcluded_optimal,{}\nstage2_fallbacks,{}\n",
        fmt6(rep.mse_uniform),
        fmt6(rep.mse_optimal),
        fmt6(rep.ratio()),
        rep.excluded_uniform,
        rep.excluded_optimal,
        rep.stage2_fallbacks
    );
    out.csv("simulation.csv", &metrics)?;
    out.csv("replications.csv", &rep.records_csv())?;
    out.json("simulation.json", serde_json::to_value(&rep)?)?;
    let rows = vec![
        vec![
            "uniform".into(),
            fmt6(rep.mse_uniform),
            rep.excluded_uniform.to_string(),
        ],
        vec![
            "two-stage optimal".into(),
            fmt6(rep.mse_optimal),
            rep.excluded_optimal.to_string(),
        ],
    ];
    Ok(format!(
        "{}\nratio uniform/optimal: {}\nstage-two fallbacks to uniform: {}\nseed: {}\n",
        table(&["arm", "mse", "excluded"], &rows),
        fmt6(rep.ratio()),
        rep.stage2_fallbacks,
        rep.seed
    ))
}

fn run_dump(cfg: &RunConfig, out: &mut Outputs) -> Result<String> {
    let prob = cfg.problem()?;
    let a = assemble(&prob)?;
    let mut rows = Vec::new();
    for (k, b) in a.blocks().iter().enumerate() {
        let dir = format!("{:02}_{}", k + 1, b.sequence);
        let p = prob.periods();
        let column = |v: &[f64]| v.iter().map(|&x| vec![x]).collect::<Vec<_>>();
        let d: Vec<Vec<f64>> = (0..p)
            .map(|i| (0..p).map(|j| if i == j { b.variance[i] } else { 0.0 }).collect())
            .collect();
        out.csv(&format!("{dir}/1_X.csv"), &matrix_csv(&b.x.to_rows()))?;
        out.csv(&format!("{dir}/2_eta.csv"), &matrix_csv(&column(&b.eta)))?;
        out.csv(&format!("{dir}/3_mu.csv"), &matrix_csv(&column(&b.mu)))?;
        out.csv(&format!("{dir}/4_D.csv"), &matrix_csv(&d))?;
        out.csv(&format!("{dir}/5_W_inv.csv"), &matrix_csv(&b.w_inv.to_rows()))?;
        out.csv(&format!("{dir}/6_dmu_dtheta.csv"), &matrix_csv(&b.dmu.to_rows()))?;
        let mu: Vec<String> = b.mu.iter().map(|&m| fmt6(m)).collect();
        rows.push(vec![b.sequence.to_string(), mu.join(" ")]);
    }
    out.json("problem.json", problem_json(&prob))?;
    let target = out.dir().map(|d| d.display().to_string()).unwrap_or_default();
    Ok(format!(
        "{}\nmatrices written to {target}\n",
        table(&["sequence", "mu"], &rows)
    ))
}

pub fn list_fixtures() -> String {
    let rows: Vec<Vec<String>> = fixtures::fixture_names()
        .into_iter()
        .map(|name| {
            let (spec, _) = fixtures::resolve(&name).expect("catalog names resolve");
            let seqs = if spec.sequences.is_empty() {
                format!("all {} orderings", spec.sequence_list().len())
            } else {
                spec.sequences.join(" ")
            };
            vec![
                name,
                spec.family.name().to_string(),
                format!("p={} t={}", spec.p, spec.t),
                seqs,
            ]
        })
        .collect();
    table(&["fixture", "family", "shape", "sequences"], &rows)
}
