//! The five subcommands. Each writes its artifacts atomically into the
//! output directory; wall times go to a separate `timing.csv` so the other
//! artifacts are reproducible byte for byte.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use cure::data::ProblemData;
use cure::factor::FactorModel;
use cure::io::{atomic_write, fmt_f64, read_dense_csv, read_json, read_matrix_csv, write_json, write_matrix_csv};
use cure::metrics::{evaluate, sparsity_summary, trimmed_mean_sd, EvalReport};
use cure::objective::rss_of;
use cure::simgen::{gen_dataset, SimModel, SimSpec, TruthRecord};
use cure::stagewise::run_path;
use cure::tuning::Criterion;

use crate::config::{
    merge_config, required, BenchmarkArgs, CriterionArg, EvalArgs, FitArgs, Method, ModelArg, PathsArgs, SimParams,
    SimulateArgs,
};
use crate::methods::{fit_method, MethodSettings};
use crate::CliError;

/// Contents of `model.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub method: Method,
    pub model: FactorModel,
}

fn out_dir(dir: &Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(cure::Error::from)?;
    Ok(dir)
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    Ok(atomic_write(path, text.as_bytes())?)
}

fn load_problem(x: &Path, y: &Path) -> Result<ProblemData, CliError> {
    let x = read_dense_csv(x)?;
    let y = read_matrix_csv(y)?;
    Ok(ProblemData::build(x, y.values, y.mask)?)
}

pub fn sim_spec(sim: &SimParams, seed: u64) -> Result<SimSpec, CliError> {
    let model = match sim.model.unwrap_or(ModelArg::I) {
        ModelArg::I => SimModel::I,
        ModelArg::Ii => SimModel::II,
        ModelArg::Iii => SimModel::III,
    };
    let mut spec = SimSpec::new(
        model,
        sim.n.unwrap_or(40),
        sim.p.unwrap_or(40),
        sim.q.unwrap_or(40),
        sim.true_rank.unwrap_or(3),
    )
    .with_snr(sim.snr.unwrap_or(1.0))
    .with_rho(sim.rho.unwrap_or(0.3))
    .with_seed(seed);
    if let Some(s) = sim.s_u {
        spec.s_u = s;
    }
    if let Some(s) = sim.s_v {
        spec.s_v = s;
    }
    spec.validate()?;
    Ok(spec)
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let config = args.config.clone();
    let args = merge_config(args, config.as_deref())?;
    let spec = sim_spec(&args.sim, args.seed.unwrap_or(0))?;
    let dir = out_dir(&args.out_dir)?;
    let truth = gen_dataset(&spec)?;
    write_matrix_csv(&dir.join("X.csv"), &truth.x, None)?;
    write_matrix_csv(&dir.join("Y.csv"), &truth.y, None)?;
    write_json(&dir.join("truth.json"), &truth.record())?;
    Ok(())
}

const REPORT_COLUMNS: [&str; 9] = ["rank", "er_c", "er_xc", "fpr", "fnr", "u_l0", "u_l20", "v_l0", "v_l20"];

fn report_cells(r: &EvalReport) -> Vec<String> {
    vec![
        r.rank.to_string(),
        fmt_f64(r.er_c),
        fmt_f64(r.er_xc),
        fmt_f64(r.fpr),
        fmt_f64(r.fnr),
        r.u_l0.to_string(),
        r.u_l20.to_string(),
        r.v_l0.to_string(),
        r.v_l20.to_string(),
    ]
}

pub fn fit(args: FitArgs) -> Result<(), CliError> {
    let config = args.config.clone();
    let args = merge_config(args, config.as_deref())?;
    let method = required(&args.method, "method")?;
    let problem = load_problem(&required(&args.x, "x")?, &required(&args.y, "y")?)?;
    let settings = MethodSettings::new(method, args.rank, &args.solver, args.seed.unwrap_or(0))?;
    let dir = out_dir(&args.out_dir)?;

    let start = Instant::now();
    let model = fit_method(&problem, &settings)?;
    let wall = start.elapsed().as_secs_f64();

    let rss = rss_of(&problem, &model.to_matrix())?;
    let (u_l0, u_l20, v_l0, v_l20) = sparsity_summary(&model);
    let mut header = vec!["method", "rank", "rss", "u_l0", "u_l20", "v_l0", "v_l20"];
    let mut row = vec![
        method.name().to_string(),
        model.layers.iter().filter(|l| l.d != 0.0).count().to_string(),
        fmt_f64(rss),
        u_l0.to_string(),
        u_l20.to_string(),
        v_l0.to_string(),
        v_l20.to_string(),
    ];
    if let Some(path) = &args.truth {
        let truth: TruthRecord = read_json(path)?;
        let r = evaluate(&model, &truth.factors, problem.x(), wall)?;
        header.extend(["er_c", "er_xc", "fpr", "fnr"]);
        row.extend([fmt_f64(r.er_c), fmt_f64(r.er_xc), fmt_f64(r.fpr), fmt_f64(r.fnr)]);
    }
    write_json(&dir.join("model.json"), &ModelRecord { method, model })?;
    write_table(&dir.join("report.csv"), &header, &[row])?;
    write_table(
        &dir.join("timing.csv"),
        &["method", "wall_time_s"],
        &[vec![method.name().to_string(), fmt_f64(wall)]],
    )?;
    Ok(())
}

pub fn paths(args: PathsArgs) -> Result<(), CliError> {
    let config = args.config.clone();
    let args = merge_config(args, config.as_deref())?;
    let problem = load_problem(&required(&args.x, "x")?, &required(&args.y, "y")?)?;
    let settings = MethodSettings::new(Method::Seqstl, Some(1), &args.solver, 0)?;
    let criterion = match args.solver.criterion.unwrap_or(CriterionArg::Gic) {
        CriterionArg::Gic => Criterion::Gic,
        CriterionArg::Aic => Criterion::Aic,
        CriterionArg::Bic => Criterion::Bic,
        CriterionArg::Cv => return Err(CliError::Usage("paths records gic, aic or bic, not cv".into())),
    };
    let dir = out_dir(&args.out_dir)?;
    let path = run_path(&problem, &settings.stagewise.with_criterion(Some(criterion)))?;
    let mut bytes = Vec::new();
    path.write_jsonl(&mut bytes)?;
    atomic_write(&dir.join("path.jsonl"), &bytes)?;
    Ok(())
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    let config = args.config.clone();
    let args = merge_config(args, config.as_deref())?;
    let record: ModelRecord = read_json(&required(&args.model, "model")?)?;
    let truth: TruthRecord = read_json(&required(&args.truth, "truth")?)?;
    let x = read_dense_csv(&required(&args.x, "x")?)?;
    let dir = out_dir(&args.out_dir)?;
    let r = evaluate(&record.model, &truth.factors, &x, 0.0)?;
    let mut header = vec!["method"];
    header.extend(REPORT_COLUMNS);
    let mut row = vec![record.method.name().to_string()];
    row.extend(report_cells(&r));
    write_table(&dir.join("report.csv"), &header, &[row])
}

fn metric_values(r: &EvalReport) -> [f64; 9] {
    [
        r.er_c,
        r.er_xc,
        r.fpr,
        r.fnr,
        r.u_l0 as f64,
        r.u_l20 as f64,
        r.v_l0 as f64,
        r.v_l20 as f64,
        r.rank as f64,
    ]
}

const METRIC_NAMES: [&str; 9] = ["er_c", "er_xc", "fpr", "fnr", "u_l0", "u_l20", "v_l0", "v_l20", "rank"];

fn mean_sd_cell(values: &[f64], trim: f64) -> Result<String, CliError> {
    let (m, sd) = trimmed_mean_sd(values, trim)?;
    Ok(format!("{}({})", fmt_f64(m), fmt_f64(sd)))
}

pub fn benchmark(args: BenchmarkArgs) -> Result<(), CliError> {
    let config = args.config.clone();
    let args = merge_config(args, config.as_deref())?;
    let methods = args.methods.clone().unwrap_or_else(|| Method::ALL.to_vec());
    if methods.is_empty() {
        return Err(CliError::Usage("--methods is empty".into()));
    }
    let reps = args.reps.unwrap_or(20);
    if reps == 0 {
        return Err(CliError::Usage("--reps must be positive".into()));
    }
    if let Some(t) = args.trim {
        if !(0.0..0.5).contains(&t) {
            return Err(CliError::Usage(format!("--trim must lie in [0, 0.5), got {t}")));
        }
    }
    let seed = args.seed.unwrap_or(0);
    let base = sim_spec(&args.sim, seed)?;
    let rank = args.rank.unwrap_or(base.r_star);
    let dir = out_dir(&args.out_dir)?;

    // one row of reports per replication, one report per method
    let results: Vec<Vec<EvalReport>> = (0..reps)
        .into_par_iter()
        .map(|i| -> Result<Vec<EvalReport>, CliError> {
            let rep_seed = seed.wrapping_add(i as u64);
            let truth = gen_dataset(&base.clone().with_seed(rep_seed))?;
            let problem = ProblemData::new(truth.x.clone(), truth.y.clone())?;
            methods
                .iter()
                .map(|&m| {
                    let mut s = MethodSettings::new(m, Some(rank), &args.solver, rep_seed)?;
                    s.concurrent_layers = false;
                    let start = Instant::now();
                    let model = fit_method(&problem, &s)?;
                    let wall = start.elapsed().as_secs_f64();
                    Ok(evaluate(&model, &truth.factors, &truth.x, wall)?)
                })
                .collect()
        })
        .collect::<Result<_, CliError>>()?;

    let mut header = vec!["rep", "seed", "method"];
    header.extend(METRIC_NAMES);
    let mut rows = Vec::new();
    for (i, row) in results.iter().enumerate() {
        for (m, r) in methods.iter().zip(row) {
            let mut cells = vec![i.to_string(), seed.wrapping_add(i as u64).to_string(), m.name().to_string()];
            cells.extend(metric_values(r).iter().map(|v| fmt_f64(*v)));
            rows.push(cells);
        }
    }
    write_table(&dir.join("reps.csv"), &header, &rows)?;

    let trimmed: Vec<String> = METRIC_NAMES.iter().map(|n| format!("{n}_trim")).collect();
    let mut header = vec!["method", "reps"];
    header.extend(METRIC_NAMES);
    if args.trim.is_some() {
        header.extend(trimmed.iter().map(String::as_str));
    }
    let mut table = Vec::new();
    let mut timing = Vec::new();
    for (k, m) in methods.iter().enumerate() {
        let mut cells = vec![m.name().to_string(), reps.to_string()];
        let per_metric: Vec<Vec<f64>> = (0..METRIC_NAMES.len())
            .map(|j| results.iter().map(|row| metric_values(&row[k])[j]).collect())
            .collect();
        for values in &per_metric {
            cells.push(mean_sd_cell(values, 0.0)?);
        }
        if let Some(t) = args.trim {
            for values in &per_metric {
                cells.push(mean_sd_cell(values, t)?);
            }
        }
        table.push(cells);
        let times: Vec<f64> = results.iter().map(|row| row[k].wall_time_s).collect();
        timing.push(vec![m.name().to_string(), mean_sd_cell(&times, 0.0)?]);
    }
    write_table(&dir.join("table.csv"), &header, &table)?;
    write_table(&dir.join("timing.csv"), &["method", "wall_time_s"], &timing)?;
    Ok(())
}

