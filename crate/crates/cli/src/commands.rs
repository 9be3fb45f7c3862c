//! Subcommand implementations. Each writes its artifacts plus the resolved
//! configuration into one output directory.

use std::fs;
use std::path::PathBuf;

use spdectl::io::{dump_trajectory, read_params, write_dump, write_gains_csv, write_history_csv, write_params, write_series_csv, DumpHeader};
use spdectl::optimize::{map_paths, random_direction, sgd_train_with, CostEstimate};
use spdectl::riccati::lq_value_continuous;
use spdectl::{
    evaluate_cost, grad_check, lq_optimal_cost, pathwise_cost, riccati_solve, ControlProblem, Family, FeedbackParams,
};

use crate::config::{Config, ConfigError};
use crate::output::OutputDir;
use crate::{CliError, Command};

pub fn run(command: Command, cfg: &Config, out: PathBuf, quiet: bool) -> Result<PathBuf, CliError> {
    let mut dir = OutputDir::create(out)?;
    dir.write_text("config.cfg", &cfg.render())?;
    let mut summary = Summary::default();
    summary.push("command", command.name());
    summary.push("seed", cfg.seed()?);
    match command {
        Command::Train => train(cfg, &mut dir, &mut summary, quiet)?,
        Command::Simulate => simulate(cfg, &mut dir, &mut summary)?,
        Command::Riccati => riccati(cfg, &mut dir, &mut summary)?,
        Command::GradCheck => check(cfg, &mut dir, &mut summary)?,
        Command::Evaluate => evaluate(cfg, &mut summary)?,
    }
    dir.write_text("summary.txt", &summary.text)?;
    if !quiet {
        print!("{}", summary.text);
    }
    dir.finish()
}

#[derive(Default)]
struct Summary {
    text: String,
}

impl Summary {
    fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        self.text.push_str(&format!("{key} = {value}\n"));
    }

    fn cost(&mut self, prefix: &str, c: &CostEstimate) {
        self.push(&format!("{prefix}cost_mean"), format!("{:?}", c.mean));
        self.push(&format!("{prefix}cost_std_error"), format!("{:?}", c.std_error));
        self.push(&format!("{prefix}cost_samples"), c.samples);
        self.push(&format!("{prefix}cost_failures"), c.failures);
    }
}

/// Initial parameters of the configured family.
fn initial_params(cfg: &Config, problem: &ControlProblem) -> Result<FeedbackParams, CliError> {
    let family = cfg.family()?;
    Ok(FeedbackParams::initialize(family, problem.kind(), problem.dim(), problem.horizon(), cfg.u64("init_seed")?)
        .map_err(|e| ConfigError { key: "family".into(), message: e.to_string() })?)
}

/// Parameters from the `params` file, or the family's initial parameters.
fn load_params(cfg: &Config, problem: &ControlProblem) -> Result<FeedbackParams, CliError> {
    let init = initial_params(cfg, problem)?;
    match cfg.get("params") {
        "none" => Ok(init),
        path => {
            let bytes = fs::read(path).map_err(|e| CliError::io(path.as_ref(), e))?;
            let alpha = read_params(&bytes[..]).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
            init.with_alpha(alpha).map_err(|e| ConfigError { key: "params".into(), message: e.to_string() }.into())
        }
    }
}

fn params_meta(params: &FeedbackParams) -> String {
    format!(
        "family = {}\nbasis = {}\ndim = {}\nhorizon = {:?}\ncount = {}\n",
        params.family().name(),
        params.kind().name(),
        params.dim(),
        params.horizon(),
        params.param_count()
    )
}

fn write_params_files(dir: &mut OutputDir, stem: &str, params: &FeedbackParams) -> Result<(), CliError> {
    dir.write(&format!("{stem}.bin"), |w| write_params(w, &params.alpha))?;
    dir.write_text(&format!("{stem}.meta"), &params_meta(params))
}

/// Riccati benchmark cost when the configuration is the LQ heat problem.
fn benchmark(cfg: &Config, problem: &ControlProblem) -> Result<Option<f64>, CliError> {
    if cfg.get("problem") != "heat-lq" || cfg.get("basis") != "spectral" {
        return Ok(None);
    }
    let sol = riccati_solve(cfg.f64("length")?, cfg.usize("modes")?, problem.horizon(), problem.dt())?;
    Ok(Some(lq_optimal_cost(&sol, problem.initial(), problem.sigma())?))
}

fn train(cfg: &Config, dir: &mut OutputDir, summary: &mut Summary, quiet: bool) -> Result<(), CliError> {
    let problem = cfg.problem()?;
    let init = load_params(cfg, &problem)?;
    if init.param_count() == 0 {
        return Err(ConfigError { key: "family".into(), message: "has no trainable parameters".into() }.into());
    }
    let train_cfg = cfg.train_config()?;
    let snapshot_every = cfg.usize("snapshot_every")?;
    let report_every = (train_cfg.max_iterations / 20).max(1);
    let mut snapshots = Vec::new();
    let (trained, history) = sgd_train_with(&problem, &init, &train_cfg, |row, params| {
        if snapshot_every > 0 && (row.iteration + 1) % snapshot_every == 0 {
            snapshots.push((row.iteration + 1, params.alpha.clone()));
        }
        if !quiet && (row.iteration + 1) % report_every == 0 {
            println!(
                "iteration {:>6}  cost {:.5} +- {:.5}  |grad| {:.4e}  step {:.3e}",
                row.iteration + 1,
                row.cost,
                row.cost_std_error,
                row.grad_norm,
                row.step_size
            );
        }
        true
    })?;
    for (it, alpha) in snapshots {
        dir.write(&format!("params-{it:06}.bin"), |w| write_params(w, &alpha))?;
    }
    write_params_files(dir, "params", &trained)?;
    if cfg.bool("dump_history")? {
        dir.write("history.csv", |w| write_history_csv(w, &history.rows))?;
    }
    summary.push("termination", history.termination.name());
    summary.push("updates", history.updates);
    if let Some(last) = history.rows.last() {
        summary.push("final_grad_norm", format!("{:?}", last.grad_norm));
    }
    let eval = evaluate_cost(&problem, &trained, cfg.usize("eval_samples")?.max(1), cfg.seed()?)?;
    summary.cost("", &eval);
    if let Some(b) = benchmark(cfg, &problem)? {
        summary.push("riccati_cost", format!("{b:?}"));
        summary.push("cost_ratio", format!("{:?}", eval.mean / b));
    }
    Ok(())
}

struct PathStats {
    cost: f64,
    norms: Vec<f64>,
    tracking: Vec<f64>,
}

fn simulate(cfg: &Config, dir: &mut OutputDir, summary: &mut Summary) -> Result<(), CliError> {
    let problem = cfg.problem()?;
    let params = load_params(cfg, &problem)?;
    let samples = cfg.usize("eval_samples")?.max(1);
    let dumps = cfg.usize("dump_trajectories")?;
    let dump_controls = cfg.bool("dump_controls")?;
    let space = problem.space().clone();
    let length = space.length();
    let root = dir.path().to_path_buf();
    let batch = map_paths(&problem, &params, samples, cfg.seed()?, |i, traj| {
        if i < dumps {
            dump_trajectory(&root.join(format!("traj-{i:04}.fctl")), traj, length)?;
            if dump_controls {
                let header = DumpHeader {
                    n: (traj.dim - 1) as u32,
                    steps: (traj.steps() - 1) as u32,
                    dt: problem.dt(),
                    length,
                };
                let file = fs::File::create(root.join(format!("controls-{i:04}.fctl")))?;
                write_dump(std::io::BufWriter::new(file), &header, &traj.controls)?;
            }
        }
        let norms = (0..=traj.steps()).map(|j| space.norm_sq(traj.state(j))).collect();
        let tracking = match problem.has_reference() {
            true => (0..=traj.steps())
                .map(|j| {
                    let r = problem.reference_state(j).unwrap();
                    let d: Vec<f64> = traj.state(j).iter().zip(r).map(|(a, b)| a - b).collect();
                    space.norm_sq(&d)
                })
                .collect(),
            false => Vec::new(),
        };
        Ok(PathStats { cost: pathwise_cost(&problem, &params, traj)?, norms, tracking })
    })?;
    // dumps are written by the sampler threads
    for i in 0..dumps.min(samples) {
        dir.register(&format!("traj-{i:04}.fctl"))?;
        if dump_controls {
            dir.register(&format!("controls-{i:04}.fctl"))?;
        }
    }
    let m = batch.values.len() as f64;
    let costs: Vec<f64> = batch.values.iter().map(|s| s.cost).collect();
    let mean = costs.iter().sum::<f64>() / m;
    let se = if costs.len() > 1 {
        (costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
    } else {
        0.0
    };
    summary.cost("", &CostEstimate { mean, std_error: se, samples: batch.values.len(), failures: batch.failures });
    let steps = problem.steps();
    let times: Vec<f64> = (0..=steps).map(|j| problem.time(j)).collect();
    let avg = |f: &dyn Fn(&PathStats) -> &Vec<f64>| -> Vec<f64> {
        (0..=steps).map(|j| batch.values.iter().map(|s| f(s)[j]).sum::<f64>() / m).collect()
    };
    let mut names = vec!["mean_norm_sq"];
    let mut columns = vec![avg(&|s| &s.norms)];
    if problem.has_reference() {
        names.push("mean_tracking_sq");
        columns.push(avg(&|s| &s.tracking));
        let reference_norm = space.norm_sq(problem.reference_state(steps).unwrap());
        let terminal: Vec<f64> = batch.values.iter().map(|s| s.tracking[steps]).collect();
        let collapsed = terminal.iter().filter(|&&e| e > 0.25 * reference_norm).count();
        summary.push("terminal_tracking_mean", format!("{:?}", terminal.iter().sum::<f64>() / m));
        summary.push("reference_terminal_norm_sq", format!("{reference_norm:?}"));
        summary.push("collapsed_paths", collapsed);
    }
    dir.write("norms.csv", |w| write_series_csv(w, &times, &names, &columns))?;
    Ok(())
}

fn riccati(cfg: &Config, dir: &mut OutputDir, summary: &mut Summary) -> Result<(), CliError> {
    if cfg.get("problem") != "heat-lq" || cfg.get("basis") != "spectral" {
        return Err(ConfigError {
            key: "problem".into(),
            message: "the Riccati benchmark needs problem = heat-lq and basis = spectral".into(),
        }
        .into());
    }
    let problem = cfg.problem()?;
    let sol = riccati_solve(cfg.f64("length")?, cfg.usize("modes")?, problem.horizon(), problem.dt())?;
    if cfg.bool("dump_gains")? {
        dir.write("gains.csv", |w| write_gains_csv(w, &sol))?;
    }
    summary.push("lq_optimal_cost", format!("{:?}", lq_optimal_cost(&sol, problem.initial(), problem.sigma())?));
    summary.push("lq_value_continuous", format!("{:?}", lq_value_continuous(&sol, problem.initial(), problem.sigma())?));
    let params = FeedbackParams::new(
        Family::Riccati(std::sync::Arc::new(sol)),
        problem.kind(),
        problem.dim(),
        problem.horizon(),
        Vec::new(),
    )?;
    let eval = evaluate_cost(&problem, &params, cfg.usize("eval_samples")?.max(1), cfg.seed()?)?;
    summary.cost("closed_loop_", &eval);
    Ok(())
}

fn check(cfg: &Config, dir: &mut OutputDir, summary: &mut Summary) -> Result<(), CliError> {
    let problem = cfg.problem()?;
    let mut params = load_params(cfg, &problem)?;
    let seed = cfg.seed()?;
    if cfg.get("params") == "none" {
        // move away from the zero output layer so every block is exercised
        let shift = random_direction(params.param_count(), seed ^ 0x5eed);
        params.alpha.iter_mut().zip(shift).for_each(|(a, s)| *a += 0.1 * s);
    }
    let direction = random_direction(params.param_count(), seed.wrapping_add(1));
    let report = grad_check(&problem, &params, &direction, &cfg.steps_list()?, seed, cfg.f64("grad_check_tolerance")?)?;
    dir.write("grad_check.csv", |w| {
        writeln!(w, "h,finite_difference,abs_error,rel_error")?;
        for r in &report.rows {
            writeln!(w, "{:?},{:?},{:?},{:?}", r.h, r.finite_difference, r.abs_error, r.rel_error)?;
        }
        Ok(())
    })?;
    summary.push("adjoint_directional", format!("{:?}", report.adjoint));
    summary.push("forward_sensitivity", format!("{:?}", report.sensitivity));
    summary.push("sensitivity_rel_error", format!("{:?}", report.sensitivity_rel_error));
    summary.push("min_fd_rel_error", format!("{:?}", report.min_rel_error));
    summary.push("tolerance", format!("{:?}", report.tolerance));
    summary.push("verdict", if report.passed { "pass" } else { "fail" });
    Ok(())
}

fn evaluate(cfg: &Config, summary: &mut Summary) -> Result<(), CliError> {
    let problem = cfg.problem()?;
    let params = load_params(cfg, &problem)?;
    let eval = evaluate_cost(&problem, &params, cfg.usize("eval_samples")?.max(1), cfg.seed()?)?;
    summary.cost("", &eval);
    if let Some(b) = benchmark(cfg, &problem)? {
        summary.push("riccati_cost", format!("{b:?}"));
    }
    Ok(())
}
