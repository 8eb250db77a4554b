//! Executes one experiment and writes its artifacts.
//!
//! Every mode produces one trajectory CSV per branch leaf (`trajectory.csv`
//! when there is a single leaf, `trajectory_<path>.csv` otherwise, with `+`
//! spelled `p` and `-` spelled `m`), a `report.json` and a `plot.svg`. fig3
//! adds `cost.csv` and plots cost against time. Nothing time- or
//! host-dependent goes into the files, so reruns are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use hlp_core::figures::{self, FigureConfig, FigureRun};
use hlp_core::group::{GroupElement, Momentum};
use hlp_core::hybrid::{branch_path_string, execute, execute_all_branches, BranchLeaf, HybridSystem, HybridTrajectory};
use hlp_core::output::{render_svg, trajectory_rows, write_csv, write_table, Columns, Plot, Series};
use hlp_core::se2::casimir::casimir;
use hlp_core::se2::reduced::restricted_hamiltonian;
use hlp_core::se2::{PlantSystem, ReducedSystem};
use hlp_core::solver::{self, OcpProblem, SolveConfig};
use log::{debug, info, warn};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Mode};
use crate::CliError;

/// What a run produced, for the caller's summary line.
#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub report: Value,
}

fn leaf_file_name(path: &str, leaves: usize) -> String {
    if leaves == 1 {
        "trajectory.csv".into()
    } else if path.is_empty() {
        "trajectory_none.csv".into()
    } else {
        let tag: String = path.chars().map(|c| if c == '+' { 'p' } else { 'm' }).collect();
        format!("trajectory_{tag}.csv")
    }
}

fn run_leaves<S: HybridSystem>(sys: &S, x0: &[f64], cfg: &ExperimentConfig, tf: f64) -> Result<Vec<BranchLeaf>, CliError> {
    let exec = cfg.exec_config();
    match cfg.policy_spec().policy() {
        None => Ok(execute_all_branches(sys, x0, cfg.t0, tf, &exec)?),
        Some(policy) => {
            let trajectory = execute(sys, x0, cfg.t0, tf, &exec, &policy)?;
            Ok(vec![BranchLeaf {
                path: trajectory.branch_path(),
                trajectory,
            }])
        }
    }
}

fn required_tf(cfg: &ExperimentConfig) -> Result<f64, CliError> {
    cfg.tf
        .ok_or_else(|| CliError::Validation(format!("missing required key \"tf\" for mode {}", cfg.mode.name())))
}

struct Artifacts {
    out_dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Artifacts {
    fn new(out_dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.out_dir.join(name);
        fs::write(&path, bytes).map_err(CliError::io(&path))?;
        debug!("wrote {}", path.display());
        self.files.push(path);
        Ok(())
    }

    fn leaves<P>(&mut self, leaves: &[BranchLeaf], project: P) -> Result<(), CliError>
    where
        P: Fn(usize, f64, &[f64]) -> Columns + Copy,
    {
        for leaf in leaves {
            let rows = trajectory_rows(&leaf.trajectory, &leaf.path, project);
            let mut buf = Vec::new();
            write_csv(&mut buf, &rows).map_err(CliError::io(&self.out_dir))?;
            self.write(&leaf_file_name(&leaf.path_string(), leaves.len()), &buf)?;
        }
        Ok(())
    }
}

fn leaf_summary(leaf: &BranchLeaf) -> Value {
    let tr = &leaf.trajectory;
    json!({
        "branch_path": leaf.path_string(),
        "events": tr.events.len(),
        "event_times": tr.event_times(),
        "final_time": tr.final_time(),
        "final_state": tr.final_state(),
    })
}

fn label(path: &str) -> String {
    if path.is_empty() {
        "no events".into()
    } else {
        format!("branches {path}")
    }
}

/// One series per leaf with breaks at resets; `pt` picks the plotted pair.
fn leaf_plot<F>(leaves: &[BranchLeaf], title: &str, axes: (&str, &str), pt: F) -> Plot
where
    F: Fn(f64, &[f64]) -> (f64, f64),
{
    let series = leaves
        .iter()
        .map(|leaf| Series {
            label: label(&leaf.path_string()),
            pieces: leaf
                .trajectory
                .arcs
                .iter()
                .map(|a| a.times.iter().zip(&a.states).map(|(t, x)| pt(*t, x)).collect())
                .collect(),
            markers: leaf.trajectory.events.iter().map(|e| pt(e.time, &e.pre_state)).collect(),
        })
        .collect();
    Plot {
        title: title.into(),
        x_label: axes.0.into(),
        y_label: axes.1.into(),
        series,
    }
}

fn check_finite(leaves: &[BranchLeaf]) -> Result<(), CliError> {
    for leaf in leaves {
        if leaf.trajectory.final_state().iter().any(|v| !v.is_finite()) {
            return Err(CliError::Numerical(format!(
                "non-finite final state on branch \"{}\"",
                leaf.path_string()
            )));
        }
    }
    Ok(())
}

fn simulate_plant(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let tf = required_tf(cfg)?;
    let params = cfg.params.build()?;
    let controls = cfg.controls.algebra();
    let sys = PlantSystem::new(params, move |_t, _g: &GroupElement, _s| controls);
    let g0 = cfg.initial.pose();
    let leaves = run_leaves(&sys, &g0.to_array(), cfg, tf)?;
    check_finite(&leaves)?;
    art.leaves(&leaves, |_, _, x| Columns {
        x: Some(x[0]),
        y: Some(x[1]),
        theta: Some(x[2]),
        mu: None,
    })?;
    let plot = leaf_plot(&leaves, "Plant trajectory", ("x", "y"), |_, x| (x[0], x[1]));
    art.write("plot.svg", render_svg(&plot).as_bytes())?;
    Ok(json!({
        "tf": tf,
        "leaves": leaves.iter().map(leaf_summary).collect::<Vec<_>>(),
    }))
}

/// Largest drift of `f(μ)` from its value at the start of each arc, and the
/// largest change across a reset.
fn momentum_drift<F: Fn(&Momentum) -> f64>(leaves: &[BranchLeaf], f: F) -> (f64, f64) {
    let (mut along, mut across) = (0.0_f64, 0.0_f64);
    for leaf in leaves {
        for arc in &leaf.trajectory.arcs {
            let v0 = f(&Momentum::from_slice(arc.first_state()));
            for x in &arc.states {
                along = along.max((f(&Momentum::from_slice(x)) - v0).abs());
            }
        }
        for e in &leaf.trajectory.events {
            across = across.max((f(&Momentum::from_slice(&e.post_state)) - f(&Momentum::from_slice(&e.pre_state))).abs());
        }
    }
    (along, across)
}

fn simulate_reduced(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let tf = required_tf(cfg)?;
    let sys = ReducedSystem::new(cfg.params.build()?);
    let mu = cfg.initial.momentum();
    let x0 = [mu.mu_x, mu.mu_y, mu.mu_theta, cfg.initial.q];
    let leaves = run_leaves(&sys, &x0, cfg, tf)?;
    check_finite(&leaves)?;
    art.leaves(&leaves, |_, _, x| Columns {
        x: None,
        y: None,
        theta: Some(x[3]),
        mu: Some([x[0], x[1], x[2]]),
    })?;
    let plot = leaf_plot(&leaves, "Angular momentum", ("t", "mu_theta"), |t, x| (t, x[2]));
    art.write("plot.svg", render_svg(&plot).as_bytes())?;
    let (h_along, h_jump) = momentum_drift(&leaves, restricted_hamiltonian);
    let (c_along, _) = momentum_drift(&leaves, casimir);
    Ok(json!({
        "tf": tf,
        "h0": restricted_hamiltonian(&mu),
        "invariants": {
            "hamiltonian_drift": h_along,
            "hamiltonian_jump": h_jump,
            "casimir_drift_along_arcs": c_along,
        },
        "leaves": leaves.iter().map(leaf_summary).collect::<Vec<_>>(),
    }))
}

fn figure_run(fc: &FigureConfig, cfg: &ExperimentConfig) -> Result<FigureRun, CliError> {
    match cfg.policy_spec().policy() {
        None => Ok(figures::run_branch_tree(fc)?),
        Some(policy) => {
            let tf = match fc.tf {
                Some(tf) => tf,
                None => fc.default_tf(1e3)?,
            };
            let trajectory = execute(&fc.system(), &fc.initial_state(), fc.t0, tf, &fc.exec, &policy)?;
            Ok(FigureRun {
                config: *fc,
                tf,
                leaves: vec![BranchLeaf {
                    path: trajectory.branch_path(),
                    trajectory,
                }],
            })
        }
    }
}

fn reconstructed(fc: &FigureConfig, cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let run = figure_run(fc, cfg)?;
    check_finite(&run.leaves)?;
    info!("tf = {}, {} branch leaves", run.tf, run.leaves.len());
    let sys = fc.system();
    art.leaves(&run.leaves, move |_, _, x| {
        let mu = sys.momentum(x);
        Columns {
            x: Some(x[0]),
            y: Some(x[1]),
            theta: Some(x[2]),
            mu: Some(mu.to_array()),
        }
    })?;
    let plot = if cfg.mode == Mode::Fig3 {
        let mut buf = Vec::new();
        write_table(&mut buf, &["t", "cost", "segment", "event", "branch_path"], &figures::cost_rows(&run))
            .map_err(CliError::io(&art.out_dir))?;
        art.write("cost.csv", &buf)?;
        figures::cost_plot(&run)
    } else {
        figures::trajectory_plot(&run)
    };
    art.write("plot.svg", render_svg(&plot).as_bytes())?;
    let checks = figures::check(&run);
    if checks.y_drop_error > 1e-9 || checks.planar_hamiltonian_drift > 1e-9 {
        warn!("invariant drift above 1e-9: {checks:?}");
    }
    Ok(json!({
        "tf": run.tf,
        "tf_defaulted": fc.tf.is_none(),
        "initial_momentum": figures::initial_momentum(fc),
        "invariants": checks,
        "leaves": run.leaves.iter().map(leaf_summary).collect::<Vec<_>>(),
    }))
}

fn solve(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value, CliError> {
    let tf = required_tf(cfg)?;
    let phi = cfg
        .terminal_cost
        .ok_or_else(|| CliError::Validation("missing required key \"terminal_cost.kind\" for mode solve".into()))?;
    let policy = cfg
        .policy_spec()
        .policy()
        .ok_or_else(|| CliError::Validation("branch_policy \"all\" is not supported by solve".into()))?;
    let problem = OcpProblem {
        g_init: cfg.initial.pose(),
        t0: cfg.t0,
        tf,
        phi: phi.build(),
        params: cfg.params.build()?,
        branch_policy: policy,
    };
    let sc = SolveConfig {
        tol: cfg.solver.tol,
        max_iters: cfg.solver.max_iters,
        relaxation: cfg.solver.relaxation,
        exec: cfg.exec_config(),
    };
    let guess = cfg
        .solver
        .guess
        .map(|g| GroupElement::new(g.x, g.y, g.theta))
        .unwrap_or(problem.g_init);
    let report = solver::solve(&problem, &guess, &sc)?;
    for (i, it) in report.iterations.iter().enumerate() {
        debug!("iteration {i}: delta_g = {:e}", it.delta_g);
    }
    if report.converged {
        info!("converged after {} updates", report.iterations_to_converge.unwrap_or(0));
    } else {
        warn!(
            "not converged after {} iterations (delta_g = {:e})",
            report.iterations.len(),
            report.last().delta_g
        );
    }
    if report.event_mismatch {
        warn!("backward and forward passes disagree on events");
    }
    let last = report.last();
    if last.forward.final_state().iter().any(|v| !v.is_finite()) {
        return Err(CliError::Numerical("non-finite terminal state".into()));
    }
    let leaf = BranchLeaf {
        path: last.forward.branch_path(),
        trajectory: last.forward.clone(),
    };
    let backward: &HybridTrajectory = &last.backward;
    art.leaves(std::slice::from_ref(&leaf), |seg, t, x| {
        let mu = backward.sample(seg, t);
        Columns {
            x: Some(x[0]),
            y: Some(x[1]),
            theta: Some(x[2]),
            mu: Some([mu[0], mu[1], mu[2]]),
        }
    })?;
    let plot = leaf_plot(std::slice::from_ref(&leaf), "Optimal trajectory", ("x", "y"), |_, x| (x[0], x[1]));
    art.write("plot.svg", render_svg(&plot).as_bytes())?;
    Ok(json!({
        "tf": tf,
        "solve": {
            "converged": report.converged,
            "iterations": report.iterations.len(),
            "iterations_to_converge": report.iterations_to_converge,
            "delta_g": report.iterations.iter().map(|i| i.delta_g).collect::<Vec<_>>(),
            "guesses": report.iterations.iter().map(|i| i.guess).collect::<Vec<_>>(),
            "terminal_state": report.terminal_state(),
            "final_cost": report.final_cost,
            "running_cost": report.running_cost,
            "terminal_cost": report.terminal_cost,
            "h0": report.h0,
            "event_mismatch": report.event_mismatch,
            "backward_event_times": last.backward.event_times(),
            "forward_event_times": last.forward.event_times(),
            "branch_path": branch_path_string(&last.forward.branch_path()),
        },
    }))
}

/// Output directory: `--out` wins, then `output_dir` from the config
/// (relative to the config file), then `./out`.
pub fn resolve_out_dir(cfg: &ExperimentConfig, config_path: &Path, cli_out: Option<&Path>) -> PathBuf {
    if let Some(p) = cli_out {
        return p.to_path_buf();
    }
    match &cfg.output_dir {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => config_path.parent().unwrap_or(Path::new(".")).join(p),
        None => PathBuf::from("out"),
    }
}

pub fn run(cfg: &ExperimentConfig, out_dir: &Path, seed: u64) -> Result<RunSummary, CliError> {
    let mut art = Artifacts::new(out_dir)?;
    info!("mode {}, output in {}", cfg.mode.name(), out_dir.display());
    let body = match cfg.mode {
        Mode::SimulatePlant => simulate_plant(cfg, &mut art)?,
        Mode::SimulateReduced => simulate_reduced(cfg, &mut art)?,
        Mode::SimulateReconstructed => {
            let i = cfg.initial;
            let fc = FigureConfig {
                c: i.c,
                d: i.d,
                x0: i.x,
                y0: i.y,
                theta0: i.theta,
                mu_theta0: i.mu_theta,
                t0: cfg.t0,
                tf: Some(required_tf(cfg)?),
                exec: cfg.exec_config(),
            };
            reconstructed(&fc, cfg, &mut art)?
        }
        Mode::Fig2 | Mode::Fig3 => reconstructed(&cfg.figure_config(), cfg, &mut art)?,
        Mode::Solve => solve(cfg, &mut art)?,
    };
    let mut report = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config": cfg,
        "exec": cfg.exec_config(),
        "branch_policy": cfg.policy_spec(),
    });
    if let (Value::Object(r), Value::Object(b)) = (&mut report, body) {
        r.extend(b);
    }
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Numerical(e.to_string()))?;
    text.push('\n');
    art.write("report.json", text.as_bytes())?;
    Ok(RunSummary {
        out_dir: art.out_dir,
        files: art.files,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_names() {
        assert_eq!(leaf_file_name("+-", 1), "trajectory.csv");
        assert_eq!(leaf_file_name("+-", 4), "trajectory_pm.csv");
        assert_eq!(leaf_file_name("", 2), "trajectory_none.csv");
    }

    #[test]
    fn out_dir_precedence() {
        let mut cfg = ExperimentConfig::from_value(&json!({"mode": "fig2", "output_dir": "res"})).unwrap();
        let cfg_path = Path::new("/data/exp/fig2.json");
        assert_eq!(resolve_out_dir(&cfg, cfg_path, Some(Path::new("x"))), PathBuf::from("x"));
        assert_eq!(resolve_out_dir(&cfg, cfg_path, None), PathBuf::from("/data/exp/res"));
        cfg.output_dir = None;
        assert_eq!(resolve_out_dir(&cfg, cfg_path, None), PathBuf::from("out"));
    }
}
