//! Branch-tree runs of the reconstructed system (trajectories in the plane
//! and accumulated running cost), with the checks that go with them.

use serde::{Deserialize, Serialize};

use crate::group::Momentum;
use crate::hybrid::{execute, execute_all_branches, BranchLeaf, BranchPolicy, ExecConfig, ExecError};
use crate::output::{Columns, Plot, Series};
use crate::se2::casimir::{casimir, planar_hamiltonian, ReconstructedSystem};
use crate::se2::reduced::restricted_hamiltonian;

/// Events captured by the default horizon.
pub const DEFAULT_EVENTS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FigureConfig {
    pub c: f64,
    pub d: f64,
    pub x0: f64,
    pub y0: f64,
    pub theta0: f64,
    pub mu_theta0: f64,
    pub t0: f64,
    /// Final time; when absent it is chosen to capture [`DEFAULT_EVENTS`].
    pub tf: Option<f64>,
    pub exec: ExecConfig,
}

impl Default for FigureConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            d: 1.0,
            x0: 0.0,
            y0: 0.0,
            theta0: 0.0,
            mu_theta0: -1.0,
            t0: 0.0,
            tf: None,
            exec: ExecConfig {
                step: 1e-3,
                ..ExecConfig::default()
            },
        }
    }
}

impl FigureConfig {
    pub fn system(&self) -> ReconstructedSystem {
        ReconstructedSystem::new(self.c, self.d)
    }

    pub fn initial_state(&self) -> Vec<f64> {
        ReconstructedSystem::initial_state(self.x0, self.y0, self.theta0, self.mu_theta0)
    }

    /// Third event time on the all-plus branch plus half the mean gap
    /// between events. Errors if fewer than three events occur within
    /// `search_horizon`.
    pub fn default_tf(&self, search_horizon: f64) -> Result<f64, ExecError> {
        let exec = ExecConfig {
            max_events: self.exec.max_events.max(1000),
            ..self.exec
        };
        let mut horizon = 8.0_f64.min(search_horizon);
        loop {
            let times = execute(&self.system(), &self.initial_state(), self.t0, self.t0 + horizon, &exec, &BranchPolicy::AlwaysPlus)?
                .event_times();
            if times.len() >= DEFAULT_EVENTS {
                let gaps: Vec<f64> = std::iter::once(self.t0)
                    .chain(times.iter().copied())
                    .take(DEFAULT_EVENTS + 1)
                    .collect::<Vec<_>>()
                    .windows(2)
                    .map(|w| w[1] - w[0])
                    .collect();
                let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
                return Ok(times[DEFAULT_EVENTS - 1] + 0.5 * mean);
            }
            if horizon >= search_horizon {
                return Err(ExecError::InvalidConfig(format!(
                    "fewer than {DEFAULT_EVENTS} events before t = {}",
                    self.t0 + horizon
                )));
            }
            horizon = (2.0 * horizon).min(search_horizon);
        }
    }
}

#[derive(Clone, Debug)]
pub struct FigureRun {
    pub config: FigureConfig,
    pub tf: f64,
    pub leaves: Vec<BranchLeaf>,
}

/// Runs every branch combination of the reconstructed system.
pub fn run_branch_tree(config: &FigureConfig) -> Result<FigureRun, ExecError> {
    let tf = match config.tf {
        Some(tf) => tf,
        None => config.default_tf(1e3)?,
    };
    let leaves = execute_all_branches(&config.system(), &config.initial_state(), config.t0, tf, &config.exec)?;
    Ok(FigureRun {
        config: *config,
        tf,
        leaves,
    })
}

/// CSV columns of a reconstructed state; `μx, μy` come from `C, D`.
pub fn reconstructed_columns(sys: &ReconstructedSystem) -> impl Fn(usize, f64, &[f64]) -> Columns + '_ {
    move |_seg, _t, x| {
        let mu = sys.momentum(x);
        Columns {
            x: Some(x[0]),
            y: Some(x[1]),
            theta: Some(x[2]),
            mu: Some(mu.to_array()),
        }
    }
}

/// Invariant checks over a branch tree.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FigureChecks {
    pub leaves: usize,
    pub events_per_leaf: Vec<usize>,
    /// Largest spread of the k-th event time across leaves.
    pub event_time_spread: f64,
    /// Largest deviation of an event's y-drop from 1.
    pub y_drop_error: f64,
    pub h0: f64,
    pub planar_hamiltonian_drift: f64,
    pub hamiltonian_jump: f64,
    /// Smallest R² of the cost-versus-time fit over leaves.
    pub cost_r_squared: f64,
    /// Largest deviation of a fitted slope from −h₀.
    pub cost_slope_error: f64,
    /// Largest spread of the cost at the k-th event across leaves.
    pub cost_spread_at_events: f64,
}

/// Least-squares line through `(t, c)`; returns `(slope, intercept, R²)`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mc = points.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stc: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - mc)).sum();
    let scc: f64 = points.iter().map(|p| (p.1 - mc).powi(2)).sum();
    let slope = stc / stt;
    let intercept = mc - slope * mt;
    let ss_res: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if scc > 0.0 { 1.0 - ss_res / scc } else { 1.0 };
    (slope, intercept, r2)
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

pub fn check(run: &FigureRun) -> FigureChecks {
    let sys = run.config.system();
    let x0 = run.config.initial_state();
    let h0 = restricted_hamiltonian(&sys.momentum(&x0));
    let c = casimir(&sys.momentum(&x0));
    let planar0 = planar_hamiltonian(x0[2], x0[3], c, sys.d);
    let mut out = FigureChecks {
        leaves: run.leaves.len(),
        h0,
        cost_r_squared: 1.0,
        ..FigureChecks::default()
    };
    let max_events = run.leaves.iter().map(|l| l.trajectory.events.len()).max().unwrap_or(0);
    for k in 0..max_events {
        let at_k = || run.leaves.iter().filter_map(move |l| l.trajectory.events.get(k));
        out.event_time_spread = out.event_time_spread.max(spread(at_k().map(|e| e.time)));
        out.cost_spread_at_events = out.cost_spread_at_events.max(spread(at_k().map(|e| e.pre_state[4])));
    }
    for leaf in &run.leaves {
        let tr = &leaf.trajectory;
        out.events_per_leaf.push(tr.events.len());
        let mut pts = Vec::with_capacity(tr.sample_count());
        for arc in &tr.arcs {
            for (t, x) in arc.times.iter().zip(&arc.states) {
                pts.push((*t, x[4]));
                let drift = (planar_hamiltonian(x[2], x[3], c, sys.d) - planar0).abs();
                out.planar_hamiltonian_drift = out.planar_hamiltonian_drift.max(drift);
            }
        }
        let (slope, _, r2) = linear_fit(&pts);
        out.cost_r_squared = out.cost_r_squared.min(r2);
        out.cost_slope_error = out.cost_slope_error.max((slope + h0).abs());
        for e in &tr.events {
            out.y_drop_error = out.y_drop_error.max((e.pre_state[1] - e.post_state[1] - 1.0).abs());
            let jump = restricted_hamiltonian(&sys.momentum(&e.post_state)) - restricted_hamiltonian(&sys.momentum(&e.pre_state));
            out.hamiltonian_jump = out.hamiltonian_jump.max(jump.abs());
        }
    }
    out
}

fn leaf_label(leaf: &BranchLeaf) -> String {
    let p = leaf.path_string();
    if p.is_empty() {
        "no events".into()
    } else {
        format!("branches {p}")
    }
}

/// Plane trajectories, one series per leaf, with event markers.
pub fn trajectory_plot(run: &FigureRun) -> Plot {
    let series = run
        .leaves
        .iter()
        .map(|leaf| Series {
            label: leaf_label(leaf),
            pieces: leaf
                .trajectory
                .arcs
                .iter()
                .map(|a| a.states.iter().map(|x| (x[0], x[1])).collect())
                .collect(),
            markers: leaf
                .trajectory
                .events
                .iter()
                .map(|e| (e.pre_state[0], e.pre_state[1]))
                .collect(),
        })
        .collect();
    Plot {
        title: format!("Reconstructed trajectories (C = {}, D = {})", run.config.c, run.config.d),
        x_label: "x".into(),
        y_label: "y".into(),
        series,
    }
}

/// Accumulated running cost against time, one series per leaf.
pub fn cost_plot(run: &FigureRun) -> Plot {
    let series = run
        .leaves
        .iter()
        .map(|leaf| Series {
            label: leaf_label(leaf),
            pieces: vec![leaf
                .trajectory
                .arcs
                .iter()
                .flat_map(|a| a.times.iter().zip(&a.states).map(|(t, x)| (*t, x[4])))
                .collect()],
            markers: leaf.trajectory.events.iter().map(|e| (e.time, e.pre_state[4])).collect(),
        })
        .collect();
    Plot {
        title: "Accumulated running cost".into(),
        x_label: "t".into(),
        y_label: "cost".into(),
        series,
    }
}

/// Rows `t, cost, segment, event, branch_path` for every leaf.
pub fn cost_rows(run: &FigureRun) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for leaf in &run.leaves {
        let path = leaf.path_string();
        let arcs = &leaf.trajectory.arcs;
        for (k, arc) in arcs.iter().enumerate() {
            let n = arc.times.len();
            for (i, (t, x)) in arc.times.iter().zip(&arc.states).enumerate() {
                let event = (i == 0 && k > 0) || (i + 1 == n && k + 1 < arcs.len());
                rows.push(vec![
                    t.to_string(),
                    x[4].to_string(),
                    arc.segment.to_string(),
                    u8::from(event).to_string(),
                    path[..k.min(path.len())].to_string(),
                ]);
            }
        }
    }
    rows
}

/// Full momentum at the start of a figure run.
pub fn initial_momentum(config: &FigureConfig) -> Momentum {
    config.system().momentum(&config.initial_state())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_recovers_line() {
        let pts: Vec<_> = (0..10).map(|i| (i as f64, 2.0 * i as f64 - 1.0)).collect();
        let (s, b, r2) = linear_fit(&pts);
        assert!((s - 2.0).abs() < 1e-12 && (b + 1.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_horizon_captures_three_events() {
        let cfg = FigureConfig::default();
        let tf = cfg.default_tf(1e3).unwrap();
        let traj = execute(&cfg.system(), &cfg.initial_state(), 0.0, tf, &cfg.exec, &BranchPolicy::AlwaysPlus).unwrap();
        assert_eq!(traj.events.len(), 3);
    }

    #[test]
    fn reference_tree_checks() {
        let run = run_branch_tree(&FigureConfig::default()).unwrap();
        assert_eq!(run.leaves.len(), 8);
        let c = check(&run);
        assert!(c.events_per_leaf.iter().all(|&n| n == 3));
        assert!(c.event_time_spread < 1e-6);
        assert!(c.y_drop_error < 1e-12);
        assert!(c.planar_hamiltonian_drift < 1e-9);
        assert!(c.hamiltonian_jump < 1e-12);
        assert!(c.cost_r_squared > 1.0 - 1e-10);
        assert!(c.cost_spread_at_events < 1e-8);
        let svg = crate::output::render_svg(&trajectory_plot(&run));
        assert_eq!(svg.matches(r#"<path class="branch""#).count(), 8);
    }

    #[test]
    fn cost_rows_cover_all_leaves() {
        let cfg = FigureConfig { tf: Some(3.0), ..FigureConfig::default() };
        let run = run_branch_tree(&cfg).unwrap();
        assert_eq!(run.leaves.len(), 2);
        let rows = cost_rows(&run);
        assert_eq!(rows.iter().filter(|r| r[3] == "1").count(), 4);
    }
}
