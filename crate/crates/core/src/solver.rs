//! Forward–backward fixed-point iteration for the hybrid optimal control
//! problem on SE(2).
//!
//! Each iteration seeds the terminal momentum from a guess of `g(T)`, solves
//! the reduced `(μ, q)` system backward through inverse co-state jumps, then
//! drives the plant forward with the resulting optimal controls. The guess is
//! moved toward the achieved terminal state until the two agree.

use std::sync::Arc;

use thiserror::Error;

use crate::group::{signed_gap, GroupElement, Momentum};
use crate::hybrid::{
    angular_crossing, execute, execute_backward, Branch, BranchPolicy, ExecConfig, ExecError, HybridSystem,
    HybridTrajectory, State,
};
use crate::se2::plant::{plant_field, plant_reset, PlantParams};
use crate::se2::reduced::{optimal_controls, restricted_hamiltonian, running_cost_rate, CoupledSystem, ReducedSystem};
use crate::se2::terminal::{terminal_momentum, PoseTarget, TerminalCost};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

#[derive(Clone)]
pub struct OcpProblem {
    pub g_init: GroupElement,
    pub t0: f64,
    pub tf: f64,
    pub phi: Arc<dyn TerminalCost + Send + Sync>,
    pub params: PlantParams,
    pub branch_policy: BranchPolicy,
}

impl std::fmt::Debug for OcpProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OcpProblem")
            .field("g_init", &self.g_init)
            .field("t0", &self.t0)
            .field("tf", &self.tf)
            .field("params", &self.params)
            .field("branch_policy", &self.branch_policy)
            .finish_non_exhaustive()
    }
}

impl OcpProblem {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.tf > self.t0) {
            return Err(SolveError::InvalidProblem(format!("tf = {} must exceed t0 = {}", self.tf, self.t0)));
        }
        self.params
            .validate()
            .map_err(|e| SolveError::InvalidProblem(e.to_string()))?;
        if signed_gap(self.g_init.theta, self.params.theta_star) == 0.0 {
            return Err(SolveError::InvalidProblem("g_init lies on the guard".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolveConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub relaxation: f64,
    pub exec: ExecConfig,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 50,
            relaxation: 1.0,
            exec: ExecConfig::default(),
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.tol > 0.0) {
            return Err(SolveError::InvalidConfig("tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(SolveError::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(SolveError::InvalidConfig("relaxation must lie in (0, 1]".into()));
        }
        self.exec.validate()?;
        Ok(())
    }
}

/// One backward + forward sweep.
#[derive(Clone, Debug)]
pub struct Iteration {
    pub guess: GroupElement,
    /// States `[μx, μy, μθ, q]`.
    pub backward: HybridTrajectory,
    /// States `[x, y, θ, running cost]`.
    pub forward: HybridTrajectory,
    pub achieved: GroupElement,
    pub delta_g: f64,
}

impl Iteration {
    /// Backward and forward passes record the same number of events, at times
    /// within `time_tol` plus the shift explained by the residual: the two
    /// headings differ by up to `Δg`, which moves an event by `Δg / |μθ|`.
    pub fn events_agree(&self, time_tol: f64) -> bool {
        self.backward.events.len() == self.forward.events.len()
            && self
                .backward
                .events
                .iter()
                .zip(&self.forward.events)
                .all(|(b, f)| {
                    let rate = b.pre_state[2].abs().max(f64::MIN_POSITIVE);
                    (b.time - f.time).abs() <= time_tol + 2.0 * self.delta_g / rate
                })
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub iterations: Vec<Iteration>,
    pub converged: bool,
    /// Number of guess updates before the guess settled, when converged.
    pub iterations_to_converge: Option<usize>,
    /// Running cost plus terminal cost of the last forward pass.
    pub final_cost: f64,
    pub running_cost: f64,
    pub terminal_cost: f64,
    /// Restricted Hamiltonian of the last backward pass at `t0`.
    pub h0: f64,
    /// Set when the last backward and forward passes disagree on events.
    pub event_mismatch: bool,
}

impl SolveReport {
    pub fn last(&self) -> &Iteration {
        self.iterations.last().expect("a report holds at least one iteration")
    }

    pub fn terminal_state(&self) -> GroupElement {
        self.last().achieved
    }
}

/// `√(Δx² + Δy² + gap(θa, θb)²)`.
pub fn group_distance(a: &GroupElement, b: &GroupElement) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dt = signed_gap(a.theta, b.theta);
    (dx * dx + dy * dy + dt * dt).sqrt()
}

/// Moves `from` a fraction `r` toward `to`: linear in `(x, y)`, shortest arc
/// in θ.
pub fn relax_toward(from: &GroupElement, to: &GroupElement, r: f64) -> GroupElement {
    GroupElement::new(
        from.x + r * (to.x - from.x),
        from.y + r * (to.y - from.y),
        from.theta + r * signed_gap(to.theta, from.theta),
    )
}

/// Reduced system solved backward from `μ_f = (ℓ_{g_T})* dφ`, `q_f = θ_T`.
pub fn backward_pass(g_t: &GroupElement, problem: &OcpProblem, config: &SolveConfig) -> Result<HybridTrajectory, SolveError> {
    let mu_f = terminal_momentum(g_t, problem.phi.as_ref());
    let x_t = [mu_f.mu_x, mu_f.mu_y, mu_f.mu_theta, g_t.theta];
    let sys = ReducedSystem::new(problem.params);
    Ok(execute_backward(
        &sys,
        &x_t,
        problem.tf,
        problem.t0,
        &config.exec,
        &problem.branch_policy.reversed(),
    )?)
}

/// Momentum schedule for the forward pass: arc `k` of the backward pass
/// drives forward segment `k`; segments beyond the backward event count
/// fall back to lookup by time.
struct MomentumSchedule<'a> {
    traj: &'a HybridTrajectory,
}

impl MomentumSchedule<'_> {
    fn at(&self, segment: usize, t: f64) -> Momentum {
        let s = if segment < self.traj.arcs.len() {
            self.traj.arcs[segment].interpolate(t)
        } else {
            self.traj.sample_at_time(t)
        };
        Momentum::from_slice(&s)
    }
}

struct DrivenPlant<'a> {
    params: PlantParams,
    schedule: MomentumSchedule<'a>,
}

impl HybridSystem for DrivenPlant<'_> {
    fn dimension(&self) -> usize {
        4
    }

    fn field(&self, t: f64, x: &[f64], segment: usize, dx: &mut [f64]) {
        let g = GroupElement {
            x: x[0],
            y: x[1],
            theta: x[2],
        };
        let controls = optimal_controls(&self.schedule.at(segment, t));
        dx[..3].copy_from_slice(&plant_field(&g, &controls, &self.params));
        dx[3] = running_cost_rate(&controls);
    }

    fn guard(&self, x: &[f64]) -> f64 {
        signed_gap(x[2], self.params.theta_star)
    }

    fn is_crossing(&self, g_lo: f64, g_hi: f64) -> bool {
        angular_crossing(g_lo, g_hi)
    }

    fn reset(&self, x: &[f64], _branch: Branch) -> Result<State, ExecError> {
        let g = plant_reset(&GroupElement::from_slice(x), &self.params);
        Ok(vec![g.x, g.y, g.theta, x[3]])
    }

    fn branches(&self, _x_pre: &[f64]) -> Vec<Branch> {
        vec![Branch::Plus]
    }
}

/// Plant driven forward from `g_init` by `optimal_controls(μ(t))`.
pub fn forward_pass(mu_traj: &HybridTrajectory, problem: &OcpProblem, config: &SolveConfig) -> Result<HybridTrajectory, SolveError> {
    let sys = DrivenPlant {
        params: problem.params,
        schedule: MomentumSchedule { traj: mu_traj },
    };
    let g = problem.g_init;
    Ok(execute(
        &sys,
        &[g.x, g.y, g.theta, 0.0],
        problem.t0,
        problem.tf,
        &config.exec,
        &BranchPolicy::AlwaysPlus,
    )?)
}

fn sweep(guess: &GroupElement, problem: &OcpProblem, config: &SolveConfig) -> Result<Iteration, SolveError> {
    let backward = backward_pass(guess, problem, config)?;
    let forward = forward_pass(&backward, problem, config)?;
    let achieved = GroupElement::from_slice(forward.final_state());
    Ok(Iteration {
        guess: *guess,
        delta_g: group_distance(guess, &achieved),
        backward,
        forward,
        achieved,
    })
}

/// Runs the iteration from `guess` until `dist(guess, g(T)) ≤ tol` or
/// `max_iters` sweeps. Non-convergence is reported, not raised.
pub fn solve(problem: &OcpProblem, guess: &GroupElement, config: &SolveConfig) -> Result<SolveReport, SolveError> {
    problem.validate()?;
    config.validate()?;
    let mut guess = *guess;
    let mut iterations = Vec::new();
    let mut converged = false;
    for _ in 0..config.max_iters {
        let it = sweep(&guess, problem, config)?;
        let next = relax_toward(&guess, &it.achieved, config.relaxation);
        converged = it.delta_g <= config.tol;
        iterations.push(it);
        if converged {
            break;
        }
        guess = next;
    }
    let last = iterations.last().expect("max_iters ≥ 1");
    let running_cost = last.forward.final_state()[3];
    let terminal_cost = problem.phi.value(&last.achieved);
    let mu0 = Momentum::from_slice(last.backward.initial_state());
    Ok(SolveReport {
        converged,
        iterations_to_converge: converged.then(|| iterations.len() - 1),
        final_cost: running_cost + terminal_cost,
        running_cost,
        terminal_cost,
        h0: restricted_hamiltonian(&mu0),
        event_mismatch: !last.events_agree(10.0 * config.exec.event_tol),
        iterations,
    })
}

/// A problem with a known optimal trajectory.
///
/// The coupled plant/co-state system is integrated forward from `(g_init,
/// μ0)`; the pose target is then placed so that its terminal momentum at
/// the reached `g*(T)` equals `μ*(T)`.
#[derive(Clone, Debug)]
pub struct ManufacturedSolution {
    pub problem: OcpProblem,
    pub target: PoseTarget,
    pub terminal_state: GroupElement,
    pub terminal_momentum: Momentum,
    pub trajectory: HybridTrajectory,
}

#[allow(clippy::too_many_arguments)]
pub fn manufacture(
    params: PlantParams,
    g_init: GroupElement,
    mu0: Momentum,
    t0: f64,
    tf: f64,
    kappa: f64,
    branch_policy: BranchPolicy,
    exec: &ExecConfig,
) -> Result<ManufacturedSolution, SolveError> {
    let sys = CoupledSystem::new(params);
    let trajectory = execute(&sys, &CoupledSystem::initial_state(&g_init, &mu0), t0, tf, exec, &branch_policy)?;
    let end = trajectory.final_state();
    let g_t = GroupElement::from_slice(end);
    let mu_t = Momentum::from_slice(&end[3..6]);
    let target = PoseTarget::matching(&g_t, &mu_t, kappa).ok_or_else(|| {
        SolveError::InvalidProblem(format!("|μθ(T)| = {} exceeds κ = {kappa}", mu_t.mu_theta.abs()))
    })?;
    Ok(ManufacturedSolution {
        problem: OcpProblem {
            g_init,
            t0,
            tf,
            phi: Arc::new(target),
            params,
            branch_policy,
        },
        target,
        terminal_state: g_t,
        terminal_momentum: mu_t,
        trajectory,
    })
}
