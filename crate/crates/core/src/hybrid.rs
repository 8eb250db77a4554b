//! Fixed-step hybrid-system execution.
//!
//! Flows are integrated with classical RK4 on a uniform grid. A guard crossing
//! is detected from the guard values at consecutive samples and localized by
//! bisection in time, re-integrating a single RK4 step from the start of the
//! bracketing step. After each reset the guard is ignored for `min_dwell`
//! time units and the total number of resets is capped at `max_events`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bisection halvings before giving up on a bracket.
pub const MAX_BISECTION_DEPTH: usize = 128;

/// Relative slack used to avoid a vanishing final step.
const STEP_SLACK: f64 = 1e-9;

pub type State = Vec<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("non-finite state after RK4 step at t = {t} from x = {x:?}")]
    NumericalBlowup { t: f64, x: State },
    #[error("bisection did not shrink the bracket [{t_lo}, {t_hi}] within {MAX_BISECTION_DEPTH} halvings")]
    MaxBisectionDepth { t_lo: f64, t_hi: f64 },
    #[error("guard has no sign change on [{t_lo}, {t_hi}] (g = {g_lo}, {g_hi})")]
    NoSignChange {
        t_lo: f64,
        t_hi: f64,
        g_lo: f64,
        g_hi: f64,
    },
    #[error("more than {max_events} resets before t = {t}; suspected Zeno behaviour")]
    MaxEventsExceeded { max_events: usize, t: f64 },
    #[error("initial state lies on the guard")]
    StartsOnGuard,
    #[error("system has no inverse reset for backward execution")]
    InverseResetUnavailable,
    #[error("invalid executor configuration: {0}")]
    InvalidConfig(String),
    #[error("reset failed: {0}")]
    ResetFailed(String),
}

/// Choice between the two admissible resets of a two-valued jump.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Branch::Plus => '+',
            Branch::Minus => '-',
        }
    }
}

pub fn branch_path_string(path: &[Branch]) -> String {
    path.iter().map(|b| b.symbol()).collect()
}

/// A hybrid system: a flow, a guard whose zero set triggers resets, and the
/// reset itself. Backward execution additionally needs the guard's image under
/// the reset and the inverse reset.
pub trait HybridSystem {
    fn dimension(&self) -> usize;

    /// Vector field. `segment` is the number of resets applied so far, so
    /// piecewise-defined inputs can follow the hybrid structure.
    fn field(&self, t: f64, x: &[f64], segment: usize, dx: &mut [f64]);

    fn guard(&self, x: &[f64]) -> f64;

    /// Whether guard values at two consecutive samples bracket a root.
    /// Guards with jump discontinuities (angle gaps) override this.
    fn is_crossing(&self, g_lo: f64, g_hi: f64) -> bool {
        default_crossing(g_lo, g_hi)
    }

    fn reset(&self, x: &[f64], branch: Branch) -> Result<State, ExecError>;

    /// Distinct reset branches available at `x_pre`.
    fn branches(&self, _x_pre: &[f64]) -> Vec<Branch> {
        vec![Branch::Plus, Branch::Minus]
    }

    /// Guard for backward execution: zero on the image of the guard under
    /// the reset.
    fn backward_guard(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    fn inverse_reset(&self, _x: &[f64], _branch: Branch) -> Result<State, ExecError> {
        Err(ExecError::InverseResetUnavailable)
    }
}

/// Strict sign change, counting a landing exactly on zero as a crossing.
pub fn default_crossing(g_lo: f64, g_hi: f64) -> bool {
    (g_lo < 0.0 && g_hi >= 0.0) || (g_lo > 0.0 && g_hi <= 0.0)
}

/// Sign change of an angular gap in `(-π, π]` that is not the wrap-around
/// jump on the far side of the circle.
pub fn angular_crossing(g_lo: f64, g_hi: f64) -> bool {
    default_crossing(g_lo, g_hi) && (g_hi - g_lo).abs() < std::f64::consts::PI
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecConfig {
    pub step: f64,
    pub event_tol: f64,
    pub max_events: usize,
    pub min_dwell: f64,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            event_tol: 1e-10,
            max_events: 32,
            min_dwell: 1e-6,
        }
    }
}

impl ExecConfig {
    pub fn validate(&self) -> Result<(), ExecError> {
        let bad = |m: String| Err(ExecError::InvalidConfig(m));
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad(format!("step must be positive, got {}", self.step));
        }
        if !(self.event_tol > 0.0) || self.event_tol >= self.step {
            return bad(format!(
                "event_tol must lie in (0, step), got {}",
                self.event_tol
            ));
        }
        if self.max_events == 0 {
            return bad("max_events must be positive".into());
        }
        if !(self.min_dwell >= 2.0 * self.event_tol) {
            return bad(format!(
                "min_dwell must be at least 2·event_tol, got {}",
                self.min_dwell
            ));
        }
        Ok(())
    }
}

/// One continuous piece of a hybrid trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowArc {
    pub segment: usize,
    pub times: Vec<f64>,
    pub states: Vec<State>,
}

impl FlowArc {
    fn start(segment: usize, t: f64, x: State) -> Self {
        Self {
            segment,
            times: vec![t],
            states: vec![x],
        }
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("arcs are never empty")
    }

    pub fn first_state(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("arcs are never empty")
    }

    /// Linear interpolation inside the arc, clamped to its end samples.
    /// Times must be increasing.
    pub fn interpolate(&self, t: f64) -> State {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return self.states[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.states[n - 1].clone();
        }
        let i = self.times.partition_point(|&s| s <= t).clamp(1, n - 1);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        self.states[i - 1]
            .iter()
            .zip(&self.states[i])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub pre_state: State,
    pub post_state: State,
    pub branch: Branch,
}

/// Arcs in increasing time, contiguous, with one event between each pair of
/// consecutive arcs.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct HybridTrajectory {
    pub arcs: Vec<FlowArc>,
    pub events: Vec<Event>,
}

impl HybridTrajectory {
    pub fn initial_state(&self) -> &[f64] {
        self.arcs[0].first_state()
    }

    pub fn final_state(&self) -> &[f64] {
        self.arcs.last().expect("non-empty trajectory").last_state()
    }

    pub fn final_time(&self) -> f64 {
        self.arcs.last().expect("non-empty trajectory").t_end()
    }

    pub fn branch_path(&self) -> Vec<Branch> {
        self.events.iter().map(|e| e.branch).collect()
    }

    pub fn event_times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.time).collect()
    }

    pub fn sample_count(&self) -> usize {
        self.arcs.iter().map(|a| a.times.len()).sum()
    }

    /// State at `t`, looked up in the arc for `segment` if it exists, else in
    /// the last arc starting at or before `t`.
    pub fn sample(&self, segment: usize, t: f64) -> State {
        match self.arcs.get(segment) {
            Some(arc) => arc.interpolate(t),
            None => self.sample_at_time(t),
        }
    }

    pub fn sample_at_time(&self, t: f64) -> State {
        let i = self
            .arcs
            .partition_point(|a| a.t_start() <= t)
            .saturating_sub(1);
        self.arcs[i].interpolate(t)
    }
}

/// Caller-side selection of reset branches.
#[derive(Clone, Default)]
pub enum BranchPolicy {
    #[default]
    AlwaysPlus,
    AlwaysMinus,
    /// Event `i` uses entry `i`; events past the end use `Plus`.
    Sequence(Vec<Branch>),
    Custom(Arc<dyn Fn(usize, &[f64]) -> Branch + Send + Sync>),
}

impl fmt::Debug for BranchPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BranchPolicy::AlwaysPlus => write!(f, "AlwaysPlus"),
            BranchPolicy::AlwaysMinus => write!(f, "AlwaysMinus"),
            BranchPolicy::Sequence(s) => write!(f, "Sequence({})", branch_path_string(s)),
            BranchPolicy::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl BranchPolicy {
    pub fn choose(&self, index: usize, pre_state: &[f64]) -> Branch {
        match self {
            BranchPolicy::AlwaysPlus => Branch::Plus,
            BranchPolicy::AlwaysMinus => Branch::Minus,
            BranchPolicy::Sequence(s) => s.get(index).copied().unwrap_or(Branch::Plus),
            BranchPolicy::Custom(f) => f(index, pre_state),
        }
    }

    /// Policy for a backward run that meets the events in reverse order.
    /// Custom policies receive the backward event index unchanged.
    pub fn reversed(&self) -> BranchPolicy {
        match self {
            BranchPolicy::Sequence(s) => BranchPolicy::Sequence(s.iter().rev().copied().collect()),
            other => other.clone(),
        }
    }
}

/// One classical RK4 step. `h` may be negative.
pub fn rk4_step<F>(field: F, t: f64, x: &[f64], h: f64) -> Result<State, ExecError>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    field(t, x, &mut k1);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    field(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    field(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    field(t + h, &tmp, &mut k4);

    let out: State = (0..n)
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(ExecError::NumericalBlowup { t, x: x.to_vec() })
    }
}

/// Number of uniform steps from `t0` to `t1`; the last one may be shorter.
fn step_count(t0: f64, t1: f64, step: f64) -> usize {
    let ratio = (t1 - t0).abs() / step;
    (ratio - STEP_SLACK).ceil().max(0.0) as usize
}

/// Sample time `k` of a uniform grid from `t0` towards `t1`.
fn grid_time(t0: f64, t1: f64, step: f64, k: usize, n: usize) -> f64 {
    if k >= n {
        t1
    } else {
        t0 + (t1 - t0).signum() * step * k as f64
    }
}

/// Samples of a single RK4 arc from `t0` to `t1` (inclusive), ignoring guards.
pub fn integrate_arc<F>(
    field: F,
    x0: &[f64],
    t0: f64,
    t1: f64,
    config: &ExecConfig,
) -> Result<FlowArc, ExecError>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let mut arc = FlowArc::start(0, t0, x0.to_vec());
    let n = step_count(t0, t1, config.step);
    let mut t = t0;
    let mut x = x0.to_vec();
    for k in 1..=n {
        let t_next = grid_time(t0, t1, config.step, k, n);
        x = rk4_step(&field, t, &x, t_next - t)?;
        t = t_next;
        arc.times.push(t);
        arc.states.push(x.clone());
    }
    Ok(arc)
}

/// Localizes a guard root inside one step by bisection on time.
///
/// Each trial point is reached with a single RK4 step from `(t_lo, x_lo)`.
/// Returns the last bracket endpoint on the pre-event side once the bracket
/// is narrower than `event_tol`.
#[allow(clippy::too_many_arguments)]
pub fn locate_event<F, G, C>(
    field: F,
    guard: G,
    crossing: C,
    t_lo: f64,
    x_lo: &[f64],
    t_hi: f64,
    x_hi: &[f64],
    config: &ExecConfig,
) -> Result<(f64, State), ExecError>
where
    F: Fn(f64, &[f64], &mut [f64]),
    G: Fn(&[f64]) -> f64,
    C: Fn(f64, f64) -> bool,
{
    let g_lo = guard(x_lo);
    let g_hi = guard(x_hi);
    if !crossing(g_lo, g_hi) {
        return Err(ExecError::NoSignChange {
            t_lo,
            t_hi,
            g_lo,
            g_hi,
        });
    }
    let mut a = t_lo;
    let mut b = t_hi;
    let mut x_a = x_lo.to_vec();
    let mut g_a = g_lo;
    for _ in 0..MAX_BISECTION_DEPTH {
        if (b - a).abs() < config.event_tol {
            return Ok((a, x_a));
        }
        let mid = a + 0.5 * (b - a);
        let x_mid = rk4_step(&field, t_lo, x_lo, mid - t_lo)?;
        let g_mid = guard(&x_mid);
        if crossing(g_a, g_mid) {
            b = mid;
        } else {
            a = mid;
            x_a = x_mid;
            g_a = g_mid;
        }
    }
    Err(ExecError::MaxBisectionDepth { t_lo: a, t_hi: b })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Backward,
}

/// Raw execution in the direction of integration. Backward events hold
/// (state before inverse reset, state after inverse reset).
fn run<S: HybridSystem + ?Sized>(
    system: &S,
    x0: &[f64],
    t_from: f64,
    t_to: f64,
    config: &ExecConfig,
    policy: &BranchPolicy,
    direction: Direction,
) -> Result<HybridTrajectory, ExecError> {
    config.validate()?;
    if x0.len() != system.dimension() {
        return Err(ExecError::InvalidConfig(format!(
            "initial state has dimension {}, system expects {}",
            x0.len(),
            system.dimension()
        )));
    }
    let guard = |x: &[f64]| -> Result<f64, ExecError> {
        match direction {
            Direction::Forward => Ok(system.guard(x)),
            Direction::Backward => system
                .backward_guard(x)
                .ok_or(ExecError::InverseResetUnavailable),
        }
    };
    if guard(x0)? == 0.0 {
        return Err(ExecError::StartsOnGuard);
    }

    let dir = if t_to >= t_from { 1.0 } else { -1.0 };
    let mut arcs = Vec::new();
    let mut events = Vec::new();
    let mut segment = 0usize;
    let mut arc = FlowArc::start(0, t_from, x0.to_vec());
    let mut arc_t0 = t_from;
    let mut n = step_count(t_from, t_to, config.step);
    let mut k = 0usize;
    let mut armed_at = f64::NEG_INFINITY * dir;

    while k < n {
        let seg = segment;
        let field = |t: f64, x: &[f64], dx: &mut [f64]| system.field(t, x, seg, dx);
        let t = arc.t_end();
        let x = arc.last_state().to_vec();
        let t_next = grid_time(arc_t0, t_to, config.step, k + 1, n);
        let x_next = rk4_step(field, t, &x, t_next - t)?;

        let g_lo = guard(&x)?;
        let g_hi = guard(&x_next)?;
        if dir * (t_next - armed_at) > 0.0 && system.is_crossing(g_lo, g_hi) {
            let guard_val = |s: &[f64]| guard(s).unwrap_or(f64::NAN);
            let (t_e, x_e) = locate_event(
                field,
                guard_val,
                |a, b| system.is_crossing(a, b),
                t,
                &x,
                t_next,
                &x_next,
                config,
            )?;
            if dir * (t_e - armed_at) >= 0.0 {
                if events.len() >= config.max_events {
                    return Err(ExecError::MaxEventsExceeded {
                        max_events: config.max_events,
                        t: t_e,
                    });
                }
                if t_e != t {
                    arc.times.push(t_e);
                    arc.states.push(x_e.clone());
                }
                let branch = policy.choose(events.len(), &x_e);
                let post = match direction {
                    Direction::Forward => system.reset(&x_e, branch)?,
                    Direction::Backward => system.inverse_reset(&x_e, branch)?,
                };
                events.push(Event {
                    time: t_e,
                    pre_state: x_e,
                    post_state: post.clone(),
                    branch,
                });
                arcs.push(arc);
                segment += 1;
                arc = FlowArc::start(segment, t_e, post);
                arc_t0 = t_e;
                n = step_count(t_e, t_to, config.step);
                k = 0;
                armed_at = t_e + dir * config.min_dwell;
                continue;
            }
        }
        arc.times.push(t_next);
        arc.states.push(x_next);
        k += 1;
    }
    arcs.push(arc);
    Ok(HybridTrajectory { arcs, events })
}

/// Forward hybrid execution from `(t0, x0)` to `tf`.
pub fn execute<S: HybridSystem + ?Sized>(
    system: &S,
    x0: &[f64],
    t0: f64,
    tf: f64,
    config: &ExecConfig,
    policy: &BranchPolicy,
) -> Result<HybridTrajectory, ExecError> {
    run(system, x0, t0, tf, config, policy, Direction::Forward)
}

/// Backward hybrid execution from `(tf, x_T)` down to `t0`, applying inverse
/// resets where the backward guard is crossed. The result is re-ordered into
/// increasing time, with events stated in forward orientation.
pub fn execute_backward<S: HybridSystem + ?Sized>(
    system: &S,
    x_t: &[f64],
    tf: f64,
    t0: f64,
    config: &ExecConfig,
    policy: &BranchPolicy,
) -> Result<HybridTrajectory, ExecError> {
    let raw = run(system, x_t, tf, t0, config, policy, Direction::Backward)?;
    let n_events = raw.events.len();
    let arcs = raw
        .arcs
        .into_iter()
        .rev()
        .map(|mut a| {
            a.times.reverse();
            a.states.reverse();
            a.segment = n_events - a.segment;
            a
        })
        .collect();
    let events = raw
        .events
        .into_iter()
        .rev()
        .map(|e| Event {
            time: e.time,
            pre_state: e.post_state,
            post_state: e.pre_state,
            branch: e.branch,
        })
        .collect();
    Ok(HybridTrajectory { arcs, events })
}

/// A leaf of the branch tree: the choices made and the resulting run.
#[derive(Clone, Debug)]
pub struct BranchLeaf {
    pub path: Vec<Branch>,
    pub trajectory: HybridTrajectory,
}

impl BranchLeaf {
    pub fn path_string(&self) -> String {
        branch_path_string(&self.path)
    }
}

/// Executes every combination of reset branches. Leaves come out in
/// depth-first order with `Plus` before `Minus`.
pub fn execute_all_branches<S: HybridSystem + ?Sized>(
    system: &S,
    x0: &[f64],
    t0: f64,
    tf: f64,
    config: &ExecConfig,
) -> Result<Vec<BranchLeaf>, ExecError> {
    let mut leaves = Vec::new();
    let mut stack = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        let policy = BranchPolicy::Sequence(prefix.clone());
        let trajectory = execute(system, x0, t0, tf, config, &policy)?;
        if trajectory.events.len() > prefix.len() {
            let pre = &trajectory.events[prefix.len()].pre_state;
            for b in system.branches(pre).into_iter().rev() {
                let mut next = prefix.clone();
                next.push(b);
                stack.push(next);
            }
        } else {
            leaves.push(BranchLeaf {
                path: trajectory.branch_path(),
                trajectory,
            });
        }
    }
    Ok(leaves)
}
