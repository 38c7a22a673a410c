//! Query policies: the tree walk, its cached variant, and projected SGD.
//!
//! Every policy consumes one gradient sample per time step (the cached walk
//! consumes one per active test, but only the head test is the regret-bearing
//! action) and records the expected instantaneous regret `f(x_t) - f(x*)`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dyadic_tree::{DyadicPoint, NodeId};
use crate::error::{Error, Result};
use crate::problems::GradientOracle;
use crate::sequential_tests::{endpoint_verdict, run_test, TestConfig, TestOutcome, TestSession, Verdict};

/// Where the walk goes after testing the three points of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveDecision {
    LeftChild,
    RightChild,
    Parent,
}

impl MoveDecision {
    pub fn apply(self, node: &NodeId) -> NodeId {
        match self {
            MoveDecision::LeftChild => node.left_child(),
            MoveDecision::RightChild => node.right_child(),
            MoveDecision::Parent => node.parent(),
        }
    }
}

/// `(-,+,+)` means the sign change is in the left half, `(-,-,+)` in the right
/// half; any other pattern sends the walk back up.
pub fn decide_move(left: Verdict, mid: Verdict, right: Verdict) -> MoveDecision {
    use Verdict::{Minus, Plus};
    match (left, mid, right) {
        (Minus, Plus, Plus) => MoveDecision::LeftChild,
        (Minus, Minus, Plus) => MoveDecision::RightChild,
        _ => MoveDecision::Parent,
    }
}

/// A run of consecutive time steps with the same instantaneous regret.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub regret: f64,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FinalPosition {
    Node(NodeId),
    Point(f64),
}

/// Instantaneous regret of one run, run-length encoded over time.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    segments: Vec<Segment>,
    time: u64,
    samples: u64,
    moves: u64,
    final_position: FinalPosition,
}

impl RegretTrace {
    pub fn new(start: FinalPosition) -> Self {
        RegretTrace {
            segments: Vec::new(),
            time: 0,
            samples: 0,
            moves: 0,
            final_position: start,
        }
    }

    /// Appends `steps` time steps, each with instantaneous regret `regret`.
    pub fn push(&mut self, regret: f64, steps: u64) {
        if steps == 0 {
            return;
        }
        self.time += steps;
        match self.segments.last_mut() {
            Some(last) if last.regret.to_bits() == regret.to_bits() => last.steps += steps,
            _ => self.segments.push(Segment { regret, steps }),
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Time steps elapsed.
    pub fn len(&self) -> u64 {
        self.time
    }

    pub fn is_empty(&self) -> bool {
        self.time == 0
    }

    /// Gradient samples drawn; exceeds `len()` for the cached walk.
    pub fn samples_total(&self) -> u64 {
        self.samples
    }

    /// Completed walk moves (zero for SGD).
    pub fn moves(&self) -> u64 {
        self.moves
    }

    pub fn final_position(&self) -> &FinalPosition {
        &self.final_position
    }

    pub fn total_regret(&self) -> f64 {
        self.segments.iter().map(|s| s.regret * s.steps as f64).sum()
    }

    /// Cumulative regret after each of the given times (clamped to the trace
    /// length). `times` must be sorted.
    pub fn cumulative_at(&self, times: &[u64]) -> Vec<f64> {
        debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
        let mut out = Vec::with_capacity(times.len());
        let mut seg = self.segments.iter();
        let mut current = seg.next();
        let (mut t, mut acc) = (0u64, 0.0f64);
        for &target in times {
            let target = target.min(self.time);
            while t < target {
                let s = current.expect("target within trace length");
                let seg_end = t + s.steps;
                if seg_end <= target {
                    acc += s.regret * s.steps as f64;
                    t = seg_end;
                    current = seg.next();
                } else {
                    // partially consume: split the segment at `target`
                    let take = target - t;
                    out.push(acc + s.regret * take as f64);
                    break;
                }
            }
            if t >= target {
                out.push(acc);
            }
        }
        out
    }

    pub fn concat(mut self, other: &RegretTrace) -> RegretTrace {
        for s in &other.segments {
            self.push(s.regret, s.steps);
        }
        self.samples += other.samples;
        self.moves += other.moves;
        self.final_position = other.final_position.clone();
        self
    }
}

/// Per-step cumulative regret.
pub fn regret_of(trace: &RegretTrace) -> Vec<f64> {
    let mut out = Vec::with_capacity(trace.len() as usize);
    let mut acc = 0.0;
    for s in trace.segments() {
        for _ in 0..s.steps {
            acc += s.regret;
            out.push(acc);
        }
    }
    out
}

/// One completed move of the walk.
#[derive(Debug, Clone)]
pub struct WalkStep {
    pub from: NodeId,
    pub to: NodeId,
    pub decision: MoveDecision,
    pub verdicts: [Verdict; 3],
    /// Time at which the move happened.
    pub time: u64,
}

struct QueryPoint {
    point: DyadicPoint,
    gradient: f64,
    regret: f64,
}

impl QueryPoint {
    fn new(point: DyadicPoint, oracle: &GradientOracle) -> Self {
        let x = point.to_f64();
        QueryPoint {
            point,
            gradient: oracle.objective().g_value(x),
            regret: oracle.objective().regret_at(x),
        }
    }
}

/// Plain RWT: fresh tests at left, mid and right of the current node, then move.
pub fn run_rwt(oracle: &mut GradientOracle, test: &TestConfig, horizon: u64) -> RegretTrace {
    run_rwt_observed(oracle, test, horizon, None, |_| {})
}

/// [`run_rwt`] with a hook on every move and an optional cap on the number of moves.
pub fn run_rwt_observed<F>(
    oracle: &mut GradientOracle,
    test: &TestConfig,
    horizon: u64,
    max_moves: Option<u64>,
    mut on_move: F,
) -> RegretTrace
where
    F: FnMut(&WalkStep),
{
    let mut node = NodeId::root();
    let mut trace = RegretTrace::new(FinalPosition::Node(node.clone()));
    'walk: while max_moves.is_none_or(|m| trace.moves < m) {
        let iv = node.interval();
        let mut verdicts = [Verdict::Minus; 3];
        for (slot, point) in iv.points().into_iter().enumerate() {
            let qp = QueryPoint::new(point.clone(), oracle);
            let budget = horizon - trace.time;
            let run = run_test(&qp.point, || qp.gradient + oracle.noise(), test, budget);
            trace.samples += run.samples;
            trace.push(qp.regret, run.samples);
            match run.outcome {
                TestOutcome::Decided(v) => verdicts[slot] = v,
                TestOutcome::Exhausted => break 'walk,
            }
        }
        let decision = decide_move(verdicts[0], verdicts[1], verdicts[2]);
        let next = decision.apply(&node);
        trace.moves += 1;
        on_move(&WalkStep {
            from: node.clone(),
            to: next.clone(),
            decision,
            verdicts,
            time: trace.time,
        });
        node = next;
    }
    trace.final_position = FinalPosition::Node(node);
    trace
}

struct ActiveTest {
    query: QueryPoint,
    session: TestSession,
}

/// Bookkeeping of the cached walk: running tests, finished verdicts not yet
/// used by a move, and the priority queue of the current neighbourhood.
pub struct CacheState {
    capacity: usize,
    active: Vec<ActiveTest>,
    completed: HashMap<DyadicPoint, Verdict>,
    queue: Vec<DyadicPoint>,
}

impl CacheState {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::param("cache", "cache size must be at least 1"));
        }
        Ok(CacheState {
            capacity,
            active: Vec::new(),
            completed: HashMap::new(),
            queue: Vec::new(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Records a finished verdict, e.g. from a side observation.
    pub fn record(&mut self, point: DyadicPoint, verdict: Verdict) {
        self.completed.insert(point, verdict);
    }

    pub fn completed(&self) -> &HashMap<DyadicPoint, Verdict> {
        &self.completed
    }

    /// Points of the neighbourhood still needing a test, in priority order.
    pub fn queue(&self) -> &[DyadicPoint] {
        &self.queue
    }

    pub fn active_points(&self) -> impl Iterator<Item = &DyadicPoint> {
        self.active.iter().map(|a| &a.query.point)
    }

    /// Current node's points first (left, mid, right), then the parent's
    /// unshared point, then the midpoints of the left and right children.
    /// Endpoints 0 and 1 and already-decided points are skipped.
    pub fn neighbourhood(node: &NodeId) -> Vec<DyadicPoint> {
        let own = node.interval();
        let parent = node.parent().interval();
        let left = node.left_child().interval();
        let right = node.right_child().interval();
        let mut out: Vec<DyadicPoint> = Vec::with_capacity(6);
        let candidates = [
            own.left, own.mid, own.right, parent.left, parent.mid, parent.right, left.mid, right.mid,
        ];
        for p in candidates {
            if endpoint_verdict(&p).is_none() && !out.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    fn rebuild(&mut self, node: &NodeId, oracle: &GradientOracle) {
        self.queue = Self::neighbourhood(node)
            .into_iter()
            .filter(|p| !self.completed.contains_key(p))
            .collect();
        let mut old: Vec<Option<ActiveTest>> = std::mem::take(&mut self.active).into_iter().map(Some).collect();
        for p in self.queue.iter().take(self.capacity) {
            let kept = old
                .iter_mut()
                .find(|a| a.as_ref().is_some_and(|a| &a.query.point == p))
                .and_then(Option::take);
            self.active.push(kept.unwrap_or_else(|| ActiveTest {
                query: QueryPoint::new(p.clone(), oracle),
                session: TestSession::new(),
            }));
        }
    }

    /// If all three points of `node` have verdicts, consumes them.
    pub fn take_current(&mut self, node: &NodeId) -> Option<[Verdict; 3]> {
        let iv = node.interval();
        let mut out = [Verdict::Minus; 3];
        for (slot, p) in iv.points().into_iter().enumerate() {
            out[slot] = match endpoint_verdict(p) {
                Some(v) => v,
                None => *self.completed.get(p)?,
            };
        }
        for p in iv.points() {
            self.completed.remove(p);
        }
        Some(out)
    }
}

/// RWT with `cache` tests running in parallel over the neighbourhood of the
/// current node. Regret accrues at the head of the queue only. A finished
/// verdict is used for exactly one move, so `cache = 1` is plain RWT.
pub fn run_rwt_cached(
    oracle: &mut GradientOracle,
    test: &TestConfig,
    horizon: u64,
    cache: usize,
) -> Result<RegretTrace> {
    let state = CacheState::new(cache)?;
    Ok(run_rwt_cached_from(oracle, test, horizon, NodeId::root(), state))
}

/// Runs the cached walk from an explicit node and cache state.
pub fn run_rwt_cached_from(
    oracle: &mut GradientOracle,
    test: &TestConfig,
    horizon: u64,
    start: NodeId,
    mut state: CacheState,
) -> RegretTrace {
    let mut node = start;
    let mut trace = RegretTrace::new(FinalPosition::Node(node.clone()));
    state.rebuild(&node, oracle);
    loop {
        while let Some([l, m, r]) = state.take_current(&node) {
            node = decide_move(l, m, r).apply(&node);
            trace.moves += 1;
            state.rebuild(&node, oracle);
        }
        if trace.time >= horizon {
            break;
        }
        let head_regret = state.active[0].query.regret;
        let mut finished = false;
        for a in state.active.iter_mut() {
            let sample = a.query.gradient + oracle.noise();
            if let Some(v) = a.session.step(sample, test).expect("active sessions are running") {
                state.completed.insert(a.query.point.clone(), v);
                finished = true;
            }
        }
        trace.samples += state.active.len() as u64;
        trace.push(head_regret, 1);
        if finished {
            state.active.retain(|a| a.session.is_running());
            state.rebuild(&node, oracle);
        }
    }
    trace.final_position = FinalPosition::Node(node);
    trace
}

/// Step-size schedule `η_t`, `t = 1, 2, ...`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "kebab-case")]
pub enum StepSchedule {
    /// `c / t`
    COverT { c: f64 },
    /// `1 / (α̂ t)`
    InverseAlphaT { alpha_hat: f64 },
    /// `1 / √t`
    InverseSqrtT,
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::COverT { c } if !(c > 0.0) => Err(Error::param("c", format!("{c} must be > 0"))),
            StepSchedule::InverseAlphaT { alpha_hat } if !(alpha_hat > 0.0) => {
                Err(Error::param("alpha_hat", format!("{alpha_hat} must be > 0")))
            }
            _ => Ok(()),
        }
    }

    pub fn eta(&self, t: u64) -> f64 {
        let t = t as f64;
        match *self {
            StepSchedule::COverT { c } => c / t,
            StepSchedule::InverseAlphaT { alpha_hat } => 1.0 / (alpha_hat * t),
            StepSchedule::InverseSqrtT => 1.0 / t.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SgdInit {
    /// `x₁` uniform on `[0, 1]`, drawn from the oracle's stream.
    Uniform,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub schedule: StepSchedule,
    pub init: SgdInit,
}

/// `proj_[0,1](x - η g)`.
pub fn sgd_update(x: f64, eta: f64, gradient: f64) -> f64 {
    (x - eta * gradient).clamp(0.0, 1.0)
}

pub fn run_sgd(oracle: &mut GradientOracle, cfg: &SgdConfig, horizon: u64) -> Result<RegretTrace> {
    cfg.schedule.validate()?;
    let mut x = match cfg.init {
        SgdInit::Uniform => oracle.uniform(),
        SgdInit::Fixed(x) if (0.0..=1.0).contains(&x) => x,
        SgdInit::Fixed(x) => return Err(Error::param("x1", format!("{x} is outside [0, 1]"))),
    };
    let mut trace = RegretTrace::new(FinalPosition::Point(x));
    for t in 1..=horizon {
        trace.push(oracle.objective().regret_at(x), 1);
        let g = oracle.sample_gradient(x);
        x = sgd_update(x, cfg.schedule.eta(t), g);
    }
    trace.samples = horizon;
    trace.final_position = FinalPosition::Point(x);
    Ok(trace)
}
