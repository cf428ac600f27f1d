use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CboError, ChoiceHook, ChoiceLog, Fill};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    /// Depth-first, left to right.
    Sequential,
    /// Leftmost and rightmost plans first, then repeatedly a plan between
    /// two visited ones.
    Binary,
    /// Random walk over paths accepting worse plans with a probability that
    /// decays with the temperature.
    Annealing {
        seed: u64,
        temp0: f64,
        cooling: f64,
        steps: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    None,
    /// Stop once the best plan's cost is below the time spent optimizing.
    Adaptive,
    MaxIters(usize),
}

/// Source of the time an iteration took, in cost units.
pub trait Clock {
    /// Time since the previous call (or since the optimizer started).
    fn lap(&mut self) -> f64;
}

/// Fixed cost per iteration.
#[derive(Debug, Clone, Copy)]
pub struct SimulatedClock {
    pub per_iteration: f64,
}

impl Clock for SimulatedClock {
    fn lap(&mut self) -> f64 {
        self.per_iteration
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostedPlan<P> {
    pub plan: P,
    pub cost: f64,
    pub path: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub path: Vec<usize>,
    /// `None` when costing failed.
    pub cost: Option<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct Report<P> {
    pub best: Option<CostedPlan<P>>,
    pub trace: Vec<TraceEntry>,
    /// Accumulated optimization time.
    pub t_opt: f64,
    /// Longest the choice log grew; see [`ChoiceLog::peak_size`].
    pub peak_log: usize,
    /// Deepest path seen.
    pub max_depth: usize,
}

impl<P> Report<P> {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn paths(&self) -> Vec<Vec<usize>> {
        self.trace.iter().map(|t| t.path.clone()).collect()
    }
}

/// One visited plan together with the option counts along its path.
#[derive(Debug, Clone)]
struct Leaf {
    path: Vec<usize>,
    options: Vec<usize>,
}

/// Prefix of a plan strictly between `low` and `high`, or `None` when no
/// such plan exists.
fn between(low: &Leaf, high: &Leaf) -> Option<Vec<usize>> {
    let i = low.path.iter().zip(&high.path).position(|(a, b)| a != b)?;
    let (l, h) = (low.path[i], high.path[i]);
    if h >= l + 2 {
        let mut p = low.path[..i].to_vec();
        p.push(l + (h - l) / 2);
        return Some(p);
    }
    if let Some(j) = (i + 1..low.path.len()).find(|&j| low.path[j] + 1 < low.options[j]) {
        let mut p = low.path[..j].to_vec();
        p.push(low.path[j] + (low.options[j] - low.path[j]) / 2);
        return Some(p);
    }
    let j = (i + 1..high.path.len()).find(|&j| high.path[j] > 0)?;
    let mut p = high.path[..j].to_vec();
    p.push((high.path[j] - 1) / 2);
    Some(p)
}

/// Hook following a prefix and then choosing uniformly at random.
struct RandomFill<'a> {
    log: &'a mut ChoiceLog,
    rng: &'a mut ChaCha8Rng,
}

impl ChoiceHook for RandomFill<'_> {
    fn make_choice(&mut self, num_choices: usize) -> Result<usize, CboError> {
        if self.log.pending() > 0 {
            return self.log.make_choice(num_choices);
        }
        let c = self.rng.gen_range(0..num_choices.max(1));
        self.log.push_prescription(c);
        self.log.make_choice(num_choices)
    }
}

/// Enumerate plans produced by `generate` under `strategy`, costing each
/// with `cost`, and return the cheapest. A failed costing skips the plan.
pub fn optimize<P, E, G, C>(
    mut generate: G,
    mut cost: C,
    strategy: Strategy,
    stop: StopRule,
    clock: &mut dyn Clock,
) -> Result<Report<P>, E>
where
    E: From<CboError>,
    G: FnMut(&mut dyn ChoiceHook) -> Result<P, E>,
    C: FnMut(&P) -> Result<f64, E>,
{
    let mut report = Report {
        best: None,
        trace: Vec::new(),
        t_opt: 0.0,
        peak_log: 0,
        max_depth: 0,
    };
    let mut log = ChoiceLog::new();
    let mut rng = match strategy {
        Strategy::Annealing { seed, .. } => ChaCha8Rng::seed_from_u64(seed),
        _ => ChaCha8Rng::seed_from_u64(0),
    };
    // Binary strategy state.
    let mut intervals: VecDeque<(Leaf, Leaf)> = VecDeque::new();
    let mut first: Option<Leaf> = None;
    // Annealing state.
    let mut current: Option<(Leaf, f64)> = None;
    let mut temp = match strategy {
        Strategy::Annealing { temp0, .. } => temp0,
        _ => 0.0,
    };
    clock.lap();
    let mut iteration = 0usize;
    loop {
        if let Strategy::Annealing { steps, .. } = strategy {
            if iteration >= steps.max(1) {
                break;
            }
        }
        let plan = match strategy {
            Strategy::Annealing { .. } if current.is_none() => {
                log.prescribe(&[], Fill::First);
                let mut hook = RandomFill {
                    log: &mut log,
                    rng: &mut rng,
                };
                generate(&mut hook)?
            }
            _ => generate(&mut log)?,
        };
        log.finish_pass()?;
        let path = log.taken().to_vec();
        let options = log.options().to_vec();
        report.max_depth = report.max_depth.max(path.len());
        iteration += 1;
        let c = cost(&plan).ok();
        let mut accepted = false;
        if let Some(c) = c {
            if report.best.as_ref().is_none_or(|b| c < b.cost) {
                report.best = Some(CostedPlan {
                    plan,
                    cost: c,
                    path: path.clone(),
                });
            }
        }
        report.t_opt += clock.lap();

        // Decide the next pass.
        let leaf = Leaf {
            path: path.clone(),
            options,
        };
        let more = match strategy {
            Strategy::Sequential => log.advance(),
            Strategy::Binary => {
                match first.take() {
                    None if iteration == 1 => {
                        // The rightmost plan differs from the leftmost one
                        // only if some choice on the way had alternatives.
                        let more = leaf.options.iter().any(|&n| n > 1);
                        first = Some(leaf);
                        log.prescribe(&[], Fill::Last);
                        more
                    }
                    Some(low) => {
                        if low.path != leaf.path {
                            intervals.push_back((low, leaf));
                        }
                        next_binary(&mut intervals, &mut log)
                    }
                    None => {
                        let (low, high) = report_pending(&mut intervals);
                        intervals.push_back((low, leaf.clone()));
                        intervals.push_back((leaf, high));
                        next_binary(&mut intervals, &mut log)
                    }
                }
            }
            Strategy::Annealing { cooling, .. } => {
                if let Some(c) = c {
                    accepted = match &current {
                        None => true,
                        Some((_, cur)) if c <= *cur => true,
                        Some((_, cur)) => {
                            temp > 0.0 && rng.gen::<f64>() < libm::exp(-(c - cur) / temp)
                        }
                    };
                    if accepted {
                        current = Some((leaf, c));
                    }
                } else if current.is_none() {
                    current = Some((leaf, f64::INFINITY));
                }
                temp *= cooling;
                let (base, _) = current.as_ref().expect("set above");
                let mut next = base.path.clone();
                if !next.is_empty() {
                    let k = rng.gen_range(0..next.len());
                    let n = base.options[k];
                    if n > 1 {
                        let shift = rng.gen_range(1..n);
                        next[k] = (next[k] + shift) % n;
                    }
                }
                log.set_lenient(true);
                log.prescribe(&next, Fill::First);
                true
            }
        };
        if !matches!(strategy, Strategy::Annealing { .. }) {
            accepted = true;
        }
        report.trace.push(TraceEntry {
            path,
            cost: c,
            accepted,
        });
        report.peak_log = report.peak_log.max(log.peak_size());
        let proceed = match stop {
            StopRule::None => true,
            StopRule::MaxIters(n) => iteration < n,
            StopRule::Adaptive => report.best.as_ref().is_none_or(|b| b.cost >= report.t_opt),
        };
        if !more || !proceed {
            break;
        }
    }
    Ok(report)
}

/// The interval whose midpoint was just visited.
fn report_pending(intervals: &mut VecDeque<(Leaf, Leaf)>) -> (Leaf, Leaf) {
    intervals
        .pop_front()
        .expect("a midpoint was visited for an open interval")
}

/// Prescribe the midpoint of the first non-empty interval, leaving that
/// interval at the queue head.
fn next_binary(intervals: &mut VecDeque<(Leaf, Leaf)>, log: &mut ChoiceLog) -> bool {
    while let Some((low, high)) = intervals.front() {
        if let Some(prefix) = between(low, high) {
            log.prescribe(&prefix, Fill::First);
            return true;
        }
        intervals.pop_front();
    }
    false
}
