//! Exact partitioning.
//!
//! Set partitions are enumerated as restricted growth strings: FSU `k` (in
//! some fixed order) goes to one of the blocks already opened by FSUs
//! `0..k`, or opens the next one. Every set partition appears exactly once.
//!
//! The branch-and-bound engine works on the quadratic index. Writing
//! `d_i = |w(i,i)|`, `c_ij = |w(i,j)| + |w(j,i)|` and `T` for the total
//! condensed mass, the index of a partition equals
//!
//! ```text
//! 2T − Σ_i (6 d_i − α) − Σ_{i<j, same block} q_ij,   q_ij = 2(d_i + d_j) + 4 c_ij − 2α
//! ```
//!
//! so minimizing it means maximizing the total `q` inside blocks. For a
//! partial assignment the search bounds that total by
//!
//! ```text
//! Q_assigned + Σ_{u unassigned} max(0, max_b link(u, b)) + Σ_{u<v unassigned} max(0, q_uv)
//! ```
//!
//! where `link(u, b)` sums `q_uv` over the members `v` of block `b`. The bound
//! never increases from a node to its children.

use alloc::vec;
use alloc::vec::Vec;

use crate::clock::Clock;
use crate::error::PartitionError;
use crate::fsu::FsuCollection;
use crate::greedy::{greedy_partition, greedy_refined};
use crate::metrics::{condensed_ratio, quadratic_of_labels, IndexConfig, Partition};

/// Largest collection the brute-force engine accepts.
pub const BRUTE_FORCE_LIMIT: usize = 12;

/// Restricted growth strings of length `n` in lexicographic order.
#[derive(Clone, Debug)]
pub struct GrowthStrings {
    current: Vec<usize>,
    /// `max_prefix[k]` is the largest label among `current[..=k]`.
    max_prefix: Vec<usize>,
    started: bool,
    done: bool,
}

impl GrowthStrings {
    pub fn new(n: usize) -> Self {
        GrowthStrings {
            current: vec![0; n],
            max_prefix: vec![0; n],
            started: false,
            done: false,
        }
    }
}

impl Iterator for GrowthStrings {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(self.current.clone());
        }
        let n = self.current.len();
        let mut k = n;
        while k > 1 {
            k -= 1;
            if self.current[k] <= self.max_prefix[k - 1] {
                self.current[k] += 1;
                self.max_prefix[k] = self.max_prefix[k - 1].max(self.current[k]);
                for j in k + 1..n {
                    self.current[j] = 0;
                    self.max_prefix[j] = self.max_prefix[k];
                }
                return Some(self.current.clone());
            }
        }
        self.done = true;
        None
    }
}

/// Bell number `B(n)`, or `None` on overflow.
pub fn bell(n: usize) -> Option<u128> {
    let mut row: Vec<u128> = vec![1];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last()?);
        for &r in &row {
            let v = next.last()?.checked_add(r)?;
            next.push(v);
        }
        row = next;
    }
    row.first().copied()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// Quadratic index, minimized.
    Quadratic,
    /// Ratio index, maximized.
    Ratio,
}

/// Exhaustive search. Ties go to the lexicographically first growth string.
pub fn brute_force_partition(
    coll: &FsuCollection,
    cfg: &IndexConfig,
    objective: Objective,
) -> Result<(Partition, f64), PartitionError> {
    let n = coll.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(PartitionError::TooLarge {
            count: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let score = |labels: &[usize]| match objective {
        Objective::Quadratic => quadratic_of_labels(coll, labels, cfg.alpha()),
        Objective::Ratio => -condensed_ratio(coll, &Partition::from_labels(labels), cfg),
    };
    let mut best: Option<(f64, Vec<usize>)> = None;
    for labels in GrowthStrings::new(n) {
        let s = score(&labels);
        if best.as_ref().is_none_or(|(b, _)| s < *b) {
            best = Some((s, labels));
        }
    }
    let (s, labels) = best.expect("at least one partition");
    let value = match objective {
        Objective::Quadratic => s,
        Objective::Ratio => -s,
    };
    Ok((Partition::from_labels(&labels), value))
}

/// Granularity above which all singletons is the unique quadratic optimum:
/// `2·max_i d_i + 2·max_{i≠j} c_ij + 1`.
pub fn alpha_big(coll: &FsuCollection) -> f64 {
    let w = coll.condensed();
    let n = coll.len();
    let d_max = (0..n).map(|i| w[(i, i)].abs()).fold(0.0, f64::max);
    let c_max = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| w[(i, j)].abs() + w[(j, i)].abs())
        .fold(0.0, f64::max);
    2.0 * d_max + 2.0 * c_max + 1.0
}

/// Pairwise form of the quadratic index.
#[derive(Clone, Debug)]
pub struct PairForm {
    n: usize,
    /// `q[i * n + j]`, symmetric, zero diagonal.
    q: Vec<f64>,
    /// Index of a partition is `offset − Σ_{same-block pairs} q`.
    offset: f64,
}

impl PairForm {
    pub fn new(coll: &FsuCollection, alpha: f64) -> Self {
        let w = coll.condensed();
        let n = coll.len();
        let d: Vec<f64> = (0..n).map(|i| w[(i, i)].abs()).collect();
        let total: f64 = w.as_slice().iter().map(|x| x.abs()).sum();
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let c = w[(i, j)].abs() + w[(j, i)].abs();
                    q[i * n + j] = 2.0 * (d[i] + d[j]) + 4.0 * c - 2.0 * alpha;
                }
            }
        }
        let offset = 2.0 * total - d.iter().map(|&di| 6.0 * di - alpha).sum::<f64>();
        PairForm { n, q, offset }
    }

    pub fn q(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.n + j]
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Total `q` over same-block pairs.
    pub fn gain(&self, labels: &[usize]) -> f64 {
        let mut g = 0.0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                if labels[i] == labels[j] {
                    g += self.q(i, j);
                }
            }
        }
        g
    }

    pub fn value(&self, labels: &[usize]) -> f64 {
        self.offset - self.gain(labels)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BnbOptions {
    /// Wall-clock budget in seconds, measured by the supplied clock.
    pub time_limit: Option<f64>,
    /// Relative gap at which the search may stop early.
    pub gap_tol: f64,
    /// Disable to enumerate every set partition.
    pub prune: bool,
}

impl Default for BnbOptions {
    fn default() -> Self {
        BnbOptions {
            time_limit: None,
            gap_tol: 0.0,
            prune: true,
        }
    }
}

/// A new incumbent found during the search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Incumbent {
    pub nodes: u64,
    pub time: f64,
    pub value: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactResult {
    pub partition: Partition,
    /// Quadratic index of `partition`.
    pub value: f64,
    /// Relative gap between `value` and the best proven lower bound.
    pub gap: f64,
    pub timed_out: bool,
    pub nodes: u64,
    pub leaves: u64,
    pub trace: Vec<Incumbent>,
}

impl ExactResult {
    pub fn is_optimal(&self) -> bool {
        self.gap == 0.0
    }
}

struct Search<'a, C: Clock> {
    form: PairForm,
    order: Vec<usize>,
    /// `future[k]`: Σ max(0, q) over pairs among `order[k..]`.
    future: Vec<f64>,
    labels: Vec<usize>,
    /// `link[u * n + b]` for unassigned `u`.
    link: Vec<f64>,
    blocks: usize,
    best_gain: f64,
    best_labels: Vec<usize>,
    /// Largest bound discarded only because of the gap tolerance.
    loose_bound: f64,
    /// Largest bound on the stack when the search was cut short.
    open_bound: f64,
    opts: BnbOptions,
    clock: &'a C,
    start: f64,
    nodes: u64,
    leaves: u64,
    timed_out: bool,
    trace: Vec<Incumbent>,
}

impl<C: Clock> Search<'_, C> {
    fn n(&self) -> usize {
        self.order.len()
    }

    fn scale(&self) -> f64 {
        (self.form.offset - self.best_gain).abs().max(1.0)
    }

    fn bound(&self, k: usize, gain: f64) -> f64 {
        let n = self.n();
        let mut b = gain + self.future[k];
        for &u in &self.order[k..] {
            let best = (0..self.blocks)
                .map(|blk| self.link[u * n + blk])
                .fold(0.0, f64::max);
            b += best;
        }
        b
    }

    fn record(&mut self, gain: f64) {
        self.best_gain = gain;
        self.best_labels.clone_from(&self.labels);
        let value = self.form.offset - gain;
        let time = self.clock.now() - self.start;
        self.trace.push(Incumbent {
            nodes: self.nodes,
            time,
            value,
            gap: f64::NAN,
        });
    }

    fn out_of_time(&mut self) -> bool {
        if self.timed_out {
            return true;
        }
        if let Some(limit) = self.opts.time_limit {
            if self.nodes % 256 == 1 && self.clock.now() - self.start > limit {
                self.timed_out = true;
            }
        }
        self.timed_out
    }

    fn place(&mut self, v: usize, blk: usize, sign: f64) {
        let n = self.n();
        for k in 0..n {
            let u = self.order[k];
            if u != v {
                self.link[u * n + blk] += sign * self.form.q(u, v);
            }
        }
    }

    fn dfs(&mut self, k: usize, gain: f64) {
        self.nodes += 1;
        if k == self.n() {
            self.leaves += 1;
            if gain > self.best_gain || self.best_labels.is_empty() {
                self.record(gain);
            }
            return;
        }
        let bound = self.bound(k, gain);
        if self.opts.prune {
            let tol = 1e-12 * self.scale();
            if bound <= self.best_gain + tol {
                return;
            }
            if bound <= self.best_gain + self.opts.gap_tol * self.scale() {
                self.loose_bound = self.loose_bound.max(bound);
                return;
            }
        }
        if self.out_of_time() {
            self.open_bound = self.open_bound.max(bound);
            return;
        }
        let n = self.n();
        let v = self.order[k];
        let opened = self.blocks;
        for blk in 0..=opened {
            if self.timed_out {
                self.open_bound = self.open_bound.max(bound);
                return;
            }
            let step = self.link[v * n + blk];
            self.labels[v] = blk;
            if blk == opened {
                self.blocks += 1;
            }
            self.place(v, blk, 1.0);
            self.dfs(k + 1, gain + step);
            self.place(v, blk, -1.0);
            if blk == opened {
                self.blocks -= 1;
            }
        }
    }
}

/// Branch and bound on the quadratic index.
///
/// FSUs are branched in descending order of total coupling. The incumbent
/// starts from the best of the refined greedy partition, all singletons and a
/// single block.
pub fn branch_and_bound<C: Clock>(
    coll: &FsuCollection,
    cfg: &IndexConfig,
    opts: BnbOptions,
    clock: &C,
) -> ExactResult {
    let n = coll.len();
    let form = PairForm::new(coll, cfg.alpha());
    let mut order: Vec<usize> = (0..n).collect();
    let mass: Vec<f64> = (0..n).map(|i| coll.coupling_mass(i)).collect();
    order.sort_by(|&a, &b| mass[b].total_cmp(&mass[a]).then(a.cmp(&b)));
    let mut future = vec![0.0; n + 1];
    for k in (0..n).rev() {
        let u = order[k];
        let add: f64 = order[k + 1..].iter().map(|&v| form.q(u, v).max(0.0)).sum();
        future[k] = future[k + 1] + add;
    }
    let start = clock.now();
    let mut s = Search {
        form,
        order,
        future,
        labels: vec![0; n],
        link: vec![0.0; n * n],
        blocks: 0,
        best_gain: f64::NEG_INFINITY,
        best_labels: Vec::new(),
        loose_bound: f64::NEG_INFINITY,
        open_bound: f64::NEG_INFINITY,
        opts,
        clock,
        start,
        nodes: 0,
        leaves: 0,
        timed_out: false,
        trace: Vec::new(),
    };
    if opts.prune {
        let seeds = [
            greedy_refined(coll, cfg),
            Partition::singletons(n),
            Partition::single_block(n),
        ];
        for p in seeds {
            let labels = p.labels();
            let gain = s.form.gain(&labels);
            if gain > s.best_gain {
                s.labels = labels;
                s.record(gain);
            }
        }
        s.labels = vec![0; n];
    }
    s.dfs(0, 0.0);
    let scale = s.scale();
    let proven = s.loose_bound.max(s.open_bound);
    let gap = if proven > s.best_gain {
        (proven - s.best_gain) / scale
    } else {
        0.0
    };
    let value = s.form.offset - s.best_gain;
    // intermediate incumbents are measured against the root bound
    let root_bound = s.future[0];
    let mut trace = s.trace;
    for inc in &mut trace {
        let inc_gain = s.form.offset - inc.value;
        inc.gap = ((root_bound - inc_gain) / scale).max(gap);
    }
    if let Some(last) = trace.last_mut() {
        last.gap = gap;
    }
    ExactResult {
        partition: Partition::from_labels(&s.best_labels),
        value,
        gap,
        timed_out: s.timed_out,
        nodes: s.nodes,
        leaves: s.leaves,
        trace,
    }
}

/// Partitioning engine for sweeps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Engine {
    Greedy,
    Refined,
    Brute,
    BranchAndBound(BnbOptions),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub kappa: f64,
    pub alpha: f64,
    pub partition: Partition,
}

/// Runs `engine` at `α = (κ/w_min)²` for each κ and keeps the first point of
/// every distinct partition.
pub fn alpha_sweep<C: Clock>(
    coll: &FsuCollection,
    kappas: &[f64],
    engine: Engine,
    clock: &C,
) -> Result<Vec<SweepPoint>, PartitionError> {
    let mut out: Vec<SweepPoint> = Vec::new();
    for &kappa in kappas {
        let cfg = IndexConfig::from_kappa(kappa, coll)?;
        let partition = run_engine(coll, &cfg, engine, clock)?;
        if out.iter().all(|p| p.partition != partition) {
            out.push(SweepPoint {
                kappa,
                alpha: cfg.alpha(),
                partition,
            });
        }
    }
    Ok(out)
}

pub fn run_engine<C: Clock>(
    coll: &FsuCollection,
    cfg: &IndexConfig,
    engine: Engine,
    clock: &C,
) -> Result<Partition, PartitionError> {
    Ok(match engine {
        Engine::Greedy => greedy_partition(coll, cfg),
        Engine::Refined => greedy_refined(coll, cfg),
        Engine::Brute => brute_force_partition(coll, cfg, Objective::Quadratic)?.0,
        Engine::BranchAndBound(opts) => branch_and_bound(coll, cfg, opts, clock).partition,
    })
}
