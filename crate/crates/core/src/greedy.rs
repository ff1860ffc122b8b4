//! Greedy maximization of the ratio index and local refinement by relocation.
//!
//! Both work on the condensed matrix. The engine keeps `N` sub-lists (some
//! possibly empty) and, for every FSU, its coupling to each sub-list, so the
//! index after a tentative move is available in constant time.

use alloc::vec;
use alloc::vec::Vec;

use crate::fsu::FsuCollection;
use crate::metrics::{Components, IndexConfig, Partition, SizeMeasure};

/// What a trace step did.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    Assign,
    Relocate,
}

/// One committed move.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceStep {
    pub kind: StepKind,
    pub fsu: usize,
    pub block: usize,
    pub gain: f64,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GreedyOptions {
    /// Recompute the index from scratch after every move and assert that it
    /// matches the incremental value.
    pub verify: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GreedyResult {
    pub partition: Partition,
    /// Ratio index of `partition`.
    pub value: f64,
    pub trace: Vec<TraceStep>,
}

struct State<'a> {
    c: &'a crate::linalg::Matrix,
    alpha: f64,
    weight: Vec<f64>,
    labels: Vec<Option<usize>>,
    /// `link[f * n + b]`: coupling of `f` with the assigned FSUs of block `b`,
    /// `f` itself excluded, both directions.
    link: Vec<f64>,
    /// Coupling of `f` with all assigned FSUs other than itself.
    link_total: Vec<f64>,
    block_size: Vec<f64>,
    intra: f64,
    cross: f64,
    size: f64,
    assigned: usize,
    verify: bool,
    trace: Vec<TraceStep>,
}

impl<'a> State<'a> {
    fn new(coll: &'a FsuCollection, cfg: &IndexConfig, opts: GreedyOptions) -> Self {
        let n = coll.len();
        let weight = coll
            .fsus()
            .iter()
            .map(|f| match cfg.size {
                SizeMeasure::FsuCount => 1.0,
                SizeMeasure::NodeCount => f.node_count() as f64,
            })
            .collect();
        State {
            c: coll.condensed(),
            alpha: cfg.alpha(),
            weight,
            labels: vec![None; n],
            link: vec![0.0; n * n],
            link_total: vec![0.0; n],
            block_size: vec![0.0; n],
            intra: 0.0,
            cross: 0.0,
            size: 0.0,
            assigned: 0,
            verify: opts.verify,
            trace: Vec::new(),
        }
    }

    fn n(&self) -> usize {
        self.labels.len()
    }

    fn value_of(&self, intra: f64, cross: f64, size: f64, assigned: usize) -> f64 {
        if assigned == 0 {
            return 0.0;
        }
        Components {
            intra,
            inter: 2.0 * cross,
            size,
        }
        .ratio(self.alpha)
    }

    fn value(&self) -> f64 {
        self.value_of(self.intra, self.cross, self.size, self.assigned)
    }

    fn pair(&self, f: usize, g: usize) -> f64 {
        self.c[(f, g)].abs() + self.c[(g, f)].abs()
    }

    /// Index after placing unassigned `f` into `b`.
    fn value_after_assign(&self, f: usize, b: usize) -> f64 {
        let n = self.n();
        let l = self.link[f * n + b];
        let s = self.block_size[b];
        let w = self.weight[f];
        self.value_of(
            self.intra + self.c[(f, f)].abs() + l,
            self.cross + self.link_total[f] - l,
            self.size + 2.0 * s * w + w * w,
            self.assigned + 1,
        )
    }

    /// Index after moving assigned `f` from its block to `b`.
    fn value_after_move(&self, f: usize, b: usize) -> f64 {
        let n = self.n();
        let a = self.labels[f].expect("assigned");
        let (la, lb) = (self.link[f * n + a], self.link[f * n + b]);
        let (sa, sb, w) = (self.block_size[a], self.block_size[b], self.weight[f]);
        self.value_of(
            self.intra - la + lb,
            self.cross + la - lb,
            self.size - 2.0 * sa * w + 2.0 * sb * w + 2.0 * w * w,
            self.assigned,
        )
    }

    fn add_links(&mut self, f: usize, b: usize, sign: f64) {
        let n = self.n();
        for g in 0..n {
            if g != f {
                let p = sign * self.pair(f, g);
                self.link[g * n + b] += p;
                self.link_total[g] += p;
            }
        }
    }

    fn assign(&mut self, f: usize, b: usize) {
        let n = self.n();
        let l = self.link[f * n + b];
        let s = self.block_size[b];
        let w = self.weight[f];
        self.intra += self.c[(f, f)].abs() + l;
        self.cross += self.link_total[f] - l;
        self.size += 2.0 * s * w + w * w;
        self.block_size[b] += w;
        self.assigned += 1;
        self.labels[f] = Some(b);
        self.add_links(f, b, 1.0);
    }

    fn relocate(&mut self, f: usize, b: usize) {
        let n = self.n();
        let a = self.labels[f].expect("assigned");
        let (la, lb) = (self.link[f * n + a], self.link[f * n + b]);
        let w = self.weight[f];
        self.intra += lb - la;
        self.cross += la - lb;
        self.size += 2.0 * w * (self.block_size[b] - self.block_size[a]) + 2.0 * w * w;
        self.block_size[a] -= w;
        self.block_size[b] += w;
        self.add_links(f, a, -1.0);
        self.labels[f] = Some(b);
        self.add_links(f, b, 1.0);
    }

    fn commit(&mut self, kind: StepKind, f: usize, b: usize) {
        let before = self.value();
        match kind {
            StepKind::Assign => self.assign(f, b),
            StepKind::Relocate => self.relocate(f, b),
        }
        let value = self.value();
        if self.verify {
            let full = self.recompute();
            assert!(
                (full - value).abs() <= 1e-9 * full.abs().max(1.0),
                "incremental index {value} disagrees with recomputation {full}"
            );
        }
        self.trace.push(TraceStep {
            kind,
            fsu: f,
            block: b,
            gain: value - before,
            value,
        });
    }

    /// Index of the current (possibly partial) assignment from scratch.
    fn recompute(&self) -> f64 {
        let n = self.n();
        let (mut intra, mut cross) = (0.0, 0.0);
        let mut sizes = vec![0.0; n];
        for f in 0..n {
            let Some(a) = self.labels[f] else { continue };
            sizes[a] += self.weight[f];
            for g in 0..n {
                match self.labels[g] {
                    Some(b) if b == a => intra += self.c[(f, g)].abs(),
                    Some(_) => cross += self.c[(f, g)].abs(),
                    None => {}
                }
            }
        }
        let size = sizes.iter().map(|s| s * s).sum();
        self.value_of(intra, cross, size, self.assigned)
    }

    /// One refinement pass: commits the single best strictly improving
    /// relocation. Returns whether a move was made.
    fn refine_pass(&mut self) -> bool {
        let cur = self.value();
        let tol = 1e-12 * cur.abs().max(1.0);
        let mut best_gain = 0.0;
        let mut best = None;
        for f in 0..self.n() {
            let Some(a) = self.labels[f] else { continue };
            for b in (0..self.n()).filter(|&b| b != a) {
                let gain = self.value_after_move(f, b) - cur;
                if gain > tol && gain > best_gain {
                    best_gain = gain;
                    best = Some((f, b));
                }
            }
        }
        match best {
            Some((f, b)) => {
                self.commit(StepKind::Relocate, f, b);
                true
            }
            None => false,
        }
    }

    fn refine(&mut self) {
        while self.refine_pass() {}
    }

    fn best_assignment(&self) -> Option<(usize, usize)> {
        let cur = self.value();
        let mut best: Option<(f64, usize, usize)> = None;
        for f in (0..self.n()).filter(|&f| self.labels[f].is_none()) {
            let mut empty_seen = false;
            for b in 0..self.n() {
                if self.block_size[b] == 0.0 {
                    // every empty sub-list scores the same; the first stands for all
                    if empty_seen {
                        continue;
                    }
                    empty_seen = true;
                }
                let gain = self.value_after_assign(f, b) - cur;
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, b));
                }
            }
        }
        best.map(|(_, f, b)| (f, b))
    }

    fn run_greedy(&mut self, refine_each_step: bool) {
        while let Some((f, b)) = self.best_assignment() {
            self.commit(StepKind::Assign, f, b);
            if refine_each_step {
                self.refine();
            }
        }
    }

    fn finish(self) -> GreedyResult {
        let labels: Vec<usize> = self.labels.iter().map(|l| l.expect("complete")).collect();
        GreedyResult {
            value: self.value(),
            partition: Partition::from_labels(&labels),
            trace: self.trace,
        }
    }
}

/// Greedy construction: repeatedly commits the (FSU, sub-list) pair with the
/// largest immediate gain. Ties go to the lowest FSU id, then the lowest
/// sub-list index.
pub fn greedy_partition(coll: &FsuCollection, cfg: &IndexConfig) -> Partition {
    greedy_with(coll, cfg, GreedyOptions::default()).partition
}

pub fn greedy_with(coll: &FsuCollection, cfg: &IndexConfig, opts: GreedyOptions) -> GreedyResult {
    let mut s = State::new(coll, cfg, opts);
    s.run_greedy(false);
    s.finish()
}

/// Relocates single FSUs, best strictly improving move first, until no move
/// improves the ratio index. An FSU may also move into a fresh block.
pub fn refine_partition(coll: &FsuCollection, p: &Partition, cfg: &IndexConfig) -> Partition {
    refine_with(coll, p, cfg, GreedyOptions::default()).partition
}

pub fn refine_with(
    coll: &FsuCollection,
    p: &Partition,
    cfg: &IndexConfig,
    opts: GreedyOptions,
) -> GreedyResult {
    assert_eq!(
        p.fsu_count(),
        coll.len(),
        "partition does not match collection"
    );
    let mut s = State::new(coll, cfg, opts);
    for (b, block) in p.blocks().iter().enumerate() {
        for &f in block {
            s.assign(f, b);
        }
    }
    s.refine();
    s.finish()
}

/// Greedy construction with a full refinement after every assignment.
pub fn greedy_refined(coll: &FsuCollection, cfg: &IndexConfig) -> Partition {
    greedy_refined_with(coll, cfg, GreedyOptions::default()).partition
}

pub fn greedy_refined_with(
    coll: &FsuCollection,
    cfg: &IndexConfig,
    opts: GreedyOptions,
) -> GreedyResult {
    let mut s = State::new(coll, cfg, opts);
    s.run_greedy(true);
    s.finish()
}
