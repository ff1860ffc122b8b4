//! Partitions of an FSU collection and the partition index.
//!
//! Two characterizations are provided. The ratio form
//! `W_intra / (1 + W_inter) + α / (1 + W_size)` is maximized by the greedy
//! engines; the quadratic form `W_inter − W_intra + α·W_size`, written over a
//! binary assignment matrix, is minimized by the exact engines.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::PartitionError;
use crate::fsu::FsuCollection;
use crate::graph::{EquivalentGraph, Vertex};

/// How a block's size is measured in `W_size`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SizeMeasure {
    /// Number of FSUs in the block.
    #[default]
    FsuCount,
    /// Number of graph vertices in the block.
    NodeCount,
}

/// Granularity of the partition index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IndexConfig {
    alpha: f64,
    kappa: Option<f64>,
    pub size: SizeMeasure,
}

impl IndexConfig {
    /// `alpha` must be finite and non-negative.
    pub fn new(alpha: f64) -> Result<Self, PartitionError> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(PartitionError::InvalidAlpha(alpha));
        }
        Ok(IndexConfig {
            alpha,
            kappa: None,
            size: SizeMeasure::FsuCount,
        })
    }

    /// `α = (κ / w_min)²` with `w_min` from [`min_coupling`].
    pub fn from_kappa(kappa: f64, coll: &FsuCollection) -> Result<Self, PartitionError> {
        if !kappa.is_finite() || kappa <= 0.0 {
            return Err(PartitionError::InvalidKappa(kappa));
        }
        let w_min = min_coupling(coll).ok_or(PartitionError::NoCoupling)?;
        let ratio = kappa / w_min;
        let mut cfg = IndexConfig::new(ratio * ratio)?;
        cfg.kappa = Some(kappa);
        Ok(cfg)
    }

    pub fn with_size(mut self, size: SizeMeasure) -> Self {
        self.size = size;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kappa(&self) -> Option<f64> {
        self.kappa
    }
}

/// Smallest nonzero off-diagonal entry of the condensed matrix, falling back
/// to the smallest nonzero entry overall when FSUs are uncoupled.
pub fn min_coupling(coll: &FsuCollection) -> Option<f64> {
    let c = coll.condensed();
    let n = coll.len();
    let smallest = |off_diagonal_only: bool| {
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| !off_diagonal_only || i != j)
            .map(|(i, j)| c[(i, j)])
            .filter(|&w| w > 0.0)
            .fold(None, |m: Option<f64>, w| Some(m.map_or(w, |m| m.min(w))))
    };
    smallest(true).or_else(|| smallest(false))
}

/// A non-overlapping partition of FSU ids `0..n` into nonempty blocks.
///
/// Blocks are kept canonical: members ascending, blocks ordered by their
/// smallest member. Equality is therefore equality up to block relabeling.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self, PartitionError> {
        let mut seen = vec![false; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(PartitionError::EmptyBlock(b));
            }
            for &f in block {
                if f >= n {
                    return Err(PartitionError::OutOfRange { fsu: f, count: n });
                }
                if core::mem::replace(&mut seen[f], true) {
                    return Err(PartitionError::Duplicate(f));
                }
            }
        }
        if let Some(f) = seen.iter().position(|s| !s) {
            return Err(PartitionError::Unassigned(f));
        }
        Ok(Self::canonical(n, blocks))
    }

    fn canonical(n: usize, mut blocks: Vec<Vec<usize>>) -> Self {
        for b in &mut blocks {
            b.sort_unstable();
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Partition { n, blocks }
    }

    /// Builds a partition from a block label per FSU. Labels need not be
    /// contiguous.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut slot: Vec<Option<usize>> = Vec::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (f, &l) in labels.iter().enumerate() {
            if l >= slot.len() {
                slot.resize(l + 1, None);
            }
            let b = *slot[l].get_or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[b].push(f);
        }
        Self::canonical(labels.len(), blocks)
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            n,
            blocks: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn single_block(n: usize) -> Self {
        Partition {
            n,
            blocks: if n == 0 {
                Vec::new()
            } else {
                vec![(0..n).collect()]
            },
        }
    }

    pub fn fsu_count(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Block index per FSU.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.n];
        for (b, block) in self.blocks.iter().enumerate() {
            for &f in block {
                labels[f] = b;
            }
        }
        labels
    }

    /// Block sizes in block order.
    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// Graph vertices of block `b`.
    pub fn block_nodes(&self, coll: &FsuCollection, b: usize) -> Vec<Vertex> {
        let mut nodes: Vec<Vertex> = self.blocks[b]
            .iter()
            .flat_map(|&f| coll.fsus()[f].nodes())
            .collect();
        nodes.sort_unstable();
        nodes
    }
}

/// The three ingredients of the partition index.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Components {
    pub intra: f64,
    pub inter: f64,
    pub size: f64,
}

impl Components {
    /// `intra / (1 + inter) + α / (1 + size)`, or 0 for an empty partition.
    pub fn ratio(&self, alpha: f64) -> f64 {
        if self.size == 0.0 {
            return 0.0;
        }
        self.intra / (1.0 + self.inter) + alpha / (1.0 + self.size)
    }
}

fn block_of_vertex(g: &EquivalentGraph, coll: &FsuCollection, p: &Partition) -> Vec<usize> {
    let labels = p.labels();
    let mut block = vec![usize::MAX; g.vertex_count()];
    for f in coll.fsus() {
        for v in f.nodes() {
            block[g.flat(v)] = labels[f.id];
        }
    }
    block
}

/// Sum over blocks of the absolute weights of edges inside the block,
/// self-edges included.
pub fn w_intra(g: &EquivalentGraph, coll: &FsuCollection, p: &Partition) -> f64 {
    let block = block_of_vertex(g, coll, p);
    g.edges()
        .iter()
        .filter(|e| {
            let b = block[g.flat(e.source)];
            b != usize::MAX && b == block[g.flat(e.target)]
        })
        .map(|e| e.weight.abs())
        .sum()
}

/// Sum over blocks, over frontier vertices `s` and outside neighbours `t`, of
/// `|w(s,t)| + |w(t,s)|`. Every cross-block edge is counted from both sides.
pub fn w_inter(g: &EquivalentGraph, coll: &FsuCollection, p: &Partition) -> f64 {
    let block = block_of_vertex(g, coll, p);
    let mut total = 0.0;
    for b in 0..p.block_count() {
        for s in p.block_nodes(coll, b) {
            for t in g.neighborhood(s) {
                let bt = block[g.flat(t)];
                if bt != b && bt != usize::MAX {
                    total += g.weight(s, t).abs() + g.weight(t, s).abs();
                }
            }
        }
    }
    total
}

/// Sum over blocks of the squared block size.
pub fn w_size(coll: &FsuCollection, p: &Partition, measure: SizeMeasure) -> f64 {
    p.blocks()
        .iter()
        .map(|b| {
            let s = match measure {
                SizeMeasure::FsuCount => b.len(),
                SizeMeasure::NodeCount => b.iter().map(|&f| coll.fsus()[f].node_count()).sum(),
            } as f64;
            s * s
        })
        .sum()
}

/// Node-level components on the equivalent graph.
pub fn components(
    g: &EquivalentGraph,
    coll: &FsuCollection,
    p: &Partition,
    cfg: &IndexConfig,
) -> Components {
    Components {
        intra: w_intra(g, coll, p),
        inter: w_inter(g, coll, p),
        size: w_size(coll, p, cfg.size),
    }
}

/// The same components computed from the condensed matrix alone.
pub fn condensed_components(coll: &FsuCollection, p: &Partition, cfg: &IndexConfig) -> Components {
    let c = coll.condensed();
    let labels = p.labels();
    let mut intra = 0.0;
    let mut cross = 0.0;
    for i in 0..p.fsu_count() {
        for j in 0..p.fsu_count() {
            if labels[i] == labels[j] {
                intra += c[(i, j)];
            } else {
                cross += c[(i, j)];
            }
        }
    }
    Components {
        intra,
        inter: 2.0 * cross,
        size: w_size(coll, p, cfg.size),
    }
}

/// Ratio characterization of the partition index on the equivalent graph.
pub fn index_ratio(
    g: &EquivalentGraph,
    coll: &FsuCollection,
    p: &Partition,
    cfg: &IndexConfig,
) -> f64 {
    components(g, coll, p, cfg).ratio(cfg.alpha)
}

/// Ratio index from the condensed matrix. Equal to [`index_ratio`] for a
/// collection selected from the graph.
pub fn condensed_ratio(coll: &FsuCollection, p: &Partition, cfg: &IndexConfig) -> f64 {
    condensed_components(coll, p, cfg).ratio(cfg.alpha)
}

/// Binary FSU-by-block matrix `δ`, square, one 1 per row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssignmentMatrix {
    n: usize,
    delta: Vec<bool>,
}

impl AssignmentMatrix {
    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self, PartitionError> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(PartitionError::NotSquare {
                rows: n,
                cols: r.len(),
            });
        }
        for (row, r) in rows.iter().enumerate() {
            let sum = r.iter().filter(|&&d| d).count();
            if sum != 1 {
                return Err(PartitionError::RowSum { row, sum });
            }
        }
        Ok(AssignmentMatrix {
            n,
            delta: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut delta = vec![false; n * n];
        for i in 0..n {
            delta[i * n + i] = true;
        }
        AssignmentMatrix { n, delta }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, fsu: usize, block: usize) -> bool {
        self.delta[fsu * self.n + block]
    }

    fn column_of(&self, fsu: usize) -> usize {
        (0..self.n)
            .find(|&m| self.get(fsu, m))
            .expect("each row holds exactly one 1")
    }
}

/// Drops empty columns.
pub fn partition_from_delta(d: &AssignmentMatrix) -> Partition {
    let labels: Vec<usize> = (0..d.n).map(|i| d.column_of(i)).collect();
    Partition::from_labels(&labels)
}

/// Block `b` of the canonical partition goes to column `b`.
pub fn delta_from_partition(p: &Partition) -> AssignmentMatrix {
    let n = p.fsu_count();
    let mut delta = vec![false; n * n];
    for (i, b) in p.labels().into_iter().enumerate() {
        delta[i * n + b] = true;
    }
    AssignmentMatrix { n, delta }
}

/// The three terms of the quadratic index, summed exactly as written over
/// `δ` and the condensed weights `w(i,j)`.
pub fn quadratic_terms(d: &AssignmentMatrix, coll: &FsuCollection) -> Components {
    let n = d.n;
    let w = coll.condensed();
    let members: Vec<Vec<usize>> = (0..n)
        .map(|m| (0..n).filter(|&i| d.get(i, m)).collect())
        .collect();
    let mut inter = 0.0;
    let mut intra = 0.0;
    let mut size = 0.0;
    for m in 0..n {
        for &i in &members[m] {
            for l in (0..n).filter(|&l| l != m) {
                for &j in members[l].iter().filter(|&&j| j != i) {
                    inter += w[(i, j)].abs() + w[(j, i)].abs();
                }
            }
            for &j in &members[m] {
                intra += w[(i, i)].abs() + w[(i, j)].abs() + w[(j, i)].abs() + w[(j, j)].abs();
            }
        }
        let s = members[m].len() as f64;
        size += s * s;
    }
    Components { intra, inter, size }
}

/// `W_inter(δ) − W_intra(δ) + α·W_size(δ)`.
pub fn index_quadratic(d: &AssignmentMatrix, coll: &FsuCollection, cfg: &IndexConfig) -> f64 {
    let t = quadratic_terms(d, coll);
    t.inter - t.intra + cfg.alpha * t.size
}

/// Quadratic index of a partition given as block labels, in `O(N²)`.
pub fn quadratic_of_labels(coll: &FsuCollection, labels: &[usize], alpha: f64) -> f64 {
    let w = coll.condensed();
    let n = labels.len();
    let mut value = 0.0;
    let mut sizes = vec![0usize; n];
    for &l in labels {
        sizes[l] += 1;
    }
    for i in 0..n {
        for j in 0..n {
            let c = w[(i, j)].abs() + w[(j, i)].abs();
            if labels[i] == labels[j] {
                value -= w[(i, i)].abs() + w[(j, j)].abs() + c;
            } else if i != j {
                value += c;
            }
        }
    }
    value + alpha * sizes.iter().map(|&s| (s * s) as f64).sum::<f64>()
}
