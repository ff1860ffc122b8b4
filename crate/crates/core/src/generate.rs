//! Test-network generators.
//!
//! All randomness comes from ChaCha8 seeded through
//! `SeedableRng::seed_from_u64`. Uniform reals are `(next_u64 >> 11) · 2⁻⁵³`;
//! integers below `n` use the multiply-shift `(next_u64 · n) >> 64`. Draw
//! order is part of the contract and is fixed by the loops below.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::graph::{Guard, LinearSystem, PwaMode, PwaSystem, SystemModel};
use crate::linalg::Matrix;

/// Seeded generator with the sampling rules documented at module level.
pub struct Prng(ChaCha8Rng);

impl Prng {
    pub fn new(seed: u64) -> Self {
        Prng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.0.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

/// Hierarchical network of scalar FSUs.
///
/// Level 1 groups of `base_size` FSUs are cliques with weight `strong_w` in
/// both directions. At every higher level the `base_size` child groups form a
/// ring, neighbouring children joined by one link in both directions between
/// their corner FSUs. The corner of child `a` facing child `b` is reached by
/// descending into sub-group `b` at every level below. Links at level `ℓ`
/// carry `weak_w · weak_scale^(ℓ−2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModularSpec {
    pub levels: u32,
    pub base_size: usize,
    pub strong_w: f64,
    pub weak_w: f64,
    pub weak_scale: f64,
}

impl Default for ModularSpec {
    fn default() -> Self {
        ModularSpec {
            levels: 3,
            base_size: 4,
            strong_w: 0.1,
            weak_w: 0.01,
            weak_scale: 1.0,
        }
    }
}

pub const MODULAR_SELF_WEIGHT: f64 = 0.5;
pub const MODULAR_INPUT_WEIGHT: f64 = 1.0;

impl ModularSpec {
    pub fn with_levels(levels: u32) -> Self {
        ModularSpec {
            levels,
            ..Self::default()
        }
    }

    pub fn fsu_count(&self) -> usize {
        self.base_size.pow(self.levels)
    }

    /// Child pairs joined at every level above the first.
    fn ring(&self) -> Vec<(usize, usize)> {
        match self.base_size {
            0 | 1 => Vec::new(),
            2 => vec![(0, 1)],
            b => (0..b).map(|a| (a, (a + 1) % b)).collect(),
        }
    }

    fn groups_at(&self, level: u32) -> usize {
        self.fsu_count() / self.base_size.pow(level)
    }

    /// Directed edge count of the generated graph.
    pub fn edge_count(&self) -> usize {
        let n = self.fsu_count();
        let b = self.base_size;
        let ring = self.ring().len();
        let links: usize = (2..=self.levels).map(|l| self.groups_at(l) * ring).sum();
        2 * n + n * (b - 1) + 2 * links
    }

    /// Sum of absolute edge weights of the generated graph.
    pub fn weight_mass(&self) -> f64 {
        let n = self.fsu_count() as f64;
        let b = self.base_size as f64;
        let ring = self.ring().len() as f64;
        let weak: f64 = (2..=self.levels)
            .map(|l| {
                self.groups_at(l) as f64
                    * ring
                    * self.weak_w
                    * libm::pow(self.weak_scale, (l - 2) as f64)
            })
            .sum();
        n * (MODULAR_SELF_WEIGHT + MODULAR_INPUT_WEIGHT)
            + n * (b - 1.0) * self.strong_w
            + 2.0 * weak
    }

    /// Leaf FSU of the group starting at `start` with `size` members, reached
    /// by always descending into sub-group `towards`.
    fn corner(&self, mut start: usize, mut size: usize, towards: usize) -> usize {
        while size > 1 {
            size /= self.base_size;
            start += towards * size;
        }
        start
    }
}

/// Modular network as a linear system with `A_ii = 0.5` and `B = I`.
pub fn gen_modular(spec: &ModularSpec) -> LinearSystem {
    let n = spec.fsu_count();
    let b = spec.base_size.max(1);
    let mut a = Matrix::from_diagonal(&vec![MODULAR_SELF_WEIGHT; n]);
    for g in (0..n).step_by(b) {
        for i in g..g + b {
            for j in g..g + b {
                if i != j {
                    a[(i, j)] = spec.strong_w;
                }
            }
        }
    }
    for level in 2..=spec.levels {
        let size = b.pow(level);
        let child = size / b;
        let w = spec.weak_w * libm::pow(spec.weak_scale, (level - 2) as f64);
        for start in (0..n).step_by(size) {
            for (ca, cb) in spec.ring() {
                let x = spec.corner(start + ca * child, child, cb);
                let y = spec.corner(start + cb * child, child, ca);
                a[(x, y)] = w;
                a[(y, x)] = w;
            }
        }
    }
    let inputs = Matrix::from_diagonal(&vec![MODULAR_INPUT_WEIGHT; n]);
    LinearSystem::new(a, inputs).expect("modular matrices are consistent")
}

/// Random network of scalar FSUs with directed couplings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomFsuSpec {
    pub n_fsus: usize,
    /// Probability of each directed coupling, in `(0, 1]`.
    pub density: f64,
    pub w_lo: f64,
    pub w_hi: f64,
    pub seed: u64,
    /// Emit a two-mode piecewise-affine system split on the sign of `x1`.
    pub pwa: bool,
}

impl Default for RandomFsuSpec {
    fn default() -> Self {
        RandomFsuSpec {
            n_fsus: 9,
            density: 0.3,
            w_lo: 0.01,
            w_hi: 1.0,
            seed: 0,
            pwa: false,
        }
    }
}

/// Random FSU network. The undirected coupling graph is made connected by
/// linking each FSU not yet reachable from FSU 0 to a random earlier FSU.
pub fn gen_random_fsu(spec: &RandomFsuSpec) -> SystemModel {
    let n = spec.n_fsus;
    let mut rng = Prng::new(spec.seed);
    let mut a = Matrix::from_diagonal(&vec![MODULAR_SELF_WEIGHT; n]);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.chance(spec.density) {
                a[(j, i)] = rng.range(spec.w_lo, spec.w_hi);
            }
        }
    }
    let mut comp: Vec<usize> = (0..n).collect();
    fn find(c: &mut [usize], mut i: usize) -> usize {
        while c[i] != i {
            c[i] = c[c[i]];
            i = c[i];
        }
        i
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && a[(j, i)] != 0.0 {
                let (ri, rj) = (find(&mut comp, i), find(&mut comp, j));
                comp[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    for k in 1..n {
        if find(&mut comp, k) != find(&mut comp, 0) {
            let other = rng.below(k);
            let w = rng.range(spec.w_lo, spec.w_hi);
            if rng.chance(0.5) {
                a[(other, k)] = w;
            } else {
                a[(k, other)] = w;
            }
            let rk = find(&mut comp, k);
            comp[rk] = find(&mut comp, 0);
        }
    }
    let b = Matrix::identity(n);
    if !spec.pwa {
        return SystemModel::Linear(LinearSystem::new(a, b).expect("consistent"));
    }
    let half = |sign: f64| {
        let mut hx = Matrix::zeros(1, n);
        hx[(0, 0)] = -sign;
        Guard {
            hx,
            hu: Matrix::zeros(1, n),
            h: vec![0.0],
        }
    };
    let mut a2 = a.clone();
    for i in 0..n {
        a2[(i, i)] = -MODULAR_SELF_WEIGHT;
    }
    SystemModel::Pwa(
        PwaSystem::new(vec![
            PwaMode {
                a,
                b: b.clone(),
                g: vec![0.0; n],
                guard: half(1.0),
            },
            PwaMode {
                a: a2,
                b,
                g: vec![0.0; n],
                guard: half(-1.0),
            },
        ])
        .expect("consistent"),
    )
}

/// Generic sparse input/state system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenericSpec {
    pub n: usize,
    pub p: usize,
    pub density: f64,
    pub seed: u64,
    /// Embed `p` disjoint clusters, each driven by one input.
    pub planted: bool,
}

impl Default for GenericSpec {
    fn default() -> Self {
        GenericSpec {
            n: 100,
            p: 20,
            density: 0.03,
            seed: 0,
            planted: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenericSystem {
    pub system: LinearSystem,
    /// Planted clusters as state index lists, cluster `k` driven by input `k`.
    pub clusters: Option<Vec<Vec<usize>>>,
}

fn signed_weight(rng: &mut Prng, lo: f64, hi: f64) -> f64 {
    let w = rng.range(lo, hi);
    if rng.chance(0.5) {
        -w
    } else {
        w
    }
}

/// Random system with every input actuating at least one state and every
/// state reachable from some input.
///
/// Input `i` always drives state `⌊i·n/p⌋`, so `p = n` with zero density gives
/// `B = I` and a diagonal `A`. In planted mode each input drives only the head
/// of its cluster; clusters are chains with extra strong internal edges, and
/// cross-cluster edges are weaker than any internal one.
pub fn gen_generic(spec: &GenericSpec) -> GenericSystem {
    assert!(spec.p >= 1 && spec.n >= spec.p, "need n >= p >= 1");
    let (n, p) = (spec.n, spec.p);
    let mut rng = Prng::new(spec.seed);
    let mut a = Matrix::zeros(n, n);
    let mut b = Matrix::zeros(n, p);
    for i in 0..n {
        a[(i, i)] = rng.range(0.2, 0.9);
    }
    if spec.planted {
        let mut heads: Vec<usize> = (1..n).collect();
        for k in (1..heads.len()).rev() {
            let j = rng.below(k + 1);
            heads.swap(k, j);
        }
        let mut cuts: Vec<usize> = heads[..p - 1].to_vec();
        cuts.push(0);
        cuts.sort_unstable();
        cuts.push(n);
        let clusters: Vec<Vec<usize>> = cuts.windows(2).map(|w| (w[0]..w[1]).collect()).collect();
        let mut cluster_of = vec![0; n];
        for (k, c) in clusters.iter().enumerate() {
            b[(c[0], k)] = 1.0;
            for &x in c {
                cluster_of[x] = k;
            }
            for w in c.windows(2) {
                a[(w[1], w[0])] = signed_weight(&mut rng, 0.5, 1.0);
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i == j || a[(j, i)] != 0.0 || !rng.chance(spec.density) {
                    continue;
                }
                a[(j, i)] = if cluster_of[i] == cluster_of[j] {
                    signed_weight(&mut rng, 0.5, 1.0)
                } else {
                    signed_weight(&mut rng, 0.01, 0.1)
                };
            }
        }
        return GenericSystem {
            system: LinearSystem::new(a, b).expect("consistent"),
            clusters: Some(clusters),
        };
    }
    for i in 0..p {
        b[(i * n / p, i)] = signed_weight(&mut rng, 0.5, 1.5);
    }
    for i in 0..p {
        for j in 0..n {
            if b[(j, i)] == 0.0 && rng.chance(spec.density / 2.0) {
                b[(j, i)] = signed_weight(&mut rng, 0.1, 1.0);
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.chance(spec.density) {
                a[(j, i)] = signed_weight(&mut rng, 0.05, 0.5);
            }
        }
    }
    // make every state reachable from an input
    let mut reached = vec![false; n];
    let mut stack: Vec<usize> = (0..n)
        .filter(|&j| (0..p).any(|i| b[(j, i)] != 0.0))
        .collect();
    for &j in &stack {
        reached[j] = true;
    }
    loop {
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if !reached[j] && a[(j, i)] != 0.0 {
                    reached[j] = true;
                    stack.push(j);
                }
            }
        }
        let Some(j) = reached.iter().position(|r| !r) else {
            break;
        };
        let sources: Vec<usize> = (0..n).filter(|&i| reached[i]).collect();
        let i = sources[rng.below(sources.len())];
        a[(j, i)] = signed_weight(&mut rng, 0.05, 0.5);
        reached[j] = true;
        stack.push(j);
    }
    GenericSystem {
        system: LinearSystem::new(a, b).expect("consistent"),
        clusters: None,
    }
}
