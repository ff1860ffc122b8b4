//! Selection of fundamental system units.
//!
//! Roots come from the input vertices: inputs that act on a common state are
//! merged into one indivisible root. The remaining states are then attached by
//! forward sweeps (strongest incoming edge from an assigned state) and
//! backward passes (strongest outgoing edge to an assigned state).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::FsuError;
use crate::graph::{EquivalentGraph, Subgraph, Vertex};
use crate::linalg::Matrix;

/// One fundamental system unit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fsu {
    pub id: usize,
    /// Input indices, ascending.
    pub inputs: Vec<usize>,
    /// State indices, ascending.
    pub states: Vec<usize>,
    /// States attached during root selection, ascending.
    pub root_states: Vec<usize>,
}

impl Fsu {
    pub fn nodes(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.inputs
            .iter()
            .map(|&i| Vertex::Input(i))
            .chain(self.states.iter().map(|&j| Vertex::State(j)))
    }

    pub fn node_count(&self) -> usize {
        self.inputs.len() + self.states.len()
    }

    pub fn subgraph<'g>(&self, g: &'g EquivalentGraph) -> Subgraph<'g> {
        Subgraph::new(g, self.nodes()).expect("FSU vertices belong to the graph")
    }
}

/// FSUs of a graph together with their condensed coupling matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FsuCollection {
    n_inputs: usize,
    n_states: usize,
    fsus: Vec<Fsu>,
    unassigned: Vec<usize>,
    condensed: Matrix,
}

/// Lowest-index-first union-find over input indices.
struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.0[hi] = lo;
    }
}

/// Working state of the selection: owner FSU of every state, if any.
#[derive(Clone, Debug)]
pub struct Assignment {
    fsus: Vec<Fsu>,
    owner: Vec<Option<usize>>,
    /// Unassigned states, ascending.
    pending: Vec<usize>,
}

impl Assignment {
    pub fn fsus(&self) -> &[Fsu] {
        &self.fsus
    }

    pub fn pending(&self) -> &[usize] {
        &self.pending
    }

    pub fn owner(&self, state: usize) -> Option<usize> {
        self.owner[state]
    }

    fn assign(&mut self, state: usize, fsu: usize) {
        self.owner[state] = Some(fsu);
        let states = &mut self.fsus[fsu].states;
        let pos = states.binary_search(&state).unwrap_err();
        states.insert(pos, state);
    }

    /// Strongest candidate among `(fsu, vertex, |w|)`; ties go to the lowest
    /// FSU id, then the lowest vertex index.
    fn best(candidates: impl Iterator<Item = (usize, usize, f64)>) -> Option<usize> {
        candidates
            .fold(None, |best: Option<(usize, usize, f64)>, c| match best {
                Some(b) if b.2 > c.2 || (b.2 == c.2 && (b.0, b.1) <= (c.0, c.1)) => Some(b),
                _ => Some(c),
            })
            .map(|b| b.0)
    }
}

/// Root selection. Inputs that share a state are merged; states with an input
/// parent become root states, all others are left pending.
pub fn select_roots(g: &EquivalentGraph) -> Result<Assignment, FsuError> {
    let p = g.n_inputs();
    if let Some(u) = (0..p).find(|&u| g.out_edges(Vertex::Input(u)).next().is_none()) {
        return Err(FsuError::IdleInput(u));
    }
    let mut uf = UnionFind::new(p);
    for x in 0..g.n_states() {
        let mut parents = g
            .in_edges(Vertex::State(x))
            .filter(|e| e.source.is_input())
            .map(|e| e.source.index());
        if let Some(first) = parents.next() {
            for other in parents {
                uf.union(first, other);
            }
        }
    }
    let mut root_to_fsu = vec![usize::MAX; p];
    let mut fsus: Vec<Fsu> = Vec::new();
    for u in 0..p {
        let r = uf.find(u);
        if root_to_fsu[r] == usize::MAX {
            root_to_fsu[r] = fsus.len();
            fsus.push(Fsu {
                id: fsus.len(),
                inputs: Vec::new(),
                states: Vec::new(),
                root_states: Vec::new(),
            });
        }
        fsus[root_to_fsu[r]].inputs.push(u);
    }
    let mut owner = vec![None; g.n_states()];
    let mut pending = Vec::new();
    for (x, slot) in owner.iter_mut().enumerate() {
        let parent = g
            .in_edges(Vertex::State(x))
            .find(|e| e.source.is_input())
            .map(|e| e.source.index());
        match parent {
            Some(u) => {
                let f = root_to_fsu[uf.find(u)];
                *slot = Some(f);
                fsus[f].states.push(x);
                fsus[f].root_states.push(x);
            }
            None => pending.push(x),
        }
    }
    Ok(Assignment {
        fsus,
        owner,
        pending,
    })
}

/// Forward sweeps: a pending state joins the FSU of the assigned state with
/// the strongest edge into it. Assignments take effect within the sweep;
/// sweeps repeat until one changes nothing. Returns whether anything changed.
pub fn forward_assign(a: &mut Assignment, g: &EquivalentGraph) -> bool {
    let mut changed_any = false;
    loop {
        let mut changed = false;
        let mut k = 0;
        while k < a.pending.len() {
            let j = a.pending[k];
            let pick =
                Assignment::best(g.in_edges(Vertex::State(j)).filter_map(|e| match e.source {
                    Vertex::State(i) if i != j => a.owner[i].map(|f| (f, i, e.weight.abs())),
                    _ => None,
                }));
            match pick {
                Some(f) => {
                    a.assign(j, f);
                    a.pending.remove(k);
                    changed = true;
                }
                None => k += 1,
            }
        }
        changed_any |= changed;
        if !changed {
            return changed_any;
        }
    }
}

/// One backward pass: a pending state joins the FSU of the assigned state it
/// drives most strongly. Returns whether anything changed.
pub fn backward_assign(a: &mut Assignment, g: &EquivalentGraph) -> bool {
    let mut changed = false;
    let mut k = 0;
    while k < a.pending.len() {
        let i = a.pending[k];
        let pick = Assignment::best(
            g.out_edges(Vertex::State(i))
                .filter_map(|e| match e.target {
                    Vertex::State(j) if j != i => a.owner[j].map(|f| (f, j, e.weight.abs())),
                    _ => None,
                }),
        );
        match pick {
            Some(f) => {
                a.assign(i, f);
                a.pending.remove(k);
                changed = true;
            }
            None => k += 1,
        }
    }
    changed
}

/// Full selection: roots, then alternating forward and backward passes until
/// every state is housed or a round changes nothing.
///
/// States with no edge other than a self-loop are rejected up front. States
/// that remain pending afterwards have edges only among themselves (any edge
/// to a housed state would have been taken by one of the passes), so they
/// cannot be attached and are reported as an error.
pub fn select_fsus(g: &EquivalentGraph) -> Result<FsuCollection, FsuError> {
    let orphans: Vec<usize> = (0..g.n_states())
        .filter(|&x| g.neighborhood(Vertex::State(x)).is_empty())
        .collect();
    if !orphans.is_empty() {
        return Err(FsuError::OrphanStates(orphans));
    }
    let mut a = select_roots(g)?;
    while !a.pending.is_empty() {
        let fwd = forward_assign(&mut a, g);
        let bwd = backward_assign(&mut a, g);
        if !fwd && !bwd {
            return Err(FsuError::Unattachable(a.pending));
        }
    }
    Ok(FsuCollection::from_assignment(g, a))
}

fn condense(g: &EquivalentGraph, fsus: &[Fsu]) -> Matrix {
    let mut owner_in = vec![0; g.n_inputs()];
    let mut owner_x = vec![0; g.n_states()];
    for f in fsus {
        for &u in &f.inputs {
            owner_in[u] = f.id;
        }
        for &x in &f.states {
            owner_x[x] = f.id;
        }
    }
    let owner = |v: Vertex| match v {
        Vertex::Input(i) => owner_in[i],
        Vertex::State(j) => owner_x[j],
    };
    let mut m = Matrix::zeros(fsus.len(), fsus.len());
    for e in g.edges() {
        m[(owner(e.source), owner(e.target))] += e.weight.abs();
    }
    m
}

impl FsuCollection {
    fn from_assignment(g: &EquivalentGraph, a: Assignment) -> Self {
        let condensed = condense(g, &a.fsus);
        FsuCollection {
            n_inputs: g.n_inputs(),
            n_states: g.n_states(),
            fsus: a.fsus,
            unassigned: a.pending,
            condensed,
        }
    }

    /// Builds a collection from explicit node groups on `g`. Groups must be
    /// disjoint, each with at least one input and one state, and cover every
    /// vertex. Ids are the group positions.
    pub fn from_groups(
        g: &EquivalentGraph,
        groups: Vec<(Vec<usize>, Vec<usize>)>,
    ) -> Result<Self, FsuError> {
        let mut seen_u = vec![false; g.n_inputs()];
        let mut seen_x = vec![false; g.n_states()];
        let mut fsus = Vec::with_capacity(groups.len());
        for (id, (mut inputs, mut states)) in groups.into_iter().enumerate() {
            inputs.sort_unstable();
            states.sort_unstable();
            if inputs.is_empty() || states.is_empty() {
                return Err(FsuError::MalformedGroup(id));
            }
            for &u in &inputs {
                if u >= seen_u.len() || core::mem::replace(&mut seen_u[u], true) {
                    return Err(FsuError::MalformedGroup(id));
                }
            }
            for &x in &states {
                if x >= seen_x.len() || core::mem::replace(&mut seen_x[x], true) {
                    return Err(FsuError::MalformedGroup(id));
                }
            }
            let root_states = states
                .iter()
                .copied()
                .filter(|&x| {
                    g.in_edges(Vertex::State(x))
                        .any(|e| e.source.is_input() && inputs.contains(&e.source.index()))
                })
                .collect();
            fsus.push(Fsu {
                id,
                inputs,
                states,
                root_states,
            });
        }
        if let Some(u) = seen_u.iter().position(|s| !s) {
            return Err(FsuError::IdleInput(u));
        }
        let missing: Vec<usize> = (0..seen_x.len()).filter(|&x| !seen_x[x]).collect();
        if !missing.is_empty() {
            return Err(FsuError::Unattachable(missing));
        }
        let condensed = condense(g, &fsus);
        Ok(FsuCollection {
            n_inputs: g.n_inputs(),
            n_states: g.n_states(),
            fsus,
            unassigned: Vec::new(),
            condensed,
        })
    }

    /// A collection known only through its condensed matrix, one FSU per row
    /// with input `i` and state `i`.
    pub fn from_condensed(condensed: Matrix) -> Option<Self> {
        let n = condensed.rows();
        if condensed.cols() != n || !condensed.is_finite() {
            return None;
        }
        let fsus = (0..n)
            .map(|i| Fsu {
                id: i,
                inputs: vec![i],
                states: vec![i],
                root_states: vec![i],
            })
            .collect();
        Some(FsuCollection {
            n_inputs: n,
            n_states: n,
            fsus,
            unassigned: Vec::new(),
            condensed,
        })
    }

    /// Reassembles a collection from stored parts, checking disjointness and
    /// the condensed matrix shape.
    pub fn from_parts(
        n_inputs: usize,
        n_states: usize,
        fsus: Vec<Fsu>,
        condensed: Matrix,
    ) -> Result<Self, FsuError> {
        let n = fsus.len();
        if condensed.shape() != (n, n) {
            return Err(FsuError::MalformedGroup(n));
        }
        let mut seen_u = vec![false; n_inputs];
        let mut seen_x = vec![false; n_states];
        for (k, f) in fsus.iter().enumerate() {
            if f.id != k || f.inputs.is_empty() {
                return Err(FsuError::MalformedGroup(k));
            }
            for &u in &f.inputs {
                if u >= n_inputs || core::mem::replace(&mut seen_u[u], true) {
                    return Err(FsuError::MalformedGroup(k));
                }
            }
            for &x in &f.states {
                if x >= n_states || core::mem::replace(&mut seen_x[x], true) {
                    return Err(FsuError::MalformedGroup(k));
                }
            }
        }
        Ok(FsuCollection {
            n_inputs,
            n_states,
            fsus,
            unassigned: (0..n_states).filter(|&x| !seen_x[x]).collect(),
            condensed,
        })
    }

    pub fn len(&self) -> usize {
        self.fsus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fsus.is_empty()
    }

    pub fn fsus(&self) -> &[Fsu] {
        &self.fsus
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// States not housed by any FSU. Empty after a successful selection.
    pub fn unassigned(&self) -> &[usize] {
        &self.unassigned
    }

    /// `condensed[(i, j)]` is the absolute weight mass from FSU `i` to FSU `j`.
    pub fn condensed(&self) -> &Matrix {
        &self.condensed
    }

    /// FSU housing `state`.
    pub fn owner_of_state(&self, state: usize) -> Option<usize> {
        self.fsus
            .iter()
            .position(|f| f.states.binary_search(&state).is_ok())
    }

    /// Owner FSU per state index.
    pub fn state_owners(&self) -> Vec<Option<usize>> {
        let mut owners = vec![None; self.n_states];
        for f in &self.fsus {
            for &x in &f.states {
                owners[x] = Some(f.id);
            }
        }
        owners
    }

    /// Owner FSU per input index.
    pub fn input_owners(&self) -> Vec<Option<usize>> {
        let mut owners = vec![None; self.n_inputs];
        for f in &self.fsus {
            for &u in &f.inputs {
                owners[u] = Some(f.id);
            }
        }
        owners
    }

    /// Row plus column mass of FSU `i`, diagonal counted once.
    pub fn coupling_mass(&self, i: usize) -> f64 {
        let c = &self.condensed;
        (0..self.len()).map(|j| c[(i, j)] + c[(j, i)]).sum::<f64>() - c[(i, i)]
    }

    pub fn total_mass(&self) -> f64 {
        self.condensed.as_slice().iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_linear_graph, Edge, LinearSystem};
    use alloc::vec;
    use Vertex::{Input as U, State as X};

    fn graph(p: usize, n: usize, edges: &[(Vertex, Vertex, f64)]) -> EquivalentGraph {
        EquivalentGraph::from_edges(
            p,
            n,
            edges.iter().map(|&(s, t, w)| Edge {
                source: s,
                target: t,
                weight: w,
            }),
            vec![0.0; n],
        )
        .unwrap()
    }

    fn sys2() -> EquivalentGraph {
        build_linear_graph(
            &LinearSystem::new(
                Matrix::from_rows(&[vec![0.5, 0.1], vec![0.0, 0.5]]).unwrap(),
                Matrix::identity(2),
            )
            .unwrap(),
        )
    }

    fn groups(c: &FsuCollection) -> Vec<(Vec<usize>, Vec<usize>)> {
        c.fsus()
            .iter()
            .map(|f| (f.inputs.clone(), f.states.clone()))
            .collect()
    }

    #[test]
    fn sys2_roots_and_condensed() {
        let g = sys2();
        let a = select_roots(&g).unwrap();
        assert!(a.pending().is_empty());
        assert_eq!(a.fsus().len(), 2);
        let c = select_fsus(&g).unwrap();
        assert_eq!(groups(&c), vec![(vec![0], vec![0]), (vec![1], vec![1])]);
        assert_eq!(
            c.condensed().to_rows(),
            vec![vec![1.5, 0.0], vec![0.1, 1.5]]
        );
        assert!((c.total_mass() - g.total_mass()).abs() < 1e-15);
    }

    #[test]
    fn shared_state_merges_roots() {
        let g = graph(2, 1, &[(U(0), X(0), 1.0), (U(1), X(0), 1.0)]);
        let c = select_fsus(&g).unwrap();
        assert_eq!(groups(&c), vec![(vec![0, 1], vec![0])]);
    }

    #[test]
    fn diagonal_actuation_gives_singletons() {
        let sys = LinearSystem::new(Matrix::zeros(3, 3), Matrix::identity(3)).unwrap();
        let c = select_fsus(&build_linear_graph(&sys)).unwrap();
        assert_eq!(c.len(), 3);
        assert!(c.fsus().iter().all(|f| f.states.len() == 1));
    }

    #[test]
    fn chain_is_absorbed_forward() {
        let g = graph(
            1,
            3,
            &[(U(0), X(0), 1.0), (X(0), X(1), 0.3), (X(1), X(2), 0.2)],
        );
        let c = select_fsus(&g).unwrap();
        assert_eq!(groups(&c), vec![(vec![0], vec![0, 1, 2])]);
        assert_eq!(c.fsus()[0].root_states, vec![0]);
    }

    #[test]
    fn forward_picks_strongest_parent() {
        let g = graph(
            2,
            3,
            &[
                (U(0), X(0), 1.0),
                (U(1), X(1), 1.0),
                (X(0), X(2), 0.2),
                (X(1), X(2), 0.9),
            ],
        );
        let c = select_fsus(&g).unwrap();
        assert_eq!(c.owner_of_state(2), Some(1));
    }

    #[test]
    fn backward_only_state_joins_its_target() {
        let g = graph(1, 2, &[(U(0), X(0), 1.0), (X(1), X(0), 0.4)]);
        let mut a = select_roots(&g).unwrap();
        assert!(!forward_assign(&mut a, &g));
        assert!(backward_assign(&mut a, &g));
        assert_eq!(a.owner(1), Some(0));
    }

    #[test]
    fn backward_picks_strongest_child() {
        let g = graph(
            2,
            3,
            &[
                (U(0), X(0), 1.0),
                (U(1), X(1), 1.0),
                (X(2), X(0), 0.1),
                (X(2), X(1), 0.3),
            ],
        );
        assert_eq!(select_fsus(&g).unwrap().owner_of_state(2), Some(1));
    }

    #[test]
    fn equal_weights_break_ties_by_lowest_fsu() {
        let g = graph(
            2,
            3,
            &[
                (U(0), X(0), 1.0),
                (U(1), X(1), 1.0),
                (X(0), X(2), 0.5),
                (X(1), X(2), -0.5),
            ],
        );
        assert_eq!(select_fsus(&g).unwrap().owner_of_state(2), Some(0));
    }

    #[test]
    fn empty_pending_is_noop() {
        let g = sys2();
        let mut a = select_roots(&g).unwrap();
        assert!(!forward_assign(&mut a, &g));
        assert!(!backward_assign(&mut a, &g));
    }

    #[test]
    fn idle_input_rejected() {
        let g = graph(2, 1, &[(U(0), X(0), 1.0)]);
        assert_eq!(select_fsus(&g).unwrap_err(), FsuError::IdleInput(1));
    }

    #[test]
    fn orphan_states_rejected() {
        let g = graph(1, 3, &[(U(0), X(0), 1.0), (X(2), X(2), 0.5)]);
        assert_eq!(
            select_fsus(&g).unwrap_err(),
            FsuError::OrphanStates(vec![1, 2])
        );
    }

    #[test]
    fn detached_cycle_is_unattachable() {
        let g = graph(
            1,
            3,
            &[(U(0), X(0), 1.0), (X(1), X(2), 0.5), (X(2), X(1), 0.5)],
        );
        assert_eq!(
            select_fsus(&g).unwrap_err(),
            FsuError::Unattachable(vec![1, 2])
        );
    }

    #[test]
    fn every_fsu_is_a_csu() {
        let g = graph(
            3,
            6,
            &[
                (U(0), X(0), 1.0),
                (U(1), X(1), 1.0),
                (U(1), X(2), 0.3),
                (U(2), X(2), 1.0),
                (U(2), X(3), 1.0),
                (X(3), X(4), 0.7),
                (X(5), X(0), 0.2),
                (X(0), X(1), 0.1),
            ],
        );
        let c = select_fsus(&g).unwrap();
        assert_eq!(c.len(), 2);
        for f in c.fsus() {
            assert!(f.subgraph(&g).is_csu());
        }
    }

    #[test]
    fn from_groups_validates() {
        let g = sys2();
        assert!(FsuCollection::from_groups(&g, vec![(vec![0, 1], vec![0, 1])]).is_ok());
        assert!(
            FsuCollection::from_groups(&g, vec![(vec![0], vec![0]), (vec![1], vec![0, 1])])
                .is_err()
        );
        assert!(FsuCollection::from_groups(&g, vec![(vec![0], vec![0])]).is_err());
    }

    #[test]
    fn coupling_mass_counts_diagonal_once() {
        let c = select_fsus(&sys2()).unwrap();
        assert!((c.coupling_mass(0) - 1.6).abs() < 1e-15);
        assert!((c.coupling_mass(1) - 1.6).abs() < 1e-15);
    }
}
