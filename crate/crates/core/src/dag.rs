//! Directed acyclic graphs over the nodes `0..=n+1`.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::varset::VarSet;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dag {
    parents: Vec<VarSet>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DagProperties {
    pub uninformed: bool,
    pub nontrivial: bool,
    pub perfect: bool,
    pub well_behaved: bool,
    /// Triples `(i, j, k)` with `i < j`, `i -> k`, `j -> k` and `i`, `j` unlinked.
    pub v_colliders: Vec<(usize, usize, usize)>,
}

/// Maximal cliques `C_1..C_m` arranged in a path, with `0` in `C_1` and the
/// consequence in `C_m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JunctionTree {
    pub cliques: Vec<VarSet>,
}

impl JunctionTree {
    /// `C_i ∩ C_{i+1}` for `i < m`.
    pub fn intersections(&self) -> Vec<VarSet> {
        self.cliques.windows(2).map(|w| w[0].intersection(w[1])).collect()
    }
}

/// Ordered minimal separators `A*_1..A*_m`; `A*_0 = {0}` is implicit.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SeparatorOrder {
    sets: Vec<VarSet>,
}

impl SeparatorOrder {
    /// Validates that the order ends with `{n+1}`, that no set contains
    /// another, and that every set lies within `1..=n+1`.
    pub fn new(sets: Vec<VarSet>, n: usize) -> Result<Self> {
        let outcome = VarSet::range(1, n + 2);
        if sets.last() != Some(&VarSet::singleton(n + 1)) {
            return Err(Error::domain("separator order must end with the consequence"));
        }
        for (i, a) in sets.iter().enumerate() {
            if a.is_empty() || !a.is_subset(outcome) {
                return Err(Error::domain(format!("separator {a} is not a nonempty subset of {outcome}")));
            }
            for b in &sets[..i] {
                if a.is_subset(*b) || b.is_subset(*a) {
                    return Err(Error::domain(format!("separators {b} and {a} are nested")));
                }
            }
        }
        Ok(SeparatorOrder { sets })
    }

    pub fn sets(&self) -> &[VarSet] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// `A*_i` with `A*_0 = {0}`.
    pub fn get(&self, i: usize) -> VarSet {
        if i == 0 {
            VarSet::singleton(0)
        } else {
            self.sets[i - 1]
        }
    }

    pub fn union(&self) -> VarSet {
        self.sets.iter().fold(VarSet::empty(), |acc, s| acc.union(*s))
    }

    /// Edges `j -> k` with `j ∈ A*_i` and `k ∈ A*_{i+1} \ A*_i`.
    pub fn revealed_causes(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for i in 0..self.sets.len() {
            let (cur, next) = (self.get(i), self.get(i + 1));
            for j in cur {
                for k in next.difference(cur) {
                    edges.push((j, k));
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Revealed causes plus `j -> k` for `j < k` inside each `A*_{i+1} \ A*_i`.
    pub fn revealed_dag(&self, n: usize) -> Dag {
        let mut edges = self.revealed_causes();
        for i in 0..self.sets.len() {
            let fresh = self.get(i + 1).difference(self.get(i)).to_vec();
            for (a, &j) in fresh.iter().enumerate() {
                for &k in &fresh[a + 1..] {
                    edges.push((j, k));
                }
            }
        }
        Dag::new(n + 2, &edges).expect("revealed relation is acyclic")
    }
}

impl fmt::Display for SeparatorOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, s) in self.sets.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str(")")
    }
}

impl Dag {
    pub fn new(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if !(3..=VarSet::MAX_VARS).contains(&num_nodes) {
            return Err(Error::domain(format!("a DAG needs between 3 and {} nodes", VarSet::MAX_VARS)));
        }
        let mut parents = vec![VarSet::empty(); num_nodes];
        for &(i, j) in edges {
            if i >= num_nodes || j >= num_nodes {
                return Err(Error::domain(format!("edge ({i},{j}) references a missing node")));
            }
            if i == j {
                return Err(Error::Acyclicity(i));
            }
            parents[j].insert(i);
        }
        let dag = Dag { parents };
        if let Err(node) = dag.try_topological_order() {
            return Err(Error::Acyclicity(node));
        }
        Ok(dag)
    }

    pub fn empty(num_nodes: usize) -> Self {
        Dag::new(num_nodes, &[]).unwrap()
    }

    /// Every edge `i -> j` with `i < j`.
    pub fn complete(num_nodes: usize) -> Self {
        let edges: Vec<_> = (0..num_nodes).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
        Dag::new(num_nodes, &edges).unwrap()
    }

    pub fn num_nodes(&self) -> usize {
        self.parents.len()
    }

    /// Number of covariates.
    pub fn n(&self) -> usize {
        self.parents.len() - 2
    }

    pub fn consequence(&self) -> usize {
        self.parents.len() - 1
    }

    pub fn all_nodes(&self) -> VarSet {
        VarSet::range(0, self.num_nodes())
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        j < self.parents.len() && self.parents[j].contains(i)
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.has_edge(i, j) || self.has_edge(j, i)
    }

    pub fn parents(&self, j: usize) -> VarSet {
        self.parents[j]
    }

    pub fn children(&self, i: usize) -> VarSet {
        (0..self.num_nodes()).filter(|&j| self.parents[j].contains(i)).collect()
    }

    pub fn neighbors(&self, i: usize) -> VarSet {
        self.parents[i].union(self.children(i))
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<_> = (0..self.num_nodes()).flat_map(|j| self.parents[j].iter().map(move |i| (i, j))).collect();
        edges.sort_unstable();
        edges
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(|p| p.len()).sum()
    }

    fn try_topological_order(&self) -> std::result::Result<Vec<usize>, usize> {
        let n = self.num_nodes();
        let mut indegree: Vec<usize> = self.parents.iter().map(|p| p.len()).collect();
        let children: Vec<VarSet> = (0..n).map(|i| self.children(i)).collect();
        let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for c in children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if order.len() == n {
            Ok(order)
        } else {
            Err((0..n).find(|&i| indegree[i] > 0).unwrap())
        }
    }

    /// Topological order, smallest available index first.
    pub fn topological_order(&self) -> Vec<usize> {
        self.try_topological_order().expect("acyclic by construction")
    }

    /// Strict ancestors of `j`.
    pub fn ancestors(&self, j: usize) -> VarSet {
        let mut seen = VarSet::empty();
        let mut stack: Vec<usize> = self.parents[j].to_vec();
        while let Some(i) = stack.pop() {
            if !seen.contains(i) {
                seen.insert(i);
                stack.extend(self.parents[i].difference(seen));
            }
        }
        seen
    }

    pub fn has_directed_path(&self, from: usize, to: usize) -> bool {
        self.ancestors(to).contains(from)
    }

    pub fn v_colliders(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for k in 0..self.num_nodes() {
            let pa = self.parents[k].to_vec();
            for (a, &i) in pa.iter().enumerate() {
                for &j in &pa[a + 1..] {
                    if !self.adjacent(i, j) {
                        out.push((i, j, k));
                    }
                }
            }
        }
        out
    }

    pub fn is_uninformed(&self) -> bool {
        self.parents[0].is_empty()
    }

    pub fn is_nontrivial(&self) -> bool {
        self.has_directed_path(0, self.consequence())
    }

    pub fn is_perfect(&self) -> bool {
        self.v_colliders().is_empty()
    }

    pub fn classify(&self) -> DagProperties {
        let v_colliders = self.v_colliders();
        let uninformed = self.is_uninformed();
        let nontrivial = self.is_nontrivial();
        let perfect = v_colliders.is_empty();
        let well_behaved = perfect
            && uninformed
            && nontrivial
            && self.relevant_nodes().map(|rel| self.edges().iter().all(|&(i, j)| rel.contains(i) && rel.contains(j))).unwrap_or(false);
        DagProperties { uninformed, nontrivial, perfect, well_behaved, v_colliders }
    }

    pub fn is_well_behaved(&self) -> bool {
        self.classify().well_behaved
    }

    fn require_perfect_uninformed_nontrivial(&self) -> Result<()> {
        if !self.is_perfect() {
            return Err(Error::Unsupported("DAG has a v-collider".into()));
        }
        if !self.is_uninformed() {
            return Err(Error::Unsupported("DAG has an edge into the action node".into()));
        }
        if !self.is_nontrivial() {
            return Err(Error::Unsupported("DAG has no path from the action to the consequence".into()));
        }
        Ok(())
    }

    /// Minimal active paths from node 0 to the consequence, sorted.
    pub fn enumerate_maps(&self) -> Vec<Vec<usize>> {
        let target = self.consequence();
        let children: Vec<VarSet> = (0..self.num_nodes()).map(|i| self.children(i)).collect();
        let mut out = Vec::new();
        let mut path = vec![0];
        self.extend_maps(&children, target, &mut path, VarSet::singleton(0), &mut out);
        out.sort();
        out
    }

    fn extend_maps(&self, children: &[VarSet], target: usize, path: &mut Vec<usize>, on_path: VarSet, out: &mut Vec<Vec<usize>>) {
        let last = *path.last().unwrap();
        let earlier = on_path.without(last);
        for k in children[last] {
            // A shortcut from an earlier node makes the path non-minimal.
            if !self.parents[k].is_disjoint(earlier) {
                continue;
            }
            path.push(k);
            if k == target {
                out.push(path.clone());
            } else {
                self.extend_maps(children, target, path, on_path.with(k), out);
            }
            path.pop();
        }
    }

    /// Nodes lying on some minimal active path.
    pub fn relevant_nodes(&self) -> Result<VarSet> {
        self.require_perfect_uninformed_nontrivial()?;
        Ok(self.enumerate_maps().into_iter().flatten().collect())
    }

    /// Links present in every equivalent uninformed DAG.
    pub fn fundamental_links(&self) -> Result<Vec<(usize, usize)>> {
        self.require_perfect_uninformed_nontrivial()?;
        let dist = self.distances_from_action();
        let edges = self.edges();
        let mut fundamental: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(j, k)| matches!((dist[j], dist[k]), (Some(dj), Some(dk)) if dj + 1 == dk))
            .collect();
        loop {
            let mut added = false;
            for &(j, k) in &edges {
                if fundamental.contains(&(j, k)) {
                    continue;
                }
                let witness = fundamental.iter().any(|&(l, jj)| jj == j && l != 0 && !self.has_edge(l, k));
                if witness {
                    fundamental.push((j, k));
                    added = true;
                }
            }
            if !added {
                break;
            }
        }
        fundamental.sort_unstable();
        Ok(fundamental)
    }

    /// Shortest directed path length from node 0.
    pub fn distances_from_action(&self) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.num_nodes()];
        dist[0] = Some(0);
        let mut queue = VecDeque::from([0]);
        while let Some(i) = queue.pop_front() {
            for c in self.children(i) {
                if dist[c].is_none() {
                    dist[c] = Some(dist[i].unwrap() + 1);
                    queue.push_back(c);
                }
            }
        }
        dist
    }

    /// Induced subgraph on `keep`; the node count is unchanged.
    pub fn restrict(&self, keep: VarSet) -> Result<Dag> {
        if !keep.contains(0) || !keep.contains(self.consequence()) {
            return Err(Error::domain("restriction must keep the action and the consequence"));
        }
        if !keep.is_subset(self.all_nodes()) {
            return Err(Error::domain(format!("{keep} references missing nodes")));
        }
        let parents = (0..self.num_nodes())
            .map(|j| if keep.contains(j) { self.parents[j].intersection(keep) } else { VarSet::empty() })
            .collect();
        Ok(Dag { parents })
    }

    /// Same skeleton and same v-colliders.
    pub fn is_equivalent(&self, other: &Dag) -> bool {
        if self.num_nodes() != other.num_nodes() {
            return false;
        }
        let skeleton = |d: &Dag| {
            let mut s: Vec<(usize, usize)> = d.edges().into_iter().map(|(i, j)| (i.min(j), i.max(j))).collect();
            s.sort_unstable();
            s
        };
        skeleton(self) == skeleton(other) && self.v_colliders() == other.v_colliders()
    }

    /// Maximal-clique junction tree of the DAG restricted to its relevant nodes.
    pub fn mcjt(&self) -> Result<JunctionTree> {
        let relevant = self.relevant_nodes()?;
        let restricted = self.restrict(relevant)?;
        let cliques = restricted.maximal_cliques(relevant);
        let target = self.consequence();
        let starts: Vec<usize> = (0..cliques.len()).filter(|&c| cliques[c].contains(0)).collect();
        if starts.len() != 1 {
            return Err(Error::Unsupported(format!("action node lies in {} maximal cliques", starts.len())));
        }
        let mut path = vec![starts[0]];
        let mut used = vec![false; cliques.len()];
        used[starts[0]] = true;
        if assemble_path(&cliques, &mut path, &mut used, target) {
            Ok(JunctionTree { cliques: path.into_iter().map(|c| cliques[c]).collect() })
        } else {
            Err(Error::Unsupported("maximal cliques do not form a junction path".into()))
        }
    }

    /// Bron–Kerbosch with pivoting on the skeleton restricted to `nodes`.
    fn maximal_cliques(&self, nodes: VarSet) -> Vec<VarSet> {
        let adj: Vec<VarSet> = (0..self.num_nodes()).map(|i| self.neighbors(i).intersection(nodes)).collect();
        let mut out = Vec::new();
        bron_kerbosch(&adj, VarSet::empty(), nodes, VarSet::empty(), &mut out);
        out.sort();
        out
    }

    /// Graph-side separator order: consecutive clique intersections of the
    /// junction tree, then `{n+1}`.
    pub fn separator_order(&self) -> Result<SeparatorOrder> {
        let jt = self.mcjt()?;
        let mut sets = jt.intersections();
        sets.push(VarSet::singleton(self.consequence()));
        SeparatorOrder::new(sets, self.n())
    }
}

fn bron_kerbosch(adj: &[VarSet], r: VarSet, mut p: VarSet, mut x: VarSet, out: &mut Vec<VarSet>) {
    if p.is_empty() {
        if x.is_empty() {
            out.push(r);
        }
        return;
    }
    let pivot = p.union(x).iter().max_by_key(|&u| adj[u].intersection(p).len()).unwrap();
    for v in p.difference(adj[pivot]) {
        bron_kerbosch(adj, r.with(v), p.intersection(adj[v]), x.intersection(adj[v]), out);
        p.remove(v);
        x.insert(v);
    }
}

/// Depth-first search for an ordering of all cliques that satisfies the
/// running-intersection property and ends at the clique holding `target`.
fn assemble_path(cliques: &[VarSet], path: &mut Vec<usize>, used: &mut [bool], target: usize) -> bool {
    if path.len() == cliques.len() {
        return cliques[*path.last().unwrap()].contains(target);
    }
    for c in 0..cliques.len() {
        if used[c] {
            continue;
        }
        let last = cliques[*path.last().unwrap()];
        if last.is_disjoint(cliques[c]) {
            continue;
        }
        // Anything shared with an earlier clique must pass through the last one.
        let consistent = path.iter().all(|&e| cliques[e].intersection(cliques[c]).is_subset(last));
        let premature = cliques[c].contains(target) && path.len() + 1 < cliques.len();
        if !consistent || premature {
            continue;
        }
        used[c] = true;
        path.push(c);
        if assemble_path(cliques, path, used, target) {
            return true;
        }
        path.pop();
        used[c] = false;
    }
    false
}

impl fmt::Debug for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dag({}; ", self.num_nodes())?;
        for (k, (i, j)) in self.edges().into_iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{i}->{j}")?;
        }
        f.write_str(")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_cycles_and_self_loops() {
        assert_eq!(Dag::new(3, &[(1, 2), (2, 1)]).unwrap_err().kind(), "acyclicity");
        assert_eq!(Dag::new(3, &[(1, 1)]).unwrap_err().kind(), "acyclicity");
        assert!(Dag::new(3, &[(0, 5)]).is_err());
    }

    #[test]
    fn complete_dag_has_single_map() {
        let d = Dag::complete(5);
        assert_eq!(d.enumerate_maps(), vec![vec![0, 4]]);
        assert!(!d.classify().well_behaved);
        assert_eq!(d.relevant_nodes().unwrap(), VarSet::from([0, 4]));
    }

    #[test]
    fn chain_structure() {
        let d = Dag::new(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert!(d.is_well_behaved());
        assert_eq!(d.fundamental_links().unwrap(), d.edges());
        let jt = d.mcjt().unwrap();
        assert_eq!(jt.cliques, vec![VarSet::from([0, 1]), VarSet::from([1, 2]), VarSet::from([2, 3])]);
        let ord = d.separator_order().unwrap();
        assert_eq!(ord.sets(), &[VarSet::from([1]), VarSet::from([2]), VarSet::from([3])]);
        assert_eq!(ord.revealed_dag(2), d);
    }

    #[test]
    fn trivial_and_collider_classification() {
        let d = Dag::new(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(!d.is_nontrivial());
        let c = Dag::new(4, &[(1, 3), (2, 3), (0, 1)]).unwrap();
        assert_eq!(c.v_colliders(), vec![(1, 2, 3)]);
        assert!(!c.classify().perfect);
        assert_eq!(c.relevant_nodes().unwrap_err().kind(), "unsupported");
    }

    #[test]
    fn revealed_dag_of_singleton_order() {
        let ord = SeparatorOrder::new(vec![VarSet::from([3])], 2).unwrap();
        assert_eq!(ord.revealed_dag(2).edges(), vec![(0, 3)]);
        assert!(SeparatorOrder::new(vec![VarSet::from([1])], 2).is_err());
        assert!(SeparatorOrder::new(vec![VarSet::from([1, 2]), VarSet::from([1]), VarSet::from([3])], 2).is_err());
    }

    #[test]
    fn restrict_requires_endpoints() {
        let d = Dag::complete(4);
        assert!(d.restrict(VarSet::from([0, 1])).is_err());
        assert_eq!(d.restrict(VarSet::from([0, 1, 3])).unwrap().edges(), vec![(0, 1), (0, 3), (1, 3)]);
    }
}
