//! Random instances for tests and batteries.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dag::Dag;
use crate::probspace::{Action, Joint, Menu, VarSpace};
use crate::scr::Utility;
use crate::varset::VarSet;

/// A random DAG on `n + 2` nodes with node 0 first and the consequence last
/// in a random topological order. Nodes `d` places apart are linked with
/// probability `density * 2^(1-d)`, which favors long chains.
pub fn random_dag<R: Rng>(rng: &mut R, n: usize, density: f64) -> Dag {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    order.insert(0, 0);
    order.push(n + 1);
    let mut edges = Vec::new();
    for (a, &i) in order.iter().enumerate() {
        for &j in &order[a + 1..] {
            let d = order.iter().position(|&v| v == j).unwrap() - a;
            if rng.gen_bool(density * 0.5f64.powi(d as i32 - 1)) {
                edges.push((i, j));
            }
        }
    }
    Dag::new(n + 2, &edges).unwrap()
}

/// Random DAG whose every v-collider has been closed by linking the two
/// parents, keeping the original topological order.
pub fn random_perfect_dag<R: Rng>(rng: &mut R, n: usize, density: f64) -> Dag {
    let dag = random_dag(rng, n, density);
    moralize(&dag)
}

/// Add an edge between the parents of every v-collider until none remain.
pub fn moralize(dag: &Dag) -> Dag {
    let rank: Vec<usize> = {
        let order = dag.topological_order();
        let mut rank = vec![0; order.len()];
        for (r, &v) in order.iter().enumerate() {
            rank[v] = r;
        }
        rank
    };
    let mut current = dag.clone();
    loop {
        let colliders = current.v_colliders();
        if colliders.is_empty() {
            return current;
        }
        let mut edges = current.edges();
        for (i, j, _) in colliders {
            let e = if rank[i] < rank[j] { (i, j) } else { (j, i) };
            if !edges.contains(&e) {
                edges.push(e);
            }
        }
        current = Dag::new(dag.num_nodes(), &edges).unwrap();
    }
}

/// A random well-behaved DAG: perfect, nontrivial, uninformed, and
/// restricted to its relevant nodes. Nodes outside the relevant set remain
/// as isolated nodes.
pub fn random_well_behaved_dag<R: Rng>(rng: &mut R, n: usize, density: f64) -> Dag {
    loop {
        let dag = random_perfect_dag(rng, n, density);
        if !dag.is_nontrivial() {
            continue;
        }
        let relevant = dag.relevant_nodes().unwrap();
        let restricted = dag.restrict(relevant).unwrap();
        debug_assert!(restricted.is_well_behaved());
        return restricted;
    }
}

/// Strictly increasing utility with consecutive gaps in `[0.5, 2)`.
pub fn random_utility<R: Rng>(rng: &mut R, k: usize) -> Utility {
    let mut v = rng.gen_range(-1.0..1.0);
    let mut values = Vec::with_capacity(k);
    for _ in 0..k {
        values.push(v);
        v += rng.gen_range(0.5..2.0);
    }
    Utility::new(values).unwrap()
}

/// Full-support table with entries proportional to draws from `[0.05, 1)`.
pub fn random_joint<R: Rng>(rng: &mut R, vars: VarSet, dims: Vec<usize>) -> Joint {
    let size: usize = dims.iter().product();
    let raw: Vec<f64> = (0..size).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    Joint::new(vars, dims, raw.into_iter().map(|p| p / total).collect()).unwrap()
}

pub fn random_action<R: Rng>(rng: &mut R, space: &VarSpace) -> Action {
    let j = random_joint(rng, space.outcome_vars(), space.outcome_dims());
    Action::from_joint(space, j).unwrap()
}

/// Menu of `k` full-support actions.
pub fn random_menu<R: Rng>(rng: &mut R, space: &VarSpace, k: usize) -> Menu {
    Menu::strict((0..k).map(|_| random_action(rng, space)).collect()).unwrap()
}
