use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use subcause::fixtures::{self, H, P, T};
use subcause::gen::{random_dag, random_joint, random_well_behaved_dag};
use subcause::scr::factorize;
use subcause::{Dag, SeparatorOrder, VarSet};

fn dag(edges: &[(usize, usize)], nodes: usize) -> Dag {
    Dag::new(nodes, edges).unwrap()
}

fn order(sets: &[&[usize]], n: usize) -> SeparatorOrder {
    SeparatorOrder::new(sets.iter().map(|s| s.iter().copied().collect()).collect(), n).unwrap()
}

/// Every acyclic orientation of the skeleton that is Markov equivalent to
/// `d` and has no edge into node 0.
fn equivalent_uninformed(d: &Dag) -> Vec<Dag> {
    let edges = d.edges();
    let mut out = Vec::new();
    for mask in 0u32..(1 << edges.len()) {
        let oriented: Vec<(usize, usize)> =
            edges.iter().enumerate().map(|(k, &(i, j))| if mask >> k & 1 == 1 { (j, i) } else { (i, j) }).collect();
        if oriented.iter().any(|&(_, j)| j == 0) {
            continue;
        }
        if let Ok(alt) = Dag::new(d.num_nodes(), &oriented) {
            if alt.is_equivalent(d) {
                out.push(alt);
            }
        }
    }
    out
}

fn brute_force_fundamental(d: &Dag) -> Vec<(usize, usize)> {
    let all = equivalent_uninformed(d);
    d.edges().into_iter().filter(|&(i, j)| all.iter().all(|alt| alt.has_edge(i, j))).collect()
}

#[test]
fn classification_examples() {
    let rat = fixtures::dag("R_Rat").unwrap().classify();
    assert!(rat.perfect && rat.uninformed && rat.nontrivial);
    // the shortcut 0 -> H leaves P and T off every MAP
    assert!(!rat.well_behaved);
    let cut = dag(&[(0, 1), (2, 3)], 4);
    assert!(!cut.is_nontrivial());
    let collider = dag(&[(0, 1), (1, 3), (2, 3)], 4);
    assert_eq!(collider.v_colliders(), vec![(1, 2, 3)]);
    assert!(!collider.is_perfect());
}

#[test]
fn map_examples() {
    assert_eq!(fixtures::dag("R_Both").unwrap().enumerate_maps(), vec![vec![0, P, H], vec![0, T, H]]);
    assert_eq!(fixtures::dag("R_P").unwrap().enumerate_maps(), vec![vec![0, P, H]]);
    assert_eq!(Dag::complete(5).enumerate_maps(), vec![vec![0, 4]]);
    assert_eq!(fixtures::dag("R_Rat").unwrap().enumerate_maps(), vec![vec![0, H]]);
}

#[test]
fn fundamental_link_examples() {
    let r_p = fixtures::dag("R_P").unwrap();
    assert_eq!(r_p.fundamental_links().unwrap(), vec![(0, P), (P, H)]);
    let both = fixtures::dag("R_Both").unwrap();
    assert_eq!(both.fundamental_links().unwrap(), vec![(0, P), (0, T), (P, H), (T, H)]);
    let chain = dag(&[(0, 1), (1, 2)], 3);
    assert_eq!(chain.fundamental_links().unwrap(), vec![(0, 1), (1, 2)]);
    for d in [r_p, both, chain] {
        assert_eq!(d.fundamental_links().unwrap(), brute_force_fundamental(&d));
    }
}

#[test]
fn fundamental_links_match_orientation_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..100 {
        let d = random_well_behaved_dag(&mut rng, 1 + trial % 4, 0.8);
        assert_eq!(d.fundamental_links().unwrap(), brute_force_fundamental(&d), "{d:?}");
    }
}

#[test]
fn relevant_node_examples() {
    assert_eq!(fixtures::dag("R_P").unwrap().relevant_nodes().unwrap(), VarSet::from([0, P, H]));
    assert_eq!(fixtures::dag("R_Rat").unwrap().relevant_nodes().unwrap(), VarSet::from([0, H]));
    assert_eq!(fixtures::dag("R_Both").unwrap().relevant_nodes().unwrap(), VarSet::from([0, P, T, H]));
    let isolated = dag(&[(0, 1), (1, 3)], 4);
    assert_eq!(isolated.relevant_nodes().unwrap(), VarSet::from([0, 1, 3]));
    assert_eq!(dag(&[(0, 1), (2, 3)], 4).relevant_nodes().unwrap_err().kind(), "unsupported");
}

#[test]
fn junction_tree_examples() {
    let jt = fixtures::dag("R_P").unwrap().mcjt().unwrap();
    assert_eq!(jt.cliques, vec![VarSet::from([0, P]), VarSet::from([P, H])]);
    assert_eq!(jt.intersections(), vec![VarSet::from([P])]);
    let jt = fixtures::dag("R_Both").unwrap().mcjt().unwrap();
    assert_eq!(jt.cliques, vec![VarSet::from([0, P, T]), VarSet::from([P, T, H])]);
    let chain = dag(&[(0, 1), (1, 2), (2, 3)], 4);
    assert_eq!(chain.mcjt().unwrap().cliques, vec![VarSet::from([0, 1]), VarSet::from([1, 2]), VarSet::from([2, 3])]);
}

#[test]
fn separator_order_examples() {
    let expect = [
        ("R_P", order(&[&[P], &[H]], 2)),
        ("R_T", order(&[&[T], &[H]], 2)),
        ("R_Both", order(&[&[P, T], &[H]], 2)),
        ("R_Rat", order(&[&[H]], 2)),
        ("R_PT", order(&[&[P], &[T], &[H]], 2)),
        ("R_TP", order(&[&[T], &[P], &[H]], 2)),
    ];
    for (name, want) in expect {
        assert_eq!(fixtures::dag(name).unwrap().separator_order().unwrap(), want, "{name}");
    }
    let chain = dag(&[(0, 3), (3, 1), (1, 2), (2, 4)], 5);
    assert_eq!(chain.separator_order().unwrap(), order(&[&[3], &[1], &[2], &[4]], 3));
}

#[test]
fn equivalence_examples() {
    let both = fixtures::dag("R_Both").unwrap();
    let reversed = dag(&[(0, P), (0, T), (P, T), (P, H), (T, H)], 4);
    assert!(both.is_equivalent(&reversed));
    assert!(!fixtures::dag("R_PT").unwrap().is_equivalent(&fixtures::dag("R_TP").unwrap()));
    for (_, d) in fixtures::dags() {
        assert!(d.is_equivalent(&d));
    }
    // the P-T link of R_Both is the only one whose reversal stays equivalent
    assert_eq!(equivalent_uninformed(&both).len(), 2);
}

#[test]
fn revealed_dag_examples() {
    let r_p = order(&[&[P], &[H]], 2).revealed_dag(2);
    assert_eq!(r_p, fixtures::dag("R_P").unwrap().restrict(VarSet::from([0, P, H])).unwrap());
    assert_eq!(order(&[&[H]], 2).revealed_dag(2).edges(), vec![(0, H)]);
    let both = order(&[&[P, T], &[H]], 2);
    let revealed = both.revealed_dag(2);
    assert!(revealed.has_edge(P, T));
    assert!(revealed.is_equivalent(&fixtures::dag("R_Both").unwrap()));
    assert_eq!(both.revealed_causes(), vec![(0, P), (0, T), (P, H), (T, H)]);
    assert_eq!(order(&[&[P], &[H]], 2).revealed_causes(), vec![(0, P), (P, H)]);
}

#[test]
fn restrict_examples() {
    let both = fixtures::dag("R_Both").unwrap();
    assert_eq!(both.restrict(VarSet::from([0, P, T, H])).unwrap(), both);
    let rat = fixtures::dag("R_Rat").unwrap().restrict(VarSet::from([0, P, H])).unwrap();
    assert_eq!(rat.edges(), vec![(0, P), (0, H), (P, H)]);
    let r_p = fixtures::dag("R_P").unwrap().restrict(VarSet::from([0, P, H])).unwrap();
    assert!(r_p.neighbors(T).is_empty());
}

#[test]
fn structural_invariants_on_random_dags() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for trial in 0..100 {
        let d = random_well_behaved_dag(&mut rng, 1 + trial % 5, 0.8);
        let y = d.consequence();
        let jt = d.mcjt().unwrap();
        let c = &jt.cliques;
        let m = c.len();
        for i in 0..m {
            for j in i + 1..m {
                let shared = c[i].intersection(c[j]);
                assert!((i..=j).all(|k| shared.is_subset(c[k])), "{d:?}");
            }
        }
        assert!(c[0].contains(0) && c[1..].iter().all(|k| !k.contains(0)));
        assert!(c[m - 1].contains(y) && c[..m - 1].iter().all(|k| !k.contains(y)));
        let ord = d.separator_order().unwrap();
        for i in 0..m {
            assert_eq!(c[i], ord.get(i).union(ord.get(i + 1)), "{d:?}");
        }
        let maps = d.enumerate_maps();
        let fundamental = d.fundamental_links().unwrap();
        for path in &maps {
            for w in path.windows(2) {
                assert!(fundamental.contains(&(w[0], w[1])), "{d:?}");
            }
            for a in ord.sets() {
                assert!(path.iter().any(|v| a.contains(*v)), "{d:?}");
            }
        }
        assert_eq!(ord.revealed_dag(d.n()).enumerate_maps(), maps);
        assert_eq!(ord.revealed_causes(), fundamental, "{d:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn equivalence_matches_factorization(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_dag(&mut rng, n, 0.8), random_dag(&mut rng, n, 0.8));
        let nodes = a.all_nodes();
        let mut equal = true;
        for _ in 0..20 {
            let p = random_joint(&mut rng, nodes, vec![2; nodes.len()]);
            equal &= factorize(&p, &a).unwrap().max_abs_diff(&factorize(&p, &b).unwrap()) <= 1e-12;
        }
        prop_assert_eq!(a.is_equivalent(&b), equal);
    }

    #[test]
    fn topological_order_respects_edges(seed in any::<u64>(), n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_dag(&mut rng, n, 0.6);
        let order = d.topological_order();
        let rank = |v: usize| order.iter().position(|&u| u == v).unwrap();
        for (i, j) in d.edges() {
            prop_assert!(rank(i) < rank(j));
        }
    }
}
