use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use subcause::fixtures::{self, H, P, T};
use subcause::gen::{random_action, random_joint};
use subcause::probspace::{independent_within, induced_dataset, mixture, perturb_menu};
use subcause::scr::solve_equilibria;
use subcause::{Action, ChoiceDist, Joint, Menu, SolverParams, VarSet, VarSpace};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Marginal by explicit summation over every assignment.
fn brute_marginal(p: &Joint, target: VarSet) -> Vec<f64> {
    let vars = p.vars().to_vec();
    let keep: Vec<usize> = target.iter().map(|v| vars.iter().position(|&u| u == v).unwrap()).collect();
    let dims: Vec<usize> = keep.iter().map(|&k| p.dims()[k]).collect();
    let mut out = vec![0.0; dims.iter().product()];
    p.for_each(|x, pr| {
        let mut idx = 0;
        for (&k, &d) in keep.iter().zip(&dims) {
            idx = idx * d + x[k];
        }
        out[idx] += pr;
    });
    out
}

#[test]
fn marginal_examples() {
    let iota = fixtures::iota();
    assert_eq!(iota.marginal(VarSet::singleton(H)).unwrap().probs(), &[0.5, 0.5]);
    assert_eq!(iota.marginal(VarSet::from([P, T, H])).unwrap(), *iota.joint());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = random_joint(&mut rng, VarSet::from([1, 2, 3]), vec![2, 3, 2]);
    let m = p.marginal(VarSet::singleton(1)).unwrap();
    let rows: Vec<f64> = (0..2).map(|i| p.probs()[i * 6..(i + 1) * 6].iter().sum()).collect();
    for (a, b) in m.probs().iter().zip(rows) {
        assert!(close(*a, b, 1e-15));
    }
}

#[test]
fn dataset_conditionals_from_the_examples() {
    let (s, _) = fixtures::regularity_menus();
    for z in [0.3, 0.5, 0.8] {
        let d = induced_dataset(&s, &ChoiceDist::new(vec![z, 1.0 - z]).unwrap()).unwrap();
        let c = d.conditional(VarSet::singleton(H), &[(P, 1)]).unwrap();
        assert!(close(c.probs()[1], 1.0 / (1.0 + z), 1e-12));
    }
    let d = induced_dataset(&s, &ChoiceDist::uniform(2)).unwrap();
    assert!(close(d.conditional(VarSet::singleton(H), &[(P, 1)]).unwrap().probs()[1], 2.0 / 3.0, 1e-12));

    let q = 0.75;
    let (a, b) = fixtures::multiplicity_actions(q).unwrap();
    let menu = Menu::lenient(vec![a, b]).unwrap();
    for rho in [0.1, 0.34, 0.9] {
        let d = induced_dataset(&menu, &ChoiceDist::new(vec![rho, 1.0 - rho]).unwrap()).unwrap();
        let hi = d.conditional(VarSet::singleton(H), &[(P, 1)]).unwrap().probs()[1];
        let lo = d.conditional(VarSet::singleton(H), &[(P, 0)]).unwrap().probs()[1];
        assert!(close(hi, (2.0 - 2.0 * rho) / (2.0 - rho), 1e-12));
        assert!(close(lo, q, 1e-12));
    }
}

#[test]
fn degenerate_choice_dataset_is_the_action() {
    let (s, _) = fixtures::regularity_menus();
    let d = induced_dataset(&s, &ChoiceDist::new(vec![1.0, 0.0]).unwrap()).unwrap();
    let slice = d.conditional(VarSet::from([P, T, H]), &[(0, 0)]).unwrap();
    assert_eq!(slice, *fixtures::iota().joint());
    assert_eq!(d.marginal(VarSet::singleton(0)).unwrap().probs(), &[1.0, 0.0]);
}

#[test]
fn mixture_examples() {
    let (iota, pi) = (fixtures::iota(), fixtures::pi());
    assert_eq!(mixture(1.0, &iota, &pi).unwrap(), iota);
    assert_eq!(mixture(0.0, &iota, &pi).unwrap(), pi);
    let half = mixture(0.5, &iota, &pi).unwrap();
    assert_eq!(half.marginal(VarSet::singleton(H)).unwrap().probs(), &[0.5, 0.5]);
}

#[test]
fn independence_examples() {
    let space = VarSpace::binary(2);
    let product = |p1: f64, p2: f64, p3: f64| {
        let j = Joint::from_fn(space.outcome_vars(), space.outcome_dims(), |x| {
            [p1, p2, p3].iter().zip(x).map(|(p, &xi)| if xi == 1 { *p } else { 1.0 - p }).product()
        })
        .unwrap();
        Action::from_joint(&space, j).unwrap()
    };
    let menu = Menu::strict(vec![product(0.3, 0.6, 0.2), product(0.3, 0.1, 0.9)]).unwrap();
    assert!(independent_within(&menu, VarSet::from([1]), VarSet::from([2])).unwrap());
    let (s, _) = fixtures::regularity_menus();
    assert!(!independent_within(&s, VarSet::from([P]), VarSet::from([H])).unwrap());
}

#[test]
fn perturbation_examples() {
    let (s, s3) = fixtures::regularity_menus();
    assert!(!s.in_strict_domain() && !s3.in_strict_domain());
    let (ps, ps3) = (perturb_menu(&s, 1e-4).unwrap(), perturb_menu(&s3, 1e-4).unwrap());
    assert!(ps.in_strict_domain() && ps3.in_strict_domain());
    let again = perturb_menu(&ps, 1e-3).unwrap();
    assert!(again.is_strict());

    let model = fixtures::regularity_model();
    let params = SolverParams::default();
    let pi: Vec<f64> = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
        .iter()
        .map(|&eps| solve_equilibria(&perturb_menu(&s, eps).unwrap(), &model, &params).unwrap().equilibria[0].choice.get(1))
        .collect();
    // tail of the sweep from 1e-4 on
    assert!(pi[3..].iter().all(|p| (p - pi[2]).abs() < 1e-3), "{pi:?}");
    assert!(pi.windows(3).all(|w| (w[1] - w[2]).abs() < (w[0] - w[1]).abs()), "{pi:?}");
}

#[test]
fn mass_error_names_the_table() {
    let err = Joint::new(VarSet::from([1]), vec![2], vec![0.5, 0.499]).unwrap_err();
    assert_eq!(err.kind(), "mass");
    let space = VarSpace::binary(1);
    assert!(Action::new(&space, vec![0.25, 0.25, 0.25, 0.24]).is_err());
}

/// Independence by expanding `a(x_I, x_J) = a(x_I) a(x_J)` and equality of
/// `I` marginals across actions.
fn brute_independent(menu: &Menu, i: VarSet, j: VarSet) -> bool {
    let first = brute_marginal(menu.action(0).joint(), i);
    menu.actions().iter().all(|a| {
        let (mi, mj, mij) = (brute_marginal(a.joint(), i), brute_marginal(a.joint(), j), brute_marginal(a.joint(), i.union(j)));
        let same = mi.iter().zip(&first).all(|(x, y)| close(*x, *y, 1e-12));
        let vars = i.union(j).to_vec();
        let dj: usize = j.iter().map(|v| a.joint().dims()[v - 1]).product();
        let mut ok = true;
        for (idx, &p) in mij.iter().enumerate() {
            // split the joint index into its I and J parts
            let mut rest = idx;
            let mut xs = vec![0; vars.len()];
            for k in (0..vars.len()).rev() {
                let d = a.joint().dims()[vars[k] - 1];
                xs[k] = rest % d;
                rest /= d;
            }
            let (mut ii, mut jj) = (0, 0);
            for (k, &v) in vars.iter().enumerate() {
                let d = a.joint().dims()[v - 1];
                if i.contains(v) {
                    ii = ii * d + xs[k];
                } else {
                    jj = jj * d + xs[k];
                }
            }
            debug_assert!(jj < dj);
            ok &= close(p, mi[ii] * mj[jj], 1e-12);
        }
        same && ok
    })
}

fn independent_menu(rng: &mut ChaCha8Rng, space: &VarSpace, share_i: bool, share_j: bool) -> Menu {
    let i = VarSet::singleton(1);
    let rest = space.outcome_vars().without(1);
    let rest_dims: Vec<usize> = rest.iter().map(|v| space.dim(v)).collect();
    let (base_i, base_j) = (random_joint(rng, i, vec![space.dim(1)]), random_joint(rng, rest, rest_dims.clone()));
    let actions = (0..2)
        .map(|k| {
            let mi = if share_i || k == 0 { base_i.clone() } else { random_joint(rng, i, vec![space.dim(1)]) };
            let mr = if share_j || k == 0 { base_j.clone() } else { random_joint(rng, rest, rest_dims.clone()) };
            let j = Joint::from_fn(space.outcome_vars(), space.outcome_dims(), |x| mi.prob(&x[..1]) * mr.prob(&x[1..])).unwrap();
            Action::from_joint(space, j).unwrap()
        })
        .collect();
    Menu::strict(actions).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn marginal_composition(seed in any::<u64>(), mask in 1u64..16, sub in 1u64..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_joint(&mut rng, VarSet::from([1, 2, 3, 4]), vec![2, 3, 2, 2]);
        let j = VarSet::from_bits(mask << 1);
        let k = VarSet::from_bits((mask & sub) << 1);
        prop_assume!(!k.is_empty());
        let direct = p.marginal(k).unwrap();
        let nested = p.marginal(j).unwrap().marginal(k).unwrap();
        prop_assert!(direct.max_abs_diff(&nested) <= 1e-12);
        let brute = brute_marginal(&p, k);
        prop_assert!(direct.probs().iter().zip(&brute).all(|(a, b)| close(*a, *b, 1e-12)));
    }

    #[test]
    fn conditionals_sum_to_one(seed in any::<u64>(), v in 1usize..=3, x in 0usize..2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_joint(&mut rng, VarSet::from([1, 2, 3]), vec![2, 2, 3]);
        let target = VarSet::from([1, 2, 3]).without(v);
        let c = p.conditional(target, &[(v, x)]).unwrap();
        prop_assert!(close(c.mass(), 1.0, 1e-12));
    }

    #[test]
    fn dataset_slices_recover_actions(seed in any::<u64>(), k in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = VarSpace::binary(2);
        let actions: Vec<Action> = (0..k).map(|_| random_action(&mut rng, &space)).collect();
        let menu = Menu::strict(actions).unwrap();
        let raw: Vec<f64> = (0..k).map(|i| 1.0 + i as f64).collect();
        let total: f64 = raw.iter().sum();
        let sigma = ChoiceDist::new(raw.iter().map(|w| w / total).collect()).unwrap();
        let d = induced_dataset(&menu, &sigma).unwrap();
        prop_assert!(close(d.mass(), 1.0, 1e-12));
        for c in 0..k {
            let slice = d.conditional(space.outcome_vars(), &[(0, c)]).unwrap();
            prop_assert!(slice.max_abs_diff(menu.action(c).joint()) <= 1e-12);
        }
    }

    #[test]
    fn independence_matches_expansion(seed in any::<u64>(), share in any::<bool>(), noisy in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = VarSpace::binary(2);
        let menu = if noisy {
            Menu::strict(vec![random_action(&mut rng, &space), random_action(&mut rng, &space)]).unwrap()
        } else {
            independent_menu(&mut rng, &space, share, false)
        };
        let (i, j) = (VarSet::from([1]), VarSet::from([2, 3]));
        let fast = independent_within(&menu, i, j).unwrap();
        prop_assert_eq!(fast, brute_independent(&menu, i, j));
        if !noisy {
            prop_assert_eq!(fast, share);
        }
    }

    #[test]
    fn independence_is_symmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = VarSpace::binary(2);
        let menu = independent_menu(&mut rng, &space, true, false);
        let (i, j) = (VarSet::from([1]), VarSet::from([2, 3]));
        prop_assert!(independent_within(&menu, i, j).unwrap());
        // the shared-marginal clause only constrains the first argument
        prop_assert!(!independent_within(&menu, j, i).unwrap());
        let noisy = Menu::strict(vec![random_action(&mut rng, &space), random_action(&mut rng, &space)]).unwrap();
        prop_assert_eq!(independent_within(&noisy, i, j).unwrap(), independent_within(&noisy, j, i).unwrap());
    }
}
