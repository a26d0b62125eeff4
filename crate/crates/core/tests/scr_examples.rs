use subcause::fixtures::{self, H, P};
use subcause::probspace::{induced_dataset, perturb_menu};
use subcause::scr::{predict_consequence, solve_equilibria};
use subcause::{ChoiceDist, Menu, SolverParams, VarSet};

fn params() -> SolverParams {
    SolverParams::default()
}

#[test]
fn multiplicity_three_equilibria() {
    let (a, b) = fixtures::multiplicity_actions(0.75).unwrap();
    let menu = perturb_menu(&Menu::lenient(vec![a, b]).unwrap(), 1e-5).unwrap();
    let model = fixtures::multiplicity_model(30.0);
    let eq = solve_equilibria(&menu, &model, &params()).unwrap();
    let probs = eq.probs_of(0);
    assert_eq!(probs.len(), 3);
    for (p, target) in probs.iter().zip([0.02, 0.34, 0.99]) {
        assert!((p - target).abs() <= 0.01, "{p} vs {target}");
    }
    assert_eq!(eq.equilibria[1].basin, 0);
}

#[test]
fn regularity_violation() {
    let (s, s3) = fixtures::regularity_menus();
    let s = perturb_menu(&s, 1e-4).unwrap();
    let s3 = perturb_menu(&s3, 1e-4).unwrap();
    let model = fixtures::regularity_model();
    let pair = solve_equilibria(&s, &model, &params()).unwrap();
    assert_eq!(pair.len(), 1);
    let pi_pair = pair.equilibria[0].choice.get(1);
    assert!(pi_pair < 1.0 / 3.0 - 1e-3, "{pi_pair}");
    let triple = solve_equilibria(&s3, &model, &params()).unwrap();
    assert_eq!(triple.len(), 1);
    for &p in triple.equilibria[0].choice.probs() {
        assert!((p - 1.0 / 3.0).abs() <= 1e-6);
    }
}

#[test]
fn regularity_predictions() {
    let (s, s3) = fixtures::regularity_menus();
    let r_p = fixtures::dag("R_P").unwrap();
    for z in [0.6, 0.75, 0.9] {
        let d = induced_dataset(&s, &ChoiceDist::new(vec![z, 1.0 - z]).unwrap()).unwrap();
        let cond = d.conditional(VarSet::singleton(H), &[(P, 1)]).unwrap();
        assert!((cond.probs()[1] - 1.0 / (1.0 + z)).abs() < 1e-12);
        let pred = predict_consequence(&d, &r_p, 1).unwrap();
        assert!((pred[1] - 0.5 / (1.0 + z)).abs() < 1e-12);
        assert!(pred[1] < 1.0 / 3.0);
    }
    for g in [0.1, 0.25, 0.4] {
        let d = induced_dataset(&s3, &ChoiceDist::new(vec![1.0 - 2.0 * g, g, g]).unwrap()).unwrap();
        for c in 0..3 {
            assert!((predict_consequence(&d, &r_p, c).unwrap()[1] - 0.5).abs() < 1e-12);
        }
    }
}
