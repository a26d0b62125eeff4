//! Worked examples of the running example, checked against fixed tolerances.

use clap::ValueEnum;
use serde_json::json;
use subcause::fixtures::{self, H, P, T};
use subcause::probspace::perturb_menu;
use subcause::reveal::{minimal_separators, order_separators};
use subcause::scr::solve_equilibria;
use subcause::{Menu, Result, ScrModel, ScrOracle, SeparatorOrder, SolverParams, VarSet};
use subcause_cli::report::{sig, sig_all, Report};

use crate::Outcome;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Case {
    /// Adding an option raises the choice probability of another.
    Regularity,
    /// Three equilibria of the self-confirming plaque menu.
    Multiplicity,
    /// Minimal separators and their order for the six running-example DAGs.
    Separators,
}

pub fn run(case: Case, solver: &SolverParams, report: &mut Report) -> Result<Outcome> {
    let (name, pass) = match case {
        Case::Regularity => ("regularity", regularity(solver, report)?),
        Case::Multiplicity => ("multiplicity", multiplicity(solver, report)?),
        Case::Separators => ("separators", separators(report)?),
    };
    let verdict = if pass { "PASS" } else { "FAIL" };
    report.emit("repro", json!({ "case": name, "verdict": verdict }));
    eprintln!("{verdict} {name}");
    Ok(if pass { Outcome::Pass } else { Outcome::CheckFailed })
}

fn regularity(solver: &SolverParams, report: &mut Report) -> Result<bool> {
    let (s, s3) = fixtures::regularity_menus();
    let model = fixtures::regularity_model();
    let pair = solve_equilibria(&perturb_menu(&s, 1e-4)?, &model, solver)?;
    let triple = solve_equilibria(&perturb_menu(&s3, 1e-4)?, &model, solver)?;
    for (menu, set, names) in [("S", &pair, vec!["iota", "pi"]), ("S3", &triple, vec!["iota", "nu", "pi"])] {
        for e in set.iter() {
            report.emit("equilibrium", json!({ "menu": menu, "actions": names, "choice": sig_all(e.choice.probs()) }));
        }
    }
    let pi_pair = pair.equilibria.first().map(|e| e.choice.get(1)).unwrap_or(f64::NAN);
    let third = 1.0 / 3.0;
    let pass = pair.len() == 1
        && pi_pair < third - 1e-3
        && triple.len() == 1
        && triple.equilibria[0].choice.probs().iter().all(|p| (p - third).abs() <= 1e-6);
    eprintln!("rho(pi, S) = {pi_pair:.6} < 1/3; rho(., S3) = {:?}", triple.probs_of(2));
    report.emit("check", json!({ "rho_pi_pair": sig(pi_pair), "bound": sig(third - 1e-3) }));
    Ok(pass)
}

fn multiplicity(solver: &SolverParams, report: &mut Report) -> Result<bool> {
    let (a, b) = fixtures::multiplicity_actions(0.75)?;
    let menu = perturb_menu(&Menu::lenient(vec![a, b])?, 1e-5)?;
    let set = solve_equilibria(&menu, &fixtures::multiplicity_model(30.0), solver)?;
    let probs = set.probs_of(0);
    for e in set.iter() {
        report.emit("equilibrium", json!({ "menu": "S", "actions": ["a", "b"], "choice": sig_all(e.choice.probs()), "residual": sig(e.residual) }));
    }
    let targets = [0.02, 0.34, 0.99];
    eprintln!("rho(a, S) = {}", probs.iter().map(|p| format!("{p:.4}")).collect::<Vec<_>>().join(", "));
    Ok(probs.len() == 3 && probs.iter().zip(targets).all(|(p, t)| (p - t).abs() <= 0.01))
}

fn separators(report: &mut Report) -> Result<bool> {
    let space = fixtures::space();
    let sets = |raw: &[&[usize]]| -> Vec<VarSet> { raw.iter().map(|s| s.iter().copied().collect()).collect() };
    let expected: [(&str, Vec<VarSet>); 6] = [
        ("R_P", sets(&[&[P], &[H]])),
        ("R_T", sets(&[&[T], &[H]])),
        ("R_Both", sets(&[&[H], &[P, T]])),
        ("R_PT", sets(&[&[P], &[T], &[H]])),
        ("R_TP", sets(&[&[P], &[T], &[H]])),
        ("R_Rat", sets(&[&[H]])),
    ];
    let mut pass = true;
    let mut orders = Vec::new();
    for (name, want) in expected {
        let dag = fixtures::dag(name).unwrap();
        let oracle = ScrOracle::new(ScrModel::new(space.clone(), dag, fixtures::utility(4.0))?);
        let got = minimal_separators(&oracle)?;
        let order = order_separators(&oracle, &got)?;
        let ok = got == want;
        pass &= ok;
        let show = |s: &[VarSet]| s.iter().map(|x| space.fmt_set(*x)).collect::<Vec<_>>();
        report.emit("separators", json!({ "dag": name, "separators": show(&got), "order": show(order.sets()), "expected": show(&want), "match": ok }));
        eprintln!("{name:<7} {}", show(order.sets()).join(" "));
        orders.push((name, order));
    }
    let find = |n: &str| orders.iter().find(|(m, _)| *m == n).map(|(_, o)| o.clone()).unwrap();
    let pt = SeparatorOrder::new(sets(&[&[P], &[T], &[H]]), 2)?;
    let tp = SeparatorOrder::new(sets(&[&[T], &[P], &[H]]), 2)?;
    Ok(pass && find("R_PT") == pt && find("R_TP") == tp)
}
