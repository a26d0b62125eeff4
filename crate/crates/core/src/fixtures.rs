//! The plaque/tangles/health running example.
//!
//! Variables: `P = 1` (plaque), `T = 2` (tangles), `H = 3` (health), all
//! binary. Node 0 is the treatment.

use crate::dag::Dag;
use crate::error::Result;
use crate::probspace::{Action, Menu, VarSpace};
use crate::scr::{ScrModel, Utility};

pub const P: usize = 1;
pub const T: usize = 2;
pub const H: usize = 3;

pub fn space() -> VarSpace {
    let bin = || vec![0.0, 1.0];
    VarSpace::new(vec![("P".into(), bin()), ("T".into(), bin())], ("H".into(), bin())).unwrap()
}

pub const DAG_NAMES: [&str; 6] = ["R_P", "R_T", "R_Both", "R_PT", "R_TP", "R_Rat"];

pub fn dag(name: &str) -> Option<Dag> {
    let edges: &[(usize, usize)] = match name {
        "R_P" => &[(0, P), (P, H)],
        "R_T" => &[(0, T), (T, H), (T, P)],
        "R_Both" => &[(0, P), (0, T), (T, P), (P, H), (T, H)],
        "R_PT" => &[(0, P), (P, T), (T, H)],
        "R_TP" => &[(0, T), (T, P), (P, H)],
        "R_Rat" => &[(0, P), (0, T), (0, H), (T, H), (P, T), (P, H)],
        _ => return None,
    };
    Some(Dag::new(4, edges).unwrap())
}

pub fn dags() -> Vec<(&'static str, Dag)> {
    DAG_NAMES.iter().map(|&n| (n, dag(n).unwrap())).collect()
}

/// Lottery over `(P, H)` with tangles independent and uniform.
fn with_uniform_tangles(points: &[([usize; 2], f64)]) -> Action {
    let pts: Vec<(Vec<usize>, f64)> =
        points.iter().flat_map(|([p, h], w)| (0..2).map(move |t| (vec![*p, t, *h], w / 2.0))).collect();
    Action::from_points(&space(), &pts).unwrap()
}

/// Always causes plaque; health is a coin flip.
pub fn iota() -> Action {
    with_uniform_tangles(&[([1, 1], 0.5), ([1, 0], 0.5)])
}

/// Plaque and health perfectly positively correlated.
pub fn pi() -> Action {
    with_uniform_tangles(&[([0, 0], 0.5), ([1, 1], 0.5)])
}

/// Plaque and health perfectly negatively correlated.
pub fn nu() -> Action {
    with_uniform_tangles(&[([1, 0], 0.5), ([0, 1], 0.5)])
}

pub fn utility(gap: f64) -> Utility {
    Utility::new(vec![0.0, gap]).unwrap()
}

/// `R_P` with `u = (0, 6)`.
pub fn regularity_model() -> ScrModel {
    ScrModel::new(space(), dag("R_P").unwrap(), utility(6.0)).unwrap()
}

/// `{iota, pi}` and `{iota, nu, pi}`, not yet perturbed into the strict domain.
pub fn regularity_menus() -> (Menu, Menu) {
    (Menu::lenient(vec![iota(), pi()]).unwrap(), Menu::lenient(vec![iota(), nu(), pi()]).unwrap())
}

/// Self-confirming pair: `b` yields plaque, tangles and health for sure;
/// `a` avoids plaque and tangles half the time, with health probability `q`
/// in that case, and otherwise yields plaque and tangles with bad health.
pub fn multiplicity_actions(q: f64) -> Result<(Action, Action)> {
    let s = space();
    let a = Action::from_points(&s, &[(vec![0, 0, 1], q / 2.0), (vec![0, 0, 0], (1.0 - q) / 2.0), (vec![1, 1, 0], 0.5)])?;
    let b = Action::from_points(&s, &[(vec![1, 1, 1], 1.0)])?;
    Ok((a, b))
}

/// `R_P` with `u = (0, lambda)`.
pub fn multiplicity_model(lambda: f64) -> ScrModel {
    ScrModel::new(space(), dag("R_P").unwrap(), utility(lambda)).unwrap()
}
