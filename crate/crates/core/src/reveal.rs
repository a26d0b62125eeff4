//! Recovering the subjective causal structure from choices alone.

use std::sync::Mutex;

use itertools::Itertools;

use crate::dag::{Dag, SeparatorOrder};
use crate::error::{Error, Result};
use crate::probspace::{independent_within, Action, ChoiceDist, Menu, VarSpace};
use crate::scr::{canonical_equilibrium, solve_equilibria, ScrModel, SolverParams};
use crate::varset::VarSet;

/// A random choice rule: a deterministic map from menus to choice
/// distributions.
pub trait ChoiceOracle: Sync {
    fn space(&self) -> &VarSpace;

    fn choose(&self, menu: &Menu) -> Result<ChoiceDist>;

    /// Every choice distribution the oracle could consistently have produced
    /// on `menu`, when that is known (e.g. all equilibria of a simulator).
    fn alternatives(&self, _menu: &Menu) -> Option<Result<Vec<ChoiceDist>>> {
        None
    }
}

/// Choices simulated from an SCR model, selecting the equilibrium reached by
/// damped iteration from uniform choice.
#[derive(Clone, Debug)]
pub struct ScrOracle {
    pub model: ScrModel,
    pub params: SolverParams,
    /// Report all equilibria through `alternatives` so callers can confirm
    /// their verdicts do not depend on the selection.
    pub check_selection: bool,
}

impl ScrOracle {
    pub fn new(model: ScrModel) -> Self {
        ScrOracle { model, params: SolverParams::default(), check_selection: false }
    }

    pub fn with_selection_check(mut self) -> Self {
        self.check_selection = true;
        self
    }
}

impl ChoiceOracle for ScrOracle {
    fn space(&self) -> &VarSpace {
        &self.model.space
    }

    fn choose(&self, menu: &Menu) -> Result<ChoiceDist> {
        Ok(canonical_equilibrium(menu, &self.model, &self.params)?.choice)
    }

    fn alternatives(&self, menu: &Menu) -> Option<Result<Vec<ChoiceDist>>> {
        self.check_selection
            .then(|| solve_equilibria(menu, &self.model, &self.params).map(|s| s.equilibria.into_iter().map(|e| e.choice).collect()))
    }
}

/// Externally observed choices keyed by menu.
#[derive(Clone, Debug)]
pub struct RecordedOracle {
    pub space: VarSpace,
    pub records: Vec<(Menu, ChoiceDist)>,
    pub tol: f64,
}

impl RecordedOracle {
    pub fn new(space: VarSpace, records: Vec<(Menu, ChoiceDist)>) -> Self {
        RecordedOracle { space, records, tol: 1e-9 }
    }
}

impl ChoiceOracle for RecordedOracle {
    fn space(&self) -> &VarSpace {
        &self.space
    }

    fn choose(&self, menu: &Menu) -> Result<ChoiceDist> {
        for (recorded, choice) in &self.records {
            if let Some(perm) = recorded.matching(menu, self.tol) {
                return ChoiceDist::new(perm.iter().map(|&k| choice.get(k)).collect());
            }
        }
        Err(Error::MissingData(describe_menu(&self.space, menu)))
    }
}

/// Human-readable listing of a menu's nonzero entries.
pub fn describe_menu(space: &VarSpace, menu: &Menu) -> String {
    let vars: Vec<usize> = space.outcome_vars().to_vec();
    let mut out = Vec::new();
    for (i, a) in menu.actions().iter().enumerate() {
        let mut entries = Vec::new();
        a.joint().for_each(|x, p| {
            if p > 0.0 {
                let at: Vec<String> = vars.iter().zip(x).map(|(&v, &xi)| format!("{}={}", space.name(v), space.support(v)[xi])).collect();
                entries.push(format!("{}:{p:.12e}", at.join(",")));
            }
        });
        out.push(format!("action {i} [{}]", entries.join("; ")));
    }
    out.join(" | ")
}

#[derive(Clone, Debug, PartialEq)]
pub enum DiagnosticKind {
    /// Tests whether the set separates.
    Separation { set: VarSet },
    /// Tests whether `candidate` immediately precedes `next` in the order.
    Ordering { candidate: VarSet, next: VarSet },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticMenu {
    pub kind: DiagnosticKind,
    /// `menu.action(0)` is the action that leads to high realizations.
    pub menu: Menu,
    /// Perturbation mass (separation menus) or copy noise (ordering menus).
    pub eps: f64,
    /// Support indices of the high and low consequence.
    pub y_high: usize,
    pub y_low: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RevealParams {
    /// Separation-menu perturbation; `None` picks `min(1e-3, 1 - 2^(-1/(n+1)))`.
    pub eps: Option<f64>,
    /// Copy noise in ordering menus.
    pub noise: f64,
    /// Indifference tolerance on `|rho - 1/2|`.
    pub tol: f64,
    /// Largest number of covariates for subset enumeration.
    pub max_n: usize,
}

impl Default for RevealParams {
    fn default() -> Self {
        RevealParams { eps: None, noise: 0.05, tol: 1e-6, max_n: 16 }
    }
}

impl RevealParams {
    pub fn separation_eps(&self, n: usize) -> f64 {
        self.eps.unwrap_or_else(|| default_eps(n))
    }
}

pub fn default_eps(n: usize) -> f64 {
    (1.0 - 2f64.powf(-1.0 / (n as f64 + 1.0))).min(1e-3)
}

fn point_index(dims: &[usize], x: &[usize]) -> usize {
    x.iter().zip(dims).fold(0, |acc, (&xi, &d)| acc * d + xi)
}

/// The two-action menu testing whether `set` separates. Variables in `set`
/// sit at their highest value; the first action puts `1 - eps` on every other
/// variable high and the best consequence, the second on every other
/// covariate low and the worst consequence. The remaining `eps` is spread
/// over the low-consequence points (and the other action's main point).
pub fn separation_menu(set: VarSet, space: &VarSpace, eps: f64) -> Result<DiagnosticMenu> {
    let y = space.consequence();
    if set.contains(y) {
        return Err(Error::domain("a separation menu cannot fix the consequence"));
    }
    if !set.is_subset(space.outcome_vars()) {
        return Err(Error::domain(format!("{set} is not a set of covariates")));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::domain(format!("separation perturbation {eps} outside (0, 1/2)")));
    }
    let dims = space.outcome_dims();
    let high = |v: usize| space.dim(v) - 1;
    let free: Vec<usize> = space.covariate_vars().difference(set).to_vec();
    let base: Vec<usize> = (1..=y).map(|v| if set.contains(v) { high(v) } else { 0 }).collect();
    let main_a = {
        let mut x = base.clone();
        free.iter().for_each(|&v| x[v - 1] = high(v));
        x[y - 1] = high(y);
        x
    };
    // Low-consequence points with the free covariates at every high/low
    // combination; the all-low one is the second action's main point.
    let mut off: Vec<Vec<usize>> = Vec::new();
    for mask in 0..1usize << free.len() {
        let mut x = base.clone();
        for (b, &v) in free.iter().enumerate() {
            x[v - 1] = if mask >> b & 1 == 1 { high(v) } else { 0 };
        }
        x[y - 1] = 0;
        off.push(x);
    }
    let main_b = off[0].clone();
    off.push(main_a.clone());
    let size: usize = dims.iter().product();
    let build = |main: &Vec<usize>| -> Result<Action> {
        let mut probs = vec![0.0; size];
        let share = eps / (off.len() - 1) as f64;
        for x in &off {
            probs[point_index(&dims, x)] = if x == main { 1.0 - eps } else { share };
        }
        Action::new(space, probs)
    };
    let menu = Menu::strict(vec![build(&main_a)?, build(&main_b)?])?;
    Ok(DiagnosticMenu { kind: DiagnosticKind::Separation { set }, menu, eps, y_high: high(y), y_low: 0 })
}

/// The two-action menu testing whether `candidate` immediately precedes
/// `next`, given the separators placed after `candidate` so far (`next`
/// first) and the full list of minimal separators.
///
/// Two latent bits drive the construction. `Z` is high with probability
/// `1 - noise` under the first action and `noise` under the second; `W` is a
/// fair coin under both. Variables in `candidate ∩ next` are fixed high,
/// variables in `candidate \ next` are noisy copies of `Z`, variables of the
/// placed separators outside `candidate` (the consequence among them) are
/// noisy copies of `W`, and the remaining separator variables are high with
/// probability 3/4 when both latents are high and 1/4 otherwise. Everything
/// else is fixed low. Within the menu the shared part is independent of
/// everything and `next \ candidate` is independent of `candidate \ next`.
pub fn ordering_menu(candidate: VarSet, placed: &[VarSet], all: &[VarSet], space: &VarSpace, noise: f64) -> Result<DiagnosticMenu> {
    let next = *placed.first().ok_or_else(|| Error::domain("ordering needs a placed successor"))?;
    if !(noise > 0.0 && noise < 0.5) {
        return Err(Error::domain(format!("copy noise {noise} outside (0, 1/2)")));
    }
    let y = space.consequence();
    let placed_union = placed.iter().fold(VarSet::empty(), |acc, s| acc.union(*s));
    let all_union = all.iter().fold(VarSet::empty(), |acc, s| acc.union(*s));
    let shared = candidate.intersection(next);
    let z_copies = candidate.difference(next);
    let w_copies = placed_union.difference(candidate);
    let mixed = all_union.difference(candidate.union(placed_union));
    if z_copies.is_empty() {
        return Err(Error::domain(format!("candidate {candidate} is contained in {next}")));
    }
    let dims = space.outcome_dims();
    let high = |v: usize| space.dim(v) - 1;
    let random: Vec<usize> = z_copies.union(w_copies).union(mixed).to_vec();
    let base: Vec<usize> = (1..=y).map(|v| if shared.contains(v) { high(v) } else { 0 }).collect();
    let size: usize = dims.iter().product();
    let build = |pz: f64| -> Result<Action> {
        let mut probs = vec![0.0; size];
        for mask in 0..1usize << random.len() {
            let mut x = base.clone();
            for (b, &v) in random.iter().enumerate() {
                x[v - 1] = if mask >> b & 1 == 1 { high(v) } else { 0 };
            }
            let mut total = 0.0;
            for (z, w) in [(true, true), (true, false), (false, true), (false, false)] {
                let mut p = if z { pz } else { 1.0 - pz } * 0.5;
                for (b, &v) in random.iter().enumerate() {
                    let hi = mask >> b & 1 == 1;
                    let p_hi = if z_copies.contains(v) {
                        if z { 1.0 - noise } else { noise }
                    } else if w_copies.contains(v) {
                        if w { 1.0 - noise } else { noise }
                    } else if z && w {
                        0.75
                    } else {
                        0.25
                    };
                    p *= if hi { p_hi } else { 1.0 - p_hi };
                }
                total += p;
            }
            probs[point_index(&dims, &x)] = total;
        }
        Action::new(space, probs)
    };
    let menu = Menu::strict(vec![build(1.0 - noise)?, build(noise)?])?;
    Ok(DiagnosticMenu { kind: DiagnosticKind::Ordering { candidate, next }, menu, eps: noise, y_high: high(y), y_low: 0 })
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryRecord {
    pub kind: DiagnosticKind,
    pub menu: Menu,
    pub choice: ChoiceDist,
    pub indifferent: bool,
    /// Whether every alternative equilibrium gives the same verdict, when the
    /// oracle exposes its alternatives.
    pub selection_invariant: Option<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Identification {
    pub separators: Vec<VarSet>,
    pub order: SeparatorOrder,
    pub revealed_causes: Vec<(usize, usize)>,
    pub revealed_dag: Dag,
    pub transcript: Vec<QueryRecord>,
}

/// Runs diagnostic queries against an oracle and keeps a transcript.
pub struct Identifier<'a> {
    oracle: &'a dyn ChoiceOracle,
    pub params: RevealParams,
    transcript: Mutex<Vec<QueryRecord>>,
}

impl<'a> Identifier<'a> {
    pub fn new(oracle: &'a dyn ChoiceOracle) -> Self {
        Self::with_params(oracle, RevealParams::default())
    }

    pub fn with_params(oracle: &'a dyn ChoiceOracle, params: RevealParams) -> Self {
        Identifier { oracle, params, transcript: Mutex::new(Vec::new()) }
    }

    pub fn transcript(&self) -> Vec<QueryRecord> {
        self.transcript.lock().unwrap().clone()
    }

    pub fn into_transcript(self) -> Vec<QueryRecord> {
        self.transcript.into_inner().unwrap()
    }

    fn space(&self) -> &VarSpace {
        self.oracle.space()
    }

    /// Query a diagnostic menu; true when the DM is indifferent.
    fn query(&self, diag: DiagnosticMenu) -> Result<bool> {
        let choice = self.oracle.choose(&diag.menu)?;
        let verdict = |c: &ChoiceDist| (c.get(0) - 0.5).abs() <= self.params.tol;
        let indifferent = verdict(&choice);
        let selection_invariant = match self.oracle.alternatives(&diag.menu) {
            Some(alts) => Some(alts?.iter().all(|c| verdict(c) == indifferent)),
            None => None,
        };
        self.transcript.lock().unwrap().push(QueryRecord {
            kind: diag.kind,
            menu: diag.menu,
            choice,
            indifferent,
            selection_invariant,
        });
        Ok(indifferent)
    }

    pub fn separates(&self, set: VarSet) -> Result<bool> {
        let space = self.space();
        if set.contains(space.consequence()) {
            return Ok(true);
        }
        let diag = separation_menu(set, space, self.params.separation_eps(space.n()))?;
        self.query(diag)
    }

    /// All inclusion-minimal separating subsets of `N`, by increasing size
    /// and then lexicographically.
    pub fn minimal_separators(&self) -> Result<Vec<VarSet>> {
        let n = self.space().n();
        if n > self.params.max_n {
            return Err(Error::EnumerationBudget { n, limit: self.params.max_n });
        }
        let vars = self.space().outcome_vars().to_vec();
        let mut found: Vec<VarSet> = Vec::new();
        for size in 1..=vars.len() {
            for combo in vars.iter().copied().combinations(size) {
                let set: VarSet = combo.into_iter().collect();
                if found.iter().any(|f| f.is_subset(set)) {
                    continue;
                }
                if self.separates(set)? {
                    found.push(set);
                }
            }
        }
        Ok(found)
    }

    /// Order the minimal separators backwards from `{n+1}`.
    pub fn order_separators(&self, separators: &[VarSet]) -> Result<SeparatorOrder> {
        let space = self.space();
        let y = VarSet::singleton(space.consequence());
        if !separators.contains(&y) {
            return Err(Error::NoScr("the consequence alone does not separate".into()));
        }
        let mut placed = vec![y];
        let mut remaining: Vec<VarSet> = separators.iter().copied().filter(|s| *s != y).collect();
        while !remaining.is_empty() {
            let next = placed[0];
            let shortlist: Vec<VarSet> = remaining
                .iter()
                .copied()
                .filter(|a| remaining.iter().all(|b| b.intersection(next).is_subset(a.intersection(next))))
                .collect();
            let chosen = match shortlist.len() {
                0 => {
                    return Err(Error::InconsistentRevealedCauses(format!(
                        "no remaining separator has a largest intersection with {next}"
                    )))
                }
                1 => shortlist[0],
                _ => {
                    let mut passing = Vec::new();
                    for &cand in &shortlist {
                        let others = shortlist.iter().filter(|s| **s != cand).fold(VarSet::empty(), |acc, s| acc.union(*s));
                        if cand.difference(next).difference(others).is_empty() {
                            continue;
                        }
                        let diag = ordering_menu(cand, &placed, separators, space, self.params.noise)?;
                        if self.query(diag)? {
                            passing.push(cand);
                        }
                    }
                    if passing.len() != 1 {
                        return Err(Error::InconsistentRevealedCauses(format!(
                            "{} of {} candidates preceding {next} pass the ordering test",
                            passing.len(),
                            shortlist.len()
                        )));
                    }
                    passing[0]
                }
            };
            remaining.retain(|s| *s != chosen);
            placed.insert(0, chosen);
        }
        SeparatorOrder::new(placed, space.n())
    }

    pub fn identify(&self) -> Result<Identification> {
        let separators = self.minimal_separators()?;
        let order = self.order_separators(&separators)?;
        let n = self.space().n();
        Ok(Identification {
            revealed_causes: order.revealed_causes(),
            revealed_dag: order.revealed_dag(n),
            separators,
            order,
            transcript: self.transcript(),
        })
    }
}

pub fn separates(oracle: &dyn ChoiceOracle, set: VarSet) -> Result<bool> {
    Identifier::new(oracle).separates(set)
}

pub fn minimal_separators(oracle: &dyn ChoiceOracle) -> Result<Vec<VarSet>> {
    Identifier::new(oracle).minimal_separators()
}

pub fn order_separators(oracle: &dyn ChoiceOracle, separators: &[VarSet]) -> Result<SeparatorOrder> {
    Identifier::new(oracle).order_separators(separators)
}

pub fn identify(oracle: &dyn ChoiceOracle) -> Result<Identification> {
    Identifier::new(oracle).identify()
}

/// Links present in every DAG representing behavior with this order.
pub fn revealed_causes(order: &SeparatorOrder) -> Vec<(usize, usize)> {
    order.revealed_causes()
}

/// Covariates in no minimal separator of the oracle.
pub fn irrelevant_variables(oracle: &dyn ChoiceOracle) -> Result<VarSet> {
    let seps = minimal_separators(oracle)?;
    let used = seps.iter().fold(VarSet::empty(), |acc, s| acc.union(*s));
    Ok(oracle.space().outcome_vars().difference(used))
}

/// Whether the two oracles agree on every battery menu. Each menu must make
/// every variable in `irrelevant` independent of all other outcome variables.
pub fn coarser_than(
    coarse: &dyn ChoiceOracle,
    fine: &dyn ChoiceOracle,
    irrelevant: VarSet,
    battery: &[Menu],
    tol: f64,
) -> Result<bool> {
    let outcome = coarse.space().outcome_vars();
    for (m, menu) in battery.iter().enumerate() {
        for i in irrelevant {
            if !independent_within(menu, VarSet::singleton(i), outcome.without(i))? {
                return Err(Error::domain(format!(
                    "battery menu {m} does not make variable {} independent",
                    coarse.space().name(i)
                )));
            }
        }
    }
    for menu in battery {
        if coarse.choose(menu)?.max_abs_diff(&fine.choose(menu)?) > tol {
            return Ok(false);
        }
    }
    Ok(true)
}
