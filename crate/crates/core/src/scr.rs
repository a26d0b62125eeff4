//! DAG-distorted beliefs and Logit personal equilibria.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dag::Dag;
use crate::error::{Error, Result};
use crate::probspace::{next_assignment, weighted_dataset, Action, ChoiceDist, Joint, Menu, VarSpace, PROB_TOL};
use crate::varset::VarSet;

/// Utility over the consequence support, strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct Utility {
    values: Vec<f64>,
}

impl Utility {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("utility needs at least two finite values"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("utility must be strictly increasing"));
        }
        Ok(Utility { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn range(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn shifted(&self, beta: f64) -> Utility {
        Utility { values: self.values.iter().map(|v| v + beta).collect() }
    }

    pub fn expect(&self, dist: &[f64]) -> f64 {
        self.values.iter().zip(dist).map(|(u, p)| u * p).sum()
    }

    /// Subtract the smallest value.
    pub fn normalized(&self) -> Utility {
        self.shifted(-self.min())
    }
}

/// A DAG and utility, with an intensity that scales the utility (1 by default).
#[derive(Clone, Debug, PartialEq)]
pub struct ScrModel {
    pub space: VarSpace,
    pub dag: Dag,
    pub utility: Utility,
    pub intensity: f64,
}

impl ScrModel {
    pub fn new(space: VarSpace, dag: Dag, utility: Utility) -> Result<Self> {
        if dag.num_nodes() != space.n() + 2 {
            return Err(Error::domain(format!("DAG has {} nodes, space has {}", dag.num_nodes(), space.n() + 2)));
        }
        if !dag.is_uninformed() {
            return Err(Error::domain("DAG must be uninformed"));
        }
        if !dag.is_nontrivial() {
            return Err(Error::domain("DAG must be nontrivial"));
        }
        if utility.len() != space.dim(space.consequence()) {
            return Err(Error::domain("utility table does not match the consequence support"));
        }
        Ok(ScrModel { space, dag, utility, intensity: 1.0 })
    }

    /// Logit expected utility under the true consequence marginal.
    pub fn logit_eu(space: VarSpace, utility: Utility) -> Result<Self> {
        let dag = Dag::complete(space.n() + 2);
        Self::new(space, dag, utility)
    }

    pub fn with_intensity(&self, lambda: f64) -> Self {
        ScrModel { intensity: lambda, ..self.clone() }
    }

    pub fn with_dag(&self, dag: Dag) -> Result<Self> {
        let mut m = Self::new(self.space.clone(), dag, self.utility.clone())?;
        m.intensity = self.intensity;
        Ok(m)
    }

    /// Largest possible gap between perceived expected utilities.
    pub fn utility_span(&self) -> f64 {
        self.intensity * self.utility.range()
    }
}

/// Per-point family indices for variables laid out in ascending order.
fn family_indices(dims: &[usize], child: usize, parents: &[usize]) -> Vec<u32> {
    let size: usize = dims.iter().product();
    let mut out = Vec::with_capacity(size);
    let mut x = vec![0; dims.len()];
    for _ in 0..size {
        let pa = parents.iter().fold(0usize, |acc, &k| acc * dims[k] + x[k]);
        out.push((pa * dims[child] + x[child]) as u32);
        next_assignment(&mut x, dims);
    }
    out
}

/// Conditional table `fam / parent-marginal`; zero where the parent
/// configuration has no mass. Returns whether such a configuration exists.
fn conditionalize(fam: &[f64], child_dim: usize, out: &mut [f64]) -> bool {
    let mut undefined = false;
    for (chunk, dst) in fam.chunks(child_dim).zip(out.chunks_mut(child_dim)) {
        let s: f64 = chunk.iter().sum();
        if s > 0.0 {
            for (d, f) in dst.iter_mut().zip(chunk) {
                *d = f / s;
            }
        } else {
            dst.iter_mut().for_each(|d| *d = 0.0);
            undefined = true;
        }
    }
    undefined
}

/// `p_R(x) = prod_j p(x_j | x_{R(j)})` over the variables of `p`.
pub fn factorize(p: &Joint, dag: &Dag) -> Result<Joint> {
    let vars = p.vars();
    if !vars.is_subset(dag.all_nodes()) {
        return Err(Error::domain(format!("table variables {vars} exceed the DAG's nodes")));
    }
    for j in vars {
        if !dag.parents(j).is_subset(vars) {
            return Err(Error::domain(format!("parents of {j} are not covered by the table")));
        }
    }
    let dims = p.dims();
    let var_list = vars.to_vec();
    let pos = |v: usize| var_list.iter().position(|&u| u == v).unwrap();
    let order: Vec<usize> = dag.topological_order().into_iter().filter(|v| vars.contains(*v)).collect();
    let mut factors: Vec<(usize, Vec<usize>, Vec<u32>, Vec<f64>)> = Vec::new();
    for &j in &order {
        let parents: Vec<usize> = dag.parents(j).iter().map(pos).collect();
        let child = pos(j);
        let idx = family_indices(dims, child, &parents);
        let fam_len = parents.iter().map(|&k| dims[k]).product::<usize>() * dims[child];
        let mut fam = vec![0.0; fam_len];
        for (i, &pr) in p.probs().iter().enumerate() {
            fam[idx[i] as usize] += pr;
        }
        let mut cond = vec![0.0; fam_len];
        conditionalize(&fam, dims[child], &mut cond);
        factors.push((j, parents, idx, cond));
    }
    let mut out = vec![0.0; p.len()];
    let mut x = vec![0; dims.len()];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut prod = 1.0;
        for (j, parents, idx, cond) in &factors {
            let fi = idx[i] as usize;
            let c = cond[fi];
            if c == 0.0 && prod > 0.0 {
                let parent_mass: f64 = cond[fi - fi % dims[pos(*j)]..][..dims[pos(*j)]].iter().sum();
                if parent_mass == 0.0 {
                    let config = parents.iter().map(|&k| (var_list[k], x[k])).collect();
                    return Err(Error::UndefinedConditional { var: *j, config });
                }
            }
            prod *= c;
        }
        *slot = prod;
        next_assignment(&mut x, dims);
    }
    Ok(Joint::from_raw(vars, dims.to_vec(), out))
}

struct Family {
    child_dim: usize,
    action_dependent: bool,
    idx: Vec<u32>,
    /// Per action: the conditional table when action-dependent, otherwise the
    /// family marginal.
    tables: Vec<Vec<f64>>,
    undefined: Vec<bool>,
    cond: Vec<f64>,
}

/// Evaluates perceived consequence distributions for a fixed list of actions
/// under varying choice weights. Only ancestors of the consequence matter.
pub(crate) struct Predictor {
    families: Vec<Family>,
    y_of: Vec<u32>,
    y_dim: usize,
    points: usize,
    n_actions: usize,
}

impl Predictor {
    pub(crate) fn new(dag: &Dag, actions: &[Action]) -> Result<Self> {
        let y = dag.consequence();
        let anc = dag.ancestors(y);
        if !anc.contains(0) {
            return Err(Error::domain("consequence does not depend on the action"));
        }
        let w = anc.without(0).with(y);
        let w_list = w.to_vec();
        let dims: Vec<usize> = w_list.iter().map(|&v| actions[0].joint().dim(v).unwrap()).collect();
        let points: usize = dims.iter().product();
        let pos = |v: usize| w_list.iter().position(|&u| u == v).unwrap();
        let marginals: Vec<Joint> = actions.iter().map(|a| a.marginal(w)).collect::<Result<_>>()?;
        let mut families = Vec::new();
        for &j in &w_list {
            let pa = dag.parents(j);
            let action_dependent = pa.contains(0);
            let parents: Vec<usize> = pa.without(0).iter().map(pos).collect();
            let child = pos(j);
            let idx = family_indices(&dims, child, &parents);
            let fam_len = parents.iter().map(|&k| dims[k]).product::<usize>() * dims[child];
            let mut tables = Vec::with_capacity(actions.len());
            let mut undefined = Vec::with_capacity(actions.len());
            for m in &marginals {
                let mut fam = vec![0.0; fam_len];
                for (i, &pr) in m.probs().iter().enumerate() {
                    fam[idx[i] as usize] += pr;
                }
                if action_dependent {
                    let mut cond = vec![0.0; fam_len];
                    undefined.push(conditionalize(&fam, dims[child], &mut cond));
                    tables.push(cond);
                } else {
                    undefined.push(false);
                    tables.push(fam);
                }
            }
            families.push(Family { child_dim: dims[child], action_dependent, idx, tables, undefined, cond: vec![0.0; fam_len] });
        }
        let y_pos = pos(y);
        let y_stride: usize = dims[y_pos + 1..].iter().product();
        let y_dim = dims[y_pos];
        let y_of = (0..points).map(|i| ((i / y_stride) % y_dim) as u32).collect();
        Ok(Predictor { families, y_of, y_dim, points, n_actions: actions.len() })
    }

    pub(crate) fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Perceived consequence distribution of every action. `weights` are the
    /// choice frequencies generating the dataset and may contain zeros.
    pub(crate) fn predict(&mut self, weights: &[f64]) -> Result<Vec<Vec<f64>>> {
        for f in self.families.iter_mut().filter(|f| !f.action_dependent) {
            let mut mix = vec![0.0; f.cond.len()];
            for (t, &wc) in f.tables.iter().zip(weights) {
                if wc > 0.0 {
                    mix.iter_mut().zip(t).for_each(|(m, v)| *m += wc * v);
                }
            }
            conditionalize(&mix, f.child_dim, &mut f.cond);
        }
        let mut out = Vec::with_capacity(self.n_actions);
        for c in 0..self.n_actions {
            let tables: Vec<&[f64]> = self
                .families
                .iter()
                .map(|f| if f.action_dependent { f.tables[c].as_slice() } else { f.cond.as_slice() })
                .collect();
            let mut pred = vec![0.0; self.y_dim];
            for i in 0..self.points {
                let mut prod = 1.0;
                for (f, t) in self.families.iter().zip(&tables) {
                    prod *= t[f.idx[i] as usize];
                    if prod == 0.0 {
                        break;
                    }
                }
                pred[self.y_of[i] as usize] += prod;
            }
            let mass: f64 = pred.iter().sum();
            if (mass - 1.0).abs() > 1e-9 {
                let undefined = self.families.iter().any(|f| f.undefined[c]);
                let why = if undefined { "an action-specific conditional is undefined" } else { "the dataset violates the support condition" };
                return Err(Error::Domain(format!("perceived consequence distribution of action {c} has mass {mass}: {why}")));
            }
            out.push(pred);
        }
        Ok(out)
    }
}

/// Perceived consequence distribution `rho_R(. | a)` for action label `a` of
/// a dataset over `0..=n+1`.
pub fn predict_consequence(dataset: &Joint, dag: &Dag, action: usize) -> Result<Vec<f64>> {
    let (weights, slices) = dataset_slices(dataset)?;
    if action >= weights.len() || weights[action] <= 0.0 {
        return Err(Error::domain(format!("action {action} has zero probability in the dataset")));
    }
    let mut predictor = Predictor::new(dag, &slices)?;
    Ok(predictor.predict(&weights)?.swap_remove(action))
}

/// Split a dataset into action weights and per-action lotteries.
fn dataset_slices(dataset: &Joint) -> Result<(Vec<f64>, Vec<Action>)> {
    if !dataset.vars().contains(0) || dataset.vars().first() != Some(0) {
        return Err(Error::domain("dataset must include the action variable"));
    }
    let k = dataset.dims()[0];
    let inner_vars = dataset.vars().without(0);
    let inner_dims = dataset.dims()[1..].to_vec();
    let stride = dataset.len() / k;
    let mut weights = Vec::with_capacity(k);
    let mut slices = Vec::with_capacity(k);
    for c in 0..k {
        let chunk = &dataset.probs()[c * stride..(c + 1) * stride];
        let w: f64 = chunk.iter().sum();
        weights.push(w);
        let probs = if w > 0.0 { chunk.iter().map(|p| p / w).collect() } else { vec![1.0 / stride as f64; stride] };
        slices.push(Action::from_joint_unchecked(Joint::from_raw(inner_vars, inner_dims.clone(), probs)));
    }
    Ok((weights, slices))
}

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln sigmoid(t)`.
pub(crate) fn log_sigmoid(t: f64) -> f64 {
    -softplus(-t)
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn log_softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    v.iter().map(|x| x - lse).collect()
}

fn softmax(v: &[f64]) -> Vec<f64> {
    log_softmax(v).into_iter().map(f64::exp).collect()
}

/// Perceived expected utilities (scaled by the model intensity).
fn scaled_utilities(predictor: &mut Predictor, model: &ScrModel, weights: &[f64]) -> Result<Vec<f64>> {
    Ok(predictor.predict(weights)?.iter().map(|d| model.intensity * model.utility.expect(d)).collect())
}

/// Perceived expected utility of each action when the dataset is generated
/// by `sigma`, unscaled by the intensity.
pub fn perceived_utilities(menu: &Menu, sigma: &ChoiceDist, model: &ScrModel) -> Result<Vec<f64>> {
    let mut predictor = Predictor::new(&model.dag, menu.actions())?;
    Ok(predictor.predict(sigma.probs())?.iter().map(|d| model.utility.expect(d)).collect())
}

/// The Logit response to the dataset generated by `sigma`.
pub fn logit_response(menu: &Menu, sigma: &ChoiceDist, model: &ScrModel) -> Result<ChoiceDist> {
    if sigma.len() != menu.len() {
        return Err(Error::domain("choice distribution does not match the menu"));
    }
    if sigma.probs().iter().any(|&p| p <= 0.0) {
        return Err(Error::domain("logit response needs a full-support choice distribution"));
    }
    let mut predictor = Predictor::new(&model.dag, menu.actions())?;
    let v = scaled_utilities(&mut predictor, model, sigma.probs())?;
    Ok(ChoiceDist::from_raw(softmax(&v)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverParams {
    pub tol: f64,
    pub damping: f64,
    pub grid: usize,
    pub starts: usize,
    pub merge_radius: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams { tol: 1e-12, damping: 0.5, grid: 10_000, starts: 64, merge_radius: 1e-6, max_iter: 100_000, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Equilibrium {
    pub choice: ChoiceDist,
    /// Natural logs of the choice probabilities, accurate where the
    /// probabilities themselves underflow.
    pub log_probs: Vec<f64>,
    /// Sup-norm distance between the choice and its Logit response.
    pub residual: f64,
    /// Number of multistart runs of damped iteration that converged here.
    pub basin: usize,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct EquilibriumSet {
    pub equilibria: Vec<Equilibrium>,
}

impl EquilibriumSet {
    pub fn len(&self) -> usize {
        self.equilibria.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equilibria.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Equilibrium> {
        self.equilibria.iter()
    }

    /// Probabilities of action `i` across equilibria.
    pub fn probs_of(&self, i: usize) -> Vec<f64> {
        self.equilibria.iter().map(|e| e.choice.get(i)).collect()
    }
}

/// Result of damped fixed-point iteration in logit space.
struct Iterate {
    v: Vec<f64>,
    converged: bool,
}

/// Damped iteration `v <- (1-d) v + d G(v)` where `G` maps logits to scaled
/// perceived utilities. The damping halves whenever the step grows.
fn damped_iteration(
    start: Vec<f64>,
    params: &SolverParams,
    mut g: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<Iterate> {
    let mut v = start;
    let mut d = params.damping;
    let mut prev_step = f64::INFINITY;
    for _ in 0..params.max_iter {
        let gv = g(&v)?;
        let step = gv.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = 1.0 + v.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if step <= params.tol * scale {
            return Ok(Iterate { v: gv, converged: true });
        }
        if step > prev_step {
            d = (d * 0.5).max(1e-3);
        }
        prev_step = step;
        v = v.iter().zip(&gv).map(|(a, b)| (1.0 - d) * a + d * b).collect();
    }
    Ok(Iterate { v, converged: false })
}

fn binary_weights(t: f64) -> [f64; 2] {
    [sigmoid(t), sigmoid(-t)]
}

/// The fixed point reached by damped iteration from uniform choice. When the
/// iteration stalls, the equilibrium closest to uniform choice is returned.
pub fn canonical_equilibrium(menu: &Menu, model: &ScrModel, params: &SolverParams) -> Result<Equilibrium> {
    let mut predictor = Predictor::new(&model.dag, menu.actions())?;
    let k = menu.len();
    let it = if k == 2 {
        damped_iteration(vec![0.0], params, |v| {
            let u = scaled_utilities(&mut predictor, model, &binary_weights(v[0]))?;
            Ok(vec![u[0] - u[1]])
        })?
    } else {
        damped_iteration(vec![0.0; k], params, |v| scaled_utilities(&mut predictor, model, &softmax(v)))?
    };
    if it.converged {
        return finish(&mut predictor, model, &it.v, 0);
    }
    let all = solve_equilibria(menu, model, params)?;
    let uniform = ChoiceDist::uniform(k);
    all.equilibria
        .into_iter()
        .min_by(|a, b| a.choice.max_abs_diff(&uniform).total_cmp(&b.choice.max_abs_diff(&uniform)))
        .ok_or_else(|| Error::Solver("no equilibrium found".into()))
}

/// Build an equilibrium record from logits (a single log-odds value for
/// binary menus).
fn finish(predictor: &mut Predictor, model: &ScrModel, v: &[f64], basin: usize) -> Result<Equilibrium> {
    let log_probs = if v.len() == 1 { vec![log_sigmoid(v[0]), log_sigmoid(-v[0])] } else { log_softmax(v) };
    let probs: Vec<f64> = log_probs.iter().map(|l| l.exp()).collect();
    let response = softmax(&scaled_utilities(predictor, model, &probs)?);
    let residual = probs.iter().zip(&response).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(Equilibrium { choice: ChoiceDist::from_raw(probs), log_probs, residual, basin })
}

/// All personal equilibria found for the menu. Binary menus are solved as a
/// root-finding problem in log-odds; larger menus by multistart damped
/// iteration, which can miss unstable equilibria.
pub fn solve_equilibria(menu: &Menu, model: &ScrModel, params: &SolverParams) -> Result<EquilibriumSet> {
    let mut predictor = Predictor::new(&model.dag, menu.actions())?;
    let mut set = if menu.len() == 2 {
        solve_binary(&mut predictor, model, params)?
    } else {
        solve_multistart(&mut predictor, model, params)?
    };
    set.equilibria.sort_by(|a, b| a.choice.probs().partial_cmp(b.choice.probs()).unwrap());
    Ok(set)
}

fn solve_binary(predictor: &mut Predictor, model: &ScrModel, params: &SolverParams) -> Result<EquilibriumSet> {
    let mut h = |t: f64| -> Result<f64> {
        let u = scaled_utilities(predictor, model, &binary_weights(t))?;
        Ok(t - (u[0] - u[1]))
    };
    let bound = model.utility_span() + 1.0;
    let g = params.grid.max(2);
    let mut grid: Vec<f64> = (0..=g).map(|i| -bound + 2.0 * bound * i as f64 / g as f64).collect();
    grid.extend((1..g).map(|k| {
        let p = k as f64 / g as f64;
        (p / (1.0 - p)).ln()
    }));
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let values: Vec<f64> = grid.iter().map(|&t| h(t)).collect::<Result<_>>()?;
    let mut roots = Vec::new();
    for i in 0..grid.len() {
        if values[i] == 0.0 {
            roots.push(grid[i]);
        } else if i + 1 < grid.len() && values[i] * values[i + 1] < 0.0 {
            let (mut lo, mut hi, mut flo) = (grid[i], grid[i + 1], values[i]);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if hi - lo <= 1e-12 * mid.abs().max(1.0) {
                    break;
                }
                let fm = h(mid)?;
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    if roots.is_empty() {
        return Err(Error::Solver("no equilibrium bracketed".into()));
    }
    let mut merged: Vec<f64> = Vec::new();
    for t in roots {
        match merged.last() {
            Some(&last) if (sigmoid(t) - sigmoid(last)).abs() <= params.merge_radius && (t - last).abs() <= 1.0 => {}
            _ => merged.push(t),
        }
    }

    let mut basins = vec![0usize; merged.len()];
    for start in multistart_points(1, bound, params) {
        let it = damped_iteration(start, params, |v| {
            let u = scaled_utilities(predictor, model, &binary_weights(v[0]))?;
            Ok(vec![u[0] - u[1]])
        })?;
        if it.converged {
            let t = it.v[0];
            let nearest = (0..merged.len()).min_by(|&a, &b| (merged[a] - t).abs().total_cmp(&(merged[b] - t).abs())).unwrap();
            basins[nearest] += 1;
        }
    }
    let equilibria = merged
        .iter()
        .zip(basins)
        .map(|(&t, basin)| finish(predictor, model, &[t], basin))
        .collect::<Result<_>>()?;
    Ok(EquilibriumSet { equilibria })
}

/// The uniform start followed by a Latin-hypercube sample of the logit box.
fn multistart_points(k: usize, bound: f64, params: &SolverParams) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let m = params.starts;
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut strata: Vec<usize> = (0..m).collect();
        strata.shuffle(&mut rng);
        columns.push(strata.into_iter().map(|s| (s as f64 + rng.gen::<f64>()) / m as f64).collect());
    }
    let mut out = vec![vec![0.0; k]];
    out.extend((0..m).map(|i| columns.iter().map(|c| bound * (2.0 * c[i] - 1.0)).collect()));
    out
}

fn solve_multistart(predictor: &mut Predictor, model: &ScrModel, params: &SolverParams) -> Result<EquilibriumSet> {
    let k = predictor.n_actions();
    let bound = model.utility_span() + 1.0;
    let mut found: Vec<Equilibrium> = Vec::new();
    for start in multistart_points(k, bound, params) {
        let it = damped_iteration(start, params, |v| scaled_utilities(predictor, model, &softmax(v)))?;
        let eq = finish(predictor, model, &it.v, 1)?;
        if !it.converged && eq.residual > 1e-9 {
            continue;
        }
        match found.iter_mut().find(|e| e.choice.max_abs_diff(&eq.choice) <= params.merge_radius) {
            Some(e) => e.basin += 1,
            None => found.push(eq),
        }
    }
    if found.is_empty() {
        return Err(Error::Solver("damped iteration did not converge from any start".into()));
    }
    Ok(EquilibriumSet { equilibria: found })
}

/// Whether `p` is a personal equilibrium of the deterministic limit: every
/// action chosen with probability above `tol` maximizes perceived expected
/// utility up to `tol`.
pub fn is_personal_equilibrium(menu: &Menu, model: &ScrModel, p: &ChoiceDist, tol: f64) -> Result<bool> {
    let mut predictor = Predictor::new(&model.dag, menu.actions())?;
    let eu: Vec<f64> = predictor.predict(p.probs())?.iter().map(|d| model.utility.expect(d)).collect();
    let best = eu.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(p.probs().iter().zip(&eu).all(|(&pi, &u)| pi <= tol || u >= best - tol))
}

/// Choice under an exogenous dataset `q` over `0..=n+1` whose action labels
/// are the menu's actions in order.
pub fn escr_choice(menu: &Menu, q: &Joint, model: &ScrModel) -> Result<ChoiceDist> {
    let (weights, slices) = dataset_slices(q)?;
    if weights.len() != menu.len() {
        return Err(Error::domain("dataset action labels do not match the menu"));
    }
    if let Some(c) = weights.iter().position(|&w| w <= 0.0) {
        return Err(Error::domain(format!("dataset assigns zero probability to action {c}")));
    }
    check_product_support(q, model.space.n())?;
    let mut predictor = Predictor::new(&model.dag, &slices)?;
    let v = scaled_utilities(&mut predictor, model, &weights)?;
    Ok(ChoiceDist::from_raw(softmax(&v)))
}

/// The support of the marginal on `0..=n` must equal the product of the
/// single-variable marginal supports.
fn check_product_support(q: &Joint, n: usize) -> Result<()> {
    let head = VarSet::range(0, n + 1);
    let joint = q.marginal(head)?;
    let marg: Vec<Vec<bool>> = head.iter().map(|v| q.support(VarSet::singleton(v))).collect::<Result<_>>()?;
    let mut ok = true;
    joint.for_each(|x, p| {
        let in_product = x.iter().enumerate().all(|(k, &xk)| marg[k][xk]);
        if in_product != (p > 0.0) {
            ok = false;
        }
    });
    if ok {
        Ok(())
    } else {
        Err(Error::domain("dataset support is not the product of its marginal supports"))
    }
}

/// Joint equilibria when menus are drawn with the given weights and beliefs
/// come from the pooled dataset. Each profile lists one choice distribution
/// per input menu.
pub fn solve_menu_distribution(mu: &[(Menu, f64)], model: &ScrModel, params: &SolverParams) -> Result<Vec<Vec<ChoiceDist>>> {
    if mu.is_empty() {
        return Err(Error::domain("empty menu distribution"));
    }
    if mu.iter().any(|(_, w)| !(*w > 0.0)) {
        return Err(Error::domain("menu weights must be positive"));
    }
    let total: f64 = mu.iter().map(|(_, w)| w).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Mass { what: "menu distribution".into(), mass: total });
    }
    // Identical menus are merged; `placement[i]` maps input menu i to a
    // distinct menu and the positions of its actions there.
    let mut distinct: Vec<(Menu, f64)> = Vec::new();
    let mut placement: Vec<(usize, Vec<usize>)> = Vec::new();
    for (menu, w) in mu {
        match distinct.iter().position(|(d, _)| d.matching(menu, PROB_TOL).is_some()) {
            Some(k) => {
                distinct[k].1 += w;
                placement.push((k, distinct[k].0.matching(menu, PROB_TOL).unwrap()));
            }
            None => {
                placement.push((distinct.len(), (0..menu.len()).collect()));
                distinct.push((menu.clone(), *w));
            }
        }
    }
    let profiles: Vec<Vec<Vec<f64>>> = if distinct.len() == 1 {
        solve_equilibria(&distinct[0].0, model, params)?.equilibria.into_iter().map(|e| vec![e.choice.probs().to_vec()]).collect()
    } else {
        solve_pooled(&distinct, model, params)?
    };
    Ok(profiles
        .into_iter()
        .map(|profile| {
            placement.iter().map(|(k, perm)| ChoiceDist::from_raw(perm.iter().map(|&p| profile[*k][p]).collect())).collect()
        })
        .collect())
}

fn solve_pooled(menus: &[(Menu, f64)], model: &ScrModel, params: &SolverParams) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut union: Vec<Action> = Vec::new();
    let mut index: Vec<Vec<usize>> = Vec::new();
    for (menu, _) in menus {
        let mut ids = Vec::new();
        for a in menu.actions() {
            let id = match union.iter().position(|u| u.max_abs_diff(a) <= PROB_TOL) {
                Some(id) => id,
                None => {
                    union.push(a.clone());
                    union.len() - 1
                }
            };
            ids.push(id);
        }
        index.push(ids);
    }
    let mut predictor = Predictor::new(&model.dag, &union)?;
    let sizes: Vec<usize> = menus.iter().map(|(m, _)| m.len()).collect();
    let total: usize = sizes.iter().sum();
    let split = |v: &[f64]| -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        let mut off = 0;
        for &s in &sizes {
            out.push(softmax(&v[off..off + s]));
            off += s;
        }
        out
    };
    let mut g = |v: &[f64]| -> Result<Vec<f64>> {
        let choice = split(v);
        let mut weights = vec![0.0; union.len()];
        for ((ids, (_, w)), c) in index.iter().zip(menus).zip(&choice) {
            for (&id, p) in ids.iter().zip(c) {
                weights[id] += w * p;
            }
        }
        let u = scaled_utilities(&mut predictor, model, &weights)?;
        Ok(index.iter().flat_map(|ids| ids.iter().map(|&id| u[id])).collect())
    };
    let bound = model.utility_span() + 1.0;
    let mut found: Vec<Vec<Vec<f64>>> = Vec::new();
    for start in multistart_points(total, bound, params) {
        let it = damped_iteration(start, params, &mut g)?;
        if !it.converged {
            continue;
        }
        let profile = split(&it.v);
        let close = |other: &Vec<Vec<f64>>| {
            other.iter().flatten().zip(profile.iter().flatten()).all(|(a, b)| (a - b).abs() <= params.merge_radius)
        };
        if !found.iter().any(close) {
            found.push(profile);
        }
    }
    if found.is_empty() {
        return Err(Error::Solver("pooled iteration did not converge from any start".into()));
    }
    found.sort_by(|a, b| a.concat().partial_cmp(&b.concat()).unwrap());
    Ok(found)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitPath {
    pub steps: Vec<(f64, EquilibriumSet)>,
    /// Equilibria at the largest intensity.
    pub accumulation: Vec<ChoiceDist>,
}

pub const DEFAULT_LAMBDAS: [f64; 5] = [1.0, 10.0, 100.0, 1000.0, 10000.0];

/// Equilibria with the utility scaled by each intensity in `schedule`.
pub fn limit_equilibria(menu: &Menu, model: &ScrModel, schedule: &[f64], params: &SolverParams) -> Result<LimitPath> {
    if schedule.is_empty() || schedule.iter().any(|l| !(*l >= 0.0)) || schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("intensity schedule must be nonnegative and increasing"));
    }
    let mut steps = Vec::with_capacity(schedule.len());
    for &lambda in schedule {
        steps.push((lambda, solve_equilibria(menu, &model.with_intensity(lambda), params)?));
    }
    let accumulation = steps.last().unwrap().1.iter().map(|e| e.choice.clone()).collect();
    Ok(LimitPath { steps, accumulation })
}

/// Convenience: the dataset a menu induces under `sigma`, for arbitrary
/// nonnegative weights.
pub fn dataset_from_weights(menu: &Menu, weights: &[f64]) -> Joint {
    weighted_dataset(menu.actions(), weights)
}
