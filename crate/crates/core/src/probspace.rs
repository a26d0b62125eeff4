//! Finite discrete distributions over the variables `0..=n+1`.
//!
//! Variable 0 is the action label, `1..=n` are covariates and `n+1` is the
//! consequence. Tables are dense and row-major with the highest-indexed
//! variable varying fastest.

use crate::error::{Error, Result};
use crate::varset::VarSet;

/// Tolerance for validating user-supplied probability mass.
pub const MASS_TOL: f64 = 1e-12;

/// Tolerance for equality of probabilities.
pub const PROB_TOL: f64 = 1e-12;

/// Advance `x` to the next assignment, last coordinate fastest. Returns false
/// after the final assignment.
pub(crate) fn next_assignment(x: &mut [usize], dims: &[usize]) -> bool {
    for k in (0..x.len()).rev() {
        x[k] += 1;
        if x[k] < dims[k] {
            return true;
        }
        x[k] = 0;
    }
    false
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarSpace {
    names: Vec<String>,
    supports: Vec<Vec<f64>>,
}

impl VarSpace {
    /// Covariates `1..=n` in order, followed by the consequence.
    pub fn new(covariates: Vec<(String, Vec<f64>)>, consequence: (String, Vec<f64>)) -> Result<Self> {
        if covariates.is_empty() {
            return Err(Error::domain("at least one covariate is required"));
        }
        if covariates.len() + 2 > VarSet::MAX_VARS {
            return Err(Error::domain(format!("at most {} covariates are supported", VarSet::MAX_VARS - 2)));
        }
        if consequence.1.len() < 2 {
            return Err(Error::domain("consequence support needs at least two values"));
        }
        let mut names = vec!["action".to_string()];
        let mut supports = vec![Vec::new()];
        for (name, support) in covariates.into_iter().chain(std::iter::once(consequence)) {
            if support.is_empty() {
                return Err(Error::domain(format!("variable {name} has an empty support")));
            }
            if support.iter().any(|v| !v.is_finite()) || support.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::domain(format!("support of {name} must be finite and strictly increasing")));
            }
            if names.contains(&name) {
                return Err(Error::domain(format!("duplicate variable name {name}")));
            }
            names.push(name);
            supports.push(support);
        }
        Ok(VarSpace { names, supports })
    }

    /// `n` binary covariates `X1..Xn` and a binary consequence `Y`.
    pub fn binary(n: usize) -> Self {
        Self::with_consequence(n, vec![0.0, 1.0])
    }

    /// `n` binary covariates and the given consequence support.
    pub fn with_consequence(n: usize, consequence: Vec<f64>) -> Self {
        let covs = (1..=n).map(|i| (format!("X{i}"), vec![0.0, 1.0])).collect();
        Self::new(covs, ("Y".to_string(), consequence)).expect("valid binary space")
    }

    /// Number of covariates.
    pub fn n(&self) -> usize {
        self.names.len() - 2
    }

    /// Index of the consequence variable.
    pub fn consequence(&self) -> usize {
        self.names.len() - 1
    }

    /// `N = {1,..,n+1}`.
    pub fn outcome_vars(&self) -> VarSet {
        VarSet::range(1, self.n() + 2)
    }

    pub fn covariate_vars(&self) -> VarSet {
        VarSet::range(1, self.n() + 1)
    }

    pub fn name(&self, var: usize) -> &str {
        &self.names[var]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn support(&self, var: usize) -> &[f64] {
        &self.supports[var]
    }

    pub fn dim(&self, var: usize) -> usize {
        self.supports[var].len()
    }

    /// Dimensions of variables `1..=n+1`.
    pub fn outcome_dims(&self) -> Vec<usize> {
        (1..=self.consequence()).map(|v| self.dim(v)).collect()
    }

    pub fn value_index(&self, var: usize, value: f64) -> Option<usize> {
        self.supports[var].iter().position(|&v| (v - value).abs() <= 1e-12 * (1.0 + v.abs()))
    }

    /// Render a set of variables by name, e.g. `{P,T}`.
    pub fn fmt_set(&self, set: VarSet) -> String {
        let parts: Vec<&str> = set.iter().map(|v| self.name(v)).collect();
        format!("{{{}}}", parts.join(","))
    }
}

/// A probability table over a set of variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    vars: VarSet,
    dims: Vec<usize>,
    probs: Vec<f64>,
}

impl Joint {
    pub fn new(vars: VarSet, dims: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        let joint = Self::check_shape(vars, dims, probs)?;
        if let Some(p) = joint.probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::domain(format!("invalid probability {p}")));
        }
        let mass = joint.mass();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Mass { what: format!("joint over {vars}"), mass });
        }
        Ok(joint)
    }

    fn check_shape(vars: VarSet, dims: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if dims.len() != vars.len() {
            return Err(Error::domain(format!("{} dimensions given for {} variables", dims.len(), vars.len())));
        }
        if dims.contains(&0) {
            return Err(Error::domain("empty variable dimension"));
        }
        let size: usize = dims.iter().product();
        if probs.len() != size {
            return Err(Error::domain(format!("table has {} entries, expected {size}", probs.len())));
        }
        Ok(Joint { vars, dims, probs })
    }

    /// Build without mass validation; for internally computed tables.
    pub(crate) fn from_raw(vars: VarSet, dims: Vec<usize>, probs: Vec<f64>) -> Self {
        debug_assert_eq!(dims.len(), vars.len());
        debug_assert_eq!(probs.len(), dims.iter().product::<usize>());
        Joint { vars, dims, probs }
    }

    pub fn from_fn(vars: VarSet, dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let size: usize = dims.iter().product();
        let mut probs = Vec::with_capacity(size);
        let mut x = vec![0; dims.len()];
        if size > 0 {
            loop {
                probs.push(f(&x));
                if !next_assignment(&mut x, &dims) {
                    break;
                }
            }
        }
        Self::new(vars, dims, probs)
    }

    pub fn uniform(vars: VarSet, dims: Vec<usize>) -> Self {
        let size: usize = dims.iter().product();
        Joint::from_raw(vars, dims, vec![1.0 / size as f64; size])
    }

    pub fn vars(&self) -> VarSet {
        self.vars
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Position of `var` within this table's variable list.
    pub fn position(&self, var: usize) -> Option<usize> {
        self.vars.contains(var).then(|| self.vars.intersection(VarSet::from_bits((1u64 << var) - 1)).len())
    }

    pub fn dim(&self, var: usize) -> Option<usize> {
        self.position(var).map(|k| self.dims[k])
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    pub fn index_of(&self, x: &[usize]) -> usize {
        x.iter().zip(&self.dims).fold(0, |acc, (&xi, &d)| acc * d + xi)
    }

    /// Probability of an assignment listed in ascending variable order.
    pub fn prob(&self, x: &[usize]) -> f64 {
        self.probs[self.index_of(x)]
    }

    /// Visit every assignment with its probability.
    pub fn for_each(&self, mut f: impl FnMut(&[usize], f64)) {
        let mut x = vec![0; self.dims.len()];
        for &p in &self.probs {
            f(&x, p);
            next_assignment(&mut x, &self.dims);
        }
    }

    pub fn marginal(&self, target: VarSet) -> Result<Joint> {
        if !target.is_subset(self.vars) {
            return Err(Error::domain(format!("{target} is not a subset of {}", self.vars)));
        }
        let positions: Vec<usize> = target.iter().map(|v| self.position(v).unwrap()).collect();
        let dims: Vec<usize> = positions.iter().map(|&k| self.dims[k]).collect();
        let mut probs = vec![0.0; dims.iter().product()];
        self.for_each(|x, p| {
            let idx = positions.iter().zip(&dims).fold(0, |acc, (&k, &d)| acc * d + x[k]);
            probs[idx] += p;
        });
        Ok(Joint::from_raw(target, dims, probs))
    }

    /// Distribution of `target` given a partial assignment `(var, value index)`.
    pub fn conditional(&self, target: VarSet, given: &[(usize, usize)]) -> Result<Joint> {
        let given_vars: VarSet = given.iter().map(|&(v, _)| v).collect();
        if !given_vars.is_subset(self.vars) || !target.is_subset(self.vars) {
            return Err(Error::domain("conditioning variables outside the table"));
        }
        if !given_vars.is_disjoint(target) {
            return Err(Error::domain("target and conditioning variables overlap"));
        }
        let mut checks = Vec::with_capacity(given.len());
        for &(v, xv) in given {
            let k = self.position(v).unwrap();
            if xv >= self.dims[k] {
                return Err(Error::domain(format!("value index {xv} out of range for variable {v}")));
            }
            checks.push((k, xv));
        }
        let positions: Vec<usize> = target.iter().map(|v| self.position(v).unwrap()).collect();
        let dims: Vec<usize> = positions.iter().map(|&k| self.dims[k]).collect();
        let mut probs = vec![0.0; dims.iter().product()];
        self.for_each(|x, p| {
            if checks.iter().all(|&(k, xv)| x[k] == xv) {
                let idx = positions.iter().zip(&dims).fold(0, |acc, (&k, &d)| acc * d + x[k]);
                probs[idx] += p;
            }
        });
        let mass: f64 = probs.iter().sum();
        if mass <= 0.0 {
            return Err(Error::UndefinedConditional {
                var: target.first().unwrap_or(0),
                config: given.to_vec(),
            });
        }
        probs.iter_mut().for_each(|p| *p /= mass);
        Ok(Joint::from_raw(target, dims, probs))
    }

    /// Support indicator of the marginal over `target`.
    pub fn support(&self, target: VarSet) -> Result<Vec<bool>> {
        Ok(self.marginal(target)?.probs.iter().map(|&p| p > 0.0).collect())
    }

    pub fn max_abs_diff(&self, other: &Joint) -> f64 {
        if self.vars != other.vars || self.dims != other.dims {
            return f64::INFINITY;
        }
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// A lottery over the outcome variables `1..=n+1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Action {
    joint: Joint,
}

impl Action {
    pub fn new(space: &VarSpace, probs: Vec<f64>) -> Result<Self> {
        let joint = Joint::new(space.outcome_vars(), space.outcome_dims(), probs)?;
        Ok(Action { joint })
    }

    /// Build from `(assignment, probability)` pairs, assignments given as
    /// support indices of variables `1..=n+1`. Repeated points accumulate.
    pub fn from_points(space: &VarSpace, points: &[(Vec<usize>, f64)]) -> Result<Self> {
        let dims = space.outcome_dims();
        let mut probs = vec![0.0; dims.iter().product()];
        for (x, p) in points {
            if x.len() != dims.len() || x.iter().zip(&dims).any(|(xi, d)| xi >= d) {
                return Err(Error::domain(format!("assignment {x:?} outside the declared supports")));
            }
            let idx = x.iter().zip(&dims).fold(0, |acc, (&xi, &d)| acc * d + xi);
            probs[idx] += p;
        }
        Self::new(space, probs)
    }

    pub fn from_joint(space: &VarSpace, joint: Joint) -> Result<Self> {
        if joint.vars() != space.outcome_vars() || joint.dims() != space.outcome_dims().as_slice() {
            return Err(Error::domain("action table does not cover the outcome variables"));
        }
        Ok(Action { joint })
    }

    pub(crate) fn from_joint_unchecked(joint: Joint) -> Self {
        Action { joint }
    }

    /// Uniform lottery over the full product of declared supports.
    pub fn uniform(space: &VarSpace) -> Self {
        Action { joint: Joint::uniform(space.outcome_vars(), space.outcome_dims()) }
    }

    pub fn joint(&self) -> &Joint {
        &self.joint
    }

    pub fn probs(&self) -> &[f64] {
        self.joint.probs()
    }

    /// Number of covariates.
    pub fn n(&self) -> usize {
        self.joint.vars().len() - 1
    }

    pub fn marginal(&self, target: VarSet) -> Result<Joint> {
        self.joint.marginal(target)
    }

    pub fn max_abs_diff(&self, other: &Action) -> f64 {
        self.joint.max_abs_diff(&other.joint)
    }

    fn covariates(&self) -> VarSet {
        VarSet::range(1, self.n() + 1)
    }
}

/// A finite set of distinct actions offered together.
#[derive(Clone, Debug, PartialEq)]
pub struct Menu {
    actions: Vec<Action>,
    strict: bool,
}

impl Menu {
    /// With `strict`, every action must share the product covariate support
    /// required of admissible menus.
    pub fn new(actions: Vec<Action>, strict: bool) -> Result<Self> {
        if actions.len() < 2 {
            return Err(Error::domain("a menu needs at least two actions"));
        }
        let shape = (actions[0].joint.vars(), actions[0].joint.dims().to_vec());
        if actions.iter().any(|a| (a.joint.vars(), a.joint.dims().to_vec()) != shape) {
            return Err(Error::domain("menu actions live on different spaces"));
        }
        for i in 0..actions.len() {
            for j in 0..i {
                if actions[i].max_abs_diff(&actions[j]) <= PROB_TOL {
                    return Err(Error::domain(format!("actions {j} and {i} coincide")));
                }
            }
        }
        if strict {
            if let Some(msg) = strict_domain_violation(&actions) {
                return Err(Error::domain(msg));
            }
        }
        Ok(Menu { actions, strict })
    }

    pub fn strict(actions: Vec<Action>) -> Result<Self> {
        Self::new(actions, true)
    }

    pub fn lenient(actions: Vec<Action>) -> Result<Self> {
        Self::new(actions, false)
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn action(&self, i: usize) -> &Action {
        &self.actions[i]
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn n(&self) -> usize {
        self.actions[0].n()
    }

    pub fn in_strict_domain(&self) -> bool {
        strict_domain_violation(&self.actions).is_none()
    }

    /// If `other` holds the same actions up to order, the position in `self`
    /// of each of `other`'s actions.
    pub fn matching(&self, other: &Menu, tol: f64) -> Option<Vec<usize>> {
        if self.len() != other.len() {
            return None;
        }
        let mut used = vec![false; self.len()];
        let mut perm = Vec::with_capacity(other.len());
        for b in &other.actions {
            let k = (0..self.len()).find(|&k| !used[k] && self.actions[k].max_abs_diff(b) <= tol)?;
            used[k] = true;
            perm.push(k);
        }
        Some(perm)
    }
}

/// Returns a description of the first violation of the product-support
/// condition, if any.
fn strict_domain_violation(actions: &[Action]) -> Option<String> {
    let cov = actions[0].covariates();
    let supports: Vec<Vec<bool>> = actions.iter().map(|a| a.joint.support(cov).unwrap()).collect();
    for (ia, a) in actions.iter().enumerate() {
        let marg: Vec<Vec<bool>> = cov.iter().map(|v| a.joint.support(VarSet::singleton(v)).unwrap()).collect();
        let dims: Vec<usize> = marg.iter().map(Vec::len).collect();
        let mut product = Vec::with_capacity(supports[0].len());
        let mut x = vec![0; dims.len()];
        loop {
            product.push(x.iter().enumerate().all(|(k, &xk)| marg[k][xk]));
            if !next_assignment(&mut x, &dims) {
                break;
            }
        }
        for (ib, sb) in supports.iter().enumerate() {
            if *sb != product {
                return Some(format!(
                    "covariate support of action {ib} differs from the product of marginal supports of action {ia}"
                ));
            }
        }
    }
    None
}

/// Choice probabilities over a menu's actions, in menu order.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiceDist {
    probs: Vec<f64>,
}

impl ChoiceDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::domain("choice probabilities must be finite and nonnegative"));
        }
        let mass: f64 = probs.iter().sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::Mass { what: "choice distribution".into(), mass });
        }
        Ok(ChoiceDist { probs })
    }

    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        ChoiceDist { probs }
    }

    pub fn uniform(k: usize) -> Self {
        ChoiceDist { probs: vec![1.0 / k as f64; k] }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn max_abs_diff(&self, other: &ChoiceDist) -> f64 {
        if self.len() != other.len() {
            return f64::INFINITY;
        }
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// `alpha * a + (1 - alpha) * b`.
pub fn mixture(alpha: f64, a: &Action, b: &Action) -> Result<Action> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain(format!("mixture weight {alpha} outside [0,1]")));
    }
    if a.joint.vars() != b.joint.vars() || a.joint.dims() != b.joint.dims() {
        return Err(Error::domain("mixture of actions on different spaces"));
    }
    let probs = a.probs().iter().zip(b.probs()).map(|(pa, pb)| alpha * pa + (1.0 - alpha) * pb).collect();
    Ok(Action::from_joint_unchecked(Joint::from_raw(a.joint.vars(), a.joint.dims().to_vec(), probs)))
}

/// Whether `X_I` is independent of `X_J` within the menu: every action has
/// the same marginal on `I` and factorizes across `I` and `J`.
pub fn independent_within(menu: &Menu, i: VarSet, j: VarSet) -> Result<bool> {
    if !i.is_disjoint(j) {
        return Err(Error::domain(format!("{i} and {j} overlap")));
    }
    let outcome = menu.action(0).joint.vars();
    if !i.union(j).is_subset(outcome) || i.contains(0) || j.contains(0) {
        return Err(Error::domain("independence sets must be subsets of the outcome variables"));
    }
    let mi0 = menu.action(0).marginal(i)?;
    for a in menu.actions() {
        let mi = a.marginal(i)?;
        if mi.max_abs_diff(&mi0) > PROB_TOL {
            return Ok(false);
        }
        let mj = a.marginal(j)?;
        let mij = a.marginal(i.union(j))?;
        let pos_i: Vec<usize> = i.iter().map(|v| mij.position(v).unwrap()).collect();
        let pos_j: Vec<usize> = j.iter().map(|v| mij.position(v).unwrap()).collect();
        let mut ok = true;
        mij.for_each(|x, p| {
            let xi: Vec<usize> = pos_i.iter().map(|&k| x[k]).collect();
            let xj: Vec<usize> = pos_j.iter().map(|&k| x[k]).collect();
            if (p - mi.prob(&xi) * mj.prob(&xj)).abs() > PROB_TOL {
                ok = false;
            }
        });
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The dataset `rho^S(a, y) = sigma(a) a(y)` over variables `0..=n+1`.
pub fn induced_dataset(menu: &Menu, sigma: &ChoiceDist) -> Result<Joint> {
    if sigma.len() != menu.len() {
        return Err(Error::domain("choice distribution does not match the menu"));
    }
    let weights: Vec<f64> = sigma.probs().to_vec();
    Ok(weighted_dataset(menu.actions(), &weights))
}

pub(crate) fn weighted_dataset(actions: &[Action], weights: &[f64]) -> Joint {
    let inner = actions[0].joint();
    let vars = inner.vars().with(0);
    let mut dims = vec![actions.len()];
    dims.extend_from_slice(inner.dims());
    let mut probs = Vec::with_capacity(actions.len() * inner.len());
    for (a, w) in actions.iter().zip(weights) {
        probs.extend(a.probs().iter().map(|p| w * p));
    }
    Joint::from_raw(vars, dims, probs)
}

/// Mix every action with the uniform lottery: `c' = (1 - eps) c + eps d`.
pub fn perturb_menu(menu: &Menu, eps: f64) -> Result<Menu> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::domain(format!("perturbation weight {eps} outside [0,1)")));
    }
    let inner = menu.action(0).joint();
    let d = Action::from_joint_unchecked(Joint::uniform(inner.vars(), inner.dims().to_vec()));
    let actions = menu.actions().iter().map(|c| mixture(1.0 - eps, c, &d)).collect::<Result<Vec<_>>>()?;
    Menu::new(actions, true).map_err(|e| Error::DomainRepairFailed(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> VarSpace {
        VarSpace::binary(2)
    }

    fn act(points: &[([usize; 3], f64)]) -> Action {
        let pts: Vec<(Vec<usize>, f64)> = points.iter().map(|(x, p)| (x.to_vec(), *p)).collect();
        Action::from_points(&space(), &pts).unwrap()
    }

    #[test]
    fn marginal_and_conditional() {
        let a = act(&[([1, 0, 1], 0.5), ([1, 1, 0], 0.25), ([0, 1, 0], 0.25)]);
        let m = a.marginal(VarSet::singleton(3)).unwrap();
        assert_eq!(m.probs(), &[0.5, 0.5]);
        let c = a.joint().conditional(VarSet::singleton(3), &[(1, 1)]).unwrap();
        assert!((c.probs()[1] - 2.0 / 3.0).abs() < 1e-15);
        let empty = a.joint().conditional(VarSet::singleton(3), &[]).unwrap();
        assert_eq!(empty, m);
        let err = a.joint().conditional(VarSet::singleton(3), &[(1, 0), (2, 0)]).unwrap_err();
        assert_eq!(err.kind(), "undefined-conditional");
        assert_eq!(a.marginal(VarSet::from([1, 2, 3])).unwrap(), *a.joint());
        assert_eq!(a.marginal(VarSet::from([0])).unwrap_err().kind(), "domain");
    }

    #[test]
    fn joint_validation() {
        let err = Joint::new(VarSet::from([1]), vec![2], vec![0.5, 0.499]).unwrap_err();
        assert_eq!(err.kind(), "mass");
        assert!(Joint::new(VarSet::from([1]), vec![2], vec![1.5, -0.5]).is_err());
        assert!(Joint::new(VarSet::from([1, 2]), vec![2], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn menu_validation() {
        let a = act(&[([1, 0, 1], 1.0)]);
        let b = act(&[([0, 0, 1], 1.0)]);
        assert!(Menu::lenient(vec![a.clone()]).is_err());
        assert!(Menu::lenient(vec![a.clone(), a.clone()]).is_err());
        assert!(Menu::strict(vec![a.clone(), b.clone()]).is_err());
        let m = Menu::lenient(vec![a, b]).unwrap();
        assert!(!m.in_strict_domain());
        let fixed = perturb_menu(&m, 0.01).unwrap();
        assert!(fixed.is_strict());
        assert_eq!(perturb_menu(&m, 0.0).unwrap_err().kind(), "domain-repair-failed");
        assert_eq!(perturb_menu(&fixed, 0.0).unwrap(), fixed);
    }

    #[test]
    fn mixture_endpoints() {
        let a = act(&[([1, 0, 1], 1.0)]);
        let b = act(&[([0, 0, 1], 1.0)]);
        assert_eq!(mixture(1.0, &a, &b).unwrap(), a);
        assert_eq!(mixture(0.0, &a, &b).unwrap(), b);
        assert!(mixture(1.5, &a, &b).is_err());
    }

    #[test]
    fn independence_within_menu() {
        let product = Action::uniform(&space());
        let other = act(&[([0, 0, 0], 0.25), ([0, 1, 0], 0.25), ([1, 0, 1], 0.25), ([1, 1, 1], 0.25)]);
        let m = Menu::lenient(vec![product.clone(), other]).unwrap();
        assert!(independent_within(&m, VarSet::from([1]), VarSet::from([2])).unwrap());
        assert!(!independent_within(&m, VarSet::from([1]), VarSet::from([3])).unwrap());
        assert!(independent_within(&m, VarSet::from([2]), VarSet::from([1, 3])).unwrap());
        assert!(independent_within(&m, VarSet::from([1]), VarSet::from([1])).is_err());
    }

    #[test]
    fn dataset_slices() {
        let a = act(&[([1, 0, 1], 0.5), ([1, 1, 0], 0.5)]);
        let b = act(&[([0, 0, 1], 1.0)]);
        let m = Menu::lenient(vec![a.clone(), b]).unwrap();
        let sigma = ChoiceDist::new(vec![1.0, 0.0]).unwrap();
        let d = induced_dataset(&m, &sigma).unwrap();
        assert_eq!(d.vars(), VarSet::from([0, 1, 2, 3]));
        let slice = d.conditional(VarSet::from([1, 2, 3]), &[(0, 0)]).unwrap();
        assert_eq!(slice.probs(), a.probs());
        assert_eq!(d.marginal(VarSet::singleton(0)).unwrap().probs(), sigma.probs());
    }
}
