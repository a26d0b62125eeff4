//! The JSON model file: variables, named DAGs, utility, named actions and
//! menus, plus optional dataset and menu weights.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use subcause::probspace::perturb_menu;
use subcause::scr::dataset_from_weights;
use subcause::{Action, Dag, Error, Joint, Menu, Result, Utility, VarSpace};

pub const SCHEMA_VERSION: u32 = 1;

/// On-disk layout. Probabilities and utilities are strings holding decimals
/// (`"0.25"`, `"1e-4"`) or rationals (`"1/3"`); bare JSON numbers are also read.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    schema: u32,
    variables: Vec<RawVariable>,
    dags: BTreeMap<String, Vec<[String; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    default_dag: Option<String>,
    utility: Vec<Value>,
    actions: BTreeMap<String, Vec<RawEntry>>,
    #[serde(default)]
    menus: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    perturbation: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dataset: Option<RawDataset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    menu_weights: Option<BTreeMap<String, Value>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariable {
    name: String,
    role: Role,
    support: Vec<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Role {
    Covariate,
    Consequence,
}

/// One point of an action's lottery: support values of the covariates and
/// the consequence, in declaration order.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    at: Vec<Value>,
    p: Value,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    menu: String,
    weights: Vec<Value>,
}

/// Exogenous dataset induced by `menu` with the given action weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub menu: String,
    pub weights: Vec<f64>,
}

/// Named DAGs, actions and menus are kept sorted by name.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub space: VarSpace,
    pub dags: Vec<(String, Dag)>,
    pub default_dag: Option<String>,
    pub utility: Utility,
    pub actions: Vec<(String, Action)>,
    pub menus: Vec<(String, Vec<String>)>,
    /// Mixing weight toward the uniform lottery applied before solving.
    pub perturbation: Option<f64>,
    pub dataset: Option<Dataset>,
    pub menu_weights: Option<Vec<(String, f64)>>,
}

/// Parse a decimal or `a/b` rational from a string or JSON number.
pub fn parse_number(v: &Value, field: &str) -> Result<f64> {
    let x = match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| Error::Parse(format!("{field}: {n} is not representable")))?,
        Value::String(s) => parse_str(s).ok_or_else(|| Error::Parse(format!("{field}: cannot read {s:?} as a number")))?,
        other => return Err(Error::Parse(format!("{field}: expected a number or numeric string, found {other}"))),
    };
    if !x.is_finite() {
        return Err(Error::Parse(format!("{field}: value is not finite")));
    }
    Ok(x)
}

fn parse_str(s: &str) -> Option<f64> {
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b) = (a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?);
            (b != 0.0).then(|| a / b)
        }
        None => s.parse().ok(),
    }
}

fn number(x: f64) -> Value {
    Value::String(format!("{x}"))
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawModel =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("line {} column {}: {e}", e.line(), e.column())))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawModel) -> Result<Self> {
        if raw.schema != SCHEMA_VERSION {
            return Err(Error::Parse(format!("schema: version {} is not supported (expected {SCHEMA_VERSION})", raw.schema)));
        }
        let mut covariates = Vec::new();
        let mut consequence = None;
        for (k, var) in raw.variables.iter().enumerate() {
            let support = var
                .support
                .iter()
                .enumerate()
                .map(|(j, v)| parse_number(v, &format!("variables[{k}].support[{j}]")))
                .collect::<Result<Vec<_>>>()?;
            match var.role {
                Role::Covariate if consequence.is_some() => {
                    return Err(Error::Parse(format!("variables[{k}]: covariates must precede the consequence")))
                }
                Role::Covariate => covariates.push((var.name.clone(), support)),
                Role::Consequence if consequence.is_some() => {
                    return Err(Error::Parse(format!("variables[{k}]: only one consequence is allowed")))
                }
                Role::Consequence => consequence = Some((var.name.clone(), support)),
            }
        }
        let consequence = consequence.ok_or_else(|| Error::Parse("variables: no consequence declared".into()))?;
        if consequence.0 == "action" || covariates.iter().any(|(n, _)| n == "action") {
            return Err(Error::Parse("variables: the name \"action\" is reserved for node 0".into()));
        }
        let space = VarSpace::new(covariates, consequence)?;

        let mut dags = Vec::new();
        for (name, edges) in &raw.dags {
            let idx = |v: &str| {
                space.index_of(v).ok_or_else(|| Error::Parse(format!("dags.{name}: unknown variable {v:?}")))
            };
            let edges = edges.iter().map(|[a, b]| Ok((idx(a)?, idx(b)?))).collect::<Result<Vec<_>>>()?;
            dags.push((name.clone(), Dag::new(space.n() + 2, &edges)?));
        }
        if let Some(d) = &raw.default_dag {
            if !raw.dags.contains_key(d) {
                return Err(Error::Parse(format!("default_dag: no DAG named {d:?}")));
            }
        }

        let utility = raw.utility.iter().enumerate().map(|(j, v)| parse_number(v, &format!("utility[{j}]"))).collect::<Result<_>>()?;
        let utility = Utility::new(utility)?;
        if utility.len() != space.dim(space.consequence()) {
            return Err(Error::Parse(format!(
                "utility: {} values for a consequence with {} support points",
                utility.len(),
                space.dim(space.consequence())
            )));
        }

        let mut actions = Vec::new();
        for (name, entries) in &raw.actions {
            actions.push((name.clone(), parse_action(&space, name, entries)?));
        }
        let find = |field: &str, a: &str| {
            actions.iter().position(|(n, _)| n == a).ok_or_else(|| Error::Parse(format!("{field}: unknown action {a:?}")))
        };
        let mut menus = Vec::new();
        for (name, members) in &raw.menus {
            for a in members {
                find(&format!("menus.{name}"), a)?;
            }
            if members.len() < 2 {
                return Err(Error::Parse(format!("menus.{name}: a menu needs at least two actions")));
            }
            menus.push((name.clone(), members.clone()));
        }

        let perturbation = raw.perturbation.as_ref().map(|v| parse_number(v, "perturbation")).transpose()?;
        if let Some(eps) = perturbation {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::Parse(format!("perturbation: {eps} outside (0, 1)")));
            }
        }
        let has_menu = |field: &str, m: &str| {
            if raw.menus.contains_key(m) {
                Ok(())
            } else {
                Err(Error::Parse(format!("{field}: unknown menu {m:?}")))
            }
        };
        let dataset = match &raw.dataset {
            Some(d) => {
                has_menu("dataset.menu", &d.menu)?;
                let weights = d
                    .weights
                    .iter()
                    .enumerate()
                    .map(|(j, v)| parse_number(v, &format!("dataset.weights[{j}]")))
                    .collect::<Result<Vec<_>>>()?;
                if weights.len() != raw.menus[&d.menu].len() {
                    return Err(Error::Parse("dataset.weights: one weight per menu action is required".into()));
                }
                let mass: f64 = weights.iter().sum();
                if (mass - 1.0).abs() > 1e-12 {
                    return Err(Error::Mass { what: "dataset weights".into(), mass });
                }
                Some(Dataset { menu: d.menu.clone(), weights })
            }
            None => None,
        };
        let menu_weights = match &raw.menu_weights {
            Some(w) => {
                let mut out = Vec::new();
                for (m, v) in w {
                    has_menu("menu_weights", m)?;
                    out.push((m.clone(), parse_number(v, &format!("menu_weights.{m}"))?));
                }
                let mass: f64 = out.iter().map(|(_, w)| w).sum();
                if (mass - 1.0).abs() > 1e-12 {
                    return Err(Error::Mass { what: "menu weights".into(), mass });
                }
                Some(out)
            }
            None => None,
        };

        Ok(ModelFile { space, dags, default_dag: raw.default_dag, utility, actions, menus, perturbation, dataset, menu_weights })
    }

    pub fn to_json(&self) -> String {
        let space = &self.space;
        let y = space.consequence();
        let variables = (1..=y)
            .map(|v| RawVariable {
                name: space.name(v).to_string(),
                role: if v == y { Role::Consequence } else { Role::Covariate },
                support: space.support(v).iter().map(|&x| number(x)).collect(),
            })
            .collect();
        let dags = self
            .dags
            .iter()
            .map(|(name, d)| {
                let edges = d.edges().into_iter().map(|(a, b)| [space.name(a).to_string(), space.name(b).to_string()]).collect();
                (name.clone(), edges)
            })
            .collect();
        let actions = self
            .actions
            .iter()
            .map(|(name, a)| {
                let mut entries = Vec::new();
                a.joint().for_each(|x, p| {
                    if p > 0.0 {
                        let at = x.iter().enumerate().map(|(k, &xi)| number(space.support(k + 1)[xi])).collect();
                        entries.push(RawEntry { at, p: number(p) });
                    }
                });
                (name.clone(), entries)
            })
            .collect();
        let raw = RawModel {
            schema: SCHEMA_VERSION,
            variables,
            dags,
            default_dag: self.default_dag.clone(),
            utility: self.utility.values().iter().map(|&u| number(u)).collect(),
            actions,
            menus: self.menus.iter().cloned().collect(),
            perturbation: self.perturbation.map(number),
            dataset: self.dataset.as_ref().map(|d| RawDataset { menu: d.menu.clone(), weights: d.weights.iter().map(|&w| number(w)).collect() }),
            menu_weights: self.menu_weights.as_ref().map(|w| w.iter().map(|(m, x)| (m.clone(), number(*x))).collect()),
        };
        serde_json::to_string_pretty(&raw).expect("model serializes") + "\n"
    }

    pub fn dag(&self, name: Option<&str>) -> Result<&Dag> {
        let name = match name.or(self.default_dag.as_deref()) {
            Some(n) => n,
            None if self.dags.len() == 1 => &self.dags[0].0,
            None => return Err(Error::Parse("several DAGs are declared; choose one with --dag".into())),
        };
        self.dags
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d)
            .ok_or_else(|| Error::Parse(format!("no DAG named {name:?}")))
    }

    pub fn action(&self, name: &str) -> Result<&Action> {
        self.actions.iter().find(|(n, _)| n == name).map(|(_, a)| a).ok_or_else(|| Error::Parse(format!("unknown action {name:?}")))
    }

    /// The named menu with the file's perturbation applied.
    pub fn menu(&self, name: &str) -> Result<Menu> {
        let (_, members) =
            self.menus.iter().find(|(n, _)| n == name).ok_or_else(|| Error::Parse(format!("unknown menu {name:?}")))?;
        let actions = members.iter().map(|a| self.action(a).cloned()).collect::<Result<Vec<_>>>()?;
        let menu = Menu::lenient(actions)?;
        match self.perturbation {
            Some(eps) => perturb_menu(&menu, eps),
            None => Ok(menu),
        }
    }

    pub fn menu_members(&self, name: &str) -> Result<&[String]> {
        self.menus
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m.as_slice())
            .ok_or_else(|| Error::Parse(format!("unknown menu {name:?}")))
    }

    /// The exogenous dataset over `0..=n+1`, if declared.
    pub fn dataset_joint(&self) -> Result<Option<(Menu, Joint)>> {
        match &self.dataset {
            Some(d) => {
                let menu = self.menu(&d.menu)?;
                let q = dataset_from_weights(&menu, &d.weights);
                Ok(Some((menu, q)))
            }
            None => Ok(None),
        }
    }
}

fn parse_action(space: &VarSpace, name: &str, entries: &[RawEntry]) -> Result<Action> {
    let vars = space.outcome_vars().to_vec();
    let mut points = Vec::with_capacity(entries.len());
    for (k, e) in entries.iter().enumerate() {
        let field = format!("actions.{name}[{k}]");
        if e.at.len() != vars.len() {
            return Err(Error::Parse(format!("{field}.at: {} values for {} variables", e.at.len(), vars.len())));
        }
        let mut x = Vec::with_capacity(vars.len());
        for (&v, raw) in vars.iter().zip(&e.at) {
            let value = parse_number(raw, &format!("{field}.at"))?;
            let i = space
                .value_index(v, value)
                .ok_or_else(|| Error::Parse(format!("{field}.at: {value} is not in the support of {}", space.name(v))))?;
            x.push(i);
        }
        let p = parse_number(&e.p, &format!("{field}.p"))?;
        if p < 0.0 {
            return Err(Error::Parse(format!("{field}.p: negative probability {p}")));
        }
        points.push((x, p));
    }
    Action::from_points(space, &points).map_err(|e| match e {
        Error::Mass { mass, .. } => Error::Mass { what: format!("action {name}"), mass },
        other => other,
    })
}
