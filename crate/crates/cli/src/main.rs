mod repro;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use subcause::axioms::{
    check_axioms, recover_utility, EscalatingNoiseOracle, HardMaxOracle, MenuSizeLogitOracle, UniformOracle,
};
use subcause::reveal::{describe_menu, DiagnosticKind, Identifier};
use subcause::scr::{escr_choice, solve_equilibria, solve_menu_distribution};
use subcause::{AxiomParams, ChoiceOracle, Dag, Error, Menu, ScrModel, ScrOracle, SeparatorOrder, SolverParams, Verdict, VarSpace};

use subcause_cli::model::ModelFile;
use subcause_cli::report::{sig, sig_all, Report};

#[derive(Parser)]
#[command(name = "subcause", version, about = "Subjective causality: equilibria, identification and axiom checks")]
struct Cli {
    /// Seed for every random battery and multistart.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write all records as a JSON array to this file.
    #[arg(long, global = true, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Also write all records in long CSV format to this file.
    #[arg(long, global = true, value_name = "PATH")]
    csv: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// All Logit personal equilibria of each menu.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        /// Menus to solve (default: every menu in the file).
        #[arg(long = "menu")]
        menus: Vec<String>,
        /// Scale the utility by this intensity.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Recover separators, their order and the revealed DAG from simulated choices.
    Identify {
        #[command(flatten)]
        model: ModelArgs,
        /// Also confirm every verdict holds at all equilibria.
        #[arg(long)]
        check_selection: bool,
    },
    /// Run the axiom battery against an oracle.
    Axioms {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = OracleKind::Scr)]
        oracle: OracleKind,
        #[arg(long, default_value_t = 50)]
        battery: usize,
        /// Known bound on Luce ratios.
        #[arg(long)]
        known_bound: Option<f64>,
    },
    /// Recover the utility table from simulated choices.
    Utility {
        #[command(flatten)]
        model: ModelArgs,
        /// Noise of the chain menus.
        #[arg(long, default_value_t = 1e-3)]
        eta: f64,
    },
    /// Re-run a worked example and check it.
    Repro {
        #[arg(long, value_enum)]
        case: repro::Case,
    },
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    /// DAG to simulate (default: the file's default DAG).
    #[arg(long)]
    dag: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Scr,
    HardMax,
    MenuSize,
    EscalatingNoise,
    Uniform,
}

/// Exit codes.
const CHECK_FAILED: u8 = 1;
const DATA_ERROR: u8 = 3;

enum Outcome {
    Pass,
    CheckFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let mut report = Report::new(cli.json.clone(), cli.csv.clone());
    let result = run(&cli, &mut report);
    let code = match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(CHECK_FAILED),
        Err(e) => {
            report.emit("error", json!({ "kind": e.kind(), "message": e.to_string() }));
            eprintln!("error: {e}");
            match e {
                Error::InconsistentRevealedCauses(_) | Error::NoScr(_) => ExitCode::from(CHECK_FAILED),
                _ => ExitCode::from(DATA_ERROR),
            }
        }
    };
    if let Err(e) = report.finish() {
        eprintln!("error writing report: {e}");
        return ExitCode::from(DATA_ERROR);
    }
    code
}

fn run(cli: &Cli, report: &mut Report) -> subcause::Result<Outcome> {
    let solver = SolverParams { seed: cli.seed, ..SolverParams::default() };
    match &cli.command {
        Command::Solve { model, menus, lambda } => {
            let (file, scr) = load(model, &solver)?;
            let scr = match lambda {
                Some(l) => scr.model.with_intensity(*l),
                None => scr.model,
            };
            solve(&file, &scr, menus, &solver, report)
        }
        Command::Identify { model, check_selection } => {
            let (file, mut oracle) = load(model, &solver)?;
            if *check_selection {
                oracle = oracle.with_selection_check();
            }
            identify(&file.space, &oracle, report)
        }
        Command::Axioms { model, oracle, battery, known_bound } => {
            let (file, scr) = load(model, &solver)?;
            let (space, utility) = (file.space.clone(), file.utility.clone());
            let boxed: Box<dyn ChoiceOracle> = match oracle {
                OracleKind::Scr => Box::new(scr),
                OracleKind::HardMax => Box::new(HardMaxOracle { space, utility }),
                OracleKind::MenuSize => Box::new(MenuSizeLogitOracle { space, utility, base: 1.0 }),
                OracleKind::EscalatingNoise => Box::new(EscalatingNoiseOracle { space, utility }),
                OracleKind::Uniform => Box::new(UniformOracle { space }),
            };
            let params = AxiomParams { battery_size: *battery, seed: cli.seed, known_bound: *known_bound, ..AxiomParams::default() };
            axioms(&file.space, boxed.as_ref(), &params, report)
        }
        Command::Utility { model, eta } => {
            let (file, oracle) = load(model, &solver)?;
            utility(&file, &oracle, *eta, report)
        }
        Command::Repro { case } => repro::run(*case, &solver, report),
    }
}

fn load(args: &ModelArgs, solver: &SolverParams) -> subcause::Result<(ModelFile, ScrOracle)> {
    let file = ModelFile::load(&args.model)?;
    let dag = file.dag(args.dag.as_deref())?.clone();
    let model = ScrModel::new(file.space.clone(), dag, file.utility.clone())?;
    let mut oracle = ScrOracle::new(model);
    oracle.params = solver.clone();
    Ok((file, oracle))
}

fn choice_map(names: &[String], probs: &[f64]) -> Value {
    Value::Object(names.iter().zip(probs).map(|(n, &p)| (n.clone(), sig(p))).collect())
}

fn solve(file: &ModelFile, model: &ScrModel, wanted: &[String], solver: &SolverParams, report: &mut Report) -> subcause::Result<Outcome> {
    let names: Vec<String> = if wanted.is_empty() { file.menus.iter().map(|(n, _)| n.clone()).collect() } else { wanted.to_vec() };
    if names.is_empty() {
        return Err(Error::Parse("the model file declares no menus".into()));
    }
    for name in &names {
        let members = file.menu_members(name)?;
        let menu = file.menu(name)?;
        let set = solve_equilibria(&menu, model, solver)?;
        for (k, e) in set.iter().enumerate() {
            report.emit(
                "equilibrium",
                json!({
                    "menu": name,
                    "index": k,
                    "choice": choice_map(members, e.choice.probs()),
                    "log_probs": sig_all(&e.log_probs),
                    "residual": sig(e.residual),
                    "basin": e.basin,
                }),
            );
        }
        let shown: Vec<String> = set.iter().map(|e| format!("{:.6}", e.choice.get(0))).collect();
        eprintln!("{name}: {} equilibria, P({}) = {}", set.len(), members[0], shown.join(", "));
    }
    if let Some((menu, q)) = file.dataset_joint()? {
        let d = file.dataset.as_ref().unwrap();
        let c = escr_choice(&menu, &q, model)?;
        report.emit("escr", json!({ "menu": d.menu, "choice": choice_map(file.menu_members(&d.menu)?, c.probs()) }));
    }
    if let Some(weights) = &file.menu_weights {
        let mu = weights.iter().map(|(m, w)| Ok((file.menu(m)?, *w))).collect::<subcause::Result<Vec<(Menu, f64)>>>()?;
        for (k, profile) in solve_menu_distribution(&mu, model, solver)?.iter().enumerate() {
            for ((m, _), c) in weights.iter().zip(profile) {
                report.emit("menu-distribution", json!({ "profile": k, "menu": m, "choice": choice_map(file.menu_members(m)?, c.probs()) }));
            }
        }
    }
    Ok(Outcome::Pass)
}

fn set_names(space: &VarSpace, sets: &[subcause::VarSet]) -> Value {
    Value::Array(sets.iter().map(|s| Value::Array(s.iter().map(|v| json!(space.name(v))).collect())).collect())
}

fn edge_names(space: &VarSpace, edges: &[(usize, usize)]) -> Value {
    Value::Array(edges.iter().map(|&(a, b)| json!([space.name(a), space.name(b)])).collect())
}

fn fmt_order(space: &VarSpace, order: &SeparatorOrder) -> String {
    let parts: Vec<String> = order.sets().iter().map(|s| space.fmt_set(*s)).collect();
    format!("({})", parts.join(","))
}

fn identify(space: &VarSpace, oracle: &dyn ChoiceOracle, report: &mut Report) -> subcause::Result<Outcome> {
    let ident = Identifier::new(oracle);
    let result = ident.identify();
    for (k, q) in ident.transcript().iter().enumerate() {
        let kind = match q.kind {
            DiagnosticKind::Separation { set } => json!({ "test": "separation", "set": space.fmt_set(set) }),
            DiagnosticKind::Ordering { candidate, next } => {
                json!({ "test": "ordering", "candidate": space.fmt_set(candidate), "next": space.fmt_set(next) })
            }
        };
        report.emit(
            "query",
            json!({
                "index": k,
                "diagnostic": kind,
                "choice": sig_all(q.choice.probs()),
                "indifferent": q.indifferent,
                "selection_invariant": q.selection_invariant,
                "menu": describe_menu(space, &q.menu),
            }),
        );
    }
    let id = result?;
    let dag: &Dag = &id.revealed_dag;
    report.emit(
        "identification",
        json!({
            "separators": set_names(space, &id.separators),
            "order": set_names(space, id.order.sets()),
            "revealed_causes": edge_names(space, &id.revealed_causes),
            "revealed_dag": edge_names(space, &dag.edges()),
            "queries": id.transcript.len(),
        }),
    );
    eprintln!("order {}", fmt_order(space, &id.order));
    let causes: Vec<String> = id.revealed_causes.iter().map(|&(a, b)| format!("{}->{}", space.name(a), space.name(b))).collect();
    eprintln!("revealed causes {}", causes.join(" "));
    Ok(Outcome::Pass)
}

fn axioms(space: &VarSpace, oracle: &dyn ChoiceOracle, params: &AxiomParams, report: &mut Report) -> subcause::Result<Outcome> {
    let r = check_axioms(oracle, params)?;
    for res in &r.results {
        let witness = res.witness.as_ref().map(|w| {
            json!({ "menu": describe_menu(space, &w.menu), "choice": sig_all(&w.choice), "detail": w.detail })
        });
        report.emit(
            "axiom",
            json!({
                "axiom": res.axiom.name(),
                "verdict": res.verdict.name(),
                "finite_approximation": res.finite_approximation,
                "flags": res.flags,
                "detail": res.detail,
                "witness": witness,
            }),
        );
        eprintln!("{:<8} {:<28} {}", res.verdict.name(), res.axiom.name(), res.detail);
    }
    report.emit(
        "axiom-summary",
        json!({
            "luce_supremum": sig(r.luce_supremum),
            "order": r.order.as_ref().map(|o| set_names(space, o.sets())),
            "failures": r.failures().count(),
        }),
    );
    Ok(if r.results.iter().any(|x| x.verdict == Verdict::Fail) { Outcome::CheckFailed } else { Outcome::Pass })
}

fn utility(file: &ModelFile, oracle: &ScrOracle, eta: f64, report: &mut Report) -> subcause::Result<Outcome> {
    let space = &file.space;
    let order = Identifier::new(oracle).identify()?.order;
    let y = space.consequence();
    let grid: Vec<usize> = (0..space.dim(y)).collect();
    let rec = recover_utility(oracle, &order, &grid, eta)?;
    let truth = oracle.model.utility.normalized();
    for (k, &g) in rec.grid.iter().enumerate() {
        report.emit(
            "utility",
            json!({
                "value": sig(space.support(y)[g]),
                "recovered": sig(rec.values[k]),
                "model": sig(truth.values()[g] * oracle.model.intensity),
            }),
        );
    }
    report.emit("utility-fit", json!({ "equations": rec.equations, "residual": sig(rec.residual) }));
    let shown: Vec<String> = rec.values.iter().map(|v| format!("{v:.6}")).collect();
    eprintln!("recovered utility [{}] from {} equations", shown.join(", "), rec.equations);
    Ok(Outcome::Pass)
}
