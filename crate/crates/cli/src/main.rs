use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use omega_cop::eval::evaluate_mixture;
use omega_cop::fixtures::{self, Fixture};
use omega_cop::graph::decompose;
use omega_cop::lagrange::{check_feasibility_gap, lambda_bound_for, solve_weighted};
use omega_cop::learn::{to_csv, Experiment};
use omega_cop::lp::{build_weighted, solve};
use omega_cop::rational::{is_prob, one, zero};
use omega_cop::rm::{
    average_over_seeds, simulate_limit_average, trace_csv, CommitmentPolicy, ExtendedPolicy,
    IndexCache,
};
use omega_cop::{
    build_product, fmt_rat, parse_rat, Error, LabeledMdp, MixturePolicy, ProductMdp,
    RabinAutomaton, Rat,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "omega-cop",
    version,
    about = "Constrained planning and learning for omega-regular objectives"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute an optimal policy for the threshold and report its exact values.
    Plan {
        #[command(flatten)]
        problem: Problem,
        /// Where to write the policy JSON.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exactly evaluate a policy file.
    Evaluate {
        #[command(flatten)]
        problem: Problem,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Explore with resets, replan on the estimated model and emit a convergence CSV.
    Learn {
        #[command(flatten)]
        problem: Problem,
        /// Seeds 0..N.
        #[arg(long, default_value_t = 20, conflicts_with = "seed")]
        seeds: u64,
        /// Run a single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Largest sample count; the default schedule is every power of two up to it.
        #[arg(long, default_value_t = 1 << 17)]
        steps: u64,
        /// Explicit comma-separated sample counts.
        #[arg(long, value_delimiter = ',')]
        schedule: Option<Vec<u64>>,
        #[arg(long, default_value_t = 10)]
        reset_period: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a policy through the reward-machine translation.
    Rm {
        #[command(flatten)]
        problem: Problem,
        /// Policy file; the planner optimum is used when absent.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        #[arg(long, default_value_t = 10_000)]
        horizon: usize,
        /// Never take committal actions.
        #[arg(long)]
        never_commit: bool,
        /// Write the step trace of seed 0 as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weighted objective `P[obj] + λ P[con]` and the feasibility bound.
    Lagrange {
        #[command(flatten)]
        problem: Problem,
        /// Comma-separated multipliers; defaults to the bound computed from the model.
        #[arg(long, value_delimiter = ',')]
        lambda: Option<Vec<String>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Problem {
    /// Built-in instance: fig1, fig2, fig3-product, appendix-c, ex-dep, single-mec.
    #[arg(long, conflicts_with_all = ["mdp", "objective", "constraint"])]
    fixture: Option<String>,
    #[arg(long, requires_all = ["objective", "constraint"])]
    mdp: Option<PathBuf>,
    #[arg(long)]
    objective: Option<PathBuf>,
    #[arg(long)]
    constraint: Option<PathBuf>,
    /// Exact rational "num/den"; defaults to the fixture's threshold.
    #[arg(long)]
    threshold: Option<String>,
}

struct Loaded {
    mdp: LabeledMdp,
    objective: RabinAutomaton,
    constraint: RabinAutomaton,
    product: ProductMdp,
    threshold: Rat,
    /// Acceptance is given over product states, not through the automata.
    synthetic: bool,
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path)
        .map_err(Error::Io)
        .with_context(|| format!("reading {}", path.display()))
}

fn read_json(path: &Path) -> anyhow::Result<Value> {
    let text = read(path)?;
    serde_json::from_str(&text)
        .map_err(Error::from)
        .with_context(|| format!("parsing {}", path.display()))
}

fn parse_threshold(s: &str) -> anyhow::Result<Rat> {
    let p = parse_rat(s)?;
    if !is_prob(&p) {
        return Err(Error::Precondition(format!("threshold {s} is outside [0, 1]")).into());
    }
    Ok(p)
}

impl Problem {
    fn load(&self) -> anyhow::Result<Loaded> {
        let threshold = self.threshold.as_deref().map(parse_threshold).transpose()?;
        if let Some(name) = &self.fixture {
            let f: Fixture = fixtures::by_name(name)?;
            let synthetic = matches!(f.name.as_str(), "fig3-product" | "single-mec");
            return Ok(Loaded {
                threshold: threshold.unwrap_or(f.threshold),
                mdp: f.mdp,
                objective: f.objective,
                constraint: f.constraint,
                product: f.product,
                synthetic,
            });
        }
        let (Some(m), Some(o), Some(c)) = (&self.mdp, &self.objective, &self.constraint) else {
            return Err(Error::Precondition(
                "give --fixture or all of --mdp, --objective, --constraint".into(),
            )
            .into());
        };
        let mdp = LabeledMdp::from_json_validated(&read(m)?)
            .with_context(|| format!("loading {}", m.display()))?;
        let objective = RabinAutomaton::from_json(&read(o)?)
            .with_context(|| format!("loading {}", o.display()))?;
        let constraint = RabinAutomaton::from_json(&read(c)?)
            .with_context(|| format!("loading {}", c.display()))?;
        let product = build_product(&mdp, &objective, &constraint)?;
        let threshold = threshold.ok_or_else(|| {
            Error::Precondition("--threshold is required with model files".into())
        })?;
        Ok(Loaded {
            mdp,
            objective,
            constraint,
            product,
            threshold,
            synthetic: false,
        })
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(Error::Io)
            .with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialise");
    s.push('\n');
    s
}

fn load_policy(path: &Path, product: &ProductMdp) -> anyhow::Result<MixturePolicy> {
    let v = read_json(path)?;
    MixturePolicy::from_json(product, &v)
        .with_context(|| format!("loading policy {}", path.display()))
}

fn cmd_plan(
    problem: &Problem,
    policy_out: Option<&Path>,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let l = problem.load()?;
    let pl = omega_cop::synthesis::plan(&l.product, &l.threshold)?;
    let r = evaluate_mixture(&l.product, &pl.policy)?;
    if let Some(path) = policy_out {
        fs::write(path, pretty(&pl.policy.to_json(&l.product)))
            .map_err(Error::Io)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let mut report = r.to_json(&l.product);
    report["value"] = json!(fmt_rat(&pl.solution.value));
    report["threshold"] = json!(fmt_rat(&l.threshold));
    report["lambda"] = json!(fmt_rat(&pl.policy.lambda));
    emit(out, &pretty(&report))
}

fn cmd_evaluate(problem: &Problem, policy: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let l = problem.load()?;
    let m = load_policy(policy, &l.product)?;
    let r = evaluate_mixture(&l.product, &m)?;
    let mut report = r.to_json(&l.product);
    if problem.threshold.is_some() || problem.fixture.is_some() {
        report["meets_threshold"] = json!(r.constraint >= l.threshold);
    }
    emit(out, &pretty(&report))
}

fn cmd_learn(
    problem: &Problem,
    seeds: Vec<u64>,
    steps: u64,
    schedule: Option<Vec<u64>>,
    reset_period: u64,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let l = problem.load()?;
    if l.synthetic {
        return Err(Error::Precondition(
            "learning needs an MDP with automata; this fixture is given at product level".into(),
        )
        .into());
    }
    let schedule = schedule.unwrap_or_else(|| {
        (0..64)
            .map(|e| 1u64 << e)
            .take_while(|&k| k <= steps)
            .collect()
    });
    if schedule.contains(&0) {
        return Err(Error::Precondition("schedule entries must be positive".into()).into());
    }
    if reset_period == 0 {
        return Err(Error::Precondition("reset period must be positive".into()).into());
    }
    let exp = Experiment {
        mdp: &l.mdp,
        objective: &l.objective,
        constraint: &l.constraint,
        threshold: l.threshold.clone(),
        schedule,
        reset_period,
    };
    let records = if exp.schedule.is_empty() {
        Vec::new()
    } else {
        exp.run(&seeds)?
    };
    emit(out, &to_csv(&records))
}

#[allow(clippy::too_many_arguments)]
fn cmd_rm(
    problem: &Problem,
    policy: Option<&Path>,
    seeds: u64,
    episodes: usize,
    horizon: usize,
    never_commit: bool,
    trace: Option<&Path>,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let l = problem.load()?;
    if horizon == 0 || episodes == 0 || seeds == 0 {
        return Err(
            Error::Precondition("seeds, episodes and horizon must be positive".into()).into(),
        );
    }
    let m = match policy {
        Some(p) => load_policy(p, &l.product)?,
        None => omega_cop::synthesis::plan(&l.product, &l.threshold)?.policy,
    };
    let mut cp = CommitmentPolicy::new(&l.product, &m)?;
    if never_commit {
        cp = cp.never_commit();
    }
    let seed_list: Vec<u64> = (0..seeds).collect();
    let (a, b) = average_over_seeds(&l.product, &cp, &seed_list, episodes, horizon)?;
    if let Some(path) = trace {
        let cache = IndexCache::new(&l.product);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = cp.clone();
        p.start(&mut rng);
        let mut rows = Vec::new();
        simulate_limit_average(
            &l.product,
            &cache,
            &mut p,
            horizon,
            &mut rng,
            Some(&mut rows),
        )?;
        fs::write(path, trace_csv(&rows))
            .map_err(Error::Io)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let report = json!({
        "average_objective": a,
        "average_constraint": b,
        "seeds": seeds,
        "episodes": episodes,
        "horizon": horizon,
        "commits": !never_commit,
    });
    emit(out, &pretty(&report))
}

fn cmd_lagrange(
    problem: &Problem,
    lambdas: Option<&[String]>,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let l = problem.load()?;
    let dec = decompose(&l.product);
    let bound = lambda_bound_for(&l.product).ok();
    let lambdas: Vec<Rat> = match lambdas {
        Some(ls) => ls.iter().map(|s| parse_rat(s)).collect::<Result<_, _>>()?,
        None => vec![bound.clone().ok_or_else(|| {
            Error::Precondition("no multiplier given and no bound available".into())
        })?],
    };
    let almost_sure = solve(&build_weighted(&dec, &l.product, &zero(), &one()))?.value == one();
    if !almost_sure {
        eprintln!("warning: no policy satisfies the constraint almost surely; the bound 1 - 1/lambda need not hold");
    }
    let mut reports = Vec::new();
    for lambda in &lambdas {
        let sol = solve_weighted(&l.product, &dec, lambda)?;
        let rep = check_feasibility_gap(&l.product, &sol.policy, lambda)?;
        if almost_sure && !rep.holds() {
            eprintln!("warning: bound violated at lambda {}", fmt_rat(lambda));
        }
        let mut v = rep.to_json();
        v["policy"] = sol.policy.to_json(&l.product);
        reports.push(v);
    }
    let report = json!({
        "lambda_bound": bound.as_ref().map(fmt_rat),
        "almost_sure_feasible": almost_sure,
        "results": reports,
    });
    emit(out, &pretty(&report))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Plan {
            problem,
            policy,
            out,
        } => cmd_plan(problem, policy.as_deref(), out.as_deref()),
        Command::Evaluate {
            problem,
            policy,
            out,
        } => cmd_evaluate(problem, policy, out.as_deref()),
        Command::Learn {
            problem,
            seeds,
            seed,
            steps,
            schedule,
            reset_period,
            out,
        } => {
            let seeds = match seed {
                Some(s) => vec![*s],
                None => (0..*seeds).collect(),
            };
            cmd_learn(
                problem,
                seeds,
                *steps,
                schedule.clone(),
                *reset_period,
                out.as_deref(),
            )
        }
        Command::Rm {
            problem,
            policy,
            seeds,
            episodes,
            horizon,
            never_commit,
            trace,
            out,
        } => cmd_rm(
            problem,
            policy.as_deref(),
            *seeds,
            *episodes,
            *horizon,
            *never_commit,
            trace.as_deref(),
            out.as_deref(),
        ),
        Command::Lagrange {
            problem,
            lambda,
            out,
        } => cmd_lagrange(problem, lambda.as_deref(), out.as_deref()),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Infeasible) => EXIT_INFEASIBLE,
        Some(Error::Unbounded) => 1,
        _ => EXIT_VALIDATION,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
