mod bench;
mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand};
use log::info;
use marlx_core::abstraction::{build_abstraction, BuildOptions, Normalization};
use marlx_core::boolmin::{minimize_with, Budget, MinimizeError, Minterm};
use marlx_core::domain::file::DomainFile;
use marlx_core::domain::{AbstractJointState, Domain};
use marlx_core::envs::{domain_by_id, read_trace, simulate, ScriptedPolicy, TraceReader, TraceWriter, DOMAIN_IDS};
use marlx_core::nlg::{render, PhraseMap};
use marlx_core::query::{answer, Answer, Method, Outcome, Query, QueryKind, QueryOptions};
use marlx_core::summarize::{chart_from_path, most_probable_path, render_chart, ChartFormat};
use marlx_core::PolicyAbstraction;

const EXIT_CONFIG: u8 = 2;
const EXIT_TIMEOUT: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "marlx", version, about = "Summarize and explain multi-agent policies")]
struct Cli {
    /// TOML file supplying default values for any flag.
    #[arg(long, global = true, value_name = "FILE", env = "MARLX_CONFIG")]
    config: Option<PathBuf>,

    /// Seed for every source of randomness.
    #[arg(long, global = true, default_value_t = 42, env = "MARLX_SEED")]
    seed: u64,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the scripted agents and write a trace.
    Simulate(SimulateArgs),
    /// Build a policy abstraction from a trace.
    Abstract(AbstractArgs),
    /// Most probable path and summary chart of an abstraction.
    Summarize(SummarizeArgs),
    /// Answer a when / whynot / what query.
    Explain(ExplainArgs),
    /// Timing table over whole domains.
    Bench(bench::BenchArgs),
    /// Inspect built-in domains.
    #[command(subcommand)]
    Domain(DomainCommand),
    #[command(hide = true)]
    BoolminDebug(BoolminArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Built-in domain id, e.g. sr3, rware4, lbf9.
    #[arg(long, env = "MARLX_DOMAIN")]
    domain: String,
    #[arg(long, default_value_t = 100, env = "MARLX_EPISODES")]
    episodes: u64,
    #[arg(long, default_value_t = 200, env = "MARLX_MAX_STEPS")]
    max_steps: u64,
    /// Trace file; stdout when omitted.
    #[arg(long, env = "MARLX_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AbstractArgs {
    #[arg(long, env = "MARLX_TRACE")]
    trace: PathBuf,
    /// Domain id or domain file; defaults to the id recorded in the trace.
    #[arg(long, env = "MARLX_DOMAIN")]
    domain: Option<String>,
    #[arg(long, env = "MARLX_OUT")]
    out: PathBuf,
    /// state | state-action
    #[arg(long, default_value = "state", env = "MARLX_NORMALIZATION")]
    normalization: Normalization,
    /// Accept episodes that start in different abstract states.
    #[arg(long, env = "MARLX_VIRTUAL_INIT")]
    virtual_init: bool,
}

#[derive(Args, Debug)]
struct SummarizeArgs {
    #[arg(long, env = "MARLX_ABSTRACTION")]
    abstraction: PathBuf,
    #[arg(long, env = "MARLX_DOMAIN")]
    domain: String,
    /// chart | csv
    #[arg(long, default_value = "chart", env = "MARLX_FORMAT")]
    format: ChartFormat,
    /// Also print the most probable path.
    #[arg(long, env = "MARLX_SHOW_PATH")]
    show_path: bool,
    #[arg(long, env = "MARLX_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExplainArgs {
    #[arg(long, env = "MARLX_ABSTRACTION")]
    abstraction: PathBuf,
    #[arg(long, env = "MARLX_DOMAIN")]
    domain: String,
    /// when | whynot | what
    #[arg(long = "type", env = "MARLX_TYPE")]
    kind: QueryKind,
    /// Agent names; required for what queries.
    #[arg(long, value_delimiter = ',', env = "MARLX_AGENTS")]
    agents: Vec<String>,
    /// `agent:action` pairs for when / whynot queries.
    #[arg(long, value_delimiter = ',', env = "MARLX_ACTIONS")]
    actions: Vec<String>,
    /// State index, or per-agent bits `b1,b2,...` (prefix `bits=` for one agent).
    #[arg(long, env = "MARLX_STATE")]
    state: Option<String>,
    /// Predicate ids for what queries.
    #[arg(long, value_delimiter = ',', env = "MARLX_PREDICATES")]
    predicates: Vec<String>,
    /// norf | withrf
    #[arg(long, default_value = "withrf", env = "MARLX_METHOD")]
    method: Method,
    /// Seconds before minimization gives up.
    #[arg(long, default_value_t = 3600.0, env = "MARLX_TIMEOUT")]
    timeout: f64,
    /// Also print the raw formula.
    #[arg(long, env = "MARLX_EMIT_DNF")]
    emit_dnf: bool,
    #[arg(long, env = "MARLX_OUT")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum DomainCommand {
    /// List built-in domain ids.
    List,
    /// Print a built-in domain as a domain file.
    Export {
        #[arg(long, env = "MARLX_DOMAIN")]
        domain: String,
        #[arg(long, env = "MARLX_OUT")]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct BoolminArgs {
    #[arg(long)]
    vars: usize,
    /// Bit strings, variable 0 first.
    #[arg(long, value_delimiter = ',')]
    ones: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    zeros: Vec<String>,
    #[arg(long, default_value_t = 3600.0)]
    timeout: f64,
}

/// Built-in id, or a path to a domain file.
pub fn load_domain(spec: &str) -> Result<Domain> {
    let path = Path::new(spec);
    if spec.ends_with(".toml") || path.is_file() {
        let file = DomainFile::load(path).with_context(|| format!("loading domain file `{spec}`"))?;
        return Ok(file.into_domain()?);
    }
    Ok(domain_by_id(spec)?)
}

fn load_abstraction(path: &Path, domain: &Domain) -> Result<PolicyAbstraction> {
    let m = PolicyAbstraction::load(path).with_context(|| format!("loading abstraction `{}`", path.display()))?;
    m.check_schema(domain.schema())?;
    Ok(m)
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating `{}`", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn deadline(secs: f64) -> Result<Budget> {
    if !(secs.is_finite() && secs > 0.0) {
        bail!("timeout must be a positive number of seconds");
    }
    Ok(Budget::with_deadline(Instant::now() + Duration::from_secs_f64(secs)))
}

/// Resolves `--state`: a bare number is a state index, anything else per-agent bits.
pub fn parse_state(domain: &Domain, m: &PolicyAbstraction, text: &str) -> Result<AbstractJointState> {
    if let Some(bits) = text.strip_prefix("bits=") {
        return Ok(domain.parse_joint_state(bits)?);
    }
    if !text.contains(',') {
        let idx: usize = text
            .trim()
            .parse()
            .with_context(|| format!("`{text}` is neither a state index nor per-agent bits"))?;
        if idx >= m.states().len() {
            bail!("state index {idx} out of range; the abstraction has {} states", m.states().len());
        }
        return Ok(m.state(idx).clone());
    }
    Ok(domain.parse_joint_state(text)?)
}

pub fn parse_predicates(domain: &Domain, ids: &[String]) -> Result<Vec<usize>> {
    Ok(ids
        .iter()
        .map(|p| domain.schema().index_of(p.trim()))
        .collect::<marlx_core::Result<_>>()?)
}

fn build_query(a: &ExplainArgs, domain: &Domain, m: &PolicyAbstraction) -> Result<Query> {
    let agents = a
        .agents
        .iter()
        .map(|n| domain.agent_by_name(n.trim()))
        .collect::<marlx_core::Result<Vec<_>>>()?;
    let actions = a
        .actions
        .iter()
        .map(|s| domain.action_ref(s.trim()))
        .collect::<marlx_core::Result<Vec<_>>>()?;
    let mut q = match a.kind {
        QueryKind::When => {
            if actions.is_empty() {
                bail!("a when query needs --actions");
            }
            Query::when(actions, a.method)
        }
        QueryKind::WhyNot => {
            let state = a.state.as_deref().context("a whynot query needs --state")?;
            if actions.is_empty() {
                bail!("a whynot query needs --actions");
            }
            Query::whynot(actions, parse_state(domain, m, state)?, a.method)
        }
        QueryKind::What => {
            if agents.is_empty() {
                bail!("a what query needs --agents");
            }
            return Ok(Query::what(agents, parse_predicates(domain, &a.predicates)?, a.method));
        }
    };
    q.agents.extend(agents);
    Ok(q)
}

/// Non-zero exit code for errors that mean the minimizer ran out of budget.
pub fn timeout_report(e: &marlx_core::Error) -> Option<String> {
    match e {
        marlx_core::Error::Minimize(MinimizeError::Aborted { reason, progress }) => Some(format!(
            "timeout: minimization aborted ({reason}) after {} merge passes, {} cubes generated, {} prime implicants found",
            progress.passes, progress.cubes, progress.primes
        )),
        marlx_core::Error::Minimize(MinimizeError::TooManyVariables { variables, limit }) => Some(format!(
            "timeout: {variables} Boolean variables exceed the minimizer limit of {limit}; \
             no minimization was attempted (try --method withrf)"
        )),
        _ => None,
    }
}

fn cmd_simulate(a: &SimulateArgs, seed: u64) -> Result<ExitCode> {
    if !DOMAIN_IDS.contains(&a.domain.as_str()) && domain_by_id(&a.domain).is_err() {
        bail!("`{}` is not a built-in domain; simulation needs one of {}", a.domain, DOMAIN_IDS.join(", "));
    }
    let sim = simulate(&a.domain, &ScriptedPolicy::new(seed), a.max_steps, a.episodes)?;
    let domain = sim.domain().clone();
    let mut w = TraceWriter::new(output(a.out.as_deref())?, &domain)?;
    for s in sim {
        w.write(&s)?;
    }
    let n = w.finish()?;
    info!("{n} samples from {} episodes of {}", a.episodes, a.domain);
    Ok(ExitCode::SUCCESS)
}

fn cmd_abstract(a: &AbstractArgs) -> Result<ExitCode> {
    let spec = match &a.domain {
        Some(d) => d.clone(),
        None => TraceReader::open(&a.trace)
            .with_context(|| format!("reading `{}`", a.trace.display()))?
            .header()
            .domain
            .clone(),
    };
    let domain = load_domain(&spec)?;
    let samples = read_trace(&a.trace, &domain).with_context(|| format!("reading `{}`", a.trace.display()))?;
    let options = BuildOptions {
        normalization: a.normalization,
        virtual_init: a.virtual_init,
    };
    let n = samples.len();
    let m: PolicyAbstraction = build_abstraction(samples, domain.schema(), options)?;
    m.save(&a.out).with_context(|| format!("writing `{}`", a.out.display()))?;
    info!("{n} samples -> {} states, {} transitions", m.states().len(), m.transitions().len());
    Ok(ExitCode::SUCCESS)
}

fn cmd_summarize(a: &SummarizeArgs) -> Result<ExitCode> {
    let domain = load_domain(&a.domain)?;
    let m = load_abstraction(&a.abstraction, &domain)?;
    let path = most_probable_path(&m)?;
    let chart = chart_from_path(&m, &path, domain.schema().task_completion());
    let mut out = output(a.out.as_deref())?;
    if a.show_path {
        writeln!(out, "path ({} states, probability {:.6e}):", path.len(), path.probability())?;
        for (i, &s) in path.states.iter().enumerate() {
            match path.actions.get(i) {
                Some(act) => writeln!(out, "  {} --{}-->", m.state(s), domain.action_names(act).join(","))?,
                None => writeln!(out, "  {}", m.state(s))?,
            }
        }
        writeln!(out)?;
    }
    write!(out, "{}", render_chart(&chart, &domain, a.format))?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn raw_answer(domain: &Domain, a: &Answer) -> String {
    match a {
        Answer::Boolean(b) => match &b.outcome {
            Outcome::Dnf(d) if d.is_tautology() => "dnf: true".into(),
            Outcome::Dnf(d) => format!("dnf: {}", d.display(domain)),
            Outcome::NoOccurrence => "dnf: false (no occurrence)".into(),
            Outcome::Never => "dnf: false (never taken)".into(),
            Outcome::Contradiction => "dnf: none (taken in the query state)".into(),
        },
        Answer::What(w) => {
            let agents: Vec<String> = w
                .per_agent
                .iter()
                .map(|p| {
                    let acts: Vec<String> = p
                        .actions
                        .iter()
                        .map(|&(act, n)| format!("{}={n}", domain.action(act).id))
                        .collect();
                    format!("{}: {}", domain.agent(p.agent).name, acts.join(" "))
                })
                .collect();
            format!("actions: {}", agents.join("; "))
        }
    }
}

fn cmd_explain(a: &ExplainArgs) -> Result<ExitCode> {
    let domain = load_domain(&a.domain)?;
    let m = load_abstraction(&a.abstraction, &domain)?;
    let q = build_query(a, &domain, &m)?;
    let options = QueryOptions {
        budget: deadline(a.timeout)?,
    };
    let result = match answer(&q, &m, &domain, &options) {
        Ok(r) => r,
        Err(e) => {
            if let Some(report) = timeout_report(&e) {
                eprintln!("{report}");
                return Ok(ExitCode::from(EXIT_TIMEOUT));
            }
            return Err(e.into());
        }
    };
    let text = render(&q, &result, &PhraseMap::from_domain(&domain))?;
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "{text}")?;
    if a.emit_dnf {
        writeln!(out, "{}", raw_answer(&domain, &result))?;
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_domain(c: &DomainCommand) -> Result<ExitCode> {
    match c {
        DomainCommand::List => {
            for id in DOMAIN_IDS {
                let d = domain_by_id(id)?;
                println!("{id}\t{}", d.description);
            }
        }
        DomainCommand::Export { domain, out } => {
            let d = load_domain(domain)?;
            let mut w = output(out.as_deref())?;
            write!(w, "{}", DomainFile::from(&d).to_toml())?;
            w.flush()?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_boolmin(a: &BoolminArgs) -> Result<ExitCode> {
    let parse = |v: &[String]| -> Result<Vec<Minterm>> {
        v.iter()
            .filter(|s| !s.is_empty())
            .map(|s| Minterm::parse(s.trim()).with_context(|| format!("bad minterm `{s}`")))
            .collect()
    };
    let ones = parse(&a.ones)?;
    let zeros = parse(&a.zeros)?;
    match minimize_with(&ones, &zeros, a.vars, &deadline(a.timeout)?) {
        Ok(r) => {
            for i in &r.implicants {
                println!("{i}");
            }
            println!(
                "exact={} passes={} cubes={} primes={}",
                r.exact, r.progress.passes, r.progress.cubes, r.progress.primes
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            let e = marlx_core::Error::from(e);
            match timeout_report(&e) {
                Some(report) => {
                    eprintln!("{report}");
                    Ok(ExitCode::from(EXIT_TIMEOUT))
                }
                None => Err(e.into()),
            }
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, cli.seed),
        Command::Abstract(a) => cmd_abstract(a),
        Command::Summarize(a) => cmd_summarize(a),
        Command::Explain(a) => cmd_explain(a),
        Command::Bench(a) => bench::run(a, cli.seed),
        Command::Domain(c) => cmd_domain(c),
        Command::BoolminDebug(a) => cmd_boolmin(a),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let args = match config::apply(&Cli::command(), args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    env_logger::Builder::new()
        .filter_level(match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        })
        .parse_env("MARLX_LOG")
        .init();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
