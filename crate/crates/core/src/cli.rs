//! The `hyperlab` command-line driver.
//!
//! Every output starts with a provenance header carrying the SHA-256 of the
//! resolved configuration and the seed, and is a pure function of that
//! configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::automaton::{validate_strongly_markov, Automaton};
use crate::boundary::{ray_statistics, PattersonSullivan, RayConfig};
use crate::builtins::{builtin_representation, parse_group};
use crate::counting::{
    cache_dir_from_env, clt_comparison_suite, estimate_limits, load_or_build, spherical_statistics, HistogramSpec,
    Mode, Schedule, EXACT_LIMIT,
};
use crate::group::{GroupOracle, LinearRepresentation, SubadditiveFunctional};
use crate::markov::{
    berry_esseen_curve, coin_diagonal_process, deviation_curve, estimate_lambda_sigma, lil_statistic,
    lyapunov_spectrum, parry_product_process, simplicity_gap, MarkovMatrixProcess, ProcessFunctional,
};
use crate::spectral::{analyze, edge_chain, parry_measure, scc_decomposition, TransitionMatrix};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "hyperlab", version, about = "Counting and boundary limit-theorem experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectral report of the automaton's transition matrix.
    Analyze(Flags),
    /// Checks the automaton against the group oracle.
    Validate(Flags),
    /// Spherical statistics of a functional, exact and Monte Carlo.
    Count(Flags),
    /// Markovian random matrix product experiments.
    Simulate(Flags),
    /// Boundary ray experiments.
    Boundary(Flags),
    /// Total-variation tables for the path-measure comparisons.
    CltCompare(Flags),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Analyze(_) => "analyze",
            Command::Validate(_) => "validate",
            Command::Count(_) => "count",
            Command::Simulate(_) => "simulate",
            Command::Boundary(_) => "boundary",
            Command::CltCompare(_) => "clt-compare",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::Analyze(f)
            | Command::Validate(f)
            | Command::Count(f)
            | Command::Simulate(f)
            | Command::Boundary(f)
            | Command::CltCompare(f) => f,
        }
    }
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// JSON config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in group: `free:K`, `product:M1,M2,...` or `surface:G`.
    #[arg(long)]
    group: Option<String>,
    /// Automaton JSON file (overrides the group's built-in automaton).
    #[arg(long)]
    automaton_file: Option<PathBuf>,
    /// Presentation JSON file for a small-cancellation oracle.
    #[arg(long)]
    presentation_file: Option<PathBuf>,
    /// Built-in representation name or representation JSON file.
    #[arg(long)]
    rep: Option<String>,
    /// `log_norm`, `log_frobenius`, `displacement`, `word_length`,
    /// `abs_hom:w1,w2,...` or `hom:w1,w2,...`.
    #[arg(long)]
    functional: Option<String>,
    /// Largest exhaustively enumerated depth.
    #[arg(long)]
    exact_to: Option<usize>,
    /// Monte Carlo depths, comma separated.
    #[arg(long, value_delimiter = ',')]
    mc_depths: Option<Vec<usize>>,
    /// Monte Carlo samples per depth.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Deviation thresholds as multiples of the estimated drift.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Validation depth.
    #[arg(long)]
    depth: Option<usize>,
    /// Trajectories or rays.
    #[arg(long)]
    trials: Option<usize>,
    /// Trajectory or ray length.
    #[arg(long)]
    length: Option<usize>,
    /// `c` values for the endpoint comparison, comma separated.
    #[arg(long, value_delimiter = ',')]
    c: Option<Vec<f64>>,
    /// `parry` (edge-chain process of the automaton) or `coin`.
    #[arg(long)]
    process: Option<String>,
    /// Drift used to normalize ray statistics (estimated when absent).
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// Standard deviation used to normalize ray statistics.
    #[arg(long)]
    sigma: Option<f64>,
    /// Output directory; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: logical cores).
    #[arg(long)]
    workers: Option<usize>,
}

/// Configuration as read from a `--config` file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    group: Option<String>,
    automaton_file: Option<PathBuf>,
    presentation_file: Option<PathBuf>,
    rep: Option<String>,
    functional: Option<String>,
    exact_to: Option<usize>,
    mc_depths: Option<Vec<usize>>,
    samples: Option<usize>,
    seed: Option<u64>,
    eps: Option<Vec<f64>>,
    depth: Option<usize>,
    trials: Option<usize>,
    length: Option<usize>,
    c: Option<Vec<f64>>,
    process: Option<String>,
    lambda: Option<f64>,
    sigma: Option<f64>,
    out: Option<PathBuf>,
    workers: Option<usize>,
}

/// Fully resolved experiment configuration; its JSON form is hashed into
/// every output header.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub command: String,
    pub group: Option<String>,
    pub automaton_file: Option<PathBuf>,
    pub presentation_file: Option<PathBuf>,
    pub rep: Option<String>,
    pub functional: String,
    pub exact_to: usize,
    pub mc_depths: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    pub eps: Vec<f64>,
    pub depth: usize,
    pub trials: usize,
    pub length: usize,
    pub c: Vec<f64>,
    pub process: String,
    pub lambda: Option<f64>,
    pub sigma: Option<f64>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("serializable config");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    fn header(&self) -> String {
        format!("# hyperlab {} config_sha256={} seed={}\n", self.command, self.hash(), self.seed)
    }
}

enum CliError {
    Usage(String),
    Validation(String),
    Failed(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Failed(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn resolve(cmd: &Command) -> CliResult<ExperimentConfig> {
    let f = cmd.flags();
    let file = match &f.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<ConfigFile>(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => ConfigFile::default(),
    };
    let cfg = ExperimentConfig {
        command: cmd.name().to_string(),
        group: f.group.clone().or(file.group),
        automaton_file: f.automaton_file.clone().or(file.automaton_file),
        presentation_file: f.presentation_file.clone().or(file.presentation_file),
        rep: f.rep.clone().or(file.rep),
        functional: f.functional.clone().or(file.functional).unwrap_or_else(|| "log_norm".into()),
        exact_to: f.exact_to.or(file.exact_to).unwrap_or(10),
        mc_depths: f.mc_depths.clone().or(file.mc_depths).unwrap_or_default(),
        samples: f.samples.or(file.samples).unwrap_or(1000),
        seed: f.seed.or(file.seed).unwrap_or(0),
        eps: f.eps.clone().or(file.eps).unwrap_or_else(|| vec![0.2]),
        depth: f.depth.or(file.depth).unwrap_or(8),
        trials: f.trials.or(file.trials).unwrap_or(1000),
        length: f.length.or(file.length).unwrap_or(1024),
        c: f.c.clone().or(file.c).unwrap_or_else(|| vec![1.0, 2.0, 4.0]),
        process: f.process.clone().or(file.process).unwrap_or_else(|| "parry".into()),
        lambda: f.lambda.or(file.lambda),
        sigma: f.sigma.or(file.sigma),
        out: f.out.clone().or(file.out),
        workers: f.workers.or(file.workers),
    };
    if cfg.exact_to > EXACT_LIMIT {
        return Err(CliError::Usage(format!("--exact-to is limited to {EXACT_LIMIT}")));
    }
    if cfg.workers == Some(0) {
        return Err(CliError::Usage("--workers must be positive".into()));
    }
    Ok(cfg)
}

fn read(p: &Path) -> CliResult<String> {
    std::fs::read_to_string(p).map_err(|e| CliError::Failed(Error::Io(e)))
}

fn oracle(cfg: &ExperimentConfig) -> CliResult<Option<GroupOracle>> {
    if let Some(p) = &cfg.presentation_file {
        return Ok(Some(GroupOracle::from_presentation_json(&read(p)?)?));
    }
    match &cfg.group {
        Some(g) => Ok(Some(parse_group(g).map_err(|e| CliError::Usage(e.to_string()))?.oracle)),
        None => Ok(None),
    }
}

fn automaton(cfg: &ExperimentConfig) -> CliResult<Automaton> {
    if let Some(p) = &cfg.automaton_file {
        return Ok(Automaton::from_json(&read(p)?)?);
    }
    let g = cfg.group.as_ref().ok_or_else(|| CliError::Usage("--group or --automaton-file is required".into()))?;
    parse_group(g)
        .map_err(|e| CliError::Usage(e.to_string()))?
        .automaton
        .ok_or_else(|| CliError::Usage(format!("group `{g}` has no built-in automaton; pass --automaton-file")))
}

fn representation(cfg: &ExperimentConfig, aut: &Automaton) -> CliResult<LinearRepresentation> {
    let name = cfg.rep.as_deref().ok_or_else(|| CliError::Usage("--rep is required".into()))?;
    let path = Path::new(name);
    if path.is_file() {
        return Ok(LinearRepresentation::from_json(&read(path)?)?.aligned_to(aut.alphabet())?);
    }
    let oracle = oracle(cfg)?.ok_or_else(|| CliError::Usage("built-in representations need --group".into()))?;
    Ok(builtin_representation(name, &oracle)?.aligned_to(aut.alphabet())?)
}

fn weights(spec: &str) -> CliResult<Vec<f64>> {
    spec.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad weight `{s}`"))))
        .collect()
}

fn functional(cfg: &ExperimentConfig, aut: &Automaton) -> CliResult<SubadditiveFunctional> {
    let spec = cfg.functional.as_str();
    Ok(match spec {
        "log_norm" => SubadditiveFunctional::log_norm(representation(cfg, aut)?),
        "log_frobenius" => SubadditiveFunctional::LogFrobenius(representation(cfg, aut)?),
        "displacement" => SubadditiveFunctional::displacement(representation(cfg, aut)?)?,
        "word_length" => {
            let o = oracle(cfg)?.ok_or_else(|| CliError::Usage("word_length needs --group".into()))?;
            SubadditiveFunctional::identity_word_length(o)
        }
        _ => {
            if let Some(w) = spec.strip_prefix("abs_hom:") {
                SubadditiveFunctional::abs_homomorphism(aut.alphabet(), weights(w)?)?
            } else if let Some(w) = spec.strip_prefix("hom:") {
                SubadditiveFunctional::homomorphism(aut.alphabet(), weights(w)?)?
            } else {
                return Err(CliError::Usage(format!("unknown functional `{spec}`")));
            }
        }
    })
}

fn json_output<T: Serialize>(cfg: &ExperimentConfig, report: &T) -> CliResult<String> {
    #[derive(Serialize)]
    struct Wrapped<'a, T> {
        command: &'a str,
        config_sha256: String,
        seed: u64,
        report: &'a T,
    }
    let w = Wrapped { command: &cfg.command, config_sha256: cfg.hash(), seed: cfg.seed, report };
    Ok(serde_json::to_string_pretty(&w).map_err(Error::from)? + "\n")
}

fn cmd_analyze(cfg: &ExperimentConfig) -> CliResult<(String, bool)> {
    let aut = automaton(cfg)?;
    let report = analyze(&TransitionMatrix::from_automaton(&aut))?;
    Ok((json_output(cfg, &report)?, true))
}

fn cmd_validate(cfg: &ExperimentConfig) -> CliResult<(String, bool)> {
    let aut = automaton(cfg)?;
    let o = oracle(cfg)?.ok_or_else(|| CliError::Usage("validate needs --group or --presentation-file".into()))?;
    let report = validate_strongly_markov(&aut, &o, cfg.depth, cfg.depth)?;
    let ok = report.ok();
    Ok((json_output(cfg, &report)?, ok))
}

fn cmd_count(cfg: &ExperimentConfig) -> CliResult<(String, bool)> {
    let aut = automaton(cfg)?;
    let f = functional(cfg, &aut)?;
    if cfg.exact_to < 3 {
        return Err(CliError::Usage("--exact-to must be at least 3".into()));
    }
    let n_max = cfg.mc_depths.iter().copied().chain([cfg.exact_to]).max().unwrap_or(cfg.exact_to);
    let table = load_or_build(&aut, n_max, cache_dir_from_env().as_deref())?;
    let schedule = Schedule {
        exact: (1..=cfg.exact_to).collect(),
        monte_carlo: cfg.mc_depths.iter().map(|&n| (n, cfg.samples)).collect(),
        seed: cfg.seed,
    };
    let est = estimate_limits(&aut, &table, &f, &schedule)?;
    let eps: Vec<f64> = cfg.eps.iter().map(|e| e * est.lambda.abs()).collect();
    let hist = HistogramSpec { origin: 0.0, width: 1.0, bins: 1 };
    let mut out = cfg.header();
    writeln!(
        out,
        "# functional={} lambda_hat={:.12e} lambda_se={:.12e} sigma2_hat={:.12e} sigma2_se={:.12e}",
        f.name(),
        est.lambda,
        est.standard_error,
        est.sigma2,
        est.sigma2_standard_error
    )
    .expect("string write");
    out.push_str("n,count,mean,variance,standard_error,mode,seed");
    for e in &cfg.eps {
        write!(out, ",dev_{e}").expect("string write");
    }
    out.push('\n');
    let mut rows: Vec<(usize, Mode)> = (1..=cfg.exact_to).map(|n| (n, Mode::Exact)).collect();
    rows.extend(cfg.mc_depths.iter().map(|&n| {
        (n, Mode::MonteCarlo { samples: cfg.samples, seed: cfg.seed.wrapping_add(n as u64) })
    }));
    for (n, mode) in rows {
        let s = spherical_statistics(&aut, &table, &f, n, mode, est.lambda, &eps, &hist)?;
        write!(
            out,
            "{},{},{:.12e},{:.12e},{:.12e},{},{}",
            s.n,
            s.count,
            s.mean,
            s.variance,
            s.standard_error,
            s.mode.label(),
            s.mode.seed().map(|x| x.to_string()).unwrap_or_default()
        )
        .expect("string write");
        for (_, frac) in &s.deviation_fractions {
            write!(out, ",{frac:.12e}").expect("string write");
        }
        out.push('\n');
    }
    Ok((out, true))
}

fn process(cfg: &ExperimentConfig) -> CliResult<MarkovMatrixProcess> {
    match cfg.process.as_str() {
        "coin" => Ok(coin_diagonal_process()?),
        "parry" => {
            let aut = automaton(cfg)?;
            let rep = representation(cfg, &aut)?;
            let a = TransitionMatrix::from_automaton(&aut);
            let report = analyze(&a)?;
            let decomp = scc_decomposition(&a);
            let c = report.maximal.iter().position(|&m| m).ok_or(Error::NoGrowth)?;
            let parry = edge_chain(&parry_measure(&a, &decomp.components[c])?);
            Ok(parry_product_process(&aut, &parry, &rep)?)
        }
        other => Err(CliError::Usage(format!("unknown process `{other}`"))),
    }
}

fn geometric_lengths(n: usize) -> Vec<usize> {
    let mut v = Vec::new();
    let mut k = 16;
    while k < n {
        v.push(k);
        k *= 4;
    }
    v.push(n);
    v
}

fn cmd_simulate(cfg: &ExperimentConfig) -> CliResult<(String, bool)> {
    let proc = process(cfg)?;
    let n = cfg.length;
    if n < 32 {
        return Err(CliError::Usage("--length must be at least 32".into()));
    }
    let seed = cfg.seed;
    let mut out = cfg.header();
    out.push_str("experiment,n,statistic,value\n");
    let mut row = |e: &str, n: usize, s: &str, v: f64| writeln!(out, "{e},{n},{s},{v:.12e}").expect("string write");
    let est = estimate_lambda_sigma(&proc, n, cfg.trials, n / 16, seed)?;
    row("estimate", n, "lambda", est.lambda);
    row("estimate", n, "lambda_se", est.standard_error);
    row("estimate", n, "sigma2", est.sigma2);
    row("estimate", n, "sigma2_se", est.sigma2_standard_error);
    if proc.chain().is_irreducible() {
        let spec = lyapunov_spectrum(&proc, n, cfg.trials.max(2), seed.wrapping_add(1))?;
        for (i, (x, se)) in spec.exponents.iter().zip(&spec.standard_errors).enumerate() {
            row("lyapunov", n, &format!("lambda_{}", i + 1), *x);
            row("lyapunov", n, &format!("lambda_{}_se", i + 1), *se);
        }
        if let Some(d) = spec.expected_log_det {
            row("lyapunov", n, "expected_log_det", d);
        }
    }
    let lengths = geometric_lengths(n);
    if proc.dimension() >= 2 {
        let gap = simplicity_gap(&proc, &lengths, cfg.trials, &[0.1, 0.2], seed.wrapping_add(2))?;
        for r in &gap.rows {
            row("gap", r.n, "mean", r.mean);
            for (e, fr, _) in &r.lower_tails {
                row("gap", r.n, &format!("lower_tail_{e:.6}"), *fr);
            }
        }
    }
    for e in &cfg.eps {
        let c = deviation_curve(
            &proc,
            ProcessFunctional::LogNorm,
            est.lambda,
            e * est.lambda.abs(),
            &lengths,
            cfg.trials,
            seed.wrapping_add(3),
        )?;
        for r in &c.rows {
            row("deviation", r.n, &format!("frequency_eps_{e}"), r.frequency);
        }
    }
    let sigma = est.sigma2.sqrt();
    if sigma > 0.0 {
        for r in berry_esseen_curve(&proc, est.lambda, sigma, &lengths, cfg.trials, seed.wrapping_add(4))? {
            row("berry_esseen", r.n, "sup_distance", r.sup_distance);
            row("berry_esseen", r.n, "scaled", r.scaled);
        }
        let lil = lil_statistic(&proc, n, cfg.trials, est.lambda, sigma, 2f64.powf(0.25), seed.wrapping_add(5))?;
        row("lil", n, "fraction_max_in_0.5_1.5", lil.fraction_max_in(0.5, 1.5));
    }
    Ok((out, true))
}

fn cmd_boundary(cfg: &ExperimentConfig) -> CliResult<(String, bool)> {
    let aut = automaton(cfg)?;
    let f = functional(cfg, &aut)?;
    let (lambda, sigma) = match (cfg.lambda, cfg.sigma) {
        (Some(l), Some(s)) => (l, s),
        (l, s) => {
            let depth = cfg.exact_to.clamp(3, 10);
            let table = load_or_build(&aut, depth, cache_dir_from_env().as_deref())?;
            let schedule = Schedule { exact: (1..=depth).collect(), monte_carlo: Vec::new(), seed: cfg.seed };
            let est = estimate_limits(&aut, &table, &f, &schedule)?;
            (l.unwrap_or(est.lambda), s.unwrap_or(est.sigma2.sqrt()))
        }
    };
    let ps = PattersonSullivan::new(&aut)?;
    let rc = RayConfig {
        length: cfg.length,
        trials: cfg.trials,
        lambda,
        sigma,
        eps: cfg.eps.iter().map(|e| e * lambda.abs()).collect(),
        seed: cfg.seed,
    };
    let report = ray_statistics(&ps, &f, &rc)?;
    let mut out = cfg.header();
    writeln!(out, "# functional={} lambda={lambda:.12e} sigma={sigma:.12e}", f.name()).expect("string write");
    out.push_str(&report.csv());
    Ok((out, true))
}

fn cmd_clt_compare(cfg: &ExperimentConfig) -> CliResult<(String, bool)> {
    let aut = automaton(cfg)?;
    let report = analyze(&TransitionMatrix::from_automaton(&aut))?;
    let ns: Vec<usize> = (1..=cfg.exact_to).collect();
    let suite = clt_comparison_suite(&aut, &ns, report.p_common, &cfg.c, false)?;
    let mut out = cfg.header();
    writeln!(out, "# lambda={:.12e} p={}", suite.lambda, suite.p_common).expect("string write");
    out.push_str(&suite.csv());
    Ok((out, true))
}

fn execute(cmd: &Command, cfg: &ExperimentConfig) -> CliResult<(String, bool)> {
    match cmd {
        Command::Analyze(_) => cmd_analyze(cfg),
        Command::Validate(_) => cmd_validate(cfg),
        Command::Count(_) => cmd_count(cfg),
        Command::Simulate(_) => cmd_simulate(cfg),
        Command::Boundary(_) => cmd_boundary(cfg),
        Command::CltCompare(_) => cmd_clt_compare(cfg),
    }
}

fn emit(cfg: &ExperimentConfig, text: &str) -> CliResult<()> {
    match &cfg.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(Error::from)?;
            let ext = if matches!(cfg.command.as_str(), "analyze" | "validate") { "json" } else { "csv" };
            let path = dir.join(format!("{}.{ext}", cfg.command));
            std::fs::write(&path, text).map_err(Error::from)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code: 0 on success, 2 on a failed validation, 1 on errors, 64 on usage
/// errors.
pub fn run(args: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = resolve(&cli.command).and_then(|cfg| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers.unwrap_or(0))
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        pool.install(|| {
            let (text, ok) = execute(&cli.command, &cfg)?;
            emit(&cfg, &text)?;
            if ok {
                Ok(())
            } else {
                Err(CliError::Validation("automaton failed validation".into()))
            }
        })
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(m)) => {
            eprintln!("usage error: {m}");
            EXIT_USAGE
        }
        Err(CliError::Validation(m)) => {
            eprintln!("{m}");
            EXIT_VALIDATION
        }
        Err(CliError::Failed(e)) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
