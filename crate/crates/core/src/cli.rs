//! Command-line driver tying the modules together.
//!
//! Every command reads and writes the JSON formats from [`crate::formats`],
//! embeds a manifest in each output, and keeps stdout deterministic for a
//! fixed input and seed; wall-clock timing goes to stderr. Exit codes are a
//! stable contract: 0 for a decided outcome, 2 for inconclusive results or
//! exhausted budgets, 1 for errors.

use crate::exact::Q;
use crate::factor_checks::{verify_nmf, verify_psd, NmfCandidate, PsdCandidate};
use crate::formats::{
    float_to_string, load_json, rational_from_string, rational_to_string, rows_to_matrix,
    save_json, EncoderFile, FactorReportFile, FcsFile, HmmFile, MpoFile, MpsFile, NmfFile,
    PcpFile, ProbeFile, PsdFile, ReportFile, RunManifest, SearchFile, SolutionFile, VerdictFile,
};
use crate::hmm::{quasi_realize, HankelFamily};
use crate::mpo::{
    Decision, MinValue, MpoError, MpoInstance, ThresholdVerdict, DEFAULT_DENSE_CAP,
    DEFAULT_ENUM_BUDGET,
};
use crate::mps_probe::{probe_hierarchy, ProbeError};
use crate::pcp::{PcpError, SearchBudget};
use crate::purification::purified_density;
use crate::reduction::compile;
use crate::words::{for_each_word, Word};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_DECIDED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;

/// Environment overrides for the built-in budgets.
pub const ENV_DENSE_CAP: &str = "MPOCERT_DENSE_CAP";
pub const ENV_ENUM_BUDGET: &str = "MPOCERT_ENUM_BUDGET";
pub const ENV_PCP_BUDGET: &str = "MPOCERT_PCP_BUDGET";

#[derive(Parser)]
#[command(
    name = "mpocert",
    version,
    about = "Positivity certification workbench for matrix product operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckMode {
    /// Exact diagonal enumeration; requires a diagonal MPO.
    Exact,
    /// Dense float assembly with a tolerance band.
    Dense,
    /// Variational negativity probe; one-sided.
    Probe,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a correspondence instance into a threshold MPO
    Compile {
        /// Instance file (pcp JSON)
        #[arg(long)]
        pcp: PathBuf,
        /// Threshold as "p/q" or an integer
        #[arg(long, default_value = "0")]
        lambda: String,
        /// Output MPO file
        #[arg(long)]
        out_mpo: PathBuf,
        /// Output encoder table; defaults to the MPO path with extension
        /// "encoder.json"
        #[arg(long)]
        out_encoder: Option<PathBuf>,
    },
    /// Threshold query at one system size
    Check {
        #[arg(long)]
        mpo: PathBuf,
        /// System size (number of sites)
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "0")]
        lambda: String,
        #[arg(long, value_enum, default_value_t = CheckMode::Exact)]
        mode: CheckMode,
        /// Probe bond dimensions (probe mode)
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        chi: Vec<usize>,
        /// Random restarts per probe level
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Verdict output file
        #[arg(long)]
        out: Option<PathBuf>,
        /// Full probe report with witness states (probe mode)
        #[arg(long)]
        out_probe: Option<PathBuf>,
    },
    /// Scan system sizes for the first threshold violation
    Search {
        #[arg(long)]
        mpo: PathBuf,
        #[arg(long, default_value = "0")]
        lambda: String,
        #[arg(long)]
        n_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force solver for correspondence instances
    Pcp {
        #[arg(long)]
        pcp: PathBuf,
        /// Search solutions of exactly this length
        #[arg(long, conflicts_with = "n_max")]
        n: Option<usize>,
        /// Search solutions of length up to this cap
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a hidden Markov model on one word
    Hmm {
        #[arg(long)]
        hmm: PathBuf,
        /// Word as a digit string, letters 1..=d
        #[arg(long)]
        word: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize a quasi-realization from a model's Hankel data
    Quasi {
        #[arg(long)]
        hmm: PathBuf,
        /// Table depth: probabilities up to this length are matched
        #[arg(long, default_value_t = 6)]
        max_len: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Purify a finitely correlated state into an MPS
    Purify {
        #[arg(long)]
        fcs: PathBuf,
        /// Number of physical sites
        #[arg(long)]
        n: usize,
        /// Output MPS file
        #[arg(long)]
        out_mps: Option<PathBuf>,
        /// Summary report file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify a claimed matrix factorization
    Factor {
        /// Nonnegative factorization candidate
        #[arg(long, conflicts_with = "psd")]
        nmf: Option<PathBuf>,
        /// PSD factorization candidate
        #[arg(long)]
        psd: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize verdict/search/probe files, optionally with plots
    Report {
        /// Input report files
        inputs: Vec<PathBuf>,
        /// Emit SVG plots (margin vs n, probe value vs chi)
        #[arg(long)]
        plot: bool,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Compile { .. } => "compile",
            Command::Check { .. } => "check",
            Command::Search { .. } => "search",
            Command::Pcp { .. } => "pcp",
            Command::Hmm { .. } => "hmm",
            Command::Quasi { .. } => "quasi",
            Command::Purify { .. } => "purify",
            Command::Factor { .. } => "factor",
            Command::Report { .. } => "report",
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn error(message: impl ToString) -> Self {
        Failure {
            code: EXIT_ERROR,
            message: message.to_string(),
        }
    }

    fn inconclusive(message: impl ToString) -> Self {
        Failure {
            code: EXIT_INCONCLUSIVE,
            message: message.to_string(),
        }
    }
}

fn err(e: impl std::fmt::Display) -> Failure {
    Failure::error(e.to_string())
}

fn mpo_failure(e: MpoError) -> Failure {
    match e {
        MpoError::DenseCapExceeded { .. } | MpoError::EnumerationBudget { .. } => {
            Failure::inconclusive(e.to_string())
        }
        other => Failure::error(other.to_string()),
    }
}

type CmdResult = Result<i32, Failure>;

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let name = cli.command.name();
    let started = Instant::now();
    let outcome = dispatch(cli.command);
    eprintln!(
        "{name}: finished in {:.3}s",
        started.elapsed().as_secs_f64()
    );
    match outcome {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(command: Command) -> CmdResult {
    match command {
        Command::Compile {
            pcp,
            lambda,
            out_mpo,
            out_encoder,
        } => cmd_compile(&pcp, &lambda, &out_mpo, out_encoder),
        Command::Check {
            mpo,
            n,
            lambda,
            mode,
            chi,
            restarts,
            seed,
            out,
            out_probe,
        } => cmd_check(&mpo, n, &lambda, mode, &chi, restarts, seed, out, out_probe),
        Command::Search {
            mpo,
            lambda,
            n_max,
            out,
        } => cmd_search(&mpo, &lambda, n_max, out),
        Command::Pcp { pcp, n, n_max, out } => cmd_pcp(&pcp, n, n_max, out),
        Command::Hmm { hmm, word, out } => cmd_hmm(&hmm, &word, out),
        Command::Quasi { hmm, max_len, out } => cmd_quasi(&hmm, max_len, out),
        Command::Purify {
            fcs,
            n,
            out_mps,
            out,
        } => cmd_purify(&fcs, n, out_mps, out),
        Command::Factor { nmf, psd, out } => cmd_factor(nmf, psd, out),
        Command::Report {
            inputs,
            plot,
            out_dir,
        } => cmd_report(&inputs, plot, &out_dir),
    }
}

fn env_usize(name: &str, default: usize) -> Result<usize, Failure> {
    match std::env::var(name) {
        Err(_) => Ok(default),
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Failure::error(format!("invalid {name}={s:?}"))),
    }
}

fn env_u64(name: &str, default: u64) -> Result<u64, Failure> {
    match std::env::var(name) {
        Err(_) => Ok(default),
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Failure::error(format!("invalid {name}={s:?}"))),
    }
}

fn build_manifest(
    command: &str,
    inputs: &[(&str, &Path)],
    params: &[(&str, String)],
) -> Result<RunManifest, Failure> {
    let mut m = RunManifest::new(command);
    for (label, path) in inputs {
        let bytes = std::fs::read(path)
            .map_err(|e| Failure::error(format!("{}: {e}", path.display())))?;
        m.record_input(label, &bytes);
    }
    for (key, value) in params {
        m.set_parameter(key, value);
    }
    Ok(m)
}

fn parse_lambda(text: &str) -> Result<Q, Failure> {
    rational_from_string(text).map_err(err)
}

fn load_mpo(path: &Path) -> Result<MpoInstance, Failure> {
    let file: MpoFile = load_json(path).map_err(err)?;
    file.to_instance().map_err(err)
}

fn decision_exit(d: Decision) -> i32 {
    match d {
        Decision::Positive | Decision::NotPositive => EXIT_DECIDED,
        Decision::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn decision_word(d: Decision) -> &'static str {
    match d {
        Decision::Positive => "positive",
        Decision::NotPositive => "not_positive",
        Decision::Inconclusive => "inconclusive",
    }
}

fn cmd_compile(
    pcp: &Path,
    lambda: &str,
    out_mpo: &Path,
    out_encoder: Option<PathBuf>,
) -> CmdResult {
    let file: PcpFile = load_json(pcp).map_err(err)?;
    let inst = file.to_instance().map_err(err)?;
    let lam = parse_lambda(lambda)?;
    let compiled = compile(&inst, &lam).map_err(err)?;
    let manifest = build_manifest(
        "compile",
        &[("pcp", pcp)],
        &[
            ("lambda", rational_to_string(&lam)),
            ("domino_count", inst.domino_count().to_string()),
            ("physical_dim", compiled.mpo.physical_dim().to_string()),
            ("bond_dim", compiled.mpo.bond_dim().to_string()),
        ],
    )?;
    let mut mpo_file = MpoFile::from_instance(&compiled.mpo);
    mpo_file.manifest = Some(manifest.clone());
    save_json(out_mpo, &mpo_file).map_err(err)?;
    let encoder_path =
        out_encoder.unwrap_or_else(|| out_mpo.with_extension("encoder.json"));
    let mut encoder_file = EncoderFile::from_encoder(&compiled.encoder);
    encoder_file.manifest = Some(manifest);
    save_json(&encoder_path, &encoder_file).map_err(err)?;
    println!(
        "compiled: physical_dim={} bond_dim={} diagonal={}",
        compiled.mpo.physical_dim(),
        compiled.mpo.bond_dim(),
        compiled.mpo.is_diagonal()
    );
    Ok(EXIT_DECIDED)
}

#[allow(clippy::too_many_arguments)]
fn cmd_check(
    mpo_path: &Path,
    n: usize,
    lambda: &str,
    mode: CheckMode,
    chi: &[usize],
    restarts: usize,
    seed: u64,
    out: Option<PathBuf>,
    out_probe: Option<PathBuf>,
) -> CmdResult {
    let inst = load_mpo(mpo_path)?;
    let lam = parse_lambda(lambda)?;
    let enum_budget = env_usize(ENV_ENUM_BUDGET, DEFAULT_ENUM_BUDGET)?;
    let dense_cap = env_usize(ENV_DENSE_CAP, DEFAULT_DENSE_CAP)?;
    let (mode_name, verdict, probe_file) = match mode {
        CheckMode::Exact => {
            if !inst.is_diagonal() {
                return Err(Failure::error(
                    "exact mode requires a diagonal MPO; use --mode dense",
                ));
            }
            let v = inst
                .threshold_check_with(n, &lam, enum_budget, dense_cap, false)
                .map_err(mpo_failure)?;
            ("exact", v, None)
        }
        CheckMode::Dense => {
            let v = inst
                .threshold_check_with(n, &lam, enum_budget, dense_cap, true)
                .map_err(mpo_failure)?;
            ("dense", v, None)
        }
        CheckMode::Probe => {
            let report = probe_hierarchy(&inst, n, chi, restarts, seed, &lam)
                .map_err(|e| match e {
                    ProbeError::MagnitudeTooLarge { .. } => Failure::error(e.to_string()),
                    other => Failure::error(other.to_string()),
                })?;
            let best = report
                .levels
                .iter()
                .map(|l| l.value)
                .fold(f64::INFINITY, f64::min);
            // The hierarchy is one-sided: values above the threshold prove
            // nothing, so the absence of a detection stays inconclusive.
            let decision = if report.detected {
                Decision::NotPositive
            } else {
                Decision::Inconclusive
            };
            let verdict = ThresholdVerdict {
                decision,
                witness: None,
                eigvec_witness: None,
                min_value: MinValue::Float(best),
                n,
                non_normal: false,
            };
            (
                "probe",
                verdict,
                Some(ProbeFile::new(&lam, &report)),
            )
        }
    };
    let manifest = build_manifest(
        "check",
        &[("mpo", mpo_path)],
        &[
            ("lambda", rational_to_string(&lam)),
            ("n", n.to_string()),
            ("mode", mode_name.to_string()),
            ("chi", format!("{chi:?}")),
            ("restarts", restarts.to_string()),
            ("seed", seed.to_string()),
            ("enum_budget", enum_budget.to_string()),
            ("dense_cap", dense_cap.to_string()),
        ],
    )?;
    if let Some(path) = out {
        let mut file = VerdictFile::new(mode_name, &lam, &verdict);
        file.manifest = Some(manifest.clone());
        save_json(&path, &file).map_err(err)?;
    }
    if let Some(path) = out_probe {
        if let Some(mut file) = probe_file {
            file.manifest = Some(manifest);
            save_json(&path, &file).map_err(err)?;
        } else {
            return Err(Failure::error("--out-probe is only valid with --mode probe"));
        }
    }
    println!(
        "decision={} n={} min={} margin={}",
        decision_word(verdict.decision),
        verdict.n,
        float_to_string(verdict.min_value.to_f64()),
        float_to_string(verdict.margin(&lam)),
    );
    Ok(decision_exit(verdict.decision))
}

fn cmd_search(mpo_path: &Path, lambda: &str, n_max: usize, out: Option<PathBuf>) -> CmdResult {
    let inst = load_mpo(mpo_path)?;
    let lam = parse_lambda(lambda)?;
    let enum_budget = env_usize(ENV_ENUM_BUDGET, DEFAULT_ENUM_BUDGET)?;
    let dense_cap = env_usize(ENV_DENSE_CAP, DEFAULT_DENSE_CAP)?;
    let outcome = inst
        .threshold_search_with(&lam, n_max, enum_budget, dense_cap)
        .map_err(mpo_failure)?;
    let manifest = build_manifest(
        "search",
        &[("mpo", mpo_path)],
        &[
            ("lambda", rational_to_string(&lam)),
            ("n_max", n_max.to_string()),
            ("enum_budget", enum_budget.to_string()),
            ("dense_cap", dense_cap.to_string()),
        ],
    )?;
    let mut file = SearchFile::new(&lam, &outcome);
    file.manifest = Some(manifest);
    if let Some(path) = out {
        save_json(&path, &file).map_err(err)?;
    }
    match &outcome.violation {
        Some(v) => {
            println!(
                "status=violation n={} min={}",
                v.n,
                float_to_string(v.min_value.to_f64())
            );
            Ok(EXIT_DECIDED)
        }
        None => {
            println!(
                "status=none n_max={n_max} inconclusive_sizes={:?}",
                outcome.inconclusive_sizes
            );
            if outcome.inconclusive_sizes.is_empty() {
                Ok(EXIT_DECIDED)
            } else {
                Ok(EXIT_INCONCLUSIVE)
            }
        }
    }
}

fn cmd_pcp(
    pcp: &Path,
    n: Option<usize>,
    n_max: Option<usize>,
    out: Option<PathBuf>,
) -> CmdResult {
    let file: PcpFile = load_json(pcp).map_err(err)?;
    let inst = file.to_instance().map_err(err)?;
    let budget = SearchBudget {
        max_partial_words: env_u64(ENV_PCP_BUDGET, SearchBudget::default().max_partial_words)?,
    };
    let (param, result) = match (n, n_max) {
        (Some(len), None) => (
            ("n", len.to_string()),
            inst.solve_bpcp(len, budget).map(|w| w.map(|w| (w, len))),
        ),
        (None, Some(cap)) => (("n_max", cap.to_string()), inst.solve_pcp_bounded(cap, budget)),
        _ => {
            return Err(Failure::error("exactly one of --n and --n-max is required"));
        }
    };
    let manifest = build_manifest(
        "pcp",
        &[("pcp", pcp)],
        &[
            (param.0, param.1.clone()),
            ("budget", budget.max_partial_words.to_string()),
        ],
    )?;
    let (mut solution, message, code) = match result {
        Ok(Some((w, len))) => {
            let digits: Vec<String> = w.letters().iter().map(|l| l.to_string()).collect();
            (
                SolutionFile::solution(&w),
                format!("status=solution length={len} witness={}", digits.join(",")),
                EXIT_DECIDED,
            )
        }
        Ok(None) => (SolutionFile::none(), "status=none".to_string(), EXIT_DECIDED),
        Err(PcpError::BudgetExhausted { visited }) => (
            SolutionFile::unknown(),
            format!("status=unknown visited={visited}"),
            EXIT_INCONCLUSIVE,
        ),
        Err(other) => return Err(err(other)),
    };
    solution.manifest = Some(manifest);
    if let Some(path) = out {
        save_json(&path, &solution).map_err(err)?;
    }
    println!("{message}");
    Ok(code)
}

fn parse_word_digits(text: &str) -> Result<Word, Failure> {
    let mut letters = Vec::new();
    for c in text.chars() {
        let digit = c
            .to_digit(10)
            .ok_or_else(|| Failure::error(format!("bad word digit {c:?}")))?;
        if digit == 0 {
            return Err(Failure::error("word digits are 1-based"));
        }
        letters.push(digit as usize);
    }
    Ok(if letters.is_empty() {
        Word::empty()
    } else {
        Word::from_letters(letters)
    })
}

fn cmd_hmm(hmm_path: &Path, word: &str, out: Option<PathBuf>) -> CmdResult {
    let file: HmmFile = load_json(hmm_path).map_err(err)?;
    let h = file.to_hmm().map_err(err)?;
    let w = parse_word_digits(word)?;
    let prob = h.prob(&w).map_err(err)?;
    let manifest = build_manifest(
        "hmm",
        &[("hmm", hmm_path)],
        &[("word", word.to_string())],
    )?;
    let mut report = ReportFile::new();
    report.manifest = Some(manifest);
    report.set("bond_dim", h.bond_dim());
    report.set("outcome_count", h.outcome_count());
    report.set("prob", float_to_string(prob));
    report.set("stationary", h.is_stationary());
    if let Some(path) = out {
        save_json(&path, &report).map_err(err)?;
    }
    println!("prob={} stationary={}", float_to_string(prob), h.is_stationary());
    Ok(EXIT_DECIDED)
}

fn cmd_quasi(hmm_path: &Path, max_len: usize, out: Option<PathBuf>) -> CmdResult {
    let file: HmmFile = load_json(hmm_path).map_err(err)?;
    let h = file.to_hmm().map_err(err)?;
    let family = HankelFamily::from_hmm(&h, max_len).map_err(err)?;
    let quasi = quasi_realize(&family).map_err(err)?;
    let mut residual = 0.0f64;
    for len in 0..=max_len {
        for_each_word(h.outcome_count(), len, |w| {
            let a = h.prob(w).expect("letters in range");
            let b = quasi.prob(w).expect("letters in range");
            residual = residual.max((a - b).abs());
        });
    }
    let manifest = build_manifest(
        "quasi",
        &[("hmm", hmm_path)],
        &[("max_len", max_len.to_string())],
    )?;
    let mut report = ReportFile::new();
    report.manifest = Some(manifest);
    report.set("bond_dim", quasi.bond_dim());
    report.set("residual", float_to_string(residual));
    report.set("negative_entries", quasi.has_negative_entries());
    if let Some(path) = out {
        save_json(&path, &report).map_err(err)?;
    }
    println!(
        "bond_dim={} residual={}",
        quasi.bond_dim(),
        float_to_string(residual)
    );
    Ok(EXIT_DECIDED)
}

fn cmd_purify(
    fcs_path: &Path,
    n: usize,
    out_mps: Option<PathBuf>,
    out: Option<PathBuf>,
) -> CmdResult {
    let file: FcsFile = load_json(fcs_path).map_err(err)?;
    let f = file.to_instance().map_err(err)?;
    let psi = f.purify(n);
    let manifest = build_manifest(
        "purify",
        &[("fcs", fcs_path)],
        &[("n", n.to_string())],
    )?;
    let mut report = ReportFile::new();
    report.manifest = Some(manifest.clone());
    report.set("sites", psi.n_sites());
    report.set("norm", float_to_string(psi.norm_sq().sqrt()));
    let dim = (f.channel().phys_dim() as f64).powi(n as i32);
    if dim <= DEFAULT_DENSE_CAP as f64 {
        let direct = f.density(n, DEFAULT_DENSE_CAP).map_err(err)?;
        let reduced = purified_density(
            &psi,
            f.channel().phys_dim(),
            f.channel().kraus_count(),
            1 << 24,
        )
        .map_err(err)?;
        let residual = (&direct - &reduced).abs().max();
        report.set("partial_trace_residual", float_to_string(residual));
    } else {
        report.set("partial_trace_residual", "skipped (dimension over cap)");
    }
    if let Some(path) = out_mps {
        let mut mps_file = MpsFile::from_mps(&psi);
        mps_file.manifest = Some(manifest);
        save_json(&path, &mps_file).map_err(err)?;
    }
    if let Some(path) = out {
        save_json(&path, &report).map_err(err)?;
    }
    println!(
        "sites={} norm={}",
        psi.n_sites(),
        float_to_string(psi.norm_sq().sqrt())
    );
    Ok(EXIT_DECIDED)
}

fn cmd_factor(
    nmf: Option<PathBuf>,
    psd: Option<PathBuf>,
    out: Option<PathBuf>,
) -> CmdResult {
    let (kind, input_path, outcome) = match (nmf, psd) {
        (Some(path), None) => {
            let file: NmfFile = load_json(&path).map_err(err)?;
            file.check().map_err(err)?;
            let matrix = rows_to_matrix(&file.matrix).map_err(err)?;
            let factors = file
                .factors
                .iter()
                .map(|t| (t.left.clone(), t.right.clone()))
                .collect();
            let candidate = NmfCandidate::new(matrix, factors).map_err(err)?;
            ("nmf", path, verify_nmf(&candidate))
        }
        (None, Some(path)) => {
            let file: PsdFile = load_json(&path).map_err(err)?;
            file.check().map_err(err)?;
            let matrix = rows_to_matrix(&file.matrix).map_err(err)?;
            let a_family = file
                .a_family
                .iter()
                .map(|m| rows_to_matrix(m))
                .collect::<Result<Vec<_>, _>>()
                .map_err(err)?;
            let b_family = file
                .b_family
                .iter()
                .map(|m| rows_to_matrix(m))
                .collect::<Result<Vec<_>, _>>()
                .map_err(err)?;
            let candidate = PsdCandidate::new(matrix, a_family, b_family).map_err(err)?;
            ("psd", path, verify_psd(&candidate))
        }
        _ => return Err(Failure::error("exactly one of --nmf and --psd is required")),
    };
    let manifest = build_manifest("factor", &[("candidate", &input_path)], &[])?;
    let mut report = FactorReportFile::new(kind, outcome.accepted, outcome.residual);
    report.manifest = Some(manifest);
    if let Some(path) = out {
        save_json(&path, &report).map_err(err)?;
    }
    println!(
        "kind={kind} accepted={} residual={}",
        outcome.accepted,
        float_to_string(outcome.residual)
    );
    Ok(EXIT_DECIDED)
}

/// Minimal deterministic SVG line chart.
fn svg_chart(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const L: f64 = 70.0;
    const R: f64 = 620.0;
    const T: f64 = 50.0;
    const B: f64 = 350.0;
    const COLORS: [&str; 6] = [
        "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
    ];
    let points: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().cloned()).collect();
    let (mut x0, mut x1) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.0), b.max(p.0))
        });
    let (mut y0, mut y1) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.1), b.max(p.1))
        });
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    if x0 == x1 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if y0 == y1 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let pad_y = 0.05 * (y1 - y0);
    y0 -= pad_y;
    y1 += pad_y;
    let sx = |x: f64| L + (x - x0) / (x1 - x0) * (R - L);
    let sy = |y: f64| B - (y - y0) / (y1 - y0) * (B - T);
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"16\">{title}</text>\n",
        (L + R) / 2.0
    ));
    svg.push_str(&format!(
        "<line x1=\"{L}\" y1=\"{B}\" x2=\"{R}\" y2=\"{B}\" stroke=\"black\"/>\n\
         <line x1=\"{L}\" y1=\"{T}\" x2=\"{L}\" y2=\"{B}\" stroke=\"black\"/>\n"
    ));
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{B}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"11\">{:.3}</text>\n",
            sx(fx),
            sx(fx),
            B + 6.0,
            sx(fx),
            B + 20.0,
            fx
        ));
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{L}\" y2=\"{:.1}\" stroke=\"black\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" \
             font-size=\"11\">{:.3}</text>\n",
            L - 6.0,
            sy(fy),
            sy(fy),
            L - 10.0,
            sy(fy) + 4.0,
            fy
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\">{xlabel}</text>\n",
        (L + R) / 2.0,
        H - 14.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\" transform=\"rotate(-90 18 {:.1})\">{ylabel}</text>\n",
        (T + B) / 2.0,
        (T + B) / 2.0
    ));
    for (idx, (label, pts)) in series.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        if pts.len() > 1 {
            let path: Vec<String> = pts
                .iter()
                .map(|p| format!("{:.1},{:.1}", sx(p.0), sy(p.1)))
                .collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" \
                 stroke-width=\"1.5\"/>\n",
                path.join(" ")
            ));
        }
        for p in pts {
            svg.push_str(&format!(
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>\n",
                sx(p.0),
                sy(p.1)
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" \
             fill=\"{color}\">{label}</text>\n",
            R - 140.0,
            T + 16.0 * (idx + 1) as f64
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn cmd_report(inputs: &[PathBuf], plot: bool, out_dir: &Path) -> CmdResult {
    if inputs.is_empty() {
        return Err(Failure::error("no input files given"));
    }
    let mut margin_points: Vec<(f64, f64)> = Vec::new();
    let mut probe_series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    let mut counted = (0usize, 0usize, 0usize);
    for path in inputs {
        let value: serde_json::Value = load_json(path).map_err(err)?;
        let schema = value
            .get("schema")
            .and_then(|s| s.as_str())
            .unwrap_or("")
            .to_string();
        if schema.starts_with("mpocert.verdict/") {
            let file: VerdictFile = serde_json::from_value(value).map_err(err)?;
            file.check().map_err(err)?;
            let margin = crate::formats::float_from_string(&file.verdict.margin).map_err(err)?;
            margin_points.push((file.verdict.n as f64, margin));
            counted.0 += 1;
        } else if schema.starts_with("mpocert.search/") {
            let file: SearchFile = serde_json::from_value(value).map_err(err)?;
            file.check().map_err(err)?;
            if let Some(v) = &file.violation {
                let margin = crate::formats::float_from_string(&v.margin).map_err(err)?;
                margin_points.push((v.n as f64, margin));
            }
            counted.1 += 1;
        } else if schema.starts_with("mpocert.probe/") {
            let file: ProbeFile = serde_json::from_value(value).map_err(err)?;
            file.check().map_err(err)?;
            let pts = file
                .levels
                .iter()
                .map(|l| {
                    crate::formats::float_from_string(&l.value)
                        .map(|v| (l.chi as f64, v))
                        .map_err(err)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let label = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "probe".into());
            probe_series.push((label, pts));
            counted.2 += 1;
        } else {
            return Err(Failure::error(format!(
                "{}: unsupported schema {schema:?}",
                path.display()
            )));
        }
    }
    margin_points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    std::fs::create_dir_all(out_dir).map_err(err)?;
    // Labels input-0, input-1, ... keep manifest keys unique.
    let labels: Vec<String> = (0..inputs.len()).map(|i| format!("input-{i}")).collect();
    let inputs_param: Vec<(&str, &Path)> = labels
        .iter()
        .zip(inputs)
        .map(|(label, p)| (label.as_str(), p.as_path()))
        .collect();
    let manifest = build_manifest("report", &inputs_param, &[("plot", plot.to_string())])?;
    let mut summary = ReportFile::new();
    summary.manifest = Some(manifest);
    summary.set("verdict_files", counted.0);
    summary.set("search_files", counted.1);
    summary.set("probe_files", counted.2);
    if plot {
        if !margin_points.is_empty() {
            let svg = svg_chart(
                "Threshold margin vs system size",
                "system size n",
                "margin |min + lambda|",
                &[("margin".to_string(), margin_points.clone())],
            );
            std::fs::write(out_dir.join("margin_vs_n.svg"), svg).map_err(err)?;
            summary.set("margin_plot", "margin_vs_n.svg");
        }
        if !probe_series.is_empty() {
            let svg = svg_chart(
                "Probe value vs bond dimension",
                "bond dimension chi",
                "variational minimum",
                &probe_series,
            );
            std::fs::write(out_dir.join("probe_vs_chi.svg"), svg).map_err(err)?;
            summary.set("probe_plot", "probe_vs_chi.svg");
        }
    }
    save_json(&out_dir.join("report.json"), &summary).map_err(err)?;
    println!(
        "verdicts={} searches={} probes={}",
        counted.0, counted.1, counted.2
    );
    Ok(EXIT_DECIDED)
}
