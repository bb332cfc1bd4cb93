//! The `slcode` command line.
//!
//! Every subcommand is a function of its flags, its input files and
//! `--seed`. Environment variables are never read.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{self, ExperimentConfig};
use crate::channel::{ChannelModel, SupportRounding, DEFAULT_GROSS_MAGNITUDE};
use crate::codec;
use crate::linalg::{self, Vector};
use crate::lp::{self, SolverOptions};
use crate::matgen::{self, CodeKey, Regime};
use crate::pipeline::{self, DecodeReport};
use crate::rproj::{self, JllParams, DEFAULT_ALPHA, DEFAULT_EPSILON, DEFAULT_JLL_CONSTANT};
use crate::seeds;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "slcode", version, about = "Sparse-error decoding of text over a noisy real channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate an encoder/decoder key pair.
    Genkey(GenkeyArgs),
    /// Encode text into a real codeword vector.
    Encode(EncodeArgs),
    /// Add sparse gross errors to a codeword vector.
    Corrupt(CorruptArgs),
    /// Recover text from a corrupted codeword vector.
    Decode(DecodeArgs),
    /// Run a benchmark: 1 sweeps orthogonal key sizes, 2 sweeps the impossible-key grid.
    Bench(BenchArgs),
    /// Redraw the timing chart from a bench CSV.
    Plot(PlotArgs),
    /// Check cross-module invariants on small instances.
    Selftest,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RegimeArg {
    Orthogonal,
    Impossible,
}

#[derive(Debug, Args)]
struct GenkeyArgs {
    #[arg(long, value_enum, default_value = "orthogonal")]
    regime: RegimeArg,
    /// Message bits, orthogonal regime.
    #[arg(long)]
    d: Option<usize>,
    /// R = n/d, orthogonal regime.
    #[arg(long, default_value_t = 4.0)]
    redundancy: f64,
    /// Message bits and decoder rows, impossible regime.
    #[arg(long)]
    m: Option<usize>,
    /// Δ′ with n = (1+Δ′)m, impossible regime.
    #[arg(long = "delta-prime")]
    delta_prime: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    #[arg(long)]
    key: PathBuf,
    /// Text file, Latin-1 unless --utf8.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    utf8: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CorruptArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// With a key, each codeword block gets its own error pattern.
    #[arg(long)]
    key: Option<PathBuf>,
    #[arg(long, default_value_t = 0.08)]
    delta: f64,
    #[arg(long = "gross-magnitude", default_value_t = DEFAULT_GROSS_MAGNITUDE)]
    gross_magnitude: f64,
    /// Round Δn down instead of to nearest.
    #[arg(long)]
    floor: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ProjectionArgs {
    /// Decode the randomly projected program.
    #[arg(long)]
    project: bool,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long = "jll-constant", default_value_t = DEFAULT_JLL_CONSTANT)]
    jll_constant: f64,
}

impl ProjectionArgs {
    fn params(&self) -> JllParams {
        JllParams {
            epsilon: self.epsilon,
            alpha: self.alpha,
            jll_constant: self.jll_constant,
        }
    }
}

#[derive(Debug, Args)]
struct DecodeArgs {
    #[arg(long)]
    key: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    projection: ProjectionArgs,
    /// Projector seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write decoded text here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write UTF-8 instead of Latin-1.
    #[arg(long)]
    utf8: bool,
    /// Write the JSON report here instead of standard error.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the first block's LP in LP file format.
    #[arg(long = "dump-lp")]
    dump_lp: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    table: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// JSON-lines record of the configuration and environment.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Worker threads, 0 for all.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated message sizes for table 1.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Comma-separated m:Δ′ cells for table 2.
    #[arg(long, value_delimiter = ',', value_parser = parse_cell)]
    cells: Option<Vec<(usize, f64)>>,
    #[arg(long, default_value_t = 4.0)]
    redundancy: f64,
    #[arg(long, default_value_t = 0.08)]
    delta: f64,
    /// Table 2 channel error rate; defaults to each cell's Δ′.
    #[arg(long = "channel-delta")]
    channel_delta: Option<f64>,
    #[arg(long = "gross-magnitude", default_value_t = DEFAULT_GROSS_MAGNITUDE)]
    gross_magnitude: f64,
    #[arg(long)]
    floor: bool,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long = "jll-constant", default_value_t = DEFAULT_JLL_CONSTANT)]
    jll_constant: f64,
    /// Latin-1 text to draw messages from instead of the bundled passage.
    #[arg(long)]
    corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    svg: PathBuf,
}

fn parse_cell(s: &str) -> Result<(usize, f64), String> {
    let (m, dp) = s.split_once(':').ok_or_else(|| format!("expected m:delta', got {s:?}"))?;
    Ok((
        m.trim().parse().map_err(|e| format!("bad m in {s:?}: {e}"))?,
        dp.trim().parse().map_err(|e| format!("bad delta' in {s:?}: {e}"))?,
    ))
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Genkey(a) => genkey(a),
        Command::Encode(a) => encode(a),
        Command::Corrupt(a) => corrupt(a),
        Command::Decode(a) => decode(a),
        Command::Bench(a) => run_bench(a),
        Command::Plot(a) => plot(a),
        Command::Selftest => selftest(),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_DOMAIN
        }
    }
}

fn genkey(a: GenkeyArgs) -> anyhow::Result<()> {
    let key = match a.regime {
        RegimeArg::Orthogonal => {
            let Some(d) = a.d else { bail!("--d is required for the orthogonal regime") };
            matgen::generate_orthogonal_key(d, a.redundancy, a.seed)?
        }
        RegimeArg::Impossible => {
            let (Some(m), Some(dp)) = (a.m, a.delta_prime) else {
                bail!("--m and --delta-prime are required for the impossible regime")
            };
            matgen::generate_impossible_key(m, dp, a.seed)?
        }
    };
    matgen::save_key(&a.out, &key).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!(
        "{} key: d={} n={} decoder rows={} max|AQ|={:.2e}{}",
        key.regime(),
        key.message_bits(),
        key.code_length(),
        key.decoder_rows(),
        key.ortho_residual(),
        if key.rank_warning() { " (A is rank deficient)" } else { "" }
    );
    Ok(())
}

fn load_key(path: &Path) -> anyhow::Result<CodeKey> {
    matgen::load_key(path).with_context(|| format!("loading key {}", path.display()))
}

fn read_text(path: &Path, utf8: bool) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if utf8 {
        let text = String::from_utf8(bytes).context("input is not valid UTF-8")?;
        codec::string_to_latin1(&text)?;
        Ok(text)
    } else {
        Ok(codec::latin1_to_string(&bytes))
    }
}

/// Splits text into key-sized blocks, padding the last with spaces.
/// Empty text still yields one block.
pub fn text_blocks(text: &str, block_chars: usize) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut blocks: Vec<String> = chars.chunks(block_chars).map(|c| c.iter().collect()).collect();
    if blocks.is_empty() {
        blocks.push(String::new());
    }
    if let Some(last) = blocks.last_mut() {
        let pad = block_chars - last.chars().count();
        last.extend(std::iter::repeat(' ').take(pad));
    }
    blocks
}

fn encode(a: EncodeArgs) -> anyhow::Result<()> {
    let key = load_key(&a.key)?;
    let text = read_text(&a.input, a.utf8)?;
    let mut z = Vec::new();
    for block in text_blocks(&text, key.message_bits() / 8) {
        z.extend(pipeline::encode(&key, &block)?.into_inner());
    }
    linalg::save_vector(&a.out, &Vector::new(z)?)?;
    Ok(())
}

fn corrupt(a: CorruptArgs) -> anyhow::Result<()> {
    let z = linalg::load_vector(&a.input)?;
    let block = match &a.key {
        Some(p) => load_key(p)?.code_length(),
        None => z.dim().max(1),
    };
    if z.dim() % block != 0 {
        bail!("vector of dim {} is not a whole number of {block}-entry codewords", z.dim());
    }
    let rounding = if a.floor { SupportRounding::Floor } else { SupportRounding::Round };
    let mut channel = ChannelModel::new(a.delta, a.gross_magnitude, a.seed)?.with_rounding(rounding);
    let mut out = Vec::with_capacity(z.dim());
    for chunk in z.as_slice().chunks(block) {
        let (zb, _) = channel.corrupt(&Vector::new(chunk.to_vec())?);
        out.extend(zb.into_inner());
    }
    linalg::save_vector(&a.out, &Vector::new(out)?)?;
    Ok(())
}

fn decode(a: DecodeArgs) -> anyhow::Result<()> {
    let key = load_key(&a.key)?;
    let z_bar = linalg::load_vector(&a.input)?;
    let n = key.code_length();
    if z_bar.dim() == 0 || z_bar.dim() % n != 0 {
        bail!("vector of dim {} is not a whole number of {n}-entry codewords", z_bar.dim());
    }
    let projector = if a.projection.project {
        Some(pipeline::projector_for_key(&key, &a.projection.params(), a.seed)?)
    } else {
        None
    };
    let solver = SolverOptions::default();
    let blocks: Vec<Vector> = z_bar
        .as_slice()
        .chunks(n)
        .map(|c| Vector::new(c.to_vec()))
        .collect::<Result<_, _>>()?;
    if let Some(path) = &a.dump_lp {
        let bp = pipeline::decoder_lp(&key, &blocks[0], projector.as_ref())?;
        let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        lp::write_lp_format(std::io::BufWriter::new(f), bp.lp())?;
    }
    let reports: Vec<DecodeReport> = blocks
        .iter()
        .map(|b| pipeline::decode(&key, b, projector.as_ref(), &solver))
        .collect::<Result<_, _>>()?;

    let text: String = reports.iter().map(|r| r.decoded_text.as_str()).collect();
    let bytes = if a.utf8 { text.into_bytes() } else { codec::string_to_latin1(&text)? };
    match &a.out {
        Some(p) => fs::write(p, &bytes).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    let json = serde_json::to_string_pretty(&reports)?;
    match &a.report {
        Some(p) => fs::write(p, json + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => eprintln!("{json}"),
    }
    Ok(())
}

fn run_bench(a: BenchArgs) -> anyhow::Result<()> {
    let mut cfg = if a.table == 1 {
        ExperimentConfig::table1(a.seed)
    } else {
        ExperimentConfig::table2(a.seed)
    };
    if let Some(s) = a.sizes {
        cfg.sizes = s;
    }
    if let Some(c) = a.cells {
        cfg.cells = c;
    }
    if let Some(t) = a.trials {
        cfg.trials_per_cell = t;
    }
    cfg.redundancy = a.redundancy;
    cfg.delta = a.delta;
    cfg.channel_delta = a.channel_delta;
    cfg.gross_magnitude = a.gross_magnitude;
    cfg.rounding = if a.floor { SupportRounding::Floor } else { SupportRounding::Round };
    cfg.jll = JllParams {
        epsilon: a.epsilon,
        alpha: a.alpha,
        jll_constant: a.jll_constant,
    };
    cfg.corpus_path = a.corpus;
    cfg.jobs = a.jobs;

    let rows = if a.table == 1 { bench::run_table1(&cfg)? } else { bench::run_table2(&cfg)? };
    let f = fs::File::create(&a.csv).with_context(|| format!("creating {}", a.csv.display()))?;
    bench::write_rows(f, &rows)?;
    if let Some(p) = &a.manifest {
        bench::write_manifest(fs::File::create(p)?, &cfg, &rows)?;
    }
    if let Some(p) = &a.svg {
        fs::write(p, bench::emit_plot(&rows)?)?;
    }
    for r in &rows {
        eprintln!(
            "{} {:>5} {:<9} trial {} mu_err={} cpu={} {}",
            r.regime,
            r.d_or_m,
            r.variant.as_str(),
            r.trial_index,
            r.mu_err.map_or("-".into(), |v| v.to_string()),
            r.cpu_seconds.map_or("-".into(), |v| format!("{v:.3}s")),
            r.lp_status
        );
    }
    Ok(())
}

fn plot(a: PlotArgs) -> anyhow::Result<()> {
    let f = fs::File::open(&a.csv).with_context(|| format!("opening {}", a.csv.display()))?;
    let rows = bench::read_rows(f)?;
    fs::write(&a.svg, bench::emit_plot(&rows)?)?;
    Ok(())
}

type Check = (&'static str, fn() -> anyhow::Result<()>);

const SELFTEST: [Check; 7] = [
    ("codec round trip", check_codec),
    ("orthogonal key invariants", check_orthogonal),
    ("impossible key invariants", check_impossible),
    ("basis pursuit matches l0 brute force", check_l0_l1),
    ("channel support size", check_channel),
    ("projection dimension", check_jll),
    ("end-to-end decode", check_roundtrip),
];

fn selftest() -> anyhow::Result<()> {
    let mut failed = 0;
    for (name, check) in SELFTEST {
        match check() {
            Ok(()) => println!("ok   {name}"),
            Err(e) => {
                failed += 1;
                println!("FAIL {name}: {e:#}");
            }
        }
    }
    if failed > 0 {
        bail!("{failed} of {} checks failed", SELFTEST.len());
    }
    Ok(())
}

fn check_codec() -> anyhow::Result<()> {
    let text: String = (0u8..=255).map(char::from).collect();
    let back = codec::bits_to_string(&codec::string_to_bits(&text)?);
    anyhow::ensure!(back == text, "Latin-1 alphabet did not survive");
    Ok(())
}

fn check_orthogonal() -> anyhow::Result<()> {
    for seed in 0..5 {
        let key = matgen::generate_orthogonal_key(16, 4.0, seed)?;
        key.validate()?;
        let qtq = key.q().transpose().matmul(key.q())?;
        anyhow::ensure!(qtq.max_abs_deviation_from_identity() <= matgen::ORTHOGONAL_TOL, "QᵀQ ≠ I");
    }
    Ok(())
}

fn check_impossible() -> anyhow::Result<()> {
    let key = matgen::generate_impossible_key(16, 0.5, 1)?;
    anyhow::ensure!(key.regime() == Regime::Impossible);
    anyhow::ensure!(key.ortho_residual() <= matgen::IMPOSSIBLE_TOL, "max|AQ| = {}", key.ortho_residual());
    Ok(())
}

fn check_l0_l1() -> anyhow::Result<()> {
    let mut agree = 0;
    for seed in 0..10 {
        let mut rng = seeds::derived_rng(seed, &[]);
        let a = linalg::Matrix::from_fn(8, 16, |_, _| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng))?;
        let mut x = vec![0.0; 16];
        x[(seed as usize * 3) % 16] = 1.0;
        x[(seed as usize * 7 + 5) % 16] = -2.0;
        let b = linalg::matvec(&a, &Vector::new(x)?)?;
        let bp = lp::build_basis_pursuit(&a, &b)?;
        let l1 = bp.signal(&lp::solve_lp(bp.lp(), &SolverOptions::default())?);
        let l0 = lp::l0_min_bruteforce(&a, &b, 2)?;
        if l1.sub(&l0)?.norm_inf() <= 1e-6 {
            agree += 1;
        }
    }
    anyhow::ensure!(agree >= 8, "only {agree}/10 instances agree");
    Ok(())
}

fn check_channel() -> anyhow::Result<()> {
    let mut ch = ChannelModel::new(0.08, DEFAULT_GROSS_MAGNITUDE, 3)?;
    let (_, e) = ch.corrupt(&Vector::zeros(320));
    let support = e.as_slice().iter().filter(|v| **v != 0.0).count();
    anyhow::ensure!(support == 26, "support {support}, expected 26");
    Ok(())
}

fn check_jll() -> anyhow::Result<()> {
    let k = rproj::jll_dimension(321, 0.2, 1.0)?;
    anyhow::ensure!(k == 145, "k = {k}, expected 145");
    Ok(())
}

fn check_roundtrip() -> anyhow::Result<()> {
    let key = matgen::generate_orthogonal_key(40, 4.0, 4)?;
    let mut ch = ChannelModel::new(0.08, DEFAULT_GROSS_MAGNITUDE, 9)?;
    let r = pipeline::roundtrip_trial(&key, "inde ", &mut ch, None, &SolverOptions::default())?;
    anyhow::ensure!(r.char_errors == Some(0), "{:?} character errors", r.char_errors);
    Ok(())
}
