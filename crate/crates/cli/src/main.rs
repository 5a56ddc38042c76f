//! `spivc`: single-pixel imaging with visual-cryptography keys.
//!
//! Every subcommand is deterministic given its flags. Patterns are never
//! read from disk: they are regenerated from `(width, height, n, seed)`, or
//! from a pattern-share manifest. Errors print one line,
//! `error[<stage>]: <message>`, and exit with status 1; a pipeline run that
//! misses a threshold in its manifest exits with status 2.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use spivc_core::imaging::{
    add_noise, generate_patterns, measure_combined, BitMatrix, Image, MeasurementSeries,
    NoiseModel, PatternSequence,
};
use spivc_core::pipeline::{self, RunManifest};
use spivc_core::qr::{qr_decode, qr_decode_gray, qr_encode, EcLevel};
use spivc_core::reconstruct::metrics::{dot_accuracy, f1, psnr};
use spivc_core::reconstruct::{reconstruct, Method, SolverConfig, StepPolicy};
use spivc_core::threshold::ThresholdPolicy;
use spivc_core::vc_opaque::{self, Assignment};
use spivc_core::vc_patterns::{self, PatternShareManifest, Which};
use spivc_core::{pnm, Error};

#[derive(Parser)]
#[command(
    name = "spivc",
    version,
    about = "Single-pixel imaging with visual-cryptography keys"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode text as a QR symbol (byte mode, versions 1-4) and write a PBM.
    GenQr(GenQr),
    /// Split a QR symbol into two opaque visual keys carrying a secret.
    EncodeShares(EncodeShares),
    /// Write a pattern-share manifest hiding a secret in two sequences.
    EncodePatternShares(EncodePatternShares),
    /// Write a pattern sequence as numbered PBM files.
    GenPatterns(GenPatterns),
    /// Simulate bucket-detector readings of one or more objects.
    Measure(Measure),
    /// Add Gaussian detector noise to a measurement series.
    AddNoise(AddNoise),
    /// Recover an image from a measurement series.
    Reconstruct(Reconstruct),
    /// Recover a secret from an overlay, a pattern-share pair or two
    /// reconstructions.
    Reveal(Reveal),
    /// Read a QR symbol from a PBM or a grayscale image.
    DecodeQr(DecodeQr),
    /// Compare two images (PSNR) or two bit masks (dot accuracy, F1).
    Metrics(Metrics),
    /// Run a JSON manifest end to end and write a report.
    Pipeline(Pipeline),
}

#[derive(Args)]
struct GenQr {
    #[arg(long)]
    text: String,
    #[arg(long, default_value_t = 4)]
    version: u8,
    #[arg(long, default_value = "H")]
    ec: EcLevel,
    /// Force a mask pattern (0-7) instead of the lowest-penalty one.
    #[arg(long)]
    mask: Option<u8>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncodeShares {
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    secret: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = AssignmentArg::Random)]
    assignment: AssignmentArg,
    #[arg(long)]
    out1: PathBuf,
    #[arg(long)]
    out2: PathBuf,
    /// Optional JSON record of the inputs and the modification budget.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AssignmentArg {
    Random,
    Balanced,
}

impl From<AssignmentArg> for Assignment {
    fn from(a: AssignmentArg) -> Self {
        match a {
            AssignmentArg::Random => Assignment::Random,
            AssignmentArg::Balanced => Assignment::Balanced,
        }
    }
}

#[derive(Args)]
struct EncodePatternShares {
    #[arg(long)]
    secret: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    #[arg(long, default_value_t = 1)]
    orient_seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenPatterns {
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Where the illumination patterns come from.
#[derive(Args)]
struct PatternSpec {
    /// Number of patterns for a plain random sequence.
    #[arg(long)]
    n: Option<usize>,
    /// Seed of a plain random sequence.
    #[arg(long)]
    seed: Option<u64>,
    /// Pattern-share manifest; replaces --n/--seed.
    #[arg(long)]
    pattern_shares: Option<PathBuf>,
}

#[derive(Args)]
struct Measure {
    /// Object image (PGM, PBM or JSON sidecar). Repeat for several scenes
    /// summed by one detector.
    #[arg(long = "object", required = true)]
    objects: Vec<PathBuf>,
    #[command(flatten)]
    patterns: PatternSpec,
    /// Share sequence lighting a single object (with --pattern-shares).
    #[arg(long, value_enum)]
    sequence: Option<WhichArg>,
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AddNoise {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Reconstruct {
    #[arg(long)]
    series: PathBuf,
    #[command(flatten)]
    patterns: PatternSpec,
    /// Sequence of the pattern-share pair to reconstruct with.
    #[arg(long, value_enum, default_value_t = WhichArg::A)]
    sequence: WhichArg,
    #[arg(long, default_value = "tv")]
    method: Method,
    /// TV weight; defaults to 0.05 * mean|y| / pixel count.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 3000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Fixed gradient step; backtracking when omitted.
    #[arg(long)]
    step: Option<f64>,
    /// Allow negative pixels in the TV solution.
    #[arg(long)]
    allow_negative: bool,
    /// Upper bound on every pixel of the TV solution.
    #[arg(long)]
    upper: Option<f64>,
    /// Write the TV iteration log as JSON lines.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Output PGM; a full-precision `.json` sidecar is written alongside.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WhichArg {
    A,
    B,
}

impl From<WhichArg> for Which {
    fn from(w: WhichArg) -> Self {
        match w {
            WhichArg::A => Which::A,
            WhichArg::B => Which::B,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RevealMode {
    /// Rescale a reconstructed key overlay and keep the middle level.
    Overlay,
    /// Exact reveal from a pattern-share manifest.
    Patterns,
    /// Compare a combined and a single-scene reconstruction.
    Reconstruction,
}

#[derive(Args)]
struct Reveal {
    #[arg(long, value_enum)]
    mode: RevealMode,
    /// Overlay image (overlay mode) or combined reconstruction.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Single-scene reconstruction (reconstruction mode).
    #[arg(long)]
    single: Option<PathBuf>,
    #[arg(long)]
    pattern_shares: Option<PathBuf>,
    /// Accepted margin outside [0, 2] in overlay mode.
    #[arg(long, default_value_t = vc_opaque::DEFAULT_TAU)]
    tau: f64,
    /// Skip the affine rescale in overlay mode.
    #[arg(long)]
    no_rescale: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecodeQr {
    /// PBM symbol, or a grayscale image to be thresholded.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = PolicyArg::Otsu)]
    threshold: PolicyArg,
    /// Print a JSON record instead of the bare text.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Otsu,
    Midpoint,
}

impl From<PolicyArg> for ThresholdPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Otsu => ThresholdPolicy::Otsu,
            PolicyArg::Midpoint => ThresholdPolicy::Midpoint,
        }
    }
}

#[derive(Args)]
struct Metrics {
    /// Image or mask under test.
    #[arg(long)]
    a: PathBuf,
    /// Reference image or mask.
    #[arg(long)]
    b: PathBuf,
    /// Treat both inputs as PBM masks.
    #[arg(long)]
    bits: bool,
}

#[derive(Args)]
struct Pipeline {
    #[arg(long)]
    manifest: PathBuf,
    /// Report path; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

/// An error tagged with the stage that raised it.
struct Failure {
    stage: String,
    message: String,
    code: u8,
}

impl Failure {
    fn new(stage: &str, err: anyhow::Error) -> Self {
        // one line: join the cause chain
        let message = err
            .chain()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join(": ")
            .replace('\n', " ");
        Self {
            stage: stage.into(),
            message,
            code: 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[args]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.stage, f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> std::result::Result<(), Failure> {
    let (stage, result) = match cmd {
        Command::GenQr(a) => ("gen-qr", gen_qr(a)),
        Command::EncodeShares(a) => ("encode-shares", encode_shares(a)),
        Command::EncodePatternShares(a) => ("encode-pattern-shares", encode_pattern_shares(a)),
        Command::GenPatterns(a) => ("gen-patterns", gen_patterns(a)),
        Command::Measure(a) => ("measure", cmd_measure(a)),
        Command::AddNoise(a) => ("add-noise", cmd_add_noise(a)),
        Command::Reconstruct(a) => ("reconstruct", cmd_reconstruct(a)),
        Command::Reveal(a) => ("reveal", reveal(a)),
        Command::DecodeQr(a) => ("decode-qr", decode_qr(a)),
        Command::Metrics(a) => ("metrics", metrics(a)),
        Command::Pipeline(a) => return run_pipeline(a),
    };
    result.map_err(|e| Failure::new(stage, e))
}

fn write(path: &Path, data: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, data).with_context(|| format!("writing {}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_image(path: &Path) -> Result<Image> {
    pnm::load_image(path).with_context(|| format!("loading {}", path.display()))
}

fn load_bits(path: &Path) -> Result<BitMatrix> {
    pnm::load_pbm(path).with_context(|| format!("loading {}", path.display()))
}

fn gen_qr(a: GenQr) -> Result<()> {
    let sym = qr_encode(a.text.as_bytes(), a.version, a.ec, a.mask)?;
    pnm::save_pbm(&a.out, &sym.matrix)?;
    Ok(())
}

fn encode_shares(a: EncodeShares) -> Result<()> {
    let base = load_bits(&a.base)?;
    let secret = load_bits(&a.secret)?;
    let pair = vc_opaque::encode_shares(&base, &secret, a.seed, a.assignment.into())?;
    pnm::save_pbm(&a.out1, &pair.key1)?;
    pnm::save_pbm(&a.out2, &pair.key2)?;
    if let Some(path) = a.manifest {
        // the budget needs a decodable base symbol; report it when there is one
        let budget = qr_decode(&base).ok().and_then(|d| {
            let sym = qr_encode(&d.message, d.version, d.ec_level, Some(d.mask_id)).ok()?;
            (sym.matrix == base)
                .then(|| vc_opaque::modification_budget(&secret, &sym).ok())
                .flatten()
        });
        let record = serde_json::json!({
            "base": a.base,
            "secret": a.secret,
            "seed": a.seed,
            "assignment": Assignment::from(a.assignment),
            "key1": a.out1,
            "key2": a.out2,
            "budget": budget,
        });
        write(&path, serde_json::to_string_pretty(&record)? + "\n")?;
    }
    Ok(())
}

fn encode_pattern_shares(a: EncodePatternShares) -> Result<()> {
    let secret = load_bits(&a.secret)?;
    let (width, height) = secret.dims();
    // validate before writing
    vc_patterns::encode_pattern_shares(width, height, a.n, &secret, a.base_seed, a.orient_seed)?;
    let secret_ref = relative_to(&a.secret, a.out.parent());
    let m = PatternShareManifest {
        width,
        height,
        n: a.n,
        base_seed: a.base_seed,
        orient_seed: a.orient_seed,
        secret: secret_ref,
    };
    write(&a.out, serde_json::to_string_pretty(&m)? + "\n")
}

/// `path` relative to `dir` when it lies inside it, else absolute.
fn relative_to(path: &Path, dir: Option<&Path>) -> PathBuf {
    let abs = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    let file = abs(path);
    match dir {
        Some(d) => {
            let d = abs(if d.as_os_str().is_empty() {
                Path::new(".")
            } else {
                d
            });
            file.strip_prefix(&d).map(Path::to_path_buf).unwrap_or(file)
        }
        None => file,
    }
}

fn gen_patterns(a: GenPatterns) -> Result<()> {
    let p = generate_patterns(a.width, a.height, a.n, a.seed)?;
    fs::create_dir_all(&a.out_dir)?;
    let digits = (a.n.max(2) - 1).to_string().len().max(5);
    for (n, m) in p.patterns().iter().enumerate() {
        pnm::save_pbm(a.out_dir.join(format!("pattern_{n:0digits$}.pbm")), m)?;
    }
    let spec = serde_json::json!({
        "width": a.width, "height": a.height, "n": a.n, "seed": a.seed,
    });
    write(
        &a.out_dir.join("patterns.json"),
        serde_json::to_string_pretty(&spec)? + "\n",
    )
}

/// Sequences for each object: the share pair for a pattern-share manifest,
/// otherwise one plain sequence shared by all objects.
fn sequences(
    spec: &PatternSpec,
    dims: (usize, usize),
    count: usize,
    fallback: Option<&MeasurementSeries>,
) -> Result<Vec<PatternSequence>> {
    if let Some(path) = &spec.pattern_shares {
        if spec.n.is_some() || spec.seed.is_some() {
            bail!("--pattern-shares excludes --n and --seed");
        }
        let (_, pair) = PatternShareManifest::load(path)?;
        if (pair.seq_a.width(), pair.seq_a.height()) != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: (pair.seq_a.width(), pair.seq_a.height()),
            }
            .into());
        }
        return Ok(vec![pair.seq_a, pair.seq_b]);
    }
    let n = spec
        .n
        .or(fallback.map(|s| s.len()))
        .ok_or_else(|| anyhow!("--n is required"))?;
    let seed = spec
        .seed
        .or(fallback.and_then(|s| s.meta.pattern_seeds.first().copied()))
        .unwrap_or(0);
    let p = generate_patterns(dims.0, dims.1, n, seed)?;
    Ok(vec![p; count])
}

fn cmd_measure(a: Measure) -> Result<()> {
    let objects = a
        .objects
        .iter()
        .map(|p| load_image(p))
        .collect::<Result<Vec<_>>>()?;
    let dims = objects[0].dims();
    let mut seqs = sequences(&a.patterns, dims, objects.len(), None)?;
    match (a.sequence, seqs.len(), objects.len()) {
        (None, s, o) if s == o => {}
        (Some(which), 2, 1) => {
            seqs = vec![seqs.swap_remove(if which == WhichArg::A { 0 } else { 1 })];
        }
        (Some(_), _, _) => bail!("--sequence needs --pattern-shares and exactly one object"),
        (None, _, o) => {
            bail!("a pattern-share pair needs two objects, or one with --sequence; got {o}")
        }
    }
    let mut s = measure_combined(&objects, &seqs)?;
    if a.noise_sigma != 0.0 {
        s = add_noise(&s, &NoiseModel::gaussian(a.noise_sigma, a.noise_seed))?;
    }
    write(&a.out, s.to_json()? + "\n")
}

fn cmd_add_noise(a: AddNoise) -> Result<()> {
    let s = MeasurementSeries::from_json(&read(&a.series)?)?;
    let out = add_noise(&s, &NoiseModel::gaussian(a.noise_sigma, a.noise_seed))?;
    write(&a.out, out.to_json()? + "\n")
}

fn cmd_reconstruct(a: Reconstruct) -> Result<()> {
    let s = MeasurementSeries::from_json(&read(&a.series)?)?;
    let dims = (s.meta.width, s.meta.height);
    let seqs = sequences(&a.patterns, dims, 1, Some(&s))?;
    let p = if seqs.len() == 2 {
        match a.sequence {
            WhichArg::A => &seqs[0],
            WhichArg::B => &seqs[1],
        }
    } else {
        &seqs[0]
    };
    let cfg = SolverConfig {
        method: a.method,
        lambda: a.lambda,
        max_iters: a.max_iters,
        step_policy: a.step.map_or(StepPolicy::Backtracking, StepPolicy::Fixed),
        nonneg: !a.allow_negative,
        upper: a.upper,
        tol: a.tol,
        record_log: a.log.is_some(),
    };
    let r = reconstruct(&s, p, &cfg)?;
    pnm::save_image(&a.out, &r.image)?;
    if let Some(path) = a.log {
        let mut buf = Vec::new();
        for rec in &r.log {
            serde_json::to_writer(&mut buf, rec)?;
            buf.push(b'\n');
        }
        write(&path, buf)?;
    }
    Ok(())
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| anyhow!("{flag} is required in this mode"))
}

fn reveal(a: Reveal) -> Result<()> {
    let mask = match a.mode {
        RevealMode::Overlay => {
            let img = load_image(require(&a.image, "--image")?)?;
            let img = if a.no_rescale {
                img
            } else {
                vc_opaque::rescale_overlay(&img)?
            };
            vc_opaque::extract_secret_from_overlay(&img, a.tau)?
        }
        RevealMode::Patterns => {
            let (_, pair) =
                PatternShareManifest::load(require(&a.pattern_shares, "--pattern-shares")?)?;
            vc_patterns::reveal_secret_from_patterns(&pair)
        }
        RevealMode::Reconstruction => {
            let combined = load_image(require(&a.image, "--image")?)?;
            let single = load_image(require(&a.single, "--single")?)?;
            vc_patterns::reveal_secret_from_reconstruction(&combined, &single)?
        }
    };
    pnm::save_pbm(&a.out, &mask)?;
    Ok(())
}

fn decode_qr(a: DecodeQr) -> Result<()> {
    let is_pbm = a.input.extension().is_some_and(|e| e == "pbm");
    let d = if is_pbm {
        qr_decode(&load_bits(&a.input)?)?
    } else {
        qr_decode_gray(&load_image(&a.input)?, a.threshold.into())?
    };
    let mut out = std::io::stdout().lock();
    if a.json {
        let record = serde_json::json!({
            "text": d.text(),
            "corrected_errors": d.corrected_errors,
            "version": d.version,
            "ec_level": d.ec_level,
            "mask": d.mask_id,
        });
        writeln!(out, "{}", serde_json::to_string(&record)?)?;
    } else {
        writeln!(out, "{}", d.text())?;
    }
    Ok(())
}

fn metrics(a: Metrics) -> Result<()> {
    let record = if a.bits {
        let x = load_bits(&a.a)?;
        let y = load_bits(&a.b)?;
        serde_json::json!({
            "dot_accuracy": dot_accuracy(&x, &y)?,
            "f1": f1(&x, &y)?,
        })
    } else {
        let x = load_image(&a.a)?;
        let y = load_image(&a.b)?;
        let v = psnr(&x, &y)?;
        let v = if v.is_infinite() {
            serde_json::json!("inf")
        } else {
            serde_json::json!(v)
        };
        serde_json::json!({ "psnr": v })
    };
    println!("{}", serde_json::to_string(&record)?);
    Ok(())
}

fn run_pipeline(a: Pipeline) -> std::result::Result<(), Failure> {
    let text = read(&a.manifest).map_err(|e| Failure::new("manifest", e))?;
    let m = RunManifest::from_json(&text).map_err(|e| Failure::new("manifest", e.into()))?;
    let base = a.manifest.parent().unwrap_or(Path::new("."));
    let report = pipeline::run(&m, base).map_err(|e| Failure {
        stage: e.stage.into(),
        message: e.error.to_string().replace('\n', " "),
        code: 1,
    })?;
    let json = report
        .to_json()
        .map_err(|e| Failure::new("report", e.into()))?
        + "\n";
    match &a.report {
        Some(p) => write(p, &json).map_err(|e| Failure::new("report", e))?,
        None => print!("{json}"),
    }
    if !report.passed {
        return Err(Failure {
            stage: "thresholds".into(),
            message: report.failures.join("; "),
            code: 2,
        });
    }
    Ok(())
}
