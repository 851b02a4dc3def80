//! Command-line front end.
//!
//! Exit codes: 0 certified / holds, 1 refuted / fails, 2 inconclusive or
//! heuristic failure, 64 usage or input error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::conditions::{
    self, check_attractivity_sufficient, check_existence, format_control, WitnessMap,
    DEFAULT_ENUMERATION_CAP,
};
use crate::error::{Error, Result};
use crate::heuristic::{heuristic_witness_map, HeuristicConfig};
use crate::model::{load_model, Hyperbox, LawDocument, NetworkModel};
use crate::sim::{monte_carlo, write_svg, SimConfig};
use crate::synthesis::{synthesize_attractive, synthesize_invariant};
use crate::verify::{
    hull_inclusion, scalar_minimal_box, verify_piecewise_law, vertex_necessity, Status,
    DEFAULT_DISTURBANCE_CAP,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REFUTED: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "finbox", version, about = "Robust invariant boxes for finite-alphabet logistic networks")]
struct Cli {
    /// Write a reproducibility manifest to this path.
    #[arg(long, global = true, value_name = "PATH")]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exhaustive,
    Lp,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide the existence (or, with --strict, the attractivity) condition.
    Check {
        model: PathBuf,
        #[arg(long)]
        strict: bool,
        #[arg(long, value_enum, default_value = "exhaustive")]
        mode: Mode,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        /// LP mode: keep the simplex vertex instead of centring on the
        /// optimal face.
        #[arg(long)]
        vertex: bool,
        /// Largest |U|^m enumerated in exhaustive mode.
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        cap: u128,
        #[arg(long)]
        json: bool,
    },
    /// Build a threshold law and its invariant box.
    Synthesize {
        model: PathBuf,
        #[arg(long)]
        strict: bool,
        #[arg(long, value_enum, default_value = "exhaustive")]
        mode: Mode,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        #[arg(long)]
        vertex: bool,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        cap: u128,
        #[arg(long)]
        out: PathBuf,
    },
    /// Vertex necessity and exact invariance check of a law on a box
    /// (`24,8` or `10:34,10:18`).
    Verify {
        model: PathBuf,
        law: PathBuf,
        #[arg(allow_hyphen_values = true)]
        r#box: String,
    },
    /// Smallest invariant interval [0, K] of a scalar model.
    Minbox {
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        cap: u128,
    },
    /// Convex-hull inclusion diagnostics.
    Hull {
        model: PathBuf,
        #[arg(long)]
        strict: bool,
    },
    /// Seeded closed-loop Monte Carlo.
    Simulate {
        model: PathBuf,
        law: PathBuf,
        /// Box to measure against; defaults to the one stored in the law file.
        #[arg(long = "box", allow_hyphen_values = true)]
        hyperbox: Option<String>,
        #[arg(long, default_value_t = 30)]
        paths: usize,
        #[arg(long, default_value_t = 600)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `lo,hi` for every axis, or `lo_1:hi_1,...,lo_n:hi_n`.
        #[arg(long, allow_hyphen_values = true)]
        init: String,
        /// Output directory for CSV trajectories, summary and manifest.
        #[arg(long, default_value = "sim_out")]
        out: PathBuf,
        /// SVG chart of the first path.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check { .. } => "check",
            Command::Synthesize { .. } => "synthesize",
            Command::Verify { .. } => "verify",
            Command::Minbox { .. } => "minbox",
            Command::Hull { .. } => "hull",
            Command::Simulate { .. } => "simulate",
        }
    }
}

/// Run with process stdout/stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let threads = match thread_count() {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start worker pool: {e}");
            return EXIT_INCONCLUSIVE;
        }
    };
    let name = cli.command.name();
    let mut manifest = Manifest::new(&argv, threads);
    let mut buf: Vec<u8> = Vec::new();
    let result = pool.install(|| dispatch(&cli, &mut buf, &mut manifest));
    let _ = out.write_all(&buf);
    let code = match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error [{name}]: {e}");
            error_code(&e)
        }
    };
    manifest.exit_code = Some(code);
    if let Some(path) = &cli.manifest {
        if let Err(e) = manifest.write(path) {
            let _ = writeln!(err, "error [{name}]: cannot write manifest: {e}");
        }
    }
    code
}

fn thread_count() -> std::result::Result<usize, String> {
    match std::env::var("FINBOX_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| format!("FINBOX_THREADS must be a non-negative integer, got {v:?}")),
        Err(_) => Ok(0),
    }
}

fn error_code(e: &Error) -> i32 {
    match e {
        Error::Heuristic { .. } | Error::CapExceeded { .. } | Error::Lp(_) | Error::LawUndefined(_) => {
            EXIT_INCONCLUSIVE
        }
        _ => EXIT_USAGE,
    }
}

/// Inputs (with SHA-256), seed, versions and outputs of one run.
struct Manifest {
    argv: Vec<String>,
    threads: usize,
    inputs: Vec<(String, String)>,
    seed: Option<u64>,
    outputs: Vec<String>,
    exit_code: Option<i32>,
}

impl Manifest {
    fn new(argv: &[OsString], threads: usize) -> Self {
        Manifest {
            argv: argv.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
            threads,
            inputs: Vec::new(),
            seed: None,
            outputs: Vec::new(),
            exit_code: None,
        }
    }

    fn read_input(&mut self, path: &Path) -> Result<String> {
        let text = std::fs::read_to_string(path)?;
        self.inputs.push((
            path.display().to_string(),
            hex::encode(Sha256::digest(text.as_bytes())),
        ));
        Ok(text)
    }

    fn to_json_value(&self) -> serde_json::Value {
        json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "argv": self.argv,
            "threads": self.threads,
            "inputs": self.inputs.iter().map(|(p, h)| json!({"path": p, "sha256": h})).collect::<Vec<_>>(),
            "seed": self.seed,
            "outputs": self.outputs,
            "exit_code": self.exit_code,
        })
    }

    fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_json_value())? + "\n")?;
        Ok(())
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, manifest: &mut Manifest) -> Result<i32> {
    match &cli.command {
        Command::Check {
            model,
            strict,
            mode,
            epsilon,
            vertex,
            cap,
            json,
        } => {
            let model = load_model(&manifest.read_input(model)?)?;
            let heur = heuristic_config(*epsilon, !*vertex);
            cmd_check(&model, *strict, *mode, &heur, *cap, *json, out)
        }
        Command::Synthesize {
            model,
            strict,
            mode,
            epsilon,
            vertex,
            cap,
            out: law_path,
        } => {
            let model = load_model(&manifest.read_input(model)?)?;
            let heur = heuristic_config(*epsilon, !*vertex);
            let code = cmd_synthesize(&model, *strict, *mode, &heur, *cap, law_path, out)?;
            if code == EXIT_OK {
                manifest.outputs.push(law_path.display().to_string());
                manifest.exit_code = Some(code);
                let mpath = sidecar(law_path);
                manifest.write(&mpath)?;
            }
            Ok(code)
        }
        Command::Verify { model, law, r#box } => {
            let model = load_model(&manifest.read_input(model)?)?;
            let doc = LawDocument::from_json(&manifest.read_input(law)?)?;
            let hyperbox = Hyperbox::parse(r#box)?;
            cmd_verify(&model, &doc, &hyperbox, out)
        }
        Command::Minbox { model, cap } => {
            let model = load_model(&manifest.read_input(model)?)?;
            cmd_minbox(&model, *cap, out)
        }
        Command::Hull { model, strict } => {
            let model = load_model(&manifest.read_input(model)?)?;
            let v = hull_inclusion(&model, *strict, DEFAULT_ENUMERATION_CAP, DEFAULT_DISTURBANCE_CAP)?;
            let label = if *strict {
                "interior hull inclusion"
            } else {
                "hull inclusion"
            };
            writeln!(out, "{label}: {}", status_word(v.status))?;
            writeln!(out, "{}", serde_json::to_string_pretty(&v.to_json_value())?)?;
            Ok(status_code(v.status))
        }
        Command::Simulate {
            model,
            law,
            hyperbox,
            paths,
            horizon,
            seed,
            init,
            out: dir,
            svg,
        } => {
            let model = load_model(&manifest.read_input(model)?)?;
            let doc = LawDocument::from_json(&manifest.read_input(law)?)?;
            let hyperbox = match (hyperbox, &doc.hyperbox) {
                (Some(s), _) => Hyperbox::parse(s)?,
                (None, Some(b)) => b.clone(),
                (None, None) => {
                    return Err(Error::Precondition(
                        "no --box given and the law file stores none".into(),
                    ))
                }
            };
            let (lo, hi) = parse_init(init, model.n())?;
            let config = SimConfig {
                paths: *paths,
                horizon: *horizon,
                seed: *seed,
                init_low: lo,
                init_high: hi,
            };
            manifest.seed = Some(*seed);
            let code = cmd_simulate(&model, &doc, &hyperbox, &config, dir, svg.as_deref(), out, manifest)?;
            manifest.exit_code = Some(code);
            manifest.write(&dir.join("manifest.json"))?;
            Ok(code)
        }
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(OsString::from).unwrap_or_default();
    name.push(".manifest.json");
    path.with_file_name(name)
}

fn status_word(s: Status) -> &'static str {
    match s {
        Status::Certified => "certified",
        Status::Refuted => "refuted",
        Status::Inconclusive => "inconclusive",
    }
}

fn status_code(s: Status) -> i32 {
    match s {
        Status::Certified => EXIT_OK,
        Status::Refuted => EXIT_REFUTED,
        Status::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn parse_init(s: &str, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad --init value {t:?}")))
    };
    if s.contains(':') {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for part in s.split(',') {
            let (a, b) = part
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("bad --init range {part:?}")))?;
            lo.push(num(a)?);
            hi.push(num(b)?);
        }
        if lo.len() != n {
            return Err(Error::Dimension(format!("--init has {} ranges, model has n = {n}", lo.len())));
        }
        Ok((lo, hi))
    } else {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::Parse(format!("--init expects lo,hi, got {s:?}")));
        }
        Ok((vec![num(parts[0])?; n], vec![num(parts[1])?; n]))
    }
}

fn heuristic_config(epsilon: f64, center: bool) -> HeuristicConfig {
    HeuristicConfig {
        epsilon,
        center,
        ..HeuristicConfig::default()
    }
}

fn obtain_witnesses(
    model: &NetworkModel,
    strict: bool,
    mode: Mode,
    heur: &HeuristicConfig,
    cap: u128,
) -> Result<std::result::Result<WitnessMap, conditions::ConditionVerdict>> {
    match mode {
        Mode::Lp => Ok(Ok(heuristic_witness_map(model, heur)?.0)),
        Mode::Exhaustive => {
            let v = if strict {
                check_attractivity_sufficient(model, cap)?
            } else {
                check_existence(model, cap)?
            };
            match v.witnesses.clone() {
                Some(w) => Ok(Ok(w)),
                None => Ok(Err(v)),
            }
        }
    }
}

fn cmd_check(
    model: &NetworkModel,
    strict: bool,
    mode: Mode,
    heur: &HeuristicConfig,
    cap: u128,
    as_json: bool,
    out: &mut dyn Write,
) -> Result<i32> {
    let label = if strict || mode == Mode::Lp { "(5)" } else { "(4)" };
    let witnesses = match obtain_witnesses(model, strict, mode, heur, cap)? {
        Ok(w) => w,
        Err(verdict) => {
            if as_json {
                writeln!(out, "{}", serde_json::to_string_pretty(&verdict.to_json_value())?)?;
            } else {
                writeln!(out, "condition {label}: fails")?;
                for z in &verdict.failing {
                    writeln!(out, "  empty at vertex {z}")?;
                }
            }
            return Ok(EXIT_REFUTED);
        }
    };
    let b = conditions::bounds(model, &witnesses);
    if as_json {
        let mut v = json!({
            "condition": label,
            "holds": true,
            "mode": match mode { Mode::Exhaustive => "exhaustive", Mode::Lp => "lp" },
            "witnesses": witnesses.to_json_value(),
            "L_o": b.l_o,
            "box": b.hyperbox(),
        });
        if let (Some(ls), Some(d)) = (&b.l_star, b.delta) {
            v["L_star"] = json!(ls);
            v["delta"] = json!(d);
        }
        writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
    } else {
        let how = if mode == Mode::Lp { " (LP heuristic, exactly re-verified)" } else { "" };
        writeln!(out, "condition {label}: holds{how}")?;
        writeln!(out, "witnesses: {}", witnesses.controls().len())?;
        for (z, u) in witnesses.iter() {
            writeln!(out, "  {z} -> {}", format_control(u))?;
        }
        writeln!(out, "L_o = {:?}", b.l_o)?;
        if let (Some(ls), Some(d)) = (&b.l_star, b.delta) {
            writeln!(out, "L_star = {ls:?}, delta = {d}")?;
        }
        writeln!(out, "box upper = {:?}", b.hyperbox().upper)?;
    }
    Ok(EXIT_OK)
}

fn cmd_synthesize(
    model: &NetworkModel,
    strict: bool,
    mode: Mode,
    heur: &HeuristicConfig,
    cap: u128,
    law_path: &Path,
    out: &mut dyn Write,
) -> Result<i32> {
    let witnesses = match obtain_witnesses(model, strict, mode, heur, cap)? {
        Ok(w) => w,
        Err(verdict) => {
            let failing: Vec<String> = verdict.failing.iter().map(|z| z.bitstring()).collect();
            writeln!(
                out,
                "condition {} fails at {}; nothing synthesized",
                verdict.condition.label(),
                failing.join(", ")
            )?;
            return Ok(EXIT_REFUTED);
        }
    };
    let s = if witnesses.is_strict() {
        synthesize_attractive(model, &witnesses)?
    } else {
        synthesize_invariant(model, &witnesses, None)?
    };
    std::fs::write(law_path, s.document().to_json() + "\n")?;
    writeln!(out, "box upper = {:?}", s.hyperbox.upper)?;
    match s.delta() {
        Some(d) => writeln!(out, "delta = {d}")?,
        None => writeln!(out, "delta = none (invariance only)")?,
    }
    writeln!(out, "law written to {}", law_path.display())?;
    Ok(EXIT_OK)
}

fn cmd_verify(model: &NetworkModel, doc: &LawDocument, hyperbox: &Hyperbox, out: &mut dyn Write) -> Result<i32> {
    let nec = vertex_necessity(model, hyperbox, &doc.law)?;
    writeln!(out, "vertex necessity: {}", status_word(nec.status))?;
    if nec.is_refuted() {
        writeln!(out, "{}", serde_json::to_string_pretty(&nec.to_json_value())?)?;
        return Ok(EXIT_REFUTED);
    }
    let v = verify_piecewise_law(model, hyperbox, &doc.law)?;
    writeln!(out, "invariance: {}", status_word(v.status))?;
    if v.witness.is_some() {
        writeln!(out, "{}", serde_json::to_string_pretty(&v.to_json_value())?)?;
    }
    Ok(status_code(v.status))
}

fn cmd_minbox(model: &NetworkModel, cap: u128, out: &mut dyn Write) -> Result<i32> {
    match scalar_minimal_box(model, cap)? {
        Some(mb) => {
            writeln!(out, "K={}", mb.k)?;
            if let Some(below) = &mb.below {
                if let Some(gap) = &below.gap {
                    writeln!(out, "K={} refuted: {} is not covered", below.k, gap)?;
                }
            }
            writeln!(out, "{}", mb.law.to_json())?;
            Ok(EXIT_OK)
        }
        None => {
            writeln!(out, "no invariant interval up to 2 L_o")?;
            Ok(EXIT_REFUTED)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    model: &NetworkModel,
    doc: &LawDocument,
    hyperbox: &Hyperbox,
    config: &SimConfig,
    dir: &Path,
    svg: Option<&Path>,
    out: &mut dyn Write,
    manifest: &mut Manifest,
) -> Result<i32> {
    let report = monte_carlo(model, &doc.law, hyperbox, config)?;
    for p in report.write_csv_dir(dir)? {
        manifest.outputs.push(p.display().to_string());
    }
    let summary = dir.join("summary.json");
    std::fs::write(&summary, serde_json::to_string_pretty(&report.to_json_value())? + "\n")?;
    manifest.outputs.push(summary.display().to_string());
    if let Some(svg) = svg {
        let file = std::io::BufWriter::new(std::fs::File::create(svg)?);
        write_svg(&report.paths[0].trajectory, hyperbox, file)?;
        manifest.outputs.push(svg.display().to_string());
    }
    let entered = report.paths.iter().filter(|p| p.entry_time.is_some()).count();
    writeln!(out, "paths entered: {entered}/{}", report.paths.len())?;
    writeln!(out, "post-entry violations: {}", report.post_entry_violations())?;
    if let Some(d) = report.min_decrement() {
        writeln!(out, "min outside decrement: {d}")?;
    }
    Ok(if entered == report.paths.len() && report.post_entry_violations() == 0 {
        EXIT_OK
    } else {
        EXIT_REFUTED
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_ranges() {
        assert_eq!(parse_init("-5,7", 2).unwrap(), (vec![-5.0; 2], vec![7.0; 2]));
        assert_eq!(
            parse_init("-1:2,3:4", 2).unwrap(),
            (vec![-1.0, 3.0], vec![2.0, 4.0])
        );
        assert!(parse_init("1,2,3", 2).is_err());
        assert!(parse_init("1:2", 2).is_err());
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar(Path::new("/tmp/law.json")), PathBuf::from("/tmp/law.json.manifest.json"));
    }

    #[test]
    fn usage_error_code() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(run_with(["finbox", "frobnicate"], &mut o, &mut e), EXIT_USAGE);
        assert_eq!(run_with(["finbox", "--help"], &mut o, &mut e), EXIT_OK);
    }
}
