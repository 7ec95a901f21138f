use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use chaoslab::entropy::{ckp_check, l1_distance, relative_entropy};
use chaoslab::harness::{
    fit_rate, liouville_study, replicate_seed, run_study, write_liouville, write_study, StudyConfig,
};
use chaoslab::model::{builtin_library, validate, PresetKind, ProbePlan};
use chaoslab::sde::{make_bundle, simulate_particles, write_trajectory_binary};
use chaoslab::spde::{default_tolerance, picard_solve, DensityField};
use chaoslab::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_USAGE: u8 = 64;

/// Probe tolerance for structural checks.
const VALIDATION_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "chaoslab", version, about = "Particle systems with common noise and their conditional limit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check presets or a configuration against the structural assumptions.
    Validate {
        /// Preset call, e.g. `const_iso(s=1)`; repeatable.
        #[arg(long)]
        preset: Vec<String>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Simulate one particle system and write its trajectory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        rep: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the limit equation on one replicate's common path.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        rep: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Relative entropy, L¹ distance and CKP margin between two density CSV files.
    Entropy {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
    },
    /// Run a rate study and write rows.csv, summary.json and manifest.json.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-particle entropy study.
    Liouville {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a log-log rate to `n,value` rows.
    Rate {
        #[arg(long)]
        input: PathBuf,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownPreset { .. } | Error::PresetSyntax(..) => Failure::Usage(e.to_string()),
            Error::Config(_) => Failure::Validation(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn out_dir(arg: Option<PathBuf>, cfg: &StudyConfig) -> PathBuf {
    arg.or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn load(path: &Path) -> std::result::Result<StudyConfig, Failure> {
    StudyConfig::load(path).map_err(|e| match e {
        Error::Io(_) => Failure::Runtime(format!("{}: {e}", path.display())),
        other => Failure::Validation(other.to_string()),
    })
}

fn validate_preset(spec: &str) -> Outcome {
    let lib = builtin_library();
    let name = chaoslab::model::preset::parse(spec)?.name;
    let kind = match lib.presets().iter().find(|p| p.name == name) {
        Some(p) => p.kind,
        // Resolving under any kind yields the catalog's error message.
        None => {
            return Err(lib
                .kernel(spec)
                .err()
                .map_or_else(|| Failure::Usage(format!("unknown preset {name}")), Failure::from))
        }
    };
    let (sigma, nu, init) = match kind {
        PresetKind::Kernel => {
            let k = lib.kernel(spec)?;
            print_json(&json!({
                "preset": spec,
                "kind": "kernel",
                "sup_norm": k.sup_norm(),
                "odd": k.is_odd(),
                "support_radius": k.support_radius(),
            }));
            return Ok(());
        }
        PresetKind::Sigma => {
            let d = lib.sigma(spec)?.0.shape().0;
            (spec.to_string(), format!("zero_nu(d={d})"), format!("gauss_init(d={d})"))
        }
        PresetKind::Nu => {
            let d = lib.nu(spec)?.0.shape().0;
            (format!("const_iso(s=1,d={d})"), spec.to_string(), format!("gauss_init(d={d})"))
        }
        PresetKind::Initial => {
            let d = lib.initial(spec)?.dim();
            (format!("const_iso(s=1,d={d})"), format!("zero_nu(d={d})"), spec.to_string())
        }
    };
    let coeffs = lib.coefficients(&sigma, &nu)?;
    let rho0 = lib.initial(&init)?;
    let plan = ProbePlan::standard(coeffs.dims.d, 4.0, 1000, 1.0, 1.0, 1);
    let report = validate(&coeffs, &rho0, &plan, VALIDATION_TOL)?;
    print_json(&json!({ "preset": spec, "passed": report.passed(), "report": report }));
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Validation(format!("{spec} violates the structural assumptions")))
    }
}

fn cmd_validate(presets: Vec<String>, config: Option<PathBuf>) -> Outcome {
    if presets.is_empty() && config.is_none() {
        return Err(Failure::Usage("validate needs --preset or --config".into()));
    }
    let mut failed = Vec::new();
    for p in &presets {
        match validate_preset(p) {
            Ok(()) => {}
            Err(Failure::Validation(m)) => failed.push(m),
            Err(other) => return Err(other),
        }
    }
    if let Some(path) = config {
        let cfg = load(&path)?;
        let model = cfg.resolve()?;
        let plan = ProbePlan::standard(1, 4.0, 1000, model.time.horizon(), 1.0, cfg.study.master_seed);
        let report = validate(&model.coeffs, &model.initial, &plan, VALIDATION_TOL)?;
        print_json(&json!({ "config": path, "config_hash": cfg.hash(), "passed": report.passed(), "report": report }));
        if !report.passed() {
            failed.push(format!("{} violates the structural assumptions", path.display()));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Validation(failed.join("; ")))
    }
}

fn cmd_simulate(config: PathBuf, n: usize, rep: usize, out: Option<PathBuf>) -> Outcome {
    let cfg = load(&config)?;
    let model = cfg.resolve()?;
    let seed = replicate_seed(cfg.study.master_seed, n, rep);
    let dims = model.coeffs.dims;
    let bundle = make_bundle(model.time, n, (dims.m, dims.m_common), seed)?;
    let traj = simulate_particles(&model.kernel, &model.coeffs, &model.initial, &bundle, model.time)?;
    let dir = out_dir(out, &cfg);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(format!("trajectory_n{n}_r{rep}.bin"));
    write_trajectory_binary(&traj, BufWriter::new(File::create(&path)?))?;
    print_json(&json!({ "trajectory": path, "seed": seed, "fingerprint": bundle.common.fingerprint() }));
    Ok(())
}

fn cmd_solve(config: PathBuf, n: Option<usize>, rep: usize, out: Option<PathBuf>) -> Outcome {
    let cfg = load(&config)?;
    let model = cfg.resolve()?;
    let n = n.unwrap_or(cfg.study.particles[0]);
    let seed = replicate_seed(cfg.study.master_seed, n, rep);
    let dims = model.coeffs.dims;
    let bundle = make_bundle(model.time, 1, (dims.m, dims.m_common), seed)?;
    let tol = cfg.picard.tol.unwrap_or_else(|| default_tolerance(&model.rho0));
    let sol =
        picard_solve(&model.kernel, &model.coeffs, &model.rho0, &bundle.common, model.time, tol, cfg.picard.max_iter)?;
    let dir = out_dir(out, &cfg);
    std::fs::create_dir_all(&dir)?;
    let diag = dir.join(format!("diagnostics_n{n}_r{rep}.csv"));
    sol.diagnostics.write_csv(BufWriter::new(File::create(&diag)?))?;
    let last = model.time.steps();
    let (lab, leaked) = sol.lab(last);
    let field = dir.join(format!("density_T_n{n}_r{rep}.csv"));
    lab.write_csv(BufWriter::new(File::create(&field)?))?;
    print_json(&json!({
        "diagnostics": diag,
        "density": field,
        "seed": seed,
        "fingerprint": sol.fingerprint(),
        "picard_increments": sol.increments,
        "translation_leakage": leaked,
    }));
    Ok(())
}

fn cmd_entropy(f: PathBuf, g: PathBuf) -> Outcome {
    let read = |p: &Path| -> std::result::Result<DensityField, Failure> {
        Ok(DensityField::read_csv(BufReader::new(File::open(p)?))?)
    };
    let (a, b) = (read(&f)?, read(&g)?);
    let h = relative_entropy(&a, &b)?;
    let ckp = ckp_check(&a, &b)?;
    print_json(&json!({
        "relative_entropy": if h.infinite { serde_json::Value::String("inf".into()) } else { json!(h.value) },
        "unsupported_mass": h.unsupported_mass,
        "l1_distance": l1_distance(&a, &b)?,
        "ckp_margin": if ckp.vacuous { serde_json::Value::Null } else { json!(ckp.margin) },
    }));
    Ok(())
}

fn cmd_study(config: PathBuf, out: Option<PathBuf>) -> Outcome {
    let cfg = load(&config)?;
    let start = Instant::now();
    let result = run_study(&cfg)?;
    let dir = out_dir(out, &cfg);
    write_study(&dir, &cfg, &result, start.elapsed().as_secs_f64() * 1e3)?;
    if cfg.mode.liouville_small {
        write_liouville(&dir, &cfg, &liouville_study(&cfg)?)?;
    }
    let s = &result.summary;
    print_json(&json!({
        "out": dir,
        "valid": s.valid,
        "slope": s.fit.map(|f| f.slope),
        "slope_band": s.fit.map(|f| f.slope_band),
        "failed_rows": s.failed_rows,
    }));
    if s.valid {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("study invalid: {} of {} rows failed", s.failed_rows, s.total_rows)))
    }
}

fn cmd_liouville(config: PathBuf, out: Option<PathBuf>) -> Outcome {
    let cfg = load(&config)?;
    let series = liouville_study(&cfg)?;
    let dir = out_dir(out, &cfg);
    write_liouville(&dir, &cfg, &series)?;
    print_json(&json!({
        "out": dir,
        "sup_entropy": series.sup_entropy,
        "bound": series.bound,
        "worst_ckp_margin": series.worst_ckp_margin(),
        "worst_subadditivity_margin": series.worst_subadditivity_margin(),
    }));
    Ok(())
}

#[derive(serde::Deserialize)]
struct Point {
    n: f64,
    value: f64,
}

fn cmd_rate(input: PathBuf) -> Outcome {
    let mut reader = csv::Reader::from_reader(File::open(&input)?);
    let points = reader
        .deserialize::<Point>()
        .map(|p| p.map(|p| (p.n, p.value)))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Failure::Validation(format!("{}: {e}", input.display())))?;
    let fit = fit_rate(&points).map_err(|e| Failure::Validation(e.to_string()))?;
    println!("slope {:.2}", fit.slope);
    print_json(&serde_json::to_value(fit).expect("json"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Validate { preset, config } => cmd_validate(preset, config),
        Command::Simulate { config, n, rep, out } => cmd_simulate(config, n, rep, out),
        Command::Solve { config, n, rep, out } => cmd_solve(config, n, rep, out),
        Command::Entropy { f, g } => cmd_entropy(f, g),
        Command::Study { config, out } => cmd_study(config, out),
        Command::Liouville { config, out } => cmd_liouville(config, out),
        Command::Rate { input } => cmd_rate(input),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("validation failed: {m}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}\nrun `chaoslab --help` for usage");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
