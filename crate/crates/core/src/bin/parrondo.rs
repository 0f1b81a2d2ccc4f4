use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use parrondo::classify::{classify_full, mu_game_b, mu_game_d_curve, mu_verdict, ClassifyOptions};
use parrondo::config::{ModeConfig, RunConfig, SCHEMA_VERSION};
use parrondo::hitting::{default_half_width, solve_window, BoundaryMode};
use parrondo::model::RegimeModel;
use parrondo::reproduce::reproduce;
use parrondo::simulate::{final_fortune_stats, fortune_curves_csv, Game};
use parrondo::spectral::{forward_spectrum, inverse_spectrum, Family, QrOptions};
use parrondo::Error;

#[derive(Parser)]
#[command(name = "parrondo", version, about = "Regime-switching random walks in random environments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Named configuration, e.g. game-c.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory; stdout when absent.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Fortune paths of the configured games.
    Simulate,
    /// Recurrence or transience verdict with evidence.
    Classify,
    /// Lyapunov exponents of the transfer products.
    Spectrum,
    /// Hitting probabilities of the configured target.
    Hitting,
    /// Game B ratio, or the Game D curve when configured.
    Mu,
    /// Runs every published check and writes the artifacts.
    ReproducePaper,
}

enum Failure {
    Check(String),
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => Failure::Config(msg),
            Error::InvalidSpec(_) | Error::InvalidModel(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn load(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(_), Some(_)) => return Err(Failure::Config("use either --config or --preset".into())),
        (Some(path), None) => RunConfig::load(path)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => return Err(Failure::Config("one of --config or --preset is required".into())),
    };
    if let Some(seed) = common.seed {
        cfg.params.seed = seed;
    }
    Ok(cfg)
}

fn emit(common: &Common, cfg: Option<&RunConfig>, file: &str, text: &str) -> Result<(), Failure> {
    let dir = common.out.clone().or_else(|| cfg.and_then(|c| c.out_dir.clone()).map(PathBuf::from));
    match dir {
        Some(dir) => {
            std::fs::create_dir_all(&dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
            let path = dir.join(file);
            std::fs::write(&path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
        }
        None => stdout(text),
    }
}

fn stdout(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Runtime(e.to_string())),
        _ => Ok(()),
    }
}

fn to_json(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json");
    s.push('\n');
    s
}

fn env_for(cfg: &RunConfig, model: &RegimeModel) -> Result<parrondo::envgen::EnvRealization, Failure> {
    Ok(model.realize(cfg.params.env_window, cfg.params.seed)?)
}

fn simulate(common: &Common, format: Format) -> Result<(), Failure> {
    let cfg = load(common)?;
    let games = cfg.fortune_games();
    let mut built = Vec::new();
    for g in &games {
        let model = RegimeModel::from_spec(&g.model)?;
        let env = env_for(&cfg, &model)?;
        built.push((g, model, env));
    }
    let games: Vec<Game<'_>> = built
        .iter()
        .map(|(g, model, env)| Game { name: g.name.clone(), model, env, start_regime: g.start_regime - 1 })
        .collect();
    let p = &cfg.params;
    match format {
        Format::Csv => {
            let csv = fortune_curves_csv(&games, p.n_steps, p.seed)?;
            emit(common, Some(&cfg), "fortune.csv", &csv)
        }
        Format::Json => {
            let stats = games
                .iter()
                .map(|g| final_fortune_stats(g, p.n_steps, p.replicates, p.seed))
                .collect::<Result<Vec<_>, _>>()?;
            let v = json!({ "schema_version": SCHEMA_VERSION, "command": "simulate", "seed": p.seed, "games": stats });
            emit(common, Some(&cfg), "fortune.json", &to_json(&v))
        }
    }
}

fn classify(common: &Common) -> Result<(), Failure> {
    let cfg = load(common)?;
    let model = cfg.regime_model()?;
    let e = env_for(&cfg, &model)?;
    let opts = ClassifyOptions {
        n_steps: cfg.params.spectrum_steps,
        estimate_gamma: cfg.params.estimate_gamma,
        gamma_tol: cfg.params.gamma_tol,
    };
    let c = classify_full(&model, &e, &opts)?;
    let v = json!({ "schema_version": SCHEMA_VERSION, "command": "classify", "name": cfg.name, "classification": c });
    emit(common, Some(&cfg), "classify.json", &to_json(&v))
}

fn spectrum(common: &Common, format: Format) -> Result<(), Failure> {
    let cfg = load(common)?;
    let model = cfg.regime_model()?;
    let e = env_for(&cfg, &model)?;
    let opts = QrOptions { n_steps: cfg.params.spectrum_steps, ..QrOptions::default() };
    let mut families = vec![Family::Full];
    if model.rank().r < model.m() {
        families.push(Family::Reduced);
    }
    let mut results = Vec::new();
    for f in families {
        let fwd = forward_spectrum(&model, &e, f, opts);
        let inv = inverse_spectrum(&model, &e, f, opts);
        match (fwd, inv) {
            (Ok(a), Ok(b)) => {
                results.push(a);
                results.push(b);
            }
            (Err(err), _) | (_, Err(err)) if f == Family::Reduced => {
                eprintln!("reduced spectrum unavailable: {err}");
            }
            (Err(err), _) | (_, Err(err)) => return Err(err.into()),
        }
    }
    match format {
        Format::Json => {
            let v = json!({ "schema_version": SCHEMA_VERSION, "command": "spectrum", "name": cfg.name, "spectra": results });
            emit(common, Some(&cfg), "spectrum.json", &to_json(&v))
        }
        Format::Csv => {
            let mut s = String::from("side,method,index,exponent,tol_zero\n");
            for r in &results {
                let side = serde_json::to_value(r.side).expect("side");
                let method = serde_json::to_value(r.method).expect("method");
                for (k, (x, t)) in r.exponents.iter().zip(&r.tol_zero).enumerate() {
                    let _ = writeln!(s, "{},{},{},{x:.17e},{t:.17e}", side.as_str().unwrap_or(""), method.as_str().unwrap_or(""), k + 1);
                }
            }
            emit(common, Some(&cfg), "spectrum.csv", &s)
        }
    }
}

fn hitting(common: &Common, format: Format) -> Result<(), Failure> {
    let cfg = load(common)?;
    let model = cfg.regime_model()?;
    let e = env_for(&cfg, &model)?;
    let p = &cfg.params;
    let window = p.window.unwrap_or_else(|| {
        let w = default_half_width(&model);
        (p.target - w, p.target + w)
    });
    let mode = match p.boundary_mode {
        ModeConfig::Killed => BoundaryMode::Killed,
        ModeConfig::Absorbed => BoundaryMode::Absorbed,
    };
    let table = solve_window(&model, &e, p.target, window, mode)?;
    match format {
        Format::Csv => emit(common, Some(&cfg), "hitting.csv", &table.to_csv()),
        Format::Json => {
            let rows: Vec<_> = table
                .sites()
                .map(|i| json!({ "i": i, "f": table.f(i).expect("site in window") }))
                .collect();
            let v = json!({
                "schema_version": SCHEMA_VERSION,
                "command": "hitting",
                "target": table.target,
                "window": table.window,
                "boundary_mode": table.mode.as_str(),
                "return_matrix": table.return_matrix,
                "rows": rows,
            });
            emit(common, Some(&cfg), "hitting.json", &to_json(&v))
        }
    }
}

fn mu(common: &Common, format: Format) -> Result<(), Failure> {
    let cfg = load(common)?;
    let p = &cfg.params;
    if p.mu_curve_points > 0 {
        let curve = mu_game_d_curve(p.mu_curve_points)?;
        return match format {
            Format::Csv => {
                let mut s = String::from("pi1,mu\n");
                for (x, m) in &curve {
                    let _ = writeln!(s, "{x},{m}");
                }
                emit(common, Some(&cfg), "mu.csv", &s)
            }
            Format::Json => {
                let v = json!({ "schema_version": SCHEMA_VERSION, "command": "mu", "curve": curve });
                emit(common, Some(&cfg), "mu.json", &to_json(&v))
            }
        };
    }
    let (p1, p2) = p.mu_p;
    let m = mu_game_b(p1, p2).map_err(|e| Failure::Config(e.to_string()))?;
    let verdict = mu_verdict(m);
    match format {
        Format::Csv => {
            let v = serde_json::to_value(verdict).expect("verdict");
            let s = format!("p1,p2,mu,verdict\n{p1},{p2},{m},{}\n", v.as_str().unwrap_or(""));
            emit(common, Some(&cfg), "mu.csv", &s)
        }
        Format::Json => {
            let v = json!({ "schema_version": SCHEMA_VERSION, "command": "mu", "p1": p1, "p2": p2, "mu": m, "verdict": verdict });
            emit(common, Some(&cfg), "mu.json", &to_json(&v))
        }
    }
}

fn reproduce_paper(common: &Common) -> Result<(), Failure> {
    let seed = common.seed.unwrap_or(42);
    let r = reproduce(seed)?;
    if let Some(dir) = &common.out {
        r.write(dir)?;
    }
    stdout(&r.report())?;
    if r.all_pass() {
        Ok(())
    } else {
        let failed: Vec<String> = r.checks.iter().filter(|c| !c.pass).map(|c| c.id.to_string()).collect();
        Err(Failure::Check(format!("failed checks: {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = &cli.common;
    let result = match cli.command {
        Command::Simulate => simulate(c, c.format.unwrap_or(Format::Csv)),
        Command::Classify => match c.format {
            Some(Format::Csv) => Err(Failure::Config("classify reports are JSON only".into())),
            _ => classify(c),
        },
        Command::Spectrum => spectrum(c, c.format.unwrap_or(Format::Json)),
        Command::Hitting => hitting(c, c.format.unwrap_or(Format::Csv)),
        Command::Mu => mu(c, c.format.unwrap_or(Format::Csv)),
        Command::ReproducePaper => reproduce_paper(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failure: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("runtime error: {msg}");
            ExitCode::from(3)
        }
    }
}
