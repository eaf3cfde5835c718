//! `qrg`: family generation and certification, game values, probability
//! curves and detector simulations for hidden-matching retrieval games.
//!
//! Exit codes: 0 success, 1 negative certification, 2 usage or parse error,
//! 3 solver non-convergence.

mod config;
mod plot;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qrg::coherent::{self, curve, curve_csv, format_sig9, AlphaGrid, CoherentGameParams, CurveRow, Variant};
use qrg::game::{cheating_bound, selective_value, selective_value_sampled, HiddenMatchingGame, OaMode};
use qrg::matchings::{canonical_family, find_distinct_label_cycle, join, sextet_family, Family};
use qrg::montecarlo::{adjudicate, run_trials};
use qrg::sdp::{physical_value, DiscriminationProblem, SolverOptions};

use config::ConfigFile;

#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<qrg::Error> for Failure {
    fn from(e: qrg::Error) -> Self {
        let code = if matches!(e, qrg::Error::NotConverged { .. }) { 3 } else { 2 };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(name = "qrg", version, about = "Hidden-matching quantum retrieval games")]
struct Cli {
    /// Plain-text key=value file supplying defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Default)]
struct FamilyArgs {
    /// `canonical`, `sextet`, or the path of a family file.
    #[arg(long, alias = "file")]
    family: Option<String>,
    /// Number of matchings.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or certify matching families.
    Matchings {
        #[command(subcommand)]
        action: MatchingsAction,
    },
    /// Selective or physical value of the joint game.
    Value {
        #[command(subcommand)]
        kind: ValueKind,
    },
    /// Winning, cheating and threshold curves over an alpha grid.
    Curves(CurvesArgs),
    /// Monte Carlo run of the honest coherent-state receiver.
    Simulate(SimulateArgs),
}

#[derive(Subcommand)]
enum MatchingsAction {
    /// Write a family file.
    Gen {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print `independent` (exit 0) or `dependent` with a cycle (exit 1).
    Check {
        #[command(flatten)]
        family: FamilyArgs,
    },
}

#[derive(clap::Args)]
struct ValueArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Duality-gap target for `pv`.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// For `sv`: sample this many answers instead of enumerating.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum ValueKind {
    Sv(ValueArgs),
    Pv(ValueArgs),
}

#[derive(clap::Args)]
struct CurvesArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Parameter set of one of the figures: fig5, fig6, fig7, fig8, fig9.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    alpha_min: Option<f64>,
    #[arg(long)]
    alpha_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    /// Skip the cheating SDP (column becomes NA).
    #[arg(long)]
    no_cheating: bool,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// CSV path; presets with several series write one file per series.
    #[arg(long)]
    output: Option<PathBuf>,
    /// SVG path for a line plot of all series.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// 1-based index of the matching Bob measures.
    #[arg(long)]
    matching: Option<usize>,
    /// Formula printed first: `paper` or `conditional`.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = ConfigFile::load(cli.config.as_deref()).and_then(|cfg| match cli.command {
        Command::Matchings { action } => cmd_matchings(action, &cfg),
        Command::Value { kind } => cmd_value(kind, &cfg),
        Command::Curves(args) => cmd_curves(args, &cfg),
        Command::Simulate(args) => cmd_simulate(args, &cfg),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

fn resolve_family(args: &FamilyArgs, cfg: &ConfigFile, default_k: usize) -> Result<Family, Failure> {
    let spec = cfg.get("family", args.family.clone(), "canonical".to_string())?;
    let k = cfg.get("k", args.k, default_k)?;
    let family = match spec.as_str() {
        "canonical" => canonical_family(k)?,
        "sextet" => sextet_family(k)?,
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {path}: {e}")))?;
            let f = Family::parse(&text).map_err(|e| Failure::usage(format!("{path}: {e}")))?;
            if args.k.is_some() && f.k() != k {
                return Err(Failure::usage(format!("{path} holds {} matchings, --k says {k}", f.k())));
            }
            f
        }
    };
    Ok(family)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn solver_options(cfg: &ConfigFile, tol: Option<f64>, max_iter: Option<usize>) -> Result<SolverOptions, Failure> {
    let d = SolverOptions::default();
    Ok(SolverOptions {
        tol: cfg.get("tol", tol, d.tol)?,
        max_iter: cfg.get("max-iter", max_iter, d.max_iter)?,
    })
}

fn cmd_matchings(action: MatchingsAction, cfg: &ConfigFile) -> Result<u8, Failure> {
    match action {
        MatchingsAction::Gen { family, output } => {
            let f = resolve_family(&family, cfg, 2)?;
            let out = cfg.pick("output", output)?;
            write_output(out.as_deref(), &f.to_text())?;
            Ok(0)
        }
        MatchingsAction::Check { family } => {
            let f = resolve_family(&family, cfg, 2)?;
            let g = join(f.matchings())?;
            match find_distinct_label_cycle(&g) {
                None => {
                    println!("independent");
                    Ok(0)
                }
                Some(w) => {
                    println!("dependent");
                    println!("witness={w}");
                    Ok(1)
                }
            }
        }
    }
}

fn cmd_value(kind: ValueKind, cfg: &ConfigFile) -> Result<u8, Failure> {
    let (physical, args) = match kind {
        ValueKind::Sv(a) => (false, a),
        ValueKind::Pv(a) => (true, a),
    };
    let family = resolve_family(&args.family, cfg, 2)?;
    let k = family.k();
    let game = HiddenMatchingGame::new(family)?;
    let mut out = String::new();
    if physical {
        let opts = solver_options(cfg, args.tol, args.max_iter)?;
        let problem = DiscriminationProblem::from_ensemble(&game.ensemble()?, game.family())?;
        let sol = physical_value(&problem, &opts)?;
        out.push_str(&format!("value={:.12}\nbound={}\n", sol.primal_value, format_sig9(cheating_bound(k))));
        out.push_str(&sol.report(&problem)?);
    } else {
        let mode = if game.is_independent() { OaMode::ClosedForm } else { OaMode::Numeric };
        let samples = cfg.pick::<usize>("samples", args.samples)?;
        let v = match samples {
            Some(s) => selective_value_sampled(&game, mode, s, cfg.get("seed", args.seed, 0)?)?,
            None => selective_value(&game, mode)?,
        };
        out.push_str(&format!(
            "value={:.12}\nbound={}\nargmax={}\nanswers_examined={}\nsampled={}\n",
            v.sv,
            format_sig9(v.bound),
            v.argmax,
            v.answers_examined,
            samples.is_some()
        ));
    }
    print!("{out}");
    Ok(0)
}

/// One `(eta, nu)` curve of a figure.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SeriesSpec {
    eta: f64,
    nu: f64,
}

struct Preset {
    family: &'static str,
    k: usize,
    series: Vec<SeriesSpec>,
}

const PRESET_ALPHA_MAX: f64 = 3.0;
const PRESET_STEPS: usize = 61;

fn preset(name: &str) -> Result<Preset, Failure> {
    let s = |eta: f64, nu: f64| SeriesSpec { eta, nu };
    let levels = [1.0, 0.8, 0.6, 0.4, 0.2];
    let visibilities = [1.0, 0.95, 0.9, 0.85, 0.8];
    let p = match name {
        "fig5" => Preset {
            family: "canonical",
            k: 2,
            series: vec![s(1.0, 1.0)],
        },
        "fig6" => Preset {
            family: "sextet",
            k: 3,
            series: vec![s(1.0, 1.0)],
        },
        "fig7" => Preset {
            family: "canonical",
            k: 2,
            series: levels.iter().map(|&e| s(e, 1.0)).collect(),
        },
        "fig8" => Preset {
            family: "canonical",
            k: 2,
            series: visibilities.iter().map(|&v| s(1.0, v)).collect(),
        },
        "fig9" => Preset {
            family: "canonical",
            k: 2,
            series: visibilities.iter().zip(levels).map(|(&v, e)| s(e, v)).collect(),
        },
        other => return Err(Failure::usage(format!("unknown preset {other:?} (fig5..fig9)"))),
    };
    Ok(p)
}

fn series_path(base: &Path, spec: SeriesSpec) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("curve");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    let name = format!("{stem}_eta{}_nu{}.{ext}", format_sig9(spec.eta), format_sig9(spec.nu));
    base.with_file_name(name)
}

fn cmd_curves(args: CurvesArgs, cfg: &ConfigFile) -> Result<u8, Failure> {
    let preset = cfg.pick::<String>("preset", args.preset.clone())?.map(|p| preset(&p)).transpose()?;
    let mut fam_args = args.family.clone();
    if let Some(p) = &preset {
        fam_args.family = Some(cfg.get("family", fam_args.family.clone(), p.family.to_string())?);
        fam_args.k = Some(cfg.get("k", fam_args.k, p.k)?);
    }
    let family = resolve_family(&fam_args, cfg, 2)?;
    let (def_max, def_steps) = if preset.is_some() { (PRESET_ALPHA_MAX, PRESET_STEPS) } else { (3.0, 61) };
    let grid = AlphaGrid::new(
        cfg.get("alpha-min", args.alpha_min, 0.0)?,
        cfg.get("alpha-max", args.alpha_max, def_max)?,
        cfg.get("steps", args.steps, def_steps)?,
    )?;
    let series = match &preset {
        Some(p) if args.eta.is_none() && args.nu.is_none() => p.series.clone(),
        _ => vec![SeriesSpec {
            eta: cfg.get("eta", args.eta, 1.0)?,
            nu: cfg.get("nu", args.nu, 1.0)?,
        }],
    };
    let opts = solver_options(cfg, args.tol, args.max_iter)?;
    let output = cfg.pick("output", args.output.clone())?;
    if series.len() > 1 && output.is_none() {
        return Err(Failure::usage("this preset has several series; pass --output"));
    }
    let with_cheating = !args.no_cheating && family.n() <= coherent::MAX_CHEATING_N;

    // the cheating probability ignores eta and nu, so it is solved once
    let first = curve(&family, &grid, series[0].eta, series[0].nu, with_cheating, &opts)?;
    let mut tables: Vec<(SeriesSpec, Vec<CurveRow>)> = vec![(series[0], first)];
    for &spec in &series[1..] {
        let mut rows = curve(&family, &grid, spec.eta, spec.nu, false, &opts)?;
        for (r, f) in rows.iter_mut().zip(&tables[0].1) {
            r.cheating = f.cheating;
            r.threshold = f.threshold;
        }
        tables.push((spec, rows));
    }

    for (spec, rows) in &tables {
        let path = match &output {
            Some(p) if tables.len() > 1 => Some(series_path(p, *spec)),
            other => other.clone(),
        };
        write_output(path.as_deref(), &curve_csv(rows))?;
        if let Some(p) = path {
            eprintln!("wrote {}", p.display());
        }
    }
    let failed = tables[0].1.iter().filter(|r| with_cheating && r.cheating.is_none()).count();
    if failed > 0 {
        eprintln!("warning: cheating SDP failed at {failed} grid point(s); marked NA");
    }

    if let Some(plot_path) = cfg.pick::<PathBuf>("plot", args.plot)? {
        let mut lines = Vec::new();
        for (spec, rows) in &tables {
            lines.push(plot::Series {
                label: format!("win eta={} nu={}", format_sig9(spec.eta), format_sig9(spec.nu)),
                points: rows.iter().map(|r| (r.alpha, r.winning_paper)).collect(),
                dashed: false,
            });
        }
        if with_cheating {
            let rows = &tables[0].1;
            lines.push(plot::Series {
                label: format!("cheating k={}", family.k()),
                points: rows.iter().map(|r| (r.alpha, r.cheating.unwrap_or(f64::NAN))).collect(),
                dashed: true,
            });
            lines.push(plot::Series {
                label: "(1+cheating)/2".into(),
                points: rows.iter().map(|r| (r.alpha, r.threshold.unwrap_or(f64::NAN))).collect(),
                dashed: true,
            });
        }
        let svg = plot::svg(&lines, "alpha", "probability");
        std::fs::write(&plot_path, svg).map_err(|e| Failure::usage(format!("cannot write {}: {e}", plot_path.display())))?;
    }
    Ok(0)
}

fn cmd_simulate(args: SimulateArgs, cfg: &ConfigFile) -> Result<u8, Failure> {
    let family = resolve_family(&args.family, cfg, 2)?;
    let params = CoherentGameParams::new(
        family,
        cfg.get("alpha", args.alpha, 1.0)?,
        cfg.get("eta", args.eta, 1.0)?,
        cfg.get("nu", args.nu, 1.0)?,
    )?;
    let trials = cfg.get("trials", args.trials, 100_000)?;
    let seed = cfg.get("seed", args.seed, 0)?;
    let matching = cfg.get("matching", args.matching, 1)?;
    if matching == 0 || matching > params.k() {
        return Err(Failure::usage(format!("--matching must be in 1..={}", params.k())));
    }
    let variant: Variant = cfg
        .get("variant", args.variant, "paper".to_string())?
        .parse()
        .map_err(|e: qrg::Error| Failure::usage(e.to_string()))?;
    let report = run_trials(&params, matching - 1, trials, seed)?;
    let csv = report.to_csv();
    let verdict = adjudicate(&params, report);
    let chosen = match variant {
        Variant::PaperExact => verdict.paper,
        Variant::Conditional => verdict.conditional,
    };
    let summary = format!(
        "variant={}\nwinning={}\n{}",
        variant.name(),
        format_sig9(chosen),
        verdict.summary()
    );
    let output = cfg.pick::<PathBuf>("output", args.output)?;
    write_output(output.as_deref(), &csv)?;
    if output.is_some() {
        print!("{summary}");
    } else {
        eprint!("{summary}");
    }
    Ok(0)
}
