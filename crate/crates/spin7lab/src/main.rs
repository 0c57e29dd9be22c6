//! Command-line laboratory for the cohomogeneity-one Spin(7) flow: fixed
//! point catalogue, family classification, sweeps, transition bisection,
//! series residual checks and phase portraits.
//!
//! Exit codes: 0 on clean completion, 2 on configuration errors, 3 on
//! numerical failures, 4 when a verdict is undecided at the flow horizon.

mod config;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use spin7lab_core::analysis::fixed_point_catalogue;
use spin7lab_core::integrator::TerminalStatus;
use spin7lab_core::series::{
    ac_expansion, cp2_residual_report, cs_expansion, s5_residual_report, series_refine,
    ResidualReport,
};
use spin7lab_core::shooting::{
    bisect_transition, classify_member, cs_unstable_manifold, sweep_family, ClassificationResult,
    FamilyKind, FamilyMember, SweepEntry, Verdict, MANIFOLD_DELTA_DEFAULT,
};
use spin7lab_core::Error as CoreError;

use config::{Format, RunConfig, ARTIFACT_VERSION};
use output::{csv_document, fmt_f64, fmt_opt, json_document, write_artifact};
use svg::TrajectoryPath;

#[derive(Parser)]
#[command(
    name = "spin7lab",
    version,
    about = "Numerical laboratory for a one-parameter world of Spin(7) holonomy metrics"
)]
struct Cli {
    /// Flat key = value configuration file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Relative tolerance of the adaptive integrator.
    #[arg(long, global = true, value_name = "TOL")]
    tol_rel: Option<f64>,

    /// Absolute tolerance of the adaptive integrator.
    #[arg(long, global = true, value_name = "TOL")]
    tol_abs: Option<f64>,

    /// Flow-time horizon for integrations.
    #[arg(long, global = true, value_name = "S")]
    s_max: Option<f64>,

    /// Handoff time from series data to the integrator.
    #[arg(long, global = true, value_name = "T")]
    t_series: Option<f64>,

    /// Start time for conical end data.
    #[arg(long, global = true, value_name = "T")]
    t_ac_start: Option<f64>,

    /// Series order for conical end seeds.
    #[arg(long, global = true, value_name = "N")]
    ac_seed_order: Option<u32>,

    /// Offset from the origin for the segment families.
    #[arg(long, global = true, value_name = "EPS")]
    omega_eps: Option<f64>,

    /// Output path; without it artifacts go to standard output.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Artifact format.
    #[arg(long, global = true, value_parser = Format::parse, value_name = "csv|json|svg")]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    /// Metrics closing on a singular orbit S^5 (parameter mu).
    Psi,
    /// Metrics closing on a singular orbit CP^2 (parameter tau).
    Upsilon,
    /// Deformations of the cone along its unstable mode (parameter lambda).
    Cs,
    /// Conically singular segment families (height --z, parameter kappa).
    Omega,
    /// Conical end data at large t (parameters --alpha, --beta).
    AcEnd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum WhichSeries {
    /// Expansion around the S^5 singular orbit.
    S5,
    /// Expansion around the CP^2 singular orbit.
    Cp2,
    /// Small-time deformation of the cone.
    Cs,
    /// Conical end expansion at large t.
    Ac,
}

#[derive(Subcommand)]
enum Command {
    /// Catalogue the five fixed points with stability data.
    FixedPoints,
    /// Classify a single family member.
    Classify {
        #[arg(long)]
        family: FamilyArg,
        /// Family parameter (mu, tau, lambda or kappa).
        #[arg(long, allow_negative_numbers = true)]
        param: Option<f64>,
        /// Segment height for the omega family.
        #[arg(long)]
        z: Option<f64>,
        /// Amplitude of the slow decaying mode for ac-end.
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
        /// Amplitude of the fast decaying mode for ac-end.
        #[arg(long, allow_negative_numbers = true)]
        beta: Option<f64>,
    },
    /// Classify a family across a parameter grid.
    Sweep {
        #[arg(long)]
        family: FamilyArg,
        #[arg(long, allow_negative_numbers = true)]
        grid_start: f64,
        #[arg(long, allow_negative_numbers = true)]
        grid_end: f64,
        #[arg(long, default_value_t = 25)]
        grid_points: usize,
        /// Space the grid geometrically instead of linearly.
        #[arg(long)]
        log: bool,
        #[arg(long)]
        z: Option<f64>,
    },
    /// Bisect the transition between ALC and incomplete members.
    Bisect {
        #[arg(long)]
        family: FamilyArg,
        #[arg(long, allow_negative_numbers = true)]
        lo: f64,
        #[arg(long, allow_negative_numbers = true)]
        hi: f64,
        /// Target bracket width.
        #[arg(long, default_value_t = 1e-10)]
        bisect_tol: f64,
        #[arg(long)]
        z: Option<f64>,
    },
    /// Check series residuals against their nominal convergence order.
    SeriesCheck {
        #[arg(long)]
        which: WhichSeries,
        /// Comma-separated handoff times to test.
        #[arg(long, value_delimiter = ',')]
        t: Vec<f64>,
        #[arg(long, allow_negative_numbers = true)]
        mu: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        tau: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        lambda: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        beta: Option<f64>,
        /// Series order for the cone expansions.
        #[arg(long)]
        order: Option<u32>,
    },
    /// Render an (X, Y) phase portrait.
    Plot {
        #[arg(long)]
        family: FamilyArg,
        /// Comma-separated member parameters; cs defaults to its two
        /// unstable-manifold branches.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        params: Vec<f64>,
        #[arg(long)]
        z: Option<f64>,
        /// Also export the 3D trajectory samples as CSV for external rendering.
        #[arg(long, value_name = "PATH")]
        export_3d: Option<PathBuf>,
    },
}

/// A command failure carrying its exit code and a machine-readable kind.
#[derive(Debug)]
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Failure {
        Failure {
            code: 2,
            kind: "config",
            message: message.into(),
        }
    }

    fn from_core(err: CoreError) -> Failure {
        let (code, kind) = match &err {
            CoreError::Domain(_) => (2, "domain"),
            CoreError::NoBracket { .. } => (2, "no-bracket"),
            CoreError::Undecided { .. } => (4, "undecided"),
            CoreError::StepFailure { .. } => (3, "step-failure"),
            CoreError::Resonance { .. } => (3, "resonance"),
            CoreError::UnexpectedCapture { .. } => (3, "unexpected-capture"),
            CoreError::Incomparable(_) => (3, "incomparable"),
        };
        Failure {
            code,
            kind,
            message: err.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(failure) => {
            let report = serde_json::json!({
                "version": ARTIFACT_VERSION,
                "error": {
                    "kind": failure.kind,
                    "message": failure.message,
                    "exit_code": failure.code,
                },
            });
            eprintln!("{report}");
            ExitCode::from(failure.code)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    let mut config = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|err| Failure::config(format!("cannot read {}: {err}", path.display())))?;
        config
            .apply_file(&text, &path.display().to_string())
            .map_err(Failure::config)?;
    }
    merge_flags(&mut config, &cli);

    match cli.command {
        Command::FixedPoints => cmd_fixed_points(&config),
        Command::Classify {
            family,
            param,
            z,
            alpha,
            beta,
        } => cmd_classify(&config, family, param, z, alpha, beta),
        Command::Sweep {
            family,
            grid_start,
            grid_end,
            grid_points,
            log,
            z,
        } => cmd_sweep(&config, family, grid_start, grid_end, grid_points, log, z),
        Command::Bisect {
            family,
            lo,
            hi,
            bisect_tol,
            z,
        } => cmd_bisect(&config, family, lo, hi, bisect_tol, z),
        Command::SeriesCheck {
            which,
            t,
            mu,
            tau,
            lambda,
            alpha,
            beta,
            order,
        } => cmd_series_check(&config, which, t, mu, tau, lambda, alpha, beta, order),
        Command::Plot {
            family,
            params,
            z,
            export_3d,
        } => cmd_plot(&config, family, params, z, export_3d),
    }
}

fn merge_flags(config: &mut RunConfig, cli: &Cli) {
    if let Some(v) = cli.tol_rel {
        config.tol_rel = v;
    }
    if let Some(v) = cli.tol_abs {
        config.tol_abs = v;
    }
    if let Some(v) = cli.s_max {
        config.s_max = v;
    }
    if let Some(v) = cli.t_series {
        config.t_series = v;
    }
    if let Some(v) = cli.t_ac_start {
        config.t_ac_start = v;
    }
    if let Some(v) = cli.ac_seed_order {
        config.ac_seed_order = v;
    }
    if let Some(v) = cli.omega_eps {
        config.omega_eps = v;
    }
    if let Some(v) = &cli.out {
        config.out = Some(v.clone());
    }
    if let Some(v) = cli.format {
        config.format = Some(v);
    }
}

/// Whether the command should emit an artifact, and in which format.
fn artifact_format(config: &RunConfig, default: Format) -> Option<Format> {
    if config.out.is_some() || config.format.is_some() {
        Some(config.format.unwrap_or(default))
    } else {
        None
    }
}

fn require(value: Option<f64>, what: &str) -> Result<f64, Failure> {
    value.ok_or_else(|| Failure::config(format!("{what} is required for this family")))
}

fn build_member(
    family: FamilyArg,
    param: Option<f64>,
    z: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
) -> Result<FamilyMember, Failure> {
    match family {
        FamilyArg::Psi => Ok(FamilyMember::Psi {
            mu: require(param, "--param <mu>")?,
        }),
        FamilyArg::Upsilon => Ok(FamilyMember::Upsilon {
            tau: require(param, "--param <tau>")?,
        }),
        FamilyArg::Cs => Ok(FamilyMember::CsDeformation {
            lambda: require(param, "--param <lambda>")?,
        }),
        FamilyArg::Omega => Ok(FamilyMember::Omega {
            z: require(z, "--z <height>")?,
            kappa: require(param, "--param <kappa>")?,
        }),
        FamilyArg::AcEnd => Ok(FamilyMember::AcEnd {
            alpha: require(alpha, "--alpha")?,
            beta: require(beta, "--beta")?,
        }),
    }
}

fn family_kind(family: FamilyArg, z: Option<f64>) -> Result<FamilyKind, Failure> {
    match family {
        FamilyArg::Psi => Ok(FamilyKind::Psi),
        FamilyArg::Upsilon => Ok(FamilyKind::Upsilon),
        FamilyArg::Cs => Ok(FamilyKind::CsDeformation),
        FamilyArg::Omega => Ok(FamilyKind::Omega {
            z: require(z, "--z <height>")?,
        }),
        FamilyArg::AcEnd => Err(Failure::config(
            "ac-end has two parameters; sweeps and bisection support psi, upsilon, cs and omega",
        )),
    }
}

fn family_json_name(kind: FamilyKind) -> &'static str {
    match kind {
        FamilyKind::Psi => "Psi",
        FamilyKind::Upsilon => "Upsilon",
        FamilyKind::CsDeformation => "Cs",
        FamilyKind::Omega { .. } => "Omega",
    }
}

fn member_label(member: FamilyMember) -> String {
    match member {
        FamilyMember::Psi { mu } => format!("psi mu={}", fmt_f64(mu)),
        FamilyMember::Upsilon { tau } => format!("upsilon tau={}", fmt_f64(tau)),
        FamilyMember::CsDeformation { lambda } => format!("cs lambda={}", fmt_f64(lambda)),
        FamilyMember::AcEnd { alpha, beta } => {
            format!("ac-end alpha={} beta={}", fmt_f64(alpha), fmt_f64(beta))
        }
        FamilyMember::Omega { z, kappa } => {
            format!("omega z={} kappa={}", fmt_f64(z), fmt_f64(kappa))
        }
    }
}

fn terminal_name(status: TerminalStatus) -> Option<&'static str> {
    match status {
        TerminalStatus::ReachedFixedPoint(id) => Some(id.name()),
        _ => None,
    }
}

fn verdict_json(verdict: &Verdict) -> serde_json::Value {
    match verdict {
        Verdict::Alc { report } => serde_json::json!({
            "kind": "ALC",
            "ell": report.length,
            "a_over_t": report.a_over_t,
            "b_over_t": report.b_over_t,
            "c_over_t": report.c_over_t,
            "gamma_f": report.gamma_f,
            "gamma_a": report.gamma_a,
        }),
        Verdict::Ac { decay_rate } => serde_json::json!({
            "kind": "AC",
            "decay_rate": decay_rate,
        }),
        Verdict::Incomplete { s_exit, t_exit } => serde_json::json!({
            "kind": "incomplete",
            "s_exit": s_exit,
            "t_exit": t_exit,
        }),
        Verdict::Undecided { s_max } => serde_json::json!({
            "kind": "undecided",
            "s_max": s_max,
        }),
    }
}

fn verdict_line(result: &ClassificationResult) -> String {
    let label = member_label(result.member);
    let tail = match &result.verdict {
        Verdict::Alc { report } => format!(
            "ALC: ell={}, a/t={}, gamma_f={}",
            fmt_f64(report.length),
            fmt_f64(report.a_over_t),
            fmt_f64(report.gamma_f)
        ),
        Verdict::Ac { decay_rate } => format!(
            "AC: decay_rate={}",
            decay_rate.map(fmt_f64).unwrap_or_else(|| "unfitted".into())
        ),
        Verdict::Incomplete { s_exit, t_exit } => format!(
            "incomplete: s_exit={}, t_exit={}",
            fmt_f64(*s_exit),
            t_exit.map(fmt_f64).unwrap_or_else(|| "unknown".into())
        ),
        Verdict::Undecided { s_max } => format!("undecided at s_max={}", fmt_f64(*s_max)),
    };
    format!(
        "{label} -> {tail} (min cone distance {})",
        fmt_f64(result.min_cone_distance)
    )
}

fn stability_word(stable: usize, unstable: usize) -> &'static str {
    match (stable, unstable) {
        (0, _) => "source",
        (_, 0) => "sink",
        _ => "saddle",
    }
}

fn cmd_fixed_points(config: &RunConfig) -> Result<ExitCode, Failure> {
    let catalogue = fixed_point_catalogue();
    match artifact_format(config, Format::Json) {
        None => {
            println!(
                "{:<10} {:<26} {:<30} {:<7} role",
                "name", "coordinates (X, Y, Z)", "eigenvalues", "type"
            );
            for record in &catalogue {
                let p = record.coordinates;
                let eigs = record
                    .eigenvalues
                    .iter()
                    .map(|e| format!("{:.4}", e.re))
                    .collect::<Vec<_>>()
                    .join(", ");
                println!(
                    "{:<10} ({:.4}, {:.4}, {:.4}) {:<30} {:<7} {}",
                    record.id.name(),
                    p.x,
                    p.y,
                    p.z,
                    eigs,
                    stability_word(record.stable_dim, record.unstable_dim),
                    record.label
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Some(Format::Json) => {
            let rows: Vec<serde_json::Value> = catalogue
                .iter()
                .map(|record| {
                    serde_json::json!({
                        "name": record.id.name(),
                        "coordinates": record.coordinates.to_array(),
                        "eigenvalues": record.eigenvalues.iter()
                            .map(|e| serde_json::json!({"re": e.re, "im": e.im}))
                            .collect::<Vec<_>>(),
                        "stable_dim": record.stable_dim,
                        "unstable_dim": record.unstable_dim,
                        "stability": stability_word(record.stable_dim, record.unstable_dim),
                        "label": record.label,
                    })
                })
                .collect();
            let doc = json_document(config, serde_json::json!({ "fixed_points": rows }));
            write_artifact(config.out.as_deref(), &doc).map_err(Failure::config)?;
            Ok(ExitCode::SUCCESS)
        }
        Some(Format::Csv) => {
            let header = [
                "name", "x", "y", "z", "eig1", "eig2", "eig3", "stable_dim", "unstable_dim",
                "stability", "label",
            ];
            let rows: Vec<Vec<String>> = catalogue
                .iter()
                .map(|record| {
                    let p = record.coordinates;
                    let mut row = vec![record.id.name().to_string()];
                    row.extend([p.x, p.y, p.z].map(fmt_f64));
                    row.extend(record.eigenvalues.iter().map(|e| fmt_f64(e.re)));
                    row.push(record.stable_dim.to_string());
                    row.push(record.unstable_dim.to_string());
                    row.push(stability_word(record.stable_dim, record.unstable_dim).into());
                    row.push(record.label.to_string());
                    row
                })
                .collect();
            let doc = csv_document(config, &header, &rows);
            write_artifact(config.out.as_deref(), &doc).map_err(Failure::config)?;
            Ok(ExitCode::SUCCESS)
        }
        Some(Format::Svg) => Err(Failure::config(
            "fixed-points supports csv or json output, not svg",
        )),
    }
}

fn classification_json(result: &ClassificationResult) -> serde_json::Value {
    serde_json::json!({
        "member": member_label(result.member),
        "parameter": result.member.parameter(),
        "verdict": verdict_json(&result.verdict),
        "min_cone_distance": result.min_cone_distance,
        "terminal_fp": terminal_name(result.trajectory.status),
        "s_end": result.trajectory.end().s,
        "samples": result.trajectory.samples.len(),
        "events": result.trajectory.events.iter().map(|event| serde_json::json!({
            "kind": format!("{:?}", event.kind),
            "s": event.s,
            "state": event.state.to_array(),
        })).collect::<Vec<_>>(),
    })
}

fn cmd_classify(
    config: &RunConfig,
    family: FamilyArg,
    param: Option<f64>,
    z: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
) -> Result<ExitCode, Failure> {
    let member = build_member(family, param, z, alpha, beta)?;
    let result =
        classify_member(member, &config.shooting_config()).map_err(Failure::from_core)?;

    let artifact = artifact_format(config, Format::Json);
    if artifact.is_none() || config.out.is_some() {
        println!("{}", verdict_line(&result));
    }
    match artifact {
        None => {}
        Some(Format::Json) => {
            let doc = json_document(config, classification_json(&result));
            write_artifact(config.out.as_deref(), &doc).map_err(Failure::config)?;
        }
        Some(Format::Csv) => {
            // Trajectory export: one row per accepted sample.
            let rows: Vec<Vec<String>> = result
                .trajectory
                .samples
                .iter()
                .map(|sample| {
                    vec![
                        fmt_f64(sample.s),
                        fmt_f64(sample.state.x),
                        fmt_f64(sample.state.y),
                        fmt_f64(sample.state.z),
                    ]
                })
                .collect();
            let doc = csv_document(config, &["s", "x", "y", "z"], &rows);
            write_artifact(config.out.as_deref(), &doc).map_err(Failure::config)?;
        }
        Some(Format::Svg) => {
            return Err(Failure::config(
                "classify exports csv or json; use the plot command for svg",
            ));
        }
    }
    if matches!(result.verdict, Verdict::Undecided { .. }) {
        return Ok(ExitCode::from(4));
    }
    Ok(ExitCode::SUCCESS)
}

fn build_grid(start: f64, end: f64, points: usize, log: bool) -> Result<Vec<f64>, Failure> {
    if points < 2 {
        return Err(Failure::config("--grid-points must be at least 2"));
    }
    if !(start < end) || !start.is_finite() || !end.is_finite() {
        return Err(Failure::config("need finite --grid-start < --grid-end"));
    }
    if log && !(start > 0.0) {
        return Err(Failure::config("--log grids need --grid-start > 0"));
    }
    let grid: Vec<f64> = (0..points)
        .map(|i| {
            let f = i as f64 / (points - 1) as f64;
            if log {
                start * (end / start).powf(f)
            } else {
                start + (end - start) * f
            }
        })
        .collect();
    if grid.windows(2).any(|pair| !(pair[0] < pair[1])) {
        return Err(Failure::config("grid is too dense to stay increasing"));
    }
    Ok(grid)
}

fn sweep_row(entry: &SweepEntry) -> Vec<String> {
    let param = fmt_f64(entry.parameter);
    match &entry.result {
        Ok(result) => {
            let (ell, gamma, s_exit, t_exit) = match &result.verdict {
                Verdict::Alc { report } => (
                    Some(report.length),
                    Some(report.gamma_f),
                    None,
                    None,
                ),
                Verdict::Ac { decay_rate } => (None, *decay_rate, None, None),
                Verdict::Incomplete { s_exit, t_exit } => (None, None, Some(*s_exit), *t_exit),
                Verdict::Undecided { .. } => (None, None, None, None),
            };
            vec![
                param,
                result.verdict.kind().name().to_string(),
                fmt_opt(ell),
                fmt_opt(gamma),
                fmt_opt(s_exit),
                fmt_opt(t_exit),
                fmt_f64(result.min_cone_distance),
                terminal_name(result.trajectory.status)
                    .unwrap_or_default()
                    .to_string(),
            ]
        }
        Err(_) => {
            let mut row = vec![param, "error".to_string()];
            row.extend(std::iter::repeat_n(String::new(), 6));
            row
        }
    }
}

const SWEEP_HEADER: [&str; 8] = [
    "param",
    "verdict",
    "ell",
    "gamma_fit",
    "s_exit",
    "t_exit",
    "min_cone_dist",
    "terminal_fp",
];

fn cmd_sweep(
    config: &RunConfig,
    family: FamilyArg,
    grid_start: f64,
    grid_end: f64,
    grid_points: usize,
    log: bool,
    z: Option<f64>,
) -> Result<ExitCode, Failure> {
    let kind = family_kind(family, z)?;
    let grid = build_grid(grid_start, grid_end, grid_points, log)?;
    let entries =
        sweep_family(kind, &grid, &config.shooting_config()).map_err(Failure::from_core)?;

    let artifact = artifact_format(config, Format::Csv);
    match artifact {
        None | Some(Format::Csv) => {
            let rows: Vec<Vec<String>> = entries.iter().map(sweep_row).collect();
            let doc = csv_document(config, &SWEEP_HEADER, &rows);
            write_artifact(config.out.as_deref(), &doc).map_err(Failure::config)?;
        }
        Some(Format::Json) => {
            let rows: Vec<serde_json::Value> = entries
                .iter()
                .map(|entry| match &entry.result {
                    Ok(result) => {
                        let mut value = classification_json(result);
                        let ordering = entry.ordering_with_next.as_ref().map(|report| {
                            serde_json::json!({
                                "established": report.established,
                                "holds": report.holds,
                                "first_violation": report.first_violation.map(|(s, m)| {
                                    serde_json::json!({"s": s, "margin": m})
                                }),
                                "samples_checked": report.samples_checked,
                            })
                        });
                        value["ordering_with_next"] =
                            ordering.unwrap_or(serde_json::Value::Null);
                        value
                    }
                    Err(err) => serde_json::json!({
                        "parameter": entry.parameter,
                        "error": err.to_string(),
                    }),
                })
                .collect();
            let doc = json_document(
                config,
                serde_json::json!({
                    "family": family_json_name(kind),
                    "entries": rows,
                }),
            );
            write_artifact(config.out.as_deref(), &doc).map_err(Failure::config)?;
        }
        Some(Format::Svg) => {
            return Err(Failure::config(
                "sweep exports csv or json; use the plot command for svg",
            ));
        }
    }

    let failures = entries.iter().filter(|e| e.result.is_err()).count();
    if failures > 0 {
        let first = entries
            .iter()
            .find_map(|e| e.result.as_ref().err())
            .expect("a failing entry exists");
        return Err(Failure {
            code: 3,
            kind: "member-errors",
            message: format!("{failures} of {} members failed; first: {first}", entries.len()),
        });
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bisect(
    config: &RunConfig,
    family: FamilyArg,
    lo: f64,
    hi: f64,
    bisect_tol: f64,
    z: Option<f64>,
) -> Result<ExitCode, Failure> {
    let kind = family_kind(family, z)?;
    let result = bisect_transition(kind, (lo, hi), bisect_tol, &config.shooting_config())
        .map_err(Failure::from_core)?;

    let artifact = artifact_format(config, Format::Json);
    if artifact.is_none() || config.out.is_some() {
        println!(
            "{} transition at {} (bracket width {}, {} iterations, midpoint cone distance {})",
            family_json_name(kind),
            fmt_f64(result.critical),
            fmt_f64(result.width),
            result.iterations,
            fmt_f64(result.midpoint.min_cone_distance)
        );
    }
    match artifact {
        None => {}
        Some(Format::Json) => {
            let mut payload = serde_json::json!({
                "family": family_json_name(kind),
                "critical": result.critical,
                "bracket_width": result.width,
                "iterations": result.iterations,
                "bracket": [result.bracket.0, result.bracket.1],
                "endpoint_verdicts": [
                    result.endpoint_verdicts.0.name(),
                    result.endpoint_verdicts.1.name(),
                ],
                "midpoint": classification_json(&result.midpoint),
            });
            if let FamilyKind::Omega { z } = kind {
                payload["z"] = serde_json::json!(z);
            }
            let doc = json_document(config, payload);
            write_artifact(config.out.as_deref(), &doc).map_err(Failure::config)?;
        }
        Some(_) => {
            return Err(Failure::config("bisect emits a json artifact"));
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_series_check(
    config: &RunConfig,
    which: WhichSeries,
    t_list: Vec<f64>,
    mu: Option<f64>,
    tau: Option<f64>,
    lambda: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    order: Option<u32>,
) -> Result<ExitCode, Failure> {
    let times = if t_list.is_empty() {
        match which {
            WhichSeries::Ac => vec![2.0 * config.t_ac_start],
            // The cone deformation needs a larger default: residuals of the
            // order-4 truncation sit below machine noise at the handoff time.
            WhichSeries::Cs => vec![0.1],
            _ => vec![config.t_series],
        }
    } else {
        t_list
    };

    let mut reports: Vec<(f64, ResidualReport)> = Vec::new();
    for &t in &times {
        let report = match which {
            WhichSeries::S5 => s5_residual_report(mu.unwrap_or(1.0), t),
            WhichSeries::Cp2 => cp2_residual_report(tau.unwrap_or(0.0), t),
            WhichSeries::Cs => {
                let expansion =
                    series_refine(&cs_expansion(lambda.unwrap_or(1.0)), order.unwrap_or(4))
                        .map_err(Failure::from_core)?;
                expansion.residual_report(t)
            }
            WhichSeries::Ac => {
                let expansion = series_refine(
                    &ac_expansion(alpha.unwrap_or(1.0), beta.unwrap_or(1.0)),
                    order.unwrap_or(4),
                )
                .map_err(Failure::from_core)?;
                expansion.residual_report(t)
            }
        }
        .map_err(Failure::from_core)?;
        reports.push((t, report));
    }

    let within = |report: &ResidualReport| {
        let (lo, hi) = (
            report.nominal_ratio / 2.0,
            report.nominal_ratio * 2.0,
        );
        report.ratio >= lo && report.ratio <= hi
    };

    let artifact = artifact_format(config, Format::Csv);
    if artifact.is_none() || config.out.is_some() {
        println!(
            "{:<12} {:<13} {:<13} {:<10} {:<10} ok",
            "t", "r(t)", "r(t/2)", "ratio", "nominal"
        );
        for (t, report) in &reports {
            println!(
                "{:<12.6e} {:<13.6e} {:<13.6e} {:<10.5} {:<10.5} {}",
                t,
                report.r_t,
                report.r_half,
                report.ratio,
                report.nominal_ratio,
                within(report)
            );
        }
    }
    match artifact {
        None => {}
        Some(Format::Csv) => {
            let rows: Vec<Vec<String>> = reports
                .iter()
                .map(|(t, report)| {
                    vec![
                        fmt_f64(*t),
                        fmt_f64(report.r_t),
                        fmt_f64(report.r_half),
                        fmt_f64(report.ratio),
                        fmt_f64(report.nominal_ratio),
                        within(report).to_string(),
                    ]
                })
                .collect();
            let doc = csv_document(
                config,
                &["t", "r_t", "r_half", "ratio", "nominal_ratio", "within_factor_2"],
                &rows,
            );
            write_artifact(config.out.as_deref(), &doc).map_err(Failure::config)?;
        }
        Some(Format::Json) => {
            let rows: Vec<serde_json::Value> = reports
                .iter()
                .map(|(t, report)| {
                    serde_json::json!({
                        "t": t,
                        "r_t": report.r_t,
                        "r_half": report.r_half,
                        "ratio": report.ratio,
                        "nominal_ratio": report.nominal_ratio,
                        "within_factor_2": within(report),
                    })
                })
                .collect();
            let doc = json_document(config, serde_json::json!({ "residuals": rows }));
            write_artifact(config.out.as_deref(), &doc).map_err(Failure::config)?;
        }
        Some(Format::Svg) => {
            return Err(Failure::config("series-check exports csv or json"));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_plot(
    config: &RunConfig,
    family: FamilyArg,
    params: Vec<f64>,
    z: Option<f64>,
    export_3d: Option<PathBuf>,
) -> Result<ExitCode, Failure> {
    if let Some(format) = config.format {
        if format != Format::Svg {
            return Err(Failure::config(
                "plot renders svg; use --export-3d for sample data",
            ));
        }
    }
    let shoot = config.shooting_config();

    let mut members: Vec<(String, spin7lab_core::integrator::Trajectory)> = Vec::new();
    if family == FamilyArg::Cs && params.is_empty() {
        // Default: the two branches of the unstable manifold of the cone.
        for sign in [1.0, -1.0] {
            let trajectory = cs_unstable_manifold(sign, MANIFOLD_DELTA_DEFAULT, &shoot)
                .map_err(Failure::from_core)?;
            let name = if sign > 0.0 { "cs branch +Y" } else { "cs branch -Y" };
            members.push((name.to_string(), trajectory));
        }
    } else {
        if params.is_empty() {
            return Err(Failure::config("--params lists the members to draw"));
        }
        for &value in &params {
            let member = match family {
                FamilyArg::Psi => FamilyMember::Psi { mu: value },
                FamilyArg::Upsilon => FamilyMember::Upsilon { tau: value },
                FamilyArg::Cs => FamilyMember::CsDeformation { lambda: value },
                FamilyArg::Omega => FamilyMember::Omega {
                    z: require(z, "--z <height>")?,
                    kappa: value,
                },
                FamilyArg::AcEnd => {
                    return Err(Failure::config(
                        "ac-end has two parameters; plot supports psi, upsilon, cs and omega",
                    ));
                }
            };
            let result = classify_member(member, &shoot).map_err(Failure::from_core)?;
            members.push((member_label(member), result.trajectory));
        }
    }

    if let Some(path) = &export_3d {
        let mut rows: Vec<Vec<String>> = Vec::new();
        for (label, trajectory) in &members {
            for sample in &trajectory.samples {
                rows.push(vec![
                    label.clone(),
                    fmt_f64(sample.s),
                    fmt_f64(sample.state.x),
                    fmt_f64(sample.state.y),
                    fmt_f64(sample.state.z),
                ]);
            }
        }
        let doc = csv_document(config, &["member", "s", "x", "y", "z"], &rows);
        write_artifact(Some(path), &doc).map_err(Failure::config)?;
    }

    let paths: Vec<TrajectoryPath> = members
        .iter()
        .map(|(label, trajectory)| TrajectoryPath {
            label: label.clone(),
            points: trajectory
                .samples
                .iter()
                .map(|sample| (sample.state.x, sample.state.y))
                .collect(),
        })
        .collect();
    let portrait = svg::phase_portrait(config, &paths);
    write_artifact(config.out.as_deref(), &portrait).map_err(Failure::config)?;
    Ok(ExitCode::SUCCESS)
}
