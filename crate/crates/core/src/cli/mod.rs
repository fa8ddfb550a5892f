//! Command-line front end: argument parsing, config loading, report
//! emission, and the exit-code contract.
//!
//! Exit codes: 0 when a decision was reached (confident negatives included),
//! 2 when the outcome is inconclusive, 3 on input or validation errors.
//! Every command can write its report to `--out` or standard output; given
//! identical configs and tool version the bytes are identical run to run.

pub mod config;
pub mod report;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::derivative::{
    check_differentiable, construct_derivative, verify_chain_rule, Differentiability,
};
use crate::error::{Error, Result};
use crate::gallery::{run_all, run_scenario, ScenarioParams};
use crate::limits::{IndexSchedule, Tolerances, DEFAULT_ABS_TOL, DEFAULT_REL_TOL};
use crate::pretangent::{build_family, metric_identification, tangency_probe, StableFamily};
use crate::sequences::selector_battery;
use crate::space::validate_metric;
use crate::tangency::{
    decide_strong_tangency, epsilon_profile, ProfileParams, TangencyKind, DEFAULT_GRID_LEN,
    DEFAULT_N_SPHERE, DEFAULT_N_TARGET, DEFAULT_RATIO_FLOOR, DEFAULT_SHELL_WIDTH,
    DEFAULT_SLOPE_MARGIN,
};

use config::{
    load_json, FamilyConfig, MapConfig, NormConfig, PointSpec, SequencesConfig, SpaceConfig,
    SubspaceConfig,
};
use report::{
    gallery_summary_csv, profile_csv, Report, RunOutput, RunStatus, TOOL_NAME, TOOL_VERSION,
};

#[derive(Parser, Debug)]
#[command(
    name = "pretangent",
    version,
    about = "Tangent-space structure of metric spaces at a point"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a stable family from sequence configs and report its quotient
    Analyze(AnalyzeArgs),
    /// Test a pointed map for quotient-level differentiability
    Derivative(DerivativeArgs),
    /// Decide strong tangency of two subspaces at a common point
    Tangency(TangencyArgs),
    /// Run the worked geometric scenarios
    Gallery(GalleryArgs),
    /// Check metric axioms on a space config
    Validate(ValidateArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutFormat {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OutputOpts {
    /// Report path; standard output when omitted
    #[arg(long)]
    pub out: Option<String>,
    /// Format of the emitted report
    #[arg(long, value_enum, default_value = "json")]
    pub format: OutFormat,
    /// Seed for all randomness in the run
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to available parallelism
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl Default for OutputOpts {
    fn default() -> Self {
        OutputOpts {
            out: None,
            format: OutFormat::Json,
            seed: 0,
            jobs: None,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ScheduleOpts {
    /// First probe index scale
    #[arg(long, default_value_t = 4.0)]
    pub schedule_base: f64,
    /// Growth factor between probe indices
    #[arg(long, default_value_t = 1.6)]
    pub schedule_growth: f64,
    /// Number of probe indices
    #[arg(long, default_value_t = 24)]
    pub schedule_len: usize,
    /// Relative tolerance for limit classification
    #[arg(long, default_value_t = DEFAULT_REL_TOL)]
    pub rel_tol: f64,
    /// Absolute tolerance for limit classification
    #[arg(long, default_value_t = DEFAULT_ABS_TOL)]
    pub abs_tol: f64,
}

impl Default for ScheduleOpts {
    fn default() -> Self {
        ScheduleOpts {
            schedule_base: 4.0,
            schedule_growth: 1.6,
            schedule_len: 24,
            rel_tol: DEFAULT_REL_TOL,
            abs_tol: DEFAULT_ABS_TOL,
        }
    }
}

impl ScheduleOpts {
    fn schedule(&self) -> Result<IndexSchedule> {
        IndexSchedule::geometric(self.schedule_base, self.schedule_growth, self.schedule_len)
    }

    fn tolerances(&self) -> Result<Tolerances> {
        Tolerances::new(self.rel_tol, self.abs_tol)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct AnalyzeArgs {
    /// Space config (JSON)
    #[arg(long)]
    pub space: String,
    /// Base point and candidate sequences (JSON)
    #[arg(long)]
    pub sequences: String,
    /// Normalizing sequence config (JSON)
    #[arg(long)]
    pub norm: String,
    /// Relative threshold under which limit distances count as zero
    #[arg(long)]
    pub zero_tol: Option<f64>,
    #[command(flatten)]
    pub schedule: ScheduleOpts,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DerivativeArgs {
    /// Map config (JSON)
    #[arg(long)]
    pub f: String,
    /// Source family config (JSON)
    #[arg(long)]
    pub src: String,
    /// Target family config (JSON)
    #[arg(long)]
    pub tgt: String,
    /// Outer map config; checks the chain rule for the composition with
    /// --f, which then maps the source family to the middle one
    #[arg(long, requires = "mid")]
    pub g: Option<String>,
    /// Middle family config, target of --f and source of --g
    #[arg(long, requires = "g")]
    pub mid: Option<String>,
    /// Relative threshold under which limit distances count as zero
    #[arg(long)]
    pub zero_tol: Option<f64>,
    #[command(flatten)]
    pub schedule: ScheduleOpts,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TangencyArgs {
    /// Space config (JSON)
    #[arg(long)]
    pub space: String,
    /// Subspace the shells are measured against (JSON)
    #[arg(long)]
    pub sub_y: String,
    /// Subspace whose shells are sampled (JSON)
    #[arg(long)]
    pub sub_z: String,
    /// Common base point (JSON coordinate array)
    #[arg(long)]
    pub point: String,
    /// Largest shell radius; defaults to a tenth of the smaller subspace
    /// scale
    #[arg(long)]
    pub t0: Option<f64>,
    /// Number of shell radii, halving from t0
    #[arg(long, default_value_t = DEFAULT_GRID_LEN)]
    pub grid_len: usize,
    /// Relative shell thickness
    #[arg(long, default_value_t = DEFAULT_SHELL_WIDTH)]
    pub shell_width: f64,
    /// Shell sample budget per radius
    #[arg(long, default_value_t = DEFAULT_N_SPHERE)]
    pub n_sphere: usize,
    /// Target sample budget per radius
    #[arg(long, default_value_t = DEFAULT_N_TARGET)]
    pub n_target: usize,
    /// Slope excess over 1 required to accept strong tangency
    #[arg(long, default_value_t = DEFAULT_SLOPE_MARGIN)]
    pub slope_margin: f64,
    /// Tail ratio lower bound required to refute
    #[arg(long, default_value_t = DEFAULT_RATIO_FLOOR)]
    pub ratio_floor: f64,
    /// Also write the profile CSV here
    #[arg(long)]
    pub csv: Option<String>,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GalleryArgs {
    #[command(subcommand)]
    pub action: GalleryAction,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
pub enum GalleryAction {
    /// Run one scenario by id, or "all"
    Run(GalleryRunArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GalleryRunArgs {
    /// Scenario id (curve, graphs, between, rotation, surface, cone) or
    /// "all"
    pub id: String,
    /// Profile exponent for the rotation-body scenario
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Override the largest shell radius
    #[arg(long)]
    pub t0: Option<f64>,
    /// Override the shell radius count
    #[arg(long)]
    pub grid_len: Option<usize>,
    /// Override the shell sample budget
    #[arg(long)]
    pub n_sphere: Option<usize>,
    /// Override the target sample budget
    #[arg(long)]
    pub n_target: Option<usize>,
    /// Also write the scenario summary CSV here
    #[arg(long)]
    pub csv: Option<String>,
    #[command(flatten)]
    pub output: OutputOpts,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ValidateArgs {
    /// Space config (JSON)
    #[arg(long)]
    pub space: String,
    /// Sample budget for the randomized axiom check
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[command(flatten)]
    pub output: OutputOpts,
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Analyze(a) => {
            init_pool(a.output.jobs);
            emit(run_analyze(&a)?, &a.output, None)
        }
        Command::Derivative(a) => {
            init_pool(a.output.jobs);
            emit(run_derivative(&a)?, &a.output, None)
        }
        Command::Tangency(a) => {
            init_pool(a.output.jobs);
            emit(run_tangency(&a)?, &a.output, a.csv.as_deref())
        }
        Command::Gallery(g) => match g.action {
            GalleryAction::Run(a) => {
                init_pool(a.output.jobs);
                emit(run_gallery(&a)?, &a.output, a.csv.as_deref())
            }
        },
        Command::Validate(a) => {
            init_pool(a.output.jobs);
            emit(run_validate(&a)?, &a.output, None)
        }
    }
}

fn init_pool(jobs: Option<usize>) {
    if let Some(n) = jobs {
        // the global pool can be set only once per process; later runs in
        // the same process keep the first configuration
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn emit(run: RunOutput, opts: &OutputOpts, csv_path: Option<&str>) -> Result<i32> {
    if let (Some(path), Some(csv)) = (csv_path, run.csv.as_deref()) {
        std::fs::write(path, csv)?;
    }
    let body = match opts.format {
        OutFormat::Json => run.report.to_json(),
        OutFormat::Csv => run.csv.clone().ok_or_else(|| {
            Error::InvalidArgument("this command has no CSV view; use --format json".into())
        })?,
    };
    match &opts.out {
        Some(path) => std::fs::write(path, body)?,
        None => print!("{body}"),
    }
    Ok(run.report.exit_code())
}

/// Builds the family described by the configs, forms its quotient, and
/// probes maximality along a selector battery.
pub fn run_analyze(args: &AnalyzeArgs) -> Result<RunOutput> {
    let space_cfg: SpaceConfig = load_json(&args.space)?;
    let seq_cfg: SequencesConfig = load_json(&args.sequences)?;
    let norm_cfg: NormConfig = load_json(&args.norm)?;

    let space = space_cfg.build()?;
    let base = seq_cfg.base.build();
    let candidates = seq_cfg
        .sequences
        .iter()
        .map(|s| s.build(&seq_cfg.base))
        .collect::<Result<Vec<_>>>()?;
    let norm = norm_cfg.build();
    let schedule = args.schedule.schedule()?;
    let tol = args.schedule.tolerances()?;

    let (family, rejections) = build_family(&space, &base, &candidates, &norm, &schedule, tol)?;
    let quotient = metric_identification(&family, args.zero_tol)?;
    let probes = tangency_probe(
        &family,
        &[],
        &selector_battery(args.output.seed),
        args.zero_tol,
    )?;

    let mut warnings = Vec::new();
    for r in &rejections {
        warnings.push(format!(
            "rejected candidate {} against {}: not mutually stable",
            r.candidate, r.against
        ));
    }
    for w in &probes.witnesses {
        warnings.push(format!(
            "maximality witness {} under selector {}",
            w.sequence, w.selector
        ));
    }

    let m = family.len();
    let dmat: Vec<Vec<_>> = (0..m)
        .map(|i| (0..m).map(|j| family.verdict(i, j).clone()).collect())
        .collect();

    let payload = json!({
        "family": {
            "labels": family.labels(),
            "base": seq_cfg.base,
            "norm": norm.label(),
            "members": m,
        },
        "dmat": dmat,
        "classes": quotient.classes,
        "class_of": quotient.class_of,
        "base_class": quotient.base_class,
        "rho": quotient.rho,
        "zero_eps": quotient.zero_eps,
        "probes": probes,
        "rejections": rejections,
    });

    let report = Report {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        command: "analyze".into(),
        seed: args.output.seed,
        schedule: schedule.indices().to_vec(),
        tolerances: json!({"rel": tol.rel, "abs": tol.abs, "zero": args.zero_tol}),
        status: RunStatus::Decided,
        config: json!({
            "args": args,
            "inputs": {"space": space_cfg, "sequences": seq_cfg, "norm": norm_cfg},
        }),
        warnings,
        payload,
    };
    Ok(RunOutput { report, csv: None })
}

/// Tests the map against the source and target families: image stability,
/// zero-pair preservation, the induced class map, and the chain rule when
/// an outer map is supplied.
pub fn run_derivative(args: &DerivativeArgs) -> Result<RunOutput> {
    let map_cfg: MapConfig = load_json(&args.f)?;
    let src_cfg: FamilyConfig = load_json(&args.src)?;
    let tgt_cfg: FamilyConfig = load_json(&args.tgt)?;
    let g_cfg: Option<MapConfig> = args.g.as_deref().map(load_json).transpose()?;
    let mid_cfg: Option<FamilyConfig> = args.mid.as_deref().map(load_json).transpose()?;

    let lift = map_cfg.build()?;
    let schedule = args.schedule.schedule()?;
    let tol = args.schedule.tolerances()?;

    let mut warnings = Vec::new();
    let mut note_rejections = |tag: &str, rejections: &[crate::pretangent::Rejection]| {
        for r in rejections {
            warnings.push(format!(
                "{tag} family rejected candidate {} against {}",
                r.candidate, r.against
            ));
        }
    };

    let (src, src_rej) = src_cfg.build(&schedule, tol)?;
    note_rejections("source", &src_rej);
    let (tgt, tgt_rej) = tgt_cfg.build(&schedule, tol)?;
    note_rejections("target", &tgt_rej);
    let mid = match &mid_cfg {
        Some(cfg) => {
            let (m, rej) = cfg.build(&schedule, tol)?;
            note_rejections("middle", &rej);
            Some(m)
        }
        None => None,
    };

    // with a chain-rule check the inner map lands in the middle family
    let pair_tgt: &StableFamily = mid.as_ref().unwrap_or(&tgt);
    let diff = check_differentiable(&lift, &src, pair_tgt, &schedule, args.zero_tol)?;
    let derivative = if diff.status == Differentiability::Differentiable {
        Some(construct_derivative(&lift, &src, pair_tgt, args.zero_tol)?)
    } else {
        None
    };
    let chain = match (&g_cfg, &mid) {
        (Some(gc), Some(m)) => {
            let g = gc.build()?;
            Some(verify_chain_rule(&lift, &g, &src, m, &tgt, args.zero_tol)?)
        }
        _ => None,
    };

    if diff.status == Differentiability::Inconclusive {
        warnings.push(format!(
            "Inconclusive: {} limits could not be classified",
            diff.inconclusive.len()
        ));
    }
    let status = match diff.status {
        Differentiability::Inconclusive => RunStatus::Inconclusive,
        _ => RunStatus::Decided,
    };

    let payload = json!({
        "map": lift.label(),
        "conditions": {
            "image_stability": {
                "holds": diff.stability_violations.is_empty(),
                "violations": diff.stability_violations.len(),
            },
            "zero_pair_preservation": {
                "holds": diff.zero_pair_violations.is_empty(),
                "violations": diff.zero_pair_violations.len(),
            },
        },
        "differentiability": diff,
        "class_map": derivative.as_ref().map(|d| d.class_map.clone()),
        "derivative": derivative,
        "chain_rule": chain,
    });

    let report = Report {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        command: "derivative".into(),
        seed: args.output.seed,
        schedule: schedule.indices().to_vec(),
        tolerances: json!({"rel": tol.rel, "abs": tol.abs, "zero": args.zero_tol}),
        status,
        config: json!({
            "args": args,
            "inputs": {
                "f": map_cfg,
                "src": src_cfg,
                "tgt": tgt_cfg,
                "g": g_cfg,
                "mid": mid_cfg,
            },
        }),
        warnings,
        payload,
    };
    Ok(RunOutput { report, csv: None })
}

/// Profiles the two subspaces at the base point and decides strong
/// tangency. The CSV view is the raw profile.
pub fn run_tangency(args: &TangencyArgs) -> Result<RunOutput> {
    let space_cfg: SpaceConfig = load_json(&args.space)?;
    let y_cfg: SubspaceConfig = load_json(&args.sub_y)?;
    let z_cfg: SubspaceConfig = load_json(&args.sub_z)?;
    let point_cfg: PointSpec = load_json(&args.point)?;

    let space = space_cfg.build()?;
    let y = y_cfg.build(&space)?;
    let z = z_cfg.build(&space)?;
    let a = point_cfg.build();

    let params = ProfileParams {
        t0: args.t0,
        grid_len: args.grid_len,
        shell_width: args.shell_width,
        n_sphere: args.n_sphere,
        n_target: args.n_target,
        seed: args.output.seed,
    };
    let profile = epsilon_profile(&a, &z, &y, &params)?;
    let verdict = decide_strong_tangency(&profile, args.slope_margin, args.ratio_floor);

    let mut warnings = Vec::new();
    for (k, (zy, yz)) in profile.eps_zy.iter().zip(&profile.eps_yz).enumerate() {
        if zy.empty || yz.empty {
            warnings.push(format!("EmptySphere at t = {}", profile.t_grid[k]));
        }
    }
    if verdict.kind == TangencyKind::Inconclusive {
        warnings.push(format!("Inconclusive: {}", verdict.note));
    }
    let status = if verdict.kind == TangencyKind::Inconclusive {
        RunStatus::Inconclusive
    } else {
        RunStatus::Decided
    };

    let csv = profile_csv(&profile);
    let payload = json!({"verdict": verdict, "profile": profile});
    let report = Report {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        command: "tangency".into(),
        seed: args.output.seed,
        schedule: Vec::new(),
        tolerances: json!({
            "slope_margin": args.slope_margin,
            "ratio_floor": args.ratio_floor,
            "shell_width": args.shell_width,
        }),
        status,
        config: json!({
            "args": args,
            "inputs": {
                "space": space_cfg,
                "sub_y": y_cfg,
                "sub_z": z_cfg,
                "point": point_cfg,
            },
        }),
        warnings,
        payload,
    };
    Ok(RunOutput {
        report,
        csv: Some(csv),
    })
}

/// Runs one scenario or the whole set. The CSV view is a summary table of
/// verdicts, slopes, and embedding defects.
pub fn run_gallery(args: &GalleryRunArgs) -> Result<RunOutput> {
    let mut params = ScenarioParams::default();
    params.profile.seed = args.output.seed;
    if let Some(t0) = args.t0 {
        params.profile.t0 = Some(t0);
    }
    if let Some(n) = args.grid_len {
        params.profile.grid_len = n;
    }
    if let Some(n) = args.n_sphere {
        params.profile.n_sphere = n;
    }
    if let Some(n) = args.n_target {
        params.profile.n_target = n;
    }

    let results = if args.id == "all" {
        run_all(args.alpha, &params)?
    } else {
        vec![run_scenario(&args.id, args.alpha, &params)?]
    };

    let mut warnings = Vec::new();
    for r in &results {
        if let Some(f) = &r.transfer_failure {
            warnings.push(format!("{}: {f}", r.scenario));
        }
        if r.verdict.kind == TangencyKind::Inconclusive {
            warnings.push(format!("{}: Inconclusive: {}", r.scenario, r.verdict.note));
        }
    }
    let inconclusive = results
        .iter()
        .filter(|r| r.verdict.kind == TangencyKind::Inconclusive)
        .count();
    let status = if 2 * inconclusive > results.len() {
        RunStatus::Inconclusive
    } else {
        RunStatus::Decided
    };

    let csv = gallery_summary_csv(&results);
    let payload = json!({"results": results});
    let report = Report {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        command: "gallery".into(),
        seed: args.output.seed,
        // canonical scenario families run on the default probe schedule
        schedule: IndexSchedule::default().indices().to_vec(),
        tolerances: json!({
            "slope_margin": params.slope_margin,
            "ratio_floor": params.ratio_floor,
            "zero": params.zero_tol,
        }),
        status,
        config: json!({"args": args}),
        warnings,
        payload,
    };
    Ok(RunOutput {
        report,
        csv: Some(csv),
    })
}

/// Randomized metric axiom check on the configured space.
pub fn run_validate(args: &ValidateArgs) -> Result<RunOutput> {
    let space_cfg: SpaceConfig = load_json(&args.space)?;
    let space = space_cfg.build()?;
    let validation = validate_metric(&space, args.samples, args.output.seed)?;

    let mut warnings = Vec::new();
    if !validation.pass {
        warnings.push(match &validation.witness {
            Some(w) => format!("metric axiom violation: {w}"),
            None => "metric axiom violation".into(),
        });
    }

    let payload = json!({"validation": validation});
    let report = Report {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        command: "validate".into(),
        seed: args.output.seed,
        schedule: Vec::new(),
        tolerances: json!({}),
        status: RunStatus::Decided,
        config: json!({"args": args, "inputs": {"space": space_cfg}}),
        warnings,
        payload,
    };
    Ok(RunOutput { report, csv: None })
}
