//! Batch front end: parses system documents, dispatches analyses, and emits
//! human-readable verdicts plus machine-readable CSV/JSON data.
//!
//! Exit codes: 0 = Stable/Certified, 1 = ConditionFailed/NotCertified,
//! 2 = Unknown, 3 = usage or input error.

mod doc;
mod report;

use clap::{Args, Parser, Subcommand, ValueEnum};

use phasegain::dwshell;
use phasegain::kyp::{bounded_sectored_check, BoundedSectoredOutcome};
use phasegain::lti::{
    build_indented_contour, frequency_sweep, imaginary_axis_poles, sample_at_infinity, StateSpace,
};
use phasegain::stability::{self, CheckOptions, FanVaseSpec, StabilityVerdict};

use report::{fmt_angle, fmt_num, frequency_table, verdict_exit_code, AnalysisReport};

const DEFAULT_SEED: u64 = 0x5eed_0001;

#[derive(Parser)]
#[command(
    name = "phasegain",
    version,
    about = "Gain/phase feedback stability analysis for MIMO LTI systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a stability-theorem checker or the LMI certificate on a
    /// plant/controller pair.
    Analyze(AnalyzeArgs),
    /// Sweep one system and emit gains and phases per frequency as CSV.
    Sweep(SweepArgs),
    /// Gain-constrained phase sector of a complex matrix over a grid of
    /// gain floors.
    ConstrainedPhase(ConstrainedPhaseArgs),
    /// Phase-constrained gain of a complex matrix over a grid of exclusion
    /// angles.
    ConstrainedGain(ConstrainedGainArgs),
    /// Admissible static-gain bound for robust integrator stabilization.
    RobustEps(RobustEpsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Theorem {
    SmallGain,
    SmallPhase,
    MixedCutoff,
    FrequencywiseMixed,
    SmallVase,
    DwPhase,
    DwGain,
    Kyp,
}

impl Theorem {
    fn name(&self) -> &'static str {
        match self {
            Theorem::SmallGain => "small-gain",
            Theorem::SmallPhase => "small-phase",
            Theorem::MixedCutoff => "mixed-cutoff",
            Theorem::FrequencywiseMixed => "frequencywise-mixed",
            Theorem::SmallVase => "small-vase",
            Theorem::DwPhase => "dw-phase",
            Theorem::DwGain => "dw-gain",
            Theorem::Kyp => "kyp",
        }
    }
}

#[derive(Args)]
struct GridArgs {
    /// Number of frequency grid points.
    #[arg(long, default_value_t = 400)]
    grid_points: usize,
    #[arg(long, default_value_t = 0.0)]
    omega_min: f64,
    #[arg(long, default_value_t = 1e4)]
    omega_max: f64,
    /// Indentation radius around imaginary-axis poles (default: automatic).
    #[arg(long)]
    eps: Option<f64>,
    /// Minimum margin for a Stable verdict.
    #[arg(long, default_value_t = 1e-4)]
    margin_floor: f64,
    /// Relative tolerance for pole detection and sectoriality boundaries.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

impl GridArgs {
    fn options(&self) -> CheckOptions {
        CheckOptions {
            grid_points: self.grid_points,
            omega_min: self.omega_min,
            omega_max: self.omega_max,
            eps: self.eps,
            margin_floor: self.margin_floor,
            tol: self.tol,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, value_enum)]
    theorem: Theorem,
    /// Plant system document (also the analyzed system for `kyp`).
    #[arg(long)]
    plant: String,
    /// Controller system document.
    #[arg(long)]
    controller: Option<String>,
    /// Cut-off frequency (mixed-cutoff, kyp).
    #[arg(long)]
    omega_c: Option<f64>,
    /// Lower phase bound in radians (kyp).
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Upper phase bound in radians (kyp).
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    /// Gain bound (kyp).
    #[arg(long)]
    gamma: Option<f64>,
    /// Scalar gain-weight document (small-vase).
    #[arg(long)]
    weight_g: Option<String>,
    /// Scalar phase-weight document (small-vase).
    #[arg(long)]
    weight_h: Option<String>,
    /// Fan/vase table document (frequencywise-mixed).
    #[arg(long)]
    fanvase_spec: Option<String>,
    /// Build the fan/vase table from the plant's own sweep split at this
    /// cut-off (frequencywise-mixed).
    #[arg(long)]
    from_cutoff: Option<f64>,
    /// Fixed gain-floor schedule r(omega) = const (dw-phase).
    #[arg(long)]
    r_const: Option<f64>,
    /// Fixed exclusion-angle schedule theta(omega) = const (dw-gain).
    #[arg(long)]
    theta_const: Option<f64>,
    /// Write a JSON report mirror to this path.
    #[arg(long)]
    json: Option<String>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    system: String,
    #[arg(long)]
    out: String,
    /// Emit angles in degrees instead of radians.
    #[arg(long)]
    degrees: bool,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct ConstrainedPhaseArgs {
    /// Complex matrix document (entries as [re, im] pairs).
    #[arg(long)]
    matrix: String,
    /// Gain-floor grid start:end:count, e.g. 0:8:50.
    #[arg(long)]
    r_grid: String,
    #[arg(long)]
    out: String,
    #[arg(long)]
    degrees: bool,
}

#[derive(Args)]
struct ConstrainedGainArgs {
    #[arg(long)]
    matrix: String,
    /// Exclusion-angle grid start:end:count in radians, e.g. 0:1.5:30.
    #[arg(long)]
    theta_grid: String,
    #[arg(long)]
    out: String,
    #[arg(long)]
    degrees: bool,
}

#[derive(Args)]
struct RobustEpsArgs {
    /// Real nonsingular gain matrix document.
    #[arg(long)]
    k: String,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    eta: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    omega_c: f64,
    #[arg(long)]
    json: Option<String>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are not errors.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprint!("{e}");
            std::process::exit(3);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            3
        }
    };
    std::process::exit(code);
}

fn seed_from_env() -> u64 {
    std::env::var("PHASEGAIN_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

fn run(cli: Cli) -> Result<i32, String> {
    match cli.command {
        Command::Analyze(args) => analyze(args),
        Command::Sweep(args) => sweep(args),
        Command::ConstrainedPhase(args) => constrained_phase(args),
        Command::ConstrainedGain(args) => constrained_gain(args),
        Command::RobustEps(args) => robust_eps(args),
    }
}

fn pair_table(
    p: &StateSpace,
    c: &StateSpace,
    opts: &CheckOptions,
) -> Result<Vec<report::FrequencyRow>, String> {
    let poles = imaginary_axis_poles(p, opts.tol);
    let eps = opts.eps.unwrap_or(1e-3);
    let contour = build_indented_contour(
        &poles,
        eps,
        opts.grid_points.min(200),
        opts.omega_min,
        opts.omega_max,
    )
    .map_err(|e| e.to_string())?;
    let ps = frequency_sweep(p, &contour).map_err(|e| e.to_string())?;
    let cs = frequency_sweep(c, &contour).map_err(|e| e.to_string())?;
    Ok(frequency_table(&ps, &cs))
}

fn analyze(args: AnalyzeArgs) -> Result<i32, String> {
    let opts = args.grid.options();
    let seed = seed_from_env();
    let plant = doc::load_system(&args.plant)?;
    let theorem = args.theorem.name();
    let mut report = AnalysisReport::new(theorem, seed);
    report.parameters = serde_json::json!({
        "grid_points": opts.grid_points,
        "omega_min": opts.omega_min,
        "omega_max": opts.omega_max,
        "margin_floor": opts.margin_floor,
        "tol": opts.tol,
    });

    if matches!(args.theorem, Theorem::Kyp) {
        let omega_c = args.omega_c.ok_or("kyp needs --omega-c")?;
        let alpha = args.alpha.ok_or("kyp needs --alpha")?;
        let beta = args.beta.ok_or("kyp needs --beta")?;
        let gamma = args.gamma.ok_or("kyp needs --gamma")?;
        let outcome = bounded_sectored_check(&plant, omega_c, alpha, beta, gamma)
            .map_err(|e| e.to_string())?;
        let (verdict_name, code) = match &outcome {
            BoundedSectoredOutcome::Certified(cert) => {
                report.certificate = Some(report::CertificateReport::from_certificate(cert));
                ("Certified", 0)
            }
            BoundedSectoredOutcome::NotCertified => ("NotCertified", 1),
            BoundedSectoredOutcome::Unknown(why) => {
                report.diagnostics.push(why.clone());
                ("Unknown", 2)
            }
        };
        report.verdict = verdict_name.into();
        println!("theorem {theorem}: {verdict_name}");
        if let Some(path) = &args.json {
            report.write(path)?;
        }
        return Ok(code);
    }

    let controller_path = args
        .controller
        .as_ref()
        .ok_or("this theorem needs --controller")?;
    let controller = doc::load_system(controller_path)?;

    let verdict: StabilityVerdict = match args.theorem {
        Theorem::SmallGain => {
            stability::small_gain_check(&plant, &controller, &opts).map_err(|e| e.to_string())?
        }
        Theorem::SmallPhase => {
            stability::small_phase_check(&plant, &controller, &opts).map_err(|e| e.to_string())?
        }
        Theorem::MixedCutoff => {
            let omega_c = args.omega_c.ok_or("mixed-cutoff needs --omega-c")?;
            stability::mixed_cutoff_check(&plant, &controller, omega_c, &opts)
                .map_err(|e| e.to_string())?
        }
        Theorem::FrequencywiseMixed => {
            let spec = match (&args.fanvase_spec, args.from_cutoff) {
                (Some(path), None) => doc::load_fanvase_spec(path)?,
                (None, Some(omega_c)) => {
                    let poles = imaginary_axis_poles(&plant, opts.tol);
                    let contour = build_indented_contour(
                        &poles,
                        opts.eps.unwrap_or(1e-3),
                        opts.grid_points,
                        opts.omega_min,
                        opts.omega_max,
                    )
                    .map_err(|e| e.to_string())?;
                    let sweep = frequency_sweep(&plant, &contour).map_err(|e| e.to_string())?;
                    let inf = sample_at_infinity(&plant);
                    FanVaseSpec::cutoff_reduction(&sweep, Some(&inf), omega_c)
                        .map_err(|e| e.to_string())?
                }
                _ => {
                    return Err(
                        "frequencywise-mixed needs exactly one of --fanvase-spec or --from-cutoff"
                            .into(),
                    )
                }
            };
            stability::frequencywise_mixed_check(&plant, &controller, &spec, &opts)
                .map_err(|e| e.to_string())?
        }
        Theorem::SmallVase => {
            let g_path = args.weight_g.as_ref().ok_or("small-vase needs --weight-g")?;
            let h_path = args.weight_h.as_ref().ok_or("small-vase needs --weight-h")?;
            let g = doc::load_system(g_path)?;
            let h = doc::load_system(h_path)?;
            stability::small_vase_necessity_check(&controller, &g, &h, &opts)
                .map_err(|e| e.to_string())?
        }
        Theorem::DwPhase => {
            let schedule = args.r_const.map(|r| move |_: f64| r);
            let schedule_ref: Option<&(dyn Fn(f64) -> f64 + Sync)> = match &schedule {
                Some(f) => Some(f),
                None => None,
            };
            stability::dw_phase_stability_check(&plant, &controller, schedule_ref, &opts)
                .map_err(|e| e.to_string())?
        }
        Theorem::DwGain => {
            let schedule = args.theta_const.map(|t| move |_: f64| t);
            let schedule_ref: Option<&(dyn Fn(f64) -> f64 + Sync)> = match &schedule {
                Some(f) => Some(f),
                None => None,
            };
            stability::dw_gain_stability_check(&plant, &controller, schedule_ref, &opts)
                .map_err(|e| e.to_string())?
        }
        Theorem::Kyp => unreachable!(),
    };

    let name = report::verdict_name(verdict.verdict);
    println!(
        "theorem {theorem}: {name} (worst margin {:.6e})",
        verdict.margins_min
    );
    for f in verdict.failures.iter().take(8) {
        println!(
            "  at omega={:.6e}: {} (margin {:.3e})",
            f.omega, f.condition, f.margin
        );
    }
    for d in &verdict.diagnostics {
        println!("  note: {d}");
    }
    if let Some(path) = &args.json {
        let mut full = report.with_verdict(&verdict);
        // The small-vase checker pairs the controller with the weights, not
        // with a plant sweep.
        if !matches!(args.theorem, Theorem::SmallVase) {
            full.table = pair_table(&plant, &controller, &opts)?;
        }
        full.write(path)?;
    }
    Ok(verdict_exit_code(verdict.verdict))
}

fn sweep(args: SweepArgs) -> Result<i32, String> {
    let opts = args.grid.options();
    let sys = doc::load_system(&args.system)?;
    let poles = imaginary_axis_poles(&sys, opts.tol);
    let eps = opts.eps.unwrap_or(1e-3);
    let contour =
        build_indented_contour(&poles, eps, opts.grid_points, opts.omega_min, opts.omega_max)
            .map_err(|e| e.to_string())?;
    let mut samples = frequency_sweep(&sys, &contour).map_err(|e| e.to_string())?;
    samples.push(sample_at_infinity(&sys));

    let n = sys.io_size();
    let mut writer = csv::Writer::from_path(&args.out)
        .map_err(|e| format!("{}: cannot open output: {e}", args.out))?;
    let mut header = vec!["omega".to_string()];
    for k in 1..=n {
        header.push(format!("sigma_{k}"));
    }
    header.extend(["phi_hi".into(), "phi_lo".into(), "phi_c".into()]);
    writer
        .write_record(&header)
        .map_err(|e| format!("csv write failed: {e}"))?;
    for sample in &samples {
        let mut row = vec![fmt_num(sample.omega)];
        for g in &sample.gains {
            row.push(fmt_num(*g));
        }
        match &sample.phases {
            Some(ph) => {
                row.push(fmt_angle(ph.hi, args.degrees));
                row.push(fmt_angle(ph.lo, args.degrees));
                row.push(fmt_angle(ph.center, args.degrees));
            }
            None => {
                row.extend([String::new(), String::new(), String::new()]);
            }
        }
        writer
            .write_record(&row)
            .map_err(|e| format!("csv write failed: {e}"))?;
    }
    writer.flush().map_err(|e| format!("csv flush failed: {e}"))?;
    println!("wrote {} rows to {}", samples.len(), args.out);
    Ok(0)
}

fn parse_range(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid '{text}' must look like start:end:count"));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|_| format!("bad grid start '{}'", parts[0]))?;
    let end: f64 = parts[1]
        .parse()
        .map_err(|_| format!("bad grid end '{}'", parts[1]))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| format!("bad grid count '{}'", parts[2]))?;
    if count == 0 {
        return Err("grid count must be positive".into());
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    Ok((0..count)
        .map(|k| start + (end - start) * k as f64 / (count - 1) as f64)
        .collect())
}

fn constrained_phase(args: ConstrainedPhaseArgs) -> Result<i32, String> {
    let matrix = doc::load_complex_matrix(&args.matrix)?;
    let grid = parse_range(&args.r_grid)?;
    let mut writer = csv::Writer::from_path(&args.out)
        .map_err(|e| format!("{}: cannot open output: {e}", args.out))?;
    writer
        .write_record(["r", "psi_lo", "psi_hi"])
        .map_err(|e| format!("csv write failed: {e}"))?;
    for &r in &grid {
        let row = match dwshell::constrained_phase_sector(&matrix, r) {
            Ok(sector) if sector.empty => vec![fmt_num(r), String::new(), String::new()],
            Ok(sector) => vec![
                fmt_num(r),
                fmt_angle(sector.lo, args.degrees),
                fmt_angle(sector.hi, args.degrees),
            ],
            Err(e) => {
                eprintln!("note: r={r}: {e}");
                vec![fmt_num(r), String::new(), String::new()]
            }
        };
        writer
            .write_record(&row)
            .map_err(|e| format!("csv write failed: {e}"))?;
    }
    writer.flush().map_err(|e| format!("csv flush failed: {e}"))?;
    println!("wrote {} rows to {}", grid.len(), args.out);
    Ok(0)
}

fn constrained_gain(args: ConstrainedGainArgs) -> Result<i32, String> {
    let matrix = doc::load_complex_matrix(&args.matrix)?;
    let grid = parse_range(&args.theta_grid)?;
    let mut writer = csv::Writer::from_path(&args.out)
        .map_err(|e| format!("{}: cannot open output: {e}", args.out))?;
    writer
        .write_record(["theta", "gamma", "method"])
        .map_err(|e| format!("csv write failed: {e}"))?;
    for &theta in &grid {
        let row = match dwshell::constrained_gain(&matrix, theta) {
            Ok(g) => vec![
                fmt_angle(theta, args.degrees),
                fmt_num(g.value),
                match g.method {
                    dwshell::GainMethod::Sdp => "sdp".to_string(),
                    dwshell::GainMethod::Sampling => "sampling".to_string(),
                },
            ],
            Err(e) => {
                eprintln!("note: theta={theta}: {e}");
                vec![fmt_angle(theta, args.degrees), String::new(), String::new()]
            }
        };
        writer
            .write_record(&row)
            .map_err(|e| format!("csv write failed: {e}"))?;
    }
    writer.flush().map_err(|e| format!("csv flush failed: {e}"))?;
    println!("wrote {} rows to {}", grid.len(), args.out);
    Ok(0)
}

fn robust_eps(args: RobustEpsArgs) -> Result<i32, String> {
    let k = doc::load_real_matrix(&args.k)?;
    let res =
        stability::robust_stabilization_epsilon(&k, args.delta, args.eta, args.gamma, args.omega_c)
            .map_err(|e| e.to_string())?;
    println!("c = {}", fmt_num(res.c));
    println!("admissible epsilon < {}", fmt_num(res.eps_bound));
    if let Some(path) = &args.json {
        let body = serde_json::json!({
            "tool": "phasegain",
            "version": env!("CARGO_PKG_VERSION"),
            "c": res.c,
            "eps_bound": res.eps_bound,
            "parameters": {
                "delta": args.delta,
                "eta": args.eta,
                "gamma": args.gamma,
                "omega_c": args.omega_c,
            },
        });
        std::fs::write(path, serde_json::to_string_pretty(&body).unwrap())
            .map_err(|e| format!("{path}: cannot write report: {e}"))?;
    }
    Ok(0)
}
