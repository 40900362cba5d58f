use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use qbm_core::coefficients::{bmme_coefficients, lindblad_alpha_beta, CoefficientError, LinearLmeCoefficients, ModelParams};
use qbm_core::fock_oracle::{
    factorize_quadratic, gaussian_dissipator_matrix, run_bmme_contrast, run_linear_oracle, FockError, OracleConfig, QuadraticLindbladOp,
};
use qbm_core::linear_dynamics::{bmme_stationary, evolve_moments, FirstMoments, GaussianState, LinearError};
use qbm_core::phase_space::{csv_row, diagnostics, PhaseSpaceError};
use qbm_core::quadratic_dynamics::{evolve_closure, ClosureError, QuadraticClosureState};
use qbm_core::sweep::{
    cooling_boundary, emit, linear_stationary, preset, quadratic_stationary, run_sweep, summary, threshold_scan, AxisRange, CellError,
    CoefficientSource, EmitFormat, SweepConfig, SweepError, ThresholdOptions, Tolerances, PRESET_NAMES,
};

mod random_checks;

#[derive(Parser)]
#[command(name = "qbm", version, about = "Quantum Brownian motion in Lindblad form: coefficients, moment dynamics, sweeps and a Fock-space oracle")]
struct Cli {
    /// JSON sweep configuration (sweep, boundary, threshold)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; results go to stdout when absent (sweep defaults to ./results)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value = "csv")]
    format: EmitFormat,
    /// Worker threads for grid evaluation
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for the random-state checks of `oracle --random`
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Point {
    #[arg(long, allow_negative_numbers = true)]
    g: f64,
    #[arg(long, allow_negative_numbers = true)]
    lam: f64,
    #[arg(long, allow_negative_numbers = true)]
    tau: f64,
    /// Counter-term weight
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    r: f64,
}

impl Point {
    fn params(&self) -> Result<ModelParams, CliError> {
        Ok(ModelParams::with_counter_term(self.g, self.lam, self.tau, self.r)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Born-Markov, Lindblad and quadratic-coupling coefficients at one point
    Coeffs {
        #[command(flatten)]
        point: Point,
        /// Quadratic coefficient file (JSON); the non-physical surrogate otherwise
        #[arg(long)]
        coefficients: Option<PathBuf>,
    },
    /// Integrate the linear moment equations
    EvolveLinear {
        #[command(flatten)]
        point: Point,
        #[arg(long, default_value_t = 50.0)]
        t_max: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        x0: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        p0: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Stationary Gaussian state and phase-space diagnostics, linear coupling
    StationaryLinear {
        #[command(flatten)]
        point: Point,
    },
    /// Integrate the quadratic Gaussian closure from the ground state
    EvolveQuadratic {
        #[command(flatten)]
        point: Point,
        /// Defaults to max(400, 60/g)
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        coefficients: Option<PathBuf>,
    },
    /// Stationary state of the quadratic closure on the CL branch
    StationaryQuadratic {
        #[command(flatten)]
        point: Point,
        #[arg(long)]
        coefficients: Option<PathBuf>,
    },
    /// Evaluate a parameter grid
    Sweep {
        /// Bundled configuration (fig1 ... fig9, quadratic-theta)
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        list_presets: bool,
    },
    /// chi = 1 contours of the Lindblad and Born-Markov stationary states
    Boundary {
        #[arg(long, default_value_t = 0.8)]
        g: f64,
        /// Points per axis when no --config grid is given
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
    /// Bisect the damping ratio at which the quadratic closure stops converging
    Threshold {
        #[arg(long, default_value_t = 16.0)]
        lam: f64,
        #[arg(long, default_value_t = 4.0)]
        tau: f64,
        #[arg(long, default_value_t = 0.05)]
        g_lo: f64,
        #[arg(long, default_value_t = 4.0)]
        g_hi: f64,
        #[arg(long, default_value_t = 0.01)]
        width: f64,
        #[arg(long)]
        coefficients: Option<PathBuf>,
    },
    /// Fock-space check of the linear model, or random factorization checks
    Oracle {
        #[arg(long, allow_negative_numbers = true)]
        g: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        lam: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        tau: Option<f64>,
        #[arg(long, default_value_t = 60)]
        dim: usize,
        #[arg(long, default_value_t = 60.0)]
        t_max: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        /// Evolve under the Born-Markov generator instead
        #[arg(long)]
        bmme: bool,
        /// Number of random quadratic operators for the factorization checks
        #[arg(long)]
        random: Option<usize>,
    },
    /// Kossakowski positivity and coefficient identities
    CheckLindblad {
        #[command(flatten)]
        point: Point,
        #[arg(long)]
        coefficients: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

impl From<CoefficientError> for CliError {
    fn from(e: CoefficientError) -> Self {
        match e {
            CoefficientError::Io { .. } => CliError::Io(e.to_string()),
            CoefficientError::Degenerate(_) | CoefficientError::Digamma(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Config { .. } | SweepError::Parse { .. } => CliError::Validation(e.to_string()),
            SweepError::Io { .. } => CliError::Io(e.to_string()),
            SweepError::Numerical(_) => CliError::Numerical(e.to_string()),
            SweepError::Coefficients(c) => c.into(),
        }
    }
}

impl From<FockError> for CliError {
    fn from(e: FockError) -> Self {
        match e {
            FockError::Dimension(_) | FockError::InvalidInput(_) => CliError::Validation(e.to_string()),
            FockError::Coefficients(c) => c.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<LinearError> for CliError {
    fn from(e: LinearError) -> Self {
        match e {
            LinearError::InvalidInput(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ClosureError> for CliError {
    fn from(e: ClosureError) -> Self {
        match e {
            ClosureError::InvalidInput(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(format!("{} ({})", e, e.reason_code())),
        }
    }
}

impl From<PhaseSpaceError> for CliError {
    fn from(e: PhaseSpaceError) -> Self {
        match e {
            PhaseSpaceError::Coefficients(c) => c.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<CellError> for CliError {
    fn from(e: CellError) -> Self {
        if e.reason == CellError::INVALID_INPUT {
            CliError::Validation(e.message)
        } else {
            CliError::Numerical(format!("{} ({})", e.message, e.reason))
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes `text` to `<out>/<name>` or prints it.
fn deliver(out: Option<&Path>, name: &str, text: &str) -> Result<(), CliError> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| io_err(&path, e))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn deliver_json(out: Option<&Path>, name: &str, v: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(v).expect("JSON value serializes");
    text.push('\n');
    deliver(out, &format!("{name}.json"), &text)
}

fn source(path: Option<&Path>) -> Result<CoefficientSource, CliError> {
    match path {
        Some(p) => Ok(CoefficientSource::from_path(p)?),
        None => Ok(CoefficientSource::Surrogate),
    }
}

fn load_config(path: &Path) -> Result<SweepConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(SweepConfig::from_json(&text)?)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Validation("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Numerical(e.to_string()))?;
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Coeffs { point, coefficients } => {
            let p = point.params()?;
            let b = bmme_coefficients(&p)?;
            let c = LinearLmeCoefficients::from_params(&p)?;
            let (alpha, beta) = lindblad_alpha_beta(&c)?;
            let src = source(coefficients.as_deref())?;
            let q = src.lme_at(p.g, p.lam, p.tau)?;
            deliver_json(
                out,
                "coeffs",
                &json!({
                    "params": p,
                    "perturbative_warning": p.perturbative_warning(),
                    "bmme": b,
                    "lme": c,
                    "lindblad_operator": { "alpha": alpha, "beta": beta },
                    "kossakowski_min_eigenvalue": c.kossakowski_min_eigenvalue(),
                    "identity_residual": c.identity_residual(),
                    "quadratic": { "source": src.label(), "lme": q },
                }),
            )
        }
        Command::EvolveLinear { point, t_max, x0, p0, tol } => {
            let p = point.params()?;
            let c = LinearLmeCoefficients::from_params(&p)?;
            let traj = evolve_moments(FirstMoments { x: x0, p: p0 }, GaussianState::GROUND, &c, p.r, t_max, tol)?;
            let mut buf = Vec::new();
            traj.write_csv(&mut buf).expect("writing to memory");
            deliver(out, "evolve-linear.csv", &String::from_utf8(buf).expect("ASCII output"))
        }
        Command::StationaryLinear { point } => {
            let p = point.params()?;
            let c = LinearLmeCoefficients::from_params(&p)?;
            let s = linear_stationary(&c, p.r, &Tolerances::default())?;
            let d = diagnostics(&s, p.tau);
            let b = bmme_stationary(&c)?;
            deliver_json(
                out,
                "stationary-linear",
                &json!({
                    "params": p,
                    "state": s,
                    "diagnostics": d,
                    "theta_over_pi": d.theta_over_pi(),
                    "csv_row": csv_row(&p, &s, &d),
                    "bmme_stationary": b,
                }),
            )
        }
        Command::EvolveQuadratic { point, t_max, tol, coefficients } => {
            let q = source(coefficients.as_deref())?.lme_at(point.g, point.lam, point.tau)?;
            let t_max = t_max.unwrap_or_else(|| Tolerances::default().closure_t_max(point.g));
            let (traj, report) = evolve_closure(QuadraticClosureState::GROUND, &q, t_max, tol)?;
            let mut text = String::from("t,dx2,dp2,c\n");
            for (t, s) in traj.times.iter().zip(&traj.states) {
                text.push_str(&format!("{t},{},{},{}\n", s.dx2, s.dp2, s.c));
            }
            eprintln!("{}", serde_json::to_string(&report).expect("report serializes"));
            deliver(out, "evolve-quadratic.csv", &text)
        }
        Command::StationaryQuadratic { point, coefficients } => {
            let src = source(coefficients.as_deref())?;
            let root = quadratic_stationary(&src, point.g, point.lam, point.tau, &Tolerances::default())?;
            let s = root.state.to_gaussian();
            let d = diagnostics(&s, point.tau);
            deliver_json(
                out,
                "stationary-quadratic",
                &json!({
                    "g": point.g, "lam": point.lam, "tau": point.tau,
                    "source": src.label(),
                    "root": root,
                    "state": s,
                    "diagnostics": d,
                    "theta_over_pi": d.theta_over_pi(),
                }),
            )
        }
        Command::Sweep { preset: name, list_presets } => {
            if list_presets {
                println!("{}", PRESET_NAMES.join("\n"));
                return Ok(());
            }
            let cfg = match (&cli.config, name) {
                (Some(path), None) => load_config(path)?,
                (None, Some(n)) => preset(&n).ok_or_else(|| CliError::Validation(format!("unknown preset `{n}`")))?,
                (Some(_), Some(_)) => return Err(CliError::Validation("give either --config or --preset".into())),
                (None, None) => return Err(CliError::Validation("sweep needs --config or --preset".into())),
            };
            let grid = run_sweep(&cfg)?;
            let dir = out.map(Path::to_path_buf).or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("results"));
            let stem = cfg.preset.clone().unwrap_or_else(|| "sweep".into());
            let paths = emit(&grid, &dir.join(format!("{stem}.{}", cli.format.extension())), cli.format)?;
            eprintln!("{}; wrote {} and {}", summary(&grid), paths.data.display(), paths.meta.display());
            Ok(())
        }
        Command::Boundary { g, n } => {
            let (tau, lam) = match &cli.config {
                Some(path) => {
                    let cfg = load_config(path)?;
                    (cfg.tau_range, cfg.lam_range)
                }
                None => (AxisRange::log(0.01, 10.0, n), AxisRange::log(1.0, 100.0, n)),
            };
            let r = cooling_boundary(g, &tau, &lam)?;
            for note in &r.notes {
                eprintln!("note: {note}");
            }
            deliver_json(out, "boundary", &serde_json::to_value(&r).expect("boundary serializes"))
        }
        Command::Threshold { lam, tau, g_lo, g_hi, width, coefficients } => {
            let mut opts = ThresholdOptions { width, ..ThresholdOptions::default() };
            let mut coefficients = coefficients;
            if let Some(path) = &cli.config {
                let cfg = load_config(path)?;
                opts.tolerances = cfg.tolerances;
                coefficients = coefficients.or(cfg.coefficients);
            }
            let src = source(coefficients.as_deref())?;
            let r = threshold_scan(&src, lam, tau, (g_lo, g_hi), &opts)?;
            deliver_json(out, "threshold", &json!({ "source": src.label(), "report": r }))
        }
        Command::Oracle { g, lam, tau, dim, t_max, dt, bmme, random } => {
            if let Some(n) = random {
                let r = random_checks::factorization_checks(n, cli.seed);
                deliver_json(out, "oracle-random", &serde_json::to_value(&r).expect("report serializes"))?;
                return if r.pass { Ok(()) } else { Err(CliError::Numerical("random factorization checks failed".into())) };
            }
            let (Some(g), Some(lam), Some(tau)) = (g, lam, tau) else {
                return Err(CliError::Validation("oracle needs --g, --lam and --tau (or --random N)".into()));
            };
            let mut cfg = OracleConfig::new(ModelParams::new(g, lam, tau)?, dim, t_max);
            cfg.dt = dt;
            if bmme {
                let r = run_bmme_contrast(&cfg)?;
                deliver_json(out, "oracle-bmme", &serde_json::to_value(r).expect("report serializes"))
            } else {
                let r = run_linear_oracle(&cfg)?;
                deliver_json(out, "oracle", &serde_json::to_value(&r).expect("report serializes"))?;
                if r.pass_flags.all() {
                    Ok(())
                } else {
                    Err(CliError::Numerical(format!("oracle checks failed: {:?}", r.pass_flags)))
                }
            }
        }
        Command::CheckLindblad { point, coefficients } => {
            let p = point.params()?;
            let c = LinearLmeCoefficients::from_params(&p)?;
            let src = source(coefficients.as_deref())?;
            let q = src.lme_at(p.g, p.lam, p.tau)?;
            let (res_nu, res_eps) = q.identity_residuals();
            let (mu, nu, eps) = q.lindblad_operator()?;
            let op = QuadraticLindbladOp::from_quadratic_operator(mu, nu, eps);
            let fact = factorize_quadratic(&op)?;
            // Γ̃ at the CL-branch state if it exists, otherwise at the ground state
            let state = quadratic_stationary(&src, p.g, p.lam, p.tau, &Tolerances::default())
                .map(|r| r.state.to_gaussian())
                .unwrap_or(GaussianState::GROUND);
            let gamma = gaussian_dissipator_matrix(&fact.d1, &fact.d2, &state)?;
            let linear_psd = c.kossakowski_min_eigenvalue() >= qbm_core::fock_oracle::KOSSAKOWSKI_TOL;
            let pass = linear_psd && gamma.psd;
            deliver_json(
                out,
                "check-lindblad",
                &json!({
                    "params": p,
                    "linear": {
                        "kossakowski_min_eigenvalue": c.kossakowski_min_eigenvalue(),
                        "identity_residual": c.identity_residual(),
                        "psd": linear_psd,
                    },
                    "quadratic": {
                        "source": src.label(),
                        "identity_residuals": [res_nu, res_eps],
                        "factorization": fact,
                        "reconstruction_error": fact.reconstruction_error(&op, 20),
                        "gaussian_state": state,
                        "dissipator_min_eigenvalue": gamma.min_eigenvalue,
                        "psd": gamma.psd,
                    },
                    "pass": pass,
                }),
            )?;
            if pass {
                Ok(())
            } else {
                Err(CliError::Numerical("dissipator is not positive semidefinite".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
