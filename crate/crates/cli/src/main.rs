use clap::{Parser, Subcommand, ValueEnum};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use wassfit::dual::{
    epsilon_prime, gradient_exact, smoothness_constant, solve_dual, SolverConfig, VolumeBackend,
};
use wassfit::estimator::estimate_parameters;
use wassfit::geometry::{cell_box_volume_exact, Instance, EXACT_MAX_DIM};
use wassfit::io::{InstanceFile, Metadata, ResultJson};
use wassfit::oracle::{discrete_oracle, finite_difference_gradient, semidiscrete_1d_exact};
use wassfit::{fixtures, sat, Error};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_BAD_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "wassfit", version, about = "Wasserstein location/scale fitting for box densities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate sigma and mu for an instance file.
    Estimate {
        instance: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.01)]
        eta: f64,
        #[arg(long, env = "WASSFIT_SEED", default_value_t = 0)]
        seed: u64,
        /// Stop after this many iterations (voids the guarantee if it binds).
        #[arg(long)]
        max_iters: Option<u64>,
        #[arg(long, default_value = "auto")]
        backend: Backend,
        /// Per-box Monte-Carlo sample cap (voids the guarantee if it binds).
        #[arg(long, default_value_t = 1 << 20)]
        max_samples: u64,
        /// Write the result JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the solver trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Record the energy at every iterate in the trace.
        #[arg(long)]
        trace_energy: bool,
    },
    /// Build the likelihood instance for a 3-CNF formula.
    #[command(name = "reduce-3sat")]
    Reduce3Sat {
        dimacs: PathBuf,
        /// Write the instance JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check the solver against independent oracles.
    Verify {
        /// Instance JSON (modes oracle, invariants) or DIMACS file (mode sat).
        input: Option<PathBuf>,
        #[arg(long, default_value = "oracle")]
        mode: Mode,
        /// Cells per axis for the discrete oracle.
        #[arg(long, default_value_t = 200)]
        resolution: usize,
        #[arg(long, env = "WASSFIT_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        /// Where to write the necessity-ratio table (mode invariants).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Auto,
    Exact,
    Mc,
}

impl From<Backend> for VolumeBackend {
    fn from(b: Backend) -> Self {
        match b {
            Backend::Auto => VolumeBackend::Auto,
            Backend::Exact => VolumeBackend::Exact,
            Backend::Mc => VolumeBackend::MonteCarlo,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Oracle,
    Sat,
    Invariants,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonFinite(_) | Error::DegenerateDenominator(_) => EXIT_NUMERICAL,
            _ => EXIT_BAD_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn bad_input(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_BAD_INPUT,
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| bad_input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| bad_input(format!("{}: {e}", path.display())))
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    Ok(InstanceFile::from_json(&read(path)?)?.to_instance()?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Estimate {
            instance,
            epsilon,
            eta,
            seed,
            max_iters,
            backend,
            max_samples,
            out,
            trace,
            trace_energy,
        } => {
            let config = SolverConfig {
                epsilon,
                eta,
                seed,
                max_iters_override: max_iters,
                backend: backend.into(),
                max_samples_per_box: Some(max_samples),
                trace_energy,
            };
            cmd_estimate(&instance, &config, out.as_deref(), trace.as_deref())
        }
        Command::Reduce3Sat { dimacs, out } => cmd_reduce(&dimacs, out.as_deref()),
        Command::Verify {
            input,
            mode,
            resolution,
            seed,
            epsilon,
            csv,
        } => match mode {
            Mode::Oracle => input
                .ok_or_else(|| bad_input("mode oracle needs an instance file"))
                .and_then(|p| verify_oracle(&p, resolution, epsilon)),
            Mode::Sat => input
                .ok_or_else(|| bad_input("mode sat needs a DIMACS file"))
                .and_then(|p| verify_sat(&p)),
            Mode::Invariants => verify_invariants(input.as_deref(), seed, epsilon, csv.as_deref()),
        },
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_estimate(
    path: &Path,
    config: &SolverConfig,
    out: Option<&Path>,
    trace: Option<&Path>,
) -> Result<(), Failure> {
    let instance = load_instance(path)?;
    let result = estimate_parameters(&instance, config)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    if !result.guarantee_holds {
        eprintln!("warning: accuracy guarantee does not hold for this run");
    }
    let mut json = serde_json::to_string_pretty(&ResultJson::from(&result)).expect("result serializes");
    json.push('\n');
    match out {
        Some(p) => write(p, &json)?,
        None => print!("{json}"),
    }
    if let Some(p) = trace {
        let mut buf = Vec::new();
        result.trace.write_csv(&mut buf).expect("in-memory write");
        write(p, &String::from_utf8(buf).expect("csv is utf-8"))?;
    }
    Ok(())
}

fn cmd_reduce(path: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let cnf = sat::parse_dimacs(&read(path)?)?;
    let red = sat::reduce_3sat(&cnf)?;
    sat::check_reduction(&red, 1e-9)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let file = InstanceFile::from_instance(&red.instance(), Metadata { name, seed: None });
    let summary = format!("gamma = {}\nboxes = {}\n", red.gamma, red.num_boxes());
    match out {
        Some(p) => {
            write(p, &file.to_json())?;
            print!("{summary}");
        }
        None => {
            eprint!("{summary}");
            print!("{}", file.to_json());
        }
    }
    Ok(())
}

fn report(ok: bool, body: String) -> Result<(), Failure> {
    print!("{body}");
    if ok {
        println!("PASS");
        Ok(())
    } else {
        println!("FAIL");
        Err(Failure {
            code: EXIT_CHECK_FAILED,
            message: "verification failed".into(),
        })
    }
}

fn verify_oracle(path: &Path, resolution: usize, epsilon: f64) -> Result<(), Failure> {
    let instance = load_instance(path)?;
    let config = SolverConfig {
        epsilon,
        ..SolverConfig::default()
    };
    let sol = solve_dual(&instance, &config)?;
    let (p_star, disc, method) = if instance.dim() == 1 {
        (semidiscrete_1d_exact(&instance)?.p_star, 0.0, "exact 1d".to_string())
    } else {
        let o = discrete_oracle(&instance, resolution)?;
        (o.plan.cost, o.error_bound, format!("discrete r={resolution}"))
    };
    let gap = (sol.energy - p_star).abs();
    let tol = sol.trace.epsilon_prime + disc;
    let mut body = String::new();
    let _ = writeln!(body, "oracle      {method}");
    let _ = writeln!(body, "energy      {}", sol.energy);
    let _ = writeln!(body, "p*          {p_star}");
    let _ = writeln!(body, "|E - p*|    {gap}");
    let _ = writeln!(body, "eps'        {}", sol.trace.epsilon_prime);
    let _ = writeln!(body, "disc bound  {disc}");
    let _ = writeln!(body, "iterations  {}", sol.trace.stopped_at);
    report(gap <= tol, body)
}

fn verify_sat(path: &Path) -> Result<(), Failure> {
    let cnf = sat::parse_dimacs(&read(path)?)?;
    let red = sat::reduce_3sat(&cnf)?;
    let structural = sat::check_reduction(&red, 1e-9).is_ok();
    let decided = sat::decide_positive_likelihood(&cnf)?;
    let brute = sat::brute_force_sat(&cnf)?;
    let mut body = String::new();
    let _ = writeln!(body, "variables   {}", cnf.num_vars());
    let _ = writeln!(body, "clauses     {}", cnf.clauses().len());
    let _ = writeln!(body, "boxes       {}", red.num_boxes());
    let _ = writeln!(body, "likelihood  {}", if decided { "positive" } else { "zero" });
    let _ = writeln!(body, "brute force {}", if brute { "sat" } else { "unsat" });
    report(structural && decided == brute, body)
}

/// Tiny deterministic generator for probe points.
struct SplitMix(u64);

impl SplitMix {
    fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
    }

    fn vector(&mut self, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| scale * (2.0 * self.next() - 1.0)).collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Geometry and solver checks on one instance; returns failure descriptions.
fn instance_invariants(inst: &Instance, rng: &mut SplitMix, epsilon: f64, body: &mut String) -> Result<Vec<String>, Failure> {
    let mut failures = Vec::new();
    let n = inst.n();
    let stats = inst.stats();
    let eps_p = epsilon_prime(inst, epsilon);
    let floor = epsilon * stats.min_separation.powi(2) / 12.0;
    if eps_p < floor {
        failures.push(format!("eps' {eps_p} below {floor}"));
    }
    if inst.dim() <= EXACT_MAX_DIM {
        let lip = smoothness_constant(inst)?;
        let (mut worst_part, mut worst_fd, mut worst_lip) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..20 {
            let g = rng.vector(n, 0.5);
            for b in inst.density.boxes() {
                let total: f64 = (0..n)
                    .map(|j| cell_box_volume_exact(&inst.samples, &g, j, &b.region))
                    .sum::<Result<f64, Error>>()?;
                worst_part = worst_part.max((total - b.region.volume()).abs());
            }
            let an = gradient_exact(inst, &g)?;
            if norm(&an) > 1e-3 {
                let fd = finite_difference_gradient(inst, &g, 1e-5)?;
                worst_fd = worst_fd.max(norm(&sub(&fd, &an)) / norm(&an));
            }
            let h = rng.vector(n, 0.5);
            let ratio = norm(&sub(&an, &gradient_exact(inst, &h)?)) / norm(&sub(&g, &h));
            worst_lip = worst_lip.max(ratio / lip);
        }
        let _ = writeln!(body, "partition error      {worst_part:e}");
        let _ = writeln!(body, "finite-diff rel err  {worst_fd:e}");
        let _ = writeln!(body, "max ratio / L        {worst_lip}");
        if worst_part > 1e-9 {
            failures.push(format!("cells do not partition boxes ({worst_part:e})"));
        }
        if worst_fd > 1e-3 {
            failures.push(format!("finite differences disagree ({worst_fd:e})"));
        }
        if worst_lip > 1.0 + 1e-9 {
            failures.push(format!("smoothness bound exceeded ({worst_lip})"));
        }
    }
    let config = SolverConfig {
        epsilon,
        ..SolverConfig::default()
    };
    let sol = solve_dual(inst, &config)?;
    let _ = writeln!(
        body,
        "solver               {} iterations, |g|inf violations {}, spread {} (bound {})",
        sol.trace.stopped_at,
        sol.trace.iterate_bound_violations,
        sol.trace.final_spread,
        sol.trace.spread_bound
    );
    if sol.trace.uniform_demands
        && (sol.trace.iterate_bound_violations > 0 || sol.trace.spread_bound_violated())
    {
        failures.push("dual iterate bounds violated".into());
    }
    Ok(failures)
}

fn verify_invariants(
    input: Option<&Path>,
    seed: u64,
    epsilon: f64,
    csv: Option<&Path>,
) -> Result<(), Failure> {
    let instances: Vec<(String, Instance)> = match input {
        Some(p) => vec![(p.display().to_string(), load_instance(p)?)],
        None => vec![
            ("fixture A".into(), fixtures::fixture_a()),
            ("fixture C".into(), fixtures::fixture_c()),
            ("fixture D".into(), fixtures::fixture_d()),
        ],
    };
    let mut rng = SplitMix(seed);
    let mut body = String::new();
    let mut failures = Vec::new();
    for (name, inst) in &instances {
        let _ = writeln!(body, "[{name}]");
        for f in instance_invariants(inst, &mut rng, epsilon, &mut body)? {
            failures.push(format!("{name}: {f}"));
        }
    }

    let mut table = String::from("family,m,ratio,predicted,ratio_over_m\n");
    let families: [(&str, fn(f64) -> fixtures::NecessityCase); 2] = [
        ("close_samples", fixtures::necessity_close_samples),
        ("thin_box", fixtures::necessity_thin_box),
    ];
    for (name, family) in families {
        let mut per_m = Vec::new();
        for m in [1.0, 2.0, 4.0, 8.0, 16.0] {
            let case = family(m);
            let d = sub(
                &gradient_exact(&case.instance, &case.g)?,
                &gradient_exact(&case.instance, &case.g_prime)?,
            );
            let ratio = norm(&d) / norm(&sub(&case.g, &case.g_prime));
            let _ = writeln!(table, "{name},{m},{ratio},{},{}", case.predicted_ratio, ratio / m);
            per_m.push(ratio / m);
        }
        let (lo, hi) = per_m
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        if !(hi <= 2.0 * lo) {
            failures.push(format!("{name}: ratio not linear in m"));
        }
    }
    match csv {
        Some(p) => write(p, &table)?,
        None => body.push_str(&table),
    }
    for f in &failures {
        let _ = writeln!(body, "failed: {f}");
    }
    report(failures.is_empty(), body)
}
