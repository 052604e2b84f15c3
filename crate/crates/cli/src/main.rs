use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use sslci::ace::{
    ace_fit, ace_objective_identity_check, apx_error_bound_eval, build_operator_t, eps_ci_tilde, maximal_correlation,
    GChoice, DEFAULT_MAX_ITERS, DEFAULT_TOL,
};
use sslci::ci::bayes_gap_check;
use sslci::harness::{parse_kv, run, summarize, write_outputs, ExperimentConfig};
use sslci::joint_file::{read_joint, read_topic_spec};
use sslci::selfcheck::{run_selfcheck, SelfcheckOptions};
use sslci::topic::verify_topic_model;
use sslci::Error;

#[derive(Parser)]
#[command(name = "sslci", version, about = "Self-supervised learning under conditional independence: simulations and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a `key = value` config file.
    Run {
        config: PathBuf,
        /// Also write plot.svg.
        #[arg(long)]
        plot: bool,
        /// Output directory (overrides `output_dir`).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[arg(long)]
        experiment: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Run trials on one thread.
        #[arg(long)]
        sequential: bool,
        /// Extra `key=value` override; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run the internal consistency checks.
    Selfcheck {
        #[arg(long, hide = true)]
        pinv_tol: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Analyse a discrete joint with the ACE solver.
    Ace {
        #[arg(long, value_name = "FILE")]
        joint: PathBuf,
        /// Number of nonconstant features (default: |Y| − 1, at least 1).
        #[arg(long)]
        k: Option<usize>,
    },
    /// Verify the topic-model conditions for a spec file.
    Topic {
        #[arg(long, value_name = "FILE")]
        spec: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Io(_) | Error::Csv(_) => Failure::Usage(e.to_string()),
            _ => Failure::Check(e.to_string()),
        }
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            plot,
            out,
            experiment,
            seed,
            trials,
            sequential,
            set,
        } => cmd_run(config, plot, out, experiment, seed, trials, sequential, set),
        Command::Selfcheck { pinv_tol, seed } => cmd_selfcheck(pinv_tol, seed),
        Command::Ace { joint, k } => cmd_ace(joint, k),
        Command::Topic { spec } => cmd_topic(spec),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Check(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    config: PathBuf,
    plot: bool,
    out: Option<PathBuf>,
    experiment: Option<String>,
    seed: Option<u64>,
    trials: Option<usize>,
    sequential: bool,
    set: Vec<String>,
) -> Outcome {
    let text = std::fs::read_to_string(&config)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", config.display())))?;
    let file = parse_kv(&text)?;
    let mut overrides = BTreeMap::new();
    for kv in &set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        overrides.insert(k.trim().to_string(), v.trim().to_string());
    }
    let mut flag = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            overrides.insert(k.to_string(), v);
        }
    };
    flag("experiment", experiment);
    flag("seed", seed.map(|s| s.to_string()));
    flag("trials", trials.map(|t| t.to_string()));
    flag("output_dir", out.map(|p| p.display().to_string()));
    if plot {
        flag("plot", Some("true".into()));
    }
    if sequential {
        flag("execution", Some("sequential".into()));
    }
    let cfg = ExperimentConfig::resolve(&file, &overrides)?;

    let start = Instant::now();
    let result = run(&cfg)?;
    let files = write_outputs(&result, &cfg.output_dir, cfg.plot)?;
    for row in summarize(&result) {
        println!(
            "{:<22} {:>10} {:<16} mean={:.4e} stderr={:.2e} n={}",
            cfg.experiment.name(),
            row.grid_value,
            row.method,
            row.mean,
            row.stderr,
            row.n
        );
    }
    println!("wrote {}", files.results.display());
    println!("wrote {}", files.summary.display());
    if let Some(p) = files.plot {
        println!("wrote {}", p.display());
    }
    let flagged = result.flagged();
    if flagged > 0 {
        eprintln!("warning: {flagged} non-finite values");
    }
    println!("wall time {:.2}s", start.elapsed().as_secs_f64());
    Ok(true)
}

fn cmd_selfcheck(pinv_tol: Option<f64>, seed: Option<u64>) -> Outcome {
    let mut opts = SelfcheckOptions::default();
    if let Some(t) = pinv_tol {
        opts.pinv_rank_tol = t;
    }
    if let Some(s) = seed {
        opts.seed = s;
    }
    let start = Instant::now();
    let results = run_selfcheck(&opts);
    for c in &results {
        println!(
            "{} {:<24} {:>7.3}s  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.seconds,
            c.detail
        );
    }
    let failed = results.iter().filter(|c| !c.passed).count();
    println!("{} checks, {failed} failed, {:.2}s", results.len(), start.elapsed().as_secs_f64());
    Ok(failed == 0)
}

fn cmd_ace(path: PathBuf, k: Option<usize>) -> Outcome {
    let joint = read_joint(&path)?;
    let max_k = joint.n1.min(joint.n2) - 1;
    let k = k.unwrap_or((joint.ny.saturating_sub(1)).max(1)).min(max_k);
    if k == 0 {
        return Err(Failure::Usage("joint needs at least two values on each side".into()));
    }
    println!("supports |X1|={} |X2|={} |Y|={}", joint.n1, joint.n2, joint.ny);
    let op = build_operator_t(&joint)?;
    let s = op.singular_values();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ");
    println!("singular values of T: {}", fmt(s.as_slice()));
    let eps = eps_ci_tilde(&joint)?;
    println!("eps_ci_tilde: {eps:.6e}");
    let corr: Vec<f64> = (1..=max_k).map(|i| maximal_correlation(&joint, i)).collect::<Result<_, _>>()?;
    println!("maximal correlations: {}", fmt(&corr));

    let mut ok = (s[0] - 1.0).abs() <= 1e-10;
    let sol = ace_fit(&joint, k, DEFAULT_MAX_ITERS, DEFAULT_TOL)?;
    println!(
        "ace k={k}: sigmas {} ({} iterations, converged={})",
        fmt(sol.sigmas.as_slice()),
        sol.iterations,
        sol.converged
    );
    ok &= sol.converged;
    match ace_objective_identity_check(&sol, &joint) {
        Ok(obj) => println!("l_ace={:.6e} l_cca={:.6e} identity ok", obj.l_ace, obj.l_cca),
        Err(e) => {
            println!("identity check failed: {e}");
            ok = false;
        }
    }
    for (name, choice) in [("pinv", GChoice::PinvOfA), ("bayes", GChoice::BayesIndicator)] {
        let b = apx_error_bound_eval(&sol, &joint, choice)?;
        println!(
            "bound[{name}]: actual={:.6e} bound={:.6e} svd-bound={:.6e}{} {}",
            b.actual,
            b.bound,
            b.bound_exact_svd,
            if b.degenerate { " (degenerate)" } else { "" },
            if b.holds() { "ok" } else { "VIOLATED" }
        );
        ok &= b.holds();
    }
    let gap = bayes_gap_check(&joint);
    println!(
        "bayes gap: lhs={:.6e} rhs={:.6e} {}",
        gap.lhs,
        gap.rhs,
        if gap.holds() { "ok" } else { "VIOLATED" }
    );
    ok &= gap.holds();
    Ok(ok)
}

fn cmd_topic(path: PathBuf) -> Outcome {
    let spec = read_topic_spec(&path)?;
    let r = verify_topic_model(&spec)?;
    let mark = |b: bool| if b { "ok" } else { "FAIL" };
    println!("vocab={} topics={} doc_len={} |Ybar|={}", spec.vocab, spec.topics, spec.doc_len, r.bar_y_size);
    println!("eps_ci={:.3e} {}", r.eps_ci, mark(r.eps_ci_ok()));
    println!("linearity gap={:.3e} mean-map gap={:.3e} {}", r.linearity_gap, r.mean_map_gap, mark(r.linearity_ok()));
    println!(
        "1/beta={:.6e} (topic covariance {:.6e}) bound={:.6e} [kappa={:.4e} sigma_min(A)={:.4e}] {}",
        r.beta_inv,
        r.beta_inv_topic_cov,
        r.beta_bound,
        r.kappa,
        r.sigma_min_a,
        mark(r.beta_ok())
    );
    Ok(r.all_ok())
}
