use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use swarm_guidance::guidance::validate_requirements;
use swarm_guidance::scenario::{load_scenario, ScenarioSpec};
use swarm_guidance::sim::{
    monte_carlo, read_trace_csv, write_json, write_run_outputs, BatchSummary, RunTrace, Simulation,
};

/// Version of the CSV and JSON layouts written by this tool.
const FORMAT_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "swarmguide", version, about = "Swarm distribution guidance simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more seeded simulations and write traces and summaries.
    Run(RunArgs),
    /// Check every constructed primary matrix against R1-R5 and the flux caps.
    Validate(ValidateArgs),
    /// Re-aggregate an existing trace.csv into a summary.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file or preset name.
    #[arg(long, default_value = "p1-fig4")]
    scenario: String,
    /// Override a scenario key, e.g. `--set alpha=1.2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<ScenarioSpec> {
        let mut spec = load_scenario(&self.scenario)?;
        let mut overrides = self.overrides.clone();
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        if let Some(s) = self.steps {
            overrides.push(format!("steps={s}"));
        }
        spec.apply_overrides(&overrides)?;
        Ok(spec)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    runs: Option<usize>,
    /// Output directory (defaults to the scenario's `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Print every check, not only violations.
    #[arg(long)]
    verbose: bool,
    /// Check `1 - P[i,i] <= xi[i]` for every policy. By default the P1 and
    /// global kernels are checked against the largest gain in the
    /// neighbourhood, which is the bound their max-coupled kernel meets.
    #[arg(long)]
    strict_r5: bool,
}

#[derive(Args)]
struct SummarizeArgs {
    /// A trace.csv file or a directory containing one.
    traces: PathBuf,
    /// Where to write the summary (prints to stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Summarize(a) => cmd_summarize(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn versioned(summary: &BatchSummary) -> Result<Value> {
    let mut v = serde_json::to_value(summary)?;
    v["format_version"] = json!(FORMAT_VERSION);
    Ok(v)
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let mut spec = args.scenario.resolve()?;
    if let Some(r) = args.runs {
        spec.apply_overrides(&[format!("runs={r}")])?;
    }
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(&spec.out_dir));
    let scenario = spec.to_scenario()?;
    let result = monte_carlo(&scenario, spec.runs, spec.seed)?;

    write_run_outputs(&result.traces, &result.summary, &out)
        .with_context(|| format!("writing outputs to {}", out.display()))?;
    write_json(&versioned(&result.summary)?, &out.join("summary.json"))?;
    spec.write(&out.join("scenario.toml"))?;
    let provenance = json!({
        "format_version": FORMAT_VERSION,
        "config_digest": scenario.digest(),
        "policy": spec.policy.name(),
        "seeds": result.traces.iter().map(|t| t.seed).collect::<Vec<_>>(),
        "build": build_id(),
        "scenario": args.scenario.scenario,
        "overrides": args.scenario.overrides,
    });
    write_json(&provenance, &out.join("provenance.json"))?;

    let s = &result.summary;
    println!(
        "{} run(s) of {}: final D_H median {:.4} [{:.4}, {:.4}], cumulative expense median {:.1}",
        s.n_runs,
        spec.policy,
        s.final_hellinger.median,
        s.final_hellinger.q25,
        s.final_hellinger.q75,
        s.cumulative_expense.median
    );
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn build_id() -> String {
    let pkg = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
    match option_env!("SWARMGUIDE_BUILD_ID") {
        Some(id) => format!("{pkg} ({id})"),
        None => pkg.to_string(),
    }
}

fn cmd_validate(args: ValidateArgs) -> Result<ExitCode> {
    let spec = args.scenario.resolve()?;
    let scenario = spec.to_scenario()?;
    let kind = spec.policy;
    let mut sim = Simulation::new(&scenario, spec.seed)?;
    let mut violations = 0usize;
    let mut max_flux_ratio = 0.0_f64;
    let strict_r5 = args.strict_r5 || kind.strict_settling();
    let r5_form = if strict_r5 { "strict" } else { "neighbourhood" };

    for k in 0..spec.steps {
        let ctx = sim.context();
        let counts = sim.state().counts();
        let sp = ctx.step_policy(kind, counts, None);
        let report = validate_requirements(&sp.primary, &ctx.theta, &ctx.topo, &sp.xi);
        let r5 = if strict_r5 {
            &report.r5_strict
        } else {
            &report.r5_neighborhood
        };
        let mut problems: Vec<String> = [
            ("R1", &report.r1_stochastic),
            ("R2", &report.r2_positive_diagonal),
            ("R3", &report.r3_reversible),
            ("R4", &report.r4_irreducible),
            ("R5", r5),
        ]
        .into_iter()
        .filter(|(_, c)| !c.passed)
        .map(|(name, c)| format!("{name}: {}", c.detail.clone().unwrap_or_default()))
        .collect();

        if kind.uses_flux_caps() {
            for (i, l) in ctx.topo.directed_edges() {
                let flow = counts[i] as f64 * sp.primary[(i, l)];
                let cap = ctx.cfg.flux_caps.cap(i, l);
                max_flux_ratio = max_flux_ratio.max(flow / cap);
                if flow > cap {
                    problems.push(format!("flux: n[{i}]*P[{i},{l}] = {flow} exceeds cap {cap}"));
                }
            }
        }

        if problems.is_empty() {
            if args.verbose {
                println!("step {k}: ok");
            }
        } else {
            violations += 1;
            println!("step {k}: {}", problems.join("; "));
        }
        sim.step()?;
    }

    print!(
        "validated {} steps of {} (R5 {r5_form} form): {violations} step(s) with violations",
        spec.steps, kind
    );
    if kind.uses_flux_caps() {
        print!(", max flux/cap {max_flux_ratio:.6}");
    }
    println!();
    Ok(if violations == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_summarize(args: SummarizeArgs) -> Result<ExitCode> {
    let (csv, dir) = if args.traces.is_dir() {
        (args.traces.join("trace.csv"), args.traces.clone())
    } else {
        let dir = args.traces.parent().map(Path::to_path_buf).unwrap_or_default();
        (args.traces.clone(), dir)
    };
    let groups = read_trace_csv(&csv).with_context(|| format!("reading {}", csv.display()))?;
    if groups.is_empty() {
        bail!("{} contains no samples", csv.display());
    }
    let (policy, digest) = match fs::read_to_string(dir.join("provenance.json")) {
        Ok(text) => {
            let v: Value = serde_json::from_str(&text)?;
            (
                v["policy"].as_str().unwrap_or("unknown").to_string(),
                v["config_digest"].as_str().unwrap_or("").to_string(),
            )
        }
        Err(_) => ("unknown".to_string(), String::new()),
    };
    let runs = groups
        .into_iter()
        .map(|(_, seed, samples)| {
            RunTrace {
                seed,
                config_digest: digest.clone(),
                policy: policy.clone(),
                n_agents: 0,
                n_bins: 0,
                theta: Vec::new(),
                samples,
                flux_exceedances: Vec::new(),
                n_paths: 0,
                async_windows: None,
            }
            .summary()
        })
        .collect();
    let summary = versioned(&BatchSummary::from_runs(runs)?)?;
    match args.out {
        Some(path) => write_json(&summary, &path)?,
        None => println!("{}", serde_json::to_string_pretty(&summary)?),
    }
    Ok(ExitCode::SUCCESS)
}
