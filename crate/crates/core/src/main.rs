use clap::{Parser, Subcommand, ValueEnum};
use periodic_mv::coefficients::{scenario::builtin_specs, scenario_by_name, Scenario};
use periodic_mv::engine::{self, io, NoisePolicy, SimConfig};
use periodic_mv::harness::{self, emit_report, load_config, ExperimentConfig, Metric};
use periodic_mv::rates::{self, RateInputs, TabulatedCostFunction};
use periodic_mv::transport::{self, CostSpec};
use periodic_mv::{Error, Result};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "pmv", version, about = "Time-periodic McKean-Vlasov simulation and ergodicity checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Noise seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (overrides the config).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Particle count (overrides the config).
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Time step (overrides the config); must divide the period.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Output directory; defaults to $PMV_OUT_DIR, then ./pmv-out.
    #[arg(long, global = true, env = "PMV_OUT_DIR")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PsiKind {
    Example31,
    Eigen,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its period snapshots.
    Simulate {
        scenario: String,
        #[arg(long, default_value_t = 12)]
        periods: usize,
    },
    /// Distance between two snapshots stored as CSV.
    Metrics {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value = "w2")]
        metric: String,
        /// Snapshot index inside each file.
        #[arg(long, default_value_t = 0)]
        period: usize,
        /// Scenario whose declared constants define ψ, V and β.
        #[arg(long)]
        scenario: Option<String>,
        /// Also write the full cost matrix to this CSV path.
        #[arg(long)]
        dump_costs: Option<PathBuf>,
    },
    /// Print the predicted rates and constants of a scenario as JSON.
    Rates { scenario: String },
    /// Tabulate a cost function ψ and print its constants.
    Psi {
        #[arg(value_enum)]
        kind: PsiKind,
        #[arg(long, default_value_t = 1.0)]
        theta1: f64,
        #[arg(long, default_value_t = 1.0)]
        theta2: f64,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 1e-14)]
        tol: f64,
        #[arg(long, default_value_t = 0.0)]
        d0: f64,
        #[arg(long, default_value_t = 1.0)]
        l: f64,
        /// Write the table (r, ψ, ψ′, ψ″) to this CSV path.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Run an experiment from a JSON config or a scenario name.
    Experiment {
        /// Path to a JSON config, or a built-in scenario name.
        target: String,
        #[arg(long)]
        metric: Option<String>,
    },
    /// List the built-in scenarios.
    Catalog,
}

fn out_dir(cli_out: &Option<PathBuf>, fallback: Option<&str>) -> PathBuf {
    cli_out
        .clone()
        .or_else(|| fallback.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("pmv-out"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Catalog => {
            for s in builtin_specs() {
                let family = serde_json::to_value(&s.family)?;
                let kind = family["kind"].as_str().unwrap_or("?").to_string();
                let domain = serde_json::to_value(&s.domain)?;
                println!("{:<26} d={} period={} family={kind} domain={domain}", s.name, s.dim, s.period);
            }
        }
        Command::Simulate { scenario, periods } => {
            let scn = scenario_by_name(scenario)?;
            let t0 = scn.coefficients.period;
            let steps = cli.dt.map_or(1000, |dt| (t0 / dt).round().max(1.0) as u64);
            let mut cfg = SimConfig::new(steps, *periods, cli.n.unwrap_or(4096), cli.seed.unwrap_or(0));
            cfg.workers = cli.workers.unwrap_or(1);
            let snaps = engine::simulate(&scn, &cfg)?;
            let dir = out_dir(&cli.out, None);
            std::fs::create_dir_all(&dir)?;
            io::write_csv(&dir.join("snapshots.csv"), &snaps)?;
            io::write_binary(&dir.join("snapshots"), &snaps)?;
            println!("wrote {} snapshots to {}", snaps.len(), dir.display());
        }
        Command::Metrics {
            a,
            b,
            metric,
            period,
            scenario,
            dump_costs,
        } => {
            let metric = Metric::parse(metric)?;
            let pick = |p: &Path| -> Result<engine::Ensemble> {
                io::read_csv(p)?
                    .into_iter()
                    .nth(*period)
                    .ok_or_else(|| Error::Config(format!("{} has no snapshot {period}", p.display())))
            };
            let (ea, eb) = (pick(a)?, pick(b)?);
            let constants = match scenario {
                Some(s) => scenario_by_name(s)?.coefficients.constants,
                None => Default::default(),
            };
            let psi = harness::resolve_psi(None, metric, &constants)?;
            let noise = NoisePolicy::new(cli.seed.unwrap_or(0));
            let d = harness::distance(metric, &ea, &eb, psi.as_ref(), &constants, None, 5, &noise)?;
            if let Some(path) = dump_costs {
                let cost = match (metric, &psi) {
                    (Metric::W1, _) => CostSpec::Power(1),
                    (Metric::Wpsi, Some(p)) => CostSpec::Psi(p.clone()),
                    (Metric::Wpsiv, Some(p)) => CostSpec::WeightedPsi {
                        psi: p.clone(),
                        v: constants.lyapunov.clone().expect("checked by distance"),
                        beta: constants.beta.expect("checked by distance"),
                    },
                    _ => CostSpec::Power(2),
                };
                transport::write_cost_matrix(path, &ea, &eb, &cost)?;
            }
            println!("{}", json!({ "metric": metric.name(), "value": d }));
        }
        Command::Rates { scenario } => {
            let scn = scenario_by_name(scenario)?;
            println!("{}", serde_json::to_string_pretty(&rates_table(&scn))?);
        }
        Command::Psi {
            kind,
            theta1,
            theta2,
            radius,
            tol,
            d0,
            l,
            table,
        } => {
            let psi = match kind {
                PsiKind::Example31 => rates::build_psi_example31(*theta1, *theta2, *radius, *tol)?,
                PsiKind::Eigen => rates::build_psi_eigen(*d0, *l)?,
            };
            if let Some(path) = table {
                write_psi_table(path, &psi)?;
            }
            let params: serde_json::Map<String, serde_json::Value> =
                psi.params.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
            let summary = json!({
                "tag": format!("{:?}", psi.tag).to_lowercase(),
                "params": params,
                "nodes": psi.grid.len(),
                "r_max": psi.r_max(),
                "c1": psi.c1,
                "c2": psi.c2,
                "c_psi": psi.c_psi,
                "monotone_c": psi.monotone_c,
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Experiment { target, metric } => {
            let mut cfg = if Path::new(target).is_file() {
                load_config(Path::new(target))?
            } else {
                ExperimentConfig::for_scenario(target)?
            };
            if let Some(m) = metric {
                cfg.metric = Metric::parse(m)?;
            }
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            cfg.workers = cli.workers.unwrap_or(cfg.workers);
            cfg.n = cli.n.unwrap_or(cfg.n);
            cfg.dt = cli.dt.unwrap_or(cfg.dt);
            // re-validate after overrides
            let cfg = ExperimentConfig::parse(&cfg.to_json())?;
            let exp = harness::run_experiment(&cfg)?;
            let dir = out_dir(&cli.out, cfg.output_dir.as_deref());
            emit_report(&exp, &dir)?;
            let r = &exp.report;
            let fit = r.fit.map(|f| format!("λ̂ = {:.4}, r² = {:.4}", f.rate, f.r2)).unwrap_or_else(|| "no fit".into());
            let pred = r.predicted.as_ref().map_or("n/a".to_string(), |p| format!("{:.4}", p.lambda));
            println!(
                "{}: metric {} predicted λ = {pred}, {fit}, verdict {}",
                r.scenario,
                r.metric,
                serde_json::to_value(r.verdict)?.as_str().unwrap_or("?")
            );
            println!("report written to {}", dir.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn write_psi_table(path: &Path, psi: &TabulatedCostFunction) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["r", "psi", "dpsi", "d2psi"])?;
    for i in 0..psi.grid.len() {
        w.write_record([
            psi.grid[i].to_string(),
            psi.values[i].to_string(),
            psi.d1[i].to_string(),
            psi.d2[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Every rate the scenario's constants support; unavailable entries carry
/// the reason instead.
fn rates_table(scn: &Scenario) -> serde_json::Value {
    let co = &scn.coefficients;
    let t0 = co.period;
    let c = &co.constants;
    let show = |r: Result<serde_json::Value>| r.unwrap_or_else(|e| json!({ "unavailable": e.to_string() }));
    let w2 = show((|| {
        let lam = rates::rate_w2(c.require(c.k1.as_ref(), "k1")?, c.require(c.k2.as_ref(), "k2")?, t0);
        Ok(json!({ "lambda_w2_squared": lam, "per_period_factor": (-lam).exp() }))
    })());
    let wpsi = show((|| {
        let psi = harness::resolve_psi(None, Metric::Wpsi, c)?.expect("wpsi has a cost");
        let g = rates::granular_psi_rates(
            c.require(c.alpha.as_ref(), "alpha")?,
            c.require(c.interaction_norm.as_ref(), "interaction_norm")?,
            &psi,
            t0,
        );
        Ok(json!({
            "lambda": g.composed_rate,
            "closed_form_display_rate": g.display_rate,
            "closed_form_mismatch": g.mismatch,
            "c1": psi.c1, "c2": psi.c2, "c_psi": psi.c_psi,
        }))
    })());
    let wpsiv = show((|| {
        let psi: Arc<TabulatedCostFunction> = harness::resolve_psi(None, Metric::Wpsiv, c)?.expect("wpsiv has a cost");
        let r = rates::rate_wpsiv(&RateInputs::new(t0, co.dim, c.clone()), &psi, t0)?;
        Ok(json!({
            "lambda": r.lambda,
            "kappa_branch_integral": r.kappa_branch_integral,
            "local_branch_integral": r.local_branch_integral,
            "theta_integral": r.theta_integral,
            "k1_integral": r.k1_integral,
            "d1": r.d1,
            "c_psi": r.c_psi,
            "boundary_hit": r.boundary_hit,
        }))
    })());
    let entropy = show((|| {
        let e = rates::entropy_decay_constant(&RateInputs::new(t0, co.dim, c.clone()), t0, t0)?;
        Ok(serde_json::to_value(e)?)
    })());
    json!({
        "scenario": scn.name,
        "period": t0,
        "w2": w2,
        "wpsi": wpsi,
        "wpsiv": wpsiv,
        "entropy": entropy,
    })
}
