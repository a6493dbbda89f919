use clap::{Args, Parser, Subcommand};
use shelab::cli::{
    self, clt_rows_to_csv, emit_report, kernel_check_csv, load_config, noise_check_csv,
    parse_clt_csv, ExperimentPlan, Tolerances,
};
use shelab::error::Error;
use shelab::functionals::{
    dirichlet_identity, log_bound_check, m1_eval, m1_restricted, m23_eval, phi_n, MWhich,
};
use shelab::noise::{NoiseKind, NoiseSpec};
use shelab::oracle::{self, OracleCase, OracleConfig};
use shelab::solver::SimConfig;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

/// Monte-Carlo and oracle laboratory for spatial averages of the linear
/// stochastic heat equation.
#[derive(Parser)]
#[command(name = "shelab", version, about)]
struct CliArgs {
    /// Base seed for all keyed noise streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for replica execution.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory for CSV/JSONL artifacts.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Flat key=value configuration file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kernel identity residuals (semigroup, mass, scaling, bounds).
    KernelCheck {
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
    /// Covariance fit of noise slices against the target at lags 0..10.
    NoiseCheck {
        #[arg(long, default_value = "gaussian")]
        noise: String,
        #[arg(long, default_value_t = 20_000)]
        replicas: usize,
    },
    /// Simulate replicas of one configuration; emits JSONL records.
    Simulate(SimArgs),
    /// Deterministic Volterra variance oracle over an N list.
    Oracle {
        #[arg(long, default_value_t = 1)]
        case: u8,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, value_delimiter = ',', default_value = "64,128,256,512,1024")]
        n_list: Vec<f64>,
        #[arg(long, default_value = "gaussian")]
        noise: String,
        #[arg(long, default_value_t = 1)]
        d: usize,
    },
    /// Ladder run: σ̂²_N, density distances, KS, and rate fits.
    Clt(CltArgs),
    /// Variance functionals and identity checks.
    Functionals {
        #[arg(long)]
        which: String,
        #[arg(long, default_value_t = 0.75)]
        s: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, value_delimiter = ',', default_value = "16,64,256,1024")]
        n_list: Vec<f64>,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long, default_value = "gaussian")]
        noise: String,
        /// σ²_N input: a number, or "asymptotic" for the limiting scale.
        #[arg(long, default_value = "asymptotic")]
        sigma2: String,
        #[arg(long, default_value_t = 2.0)]
        y: f64,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Log-log rate fit over a clt summary CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
        /// Distance column: sup_dist or tv_dist.
        #[arg(long, default_value = "sup_dist")]
        column: String,
    },
    /// Join clt summaries into the long-format report.
    Report {
        #[arg(long, num_args = 1..)]
        input: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    case: Option<u8>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long = "N")]
    n: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    pad: Option<f64>,
    #[arg(long)]
    mesh_grading: Option<f64>,
}

#[derive(Args)]
struct CltArgs {
    #[arg(long)]
    case: Option<u8>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    n_ladder: Option<Vec<f64>>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    slope_lo: Option<f64>,
    #[arg(long)]
    slope_hi: Option<f64>,
}

struct Resolver {
    config: BTreeMap<String, String>,
}

impl Resolver {
    fn get<T: std::str::FromStr>(&self, cli: Option<T>, key: &str, default: T) -> T {
        cli.or_else(|| self.config.get(key).and_then(|v| v.parse().ok()))
            .unwrap_or(default)
    }
}

fn sim_config(args: &SimArgs, r: &Resolver, seed: u64) -> Result<SimConfig, Error> {
    let case = r.get(args.case, "case", 1);
    let noise_name = args
        .noise
        .clone()
        .or_else(|| r.config.get("noise").cloned())
        .unwrap_or_else(|| if case == 1 { "white" } else { "gaussian" }.to_string());
    Ok(SimConfig {
        case,
        alpha: r.get(args.alpha, "alpha", 2.0),
        t: r.get(args.t, "t", 1.0),
        window: r.get(args.n, "N", 32.0),
        d: r.get(args.d, "d", 1),
        nx: r.get(args.nx, "nx", 8),
        nt: r.get(args.nt, "nt", 64),
        pad: r.get(args.pad, "pad", 0.0),
        seed,
        replicas: r.get(args.replicas, "replicas", 1000),
        mesh_grading: r.get(args.mesh_grading, "mesh_grading", 2.0),
        noise: NoiseKind::parse(&noise_name)?,
        compensate_subgrid: true,
    })
}

fn write_or_print(out_dir: &Option<PathBuf>, name: &str, body: &str) -> Result<(), Error> {
    match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(name), body)?;
            eprintln!("wrote {}", dir.join(name).display());
        }
        None => print!("{body}"),
    }
    Ok(())
}

fn run() -> Result<bool, Error> {
    let args = CliArgs::parse();
    let config = match &args.config {
        Some(path) => load_config(path)?,
        None => BTreeMap::new(),
    };
    let resolver = Resolver { config };
    let seed = resolver.get(args.seed, "seed", 12345u64);
    let threads = resolver.get(args.threads, "threads", num_threads_default());

    match args.command {
        Command::KernelCheck { alpha, t } => {
            let (csv, pass) = kernel_check_csv(alpha, t)?;
            write_or_print(&args.out_dir, "kernel_check.csv", &csv)?;
            Ok(pass)
        }
        Command::NoiseCheck { noise, replicas } => {
            let kind = NoiseKind::parse(&noise)?;
            let (csv, pass) = noise_check_csv(kind, replicas, seed)?;
            write_or_print(&args.out_dir, "noise_check.csv", &csv)?;
            Ok(pass)
        }
        Command::Simulate(sim_args) => {
            let cfg = sim_config(&sim_args, &resolver, seed)?;
            let sim = shelab::solver::Simulator::new(cfg)?;
            let (ensemble, records) = cli::run_ensemble(&sim, threads)?;
            let mut body = String::new();
            for rec in &records {
                body.push_str(
                    &serde_json::to_string(rec).map_err(|e| Error::Validation(e.to_string()))?,
                );
                body.push('\n');
            }
            write_or_print(&args.out_dir, "replicas.jsonl", &body)?;
            eprintln!(
                "replicas={} diverged={} mean(A_N)={:.6e} var(A_N)={:.6e} neg_fraction={:.3e} sliver={:.3e}",
                ensemble.n,
                ensemble.diverged,
                ensemble.mean,
                ensemble.variance(),
                ensemble.mean_neg_fraction(),
                sim.skipped_sliver(),
            );
            Ok(true)
        }
        Command::Oracle {
            case,
            alpha,
            t,
            n_list,
            noise,
            d,
        } => {
            let ocase = match case {
                1 => OracleCase::Case1 { alpha },
                2 => OracleCase::Case2 {
                    kind: NoiseKind::parse(&noise)?,
                    d,
                },
                other => {
                    return Err(Error::domain(format!(
                        "oracle supports cases 1 and 2, got {other}"
                    )))
                }
            };
            let n_max = n_list.iter().cloned().fold(0.0, f64::max);
            let cfg = OracleConfig::for_max_window(ocase, t, n_max);
            let sol = oracle::solve_covariance(&cfg)?;
            let mut csv = String::from("N,sigma2,sigma2_over_scale,residual\n");
            for &n in &n_list {
                let w = oracle::variance_of_average(&sol, n)?;
                csv.push_str(&format!(
                    "{n},{:.12e},{:.12e},{:.3e}\n",
                    w.sigma2, w.per_scale, sol.residual
                ));
            }
            csv.push_str(&format!(
                "# limit: integral of covariance = {:.12e}\n",
                sol.sigma_integral()
            ));
            write_or_print(&args.out_dir, "oracle.csv", &csv)?;
            Ok(true)
        }
        Command::Clt(clt) => {
            let sim_args = SimArgs {
                case: clt.case,
                alpha: clt.alpha,
                t: clt.t,
                n: Some(1.0),
                nx: clt.nx,
                nt: clt.nt,
                replicas: clt.replicas,
                noise: clt.noise.clone(),
                d: None,
                pad: None,
                mesh_grading: None,
            };
            let sim = sim_config(&sim_args, &resolver, seed)?;
            let mut tolerances = Tolerances::default();
            if let Some(lo) = clt.slope_lo {
                tolerances.slope_lo = lo;
            }
            if let Some(hi) = clt.slope_hi {
                tolerances.slope_hi = hi;
            }
            let plan = ExperimentPlan {
                sim,
                n_ladder: clt
                    .n_ladder
                    .unwrap_or_else(|| vec![16.0, 32.0, 64.0, 128.0]),
                out_dir: args.out_dir.clone(),
                write_replicas: args.out_dir.is_some(),
                tolerances,
                threads,
            };
            let outcome = cli::run_experiment(&plan)?;
            if args.out_dir.is_none() {
                print!("{}", clt_rows_to_csv(&outcome.rows));
            }
            eprintln!(
                "slope(sup)={:.4} r2={:.4} slope(tv)={:.4} pass={}",
                outcome.fit_sup.slope,
                outcome.fit_sup.r2,
                outcome.fit_tv.slope,
                outcome.manifest.pass
            );
            Ok(outcome.manifest.pass)
        }
        Command::Functionals {
            which,
            s,
            t,
            n_list,
            alpha,
            noise,
            sigma2,
            y,
            k,
        } => {
            let kind = NoiseKind::parse(&noise)?;
            let mut csv = String::from("which,param,N,value,bound,pass\n");
            let mut all_pass = true;
            let sigma2_for = |n: f64, case: u8| -> Result<f64, Error> {
                match sigma2.as_str() {
                    "asymptotic" => Ok(match case {
                        1 => n * t,
                        2 => {
                            let cfg =
                                OracleConfig::for_max_window(OracleCase::Case2 { kind, d: 1 }, t, n);
                            oracle::solve_covariance(&cfg)?.sigma_integral() * n
                        }
                        _ => {
                            let f_mass = NoiseSpec::new(kind, 1)?
                                .total_mass()
                                .ok_or_else(|| Error::domain("case 3 needs colored noise"))?;
                            t * f_mass * n * n.ln()
                        }
                    }),
                    v => v
                        .parse::<f64>()
                        .map_err(|_| Error::domain(format!("bad sigma2 '{v}'"))),
                }
            };
            match which.as_str() {
                "phiN" => {
                    for &n in &n_list {
                        let v = phi_n(s, y, t, n, alpha)?;
                        let pass = (0.0..=1.0 + 1e-12).contains(&v);
                        all_pass &= pass;
                        csv.push_str(&format!("phiN,y={y},{n},{v:.9e},1,{pass}\n"));
                    }
                }
                "M1" => {
                    for &n in &n_list {
                        let s2 = sigma2_for(n, 1)?;
                        let v = m1_eval(s, t, n, alpha, s2)?;
                        let lower = m1_restricted(s, t, n, alpha, s2)?;
                        let pass = v >= lower;
                        all_pass &= pass;
                        csv.push_str(&format!("M1,s={s},{n},{v:.9e},{lower:.9e},{pass}\n"));
                    }
                }
                "M2" | "M3" => {
                    let spec = NoiseSpec::new(kind, 1)?;
                    let (mw, case) = if which == "M2" {
                        (MWhich::M2, 2)
                    } else {
                        (MWhich::M3, 3)
                    };
                    for &n in &n_list {
                        let s2 = sigma2_for(n, case)?;
                        let v = m23_eval(mw, s, t, n, &spec, s2)?;
                        let bound = if which == "M2" {
                            spec.total_mass().unwrap_or(f64::INFINITY) * n / s2
                        } else {
                            f64::INFINITY
                        };
                        let pass = v <= bound;
                        all_pass &= pass;
                        csv.push_str(&format!("{which},s={s},{n},{v:.9e},{bound:.9e},{pass}\n"));
                    }
                }
                "dirichlet" => {
                    let c = dirichlet_identity(k, alpha)?;
                    let pass = c.gap < 1e-5;
                    all_pass &= pass;
                    csv.push_str(&format!(
                        "dirichlet,k={k},0,{:.12e},{:.12e},{pass}\n",
                        c.lhs, c.rhs
                    ));
                }
                "logbound" => {
                    for row in log_bound_check(&n_list, t)? {
                        all_pass &= row.pass;
                        csv.push_str(&format!(
                            "logbound,t={t},{},{:.9e},{:.9e},{}\n",
                            row.n, row.lhs, row.bound, row.pass
                        ));
                    }
                }
                other => {
                    return Err(Error::domain(format!(
                        "unknown functional '{other}' (phiN|M1|M2|M3|dirichlet|logbound)"
                    )))
                }
            }
            write_or_print(&args.out_dir, "functionals.csv", &csv)?;
            Ok(all_pass)
        }
        Command::Fit { input, column } => {
            let text = std::fs::read_to_string(&input)?;
            let rows = parse_clt_csv(&text)?;
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .map(|r| {
                    let d = match column.as_str() {
                        "tv_dist" => r.tv_dist,
                        _ => r.sup_dist,
                    };
                    (r.n, d)
                })
                .collect();
            let fit = shelab::stats::fit_rate(&pts)?;
            println!(
                "column={column} slope={:.6} intercept={:.6} r2={:.6} dropped={}",
                fit.slope, fit.intercept, fit.r2, fit.dropped
            );
            Ok(true)
        }
        Command::Report { input } => {
            let mut rows = Vec::new();
            for path in &input {
                let text = std::fs::read_to_string(path)?;
                rows.extend(parse_clt_csv(&text)?);
            }
            let (table, csv) = emit_report(&rows)?;
            for row in &table {
                println!(
                    "case {} N {:>7} sigma2_hat {:.5e} oracle {} sup {:.4e} tv {:.4e} ks {:.4e} slope {:.3}",
                    row.case,
                    row.n,
                    row.sigma2_hat,
                    row.sigma2_oracle
                        .map(|v| format!("{v:.5e}"))
                        .unwrap_or_else(|| "   (none)".into()),
                    row.sup_dist,
                    row.tv_dist,
                    row.ks_stat,
                    row.slope
                );
            }
            write_or_print(&args.out_dir, "report.csv", &csv)?;
            Ok(true)
        }
    }
}

fn num_threads_default() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Domain(_) | Error::Validation(_) | Error::InsufficientData(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(3),
            }
        }
    }
}
