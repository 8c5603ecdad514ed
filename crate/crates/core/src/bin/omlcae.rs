use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use omlcae::cae::{fit_sgd, CaeArch, Normalization};
use omlcae::channel::NoiseModel;
use omlcae::harness::{
    channel_stats, efficiency_analysis, export_constellation, gradient_check, parse_list, read_metrics,
    run_experiment, write_csv, write_outputs, ConfigOverrides, EfficiencyRow, Method, MetricsRecord, Profile,
};
use omlcae::numerics::OutputActivation;
use omlcae::rng::label;
use omlcae::scenario::Scenario;

#[derive(Parser)]
#[command(name = "omlcae", version, about = "Online meta-learned channel autoencoder simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment grid and write metrics CSVs.
    Run(RunArgs),
    /// Pilot efficiency of OML-CAE relative to scratch CAE.
    Efficiency {
        #[arg(long)]
        oml: PathBuf,
        #[arg(long)]
        cae: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sequences excluded from the per-shot means.
        #[arg(long, default_value_t = 15)]
        warmup: usize,
    },
    /// Train a CAE on one pilot task and export its constellation as JSON.
    Constellation {
        #[arg(long, default_value_t = 2)]
        bits: u32,
        #[arg(long, default_value_t = 1)]
        channel_uses: usize,
        #[arg(long, default_value_t = 10.0)]
        snr_db: f64,
        #[arg(long, default_value_t = 5)]
        shots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 64)]
        hidden: usize,
        #[arg(long, default_value_t = 200)]
        n_show: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic gradients against central differences.
    Gradcheck {
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Empirical power and lag-1 correlation of the fading process.
    ChannelStats {
        #[arg(long, default_value_t = 0.99)]
        rho: f64,
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long)]
    channel_uses: Option<usize>,
    /// Comma-separated list.
    #[arg(long)]
    snr_db: Option<String>,
    /// Comma-separated list.
    #[arg(long)]
    shots: Option<String>,
    #[arg(long)]
    sequences: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    buffer_size: Option<usize>,
    /// Comma-separated subset of oml_cae, cae, joint_cae, qpsk_mle.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    n_eval: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> omlcae::Result<ConfigOverrides> {
        Ok(ConfigOverrides {
            profile: self.profile.as_deref().map(str::parse::<Profile>).transpose()?,
            bits: self.bits,
            channel_uses: self.channel_uses,
            snr_db: self.snr_db.as_deref().map(|s| parse_list("snr_db", s)).transpose()?,
            shots: self.shots.as_deref().map(|s| parse_list("shots", s)).transpose()?,
            n_sequences: self.sequences,
            rho: self.rho,
            methods: self.methods.as_deref().map(|s| parse_list::<Method>("methods", s)).transpose()?,
            seed: self.seed,
            n_eval: self.n_eval,
            threads: self.threads,
            out_dir: self.out.clone(),
            buffer_size: self.buffer_size,
            ..Default::default()
        })
    }
}

fn run(args: RunArgs) -> Result<()> {
    let file = match &args.config {
        Some(p) => ConfigOverrides::from_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => ConfigOverrides::default(),
    };
    let config = file.merge(args.overrides()?).resolve()?;
    log::info!("running {} grid cells", config.methods.len() * config.snr_db.len() * config.shots.len());
    let out = run_experiment(&config)?;
    let paths = write_outputs(&config, &out)?;
    for s in &out.summary {
        println!(
            "{:<9} snr {:>5} shots {:>2}  mean ser {:.4} over {} sequences",
            s.method.as_str(),
            s.snr_db,
            s.shots,
            s.mean_ser,
            s.sequences
        );
    }
    println!("wrote {}", paths.metrics.display());
    Ok(())
}

/// Mean SER per (snr, shots) for one method, after the warm-up window.
fn curve(rows: &[MetricsRecord], method: Method, warmup: usize) -> BTreeMap<u64, Vec<(f64, f64)>> {
    let mut sums: BTreeMap<(u64, usize), (f64, usize)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.method == method && r.sequence > warmup) {
        let e = sums.entry((r.snr_db.to_bits(), r.shots)).or_default();
        e.0 += r.ser;
        e.1 += 1;
    }
    let mut out: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for ((snr, shots), (sum, count)) in sums {
        out.entry(snr).or_default().push((shots as f64, sum / count as f64));
    }
    out
}

#[derive(serde::Serialize)]
struct EfficiencyCsvRow {
    snr_db: f64,
    target_ser: f64,
    oml_shots: f64,
    cae_equivalent_shots: Option<f64>,
    ratio: Option<f64>,
    status: omlcae::harness::EfficiencyStatus,
}

fn efficiency(oml: PathBuf, cae: PathBuf, out: PathBuf, warmup: usize) -> Result<()> {
    let oml_rows = read_metrics(&oml).with_context(|| format!("reading {}", oml.display()))?;
    let cae_rows = read_metrics(&cae).with_context(|| format!("reading {}", cae.display()))?;
    let oml_curves = curve(&oml_rows, Method::OmlCae, warmup);
    let cae_curves = curve(&cae_rows, Method::Cae, warmup);
    let mut rows = Vec::new();
    for (snr_bits, points) in &oml_curves {
        let snr_db = f64::from_bits(*snr_bits);
        let reference = cae_curves
            .get(snr_bits)
            .with_context(|| format!("no cae rows at snr {snr_db}"))?;
        let result: Vec<EfficiencyRow> = efficiency_analysis(points, reference)?;
        for r in result {
            println!(
                "snr {snr_db:>5} shots {:>2} ser {:.4} -> cae shots {} ({:?})",
                r.oml_shots,
                r.target_ser,
                r.cae_equivalent_shots.map_or("-".to_string(), |v| format!("{v:.2}")),
                r.status
            );
            rows.push(EfficiencyCsvRow {
                snr_db,
                target_ser: r.target_ser,
                oml_shots: r.oml_shots,
                cae_equivalent_shots: r.cae_equivalent_shots,
                ratio: r.ratio,
                status: r.status,
            });
        }
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_csv(&out, &rows)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn constellation(
    bits: u32,
    channel_uses: usize,
    snr_db: f64,
    shots: usize,
    seed: u64,
    iters: usize,
    lr: f64,
    hidden: usize,
    n_show: usize,
    out: PathBuf,
) -> Result<()> {
    let arch = CaeArch::new(bits, channel_uses, hidden, OutputActivation::Linear, Normalization::PerBatch)?;
    let scenario = Scenario::new(arch, seed, snr_db, shots, shots, n_show.max(1), 1, 0.99)?;
    let task = scenario.task(1)?;
    let init = scenario.arch().init_params(&mut scenario.init_rng(1));
    let params = fit_sgd(scenario.arch(), &init, &task.support, &task.h, iters, lr)?;
    let mut rng = omlcae::rng::substream(seed, label::CONSTELLATION, &[omlcae::rng::snr_key(snr_db)]);
    let noise = NoiseModel::from_snr_db(snr_db);
    let doc = export_constellation(scenario.arch(), &params, &task.h, &noise, snr_db, n_show, &mut rng)?;
    doc.write(&out)?;
    let correct = doc.received.iter().filter(|r| r.correct).count();
    println!("{correct}/{n_show} shown samples decoded correctly; wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Efficiency { oml, cae, out, warmup } => efficiency(oml, cae, out, warmup),
        Command::Constellation {
            bits,
            channel_uses,
            snr_db,
            shots,
            seed,
            iters,
            lr,
            hidden,
            n_show,
            out,
        } => constellation(bits, channel_uses, snr_db, shots, seed, iters, lr, hidden, n_show, out),
        Command::Gradcheck { eps, seed } => gradient_check(eps, 1e-8, seed).map_err(Into::into).map(|reports| {
            for r in reports {
                println!(
                    "k {} n {} {:?}: {} params, max rel err {:.2e}, max abs err {:.2e}",
                    r.k, r.n_ch, r.normalization, r.params, r.max_rel_error, r.max_abs_error
                );
            }
        }),
        Command::ChannelStats { rho, steps, seed } => channel_stats(rho, steps, seed).map_err(Into::into).map(|s| {
            println!(
                "rho {} steps {}: mean power {:.4}, lag-1 correlation {:.4}",
                s.rho, s.steps, s.mean_power, s.lag1_correlation
            );
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
