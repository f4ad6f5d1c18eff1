use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use log::{error, warn};

use rehazy::config::{parse_airlight, Config, ProfileOverrides};
use rehazy::dcp::DcpOptions;
use rehazy::depth::Normalization;
use rehazy::pipeline::{
    run_dcp_dehaze, run_metrics, run_rehazy, run_synth, BatchOutcome, RehazyOptions, SynthOptions,
};
use rehazy::verify::{run_verify, VerifyMode, VerifyOptions};
use rehazy::{Error, SceneKind};

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "rehazy", version, about = "Haze synthesis, rehazy pair generation and dehazing metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Scene profile supplying default sampling ranges.
    #[arg(long)]
    profile: Option<SceneKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    beta_min: Option<f64>,
    #[arg(long)]
    beta_max: Option<f64>,
    #[arg(long)]
    a_min: Option<f64>,
    #[arg(long)]
    a_max: Option<f64>,
    #[arg(long)]
    delta_beta_min: Option<f64>,
    #[arg(long)]
    delta_beta_max: Option<f64>,
    /// Worker threads; outputs do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// key=value file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DepthArgs {
    /// minmax | inverse | fixed:LO,HI (a sidecar JSON overrides this per file).
    #[arg(long)]
    depth_norm: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize hazy images from clean images and depth maps.
    Synth {
        clean_dir: PathBuf,
        depth_dir: PathBuf,
        out_dir: PathBuf,
        /// Hazy images per clean image.
        #[arg(long)]
        count: Option<usize>,
        /// Also write half and quarter resolution clean targets.
        #[arg(long)]
        multiscale: bool,
        #[command(flatten)]
        depth: DepthArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Generate rehazy images from hazy images and depth maps.
    Rehazy {
        hazy_dir: PathBuf,
        depth_dir: PathBuf,
        out_dir: PathBuf,
        #[arg(long)]
        n_rehazy: Option<usize>,
        /// Fixed airlight r,g,b instead of the DCP estimate.
        #[arg(long)]
        airlight: Option<String>,
        /// Fixed delta-beta for every output instead of sampling.
        #[arg(long)]
        delta_beta: Option<f64>,
        #[arg(long)]
        patch: Option<usize>,
        #[arg(long)]
        top_fraction: Option<f64>,
        #[command(flatten)]
        depth: DepthArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Check the rehazy identities on synthetic scenes.
    Verify {
        /// composition | semigroup | roundtrip
        mode: VerifyMode,
        /// Scenes, or pixel trials for semigroup.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        beta0: Option<f64>,
        #[arg(long)]
        delta_beta: Option<f64>,
        /// Write the JSON report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// PSNR, SSIM, CIEDE2000 and L1 between same-named images.
    Metrics {
        dir_a: PathBuf,
        dir_b: PathBuf,
        /// Print JSON instead of the table.
        #[arg(long)]
        json: bool,
        /// Write the JSON report to this path.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Dark channel prior dehazing baseline.
    DcpDehaze {
        hazy_dir: PathBuf,
        out_dir: PathBuf,
        #[arg(long)]
        patch: Option<usize>,
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long)]
        top_fraction: Option<f64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Flag values merged over the config file.
struct Resolved {
    config: Config,
    profile: rehazy::SceneProfile,
    seed: u64,
    workers: usize,
}

impl Common {
    fn resolve(&self) -> Result<Resolved, Error> {
        let config = load_config(self.config.as_deref())?;
        let flags = ProfileOverrides {
            kind: self.profile,
            beta_min: self.beta_min,
            beta_max: self.beta_max,
            a_min: self.a_min,
            a_max: self.a_max,
            delta_beta_min: self.delta_beta_min,
            delta_beta_max: self.delta_beta_max,
        };
        let profile = flags.or(ProfileOverrides::from_config(&config)?).resolve()?;
        let seed = pick(self.seed, &config, "seed")?.unwrap_or(0);
        let workers = pick(self.workers, &config, "workers")?.unwrap_or(1);
        Ok(Resolved {
            config,
            profile,
            seed,
            workers,
        })
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Error> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn pick<T: FromStr>(flag: Option<T>, config: &Config, key: &str) -> Result<Option<T>, Error> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => config.get(key),
    }
}

fn parse_depth_norm(s: &str) -> Result<Normalization, Error> {
    match s {
        "minmax" => Ok(Normalization::MinMax),
        "inverse" => Ok(Normalization::InverseThenMinMax),
        other => {
            let range = other
                .strip_prefix("fixed:")
                .and_then(|r| r.split_once(','))
                .and_then(|(lo, hi)| Some((lo.trim().parse().ok()?, hi.trim().parse().ok()?)));
            match range {
                Some((lo, hi)) => Ok(Normalization::FixedRange { lo, hi }),
                None => Err(Error::InvalidParameter(format!(
                    "depth normalization '{other}' is not minmax, inverse or fixed:LO,HI"
                ))),
            }
        }
    }
}

fn depth_norm(args: &DepthArgs, config: &Config) -> Result<Normalization, Error> {
    match pick(args.depth_norm.clone(), config, "depth-norm")? {
        Some(s) => parse_depth_norm(&s),
        None => Ok(Normalization::MinMax),
    }
}

fn dcp_options(
    patch: Option<usize>,
    omega: Option<f64>,
    top_fraction: Option<f64>,
    config: &Config,
) -> Result<DcpOptions, Error> {
    let d = DcpOptions::default();
    Ok(DcpOptions {
        patch: pick(patch, config, "patch")?.unwrap_or(d.patch),
        omega: pick(omega, config, "omega")?.unwrap_or(d.omega),
        top_fraction: pick(top_fraction, config, "top-fraction")?.unwrap_or(d.top_fraction),
    })
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize")
}

fn write_report(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, format!("{text}\n")).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn batch_exit(outcome: &BatchOutcome) -> u8 {
    println!(
        "{} entries, {} skipped; manifest at {}",
        outcome.manifest.entries.len(),
        outcome.skipped.len(),
        outcome.manifest_path.display()
    );
    if outcome.all_skipped() {
        error!("every input was skipped");
        EXIT_USAGE
    } else {
        0
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Synth {
            clean_dir,
            depth_dir,
            out_dir,
            count,
            multiscale,
            depth,
            common,
        } => {
            let r = common.resolve()?;
            let opts = SynthOptions {
                clean_dir,
                depth_dir,
                out_dir,
                profile: r.profile,
                seed: r.seed,
                count: pick(count, &r.config, "count")?.unwrap_or(1),
                workers: r.workers,
                depth_norm: depth_norm(&depth, &r.config)?,
                multiscale: multiscale || pick(None, &r.config, "multiscale")?.unwrap_or(false),
            };
            Ok(batch_exit(&run_synth(&opts)?))
        }
        Command::Rehazy {
            hazy_dir,
            depth_dir,
            out_dir,
            n_rehazy,
            airlight,
            delta_beta,
            patch,
            top_fraction,
            depth,
            common,
        } => {
            let r = common.resolve()?;
            let airlight = match pick(airlight, &r.config, "airlight")? {
                Some(s) => Some(parse_airlight(&s)?),
                None => None,
            };
            let opts = RehazyOptions {
                hazy_dir,
                depth_dir,
                out_dir,
                profile: r.profile,
                seed: r.seed,
                n_rehazy: pick(n_rehazy, &r.config, "n-rehazy")?.unwrap_or(1),
                airlight,
                delta_beta: pick(delta_beta, &r.config, "delta-beta")?,
                dcp: dcp_options(patch, None, top_fraction, &r.config)?,
                workers: r.workers,
                depth_norm: depth_norm(&depth, &r.config)?,
            };
            Ok(batch_exit(&run_rehazy(&opts)?))
        }
        Command::Verify {
            mode,
            count,
            size,
            beta0,
            delta_beta,
            out,
            common,
        } => {
            let r = common.resolve()?;
            let mut opts = VerifyOptions::new(mode);
            opts.seed = r.seed;
            opts.profile = r.profile;
            opts.count = pick(count, &r.config, "count")?.unwrap_or(opts.count);
            opts.size = pick(size, &r.config, "size")?.unwrap_or(opts.size);
            opts.beta0 = pick(beta0, &r.config, "beta0")?;
            opts.delta_beta = pick(delta_beta, &r.config, "delta-beta")?;
            let report = run_verify(&opts)?;
            let text = to_json(&report);
            println!("{text}");
            if let Some(path) = out {
                write_report(&path, &text)?;
            }
            for check in report.checks.iter().filter(|c| !c.passed) {
                error!(
                    "{}: max error {:e} exceeds tolerance {:e}",
                    check.name, check.max_error, check.tolerance
                );
            }
            Ok(if report.passed { 0 } else { EXIT_VERIFY_FAILED })
        }
        Command::Metrics {
            dir_a,
            dir_b,
            json,
            report,
            workers,
        } => {
            let result = run_metrics(&dir_a, &dir_b, workers.unwrap_or(1))?;
            let text = to_json(&result);
            if json {
                println!("{text}");
            } else {
                print!("{}", result.table());
            }
            if let Some(path) = report {
                write_report(&path, &text)?;
            }
            if !result.unmatched.is_empty() {
                warn!("{} unmatched file(s)", result.unmatched.len());
                return Ok(EXIT_USAGE);
            }
            Ok(0)
        }
        Command::DcpDehaze {
            hazy_dir,
            out_dir,
            patch,
            omega,
            top_fraction,
            workers,
            config,
        } => {
            let config = load_config(config.as_deref())?;
            let opts = dcp_options(patch, omega, top_fraction, &config)?;
            let workers = pick(workers, &config, "workers")?.unwrap_or(1);
            let report = run_dcp_dehaze(&hazy_dir, &out_dir, &opts, workers)?;
            println!("{} image(s) written to {}", report.entries.len(), out_dir.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
