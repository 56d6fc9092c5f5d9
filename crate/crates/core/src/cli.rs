//! Command-line front end. Exit codes: 0 ok, 2 usage, 3 configuration, 4 runtime.
//! Failures print a single `error[<kind>]: <message>` line on stderr.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::campaign::{
    front_of, load_records, persist_run, run_campaign, CampaignSpec, RunRecord, RESULT_FILE, RUNS_DIR,
};
use crate::config::{schema_help, ConfigFile};
use crate::export::{export, ExportFormat};
use crate::optimizer::{run, Formulation, Problem, RunConfig};
use crate::verify::{rank_correlation, verify_design, VerificationReport};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

pub const VERIFICATION_FILE: &str = "verification.json";

#[derive(Debug, Parser)]
#[command(name = "finger-topo", version, about = "Topology optimization of tapered soft gripper fingers")]
#[command(after_long_help = schema_help())]
pub struct Cli {
    /// error, warn, info, debug or trace
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: log::LevelFilter,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a single optimization and write its run directory.
    #[command(after_long_help = schema_help())]
    Optimize(RunArgs),
    /// Run a multi-start campaign (resumes if the output directory has runs).
    #[command(after_long_help = schema_help())]
    Sweep(RunArgs),
    /// Print the non-dominated runs of a campaign.
    Pareto {
        /// Campaign directory or its runs/ directory
        dir: PathBuf,
    },
    /// Binarize every completed run and compute the verification metrics.
    Verify {
        dir: PathBuf,
        /// Only print the best N rows
        #[arg(long)]
        top: Option<usize>,
    },
    /// Write plot-ready files for a campaign.
    Export {
        dir: PathBuf,
        /// csv, pgm_bundle or front_svg
        #[arg(long)]
        format: String,
        /// Output file (directory for pgm_bundle)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// key=value or section.key=value; wins over the file and the environment
    #[arg(long = "override", short = 'o', value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory (campaign.output_dir)
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads (campaign.parallelism)
    #[arg(long)]
    pub parallelism: Option<usize>,
}

enum Failure {
    Usage(String),
    Config(Error),
    Runtime(Error),
}

impl Failure {
    fn report(&self) -> i32 {
        let (kind, msg, code) = match self {
            Failure::Usage(m) => ("usage", m.clone(), EXIT_USAGE),
            Failure::Config(e) => ("config", e.to_string(), EXIT_CONFIG),
            Failure::Runtime(e) => ("runtime", e.to_string(), EXIT_RUNTIME),
        };
        eprintln!("error[{kind}]: {}", msg.replace('\n', " "));
        code
    }
}

fn runtime(e: Error) -> Failure {
    if e.is_config() {
        Failure::Config(e)
    } else {
        Failure::Runtime(e)
    }
}

/// Parse `args` (including the program name), run the command and return the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return EXIT_OK;
        }
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments");
            return Failure::Usage(line.trim_start_matches("error: ").to_string()).report();
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cli.log_level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => f.report(),
    }
}

fn load_file(args: &RunArgs) -> Result<ConfigFile, Failure> {
    let mut overrides = Vec::new();
    if let Some(dir) = &args.output_dir {
        overrides.push(format!("campaign.output_dir={}", toml_string(&dir.to_string_lossy())));
    }
    if let Some(n) = args.parallelism {
        overrides.push(format!("campaign.parallelism={n}"));
    }
    overrides.extend(args.overrides.iter().cloned());
    ConfigFile::load_with_overrides(args.config.as_deref(), &overrides).map_err(Failure::Config)
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn run_id(config: &RunConfig) -> String {
    match config.formulation {
        Formulation::Passive => format!("vf{}-seed{:04}", config.volume_fraction, config.seed),
        Formulation::Active => format!(
            "xin{}-seed{:04}",
            config.input_displacement.unwrap_or(f64::NAN),
            config.seed
        ),
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Optimize(args) => {
            let file = load_file(&args)?;
            let config = file.run_config().map_err(Failure::Config)?;
            config.validate().map_err(Failure::Config)?;
            let out = file
                .campaign
                .output_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("out"));
            let result = run(&config).map_err(runtime)?;
            let id = run_id(&config);
            fs::create_dir_all(&out).map_err(|e| Failure::Runtime(Error::Io { path: out.clone(), source: e }))?;
            let target = out.join(&id);
            if target.exists() {
                fs::remove_dir_all(&target)
                    .map_err(|e| Failure::Runtime(Error::Io { path: target.clone(), source: e }))?;
            }
            let sweep_value = match config.formulation {
                Formulation::Passive => config.volume_fraction,
                Formulation::Active => config.input_displacement.unwrap_or(f64::NAN),
            };
            let record = RunRecord {
                run_id: id,
                sweep_value,
                result,
            };
            persist_run(&out, &record).map_err(Failure::Runtime)?;
            let last = record.result.last();
            println!(
                "{}\titerations={}\tconverged={}\tphi={:e}\tmean_output_disp_mm={:e}\tstrain_energy_Nmm={:e}\tvolume_fraction={:.6}",
                target.display(),
                record.result.history.len() - 1,
                record.result.converged,
                last.phi,
                last.mean_output_disp,
                last.strain_energy,
                last.volume_fraction
            );
            Ok(())
        }
        Command::Sweep(args) => {
            let file = load_file(&args)?;
            let spec = CampaignSpec::from_file(&file).map_err(Failure::Config)?;
            let summary = run_campaign(&spec).map_err(runtime)?;
            let m = &summary.manifest;
            let failed = m.runs.iter().filter(|r| r.status == crate::campaign::RunStatus::Failed).count();
            println!(
                "{}\truns={}\texecuted={}\tskipped={}\tfailed={}\tfront={}",
                spec.output_dir.display(),
                m.runs.len(),
                summary.executed,
                summary.skipped,
                failed,
                m.front.len()
            );
            Ok(())
        }
        Command::Pareto { dir } => {
            let (records, warnings) = load_records(&dir).map_err(Failure::Runtime)?;
            for w in &warnings {
                eprintln!("warning: skipped {w}");
            }
            if records.is_empty() {
                eprintln!("warning: no completed runs under {}", dir.display());
            }
            let front = front_of(&records);
            println!("run_id\tmean_output_disp_mm\tstrain_energy_Nmm");
            for r in records.iter().filter(|r| front.contains(&r.run_id)) {
                let (d, e) = r.result.coordinates();
                println!("{}\t{d:e}\t{e:e}", r.run_id);
            }
            Ok(())
        }
        Command::Verify { dir, top } => {
            let (records, warnings) = load_records(&dir).map_err(Failure::Runtime)?;
            for w in &warnings {
                eprintln!("warning: skipped {w}");
            }
            let reports = verify_records(&dir, &records).map_err(runtime)?;
            print!("{}", verification_table(&records, &reports, top));
            Ok(())
        }
        Command::Export { dir, format, out } => {
            let format: ExportFormat = format.parse().map_err(Failure::Config)?;
            let report = export(&dir, format, out.as_deref()).map_err(Failure::Runtime)?;
            for w in &report.warnings {
                eprintln!("warning: skipped {w}");
            }
            for f in &report.files {
                println!("{}", f.display());
            }
            Ok(())
        }
    }
}

fn run_dir_of(dir: &Path, run_id: &str) -> PathBuf {
    let nested = dir.join(RUNS_DIR).join(run_id);
    if nested.join(RESULT_FILE).exists() {
        nested
    } else {
        dir.join(run_id)
    }
}

/// Verify each record and store `verification.json` next to its result.
pub fn verify_records(dir: &Path, records: &[RunRecord]) -> crate::Result<Vec<VerificationReport>> {
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let config = &r.result.config;
        let problem = Problem::new(config)?;
        let report = verify_design(&r.run_id, &problem, &r.result.final_rho.0, config.input_displacement)?;
        let path = run_dir_of(dir, &r.run_id).join(VERIFICATION_FILE);
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        fs::write(&path, json).map_err(|e| Error::Io { path, source: e })?;
        out.push(report);
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4e}"))
}

/// Table ranked by tip stiffness, followed by the strain-energy/stiffness rank correlation.
pub fn verification_table(records: &[RunRecord], reports: &[VerificationReport], top: Option<usize>) -> String {
    let mut order: Vec<usize> = (0..reports.len()).collect();
    order.sort_by(|&a, &b| {
        let k = |i: usize| reports[i].tip_stiffness.unwrap_or(f64::NEG_INFINITY);
        k(b).total_cmp(&k(a)).then(reports[a].design_id.cmp(&reports[b].design_id))
    });
    let mut s = String::from(
        "rank\trun_id\tvalid\ttip_stiffness_N_per_mm\tadaptivity\tmax_von_mises_MPa\ttip_free_disp_mm\tvolume_fraction_binary\n",
    );
    for (rank, &i) in order.iter().take(top.unwrap_or(usize::MAX)).enumerate() {
        let r = &reports[i];
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.4}",
            rank + 1,
            r.design_id,
            r.valid,
            opt(r.tip_stiffness),
            opt(r.adaptivity),
            opt(r.max_von_mises),
            opt(r.tip_free_disp),
            r.volume_fraction_binary
        );
    }
    let pairs: Vec<(f64, f64)> = records
        .iter()
        .zip(reports)
        .filter_map(|(rec, rep)| rep.tip_stiffness.map(|k| (rec.result.last().strain_energy, k)))
        .collect();
    let (se, k): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let _ = writeln!(
        s,
        "# strain energy vs tip stiffness rank correlation: {}",
        rank_correlation(&se, &k).map_or_else(|| "undefined".to_string(), |r| format!("{r:.4}"))
    );
    s
}
