//! Command-line front end: one subcommand per figure, a single-run mode
//! driven by a JSON config, and manifest replay.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::filter::{bracket, chi_spectral, filter_over_z2, Sequence};
use crate::analytics::quadrature::QuadratureError;
use crate::ensemble::{
    default_beta_grid, default_theta_grid, format_float, linear_grid, log_grid, run_ensemble,
    sweep_beta, sweep_theta, write_results_csv, ConfigError, EnsembleError, EnsembleResult,
    ExperimentConfig, Table, ETA_PER_BETA,
};
use crate::noise::NoiseModel;
use crate::propagator::{Integrator, NoiseAxis};
use crate::schedule::{Scheme, Scheme1Base};

/// Schemes shown in the θ and β figures.
pub const FIGURE_SCHEMES: [Scheme; 4] = [
    Scheme::Fid { m: 2 },
    Scheme::Cpmg,
    Scheme::Scheme1(Scheme1Base::Cpmg),
    Scheme::Scheme2,
];

pub const FIG5_THETA: f64 = 5.0 * PI / 12.0;
const DEFAULT_Z_MAX: f64 = 60.0;
const DEFAULT_Z_POINTS: usize = 600;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("invalid grid '{0}': expected comma-separated numbers or lo:hi:n")]
    Grid(String),
    #[error("invalid filter table: {0}")]
    Filters(String),
    #[error("`single` needs --config or --scheme")]
    MissingScheme,
}

#[derive(Debug, Parser)]
#[command(
    name = "berrydd",
    version,
    about = "Geometric dephasing under dynamical decoupling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Phase and coherence versus cone angle for the four figure sequences.
    Fig4 {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated angles in radians, or lo:hi:n for an even grid.
        #[arg(long)]
        theta_grid: Option<String>,
    },
    /// Phase and coherence versus noise bandwidth at θ = 5π/12, η = 400β.
    Fig5 {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated β values, or lo:hi:n for a log-spaced grid.
        #[arg(long)]
        beta_grid: Option<String>,
    },
    /// Filter functions F(z)/z² and χ(β) tables for FID, SE and CPMG.
    Filters {
        #[arg(long, default_value_t = DEFAULT_Z_MAX)]
        z_max: f64,
        #[arg(long, default_value_t = DEFAULT_Z_POINTS)]
        z_points: usize,
        /// Comma-separated β values, or lo:hi:n for a log-spaced grid.
        #[arg(long)]
        beta_grid: Option<String>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// One ensemble from a JSON config and/or flags.
    Single {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        scheme: Option<Scheme>,
    },
    /// Re-run a manifest written by an earlier run.
    Replay {
        manifest: PathBuf,
        /// Defaults to the manifest's directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON experiment config used as the base; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub realizations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dt_divisor: Option<u32>,
    #[arg(long)]
    pub noise_axis: Option<NoiseAxis>,
    #[arg(long)]
    pub integrator: Option<Integrator>,
    /// Worker threads for the ensemble; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

impl CommonArgs {
    /// Base config from `--config` (or figure defaults) with flags applied.
    /// Without an explicit η or config file, η follows β as 400β.
    pub fn resolve(
        &self,
        scheme: Option<Scheme>,
        theta: f64,
    ) -> Result<ExperimentConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::from_json(&read(path)?)?,
            None => ExperimentConfig::new(scheme.unwrap_or(Scheme::Cpmg), theta),
        };
        if let Some(s) = scheme {
            c.scheme = s;
        }
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { c.$field = v; } )* };
        }
        set!(
            theta,
            beta,
            eta,
            kappa,
            realizations,
            seed,
            dt_divisor,
            noise_axis,
            integrator
        );
        if self.workers.is_some() {
            c.workers = self.workers;
        }
        if self.config.is_none() && self.eta.is_none() {
            c.eta = ETA_PER_BETA * c.beta;
        }
        for w in c.validate()? {
            log::warn!("{w}");
        }
        Ok(c)
    }
}

/// What a run did, enough to repeat it exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Experiment {
    Fig4 {
        base: ExperimentConfig,
        schemes: Vec<Scheme>,
        thetas: Vec<f64>,
    },
    Fig5 {
        base: ExperimentConfig,
        schemes: Vec<Scheme>,
        betas: Vec<f64>,
    },
    Filters {
        z_max: f64,
        z_points: usize,
        betas: Vec<f64>,
    },
    Single {
        config: ExperimentConfig,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Fig4 { .. } => "fig4",
            Experiment::Fig5 { .. } => "fig5",
            Experiment::Filters { .. } => "filters",
            Experiment::Single { .. } => "single",
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Experiment::Fig4 { base, .. } | Experiment::Fig5 { base, .. } => Some(base.seed),
            Experiment::Single { config } => Some(config.seed),
            Experiment::Filters { .. } => None,
        }
    }

    fn assumptions(&self) -> Vec<String> {
        let mut notes = Vec::new();
        if let Experiment::Fig5 { .. } = self {
            notes.push(format!("eta = {ETA_PER_BETA} * beta at every grid point"));
        }
        if let Experiment::Fig4 { base, .. } | Experiment::Fig5 { base, .. } = self {
            notes.push(format!(
                "theta_c solved exactly for each theta_a at kappa = {}",
                base.kappa
            ));
        }
        notes
    }

    /// Writes every output file into `dir` and returns their names.
    pub fn execute(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let notes = self.assumptions();
        match self {
            Experiment::Fig4 {
                base,
                schemes,
                thetas,
            } => {
                let results = sweep_theta(base, schemes, thetas)?;
                write_tables(dir, "fig4", &results, &notes)
            }
            Experiment::Fig5 {
                base,
                schemes,
                betas,
            } => {
                let results = sweep_beta(base, schemes, betas)?;
                write_tables(dir, "fig5", &results, &notes)
            }
            Experiment::Filters {
                z_max,
                z_points,
                betas,
            } => {
                let fz = dir.join("filters_fz2.csv");
                write_filter_table(&fz, *z_max, *z_points)?;
                let chi = dir.join("filters_chi.csv");
                write_chi_table(&chi, betas)?;
                Ok(vec![name_of(&fz), name_of(&chi)])
            }
            Experiment::Single { config } => {
                let result = run_ensemble(config)?;
                let path = dir.join("single.csv");
                write_csv(&path, &[result], Table::Full, &notes)?;
                Ok(vec![name_of(&path)])
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub experiment: Experiment,
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch. Kept out of the CSV files.
    pub created_unix: u64,
    /// Output file names relative to the manifest's directory.
    pub outputs: Vec<PathBuf>,
    pub assumptions: Vec<String>,
}

impl RunManifest {
    pub fn new(experiment: Experiment, outputs: Vec<PathBuf>) -> Self {
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: experiment.seed(),
            assumptions: experiment.assumptions(),
            experiment,
            created_unix,
            outputs,
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}_manifest.json", self.experiment.name())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(self.file_name());
        let text = serde_json::to_string_pretty(self).map_err(|source| CliError::Json {
            path: path.clone(),
            source,
        })?;
        fs::write(&path, text + "\n").map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        serde_json::from_str(&read(path)?).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn name_of(path: &Path) -> PathBuf {
    path.file_name()
        .map(PathBuf::from)
        .unwrap_or_else(|| path.to_path_buf())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn write_csv(
    path: &Path,
    results: &[EnsembleResult],
    table: Table,
    notes: &[String],
) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = create(path)?;
    for n in notes {
        writeln!(out, "# note: {n}").map_err(io)?;
    }
    write_results_csv(results, table, &mut out).map_err(|source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    out.flush().map_err(io)
}

fn write_tables(
    dir: &Path,
    stem: &str,
    results: &[EnsembleResult],
    notes: &[String],
) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for (suffix, table) in [
        ("full", Table::Full),
        ("phase", Table::Phase),
        ("W", Table::Coherence),
    ] {
        let path = dir.join(format!("{stem}_{suffix}.csv"));
        write_csv(&path, results, table, notes)?;
        written.push(name_of(&path));
    }
    Ok(written)
}

/// F(z)/z² for each sequence on an even grid over (0, z_max].
pub fn write_filter_table(path: &Path, z_max: f64, points: usize) -> Result<(), CliError> {
    if !(z_max > 0.0) || points == 0 {
        return Err(CliError::Filters(format!(
            "z_max = {z_max}, points = {points}"
        )));
    }
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut out = create(path)?;
    writeln!(
        out,
        "# z: dimensionless; angular frequency times total time"
    )
    .and_then(|_| {
        writeln!(
            out,
            "# fid, se, cpmg2: F(z)/z^2 with F = z^2/2 * |FT of the switching function|^2"
        )
    })
    .map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["z", "fid", "se", "cpmg2"])
        .map_err(csv_err)?;
    for i in 1..=points {
        let z = z_max * i as f64 / points as f64;
        let mut row = vec![format_float(z)];
        row.extend(
            Sequence::ALL
                .iter()
                .map(|&s| format_float(filter_over_z2(s, z))),
        );
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// χ/(αT²/2) per sequence: time-domain closed form, frequency-domain
/// quadrature and the low-frequency limit.
pub fn write_chi_table(path: &Path, betas: &[f64]) -> Result<(), CliError> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut out = create(path)?;
    writeln!(out, "# beta: dimensionless; noise bandwidth times total time")
        .and_then(|_| writeln!(out, "# *_closed: chi/(alpha T^2/2) from the time-domain double integral of the OU correlation"))
        .and_then(|_| writeln!(out, "# *_spectral: same from the Lorentzian spectrum weighted by F(z)/z^2"))
        .and_then(|_| writeln!(out, "# *_low_freq: small-beta limit 1, beta/6, beta/24"))
        .map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["beta".to_string()];
    for s in Sequence::ALL {
        for kind in ["closed", "spectral", "low_freq"] {
            header.push(format!("{s}_{kind}"));
        }
    }
    w.write_record(&header).map_err(csv_err)?;
    let total_time = 1.0;
    for &beta in betas {
        if !(beta > 0.0) {
            return Err(CliError::Filters(format!("beta = {beta}")));
        }
        let alpha = 1.0;
        let noise = NoiseModel::new(alpha, beta / total_time)
            .map_err(|e| CliError::Filters(e.to_string()))?;
        let unit = alpha * total_time * total_time / 2.0;
        let mut row = vec![format_float(beta)];
        for s in Sequence::ALL {
            row.push(format_float(bracket(s, beta) / (beta * beta) / unit));
            row.push(format_float(chi_spectral(s, &noise, total_time)? / unit));
            row.push(format_float(s.low_frequency_factor(beta)));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses "a,b,c" or "lo:hi:n"; ranges are even, or log-spaced if `log`.
pub fn parse_grid(text: &str, log: bool) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Grid(text.to_string());
    let parts: Vec<&str> = text.split(':').collect();
    let grid = match parts.as_slice() {
        [lo, hi, n] => {
            let (lo, hi): (f64, f64) = (
                lo.trim().parse().map_err(|_| bad())?,
                hi.trim().parse().map_err(|_| bad())?,
            );
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            if log && !(lo > 0.0 && hi > 0.0) {
                return Err(bad());
            }
            if log {
                log_grid(lo, hi, n)
            } else {
                linear_grid(lo, hi, n)
            }
        }
        [_] => text
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?,
        _ => return Err(bad()),
    };
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(grid)
}

/// Builds the experiment a parsed command line describes.
pub fn experiment(command: &Command) -> Result<(Experiment, PathBuf), CliError> {
    Ok(match command {
        Command::Fig4 { common, theta_grid } => {
            let base = common.resolve(Some(FIGURE_SCHEMES[0]), FIG5_THETA)?;
            let thetas = match theta_grid {
                Some(g) => parse_grid(g, false)?,
                None => default_theta_grid(),
            };
            (
                Experiment::Fig4 {
                    base,
                    schemes: FIGURE_SCHEMES.to_vec(),
                    thetas,
                },
                common.out_dir.clone(),
            )
        }
        Command::Fig5 { common, beta_grid } => {
            let base = common.resolve(Some(FIGURE_SCHEMES[0]), FIG5_THETA)?;
            let betas = match beta_grid {
                Some(g) => parse_grid(g, true)?,
                None => default_beta_grid(),
            };
            (
                Experiment::Fig5 {
                    base,
                    schemes: FIGURE_SCHEMES.to_vec(),
                    betas,
                },
                common.out_dir.clone(),
            )
        }
        Command::Filters {
            z_max,
            z_points,
            beta_grid,
            out_dir,
        } => {
            let betas = match beta_grid {
                Some(g) => parse_grid(g, true)?,
                None => log_grid(1e-3, 10.0, 13),
            };
            (
                Experiment::Filters {
                    z_max: *z_max,
                    z_points: *z_points,
                    betas,
                },
                out_dir.clone(),
            )
        }
        Command::Single { common, scheme } => {
            if common.config.is_none() && scheme.is_none() {
                return Err(CliError::MissingScheme);
            }
            let config = common.resolve(*scheme, FIG5_THETA)?;
            (Experiment::Single { config }, common.out_dir.clone())
        }
        Command::Replay { .. } => unreachable!("replay is handled by run"),
    })
}

/// Executes a command and returns the paths it wrote.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    if let Command::Replay { manifest, out_dir } = &cli.command {
        let loaded = RunManifest::load(manifest)?;
        let dir = match out_dir {
            Some(d) => d.clone(),
            None => manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        let outputs = loaded.experiment.execute(&dir)?;
        return Ok(outputs.into_iter().map(|o| dir.join(o)).collect());
    }
    let (experiment, dir) = experiment(&cli.command)?;
    let outputs = experiment.execute(&dir)?;
    let mut written: Vec<PathBuf> = outputs.iter().map(|o| dir.join(o)).collect();
    written.push(RunManifest::new(experiment, outputs).write(&dir)?);
    Ok(written)
}

/// Entry point for the binary: parses arguments, runs, reports.
pub fn main_with_args<I, T>(args: I) -> std::process::ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                std::process::ExitCode::from(2)
            } else {
                std::process::ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            std::process::ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("berrydd").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn grids_parse() {
        assert_eq!(
            parse_grid("0.1, 0.2,0.3", false).unwrap(),
            vec![0.1, 0.2, 0.3]
        );
        assert_eq!(parse_grid("0:1:3", false).unwrap(), vec![0.0, 0.5, 1.0]);
        let g = parse_grid("0.01:1:3", true).unwrap();
        assert!((g[1] - 0.1).abs() < 1e-15);
        assert!(parse_grid("a,b", false).is_err());
        assert!(parse_grid("0:1:3", true).is_err());
        assert!(parse_grid("1:2", false).is_err());
    }

    #[test]
    fn flags_override_defaults() {
        let cli = parse(&[
            "fig4",
            "--beta",
            "0.01",
            "--realizations",
            "7",
            "--noise-axis",
            "transverse",
        ]);
        let (exp, _) = experiment(&cli.command).unwrap();
        let Experiment::Fig4 {
            base,
            thetas,
            schemes,
        } = exp
        else {
            panic!()
        };
        assert_eq!(base.realizations, 7);
        assert_eq!(base.noise_axis, NoiseAxis::Transverse);
        assert!((base.eta - 4.0).abs() < 1e-12);
        assert_eq!(thetas.len(), 13);
        assert_eq!(schemes.len(), 4);
    }

    #[test]
    fn single_needs_a_scheme() {
        let cli = parse(&["single", "--theta", "1.0"]);
        assert!(matches!(
            experiment(&cli.command),
            Err(CliError::MissingScheme)
        ));
        let cli = parse(&[
            "single", "--scheme", "scheme2", "--theta", "1.0", "--eta", "0.2",
        ]);
        let (Experiment::Single { config }, _) = experiment(&cli.command).unwrap() else {
            panic!()
        };
        assert_eq!(config.scheme, Scheme::Scheme2);
        assert_eq!(config.eta, 0.2);
    }

    #[test]
    fn validation_errors_name_the_field() {
        let cli = parse(&["single", "--scheme", "cpmg", "--kappa", "0.5"]);
        let err = experiment(&cli.command).unwrap_err().to_string();
        assert!(err.contains("kappa"), "{err}");
        assert!(Cli::try_parse_from(["berrydd", "single", "--scheme", "bogus"]).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let exp = Experiment::Fig4 {
            base: ExperimentConfig::new(Scheme::Cpmg, 1.0),
            schemes: FIGURE_SCHEMES.to_vec(),
            thetas: default_theta_grid(),
        };
        let m = RunManifest::new(exp, vec![PathBuf::from("fig4_full.csv")]);
        let dir = tempfile::tempdir().unwrap();
        let path = m.write(dir.path()).unwrap();
        assert_eq!(RunManifest::load(&path).unwrap(), m);
        assert_eq!(m.seed, Some(0));
    }

    #[test]
    fn filters_tables() {
        let dir = tempfile::tempdir().unwrap();
        let exp = Experiment::Filters {
            z_max: 20.0,
            z_points: 40,
            betas: vec![0.01, 1.0],
        };
        let out = exp.execute(dir.path()).unwrap();
        assert_eq!(out.len(), 2);
        let text = fs::read_to_string(dir.path().join("filters_chi.csv")).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].starts_with("beta,fid_closed,fid_spectral,fid_low_freq,se_closed"));
        let first: Vec<f64> = rows[1].split(',').map(|v| v.parse().unwrap()).collect();
        assert!((first[1] - first[2]).abs() < 1e-6 * first[1]);
        assert!((first[1] - 1.0).abs() < 0.01);
    }

    #[test]
    fn figure_schemes_use_cpmg_variant() {
        assert_eq!(FIGURE_SCHEMES[2].to_string(), "scheme1-cpmg");
    }
}
