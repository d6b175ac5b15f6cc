//! Run configuration: an optional JSON/TOML file merged with command-line
//! flags, flags taking precedence.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Evaluate,
    Sweep,
    Fit,
    Validate,
    Bound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    Roll,
    Branching,
    File,
}

#[derive(Debug, Parser)]
#[command(name = "layerflow", version, about = "Heat transport by designed 2D layer flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Transport and efficiency report for one design
    Evaluate(Flags),
    /// CSV sweep over epsilon or Pe with fitted exponents
    Sweep(Flags),
    /// Fit scaling exponents to an existing sweep CSV
    Fit(Flags),
    /// Run the invariant suite on seeded random flows and designs
    Validate(Flags),
    /// Bound certificates for one design
    Bound(Flags),
}

impl CliCommand {
    pub fn split(self) -> (Command, Flags) {
        match self {
            CliCommand::Evaluate(f) => (Command::Evaluate, f),
            CliCommand::Sweep(f) => (Command::Sweep, f),
            CliCommand::Fit(f) => (Command::Fit, f),
            CliCommand::Validate(f) => (Command::Validate, f),
            CliCommand::Bound(f) => (Command::Bound, f),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON or TOML file with any of the fields below; flags win
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub design: Option<Design>,
    /// Design file (JSON design descriptor or streamfunction) for `--design file`
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Value or log-spaced range `lo..hi`
    #[arg(long, conflicts_with = "pe")]
    pub epsilon: Option<String>,
    /// Value or log-spaced range `lo..hi`; epsilon = Pe^-2
    #[arg(long)]
    pub pe: Option<String>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Period the design parameters are computed for
    #[arg(long)]
    pub lx: Option<f64>,
    #[arg(long)]
    pub modes: Option<usize>,
    #[arg(long)]
    pub nz: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Grid as written in a config file: a range string, a list, or a number.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum GridValue {
    Text(String),
    List(Vec<f64>),
    One(f64),
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    design: Option<Design>,
    input: Option<PathBuf>,
    epsilon: Option<GridValue>,
    pe: Option<GridValue>,
    points: Option<usize>,
    lx: Option<f64>,
    modes: Option<usize>,
    nz: Option<usize>,
    tol: Option<f64>,
    jobs: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Epsilon,
    Pe,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub design: Design,
    pub input: Option<PathBuf>,
    pub grid_kind: GridKind,
    /// strictly increasing
    pub grid: Vec<f64>,
    pub l_x: f64,
    pub modes: Option<usize>,
    pub n_z: Option<usize>,
    pub tol: f64,
    pub jobs: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// `(epsilon, pe)` for every grid point.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.grid
            .iter()
            .map(|&v| match self.grid_kind {
                GridKind::Epsilon => (v, v.powf(-0.5)),
                GridKind::Pe => (v.powi(-2), v),
            })
            .collect()
    }
}

/// Parse `v` or `lo..hi`; ranges are log-spaced with `points` entries.
pub fn parse_grid(text: &str, points: Option<usize>) -> Result<Vec<f64>> {
    let num = |s: &str| -> Result<f64> {
        let v: f64 = s.trim().parse().with_context(|| format!("not a number: {s:?}"))?;
        if !(v > 0.0 && v.is_finite()) {
            bail!("grid values must be positive and finite, got {v}");
        }
        Ok(v)
    };
    if let Some((a, b)) = text.split_once("..") {
        let (lo, hi) = (num(a)?, num(b)?);
        if lo >= hi {
            bail!("range {text:?} must have lo < hi");
        }
        let n = points.unwrap_or(5);
        if n < 2 {
            bail!("a range needs at least 2 points, got {n}");
        }
        let (la, lb) = (lo.ln(), hi.ln());
        Ok((0..n)
            .map(|i| match i {
                0 => lo,
                i if i == n - 1 => hi,
                i => (la + (lb - la) * i as f64 / (n - 1) as f64).exp(),
            })
            .collect())
    } else if text.contains(',') {
        text.split(',').map(num).collect()
    } else {
        Ok(vec![num(text)?])
    }
}

fn read_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    if is_toml {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    } else {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn grid_text(g: &GridValue) -> String {
    match g {
        GridValue::Text(s) => s.clone(),
        GridValue::List(v) => v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(","),
        GridValue::One(x) => format!("{x:e}"),
    }
}

impl RunConfig {
    pub fn resolve(command: Command, flags: Flags) -> Result<RunConfig> {
        let file = match &flags.config {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        let design = flags.design.or(file.design).unwrap_or(Design::Roll);
        let points = flags.points.or(file.points);
        // a grid from the flags replaces both grids from the file
        let (kind, text) = match (&flags.epsilon, &flags.pe) {
            (Some(e), _) => (GridKind::Epsilon, Some(e.clone())),
            (None, Some(p)) => (GridKind::Pe, Some(p.clone())),
            (None, None) => match (&file.epsilon, &file.pe) {
                (Some(_), Some(_)) => bail!("config gives both epsilon and pe"),
                (Some(e), None) => (GridKind::Epsilon, Some(grid_text(e))),
                (None, Some(p)) => (GridKind::Pe, Some(grid_text(p))),
                (None, None) => (GridKind::Epsilon, None),
            },
        };
        let grid = match text {
            Some(t) => parse_grid(&t, points)?,
            None => match command {
                Command::Evaluate | Command::Bound => vec![1e-4],
                Command::Sweep => parse_grid("1e-6..1e-2", points)?,
                Command::Fit | Command::Validate => Vec::new(),
            },
        };
        if matches!(command, Command::Evaluate | Command::Sweep | Command::Bound) && grid.is_empty() {
            bail!("empty grid");
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            bail!("grid must be strictly increasing");
        }
        if matches!(command, Command::Evaluate | Command::Bound) && grid.len() != 1 {
            bail!("{command:?} takes a single epsilon or Pe, got {} values", grid.len());
        }
        let cfg = RunConfig {
            command,
            design,
            input: flags.input.or(file.input),
            grid_kind: kind,
            grid,
            l_x: flags.lx.or(file.lx).unwrap_or(2.0 * PI),
            modes: flags.modes.or(file.modes),
            n_z: flags.nz.or(file.nz),
            tol: flags.tol.or(file.tol).unwrap_or(1e-10),
            jobs: flags.jobs.or(file.jobs).unwrap_or(1),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            out: flags.out.or(file.out),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        if !(self.l_x > 0.0 && self.l_x.is_finite()) {
            bail!("lx must be positive, got {}", self.l_x);
        }
        if !(self.tol > 1e-14 && self.tol < 1e-4) {
            bail!("tol must lie in (1e-14, 1e-4), got {}", self.tol);
        }
        if self.jobs == 0 {
            bail!("jobs must be at least 1");
        }
        if let Some(n) = self.n_z {
            if n < 5 {
                bail!("nz must be at least 5, got {n}");
            }
        }
        if self.design == Design::File && self.input.is_none() && self.command != Command::Validate {
            bail!("--design file needs --input");
        }
        if self.command == Command::Fit && self.input.is_none() {
            bail!("fit needs --input with a sweep CSV");
        }
        if self.grid_kind == GridKind::Epsilon && self.grid.iter().any(|&e| e >= 1.0) {
            bail!("epsilon must lie in (0, 1)");
        }
        Ok(())
    }
}
