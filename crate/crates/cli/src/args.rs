//! Command line. Short flags follow the usual script conventions and
//! override values from the configuration file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_time, Compartment, Diffusivity, MeshSource, RunConfig, TimeValue};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "btfem", version, about = "Bloch-Torrey finite-element diffusion MRI simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the finite-element simulation described by a configuration file.
    Run(RunArgs),
    /// Evaluate the 1D finite-difference reference on an interval configuration.
    Oracle {
        #[command(flatten)]
        run: RunArgs,
        /// Number of grid cells over the interval.
        #[arg(long, default_value_t = 2000)]
        grid: usize,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON configuration.
    pub config: PathBuf,
    /// Mesh file; `.msh` is read as Gmsh, anything else as the native format.
    #[arg(short = 'f', long = "mesh")]
    pub mesh: Option<PathBuf>,
    /// Multi-compartment switch (0 or 1), checked against the compartment table.
    #[arg(short = 'M', value_parser = clap::value_parser!(u8).range(0..=1))]
    pub multi: Option<u8>,
    /// b-values in s/mm² (replaces the configured gradient list).
    #[arg(short = 'b', num_args = 1.., value_delimiter = ',')]
    pub b: Option<Vec<f64>>,
    /// Pulse duration δ (µs, or with an s/ms/us suffix).
    #[arg(short = 'd', value_parser = parse_time_arg)]
    pub delta: Option<f64>,
    /// Pulse separation Δ (µs, or with an s/ms/us suffix).
    #[arg(short = 'D', value_parser = parse_time_arg)]
    pub big_delta: Option<f64>,
    /// Time step (µs, or with an s/ms/us suffix).
    #[arg(short = 'k', long = "dt", value_parser = parse_time_arg)]
    pub dt: Option<f64>,
    /// Interface permeability in m/s.
    #[arg(short = 'p')]
    pub kappa: Option<f64>,
    /// Isotropic diffusivity in mm²/s applied to every compartment.
    #[arg(short = 'K')]
    pub diffusivity: Option<f64>,
    /// Gradient direction; also accepted as `-gdir x y z`.
    #[arg(long = "gdir", num_args = 3, allow_negative_numbers = true)]
    pub gdir: Option<Vec<f64>>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// CSV output path.
    #[arg(short = 'o', long = "csv")]
    pub csv: Option<PathBuf>,
    /// SVG plot path.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Logarithmic attenuation axis in the plot.
    #[arg(long)]
    pub log_y: bool,
    /// Worker threads for the b-value fan-out.
    #[arg(long)]
    pub threads: Option<usize>,
}

fn parse_time_arg(s: &str) -> Result<f64, String> {
    parse_time(s).map_err(|e| e.to_string())
}

/// Rewrites the single-dash long flag `-gdir` into `--gdir`.
pub fn normalize_args<I, S>(args: I) -> Vec<String>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    args.into_iter().map(Into::into).map(|a| if a == "-gdir" { "--gdir".to_string() } else { a }).collect()
}

impl RunArgs {
    /// Applies the flag overrides and re-validates.
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<(), CliError> {
        if let Some(path) = &self.mesh {
            let is_msh = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("msh"));
            cfg.mesh =
                if is_msh { MeshSource::Msh { path: path.clone() } } else { MeshSource::Native { path: path.clone() } };
        }
        if let Some(b) = &self.b {
            cfg.gradient.b_list = Some(b.clone());
            cfg.gradient.g_list = None;
        }
        if let Some(d) = self.delta {
            cfg.sequence.set_delta(TimeValue::Micros(d));
        }
        if let Some(d) = self.big_delta {
            cfg.sequence.set_big_delta(TimeValue::Micros(d));
        }
        if let Some(dt) = self.dt {
            cfg.time.dt = TimeValue::Micros(dt);
        }
        if let Some(k) = self.kappa {
            cfg.kappa = k;
        }
        if let Some(d) = self.diffusivity {
            for c in cfg.compartments.values_mut() {
                *c = Compartment { diffusivity: Diffusivity::Scalar(d), ..c.clone() };
            }
        }
        if let Some(g) = &self.gdir {
            cfg.gradient.direction = [g[0], g[1], g[2]];
        }
        if let Some(t) = self.theta {
            cfg.time.theta = t;
        }
        if let Some(p) = &self.csv {
            cfg.output.csv = Some(p.clone());
        }
        if let Some(p) = &self.svg {
            cfg.output.svg = Some(p.clone());
        }
        if self.log_y {
            cfg.output.log_y = true;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        cfg.validate()
    }
}
