use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Parses a decimal or a simple rational such as `1/3`.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let value = match s.split_once('/') {
        Some((a, b)) => {
            let num: f64 = a
                .trim()
                .parse()
                .map_err(|_| format!("bad numerator in {s:?}"))?;
            let den: f64 = b
                .trim()
                .parse()
                .map_err(|_| format!("bad denominator in {s:?}"))?;
            if den == 0.0 {
                return Err(format!("zero denominator in {s:?}"));
            }
            num / den
        }
        None => s.parse().map_err(|_| format!("not a number: {s:?}"))?,
    };
    if !value.is_finite() {
        return Err(format!("{s:?} is not finite"));
    }
    Ok(value)
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v = parse_real(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn parse_eps(s: &str) -> Result<f64, String> {
    let v = parse_real(s)?;
    if v > 0.0 && v < 0.5 {
        Ok(v)
    } else {
        Err(format!("must lie in (0, 1/2), got {v}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StartArg {
    Plus,
    Minus,
    Sum(i64),
}

fn parse_start(s: &str) -> Result<StartArg, String> {
    match s {
        "plus" => Ok(StartArg::Plus),
        "minus" => Ok(StartArg::Minus),
        _ => s
            .strip_prefix("sum:")
            .and_then(|k| k.parse().ok())
            .map(StartArg::Sum)
            .ok_or_else(|| format!("expected plus, minus or sum:<k>, got {s:?}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Exact,
    Montecarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    /// Curie-Weiss weights of the sum
    CurieWeiss,
    /// reversible law of the magnetization kernel
    Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Reference {
    None,
    Nlogn,
    N32,
}

#[derive(Debug, Parser)]
#[command(
    name = "cwglauber",
    version,
    about = "p-spin Curie-Weiss Glauber dynamics toolkit"
)]
pub struct Cli {
    /// Worker threads for parallel sweeps
    #[arg(long, global = true, env = "CWGLAUBER_JOBS", value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,

    /// Output file (standard output when absent)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Output format; report commands default to json, tabular ones to csv
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutFormat>,

    /// Shorthand for --format json
    #[arg(long, global = true, conflicts_with = "format")]
    pub json: bool,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn format(&self) -> OutFormat {
        if self.json {
            return OutFormat::Json;
        }
        self.format.unwrap_or(match self.command {
            Command::Classify { .. }
            | Command::Mix { .. }
            | Command::RestrictedMix { .. }
            | Command::Sample { .. } => OutFormat::Json,
            _ => OutFormat::Csv,
        })
    }
}

#[derive(Debug, Clone, Copy, Args)]
pub struct ModelArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
    pub p: u32,
    #[arg(long, value_parser = parse_positive)]
    pub beta: f64,
    #[arg(long, value_parser = parse_real, allow_hyphen_values = true)]
    pub h: f64,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct MixArgs {
    #[arg(long, default_value = "0.35", value_parser = parse_eps)]
    pub eps: f64,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub cap: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Region of (beta, h) and the stationary points of H
    Classify {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Boundary curves U, L, C over a beta range
    Curves {
        #[arg(long, value_parser = clap::value_parser!(u32).range(3..))]
        p: u32,
        #[arg(long, default_value = "0.01", value_parser = parse_positive)]
        beta_min: f64,
        #[arg(long, default_value = "1.2", value_parser = parse_positive)]
        beta_max: f64,
        #[arg(long, default_value = "0.005", value_parser = parse_positive)]
        beta_step: f64,
    },
    /// Classified (beta, h) grid plus the curves, written into a directory
    PhaseDiagram {
        #[arg(long, value_parser = clap::value_parser!(u32).range(3..))]
        p: u32,
        #[arg(long, default_value = "0.01", value_parser = parse_positive)]
        beta_min: f64,
        #[arg(long, default_value = "1.2", value_parser = parse_positive)]
        beta_max: f64,
        #[arg(long, default_value = "0.005", value_parser = parse_positive)]
        beta_step: f64,
        #[arg(long, default_value = "-1", value_parser = parse_real, allow_hyphen_values = true)]
        h_min: f64,
        #[arg(long, default_value = "1", value_parser = parse_real, allow_hyphen_values = true)]
        h_max: f64,
        #[arg(long, default_value = "0.005", value_parser = parse_positive)]
        h_step: f64,
        #[arg(long, default_value_t = 4_000_000)]
        max_cells: usize,
        /// Directory receiving grid.csv, curves.csv and phase.svg
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Mixing time from the extreme starts
    Mix {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[command(flatten)]
        mix: MixArgs,
        #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
        method: MethodArg,
        #[arg(long, value_enum, default_value_t = TargetArg::CurieWeiss)]
        target: TargetArg,
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
        replicas: u64,
    },
    /// Mixing times over several N, with an exponent fit
    MixSweep {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated sizes
        #[arg(long, required = true, value_delimiter = ',', value_parser = clap::value_parser!(u64).range(1..))]
        ns: Vec<u64>,
        #[command(flatten)]
        mix: MixArgs,
        #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
        method: MethodArg,
        #[arg(long, value_enum, default_value_t = TargetArg::CurieWeiss)]
        target: TargetArg,
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
        replicas: u64,
        /// Reference curve drawn in SVG output
        #[arg(long, value_enum, default_value_t = Reference::None)]
        reference: Reference,
    },
    /// Mixing time of the chain restricted above the saddle
    RestrictedMix {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[command(flatten)]
        mix: MixArgs,
        /// Override the floor on the magnetization sum
        #[arg(long, allow_hyphen_values = true)]
        threshold: Option<i64>,
        #[arg(long, value_enum, default_value_t = TargetArg::CurieWeiss)]
        target: TargetArg,
    },
    /// Draws from the metastable sampler
    Sample {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        /// Window half-width around each global maximizer
        #[arg(long, value_parser = parse_positive)]
        epsilon: Option<f64>,
        #[arg(long)]
        burn_steps: Option<u64>,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
    },
    /// Two chains driven by shared randomness
    Coupling {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long)]
        steps: u64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        record_every: u64,
        /// plus, minus or sum:<k>
        #[arg(long, default_value = "plus", value_parser = parse_start)]
        start_x: StartArg,
        #[arg(long, default_value = "minus", value_parser = parse_start)]
        start_y: StartArg,
        #[arg(long, default_value_t = 0)]
        replica: u64,
    },
    /// Bottleneck ratio over magnetization cuts
    Bottleneck {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
        n: u64,
        #[arg(long, value_enum, default_value_t = TargetArg::CurieWeiss)]
        target: TargetArg,
    },
    /// Mean one-step drift of the magnetization at every level
    Drift {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals() {
        assert_eq!(parse_real("1/3").unwrap(), 1.0 / 3.0);
        assert_eq!(parse_real(" -0.25 ").unwrap(), -0.25);
        assert!(parse_real("1/0").is_err());
        assert!(parse_real("inf").is_err());
        assert!(parse_real("abc").is_err());
    }

    #[test]
    fn starts() {
        assert_eq!(parse_start("sum:-4").unwrap(), StartArg::Sum(-4));
        assert!(parse_start("up").is_err());
    }

    #[test]
    fn command_tree_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
