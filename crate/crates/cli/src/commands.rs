use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cwglauber::dynamics::{
    restricted_threshold, run_coupling, CouplingSpec, MetastableSampler, MetastableSpec,
    SamplerReport, Start,
};
use cwglauber::mixing_analysis::{
    bottleneck_with, fit_sweep, mixing_sweep, mixing_time_with, restricted_mixing_time_at,
    sweep_csv, CutSide, FitReport, MixMethod, MixOptions, SweepRow, Target,
};
use cwglauber::phase_geometry::{
    classify_point, curves_csv, grid_csv, scan_grid, thresholds, CurveSample, GridSpec,
};
use cwglauber::potential::drift_field;
use cwglauber::report::{csv_document, to_json};
use cwglauber::svg::{emit_svg, PlotOptions, Series};
use cwglauber::{ModelParams, RootFindOpts};
use serde::{Deserialize, Serialize};

use crate::args::{Cli, Command, MethodArg, ModelArgs, OutFormat, Reference, StartArg, TargetArg};

#[derive(Debug)]
pub enum CliError {
    /// Bad flag combination or value: exit 2.
    Usage(String),
    Domain(cwglauber::Error),
    Io {
        path: PathBuf,
        err: std::io::Error,
    },
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Domain(e) => write!(f, "{e}"),
            CliError::Io { path, err } => write!(f, "{}: {err}", path.display()),
        }
    }
}

impl From<cwglauber::Error> for CliError {
    fn from(e: cwglauber::Error) -> Self {
        CliError::Domain(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

type Res<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> Res<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub fit: Option<FitReport>,
    pub fit_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDraw {
    pub sample: u64,
    pub seed: u64,
    pub mag_sum: i64,
    pub report: SamplerReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub c: f64,
    pub drift: f64,
}

impl ModelArgs {
    fn params(&self) -> Res<ModelParams> {
        ModelParams::new(self.p, self.beta, self.h).map_err(|e| CliError::Usage(e.to_string()))
    }
}

fn size(n: u64) -> Res<usize> {
    usize::try_from(n).or_else(|_| usage(format!("N = {n} is too large")))
}

fn method(m: MethodArg) -> MixMethod {
    match m {
        MethodArg::Exact => MixMethod::ExactProjected,
        MethodArg::Montecarlo => MixMethod::MonteCarlo,
    }
}

fn target(t: TargetArg) -> Target {
    match t {
        TargetArg::CurieWeiss => Target::CurieWeiss,
        TargetArg::Kernel => Target::Kernel,
    }
}

fn start(s: &StartArg, n: usize) -> Res<Start> {
    Ok(match *s {
        StartArg::Plus => Start::AllPlus,
        StartArg::Minus => Start::AllMinus,
        StartArg::Sum(k) if k.unsigned_abs() <= n as u64 => Start::Magnetization(k),
        StartArg::Sum(k) => return usage(format!("start sum {k} exceeds N = {n}")),
    })
}

fn beta_axis(lo: f64, hi: f64, step: f64) -> Res<Vec<f64>> {
    if hi < lo {
        return usage(format!("beta range [{lo}, {hi}] is empty"));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| lo + step * i as f64).collect())
}

fn json<T: Serialize>(v: &T) -> Res<String> {
    let mut s = to_json(v)?;
    s.push('\n');
    Ok(s)
}

fn plot(series: Vec<Series>, title: &str, x: &str, y: &str, log: bool) -> Res<String> {
    let opts = PlotOptions {
        title: title.into(),
        x_label: x.into(),
        y_label: y.into(),
        log_x: log,
        log_y: log,
    };
    Ok(emit_svg(&series, &opts)?)
}

fn no_svg(name: &str) -> CliError {
    CliError::Usage(format!("{name} has no svg output; use csv or json"))
}

fn write_file(path: &Path, text: &str) -> Res<()> {
    fs::write(path, text).map_err(|err| CliError::Io {
        path: path.to_path_buf(),
        err,
    })
}

fn curve_series(samples: &[CurveSample]) -> Vec<Series> {
    let pick = |f: fn(&CurveSample) -> Option<f64>| {
        samples
            .iter()
            .filter_map(|s| f(s).map(|v| (s.beta, v)))
            .collect::<Vec<_>>()
    };
    [
        ("U", pick(|s| s.u)),
        ("L", pick(|s| s.l)),
        ("C", pick(|s| s.c)),
    ]
    .into_iter()
    .filter(|(_, pts)| !pts.is_empty())
    .map(|(name, pts)| Series::new(name, pts))
    .collect()
}

/// Runs one parsed command and returns the text for the output sink.
pub fn run(cli: &Cli) -> Res<String> {
    let fmt = cli.format();
    let seed = cli.seed;
    match &cli.command {
        Command::Classify { model } => {
            let r = classify_point(&model.params()?, &RootFindOpts::default())?;
            match fmt {
                OutFormat::Json => json(&r),
                OutFormat::Csv => Ok(csv_document(&format!(
                    "p,beta,h,region,region_code\n{},{},{},{:?},{}\n",
                    r.p,
                    r.beta,
                    r.h,
                    r.region,
                    r.code()
                ))),
                OutFormat::Svg => Err(no_svg("classify")),
            }
        }

        Command::Curves {
            p,
            beta_min,
            beta_max,
            beta_step,
        } => {
            let th = thresholds(*p)?;
            let samples: Vec<CurveSample> = beta_axis(*beta_min, *beta_max, *beta_step)?
                .into_iter()
                .map(|b| th.curves_at(b))
                .collect();
            match fmt {
                OutFormat::Json => json(&samples),
                OutFormat::Csv => Ok(csv_document(&curves_csv(&samples))),
                OutFormat::Svg => plot(
                    curve_series(&samples),
                    &format!("boundary curves, p = {p}"),
                    "beta",
                    "h",
                    false,
                ),
            }
        }

        Command::PhaseDiagram {
            p,
            beta_min,
            beta_max,
            beta_step,
            h_min,
            h_max,
            h_step,
            max_cells,
            out_dir,
        } => {
            if h_max < h_min {
                return usage(format!("h range [{h_min}, {h_max}] is empty"));
            }
            beta_axis(*beta_min, *beta_max, *beta_step)?;
            let mut spec = GridSpec::new(
                *p,
                (*beta_min, *beta_max, *beta_step),
                (*h_min, *h_max, *h_step),
            );
            spec.max_cells = *max_cells;
            let grid = scan_grid(&spec)?;
            fs::create_dir_all(out_dir).map_err(|err| CliError::Io {
                path: out_dir.clone(),
                err,
            })?;
            write_file(&out_dir.join("grid.csv"), &csv_document(&grid_csv(&grid)))?;
            write_file(
                &out_dir.join("curves.csv"),
                &csv_document(&curves_csv(&grid.curve_samples)),
            )?;
            let series = curve_series(&grid.curve_samples);
            if !series.is_empty() {
                let svg = plot(
                    series,
                    &format!("phase diagram, p = {p}"),
                    "beta",
                    "h",
                    false,
                )?;
                write_file(&out_dir.join("phase.svg"), &svg)?;
            }
            match fmt {
                OutFormat::Json => json(&grid),
                OutFormat::Csv => {
                    let mut s = String::from("file\n");
                    for f in ["grid.csv", "curves.csv", "phase.svg"] {
                        let path = out_dir.join(f);
                        if path.exists() {
                            let _ = writeln!(s, "{}", path.display());
                        }
                    }
                    Ok(csv_document(&s))
                }
                OutFormat::Svg => Err(no_svg("phase-diagram (phase.svg is always written)")),
            }
        }

        Command::Mix {
            model,
            n,
            mix,
            method: m,
            target: t,
            replicas,
        } => {
            let opts = MixOptions {
                replicas: size(*replicas)?,
                stride: None,
                seed,
                target: target(*t),
            };
            let r = mixing_time_with(
                &model.params()?,
                size(*n)?,
                mix.eps,
                mix.cap,
                method(*m),
                &opts,
            )?;
            match fmt {
                OutFormat::Json => json(&r),
                OutFormat::Csv => Ok(csv_document(&sweep_csv(&[SweepRow::from(&r)]))),
                OutFormat::Svg => Err(no_svg("mix")),
            }
        }

        Command::MixSweep {
            model,
            ns,
            mix,
            method: m,
            target: t,
            replicas,
            reference,
        } => {
            let opts = MixOptions {
                replicas: size(*replicas)?,
                stride: None,
                seed,
                target: target(*t),
            };
            let ns = ns.iter().map(|&n| size(n)).collect::<Res<Vec<_>>>()?;
            let rows = mixing_sweep(&model.params()?, &ns, mix.eps, mix.cap, method(*m), &opts)?;
            match fmt {
                OutFormat::Json => {
                    let (fit, fit_error) = match fit_sweep(&rows) {
                        Ok(f) => (Some(f), None),
                        Err(e) => (None, Some(e.to_string())),
                    };
                    json(&SweepReport {
                        rows,
                        fit,
                        fit_error,
                    })
                }
                OutFormat::Csv => Ok(csv_document(&sweep_csv(&rows))),
                OutFormat::Svg => {
                    let pts = |f: &dyn Fn(f64) -> f64| {
                        rows.iter().map(|r| (r.n as f64, f(r.n as f64))).collect()
                    };
                    let t_mix: Vec<(f64, f64)> = rows
                        .iter()
                        .map(|r| (r.n as f64, (r.t_mix as f64).max(1.0)))
                        .collect();
                    let mut series = vec![Series::new("t_mix", t_mix)];
                    match reference {
                        Reference::None => {}
                        Reference::Nlogn => {
                            series.push(Series::new("10 N log N", pts(&|n| 10.0 * n * n.ln())))
                        }
                        Reference::N32 => {
                            series.push(Series::new("4 N^1.5", pts(&|n| 4.0 * n.powf(1.5))))
                        }
                    }
                    plot(series, "mixing time", "N", "t_mix", true)
                }
            }
        }

        Command::RestrictedMix {
            model,
            n,
            mix,
            threshold,
            target: t,
        } => {
            let params = model.params()?;
            let n = size(*n)?;
            let thr = match *threshold {
                Some(k) if k.unsigned_abs() <= n as u64 => k,
                Some(k) => return usage(format!("threshold {k} exceeds N = {n}")),
                None => restricted_threshold(&params, n)?,
            };
            let r = restricted_mixing_time_at(&params, n, mix.eps, mix.cap, thr, target(*t))?;
            match fmt {
                OutFormat::Json => json(&r),
                OutFormat::Csv => Ok(csv_document(&format!(
                    "N,t_mix,capped,method,threshold\n{},{},{},{},{}\n",
                    r.n,
                    r.t_mix,
                    r.capped,
                    r.method.label(),
                    thr
                ))),
                OutFormat::Svg => Err(no_svg("restricted-mix")),
            }
        }

        Command::Sample {
            model,
            n,
            epsilon,
            burn_steps,
            samples,
        } => {
            if matches!(epsilon, Some(e) if *e >= 1.0) {
                return usage("epsilon must be below 1");
            }
            let spec = MetastableSpec {
                params: model.params()?,
                n: size(*n)?,
                epsilon: *epsilon,
                burn_steps: *burn_steps,
                seed,
            };
            let sampler = MetastableSampler::new(&spec)?;
            let mut draws = Vec::new();
            for i in 0..*samples {
                let s = seed.wrapping_add(i);
                let (state, report) = sampler.sample(s)?;
                draws.push(SampleDraw {
                    sample: i,
                    seed: s,
                    mag_sum: state.sum(),
                    report,
                });
            }
            match fmt {
                OutFormat::Json => json(&draws),
                OutFormat::Csv => {
                    let mut s = String::from("sample,chosen,mag_sum\n");
                    for d in &draws {
                        let _ = writeln!(s, "{},{},{}", d.sample, d.report.chosen, d.mag_sum);
                    }
                    Ok(csv_document(&s))
                }
                OutFormat::Svg => Err(no_svg("sample")),
            }
        }

        Command::Coupling {
            model,
            n,
            steps,
            record_every,
            start_x,
            start_y,
            replica,
        } => {
            let n = size(*n)?;
            let spec = CouplingSpec {
                params: model.params()?,
                n,
                start_x: start(start_x, n)?,
                start_y: start(start_y, n)?,
                steps: *steps,
                seed,
                replica: *replica,
                record_every: *record_every,
            };
            let tr = run_coupling(&spec)?;
            match fmt {
                OutFormat::Json => json(&tr),
                OutFormat::Csv => Ok(csv_document(&tr.to_csv(n))),
                OutFormat::Svg => {
                    let ham = tr
                        .times
                        .iter()
                        .zip(&tr.hamming)
                        .map(|(&t, &d)| (t as f64, d as f64))
                        .collect();
                    plot(
                        vec![Series::new("hamming", ham)],
                        "coupling",
                        "t",
                        "distance",
                        false,
                    )
                }
            }
        }

        Command::Bottleneck {
            model,
            n,
            target: t,
        } => {
            let r = bottleneck_with(&model.params()?, size(*n)?, target(*t))?;
            match fmt {
                OutFormat::Json => json(&r),
                OutFormat::Csv => {
                    let mut s = String::from("k,side,q,pi_a,ratio,log_ratio\n");
                    for c in &r.cuts {
                        let side = match c.side {
                            CutSide::Lower => "lower",
                            CutSide::Upper => "upper",
                        };
                        let _ = writeln!(
                            s,
                            "{},{},{},{},{},{}",
                            c.k, side, c.q, c.pi_a, c.ratio, c.log_ratio
                        );
                    }
                    Ok(csv_document(&s))
                }
                OutFormat::Svg => {
                    let pts = r
                        .cuts
                        .iter()
                        .filter(|c| c.log_ratio.is_finite())
                        .map(|c| (c.k as f64 / r.n as f64, c.log_ratio))
                        .collect();
                    plot(
                        vec![Series::new("log Q/pi(A)", pts)],
                        "bottleneck ratio",
                        "k / N",
                        "log ratio",
                        false,
                    )
                }
            }
        }

        Command::Drift { model, n } => {
            let params = model.params()?;
            let n = size(*n)?;
            let ni = n as i64;
            let rows = (0..=ni)
                .map(|i| {
                    let c = (2 * i - ni) as f64 / n as f64;
                    Ok(DriftRow {
                        c,
                        drift: drift_field(&params, n, c)?,
                    })
                })
                .collect::<Res<Vec<_>>>()?;
            match fmt {
                OutFormat::Json => json(&rows),
                OutFormat::Csv => {
                    let mut s = String::from("c,drift\n");
                    for r in &rows {
                        let _ = writeln!(s, "{},{}", r.c, r.drift);
                    }
                    Ok(csv_document(&s))
                }
                OutFormat::Svg => plot(
                    vec![Series::new(
                        "drift",
                        rows.iter().map(|r| (r.c, r.drift)).collect(),
                    )],
                    "one-step drift",
                    "c",
                    "drift",
                    false,
                ),
            }
        }
    }
}
