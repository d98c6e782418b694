//! Mixing-phase geometry in the `(beta, h)` plane: the closed-form special
//! point, the thresholds `beta_tilde` and `beta_prime`, the curves `U`, `L`,
//! `C` and the region classifier.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{
    curvature_roots, ModelParams, RootFindOpts, StationaryKind, StationaryPoint, StationaryScan,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub p: u32,
    pub beta_hat: f64,
    pub h_hat: f64,
    pub beta_tilde: f64,
    pub beta_prime: f64,
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

fn golden(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x).min(fc).min(fd))
}

fn grid_argmin(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> (usize, f64, f64) {
    let step = (hi - lo) / n as f64;
    let (mut best_i, mut best) = (0usize, f64::INFINITY);
    for i in 1..n {
        let v = f(lo + i as f64 * step);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    (best_i, best, step)
}

/// Minimize over x in (0, 1), with `fy` written in terms of `y = 1 - x` so it
/// stays accurate next to x = 1: a uniform grid pass, then golden section.
///
/// For large p the minimizer sits within ~4^-p of 1, below the grid spacing;
/// then the search is repeated in `ln y`.
fn minimize_unit(fy: impl Fn(f64) -> f64, what: &'static str) -> Result<(f64, f64)> {
    const GRID: usize = 100_000;
    let f = |x: f64| fy(1.0 - x);
    let (best_i, best, step) = grid_argmin(&f, 0.0, 1.0, GRID);
    if !best.is_finite() || best_i <= 1 {
        return Err(Error::Minimization(what));
    }
    if best_i < GRID - 1 {
        let lo = (best_i - 1) as f64 * step;
        return Ok(golden(&f, lo, lo + 2.0 * step));
    }
    let g = |t: f64| fy(t.exp());
    let (t_lo, t_hi) = (-700.0, (2.0 * step).ln());
    let (best_i, best, tstep) = grid_argmin(&g, t_lo, t_hi, GRID);
    if !best.is_finite() || best_i >= GRID - 1 {
        return Err(Error::Minimization(what));
    }
    if best_i <= 1 {
        // f is flat to rounding all the way down to y = e^-700
        let edge = g(t_lo);
        if (edge - best).abs() <= 4.0 * f64::EPSILON * best.abs() {
            return Ok((1.0, best.min(edge)));
        }
        return Err(Error::Minimization(what));
    }
    let lo = t_lo + (best_i - 1) as f64 * tstep;
    let (t, v) = golden(&g, lo, lo + 2.0 * tstep);
    Ok((1.0 - t.exp(), v))
}

pub fn thresholds(p: u32) -> Result<Thresholds> {
    if p < 3 {
        return Err(Error::ThresholdOrder(p));
    }
    let pf = p as f64;
    let beta_hat = 1.0 / (2.0 * (pf - 1.0)) * (pf / (pf - 2.0)).powf((pf - 2.0) / 2.0);
    let r = (pf - 2.0) / pf;
    let h_hat = r.sqrt().atanh() - beta_hat * pf * r.powf((pf - 1.0) / 2.0);
    // I(1 - y) and atanh(1 - y) in forms that keep full precision for tiny y
    let entropy_y =
        |y: f64| 0.5 * ((2.0 - y) * (2.0 - y).ln() + if y > 0.0 { y * y.ln() } else { 0.0 });
    let atanh_y = |y: f64| 0.5 * ((2.0 - y) / y).ln();
    let pow_y = |y: f64, k: f64| (k * (-y).ln_1p()).exp();
    let (_, beta_tilde) = minimize_unit(|y| entropy_y(y) / pow_y(y, pf), "I(x)/x^p")?;
    let (_, beta_prime) = minimize_unit(
        |y| atanh_y(y) / (pf * pow_y(y, pf - 1.0)),
        "atanh(x)/(p x^(p-1))",
    )?;
    Ok(Thresholds {
        p,
        beta_hat,
        h_hat,
        beta_tilde,
        beta_prime,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InflectionPair {
    pub a1: f64,
    pub a2: f64,
}

/// The two positive roots of `H''_{beta,0}`; they straddle `sqrt(1 - 2/p)`.
pub fn inflection_pair(p: u32, beta: f64) -> Result<InflectionPair> {
    if p < 3 {
        return Err(Error::ThresholdOrder(p));
    }
    ModelParams::new(p, beta, 0.0)?;
    let pf = p as f64;
    let beta_hat = 1.0 / (2.0 * (pf - 1.0)) * (pf / (pf - 2.0)).powf((pf - 2.0) / 2.0);
    if beta <= beta_hat + 1e-12 {
        return Err(Error::NoInflectionPair { beta, beta_hat });
    }
    let pos: Vec<f64> = curvature_roots(p, beta)
        .into_iter()
        .filter(|&r| r > 0.0)
        .collect();
    match pos.as_slice() {
        [a1, a2] => Ok(InflectionPair { a1: *a1, a2: *a2 }),
        _ => Err(Error::NoInflectionPair { beta, beta_hat }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub beta: f64,
    pub u: Option<f64>,
    pub l: Option<f64>,
    pub c: Option<f64>,
}

impl Thresholds {
    pub fn is_even(&self) -> bool {
        self.p.is_multiple_of(2)
    }

    /// `U`, `L` and `C` at `beta`; each is `None` outside its domain.
    pub fn curves_at(&self, beta: f64) -> CurveSample {
        let none = CurveSample {
            beta,
            u: None,
            l: None,
            c: None,
        };
        let Ok(pair) = inflection_pair(self.p, beta) else {
            return none;
        };
        let base = ModelParams {
            p: self.p,
            beta,
            h: 0.0,
        };
        let (u, l) = if self.is_even() {
            let u = -base.h1(-pair.a2).min(base.h1(pair.a1));
            let l = (beta <= self.beta_prime).then(|| -base.h1(pair.a2));
            (u, l)
        } else {
            (-base.h1(pair.a1), Some(-base.h1(pair.a2)))
        };
        let c = if self.is_even() && beta >= self.beta_tilde {
            Some(0.0)
        } else {
            let lo = if self.is_even() {
                l.unwrap_or(0.0).max(0.0)
            } else {
                l.unwrap()
            };
            coexistence_field(self.p, beta, pair, lo, u)
        };
        CurveSample {
            beta,
            u: Some(u),
            l,
            c,
        }
    }
}

pub fn boundary_curves(p: u32, beta: f64) -> Result<CurveSample> {
    ModelParams::new(p, beta, 0.0)?;
    Ok(thresholds(p)?.curves_at(beta))
}

/// `sup_{[a2,1)} H - sup_{(-1,a1]} H` at field `h`.
fn height_gap(
    scan: &StationaryScan,
    p: u32,
    beta: f64,
    pair: InflectionPair,
    h: f64,
) -> Option<f64> {
    let opts = RootFindOpts::coarse();
    let params = ModelParams { p, beta, h };
    let pts = scan.stationary_points(h, &opts).ok()?;
    let sup = |pred: &dyn Fn(f64) -> bool, edge: f64| {
        pts.iter()
            .filter(|s| s.kind == StationaryKind::LocalMax && pred(s.m))
            .map(|s| s.h_value)
            .fold(params.h_value(edge), f64::max)
    };
    let right = sup(&|m| m >= pair.a2, pair.a2);
    let left = sup(&|m| m <= pair.a1, pair.a1);
    Some(right - left)
}

/// The field at which the two outer wells of `H` have equal height,
/// bisected on `[lo, hi]`.
fn coexistence_field(p: u32, beta: f64, pair: InflectionPair, lo: f64, hi: f64) -> Option<f64> {
    let scan = StationaryScan::new(p, beta, &RootFindOpts::coarse()).ok()?;
    let gap = |h: f64| height_gap(&scan, p, beta, pair, h);
    let (mut a, mut b) = (lo, hi);
    let ga = gap(a)?;
    if ga >= 0.0 {
        return Some(a);
    }
    if gap(b)? <= 0.0 {
        return Some(b);
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let g = gap(mid)?;
        if g.abs() < 1e-12 {
            return Some(mid);
        }
        if g < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    LocallyRegular,
    LocallyCritical,
    Special,
    Boundary,
}

impl Region {
    pub fn code(self) -> u8 {
        match self {
            Region::LocallyRegular => 0,
            Region::LocallyCritical => 1,
            Region::Special => 2,
            Region::Boundary => 3,
        }
    }
}

pub const UNCERTAIN_CODE: u8 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryDetail {
    OnU,
    OnL,
    OnCGlobals,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub to_u: Option<f64>,
    pub to_l: Option<f64>,
    pub to_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub p: u32,
    pub beta: f64,
    pub h: f64,
    pub region: Region,
    pub boundary_detail: Option<BoundaryDetail>,
    pub stationary_points: Vec<StationaryPoint>,
    pub margins: Option<Margins>,
    pub uncertain: bool,
    pub candidates: Vec<Region>,
}

impl PhaseReport {
    pub fn code(&self) -> u8 {
        if self.uncertain {
            UNCERTAIN_CODE
        } else {
            self.region.code()
        }
    }
}

fn region_from_points(
    params: &ModelParams,
    points: &[StationaryPoint],
    curvature_roots: &[f64],
    opts: &RootFindOpts,
) -> (Region, Option<BoundaryDetail>, bool, Vec<Region>) {
    let maxima: Vec<&StationaryPoint> = points
        .iter()
        .filter(|s| s.kind == StationaryKind::LocalMax)
        .collect();
    let others: Vec<&StationaryPoint> = points
        .iter()
        .filter(|s| s.kind != StationaryKind::LocalMax)
        .collect();
    let merged = points.iter().any(|s| s.merged);

    if maxima.len() >= 2 {
        let mut heights: Vec<f64> = maxima.iter().map(|s| s.h_value).collect();
        heights.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let detail = (heights[0] - heights[1] < 1e-10).then_some(BoundaryDetail::OnCGlobals);
        let candidates = if merged {
            vec![Region::LocallyCritical, Region::Boundary]
        } else {
            vec![Region::LocallyCritical]
        };
        return (Region::LocallyCritical, detail, merged, candidates);
    }
    if maxima.len() == 1 && others.is_empty() {
        let region = if maxima[0].h2_value < -opts.curvature_tol {
            Region::LocallyRegular
        } else {
            Region::Special
        };
        let candidates = if merged {
            vec![region, Region::LocallyCritical]
        } else {
            vec![region]
        };
        return (region, None, merged, candidates);
    }
    if maxima.len() == 1 && others.iter().all(|s| s.kind == StationaryKind::Inflection) {
        // Mirror even-p configurations to h >= 0 before naming the curve.
        let sign = if params.is_even() && params.h < 0.0 {
            -1.0
        } else {
            1.0
        };
        let pos: Vec<f64> = curvature_roots
            .iter()
            .copied()
            .filter(|&r| r > 0.0)
            .collect();
        let detail = if pos.len() == 2 {
            let x = sign * others[0].m;
            let near = |r: f64| (x - r).abs() < 1e-4;
            if near(pos[0]) || near(-pos[1]) {
                Some(BoundaryDetail::OnU)
            } else if near(pos[1]) || near(-pos[0]) {
                Some(BoundaryDetail::OnL)
            } else {
                None
            }
        } else {
            None
        };
        let candidates = if merged {
            vec![
                Region::Boundary,
                Region::LocallyCritical,
                Region::LocallyRegular,
            ]
        } else {
            vec![Region::Boundary]
        };
        return (Region::Boundary, detail, merged, candidates);
    }
    // A lone maximum next to a minimum, or no maximum at all: numerically
    // inconsistent, so report both readings.
    (
        Region::Boundary,
        None,
        true,
        vec![
            Region::Boundary,
            Region::LocallyRegular,
            Region::LocallyCritical,
        ],
    )
}

/// Region of `(beta, h)` from the stationary points of `H`.
pub fn classify_point(params: &ModelParams, opts: &RootFindOpts) -> Result<PhaseReport> {
    params.validate()?;
    let scan = StationaryScan::new(params.p, params.beta, opts)?;
    let mut report = classify_with_scan(&scan, params, opts)?;
    if params.p >= 3 {
        let th = thresholds(params.p)?;
        report.margins = margins(&th, params);
    }
    Ok(report)
}

fn classify_with_scan(
    scan: &StationaryScan,
    params: &ModelParams,
    opts: &RootFindOpts,
) -> Result<PhaseReport> {
    let points = scan.stationary_points(params.h, opts)?;
    let (region, boundary_detail, uncertain, candidates) =
        region_from_points(params, &points, scan.curvature_roots(), opts);
    Ok(PhaseReport {
        p: params.p,
        beta: params.beta,
        h: params.h,
        region,
        boundary_detail,
        stationary_points: points,
        margins: None,
        uncertain,
        candidates,
    })
}

fn margins(th: &Thresholds, params: &ModelParams) -> Option<Margins> {
    let cs = th.curves_at(params.beta);
    cs.u?;
    let h = if th.is_even() {
        params.h.abs()
    } else {
        params.h
    };
    Some(Margins {
        to_u: cs.u.map(|u| (h - u).abs()),
        to_l: cs.l.map(|l| (h - l).abs()),
        to_c: cs.c.map(|c| (h - c).abs()),
    })
}

/// Region of `(beta, h)` read off the curves `U` and `L` alone.
///
/// This is an independent route to the region and only distinguishes
/// regular from critical; points within `band` of a curve are `Boundary`.
pub fn classify_by_curves(th: &Thresholds, params: &ModelParams, band: f64) -> Region {
    let cs = th.curves_at(params.beta);
    let Some(u) = cs.u else {
        return Region::LocallyRegular;
    };
    let h = if th.is_even() {
        params.h.abs()
    } else {
        params.h
    };
    let on = |c: Option<f64>| c.is_some_and(|c| (h - c).abs() < band);
    if on(Some(u)) || on(cs.l) {
        return Region::Boundary;
    }
    let inside = match (th.is_even(), cs.l) {
        (false, Some(l)) => l < h && h < u,
        (true, None) => h < u,
        (true, Some(l)) => l < h && h < u,
        (false, None) => unreachable!("L is defined for odd p wherever U is"),
    };
    if inside {
        Region::LocallyCritical
    } else {
        Region::LocallyRegular
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub p: u32,
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_step: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub h_step: f64,
    pub max_cells: usize,
    pub opts: RootFindOpts,
}

impl GridSpec {
    pub fn new(p: u32, beta: (f64, f64, f64), h: (f64, f64, f64)) -> Self {
        Self {
            p,
            beta_min: beta.0,
            beta_max: beta.1,
            beta_step: beta.2,
            h_min: h.0,
            h_max: h.1,
            h_step: h.2,
            max_cells: 4_000_000,
            opts: RootFindOpts::default(),
        }
    }
}

fn axis(min: f64, max: f64, step: f64, name: &str) -> Result<Vec<f64>> {
    if !(step > 0.0 && min.is_finite() && max.is_finite() && max >= min) {
        return Err(Error::InvalidArgument(format!(
            "bad {name} axis [{min}, {max}] step {step}"
        )));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| min + step * i as f64).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagramGrid {
    pub p: u32,
    pub beta_axis: Vec<f64>,
    pub h_axis: Vec<f64>,
    /// `cells[i][j]` is the region code at `(beta_axis[i], h_axis[j])`.
    pub cells: Vec<Vec<u8>>,
    pub curve_samples: Vec<CurveSample>,
}

pub fn scan_grid(spec: &GridSpec) -> Result<PhaseDiagramGrid> {
    let betas = axis(spec.beta_min, spec.beta_max, spec.beta_step, "beta")?;
    let hs = axis(spec.h_min, spec.h_max, spec.h_step, "h")?;
    if betas[0] <= 0.0 {
        return Err(Error::InvalidParams("beta axis must be positive".into()));
    }
    let required = betas.len() * hs.len();
    if required > spec.max_cells {
        return Err(Error::CellBudget {
            required,
            budget: spec.max_cells,
        });
    }
    let even = spec.p.is_multiple_of(2);
    let cells = betas
        .par_iter()
        .map(|&beta| {
            let scan = StationaryScan::new(spec.p, beta, &spec.opts)?;
            hs.iter()
                .map(|&h| {
                    // even p: the diagram is symmetric in h
                    let h = if even { h.abs() } else { h };
                    let params = ModelParams::new(spec.p, beta, h)?;
                    Ok(classify_with_scan(&scan, &params, &spec.opts)?.code())
                })
                .collect::<Result<Vec<u8>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let curve_samples = if spec.p >= 3 {
        let th = thresholds(spec.p)?;
        betas.par_iter().map(|&b| th.curves_at(b)).collect()
    } else {
        Vec::new()
    };
    Ok(PhaseDiagramGrid {
        p: spec.p,
        beta_axis: betas,
        h_axis: hs,
        cells,
        curve_samples,
    })
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn curves_csv(samples: &[CurveSample]) -> String {
    let mut out = String::from("beta,U,L,C\n");
    for s in samples {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.beta,
            opt_field(s.u),
            opt_field(s.l),
            opt_field(s.c)
        ));
    }
    out
}

pub fn grid_csv(grid: &PhaseDiagramGrid) -> String {
    let mut out = String::from("beta,h,region_code\n");
    for (i, &b) in grid.beta_axis.iter().enumerate() {
        for (j, &h) in grid.h_axis.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", b, h, grid.cells[i][j]));
        }
    }
    out
}
