//! The free-energy landscape `H(x) = beta x^p + h x - I(x)` on (-1, 1), its
//! derivatives, the fixed-point map `lambda(c) = tanh(p beta c^(p-1) + h)`
//! and the stationary points of `H`.
//!
//! Stationary points are found by a sign scan of `H'` on a uniform grid. The
//! roots of `H''` do not depend on `h` and are known semi-analytically, so they
//! are merged into the grid as extra breakpoints: between two consecutive
//! breakpoints `H'` is monotone and every cell holds at most one root.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance kept from the singular endpoints +-1.
pub const DOMAIN_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub p: u32,
    pub beta: f64,
    pub h: f64,
}

impl ModelParams {
    pub fn new(p: u32, beta: f64, h: f64) -> Result<Self> {
        let params = Self { p, beta, h };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::InvalidParams(format!(
                "p must be >= 2, got {}",
                self.p
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "beta must be positive and finite, got {}",
                self.beta
            )));
        }
        if !self.h.is_finite() {
            return Err(Error::InvalidParams(format!(
                "h must be finite, got {}",
                self.h
            )));
        }
        Ok(())
    }

    pub fn with_h(&self, h: f64) -> Self {
        Self { h, ..*self }
    }

    /// `p beta x^(p-1) + h`, the argument of the heat-bath tanh.
    #[inline]
    pub fn field(&self, x: f64) -> f64 {
        let p = self.p as f64;
        p * self.beta * x.powi(self.p as i32 - 1) + self.h
    }

    #[inline]
    pub fn lambda(&self, x: f64) -> f64 {
        self.field(x).tanh()
    }

    #[inline]
    pub fn h_value(&self, x: f64) -> f64 {
        self.beta * x.powi(self.p as i32) + self.h * x - entropy(x)
    }

    #[inline]
    pub fn h1(&self, x: f64) -> f64 {
        self.field(x) - x.atanh()
    }

    #[inline]
    pub fn h2(&self, x: f64) -> f64 {
        let p = self.p as f64;
        p * (p - 1.0) * self.beta * x.powi(self.p as i32 - 2) - 1.0 / (1.0 - x * x)
    }

    pub fn is_even(&self) -> bool {
        self.p.is_multiple_of(2)
    }
}

/// `c x^k`, treating a zero coefficient as exactly zero so that negative
/// exponents at low `p` never produce `0 * inf`.
#[inline]
fn mono(c: f64, x: f64, k: i32) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c * x.powi(k)
    }
}

/// Binary entropy `I(x) = ((1+x) log(1+x) + (1-x) log(1-x)) / 2`.
pub fn entropy(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return std::f64::consts::LN_2;
    }
    0.5 * ((1.0 + x) * x.ln_1p() + (1.0 - x) * (-x).ln_1p())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialValues {
    pub x: f64,
    pub entropy: f64,
    pub h: f64,
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
    pub lam: f64,
    pub lam1: f64,
    pub lam2: f64,
    pub lam3: f64,
}

pub fn evaluate_potential(params: &ModelParams, x: f64) -> Result<PotentialValues> {
    params.validate()?;
    if x.is_nan() || x.abs() >= 1.0 - DOMAIN_MARGIN {
        return Err(Error::Domain {
            x,
            margin: DOMAIN_MARGIN,
        });
    }
    let p = params.p as f64;
    let b = params.beta;
    let k = params.p as i32;
    let one_m = 1.0 - x * x;

    // Derivatives of the tanh argument.
    let a = params.field(x);
    let a1 = mono(p * (p - 1.0) * b, x, k - 2);
    let a2 = mono(p * (p - 1.0) * (p - 2.0) * b, x, k - 3);
    let a3 = mono(p * (p - 1.0) * (p - 2.0) * (p - 3.0) * b, x, k - 4);

    let lam = a.tanh();
    let s = 1.0 - lam * lam;
    let lam1 = a1 * s;
    let s1 = -2.0 * lam * lam1;
    let lam2 = a2 * s + a1 * s1;
    let lam3 = {
        let s2 = -2.0 * (lam1 * lam1 + lam * lam2);
        a3 * s + 2.0 * a2 * s1 + a1 * s2
    };

    Ok(PotentialValues {
        x,
        entropy: entropy(x),
        h: params.h_value(x),
        h1: a - x.atanh(),
        h2: a1 - 1.0 / one_m,
        h3: a2 - 2.0 * x / (one_m * one_m),
        lam,
        lam1,
        lam2,
        lam3,
    })
}

/// Expected one-step change of the mean magnetization at `c` for `n` spins.
pub fn drift_field(params: &ModelParams, n: usize, c: f64) -> Result<f64> {
    params.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    if !(-1.0..=1.0).contains(&c) {
        return Err(Error::Domain { x: c, margin: 0.0 });
    }
    Ok((params.lambda(c) - c) / n as f64)
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = f(lo);
    if f_lo == 0.0 {
        return lo;
    }
    let pos_lo = f_lo > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == pos_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

/// Roots of `H''` in (-1, 1), ascending. They do not depend on `h`.
///
/// On the positive axis these solve `x^(p-2) (1 - x^2) = 1 / (p (p-1) beta)`,
/// whose left side is unimodal with its peak at `sqrt(1 - 2/p)`. For even `p`
/// the roots are mirrored; for odd `p` none lie on the negative axis.
pub fn curvature_roots(p: u32, beta: f64) -> Vec<f64> {
    let target = 1.0 / (p as f64 * (p as f64 - 1.0) * beta);
    let pk = p as i32 - 2;
    let g = |x: f64| x.powi(pk) * (1.0 - x * x) - target;
    let mut pos = Vec::new();
    if p == 2 {
        if target < 1.0 {
            pos.push((1.0 - target).sqrt());
        }
    } else {
        let w = (1.0 - 2.0 / p as f64).sqrt();
        if g(w) > 0.0 {
            pos.push(bisect(g, 0.0, w));
            pos.push(bisect(g, w, 1.0));
        }
    }
    let mut roots = Vec::with_capacity(2 * pos.len());
    if p.is_multiple_of(2) {
        roots.extend(pos.iter().rev().map(|r| -r));
    }
    roots.extend(pos);
    roots
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StationaryKind {
    LocalMax,
    LocalMin,
    Inflection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub m: f64,
    pub kind: StationaryKind,
    pub h_value: f64,
    pub h2_value: f64,
    /// `|H''(m)|` is inside the curvature band.
    pub near_degenerate: bool,
    /// The point stands for a cluster of numerically unresolvable roots.
    pub merged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootFindOpts {
    pub grid: usize,
    pub root_tol: f64,
    pub curvature_tol: f64,
    /// Roots closer than this are collapsed into one representative.
    pub cluster_tol: f64,
    /// `|H'|` at a root of `H''` below which the point is a tangent
    /// (stationary inflection) root.
    pub tangency_tol: f64,
}

impl Default for RootFindOpts {
    fn default() -> Self {
        Self {
            grid: 20001,
            root_tol: 1e-12,
            curvature_tol: 1e-8,
            cluster_tol: 1e-6,
            tangency_tol: 1e-10,
        }
    }
}

impl RootFindOpts {
    /// A coarse grid; exact anyway because of the inserted `H''` breakpoints.
    pub fn coarse() -> Self {
        Self {
            grid: 257,
            ..Self::default()
        }
    }
}

/// The `h`-independent part of a stationary-point scan at fixed `(p, beta)`.
///
/// `H'_{beta,h}(x) = H'_{beta,0}(x) + h`, so one scan serves every `h` of a
/// phase-diagram column.
#[derive(Debug, Clone)]
pub struct StationaryScan {
    p: u32,
    beta: f64,
    xs: Vec<f64>,
    base: Vec<f64>,
    breaks: Vec<f64>,
}

impl StationaryScan {
    pub fn new(p: u32, beta: f64, opts: &RootFindOpts) -> Result<Self> {
        ModelParams::new(p, beta, 0.0)?;
        if opts.grid < 2 {
            return Err(Error::InvalidArgument(
                "root-finding grid needs >= 2 points".into(),
            ));
        }
        let lo = -1.0 + DOMAIN_MARGIN;
        let hi = 1.0 - DOMAIN_MARGIN;
        let step = (hi - lo) / (opts.grid - 1) as f64;
        let breaks = curvature_roots(p, beta);
        let mut xs: Vec<f64> = (0..opts.grid).map(|i| lo + step * i as f64).collect();
        *xs.last_mut().unwrap() = hi;
        xs.extend(breaks.iter().copied());
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        let base_params = ModelParams { p, beta, h: 0.0 };
        let base = xs.iter().map(|&x| base_params.h1(x)).collect();
        Ok(Self {
            p,
            beta,
            xs,
            base,
            breaks,
        })
    }

    pub fn curvature_roots(&self) -> &[f64] {
        &self.breaks
    }

    pub fn stationary_points(&self, h: f64, opts: &RootFindOpts) -> Result<Vec<StationaryPoint>> {
        let params = ModelParams::new(self.p, self.beta, h)?;
        let n = self.xs.len();
        if self.base[0] + h <= 0.0 {
            return Err(Error::RootOutsideDomain { edge: self.xs[0] });
        }
        if self.base[n - 1] + h >= 0.0 {
            return Err(Error::RootOutsideDomain {
                edge: self.xs[n - 1],
            });
        }

        let f = |x: f64| params.h1(x);
        // (root, crossing from + to -)
        let mut crossings: Vec<(f64, bool)> = Vec::new();
        let mut prev = 0usize;
        let mut prev_pos = true;
        for i in 1..n {
            let v = self.base[i] + h;
            if v == 0.0 {
                continue;
            }
            let pos = v > 0.0;
            if pos != prev_pos {
                let (lo, hi) = (self.xs[prev], self.xs[i]);
                let m = bisect(f, lo, hi);
                let resid = f(m).abs();
                let width_ok = {
                    let ulp = f64::EPSILON * m.abs().max(1e-300);
                    // bisection stops on adjacent floats; a steep H' near the
                    // edges cannot do better than that
                    resid <= opts.root_tol || resid <= 8.0 * ulp * params.h2(m).abs()
                };
                if !resid.is_finite() || !width_ok {
                    return Err(Error::DegenerateCluster { lo, hi });
                }
                crossings.push((m, prev_pos));
            }
            prev = i;
            prev_pos = pos;
        }

        let point = |m: f64, kind: StationaryKind, merged: bool| {
            let h2 = params.h2(m);
            StationaryPoint {
                m,
                kind,
                h_value: params.h_value(m),
                h2_value: h2,
                near_degenerate: h2.abs() <= opts.curvature_tol,
                merged,
            }
        };

        let mut points = Vec::with_capacity(crossings.len() + 2);
        let mut i = 0;
        while i < crossings.len() {
            let mut j = i + 1;
            while j < crossings.len() && crossings[j].0 - crossings[j - 1].0 < opts.cluster_tol {
                j += 1;
            }
            let group = &crossings[i..j];
            if group.len() == 1 {
                let (m, down) = group[0];
                let kind = if down {
                    StationaryKind::LocalMax
                } else {
                    StationaryKind::LocalMin
                };
                points.push(point(m, kind, false));
            } else if group.len() % 2 == 1 {
                let (m, _) = group[group.len() / 2];
                let kind = if group[0].1 {
                    StationaryKind::LocalMax
                } else {
                    StationaryKind::LocalMin
                };
                points.push(point(m, kind, true));
            } else {
                let m = 0.5 * (group[0].0 + group[group.len() - 1].0);
                points.push(point(m, StationaryKind::Inflection, true));
            }
            i = j;
        }

        for &r in &self.breaks {
            let near = points.iter().any(|s| (s.m - r).abs() < opts.cluster_tol);
            if !near && f(r).abs() <= opts.tangency_tol {
                points.push(point(r, StationaryKind::Inflection, false));
            }
        }
        points.sort_by(|a, b| a.m.partial_cmp(&b.m).unwrap());
        Ok(points)
    }
}

/// All stationary points of `H` on the evaluation domain, ascending.
pub fn find_stationary_points(
    params: &ModelParams,
    opts: &RootFindOpts,
) -> Result<Vec<StationaryPoint>> {
    params.validate()?;
    StationaryScan::new(params.p, params.beta, opts)?.stationary_points(params.h, opts)
}

/// Largest local maximizer, or `None` if the list holds no maximum.
pub fn largest_local_max(points: &[StationaryPoint]) -> Option<&StationaryPoint> {
    points
        .iter()
        .rev()
        .find(|s| s.kind == StationaryKind::LocalMax)
}
