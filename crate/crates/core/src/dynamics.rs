//! Heat-bath Glauber dynamics on `{-1, +1}^N`.
//!
//! Every step consumes exactly two uniforms, site first and spin second, so
//! coupled chains and the restricted variants stay draw-for-draw comparable
//! with the plain chain under one seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{
    find_stationary_points, largest_local_max, ModelParams, RootFindOpts, StationaryKind,
};
use crate::rng::RandomStream;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinConfig {
    spins: Vec<i8>,
    sum: i64,
}

impl SpinConfig {
    pub fn all_plus(n: usize) -> Self {
        Self {
            spins: vec![1; n],
            sum: n as i64,
        }
    }

    pub fn all_minus(n: usize) -> Self {
        Self {
            spins: vec![-1; n],
            sum: -(n as i64),
        }
    }

    /// `ceil((N + k) / 2)` leading `+1` spins, the rest `-1`.
    pub fn with_sum(n: usize, k: i64) -> Result<Self> {
        if k.unsigned_abs() as usize > n {
            return Err(Error::Parity { n, k });
        }
        let plus = (n as i64 + k + 1).div_euclid(2) as usize;
        let spins: Vec<i8> = (0..n).map(|i| if i < plus { 1 } else { -1 }).collect();
        Ok(Self::from_spins(spins))
    }

    pub fn from_spins(spins: Vec<i8>) -> Self {
        let sum = spins.iter().map(|&s| s as i64).sum();
        Self { spins, sum }
    }

    pub fn n(&self) -> usize {
        self.spins.len()
    }

    pub fn sum(&self) -> i64 {
        self.sum
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn magnetization(&self) -> f64 {
        self.sum as f64 / self.n() as f64
    }

    pub fn hamming(&self, other: &SpinConfig) -> usize {
        self.spins
            .iter()
            .zip(&other.spins)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// Recomputes the cached sum and checks the spin alphabet.
    pub fn is_consistent(&self) -> bool {
        let n = self.n() as i64;
        self.spins.iter().all(|&s| s == 1 || s == -1)
            && self.spins.iter().map(|&s| s as i64).sum::<i64>() == self.sum
            && self.sum.abs() <= n
            && (self.sum + n) % 2 == 0
    }

    #[inline]
    fn set(&mut self, i: usize, s: i8) {
        self.sum += (s - self.spins[i]) as i64;
        self.spins[i] = s;
    }
}

/// `(e^a, e^-a) / (e^a + e^-a)` without overflow.
#[inline]
pub(crate) fn two_point(a: f64) -> (f64, f64) {
    if a >= 0.0 {
        let e = (-2.0 * a).exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    } else {
        let e = (2.0 * a).exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagKernelRow {
    pub k: i64,
    pub p_up: f64,
    pub p_down: f64,
    pub p_stay: f64,
}

pub(crate) fn check_level(n: usize, k: i64) -> Result<()> {
    let ni = n as i64;
    if n == 0 || k.abs() > ni || (k + ni) % 2 != 0 {
        return Err(Error::Parity { n, k });
    }
    Ok(())
}

/// Transition triple of the magnetization sum at level `k`.
pub fn mag_kernel(params: &ModelParams, n: usize, k: i64) -> Result<MagKernelRow> {
    params.validate()?;
    check_level(n, k)?;
    Ok(kernel_row(params, n, k))
}

#[inline]
pub(crate) fn kernel_row(params: &ModelParams, n: usize, k: i64) -> MagKernelRow {
    let ni = n as i64;
    let c = k as f64 / n as f64;
    let (sp, sm) = two_point(params.field(c));
    let p_up = (ni - k) as f64 / (2 * ni) as f64 * sp;
    let p_down = (ni + k) as f64 / (2 * ni) as f64 * sm;
    MagKernelRow {
        k,
        p_up,
        p_down,
        p_stay: 1.0 - p_up - p_down,
    }
}

/// The heat-bath chain for one `(params, N)`, with the `+1` probability
/// tabulated per magnetization level.
#[derive(Debug, Clone)]
pub struct Glauber {
    params: ModelParams,
    n: usize,
    plus: Vec<f64>,
}

impl Glauber {
    pub fn new(params: ModelParams, n: usize) -> Result<Self> {
        params.validate()?;
        if n == 0 {
            return Err(Error::InvalidArgument("N must be positive".into()));
        }
        let plus = (0..=n)
            .map(|i| {
                let c = (2 * i as i64 - n as i64) as f64 / n as f64;
                two_point(params.field(c)).0
            })
            .collect();
        Ok(Self { params, n, plus })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `f(c) = (1 + tanh(p beta c^(p-1) + h)) / 2` at sum level `sum`.
    #[inline]
    pub fn plus_prob(&self, sum: i64) -> f64 {
        self.plus[((sum + self.n as i64) / 2) as usize]
    }

    #[inline]
    fn draw(&self, rng: &mut RandomStream) -> (usize, f64) {
        let site = ((rng.uniform() * self.n as f64) as usize).min(self.n - 1);
        (site, rng.uniform())
    }

    #[inline]
    fn apply(&self, state: &mut SpinConfig, site: usize, u: f64) -> i8 {
        let old = state.spins[site];
        let new = if u < self.plus_prob(state.sum) { 1 } else { -1 };
        state.set(site, new);
        old
    }

    pub fn step_full(&self, state: &mut SpinConfig, rng: &mut RandomStream) {
        let (site, u) = self.draw(rng);
        self.apply(state, site, u);
    }

    /// One step with proposals below `threshold` turned into self-loops.
    /// Returns whether the proposal was kept.
    pub fn step_restricted(
        &self,
        state: &mut SpinConfig,
        threshold: i64,
        rng: &mut RandomStream,
    ) -> Result<bool> {
        self.step_window(state, threshold, self.n as i64, rng)
    }

    /// One step confined to sums in `[lo, hi]`; crossings on either side are
    /// rejected.
    pub fn step_window(
        &self,
        state: &mut SpinConfig,
        lo: i64,
        hi: i64,
        rng: &mut RandomStream,
    ) -> Result<bool> {
        if state.sum < lo || state.sum > hi {
            return Err(Error::Restriction {
                sum: state.sum,
                lo,
                hi,
            });
        }
        let (site, u) = self.draw(rng);
        let old = self.apply(state, site, u);
        if state.sum < lo || state.sum > hi {
            state.set(site, old);
            return Ok(false);
        }
        Ok(true)
    }
}

/// Floor `ceil(N m_-)` of the restricted chain around the largest local
/// maximizer `m_+`; `-N` (no restriction) when no stationary point lies below
/// `m_+`.
pub fn restricted_threshold(params: &ModelParams, n: usize) -> Result<i64> {
    let points = find_stationary_points(params, &RootFindOpts::default())?;
    let m_plus = largest_local_max(&points)
        .ok_or_else(|| Error::InvalidArgument("H has no local maximizer".into()))?
        .m;
    let m_minus = points.iter().rev().map(|s| s.m).find(|&m| m < m_plus);
    Ok(match m_minus {
        Some(m) => ((n as f64 * m).ceil() as i64).max(-(n as i64)),
        None => -(n as i64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Start {
    AllPlus,
    AllMinus,
    Magnetization(i64),
    Config(SpinConfig),
}

impl Start {
    pub fn build(&self, n: usize) -> Result<SpinConfig> {
        match self {
            Start::AllPlus => Ok(SpinConfig::all_plus(n)),
            Start::AllMinus => Ok(SpinConfig::all_minus(n)),
            Start::Magnetization(k) => SpinConfig::with_sum(n, *k),
            Start::Config(c) if c.n() == n && c.is_consistent() => Ok(c.clone()),
            Start::Config(c) => Err(Error::InvalidArgument(format!(
                "start configuration has {} spins, expected {n}",
                c.n()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub params: ModelParams,
    pub n: usize,
    pub start: Start,
    pub steps: u64,
    pub seed: u64,
    pub record_every: u64,
    pub restricted: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub times: Vec<u64>,
    pub mag_sums: Vec<i64>,
    pub accepted: u64,
}

impl Trace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,mag_sum\n");
        for (t, s) in self.times.iter().zip(&self.mag_sums) {
            out.push_str(&format!("{t},{s}\n"));
        }
        out
    }
}

/// Runs one chain and returns its magnetization trace and final state.
pub fn run_chain(spec: &RunSpec) -> Result<(Trace, SpinConfig)> {
    let chain = Glauber::new(spec.params, spec.n)?;
    let mut state = spec.start.build(spec.n)?;
    let every = spec.record_every.max(1);
    let mut rng = RandomStream::new(spec.seed, 0);
    let mut trace = Trace {
        times: vec![0],
        mag_sums: vec![state.sum],
        accepted: 0,
    };
    for t in 1..=spec.steps {
        let kept = match spec.restricted {
            Some(thr) => chain.step_restricted(&mut state, thr, &mut rng)?,
            None => {
                chain.step_full(&mut state, &mut rng);
                true
            }
        };
        trace.accepted += kept as u64;
        if t % every == 0 {
            trace.times.push(t);
            trace.mag_sums.push(state.sum);
        }
    }
    Ok((trace, state))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub params: ModelParams,
    pub n: usize,
    pub start_x: Start,
    pub start_y: Start,
    pub steps: u64,
    pub seed: u64,
    pub replica: u64,
    pub record_every: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingTrace {
    pub times: Vec<u64>,
    pub hamming: Vec<usize>,
    pub untouched: Vec<usize>,
    pub mags_x: Vec<f64>,
    pub mags_y: Vec<f64>,
    pub coalescence: Option<u64>,
}

impl CouplingTrace {
    /// `t,mag_sum,hamming,untouched`, with `mag_sum` of the first chain.
    pub fn to_csv(&self, n: usize) -> String {
        let mut out = String::from("t,mag_sum,hamming,untouched\n");
        for i in 0..self.times.len() {
            let sum = (self.mags_x[i] * n as f64).round() as i64;
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.times[i], sum, self.hamming[i], self.untouched[i]
            ));
        }
        out
    }
}

/// Grand coupling: both chains use the same site and the same uniform at
/// every step.
pub fn run_coupling(spec: &CouplingSpec) -> Result<CouplingTrace> {
    let chain = Glauber::new(spec.params, spec.n)?;
    let mut x = spec.start_x.build(spec.n)?;
    let mut y = spec.start_y.build(spec.n)?;
    let mut rng = RandomStream::new(spec.seed, spec.replica);
    let mut touched = vec![false; spec.n];
    let mut untouched = spec.n;
    let mut dist = x.hamming(&y);
    let every = spec.record_every.max(1);
    let n = spec.n as f64;
    let mut tr = CouplingTrace {
        times: vec![0],
        hamming: vec![dist],
        untouched: vec![untouched],
        mags_x: vec![x.sum as f64 / n],
        mags_y: vec![y.sum as f64 / n],
        coalescence: (dist == 0).then_some(0),
    };
    for t in 1..=spec.steps {
        let (site, u) = chain.draw(&mut rng);
        let before = x.spins[site] != y.spins[site];
        chain.apply(&mut x, site, u);
        chain.apply(&mut y, site, u);
        let after = x.spins[site] != y.spins[site];
        dist = dist + after as usize - before as usize;
        if !touched[site] {
            touched[site] = true;
            untouched -= 1;
        }
        if dist == 0 && tr.coalescence.is_none() {
            tr.coalescence = Some(t);
        }
        if t % every == 0 {
            tr.times.push(t);
            tr.hamming.push(dist);
            tr.untouched.push(untouched);
            tr.mags_x.push(x.sum as f64 / n);
            tr.mags_y.push(y.sum as f64 / n);
        }
    }
    Ok(tr)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetastableSpec {
    pub params: ModelParams,
    pub n: usize,
    /// Window half-width; `None` picks half the distance to the nearest
    /// other stationary point, capped at 0.1.
    pub epsilon: Option<f64>,
    /// Steps per window chain; `None` means `10 N log N`.
    pub burn_steps: Option<u64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerReport {
    pub maximizers: Vec<f64>,
    pub weights: Vec<f64>,
    pub windows: Vec<(i64, i64)>,
    pub epsilon: f64,
    pub burn_steps: u64,
    pub acceptance_rates: Vec<f64>,
    pub final_magnetizations: Vec<f64>,
    pub chosen: usize,
}

/// Heights of local maxima within this gap of the top count as equal.
pub const COEXISTENCE_TOL: f64 = 1e-10;
/// A second maximum closer than this but not equal is rejected as ambiguous.
pub const COEXISTENCE_BAND: f64 = 1e-6;

/// Precomputed windows and mixture weights of the metastable sampler.
#[derive(Debug, Clone)]
pub struct MetastableSampler {
    chain: Glauber,
    maximizers: Vec<f64>,
    weights: Vec<f64>,
    windows: Vec<(i64, i64)>,
    starts: Vec<i64>,
    epsilon: f64,
    burn_steps: u64,
}

fn reachable_at_least(n: usize, k: i64) -> i64 {
    if (k + n as i64).rem_euclid(2) == 0 {
        k
    } else {
        k + 1
    }
}

impl MetastableSampler {
    pub fn new(spec: &MetastableSpec) -> Result<Self> {
        let n = spec.n;
        let chain = Glauber::new(spec.params, n)?;
        let points = find_stationary_points(&spec.params, &RootFindOpts::default())?;
        let maxima: Vec<_> = points
            .iter()
            .filter(|s| s.kind == StationaryKind::LocalMax)
            .collect();
        let top = maxima
            .iter()
            .map(|s| s.h_value)
            .fold(f64::NEG_INFINITY, f64::max);
        for s in &maxima {
            let gap = top - s.h_value;
            if gap > COEXISTENCE_TOL && gap < COEXISTENCE_BAND {
                return Err(Error::NotCoexistence { gap });
            }
        }
        let globals: Vec<_> = maxima
            .into_iter()
            .filter(|s| top - s.h_value <= COEXISTENCE_TOL)
            .collect();
        let maximizers: Vec<f64> = globals.iter().map(|s| s.m).collect();

        let epsilon = match spec.epsilon {
            Some(e) if e > 0.0 => e,
            Some(e) => {
                return Err(Error::InvalidArgument(format!(
                    "epsilon must be > 0, got {e}"
                )))
            }
            None => globals
                .iter()
                .map(|g| {
                    let nearest = points
                        .iter()
                        .filter(|s| s.m != g.m)
                        .map(|s| (s.m - g.m).abs())
                        .fold(f64::INFINITY, f64::min);
                    (0.5 * nearest).min(0.1)
                })
                .fold(f64::INFINITY, f64::min),
        };
        for w in maximizers.windows(2) {
            if w[1] - w[0] <= 2.0 * epsilon {
                return Err(Error::OverlappingWindows { a: w[0], b: w[1] });
            }
        }

        let ni = n as i64;
        let nf = n as f64;
        let mut windows = Vec::new();
        let mut starts = Vec::new();
        for &m in &maximizers {
            let lo = reachable_at_least(n, ((nf * (m - epsilon)).ceil() as i64).max(-ni));
            let mut hi = ((nf * (m + epsilon)).floor() as i64).min(ni);
            if (hi + ni).rem_euclid(2) != 0 {
                hi -= 1;
            }
            if lo > hi {
                return Err(Error::InvalidArgument(format!(
                    "window of half-width {epsilon} around {m} holds no level for N = {n}"
                )));
            }
            // nearest reachable level to N m
            let target = nf * m;
            let below = {
                let f = target.floor() as i64;
                if (f + ni).rem_euclid(2) == 0 {
                    f
                } else {
                    f - 1
                }
            };
            let start = if (target - below as f64) <= (below + 2) as f64 - target {
                below
            } else {
                below + 2
            };
            windows.push((lo, hi));
            starts.push(start.clamp(lo, hi));
        }

        let raw: Vec<f64> = globals
            .iter()
            .map(|s| ((s.m * s.m - 1.0) * s.h2_value).powf(-0.5))
            .collect();
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / total).collect();

        let burn_steps = spec
            .burn_steps
            .unwrap_or_else(|| (10.0 * nf * nf.ln().max(1.0)).ceil() as u64);
        Ok(Self {
            chain,
            maximizers,
            weights,
            windows,
            starts,
            epsilon,
            burn_steps,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn windows(&self) -> &[(i64, i64)] {
        &self.windows
    }

    /// One sampler output: every window chain runs `burn_steps`, then the
    /// mixture index picks which final state to return.
    pub fn sample(&self, seed: u64) -> Result<(SpinConfig, SamplerReport)> {
        let n = self.chain.n();
        let runs: Vec<(SpinConfig, u64)> = (0..self.windows.len())
            .into_par_iter()
            .map(|i| {
                let (lo, hi) = self.windows[i];
                let mut rng = RandomStream::new(seed, i as u64);
                let mut state = SpinConfig::with_sum(n, self.starts[i])?;
                let mut kept = 0;
                for _ in 0..self.burn_steps {
                    kept += self.chain.step_window(&mut state, lo, hi, &mut rng)? as u64;
                }
                Ok((state, kept))
            })
            .collect::<Result<_>>()?;

        let mut pick = RandomStream::new(seed, self.windows.len() as u64);
        let u = pick.uniform();
        let mut acc = 0.0;
        let mut chosen = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                chosen = i;
                break;
            }
        }
        let steps = self.burn_steps.max(1) as f64;
        let report = SamplerReport {
            maximizers: self.maximizers.clone(),
            weights: self.weights.clone(),
            windows: self.windows.clone(),
            epsilon: self.epsilon,
            burn_steps: self.burn_steps,
            acceptance_rates: runs.iter().map(|(_, k)| *k as f64 / steps).collect(),
            final_magnetizations: runs.iter().map(|(s, _)| s.magnetization()).collect(),
            chosen,
        };
        let state = runs.into_iter().nth(chosen).unwrap().0;
        Ok((state, report))
    }
}

pub fn metastable_sample(spec: &MetastableSpec) -> Result<(SpinConfig, SamplerReport)> {
    MetastableSampler::new(spec)?.sample(spec.seed)
}
