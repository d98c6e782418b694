//! Exact magnetization laws, TV evolution of the projected chain, mixing
//! times, bottleneck ratios, hitting times and scaling fits.
//!
//! Two laws over the sum levels `k = -N, -N+2, ..., N` appear here.
//! [`stationary_mag`] is the Curie-Weiss measure `C(N, j) exp{N(beta c^p + h c)}`.
//! [`invariant_mag`] is the reversible law of the heat-bath kernel, built
//! from the product of `p_up / p_down` ratios. The kernel uses the
//! mean-field field `p beta c^(p-1) + h` rather than exact energy
//! differences, so the two differ by an O(1) factor in the weights.
//!
//! Mixing times and bottleneck ratios are measured against the Curie-Weiss
//! law by default, matching the usual `t_mix` definition; [`Target::Kernel`]
//! measures against the kernel's own stationary law instead, the only law
//! the chain actually converges to.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{check_level, kernel_row, restricted_threshold, Glauber, SpinConfig};
use crate::error::{Error, Result};
use crate::potential::ModelParams;
use crate::rng::RandomStream;

#[inline]
fn ln_choose(n: usize, j: usize) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(j as f64 + 1.0) - libm::lgamma((n - j) as f64 + 1.0)
}

#[inline]
fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log(1 + e^x)` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn level_of(n: usize, j: usize) -> i64 {
    2 * j as i64 - n as i64
}

#[inline]
fn index_of(n: usize, k: i64) -> usize {
    ((k + n as i64) / 2) as usize
}

/// A law over the `N + 1` sum levels, indexed by the number of `+1` spins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagDistribution {
    pub n: usize,
    pub log_weights: Vec<f64>,
    pub probs: Vec<f64>,
    /// `log sum exp(log_weights)`.
    pub log_z_shifted: f64,
}

impl MagDistribution {
    pub fn from_log_weights(n: usize, log_weights: Vec<f64>) -> Self {
        let log_z = log_sum_exp(&log_weights);
        let probs = log_weights.iter().map(|w| (w - log_z).exp()).collect();
        Self {
            n,
            log_weights,
            probs,
            log_z_shifted: log_z,
        }
    }

    pub fn levels(&self) -> impl Iterator<Item = i64> + '_ {
        (0..=self.n).map(|j| level_of(self.n, j))
    }

    pub fn prob_of_sum(&self, k: i64) -> f64 {
        if check_level(self.n, k).is_err() {
            return 0.0;
        }
        self.probs[index_of(self.n, k)]
    }

    pub fn argmax_sum(&self) -> i64 {
        let j = (0..=self.n)
            .max_by(|&a, &b| self.probs[a].total_cmp(&self.probs[b]))
            .unwrap_or(0);
        level_of(self.n, j)
    }

    /// The law conditioned on sums in `[lo, hi]`. The full range returns an
    /// unchanged copy so restricted and plain computations agree bit for bit.
    pub fn conditioned(&self, lo: i64, hi: i64) -> Result<Self> {
        let (jl, jh) = window_indices(self.n, lo, hi)?;
        if jl == 0 && jh == self.n {
            return Ok(self.clone());
        }
        let lw = (0..=self.n)
            .map(|j| {
                if j >= jl && j <= jh {
                    self.log_weights[j]
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        Ok(Self::from_log_weights(self.n, lw))
    }

    pub fn tv(&self, other: &[f64]) -> f64 {
        tv_distance(&self.probs, other)
    }
}

pub fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Index range of reachable levels inside `[lo, hi]`.
fn window_indices(n: usize, lo: i64, hi: i64) -> Result<(usize, usize)> {
    let ni = n as i64;
    let lo = lo.max(-ni);
    let hi = hi.min(ni);
    let jl = (lo + ni + 1).div_euclid(2);
    let jh = (hi + ni).div_euclid(2);
    if jl > jh {
        return Err(Error::InvalidArgument(format!(
            "no reachable sum level in [{lo}, {hi}] for N = {n}"
        )));
    }
    Ok((jl as usize, jh as usize))
}

/// The Curie-Weiss law of the sum: `log C(N, j) + N (beta c^p + h c)`.
pub fn stationary_mag(params: &ModelParams, n: usize) -> Result<MagDistribution> {
    params.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    let nf = n as f64;
    let lw = (0..=n)
        .map(|j| {
            let c = level_of(n, j) as f64 / nf;
            ln_choose(n, j) + nf * (params.beta * c.powi(params.p as i32) + params.h * c)
        })
        .collect();
    Ok(MagDistribution::from_log_weights(n, lw))
}

/// The reversible law of the magnetization kernel, anchored to agree with
/// [`stationary_mag`] at the all-minus level.
pub fn invariant_mag(params: &ModelParams, n: usize) -> Result<MagDistribution> {
    params.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    let nf = n as f64;
    let mut lw = Vec::with_capacity(n + 1);
    let mut acc = nf * (params.beta * (-1.0f64).powi(params.p as i32) - params.h);
    lw.push(acc);
    for j in 0..n {
        // p_up(j) / p_down(j+1) = (N-j)/(j+1) * sig+(a_j) / sig-(a_{j+1})
        let a0 = params.field(level_of(n, j) as f64 / nf);
        let a1 = params.field(level_of(n, j + 1) as f64 / nf);
        acc += ((n - j) as f64 / (j + 1) as f64).ln() - softplus(-2.0 * a0) + softplus(2.0 * a1);
        lw.push(acc);
    }
    Ok(MagDistribution::from_log_weights(n, lw))
}

/// Reference law for TV distances and conductance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Target {
    #[default]
    CurieWeiss,
    Kernel,
}

impl Target {
    pub fn law(self, params: &ModelParams, n: usize) -> Result<MagDistribution> {
        match self {
            Target::CurieWeiss => stationary_mag(params, n),
            Target::Kernel => invariant_mag(params, n),
        }
    }
}

/// The projected birth-death kernel, optionally confined to a window of
/// levels with out-of-window moves turned into self-loops.
#[derive(Debug, Clone)]
pub struct MagChain {
    n: usize,
    up: Vec<f64>,
    down: Vec<f64>,
    stay: Vec<f64>,
    lo: usize,
    hi: usize,
}

impl MagChain {
    pub fn new(params: &ModelParams, n: usize) -> Result<Self> {
        params.validate()?;
        if n == 0 {
            return Err(Error::InvalidArgument("N must be positive".into()));
        }
        let rows: Vec<_> = (0..=n)
            .map(|j| kernel_row(params, n, level_of(n, j)))
            .collect();
        Ok(Self {
            n,
            up: rows.iter().map(|r| r.p_up).collect(),
            down: rows.iter().map(|r| r.p_down).collect(),
            stay: rows.iter().map(|r| r.p_stay).collect(),
            lo: 0,
            hi: n,
        })
    }

    /// Rejects moves leaving `[lo, hi]`.
    pub fn windowed(mut self, lo: i64, hi: i64) -> Result<Self> {
        let (jl, jh) = window_indices(self.n, lo, hi)?;
        self.down[jl] = 0.0;
        self.stay[jl] = 1.0 - self.up[jl] - self.down[jl];
        self.up[jh] = 0.0;
        self.stay[jh] = 1.0 - self.up[jh] - self.down[jh];
        self.lo = jl;
        self.hi = jh;
        Ok(self)
    }

    pub fn restricted(self, threshold: i64) -> Result<Self> {
        let n = self.n as i64;
        self.windowed(threshold, n)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn window(&self) -> (i64, i64) {
        (level_of(self.n, self.lo), level_of(self.n, self.hi))
    }

    pub fn p_up(&self, j: usize) -> f64 {
        self.up[j]
    }

    pub fn p_down(&self, j: usize) -> f64 {
        self.down[j]
    }

    /// `out = mu P`.
    pub fn push(&self, mu: &[f64], out: &mut [f64]) {
        let (lo, hi) = (self.lo, self.hi);
        for j in lo..=hi {
            let mut v = mu[j] * self.stay[j];
            if j > lo {
                v += mu[j - 1] * self.up[j - 1];
            }
            if j < hi {
                v += mu[j + 1] * self.down[j + 1];
            }
            out[j] = v;
        }
    }

    /// One step of the level chain from index `j` using a single uniform.
    #[inline]
    pub fn sample_step(&self, j: usize, u: f64) -> usize {
        if u < self.up[j] {
            j + 1
        } else if u < self.up[j] + self.down[j] {
            j - 1
        } else {
            j
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TVCurve {
    pub start_k: i64,
    pub ts: Vec<u64>,
    pub tv: Vec<f64>,
    pub capped: bool,
}

/// Pushes a point mass forward until TV drops to `eps_stop` or `t_max`
/// steps have been taken.
pub fn evolve_tv(
    chain: &MagChain,
    target: &MagDistribution,
    start_k: i64,
    t_max: u64,
    eps_stop: f64,
) -> Result<TVCurve> {
    let n = chain.n();
    check_level(n, start_k)?;
    let (lo, hi) = chain.window();
    if start_k < lo || start_k > hi {
        return Err(Error::Restriction {
            sum: start_k,
            lo,
            hi,
        });
    }
    let mut mu = vec![0.0; n + 1];
    mu[index_of(n, start_k)] = 1.0;
    let mut next = vec![0.0; n + 1];
    let mut curve = TVCurve {
        start_k,
        ts: vec![0],
        tv: vec![target.tv(&mu)],
        capped: false,
    };
    let mut t = 0;
    while *curve.tv.last().unwrap() > eps_stop {
        if t == t_max {
            curve.capped = true;
            break;
        }
        chain.push(&mu, &mut next);
        std::mem::swap(&mut mu, &mut next);
        t += 1;
        curve.ts.push(t);
        curve.tv.push(target.tv(&mu));
    }
    Ok(curve)
}

/// TV from a point mass at `start_k` to the Curie-Weiss law.
pub fn tv_curve(
    params: &ModelParams,
    n: usize,
    start_k: i64,
    t_max: u64,
    eps_stop: f64,
) -> Result<TVCurve> {
    tv_curve_to(params, n, start_k, t_max, eps_stop, Target::CurieWeiss)
}

pub fn tv_curve_to(
    params: &ModelParams,
    n: usize,
    start_k: i64,
    t_max: u64,
    eps_stop: f64,
    target: Target,
) -> Result<TVCurve> {
    let chain = MagChain::new(params, n)?;
    evolve_tv(&chain, &target.law(params, n)?, start_k, t_max, eps_stop)
}

fn first_crossing(
    chain: &MagChain,
    target: &MagDistribution,
    start_k: i64,
    eps: f64,
    cap: u64,
) -> Result<Option<u64>> {
    let n = chain.n();
    let mut mu = vec![0.0; n + 1];
    mu[index_of(n, start_k)] = 1.0;
    let mut next = vec![0.0; n + 1];
    for t in 0..=cap {
        if target.tv(&mu) <= eps {
            return Ok(Some(t));
        }
        if t < cap {
            chain.push(&mu, &mut next);
            std::mem::swap(&mut mu, &mut next);
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixMethod {
    ExactProjected,
    MonteCarlo,
}

impl MixMethod {
    pub fn label(self) -> &'static str {
        match self {
            MixMethod::ExactProjected => "exact",
            MixMethod::MonteCarlo => "montecarlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixOptions {
    pub replicas: usize,
    /// TV checkpoint spacing for Monte-Carlo runs; `None` is `max(1, N/10)`.
    pub stride: Option<u64>,
    pub seed: u64,
    pub target: Target,
}

impl Default for MixOptions {
    fn default() -> Self {
        Self {
            replicas: 10_000,
            stride: None,
            seed: 0,
            target: Target::CurieWeiss,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartOutcome {
    pub start_k: i64,
    pub t_mix: u64,
    pub capped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub params: ModelParams,
    pub n: usize,
    pub eps: f64,
    /// Worst first-crossing time over the starts, or `cap` when capped.
    pub t_mix: u64,
    pub capped: bool,
    pub cap: u64,
    pub method: MixMethod,
    pub starts: Vec<StartOutcome>,
    /// Noise scale of the Monte-Carlo TV estimate.
    pub stat_err: Option<f64>,
    pub threshold: Option<i64>,
    pub target: Target,
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidEps(eps));
    }
    Ok(())
}

fn summarize(outcomes: Vec<(i64, Option<u64>)>, cap: u64) -> (u64, bool, Vec<StartOutcome>) {
    let starts: Vec<StartOutcome> = outcomes
        .into_iter()
        .map(|(k, t)| StartOutcome {
            start_k: k,
            t_mix: t.unwrap_or(cap),
            capped: t.is_none(),
        })
        .collect();
    let capped = starts.iter().any(|s| s.capped);
    let t_mix = if capped {
        cap
    } else {
        starts.iter().map(|s| s.t_mix).max().unwrap_or(0)
    };
    (t_mix, capped, starts)
}

/// `t_mix(eps)` with worst start among all-plus and all-minus.
pub fn mixing_time(
    params: &ModelParams,
    n: usize,
    eps: f64,
    cap: u64,
    method: MixMethod,
) -> Result<MixingReport> {
    mixing_time_with(params, n, eps, cap, method, &MixOptions::default())
}

pub fn mixing_time_with(
    params: &ModelParams,
    n: usize,
    eps: f64,
    cap: u64,
    method: MixMethod,
    opts: &MixOptions,
) -> Result<MixingReport> {
    check_eps(eps)?;
    let ni = n as i64;
    let target = opts.target.law(params, n)?;
    let starts = [ni, -ni];
    let (outcomes, stat_err) = match method {
        MixMethod::ExactProjected => {
            let chain = MagChain::new(params, n)?;
            let out = starts
                .par_iter()
                .map(|&k| Ok((k, first_crossing(&chain, &target, k, eps, cap)?)))
                .collect::<Result<Vec<_>>>()?;
            (out, None)
        }
        MixMethod::MonteCarlo => {
            let chain = Glauber::new(*params, n)?;
            let mut out = Vec::new();
            let mut err: f64 = 0.0;
            for (i, &k) in starts.iter().enumerate() {
                let (t, e) = monte_carlo_crossing(&chain, &target, k, eps, cap, opts, i as u64)?;
                out.push((k, t));
                err = err.max(e);
            }
            (out, Some(err))
        }
    };
    let (t_mix, capped, starts) = summarize(outcomes, cap);
    Ok(MixingReport {
        params: *params,
        n,
        eps,
        t_mix,
        capped,
        cap,
        method,
        starts,
        stat_err,
        threshold: None,
        target: opts.target,
    })
}

/// Lockstep replicas of the full spin chain; TV of the empirical sum
/// histogram is checked every `stride` steps.
fn monte_carlo_crossing(
    chain: &Glauber,
    target: &MagDistribution,
    start_k: i64,
    eps: f64,
    cap: u64,
    opts: &MixOptions,
    start_slot: u64,
) -> Result<(Option<u64>, f64)> {
    let n = chain.n();
    let r = opts.replicas.max(1);
    let stride = opts.stride.unwrap_or((n as u64 / 10).max(1)).max(1);
    let noise = 0.5
        * target
            .probs
            .iter()
            .map(|q| (q * (1.0 - q) / r as f64).sqrt())
            .sum::<f64>();
    let start = SpinConfig::with_sum(n, start_k)?;
    let mut reps: Vec<(SpinConfig, RandomStream)> = (0..r)
        .map(|i| {
            (
                start.clone(),
                RandomStream::new(opts.seed, start_slot * r as u64 + i as u64),
            )
        })
        .collect();
    let mut t = 0u64;
    loop {
        let mut hist = vec![0.0; n + 1];
        for (s, _) in &reps {
            hist[index_of(n, s.sum())] += 1.0 / r as f64;
        }
        if target.tv(&hist) <= eps {
            return Ok((Some(t), noise));
        }
        if t >= cap {
            return Ok((None, noise));
        }
        let block = stride.min(cap - t);
        reps.par_iter_mut().for_each(|(s, rng)| {
            for _ in 0..block {
                chain.step_full(s, rng);
            }
        });
        t += block;
    }
}

/// Mixing time of the chain restricted to sums `>= ceil(N m_-)`, with
/// worst start among the threshold level and all-plus.
pub fn restricted_mixing_time(
    params: &ModelParams,
    n: usize,
    eps: f64,
    cap: u64,
) -> Result<MixingReport> {
    check_eps(eps)?;
    let thr = restricted_threshold(params, n)?;
    restricted_mixing_time_at(params, n, eps, cap, thr, Target::CurieWeiss)
}

pub fn restricted_mixing_time_at(
    params: &ModelParams,
    n: usize,
    eps: f64,
    cap: u64,
    threshold: i64,
    target: Target,
) -> Result<MixingReport> {
    check_eps(eps)?;
    let ni = n as i64;
    let chain = MagChain::new(params, n)?.restricted(threshold)?;
    let law = target.law(params, n)?.conditioned(threshold, ni)?;
    let floor = chain.window().0;
    let starts = [ni, floor];
    let outcomes = starts
        .par_iter()
        .map(|&k| Ok((k, first_crossing(&chain, &law, k, eps, cap)?)))
        .collect::<Result<Vec<_>>>()?;
    let (t_mix, capped, starts) = summarize(outcomes, cap);
    Ok(MixingReport {
        params: *params,
        n,
        eps,
        t_mix,
        capped,
        cap,
        method: MixMethod::ExactProjected,
        starts,
        stat_err: None,
        threshold: Some(threshold),
        target,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutSide {
    /// `A = {sum <= k}`
    Lower,
    /// `A = {sum > k}`
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BottleneckCut {
    /// Top level of the lower block.
    pub k: i64,
    pub side: CutSide,
    pub q: f64,
    pub pi_a: f64,
    pub ratio: f64,
    pub log_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BottleneckReport {
    pub n: usize,
    pub cuts: Vec<BottleneckCut>,
    pub phi_star: f64,
    pub log_phi_star: f64,
    pub argmin_k: i64,
}

/// Bottleneck ratio over interval cuts. Each cut between levels `k` and
/// `k + 2` is charged to whichever side has mass at most 1/2, so both
/// metastable wells are probed whichever of them is heavier.
pub fn bottleneck(params: &ModelParams, n: usize) -> Result<BottleneckReport> {
    bottleneck_with(params, n, Target::CurieWeiss)
}

pub fn bottleneck_with(params: &ModelParams, n: usize, target: Target) -> Result<BottleneckReport> {
    if n < 2 {
        return Err(Error::InvalidArgument("bottleneck needs N >= 2".into()));
    }
    let pi = target.law(params, n)?;
    let lw: Vec<f64> = pi
        .log_weights
        .iter()
        .map(|w| w - pi.log_z_shifted)
        .collect();
    let mut lower = vec![f64::NEG_INFINITY; n + 1];
    let mut acc = f64::NEG_INFINITY;
    for j in 0..=n {
        acc = log_add(acc, lw[j]);
        lower[j] = acc;
    }
    // upper[j] = log pi(sum levels > j)
    let mut upper = vec![f64::NEG_INFINITY; n + 1];
    let mut acc = f64::NEG_INFINITY;
    for j in (0..n).rev() {
        acc = log_add(acc, lw[j + 1]);
        upper[j] = acc;
    }
    let half = 0.5f64.ln();
    let mut cuts = Vec::with_capacity(n);
    for j in 0..n {
        // flow out of A: up from the top of the lower block, or down from
        // the bottom of the upper block
        let (side, log_a, log_q) = if lower[j] <= half {
            let up = kernel_row(params, n, level_of(n, j)).p_up;
            (CutSide::Lower, lower[j], lw[j] + up.ln())
        } else {
            let down = kernel_row(params, n, level_of(n, j + 1)).p_down;
            (CutSide::Upper, upper[j], lw[j + 1] + down.ln())
        };
        let log_ratio = log_q - log_a;
        cuts.push(BottleneckCut {
            k: level_of(n, j),
            side,
            q: log_q.exp(),
            pi_a: log_a.exp(),
            ratio: log_ratio.exp(),
            log_ratio,
        });
    }
    let best = cuts
        .iter()
        .min_by(|a, b| a.log_ratio.total_cmp(&b.log_ratio))
        .expect("N >= 2 gives at least one cut");
    Ok(BottleneckReport {
        n,
        phi_star: best.ratio,
        log_phi_star: best.log_ratio,
        argmin_k: best.k,
        cuts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingSpec {
    pub params: ModelParams,
    pub n: usize,
    pub start_k: i64,
    /// First time the sum reaches at least this level.
    pub target_k: i64,
    /// Optional restriction floor.
    pub floor: Option<i64>,
    pub replicas: usize,
    pub cap: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingReport {
    pub start: i64,
    pub target: i64,
    pub mean_steps: f64,
    pub replicas: usize,
    pub std_err: f64,
    /// Replicas that had not hit by `cap`; they enter the mean at `cap`.
    pub capped: usize,
}

/// Upward hitting time of the magnetization chain, by simulation.
pub fn hitting_time(spec: &HittingSpec) -> Result<HittingReport> {
    let n = spec.n;
    check_level(n, spec.start_k)?;
    if spec.replicas == 0 {
        return Err(Error::InvalidArgument("replicas must be positive".into()));
    }
    let mut chain = MagChain::new(&spec.params, n)?;
    if let Some(thr) = spec.floor {
        chain = chain.restricted(thr)?;
        let (lo, hi) = chain.window();
        if spec.start_k < lo {
            return Err(Error::Restriction {
                sum: spec.start_k,
                lo,
                hi,
            });
        }
    }
    let target = spec.target_k.min(n as i64);
    let times: Vec<(u64, bool)> = (0..spec.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = RandomStream::new(spec.seed, r as u64);
            let mut j = index_of(n, spec.start_k);
            let mut t = 0;
            while level_of(n, j) < target {
                if t == spec.cap {
                    return (t, true);
                }
                j = chain.sample_step(j, rng.uniform());
                t += 1;
            }
            (t, false)
        })
        .collect();
    let r = times.len() as f64;
    let mean = times.iter().map(|(t, _)| *t as f64).sum::<f64>() / r;
    let var = times
        .iter()
        .map(|(t, _)| (*t as f64 - mean).powi(2))
        .sum::<f64>()
        / (r - 1.0).max(1.0);
    Ok(HittingReport {
        start: spec.start_k,
        target,
        mean_steps: mean,
        replicas: spec.replicas,
        std_err: (var / r).sqrt(),
        capped: times.iter().filter(|(_, c)| *c).count(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares line through `(log x, log y)`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<FitReport> {
    if xs.len() != ys.len() {
        return Err(Error::FitRefused("x and y lengths differ".into()));
    }
    if xs.len() < 3 {
        return Err(Error::FitRefused(format!(
            "need at least 3 points, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::FitRefused(
            "all values must be positive and finite".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::FitRefused("x values are all equal".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(FitReport {
        slope,
        intercept: my - slope * mx,
        r2,
    })
}

pub fn exponent_fit(ns: &[usize], times: &[f64]) -> Result<FitReport> {
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    loglog_fit(&xs, times)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub t_mix: u64,
    pub capped: bool,
    pub method: MixMethod,
}

impl From<&MixingReport> for SweepRow {
    fn from(r: &MixingReport) -> Self {
        Self {
            n: r.n,
            t_mix: r.t_mix,
            capped: r.capped,
            method: r.method,
        }
    }
}

/// Fits the growth exponent of a sweep; capped rows make the fit refuse.
pub fn fit_sweep(rows: &[SweepRow]) -> Result<FitReport> {
    if let Some(r) = rows.iter().find(|r| r.capped) {
        return Err(Error::FitRefused(format!(
            "N = {} is capped at {}",
            r.n, r.t_mix
        )));
    }
    let ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    let ts: Vec<f64> = rows.iter().map(|r| r.t_mix as f64).collect();
    exponent_fit(&ns, &ts)
}

/// Runs `mixing_time` over several sizes in parallel; rows come back sorted
/// by `N`.
pub fn mixing_sweep(
    params: &ModelParams,
    ns: &[usize],
    eps: f64,
    cap: u64,
    method: MixMethod,
    opts: &MixOptions,
) -> Result<Vec<SweepRow>> {
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.par_iter()
        .map(|&n| mixing_time_with(params, n, eps, cap, method, opts).map(|r| SweepRow::from(&r)))
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("N,t_mix,capped,method\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.n,
            r.t_mix,
            r.capped,
            r.method.label()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: u32, b: f64, h: f64) -> ModelParams {
        ModelParams::new(p, b, h).unwrap()
    }

    #[test]
    fn probabilities_are_normalized() {
        for pr in [params(4, 0.51, 0.184), params(3, 2.0, -1.0)] {
            for d in [
                stationary_mag(&pr, 300).unwrap(),
                invariant_mag(&pr, 300).unwrap(),
            ] {
                assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invariant_law_is_reversible() {
        let pr = params(4, 0.51, 0.184);
        let n = 200;
        let pi = invariant_mag(&pr, n).unwrap();
        let chain = MagChain::new(&pr, n).unwrap();
        for j in 0..n {
            let lhs = pi.probs[j] * chain.p_up(j);
            let rhs = pi.probs[j + 1] * chain.p_down(j + 1);
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(rhs), "j = {j}");
        }
    }

    #[test]
    fn tv_starts_at_complement_of_start_mass() {
        let pr = params(4, 1e-9, 0.0);
        let pi = stationary_mag(&pr, 20).unwrap();
        let c = tv_curve(&pr, 20, 0, 0, 0.0).unwrap();
        assert!((c.tv[0] - (1.0 - pi.prob_of_sum(0))).abs() < 1e-15);
        assert!(c.capped);
    }

    #[test]
    fn tv_is_monotone() {
        let c = tv_curve_to(&params(4, 0.51, 0.184), 60, 60, 3000, 0.0, Target::Kernel).unwrap();
        assert!(c.tv.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn invalid_eps_is_rejected() {
        let pr = params(4, 0.054, 0.5);
        for eps in [0.0, 0.5, -1.0, f64::NAN] {
            assert!(matches!(
                mixing_time(&pr, 20, eps, 10, MixMethod::ExactProjected),
                Err(Error::InvalidEps(_))
            ));
        }
    }

    #[test]
    fn capped_runs_report_cap() {
        let r = mixing_time(
            &params(4, 0.51, 0.184),
            100,
            0.35,
            500,
            MixMethod::ExactProjected,
        )
        .unwrap();
        assert!(r.capped);
        assert_eq!(r.t_mix, 500);
    }

    #[test]
    fn no_restriction_is_bit_exact() {
        let pr = params(4, 0.054, 0.5);
        let a = mixing_time(&pr, 120, 0.35, 100_000, MixMethod::ExactProjected).unwrap();
        let b = restricted_mixing_time(&pr, 120, 0.35, 100_000).unwrap();
        assert_eq!(b.threshold, Some(-120));
        assert_eq!(a.t_mix, b.t_mix);
        let full = tv_curve(&pr, 120, 120, 400, 0.0).unwrap();
        let chain = MagChain::new(&pr, 120).unwrap().restricted(-120).unwrap();
        let target = stationary_mag(&pr, 120)
            .unwrap()
            .conditioned(-120, 120)
            .unwrap();
        let restricted = evolve_tv(&chain, &target, 120, 400, 0.0).unwrap();
        assert_eq!(full, restricted);
    }

    #[test]
    fn monte_carlo_agrees_with_exact_at_regular_point() {
        let pr = params(4, 0.054, 0.5);
        let exact = mixing_time(&pr, 60, 0.35, 100_000, MixMethod::ExactProjected).unwrap();
        let opts = MixOptions {
            replicas: 4000,
            stride: Some(1),
            seed: 3,
            ..Default::default()
        };
        let mc = mixing_time_with(&pr, 60, 0.35, 100_000, MixMethod::MonteCarlo, &opts).unwrap();
        let rel = (mc.t_mix as f64 - exact.t_mix as f64).abs() / exact.t_mix as f64;
        assert!(rel < 0.2, "exact {} vs mc {}", exact.t_mix, mc.t_mix);
        assert!(mc.stat_err.unwrap() > 0.0);
    }

    #[test]
    fn bottleneck_min_matches_listed_cuts() {
        let r = bottleneck(&params(4, 0.51, 0.184), 100).unwrap();
        let m = r.cuts.iter().map(|c| c.ratio).fold(f64::INFINITY, f64::min);
        assert_eq!(m, r.phi_star);
        assert!(r
            .cuts
            .iter()
            .all(|c| c.ratio > 0.0 && c.pi_a <= 0.5 + 1e-12));
    }

    #[test]
    fn fit_recovers_power() {
        let ns = [80, 160, 320, 640];
        let ts: Vec<f64> = ns.iter().map(|&n| (n as f64).powf(1.5)).collect();
        let f = exponent_fit(&ns, &ts).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-10);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_refuses_capped_rows() {
        let rows = [80, 160, 320].map(|n| SweepRow {
            n,
            t_mix: 10_000,
            capped: n == 320,
            method: MixMethod::ExactProjected,
        });
        assert!(matches!(fit_sweep(&rows), Err(Error::FitRefused(_))));
        assert!(exponent_fit(&[1, 2], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn hitting_from_target_is_zero() {
        let rep = hitting_time(&HittingSpec {
            params: params(4, 0.51, 0.184),
            n: 50,
            start_k: 40,
            target_k: 40,
            floor: None,
            replicas: 10,
            cap: 100,
            seed: 0,
        })
        .unwrap();
        assert_eq!(rep.mean_steps, 0.0);
    }

    #[test]
    fn sweep_csv_header() {
        let csv = sweep_csv(&[SweepRow {
            n: 10,
            t_mix: 5,
            capped: false,
            method: MixMethod::MonteCarlo,
        }]);
        assert_eq!(csv, "N,t_mix,capped,method\n10,5,false,montecarlo\n");
    }
}
