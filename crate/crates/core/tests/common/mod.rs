//! Independent reference computations for the integration tests. Nothing
//! here calls into the library's numerics; only plain closed forms,
//! bisection and brute-force enumeration over all 2^N spin states.

#![allow(dead_code, clippy::excessive_precision)]

/// High-precision reference values (40-digit evaluation, rounded).
pub mod constants {
    pub const BETA_HAT_3: f64 = 0.433_012_701_892_219_323_381_861_6;
    pub const H_HAT_3: f64 = 0.225_466_246_570_189_030_930_661_6;
    pub const H_HAT_4: f64 = 0.409_969_066_228_511_342_298_713_1;
    pub const BETA_HAT_5: f64 = 0.268_957_176_819_959_505_915_226_8;
    pub const H_HAT_5: f64 = 0.547_595_616_171_853_162_716_232_4;
    pub const BETA_TILDE_4: f64 = 0.688_801_373_948_790_991_54;
    pub const BETA_PRIME_4: f64 = 0.504_249_509_916_090_444_27;
}

pub fn entropy(x: f64) -> f64 {
    0.5 * ((1.0 + x) * (1.0 + x).ln() + (1.0 - x) * (1.0 - x).ln())
}

pub fn h_fn(p: u32, beta: f64, h: f64, x: f64) -> f64 {
    beta * x.powi(p as i32) + h * x - 0.5 * ((1.0 + x) * x.ln_1p() + (1.0 - x) * (-x).ln_1p())
}

pub fn h_prime(p: u32, beta: f64, h: f64, x: f64) -> f64 {
    p as f64 * beta * x.powi(p as i32 - 1) + h - 0.5 * ((1.0 + x) / (1.0 - x)).ln()
}

pub fn h_second(p: u32, beta: f64, x: f64) -> f64 {
    let p = p as f64;
    p * (p - 1.0) * beta * x.powf(p - 2.0) - 1.0 / (1.0 - x * x)
}

pub fn lambda(p: u32, beta: f64, h: f64, x: f64) -> f64 {
    (p as f64 * beta * x.powi(p as i32 - 1) + h).tanh()
}

pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    assert!(fa * f(b) <= 0.0, "bisect: no sign change on [{a}, {b}]");
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// All roots of `H'` from a fine sign scan plus bisection.
pub fn stationary_points(p: u32, beta: f64, h: f64) -> Vec<f64> {
    let m = 400_000;
    let lo = -1.0 + 1e-9;
    let hi = 1.0 - 1e-9;
    let xs: Vec<f64> = (0..=m)
        .map(|i| lo + (hi - lo) * i as f64 / m as f64)
        .collect();
    let f = |x: f64| h_prime(p, beta, h, x);
    let mut out = Vec::new();
    for w in xs.windows(2) {
        if f(w[0]) * f(w[1]) < 0.0 {
            out.push(bisect(f, w[0], w[1]));
        }
    }
    out
}

/// Heat-bath probability of a `+1` spin at total sum `k`.
pub fn plus_prob(p: u32, beta: f64, h: f64, n: usize, k: i64) -> f64 {
    let c = k as f64 / n as f64;
    let a = p as f64 * beta * c.powi(p as i32 - 1) + h;
    (1.0 + a.tanh()) / 2.0
}

fn config_sum(n: usize, s: usize) -> i64 {
    2 * s.count_ones() as i64 - n as i64
}

/// Curie-Weiss law of the sum, by summing the weight of every configuration.
pub fn enumerate_gibbs(p: u32, beta: f64, h: f64, n: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut logs = Vec::with_capacity(1 << n);
    for s in 0..(1usize << n) {
        let c = config_sum(n, s) as f64 / nf;
        logs.push((
            s.count_ones() as usize,
            nf * (beta * c.powi(p as i32) + h * c),
        ));
    }
    let m = logs.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let mut levels = vec![0.0; n + 1];
    for (j, l) in logs {
        levels[j] += (l - m).exp();
    }
    let z: f64 = levels.iter().sum();
    levels.iter().map(|v| v / z).collect()
}

/// The spin chain on all 2^N states, one sparse row per state.
pub struct FullChain {
    pub n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl FullChain {
    pub fn new(p: u32, beta: f64, h: f64, n: usize) -> Self {
        let rows = (0..(1usize << n))
            .map(|s| {
                let f = plus_prob(p, beta, h, n, config_sum(n, s));
                let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * n);
                for i in 0..n {
                    row.push((s | (1 << i), f / n as f64));
                    row.push((s & !(1 << i), (1.0 - f) / n as f64));
                }
                row
            })
            .collect();
        Self { n, rows }
    }

    pub fn states(&self) -> usize {
        1 << self.n
    }

    pub fn step(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; mu.len()];
        for (s, row) in self.rows.iter().enumerate() {
            if mu[s] == 0.0 {
                continue;
            }
            for &(t, q) in row {
                out[t] += mu[s] * q;
            }
        }
        out
    }

    /// Spreads a law over sum levels uniformly across each level set.
    pub fn lift(&self, levels: &[f64]) -> Vec<f64> {
        let n = self.n as u64;
        let choose = |j: u64| (0..j).fold(1.0f64, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
        (0..self.states())
            .map(|s| {
                let j = s.count_ones() as u64;
                levels[j as usize] / choose(j)
            })
            .collect()
    }

    pub fn project(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n + 1];
        for (s, v) in mu.iter().enumerate() {
            out[s.count_ones() as usize] += v;
        }
        out
    }
}

pub fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Birth-death stationary law from the kernel triples, via the explicit
/// product of up/down ratios in linear space (fine for small N).
pub fn birth_death_stationary(p: u32, beta: f64, h: f64, n: usize) -> Vec<f64> {
    let mut w = vec![1.0f64; n + 1];
    for j in 0..n {
        let k = 2 * j as i64 - n as i64;
        let up = (n - j) as f64 / n as f64 * plus_prob(p, beta, h, n, k);
        let down = (j + 1) as f64 / n as f64 * (1.0 - plus_prob(p, beta, h, n, k + 2));
        w[j + 1] = w[j] * up / down;
    }
    let z: f64 = w.iter().sum();
    w.iter().map(|v| v / z).collect()
}
