mod common;

use common::FullChain;
use cwglauber::dynamics::restricted_threshold;
use cwglauber::dynamics::SpinConfig;
use cwglauber::mixing_analysis::{
    bottleneck, bottleneck_with, exponent_fit, fit_sweep, hitting_time, invariant_mag, mixing_time,
    mixing_time_with, restricted_mixing_time, stationary_mag, sweep_csv, tv_curve, tv_curve_to,
    HittingSpec, MixMethod, MixOptions, SweepRow, Target,
};
use cwglauber::phase_geometry::{boundary_curves, thresholds};
use cwglauber::potential::{find_stationary_points, largest_local_max};
use cwglauber::{ModelParams, RandomStream, RootFindOpts};
use proptest::prelude::*;

fn params(p: u32, beta: f64, h: f64) -> ModelParams {
    ModelParams::new(p, beta, h).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gibbs_law_matches_enumeration(
        p in 2u32..=6, beta in 0.01f64..1.5, h in -1.0f64..1.0, n in 1usize..=14,
    ) {
        let law = stationary_mag(&params(p, beta, h), n).unwrap();
        let oracle = common::enumerate_gibbs(p, beta, h, n);
        prop_assert!(common::tv(&law.probs, &oracle) < 1e-12);
        prop_assert!((law.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projected_tv_equals_full_chain_tv(
        p in 2u32..=5, beta in 0.05f64..1.2, h in -0.6f64..0.6, n in 2usize..=10,
    ) {
        let pr = params(p, beta, h);
        let full = FullChain::new(p, beta, h, n);
        let gibbs = full.lift(&common::enumerate_gibbs(p, beta, h, n));
        let kernel = full.lift(&common::birth_death_stationary(p, beta, h, n));
        let ts = [0usize, 1, 5, 25];
        let ni = n as i64;
        for start in [ni, -ni] {
            let a = tv_curve(&pr, n, start, 25, 0.0).unwrap();
            let b = tv_curve_to(&pr, n, start, 25, 0.0, Target::Kernel).unwrap();
            let mut mu = vec![0.0; full.states()];
            mu[if start > 0 { full.states() - 1 } else { 0 }] = 1.0;
            for t in 0..=25 {
                if ts.contains(&t) {
                    prop_assert!((a.tv[t] - common::tv(&mu, &gibbs)).abs() < 1e-10);
                    prop_assert!((b.tv[t] - common::tv(&mu, &kernel)).abs() < 1e-10);
                }
                mu = full.step(&mu);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn tv_to_kernel_law_is_monotone(
        p in 2u32..=6, beta in 0.05f64..1.2, h in -1.0f64..1.0, n in 2usize..=200, up in any::<bool>(),
    ) {
        let pr = params(p, beta, h);
        let start = if up { n as i64 } else { -(n as i64) };
        let c = tv_curve_to(&pr, n, start, 3000, 1e-6, Target::Kernel).unwrap();
        prop_assert!(c.tv.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        prop_assert!(c.tv.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
    }

    #[test]
    fn tv_to_gibbs_law_rises_at_most_twice_the_law_gap(
        p in 2u32..=6, beta in 0.05f64..1.2, h in -1.0f64..1.0, n in 2usize..=200, up in any::<bool>(),
    ) {
        // |d(mu P, pi) - d(mu P, nu)| <= d(pi, nu), and d(mu P, nu) is monotone
        // for the chain's own law nu
        let pr = params(p, beta, h);
        let gap = stationary_mag(&pr, n).unwrap().tv(&invariant_mag(&pr, n).unwrap().probs);
        let start = if up { n as i64 } else { -(n as i64) };
        let c = tv_curve(&pr, n, start, 3000, 1e-6).unwrap();
        prop_assert!(c.tv.windows(2).all(|w| w[1] <= w[0] + 2.0 * gap + 1e-12));
    }

    #[test]
    fn conductance_lower_bound(
        p in 2u32..=5, beta in 0.05f64..1.0, h in -0.5f64..0.5, n in 4usize..=60,
        eps in prop::sample::select(vec![0.1, 0.25, 0.35]),
    ) {
        let pr = params(p, beta, h);
        let opts = MixOptions { target: Target::Kernel, ..MixOptions::default() };
        let mix = mixing_time_with(&pr, n, eps, 5_000_000, MixMethod::ExactProjected, &opts).unwrap();
        prop_assume!(!mix.capped);
        let phi = bottleneck_with(&pr, n, Target::Kernel).unwrap().phi_star;
        let bound = (0.25 - eps / 2.0) / phi;
        prop_assert!((mix.t_mix as f64) > bound, "t_mix {} vs bound {bound}", mix.t_mix);
    }
}

#[test]
fn infinite_temperature_is_binomial() {
    for n in [1usize, 7, 40, 200] {
        let law = stationary_mag(&params(4, 1e-300, 0.0), n).unwrap();
        let mut binom = vec![0.0f64; n + 1];
        let log_half_n = n as f64 * 0.5f64.ln();
        let mut log_c = 0.0f64;
        for (j, b) in binom.iter_mut().enumerate() {
            if j > 0 {
                log_c += ((n - j + 1) as f64 / j as f64).ln();
            }
            *b = (log_c + log_half_n).exp();
        }
        let err = law
            .probs
            .iter()
            .zip(&binom)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-13, "N = {n}: {err}");
    }
}

#[test]
fn point_mass_start_tv() {
    let pr = params(4, 1e-300, 0.0);
    let n = 30;
    let law = stationary_mag(&pr, n).unwrap();
    let k = law.argmax_sum();
    let c = tv_curve(&pr, n, k, 0, 0.0).unwrap();
    assert_eq!(c.ts, vec![0]);
    assert!((c.tv[0] - (1.0 - law.prob_of_sum(k))).abs() < 1e-15);
    assert!(c.capped);
}

#[test]
fn argmax_tracks_the_maximizer() {
    let pr = params(4, 0.054, 0.5);
    let m = largest_local_max(&find_stationary_points(&pr, &RootFindOpts::default()).unwrap())
        .unwrap()
        .m;
    let n = 400;
    for law in [
        stationary_mag(&pr, n).unwrap(),
        invariant_mag(&pr, n).unwrap(),
    ] {
        let k = law.argmax_sum();
        assert!(
            ((k as f64 - n as f64 * m) / 2.0).abs() <= 2.0,
            "{k} vs {}",
            n as f64 * m
        );
    }
}

#[test]
fn dense_bottleneck_on_interval_cuts() {
    for (p, beta, h, target) in [
        (4, 1e-300, 0.0, Target::CurieWeiss),
        (3, 0.3, 0.1, Target::CurieWeiss),
        (4, 0.51, 0.184, Target::Kernel),
        (3, 0.6, -0.2, Target::Kernel),
    ] {
        let n = 10;
        let full = FullChain::new(p, beta, h, n);
        let levels = match target {
            Target::CurieWeiss => common::enumerate_gibbs(p, beta, h, n),
            Target::Kernel => common::birth_death_stationary(p, beta, h, n),
        };
        let pi = full.lift(&levels);
        let mut best = f64::INFINITY;
        for j in 0..n {
            // A = {fewer than j+1 plus spins} or its complement
            for lower in [true, false] {
                let inside = |s: usize| ((s.count_ones() as usize) <= j) == lower;
                let mass: f64 = (0..full.states())
                    .filter(|&s| inside(s))
                    .map(|s| pi[s])
                    .sum();
                if mass > 0.5 {
                    continue;
                }
                let restricted: Vec<f64> = (0..full.states())
                    .map(|s| if inside(s) { pi[s] } else { 0.0 })
                    .collect();
                let flow = full.step(&restricted);
                let q: f64 = (0..full.states())
                    .filter(|&s| !inside(s))
                    .map(|s| flow[s])
                    .sum();
                best = best.min(q / mass);
            }
        }
        let got = bottleneck_with(&params(p, beta, h), n, target).unwrap();
        assert!(
            ((got.phi_star - best) / best).abs() < 1e-12,
            "{p} {beta} {h}: {} vs {best}",
            got.phi_star
        );
        assert!(got
            .cuts
            .iter()
            .all(|c| c.ratio > 0.0 && c.ratio >= got.phi_star));
    }
}

#[test]
fn bottleneck_decay_trends() {
    let crit = params(4, 0.51, 0.184);
    let logs: Vec<f64> = [50usize, 100, 200, 400]
        .iter()
        .map(|&n| bottleneck(&crit, n).unwrap().log_phi_star)
        .collect();
    assert!(logs.iter().all(|&l| l < 0.0));
    assert!(logs.windows(2).all(|w| w[1] < w[0]), "{logs:?}");
    let reg = params(4, 0.054, 0.5);
    for n in [50usize, 100, 200, 400] {
        let phi = bottleneck(&reg, n).unwrap().phi_star;
        assert!(-phi.ln() / (n as f64).ln() <= 3.0);
    }
}

#[test]
fn fit_examples() {
    let ns = [100usize, 200, 400, 800];
    let pow: Vec<f64> = ns.iter().map(|&n| (n as f64).powf(1.5)).collect();
    let fit = exponent_fit(&ns, &pow).unwrap();
    assert!((fit.slope - 1.5).abs() < 1e-10);
    assert!((fit.r2 - 1.0).abs() < 1e-12);
    let nlogn: Vec<f64> = ns
        .iter()
        .map(|&n| 10.0 * n as f64 * (n as f64).ln())
        .collect();
    let slope = exponent_fit(&ns, &nlogn).unwrap().slope;
    assert!(slope > 1.0 && slope < 1.25, "{slope}");
    let rows = vec![
        SweepRow {
            n: 10,
            t_mix: 5,
            capped: false,
            method: MixMethod::ExactProjected,
        },
        SweepRow {
            n: 20,
            t_mix: 9,
            capped: false,
            method: MixMethod::ExactProjected,
        },
        SweepRow {
            n: 40,
            t_mix: 100,
            capped: true,
            method: MixMethod::ExactProjected,
        },
    ];
    assert!(fit_sweep(&rows).is_err());
    assert!(fit_sweep(&rows[..2]).is_err());
    assert!(sweep_csv(&rows).starts_with("N,t_mix,capped,method\n10,5,false,exact\n"));
}

#[test]
fn critical_point_is_capped() {
    let crit = params(4, 0.51, 0.184);
    for n in [80usize, 120] {
        let r = mixing_time(&crit, n, 0.35, 10_000, MixMethod::ExactProjected).unwrap();
        assert!(r.capped && r.t_mix == 10_000);
        assert!(fit_sweep(&[SweepRow::from(&r)]).is_err());
    }
}

#[test]
fn restricted_matches_plain_without_restriction() {
    let reg = params(4, 0.054, 0.5);
    for n in [40usize, 120] {
        let a = mixing_time(&reg, n, 0.25, 1_000_000, MixMethod::ExactProjected).unwrap();
        let b = restricted_mixing_time(&reg, n, 0.25, 1_000_000).unwrap();
        assert_eq!(b.threshold, Some(-(n as i64)));
        assert_eq!(a.t_mix, b.t_mix);
        assert_eq!(a.starts, b.starts);
    }
}

#[test]
fn restricted_hitting_time_grows_like_n_log_n() {
    let crit = params(4, 0.51, 0.184);
    let m_plus =
        largest_local_max(&find_stationary_points(&crit, &RootFindOpts::default()).unwrap())
            .unwrap()
            .m;
    let mut ratios = Vec::new();
    for n in [100usize, 200, 400, 800] {
        let thr = restricted_threshold(&crit, n).unwrap();
        let ni = n as i64;
        let start = thr + (thr + ni).rem_euclid(2);
        let target = (n as f64 * m_plus + 0.1 * (n as f64).sqrt()).ceil() as i64;
        let r = hitting_time(&HittingSpec {
            params: crit,
            n,
            start_k: start,
            target_k: target,
            floor: Some(thr),
            replicas: 200,
            cap: 100_000_000,
            seed: 5,
        })
        .unwrap();
        assert_eq!(r.capped, 0);
        ratios.push(r.mean_steps / (n as f64 * (n as f64).ln()));
    }
    let spread = ratios.iter().cloned().fold(f64::MIN, f64::max)
        / ratios.iter().cloned().fold(f64::MAX, f64::min);
    println!("hitting time / (N log N): {ratios:.3?}");
    assert!(spread < 2.0, "{ratios:?}");
}

#[test]
fn boundary_probe_exponent() {
    // exploratory: the order of mixing on the U curve is open
    let beta = 0.5;
    let u = boundary_curves(4, beta).unwrap().u.unwrap();
    let pr = params(4, beta, u);
    let ns = [80usize, 160, 320, 640];
    let times: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let r = mixing_time(&pr, n, 0.35, 50_000_000, MixMethod::ExactProjected).unwrap();
            assert!(!r.capped);
            r.t_mix as f64
        })
        .collect();
    let fit = exponent_fit(&ns, &times).unwrap();
    println!(
        "boundary probe at (0.5, U = {u:.6}): t_mix {times:?}, slope {:.3}",
        fit.slope
    );
    assert!(fit.slope > 1.0);
}

#[test]
fn special_point_error_contracts() {
    // theta_t = E|c_t - c*| shrinks at least like theta' = -(c/N) theta^3
    let th = thresholds(4).unwrap();
    let pr = params(4, th.beta_hat, th.h_hat);
    let c_star = 0.5f64.sqrt();
    let n = 200usize;
    let reps = 100_000u64;
    let dt = (n / 2) as u64;
    let checkpoints = 8usize;
    let start = {
        let raw = ((c_star - 0.5) * n as f64).round() as i64;
        raw - (raw + n as i64).rem_euclid(2)
    };
    let g = cwglauber::dynamics::Glauber::new(pr, n).unwrap();
    // per replica |e| at each checkpoint
    let mut sums = vec![0.0f64; checkpoints + 1];
    let mut diff_sq = vec![0.0f64; checkpoints];
    let mut diff_sum = vec![0.0f64; checkpoints];
    for r in 0..reps {
        let mut rng = RandomStream::new(14, r);
        let mut s = SpinConfig::with_sum(n, start).unwrap();
        let mut prev = (s.magnetization() - c_star).abs();
        sums[0] += prev;
        for i in 0..checkpoints {
            for _ in 0..dt {
                g.step_full(&mut s, &mut rng);
            }
            let e = (s.magnetization() - c_star).abs();
            sums[i + 1] += e;
            diff_sum[i] += e - prev;
            diff_sq[i] += (e - prev).powi(2);
            prev = e;
        }
    }
    let r = reps as f64;
    let theta: Vec<f64> = sums.iter().map(|s| s / r).collect();
    let c = 0.5;
    let mut checked = 0;
    for i in 0..checkpoints {
        let (a, b) = (theta[i], theta[i + 1]);
        if !(0.3..=0.5).contains(&b) || a > 0.5 + 1e-3 {
            continue;
        }
        let mean = diff_sum[i] / r;
        let se = ((diff_sq[i] / r - mean * mean) / r).sqrt();
        let bound = a - c * (dt as f64 / n as f64) * b.powi(3) + 4.0 * se;
        assert!(b <= bound, "theta {a:.4} -> {b:.4}, bound {bound:.4}");
        checked += 1;
    }
    println!("theta_t every N/2 steps: {theta:.4?}");
    assert!(checked >= 1, "{theta:?}");
}
