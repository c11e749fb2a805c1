use cascade_core::ctmc::StateSpace;
use cascade_core::fpt::TrapSpec;
use cascade_core::mean_field::integrate;
use cascade_core::ssa::{sample_fpt, sample_path, SsaRun, DEFAULT_CAP};
use cascade_core::{build_rates, trap_states, Macrostate, StochasticRates};
use proptest::prelude::*;

fn single_exit() -> StochasticRates {
    StochasticRates::new(0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1).unwrap()
}

fn extinction(n: usize) -> TrapSpec {
    TrapSpec::with_extinction(StateSpace::new(n).unwrap(), []).unwrap()
}

/// Sup distance between the empirical CDF of `sample` and `cdf`.
fn ks_statistic(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let f = cdf(t);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn single_exit_hit_times_are_exponential() {
    let run = SsaRun::new(11, DEFAULT_CAP, 4000).unwrap();
    let mut set = sample_fpt(&single_exit(), (1, 0), &extinction(1), &run).unwrap();
    assert_eq!(set.censored, 0);
    let n = set.hits.len() as f64;
    let d = ks_statistic(&mut set.hits, |t| 1.0 - (-t).exp());
    // asymptotic 1% critical value of the one-sample statistic
    let critical = 1.628 / n.sqrt();
    assert!(d < critical, "KS statistic {d} >= {critical}");
}

#[test]
fn ks_rejects_wrong_rate() {
    let run = SsaRun::new(11, DEFAULT_CAP, 4000).unwrap();
    let mut set = sample_fpt(&single_exit(), (1, 0), &extinction(1), &run).unwrap();
    let n = set.hits.len() as f64;
    let d = ks_statistic(&mut set.hits, |t| 1.0 - (-t / 1.3).exp());
    assert!(d > 1.628 / n.sqrt());
}

#[test]
fn paths_stay_in_box_and_extinction_is_final() {
    let rates = build_rates(1.98, 1.49, 0.99, 10).unwrap();
    // only an unreachable-in-time target, so paths run through (0,0) to the stuck state
    let traps = TrapSpec::exact(StateSpace::new(10).unwrap(), [(10, 10)]).unwrap();
    let run = SsaRun::new(5, 200.0, 1).unwrap();
    for index in 0..64 {
        let path = sample_path(&rates, (2, 3), &traps, &run, index);
        assert_eq!(path[0], (0.0, (2, 3)));
        let mut extinct = false;
        for w in path.windows(2) {
            let ((t0, a), (t1, b)) = (w[0], w[1]);
            assert!(t1 >= t0);
            assert!(b.0 <= 10 && b.1 <= 10, "left the box at {b:?}");
            let step = a.0.abs_diff(b.0) + a.1.abs_diff(b.1);
            assert!(step == 1 || step == 2, "jump {a:?} -> {b:?}");
        }
        for &(_, s) in &path {
            if extinct {
                assert_eq!(s, (0, 0));
            }
            extinct |= s == (0, 0);
        }
    }
}

#[test]
fn path_and_sample_set_agree() {
    let rates = build_rates(1.98, 1.98, 0.99, 10).unwrap();
    let traps = trap_states(Macrostate::HH, 2, 1, 10).unwrap();
    let run = SsaRun::new(9, DEFAULT_CAP, 40).unwrap();
    let set = sample_fpt(&rates, (2, 1), &traps, &run).unwrap();
    let mut from_paths: Vec<f64> = (0..40)
        .map(|i| {
            let path = sample_path(&rates, (2, 1), &traps, &run, i);
            let &(t, s) = path.last().unwrap();
            assert!(traps.contains(s));
            t
        })
        .collect();
    let mut hits = set.hits.clone();
    hits.sort_by(f64::total_cmp);
    from_paths.sort_by(f64::total_cmp);
    assert_eq!(hits, from_paths);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn std_error_scales_as_inverse_root_n(seed in any::<u64>()) {
        let rates = build_rates(1.98, 1.98, 0.99, 10).unwrap();
        let traps = trap_states(Macrostate::HH, 2, 1, 10).unwrap();
        let se = |n| {
            let run = SsaRun::new(seed, DEFAULT_CAP, n).unwrap();
            sample_fpt(&rates, (2, 1), &traps, &run).unwrap().std_error.unwrap()
        };
        let ratio = se(2000) / se(8000);
        prop_assert!((ratio / 2.0 - 1.0).abs() <= 0.2, "ratio {}", ratio);
    }
}

/// Observed convergence order of the RK4 integrator against a fine reference.
fn observed_order(rates: &StochasticRates, rho0: [f64; 2], t_end: f64, steps: [f64; 3]) -> f64 {
    let reference = integrate(rho0, rates, t_end, steps[2] / 64.0).unwrap().final_state();
    let points: Vec<(f64, f64)> = steps
        .iter()
        .map(|&dt| {
            let traj = integrate(rho0, rates, t_end, dt).unwrap();
            assert!(!traj.clamped);
            let y = traj.final_state();
            let err = ((y[0] - reference[0]).powi(2) + (y[1] - reference[1]).powi(2)).sqrt();
            (dt.ln(), err.ln())
        })
        .collect();
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn integrator_is_fourth_order() {
    let rates = build_rates(1.49, 1.2, 0.5, 10).unwrap();
    let order = observed_order(&rates, [0.4, 1.6], 4.0, [0.2, 0.1, 0.05]);
    assert!(order >= 3.5, "observed order {order}");
}
