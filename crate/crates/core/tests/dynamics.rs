mod common;

use common::*;
use nashlearn::dynamics::*;
use nashlearn::equilibrium::{contraction_check, estimate_spectral_bounds, newton_refine};
use nashlearn::games::torus_game;
use nashlearn::JointPoint;
use proptest::prelude::*;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[test]
fn identical_inputs_give_identical_trajectories() {
    let g = torus_game();
    let x0 = JointPoint::new(vec![1.0, 1.0]).unwrap();
    let cfg = LearningConfig::scheduled(vec![Schedule::Inverse, Schedule::InverseLog], 0.0, 3000).with_stride(1);
    let noise = NoiseModel::gaussian(vec![0.3, 0.3], 42);
    let a = simulate_stochastic(&g, &x0, &cfg, &noise).unwrap();
    let b = simulate_stochastic(&g, &x0, &cfg, &noise).unwrap();
    assert_eq!(a.points, b.points);
    assert_eq!(a.omega_norms, b.omega_norms);
    let c = simulate_stochastic(&g, &x0, &cfg, &noise.with_seed(43)).unwrap();
    assert_ne!(a.points, c.points);

    let det = LearningConfig::constant(vec![0.1, 0.05], 1e-12, 5000);
    let d1 = simulate_deterministic(&g, &x0, &det).unwrap();
    let d2 = simulate_deterministic(&g, &x0, &det).unwrap();
    assert_eq!(d1.points, d2.points);
}

#[test]
fn zero_noise_matches_deterministic_play() {
    let g = torus_game();
    let x0 = JointPoint::new(vec![0.4, -2.0]).unwrap();
    let mut cfg = LearningConfig::constant(vec![0.1, 0.05], 1e-10, 4000);
    let det = simulate_deterministic(&g, &x0, &cfg).unwrap();
    cfg.mode = Mode::Stochastic;
    let sto = simulate_stochastic(&g, &x0, &cfg, &NoiseModel::zero()).unwrap();
    assert_eq!(det.points, sto.points);
    assert_eq!(det.status, sto.status);
}

/// With a contraction certificate `c < 1` on a ball holding the whole run,
/// each step shrinks the distance to the equilibrium by at least `c`.
#[test]
fn contraction_certificate_bounds_every_step() {
    let mut rg = rng(11);
    for trial in 0..10 {
        let (g, _, star) = random_stable_quadratic(&mut rg, [2, 1]);
        let x0 = uniform_point(&mut rg, 3, -2.0, 2.0);
        let center = newton_refine(&g, &JointPoint::new(x0.clone()).unwrap(), 50, 1e-13).unwrap();
        assert!(dist(center.as_slice(), &star) < 1e-9);
        let r = dist(&x0, center.as_slice()) * 1.0001;
        let b = estimate_spectral_bounds(&g, &center, r, 50, trial).unwrap();
        let rates = vec![b.uniform_rate() * 0.9, b.uniform_rate() * 1.1];
        let c = contraction_check(&g, &center, r, &rates, 100, trial).unwrap();
        if c >= 1.0 {
            continue;
        }
        let cfg = LearningConfig::constant(rates, 0.0, 500)
            .with_stride(1)
            .with_target(center.clone());
        let t = simulate_deterministic(&g, &JointPoint::new(x0).unwrap(), &cfg).unwrap();
        let d = t.distances.unwrap();
        assert!(d.iter().all(|&v| v <= r));
        for w in d.windows(2) {
            assert!(w[1] <= c * w[0] * (1.0 + 1e-12) + 1e-15, "trial {trial}: {} > {c} * {}", w[1], w[0]);
        }
    }
}

#[test]
fn uniform_rate_gives_geometric_decay() {
    let mut rg = rng(12);
    for trial in 0..10 {
        let (g, _, star) = random_stable_quadratic(&mut rg, [1, 2]);
        let center = JointPoint::new(star.clone()).unwrap();
        let b = estimate_spectral_bounds(&g, &center, 1.0, 20, trial).unwrap();
        let x0 = uniform_point(&mut rg, 3, -1.0, 1.0);
        let cfg = LearningConfig::constant(vec![b.uniform_rate(); 2], 0.0, 2000)
            .with_stride(1)
            .with_target(center);
        let t = simulate_deterministic(&g, &JointPoint::new(x0.clone()).unwrap(), &cfg).unwrap();
        let d0 = dist(&x0, &star);
        let q = 1.0 - b.alpha / b.beta;
        for (k, dk) in t.indices.iter().zip(t.distances.unwrap()) {
            let bound = q.powf(*k as f64 / 2.0) * d0;
            assert!(dk <= bound * (1.0 + 1e-9) + 1e-14, "trial {trial}, k {k}: {dk} > {bound}");
        }
    }
}

#[test]
fn preset_schedules_are_square_summable() {
    for s in [Schedule::Inverse, Schedule::InverseLog] {
        let head: f64 = (0..1000).map(|k| s.rate(k).powi(2)).sum();
        let tail: f64 = (1000..1_000_000).map(|k| s.rate(k).powi(2)).sum();
        assert!(tail < head, "{s:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn clocks_equal_schedule_prefix_sums(
        table in proptest::collection::vec(1e-4f64..0.5, 1..30),
        stride in 1usize..9,
        iters in 10usize..400,
    ) {
        let g = torus_game();
        let scheds = vec![Schedule::Table(table), Schedule::InverseLog];
        let cfg = LearningConfig::scheduled(scheds.clone(), 0.0, iters).with_stride(stride);
        let t = simulate_stochastic(&g, &JointPoint::new(vec![0.2, 0.3]).unwrap(), &cfg, &NoiseModel::zero()).unwrap();
        for (k, c) in t.indices.iter().zip(&t.clocks) {
            for (i, s) in scheds.iter().enumerate() {
                let expected: f64 = (0..*k).map(|l| s.rate(l)).sum();
                prop_assert!((c[i] - expected).abs() <= 1e-12 * expected.max(1e-300));
            }
        }
    }

    #[test]
    fn torus_iterates_stay_wrapped(a in -10.0f64..10.0, b in -10.0f64..10.0, seed in any::<u64>()) {
        let g = torus_game();
        let x0 = g.point(vec![a, b]).unwrap();
        let cfg = LearningConfig::constant(vec![0.5, 0.5], 0.0, 200).with_stride(1);
        let t = simulate_stochastic(&g, &x0, &cfg, &NoiseModel::gaussian(vec![1.0, 1.0], seed)).unwrap();
        for p in &t.points {
            prop_assert!(p.as_slice().iter().all(|v| (-std::f64::consts::PI..std::f64::consts::PI).contains(v)));
        }
    }
}

#[test]
fn preset_schedule_partial_sums_diverge() {
    let inv: f64 = (0..1_000_000).map(|k| Schedule::Inverse.rate(k)).sum();
    assert!(inv > 10.0);
    // 1/(1+k ln(k+1)) grows only like ln ln K, so its sum to 10⁶ is near 3.5
    // and cannot pass 10; compare with the integral of 1/(x ln x) instead.
    let partial: f64 = (0..1_000_000).map(|k| Schedule::InverseLog.rate(k)).sum();
    let lower = (1e6f64.ln()).ln() - (2f64.ln()).ln();
    assert!(partial > lower, "{partial}");
    let more: f64 = (1_000_000..4_000_000).map(|k| Schedule::InverseLog.rate(k)).sum();
    assert!(more > 0.99 * ((4e6f64.ln()).ln() - (1e6f64.ln()).ln()));
}

#[test]
fn tracking_error_shrinks_for_separated_timescales() {
    let g = torus_game();
    let cfg = LearningConfig::scheduled(vec![Schedule::Inverse, Schedule::InverseLog], 0.0, 5000).with_stride(50);
    let inner = LearningConfig::constant(vec![0.2, 0.2], 1e-12, 100_000);
    let mut early = 0.0;
    let mut late = 0.0;
    for seed in 0..5 {
        let t = simulate_stochastic(
            &g,
            &JointPoint::new(vec![1.0, 1.0]).unwrap(),
            &cfg,
            &NoiseModel::gaussian(vec![0.1, 0.1], seed),
        )
        .unwrap();
        let e = tracking_diagnostic(&t, &g, &inner).unwrap();
        early += e[2];
        late += e[e.len() - 1];
    }
    assert!(late < early, "{late} !< {early}");
}

#[test]
fn fast_map_is_a_best_response() {
    let g = torus_game();
    let inner = LearningConfig::constant(vec![0.2, 0.2], 1e-13, 100_000);
    for y in [-2.0, -0.5, 0.0, 1.0, 2.5] {
        let lam = fast_equilibrium_map(&g, &[y], &inner).unwrap();
        let w = g.game_form_slice(&[lam[0], y]).unwrap();
        assert!(w[0].abs() < 1e-10, "y {y}: ω₁ = {}", w[0]);
        // local minimum of player 1's cost
        let c = g.cost(0, &[lam[0], y]).unwrap();
        for dx in [-1e-3, 1e-3] {
            assert!(g.cost(0, &[lam[0] + dx, y]).unwrap() >= c);
        }
    }
}
