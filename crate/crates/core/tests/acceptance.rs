//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the test harness so the lines always print.

mod common;

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::*;
use nalgebra::DMatrix;
use nashlearn::basin::{map_basins, GridAxis, Label, DEFAULT_MATCH_RADIUS};
use nashlearn::dynamics::*;
use nashlearn::equilibrium::*;
use nashlearn::games::{matching_pennies_game, torus_game, ParticleGame, TORUS_NASH_POINTS};
use nashlearn::lq::{coupled_riccati_nash, lq_as_game, perturb_stable, LqBenchmark};
use nashlearn::{Game, JointPoint};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_time(started: Instant, limit: Duration) -> Result<(), String> {
    let took = started.elapsed();
    check(took < limit, format!("took {took:.1?}, limit {limit:?}"))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn lq_nash_gains() -> Outcome {
    let t0 = Instant::now();
    let bench = LqBenchmark::standard();
    let k = coupled_riccati_nash(&bench.game, 1e-13, 10_000).map_err(|e| e.to_string())?;
    within_time(t0, Duration::from_secs(5))?;
    let dev = k.max_diff(&bench.reference_gains);
    check(dev <= 5e-3, format!("max entry deviation {dev:.3e} > 5e-3"))?;
    Ok(format!("max entry deviation {dev:.2e} in {:.2?}", t0.elapsed()))
}

/// Reads the bundled convergence run; the bound is recomputed here from the
/// reported constants.
fn lq_convergence(run_dir: &Path, took: Duration) -> Outcome {
    check(took < Duration::from_secs(120), format!("run took {took:.1?}"))?;
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join("report.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let sb = &report["spectral_bounds"];
    let (alpha, beta, r) = (sb["alpha"].as_f64().unwrap(), sb["beta"].as_f64().unwrap(), sb["radius"].as_f64().unwrap());
    check(report["rate"].as_f64() == Some(1.52e-5), "run does not use the 1.52e-5 step")?;
    let starts: Vec<f64> = serde_json::from_value(report["start_distances"].clone()).unwrap();
    check((starts.iter().cloned().fold(0.0, f64::max) - r).abs() < 1e-15, "bound radius is not the start radius")?;
    let finals: Vec<f64> = serde_json::from_value(report["final_distances"].clone()).unwrap();
    check(finals.iter().all(|d| *d <= 1e-4), format!("runs did not reach 1e-4: {finals:?}"))?;
    let rows = report["rows"].as_array().unwrap();
    let mut seen = Vec::new();
    for row in rows {
        let eps = row["eps"].as_f64().unwrap();
        let observed = row["observed_max"].as_u64().unwrap();
        let bound = if eps >= r { 0 } else { (2.0 * beta / alpha * (r / eps).ln()).ceil() as u64 };
        check(row["bound"].as_u64() == Some(bound), format!("eps {eps}: reported bound differs from {bound}"))?;
        check(observed <= bound, format!("eps {eps}: observed {observed} > bound {bound}"))?;
        seen.push(format!("{eps:.0e}: {observed}<={bound}"));
    }
    check(rows.len() == 4, "expected four eps rows")?;
    Ok(format!("{} (run {took:.1?})", seen.join(", ")))
}

fn spectral_constants() -> Outcome {
    let bench = LqBenchmark::calibrated();
    let nash = coupled_riccati_nash(&bench.game, 1e-13, 10_000).map_err(|e| e.to_string())?;
    let g = lq_as_game(&bench.game);
    let center = JointPoint::new(nash.flatten()).unwrap();
    let b = estimate_spectral_bounds(&g, &center, 1e-3, 2000, 2024).map_err(|e| e.to_string())?;
    check(b.alpha <= b.beta, "alpha > beta")?;
    let ra = (b.alpha - bench.reference_alpha).abs() / bench.reference_alpha;
    let rb = (b.beta - bench.reference_beta).abs() / bench.reference_beta;
    check(ra <= 0.1 && rb <= 0.1, format!("alpha {:.3} ({ra:.1e}), beta {:.4e} ({rb:.1e})", b.alpha, b.beta))?;
    let unit = LqBenchmark::standard();
    let ug = lq_as_game(&unit.game);
    let ub = estimate_spectral_bounds(&ug, &center, 1e-3, 200, 2024).map_err(|e| e.to_string())?;
    Ok(format!(
        "calibrated Sigma0: alpha {:.2} ({:+.2}%), beta {:.4e} ({:+.2}%); identity Sigma0 gives alpha {:.1}, beta {:.3e}",
        b.alpha,
        100.0 * (b.alpha / bench.reference_alpha - 1.0),
        b.beta,
        100.0 * (b.beta / bench.reference_beta - 1.0),
        ub.alpha,
        ub.beta
    ))
}

fn pennies() -> Outcome {
    let t0 = Instant::now();
    let g = matching_pennies_game();
    let center = JointPoint::new(vec![0.5, 0.5]).unwrap();
    let rep = g.game_jacobian(&center).map_err(|e| e.to_string())?;
    let expected = DMatrix::from_row_slice(2, 2, &[0.0, 100.0, -100.0, 0.0]);
    let err = (&rep.jacobian - &expected).abs().max();
    check(err <= 1e-6, format!("Jacobian off by {err:.2e}"))?;
    check(uniform_rate_interval(&rep.jacobian).map_err(|e| e.to_string())?.is_none(), "a stable uniform rate exists")?;
    let cfg = LearningConfig::constant(vec![1e-5, 1e-5], 1e-9, 100_000).with_stride(1);
    let t = simulate_deterministic(&g, &JointPoint::new(vec![0.52, 0.5]).unwrap(), &cfg).map_err(|e| e.to_string())?;
    check(t.status != Status::Converged, "run converged")?;
    check(t.iters == 100_000, format!("stopped after {} updates", t.iters))?;
    let tail = &t.omega_norms[t.omega_norms.len() - 100..];
    let trailing = tail.iter().sum::<f64>() / tail.len() as f64;
    let initial = t.omega_norms[0];
    check(trailing >= 0.5 * initial, format!("trailing {trailing:.3} < half of initial {initial:.3}"))?;
    within_time(t0, Duration::from_secs(10))?;
    Ok(format!("J exact to {err:.1e}, no stable rate, |w| {initial:.3} -> {trailing:.3} after 1e5 steps"))
}

fn torus_basins() -> Outcome {
    let t0 = Instant::now();
    let g = torus_game();
    let mut eqs = Vec::new();
    for (guess, target) in [([-1.06, 1.01], TORUS_NASH_POINTS[0]), ([1.4, -0.33], TORUS_NASH_POINTS[1])] {
        let p = newton_refine(&g, &JointPoint::new(guess.to_vec()).unwrap(), 100, 1e-12).map_err(|e| e.to_string())?;
        check(dist(p.as_slice(), &target) <= 1e-3, format!("Newton found {:?}", p.as_slice()))?;
        let c = classify_point(&g, &p, 1e-8).map_err(|e| e.to_string())?;
        check(c.is_differential_nash && c.is_stable, format!("{:?} not a stable differential Nash", p.as_slice()))?;
        eqs.push(p);
    }
    let axes = vec![GridAxis::new(-PI, PI, 7).unwrap(); 2];
    let grid = |rates: [f64; 2]| {
        map_basins(&g, &axes, &eqs, DEFAULT_MATCH_RADIUS, &LearningConfig::constant(rates.to_vec(), 1e-8, 20_000))
            .map_err(|e| e.to_string())
    };
    let fs_ = grid([0.171, 0.017])?;
    let sf = grid([0.017, 0.171])?;
    let differing = fs_.labels.iter().zip(&sf.labels).filter(|(a, b)| a != b).count();
    check(differing >= 1, "swapping the rates changed no cell")?;
    // ±π/3 lie on the 7-node grid at indices 2 and 4
    for rates in [[0.171, 0.171], [0.017, 0.017]] {
        let uni = grid(rates)?;
        for idx in [[2, 2], [4, 4]] {
            check(
                uni.label_at(&idx) == Label::Equilibrium(0),
                format!("rates {rates:?}: cell {idx:?} labelled {}", uni.label_at(&idx)),
            )?;
        }
    }
    within_time(t0, Duration::from_secs(30))?;
    Ok(format!("both Nash points recovered and stable; {differing} of 49 cells differ between rate orders"))
}

fn two_timescale() -> Outcome {
    let t0 = Instant::now();
    let g = torus_game();
    let cfg = LearningConfig::scheduled(vec![Schedule::Inverse, Schedule::InverseLog], 0.0, 10_000).with_stride(100);
    let inner = LearningConfig::constant(vec![0.2, 0.2], 1e-12, 100_000);
    let x0 = JointPoint::new(vec![PI / 3.0, PI / 3.0]).unwrap();
    let (mut early, mut late, mut close) = (0.0, 0.0, 0);
    let seeds = 20;
    for seed in 0..seeds {
        let noise = NoiseModel::gaussian(vec![0.1, 0.1], 9000 + seed);
        let t = simulate_stochastic(&g, &x0, &cfg, &noise).map_err(|e| e.to_string())?;
        let e = tracking_diagnostic(&t, &g, &inner).map_err(|e| e.to_string())?;
        let at = |k: usize| t.indices.iter().position(|&i| i == k).map(|p| e[p]);
        early += at(100).ok_or("k = 100 not stored")?;
        late += at(10_000).ok_or("k = 10000 not stored")?;
        let fin = t.final_point().as_slice();
        if TORUS_NASH_POINTS.iter().any(|p| g.distance(fin, p) <= 0.15) {
            close += 1;
        }
    }
    let (early, late) = (early / seeds as f64, late / seeds as f64);
    check(late * 3.0 <= early, format!("tracking error {early:.4} -> {late:.4}, less than 3x"))?;
    check(close * 10 >= seeds * 9, format!("only {close}/{seeds} seeds end near a Nash point"))?;
    within_time(t0, Duration::from_secs(120))?;
    Ok(format!("mean tracking error {early:.4} -> {late:.4}; {close}/{seeds} seeds within 0.15"))
}

fn violations(seq: &[f64], increasing: bool) -> usize {
    seq.windows(2)
        .filter(|w| if increasing { w[1] < w[0] } else { w[1] > w[0] })
        .count()
}

fn lockin_trends() -> Outcome {
    let t0 = Instant::now();
    let g = torus_game();
    let star = newton_refine(&g, &JointPoint::new(TORUS_NASH_POINTS[0].to_vec()).unwrap(), 100, 1e-12)
        .map_err(|e| e.to_string())?;
    let cfg = LearningConfig::scheduled(vec![Schedule::Inverse, Schedule::Inverse], 0.0, 5000);
    let burn_ins = [10, 100, 1000];
    let sigmas = [0.1, 0.5, 1.0, 2.0];
    let mut table = vec![vec![0.0; burn_ins.len()]; sigmas.len()];
    for (si, s) in sigmas.iter().enumerate() {
        for (bi, b) in burn_ins.iter().enumerate() {
            let noise = NoiseModel::gaussian(vec![*s, *s], 11);
            table[si][bi] =
                lockin_probability(&g, &star, 0.3, 0.2, &cfg, &noise, 50, *b).map_err(|e| e.to_string())?;
        }
    }
    for (si, row) in table.iter().enumerate() {
        let v = violations(row, true);
        check(v <= 1, format!("sigma {}: {v} decreases over burn-in {row:?}", sigmas[si]))?;
    }
    for bi in 0..burn_ins.len() {
        let col: Vec<f64> = table.iter().map(|r| r[bi]).collect();
        let v = violations(&col, false);
        check(v <= 1, format!("burn-in {}: {v} increases over noise {col:?}", burn_ins[bi]))?;
    }
    within_time(t0, Duration::from_secs(300))?;
    let rows: Vec<String> = table
        .iter()
        .zip(&sigmas)
        .map(|(r, s)| format!("s={s}: {:?}", r.iter().map(|p| format!("{p:.2}")).collect::<Vec<_>>()))
        .collect();
    Ok(rows.join("; "))
}

fn gradient_checks() -> Outcome {
    let mut worst: Vec<(String, f64, usize)> = Vec::new();
    let mut record = |name: &str, g: &Game, pts: &[Vec<f64>]| {
        let e = pts
            .iter()
            .map(|x| rel_err(&g.game_form_slice(x).unwrap(), &fd_game_form(g, x, 1e-6)))
            .fold(0.0, f64::max);
        worst.push((name.to_string(), e, pts.len()));
    };
    let mut r = rng(808);
    let pts: Vec<_> = (0..20).map(|_| uniform_point(&mut r, 2, -1.0, 2.0)).collect();
    record("pennies", &matching_pennies_game(), &pts);
    let pts: Vec<_> = (0..20).map(|_| uniform_point(&mut r, 2, -PI, PI)).collect();
    record("torus", &torus_game(), &pts);
    let pg = ParticleGame::benchmark(nashlearn::games::particles::DEFAULT_HORIZON).to_game();
    let pts: Vec<_> = (0..20).map(|_| uniform_point(&mut r, pg.dim(), -1.0, 1.0)).collect();
    record("particles", &pg, &pts);
    for bench in [LqBenchmark::standard(), LqBenchmark::calibrated()] {
        let nash = coupled_riccati_nash(&bench.game, 1e-13, 10_000).map_err(|e| e.to_string())?;
        let pts: Vec<_> = (0..20)
            .map(|_| perturb_stable(&bench.game, &nash, 0.1, &mut r).unwrap().flatten())
            .collect();
        let name = if bench.game.sigma0().is_identity(0.0) { "lq3" } else { "lq3-calibrated" };
        record(name, &lq_as_game(&bench.game), &pts);
    }
    // analytic Jacobians against differences of the analytic form
    let mut jac_worst = 0.0f64;
    for g in [torus_game(), matching_pennies_game()] {
        for _ in 0..20 {
            let x = uniform_point(&mut r, 2, -2.0, 2.0);
            let (j, _) = g.jacobian_matrix(&x).unwrap();
            jac_worst = jac_worst.max(rel_err(j.as_slice(), fd_jacobian_of_form(&g, &x, 1e-6).as_slice()));
        }
    }
    worst.push(("jacobians".into(), jac_worst, 40));
    let bad: Vec<_> = worst.iter().filter(|(_, e, _)| *e > 1e-5).collect();
    check(bad.is_empty(), format!("relative errors above 1e-5: {bad:?}"))?;
    Ok(worst
        .iter()
        .map(|(n, e, k)| format!("{n} {e:.1e} ({k} pts)"))
        .collect::<Vec<_>>()
        .join(", "))
}

fn oracle_equivalence() -> Outcome {
    let bench = LqBenchmark::standard();
    let nash = coupled_riccati_nash(&bench.game, 1e-13, 10_000).map_err(|e| e.to_string())?;
    let k = nash.flatten();
    let w = lq_as_game(&bench.game).game_form_slice(&k).map_err(|e| e.to_string())?;
    let lim = 1e-6 * norm(&k).max(1.0);
    check(norm(&w) <= lim, format!("|w(K*)| = {:.2e} > {lim:.2e}", norm(&w)))?;

    let mut r = rng(909);
    let mut worst_ratio = 0.0f64;
    for trial in 0..10u64 {
        let (g, _, star) = random_stable_quadratic(&mut r, [2, 2]);
        let center = JointPoint::new(star).unwrap();
        let b = estimate_spectral_bounds(&g, &center, 0.5, 200, trial).map_err(|e| e.to_string())?;
        let gamma = b.uniform_rate();
        let factor = b.contraction_factor();
        for p in ball_points(center.as_slice(), 0.5, 200, trial) {
            let (j, _) = g.jacobian_matrix(&p).unwrap();
            let m = DMatrix::identity(4, 4) - j * gamma;
            let s = m.singular_values().max();
            check(s <= factor * (1.0 + 1e-12), format!("trial {trial}: |I - gJ| = {s} > {factor}"))?;
            worst_ratio = worst_ratio.max(s / factor);
        }
    }
    Ok(format!(
        "|w(K*)| = {:.1e}; |I - gJ|/sqrt(1 - a/b) <= {worst_ratio:.6} on 10 games x 201 samples",
        norm(&w)
    ))
}

fn run_cli(id: &str, out: &Path) -> Result<Duration, String> {
    let t0 = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_nashlearn"))
        .args([id, "--out", out.to_str().unwrap()])
        .output()
        .map_err(|e| e.to_string())?;
    check(o.status.success(), format!("{id}: {}", String::from_utf8_lossy(&o.stderr)))?;
    Ok(t0.elapsed())
}

fn compare_dirs(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = fs::read_dir(a).map_err(|e| e.to_string())?.map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let mut other: Vec<_> = fs::read_dir(b).map_err(|e| e.to_string())?.map(|e| e.unwrap().file_name()).collect();
    other.sort();
    check(names == other, format!("file sets differ in {}", a.display()))?;
    for n in &names {
        let (x, y) = (fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap());
        check(x == y, format!("{} differs between runs", n.to_string_lossy()))?;
    }
    Ok(names.len())
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("temp dir");
    let ids: Vec<&str> = nashlearn::experiment::BUNDLED.iter().map(|b| b.0).collect();

    // every bundled experiment twice; the first runs also feed criterion 2
    let mut first_times = Vec::new();
    let runs: Result<(), String> = ids.iter().try_for_each(|id| {
        first_times.push(run_cli(id, &scratch.path().join("a").join(id))?);
        run_cli(id, &scratch.path().join("b").join(id)).map(|_| ())
    });

    let lq_took = ids
        .iter()
        .position(|id| *id == "lq_convergence")
        .and_then(|i| first_times.get(i).copied());

    let criteria: Vec<Criterion> = vec![
        ("LQ Nash oracle", Box::new(lq_nash_gains)),
        (
            "LQ policy-gradient convergence",
            Box::new(|| match (&runs, lq_took) {
                (Ok(()), Some(t)) => lq_convergence(&scratch.path().join("a/lq_convergence"), t),
                (Err(e), _) => Err(e.clone()),
                _ => Err("lq_convergence not bundled".into()),
            }),
        ),
        ("Spectral constants", Box::new(spectral_constants)),
        ("Matching pennies", Box::new(pennies)),
        ("Torus equilibria and basin warping", Box::new(torus_basins)),
        ("Two-timescale tracking", Box::new(two_timescale)),
        ("Lock-in monotone trends", Box::new(lockin_trends)),
        ("Gradient correctness", Box::new(gradient_checks)),
        ("Oracle equivalence", Box::new(oracle_equivalence)),
        (
            "Determinism",
            Box::new(|| {
                runs.clone()?;
                let mut files = 0;
                for id in &ids {
                    files += compare_dirs(&scratch.path().join("a").join(id), &scratch.path().join("b").join(id))?;
                }
                Ok(format!("{} experiments, {files} files byte-identical across two runs", ids.len()))
            }),
        ),
    ];

    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        match f() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{:.1?}]", i + 1, t0.elapsed()),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
