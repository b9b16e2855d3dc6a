//! Config-driven experiment runner used by the `nashlearn` binary.
//!
//! A run writes into its output directory:
//! `config.toml` (effective config with defaults filled), `report.json`,
//! `summary.txt` and kind-specific CSV files. Failures leave `error.json`.

pub mod config;
mod csv;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use crate::basin::{map_basins, zero_lines, GridAxis};
use crate::dynamics::{
    lockin_probability, simulate_deterministic, simulate_stochastic, tracking_diagnostic_for, LearningConfig, Mode,
    NoiseModel, Rates, Trajectory,
};
use crate::equilibrium::{
    classify_point, estimate_spectral_bounds, iteration_bound_uniform, newton_refine, uniform_rate_interval,
    DEFAULT_NEWTON_ITERS,
};
use crate::error::{Error, Result};
use crate::game::{Game, JointPoint};
use crate::games::particles::{decoupled_optimum, ParticleGame, DEFAULT_HORIZON};
use crate::games::{matching_pennies_game, torus, torus_game};
use crate::lq::{coupled_riccati_nash, evaluate_gains, lq_as_game, perturb_stable, GainProfile, LqBenchmark};
use crate::sampling::{derive_seed, rng_from_seed};
use crate::linalg;

pub use config::*;
use csv::{num, CsvWriter};

/// Seed streams per purpose, all derived from the master seed.
const STREAM_SPECTRAL: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_STARTS: u64 = 3;
const STREAM_LOCKIN: u64 = 4;

/// Bundled experiment configs: `(id, toml)`.
pub const BUNDLED: [(&str, &str); 8] = [
    ("torus_basins", include_str!("../../configs/torus_basins.toml")),
    ("torus_classify", include_str!("../../configs/torus_classify.toml")),
    ("torus_two_timescale", include_str!("../../configs/torus_two_timescale.toml")),
    ("torus_lockin", include_str!("../../configs/torus_lockin.toml")),
    ("pennies_cycle", include_str!("../../configs/pennies_cycle.toml")),
    ("lq3_nash", include_str!("../../configs/lq3_nash.toml")),
    ("lq_convergence", include_str!("../../configs/lq_convergence.toml")),
    ("particles_warping", include_str!("../../configs/particles_warping.toml")),
];

/// One line per bundled experiment: id, game id and description.
pub fn list_experiments() -> String {
    let mut out = String::new();
    for (id, text) in BUNDLED {
        let cfg = ExperimentConfig::from_toml(text).expect("bundled config parses");
        let _ = writeln!(out, "{id:<20} [{}] {}", cfg.game.id, cfg.description);
    }
    out
}

/// Parse a config from a file path, or from a bundled id when no such file
/// exists.
pub fn load_config(path_or_id: &str) -> Result<ExperimentConfig> {
    let path = Path::new(path_or_id);
    if path.exists() {
        let text = fs::read_to_string(path)?;
        return ExperimentConfig::from_toml(&text);
    }
    match BUNDLED.iter().find(|(id, _)| *id == path_or_id) {
        Some((_, text)) => ExperimentConfig::from_toml(text),
        None => Err(Error::Config(format!(
            "no config file or bundled experiment named '{path_or_id}'"
        ))),
    }
}

/// Game plus the structured objects behind it, for named anchors.
struct GameCtx {
    game: Game,
    lq: Option<LqBenchmark>,
    particles: Option<ParticleGame>,
}

fn build_game(params: &GameParams) -> Result<GameCtx> {
    let mut ctx = GameCtx {
        game: matching_pennies_game(),
        lq: None,
        particles: None,
    };
    match params.id.as_str() {
        "lq3" => {
            let bench = match params.sigma0.unwrap_or_default() {
                Sigma0Choice::Identity => LqBenchmark::standard(),
                Sigma0Choice::Calibrated => LqBenchmark::calibrated(),
            };
            ctx.game = lq_as_game(&bench.game);
            ctx.lq = Some(bench);
        }
        "particles" => {
            let horizon = params.horizon.unwrap_or(DEFAULT_HORIZON);
            if horizon == 0 {
                return Err(Error::Config("game.horizon must be at least 1".into()));
            }
            let pg = ParticleGame::benchmark(horizon);
            ctx.game = pg.to_game();
            ctx.particles = Some(pg);
        }
        "torus" => ctx.game = torus_game(),
        "pennies" => {}
        other => {
            return Err(Error::Config(format!(
                "unknown game id '{other}' (expected lq3, pennies, torus or particles)"
            )))
        }
    }
    if params.horizon.is_some() && ctx.particles.is_none() {
        return Err(Error::Config("`horizon` applies to the particles game only".into()));
    }
    if params.sigma0.is_some() && ctx.lq.is_none() {
        return Err(Error::Config("`sigma0` applies to the lq3 game only".into()));
    }
    Ok(ctx)
}

impl GameCtx {
    fn resolve(&self, p: &PointRef) -> Result<JointPoint> {
        let coords = match p {
            PointRef::Coords(c) => c.clone(),
            PointRef::Anchor(name) => match (name.as_str(), &self.lq, &self.particles) {
                ("lq-nash", Some(b), _) => coupled_riccati_nash(&b.game, 1e-13, 10_000)?.flatten(),
                ("decoupled", _, Some(pg)) => decoupled_optimum(pg)?,
                ("torus-nash-1", ..) if self.game.name() == "torus" => torus::NASH_POINTS[0].to_vec(),
                ("torus-nash-2", ..) if self.game.name() == "torus" => torus::NASH_POINTS[1].to_vec(),
                _ => {
                    return Err(Error::Config(format!(
                        "anchor '{name}' is not available for game '{}'",
                        self.game.name()
                    )))
                }
            },
        };
        self.game.point(coords)
    }
}

/// Result of a successful run.
#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub summary: String,
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(p, text)?;
        Ok(())
    }

    fn json(&mut self, name: &str, v: &serde_json::Value) -> Result<()> {
        let text = serde_json::to_string_pretty(v)?;
        self.write(name, &(text + "\n"))
    }
}

/// Execute `cfg`, writing into `out_dir`. On failure an `error.json` record
/// is written before the error is returned.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(out_dir)?;
    let mut out = Output {
        dir: out_dir.to_path_buf(),
        files: Vec::new(),
    };
    let err_path = out_dir.join("error.json");
    if err_path.exists() {
        fs::remove_file(&err_path)?;
    }
    let result = out
        .write("config.toml", &cfg.to_toml()?)
        .and_then(|_| dispatch(cfg, &mut out));
    match result {
        Ok(summary) => {
            out.write("summary.txt", &summary)?;
            Ok(RunOutcome {
                out_dir: out.dir,
                files: out.files,
                summary,
            })
        }
        Err(e) => {
            let record = error_record(&e);
            fs::write(&err_path, serde_json::to_string_pretty(&record)? + "\n")?;
            Err(e)
        }
    }
}

/// Machine-readable error record.
pub fn error_record(e: &Error) -> serde_json::Value {
    json!({ "error": e.kind(), "message": e.to_string() })
}

fn dispatch(cfg: &ExperimentConfig, out: &mut Output) -> Result<String> {
    let ctx = build_game(&cfg.game)?;
    let mut s = format!("experiment: {}\nkind: {:?}\ngame: {}\nseed: {}\n", cfg.name, cfg.kind, cfg.game.id, cfg.seed);
    if !cfg.description.is_empty() {
        let _ = writeln!(s, "description: {}", cfg.description);
    }
    s.push('\n');
    match cfg.kind {
        Kind::Classify => run_classify(cfg, &ctx, out, &mut s)?,
        Kind::Simulate => run_simulate(cfg, &ctx, out, &mut s)?,
        Kind::Basin => run_basin(cfg, &ctx, out, &mut s)?,
        Kind::Lockin => run_lockin(cfg, &ctx, out, &mut s)?,
        Kind::LqNash => run_lq_nash(cfg, &ctx, out, &mut s)?,
        Kind::Bounds => run_bounds(cfg, &ctx, out, &mut s)?,
    }
    Ok(s)
}

fn section<'a, T>(v: &'a Option<T>, name: &str) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::Config(format!("missing [{name}] section")))
}

fn run_classify(cfg: &ExperimentConfig, ctx: &GameCtx, out: &mut Output, s: &mut String) -> Result<()> {
    let params = section(&cfg.classify, "classify")?;
    let mut reports = Vec::new();
    for p in &params.points {
        let start = ctx.resolve(p)?;
        let x = if params.newton {
            newton_refine(&ctx.game, &start, DEFAULT_NEWTON_ITERS, 1e-12)?
        } else {
            start.clone()
        };
        let rep = classify_point(&ctx.game, &x, params.tol)?;
        let jac = ctx.game.game_jacobian(&x)?;
        let interval = uniform_rate_interval(&jac.jacobian)?;
        let _ = writeln!(
            s,
            "point {:?}: |omega| {:.3e}, critical {}, differential Nash {}, stable {}, uniform-rate interval {}",
            x.as_slice(),
            rep.omega_norm,
            rep.is_critical,
            rep.is_differential_nash,
            rep.is_stable,
            interval.map_or("absent".to_string(), |g| format!("(0, {g:.6e})"))
        );
        reports.push(json!({
            "start": start,
            "report": rep,
            "jacobian": linalg::to_rows(&jac.jacobian),
            "method": jac.method,
            "uniform_rate_interval": interval,
        }));
    }
    let mut report = json!({ "points": reports });
    if let Some(n) = params.zero_lines {
        if ctx.game.dims() != [1, 1] {
            return Err(Error::Config("zero lines need a two-player scalar game".into()));
        }
        let (lo, hi) = if ctx.game.is_periodic() {
            (-std::f64::consts::PI, std::f64::consts::PI)
        } else {
            (0.0, 1.0)
        };
        let axes = vec![GridAxis::new(lo, hi, n)?, GridAxis::new(lo, hi, n)?];
        let masks = zero_lines(&ctx.game, &axes, 0.0)?;
        let comps = masks.intersection_components();
        let _ = writeln!(s, "zero-line intersections on a {n}x{n} grid: {}", comps.len());
        let mut w = CsvWriter::new(&["i", "j", "zero_player1", "zero_player2"]);
        for (idx, (a, b)) in masks.masks[0].iter().zip(&masks.masks[1]).enumerate() {
            w.row(&[(idx / n).to_string(), (idx % n).to_string(), (*a as u8).to_string(), (*b as u8).to_string()]);
        }
        w.save(out.path("zero_lines.csv"))?;
        report["zero_line_intersections"] = json!(comps.len());
    }
    out.json("report.json", &report)
}

fn noise_seed(master: u64, replicate: usize) -> u64 {
    derive_seed(derive_seed(master, STREAM_NOISE), replicate as u64)
}

fn trajectory_csv(game: &Game, traj: &Trajectory) -> CsvWriter {
    let mut header = vec!["k".to_string()];
    header.extend((0..game.dim()).map(|j| format!("x{j}")));
    header.push("omega_norm".into());
    if traj.distances.is_some() {
        header.push("distance".into());
    }
    header.extend((0..game.num_players()).map(|i| format!("clock{i}")));
    let mut w = CsvWriter::from_owned(header);
    for (r, p) in traj.points.iter().enumerate() {
        let mut row = vec![traj.indices[r].to_string()];
        row.extend(p.as_slice().iter().map(|v| num(*v)));
        row.push(num(traj.omega_norms[r]));
        if let Some(d) = &traj.distances {
            row.push(num(d[r]));
        }
        row.extend(traj.clocks[r].iter().map(|v| num(*v)));
        w.row(&row);
    }
    w
}

/// Mean of `‖ω‖` over the stored points among the last `window` iterations.
pub fn trailing_omega(traj: &Trajectory, window: usize) -> f64 {
    let from = traj.iters.saturating_sub(window.saturating_sub(1));
    let tail: Vec<f64> = traj
        .indices
        .iter()
        .zip(&traj.omega_norms)
        .filter(|(k, _)| **k >= from)
        .map(|(_, w)| *w)
        .collect();
    tail.iter().sum::<f64>() / tail.len() as f64
}

fn short(x: &JointPoint) -> String {
    let v = x.as_slice();
    if v.len() <= 8 {
        format!("{v:?}")
    } else {
        format!("{:?} ... ({} coordinates)", &v[..4], v.len())
    }
}

fn scenario_list(scenarios: &[Scenario]) -> Vec<Option<&Scenario>> {
    if scenarios.is_empty() {
        vec![None]
    } else {
        scenarios.iter().map(Some).collect()
    }
}

fn run_simulate(cfg: &ExperimentConfig, ctx: &GameCtx, out: &mut Output, s: &mut String) -> Result<()> {
    let params = section(&cfg.simulate, "simulate")?;
    let learning = section(&cfg.learning, "learning")?;
    let x0 = ctx.resolve(&params.x0)?;
    let refs = params.reference.iter().map(|p| ctx.resolve(p)).collect::<Result<Vec<_>>>()?;
    let stochastic = learning.mode == Mode::Stochastic;
    let replicates = if stochastic { params.seeds.max(1) } else { 1 };
    let mut scenario_reports = Vec::new();
    let _ = writeln!(s, "x0: {}", short(&x0));
    for sc in scenario_list(&params.scenarios) {
        let name = sc.map_or("base", |sc| sc.name.as_str());
        let lcfg = learning.to_config(sc)?;
        let trajs: Vec<Trajectory> = (0..replicates)
            .into_par_iter()
            .map(|rep| {
                if stochastic {
                    let sigma = &section(&cfg.noise, "noise")?.sigma;
                    let noise = NoiseModel::gaussian(sigma.clone(), noise_seed(cfg.seed, rep));
                    simulate_stochastic(&ctx.game, &x0, &lcfg, &noise)
                } else {
                    simulate_deterministic(&ctx.game, &x0, &lcfg)
                }
            })
            .collect::<Result<_>>()?;
        let _ = writeln!(s, "scenario {name}: rates {}", describe_rates(&lcfg.rates));
        let mut runs = Vec::new();
        for (rep, t) in trajs.iter().enumerate() {
            let file = if replicates > 1 {
                format!("traj_{name}_seed{rep}.csv")
            } else {
                format!("traj_{name}.csv")
            };
            trajectory_csv(&ctx.game, t).save(out.path(&file))?;
            let nearest = nearest_ref(&ctx.game, t.final_point(), &refs);
            let trailing = trailing_omega(t, 100);
            let initial = t.omega_norms[0];
            let _ = writeln!(
                s,
                "  run {rep}: status {:?} after {} iterations, |omega| initial {:.6e}, trailing {:.6e}, final {:.6e}{}",
                t.status,
                t.iters,
                initial,
                trailing,
                t.final_omega_norm(),
                nearest.map_or(String::new(), |(i, d)| format!(", nearest reference {i} at {d:.4e}"))
            );
            runs.push(json!({
                "replicate": rep,
                "seed": t.seed,
                "status": t.status,
                "iters": t.iters,
                "initial_omega_norm": initial,
                "trailing_omega_norm": trailing,
                "final_omega_norm": t.final_omega_norm(),
                "final_point": t.final_point(),
                "nearest_reference": nearest.map(|(i, d)| json!({"index": i, "distance": d})),
                "file": file,
            }));
        }
        let mut sc_report = json!({ "name": name, "rates": lcfg.rates, "runs": runs });
        if let Some(tr) = &params.tracking {
            sc_report["tracking"] = tracking(ctx, &trajs, tr, name, out, s)?;
        }
        scenario_reports.push(sc_report);
    }
    if params.scenarios.len() >= 2 && !stochastic {
        let finals: Vec<Vec<f64>> = scenario_reports
            .iter()
            .map(|r| serde_json::from_value(r["runs"][0]["final_point"].clone()).unwrap_or_default())
            .collect();
        let _ = writeln!(s, "final-point distances between scenarios:");
        for a in 0..finals.len() {
            for b in a + 1..finals.len() {
                let _ = writeln!(
                    s,
                    "  {} vs {}: {:.6e}",
                    params.scenarios[a].name,
                    params.scenarios[b].name,
                    linalg::dist2(&finals[a], &finals[b])
                );
            }
        }
    }
    out.json("report.json", &json!({ "x0": x0, "references": refs, "scenarios": scenario_reports }))
}

fn nearest_ref(game: &Game, x: &JointPoint, refs: &[JointPoint]) -> Option<(usize, f64)> {
    refs.iter()
        .map(|r| game.distance(x.as_slice(), r.as_slice()))
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

fn describe_rates(r: &Rates) -> String {
    match r {
        Rates::Constant(v) => format!("constant {v:?}"),
        Rates::Schedule(v) => format!("schedules {v:?}"),
    }
}

fn tracking(
    ctx: &GameCtx,
    trajs: &[Trajectory],
    tr: &TrackingParams,
    name: &str,
    out: &mut Output,
    s: &mut String,
) -> Result<serde_json::Value> {
    let inner = LearningConfig::constant(vec![tr.inner_rate; ctx.game.num_players()], tr.inner_tol, tr.inner_iters);
    let errors = trajs
        .iter()
        .map(|t| tracking_diagnostic_for(t, &ctx.game, tr.fast_player, &inner))
        .collect::<Result<Vec<_>>>()?;
    let indices = &trajs[0].indices;
    let mut header = vec!["k".to_string()];
    header.extend((0..trajs.len()).map(|i| format!("seed{i}")));
    header.push("mean".into());
    let mut w = CsvWriter::from_owned(header);
    let mut means = Vec::with_capacity(indices.len());
    for (r, k) in indices.iter().enumerate() {
        let col: Vec<f64> = errors.iter().map(|e| e.get(r).copied().unwrap_or(f64::NAN)).collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        means.push(mean);
        let mut row = vec![k.to_string()];
        row.extend(col.iter().map(|v| num(*v)));
        row.push(num(mean));
        w.row(&row);
    }
    w.save(out.path(&format!("tracking_{name}.csv")))?;
    let mut at = Vec::new();
    for &k in &tr.report_at {
        let pos = indices.iter().position(|&i| i == k).ok_or_else(|| {
            Error::Config(format!("tracking report iteration {k} is not a stored index"))
        })?;
        let _ = writeln!(s, "  mean tracking error at k={k}: {:.6e}", means[pos]);
        at.push(json!({ "k": k, "mean_error": means[pos] }));
    }
    Ok(json!({ "fast_player": tr.fast_player, "report": at }))
}

fn run_basin(cfg: &ExperimentConfig, ctx: &GameCtx, out: &mut Output, s: &mut String) -> Result<()> {
    let params = section(&cfg.basin, "basin")?;
    let learning = section(&cfg.learning, "learning")?;
    let axes = params
        .axes
        .iter()
        .map(|a| GridAxis::new(a.lo, a.hi, a.count))
        .collect::<Result<Vec<_>>>()?;
    let mut eqs = Vec::new();
    for p in &params.equilibria {
        let x = ctx.resolve(p)?;
        eqs.push(if params.refine {
            newton_refine(&ctx.game, &x, DEFAULT_NEWTON_ITERS, 1e-12)?
        } else {
            x
        });
    }
    for (i, e) in eqs.iter().enumerate() {
        let _ = writeln!(s, "equilibrium {i}: {:?}", e.as_slice());
    }
    let mut grids = Vec::new();
    for sc in &params.scenarios {
        let lcfg = learning.to_config(Some(sc))?;
        let grid = map_basins(&ctx.game, &axes, &eqs, params.match_radius, &lcfg)?;
        let mut header: Vec<String> = (0..axes.len()).map(|a| format!("i{a}")).collect();
        header.extend((0..axes.len()).map(|a| format!("x{a}")));
        header.push("label".into());
        let mut w = CsvWriter::from_owned(header);
        let centers = grid.centers();
        for (flat, (c, l)) in centers.iter().zip(&grid.labels).enumerate() {
            let mut row = Vec::new();
            let mut rem = flat;
            let mut idx = vec![0; axes.len()];
            for (a, axis) in axes.iter().enumerate().rev() {
                idx[a] = rem % axis.count;
                rem /= axis.count;
            }
            row.extend(idx.iter().map(|i| i.to_string()));
            row.extend(c.iter().map(|v| num(*v)));
            row.push(l.to_string());
            w.row(&row);
        }
        w.save(out.path(&format!("basin_{}.csv", sc.name)))?;
        let _ = write!(s, "scenario {}: rates {}; cells", sc.name, describe_rates(&lcfg.rates));
        for i in 0..eqs.len() {
            let _ = write!(s, " eq{i}={}", grid.count(crate::basin::Label::Equilibrium(i)));
        }
        let _ = writeln!(
            s,
            " none={} diverged={}",
            grid.count(crate::basin::Label::None),
            grid.count(crate::basin::Label::Diverged)
        );
        for h in &params.highlight {
            let flat = flat_index(&axes, h)?;
            let _ = writeln!(s, "  highlight {h:?} -> {}", grid.labels[flat]);
        }
        grids.push((sc.name.clone(), grid));
    }
    if grids.len() >= 2 {
        let _ = writeln!(s, "differing cells between scenarios:");
        for a in 0..grids.len() {
            for b in a + 1..grids.len() {
                let diff = grids[a].1.labels.iter().zip(&grids[b].1.labels).filter(|(x, y)| x != y).count();
                let _ = writeln!(s, "  {} vs {}: {diff}", grids[a].0, grids[b].0);
            }
        }
    }
    let report: Vec<_> = grids.iter().map(|(n, g)| json!({ "scenario": n, "grid": g })).collect();
    out.json("report.json", &json!({ "equilibria": eqs, "grids": report }))
}

/// Flat index of the grid node nearest to `p`.
fn flat_index(axes: &[GridAxis], p: &[f64]) -> Result<usize> {
    if p.len() != axes.len() {
        return Err(Error::Config(format!("highlight point {p:?} has the wrong dimension")));
    }
    let mut flat = 0;
    for (axis, v) in axes.iter().zip(p) {
        let i = (0..axis.count)
            .min_by(|&a, &b| (axis.node(a) - v).abs().total_cmp(&(axis.node(b) - v).abs()))
            .unwrap_or(0);
        flat = flat * axis.count + i;
    }
    Ok(flat)
}

fn run_lockin(cfg: &ExperimentConfig, ctx: &GameCtx, out: &mut Output, s: &mut String) -> Result<()> {
    let params = section(&cfg.lockin, "lockin")?;
    let learning = section(&cfg.learning, "learning")?;
    let lcfg = learning.to_config(None)?;
    let mut x_star = ctx.resolve(&params.x_star)?;
    if params.refine {
        x_star = newton_refine(&ctx.game, &x_star, DEFAULT_NEWTON_ITERS, 1e-12)?;
    }
    let seed = derive_seed(cfg.seed, STREAM_LOCKIN);
    let n = ctx.game.num_players();
    let _ = writeln!(
        s,
        "x*: {:?}, eps {}, start radius {}, trials {}",
        x_star.as_slice(),
        params.eps,
        params.radius,
        params.trials
    );
    let mut w = CsvWriter::new(&["sigma", "burn_in", "probability"]);
    let mut table = Vec::new();
    for &sigma in &params.sigmas {
        let noise = NoiseModel::gaussian(vec![sigma; n], seed);
        let mut line = format!("sigma {sigma}:");
        for &b in &params.burn_in {
            let p = lockin_probability(&ctx.game, &x_star, params.eps, params.radius, &lcfg, &noise, params.trials, b)?;
            w.row(&[num(sigma), b.to_string(), num(p)]);
            let _ = write!(line, " burn-in {b}: {p:.3}");
            table.push(json!({ "sigma": sigma, "burn_in": b, "probability": p }));
        }
        let _ = writeln!(s, "{line}");
    }
    w.save(out.path("lockin.csv"))?;
    out.json("report.json", &json!({ "x_star": x_star, "seed": seed, "probabilities": table }))
}

fn lq_bench(ctx: &GameCtx) -> Result<&LqBenchmark> {
    ctx.lq
        .as_ref()
        .ok_or_else(|| Error::Config("this experiment kind needs game id 'lq3'".into()))
}

fn run_lq_nash(cfg: &ExperimentConfig, ctx: &GameCtx, out: &mut Output, s: &mut String) -> Result<()> {
    let params = cfg.lq_nash.clone().unwrap_or_default();
    let bench = lq_bench(ctx)?;
    let k = coupled_riccati_nash(&bench.game, params.tol, params.max_iters)?;
    let at_nash = evaluate_gains(&bench.game, &k)?;
    let at_reference = evaluate_gains(&bench.game, &bench.reference_gains)?;
    let max_dev = k
        .k
        .iter()
        .zip(&bench.reference_gains.k)
        .map(|(a, b)| (a - b).abs().max())
        .fold(0.0, f64::max);
    let grad_nash = linalg::norm2(&at_nash.flat_gradient());
    let grad_pub = linalg::norm2(&at_reference.flat_gradient());
    let rho = linalg::spectral_radius(&bench.game.closed_loop(&k))?;
    for (i, ki) in k.k.iter().enumerate() {
        let _ = writeln!(
            s,
            "K{} = {:?} (reference {:?})",
            i + 1,
            ki.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
            bench.reference_gains.k[i].iter().collect::<Vec<_>>()
        );
    }
    let _ = writeln!(s, "max entrywise deviation from reference gains: {max_dev:.3e}");
    let _ = writeln!(s, "closed-loop spectral radius: {rho:.6}");
    let _ = writeln!(s, "|policy gradient| at computed Nash: {grad_nash:.3e}");
    let _ = writeln!(s, "|policy gradient| at reference (rounded) gains: {grad_pub:.3e}");
    let _ = writeln!(s, "costs at Nash: {:?}", at_nash.costs);
    let mut w = CsvWriter::new(&["player", "entry", "computed", "reference"]);
    for (i, (a, b)) in k.k.iter().zip(&bench.reference_gains.k).enumerate() {
        for (j, (x, y)) in a.iter().zip(b.iter()).enumerate() {
            w.row(&[(i + 1).to_string(), j.to_string(), num(*x), num(*y)]);
        }
    }
    w.save(out.path("gains.csv"))?;
    out.json(
        "report.json",
        &json!({
            "gains": k,
            "reference_gains": bench.reference_gains,
            "max_deviation": max_dev,
            "closed_loop_spectral_radius": rho,
            "gradient_norm_at_nash": grad_nash,
            "gradient_norm_at_reference": grad_pub,
            "value": at_nash,
        }),
    )
}

fn starts(cfg: &ExperimentConfig, ctx: &GameCtx, params: &BoundsParams, center: &JointPoint) -> Result<Vec<JointPoint>> {
    let mut rng = rng_from_seed(derive_seed(cfg.seed, STREAM_STARTS));
    (0..params.trials)
        .map(|_| {
            if let Some(b) = &ctx.lq {
                let c = GainProfile::from_flat(&b.game, center.as_slice())?;
                JointPoint::new(perturb_stable(&b.game, &c, params.perturbation, &mut rng)?.flatten())
            } else {
                use rand::Rng;
                let m = params.perturbation;
                JointPoint::new(center.as_slice().iter().map(|v| v + rng.random_range(-m..=m)).collect())
            }
        })
        .collect()
}

fn run_bounds(cfg: &ExperimentConfig, ctx: &GameCtx, out: &mut Output, s: &mut String) -> Result<()> {
    let params = section(&cfg.bounds, "bounds")?;
    if params.eps.is_empty() {
        return Err(Error::Config("bounds needs at least one eps".into()));
    }
    let center = ctx.resolve(&params.center)?;
    let x0s = starts(cfg, ctx, params, &center)?;
    let start_dist: Vec<f64> = x0s.iter().map(|x| ctx.game.distance(x.as_slice(), center.as_slice())).collect();
    let r = params
        .radius
        .unwrap_or_else(|| start_dist.iter().copied().fold(0.0, f64::max));
    let sb = estimate_spectral_bounds(&ctx.game, &center, r, params.samples, derive_seed(cfg.seed, STREAM_SPECTRAL))?;
    let rate = params.rate.unwrap_or_else(|| sb.uniform_rate());
    let _ = writeln!(s, "ball radius r = {r:.6e} ({} samples)", params.samples);
    let _ = writeln!(
        s,
        "alpha = {:.6e}, beta = {:.6e}, sqrt(alpha)/beta = {:.6e}, contraction factor = {:.12}",
        sb.alpha,
        sb.beta,
        sb.uniform_rate(),
        sb.contraction_factor()
    );
    for wmsg in &sb.warnings {
        let _ = writeln!(s, "warning: {wmsg}");
    }
    if let Some(b) = &ctx.lq {
        if b.game.sigma0() != &nalgebra::DMatrix::identity(4, 4) {
            let id = lq_as_game(&b.game.with_sigma0(nalgebra::DMatrix::identity(4, 4))?);
            let sb_id = estimate_spectral_bounds(&id, &center, params.local_radius, params.samples, derive_seed(cfg.seed, STREAM_SPECTRAL))?;
            let _ = writeln!(
                s,
                "with identity Sigma0, local ball: alpha = {:.6e}, beta = {:.6e}, sqrt(alpha)/beta = {:.6e}",
                sb_id.alpha,
                sb_id.beta,
                sb_id.uniform_rate()
            );
        }
    }
    let local = estimate_spectral_bounds(
        &ctx.game,
        &center,
        params.local_radius,
        params.samples,
        derive_seed(cfg.seed, STREAM_SPECTRAL),
    )?;
    let _ = writeln!(
        s,
        "local ball radius {:.1e}: alpha = {:.6e}, beta = {:.6e}, sqrt(alpha)/beta = {:.6e}",
        params.local_radius,
        local.alpha,
        local.beta,
        local.uniform_rate()
    );
    if let Some(b) = &ctx.lq {
        let rel = |m: f64, p: f64| (m - p) / p;
        let _ = writeln!(
            s,
            "  vs reference alpha {} ({:+.4}), beta {:.3e} ({:+.4}), gamma {:.3e} ({:+.4})",
            b.reference_alpha,
            rel(local.alpha, b.reference_alpha),
            b.reference_beta,
            rel(local.beta, b.reference_beta),
            b.reference_gamma,
            rel(local.uniform_rate(), b.reference_gamma)
        );
    }
    let _ = writeln!(s, "step size used: {rate:.6e}");
    let bounds = params
        .eps
        .iter()
        .map(|&e| if e >= r { Ok(0) } else { iteration_bound_uniform(sb.alpha, sb.beta, r, e) })
        .collect::<Result<Vec<u64>>>()?;
    let cap = (*bounds.iter().max().unwrap_or(&0) as f64 * params.cap_factor).ceil() as usize;
    let lcfg = LearningConfig::constant(vec![rate; ctx.game.num_players()], 0.0, cap)
        .with_target(center.clone())
        .with_stride(1);
    let trajs: Vec<Trajectory> = x0s
        .par_iter()
        .map(|x0| simulate_deterministic(&ctx.game, x0, &lcfg))
        .collect::<Result<_>>()?;
    let first_entry = |t: &Trajectory, e: f64| -> Option<usize> {
        let d = t.distances.as_ref()?;
        d.iter().position(|&v| v <= e).map(|p| t.indices[p])
    };
    let mut w = CsvWriter::new(&["eps", "bound", "observed_max", "bound_dominates"]);
    let _ = writeln!(s, "\n{:>10} {:>12} {:>14} {:>10}", "eps", "bound T", "observed max", "T >= obs");
    let mut rows = Vec::new();
    for (e, t_bound) in params.eps.iter().zip(&bounds) {
        let obs: Vec<Option<usize>> = trajs.iter().map(|t| first_entry(t, *e)).collect();
        let worst = if obs.iter().all(Option::is_some) {
            obs.iter().flatten().max().copied()
        } else {
            None
        };
        let dominates = worst.is_some_and(|o| o as u64 <= *t_bound);
        let obs_text = worst.map_or("not reached".to_string(), |o| o.to_string());
        let _ = writeln!(s, "{e:>10.1e} {t_bound:>12} {obs_text:>14} {dominates:>10}");
        w.row(&[
            num(*e),
            t_bound.to_string(),
            worst.map_or(String::new(), |o| o.to_string()),
            dominates.to_string(),
        ]);
        rows.push(json!({ "eps": e, "bound": t_bound, "observed": obs, "observed_max": worst, "bound_dominates": dominates }));
    }
    w.save(out.path("bounds.csv"))?;
    let mut curve = CsvWriter::from_owned(
        std::iter::once("k".to_string())
            .chain((0..trajs.len()).map(|i| format!("distance{i}")))
            .collect(),
    );
    let len = trajs.iter().map(|t| t.len()).min().unwrap_or(0);
    for r in (0..len).step_by(params.curve_stride.max(1)) {
        let mut row = vec![trajs[0].indices[r].to_string()];
        row.extend(trajs.iter().map(|t| num(t.distances.as_ref().map_or(f64::NAN, |d| d[r]))));
        curve.row(&row);
    }
    curve.save(out.path("distance_curve.csv"))?;
    out.json(
        "report.json",
        &json!({
            "center": center,
            "start_distances": start_dist,
            "spectral_bounds": sb,
            "local_spectral_bounds": local,
            "rate": rate,
            "cap": cap,
            "rows": rows,
            "final_distances": trajs.iter().map(|t| t.distances.as_ref().and_then(|d| d.last().copied())).collect::<Vec<_>>(),
        }),
    )
}

/// Output directory: explicit override, else the config's `output`, else
/// `out/<name>`.
pub fn output_dir(cfg: &ExperimentConfig, override_dir: Option<&Path>) -> PathBuf {
    override_dir
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name))
}
