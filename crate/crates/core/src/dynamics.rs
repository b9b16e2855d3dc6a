//! Deterministic and stochastic simultaneous gradient play.
//!
//! Each player updates its own block with its own rate,
//! `x_{i,k+1} = x_{i,k} − γ_{i,k} (D_i f_i(x_k) + w_{i,k+1})`,
//! where `w` is zero in the deterministic case. Per-player clocks
//! `t_{i,k} = Σ_{l<k} γ_{i,l}` are recorded next to the iterates so that
//! two-timescale runs can be compared against their continuous-time limits.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, JointPoint};
use crate::linalg;
use crate::sampling::{self, SimRng};

/// Abort when `‖x_k‖ > DIVERGENCE_FACTOR · (1 + ‖x_0‖)`.
pub const DIVERGENCE_FACTOR: f64 = 1e6;
/// Trailing window of `‖ω‖` used to stop noisy runs.
pub const STOCHASTIC_WINDOW: usize = 100;
/// Number of stored points the default stride aims for.
pub const DEFAULT_STORED_POINTS: usize = 10_000;

/// Step-size schedule `γ_k`, `k = 0, 1, …`.
///
/// * `Inverse`: `1/(1+k)`. Diverging sum, square-summable.
/// * `InverseLog`: `1/(1 + k ln(k+1))`, equal to 1 at `k = 0`. Diverging sum
///   (like `1/(k ln k)`), square-summable, and `o(1/(1+k))`.
/// * `Constant(c)`: neither property; used for deterministic play.
/// * `Table(v)`: user values, the last entry repeated beyond the table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    Inverse,
    InverseLog,
    Constant(f64),
    Table(Vec<f64>),
}

impl Schedule {
    pub fn rate(&self, k: usize) -> f64 {
        let kf = k as f64;
        match self {
            Schedule::Inverse => 1.0 / (1.0 + kf),
            Schedule::InverseLog => 1.0 / (1.0 + kf * (kf + 1.0).ln()),
            Schedule::Constant(c) => *c,
            Schedule::Table(v) => v.get(k).or(v.last()).copied().unwrap_or(0.0),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Schedule::Constant(c) => *c > 0.0 && c.is_finite(),
            Schedule::Table(v) => !v.is_empty() && v.iter().all(|g| *g > 0.0 && g.is_finite()),
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument {
                arg: "schedule",
                reason: format!("step sizes must be positive and finite: {self:?}"),
            })
        }
    }
}

/// Per-player learning rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rates {
    Constant(Vec<f64>),
    Schedule(Vec<Schedule>),
}

impl Rates {
    pub fn uniform(n: usize, gamma: f64) -> Self {
        Rates::Constant(vec![gamma; n])
    }

    pub fn num_players(&self) -> usize {
        match self {
            Rates::Constant(v) => v.len(),
            Rates::Schedule(v) => v.len(),
        }
    }

    pub fn rate(&self, player: usize, k: usize) -> f64 {
        match self {
            Rates::Constant(v) => v[player],
            Rates::Schedule(v) => v[player].rate(k),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Rates::Constant(_))
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.num_players() != n {
            return Err(Error::Dimension {
                expected: n,
                got: self.num_players(),
            });
        }
        match self {
            Rates::Constant(v) => {
                if let Some(g) = v.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
                    return Err(Error::InvalidArgument {
                        arg: "rates",
                        reason: format!("constant rates must be positive, got {g}"),
                    });
                }
                Ok(())
            }
            Rates::Schedule(v) => v.iter().try_for_each(Schedule::validate),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Deterministic,
    Stochastic,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LearningConfig {
    #[serde(default)]
    pub mode: Mode,
    pub rates: Rates,
    pub stop_tol: f64,
    pub max_iters: usize,
    #[serde(default)]
    pub target: Option<JointPoint>,
    /// Store every `stride`-th iterate; defaults to `max(1, max_iters / 10⁴)`.
    #[serde(default)]
    pub stride: Option<usize>,
}

impl LearningConfig {
    pub fn constant(rates: Vec<f64>, stop_tol: f64, max_iters: usize) -> Self {
        LearningConfig {
            mode: Mode::Deterministic,
            rates: Rates::Constant(rates),
            stop_tol,
            max_iters,
            target: None,
            stride: None,
        }
    }

    pub fn scheduled(schedules: Vec<Schedule>, stop_tol: f64, max_iters: usize) -> Self {
        LearningConfig {
            mode: Mode::Stochastic,
            rates: Rates::Schedule(schedules),
            stop_tol,
            max_iters,
            target: None,
            stride: None,
        }
    }

    pub fn with_target(mut self, target: JointPoint) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = Some(stride);
        self
    }

    pub fn effective_stride(&self) -> usize {
        self.stride
            .unwrap_or_else(|| (self.max_iters / DEFAULT_STORED_POINTS).max(1))
            .max(1)
    }

    fn validate(&self, game: &Game) -> Result<()> {
        self.rates.validate(game.num_players())?;
        if !(self.stop_tol >= 0.0) {
            return Err(Error::InvalidArgument {
                arg: "stop_tol",
                reason: format!("must be non-negative, got {}", self.stop_tol),
            });
        }
        if let Some(t) = &self.target {
            if t.len() != game.dim() {
                return Err(Error::Dimension {
                    expected: game.dim(),
                    got: t.len(),
                });
            }
        }
        Ok(())
    }
}

/// Custom noise hook: `(k, x_k, rng) -> w_{k+1}` over the joint vector.
pub type NoiseFn = Arc<dyn Fn(usize, &[f64], &mut SimRng) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub enum NoiseKind {
    Zero,
    /// Isotropic per player with standard deviation `sigma[i]` per coordinate.
    Gaussian,
    Custom(NoiseFn),
}

impl fmt::Debug for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseKind::Zero => write!(f, "Zero"),
            NoiseKind::Gaussian => write!(f, "Gaussian"),
            NoiseKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma: Vec<f64>,
    pub seed: u64,
}

impl NoiseModel {
    pub fn zero() -> Self {
        NoiseModel {
            kind: NoiseKind::Zero,
            sigma: Vec::new(),
            seed: 0,
        }
    }

    pub fn gaussian(sigma: Vec<f64>, seed: u64) -> Self {
        NoiseModel {
            kind: NoiseKind::Gaussian,
            sigma,
            seed,
        }
    }

    pub fn custom(f: NoiseFn, seed: u64) -> Self {
        NoiseModel {
            kind: NoiseKind::Custom(f),
            sigma: Vec::new(),
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        NoiseModel {
            seed,
            ..self.clone()
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, NoiseKind::Zero)
    }

    fn validate(&self, game: &Game) -> Result<()> {
        if let NoiseKind::Gaussian = self.kind {
            if self.sigma.len() != game.num_players() {
                return Err(Error::Dimension {
                    expected: game.num_players(),
                    got: self.sigma.len(),
                });
            }
            if let Some(s) = self.sigma.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
                return Err(Error::InvalidArgument {
                    arg: "sigma",
                    reason: format!("noise scale must be non-negative, got {s}"),
                });
            }
        }
        Ok(())
    }

    fn sample(&self, game: &Game, k: usize, x: &[f64], rng: &mut SimRng) -> Result<Vec<f64>> {
        match &self.kind {
            NoiseKind::Zero => Ok(vec![0.0; x.len()]),
            NoiseKind::Gaussian => Ok((0..x.len())
                .map(|j| self.sigma[game.owner_of(j)] * rng.sample::<f64, _>(StandardNormal))
                .collect()),
            NoiseKind::Custom(f) => {
                let w = f(k, x, rng);
                if w.len() != x.len() || w.iter().any(|v| !v.is_finite()) {
                    return Err(Error::eval(None, x, "custom noise returned an invalid sample"));
                }
                Ok(w)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIters,
    Diverged,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    /// Iteration index of every stored point.
    pub indices: Vec<usize>,
    pub points: Vec<JointPoint>,
    /// Per stored point, the per-player clocks `t_{i,k}`.
    pub clocks: Vec<Vec<f64>>,
    /// `‖ω(x_k)‖` per stored point.
    pub omega_norms: Vec<f64>,
    pub distances: Option<Vec<f64>>,
    /// Number of updates performed.
    pub iters: usize,
    pub status: Status,
    pub stride: usize,
    pub seed: Option<u64>,
}

impl Trajectory {
    fn new(stride: usize, seed: Option<u64>, with_dist: bool) -> Self {
        Trajectory {
            indices: Vec::new(),
            points: Vec::new(),
            clocks: Vec::new(),
            omega_norms: Vec::new(),
            distances: with_dist.then(Vec::new),
            iters: 0,
            status: Status::MaxIters,
            stride,
            seed,
        }
    }

    pub fn final_point(&self) -> &JointPoint {
        self.points.last().expect("trajectory always stores x_0")
    }

    pub fn final_omega_norm(&self) -> f64 {
        *self.omega_norms.last().expect("trajectory always stores x_0")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

struct RunOptions<'a> {
    noise: Option<&'a NoiseModel>,
    rng: Option<SimRng>,
    seed: Option<u64>,
    window: usize,
    never_stop: bool,
    record: bool,
}

/// Shared update loop. `observe(k, x_k)` sees every iterate, stored or not.
fn run(
    game: &Game,
    x0: &JointPoint,
    cfg: &LearningConfig,
    mut opts: RunOptions<'_>,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<Trajectory> {
    cfg.validate(game)?;
    if x0.len() != game.dim() {
        return Err(Error::Dimension {
            expected: game.dim(),
            got: x0.len(),
        });
    }
    let n = game.num_players();
    let stride = cfg.effective_stride();
    let mut traj = Trajectory::new(stride, opts.seed, cfg.target.is_some());
    let mut x = x0.as_slice().to_vec();
    game.wrap_in_place(&mut x);
    let guard = DIVERGENCE_FACTOR * (1.0 + linalg::norm2(x0.as_slice()));
    let mut clocks = vec![0.0; n];
    let mut window = std::collections::VecDeque::with_capacity(opts.window);
    let mut window_sum = 0.0;

    let record = |traj: &mut Trajectory, k: usize, x: &[f64], clocks: &[f64], w: f64| {
        if traj.indices.last() == Some(&k) {
            return;
        }
        traj.indices.push(k);
        traj.points.push(JointPoint::new(x.to_vec()).expect("iterates are finite"));
        traj.clocks.push(clocks.to_vec());
        traj.omega_norms.push(w);
        if let (Some(d), Some(t)) = (traj.distances.as_mut(), cfg.target.as_ref()) {
            d.push(game.distance(x, t.as_slice()));
        }
    };

    let mut k = 0usize;
    loop {
        observe(k, &x);
        let omega = match game.game_form_slice(&x) {
            Ok(w) => w,
            Err(e) => {
                traj.iters = k;
                return Err(Error::Simulation {
                    source: Box::new(e),
                    partial: Box::new(traj),
                });
            }
        };
        let wn = linalg::norm2(&omega);
        if window.len() == opts.window {
            window_sum -= window.pop_front().unwrap_or(0.0);
        }
        window.push_back(wn);
        window_sum += wn;

        let keep = opts.record && k.is_multiple_of(stride);
        if keep || k == 0 {
            record(&mut traj, k, &x, &clocks, wn);
        }
        let stop = !opts.never_stop
            && window.len() == opts.window
            && window_sum / opts.window as f64 <= cfg.stop_tol;
        if stop || k >= cfg.max_iters {
            traj.status = if stop { Status::Converged } else { Status::MaxIters };
            record(&mut traj, k, &x, &clocks, wn);
            traj.iters = k;
            return Ok(traj);
        }

        let noise = match (opts.noise, opts.rng.as_mut()) {
            (Some(nm), Some(rng)) if !nm.is_zero() => match nm.sample(game, k, &x, rng) {
                Ok(w) => Some(w),
                Err(e) => {
                    traj.iters = k;
                    return Err(Error::Simulation {
                        source: Box::new(e),
                        partial: Box::new(traj),
                    });
                }
            },
            _ => None,
        };
        for (i, clock) in clocks.iter_mut().enumerate() {
            let g = cfg.rates.rate(i, k);
            for j in game.player_range(i) {
                let w = noise.as_ref().map_or(0.0, |v| v[j]);
                x[j] -= g * (omega[j] + w);
            }
            *clock += g;
        }
        game.wrap_in_place(&mut x);
        k += 1;

        let xn = linalg::norm2(&x);
        if !(xn <= guard) {
            traj.status = Status::Diverged;
            traj.iters = k;
            if x.iter().all(|v| v.is_finite()) {
                let wn = game
                    .game_form_slice(&x)
                    .map(|w| linalg::norm2(&w))
                    .unwrap_or(f64::NAN);
                record(&mut traj, k, &x, &clocks, wn);
            }
            return Ok(traj);
        }
    }
}

/// Deterministic gradient play `x_{k+1} = x_k − Γ ω(x_k)` with constant rates.
pub fn simulate_deterministic(game: &Game, x0: &JointPoint, cfg: &LearningConfig) -> Result<Trajectory> {
    if !cfg.rates.is_constant() {
        return Err(Error::InvalidArgument {
            arg: "rates",
            reason: "deterministic play uses constant per-player rates".into(),
        });
    }
    let opts = RunOptions {
        noise: None,
        rng: None,
        seed: None,
        window: 1,
        never_stop: false,
        record: true,
    };
    run(game, x0, cfg, opts, |_, _| {})
}

/// Noisy gradient play. Stops when the trailing mean of `‖ω‖` over
/// [`STOCHASTIC_WINDOW`] iterates falls below `stop_tol`; with zero noise the
/// window is a single iterate, so the run coincides with the deterministic one.
pub fn simulate_stochastic(
    game: &Game,
    x0: &JointPoint,
    cfg: &LearningConfig,
    noise: &NoiseModel,
) -> Result<Trajectory> {
    noise.validate(game)?;
    let opts = RunOptions {
        noise: Some(noise),
        rng: Some(sampling::rng_from_seed(noise.seed)),
        seed: Some(noise.seed),
        window: if noise.is_zero() { 1 } else { STOCHASTIC_WINDOW },
        never_stop: false,
        record: true,
    };
    run(game, x0, cfg, opts, |_, _| {})
}

/// Minimizer of `f_fast(·, x_other)` reached by own-gradient descent of the
/// fast player with the other players frozen. `init` seeds the descent
/// (zeros when absent).
pub fn best_response_map(
    game: &Game,
    fast_player: usize,
    others: &[f64],
    inner: &LearningConfig,
    init: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if game.num_players() != 2 {
        return Err(Error::InvalidArgument {
            arg: "game",
            reason: "fast equilibrium map is defined for two-player games".into(),
        });
    }
    if fast_player > 1 {
        return Err(Error::InvalidArgument {
            arg: "fast_player",
            reason: format!("player index {fast_player} out of range"),
        });
    }
    let fast = game.player_range(fast_player);
    let slow = game.player_range(1 - fast_player);
    if others.len() != slow.len() {
        return Err(Error::Dimension {
            expected: slow.len(),
            got: others.len(),
        });
    }
    let gamma = inner.rates.rate(fast_player, 0);
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument {
            arg: "inner_cfg",
            reason: "inner descent needs a positive rate".into(),
        });
    }
    let mut x = vec![0.0; game.dim()];
    x[slow.clone()].copy_from_slice(others);
    if let Some(init) = init {
        if init.len() != fast.len() {
            return Err(Error::Dimension {
                expected: fast.len(),
                got: init.len(),
            });
        }
        x[fast.clone()].copy_from_slice(init);
    }
    let mut residual = f64::INFINITY;
    for k in 0..=inner.max_iters {
        let g = game.player_gradient(fast_player, &x)?;
        residual = linalg::norm2(&g);
        if residual <= inner.stop_tol {
            let mut out = x[fast.clone()].to_vec();
            game.wrap_in_place(&mut out);
            return Ok(out);
        }
        if k == inner.max_iters {
            break;
        }
        let step = inner.rates.rate(fast_player, k);
        for (xj, gj) in x[fast.clone()].iter_mut().zip(&g) {
            *xj -= step * gj;
        }
        game.wrap_in_place(&mut x);
    }
    Err(Error::NotConverged {
        iters: inner.max_iters,
        residual,
        last: x[fast].to_vec(),
        history: Vec::new(),
    })
}

/// `λ(x_2)`: the fast player's (player 0) equilibrium for frozen `x_2`.
pub fn fast_equilibrium_map(game: &Game, x2: &[f64], inner: &LearningConfig) -> Result<Vec<f64>> {
    best_response_map(game, 0, x2, inner, None)
}

/// `e_k = ‖x_{fast,k} − λ(x_{slow,k})‖` at each stored point; each inner
/// descent is warm-started from the fast player's current iterate.
pub fn tracking_diagnostic_for(
    traj: &Trajectory,
    game: &Game,
    fast_player: usize,
    inner: &LearningConfig,
) -> Result<Vec<f64>> {
    let fast = game.player_range(fast_player);
    let slow = game.player_range(1 - fast_player.min(1));
    traj.points
        .par_iter()
        .map(|p| {
            let x = p.as_slice();
            let lam = best_response_map(game, fast_player, &x[slow.clone()], inner, Some(&x[fast.clone()]))?;
            Ok(game.distance(&x[fast.clone()], &lam))
        })
        .collect()
}

/// Tracking error of player 0 against `λ(x_2)`.
pub fn tracking_diagnostic(traj: &Trajectory, game: &Game, inner: &LearningConfig) -> Result<Vec<f64>> {
    tracking_diagnostic_for(traj, game, 0, inner)
}

/// Fraction of `trials` noisy runs, started uniformly in `B_r(x_star)`, whose
/// iterates stay in `B_ε(x_star)` for every `k` in `[burn_in_iters, max_iters]`.
///
/// Trial `t` uses the stream `derive_seed(noise.seed, t)` for both its
/// initial point and its noise. Runs ignore `stop_tol` and always use the
/// full horizon. A diverged trial counts as not locked in.
#[allow(clippy::too_many_arguments)]
pub fn lockin_probability(
    game: &Game,
    x_star: &JointPoint,
    eps: f64,
    r: f64,
    cfg: &LearningConfig,
    noise: &NoiseModel,
    trials: usize,
    burn_in_iters: usize,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidArgument {
            arg: "trials",
            reason: "need at least one trial".into(),
        });
    }
    if !(eps > 0.0) || !(r > 0.0) {
        return Err(Error::InvalidArgument {
            arg: "eps/r",
            reason: format!("radii must be positive, got eps={eps}, r={r}"),
        });
    }
    noise.validate(game)?;
    let locked = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = sampling::derive_seed(noise.seed, t as u64);
            let mut rng = sampling::rng_from_seed(seed);
            let mut x0 = sampling::sample_ball(&mut rng, x_star.as_slice(), r);
            game.wrap_in_place(&mut x0);
            let x0 = JointPoint::new(x0)?;
            let mut inside = true;
            let opts = RunOptions {
                noise: Some(noise),
                rng: Some(rng),
                seed: Some(seed),
                window: 1,
                never_stop: true,
                record: false,
            };
            let traj = match run(game, &x0, cfg, opts, |k, x| {
                if k >= burn_in_iters && inside && game.distance(x, x_star.as_slice()) > eps {
                    inside = false;
                }
            }) {
                Ok(t) => t,
                Err(Error::Simulation { .. }) => return Ok(false),
                Err(e) => return Err(e),
            };
            Ok(inside && traj.status != Status::Diverged)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(locked.iter().filter(|&&b| b).count() as f64 / trials as f64)
}

/// Numerical check that `slow_k / fast_k → 0` monotonically beyond some index.
/// Returns that index, or an error describing the violation.
pub fn check_timescale_separation(fast: &Schedule, slow: &Schedule, horizon: usize) -> Result<usize> {
    if horizon < 4 {
        return Err(Error::InvalidArgument {
            arg: "horizon",
            reason: "horizon too short to judge monotonicity".into(),
        });
    }
    let tau = |k: usize| slow.rate(k) / fast.rate(k);
    let mut last_increase = 0;
    let mut prev = tau(0);
    for k in 1..horizon {
        let cur = tau(k);
        if cur > prev {
            last_increase = k;
        }
        prev = cur;
    }
    let start = last_increase;
    if start > horizon / 2 {
        return Err(Error::Domain(format!(
            "rate ratio still increasing at index {start} of {horizon}"
        )));
    }
    if !(prev < 0.5 * tau(start)) {
        return Err(Error::Domain(format!(
            "rate ratio does not decay: {} at {start}, {prev} at {}",
            tau(start),
            horizon - 1
        )));
    }
    Ok(start)
}
