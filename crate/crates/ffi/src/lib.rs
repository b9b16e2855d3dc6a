//! C ABI over the `nashlearn` core.
//!
//! Conventions:
//! * every fallible function returns an [`NlStatus`]; on failure the message
//!   is available from [`nl_last_error_message`] on the same thread;
//! * objects are opaque handles created by `nl_*_new`-style functions and
//!   released by the matching `*_free`;
//! * matrices are row-major `double` buffers;
//! * output buffers are caller-allocated with their lengths passed in.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nalgebra::DMatrix;
use nashlearn::dynamics::{
    simulate_deterministic, simulate_stochastic, LearningConfig, NoiseModel, Schedule, Status, Trajectory,
};
use nashlearn::equilibrium::{
    classify_point, estimate_spectral_bounds, iteration_bound_uniform, newton_refine, uniform_rate_interval,
};
use nashlearn::games::{game_by_id, matching_pennies_game, particle_game, torus_game};
use nashlearn::lq::{coupled_riccati_nash, lq_as_game, LqBenchmark, LqGame};
use nashlearn::{Error, Game, JointPoint};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Evaluation = 4,
    Domain = 5,
    Conditioning = 6,
    NotConverged = 7,
    Unstable = 8,
    Numerical = 9,
    Simulation = 10,
    Config = 11,
    Io = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

impl From<&Error> for NlStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Evaluation { .. } => NlStatus::Evaluation,
            Error::InvalidArgument { .. } => NlStatus::InvalidArgument,
            Error::Dimension { .. } => NlStatus::Dimension,
            Error::Domain(_) => NlStatus::Domain,
            Error::Conditioning(_) => NlStatus::Conditioning,
            Error::NotConverged { .. } => NlStatus::NotConverged,
            Error::Unstable { .. } => NlStatus::Unstable,
            Error::Numerical(_) => NlStatus::Numerical,
            Error::Simulation { .. } => NlStatus::Simulation,
            Error::Config(_) | Error::Json(_) => NlStatus::Config,
            Error::Io(_) => NlStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn fail(status: NlStatus, msg: impl Into<String>) -> NlStatus {
    set_error(msg);
    status
}

fn from_err(e: Error) -> NlStatus {
    let s = NlStatus::from(&e);
    fail(s, e.to_string())
}

/// Run `f`, converting panics into [`NlStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), NlStatus>) -> NlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            NlStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(NlStatus::Panic, "internal panic"),
    }
}

trait OrStatus<T> {
    fn st(self) -> Result<T, NlStatus>;
}

impl<T> OrStatus<T> for nashlearn::Result<T> {
    fn st(self) -> Result<T, NlStatus> {
        self.map_err(from_err)
    }
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], NlStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(NlStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], NlStatus> {
    if p.is_null() {
        return Err(fail(NlStatus::NullPointer, format!("{what} is null")));
    }
    if len < need {
        return Err(fail(
            NlStatus::BufferTooSmall,
            format!("{what} holds {len} values, need {need}"),
        ));
    }
    Ok(slice::from_raw_parts_mut(p, need))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, NlStatus> {
    p.as_mut()
        .ok_or_else(|| fail(NlStatus::NullPointer, format!("{what} is null")))
}

/// Opaque game handle.
pub struct NlGame {
    game: Game,
}

/// Opaque trajectory handle.
pub struct NlTrajectory {
    traj: Trajectory,
}

/// Opaque LQ game handle.
pub struct NlLqGame {
    game: LqGame,
}

unsafe fn game_ref<'a>(g: *const NlGame) -> Result<&'a Game, NlStatus> {
    g.as_ref()
        .map(|h| &h.game)
        .ok_or_else(|| fail(NlStatus::NullPointer, "game handle is null"))
}

unsafe fn point(game: &Game, x: *const f64, dim: usize) -> Result<JointPoint, NlStatus> {
    if dim != game.dim() {
        return Err(fail(
            NlStatus::Dimension,
            format!("point has {dim} coordinates, game has {}", game.dim()),
        ));
    }
    JointPoint::new(input(x, dim, "x")?.to_vec()).st()
}

fn boxed(game: Game) -> *mut NlGame {
    Box::into_raw(Box::new(NlGame { game }))
}

unsafe fn store_handle<T>(out: *mut *mut T, value: T) -> Result<(), NlStatus> {
    let slot = out_ref(out, "output handle")?;
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message describing the last failure on this thread; empty after success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn nl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Benchmark game by id: "lq3", "pennies", "torus" or "particles".
///
/// # Safety
/// `id` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nl_game_by_id(id: *const c_char, out: *mut *mut NlGame) -> NlStatus {
    guard(|| {
        if id.is_null() {
            return Err(fail(NlStatus::NullPointer, "id is null"));
        }
        let id = CStr::from_ptr(id)
            .to_str()
            .map_err(|_| fail(NlStatus::InvalidArgument, "id is not UTF-8"))?;
        let game = game_by_id(id).st()?;
        *out_ref(out, "out")? = boxed(game);
        Ok(())
    })
}

/// Two-player location game on the torus.
#[no_mangle]
pub extern "C" fn nl_game_torus() -> *mut NlGame {
    boxed(torus_game())
}

/// Smoothed matching pennies.
#[no_mangle]
pub extern "C" fn nl_game_pennies() -> *mut NlGame {
    boxed(matching_pennies_game())
}

/// Four-particle collision avoidance with the given horizon (>= 1).
#[no_mangle]
pub extern "C" fn nl_game_particles(horizon: usize) -> *mut NlGame {
    if horizon == 0 {
        set_error("horizon must be at least 1");
        return ptr::null_mut();
    }
    boxed(particle_game(horizon))
}

/// Quadratic game with game form `ω(x) = M x + b`: player `i` has cost
/// `½ x_iᵀ M_ii x_i + Σ_{j≠i} x_iᵀ M_ij x_j + b_iᵀ x_i`. Diagonal blocks
/// `M_ii` must be symmetric. `m` is `dim × dim` row-major.
///
/// # Safety
/// `dims` has `num_players` entries, `m` has `dim²` and `b` has `dim`.
#[no_mangle]
pub unsafe extern "C" fn nl_game_quadratic(
    num_players: usize,
    dims: *const usize,
    m: *const f64,
    b: *const f64,
    out: *mut *mut NlGame,
) -> NlStatus {
    guard(|| {
        if num_players == 0 || dims.is_null() {
            return Err(fail(NlStatus::InvalidArgument, "need at least one player"));
        }
        let dims = slice::from_raw_parts(dims, num_players).to_vec();
        let d: usize = dims.iter().sum();
        let mat = DMatrix::from_row_slice(d, d, input(m, d * d, "m")?);
        let bias = input(b, d, "b")?.to_vec();
        let mut offsets = vec![0];
        for di in &dims {
            offsets.push(offsets.last().unwrap() + di);
        }
        let mut builder = Game::builder(dims.clone()).name("quadratic");
        for i in 0..num_players {
            let (mat, bias, lo, hi) = (mat.clone(), bias.clone(), offsets[i], offsets[i + 1]);
            builder = builder.cost(i, move |x| {
                let mut c = 0.0;
                for r in lo..hi {
                    c += bias[r] * x[r];
                    for col in 0..x.len() {
                        let w = if (lo..hi).contains(&col) { 0.5 } else { 1.0 };
                        c += w * x[r] * mat[(r, col)] * x[col];
                    }
                }
                c
            });
        }
        let (m2, b2) = (mat.clone(), bias.clone());
        let game = builder
            .game_form(move |x| {
                let v = &m2 * nalgebra::DVector::from_column_slice(x);
                Ok(v.iter().zip(&b2).map(|(a, c)| a + c).collect())
            })
            .jacobian(move |_| mat.clone())
            .build()
            .st()?;
        *out_ref(out, "out")? = boxed(game);
        Ok(())
    })
}

/// Callback evaluating player `player`'s cost at `x` (length `dim`);
/// returns 0 on success.
pub type NlCostFn = Option<extern "C" fn(user: *mut c_void, player: usize, x: *const f64, dim: usize, cost: *mut f64) -> c_int>;

/// Callback writing the game form at `x` into `out` (both length `dim`);
/// returns 0 on success.
pub type NlGameFormFn = Option<extern "C" fn(user: *mut c_void, x: *const f64, dim: usize, out: *mut f64) -> c_int>;

#[derive(Clone, Copy)]
struct UserData(*mut c_void);
// SAFETY: the caller promises the callbacks are thread-safe for `user`.
unsafe impl Send for UserData {}
unsafe impl Sync for UserData {}

/// Game defined by C callbacks. `form` may be null, in which case gradients
/// come from central differences of `cost`. The callbacks may be invoked from
/// several threads at once and must be thread-safe for `user`.
///
/// # Safety
/// `dims` has `num_players` entries; `user` must outlive the game.
#[no_mangle]
pub unsafe extern "C" fn nl_game_from_callbacks(
    num_players: usize,
    dims: *const usize,
    cost: NlCostFn,
    form: NlGameFormFn,
    user: *mut c_void,
    out: *mut *mut NlGame,
) -> NlStatus {
    guard(|| {
        if num_players == 0 || dims.is_null() {
            return Err(fail(NlStatus::InvalidArgument, "need at least one player"));
        }
        let cost = cost.ok_or_else(|| fail(NlStatus::NullPointer, "cost callback is null"))?;
        let dims = slice::from_raw_parts(dims, num_players).to_vec();
        let ud = UserData(user);
        let mut builder = Game::builder(dims).name("callback");
        for i in 0..num_players {
            builder = builder.try_cost(i, move |x| {
                let ud = ud;
                let mut c = f64::NAN;
                match cost(ud.0, i, x.as_ptr(), x.len(), &mut c) {
                    0 => Ok(c),
                    code => Err(format!("cost callback returned {code}")),
                }
            });
        }
        if let Some(form) = form {
            builder = builder.game_form(move |x| {
                let ud = ud;
                let mut w = vec![f64::NAN; x.len()];
                match form(ud.0, x.as_ptr(), x.len(), w.as_mut_ptr()) {
                    0 => Ok(w),
                    code => Err(format!("game form callback returned {code}")),
                }
            });
        }
        *out_ref(out, "out")? = boxed(builder.build().st()?);
        Ok(())
    })
}

/// Release a game handle; null is ignored.
///
/// # Safety
/// `game` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nl_game_free(game: *mut NlGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

/// Joint dimension, or 0 for a null handle.
///
/// # Safety
/// `game` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nl_game_dim(game: *const NlGame) -> usize {
    game.as_ref().map_or(0, |g| g.game.dim())
}

/// Number of players, or 0 for a null handle.
///
/// # Safety
/// `game` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nl_game_num_players(game: *const NlGame) -> usize {
    game.as_ref().map_or(0, |g| g.game.num_players())
}

/// Game form `ω(x)` into `out` (length >= dim).
///
/// # Safety
/// `x` has `dim` entries and `out` has `out_len`.
#[no_mangle]
pub unsafe extern "C" fn nl_game_form(
    game: *const NlGame,
    x: *const f64,
    dim: usize,
    out: *mut f64,
    out_len: usize,
) -> NlStatus {
    guard(|| {
        let g = game_ref(game)?;
        let p = point(g, x, dim)?;
        let w = g.game_form(&p).st()?;
        output(out, out_len, dim, "out")?.copy_from_slice(&w);
        Ok(())
    })
}

/// Game Jacobian at `x`, row-major into `out` (length >= dim²).
///
/// # Safety
/// `x` has `dim` entries and `out` has `out_len`.
#[no_mangle]
pub unsafe extern "C" fn nl_game_jacobian(
    game: *const NlGame,
    x: *const f64,
    dim: usize,
    out: *mut f64,
    out_len: usize,
) -> NlStatus {
    guard(|| {
        let g = game_ref(game)?;
        let p = point(g, x, dim)?;
        let (j, _) = g.jacobian_matrix(p.as_slice()).st()?;
        let o = output(out, out_len, dim * dim, "out")?;
        for r in 0..dim {
            for c in 0..dim {
                o[r * dim + c] = j[(r, c)];
            }
        }
        Ok(())
    })
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct NlClassification {
    pub omega_norm: f64,
    pub is_critical: bool,
    pub is_differential_nash: bool,
    pub is_stable: bool,
}

/// Classify `x` as critical / differential Nash / stable with tolerance `tol`.
///
/// # Safety
/// `x` has `dim` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nl_classify(
    game: *const NlGame,
    x: *const f64,
    dim: usize,
    tol: f64,
    out: *mut NlClassification,
) -> NlStatus {
    guard(|| {
        let g = game_ref(game)?;
        let p = point(g, x, dim)?;
        let r = classify_point(g, &p, tol).st()?;
        *out_ref(out, "out")? = NlClassification {
            omega_norm: r.omega_norm,
            is_critical: r.is_critical,
            is_differential_nash: r.is_differential_nash,
            is_stable: r.is_stable,
        };
        Ok(())
    })
}

/// Newton iteration on `ω = 0` from `x0`; the refined point goes to `out`.
///
/// # Safety
/// `x0` has `dim` entries and `out` has `out_len`.
#[no_mangle]
pub unsafe extern "C" fn nl_newton_refine(
    game: *const NlGame,
    x0: *const f64,
    dim: usize,
    max_iters: usize,
    tol: f64,
    out: *mut f64,
    out_len: usize,
) -> NlStatus {
    guard(|| {
        let g = game_ref(game)?;
        let p = point(g, x0, dim)?;
        let r = newton_refine(g, &p, max_iters, tol).st()?;
        output(out, out_len, dim, "out")?.copy_from_slice(r.as_slice());
        Ok(())
    })
}

/// Largest uniform step keeping gradient play locally stable at `x`.
/// `*present` is false when some Jacobian eigenvalue has non-positive real
/// part (no such step exists).
///
/// # Safety
/// `x` has `dim` entries; `rate` and `present` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nl_uniform_rate_interval(
    game: *const NlGame,
    x: *const f64,
    dim: usize,
    rate: *mut f64,
    present: *mut bool,
) -> NlStatus {
    guard(|| {
        let g = game_ref(game)?;
        let p = point(g, x, dim)?;
        let (j, _) = g.jacobian_matrix(p.as_slice()).st()?;
        let v = uniform_rate_interval(&j).st()?;
        *out_ref(present, "present")? = v.is_some();
        *out_ref(rate, "rate")? = v.unwrap_or(0.0);
        Ok(())
    })
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct NlSpectralBounds {
    pub alpha: f64,
    pub beta: f64,
    pub uniform_rate: f64,
    pub contraction_factor: f64,
    pub min_symmetric_eig: f64,
}

/// Spectral constants over the ball of radius `r` around `center` from
/// `samples` seeded draws plus the center.
///
/// # Safety
/// `center` has `dim` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nl_spectral_bounds(
    game: *const NlGame,
    center: *const f64,
    dim: usize,
    r: f64,
    samples: usize,
    seed: u64,
    out: *mut NlSpectralBounds,
) -> NlStatus {
    guard(|| {
        let g = game_ref(game)?;
        let p = point(g, center, dim)?;
        let b = estimate_spectral_bounds(g, &p, r, samples, seed).st()?;
        *out_ref(out, "out")? = NlSpectralBounds {
            alpha: b.alpha,
            beta: b.beta,
            uniform_rate: b.uniform_rate(),
            contraction_factor: b.contraction_factor(),
            min_symmetric_eig: b.min_symmetric_eig,
        };
        Ok(())
    })
}

/// `⌈2(β/α) ln(r/ε)⌉`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nl_iteration_bound_uniform(alpha: f64, beta: f64, r: f64, eps: f64, out: *mut u64) -> NlStatus {
    guard(|| {
        *out_ref(out, "out")? = iteration_bound_uniform(alpha, beta, r, eps).st()?;
        Ok(())
    })
}

/// Deterministic gradient play with constant per-player `rates`. `stride` 0
/// selects the default thinning.
///
/// # Safety
/// `x0` has `dim` entries, `rates` has `num_rates`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nl_simulate_deterministic(
    game: *const NlGame,
    x0: *const f64,
    dim: usize,
    rates: *const f64,
    num_rates: usize,
    stop_tol: f64,
    max_iters: usize,
    stride: usize,
    out: *mut *mut NlTrajectory,
) -> NlStatus {
    guard(|| {
        let g = game_ref(game)?;
        let p = point(g, x0, dim)?;
        let mut cfg = LearningConfig::constant(input(rates, num_rates, "rates")?.to_vec(), stop_tol, max_iters);
        if stride > 0 {
            cfg = cfg.with_stride(stride);
        }
        let traj = simulate_deterministic(g, &p, &cfg).st()?;
        store_handle(out, NlTrajectory { traj })
    })
}

/// Step-size schedule kinds for [`nl_simulate_stochastic`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NlScheduleKind {
    /// `1/(1+k)`.
    Inverse = 0,
    /// `1/(1+k ln(k+1))`.
    InverseLog = 1,
    /// Fixed value taken from the matching `params` entry.
    Constant = 2,
}

/// Noisy gradient play with per-player schedules and Gaussian noise of
/// per-player scale `sigma`, seeded by `seed`.
///
/// # Safety
/// `x0` has `dim` entries; `kinds`, `params` and `sigma` have `num_players`
/// entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nl_simulate_stochastic(
    game: *const NlGame,
    x0: *const f64,
    dim: usize,
    kinds: *const NlScheduleKind,
    params: *const f64,
    sigma: *const f64,
    num_players: usize,
    stop_tol: f64,
    max_iters: usize,
    stride: usize,
    seed: u64,
    out: *mut *mut NlTrajectory,
) -> NlStatus {
    guard(|| {
        let g = game_ref(game)?;
        let p = point(g, x0, dim)?;
        if kinds.is_null() && num_players > 0 {
            return Err(fail(NlStatus::NullPointer, "kinds is null"));
        }
        let kinds = slice::from_raw_parts(kinds, num_players);
        let params = input(params, num_players, "params")?;
        let schedules = kinds
            .iter()
            .zip(params)
            .map(|(k, v)| match k {
                NlScheduleKind::Inverse => Schedule::Inverse,
                NlScheduleKind::InverseLog => Schedule::InverseLog,
                NlScheduleKind::Constant => Schedule::Constant(*v),
            })
            .collect();
        let mut cfg = LearningConfig::scheduled(schedules, stop_tol, max_iters);
        if stride > 0 {
            cfg = cfg.with_stride(stride);
        }
        let noise = NoiseModel::gaussian(input(sigma, num_players, "sigma")?.to_vec(), seed);
        let traj = simulate_stochastic(g, &p, &cfg, &noise).st()?;
        store_handle(out, NlTrajectory { traj })
    })
}

/// Release a trajectory; null is ignored.
///
/// # Safety
/// `traj` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nl_trajectory_free(traj: *mut NlTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of stored points (0 for null).
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nl_trajectory_len(traj: *const NlTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.traj.len())
}

/// Updates performed (0 for null).
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nl_trajectory_iters(traj: *const NlTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.traj.iters)
}

/// 0 converged, 1 iteration cap reached, 2 diverged, -1 null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nl_trajectory_status(traj: *const NlTrajectory) -> c_int {
    traj.as_ref().map_or(-1, |t| match t.traj.status {
        Status::Converged => 0,
        Status::MaxIters => 1,
        Status::Diverged => 2,
    })
}

/// Stored point `index` into `out`, with its iteration number in `*iter`
/// when `iter` is not null.
///
/// # Safety
/// `out` has `out_len` entries; `iter` is null or writable.
#[no_mangle]
pub unsafe extern "C" fn nl_trajectory_point(
    traj: *const NlTrajectory,
    index: usize,
    out: *mut f64,
    out_len: usize,
    iter: *mut usize,
) -> NlStatus {
    guard(|| {
        let t = &traj
            .as_ref()
            .ok_or_else(|| fail(NlStatus::NullPointer, "trajectory is null"))?
            .traj;
        let p = t.points.get(index).ok_or_else(|| {
            fail(NlStatus::InvalidArgument, format!("index {index} out of range (len {})", t.len()))
        })?;
        output(out, out_len, p.len(), "out")?.copy_from_slice(p.as_slice());
        if let Some(it) = iter.as_mut() {
            *it = t.indices[index];
        }
        Ok(())
    })
}

/// `‖ω‖` at every stored point into `out` (length >= len).
///
/// # Safety
/// `out` has `out_len` entries.
#[no_mangle]
pub unsafe extern "C" fn nl_trajectory_omega_norms(traj: *const NlTrajectory, out: *mut f64, out_len: usize) -> NlStatus {
    guard(|| {
        let t = &traj
            .as_ref()
            .ok_or_else(|| fail(NlStatus::NullPointer, "trajectory is null"))?
            .traj;
        output(out, out_len, t.len(), "out")?.copy_from_slice(&t.omega_norms);
        Ok(())
    })
}

/// LQ game from its JSON description (`A`, `B`, `Q`, `R`, `Sigma0` as
/// row-major nested arrays).
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nl_lq_game_from_json(json: *const c_char, out: *mut *mut NlLqGame) -> NlStatus {
    guard(|| {
        if json.is_null() {
            return Err(fail(NlStatus::NullPointer, "json is null"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| fail(NlStatus::InvalidArgument, "json is not UTF-8"))?;
        let game: LqGame = serde_json::from_str(text).map_err(|e| from_err(e.into()))?;
        store_handle(out, NlLqGame { game })
    })
}

/// The bundled three-player benchmark; `calibrated` selects the calibrated
/// initial-state second moment instead of the identity.
#[no_mangle]
pub extern "C" fn nl_lq_benchmark(calibrated: bool) -> *mut NlLqGame {
    let b = if calibrated {
        LqBenchmark::calibrated()
    } else {
        LqBenchmark::standard()
    };
    Box::into_raw(Box::new(NlLqGame { game: b.game }))
}

/// Release an LQ game; null is ignored.
///
/// # Safety
/// `lq` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nl_lq_free(lq: *mut NlLqGame) {
    if !lq.is_null() {
        drop(Box::from_raw(lq));
    }
}

/// Total number of gain entries (sum of input dims times state dim).
///
/// # Safety
/// `lq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nl_lq_gain_len(lq: *const NlLqGame) -> usize {
    lq.as_ref().map_or(0, |h| h.game.gain_dims().iter().sum())
}

/// Feedback Nash gains by the coupled Riccati iteration, flattened per
/// player in row-major order.
///
/// # Safety
/// `out` has `out_len` entries.
#[no_mangle]
pub unsafe extern "C" fn nl_lq_nash(
    lq: *const NlLqGame,
    tol: f64,
    max_iters: usize,
    out: *mut f64,
    out_len: usize,
) -> NlStatus {
    guard(|| {
        let g = &lq
            .as_ref()
            .ok_or_else(|| fail(NlStatus::NullPointer, "LQ handle is null"))?
            .game;
        let k = coupled_riccati_nash(g, tol, max_iters).st()?.flatten();
        output(out, out_len, k.len(), "out")?.copy_from_slice(&k);
        Ok(())
    })
}

/// The LQ game as a game over flattened gains with the policy gradient as
/// game form.
///
/// # Safety
/// `lq` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nl_lq_as_game(lq: *const NlLqGame, out: *mut *mut NlGame) -> NlStatus {
    guard(|| {
        let g = &lq
            .as_ref()
            .ok_or_else(|| fail(NlStatus::NullPointer, "LQ handle is null"))?
            .game;
        *out_ref(out, "out")? = boxed(lq_as_game(g));
        Ok(())
    })
}
