//! Linear-quadratic dynamic games in the space of linear feedback gains.
//!
//! Dynamics `z(t+1) = A z(t) + Σ_i B_i u_i(t)` with policies `u_i = −K_i z`.
//! Player `i` pays `E Σ_t z(t)ᵀ Q_i z(t) + Σ_j u_j(t)ᵀ R_ij u_j(t)` for
//! `z(0)` drawn with second moment `Σ₀`. For a stabilizing profile with
//! closed loop `Ã = A − Σ_j B_j K_j`:
//!
//! * `Σ_K = Ã Σ_K Ãᵀ + Σ₀`,
//! * `P_i = Ãᵀ P_i Ã + Q_i + Σ_j K_jᵀ R_ij K_j`,
//! * `f_i(K) = tr(P_i Σ₀)` and `∇_{K_i} f_i = 2 (R_ii K_i − B_iᵀ P_i Ã) Σ_K`.
//!
//! The feedback Nash equilibrium is also computed independently by the
//! iterative Lyapunov scheme for the coupled Riccati equations.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Game;
use crate::linalg::{self, serde_rows, serde_rows_vec};

const LYAP_RESIDUAL_TOL: f64 = 1e-10;
const DARE_RESIDUAL_TOL: f64 = 1e-8;
const PSD_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "LqGameDoc", into = "LqGameDoc")]
pub struct LqGame {
    a: DMatrix<f64>,
    b: Vec<DMatrix<f64>>,
    q: Vec<DMatrix<f64>>,
    r: Vec<Vec<DMatrix<f64>>>,
    sigma0: DMatrix<f64>,
}

/// JSON layout: matrices as row-major nested arrays.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LqGameDoc {
    #[serde(rename = "A", with = "serde_rows")]
    a: DMatrix<f64>,
    #[serde(rename = "B", with = "serde_rows_vec")]
    b: Vec<DMatrix<f64>>,
    #[serde(rename = "Q", with = "serde_rows_vec")]
    q: Vec<DMatrix<f64>>,
    #[serde(rename = "R")]
    r: Vec<RRow>,
    #[serde(rename = "Sigma0", with = "serde_rows")]
    sigma0: DMatrix<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(transparent)]
struct RRow(#[serde(with = "serde_rows_vec")] Vec<DMatrix<f64>>);

impl TryFrom<LqGameDoc> for LqGame {
    type Error = Error;
    fn try_from(d: LqGameDoc) -> Result<Self> {
        LqGame::new(d.a, d.b, d.q, d.r.into_iter().map(|r| r.0).collect(), d.sigma0)
    }
}

impl From<LqGame> for LqGameDoc {
    fn from(g: LqGame) -> Self {
        LqGameDoc {
            a: g.a,
            b: g.b,
            q: g.q,
            r: g.r.into_iter().map(RRow).collect(),
            sigma0: g.sigma0,
        }
    }
}

fn shape_err(what: &str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Error {
    Error::InvalidArgument {
        arg: "lq_game",
        reason: format!("{what} is {}x{}, expected {rows}x{cols}", m.nrows(), m.ncols()),
    }
}

fn check_sym(what: &str, m: &DMatrix<f64>, definite: bool) -> Result<()> {
    let asym = (m - m.transpose()).abs().max();
    if asym > 1e-12 * m.abs().max().max(1.0) {
        return Err(Error::InvalidArgument {
            arg: "lq_game",
            reason: format!("{what} is not symmetric"),
        });
    }
    let min = linalg::symmetric_eigenvalues(&linalg::symmetric_part(m))[0];
    let ok = if definite { min > 0.0 } else { min >= -PSD_TOL };
    if !ok {
        let kind = if definite { "positive definite" } else { "positive semidefinite" };
        return Err(Error::InvalidArgument {
            arg: "lq_game",
            reason: format!("{what} is not {kind} (min eigenvalue {min:e})"),
        });
    }
    Ok(())
}

impl LqGame {
    pub fn new(
        a: DMatrix<f64>,
        b: Vec<DMatrix<f64>>,
        q: Vec<DMatrix<f64>>,
        r: Vec<Vec<DMatrix<f64>>>,
        sigma0: DMatrix<f64>,
    ) -> Result<Self> {
        let nz = a.nrows();
        if !a.is_square() || nz == 0 {
            return Err(shape_err("A", &a, nz, nz));
        }
        let n = b.len();
        if n == 0 || q.len() != n || r.len() != n {
            return Err(Error::InvalidArgument {
                arg: "lq_game",
                reason: format!("player counts differ: B {n}, Q {}, R {}", q.len(), r.len()),
            });
        }
        for (i, bi) in b.iter().enumerate() {
            if bi.nrows() != nz || bi.ncols() == 0 {
                return Err(shape_err(&format!("B_{}", i + 1), bi, nz, bi.ncols().max(1)));
            }
        }
        for (i, qi) in q.iter().enumerate() {
            if qi.shape() != (nz, nz) {
                return Err(shape_err(&format!("Q_{}", i + 1), qi, nz, nz));
            }
            check_sym(&format!("Q_{}", i + 1), qi, false)?;
        }
        for (i, row) in r.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidArgument {
                    arg: "lq_game",
                    reason: format!("R row {} has {} blocks, expected {n}", i + 1, row.len()),
                });
            }
            for (j, rij) in row.iter().enumerate() {
                let m = b[j].ncols();
                if rij.shape() != (m, m) {
                    return Err(shape_err(&format!("R_{}{}", i + 1, j + 1), rij, m, m));
                }
                check_sym(&format!("R_{}{}", i + 1, j + 1), rij, i == j)?;
            }
        }
        if sigma0.shape() != (nz, nz) {
            return Err(shape_err("Sigma0", &sigma0, nz, nz));
        }
        check_sym("Sigma0", &sigma0, true)?;
        Ok(LqGame { a, b, q, r, sigma0 })
    }

    pub fn num_players(&self) -> usize {
        self.b.len()
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self, player: usize) -> usize {
        self.b[player].ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self, player: usize) -> &DMatrix<f64> {
        &self.b[player]
    }

    pub fn q(&self, player: usize) -> &DMatrix<f64> {
        &self.q[player]
    }

    pub fn r(&self, i: usize, j: usize) -> &DMatrix<f64> {
        &self.r[i][j]
    }

    pub fn sigma0(&self) -> &DMatrix<f64> {
        &self.sigma0
    }

    pub fn with_sigma0(&self, sigma0: DMatrix<f64>) -> Result<Self> {
        LqGame::new(self.a.clone(), self.b.clone(), self.q.clone(), self.r.clone(), sigma0)
    }

    /// Gains flattened per player in row-major order.
    pub fn gain_dims(&self) -> Vec<usize> {
        (0..self.num_players())
            .map(|i| self.input_dim(i) * self.state_dim())
            .collect()
    }

    /// `Ã = A − Σ_i B_i K_i`.
    pub fn closed_loop(&self, gains: &GainProfile) -> DMatrix<f64> {
        let mut at = self.a.clone();
        for (b, k) in self.b.iter().zip(&gains.k) {
            at -= b * k;
        }
        at
    }

    fn check_gains(&self, gains: &GainProfile) -> Result<()> {
        if gains.k.len() != self.num_players() {
            return Err(Error::Dimension {
                expected: self.num_players(),
                got: gains.k.len(),
            });
        }
        for (i, k) in gains.k.iter().enumerate() {
            if k.shape() != (self.input_dim(i), self.state_dim()) {
                return Err(shape_err(&format!("K_{}", i + 1), k, self.input_dim(i), self.state_dim()));
            }
        }
        Ok(())
    }
}

/// Joint linear feedback policy `u_i = −K_i z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainProfile {
    #[serde(with = "serde_rows_vec")]
    pub k: Vec<DMatrix<f64>>,
}

impl GainProfile {
    pub fn new(k: Vec<DMatrix<f64>>) -> Self {
        GainProfile { k }
    }

    pub fn zeros(game: &LqGame) -> Self {
        GainProfile {
            k: (0..game.num_players())
                .map(|i| DMatrix::zeros(game.input_dim(i), game.state_dim()))
                .collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.k
            .iter()
            .flat_map(|k| linalg::to_rows(k).into_iter().flatten())
            .collect()
    }

    pub fn from_flat(game: &LqGame, x: &[f64]) -> Result<Self> {
        let total: usize = game.gain_dims().iter().sum();
        if x.len() != total {
            return Err(Error::Dimension {
                expected: total,
                got: x.len(),
            });
        }
        let nz = game.state_dim();
        let mut off = 0;
        let k = (0..game.num_players())
            .map(|i| {
                let m = game.input_dim(i);
                let mat = DMatrix::from_row_slice(m, nz, &x[off..off + m * nz]);
                off += m * nz;
                mat
            })
            .collect();
        Ok(GainProfile { k })
    }

    pub fn is_stabilizing(&self, game: &LqGame) -> bool {
        linalg::spectral_radius(&game.closed_loop(self)).is_ok_and(|r| r < 1.0)
    }

    /// Largest Frobenius-norm difference over players.
    pub fn max_diff(&self, other: &GainProfile) -> f64 {
        self.k
            .iter()
            .zip(&other.k)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Solver for `P = Fᵀ P F + Q` that factors `I − Fᵀ⊗Fᵀ` once for many `Q`.
pub struct LyapunovSolver {
    f: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl LyapunovSolver {
    pub fn new(f: &DMatrix<f64>) -> Result<Self> {
        if !f.is_square() {
            return Err(shape_err("F", f, f.nrows(), f.nrows()));
        }
        let rho = linalg::spectral_radius(f)?;
        if !(rho < 1.0) {
            return Err(Error::Unstable { spectral_radius: rho });
        }
        let n = f.nrows();
        let ft = f.transpose();
        let sys = DMatrix::identity(n * n, n * n) - ft.kronecker(&ft);
        Ok(LyapunovSolver {
            f: f.clone(),
            lu: sys.lu(),
        })
    }

    fn residual(&self, p: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
        p - self.f.transpose() * p * &self.f - q
    }

    pub fn solve(&self, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.f.nrows();
        if q.shape() != (n, n) {
            return Err(shape_err("Q", q, n, n));
        }
        let solve_vec = |rhs: &DMatrix<f64>| -> Result<DMatrix<f64>> {
            let v = DVector::from_column_slice(rhs.as_slice());
            let sol = self
                .lu
                .solve(&v)
                .ok_or_else(|| Error::Conditioning("singular Lyapunov operator".into()))?;
            Ok(DMatrix::from_column_slice(n, n, sol.as_slice()))
        };
        let mut p = solve_vec(q)?;
        linalg::symmetrize_in_place(&mut p);
        let tol = LYAP_RESIDUAL_TOL * p.norm().max(1.0);
        let mut res = self.residual(&p, q);
        // one step of iterative refinement when roundoff bites
        if res.norm() > tol {
            p -= solve_vec(&res)?;
            linalg::symmetrize_in_place(&mut p);
            res = self.residual(&p, q);
        }
        if !(res.norm() <= tol) {
            return Err(Error::Numerical(format!(
                "Lyapunov residual {:e} above tolerance {tol:e}",
                res.norm()
            )));
        }
        Ok(p)
    }
}

/// Solve `P = Fᵀ P F + Q` for stable `F`.
pub fn solve_discrete_lyapunov(f: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    LyapunovSolver::new(f)?.solve(q)
}

/// Residual of `P = AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA + Q`, with the gain.
fn dare_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let btp = b.transpose() * p;
    let gain = linalg::solve(&(r + &btp * b), &(&btp * a))?;
    let res = a.transpose() * p * a - a.transpose() * p * b * &gain + q - p;
    Ok((res, gain))
}

/// Stabilizing solution of the discrete algebraic Riccati equation and the
/// gain `K = (R + BᵀPB)⁻¹BᵀPA`, by structure-preserving doubling.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n || q.shape() != (n, n) || r.shape() != (b.ncols(), b.ncols()) {
        return Err(Error::InvalidArgument {
            arg: "dare",
            reason: "incompatible matrix shapes".into(),
        });
    }
    check_sym("R", r, true)?;
    let id = DMatrix::<f64>::identity(n, n);
    let mut ak = a.clone();
    let mut gk = b * linalg::solve(r, &b.transpose())?;
    linalg::symmetrize_in_place(&mut gk);
    let mut hk = q.clone();
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..100 {
        let w = &id + &gk * &hk;
        let w_a = linalg::solve(&w, &ak)?;
        let w_g = linalg::solve(&w, &gk)?;
        let a_next = &ak * &w_a;
        let mut g_next = &gk + &ak * w_g * ak.transpose();
        let mut h_next = &hk + ak.transpose() * &hk * &w_a;
        linalg::symmetrize_in_place(&mut g_next);
        linalg::symmetrize_in_place(&mut h_next);
        let change = (&h_next - &hk).norm();
        history.push(change);
        ak = a_next;
        gk = g_next;
        hk = h_next;
        if !change.is_finite() {
            break;
        }
        if change <= 1e-15 * hk.norm().max(1.0) {
            converged = true;
            break;
        }
    }
    let mut p = hk;
    let mut residual = f64::INFINITY;
    if p.iter().all(|v| v.is_finite()) {
        // a few plain fixed-point sweeps polish the last digits
        for _ in 0..5 {
            let (res, _) = dare_residual(a, b, q, r, &p)?;
            residual = res.norm();
            if residual <= DARE_RESIDUAL_TOL * p.norm().max(1.0) * 1e-3 {
                break;
            }
            p += res;
            linalg::symmetrize_in_place(&mut p);
        }
        residual = dare_residual(a, b, q, r, &p)?.0.norm();
    }
    if !converged || !(residual <= DARE_RESIDUAL_TOL * p.norm().max(1.0)) {
        return Err(Error::NotConverged {
            iters: history.len(),
            residual,
            last: p.as_slice().to_vec(),
            history,
        });
    }
    let (_, k) = dare_residual(a, b, q, r, &p)?;
    let rho = linalg::spectral_radius(&(a - b * &k))?;
    if !(rho < 1.0) {
        return Err(Error::Unstable { spectral_radius: rho });
    }
    Ok((p, k))
}

#[derive(Clone, Debug, Serialize)]
pub struct LqValueReport {
    #[serde(with = "serde_rows_vec")]
    pub p: Vec<DMatrix<f64>>,
    #[serde(with = "serde_rows")]
    pub sigma_k: DMatrix<f64>,
    pub costs: Vec<f64>,
    #[serde(with = "serde_rows_vec")]
    pub gradients: Vec<DMatrix<f64>>,
}

impl LqValueReport {
    pub fn flat_gradient(&self) -> Vec<f64> {
        GainProfile::new(self.gradients.clone()).flatten()
    }
}

fn stage_weight(game: &LqGame, i: usize, gains: &GainProfile) -> DMatrix<f64> {
    let mut w = game.q[i].clone();
    for (j, kj) in gains.k.iter().enumerate() {
        w += kj.transpose() * &game.r[i][j] * kj;
    }
    linalg::symmetrize_in_place(&mut w);
    w
}

/// Value matrices, state covariance, costs and policy gradients at `gains`.
pub fn evaluate_gains(game: &LqGame, gains: &GainProfile) -> Result<LqValueReport> {
    game.check_gains(gains)?;
    let at = game.closed_loop(gains);
    let p_solver = LyapunovSolver::new(&at)?;
    let sigma_k = LyapunovSolver::new(&at.transpose())?.solve(&game.sigma0)?;
    let mut p = Vec::with_capacity(game.num_players());
    let mut costs = Vec::with_capacity(game.num_players());
    let mut gradients = Vec::with_capacity(game.num_players());
    for i in 0..game.num_players() {
        let pi = p_solver.solve(&stage_weight(game, i, gains))?;
        let grad = 2.0 * (&game.r[i][i] * &gains.k[i] - game.b[i].transpose() * &pi * &at) * &sigma_k;
        costs.push((&pi * &game.sigma0).trace());
        gradients.push(grad);
        p.push(pi);
    }
    Ok(LqValueReport {
        p,
        sigma_k,
        costs,
        gradients,
    })
}

/// Feedback Nash gains from the iterative Lyapunov scheme for the coupled
/// Riccati equations.
///
/// Initialization solves one Riccati equation per player in sequence, each on
/// the closed loop left by the previous players. Each sweep then updates every
/// gain against the others' previous gains,
/// `K_i ← (R_ii + B_iᵀP_iB_i)⁻¹ B_iᵀ P_i (A − Σ_{j≠i} B_j K_j)`,
/// and re-solves the Lyapunov equations for `P_i` at the new profile.
#[allow(clippy::needless_range_loop)]
pub fn coupled_riccati_nash(game: &LqGame, tol: f64, max_iters: usize) -> Result<GainProfile> {
    let n = game.num_players();
    let mut gains = GainProfile::zeros(game);
    let mut p = Vec::with_capacity(n);
    let mut a_bar = game.a.clone();
    for i in 0..n {
        let (pi, ki) = solve_dare(&a_bar, &game.b[i], &game.q[i], &game.r[i][i])?;
        a_bar -= &game.b[i] * &ki;
        gains.k[i] = ki;
        p.push(pi);
    }
    let mut history = Vec::new();
    for _ in 0..max_iters {
        let mut next = gains.clone();
        for i in 0..n {
            let mut a_i = game.a.clone();
            for j in (0..n).filter(|&j| j != i) {
                a_i -= &game.b[j] * &gains.k[j];
            }
            let btp = game.b[i].transpose() * &p[i];
            next.k[i] = linalg::solve(&(&game.r[i][i] + &btp * &game.b[i]), &(btp * a_i))?;
        }
        let change = next.max_diff(&gains);
        history.push(change);
        gains = next;
        if change <= tol {
            return Ok(gains);
        }
        let solver = LyapunovSolver::new(&game.closed_loop(&gains)).map_err(|e| match e {
            Error::Unstable { .. } => Error::NotConverged {
                iters: history.len(),
                residual: change,
                last: gains.flatten(),
                history: history.clone(),
            },
            other => other,
        })?;
        for (i, pi) in p.iter_mut().enumerate() {
            *pi = solver.solve(&stage_weight(game, i, &gains))?;
        }
    }
    Err(Error::NotConverged {
        iters: max_iters,
        residual: history.last().copied().unwrap_or(f64::NAN),
        last: gains.flatten(),
        history,
    })
}

/// Wrap an LQ game as a [`Game`] over flattened gains with the exact policy
/// gradient as game form. Destabilizing gains surface as evaluation errors.
pub fn lq_as_game(game: &LqGame) -> Game {
    let dims = game.gain_dims();
    let mut builder = Game::builder(dims).name("lq");
    for i in 0..game.num_players() {
        let g = game.clone();
        builder = builder.try_cost(i, move |x| {
            let gains = GainProfile::from_flat(&g, x).map_err(|e| e.to_string())?;
            evaluate_gains(&g, &gains)
                .map(|r| r.costs[i])
                .map_err(|e| e.to_string())
        });
    }
    let g = game.clone();
    builder
        .game_form(move |x| {
            let gains = GainProfile::from_flat(&g, x).map_err(|e| e.to_string())?;
            evaluate_gains(&g, &gains)
                .map(|r| r.flat_gradient())
                .map_err(|e| e.to_string())
        })
        .build()
        .expect("LQ game has a cost per player")
}

/// Perturb every gain entry by `U(−magnitude, magnitude)`, redrawing until the
/// closed loop is stable.
pub fn perturb_stable<R: Rng + ?Sized>(
    game: &LqGame,
    center: &GainProfile,
    magnitude: f64,
    rng: &mut R,
) -> Result<GainProfile> {
    let base = center.flatten();
    for _ in 0..10_000 {
        let x: Vec<f64> = base
            .iter()
            .map(|v| v + rng.random_range(-magnitude..=magnitude))
            .collect();
        let g = GainProfile::from_flat(game, &x)?;
        if g.is_stabilizing(game) {
            return Ok(g);
        }
    }
    Err(Error::Numerical("no stabilizing perturbation found".into()))
}

/// Bundled three-player benchmark system with its reference constants.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqBenchmark {
    pub name: String,
    pub game: LqGame,
    /// Reference Nash gains (three decimals).
    pub reference_gains: GainProfile,
    pub reference_alpha: f64,
    pub reference_beta: f64,
    pub reference_gamma: f64,
}

const LQ3_JSON: &str = include_str!("../data/lq3.json");

/// Diagonal initial-state second moment under which the spectral constants of
/// the benchmark at its Nash gains match the reference `α` and `β`. Fitted as
/// the most isotropic diagonal matrix meeting both values; see the README.
pub const CALIBRATED_SIGMA0_DIAG: [f64; 4] = [0.5925, 2.896, 0.7549, 0.2234];

impl LqBenchmark {
    /// Bundled benchmark with `Σ₀ = I`.
    pub fn standard() -> Self {
        serde_json::from_str(LQ3_JSON).expect("bundled LQ benchmark parses")
    }

    pub fn calibrated_sigma0() -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(&CALIBRATED_SIGMA0_DIAG))
    }

    /// The benchmark with the calibrated `Σ₀`.
    pub fn calibrated() -> Self {
        let mut b = Self::standard();
        b.game = b
            .game
            .with_sigma0(Self::calibrated_sigma0())
            .expect("calibrated Sigma0 is positive definite");
        b.name = format!("{}-calibrated", b.name);
        b
    }
}
