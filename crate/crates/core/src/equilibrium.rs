//! Equilibrium certification and the spectral learning-rate bounds.
//!
//! The contraction argument for simultaneous gradient play uses two constants
//! over a ball `B_r(x*)` around a stable differential Nash equilibrium:
//! `α = min λ_min(SᵀS)` where `S` is the symmetric part of the game Jacobian,
//! and `β = max λ_max(JᵀJ)`. With a uniform rate `γ = √α/β` the update map
//! contracts by at least `√(1 − α/β)` per step, which gives an iteration count
//! of `⌈2(β/α) ln(r/ε)⌉` to reach `B_ε(x*)`.
//!
//! Both constants are estimated by seeded uniform sampling of the ball, so
//! `α` is an upper estimate of the true minimum and `β` a lower estimate of
//! the true maximum.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, JointPoint};
use crate::linalg::{self, Complex64};
use crate::sampling;

/// Default criticality tolerance on `‖ω‖`.
pub const DEFAULT_CRITICAL_TOL: f64 = 1e-6;
/// Margin used for strict positivity of real parts and eigenvalues.
pub const EIGEN_MARGIN: f64 = 1e-8;
pub const DEFAULT_SPECTRAL_SAMPLES: usize = 2000;
pub const DEFAULT_NEWTON_ITERS: usize = 100;

#[derive(Clone, Debug, Serialize)]
pub struct CriticalPointReport {
    pub point: JointPoint,
    pub omega_norm: f64,
    pub tol: f64,
    pub is_critical: bool,
    pub is_differential_nash: bool,
    pub is_stable: bool,
    pub eigenvalues: Vec<Complex64>,
    pub block_min_eigs: Vec<f64>,
}

/// Classify `x` as critical point, (ε-)differential Nash equilibrium and
/// stable equilibrium of gradient play.
pub fn classify_point(game: &Game, x: &JointPoint, tol: f64) -> Result<CriticalPointReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument {
            arg: "tol",
            reason: format!("tolerance must be positive, got {tol}"),
        });
    }
    let omega = game.game_form(x)?;
    let omega_norm = linalg::norm2(&omega);
    let report = game.game_jacobian(x)?;
    let block_min_eigs: Vec<f64> = report
        .block_eigenvalues
        .iter()
        .map(|e| e.first().copied().unwrap_or(f64::NAN))
        .collect();
    let is_critical = omega_norm <= tol;
    let is_differential_nash = is_critical && block_min_eigs.iter().all(|&l| l >= tol);
    let is_stable = report.eigenvalues.iter().all(|z| z.re > EIGEN_MARGIN);
    Ok(CriticalPointReport {
        point: x.clone(),
        omega_norm,
        tol,
        is_critical,
        is_differential_nash,
        is_stable,
        eigenvalues: report.eigenvalues,
        block_min_eigs,
    })
}

/// Polish a candidate equilibrium with undamped Newton steps on `ω`.
pub fn newton_refine(game: &Game, x0: &JointPoint, max_iters: usize, tol: f64) -> Result<JointPoint> {
    let mut x = x0.as_slice().to_vec();
    let mut history = Vec::new();
    for _ in 0..=max_iters {
        let omega = game.game_form_slice(&x)?;
        let res = linalg::norm2(&omega);
        history.push(res);
        if res <= tol {
            return JointPoint::new(x);
        }
        if history.len() > max_iters {
            break;
        }
        let (jac, _) = game.jacobian_matrix(&x)?;
        let step = jac
            .clone()
            .lu()
            .solve(&DVector::from_vec(omega))
            .ok_or_else(|| Error::Conditioning("singular game Jacobian in Newton step".into()))?;
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::Conditioning("non-finite Newton step".into()));
        }
        for (xi, si) in x.iter_mut().zip(step.iter()) {
            *xi -= si;
        }
        game.wrap_in_place(&mut x);
        if x.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    Err(Error::NotConverged {
        iters: max_iters,
        residual: history.last().copied().unwrap_or(f64::NAN),
        last: x,
        history,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralBounds {
    pub alpha: f64,
    pub beta: f64,
    pub radius: f64,
    pub center: JointPoint,
    pub num_samples: usize,
    pub seed: u64,
    /// Smallest eigenvalue of `S` over the sampled ball.
    pub min_symmetric_eig: f64,
    /// False when `S` failed to be positive definite at some sample.
    pub symmetric_positive_definite: bool,
    pub warnings: Vec<String>,
}

impl SpectralBounds {
    /// `γ = √α/β`.
    pub fn uniform_rate(&self) -> f64 {
        self.alpha.sqrt() / self.beta
    }

    /// Per-step contraction factor `√(1 − α/β)` at the uniform rate.
    pub fn contraction_factor(&self) -> f64 {
        (1.0 - self.alpha / self.beta).max(0.0).sqrt()
    }
}

struct SampleSpectra {
    sym_min_sq: f64,
    sym_min: f64,
    jtj_max: f64,
}

fn sample_spectra(jac: &DMatrix<f64>) -> SampleSpectra {
    let s = linalg::symmetric_part(jac);
    let sts = linalg::symmetric_part(&(s.transpose() * &s));
    let jtj = linalg::symmetric_part(&(jac.transpose() * jac));
    let sym_eigs = linalg::symmetric_eigenvalues(&s);
    SampleSpectra {
        sym_min_sq: linalg::symmetric_eigenvalues(&sts)[0],
        sym_min: sym_eigs[0],
        jtj_max: *linalg::symmetric_eigenvalues(&jtj).last().unwrap(),
    }
}

/// Center followed by `num_samples` uniform draws from `B_r(center)`.
pub fn ball_points(center: &[f64], r: f64, num_samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = sampling::rng_from_seed(seed);
    let mut pts = Vec::with_capacity(num_samples + 1);
    pts.push(center.to_vec());
    for _ in 0..num_samples {
        pts.push(sampling::sample_ball(&mut rng, center, r));
    }
    pts
}

fn check_ball_args(r: f64, num_samples: usize) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument {
            arg: "r",
            reason: format!("radius must be positive, got {r}"),
        });
    }
    if num_samples == 0 {
        return Err(Error::InvalidArgument {
            arg: "num_samples",
            reason: "need at least one sample".into(),
        });
    }
    Ok(())
}

fn spectral_bounds_with(
    center: &JointPoint,
    r: f64,
    num_samples: usize,
    seed: u64,
    jac_at: impl Fn(&[f64]) -> Result<DMatrix<f64>> + Sync,
) -> Result<SpectralBounds> {
    check_ball_args(r, num_samples)?;
    let pts = ball_points(center.as_slice(), r, num_samples, seed);
    let spectra = pts
        .par_iter()
        .map(|p| jac_at(p).map(|j| sample_spectra(&j)))
        .collect::<Result<Vec<_>>>()?;
    let alpha = spectra.iter().map(|s| s.sym_min_sq).fold(f64::INFINITY, f64::min);
    let beta = spectra.iter().map(|s| s.jtj_max).fold(0.0, f64::max);
    let min_symmetric_eig = spectra.iter().map(|s| s.sym_min).fold(f64::INFINITY, f64::min);
    let symmetric_positive_definite = min_symmetric_eig > 0.0;
    let mut warnings = Vec::new();
    if !symmetric_positive_definite {
        warnings.push(format!(
            "symmetric part not positive definite on the sampled ball (min eigenvalue {min_symmetric_eig:e})"
        ));
    }
    if alpha >= beta {
        warnings.push("alpha equals beta (repeated-eigenvalue degenerate case)".into());
    }
    Ok(SpectralBounds {
        alpha,
        beta,
        radius: r,
        center: center.clone(),
        num_samples,
        seed,
        min_symmetric_eig,
        symmetric_positive_definite,
        warnings,
    })
}

/// Estimate `α` and `β` over `B_r(center)` from `num_samples` uniform draws
/// plus the center.
pub fn estimate_spectral_bounds(
    game: &Game,
    center: &JointPoint,
    r: f64,
    num_samples: usize,
    seed: u64,
) -> Result<SpectralBounds> {
    spectral_bounds_with(center, r, num_samples, seed, |p| {
        game.jacobian_matrix(p).map(|(j, _)| j)
    })
}

/// Largest uniform step `γ̃` such that every `|1 − hλ_j(J*)| < 1` for
/// `h ∈ (0, γ̃)`. `None` when some eigenvalue has non-positive real part.
pub fn uniform_rate_interval(j_star: &DMatrix<f64>) -> Result<Option<f64>> {
    let eigs = linalg::eigenvalues(j_star)?;
    if eigs.is_empty() {
        return Err(Error::InvalidArgument {
            arg: "j_star",
            reason: "empty matrix".into(),
        });
    }
    if eigs.iter().any(|z| z.re <= 0.0) {
        return Ok(None);
    }
    Ok(Some(
        eigs.iter()
            .map(|z| 2.0 * z.re / z.norm_sqr())
            .fold(f64::INFINITY, f64::min),
    ))
}

fn check_eps(r: f64, eps: f64) -> Result<()> {
    if !(eps > 0.0) || !(eps <= r) {
        return Err(Error::Domain(format!("need 0 < eps <= r, got eps={eps}, r={r}")));
    }
    Ok(())
}

fn ceil_bound(v: f64) -> Result<u64> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Domain(format!("iteration bound not representable: {v}")));
    }
    Ok(v.ceil() as u64)
}

/// `⌈2(β/α) ln(r/ε)⌉`.
pub fn iteration_bound_uniform(alpha: f64, beta: f64, r: f64, eps: f64) -> Result<u64> {
    if !(alpha > 0.0) || !(alpha < beta) {
        return Err(Error::Domain(format!("need 0 < alpha < beta, got alpha={alpha}, beta={beta}")));
    }
    check_eps(r, eps)?;
    ceil_bound(2.0 * (beta / alpha) * (r / eps).ln())
}

/// Per-player rate scalings `k_i ≥ 1` giving rates `γ_i = √α/(β k_i)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateScalings {
    pub k: Vec<f64>,
    pub k_min: f64,
    pub alpha_tilde: Option<f64>,
    pub beta_tilde: Option<f64>,
}

impl RateScalings {
    pub fn new(k: Vec<f64>) -> Result<Self> {
        if k.is_empty() {
            return Err(Error::InvalidArgument {
                arg: "k",
                reason: "no scalings".into(),
            });
        }
        if let Some(bad) = k.iter().find(|&&v| !(v >= 1.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument {
                arg: "k",
                reason: format!("scalings must satisfy k_i >= 1, got {bad}"),
            });
        }
        let k_min = k.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(RateScalings {
            k,
            k_min,
            alpha_tilde: None,
            beta_tilde: None,
        })
    }

    pub fn uniform(n: usize) -> Self {
        RateScalings::new(vec![1.0; n]).expect("unit scalings are valid")
    }

    pub fn rates(&self, alpha: f64, beta: f64) -> Vec<f64> {
        self.k.iter().map(|k| alpha.sqrt() / (beta * k)).collect()
    }

    /// Fill `α̃`, `β̃` computed from the scaled game form `(D_i f_i / k_i)`.
    pub fn compute_tilde(
        &mut self,
        game: &Game,
        center: &JointPoint,
        r: f64,
        num_samples: usize,
        seed: u64,
    ) -> Result<()> {
        if self.k.len() != game.num_players() {
            return Err(Error::Dimension {
                expected: game.num_players(),
                got: self.k.len(),
            });
        }
        let scale: Vec<f64> = (0..game.dim()).map(|j| 1.0 / self.k[game.owner_of(j)]).collect();
        let b = spectral_bounds_with(center, r, num_samples, seed, |p| {
            let (mut j, _) = game.jacobian_matrix(p)?;
            for (row, s) in scale.iter().enumerate() {
                j.row_mut(row).scale_mut(*s);
            }
            Ok(j)
        })?;
        self.alpha_tilde = Some(b.alpha);
        self.beta_tilde = Some(b.beta);
        Ok(())
    }

    /// Whether `√α / k_min ≤ √α̃`; `None` until `α̃` is computed.
    pub fn hypothesis_holds(&self, alpha: f64) -> Option<bool> {
        self.alpha_tilde.map(|at| alpha.sqrt() / self.k_min <= at.sqrt())
    }
}

/// `⌈2(β k_min/α) ln(r/ε)⌉` for the non-uniform rates `γ_i = √α/(β k_i)`.
pub fn iteration_bound_nonuniform(
    alpha: f64,
    beta: f64,
    k: &RateScalings,
    r: f64,
    eps: f64,
) -> Result<u64> {
    if !(alpha > 0.0) || !(alpha < k.k_min * beta) {
        return Err(Error::Domain(format!(
            "need 0 < alpha < k_min*beta, got alpha={alpha}, k_min*beta={}",
            k.k_min * beta
        )));
    }
    check_eps(r, eps)?;
    ceil_bound(2.0 * (beta * k.k_min / alpha) * (r / eps).ln())
}

/// `‖I − ΓJ(x)‖₂` for per-player rates `gamma`.
pub fn contraction_norm(game: &Game, jac: &DMatrix<f64>, gamma: &[f64]) -> f64 {
    let d = game.dim();
    let mut m = DMatrix::identity(d, d);
    for i in 0..d {
        let g = gamma[game.owner_of(i)];
        for j in 0..d {
            m[(i, j)] -= g * jac[(i, j)];
        }
    }
    linalg::spectral_norm(&m)
}

/// Maximum of `‖I − ΓJ(x)‖₂` over the center and `num_samples` draws from
/// `B_r(center)`. A value below one certifies contraction on the sample.
pub fn contraction_check(
    game: &Game,
    center: &JointPoint,
    r: f64,
    gamma: &[f64],
    num_samples: usize,
    seed: u64,
) -> Result<f64> {
    check_ball_args(r, num_samples)?;
    if gamma.len() != game.num_players() {
        return Err(Error::Dimension {
            expected: game.num_players(),
            got: gamma.len(),
        });
    }
    let pts = ball_points(center.as_slice(), r, num_samples, seed);
    let norms = pts
        .par_iter()
        .map(|p| game.jacobian_matrix(p).map(|(j, _)| contraction_norm(game, &j, gamma)))
        .collect::<Result<Vec<_>>>()?;
    Ok(norms.into_iter().fold(0.0, f64::max))
}
