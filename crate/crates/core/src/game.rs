//! Continuous n-player games: costs, the game form and the game Jacobian.
//!
//! A [`Game`] holds one cost per player over a joint strategy vector. The
//! game form stacks each player's gradient of its own cost with respect to its
//! own coordinates. When a player has no analytic gradient it is obtained by
//! central finite differences on the cost, and the game Jacobian falls back to
//! central differences of the game form.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Complex64};

/// Fallible scalar cost of one player.
pub type CostFn = Arc<dyn Fn(&[f64]) -> std::result::Result<f64, String> + Send + Sync>;
/// Fallible vector map (a player's own gradient, or the whole game form).
pub type VecFn = Arc<dyn Fn(&[f64]) -> std::result::Result<Vec<f64>, String> + Send + Sync>;
pub type JacobianFn =
    Arc<dyn Fn(&[f64]) -> std::result::Result<DMatrix<f64>, String> + Send + Sync>;

/// Joint strategy vector with finite entries.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct JointPoint(Vec<f64>);

impl JointPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(i) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument {
                arg: "coords",
                reason: format!("non-finite entry {} at index {i}", coords[i]),
            });
        }
        Ok(JointPoint(coords))
    }

    /// Concatenate per-player blocks.
    pub fn join(parts: &[&[f64]]) -> Result<Self> {
        JointPoint::new(parts.concat())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Split into per-player blocks according to `dims`.
    pub fn split(&self, dims: &[usize]) -> Result<Vec<&[f64]>> {
        let total: usize = dims.iter().sum();
        if total != self.0.len() {
            return Err(Error::Dimension {
                expected: total,
                got: self.0.len(),
            });
        }
        let mut out = Vec::with_capacity(dims.len());
        let mut start = 0;
        for &d in dims {
            out.push(&self.0[start..start + d]);
            start += d;
        }
        Ok(out)
    }
}

impl<'de> Deserialize<'de> for JointPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        JointPoint::new(v).map_err(serde::de::Error::custom)
    }
}

impl TryFrom<Vec<f64>> for JointPoint {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        JointPoint::new(v)
    }
}

impl AsRef<[f64]> for JointPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMethod {
    Analytic,
    FiniteDifference,
}

/// Game Jacobian at a point together with its spectral data.
#[derive(Clone, Debug, Serialize)]
pub struct JacobianReport {
    pub point: JointPoint,
    #[serde(with = "linalg::serde_rows")]
    pub jacobian: DMatrix<f64>,
    /// Symmetric part `(J + Jᵀ)/2`.
    #[serde(with = "linalg::serde_rows")]
    pub symmetric: DMatrix<f64>,
    pub eigenvalues: Vec<Complex64>,
    /// Ascending eigenvalues of each player's own Hessian block `D_i² f_i`.
    pub block_eigenvalues: Vec<Vec<f64>>,
    pub method: DerivativeMethod,
}

/// Default central-difference step for coordinate value `xj`.
pub fn default_fd_step(xj: f64) -> f64 {
    f64::max(1e-6, 1e-6 * xj.abs())
}

/// Step for second differences taken directly on costs.
pub fn second_order_fd_step(xj: f64) -> f64 {
    f64::max(1e-4, 1e-4 * xj.abs())
}

/// Re-anchor an evaluation failure hit at a perturbed point to the base point.
fn at_base(e: Error, x: &[f64]) -> Error {
    match e {
        Error::Evaluation { player, reason, .. } => Error::Evaluation {
            player,
            point: x.to_vec(),
            reason: format!("{reason} (during finite differencing)"),
        },
        other => other,
    }
}

/// Wrap an angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid may round up to exactly 2π
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

#[derive(Clone)]
pub struct Game {
    name: String,
    dims: Vec<usize>,
    offsets: Vec<usize>,
    costs: Vec<CostFn>,
    grads: Vec<Option<VecFn>>,
    form: Option<VecFn>,
    jacobian: Option<JacobianFn>,
    periodic: bool,
}

impl fmt::Debug for Game {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Game")
            .field("name", &self.name)
            .field("dims", &self.dims)
            .field("analytic_form", &self.form.is_some())
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("periodic", &self.periodic)
            .finish()
    }
}

pub struct GameBuilder {
    name: String,
    dims: Vec<usize>,
    costs: Vec<Option<CostFn>>,
    grads: Vec<Option<VecFn>>,
    form: Option<VecFn>,
    jacobian: Option<JacobianFn>,
    periodic: bool,
}

impl GameBuilder {
    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn cost<F>(self, player: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.try_cost(player, move |x| Ok(f(x)))
    }

    pub fn try_cost<F>(mut self, player: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> std::result::Result<f64, String> + Send + Sync + 'static,
    {
        if let Some(slot) = self.costs.get_mut(player) {
            *slot = Some(Arc::new(f));
        }
        self
    }

    /// Analytic `D_i f_i`; must return `dims[player]` entries.
    pub fn gradient<F>(self, player: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.try_gradient(player, move |x| Ok(f(x)))
    }

    pub fn try_gradient<F>(mut self, player: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> std::result::Result<Vec<f64>, String> + Send + Sync + 'static,
    {
        if let Some(slot) = self.grads.get_mut(player) {
            *slot = Some(Arc::new(f));
        }
        self
    }

    /// Analytic game form for all players at once. Takes precedence over
    /// per-player gradients.
    pub fn game_form<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64]) -> std::result::Result<Vec<f64>, String> + Send + Sync + 'static,
    {
        self.form = Some(Arc::new(f));
        self
    }

    pub fn jacobian<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(move |x| Ok(f(x))));
        self
    }

    /// Every coordinate is an angle identified modulo 2π.
    pub fn periodic(mut self, periodic: bool) -> Self {
        self.periodic = periodic;
        self
    }

    pub fn build(self) -> Result<Game> {
        if self.dims.is_empty() {
            return Err(Error::InvalidArgument {
                arg: "dims",
                reason: "a game needs at least one player".into(),
            });
        }
        if self.dims.contains(&0) {
            return Err(Error::InvalidArgument {
                arg: "dims",
                reason: "player dimensions must be positive".into(),
            });
        }
        let costs = self
            .costs
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                c.ok_or(Error::InvalidArgument {
                    arg: "cost",
                    reason: format!("missing cost for player {i}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut offsets = Vec::with_capacity(self.dims.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for d in &self.dims {
            acc += d;
            offsets.push(acc);
        }
        Ok(Game {
            name: self.name,
            dims: self.dims,
            offsets,
            costs,
            grads: self.grads,
            form: self.form,
            jacobian: self.jacobian,
            periodic: self.periodic,
        })
    }
}

impl Game {
    pub fn builder(dims: Vec<usize>) -> GameBuilder {
        let n = dims.len();
        GameBuilder {
            name: "game".into(),
            dims,
            costs: vec![None; n],
            grads: vec![None; n],
            form: None,
            jacobian: None,
            periodic: false,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_players(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Total dimension `d = Σ d_i`.
    pub fn dim(&self) -> usize {
        self.offsets[self.dims.len()]
    }

    pub fn player_range(&self, player: usize) -> Range<usize> {
        self.offsets[player]..self.offsets[player + 1]
    }

    /// Player index owning joint coordinate `j`.
    pub fn owner_of(&self, j: usize) -> usize {
        self.offsets.partition_point(|&o| o <= j) - 1
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn has_analytic_gradient(&self, player: usize) -> bool {
        self.form.is_some() || self.grads[player].is_some()
    }

    pub fn point(&self, coords: Vec<f64>) -> Result<JointPoint> {
        let p = JointPoint::new(coords)?;
        self.check_len(p.as_slice())?;
        Ok(p)
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Wrap periodic coordinates into `[-π, π)`; identity otherwise.
    pub fn wrap_in_place(&self, x: &mut [f64]) {
        if self.periodic {
            for v in x.iter_mut() {
                *v = wrap_angle(*v);
            }
        }
    }

    /// Euclidean distance, or wrapped angular distance for periodic games.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        if self.periodic {
            a.iter()
                .zip(b)
                .map(|(x, y)| wrap_angle(x - y).powi(2))
                .sum::<f64>()
                .sqrt()
        } else {
            linalg::dist2(a, b)
        }
    }

    pub fn cost(&self, player: usize, x: &[f64]) -> Result<f64> {
        self.check_len(x)?;
        let v = (self.costs[player])(x).map_err(|r| Error::eval(Some(player), x, r))?;
        if !v.is_finite() {
            return Err(Error::eval(Some(player), x, format!("non-finite cost {v}")));
        }
        Ok(v)
    }

    /// Central-difference `D_i f_i` with a fixed step `h`.
    pub fn finite_diff_gradient(&self, player: usize, x: &JointPoint, h: f64) -> Result<Vec<f64>> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument {
                arg: "h",
                reason: format!("step must be positive, got {h}"),
            });
        }
        self.fd_gradient_with(player, x.as_slice(), |_| h)
    }

    fn fd_gradient_with(
        &self,
        player: usize,
        x: &[f64],
        step: impl Fn(f64) -> f64,
    ) -> Result<Vec<f64>> {
        self.check_len(x)?;
        let mut xp = x.to_vec();
        self.player_range(player)
            .map(|j| {
                let h = step(x[j]);
                xp[j] = x[j] + h;
                let fp = self.cost(player, &xp).map_err(|e| at_base(e, x))?;
                xp[j] = x[j] - h;
                let fm = self.cost(player, &xp).map_err(|e| at_base(e, x))?;
                xp[j] = x[j];
                Ok((fp - fm) / (2.0 * h))
            })
            .collect()
    }

    /// `D_i f_i(x)`, analytic when available.
    pub fn player_gradient(&self, player: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        let g = if let Some(form) = &self.form {
            let w = form(x).map_err(|r| Error::eval(Some(player), x, r))?;
            w[self.player_range(player)].to_vec()
        } else if let Some(grad) = &self.grads[player] {
            grad(x).map_err(|r| Error::eval(Some(player), x, r))?
        } else {
            self.fd_gradient_with(player, x, default_fd_step)?
        };
        self.check_block(player, x, &g)?;
        Ok(g)
    }

    fn check_block(&self, player: usize, x: &[f64], g: &[f64]) -> Result<()> {
        if g.len() != self.dims[player] {
            return Err(Error::eval(
                Some(player),
                x,
                format!("gradient has {} entries, expected {}", g.len(), self.dims[player]),
            ));
        }
        if let Some(v) = g.iter().find(|v| !v.is_finite()) {
            return Err(Error::eval(Some(player), x, format!("non-finite gradient entry {v}")));
        }
        Ok(())
    }

    /// Game form on a raw slice; used on hot paths that already hold a
    /// validated vector.
    pub fn game_form_slice(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        if let Some(form) = &self.form {
            let w = form(x).map_err(|r| Error::eval(None, x, r))?;
            if w.len() != self.dim() {
                return Err(Error::eval(
                    None,
                    x,
                    format!("game form has {} entries, expected {}", w.len(), self.dim()),
                ));
            }
            if let Some(i) = w.iter().position(|v| !v.is_finite()) {
                return Err(Error::eval(Some(self.owner_of(i)), x, "non-finite game form"));
            }
            return Ok(w);
        }
        let mut out = Vec::with_capacity(self.dim());
        for i in 0..self.num_players() {
            out.extend(self.player_gradient(i, x)?);
        }
        Ok(out)
    }

    /// The game form `ω(x) = (D_1 f_1(x), …, D_n f_n(x))`.
    pub fn game_form(&self, x: &JointPoint) -> Result<Vec<f64>> {
        self.game_form_slice(x.as_slice())
    }

    /// Central differences of the game form over the full joint vector.
    /// Rows of players without an analytic gradient come from mixed second
    /// differences of their cost instead of nested first differences.
    pub fn finite_diff_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let d = self.dim();
        self.check_len(x)?;
        if (0..self.num_players()).any(|i| !self.has_analytic_gradient(i)) {
            return self.cost_hessian_jacobian(x);
        }
        let mut jac = DMatrix::zeros(d, d);
        let mut xp = x.to_vec();
        for j in 0..d {
            let h = default_fd_step(x[j]);
            xp[j] = x[j] + h;
            let wp = self.game_form_slice(&xp)?;
            xp[j] = x[j] - h;
            let wm = self.game_form_slice(&xp)?;
            xp[j] = x[j];
            for i in 0..d {
                jac[(i, j)] = (wp[i] - wm[i]) / (2.0 * h);
            }
        }
        Ok(jac)
    }

    fn cost_hessian_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let mut jac = DMatrix::zeros(d, d);
        let mut xp = x.to_vec();
        for player in 0..self.num_players() {
            let rows = self.player_range(player);
            if self.has_analytic_gradient(player) {
                for j in 0..d {
                    let h = default_fd_step(x[j]);
                    xp[j] = x[j] + h;
                    let gp = self.player_gradient(player, &xp).map_err(|e| at_base(e, x))?;
                    xp[j] = x[j] - h;
                    let gm = self.player_gradient(player, &xp).map_err(|e| at_base(e, x))?;
                    xp[j] = x[j];
                    for (r, (a, b)) in rows.clone().zip(gp.iter().zip(&gm)) {
                        jac[(r, j)] = (a - b) / (2.0 * h);
                    }
                }
                continue;
            }
            for r in rows {
                let hr = second_order_fd_step(x[r]);
                for j in 0..d {
                    let hj = second_order_fd_step(x[j]);
                    let mut corner = |sr: f64, sj: f64| -> Result<f64> {
                        xp[r] += sr * hr;
                        xp[j] += sj * hj;
                        let v = self.cost(player, &xp).map_err(|e| at_base(e, x));
                        xp[r] = x[r];
                        xp[j] = x[j];
                        v
                    };
                    let v = corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)? + corner(-1.0, -1.0)?;
                    jac[(r, j)] = v / (4.0 * hr * hj);
                }
            }
        }
        Ok(jac)
    }

    /// Jacobian matrix only; analytic when supplied.
    pub fn jacobian_matrix(&self, x: &[f64]) -> Result<(DMatrix<f64>, DerivativeMethod)> {
        self.check_len(x)?;
        match &self.jacobian {
            Some(jf) => {
                let m = jf(x).map_err(|r| Error::eval(None, x, r))?;
                if m.nrows() != self.dim() || m.ncols() != self.dim() {
                    return Err(Error::eval(None, x, "analytic Jacobian has wrong shape"));
                }
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::eval(None, x, "non-finite Jacobian entry"));
                }
                Ok((m, DerivativeMethod::Analytic))
            }
            None => Ok((self.finite_diff_jacobian(x)?, DerivativeMethod::FiniteDifference)),
        }
    }

    /// Own-cost Hessian block `D_i² f_i` extracted from a game Jacobian.
    pub fn block(&self, jac: &DMatrix<f64>, player: usize) -> DMatrix<f64> {
        let r = self.player_range(player);
        jac.view((r.start, r.start), (r.len(), r.len())).into_owned()
    }

    pub fn game_jacobian(&self, x: &JointPoint) -> Result<JacobianReport> {
        let (jacobian, method) = self.jacobian_matrix(x.as_slice())?;
        let symmetric = linalg::symmetric_part(&jacobian);
        let eigenvalues = linalg::eigenvalues(&jacobian)?;
        let block_eigenvalues = (0..self.num_players())
            .map(|i| linalg::symmetric_eigenvalues(&linalg::symmetric_part(&self.block(&jacobian, i))))
            .collect();
        Ok(JacobianReport {
            point: x.clone(),
            jacobian,
            symmetric,
            eigenvalues,
            block_eigenvalues,
            method,
        })
    }
}
