//! Open-loop collision avoidance between particles with double-integrator
//! dynamics. Each particle chooses its whole control sequence; costs combine
//! control effort, distance to target and pairwise proximity penalties.
//!
//! Player `i` owns `u_i(0), …, u_i(N−1)` (two entries each, time-major) and
//! its state `z = (position, velocity)` obeys `z(t+1) = A z(t) + B u(t)`.
//! Tracking and proximity terms are charged on `z(1), …, z(N)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, Matrix4x2, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Game;

pub const DEFAULT_HORIZON: usize = 50;
pub const NUM_PARTICLES: usize = 4;
/// Players whose relative learning rates are varied in the warping runs.
pub const RED: usize = 0;
pub const BLUE: usize = 2;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParticleGame {
    pub horizon: usize,
    pub step: f64,
    /// Proximity penalty height.
    pub rho: f64,
    /// Proximity penalty sharpness.
    pub sigma: f64,
    pub control_weight: Matrix2<f64>,
    pub state_weight: Matrix4<f64>,
    pub separation_weight: Matrix4<f64>,
    pub starts: Vec<Vector4<f64>>,
    pub targets: Vec<Vector4<f64>>,
}

impl ParticleGame {
    /// Four particles on the left half of the unit circle, spaced by `π/5`,
    /// each headed for the antipodal point at rest.
    pub fn benchmark(horizon: usize) -> Self {
        let angles = [7.0, 9.0, 11.0, 13.0].map(|k| k * PI / 10.0);
        let starts: Vec<_> = angles.iter().map(|a| Vector4::new(a.cos(), a.sin(), 0.0, 0.0)).collect();
        let targets = starts.iter().map(|s| Vector4::new(-s[0], -s[1], 0.0, 0.0)).collect();
        let pos = Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 0.0, 0.0));
        ParticleGame {
            horizon,
            step: 0.1,
            rho: 10.0,
            sigma: 100.0,
            control_weight: Matrix2::from_diagonal(&Vector2::new(0.1, 0.1)),
            state_weight: pos,
            separation_weight: pos,
            starts,
            targets,
        }
    }

    pub fn num_players(&self) -> usize {
        self.starts.len()
    }

    pub fn controls_per_player(&self) -> usize {
        2 * self.horizon
    }

    pub fn dynamics(&self) -> (Matrix4<f64>, Matrix4x2<f64>) {
        let h = self.step;
        #[rustfmt::skip]
        let a = Matrix4::new(
            1.0, 0.0, h, 0.0,
            0.0, 1.0, 0.0, h,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        #[rustfmt::skip]
        let b = Matrix4x2::new(
            h * h, 0.0,
            0.0, h * h,
            h, 0.0,
            0.0, h,
        );
        (a, b)
    }

    fn control(u: &[f64], t: usize) -> Vector2<f64> {
        Vector2::new(u[2 * t], u[2 * t + 1])
    }

    /// States `z(0), …, z(N)` of one particle under its control sequence.
    pub fn rollout(&self, player: usize, controls: &[f64]) -> Vec<Vector4<f64>> {
        let (a, b) = self.dynamics();
        let mut z = Vec::with_capacity(self.horizon + 1);
        z.push(self.starts[player]);
        for t in 0..self.horizon {
            let next = a * z[t] + b * Self::control(controls, t);
            z.push(next);
        }
        z
    }

    fn player_slice<'a>(&self, u: &'a [f64], i: usize) -> &'a [f64] {
        let m = self.controls_per_player();
        &u[i * m..(i + 1) * m]
    }

    fn rollouts(&self, u: &[f64]) -> Vec<Vec<Vector4<f64>>> {
        (0..self.num_players())
            .map(|i| self.rollout(i, self.player_slice(u, i)))
            .collect()
    }

    fn proximity(&self, zi: &Vector4<f64>, zj: &Vector4<f64>) -> (f64, Vector4<f64>) {
        let d = zi - zj;
        let sd = self.separation_weight * d;
        (self.rho * (-self.sigma * d.dot(&sd)).exp(), sd)
    }

    fn cost_from(&self, i: usize, u: &[f64], z: &[Vec<Vector4<f64>>]) -> f64 {
        let ui = self.player_slice(u, i);
        let mut c = 0.0;
        for t in 0..self.horizon {
            let v = Self::control(ui, t);
            c += v.dot(&(self.control_weight * v));
        }
        for (t, zt) in z[i].iter().enumerate().skip(1) {
            let e = zt - self.targets[i];
            c += e.dot(&(self.state_weight * e));
            for j in (0..self.num_players()).filter(|&j| j != i) {
                c += self.proximity(zt, &z[j][t]).0;
            }
        }
        c
    }

    /// Exact gradient of player `i`'s cost in its own controls, by the
    /// backward costate recursion through the linear rollout.
    fn gradient_from(&self, i: usize, u: &[f64], z: &[Vec<Vector4<f64>>]) -> Vec<f64> {
        let (a, b) = self.dynamics();
        let ui = self.player_slice(u, i);
        let n = self.horizon;
        let mut grad = vec![0.0; 2 * n];
        let mut costate = Vector4::zeros();
        for t in (1..=n).rev() {
            let mut g = 2.0 * self.state_weight * (z[i][t] - self.targets[i]);
            for j in (0..self.num_players()).filter(|&j| j != i) {
                let (pen, sd) = self.proximity(&z[i][t], &z[j][t]);
                g -= 2.0 * self.sigma * pen * sd;
            }
            costate = g + a.transpose() * costate;
            let s = t - 1;
            let gs = 2.0 * self.control_weight * Self::control(ui, s) + b.transpose() * costate;
            grad[2 * s] = gs[0];
            grad[2 * s + 1] = gs[1];
        }
        grad
    }

    pub fn cost(&self, player: usize, u: &[f64]) -> f64 {
        self.cost_from(player, u, &self.rollouts(u))
    }

    pub fn gradient(&self, player: usize, u: &[f64]) -> Vec<f64> {
        self.gradient_from(player, u, &self.rollouts(u))
    }

    pub fn game_form(&self, u: &[f64]) -> Vec<f64> {
        let z = self.rollouts(u);
        (0..self.num_players())
            .flat_map(|i| self.gradient_from(i, u, &z))
            .collect()
    }

    pub fn to_game(&self) -> Game {
        let mut b = Game::builder(vec![self.controls_per_player(); self.num_players()]).name("particles");
        for i in 0..self.num_players() {
            let g = self.clone();
            b = b.cost(i, move |u| g.cost(i, u));
        }
        let g = self.clone();
        b.game_form(move |u| Ok(g.game_form(u)))
            .build()
            .expect("particle game is complete")
    }
}

pub fn particle_game(horizon: usize) -> Game {
    ParticleGame::benchmark(horizon).to_game()
}

/// Joint controls minimizing each player's cost with the proximity terms
/// dropped, from the per-player normal equations.
pub fn decoupled_optimum(game: &ParticleGame) -> Result<Vec<f64>> {
    let (a, b) = game.dynamics();
    let n = game.horizon;
    let m = 2 * n;
    let mut out = Vec::with_capacity(m * game.num_players());
    for i in 0..game.num_players() {
        let mut hess = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        for t in 0..n {
            hess.view_mut((2 * t, 2 * t), (2, 2))
                .copy_from(&(2.0 * game.control_weight));
        }
        // sensitivity of z(t) to all controls, and the free response
        let mut sens = DMatrix::<f64>::zeros(4, m);
        let mut free = game.starts[i];
        for t in 1..=n {
            sens = DMatrix::from_column_slice(4, 4, a.as_slice()) * sens;
            sens.view_mut((0, 2 * (t - 1)), (4, 2)).copy_from(&b);
            free = a * free;
            let q = DMatrix::from_column_slice(4, 4, game.state_weight.as_slice());
            let err = DVector::from_column_slice((free - game.targets[i]).as_slice());
            hess += 2.0 * sens.transpose() * &q * &sens;
            rhs -= 2.0 * sens.transpose() * q * err;
        }
        let sol = hess
            .cholesky()
            .ok_or_else(|| Error::Numerical("singular normal equations".into()))?
            .solve(&rhs);
        out.extend(sol.iter());
    }
    Ok(out)
}
