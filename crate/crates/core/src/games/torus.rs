//! Two-player location game on the torus.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::game::Game;

/// Preferred locations.
pub const PREFERRED: [f64; 2] = [0.0, PI / 8.0];
/// Weights on the preferred-location term.
pub const WEIGHTS: [f64; 2] = [1.0, 1.5];

/// Costs `−w_i cos(θ_i − c_i) + cos(θ_i − θ_other)` on angles wrapped to `[−π, π)`.
pub fn torus_game() -> Game {
    let other = |i: usize| 1 - i;
    let mut b = Game::builder(vec![1, 1]).name("torus").periodic(true);
    for i in 0..2 {
        b = b.cost(i, move |t| -WEIGHTS[i] * (t[i] - PREFERRED[i]).cos() + (t[i] - t[other(i)]).cos());
    }
    b.game_form(move |t| {
        Ok((0..2)
            .map(|i| WEIGHTS[i] * (t[i] - PREFERRED[i]).sin() - (t[i] - t[other(i)]).sin())
            .collect())
    })
    .jacobian(move |t| {
        let c = (t[0] - t[1]).cos();
        DMatrix::from_row_slice(
            2,
            2,
            &[
                WEIGHTS[0] * (t[0] - PREFERRED[0]).cos() - c,
                c,
                c,
                WEIGHTS[1] * (t[1] - PREFERRED[1]).cos() - c,
            ],
        )
    })
    .build()
    .expect("torus game is complete")
}

/// The two stable Nash points, to three decimals.
pub const NASH_POINTS: [[f64; 2]; 2] = [[-1.063, 1.014], [1.408, -0.325]];
