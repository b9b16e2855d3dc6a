//! Smoothed matching pennies over softmax mixed strategies.

use nalgebra::{DMatrix, Matrix2, Vector2};

use crate::game::Game;

/// Softmax temperature applied to both actions.
pub const TEMPERATURE: f64 = 10.0;

/// Payoff of the row player.
pub fn payoff_row() -> Matrix2<f64> {
    Matrix2::new(1.0, -1.0, -1.0, 1.0)
}

/// Payoff of the column player, the negative of the row payoff.
pub fn payoff_col() -> Matrix2<f64> {
    -payoff_row()
}

/// Mixed strategy `[e^{τz}, e^{τ(1−z)}] / (e^{τz} + e^{τ(1−z)})`.
pub fn softmax_policy(z: f64) -> Vector2<f64> {
    let p = first_prob(z);
    Vector2::new(p, 1.0 - p)
}

fn first_prob(z: f64) -> f64 {
    1.0 / (1.0 + (-TEMPERATURE * (2.0 * z - 1.0)).exp())
}

/// First and second derivatives of the first action's probability.
fn first_prob_derivs(z: f64) -> (f64, f64) {
    let p = first_prob(z);
    let d1 = 2.0 * TEMPERATURE * p * (1.0 - p);
    let d2 = 2.0 * TEMPERATURE * d1 * (1.0 - 2.0 * p);
    (d1, d2)
}

/// Two players on `(x, y) ∈ R²` with costs `π(y)ᵀ A π(x)` and `π(y)ᵀ B π(x)`.
pub fn matching_pennies_game() -> Game {
    let cost = |m: Matrix2<f64>| move |v: &[f64]| (softmax_policy(v[1]).transpose() * m * softmax_policy(v[0]))[(0, 0)];
    // with p = π₁(x), q = π₁(y): f₁ = (2p − 1)(2q − 1), f₂ = −f₁
    Game::builder(vec![1, 1])
        .name("pennies")
        .cost(0, cost(payoff_row()))
        .cost(1, cost(payoff_col()))
        .gradient(0, |v| {
            let (dp, _) = first_prob_derivs(v[0]);
            vec![2.0 * dp * (2.0 * first_prob(v[1]) - 1.0)]
        })
        .gradient(1, |v| {
            let (dq, _) = first_prob_derivs(v[1]);
            vec![-2.0 * dq * (2.0 * first_prob(v[0]) - 1.0)]
        })
        .jacobian(|v| {
            let (p, q) = (first_prob(v[0]), first_prob(v[1]));
            let (dp, ddp) = first_prob_derivs(v[0]);
            let (dq, ddq) = first_prob_derivs(v[1]);
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    2.0 * ddp * (2.0 * q - 1.0),
                    4.0 * dp * dq,
                    -4.0 * dp * dq,
                    -2.0 * ddq * (2.0 * p - 1.0),
                ],
            )
        })
        .build()
        .expect("pennies game is complete")
}
