//! Test oracles shared by the integration tests. Nothing here calls the
//! library's own differencing or bound code.
#![allow(dead_code)]

use nalgebra::DMatrix;
use nashlearn::Game;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Own-gradient of `player` by central differences of its cost.
pub fn fd_own_gradient(game: &Game, player: usize, x: &[f64], h: f64) -> Vec<f64> {
    game.player_range(player)
        .map(|j| {
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[j] += h;
            dn[j] -= h;
            (game.cost(player, &up).unwrap() - game.cost(player, &dn).unwrap()) / (2.0 * h)
        })
        .collect()
}

/// Stacked own-gradients by central differences of the costs.
pub fn fd_game_form(game: &Game, x: &[f64], h: f64) -> Vec<f64> {
    (0..game.num_players())
        .flat_map(|i| fd_own_gradient(game, i, x, h))
        .collect()
}

/// Jacobian of the analytic game form by central differences.
pub fn fd_jacobian_of_form(game: &Game, x: &[f64], h: f64) -> DMatrix<f64> {
    let d = x.len();
    let mut j = DMatrix::zeros(d, d);
    for c in 0..d {
        let mut up = x.to_vec();
        let mut dn = x.to_vec();
        up[c] += h;
        dn[c] -= h;
        let wu = game.game_form_slice(&up).unwrap();
        let wd = game.game_form_slice(&dn).unwrap();
        for r in 0..d {
            j[(r, c)] = (wu[r] - wd[r]) / (2.0 * h);
        }
    }
    j
}

/// `‖a − b‖ / max(‖b‖, 1)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1.0)
}

pub fn uniform_point(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(lo..hi)).collect()
}

/// Two-player quadratic game `ω(x) = M (x − x*)` with `M` drawn so that its
/// symmetric part is positive definite and own blocks are symmetric. Returns the game, `M` and `x*`.
pub fn random_stable_quadratic(rng: &mut ChaCha8Rng, dims: [usize; 2]) -> (Game, DMatrix<f64>, Vec<f64>) {
    let d = dims[0] + dims[1];
    let g = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let skew = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let mut skew = (&skew - skew.transpose()) * 0.5;
    // own blocks must stay symmetric to be Hessians of the costs
    for r in 0..d {
        for c in 0..d {
            if (r < dims[0]) == (c < dims[0]) {
                skew[(r, c)] = 0.0;
            }
        }
    }
    let m = &g * g.transpose() + DMatrix::identity(d, d) * 0.5 + skew * 1.5;
    let star: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    (quadratic_game(dims, &m, &star), m, star)
}

/// Player `i`'s cost is `½ x_iᵀ M_ii x_i + x_iᵀ M_{i,−i} x_{−i}` shifted to `x*`.
pub fn quadratic_game(dims: [usize; 2], m: &DMatrix<f64>, star: &[f64]) -> Game {
    let d = dims[0] + dims[1];
    let ranges = [0..dims[0], dims[0]..d];
    let mut b = Game::builder(dims.to_vec()).name("quadratic");
    for (i, own) in ranges.iter().cloned().enumerate() {
        let (m, star) = (m.clone(), star.to_vec());
        b = b.cost(i, move |x| {
            let y: Vec<f64> = x.iter().zip(&star).map(|(a, s)| a - s).collect();
            let mut c = 0.0;
            for r in own.clone() {
                for col in 0..d {
                    let w = if own.contains(&col) { 0.5 } else { 1.0 };
                    c += w * y[r] * m[(r, col)] * y[col];
                }
            }
            c
        });
    }
    let (m2, s2) = (m.clone(), star.to_vec());
    let m3 = m.clone();
    b.game_form(move |x| {
        let y = nalgebra::DVector::from_iterator(d, x.iter().zip(&s2).map(|(a, s)| a - s));
        Ok((&m2 * y).iter().copied().collect())
    })
    .jacobian(move |_| m3.clone())
    .build()
    .unwrap()
}
