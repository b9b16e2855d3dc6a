//! Benchmark games reachable by string id.

pub mod particles;
pub mod pennies;
pub mod torus;

use crate::error::{Error, Result};
use crate::game::Game;
use crate::lq::{lq_as_game, LqBenchmark};

pub use particles::{decoupled_optimum, particle_game, ParticleGame};
pub use pennies::matching_pennies_game;
pub use torus::{torus_game, NASH_POINTS as TORUS_NASH_POINTS};

/// Ids accepted by [`game_by_id`] with one-line descriptions.
pub const GAME_IDS: [(&str, &str); 4] = [
    ("lq3", "three-player LQ game over feedback gains"),
    ("pennies", "smoothed matching pennies"),
    ("torus", "two-player location game on the torus"),
    ("particles", "four-particle collision avoidance"),
];

pub fn game_by_id(id: &str) -> Result<Game> {
    match id {
        "lq3" => Ok(lq_as_game(&LqBenchmark::standard().game)),
        "pennies" => Ok(matching_pennies_game()),
        "torus" => Ok(torus_game()),
        "particles" => Ok(particle_game(particles::DEFAULT_HORIZON)),
        other => Err(Error::InvalidArgument {
            arg: "game",
            reason: format!(
                "unknown game '{other}', expected one of {}",
                GAME_IDS.map(|g| g.0).join(", ")
            ),
        }),
    }
}
