//! Named configurations for the games and examples of the model.

use crate::config::{GameConfig, Params, RunConfig, SCHEMA_VERSION};
use crate::envgen::EnvSpec;
use crate::error::{Error, Result};
use crate::model::ModelSpec;

pub const NAMES: [&str; 10] = [
    "game-a",
    "game-b",
    "game-c",
    "game-cprime",
    "game-d",
    "counterexample",
    "weird-rank2",
    "weird-degenerate",
    "gauss",
    "paper-games",
];

fn game_a() -> EnvSpec {
    EnvSpec::constant(0.499)
}

fn game_b() -> EnvSpec {
    EnvSpec::periodic(&[0.099, 0.749, 0.749])
}

pub fn game_a_spec() -> ModelSpec {
    ModelSpec { q: vec![vec![1.0]], processes: vec![game_a()], assignment: vec![0] }
}

pub fn game_b_spec() -> ModelSpec {
    ModelSpec { q: vec![vec![1.0]], processes: vec![game_b()], assignment: vec![0] }
}

/// Cycle through A, A, B, B.
pub fn game_c_spec() -> ModelSpec {
    ModelSpec {
        q: vec![
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0, 0.0],
        ],
        processes: vec![game_a(), game_b()],
        assignment: vec![0, 0, 1, 1],
    }
}

/// Alternate A and B.
pub fn game_cprime_spec() -> ModelSpec {
    ModelSpec { q: vec![vec![0.0, 1.0], vec![1.0, 0.0]], processes: vec![game_a(), game_b()], assignment: vec![0, 1] }
}

/// Fair coin between A and B at every step.
pub fn game_d_spec() -> ModelSpec {
    ModelSpec { q: vec![vec![0.5, 0.5], vec![0.5, 0.5]], processes: vec![game_a(), game_b()], assignment: vec![0, 1] }
}

/// Alternation whose limit depends on the start and the environment shift.
pub fn counterexample_spec() -> ModelSpec {
    ModelSpec {
        q: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        processes: vec![EnvSpec::constant(0.49), EnvSpec::periodic(&[0.48, 1.0 / 1.95])],
        assignment: vec![0, 1],
    }
}

fn weird_q() -> Vec<Vec<f64>> {
    vec![
        vec![8.0 / 24.0, 8.0 / 24.0, 8.0 / 24.0],
        vec![6.0 / 24.0, 6.0 / 24.0, 12.0 / 24.0],
        vec![7.0 / 24.0, 7.0 / 24.0, 10.0 / 24.0],
    ]
}

/// Rank-two switching with regimes A, B, B.
pub fn weird_rank2_spec() -> ModelSpec {
    ModelSpec { q: weird_q(), processes: vec![game_a(), game_b()], assignment: vec![0, 1, 1] }
}

/// Rank-two switching with regimes A, A, B; the reduced matrices are singular.
pub fn weird_degenerate_spec() -> ModelSpec {
    ModelSpec { q: weird_q(), processes: vec![game_a(), game_b()], assignment: vec![0, 0, 1] }
}

pub fn gauss_spec() -> ModelSpec {
    ModelSpec { q: vec![vec![1.0]], processes: vec![EnvSpec::GaussMap], assignment: vec![0] }
}

fn config(name: &str, model: ModelSpec, params: Params) -> RunConfig {
    RunConfig { schema_version: SCHEMA_VERSION, name: name.to_string(), model, games: Vec::new(), params, out_dir: None }
}

pub fn get(name: &str) -> Result<RunConfig> {
    let p = Params::default();
    Ok(match name {
        "game-a" => config(name, game_a_spec(), p),
        "game-b" => config(name, game_b_spec(), p),
        "game-c" => config(name, game_c_spec(), p),
        "game-cprime" => config(name, game_cprime_spec(), p),
        "game-d" => config(name, game_d_spec(), Params { mu_curve_points: 101, ..p }),
        "counterexample" => config(name, counterexample_spec(), p),
        "weird-rank2" => config(name, weird_rank2_spec(), p),
        "weird-degenerate" => config(name, weird_degenerate_spec(), p),
        "gauss" => config(name, gauss_spec(), Params { env_window: (-20_000, 200_000), spectrum_steps: 100_000, ..p }),
        "paper-games" => {
            let game = |n: &str, model: ModelSpec| GameConfig { name: n.to_string(), model, start_regime: 1 };
            RunConfig {
                games: vec![
                    game("A", game_a_spec()),
                    game("B", game_b_spec()),
                    game("C", game_c_spec()),
                    game("D", game_d_spec()),
                ],
                ..config(name, game_c_spec(), p)
            }
        }
        _ => {
            return Err(Error::Config(format!("unknown preset {name:?}; known presets: {}", NAMES.join(", "))));
        }
    })
}
