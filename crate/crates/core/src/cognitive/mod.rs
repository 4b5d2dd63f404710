//! Production-system model of a Pig Chase participant.
//!
//! Declarative memory holds static board knowledge (the moves available from
//! each tile) and the anticlockwise rotation steps, the latter with a
//! tunable base-level activation. Procedural memory holds the productions;
//! each carries a utility learned from game rewards and conflicts are
//! resolved by noisy utility maximisation.

mod buffers;
mod memory;
mod model;
mod params;
mod procedural;
mod strategies;

use rand::Rng;
use thiserror::Error;

pub use buffers::{BlockVerdict, ExitDecision, Goal, Imaginal, ModelBuffers, Perception, Surround};
pub use memory::{
    retrieve_chunk, Chunk, DeclarativeMemory, RetrievalFailure, KIND_SLOT, POSSIBLE_MOVES, ROTATION_STEP,
};
pub use model::{ModelAgent, ModelStats, RetrievalTrace, TraceEntry};
pub use params::{ModelParams, RewardDiscount};
pub use procedural::{
    resolve_conflict, update_utility, Condition, ProceduralMemory, Production, ProductionId, RewardEvent,
};
pub use strategies::{
    blocking_target, check_blocked, exit_step, exit_strategy_check, greedy_step, navigation_proposals,
    rotation_strategy, NavigationProposals,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("parameter file: {0}")]
    ParamFile(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("duplicate chunk {0:?}")]
    DuplicateChunk(String),
    #[error("duplicate production {0:?}")]
    DuplicateProduction(&'static str),
    #[error("malformed chunk {0:?}")]
    MalformedChunk(String),
    #[error("no production matches the current buffers")]
    NoMatchingProduction,
    #[error("decision cycle ended without a key")]
    NoKeyChosen,
    #[error("visual buffer is empty")]
    EmptyVisual,
}

/// Zero-mean logistic sample with scale `s`. Draws nothing when `s` is zero.
pub(crate) fn logistic_noise<R: Rng + ?Sized>(s: f64, rng: &mut R) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    s * (u / (1.0 - u)).ln()
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn logistic_noise_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let s = 0.5;
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| logistic_noise(s, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        // Logistic variance is s²π²/3.
        let expected = s * s * std::f64::consts::PI.powi(2) / 3.0;
        assert!(mean.abs() < 0.01, "{mean}");
        assert!((var / expected - 1.0).abs() < 0.02, "{var} vs {expected}");
    }

    #[test]
    fn zero_scale_draws_nothing() {
        let mut a = ChaCha8Rng::seed_from_u64(1);
        let b = a.clone();
        assert_eq!(logistic_noise(0.0, &mut a), 0.0);
        assert_eq!(a, b);
    }
}
