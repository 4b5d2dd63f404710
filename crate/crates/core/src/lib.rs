//! Pig Chase experimentation toolkit.
//!
//! * [`game`]: the turn-based board engine and scoring rules.
//! * [`astar`]: the shortest-path collaborator that chases the pig.
//! * [`cognitive`]: a production-system player model with utility learning.
//! * [`sim`]: batch simulation, curve fitting and parameter sweeps.
//! * [`stats`]: outlier filtering, two-way ANOVA, correlation, agreement and
//!   figure tables.
//! * [`record`]: trial and session records shared by the simulator and the
//!   live session service.

pub mod astar;
pub mod cognitive;
pub mod game;
pub mod record;
pub mod sim;
pub mod stats;
