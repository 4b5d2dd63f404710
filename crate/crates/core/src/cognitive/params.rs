use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// How a terminal reward is shared out among productions that fired during
/// the trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardDiscount {
    /// Reward minus the number of actions taken since the production fired.
    #[default]
    ElapsedActions,
    /// Every production receives the undiscounted reward.
    Uniform,
}

/// Every tunable of the player model. Serialised as flat `key = value` text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Utility learning rate.
    pub alpha: f64,
    /// Scale of the logistic noise added to utilities during conflict resolution.
    pub utility_noise_s: f64,
    pub retrieval_threshold: f64,
    /// Scale of the logistic noise added to chunk activations at retrieval.
    pub retrieval_noise_s: f64,
    /// Base-level activation of the rotation-step chunks.
    pub rotation_bla: f64,
    /// Base-level activation of the possible-moves chunks.
    pub moves_bla: f64,
    /// Consecutive non-improving proximity checks before leaving.
    pub exit_patience: u32,
    /// Remaining-action count above which the model keeps pursuing while
    /// still unsure whether to leave.
    pub pursue_min_remaining: u32,
    /// Once the AI has been seen closing in on the pig, stop re-checking and
    /// commit to the catch for the rest of the trial.
    pub commit_on_progress: bool,
    pub reward_catch: f64,
    pub reward_exit: f64,
    pub action_cost: f64,
    pub reward_discount: RewardDiscount,
    /// Initial utility of every production.
    pub initial_utility: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            utility_noise_s: 0.25,
            retrieval_threshold: -1.0,
            retrieval_noise_s: 0.25,
            rotation_bla: -0.15,
            moves_bla: 0.0,
            exit_patience: 2,
            pursue_min_remaining: 20,
            commit_on_progress: true,
            reward_catch: 25.0,
            reward_exit: 5.0,
            action_cost: 1.0,
            reward_discount: RewardDiscount::ElapsedActions,
            initial_utility: 0.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let reals = [
            ("alpha", self.alpha),
            ("utility_noise_s", self.utility_noise_s),
            ("retrieval_threshold", self.retrieval_threshold),
            ("retrieval_noise_s", self.retrieval_noise_s),
            ("rotation_bla", self.rotation_bla),
            ("moves_bla", self.moves_bla),
            ("reward_catch", self.reward_catch),
            ("reward_exit", self.reward_exit),
            ("action_cost", self.action_cost),
            ("initial_utility", self.initial_utility),
        ];
        if let Some((name, _)) = reals.iter().find(|(_, v)| !v.is_finite()) {
            return Err(ModelError::InvalidParam(format!("{name} must be finite")));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ModelError::InvalidParam(format!("alpha must be in (0, 1], got {}", self.alpha)));
        }
        if self.utility_noise_s < 0.0 || self.retrieval_noise_s < 0.0 {
            return Err(ModelError::InvalidParam("noise scales must be non-negative".into()));
        }
        if self.exit_patience < 1 {
            return Err(ModelError::InvalidParam("exit_patience must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, ModelError> {
        let params: ModelParams = toml::from_str(text).map_err(|e| ModelError::ParamFile(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("flat struct serialises")
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ModelError::ParamFile(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// Sets one field from its textual name, as used by parameter sweeps.
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), ModelError> {
        let mut table = toml::Table::try_from(&*self).expect("flat struct serialises");
        let current = table.get(key).ok_or_else(|| ModelError::InvalidParam(format!("unknown parameter {key:?}")))?;
        let replacement = match current {
            toml::Value::Integer(_) if value.fract() == 0.0 && value >= 0.0 => toml::Value::Integer(value as i64),
            toml::Value::Float(_) => toml::Value::Float(value),
            _ => return Err(ModelError::InvalidParam(format!("{key} cannot take value {value}"))),
        };
        table.insert(key.to_string(), replacement);
        let updated: ModelParams =
            table.try_into().map_err(|e: toml::de::Error| ModelError::InvalidParam(e.to_string()))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }
}
