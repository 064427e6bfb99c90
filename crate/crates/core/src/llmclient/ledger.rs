use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::money::{Money, Price};
use crate::prompts::ModelProfile;

/// Running totals for one model.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelAccount {
    pub calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub cost: Money,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostSummary {
    pub models: BTreeMap<String, ModelAccount>,
    pub calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_cost: Money,
}

impl CostSummary {
    pub fn cost_of(&self, model_id: &str) -> Money {
        self.models.get(model_id).map_or(Money::ZERO, |a| a.cost)
    }
}

/// Token and cost accounting, shared across workers.
#[derive(Debug, Default)]
pub struct CostLedger {
    prices: BTreeMap<String, (Price, Price)>,
    accounts: Mutex<BTreeMap<String, ModelAccount>>,
}

impl CostLedger {
    pub fn new() -> CostLedger {
        CostLedger::default()
    }

    pub fn for_profile(profile: &ModelProfile) -> CostLedger {
        let mut ledger = CostLedger::new();
        ledger.set_price(
            &profile.model_id,
            profile.price_prompt_per_1k,
            profile.price_completion_per_1k,
        );
        ledger
    }

    pub fn set_price(&mut self, model_id: &str, prompt: Price, completion: Price) {
        self.prices.insert(model_id.to_string(), (prompt, completion));
    }

    /// Records one successful call. Models without a price accrue tokens
    /// at zero cost.
    pub fn record(&self, model_id: &str, prompt_tokens: u64, completion_tokens: u64) {
        let (pp, cp) = self.prices.get(model_id).copied().unwrap_or_default();
        let mut accounts = self.accounts.lock().unwrap();
        let acct = accounts.entry(model_id.to_string()).or_default();
        acct.calls += 1;
        acct.prompt_tokens += prompt_tokens;
        acct.completion_tokens += completion_tokens;
        acct.cost += pp.cost(prompt_tokens) + cp.cost(completion_tokens);
    }

    pub fn report(&self) -> CostSummary {
        let models = self.accounts.lock().unwrap().clone();
        CostSummary {
            calls: models.values().map(|a| a.calls).sum(),
            prompt_tokens: models.values().map(|a| a.prompt_tokens).sum(),
            completion_tokens: models.values().map(|a| a.completion_tokens).sum(),
            total_cost: models.values().map(|a| a.cost).sum(),
            models,
        }
    }
}

/// Relative reduction from `before` to `after`, in tenths of a percent,
/// rounded up. `None` when `before` is zero or `after` exceeds it.
pub fn reduction_tenths(before: u64, after: u64) -> Option<u64> {
    if before == 0 || after > before {
        return None;
    }
    let num = (before - after) as u128 * 1000;
    Some(num.div_ceil(before as u128) as u64)
}

/// [`reduction_tenths`] formatted as `"77.9%"`.
pub fn reduction(before: u64, after: u64) -> Option<String> {
    reduction_tenths(before, after).map(|t| format!("{}.{}%", t / 10, t % 10))
}
