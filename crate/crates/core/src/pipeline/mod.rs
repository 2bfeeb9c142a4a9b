//! Model-driven perturbation: prompts, the tool-calling loop, memory and
//! whole-corpus campaigns.

pub mod campaign;
pub mod client;
pub mod memory;
pub mod prompt;
pub mod runner;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Intent, IntentSet};

pub use campaign::{run_campaign, Backend, CampaignConfig, CampaignOutput, Diagnostics};
pub use client::{HttpClient, ModelClient, ModelConfig, ScriptedClient};
pub use memory::{record_memory, MemoryLog};
pub use prompt::{build_prompt, PromptOptions, PromptTemplate};
pub use runner::{run_perturbation, Limits, RejectReason, Rejection, RunOutcome};

/// Draws a non-empty intent set: the size uniformly from {1, 2, 3}, then a
/// uniform subset of that size.
pub fn sample_intents(seed: u64) -> IntentSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = rng.gen_range(1..=3);
    let picked: Vec<Intent> = Intent::ALL
        .choose_multiple(&mut rng, size)
        .copied()
        .collect();
    IntentSet::new(&picked).expect("a non-empty subset of distinct intents")
}

/// Derives an independent seed for item `index` of a seeded stream.
pub fn stream_seed(seed: u64, index: u64, salt: u64) -> u64 {
    let mut z = seed
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(salt.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
