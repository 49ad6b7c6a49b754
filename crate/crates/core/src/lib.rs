//! Neuro-symbolic agent for text-based object placement games.
//!
//! A symbolic learner induces default rules with negation-as-failure
//! exceptions from reward-labelled experience, lifts them along a hypernym
//! taxonomy, and a lightweight learned policy explores whenever no rule
//! applies.

pub mod agent;
pub mod env;
pub mod generalize;
pub mod harness;
pub mod ilp;
pub mod logic;
pub mod taxonomy;
