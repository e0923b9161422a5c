//! Goodman envelope, Rainflow counting and Miner damage.

mod goodman;
mod miner;
mod rainflow;

pub use goodman::{allowable_amplitude, GoodmanEnvelope};
pub use miner::{cycles_to_failure, equivalent_amplitude, miner_damage, SectionDamage};
pub use rainflow::{rainflow, reversals, Cycle, CycleSet};
