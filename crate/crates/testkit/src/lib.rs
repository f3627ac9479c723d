//! Random model generators and brute-force oracles.
//!
//! The oracles share only data types with `kbplan-core`: matching, builtin
//! evaluation and action application are reimplemented here by exhaustive
//! enumeration so they can check the engine and planner independently.

pub mod gen;
pub mod oracle;
pub mod corpus;
