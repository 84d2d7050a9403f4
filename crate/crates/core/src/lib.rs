//! Tree-of-thoughts search with pluggable generator and discriminator agents,
//! two exactly solvable task environments, accuracy-controlled oracle agents,
//! and an evaluation harness.

pub mod engine;
pub mod game24;
pub mod harness;
pub mod knights;
pub mod llm;
pub mod oracle;
