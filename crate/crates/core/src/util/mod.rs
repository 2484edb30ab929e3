//! Small shared utilities: checksummed binary IO and seed derivation.

pub mod binio;
pub mod rng;
