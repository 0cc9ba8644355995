//! Reference implementations used as test oracles, plus the generator for
//! the bundled fixture corpus.

pub mod corpus;
pub mod data;
pub mod dates;
pub mod gen;
pub mod oracle;
