//! Timestamp-based smart-card password authentication, the four forgery
//! attacks against it, and a seeded harness that measures which forgeries the
//! server accepts.

pub mod numtheory;
pub mod protocol;
pub mod attacks;
pub mod harness;
pub mod demo;
