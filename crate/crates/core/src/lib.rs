//! Metadata-driven portal engine: a typed object store with a finite-domain calculus,
//! a metadata tower over it, frame networks with scenarios, assignment-indexed profile
//! evaluation, role-based access and a view publisher.

pub mod access;
pub mod calculus;
pub mod config;
pub mod dsl;
pub mod engine;
pub mod frames;
pub mod log;
pub mod profile;
pub mod protocol;
pub mod publish;
pub mod repository;
pub mod tower;
pub mod value;
