pub mod tree;
pub mod query;
pub mod scorer;
pub mod exec;
pub mod baseline;
pub mod response;
pub mod bench;
pub mod synth;
