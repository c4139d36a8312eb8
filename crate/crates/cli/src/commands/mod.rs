pub mod embed;
pub mod evaluate;
pub mod features;
pub mod query;
pub mod synth;
pub mod train;
pub mod triplets;
