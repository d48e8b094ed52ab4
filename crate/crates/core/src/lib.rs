pub mod analysis;
pub mod catalog;
pub mod config;
pub mod geometry;
pub mod layout;
pub mod populate;
pub mod rng;
pub mod scene;
pub mod template;
pub mod validate;
