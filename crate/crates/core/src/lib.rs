pub mod commands;
pub mod efficiency;
pub mod error;
pub mod gem;
pub mod graph;
pub mod indices;
pub mod inference;
pub mod io;
pub mod scenarios;
pub mod sim;

pub use error::{Error, Result};
