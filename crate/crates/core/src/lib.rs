//! Star-linear maps between matrix spaces: Choi and matricization forms,
//! Hill representations, positivity checks, and range analysis of the
//! bilinear maps attached to sparse Hill patterns.

pub mod bilinear;
pub mod hill;
pub mod linalg;
pub mod mapmodel;
pub mod pattern;
pub mod positivity;
pub mod zoo;
pub mod json;
pub mod cli;
