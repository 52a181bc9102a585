//! std companion to `wansim-core`: config parsing, CSV emission, power
//! profile files, scenario runner, and the calibrated reference presets.

pub mod config;
pub mod csv;
pub mod power_file;
pub mod reproduce;
pub mod runner;
