//! Reference-table reproduction: runs the shipped calibrated presets and
//! checks the headline numbers against tolerances.

use std::path::Path;

use crate::config::ConfigFile;
use crate::csv::MetricsRow;
use crate::power_file;
use crate::runner::{self, RunError};
use wansim_core::compare_rates;

pub const TABLE1_TOML: &str = include_str!("../presets/table1.toml");
pub const SLOWDOWN_TOML: &str = include_str!("../presets/slowdown.toml");
pub const FIG6_PROFILE: &str = include_str!("../presets/fig6.profile");

/// Reference normalized completion times for d = 250/500/750/1000 ms.
pub const TABLE1_TARGETS: [f64; 4] = [0.25, 0.10, 0.08, 0.07];
pub const TABLE1_ABS_TOL: f64 = 0.05;
pub const FIG5_TARGET: f64 = 0.10;
pub const FIG5_ABS_TOL: f64 = 0.03;
pub const FIG6_RATIO_RANGE: (f64, f64) = (0.08, 0.12);

/// The energy comparison behind the shipped fig6 profile: the same bytes at
/// 10 vs 100 Mbit/s.
pub const FIG6_BYTES: u64 = 125_000_000;
pub const FIG6_RATE_LOW: u64 = 10_000_000;
pub const FIG6_RATE_HIGH: u64 = 100_000_000;

pub struct Check {
    pub label: String,
    pub pass: bool,
}

pub struct Report {
    pub rows: Vec<MetricsRow>,
    pub checks: Vec<Check>,
    pub lines: Vec<String>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn check(checks: &mut Vec<Check>, label: impl Into<String>, pass: bool) {
    checks.push(Check {
        label: label.into(),
        pass,
    });
}

pub fn preset_table1() -> ConfigFile {
    ConfigFile::from_str(TABLE1_TOML, Path::new(".")).expect("shipped preset is valid")
}

pub fn preset_slowdown() -> ConfigFile {
    ConfigFile::from_str(SLOWDOWN_TOML, Path::new(".")).expect("shipped preset is valid")
}

pub fn reproduce_table1() -> Result<Report, RunError> {
    let cfg = preset_table1();
    let rows = runner::run(&cfg)?;
    let mut checks = Vec::new();
    let mut lines = Vec::new();
    lines.push("d_ms  normalized_T  reference".to_string());
    for (row, target) in rows.iter().zip(TABLE1_TARGETS) {
        lines.push(format!(
            "{:>4}  {:>12.4}  {:>9.2}",
            row.d_ms, row.normalized_t, target
        ));
        check(
            &mut checks,
            format!("d={} ms normalized_T within {TABLE1_ABS_TOL} of {target}", row.d_ms),
            (row.normalized_t - target).abs() <= TABLE1_ABS_TOL,
        );
        check(
            &mut checks,
            format!("d={} ms normalized_T <= 0.3", row.d_ms),
            row.normalized_t <= 0.3,
        );
    }
    let decreasing = rows
        .windows(2)
        .all(|w| w[1].normalized_t < w[0].normalized_t);
    check(&mut checks, "normalized_T strictly decreasing in d", decreasing);
    Ok(Report { rows, checks, lines })
}

pub fn reproduce_fig5() -> Result<Report, RunError> {
    let mut cfg = preset_table1();
    cfg.scenario.id = "fig5".to_string();
    cfg.sweep.as_mut().expect("preset sweeps").values = vec![500];
    let rows = runner::run(&cfg)?;
    let ratio = rows[0].normalized_t;
    let mut checks = Vec::new();
    let lines = vec![format!(
        "with/without accelerator time ratio at d=500 ms: {ratio:.4} (reference {FIG5_TARGET})"
    )];
    check(
        &mut checks,
        format!("ratio within {FIG5_ABS_TOL} of {FIG5_TARGET}"),
        (ratio - FIG5_TARGET).abs() <= FIG5_ABS_TOL,
    );
    Ok(Report { rows, checks, lines })
}

pub fn reproduce_fig6() -> Result<Report, RunError> {
    let profile = power_file::parse_profile(FIG6_PROFILE)
        .map_err(|e| RunError::Setup(format!("{e}")))?;
    let cmp = compare_rates(FIG6_BYTES, FIG6_RATE_LOW, FIG6_RATE_HIGH, &profile)
        .map_err(|e| RunError::Setup(format!("{e}")))?;
    let mut checks = Vec::new();
    let lines = vec![
        format!(
            "low rate:  {} bit/s, T={:.1} s, E={:.1} J",
            FIG6_RATE_LOW, cmp.t_low_s, cmp.low.total_j
        ),
        format!(
            "high rate: {} bit/s, T={:.1} s, E={:.1} J",
            FIG6_RATE_HIGH, cmp.t_high_s, cmp.high.total_j
        ),
        format!("energy ratio high/low: {:.4}", cmp.ratio),
    ];
    check(
        &mut checks,
        format!(
            "energy ratio in [{}, {}]",
            FIG6_RATIO_RANGE.0, FIG6_RATIO_RANGE.1
        ),
        cmp.ratio >= FIG6_RATIO_RANGE.0 && cmp.ratio <= FIG6_RATIO_RANGE.1,
    );
    let rows = Vec::new();
    Ok(Report { rows, checks, lines })
}
