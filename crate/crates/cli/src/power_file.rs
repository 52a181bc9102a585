//! Power profile file format: plain text, one directive per line.
//!
//! ```text
//! # comment
//! p_fixed 9.0
//! p_sleep 0.0
//! rate 10000000 1.0
//! rate 100000000 2.0
//! window_s 100
//! ```

use std::fmt;

use wansim_core::{PowerProfile, SimTime};

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ProfileParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "power profile line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ProfileParseError {}

fn err(line: usize, message: impl Into<String>) -> ProfileParseError {
    ProfileParseError {
        line,
        message: message.into(),
    }
}

pub fn parse_profile(text: &str) -> Result<PowerProfile, ProfileParseError> {
    let mut p_fixed = None;
    let mut p_sleep = None;
    let mut window = None;
    let mut ladder: Vec<(u64, f64)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap();
        let rest: Vec<&str> = parts.collect();
        match key {
            "p_fixed" | "p_sleep" | "window_s" => {
                if rest.len() != 1 {
                    return Err(err(line_no, format!("{key} takes one value")));
                }
                let v: f64 = rest[0]
                    .parse()
                    .map_err(|_| err(line_no, format!("bad number {:?}", rest[0])))?;
                if !(v >= 0.0) {
                    return Err(err(line_no, format!("{key} must be non-negative")));
                }
                match key {
                    "p_fixed" => p_fixed = Some(v),
                    "p_sleep" => p_sleep = Some(v),
                    _ => window = Some(v),
                }
            }
            "rate" => {
                if rest.len() != 2 {
                    return Err(err(line_no, "rate takes <bits_per_s> <watts>"));
                }
                let bits: u64 = rest[0]
                    .parse()
                    .map_err(|_| err(line_no, format!("bad rate {:?}", rest[0])))?;
                let watts: f64 = rest[1]
                    .parse()
                    .map_err(|_| err(line_no, format!("bad wattage {:?}", rest[1])))?;
                ladder.push((bits, watts));
            }
            other => return Err(err(line_no, format!("unknown directive {other:?}"))),
        }
    }

    let profile = PowerProfile {
        p_fixed_w: p_fixed.ok_or_else(|| err(0, "missing p_fixed"))?,
        p_sleep_w: p_sleep.unwrap_or(0.0),
        nic_ladder: ladder,
        observation_window: SimTime::from_micros(
            (window.ok_or_else(|| err(0, "missing window_s"))? * 1e6) as u64,
        ),
    };
    profile
        .validate()
        .map_err(|e| err(0, format!("{e}")))?;
    Ok(profile)
}
