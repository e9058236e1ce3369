// SPDX-License-Identifier: Apache-2.0

//! Parameter sweeps over the cross product of a few configuration axes.
//!
//! A grid file has one axis per line, `key = v1, v2, ...`. Allowed keys are
//! `capacity`, `prescaler_step` (or `prescaler`), `variant` and
//! `fault_position`. Points are enumerated with the last axis varying
//! fastest.

use rayon::prelude::*;
use serde::Serialize;

use super::setup::{ConfigError, SimConfig};
use super::run;
use crate::stats::CampaignReport;

const AXES: [&str; 5] = ["capacity", "prescaler_step", "prescaler", "variant", "fault_position"];

pub type Grid = Vec<(String, Vec<String>)>;

pub fn parse_grid(text: &str) -> Result<Grid, ConfigError> {
    let mut grid = Grid::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |msg: String| ConfigError::Syntax { line: i + 1, msg };
        let (k, vs) = line.split_once('=').ok_or_else(|| syntax(format!("expected `axis = v1, v2`, got `{line}`")))?;
        let k = k.trim();
        if !AXES.contains(&k) {
            return Err(syntax(format!("`{k}` is not a sweep axis")));
        }
        let values: Vec<String> = vs.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(syntax(format!("axis `{k}` has no values")));
        }
        grid.push((k.to_string(), values));
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub key: Vec<(String, String)>,
    pub report: Result<CampaignReport, String>,
}

fn points(grid: &Grid) -> Vec<Vec<(String, String)>> {
    grid.iter().fold(vec![Vec::new()], |acc, (k, vs)| {
        acc.into_iter()
            .flat_map(|p| {
                vs.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((k.clone(), v.clone()));
                    q
                })
            })
            .collect()
    })
}

fn run_point(base: &SimConfig, key: Vec<(String, String)>) -> SweepPoint {
    let mut cfg = base.clone();
    let report = key
        .iter()
        .try_for_each(|(k, v)| cfg.set(k, v))
        .map_err(|e| e.to_string())
        .and_then(|()| run(&cfg).map(|o| o.report).map_err(|e| e.to_string()));
    SweepPoint { key, report }
}

/// Runs every grid point in parallel. An empty grid runs the base alone.
pub fn sweep(base: &SimConfig, grid: &Grid) -> Vec<SweepPoint> {
    points(grid).into_par_iter().map(|key| run_point(base, key)).collect()
}

pub fn sweep_sequential(base: &SimConfig, grid: &Grid) -> Vec<SweepPoint> {
    points(grid).into_iter().map(|key| run_point(base, key)).collect()
}
