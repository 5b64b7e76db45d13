//! UTF-8 key-value serialisation of [`GridWorldSpec`].
//!
//! ```text
//! # gridworld
//! width = 3
//! height = 3
//! discount = 0.9
//! episode_limit = 6
//! start = 0.5,0,0,0,0.5,0,0,0,0
//! object = 2,0.3,false,0.5
//! ```
//!
//! `start` lists one probability per cell. Each `object` line is
//! `cell,reward,terminal,respawn_prob`; objects keep their line order.
//! Reals use the shortest representation that parses back to the same value.

use std::fmt::Write;

use super::grid::{GridObject, GridWorldSpec};
use crate::error::{Error, Result};

pub fn spec_to_text(spec: &GridWorldSpec) -> String {
    let mut out = String::from("# gridworld\n");
    writeln!(out, "width = {}", spec.width).unwrap();
    writeln!(out, "height = {}", spec.height).unwrap();
    writeln!(out, "discount = {}", spec.discount).unwrap();
    writeln!(out, "episode_limit = {}", spec.episode_limit).unwrap();
    let start: Vec<String> = spec.start_distribution.iter().map(f64::to_string).collect();
    writeln!(out, "start = {}", start.join(",")).unwrap();
    for o in &spec.objects {
        writeln!(out, "object = {},{},{},{}", o.cell, o.reward, o.terminal, o.respawn_prob).unwrap();
    }
    out
}

pub fn spec_from_text(text: &str, origin: &str) -> Result<GridWorldSpec> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut width = None;
    let mut height = None;
    let mut discount = None;
    let mut limit = None;
    let mut start = None;
    let mut objects = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(line_no, format!("expected `key = value`, got `{line}`")))?;
        let num = |v: &str| v.parse::<f64>().map_err(|e| err(line_no, format!("{key}: {e}")));
        match key {
            "width" => width = Some(value.parse::<usize>().map_err(|e| err(line_no, e.to_string()))?),
            "height" => height = Some(value.parse::<usize>().map_err(|e| err(line_no, e.to_string()))?),
            "discount" => discount = Some(num(value)?),
            "episode_limit" => limit = Some(value.parse::<u32>().map_err(|e| err(line_no, e.to_string()))?),
            "start" => start = Some(value.split(',').map(|v| num(v.trim())).collect::<Result<Vec<_>>>()?),
            "object" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 4 {
                    return Err(err(line_no, "object needs cell,reward,terminal,respawn_prob".into()));
                }
                objects.push(GridObject {
                    cell: parts[0].parse().map_err(|e| err(line_no, format!("object cell: {e}")))?,
                    reward: num(parts[1])?,
                    terminal: parts[2].parse().map_err(|e| err(line_no, format!("object terminal: {e}")))?,
                    respawn_prob: num(parts[3])?,
                });
            }
            other => return Err(err(line_no, format!("unknown key `{other}`"))),
        }
    }
    let missing = |k: &str| err(0, format!("missing key `{k}`"));
    let spec = GridWorldSpec {
        width: width.ok_or_else(|| missing("width"))?,
        height: height.ok_or_else(|| missing("height"))?,
        objects,
        episode_limit: limit.ok_or_else(|| missing("episode_limit"))?,
        discount: discount.ok_or_else(|| missing("discount"))?,
        start_distribution: start.ok_or_else(|| missing("start"))?,
    };
    spec.validate()?;
    Ok(spec)
}
