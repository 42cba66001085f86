//! Occupancy-grid road worlds and their plain-text file format.
//!
//! A track file is a header of `key = value` lines followed by a line
//! reading `grid` and then one text row per grid row:
//!
//! ```text
//! # comment
//! cell_size = 0.5
//! train_start = <x m> <y m> <heading deg>     (repeatable)
//! test_start = <x m> <y m> <heading deg>      (repeatable)
//! center = <x> <y>, <x> <y>, ...               (repeatable polyline, metres)
//! grid
//! ####....####
//! ```
//!
//! Cells: `.` road, `#` off-road, `O` obstacle, `C` road carrying a
//! center-line hint. Row `r`, column `c` covers
//! `[c·s, (c+1)·s) × [r·s, (r+1)·s)`. Without `center` lines the center
//! line is built by joining neighbouring `C` cells.

use std::path::Path;

use super::geometry::{polyline_segments, Segment, Vec2};
use crate::error::{Error, Result};

pub const DEFAULT_TRACK: &str = include_str!("../../tracks/default.track");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Road,
    OffRoad,
    Obstacle,
}

impl Cell {
    /// Observation encoding.
    pub fn code(self) -> f64 {
        match self {
            Cell::Road => 0.0,
            Cell::OffRoad => 0.5,
            Cell::Obstacle => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec2,
    /// Radians, measured from +x toward +y.
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadWorld {
    pub cols: usize,
    pub rows: usize,
    pub cell_size: f64,
    cells: Vec<Cell>,
    center: Vec<Segment>,
    pub train_starts: Vec<Pose>,
    pub test_starts: Vec<Pose>,
}

impl RoadWorld {
    pub fn new(
        cols: usize,
        rows: usize,
        cell_size: f64,
        cells: Vec<Cell>,
        center: Vec<Segment>,
        train_starts: Vec<Pose>,
        test_starts: Vec<Pose>,
    ) -> Result<Self> {
        if cells.len() != cols * rows || cols == 0 || rows == 0 {
            return Err(Error::config(format!("grid of {} cells is not {cols}x{rows}", cells.len())));
        }
        if !(cell_size > 0.0) {
            return Err(Error::config("cell size must be positive"));
        }
        let world = Self { cols, rows, cell_size, cells, center, train_starts, test_starts };
        world.validate()?;
        Ok(world)
    }

    pub fn default_track() -> Self {
        Self::parse(DEFAULT_TRACK).expect("bundled track is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        if self.center.is_empty() {
            return Err(Error::config("track has no center line"));
        }
        if self.train_starts.is_empty() || self.test_starts.is_empty() {
            return Err(Error::config("track needs at least one train and one test start"));
        }
        for (set, poses) in [("train", &self.train_starts), ("test", &self.test_starts)] {
            for (i, p) in poses.iter().enumerate() {
                if self.cell_at(p.position) != Cell::Road {
                    return Err(Error::config(format!("{set} start {i} is not on road")));
                }
            }
        }
        for s in &self.center {
            let n = (s.length() / (0.2 * self.cell_size)).ceil().max(1.0) as usize;
            for k in 0..=n {
                let p = s.a + (s.b - s.a) * (k as f64 / n as f64);
                if self.cell_at(p) != Cell::Road {
                    return Err(Error::config(format!(
                        "center line leaves the road near ({:.2}, {:.2})",
                        p.x, p.y
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn center(&self) -> &[Segment] {
        &self.center
    }

    pub fn cell(&self, col: usize, row: usize) -> Cell {
        self.cells[row * self.cols + col]
    }

    /// Cell containing `p`; anything outside the grid reads as off-road.
    pub fn cell_at(&self, p: Vec2) -> Cell {
        let c = (p.x / self.cell_size).floor();
        let r = (p.y / self.cell_size).floor();
        if c < 0.0 || r < 0.0 || c >= self.cols as f64 || r >= self.rows as f64 {
            return Cell::OffRoad;
        }
        self.cell(c as usize, r as usize)
    }

    pub fn starts(&self, set: StartSet) -> &[Pose] {
        match set {
            StartSet::Train => &self.train_starts,
            StartSet::Test => &self.test_starts,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cell_size = 0.5;
        let mut train = Vec::new();
        let mut test = Vec::new();
        let mut center = Vec::new();
        let mut lines = text.lines().enumerate();
        let err = |line: usize, msg: String| Error::Config(format!("track line {}: {msg}", line + 1));
        let mut saw_grid = false;
        for (n, raw) in lines.by_ref() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line == "grid" {
                saw_grid = true;
                break;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(n, format!("expected `key = value`, got `{line}`")))?;
            let value = value.trim();
            match key.trim() {
                "name" => {}
                "cell_size" => {
                    cell_size = value.parse().map_err(|_| err(n, format!("bad cell_size `{value}`")))?
                }
                "train_start" => train.push(parse_pose(value).map_err(|m| err(n, m))?),
                "test_start" => test.push(parse_pose(value).map_err(|m| err(n, m))?),
                "center" => {
                    let pts = value
                        .split(',')
                        .map(|p| parse_point(p))
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|m| err(n, m))?;
                    center.extend(polyline_segments(&pts));
                }
                other => return Err(err(n, format!("unknown track key `{other}`"))),
            }
        }
        if !saw_grid {
            return Err(Error::config("track file has no `grid` section"));
        }
        let mut cells = Vec::new();
        let mut hints = Vec::new();
        let mut cols = None;
        let mut rows = 0;
        for (n, raw) in lines {
            let row = raw.trim_end();
            if row.is_empty() {
                continue;
            }
            let width = row.chars().count();
            if *cols.get_or_insert(width) != width {
                return Err(err(n, format!("row has {width} cells, expected {}", cols.unwrap())));
            }
            for (c, ch) in row.chars().enumerate() {
                cells.push(match ch {
                    '.' => Cell::Road,
                    '#' => Cell::OffRoad,
                    'O' => Cell::Obstacle,
                    'C' => {
                        hints.push((c, rows));
                        Cell::Road
                    }
                    other => return Err(err(n, format!("unknown cell character `{other}`"))),
                });
            }
            rows += 1;
        }
        let cols = cols.ok_or_else(|| Error::config("track grid is empty"))?;
        if center.is_empty() {
            center = hint_segments(&hints, cell_size);
        }
        Self::new(cols, rows, cell_size, cells, center, train, test)
    }
}

/// Joins every pair of 8-connected hint cells through their centres.
fn hint_segments(hints: &[(usize, usize)], cell_size: f64) -> Vec<Segment> {
    let set: std::collections::HashSet<(usize, usize)> = hints.iter().copied().collect();
    let centre = |(c, r): (usize, usize)| Vec2::new((c as f64 + 0.5) * cell_size, (r as f64 + 0.5) * cell_size);
    let mut out = Vec::new();
    for &(c, r) in hints {
        for (dc, dr) in [(1isize, 0isize), (0, 1), (1, 1), (-1, 1)] {
            let (nc, nr) = (c as isize + dc, r as isize + dr);
            if nc >= 0 && set.contains(&(nc as usize, nr as usize)) {
                out.push(Segment { a: centre((c, r)), b: centre((nc as usize, nr as usize)) });
            }
        }
    }
    if out.is_empty() {
        out.extend(hints.iter().map(|&h| Segment { a: centre(h), b: centre(h) }));
    }
    out
}

fn parse_point(s: &str) -> std::result::Result<Vec2, String> {
    let v: Vec<f64> = s
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| format!("bad number `{t}`")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [x, y] => Ok(Vec2::new(x, y)),
        _ => Err(format!("expected `x y`, got `{}`", s.trim())),
    }
}

fn parse_pose(s: &str) -> std::result::Result<Pose, String> {
    let v: Vec<f64> = s
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| format!("bad number `{t}`")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [x, y, deg] => Ok(Pose { position: Vec2::new(x, y), heading: deg.to_radians() }),
        _ => Err(format!("expected `x y heading_deg`, got `{s}`")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartSet {
    Train,
    Test,
}

impl std::str::FromStr for StartSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(StartSet::Train),
            "test" => Ok(StartSet::Test),
            other => Err(Error::config(format!("start set must be `train` or `test`, got `{other}`"))),
        }
    }
}

impl std::fmt::Display for StartSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StartSet::Train => "train",
            StartSet::Test => "test",
        })
    }
}
