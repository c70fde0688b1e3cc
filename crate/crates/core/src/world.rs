//! Grid floor plans, shortest paths and distance primitives.
//!
//! A plan is a uniform 4-connected grid. `y` grows downwards (row index), so
//! "north" is `y - 1`. Every neighbour enumeration uses the fixed order
//! N, E, S, W; shortest paths are the lexicographically smallest direction
//! sequence under that order, which keeps routes reproducible across runs.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Position {
    pub x: usize,
    pub y: usize,
}

impl Position {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ORDER: [Direction; 4] = [Self::North, Self::East, Self::South, Self::West];
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("line {line} has width {found}, expected {expected}")]
    NonRectangular { line: usize, expected: usize, found: usize },
    #[error("unknown character {ch:?} at line {line}, column {column}")]
    UnknownCharacter { ch: char, line: usize, column: usize },
    #[error("cell {0} is not reachable from the rest of the walkable region")]
    UnreachableCell(Position),
    #[error("floor plan has no walkable cell")]
    NoWalkableCell,
    #[error("position {0} is not walkable")]
    UnwalkablePosition(Position),
    #[error("position {0} is outside the floor plan")]
    OutOfBounds(Position),
    #[error("cell size must be positive and finite, got {0}")]
    InvalidCellSize(f64),
    #[error("destination {0:?} appears more than once")]
    DuplicateDestination(String),
}

/// Ordered list of 4-adjacent walkable cells from origin to target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    cells: Vec<Position>,
}

impl Route {
    pub fn cells(&self) -> &[Position] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    /// Routes are never empty; this exists for clippy's sake.
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn origin(&self) -> Position {
        self.cells[0]
    }

    pub fn target(&self) -> Position {
        *self.cells.last().expect("route is non-empty")
    }

    /// Number of moves needed to walk the route.
    pub fn steps(&self) -> usize {
        self.cells.len() - 1
    }

    pub fn length_meters(&self, cell_size: f64) -> f64 {
        self.steps() as f64 * cell_size
    }

    pub fn into_cells(self) -> Vec<Position> {
        self.cells
    }
}

/// All-pairs BFS distances over walkable cells, `u32::MAX` for walls.
#[derive(Debug)]
struct DistanceTable {
    dist: Vec<u32>,
}

#[derive(Debug)]
pub struct FloorPlan {
    width: usize,
    height: usize,
    walkable: Vec<bool>,
    destinations: BTreeMap<String, Position>,
    cell_size: f64,
    table: OnceLock<DistanceTable>,
}

impl Clone for FloorPlan {
    fn clone(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            walkable: self.walkable.clone(),
            destinations: self.destinations.clone(),
            cell_size: self.cell_size,
            table: OnceLock::new(),
        }
    }
}

impl PartialEq for FloorPlan {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.walkable == other.walkable
            && self.destinations == other.destinations
            && self.cell_size == other.cell_size
    }
}

pub const UNREACHABLE: u32 = u32::MAX;

/// Parse an ASCII floor plan with the default cell size of one meter.
pub fn load_floor_plan(text: &str) -> Result<FloorPlan, WorldError> {
    FloorPlan::parse(text, 1.0)
}

impl FloorPlan {
    /// Parse an ASCII map: `#` wall, `.` floor, `A`-`Z` named destination.
    ///
    /// Trailing blank lines and `\r` are ignored; all remaining lines must
    /// have the same width.
    pub fn parse(text: &str, cell_size: f64) -> Result<Self, WorldError> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(WorldError::InvalidCellSize(cell_size));
        }
        let mut lines: Vec<&str> = text.split('\n').map(|l| l.trim_end_matches('\r')).collect();
        while lines.last().is_some_and(|l| l.is_empty()) {
            lines.pop();
        }
        if lines.is_empty() {
            return Err(WorldError::NoWalkableCell);
        }
        let width = lines[0].chars().count();
        let height = lines.len();
        let mut walkable = Vec::with_capacity(width * height);
        let mut destinations = BTreeMap::new();
        for (y, line) in lines.iter().enumerate() {
            let found = line.chars().count();
            if found != width {
                return Err(WorldError::NonRectangular { line: y + 1, expected: width, found });
            }
            for (x, ch) in line.chars().enumerate() {
                match ch {
                    '#' => walkable.push(false),
                    '.' => walkable.push(true),
                    'A'..='Z' => {
                        walkable.push(true);
                        let name = ch.to_string();
                        if destinations.insert(name.clone(), Position::new(x, y)).is_some() {
                            return Err(WorldError::DuplicateDestination(name));
                        }
                    }
                    _ => {
                        return Err(WorldError::UnknownCharacter { ch, line: y + 1, column: x + 1 })
                    }
                }
            }
        }
        let plan = Self {
            width,
            height,
            walkable,
            destinations,
            cell_size,
            table: OnceLock::new(),
        };
        plan.check_connected()?;
        Ok(plan)
    }

    fn check_connected(&self) -> Result<(), WorldError> {
        let first = self.walkable.iter().position(|&w| w).ok_or(WorldError::NoWalkableCell)?;
        let is_dest = |i: usize| self.destinations.values().any(|&p| self.index(p) == i);
        let root = (0..self.walkable.len()).find(|&i| self.walkable[i] && !is_dest(i)).unwrap_or(first);
        let dist = self.bfs(self.pos_of(root));
        // Report a named destination first: that is usually the cell someone walled off.
        for pos in self.destinations.values() {
            if dist[self.index(*pos)] == UNREACHABLE {
                return Err(WorldError::UnreachableCell(*pos));
            }
        }
        for (i, &w) in self.walkable.iter().enumerate() {
            if w && dist[i] == UNREACHABLE {
                return Err(WorldError::UnreachableCell(self.pos_of(i)));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn with_cell_size(mut self, cell_size: f64) -> Result<Self, WorldError> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(WorldError::InvalidCellSize(cell_size));
        }
        self.cell_size = cell_size;
        Ok(self)
    }

    pub fn destinations(&self) -> &BTreeMap<String, Position> {
        &self.destinations
    }

    pub fn destination(&self, name: &str) -> Option<Position> {
        self.destinations.get(name).copied()
    }

    pub fn in_bounds(&self, p: Position) -> bool {
        p.x < self.width && p.y < self.height
    }

    pub fn is_walkable(&self, p: Position) -> bool {
        self.in_bounds(p) && self.walkable[self.index(p)]
    }

    pub fn walkable_cells(&self) -> impl Iterator<Item = Position> + '_ {
        self.walkable
            .iter()
            .enumerate()
            .filter(|(_, &w)| w)
            .map(|(i, _)| self.pos_of(i))
    }

    pub fn walkable_count(&self) -> usize {
        self.walkable.iter().filter(|&&w| w).count()
    }

    fn index(&self, p: Position) -> usize {
        p.y * self.width + p.x
    }

    fn pos_of(&self, i: usize) -> Position {
        Position::new(i % self.width, i / self.width)
    }

    pub fn step(&self, p: Position, dir: Direction) -> Option<Position> {
        let next = match dir {
            Direction::North => Position::new(p.x, p.y.checked_sub(1)?),
            Direction::East => Position::new(p.x + 1, p.y),
            Direction::South => Position::new(p.x, p.y + 1),
            Direction::West => Position::new(p.x.checked_sub(1)?, p.y),
        };
        self.is_walkable(next).then_some(next)
    }

    fn neighbors(&self, p: Position) -> impl Iterator<Item = Position> + '_ {
        Direction::ORDER.into_iter().filter_map(move |d| self.step(p, d))
    }

    /// Walkable 4-neighbours of `at` in N, E, S, W order.
    pub fn successors(&self, at: Position) -> Result<Vec<Position>, WorldError> {
        self.require_walkable(at)?;
        Ok(self.neighbors(at).collect())
    }

    /// A junction: a walkable cell with at least three walkable neighbours.
    pub fn is_decision_point(&self, at: Position) -> bool {
        self.is_walkable(at) && self.neighbors(at).count() >= 3
    }

    fn require_walkable(&self, p: Position) -> Result<(), WorldError> {
        if self.is_walkable(p) {
            Ok(())
        } else if self.in_bounds(p) {
            Err(WorldError::UnwalkablePosition(p))
        } else {
            Err(WorldError::OutOfBounds(p))
        }
    }

    fn bfs(&self, from: Position) -> Vec<u32> {
        let mut dist = vec![UNREACHABLE; self.walkable.len()];
        let mut queue = VecDeque::new();
        dist[self.index(from)] = 0;
        queue.push_back(from);
        while let Some(p) = queue.pop_front() {
            let d = dist[self.index(p)];
            for n in self.neighbors(p) {
                let i = self.index(n);
                if dist[i] == UNREACHABLE {
                    dist[i] = d + 1;
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    fn table(&self) -> &DistanceTable {
        self.table.get_or_init(|| {
            let n = self.walkable.len();
            let mut dist = vec![UNREACHABLE; n * n];
            for i in 0..n {
                if self.walkable[i] {
                    dist[i * n..(i + 1) * n].copy_from_slice(&self.bfs(self.pos_of(i)));
                }
            }
            DistanceTable { dist }
        })
    }

    /// Grid (BFS) distance in cells between two walkable positions.
    pub fn grid_distance(&self, a: Position, b: Position) -> Result<u32, WorldError> {
        self.require_walkable(a)?;
        self.require_walkable(b)?;
        Ok(self.grid_distance_unchecked(a, b))
    }

    pub(crate) fn grid_distance_unchecked(&self, a: Position, b: Position) -> u32 {
        let n = self.walkable.len();
        self.table().dist[self.index(a) * n + self.index(b)]
    }

    /// First step of the canonical shortest path from `from` towards `to`.
    /// Returns `from` itself when the two coincide.
    pub(crate) fn next_step_towards(&self, from: Position, to: Position) -> Position {
        let d = self.grid_distance_unchecked(from, to);
        if d == 0 {
            return from;
        }
        self.neighbors(from)
            .find(|&n| self.grid_distance_unchecked(n, to) == d - 1)
            .expect("connected plan always has a descending neighbour")
    }

    /// Minimum-length route; among equal-length routes, the one whose move
    /// sequence is lexicographically first under N < E < S < W.
    pub fn shortest_path(&self, from: Position, to: Position) -> Result<Route, WorldError> {
        self.require_walkable(from)?;
        self.require_walkable(to)?;
        let mut cells = vec![from];
        let mut at = from;
        while at != to {
            at = self.next_step_towards(at, to);
            cells.push(at);
        }
        Ok(Route { cells })
    }

    /// Euclidean distance between cell centres, in meters.
    pub fn straight_line_distance(&self, a: Position, b: Position) -> Result<f64, WorldError> {
        for p in [a, b] {
            if !self.in_bounds(p) {
                return Err(WorldError::OutOfBounds(p));
            }
        }
        let dx = a.x as f64 - b.x as f64;
        let dy = a.y as f64 - b.y as f64;
        Ok(dx.hypot(dy) * self.cell_size)
    }

    /// Render back to the ASCII map format.
    pub fn to_ascii(&self) -> String {
        let mut by_pos: BTreeMap<Position, char> = BTreeMap::new();
        for (name, pos) in &self.destinations {
            by_pos.insert(*pos, name.chars().next().unwrap_or('?'));
        }
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let p = Position::new(x, y);
                let ch = match by_pos.get(&p) {
                    Some(&c) => c,
                    None if self.walkable[self.index(p)] => '.',
                    None => '#',
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }
}

impl Route {
    /// Build a route from raw cells, checking adjacency and walkability.
    pub fn from_cells(plan: &FloorPlan, cells: Vec<Position>) -> Result<Self, WorldError> {
        let first = *cells.first().ok_or(WorldError::NoWalkableCell)?;
        plan.require_walkable(first)?;
        for pair in cells.windows(2) {
            plan.require_walkable(pair[1])?;
            let adjacent = pair[0].x.abs_diff(pair[1].x) + pair[0].y.abs_diff(pair[1].y) == 1;
            if !adjacent {
                return Err(WorldError::UnwalkablePosition(pair[1]));
            }
        }
        Ok(Self { cells })
    }
}
