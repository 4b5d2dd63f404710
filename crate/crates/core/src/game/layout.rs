//! Board layouts: the 9×9 tile map, start poses and the text format they are
//! loaded from.
//!
//! A layout document is nine lines of nine symbols:
//!
//! | symbol | meaning                                  |
//! |--------|------------------------------------------|
//! | `#`    | blocked tile                             |
//! | `.`    | passable tile                            |
//! | `X`    | exit tile                                |
//! | `P`    | player start (passable underneath)       |
//! | `A`    | AI collaborator start                    |
//! | `G`    | pig start                                |
//!
//! The grid may be followed by facing lines such as `P N` or `A S`. Missing
//! facings default to north for the player and south for the AI. Lines that
//! start with `;` are comments.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BOARD_SIZE: usize = 9;
/// Side length of the region pieces may move in.
pub const PLAYABLE_SIZE: usize = 5;

pub const DEFAULT_LAYOUT: &str = "\
#########
#########
##....A##
##.....##
##X.G.X##
##.....##
##P....##
#########
#########
P N
A S
";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// The neighbouring cell in `dir`, if it stays on a grid of the given size.
    pub fn step(self, dir: Orientation, rows: usize, cols: usize) -> Option<Cell> {
        let (dr, dc) = dir.delta();
        let row = self.row.checked_add_signed(dr)?;
        let col = self.col.checked_add_signed(dc)?;
        (row < rows && col < cols).then_some(Cell { row, col })
    }

    pub fn manhattan(self, other: Cell) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }

    /// Direction from `self` to a 4-adjacent `other`.
    pub fn direction_to(self, other: Cell) -> Option<Orientation> {
        Orientation::ALL.into_iter().find(|d| self.step(*d, usize::MAX, usize::MAX) == Some(other))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orientation {
    N,
    E,
    S,
    W,
}

impl Orientation {
    /// Expansion order used wherever directions are enumerated.
    pub const ALL: [Orientation; 4] = [Orientation::N, Orientation::E, Orientation::S, Orientation::W];

    pub fn delta(self) -> (isize, isize) {
        match self {
            Orientation::N => (-1, 0),
            Orientation::E => (0, 1),
            Orientation::S => (1, 0),
            Orientation::W => (0, -1),
        }
    }

    /// N → W → S → E → N.
    pub fn anticlockwise(self) -> Orientation {
        match self {
            Orientation::N => Orientation::W,
            Orientation::W => Orientation::S,
            Orientation::S => Orientation::E,
            Orientation::E => Orientation::N,
        }
    }

    pub fn opposite(self) -> Orientation {
        self.anticlockwise().anticlockwise()
    }

    pub fn key(self) -> ArrowKey {
        match self {
            Orientation::N => ArrowKey::Up,
            Orientation::E => ArrowKey::Right,
            Orientation::S => ArrowKey::Down,
            Orientation::W => ArrowKey::Left,
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Orientation {
    type Err = LayoutError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "N" | "n" => Ok(Orientation::N),
            "E" | "e" => Ok(Orientation::E),
            "S" | "s" => Ok(Orientation::S),
            "W" | "w" => Ok(Orientation::W),
            other => Err(LayoutError::BadFacing(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArrowKey {
    Up,
    Down,
    Left,
    Right,
}

impl ArrowKey {
    pub const ALL: [ArrowKey; 4] = [ArrowKey::Up, ArrowKey::Right, ArrowKey::Down, ArrowKey::Left];

    pub fn direction(self) -> Orientation {
        match self {
            ArrowKey::Up => Orientation::N,
            ArrowKey::Right => Orientation::E,
            ArrowKey::Down => Orientation::S,
            ArrowKey::Left => Orientation::W,
        }
    }
}

impl fmt::Display for ArrowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TileKind {
    Passable,
    Blocked,
    Exit,
}

impl TileKind {
    /// Pieces may stand on passable and exit tiles.
    pub fn walkable(self) -> bool {
        !matches!(self, TileKind::Blocked)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pose {
    pub cell: Cell,
    pub facing: Orientation,
}

impl Pose {
    pub const fn new(cell: Cell, facing: Orientation) -> Self {
        Self { cell, facing }
    }
}

/// A rectangular tile map without any game-specific invariants. Search
/// routines work on this so they can be exercised on arbitrary grids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileGrid {
    rows: usize,
    cols: usize,
    tiles: Vec<TileKind>,
}

impl TileGrid {
    pub fn filled(rows: usize, cols: usize, kind: TileKind) -> Self {
        Self { rows, cols, tiles: vec![kind; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, cell: Cell) -> Option<TileKind> {
        (cell.row < self.rows && cell.col < self.cols).then(|| self.tiles[cell.row * self.cols + cell.col])
    }

    pub fn set(&mut self, cell: Cell, kind: TileKind) {
        assert!(cell.row < self.rows && cell.col < self.cols, "cell {cell} outside grid");
        self.tiles[cell.row * self.cols + cell.col] = kind;
    }

    pub fn is_walkable(&self, cell: Cell) -> bool {
        self.get(cell).is_some_and(TileKind::walkable)
    }

    pub fn is_passable(&self, cell: Cell) -> bool {
        self.get(cell) == Some(TileKind::Passable)
    }

    pub fn neighbor(&self, cell: Cell, dir: Orientation) -> Option<Cell> {
        cell.step(dir, self.rows, self.cols)
    }

    /// 4-neighbours of `cell` in N, E, S, W order.
    pub fn neighbors(&self, cell: Cell) -> impl Iterator<Item = (Orientation, Cell)> + '_ {
        Orientation::ALL.into_iter().filter_map(move |d| self.neighbor(cell, d).map(|c| (d, c)))
    }

    pub fn cells(&self) -> impl Iterator<Item = (Cell, TileKind)> + '_ {
        self.tiles.iter().enumerate().map(|(i, k)| (Cell::new(i / self.cols, i % self.cols), *k))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LayoutError {
    #[error("layout must be {expected}×{expected}, found {rows} rows (widths {widths:?})")]
    Dimension { expected: usize, rows: usize, widths: Vec<usize> },
    #[error("unknown tile symbol {symbol:?} at {cell}")]
    UnknownSymbol { symbol: char, cell: Cell },
    #[error("missing start marker {0}")]
    MissingMarker(char),
    #[error("start marker {0} appears more than once")]
    DuplicateMarker(char),
    #[error("start marker {marker} at {cell} is not on a passable tile")]
    StartNotPassable { marker: char, cell: Cell },
    #[error("layout has no playable tiles")]
    EmptyPlayable,
    #[error("playable tiles form {0} disconnected regions")]
    Disconnected(usize),
    #[error("playable region must fit a {size}×{size} area ringed by blocked tiles")]
    PlayableBounds { size: usize },
    #[error("invalid facing {0:?}")]
    BadFacing(String),
    #[error("unrecognised trailing line {0:?}")]
    TrailingLine(String),
    #[error("start positions must be distinct")]
    OverlappingStarts,
}

/// Immutable, validated board.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoardLayout {
    grid: TileGrid,
    player_start: Pose,
    ai_start: Pose,
    pig_start: Cell,
}

impl BoardLayout {
    pub fn default_layout() -> Self {
        load_layout(DEFAULT_LAYOUT).expect("shipped layout is valid")
    }

    pub fn new(grid: TileGrid, player_start: Pose, ai_start: Pose, pig_start: Cell) -> Result<Self, LayoutError> {
        let layout = Self { grid, player_start, ai_start, pig_start };
        layout.validate()?;
        Ok(layout)
    }

    pub fn grid(&self) -> &TileGrid {
        &self.grid
    }

    pub fn width(&self) -> usize {
        self.grid.cols
    }

    pub fn height(&self) -> usize {
        self.grid.rows
    }

    pub fn tile(&self, cell: Cell) -> Option<TileKind> {
        self.grid.get(cell)
    }

    pub fn player_start(&self) -> Pose {
        self.player_start
    }

    pub fn ai_start(&self) -> Pose {
        self.ai_start
    }

    pub fn pig_start(&self) -> Cell {
        self.pig_start
    }

    /// Exit tiles in row-major order.
    pub fn exits(&self) -> Vec<Cell> {
        self.grid.cells().filter(|(_, k)| *k == TileKind::Exit).map(|(c, _)| c).collect()
    }

    /// The exit with the largest column; ties go to the upper one.
    pub fn rightmost_exit(&self) -> Option<Cell> {
        self.exits().into_iter().max_by(|a, b| a.col.cmp(&b.col).then(b.row.cmp(&a.row)))
    }

    pub fn playable_cells(&self) -> Vec<Cell> {
        self.grid.cells().filter(|(_, k)| k.walkable()).map(|(c, _)| c).collect()
    }

    fn validate(&self) -> Result<(), LayoutError> {
        if self.grid.rows != BOARD_SIZE || self.grid.cols != BOARD_SIZE {
            return Err(LayoutError::Dimension {
                expected: BOARD_SIZE,
                rows: self.grid.rows,
                widths: vec![self.grid.cols; self.grid.rows],
            });
        }
        let playable = self.playable_cells();
        if playable.is_empty() {
            return Err(LayoutError::EmptyPlayable);
        }
        let (min_r, max_r) = bounds(playable.iter().map(|c| c.row));
        let (min_c, max_c) = bounds(playable.iter().map(|c| c.col));
        let ringed = min_r >= 1 && min_c >= 1 && max_r + 1 < BOARD_SIZE && max_c + 1 < BOARD_SIZE;
        if !ringed || max_r - min_r + 1 > PLAYABLE_SIZE || max_c - min_c + 1 > PLAYABLE_SIZE {
            return Err(LayoutError::PlayableBounds { size: PLAYABLE_SIZE });
        }
        let components = count_components(&self.grid);
        if components != 1 {
            return Err(LayoutError::Disconnected(components));
        }
        for (marker, cell) in [('P', self.player_start.cell), ('A', self.ai_start.cell), ('G', self.pig_start)] {
            if !self.grid.is_passable(cell) {
                return Err(LayoutError::StartNotPassable { marker, cell });
            }
        }
        let (p, a, g) = (self.player_start.cell, self.ai_start.cell, self.pig_start);
        if p == a || p == g || a == g {
            return Err(LayoutError::OverlappingStarts);
        }
        Ok(())
    }

    /// Renders the layout back into the text format accepted by [`load_layout`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in 0..self.grid.rows {
            for col in 0..self.grid.cols {
                let cell = Cell::new(row, col);
                let ch = if cell == self.player_start.cell {
                    'P'
                } else if cell == self.ai_start.cell {
                    'A'
                } else if cell == self.pig_start {
                    'G'
                } else {
                    match self.grid.get(cell).unwrap() {
                        TileKind::Passable => '.',
                        TileKind::Blocked => '#',
                        TileKind::Exit => 'X',
                    }
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out.push_str(&format!("P {}\nA {}\n", self.player_start.facing, self.ai_start.facing));
        out
    }
}

impl Default for BoardLayout {
    fn default() -> Self {
        Self::default_layout()
    }
}

fn bounds(values: impl Iterator<Item = usize>) -> (usize, usize) {
    values.fold((usize::MAX, 0), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Number of 4-connected components among walkable tiles.
fn count_components(grid: &TileGrid) -> usize {
    let mut seen = vec![false; grid.rows * grid.cols];
    let mut components = 0;
    for (start, kind) in grid.cells() {
        if !kind.walkable() || seen[start.row * grid.cols + start.col] {
            continue;
        }
        components += 1;
        let mut queue = VecDeque::from([start]);
        seen[start.row * grid.cols + start.col] = true;
        while let Some(cell) = queue.pop_front() {
            for (_, next) in grid.neighbors(cell) {
                let idx = next.row * grid.cols + next.col;
                if grid.is_walkable(next) && !seen[idx] {
                    seen[idx] = true;
                    queue.push_back(next);
                }
            }
        }
    }
    components
}

/// Parses and validates a layout document.
pub fn load_layout(text: &str) -> Result<BoardLayout, LayoutError> {
    let lines: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty() && !l.starts_with(';')).collect();

    let grid_lines = &lines[..lines.len().min(BOARD_SIZE)];
    let widths: Vec<usize> = grid_lines.iter().map(|l| l.chars().count()).collect();
    if grid_lines.len() != BOARD_SIZE || widths.iter().any(|w| *w != BOARD_SIZE) {
        return Err(LayoutError::Dimension { expected: BOARD_SIZE, rows: grid_lines.len(), widths });
    }

    let mut grid = TileGrid::filled(BOARD_SIZE, BOARD_SIZE, TileKind::Blocked);
    let mut markers: [Option<Cell>; 3] = [None; 3];
    for (row, line) in grid_lines.iter().enumerate() {
        for (col, symbol) in line.chars().enumerate() {
            let cell = Cell::new(row, col);
            let kind = match symbol {
                '#' => TileKind::Blocked,
                '.' => TileKind::Passable,
                'X' => TileKind::Exit,
                'P' | 'A' | 'G' => {
                    let slot = &mut markers["PAG".find(symbol).unwrap()];
                    if slot.replace(cell).is_some() {
                        return Err(LayoutError::DuplicateMarker(symbol));
                    }
                    TileKind::Passable
                }
                _ => return Err(LayoutError::UnknownSymbol { symbol, cell }),
            };
            grid.set(cell, kind);
        }
    }

    let mut player_facing = Orientation::N;
    let mut ai_facing = Orientation::S;
    for line in &lines[BOARD_SIZE..] {
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some("P"), Some(f), None) => player_facing = f.parse()?,
            (Some("A"), Some(f), None) => ai_facing = f.parse()?,
            _ => return Err(LayoutError::TrailingLine(line.to_string())),
        }
    }

    if grid.cells().all(|(_, t)| !t.walkable()) {
        return Err(LayoutError::EmptyPlayable);
    }
    let [p, a, g] = markers;
    let player = p.ok_or(LayoutError::MissingMarker('P'))?;
    let ai = a.ok_or(LayoutError::MissingMarker('A'))?;
    let pig = g.ok_or(LayoutError::MissingMarker('G'))?;
    BoardLayout::new(grid, Pose::new(player, player_facing), Pose::new(ai, ai_facing), pig)
}
