//! Occupancy grid, path frames, trajectory synthesis and the deviation metric.
//!
//! Cells are addressed as `(i, j)`: `i` is the row (vertical) index and `j`
//! the column (horizontal) index. The path class table codes endpoints as
//! `(x, y)` pairs which map to `(i, j)` one-to-one.

mod analysis;
mod classes;
mod synth;

use std::io::{Read, Write};

use ndarray::Array1;
use thiserror::Error;

use crate::Real;

pub use analysis::{components, deviation_score, render, validate_path_frame, ValidationReport};
pub use classes::{PathClass, PathClassTable};
pub use synth::{
    bfs_distances, build_dataset, synthesize_trajectory, synthesize_with_rng, PathDataset,
};

/// A grid cell `(i, j)`.
pub type Cell = (usize, usize);

/// Rows and columns of the library floor grid.
pub const DEFAULT_ROWS: usize = 19;
pub const DEFAULT_COLS: usize = 13;

const LIBRARY_MAP_CSV: &str = include_str!("../../assets/library_map.csv");

#[derive(Debug, Error)]
pub enum GridError {
    #[error("malformed CSV at line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },
    #[error("map has no public-access cell")]
    EmptyMap,
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("class {class_id}: {reason}")]
    InvalidSpec { class_id: usize, reason: String },
    #[error("class {class_id}: no public path from {source_cell:?} to {destination:?}")]
    Unreachable {
        class_id: usize,
        source_cell: Cell,
        destination: Cell,
    },
    #[error("invalid class table: {0}")]
    InvalidTable(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Binary occupancy matrix; a cell is 1 iff it is public-access.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    rows: usize,
    cols: usize,
    cells: Vec<bool>,
}

impl GridMap {
    pub fn new(rows: usize, cols: usize, cells: Vec<bool>) -> Result<Self, GridError> {
        if cells.len() != rows * cols || rows == 0 || cols == 0 {
            return Err(GridError::ShapeMismatch {
                expected: (rows, cols),
                found: (cells.len() / cols.max(1), cols),
            });
        }
        if !cells.iter().any(|&c| c) {
            return Err(GridError::EmptyMap);
        }
        Ok(Self { rows, cols, cells })
    }

    /// Every cell public.
    pub fn open(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![true; rows * cols]).expect("non-empty open map")
    }

    /// The checked-in 19x13 library floor plan.
    pub fn library() -> Self {
        load_map(LIBRARY_MAP_CSV.as_bytes()).expect("bundled library map is valid")
    }

    /// Parse from an ASCII sketch where `.` is public and anything else is not.
    pub fn from_ascii(art: &str) -> Result<Self, GridError> {
        let lines: Vec<&str> = art
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        let cols = lines.first().map_or(0, |l| l.chars().count());
        let mut cells = Vec::with_capacity(lines.len() * cols);
        for (n, line) in lines.iter().enumerate() {
            if line.chars().count() != cols {
                return Err(GridError::MalformedCsv {
                    line: n + 1,
                    reason: "ragged row".into(),
                });
            }
            cells.extend(line.chars().map(|c| c == '.'));
        }
        Self::new(lines.len(), cols, cells)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, (i, j): Cell) -> bool {
        i < self.rows && j < self.cols
    }

    pub fn is_public(&self, cell: Cell) -> bool {
        self.contains(cell) && self.cells[cell.0 * self.cols + cell.1]
    }

    pub fn public_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn public_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(move |(k, _)| (k / self.cols, k % self.cols))
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.cells
    }

    /// 4-connected in-bounds neighbours of `cell`, public or not.
    pub fn neighbors(&self, (i, j): Cell) -> impl Iterator<Item = Cell> + '_ {
        neighbors(self.rows, self.cols, (i, j))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), GridError> {
        write_grid(w, self.cols, &self.cells)
    }
}

pub(crate) fn neighbors(rows: usize, cols: usize, (i, j): Cell) -> impl Iterator<Item = Cell> {
    const STEPS: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
    STEPS.into_iter().filter_map(move |(di, dj)| {
        let ni = i.checked_add_signed(di)?;
        let nj = j.checked_add_signed(dj)?;
        (ni < rows && nj < cols).then_some((ni, nj))
    })
}

/// One trajectory as a binary matrix over the map grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathFrame {
    rows: usize,
    cols: usize,
    cells: Vec<bool>,
}

impl PathFrame {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cells: vec![false; rows * cols],
        }
    }

    pub fn for_map(map: &GridMap) -> Self {
        Self::empty(map.rows, map.cols)
    }

    pub fn from_cells(rows: usize, cols: usize, cells: Vec<bool>) -> Result<Self, GridError> {
        if cells.len() != rows * cols {
            return Err(GridError::ShapeMismatch {
                expected: (rows, cols),
                found: (cells.len() / cols.max(1), cols),
            });
        }
        Ok(Self { rows, cols, cells })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, (i, j): Cell) -> bool {
        i < self.rows && j < self.cols && self.cells[i * self.cols + j]
    }

    pub fn set(&mut self, (i, j): Cell, on: bool) {
        assert!(
            i < self.rows && j < self.cols,
            "cell ({i}, {j}) out of frame"
        );
        self.cells[i * self.cols + j] = on;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn set_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(move |(k, _)| (k / self.cols, k % self.cols))
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.cells
    }

    /// Signed encoding used for training: set cells map to +1, clear cells to -1.
    pub fn to_signed<T: Real>(&self) -> Array1<T> {
        self.cells
            .iter()
            .map(|&c| if c { T::one() } else { -T::one() })
            .collect()
    }

    /// Binarize a raw network output at the midpoint of the tanh range.
    pub fn from_raw<T: Real>(rows: usize, cols: usize, raw: &[T]) -> Result<Self, GridError> {
        Self::from_cells(rows, cols, raw.iter().map(|&v| v > T::zero()).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), GridError> {
        write_grid(w, self.cols, &self.cells)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

/// Parse a map CSV: rectangular rows of comma-separated 0/1 integers.
pub fn load_map<R: Read>(reader: R) -> Result<GridMap, GridError> {
    let (rows, cols, cells) = parse_grid(reader)?;
    GridMap::new(rows, cols, cells)
}

/// Parse a path frame CSV and check it against the expected `(rows, cols)`.
pub fn read_path_frame<R: Read>(reader: R, shape: (usize, usize)) -> Result<PathFrame, GridError> {
    let (rows, cols, cells) = parse_grid(reader)?;
    if (rows, cols) != shape {
        return Err(GridError::ShapeMismatch {
            expected: shape,
            found: (rows, cols),
        });
    }
    PathFrame::from_cells(rows, cols, cells)
}

pub fn write_path_frame<W: Write>(frame: &PathFrame, w: W) -> Result<(), GridError> {
    frame.write_csv(w)
}

fn parse_grid<R: Read>(mut reader: R) -> Result<(usize, usize, Vec<bool>), GridError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let mut cols = None;
    let mut rows = 0;
    let mut cells = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = cells.len();
        for field in line.split(',') {
            match field.trim() {
                "0" => cells.push(false),
                "1" => cells.push(true),
                other => {
                    return Err(GridError::MalformedCsv {
                        line: n + 1,
                        reason: format!("entry {other:?} is not 0 or 1"),
                    })
                }
            }
        }
        let width = cells.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(GridError::MalformedCsv {
                    line: n + 1,
                    reason: format!("row has {width} entries, expected {c}"),
                })
            }
            Some(_) => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or(GridError::MalformedCsv {
        line: 0,
        reason: "no rows".into(),
    })?;
    Ok((rows, cols, cells))
}

fn write_grid<W: Write>(mut w: W, cols: usize, cells: &[bool]) -> Result<(), GridError> {
    let mut line = String::with_capacity(cols * 2);
    for row in cells.chunks(cols) {
        line.clear();
        for (k, &c) in row.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push(if c { '1' } else { '0' });
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}
