use std::collections::VecDeque;

use super::{neighbors, Cell, GridError, GridMap, PathClass, PathFrame};

/// Outcome of checking a frame against a map and a class coding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationReport {
    /// Both coded endpoint cells are set.
    pub endpoints_present: bool,
    /// Set cells form exactly one 4-connected component.
    pub connected: bool,
    /// No set cell lies on a non-public cell.
    pub inside_map: bool,
    pub missing_endpoints: usize,
    pub components: usize,
    pub outside_cells: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.endpoints_present && self.connected && self.inside_map
    }
}

fn check_shape(frame: &PathFrame, map: &GridMap) -> Result<(), GridError> {
    if frame.shape() != map.shape() {
        return Err(GridError::ShapeMismatch {
            expected: map.shape(),
            found: frame.shape(),
        });
    }
    Ok(())
}

/// 4-connected components of the set cells, each in BFS discovery order.
/// Components are ordered by their first cell in row-major order.
pub fn components(frame: &PathFrame) -> Vec<Vec<Cell>> {
    let (rows, cols) = frame.shape();
    let mut seen = vec![false; rows * cols];
    let mut out = Vec::new();
    for start in frame.set_cells() {
        if seen[start.0 * cols + start.1] {
            continue;
        }
        seen[start.0 * cols + start.1] = true;
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            comp.push(c);
            for n in neighbors(rows, cols, c) {
                let k = n.0 * cols + n.1;
                if frame.get(n) && !seen[k] {
                    seen[k] = true;
                    queue.push_back(n);
                }
            }
        }
        out.push(comp);
    }
    out
}

pub fn validate_path_frame(
    frame: &PathFrame,
    map: &GridMap,
    spec: &PathClass,
) -> Result<ValidationReport, GridError> {
    check_shape(frame, map)?;
    let missing_endpoints = [spec.source, spec.destination]
        .iter()
        .filter(|&&c| !frame.get(c))
        .count();
    let components = components(frame).len();
    let outside_cells = frame.set_cells().filter(|&c| !map.is_public(c)).count();
    Ok(ValidationReport {
        endpoints_present: missing_endpoints == 0,
        connected: components == 1,
        inside_map: outside_cells == 0,
        missing_endpoints,
        components,
        outside_cells,
    })
}

/// Fraction of path cells outside the public area, relative to the size of
/// the public area: `(|G| - |G ∩ B|) / |B|`.
pub fn deviation_score(frame: &PathFrame, map: &GridMap) -> Result<f64, GridError> {
    check_shape(frame, map)?;
    let public = map.public_count();
    if public == 0 {
        return Err(GridError::EmptyMap);
    }
    let total = frame.count();
    let inside = frame.set_cells().filter(|&c| map.is_public(c)).count();
    Ok((total - inside) as f64 / public as f64)
}

/// ASCII view: `#` non-public, `.` public, `*` path, `S`/`D` endpoints.
pub fn render(map: &GridMap, frame: Option<&PathFrame>, endpoints: Option<(Cell, Cell)>) -> String {
    let mut out = String::with_capacity(map.len() + map.rows());
    for i in 0..map.rows() {
        for j in 0..map.cols() {
            let c = (i, j);
            let ch = match endpoints {
                Some((s, _)) if s == c => 'S',
                Some((_, d)) if d == c => 'D',
                _ if frame.is_some_and(|f| f.get(c)) => '*',
                _ if map.is_public(c) => '.',
                _ => '#',
            };
            out.push(ch);
        }
        out.push('\n');
    }
    out
}
