use std::collections::VecDeque;

use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Cell, GridError, GridMap, PathClass, PathClassTable, PathFrame};
use crate::Real;

/// Labelled path frames for one class table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathDataset {
    frames: Vec<PathFrame>,
    labels: Vec<usize>,
    class_table: PathClassTable,
}

impl PathDataset {
    pub fn new(
        frames: Vec<PathFrame>,
        labels: Vec<usize>,
        class_table: PathClassTable,
    ) -> Result<Self, GridError> {
        if frames.len() != labels.len() {
            return Err(GridError::InvalidTable(format!(
                "{} frames but {} labels",
                frames.len(),
                labels.len()
            )));
        }
        for (n, (f, &label)) in frames.iter().zip(&labels).enumerate() {
            let Some(spec) = class_table.get(label) else {
                return Err(GridError::InvalidTable(format!(
                    "sample {n} has unknown class {label}"
                )));
            };
            if !f.get(spec.source) || !f.get(spec.destination) {
                return Err(GridError::InvalidSpec {
                    class_id: label,
                    reason: format!("sample {n} does not contain its coded endpoints"),
                });
            }
        }
        if let Some(f) = frames.first() {
            if let Some(g) = frames.iter().find(|g| g.shape() != f.shape()) {
                return Err(GridError::ShapeMismatch {
                    expected: f.shape(),
                    found: g.shape(),
                });
            }
        }
        Ok(Self {
            frames,
            labels,
            class_table,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[PathFrame] {
        &self.frames
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_table(&self) -> &PathClassTable {
        &self.class_table
    }

    pub fn frame_dim(&self) -> Option<usize> {
        self.frames.first().map(|f| f.rows() * f.cols())
    }

    /// Rows of `±1` encodings, one per frame, for the given sample indices.
    pub fn signed_rows<T: Real>(&self, indices: &[usize]) -> Array2<T> {
        let dim = self.frame_dim().unwrap_or(0);
        let mut out = Array2::from_elem((indices.len(), dim), -T::one());
        for (r, &k) in indices.iter().enumerate() {
            for (c, &on) in self.frames[k].as_slice().iter().enumerate() {
                if on {
                    out[[r, c]] = T::one();
                }
            }
        }
        out
    }

    pub fn signed_matrix<T: Real>(&self) -> Array2<T> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.signed_rows(&all)
    }

    /// Indices of samples carrying `label`.
    pub fn indices_of(&self, label: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| self.labels[k] == label)
            .collect()
    }
}

/// Breadth-first distances over public cells from `origin`; `None` where unreachable.
pub fn bfs_distances(map: &GridMap, origin: Cell) -> Vec<Option<u32>> {
    let mut dist = vec![None; map.len()];
    if !map.is_public(origin) {
        return dist;
    }
    let cols = map.cols();
    dist[origin.0 * cols + origin.1] = Some(0);
    let mut queue = VecDeque::from([origin]);
    while let Some(c) = queue.pop_front() {
        let d = dist[c.0 * cols + c.1].expect("queued cells have a distance");
        for n in map.neighbors(c) {
            let k = n.0 * cols + n.1;
            if map.is_public(n) && dist[k].is_none() {
                dist[k] = Some(d + 1);
                queue.push_back(n);
            }
        }
    }
    dist
}

/// Seeded wrapper around [`synthesize_with_rng`].
pub fn synthesize_trajectory(
    map: &GridMap,
    spec: &PathClass,
    seed: u64,
    detour_rate: f64,
) -> Result<PathFrame, GridError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synthesize_with_rng(map, spec, &mut rng, detour_rate)
}

/// Shortest public path from source to destination with uniform random choice
/// among equally short next steps, plus optional one-cell sideways detours.
///
/// A detour on step `a -> b` shifts that step sideways by one cell, marking
/// `a + o` and `b + o` for a perpendicular offset `o` when both are public.
pub fn synthesize_with_rng<R: Rng + ?Sized>(
    map: &GridMap,
    spec: &PathClass,
    rng: &mut R,
    detour_rate: f64,
) -> Result<PathFrame, GridError> {
    for (what, cell) in [("source", spec.source), ("destination", spec.destination)] {
        if !map.is_public(cell) {
            return Err(GridError::InvalidSpec {
                class_id: spec.id,
                reason: format!("{what} {cell:?} is not a public cell"),
            });
        }
    }
    if !(0.0..=1.0).contains(&detour_rate) {
        return Err(GridError::InvalidSpec {
            class_id: spec.id,
            reason: format!("detour rate {detour_rate} outside [0, 1]"),
        });
    }
    let cols = map.cols();
    let to_dest = bfs_distances(map, spec.destination);
    let dist_at = |c: Cell| to_dest[c.0 * cols + c.1];
    if dist_at(spec.source).is_none() {
        return Err(GridError::Unreachable {
            class_id: spec.id,
            source_cell: spec.source,
            destination: spec.destination,
        });
    }

    let mut route = vec![spec.source];
    let mut here = spec.source;
    let mut candidates = Vec::with_capacity(4);
    while here != spec.destination {
        let d = dist_at(here).expect("route stays on reachable cells");
        candidates.clear();
        candidates.extend(map.neighbors(here).filter(|&n| dist_at(n) == Some(d - 1)));
        here = *candidates
            .choose(rng)
            .expect("a reachable cell has a neighbour one step closer");
        route.push(here);
    }

    let mut frame = PathFrame::for_map(map);
    for &c in &route {
        frame.set(c, true);
    }
    if detour_rate > 0.0 {
        for step in route.windows(2) {
            if !rng.random_bool(detour_rate) {
                continue;
            }
            let (a, b) = (step[0], step[1]);
            let di = b.0 as isize - a.0 as isize;
            let dj = b.1 as isize - a.1 as isize;
            let mut offsets = [(dj, di), (-dj, -di)];
            if rng.random_bool(0.5) {
                offsets.swap(0, 1);
            }
            let shift = |c: Cell, (oi, oj): (isize, isize)| -> Option<Cell> {
                let cell = (c.0.checked_add_signed(oi)?, c.1.checked_add_signed(oj)?);
                map.is_public(cell).then_some(cell)
            };
            if let Some((sa, sb)) = offsets
                .iter()
                .find_map(|&o| Some((shift(a, o)?, shift(b, o)?)))
            {
                frame.set(sa, true);
                frame.set(sb, true);
            }
        }
    }
    Ok(frame)
}

/// `samples_per_class` synthesized frames for every class, class-major order.
/// Class `k` draws from ChaCha stream `k` of `seed`.
pub fn build_dataset(
    map: &GridMap,
    table: &PathClassTable,
    samples_per_class: usize,
    seed: u64,
    detour_rate: f64,
) -> Result<PathDataset, GridError> {
    let mut frames = Vec::with_capacity(samples_per_class * table.len());
    let mut labels = Vec::with_capacity(frames.capacity());
    for spec in table.entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(spec.id as u64);
        for _ in 0..samples_per_class {
            frames.push(synthesize_with_rng(map, spec, &mut rng, detour_rate)?);
            labels.push(spec.id);
        }
    }
    PathDataset::new(frames, labels, table.clone())
}
