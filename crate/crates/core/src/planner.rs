//! Generate-and-classify path planning: draw generator samples until the
//! classifier assigns the requested class, then optionally clean the frame.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::classifier::{ClassifierError, PathClassifier};
use crate::gan::{GanError, GanModel};
use crate::gridworld::{
    components, deviation_score, neighbors, validate_path_frame, Cell, GridError, GridMap,
    PathClass, PathClassTable, PathFrame,
};
use crate::Real;

pub const DEFAULT_MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("no generated path classified as class {class_id} within {attempts} attempts")]
    AttemptsExhausted { class_id: usize, attempts: usize },
    #[error("incompatible models: {0}")]
    IncompatibleModels(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no public path cells remain after denoising")]
    EmptyAfterDenoise,
    #[error("frame does not connect {0:?} to {1:?}")]
    NotConnected(Cell, Cell),
    #[error("frame is missing endpoint {0:?}")]
    MissingEndpoint(Cell),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Gan(#[from] GanError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

/// A planning request by class id, by endpoints, or both (which must agree).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathRequest {
    pub class_id: Option<usize>,
    pub endpoints: Option<(Cell, Cell)>,
    pub max_attempts: usize,
    pub denoise: bool,
    /// Reject matched frames that miss an endpoint, are disconnected or leave
    /// the public area.
    pub validate: bool,
}

impl PathRequest {
    pub fn for_class(class_id: usize) -> Self {
        Self {
            class_id: Some(class_id),
            endpoints: None,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            denoise: false,
            validate: true,
        }
    }

    pub fn between(source: Cell, destination: Cell) -> Self {
        Self {
            class_id: None,
            endpoints: Some((source, destination)),
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            denoise: false,
            validate: true,
        }
    }

    pub fn with_max_attempts(mut self, n: usize) -> Self {
        self.max_attempts = n;
        self
    }

    pub fn with_denoise(mut self, on: bool) -> Self {
        self.denoise = on;
        self
    }

    pub fn with_validation(mut self, on: bool) -> Self {
        self.validate = on;
        self
    }

    pub fn resolve(&self, table: &PathClassTable) -> Result<PathClass, PlanError> {
        if self.max_attempts == 0 {
            return Err(PlanError::InvalidRequest(
                "max_attempts must be at least 1".into(),
            ));
        }
        let by_id = match self.class_id {
            Some(id) => Some(*table.get(id).ok_or_else(|| {
                PlanError::InvalidRequest(format!(
                    "unknown class {id}; valid classes are 0..={}",
                    table.len().saturating_sub(1)
                ))
            })?),
            None => None,
        };
        let by_ends = match self.endpoints {
            Some((s, d)) => Some(*table.find(s, d).ok_or_else(|| {
                PlanError::InvalidRequest(format!("no class codes {s:?} -> {d:?}"))
            })?),
            None => None,
        };
        match (by_id, by_ends) {
            (Some(a), Some(b)) if a.id != b.id => Err(PlanError::InvalidRequest(format!(
                "class {} does not code endpoints {:?} -> {:?}",
                a.id, b.source, b.destination
            ))),
            (Some(a), _) | (None, Some(a)) => Ok(a),
            (None, None) => Err(PlanError::InvalidRequest("request names no class".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub class_id: usize,
    pub frame: PathFrame,
    pub attempts_used: usize,
    /// Draws classified as the requested class but discarded by denoising or
    /// validation.
    pub rejected: usize,
    pub classifier_confidence: f64,
    pub deviation: f64,
    pub ordered_waypoints: Option<Vec<Cell>>,
}

impl PlanResult {
    /// `class,attempts,rejected,confidence,deviation` sidecar.
    pub fn metadata_csv(&self) -> String {
        format!(
            "class,attempts,rejected,confidence,deviation\n{},{},{},{:.6},{:.6}\n",
            self.class_id,
            self.attempts_used,
            self.rejected,
            self.classifier_confidence,
            self.deviation
        )
    }

    /// `i,j` per line, source first.
    pub fn waypoints_csv(&self) -> Option<String> {
        self.ordered_waypoints
            .as_ref()
            .map(|w| w.iter().map(|(i, j)| format!("{i},{j}\n")).collect())
    }
}

/// Sample the generator with noise drawn from `seed` until the classifier's
/// argmax equals the requested class and, when requested, the frame passes
/// validation against the class endpoints.
pub fn plan_path<T: Real>(
    gan: &GanModel<T>,
    classifier: &PathClassifier<T>,
    map: &GridMap,
    request: &PathRequest,
    seed: u64,
) -> Result<PlanResult, PlanError> {
    let spec = request.resolve(classifier.class_table())?;
    if gan.frame_dim() != classifier.input_width() {
        return Err(PlanError::IncompatibleModels(format!(
            "generator emits {} cells, classifier expects {}",
            gan.frame_dim(),
            classifier.input_width()
        )));
    }
    if gan.shape() != map.shape() {
        return Err(PlanError::IncompatibleModels(format!(
            "generator frames are {:?}, map is {:?}",
            gan.shape(),
            map.shape()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rejected = 0;
    for attempt in 1..=request.max_attempts {
        let z = gan.sample_noise(1, &mut rng);
        let (frame, raw) = gan.generate_frame(z.as_slice().expect("contiguous"))?;
        let (class_id, probs) = classifier.classify_raw(raw.as_slice().expect("contiguous"))?;
        if class_id != spec.id {
            continue;
        }
        let frame = if request.denoise {
            match denoise(&frame, map) {
                Ok(f) => f,
                Err(PlanError::EmptyAfterDenoise) => {
                    rejected += 1;
                    continue;
                }
                Err(e) => return Err(e),
            }
        } else {
            frame
        };
        if request.validate {
            let report = validate_path_frame(&frame, map, &spec)?;
            if !(report.endpoints_present && report.connected && report.inside_map) {
                rejected += 1;
                continue;
            }
        }
        let deviation = deviation_score(&frame, map)?;
        let ordered_waypoints = extract_waypoints(&frame, &spec).ok();
        return Ok(PlanResult {
            class_id,
            frame,
            attempts_used: attempt,
            rejected,
            classifier_confidence: probs[class_id].as_f64(),
            deviation,
            ordered_waypoints,
        });
    }
    Err(PlanError::AttemptsExhausted {
        class_id: spec.id,
        attempts: request.max_attempts,
    })
}

/// Largest 4-connected component of the frame's public cells.
///
/// Ties between equally large components go to the one whose first cell
/// comes first in row-major order.
pub fn denoise(frame: &PathFrame, map: &GridMap) -> Result<PathFrame, PlanError> {
    if frame.shape() != map.shape() {
        return Err(GridError::ShapeMismatch {
            expected: map.shape(),
            found: frame.shape(),
        }
        .into());
    }
    let mut public = PathFrame::for_map(map);
    for c in frame.set_cells().filter(|&c| map.is_public(c)) {
        public.set(c, true);
    }
    let comps = components(&public);
    let best = comps
        .iter()
        .enumerate()
        .max_by_key(|(k, c)| (c.len(), std::cmp::Reverse(*k)))
        .map(|(_, c)| c)
        .ok_or(PlanError::EmptyAfterDenoise)?;
    let mut out = PathFrame::for_map(map);
    for &c in best {
        out.set(c, true);
    }
    Ok(out)
}

/// Shortest 4-adjacent route from source to destination through set cells.
pub fn extract_waypoints(frame: &PathFrame, spec: &PathClass) -> Result<Vec<Cell>, PlanError> {
    for c in [spec.source, spec.destination] {
        if !frame.get(c) {
            return Err(PlanError::MissingEndpoint(c));
        }
    }
    let (rows, cols) = frame.shape();
    let mut prev: Vec<Option<Cell>> = vec![None; rows * cols];
    let mut seen = vec![false; rows * cols];
    seen[spec.source.0 * cols + spec.source.1] = true;
    let mut queue = VecDeque::from([spec.source]);
    while let Some(c) = queue.pop_front() {
        if c == spec.destination {
            let mut route = vec![c];
            let mut at = c;
            while let Some(p) = prev[at.0 * cols + at.1] {
                route.push(p);
                at = p;
            }
            route.reverse();
            return Ok(route);
        }
        for n in neighbors(rows, cols, c) {
            let k = n.0 * cols + n.1;
            if frame.get(n) && !seen[k] {
                seen[k] = true;
                prev[k] = Some(c);
                queue.push_back(n);
            }
        }
    }
    Err(PlanError::NotConnected(spec.source, spec.destination))
}
