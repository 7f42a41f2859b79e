//! RSSI fingerprint localization.
//!
//! Fingerprints are simulated with a log-distance path-loss model (or loaded
//! from CSV). The position is predicted by two independent k-NN models, one
//! per coordinate, trained on the same fingerprints.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::gridworld::{Cell, GridMap};

pub const DEFAULT_BEACONS: usize = 13;
pub const DEFAULT_SAMPLES: usize = 1420;
pub const DEFAULT_K: usize = 3;
pub const MISSING_RSSI: f64 = -200.0;

const BEACON_UUID: &str = "f7826da6-4fa2-4e98-8024-bc5b71e0893e";
const LIBRARY_BEACONS: [Cell; DEFAULT_BEACONS] = [
    (0, 0),
    (0, 8),
    (0, 12),
    (4, 4),
    (4, 12),
    (6, 8),
    (8, 0),
    (10, 6),
    (12, 12),
    (13, 3),
    (14, 10),
    (18, 0),
    (18, 8),
];

#[derive(Debug, Error)]
pub enum LocalizationError {
    #[error("malformed CSV at line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },
    #[error("invalid position {0:?}")]
    InvalidPosition(Cell),
    #[error("invalid beacon layout: {0}")]
    InvalidLayout(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("need at least {needed} samples, have {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("expected {expected} RSSI values, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("empty test set")]
    EmptySet,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type Result<T> = std::result::Result<T, LocalizationError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Beacon {
    pub uuid: String,
    pub major: u16,
    pub minor: u16,
    pub cell: Cell,
}

impl Beacon {
    /// `uuid-major-minor`.
    pub fn id(&self) -> String {
        format!("{}-{}-{}", self.uuid, self.major, self.minor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeaconLayout {
    beacons: Vec<Beacon>,
}

impl BeaconLayout {
    pub fn new(beacons: Vec<Beacon>, map: &GridMap) -> Result<Self> {
        if beacons.is_empty() {
            return Err(LocalizationError::InvalidLayout("no beacons".into()));
        }
        let mut ids = std::collections::HashSet::new();
        for b in &beacons {
            if !map.is_public(b.cell) {
                return Err(LocalizationError::InvalidLayout(format!(
                    "beacon {} at {:?} is not on a public cell",
                    b.id(),
                    b.cell
                )));
            }
            if !ids.insert(b.id()) {
                return Err(LocalizationError::InvalidLayout(format!(
                    "duplicate id {}",
                    b.id()
                )));
            }
        }
        Ok(Self { beacons })
    }

    /// Beacons at the given cells sharing one UUID, major 1, minors 1..
    pub fn at_cells(cells: &[Cell], map: &GridMap) -> Result<Self> {
        let beacons = cells
            .iter()
            .enumerate()
            .map(|(k, &cell)| Beacon {
                uuid: BEACON_UUID.to_string(),
                major: 1,
                minor: k as u16 + 1,
                cell,
            })
            .collect();
        Self::new(beacons, map)
    }

    /// The 13-beacon layout for [`GridMap::library`].
    pub fn library() -> Self {
        Self::at_cells(&LIBRARY_BEACONS, &GridMap::library()).expect("built-in layout is valid")
    }

    pub fn len(&self) -> usize {
        self.beacons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beacons.is_empty()
    }

    pub fn beacons(&self) -> &[Beacon] {
        &self.beacons
    }
}

/// Log-distance path-loss parameters. Distances are in cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagation {
    /// RSSI at one cell, dBm.
    pub p0_dbm: f64,
    pub exponent: f64,
    /// Shadowing standard deviation, dB.
    pub sigma_db: f64,
}

impl Default for Propagation {
    fn default() -> Self {
        Self {
            p0_dbm: -60.0,
            exponent: 1.8,
            sigma_db: 2.0,
        }
    }
}

impl Propagation {
    pub fn with_sigma(self, sigma_db: f64) -> Self {
        Self { sigma_db, ..self }
    }

    fn noise(&self) -> Result<Normal<f64>> {
        if !(self.sigma_db >= 0.0 && self.sigma_db.is_finite()) {
            return Err(LocalizationError::InvalidParameter(format!(
                "shadowing sigma must be a finite value >= 0, got {}",
                self.sigma_db
            )));
        }
        Normal::new(0.0, self.sigma_db)
            .map_err(|e| LocalizationError::InvalidParameter(e.to_string()))
    }

    /// Noise-free RSSI at Euclidean distance `d` cells.
    pub fn mean_rssi(&self, d: f64) -> f64 {
        self.p0_dbm - 10.0 * self.exponent * d.max(1.0).log10()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintSample {
    pub rssi: Vec<f64>,
    pub label: Cell,
}

pub fn simulate_rssi(
    layout: &BeaconLayout,
    map: &GridMap,
    position: Cell,
    params: &Propagation,
    seed: u64,
) -> Result<FingerprintSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_with_rng(layout, map, position, params, &mut rng)
}

pub fn simulate_with_rng<R: Rng + ?Sized>(
    layout: &BeaconLayout,
    map: &GridMap,
    position: Cell,
    params: &Propagation,
    rng: &mut R,
) -> Result<FingerprintSample> {
    if !map.contains(position) {
        return Err(LocalizationError::InvalidPosition(position));
    }
    let noise = params.noise()?;
    let rssi = layout
        .beacons
        .iter()
        .map(|b| {
            let di = b.cell.0 as f64 - position.0 as f64;
            let dj = b.cell.1 as f64 - position.1 as f64;
            params.mean_rssi(di.hypot(dj)) + noise.sample(rng)
        })
        .collect();
    Ok(FingerprintSample {
        rssi,
        label: position,
    })
}

/// `samples` fingerprints at positions drawn uniformly over public cells.
///
/// Positions and shadowing noise use separate streams, so changing `sigma`
/// keeps the positions fixed.
pub fn build_fingerprint_dataset(
    map: &GridMap,
    layout: &BeaconLayout,
    samples: usize,
    params: &Propagation,
    seed: u64,
) -> Result<Vec<FingerprintSample>> {
    if samples == 0 {
        return Err(LocalizationError::TooFewSamples {
            needed: 1,
            found: 0,
        });
    }
    let cells: Vec<Cell> = map.public_cells().collect();
    let mut pos_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);
    (0..samples)
        .map(|_| {
            let cell = cells[pos_rng.random_range(0..cells.len())];
            simulate_with_rng(layout, map, cell, params, &mut noise_rng)
        })
        .collect()
}

/// Header `b1..bN,x,y`; RSSI written as integer dBm.
pub fn write_fingerprint_csv<W: Write>(samples: &[FingerprintSample], mut w: W) -> Result<()> {
    let n = samples.first().map_or(DEFAULT_BEACONS, |s| s.rssi.len());
    let header: Vec<String> = (1..=n).map(|b| format!("b{b}")).collect();
    writeln!(w, "{},x,y", header.join(","))?;
    for s in samples {
        if s.rssi.len() != n {
            return Err(LocalizationError::ShapeMismatch {
                expected: n,
                found: s.rssi.len(),
            });
        }
        for v in &s.rssi {
            write!(w, "{},", v.round() as i64)?;
        }
        writeln!(w, "{},{}", s.label.0, s.label.1)?;
    }
    Ok(())
}

/// Read a fingerprint CSV with exactly `beacons` RSSI columns.
///
/// Two layouts are accepted: `b1..bN,x,y`, and the published
/// `location,date,<beacon>...` layout whose location codes are a column
/// letter followed by a 1-based row number (`O02` is x = 1, y = 14).
/// Empty RSSI fields read as [`MISSING_RSSI`].
pub fn read_fingerprint_csv<R: Read>(
    mut reader: R,
    beacons: usize,
) -> Result<Vec<FingerprintSample>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(LocalizationError::MalformedCsv {
        line: 1,
        reason: "missing header".into(),
    })?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    let published = fields
        .first()
        .is_some_and(|f| f.eq_ignore_ascii_case("location"));
    let width = beacons + 2;
    if fields.len() != width {
        return Err(LocalizationError::MalformedCsv {
            line: 1,
            reason: format!(
                "expected {beacons} RSSI columns plus 2 label columns, found {} columns",
                fields.len()
            ),
        });
    }
    if !published && (fields[beacons] != "x" || fields[beacons + 1] != "y") {
        return Err(LocalizationError::MalformedCsv {
            line: 1,
            reason: "last two columns must be x,y".into(),
        });
    }
    let mut out = Vec::new();
    for (n, line) in lines {
        let bad = |reason: String| LocalizationError::MalformedCsv {
            line: n + 1,
            reason,
        };
        let row: Vec<&str> = line.split(',').map(str::trim).collect();
        if row.len() != width {
            return Err(bad(format!("expected {width} fields, found {}", row.len())));
        }
        let (rssi_fields, label) = if published {
            (
                &row[2..],
                parse_location_code(row[0])
                    .ok_or_else(|| bad(format!("bad location {:?}", row[0])))?,
            )
        } else {
            let x = row[beacons]
                .parse()
                .map_err(|_| bad(format!("bad x {:?}", row[beacons])))?;
            let y = row[beacons + 1]
                .parse()
                .map_err(|_| bad(format!("bad y {:?}", row[beacons + 1])))?;
            (&row[..beacons], (x, y))
        };
        let rssi = rssi_fields
            .iter()
            .map(|f| {
                if f.is_empty() {
                    Ok(MISSING_RSSI)
                } else {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| bad(format!("bad RSSI {f:?}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(FingerprintSample { rssi, label });
    }
    Ok(out)
}

fn parse_location_code(code: &str) -> Option<Cell> {
    let mut chars = code.chars();
    let letter = chars.next()?.to_ascii_uppercase();
    if !letter.is_ascii_uppercase() {
        return None;
    }
    let row: usize = chars.as_str().parse().ok()?;
    Some((row.checked_sub(1)?, (letter as u8 - b'A') as usize))
}

/// k-NN over stored fingerprints predicting one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateModel {
    fingerprints: Vec<Vec<f64>>,
    values: Vec<usize>,
    k: usize,
}

impl CoordinateModel {
    pub fn fit(fingerprints: Vec<Vec<f64>>, values: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(LocalizationError::InvalidParameter(
                "k must be at least 1".into(),
            ));
        }
        if fingerprints.len() < k {
            return Err(LocalizationError::TooFewSamples {
                needed: k,
                found: fingerprints.len(),
            });
        }
        Ok(Self {
            fingerprints,
            values,
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Inverse-distance weighted vote among the k nearest fingerprints.
    /// Exact matches outvote everything else; ties go to the smaller value.
    pub fn predict(&self, rssi: &[f64]) -> usize {
        let mut dist: Vec<(f64, usize)> = self
            .fingerprints
            .iter()
            .zip(&self.values)
            .map(|(f, &v)| {
                let d2: f64 = f.iter().zip(rssi).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2.sqrt(), v)
            })
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let nearest = &dist[..self.k];
        let exact = nearest.iter().any(|(d, _)| *d == 0.0);
        let mut votes: BTreeMap<usize, f64> = BTreeMap::new();
        for &(d, v) in nearest {
            let w = match (exact, d == 0.0) {
                (true, true) => 1.0,
                (true, false) => continue,
                _ => 1.0 / d,
            };
            *votes.entry(v).or_default() += w;
        }
        let mut best = (0, f64::NEG_INFINITY);
        for (v, w) in votes {
            if w > best.1 {
                best = (v, w);
            }
        }
        best.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Localizer {
    pub model_x: CoordinateModel,
    pub model_y: CoordinateModel,
    beacons: usize,
}

impl Localizer {
    pub fn fit(train: &[FingerprintSample], k: usize) -> Result<Self> {
        let beacons = train.first().map_or(0, |s| s.rssi.len());
        if let Some(s) = train.iter().find(|s| s.rssi.len() != beacons) {
            return Err(LocalizationError::ShapeMismatch {
                expected: beacons,
                found: s.rssi.len(),
            });
        }
        let prints: Vec<Vec<f64>> = train.iter().map(|s| s.rssi.clone()).collect();
        let xs = train.iter().map(|s| s.label.0).collect();
        let ys = train.iter().map(|s| s.label.1).collect();
        Ok(Self {
            model_x: CoordinateModel::fit(prints.clone(), xs, k)?,
            model_y: CoordinateModel::fit(prints, ys, k)?,
            beacons,
        })
    }

    pub fn beacons(&self) -> usize {
        self.beacons
    }

    pub fn localize(&self, rssi: &[f64]) -> Result<Cell> {
        if rssi.len() != self.beacons {
            return Err(LocalizationError::ShapeMismatch {
                expected: self.beacons,
                found: rssi.len(),
            });
        }
        Ok((self.model_x.predict(rssi), self.model_y.predict(rssi)))
    }
}

pub const MIN_TRAINING_SAMPLES: usize = 10;

/// Shuffle, fit on the first `split` fraction and return the rest as a test
/// set.
pub fn train_localizer(
    dataset: &[FingerprintSample],
    split: f64,
    k: usize,
    seed: u64,
) -> Result<(Localizer, Vec<FingerprintSample>)> {
    if dataset.len() < MIN_TRAINING_SAMPLES {
        return Err(LocalizationError::TooFewSamples {
            needed: MIN_TRAINING_SAMPLES,
            found: dataset.len(),
        });
    }
    if !(split > 0.0 && split < 1.0) {
        return Err(LocalizationError::InvalidParameter(format!(
            "split must be in (0, 1), got {split}"
        )));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((dataset.len() as f64 * split).round() as usize).clamp(1, dataset.len() - 1);
    let train: Vec<FingerprintSample> = order[..n_train]
        .iter()
        .map(|&i| dataset[i].clone())
        .collect();
    let test = order[n_train..]
        .iter()
        .map(|&i| dataset[i].clone())
        .collect();
    Ok((Localizer::fit(&train, k)?, test))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCdf {
    /// Sorted per-sample errors.
    pub errors: Vec<f64>,
    /// `(error, cumulative fraction)` at each distinct error.
    pub points: Vec<(f64, f64)>,
    pub mean: f64,
}

impl ErrorCdf {
    pub fn from_errors(mut errors: Vec<f64>) -> Result<Self> {
        if errors.is_empty() {
            return Err(LocalizationError::EmptySet);
        }
        errors.sort_by(f64::total_cmp);
        let n = errors.len() as f64;
        let mut points: Vec<(f64, f64)> = Vec::new();
        for (k, &e) in errors.iter().enumerate() {
            let frac = (k + 1) as f64 / n;
            match points.last_mut() {
                Some(last) if last.0 == e => last.1 = frac,
                _ => points.push((e, frac)),
            }
        }
        let mean = errors.iter().sum::<f64>() / n;
        Ok(Self {
            errors,
            points,
            mean,
        })
    }

    pub fn median(&self) -> f64 {
        let n = self.errors.len();
        if n % 2 == 1 {
            self.errors[n / 2]
        } else {
            0.5 * (self.errors[n / 2 - 1] + self.errors[n / 2])
        }
    }

    /// Fraction of samples with error at most `e`.
    pub fn fraction_within(&self, e: f64) -> f64 {
        self.errors.partition_point(|&x| x <= e) as f64 / self.errors.len() as f64
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "error,cum_fraction")?;
        for (e, f) in &self.points {
            writeln!(w, "{e:.6},{f:.6}")?;
        }
        Ok(())
    }
}

/// Euclidean error between predicted and true cells, scaled by
/// `cell_size_m` (1.0 reads cells as meters).
pub fn distance_error_cdf(
    loc: &Localizer,
    test: &[FingerprintSample],
    cell_size_m: f64,
) -> Result<ErrorCdf> {
    let errors = test
        .iter()
        .map(|s| {
            let (x, y) = loc.localize(&s.rssi)?;
            let dx = x as f64 - s.label.0 as f64;
            let dy = y as f64 - s.label.1 as f64;
            Ok(dx.hypot(dy) * cell_size_m)
        })
        .collect::<Result<Vec<_>>>()?;
    ErrorCdf::from_errors(errors)
}
