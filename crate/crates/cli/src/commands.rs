//! Subcommand implementations. Each reads its inputs from the run directory
//! and writes its artifacts there.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use pathgan::classifier::{train_classifier as fit_classifier, ClassifierConfig, PathClassifier};
use pathgan::gan::{GanArchitecture, GanModel, GanTrainConfig, GanTrainer, LrSchedule};
use pathgan::gridworld::{
    build_dataset, load_map, read_path_frame, render, GridMap, PathClassTable, PathDataset,
};
use pathgan::localization::{
    build_fingerprint_dataset, distance_error_cdf, read_fingerprint_csv,
    train_localizer as fit_localizer, write_fingerprint_csv, BeaconLayout, ErrorCdf, Propagation,
};
use pathgan::neuralcore::{AdamConfig, Checkpoint};
use pathgan::planner::{plan_path, PathRequest, PlanResult};
use pathgan::Real;

use crate::config::{Precision, RunConfig};
use crate::eval;
use crate::CliError;

/// Run `$body` with `$t` bound to the configured scalar type.
macro_rules! with_precision {
    ($cfg:expr, $t:ident => $body:expr) => {
        match $cfg.precision {
            Precision::F32 => {
                type $t = f32;
                $body
            }
            Precision::F64 => {
                type $t = f64;
                $body
            }
        }
    };
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Read an input file; a missing file is a configuration error naming it.
pub fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::Config(format!(
            "{} does not exist (run the producing command first)",
            path.display()
        )),
        _ => CliError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })
}

pub fn write_output(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn load_map_config(cfg: &RunConfig) -> Result<GridMap, CliError> {
    match &cfg.map {
        Some(p) => Ok(load_map(&read_input(p)?[..])?),
        None => Ok(GridMap::library()),
    }
}

pub fn load_classes(cfg: &RunConfig, map: &GridMap) -> Result<PathClassTable, CliError> {
    let table = match &cfg.classes {
        Some(p) => PathClassTable::read_csv(&read_input(p)?[..])?,
        None => PathClassTable::library(),
    };
    table.check_against(map)?;
    Ok(table)
}

/// Beacon file: one `i,j` cell per line, optional `i,j` header.
pub fn load_beacons(cfg: &RunConfig, map: &GridMap) -> Result<BeaconLayout, CliError> {
    let Some(p) = &cfg.beacons else {
        if map == &GridMap::library() {
            return Ok(BeaconLayout::library());
        }
        return Err(CliError::Config(
            "a custom map needs a beacons file (one i,j cell per line)".into(),
        ));
    };
    let text = String::from_utf8_lossy(&read_input(p)?).into_owned();
    let mut cells = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.starts_with(|c: char| c.is_alphabetic())) {
            continue;
        }
        cells.push(
            crate::parse_cell(line)
                .map_err(|e| CliError::Config(format!("{} line {}: {e}", p.display(), n + 1)))?,
        );
    }
    Ok(BeaconLayout::at_cells(&cells, map)?)
}

pub fn propagation(cfg: &RunConfig) -> Propagation {
    Propagation {
        p0_dbm: cfg.p0_dbm,
        exponent: cfg.path_loss_exponent,
        sigma_db: cfg.sigma_db,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub dir: PathBuf,
    pub path_files: usize,
    pub fingerprints: usize,
}

/// Path frames, labels manifest and fingerprints under `data/`.
pub fn synth_data(cfg: &RunConfig) -> Result<SynthSummary, CliError> {
    let seed = cfg.require_seed()?;
    let map = load_map_config(cfg)?;
    let table = load_classes(cfg, &map)?;
    let dataset = build_dataset(&map, &table, cfg.samples_per_class, seed, cfg.detour_rate)?;
    let dir = cfg.data_dir()?;
    let paths = dir.join("paths");
    if paths.exists() {
        fs::remove_dir_all(&paths).map_err(io_err(&paths))?;
    }
    let mut manifest = String::from("file,class\n");
    let mut counters = vec![0usize; table.len()];
    for (frame, &label) in dataset.frames().iter().zip(dataset.labels()) {
        let name = format!("class{label}_{}.csv", counters[label]);
        counters[label] += 1;
        write_output(&paths.join(&name), frame.to_csv_string().as_bytes())?;
        manifest.push_str(&format!("paths/{name},{label}\n"));
    }
    write_output(&dir.join("labels.csv"), manifest.as_bytes())?;
    let mut buf = Vec::new();
    map.write_csv(&mut buf)?;
    write_output(&dir.join("map.csv"), &buf)?;
    buf.clear();
    table.write_csv(&mut buf)?;
    write_output(&dir.join("classes.csv"), &buf)?;

    let layout = load_beacons(cfg, &map)?;
    let prints = build_fingerprint_dataset(
        &map,
        &layout,
        cfg.fingerprint_samples,
        &propagation(cfg),
        seed,
    )?;
    buf.clear();
    write_fingerprint_csv(&prints, &mut buf)?;
    write_output(&dir.join("fingerprints.csv"), &buf)?;
    Ok(SynthSummary {
        dir,
        path_files: dataset.len(),
        fingerprints: prints.len(),
    })
}

/// Read the frames listed in `labels.csv` below `dir`.
pub fn load_path_dataset(
    dir: &Path,
    table: &PathClassTable,
    map: &GridMap,
) -> Result<PathDataset, CliError> {
    let manifest_path = dir.join("labels.csv");
    let text = String::from_utf8_lossy(&read_input(&manifest_path)?).into_owned();
    let mut frames = Vec::new();
    let mut labels = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || {
            CliError::Domain(format!(
                "{} line {}: expected file,class",
                manifest_path.display(),
                n + 1
            ))
        };
        let (file, class) = line.split_once(',').ok_or_else(bad)?;
        let class: usize = class.trim().parse().map_err(|_| bad())?;
        let frame_path = dir.join(file.trim());
        frames.push(read_path_frame(&read_input(&frame_path)?[..], map.shape())?);
        labels.push(class);
    }
    if frames.is_empty() {
        return Err(CliError::Domain(format!(
            "{} lists no frames",
            manifest_path.display()
        )));
    }
    Ok(PathDataset::new(frames, labels, table.clone())?)
}

fn session(cfg: &RunConfig) -> Result<(GridMap, PathClassTable, PathDataset), CliError> {
    let map = load_map_config(cfg)?;
    let table = load_classes(cfg, &map)?;
    let data = load_path_dataset(&cfg.data_dir()?, &table, &map)?;
    Ok((map, table, data))
}

pub fn gan_architecture(cfg: &RunConfig) -> GanArchitecture {
    GanArchitecture {
        generator_activation: cfg.generator_activation,
        discriminator_activation: cfg.discriminator_activation,
        discriminator_pack: cfg.discriminator_pack,
        ..GanArchitecture::default()
    }
}

pub fn gan_train_config(cfg: &RunConfig, seed: u64) -> GanTrainConfig {
    GanTrainConfig {
        epochs: cfg.gan_epochs,
        batch_size: cfg.gan_batch_size,
        seed,
        objective: cfg.objective,
        epoch_mode: cfg.epoch_mode,
        generator_adam: AdamConfig::default().with_learning_rate(cfg.gan_lr),
        discriminator_adam: AdamConfig::default().with_learning_rate(cfg.disc_lr),
        real_label: cfg.real_label,
        lr_schedule: match cfg.lr_decay_from {
            None => LrSchedule::Constant,
            Some(from_epoch) => LrSchedule::Linear {
                from_epoch,
                final_scale: cfg.lr_final_scale,
            },
        },
        generator_ema: cfg.generator_ema,
    }
}

pub fn classifier_config(cfg: &RunConfig, seed: u64) -> ClassifierConfig {
    let base = ClassifierConfig::default();
    ClassifierConfig {
        batch_size: cfg.classifier_batch_size,
        epochs: cfg.classifier_epochs,
        split: cfg.split,
        seed,
        adam: base.adam.with_learning_rate(cfg.classifier_lr),
        ..base
    }
}

fn write_checkpoint<T: Real>(path: &Path, ck: &Checkpoint<T>) -> Result<(), CliError> {
    write_output(path, &ck.to_bytes())
}

fn read_checkpoint<T: Real>(path: &Path) -> Result<Checkpoint<T>, CliError> {
    Ok(Checkpoint::from_bytes(&read_input(path)?)?)
}

/// Train the GAN; writes `models/gan.ck` and `models/gan_log.csv`.
pub fn train_gan(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let seed = cfg.require_seed()?;
    let (map, _, data) = session(cfg)?;
    let dir = cfg.models_dir()?;
    let ck_path = dir.join("gan.ck");
    with_precision!(cfg, T => {
        let model = GanModel::<T>::with_architecture(map.rows(), map.cols(), &gan_architecture(cfg), seed)?;
        let tcfg = gan_train_config(cfg, seed);
        let mut trainer = GanTrainer::new(model, tcfg)?;
        trainer.train_epochs(&data, cfg.gan_epochs)?;
        write_checkpoint(&ck_path, &trainer.checkpoint())?;
        write_output(&dir.join("gan_log.csv"), trainer.model().log_csv().as_bytes())?;
    });
    Ok(ck_path)
}

/// Train the classifier; returns its test error.
pub fn train_classifier(cfg: &RunConfig) -> Result<f64, CliError> {
    let seed = cfg.require_seed()?;
    let (_, _, data) = session(cfg)?;
    let dir = cfg.models_dir()?;
    let ccfg = classifier_config(cfg, seed);
    with_precision!(cfg, T => {
        let (clf, split) = fit_classifier::<T>(&data, &ccfg)?;
        let err = clf.error_rate_on(&data, &split.test)?;
        write_checkpoint(&dir.join("classifier.ck"), &clf.to_checkpoint())?;
        let mut log = String::from("epoch,loss\n");
        for (e, l) in clf.epoch_losses.iter().enumerate() {
            log.push_str(&format!("{},{l:.8}\n", e + 1));
        }
        write_output(&dir.join("classifier_log.csv"), log.as_bytes())?;
        let eval = format!(
            "batch_size,train_samples,test_samples,test_error\n{},{},{},{err:.6}\n",
            ccfg.batch_size,
            split.train.len(),
            split.test.len()
        );
        write_output(&dir.join("classifier_eval.csv"), eval.as_bytes())?;
        Ok(err)
    })
}

/// Fit the localizer on the synthesized fingerprints; writes the split and
/// its held-out error summary.
pub fn train_localizer(cfg: &RunConfig) -> Result<ErrorCdf, CliError> {
    let seed = cfg.require_seed()?;
    let path = cfg.data_dir()?.join("fingerprints.csv");
    let layout_len = load_beacons(cfg, &load_map_config(cfg)?)?.len();
    let data = read_fingerprint_csv(&read_input(&path)?[..], layout_len)?;
    let (loc, test) = fit_localizer(&data, cfg.split, cfg.k, seed)?;
    let cdf = distance_error_cdf(&loc, &test, cfg.cell_size_m)?;
    let dir = cfg.models_dir()?;
    let mut buf = Vec::new();
    write_fingerprint_csv(&test, &mut buf)?;
    write_output(&dir.join("localizer_test.csv"), &buf)?;
    let summary = format!(
        "k,train_samples,test_samples,mean_error,median_error\n{},{},{},{:.6},{:.6}\n",
        cfg.k,
        data.len() - test.len(),
        test.len(),
        cdf.mean,
        cdf.median()
    );
    write_output(&dir.join("localizer_eval.csv"), summary.as_bytes())?;
    Ok(cdf)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub result: PlanResult,
    pub frame_path: PathBuf,
    pub render: String,
}

fn load_models<T: Real>(cfg: &RunConfig) -> Result<(GanModel<T>, PathClassifier<T>), CliError> {
    let dir = cfg.models_dir()?;
    let gan = GanModel::from_checkpoint(&read_checkpoint::<T>(&dir.join("gan.ck"))?)?;
    let clf = PathClassifier::from_checkpoint(&read_checkpoint::<T>(&dir.join("classifier.ck"))?)?;
    Ok((gan, clf))
}

/// Plan one path; writes `plans/class<k>_req<r>.{csv,meta.csv,waypoints.csv}`.
pub fn plan(
    cfg: &RunConfig,
    class: Option<usize>,
    endpoints: Option<((usize, usize), (usize, usize))>,
    denoise: bool,
    request_seed: Option<u64>,
) -> Result<PlanOutcome, CliError> {
    let seed = cfg.require_seed()?;
    let map = load_map_config(cfg)?;
    let table = load_classes(cfg, &map)?;
    let request = PathRequest {
        class_id: class,
        endpoints,
        max_attempts: cfg.max_attempts,
        denoise,
        validate: cfg.validate_plans,
    };
    let spec = request.resolve(&table)?;
    let req_seed = request_seed.unwrap_or(seed);
    let result = with_precision!(cfg, T => {
        let (gan, clf) = load_models::<T>(cfg)?;
        if clf.class_table() != &table {
            return Err(CliError::Domain("classifier was trained on a different class table".into()));
        }
        plan_path(&gan, &clf, &map, &request, req_seed)?
    });
    let dir = cfg.run_dir()?.join("plans");
    let stem = format!("class{}_req{req_seed}", spec.id);
    let frame_path = dir.join(format!("{stem}.csv"));
    write_output(&frame_path, result.frame.to_csv_string().as_bytes())?;
    write_output(
        &dir.join(format!("{stem}.meta.csv")),
        result.metadata_csv().as_bytes(),
    )?;
    if let Some(w) = result.waypoints_csv() {
        write_output(&dir.join(format!("{stem}.waypoints.csv")), w.as_bytes())?;
    }
    let render = render(
        &map,
        Some(&result.frame),
        Some((spec.source, spec.destination)),
    );
    Ok(PlanOutcome {
        result,
        frame_path,
        render,
    })
}

fn eval_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    Ok(cfg.run_dir()?.join("eval"))
}

fn eval_seeds(cfg: &RunConfig) -> Result<Vec<u64>, CliError> {
    let seed = cfg.require_seed()?;
    Ok((0..cfg.eval_seeds as u64).map(|k| seed + k).collect())
}

pub fn eval_deviation(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let (map, _, data) = session(cfg)?;
    let mut rows = Vec::new();
    for s in eval_seeds(cfg)? {
        let tcfg = gan_train_config(cfg, s);
        with_precision!(cfg, T => {
            let (r, _) = eval::deviation_curve::<T>(
                &map,
                &data,
                &gan_architecture(cfg),
                &tcfg,
                &cfg.epoch_checkpoints,
                cfg.eval_samples,
            )?;
            rows.extend(r);
        });
    }
    let path = eval_dir(cfg)?.join("deviation_vs_epochs.csv");
    write_output(&path, eval::deviation_csv(&rows).as_bytes())?;
    Ok(vec![path])
}

pub fn eval_batch_size(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let (_, _, data) = session(cfg)?;
    let seeds = eval_seeds(cfg)?;
    let base = classifier_config(cfg, seeds[0]);
    let rows = eval::batch_size_study(&data, &base, &cfg.batch_sizes, &seeds)?;
    let dir = eval_dir(cfg)?;
    let detail = dir.join("error_vs_batchsize.csv");
    let summary = dir.join("error_vs_batchsize_summary.csv");
    write_output(&detail, eval::batch_size_csv(&rows).as_bytes())?;
    write_output(
        &summary,
        eval::batch_summary_csv(&eval::mean_error_by_batch(&rows)).as_bytes(),
    )?;
    Ok(vec![detail, summary])
}

pub fn eval_localization(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let seed = cfg.require_seed()?;
    let map = load_map_config(cfg)?;
    let layout = load_beacons(cfg, &map)?;
    let setup = eval::LocalizationSetup {
        samples: cfg.fingerprint_samples,
        propagation: propagation(cfg),
        split: cfg.split,
        k: cfg.k,
        cell_size_m: cfg.cell_size_m,
        seed,
    };
    let cdf = eval::localization_run(&map, &layout, &setup)?;
    let sweep = eval::sigma_sweep(&map, &layout, &setup, &cfg.sigmas)?;
    let dir = eval_dir(cfg)?;
    let cdf_path = dir.join("localization_cdf.csv");
    let mut buf = Vec::new();
    cdf.write_csv(&mut buf)?;
    write_output(&cdf_path, &buf)?;
    let summary_path = dir.join("localization_summary.csv");
    let mut s = format!(
        "metric,value\nmean_error,{:.6}\nmedian_error,{:.6}\nexact_fraction,{:.6}\nwithin_2_fraction,{:.6}\n",
        cdf.mean,
        cdf.median(),
        cdf.fraction_within(0.0),
        cdf.fraction_within(2.0 * cfg.cell_size_m)
    );
    for (sigma, mean) in &sweep {
        s.push_str(&format!("mean_error_sigma_{sigma},{mean:.6}\n"));
    }
    write_output(&summary_path, s.as_bytes())?;
    Ok(vec![cdf_path, summary_path])
}

pub fn eval_timing(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let seed = cfg.require_seed()?;
    let report = with_precision!(cfg, T => {
        let (gan, clf) = load_models::<T>(cfg)?;
        eval::timing_study(&gan, &clf, cfg.timing_calls, seed).map_err(|e| CliError::Domain(e.to_string()))?
    });
    let path = eval_dir(cfg)?.join("timing.csv");
    write_output(&path, report.csv().as_bytes())?;
    Ok(vec![path])
}

/// ASCII view of the map with an optional frame and class endpoints.
pub fn render_frame(
    cfg: &RunConfig,
    frame: Option<&Path>,
    class: Option<usize>,
) -> Result<String, CliError> {
    let map = load_map_config(cfg)?;
    let endpoints = match class {
        Some(k) => {
            let table = load_classes(cfg, &map)?;
            let spec = PathRequest::for_class(k).resolve(&table)?;
            Some((spec.source, spec.destination))
        }
        None => None,
    };
    let frame = match frame {
        Some(p) => Some(read_path_frame(&read_input(p)?[..], map.shape())?),
        None => None,
    };
    Ok(render(&map, frame.as_ref(), endpoints))
}

/// Append `frame,class,rater,score` to `ratings.csv` in the output root.
pub fn record_rating(
    cfg: &RunConfig,
    frame: &Path,
    class: Option<usize>,
    rater: &str,
    score: u8,
) -> Result<PathBuf, CliError> {
    if rater.contains(',') || rater.contains('\n') {
        return Err(CliError::Usage(
            "rater name may not contain commas or newlines".into(),
        ));
    }
    let path = cfg.out.join("ratings.csv");
    fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    let fresh = !path.exists();
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(io_err(&path))?;
    let mut line = String::new();
    if fresh {
        line.push_str("frame,class,rater,score\n");
    }
    let class = class.map(|c| c.to_string()).unwrap_or_default();
    line.push_str(&format!("{},{class},{rater},{score}\n", frame.display()));
    f.write_all(line.as_bytes()).map_err(io_err(&path))?;
    Ok(path)
}
