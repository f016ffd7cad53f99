use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use nic_autodiff::ParamStore;
use nic_core::compression::{checkpoint_digest, compress, read_nicw, read_ppm, write_nicw, PpmReader, RgbImage};
use nic_core::config::{PredictionSet, RunConfig};
use nic_core::metrics::{read_ablation_csv, task_inclusion_correlation, write_ablation_csv};
use nic_core::models::{EncoderSpec, Objective, Task};
use nic_core::pipeline::io::{
    file_id, list_files, load_patch_tasks, lookup, read_cohort, read_labels, read_predictions, write_predictions,
    write_synthetic,
};
use nic_core::pipeline::{
    self, ablation_subsets, cross_validate, evaluate_classification, evaluate_regression, evaluate_survival,
    run_ablation, AblationSetup, Report,
};
use nic_core::training::Targets;
use nic_core::{Error, Result};

fn create(path: PathBuf) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Sidecar holding the hex digest of a checkpoint.
fn digest_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("sha256")
}

pub fn gen_data(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.prepare_run_dir("gen-data")?;
    let data = pipeline::generate(cfg.seed, &cfg.data)?;
    write_synthetic(&dir, &data)?;
    eprintln!(
        "generated {} patch tasks and {} images",
        data.patch_tasks.len(),
        data.wsis.len()
    );
    Ok(dir)
}

pub fn train_encoder(cfg: &RunConfig) -> Result<PathBuf> {
    let patches = cfg.require_path("patches")?;
    let tasks = cfg.task_list()?;
    let dir = cfg.prepare_run_dir("train-encoder")?;
    let datasets = load_patch_tasks(patches, &tasks, cfg.encoder.patch_size)?;
    let (params, history) = pipeline::train_encoder(&cfg.encoder, &cfg.multitask, &datasets, &tasks, cfg.seed)?;
    let ckpt = dir.join("encoder.nicp");
    params.save(&ckpt)?;
    std::fs::write(digest_path(&ckpt), hex::encode(checkpoint_digest(&params)))?;
    history.write_csv(create(dir.join("history.csv"))?)?;
    if let Some(last) = history.last() {
        eprintln!("epoch {}: mean validation accuracy {:.4}", last.epoch, last.metrics.last().unwrap_or(&f64::NAN));
    }
    Ok(dir)
}

pub fn compress_images(cfg: &RunConfig) -> Result<PathBuf> {
    let ckpt = cfg.require_path("checkpoint")?;
    let images = cfg.require_path("images")?;
    let dir = cfg.prepare_run_dir("compress")?;
    let params = ParamStore::load(ckpt)?;
    let encoder = EncoderSpec::infer_from(&params, cfg.encoder.patch_size, cfg.encoder.leaky_alpha, cfg.encoder.bn())?;
    let digest = hex::encode(checkpoint_digest(&params));
    let warning = match std::fs::read_to_string(digest_path(ckpt)) {
        Ok(expected) if expected.trim() != digest => {
            eprintln!("warning: checkpoint digest {digest} does not match the recorded {}", expected.trim());
            format!("checkpoint digest mismatch (recorded {})", expected.trim())
        }
        _ => String::new(),
    };
    let mut manifest = csv::Writer::from_writer(create(dir.join("manifest.csv"))?);
    manifest.write_record([
        "image_id", "rows", "cols", "code_size", "patch_size", "stride", "valid_cells", "encoder_digest", "warning",
    ])?;
    let files = list_files(images, "ppm")?;
    for path in &files {
        let id = file_id(path);
        let mut reader = PpmReader::new(BufReader::new(File::open(path)?))?;
        let ci = compress(&mut reader, &id, &encoder, &params, &cfg.compression)?;
        write_nicw(&ci, dir.join(format!("{id}.nicw")))?;
        manifest.write_record([
            id,
            ci.rows.to_string(),
            ci.cols.to_string(),
            ci.code_size.to_string(),
            ci.patch_size.to_string(),
            ci.stride.to_string(),
            ci.valid_cells().to_string(),
            digest.clone(),
            warning.clone(),
        ])?;
    }
    manifest.flush()?;
    eprintln!("compressed {} images", files.len());
    Ok(dir)
}

/// Image-level targets for `ids` under the configured objective.
fn targets_for(cfg: &RunConfig, ids: &[String]) -> Result<Targets> {
    Ok(match cfg.wsi.objective {
        Objective::Cox => {
            let path = cfg
                .require_path("cohort")
                .map_err(|_| Error::Config("objective cox requires paths.cohort (a cohort CSV)".into()))?;
            let cohort = read_cohort(path)?;
            Targets::Survival(lookup(&cohort, ids, "cohort record")?.into_iter().copied().collect())
        }
        obj => {
            let labels = read_labels(cfg.require_path("labels")?)?;
            let rows = lookup(&labels, ids, "label")?;
            if obj == Objective::Mse {
                Targets::Regression(rows.iter().map(|r| r.target).collect())
            } else {
                Targets::Classes(rows.iter().map(|r| r.class).collect())
            }
        }
    })
}

pub fn train_wsi(cfg: &RunConfig) -> Result<PathBuf> {
    let compressed = cfg.require_path("compressed")?;
    let files = list_files(compressed, "nicw")?;
    if files.is_empty() {
        return Err(Error::Data(format!("no .nicw files in {}", compressed.display())));
    }
    let ids: Vec<String> = files.iter().map(|p| file_id(p)).collect();
    let targets = targets_for(cfg, &ids)?;
    let dir = cfg.prepare_run_dir("train-wsi")?;
    let grids = files
        .iter()
        .map(|p| read_nicw(p)?.to_grid())
        .collect::<Result<Vec<_>>>()?;
    if let Some(g) = grids.iter().find(|g| g.code_size != cfg.wsi.code_size) {
        return Err(Error::Data(format!(
            "grids have code size {} but wsi.code_size is {}",
            g.code_size, cfg.wsi.code_size
        )));
    }
    let out = cross_validate(&cfg.wsi, &cfg.image_training, &cfg.cv, &grids, &targets, cfg.seed)?;
    write_predictions(create(dir.join("predictions.csv"))?, &out.rows(&ids, &targets))?;
    let mut folds = csv::Writer::from_writer(create(dir.join("folds.csv"))?);
    folds.write_record(["sample_id", "fold"])?;
    for (&i, &f) in out.samples.iter().zip(&out.plan.assignment) {
        folds.write_record([ids[i].as_str(), &f.to_string()])?;
    }
    folds.flush()?;
    for (r, m) in out.models.iter().enumerate() {
        m.params.save(dir.join(format!("fold{r}.nicp")))?;
        m.history.write_csv(create(dir.join(format!("fold{r}_history.csv")))?)?;
    }
    eprintln!("trained {} fold models on {} images", out.models.len(), out.samples.len());
    Ok(dir)
}

fn print_report(report: &Report) {
    for (name, v) in &report.entries {
        println!("{name}\t{v}");
    }
}

pub fn evaluate(cfg: &RunConfig) -> Result<PathBuf> {
    if cfg.paths.ablation.is_some() {
        let path = cfg.require_path("ablation")?;
        let dir = cfg.prepare_run_dir("evaluate")?;
        let rows = read_ablation_csv(BufReader::new(File::open(path)?))?;
        let rho = task_inclusion_correlation(&rows)?;
        let mut report = Report::default();
        for t in Task::ALL {
            report.push(t.name(), rho[t.index()]);
        }
        report.write_csv(create(dir.join("report.csv"))?)?;
        print_report(&report);
        return Ok(dir);
    }
    let path = cfg.require_path("predictions")?;
    let rows: Vec<_> = read_predictions(BufReader::new(File::open(path)?))?
        .into_iter()
        .filter(|r| match cfg.evaluate.set {
            PredictionSet::OutOfFold => r.fold.is_some(),
            PredictionSet::Ensemble => r.model == "ensemble",
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::Data("no predictions of the selected set".into()));
    }
    let pred: Vec<f64> = rows.iter().map(|r| r.prediction).collect();
    let dir;
    let report = match cfg.wsi.objective {
        Objective::Mse => {
            dir = cfg.prepare_run_dir("evaluate")?;
            let target: Vec<f64> = rows.iter().map(|r| r.label).collect();
            evaluate_regression(&pred, &target, &cfg.evaluate, cfg.seed)?
        }
        Objective::Ce => {
            dir = cfg.prepare_run_dir("evaluate")?;
            let classes: Vec<usize> = rows.iter().map(|r| r.label as usize).collect();
            evaluate_classification(&pred, &classes)?
        }
        Objective::Cox => {
            let cohort = read_cohort(
                cfg.require_path("cohort")
                    .map_err(|_| Error::Config("survival evaluation requires paths.cohort".into()))?,
            )?;
            dir = cfg.prepare_run_dir("evaluate")?;
            let ids: Vec<String> = rows.iter().map(|r| r.sample_id.clone()).collect();
            let records: Vec<_> = lookup(&cohort, &ids, "cohort record")?.into_iter().copied().collect();
            let ev = evaluate_survival(&pred, &records)?;
            ev.low.write_csv(create(dir.join("km_low.csv"))?)?;
            ev.high.write_csv(create(dir.join("km_high.csv"))?)?;
            ev.report
        }
    };
    report.write_csv(create(dir.join("report.csv"))?)?;
    print_report(&report);
    Ok(dir)
}

pub fn ablate(cfg: &RunConfig) -> Result<PathBuf> {
    let patches = cfg.require_path("patches")?;
    let images = cfg.require_path("images")?;
    let labels = read_labels(cfg.require_path("labels")?)?;
    let dir = cfg.prepare_run_dir("ablate")?;
    let datasets = load_patch_tasks(patches, &Task::ALL, cfg.encoder.patch_size)?;
    let files = list_files(images, "ppm")?;
    let ids: Vec<String> = files.iter().map(|p| file_id(p)).collect();
    let targets: Vec<f64> = lookup(&labels, &ids, "label")?.iter().map(|r| r.target).collect();
    let pixels = files
        .iter()
        .map(|p| read_ppm(BufReader::new(File::open(p)?)))
        .collect::<Result<Vec<RgbImage>>>()?;
    let images: Vec<(String, &RgbImage)> = ids.iter().cloned().zip(&pixels).collect();
    let mut wsi = cfg.wsi.clone();
    wsi.objective = Objective::Mse;
    let setup = AblationSetup {
        encoder: &cfg.encoder,
        multitask: &cfg.multitask,
        compression: &cfg.compression,
        wsi: &wsi,
        image_training: &cfg.image_training,
        cv: &cfg.cv,
        datasets: &datasets,
        images: &images,
        targets: &targets,
    };
    let jobs = ablation_subsets(cfg.seed, cfg.ablation.repeat_full, cfg.ablation.extremes_only);
    let rows = run_ablation(&setup, &jobs, cfg.seed)?;
    write_ablation_csv(create(dir.join("ablation.csv"))?, &rows)?;
    match task_inclusion_correlation(&rows) {
        Ok(rho) => {
            let mut report = Report::default();
            for t in Task::ALL {
                report.push(t.name(), rho[t.index()]);
            }
            report.write_csv(create(dir.join("task_inclusion.csv"))?)?;
            print_report(&report);
        }
        Err(e) => eprintln!("warning: task-inclusion correlation unavailable: {e}"),
    }
    Ok(dir)
}
