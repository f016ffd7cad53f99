//! Files read and written by the pipeline commands.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::cv::PredictionRow;
use super::SyntheticData;
use crate::compression::write_ppm;
use crate::error::{Error, Result};
use crate::models::Task;
use crate::survival::{read_cohort_csv, write_cohort_csv, CohortRow, SurvivalRecord};
use crate::synthdata::{read_patch_task, read_wsi_labels, write_patch_task, write_wsi_labels, WsiLabelRow};
use crate::training::PatchTaskData;

/// Files in `dir` with extension `ext`, sorted by name.
pub fn list_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == ext))
        .collect();
    files.sort();
    Ok(files)
}

pub fn file_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn write_predictions<W: Write>(w: W, rows: &[PredictionRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_predictions<R: Read>(r: R) -> Result<Vec<PredictionRow>> {
    csv::Reader::from_reader(r).deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Patch datasets for `tasks` from a directory written by `gen-data`.
pub fn load_patch_tasks(dir: &Path, tasks: &[Task], patch_size: usize) -> Result<Vec<PatchTaskData>> {
    tasks.iter().map(|&t| read_patch_task(dir, t, patch_size)).collect()
}

pub fn read_labels(path: &Path) -> Result<HashMap<String, WsiLabelRow>> {
    let rows = read_wsi_labels(BufReader::new(File::open(path)?))?;
    Ok(rows.into_iter().map(|r| (r.image_id.clone(), r)).collect())
}

pub fn read_cohort(path: &Path) -> Result<HashMap<String, SurvivalRecord>> {
    let rows = read_cohort_csv(BufReader::new(File::open(path)?))?;
    Ok(rows.into_iter().map(|r| (r.subject_id, r.record)).collect())
}

/// Looks up every id, failing on the first one without an entry.
pub fn lookup<'a, T>(map: &'a HashMap<String, T>, ids: &[String], what: &str) -> Result<Vec<&'a T>> {
    ids.iter()
        .map(|id| map.get(id).ok_or_else(|| Error::Data(format!("no {what} for image {id}"))))
        .collect()
}

/// Writes `patches/`, `wsi/*.ppm`, `wsi/labels.csv` and `wsi/cohort.csv`.
pub fn write_synthetic(dir: &Path, data: &SyntheticData) -> Result<()> {
    let patches = dir.join("patches");
    for task in &data.patch_tasks {
        write_patch_task(&patches, task)?;
    }
    let wsi_dir = dir.join("wsi");
    std::fs::create_dir_all(&wsi_dir)?;
    let mut labels = Vec::with_capacity(data.wsis.len());
    let mut cohort = Vec::with_capacity(data.wsis.len());
    for (w, rec) in data.wsis.iter().zip(&data.survival) {
        write_ppm(BufWriter::new(File::create(wsi_dir.join(format!("{}.ppm", w.id)))?), &w.image)?;
        labels.push(WsiLabelRow {
            image_id: w.id.clone(),
            target: w.label.target,
            class: w.label.class,
            latent_risk: w.label.latent_risk,
        });
        cohort.push(CohortRow {
            subject_id: w.id.clone(),
            record: *rec,
            risk: None,
        });
    }
    write_wsi_labels(BufWriter::new(File::create(wsi_dir.join("labels.csv"))?), &labels)?;
    write_cohort_csv(BufWriter::new(File::create(wsi_dir.join("cohort.csv"))?), &cohort)
}
