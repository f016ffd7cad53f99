//! On-disk layout of generated data.
//!
//! A patch task is stored as `<dir>/<task>.ppm`, a mosaic with one patch per
//! tile in row-major order, plus `<dir>/<task>.csv` with `index,label,split`.
//! Mini-WSI labels go to a CSV with `image_id,target,class,latent_risk`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compression::{read_ppm, write_ppm, RgbImage};
use crate::error::{Error, Result};
use crate::models::Task;
use crate::training::{PatchSet, PatchTaskData};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WsiLabelRow {
    pub image_id: String,
    pub target: f64,
    pub class: usize,
    pub latent_risk: f64,
}

#[derive(Serialize, Deserialize)]
struct PatchRow {
    index: usize,
    label: usize,
    split: String,
}

fn mosaic_cols(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).max(1)
}

pub fn write_patch_task(dir: &Path, data: &PatchTaskData) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let p = data.train.patch_size;
    if data.val.patch_size != p {
        return Err(Error::Invalid("train and val patch sizes differ".into()));
    }
    let n = data.train.len() + data.val.len();
    let cols = mosaic_cols(n);
    let rows = n.div_ceil(cols).max(1);
    let mut img = RgbImage::new(cols * p, rows * p);
    let mut csv = csv::Writer::from_path(dir.join(format!("{}.csv", data.task)))?;
    let patches = (0..data.train.len())
        .map(|i| (&data.train, i, "train"))
        .chain((0..data.val.len()).map(|i| (&data.val, i, "val")));
    for (index, (set, i, split)) in patches.enumerate() {
        let (tr, tc) = (index / cols, index % cols);
        for (k, px) in set.patch(i).chunks_exact(3).enumerate() {
            let rgb = [0, 1, 2].map(|c| (px[c] * 255.0).round().clamp(0.0, 255.0) as u8);
            img.set_pixel(tc * p + k % p, tr * p + k / p, rgb);
        }
        csv.serialize(PatchRow {
            index,
            label: set.labels[i],
            split: split.into(),
        })?;
    }
    csv.flush()?;
    write_ppm(BufWriter::new(File::create(dir.join(format!("{}.ppm", data.task)))?), &img)
}

pub fn read_patch_task(dir: &Path, task: Task, patch_size: usize) -> Result<PatchTaskData> {
    let img = read_ppm(BufReader::new(File::open(dir.join(format!("{task}.ppm")))?))?;
    let p = patch_size;
    if p == 0 || img.width % p != 0 || img.height % p != 0 {
        return Err(Error::Data(format!("{task} mosaic is not a whole number of {p}px tiles")));
    }
    let cols = img.width / p;
    let mut train = PatchSet::new(p);
    let mut val = PatchSet::new(p);
    let mut reader = csv::Reader::from_path(dir.join(format!("{task}.csv")))?;
    let mut pixels = vec![0.0; p * p * 3];
    for row in reader.deserialize() {
        let row: PatchRow = row?;
        let (tr, tc) = (row.index / cols, row.index % cols);
        if (tr + 1) * p > img.height {
            return Err(Error::Data(format!("{task} patch {} is outside the mosaic", row.index)));
        }
        if row.label >= task.classes() {
            return Err(Error::Data(format!("{task} label {} out of range", row.label)));
        }
        for (k, px) in pixels.chunks_exact_mut(3).enumerate() {
            let rgb = img.pixel(tc * p + k % p, tr * p + k / p);
            for c in 0..3 {
                px[c] = f64::from(rgb[c]) / 255.0;
            }
        }
        match row.split.as_str() {
            "train" => train.push(&pixels, row.label)?,
            "val" => val.push(&pixels, row.label)?,
            s => return Err(Error::Data(format!("unknown split {s:?}"))),
        }
    }
    Ok(PatchTaskData { task, train, val })
}

pub fn write_wsi_labels<W: Write>(w: W, rows: &[WsiLabelRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_wsi_labels<R: Read>(r: R) -> Result<Vec<WsiLabelRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}
