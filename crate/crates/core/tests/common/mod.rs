//! Independent oracles and scaled-down experiment scenarios shared by the
//! integration tests and the acceptance target.
#![allow(dead_code)]

use nic_autodiff::{Mode, ParamStore, Tensor, Var};
use nic_core::compression::{plan_grid, CompressOptions, RgbImage};
use nic_core::config::{CvConfig, DataConfig};
use nic_core::metrics::{spearman, FoldPattern};
use nic_core::models::{is_buffer, EncoderSpec, Graph, HeadConfig, Objective, Task, WsiCnnSpec};
use nic_core::pipeline::{
    self, ablation_subsets, compress_all, cross_validate, evaluate_survival, run_ablation, to_grids, AblationSetup,
};
use nic_core::rng::{self, Prng};
use nic_core::survival::SurvivalRecord;
use nic_core::synthdata::WsiGenConfig;
use nic_core::training::{ImageTrainConfig, MultitaskConfig, Targets};

/// Largest relative error between the tape gradient of `loss` and central
/// differences over every trainable parameter element, with the relative
/// error's denominator floored at 1e-3. The graph runs in training mode; any
/// dropout mask is redrawn from the same seed on every evaluation.
pub fn network_gradcheck(params: &ParamStore, loss: impl Fn(&mut Graph) -> nic_core::Result<Var>) -> (f64, usize) {
    let eval = |p: &ParamStore| -> f64 {
        let mut r = rng::stream(99, 0);
        let mut g = Graph::new(p, Mode::Train).with_rng(&mut r);
        let l = loss(&mut g).unwrap();
        g.value(l).item().unwrap()
    };
    let mut r = rng::stream(99, 0);
    let mut g = Graph::new(params, Mode::Train).with_rng(&mut r);
    let l = loss(&mut g).unwrap();
    g.backward(l).unwrap();
    let grads = g.grads();
    drop(g);

    let eps = 1e-5;
    let (mut worst, mut checked) = (0.0f64, 0);
    for (name, analytic) in &grads {
        assert!(!is_buffer(name), "{name} is a buffer but received a gradient");
        for k in 0..analytic.len() {
            let mut p = params.clone();
            p.get_mut(name).unwrap().data_mut()[k] += eps;
            let up = eval(&p);
            p.get_mut(name).unwrap().data_mut()[k] -= 2.0 * eps;
            let down = eval(&p);
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.data()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    (worst, checked)
}

pub fn random_tensor(shape: &[usize], rng: &mut Prng) -> Tensor {
    use rand::Rng;
    Tensor::from_fn(shape, |_| rng.random_range(0.0..1.0))
}

/// Negative Cox partial log-likelihood straight from its definition.
pub fn cox_oracle(risks: &[f64], records: &[SurvivalRecord]) -> f64 {
    let mut loss = 0.0;
    for (i, ri) in records.iter().enumerate() {
        if !ri.event {
            continue;
        }
        let denom: f64 = records
            .iter()
            .zip(risks)
            .filter(|(rj, _)| rj.follow_up >= ri.follow_up)
            .map(|(_, f)| f.exp())
            .sum();
        loss -= risks[i] - denom.ln();
    }
    loss
}

/// Every weak ordering of three follow-up times (13 of them, ties included).
pub fn weak_orderings() -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for a in 1..=3 {
        for b in 1..=3 {
            for c in 1..=3 {
                let t = [a, b, c];
                // Keep only dense rankings: ranks used are 1..=max without gaps.
                let max = *t.iter().max().unwrap();
                if (1..=max).all(|r| t.contains(&r)) {
                    out.push(t.map(f64::from));
                }
            }
        }
    }
    out
}

pub const RISKS: [[f64; 3]; 5] = [
    [0.0, 0.0, 0.0],
    [1.0, 2.0, 3.0],
    [-1.0, 0.5, 2.0],
    [3.0, -2.0, 0.1],
    [10.0, -10.0, 0.0],
];

/// Upper tail of a chi-square(1) variable by composite Simpson quadrature.
/// With `x = u^2` the density becomes the smooth `2 phi(u)`.
pub fn chi2_sf_dof1_quadrature(x: f64) -> f64 {
    let b = x.sqrt();
    let n = 20_000;
    let h = b / n as f64;
    let f = |u: f64| 2.0 * (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(0.0) + f(b);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - s * h / 3.0
}

/// Compression by embedding one patch at a time, without strips, chunks or
/// threads.
pub fn naive_compress(img: &RgbImage, enc: &EncoderSpec, params: &ParamStore, stride: usize) -> Vec<f32> {
    let p = enc.patch_size;
    let grid = plan_grid(img.width, img.height, p, stride).unwrap();
    let mut out = Vec::new();
    for cell in grid.cells() {
        let mut px = Vec::with_capacity(p * p * 3);
        for y in 0..p {
            for x in 0..p {
                px.extend(img.pixel(cell.x + x, cell.y + y).iter().map(|&v| f64::from(v) / 255.0));
            }
        }
        let z = enc.embed(params, Tensor::new(vec![1, p, p, 3], px).unwrap()).unwrap();
        out.extend(z.data().iter().map(|&v| v as f32));
    }
    out
}

// ---- scaled-down experiments ------------------------------------------------

pub fn small_encoder() -> EncoderSpec {
    EncoderSpec {
        patch_size: 16,
        filters: 16,
        layers: 4,
        code_size: 16,
        ..EncoderSpec::default()
    }
}

pub fn small_multitask(epochs: usize) -> MultitaskConfig {
    MultitaskConfig {
        batch_per_task: 32,
        max_epochs: epochs,
        head: HeadConfig {
            hidden: 32,
            dropout: 0.1,
        },
        ..MultitaskConfig::default()
    }
}

pub fn small_wsi(grid: usize, objective: Objective) -> WsiCnnSpec {
    // Enough stride-2 layers to bring the grid down to one cell.
    let mut strides = vec![2; grid.trailing_zeros() as usize];
    strides.push(1);
    WsiCnnSpec {
        code_size: 16,
        filters: 32,
        hidden: 32,
        pad_multiple: grid,
        strides,
        objective,
        ..WsiCnnSpec::default()
    }
}

pub fn small_data(wsi_count: usize, grid: usize, patches_per_task: usize) -> DataConfig {
    DataConfig {
        patches_per_task,
        patch_size: 16,
        wsi_count,
        wsi: WsiGenConfig {
            rows: grid,
            cols: grid,
            patch_size: 16,
            risk_scale: 4.0,
        },
        censor_rate: 0.3,
    }
}

pub fn compress_opts() -> CompressOptions {
    CompressOptions {
        patch_size: 16,
        stride: 16,
        tissue_threshold: None,
        chunk: 64,
    }
}

pub struct ScenarioResult {
    pub statistic: f64,
    pub predictions: Vec<f64>,
}

/// Regression: 2-task encoder, compression, 4-fold cross-validated
/// regressor; the statistic is the out-of-fold Spearman correlation.
pub fn regression_scenario(seed: u64, wsi_count: usize, grid: usize, encoder_epochs: usize, wsi_epochs: usize) -> ScenarioResult {
    let d = pipeline::generate(seed, &small_data(wsi_count, grid, 600)).unwrap();
    let enc = small_encoder();
    let (params, _) = pipeline::train_encoder(
        &enc,
        &small_multitask(encoder_epochs),
        &d.patch_tasks,
        &[Task::Mitosis, Task::Colorectal],
        seed,
    )
    .unwrap();
    let images: Vec<(String, &RgbImage)> = d.wsis.iter().map(|w| (w.id.clone(), &w.image)).collect();
    let grids = to_grids(&compress_all(&images, &enc, &params, &compress_opts()).unwrap()).unwrap();
    let y: Vec<f64> = d.wsis.iter().map(|w| w.label.target).collect();
    let train = ImageTrainConfig {
        batch: 16,
        max_epochs: wsi_epochs,
        ..ImageTrainConfig::default()
    };
    let out = cross_validate(
        &small_wsi(grid, Objective::Mse),
        &train,
        &CvConfig::default(),
        &grids,
        &Targets::Regression(y.clone()),
        seed,
    )
    .unwrap();
    ScenarioResult {
        statistic: spearman(&out.oof, &y).unwrap(),
        predictions: out.oof,
    }
}

/// Survival: Cox objective with train/val/test rotations; the pooled test
/// predictions are split at their median and the statistic is the log-rank
/// p-value between the halves.
pub fn survival_scenario(seed: u64, cohort: usize, grid: usize, encoder_epochs: usize, wsi_epochs: usize) -> ScenarioResult {
    let d = pipeline::generate(seed, &small_data(cohort, grid, 400)).unwrap();
    let enc = small_encoder();
    let (params, _) = pipeline::train_encoder(
        &enc,
        &small_multitask(encoder_epochs),
        &d.patch_tasks,
        &[Task::Mitosis, Task::Colorectal],
        seed,
    )
    .unwrap();
    let images: Vec<(String, &RgbImage)> = d.wsis.iter().map(|w| (w.id.clone(), &w.image)).collect();
    let grids = to_grids(&compress_all(&images, &enc, &params, &compress_opts()).unwrap()).unwrap();
    let train = ImageTrainConfig {
        batch: 32,
        max_epochs: wsi_epochs,
        ..ImageTrainConfig::default()
    };
    let cv = CvConfig {
        folds: 4,
        pattern: FoldPattern::TrainValTest,
        holdout: 0,
    };
    let out = cross_validate(
        &small_wsi(grid, Objective::Cox),
        &train,
        &cv,
        &grids,
        &Targets::Survival(d.survival.clone()),
        seed,
    )
    .unwrap();
    let records: Vec<SurvivalRecord> = out.samples.iter().map(|&i| d.survival[i]).collect();
    let ev = evaluate_survival(&out.oof, &records).unwrap();
    ScenarioResult {
        statistic: ev.report.get("p_value").unwrap(),
        predictions: out.oof,
    }
}

/// Out-of-fold correlations of the four single-task encoders and of the
/// four-task encoder.
pub fn ablation_scenario(seed: u64, wsi_count: usize, grid: usize) -> (Vec<f64>, f64) {
    let d = pipeline::generate(seed, &small_data(wsi_count, grid, 400)).unwrap();
    let enc = small_encoder();
    let mt = small_multitask(8);
    let images: Vec<(String, &RgbImage)> = d.wsis.iter().map(|w| (w.id.clone(), &w.image)).collect();
    let y: Vec<f64> = d.wsis.iter().map(|w| w.label.target).collect();
    let wsi = small_wsi(grid, Objective::Mse);
    let train = ImageTrainConfig {
        batch: 16,
        max_epochs: 30,
        ..ImageTrainConfig::default()
    };
    let cv = CvConfig::default();
    let opts = compress_opts();
    let setup = AblationSetup {
        encoder: &enc,
        multitask: &mt,
        compression: &opts,
        wsi: &wsi,
        image_training: &train,
        cv: &cv,
        datasets: &d.patch_tasks,
        images: &images,
        targets: &y,
    };
    let rows = run_ablation(&setup, &ablation_subsets(seed, 0, true), seed).unwrap();
    let single: Vec<f64> = rows.iter().filter(|r| r.tasks().len() == 1).map(|r| r.correlation).collect();
    let full = rows.iter().find(|r| r.tasks().len() == 4).unwrap().correlation;
    (single, full)
}

/// Runs `f` on a private single-thread pool.
pub fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}
