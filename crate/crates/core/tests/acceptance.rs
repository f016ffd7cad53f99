//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit status
//! if any criterion fails. Run with `cargo test -p nic-core --test acceptance`.
mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use nic_autodiff::{
    finite_difference_check, BatchNormConfig, DropoutGranularity, GradCheck, Mode, Padding, RunningStats, Tape, Tensor,
    Var,
};
use nic_core::compression::{compress_image, plan_grid, read_nicw, write_nicw, CompressOptions, RgbImage};
use nic_core::metrics::{read_ablation_csv, task_inclusion_correlation};
use nic_core::models::head::{multitask_loss, BnBatching, HeadConfig, HeadSpec, TaskBatch};
use nic_core::models::{stack_grids, EmbeddingGrid, EncoderSpec, Objective, Task, WsiCnnSpec};
use nic_core::rng;
use nic_core::special::chi_square_sf;
use nic_core::survival::{cox_loss, cox_loss_and_grad, cox_loss_on_tape, kaplan_meier, log_rank_test, SurvivalRecord};
use nic_core::training::init_multitask;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed <= limit
}

// 1 -------------------------------------------------------------------------

fn task_inclusion_table() -> Outcome {
    let start = Instant::now();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/reference_ablation.csv");
    let rows = read_ablation_csv(std::fs::File::open(path).unwrap()).unwrap();
    let rho = task_inclusion_correlation(&rows).unwrap();
    let want = [0.319, 0.033, 0.077, 0.824];
    let ok = rows.len() == 18 && rho.iter().zip(want).all(|(r, w)| (r - w).abs() <= 5e-4);
    let t = start.elapsed();
    outcome(
        ok && within(t, Duration::from_secs(1)),
        format!("rho = ({:.4}, {:.4}, {:.4}, {:.4}) in {t:.2?}", rho[0], rho[1], rho[2], rho[3]),
    )
}

// 2 -------------------------------------------------------------------------

fn layer_checks() -> Vec<(&'static str, f64)> {
    let mut r = rng::stream(2024, 0);
    let mut rand_t = |shape: &[usize]| Tensor::from_fn(shape, |_| r.random_range(-1.0..1.0));
    let half_ss = |t: &mut Tape, y: Var| {
        let s = t.sum_squares(y);
        t.scale(s, 0.5)
    };
    let run = |f: &dyn Fn(&mut Tape, &[Var]) -> nic_autodiff::Result<Var>, p: &[Tensor]| {
        finite_difference_check(f, p, GradCheck::default()).unwrap().max_rel_error
    };
    let mut out = Vec::new();
    let p = [rand_t(&[2, 5, 5, 3]), rand_t(&[3, 3, 3, 4]), rand_t(&[4])];
    out.push(("conv2d", run(&|t, v| { let y = t.conv2d(v[0], v[1], v[2], 2, Padding::Same)?; Ok(half_ss(t, y)) }, &p)));
    let p = [rand_t(&[2, 5, 5, 3]), rand_t(&[3, 3, 3]), rand_t(&[1, 1, 3, 4]), rand_t(&[4])];
    out.push((
        "depthwise_separable_conv2d",
        run(
            &|t, v| {
                let y = t.depthwise_separable_conv2d(v[0], v[1], v[2], v[3], 2, Padding::Same)?;
                Ok(half_ss(t, y))
            },
            &p,
        ),
    ));
    let proj = rand_t(&[3, 2, 2, 3]);
    let p = [rand_t(&[3, 2, 2, 3]), rand_t(&[3]), rand_t(&[3])];
    out.push((
        "batch_norm (train)",
        run(
            &|t, v| {
                let mut rs = RunningStats::new(3);
                let y = t.batch_norm(v[0], v[1], v[2], &mut rs, BatchNormConfig::default(), Mode::Train)?;
                let c = t.constant(proj.clone());
                let z = t.add(y, c)?;
                Ok(half_ss(t, z))
            },
            &p,
        ),
    ));
    let p = [rand_t(&[3, 4]), rand_t(&[4]), rand_t(&[4])];
    out.push((
        "batch_norm (infer)",
        run(
            &|t, v| {
                let mut rs = RunningStats { mean: vec![0.1, -0.2, 0.3, 0.0], var: vec![1.5, 0.7, 1.0, 2.0] };
                let y = t.batch_norm(v[0], v[1], v[2], &mut rs, BatchNormConfig::default(), Mode::Infer)?;
                Ok(half_ss(t, y))
            },
            &p,
        ),
    ));
    let p = [Tensor::from_fn(&[12], |i| if i % 2 == 0 { 0.3 + i as f64 * 0.05 } else { -0.4 - i as f64 * 0.03 })];
    out.push(("leaky_relu", run(&|t, v| { let y = t.leaky_relu(v[0], 0.2); Ok(half_ss(t, y)) }, &p)));
    let p = [rand_t(&[3, 4]), rand_t(&[4, 5]), rand_t(&[5])];
    out.push((
        "dense + softmax + cross_entropy",
        run(
            &|t, v| {
                let z = t.dense(v[0], v[1], v[2])?;
                let s = t.softmax(z)?;
                t.cross_entropy(s, &[0, 4, 2])
            },
            &p,
        ),
    ));
    let p = [rand_t(&[6])];
    out.push(("mse", run(&|t, v| t.mse(v[0], &[0.1, 0.2, -0.3, 0.4, 0.0, 1.0]), &p)));
    let p = [rand_t(&[2, 3, 3, 4])];
    for (name, gran) in [("dropout (element)", DropoutGranularity::Element), ("dropout (channel)", DropoutGranularity::Channel)] {
        out.push((
            name,
            run(
                &|t, v| {
                    let mut m = rng::stream(7, 7);
                    let y = t.dropout(v[0], 0.3, Mode::Train, gran, &mut m)?;
                    Ok(half_ss(t, y))
                },
                &p,
            ),
        ));
    }
    out.push((
        "mean_pool_spatial",
        run(&|t, v| { let y = t.mean_pool_spatial(v[0])?; Ok(half_ss(t, y)) }, &p),
    ));
    let recs = [SurvivalRecord::new(2.0, true), SurvivalRecord::new(1.0, false), SurvivalRecord::new(3.0, true), SurvivalRecord::new(2.0, true)];
    let p = [rand_t(&[4])];
    out.push((
        "cox partial likelihood",
        run(&|t, v| cox_loss_on_tape(t, v[0], &recs).map_err(|e| nic_autodiff::Error::Shape(e.to_string())), &p),
    ));
    out
}

fn network_checks() -> Vec<(&'static str, f64)> {
    let enc = EncoderSpec { patch_size: 8, filters: 3, layers: 2, code_size: 4, ..EncoderSpec::default() };
    let head_cfg = HeadConfig { hidden: 5, dropout: 0.1 };
    let params = init_multitask(&enc, &head_cfg, 4).unwrap();
    let mut r = rng::stream(3, 3);
    let x = random_tensor(&[2, 8, 8, 3], &mut r);
    let (enc_err, _) = network_gradcheck(&params, |g| {
        let xv = g.input(x.clone());
        let z = enc.forward(g, xv)?;
        let s = g.tape.sum_squares(z);
        Ok(g.tape.scale(s, 0.5))
    });
    let tasks = [Task::Lymph, Task::Colorectal];
    let heads: Vec<HeadSpec> = tasks.iter().map(|&t| HeadSpec::new(t, &enc, &head_cfg)).collect();
    let batches: Vec<TaskBatch> = tasks
        .iter()
        .map(|&t| TaskBatch { task: t, patches: random_tensor(&[2, 8, 8, 3], &mut r), labels: vec![0, t.classes() - 1] })
        .collect();
    let (mt_err, _) = network_gradcheck(&params, |g| Ok(multitask_loss(g, &enc, &heads, &batches, BnBatching::Mixed)?.0));

    let mut wsi_err = 0.0f64;
    for objective in [Objective::Mse, Objective::Ce, Objective::Cox] {
        let spec = WsiCnnSpec {
            code_size: 3,
            filters: 4,
            strides: vec![2, 1],
            hidden: 5,
            pad_multiple: 4,
            objective,
            ..WsiCnnSpec::default()
        };
        let p = spec.init(&mut rng::stream(5, 1)).unwrap();
        let grids: Vec<EmbeddingGrid> = (0..2)
            .map(|_| EmbeddingGrid::new(4, 4, 3, random_tensor(&[48], &mut r).into_data(), vec![true; 16]).unwrap())
            .collect();
        let x = stack_grids(&grids.iter().collect::<Vec<_>>(), 4).unwrap();
        let (e, _) = network_gradcheck(&p, |g| {
            let xv = g.input(x.clone());
            let out = spec.forward(g, xv)?;
            let data = match objective {
                Objective::Mse => g.tape.mse(out, &[0.2, 0.9])?,
                Objective::Ce => g.tape.cross_entropy(out, &[1, 0])?,
                Objective::Cox => cox_loss_on_tape(&mut g.tape, out, &[SurvivalRecord::new(3.0, true), SurvivalRecord::new(5.0, true)])?,
            };
            let pen = spec.l2_penalty(g)?.unwrap();
            Ok(g.tape.add(data, pen)?)
        });
        wsi_err = wsi_err.max(e);
    }
    vec![("encoder", enc_err), ("encoder + task heads", mt_err), ("image-level network (mse/ce/cox)", wsi_err)]
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut all = layer_checks();
    all.extend(network_checks());
    let worst = all.iter().cloned().fold(("", 0.0), |a, b| if b.1 > a.1 { b } else { a });
    let t = start.elapsed();
    let ok = all.iter().all(|(_, e)| *e <= 1e-5) && within(t, Duration::from_secs(120));
    outcome(ok, format!("{} checks, worst relative error {:.2e} ({}) in {t:.2?}", all.len(), worst.1, worst.0))
}

// 3 -------------------------------------------------------------------------

fn cox_suite() -> Outcome {
    let (mut loss_err, mut shift_err, mut grad_err, mut cases) = (0.0f64, 0.0f64, 0.0f64, 0);
    for t in weak_orderings() {
        for mask in 1..8u8 {
            let rec: Vec<SurvivalRecord> = (0..3).map(|i| SurvivalRecord::new(t[i], mask & (1 << i) != 0)).collect();
            for f in &RISKS {
                let got = cox_loss(f, &rec).unwrap();
                loss_err = loss_err.max((got - cox_oracle(f, &rec)).abs());
                let shifted: Vec<f64> = f.iter().map(|v| v - 3.25).collect();
                shift_err = shift_err.max((cox_loss(&shifted, &rec).unwrap() - got).abs());
                let (_, grad) = cox_loss_and_grad(f, &rec).unwrap();
                for k in 0..3 {
                    let h = 1e-6;
                    let (mut up, mut down) = (f.to_vec(), f.to_vec());
                    up[k] += h;
                    down[k] -= h;
                    let fd = (cox_oracle(&up, &rec) - cox_oracle(&down, &rec)) / (2.0 * h);
                    grad_err = grad_err.max((fd - grad[k]).abs());
                }
                cases += 1;
            }
        }
    }
    outcome(
        loss_err <= 1e-9 && shift_err <= 1e-10 && grad_err <= 1e-6,
        format!("{cases} cases: loss err {loss_err:.1e}, shift err {shift_err:.1e}, gradient err {grad_err:.1e}"),
    )
}

// 4 -------------------------------------------------------------------------

fn survival_statistics() -> Outcome {
    let rec = [SurvivalRecord::new(1.0, true), SurvivalRecord::new(2.0, false), SurvivalRecord::new(3.0, true)];
    let km = kaplan_meier(&rec).unwrap();
    let km_ok = km.times == [1.0, 3.0] && km.survival == [2.0 / 3.0, 0.0];
    let group: Vec<SurvivalRecord> = [(2.0, true), (4.0, false), (5.0, true), (7.0, true)]
        .iter()
        .map(|&(t, e)| SurvivalRecord::new(t, e))
        .collect();
    let lr = log_rank_test(&group, &group).unwrap();
    let lr_ok = lr.statistic == 0.0 && lr.p_value == 1.0;
    let grid = [0.1, 1.0, 3.84, 6.63, 10.83];
    let chi_err = grid
        .iter()
        .map(|&x| (chi_square_sf(x, 1.0) - chi2_sf_dof1_quadrature(x)).abs())
        .fold(0.0, f64::max);
    let p_last = chi_square_sf(10.83, 1.0);
    outcome(
        km_ok && lr_ok && chi_err <= 1e-8 && (p_last - 0.001).abs() < 2e-5,
        format!("KM exact: {km_ok}; identical log-rank (0, 1): {lr_ok}; chi-square err {chi_err:.1e}; p(10.83) = {p_last:.6}"),
    )
}

// 5 -------------------------------------------------------------------------

fn compression_equivalence() -> Outcome {
    let spec = EncoderSpec { patch_size: 8, filters: 4, layers: 2, code_size: 5, ..EncoderSpec::default() };
    let params = spec.init(&mut rng::stream(3, rng::ids::INIT)).unwrap();
    let mut r = rng::stream(55, 0);
    let dir = tempfile::tempdir().unwrap();
    let (mut equal, mut round_trips) = (0, 0);
    for i in 0..20 {
        let (w, h) = (r.random_range(8..70), r.random_range(8..70));
        let mut img = RgbImage::new(w, h);
        img.data.iter_mut().for_each(|v| *v = r.random());
        let stride = r.random_range(4..=9);
        let opts = CompressOptions { patch_size: 8, stride, tissue_threshold: None, chunk: r.random_range(1..9) };
        let ci = compress_image(&img, &format!("i{i}"), &spec, &params, &opts).unwrap();
        let naive = naive_compress(&img, &spec, &params, stride);
        if ci.embeddings.len() == naive.len() && ci.embeddings.iter().zip(&naive).all(|(a, b)| a.to_bits() == b.to_bits()) {
            equal += 1;
        }
        let path = dir.path().join(format!("i{i}.nicw"));
        write_nicw(&ci, &path).unwrap();
        if read_nicw(&path).unwrap() == ci {
            round_trips += 1;
        }
    }
    let mut grid_ok = 0;
    for _ in 0..50 {
        let (w, h, p, s) = (r.random_range(1..500), r.random_range(1..500), r.random_range(1..100), r.random_range(1..100));
        let ok = match plan_grid(w, h, p, s) {
            Ok(g) => g.cols == (w - p) / s + 1 && g.rows == (h - p) / s + 1,
            Err(_) => w < p || h < p,
        };
        grid_ok += usize::from(ok);
    }
    outcome(
        equal == 20 && round_trips == 20 && grid_ok == 50,
        format!("bit-exact {equal}/20, NICW round trips {round_trips}/20, grid formula {grid_ok}/50"),
    )
}

// 6-9 -------------------------------------------------------------------------

const E2E_SEED: u64 = 1;
const SURVIVAL_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn regression_e2e() -> (Outcome, Vec<f64>) {
    let start = Instant::now();
    let r = regression_scenario(E2E_SEED, 200, 32, 10, 30);
    let t = start.elapsed();
    (
        outcome(r.statistic >= 0.8, format!("out-of-fold spearman {:.4} (200 images, 32x32 grid) in {t:.1?}", r.statistic)),
        r.predictions,
    )
}

fn survival_e2e() -> (Outcome, Vec<Vec<f64>>) {
    let start = Instant::now();
    let runs: Vec<ScenarioResult> = SURVIVAL_SEEDS.iter().map(|&s| survival_scenario(s, 300, 16, 8, 30)).collect();
    let hits = runs.iter().filter(|r| r.statistic < 0.01).count();
    let ps: Vec<String> = runs.iter().map(|r| format!("{:.1e}", r.statistic)).collect();
    (
        outcome(hits >= 4, format!("log-rank p < 0.01 in {hits}/5 seeds (p = {}) in {:.1?}", ps.join(", "), start.elapsed())),
        runs.into_iter().map(|r| r.predictions).collect(),
    )
}

fn ablation_trend() -> Outcome {
    let start = Instant::now();
    let (mut single, mut full) = (Vec::new(), Vec::new());
    for seed in 0..3 {
        let (s, f) = ablation_scenario(seed, 120, 16);
        single.extend(s);
        full.push(f);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m1, m4) = (mean(&single), mean(&full));
    outcome(m4 >= m1, format!("mean correlation 4-task {m4:.4} vs 1-task {m1:.4} over 3 seeds in {:.1?}", start.elapsed()))
}

fn determinism(regression: &[f64], survival: &[Vec<f64>]) -> Outcome {
    let start = Instant::now();
    let reg = single_threaded(|| regression_scenario(E2E_SEED, 200, 32, 10, 30));
    let reg_same = reg.predictions.len() == regression.len()
        && reg.predictions.iter().zip(regression).all(|(a, b)| a.to_bits() == b.to_bits());
    let surv_same = SURVIVAL_SEEDS
        .iter()
        .zip(survival)
        .filter(|(&s, prev)| {
            let again = single_threaded(|| survival_scenario(s, 300, 16, 8, 30));
            again.predictions.iter().zip(prev.iter()).all(|(a, b)| a.to_bits() == b.to_bits())
        })
        .count();
    outcome(
        reg_same && surv_same == SURVIVAL_SEEDS.len(),
        format!("single-thread rerun bit-identical: regression {reg_same}, survival {surv_same}/5 in {:.1?}", start.elapsed()),
    )
}

fn main() -> ExitCode {
    let threads = rayon::current_num_threads();
    println!("acceptance suite ({threads} worker threads)");
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |n: u32, name: &'static str, o: Outcome| {
        println!("{} [{n}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    report(1, "task-inclusion correlations", task_inclusion_table());
    report(2, "gradient suite", gradient_suite());
    report(3, "cox oracle suite", cox_suite());
    report(4, "survival statistics", survival_statistics());
    report(5, "compression equivalence", compression_equivalence());
    let (o6, reg_preds) = regression_e2e();
    report(6, "end-to-end regression", o6);
    let (o7, surv_preds) = survival_e2e();
    report(7, "end-to-end survival", o7);
    report(8, "ablation trend", ablation_trend());
    report(9, "determinism", determinism(&reg_preds, &surv_preds));
    let failed = results.iter().filter(|r| !r.2.pass).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
