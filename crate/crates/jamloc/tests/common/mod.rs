//! Shared helpers for integration tests: the compact synthetic domain-shift
//! benchmark exercising the full pretrain -> align -> finetune pipeline.

use jamloc::analysis::domain_probe_auc;
use jamloc::dataset::{
    grid_positions, split, synth_generate, CirSample, Domain, SampleSet, SynthConfig,
};
use jamloc::models::AutoencoderSpec;
use jamloc::preprocess::{cir_feature_matrix, fit_scaler, processed_batch, FitScope, ScalerParams};
use jamloc::training::{
    mean_euclid, predict_coords, run_align, run_finetune, run_pretrain, EarlyStopSpec,
    PhaseConfig, ScheduleSpec, TrainingState,
};
use ndarray::{Array2, Array3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct BenchKnobs {
    pub rounds: usize,
    /// Target-domain room size; moving the far walls shifts the delay and
    /// amplitude of their reflections while the direct path stays put.
    pub tgt_room: (f64, f64),
    pub tgt_reflection_scale: f64,
    pub tgt_clutter_taps: usize,
    pub pretrain_epochs: usize,
    pub warmup_epochs: usize,
    pub align_epochs: usize,
    pub align_lr: f64,
    pub finetune_epochs: usize,
    pub finetune_lr: f64,
}

impl Default for BenchKnobs {
    fn default() -> Self {
        Self {
            rounds: 40,
            tgt_room: (260.0, 420.0),
            tgt_reflection_scale: 0.5,
            tgt_clutter_taps: 0,
            pretrain_epochs: 15,
            warmup_epochs: 5,
            align_epochs: 41,
            align_lr: 2e-3,
            finetune_epochs: 100,
            finetune_lr: 5e-3,
        }
    }
}

#[derive(Debug)]
pub struct BenchNumbers {
    pub src_test_err: f64,
    pub src_on_target_err: f64,
    pub acnt_err: f64,
    pub cnt_err: f64,
    /// Domain AUC reported by the pipeline after alignment (the model's own
    /// domain classifier on the eval slice, at the selected checkpoint).
    pub align_auc: f64,
    /// Independent k-NN probe AUC on the aligned embeddings. Reported for
    /// transparency: fooling the trained classifier does not imply the
    /// embedding geometry is fully domain-free.
    pub probe_auc: f64,
    /// Same k-NN probe on the pretrained (unaligned) embeddings.
    pub pretrain_probe_auc: f64,
}

/// Compact model for the synthetic benchmark: same architecture family as
/// the full configuration, scaled to the few hundred samples the generator
/// produces.
fn bench_spec() -> AutoencoderSpec {
    AutoencoderSpec {
        stage_channels: [8, 16, 32],
        blocks_per_stage: 1,
        embedding_dim: 32,
        ..AutoencoderSpec::default()
    }
}

fn bench_config(positions: Vec<(f64, f64)>, rounds: usize, domain: Domain) -> SynthConfig {
    let mut cfg = SynthConfig::new(positions, rounds, domain);
    // one receiver: each sample is a single reception event, and the
    // symmetric 4-corner layout would make per-sample position regression
    // ambiguous under the 180-degree room rotation
    cfg.receivers = vec![(0.0, 0.0)];
    cfg
}

fn tensors(samples: &[&CirSample], scaler: &ScalerParams) -> (Array3<f64>, Array2<f64>) {
    let x = processed_batch(samples, scaler).unwrap();
    let y = Array2::from_shape_fn((samples.len(), 2), |(i, j)| {
        if j == 0 {
            samples[i].x_cm
        } else {
            samples[i].y_cm
        }
    });
    (x, y)
}

fn select<'a>(set: &'a SampleSet, idx: &[usize]) -> Vec<&'a CirSample> {
    idx.iter().map(|&i| &set.samples[i]).collect()
}

/// Checkerboard half of a 4x4 grid index.
fn checker16(i: u32) -> bool {
    (i / 4 + i % 4) % 2 == 0
}

/// Embeddings of all rows, inference mode.
fn embed(state: &mut TrainingState, x: &Array3<f64>) -> Array2<f64> {
    state.model.ae.encode(x, false, None).0
}

/// Alignment recipe shared by the adversarial (A-CNT) and ablated (CNT)
/// variants; `adversarial` only toggles the lambda schedules, everything
/// else is identical.
///
/// Warmup trains the domain classifier with the reversal effectively off.
/// The main stage alternates 2-epoch classifier-refresh blocks with 10-epoch
/// encoder-attack blocks (classifier frozen); checkpoint selection keeps the
/// epoch whose eval AUC is closest to 0.5.
fn align_variant(
    state: &mut TrainingState,
    x_src: &Array3<f64>,
    x_tgt: &Array3<f64>,
    k: &BenchKnobs,
    adversarial: bool,
) -> f64 {
    let mut warm = PhaseConfig::align_default().with_epochs(k.warmup_epochs);
    warm.batch_size = 64;
    warm.lr_schedule = ScheduleSpec::constant(k.align_lr, k.warmup_epochs);
    warm.lambda = ScheduleSpec::constant(if adversarial { 1e-9 } else { 0.0 }, k.warmup_epochs);
    warm.early_stop = None;
    run_align(state, x_src, x_tgt, &warm).unwrap();

    let total = k.warmup_epochs + k.align_epochs;
    let mut main = PhaseConfig::align_default().with_epochs(total);
    main.batch_size = 64;
    main.lr_schedule = ScheduleSpec::constant(k.align_lr, total);
    main.lambda = ScheduleSpec::constant(if adversarial { 4.0 } else { 0.0 }, total);
    main.dc_alternate = Some((1, 20));
    main.early_stop = Some(EarlyStopSpec {
        metric: "auc_dist".into(),
        patience: 12,
        min_delta: 0.005,
    });
    run_align(state, x_src, x_tgt, &main).unwrap().final_auc
}

/// Run the full benchmark for one seed: 16 source positions, 8 target
/// positions on a checkerboard of the same grid, target reflections shifted
/// by a different room geometry. Source-only / adversarial (A-CNT) /
/// non-adversarial (CNT) variants share one pretrained checkpoint. The
/// labeled fine-tuning set covers 4 of the 8 target positions; the holdout
/// is the other 4, so the regression head has to generalize across positions
/// rather than memorize them.
pub fn run_benchmark(seed: u64, k: &BenchKnobs) -> BenchNumbers {
    // data: source room 300x500; target positions reuse a checkerboard half
    // of the source grid so only the channel, not the position marginal,
    // separates the domains
    let grid = grid_positions(4, 4, 300.0, 500.0);
    let src_cfg = bench_config(grid.clone(), k.rounds, Domain::Source);
    let tpos: Vec<(f64, f64)> = grid
        .iter()
        .enumerate()
        .filter(|(i, _)| checker16(*i as u32))
        .map(|(_, &p)| p)
        .collect();
    let mut tgt_cfg = bench_config(tpos, k.rounds, Domain::Target);
    tgt_cfg.grid_w_cm = k.tgt_room.0;
    tgt_cfg.grid_h_cm = k.tgt_room.1;
    tgt_cfg.reflection_scale = k.tgt_reflection_scale;
    tgt_cfg.clutter_taps = k.tgt_clutter_taps;
    tgt_cfg.diag_shift = 0.8;
    let src = synth_generate(&src_cfg, seed).unwrap();
    let tgt = synth_generate(&tgt_cfg, seed.wrapping_add(1000)).unwrap();

    let sp = split(&src, (0.7, 0.15, 0.15), seed).unwrap();
    let src_train = select(&src, &sp.train);
    let src_val = select(&src, &sp.val);
    let src_test = select(&src, &sp.test);
    // shuffle target rows so every eval slice covers all positions
    let mut tgt_all: Vec<&CirSample> = tgt.samples.iter().collect();
    tgt_all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xA11C));

    // scaler over source train + unlabeled target
    let mut fit_rows = src_train.clone();
    fit_rows.extend(tgt_all.iter().copied());
    let scaler = fit_scaler(
        cir_feature_matrix(&fit_rows).unwrap().view(),
        FitScope::SourcePlusTarget,
    )
    .unwrap();

    let (x_train, y_train) = tensors(&src_train, &scaler);
    let (x_val, y_val) = tensors(&src_val, &scaler);
    let (x_test, y_test) = tensors(&src_test, &scaler);
    let (x_tgt_all, y_tgt_all) = tensors(&tgt_all, &scaler);

    // alignment pool: source rows restricted to the checkerboard positions so
    // the position marginals of the two domains match
    let src_pool: Vec<&CirSample> = src_train
        .iter()
        .copied()
        .filter(|r| checker16(r.position_id))
        .collect();
    let (x_pool, _) = tensors(&src_pool, &scaler);

    // labeled = 4 of the 8 target positions, holdout = the other 4; the
    // fine-tuning set mixes the labeled source rows in so the head learns the
    // full room geometry rather than memorizing four coordinates
    let labeled_pos = [0u32, 2, 5, 7];
    let lab_idx: Vec<usize> = (0..tgt.samples.len())
        .filter(|&i| labeled_pos.contains(&tgt.samples[i].position_id))
        .collect();
    let hold_idx: Vec<usize> = (0..tgt.samples.len())
        .filter(|&i| !labeled_pos.contains(&tgt.samples[i].position_id))
        .collect();
    let mut lab_rows = src_train.clone();
    lab_rows.extend(select(&tgt, &lab_idx));
    let (x_lab, y_lab) = tensors(&lab_rows, &scaler);
    let (x_hold, y_hold) = tensors(&select(&tgt, &hold_idx), &scaler);

    // shared pretraining
    let mut pre = TrainingState::new(seed, bench_spec()).unwrap();
    let mut pcfg = PhaseConfig::pretrain_default().with_epochs(k.pretrain_epochs);
    pcfg.batch_size = 64;
    run_pretrain(&mut pre, &x_train, Some(&x_val), &pcfg).unwrap();
    let pretrain_probe_auc = domain_probe_auc(
        &embed(&mut pre, &x_pool),
        &embed(&mut pre, &x_tgt_all),
        10,
        seed,
    )
    .unwrap();

    let ft_cfg = |lambda_zero: bool| {
        let mut c = PhaseConfig::finetune_default().with_epochs(k.finetune_epochs);
        c.batch_size = 16;
        c.lr_schedule = ScheduleSpec::cosine(k.finetune_lr, 0.0, k.finetune_epochs);
        if lambda_zero {
            c.lambda = ScheduleSpec::constant(0.0, k.finetune_epochs);
        }
        c
    };

    // source-only reference: supervised fine-tune on source labels
    let mut src_only = clone_state(&mut pre);
    run_finetune(&mut src_only, &x_train, &y_train, &x_val, &y_val, &ft_cfg(true)).unwrap();
    let src_test_err = mean_euclid(&predict_coords(&mut src_only.model, &x_test), &y_test);
    let src_on_target_err =
        mean_euclid(&predict_coords(&mut src_only.model, &x_tgt_all), &y_tgt_all);

    // A-CNT: adversarial align + fine-tune
    let mut acnt = clone_state(&mut pre);
    let align_auc = align_variant(&mut acnt, &x_pool, &x_tgt_all, k, true);
    let probe_auc = domain_probe_auc(
        &embed(&mut acnt, &x_pool),
        &embed(&mut acnt, &x_tgt_all),
        10,
        seed,
    )
    .unwrap();
    let a_ft = run_finetune(&mut acnt, &x_lab, &y_lab, &x_hold, &y_hold, &ft_cfg(false)).unwrap();

    // CNT: identical pipeline with lambda = 0 everywhere
    let mut cnt = clone_state(&mut pre);
    let _ = align_variant(&mut cnt, &x_pool, &x_tgt_all, k, false);
    let c_ft = run_finetune(&mut cnt, &x_lab, &y_lab, &x_hold, &y_hold, &ft_cfg(true)).unwrap();

    BenchNumbers {
        src_test_err,
        src_on_target_err,
        acnt_err: a_ft.best_holdout_err,
        cnt_err: c_ft.best_holdout_err,
        align_auc,
        probe_auc,
        pretrain_probe_auc,
    }
}

/// Fresh TrainingState carrying over the pretrained weights (fresh Adam).
fn clone_state(pre: &mut TrainingState) -> TrainingState {
    let mut s = TrainingState::new(pre.seed, pre.model.ae.spec.clone()).unwrap();
    s.model.load_params_map(&pre.model.params_map()).unwrap();
    s.phase = pre.phase;
    s.epoch = pre.epoch;
    s
}
