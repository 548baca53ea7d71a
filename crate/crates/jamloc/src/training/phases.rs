//! The three training phases: autoencoder pre-training, joint adversarial
//! alignment, and supervised fine-tuning.
//!
//! All stochastic streams (batch shuffles, injected noise) are derived from
//! `(seed, phase, epoch)`, so a save/load-resumed run is identical to an
//! uninterrupted one and reruns are bit-identical.

use ndarray::{Array2, Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{JamlocError, Result};
use crate::models::{AutoencoderSpec, DannModel};
use crate::nn::optim::Adam;
use crate::nn::{mean_pool_backward, Params};
use crate::training::losses::{
    loss_dom_grad, loss_ft, loss_rec, loss_rec_grad, loss_reg_grad,
};
use crate::training::schedule::ScheduleSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pretrain,
    Align,
    Finetune,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EarlyStopSpec {
    pub metric: String,
    pub patience: usize,
    pub min_delta: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_schedule: ScheduleSpec,
    /// Adversarial reversal strength (lambda during alignment, lambda_ft
    /// during fine-tuning).
    pub lambda: ScheduleSpec,
    /// Reconstruction weight during fine-tuning.
    pub alpha: ScheduleSpec,
    /// Regression weight during fine-tuning.
    pub beta: f64,
    /// Two-timescale update: the domain classifier's learning rate is the
    /// encoder's times this factor. 1.0 recovers a single shared rate;
    /// values below 1.0 slow the discriminator, which stabilizes the
    /// adversarial game.
    #[serde(default = "default_dc_lr_scale")]
    pub dc_lr_scale: f64,
    /// Alternating adversarial optimization (alignment only): `Some((d, g))`
    /// interleaves d-epoch classifier-training blocks (reversal off, encoder
    /// trained by reconstruction only) with g-epoch encoder-attack blocks
    /// (classifier frozen). `None` updates both jointly every step.
    #[serde(default)]
    pub dc_alternate: Option<(usize, usize)>,
    pub early_stop: Option<EarlyStopSpec>,
}

fn default_dc_lr_scale() -> f64 {
    1.0
}

impl PhaseConfig {
    pub fn pretrain_default() -> Self {
        Self {
            epochs: 30,
            batch_size: 256,
            lr_schedule: ScheduleSpec::warmup_cosine(1e-3, 0.1, 30),
            lambda: ScheduleSpec::constant(0.0, 30),
            alpha: ScheduleSpec::constant(1.0, 30),
            beta: 0.0,
            dc_lr_scale: 1.0,
            dc_alternate: None,
            early_stop: None,
        }
    }

    pub fn align_default() -> Self {
        Self {
            epochs: 40,
            batch_size: 256,
            lr_schedule: ScheduleSpec::warmup_cosine(5e-4, 0.1, 40),
            lambda: ScheduleSpec::sigmoid_ramp(0.05, 0.2, 40, 10.0),
            alpha: ScheduleSpec::constant(1.0, 40),
            beta: 0.0,
            dc_lr_scale: 1.0,
            dc_alternate: None,
            early_stop: Some(EarlyStopSpec {
                metric: "auc_dist".into(),
                patience: 5,
                min_delta: 0.005,
            }),
        }
    }

    pub fn finetune_default() -> Self {
        Self {
            epochs: 200,
            batch_size: 256,
            lr_schedule: ScheduleSpec::cosine(5e-4, 0.0, 200),
            lambda: ScheduleSpec::linear(0.0, 0.5, 200),
            alpha: ScheduleSpec::linear(0.5, 0.1, 200),
            beta: 1.0,
            dc_lr_scale: 1.0,
            dc_alternate: None,
            early_stop: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(JamlocError::Config("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(JamlocError::Config("batch_size must be positive".into()));
        }
        if !(self.dc_lr_scale.is_finite() && self.dc_lr_scale >= 0.0) {
            return Err(JamlocError::Config(
                "dc_lr_scale must be finite and non-negative".into(),
            ));
        }
        if matches!(self.dc_alternate, Some((d, g)) if d == 0 || g == 0) {
            return Err(JamlocError::Config(
                "dc_alternate block lengths must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Rescale the built-in schedules to a different epoch count.
    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self.lr_schedule.total_epochs = epochs;
        self.lambda.total_epochs = epochs;
        self.alpha.total_epochs = epochs;
        self
    }
}

/// One row of the per-epoch training history (`history.jsonl`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: Phase,
    pub epoch: usize,
    pub lr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_rec: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_dom: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_reg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_rec: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_ft: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout_err: Option<f64>,
}

impl EpochRecord {
    fn new(phase: Phase, epoch: usize, lr: f64) -> Self {
        Self {
            phase,
            epoch,
            lr,
            l_rec: None,
            l_dom: None,
            l_reg: None,
            val_rec: None,
            auc: None,
            lambda: None,
            alpha: None,
            lambda_ft: None,
            holdout_err: None,
        }
    }
}

/// Model + optimizer + position in the schedule; checkpointable.
pub struct TrainingState {
    pub model: DannModel,
    pub opt: Adam,
    pub phase: Phase,
    pub epoch: usize,
    pub seed: u64,
    pub history: Vec<EpochRecord>,
}

impl TrainingState {
    pub fn new(seed: u64, spec: AutoencoderSpec) -> Result<Self> {
        Ok(Self {
            model: DannModel::new(seed, spec)?,
            opt: Adam::new(1e-3),
            phase: Phase::Pretrain,
            epoch: 0,
            seed,
            history: Vec::new(),
        })
    }

    /// Reset position for a new phase (keeps model parameters, fresh Adam).
    fn enter_phase(&mut self, phase: Phase, lr: f64) {
        if self.phase != phase {
            self.phase = phase;
            self.epoch = 0;
            self.opt = Adam::new(lr);
        }
    }
}

fn phase_id(p: Phase) -> u64 {
    match p {
        Phase::Pretrain => 1,
        Phase::Align => 2,
        Phase::Finetune => 3,
    }
}

/// Deterministic per-(seed, phase, epoch) RNG stream.
fn stream_rng(seed: u64, phase: Phase, epoch: usize) -> ChaCha8Rng {
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(phase_id(phase).wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add((epoch as u64).wrapping_mul(0x94D0_49BB_1331_11EB));
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

fn shuffled(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

fn gather3(data: &Array3<f64>, idxs: &[usize]) -> Array3<f64> {
    let (_, c, l) = data.dim();
    let mut out = Array3::<f64>::zeros((idxs.len(), c, l));
    for (row, &i) in idxs.iter().enumerate() {
        out.index_axis_mut(Axis(0), row)
            .assign(&data.index_axis(Axis(0), i));
    }
    out
}

fn gather2(data: &Array2<f64>, idxs: &[usize]) -> Array2<f64> {
    let (_, d) = data.dim();
    let mut out = Array2::<f64>::zeros((idxs.len(), d));
    for (row, &i) in idxs.iter().enumerate() {
        out.row_mut(row).assign(&data.row(i));
    }
    out
}

fn check_finite(loss: f64, phase: Phase, epoch: usize) -> Result<()> {
    if !loss.is_finite() {
        return Err(JamlocError::Numerical(format!(
            "non-finite loss {loss} in {phase:?} epoch {epoch}; aborting with state dump"
        )));
    }
    Ok(())
}

/// Adam step over all non-frozen parameters.
fn optimizer_step(model: &mut DannModel, opt: &mut Adam, lr: f64, dc_lr: f64) {
    opt.begin_step();
    let frozen = model.frozen.clone();
    model.visit_params("", &mut |p| {
        if frozen.iter().any(|f| p.name.starts_with(f.as_str())) {
            return;
        }
        let is_dc = p.name.starts_with("dc");
        if is_dc && dc_lr == 0.0 {
            return; // frozen classifier block: leave weights and moments alone
        }
        opt.lr = if is_dc { dc_lr } else { lr };
        opt.update(p);
    });
    opt.lr = lr;
}

/// Eval-mode coordinate predictions.
pub fn predict_coords(model: &mut DannModel, x: &Array3<f64>) -> Array2<f64> {
    let (emb, _) = model.ae.encode(x, false, None);
    model.head.forward(&emb)
}

/// Eval-mode reconstruction loss (no noise).
pub fn eval_reconstruction(model: &mut DannModel, x: &Array3<f64>) -> f64 {
    let (_, featmap) = model.ae.encode(x, false, None);
    let recon = model.ae.decode(&featmap);
    loss_rec(&recon, x).expect("shapes match")
}

/// Eval-mode domain probabilities.
fn domain_scores(model: &mut DannModel, x: &Array3<f64>) -> Vec<f64> {
    let (emb, _) = model.ae.encode(x, false, None);
    let p = model.dc.forward(&emb, 0.0);
    p.column(0).to_vec()
}

// ---------------------------------------------------------------------------
// Phase 1: autoencoder pre-training
// ---------------------------------------------------------------------------

/// Denoising pre-training on unlabeled source tensors. `val` (if given) is an
/// eval-mode held-out slice recorded as `val_rec` each epoch.
pub fn run_pretrain(
    state: &mut TrainingState,
    train: &Array3<f64>,
    val: Option<&Array3<f64>>,
    cfg: &PhaseConfig,
) -> Result<()> {
    cfg.validate()?;
    if train.dim().0 == 0 {
        return Err(JamlocError::Invalid("pretrain: empty data".into()));
    }
    state.enter_phase(Phase::Pretrain, cfg.lr_schedule.value(0)?);
    let n = train.dim().0;
    let fl = state.model.ae.spec.stage_lengths()[2];
    for epoch in state.epoch..cfg.epochs {
        let lr = cfg.lr_schedule.value(epoch)?;
        let mut rng = stream_rng(state.seed, Phase::Pretrain, epoch);
        let order = shuffled(n, &mut rng);
        let mut total = 0.0;
        let mut batches = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let clean = gather3(train, chunk);
            let (_, featmap) = state.model.ae.encode(&clean, true, Some(&mut rng));
            let recon = state.model.ae.decode(&featmap);
            let (l, drecon) = loss_rec_grad(&recon, &clean)?;
            check_finite(l, Phase::Pretrain, epoch)?;
            state.model.zero_grad();
            state.model.ae.backward(Some(&drecon), None, fl);
            optimizer_step(&mut state.model, &mut state.opt, lr, lr * cfg.dc_lr_scale);
            total += l;
            batches += 1.0;
        }
        let mut rec = EpochRecord::new(Phase::Pretrain, epoch, lr);
        rec.l_rec = Some(total / batches);
        if let Some(v) = val {
            rec.val_rec = Some(eval_reconstruction(&mut state.model, v));
        }
        state.history.push(rec);
        state.epoch = epoch + 1;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Phase 2: joint adversarial alignment
// ---------------------------------------------------------------------------

/// Alignment result details beyond the state itself.
pub struct AlignOutcome {
    /// Domain AUC of the kept model. With early stopping configured this is
    /// the AUC at the restored best checkpoint, otherwise the last epoch's.
    pub final_auc: f64,
    pub stopped_early_at: Option<usize>,
    /// Epoch whose weights the state carries when checkpoint selection ran.
    pub best_epoch: Option<usize>,
}

/// Adversarial alignment on unlabeled source + target tensors. Reconstruction
/// loss is computed on target batches; domain BCE on the combined batch with
/// labels source 0 / target 1. The GRL scales the encoder-side domain
/// gradient by `-lambda`; the domain classifier itself receives the
/// unweighted BCE gradient.
pub fn run_align(
    state: &mut TrainingState,
    source: &Array3<f64>,
    target: &Array3<f64>,
    cfg: &PhaseConfig,
) -> Result<AlignOutcome> {
    cfg.validate()?;
    if state.phase == Phase::Finetune {
        return Err(JamlocError::Invalid(
            "align requires a pretrain (or resumed align) state".into(),
        ));
    }
    if source.dim().0 == 0 || target.dim().0 == 0 {
        return Err(JamlocError::Invalid("align: empty data".into()));
    }
    state.enter_phase(Phase::Align, cfg.lr_schedule.value(0)?);
    let ns = source.dim().0;
    let nt = target.dim().0;
    let fl = state.model.ae.spec.stage_lengths()[2];
    // Fixed evaluation slice for the per-epoch domain AUC.
    let n_eval_s = ns.min(256);
    let n_eval_t = nt.min(256);
    let eval_s = gather3(source, &(0..n_eval_s).collect::<Vec<_>>());
    let eval_t = gather3(target, &(0..n_eval_t).collect::<Vec<_>>());
    let eval_labels: Vec<u8> = std::iter::repeat(0u8)
        .take(n_eval_s)
        .chain(std::iter::repeat(1u8).take(n_eval_t))
        .collect();

    let half = (cfg.batch_size / 2).max(1);
    let mut best_metric = f64::INFINITY;
    let mut since_improve = 0usize;
    let mut final_auc = 0.5;
    let mut stopped_early_at = None;
    // Checkpoint selection: with early stopping configured, keep the weights
    // from the epoch whose eval AUC is closest to 0.5 (the alignment
    // criterion), mirroring the best-holdout restore in fine-tuning.
    let mut best_params: Option<std::collections::BTreeMap<String, Vec<f64>>> = None;
    let mut best_seen = f64::INFINITY;
    let mut best_auc = 0.5;
    let mut best_epoch = None;

    for epoch in state.epoch..cfg.epochs {
        let lr = cfg.lr_schedule.value(epoch)?;
        let mut lambda = cfg.lambda.value(epoch)?;
        let mut dc_lr = lr * cfg.dc_lr_scale;
        if let Some((d, g)) = cfg.dc_alternate {
            if epoch % (d + g) < d {
                lambda = 0.0; // classifier-training block
            } else {
                dc_lr = 0.0; // encoder-attack block
            }
        }
        let mut rng = stream_rng(state.seed, Phase::Align, epoch);
        let t_order = shuffled(nt, &mut rng);
        let s_order = shuffled(ns, &mut rng);
        let mut total_rec = 0.0;
        let mut total_dom = 0.0;
        let mut batches = 0.0;
        let mut s_cursor = 0usize;
        for t_chunk in t_order.chunks(half) {
            let s_chunk: Vec<usize> = (0..half.min(ns))
                .map(|k| s_order[(s_cursor + k) % ns])
                .collect();
            s_cursor = (s_cursor + s_chunk.len()) % ns;
            let nsb = s_chunk.len();
            let ntb = t_chunk.len();
            let x_t = gather3(target, t_chunk);
            let x_s = gather3(source, &s_chunk);
            let mut x = Array3::<f64>::zeros((nsb + ntb, x_t.dim().1, x_t.dim().2));
            x.slice_mut(ndarray::s![..nsb, .., ..]).assign(&x_s);
            x.slice_mut(ndarray::s![nsb.., .., ..]).assign(&x_t);

            let (emb, featmap) = state.model.ae.encode(&x, true, Some(&mut rng));
            let featmap_t = featmap.slice(ndarray::s![nsb.., .., ..]).to_owned();
            let recon_t = state.model.ae.decode(&featmap_t);
            let (l_rec, drecon) = loss_rec_grad(&recon_t, &x_t)?;

            let probs = state.model.dc.forward(&emb, lambda);
            let labels: Vec<f64> = std::iter::repeat(0.0)
                .take(nsb)
                .chain(std::iter::repeat(1.0).take(ntb))
                .collect();
            let (l_dom, dprob) = loss_dom_grad(&probs, &labels)?;
            check_finite(l_rec + l_dom, Phase::Align, epoch)?;

            state.model.zero_grad();
            let dfeat_t = state.model.ae.decoder.backward(&drecon);
            let demb = state.model.dc.backward(&dprob); // GRL applied
            let mut dfeat = mean_pool_backward(&demb, fl);
            dfeat
                .slice_mut(ndarray::s![nsb.., .., ..])
                .zip_mut_with(&dfeat_t, |a, b| *a += b);
            state.model.ae.encoder.backward(&dfeat);
            optimizer_step(&mut state.model, &mut state.opt, lr, dc_lr);
            total_rec += l_rec;
            total_dom += l_dom;
            batches += 1.0;
        }

        // Domain AUC on the fixed evaluation slice.
        let mut scores = domain_scores(&mut state.model, &eval_s);
        scores.extend(domain_scores(&mut state.model, &eval_t));
        let auc = crate::analysis::binary_auc(&scores, &eval_labels);
        final_auc = auc;

        let mut rec = EpochRecord::new(Phase::Align, epoch, lr);
        rec.l_rec = Some(total_rec / batches);
        rec.l_dom = Some(total_dom / batches);
        rec.auc = Some(auc);
        rec.lambda = Some(lambda);
        state.history.push(rec);
        state.epoch = epoch + 1;

        if let Some(es) = &cfg.early_stop {
            let metric = (auc - 0.5).abs();
            if metric < best_metric - es.min_delta {
                best_metric = metric;
                since_improve = 0;
            } else {
                since_improve += 1;
            }
            if metric < best_seen {
                best_seen = metric;
                best_params = Some(state.model.params_map());
                best_auc = auc;
                best_epoch = Some(epoch);
            }
            // never trigger before `patience` epochs have elapsed
            if since_improve >= es.patience && epoch + 1 > es.patience {
                stopped_early_at = Some(epoch);
                break;
            }
        }
    }
    if let Some(p) = best_params {
        state.model.load_params_map(&p)?;
        final_auc = best_auc;
    }
    Ok(AlignOutcome {
        final_auc,
        stopped_early_at,
        best_epoch,
    })
}

// ---------------------------------------------------------------------------
// Phase 3: supervised fine-tuning
// ---------------------------------------------------------------------------

pub struct FinetuneOutcome {
    pub best_holdout_err: f64,
    pub best_epoch: usize,
}

/// Supervised fine-tuning on labeled target data. Early encoder stages are
/// frozen; the domain classifier stays active (labels 0 through the GRL, per
/// the fine-tune domain term). The best checkpoint by hold-out mean Euclidean
/// error is restored at the end.
pub fn run_finetune(
    state: &mut TrainingState,
    x_labeled: &Array3<f64>,
    y_labeled: &Array2<f64>,
    x_holdout: &Array3<f64>,
    y_holdout: &Array2<f64>,
    cfg: &PhaseConfig,
) -> Result<FinetuneOutcome> {
    cfg.validate()?;
    if state.phase == Phase::Pretrain && state.epoch == 0 {
        return Err(JamlocError::Invalid(
            "finetune requires a trained state".into(),
        ));
    }
    if x_labeled.dim().0 == 0 {
        return Err(JamlocError::Invalid("finetune: no labeled targets".into()));
    }
    if x_labeled.dim().0 != y_labeled.dim().0 {
        return Err(JamlocError::Invalid("finetune: label count mismatch".into()));
    }
    state.enter_phase(Phase::Finetune, cfg.lr_schedule.value(0)?);
    state.model.apply_finetune_freeze();
    {
        // all-frozen guard
        let frozen = state.model.frozen.clone();
        let mut any_trainable = false;
        state.model.visit_params("", &mut |p| {
            if !frozen.iter().any(|f| p.name.starts_with(f.as_str())) {
                any_trainable = true;
            }
        });
        if !any_trainable {
            return Err(JamlocError::Invalid("finetune: all parameters frozen".into()));
        }
    }
    let n = x_labeled.dim().0;
    let fl = state.model.ae.spec.stage_lengths()[2];
    let mut best_err = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params = None;

    for epoch in state.epoch..cfg.epochs {
        let lr = cfg.lr_schedule.value(epoch)?;
        let alpha = cfg.alpha.value(epoch)?;
        let lambda_ft = cfg.lambda.value(epoch)?;
        let beta = cfg.beta;
        let mut rng = stream_rng(state.seed, Phase::Finetune, epoch);
        let order = shuffled(n, &mut rng);
        let (mut tot_rec, mut tot_reg, mut tot_dom, mut batches) = (0.0, 0.0, 0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size) {
            let x = gather3(x_labeled, chunk);
            let y = gather2(y_labeled, chunk);
            let (emb, featmap) = state.model.ae.encode(&x, true, Some(&mut rng));
            let recon = state.model.ae.decode(&featmap);
            let (l_rec, drecon) = loss_rec_grad(&recon, &x)?;
            let coords = state.model.head.forward(&emb);
            let (l_reg, dcoords) = loss_reg_grad(&coords, &y)?;
            let probs = state.model.dc.forward(&emb, lambda_ft);
            let labels = vec![0.0; chunk.len()];
            let (l_dom, dprob) = loss_dom_grad(&probs, &labels)?;
            let composite = loss_ft(l_rec, l_reg, l_dom, alpha, beta, lambda_ft);
            check_finite(composite, Phase::Finetune, epoch)?;

            state.model.zero_grad();
            let dfeat_dec = state.model.ae.decoder.backward(&(&drecon * alpha));
            let mut demb = state.model.head.backward(&(&dcoords * beta));
            demb += &state.model.dc.backward(&dprob);
            let mut dfeat = mean_pool_backward(&demb, fl);
            dfeat += &dfeat_dec;
            state.model.ae.encoder.backward(&dfeat);
            optimizer_step(&mut state.model, &mut state.opt, lr, lr * cfg.dc_lr_scale);
            tot_rec += l_rec;
            tot_reg += l_reg;
            tot_dom += l_dom;
            batches += 1.0;
        }

        let preds = predict_coords(&mut state.model, x_holdout);
        let err = mean_euclid(&preds, y_holdout);
        if err < best_err {
            best_err = err;
            best_epoch = epoch;
            best_params = Some(state.model.params_map());
        }

        let mut rec = EpochRecord::new(Phase::Finetune, epoch, lr);
        rec.l_rec = Some(tot_rec / batches);
        rec.l_reg = Some(tot_reg / batches);
        rec.l_dom = Some(tot_dom / batches);
        rec.alpha = Some(alpha);
        rec.lambda_ft = Some(lambda_ft);
        rec.holdout_err = Some(err);
        state.history.push(rec);
        state.epoch = epoch + 1;
    }
    if let Some(p) = best_params {
        state.model.load_params_map(&p)?;
    }
    Ok(FinetuneOutcome {
        best_holdout_err: best_err,
        best_epoch,
    })
}

pub fn mean_euclid(preds: &Array2<f64>, truths: &Array2<f64>) -> f64 {
    let n = preds.dim().0;
    let mut total = 0.0;
    for i in 0..n {
        let dx = preds[[i, 0]] - truths[[i, 0]];
        let dy = preds[[i, 1]] - truths[[i, 1]];
        total += (dx * dx + dy * dy).sqrt();
    }
    total / n as f64
}
