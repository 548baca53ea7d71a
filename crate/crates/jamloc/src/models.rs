//! Network definitions: the ConvNeXt-style 1-D denoising autoencoder, the
//! gradient-reversal domain classifier, the linear regression head, and the
//! SimpleNN tabular baseline.

use ndarray::{Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};

use crate::error::{JamlocError, Result};
use crate::nn::{
    add_gaussian_noise, mean_pool, mean_pool_backward, Conv1d, ConvTranspose1d, Gelu, Grl,
    LayerNorm, Linear, ParamRef, Params, Relu, Sigmoid,
};

/// Where denoising noise is injected during encoder training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseMode {
    InputOnly,
    AllStages,
}

/// Architecture hyperparameters of the autoencoder.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AutoencoderSpec {
    pub in_channels: usize,
    pub taps: usize,
    pub stage_channels: [usize; 3],
    pub blocks_per_stage: usize,
    pub convnext_kernel: usize,
    pub expansion: usize,
    pub noise_sigma: f64,
    pub noise_mode: NoiseMode,
    pub embedding_dim: usize,
}

impl Default for AutoencoderSpec {
    fn default() -> Self {
        Self {
            in_channels: 3,
            taps: 100,
            stage_channels: [32, 64, 128],
            blocks_per_stage: 2,
            convnext_kernel: 7,
            expansion: 4,
            noise_sigma: 0.6,
            noise_mode: NoiseMode::AllStages,
            embedding_dim: 128,
        }
    }
}

impl AutoencoderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim != self.stage_channels[2] {
            return Err(JamlocError::Config(
                "embedding_dim must equal the last stage channel count".into(),
            ));
        }
        if self.noise_sigma < 0.0 {
            return Err(JamlocError::Config("noise_sigma must be >= 0".into()));
        }
        Ok(())
    }

    /// Stable hash of the architecture, stored in checkpoints.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Encoder stage lengths for the configured tap count: 100 -> 50 -> 25 -> 13.
    pub fn stage_lengths(&self) -> [usize; 3] {
        let l0 = crate::nn::conv_out_len(self.taps, 4, 2, 1);
        let l1 = crate::nn::conv_out_len(l0, 3, 2, 1);
        let l2 = crate::nn::conv_out_len(l1, 3, 2, 1);
        [l0, l1, l2]
    }
}

// ---------------------------------------------------------------------------
// ConvNeXt residual block
// ---------------------------------------------------------------------------

#[derive(Clone, Serialize, Deserialize)]
pub struct ConvNextBlock {
    dw: Conv1d,
    ln: LayerNorm,
    pw1: Conv1d,
    gelu: Gelu,
    pw2: Conv1d,
}

impl ConvNextBlock {
    pub fn new(rng: &mut ChaCha8Rng, c: usize, kernel: usize, expansion: usize) -> Self {
        let hidden = c * expansion;
        Self {
            dw: Conv1d::depthwise(rng, c, kernel, kernel / 2),
            ln: LayerNorm::new(c),
            pw1: Conv1d::new(rng, c, hidden, 1, 1, 0, 1),
            gelu: Gelu::default(),
            pw2: Conv1d::new(rng, hidden, c, 1, 1, 0, 1),
        }
    }

    pub fn forward(&mut self, x: &Array3<f64>) -> Array3<f64> {
        let mut t = self.dw.forward(x);
        t = self.ln.forward(&t);
        t = self.pw1.forward(&t);
        t = self.gelu.forward(&t);
        t = self.pw2.forward(&t);
        t + x
    }

    pub fn backward(&mut self, dy: &Array3<f64>) -> Array3<f64> {
        let mut d = self.pw2.backward(dy);
        d = self.gelu.backward(&d);
        d = self.pw1.backward(&d);
        d = self.ln.backward(&d);
        d = self.dw.backward(&d);
        d + dy
    }
}

impl Params for ConvNextBlock {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamRef<'_>)) {
        self.dw.visit_params(&format!("{prefix}.dw"), f);
        self.ln.visit_params(&format!("{prefix}.ln"), f);
        self.pw1.visit_params(&format!("{prefix}.pw1"), f);
        self.pw2.visit_params(&format!("{prefix}.pw2"), f);
    }
}

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

#[derive(Clone, Serialize, Deserialize)]
pub struct Encoder {
    pub noise_sigma: f64,
    pub noise_mode: NoiseMode,
    downs: Vec<Conv1d>,
    stages: Vec<Vec<ConvNextBlock>>,
}

impl Encoder {
    pub fn new(rng: &mut ChaCha8Rng, spec: &AutoencoderSpec) -> Self {
        let [c0, c1, c2] = spec.stage_channels;
        let downs = vec![
            Conv1d::new(rng, spec.in_channels, c0, 4, 2, 1, 1),
            Conv1d::new(rng, c0, c1, 3, 2, 1, 1),
            Conv1d::new(rng, c1, c2, 3, 2, 1, 1),
        ];
        let stages = spec
            .stage_channels
            .iter()
            .map(|&c| {
                (0..spec.blocks_per_stage)
                    .map(|_| ConvNextBlock::new(rng, c, spec.convnext_kernel, spec.expansion))
                    .collect()
            })
            .collect();
        Self {
            noise_sigma: spec.noise_sigma,
            noise_mode: spec.noise_mode,
            downs,
            stages,
        }
    }

    /// Returns the feature map `[B, 128, L]`. In training mode Gaussian noise
    /// is added to the stage inputs; noise has unit gradient so backward is
    /// unaffected.
    pub fn forward(
        &mut self,
        x: &Array3<f64>,
        train: bool,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Array3<f64> {
        let mut h = x.clone();
        let mut rng = rng;
        for s in 0..self.downs.len() {
            if train && self.noise_sigma > 0.0 {
                let inject = s == 0 || self.noise_mode == NoiseMode::AllStages;
                if inject {
                    let r = rng.as_deref_mut().expect("training forward needs an rng");
                    h = add_gaussian_noise(&h, self.noise_sigma, r);
                }
            }
            h = self.downs[s].forward(&h);
            for blk in &mut self.stages[s] {
                h = blk.forward(&h);
            }
        }
        h
    }

    pub fn backward(&mut self, dfeat: &Array3<f64>) -> Array3<f64> {
        let mut d = dfeat.clone();
        for s in (0..self.downs.len()).rev() {
            for blk in self.stages[s].iter_mut().rev() {
                d = blk.backward(&d);
            }
            d = self.downs[s].backward(&d);
        }
        d
    }
}

impl Params for Encoder {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamRef<'_>)) {
        for (i, down) in self.downs.iter_mut().enumerate() {
            down.visit_params(&format!("{prefix}.down{i}"), f);
        }
        for (s, stage) in self.stages.iter_mut().enumerate() {
            for (b, blk) in stage.iter_mut().enumerate() {
                blk.visit_params(&format!("{prefix}.stage{s}.block{b}"), f);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Decoder
// ---------------------------------------------------------------------------

#[derive(Clone, Serialize, Deserialize)]
pub struct Decoder {
    pre_blocks: Vec<ConvNextBlock>,
    up1: ConvTranspose1d,
    blocks1: Vec<ConvNextBlock>,
    up2: ConvTranspose1d,
    blocks2: Vec<ConvNextBlock>,
    up3: ConvTranspose1d,
    final_conv: Conv1d,
}

impl Decoder {
    pub fn new(rng: &mut ChaCha8Rng, spec: &AutoencoderSpec) -> Self {
        let [c0, c1, c2] = spec.stage_channels;
        let mk_blocks = |rng: &mut ChaCha8Rng, c: usize| -> Vec<ConvNextBlock> {
            (0..spec.blocks_per_stage)
                .map(|_| ConvNextBlock::new(rng, c, spec.convnext_kernel, spec.expansion))
                .collect()
        };
        // Length trace mirrors the encoder: 13 -> 25 -> 50 -> 100.
        Self {
            pre_blocks: mk_blocks(rng, c2),
            up1: ConvTranspose1d::new(rng, c2, c1, 3, 2, 1, 0),
            blocks1: mk_blocks(rng, c1),
            up2: ConvTranspose1d::new(rng, c1, c0, 3, 2, 1, 1),
            blocks2: mk_blocks(rng, c0),
            up3: ConvTranspose1d::new(rng, c0, spec.in_channels, 4, 2, 1, 0),
            final_conv: Conv1d::new(rng, spec.in_channels, spec.in_channels, 3, 1, 1, 1),
        }
    }

    pub fn forward(&mut self, featmap: &Array3<f64>) -> Array3<f64> {
        let mut h = featmap.clone();
        for blk in &mut self.pre_blocks {
            h = blk.forward(&h);
        }
        h = self.up1.forward(&h);
        for blk in &mut self.blocks1 {
            h = blk.forward(&h);
        }
        h = self.up2.forward(&h);
        for blk in &mut self.blocks2 {
            h = blk.forward(&h);
        }
        h = self.up3.forward(&h);
        self.final_conv.forward(&h)
    }

    pub fn backward(&mut self, drecon: &Array3<f64>) -> Array3<f64> {
        let mut d = self.final_conv.backward(drecon);
        d = self.up3.backward(&d);
        for blk in self.blocks2.iter_mut().rev() {
            d = blk.backward(&d);
        }
        d = self.up2.backward(&d);
        for blk in self.blocks1.iter_mut().rev() {
            d = blk.backward(&d);
        }
        d = self.up1.backward(&d);
        for blk in self.pre_blocks.iter_mut().rev() {
            d = blk.backward(&d);
        }
        d
    }
}

impl Params for Decoder {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamRef<'_>)) {
        for (b, blk) in self.pre_blocks.iter_mut().enumerate() {
            blk.visit_params(&format!("{prefix}.pre.block{b}"), f);
        }
        self.up1.visit_params(&format!("{prefix}.up1"), f);
        for (b, blk) in self.blocks1.iter_mut().enumerate() {
            blk.visit_params(&format!("{prefix}.s1.block{b}"), f);
        }
        self.up2.visit_params(&format!("{prefix}.up2"), f);
        for (b, blk) in self.blocks2.iter_mut().enumerate() {
            blk.visit_params(&format!("{prefix}.s2.block{b}"), f);
        }
        self.up3.visit_params(&format!("{prefix}.up3"), f);
        self.final_conv
            .visit_params(&format!("{prefix}.final_conv"), f);
    }
}

// ---------------------------------------------------------------------------
// Autoencoder
// ---------------------------------------------------------------------------

#[derive(Clone, Serialize, Deserialize)]
pub struct Autoencoder {
    pub spec: AutoencoderSpec,
    pub encoder: Encoder,
    pub decoder: Decoder,
}

impl Autoencoder {
    pub fn new(rng: &mut ChaCha8Rng, spec: AutoencoderSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            encoder: Encoder::new(rng, &spec),
            decoder: Decoder::new(rng, &spec),
            spec,
        })
    }

    /// Feature map plus pooled embedding.
    pub fn encode(
        &mut self,
        x: &Array3<f64>,
        train: bool,
        rng: Option<&mut ChaCha8Rng>,
    ) -> (Array2<f64>, Array3<f64>) {
        assert_eq!(x.dim().1, self.spec.in_channels, "bad input channels");
        assert_eq!(x.dim().2, self.spec.taps, "bad input length");
        let featmap = self.encoder.forward(x, train, rng);
        (mean_pool(&featmap), featmap)
    }

    pub fn decode(&mut self, featmap: &Array3<f64>) -> Array3<f64> {
        self.decoder.forward(featmap)
    }

    /// Backward through the decoder and encoder given the reconstruction
    /// gradient and the embedding gradient (from the heads).
    pub fn backward(
        &mut self,
        drecon: Option<&Array3<f64>>,
        dembedding: Option<&Array2<f64>>,
        featmap_len: usize,
    ) -> Array3<f64> {
        let mut dfeat = Array3::<f64>::zeros((0, 0, 0));
        let mut have = false;
        if let Some(dr) = drecon {
            dfeat = self.decoder.backward(dr);
            have = true;
        }
        if let Some(de) = dembedding {
            let dpool = mean_pool_backward(de, featmap_len);
            if have {
                dfeat += &dpool;
            } else {
                dfeat = dpool;
            }
        }
        self.encoder.backward(&dfeat)
    }
}

impl Params for Autoencoder {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamRef<'_>)) {
        self.encoder.visit_params(&format!("{prefix}enc"), f);
        self.decoder.visit_params(&format!("{prefix}dec"), f);
    }
}

// ---------------------------------------------------------------------------
// Domain classifier (through a GRL)
// ---------------------------------------------------------------------------

#[derive(Clone, Serialize, Deserialize)]
pub struct DomainClassifier {
    pub grl: Grl,
    fc1: Linear,
    r1: Relu,
    fc2: Linear,
    r2: Relu,
    fc3: Linear,
    sig: Sigmoid,
}

impl DomainClassifier {
    pub fn new(rng: &mut ChaCha8Rng, in_dim: usize) -> Self {
        Self {
            grl: Grl::new(0.0),
            fc1: Linear::new(rng, in_dim, 128),
            r1: Relu::default(),
            fc2: Linear::new(rng, 128, 64),
            r2: Relu::default(),
            fc3: Linear::new(rng, 64, 1),
            sig: Sigmoid::default(),
        }
    }

    /// Domain probability in (0, 1) for each embedding row.
    pub fn forward(&mut self, embedding: &Array2<f64>, lambda: f64) -> Array2<f64> {
        self.grl.set_lambda(lambda);
        let mut h = self.grl.forward(embedding);
        h = self.fc1.forward(&h);
        h = self.r1.forward(&h);
        h = self.fc2.forward(&h);
        h = self.r2.forward(&h);
        h = self.fc3.forward(&h);
        self.sig.forward(&h)
    }

    /// Gradient w.r.t. the embedding, already sign-flipped and scaled by the
    /// GRL.
    pub fn backward(&mut self, dprob: &Array2<f64>) -> Array2<f64> {
        let mut d = self.sig.backward(dprob);
        d = self.fc3.backward(&d);
        d = self.r2.backward(&d);
        d = self.fc2.backward(&d);
        d = self.r1.backward(&d);
        d = self.fc1.backward(&d);
        self.grl.backward(&d)
    }
}

impl Params for DomainClassifier {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamRef<'_>)) {
        self.fc1.visit_params(&format!("{prefix}.fc1"), f);
        self.fc2.visit_params(&format!("{prefix}.fc2"), f);
        self.fc3.visit_params(&format!("{prefix}.fc3"), f);
    }
}

// ---------------------------------------------------------------------------
// Regression head
// ---------------------------------------------------------------------------

/// Single affine map from the embedding to (x_cm, y_cm).
#[derive(Clone, Serialize, Deserialize)]
pub struct RegressionHead {
    fc: Linear,
}

impl RegressionHead {
    pub fn new(rng: &mut ChaCha8Rng, in_dim: usize) -> Self {
        Self {
            fc: Linear::new(rng, in_dim, 2),
        }
    }
    pub fn forward(&mut self, embedding: &Array2<f64>) -> Array2<f64> {
        self.fc.forward(embedding)
    }
    pub fn backward(&mut self, dcoords: &Array2<f64>) -> Array2<f64> {
        self.fc.backward(dcoords)
    }
}

impl Params for RegressionHead {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamRef<'_>)) {
        self.fc.visit_params(&format!("{prefix}.fc"), f);
    }
}

// ---------------------------------------------------------------------------
// Full DANN model
// ---------------------------------------------------------------------------

#[derive(Clone, Serialize, Deserialize)]
pub struct DannModel {
    pub ae: Autoencoder,
    pub dc: DomainClassifier,
    pub head: RegressionHead,
    /// Parameter-name prefixes excluded from optimizer updates.
    pub frozen: BTreeSet<String>,
}

impl DannModel {
    pub fn new(seed: u64, spec: AutoencoderSpec) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let emb = spec.embedding_dim;
        Ok(Self {
            ae: Autoencoder::new(&mut rng, spec)?,
            dc: DomainClassifier::new(&mut rng, emb),
            head: RegressionHead::new(&mut rng, emb),
            frozen: BTreeSet::new(),
        })
    }

    pub fn is_frozen(&self, name: &str) -> bool {
        self.frozen.iter().any(|p| name.starts_with(p.as_str()))
    }

    /// Fine-tuning freeze set: everything in the encoder except its final
    /// stage stays frozen; decoder, final conv, heads and domain classifier
    /// remain trainable.
    pub fn apply_finetune_freeze(&mut self) {
        self.frozen = ["ae.enc.down0", "ae.enc.down1", "ae.enc.stage0", "ae.enc.stage1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    }

    pub fn clear_freeze(&mut self) {
        self.frozen.clear();
    }

    /// Snapshot all parameters by name.
    pub fn params_map(&mut self) -> BTreeMap<String, Vec<f64>> {
        let mut map = BTreeMap::new();
        self.visit_params("", &mut |p| {
            map.insert(p.name.clone(), p.w.to_vec());
        });
        map
    }

    pub fn load_params_map(&mut self, map: &BTreeMap<String, Vec<f64>>) -> Result<()> {
        let mut missing = Vec::new();
        let mut bad = Vec::new();
        self.visit_params("", &mut |p| match map.get(&p.name) {
            Some(v) if v.len() == p.w.len() => p.w.copy_from_slice(v),
            Some(_) => bad.push(p.name.clone()),
            None => missing.push(p.name.clone()),
        });
        if !missing.is_empty() || !bad.is_empty() {
            return Err(JamlocError::Checkpoint(format!(
                "parameter map mismatch (missing: {missing:?}, wrong size: {bad:?})"
            )));
        }
        Ok(())
    }
}

impl Params for DannModel {
    fn visit_params(&mut self, _prefix: &str, f: &mut dyn FnMut(ParamRef<'_>)) {
        self.ae.visit_params("ae.", f);
        self.dc.visit_params("dc", f);
        self.head.visit_params("head", f);
    }
}

// ---------------------------------------------------------------------------
// SimpleNN tabular baseline
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimpleNnHead {
    Classify(usize),
    Regress2,
}

/// Fully-connected residual network over the 11 diagnostic features:
/// stem affine -> two residual blocks (affine + ReLU + skip) -> head.
#[derive(Clone, Serialize, Deserialize)]
pub struct SimpleNn {
    pub head_kind: SimpleNnHead,
    stem: Linear,
    b1: Linear,
    r1: Relu,
    b2: Linear,
    r2: Relu,
    head: Linear,
}

impl SimpleNn {
    pub fn new(seed: u64, in_dim: usize, head_kind: SimpleNnHead) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let width = 128;
        let out = match head_kind {
            SimpleNnHead::Classify(n) => n,
            SimpleNnHead::Regress2 => 2,
        };
        Self {
            head_kind,
            stem: Linear::new(&mut rng, in_dim, width),
            b1: Linear::new(&mut rng, width, width),
            r1: Relu::default(),
            b2: Linear::new(&mut rng, width, width),
            r2: Relu::default(),
            head: Linear::new(&mut rng, width, out),
        }
    }

    pub fn forward(&mut self, x: &Array2<f64>) -> Array2<f64> {
        let h0 = self.stem.forward(x);
        let h1 = &h0 + &self.r1.forward(&self.b1.forward(&h0));
        let h2 = &h1 + &self.r2.forward(&self.b2.forward(&h1));
        self.head.forward(&h2)
    }

    pub fn backward(&mut self, dy: &Array2<f64>) -> Array2<f64> {
        let dh2 = self.head.backward(dy);
        let dh1 = &dh2 + &self.b2.backward(&self.r2.backward(&dh2));
        let dh0 = &dh1 + &self.b1.backward(&self.r1.backward(&dh1));
        self.stem.backward(&dh0)
    }
}

impl Params for SimpleNn {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamRef<'_>)) {
        self.stem.visit_params(&format!("{prefix}stem"), f);
        self.b1.visit_params(&format!("{prefix}b1"), f);
        self.b2.visit_params(&format!("{prefix}b2"), f);
        self.head.visit_params(&format!("{prefix}head"), f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use rand::Rng;

    #[test]
    fn encoder_shapes() {
        let spec = AutoencoderSpec::default();
        assert_eq!(spec.stage_lengths(), [50, 25, 13]);
        let mut model = DannModel::new(0, spec).unwrap();
        let x = Array3::<f64>::zeros((2, 3, 100));
        let (emb, featmap) = model.ae.encode(&x, false, None);
        assert_eq!(emb.dim(), (2, 128));
        assert_eq!(featmap.dim(), (2, 128, 13));
        let recon = model.ae.decode(&featmap);
        assert_eq!(recon.dim(), (2, 3, 100));
        assert!(recon.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn eval_mode_is_deterministic_and_batch_constant() {
        let mut model = DannModel::new(1, AutoencoderSpec::default()).unwrap();
        let x = Array3::<f64>::zeros((3, 3, 100));
        let (e1, _) = model.ae.encode(&x, false, None);
        let (e2, _) = model.ae.encode(&x, false, None);
        assert_eq!(e1, e2);
        // zero input: all rows identical (bias-driven constant)
        for b in 1..3 {
            for c in 0..128 {
                assert_eq!(e1[[0, c]], e1[[b, c]]);
            }
        }
    }

    #[test]
    fn autoencoder_param_count_near_paper() {
        let mut model = DannModel::new(0, AutoencoderSpec::default()).unwrap();
        let n = model.ae.param_count();
        let target = 782_211.0;
        assert!(
            (n as f64 - target).abs() / target <= 0.10,
            "autoencoder params {n} not within 10% of 782211"
        );
    }

    #[test]
    fn domain_classifier_param_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut dc = DomainClassifier::new(&mut rng, 128);
        // 128*128+128 + 128*64+64 + 64*1+1
        assert_eq!(dc.param_count(), 128 * 128 + 128 + 128 * 64 + 64 + 64 + 1);
    }

    #[test]
    fn regression_head_param_count_and_constant_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut head = RegressionHead::new(&mut rng, 128);
        assert_eq!(head.param_count(), 128 * 2 + 2);
        head.visit_params("", &mut |p| {
            if p.name.ends_with(".w") {
                p.w.iter_mut().for_each(|v| *v = 0.0);
            } else {
                p.w.copy_from_slice(&[150.0, 250.0]);
            }
        });
        let emb = Array2::from_shape_fn((4, 128), |_| 0.37);
        let out = head.forward(&emb);
        for b in 0..4 {
            assert_eq!(out[[b, 0]], 150.0);
            assert_eq!(out[[b, 1]], 250.0);
        }
    }

    #[test]
    fn domain_classifier_outputs_in_unit_interval_and_half_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut dc = DomainClassifier::new(&mut rng, 128);
        let emb = Array2::from_shape_fn((8, 128), |_| rng.gen_range(-2.0..2.0));
        let p = dc.forward(&emb, 0.1);
        assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
        // zero weights and biases -> sigmoid(0) = 0.5 exactly
        dc.visit_params("", &mut |pr| pr.w.iter_mut().for_each(|v| *v = 0.0));
        let p = dc.forward(&emb, 0.1);
        assert!(p.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn grl_scales_embedding_gradient_linearly() {
        // grad(lambda = 0.3) must equal 1.5 x grad(lambda = 0.2) elementwise.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut dc = DomainClassifier::new(&mut rng, 16);
        let emb = Array2::from_shape_fn((4, 16), |_| rng.gen_range(-1.0..1.0));
        let mut grad_for = |lambda: f64| {
            let p = dc.forward(&emb, lambda);
            // BCE gradient w.r.t. probability, labels = 1
            let dp = p.mapv(|v| (v - 1.0) / (v * (1.0 - v)) / 4.0);
            dc.backward(&dp)
        };
        let g2 = grad_for(0.2);
        let g3 = grad_for(0.3);
        for (a, b) in g3.iter().zip(g2.iter()) {
            assert!((a - 1.5 * b).abs() < 1e-6, "{a} vs {}", 1.5 * b);
        }
    }

    #[test]
    fn simplenn_zero_blocks_reduce_to_stem_head() {
        let mut nn = SimpleNn::new(0, 11, SimpleNnHead::Regress2);
        let x = Array2::from_shape_fn((3, 11), |(i, j)| (i + j) as f64 * 0.1);
        nn.visit_params("", &mut |p| {
            if p.name.starts_with("b1") || p.name.starts_with("b2") {
                p.w.iter_mut().for_each(|v| *v = 0.0);
            }
        });
        let full = nn.forward(&x);
        // stem + head only
        let mut stem_head = nn.clone();
        let h0 = stem_head.stem.forward(&x);
        let direct = stem_head.head.forward(&h0);
        assert_eq!(full, direct);
    }

    #[test]
    fn simplenn_classify_shape() {
        let mut nn = SimpleNn::new(0, 11, SimpleNnHead::Classify(52));
        let x = Array2::<f64>::zeros((5, 11));
        assert_eq!(nn.forward(&x).dim(), (5, 52));
    }

    #[test]
    fn regress_affine_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut head = RegressionHead::new(&mut rng, 8);
        let e1 = Array2::from_shape_fn((1, 8), |_| rng.gen_range(-1.0..1.0));
        let e2 = Array2::from_shape_fn((1, 8), |_| rng.gen_range(-1.0..1.0));
        let (a, b) = (0.7, -1.3);
        let combo = head.forward(&(&e1 * a + &e2 * b));
        let y1 = head.forward(&e1);
        let y2 = head.forward(&e2);
        let bias = head.forward(&Array2::zeros((1, 8)));
        let expect = &y1 * a + &y2 * b - &bias * (a + b - 1.0);
        for (u, v) in combo.iter().zip(expect.iter()) {
            assert!((u - v).abs() < 1e-9);
        }
    }
}
