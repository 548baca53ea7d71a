//! Acceptance gate: one test per criterion, each printing a single
//! PASS / FAIL / SKIP line. Run with `--nocapture` to see the summary lines
//! even when everything passes.

mod common;

use std::collections::BTreeMap;

use jamloc::analysis;
use jamloc::dataset::{self, grid_positions, Domain, SynthConfig};
use jamloc::models::{AutoencoderSpec, DannModel};
use jamloc::nn::{Grl, Linear, Params, Sigmoid};
use jamloc::training::losses::{loss_adapt, loss_dom, loss_dom_grad, loss_ft, loss_rec, loss_reg};
use jamloc::training::{run_pretrain, PhaseConfig, ScheduleSpec, TrainingState};
use ndarray::{array, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, desc: &str, result: Result<(), String>) {
    match &result {
        Ok(()) => println!("[ACCEPTANCE {n}] PASS — {desc}"),
        Err(e) => println!("[ACCEPTANCE {n}] FAIL — {desc}: {e}"),
    }
    if let Err(e) = result {
        panic!("acceptance criterion {n} failed: {e}");
    }
}

fn check(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

// ---------------------------------------------------------------------------
// 1. GRL correctness
// ---------------------------------------------------------------------------

#[test]
fn acceptance_1_grl_correctness() {
    let start = std::time::Instant::now();
    let result = (|| -> Result<(), String> {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((3, 4), |_| rng.gen_range(-1.0..1.0));
        let labels = [1.0, 0.0, 1.0];
        let lambda = 0.3;

        // mini encoder -> GRL -> classifier -> sigmoid -> BCE
        let forward_loss = |enc: &mut Linear, cls: &mut Linear, sig: &mut Sigmoid| -> f64 {
            let e = enc.forward(&x);
            // GRL forward is the identity, so the scalar loss ignores lambda
            let p = sig.forward(&cls.forward(&e));
            loss_dom(&p, &labels).unwrap()
        };
        let analytic_grad = |lam: f64| -> Vec<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mut enc = Linear::new(&mut rng, 4, 8);
            let mut cls = Linear::new(&mut rng, 8, 1);
            let mut sig = Sigmoid::default();
            let grl = Grl::new(lam);
            let e = enc.forward(&x);
            let p = sig.forward(&cls.forward(&grl.forward(&e)));
            let (_, dp) = loss_dom_grad(&p, &labels).unwrap();
            enc.zero_grad();
            cls.zero_grad();
            let de = grl.backward(&cls.backward(&sig.backward(&dp)));
            enc.backward(&de);
            let mut g = Vec::new();
            enc.visit_params("enc", &mut |p| {
                if p.name.ends_with(".w") {
                    g.extend_from_slice(p.g);
                }
            });
            g
        };

        // central finite differences along the identity path
        let mut rng2 = ChaCha8Rng::seed_from_u64(7);
        let mut enc = Linear::new(&mut rng2, 4, 8);
        let mut cls = Linear::new(&mut rng2, 8, 1);
        let mut sig = Sigmoid::default();
        let h = 1e-6;
        let mut fd = Vec::new();
        let n_w = {
            let mut n = 0;
            enc.visit_params("enc", &mut |p| {
                if p.name.ends_with(".w") {
                    n = p.w.len();
                }
            });
            n
        };
        for i in 0..n_w {
            let mut eval_at = |delta: f64| -> f64 {
                enc.visit_params("enc", &mut |p| {
                    if p.name.ends_with(".w") {
                        p.w[i] += delta;
                    }
                });
                let l = forward_loss(&mut enc, &mut cls, &mut sig);
                enc.visit_params("enc", &mut |p| {
                    if p.name.ends_with(".w") {
                        p.w[i] -= delta;
                    }
                });
                l
            };
            fd.push((eval_at(h) - eval_at(-h)) / (2.0 * h));
        }

        let g_lambda = analytic_grad(lambda);
        check(g_lambda.len() == fd.len(), "gradient length mismatch".into())?;
        for (i, (a, f)) in g_lambda.iter().zip(&fd).enumerate() {
            let expect = -lambda * f;
            let denom = expect.abs().max(1e-6);
            check(
                (a - expect).abs() / denom < 1e-4,
                format!("w[{i}]: analytic {a} vs -lambda*fd {expect}"),
            )?;
        }
        // linearity in lambda: grad(0.3) = 1.5 * grad(0.2)
        let g02 = analytic_grad(0.2);
        for (a, b) in g_lambda.iter().zip(&g02) {
            check((a - 1.5 * b).abs() <= 1e-12 * a.abs().max(1.0), format!("lambda linearity: {a} vs {b}"))?;
        }
        check(
            start.elapsed().as_secs() < 10,
            format!("took {:?}", start.elapsed()),
        )
    })();
    report(1, "GRL gradients = -lambda x identity path, FD-checked", result);
}

// ---------------------------------------------------------------------------
// 2. Loss equation suite
// ---------------------------------------------------------------------------

#[test]
fn acceptance_2_loss_equations() {
    let result = (|| -> Result<(), String> {
        // hand-computed examples
        let zeros = Array3::<f64>::zeros((1, 3, 100));
        let ones = Array3::<f64>::ones((1, 3, 100));
        let lr = loss_rec(&ones, &zeros).map_err(|e| e.to_string())?;
        check((lr - 300.0).abs() < 1e-9, format!("loss_rec 300 vs {lr}"))?;
        let half = Array2::from_elem((2, 1), 0.5);
        let ld = loss_dom(&half, &[0.0, 1.0]).map_err(|e| e.to_string())?;
        check((ld - (2.0f64).ln()).abs() < 1e-9, format!("loss_dom ln2 vs {ld}"))?;
        let preds = array![[1.0, 2.0], [3.0, 4.0]];
        let truths = array![[0.0, 0.0], [3.0, 4.0]];
        let lg = loss_reg(&preds, &truths).map_err(|e| e.to_string())?;
        check((lg - 2.5).abs() < 1e-9, format!("loss_reg 2.5 vs {lg}"))?;
        check(
            (loss_adapt(1.0, 0.25, 0.2) - 1.05).abs() < 1e-9,
            "loss_adapt example".into(),
        )?;
        // composition linearity over 100 random tuples
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let (a, b, c) = (
                rng.gen_range(0.0..10.0),
                rng.gen_range(0.0..10.0),
                rng.gen_range(0.0..10.0),
            );
            let (al, be, la) = (
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
            );
            check(
                (loss_adapt(a, b, la) - (a + la * b)).abs() < 1e-12,
                "loss_adapt linearity".into(),
            )?;
            check(
                (loss_ft(a, b, c, al, be, la) - (al * a + be * b + la * c)).abs() < 1e-12,
                "loss_ft linearity".into(),
            )?;
        }
        Ok(())
    })();
    report(2, "loss equations reproduce hand-computed examples", result);
}

// ---------------------------------------------------------------------------
// 3. Metrics oracle
// ---------------------------------------------------------------------------

#[test]
fn acceptance_3_metrics_oracle() {
    let result = (|| -> Result<(), String> {
        let t = Array2::<f64>::zeros((5, 2));
        let p = array![[10.0, 0.0], [20.0, 0.0], [30.0, 0.0], [40.0, 0.0], [50.0, 0.0]];
        let m = analysis::localization_metrics(&p, &t).map_err(|e| e.to_string())?;
        check(m.mean_err == 30.0, format!("mean {}", m.mean_err))?;
        check(m.med_err == 30.0, format!("med {}", m.med_err))?;
        check(m.frac_within_30cm == 0.6, format!("frac {}", m.frac_within_30cm))?;
        check(m.p90_err == 46.0, format!("p90 {}", m.p90_err))?;
        let t2 = array![[10.0, 20.0], [30.0, 40.0], [50.0, 60.0]];
        let m2 = analysis::localization_metrics(&t2, &t2).map_err(|e| e.to_string())?;
        check(m2.r2_x == 1.0 && m2.r2_y == 1.0, "perfect R^2".into())
    })();
    report(3, "localization metrics match the percentile oracle exactly", result);
}

// ---------------------------------------------------------------------------
// 4. UDA oracles
// ---------------------------------------------------------------------------

#[test]
fn acceptance_4_uda_oracles() {
    let result = (|| -> Result<(), String> {
        let src = Array2::from_shape_vec((4, 2), vec![2.0, 1.0, 2.0, -1.0, -2.0, 1.0, -2.0, -1.0])
            .unwrap();
        let tgt = Array2::from_shape_vec((4, 2), vec![1.0, 2.0, 1.0, -2.0, -1.0, 2.0, -1.0, -2.0])
            .unwrap();
        let (out, _) = jamloc::uda::coral_transform(&src, &tgt, 0.0).map_err(|e| e.to_string())?;
        // population covariance of the output vs target's diag(1,4)
        let mean: Vec<f64> = (0..2).map(|j| out.column(j).sum() / 4.0).collect();
        let mut frob2 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let mut c = 0.0;
                for r in 0..4 {
                    c += (out[[r, i]] - mean[i]) * (out[[r, j]] - mean[j]);
                }
                c /= 4.0;
                let want = if i == j { if i == 0 { 1.0 } else { 4.0 } } else { 0.0 };
                frob2 += (c - want).powi(2);
            }
        }
        check(frob2.sqrt() < 1e-6, format!("coral cov error {}", frob2.sqrt()))?;

        let x = Array2::from_shape_vec((1, 1), vec![0.0]).unwrap();
        let y = Array2::from_shape_vec((1, 1), vec![1.0]).unwrap();
        let v = jamloc::uda::mmd(&x, &y, 1.0).map_err(|e| e.to_string())?;
        check((v - 0.786939).abs() < 1e-6, format!("mmd {v}"))?;
        let same = jamloc::uda::mmd(&x, &x, 1.0).map_err(|e| e.to_string())?;
        check(same <= 1e-12, format!("mmd(x,x) {same}"))
    })();
    report(4, "CORAL covariance match and MMD oracle values", result);
}

// ---------------------------------------------------------------------------
// 5. EMD vs exact LP transport
// ---------------------------------------------------------------------------

#[test]
fn acceptance_5_emd_oracle() {
    fn lp_min_matching(a: &[f64], b: &[f64]) -> f64 {
        fn rec(a: &[f64], b: &[f64], used: &mut [bool], i: usize, acc: f64, best: &mut f64) {
            if acc >= *best {
                return;
            }
            if i == a.len() {
                *best = acc;
                return;
            }
            for j in 0..b.len() {
                if !used[j] {
                    used[j] = true;
                    rec(a, b, used, i + 1, acc + (a[i] - b[j]).abs(), best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(a, b, &mut vec![false; b.len()], 0, 0.0, &mut best);
        best / a.len() as f64
    }
    let result = (|| -> Result<(), String> {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for case in 0..50 {
            let n = if case % 2 == 0 { 3 } else { 4 };
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let src = Array2::from_shape_vec((n, 1), a.clone()).unwrap();
            let tgt = Array2::from_shape_vec((n, 1), b.clone()).unwrap();
            let rep = analysis::per_tap_emd(&src, &tgt).map_err(|e| e.to_string())?;
            let exact = lp_min_matching(&a, &b);
            check(
                (rep.emd[0] - exact).abs() <= 1e-9,
                format!("case {case}: {} vs LP {exact}", rep.emd[0]),
            )?;
        }
        Ok(())
    })();
    report(5, "per-tap EMD equals exact LP transport on 50 random columns", result);
}

// ---------------------------------------------------------------------------
// 6. Parameter counts
// ---------------------------------------------------------------------------

#[test]
fn acceptance_6_parameter_counts() {
    let result = (|| -> Result<(), String> {
        let mut model = DannModel::new(0, AutoencoderSpec::default()).unwrap();
        let ae = model.ae.param_count() as f64;
        check(
            (ae - 782_211.0).abs() / 782_211.0 <= 0.10,
            format!("autoencoder params {ae} not within 10% of 782211"),
        )?;
        // The stated widths (128 -> 128 -> 64 -> 1, with biases) sum to
        // 128*128+128 + 128*64+64 + 64+1 = 24,833. The cited figure 24,897
        // does not match its own formula; the arithmetic-correct value from
        // the stated widths is asserted here.
        let dc = {
            let mut n = 0usize;
            model.dc.visit_params("dc", &mut |p| n += p.w.len());
            n
        };
        check(
            dc == 128 * 128 + 128 + 128 * 64 + 64 + 64 + 1,
            format!("domain classifier params {dc}"),
        )?;
        check(dc == 24_833, format!("domain classifier params {dc} != 24833"))
    })();
    report(
        6,
        "autoencoder within 10% of 782,211; domain classifier exactly 24,833 \
         (the quoted 24,897 contradicts the stated widths; see width formula)",
        result,
    );
}

// ---------------------------------------------------------------------------
// 7. Synthetic domain-shift benchmark (3 seeds)
// ---------------------------------------------------------------------------

#[test]
fn acceptance_7_synthetic_benchmark() {
    let start = std::time::Instant::now();
    let result = (|| -> Result<(), String> {
        let knobs = common::BenchKnobs::default();
        let mut shift_ratios = Vec::new();
        let mut improvements = Vec::new();
        let mut auc_dists = Vec::new();
        for seed in 0..3u64 {
            let n = common::run_benchmark(seed, &knobs);
            println!(
                "  seed {seed}: src_test {:.1} cm | src_on_tgt {:.1} cm | \
                 A-CNT {:.1} cm | CNT {:.1} cm | AUC {:.3} \
                 (kNN probe {:.3}, pretrain {:.3})",
                n.src_test_err,
                n.src_on_target_err,
                n.acnt_err,
                n.cnt_err,
                n.align_auc,
                n.probe_auc,
                n.pretrain_probe_auc
            );
            shift_ratios.push(n.src_on_target_err / n.src_test_err);
            improvements.push(1.0 - n.acnt_err / n.cnt_err);
            auc_dists.push((n.align_auc - 0.5).abs());
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (sr, imp, ad) = (mean(&shift_ratios), mean(&improvements), mean(&auc_dists));
        println!(
            "  means over 3 seeds: shift ratio {sr:.2}x | A-CNT improvement {:.1}% | |AUC-0.5| {ad:.3} | {:.1} min",
            imp * 100.0,
            start.elapsed().as_secs_f64() / 60.0
        );
        let mut failures = Vec::new();
        if sr < 2.0 {
            failures.push(format!("(a) mean shift ratio {sr:.2} < 2.0"));
        }
        if imp < 0.30 {
            failures.push(format!(
                "(b) mean A-CNT improvement {:.1}% < 30%",
                imp * 100.0
            ));
        }
        if ad >= 0.1 {
            failures.push(format!("(c) mean |AUC-0.5| {ad:.3} >= 0.1"));
        }
        if start.elapsed().as_secs() >= 30 * 60 {
            failures.push(format!("runtime {:?} over 30 min", start.elapsed()));
        }
        if failures.is_empty() {
            Ok(())
        } else {
            Err(failures.join("; "))
        }
    })();
    report(
        7,
        "synthetic shift benchmark: >=2x degradation, >=30% A-CNT gain, aligned AUC",
        result,
    );
}

// ---------------------------------------------------------------------------
// 8. Zone probe
// ---------------------------------------------------------------------------

#[test]
fn acceptance_8_zone_probe() {
    let result = (|| -> Result<(), String> {
        let centers = [[0.0, 0.0], [100.0, 0.0], [0.0, 100.0], [100.0, 100.0], [50.0, 50.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 150;
        let mut coords = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            let z = i % 5;
            coords[[i, 0]] = centers[z][0] + rng.gen_range(-5.0..5.0);
            coords[[i, 1]] = centers[z][1] + rng.gen_range(-5.0..5.0);
        }
        let (zones, _) = analysis::kmeans(&coords, 5, 3, 10).map_err(|e| e.to_string())?;
        let mut emb = Array2::<f64>::zeros((n, 8));
        for i in 0..n {
            emb[[i, zones[i]]] = 1.0;
        }
        let sep = analysis::zone_probe(&emb, &coords, 5, 5, 3).map_err(|e| e.to_string())?;
        check(sep.roc_auc_ovr > 0.99, format!("separable AUC {}", sep.roc_auc_ovr))?;
        check(sep.accuracy > 0.95, format!("separable accuracy {}", sep.accuracy))?;
        for seed in 0..5u64 {
            let mut nrng = ChaCha8Rng::seed_from_u64(100 + seed);
            let noise = Array2::from_shape_fn((n, 16), |_| nrng.gen_range(-1.0..1.0));
            let r = analysis::zone_probe(&noise, &coords, 5, 5, seed).map_err(|e| e.to_string())?;
            let prior = 0.2;
            let se = (prior * (1.0 - prior) / n as f64).sqrt();
            check(
                (r.accuracy - prior).abs() <= 3.0 * se + 0.05,
                format!("seed {seed}: noise accuracy {} vs prior {prior}", r.accuracy),
            )?;
        }
        Ok(())
    })();
    report(8, "zone probe: separable embeddings near-perfect, noise at chance", result);
}

// ---------------------------------------------------------------------------
// 9. Real-dataset reproduction (conditional)
// ---------------------------------------------------------------------------

#[test]
fn acceptance_9_real_dataset_conditional() {
    let root = match std::env::var_os("JAMLOC_REAL_DATA") {
        Some(p) => std::path::PathBuf::from(p),
        None => {
            println!(
                "[ACCEPTANCE 9] SKIP — real-dataset reproduction (set JAMLOC_REAL_DATA \
                 to a directory containing source/ and target/ dataset dirs)"
            );
            return;
        }
    };
    let result = (|| -> Result<(), String> {
        let src = dataset::load_dataset(&root.join("source")).map_err(|e| e.to_string())?;
        let tgt = dataset::load_dataset(&root.join("target")).map_err(|e| e.to_string())?;
        check(
            src.samples.len() == 461_795,
            format!("source count {} != 461795", src.samples.len()),
        )?;
        check(
            tgt.samples.len() == 28_793,
            format!("target count {} != 28793", tgt.samples.len()),
        )?;
        // Full-pipeline error targets (mean within +/-25% of 34.67 cm,
        // frac<=30cm >= 0.45) require a complete training run; they are
        // checked against a finished checkpoint when one is provided.
        let ckpt = root.join("acnt.ckpt.json");
        if !ckpt.exists() {
            return Err(format!(
                "dataset present but no trained checkpoint at {}; run the full \
                 pipeline first",
                ckpt.display()
            ));
        }
        let scaler_path = root.join("cir_scaler.json");
        let scaler = jamloc::preprocess::ScalerParams::load(
            &scaler_path,
            jamloc::preprocess::FitScope::SourcePlusTarget,
        )
        .map_err(|e| e.to_string())?;
        let rows: Vec<&dataset::CirSample> = tgt.samples.iter().collect();
        let x = jamloc::preprocess::processed_batch(&rows, &scaler).map_err(|e| e.to_string())?;
        let y = Array2::from_shape_fn((rows.len(), 2), |(i, j)| {
            if j == 0 { rows[i].x_cm } else { rows[i].y_cm }
        });
        let mut state = jamloc::training::load_checkpoint(&ckpt).map_err(|e| e.to_string())?;
        let preds = jamloc::training::predict_coords(&mut state.model, &x);
        let m = analysis::localization_metrics(&preds, &y).map_err(|e| e.to_string())?;
        check(
            (m.mean_err - 34.67).abs() / 34.67 <= 0.25,
            format!("target mean error {:.2} not within 25% of 34.67", m.mean_err),
        )?;
        check(
            m.frac_within_30cm >= 0.45,
            format!("frac<=30cm {:.3} < 0.45", m.frac_within_30cm),
        )
    })();
    report(9, "real-dataset counts and A-CNT reproduction targets", result);
}

// ---------------------------------------------------------------------------
// 10. Determinism
// ---------------------------------------------------------------------------

#[test]
fn acceptance_10_determinism() {
    let result = (|| -> Result<(), String> {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig::new(grid_positions(2, 2, 300.0, 500.0), 3, Domain::Source);
        for sub in ["a", "b"] {
            let set = dataset::synth_generate(&cfg, 7).map_err(|e| e.to_string())?;
            dataset::write_dataset(&set, &dir.path().join(sub)).map_err(|e| e.to_string())?;
        }
        let a = std::fs::read(dir.path().join("a/data.csv")).unwrap();
        let b = std::fs::read(dir.path().join("b/data.csv")).unwrap();
        check(a == b, "synth reruns differ byte-for-byte".into())?;

        let set = dataset::synth_generate(&cfg, 7).map_err(|e| e.to_string())?;
        let s1 = dataset::split(&set, (0.7, 0.15, 0.15), 3).map_err(|e| e.to_string())?;
        let s2 = dataset::split(&set, (0.7, 0.15, 0.15), 3).map_err(|e| e.to_string())?;
        check(
            s1.train == s2.train && s1.val == s2.val && s1.test == s2.test,
            "split reruns differ".into(),
        )?;

        // 2-epoch pretrain, bit-identical across reruns
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = Array3::from_shape_fn((32, 3, 100), |_| rng.gen_range(-1.0..1.0));
        let run = || -> BTreeMap<String, Vec<u64>> {
            let spec = AutoencoderSpec {
                stage_channels: [4, 8, 16],
                blocks_per_stage: 1,
                embedding_dim: 16,
                ..AutoencoderSpec::default()
            };
            let mut state = TrainingState::new(11, spec).unwrap();
            let mut cfg = PhaseConfig::pretrain_default().with_epochs(2);
            cfg.lr_schedule = ScheduleSpec::constant(1e-3, 2);
            cfg.batch_size = 16;
            run_pretrain(&mut state, &data, None, &cfg).unwrap();
            state
                .model
                .params_map()
                .into_iter()
                .map(|(k, v)| (k, v.into_iter().map(f64::to_bits).collect()))
                .collect()
        };
        check(run() == run(), "2-epoch pretrain reruns not bit-identical".into())
    })();
    report(10, "synth/split/pretrain reruns are bit-identical", result);
}
