//! Localization metrics, distribution-shift diagnostics, feature-importance
//! measures, and the spatial-zone linear probe.

use std::collections::BTreeMap;

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{JamlocError, Result};

/// Sentinel standing in for -inf when R^2 is undefined (constant truths with
/// nonzero residual).
pub const R2_UNDEFINED_SENTINEL: f64 = -1.0e30;

// ---------------------------------------------------------------------------
// Localization metrics
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rmse_x: f64,
    pub rmse_y: f64,
    pub mae_x: f64,
    pub mae_y: f64,
    pub r2_x: f64,
    pub r2_y: f64,
    pub mean_err: f64,
    pub med_err: f64,
    pub p90_err: f64,
    pub frac_within_30cm: f64,
    pub wall_time_min: f64,
}

/// Linearly interpolated percentile between order statistics (type 7);
/// `sorted` must be ascending, `p` in [0, 1].
pub fn percentile_linear(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0 && (0.0..=1.0).contains(&p));
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn r2_axis(pred: &[f64], truth: &[f64]) -> f64 {
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    let ss_res: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).powi(2))
        .sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            0.0
        } else {
            eprintln!("warning: R^2 undefined for constant truths with nonzero residual");
            R2_UNDEFINED_SENTINEL
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Localization error metrics over predicted vs true coordinates (cm).
/// Median is the lower-interpolated 50th percentile; P90 interpolates
/// linearly between order statistics.
pub fn localization_metrics(preds: &Array2<f64>, truths: &Array2<f64>) -> Result<MetricsReport> {
    let n = preds.dim().0;
    if n == 0 || truths.dim().0 != n || preds.dim().1 != 2 || truths.dim().1 != 2 {
        return Err(JamlocError::Invalid(
            "localization_metrics: need matching N x 2 inputs, N >= 1".into(),
        ));
    }
    if preds.iter().chain(truths.iter()).any(|v| !v.is_finite()) {
        return Err(JamlocError::Invalid(
            "localization_metrics: non-finite input".into(),
        ));
    }
    let mut errs = Vec::with_capacity(n);
    let (mut se_x, mut se_y, mut ae_x, mut ae_y) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let dx = preds[[i, 0]] - truths[[i, 0]];
        let dy = preds[[i, 1]] - truths[[i, 1]];
        errs.push((dx * dx + dy * dy).sqrt());
        se_x += dx * dx;
        se_y += dy * dy;
        ae_x += dx.abs();
        ae_y += dy.abs();
    }
    errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nf = n as f64;
    let px: Vec<f64> = preds.column(0).to_vec();
    let py: Vec<f64> = preds.column(1).to_vec();
    let tx: Vec<f64> = truths.column(0).to_vec();
    let ty: Vec<f64> = truths.column(1).to_vec();
    Ok(MetricsReport {
        rmse_x: (se_x / nf).sqrt(),
        rmse_y: (se_y / nf).sqrt(),
        mae_x: ae_x / nf,
        mae_y: ae_y / nf,
        r2_x: r2_axis(&px, &tx),
        r2_y: r2_axis(&py, &ty),
        mean_err: errs.iter().sum::<f64>() / nf,
        med_err: errs[(n - 1) / 2],
        p90_err: percentile_linear(&errs, 0.9),
        frac_within_30cm: errs.iter().filter(|e| **e <= 30.0).count() as f64 / nf,
        wall_time_min: 0.0,
    })
}

// ---------------------------------------------------------------------------
// Per-tap distribution shift (Wasserstein-1 + |delta mean|)
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmdReport {
    pub emd: Vec<f64>,
    pub dmean: Vec<f64>,
    /// Column indices where emd >= 0.1 or dmean >= 0.1.
    pub flagged: Vec<usize>,
}

/// Exact 1-D Wasserstein-1 between two empirical distributions, by
/// integrating the CDF difference over the merged support.
pub fn emd_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(JamlocError::Invalid("emd_1d: empty column".into()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let mut merged: Vec<f64> = sa.iter().chain(sb.iter()).copied().collect();
    merged.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut total = 0.0;
    for w in merged.windows(2) {
        while ia < sa.len() && sa[ia] <= w[0] {
            ia += 1;
        }
        while ib < sb.len() && sb[ib] <= w[0] {
            ib += 1;
        }
        let fa = ia as f64 / na;
        let fb = ib as f64 / nb;
        total += (fa - fb).abs() * (w[1] - w[0]);
    }
    Ok(total)
}

/// Per-column Wasserstein-1 and |delta mean| between two feature matrices
/// with matching column counts.
pub fn per_tap_emd(source: &Array2<f64>, target: &Array2<f64>) -> Result<EmdReport> {
    if source.dim().1 != target.dim().1 {
        return Err(JamlocError::Invalid(
            "per_tap_emd: column counts differ".into(),
        ));
    }
    if source.dim().0 == 0 || target.dim().0 == 0 {
        return Err(JamlocError::Invalid("per_tap_emd: empty input".into()));
    }
    let t = source.dim().1;
    let mut emd = Vec::with_capacity(t);
    let mut dmean = Vec::with_capacity(t);
    let mut flagged = Vec::new();
    for j in 0..t {
        let sc: Vec<f64> = source.column(j).to_vec();
        let tc: Vec<f64> = target.column(j).to_vec();
        let e = emd_1d(&sc, &tc)?;
        let dm = (sc.iter().sum::<f64>() / sc.len() as f64
            - tc.iter().sum::<f64>() / tc.len() as f64)
            .abs();
        if e >= 0.1 || dm >= 0.1 {
            flagged.push(j);
        }
        emd.push(e);
        dmean.push(dm);
    }
    Ok(EmdReport { emd, dmean, flagged })
}

// ---------------------------------------------------------------------------
// Feature importance: mutual information, eta-squared, rank aggregation
// ---------------------------------------------------------------------------

/// Equal-frequency bin assignment: ranks split into `bins` groups.
fn equal_freq_bins(x: &[f64], bins: usize) -> Vec<usize> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap().then(a.cmp(&b)));
    let mut out = vec![0usize; n];
    for (rank, &i) in idx.iter().enumerate() {
        out[i] = (rank * bins / n).min(bins - 1);
    }
    out
}

/// Plug-in mutual information estimate (nats) on an equal-frequency
/// bins x bins contingency table. Constant inputs give 0 by convention.
pub fn mutual_info(feature: &[f64], target: &[f64], bins: usize) -> Result<f64> {
    let n = feature.len();
    if n != target.len() {
        return Err(JamlocError::Invalid("mutual_info: length mismatch".into()));
    }
    if bins < 2 || n < 4 * bins {
        return Err(JamlocError::Invalid(format!(
            "mutual_info: need N >= 4*bins (N={n}, bins={bins})"
        )));
    }
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if constant(feature) || constant(target) {
        return Ok(0.0);
    }
    let fx = equal_freq_bins(feature, bins);
    let fy = equal_freq_bins(target, bins);
    let mut joint = vec![vec![0.0f64; bins]; bins];
    for i in 0..n {
        joint[fx[i]][fy[i]] += 1.0;
    }
    let nf = n as f64;
    let px: Vec<f64> = joint.iter().map(|r| r.iter().sum::<f64>() / nf).collect();
    let mut py = vec![0.0; bins];
    for r in &joint {
        for (j, v) in r.iter().enumerate() {
            py[j] += v / nf;
        }
    }
    let mut mi = 0.0;
    for (i, row) in joint.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0.0 {
                let pij = c / nf;
                mi += pij * (pij / (px[i] * py[j])).ln();
            }
        }
    }
    Ok(mi.max(0.0))
}

/// ANOVA effect size: between-group sum of squares over total sum of squares.
pub fn eta_squared(values: &[f64], groups: &[usize]) -> Result<f64> {
    let n = values.len();
    if n != groups.len() || n == 0 {
        return Err(JamlocError::Invalid("eta_squared: length mismatch".into()));
    }
    let mut sums: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for (&v, &g) in values.iter().zip(groups) {
        let e = sums.entry(g).or_insert((0.0, 0.0));
        e.0 += v;
        e.1 += 1.0;
    }
    if sums.len() < 2 {
        return Err(JamlocError::Invalid("eta_squared: need >= 2 groups".into()));
    }
    let grand = values.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = values.iter().map(|v| (v - grand).powi(2)).sum();
    if ss_tot == 0.0 {
        return Ok(0.0);
    }
    let ss_between: f64 = sums
        .values()
        .map(|(s, c)| c * (s / c - grand).powi(2))
        .sum();
    Ok((ss_between / ss_tot).clamp(0.0, 1.0))
}

/// Ranks with 1 = largest score; ties get the average rank.
fn ranks_desc(scores: &[f64]) -> Vec<f64> {
    let n = scores.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[idx[k]] = avg;
        }
        i = j + 1;
    }
    out
}

/// Mean rank per feature across importance measures, sorted ascending
/// (lower mean rank = more important).
pub fn rank_aggregate(
    tables: &BTreeMap<String, BTreeMap<String, f64>>,
) -> Result<Vec<(String, f64)>> {
    if tables.is_empty() {
        return Err(JamlocError::Invalid("rank_aggregate: no measures".into()));
    }
    let features: Vec<String> = tables.values().next().unwrap().keys().cloned().collect();
    let mut totals = vec![0.0; features.len()];
    for (measure, scores) in tables {
        if scores.len() != features.len() || !features.iter().all(|f| scores.contains_key(f)) {
            return Err(JamlocError::Invalid(format!(
                "rank_aggregate: measure `{measure}` covers a different feature set"
            )));
        }
        let vals: Vec<f64> = features.iter().map(|f| scores[f]).collect();
        for (t, r) in totals.iter_mut().zip(ranks_desc(&vals)) {
            *t += r;
        }
    }
    let m = tables.len() as f64;
    let mut out: Vec<(String, f64)> = features
        .into_iter()
        .zip(totals.into_iter().map(|t| t / m))
        .collect();
    out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(out)
}

// ---------------------------------------------------------------------------
// ROC-AUC
// ---------------------------------------------------------------------------

/// Binary ROC-AUC via the rank statistic, ties handled with midranks.
/// Labels are 0/1; returns 0.5 when either class is absent.
pub fn binary_auc(scores: &[f64], labels: &[u8]) -> f64 {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return 0.5;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            if labels[idx[k]] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let np = n_pos as f64;
    let nn = n_neg as f64;
    (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn)
}

// ---------------------------------------------------------------------------
// Zone probe: K-means zones + multinomial logistic probe
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZoneProbeResult {
    pub roc_auc_ovr: f64,
    pub accuracy: f64,
    pub centroids: Vec<[f64; 2]>,
}

fn kmeans_once(
    coords: &Array2<f64>,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Option<(Vec<usize>, Array2<f64>, f64)> {
    let n = coords.dim().0;
    // k-means++ seeding
    let mut centers = Array2::<f64>::zeros((k, 2));
    let first = rng.gen_range(0..n);
    centers.row_mut(0).assign(&coords.row(first));
    let mut d2 = vec![0.0f64; n];
    for c in 1..k {
        let mut total = 0.0;
        for i in 0..n {
            let mut best = f64::INFINITY;
            for cc in 0..c {
                let dx = coords[[i, 0]] - centers[[cc, 0]];
                let dy = coords[[i, 1]] - centers[[cc, 1]];
                best = best.min(dx * dx + dy * dy);
            }
            d2[i] = best;
            total += best;
        }
        if total == 0.0 {
            return None; // fewer than k distinct points reachable
        }
        let mut pick = rng.gen_range(0.0..total);
        let mut chosen = n - 1;
        for i in 0..n {
            pick -= d2[i];
            if pick <= 0.0 {
                chosen = i;
                break;
            }
        }
        centers.row_mut(c).assign(&coords.row(chosen));
    }
    let mut labels = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for i in 0..n {
            let mut best = (f64::INFINITY, 0usize);
            for c in 0..k {
                let dx = coords[[i, 0]] - centers[[c, 0]];
                let dy = coords[[i, 1]] - centers[[c, 1]];
                let d = dx * dx + dy * dy;
                if d < best.0 {
                    best = (d, c);
                }
            }
            if labels[i] != best.1 {
                labels[i] = best.1;
                changed = true;
            }
        }
        let mut sums = Array2::<f64>::zeros((k, 2));
        let mut counts = vec![0.0f64; k];
        for i in 0..n {
            sums[[labels[i], 0]] += coords[[i, 0]];
            sums[[labels[i], 1]] += coords[[i, 1]];
            counts[labels[i]] += 1.0;
        }
        if counts.iter().any(|&c| c == 0.0) {
            return None; // degenerate clustering; caller restarts
        }
        for c in 0..k {
            centers[[c, 0]] = sums[[c, 0]] / counts[c];
            centers[[c, 1]] = sums[[c, 1]] / counts[c];
        }
        if !changed {
            break;
        }
    }
    let mut inertia = 0.0;
    for i in 0..n {
        let dx = coords[[i, 0]] - centers[[labels[i], 0]];
        let dy = coords[[i, 1]] - centers[[labels[i], 1]];
        inertia += dx * dx + dy * dy;
    }
    Some((labels, centers, inertia))
}

/// K-means with k-means++ init and `restarts` deterministic restarts; returns
/// the lowest-inertia solution.
pub fn kmeans(
    coords: &Array2<f64>,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<(Vec<usize>, Array2<f64>)> {
    let n = coords.dim().0;
    if n < k {
        return Err(JamlocError::Invalid("kmeans: fewer points than k".into()));
    }
    let mut distinct: Vec<(u64, u64)> = coords
        .axis_iter(Axis(0))
        .map(|r| (r[0].to_bits(), r[1].to_bits()))
        .collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < k {
        return Err(JamlocError::Invalid(
            "kmeans: fewer than k distinct coordinate points".into(),
        ));
    }
    let mut best: Option<(Vec<usize>, Array2<f64>, f64)> = None;
    let mut attempt = 0u64;
    let mut done = 0usize;
    while done < restarts && attempt < (restarts as u64) * 10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0xC0FFEE + attempt));
        attempt += 1;
        if let Some(sol) = kmeans_once(coords, k, &mut rng) {
            done += 1;
            if best.as_ref().map_or(true, |b| sol.2 < b.2) {
                best = Some(sol);
            }
        }
    }
    let (labels, centers, _) =
        best.ok_or_else(|| JamlocError::Numerical("kmeans: no valid clustering found".into()))?;
    Ok((labels, centers))
}

/// Multinomial logistic regression by full-batch gradient descent.
struct Softmax {
    w: Array2<f64>, // k x (d+1), last column is the bias
    k: usize,
}

impl Softmax {
    fn train(x: &Array2<f64>, y: &[usize], k: usize, iters: usize, lr: f64) -> Self {
        let (n, d) = x.dim();
        let mut w = Array2::<f64>::zeros((k, d + 1));
        let nf = n as f64;
        for _ in 0..iters {
            let mut grad = Array2::<f64>::zeros((k, d + 1));
            for i in 0..n {
                let p = Self::probs_row(&w, &x.row(i).to_vec());
                for c in 0..k {
                    let err = p[c] - if y[i] == c { 1.0 } else { 0.0 };
                    for j in 0..d {
                        grad[[c, j]] += err * x[[i, j]];
                    }
                    grad[[c, d]] += err;
                }
            }
            grad.mapv_inplace(|g| g / nf);
            w.zip_mut_with(&grad, |wv, g| *wv -= lr * (g + 1e-4 * *wv));
        }
        Self { w, k }
    }

    fn probs_row(w: &Array2<f64>, x: &[f64]) -> Vec<f64> {
        let k = w.dim().0;
        let d = w.dim().1 - 1;
        let mut z = vec![0.0; k];
        for c in 0..k {
            let mut s = w[[c, d]];
            for j in 0..d {
                s += w[[c, j]] * x[j];
            }
            z[c] = s;
        }
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        let sum: f64 = e.iter().sum();
        for v in &mut e {
            *v /= sum;
        }
        e
    }

    fn predict_probs(&self, x: &Array2<f64>) -> Array2<f64> {
        let n = x.dim().0;
        let mut out = Array2::<f64>::zeros((n, self.k));
        for i in 0..n {
            let p = Self::probs_row(&self.w, &x.row(i).to_vec());
            for c in 0..self.k {
                out[[i, c]] = p[c];
            }
        }
        out
    }
}

/// Deterministic stratified k-fold assignment by class label.
fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9).wrapping_add(17));
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut fold_of = vec![0usize; labels.len()];
    for idxs in by_class.values_mut() {
        for i in (1..idxs.len()).rev() {
            let j = rng.gen_range(0..=i);
            idxs.swap(i, j);
        }
        for (pos, &i) in idxs.iter().enumerate() {
            fold_of[i] = pos % folds;
        }
    }
    fold_of
}

/// Zone probe: K-means zones on coordinates, then a multinomial logistic
/// probe on the embeddings evaluated by stratified k-fold cross-validation.
/// ROC-AUC is one-vs-rest, macro-averaged over zones, on pooled
/// out-of-fold predictions.
pub fn zone_probe(
    embeddings: &Array2<f64>,
    coords: &Array2<f64>,
    k: usize,
    folds: usize,
    seed: u64,
) -> Result<ZoneProbeResult> {
    let n = embeddings.dim().0;
    if coords.dim().0 != n {
        return Err(JamlocError::Invalid("zone_probe: row mismatch".into()));
    }
    if n < k * folds {
        return Err(JamlocError::Invalid("zone_probe: need N >= k*folds".into()));
    }
    let (zones, centers) = kmeans(coords, k, seed, 10)?;

    // standardize embeddings (population stats over all rows)
    let d = embeddings.dim().1;
    let mut x = embeddings.clone();
    for j in 0..d {
        let col = x.column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt().max(1e-8);
        x.column_mut(j).mapv_inplace(|v| (v - mean) / std);
    }

    let fold_of = stratified_folds(&zones, folds, seed);
    let mut oof_probs = Array2::<f64>::zeros((n, k));
    let mut correct = 0usize;
    for f in 0..folds {
        let train_idx: Vec<usize> = (0..n).filter(|i| fold_of[*i] != f).collect();
        let test_idx: Vec<usize> = (0..n).filter(|i| fold_of[*i] == f).collect();
        if test_idx.is_empty() {
            continue;
        }
        let xt = gather_rows(&x, &train_idx);
        let yt: Vec<usize> = train_idx.iter().map(|&i| zones[i]).collect();
        let model = Softmax::train(&xt, &yt, k, 300, 0.5);
        let xe = gather_rows(&x, &test_idx);
        let probs = model.predict_probs(&xe);
        for (row, &i) in test_idx.iter().enumerate() {
            let mut best = (f64::NEG_INFINITY, 0usize);
            for c in 0..k {
                oof_probs[[i, c]] = probs[[row, c]];
                if probs[[row, c]] > best.0 {
                    best = (probs[[row, c]], c);
                }
            }
            if best.1 == zones[i] {
                correct += 1;
            }
        }
    }
    let accuracy = correct as f64 / n as f64;
    let mut auc_sum = 0.0;
    for c in 0..k {
        let scores: Vec<f64> = (0..n).map(|i| oof_probs[[i, c]]).collect();
        let labels: Vec<u8> = zones.iter().map(|&z| u8::from(z == c)).collect();
        auc_sum += binary_auc(&scores, &labels);
    }
    Ok(ZoneProbeResult {
        roc_auc_ovr: auc_sum / k as f64,
        accuracy,
        centroids: (0..k).map(|c| [centers[[c, 0]], centers[[c, 1]]]).collect(),
    })
}

/// Domain probe: leave-one-out k-nearest-neighbour classifier on frozen,
/// standardized embeddings separating source (label 0) from target (label 1)
/// rows. Each row is scored by the target fraction among its k neighbours.
/// Unlike the model's own adversarially trained
/// domain classifier, the probe carries no trainable state, so it measures
/// how much domain information the embedding geometry actually retains.
pub fn domain_probe_auc(
    emb_source: &Array2<f64>,
    emb_target: &Array2<f64>,
    k: usize,
    _seed: u64,
) -> Result<f64> {
    let (ns, d) = emb_source.dim();
    let (nt, dt) = emb_target.dim();
    if d != dt {
        return Err(JamlocError::Invalid("domain_probe: dim mismatch".into()));
    }
    if k == 0 || ns <= k || nt <= k {
        return Err(JamlocError::Invalid(
            "domain_probe: need more than k rows per domain".into(),
        ));
    }
    let n = ns + nt;
    let mut x = Array2::<f64>::zeros((n, d));
    x.slice_mut(ndarray::s![..ns, ..]).assign(emb_source);
    x.slice_mut(ndarray::s![ns.., ..]).assign(emb_target);

    // standardize (population stats over all rows)
    for j in 0..d {
        let col = x.column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt().max(1e-8);
        x.column_mut(j).mapv_inplace(|v| (v - mean) / std);
    }

    let mut scores = vec![0.0f64; n];
    let mut d2 = vec![(0.0f64, false); n - 1];
    for i in 0..n {
        let xi = x.row(i);
        let mut m = 0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let xj = x.row(j);
            let mut s = 0.0;
            for c in 0..d {
                let diff = xi[c] - xj[c];
                s += diff * diff;
            }
            d2[m] = (s, j >= ns);
            m += 1;
        }
        d2.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
        let kt = d2[..k].iter().filter(|e| e.1).count() as f64;
        scores[i] = kt / k as f64;
    }
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i >= ns)).collect();
    Ok(binary_auc(&scores, &labels))
}

fn gather_rows(x: &Array2<f64>, idxs: &[usize]) -> Array2<f64> {
    let d = x.dim().1;
    let mut out = Array2::<f64>::zeros((idxs.len(), d));
    for (r, &i) in idxs.iter().enumerate() {
        out.row_mut(r).assign(&x.row(i));
    }
    out
}
