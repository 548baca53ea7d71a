//! Classical unsupervised domain-adaptation baselines on embedding matrices:
//! correlation alignment (CORAL) and maximum mean discrepancy (MMD).

use nalgebra::DMatrix;
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{JamlocError, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlignmentStats {
    pub shrinkage: f64,
    pub source_cond: f64,
    pub target_cond: f64,
}

fn covariance(x: &Array2<f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let mean = x.mean_axis(Axis(0)).unwrap();
    let mut cov = Array2::<f64>::zeros((d, d));
    for row in x.axis_iter(Axis(0)) {
        let c: Vec<f64> = row.iter().zip(mean.iter()).map(|(v, m)| v - m).collect();
        for i in 0..d {
            for j in i..d {
                cov[[i, j]] += c[i] * c[j];
            }
        }
    }
    let nf = (n as f64).max(1.0);
    for i in 0..d {
        for j in i..d {
            cov[[i, j]] /= nf;
            cov[[j, i]] = cov[[i, j]];
        }
    }
    cov
}

/// Symmetric matrix power via eigendecomposition. Fails with the condition
/// number if any shrunk eigenvalue is non-positive.
fn sym_pow(cov: &Array2<f64>, shrinkage: f64, exponent: f64) -> Result<(Array2<f64>, f64)> {
    let d = cov.dim().0;
    let mut m = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = cov[[i, j]] + if i == j { shrinkage } else { 0.0 };
        }
    }
    let eig = m.symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min_ev = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if min_ev <= 0.0 || !min_ev.is_finite() {
        return Err(JamlocError::Numerical(format!(
            "covariance not positive definite after shrinkage {shrinkage} \
             (condition number {:e})",
            max_ev / min_ev.abs().max(f64::MIN_POSITIVE)
        )));
    }
    let cond = max_ev / min_ev;
    let mut powed = DMatrix::<f64>::zeros(d, d);
    for k in 0..d {
        let lam = eig.eigenvalues[k].powf(exponent);
        let v = eig.eigenvectors.column(k);
        for i in 0..d {
            for j in 0..d {
                powed[(i, j)] += lam * v[i] * v[j];
            }
        }
    }
    let mut out = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            out[[i, j]] = powed[(i, j)];
        }
    }
    Ok((out, cond))
}

/// CORAL: whiten centered source features by (C_s + sI)^(-1/2), recolor by
/// (C_t + sI)^(1/2), then shift to the target mean. The output covariance
/// matches the shrunk target covariance.
pub fn coral_transform(
    source: &Array2<f64>,
    target: &Array2<f64>,
    shrinkage: f64,
) -> Result<(Array2<f64>, AlignmentStats)> {
    let (n, d) = source.dim();
    let (m, dt) = target.dim();
    if d != dt {
        return Err(JamlocError::Invalid("coral: dimension mismatch".into()));
    }
    if shrinkage <= 0.0 && (n <= d || m <= d) {
        return Err(JamlocError::Invalid(
            "coral: need N, M > D or positive shrinkage".into(),
        ));
    }
    let cs = covariance(source);
    let ct = covariance(target);
    let (whiten, source_cond) = sym_pow(&cs, shrinkage, -0.5)?;
    let (recolor, target_cond) = sym_pow(&ct, shrinkage, 0.5)?;
    let s_mean = source.mean_axis(Axis(0)).unwrap();
    let t_mean = target.mean_axis(Axis(0)).unwrap();
    let centered = source - &s_mean.clone().insert_axis(Axis(0));
    let out = centered.dot(&whiten).dot(&recolor) + &t_mean.insert_axis(Axis(0));
    Ok((
        out,
        AlignmentStats {
            shrinkage,
            source_cond,
            target_cond,
        },
    ))
}

/// Squared distance matrix helper.
fn sq_dists(x: &Array2<f64>, y: &Array2<f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let m = y.dim().0;
    let mut out = Array2::<f64>::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for k in 0..d {
                let dif = x[[i, k]] - y[[j, k]];
                s += dif * dif;
            }
            out[[i, j]] = s;
        }
    }
    out
}

fn mean_kernel(d2: &Array2<f64>, h: f64) -> f64 {
    let denom = 2.0 * h * h;
    d2.iter().map(|v| (-v / denom).exp()).sum::<f64>() / d2.len() as f64
}

/// Biased (V-statistic) squared MMD with a Gaussian kernel
/// k(a,b) = exp(-|a-b|^2 / (2 h^2)).
pub fn mmd(x: &Array2<f64>, y: &Array2<f64>, bandwidth: f64) -> Result<f64> {
    if x.dim().0 == 0 || y.dim().0 == 0 {
        return Err(JamlocError::Invalid("mmd: empty input".into()));
    }
    if x.dim().1 != y.dim().1 {
        return Err(JamlocError::Invalid("mmd: dimension mismatch".into()));
    }
    if bandwidth <= 0.0 {
        return Err(JamlocError::Invalid("mmd: bandwidth must be positive".into()));
    }
    let kxx = mean_kernel(&sq_dists(x, x), bandwidth);
    let kyy = mean_kernel(&sq_dists(y, y), bandwidth);
    let kxy = mean_kernel(&sq_dists(x, y), bandwidth);
    Ok((kxx + kyy - 2.0 * kxy).max(0.0))
}

/// Median-heuristic bandwidth: median pairwise distance over the pooled
/// sample (subsampled to at most 512 rows per side for tractability).
pub fn median_bandwidth(x: &Array2<f64>, y: &Array2<f64>) -> Result<f64> {
    if x.dim().0 == 0 || y.dim().0 == 0 {
        return Err(JamlocError::Invalid("median_bandwidth: empty input".into()));
    }
    let cap = 512usize;
    let take = |m: &Array2<f64>| -> Array2<f64> {
        let n = m.dim().0.min(cap);
        m.slice(ndarray::s![..n, ..]).to_owned()
    };
    let xs = take(x);
    let ys = take(y);
    let mut pooled = Array2::<f64>::zeros((xs.dim().0 + ys.dim().0, x.dim().1));
    pooled.slice_mut(ndarray::s![..xs.dim().0, ..]).assign(&xs);
    pooled.slice_mut(ndarray::s![xs.dim().0.., ..]).assign(&ys);
    let d2 = sq_dists(&pooled, &pooled);
    let mut dists: Vec<f64> = Vec::new();
    let n = pooled.dim().0;
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(d2[[i, j]].sqrt());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = dists[(dists.len() - 1) / 2];
    if med <= 0.0 {
        return Ok(1.0); // degenerate pooled sample; any bandwidth works
    }
    Ok(med)
}
