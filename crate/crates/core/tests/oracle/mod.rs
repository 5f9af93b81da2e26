//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the library's math.

#![allow(dead_code, clippy::needless_range_loop)]

use epigraph::nn::Network;
use nalgebra::DMatrix;
use rand::Rng;

/// Random probability matrix of size `levels`, roughly a third of cells zero.
pub fn random_distribution<R: Rng>(rng: &mut R, levels: usize) -> Vec<Vec<f64>> {
    loop {
        let mut p: Vec<Vec<f64>> = (0..levels)
            .map(|_| {
                (0..levels)
                    .map(|_| {
                        if rng.random_bool(0.35) {
                            0.0
                        } else {
                            rng.random_range(0.0..1.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let total: f64 = p.iter().flatten().sum();
        if total == 0.0 {
            continue;
        }
        for v in p.iter_mut().flatten() {
            *v /= total;
        }
        return p;
    }
}

pub fn to_array(p: &[Vec<f64>]) -> ndarray::Array2<f64> {
    let n = p.len();
    ndarray::Array2::from_shape_fn((n, n), |(i, j)| p[i][j])
}

fn plogp(v: f64) -> f64 {
    if v > 0.0 {
        v * v.log2()
    } else {
        0.0
    }
}

/// f1..f13 evaluated term by term from the textbook definitions: 0-based
/// levels, log base 2, f7 centered on f6, f3 = 0 for a zero deviation and
/// f12 = 0 when both marginal entropies vanish.
pub fn haralick_f1_to_f13(p: &[Vec<f64>]) -> [f64; 13] {
    let n = p.len();
    let px: Vec<f64> = (0..n).map(|i| (0..n).map(|j| p[i][j]).sum()).collect();
    let py: Vec<f64> = (0..n).map(|j| (0..n).map(|i| p[i][j]).sum()).collect();

    let mut p_sum = vec![0.0; 2 * n - 1];
    let mut p_diff = vec![0.0; n];
    for k in 0..2 * n - 1 {
        for i in 0..n {
            for j in 0..n {
                if i + j == k {
                    p_sum[k] += p[i][j];
                }
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if (i as i64 - j as i64).unsigned_abs() as usize == k {
                    p_diff[k] += p[i][j];
                }
            }
        }
    }

    let mut f1 = 0.0;
    for row in p {
        for &v in row {
            f1 += v * v;
        }
    }
    let mut f2 = 0.0;
    for (k, &v) in p_diff.iter().enumerate() {
        f2 += (k * k) as f64 * v;
    }

    let mu_x: f64 = (0..n).map(|i| i as f64 * px[i]).sum();
    let mu_y: f64 = (0..n).map(|j| j as f64 * py[j]).sum();
    let var_x: f64 = (0..n).map(|i| (i as f64 - mu_x).powi(2) * px[i]).sum();
    let var_y: f64 = (0..n).map(|j| (j as f64 - mu_y).powi(2) * py[j]).sum();
    let mut cross = 0.0;
    for i in 0..n {
        for j in 0..n {
            cross += (i * j) as f64 * p[i][j];
        }
    }
    let sd = (var_x * var_y).sqrt();
    let f3 = if sd > 0.0 { (cross - mu_x * mu_y) / sd } else { 0.0 };

    let mut f4 = 0.0;
    let mut f5 = 0.0;
    let mut f9 = 0.0;
    for i in 0..n {
        for j in 0..n {
            f4 += (i as f64 - mu_x).powi(2) * p[i][j];
            f5 += p[i][j] / (1.0 + (i as f64 - j as f64).powi(2));
            f9 -= plogp(p[i][j]);
        }
    }

    let f6: f64 = p_sum.iter().enumerate().map(|(k, &v)| k as f64 * v).sum();
    let f7: f64 = p_sum.iter().enumerate().map(|(k, &v)| (k as f64 - f6).powi(2) * v).sum();
    let f8: f64 = -p_sum.iter().map(|&v| plogp(v)).sum::<f64>();

    let d_mean: f64 = p_diff.iter().enumerate().map(|(k, &v)| k as f64 * v).sum();
    let f10: f64 = p_diff.iter().enumerate().map(|(k, &v)| (k as f64 - d_mean).powi(2) * v).sum();
    let f11: f64 = -p_diff.iter().map(|&v| plogp(v)).sum::<f64>();

    let hx: f64 = -px.iter().map(|&v| plogp(v)).sum::<f64>();
    let hy: f64 = -py.iter().map(|&v| plogp(v)).sum::<f64>();
    let mut hxy1 = 0.0;
    let mut hxy2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let q = px[i] * py[j];
            if q > 0.0 {
                hxy1 -= p[i][j] * q.log2();
                hxy2 -= q * q.log2();
            }
        }
    }
    let f12 = if hx.max(hy) > 0.0 { (f9 - hxy1) / hx.max(hy) } else { 0.0 };
    let f13 = (1.0 - (-2.0 * (hxy2 - f9)).exp()).max(0.0).sqrt();

    [f1, f2, f3, f4, f5, f6, f7, f8, f9, f10, f11, f12, f13]
}

/// MCC through the singular values of `Dx^-1/2 P Dy^-1/2`, whose squares
/// are the eigenvalues of `Q` (the two matrices are similar).
pub fn mcc_via_svd(p: &[Vec<f64>]) -> f64 {
    let n = p.len();
    let px: Vec<f64> = (0..n).map(|i| p[i].iter().sum()).collect();
    let py: Vec<f64> = (0..n).map(|j| (0..n).map(|i| p[i][j]).sum()).collect();
    let rows: Vec<usize> = (0..n).filter(|&i| px[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| py[j] > 0.0).collect();
    if rows.len() < 2 {
        return 0.0;
    }
    let a = DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
        let (i, j) = (rows[r], cols[c]);
        p[i][j] / (px[i] * py[j]).sqrt()
    });
    let mut sv: Vec<f64> = a.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    // Eigenvalues beyond the rank of A are exactly zero.
    let second = sv.get(1).copied().unwrap_or(0.0);
    (second * second).clamp(0.0, 1.0).sqrt()
}

/// Q computed straight from its defining sum over all levels, skipping
/// rows with zero marginal.
pub fn q_rows(p: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = p.len();
    let px: Vec<f64> = (0..n).map(|i| p[i].iter().sum()).collect();
    let py: Vec<f64> = (0..n).map(|j| (0..n).map(|i| p[i][j]).sum()).collect();
    let live: Vec<usize> = (0..n).filter(|&i| px[i] > 0.0).collect();
    live.iter()
        .map(|&i| {
            live.iter()
                .map(|&j| {
                    (0..n)
                        .filter(|&k| py[k] > 0.0)
                        .map(|k| p[i][k] * p[j][k] / (px[i] * py[k]))
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// Co-occurrence counts by visiting every pixel and bounds-checking its
/// partner at `(dy, dx)`.
pub fn naive_glcm(
    w: usize,
    h: usize,
    levels: usize,
    pixels: &[u8],
    (dy, dx): (isize, isize),
    symmetric: bool,
) -> Vec<Vec<u64>> {
    let mut c = vec![vec![0u64; levels]; levels];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                continue;
            }
            let a = pixels[(y * w as isize + x) as usize] as usize;
            let b = pixels[(ny * w as isize + nx) as usize] as usize;
            c[a][b] += 1;
            if symmetric {
                c[b][a] += 1;
            }
        }
    }
    c
}

/// Binary cross-entropy of one sample, computed from the probability.
fn bce(y: f64, t: f64) -> f64 {
    -(t * y.ln() + (1.0 - t) * (1.0 - y).ln())
}

/// Largest relative error between the analytic gradient of one sample and a
/// central difference with step `eps`, over every weight and bias.
pub fn max_gradient_error(net: &Network, x: &[f64], target: f64, eps: f64) -> f64 {
    let acts = net.forward(x).unwrap();
    let grads = net.backward(&acts, target);
    let loss = |n: &Network| bce(n.forward(x).unwrap().output(), target);

    let mut worst: f64 = 0.0;
    let mut compare = |analytic: f64, numeric: f64| {
        let scale = analytic.abs().max(numeric.abs());
        let err = if scale < 1e-10 {
            (analytic - numeric).abs()
        } else {
            (analytic - numeric).abs() / scale
        };
        worst = worst.max(err);
    };

    for l in 0..net.weights().len() {
        for idx in 0..net.weights()[l].len() {
            let (r, c) = (idx / net.weights()[l].ncols(), idx % net.weights()[l].ncols());
            let mut plus = net.clone();
            plus.weights_mut()[l][[r, c]] += eps;
            let mut minus = net.clone();
            minus.weights_mut()[l][[r, c]] -= eps;
            compare(grads.weights[l][[r, c]], (loss(&plus) - loss(&minus)) / (2.0 * eps));
        }
        for b in 0..net.biases()[l].len() {
            let mut plus = net.clone();
            plus.biases_mut()[l][b] += eps;
            let mut minus = net.clone();
            minus.biases_mut()[l][b] -= eps;
            compare(grads.biases[l][b], (loss(&plus) - loss(&minus)) / (2.0 * eps));
        }
    }
    worst
}

/// Smallest distance of any hidden pre-activation from the ReLU kink.
pub fn kink_margin(net: &Network, x: &[f64]) -> f64 {
    let acts = net.forward(x).unwrap();
    acts.pre[..acts.pre.len() - 1]
        .iter()
        .flat_map(|z| z.iter().map(|v| v.abs()))
        .fold(f64::INFINITY, f64::min)
}
