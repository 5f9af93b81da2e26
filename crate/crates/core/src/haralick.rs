//! The fourteen Haralick texture statistics of a normalized GLCM.
//!
//! Gray levels enter the moment-based features by their index `0..L`.
//! Entropies use `0·log 0 = 0` and base 2 unless configured otherwise.
//!
//! The maximal correlation coefficient (f14) is the square root of the second
//! largest eigenvalue of
//!
//! ```text
//! Q(i, j) = Σ_k p(i, k) p(j, k) / (px(i) py(k))
//! ```
//!
//! Rows and columns with a zero marginal are dropped before `Q` is formed, so
//! no denominator is ever zero. `Q` is not symmetric in general; its spectrum
//! is found with a dense real Schur decomposition.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::glcm::{four_direction_glcms, Glcm, GlcmError};
use crate::imaging::Kernel;

#[derive(Debug, Error)]
pub enum HaralickError {
    #[error(transparent)]
    Glcm(#[from] GlcmError),
    #[error("eigen-solver did not converge on Q = {matrix:?}")]
    EigenNonConvergence { matrix: Vec<Vec<f64>> },
    #[error("logarithm base must be positive and not 1, got {0}")]
    InvalidLogBase(f64),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// How f14 reads "the second largest value of Q".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MccMode {
    /// Second-largest eigenvalue (the standard f14).
    #[default]
    Eigenvalue,
    /// Second-largest matrix entry. Kept for comparison runs only.
    LiteralEntry,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaralickOptions {
    pub log_base: f64,
    pub mcc_mode: MccMode,
}

impl Default for HaralickOptions {
    fn default() -> Self {
        Self {
            log_base: 2.0,
            mcc_mode: MccMode::Eigenvalue,
        }
    }
}

impl HaralickOptions {
    fn check(&self) -> Result<(), HaralickError> {
        if self.log_base > 0.0 && self.log_base != 1.0 && self.log_base.is_finite() {
            Ok(())
        } else {
            Err(HaralickError::InvalidLogBase(self.log_base))
        }
    }

    fn log(&self, v: f64) -> f64 {
        if self.log_base == 2.0 {
            v.log2()
        } else {
            v.ln() / self.log_base.ln()
        }
    }

    /// `-v log v`, zero at `v = 0`.
    fn entropy_term(&self, v: f64) -> f64 {
        if v > 0.0 {
            -v * self.log(v)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HaralickVector {
    pub angular_second_moment: f64,
    pub contrast: f64,
    pub correlation: f64,
    pub variance: f64,
    pub inverse_difference_moment: f64,
    pub sum_average: f64,
    pub sum_variance: f64,
    pub sum_entropy: f64,
    pub entropy: f64,
    pub difference_variance: f64,
    pub difference_entropy: f64,
    pub info_correlation_1: f64,
    pub info_correlation_2: f64,
    pub max_correlation_coefficient: f64,
}

impl HaralickVector {
    pub const NAMES: [&'static str; 14] = [
        "f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8", "f9", "f10", "f11", "f12", "f13", "f14",
    ];

    pub fn to_array(&self) -> [f64; 14] {
        [
            self.angular_second_moment,
            self.contrast,
            self.correlation,
            self.variance,
            self.inverse_difference_moment,
            self.sum_average,
            self.sum_variance,
            self.sum_entropy,
            self.entropy,
            self.difference_variance,
            self.difference_entropy,
            self.info_correlation_1,
            self.info_correlation_2,
            self.max_correlation_coefficient,
        ]
    }

    pub fn from_array(a: [f64; 14]) -> Self {
        Self {
            angular_second_moment: a[0],
            contrast: a[1],
            correlation: a[2],
            variance: a[3],
            inverse_difference_moment: a[4],
            sum_average: a[5],
            sum_variance: a[6],
            sum_entropy: a[7],
            entropy: a[8],
            difference_variance: a[9],
            difference_entropy: a[10],
            info_correlation_1: a[11],
            info_correlation_2: a[12],
            max_correlation_coefficient: a[13],
        }
    }

    pub fn mcc(&self) -> f64 {
        self.max_correlation_coefficient
    }

    /// Component-wise arithmetic mean.
    pub fn mean(vectors: &[HaralickVector]) -> HaralickVector {
        let mut acc = [0.0; 14];
        for v in vectors {
            for (a, x) in acc.iter_mut().zip(v.to_array()) {
                *a += x;
            }
        }
        Self::from_array(acc.map(|a| a / vectors.len() as f64))
    }
}

/// `Q` restricted to the levels with a nonzero row marginal.
#[derive(Debug, Clone, PartialEq)]
pub struct QMatrix {
    pub q: Array2<f64>,
    /// Compact index to original gray level.
    pub levels: Vec<usize>,
}

impl QMatrix {
    pub fn size(&self) -> usize {
        self.levels.len()
    }

    /// Compact index of an original level, if it survived compaction.
    pub fn compact_index(&self, level: usize) -> Option<usize> {
        self.levels.iter().position(|&l| l == level)
    }
}

pub fn q_matrix(g: &Glcm) -> QMatrix {
    let (p, px, py) = (g.p(), g.px(), g.py());
    let rows: Vec<usize> = (0..g.levels()).filter(|&i| px[i] > 0.0).collect();
    let cols: Vec<usize> = (0..g.levels()).filter(|&k| py[k] > 0.0).collect();
    let m = rows.len();
    let mut q = Array2::zeros((m, m));
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in rows.iter().enumerate() {
            q[[a, b]] = cols
                .iter()
                .map(|&k| p[[i, k]] * p[[j, k]] / (px[i] * py[k]))
                .sum();
        }
    }
    QMatrix { q, levels: rows }
}

/// Eigenvalues of `Q`, sorted by descending real part.
pub fn q_spectrum(q: &QMatrix) -> Result<Vec<nalgebra::Complex<f64>>, HaralickError> {
    let m = q.size();
    let dense = DMatrix::from_fn(m, m, |r, c| q.q[[r, c]]);
    let schur = dense
        .try_schur(f64::EPSILON, 10_000)
        .ok_or_else(|| HaralickError::EigenNonConvergence {
            matrix: q.q.rows().into_iter().map(|r| r.to_vec()).collect(),
        })?;
    let mut eig: Vec<_> = schur.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.re.total_cmp(&a.re));
    Ok(eig)
}

pub fn mcc(g: &Glcm) -> Result<f64, HaralickError> {
    mcc_with(g, MccMode::Eigenvalue)
}

pub fn mcc_with(g: &Glcm, mode: MccMode) -> Result<f64, HaralickError> {
    let q = q_matrix(g);
    if q.size() < 2 {
        return Ok(0.0);
    }
    let second = match mode {
        MccMode::Eigenvalue => {
            let eig = q_spectrum(&q)?;
            // Eigenvalues within solver round-off of zero are zero; without
            // this a rank-one Q reports an MCC of ~1e-8 instead of 0.
            let tol = q.size() as f64 * f64::EPSILON * eig[0].norm();
            if eig[1].re.abs() <= tol {
                0.0
            } else {
                eig[1].re
            }
        }
        MccMode::LiteralEntry => {
            let mut entries: Vec<f64> = q.q.iter().copied().collect();
            entries.sort_by(|a, b| b.total_cmp(a));
            entries[1]
        }
    };
    Ok(second.clamp(0.0, 1.0).sqrt())
}

pub fn features(g: &Glcm) -> Result<HaralickVector, HaralickError> {
    features_with(g, &HaralickOptions::default())
}

pub fn features_with(g: &Glcm, opts: &HaralickOptions) -> Result<HaralickVector, HaralickError> {
    opts.check()?;
    let n = g.levels();
    let (p, px, py) = (g.p(), g.px(), g.py());

    let mut p_sum = vec![0.0; 2 * n - 1];
    let mut p_diff = vec![0.0; n];
    let (mut asm, mut contrast, mut idm, mut entropy, mut sum_ij) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((i, j), &v) in p.indexed_iter() {
        let d = i.abs_diff(j);
        p_sum[i + j] += v;
        p_diff[d] += v;
        asm += v * v;
        contrast += (d * d) as f64 * v;
        idm += v / (1.0 + (d * d) as f64);
        entropy += opts.entropy_term(v);
        sum_ij += (i * j) as f64 * v;
    }

    let mean_of = |dist: &[f64]| -> f64 { dist.iter().enumerate().map(|(k, &v)| k as f64 * v).sum() };
    let var_of = |dist: &[f64], mu: f64| -> f64 {
        dist.iter()
            .enumerate()
            .map(|(k, &v)| (k as f64 - mu).powi(2) * v)
            .sum()
    };
    let px = px.as_slice().expect("contiguous marginal");
    let py = py.as_slice().expect("contiguous marginal");
    let (mu_x, mu_y) = (mean_of(px), mean_of(py));
    let (sd_x, sd_y) = (var_of(px, mu_x).sqrt(), var_of(py, mu_y).sqrt());

    let correlation = if sd_x * sd_y > 0.0 {
        (sum_ij - mu_x * mu_y) / (sd_x * sd_y)
    } else {
        0.0
    };
    let variance: f64 = p
        .indexed_iter()
        .map(|((i, _), &v)| (i as f64 - mu_x).powi(2) * v)
        .sum();

    let sum_average = mean_of(&p_sum);
    let sum_variance = var_of(&p_sum, sum_average);
    let sum_entropy: f64 = p_sum.iter().map(|&v| opts.entropy_term(v)).sum();
    let difference_variance = var_of(&p_diff, mean_of(&p_diff));
    let difference_entropy: f64 = p_diff.iter().map(|&v| opts.entropy_term(v)).sum();

    let hx: f64 = px.iter().map(|&v| opts.entropy_term(v)).sum();
    let hy: f64 = py.iter().map(|&v| opts.entropy_term(v)).sum();
    let mut hxy1 = 0.0;
    let mut hxy2 = 0.0;
    for ((i, j), &v) in p.indexed_iter() {
        let indep = px[i] * py[j];
        if indep > 0.0 {
            let log = opts.log(indep);
            hxy1 -= v * log;
            hxy2 -= indep * log;
        }
    }
    let h_max = hx.max(hy);
    let info_correlation_1 = if h_max > 0.0 {
        (entropy - hxy1) / h_max
    } else {
        0.0
    };
    let info_correlation_2 = (1.0 - (-2.0 * (hxy2 - entropy)).exp()).max(0.0).sqrt();

    Ok(HaralickVector {
        angular_second_moment: asm,
        contrast,
        correlation,
        variance,
        inverse_difference_moment: idm,
        sum_average,
        sum_variance,
        sum_entropy,
        entropy,
        difference_variance,
        difference_entropy,
        info_correlation_1,
        info_correlation_2,
        max_correlation_coefficient: mcc_with(g, opts.mcc_mode)?,
    })
}

/// Mean of the four per-direction feature vectors.
pub fn kernel_features(k: &Kernel) -> Result<HaralickVector, HaralickError> {
    kernel_features_with(k, &HaralickOptions::default())
}

pub fn kernel_features_with(
    k: &Kernel,
    opts: &HaralickOptions,
) -> Result<HaralickVector, HaralickError> {
    let per_direction = four_direction_glcms(k)?
        .iter()
        .map(|g| features_with(g, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(HaralickVector::mean(&per_direction))
}

/// [`kernel_features_with`] for many kernels at once, in input order.
pub fn features_for_kernels(
    kernels: &[Kernel],
    opts: &HaralickOptions,
) -> Result<Vec<HaralickVector>, HaralickError> {
    kernels
        .par_iter()
        .map(|k| kernel_features_with(k, opts))
        .collect()
}

/// Writes `kernel_id,f1,...,f14` rows with 17 significant digits.
pub fn write_features_csv<'a, W, I>(mut out: W, rows: I) -> Result<(), HaralickError>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a HaralickVector)>,
{
    writeln!(out, "kernel_id,{}", HaralickVector::NAMES.join(","))?;
    for (id, v) in rows {
        write!(out, "{id}")?;
        for x in v.to_array() {
            write!(out, ",{x:.16e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn glcm(p: Array2<f64>) -> Glcm {
        Glcm::from_probabilities(p).unwrap()
    }

    fn single_cell() -> Glcm {
        let mut p = Array2::zeros((4, 4));
        p[[3, 3]] = 1.0;
        glcm(p)
    }

    #[test]
    fn single_cell_features() {
        let f = features(&single_cell()).unwrap();
        assert_eq!(f.angular_second_moment, 1.0);
        assert_eq!(f.contrast, 0.0);
        assert_eq!(f.entropy, 0.0);
        assert_eq!(f.max_correlation_coefficient, 0.0);
        assert_eq!(f.correlation, 0.0);
        assert_eq!(f.info_correlation_1, 0.0);
        assert!(f.to_array().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn checkerboard_features() {
        let f = features(&glcm(array![[0.0, 0.5], [0.5, 0.0]])).unwrap();
        assert_eq!(f.angular_second_moment, 0.5);
        assert_eq!(f.contrast, 1.0);
        assert_eq!(f.entropy, 1.0);
        assert_abs_diff_eq!(f.max_correlation_coefficient, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn uniform_features() {
        let f = features(&glcm(Array2::from_elem((2, 2), 0.25))).unwrap();
        assert_eq!(f.angular_second_moment, 0.25);
        assert_eq!(f.contrast, 0.5);
        assert_eq!(f.entropy, 2.0);
        assert_abs_diff_eq!(f.max_correlation_coefficient, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn q_examples() {
        let q = q_matrix(&glcm(array![[0.0, 0.5], [0.5, 0.0]]));
        assert_eq!(q.q, Array2::<f64>::eye(2));

        let q = q_matrix(&glcm(Array2::from_elem((2, 2), 0.25)));
        assert_eq!(q.q, Array2::from_elem((2, 2), 0.5));

        let q = q_matrix(&single_cell());
        assert_eq!(q.q, array![[1.0]]);
        assert_eq!(q.levels, vec![3]);
        assert_eq!(q.compact_index(3), Some(0));
    }

    #[test]
    fn compaction_drops_empty_levels() {
        let mut p = Array2::zeros((5, 5));
        p[[1, 3]] = 0.25;
        p[[3, 1]] = 0.25;
        p[[1, 1]] = 0.5;
        let q = q_matrix(&glcm(p));
        assert_eq!(q.levels, vec![1, 3]);
        assert!(q.q.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn mcc_examples() {
        assert_abs_diff_eq!(mcc(&glcm(array![[0.0, 0.5], [0.5, 0.0]])).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mcc(&glcm(Array2::from_elem((2, 2), 0.25))).unwrap(), 0.0, epsilon = 1e-9);
        assert_eq!(mcc(&single_cell()).unwrap(), 0.0);
    }

    #[test]
    fn literal_mode_reads_matrix_entries() {
        // Q = [[0.5, 0.5], [0.5, 0.5]]: second-largest entry is 0.5.
        let g = glcm(Array2::from_elem((2, 2), 0.25));
        assert_abs_diff_eq!(mcc_with(&g, MccMode::LiteralEntry).unwrap(), 0.5f64.sqrt());
        // Q = I: entries sorted are 1, 1, 0, 0.
        let g = glcm(array![[0.0, 0.5], [0.5, 0.0]]);
        assert_eq!(mcc_with(&g, MccMode::LiteralEntry).unwrap(), 1.0);
    }

    #[test]
    fn two_level_mcc_is_absolute_pearson_correlation() {
        // For two levels, Q has eigenvalues 1 and rho^2.
        let g = glcm(array![[0.4, 0.1], [0.1, 0.4]]);
        let f = features(&g).unwrap();
        assert_abs_diff_eq!(f.max_correlation_coefficient, f.correlation.abs(), epsilon = 1e-12);
    }

    #[test]
    fn natural_log_base_scales_entropy() {
        let opts = HaralickOptions {
            log_base: std::f64::consts::E,
            ..Default::default()
        };
        let f = features_with(&glcm(Array2::from_elem((2, 2), 0.25)), &opts).unwrap();
        assert_abs_diff_eq!(f.entropy, 4.0f64.ln(), epsilon = 1e-15);
        let bad = HaralickOptions {
            log_base: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            features_with(&single_cell(), &bad),
            Err(HaralickError::InvalidLogBase(_))
        ));
    }

    #[test]
    fn kernel_features_is_direction_mean() {
        let k = Kernel::from_grid(6, 6, 4, vec![2; 36]).unwrap();
        let f = kernel_features(&k).unwrap();
        let per = four_direction_glcms(&k).unwrap().map(|g| features(&g).unwrap());
        assert!(per.iter().all(|v| *v == f));

        let px: Vec<u8> = (0..64u32).map(|i| ((i * 7 + i / 8) % 4) as u8).collect();
        let k = Kernel::from_grid(8, 8, 4, px).unwrap();
        let f = kernel_features(&k).unwrap();
        let per = four_direction_glcms(&k).unwrap().map(|g| features(&g).unwrap());
        let mean_contrast = per.iter().map(|v| v.contrast).sum::<f64>() / 4.0;
        assert_abs_diff_eq!(f.contrast, mean_contrast, epsilon = 1e-15);
    }

    #[test]
    fn features_csv_layout() {
        let f = features(&single_cell()).unwrap();
        let mut buf = Vec::new();
        write_features_csv(&mut buf, [("x0y0w4h4", &f)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("kernel_id,f1,f2,f3,f4,f5,f6,f7,f8,f9,f10,f11,f12,f13,f14")
        );
        let row: Vec<_> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 15);
        assert_eq!(row[1], "1.0000000000000000e0");
        assert_eq!(row[1].parse::<f64>().unwrap(), 1.0);
    }

    #[test]
    fn zeros_never_produce_nan() {
        let mut p = Array2::zeros((6, 6));
        p[[0, 5]] = 0.3;
        p[[5, 0]] = 0.3;
        p[[2, 2]] = 0.4;
        let f = features(&glcm(p)).unwrap();
        assert!(f.to_array().iter().all(|v| v.is_finite()));
    }
}
