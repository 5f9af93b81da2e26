//! Gray-level co-occurrence matrices.
//!
//! A GLCM counts how often level `i` sits next to level `j` at a fixed pixel
//! displacement. Counts are taken at distance one in the four canonical
//! directions and normalized per direction into a joint distribution `p`
//! with row marginal `px` and column marginal `py`.

use std::io::Write;

use ndarray::{Array1, Array2, Axis};
use thiserror::Error;

use crate::imaging::Kernel;

#[derive(Debug, Error)]
pub enum GlcmError {
    #[error("empty GLCM: no pixel pairs for the offset (kernel too small for the direction)")]
    Empty,
    #[error("GLCM must be square and non-empty, got {rows}x{cols}")]
    Shape { rows: usize, cols: usize },
    #[error("GLCM probabilities must be finite and non-negative and sum to 1 (sum = {sum})")]
    NotDistribution { sum: f64 },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Pixel displacement `(dy, dx)` from a pixel to its partner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Offset {
    pub dy: isize,
    pub dx: isize,
}

impl Offset {
    pub const DEG_0: Offset = Offset { dy: 0, dx: 1 };
    pub const DEG_45: Offset = Offset { dy: -1, dx: 1 };
    pub const DEG_90: Offset = Offset { dy: -1, dx: 0 };
    pub const DEG_135: Offset = Offset { dy: -1, dx: -1 };

    pub const CANONICAL: [Offset; 4] = [Self::DEG_0, Self::DEG_45, Self::DEG_90, Self::DEG_135];
}

/// Raw pair counts for `offset`. In symmetric mode every pair is also counted
/// reversed, so the total is twice the number of pair positions.
pub fn cooccurrence(kernel: &Kernel, offset: Offset, symmetric: bool) -> Array2<u64> {
    let levels = kernel.levels();
    let (w, h) = (kernel.width() as isize, kernel.height() as isize);
    let mut counts = Array2::<u64>::zeros((levels, levels));

    let ys = offset.dy.min(0).unsigned_abs() as isize..h - offset.dy.max(0);
    let xs = offset.dx.min(0).unsigned_abs() as isize..w - offset.dx.max(0);
    for y in ys {
        for x in xs.clone() {
            let a = kernel.get(x as usize, y as usize) as usize;
            let b = kernel.get((x + offset.dx) as usize, (y + offset.dy) as usize) as usize;
            counts[[a, b]] += 1;
            if symmetric {
                counts[[b, a]] += 1;
            }
        }
    }
    counts
}

/// Normalized co-occurrence distribution with its marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    p: Array2<f64>,
    px: Array1<f64>,
    py: Array1<f64>,
    pair_count: u64,
}

impl Glcm {
    /// Wraps an explicit probability matrix. `pair_count` is recorded as 0
    /// since no counts were observed.
    pub fn from_probabilities(p: Array2<f64>) -> Result<Self, GlcmError> {
        let (rows, cols) = p.dim();
        if rows != cols || rows == 0 {
            return Err(GlcmError::Shape { rows, cols });
        }
        let sum = p.sum();
        if p.iter().any(|&v| !v.is_finite() || v < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(GlcmError::NotDistribution { sum });
        }
        Ok(Self::with_marginals(p, 0))
    }

    fn with_marginals(p: Array2<f64>, pair_count: u64) -> Self {
        let px = p.sum_axis(Axis(1));
        let py = p.sum_axis(Axis(0));
        Self {
            p,
            px,
            py,
            pair_count,
        }
    }

    pub fn levels(&self) -> usize {
        self.p.nrows()
    }

    pub fn p(&self) -> &Array2<f64> {
        &self.p
    }

    pub fn px(&self) -> &Array1<f64> {
        &self.px
    }

    pub fn py(&self) -> &Array1<f64> {
        &self.py
    }

    pub fn pair_count(&self) -> u64 {
        self.pair_count
    }

    /// Debug dump: a `levels,pair_count` header and value line followed by
    /// the matrix, one row per line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), GlcmError> {
        writeln!(out, "levels,pair_count")?;
        writeln!(out, "{},{}", self.levels(), self.pair_count)?;
        for row in self.p.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

pub fn normalize_glcm(counts: &Array2<u64>) -> Result<Glcm, GlcmError> {
    let (rows, cols) = counts.dim();
    if rows != cols || rows == 0 {
        return Err(GlcmError::Shape { rows, cols });
    }
    let total: u64 = counts.sum();
    if total == 0 {
        return Err(GlcmError::Empty);
    }
    let p = counts.mapv(|c| c as f64 / total as f64);
    Ok(Glcm::with_marginals(p, total))
}

/// Symmetric GLCMs for 0°, 45°, 90° and 135°, in that order.
pub fn four_direction_glcms(kernel: &Kernel) -> Result<[Glcm; 4], GlcmError> {
    let [a, b, c, d] = Offset::CANONICAL.map(|off| normalize_glcm(&cooccurrence(kernel, off, true)));
    Ok([a?, b?, c?, d?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn checkerboard(n: usize) -> Kernel {
        let pixels = (0..n * n).map(|i| ((i % n + i / n) % 2) as u8).collect();
        Kernel::from_grid(n, n, 2, pixels).unwrap()
    }

    /// Direct double loop over every pixel and its partner, bounds-checked.
    fn naive_counts(k: &Kernel, off: Offset, symmetric: bool) -> Array2<u64> {
        let mut c = Array2::zeros((k.levels(), k.levels()));
        for y in 0..k.height() as isize {
            for x in 0..k.width() as isize {
                let (nx, ny) = (x + off.dx, y + off.dy);
                if nx < 0 || ny < 0 || nx >= k.width() as isize || ny >= k.height() as isize {
                    continue;
                }
                let a = k.get(x as usize, y as usize) as usize;
                let b = k.get(nx as usize, ny as usize) as usize;
                c[[a, b]] += 1;
                if symmetric {
                    c[[b, a]] += 1;
                }
            }
        }
        c
    }

    #[test]
    fn checkerboard_2x2_horizontal() {
        let k = checkerboard(2);
        assert_eq!(cooccurrence(&k, Offset::DEG_0, true), array![[0, 2], [2, 0]]);
    }

    #[test]
    fn constant_kernel_single_cell() {
        let k = Kernel::from_grid(5, 4, 8, vec![3; 20]).unwrap();
        for off in Offset::CANONICAL {
            let c = cooccurrence(&k, off, true);
            assert_eq!(c.iter().filter(|&&v| v > 0).count(), 1);
            assert!(c[[3, 3]] > 0);
        }
    }

    #[test]
    fn horizontal_total_formula() {
        for (w, h) in [(2, 1), (3, 5), (20, 20), (7, 2)] {
            let k = Kernel::from_grid(w, h, 4, vec![1; w * h]).unwrap();
            let total: u64 = cooccurrence(&k, Offset::DEG_0, true).sum();
            assert_eq!(total as usize, 2 * h * (w - 1));
        }
    }

    #[test]
    fn normalize_examples() {
        let g = normalize_glcm(&array![[0, 2], [2, 0]]).unwrap();
        assert_eq!(g.p(), &array![[0.0, 0.5], [0.5, 0.0]]);
        assert_eq!(g.px(), &array![0.5, 0.5]);
        assert_eq!(g.py(), &array![0.5, 0.5]);
        assert_eq!(g.pair_count(), 4);

        let mut counts = Array2::zeros((4, 4));
        counts[[3, 3]] = 760;
        let g = normalize_glcm(&counts).unwrap();
        assert_eq!(g.p()[[3, 3]], 1.0);
        assert_eq!((g.px()[3], g.py()[3]), (1.0, 1.0));

        assert!(matches!(
            normalize_glcm(&Array2::zeros((3, 3))),
            Err(GlcmError::Empty)
        ));
    }

    #[test]
    fn four_directions_examples() {
        let k = Kernel::from_grid(6, 6, 16, vec![9; 36]).unwrap();
        let gs = four_direction_glcms(&k).unwrap();
        assert!(gs.iter().all(|g| g.p() == gs[0].p()));

        let k = Kernel::from_grid(20, 20, 16, (0..400).map(|i| (i % 16) as u8).collect()).unwrap();
        assert_eq!(four_direction_glcms(&k).unwrap()[0].pair_count(), 760);

        let gs = four_direction_glcms(&checkerboard(8)).unwrap();
        let expected = array![[0.0, 0.5], [0.5, 0.0]];
        assert_eq!(gs[0].p(), &expected);
        assert_eq!(gs[2].p(), &expected);
    }

    #[test]
    fn degenerate_kernel_errors() {
        let k = Kernel::from_grid(1, 5, 4, vec![0; 5]).unwrap();
        assert!(matches!(four_direction_glcms(&k), Err(GlcmError::Empty)));
    }

    #[test]
    fn asymmetric_mode_counts_each_pair_once() {
        let k = Kernel::from_grid(3, 1, 3, vec![0, 1, 2]).unwrap();
        assert_eq!(
            cooccurrence(&k, Offset::DEG_0, false),
            array![[0, 1, 0], [0, 0, 1], [0, 0, 0]]
        );
    }

    #[test]
    fn csv_dump_has_header() {
        let g = normalize_glcm(&array![[0, 2], [2, 0]]).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "levels,pair_count");
        assert_eq!(lines[1], "2,4");
        assert_eq!(lines.len(), 4);
    }

    fn kernel_strategy() -> impl Strategy<Value = Kernel> {
        (1usize..=8, 1usize..=8, 2usize..=6).prop_flat_map(|(w, h, levels)| {
            proptest::collection::vec(0..levels as u8, w * h)
                .prop_map(move |px| Kernel::from_grid(w, h, levels, px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn matches_naive_oracle(k in kernel_strategy(), symmetric in any::<bool>()) {
            for off in Offset::CANONICAL {
                prop_assert_eq!(cooccurrence(&k, off, symmetric), naive_counts(&k, off, symmetric));
            }
        }

        #[test]
        fn normalized_invariants(k in kernel_strategy()) {
            for off in Offset::CANONICAL {
                let counts = cooccurrence(&k, off, true);
                prop_assert_eq!(&counts, &counts.t());
                let Ok(g) = normalize_glcm(&counts) else { continue };
                prop_assert!((g.p().sum() - 1.0).abs() < 1e-12);
                prop_assert_eq!(g.p(), &g.p().t());
                prop_assert_eq!(g.px(), g.py());
                for i in 0..g.levels() {
                    let row: f64 = g.p().row(i).sum();
                    prop_assert!((g.px()[i] - row).abs() < 1e-12);
                }
            }
        }
    }
}
