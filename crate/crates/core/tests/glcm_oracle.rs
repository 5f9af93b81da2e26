mod oracle;

use epigraph::glcm::{cooccurrence, Offset};
use epigraph::imaging::Kernel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn counts_match_naive_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..500 {
        let (w, h) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let levels = rng.random_range(2..=16);
        let pixels: Vec<u8> = (0..w * h).map(|_| rng.random_range(0..levels as u8)).collect();
        let k = Kernel::from_grid(w, h, levels, pixels.clone()).unwrap();
        for off in Offset::CANONICAL {
            for symmetric in [true, false] {
                let got = cooccurrence(&k, off, symmetric);
                let want = oracle::naive_glcm(w, h, levels, &pixels, (off.dy, off.dx), symmetric);
                for i in 0..levels {
                    for j in 0..levels {
                        assert_eq!(got[[i, j]], want[i][j]);
                    }
                }
            }
        }
    }
}
