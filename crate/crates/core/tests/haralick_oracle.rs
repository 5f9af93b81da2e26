mod oracle;

use epigraph::glcm::Glcm;
use epigraph::haralick::{features, mcc, q_matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn f1_to_f13_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..400 {
        let levels = rng.random_range(1..=6);
        let p = oracle::random_distribution(&mut rng, levels);
        let g = Glcm::from_probabilities(oracle::to_array(&p)).unwrap();
        let got = features(&g).unwrap().to_array();
        let want = oracle::haralick_f1_to_f13(&p);
        for k in 0..13 {
            assert!(
                (got[k] - want[k]).abs() <= 1e-9,
                "case {case} f{}: {} vs {}",
                k + 1,
                got[k],
                want[k]
            );
        }
    }
}

#[test]
fn mcc_matches_singular_value_route() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..400 {
        let levels = rng.random_range(2..=8);
        let p = oracle::random_distribution(&mut rng, levels);
        let g = Glcm::from_probabilities(oracle::to_array(&p)).unwrap();
        let (got, want) = (mcc(&g).unwrap(), oracle::mcc_via_svd(&p));
        // Compared as squares: sqrt would magnify round-off near zero.
        assert!((got * got - want * want).abs() <= 1e-9, "case {case}: {got} vs {want}");
    }
}

#[test]
fn q_matches_defining_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let levels = rng.random_range(1..=7);
        let p = oracle::random_distribution(&mut rng, levels);
        let q = q_matrix(&Glcm::from_probabilities(oracle::to_array(&p)).unwrap());
        let want = oracle::q_rows(&p);
        assert_eq!(q.size(), want.len());
        for (r, row) in want.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                assert!((q.q[[r, c]] - v).abs() <= 1e-12);
            }
        }
    }
}
