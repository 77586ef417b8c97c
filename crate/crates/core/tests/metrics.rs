mod common;

use common::*;
use npc_core::eval::{compute_eer, compute_min_dcf, DcfParams};

#[test]
fn eer_and_min_dcf_match_brute_force() {
    let mut r = rng(2024);
    for _ in 0..200 {
        let (s, t) = random_trials(&mut r);
        let eer = compute_eer(&s, &t).unwrap().eer;
        assert!((eer - brute_eer(&s, &t)).abs() < 1e-9);
        let dcf = compute_min_dcf(&s, &t, &DcfParams::default()).unwrap();
        assert!((dcf - brute_min_dcf(&s, &t, 0.01)).abs() < 1e-9);
    }
}

#[test]
fn eer_invariant_under_monotone_maps() {
    let mut r = rng(77);
    let maps: [fn(f64) -> f64; 3] = [|x| 3.0 * x - 7.0, |x| x.exp(), |x| x.atan()];
    for _ in 0..50 {
        let (s, t) = random_trials(&mut r);
        let base = compute_eer(&s, &t).unwrap().eer;
        let base_dcf = compute_min_dcf(&s, &t, &DcfParams::default()).unwrap();
        for f in maps {
            let m: Vec<f64> = s.iter().map(|x| f(*x)).collect();
            assert!((compute_eer(&m, &t).unwrap().eer - base).abs() < 1e-12);
            assert!((compute_min_dcf(&m, &t, &DcfParams::default()).unwrap() - base_dcf).abs() < 1e-12);
        }
    }
}
