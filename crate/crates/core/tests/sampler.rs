mod common;

use common::*;
use npc_core::sampler::{measure_label_noise, mix_dialogs, DEFAULT_SHIFT, DEFAULT_WINDOW};
use npc_core::synth::poisson_turn_corpus;

#[test]
fn invariants_on_random_manifests() {
    for seed in 0..100 {
        if let Err(e) = check_random_manifest(seed) {
            panic!("manifest {seed}: {e}");
        }
    }
}

#[test]
fn impostor_streams_are_uniform() {
    let (stat, critical) = impostor_chi_square(17);
    assert!(stat < critical, "chi-square {stat} >= {critical}");
}

#[test]
fn hundred_hours_projection() {
    let total = table_one_projection();
    assert_eq!(total, 360_000);
    assert!((total as f64 - 358_000.0).abs() / 358_000.0 < 0.05);
}

#[test]
fn noise_matches_monte_carlo() {
    for seed in 0..3 {
        let corpus = poisson_turn_corpus(20, 30_000, 1000.0, 5, seed).unwrap();
        let measured = measure_label_noise(&corpus, DEFAULT_WINDOW, DEFAULT_SHIFT).fraction();
        let oracle = monte_carlo_noise(&corpus, DEFAULT_WINDOW, DEFAULT_SHIFT, 10_000, 99 + seed);
        assert!((measured - oracle).abs() < 0.01, "{measured} vs {oracle}");
        // exponential turns: a 2 s span is clean with probability exp(-0.2)
        assert!((measured - (1.0 - (-0.2f64).exp())).abs() < 0.03, "{measured}");
    }
}

#[test]
fn noise_matches_per_frame_scan_on_small_corpora() {
    for seed in 0..30 {
        let corpus = poisson_turn_corpus(3, 2_000 + 300 * seed as usize, 150.0, 3, seed).unwrap();
        let report = measure_label_noise(&corpus, 50, 37);
        // exhaustive scan of every pair
        let mut bad = 0;
        let mut total = 0;
        for s in &corpus.streams {
            let mut label = vec![""; s.num_frames()];
            for g in &s.segments {
                label[g.start..g.end].iter_mut().for_each(|l| *l = g.speaker.as_str());
            }
            let mut t = 0;
            while t + 100 <= s.num_frames() {
                total += 1;
                if label[t..t + 100].iter().any(|l| *l != label[t]) {
                    bad += 1;
                }
                t += 37;
            }
        }
        assert_eq!((report.corrupted_pairs, report.total_pairs), (bad, total));
    }
}

#[test]
fn mixed_dialogs_change_speaker_at_every_junction() {
    for seed in 0..5 {
        let corpus = talk_corpus(8, 20, seed);
        let mixed = mix_dialogs(&corpus, seed).unwrap();
        for (orig, out) in corpus.streams.iter().zip(&mixed.labels.streams) {
            assert_eq!(out.change_points().len(), out.segments.len() - 1);
            for w in out.segments.windows(2) {
                assert_ne!(w[0].speaker, w[1].speaker);
                assert_eq!(w[0].end, w[1].start);
            }
            let ratio = out.num_frames() as f64 / orig.num_frames() as f64;
            assert!((0.8..=1.2).contains(&ratio), "{ratio}");
        }
        assert_eq!(mix_dialogs(&corpus, seed).unwrap(), mixed);
    }
}
