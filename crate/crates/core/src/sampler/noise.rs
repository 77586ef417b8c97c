use super::mix::LabeledCorpus;
use super::pairs::genuine_pair_count;

/// How many genuine pairs straddle a true speaker change.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseReport {
    pub corrupted_pairs: usize,
    pub total_pairs: usize,
    pub change_points: usize,
    pub total_frames: usize,
}

impl NoiseReport {
    pub fn fraction(&self) -> f64 {
        if self.total_pairs == 0 {
            0.0
        } else {
            self.corrupted_pairs as f64 / self.total_pairs as f64
        }
    }
}

/// A genuine pair at `t` is corrupted iff a speaker change falls strictly
/// inside `(t, t + 2d)`, i.e. its frames `[t, t + 2d)` are not all one
/// speaker. Streams shorter than `2d` contribute no pairs.
pub fn measure_label_noise(corpus: &LabeledCorpus, d: usize, delta: usize) -> NoiseReport {
    let mut report = NoiseReport {
        corrupted_pairs: 0,
        total_pairs: 0,
        change_points: 0,
        total_frames: 0,
    };
    for stream in &corpus.streams {
        let t_len = stream.num_frames();
        let changes = stream.change_points();
        report.change_points += changes.len();
        report.total_frames += t_len;
        let n = genuine_pair_count(t_len, d, delta);
        report.total_pairs += n;
        for p in 0..n {
            let t = p * delta;
            // first change strictly after t
            let i = changes.partition_point(|&c| c <= t);
            if changes.get(i).is_some_and(|&c| c < t + 2 * d) {
                report.corrupted_pairs += 1;
            }
        }
    }
    report
}
