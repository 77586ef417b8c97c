//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use npc_core::model::{
    pair_loss_and_grads, ArchitectureSpec, ConvLayerSpec, LossKind, ModelParams,
};
use npc_core::sampler::{LabeledCorpus, PairLabel};
use npc_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

/// Symmetric relative error with a small absolute floor, so entries that
/// are both near zero do not dominate.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Central difference of `f` with respect to every entry of `x`.
pub fn numeric_grad(x: &Tensor<f64>, h: f64, mut f: impl FnMut(&Tensor<f64>) -> f64) -> Vec<f64> {
    let mut probe = x.clone();
    (0..x.len())
        .map(|i| {
            let orig = probe.data()[i];
            probe.data_mut()[i] = orig + h;
            let up = f(&probe);
            probe.data_mut()[i] = orig - h;
            let down = f(&probe);
            probe.data_mut()[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| rel_err(*a, *n))
        .fold(0.0, f64::max)
}

/// `sum(out * weights)`, the scalar probe used for layer checks.
pub fn dot(out: &Tensor<f64>, weights: &Tensor<f64>) -> f64 {
    out.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum()
}

/// Small trunk for end-to-end checks: two convs, one pool, 6-d embedding.
pub fn reduced_arch(head: bool) -> ArchitectureSpec {
    ArchitectureSpec {
        input_frames: 12,
        input_dim: 8,
        convs: vec![
            ConvLayerSpec { kernel: (3, 3), channels: 2, pool_after: false },
            ConvLayerSpec { kernel: (3, 3), channels: 3, pool_after: true },
        ],
        embedding_dim: 6,
        embedding_activation: true,
        classifier_head: head,
    }
}

pub struct PairBatch {
    pub x1: Vec<Tensor<f64>>,
    pub x2: Vec<Tensor<f64>>,
    pub labels: Vec<PairLabel>,
}

pub fn random_batch(arch: &ArchitectureSpec, n: usize, seed: u64) -> PairBatch {
    let mut r = rng(seed);
    let shape = [arch.input_frames, arch.input_dim];
    let x1 = (0..n).map(|_| uniform(&shape, &mut r)).collect();
    let x2 = (0..n).map(|_| uniform(&shape, &mut r)).collect();
    let labels = (0..n)
        .map(|i| if i % 2 == 0 { PairLabel::Genuine } else { PairLabel::Impostor })
        .collect();
    PairBatch { x1, x2, labels }
}

pub fn batch_loss(params: &ModelParams<f64>, b: &PairBatch, loss: LossKind) -> f64 {
    let mut p = params.clone();
    let x1: Vec<_> = b.x1.iter().collect();
    let x2: Vec<_> = b.x2.iter().collect();
    pair_loss_and_grads(&mut p, &x1, &x2, &b.labels, loss, false).unwrap().loss
}

/// Worst relative error between backprop and central differences over the
/// parameter entries chosen by `pick(tensor_index, len)`. Each entry is
/// differenced at `h` and `h / 10`.
pub fn end_to_end_check(
    params: &ModelParams<f64>,
    batch: &PairBatch,
    loss: LossKind,
    h: f64,
    mut pick: impl FnMut(usize, usize) -> Vec<usize>,
) -> f64 {
    let mut p = params.clone();
    let x1: Vec<_> = batch.x1.iter().collect();
    let x2: Vec<_> = batch.x2.iter().collect();
    let grads = pair_loss_and_grads(&mut p, &x1, &x2, &batch.labels, loss, false)
        .unwrap()
        .grads;
    let mut worst: f64 = 0.0;
    for (ti, g) in grads.iter().enumerate() {
        for i in pick(ti, g.len()) {
            let eval = |delta: f64| {
                let mut q = params.clone();
                q.trainable_mut()[ti].data_mut()[i] += delta;
                batch_loss(&q, batch, loss)
            };
            let quotient = |h: f64| (eval(h) - eval(-h)) / (2.0 * h);
            // a ReLU or pooling switch within h shows up as a quotient that
            // still moves when the step shrinks; take the finer one then
            let (coarse, fine) = (quotient(h), quotient(h / 10.0));
            let numeric = if (coarse - fine).abs() > 1e-7f64.max(1e-6 * coarse.abs()) { fine } else { coarse };
            worst = worst.max(rel_err(g.data()[i], numeric));
        }
    }
    worst
}

/// Threshold sweep by direct counting: every distinct score is tried as an
/// accept-at-or-above threshold, plus one above the maximum.
pub fn brute_operating_points(scores: &[f64], targets: &[bool]) -> Vec<(f64, f64)> {
    let nt = targets.iter().filter(|t| **t).count() as f64;
    let nn = targets.len() as f64 - nt;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(f64::INFINITY);
    thresholds
        .iter()
        .map(|&thr| {
            let mut miss = 0.0;
            let mut fa = 0.0;
            for (s, t) in scores.iter().zip(targets) {
                if *t && *s < thr {
                    miss += 1.0;
                }
                if !*t && *s >= thr {
                    fa += 1.0;
                }
            }
            (miss / nt, fa / nn)
        })
        .collect()
}

pub fn brute_min_dcf(scores: &[f64], targets: &[bool], p: f64) -> f64 {
    let norm = p.min(1.0 - p);
    brute_operating_points(scores, targets)
        .iter()
        .map(|(frr, far)| (p * frr + (1.0 - p) * far) / norm)
        .fold(f64::INFINITY, f64::min)
}

/// Crossing of FAR and FRR along the piecewise-linear operating curve.
pub fn brute_eer(scores: &[f64], targets: &[bool]) -> f64 {
    let pts = brute_operating_points(scores, targets);
    for w in pts.windows(2) {
        let ((r0, a0), (r1, a1)) = (w[0], w[1]);
        let (d0, d1) = (a0 - r0, a1 - r1);
        if d0 == 0.0 {
            return r0;
        }
        if d0 > 0.0 && d1 <= 0.0 {
            return r0 + d0 / (d0 - d1) * (r1 - r0);
        }
    }
    pts.last().unwrap().0
}

pub fn random_trials(r: &mut ChaCha8Rng) -> (Vec<f64>, Vec<bool>) {
    let n = r.gen_range(4..120);
    let shift = r.gen_range(0.0..2.0);
    // coarse grid on some sets so ties occur
    let grid = r.gen_bool(0.3);
    let mut scores = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        let t = match i {
            0 => true,
            1 => false,
            _ => r.gen_bool(0.4),
        };
        let mut s: f64 = r.gen_range(-1.0..1.0) + if t { shift } else { 0.0 };
        if grid {
            s = (s * 4.0).round() / 4.0;
        }
        scores.push(s);
        targets.push(t);
    }
    (scores, targets)
}

/// Monte-Carlo estimate of the corrupted-pair share: uniformly drawn
/// genuine pairs checked frame by frame against the turn labels.
pub fn monte_carlo_noise(corpus: &LabeledCorpus, d: usize, delta: usize, trials: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let labels: Vec<Vec<&str>> = corpus
        .streams
        .iter()
        .map(|s| {
            let mut v = vec![""; s.num_frames()];
            for g in &s.segments {
                for slot in &mut v[g.start..g.end] {
                    *slot = g.speaker.as_str();
                }
            }
            v
        })
        .collect();
    // every genuine pair equally likely: pick a stream by its pair count
    let counts: Vec<usize> = labels
        .iter()
        .map(|l| if l.len() < 2 * d { 0 } else { (l.len() - 2 * d) / delta + 1 })
        .collect();
    let total: usize = counts.iter().sum();
    let mut bad = 0usize;
    for _ in 0..trials {
        let mut k = r.gen_range(0..total);
        let mut s = 0;
        while k >= counts[s] {
            k -= counts[s];
            s += 1;
        }
        let t = k * delta;
        let span = &labels[s][t..t + 2 * d];
        if span.iter().any(|x| *x != span[0]) {
            bad += 1;
        }
    }
    bad as f64 / trials as f64
}

/// One layer's worst-case error over a random instance, with its bound.
pub struct LayerCheck {
    pub layer: &'static str,
    pub max_rel_err: f64,
    pub tolerance: f64,
}

/// Central-difference checks of every layer primitive for one seed.
pub fn layer_checks(seed: u64) -> Vec<LayerCheck> {
    use npc_core::nn::*;
    let mut r = rng(seed);
    let h = 1e-5;
    // conv and dense are linear in each argument: the difference is exact up
    // to roundoff, which a wider step shrinks
    let hl = 1e-4;
    let mut out = Vec::new();

    // conv: 2 x 2 x 8 x 8 batch, 3 output maps of 3 x 3
    let x = uniform(&[2, 2, 8, 8], &mut r);
    let k = uniform(&[3, 2, 3, 3], &mut r);
    let b = uniform(&[3], &mut r);
    let (y, cache) = conv2d_forward(&x, &k, &b).unwrap();
    let w = uniform(y.shape(), &mut r);
    let g = conv2d_backward(&cache, &k, &w).unwrap();
    let e = [
        max_rel_err(g.input.data(), &numeric_grad(&x, hl, |x| dot(&conv2d_forward(x, &k, &b).unwrap().0, &w))),
        max_rel_err(g.kernels.data(), &numeric_grad(&k, hl, |k| dot(&conv2d_forward(&x, k, &b).unwrap().0, &w))),
        max_rel_err(g.bias.data(), &numeric_grad(&b, hl, |b| dot(&conv2d_forward(&x, &k, b).unwrap().0, &w))),
    ];
    out.push(LayerCheck { layer: "conv2d", max_rel_err: e.iter().cloned().fold(0.0, f64::max), tolerance: 1e-6 });

    // dense: 4 x 6 -> 5
    let x = uniform(&[4, 6], &mut r);
    let wt = uniform(&[5, 6], &mut r);
    let b = uniform(&[5], &mut r);
    let (y, cache) = dense_forward(&x, &wt, &b).unwrap();
    let w = uniform(y.shape(), &mut r);
    let g = dense_backward(&cache, &wt, &w).unwrap();
    let e = [
        max_rel_err(g.input.data(), &numeric_grad(&x, hl, |x| dot(&dense_forward(x, &wt, &b).unwrap().0, &w))),
        max_rel_err(g.weights.data(), &numeric_grad(&wt, hl, |wt| dot(&dense_forward(&x, wt, &b).unwrap().0, &w))),
        max_rel_err(g.bias.data(), &numeric_grad(&b, hl, |b| dot(&dense_forward(&x, &wt, b).unwrap().0, &w))),
    ];
    out.push(LayerCheck { layer: "dense", max_rel_err: e.iter().cloned().fold(0.0, f64::max), tolerance: 1e-7 });

    // batch norm, train mode: 8 x 5
    let x = uniform(&[8, 5], &mut r);
    let mut bn = BatchNormParams::<f64>::new(5);
    bn.gamma = Tensor::from_fn(&[5], |_| r.gen_range(0.5..1.5));
    bn.beta = uniform(&[5], &mut r);
    let run = |x: &Tensor<f64>, gamma: &Tensor<f64>, beta: &Tensor<f64>| {
        let mut p = bn.clone();
        p.gamma = gamma.clone();
        p.beta = beta.clone();
        batchnorm_forward(x, &mut p, Mode::Train).unwrap().0
    };
    let y = run(&x, &bn.gamma, &bn.beta);
    let w = uniform(y.shape(), &mut r);
    let mut p = bn.clone();
    let cache = batchnorm_forward(&x, &mut p, Mode::Train).unwrap().1.unwrap();
    let g = batchnorm_backward(&cache, &bn.gamma, &w).unwrap();
    let e = [
        max_rel_err(g.input.data(), &numeric_grad(&x, h, |x| dot(&run(x, &bn.gamma, &bn.beta), &w))),
        max_rel_err(g.gamma.data(), &numeric_grad(&bn.gamma, h, |gm| dot(&run(&x, gm, &bn.beta), &w))),
        max_rel_err(g.beta.data(), &numeric_grad(&bn.beta, h, |bt| dot(&run(&x, &bn.gamma, bt), &w))),
    ];
    out.push(LayerCheck { layer: "batchnorm", max_rel_err: e.iter().cloned().fold(0.0, f64::max), tolerance: 1e-5 });

    // max pool on a permutation grid: every window has a clear winner
    let n = 2 * 2 * 6 * 6;
    let mut vals: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
    for i in (1..n).rev() {
        vals.swap(i, r.gen_range(0..=i));
    }
    let x = Tensor::from_vec(&[2, 2, 6, 6], vals).unwrap();
    let (y, cache) = maxpool2x2_forward(&x).unwrap();
    let w = uniform(y.shape(), &mut r);
    let g = maxpool2x2_backward(&cache, &w).unwrap();
    let e = max_rel_err(g.data(), &numeric_grad(&x, h, |x| dot(&maxpool2x2_forward(x).unwrap().0, &w)));
    out.push(LayerCheck { layer: "maxpool", max_rel_err: e, tolerance: 1e-6 });

    // leaky relu away from the kink
    let x = Tensor::from_fn(&[30], |_| {
        let v: f64 = r.gen_range(0.05..1.0);
        if r.gen_bool(0.5) { v } else { -v }
    });
    let slope = LEAKY_SLOPE;
    let (y, cache) = leaky_relu_forward(&x, slope);
    let w = uniform(y.shape(), &mut r);
    let g = leaky_relu_backward(&cache, &w).unwrap();
    // piecewise linear, so a wide step only reduces roundoff
    let e = max_rel_err(g.data(), &numeric_grad(&x, 1e-3, |x| dot(&leaky_relu_forward(x, slope).0, &w)));
    out.push(LayerCheck { layer: "leaky_relu", max_rel_err: e, tolerance: 1e-8 });
    out
}

/// Structural invariants of the generated pair set on one random manifest.
/// Returns a description of the first violation.
pub fn check_random_manifest(seed: u64) -> Result<(), String> {
    use npc_core::sampler::{generate_corpus_pairs, genuine_pair_count, StreamInfo};
    let mut r = rng(seed);
    let d = r.gen_range(5..120);
    let delta = r.gen_range(1..250);
    let n = r.gen_range(2..12);
    let streams: Vec<StreamInfo> = (0..n)
        .map(|i| StreamInfo {
            source_id: format!("s{i}"),
            // some streams shorter than 2d
            num_frames: r.gen_range(d..(6 * d + 3 * delta)),
        })
        .collect();
    let long = streams.iter().filter(|s| s.num_frames >= 2 * d).count();
    if long == 0 {
        return Ok(());
    }
    let pairs = generate_corpus_pairs(&streams, d, delta, seed).map_err(|e| e.to_string())?;
    let frames: std::collections::HashMap<&str, usize> =
        streams.iter().map(|s| (s.source_id.as_str(), s.num_frames)).collect();
    let expected: usize = streams.iter().map(|s| genuine_pair_count(s.num_frames, d, delta)).sum();
    let closed_form: usize = streams
        .iter()
        .map(|s| if s.num_frames < 2 * d { 0 } else { (s.num_frames - 2 * d) / delta + 1 })
        .sum();
    if pairs.genuine.len() != expected || expected != closed_form {
        return Err(format!("genuine count {} vs {closed_form}", pairs.genuine.len()));
    }
    if pairs.impostor.len() != pairs.genuine.len() {
        return Err("impostor count differs from genuine count".into());
    }
    let skipped: Vec<&str> = streams
        .iter()
        .filter(|s| s.num_frames < 2 * d)
        .map(|s| s.source_id.as_str())
        .collect();
    if pairs.skipped.iter().map(String::as_str).collect::<Vec<_>>() != skipped {
        return Err("skipped streams differ".into());
    }
    for g in &pairs.genuine {
        let t = frames[g.left.source_id.as_str()];
        if g.label != PairLabel::Genuine
            || g.left.source_id != g.right.source_id
            || g.right.start != g.left.start + d
            || g.left.start % delta != 0
            || g.right.start + d > t
            || g.window_len != d
        {
            return Err(format!("bad genuine pair {g}"));
        }
    }
    for (g, imp) in pairs.genuine.iter().zip(&pairs.impostor) {
        let t = frames[imp.right.source_id.as_str()];
        if imp.label != PairLabel::Impostor
            || imp.left != g.left
            || imp.right.source_id == imp.left.source_id
            || imp.right.start + d > t
        {
            return Err(format!("bad impostor pair {imp}"));
        }
    }
    let again = generate_corpus_pairs(&streams, d, delta, seed).unwrap();
    if again.all() != pairs.all() {
        return Err("not deterministic".into());
    }
    Ok(())
}

/// Pearson statistic of impostor stream choices over 10 equal streams with
/// 100 genuine pairs each (1000 draws, 100 expected per stream), and the
/// 0.01 critical value at 9 degrees of freedom.
pub fn impostor_chi_square(seed: u64) -> (f64, f64) {
    use npc_core::sampler::{generate_genuine_pairs, generate_impostor_pairs, StreamInfo};
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let (d, delta) = (10, 10);
    let frames = 2 * d + 99 * delta;
    let streams: Vec<StreamInfo> = (0..10)
        .map(|i| StreamInfo { source_id: format!("s{i}"), num_frames: frames })
        .collect();
    let genuine: Vec<_> = streams
        .iter()
        .flat_map(|s| generate_genuine_pairs(&s.source_id, frames, d, delta).unwrap())
        .collect();
    assert_eq!(genuine.len(), 1000);
    let imp = generate_impostor_pairs(&streams, &genuine, seed).unwrap();
    let mut counts = [0f64; 10];
    for p in &imp {
        counts[p.right.source_id[1..].parse::<usize>().unwrap()] += 1.0;
    }
    let stat = counts.iter().map(|c| (c - 100.0).powi(2) / 100.0).sum();
    let critical = ChiSquared::new(9.0).unwrap().inverse_cdf(0.99);
    (stat, critical)
}

/// Total pair count for 100 hours of audio at the default window and
/// shift with one impostor per genuine pair.
pub fn table_one_projection() -> usize {
    use npc_core::sampler::{genuine_pair_count, DEFAULT_SHIFT, DEFAULT_WINDOW};
    let frames = 100 * 3600 * 100;
    2 * genuine_pair_count(frames, DEFAULT_WINDOW, DEFAULT_SHIFT)
}

/// Corpus of single-speaker talks, `utts` utterances each.
pub fn talk_corpus(streams: usize, utts: usize, seed: u64) -> LabeledCorpus {
    use npc_core::sampler::{LabeledStream, Segment};
    let mut r = rng(seed);
    LabeledCorpus {
        streams: (0..streams)
            .map(|s| {
                let mut start = 0;
                let segs = (0..utts)
                    .map(|_| {
                        let len = r.gen_range(150..400);
                        start += len;
                        Segment { speaker: format!("spk{s}"), start: start - len, end: start }
                    })
                    .collect();
                LabeledStream::new(format!("talk{s}"), segs).unwrap()
            })
            .collect(),
    }
}

/// Two synthetic speakers: a 5 min training stream and a 1 min validation
/// stream each, as 32-bit MFCC features, plus the default-geometry pairs
/// cut from them.
pub struct ToyCorpus {
    pub train: Vec<npc_core::sampler::ContrastivePair<f32>>,
    pub validation: Vec<npc_core::sampler::ContrastivePair<f32>>,
    /// Validation utterances as MFCC frame blocks, for identification.
    pub utterances: Vec<(String, String, npc_core::audio::FeatureMatrix<f32>)>,
    pub audio_seconds: f64,
}

pub fn toy_corpus() -> ToyCorpus {
    use npc_core::audio::{compute_mfcc, AudioStream, FeatureMatrix};
    use npc_core::sampler::{generate_corpus_pairs, materialize, StreamInfo};
    use npc_core::synth::{speaker_stream, Voice};
    use std::collections::HashMap;

    let mut stores = [HashMap::new(), HashMap::new()];
    let mut infos = [Vec::new(), Vec::new()];
    let mut utterances = Vec::new();
    let mut seconds = 0.0;
    for (i, spk) in ["A", "B"].iter().enumerate() {
        for (part, (secs, seed)) in [(300.0, 10), (60.0, 20)].into_iter().enumerate() {
            let id = format!("{}{spk}", ["train", "val"][part]);
            let s = speaker_stream(&id, spk, &Voice::preset(i), secs, seed + i as u64).unwrap();
            seconds += s.samples.len() as f64 / 16000.0;
            let f = compute_mfcc::<f32>(&AudioStream::new(id.clone(), s.samples).unwrap()).unwrap();
            if part == 1 {
                for (k, g) in s.segments.iter().enumerate() {
                    let uid = format!("{id}-{k:03}");
                    let block = FeatureMatrix::new(uid.clone(), f.frames.rows(g.start, g.end)).unwrap();
                    utterances.push((uid, spk.to_string(), block));
                }
            }
            infos[part].push(StreamInfo { source_id: id.clone(), num_frames: f.num_frames() });
            stores[part].insert(id, f);
        }
    }
    let cut = |part: usize, seed: u64| {
        generate_corpus_pairs(&infos[part], 100, 200, seed)
            .unwrap()
            .all()
            .iter()
            .map(|p| materialize(p, &stores[part]).unwrap())
            .collect::<Vec<_>>()
    };
    ToyCorpus {
        train: cut(0, 1),
        validation: cut(1, 2),
        utterances,
        audio_seconds: seconds,
    }
}

/// Cheap trunk over the full 100 x 40 window for repeated training runs.
pub fn small_audio_arch() -> ArchitectureSpec {
    ArchitectureSpec {
        input_frames: 100,
        input_dim: 40,
        convs: vec![
            ConvLayerSpec { kernel: (5, 5), channels: 4, pool_after: true },
            ConvLayerSpec { kernel: (3, 3), channels: 8, pool_after: true },
        ],
        embedding_dim: 32,
        embedding_activation: true,
        classifier_head: true,
    }
}
