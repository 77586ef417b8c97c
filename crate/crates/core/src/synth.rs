//! Synthetic speakers for tests and demos.
//!
//! A voice is a source-filter model: a jittered pulse train at the
//! speaker's pitch plus breath noise, through a cascade of formant
//! resonators whose frequencies are the vowel targets scaled by the
//! speaker's vocal-tract factor, one fixed speaker resonance and a
//! spectral-tilt low-pass. Vowel targets change every 60-200 ms.

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{frame_count, FRAME_HOP, SAMPLE_RATE};
use crate::error::{NpcError, Result};
use crate::sampler::{LabeledCorpus, LabeledStream, Segment};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Voice {
    pub f0_hz: f64,
    /// Multiplies every vowel formant.
    pub formant_scale: f64,
    /// One-pole low-pass coefficient in `[0, 1)`; larger is darker.
    pub tilt: f64,
    /// Noise share of the excitation.
    pub breath: f64,
    pub resonance_hz: f64,
}

const PRESETS: [Voice; 6] = [
    Voice { f0_hz: 105.0, formant_scale: 1.0, tilt: 0.85, breath: 0.05, resonance_hz: 3300.0 },
    Voice { f0_hz: 215.0, formant_scale: 1.18, tilt: 0.55, breath: 0.2, resonance_hz: 4700.0 },
    Voice { f0_hz: 150.0, formant_scale: 1.08, tilt: 0.75, breath: 0.1, resonance_hz: 2700.0 },
    Voice { f0_hz: 270.0, formant_scale: 1.26, tilt: 0.45, breath: 0.3, resonance_hz: 5400.0 },
    Voice { f0_hz: 125.0, formant_scale: 0.94, tilt: 0.9, breath: 0.15, resonance_hz: 3900.0 },
    Voice { f0_hz: 185.0, formant_scale: 1.12, tilt: 0.65, breath: 0.08, resonance_hz: 6000.0 },
];

/// (F1, F2, F3) for /a/, /e/, /i/, /o/, /u/.
const VOWELS: [[f64; 3]; 5] = [
    [730.0, 1090.0, 2440.0],
    [530.0, 1840.0, 2480.0],
    [270.0, 2290.0, 3010.0],
    [570.0, 840.0, 2410.0],
    [300.0, 870.0, 2240.0],
];

impl Voice {
    /// Fixed, mutually distinct voices for the first six indices, random
    /// ones (seeded by the index) after that.
    pub fn preset(index: usize) -> Voice {
        if let Some(v) = PRESETS.get(index) {
            return *v;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + index as u64);
        Voice::sample(&mut rng)
    }

    pub fn sample(rng: &mut impl Rng) -> Voice {
        Voice {
            f0_hz: rng.gen_range(90.0..280.0),
            formant_scale: rng.gen_range(0.9..1.3),
            tilt: rng.gen_range(0.4..0.9),
            breath: rng.gen_range(0.02..0.3),
            resonance_hz: rng.gen_range(2500.0..6500.0),
        }
    }
}

/// Two-pole resonator with unit gain near its peak.
#[derive(Clone, Copy, Default)]
struct Resonator {
    a1: f64,
    a2: f64,
    gain: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn tune(&mut self, freq: f64, bandwidth: f64) {
        let fs = SAMPLE_RATE as f64;
        let r = (-std::f64::consts::PI * bandwidth / fs).exp();
        self.a1 = 2.0 * r * (2.0 * std::f64::consts::PI * freq / fs).cos();
        self.a2 = -r * r;
        self.gain = 1.0 - r;
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.gain * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// `num_samples` of 16 kHz speech-like audio in the given voice.
pub fn synthesize(voice: &Voice, num_samples: usize, seed: u64) -> Vec<i16> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = SAMPLE_RATE as f64;
    let nyquist_guard = 0.45 * fs;
    let noise = Uniform::new_inclusive(-1.0, 1.0);
    let mut res = [Resonator::default(); 4];
    res[3].tune(voice.resonance_hz.min(nyquist_guard), 300.0);
    let mut out = Vec::with_capacity(num_samples);
    let (mut phase, mut lp, mut n) = (0.0f64, 0.0f64, 0usize);
    while n < num_samples {
        let seg_len = ((rng.gen_range(0.06..0.2) * fs) as usize).min(num_samples - n);
        let vowel = VOWELS[rng.gen_range(0..VOWELS.len())];
        for (k, f) in vowel.iter().enumerate() {
            let freq = (f * voice.formant_scale).min(nyquist_guard);
            res[k].tune(freq, 60.0 + 40.0 * k as f64);
        }
        let pause = rng.gen_bool(0.08);
        let pitch = voice.f0_hz * rng.gen_range(0.9..1.1);
        for i in 0..seg_len {
            let t = (n + i) as f64 / fs;
            let f0 = pitch * (1.0 + 0.03 * (2.0 * std::f64::consts::PI * 5.0 * t).sin());
            phase += f0 / fs;
            let pulse = if phase >= 1.0 {
                phase -= 1.0;
                1.0
            } else {
                0.0
            };
            let breath = voice.breath * noise.sample(&mut rng);
            let excitation = if pause { 0.02 * breath } else { pulse + breath };
            let mut y = excitation;
            for r in &mut res {
                y = r.step(y);
            }
            lp = (1.0 - voice.tilt) * y + voice.tilt * lp;
            out.push(lp);
        }
        n += seg_len;
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { 12_000.0 / peak } else { 0.0 };
    out.iter()
        .map(|v| (v * scale + noise.sample(&mut rng) * 4.0).round() as i16)
        .collect()
}

/// One speaker's stream of consecutive utterances with frame-level turn
/// labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeakerStream {
    pub source_id: String,
    pub speaker: String,
    pub samples: Vec<i16>,
    pub segments: Vec<Segment>,
}

/// Utterances of 1.5-4 s, each its own segment. Boundaries fall on frame
/// hops; the last segment ends at the stream's final frame.
pub fn speaker_stream(
    source_id: &str,
    speaker: &str,
    voice: &Voice,
    seconds: f64,
    seed: u64,
) -> Result<SpeakerStream> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = (seconds * SAMPLE_RATE as f64) as usize;
    let mut samples = Vec::with_capacity(total);
    let mut bounds = vec![0usize];
    while samples.len() < total {
        let hops = (rng.gen_range(1.5..4.0) * SAMPLE_RATE as f64) as usize / FRAME_HOP;
        let len = (hops * FRAME_HOP).min(total - samples.len());
        samples.extend(synthesize(voice, len, rng.gen()));
        bounds.push(samples.len() / FRAME_HOP);
    }
    let frames = frame_count(samples.len());
    if frames < 2 {
        return Err(NpcError::TooShort {
            samples: samples.len(),
            needed: 2 * FRAME_HOP + 400,
        });
    }
    let mut segments = Vec::new();
    for w in bounds.windows(2) {
        let (start, end) = (w[0], w[1].min(frames));
        if start < end {
            segments.push(Segment {
                speaker: speaker.to_string(),
                start,
                end,
            });
        }
    }
    segments.last_mut().expect("at least one utterance").end = frames;
    Ok(SpeakerStream {
        source_id: source_id.to_string(),
        speaker: speaker.to_string(),
        samples,
        segments,
    })
}

/// Index-only corpus whose turn lengths are exponential with the given
/// mean and whose speaker changes at every turn.
pub fn poisson_turn_corpus(
    num_streams: usize,
    frames_per_stream: usize,
    mean_turn_frames: f64,
    num_speakers: usize,
    seed: u64,
) -> Result<LabeledCorpus> {
    if num_speakers < 2 || mean_turn_frames <= 0.0 || frames_per_stream == 0 {
        return Err(NpcError::InvalidConfig(
            "need two speakers, a positive mean turn and non-empty streams".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut streams = Vec::with_capacity(num_streams);
    for s in 0..num_streams {
        let mut segments = Vec::new();
        let (mut start, mut who) = (0usize, rng.gen_range(0..num_speakers));
        while start < frames_per_stream {
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            let len = ((-u.ln() * mean_turn_frames).round() as usize).max(1);
            let end = (start + len).min(frames_per_stream);
            segments.push(Segment {
                speaker: format!("spk{who}"),
                start,
                end,
            });
            start = end;
            who = (who + rng.gen_range(1..num_speakers)) % num_speakers;
        }
        streams.push(LabeledStream::new(format!("stream{s:04}"), segments)?);
    }
    Ok(LabeledCorpus { streams })
}
