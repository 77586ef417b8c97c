use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use npc_core::audio::{
    load_features, read_header, write_matrix, write_wav, ContainerKind, FRAME_HOP, FRAME_LEN,
    SAMPLE_RATE,
};
use npc_core::embed::{extract_embeddings, mfcc_stats_stream, pool_utterance};
use npc_core::eval::{
    frame_id_with_splits, identification_csv, identification_text, parse_trials, plan_splits,
    score_trials, utterance_id_with_splits, AccuracyTable, DcfParams, ExperimentConfig, Utterance,
    VerificationReport,
};
use npc_core::io::{atomic_write, read_text};
use npc_core::model::{
    build_model, load_checkpoint, save_checkpoint, train, weight_mirror_stats, ArchitectureSpec,
    LossKind, ModelParams, SpecSource, TrainConfig,
};
use npc_core::nn::RmsPropConfig;
use npc_core::sampler::{
    assemble_mixed_features, format_pairs, format_segments, generate_corpus_pairs, mix_dialogs,
    parse_pairs, PairSpec,
};
use npc_core::synth::{speaker_stream, Voice};
use npc_core::{NpcError, Result, Tensor};

use crate::config::{Level, RunConfig};
use crate::data::{self, Store};

fn write(path: &Path, text: &str) -> Result<()> {
    atomic_write(path, text.as_bytes())
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    if cfg.speakers < 2 || cfg.streams_per_speaker == 0 || !(cfg.seconds >= 1.0) {
        return Err(NpcError::InvalidConfig(
            "synth needs 2+ speakers, 1+ streams each and at least 1 s per stream".into(),
        ));
    }
    let out = cfg.prepare_out()?;
    let mut manifest = String::new();
    for s in 0..cfg.speakers {
        let voice = Voice::preset(s);
        for k in 0..cfg.streams_per_speaker {
            let id = format!("spk{s:02}_{k}");
            let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add((s * 1000 + k) as u64);
            let st = speaker_stream(&id, &format!("spk{s:02}"), &voice, cfg.seconds, seed)?;
            write_wav(&out.join(format!("{id}.wav")), &st.samples)?;
            write(&out.join(format!("{id}.seg")), &format_segments(&st.segments))?;
            let _ = writeln!(manifest, "{id}\t{id}.wav\t{id}.seg");
            eprintln!("synth: {id} {} utterances, {:.1} s", st.segments.len(), cfg.seconds);
        }
    }
    write(&out.join("manifest.tsv"), &manifest)
}

pub fn features(cfg: &RunConfig) -> Result<()> {
    let manifest = data::manifest(cfg.require(&cfg.manifest, "manifest")?)?;
    let out = cfg.prepare_out()?;
    let mut listing = String::new();
    let mut summary = String::from("source_id\tframes\tseconds\n");
    let mut failures = Vec::new();
    for e in &manifest.entries {
        let target = out.join(format!("{}.npcf", e.source_id));
        let result = if target.is_file() {
            read_header(&target, ContainerKind::Features).map(|(t, _)| (t, "cached"))
        } else {
            load_features::<f32>(&e.source_id, &e.path).and_then(|f| {
                write_matrix(&target, ContainerKind::Features, &f.frames)?;
                Ok((f.num_frames(), "computed"))
            })
        };
        match result {
            Ok((frames, status)) => {
                let seconds = (frames.saturating_sub(1) * FRAME_HOP + FRAME_LEN) as f64 / SAMPLE_RATE as f64;
                eprintln!("features: {} {frames} frames ({seconds:.2} s) {status}", e.source_id);
                let _ = write!(listing, "{}\t{}.npcf", e.source_id, e.source_id);
                if let Some(seg) = &e.segments {
                    let name = format!("{}.seg", e.source_id);
                    std::fs::copy(seg, out.join(&name))?;
                    let _ = write!(listing, "\t{name}");
                }
                listing.push('\n');
                let _ = writeln!(summary, "{}\t{frames}\t{seconds:.2}", e.source_id);
            }
            Err(err) => {
                eprintln!("features: {} failed: {err}", e.source_id);
                failures.push(format!("{} ({err})", e.source_id));
            }
        }
    }
    write(&out.join("manifest.tsv"), &listing)?;
    write(&out.join("features.tsv"), &summary)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(NpcError::InvalidConfig(format!(
            "{} stream(s) failed: {}",
            failures.len(),
            failures.join("; ")
        )))
    }
}

pub fn pairs(cfg: &RunConfig) -> Result<()> {
    let manifest = data::manifest(cfg.require(&cfg.manifest, "manifest")?)?;
    let infos = data::stream_infos(&manifest)?;
    let pairs = generate_corpus_pairs(&infos, cfg.d, cfg.delta, cfg.seed)?;
    let out = cfg.prepare_out()?;
    write(&out.join("pairs.tsv"), &format_pairs(&pairs.all()))?;
    eprintln!(
        "pairs: {} genuine, {} impostor from {} streams",
        pairs.genuine.len(),
        pairs.impostor.len(),
        infos.len()
    );
    for id in &pairs.skipped {
        eprintln!("pairs: skipped `{id}` (shorter than 2d = {} frames)", 2 * cfg.d);
    }
    Ok(())
}

pub fn mix(cfg: &RunConfig) -> Result<()> {
    let manifest = data::manifest(cfg.require(&cfg.manifest, "manifest")?)?;
    let corpus = data::labeled_corpus(&manifest)?;
    let store = data::store(&manifest)?;
    let mixed = mix_dialogs(&corpus, cfg.seed)?;
    let features = assemble_mixed_features(&mixed, &store)?;
    let out = cfg.prepare_out()?;
    let mut listing = String::new();
    for (stream, f) in mixed.labels.streams.iter().zip(&features) {
        let id = &stream.source_id;
        write_matrix(&out.join(format!("{id}.npcf")), ContainerKind::Features, &f.frames)?;
        write(&out.join(format!("{id}.seg")), &format_segments(&stream.segments))?;
        let _ = writeln!(listing, "{id}\t{id}.npcf\t{id}.seg");
        eprintln!(
            "mix: {id} {} frames, {} speaker changes",
            f.num_frames(),
            stream.change_points().len()
        );
    }
    write(&out.join("manifest.tsv"), &listing)
}

fn read_pairs(path: &Path, d: usize) -> Result<Vec<PairSpec>> {
    parse_pairs(&read_text(path)?, &path.to_string_lossy(), d)
}

pub fn train_cmd(cfg: &RunConfig) -> Result<()> {
    let manifest_path = cfg.require(&cfg.manifest, "manifest")?;
    let store = data::store(&data::manifest(manifest_path)?)?;
    let specs = read_pairs(cfg.require(&cfg.pairs, "pairs")?, cfg.d)?;
    let val_specs = match &cfg.val_pairs {
        Some(p) => read_pairs(p, cfg.d)?,
        None => Vec::new(),
    };
    let val_store: Store = match &cfg.val_manifest {
        Some(p) if p != manifest_path && !val_specs.is_empty() => data::store(&data::manifest(p)?)?,
        _ => HashMap::new(),
    };
    let val_store = if val_store.is_empty() { &store } else { &val_store };
    let loss: LossKind = cfg.loss.into();
    let arch = ArchitectureSpec {
        input_frames: cfg.d,
        classifier_head: loss == LossKind::CrossEntropy,
        ..ArchitectureSpec::default()
    };
    let initial = build_model::<f32>(&arch, cfg.seed)?;
    let tc = TrainConfig {
        loss,
        batch_size: cfg.batch,
        epochs: cfg.epochs,
        seed: cfg.seed,
        optimizer: RmsPropConfig {
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            ..RmsPropConfig::default()
        },
        cosine_clamp: cfg.clamp,
    };
    let out = cfg.prepare_out()?;
    eprintln!(
        "train: {} pairs, {} validation pairs, {} parameters",
        specs.len(),
        val_specs.len(),
        initial.param_count()
    );
    let outcome = train(
        initial,
        &SpecSource { specs: &specs, store: &store },
        &SpecSource { specs: &val_specs, store: val_store },
        &tc,
        |e| {
            let val = match (e.val_loss, e.val_accuracy) {
                (Some(l), Some(a)) => format!(" val_loss {l:.4} val_acc {a:.4}"),
                _ => String::new(),
            };
            eprintln!(
                "train: epoch {} loss {:.4} acc {:.4}{val}",
                e.epoch + 1,
                e.train_loss,
                e.train_accuracy
            );
        },
    )?;
    save_checkpoint(&out.join("model.npck"), &outcome.best, None)?;
    save_checkpoint(&out.join("last.npck"), &outcome.last, Some(&outcome.optimizer))?;
    write(&out.join("report.tsv"), &outcome.report.to_tsv())?;
    eprintln!("train: best epoch {}", outcome.report.best_epoch + 1);
    Ok(())
}

fn checkpoint(cfg: &RunConfig) -> Result<ModelParams<f32>> {
    Ok(load_checkpoint::<f32>(cfg.require(&cfg.checkpoint, "checkpoint")?)?.0)
}

pub fn extract(cfg: &RunConfig) -> Result<()> {
    let params = checkpoint(cfg)?;
    let manifest = data::manifest(cfg.require(&cfg.manifest, "manifest")?)?;
    let out = cfg.prepare_out()?;
    for e in &manifest.entries {
        let f = load_features::<f32>(&e.source_id, &e.path)?;
        let emb = extract_embeddings(&f, &params, cfg.hop)?;
        emb.write(&out.join(format!("{}.npce", e.source_id)))?;
        eprintln!("extract: {} {} x {}", e.source_id, emb.len(), emb.dim());
    }
    Ok(())
}

/// Every `hop`-th row.
fn stride(rows: Tensor<f32>, hop: usize) -> Result<Tensor<f32>> {
    if hop == 1 {
        return Ok(rows);
    }
    let (n, f) = (rows.dim(0), rows.dim(1));
    let data: Vec<f32> = (0..n).step_by(hop).flat_map(|r| rows.row(r).to_vec()).collect();
    Tensor::from_vec(&[data.len() / f.max(1), f], data)
}

pub fn eval_id(cfg: &RunConfig) -> Result<()> {
    let manifest = data::manifest(cfg.require(&cfg.manifest, "manifest")?)?;
    let store = data::store(&manifest)?;
    let params = cfg.checkpoint.as_ref().map(|_| checkpoint(cfg)).transpose()?;
    let utts = data::utterances(&manifest, &store)?;
    let d = params.as_ref().map_or(cfg.d, |p| p.arch.input_frames);
    let mut baseline = Vec::new();
    let mut npc = Vec::new();
    let mut short = 0;
    for u in &utts {
        let speaker = u.speaker_id.clone().ok_or_else(|| {
            NpcError::InvalidConfig("identification needs a labeled manifest".into())
        })?;
        if u.frames.num_frames() < d {
            short += 1;
            continue;
        }
        let entry = |frames| Utterance {
            utterance_id: u.utterance_id.clone(),
            speaker_id: speaker.clone(),
            frames,
        };
        baseline.push(entry(match cfg.level {
            Level::Frame => stride(mfcc_stats_stream(&u.frames, d)?, cfg.hop)?,
            Level::Utterance => u.frames.frames.clone(),
        }));
        if let Some(p) = &params {
            npc.push(entry(extract_embeddings(&u.frames, p, cfg.hop)?.vectors));
        }
    }
    if short > 0 {
        eprintln!("eval-id: skipped {short} utterance(s) shorter than {d} frames");
    }
    let mut ec = match cfg.level {
        Level::Frame => ExperimentConfig::frame_level(cfg.enroll.clone(), cfg.seed),
        Level::Utterance => ExperimentConfig::utterance_level(cfg.enroll.clone(), cfg.seed),
    };
    ec.heldout_per_speaker = cfg.heldout;
    if let Some(r) = cfg.repeats {
        ec.repeats = r;
    }
    let splits = plan_splits(&baseline, &ec)?;
    let run = |corpus: &[Utterance<f32>]| -> Result<AccuracyTable> {
        match cfg.level {
            Level::Frame => frame_id_with_splits(corpus, &ec, &splits),
            Level::Utterance => utterance_id_with_splits(corpus, &ec, &splits),
        }
    };
    let base_name = match cfg.level {
        Level::Frame => "mfcc-stats",
        Level::Utterance => "mfcc",
    };
    let base_table = run(&baseline)?;
    let npc_table = if npc.is_empty() { None } else { Some(run(&npc)?) };
    let mut tables = vec![(base_name, &base_table)];
    if let Some(t) = &npc_table {
        tables.push(("npc", t));
    }
    let title = match cfg.level {
        Level::Frame => "frame-level speaker identification (1-NN)",
        Level::Utterance => "utterance-level speaker identification (1-NN)",
    };
    let out = cfg.prepare_out()?;
    write(&out.join("identification.txt"), &identification_text(title, &tables))?;
    write(&out.join("identification.csv"), &identification_csv(&tables))?;
    for (name, t) in &tables {
        for c in &t.cells {
            eprintln!("eval-id: {name} enroll={} accuracy={:.4}", c.enroll_count, c.mean);
        }
    }
    Ok(())
}

pub fn eval_verify(cfg: &RunConfig) -> Result<()> {
    let trials_path = cfg.require(&cfg.trials, "trials")?;
    let trials = parse_trials(&read_text(trials_path)?, &trials_path.to_string_lossy())?;
    let manifest = data::manifest(cfg.require(&cfg.manifest, "manifest")?)?;
    let store = data::store(&manifest)?;
    let params = cfg.checkpoint.as_ref().map(|_| checkpoint(cfg)).transpose()?;
    let wanted: std::collections::HashSet<&str> =
        trials.iter().flat_map(|t| [t.left.as_str(), t.right.as_str()]).collect();
    let mut vectors = HashMap::new();
    for u in data::utterances(&manifest, &store)? {
        if !wanted.contains(u.utterance_id.as_str()) {
            continue;
        }
        let frames = match &params {
            Some(p) => extract_embeddings(&u.frames, p, cfg.hop)?.vectors,
            None => u.frames.frames.clone(),
        };
        vectors.insert(u.utterance_id.clone(), pool_utterance(&u.utterance_id, None, &frames)?.values);
    }
    let scores = score_trials(&trials, &vectors)?;
    let targets: Vec<bool> = trials.iter().map(|t| t.target).collect();
    let report = VerificationReport::from_scores(&scores, &targets, DcfParams::default())?;
    let out = cfg.prepare_out()?;
    let mut listing = String::new();
    for (t, s) in trials.iter().zip(&scores) {
        let _ = writeln!(listing, "{t}\t{s:.6}");
    }
    write(&out.join("scores.tsv"), &listing)?;
    write(&out.join("verification.txt"), &report.to_text())?;
    write(&out.join("verification.csv"), &report.to_csv())?;
    eprintln!("eval-verify: EER {:.2}% minDCF {:.4}", 100.0 * report.eer.eer, report.min_dcf);
    Ok(())
}

fn grouped(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

pub fn inspect_text(params: &ModelParams<f32>) -> Result<String> {
    let arch = &params.arch;
    let mut s = String::new();
    let _ = writeln!(s, "input: {} x {}", arch.input_frames, arch.input_dim);
    for (i, st) in arch.activation_chain()?.iter().enumerate().skip(1) {
        let _ = writeln!(s, "  stage {i}: {:?} {st}", st.kind);
    }
    let _ = writeln!(s, "chain: {}", arch.chain_string()?);
    let t = arch.terminal_maps()?;
    let _ = writeln!(s, "terminal maps: {} x {}x{}", t.channels, t.height, t.width);
    let _ = writeln!(s, "dense: {} -> {}", arch.flatten_len()?, arch.embedding_dim);
    let _ = writeln!(s, "classifier head: {}", if arch.classifier_head { "yes" } else { "no" });
    let _ = writeln!(s, "parameters: {}", grouped(params.param_count()));
    match weight_mirror_stats(params) {
        Ok(m) => {
            let _ = writeln!(
                s,
                "mirror: mean|w1+w2|={:.4} std={:.4} cos(w1,w2)={:.4} b1={:.4} b2={:.4}",
                m.mean_abs_sum, m.std_abs_sum, m.cosine, m.b1, m.b2
            );
        }
        Err(NpcError::WrongLossKind) => {}
        Err(e) => return Err(e),
    }
    Ok(s)
}

pub fn inspect(cfg: &RunConfig) -> Result<()> {
    let params = match &cfg.checkpoint {
        Some(_) => checkpoint(cfg)?,
        None => build_model::<f32>(&ArchitectureSpec::default(), cfg.seed)?,
    };
    let text = inspect_text(&params)?;
    print!("{text}");
    if cfg.out.is_some() {
        let out = cfg.prepare_out()?;
        write(&out.join("inspect.txt"), &text)?;
    }
    Ok(())
}
