//! Tab-separated text formats for stream manifests and speaker-turn labels.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{NpcError, Result};
use crate::io::read_text;

use super::mix::Segment;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub source_id: String,
    pub path: PathBuf,
    /// Speaker-turn file, present in labeled manifests only.
    pub segments: Option<PathBuf>,
    /// 1-based line in the manifest text.
    pub line: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StreamManifest {
    pub entries: Vec<ManifestEntry>,
}

impl StreamManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Fails on the first entry whose audio or turn file is absent, naming
    /// its manifest line.
    pub fn check_files(&self, origin: &str) -> Result<()> {
        for e in &self.entries {
            for p in std::iter::once(&e.path).chain(&e.segments) {
                if !p.is_file() {
                    return Err(parse_err(
                        origin,
                        e.line,
                        format!("file not found: {}", p.display()),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.source_id);
            out.push('\t');
            out.push_str(&e.path.to_string_lossy());
            if let Some(s) = &e.segments {
                out.push('\t');
                out.push_str(&s.to_string_lossy());
            }
            out.push('\n');
        }
        out
    }
}

fn parse_err(origin: &str, line: usize, message: impl Into<String>) -> NpcError {
    NpcError::Parse {
        path: origin.to_string(),
        line,
        message: message.into(),
    }
}

/// Parses `source_id<TAB>path[<TAB>segments_path]` lines. Blank lines and
/// `#` comments are skipped; relative paths resolve against `base`.
pub fn parse_manifest(text: &str, origin: &str, base: &Path) -> Result<StreamManifest> {
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&fields.len()) || fields.iter().any(|f| f.is_empty()) {
            return Err(parse_err(origin, i + 1, "expected source_id<TAB>path[<TAB>segments]"));
        }
        if !seen.insert(fields[0].to_string()) {
            return Err(parse_err(
                origin,
                i + 1,
                format!("duplicate source_id `{}`", fields[0]),
            ));
        }
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_relative() {
                base.join(p)
            } else {
                p
            }
        };
        entries.push(ManifestEntry {
            source_id: fields[0].to_string(),
            path: resolve(fields[1]),
            segments: fields.get(2).map(|s| resolve(s)),
            line: i + 1,
        });
    }
    Ok(StreamManifest { entries })
}

pub fn read_manifest(path: &Path) -> Result<StreamManifest> {
    let text = read_text(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_manifest(&text, &path.to_string_lossy(), base)
}

/// Parses `speaker_id<TAB>start_frame<TAB>end_frame` lines.
pub fn parse_segments(text: &str, origin: &str) -> Result<Vec<Segment>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(parse_err(origin, i + 1, "expected speaker<TAB>start<TAB>end"));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| parse_err(origin, i + 1, format!("bad frame index `{s}`")))
        };
        out.push(Segment {
            speaker: f[0].to_string(),
            start: num(f[1])?,
            end: num(f[2])?,
        });
    }
    Ok(out)
}

pub fn format_segments(segments: &[Segment]) -> String {
    segments
        .iter()
        .map(|s| format!("{}\t{}\t{}\n", s.speaker, s.start, s.end))
        .collect()
}

pub fn read_segments(path: &Path) -> Result<Vec<Segment>> {
    parse_segments(&read_text(path)?, &path.to_string_lossy())
}
