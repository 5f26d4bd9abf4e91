//! Canonical on-disk form of a stream.
//!
//! ```text
//! {"batch_size":10,"dataset":"cora","digest":"…","digest_algorithm":"fnv1a-64",…}
//! 0|17:0,4:0,9:0
//! 1|3:0,12:1,…
//! ```
//!
//! Line 1 is a compact JSON object with lexicographically sorted keys. Each
//! following line is one batch, `t|node:task,node:task,...`, in stream order.
//! The digest is FNV-1a 64 over the body bytes (every batch line including
//! its trailing newline), written as 16 lowercase hex digits. Real-valued
//! parameters are stored as shortest round-trip decimal strings so the
//! body stays integer-only and the header stays byte-stable.

use std::fs;
use std::hash::Hasher;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::rng::RNG_VERSION;
use crate::sampler::{Provenance, Sampling, Stream, StreamBatch, StreamItem};
use crate::schedule::{ScheduleConfig, TransitionMode};

pub const FORMAT_VERSION: &str = "taskfree-stream/1";
pub const DIGEST_ALGORITHM: &str = "fnv1a-64";

fn digest_hex(body: &str) -> String {
    let mut h = fnv::FnvHasher::default();
    h.write(body.as_bytes());
    format!("{:016x}", h.finish())
}

fn body_of(stream: &Stream) -> String {
    let mut body = String::new();
    for batch in &stream.batches {
        body.push_str(&batch.index.to_string());
        body.push('|');
        for (i, item) in batch.items.iter().enumerate() {
            if i > 0 {
                body.push(',');
            }
            body.push_str(&item.node.to_string());
            body.push(':');
            body.push_str(&item.origin_task.to_string());
        }
        body.push('\n');
    }
    body
}

/// Content digest of a stream's canonical body.
pub fn stream_digest(stream: &Stream) -> String {
    digest_hex(&body_of(stream))
}

/// Serializes a stream to its canonical text form.
pub fn serialize_stream(stream: &Stream) -> String {
    let body = body_of(stream);
    let p = &stream.provenance;
    let mut header = Map::new();
    header.insert("batch_size".into(), p.config.batch_size.into());
    header.insert("dataset".into(), p.dataset.clone().into());
    header.insert("digest".into(), digest_hex(&body).into());
    header.insert("digest_algorithm".into(), DIGEST_ALGORITHM.into());
    header.insert("format_version".into(), FORMAT_VERSION.into());
    header.insert("mode".into(), p.config.mode.name().into());
    header.insert("rng".into(), RNG_VERSION.into());
    header.insert("sampling".into(), p.sampling.name().into());
    header.insert("seed".into(), p.config.seed.into());
    header.insert("stream_length".into(), stream.batches.len().into());
    header.insert("task_count".into(), p.task_count.into());
    match p.config.mode {
        TransitionMode::Hard => {}
        TransitionMode::Gaussian { sigma } => {
            header.insert("sigma".into(), sigma.to_string().into());
        }
        TransitionMode::GlobalMix { mix_fraction } => {
            header.insert("mix_fraction".into(), mix_fraction.to_string().into());
        }
        TransitionMode::BoundaryLocal { window } => {
            header.insert("window".into(), window.into());
        }
    }
    // serde_json's default map is ordered by key.
    let mut out = Value::Object(header).to_string();
    out.push('\n');
    out.push_str(&body);
    out
}

pub fn write_stream(stream: &Stream, path: &Path) -> Result<String> {
    let text = serialize_stream(stream);
    fs::write(path, &text).map_err(|e| Error::io(path, e))?;
    Ok(stream_digest(stream))
}

pub fn read_stream(path: &Path) -> Result<Stream> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_stream(&text).map_err(|e| match e {
        Error::Parse { line, msg, .. } => Error::parse(path, line, msg),
        other => other,
    })
}

fn header_str<'a>(h: &'a Map<String, Value>, key: &str) -> Result<&'a str> {
    h.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| Error::parse("<stream>", 1, format!("header field {key:?} missing or not a string")))
}

fn header_u64(h: &Map<String, Value>, key: &str) -> Result<u64> {
    h.get(key)
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::parse("<stream>", 1, format!("header field {key:?} missing or not an integer")))
}

fn header_real(h: &Map<String, Value>, key: &str) -> Result<f64> {
    header_str(h, key)?
        .parse()
        .map_err(|_| Error::parse("<stream>", 1, format!("header field {key:?} is not a decimal number")))
}

/// Parses and fully validates a stream: version, batch count, digest, and
/// per-item ranges, in that order.
pub fn parse_stream(text: &str) -> Result<Stream> {
    let (header_line, body) = text
        .split_once('\n')
        .ok_or_else(|| Error::parse("<stream>", 1, "missing header line"))?;
    let header: Map<String, Value> = serde_json::from_str(header_line)
        .map_err(|e| Error::parse("<stream>", 1, format!("header is not a JSON object: {e}")))?;

    let version = header_str(&header, "format_version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version.to_string(),
            expected: FORMAT_VERSION.to_string(),
        });
    }
    let algorithm = header_str(&header, "digest_algorithm")?;
    if algorithm != DIGEST_ALGORITHM {
        return Err(Error::parse("<stream>", 1, format!("unsupported digest algorithm {algorithm:?}")));
    }
    let rng = header_str(&header, "rng")?;
    if rng != RNG_VERSION {
        return Err(Error::Version {
            found: rng.to_string(),
            expected: RNG_VERSION.to_string(),
        });
    }

    let stream_length = header_u64(&header, "stream_length")? as usize;
    let complete = body.matches('\n').count();
    if complete < stream_length {
        return Err(Error::Truncated {
            expected: stream_length,
            found: complete,
        });
    }
    let lines: Vec<&str> = body.split_terminator('\n').collect();
    if lines.len() != stream_length {
        return Err(Error::Validation(format!(
            "header declares {stream_length} batches but the body has {}",
            lines.len()
        )));
    }

    let expected = header_str(&header, "digest")?;
    let actual = digest_hex(body);
    if expected != actual {
        return Err(Error::Digest {
            expected: expected.to_string(),
            actual,
        });
    }

    let task_count = header_u64(&header, "task_count")? as usize;
    let batch_size = header_u64(&header, "batch_size")? as usize;
    let seed = header_u64(&header, "seed")?;
    let mode = match header_str(&header, "mode")? {
        "hard" => TransitionMode::Hard,
        "gaussian" => TransitionMode::Gaussian {
            sigma: header_real(&header, "sigma")?,
        },
        "global_mix" => TransitionMode::GlobalMix {
            mix_fraction: header_real(&header, "mix_fraction")?,
        },
        "boundary_local" => TransitionMode::BoundaryLocal {
            window: header_u64(&header, "window")? as usize,
        },
        other => return Err(Error::parse("<stream>", 1, format!("unknown mode {other:?}"))),
    };
    let sampling = match header_str(&header, "sampling")? {
        "with_replacement" => Sampling::WithReplacement,
        "without_replacement" => Sampling::WithoutReplacement,
        other => return Err(Error::parse("<stream>", 1, format!("unknown sampling {other:?}"))),
    };

    let mut batches = Vec::with_capacity(stream_length);
    for (t, line) in lines.iter().enumerate() {
        let line_no = t + 2;
        let (index, items) = line
            .split_once('|')
            .ok_or_else(|| Error::parse("<stream>", line_no, "batch line lacks `|`"))?;
        let index: usize = index
            .parse()
            .map_err(|_| Error::parse("<stream>", line_no, "bad batch index"))?;
        if index != t {
            return Err(Error::parse("<stream>", line_no, format!("expected batch {t}, found {index}")));
        }
        let items = if items.is_empty() {
            Vec::new()
        } else {
            items
                .split(',')
                .map(|pair| {
                    let (node, task) = pair
                        .split_once(':')
                        .ok_or_else(|| Error::parse("<stream>", line_no, format!("bad item {pair:?}")))?;
                    let node = node
                        .parse()
                        .map_err(|_| Error::parse("<stream>", line_no, format!("bad node {node:?}")))?;
                    let origin_task: usize = task
                        .parse()
                        .map_err(|_| Error::parse("<stream>", line_no, format!("bad task {task:?}")))?;
                    if origin_task >= task_count {
                        return Err(Error::parse(
                            "<stream>",
                            line_no,
                            format!("task {origin_task} outside [0, {task_count})"),
                        ));
                    }
                    Ok(StreamItem { node, origin_task })
                })
                .collect::<Result<Vec<_>>>()?
        };
        batches.push(StreamBatch { index, items });
    }

    Ok(Stream {
        batches,
        provenance: Provenance {
            dataset: header_str(&header, "dataset")?.to_string(),
            task_count,
            config: ScheduleConfig {
                batch_size,
                mode,
                seed,
            },
            sampling,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::TaskPartition;
    use crate::sampler::build_stream;
    use crate::schedule::build_schedule;

    fn sample(mode: TransitionMode) -> Stream {
        let p = TaskPartition::from_sizes(&[23, 31, 17]);
        let cfg = ScheduleConfig { batch_size: 10, mode, seed: 77 };
        let schedule = build_schedule(&p, &cfg).unwrap();
        let ds = crate::graph::GraphDataset {
            name: "fixture".into(),
            node_count: 0,
            feature_dim: 1,
            features: vec![],
            labels: vec![],
            edges: vec![],
            class_count: 1,
            train_mask: vec![],
            test_mask: vec![],
        };
        build_stream(&ds, &p, &schedule, Sampling::WithReplacement).unwrap()
    }

    #[test]
    fn canonical_round_trip() {
        for mode in [TransitionMode::Hard, TransitionMode::Gaussian { sigma: 2.5 }] {
            let s = sample(mode);
            let text = serialize_stream(&s);
            let parsed = parse_stream(&text).unwrap();
            assert_eq!(parsed, s);
            assert_eq!(serialize_stream(&parsed), text);
        }
    }

    #[test]
    fn header_is_sorted_and_counts_match() {
        let s = sample(TransitionMode::Gaussian { sigma: 0.1 });
        let text = serialize_stream(&s);
        let header: Map<String, Value> = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        let keys: Vec<&String> = header.keys().collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(header["stream_length"].as_u64().unwrap() as usize, text.lines().count() - 1);
        assert_eq!(header["sigma"], "0.1");
        assert!(text.starts_with("{\"batch_size\":10,\"dataset\":\"fixture\",\"digest\":"));
    }

    #[test]
    fn corruption_is_caught_by_digest() {
        let text = serialize_stream(&sample(TransitionMode::Hard));
        let pos = text.find('\n').unwrap() + 3;
        let mut bytes = text.into_bytes();
        bytes[pos] = if bytes[pos] == b'1' { b'2' } else { b'1' };
        let corrupted = String::from_utf8(bytes).unwrap();
        assert!(matches!(parse_stream(&corrupted), Err(Error::Digest { .. })));
    }

    #[test]
    fn truncation_and_version_are_distinct_errors() {
        let text = serialize_stream(&sample(TransitionMode::Hard));
        let cut = &text[..text.trim_end().rfind('\n').unwrap() + 1];
        assert!(matches!(parse_stream(cut), Err(Error::Truncated { .. })));
        let half_line = &text[..text.len() - 3];
        assert!(matches!(parse_stream(half_line), Err(Error::Truncated { .. })));

        let bumped = text.replace(FORMAT_VERSION, "taskfree-stream/99");
        match parse_stream(&bumped) {
            Err(Error::Version { found, .. }) => assert_eq!(found, "taskfree-stream/99"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn file_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.stream");
        let b = dir.path().join("b.stream");
        let s = sample(TransitionMode::Gaussian { sigma: 1.0 / 3.0 });
        let digest = write_stream(&s, &a).unwrap();
        let back = read_stream(&a).unwrap();
        assert_eq!(write_stream(&back, &b).unwrap(), digest);
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }
}
