//! Segment manifests: JSON Lines (one segment object per line) and CSV with the
//! same columns (`id`, `source`, `start_ms`, `end_ms`).

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::segmenter::Segment;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("segment {0} has start_ms >= end_ms")]
    InvalidSegment(String),
    #[error("duplicate segment id {0}")]
    DuplicateId(String),
}

pub fn write_jsonl<W: Write>(mut out: W, segments: &[Segment]) -> Result<(), ManifestError> {
    for s in segments {
        serde_json::to_writer(&mut out, s).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<Segment>, ManifestError> {
    let mut segments: Vec<Segment> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let seg: Segment = serde_json::from_str(&line).map_err(|e| ManifestError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if !(seg.start_ms < seg.end_ms) {
            return Err(ManifestError::InvalidSegment(seg.id));
        }
        if !seen.insert(seg.id.clone()) {
            return Err(ManifestError::DuplicateId(seg.id));
        }
        segments.push(seg);
    }
    Ok(segments)
}

pub fn write_csv<W: Write>(out: W, segments: &[Segment]) -> Result<(), ManifestError> {
    let mut w = csv::Writer::from_writer(out);
    for s in segments {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<Segment>, ManifestError> {
    let mut r = csv::Reader::from_reader(input);
    let segments: Vec<Segment> = r.deserialize().collect::<Result<_, _>>()?;
    if let Some(bad) = segments.iter().find(|s| !(s.start_ms < s.end_ms)) {
        return Err(ManifestError::InvalidSegment(bad.id.clone()));
    }
    Ok(segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Segment> {
        vec![
            Segment { id: "rec_00000".into(), source: "rec".into(), start_ms: 90.0, end_ms: 300.0 },
            Segment { id: "rec_00001".into(), source: "rec".into(), start_ms: 440.0, end_ms: 752.5 },
        ]
    }

    #[test]
    fn jsonl_and_csv_carry_the_same_rows() {
        let mut jsonl = Vec::new();
        write_jsonl(&mut jsonl, &sample()).unwrap();
        let text = String::from_utf8(jsonl.clone()).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            r#"{"id":"rec_00000","source":"rec","start_ms":90.0,"end_ms":300.0}"#
        );
        assert_eq!(read_jsonl(jsonl.as_slice()).unwrap(), sample());

        let mut csv_out = Vec::new();
        write_csv(&mut csv_out, &sample()).unwrap();
        let text = String::from_utf8(csv_out.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), "id,source,start_ms,end_ms");
        assert_eq!(read_csv(csv_out.as_slice()).unwrap(), sample());
    }

    #[test]
    fn rejects_bad_rows() {
        let inverted = r#"{"id":"a","source":"r","start_ms":5.0,"end_ms":5.0}"#;
        assert!(matches!(read_jsonl(inverted.as_bytes()), Err(ManifestError::InvalidSegment(_))));
        let dup = "{\"id\":\"a\",\"source\":\"r\",\"start_ms\":1.0,\"end_ms\":5.0}\n{\"id\":\"a\",\"source\":\"r\",\"start_ms\":6.0,\"end_ms\":9.0}";
        assert!(matches!(read_jsonl(dup.as_bytes()), Err(ManifestError::DuplicateId(_))));
        assert!(matches!(read_jsonl("{oops".as_bytes()), Err(ManifestError::Parse { line: 1, .. })));
    }
}
