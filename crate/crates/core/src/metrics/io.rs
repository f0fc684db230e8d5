use std::fs;
use std::path::Path;

use super::{FrameRecord, RocPoint, ScoreRecord};
use crate::data::manifest::{csv_io, Label, Pai};
use crate::error::{Error, Result};

const SCORE_HEADER: [&str; 4] = ["video_id", "label", "pai", "score"];
const FRAME_HEADER: [&str; 5] = ["video_id", "frame_index", "label", "pai", "score"];

/// Nine significant digits: exact for single-precision scores, which is what
/// the network and [`super::aggregate_video_scores`] produce. Files are read
/// back at single precision.
fn fmt_score(s: f64) -> String {
    format!("{s:.8e}")
}

pub fn write_scores(records: &[ScoreRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(SCORE_HEADER).map_err(|e| csv_io(path, e))?;
    for r in records {
        w.write_record([r.video_id.as_str(), r.label.as_str(), r.pai.as_str(), &fmt_score(r.score)])
            .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_frame_scores(records: &[FrameRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(FRAME_HEADER).map_err(|e| csv_io(path, e))?;
    for r in records {
        w.write_record([
            r.video_id.as_str(),
            &r.frame_index.to_string(),
            r.label.as_str(),
            r.pai.as_str(),
            &fmt_score(r.score),
        ])
        .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows(path: &Path, header: &[&str], mut row: impl FnMut(&csv::StringRecord, usize) -> Result<()>) -> Result<()> {
    let ctx = path.display().to_string();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let got = r.headers().map_err(|e| Error::parse(&ctx, 1, e.to_string()))?;
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::parse(&ctx, 1, format!("expected header {}", header.join(","))));
    }
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(&ctx, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        row(&rec, line).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::parse(&ctx, line, m),
            other => other,
        })?;
    }
    Ok(())
}

fn parse_common(label: &str, pai: &str, score: &str) -> Result<(Label, Pai, f64)> {
    let bad = Error::InvalidArgument;
    let label: Label = label.parse().map_err(bad)?;
    let pai: Pai = pai.parse().map_err(bad)?;
    if pai.label() != label {
        return Err(bad(format!("label {label} inconsistent with PAI {pai}")));
    }
    let score = score.parse::<f32>().map_err(|_| bad(format!("bad score {score:?}")))? as f64;
    if !score.is_finite() {
        return Err(bad(format!("non-finite score {score}")));
    }
    Ok((label, pai, score))
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRecord>> {
    let mut out = Vec::new();
    read_rows(path, &SCORE_HEADER, |rec, _| {
        let f = |k| rec.get(k).unwrap_or_default();
        let (label, pai, score) = parse_common(f(1), f(2), f(3))?;
        out.push(ScoreRecord {
            video_id: f(0).to_string(),
            label,
            pai,
            score,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn read_frame_scores(path: &Path) -> Result<Vec<FrameRecord>> {
    let mut out = Vec::new();
    read_rows(path, &FRAME_HEADER, |rec, _| {
        let f = |k| rec.get(k).unwrap_or_default();
        let frame_index = f(1)
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad frame index {:?}", f(1))))?;
        let (label, pai, score) = parse_common(f(2), f(3), f(4))?;
        out.push(FrameRecord {
            video_id: f(0).to_string(),
            frame_index,
            label,
            pai,
            score,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn write_roc(points: &[RocPoint], path: &Path) -> Result<()> {
    let mut text = String::from("threshold,far,frr\n");
    for p in points {
        text.push_str(&format!("{:?},{:?},{:?}\n", p.threshold, p.far, p.frr));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
