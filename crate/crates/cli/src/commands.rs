use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use pixbis_core::baselines::{run_baseline, BaselineConfig, FeatureKind};
use pixbis_core::data::{
    apply_protocol, corpus_fingerprint, cross_protocol, generate_dataset, select_video_frames, Manifest, Split,
};
use pixbis_core::metrics::{
    aggregate_video_scores, evaluate, read_scores, roc_points, write_frame_scores, write_roc, write_scores,
    FrameRecord, MetricsReport, ScoreRecord,
};
use pixbis_core::model::Model;
use pixbis_core::pipeline::score_frames;
use pixbis_core::train::{load_checkpoint, save_checkpoint, train, write_loss_log, FrameSet, TrainState, LOSS_LOG_FILE};

use crate::{Cli, Command, RunConfig, UsageError};

/// Checkpoint written at the end of `train`.
pub const MODEL_FILE: &str = "model.ckpt";
pub const SCORE_BATCH: usize = 32;

pub const IQM_NOTE: &str =
    "reduced image-quality set: 18 measures (full-reference vs. blurred copy plus no-reference statistics)";

fn usage(e: anyhow::Error) -> anyhow::Error {
    anyhow::Error::new(UsageError(e))
}

fn configure(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got {kv:?}"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    match &cli.command {
        Command::Generate { name, strength } => {
            if let Some(n) = name {
                cfg.set("name", n)?;
            }
            if let Some(s) = strength {
                cfg.set("strength", &s.to_string())?;
            }
        }
        Command::Train { epochs, protocol, .. } => {
            if let Some(e) = epochs {
                cfg.set("epochs", &e.to_string())?;
            }
            if let Some(p) = protocol {
                cfg.set("protocol", p)?;
            }
        }
        Command::Score { frames, protocol, .. } => {
            if let Some(f) = frames {
                cfg.set("score_frames", &f.to_string())?;
            }
            if let Some(p) = protocol {
                cfg.set("protocol", p)?;
            }
        }
        Command::Cross { threshold_from, .. } => {
            if let Some(t) = threshold_from {
                cfg.set("threshold_from", t)?;
            }
        }
        Command::Baseline { protocol, .. } => {
            if let Some(p) = protocol {
                cfg.set("protocol", p)?;
            }
        }
        Command::Evaluate { .. } => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let cfg = configure(&cli).map_err(usage)?;
    let out = |default: &str| cli.out.clone().unwrap_or_else(|| PathBuf::from(default));
    match &cli.command {
        Command::Generate { .. } => cmd_generate(&cfg, &out("data")),
        Command::Train { data, resume, .. } => cmd_train(&cfg, data, &out("run"), resume.as_deref()),
        Command::Score { model, data, split, .. } => {
            let split: Split = split.parse().map_err(|e: String| usage(anyhow!(e)))?;
            cmd_score(&cfg, model, data, split, &out("run"))
        }
        Command::Evaluate { dev, eval, method } => cmd_evaluate(dev, eval, method, &out("run")),
        Command::Cross { model, source, target, .. } => cmd_cross(&cfg, model, source, target, &out("run")),
        Command::Baseline { kind, data, .. } => {
            let kind: FeatureKind = kind.parse().map_err(|e| usage(anyhow!("{e}")))?;
            cmd_baseline(&cfg, kind, data, &out("run"))
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn cmd_generate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let manifest = generate_dataset(&cfg.generator, out)?;
    print!("{}", corpus_summary(&manifest));
    println!("fingerprint: {}", corpus_fingerprint(&manifest)?);
    Ok(())
}

/// Counts per split and per PAI.
pub fn corpus_summary(m: &Manifest) -> String {
    let mut s = format!("dataset: {}\nconfig_hash: {}\nsamples: {}\n", m.name, m.config_hash, m.samples.len());
    for split in Split::ALL {
        let rows = m.split(split);
        let mut videos: Vec<&str> = rows.iter().map(|r| r.video_id.as_str()).collect();
        videos.sort();
        videos.dedup();
        let mut subjects: Vec<&str> = videos.iter().map(|v| v.split('_').next().unwrap_or(v)).collect();
        subjects.sort();
        subjects.dedup();
        s += &format!(
            "split {split}: {} subjects, {} videos, {} frames\n",
            subjects.len(),
            videos.len(),
            rows.len()
        );
    }
    let mut per_pai: BTreeMap<_, usize> = BTreeMap::new();
    for r in &m.samples {
        *per_pai.entry(r.pai).or_default() += 1;
    }
    let attacks = per_pai.keys().filter(|p| p.label() == pixbis_core::data::Label::Attack).count();
    s += &format!("pai categories: {attacks}\n");
    for (pai, n) in per_pai {
        s += &format!("pai {pai}: {n} frames\n");
    }
    s
}

fn load_manifest(dir: &Path) -> Result<Manifest> {
    Manifest::load(dir).with_context(|| format!("loading dataset {}", dir.display()))
}

pub fn cmd_train(cfg: &RunConfig, data: &Path, out: &Path, resume: Option<&Path>) -> Result<()> {
    let manifest = load_manifest(data)?;
    let splits = apply_protocol(&manifest, &cfg.protocol_spec())?;
    let samples = select_video_frames(&splits.train, cfg.train.frames_per_video);
    let frames = FrameSet::load(&samples, cfg.model.input_size)?;
    let state = match resume {
        Some(path) => {
            let ck = load_checkpoint::<f32>(path).with_context(|| format!("loading {}", path.display()))?;
            TrainState::from_checkpoint(&ck)?
        }
        None => TrainState::new(Model::<f32>::new(cfg.model.clone(), cfg.train.seed)?, &cfg.train),
    };
    println!(
        "training on {} frames ({} protocol), {} parameters",
        frames.len(),
        splits.name,
        state.model.num_parameters()
    );
    create_dir(out)?;
    let state = train(state, &frames, &cfg.train, Some(&out.join("checkpoints")), |e| {
        println!(
            "epoch {}: combined {:.6} pixel {:.6} binary {:.6}",
            e.epoch, e.combined, e.pixel, e.binary
        );
    })?;
    save_checkpoint(&state.checkpoint(), &out.join(MODEL_FILE))?;
    write_loss_log(&out.join(LOSS_LOG_FILE), &state.log)?;
    println!("wrote {}", out.join(MODEL_FILE).display());
    Ok(())
}

fn load_model(path: &Path) -> Result<Model<f32>> {
    let ck = load_checkpoint::<f32>(path).with_context(|| format!("loading {}", path.display()))?;
    ck.to_model().with_context(|| format!("restoring model from {}", path.display()))
}

fn write_split_scores(out: &Path, stem: &str, frames: &[FrameRecord]) -> Result<Vec<ScoreRecord>> {
    let videos = aggregate_video_scores(frames)?;
    write_frame_scores(frames, &out.join(format!("{stem}_frames.csv")))?;
    write_scores(&videos, &out.join(format!("{stem}_videos.csv")))?;
    Ok(videos)
}

pub fn cmd_score(cfg: &RunConfig, model: &Path, data: &Path, split: Split, out: &Path) -> Result<()> {
    let model = load_model(model)?;
    let manifest = load_manifest(data)?;
    let splits = apply_protocol(&manifest, &cfg.protocol_spec())?;
    let frames = score_frames(&model, splits.get(split), cfg.score_frames, SCORE_BATCH)?;
    create_dir(out)?;
    let videos = write_split_scores(out, split.as_str(), &frames)?;
    println!("scored {} frames of {} videos ({split})", frames.len(), videos.len());
    Ok(())
}

/// Report text with `# key: value` header lines.
pub fn report_text(header: &[(&str, String)], report: &MetricsReport) -> String {
    let mut s: String = header.iter().map(|(k, v)| format!("# {k}: {v}\n")).collect();
    s += &report.to_text();
    s
}

fn write_report(out: &Path, stem: &str, header: &[(&str, String)], dev: &[ScoreRecord], eval: &[ScoreRecord]) -> Result<MetricsReport> {
    let report = evaluate(dev, eval)?;
    create_dir(out)?;
    let text = report_text(header, &report);
    write_text(&out.join(format!("{stem}.txt")), &text)?;
    write_text(&out.join(format!("{stem}.csv")), &report.to_csv())?;
    write_roc(&roc_points(eval)?, &out.join(format!("{stem}_roc.csv")))?;
    print!("{text}");
    Ok(report)
}

pub fn cmd_evaluate(dev: &Path, eval: &Path, method: &str, out: &Path) -> Result<()> {
    let d = read_scores(dev)?;
    let e = read_scores(eval)?;
    let header = [
        ("method", method.to_string()),
        ("dev", dev.display().to_string()),
        ("eval", eval.display().to_string()),
    ];
    write_report(out, "report", &header, &d, &e)?;
    Ok(())
}

pub fn cmd_cross(cfg: &RunConfig, model: &Path, source: &Path, target: &Path, out: &Path) -> Result<()> {
    let net = load_model(model)?;
    let a = load_manifest(source)?;
    let b = load_manifest(target)?;
    let splits = cross_protocol(&a, &b, cfg.threshold_from)?;
    let stem = format!("cross_{}_to_{}", a.name, b.name);
    create_dir(out)?;
    let dev = score_frames(&net, &splits.dev, cfg.score_frames, SCORE_BATCH)?;
    let eval = score_frames(&net, &splits.eval, cfg.score_frames, SCORE_BATCH)?;
    let dev = write_split_scores(out, &format!("{stem}_dev"), &dev)?;
    let eval = write_split_scores(out, &format!("{stem}_eval"), &eval)?;
    let dev_name = match cfg.threshold_from {
        pixbis_core::data::ThresholdSource::Source => &a.name,
        pixbis_core::data::ThresholdSource::Target => &b.name,
    };
    let header = [
        ("method", "pixbis".to_string()),
        ("direction", format!("{} -> {}", a.name, b.name)),
        ("trained on", a.name.clone()),
        ("tested on", b.name.clone()),
        ("threshold from", format!("{} dev ({dev_name})", cfg.threshold_from)),
    ];
    write_report(out, &stem, &header, &dev, &eval)?;
    Ok(())
}

pub fn cmd_baseline(cfg: &RunConfig, kind: FeatureKind, data: &Path, out: &Path) -> Result<()> {
    let manifest = load_manifest(data)?;
    let splits = apply_protocol(&manifest, &cfg.protocol_spec())?;
    let bc = BaselineConfig {
        kind,
        linear: cfg.linear,
        frames_per_video: cfg.score_frames,
    };
    let result = run_baseline(&splits, &bc)?;
    create_dir(out)?;
    let dev = write_split_scores(out, &format!("{kind}_dev"), &result.dev)?;
    let eval = write_split_scores(out, &format!("{kind}_eval"), &result.eval)?;
    let mut header = vec![
        ("method", format!("{kind}+logistic")),
        ("protocol", splits.name.clone()),
    ];
    if kind == FeatureKind::Iqm {
        header.push(("note", IQM_NOTE.to_string()));
    }
    write_report(out, &format!("{kind}_report"), &header, &dev, &eval)?;
    Ok(())
}
