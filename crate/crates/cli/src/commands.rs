use std::path::{Path, PathBuf};

use thermoface::data::synth::{generate_frames, subject_label};
use thermoface::data::{
    load_thermogram, save_thermogram, split_indices, validate_camera, CameraProfile, DatasetManifest, FrameFormat,
    FrameSource, Level, ManifestEntry, SplitSpec, SynthConfig, Thermogram, PROFILE_KEYS, SPLIT_KEYS, SYNTH_KEYS,
};
use thermoface::evaluation::{
    evaluation_pairs, pair_distances, select_threshold, Criterion, EvalReport, DEFAULT_EVAL_PAIRS,
};
use thermoface::gallery::{Gallery, MatchRule};
use thermoface::kv::KeyValues;
use thermoface::model::{build_encoder, load_params, save_params, EncoderConfig, ModelParams, ENCODER_KEYS};
use thermoface::training::{train, TrainConfig, TRAIN_KEYS};
use thermoface::{Error, Result};

use crate::config::{absorb, echo};

/// What a successful command reports back to `main`.
#[derive(Debug, PartialEq, Eq)]
pub enum Outcome {
    Done,
    /// `validate-camera` found at least one FAIL.
    Rejected,
}

/// Union of key tables, first occurrence wins.
fn keys(groups: &[&[&'static str]]) -> Vec<&'static str> {
    let mut out = Vec::new();
    for &k in groups.iter().flat_map(|g| g.iter()) {
        if !out.contains(&k) {
            out.push(k);
        }
    }
    out
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn parsed<T: std::str::FromStr<Err = String>>(kv: &KeyValues, key: &str, default: T) -> Result<T> {
    match kv.get(key) {
        None => Ok(default),
        Some(raw) => raw.parse().map_err(|e| Error::Config(format!("key `{key}`: {e}"))),
    }
}

fn load_frame(path: &Path) -> Result<Thermogram> {
    load_thermogram(path, FrameFormat::from_path(path)?)
}

pub fn synth_keys() -> Vec<&'static str> {
    keys(&[&SYNTH_KEYS, &["out_dir", "format", "pgm_temp_min", "pgm_temp_max"]])
}

/// Writes `<out_dir>/<subject>_<frame>.<ext>` plus sidecars and
/// `<out_dir>/manifest.csv`.
pub fn synth(kv: &KeyValues) -> Result<Outcome> {
    let cfg = SynthConfig::from_key_values(kv)?;
    let out_dir: PathBuf = kv.require("out_dir")?;
    let format: FrameFormat = parsed(kv, "format", FrameFormat::Pgm16)?;
    let range: (f64, f64) = (kv.get_or("pgm_temp_min", 10.0)?, kv.get_or("pgm_temp_max", 50.0)?);

    let mut effective = cfg.to_key_values();
    effective.set("out_dir", out_dir.display().to_string());
    effective.set("format", format.to_string());
    effective.set("pgm_temp_min", range.0.to_string());
    effective.set("pgm_temp_max", range.1.to_string());
    echo(&effective);

    std::fs::create_dir_all(&out_dir).map_err(io(&out_dir))?;
    let frames = generate_frames(&cfg)?;
    let mut entries = Vec::with_capacity(frames.len());
    for (k, t) in frames.iter().enumerate() {
        let identity = k / cfg.frames_per_identity;
        let name = format!(
            "{}_{:03}.{}",
            subject_label(identity),
            k % cfg.frames_per_identity,
            format.extension()
        );
        let path = out_dir.join(name);
        save_thermogram(t, &path, format, range)?;
        entries.push(ManifestEntry {
            source: FrameSource::File(path),
            subject_id: t.subject_id.clone().unwrap_or_default(),
            session_id: t.session_id.clone().unwrap_or_default(),
        });
    }
    let manifest = DatasetManifest::new(entries)?;
    let manifest_path = out_dir.join("manifest.csv");
    manifest.write_csv(&manifest_path)?;
    println!(
        "wrote {} frames of {} subjects; manifest {}",
        manifest.len(),
        cfg.n_identities,
        manifest_path.display()
    );
    Ok(Outcome::Done)
}

pub fn train_keys() -> Vec<&'static str> {
    keys(&[&TRAIN_KEYS, &SPLIT_KEYS, &ENCODER_KEYS, &["manifest", "out_dir"]])
}

/// Splits the manifest, trains on the training part and writes
/// `model.tvm`, `history.csv`, `train_manifest.csv` and
/// `test_manifest.csv` into `out_dir`.
pub fn train_cmd(kv: &KeyValues) -> Result<Outcome> {
    let mut kv = kv.clone();
    if !kv.contains("seed") {
        kv.set("seed", "0");
    }
    let train_cfg = TrainConfig::from_key_values(&kv)?;
    let split = SplitSpec::from_key_values(&kv)?;
    let encoder = EncoderConfig::from_key_values(&kv)?;
    let manifest_path: PathBuf = kv.require("manifest")?;
    let out_dir: PathBuf = kv.require("out_dir")?;

    let mut effective = train_cfg.to_key_values();
    absorb(&mut effective, &split.to_key_values());
    absorb(&mut effective, &encoder.to_key_values());
    effective.set("manifest", manifest_path.display().to_string());
    effective.set("out_dir", out_dir.display().to_string());
    echo(&effective);

    let manifest = DatasetManifest::read_csv(&manifest_path)?;
    // Load every row up front so errors cite rows of the file as written.
    let all = manifest.load_all()?;
    let (train_idx, test_idx) = split_indices(&manifest.labels(), &split)?;
    let (train_set, test_set) = (manifest.subset(&train_idx), manifest.subset(&test_idx));
    let frames: Vec<Thermogram> = train_idx.iter().map(|&i| all[i].clone()).collect();
    let (params, history) = train(&train_cfg, &frames, build_encoder(encoder)?)?;

    std::fs::create_dir_all(&out_dir).map_err(io(&out_dir))?;
    save_params(&params, out_dir.join("model.tvm"))?;
    history.write_csv(out_dir.join("history.csv"))?;
    train_set.write_csv(out_dir.join("train_manifest.csv"))?;
    test_set.write_csv(out_dir.join("test_manifest.csv"))?;
    println!(
        "split: {} train frames ({} subjects), {} test frames ({} subjects)",
        train_set.len(),
        train_set.subjects().len(),
        test_set.len(),
        test_set.subjects().len()
    );
    match (history.mean_loss.first(), history.mean_loss.last()) {
        (Some(first), Some(last)) => {
            println!("trained {} epochs: mean loss {first:.6} -> {last:.6}", history.len())
        }
        _ => println!("trained 0 epochs: initial parameters saved"),
    }
    println!("model {}", out_dir.join("model.tvm").display());
    Ok(Outcome::Done)
}

pub fn eval_keys() -> Vec<&'static str> {
    keys(&[&["model", "manifest", "report", "tau", "criterion", "n_pairs", "seed"]])
}

/// Scores balanced pairs from a test manifest. Without `tau` the threshold
/// comes from `criterion` on the same pairs.
pub fn eval(kv: &KeyValues) -> Result<Outcome> {
    let model_path: PathBuf = kv.require("model")?;
    let manifest_path: PathBuf = kv.require("manifest")?;
    let report_path: PathBuf = match kv.get_parsed("report")? {
        Some(p) => p,
        None => model_path.with_file_name("eval_report.csv"),
    };
    let criterion: Criterion = parsed(kv, "criterion", Criterion::MaxF1)?;
    let n_pairs: usize = kv.get_or("n_pairs", DEFAULT_EVAL_PAIRS)?;
    let seed: u64 = kv.get_or("seed", 0)?;
    let tau: Option<f64> = kv.get_parsed("tau")?;
    if tau.is_some_and(f64::is_nan) {
        return Err(Error::Config("tau must be a number".into()));
    }

    let mut effective = KeyValues::new();
    effective.set("model", model_path.display().to_string());
    effective.set("manifest", manifest_path.display().to_string());
    effective.set("report", report_path.display().to_string());
    effective.set("criterion", criterion.to_string());
    effective.set("n_pairs", n_pairs.to_string());
    effective.set("seed", seed.to_string());
    if let Some(t) = tau {
        effective.set("tau", t.to_string());
    }
    echo(&effective);

    let params = load_params(&model_path)?;
    let test_set = DatasetManifest::read_csv(&manifest_path)?;
    let pairs = evaluation_pairs(&test_set, n_pairs, seed)?;
    let distances = pair_distances(&params, &test_set, &pairs)?;
    let truths: Vec<bool> = pairs.iter().map(|p| p.is_same).collect();
    let tau = match tau {
        Some(t) => t,
        None => select_threshold(&distances, &truths, criterion)?,
    };
    let report = EvalReport::from_distances(&distances, &truths, tau)?;
    report.write_csv(&report_path)?;
    let text_path = report_path.with_extension("txt");
    std::fs::write(&text_path, report.to_text()).map_err(io(&text_path))?;
    print!("{}", report.to_text());
    println!("report {}", report_path.display());
    Ok(Outcome::Done)
}

/// One line per finding; [`Outcome::Rejected`] if any is a FAIL.
pub fn validate_camera_cmd(profile: &Path, overrides: &[String]) -> Result<Outcome> {
    let kv = crate::config::merge(Some(profile), overrides, &PROFILE_KEYS)?;
    let p = CameraProfile::from_key_values(&kv)?;
    echo(&kv);
    let findings = validate_camera(&p);
    if findings.is_empty() {
        println!("PASS: no findings");
    }
    for f in &findings {
        println!("{f}");
    }
    Ok(if findings.iter().any(|f| f.level == Level::Fail) {
        Outcome::Rejected
    } else {
        Outcome::Done
    })
}

pub fn enroll_keys() -> Vec<&'static str> {
    keys(&[&["gallery", "model", "subject", "probes", "manifest", "max_frames"]])
}

/// Enrolls `probes` (comma-separated frame paths) or, with `manifest`, the
/// subject's frames listed there (at most `max_frames`, 0 for all).
pub fn enroll(kv: &KeyValues) -> Result<Outcome> {
    let gallery_path: PathBuf = kv.require("gallery")?;
    let model_path: PathBuf = kv.require("model")?;
    let subject: String = kv.require("subject")?;
    let max_frames: usize = kv.get_or("max_frames", 0)?;
    echo(kv);

    let params = load_params(&model_path)?;
    let probes: Vec<Thermogram> = match (kv.get("probes"), kv.get("manifest")) {
        (Some(list), None) => list
            .split(',')
            .map(|p| load_frame(Path::new(p.trim())))
            .collect::<Result<_>>()?,
        (None, Some(manifest)) => {
            let m = DatasetManifest::read_csv(manifest)?;
            let mut rows: Vec<usize> = (0..m.len()).filter(|&i| m.entries()[i].subject_id == subject).collect();
            if max_frames > 0 {
                rows.truncate(max_frames);
            }
            rows.iter().map(|&i| m.load(i)).collect::<Result<_>>()?
        }
        _ => return Err(Error::Config("give exactly one of `probes` or `manifest`".into())),
    };
    let mut gallery = if gallery_path.exists() {
        Gallery::load(&gallery_path)?
    } else {
        Gallery::new()
    };
    gallery.enroll(&subject, &probes, &params)?;
    gallery.save(&gallery_path)?;
    let total: usize = gallery
        .subjects()
        .map(|s| gallery.embeddings(s).map_or(0, <[_]>::len))
        .sum();
    println!(
        "enrolled {} probes for {subject}; gallery holds {} subjects, {total} embeddings",
        probes.len(),
        gallery.subject_count()
    );
    Ok(Outcome::Done)
}

pub fn verify_keys() -> Vec<&'static str> {
    keys(&[&["gallery", "model", "subject", "probe", "tau", "match_rule"]])
}

fn open_gallery(kv: &KeyValues) -> Result<(Gallery, ModelParams, Thermogram, f64, MatchRule)> {
    let gallery_path: PathBuf = kv.require("gallery")?;
    let model_path: PathBuf = kv.require("model")?;
    let probe_path: PathBuf = kv.require("probe")?;
    let tau: f64 = kv.require("tau")?;
    if tau.is_nan() {
        return Err(Error::Config("tau must be a number".into()));
    }
    let rule: MatchRule = parsed(kv, "match_rule", MatchRule::default())?;
    let mut effective = kv.clone();
    effective.set("match_rule", rule.to_string());
    echo(&effective);
    Ok((
        Gallery::load(&gallery_path)?,
        load_params(&model_path)?,
        load_frame(&probe_path)?,
        tau,
        rule,
    ))
}

/// Prints `ACCEPT <distance>` or `REJECT <distance>`.
pub fn verify(kv: &KeyValues) -> Result<Outcome> {
    let subject: String = kv.require("subject")?;
    let (gallery, params, probe, tau, rule) = open_gallery(kv)?;
    let v = gallery.verify(&subject, &probe, &params, tau, rule)?;
    println!("{} {:.6}", if v.accepted { "ACCEPT" } else { "REJECT" }, v.distance);
    Ok(Outcome::Done)
}

pub fn identify_keys() -> Vec<&'static str> {
    keys(&[&["gallery", "model", "probe", "tau", "match_rule"]])
}

/// Prints `<subject> <distance>` or `UNKNOWN <distance>`.
pub fn identify(kv: &KeyValues) -> Result<Outcome> {
    let (gallery, params, probe, tau, rule) = open_gallery(kv)?;
    let id = gallery.identify(&probe, &params, tau, rule)?;
    println!("{} {:.6}", id.subject.as_deref().unwrap_or("UNKNOWN"), id.distance);
    Ok(Outcome::Done)
}
