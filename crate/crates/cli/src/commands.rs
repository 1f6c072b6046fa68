use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use breathid_core::auth::{
    confirm_ht, confirm_ml, decide_identity, enroll_trial, fuse, identify as identify_block,
    shuffle_trials, Block, PredictionVector, VectorKind,
};
use breathid_core::features::{extract_dataset, FeatureMatrix};
use breathid_core::library::ModelLibrary;
use breathid_core::signal::{read_dataset, write_dataset};
use breathid_core::Error;
use serde_json::{json, Value};

use crate::{BlockArg, CliError, RunConfig};

/// Thresholds swept in the evaluation report.
pub const SWEEP_ETAS: std::ops::RangeInclusive<u32> = 50..=96;

fn create_parent(path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(())
}

fn write_matrix(path: &Path, m: &FeatureMatrix) -> Result<(), CliError> {
    create_parent(path)?;
    m.write_csv(BufWriter::new(File::create(path)?))?;
    Ok(())
}

fn read_matrix(path: &Path) -> Result<FeatureMatrix, CliError> {
    let file = File::open(path).map_err(|source| CliError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(FeatureMatrix::read_csv(file)?)
}

fn subject_rows(cfg: &RunConfig, library: &ModelLibrary, subject: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let test = read_matrix(&cfg.test_features_path)?;
    let rows = test.rows_for(subject);
    if rows.n_rows() == 0 {
        return Err(Error::UnknownUser(subject.to_string()).into());
    }
    Ok(rows.select_named(&library.selected_features)?.values())
}

pub fn synth(cfg: &RunConfig) -> Result<Value, CliError> {
    let recordings = cfg.cohort.recordings()?;
    write_dataset(&cfg.dataset_dir, &recordings)?;
    let manifest = cfg.dataset_dir.join("manifest.json");
    fs::write(&manifest, serde_json::to_string_pretty(&cfg.cohort.manifest())?)?;
    Ok(json!({
        "command": "synth",
        "users": cfg.cohort.n_users,
        "recordings": recordings.len(),
        "dataset_dir": cfg.dataset_dir,
        "manifest": manifest,
    }))
}

pub fn features(cfg: &RunConfig) -> Result<Value, CliError> {
    let recordings = read_dataset(&cfg.dataset_dir)?;
    let (matrix, stats) = extract_dataset(&recordings, &cfg.mfdfa, cfg.fixed_window)?;
    write_matrix(&cfg.features_path, &matrix)?;
    Ok(json!({
        "command": "features",
        "recordings": recordings.len(),
        "rows": matrix.n_rows(),
        "users": matrix.users().len(),
        "stats": stats,
        "features_path": cfg.features_path,
    }))
}

/// Builds the library of evaluation trial 0 and keeps its held-out rows.
pub fn enroll(cfg: &RunConfig) -> Result<Value, CliError> {
    let matrix = read_matrix(&cfg.features_path)?;
    let trial = enroll_trial(&matrix, &cfg.evaluation, 0)?;
    trial.library.save(&cfg.library_path)?;
    write_matrix(&cfg.test_features_path, &trial.test)?;
    Ok(json!({
        "command": "enroll",
        "users": trial.library.n_users(),
        "models": trial.library.n_models(),
        "discarded": trial.library.discarded(),
        "selected_features": trial.library.selected_features,
        "library_path": cfg.library_path,
        "test_features_path": cfg.test_features_path,
    }))
}

pub fn confirm(
    cfg: &RunConfig,
    claim: &str,
    subject: Option<&str>,
    block: BlockArg,
    eta: Option<f64>,
) -> Result<Value, CliError> {
    let library = ModelLibrary::load(&cfg.library_path)?;
    library.user_index(claim)?;
    let eta_t = eta.unwrap_or(cfg.evaluation.confirm_eta);
    let subject = subject.unwrap_or(claim);
    let rows = subject_rows(cfg, &library, subject)?;
    let mut out = json!({ "command": "confirm", "claim": claim, "subject": subject });
    if matches!(block, BlockArg::Ht | BlockArg::Both) {
        out["ht"] = serde_json::to_value(confirm_ht(claim, &rows, &library, cfg.evaluation.alpha, eta_t)?)?;
    }
    if matches!(block, BlockArg::Ml | BlockArg::Both) {
        out["ml"] = serde_json::to_value(confirm_ml(claim, &rows, &library, eta_t)?)?;
    }
    Ok(out)
}

pub fn identify(cfg: &RunConfig, subject: &str, eta: Option<f64>) -> Result<Value, CliError> {
    let library = ModelLibrary::load(&cfg.library_path)?;
    let eta_t = eta.unwrap_or(cfg.evaluation.identify_eta);
    let rows = subject_rows(cfg, &library, subject)?;
    let ht = identify_block(&rows, &library, Block::Ht { alpha: cfg.evaluation.alpha })?;
    let ml = identify_block(&rows, &library, Block::Ml)?;
    let fused = fuse(&[ht.clone(), ml.clone()], &cfg.evaluation.weights)?;
    let n = library.n_users().saturating_sub(1).max(1) as f64;
    let mut order: Vec<usize> = (0..library.n_users()).collect();
    order.sort_by(|&a, &b| {
        fused.values[b]
            .total_cmp(&fused.values[a])
            .then(library.users[a].cmp(&library.users[b]))
    });
    let ranked: Vec<Value> = order
        .iter()
        .map(|&i| {
            json!({
                "user": library.users[i],
                "v_ht": ht.values[i],
                "v_ml": ml.values[i],
                "fused": fused.values[i],
                "confidence": 100.0 * fused.values[i] / n,
            })
        })
        .collect();
    let decide = |v: &PredictionVector| decide_identity(v, eta_t, None);
    Ok(json!({
        "command": "identify",
        "subject": subject,
        "eta_t": eta_t,
        "ranked": ranked,
        "decision": {
            "ht": decide(&ht),
            "ml": decide(&ml),
            "fused": decide(&fused),
        },
    }))
}

pub fn evaluate(cfg: &RunConfig, eta: Option<f64>) -> Result<Value, CliError> {
    let matrix = read_matrix(&cfg.features_path)?;
    let mut trial_cfg = cfg.evaluation.clone();
    if let Some(eta) = eta {
        trial_cfg.identify_eta = eta;
    }
    let report = shuffle_trials(&matrix, &trial_cfg)?;
    let dir = &cfg.report_dir;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("evaluation.json"), report.to_json()?)?;
    report.write_trials_csv(BufWriter::new(File::create(dir.join("trials.csv"))?))?;

    let mut rank = String::from("kind,top1,top2,top3\n");
    for b in &report.summary.identification {
        rank.push_str(&format!("{},{},{},{}\n", b.kind.name(), b.rank.top1, b.rank.top2, b.rank.top3));
    }
    fs::write(dir.join("rank.csv"), rank)?;

    let etas: Vec<f64> = SWEEP_ETAS.map(f64::from).collect();
    let mut sweep = String::from("kind,eta_t,t,f,h\n");
    for kind in VectorKind::ALL {
        for (eta, t) in report.threshold_sweep(kind, &etas) {
            sweep.push_str(&format!("{},{eta},{},{},{}\n", kind.name(), t.t, t.f, t.h));
        }
    }
    fs::write(dir.join("sweep.csv"), sweep)?;

    Ok(json!({
        "command": "evaluate",
        "trials": report.trials.len(),
        "users": report.n_users,
        "summary": report.summary,
        "report_dir": dir,
    }))
}
