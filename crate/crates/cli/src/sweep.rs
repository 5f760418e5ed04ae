//! Resumable parameter sweep writing one CSV row per `(theta, M, eps)` point.

use std::collections::HashSet;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use rayon::prelude::*;
use serde::Serialize;
use tcvf::dictionary::TcBuilder;
use tcvf::eval::{evaluate_point, task_seed, SweepRow};

use crate::config::ExperimentConfig;

pub const CSV_NAME: &str = "sweep.csv";

type RowKey = (String, u64, u64);

fn key(theta: &[f64], m: u64, eps: f64) -> RowKey {
    let theta: Vec<String> = theta.iter().map(f64::to_string).collect();
    (theta.join(";"), m, eps.to_bits())
}

#[derive(Serialize)]
struct SupEntry {
    #[serde(rename = "M")]
    m: u64,
    eps: f64,
    sup_residual_scaled: f64,
}

#[derive(Serialize)]
pub struct SweepSummary {
    csv: PathBuf,
    rows_total: usize,
    rows_computed: usize,
    rows_skipped: usize,
    sup: Vec<SupEntry>,
}

fn read_rows(path: &Path) -> Result<Vec<SweepRow>> {
    if !path.exists() || std::fs::metadata(path)?.len() == 0 {
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| row.with_context(|| format!("{}: bad row {}", path.display(), i + 1)))
        .collect()
}

fn csv_line(row: &SweepRow, header: bool) -> Result<Vec<u8>> {
    let mut writer = csv::WriterBuilder::new().has_headers(header).from_writer(Vec::new());
    writer.serialize(row)?;
    Ok(writer.into_inner().map_err(|e| e.into_error())?)
}

pub fn run(cfg: &ExperimentConfig) -> Result<SweepSummary> {
    let model = cfg.load_model()?;
    let grid = cfg.grid(&model)?;
    let thetas = cfg.thetas(&model)?;
    let ms = cfg.require_m()?.to_vec();
    let epss = cfg.require_eps()?.to_vec();
    let model_id = model.name().to_string();
    let dir = cfg.out.clone().context("--out (output directory) is required")?;
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(CSV_NAME);

    let existing = read_rows(&path)?;
    if let Some(other) = existing.iter().find(|r| r.model_id != model_id) {
        bail!("{} holds rows for model {:?}, not {model_id:?}", path.display(), other.model_id);
    }
    let done: HashSet<RowKey> = existing.iter().map(|r| key(&r.theta, r.m, r.eps)).collect();

    let mut pending = Vec::new();
    for (ti, theta) in thetas.iter().enumerate() {
        for (mi, &m) in ms.iter().enumerate() {
            for (ei, &eps) in epss.iter().enumerate() {
                if !done.contains(&key(theta, m, eps)) {
                    pending.push((ti, mi, ei));
                }
            }
        }
    }
    let rows_skipped = thetas.len() * ms.len() * epss.len() - pending.len();
    info!("{} points pending, {rows_skipped} already in {}", pending.len(), path.display());

    let needed: HashSet<usize> = pending.iter().map(|&(_, mi, _)| mi).collect();
    let mut builder = TcBuilder::new(&model, &grid)?;
    let mut dicts = Vec::with_capacity(ms.len());
    for (mi, &m) in ms.iter().enumerate() {
        dicts.push(if needed.contains(&mi) {
            info!("building TC dictionary for M = {m}");
            Some(builder.choose_gamma(m)?.dictionary)
        } else {
            None
        });
    }

    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut need_header = existing.is_empty();
    if need_header {
        file.set_len(0)?;
    }
    let chunk = (rayon::current_num_threads() * 2).max(1);
    for tasks in pending.chunks(chunk) {
        let rows: Vec<SweepRow> = tasks
            .par_iter()
            .map(|&(ti, mi, ei)| {
                let opts = cfg.eval_options(task_seed(cfg.seed, &[ti as u64, mi as u64, ei as u64]));
                let dict = dicts[mi].as_ref().expect("built for every pending M");
                Ok(evaluate_point(dict, &model_id, &thetas[ti], epss[ei], &opts)?)
            })
            .collect::<Result<_>>()?;
        for row in &rows {
            // One write per row, so an interrupted run leaves whole rows only.
            file.write_all(&csv_line(row, need_header)?)?;
            need_header = false;
        }
        file.flush()?;
    }

    let all = read_rows(&path)?;
    let mut sup = Vec::new();
    for &m in &ms {
        for &eps in &epss {
            let value = all
                .iter()
                .filter(|r| r.m == m && r.eps == eps)
                .map(|r| r.residual_scaled)
                .fold(f64::NEG_INFINITY, f64::max);
            sup.push(SupEntry { m, eps, sup_residual_scaled: value });
        }
    }
    Ok(SweepSummary {
        csv: path,
        rows_total: all.len(),
        rows_computed: pending.len(),
        rows_skipped,
        sup,
    })
}
