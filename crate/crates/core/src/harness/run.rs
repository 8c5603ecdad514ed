use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use crate::baselines::{joint_run, qpsk_run, scratch_run};
use crate::error::{Error, Result};
use crate::metalearn::{online_run, SequenceResult};
use crate::scenario::Scenario;

/// One CSV row: SER of `method` on one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub method: Method,
    pub snr_db: f64,
    pub shots: usize,
    pub sequence: usize,
    pub ser: f64,
    pub seed: u64,
}

/// Mean SER of one grid cell after the warm-up window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub method: Method,
    pub snr_db: f64,
    pub shots: usize,
    pub warmup: usize,
    pub sequences: usize,
    pub mean_ser: f64,
    pub seed: u64,
}

/// Per-sequence hashes used to confirm that methods saw the same pilots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashRecord {
    pub method: Method,
    pub snr_db: f64,
    pub shots: usize,
    pub sequence: usize,
    pub task_hash: String,
    pub model_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<MetricsRecord>,
    pub summary: Vec<SummaryRecord>,
    pub hashes: Vec<HashRecord>,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    method: Method,
    snr_db: f64,
    shots: usize,
}

fn run_cell(config: &ExperimentConfig, cell: Cell) -> Result<Vec<SequenceResult>> {
    let scenario = Scenario::new(
        config.arch()?,
        config.seed,
        cell.snr_db,
        cell.shots,
        config.meta.query_shots_for(cell.shots),
        config.n_eval,
        config.n_sequences,
        config.rho,
    )?;
    log::info!("{} snr {} shots {}: start", cell.method, cell.snr_db, cell.shots);
    let out = match cell.method {
        Method::OmlCae => online_run(&scenario, &config.meta),
        Method::Cae => scratch_run(&scenario, &config.meta),
        Method::JointCae => joint_run(&scenario, &config.meta, &config.joint),
        Method::QpskMle => qpsk_run(&scenario),
    }?;
    log::info!("{} snr {} shots {}: done", cell.method, cell.snr_db, cell.shots);
    Ok(out)
}

/// Mean of `rows` after dropping the first `warmup` sequences.
pub fn summarize(records: &[MetricsRecord], warmup: usize) -> Vec<SummaryRecord> {
    let mut out: Vec<SummaryRecord> = Vec::new();
    for r in records {
        let same = |s: &SummaryRecord| s.method == r.method && s.snr_db == r.snr_db && s.shots == r.shots;
        let idx = match out.iter().position(same) {
            Some(i) => i,
            None => {
                out.push(SummaryRecord {
                    method: r.method,
                    snr_db: r.snr_db,
                    shots: r.shots,
                    warmup,
                    sequences: 0,
                    mean_ser: 0.0,
                    seed: r.seed,
                });
                out.len() - 1
            }
        };
        if r.sequence > warmup {
            out[idx].sequences += 1;
            out[idx].mean_ser += r.ser;
        }
    }
    for s in &mut out {
        s.mean_ser = if s.sequences > 0 {
            s.mean_ser / s.sequences as f64
        } else {
            f64::NAN
        };
    }
    out
}

/// Run every (method, SNR, shots) cell. Cells run concurrently; results are
/// merged in grid order, so the output does not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut cells = Vec::new();
    for &method in &config.methods {
        for &snr_db in &config.snr_db {
            for &shots in &config.shots {
                cells.push(Cell { method, snr_db, shots });
            }
        }
    }
    let work = || -> Vec<Result<Vec<SequenceResult>>> {
        cells.par_iter().map(|&c| run_cell(config, c)).collect()
    };
    let results = if config.threads == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?
            .install(work)
    };

    let mut records = Vec::new();
    let mut hashes = Vec::new();
    for (cell, res) in cells.iter().zip(results) {
        for r in res? {
            records.push(MetricsRecord {
                method: cell.method,
                snr_db: cell.snr_db,
                shots: cell.shots,
                sequence: r.sequence,
                ser: r.ser,
                seed: config.seed,
            });
            hashes.push(HashRecord {
                method: cell.method,
                snr_db: cell.snr_db,
                shots: cell.shots,
                sequence: r.sequence,
                task_hash: r.task_hash,
                model_hash: r.theta_hash,
            });
        }
    }
    let summary = summarize(&records, config.warmup);
    Ok(ExperimentOutput {
        records,
        summary,
        hashes,
    })
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::ConfigParse(format!("{other:?}")),
        })?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone)]
pub struct OutputPaths {
    pub metrics: PathBuf,
    pub summary: PathBuf,
    pub hashes: PathBuf,
    pub config: PathBuf,
}

/// Write `metrics.csv`, `summary.csv`, `hashes.csv` and the resolved config.
pub fn write_outputs(config: &ExperimentConfig, out: &ExperimentOutput) -> Result<OutputPaths> {
    let dir = &config.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = OutputPaths {
        metrics: dir.join("metrics.csv"),
        summary: dir.join("summary.csv"),
        hashes: dir.join("hashes.csv"),
        config: dir.join("config.toml"),
    };
    write_csv(&paths.metrics, &out.records)?;
    write_csv(&paths.summary, &out.summary)?;
    write_csv(&paths.hashes, &out.hashes)?;
    let mut f = fs::File::create(&paths.config).map_err(|e| Error::io(&paths.config, e))?;
    f.write_all(config.to_toml()?.as_bytes())
        .map_err(|e| Error::io(&paths.config, e))?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Profile;

    fn tiny(dir: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::for_profile(Profile::Desk);
        c.hidden = 8;
        c.n_sequences = 4;
        c.warmup = 1;
        c.n_eval = 200;
        c.shots = vec![1, 2];
        c.meta.outer_iters = 3;
        c.meta.finetune_iters = 5;
        c.out_dir = dir.to_path_buf();
        c
    }

    #[test]
    fn grid_order_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let c = tiny(dir.path());
        let out = run_experiment(&c).unwrap();
        assert_eq!(out.records.len(), 4 * 2 * 4);
        assert_eq!(out.records[0].method, Method::OmlCae);
        assert_eq!(out.records.last().unwrap().method, Method::QpskMle);
        let paths = write_outputs(&c, &out).unwrap();
        let text = fs::read_to_string(&paths.metrics).unwrap();
        assert!(text.starts_with("method,snr_db,shots,sequence,ser,seed\n"));
        assert!(!text.contains('\r'));
        assert_eq!(read_metrics(&paths.metrics).unwrap(), out.records);
    }

    #[test]
    fn methods_share_tasks() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&tiny(dir.path())).unwrap();
        for h in &out.hashes {
            let other = out
                .hashes
                .iter()
                .find(|g| g.method == Method::OmlCae && g.shots == h.shots && g.sequence == h.sequence)
                .unwrap();
            assert_eq!(h.task_hash, other.task_hash);
        }
    }

    #[test]
    fn summary_matches_recomputed_mean() {
        let dir = tempfile::tempdir().unwrap();
        let c = tiny(dir.path());
        let out = run_experiment(&c).unwrap();
        for s in &out.summary {
            let rows: Vec<f64> = out
                .records
                .iter()
                .filter(|r| r.method == s.method && r.shots == s.shots && r.sequence > c.warmup)
                .map(|r| r.ser)
                .collect();
            assert_eq!(rows.len(), s.sequences);
            let mean = rows.iter().sum::<f64>() / rows.len() as f64;
            assert!((mean - s.mean_ser).abs() < 1e-15);
        }
    }

    #[test]
    fn high_snr_qpsk_is_error_free() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = tiny(dir.path());
        c.methods = vec![Method::QpskMle];
        c.snr_db = vec![60.0];
        let out = run_experiment(&c).unwrap();
        assert!(out.records.iter().all(|r| r.ser == 0.0));
    }

    #[test]
    fn unwritable_output_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let mut c = tiny(dir.path());
        c.out_dir = blocker.join("sub");
        c.methods = vec![Method::QpskMle];
        let out = run_experiment(&c).unwrap();
        assert!(matches!(write_outputs(&c, &out), Err(Error::Io { .. })));
    }
}
