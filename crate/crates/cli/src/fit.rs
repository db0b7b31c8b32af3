use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use bfmix_core::io::{self, ColumnRef, CsvSpec};
use bfmix_core::model::{build_default_prior, ModelError};
use bfmix_core::postprocess::kplus_distribution;
use bfmix_core::sampler::{run_chains, ChainOutput};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::{ensure_dir, write_json};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: RunConfig,
    pub dataset: DatasetInfo,
    pub seed: u64,
    pub chains: Vec<ChainEntry>,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub path: String,
    pub sha256: String,
    pub n: usize,
    pub features: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainEntry {
    pub seed: u64,
    /// File names relative to the output directory.
    pub artifacts: BTreeMap<String, String>,
    pub n_stored: usize,
    pub kplus_distribution: BTreeMap<usize, f64>,
    pub wall_time_secs: f64,
}

pub fn run(data_path: &Path, cfg: RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let bytes = std::fs::read(data_path)
        .map_err(|e| CliError::input(format!("{}: {e}", data_path.display())))?;
    let spec = CsvSpec {
        columns: cfg
            .columns
            .as_ref()
            .map(|cs| cs.iter().map(|c| ColumnRef::parse(c)).collect()),
        label_col: cfg.label_col.as_deref().map(ColumnRef::parse),
        ..CsvSpec::default()
    };
    let data = io::read_dataset_from_reader(bytes.as_slice(), &spec)
        .map_err(|e| CliError::input(format!("{}: {e}", data_path.display())))?;
    let prior = build_default_prior(&data, cfg.c, cfg.phi, cfg.gamma_spec(), cfg.k_prior())
        .map_err(|e| match e {
            ModelError::InvalidData(_) | ModelError::DegeneratePrior(_) => {
                CliError::input(e.to_string())
            }
            _ => CliError::config(e.to_string()),
        })?;
    ensure_dir(out_dir)?;

    let outputs = run_chains(
        &data,
        &prior,
        &cfg.chain_config(),
        cfg.sampler_mode(),
        cfg.chains,
    );
    let mut chains = Vec::with_capacity(outputs.len());
    for (i, out) in outputs.into_iter().enumerate() {
        let out = out.map_err(|e| {
            let mut err = CliError::from(e);
            if cfg.chains > 1 {
                err.message = format!("chain {}: {}", i + 1, err.message);
            }
            err
        })?;
        let suffix = if cfg.chains > 1 {
            format!("_chain{}", i + 1)
        } else {
            String::new()
        };
        let entry = write_chain(&out, data.dim(), &suffix, out_dir)?;
        println!(
            "chain {} (seed {}): {} draws in {:.1}s, K+ distribution {}",
            i + 1,
            entry.seed,
            entry.n_stored,
            entry.wall_time_secs,
            format_dist(&entry.kplus_distribution)
        );
        chains.push(entry);
    }

    let manifest = RunManifest {
        version: format!("bfmix {}", env!("CARGO_PKG_VERSION")),
        seed: cfg.seed,
        dataset: DatasetInfo {
            path: data_path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
            n: data.n(),
            features: data.feature_names().to_vec(),
        },
        config: cfg,
        chains,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    write_json(&out_dir.join(MANIFEST), &manifest)?;
    println!("wrote {}", out_dir.join(MANIFEST).display());
    Ok(())
}

fn write_chain(
    out: &ChainOutput,
    r: usize,
    suffix: &str,
    dir: &Path,
) -> Result<ChainEntry, CliError> {
    let mut artifacts = BTreeMap::new();
    let draws = format!("draws{suffix}.csv");
    io::write_draws(io::create(&dir.join(&draws))?, &out.records, r)?;
    artifacts.insert("draws".to_string(), draws);
    let trace = format!("trace{suffix}.csv");
    io::write_trace(io::create(&dir.join(&trace))?, &out.trace)?;
    artifacts.insert("trace".to_string(), trace);
    if out.config.store_assignments {
        let assignments = format!("assignments{suffix}.csv");
        io::write_assignments(io::create(&dir.join(&assignments))?, &out.records)?;
        artifacts.insert("assignments".to_string(), assignments);
    }
    Ok(ChainEntry {
        seed: out.seed,
        artifacts,
        n_stored: out.records.len(),
        kplus_distribution: kplus_distribution(&out.records),
        wall_time_secs: out.wall_time.as_secs_f64(),
    })
}

pub fn format_dist(dist: &BTreeMap<usize, f64>) -> String {
    dist.iter()
        .map(|(k, p)| format!("{k}: {p:.3}"))
        .collect::<Vec<_>>()
        .join(", ")
}
