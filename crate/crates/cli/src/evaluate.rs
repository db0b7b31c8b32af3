use std::path::Path;

use bfmix_core::io::{read_partition_file, ColumnRef};
use bfmix_core::postprocess::{ari, confusion_and_mcr};
use serde::Serialize;

use crate::error::CliError;
use crate::{ensure_dir, write_json};

#[derive(Serialize)]
struct Metrics {
    partition: String,
    truth: String,
    n: usize,
    ari: f64,
    mcr: f64,
    /// Row labels of `confusion`, reference classes by ascending size.
    truth_groups: Vec<String>,
    /// Column labels of `confusion`, aligned with the rows.
    estimated_groups: Vec<String>,
    confusion: Vec<Vec<usize>>,
}

pub fn run(
    partition_path: &Path,
    truth_path: &Path,
    partition_col: &str,
    truth_col: &str,
    out_dir: &Path,
) -> Result<(), CliError> {
    let (est, est_names) = read_partition_file(partition_path, &ColumnRef::parse(partition_col))
        .map_err(|e| CliError::input(format!("{}: {e}", partition_path.display())))?;
    let (truth, truth_names) = read_partition_file(truth_path, &ColumnRef::parse(truth_col))
        .map_err(|e| CliError::input(format!("{}: {e}", truth_path.display())))?;
    if est.len() != truth.len() {
        return Err(CliError::input(format!(
            "row count mismatch: {} has {} rows, {} has {}",
            partition_path.display(),
            est.len(),
            truth_path.display(),
            truth.len()
        )));
    }
    let ari = ari(&est, &truth)?;
    let conf = confusion_and_mcr(&est, &truth)?;
    let rows: Vec<String> = conf
        .truth_order
        .iter()
        .map(|&g| truth_names[g].clone())
        .collect();
    let cols: Vec<String> = conf
        .estimated_order
        .iter()
        .map(|&g| est_names[g].clone())
        .collect();
    let table: Vec<Vec<usize>> = conf
        .truth_order
        .iter()
        .map(|&t| conf.estimated_order.iter().map(|&e| conf.table[t][e]).collect())
        .collect();

    println!("ARI {ari:.4}");
    println!("MCR {:.4}", conf.mcr);
    println!("confusion (rows reference, columns estimate)");
    let width = rows.iter().map(String::len).max().unwrap_or(0).max(8);
    print!("{:<width$}", "");
    for c in &cols {
        print!("{c:>8}");
    }
    println!();
    for (name, row) in rows.iter().zip(&table) {
        print!("{name:<width$}");
        for x in row {
            print!("{x:>8}");
        }
        println!();
    }

    ensure_dir(out_dir)?;
    let metrics = Metrics {
        partition: partition_path.display().to_string(),
        truth: truth_path.display().to_string(),
        n: est.len(),
        ari,
        mcr: conf.mcr,
        truth_groups: rows,
        estimated_groups: cols,
        confusion: table,
    };
    write_json(&out_dir.join("metrics.json"), &metrics)
}
