use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bfmix_core::io::{self, IoError};
use bfmix_core::postprocess::{
    filter_to_kplus, identified_assignments, kplus_distribution, kplus_mode, map_partition,
    posterior_summary, ppr_identify, vi_partition, PosteriorSummary, PprFunctional,
};
use bfmix_core::ChainRng;
use rand::SeedableRng;
use serde::Serialize;

use crate::error::{CliError, EXIT_IDENTIFY};
use crate::fit::format_dist;
use crate::{ensure_dir, write_json, KPlusChoice};

#[derive(Serialize)]
struct Report {
    draws: String,
    k_plus: usize,
    selection: String,
    kplus_distribution: BTreeMap<usize, f64>,
    n_draws: usize,
    n_eligible: usize,
    n_kept: usize,
    non_permutation_rate: f64,
    eta: Vec<f64>,
    mean_size: Vec<f64>,
    mu: Vec<Vec<f64>>,
    sigma: Vec<Vec<Vec<f64>>>,
    map_sizes: Option<Vec<usize>>,
    vi_sizes: Option<Vec<usize>>,
    vi_mean_distance: Option<f64>,
    artifacts: BTreeMap<String, String>,
}

/// `draws.csv` → `assignments.csv`, `draws_chain2.csv` → `assignments_chain2.csv`.
fn sibling_assignments(draws: &Path) -> Option<PathBuf> {
    let name = draws.file_name()?.to_str()?;
    let rest = name.strip_prefix("draws")?;
    let candidate = draws.with_file_name(format!("assignments{rest}"));
    candidate.is_file().then_some(candidate)
}

pub fn run(
    draws_path: &Path,
    assignments: Option<&Path>,
    choice: KPlusChoice,
    seed: u64,
    out_dir: &Path,
) -> Result<(), CliError> {
    let mut draws = io::read_draws_file(draws_path)?.records;
    let assignments = assignments
        .map(Path::to_path_buf)
        .or_else(|| sibling_assignments(draws_path));
    if let Some(p) = &assignments {
        io::attach_assignments(&mut draws, io::read_assignments_file(p)?)
            .map_err(|e: IoError| CliError::input(format!("{}: {e}", p.display())))?;
    }

    let dist = kplus_distribution(&draws);
    let k_plus = match choice {
        KPlusChoice::Auto => kplus_mode(&dist)
            .ok_or_else(|| CliError::new(EXIT_IDENTIFY, "the draws file holds no sweeps"))?,
        KPlusChoice::Fixed(k) => k,
    };
    let filtered = filter_to_kplus(&draws, k_plus)?;
    let id = ppr_identify(
        &filtered,
        PprFunctional::Means,
        &mut ChainRng::seed_from_u64(seed),
    )?;
    let summary = posterior_summary(&id)?;

    ensure_dir(out_dir)?;
    let mut artifacts = BTreeMap::new();
    let kplus_file = "kplus.csv";
    write_kplus(&out_dir.join(kplus_file), &dist)?;
    artifacts.insert("kplus".to_string(), kplus_file.to_string());
    let summary_file = "summary.csv";
    write_summary(&out_dir.join(summary_file), &summary)?;
    artifacts.insert("summary".to_string(), summary_file.to_string());

    let (mut map_sizes, mut vi_sizes, mut vi_score) = (None, None, None);
    if assignments.is_some() {
        let map = map_partition(&identified_assignments(&id)?)?;
        io::write_partition(io::create(&out_dir.join("partition_map.csv"))?, &map)?;
        artifacts.insert("partition_map".to_string(), "partition_map.csv".to_string());
        map_sizes = Some(map.group_sizes());

        let all: Vec<&[usize]> = draws.iter().filter_map(|r| r.s.as_deref()).collect();
        let (vi, score) = vi_partition(&all)?;
        io::write_partition(io::create(&out_dir.join("partition_vi.csv"))?, &vi)?;
        artifacts.insert("partition_vi".to_string(), "partition_vi.csv".to_string());
        vi_sizes = Some(vi.group_sizes());
        vi_score = Some(score);
    }

    let selection = match choice {
        KPlusChoice::Auto => "auto",
        KPlusChoice::Fixed(_) => "fixed",
    };
    println!("K+ distribution {}", format_dist(&dist));
    println!(
        "K+ = {k_plus} ({selection}): {} of {} sweeps eligible, {} kept, non-permutation rate {:.4}",
        id.n_eligible,
        draws.len(),
        summary.n_kept,
        id.non_permutation_rate
    );
    print_table(&summary);
    if let Some(s) = &map_sizes {
        println!("MAP partition sizes {s:?}");
    }
    if let (Some(s), Some(v)) = (&vi_sizes, vi_score) {
        println!("VI partition sizes {s:?}, mean VI {v:.4}");
    }
    if assignments.is_none() {
        println!("no assignments file found; partitions were not computed");
    }

    let report = Report {
        draws: draws_path.display().to_string(),
        k_plus,
        selection: selection.to_string(),
        kplus_distribution: dist,
        n_draws: draws.len(),
        n_eligible: id.n_eligible,
        n_kept: summary.n_kept,
        non_permutation_rate: id.non_permutation_rate,
        eta: summary.eta.clone(),
        mean_size: summary.mean_size.clone(),
        mu: summary.mu.iter().map(|m| m.iter().cloned().collect()).collect(),
        sigma: summary
            .sigma
            .iter()
            .map(|s| s.row_iter().map(|r| r.iter().cloned().collect()).collect())
            .collect(),
        map_sizes,
        vi_sizes,
        vi_mean_distance: vi_score,
        artifacts,
    };
    write_json(&out_dir.join("identify.json"), &report)
}

fn write_kplus(path: &Path, dist: &BTreeMap<usize, f64>) -> Result<(), CliError> {
    let rows = std::iter::once("K_plus,probability".to_string())
        .chain(dist.iter().map(|(k, p)| format!("{k},{p}")));
    write_lines(path, rows)
}

/// One row per parameter, one column per identified cluster.
fn summary_rows(s: &PosteriorSummary) -> Vec<(String, Vec<f64>)> {
    let r = s.mu.first().map_or(0, |m| m.len());
    let mut rows = vec![
        ("eta".to_string(), s.eta.clone()),
        ("N".to_string(), s.mean_size.clone()),
    ];
    for j in 0..r {
        rows.push((format!("mu_{}", j + 1), s.mu.iter().map(|m| m[j]).collect()));
    }
    for i in 0..r {
        for j in 0..=i {
            rows.push((
                format!("sigma_{}_{}", i + 1, j + 1),
                s.sigma.iter().map(|m| m[(i, j)]).collect(),
            ));
        }
    }
    rows
}

fn write_summary(path: &Path, s: &PosteriorSummary) -> Result<(), CliError> {
    let header = std::iter::once("parameter".to_string())
        .chain((1..=s.k_plus).map(|k| format!("cluster_{k}")))
        .collect::<Vec<_>>()
        .join(",");
    let rows = summary_rows(s).into_iter().map(|(name, v)| {
        std::iter::once(name)
            .chain(v.iter().map(|x| x.to_string()))
            .collect::<Vec<_>>()
            .join(",")
    });
    write_lines(path, std::iter::once(header).chain(rows))
}

fn print_table(s: &PosteriorSummary) {
    print!("{:<12}", "");
    for k in 1..=s.k_plus {
        print!("{:>12}", format!("cluster {k}"));
    }
    println!();
    for (name, v) in summary_rows(s) {
        print!("{name:<12}");
        for x in v {
            print!("{x:>12.2}");
        }
        println!();
    }
}

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<(), CliError> {
    let text: String = lines.map(|l| l + "\n").collect();
    std::fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}
