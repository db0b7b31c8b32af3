//! Bundled data.

use crate::io::{read_dataset_from_reader, CsvSpec};
use crate::model::Dataset;

const DIABETES_CSV: &str = include_str!("../data/diabetes.csv");

/// Reaven and Miller's diabetes data: 145 subjects, three measurements
/// (`glucose`, `insulin`, `sspg`) and the clinical class (`Normal`,
/// `Chemical`, `Overt`) as true labels.
pub fn diabetes() -> Dataset {
    let spec = CsvSpec {
        label_col: Some("class".into()),
        ..CsvSpec::default()
    };
    read_dataset_from_reader(DIABETES_CSV.as_bytes(), &spec).expect("bundled data parses")
}

/// The raw bundled CSV text.
pub fn diabetes_csv() -> &'static str {
    DIABETES_CSV
}
