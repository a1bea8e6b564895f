//! Experiment drivers: tables, curves and the randomized property suite,
//! all configured from TOML and writing CSV/JSON.

mod config;
mod curves;
pub mod instances;
mod properties;
mod setup;
mod tables;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

pub use config::{
    CurveKind, CustomModel, ExperimentConfig, ModelFile, PropertySettings, Scenario, Tolerances,
    WRecipe, WRecipeKind,
};
pub use curves::{emit_curves, emit_curves_from_setup, CurveFile, CurveManifest, OmittedCurve};
pub use properties::{
    check_instance, run_property_suite, write_property_report, InvariantTally, Outcome,
    PropertyReport, INVARIANTS,
};
pub use setup::{build_setup, load_model_file, Setup, WeightCase};
pub use tables::{
    run_table1, run_table2, table1_from_setup, table2_from_setup, write_table1, write_table2,
    CellError, Table1, Table1Row, Table2, Table2Row,
};

/// Header row from the field names, then one record per row.
pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
