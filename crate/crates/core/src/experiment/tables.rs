use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, WRecipe};
use super::setup::{build_setup, Setup};
use super::{write_csv, write_json};
use crate::alp::solve_grlp;
use crate::analysis::{et_term, weighted_l1_error};
use crate::error::Result;

/// A table cell that could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellError {
    pub w_kind: String,
    pub zeta: Option<f64>,
    pub seed: Option<u64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Row {
    pub w_kind: String,
    pub seed: Option<u64>,
    pub e_t: Option<f64>,
    pub box_clipped: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1 {
    pub rows: Vec<Table1Row>,
    pub errors: Vec<CellError>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Row {
    pub w_kind: String,
    pub zeta: Option<f64>,
    pub seed: Option<u64>,
    pub l1c_error: Option<f64>,
    pub objective: Option<f64>,
    pub box_clipped: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2 {
    pub rows: Vec<Table2Row>,
    pub errors: Vec<CellError>,
}

fn cells(recipes: &[WRecipe]) -> Vec<(&WRecipe, Option<u64>)> {
    recipes
        .iter()
        .flat_map(|r| r.cells().into_iter().map(move |s| (r, s)))
        .collect()
}

/// `E_T` for every (recipe, seed) cell. Uses the first state-weight case,
/// which only matters for the `by_c` recipe.
pub fn run_table1(cfg: &ExperimentConfig) -> Result<Table1> {
    let setup = build_setup(cfg)?;
    Ok(table1_from_setup(cfg, &setup))
}

pub fn table1_from_setup(cfg: &ExperimentConfig, setup: &Setup) -> Table1 {
    let c = &setup.cases[0].c;
    let search_box = cfg.search_box();
    let results: Vec<_> = cells(&cfg.w)
        .into_par_iter()
        .map(|(recipe, seed)| {
            let out = setup
                .build_w(recipe, c, seed)
                .and_then(|w| et_term(&setup.model, &setup.phi, &w, &setup.j_star, search_box));
            (recipe.kind.name(), seed, out)
        })
        .collect();

    let mut table = Table1 {
        rows: Vec::new(),
        errors: Vec::new(),
    };
    for (kind, seed, out) in results {
        let (e_t, box_clipped) = match out {
            Ok(t) => (Some(t.value), Some(t.box_clipped)),
            Err(e) => {
                warn!("table1 cell {kind}/{seed:?} failed: {e}");
                table.errors.push(CellError {
                    w_kind: kind.into(),
                    zeta: None,
                    seed,
                    error: e.to_string(),
                });
                (None, None)
            }
        };
        table.rows.push(Table1Row {
            w_kind: kind.into(),
            seed,
            e_t,
            box_clipped,
        });
    }
    table
}

/// `‖J* − Ĵ‖_{1,c}` for every (recipe, ζ, seed) cell.
pub fn run_table2(cfg: &ExperimentConfig) -> Result<Table2> {
    let setup = build_setup(cfg)?;
    Ok(table2_from_setup(cfg, &setup))
}

pub fn table2_from_setup(cfg: &ExperimentConfig, setup: &Setup) -> Table2 {
    let search_box = cfg.search_box();
    let jobs: Vec<_> = setup
        .cases
        .iter()
        .flat_map(|case| cells(&cfg.w).into_iter().map(move |(r, s)| (case, r, s)))
        .collect();
    let results: Vec<_> = jobs
        .into_par_iter()
        .map(|(case, recipe, seed)| {
            let out = setup.build_w(recipe, &case.c, seed).and_then(|w| {
                let sol = solve_grlp(&setup.model, &setup.phi, &w, &case.c, search_box)?;
                let err = weighted_l1_error(&setup.j_star, &sol.values, &case.c)?;
                Ok((err, sol.objective, sol.box_clipped))
            });
            (recipe.kind.name(), case.zeta, seed, out)
        })
        .collect();

    let mut table = Table2 {
        rows: Vec::new(),
        errors: Vec::new(),
    };
    for (kind, zeta, seed, out) in results {
        let row = match out {
            Ok((err, obj, clipped)) => (Some(err), Some(obj), Some(clipped)),
            Err(e) => {
                warn!("table2 cell {kind}/{zeta:?}/{seed:?} failed: {e}");
                table.errors.push(CellError {
                    w_kind: kind.into(),
                    zeta,
                    seed,
                    error: e.to_string(),
                });
                (None, None, None)
            }
        };
        table.rows.push(Table2Row {
            w_kind: kind.into(),
            zeta,
            seed,
            l1c_error: row.0,
            objective: row.1,
            box_clipped: row.2,
        });
    }
    table
}

/// Writes `table1.csv` and `table1.json` (rows plus cell errors).
pub fn write_table1(table: &Table1, out: &Path) -> Result<()> {
    write_csv(&out.join("table1.csv"), &table.rows)?;
    write_json(&out.join("table1.json"), table)
}

/// Writes `table2.csv` and `table2.json`.
pub fn write_table2(table: &Table2, out: &Path) -> Result<()> {
    write_csv(&out.join("table2.csv"), &table.rows)?;
    write_json(&out.join("table2.json"), table)
}
