use std::path::Path;

use log::warn;
use serde::Serialize;

use super::config::{CurveKind, ExperimentConfig, WRecipe, WRecipeKind};
use super::setup::{build_setup, Setup, WeightCase};
use super::{write_csv, write_json};
use crate::alp::{solve_alp, solve_grlp, ConstraintAggregator};
use crate::analysis::PROJECTION_GUARD;
use crate::error::{Error, Result};
use crate::projection::{fixed_point, lub_of_optimal, ProjectionContext};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveFile {
    pub curve: CurveKind,
    pub zeta: Option<f64>,
    pub file: String,
    pub rows: usize,
    pub box_clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmittedCurve {
    pub curve: CurveKind,
    pub zeta: Option<f64>,
    pub reason: String,
}

/// Index of what `emit_curves` wrote and skipped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveManifest {
    pub w_kind: String,
    pub w_seed: Option<u64>,
    pub files: Vec<CurveFile>,
    pub omitted: Vec<OmittedCurve>,
}

#[derive(Serialize)]
struct Point {
    state: usize,
    value: f64,
}

/// The recipe used for `Ĵ`, `V̂` and `Γ̃J̄`: the first aggregation recipe,
/// else the first recipe with its first seed, else aggregation.
fn curve_recipe(cfg: &ExperimentConfig) -> (WRecipe, Option<u64>) {
    if let Some(r) = cfg.w.iter().find(|r| r.kind == WRecipeKind::Aggregation) {
        return (r.clone(), None);
    }
    match cfg.w.first() {
        Some(r) => (r.clone(), r.cells()[0]),
        None => (WRecipe::deterministic(WRecipeKind::Aggregation), None),
    }
}

fn file_name(kind: CurveKind, zeta: Option<f64>, multi: bool) -> String {
    match zeta {
        Some(z) if kind.depends_on_c() && multi => format!("{}_zeta_{z}.csv", kind.file_stem()),
        _ => format!("{}.csv", kind.file_stem()),
    }
}

fn projection_guard(setup: &Setup) -> Result<()> {
    let nd = setup.model.num_states() * setup.model.num_actions();
    if nd > PROJECTION_GUARD {
        return Err(Error::GuardExceeded {
            what: "state-action count for projections",
            limit: PROJECTION_GUARD,
            actual: nd,
        });
    }
    Ok(())
}

/// One curve and whether any LP behind it had a binding box.
fn compute(
    cfg: &ExperimentConfig,
    setup: &Setup,
    kind: CurveKind,
    case: &WeightCase,
    w: &Result<ConstraintAggregator>,
) -> Result<(Vec<f64>, bool)> {
    let search_box = cfg.search_box();
    let w = || {
        w.as_ref()
            .map_err(|e| Error::Config(format!("constraint matrix unavailable: {e}")))
    };
    let tol = cfg.tolerances.fixed_point();
    let max_iter = cfg.tolerances.fixed_point_max_iter();
    let zeros = vec![0.0; setup.model.num_states()];
    match kind {
        CurveKind::JStar => Ok((setup.j_star.to_vec(), false)),
        CurveKind::JAlp => {
            let s = solve_alp(&setup.model, &setup.phi, &case.c, search_box)?;
            Ok((s.values.into_inner(), s.box_clipped))
        }
        CurveKind::JGrlp => {
            let s = solve_grlp(&setup.model, &setup.phi, w()?, &case.c, search_box)?;
            Ok((s.values.into_inner(), s.box_clipped))
        }
        CurveKind::JGreedy => {
            let s = solve_grlp(&setup.model, &setup.phi, w()?, &case.c, search_box)?;
            let u = setup.model.greedy_policy(&s.values)?;
            Ok((setup.model.policy_evaluate(&u)?.into_inner(), s.box_clipped))
        }
        CurveKind::VLub => {
            projection_guard(setup)?;
            let ctx = ProjectionContext::lub(&setup.model, &setup.phi, search_box)?;
            let fp = fixed_point(&ctx, &zeros, tol, max_iter)?;
            Ok((fp.values.into_inner(), fp.box_clipped))
        }
        CurveKind::VAlub => {
            projection_guard(setup)?;
            let ctx = ProjectionContext::aggregated(&setup.model, &setup.phi, w()?, search_box)?;
            let fp = fixed_point(&ctx, &zeros, tol, max_iter)?;
            Ok((fp.values.into_inner(), fp.box_clipped))
        }
        CurveKind::LubJBar | CurveKind::AlubJBar => {
            projection_guard(setup)?;
            let lub = ProjectionContext::lub(&setup.model, &setup.phi, search_box)?;
            let j_bar = lub_of_optimal(&lub, &setup.j_star)?;
            let out = if kind == CurveKind::LubJBar {
                lub.apply(&j_bar.values)?
            } else {
                ProjectionContext::aggregated(&setup.model, &setup.phi, w()?, search_box)?
                    .apply(&j_bar.values)?
            };
            Ok((
                out.values.into_inner(),
                j_bar.box_clipped || out.box_clipped,
            ))
        }
    }
}

/// Writes one `(state, value)` CSV per curve, values negated, plus
/// `manifest.json`. Curves that cannot be computed are listed as omitted.
pub fn emit_curves(cfg: &ExperimentConfig, out: &Path) -> Result<CurveManifest> {
    let setup = build_setup(cfg)?;
    emit_curves_from_setup(cfg, &setup, out)
}

pub fn emit_curves_from_setup(
    cfg: &ExperimentConfig,
    setup: &Setup,
    out: &Path,
) -> Result<CurveManifest> {
    std::fs::create_dir_all(out)?;
    let (recipe, seed) = curve_recipe(cfg);
    let multi = setup.cases.len() > 1;
    let mut manifest = CurveManifest {
        w_kind: recipe.kind.name().into(),
        w_seed: seed,
        files: Vec::new(),
        omitted: Vec::new(),
    };
    for case in &setup.cases {
        let w = setup.build_w(&recipe, &case.c, seed);
        for kind in cfg.curve_kinds() {
            if !kind.depends_on_c() && !std::ptr::eq(case, &setup.cases[0]) {
                continue;
            }
            let zeta = if kind.depends_on_c() { case.zeta } else { None };
            match compute(cfg, setup, kind, case, &w) {
                Ok((values, box_clipped)) => {
                    let file = file_name(kind, zeta, multi);
                    let points: Vec<Point> = values
                        .iter()
                        .enumerate()
                        .map(|(state, v)| Point { state, value: -v })
                        .collect();
                    write_csv(&out.join(&file), &points)?;
                    manifest.files.push(CurveFile {
                        curve: kind,
                        zeta,
                        file,
                        rows: points.len(),
                        box_clipped,
                    });
                }
                Err(e) => {
                    warn!("curve {} omitted: {e}", kind.file_stem());
                    manifest.omitted.push(OmittedCurve {
                        curve: kind,
                        zeta,
                        reason: e.to_string(),
                    });
                }
            }
        }
    }
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}
