//! Stage execution: builds the measure, runs the requested stages in order,
//! and assembles `report.json` plus figures and tables.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value};

use rieszlab::baup::{nonbaup_family, SampleSpec};
use rieszlab::carleson::{carleson_constant, non_carleson_layers, CellFamily, LayersOutcome};
use rieszlab::flatness::{analytic_defect, best_plane, geometric_defect, FlatnessQuery};
use rieszlab::lattice::{build_lattice, Lattice, LatticeQuery};
use rieszlab::measure::DiscreteMeasure;
use rieszlab::riesz::{op_norm, KernelSpec};

use crate::config::RunConfig;
use crate::svg::Svg;

const DIR_STEP: f64 = std::f64::consts::PI / 32.0;

pub struct PipelineOutput {
    pub report: Value,
}

pub fn run(cfg: &RunConfig) -> Result<PipelineOutput> {
    let m = cfg.build_measure()?;
    std::fs::create_dir_all(&cfg.out)?;
    std::fs::create_dir_all(cfg.out.join("figures"))?;
    std::fs::create_dir_all(cfg.out.join("tables"))?;

    let mut lattice: Option<Lattice> = None;
    let mut lattice_json = Value::Null;
    let mut riesz_json = Value::Null;
    let mut flatness_json = Value::Null;
    let mut baup_json = Value::Null;
    let mut carleson_json = Value::Null;
    let mut layers_json = Value::Null;
    let mut family: Option<CellFamily> = None;

    for stage in &cfg.stages {
        match stage.as_str() {
            "lattice" => {
                let (k_min, k_max) = cfg.lattice_range(&m);
                let lat = build_lattice(&m, k_min, k_max)?;
                lattice_json = json!({
                    "k_min": lat.k_min,
                    "k_max": lat.k_max,
                    "certified": true,
                    "levels": lat.levels.iter().map(|lv| json!({
                        "k": lv.k,
                        "cells": lv.cell_ids.len(),
                        "scale": rieszlab::lattice::scale(lv.k),
                    })).collect::<Vec<_>>(),
                    "cells": lat.cells.len(),
                });
                write_cells_table(&cfg.out, &m, &lat)?;
                write_lattice_figure(&cfg.out, &m, &lat)?;
                lattice = Some(lat);
            }
            "riesz" => {
                let mut curve = Vec::new();
                for mult in [8.0, 16.0, 32.0] {
                    let spec = KernelSpec::full(mult * m.mesh())
                        .map_err(anyhow::Error::from)?;
                    let est = op_norm(&m, &spec, 200, 1e-6, cfg.seed)?;
                    curve.push(json!({
                        "value": est.value,
                        "delta": est.delta,
                        "iters": est.iters,
                        "converged": est.converged,
                    }));
                }
                write_opnorm_figure(&cfg.out, &curve)?;
                riesz_json = json!({
                    "op_norm": curve.last().cloned().unwrap_or(Value::Null),
                    "curve": curve,
                });
            }
            "flatness" => {
                let lat = lattice.as_ref().context("flatness stage requires lattice")?;
                let k = lat.k_max;
                let lv = lat.level(k).context("no such level")?;
                // cap the LP work at 24 evenly spaced cells per run
                let ids: Vec<usize> = pick_spread(&lv.cell_ids, 24);
                let mut rows = Vec::new();
                for cid in ids {
                    let cell = lat.cell(cid);
                    let z = m.point(cell.center).to_vec();
                    let l = cell.scale();
                    let Ok((plane, alpha_geo)) = best_plane(&m, &z, l, cfg.a_factor) else {
                        continue;
                    };
                    let q = FlatnessQuery::new(z, l, cfg.a_factor, Some(plane.clone()))
                        .map_err(anyhow::Error::from)?;
                    let an = analytic_defect(&m, &q, cfg.seed)?;
                    rows.push(json!({
                        "cell": cid,
                        "k": k,
                        "alpha_geo": alpha_geo,
                        "alpha_an": an.value,
                        "normal": plane.normal(),
                        "lp_size": [an.lp_size.0, an.lp_size.1],
                        "slack": an.slack,
                    }));
                }
                write_flatness_figure(&cfg.out, &m, lat, &rows)?;
                write_flatness_table(&cfg.out, &rows)?;
                flatness_json = Value::Array(rows);
            }
            "baup" => {
                let lat = lattice.as_ref().context("baup stage requires lattice")?;
                let fam = nonbaup_family(
                    &m,
                    lat,
                    cfg.delta,
                    DIR_STEP,
                    SampleSpec::Sample { max: 64, seed: cfg.seed },
                )?;
                let tested: usize = fam
                    .tested_levels
                    .iter()
                    .map(|&k| lat.level(k).map(|lv| lv.cell_ids.len()).unwrap_or(0))
                    .sum();
                let mut rows = Vec::new();
                for &k in &fam.tested_levels {
                    for &cid in &lat.level(k).unwrap().cell_ids {
                        let non_baup = fam.all.binary_search(&cid).is_ok();
                        rows.push(json!({
                            "id": cid,
                            "delta": cfg.delta,
                            "non_baup": non_baup,
                            "witness": Value::Null,
                        }));
                    }
                }
                write_baup_table(&cfg.out, &rows)?;
                baup_json = json!({
                    "delta": cfg.delta,
                    "tested_levels": fam.tested_levels,
                    "tested_cells": tested,
                    "family": fam.all,
                    "rarefied": fam.rarefied,
                    "fraction": if tested > 0 { fam.all.len() as f64 / tested as f64 } else { 0.0 },
                    "cells": rows,
                });
                family = Some(CellFamily::new("nonbaup", fam.all));
            }
            "carleson" => {
                let lat = lattice.as_ref().context("carleson stage requires lattice")?;
                // default family: the non-BAUP cells when the baup stage ran,
                // otherwise every cell
                let fam = family.clone().unwrap_or_else(|| {
                    CellFamily::new("all-cells", lat.cells.iter().map(|c| c.id).collect())
                });
                let rep = carleson_constant(lat, &m, &fam)?;
                write_carleson_figure(&cfg.out, &rep.top_ratios)?;
                carleson_json = json!({
                    "family": fam.label,
                    "family_size": fam.ids.len(),
                    "best_constant": rep.best_constant,
                    "witness": rep.witness,
                    "top_ratios": rep.top_ratios.iter().map(|&(id, r)| json!([id, r])).collect::<Vec<_>>(),
                });
                layers_json = match non_carleson_layers(lat, &m, &fam, 2, 0.5)? {
                    LayersOutcome::Layers(stack) => json!({
                        "root": stack.root,
                        "layers": stack.layers,
                        "coverage": stack.coverage,
                        "refused": false,
                    }),
                    LayersOutcome::Refusal { achieved_coverage, layers_built, reason } => json!({
                        "refused": true,
                        "achieved_coverage": achieved_coverage,
                        "layers_built": layers_built,
                        "reason": reason,
                    }),
                };
            }
            other => anyhow::bail!("unknown stage `{other}`"),
        }
    }

    let bbox: Vec<Vec<f64>> = m.bbox().iter().map(|&(a, b)| vec![a, b]).collect();
    let report = json!({
        "meta": {
            "tool": "rieszlab",
            "version": env!("CARGO_PKG_VERSION"),
            "seed": cfg.seed,
            "threads": cfg.threads,
            "config": cfg.raw,
        },
        "measure": {
            "d": m.d(),
            "ambient": m.ambient_dim(),
            "points": m.len(),
            "mesh": m.mesh(),
            "total_mass": m.total_mass(),
            "bbox": bbox,
            "provenance": serde_json::to_value(m.provenance())?,
        },
        "lattice": lattice_json,
        "riesz": riesz_json,
        "flatness": flatness_json,
        "baup": baup_json,
        "carleson": carleson_json,
        "layers": layers_json,
    });
    Ok(PipelineOutput { report })
}

fn pick_spread(ids: &[usize], max: usize) -> Vec<usize> {
    if ids.len() <= max {
        return ids.to_vec();
    }
    (0..max).map(|i| ids[i * ids.len() / max]).collect()
}

fn measure_bounds(m: &DiscreteMeasure) -> (f64, f64, f64, f64) {
    let bbox = m.bbox();
    let (x0, x1) = bbox[0];
    let (y0, y1) = if bbox.len() > 1 { bbox[1] } else { (0.0, 1.0) };
    let pad_x = 0.05 * (x1 - x0).max(1e-6);
    let pad_y = 0.05 * (y1 - y0).max(1e-6);
    (x0 - pad_x, x1 + pad_x, y0 - pad_y, y1 + pad_y)
}

fn write_lattice_figure(out: &Path, m: &DiscreteMeasure, lat: &Lattice) -> Result<()> {
    let mut svg = Svg::new(640.0, 480.0);
    let bounds = measure_bounds(m);
    let pts: Vec<(f64, f64)> = m.points().map(|p| (p[0], if p.len() > 1 { p[1] } else { 0.0 })).collect();
    svg.scatter(&pts, bounds, 1.2, "#1f3d7a");
    if let Some(lv) = lat.level(lat.k_max) {
        let circles: Vec<(f64, f64, f64)> = lv
            .cell_ids
            .iter()
            .map(|&cid| {
                let c = lat.cell(cid);
                let p = m.point(c.center);
                (p[0], if p.len() > 1 { p[1] } else { 0.0 }, c.scale())
            })
            .collect();
        svg.circles(&circles, bounds, "#c44536");
    }
    svg.text(10.0, 16.0, "support with deepest-level cell circles");
    std::fs::write(out.join("figures/support_lattice.svg"), svg.finish())?;
    Ok(())
}

fn write_flatness_figure(out: &Path, m: &DiscreteMeasure, lat: &Lattice, rows: &[Value]) -> Result<()> {
    let mut svg = Svg::new(640.0, 480.0);
    let bounds = measure_bounds(m);
    let max_alpha = rows
        .iter()
        .filter_map(|r| r["alpha_geo"].as_f64())
        .fold(1e-12f64, f64::max);
    for r in rows {
        let cid = r["cell"].as_u64().unwrap() as usize;
        let alpha = r["alpha_geo"].as_f64().unwrap_or(0.0);
        let cell = lat.cell(cid);
        let p = m.point(cell.center);
        let t = (alpha / max_alpha).clamp(0.0, 1.0);
        let red = (255.0 * t) as u8;
        let blue = (255.0 * (1.0 - t)) as u8;
        let color = format!("#{red:02x}30{blue:02x}");
        svg.scatter(&[(p[0], if p.len() > 1 { p[1] } else { 0.0 })], bounds, 5.0, &color);
    }
    svg.text(10.0, 16.0, "geometric flatness defect per cell (blue flat, red bent)");
    std::fs::write(out.join("figures/flatness_heat.svg"), svg.finish())?;
    Ok(())
}

fn write_carleson_figure(out: &Path, ratios: &[(usize, f64)]) -> Result<()> {
    let mut svg = Svg::new(640.0, 480.0);
    let bars: Vec<(String, f64)> = ratios
        .iter()
        .take(16)
        .map(|&(id, r)| (format!("{id}"), r))
        .collect();
    svg.bars(&bars, "#1f7a3d");
    svg.text(10.0, 16.0, "largest packing ratios by cell");
    std::fs::write(out.join("figures/carleson_ratios.svg"), svg.finish())?;
    Ok(())
}

fn write_opnorm_figure(out: &Path, curve: &[Value]) -> Result<()> {
    let mut svg = Svg::new(640.0, 480.0);
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter_map(|v| Some((v["delta"].as_f64()?, v["value"].as_f64()?)))
        .collect();
    if !pts.is_empty() {
        let x1 = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let y1 = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let bounds = (0.0, x1 * 1.05, 0.0, y1 * 1.2);
        svg.polyline(&pts, bounds, "#7a1f6e");
        svg.scatter(&pts, bounds, 3.0, "#7a1f6e");
    }
    svg.text(10.0, 16.0, "operator norm vs truncation delta");
    std::fs::write(out.join("figures/opnorm_vs_delta.svg"), svg.finish())?;
    Ok(())
}

fn write_cells_table(out: &Path, m: &DiscreteMeasure, lat: &Lattice) -> Result<()> {
    let mut text = String::from("id,k,scale,center_index,members,mass\n");
    for cell in &lat.cells {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            cell.id,
            cell.k,
            cell.scale(),
            cell.center,
            cell.members.len(),
            lat.cell_mass(m, cell.id)
        );
    }
    std::fs::write(out.join("tables/cells.csv"), text)?;
    Ok(())
}

fn write_flatness_table(out: &Path, rows: &[Value]) -> Result<()> {
    let mut text = String::from("cell,k,alpha_geo,alpha_an,slack\n");
    for r in rows {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            r["cell"], r["k"], r["alpha_geo"], r["alpha_an"], r["slack"]
        );
    }
    std::fs::write(out.join("tables/flatness.csv"), text)?;
    Ok(())
}

fn write_baup_table(out: &Path, rows: &[Value]) -> Result<()> {
    let mut text = String::from("id,delta,non_baup\n");
    for r in rows {
        let _ = writeln!(text, "{},{},{}", r["id"], r["delta"], r["non_baup"]);
    }
    std::fs::write(out.join("tables/baup.csv"), text)?;
    Ok(())
}
