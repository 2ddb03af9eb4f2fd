//! Flat key=value configuration with CLI-flag overrides (flags win).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

pub const STAGES: [&str; 5] = ["lattice", "riesz", "flatness", "baup", "carleson"];

#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    Plane { d: usize, extent: f64, h: f64 },
    Graph { d: usize, amplitude: f64, frequency: f64, extent: f64, h: f64 },
    Cantor { depth: usize },
    Csv { path: PathBuf },
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub generator: Generator,
    pub stages: Vec<String>,
    pub delta: f64,
    pub a_factor: f64,
    pub alpha: f64,
    pub eps: f64,
    pub k_min: Option<i32>,
    pub k_max: Option<i32>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub tree_theta: f64,
    pub tree_order: String,
    pub out: PathBuf,
    /// The raw key=value map after merging, echoed into the report for
    /// reproducibility.
    pub raw: BTreeMap<String, String>,
}

/// Parses a flat `key=value` file (comments start with '#').
pub fn parse_kv_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key=value, got `{line}`", ln + 1);
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

pub fn parse_kv_args(args: &[String]) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for a in args {
        let Some((k, v)) = a.split_once('=') else {
            bail!("expected key=value argument, got `{a}`");
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn get_f64(map: &BTreeMap<String, String>, key: &str, default: f64) -> Result<f64> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v.parse().with_context(|| format!("{key} = `{v}` is not a number")),
    }
}

fn get_usize(map: &BTreeMap<String, String>, key: &str, default: usize) -> Result<usize> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v.parse().with_context(|| format!("{key} = `{v}` is not an integer")),
    }
}

impl RunConfig {
    /// Builds a config from the merged key=value map.
    pub fn from_map(map: BTreeMap<String, String>) -> Result<RunConfig> {
        let generator = match map.get("gen").map(String::as_str) {
            Some("plane") => Generator::Plane {
                d: get_usize(&map, "d", 1)?,
                extent: get_f64(&map, "extent", 1.0)?,
                h: get_f64(&map, "h", 0.01)?,
            },
            Some("graph") => Generator::Graph {
                d: get_usize(&map, "d", 1)?,
                amplitude: get_f64(&map, "amplitude", 0.05)?,
                frequency: get_f64(&map, "frequency", 1.0)?,
                extent: get_f64(&map, "extent", 1.0)?,
                h: get_f64(&map, "h", 0.01)?,
            },
            Some("cantor") => Generator::Cantor { depth: get_usize(&map, "depth", 4)? },
            Some(other) => bail!("unknown generator `{other}` (expected plane, graph or cantor)"),
            None => match map.get("input") {
                Some(p) => Generator::Csv { path: PathBuf::from(p) },
                None => bail!("config needs either gen=<plane|graph|cantor> or input=<csv>"),
            },
        };
        let stages: Vec<String> = map
            .get("stages")
            .map(|s| s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect())
            .unwrap_or_else(|| vec!["lattice".to_string()]);
        let tree_order = map.get("tree-order").cloned().unwrap_or_else(|| "dipole".into());
        let cfg = RunConfig {
            generator,
            stages,
            delta: get_f64(&map, "delta", 0.1)?,
            a_factor: get_f64(&map, "A", 6.0)?,
            alpha: get_f64(&map, "alpha", 0.1)?,
            eps: get_f64(&map, "eps", 1.0 / 48.0)?,
            k_min: map.get("kmin").map(|v| v.parse()).transpose().context("kmin")?,
            k_max: map.get("kmax").map(|v| v.parse()).transpose().context("kmax")?,
            seed: map.get("seed").map(|v| v.parse()).transpose().context("seed")?.unwrap_or(0),
            threads: map.get("threads").map(|v| v.parse()).transpose().context("threads")?,
            tree_theta: get_f64(&map, "tree-theta", 0.2)?,
            tree_order,
            out: PathBuf::from(map.get("out").cloned().unwrap_or_else(|| "rieszlab-out".into())),
            raw: map,
        };
        Ok(cfg)
    }

    /// Dry-run diagnostics: parameter ranges, stage ordering, scale windows.
    /// Returns human-readable complaints; an empty list means the plan is
    /// executable.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        for s in &self.stages {
            if !STAGES.contains(&s.as_str()) {
                out.push(format!("unknown stage `{s}`"));
            }
        }
        for dep in ["flatness", "baup", "carleson"] {
            if self.stages.iter().any(|s| s == dep)
                && !self.stages.iter().any(|s| s == "lattice")
            {
                out.push(format!("stage `{dep}` requires `lattice` in the stage list"));
            }
        }
        if let (Some(pos_l), Some(pos_d)) = (
            self.stages.iter().position(|s| s == "lattice"),
            self.stages
                .iter()
                .position(|s| s == "flatness" || s == "baup" || s == "carleson"),
        ) {
            if pos_l > pos_d {
                out.push("`lattice` must come before flatness/baup/carleson".into());
            }
        }
        if self.eps > 1.0 / 48.0 || self.eps <= 0.0 {
            out.push(format!(
                "eps = {} is outside (0, 1/48]; the cell cutoff construction requires eps <= 1/48",
                self.eps
            ));
        }
        if self.a_factor <= 5.0 {
            out.push(format!(
                "A = {} is too small; the flatness window requires A > 5",
                self.a_factor
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            out.push(format!("delta = {} should lie in (0, 1)", self.delta));
        }
        if !(self.tree_theta > 0.0 && self.tree_theta <= 1.0) {
            out.push(format!("tree-theta = {} should lie in (0, 1]", self.tree_theta));
        }
        if self.tree_order != "monopole" && self.tree_order != "dipole" {
            out.push(format!("tree-order = `{}` (expected monopole or dipole)", self.tree_order));
        }
        if let (Some(a), Some(b)) = (self.k_min, self.k_max) {
            if a > b {
                out.push(format!("kmin = {a} exceeds kmax = {b}"));
            }
        }
        // scale windows need the measure; generate it cheaply when possible
        match self.build_measure() {
            Ok(m) => {
                if let Some(k_max) = self.k_max {
                    let l = rieszlab::lattice::scale(k_max);
                    if l < 4.0 * m.mesh() {
                        out.push(format!(
                            "kmax = {k_max} has scale {l} below 4*mesh = {}; the window \
                             4*mesh <= l is required",
                            4.0 * m.mesh()
                        ));
                    }
                }
                if self.delta * rieszlab::lattice::scale(self.k_max.unwrap_or(0)) < 4.0 * m.mesh()
                    && self.stages.iter().any(|s| s == "baup")
                {
                    out.push(format!(
                        "delta = {} leaves no admissible level for the non-BAUP test (needs \
                         delta * l(P) >= 4*mesh = {})",
                        self.delta,
                        4.0 * m.mesh()
                    ));
                }
            }
            Err(e) => out.push(format!("measure cannot be built: {e}")),
        }
        out
    }

    pub fn build_measure(&self) -> Result<rieszlab::measure::DiscreteMeasure> {
        use rieszlab::measure::*;
        let m = match &self.generator {
            Generator::Plane { d, extent, h } => gen_hyperplane(*d, *extent, *h)?,
            Generator::Graph { d, amplitude, frequency, extent, h } => {
                gen_lipschitz_graph(*d, *amplitude, *frequency, *extent, *h)?
            }
            Generator::Cantor { depth } => gen_cantor(*depth)?,
            Generator::Csv { path } => {
                if !path.exists() {
                    bail!("input file {} does not exist", path.display());
                }
                DiscreteMeasure::load_csv(path)?
            }
        };
        Ok(m)
    }

    /// Default lattice depth: from `kmin`/`kmax` if given, otherwise from 0
    /// down to the deepest level the mesh supports.
    pub fn lattice_range(&self, m: &rieszlab::measure::DiscreteMeasure) -> (i32, i32) {
        let k_min = self.k_min.unwrap_or(0);
        let k_max = self.k_max.unwrap_or_else(|| {
            let mut k = k_min;
            while rieszlab::lattice::scale(k + 1) >= 4.0 * m.mesh() {
                k += 1;
            }
            k
        });
        (k_min, k_max)
    }
}
