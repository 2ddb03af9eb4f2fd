//! Discrete approximations of d-dimensional measures in `R^(d+1)`.
//!
//! A measure is a finite weighted point cloud; its support *is* the point
//! set, so every diagnostic in the crate becomes a finite computation. All
//! scale-sensitive quantities are only trustworthy inside the window
//! `4*mesh <= l <= diam/4`, where `mesh` is the nominal spacing reported by
//! the generator.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist, dist_sq};
use crate::util::{neumaier_sum, seeded_rng};

/// How a measure was produced, kept for reporting and for reproducibility.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Hyperplane { d: usize, extent: f64, h: f64 },
    LipschitzGraph { d: usize, amplitude: f64, frequency: f64, extent: f64, h: f64 },
    Cantor { depth: usize },
    Csv { path: String },
    BlowUp { z: Vec<f64>, lambda: f64 },
    Custom { tag: String },
}

/// A weighted point cloud approximating a d-dimensional AD-regular measure
/// in `R^(d+1)`. Immutable after construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    d: usize,
    /// Flat coordinate storage, `ambient_dim()` entries per point.
    coords: Vec<f64>,
    weights: Vec<f64>,
    mesh: f64,
    provenance: Provenance,
    total_mass: f64,
}

impl DiscreteMeasure {
    pub fn new(
        d: usize,
        coords: Vec<f64>,
        weights: Vec<f64>,
        mesh: f64,
        provenance: Provenance,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("intrinsic dimension must be >= 1".into()));
        }
        let ambient = d + 1;
        if coords.len() != weights.len() * ambient {
            return Err(Error::InvalidParameter(format!(
                "coordinate count {} is not {} points x {} ambient coordinates",
                coords.len(),
                weights.len(),
                ambient
            )));
        }
        if weights.is_empty() {
            return Err(Error::InvalidParameter("measure must contain at least one point".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("all weights must be strictly positive".into()));
        }
        if !(mesh > 0.0) {
            return Err(Error::InvalidParameter("mesh must be positive".into()));
        }
        let total_mass = neumaier_sum(weights.iter().copied());
        Ok(Self { d, coords, weights, mesh, provenance, total_mass })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn ambient_dim(&self) -> usize {
        self.d + 1
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        let a = self.ambient_dim();
        &self.coords[i * a..(i + 1) * a]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.ambient_dim())
    }

    /// Flat coordinate storage, `ambient_dim()` entries per point.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Cached total mass; matches recomputation to 1e-12 relative.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Axis-aligned bounding box of the support, as (lo, hi) per coordinate.
    pub fn bbox(&self) -> Vec<(f64, f64)> {
        let a = self.ambient_dim();
        let mut lo = vec![f64::INFINITY; a];
        let mut hi = vec![f64::NEG_INFINITY; a];
        for p in self.points() {
            for i in 0..a {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        lo.into_iter().zip(hi).collect()
    }

    /// Diameter of the bounding box (an upper bound for the support diameter
    /// within a factor sqrt(d+1), exact enough for scale-window checks).
    pub fn diameter(&self) -> f64 {
        self.bbox()
            .iter()
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }

    /// The region where the finite sample faithfully represents the ideal
    /// (typically unbounded) measure it approximates. Along axes where the
    /// support has genuine extent the window is clamped to the bounding box
    /// (beyond it the sample says nothing); along essentially degenerate axes
    /// (extent < 4*mesh) the ideal support is known to be thin, so emptiness
    /// off-axis is certifiable and the window is unbounded.
    pub fn faithful_window(&self) -> Vec<Option<(f64, f64)>> {
        self.bbox()
            .into_iter()
            .map(|(lo, hi)| {
                if hi - lo < 4.0 * self.mesh {
                    None
                } else {
                    Some((lo, hi))
                }
            })
            .collect()
    }

    /// True when the ball `B(x, r)` lies inside the faithful window.
    pub fn ball_in_window(&self, x: &[f64], r: f64) -> bool {
        self.faithful_window()
            .iter()
            .enumerate()
            .all(|(i, w)| match w {
                None => true,
                Some((lo, hi)) => x[i] - r >= *lo - 1e-12 && x[i] + r <= *hi + 1e-12,
            })
    }

    /// Mass of the open ball `B(x, r)`: points at exactly distance `r` are
    /// excluded so counts stay reproducible.
    pub fn ball_mass(&self, x: &[f64], r: f64) -> f64 {
        assert!(r > 0.0, "ball radius must be positive");
        let r2 = r * r;
        neumaier_sum(
            (0..self.len())
                .filter(|&i| dist_sq(self.point(i), x) < r2)
                .map(|i| self.weights[i]),
        )
    }

    /// Blow-up at `z` with scale `lambda`: points map to `(p - z)/lambda`,
    /// weights scale by `lambda^(-d)`, mesh by `1/lambda`.
    pub fn blow_up(&self, z: &[f64], lambda: f64) -> Result<DiscreteMeasure> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter("blow-up scale must be positive".into()));
        }
        let a = self.ambient_dim();
        let mut coords = Vec::with_capacity(self.coords.len());
        for p in self.points() {
            for i in 0..a {
                coords.push((p[i] - z[i]) / lambda);
            }
        }
        let wscale = lambda.powi(-(self.d as i32));
        let weights = self.weights.iter().map(|w| w * wscale).collect();
        DiscreteMeasure::new(
            self.d,
            coords,
            weights,
            self.mesh / lambda,
            Provenance::BlowUp { z: z.to_vec(), lambda },
        )
    }

    /// Restriction to the points inside the closed box `[lo, hi]` per axis
    /// (used e.g. to compare a blow-up against a reference construction).
    pub fn restrict_to_box(&self, lo: &[f64], hi: &[f64]) -> Result<DiscreteMeasure> {
        let a = self.ambient_dim();
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for i in 0..self.len() {
            let p = self.point(i);
            if (0..a).all(|c| p[c] >= lo[c] - 1e-12 && p[c] <= hi[c] + 1e-12) {
                coords.extend_from_slice(p);
                weights.push(self.weights[i]);
            }
        }
        DiscreteMeasure::new(self.d, coords, weights, self.mesh, self.provenance.clone())
    }

    /// AD-regularity scan: over `n_samples` seeded pairs of a support point
    /// and a log-uniform radius in `[r_min, r_max]`, the extremes of
    /// `ball_mass / r^d`. Only pairs whose ball lies in the faithful window
    /// are counted, so truncation edges do not masquerade as irregularity.
    pub fn ad_regularity(
        &self,
        r_min: f64,
        r_max: f64,
        n_samples: usize,
        seed: u64,
    ) -> Result<RegularityEstimate> {
        if r_min < 4.0 * self.mesh {
            return Err(Error::InvalidParameter(format!(
                "r_min = {r_min} is below 4*mesh = {}; discretization dominates",
                4.0 * self.mesh
            )));
        }
        let diam = self.diameter();
        if diam > 0.0 && r_max > diam {
            return Err(Error::InvalidParameter(format!(
                "r_max = {r_max} exceeds the support diameter {diam}"
            )));
        }
        if !(r_min < r_max) {
            return Err(Error::InvalidParameter("need r_min < r_max".into()));
        }
        let mut rng = seeded_rng(seed);
        let mut c_low = f64::INFINITY;
        let mut c_high = f64::NEG_INFINITY;
        let mut accepted = 0usize;
        let log_lo = r_min.ln();
        let log_hi = r_max.ln();
        let max_draws = n_samples.saturating_mul(20).max(64);
        for _ in 0..max_draws {
            if accepted >= n_samples {
                break;
            }
            let idx = rng.gen_range(0..self.len());
            let r = (log_lo + (log_hi - log_lo) * rng.gen::<f64>()).exp();
            let x = self.point(idx).to_vec();
            if !self.ball_in_window(&x, r) {
                continue;
            }
            let ratio = self.ball_mass(&x, r) / r.powi(self.d as i32);
            c_low = c_low.min(ratio);
            c_high = c_high.max(ratio);
            accepted += 1;
        }
        if accepted == 0 {
            return Err(Error::DegenerateInput(
                "no admissible (x, r) sample fits the faithful window".into(),
            ));
        }
        Ok(RegularityEstimate {
            c_low,
            c_high,
            samples: accepted,
            r_range: (r_min, r_max),
        })
    }

    /// Writes the point cloud as CSV `x0,...,xd,w`.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let a = self.ambient_dim();
        for i in 0..a {
            let _ = write!(out, "x{i},");
        }
        out.push_str("w\n");
        for i in 0..self.len() {
            for c in self.point(i) {
                let _ = write!(out, "{c},");
            }
            let _ = writeln!(out, "{}", self.weights[i]);
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Loads a point cloud from CSV `x0,...,xd,w`. The intrinsic dimension is
    /// taken from the header (column count must equal d+2); the mesh is the
    /// smallest nearest-neighbor distance in the cloud.
    pub fn load_csv(path: &Path) -> Result<DiscreteMeasure> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty point-cloud file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 3 || cols.last() != Some(&"w") {
            return Err(Error::Parse(format!(
                "expected header x0,...,xd,w; got `{header}`"
            )));
        }
        let ambient = cols.len() - 1;
        let d = ambient - 1;
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != ambient + 1 {
                return Err(Error::Parse(format!(
                    "row {}: expected {} columns, got {}",
                    ln + 2,
                    ambient + 1,
                    fields.len()
                )));
            }
            for f in &fields[..ambient] {
                coords.push(
                    f.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("row {}: {e}", ln + 2)))?,
                );
            }
            weights.push(
                fields[ambient]
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", ln + 2)))?,
            );
        }
        let n = weights.len();
        if n == 0 {
            return Err(Error::Parse("point-cloud file has no rows".into()));
        }
        // nearest-neighbor spacing as the nominal mesh
        let mut mesh = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                let dij = dist(&coords[i * ambient..(i + 1) * ambient], &coords[j * ambient..(j + 1) * ambient]);
                if dij > 0.0 {
                    mesh = mesh.min(dij);
                }
            }
        }
        if !mesh.is_finite() {
            mesh = 1.0;
        }
        DiscreteMeasure::new(
            d,
            coords,
            weights,
            mesh,
            Provenance::Csv { path: path.display().to_string() },
        )
    }
}

/// Extremes of `ball_mass(x, r)/r^d` over a seeded probe set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegularityEstimate {
    pub c_low: f64,
    pub c_high: f64,
    pub samples: usize,
    pub r_range: (f64, f64),
}

impl RegularityEstimate {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_low > 0.0 && self.c_low <= self.c_high) {
            return Err(Error::InvariantViolation(format!(
                "regularity estimate must satisfy 0 < c_low <= C_high (got {} , {})",
                self.c_low, self.c_high
            )));
        }
        Ok(())
    }
}

/// Regular grid on `[-extent, extent]^d x {0}` with weight `h^d` per point.
pub fn gen_hyperplane(d: usize, extent: f64, h: f64) -> Result<DiscreteMeasure> {
    if !(extent > 0.0) || !(h > 0.0) || h > extent {
        return Err(Error::InvalidParameter(format!(
            "need 0 < h <= extent (got extent = {extent}, h = {h})"
        )));
    }
    let per_axis = ((2.0 * extent / h).round() as usize) + 1;
    let n = per_axis.pow(d as u32);
    if n > 20_000_000 {
        return Err(Error::ResourceLimit(format!("{n} grid points")));
    }
    let ambient = d + 1;
    let mut coords = Vec::with_capacity(n * ambient);
    let w = h.powi(d as i32);
    let mut idx = vec![0usize; d];
    loop {
        for &k in idx.iter() {
            coords.push(-extent + k as f64 * h);
        }
        coords.push(0.0);
        // odometer increment
        let mut axis = 0;
        loop {
            if axis == d {
                let weights = vec![w; coords.len() / ambient];
                return DiscreteMeasure::new(
                    d,
                    coords,
                    weights,
                    h,
                    Provenance::Hyperplane { d, extent, h },
                );
            }
            idx[axis] += 1;
            if idx[axis] < per_axis {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

/// Graph of `u -> amplitude * sin(frequency * u_1)` over the same grid as
/// `gen_hyperplane`, with the surface-element factor in the weights.
pub fn gen_lipschitz_graph(
    d: usize,
    amplitude: f64,
    frequency: f64,
    extent: f64,
    h: f64,
) -> Result<DiscreteMeasure> {
    if amplitude < 0.0 {
        return Err(Error::InvalidParameter("amplitude must be nonnegative".into()));
    }
    let flat = gen_hyperplane(d, extent, h)?;
    let ambient = d + 1;
    let mut coords = flat.coords.clone();
    let mut weights = Vec::with_capacity(flat.len());
    for i in 0..flat.len() {
        let u1 = coords[i * ambient];
        let slope = amplitude * frequency * (frequency * u1).cos();
        coords[i * ambient + d] = amplitude * (frequency * u1).sin();
        weights.push(h.powi(d as i32) * (1.0 + slope * slope).sqrt());
    }
    DiscreteMeasure::new(
        d,
        coords,
        weights,
        h,
        Provenance::LipschitzGraph { d, amplitude, frequency, extent, h },
    )
}

/// Four-corner Cantor set in `R^2` (intrinsic dimension 1): cell centers of
/// the standard construction at scale `4^(-depth)`, each of weight
/// `4^(-depth)`, total mass 1.
pub fn gen_cantor(depth: usize) -> Result<DiscreteMeasure> {
    if depth > 12 {
        return Err(Error::ResourceLimit(format!(
            "cantor depth {depth} would generate 4^{depth} points"
        )));
    }
    let n = 4usize.pow(depth as u32);
    let mut coords = Vec::with_capacity(n * 2);
    let scale = 0.25f64.powi(depth as i32);
    // iterate all corner choices; level j chooses one of 4 corners at scale 4^-(j+1)
    for code in 0..n {
        let mut x = 0.0;
        let mut y = 0.0;
        let mut c = code;
        let mut s = 1.0;
        for _ in 0..depth {
            s *= 0.25;
            let corner = c & 3;
            c >>= 2;
            if corner & 1 == 1 {
                x += 3.0 * s;
            }
            if corner & 2 == 2 {
                y += 3.0 * s;
            }
        }
        coords.push(x + scale / 2.0);
        coords.push(y + scale / 2.0);
    }
    let weights = vec![scale; n];
    DiscreteMeasure::new(1, coords, weights, scale, Provenance::Cantor { depth })
}
