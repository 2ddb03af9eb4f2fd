//! Flatness diagnostics: how close a measure is, near a point and scale, to
//! a multiple of Lebesgue measure on a hyperplane.
//!
//! Two defects are measured inside the window `B(z, A*l)` with `A > 5`:
//! the geometric one (two-sided deviation between the support and the plane
//! through `z`, in units of `l`) and the analytic one (the largest value of
//! `integral f dmu` over Lipschitz test functions `f` supported in the
//! window with `|f|_Lip <= 1/l` and plane mean zero, in units of `l^d`).
//! The analytic side is a finite linear program over function values at the
//! support points and a plane quadrature grid; its Lipschitz constraints use
//! a sparse neighbor graph validated post hoc, so the reported `slack` says
//! how far the returned optimum is from a certified-feasible one.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{axpy, dist, norm, sub, sym_eigen, Hyperplane};
use crate::lattice::LatticeQuery;
use crate::measure::DiscreteMeasure;
use crate::spatial::KdTree;
use crate::util::{neumaier_sum, seeded_rng, Accumulator};

/// Point, scale and window for a flatness test. `a_factor` is the window
/// multiplier A; the lemmas this feeds assume `A > 5`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlatnessQuery {
    pub z: Vec<f64>,
    pub l: f64,
    pub a_factor: f64,
    pub plane: Option<Hyperplane>,
}

impl FlatnessQuery {
    pub fn new(z: Vec<f64>, l: f64, a_factor: f64, plane: Option<Hyperplane>) -> Result<Self> {
        if !(l > 0.0) {
            return Err(Error::InvalidParameter("scale l must be positive".into()));
        }
        if !(a_factor > 5.0) {
            return Err(Error::InvalidParameter(format!(
                "window factor A must exceed 5 (got {a_factor})"
            )));
        }
        Ok(Self { z, l, a_factor, plane })
    }

    fn validated_scale(&self, m: &DiscreteMeasure) -> Result<()> {
        if self.l < 4.0 * m.mesh() {
            return Err(Error::ScaleWindow(format!(
                "scale l = {} below 4*mesh = {}",
                self.l,
                4.0 * m.mesh()
            )));
        }
        Ok(())
    }
}

/// Output of the flatness tests on one (z, l) window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub alpha_geo: f64,
    pub alpha_an: f64,
    pub plane: Hyperplane,
    /// Support point realizing the geometric deviation, if any.
    pub witness_point: Option<Vec<f64>>,
    pub lp_size: (usize, usize),
    pub slack: f64,
}

/// Geometric defect: the smallest `alpha` such that every support point in
/// `B(z, A*l)` is within `alpha*l` of the plane through `z` and every plane
/// point of the window (up to grid resolution <= mesh) is within `alpha*l`
/// of the support. Plane grid probes outside the measure's faithful window
/// are skipped; beyond it the sample cannot certify emptiness.
pub fn geometric_defect(m: &DiscreteMeasure, query: &FlatnessQuery) -> Result<f64> {
    Ok(geometric_defect_witnessed(m, query)?.0)
}

pub fn geometric_defect_witnessed(
    m: &DiscreteMeasure,
    query: &FlatnessQuery,
) -> Result<(f64, Option<Vec<f64>>)> {
    let plane = query
        .plane
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("geometric_defect needs a plane".into()))?;
    query.validated_scale(m)?;
    let window = query.a_factor * query.l;
    let plane_z = plane.through(&query.z);

    let mut sup_to_plane = 0.0f64;
    let mut witness: Option<Vec<f64>> = None;
    let mut any = false;
    for i in 0..m.len() {
        let p = m.point(i);
        if dist(p, &query.z) < window {
            any = true;
            let d = plane_z.signed_distance(p).abs();
            if d > sup_to_plane {
                sup_to_plane = d;
                witness = Some(p.to_vec());
            }
        }
    }
    if !any {
        return Err(Error::Domain("no support points in the flatness window".into()));
    }

    let tree = KdTree::from_measure(m);
    let step = m.mesh().min(query.l / 4.0);
    let mut plane_to_supp = 0.0f64;
    for_each_plane_grid_point(&plane_z, &query.z, window, step, |u| {
        if !m.ball_in_window(u, 0.0) {
            return;
        }
        let (_, d) = tree.nearest(u);
        if d > plane_to_supp {
            plane_to_supp = d;
        }
    });

    Ok((sup_to_plane.max(plane_to_supp) / query.l, witness))
}

/// Iterates a d-dimensional grid of the given step on `plane` inside the
/// open ball `B(center, radius)`.
fn for_each_plane_grid_point<F: FnMut(&[f64])>(
    plane: &Hyperplane,
    center: &[f64],
    radius: f64,
    step: f64,
    mut visit: F,
) {
    let basis = plane.tangent_basis();
    let d = basis.len();
    let reach = (radius / step).floor() as i64;
    let mut idx = vec![-reach; d];
    let mut u = vec![0.0; center.len()];
    loop {
        u.copy_from_slice(center);
        for (t, &n) in basis.iter().zip(idx.iter()) {
            axpy(&mut u, n as f64 * step, t);
        }
        if dist(&u, center) < radius {
            visit(&u);
        }
        let mut axis = 0;
        loop {
            if axis == d {
                return;
            }
            idx[axis] += 1;
            if idx[axis] <= reach {
                break;
            }
            idx[axis] = -reach;
            axis += 1;
        }
    }
}

/// Best-fit plane through `z` at scale `l`: initialized from the least
/// variance axis of the second moment of the windowed measure, then refined
/// by a monotone descent over normal rotations in steps of pi/64.
pub fn best_plane(m: &DiscreteMeasure, z: &[f64], l: f64, a_factor: f64) -> Result<(Hyperplane, f64)> {
    let ambient = m.ambient_dim();
    let window = a_factor * l;
    let in_ball: Vec<usize> = (0..m.len())
        .filter(|&i| dist(m.point(i), z) < window)
        .collect();
    if in_ball.len() < ambient {
        return Err(Error::DegenerateInput(format!(
            "{} support points in the window; need at least {ambient} to fit a plane",
            in_ball.len()
        )));
    }
    // weighted second moment about the weighted centroid
    let total_w = neumaier_sum(in_ball.iter().map(|&i| m.weight(i)));
    let mut centroid = vec![0.0; ambient];
    for &i in &in_ball {
        axpy(&mut centroid, m.weight(i) / total_w, m.point(i));
    }
    let mut moment = vec![vec![0.0; ambient]; ambient];
    for &i in &in_ball {
        let u = sub(m.point(i), &centroid);
        let w = m.weight(i);
        for a in 0..ambient {
            for b in 0..ambient {
                moment[a][b] += w * u[a] * u[b];
            }
        }
    }
    let (_, vecs) = sym_eigen(&moment);
    let mut normal = vecs[0].clone();
    let nn = norm(&normal);
    normal.iter_mut().for_each(|x| *x /= nn);

    let defect_of = |n: &[f64]| -> Result<f64> {
        let plane = Hyperplane::new(n.to_vec(), z.to_vec())?;
        let q = FlatnessQuery::new(z.to_vec(), l, a_factor, Some(plane))?;
        geometric_defect(m, &q)
    };

    let mut best = defect_of(&normal)?;
    // the defect over directions can have several local minima (oscillating
    // graphs); in the plane the pi/64 grid is cheap, so scan it globally
    if ambient == 2 {
        for k in 0..64 {
            let a = k as f64 * std::f64::consts::PI / 64.0;
            let cand = vec![a.cos(), a.sin()];
            let d = defect_of(&cand)?;
            if d < best {
                best = d;
                normal = cand;
            }
        }
    }
    // monotone descent, step pi/64 halved down to pi/512
    let mut step = std::f64::consts::PI / 64.0;
    while step >= std::f64::consts::PI / 512.0 - 1e-15 {
        let (sin_s, cos_s) = step.sin_cos();
        for _ in 0..128 {
            let plane = Hyperplane::new(normal.clone(), z.to_vec())?;
            let tangents = plane.tangent_basis();
            let mut improved = false;
            for t in &tangents {
                for sign in [1.0, -1.0] {
                    let mut cand: Vec<f64> = normal
                        .iter()
                        .zip(t)
                        .map(|(n, ti)| cos_s * n + sign * sin_s * ti)
                        .collect();
                    let cn = norm(&cand);
                    cand.iter_mut().for_each(|x| *x /= cn);
                    let d = defect_of(&cand)?;
                    if d < best {
                        best = d;
                        normal = cand;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        step /= 2.0;
    }
    Ok((Hyperplane::new(normal, z.to_vec())?, best))
}

/// The analytic-flatness linear program's result.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalyticDefect {
    /// Optimum divided by `l^d`, deflated by the post-hoc violation factor.
    pub value: f64,
    /// (variables, Lipschitz constraint pairs).
    pub lp_size: (usize, usize),
    /// Post-hoc Lipschitz violation of the sparse solution: 0 means the
    /// validation subsample found the returned function fully feasible.
    pub slack: f64,
}

const LIP_NEIGHBORS: usize = 12;
const LIP_RANDOM_PAIR_FACTOR: usize = 3;

/// Analytic defect at `(z, l)` for the supplied plane: maximizes
/// `sum_supp f w` over node values `f` subject to sparse Lipschitz
/// constraints `|f(p) - f(q)| <= |p - q|/l`, boundary caps
/// `|f(p)| <= dist(p, boundary of window)/l`, and plane-grid mean zero.
pub fn analytic_defect(
    m: &DiscreteMeasure,
    query: &FlatnessQuery,
    seed: u64,
) -> Result<AnalyticDefect> {
    let plane = query
        .plane
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("analytic_defect needs a plane".into()))?;
    query.validated_scale(m)?;
    let ambient = m.ambient_dim();
    let d = m.d();
    let window = query.a_factor * query.l;
    let plane_z = plane.through(&query.z);

    // nodes: support points in the window, then plane grid nodes. A grid
    // node landing on a support point (common when the support is the
    // plane) is merged into it, transferring its quadrature mass; keeping
    // both would create near-duplicate variables whose roundoff-level
    // differences poison the post-hoc Lipschitz validation.
    let mut coords: Vec<f64> = Vec::new();
    let mut supp_weight: Vec<f64> = Vec::new();
    for i in 0..m.len() {
        let p = m.point(i);
        if dist(p, &query.z) < window {
            coords.extend_from_slice(p);
            supp_weight.push(m.weight(i));
        }
    }
    let n_supp = supp_weight.len();
    if n_supp == 0 {
        return Err(Error::Domain("no support points in the flatness window".into()));
    }
    let step = m.mesh();
    let merge_tol = 1e-9 * step;
    let supp_tree = KdTree::new(&coords, ambient);
    let mut grid_nodes: Vec<f64> = Vec::new();
    // quadrature coefficient per node (support nodes can pick up merged
    // grid mass; plain grid nodes carry exactly one cell)
    let mut quad_mass: Vec<f64> = vec![0.0; n_supp];
    let cell_mass = step.powi(d as i32);
    for_each_plane_grid_point(&plane_z, &query.z, window, step, |u| {
        let (idx, dd) = supp_tree.nearest(u);
        if dd <= merge_tol {
            quad_mass[idx] += cell_mass;
        } else {
            grid_nodes.extend_from_slice(u);
            quad_mass.push(cell_mass);
        }
    });
    coords.extend_from_slice(&grid_nodes);
    let n_nodes = coords.len() / ambient;

    // sparse Lipschitz constraint graph: kNN plus seeded long-range pairs
    let tree = KdTree::new(&coords, ambient);
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..n_nodes {
        let p = &coords[i * ambient..(i + 1) * ambient];
        let mut found: Vec<(f64, usize)> = Vec::new();
        // collect a neighborhood by expanding the radius until enough points
        let mut r = 2.0 * step;
        while found.len() < LIP_NEIGHBORS + 1 && r < 4.0 * window {
            found.clear();
            tree.for_each_in_ball(p, r, |j, dj| found.push((dj, j)));
            r *= 2.0;
        }
        found.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, j) in found.iter().take(LIP_NEIGHBORS + 1) {
            if j != i {
                pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    let mut rng = seeded_rng(seed);
    for _ in 0..LIP_RANDOM_PAIR_FACTOR * n_nodes {
        let a = rng.gen_range(0..n_nodes);
        let b = rng.gen_range(0..n_nodes);
        if a != b {
            pairs.push((a.min(b), a.max(b)));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();

    // assemble and solve
    use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<minilp::Variable> = (0..n_nodes)
        .map(|i| {
            let p = &coords[i * ambient..(i + 1) * ambient];
            let cap = (window - dist(p, &query.z)).max(0.0) / query.l;
            let objective = if i < n_supp { supp_weight[i] } else { 0.0 };
            problem.add_var(objective, (-cap, cap))
        })
        .collect();
    for &(a, b) in &pairs {
        let pa = &coords[a * ambient..(a + 1) * ambient];
        let pb = &coords[b * ambient..(b + 1) * ambient];
        let bound = dist(pa, pb) / query.l;
        let mut e1 = LinearExpr::empty();
        e1.add(vars[a], 1.0);
        e1.add(vars[b], -1.0);
        problem.add_constraint(e1, ComparisonOp::Le, bound);
        let mut e2 = LinearExpr::empty();
        e2.add(vars[b], 1.0);
        e2.add(vars[a], -1.0);
        problem.add_constraint(e2, ComparisonOp::Le, bound);
    }
    let mut mean_zero = LinearExpr::empty();
    let mut any_mass = false;
    for (i, &mass) in quad_mass.iter().enumerate() {
        if mass > 0.0 {
            mean_zero.add(vars[i], mass);
            any_mass = true;
        }
    }
    if any_mass {
        problem.add_constraint(mean_zero, ComparisonOp::Eq, 0.0);
    }
    let solution = problem.solve().map_err(|e| match e {
        minilp::Error::Infeasible => {
            Error::Internal("analytic flatness LP infeasible although f = 0 is feasible".into())
        }
        minilp::Error::Unbounded => {
            Error::Internal("analytic flatness LP unbounded: constraint graph bug".into())
        }
    })?;
    // f = 0 is feasible, so the true optimum is nonnegative; clamp the
    // solver's rounding noise
    let optimum = solution.objective().max(0.0);

    // post-hoc validation against full pairwise constraints on a subsample
    let f_vals: Vec<f64> = vars.iter().map(|&v| solution[v]).collect();
    let mut sample: Vec<usize> = (0..n_nodes).collect();
    for i in (1..sample.len()).rev() {
        sample.swap(i, rng.gen_range(0..=i));
    }
    sample.truncate(64);
    // pairs below the coordinate resolution carry no Lipschitz information
    let d_floor = 1e-6 * step;
    let mut violation = 1.0f64;
    for (ai, &a) in sample.iter().enumerate() {
        for &b in sample.iter().skip(ai + 1) {
            let pa = &coords[a * ambient..(a + 1) * ambient];
            let pb = &coords[b * ambient..(b + 1) * ambient];
            let dd = dist(pa, pb);
            if dd > d_floor {
                violation = violation.max((f_vals[a] - f_vals[b]).abs() * query.l / dd);
            }
        }
    }

    Ok(AnalyticDefect {
        value: optimum / query.l.powi(d as i32) / violation,
        lp_size: (n_nodes, pairs.len()),
        slack: violation - 1.0,
    })
}

/// Full flatness report for one window: geometric and analytic defects for
/// the supplied plane (or the best-fit plane when none is given).
pub fn flatness_report(m: &DiscreteMeasure, query: &FlatnessQuery, seed: u64) -> Result<FlatnessReport> {
    let plane = match &query.plane {
        Some(p) => p.clone(),
        None => best_plane(m, &query.z, query.l, query.a_factor)?.0,
    };
    let q = FlatnessQuery {
        z: query.z.clone(),
        l: query.l,
        a_factor: query.a_factor,
        plane: Some(plane.clone()),
    };
    let (alpha_geo, witness_point) = geometric_defect_witnessed(m, &q)?;
    let an = analytic_defect(m, &q, seed)?;
    Ok(FlatnessReport {
        alpha_geo,
        alpha_an: an.value,
        plane,
        witness_point,
        lp_size: an.lp_size,
        slack: an.slack,
    })
}

/// The mollified cell cutoff and its plane approximation `nu_Q`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellApprox {
    pub cell: usize,
    pub plane: Hyperplane,
    /// Plane grid nodes carrying the cutoff, flat coordinates.
    pub grid_points: Vec<f64>,
    /// Cutoff values at the grid nodes (in (0, 1]).
    pub phi_grid: Vec<f64>,
    /// Quadrature weight per grid node (step^d).
    pub grid_step_mass: f64,
    /// Normalization such that `nu_Q` and `integral phi dmu` match.
    pub a_q: f64,
    pub eps: f64,
    /// `integral phi dmu` over the support.
    pub mu_phi_mass: f64,
}

impl CellApprox {
    /// Total mass of `nu_Q = a_Q phi m_L`.
    pub fn nu_mass(&self) -> f64 {
        self.a_q * self.grid_step_mass * neumaier_sum(self.phi_grid.iter().copied())
    }
}

/// Cosine smoothstep on [0, 1].
fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        0.5 * (1.0 - (std::f64::consts::PI * t).cos())
    }
}

/// Builds the mollified cutoff `phi_Q` (1 on the 3-eps core, 0 outside the
/// eps core) and the plane measure `nu_Q = a_Q phi_Q m_L(Q)` sampled on a
/// grid of step `min(mesh, eps*l/4)`. The plane is the best fit at
/// `(z_Q, l(Q))` with window factor 6.
pub fn cell_approx(query: &LatticeQuery, cell_id: usize, eps: f64) -> Result<CellApprox> {
    if !(eps > 0.0 && eps <= 1.0 / 48.0) {
        return Err(Error::InvalidParameter(format!(
            "cutoff margin eps must lie in (0, 1/48] (got {eps})"
        )));
    }
    let m = query.measure;
    let cell = query.lattice.cell(cell_id);
    let l = cell.scale();
    let z = m.point(cell.center).to_vec();
    let (plane, _) = best_plane(m, &z, l, 6.0)?;

    let member_flags: Vec<bool> = {
        let mut flags = vec![false; m.len()];
        for &i in &cell.members {
            flags[i] = true;
        }
        flags
    };
    let tree = KdTree::from_measure(m);
    let complement_distance = |x: &[f64]| -> f64 {
        let member_d = tree
            .nearest_filtered(x, |i| member_flags[i])
            .map(|(_, dd)| dd)
            .unwrap_or(f64::INFINITY);
        let foreign_d = tree
            .nearest_filtered(x, |i| !member_flags[i])
            .map(|(_, dd)| dd)
            .unwrap_or(f64::INFINITY);
        (l - member_d).min(foreign_d).max(0.0)
    };
    let phi = |x: &[f64]| -> f64 { smoothstep((complement_distance(x) - eps * l) / (2.0 * eps * l)) };

    let step = m.mesh().min(eps * l / 4.0);
    let mut grid_points = Vec::new();
    let mut phi_grid = Vec::new();
    for_each_plane_grid_point(&plane, &z, 4.0 * l, step, |u| {
        let v = phi(u);
        if v > 0.0 {
            grid_points.extend_from_slice(u);
            phi_grid.push(v);
        }
    });
    if phi_grid.is_empty() {
        return Err(Error::DegenerateInput(format!(
            "cell {cell_id} is too thin for a plane cutoff grid"
        )));
    }
    let grid_step_mass = step.powi(m.d() as i32);
    let plane_mass = grid_step_mass * neumaier_sum(phi_grid.iter().copied());
    let mu_phi_mass = neumaier_sum((0..m.len()).map(|i| phi(m.point(i)) * m.weight(i)));
    if mu_phi_mass <= 0.0 {
        return Err(Error::DegenerateInput(format!(
            "cutoff of cell {cell_id} carries no mass of the measure"
        )));
    }
    let a_q = mu_phi_mass / plane_mass;
    Ok(CellApprox {
        cell: cell_id,
        plane,
        grid_points,
        phi_grid,
        grid_step_mass,
        a_q,
        eps,
        mu_phi_mass,
    })
}

/// The radial plateau function: 1 on [0, 1], cosine taper to 0 on [1, 2].
pub fn psi0(t: f64) -> f64 {
    if t <= 1.0 {
        1.0
    } else if t >= 2.0 {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * (t - 1.0)).cos())
    }
}

/// Annular cutoff `psi_{z,r,R}(x) = psi0(|x-z|/R) - psi0(|x-z|/r)`.
pub fn psi_annulus(z: &[f64], r: f64, big_r: f64, x: &[f64]) -> f64 {
    let t = dist(x, z);
    psi0(t / big_r) - psi0(t / r)
}

/// The annular Riesz diagnostic `R(psi_{z, delta*R, Delta*R} mu)(z)`,
/// evaluated with the untruncated kernel (safe: the integrand vanishes near
/// `z`). Requires `0 < delta < Delta < 1/2` and `z` within `delta*R/4` of
/// the support.
pub fn annular_riesz(
    m: &DiscreteMeasure,
    z: &[f64],
    delta: f64,
    big_delta: f64,
    radius: f64,
) -> Result<Vec<f64>> {
    if !(delta > 0.0 && delta < big_delta && big_delta < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < delta < Delta < 1/2 (got {delta}, {big_delta})"
        )));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter("R must be positive".into()));
    }
    let tree = KdTree::from_measure(m);
    let (_, dz) = tree.nearest(z);
    if dz >= delta * radius / 4.0 {
        return Err(Error::Domain(format!(
            "z is at distance {dz} from the support; need < delta*R/4 = {}",
            delta * radius / 4.0
        )));
    }
    let ambient = m.ambient_dim();
    let r = delta * radius;
    let big_r = big_delta * radius;
    let mut acc = vec![Accumulator::new(); ambient];
    let mut v = vec![0.0; ambient];
    for i in 0..m.len() {
        let p = m.point(i);
        let cutoff = psi_annulus(z, r, big_r, p);
        if cutoff == 0.0 {
            continue;
        }
        for k in 0..ambient {
            v[k] = z[k] - p[k];
        }
        let rn = norm(&v);
        let s = cutoff * m.weight(i) * rn.powi(-(ambient as i32) - 1) * rn;
        for k in 0..ambient {
            acc[k].add(v[k] * s);
        }
    }
    Ok(acc.iter().map(|a| a.value()).collect())
}
