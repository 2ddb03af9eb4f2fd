//! Detection of cells that are bilaterally far from unions of planes.
//!
//! A cell `P` is `delta`-non-BAUP when some support point `x` in `P` defeats
//! every hyperplane through `x`: each plane carries a point `y` within
//! `l(P)` of `x` whose `delta*l(P)`-ball misses the support entirely. The
//! three quantifiers are discretized: `x` over the members (or a seeded
//! subsample of 64), planes over a direction grid on the projective sphere,
//! `y` over a grid of step `delta*l(P)/2` in the plane. Holes only count
//! when the empty ball lies inside the measure's faithful window, so the
//! truncation edge of a finite sample cannot defeat a plane.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{axpy, norm, Hyperplane};
use crate::lattice::Lattice;
use crate::measure::DiscreteMeasure;
use crate::spatial::KdTree;
use crate::util::seeded_rng;

/// How to choose the tested points `x` inside a cell.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub enum SampleSpec {
    /// Test every member (exhaustive mode for small cells).
    All,
    /// Test at most `max` members, chosen by a seeded shuffle.
    Sample { max: usize, seed: u64 },
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec::Sample { max: 64, seed: 0 }
    }
}

/// Verdict of the non-BAUP test on one cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BaupVerdict {
    pub cell: usize,
    pub delta: f64,
    pub non_baup: bool,
    /// A witnessing support point when non-BAUP.
    pub witness_x: Option<usize>,
    /// Per tested x: the minimum over planes of the largest guaranteed hole
    /// radius on that plane (the cell is non-BAUP at x iff this reaches
    /// `delta * l(P)`).
    pub best_plane_hole: Vec<(usize, f64)>,
    /// Number of x samples actually tested.
    pub samples: usize,
}

/// Quasi-uniform directions on the projective sphere with angular step
/// (roughly) `step`. Exact equal-angle family in the plane; a golden-spiral
/// hemisphere in 3-space; a seeded deterministic sample above that.
pub fn direction_grid(ambient: usize, step: f64) -> Vec<Vec<f64>> {
    assert!(step > 0.0 && step < std::f64::consts::PI);
    match ambient {
        0 | 1 => vec![],
        2 => {
            let n = (std::f64::consts::PI / step).ceil() as usize;
            (0..n)
                .map(|k| {
                    let a = k as f64 * std::f64::consts::PI / n as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect()
        }
        3 => {
            // golden-spiral points on the upper hemisphere
            let n = ((2.0 * std::f64::consts::PI) / (step * step)).ceil() as usize;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = (k as f64 + 0.5) / n as f64; // (0, 1]: upper half
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
        _ => {
            use rand::Rng;
            let count = ((std::f64::consts::PI / step).ceil() as usize)
                .pow(ambient as u32 - 1)
                .min(100_000);
            let mut rng = seeded_rng(0xD1CE);
            (0..count)
                .map(|_| {
                    let mut v: Vec<f64> = (0..ambient)
                        .map(|_| {
                            // Box-Muller; deterministic via the fixed seed
                            let u1: f64 = rng.gen_range(1e-12..1.0);
                            let u2: f64 = rng.gen_range(0.0..1.0);
                            (-2.0 * u1.ln()).sqrt()
                                * (2.0 * std::f64::consts::PI * u2).cos()
                        })
                        .collect();
                    let n = norm(&v);
                    v.iter_mut().for_each(|x| *x /= n);
                    if v[ambient - 1] < 0.0 {
                        v.iter_mut().for_each(|x| *x = -*x);
                    }
                    v
                })
                .collect()
        }
    }
}

/// Largest hole radius certifiable at `y`: the distance to the nearest
/// support point, capped by how much of a ball around `y` still fits in the
/// faithful window.
fn hole_radius(m: &DiscreteMeasure, tree: &KdTree, window: &[Option<(f64, f64)>], y: &[f64]) -> f64 {
    let (_, nn) = tree.nearest(y);
    let mut cap = nn;
    for (i, w) in window.iter().enumerate() {
        if let Some((lo, hi)) = w {
            cap = cap.min(y[i] - lo).min(hi - y[i]);
        }
    }
    let _ = m;
    cap.max(0.0)
}

/// The raw diagnostic behind the test: for each sampled member `x`, the
/// minimum over grid planes through `x` of the largest hole radius found on
/// that plane within `B(x, l(P))`.
pub fn hole_diagnostic(
    m: &DiscreteMeasure,
    lattice: &Lattice,
    cell_id: usize,
    y_step: f64,
    direction_step: f64,
    sample: SampleSpec,
) -> Result<Vec<(usize, f64)>> {
    let cell = lattice.cell(cell_id);
    let l = cell.scale();
    let ambient = m.ambient_dim();
    let tree = KdTree::from_measure(m);
    let window = m.faithful_window();
    let dirs = direction_grid(ambient, direction_step);
    if dirs.is_empty() {
        return Err(Error::InvalidParameter("ambient dimension below 2".into()));
    }

    let xs: Vec<usize> = match sample {
        SampleSpec::All => cell.members.clone(),
        SampleSpec::Sample { max, seed } => {
            if cell.members.len() <= max {
                cell.members.clone()
            } else {
                let mut rng = seeded_rng(seed ^ cell_id as u64);
                let mut pool = cell.members.clone();
                use rand::Rng;
                for i in (1..pool.len()).rev() {
                    pool.swap(i, rng.gen_range(0..=i));
                }
                pool.truncate(max);
                pool.sort_unstable();
                pool
            }
        }
    };

    let out: Vec<(usize, f64)> = xs
        .par_iter()
        .map(|&xi| {
            let x = m.point(xi);
            let mut min_over_planes = f64::INFINITY;
            for n in &dirs {
                let plane = Hyperplane::new(n.clone(), x.to_vec()).expect("unit direction");
                let basis = plane.tangent_basis();
                let reach = (l / y_step).floor() as i64;
                let mut best_hole = 0.0f64;
                let mut idx = vec![-reach; basis.len()];
                let mut y = vec![0.0; ambient];
                'grid: loop {
                    y.copy_from_slice(x);
                    for (t, &ni) in basis.iter().zip(idx.iter()) {
                        axpy(&mut y, ni as f64 * y_step, t);
                    }
                    if crate::geometry::dist(&y, x) <= l {
                        let h = hole_radius(m, &tree, &window, &y);
                        if h > best_hole {
                            best_hole = h;
                        }
                    }
                    let mut axis = 0;
                    loop {
                        if axis == basis.len() {
                            break 'grid;
                        }
                        idx[axis] += 1;
                        if idx[axis] <= reach {
                            break;
                        }
                        idx[axis] = -reach;
                        axis += 1;
                    }
                }
                if best_hole < min_over_planes {
                    min_over_planes = best_hole;
                }
                if min_over_planes == 0.0 {
                    break;
                }
            }
            (xi, min_over_planes)
        })
        .collect();
    Ok(out)
}

/// Tests one cell for `delta`-non-BAUPness.
pub fn baup_test(
    m: &DiscreteMeasure,
    lattice: &Lattice,
    cell_id: usize,
    delta: f64,
    direction_step: f64,
    sample: SampleSpec,
) -> Result<BaupVerdict> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter("delta must be positive".into()));
    }
    let cell = lattice.cell(cell_id);
    let l = cell.scale();
    if delta * l < 4.0 * m.mesh() {
        return Err(Error::ScaleWindow(format!(
            "hole radius delta*l(P) = {} is below 4*mesh = {}; holes below mesh are artifacts",
            delta * l,
            4.0 * m.mesh()
        )));
    }
    let diag = hole_diagnostic(m, lattice, cell_id, delta * l / 2.0, direction_step, sample)?;
    let threshold = delta * l;
    let witness_x = diag.iter().find(|&&(_, v)| v >= threshold).map(|&(x, _)| x);
    Ok(BaupVerdict {
        cell: cell_id,
        delta,
        non_baup: witness_x.is_some(),
        witness_x,
        samples: diag.len(),
        best_plane_hole: diag,
    })
}

/// The non-BAUP family over all admissible levels, with its Vitali
/// rarefaction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonBaupFamily {
    pub delta: f64,
    /// All cells testing non-BAUP, ascending cell id.
    pub all: Vec<usize>,
    /// Greedy Vitali subfamily: the balls `B(z_P, 10 l(P))` are pairwise
    /// disjoint and every discarded cell's ball meets a kept 30 l ball.
    pub rarefied: Vec<usize>,
    /// Levels whose cells were admissible for the test.
    pub tested_levels: Vec<i32>,
}

/// Tests every admissible cell (those with `delta * l(P) >= 4*mesh`) and
/// rarefies the resulting family by greedy Vitali selection in descending
/// scale order.
pub fn nonbaup_family(
    m: &DiscreteMeasure,
    lattice: &Lattice,
    delta: f64,
    direction_step: f64,
    sample: SampleSpec,
) -> Result<NonBaupFamily> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter("delta must be positive".into()));
    }
    let mut tested_levels = Vec::new();
    let mut all = Vec::new();
    for lv in &lattice.levels {
        if delta * crate::lattice::scale(lv.k) < 4.0 * m.mesh() {
            continue;
        }
        tested_levels.push(lv.k);
        let verdicts: Vec<Option<usize>> = lv
            .cell_ids
            .par_iter()
            .map(|&cid| {
                let v = baup_test(m, lattice, cid, delta, direction_step, sample)
                    .expect("admissibility checked per level");
                if v.non_baup {
                    Some(cid)
                } else {
                    None
                }
            })
            .collect();
        all.extend(verdicts.into_iter().flatten());
    }
    all.sort_unstable();

    // greedy Vitali: biggest scale first, ties by id
    let mut order = all.clone();
    order.sort_by(|&a, &b| {
        let ka = lattice.cell(a).k;
        let kb = lattice.cell(b).k;
        ka.cmp(&kb).then(a.cmp(&b))
    });
    let mut rarefied: Vec<usize> = Vec::new();
    for &cid in &order {
        let c = lattice.cell(cid);
        let zc = m.point(c.center);
        let rc = 10.0 * c.scale();
        let disjoint = rarefied.iter().all(|&kid| {
            let k = lattice.cell(kid);
            crate::geometry::dist(zc, m.point(k.center)) >= rc + 10.0 * k.scale()
        });
        if disjoint {
            rarefied.push(cid);
        }
    }
    // certificate: every discarded ball meets a kept 30l ball
    for &cid in &all {
        if rarefied.contains(&cid) {
            continue;
        }
        let c = lattice.cell(cid);
        let zc = m.point(c.center);
        let ok = rarefied.iter().any(|&kid| {
            let k = lattice.cell(kid);
            crate::geometry::dist(zc, m.point(k.center)) < 10.0 * c.scale() + 30.0 * k.scale()
        });
        if !ok {
            return Err(Error::InvariantViolation(format!(
                "Vitali rarefaction dropped cell {cid} without a covering ball"
            )));
        }
    }
    rarefied.sort_unstable();
    Ok(NonBaupFamily { delta, all, rarefied, tested_levels })
}
