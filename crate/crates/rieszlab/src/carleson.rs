//! Carleson packing of cell families, non-Carleson layer extraction, the
//! alternating non-BAUP/flat layer construction, and Riesz-system
//! statistics with their Bessel check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::dist;
use crate::lattice::Lattice;
use crate::measure::DiscreteMeasure;
use crate::riesz::{riesz_transform, EvalMethod, KernelSpec};
use crate::util::neumaier_sum;

/// A set of cell ids within one lattice.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellFamily {
    pub label: String,
    pub ids: Vec<usize>,
}

impl CellFamily {
    pub fn new(label: impl Into<String>, mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Self { label: label.into(), ids }
    }
}

/// The packing measurement: the best constant `C` with
/// `sum_{Q in F, Q inside P} mu(Q) <= C mu(P)` over all cells `P`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CarlesonReport {
    pub best_constant: f64,
    pub witness: Option<usize>,
    /// Per-cell packing ratios (cell id, ratio), capped at the worst 32.
    pub top_ratios: Vec<(usize, f64)>,
}

/// Exact enumeration of the packing ratios through the nesting structure:
/// every family cell contributes its mass to each of its ancestors in
/// O(depth), and the maximal ratio wins. The empty family has constant 0.
pub fn carleson_constant(
    lattice: &Lattice,
    m: &DiscreteMeasure,
    family: &CellFamily,
) -> Result<CarlesonReport> {
    validate_family(lattice, family)?;
    let mut acc = vec![0.0f64; lattice.cells.len()];
    for &q in &family.ids {
        let mass = lattice.cell_mass(m, q);
        let mut cur = Some(q);
        while let Some(c) = cur {
            acc[c] += mass;
            cur = lattice.cells[c].parent;
        }
    }
    let mut best = 0.0f64;
    let mut witness = None;
    let mut ratios: Vec<(usize, f64)> = Vec::new();
    for (cid, &sum) in acc.iter().enumerate() {
        if sum > 0.0 {
            let ratio = sum / lattice.cell_mass(m, cid);
            ratios.push((cid, ratio));
            if ratio > best {
                best = ratio;
                witness = Some(cid);
            }
        }
    }
    ratios.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    ratios.truncate(32);
    Ok(CarlesonReport { best_constant: best, witness, top_ratios: ratios })
}

fn validate_family(lattice: &Lattice, family: &CellFamily) -> Result<()> {
    for &id in &family.ids {
        if id >= lattice.cells.len() {
            return Err(Error::InvalidParameter(format!(
                "family cell id {id} outside the lattice"
            )));
        }
    }
    Ok(())
}

/// Layers extracted from a family below a root cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerStack {
    pub root: usize,
    /// `layers[0] = [root]`; deeper layers peel maximal cells.
    pub layers: Vec<Vec<usize>>,
    /// Mass fraction of the root covered by the bottom layer.
    pub coverage: f64,
}

/// A refusal is a value: the inputs cannot support the requested layers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum LayersOutcome {
    Layers(LayerStack),
    Refusal { achieved_coverage: f64, layers_built: usize, reason: String },
}

/// Peels `M + 1` non-Carleson layers under the family cell with the largest
/// packing ratio: layer 0 is that cell, and each next layer is the set of
/// maximal family cells not yet used. Succeeds iff the bottom layer covers
/// a `(1 - eta)` fraction of the root's mass; a family whose constant is
/// below `M / eta` cannot succeed and yields a refusal.
pub fn non_carleson_layers(
    lattice: &Lattice,
    m: &DiscreteMeasure,
    family: &CellFamily,
    layers_m: usize,
    eta: f64,
) -> Result<LayersOutcome> {
    if layers_m == 0 {
        return Err(Error::InvalidParameter("need at least one layer".into()));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter("eta must lie in (0, 1)".into()));
    }
    validate_family(lattice, family)?;
    if family.ids.is_empty() {
        return Ok(LayersOutcome::Refusal {
            achieved_coverage: 0.0,
            layers_built: 0,
            reason: "empty family".into(),
        });
    }
    // root: the family cell maximizing the packing ratio
    let report = carleson_constant(lattice, m, family)?;
    let in_family = |id: usize| family.ids.binary_search(&id).is_ok();
    let root = report
        .top_ratios
        .iter()
        .chain(
            // top_ratios is capped; fall back to a full scan over family ids
            family.ids.iter().map(|&q| (&(q, 0.0)).clone()).collect::<Vec<_>>().iter(),
        )
        .filter(|&&(id, _)| in_family(id))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
        .map(|&(id, _)| id)
        .expect("nonempty family");

    let mut remaining: std::collections::BTreeSet<usize> = family
        .ids
        .iter()
        .copied()
        .filter(|&q| lattice.is_descendant(q, root))
        .collect();
    let mut layers: Vec<Vec<usize>> = Vec::with_capacity(layers_m + 1);
    for _ in 0..=layers_m {
        if remaining.is_empty() {
            break;
        }
        // maximal cells: those with no proper ancestor still remaining
        let mut layer: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&q| {
                let mut cur = lattice.cells[q].parent;
                while let Some(p) = cur {
                    if remaining.contains(&p) {
                        return false;
                    }
                    cur = lattice.cells[p].parent;
                }
                true
            })
            .collect();
        layer.sort_unstable();
        for &q in &layer {
            remaining.remove(&q);
        }
        layers.push(layer);
    }
    let root_mass = lattice.cell_mass(m, root);
    let coverage = match layers.get(layers_m) {
        Some(bottom) => {
            neumaier_sum(bottom.iter().map(|&q| lattice.cell_mass(m, q))) / root_mass
        }
        None => 0.0,
    };
    if layers.len() < layers_m + 1 || coverage < 1.0 - eta {
        return Ok(LayersOutcome::Refusal {
            achieved_coverage: coverage,
            layers_built: layers.len(),
            reason: format!(
                "family cannot sustain {layers_m} layers at eta = {eta}; its Carleson constant is below {}",
                layers_m as f64 / eta
            ),
        });
    }
    let stack = LayerStack { root, layers, coverage };
    certify_stack(lattice, &stack)?;
    Ok(LayersOutcome::Layers(stack))
}

/// Structural bullets of a layer stack: layer 0 is the root alone, layers
/// are antichains, every deeper cell has a unique strictly-larger container
/// one layer up, and no cell repeats.
pub fn certify_stack(lattice: &Lattice, stack: &LayerStack) -> Result<()> {
    if stack.layers.first().map(|l| l.as_slice()) != Some(&[stack.root][..]) {
        return Err(Error::InvariantViolation("layer 0 must be exactly the root".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for layer in &stack.layers {
        for &q in layer {
            if !seen.insert(q) {
                return Err(Error::InvariantViolation(format!("cell {q} repeats across layers")));
            }
        }
        for (i, &a) in layer.iter().enumerate() {
            for &b in layer.iter().skip(i + 1) {
                if lattice.is_descendant(a, b) || lattice.is_descendant(b, a) {
                    return Err(Error::InvariantViolation(format!(
                        "cells {a} and {b} in one layer are nested"
                    )));
                }
            }
        }
    }
    for w in stack.layers.windows(2) {
        let (upper, lower) = (&w[0], &w[1]);
        for &q in lower {
            let containers: Vec<usize> = upper
                .iter()
                .copied()
                .filter(|&p| p != q && lattice.is_descendant(q, p))
                .collect();
            if containers.len() != 1 {
                return Err(Error::InvariantViolation(format!(
                    "cell {q} has {} strict containers in the previous layer",
                    containers.len()
                )));
            }
        }
    }
    Ok(())
}

/// The alternating non-BAUP / flat construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlternatingStack {
    pub root: usize,
    /// `p_layers[k]`: non-BAUP layers, `p_layers[0] = [root]`.
    pub p_layers: Vec<Vec<usize>>,
    /// `q_layers[k]`: flat intermediate layers.
    pub q_layers: Vec<Vec<usize>>,
    /// Mass of the last flat layer over the root mass.
    pub coverage: f64,
    /// Mass lost at each alternation step, as fractions of the root mass.
    pub per_step_loss: Vec<f64>,
    /// Cells appearing in more than one layer (reported, not forbidden).
    pub repeats: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum AlternatingOutcome {
    Layers(AlternatingStack),
    Refusal { achieved_coverage: f64, steps_built: usize, reason: String },
}

/// Builds `K + 1` alternating pairs of layers inside a non-BAUP family: a
/// cell of a deep non-Carleson layer survives a step when some flat cell
/// sits between it and its current container, and the flat witnesses form
/// the intermediate layer (maximal cells only). `n_levels` is the depth
/// budget per alternation (the paper's N), `span` the number of
/// sub-steps folded into one alternation (the paper's S).
#[allow(clippy::too_many_arguments)]
pub fn alternating_layers(
    lattice: &Lattice,
    m: &DiscreteMeasure,
    nonbaup: &CellFamily,
    flat_pred: &dyn Fn(usize) -> bool,
    big_k: usize,
    eta: f64,
    n_levels: usize,
    span: usize,
) -> Result<AlternatingOutcome> {
    if n_levels == 0 || span == 0 {
        return Err(Error::InvalidParameter("n_levels and span must be positive".into()));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter("eta must lie in (0, 1)".into()));
    }
    let eta_prime = eta / (2.0 * (big_k as f64 + 1.0));
    let total_layers = (big_k + 1) * span * n_levels;
    let base = match non_carleson_layers(lattice, m, nonbaup, total_layers, eta_prime)? {
        LayersOutcome::Layers(stack) => stack,
        LayersOutcome::Refusal { achieved_coverage, layers_built, reason } => {
            return Ok(AlternatingOutcome::Refusal {
                achieved_coverage,
                steps_built: 0,
                reason: format!("non-Carleson layer extraction refused: {reason} ({layers_built} layers, coverage {achieved_coverage:.3})"),
            })
        }
    };
    let root = base.root;
    let root_mass = lattice.cell_mass(m, root);

    let mut p_layers: Vec<Vec<usize>> = vec![vec![root]];
    let mut q_layers: Vec<Vec<usize>> = Vec::new();
    let mut per_step_loss: Vec<f64> = Vec::new();
    let mut current: Vec<usize> = vec![root];

    for k in 0..=big_k {
        let target_index = (k + 1) * span * n_levels;
        let Some(deep_layer) = base.layers.get(target_index) else {
            return Ok(AlternatingOutcome::Refusal {
                achieved_coverage: 0.0,
                steps_built: k,
                reason: format!("only {} layers available, needed {}", base.layers.len(), target_index + 1),
            });
        };
        // container in the current P-layer, if any
        let container_of = |q: usize| -> Option<usize> {
            current.iter().copied().find(|&p| lattice.is_descendant(q, p))
        };
        let mut survivors: Vec<usize> = Vec::new();
        let mut flat_witnesses: Vec<usize> = Vec::new();
        for &deep in deep_layer {
            let Some(container) = container_of(deep) else { continue };
            // flat cells on the chain deep <= Q <= container
            let mut found = false;
            let mut cur = Some(deep);
            while let Some(c) = cur {
                if flat_pred(c) {
                    flat_witnesses.push(c);
                    found = true;
                }
                if c == container {
                    break;
                }
                cur = lattice.cells[c].parent;
            }
            if found {
                survivors.push(deep);
            }
        }
        flat_witnesses.sort_unstable();
        flat_witnesses.dedup();
        // maximal flat witnesses form the intermediate layer
        let witness_set: std::collections::BTreeSet<usize> = flat_witnesses.iter().copied().collect();
        let mut q_layer: Vec<usize> = flat_witnesses
            .iter()
            .copied()
            .filter(|&q| {
                let mut cur = lattice.cells[q].parent;
                while let Some(p) = cur {
                    if witness_set.contains(&p) {
                        return false;
                    }
                    cur = lattice.cells[p].parent;
                }
                true
            })
            .collect();
        q_layer.sort_unstable();
        if q_layer.is_empty() {
            return Ok(AlternatingOutcome::Refusal {
                achieved_coverage: 0.0,
                steps_built: k,
                reason: format!("no flat cell between layers at alternation {k}"),
            });
        }
        let prev_mass = neumaier_sum(current.iter().map(|&c| lattice.cell_mass(m, c)));
        let next_mass = neumaier_sum(survivors.iter().map(|&c| lattice.cell_mass(m, c)));
        per_step_loss.push((prev_mass - next_mass) / root_mass);
        q_layers.push(q_layer);
        if k < big_k {
            if survivors.is_empty() {
                return Ok(AlternatingOutcome::Refusal {
                    achieved_coverage: 0.0,
                    steps_built: k + 1,
                    reason: format!("no surviving non-BAUP cells after alternation {k}"),
                });
            }
            survivors.sort_unstable();
            p_layers.push(survivors.clone());
            current = survivors;
        }
    }

    let last_q = q_layers.last().expect("big_k + 1 >= 1 alternations");
    let coverage = neumaier_sum(last_q.iter().map(|&q| lattice.cell_mass(m, q))) / root_mass;

    // repeats are reported, not forbidden
    let mut seen = std::collections::BTreeMap::new();
    for layer in p_layers.iter().chain(q_layers.iter()) {
        for &q in layer {
            *seen.entry(q).or_insert(0usize) += 1;
        }
    }
    let repeats: Vec<usize> = seen.iter().filter(|(_, &c)| c > 1).map(|(&q, _)| q).collect();

    let stack = AlternatingStack { root, p_layers, q_layers, coverage, per_step_loss, repeats };
    certify_alternating(lattice, nonbaup, flat_pred, &stack)?;
    if coverage < 1.0 - eta {
        return Ok(AlternatingOutcome::Refusal {
            achieved_coverage: coverage,
            steps_built: big_k + 1,
            reason: format!("bottom flat layer covers {coverage:.4} < 1 - eta = {}", 1.0 - eta),
        });
    }
    Ok(AlternatingOutcome::Layers(stack))
}

/// The structural bullets of the alternating construction (all but the mass
/// bound, which is reported as `coverage`).
pub fn certify_alternating(
    lattice: &Lattice,
    nonbaup: &CellFamily,
    flat_pred: &dyn Fn(usize) -> bool,
    stack: &AlternatingStack,
) -> Result<()> {
    if stack.p_layers.first().map(|l| l.as_slice()) != Some(&[stack.root][..]) {
        return Err(Error::InvariantViolation("P_0 must be exactly the root".into()));
    }
    if stack.q_layers.len() != stack.p_layers.len() {
        return Err(Error::InvariantViolation(
            "expected one flat layer per non-BAUP layer".into(),
        ));
    }
    let in_family = |id: usize| nonbaup.ids.binary_search(&id).is_ok();
    for layer in &stack.p_layers {
        for &p in layer {
            if !in_family(p) {
                return Err(Error::InvariantViolation(format!(
                    "P-layer cell {p} is not in the non-BAUP family"
                )));
            }
            if !lattice.is_descendant(p, stack.root) {
                return Err(Error::InvariantViolation(format!(
                    "P-layer cell {p} is not below the root"
                )));
            }
        }
    }
    for layer in &stack.q_layers {
        for &q in layer {
            if !flat_pred(q) {
                return Err(Error::InvariantViolation(format!("Q-layer cell {q} is not flat")));
            }
        }
    }
    for layer in stack.p_layers.iter().chain(stack.q_layers.iter()) {
        for (i, &a) in layer.iter().enumerate() {
            for &b in layer.iter().skip(i + 1) {
                if lattice.is_descendant(a, b) || lattice.is_descendant(b, a) {
                    return Err(Error::InvariantViolation(format!(
                        "cells {a}, {b} nested within one layer"
                    )));
                }
            }
        }
    }
    for (k, q_layer) in stack.q_layers.iter().enumerate() {
        for &q in q_layer {
            let ok = stack.p_layers[k].iter().any(|&p| lattice.is_descendant(q, p));
            if !ok {
                return Err(Error::InvariantViolation(format!(
                    "flat cell {q} of layer {k} is not inside a non-BAUP cell of layer {k}"
                )));
            }
        }
    }
    for k in 1..stack.p_layers.len() {
        for &p in &stack.p_layers[k] {
            let ok = stack.q_layers[k - 1].iter().any(|&q| lattice.is_descendant(p, q));
            if !ok {
                return Err(Error::InvariantViolation(format!(
                    "non-BAUP cell {p} of layer {k} is not inside a flat cell of layer {}",
                    k - 1
                )));
            }
        }
    }
    Ok(())
}

/// Which localized test system pairs with the Riesz image in `xi`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub enum TestSystem {
    /// Mean-zero functions constant on the descendants `depth` levels down,
    /// unit L^2(mu) norm.
    Haar { depth: usize },
    /// Mean-zero Lipschitz bumps supported on `B(z_Q, a_factor * l(Q))`
    /// with `|psi|_Lip <= l(Q)^(-d/2 - 1)`.
    LipWavelet { a_factor: f64 },
}

/// Descendant cells exactly `depth` levels below `cell`.
fn descendants_at_depth(lattice: &Lattice, cell: usize, depth: usize) -> Vec<usize> {
    let mut cur = vec![cell];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &c in &cur {
            next.extend_from_slice(&lattice.cells[c].children);
        }
        if next.is_empty() {
            return Vec::new();
        }
        cur = next;
    }
    cur.sort_unstable();
    cur
}

/// Norm of the projection of a vector field sampled on the cell's members
/// onto the mean-zero piecewise-constant (Haar) space of the given pieces.
fn haar_projection_norm_sq(
    m: &DiscreteMeasure,
    lattice: &Lattice,
    cell: usize,
    pieces: &[usize],
    field: &dyn Fn(usize) -> Vec<f64>,
    ambient: usize,
) -> f64 {
    let cell_members = &lattice.cells[cell].members;
    let cell_mass: f64 = neumaier_sum(cell_members.iter().map(|&i| m.weight(i)));
    let mut cell_mean = vec![0.0; ambient];
    for &i in cell_members {
        let v = field(i);
        for c in 0..ambient {
            cell_mean[c] += v[c] * m.weight(i);
        }
    }
    cell_mean.iter_mut().for_each(|x| *x /= cell_mass);
    let mut total = 0.0;
    for &piece in pieces {
        let members = &lattice.cells[piece].members;
        let mass: f64 = neumaier_sum(members.iter().map(|&i| m.weight(i)));
        if mass == 0.0 {
            continue;
        }
        let mut mean = vec![0.0; ambient];
        for &i in members {
            let v = field(i);
            for c in 0..ambient {
                mean[c] += v[c] * m.weight(i);
            }
        }
        mean.iter_mut().for_each(|x| *x /= mass);
        for c in 0..ambient {
            let dev = mean[c] - cell_mean[c];
            total += dev * dev * mass;
        }
    }
    total
}

/// The localization statistic `xi(P)`: pair `R_mu chi_E` (with
/// `E = B(z_P, (4 + A) l(P))` and truncation `4*mesh`) against the chosen
/// test system on `P`, normalized by `mu(P)^(1/2)`. The fixed `E` realizes
/// the infimum's canonical witness, so the value is an upper bound for the
/// infimum over all admissible `E`.
pub fn xi_statistic(
    m: &DiscreteMeasure,
    lattice: &Lattice,
    cell: usize,
    system: TestSystem,
    a_ext: f64,
) -> Result<f64> {
    if !(a_ext > 1.0) {
        return Err(Error::InvalidParameter("extension factor must exceed 1".into()));
    }
    let c = lattice.cell(cell);
    let l = c.scale();
    let z = m.point(c.center).to_vec();
    let radius = (4.0 + a_ext) * l;
    let chi: Vec<f64> = (0..m.len())
        .map(|i| if dist(m.point(i), &z) < radius { 1.0 } else { 0.0 })
        .collect();
    let spec = KernelSpec::full(4.0 * m.mesh())?;
    let ambient = m.ambient_dim();
    let cell_mass = lattice.cell_mass(m, cell);

    match system {
        TestSystem::Haar { depth } => {
            if depth == 0 {
                return Err(Error::InvalidParameter("haar depth must be >= 1".into()));
            }
            let pieces = descendants_at_depth(lattice, cell, depth);
            if pieces.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "cell {cell} has no descendants {depth} levels down"
                )));
            }
            // sample the Riesz image on the cell's members only
            let members = &c.members;
            let mut targets = Vec::with_capacity(members.len() * ambient);
            for &i in members {
                targets.extend_from_slice(m.point(i));
            }
            let fs = riesz_transform(m, &chi, &spec, &targets, EvalMethod::Naive)?;
            let index_of: std::collections::BTreeMap<usize, usize> =
                members.iter().copied().enumerate().map(|(a, b)| (b, a)).collect();
            let field = |i: usize| -> Vec<f64> { fs.value(index_of[&i]).to_vec() };
            let norm_sq =
                haar_projection_norm_sq(m, lattice, cell, &pieces, &field, ambient);
            Ok((norm_sq / cell_mass).sqrt())
        }
        TestSystem::LipWavelet { a_factor } => {
            let window = a_factor * l;
            let nodes: Vec<usize> = (0..m.len())
                .filter(|&i| dist(m.point(i), &z) < window)
                .collect();
            if nodes.is_empty() {
                return Err(Error::Domain("no support in the wavelet window".into()));
            }
            let mut targets = Vec::with_capacity(nodes.len() * ambient);
            for &i in &nodes {
                targets.extend_from_slice(m.point(i));
            }
            let fs = riesz_transform(m, &chi, &spec, &targets, EvalMethod::Naive)?;
            let lip = l.powf(-(m.d() as f64) / 2.0 - 1.0);
            let mut total = 0.0;
            for comp in 0..ambient {
                let objective: Vec<f64> = (0..nodes.len()).map(|a| fs.value(a)[comp]).collect();
                let opt = lip_extremal_pairing(m, &nodes, &z, window, lip, &objective)?;
                total += opt * opt;
            }
            Ok(total.sqrt() / cell_mass.sqrt())
        }
    }
}

/// Maximizes `sum_i objective_i psi(p_i) w_i` over Lipschitz `psi` with
/// constant `lip`, support in `B(z, window)`, and `integral psi dmu = 0`,
/// discretized over the given support nodes.
fn lip_extremal_pairing(
    m: &DiscreteMeasure,
    nodes: &[usize],
    z: &[f64],
    window: f64,
    lip: f64,
    objective: &[f64],
) -> Result<f64> {
    use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<minilp::Variable> = nodes
        .iter()
        .enumerate()
        .map(|(a, &i)| {
            let cap = lip * (window - dist(m.point(i), z)).max(0.0);
            problem.add_var(objective[a] * m.weight(i), (-cap, cap))
        })
        .collect();
    // dense pairwise constraints: wavelet windows are small
    for a in 0..nodes.len() {
        for b in (a + 1)..nodes.len() {
            let bound = lip * dist(m.point(nodes[a]), m.point(nodes[b]));
            let mut e1 = LinearExpr::empty();
            e1.add(vars[a], 1.0);
            e1.add(vars[b], -1.0);
            problem.add_constraint(e1, ComparisonOp::Le, bound);
            let mut e2 = LinearExpr::empty();
            e2.add(vars[b], 1.0);
            e2.add(vars[a], -1.0);
            problem.add_constraint(e2, ComparisonOp::Le, bound);
        }
    }
    let mut mean_zero = LinearExpr::empty();
    for (a, &i) in nodes.iter().enumerate() {
        mean_zero.add(vars[a], m.weight(i));
    }
    problem.add_constraint(mean_zero, ComparisonOp::Eq, 0.0);
    let solution = problem.solve().map_err(|e| Error::Internal(format!("wavelet LP: {e:?}")))?;
    Ok(solution.objective().max(0.0))
}

/// Bessel ratio `sum_Q <f, psi_Q>^2 / |f|^2` where `psi_Q` is the
/// normalized extremizer of the chosen system for this `f` (for the Haar
/// system: the normalized projection onto the cell's mean-zero
/// piecewise-constant space). Cells too shallow for the system are skipped.
pub fn bessel_check(
    m: &DiscreteMeasure,
    lattice: &Lattice,
    system: TestSystem,
    f: &[f64],
) -> Result<f64> {
    if f.len() != m.len() {
        return Err(Error::InvalidParameter("f must be sampled on the support".into()));
    }
    let f_norm_sq = neumaier_sum((0..m.len()).map(|i| f[i] * f[i] * m.weight(i)));
    if f_norm_sq == 0.0 {
        return Err(Error::UndefinedRatio("bessel_check needs a nonzero f".into()));
    }
    let depth = match system {
        TestSystem::Haar { depth } => depth,
        TestSystem::LipWavelet { .. } => {
            return Err(Error::InvalidParameter(
                "bessel_check is defined for the Haar system".into(),
            ))
        }
    };
    let mut total = 0.0;
    for cell in 0..lattice.cells.len() {
        let pieces = descendants_at_depth(lattice, cell, depth);
        if pieces.is_empty() {
            continue;
        }
        let field = |i: usize| -> Vec<f64> { vec![f[i]] };
        total += haar_projection_norm_sq(m, lattice, cell, &pieces, &field, 1);
    }
    Ok(total / f_norm_sq)
}
