//! The David-Semmes lattice on the support of a discrete measure.
//!
//! Construction follows the nets/Voronoi/nobility recipe: per level `k`, a
//! maximal `16^(-k)`-separated net, overlapping Voronoi cells, descendant
//! closures, a "nobility" linear order consistent across levels, and cells
//! `E_z = tilde(V_z) \ union of nobler tilde(V)`. All claimed structural
//! properties (nesting, per-level partition, the ball sandwich, separation,
//! maximality, order consistency) are certified after construction; a
//! failure is a bug, not a data condition.
//!
//! Scales are `l(Q) = 2^(-4k) = 16^(-k)` exactly, so the sandwich constants
//! `2^(-4k-2)` and `2^(-4k+1)` (and `2^(-4k-3)`, `2^(-4k+2)` for the spatial
//! cells) carry over verbatim. The nobility order at the top level is plain
//! lexicographic order of net-point coordinates; deeper levels rank by the
//! noblest intersecting parent first and fall back to the lexicographic
//! order within a tie.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::dist;
use crate::measure::DiscreteMeasure;
use crate::spatial::KdTree;
use crate::util::neumaier_sum;

/// Cell scale at level `k`.
pub fn scale(k: i32) -> f64 {
    16f64.powi(-k)
}

/// A lattice cell: the set `E_z` of support points claimed by the net point
/// `z` at its level, plus the tree links.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Cell {
    pub id: usize,
    pub k: i32,
    /// Support index of the center `z_Q`.
    pub center: usize,
    /// Sorted support indices of the members.
    pub members: Vec<usize>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

impl Cell {
    pub fn scale(&self) -> f64 {
        scale(self.k)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Level {
    pub k: i32,
    /// Net point support indices in admission order.
    pub net: Vec<usize>,
    /// Global cell ids, parallel to `net`.
    pub cell_ids: Vec<usize>,
    /// Nobility rank per net position (higher = nobler).
    pub rank: Vec<usize>,
    /// Per support point, the local (net-position) cell index at this level.
    pub cell_of_point: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Lattice {
    pub k_min: i32,
    pub k_max: i32,
    pub levels: Vec<Level>,
    pub cells: Vec<Cell>,
    pub n_points: usize,
}

impl Lattice {
    pub fn level(&self, k: i32) -> Option<&Level> {
        if k < self.k_min || k > self.k_max {
            return None;
        }
        self.levels.get((k - self.k_min) as usize)
    }

    pub fn cell(&self, id: usize) -> &Cell {
        &self.cells[id]
    }

    pub fn cells_at(&self, k: i32) -> impl Iterator<Item = &Cell> + '_ {
        self.level(k)
            .into_iter()
            .flat_map(move |lv| lv.cell_ids.iter().map(move |&id| &self.cells[id]))
    }

    /// Mass of a cell under the measure the lattice was built on.
    pub fn cell_mass(&self, m: &DiscreteMeasure, id: usize) -> f64 {
        neumaier_sum(self.cells[id].members.iter().map(|&i| m.weight(i)))
    }

    /// True iff `inner` is contained in `outer` (equal or linked through the
    /// ancestor chain).
    pub fn is_descendant(&self, inner: usize, outer: usize) -> bool {
        let mut cur = inner;
        loop {
            if cur == outer {
                return true;
            }
            match self.cells[cur].parent {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }

    pub fn export_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("lattice serializes")
    }

    /// Imports a lattice and re-validates every invariant against the
    /// measure before use. The nobility ranks are part of the serialized
    /// form, so order consistency is re-checked too.
    pub fn import_json(text: &str, m: &DiscreteMeasure) -> Result<Lattice> {
        let lat: Lattice =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("lattice JSON: {e}")))?;
        if lat.n_points != m.len() {
            return Err(Error::InvalidParameter(format!(
                "lattice was built on {} points, measure has {}",
                lat.n_points,
                m.len()
            )));
        }
        certify(&lat, m)?;
        Ok(lat)
    }
}

/// A small uniform hash grid for radius-bounded neighbor scans during net
/// construction.
struct GridIndex {
    cell: f64,
    ambient: usize,
    map: std::collections::HashMap<Vec<i64>, Vec<usize>>,
}

impl GridIndex {
    fn new(cell: f64, ambient: usize) -> Self {
        Self { cell, ambient, map: std::collections::HashMap::new() }
    }

    fn key(&self, p: &[f64]) -> Vec<i64> {
        p.iter().map(|&c| (c / self.cell).floor() as i64).collect()
    }

    fn insert(&mut self, idx: usize, p: &[f64]) {
        self.map.entry(self.key(p)).or_default().push(idx);
    }

    fn any_within<F: Fn(usize) -> bool>(&self, p: &[f64], r: f64, hit: F) -> bool {
        let key = self.key(p);
        let mut neighbor = vec![0i64; self.ambient];
        let reach = (r / self.cell).ceil() as i64;
        let mut offsets = vec![-reach; self.ambient];
        loop {
            for i in 0..self.ambient {
                neighbor[i] = key[i] + offsets[i];
            }
            if let Some(bucket) = self.map.get(&neighbor) {
                for &i in bucket {
                    if hit(i) {
                        return true;
                    }
                }
            }
            let mut axis = 0;
            loop {
                if axis == self.ambient {
                    return false;
                }
                offsets[axis] += 1;
                if offsets[axis] <= reach {
                    break;
                }
                offsets[axis] = -reach;
                axis += 1;
            }
        }
    }
}

fn validate_scale_window(m: &DiscreteMeasure, k_min: i32, k_max: i32) -> Result<()> {
    if k_min > k_max {
        return Err(Error::InvalidParameter(format!("k_min = {k_min} > k_max = {k_max}")));
    }
    if scale(k_max) < 4.0 * m.mesh() {
        return Err(Error::ScaleWindow(format!(
            "finest level scale {} is below 4*mesh = {}",
            scale(k_max),
            4.0 * m.mesh()
        )));
    }
    let diam = m.diameter();
    if diam > 0.0 && scale(k_min) > 16.0 * diam {
        return Err(Error::ScaleWindow(format!(
            "coarsest level scale {} is far above the support diameter {diam}",
            scale(k_min)
        )));
    }
    Ok(())
}

/// Greedy maximal `16^(-k)`-separated nets, one per level, iterating support
/// points in index order: a point is admitted iff no previously admitted
/// point lies within `16^(-k)`.
pub fn build_nets(m: &DiscreteMeasure, k_min: i32, k_max: i32) -> Result<Vec<Vec<usize>>> {
    validate_scale_window(m, k_min, k_max)?;
    let ambient = m.ambient_dim();
    let mut nets = Vec::with_capacity((k_max - k_min + 1) as usize);
    for k in k_min..=k_max {
        let sep = scale(k);
        let mut grid = GridIndex::new(sep.max(1e-300), ambient);
        let mut net: Vec<usize> = Vec::new();
        for i in 0..m.len() {
            let p = m.point(i);
            let blocked = grid.any_within(p, sep, |j| dist(m.point(net[j]), p) < sep);
            if !blocked {
                grid.insert(net.len(), p);
                net.push(i);
            }
        }
        nets.push(net);
    }
    Ok(nets)
}

/// Single-valued Voronoi assignment of every support point to its nearest
/// net point; exact ties go to the smaller net position.
pub fn voronoi_assign(m: &DiscreteMeasure, net: &[usize]) -> Result<Vec<usize>> {
    if net.is_empty() {
        return Err(Error::InvalidParameter("empty net".into()));
    }
    let ambient = m.ambient_dim();
    let mut net_coords = Vec::with_capacity(net.len() * ambient);
    for &i in net {
        net_coords.extend_from_slice(m.point(i));
    }
    let tree = KdTree::new(&net_coords, ambient);
    Ok((0..m.len()).map(|i| tree.nearest(m.point(i)).0).collect())
}

/// The overlapping Voronoi relation: per support point, every net position
/// achieving the minimal distance within `1e-12 * 16^(-k)` slack.
fn multi_voronoi(m: &DiscreteMeasure, net: &[usize], k: i32) -> Vec<Vec<usize>> {
    let ambient = m.ambient_dim();
    let mut net_coords = Vec::with_capacity(net.len() * ambient);
    for &i in net {
        net_coords.extend_from_slice(m.point(i));
    }
    let tree = KdTree::new(&net_coords, ambient);
    let slack = 1e-12 * scale(k);
    (0..m.len())
        .map(|i| {
            let p = m.point(i);
            let (_, dmin) = tree.nearest(p);
            let mut owners = Vec::new();
            tree.for_each_in_ball(p, dmin + 2.0 * slack, |j, d| {
                if d <= dmin + slack {
                    owners.push(j);
                }
            });
            owners.sort_unstable();
            owners
        })
        .collect()
}

/// Fixed-size bitset over support points.
#[derive(Clone)]
struct Bitset {
    words: Vec<u64>,
}

impl Bitset {
    fn new(n: usize) -> Self {
        Self { words: vec![0; (n + 63) / 64] }
    }

    fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn or_with(&mut self, other: &Bitset) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    fn and_not(&self, other: &Bitset) -> Bitset {
        Bitset {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & !b).collect(),
        }
    }

    fn indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (wi, &w) in self.words.iter().enumerate() {
            let mut bits = w;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                out.push(wi * 64 + b);
                bits &= bits - 1;
            }
        }
        out
    }
}

/// Builds the full lattice and certifies its structural properties.
pub fn build_lattice(m: &DiscreteMeasure, k_min: i32, k_max: i32) -> Result<Lattice> {
    let nets = build_nets(m, k_min, k_max)?;
    let n = m.len();
    let n_levels = nets.len();

    // overlapping Voronoi memberships per level
    let mv: Vec<Vec<Vec<usize>>> = (0..n_levels)
        .map(|li| multi_voronoi(m, &nets[li], k_min + li as i32))
        .collect();

    // V_z as bitsets
    let v_sets: Vec<Vec<Bitset>> = (0..n_levels)
        .map(|li| {
            let mut sets = vec![Bitset::new(n); nets[li].len()];
            for (pt, owners) in mv[li].iter().enumerate() {
                for &j in owners {
                    sets[j].set(pt);
                }
            }
            sets
        })
        .collect();

    // links between consecutive levels: a -> b when V_a meets V_b
    let mut down_links: Vec<Vec<Vec<usize>>> = Vec::with_capacity(n_levels);
    let mut up_links: Vec<Vec<Vec<usize>>> = Vec::with_capacity(n_levels);
    for li in 0..n_levels {
        down_links.push(vec![Vec::new(); nets[li].len()]);
        up_links.push(vec![Vec::new(); nets[li].len()]);
    }
    for li in 0..n_levels.saturating_sub(1) {
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for pt in 0..n {
            for &a in &mv[li][pt] {
                for &b in &mv[li + 1][pt] {
                    pairs.push((a, b));
                }
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        for (a, b) in pairs {
            down_links[li][a].push(b);
            up_links[li + 1][b].push(a);
        }
    }

    // descendant closures tilde(V), bottom-up
    let mut tilde: Vec<Vec<Bitset>> = v_sets;
    for li in (0..n_levels.saturating_sub(1)).rev() {
        for a in 0..nets[li].len() {
            let (cur, next) = tilde.split_at_mut(li + 1);
            for &b in &down_links[li][a] {
                cur[li][a].or_with(&next[0][b]);
            }
        }
    }

    // nobility ranks: top level lexicographic, deeper levels by noblest
    // intersecting parent first, lexicographic within ties
    let lex_cmp = |a: usize, b: usize| -> std::cmp::Ordering {
        let pa = m.point(a);
        let pb = m.point(b);
        for (x, y) in pa.iter().zip(pb) {
            match x.partial_cmp(y).unwrap() {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        a.cmp(&b)
    };
    let mut ranks: Vec<Vec<usize>> = Vec::with_capacity(n_levels);
    let mut top_parent: Vec<Vec<usize>> = Vec::with_capacity(n_levels);
    for li in 0..n_levels {
        let count = nets[li].len();
        let mut order: Vec<usize> = (0..count).collect();
        if li == 0 {
            order.sort_by(|&a, &b| lex_cmp(nets[li][a], nets[li][b]));
            ranks.push(positions_to_ranks(&order));
            top_parent.push(vec![usize::MAX; count]);
        } else {
            let prev_rank = &ranks[li - 1];
            let tp: Vec<usize> = (0..count)
                .map(|b| {
                    *up_links[li][b]
                        .iter()
                        .max_by_key(|&&a| prev_rank[a])
                        .expect("every child Voronoi cell meets a parent cell")
                })
                .collect();
            order.sort_by(|&a, &b| {
                prev_rank[tp[a]]
                    .cmp(&prev_rank[tp[b]])
                    .then_with(|| lex_cmp(nets[li][a], nets[li][b]))
            });
            ranks.push(positions_to_ranks(&order));
            top_parent.push(tp);
        }
    }

    // cells E_z: the noblest net point claims its closure first
    let mut levels: Vec<Level> = Vec::with_capacity(n_levels);
    let mut cells: Vec<Cell> = Vec::new();
    for li in 0..n_levels {
        let k = k_min + li as i32;
        let count = nets[li].len();
        let mut by_rank: Vec<usize> = (0..count).collect();
        by_rank.sort_by_key(|&j| std::cmp::Reverse(ranks[li][j]));
        let mut claimed = Bitset::new(n);
        let mut members_of = vec![Vec::new(); count];
        for &j in &by_rank {
            let mine = tilde[li][j].and_not(&claimed);
            claimed.or_with(&tilde[li][j]);
            members_of[j] = mine.indices();
        }
        let mut cell_of_point = vec![usize::MAX; n];
        let mut cell_ids = Vec::with_capacity(count);
        for (j, members) in members_of.iter_mut().enumerate() {
            let id = cells.len();
            cell_ids.push(id);
            for &pt in members.iter() {
                cell_of_point[pt] = j;
            }
            cells.push(Cell {
                id,
                k,
                center: nets[li][j],
                members: std::mem::take(members),
                parent: None,
                children: Vec::new(),
            });
        }
        levels.push(Level {
            k,
            net: nets[li].clone(),
            cell_ids,
            rank: ranks[li].clone(),
            cell_of_point,
        });
    }

    // parent/child links: the parent of a level-(k+1) cell is the cell of
    // its noblest intersecting net point one level up
    for li in 1..n_levels {
        for b in 0..nets[li].len() {
            let a = top_parent[li][b];
            let child_id = levels[li].cell_ids[b];
            let parent_id = levels[li - 1].cell_ids[a];
            cells[child_id].parent = Some(parent_id);
            cells[parent_id].children.push(child_id);
        }
    }

    let lat = Lattice { k_min, k_max, levels, cells, n_points: n };
    certify(&lat, m)?;
    Ok(lat)
}

fn positions_to_ranks(order: &[usize]) -> Vec<usize> {
    let mut rank = vec![0usize; order.len()];
    for (pos, &j) in order.iter().enumerate() {
        rank[j] = pos;
    }
    rank
}

/// Checks every structural invariant; returns the first violation.
pub fn certify(lat: &Lattice, m: &DiscreteMeasure) -> Result<()> {
    let n = m.len();
    for lv in &lat.levels {
        let sep = scale(lv.k);
        for (a_pos, &a) in lv.net.iter().enumerate() {
            for &b in lv.net.iter().skip(a_pos + 1) {
                if dist(m.point(a), m.point(b)) < sep * (1.0 - 1e-12) {
                    return Err(Error::InvariantViolation(format!(
                        "net at level {} not {sep}-separated (points {a}, {b})",
                        lv.k
                    )));
                }
            }
        }
        for i in 0..n {
            let ok = lv
                .net
                .iter()
                .any(|&z| dist(m.point(z), m.point(i)) < sep * (1.0 + 1e-12));
            if !ok {
                return Err(Error::InvariantViolation(format!(
                    "support point {i} farther than {sep} from the level-{} net",
                    lv.k
                )));
            }
        }
        // per-level partition
        let mut seen = vec![false; n];
        for &cid in &lv.cell_ids {
            let cell = &lat.cells[cid];
            for &i in &cell.members {
                if seen[i] {
                    return Err(Error::InvariantViolation(format!(
                        "support point {i} in two cells at level {}",
                        lv.k
                    )));
                }
                seen[i] = true;
                if lv.cell_of_point[i] == usize::MAX || lv.cell_ids[lv.cell_of_point[i]] != cid {
                    return Err(Error::InvariantViolation(format!(
                        "cell_of_point inconsistent at level {}",
                        lv.k
                    )));
                }
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::InvariantViolation(format!(
                "cells at level {} do not cover the support",
                lv.k
            )));
        }
        // ball sandwich on support points, and center sanity
        let inner = sep / 4.0; // 2^(-4k-2)
        let outer = 2.0 * sep; // 2^(-4k+1)
        let mut centers_seen = std::collections::BTreeSet::new();
        for &cid in &lv.cell_ids {
            let cell = &lat.cells[cid];
            if !centers_seen.insert(cell.center) {
                return Err(Error::InvariantViolation(format!(
                    "duplicate center {} at level {}",
                    cell.center, lv.k
                )));
            }
            let zq = m.point(cell.center);
            if cell.members.binary_search(&cell.center).is_err() {
                return Err(Error::InvariantViolation(format!(
                    "center {} is not a member of its cell {cid}",
                    cell.center
                )));
            }
            for &i in &cell.members {
                if dist(m.point(i), zq) > outer * (1.0 + 1e-12) {
                    return Err(Error::InvariantViolation(format!(
                        "member {i} of cell {cid} beyond 2^(-4k+1) of the center"
                    )));
                }
            }
            for i in 0..n {
                if dist(m.point(i), zq) < inner * (1.0 - 1e-12)
                    && lv.cell_of_point[i] != lv.cell_of_point[cell.center]
                {
                    return Err(Error::InvariantViolation(format!(
                        "support point {i} within 2^(-4k-2) of center {} but not a member",
                        cell.center
                    )));
                }
            }
        }
    }
    // nesting
    for cell in &lat.cells {
        if let Some(pid) = cell.parent {
            let parent = &lat.cells[pid];
            if parent.k + 1 != cell.k {
                return Err(Error::InvariantViolation("parent is not one level up".into()));
            }
            for &i in &cell.members {
                if parent.members.binary_search(&i).is_err() {
                    return Err(Error::InvariantViolation(format!(
                        "member {i} of cell {} missing from parent {pid}",
                        cell.id
                    )));
                }
            }
        } else if cell.k != lat.k_min {
            return Err(Error::InvariantViolation("non-top cell without parent".into()));
        }
    }
    // order consistency between consecutive levels: ranking children by
    // nobility must rank their parents monotonically
    for li in 1..lat.levels.len() {
        let prev = &lat.levels[li - 1];
        let cur = &lat.levels[li];
        let parent_rank = |b: usize| -> usize {
            let cid = cur.cell_ids[b];
            let pid = lat.cells[cid].parent.expect("nesting checked above");
            let ppos = prev
                .cell_ids
                .iter()
                .position(|&c| c == pid)
                .expect("parent cell in previous level");
            prev.rank[ppos]
        };
        let mut by_rank: Vec<usize> = (0..cur.net.len()).collect();
        by_rank.sort_by_key(|&b| cur.rank[b]);
        for w in by_rank.windows(2) {
            if parent_rank(w[0]) > parent_rank(w[1]) {
                return Err(Error::InvariantViolation(format!(
                    "nobility order inconsistent between levels {} and {}",
                    prev.k, cur.k
                )));
            }
        }
    }
    Ok(())
}

/// Query helper binding a lattice to the measure (and spatial index) it was
/// built on.
pub struct LatticeQuery<'a> {
    pub lattice: &'a Lattice,
    pub measure: &'a DiscreteMeasure,
    tree: KdTree<'a>,
}

impl<'a> LatticeQuery<'a> {
    pub fn new(lattice: &'a Lattice, measure: &'a DiscreteMeasure) -> Result<Self> {
        if lattice.n_points != measure.len() {
            return Err(Error::InvalidParameter(
                "lattice and measure have different point counts".into(),
            ));
        }
        Ok(Self { lattice, measure, tree: KdTree::from_measure(measure) })
    }

    /// The spatial cell owning `x` at level `k`: a support point belongs to
    /// its `E_z` cell; any other point belongs to the cell of its nearest
    /// support point provided that distance is below `16^(-k)`.
    pub fn spatial_member(&self, x: &[f64], k: i32) -> Option<usize> {
        let lv = self.lattice.level(k)?;
        let (idx, d) = self.tree.nearest(x);
        if d < scale(k) {
            Some(lv.cell_ids[lv.cell_of_point[idx]])
        } else {
            None
        }
    }

    /// Distance from a member point to the complement of its spatial cell:
    /// the distance to the nearest foreign support point, capped by the
    /// spatial cell's exclusion radius `16^(-k)`.
    pub fn complement_distance(&self, cell_id: usize, point: usize) -> f64 {
        let cell = &self.lattice.cells[cell_id];
        let lv = self.lattice.level(cell.k).expect("cell level exists");
        let local = lv.cell_of_point[cell.center];
        let x = self.measure.point(point);
        let foreign = self
            .tree
            .nearest_filtered(x, |i| lv.cell_of_point[i] != local)
            .map(|(_, d)| d)
            .unwrap_or(f64::INFINITY);
        foreign.min(scale(cell.k))
    }

    /// Total weight of cell members within `eps * l(Q)` of the complement of
    /// the spatial cell.
    pub fn boundary_mass(&self, cell_id: usize, eps: f64) -> Result<f64> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidParameter("eps must lie in (0, 1]".into()));
        }
        let cell = &self.lattice.cells[cell_id];
        let cut = eps * cell.scale();
        Ok(neumaier_sum(cell.members.iter().filter_map(|&i| {
            if self.complement_distance(cell_id, i) < cut {
                Some(self.measure.weight(i))
            } else {
                None
            }
        })))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{gen_cantor, gen_hyperplane, DiscreteMeasure, Provenance};

    #[test]
    fn single_point_support_chains() {
        let m = DiscreteMeasure::new(
            1,
            vec![0.5, 0.5],
            vec![1.0],
            1e-6,
            Provenance::Custom { tag: "atom".into() },
        )
        .unwrap();
        let lat = build_lattice(&m, 0, 3).unwrap();
        for lv in &lat.levels {
            assert_eq!(lv.net, vec![0]);
        }
        for cell in &lat.cells {
            assert_eq!(cell.members, vec![0]);
            if cell.k > lat.k_min {
                assert!(cell.parent.is_some());
            }
        }
    }

    #[test]
    fn nets_are_separated_and_cover() {
        let m = gen_cantor(5).unwrap();
        let nets = build_nets(&m, 0, 2).unwrap();
        for (li, net) in nets.iter().enumerate() {
            let sep = scale(li as i32);
            for (ai, &a) in net.iter().enumerate() {
                for &b in net.iter().skip(ai + 1) {
                    assert!(dist(m.point(a), m.point(b)) >= sep);
                }
            }
            for i in 0..m.len() {
                let dmin = net
                    .iter()
                    .map(|&z| dist(m.point(z), m.point(i)))
                    .fold(f64::INFINITY, f64::min);
                assert!(dmin < sep, "covering fails at level {li}");
            }
        }
    }

    #[test]
    fn voronoi_assignment_tie_rule() {
        // two net points, one support point exactly midway
        let m = DiscreteMeasure::new(
            1,
            vec![0.0, 0.0, 1.0, 0.0, 0.5, 0.0],
            vec![1.0, 1.0, 1.0],
            0.25,
            Provenance::Custom { tag: "midpoint".into() },
        )
        .unwrap();
        let assignment = voronoi_assign(&m, &[0, 1]).unwrap();
        assert_eq!(assignment[0], 0);
        assert_eq!(assignment[1], 1);
        assert_eq!(assignment[2], 0, "tie must resolve to the lower net index");
    }

    #[test]
    fn voronoi_net_equals_support() {
        let m = gen_cantor(2).unwrap();
        let net: Vec<usize> = (0..m.len()).collect();
        let assignment = voronoi_assign(&m, &net).unwrap();
        for (i, &a) in assignment.iter().enumerate() {
            assert_eq!(a, i);
        }
    }

    #[test]
    fn lattice_member_counts_sum_to_n() {
        let m = gen_hyperplane(1, 1.0, 0.01).unwrap();
        let lat = build_lattice(&m, 0, 1).unwrap();
        for lv in &lat.levels {
            let total: usize = lv
                .cell_ids
                .iter()
                .map(|&cid| lat.cells[cid].members.len())
                .sum();
            assert_eq!(total, m.len());
        }
    }

    #[test]
    fn rebuild_is_deterministic() {
        let m = gen_cantor(4).unwrap();
        let a = build_lattice(&m, 0, 1).unwrap();
        let b = build_lattice(&m, 0, 1).unwrap();
        assert_eq!(a.export_json(), b.export_json());
    }

    #[test]
    fn export_import_round_trip() {
        let m = gen_cantor(3).unwrap();
        let lat = build_lattice(&m, 0, 1).unwrap();
        let text = lat.export_json();
        let back = Lattice::import_json(&text, &m).unwrap();
        assert_eq!(back.cells.len(), lat.cells.len());
    }

    #[test]
    fn spatial_member_basics() {
        let m = gen_cantor(3).unwrap();
        let lat = build_lattice(&m, 0, 1).unwrap();
        let q = LatticeQuery::new(&lat, &m).unwrap();
        let lv = lat.level(1).unwrap();
        let cid = lv.cell_ids[0];
        let center = lat.cells[cid].center;
        assert_eq!(q.spatial_member(m.point(center), 1), Some(cid));
        assert_eq!(q.spatial_member(&[50.0, 50.0], 1), None);
    }

    #[test]
    fn boundary_mass_bounds() {
        let m = gen_hyperplane(1, 1.0, 0.004).unwrap();
        let lat = build_lattice(&m, 0, 1).unwrap();
        let q = LatticeQuery::new(&lat, &m).unwrap();
        for &cid in &lat.level(1).unwrap().cell_ids {
            let bm = q.boundary_mass(cid, 1.0).unwrap();
            let mass = lat.cell_mass(&m, cid);
            assert!(bm <= mass + 1e-12);
        }
    }

    #[test]
    fn single_point_cell_small_eps_boundary_zero() {
        // two distant atoms: each level-2 cell is a single point whose
        // nearest foreign point is far beyond eps * l(Q)
        let m = DiscreteMeasure::new(
            1,
            vec![0.0, 0.0, 1.0, 0.0],
            vec![1.0, 1.0],
            1e-4,
            Provenance::Custom { tag: "pair".into() },
        )
        .unwrap();
        let lat = build_lattice(&m, 0, 2).unwrap();
        let lv = lat.level(2).unwrap();
        assert_eq!(lv.net.len(), 2);
        let q = LatticeQuery::new(&lat, &m).unwrap();
        let cid = lv.cell_ids[0];
        assert_eq!(q.boundary_mass(cid, 0.1).unwrap(), 0.0);
    }
}
