//! Shared test oracles. Everything here recomputes spec quantities through
//! an independent route: plain loops and textbook algorithms, no reuse of
//! the library's accelerated paths.

#![allow(dead_code)]

use rieszlab::measure::DiscreteMeasure;

/// Plain-summation Riesz field: independent of the library's compensated
/// accumulation and treecode.
pub fn naive_riesz_field(m: &DiscreteMeasure, f: &[f64], delta: f64, x: &[f64]) -> Vec<f64> {
    let ambient = m.ambient_dim();
    let mut out = vec![0.0; ambient];
    for i in 0..m.len() {
        let p = m.point(i);
        let v: Vec<f64> = x.iter().zip(p).map(|(a, b)| a - b).collect();
        let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        let denom = r.max(delta);
        if denom == 0.0 {
            continue;
        }
        let s = f[i] * m.weight(i) * denom.powi(-(ambient as i32));
        for k in 0..ambient {
            out[k] += v[k] * s;
        }
    }
    out
}

/// Largest eigenvalue of a dense symmetric matrix: Householder reduction to
/// tridiagonal form followed by implicit-shift QL, eigenvalues only.
pub fn sym_eigen_max(a: &mut Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];
    tridiagonalize(a, &mut d, &mut e);
    ql_implicit(&mut d, &mut e);
    d.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn tridiagonalize(a: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = a.len();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = a[i][..=l].iter().map(|x| x.abs()).sum();
            if scale == 0.0 {
                e[i] = a[i][l];
            } else {
                for k in 0..=l {
                    a[i][k] /= scale;
                    h += a[i][k] * a[i][k];
                }
                let f = a[i][l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[i][l] = f - g;
                let mut ff = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[j][k] * a[i][k];
                    }
                    for k in (j + 1)..=l {
                        g += a[k][j] * a[i][k];
                    }
                    e[j] = g / h;
                    ff += e[j] * a[i][j];
                }
                let hh = ff / (h + h);
                for j in 0..=l {
                    let f = a[i][j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[j][k] -= f * e[k] + g * a[i][k];
                    }
                }
            }
        } else {
            e[i] = a[i][l];
        }
    }
    e[0] = 0.0;
    for i in 0..n {
        d[i] = a[i][i];
    }
}

fn ql_implicit(d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    if n == 0 {
        return;
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 64, "QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut early = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

/// Dense oracle for the operator norm of `R_{mu,delta}` in `L^2(mu)`: form
/// the similarity-transformed blocks `B_c[i][j] = sqrt(w_i) K_c(x_i - x_j)
/// sqrt(w_j)`, assemble `M = sum_c B_c^T B_c`, and return
/// `sqrt(lambda_max(M))`.
pub fn dense_op_norm(m: &DiscreteMeasure, delta: f64) -> f64 {
    let n = m.len();
    let ambient = m.ambient_dim();
    let sw: Vec<f64> = (0..n).map(|i| m.weight(i).sqrt()).collect();
    let mut blocks: Vec<Vec<Vec<f64>>> = vec![vec![vec![0.0; n]; n]; ambient];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let pi = m.point(i);
            let pj = m.point(j);
            let v: Vec<f64> = pi.iter().zip(pj).map(|(a, b)| a - b).collect();
            let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            let denom = r.max(delta);
            let s = sw[i] * sw[j] * denom.powi(-(ambient as i32));
            for (c, bc) in blocks.iter_mut().enumerate() {
                bc[i][j] = v[c] * s;
            }
        }
    }
    let mut gram = vec![vec![0.0f64; n]; n];
    for bc in &blocks {
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for row in bc.iter() {
                    s += row[i] * row[j];
                }
                gram[i][j] += s;
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            gram[i][j] = gram[j][i];
        }
    }
    sym_eigen_max(&mut gram).max(0.0).sqrt()
}

/// Full-pairwise-constraint analytic flatness oracle: same LP as the
/// library's sparse path but with every Lipschitz pair present, solved on
/// the node set around `(z, l, a_factor)` for the horizontal plane through
/// `z`. Node count must stay small. Written for d = 1.
pub fn full_lp_analytic_defect(m: &DiscreteMeasure, z: &[f64], l: f64, a_factor: f64) -> f64 {
    use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
    let d = m.d();
    assert_eq!(d, 1, "oracle written for the d = 1 case");
    let window = a_factor * l;
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    let mut coords: Vec<Vec<f64>> = Vec::new();
    let mut supp_w: Vec<f64> = Vec::new();
    for i in 0..m.len() {
        let p = m.point(i);
        if dist(p, z) < window {
            coords.push(p.to_vec());
            supp_w.push(m.weight(i));
        }
    }
    let n_supp = coords.len();
    let step = m.mesh();
    let mut grid_mass = Vec::new();
    let reach = (window / step).floor() as i64;
    for k in -reach..=reach {
        let u = vec![z[0] + k as f64 * step, z[1]];
        if dist(&u, z) < window {
            coords.push(u);
            grid_mass.push(step);
        }
    }
    let n_nodes = coords.len();
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<minilp::Variable> = (0..n_nodes)
        .map(|i| {
            let cap = (window - dist(&coords[i], z)).max(0.0) / l;
            let obj = if i < n_supp { supp_w[i] } else { 0.0 };
            problem.add_var(obj, (-cap, cap))
        })
        .collect();
    for a in 0..n_nodes {
        for b in (a + 1)..n_nodes {
            let bound = dist(&coords[a], &coords[b]) / l;
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
    let mut mz = LinearExpr::empty();
    for (gi, &gm) in grid_mass.iter().enumerate() {
        mz.add(vars[n_supp + gi], gm);
    }
    problem.add_constraint(mz, ComparisonOp::Eq, 0.0);
    let solution = problem.solve().expect("oracle LP solves");
    solution.objective().max(0.0) / l.powi(d as i32)
}

/// Exhaustive two-sided Hausdorff defect against the horizontal plane
/// through `z`: plain double loops over support points and a plane grid.
pub fn hausdorff_defect_horizontal(m: &DiscreteMeasure, z: &[f64], l: f64, a_factor: f64) -> f64 {
    assert_eq!(m.d(), 1);
    let window = a_factor * l;
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    let mut sup_to_plane = 0.0f64;
    for i in 0..m.len() {
        let p = m.point(i);
        if dist(p, z) < window {
            sup_to_plane = sup_to_plane.max((p[1] - z[1]).abs());
        }
    }
    let step = m.mesh().min(l / 4.0);
    let reach = (window / step).floor() as i64;
    let win = m.faithful_window();
    let mut plane_to_supp = 0.0f64;
    for k in -reach..=reach {
        let u = [z[0] + k as f64 * step, z[1]];
        if dist(&u, z) >= window {
            continue;
        }
        let inside = win.iter().enumerate().all(|(c, w)| match w {
            None => true,
            Some((lo, hi)) => u[c] >= *lo - 1e-12 && u[c] <= *hi + 1e-12,
        });
        if !inside {
            continue;
        }
        let mut best = f64::INFINITY;
        for i in 0..m.len() {
            best = best.min(dist(m.point(i), &u));
        }
        plane_to_supp = plane_to_supp.max(best);
    }
    sup_to_plane.max(plane_to_supp) / l
}
