//! χ = 1 contours of the linear model and the Born–Markov comparison
//! contour.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AxisRange, SweepError};
use crate::coefficients::{bmme_coefficients, ModelParams};
use crate::phase_space::stationary_diagnostics;

/// Points in (τ, Λ).
pub type Polyline = Vec<(f64, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryResult {
    pub g: f64,
    pub tau: Vec<f64>,
    pub lam: Vec<f64>,
    pub lme: Vec<Polyline>,
    pub bmme: Vec<Polyline>,
    /// Hausdorff distance between the two contours in grid steps; `None`
    /// when either contour is empty.
    pub hausdorff_grid_steps: Option<f64>,
    pub notes: Vec<String>,
}

/// Edge of the grid a contour point lies on: (vertical?, i, j). Horizontal
/// edges join (i, j)–(i+1, j), vertical ones (i, j)–(i, j+1).
type EdgeId = (bool, usize, usize);

/// Contour lines of `field` at level zero, in fractional index coordinates
/// (i along the first axis, j along the second). Cells containing a
/// non-finite value are skipped.
pub fn marching_squares(field: &[Vec<f64>]) -> Vec<Vec<(f64, f64)>> {
    let ni = field.len();
    let nj = field.first().map_or(0, |r| r.len());
    if ni < 2 || nj < 2 {
        return Vec::new();
    }
    let v = |i: usize, j: usize| field[i][j];
    let point = |e: EdgeId| -> (f64, f64) {
        let (vertical, i, j) = e;
        let (a, b) = if vertical { (v(i, j), v(i, j + 1)) } else { (v(i, j), v(i + 1, j)) };
        let t = a / (a - b);
        if vertical {
            (i as f64, j as f64 + t)
        } else {
            (i as f64 + t, j as f64)
        }
    };
    let mut segments: Vec<(EdgeId, EdgeId)> = Vec::new();
    for i in 0..ni - 1 {
        for j in 0..nj - 1 {
            let c = [v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)];
            if !c.iter().all(|x| x.is_finite()) {
                continue;
            }
            let above = c.map(|x| x >= 0.0);
            // edges in cyclic order: bottom, right, top, left
            let edges: [EdgeId; 4] = [(false, i, j), (true, i + 1, j), (false, i, j + 1), (true, i, j)];
            let crossed: Vec<EdgeId> = (0..4).filter(|&k| above[k] != above[(k + 1) % 4]).map(|k| edges[k]).collect();
            match crossed.len() {
                2 => segments.push((crossed[0], crossed[1])),
                4 => {
                    // saddle: the centre value decides which corners connect
                    let centre_above = c.iter().sum::<f64>() >= 0.0;
                    if centre_above == above[0] {
                        segments.push((edges[0], edges[1]));
                        segments.push((edges[2], edges[3]));
                    } else {
                        segments.push((edges[3], edges[0]));
                        segments.push((edges[1], edges[2]));
                    }
                }
                _ => {}
            }
        }
    }
    chain(&segments).into_iter().map(|ids| ids.into_iter().map(point).collect()).collect()
}

fn chain(segments: &[(EdgeId, EdgeId)]) -> Vec<Vec<EdgeId>> {
    let mut adj: BTreeMap<EdgeId, Vec<usize>> = BTreeMap::new();
    for (k, (a, b)) in segments.iter().enumerate() {
        adj.entry(*a).or_default().push(k);
        adj.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    // open chains start at endpoints of degree one, then closed loops
    let starts: Vec<EdgeId> = adj.iter().filter(|(_, s)| s.len() == 1).map(|(e, _)| *e).chain(adj.keys().copied()).collect();
    for start in starts {
        let mut line = vec![start];
        let mut at = start;
        while let Some(&k) = adj[&at].iter().find(|&&k| !used[k]) {
            used[k] = true;
            let (a, b) = segments[k];
            at = if a == at { b } else { a };
            line.push(at);
        }
        if line.len() > 1 {
            lines.push(line);
        }
    }
    lines
}

/// Symmetric Hausdorff distance between two sets of polylines, after
/// densifying every segment to spacing ≤ `spacing`.
pub fn hausdorff_distance(a: &[Vec<(f64, f64)>], b: &[Vec<(f64, f64)>], spacing: f64) -> Option<f64> {
    let pa = densify(a, spacing);
    let pb = densify(b, spacing);
    if pa.is_empty() || pb.is_empty() {
        return None;
    }
    let directed = |from: &[(f64, f64)], to: &[(f64, f64)]| {
        from.iter()
            .map(|p| to.iter().map(|q| (p.0 - q.0).hypot(p.1 - q.1)).fold(f64::INFINITY, f64::min))
            .fold(0.0f64, f64::max)
    };
    Some(directed(&pa, &pb).max(directed(&pb, &pa)))
}

fn densify(lines: &[Vec<(f64, f64)>], spacing: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for line in lines {
        if let Some(first) = line.first() {
            out.push(*first);
        }
        for w in line.windows(2) {
            let (p, q) = (w[0], w[1]);
            let n = ((p.0 - q.0).hypot(p.1 - q.1) / spacing).ceil().max(1.0) as usize;
            out.extend((1..=n).map(|k| {
                let t = k as f64 / n as f64;
                (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
            }));
        }
    }
    out
}

fn to_physical(lines: &[Vec<(f64, f64)>], tau: &[f64], lam: &[f64]) -> Vec<Polyline> {
    let interp = |axis: &[f64], x: f64| {
        let i = (x.floor() as usize).min(axis.len() - 2);
        let t = x - i as f64;
        (axis[i].ln() + t * (axis[i + 1].ln() - axis[i].ln())).exp()
    };
    lines.iter().map(|l| l.iter().map(|&(i, j)| (interp(tau, i), interp(lam, j))).collect()).collect()
}

/// χ = 1 contour of the stationary state at damping `g`, and the g-free
/// Born–Markov boundary δ_x = δ_p (the zero set of D_XP), on a τ×Λ grid.
/// Distances are measured in index space, i.e. in grid steps of the log
/// axes.
pub fn cooling_boundary(g: f64, tau_range: &AxisRange, lam_range: &AxisRange) -> Result<BoundaryResult, SweepError> {
    tau_range.validate("tau_range")?;
    lam_range.validate("lam_range")?;
    if tau_range.n < 2 || lam_range.n < 2 {
        return Err(SweepError::config("tau_range.n", "boundary grids need at least 2 points per axis"));
    }
    if !(g.is_finite() && g > 0.0) {
        return Err(SweepError::config("g", "must be positive and finite"));
    }
    let tau = tau_range.values();
    let lam = lam_range.values();
    let mut lme_field = vec![vec![f64::NAN; lam.len()]; tau.len()];
    let mut bmme_field = vec![vec![f64::NAN; lam.len()]; tau.len()];
    for (i, &t) in tau.iter().enumerate() {
        for (j, &l) in lam.iter().enumerate() {
            let p = ModelParams::new(g, l, t)?;
            if let Ok((_, d)) = stationary_diagnostics(&p) {
                lme_field[i][j] = d.chi - 1.0;
            }
            let b = bmme_coefficients(&p)?;
            bmme_field[i][j] = b.d_p / b.c_p;
        }
    }
    let lme_idx = marching_squares(&lme_field);
    let bmme_idx = marching_squares(&bmme_field);
    let mut notes = Vec::new();
    if lme_idx.is_empty() {
        notes.push(format!("no chi = 1 crossing of the Lindblad stationary state at g = {g} on this grid"));
    }
    if bmme_idx.is_empty() {
        notes.push("no delta_x = delta_p crossing of the Born-Markov stationary state on this grid".to_string());
    }
    let hausdorff_grid_steps = hausdorff_distance(&lme_idx, &bmme_idx, 0.1);
    Ok(BoundaryResult {
        g,
        lme: to_physical(&lme_idx, &tau, &lam),
        bmme: to_physical(&bmme_idx, &tau, &lam),
        tau,
        lam,
        hausdorff_grid_steps,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_line_contour() {
        // f = i − 1.5 crosses between columns 1 and 2
        let field: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64 - 1.5; 5]).collect();
        let lines = marching_squares(&field);
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].len(), 5);
        assert!(lines[0].iter().all(|p| (p.0 - 1.5).abs() < 1e-12));
    }

    #[test]
    fn closed_loop() {
        let field: Vec<Vec<f64>> = (0..9)
            .map(|i| (0..9).map(|j| 9.0 - ((i as f64 - 4.0).powi(2) + (j as f64 - 4.0).powi(2))).collect())
            .collect();
        let lines = marching_squares(&field);
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].first(), lines[0].last());
        for p in &lines[0] {
            let r = ((p.0 - 4.0).powi(2) + (p.1 - 4.0).powi(2)).sqrt();
            assert!((r - 3.0).abs() < 0.2, "{r}");
        }
    }

    #[test]
    fn empty_field_has_no_contour() {
        let field = vec![vec![1.0; 3]; 3];
        assert!(marching_squares(&field).is_empty());
        assert_eq!(hausdorff_distance(&[], &[vec![(0.0, 0.0)]], 0.1), None);
    }

    #[test]
    fn hausdorff_of_parallel_lines() {
        let a = vec![vec![(0.0, 0.0), (0.0, 10.0)]];
        let b = vec![vec![(2.0, 0.0), (2.0, 10.0)]];
        let d = hausdorff_distance(&a, &b, 0.1).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn boundaries_differ_at_strong_damping() {
        let r = cooling_boundary(0.8, &AxisRange::log(0.01, 10.0, 30), &AxisRange::log(1.0, 100.0, 30)).unwrap();
        assert!(!r.bmme.is_empty());
        assert!(!r.lme.is_empty(), "{:?}", r.notes);
        assert!(r.hausdorff_grid_steps.unwrap() > 1.0);
    }
}
