//! Weighted projection of a droop target onto a capability region.
//!
//! Each Q-sign cell is convex and can be written as vertical slices
//! `{(p, q) : p in [pa, pb], q_lo(p) <= q <= q_hi(p)}` with `q_lo` convex and
//! `q_hi` concave. For fixed `p` the best `q` is the target's `q0` clamped to
//! the slice, and the remaining one-dimensional objective is convex, so its
//! minimiser is found by bisecting on the sign of its derivative.

use serde::{Deserialize, Serialize};

use crate::capability::{Cell, ConstraintAtom, FeasibleRegion};

#[derive(Debug, Clone, Copy)]
pub struct ProjectionProblem<'a> {
    /// Droop target (kW, kvar).
    pub target: (f64, f64),
    /// (lambda_p, lambda_q)
    pub weights: (f64, f64),
    pub region: &'a FeasibleRegion,
    /// AC active power window (kW); must contain 0.
    pub p_bounds: (f64, f64),
}

impl ProjectionProblem<'_> {
    pub fn objective(&self, p: f64, q: f64) -> f64 {
        let (p0, q0) = self.target;
        let (wp, wq) = self.weights;
        wp * (p - p0) * (p - p0) + wq * (q - q0) * (q - q0)
    }

    /// Membership in the region intersected with the P window.
    pub fn is_feasible(&self, p: f64, q: f64) -> bool {
        let tol = crate::capability::MEMBERSHIP_TOL;
        p >= self.p_bounds.0 - tol && p <= self.p_bounds.1 + tol && self.region.contains(p, q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub p: f64,
    pub q: f64,
    pub objective: f64,
    /// False when the target was already feasible and returned as is.
    pub moved: bool,
}

pub fn project(problem: &ProjectionProblem<'_>) -> Projection {
    let (p0, q0) = problem.target;
    if problem.is_feasible(p0, q0) {
        return Projection { p: p0, q: q0, objective: 0.0, moved: false };
    }

    let upper = CellGeometry::new(problem, Cell::Upper).solve(problem);
    let lower = CellGeometry::new(problem, Cell::Lower).solve(problem);
    let (p, q) = if lower.2 < upper.2 - 1e-12 * upper.2.max(1.0) { (lower.0, lower.1) } else { (upper.0, upper.1) };
    Projection { p, q, objective: problem.objective(p, q), moved: true }
}

/// One convex cell with its atoms reduced to slice bounds.
struct CellGeometry {
    cell: Cell,
    p_lo: f64,
    p_hi: f64,
    q_cap: f64,
    radius: f64,
    caps: Vec<(f64, f64, f64)>,
}

impl CellGeometry {
    fn new(problem: &ProjectionProblem<'_>, cell: Cell) -> Self {
        let mut g = CellGeometry {
            cell,
            p_lo: problem.p_bounds.0,
            p_hi: problem.p_bounds.1,
            q_cap: f64::INFINITY,
            radius: f64::INFINITY,
            caps: Vec::new(),
        };
        for atom in problem.region.scaled_cell(cell) {
            match atom {
                ConstraintAtom::PMin(v) => g.p_lo = g.p_lo.max(v),
                ConstraintAtom::PMax(v) => g.p_hi = g.p_hi.min(v),
                ConstraintAtom::QMax(v) => g.q_cap = g.q_cap.min(v),
                ConstraintAtom::Disk { radius, .. } => g.radius = g.radius.min(radius),
                ConstraintAtom::ParabolaCap { c0, c1, c2 } => g.caps.push((c0, c1, c2)),
            }
        }
        if cell == Cell::Lower {
            g.q_cap = g.q_cap.min(0.0);
        }
        g.p_lo = g.p_lo.max(-g.radius);
        g.p_hi = g.p_hi.min(g.radius);
        g
    }

    fn half_chord(&self, p: f64) -> (f64, f64) {
        if self.radius.is_infinite() {
            return (f64::INFINITY, 0.0);
        }
        let h = (self.radius * self.radius - p * p).max(0.0).sqrt();
        (h, -p / h)
    }

    /// Upper slice bound and its slope.
    fn q_hi(&self, p: f64) -> (f64, f64) {
        let mut best = (self.q_cap, 0.0);
        for &(c0, c1, c2) in &self.caps {
            let v = c0 + c1 * p + c2 * p * p;
            if v < best.0 {
                best = (v, c1 + 2.0 * c2 * p);
            }
        }
        if self.cell == Cell::Upper {
            let (h, dh) = self.half_chord(p);
            if h < best.0 {
                best = (h, dh);
            }
        }
        best
    }

    /// Lower slice bound and its slope.
    fn q_lo(&self, p: f64) -> (f64, f64) {
        match self.cell {
            Cell::Upper => (0.0, 0.0),
            Cell::Lower => {
                let (h, dh) = self.half_chord(p);
                (-h, -dh)
            }
        }
    }

    fn slice_nonempty(&self, p: f64) -> bool {
        p >= self.p_lo && p <= self.p_hi && self.q_lo(p).0 <= self.q_hi(p).0
    }

    /// Best q on the slice at `p`, and dq/dp.
    fn best_q(&self, p: f64, q0: f64) -> (f64, f64) {
        let hi = self.q_hi(p);
        let lo = self.q_lo(p);
        if q0 > hi.0 {
            hi
        } else if q0 < lo.0 {
            lo
        } else {
            (q0, 0.0)
        }
    }

    /// Derivative of the reduced objective along the cell.
    fn reduced_slope(&self, p: f64, problem: &ProjectionProblem<'_>) -> f64 {
        let (p0, q0) = problem.target;
        let (wp, wq) = problem.weights;
        let (q, dq) = self.best_q(p, q0);
        let dq_term = if q == q0 || wq == 0.0 { 0.0 } else { 2.0 * wq * (q - q0) * dq };
        2.0 * wp * (p - p0) + dq_term
    }

    /// Returns `(p, q, objective)` of the cell optimum.
    fn solve(&self, problem: &ProjectionProblem<'_>) -> (f64, f64, f64) {
        // The slice is non-empty on an interval that contains p = 0.
        let pa = if self.slice_nonempty(self.p_lo) { self.p_lo } else { bisect(0.0, self.p_lo, |p| self.slice_nonempty(p)) };
        let pb = if self.slice_nonempty(self.p_hi) { self.p_hi } else { bisect(0.0, self.p_hi, |p| self.slice_nonempty(p)) };

        let slope = |p: f64| self.reduced_slope(p, problem);
        // Left and right ends of the minimising set; equal unless lambda_p is 0.
        let first_where = |pred: &dyn Fn(f64) -> bool| {
            if pred(pa) {
                pa
            } else if !pred(pb) {
                pb
            } else {
                bisect(pb, pa, pred)
            }
        };
        let left = first_where(&|p| slope(p) >= 0.0);
        let right = first_where(&|p| slope(p) > 0.0).max(left);

        let p = problem.target.0.clamp(left, right);
        let (q, _) = self.best_q(p, problem.target.1);
        (p, q, problem.objective(p, q))
    }
}

/// Bisects between a point where `pred` holds and one where it does not,
/// returning the last point found to satisfy `pred`.
fn bisect(mut good: f64, mut bad: f64, pred: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (good + bad);
        if mid == good || mid == bad {
            break;
        }
        if pred(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good
}
