//! Eigenvalue surfaces over 2D parameter slices.
//!
//! A [`GridSpec`] discretizes a plane through parameter space; sampling it
//! yields the four real surfaces `Re E_+-`, `Im E_+-` and the gap magnitude,
//! with labels made consistent across the grid by row-major branch
//! continuation. Degeneracy level sets (where the imaginary or real parts of
//! the two eigenvalues coincide) come out of a marching-squares pass over the
//! labeled difference fields, and the minimum-gap location distinguishes an
//! exceptional point (gap ~ 0, defective) from an avoided crossing with a
//! small but finite gap.

use crate::dynamics::branch_continue_lenient;
use crate::error::{Error, Result};
use crate::float::{Real, C};
use crate::model::{
    eigensystem, eigenvalue_gap, Eigensystem, ParamAxis, ParameterPoint, PlaneSpec,
    EP_GAP_THRESHOLD,
};
use crate::trajectory::Loop;

/// Discretization of a 2D parameter slice.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<T> {
    pub plane: PlaneSpec<T>,
    pub x_range: (T, T),
    pub y_range: (T, T),
    pub nx: usize,
    pub ny: usize,
}

impl<T: Real> GridSpec<T> {
    pub fn new(
        plane: PlaneSpec<T>,
        x_range: (T, T),
        y_range: (T, T),
        nx: usize,
        ny: usize,
    ) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2 samples per axis".into()));
        }
        if !(x_range.1 > x_range.0) || !(y_range.1 > y_range.0) {
            return Err(Error::InvalidParameter("grid ranges must be non-degenerate".into()));
        }
        Ok(Self { plane, x_range, y_range, nx, ny })
    }

    /// Node coordinate along x; endpoints land exactly on the range bounds.
    #[inline]
    pub fn x_at(&self, i: usize) -> T {
        let f = T::from_usize(i).unwrap() / T::from_usize(self.nx - 1).unwrap();
        self.x_range.0 + (self.x_range.1 - self.x_range.0) * f
    }

    #[inline]
    pub fn y_at(&self, j: usize) -> T {
        let f = T::from_usize(j).unwrap() / T::from_usize(self.ny - 1).unwrap();
        self.y_range.0 + (self.y_range.1 - self.y_range.0) * f
    }

    #[inline]
    pub fn point_at_node(&self, i: usize, j: usize) -> ParameterPoint<T> {
        self.plane.point_at(self.x_at(i), self.y_at(j))
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
}

/// Eigenvalue surfaces sampled on a grid, row-major with `x` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSample<T> {
    pub grid: GridSpec<T>,
    pub re_e_plus: Vec<T>,
    pub im_e_plus: Vec<T>,
    pub re_e_minus: Vec<T>,
    pub im_e_minus: Vec<T>,
    pub gap_abs: Vec<T>,
}

impl<T: Real> SurfaceSample<T> {
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        self.grid.idx(i, j)
    }

    /// Long-format CSV: one row per node.
    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut out = String::with_capacity(g.nx * g.ny * 120);
        out.push_str("x,y,reE_plus,imE_plus,reE_minus,imE_minus,gap\n");
        let f = |v: T| format!("{:.16e}", v.to_f64_lossy());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.idx(i, j);
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    f(g.x_at(i)),
                    f(g.y_at(j)),
                    f(self.re_e_plus[k]),
                    f(self.im_e_plus[k]),
                    f(self.re_e_minus[k]),
                    f(self.im_e_minus[k]),
                    f(self.gap_abs[k]),
                ));
            }
        }
        out
    }

    /// Compact binary container: a one-line JSON header (axis names, ranges,
    /// counts, fixed parameters) followed by the five surfaces as row-major
    /// little-endian f64.
    pub fn to_binary(&self) -> Vec<u8> {
        let g = &self.grid;
        let base = &g.plane.base;
        let kappa_rule = match g.plane.kappa_rule {
            crate::model::KappaRule::Independent => "\"independent\"".to_string(),
            crate::model::KappaRule::TiedToGamma { alpha } => {
                format!("{{\"tied_alpha\":{:.16e}}}", alpha.to_f64_lossy())
            }
        };
        let header = format!(
            "{{\"format\":\"jcep-grid-v1\",\"axis_x\":\"{}\",\"axis_y\":\"{}\",\
             \"x_range\":[{:.16e},{:.16e}],\"y_range\":[{:.16e},{:.16e}],\
             \"nx\":{},\"ny\":{},\"fixed\":{{\"omega_a\":{:.16e},\"delta\":{:.16e},\
             \"g\":{:.16e},\"gamma\":{:.16e},\"kappa\":{:.16e}}},\"kappa_rule\":{},\
             \"layers\":[\"reE_plus\",\"imE_plus\",\"reE_minus\",\"imE_minus\",\"gap\"]}}\n",
            g.plane.axis_x.name(),
            g.plane.axis_y.name(),
            g.x_range.0.to_f64_lossy(),
            g.x_range.1.to_f64_lossy(),
            g.y_range.0.to_f64_lossy(),
            g.y_range.1.to_f64_lossy(),
            g.nx,
            g.ny,
            base.omega_a.to_f64_lossy(),
            base.delta.to_f64_lossy(),
            base.g.to_f64_lossy(),
            base.gamma.to_f64_lossy(),
            base.kappa.to_f64_lossy(),
            kappa_rule,
        );
        let mut out = header.into_bytes();
        for layer in [
            &self.re_e_plus,
            &self.im_e_plus,
            &self.re_e_minus,
            &self.im_e_minus,
            &self.gap_abs,
        ] {
            for v in layer.iter() {
                out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
            }
        }
        out
    }
}

/// Samples the eigenvalue surfaces over the grid.
///
/// Labels: the lowest corner node is ordered by ascending real part (`+` is
/// the smaller `Re E`, ties by `Im E`); each node then continues from its left
/// neighbor, and each row start continues from the first node of the previous
/// row. Degenerate nodes record the coalesced value `trace/2` for both
/// branches with gap 0 and do not disturb the continuation state.
pub fn sample_surface<T: Real>(grid: &GridSpec<T>) -> SurfaceSample<T> {
    let n = grid.nx * grid.ny;
    let mut out = SurfaceSample {
        grid: grid.clone(),
        re_e_plus: vec![T::zero(); n],
        im_e_plus: vec![T::zero(); n],
        re_e_minus: vec![T::zero(); n],
        im_e_minus: vec![T::zero(); n],
        gap_abs: vec![T::zero(); n],
    };
    // Continuation state: eigensystem of the left neighbor within a row, and
    // of the first healthy node of the previous row for row starts.
    let mut row_start: Option<Eigensystem<T>> = None;
    for j in 0..grid.ny {
        let mut prev: Option<Eigensystem<T>> = row_start.clone();
        for i in 0..grid.nx {
            let p = grid.point_at_node(i, j);
            let k = grid.idx(i, j);
            match eigensystem(&p) {
                Ok(raw) => {
                    let es = match &prev {
                        None => seed_labels(raw),
                        Some(prior) => branch_continue_lenient(prior, &raw).eigensystem,
                    };
                    out.re_e_plus[k] = es.value_plus.re;
                    out.im_e_plus[k] = es.value_plus.im;
                    out.re_e_minus[k] = es.value_minus.re;
                    out.im_e_minus[k] = es.value_minus.im;
                    out.gap_abs[k] = es.gap.norm();
                    if i == 0 {
                        row_start = Some(es.clone());
                    }
                    prev = Some(es);
                }
                Err(_) => {
                    // Coalesced: both eigenvalues at half the trace, gap 0.
                    let h = crate::model::build_hamiltonian(&p);
                    let half_trace = h.trace() * C::new(T::lit(0.5), T::zero());
                    out.re_e_plus[k] = half_trace.re;
                    out.im_e_plus[k] = half_trace.im;
                    out.re_e_minus[k] = half_trace.re;
                    out.im_e_minus[k] = half_trace.im;
                    out.gap_abs[k] = T::zero();
                }
            }
        }
    }
    out
}

fn seed_labels<T: Real>(raw: Eigensystem<T>) -> Eigensystem<T> {
    let a = (raw.value_plus.re, raw.value_plus.im);
    let b = (raw.value_minus.re, raw.value_minus.im);
    if b < a {
        raw.swapped()
    } else {
        raw
    }
}

/// Which eigenvalue components a level set equates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelSetKind {
    /// `Im E_+ = Im E_-` (diabolic line).
    DLine,
    /// `Re E_+ = Re E_-`.
    LLine,
}

impl LevelSetKind {
    pub fn name(self) -> &'static str {
        match self {
            LevelSetKind::DLine => "D",
            LevelSetKind::LLine => "L",
        }
    }
}

/// Polylines in the grid plane along which the chosen components coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet<T> {
    pub kind: LevelSetKind,
    pub segments: Vec<Vec<(T, T)>>,
}

impl<T: Real> LevelSet<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("segment,x,y\n");
        let f = |v: T| format!("{:.16e}", v.to_f64_lossy());
        for (s, seg) in self.segments.iter().enumerate() {
            for (x, y) in seg {
                out.push_str(&format!("{},{},{}\n", s, f(*x), f(*y)));
            }
        }
        out
    }
}

/// Extracts the zero contour of `Im(E_+ - E_-)` or `Re(E_+ - E_-)` by
/// marching squares with one Newton refinement per edge crossing.
pub fn degeneracy_lines<T: Real>(
    sample: &SurfaceSample<T>,
    kind: LevelSetKind,
) -> Result<LevelSet<T>> {
    let g = &sample.grid;
    let field = |i: usize, j: usize| -> T {
        let k = g.idx(i, j);
        match kind {
            LevelSetKind::DLine => sample.im_e_plus[k] - sample.im_e_minus[k],
            LevelSetKind::LLine => sample.re_e_plus[k] - sample.re_e_minus[k],
        }
    };

    // Crossing location on an edge, refined against a fresh evaluation of the
    // label-free residual |Im Delta_E| (or |Re Delta_E|), with the sign taken
    // from the sampled field's linear model along the edge.
    let refine = |x0: T, y0: T, x1: T, y1: T, f0: T, f1: T| -> (T, T) {
        let denom = f0 - f1;
        let mut u = if denom != T::zero() { f0 / denom } else { T::lit(0.5) };
        u = u.max(T::zero()).min(T::one());
        let eval = |u: T| -> T {
            let x = x0 + (x1 - x0) * u;
            let y = y0 + (y1 - y0) * u;
            let gap = eigenvalue_gap(&g.plane.point_at(x, y));
            let mag = match kind {
                LevelSetKind::DLine => gap.im.abs(),
                LevelSetKind::LLine => gap.re.abs(),
            };
            // Sign from the linear model along the edge.
            let lin = f0 + (f1 - f0) * u;
            if lin < T::zero() {
                -mag
            } else {
                mag
            }
        };
        let h = T::lit(1e-3);
        let fu = eval(u);
        if fu != T::zero() {
            let up = (u + h).min(T::one());
            let um = (u - h).max(T::zero());
            let d = (eval(up) - eval(um)) / (up - um);
            if d != T::zero() {
                let un = u - fu / d;
                if un >= T::zero() && un <= T::one() && eval(un).abs() < fu.abs() {
                    u = un;
                }
            }
        }
        (x0 + (x1 - x0) * u, y0 + (y1 - y0) * u)
    };

    // Edge keys for exact segment stitching: (i, j, horizontal?).
    #[derive(Clone, Copy, PartialEq, Eq, Hash)]
    struct EdgeKey(usize, usize, bool);

    use std::collections::HashMap;
    let mut vertices: HashMap<EdgeKey, (T, T)> = HashMap::new();
    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();

    let vertex_on = |key: EdgeKey, vertices: &mut HashMap<EdgeKey, (T, T)>| -> (T, T) {
        if let Some(v) = vertices.get(&key) {
            return *v;
        }
        let EdgeKey(i, j, horizontal) = key;
        let (x0, y0) = (g.x_at(i), g.y_at(j));
        let (i1, j1) = if horizontal { (i + 1, j) } else { (i, j + 1) };
        let (x1, y1) = (g.x_at(i1), g.y_at(j1));
        let v = refine(x0, y0, x1, y1, field(i, j), field(i1, j1));
        vertices.insert(key, v);
        v
    };

    // Treat exact zeros as positive so contours through on-node zeros stay
    // well-defined.
    let sign = |v: T| v < T::zero();
    for j in 0..g.ny - 1 {
        for i in 0..g.nx - 1 {
            let s00 = sign(field(i, j));
            let s10 = sign(field(i + 1, j));
            let s01 = sign(field(i, j + 1));
            let s11 = sign(field(i + 1, j + 1));
            let case = (s00 as u8) | (s10 as u8) << 1 | (s11 as u8) << 2 | (s01 as u8) << 3;
            if case == 0 || case == 15 {
                continue;
            }
            let bottom = EdgeKey(i, j, true);
            let top = EdgeKey(i, j + 1, true);
            let left = EdgeKey(i, j, false);
            let right = EdgeKey(i + 1, j, false);
            let emit = |a: EdgeKey, b: EdgeKey, segments: &mut Vec<(EdgeKey, EdgeKey)>| {
                segments.push((a, b));
            };
            match case {
                1 | 14 => emit(left, bottom, &mut segments),
                2 | 13 => emit(bottom, right, &mut segments),
                4 | 11 => emit(right, top, &mut segments),
                8 | 7 => emit(top, left, &mut segments),
                3 | 12 => emit(left, right, &mut segments),
                6 | 9 => emit(bottom, top, &mut segments),
                5 | 10 => {
                    // Saddle: disambiguate with the cell-center average.
                    let center = (field(i, j) + field(i + 1, j) + field(i, j + 1)
                        + field(i + 1, j + 1))
                        * T::lit(0.25);
                    let center_neg = center < T::zero();
                    if (case == 5) == center_neg {
                        emit(left, bottom, &mut segments);
                        emit(right, top, &mut segments);
                    } else {
                        emit(left, top, &mut segments);
                        emit(right, bottom, &mut segments);
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    if segments.is_empty() {
        return Err(Error::EmptyLevelSet);
    }

    // Chain segments into polylines via shared edge keys.
    let mut adjacency: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (s, (a, b)) in segments.iter().enumerate() {
        adjacency.entry(*a).or_default().push(s);
        adjacency.entry(*b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a0, b0) = segments[start];
        let mut chain = vec![a0, b0];
        // Extend forward from the tail, then backward from the head.
        for forward in [true, false] {
            loop {
                let tip = if forward { *chain.last().unwrap() } else { chain[0] };
                let next = adjacency
                    .get(&tip)
                    .and_then(|ss| ss.iter().find(|s| !used[**s]).copied());
                match next {
                    Some(s) => {
                        used[s] = true;
                        let (a, b) = segments[s];
                        let other = if a == tip { b } else { a };
                        if forward {
                            chain.push(other);
                        } else {
                            chain.insert(0, other);
                        }
                    }
                    None => break,
                }
            }
        }
        polylines.push(
            chain
                .into_iter()
                .map(|k| vertex_on(k, &mut vertices))
                .collect::<Vec<_>>(),
        );
    }

    Ok(LevelSet { kind, segments: polylines })
}

/// Minimum-gap location on a sampled grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinGapReport<T> {
    /// Refined plane coordinates of the minimum.
    pub point: (T, T),
    /// Gap magnitude re-evaluated at the refined point.
    pub gap: T,
    /// True iff the refined gap is below `1e-10 * omega_a`.
    pub is_ep: bool,
    /// The grid node the refinement started from.
    pub grid_node: (usize, usize),
}

/// Finds the grid argmin of the gap and refines it with one parabolic step
/// per axis on the squared gap, re-evaluating the gap at the refined point.
pub fn locate_min_gap<T: Real>(sample: &SurfaceSample<T>) -> MinGapReport<T> {
    let g = &sample.grid;
    let mut best = (T::infinity(), 0usize, 0usize);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let v = sample.gap_abs[g.idx(i, j)];
            if v < best.0 {
                best = (v, i, j);
            }
        }
    }
    let (_, bi, bj) = best;
    let sq = |i: usize, j: usize| {
        let v = sample.gap_abs[g.idx(i, j)];
        v * v
    };
    let refine_axis = |c0: T, cm: T, cp: T, h: T| -> T {
        // Parabolic vertex through (−h, cm), (0, c0), (+h, cp).
        let denom = cm - c0 - c0 + cp;
        if denom > T::zero() {
            let off = (cm - cp) / (denom + denom) * h;
            off.max(-h).min(h)
        } else {
            T::zero()
        }
    };
    let hx = g.x_at(1) - g.x_at(0);
    let hy = g.y_at(1) - g.y_at(0);
    let dx = if bi > 0 && bi + 1 < g.nx {
        refine_axis(sq(bi, bj), sq(bi - 1, bj), sq(bi + 1, bj), hx)
    } else {
        T::zero()
    };
    let dy = if bj > 0 && bj + 1 < g.ny {
        refine_axis(sq(bi, bj), sq(bi, bj - 1), sq(bi, bj + 1), hy)
    } else {
        T::zero()
    };
    let x = g.x_at(bi) + dx;
    let y = g.y_at(bj) + dy;
    let gap = eigenvalue_gap(&g.plane.point_at(x, y)).norm();
    MinGapReport {
        point: (x, y),
        gap,
        is_ep: gap < T::lit(EP_GAP_THRESHOLD) * g.plane.base.omega_a,
        grid_node: (bi, bj),
    }
}

/// A loop projected onto a grid plane with branch-continued eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopProjection<T> {
    pub points: Vec<ProjectedPoint<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint<T> {
    pub t: T,
    pub x: T,
    pub y: T,
    pub e_plus: C<T>,
    pub e_minus: C<T>,
}

impl<T: Real> LoopProjection<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("t,x,y,reE_plus,imE_plus,reE_minus,imE_minus\n");
        let f = |v: T| format!("{:.16e}", v.to_f64_lossy());
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                f(p.t),
                f(p.x),
                f(p.y),
                f(p.e_plus.re),
                f(p.e_plus.im),
                f(p.e_minus.re),
                f(p.e_minus.im),
            ));
        }
        out
    }
}

/// Samples a loop over one geometric period and attaches branch-continued
/// eigenvalues, for overlay on the corresponding surface plot.
///
/// Errors with [`Error::PlaneMismatch`] when the loop moves any parameter the
/// grid plane does not span (fixed values must match to `1e-12`).
pub fn project_loop<T: Real>(
    plane_grid: &GridSpec<T>,
    lp: &Loop<T>,
    n_samples: usize,
) -> Result<LoopProjection<T>> {
    let plane = &plane_grid.plane;
    let component = |p: &ParameterPoint<T>, axis: ParamAxis| match axis {
        ParamAxis::Delta => p.delta,
        ParamAxis::G => p.g,
        ParamAxis::Gamma => p.gamma,
        ParamAxis::Kappa => p.kappa,
    };
    let tol = T::lit(1e-12);
    let n = n_samples.max(2);
    let span = lp.geometric_period();
    let mut points = Vec::with_capacity(n + 1);
    let mut prev: Option<Eigensystem<T>> = None;
    for k in 0..=n {
        let t = span * T::from_usize(k).unwrap() / T::from_usize(n).unwrap();
        let p = lp.evaluate(t);
        let x = component(&p, plane.axis_x);
        let y = component(&p, plane.axis_y);
        let assembled = plane.point_at(x, y);
        for (name, a, b) in [
            ("omega_a", p.omega_a, assembled.omega_a),
            ("delta", p.delta, assembled.delta),
            ("g", p.g, assembled.g),
            ("gamma", p.gamma, assembled.gamma),
            ("kappa", p.kappa, assembled.kappa),
        ] {
            if (a - b).abs() > tol {
                return Err(Error::PlaneMismatch(format!(
                    "loop parameter {name} = {} differs from the grid plane value {}",
                    a, b
                )));
            }
        }
        let (e_plus, e_minus, es) = match eigensystem(&p) {
            Ok(raw) => {
                let es = match &prev {
                    None => seed_labels(raw),
                    Some(prior) => branch_continue_lenient(prior, &raw).eigensystem,
                };
                (es.value_plus, es.value_minus, Some(es))
            }
            Err(_) => {
                let h = crate::model::build_hamiltonian(&p);
                let half_trace = h.trace() * C::new(T::lit(0.5), T::zero());
                (half_trace, half_trace, None)
            }
        };
        if let Some(es) = es {
            prev = Some(es);
        }
        points.push(ProjectedPoint { t, x, y, e_plus, e_minus });
    }
    Ok(LoopProjection { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{KappaRule, ParamAxis, ParameterPoint, PlaneSpec};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn base() -> ParameterPoint<f64> {
        ParameterPoint::new(1.0, 0.0, 0.0, 0.0, 0.0).unwrap()
    }

    fn symmetric_slice_grid(nx: usize, ny: usize) -> GridSpec<f64> {
        // The (g, gamma) slice with delta = 0 and kappa = -gamma.
        let plane = PlaneSpec::new(
            base(),
            ParamAxis::G,
            ParamAxis::Gamma,
            KappaRule::TiedToGamma { alpha: -1.0 },
        )
        .unwrap();
        GridSpec::new(plane, (-0.25, 0.25), (0.0, 0.2), nx, ny).unwrap()
    }

    fn modulated_slice_grid(nx: usize, ny: usize) -> GridSpec<f64> {
        // The (gamma, delta) slice with g = 0.1 and kappa = -gamma.
        let b = ParameterPoint::new(1.0, 0.0, 0.1, 0.0, 0.0).unwrap();
        let plane = PlaneSpec::new(
            b,
            ParamAxis::Gamma,
            ParamAxis::Delta,
            KappaRule::TiedToGamma { alpha: -1.0 },
        )
        .unwrap();
        GridSpec::new(plane, (0.0, 0.1), (-0.05, 0.05), nx, ny).unwrap()
    }

    #[test]
    fn surface_shapes_and_gap_consistency() {
        let grid = symmetric_slice_grid(41, 41);
        let s = sample_surface(&grid);
        assert_eq!(s.gap_abs.len(), 41 * 41);
        for j in 0..41 {
            for i in 0..41 {
                let k = s.idx(i, j);
                let diff = C::new(
                    s.re_e_plus[k] - s.re_e_minus[k],
                    s.im_e_plus[k] - s.im_e_minus[k],
                );
                assert_abs_diff_eq!(diff.norm(), s.gap_abs[k], epsilon = 1e-12);
                assert!(s.gap_abs[k] >= 0.0);
            }
        }
    }

    #[test]
    fn symmetric_slice_has_real_or_imaginary_gap() {
        // With delta = 0 and kappa = -gamma the squared gap is real, so at
        // every node either the real parts or the imaginary parts coincide.
        let grid = symmetric_slice_grid(81, 81);
        let s = sample_surface(&grid);
        for k in 0..s.gap_abs.len() {
            let re_eq = (s.re_e_plus[k] - s.re_e_minus[k]).abs() < 1e-10;
            let im_eq = (s.im_e_plus[k] - s.im_e_minus[k]).abs() < 1e-10;
            assert!(re_eq || im_eq);
        }
    }

    #[test]
    fn min_gap_finds_the_origin_ep_on_the_symmetric_slice() {
        let grid = symmetric_slice_grid(401, 401);
        let s = sample_surface(&grid);
        let report = locate_min_gap(&s);
        assert!(report.is_ep, "gap {}", report.gap);
        assert!(report.point.0.abs() < 1e-9 && report.point.1.abs() < 1e-9);
        // Re E = omega_a at the degeneracy.
        let k = s.idx(report.grid_node.0, report.grid_node.1);
        assert_abs_diff_eq!(s.re_e_plus[k], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.re_e_minus[k], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn min_gap_on_gapped_slice_is_an_avoided_crossing() {
        let grid = modulated_slice_grid(201, 201);
        let s = sample_surface(&grid);
        let report = locate_min_gap(&s);
        assert!(!report.is_ep);
        // Grid-scan oracle: minimum sqrt(0.16 - 4 gamma^2)/2 at gamma = 0.1,
        // delta = 0, namely sqrt(0.03) ~ 0.1732.
        assert_abs_diff_eq!(report.gap, 0.17320508075688776, epsilon = 1e-6);
        assert_abs_diff_eq!(report.point.0, 0.1, epsilon = 1e-9);
        assert_abs_diff_eq!(report.point.1, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn min_gap_detects_on_grid_degeneracy_node() {
        // A grid holding delta = 0, kappa = 0 fixed with the node gamma = 4g
        // exactly on it: the analytic degeneracy line.
        let plane =
            PlaneSpec::new(base(), ParamAxis::G, ParamAxis::Gamma, KappaRule::Independent).unwrap();
        let grid = GridSpec::new(plane, (0.0, 0.2), (0.0, 0.8), 5, 5).unwrap();
        let s = sample_surface(&grid);
        // Node (1,1): g = 0.05, gamma = 0.2 = 4g.
        assert!(s.gap_abs[s.idx(1, 1)] < 1e-12);
        let report = locate_min_gap(&s);
        assert!(report.is_ep);
    }

    #[test]
    fn d_line_runs_along_the_detuning_axis() {
        let grid = modulated_slice_grid(201, 201);
        let s = sample_surface(&grid);
        let d = degeneracy_lines(&s, LevelSetKind::DLine).unwrap();
        assert!(!d.segments.is_empty());
        // The D set of this slice is the axis cross {delta = 0} U {gamma = 0}:
        // the gap is real on both axes. Every vertex must satisfy the
        // defining equation and lie on the cross; the delta = 0 branch must
        // extend across the full gamma range.
        let mut max_gamma_on_axis: f64 = 0.0;
        for seg in &d.segments {
            for &(gamma, delta) in seg {
                let p = s.grid.plane.point_at(gamma, delta);
                let gap = eigenvalue_gap(&p);
                assert!(gap.im.abs() < 1e-6, "residual {} at ({gamma},{delta})", gap.im.abs());
                assert!(delta.abs() < 1e-6 || gamma.abs() < 1e-3, "off-cross vertex ({gamma},{delta})");
                if delta.abs() < 1e-6 {
                    max_gamma_on_axis = max_gamma_on_axis.max(gamma);
                }
            }
        }
        assert!(max_gamma_on_axis > 0.09, "delta = 0 branch truncated at {max_gamma_on_axis}");
    }

    #[test]
    fn l_line_is_empty_on_the_modulated_slice() {
        // Within gamma <= 0.1 < 2 g the real parts never coincide: the gap is
        // real everywhere on the Im(Delta^2) = 0 locus. No sign change, no
        // level set.
        let grid = modulated_slice_grid(201, 201);
        let s = sample_surface(&grid);
        let err = degeneracy_lines(&s, LevelSetKind::LLine);
        assert!(matches!(err, Err(Error::EmptyLevelSet)));
    }

    #[test]
    fn l_line_appears_when_the_slice_reaches_the_broken_region() {
        // Extending the same slice past gamma = 2 g = 0.2 exposes the region
        // where the gap turns imaginary; the real parts then coincide on the
        // delta = 0 segment beyond the EP at gamma = 0.2.
        let b = ParameterPoint::<f64>::new(1.0, 0.0, 0.1, 0.0, 0.0).unwrap();
        let plane = PlaneSpec::new(
            b,
            ParamAxis::Gamma,
            ParamAxis::Delta,
            KappaRule::TiedToGamma { alpha: -1.0 },
        )
        .unwrap();
        let grid = GridSpec::new(plane, (0.0, 0.3), (-0.05, 0.05), 201, 201).unwrap();
        let s = sample_surface(&grid);
        let l = degeneracy_lines(&s, LevelSetKind::LLine).unwrap();
        assert!(!l.segments.is_empty());
        for seg in &l.segments {
            for &(gamma, delta) in seg {
                let p = s.grid.plane.point_at(gamma, delta);
                assert!(eigenvalue_gap(&p).re.abs() < 1e-6);
                assert!(delta.abs() < 2e-3 && gamma > 0.19);
            }
        }
    }

    #[test]
    fn d_line_empty_on_hermitian_slice_without_crossing() {
        // gamma = kappa = 0 fixed, plane (g, delta) with g bounded away from
        // zero: the gap is real and nonzero, both components separate.
        let b = ParameterPoint::new(1.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        let plane =
            PlaneSpec::new(b, ParamAxis::G, ParamAxis::Delta, KappaRule::Independent).unwrap();
        let grid = GridSpec::new(plane, (0.05, 0.3), (-0.1, 0.1), 101, 101).unwrap();
        let s = sample_surface(&grid);
        assert!(matches!(degeneracy_lines(&s, LevelSetKind::DLine), Err(Error::EmptyLevelSet)));
    }

    #[test]
    fn row_continuity_of_labeled_surfaces() {
        let grid = symmetric_slice_grid(161, 161);
        let s = sample_surface(&grid);
        let hx = s.grid.x_at(1) - s.grid.x_at(0);
        for j in 0..s.grid.ny {
            for i in 2..s.grid.nx {
                let k2 = s.idx(i, j);
                let k1 = s.idx(i - 1, j);
                let k0 = s.idx(i - 2, j);
                if s.gap_abs[k2].min(s.gap_abs[k1]).min(s.gap_abs[k0]) < 1e-6 {
                    continue;
                }
                let v2 = C::new(s.re_e_plus[k2], s.im_e_plus[k2]);
                let v1 = C::new(s.re_e_plus[k1], s.im_e_plus[k1]);
                let v0 = C::new(s.re_e_plus[k0], s.im_e_plus[k0]);
                let slope = (v1 - v0).norm() / hx;
                let jump = (v2 - v1).norm();
                assert!(
                    jump < 10.0 * (slope * hx + 1e-3),
                    "jump {jump} vs slope {slope} at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn projection_overlays_the_symmetric_loop() {
        let grid = symmetric_slice_grid(41, 41);
        let lp = Loop::symmetric(0.01, 0.2, 0.2, -1.0, PI, 1.0).unwrap();
        let proj = project_loop(&grid, &lp, 256).unwrap();
        assert_eq!(proj.points.len(), 257);
        let first = proj.points.first().unwrap();
        assert_abs_diff_eq!(first.x, 0.21, epsilon = 1e-15);
        assert_abs_diff_eq!(first.y, 0.0, epsilon = 1e-15);
        // Closed over the geometric period.
        let last = proj.points.last().unwrap();
        assert_abs_diff_eq!(last.x, first.x, epsilon = 1e-9);
        assert_abs_diff_eq!(last.y, first.y, epsilon = 1e-9);
        // Energies continuous along the overlay.
        for w in proj.points.windows(2) {
            assert!((w[1].e_plus - w[0].e_plus).norm() < 0.05);
        }
    }

    #[test]
    fn projection_rejects_out_of_plane_loops() {
        // The modulated loop varies delta, which this grid holds fixed at 0.
        let grid = symmetric_slice_grid(41, 41);
        let lp = Loop::chiral_modulated(0.1, 0.04, 0.1, -1.0, PI, 1.0).unwrap();
        let err = project_loop(&grid, &lp, 64);
        assert!(matches!(err, Err(Error::PlaneMismatch(_))));
    }

    #[test]
    fn constant_point_loop_projects_to_one_point() {
        let grid = symmetric_slice_grid(41, 41);
        let lp = Loop::symmetric(0.01, 0.0, 0.0, -1.0, PI, 1.0).unwrap();
        let proj = project_loop(&grid, &lp, 16).unwrap();
        for p in &proj.points {
            assert_abs_diff_eq!(p.x, 0.01, epsilon = 0.0);
            assert_abs_diff_eq!(p.y, 0.0, epsilon = 0.0);
        }
    }

    #[test]
    fn binary_container_round_trips_header_and_layer_sizes() {
        let grid = symmetric_slice_grid(11, 7);
        let s = sample_surface(&grid);
        let bytes = s.to_binary();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        let header = std::str::from_utf8(&bytes[..nl]).unwrap();
        assert!(header.contains("\"jcep-grid-v1\""));
        assert!(header.contains("\"axis_x\":\"g\""));
        assert!(header.contains("\"nx\":11"));
        assert_eq!(bytes.len() - nl - 1, 5 * 11 * 7 * 8);
    }
}
