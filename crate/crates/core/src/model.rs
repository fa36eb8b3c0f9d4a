//! Single-excitation non-Hermitian Jaynes-Cummings model.
//!
//! A two-level atom (states |g>, |e>) couples to a lossy cavity mode with
//! strength `g`; atomic spontaneous emission `gamma` and cavity decay `kappa`
//! enter as anti-Hermitian diagonal terms. Restricted to the single-excitation
//! subspace spanned by (|e,0>, |g,1>) the effective Hamiltonian is the
//! complex-symmetric 2x2 matrix
//!
//! ```text
//!     | omega_a + delta - i*gamma/2        g          |
//!     |            g             omega_a - i*kappa/2  |
//! ```
//!
//! whose eigensystem is known in closed form. Because the matrix is complex
//! symmetric, left eigen-covectors are the unconjugated transposes of the
//! right eigenvectors, and biorthogonality is the bilinear pairing
//! `<l_n|r_m> = delta_nm`.

use crate::error::{Error, Result};
use crate::float::{bilinear, c, Real, C};

/// Degeneracy floor (in units of `omega_a`) below which [`eigensystem`]
/// refuses to normalize: the eigenvectors have coalesced to working precision.
pub const DEGENERACY_FLOOR: f64 = 1e-12;

/// Gap threshold (in units of `omega_a`) separating an exceptional point from
/// a merely small avoided crossing.
pub const EP_GAP_THRESHOLD: f64 = 1e-10;

/// The five real model parameters at one instant, in units of `omega_a`.
///
/// `kappa` is stored independently; the tie `kappa = alpha * gamma` used by
/// the built-in parameter loops is applied by their constructors, not here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterPoint<T> {
    /// Cavity resonance frequency; the normalization unit (usually 1).
    pub omega_a: T,
    /// Atom-cavity detuning `omega_e - omega_a`.
    pub delta: T,
    /// Atom-cavity coupling strength.
    pub g: T,
    /// Atomic spontaneous emission rate (may be 0).
    pub gamma: T,
    /// Cavity decay rate; sign-unconstrained (negative values model gain).
    pub kappa: T,
}

impl<T: Real> ParameterPoint<T> {
    /// Builds a parameter point, validating finiteness and `omega_a > 0`.
    pub fn new(omega_a: T, delta: T, g: T, gamma: T, kappa: T) -> Result<Self> {
        let p = Self { omega_a, delta, g, gamma, kappa };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega_a", self.omega_a),
            ("delta", self.delta),
            ("g", self.g),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} is not finite")));
            }
        }
        if self.omega_a <= T::zero() {
            return Err(Error::InvalidParameter(format!(
                "omega_a must be positive, got {}",
                self.omega_a
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn gamma_minus_kappa(&self) -> T {
        self.gamma - self.kappa
    }
}

/// Names of the four tunable parameters, used to select plane axes for
/// spectrum grids and EP searches. `omega_a` is never an axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamAxis {
    Delta,
    G,
    Gamma,
    Kappa,
}

impl ParamAxis {
    pub fn name(self) -> &'static str {
        match self {
            ParamAxis::Delta => "delta",
            ParamAxis::G => "g",
            ParamAxis::Gamma => "gamma",
            ParamAxis::Kappa => "kappa",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "delta" => Some(ParamAxis::Delta),
            "g" => Some(ParamAxis::G),
            "gamma" => Some(ParamAxis::Gamma),
            "kappa" => Some(ParamAxis::Kappa),
            _ => None,
        }
    }
}

/// How `kappa` is determined on a 2D parameter plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaRule<T> {
    /// `kappa` keeps the base point's value (or is itself an axis).
    Independent,
    /// `kappa = alpha * gamma`, following `gamma` wherever it comes from.
    TiedToGamma { alpha: T },
}

/// A 2D slice through parameter space: two free axes over a base point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneSpec<T> {
    pub base: ParameterPoint<T>,
    pub axis_x: ParamAxis,
    pub axis_y: ParamAxis,
    pub kappa_rule: KappaRule<T>,
}

impl<T: Real> PlaneSpec<T> {
    pub fn new(
        base: ParameterPoint<T>,
        axis_x: ParamAxis,
        axis_y: ParamAxis,
        kappa_rule: KappaRule<T>,
    ) -> Result<Self> {
        if axis_x == axis_y {
            return Err(Error::InvalidParameter(format!(
                "plane axes must differ, both are {}",
                axis_x.name()
            )));
        }
        if matches!(kappa_rule, KappaRule::TiedToGamma { .. })
            && (axis_x == ParamAxis::Kappa || axis_y == ParamAxis::Kappa)
        {
            return Err(Error::InvalidParameter(
                "kappa cannot be a free axis while tied to gamma".into(),
            ));
        }
        base.validate()?;
        Ok(Self { base, axis_x, axis_y, kappa_rule })
    }

    /// Assembles the full parameter point at plane coordinates `(x, y)`.
    pub fn point_at(&self, x: T, y: T) -> ParameterPoint<T> {
        let mut p = self.base;
        for (axis, v) in [(self.axis_x, x), (self.axis_y, y)] {
            match axis {
                ParamAxis::Delta => p.delta = v,
                ParamAxis::G => p.g = v,
                ParamAxis::Gamma => p.gamma = v,
                ParamAxis::Kappa => p.kappa = v,
            }
        }
        if let KappaRule::TiedToGamma { alpha } = self.kappa_rule {
            p.kappa = alpha * p.gamma;
        }
        p
    }
}

/// The effective Hamiltonian in the ordered basis (|e,0>, |g,1>).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianMatrix<T> {
    pub entries: [[C<T>; 2]; 2],
}

impl<T: Real> HamiltonianMatrix<T> {
    /// Matrix-vector product `H psi`.
    #[inline]
    pub fn apply(&self, psi: &[C<T>; 2]) -> [C<T>; 2] {
        [
            self.entries[0][0] * psi[0] + self.entries[0][1] * psi[1],
            self.entries[1][0] * psi[0] + self.entries[1][1] * psi[1],
        ]
    }

    #[inline]
    pub fn trace(&self) -> C<T> {
        self.entries[0][0] + self.entries[1][1]
    }

    #[inline]
    pub fn det(&self) -> C<T> {
        self.entries[0][0] * self.entries[1][1] - self.entries[0][1] * self.entries[1][0]
    }

    /// Frobenius norm, used to scale residual tolerances.
    pub fn frobenius_norm(&self) -> T {
        let mut s = T::zero();
        for row in &self.entries {
            for e in row {
                s += e.norm_sqr();
            }
        }
        s.sqrt()
    }
}

/// Assembles the single-excitation Hamiltonian at a parameter point.
pub fn build_hamiltonian<T: Real>(p: &ParameterPoint<T>) -> HamiltonianMatrix<T> {
    let half = T::lit(0.5);
    HamiltonianMatrix {
        entries: [
            [c(p.omega_a + p.delta, -half * p.gamma), c(p.g, T::zero())],
            [c(p.g, T::zero()), c(p.omega_a, -half * p.kappa)],
        ],
    }
}

/// Eigenvalue gap `Delta_E = (i/2) sqrt((gamma - kappa + 2 i delta)^2 - 16 g^2)`
/// on the principal square-root branch.
///
/// The point-wise `+`/`-` labels inherit the principal branch; persistent
/// labels along paths are assigned by continuation in the dynamics and
/// spectrum modules.
pub fn eigenvalue_gap<T: Real>(p: &ParameterPoint<T>) -> C<T> {
    let w = gap_squared_argument(p);
    c(T::zero(), T::lit(0.5)) * w.sqrt()
}

/// The radicand `(gamma - kappa + 2 i delta)^2 - 16 g^2`.
#[inline]
fn gap_squared_argument<T: Real>(p: &ParameterPoint<T>) -> C<T> {
    let z = c(p.gamma_minus_kappa(), T::lit(2.0) * p.delta);
    z * z - c(T::lit(16.0) * p.g * p.g, T::zero())
}

/// `Delta_E^2`, computed without any square root. Its imaginary part is
/// `-delta * (gamma - kappa)` exactly, which makes it the natural probe for
/// "the gap stays real or purely imaginary" arguments.
pub fn gap_squared<T: Real>(p: &ParameterPoint<T>) -> C<T> {
    let quarter = T::lit(0.25);
    -gap_squared_argument(p) * c(quarter, T::zero())
}

/// Biorthogonally normalized eigensystem at one parameter point.
///
/// Labels are the point-wise principal-branch labels; `value_plus -
/// value_minus == gap`. Left covectors equal the right vectors component-wise
/// (complex-symmetric matrix), and both are rescaled by the same complex
/// factor so that the bilinear pairing is exactly `delta_nm`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigensystem<T> {
    pub value_plus: C<T>,
    pub value_minus: C<T>,
    pub right_plus: [C<T>; 2],
    pub right_minus: [C<T>; 2],
    pub left_plus: [C<T>; 2],
    pub left_minus: [C<T>; 2],
    pub gap: C<T>,
}

impl<T: Real> Eigensystem<T> {
    /// The same eigensystem with `+` and `-` labels exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            value_plus: self.value_minus,
            value_minus: self.value_plus,
            right_plus: self.right_minus,
            right_minus: self.right_plus,
            left_plus: self.left_minus,
            left_minus: self.left_plus,
            gap: -self.gap,
        }
    }
}

/// Closed-form eigensystem with exact biorthogonal normalization.
///
/// Uses the default degeneracy floor of `1e-12 * omega_a`.
pub fn eigensystem<T: Real>(p: &ParameterPoint<T>) -> Result<Eigensystem<T>> {
    eigensystem_with_floor(p, T::lit(DEGENERACY_FLOOR))
}

/// Same as [`eigensystem`] with an explicit degeneracy floor in units of
/// `omega_a`.
pub fn eigensystem_with_floor<T: Real>(
    p: &ParameterPoint<T>,
    floor: T,
) -> Result<Eigensystem<T>> {
    let gap = eigenvalue_gap(p);
    let floor_abs = floor * p.omega_a;
    if gap.norm() < floor_abs {
        return Err(Error::DegenerateEigensystem {
            gap_abs: gap.norm().to_f64_lossy(),
            floor: floor_abs.to_f64_lossy(),
        });
    }

    let two = T::lit(2.0);
    let half = T::lit(0.5);
    // E_pm = omega_a + delta/2 - i (gamma + kappa)/4 +- Delta_E/2
    let half_trace = c(
        p.omega_a + half * p.delta,
        -T::lit(0.25) * (p.gamma + p.kappa),
    );
    let value_plus = half_trace + gap * c(half, T::zero());
    let value_minus = half_trace - gap * c(half, T::zero());

    // A_pm = 2 delta - i (gamma - kappa) +- 2 Delta_E; note A_+ A_- = -16 g^2,
    // so [A_n, 4g] and [4g, -A_m] are parallel. Picking the variant with the
    // larger leading entry keeps the parametrization away from the null vector
    // that one of them degenerates to at g = 0.
    let a_base = c(two * p.delta, -p.gamma_minus_kappa());
    let a_plus = a_base + gap * c(two, T::zero());
    let a_minus = a_base - gap * c(two, T::zero());
    let four_g = c(T::lit(4.0) * p.g, T::zero());

    let make = |a_own: C<T>, a_other: C<T>| -> [C<T>; 2] {
        let v = if a_own.norm() >= a_other.norm() {
            [a_own, four_g]
        } else {
            [four_g, -a_other]
        };
        // Bilinear self-product; nonzero whenever the gap is, since it equals
        // +-4 Delta_E A for whichever A has the larger modulus.
        let q = bilinear(&v, &v);
        let s = q.sqrt();
        [v[0] / s, v[1] / s]
    };

    let right_plus = make(a_plus, a_minus);
    let right_minus = make(a_minus, a_plus);

    Ok(Eigensystem {
        value_plus,
        value_minus,
        right_plus,
        right_minus,
        left_plus: right_plus,
        left_minus: right_minus,
        gap,
    })
}

/// Left covectors normalized the modulus way, `[A_pm, 4g] / sqrt(|A_pm|^2 +
/// |4g|^2)`, for comparison runs. For complex `A_pm` this pairing is not
/// exactly biorthogonal; [`eigensystem`] is the production normalization.
pub fn modulus_normalized_left<T: Real>(p: &ParameterPoint<T>) -> ([C<T>; 2], [C<T>; 2]) {
    let two = T::lit(2.0);
    let gap = eigenvalue_gap(p);
    let a_base = c(two * p.delta, -p.gamma_minus_kappa());
    let a_plus = a_base + gap * c(two, T::zero());
    let a_minus = a_base - gap * c(two, T::zero());
    let four_g = c(T::lit(4.0) * p.g, T::zero());
    let make = |a: C<T>| -> [C<T>; 2] {
        let s = (a.norm_sqr() + four_g.norm_sqr()).sqrt();
        [a / s, four_g / s]
    };
    (make(a_plus), make(a_minus))
}

/// Maximum deviation of the bilinear pairing from `delta_nm`; a health metric
/// that grows without bound as a degeneracy is approached.
pub fn biorthogonality_defect<T: Real>(es: &Eigensystem<T>) -> T {
    let one = C::new(T::one(), T::zero());
    let pairs = [
        (bilinear(&es.left_plus, &es.right_plus) - one),
        (bilinear(&es.left_minus, &es.right_minus) - one),
        bilinear(&es.left_plus, &es.right_minus),
        bilinear(&es.left_minus, &es.right_plus),
    ];
    pairs
        .into_iter()
        .map(|z| z.norm())
        .fold(T::zero(), T::max)
}

/// True iff `|delta| <= tol` and `|gamma - kappa| <= tol`: the condition for
/// the eigenvectors to be exact Bell states `(|e,0> +- |g,1>)/sqrt(2)`.
pub fn bell_endpoint_check<T: Real>(p: &ParameterPoint<T>, tol: T) -> bool {
    p.delta.abs() <= tol && p.gamma_minus_kappa().abs() <= tol
}

/// Exceptional-point search problem: two free axes over a fixed base point,
/// confined to a rectangular box.
#[derive(Debug, Clone, Copy)]
pub struct EpSearch<T> {
    pub plane: PlaneSpec<T>,
    pub x_range: (T, T),
    pub y_range: (T, T),
    /// Optional starting point; defaults to the best node of a coarse scan.
    pub seed: Option<(T, T)>,
}

/// Result of a successful EP search.
#[derive(Debug, Clone, Copy)]
pub struct EpLocation<T> {
    pub x: T,
    pub y: T,
    pub point: ParameterPoint<T>,
    pub gap_abs: T,
}

const EP_SCAN_NODES: usize = 129;
const EP_MAX_ITERATIONS: usize = 120;

/// Finds a root of `Delta_E^2 = 0` in the two free axes.
///
/// A coarse grid scan seeds a damped Gauss-Newton iteration on
/// `(Re Delta_E^2, Im Delta_E^2)`; iterates are clamped to the box. Returns
/// [`Error::NoEpFound`] when the scan shows the box holds no degeneracy and
/// [`Error::NonConverged`] when refinement stalls above the `1e-10 * omega_a`
/// target.
pub fn find_ep<T: Real>(search: &EpSearch<T>) -> Result<EpLocation<T>> {
    let plane = &search.plane;
    let (x0, x1) = search.x_range;
    let (y0, y1) = search.y_range;
    if !(x1 > x0) || !(y1 > y0) {
        return Err(Error::InvalidParameter("EP search box is degenerate".into()));
    }
    let gap_abs_at = |x: T, y: T| eigenvalue_gap(&plane.point_at(x, y)).norm();

    // Coarse scan: best node and box minimum.
    let n = EP_SCAN_NODES;
    let mut best = (gap_abs_at(x0, y0), x0, y0);
    for j in 0..n {
        let fy = T::from_usize(j).unwrap() / T::from_usize(n - 1).unwrap();
        let y = y0 + (y1 - y0) * fy;
        for i in 0..n {
            let fx = T::from_usize(i).unwrap() / T::from_usize(n - 1).unwrap();
            let x = x0 + (x1 - x0) * fx;
            let a = gap_abs_at(x, y);
            if a < best.0 {
                best = (a, x, y);
            }
        }
    }

    let (mut x, mut y) = search.seed.unwrap_or((best.1, best.2));
    x = x.max(x0).min(x1);
    y = y.max(y0).min(y1);

    let target = T::lit(EP_GAP_THRESHOLD) * plane.base.omega_a;
    // Roots of Delta_E^2 solve both real equations simultaneously.
    let f = |x: T, y: T| -> [T; 2] {
        let d2 = gap_squared(&plane.point_at(x, y));
        [d2.re, d2.im]
    };
    let norm2 = |v: [T; 2]| v[0] * v[0] + v[1] * v[1];

    let mut fv = f(x, y);
    let mut lambda = T::lit(1e-4);
    for iter in 0..EP_MAX_ITERATIONS {
        if gap_abs_at(x, y) < target {
            let point = plane.point_at(x, y);
            return Ok(EpLocation { x, y, point, gap_abs: gap_abs_at(x, y) });
        }
        // Finite-difference Jacobian.
        let hx = T::lit(1e-7) * (x1 - x0).abs().max(T::one());
        let hy = T::lit(1e-7) * (y1 - y0).abs().max(T::one());
        let fxp = f(x + hx, y);
        let fxm = f(x - hx, y);
        let fyp = f(x, y + hy);
        let fym = f(x, y - hy);
        let jac = [
            [(fxp[0] - fxm[0]) / (hx + hx), (fyp[0] - fym[0]) / (hy + hy)],
            [(fxp[1] - fxm[1]) / (hx + hx), (fyp[1] - fym[1]) / (hy + hy)],
        ];
        // Levenberg-damped Gauss-Newton step on J^T J + lambda I.
        let jtj = [
            [jac[0][0] * jac[0][0] + jac[1][0] * jac[1][0], jac[0][0] * jac[0][1] + jac[1][0] * jac[1][1]],
            [jac[0][1] * jac[0][0] + jac[1][1] * jac[1][0], jac[0][1] * jac[0][1] + jac[1][1] * jac[1][1]],
        ];
        let jtf = [
            jac[0][0] * fv[0] + jac[1][0] * fv[1],
            jac[0][1] * fv[0] + jac[1][1] * fv[1],
        ];
        let mut accepted = false;
        for _ in 0..40 {
            let a = [
                [jtj[0][0] + lambda, jtj[0][1]],
                [jtj[1][0], jtj[1][1] + lambda],
            ];
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            if det.abs() <= T::epsilon() {
                lambda = lambda * T::lit(10.0);
                continue;
            }
            let dx = -(a[1][1] * jtf[0] - a[0][1] * jtf[1]) / det;
            let dy = -(-a[1][0] * jtf[0] + a[0][0] * jtf[1]) / det;
            let xn = (x + dx).max(x0).min(x1);
            let yn = (y + dy).max(y0).min(y1);
            let fn_ = f(xn, yn);
            if norm2(fn_) < norm2(fv) {
                x = xn;
                y = yn;
                fv = fn_;
                lambda = (lambda * T::lit(0.25)).max(T::lit(1e-14));
                accepted = true;
                break;
            }
            lambda = lambda * T::lit(10.0);
        }
        if !accepted {
            // Stalled: decide between "no root here" and "could not converge".
            return finish_ep_search(best.0, gap_abs_at(x, y), iter, plane.base.omega_a);
        }
    }
    let final_gap = gap_abs_at(x, y);
    if final_gap < target {
        let point = plane.point_at(x, y);
        return Ok(EpLocation { x, y, point, gap_abs: final_gap });
    }
    finish_ep_search(best.0, final_gap, EP_MAX_ITERATIONS, plane.base.omega_a)
}

fn finish_ep_search<T: Real>(
    scan_min: T,
    refined: T,
    iterations: usize,
    omega_a: T,
) -> Result<EpLocation<T>> {
    if scan_min > T::lit(1e-6) * omega_a {
        Err(Error::NoEpFound { min_gap: scan_min.to_f64_lossy() })
    } else {
        Err(Error::NonConverged {
            best_gap: refined.min(scan_min).to_f64_lossy(),
            iterations,
        })
    }
}
