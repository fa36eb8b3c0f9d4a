//! Closed parameter loops driving the model around (or near) degeneracies.
//!
//! Three built-in families cover the experiments of interest:
//!
//! * symmetric: `g(t) = g0 + G0 cos(wt)`, `gamma(t) = Gamma0 sin^2(wt)`,
//!   `delta = 0`, `kappa = alpha gamma`; transfer period `pi/|w|`,
//! * chiral modulated: `delta(t) = Delta0 sin(wt)`,
//!   `gamma(t) = Gamma0 sin^2(wt/2)`, constant `g`; period `2 pi/|w|`,
//! * constant dissipation: `g(t) = g0 + G0 cos(wt)`,
//!   `delta(t) = Delta0 sin(wt)`, constant `gamma`; period `2 pi/|w|`.
//!
//! Positive `w` traverses counterclockwise, negative clockwise. Custom loops
//! are tabulated samples with linear interpolation.
//!
//! Note the symmetric family closes only over the full cosine period
//! `2 pi/|w|`: over the transfer period `pi/|w|` the coupling runs from
//! `g0 + G0` to `g0 - G0` one way, tracing an open arc whose two endpoints
//! both satisfy the Bell-state condition. `period()` is the transfer period;
//! `geometric_period()` is the time after which the parameter path repeats.

use crate::error::{Error, Result};
use crate::float::Real;
use crate::model::{eigenvalue_gap, ParameterPoint};

/// Traversal direction; counterclockwise for positive angular frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Clockwise,
    Counterclockwise,
}

impl Direction {
    pub fn from_omega<T: Real>(omega: T) -> Self {
        if omega > T::zero() {
            Direction::Counterclockwise
        } else {
            Direction::Clockwise
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Clockwise => "cw",
            Direction::Counterclockwise => "ccw",
        }
    }
}

/// Loop family plus its real constants.
#[derive(Debug, Clone, PartialEq)]
pub enum LoopKind<T> {
    Symmetric {
        g0: T,
        g_amp: T,
        gamma_amp: T,
        alpha: T,
    },
    ChiralModulated {
        g0: T,
        delta_amp: T,
        gamma_amp: T,
        alpha: T,
    },
    ConstantDissipation {
        g0: T,
        g_amp: T,
        delta_amp: T,
        gamma0: T,
        alpha: T,
    },
    /// Tabulated `(t, point)` samples, linearly interpolated and periodically
    /// extended. Samples must start at `t = 0` and be strictly increasing.
    Custom { samples: Vec<(T, ParameterPoint<T>)> },
}

/// A closed, periodic parameter path with a direction and a period.
#[derive(Debug, Clone, PartialEq)]
pub struct Loop<T> {
    kind: LoopKind<T>,
    omega: T,
    omega_a: T,
    period: T,
    geometric_period: T,
    direction: Direction,
    real_gap_premise_violated: bool,
}

impl<T: Real> Loop<T> {
    /// Symmetric loop; `delta` stays 0 and `kappa = alpha * gamma`.
    ///
    /// Checks the premise `16 g^2 > (gamma - kappa)^2` (which keeps the gap
    /// real) along one sampled period and records a warning flag when it is
    /// violated somewhere on the path.
    pub fn symmetric(g0: T, g_amp: T, gamma_amp: T, alpha: T, omega: T, omega_a: T) -> Result<Self> {
        let period = T::PI() / check_omega(omega)?;
        let mut lp = Self {
            kind: LoopKind::Symmetric { g0, g_amp, gamma_amp, alpha },
            omega,
            omega_a,
            period,
            geometric_period: period + period,
            direction: Direction::from_omega(omega),
            real_gap_premise_violated: false,
        };
        lp.validate_constants()?;
        lp.real_gap_premise_violated = (0..=256).any(|k| {
            let t = lp.period * T::from_usize(k).unwrap() / T::lit(256.0);
            let p = lp.evaluate(t);
            let gmk = p.gamma_minus_kappa();
            T::lit(16.0) * p.g * p.g <= gmk * gmk
        });
        Ok(lp)
    }

    /// Chiral loop with time-modulated dissipation; `g` stays constant.
    pub fn chiral_modulated(
        g0: T,
        delta_amp: T,
        gamma_amp: T,
        alpha: T,
        omega: T,
        omega_a: T,
    ) -> Result<Self> {
        let period = T::lit(2.0) * T::PI() / check_omega(omega)?;
        let lp = Self {
            kind: LoopKind::ChiralModulated { g0, delta_amp, gamma_amp, alpha },
            omega,
            omega_a,
            period,
            geometric_period: period,
            direction: Direction::from_omega(omega),
            real_gap_premise_violated: false,
        };
        lp.validate_constants()?;
        Ok(lp)
    }

    /// Chiral loop with constant dissipation `gamma0`, `kappa = alpha gamma0`.
    pub fn constant_dissipation(
        g0: T,
        g_amp: T,
        delta_amp: T,
        gamma0: T,
        alpha: T,
        omega: T,
        omega_a: T,
    ) -> Result<Self> {
        let period = T::lit(2.0) * T::PI() / check_omega(omega)?;
        let lp = Self {
            kind: LoopKind::ConstantDissipation { g0, g_amp, delta_amp, gamma0, alpha },
            omega,
            omega_a,
            period,
            geometric_period: period,
            direction: Direction::from_omega(omega),
            real_gap_premise_violated: false,
        };
        lp.validate_constants()?;
        Ok(lp)
    }

    /// Tabulated loop. The first sample must sit at `t = 0`; the last sample's
    /// time is the period, and its point should match the first (closure is
    /// the caller's responsibility and is what the closure tests probe).
    pub fn custom(samples: Vec<(T, ParameterPoint<T>)>, omega_a: T) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidLoop("custom loop needs at least two samples".into()));
        }
        if samples[0].0 != T::zero() {
            return Err(Error::InvalidLoop("custom loop must start at t = 0".into()));
        }
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidLoop("custom loop times must strictly increase".into()));
            }
        }
        for (_, p) in &samples {
            p.validate()?;
        }
        let period = samples.last().unwrap().0;
        Ok(Self {
            kind: LoopKind::Custom { samples },
            omega: T::zero(),
            omega_a,
            period,
            geometric_period: period,
            direction: Direction::Counterclockwise,
            real_gap_premise_violated: false,
        })
    }

    /// Parses a custom loop from CSV text: header `t,delta,g,gamma,kappa`
    /// (any column order, `t` required), one row per sample.
    pub fn custom_from_csv(text: &str, omega_a: T) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidLoop("empty custom-loop CSV".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let idx_of = |name: &str| -> Result<usize> {
            cols.iter()
                .position(|c| *c == name)
                .ok_or_else(|| Error::InvalidLoop(format!("CSV header missing column '{name}'")))
        };
        let (it, id, ig, igm, ik) = (
            idx_of("t")?,
            idx_of("delta")?,
            idx_of("g")?,
            idx_of("gamma")?,
            idx_of("kappa")?,
        );
        let mut samples = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != cols.len() {
                return Err(Error::InvalidLoop(format!(
                    "CSV row {} has {} fields, header has {}",
                    lineno + 2,
                    fields.len(),
                    cols.len()
                )));
            }
            let get = |i: usize| -> Result<T> {
                fields[i]
                    .parse::<f64>()
                    .map(T::lit)
                    .map_err(|_| Error::InvalidLoop(format!("bad number '{}' in CSV row {}", fields[i], lineno + 2)))
            };
            let p = ParameterPoint::new(omega_a, get(id)?, get(ig)?, get(igm)?, get(ik)?)?;
            samples.push((get(it)?, p));
        }
        Self::custom(samples, omega_a)
    }

    pub fn kind(&self) -> &LoopKind<T> {
        &self.kind
    }

    /// Angular frequency (0 for custom loops).
    pub fn omega(&self) -> T {
        self.omega
    }

    pub fn omega_a(&self) -> T {
        self.omega_a
    }

    /// Transfer period: `pi/|w|` for the symmetric family, `2 pi/|w|` for the
    /// chiral families, the tabulated span for custom loops.
    pub fn period(&self) -> T {
        self.period
    }

    /// Time after which the parameter path retraces itself exactly. Twice the
    /// transfer period for the symmetric family, equal to it otherwise.
    pub fn geometric_period(&self) -> T {
        self.geometric_period
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Whether `16 g^2 > (gamma - kappa)^2` failed somewhere along a sampled
    /// period (symmetric family only; the flag is false for the others).
    pub fn real_gap_premise_violated(&self) -> bool {
        self.real_gap_premise_violated
    }

    /// The same loop traversed in the opposite direction.
    pub fn reversed(&self) -> Self {
        match &self.kind {
            LoopKind::Custom { samples } => {
                let period = self.period;
                let mut rev: Vec<(T, ParameterPoint<T>)> = samples
                    .iter()
                    .map(|(t, p)| (period - *t, *p))
                    .collect();
                rev.reverse();
                let mut lp = Self::custom(rev, self.omega_a).expect("reversal preserves validity");
                lp.direction = match self.direction {
                    Direction::Clockwise => Direction::Counterclockwise,
                    Direction::Counterclockwise => Direction::Clockwise,
                };
                lp
            }
            _ => {
                let mut lp = self.clone();
                lp.omega = -self.omega;
                lp.direction = Direction::from_omega(lp.omega);
                lp
            }
        }
    }

    /// A compact identifier for provenance records; direction-independent.
    pub fn id(&self) -> String {
        let f = |v: T| format!("{:.6e}", v.to_f64_lossy());
        match &self.kind {
            LoopKind::Symmetric { g0, g_amp, gamma_amp, alpha } => format!(
                "symmetric(g0={},G0={},Gamma0={},alpha={},|omega|={})",
                f(*g0),
                f(*g_amp),
                f(*gamma_amp),
                f(*alpha),
                f(self.omega.abs())
            ),
            LoopKind::ChiralModulated { g0, delta_amp, gamma_amp, alpha } => format!(
                "chiral_modulated(g0={},Delta0={},Gamma0={},alpha={},|omega|={})",
                f(*g0),
                f(*delta_amp),
                f(*gamma_amp),
                f(*alpha),
                f(self.omega.abs())
            ),
            LoopKind::ConstantDissipation { g0, g_amp, delta_amp, gamma0, alpha } => format!(
                "constant_dissipation(g0={},G0={},Delta0={},gamma0={},alpha={},|omega|={})",
                f(*g0),
                f(*g_amp),
                f(*delta_amp),
                f(*gamma0),
                f(*alpha),
                f(self.omega.abs())
            ),
            LoopKind::Custom { samples } => {
                format!("custom({} samples, period={})", samples.len(), f(self.period))
            }
        }
    }

    /// Evaluates the loop's parameter point at time `t` (any finite `t`; the
    /// defining formulas extend periodically).
    pub fn evaluate(&self, t: T) -> ParameterPoint<T> {
        match &self.kind {
            LoopKind::Symmetric { g0, g_amp, gamma_amp, alpha } => {
                let wt = self.omega * t;
                let s = wt.sin();
                let gamma = *gamma_amp * s * s;
                ParameterPoint {
                    omega_a: self.omega_a,
                    delta: T::zero(),
                    g: *g0 + *g_amp * wt.cos(),
                    gamma,
                    kappa: *alpha * gamma,
                }
            }
            LoopKind::ChiralModulated { g0, delta_amp, gamma_amp, alpha } => {
                let wt = self.omega * t;
                let sh = (wt * T::lit(0.5)).sin();
                let gamma = *gamma_amp * sh * sh;
                ParameterPoint {
                    omega_a: self.omega_a,
                    delta: *delta_amp * wt.sin(),
                    g: *g0,
                    gamma,
                    kappa: *alpha * gamma,
                }
            }
            LoopKind::ConstantDissipation { g0, g_amp, delta_amp, gamma0, alpha } => {
                let wt = self.omega * t;
                ParameterPoint {
                    omega_a: self.omega_a,
                    delta: *delta_amp * wt.sin(),
                    g: *g0 + *g_amp * wt.cos(),
                    gamma: *gamma0,
                    kappa: *alpha * *gamma0,
                }
            }
            LoopKind::Custom { samples } => {
                let period = self.period;
                let mut tau = t % period;
                if tau < T::zero() {
                    tau += period;
                }
                let idx = samples.partition_point(|(ts, _)| *ts <= tau);
                let (t0, p0) = samples[idx.saturating_sub(1).min(samples.len() - 2)];
                let (t1, p1) = samples[idx.clamp(1, samples.len() - 1)];
                let u = if t1 > t0 { (tau - t0) / (t1 - t0) } else { T::zero() };
                let lerp = |a: T, b: T| a + (b - a) * u;
                ParameterPoint {
                    omega_a: self.omega_a,
                    delta: lerp(p0.delta, p1.delta),
                    g: lerp(p0.g, p1.g),
                    gamma: lerp(p0.gamma, p1.gamma),
                    kappa: lerp(p0.kappa, p1.kappa),
                }
            }
        }
    }

    /// Minimum `|Delta_E|` over `n` samples of one transfer period.
    pub fn min_gap_sampled(&self, n: usize) -> T {
        (0..=n)
            .map(|k| {
                let t = self.period * T::from_usize(k).unwrap() / T::from_usize(n).unwrap();
                eigenvalue_gap(&self.evaluate(t)).norm()
            })
            .fold(T::infinity(), T::min)
    }

    fn validate_constants(&self) -> Result<()> {
        let probe = self.evaluate(T::zero());
        probe.validate().map_err(|e| Error::InvalidLoop(e.to_string()))
    }
}

fn check_omega<T: Real>(omega: T) -> Result<T> {
    if omega == T::zero() || !omega.is_finite() {
        return Err(Error::InvalidLoop("omega must be finite and nonzero".into()));
    }
    Ok(omega.abs())
}

/// Geometry report for a loop projected onto a 2D parameter plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncirclementDiagnostic<T> {
    /// Signed revolutions of the projected path around the reference point.
    pub winding_number: i32,
    /// Minimum distance from the sampled path vertices to the reference.
    pub min_distance: T,
}

/// Default sample count for [`encirclement_diagnostic`].
pub const WINDING_SAMPLES: usize = 4096;

/// Winding number and clearance of the loop around `reference = (x, y)` in the
/// plane spanned by `axes`, computed by accumulated signed angle over a
/// uniform sampling of one geometric period.
pub fn encirclement_diagnostic<T: Real>(
    lp: &Loop<T>,
    reference: (T, T),
    axes: (crate::model::ParamAxis, crate::model::ParamAxis),
    n_samples: usize,
) -> Result<EncirclementDiagnostic<T>> {
    use crate::model::ParamAxis;
    let component = |p: &ParameterPoint<T>, axis: ParamAxis| match axis {
        ParamAxis::Delta => p.delta,
        ParamAxis::G => p.g,
        ParamAxis::Gamma => p.gamma,
        ParamAxis::Kappa => p.kappa,
    };
    let n = n_samples.max(16);
    let span = lp.geometric_period();
    let mut total = T::zero();
    let mut min_d = T::infinity();
    let mut prev_angle = T::zero();
    for k in 0..=n {
        let t = span * T::from_usize(k).unwrap() / T::from_usize(n).unwrap();
        let p = lp.evaluate(t);
        let dx = component(&p, axes.0) - reference.0;
        let dy = component(&p, axes.1) - reference.1;
        let d = (dx * dx + dy * dy).sqrt();
        min_d = min_d.min(d);
        let angle = dy.atan2(dx);
        if k > 0 {
            let mut diff = angle - prev_angle;
            let pi = T::PI();
            let two_pi = pi + pi;
            while diff > pi {
                diff -= two_pi;
            }
            while diff < -pi {
                diff += two_pi;
            }
            total += diff;
        }
        prev_angle = angle;
    }
    if min_d < T::lit(1e-10) {
        return Err(Error::ReferenceOnPath { distance: min_d.to_f64_lossy() });
    }
    let two_pi = T::PI() + T::PI();
    let winding = (total / two_pi).round().to_f64_lossy() as i32;
    Ok(EncirclementDiagnostic { winding_number: winding, min_distance: min_d })
}
