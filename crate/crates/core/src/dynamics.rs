//! Time evolution under the non-Hermitian Schrödinger equation
//! `i d/dt |psi> = H_eff(t) |psi>` along a parameter loop.
//!
//! The integrator is a classical fixed-step RK4 by default, with an embedded
//! Dormand-Prince 5(4) pair available for convergence studies. Because the
//! cavity term can amplify (`kappa < 0`), the state is rescaled to unit
//! Euclidean norm whenever its norm leaves `[1e-6, 1e6]`; the accumulated
//! log-norm is tracked separately so the raw solution can be reconstructed.
//!
//! Eigenvalue branches are labeled `+` at `t = 0` by overlap with the plus
//! Bell state and carried along the loop by [`branch_continue`]: the
//! assignment that maximizes the summed left/right overlaps wins, and global
//! phases are smoothed so consecutive eigenvectors pair positively. Fidelities
//! `F_m = |<l_m|psi>|^2` use the unit-normalized state and the exact
//! biorthogonal left covectors.

use crate::error::{Error, Result};
use crate::float::{bilinear, c, Real, C};
use crate::model::{
    build_hamiltonian, eigensystem, modulus_normalized_left, Eigensystem, ParameterPoint,
};
use crate::trajectory::{Direction, Loop};

/// State amplitudes in the ordered basis (|e,0>, |g,1>).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector<T> {
    pub amp_e0: C<T>,
    pub amp_g1: C<T>,
}

/// Which Bell state, `(|e,0> + |g,1>)/sqrt(2)` or `(|e,0> - |g,1>)/sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellSign {
    Plus,
    Minus,
}

impl BellSign {
    pub fn name(self) -> &'static str {
        match self {
            BellSign::Plus => "plus",
            BellSign::Minus => "minus",
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            BellSign::Plus => BellSign::Minus,
            BellSign::Minus => BellSign::Plus,
        }
    }
}

impl<T: Real> StateVector<T> {
    pub fn new(amp_e0: C<T>, amp_g1: C<T>) -> Self {
        Self { amp_e0, amp_g1 }
    }

    #[inline]
    pub fn components(&self) -> [C<T>; 2] {
        [self.amp_e0, self.amp_g1]
    }

    /// Euclidean norm.
    pub fn norm(&self) -> T {
        (self.amp_e0.norm_sqr() + self.amp_g1.norm_sqr()).sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self { amp_e0: self.amp_e0 / n, amp_g1: self.amp_g1 / n }
    }
}

/// `(|e,0> +- |g,1>)/sqrt(2)`.
pub fn initial_bell_state<T: Real>(sign: BellSign) -> StateVector<T> {
    let a = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    let s = match sign {
        BellSign::Plus => a,
        BellSign::Minus => -a,
    };
    StateVector::new(c(a, T::zero()), c(s, T::zero()))
}

/// Integration scheme selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme<T> {
    /// Classical RK4 with a fixed number of steps per transfer period.
    FixedRk4 { steps: usize },
    /// Embedded Dormand-Prince 5(4) pair with relative tolerance and a hard
    /// step floor.
    AdaptiveRk54 { rel_tol: T, min_step: T },
}

/// How fidelities are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FidelityPolicy {
    /// `F_m = |<l_m | psi/||psi||>|^2`, no further rescaling.
    Paper,
    /// Each `F_m` divided by `F_+ + F_-`.
    Population,
}

impl FidelityPolicy {
    pub fn name(self) -> &'static str {
        match self {
            FidelityPolicy::Paper => "paper",
            FidelityPolicy::Population => "population",
        }
    }
}

/// Integrator configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig<T> {
    pub scheme: Scheme<T>,
    /// Number of uniform observation intervals per period; the record holds
    /// `observation_samples + 1` rows.
    pub observation_samples: usize,
    pub fidelity_policy: FidelityPolicy,
    /// Use the modulus-normalized left covectors instead of the exactly
    /// biorthogonal ones (comparison mode).
    pub literal_s_normalization: bool,
}

/// Default step count per period for the fixed RK4 scheme.
pub const DEFAULT_RK4_STEPS: usize = 20_000;
/// Default number of observation samples per period.
pub const DEFAULT_OBSERVATION_SAMPLES: usize = 1000;

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self {
            scheme: Scheme::FixedRk4 { steps: DEFAULT_RK4_STEPS },
            observation_samples: DEFAULT_OBSERVATION_SAMPLES,
            fidelity_policy: FidelityPolicy::Paper,
            literal_s_normalization: false,
        }
    }
}

/// Time series produced by one loop traversal.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionRecord<T> {
    /// Monotone observation times from 0 to the transfer period.
    pub times: Vec<T>,
    /// Unit-normalized states at the observation times.
    pub states: Vec<StateVector<T>>,
    /// Accumulated log of the raw Euclidean norm (the raw state is
    /// `exp(log_norm) *` the stored unit state).
    pub log_norm: Vec<T>,
    pub fidelity_plus: Vec<T>,
    pub fidelity_minus: Vec<T>,
    /// Branch-continued eigenvalues along the traversal.
    pub energies_plus: Vec<C<T>>,
    pub energies_minus: Vec<C<T>>,
    pub policy: FidelityPolicy,
    pub loop_id: String,
    pub direction: Direction,
}

impl<T: Real> EvolutionRecord<T> {
    /// Label of the eigenstate the run started in, judged from the initial
    /// fidelities.
    pub fn start_label(&self) -> BellSign {
        if self.fidelity_plus[0] >= self.fidelity_minus[0] {
            BellSign::Plus
        } else {
            BellSign::Minus
        }
    }

    /// Final fidelities `(F_+, F_-)` at the transfer period.
    pub fn final_fidelities(&self) -> (T, T) {
        (
            *self.fidelity_plus.last().unwrap(),
            *self.fidelity_minus.last().unwrap(),
        )
    }

    /// CSV serialization: header plus one row per observation time.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.times.len() * 200);
        out.push_str(
            "t,re_amp_e0,im_amp_e0,re_amp_g1,im_amp_g1,log_norm,F_plus,F_minus,\
             reE_plus,imE_plus,reE_minus,imE_minus\n",
        );
        let f = |v: T| format!("{:.16e}", v.to_f64_lossy());
        for k in 0..self.times.len() {
            let s = &self.states[k];
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                f(self.times[k]),
                f(s.amp_e0.re),
                f(s.amp_e0.im),
                f(s.amp_g1.re),
                f(s.amp_g1.im),
                f(self.log_norm[k]),
                f(self.fidelity_plus[k]),
                f(self.fidelity_minus[k]),
                f(self.energies_plus[k].re),
                f(self.energies_plus[k].im),
                f(self.energies_minus[k].re),
                f(self.energies_minus[k].im),
            ));
        }
        out
    }
}

/// Outcome of one branch-continuation step.
#[derive(Debug, Clone)]
pub struct Continuation<T> {
    pub eigensystem: Eigensystem<T>,
    /// Whether the raw labels were exchanged to follow the previous step.
    pub swapped: bool,
}

/// Carries eigensystem labels across one step of a path.
///
/// Scores both assignments by the summed overlap magnitudes
/// `sum_n |<l_n^prev | r_n^cur>|`, keeps the better one, and fixes the global
/// phase of each branch so that `<l_n^prev | r_n^cur>` is real and positive.
/// Errors with [`Error::AmbiguousAssignment`] when the two scores agree to
/// within `tol` relative, which happens when the step straddles a
/// near-degeneracy.
pub fn branch_continue<T: Real>(
    previous: &Eigensystem<T>,
    current_raw: &Eigensystem<T>,
    tol: T,
) -> Result<Continuation<T>> {
    let (mut es, swapped, score_keep, score_swap) = assign_by_overlap(previous, current_raw);
    let hi = score_keep.max(score_swap);
    let lo = score_keep.min(score_swap);
    if hi - lo <= tol * hi {
        return Err(Error::AmbiguousAssignment {
            score_keep: score_keep.to_f64_lossy(),
            score_swap: score_swap.to_f64_lossy(),
        });
    }
    smooth_phases(previous, &mut es);
    Ok(Continuation { eigensystem: es, swapped })
}

/// Non-erroring variant used by the integrator, the adiabaticity metrics and
/// grid sampling. When the two assignments tie (which happens exactly when a
/// step straddles a degeneracy: the overlap sums become `|x + iy|` vs
/// `|x - iy|` with real `x, y`), the branches are exchanged: each eigenvalue
/// sheet continues through the branch point onto the other sheet.
pub(crate) fn branch_continue_lenient<T: Real>(
    previous: &Eigensystem<T>,
    current_raw: &Eigensystem<T>,
) -> Continuation<T> {
    let (es0, swapped0, score_keep, score_swap) = assign_by_overlap(previous, current_raw);
    let hi = score_keep.max(score_swap);
    let lo = score_keep.min(score_swap);
    let tied = hi - lo <= T::lit(1e-9) * hi;
    let (mut es, swapped) = if tied {
        (current_raw.swapped(), true)
    } else {
        (es0, swapped0)
    };
    smooth_phases(previous, &mut es);
    Continuation { eigensystem: es, swapped }
}

fn assign_by_overlap<T: Real>(
    previous: &Eigensystem<T>,
    current_raw: &Eigensystem<T>,
) -> (Eigensystem<T>, bool, T, T) {
    let score_keep = bilinear(&previous.left_plus, &current_raw.right_plus).norm()
        + bilinear(&previous.left_minus, &current_raw.right_minus).norm();
    let score_swap = bilinear(&previous.left_plus, &current_raw.right_minus).norm()
        + bilinear(&previous.left_minus, &current_raw.right_plus).norm();
    if score_swap > score_keep {
        (current_raw.swapped(), true, score_keep, score_swap)
    } else {
        (current_raw.clone(), false, score_keep, score_swap)
    }
}

/// Rotates each branch's global phase so the pairing with the previous step
/// is real-positive; rights and lefts rotate oppositely to preserve
/// biorthogonality.
fn smooth_phases<T: Real>(previous: &Eigensystem<T>, es: &mut Eigensystem<T>) {
    let fix = |lp: &[C<T>; 2], right: &mut [C<T>; 2], left: &mut [C<T>; 2]| {
        let p = bilinear(lp, right);
        let n = p.norm();
        if n > T::zero() {
            let u = p.conj() / n;
            right[0] = right[0] * u;
            right[1] = right[1] * u;
            left[0] = left[0] / u;
            left[1] = left[1] / u;
        }
    };
    let (mut rp, mut lps) = (es.right_plus, es.left_plus);
    fix(&previous.left_plus, &mut rp, &mut lps);
    es.right_plus = rp;
    es.left_plus = lps;
    let (mut rm, mut lms) = (es.right_minus, es.left_minus);
    fix(&previous.left_minus, &mut rm, &mut lms);
    es.right_minus = rm;
    es.left_minus = lms;
}

/// Initial labeling: `+` goes to the branch with the larger overlap magnitude
/// on the plus Bell state. Also reports whether the raw labels were exchanged.
pub fn assign_initial_labels<T: Real>(raw: Eigensystem<T>) -> (Eigensystem<T>, bool) {
    let bell = initial_bell_state::<T>(BellSign::Plus).components();
    let on_plus = bilinear(&raw.left_plus, &bell).norm();
    let on_minus = bilinear(&raw.left_minus, &bell).norm();
    if on_minus > on_plus {
        (raw.swapped(), true)
    } else {
        (raw, false)
    }
}

/// Biorthogonal fidelities `(F_+, F_-)` of `state` against the eigensystem,
/// paper policy (unit-normalized state, no further rescaling).
pub fn fidelity<T: Real>(state: &StateVector<T>, es: &Eigensystem<T>) -> (T, T) {
    fidelity_with_policy(state, es, FidelityPolicy::Paper)
}

/// Fidelities under an explicit reporting policy.
pub fn fidelity_with_policy<T: Real>(
    state: &StateVector<T>,
    es: &Eigensystem<T>,
    policy: FidelityPolicy,
) -> (T, T) {
    let psi = state.normalized().components();
    let fp = bilinear(&es.left_plus, &psi).norm_sqr();
    let fm = bilinear(&es.left_minus, &psi).norm_sqr();
    match policy {
        FidelityPolicy::Paper => (fp, fm),
        FidelityPolicy::Population => {
            let s = fp + fm;
            if s > T::zero() {
                (fp / s, fm / s)
            } else {
                (fp, fm)
            }
        }
    }
}

const RENORM_HI: f64 = 1e6;
const RENORM_LO: f64 = 1e-6;

/// Integrates the Schrödinger equation over one transfer period of `lp` and
/// records states, norms, branch-continued energies and fidelities at
/// `observation_samples + 1` uniform times.
pub fn evolve<T: Real>(
    lp: &Loop<T>,
    psi0: &StateVector<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<EvolutionRecord<T>> {
    let n_obs = cfg.observation_samples.max(1);
    let period = lp.period();
    let norm0 = psi0.norm();
    if !(norm0 > T::zero()) || !norm0.is_finite() {
        return Err(Error::InvalidParameter("initial state must be finite and nonzero".into()));
    }

    let mut record = EvolutionRecord {
        times: Vec::with_capacity(n_obs + 1),
        states: Vec::with_capacity(n_obs + 1),
        log_norm: Vec::with_capacity(n_obs + 1),
        fidelity_plus: Vec::with_capacity(n_obs + 1),
        fidelity_minus: Vec::with_capacity(n_obs + 1),
        energies_plus: Vec::with_capacity(n_obs + 1),
        energies_minus: Vec::with_capacity(n_obs + 1),
        policy: cfg.fidelity_policy,
        loop_id: lp.id(),
        direction: lp.direction(),
    };

    let mut psi = psi0.components();
    let mut log_norm = T::zero();
    let mut prev_es: Option<Eigensystem<T>> = None;

    for k in 0..=n_obs {
        let t_k = period * T::from_usize(k).unwrap() / T::from_usize(n_obs).unwrap();
        if k > 0 {
            let t_prev = period * T::from_usize(k - 1).unwrap() / T::from_usize(n_obs).unwrap();
            integrate_segment(lp, &mut psi, &mut log_norm, t_prev, t_k, cfg, n_obs)?;
        }

        let p_k = lp.evaluate(t_k);
        let raw = eigensystem(&p_k)?;
        let (es, swapped) = match &prev_es {
            None => assign_initial_labels(raw),
            Some(prev) => {
                let cont = branch_continue_lenient(prev, &raw);
                (cont.eigensystem, cont.swapped)
            }
        };

        let state = StateVector::new(psi[0], psi[1]);
        let n = state.norm();
        let unit = state.normalized();
        let (fp, fm) = if cfg.literal_s_normalization {
            literal_fidelity(&unit, &p_k, swapped, cfg.fidelity_policy)
        } else {
            fidelity_with_policy(&unit, &es, cfg.fidelity_policy)
        };

        record.times.push(t_k);
        record.states.push(unit);
        record.log_norm.push(log_norm + n.ln());
        record.fidelity_plus.push(fp);
        record.fidelity_minus.push(fm);
        record.energies_plus.push(es.value_plus);
        record.energies_minus.push(es.value_minus);
        prev_es = Some(es);
    }
    Ok(record)
}

/// Fidelities against the modulus-normalized covectors. These follow the raw
/// principal labels, so when the continued labels are exchanged relative to
/// raw (`swapped`), the pair is reported in continued-label order.
fn literal_fidelity<T: Real>(
    unit: &StateVector<T>,
    p: &ParameterPoint<T>,
    swapped: bool,
    policy: FidelityPolicy,
) -> (T, T) {
    let (lit_plus, lit_minus) = modulus_normalized_left(p);
    let psi = unit.components();
    let mut fp = bilinear(&lit_plus, &psi).norm_sqr();
    let mut fm = bilinear(&lit_minus, &psi).norm_sqr();
    if swapped {
        std::mem::swap(&mut fp, &mut fm);
    }
    match policy {
        FidelityPolicy::Paper => (fp, fm),
        FidelityPolicy::Population => {
            let s = fp + fm;
            if s > T::zero() {
                (fp / s, fm / s)
            } else {
                (fp, fm)
            }
        }
    }
}

/// One RK4 stage evaluation of `-i H(t) psi`.
#[inline]
fn rhs<T: Real>(lp: &Loop<T>, t: T, psi: &[C<T>; 2]) -> [C<T>; 2] {
    let h = build_hamiltonian(&lp.evaluate(t));
    let hv = h.apply(psi);
    let minus_i = c(T::zero(), -T::one());
    [minus_i * hv[0], minus_i * hv[1]]
}

fn renormalize_if_needed<T: Real>(psi: &mut [C<T>; 2], log_norm: &mut T) {
    let n = (psi[0].norm_sqr() + psi[1].norm_sqr()).sqrt();
    if n > T::lit(RENORM_HI) || n < T::lit(RENORM_LO) {
        psi[0] = psi[0] / n;
        psi[1] = psi[1] / n;
        *log_norm += n.ln();
    }
}

fn integrate_segment<T: Real>(
    lp: &Loop<T>,
    psi: &mut [C<T>; 2],
    log_norm: &mut T,
    t0: T,
    t1: T,
    cfg: &IntegratorConfig<T>,
    n_obs: usize,
) -> Result<()> {
    match cfg.scheme {
        Scheme::FixedRk4 { steps } => {
            // Distribute the per-period budget over the observation segments.
            let per_segment = (steps + n_obs - 1) / n_obs;
            let m = per_segment.max(1);
            let dt = (t1 - t0) / T::from_usize(m).unwrap();
            for i in 0..m {
                let t = t0 + dt * T::from_usize(i).unwrap();
                rk4_step(lp, psi, t, dt);
                renormalize_if_needed(psi, log_norm);
            }
            Ok(())
        }
        Scheme::AdaptiveRk54 { rel_tol, min_step } => {
            adaptive_segment(lp, psi, log_norm, t0, t1, rel_tol, min_step)
        }
    }
}

#[inline]
fn rk4_step<T: Real>(lp: &Loop<T>, psi: &mut [C<T>; 2], t: T, dt: T) {
    let half = T::lit(0.5);
    let sixth = T::lit(1.0 / 6.0);
    let cdt = |x: T| c(x, T::zero());
    let k1 = rhs(lp, t, psi);
    let y2 = [psi[0] + k1[0] * cdt(dt * half), psi[1] + k1[1] * cdt(dt * half)];
    let k2 = rhs(lp, t + dt * half, &y2);
    let y3 = [psi[0] + k2[0] * cdt(dt * half), psi[1] + k2[1] * cdt(dt * half)];
    let k3 = rhs(lp, t + dt * half, &y3);
    let y4 = [psi[0] + k3[0] * cdt(dt), psi[1] + k3[1] * cdt(dt)];
    let k4 = rhs(lp, t + dt, &y4);
    let two = c(T::lit(2.0), T::zero());
    psi[0] = psi[0] + (k1[0] + two * k2[0] + two * k3[0] + k4[0]) * cdt(dt * sixth);
    psi[1] = psi[1] + (k1[1] + two * k2[1] + two * k3[1] + k4[1]) * cdt(dt * sixth);
}

// Dormand-Prince 5(4) coefficients.
const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn adaptive_segment<T: Real>(
    lp: &Loop<T>,
    psi: &mut [C<T>; 2],
    log_norm: &mut T,
    t0: T,
    t1: T,
    rel_tol: T,
    min_step: T,
) -> Result<()> {
    let mut t = t0;
    let span = t1 - t0;
    let mut dt = span * T::lit(1e-2);
    let safety = T::lit(0.9);
    while t < t1 {
        if t + dt > t1 {
            dt = t1 - t;
        }
        let mut k = [[C::new(T::zero(), T::zero()); 2]; 7];
        for stage in 0..7 {
            let mut y = *psi;
            for (j, kj) in k.iter().enumerate().take(stage) {
                let a = T::lit(DP_A[stage][j]);
                if a != T::zero() {
                    y[0] = y[0] + kj[0] * c(dt * a, T::zero());
                    y[1] = y[1] + kj[1] * c(dt * a, T::zero());
                }
            }
            k[stage] = rhs(lp, t + dt * T::lit(DP_C[stage]), &y);
        }
        let mut y5 = *psi;
        let mut y4 = *psi;
        for (j, kj) in k.iter().enumerate() {
            let b5 = T::lit(DP_B5[j]);
            let b4 = T::lit(DP_B4[j]);
            y5[0] = y5[0] + kj[0] * c(dt * b5, T::zero());
            y5[1] = y5[1] + kj[1] * c(dt * b5, T::zero());
            y4[0] = y4[0] + kj[0] * c(dt * b4, T::zero());
            y4[1] = y4[1] + kj[1] * c(dt * b4, T::zero());
        }
        let scale = (y5[0].norm_sqr() + y5[1].norm_sqr()).sqrt().max(T::one());
        let err = ((y5[0] - y4[0]).norm_sqr() + (y5[1] - y4[1]).norm_sqr()).sqrt() / scale;
        if err <= rel_tol {
            t = t + dt;
            *psi = y5;
            renormalize_if_needed(psi, log_norm);
        }
        let ratio = if err > T::zero() {
            safety * (rel_tol / err).powf(T::lit(0.2))
        } else {
            T::lit(5.0)
        };
        dt = dt * ratio.max(T::lit(0.2)).min(T::lit(5.0));
        if dt < min_step {
            return Err(Error::StepUnderflow {
                t: t.to_f64_lossy(),
                step: dt.to_f64_lossy(),
                floor: min_step.to_f64_lossy(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{eigensystem, ParameterPoint};
    use crate::trajectory::Loop;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn bell_states_are_normalized_and_orthogonal() {
        let plus = initial_bell_state::<f64>(BellSign::Plus);
        let minus = initial_bell_state::<f64>(BellSign::Minus);
        assert_abs_diff_eq!(plus.amp_e0.re, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-16);
        assert_abs_diff_eq!(plus.norm(), 1.0, epsilon = 1e-15);
        let overlap = (plus.amp_e0.conj() * minus.amp_e0 + plus.amp_g1.conj() * minus.amp_g1).norm();
        assert_abs_diff_eq!(overlap, 0.0, epsilon = 1e-16);
    }

    #[test]
    fn fidelity_of_eigenstate_is_exclusive() {
        let p = ParameterPoint::new(1.0, 0.04, 0.1, 0.1, -0.1).unwrap();
        let es = eigensystem(&p).unwrap();
        let state = StateVector::new(es.right_plus[0], es.right_plus[1]);
        let (fp, fm) = fidelity(&state, &es);
        assert!(fp > 0.0);
        assert_abs_diff_eq!(fm, 0.0, epsilon = 1e-24);
    }

    #[test]
    fn fidelities_complete_at_hermitian_point() {
        let p = ParameterPoint::new(1.0, 0.0, 0.21, 0.0, 0.0).unwrap();
        let es = eigensystem(&p).unwrap();
        let state = StateVector::new(C::new(0.3, 0.4), C::new(-0.5, 0.2));
        let (fp, fm) = fidelity(&state, &es);
        assert_abs_diff_eq!(fp + fm, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn biorthogonal_expansion_ratio() {
        // An equal right-basis superposition decomposes with the coefficients
        // the left covectors assign to it.
        let p = ParameterPoint::new(1.0, 0.03, 0.12, 0.15, -0.15).unwrap();
        let es = eigensystem(&p).unwrap();
        let cp = C::new(0.7, -0.2);
        let cm = C::new(-0.4, 0.5);
        let state = StateVector::new(
            cp * es.right_plus[0] + cm * es.right_minus[0],
            cp * es.right_plus[1] + cm * es.right_minus[1],
        );
        let (fp, fm) = fidelity(&state, &es);
        assert_abs_diff_eq!(fp / fm, cp.norm_sqr() / cm.norm_sqr(), epsilon = 1e-10);
    }

    #[test]
    fn branch_continue_identity_when_unchanged() {
        let p = ParameterPoint::new(1.0, 0.02, 0.1, 0.05, -0.05).unwrap();
        let es = eigensystem(&p).unwrap();
        let cont = branch_continue(&es, &es, 1e-6).unwrap();
        assert!(!cont.swapped);
        assert_abs_diff_eq!((cont.eigensystem.value_plus - es.value_plus).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn branch_continue_swaps_across_principal_cut() {
        // Straddle the sqrt branch cut: with gamma - kappa = 0.2 > 4g fixed,
        // the radicand is negative real at delta = 0 and the principal labels
        // exchange as delta changes sign.
        let p1 = ParameterPoint::<f64>::new(1.0, 1e-3, 0.1, 0.1, -0.1).unwrap();
        let p2 = ParameterPoint::new(1.0, -1e-3, 0.1, 0.1, -0.1).unwrap();
        let es1 = eigensystem(&p1).unwrap();
        let es2 = eigensystem(&p2).unwrap();
        let cont = branch_continue(&es1, &es2, 1e-6).unwrap();
        assert!(cont.swapped, "principal labels flip across the cut");
        // Continued values stay close: jump bounded by the parameter step.
        assert!((cont.eigensystem.value_plus - es1.value_plus).norm() < 1e-2);
        // Phase smoothing: pairing is real-positive.
        let pr = crate::float::bilinear(&es1.left_plus, &cont.eigensystem.right_plus);
        assert!(pr.im.abs() < 1e-12 && pr.re > 0.0);
    }

    #[test]
    fn branch_continue_flags_near_degenerate_step() {
        // Two points microscopically straddling the degeneracy cone.
        let g = 0.05_f64;
        let eps = 5e-15;
        let p1 = ParameterPoint::new(1.0, 0.0, g, 4.0 * g * (1.0 + eps), 0.0).unwrap();
        let p2 = ParameterPoint::new(1.0, 0.0, g, 4.0 * g * (1.0 - eps), 0.0).unwrap();
        let es1 = eigensystem(&p1).unwrap();
        let es2 = eigensystem(&p2).unwrap();
        assert!(es1.gap.norm() < 1e-7, "gap {:.3e}", es1.gap.norm());
        let err = branch_continue(&es1, &es2, 1e-6);
        assert!(matches!(err, Err(Error::AmbiguousAssignment { .. })), "{err:?}");
    }

    #[test]
    fn hermitian_loop_conserves_norm() {
        let lp = Loop::symmetric(0.21, 0.0, 0.0, -1.0, PI, 1.0).unwrap();
        let cfg = IntegratorConfig { observation_samples: 200, ..Default::default() };
        let rec = evolve(&lp, &initial_bell_state(BellSign::Plus), &cfg).unwrap();
        for &ln in &rec.log_norm {
            assert!(ln.abs() < 1e-10, "log norm {ln}");
        }
        // Populations complete in the Hermitian eigenbasis.
        for k in 0..rec.times.len() {
            assert_abs_diff_eq!(rec.fidelity_plus[k] + rec.fidelity_minus[k], 1.0, epsilon = 1e-10);
        }
        // Stationary eigenstate: the plus fidelity stays pinned at 1.
        assert!(rec.fidelity_plus.iter().all(|f| (f - 1.0).abs() < 1e-10));
    }

    #[test]
    fn record_shape_and_initial_fidelities() {
        let lp = Loop::chiral_modulated(0.1, 0.04, 0.1, -1.0, PI, 1.0).unwrap();
        let cfg = IntegratorConfig {
            scheme: Scheme::FixedRk4 { steps: 4000 },
            observation_samples: 250,
            ..Default::default()
        };
        let rec = evolve(&lp, &initial_bell_state(BellSign::Plus), &cfg).unwrap();
        assert_eq!(rec.times.len(), 251);
        assert_abs_diff_eq!(rec.fidelity_plus[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rec.fidelity_minus[0], 0.0, epsilon = 1e-12);
        assert_eq!(rec.start_label(), BellSign::Plus);
        let rec_m = evolve(&lp, &initial_bell_state(BellSign::Minus), &cfg).unwrap();
        assert_abs_diff_eq!(rec_m.fidelity_minus[0], 1.0, epsilon = 1e-12);
        assert_eq!(rec_m.start_label(), BellSign::Minus);
    }

    #[test]
    fn scale_invariance_of_fidelities() {
        let lp = Loop::chiral_modulated(0.1, 0.04, 0.1, -1.0, PI, 1.0).unwrap();
        let cfg = IntegratorConfig {
            scheme: Scheme::FixedRk4 { steps: 2000 },
            observation_samples: 100,
            ..Default::default()
        };
        let psi = initial_bell_state(BellSign::Plus);
        let scaled = StateVector::new(
            psi.amp_e0 * C::new(-2.5, 1.3),
            psi.amp_g1 * C::new(-2.5, 1.3),
        );
        let a = evolve(&lp, &psi, &cfg).unwrap();
        let b = evolve(&lp, &scaled, &cfg).unwrap();
        for k in 0..a.times.len() {
            assert_abs_diff_eq!(a.fidelity_plus[k], b.fidelity_plus[k], epsilon = 1e-12);
            assert_abs_diff_eq!(a.fidelity_minus[k], b.fidelity_minus[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn adaptive_matches_fixed_step() {
        let lp = Loop::constant_dissipation(0.2, 0.2, 0.2, 0.1, -1.0, PI, 1.0).unwrap();
        let psi = initial_bell_state(BellSign::Plus);
        let fixed = IntegratorConfig {
            scheme: Scheme::FixedRk4 { steps: 40_000 },
            observation_samples: 100,
            ..Default::default()
        };
        let adaptive = IntegratorConfig {
            scheme: Scheme::AdaptiveRk54 { rel_tol: 1e-10, min_step: 1e-12 },
            observation_samples: 100,
            ..Default::default()
        };
        let a = evolve(&lp, &psi, &fixed).unwrap();
        let b = evolve(&lp, &psi, &adaptive).unwrap();
        let (afp, afm) = a.final_fidelities();
        let (bfp, bfm) = b.final_fidelities();
        assert_abs_diff_eq!(afp, bfp, epsilon = 1e-7);
        assert_abs_diff_eq!(afm, bfm, epsilon = 1e-7);
    }

    #[test]
    fn energy_branches_are_continuous() {
        for lp in [
            Loop::symmetric(0.01, 0.2, 0.2, -1.0, PI, 1.0).unwrap(),
            Loop::chiral_modulated(0.1, 0.04, 0.1, -1.0, PI, 1.0).unwrap(),
            Loop::constant_dissipation(0.2, 0.2, 0.2, 0.1, -1.0, PI, 1.0).unwrap(),
        ] {
            let cfg = IntegratorConfig {
                scheme: Scheme::FixedRk4 { steps: 2000 },
                observation_samples: 1000,
                ..Default::default()
            };
            let rec = evolve(&lp, &initial_bell_state(BellSign::Plus), &cfg).unwrap();
            let dt = rec.times[1] - rec.times[0];
            for k in 1..rec.times.len() {
                let jump = (rec.energies_plus[k] - rec.energies_plus[k - 1]).norm();
                // Bounded by a generous local slope estimate times the step;
                // the raw branch gap is O(0.1..1), so an uncontinued label
                // jump would violate this immediately.
                assert!(jump < 5.0 * dt + 1e-4, "jump {jump} at step {k} of {}", lp.id());
            }
        }
    }

    #[test]
    fn symmetric_loop_exchanges_labels_in_both_directions() {
        // Frozen against a high-order adaptive reference integration: the
        // final state coincides with the initial Bell vector while the
        // continued labels exchange across the two degeneracy crossings, so
        // the opposite label's fidelity ends at 0.997512.
        let lp = Loop::symmetric(0.01, 0.2, 0.2, -1.0, PI, 1.0).unwrap();
        let cfg = IntegratorConfig::default();
        for l in [lp.clone(), lp.reversed()] {
            for (sign, opp_of) in [(BellSign::Plus, 1usize), (BellSign::Minus, 0usize)] {
                let rec = evolve(&l, &initial_bell_state(sign), &cfg).unwrap();
                let (fp, fm) = rec.final_fidelities();
                let fin = [fp, fm];
                assert_abs_diff_eq!(fin[opp_of], 0.99751159165062, epsilon = 1e-6);
                assert_abs_diff_eq!(fin[1 - opp_of], 0.00248840834938, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn csv_has_deterministic_row_count() {
        let lp = Loop::chiral_modulated(0.1, 0.04, 0.1, -1.0, PI, 1.0).unwrap();
        let cfg = IntegratorConfig {
            scheme: Scheme::FixedRk4 { steps: 500 },
            observation_samples: 50,
            ..Default::default()
        };
        let rec = evolve(&lp, &initial_bell_state(BellSign::Plus), &cfg).unwrap();
        let csv = rec.to_csv();
        assert_eq!(csv.lines().count(), 52); // header + samples + 1
        assert!(csv.starts_with("t,re_amp_e0"));
    }
}

