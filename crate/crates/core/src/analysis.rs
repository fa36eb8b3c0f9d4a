//! Turning evolution records into verdicts.
//!
//! A pair of traversals (one clockwise, one counterclockwise, same initial
//! eigenstate) classifies as a symmetric swap, a symmetric identity, or a
//! chiral transfer depending on which labeled eigenstate each direction ends
//! in. Adiabaticity diagnostics quantify how gentle a loop is: the minimum
//! gap along it, the peak nonadiabatic coupling, and the integrated
//! imaginary part of the squared gap (which vanishes identically for loops
//! that keep `delta = 0`, the regime where direction-independent transfer is
//! argued to survive).

use crate::dynamics::{
    assign_initial_labels, branch_continue_lenient, BellSign, EvolutionRecord, StateVector,
};
use crate::error::{Error, Result};
use crate::float::{bilinear, Real, C};
use crate::model::{eigensystem, gap_squared};
use crate::trajectory::{Direction, Loop};

/// What one traversal did to the starting eigenstate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionMap {
    Identity,
    Swap,
    Indeterminate,
}

impl DirectionMap {
    pub fn name(self) -> &'static str {
        match self {
            DirectionMap::Identity => "IDENTITY",
            DirectionMap::Swap => "SWAP",
            DirectionMap::Indeterminate => "INDETERMINATE",
        }
    }
}

/// Joint classification of the two directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferClass {
    SymmetricSwap,
    SymmetricIdentity,
    Chiral,
    Indeterminate,
}

impl TransferClass {
    pub fn name(self) -> &'static str {
        match self {
            TransferClass::SymmetricSwap => "SYMMETRIC_SWAP",
            TransferClass::SymmetricIdentity => "SYMMETRIC_IDENTITY",
            TransferClass::Chiral => "CHIRAL",
            TransferClass::Indeterminate => "INDETERMINATE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "SYMMETRIC_SWAP" => Some(TransferClass::SymmetricSwap),
            "SYMMETRIC_IDENTITY" => Some(TransferClass::SymmetricIdentity),
            "CHIRAL" => Some(TransferClass::Chiral),
            "INDETERMINATE" => Some(TransferClass::Indeterminate),
            _ => None,
        }
    }
}

/// Endpoint fidelities by direction and final label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointFidelities<T> {
    pub cw_plus: T,
    pub cw_minus: T,
    pub ccw_plus: T,
    pub ccw_minus: T,
}

/// Full classification result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferVerdict<T> {
    pub cw_map: DirectionMap,
    pub ccw_map: DirectionMap,
    pub class: TransferClass,
    pub endpoint_fidelities: EndpointFidelities<T>,
    pub threshold: T,
    pub start_label: BellSign,
}

/// Classifies a clockwise/counterclockwise pair of records.
///
/// Per direction: SWAP when the final fidelity of the opposite label clears
/// the threshold, IDENTITY when the same label does, INDETERMINATE otherwise.
/// The joint class follows: both SWAP -> symmetric swap, both IDENTITY ->
/// symmetric identity, two different determinate maps -> chiral.
pub fn classify_transfer<T: Real>(
    rec_cw: &EvolutionRecord<T>,
    rec_ccw: &EvolutionRecord<T>,
    threshold: T,
) -> Result<TransferVerdict<T>> {
    if !(threshold > T::lit(0.5) && threshold <= T::one()) {
        return Err(Error::InvalidParameter(format!(
            "classification threshold must lie in (0.5, 1], got {threshold}"
        )));
    }
    if rec_cw.direction != Direction::Clockwise || rec_ccw.direction != Direction::Counterclockwise
    {
        return Err(Error::MismatchedRecords(format!(
            "expected (cw, ccw) records, got ({}, {})",
            rec_cw.direction.name(),
            rec_ccw.direction.name()
        )));
    }
    if rec_cw.loop_id != rec_ccw.loop_id {
        return Err(Error::MismatchedRecords(format!(
            "records come from different loops: {} vs {}",
            rec_cw.loop_id, rec_ccw.loop_id
        )));
    }
    if rec_cw.start_label() != rec_ccw.start_label() {
        return Err(Error::MismatchedRecords(
            "records start from different labeled eigenstates".into(),
        ));
    }

    let start = rec_cw.start_label();
    let map_of = |rec: &EvolutionRecord<T>| -> DirectionMap {
        let (fp, fm) = rec.final_fidelities();
        let (same, opp) = match start {
            BellSign::Plus => (fp, fm),
            BellSign::Minus => (fm, fp),
        };
        if opp >= threshold && opp > same {
            DirectionMap::Swap
        } else if same >= threshold && same > opp {
            DirectionMap::Identity
        } else {
            DirectionMap::Indeterminate
        }
    };
    let cw_map = map_of(rec_cw);
    let ccw_map = map_of(rec_ccw);
    let class = match (cw_map, ccw_map) {
        (DirectionMap::Swap, DirectionMap::Swap) => TransferClass::SymmetricSwap,
        (DirectionMap::Identity, DirectionMap::Identity) => TransferClass::SymmetricIdentity,
        (DirectionMap::Indeterminate, _) | (_, DirectionMap::Indeterminate) => {
            TransferClass::Indeterminate
        }
        _ => TransferClass::Chiral,
    };
    let (cw_fp, cw_fm) = rec_cw.final_fidelities();
    let (ccw_fp, ccw_fm) = rec_ccw.final_fidelities();
    Ok(TransferVerdict {
        cw_map,
        ccw_map,
        class,
        endpoint_fidelities: EndpointFidelities {
            cw_plus: cw_fp,
            cw_minus: cw_fm,
            ccw_plus: ccw_fp,
            ccw_minus: ccw_fm,
        },
        threshold,
        start_label: start,
    })
}

/// Adiabaticity diagnostics along one transfer period of a loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticityMetrics<T> {
    /// Minimum `|Delta_E|` over the samples.
    pub min_gap: T,
    /// Peak nonadiabatic coupling `|<l_-+| d/dt r_+->|`, estimated by central
    /// finite differences of the branch-continued, phase-smoothed
    /// eigenvectors.
    pub max_coupling_rate: T,
    /// Integral of `|Im(Delta_E^2)|` over one period (trapezoid). Zero
    /// exactly when the squared gap stays real, as it does whenever the loop
    /// keeps `delta = 0`; strictly positive for detuning-modulated loops.
    pub imag_gap_integral: T,
}

/// Computes the adiabaticity diagnostics from `n_samples` uniform samples.
pub fn adiabaticity_metrics<T: Real>(lp: &Loop<T>, n_samples: usize) -> Result<AdiabaticityMetrics<T>> {
    let n = n_samples.max(16);
    let period = lp.period();
    let dt = period / T::from_usize(n).unwrap();

    // Branch-continued eigensystems at the sample times.
    let mut systems = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = period * T::from_usize(k).unwrap() / T::from_usize(n).unwrap();
        let raw = eigensystem(&lp.evaluate(t))?;
        let es = match systems.last() {
            None => assign_initial_labels(raw).0,
            Some(prev) => branch_continue_lenient(prev, &raw).eigensystem,
        };
        systems.push(es);
    }

    let mut min_gap = T::infinity();
    let mut imag_integral = T::zero();
    for k in 0..=n {
        let t = period * T::from_usize(k).unwrap() / T::from_usize(n).unwrap();
        let p = lp.evaluate(t);
        min_gap = min_gap.min(systems[k].gap.norm());
        let weight = if k == 0 || k == n { T::lit(0.5) } else { T::one() };
        imag_integral += weight * gap_squared(&p).im.abs() * dt;
    }

    let mut max_coupling = T::zero();
    for k in 1..n {
        let ddt = |next: &[C<T>; 2], prev: &[C<T>; 2]| -> [C<T>; 2] {
            let two_dt = C::new(dt + dt, T::zero());
            [(next[0] - prev[0]) / two_dt, (next[1] - prev[1]) / two_dt]
        };
        let dr_plus = ddt(&systems[k + 1].right_plus, &systems[k - 1].right_plus);
        let dr_minus = ddt(&systems[k + 1].right_minus, &systems[k - 1].right_minus);
        let c1 = bilinear(&systems[k].left_minus, &dr_plus).norm();
        let c2 = bilinear(&systems[k].left_plus, &dr_minus).norm();
        max_coupling = max_coupling.max(c1).max(c2);
    }

    Ok(AdiabaticityMetrics {
        min_gap,
        max_coupling_rate: max_coupling,
        imag_gap_integral: imag_integral,
    })
}

/// Convenience wrapper: evolves both directions of `lp` from the labeled
/// eigenstate closest to the requested Bell state and classifies the pair.
pub fn classify_loop<T: Real>(
    lp: &Loop<T>,
    start: BellSign,
    cfg: &crate::dynamics::IntegratorConfig<T>,
    threshold: T,
) -> Result<TransferVerdict<T>> {
    let (cw, ccw) = match lp.direction() {
        Direction::Clockwise => (lp.clone(), lp.reversed()),
        Direction::Counterclockwise => (lp.reversed(), lp.clone()),
    };
    let psi0 = starting_eigenstate(&cw, start)?;
    let rec_cw = crate::dynamics::evolve(&cw, &psi0, cfg)?;
    let rec_ccw = crate::dynamics::evolve(&ccw, &psi0, cfg)?;
    classify_transfer(&rec_cw, &rec_ccw, threshold)
}

/// The labeled instantaneous eigenstate at `t = 0` (the Bell state itself when
/// the loop endpoints satisfy the Bell condition).
pub fn starting_eigenstate<T: Real>(lp: &Loop<T>, label: BellSign) -> Result<StateVector<T>> {
    let raw = eigensystem(&lp.evaluate(T::zero()))?;
    let es = assign_initial_labels(raw).0;
    let v = match label {
        BellSign::Plus => es.right_plus,
        BellSign::Minus => es.right_minus,
    };
    Ok(StateVector::new(v[0], v[1]).normalized())
}
