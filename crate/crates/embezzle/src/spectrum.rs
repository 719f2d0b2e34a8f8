//! Certified sorted-spectrum calculus.
//!
//! A [`Spectrum`] is a descending list of strictly positive weights together
//! with an exactly accounted truncation tail: `tail_mass` is the probability
//! mass of every atom that is *not* listed, and `tail_atom_bound` is an upper
//! bound on the size of any single unlisted atom. The two tail fields turn
//! truncation from a silent approximation into a certificate — distances
//! computed between truncated spectra ([`l1_sorted`], [`fidelity_sorted`])
//! return an [`Interval`] guaranteed to enclose the value the untruncated
//! spectra would give.
//!
//! Everything downstream (conversion errors, kappa searches, witnesses)
//! reduces to these primitives, so the invariants are enforced eagerly at
//! construction and preserved by every operation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;
use thiserror::Error;

/// Absolute tolerance for the mass identity `sum(weights) + tail_mass == 1`.
pub const MASS_TOL: f64 = 1e-12;

/// Errors from constructing or combining spectra.
#[derive(Debug, Error)]
pub enum SpectrumError {
    /// A weight was NaN, infinite, or negative beyond tolerance.
    #[error("invalid weight at index {index}: {value}")]
    InvalidWeight { index: usize, value: f64 },
    /// Weights were not sorted in descending order.
    #[error("weights not descending at index {index}: {prev} < {next}")]
    NotDescending { index: usize, prev: f64, next: f64 },
    /// Total mass exceeds 1 beyond tolerance.
    #[error("total mass {total} exceeds 1 beyond tolerance {tol}")]
    MassExceedsOne { total: f64, tol: f64 },
    /// Kept weights plus tail mass fail the unit-mass identity.
    #[error("mass identity violated: weights sum to {weight_sum}, tail {tail_mass}")]
    MassIdentity { weight_sum: f64, tail_mass: f64 },
    /// Tail metadata inconsistent (bound vs mass vs smallest weight).
    #[error("invalid tail: mass {tail_mass}, atom bound {tail_atom_bound}, min weight {min_weight}")]
    InvalidTail {
        tail_mass: f64,
        tail_atom_bound: f64,
        min_weight: f64,
    },
    /// No weight survived filtering; a spectrum needs at least one atom.
    #[error("no atoms above tolerance; cannot form an empty spectrum")]
    Empty,
    /// A truncation budget of zero atoms was requested.
    #[error("truncation budget must allow at least one atom")]
    ZeroBudget,
}

/// A closed interval `[lo, hi]` certified to contain a real quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// An exact (zero-width) interval.
    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    /// Construct, clamping tiny negative widths from rounding to zero width.
    pub fn new(lo: f64, hi: f64) -> Self {
        if hi >= lo {
            Interval { lo, hi }
        } else {
            debug_assert!(lo - hi < 1e-9, "interval endpoints crossed: [{lo}, {hi}]");
            let mid = 0.5 * (lo + hi);
            Interval { lo: mid, hi: mid }
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Whether `x` lies inside, widened by `slack` on both ends.
    pub fn contains(&self, x: f64, slack: f64) -> bool {
        x >= self.lo - slack && x <= self.hi + slack
    }

    /// Whether `other` lies entirely inside, widened by `slack`.
    pub fn encloses(&self, other: &Interval, slack: f64) -> bool {
        other.lo >= self.lo - slack && other.hi <= self.hi + slack
    }
}

/// Neumaier compensated summation: accurate totals for long weight lists.
pub(crate) fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// A descending, strictly positive weight list with a certified truncation
/// tail. Invariants (enforced at construction, preserved by operations):
///
/// 1. `weights` non-empty, finite, strictly positive, descending;
/// 2. `sum(weights) + tail_mass == 1` within [`MASS_TOL`];
/// 3. `tail_mass == 0` implies `tail_atom_bound == 0`;
/// 4. `tail_mass > 0` implies `0 < tail_atom_bound <= min(weights)` and
///    `tail_atom_bound <= tail_mass` (a single atom cannot exceed the tail).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    weights: Vec<f64>,
    tail_mass: f64,
    tail_atom_bound: f64,
}

impl Spectrum {
    /// Validating constructor. Takes the fields as given — no sorting, no
    /// renormalization. Use [`make_spectrum`] for the lenient path.
    pub fn new(
        weights: Vec<f64>,
        tail_mass: f64,
        tail_atom_bound: f64,
    ) -> Result<Self, SpectrumError> {
        if weights.is_empty() {
            return Err(SpectrumError::Empty);
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(SpectrumError::InvalidWeight { index: i, value: w });
            }
            if i > 0 && weights[i - 1] < w {
                return Err(SpectrumError::NotDescending {
                    index: i,
                    prev: weights[i - 1],
                    next: w,
                });
            }
        }
        if !tail_mass.is_finite() || tail_mass < 0.0 || !tail_atom_bound.is_finite() {
            return Err(SpectrumError::InvalidTail {
                tail_mass,
                tail_atom_bound,
                min_weight: *weights.last().unwrap(),
            });
        }
        let min_weight = *weights.last().unwrap();
        if tail_mass == 0.0 {
            if tail_atom_bound != 0.0 {
                return Err(SpectrumError::InvalidTail {
                    tail_mass,
                    tail_atom_bound,
                    min_weight,
                });
            }
        } else if tail_atom_bound <= 0.0
            || tail_atom_bound > min_weight * (1.0 + 1e-12)
            || tail_atom_bound > tail_mass * (1.0 + 1e-12)
        {
            return Err(SpectrumError::InvalidTail {
                tail_mass,
                tail_atom_bound,
                min_weight,
            });
        }
        let sum = neumaier_sum(weights.iter().copied());
        if (sum + tail_mass - 1.0).abs() > MASS_TOL {
            return Err(SpectrumError::MassIdentity {
                weight_sum: sum,
                tail_mass,
            });
        }
        Ok(Spectrum {
            weights,
            tail_mass,
            tail_atom_bound,
        })
    }

    /// A spectrum with no truncation tail; weights must already sum to 1.
    pub fn exact(weights: Vec<f64>) -> Result<Self, SpectrumError> {
        Spectrum::new(weights, 0.0, 0.0)
    }

    /// The single-atom unit spectrum (the tensor identity).
    pub fn unit() -> Self {
        Spectrum {
            weights: vec![1.0],
            tail_mass: 0.0,
            tail_atom_bound: 0.0,
        }
    }

    /// The uniform spectrum on `d` atoms (a maximally entangled target).
    pub fn uniform(d: usize) -> Result<Self, SpectrumError> {
        if d == 0 {
            return Err(SpectrumError::Empty);
        }
        Spectrum::new(vec![1.0 / d as f64; d], 0.0, 0.0)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: at least one atom
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn tail_atom_bound(&self) -> f64 {
        self.tail_atom_bound
    }

    /// Whether the spectrum carries no truncation tail.
    pub fn is_exact(&self) -> bool {
        self.tail_mass == 0.0
    }

    pub fn min_weight(&self) -> f64 {
        *self.weights.last().unwrap()
    }

    /// Mass of the listed weights (1 − tail_mass, computed directly).
    pub fn kept_mass(&self) -> f64 {
        neumaier_sum(self.weights.iter().copied())
    }

    /// Tensor product truncated to the `k` largest product atoms.
    ///
    /// Product atoms are enumerated best-first over the sorted grid
    /// `w_i * v_j`, so the kept block is exactly the top-k multiset. All
    /// dropped mass — dropped products, and anything involving either input
    /// tail — is accounted into the output `tail_mass`; the output
    /// `tail_atom_bound` dominates the first dropped product as well as the
    /// largest conceivable tail-involving atom. If that bound exceeds a kept
    /// weight, trailing kept atoms are cut back into the tail so invariant 4
    /// survives (the cut can never reach the leading atom).
    pub fn tensor(&self, other: &Spectrum, k: usize) -> Result<Spectrum, SpectrumError> {
        if k == 0 {
            return Err(SpectrumError::ZeroBudget);
        }
        let p = &self.weights;
        let q = &other.weights;

        #[derive(PartialEq)]
        struct Cell {
            value: f64,
            i: usize,
            j: usize,
        }
        impl Eq for Cell {}
        impl PartialOrd for Cell {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Cell {
            fn cmp(&self, other: &Self) -> Ordering {
                // Values are finite positive; break ties by index for
                // determinism.
                self.value
                    .partial_cmp(&other.value)
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| (other.i, other.j).cmp(&(self.i, self.j)))
            }
        }

        let mut heap = BinaryHeap::with_capacity(k.min(p.len() * q.len()) + 2);
        heap.push(Cell {
            value: p[0] * q[0],
            i: 0,
            j: 0,
        });
        let mut kept: Vec<f64> = Vec::with_capacity(k.min(p.len() * q.len()));
        let mut first_dropped_product = 0.0f64;
        while let Some(Cell { value, i, j }) = heap.pop() {
            if kept.len() == k {
                first_dropped_product = value;
                break;
            }
            kept.push(value);
            // Staircase frontier: each (i, j) is generated exactly once.
            if j + 1 < q.len() {
                heap.push(Cell {
                    value: p[i] * q[j + 1],
                    i,
                    j: j + 1,
                });
            }
            if j == 0 && i + 1 < p.len() {
                heap.push(Cell {
                    value: p[i + 1] * q[0],
                    i: i + 1,
                    j: 0,
                });
            }
        }

        // Largest atom that could live in the output tail: the first dropped
        // known-known product, or a known atom times the other side's largest
        // conceivable tail atom.
        let mut bound = first_dropped_product;
        if other.tail_mass > 0.0 {
            bound = bound.max(p[0] * other.tail_atom_bound);
        }
        if self.tail_mass > 0.0 {
            bound = bound.max(self.tail_atom_bound * q[0]);
        }
        // Cut rule: trailing kept atoms smaller than the bound move to the
        // tail. The leading atom p[0]*q[0] dominates every bound candidate,
        // so at least one atom always survives.
        while kept.len() > 1 && *kept.last().unwrap() < bound {
            kept.pop();
        }
        let kept_mass = neumaier_sum(kept.iter().copied());
        let mut tail = (1.0 - kept_mass).max(0.0);
        if first_dropped_product == 0.0
            && self.is_exact()
            && other.is_exact()
            && tail < MASS_TOL
        {
            // Full enumeration of exact inputs: the residual is rounding
            // dust, not a truncation tail.
            tail = 0.0;
        }
        let tail_atom_bound = if tail == 0.0 {
            0.0
        } else {
            bound.min(*kept.last().unwrap()).min(tail).max(f64::MIN_POSITIVE)
        };
        Spectrum::new(kept, tail, tail_atom_bound)
    }

    /// `m`-fold tensor power truncated to `k` atoms.
    ///
    /// Intermediate products keep up to `4k` atoms (oversampling reduces
    /// compounding of intermediate cuts; tail accounting stays exact), and
    /// the final result is truncated back to `k`. `m == 0` returns the unit
    /// spectrum.
    pub fn tensor_power(&self, m: usize, k: usize) -> Result<Spectrum, SpectrumError> {
        if k == 0 {
            return Err(SpectrumError::ZeroBudget);
        }
        if m == 0 {
            return Ok(Spectrum::unit());
        }
        let oversample = k.saturating_mul(4);
        let mut acc = self.clone();
        for _ in 1..m {
            acc = acc.tensor(self, oversample)?;
        }
        acc.truncate_to(k)
    }

    /// Keep at most `k` atoms, moving the remainder into the tail.
    pub fn truncate_to(&self, k: usize) -> Result<Spectrum, SpectrumError> {
        if k == 0 {
            return Err(SpectrumError::ZeroBudget);
        }
        if self.weights.len() <= k {
            return Ok(self.clone());
        }
        let kept: Vec<f64> = self.weights[..k].to_vec();
        let first_dropped = self.weights[k];
        let kept_mass = neumaier_sum(kept.iter().copied());
        let tail = (1.0 - kept_mass).max(0.0);
        let bound = if tail == 0.0 {
            0.0
        } else {
            first_dropped
                .max(self.tail_atom_bound)
                .min(tail)
                .max(f64::MIN_POSITIVE)
        };
        Spectrum::new(kept, tail, bound)
    }
}

/// Lenient constructor: sorts raw weights, sweeps entries at or below `tol`
/// (and any missing mass) into the certified tail, and rescales by the total
/// when the raw mass overshoots 1 by at most `tol`.
///
/// Missing mass (inputs summing to less than 1) is *not* renormalized — the
/// deficit becomes `tail_mass`, with `tail_atom_bound` set to the smallest
/// kept weight (the caller's contract: the input is a descending truncation,
/// so no unlisted atom exceeds the listed minimum).
pub fn make_spectrum(raw: &[f64], tol: f64) -> Result<Spectrum, SpectrumError> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(SpectrumError::InvalidWeight {
            index: usize::MAX,
            value: tol,
        });
    }
    for (i, &w) in raw.iter().enumerate() {
        if !w.is_finite() || w < -tol {
            return Err(SpectrumError::InvalidWeight { index: i, value: w });
        }
    }
    let mut entries: Vec<f64> = raw.iter().copied().map(|w| w.max(0.0)).collect();
    entries.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let total = neumaier_sum(entries.iter().copied());
    if total > 1.0 + tol.max(MASS_TOL) {
        return Err(SpectrumError::MassExceedsOne {
            total,
            tol: tol.max(MASS_TOL),
        });
    }
    if total > 1.0 {
        // Honest floating-point overshoot: scale back onto the simplex.
        let scale = 1.0 / total;
        for w in &mut entries {
            *w *= scale;
        }
    }
    let kept: Vec<f64> = entries.iter().copied().take_while(|&w| w > tol).collect();
    if kept.is_empty() {
        return Err(SpectrumError::Empty);
    }
    let dropped_max = entries.get(kept.len()).copied().unwrap_or(0.0);
    let kept_mass = neumaier_sum(kept.iter().copied());
    let tail = (1.0 - kept_mass).max(0.0);
    let deficit = 1.0 - total.min(1.0);
    let min_kept = *kept.last().unwrap();
    let bound = if tail <= 0.0 {
        0.0
    } else if deficit > MASS_TOL {
        // Unknown unlisted atoms: bounded only by the smallest kept weight.
        min_kept.min(tail)
    } else {
        dropped_max.min(tail).max(f64::MIN_POSITIVE)
    };
    Spectrum::new(kept, tail, bound)
}

/// l1 distance between the full (untruncated) sorted spectra, as a certified
/// enclosure computed from the truncations.
///
/// With both spectra exact this is the exact value `sum_i |p_i - q_i|`
/// (zero-width interval) — which equals the trace distance between the
/// corresponding density operators minimized over the unitary orbit.
pub fn l1_sorted(a: &Spectrum, b: &Spectrum) -> Interval {
    let p = a.weights();
    let q = b.weights();
    let c = p.len().min(q.len());
    let known = neumaier_sum((0..c).map(|i| (p[i] - q[i]).abs()));
    // Residual mass beyond the common prefix: each side's tail plus any
    // listed atoms the other side cannot match position-by-position.
    let p_resid = a.tail_mass() + neumaier_sum(p[c..].iter().copied());
    let q_resid = b.tail_mass() + neumaier_sum(q[c..].iter().copied());
    let lo = (known + (p_resid - q_resid).abs()).min(2.0);
    let hi = (known + p_resid + q_resid).min(2.0);
    Interval::new(lo.max(0.0), hi.max(lo.max(0.0)))
}

/// Fidelity overlap `sum_i sqrt(p_i q_i)` between the full sorted spectra,
/// as a certified enclosure. The upper endpoint credits the residual mass via
/// Cauchy–Schwarz; for exact inputs the interval has zero width.
pub fn fidelity_sorted(a: &Spectrum, b: &Spectrum) -> Interval {
    let p = a.weights();
    let q = b.weights();
    let c = p.len().min(q.len());
    let lo = neumaier_sum((0..c).map(|i| (p[i] * q[i]).sqrt()));
    let p_resid = a.tail_mass() + neumaier_sum(p[c..].iter().copied());
    let q_resid = b.tail_mass() + neumaier_sum(q[c..].iter().copied());
    let hi = (lo + (p_resid * q_resid).sqrt()).min(1.0);
    let lo = lo.min(1.0);
    Interval::new(lo, hi.max(lo))
}
