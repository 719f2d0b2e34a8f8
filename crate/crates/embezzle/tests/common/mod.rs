//! Independent run-length reference implementation used by integration
//! tests.
//!
//! Everything here re-derives the quantities under test from first
//! principles on an exact `(value, multiplicity)` run-length encoding of
//! sorted spectra, sharing no code with the library: exact integer
//! multiplicities (`u128` binomials), a literal two-pointer walk for the
//! sorted-distance sums, and a plain Kahan accumulator. Values computed
//! here are exact up to ordinary floating-point rounding, with no
//! truncation anywhere, so they can certify the library's truncated
//! interval arithmetic from the outside.

#![allow(dead_code)]

/// A descending sorted spectrum as runs of equal weights:
/// `(weight, multiplicity)` with weights strictly positive.
pub type Runs = Vec<(f64, u128)>;

/// Kahan-compensated sum.
pub fn ksum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for x in values {
        let y = x - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s
}

/// Exact binomial coefficient (n ≤ 128 stays far inside u128).
pub fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut res: u128 = 1;
    for i in 1..=k {
        res = res * (n - k + i) as u128 / i as u128;
    }
    res
}

fn sort_runs_desc(mut runs: Runs) -> Runs {
    runs.retain(|&(v, c)| v > 0.0 && c > 0);
    runs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    // merge equal adjacent values
    let mut out: Runs = Vec::with_capacity(runs.len());
    for (v, c) in runs {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 += c,
            _ => out.push((v, c)),
        }
    }
    out
}

/// Half-chain spectrum of the `sites`-fold constant-λ product state:
/// level k carries weight λ^k/(1+λ)^sites with multiplicity C(sites, k).
pub fn geometric_runs(lambda: f64, sites: u32) -> Runs {
    assert!((0.0..=1.0).contains(&lambda));
    if lambda == 0.0 || sites == 0 {
        return vec![(1.0, 1)];
    }
    let z = (1.0 + lambda).powi(sites as i32);
    let runs: Runs = (0..=sites)
        .map(|k| (lambda.powi(k as i32) / z, binom(sites as u64, k as u64)))
        .collect();
    sort_runs_desc(runs)
}

/// Uniform spectrum on `atoms` atoms.
pub fn uniform_runs(atoms: u128) -> Runs {
    vec![(1.0 / atoms as f64, atoms)]
}

/// Runs from an explicit weight list (need not be sorted).
pub fn explicit_runs(weights: &[f64]) -> Runs {
    sort_runs_desc(weights.iter().map(|&w| (w, 1)).collect())
}

/// Harmonic log-weight spectrum: weight_j ∝ 1/j, j = 1..=n.
pub fn vdh_runs(n: usize) -> Runs {
    let h = ksum((1..=n).rev().map(|j| 1.0 / j as f64));
    (1..=n).map(|j| (1.0 / (j as f64 * h), 1)).collect()
}

/// Tensor a run-length spectrum with an explicit finite spectrum.
pub fn tensor_runs(runs: &Runs, target: &[f64]) -> Runs {
    let mut out: Runs = Vec::with_capacity(runs.len() * target.len());
    for &a in target {
        if a <= 0.0 {
            continue;
        }
        for &(v, c) in runs {
            out.push((a * v, c));
        }
    }
    sort_runs_desc(out)
}

/// Exact sorted-l1 distance `Σ_i |p_i↓ − q_i↓|` between two run-length
/// spectra, by a literal rank-by-rank walk.
pub fn l1s_runs(a: &Runs, b: &Runs) -> f64 {
    let mut terms: Vec<f64> = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    let mut ra = a.first().map_or(0, |r| r.1);
    let mut rb = b.first().map_or(0, |r| r.1);
    while i < a.len() && j < b.len() {
        let n = ra.min(rb);
        terms.push(n as f64 * (a[i].0 - b[j].0).abs());
        ra -= n;
        rb -= n;
        if ra == 0 {
            i += 1;
            ra = if i < a.len() { a[i].1 } else { 0 };
        }
        if rb == 0 {
            j += 1;
            rb = if j < b.len() { b[j].1 } else { 0 };
        }
    }
    while i < a.len() {
        terms.push(ra as f64 * a[i].0);
        i += 1;
        ra = if i < a.len() { a[i].1 } else { 0 };
    }
    while j < b.len() {
        terms.push(rb as f64 * b[j].0);
        j += 1;
        rb = if j < b.len() { b[j].1 } else { 0 };
    }
    ksum(terms)
}

/// Exact sorted-overlap fidelity `Σ_i √(p_i↓ q_i↓)`.
pub fn fid_runs(a: &Runs, b: &Runs) -> f64 {
    let mut terms: Vec<f64> = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    let mut ra = a.first().map_or(0, |r| r.1);
    let mut rb = b.first().map_or(0, |r| r.1);
    while i < a.len() && j < b.len() {
        let n = ra.min(rb);
        terms.push(n as f64 * (a[i].0 * b[j].0).sqrt());
        ra -= n;
        rb -= n;
        if ra == 0 {
            i += 1;
            ra = if i < a.len() { a[i].1 } else { 0 };
        }
        if rb == 0 {
            j += 1;
            rb = if j < b.len() { b[j].1 } else { 0 };
        }
    }
    ksum(terms)
}

/// Optimal one-sided conversion error for the constant-λ chain:
/// `‖sort(ω_m⊗φ) − sort(ω_m⊗ψ)‖₁`, exact.
pub fn mono_error(lambda: f64, sites: u32, phi: &[f64], psi: &[f64]) -> f64 {
    let base = geometric_runs(lambda, sites);
    l1s_runs(&tensor_runs(&base, phi), &tensor_runs(&base, psi))
}

/// Two-sided (pure-state) conversion error `√(2 − 2 Σ √(p q))` for the
/// same task.
pub fn bip_error_runs(p: &Runs, q: &Runs) -> f64 {
    (2.0 - 2.0 * fid_runs(p, q)).max(0.0).sqrt()
}

/// Error of extracting a maximally entangled `d`-level pair from the
/// spectrum `spec` (φ pure, ψ uniform on d atoms).
pub fn bell_error(spec: &Runs, d: u128) -> f64 {
    let psi: Vec<f64> = vec![1.0 / d as f64; d as usize];
    bip_error_runs(spec, &tensor_runs(spec, &psi))
}

/// Exact harmonic-embezzler extraction error at size `n`, target dimension
/// `d` (φ pure, ψ maximally entangled on d levels).
pub fn vdh_error(n: usize, d: u128) -> f64 {
    bell_error(&vdh_runs(n), d)
}

/// Keep the `k` largest atoms; returns the kept runs and the exact
/// discarded tail mass.
pub fn truncate_runs(runs: &Runs, k: u128) -> (Runs, f64) {
    let mut out: Runs = Vec::new();
    let mut left = k;
    for &(v, c) in runs {
        let take = c.min(left);
        if take > 0 {
            out.push((v, take));
            left -= take;
        }
        if left == 0 {
            break;
        }
    }
    let kept = ksum(out.iter().map(|&(v, c)| v * c as f64));
    (out, 1.0 - kept)
}

/// Total mass of a run-length spectrum (sanity helper).
pub fn mass(runs: &Runs) -> f64 {
    ksum(runs.iter().map(|&(v, c)| v * c as f64))
}
