//! Independent validation oracles.
//!
//! The production quantities are closed-form functionals of sorted spectra.
//! This module recomputes them the expensive way — direct minimization over
//! unitary orbits, Schmidt decompositions of explicit state vectors, exact
//! diagonalization of small spin chains — so tests can certify the spectrum
//! calculus against implementations that share none of its code paths.
//!
//! Everything here is deterministic given a seed and sized for desk-scale
//! cross-checks (dimensions ≤ a few hundred, chains up to 12 sites).

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::models::OCC_TIE_BREAK;

type C = Complex<f64>;

/// Errors from oracle computations.
#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("iteration did not converge: residual {residual}")]
    Convergence { residual: f64 },
}

/// Squared singular values (descending) of a pure bipartite state given as
/// its coefficient matrix — the entanglement spectrum.
pub fn schmidt_spectrum(state: &DMatrix<C>) -> Vec<f64> {
    let svd = state.clone().svd(false, false);
    let mut p: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
    p.sort_by(|a, b| b.partial_cmp(a).unwrap());
    p
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller from two open uniforms.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn random_complex_matrix(n: usize, m: usize, rng: &mut ChaCha8Rng) -> DMatrix<C> {
    DMatrix::from_fn(n, m, |_, _| C::new(gauss(rng), gauss(rng)))
}

/// Haar-ish random unitary from the QR decomposition of a complex Gaussian
/// matrix.
pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<C> {
    let qr = random_complex_matrix(n, n, rng).qr();
    qr.q()
}

/// A deterministic seeded RNG for oracle searches.
pub fn oracle_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn polar_maximizer(m: &DMatrix<C>) -> DMatrix<C> {
    // Unitary U maximizing Re tr(U M): U = V U_svd^† for M = U_svd Σ V^†.
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd.u requested");
    let v_t = svd.v_t.expect("svd.v_t requested");
    v_t.adjoint() * u.adjoint()
}

/// Upper bound on alternating sweeps per restart; convergence is linear,
/// so this is generous for any tolerance down to machine precision.
const MAX_SWEEPS: usize = 4000;

/// Minimum of `‖(U⊗V)|a⟩ − |b⟩‖₂` over local unitaries U, V, by
/// alternating polar-factor maximization of the overlap, converged when a
/// sweep improves it by less than `tol`. States are coefficient matrices
/// (rows: first factor). The first restart starts from the Schmidt-basis
/// alignment of the two states; remaining restarts start from random
/// unitaries and certify that nothing beats it. Returns the best error
/// found (an upper bound on the true minimum that empirically attains it;
/// the closed form is `√(2 − 2 Σ_i √(p_i↓ q_i↓))`).
pub fn min_vector_error_local_unitaries(
    a: &DMatrix<C>,
    b: &DMatrix<C>,
    restarts: usize,
    tol: f64,
    seed: u64,
) -> Result<f64, OracleError> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(OracleError::Dimension(format!(
            "{}x{} vs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(OracleError::InvalidParameter {
            name: "tol",
            value: tol,
        });
    }
    // Schmidt-basis alignment: with a = Ua Σa VtA and b = Ub Σb VtB
    // (descending singular values), the start Vᵀ = VtA† VtB makes the first
    // U-step reach overlap Σ √(p_i↓ q_i↓) directly.
    let svd_a = a.clone().svd(true, true);
    let svd_b = b.clone().svd(true, true);
    let aligned_vt = svd_a.v_t.as_ref().expect("svd.v_t requested").adjoint()
        * svd_b.v_t.as_ref().expect("svd.v_t requested");
    let mut rng = oracle_rng(seed);
    let mut best_overlap = f64::NEG_INFINITY;
    for restart in 0..restarts.max(1) {
        // Work with the right multiplier W = Vᵀ: the moved state has
        // coefficient matrix U A W and overlap Re tr((U A W)† B).
        let mut w = if restart == 0 {
            aligned_vt.clone()
        } else {
            random_unitary(a.ncols(), &mut rng)
        };
        let mut overlap = f64::NEG_INFINITY;
        for _ in 0..MAX_SWEEPS {
            // Fix W, optimize U: overlap = Re tr(U · (A W B†)).
            let m_u = a * &w * b.adjoint();
            let u = polar_maximizer(&m_u);
            // Fix U, optimize W: overlap = Re tr(W · (B† U A)).
            let m_w = b.adjoint() * &u * a;
            w = polar_maximizer(&m_w);
            let new_overlap = ((&u * a * &w).adjoint() * b).trace().re;
            if (new_overlap - overlap).abs() < tol {
                overlap = new_overlap;
                break;
            }
            overlap = new_overlap;
        }
        best_overlap = best_overlap.max(overlap);
    }
    Ok((2.0 - 2.0 * best_overlap).max(0.0).sqrt())
}

fn trace_norm_hermitian(m: &DMatrix<C>) -> f64 {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    eig.eigenvalues.iter().map(|e| e.abs()).sum()
}

fn hermitian_eigen_desc(m: &DMatrix<C>) -> (Vec<f64>, DMatrix<C>) {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap()
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Minimum of `‖UρU† − σ‖₁` over unitaries U, by eigenbasis alignment plus
/// an annealed random-perturbation walk (QR retraction). The alignment
/// candidate — mapping ρ's descending eigenbasis onto σ's — already attains
/// the sorted-spectrum closed form `Σ_i |p_i↓ − q_i↓|`; the walk certifies
/// that perturbations do not improve on it.
pub fn min_trace_distance_unitary_orbit(
    rho: &DMatrix<C>,
    sigma: &DMatrix<C>,
    restarts: usize,
    iters: usize,
    seed: u64,
) -> Result<f64, OracleError> {
    if rho.nrows() != sigma.nrows() || !rho.is_square() || !sigma.is_square() {
        return Err(OracleError::Dimension(format!(
            "{}x{} vs {}x{}",
            rho.nrows(),
            rho.ncols(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let n = rho.nrows();
    let mut rng = oracle_rng(seed);
    let (_, r_vecs) = hermitian_eigen_desc(rho);
    let (_, s_vecs) = hermitian_eigen_desc(sigma);
    let align = &s_vecs * r_vecs.adjoint();
    let mut best = f64::INFINITY;
    for restart in 0..restarts.max(1) {
        let mut u = if restart == 0 {
            align.clone()
        } else {
            random_unitary(n, &mut rng)
        };
        let mut current = trace_norm_hermitian(&(&u * rho * u.adjoint() - sigma));
        let mut eps = 0.3f64;
        let mut rejected = 0usize;
        for _ in 0..iters {
            let g = random_complex_matrix(n, n, &mut rng);
            let candidate = (&u + &g * C::new(eps, 0.0)).qr().q();
            let value = trace_norm_hermitian(&(&candidate * rho * candidate.adjoint() - sigma));
            if value < current - 1e-15 {
                current = value;
                u = candidate;
                rejected = 0;
            } else {
                rejected += 1;
                if rejected >= 20 {
                    eps *= 0.5;
                    rejected = 0;
                    if eps < 1e-6 {
                        break;
                    }
                }
            }
        }
        best = best.min(current);
    }
    Ok(best)
}

/// Outcome of [`monopartite_to_bipartite_check`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct MonoBipReport {
    /// Best `‖(U⊗V)|Ω⊗Φ⟩ − |Ω⊗Ψ⟩‖₂` found on dense purifications.
    pub vector_error: f64,
    /// Best `‖u(ω⊗φ)u† − ω⊗ψ‖₁` found on dense density matrices.
    pub trace_error: f64,
    pub pass: bool,
}

/// Dense check that one-sided (trace-norm) convertibility implies two-sided
/// (vector-norm) convertibility quantitatively: build ω⊗φ and ω⊗ψ as
/// explicit density matrices, purify them symmetrically, minimize both
/// errors over unitary orbits with the search oracles, and verify
/// `vector_error ≤ √(trace_error) + tol`.
///
/// Total dense dimension (product of resource and target atom counts) is
/// capped at 12 so the purifications stay within 12×12.
pub fn monopartite_to_bipartite_check(
    omega: &crate::spectrum::Spectrum,
    pair: &crate::embezzlement::TargetPair,
    tol: f64,
    seed: u64,
) -> Result<MonoBipReport, OracleError> {
    let n = omega.len() * pair.phi().len().max(pair.psi().len());
    if n > 12 {
        return Err(OracleError::InvalidParameter {
            name: "dense_dim",
            value: n as f64,
        });
    }
    if !omega.is_exact() || tol.is_nan() || tol <= 0.0 {
        return Err(OracleError::InvalidParameter {
            name: "inputs",
            value: tol,
        });
    }
    let full = |target: &crate::spectrum::Spectrum| -> Vec<f64> {
        let mut w: Vec<f64> = omega
            .weights()
            .iter()
            .flat_map(|&a| target.weights().iter().map(move |&b| a * b))
            .collect();
        w.sort_by(|a, b| b.partial_cmp(a).unwrap());
        w.resize(n, 0.0);
        w
    };
    let p = full(pair.phi());
    let q = full(pair.psi());
    let diag = |w: &[f64], f: fn(f64) -> f64| {
        DMatrix::from_fn(n, n, |i, j| if i == j { C::new(f(w[i]), 0.0) } else { C::new(0.0, 0.0) })
    };
    // Scramble both objects so the searches do real work.
    let mut rng = oracle_rng(seed);
    let (ua, ub) = (random_unitary(n, &mut rng), random_unitary(n, &mut rng));
    let (wa, wb) = (random_unitary(n, &mut rng), random_unitary(n, &mut rng));
    let rho = &ua * diag(&p, |x| x) * ua.adjoint();
    let sigma = &ub * diag(&q, |x| x) * ub.adjoint();
    let trace_error = min_trace_distance_unitary_orbit(&rho, &sigma, 2, 80, seed ^ 1)?;
    // Purifications |√ρ⟩: coefficient matrix √ρ reshaped, here diag(√w)
    // rotated by local unitaries on both tensor factors.
    let amp_a = &ua * diag(&p, f64::sqrt) * wa.transpose();
    let amp_b = &ub * diag(&q, f64::sqrt) * wb.transpose();
    let vector_error = min_vector_error_local_unitaries(&amp_a, &amp_b, 3, 1e-13, seed ^ 2)?;
    let pass = vector_error <= trace_error.max(0.0).sqrt() + tol;
    Ok(MonoBipReport {
        vector_error,
        trace_error,
        pass,
    })
}

/// Exact diagonalization of the open XY chain
/// `H = −Σ_j [ (1+γ)/2 σˣσˣ + (1−γ)/2 σʸσʸ ] − (h − tie) Σ_j σᶻ_j`
/// (the same Fermi-level tie-break as the correlation pipeline). Dense
/// eigensolve for `l ≤ 8`; Lanczos with full reorthogonalization and an
/// on-the-fly bitwise matvec for `l ≤ 12`. Returns the ground energy and
/// the descending half-chain entanglement spectrum.
pub fn exact_diag_xy(l: usize, gamma: f64, h: f64, seed: u64) -> Result<(f64, Vec<f64>), OracleError> {
    if l < 2 || !l.is_multiple_of(2) {
        return Err(OracleError::InvalidParameter {
            name: "l",
            value: l as f64,
        });
    }
    if l > 12 {
        return Err(OracleError::InvalidParameter {
            name: "l",
            value: l as f64,
        });
    }
    let dim = 1usize << l;
    let h_eff = h - OCC_TIE_BREAK;
    let diag: Vec<f64> = (0..dim)
        .map(|b: usize| {
            let up = l as i32 - 2 * (b.count_ones() as i32);
            -h_eff * up as f64
        })
        .collect();
    let matvec = |v: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::from_element(dim, 0.0);
        for b in 0..dim {
            let amp = v[b];
            if amp == 0.0 {
                continue;
            }
            out[b] += diag[b] * amp;
            for j in 0..l - 1 {
                let mask = 0b11usize << j;
                let bits = (b >> j) & 0b11;
                let flipped = b ^ mask;
                match bits {
                    0b01 | 0b10 => out[flipped] -= amp,
                    _ => {
                        if gamma != 0.0 {
                            out[flipped] -= gamma * amp;
                        }
                    }
                }
            }
        }
        out
    };

    let (energy, ground) = if l <= 8 {
        let mut hm = DMatrix::<f64>::zeros(dim, dim);
        for b in 0..dim {
            let mut e = DVector::from_element(dim, 0.0);
            e[b] = 1.0;
            hm.set_column(b, &matvec(&e));
        }
        let eig = nalgebra::SymmetricEigen::new(hm);
        let (mut idx, mut min) = (0usize, f64::INFINITY);
        for (i, &e) in eig.eigenvalues.iter().enumerate() {
            if e < min {
                min = e;
                idx = i;
            }
        }
        (min, eig.eigenvectors.column(idx).into_owned())
    } else {
        lanczos_ground(&matvec, dim, 200, seed)?
    };

    // Half-chain reduced spectrum: reshape site bits (low bits = left block)
    // and take squared singular values.
    let half = l / 2;
    let rows = 1usize << half;
    let m = DMatrix::<f64>::from_fn(rows, rows, |left, right| ground[left + (right << half)]);
    let svd = m.svd(false, false);
    let mut spectrum: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
    spectrum.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok((energy, spectrum))
}

fn lanczos_ground(
    matvec: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    dim: usize,
    max_iters: usize,
    seed: u64,
) -> Result<(f64, DVector<f64>), OracleError> {
    let mut rng = oracle_rng(seed);
    let mut v = DVector::from_fn(dim, |_, _| gauss(&mut rng));
    v /= v.norm();
    let mut basis: Vec<DVector<f64>> = vec![v.clone()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    for j in 0..max_iters.min(dim) {
        let mut w = matvec(&basis[j]);
        let alpha = basis[j].dot(&w);
        alphas.push(alpha);
        w -= &basis[j] * alpha;
        if j > 0 {
            w -= &basis[j - 1] * betas[j - 1];
        }
        // Full reorthogonalization, twice for numerical safety.
        for _ in 0..2 {
            for b in &basis {
                let overlap = b.dot(&w);
                w -= b * overlap;
            }
        }
        let beta = w.norm();
        if beta < 1e-12 {
            break;
        }
        betas.push(beta);
        basis.push(w / beta);
    }
    let k = alphas.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(t);
    let (mut idx, mut min) = (0usize, f64::INFINITY);
    for (i, &e) in eig.eigenvalues.iter().enumerate() {
        if e < min {
            min = e;
            idx = i;
        }
    }
    let y = eig.eigenvectors.column(idx);
    let mut x = DVector::from_element(dim, 0.0);
    for (i, b) in basis.iter().take(k).enumerate() {
        x += b * y[i];
    }
    x /= x.norm();
    let residual = (matvec(&x) - &x * min).norm();
    if residual > 1e-8 {
        return Err(OracleError::Convergence { residual });
    }
    Ok((min, x))
}
