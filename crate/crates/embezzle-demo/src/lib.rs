//! Browser demo: three interactive views over the core library, exported
//! through wasm-bindgen as JSON-string functions so the page needs no
//! framework — `www/index.html` calls them and draws on canvases.
//!
//! Everything here is a pure function of its arguments (no entropy, no
//! I/O), which is what makes the crate compile for `wasm32-unknown-unknown`
//! with the core's default features off. The same functions are unit-tested
//! natively by parsing their JSON.

use serde_json::json;
use wasm_bindgen::prelude::wasm_bindgen;

use embezzle::{
    bipartite_error, geometric_spectrum, kappa_estimate, kappa_max_for_type, monopartite_error,
    van_dam_hayden_spectrum, vdh_bound, witness_maximal_error, FactorType, SearchConfig, Spectrum,
    TargetPair, TruncationBudget,
};

/// Hard ceilings keeping every interaction comfortably under a second in a
/// browser tab.
const MAX_KEPT_ATOMS: usize = 1 << 17;
const MAX_PLOT_WEIGHTS: usize = 512;
const MAX_GEOMETRIC_SITES: usize = 15;
const MAX_VDH_EXPONENT: usize = 12;
const MAX_TARGET_DIM: usize = 16;

fn err_json(msg: impl std::fmt::Display) -> String {
    json!({ "error": msg.to_string() }).to_string()
}

fn respond(result: Result<serde_json::Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => err_json(e),
    }
}

fn build_spectrum(family: &str, lambda: f64, size: usize, k: usize) -> Result<Spectrum, String> {
    match family {
        "geometric" => {
            if size == 0 || size > MAX_GEOMETRIC_SITES {
                return Err(format!(
                    "geometric sites must lie in 1..={MAX_GEOMETRIC_SITES}, got {size}"
                ));
            }
            geometric_spectrum(lambda, size, k).map_err(|e| e.to_string())
        }
        "vdh" => {
            if !(2..=1 << MAX_VDH_EXPONENT).contains(&size) {
                return Err(format!(
                    "log-weight size must lie in 2..={}, got {size}",
                    1usize << MAX_VDH_EXPONENT
                ));
            }
            let spec = van_dam_hayden_spectrum(size).map_err(|e| e.to_string())?;
            spec.truncate_to(k).map_err(|e| e.to_string())
        }
        other => Err(format!(
            "unknown family {other:?}; expected \"geometric\" or \"vdh\""
        )),
    }
}

/// Spectrum explorer: the descending weight staircase of a resource state,
/// with its exactly accounted truncation tail.
///
/// Returns `{family, size, atoms, tail_mass, kept_mass, weights}` where
/// `weights` holds at most 512 leading weights for plotting (`atoms` is the
/// full kept count). On bad input: `{error}`.
#[wasm_bindgen]
pub fn spectrum_explorer(family: &str, lambda: f64, size: usize, k: usize) -> String {
    respond((|| {
        let k = k.clamp(1, MAX_KEPT_ATOMS);
        let spec = build_spectrum(family, lambda, size, k)?;
        let weights: Vec<f64> = spec
            .weights()
            .iter()
            .copied()
            .take(MAX_PLOT_WEIGHTS)
            .collect();
        Ok(json!({
            "family": family,
            "size": size,
            "atoms": spec.len(),
            "tail_mass": spec.tail_mass(),
            "kept_mass": 1.0 - spec.tail_mass(),
            "weights": weights,
        }))
    })())
}

/// Error-vs-size curve. For the log-weight family: the certified error of
/// extracting a `d`-level maximally entangled state from resources of size
/// 2^2 .. 2^max, against the 4·log d/log n bound. For the geometric
/// family: the worst-case (κ) error over targets of dimension ≤ d at
/// 2..=max sites, against the closed-form flow invariant.
///
/// Returns `{family, d, rows: [{size, lo, hi, bound?}], reference?}`.
#[wasm_bindgen]
pub fn error_curve(family: &str, lambda: f64, d: usize, max_size: usize, k: usize) -> String {
    respond((|| {
        if !(2..=MAX_TARGET_DIM).contains(&d) {
            return Err(format!("d must lie in 2..={MAX_TARGET_DIM}, got {d}"));
        }
        let k = k.clamp(1, MAX_KEPT_ATOMS);
        let budget = TruncationBudget { k, tail_cap: 0.5 };
        let mut rows = Vec::new();
        match family {
            "vdh" => {
                let max_exp = max_size.clamp(2, MAX_VDH_EXPONENT);
                let pair = TargetPair::pure_to_uniform(d).map_err(|e| e.to_string())?;
                for exp in 2..=max_exp {
                    let n = 1usize << exp;
                    let spec = build_spectrum("vdh", 0.0, n, k)?;
                    let e = bipartite_error(&spec, &pair, &budget).map_err(|e| e.to_string())?;
                    let bound = vdh_bound(n, d).map_err(|e| e.to_string())?;
                    rows.push(json!({ "size": n, "lo": e.lo, "hi": e.hi, "bound": bound }));
                }
                Ok(json!({ "family": family, "d": d, "rows": rows }))
            }
            "geometric" => {
                let max_sites = max_size.clamp(2, MAX_GEOMETRIC_SITES);
                let search = SearchConfig::for_dimension(d);
                for sites in 2..=max_sites {
                    let spec = build_spectrum("geometric", lambda, sites, k)?;
                    let est =
                        kappa_estimate(&spec, d, &search, &budget).map_err(|e| e.to_string())?;
                    rows.push(json!({
                        "size": sites,
                        "lo": est.value.lo,
                        "hi": est.value.hi,
                    }));
                }
                let reference = kappa_max_for_type(FactorType::TypeIiiLambda(lambda)).ok();
                Ok(json!({
                    "family": family,
                    "d": d,
                    "rows": rows,
                    "reference": reference,
                }))
            }
            other => Err(format!(
                "unknown family {other:?}; expected \"geometric\" or \"vdh\""
            )),
        }
    })())
}

/// Witness panel: for an exact rank-r geometric resource and a target
/// dimension d > r, the target pair on which the resource provably cannot
/// do better than the 2(1 − r/d) error floor, with its certified error.
///
/// Returns `{rank, d, floor, lo, hi, phi, psi}`.
#[wasm_bindgen]
pub fn witness_panel(lambda: f64, sites: usize, d: usize) -> String {
    respond((|| {
        if !(1..=3).contains(&sites) {
            return Err(format!("sites must lie in 1..=3 (exact resource), got {sites}"));
        }
        if d > 128 {
            return Err(format!("d must be at most 128, got {d}"));
        }
        let omega = geometric_spectrum(lambda, sites, MAX_KEPT_ATOMS).map_err(|e| e.to_string())?;
        let rank = omega.len();
        if d <= rank {
            return Err(format!(
                "the witness needs d > rank; this resource has rank {rank}, got d = {d}"
            ));
        }
        let pair = witness_maximal_error(&omega, d).map_err(|e| e.to_string())?;
        let budget = TruncationBudget {
            k: MAX_KEPT_ATOMS,
            tail_cap: 1e-9,
        };
        let e = monopartite_error(&omega, &pair, &budget).map_err(|e| e.to_string())?;
        Ok(json!({
            "rank": rank,
            "d": d,
            "floor": 2.0 * (1.0 - rank as f64 / d as f64),
            "lo": e.lo,
            "hi": e.hi,
            "phi": pair.phi().weights(),
            "psi": pair.psi().weights(),
        }))
    })())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).expect("export returns valid JSON")
    }

    #[test]
    fn spectrum_explorer_accounts_for_all_mass() {
        let v = parse(&spectrum_explorer("geometric", 0.25, 6, 1 << 17));
        assert_eq!(v["atoms"].as_u64(), Some(64), "2^6 atoms, untruncated");
        assert_eq!(v["tail_mass"].as_f64(), Some(0.0));
        let w: Vec<f64> = v["weights"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect();
        assert!(w.windows(2).all(|p| p[0] >= p[1]), "descending order");
        let mass: f64 = w.iter().sum();
        assert!((mass - 1.0).abs() < 1e-12, "64 weights carry all mass");

        // A truncated view keeps the dropped mass in the tail.
        let v = parse(&spectrum_explorer("geometric", 0.5, 12, 256));
        let kept = v["kept_mass"].as_f64().unwrap();
        let tail = v["tail_mass"].as_f64().unwrap();
        assert!(tail > 0.0, "2^12 atoms cut to 256 must have a tail");
        assert!((kept + tail - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_explorer_rejects_bad_input_as_json() {
        let v = parse(&spectrum_explorer("nope", 0.25, 6, 1024));
        assert!(v["error"].as_str().unwrap().contains("nope"));
        let v = parse(&spectrum_explorer("geometric", 1.5, 6, 1024));
        assert!(v.get("error").is_some(), "lambda out of range");
    }

    #[test]
    fn error_curve_respects_the_reference_bound() {
        let v = parse(&error_curve("vdh", 0.0, 2, 10, 1 << 17));
        let rows = v["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 9, "sizes 2^2..2^10");
        for r in rows {
            assert!(r["hi"].as_f64().unwrap() <= r["bound"].as_f64().unwrap() + 1e-12);
        }
        let first = rows.first().unwrap()["lo"].as_f64().unwrap();
        let last = rows.last().unwrap()["lo"].as_f64().unwrap();
        assert!(last < first, "error shrinks with resource size");
    }

    #[test]
    fn error_curve_kappa_tracks_the_flow_invariant() {
        let v = parse(&error_curve("geometric", 0.25, 4, 12, 1 << 17));
        let reference = v["reference"].as_f64().unwrap();
        assert!((reference - 2.0 / 3.0).abs() < 1e-12);
        let rows = v["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 11, "sites 2..=12");
        let last = rows.last().unwrap()["lo"].as_f64().unwrap();
        assert!(
            (last - reference).abs() < 0.1,
            "12-site estimate {last} should approach {reference}"
        );
    }

    #[test]
    fn witness_panel_sits_on_or_above_its_floor() {
        let v = parse(&witness_panel(0.25, 2, 16));
        assert_eq!(v["rank"].as_u64(), Some(4));
        let floor = v["floor"].as_f64().unwrap();
        assert!((floor - 1.5).abs() < 1e-12, "2(1 - 4/16)");
        assert!(v["lo"].as_f64().unwrap() >= floor - 1e-9);
        // The witness pair: a pure state and a d-atom target.
        assert_eq!(v["phi"].as_array().unwrap().len(), 1);
        assert_eq!(v["psi"].as_array().unwrap().len(), 16);

        let v = parse(&witness_panel(0.25, 2, 3));
        assert!(v["error"].as_str().unwrap().contains("rank"), "d ≤ rank rejected");
    }
}
