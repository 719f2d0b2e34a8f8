//! Experiment configuration: JSON file schema (strict — unknown keys are
//! rejected), per-experiment defaults, and validation.

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use crate::CliError;

pub const EXPERIMENTS: [&str; 5] = [
    "vdh-table",
    "kappa-convergence",
    "xx-chain",
    "oracle-certify",
    "witness",
];

/// On-disk configuration. Every field is optional — the subcommand fixes
/// the experiment and each experiment fills in its documented defaults —
/// but a key that is not in this schema is a hard error: a silent typo in
/// `lambda` or `K_schedule` would invalidate a convergence claim.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<String>,
    pub family: Option<String>,
    pub lambda: Option<f64>,
    pub lambdas: Option<Vec<f64>>,
    pub gamma: Option<f64>,
    pub h: Option<f64>,
    pub d_list: Option<Vec<usize>>,
    pub size_list: Option<Vec<usize>>,
    #[serde(rename = "K_schedule")]
    pub k_schedule: Option<Vec<usize>>,
    pub tail_cap: Option<f64>,
    pub seed: Option<u64>,
    pub output_path: Option<String>,
}

/// Command-line flags that may override file values.
#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub force: bool,
    pub threads: Option<usize>,
}

/// Fully resolved configuration: what actually runs, what is hashed, and
/// what `results.meta.json` echoes. Serialization goes through
/// `serde_json::Value`, whose maps are key-sorted, so the hash is stable
/// under key reordering of the input file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EffectiveConfig {
    pub experiment: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub d_list: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub size_list: Vec<usize>,
    #[serde(rename = "K_schedule", skip_serializing_if = "Vec::is_empty", default)]
    pub k_schedule: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_cap: Option<f64>,
    pub seed: u64,
    pub output_path: String,
}

impl EffectiveConfig {
    /// Atom budget for the size at index `i` (a length-1 schedule
    /// broadcasts).
    pub fn k_for(&self, i: usize) -> usize {
        if self.k_schedule.len() == 1 {
            self.k_schedule[0]
        } else {
            self.k_schedule[i]
        }
    }

    pub fn tail_cap(&self) -> f64 {
        self.tail_cap.unwrap_or(1e-9)
    }
}

fn strictly_increasing<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

fn check_list_nonempty(name: &str, v: &[usize]) -> Result<(), CliError> {
    if v.is_empty() {
        return Err(CliError::Config(format!("{name} must be nonempty")));
    }
    Ok(())
}

fn check_list(name: &str, v: &[usize]) -> Result<(), CliError> {
    check_list_nonempty(name, v)?;
    if !strictly_increasing(v) {
        return Err(CliError::Config(format!(
            "{name} must be strictly increasing, got {v:?}"
        )));
    }
    Ok(())
}

/// Reject file fields that the chosen experiment does not consume —
/// a stricter cousin of unknown-key rejection, for the same reason.
fn forbid(experiment: &str, field: &str, present: bool) -> Result<(), CliError> {
    if present {
        return Err(CliError::Config(format!(
            "field \"{field}\" is not used by the {experiment} experiment; remove it"
        )));
    }
    Ok(())
}

/// Merge subcommand, config file, and flags into a validated
/// [`EffectiveConfig`]. Precedence: flags > file > per-experiment default.
pub fn resolve(
    experiment: &str,
    file: &ConfigFile,
    flags: &Flags,
) -> Result<EffectiveConfig, CliError> {
    if !EXPERIMENTS.contains(&experiment) {
        return Err(CliError::Config(format!(
            "unknown experiment {experiment:?}; expected one of {EXPERIMENTS:?}"
        )));
    }
    if let Some(e) = &file.experiment {
        if e != experiment {
            return Err(CliError::Config(format!(
                "config file names experiment {e:?} but the {experiment:?} subcommand was invoked"
            )));
        }
    }

    let seed = flags.seed.or(file.seed).unwrap_or(0);
    let output_path = flags
        .out
        .as_ref()
        .map(|p| p.to_string_lossy().into_owned())
        .or_else(|| file.output_path.clone())
        .unwrap_or_else(|| "embz-out".to_string());

    let mut cfg = EffectiveConfig {
        experiment: experiment.to_string(),
        family: None,
        lambda: None,
        lambdas: None,
        gamma: None,
        h: None,
        d_list: Vec::new(),
        size_list: Vec::new(),
        k_schedule: Vec::new(),
        tail_cap: None,
        seed,
        output_path,
    };

    match experiment {
        "vdh-table" => {
            if let Some(f) = &file.family {
                if f != "vdh" {
                    return Err(CliError::Config(format!(
                        "vdh-table runs the \"vdh\" family; got family {f:?}"
                    )));
                }
            }
            forbid(experiment, "lambda", file.lambda.is_some())?;
            forbid(experiment, "lambdas", file.lambdas.is_some())?;
            forbid(experiment, "gamma", file.gamma.is_some())?;
            forbid(experiment, "h", file.h.is_some())?;
            cfg.family = Some("vdh".to_string());
            cfg.size_list = file
                .size_list
                .clone()
                .unwrap_or_else(|| vec![16, 64, 256, 1024, 4096]);
            cfg.d_list = file.d_list.clone().unwrap_or_else(|| vec![2, 4, 8, 16]);
            cfg.k_schedule = file.k_schedule.clone().unwrap_or_else(|| vec![1 << 17]);
            cfg.tail_cap = Some(file.tail_cap.unwrap_or(1e-9));
        }
        "kappa-convergence" => {
            let family = file.family.clone().unwrap_or_else(|| "geometric".to_string());
            match family.as_str() {
                "geometric" => {
                    forbid(experiment, "lambdas", file.lambdas.is_some())?;
                    forbid(experiment, "gamma", file.gamma.is_some())?;
                    forbid(experiment, "h", file.h.is_some())?;
                    cfg.lambda = Some(file.lambda.unwrap_or(0.25));
                }
                "araki-woods" => {
                    forbid(experiment, "lambda", file.lambda.is_some())?;
                    forbid(experiment, "gamma", file.gamma.is_some())?;
                    forbid(experiment, "h", file.h.is_some())?;
                    let lambdas = file.lambdas.clone().ok_or_else(|| {
                        CliError::Config(
                            "family \"araki-woods\" requires the \"lambdas\" list".into(),
                        )
                    })?;
                    cfg.lambdas = Some(lambdas);
                }
                "xy-chain" => {
                    forbid(experiment, "lambda", file.lambda.is_some())?;
                    forbid(experiment, "lambdas", file.lambdas.is_some())?;
                    cfg.gamma = Some(file.gamma.unwrap_or(0.0));
                    cfg.h = Some(file.h.unwrap_or(0.45));
                }
                "vdh" => {
                    forbid(experiment, "lambda", file.lambda.is_some())?;
                    forbid(experiment, "lambdas", file.lambdas.is_some())?;
                    forbid(experiment, "gamma", file.gamma.is_some())?;
                    forbid(experiment, "h", file.h.is_some())?;
                }
                other => {
                    return Err(CliError::Config(format!(
                        "unknown family {other:?}; expected geometric, araki-woods, xy-chain, or vdh"
                    )))
                }
            }
            cfg.family = Some(family);
            cfg.size_list = file.size_list.clone().unwrap_or_else(|| vec![13, 14, 15]);
            cfg.d_list = file.d_list.clone().unwrap_or_else(|| vec![2, 4]);
            cfg.k_schedule = file.k_schedule.clone().unwrap_or_else(|| vec![1 << 17]);
            cfg.tail_cap = Some(file.tail_cap.unwrap_or(1e-4));
        }
        "xx-chain" => {
            if let Some(f) = &file.family {
                if f != "xy-chain" {
                    return Err(CliError::Config(format!(
                        "xx-chain runs the \"xy-chain\" family; got family {f:?}"
                    )));
                }
            }
            forbid(experiment, "lambda", file.lambda.is_some())?;
            forbid(experiment, "lambdas", file.lambdas.is_some())?;
            cfg.family = Some("xy-chain".to_string());
            cfg.gamma = Some(file.gamma.unwrap_or(0.0));
            cfg.h = Some(file.h.unwrap_or(0.45));
            cfg.size_list = file.size_list.clone().unwrap_or_else(|| vec![20, 50, 100, 200]);
            cfg.d_list = file.d_list.clone().unwrap_or_else(|| vec![2]);
            cfg.k_schedule = file.k_schedule.clone().unwrap_or_else(|| vec![1 << 17]);
            cfg.tail_cap = Some(file.tail_cap.unwrap_or(1e-9));
            for &l in &cfg.size_list {
                if l < 2 || l % 2 != 0 {
                    return Err(CliError::Config(format!(
                        "xx-chain sizes are even chain lengths ≥ 2 (half-chain cut); got {l}"
                    )));
                }
            }
        }
        "oracle-certify" => {
            forbid(experiment, "family", file.family.is_some())?;
            forbid(experiment, "lambda", file.lambda.is_some())?;
            forbid(experiment, "lambdas", file.lambdas.is_some())?;
            forbid(experiment, "gamma", file.gamma.is_some())?;
            forbid(experiment, "h", file.h.is_some())?;
            forbid(experiment, "d_list", file.d_list.is_some())?;
            forbid(experiment, "size_list", file.size_list.is_some())?;
            forbid(experiment, "K_schedule", file.k_schedule.is_some())?;
            forbid(experiment, "tail_cap", file.tail_cap.is_some())?;
        }
        "witness" => {
            let family = file.family.clone().unwrap_or_else(|| "geometric".to_string());
            if family != "geometric" && family != "vdh" {
                return Err(CliError::Config(format!(
                    "witness supports finite-rank resources (family geometric or vdh); got {family:?}"
                )));
            }
            if family == "geometric" {
                cfg.lambda = Some(file.lambda.unwrap_or(0.25));
            } else {
                forbid(experiment, "lambda", file.lambda.is_some())?;
            }
            forbid(experiment, "lambdas", file.lambdas.is_some())?;
            forbid(experiment, "gamma", file.gamma.is_some())?;
            forbid(experiment, "h", file.h.is_some())?;
            cfg.family = Some(family);
            cfg.size_list = file.size_list.clone().unwrap_or_else(|| vec![2]);
            cfg.d_list = file.d_list.clone().unwrap_or_else(|| vec![8, 16, 32, 64]);
            cfg.k_schedule = file.k_schedule.clone().unwrap_or_else(|| vec![1 << 17]);
            cfg.tail_cap = Some(file.tail_cap.unwrap_or(1e-9));
        }
        _ => unreachable!(),
    }

    // Shared invariants.
    if let Some(cap) = cfg.tail_cap {
        if !(cap > 0.0 && cap <= 0.1) {
            return Err(CliError::Config(format!(
                "tail_cap must lie in (0, 0.1], got {cap}"
            )));
        }
    }
    // oracle-certify takes no lists (enforced by `forbid` above); every
    // other experiment must end up with usable ones, so an explicitly
    // empty list in the file is an error, not a fall-through.
    if cfg.experiment != "oracle-certify" {
        check_list("d_list", &cfg.d_list)?;
        check_list("size_list", &cfg.size_list)?;
        check_list_nonempty("K_schedule", &cfg.k_schedule)?;
        if cfg.k_schedule.len() != 1 && cfg.k_schedule.len() != cfg.size_list.len() {
            return Err(CliError::Config(format!(
                "K_schedule must have length 1 (broadcast) or match size_list ({}), got {}",
                cfg.size_list.len(),
                cfg.k_schedule.len()
            )));
        }
        if cfg.k_schedule.contains(&0) {
            return Err(CliError::Config("K_schedule entries must be ≥ 1".into()));
        }
        if cfg.k_schedule.len() > 1 {
            check_list("K_schedule", &cfg.k_schedule)?;
        }
    }
    if let Some(lam) = cfg.lambda {
        if !(lam > 0.0 && lam <= 1.0) {
            return Err(CliError::Config(format!(
                "lambda must lie in (0, 1], got {lam}"
            )));
        }
    }
    if let Some(ls) = &cfg.lambdas {
        if ls.is_empty() {
            return Err(CliError::Config("lambdas must be nonempty".into()));
        }
        if let Some(&bad) = ls.iter().find(|&&l| !(l > 0.0 && l <= 1.0)) {
            return Err(CliError::Config(format!(
                "lambdas entries must lie in (0, 1], got {bad}"
            )));
        }
    }
    for v in [cfg.gamma, cfg.h].into_iter().flatten() {
        if !v.is_finite() {
            return Err(CliError::Config(format!(
                "field parameters must be finite, got {v}"
            )));
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(json: &str) -> ConfigFile {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn unknown_keys_are_rejected_by_schema() {
        let err = serde_json::from_str::<ConfigFile>(r#"{"experiment":"vdh-table","lamda":0.5}"#)
            .unwrap_err();
        assert!(err.to_string().contains("lamda"), "{err}");
    }

    #[test]
    fn defaults_fill_in_per_experiment() {
        let cfg = resolve("kappa-convergence", &ConfigFile::default(), &Flags::default()).unwrap();
        assert_eq!(cfg.family.as_deref(), Some("geometric"));
        assert_eq!(cfg.lambda, Some(0.25));
        assert_eq!(cfg.size_list, vec![13, 14, 15]);
        assert_eq!(cfg.d_list, vec![2, 4]);
        assert_eq!(cfg.k_schedule, vec![1 << 17]);
        assert_eq!(cfg.tail_cap, Some(1e-4));
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn flags_override_file_values() {
        let f = file(r#"{"seed": 3, "output_path": "from-file"}"#);
        let flags = Flags {
            seed: Some(9),
            out: Some(PathBuf::from("from-flag")),
            ..Flags::default()
        };
        let cfg = resolve("vdh-table", &f, &flags).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.output_path, "from-flag");
    }

    #[test]
    fn experiment_mismatch_is_a_config_error() {
        let f = file(r#"{"experiment":"witness"}"#);
        let err = resolve("vdh-table", &f, &Flags::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn list_and_range_invariants_are_enforced() {
        for bad in [
            r#"{"size_list":[5,5]}"#,
            r#"{"size_list":[]}"#,
            r#"{"d_list":[4,2]}"#,
            r#"{"tail_cap":0.2}"#,
            r#"{"tail_cap":0.0}"#,
            r#"{"K_schedule":[64,32,16]}"#,
        ] {
            let err = resolve("vdh-table", &file(bad), &Flags::default()).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{bad} should be a config error");
        }
        // K_schedule of length 2 against 3 sizes.
        let err = resolve(
            "kappa-convergence",
            &file(r#"{"K_schedule":[1024,2048]}"#),
            &Flags::default(),
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn irrelevant_fields_are_rejected() {
        let err = resolve(
            "oracle-certify",
            &file(r#"{"d_list":[2]}"#),
            &Flags::default(),
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = resolve("vdh-table", &file(r#"{"lambda":0.5}"#), &Flags::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn xx_chain_requires_even_lengths() {
        let err = resolve("xx-chain", &file(r#"{"size_list":[3,4]}"#), &Flags::default())
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
