//! Plot-data emission: one tidy CSV per curve under `<out>/plot/`, plus
//! closed-form reference curves where the experiment has one. Every float
//! is written with [`record::fmt17`] so plot files share the main CSV's
//! byte-determinism.

use std::fs;
use std::path::Path;

use embezzle::{kappa_max_for_type, vdh_bound, FactorType};

use crate::config::EffectiveConfig;
use crate::record::{fmt17, ResultRecord, Row};
use crate::CliError;

fn write_curve(path: &Path, xs: &[(usize, f64, f64, f64)]) -> Result<(), CliError> {
    let mut s = String::from("x,y,ylo,yhi\n");
    for &(x, y, ylo, yhi) in xs {
        s.push_str(&format!("{x},{},{},{}\n", fmt17(y), fmt17(ylo), fmt17(yhi)));
    }
    fs::write(path, s)?;
    Ok(())
}

fn write_reference(path: &Path, xs: &[(usize, f64)]) -> Result<(), CliError> {
    let mut s = String::from("x,y\n");
    for &(x, y) in xs {
        s.push_str(&format!("{x},{}\n", fmt17(y)));
    }
    fs::write(path, s)?;
    Ok(())
}

fn by_d(rows: &[Row], d: usize) -> Vec<(usize, f64, f64, f64)> {
    rows.iter()
        .filter(|r| r.d == d)
        .map(|r| (r.size, r.lo, r.lo, r.hi))
        .collect()
}

/// Write the per-curve plot CSVs for `record` into `<out>/plot/`.
pub fn emit(out: &Path, cfg: &EffectiveConfig, record: &ResultRecord) -> Result<(), CliError> {
    if record.rows.is_empty() {
        return Err(CliError::Config(
            "experiment produced no result rows; nothing to plot".into(),
        ));
    }
    let dir = out.join("plot");
    fs::create_dir_all(&dir)?;

    let mut d_values: Vec<usize> = record.rows.iter().map(|r| r.d).collect();
    d_values.sort_unstable();
    d_values.dedup();

    match record.experiment.as_str() {
        "vdh-table" | "kappa-convergence" | "xx-chain" => {
            for &d in &d_values {
                write_curve(&dir.join(format!("curve_d{d}.csv")), &by_d(&record.rows, d))?;
            }
            if record.experiment == "vdh-table" {
                for &d in &d_values {
                    let pts: Result<Vec<_>, CliError> = record
                        .rows
                        .iter()
                        .filter(|r| r.d == d)
                        .map(|r| Ok((r.size, vdh_bound(r.size, r.d)?)))
                        .collect();
                    write_reference(&dir.join(format!("reference_bound_d{d}.csv")), &pts?)?;
                }
            }
            if record.experiment == "kappa-convergence" {
                // Reference only where the flow invariant exists (0 < λ < 1).
                if let (Some("geometric"), Some(lam)) = (cfg.family.as_deref(), cfg.lambda) {
                    if let Ok(c) = kappa_max_for_type(FactorType::TypeIiiLambda(lam)) {
                        let mut sizes: Vec<usize> =
                            record.rows.iter().map(|r| r.size).collect();
                        sizes.sort_unstable();
                        sizes.dedup();
                        let pts: Vec<(usize, f64)> =
                            sizes.into_iter().map(|s| (s, c)).collect();
                        write_reference(&dir.join("reference_invariant.csv"), &pts)?;
                    }
                }
            }
        }
        "witness" => {
            // One curve per resource rank (constant within a run), x = d.
            let rank = record.rows[0].size;
            let pts: Vec<(usize, f64, f64, f64)> = record
                .rows
                .iter()
                .map(|r| (r.d, r.lo, r.lo, r.hi))
                .collect();
            write_curve(&dir.join(format!("curve_r{rank}.csv")), &pts)?;
            let floor: Vec<(usize, f64)> = record
                .rows
                .iter()
                .map(|r| (r.d, 2.0 * (1.0 - rank as f64 / r.d as f64)))
                .collect();
            write_reference(&dir.join(format!("reference_floor_r{rank}.csv")), &floor)?;
        }
        "oracle-certify" => {
            let pts: Vec<(usize, f64, f64, f64)> = record
                .rows
                .iter()
                .map(|r| (r.d, r.lo, r.lo, r.hi))
                .collect();
            write_curve(&dir.join("curve_classes.csv"), &pts)?;
        }
        other => {
            return Err(CliError::Config(format!(
                "no plot layout for experiment {other:?}"
            )))
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{resolve, ConfigFile, Flags};
    use crate::record::ARTIFACT_VERSION;

    #[test]
    fn empty_record_is_a_config_error() {
        let file: ConfigFile = serde_json::from_str("{}").unwrap();
        let cfg = resolve("vdh-table", &file, &Flags::default()).unwrap();
        let rec = ResultRecord {
            experiment: "vdh-table".into(),
            config_hash: "unused".into(),
            artifact_version: ARTIFACT_VERSION.into(),
            rows: Vec::new(),
            extra: serde_json::Value::Null,
        };
        // Rejected before any filesystem access, so the path is never used.
        let err = emit(Path::new("/nonexistent-unused"), &cfg, &rec).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
