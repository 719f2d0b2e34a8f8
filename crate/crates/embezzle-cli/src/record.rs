//! Result records and their serialized forms: the deterministic CSV
//! (17 significant digits, '.' decimal, LF, header row) and the JSON
//! sidecar carrying config echo, provenance, and timings.

use serde::{Deserialize, Serialize};

use crate::config::EffectiveConfig;

/// Version string baked into the cache key and every artifact: bump to
/// invalidate caches when row semantics or formatting change.
pub const ARTIFACT_VERSION: &str = "embz-artifact-v1";

/// One output row. `size` and `d` are experiment-specific coordinates
/// (documented per experiment); `lo`/`hi` are the certified enclosure of
/// the reported value (equal when exact). `runtime_ms` is carried in the
/// record and the meta sidecar but deliberately kept out of the CSV so
/// identical config + seed produce byte-identical CSV bytes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Row {
    pub size: usize,
    pub d: usize,
    pub lo: f64,
    pub hi: f64,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub config_hash: String,
    pub artifact_version: String,
    pub rows: Vec<Row>,
    /// Experiment-specific structured results (trajectories, argmax
    /// targets, oracle verdicts, reference values).
    pub extra: serde_json::Value,
}

impl ResultRecord {
    pub fn sort_rows(&mut self) {
        self.rows.sort_by_key(|a| (a.size, a.d));
    }
}

/// Fixed float formatting: 17 significant digits in scientific notation,
/// enough to round-trip every f64 bit pattern.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_string(rows: &[Row]) -> String {
    let mut s = String::from("size,d,lo,hi\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.size,
            r.d,
            fmt17(r.lo),
            fmt17(r.hi)
        ));
    }
    s
}

/// The `results.meta.json` sidecar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Meta {
    pub artifact_version: String,
    pub experiment: String,
    pub config: EffectiveConfig,
    pub config_hash: String,
    pub cache_key_source: String,
    pub seed: u64,
    pub cache_hit: bool,
    pub timings: Timings,
    pub extra: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timings {
    pub total_ms: f64,
    pub per_row_ms: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_deterministic_and_headered() {
        let rows = vec![
            Row {
                size: 4,
                d: 2,
                lo: 1.0 / 3.0,
                hi: 1.0 / 3.0,
                runtime_ms: 5.0,
            },
            Row {
                size: 16,
                d: 2,
                lo: 0.25,
                hi: 0.5,
                runtime_ms: 7.0,
            },
        ];
        let s = csv_string(&rows);
        assert!(s.starts_with("size,d,lo,hi\n"));
        assert!(s.contains("3.3333333333333331e-1"));
        assert!(!s.contains("runtime"), "timings must stay out of the CSV");
        assert_eq!(s, csv_string(&rows));
    }

    #[test]
    fn fmt17_round_trips_f64() {
        for x in [0.1, 2.0 / 3.0, 1e-300, 123456.789, f64::MIN_POSITIVE] {
            let back: f64 = fmt17(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn rows_sort_by_size_then_d() {
        let mut rec = ResultRecord {
            experiment: "x".into(),
            config_hash: "h".into(),
            artifact_version: ARTIFACT_VERSION.into(),
            rows: vec![
                Row { size: 8, d: 2, lo: 0.0, hi: 0.0, runtime_ms: 0.0 },
                Row { size: 4, d: 4, lo: 0.0, hi: 0.0, runtime_ms: 0.0 },
                Row { size: 4, d: 2, lo: 0.0, hi: 0.0, runtime_ms: 0.0 },
            ],
            extra: serde_json::Value::Null,
        };
        rec.sort_rows();
        let order: Vec<(usize, usize)> = rec.rows.iter().map(|r| (r.size, r.d)).collect();
        assert_eq!(order, vec![(4, 2), (4, 4), (8, 2)]);
    }
}
