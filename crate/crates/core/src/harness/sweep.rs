use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Metric name used for cells whose chain left the finite domain. Its value
/// is the step index at which divergence was detected.
pub const DIVERGED: &str = "diverged";

pub const CSV_HEADER: &str = "scheme,h,metric,value,stderr,n,seed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scheme: String,
    pub h: f64,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

fn check_field(s: &str) -> Result<()> {
    if s.is_empty() || s.contains([',', '"', '\n', '\r']) {
        return Err(Error::domain(format!("invalid CSV field {s:?}")));
    }
    Ok(())
}

impl SweepResult {
    pub fn new() -> Self {
        SweepResult::default()
    }

    pub fn push(&mut self, row: SweepRow) -> Result<()> {
        if !row.value.is_finite() || !row.h.is_finite() {
            return Err(Error::Evaluation(format!(
                "non-finite value in row {} / {} at h = {}",
                row.scheme, row.metric, row.h
            )));
        }
        if !(row.stderr >= 0.0 && row.stderr.is_finite()) {
            return Err(Error::domain(format!(
                "stderr must be finite and >= 0, got {}",
                row.stderr
            )));
        }
        check_field(&row.scheme)?;
        check_field(&row.metric)?;
        self.rows.push(row);
        Ok(())
    }

    pub fn extend(&mut self, other: SweepResult) {
        self.rows.extend(other.rows);
    }

    /// Sort by (scheme, h, metric, seed) so that emission order does not
    /// depend on how cells were scheduled.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.scheme
                .cmp(&b.scheme)
                .then(a.h.total_cmp(&b.h))
                .then_with(|| metric_key(&a.metric).cmp(&metric_key(&b.metric)))
                .then(a.seed.cmp(&b.seed))
        });
    }

    /// Rows matching a scheme and metric, in h order.
    pub fn select(&self, scheme: &str, metric: &str) -> Vec<&SweepRow> {
        let mut v: Vec<&SweepRow> = self
            .rows
            .iter()
            .filter(|r| r.scheme == scheme && r.metric == metric)
            .collect();
        v.sort_by(|a, b| a.h.total_cmp(&b.h));
        v
    }

    /// CSV with `\n` line endings and shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut sorted = self.clone();
        sorted.sort();
        writeln!(w, "{CSV_HEADER}")?;
        for r in &sorted.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.scheme, r.h, r.metric, r.value, r.stderr, r.n, r.seed
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        if header.join(",") != CSV_HEADER {
            return Err(Error::Parse(format!("unexpected header {header:?}")));
        }
        let mut out = SweepResult::new();
        for rec in rd.deserialize() {
            out.push(rec?)?;
        }
        Ok(out)
    }
}

/// Metric names may carry a step suffix (`name@step`); order those
/// numerically.
fn metric_key(m: &str) -> (&str, u64) {
    match m.rsplit_once('@') {
        Some((base, step)) => match step.parse() {
            Ok(s) => (base, s),
            Err(_) => (m, 0),
        },
        None => (m, 0),
    }
}

/// Metric name with a step suffix.
pub fn metric_at(metric: &str, step: usize) -> String {
    format!("{metric}@{step}")
}

/// SHA-256 of `blob <len>\0<bytes>`, hex encoded.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Sidecar describing how a sweep was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub config: serde_json::Value,
    pub content_hash: String,
    pub rows: usize,
    pub crate_version: String,
}

impl SweepMetadata {
    /// `config` is hashed in its canonical (sorted-key) JSON form.
    pub fn new<C: Serialize>(config: &C, result: &SweepResult) -> Result<Self> {
        let config = serde_json::to_value(config)
            .map_err(|e| Error::Parse(format!("cannot serialize config: {e}")))?;
        let canonical = serde_json::to_vec(&config)
            .map_err(|e| Error::Parse(format!("cannot serialize config: {e}")))?;
        Ok(SweepMetadata {
            content_hash: content_hash(&canonical),
            config,
            rows: result.rows.len(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn write_sweep<C: Serialize>(
    dir: &Path,
    stem: &str,
    result: &SweepResult,
    config: &C,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let csv = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
    result.write_csv(std::io::BufWriter::new(csv))?;
    let meta = SweepMetadata::new(config, result)?;
    let json = serde_json::to_string_pretty(&meta)
        .map_err(|e| Error::Parse(format!("cannot serialize metadata: {e}")))?;
    std::fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(scheme: &str, h: f64, metric: &str, value: f64) -> SweepRow {
        SweepRow {
            scheme: scheme.into(),
            h,
            metric: metric.into(),
            value,
            stderr: 0.0,
            n: 10,
            seed: 1,
        }
    }

    #[test]
    fn rejects_bad_rows() {
        let mut s = SweepResult::new();
        assert!(s.push(row("em", 0.1, "w2", f64::NAN)).is_err());
        let mut r = row("em", 0.1, "w2", 1.0);
        r.stderr = -1.0;
        assert!(s.push(r).is_err());
        assert!(s.push(row("em,x", 0.1, "w2", 1.0)).is_err());
        assert!(s.rows.is_empty());
    }

    #[test]
    fn csv_is_sorted_and_round_trips() {
        let mut s = SweepResult::new();
        s.push(row("srk-ld", 0.2, "w2@10", 0.5)).unwrap();
        s.push(row("em", 0.4, "w2", 0.25)).unwrap();
        s.push(row("em", 0.1, "w2@100", 1e-17)).unwrap();
        s.push(row("em", 0.1, "w2@20", 3.0)).unwrap();
        let text = s.to_csv_string();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "em,0.1,w2@20,3,0,10,1");
        assert_eq!(lines[2], "em,0.1,w2@100,0.00000000000000001,0,10,1");
        assert!(!text.contains('\r'));
        let mut back = SweepResult::read_csv(text.as_bytes()).unwrap();
        let mut orig = s.clone();
        orig.sort();
        back.sort();
        assert_eq!(back, orig);
    }

    #[test]
    fn hash_matches_git_blob_convention() {
        // `printf 'hello\n' | git hash-object --stdin` uses SHA-1; the same
        // framing under SHA-256 gives this digest.
        let h = content_hash(b"hello\n");
        assert_eq!(h.len(), 64);
        let mut manual = Sha256::new();
        manual.update(b"blob 6\0hello\n");
        let want: String = manual
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        assert_eq!(h, want);
    }
}
