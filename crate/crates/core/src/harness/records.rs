//! Learning-records ingestion: CSV rows grouped per learner, sorted by
//! timestamp, with malformed rows counted rather than fatal.
//!
//! Contract: header `learner_id,timestamp,exercise_id,kc_id,score`,
//! score in {0, 1}.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordRow {
    pub timestamp: i64,
    pub exercise_id: usize,
    pub kc_id: usize,
    pub score: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnerGroup {
    pub learner_id: String,
    pub rows: Vec<RecordRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordsSummary {
    pub learners: usize,
    pub records: usize,
    pub positive_rate: f64,
    pub skipped_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadedRecords {
    pub groups: Vec<LearnerGroup>,
    pub summary: RecordsSummary,
}

const EXPECTED_HEADER: [&str; 5] = ["learner_id", "timestamp", "exercise_id", "kc_id", "score"];

pub fn load_records(path: &Path) -> Result<LoadedRecords> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Ingest(format!("missing header: {e}")))?
        .clone();
    let header_fields: Vec<&str> = headers.iter().map(|h| h.trim()).collect();
    if header_fields != EXPECTED_HEADER {
        return Err(Error::Ingest(format!(
            "unexpected header {header_fields:?}, want {EXPECTED_HEADER:?}"
        )));
    }

    let mut groups: std::collections::BTreeMap<String, Vec<RecordRow>> = Default::default();
    let mut skipped_rows = 0usize;
    let mut positives = 0usize;
    let mut records = 0usize;
    for row in reader.records() {
        let Ok(row) = row else {
            skipped_rows += 1;
            continue;
        };
        let parsed = (|| -> Option<(String, RecordRow)> {
            let learner = row.get(0)?.trim().to_string();
            if learner.is_empty() {
                return None;
            }
            let timestamp: i64 = row.get(1)?.trim().parse().ok()?;
            let exercise_id: usize = row.get(2)?.trim().parse().ok()?;
            let kc_id: usize = row.get(3)?.trim().parse().ok()?;
            let score: u8 = row.get(4)?.trim().parse().ok()?;
            if score > 1 {
                return None;
            }
            Some((
                learner,
                RecordRow {
                    timestamp,
                    exercise_id,
                    kc_id,
                    score,
                },
            ))
        })();
        match parsed {
            Some((learner, record)) => {
                positives += usize::from(record.score);
                records += 1;
                groups.entry(learner).or_default().push(record);
            }
            None => skipped_rows += 1,
        }
    }
    if skipped_rows > 0 {
        log::warn!("skipped {skipped_rows} malformed record row(s)");
    }

    let groups: Vec<LearnerGroup> = groups
        .into_iter()
        .map(|(learner_id, mut rows)| {
            rows.sort_by_key(|r| r.timestamp);
            LearnerGroup { learner_id, rows }
        })
        .collect();
    let summary = RecordsSummary {
        learners: groups.len(),
        records,
        positive_rate: if records > 0 {
            positives as f64 / records as f64
        } else {
            0.0
        },
        skipped_rows,
    };
    Ok(LoadedRecords { groups, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(content.as_bytes()).unwrap();
        file.flush().unwrap();
        file
    }

    #[test]
    fn empty_file_with_header_has_zero_learners() {
        let file = write_csv("learner_id,timestamp,exercise_id,kc_id,score\n");
        let loaded = load_records(file.path()).unwrap();
        assert_eq!(loaded.summary.learners, 0);
        assert_eq!(loaded.summary.records, 0);
    }

    #[test]
    fn rows_group_by_learner_and_sort_by_timestamp() {
        let file = write_csv(
            "learner_id,timestamp,exercise_id,kc_id,score\n\
             alice,20,1,0,1\n\
             bob,5,2,1,0\n\
             alice,10,3,0,1\n",
        );
        let loaded = load_records(file.path()).unwrap();
        assert_eq!(loaded.summary.learners, 2);
        let sizes: Vec<usize> = loaded.groups.iter().map(|g| g.rows.len()).collect();
        assert_eq!(sizes, vec![2, 1]);
        assert_eq!(loaded.groups[0].rows[0].timestamp, 10);
        assert_eq!(loaded.groups[0].rows[1].timestamp, 20);
    }

    #[test]
    fn malformed_rows_are_counted_not_fatal() {
        let file = write_csv(
            "learner_id,timestamp,exercise_id,kc_id,score\n\
             alice,1,1,0,1\n\
             ,2,2,0,1\n\
             bob,zzz,2,0,1\n\
             carol,3,4,0,7\n",
        );
        let loaded = load_records(file.path()).unwrap();
        assert_eq!(loaded.summary.records, 1);
        assert_eq!(loaded.summary.skipped_rows, 3);
    }

    #[test]
    fn missing_header_is_an_ingestion_error() {
        let file = write_csv("user,when,what,thing,ok\nalice,1,1,0,1\n");
        assert!(matches!(
            load_records(file.path()),
            Err(Error::Ingest(_))
        ));
    }

    #[test]
    fn positive_rate_matches_constructed_rows() {
        // 10,000 rows, 6,381 positive: rate 0.6381 exactly.
        let mut content = String::from("learner_id,timestamp,exercise_id,kc_id,score\n");
        for i in 0..10_000 {
            let score = u8::from(i < 6381);
            content.push_str(&format!("learner_{},{},{},0,{}\n", i % 100, i, i, score));
        }
        let file = write_csv(&content);
        let loaded = load_records(file.path()).unwrap();
        assert!((loaded.summary.positive_rate - 0.6381).abs() < 1e-4);
        assert_eq!(loaded.summary.learners, 100);
    }
}
