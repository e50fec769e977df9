//! Step-aligned comparison of run reward logs.

use crate::error::{Error, Result};
use crate::ppo::RewardLog;
use crate::store::PolicyStore;

pub const PADDED_SUFFIX: &str = " (padded)";

/// Per-episode reward of each run aligned on environment steps.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub header: Vec<String>,
    pub steps: Vec<u64>,
    /// One row per step; one value per run, then mean and spread when there
    /// is more than one run. `None` before a run's first episode ends.
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Report {
    /// Aligns `logs` on the union of their episode-end steps. Each run holds
    /// its latest episode reward until its next episode ends; runs that end
    /// before the longest one keep their terminal value and are flagged in
    /// the header.
    pub fn build(names: &[String], logs: &[RewardLog]) -> Self {
        let mut steps: Vec<u64> = logs.iter().flat_map(|l| l.entries.iter().map(|e| e.step)).collect();
        steps.sort_unstable();
        steps.dedup();
        let last = steps.last().copied().unwrap_or(0);
        let mut header = vec!["step".to_string()];
        for (name, log) in names.iter().zip(logs) {
            let padded = log.entries.last().map_or(true, |e| e.step < last);
            header.push(if padded && logs.len() > 1 {
                format!("{name}{PADDED_SUFFIX}")
            } else {
                name.clone()
            });
        }
        if logs.len() > 1 {
            header.push("mean".into());
            header.push("spread".into());
        }
        let mut cursors = vec![0usize; logs.len()];
        let mut rows = Vec::with_capacity(steps.len());
        for &step in &steps {
            let mut row: Vec<Option<f64>> = Vec::with_capacity(header.len() - 1);
            for (log, cursor) in logs.iter().zip(cursors.iter_mut()) {
                while *cursor < log.entries.len() && log.entries[*cursor].step <= step {
                    *cursor += 1;
                }
                row.push(cursor.checked_sub(1).map(|i| log.entries[i].cumulative_reward));
            }
            if logs.len() > 1 {
                let present: Vec<f64> = row.iter().flatten().copied().collect();
                let n = present.len() as f64;
                let mean = present.iter().sum::<f64>() / n;
                let var = present.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                row.push(Some(mean));
                row.push(Some(var.sqrt()));
            }
            rows.push(row);
        }
        Self { header, steps, rows }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record(&self.header);
        for (step, row) in self.steps.iter().zip(&self.rows) {
            let mut record = vec![step.to_string()];
            record.extend(row.iter().map(|v| v.map_or(String::new(), |x| x.to_string())));
            let _ = w.write_record(&record);
        }
        String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
    }
}

/// Report over stored runs. Every missing run is named.
pub fn report(store: &PolicyStore, run_ids: &[String]) -> Result<Report> {
    if run_ids.is_empty() {
        return Err(Error::InvalidArgument("report needs at least one run id".into()));
    }
    let missing: Vec<String> = run_ids.iter().filter(|r| !store.contains_run(r)).map(|r| format!("run {r}")).collect();
    if !missing.is_empty() {
        return Err(Error::Missing(missing));
    }
    let logs = run_ids.iter().map(|r| store.load_run_log(r)).collect::<Result<Vec<_>>>()?;
    Ok(Report::build(run_ids, &logs))
}

pub fn report_csv(store: &PolicyStore, run_ids: &[String]) -> Result<String> {
    Ok(report(store, run_ids)?.to_csv())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppo::RewardEntry;

    fn log(points: &[(u64, f64)]) -> RewardLog {
        RewardLog {
            entries: points
                .iter()
                .enumerate()
                .map(|(i, &(step, r))| RewardEntry {
                    step,
                    episode: i as u64 + 1,
                    cumulative_reward: r,
                    wall_ms: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn single_run_has_two_columns() {
        let r = Report::build(&["a".into()], &[log(&[(10, 9.0), (25, 14.0)])]);
        assert_eq!(r.header, vec!["step", "a"]);
        assert_eq!(r.to_csv(), "step,a\n10,9\n25,14\n");
    }

    #[test]
    fn shorter_run_is_padded_and_flagged() {
        let r = Report::build(&["a".into(), "b".into()], &[log(&[(10, 9.0), (30, 19.0)]), log(&[(20, 4.0)])]);
        assert_eq!(r.header, vec!["step", "a", "b (padded)", "mean", "spread"]);
        assert_eq!(r.steps, vec![10, 20, 30]);
        assert_eq!(r.rows[0], vec![Some(9.0), None, Some(9.0), Some(0.0)]);
        assert_eq!(r.rows[2], vec![Some(19.0), Some(4.0), Some(11.5), Some(7.5)]);
    }
}
