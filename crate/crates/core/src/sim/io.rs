use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::metrics::{BatchSummary, RunTrace, StepMetrics};
use crate::error::{GuidanceError, Result};

pub const TRACE_CSV_HEADER: &str =
    "run,seed,step,hellinger,transitioning_fraction,cumulative_expense,max_path_flux,max_prob_flux";

/// Writes every trace as rows of one CSV table.
pub fn write_trace_csv(traces: &[RunTrace], path: &Path) -> Result<()> {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for (r, t) in traces.iter().enumerate() {
        for s in &t.samples {
            writeln!(
                out,
                "{r},{},{},{},{},{},{},{}",
                t.seed,
                s.step,
                s.hellinger,
                s.transitioning_fraction,
                s.cumulative_expense,
                s.max_path_flux,
                s.max_prob_flux
            )
            .expect("writing to a String");
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a trace CSV back as `(run, seed, samples)` groups.
pub fn read_trace_csv(path: &Path) -> Result<Vec<(usize, u64, Vec<StepMetrics>)>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == TRACE_CSV_HEADER => {}
        other => {
            return Err(GuidanceError::Scenario(format!(
                "unexpected trace header {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut groups: Vec<(usize, u64, Vec<StepMetrics>)> = Vec::new();
    for (lineno, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |what: &str| GuidanceError::Scenario(format!("trace line {}: {what}", lineno + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad("expected 8 fields"));
        }
        let num = |k: usize| f[k].trim().parse::<f64>().map_err(|_| bad("bad number"));
        let int = |k: usize| f[k].trim().parse::<u64>().map_err(|_| bad("bad integer"));
        let run = int(0)? as usize;
        let seed = int(1)?;
        let m = StepMetrics {
            step: int(2)?,
            hellinger: num(3)?,
            transitioning_fraction: num(4)?,
            cumulative_expense: num(5)?,
            max_path_flux: int(6)?,
            max_prob_flux: num(7)?,
        };
        match groups.last_mut() {
            Some(g) if g.0 == run => g.2.push(m),
            _ => groups.push((run, seed, vec![m])),
        }
    }
    Ok(groups)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| GuidanceError::Scenario(format!("json encoding: {e}")))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Writes `trace.csv` and `summary.json` into `dir`, creating it if needed.
pub fn write_run_outputs(traces: &[RunTrace], summary: &BatchSummary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_trace_csv(traces, &dir.join("trace.csv"))?;
    write_json(summary, &dir.join("summary.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let trace = RunTrace {
            seed: 11,
            config_digest: "x".into(),
            policy: "p2".into(),
            n_agents: 3,
            n_bins: 2,
            theta: vec![0.5, 0.5],
            samples: vec![
                StepMetrics {
                    step: 0,
                    hellinger: 0.5411961001461969,
                    transitioning_fraction: 0.0,
                    cumulative_expense: 0.0,
                    max_path_flux: 0,
                    max_prob_flux: 0.0,
                },
                StepMetrics {
                    step: 1,
                    hellinger: 0.1,
                    transitioning_fraction: 1.0 / 3.0,
                    cumulative_expense: 1.5,
                    max_path_flux: 1,
                    max_prob_flux: 0.6,
                },
            ],
            flux_exceedances: vec![0],
            n_paths: 2,
            async_windows: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trace_csv(&[trace.clone(), trace.clone()], &path).unwrap();
        let back = read_trace_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].1, 11);
        assert_eq!(back[0].2, trace.samples);
    }
}
