use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::Point;

/// One objective evaluation. Initial random samples carry iteration 0; BO
/// rounds are numbered from 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub point: Point,
    pub observation: f64,
    pub best_so_far: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Aborted { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoTrace {
    pub strategy: String,
    pub objective: String,
    pub seed: u64,
    /// Resolved settings of the run.
    pub config: serde_json::Value,
    pub records: Vec<TraceRecord>,
    #[serde(flatten)]
    pub status: RunStatus,
}

impl BoTrace {
    pub fn new(strategy: String, objective: String, seed: u64, config: serde_json::Value) -> Self {
        Self {
            strategy,
            objective,
            seed,
            config,
            records: Vec::new(),
            status: RunStatus::Completed,
        }
    }

    pub fn push(&mut self, iteration: usize, point: Point, observation: f64) {
        let best_so_far = self.best().map_or(observation, |b| b.min(observation));
        self.records.push(TraceRecord {
            iteration,
            point,
            observation,
            best_so_far,
        });
    }

    pub fn best(&self) -> Option<f64> {
        self.records.last().map(|r| r.best_so_far)
    }

    pub fn is_completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    /// Best-so-far at the end of each iteration `0..=last`.
    pub fn best_by_iteration(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.records {
            while out.len() <= r.iteration {
                let carry = out.last().copied().unwrap_or(r.best_so_far);
                out.push(carry);
            }
            out[r.iteration] = r.best_so_far;
        }
        out
    }

    /// `iteration,x0..x{d-1},observation,best_so_far`
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let dim = self.records.first().map_or(0, |r| r.point.len());
        let coords: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
        let mut header = vec!["iteration".to_string()];
        header.extend(coords);
        header.push("observation".into());
        header.push("best_so_far".into());
        writeln!(w, "{}", header.join(","))?;
        for r in &self.records {
            let mut row = vec![r.iteration.to_string()];
            row.extend(r.point.iter().map(|v| format!("{v}")));
            row.push(format!("{}", r.observation));
            row.push(format!("{}", r.best_so_far));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn best_so_far_and_iterations() {
        let mut t = BoTrace::new("s".into(), "o".into(), 1, serde_json::Value::Null);
        t.push(0, vec![0.0], 3.0);
        t.push(0, vec![1.0], 5.0);
        t.push(1, vec![2.0], 1.0);
        t.push(2, vec![3.0], 2.0);
        let best: Vec<f64> = t.records.iter().map(|r| r.best_so_far).collect();
        assert_eq!(best, vec![3.0, 3.0, 1.0, 1.0]);
        assert_eq!(t.best_by_iteration(), vec![3.0, 1.0, 1.0]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "iteration,x0,observation,best_so_far");
        assert_eq!(text.lines().nth(3).unwrap(), "1,2,1,1");
    }

    #[test]
    fn json_carries_status() {
        let mut t = BoTrace::new("s".into(), "o".into(), 1, serde_json::json!({"k": 1}));
        t.status = RunStatus::Aborted { reason: "boom".into() };
        let v = serde_json::to_value(&t).unwrap();
        assert_eq!(v["status"], "aborted");
        assert_eq!(v["reason"], "boom");
        let back: BoTrace = serde_json::from_value(v).unwrap();
        assert_eq!(back, t);
    }
}
