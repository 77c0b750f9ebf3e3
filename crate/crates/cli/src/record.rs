use std::io::Write;

use anyhow::Result;
use domcoop::search::Outcome;
use serde::{Deserialize, Serialize};

/// One solver run, as written to `jsonl` and `csv` output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub instance: String,
    pub domain: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_makespan: Option<i64>,
    pub nodes: u64,
    pub time_to_best_ms: u64,
    pub total_time_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_lb_percent: Option<f64>,
}

pub const CSV_HEADER: &str =
    "instance,domain,status,best_makespan,nodes,time_to_best_ms,total_time_ms,delta_lb_percent";

impl ResultRecord {
    pub fn from_outcome(instance: &str, domain: &str, out: &Outcome, lb: Option<i64>) -> Self {
        let s = &out.stats;
        ResultRecord {
            instance: instance.to_string(),
            domain: domain.to_string(),
            status: s.status.to_string(),
            best_makespan: s.best_objective,
            nodes: s.nodes,
            time_to_best_ms: s.time_to_best.as_millis() as u64,
            total_time_ms: s.total_time.as_millis() as u64,
            delta_lb_percent: s.best_objective.zip(lb).and_then(|(b, lb)| delta_lb(b, lb)),
        }
    }

    pub fn error(instance: &str, domain: &str) -> Self {
        ResultRecord {
            instance: instance.to_string(),
            domain: domain.to_string(),
            status: "Error".into(),
            best_makespan: None,
            nodes: 0,
            time_to_best_ms: 0,
            total_time_ms: 0,
            delta_lb_percent: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        [
            csv_field(&self.instance),
            csv_field(&self.domain),
            csv_field(&self.status),
            opt(self.best_makespan.map(|v| v.to_string())),
            self.nodes.to_string(),
            self.time_to_best_ms.to_string(),
            self.total_time_ms.to_string(),
            opt(self.delta_lb_percent.map(|v| format!("{v:.1}"))),
        ]
        .join(",")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `100·(best − lb)/lb`, rounded to one decimal.
pub fn delta_lb(best: i64, lb: i64) -> Option<f64> {
    (lb > 0).then(|| (1000.0 * (best - lb) as f64 / lb as f64).round() / 10.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Jsonl,
    Csv,
}

pub fn write_records(w: &mut impl Write, format: Format, records: &[ResultRecord]) -> Result<()> {
    match format {
        Format::Jsonl => {
            for r in records {
                writeln!(w, "{}", r.to_json())?;
            }
        }
        Format::Csv => {
            writeln!(w, "{CSV_HEADER}")?;
            for r in records {
                writeln!(w, "{}", r.to_csv())?;
            }
        }
    }
    Ok(())
}
