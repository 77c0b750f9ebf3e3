use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::record::ResultRecord;

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub path: PathBuf,
    pub lower_bound: Option<i64>,
}

/// Reads a manifest: one `instance-path [lower-bound]` per line, `#` starts
/// a comment. Relative paths are taken from the manifest's directory.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let mut toks = line.split_whitespace();
        let Some(path) = toks.next() else { continue };
        let lower_bound = match toks.next() {
            None => None,
            Some(t) => Some(
                t.parse::<i64>()
                    .with_context(|| format!("manifest line {}: bad lower bound `{t}`", i + 1))?,
            ),
        };
        if let Some(extra) = toks.next() {
            bail!("manifest line {}: unexpected `{extra}`", i + 1);
        }
        out.push(Entry { path: base.join(path), lower_bound });
    }
    Ok(out)
}

/// `m[i][j]`: instances on which domain `i` found a strictly smaller
/// makespan than domain `j` (or `j` found none).
pub fn pairwise(records: &[ResultRecord], domains: &[String]) -> Vec<Vec<usize>> {
    let mut best: BTreeMap<&str, BTreeMap<&str, Option<i64>>> = BTreeMap::new();
    for r in records {
        best.entry(&r.instance).or_default().insert(&r.domain, r.best_makespan);
    }
    let n = domains.len();
    let mut m = vec![vec![0; n]; n];
    for per in best.values() {
        for i in 0..n {
            for j in 0..n {
                let a = per.get(domains[i].as_str()).copied().flatten();
                let b = per.get(domains[j].as_str()).copied().flatten();
                let better = match (a, b) {
                    (Some(a), Some(b)) => a < b,
                    (Some(_), None) => per.contains_key(domains[j].as_str()),
                    _ => false,
                };
                if i != j && better {
                    m[i][j] += 1;
                }
            }
        }
    }
    m
}

pub fn summary(records: &[ResultRecord], domains: &[String]) -> String {
    let mut s = String::new();
    writeln!(s, "mean delta_lb_percent:").unwrap();
    for d in domains {
        let ds: Vec<f64> =
            records.iter().filter(|r| &r.domain == d).filter_map(|r| r.delta_lb_percent).collect();
        if ds.is_empty() {
            writeln!(s, "  {d:<8} -").unwrap();
        } else {
            let mean = ds.iter().sum::<f64>() / ds.len() as f64;
            writeln!(s, "  {d:<8} {mean:.1} ({} instances)", ds.len()).unwrap();
        }
    }
    writeln!(s, "strictly better bounds (row against column):").unwrap();
    let m = pairwise(records, domains);
    write!(s, "  {:<8}", "").unwrap();
    for d in domains {
        write!(s, " {d:>8}").unwrap();
    }
    s.push('\n');
    for (i, d) in domains.iter().enumerate() {
        write!(s, "  {d:<8}").unwrap();
        for (j, v) in m[i].iter().enumerate() {
            if i == j {
                write!(s, " {:>8}", "-").unwrap();
            } else {
                write!(s, " {v:>8}").unwrap();
            }
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(inst: &str, dom: &str, best: Option<i64>) -> ResultRecord {
        ResultRecord { best_makespan: best, status: "Sat".into(), ..ResultRecord::error(inst, dom) }
    }

    #[test]
    fn manifest_lines() {
        let m = parse_manifest("# c\n\na.fjs 10\n  b.fjs # no bound\n", Path::new("/d")).unwrap();
        assert_eq!(
            m,
            vec![
                Entry { path: "/d/a.fjs".into(), lower_bound: Some(10) },
                Entry { path: "/d/b.fjs".into(), lower_bound: None },
            ]
        );
        assert!(parse_manifest("a.fjs x\n", Path::new(".")).is_err());
    }

    #[test]
    fn ties_count_for_nobody() {
        let doms = vec!["fjs1".to_string(), "fjs2".to_string()];
        let rs = vec![
            rec("a", "fjs1", Some(5)),
            rec("a", "fjs2", Some(5)),
            rec("b", "fjs1", Some(4)),
            rec("b", "fjs2", Some(6)),
            rec("c", "fjs1", None),
            rec("c", "fjs2", Some(9)),
        ];
        assert_eq!(pairwise(&rs, &doms), vec![vec![0, 1], vec![1, 0]]);
    }
}
