use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

/// One way to run a task: a 1-based machine id and a duration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Alternative {
    pub machine: usize,
    pub duration: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Task {
    pub alternatives: Vec<Alternative>,
}

impl Task {
    pub fn new(pairs: &[(usize, i64)]) -> Self {
        Task {
            alternatives: pairs
                .iter()
                .map(|&(machine, duration)| Alternative { machine, duration })
                .collect(),
        }
    }

    pub fn min_duration(&self) -> i64 {
        self.alternatives.iter().map(|a| a.duration).min().unwrap_or(0)
    }

    pub fn max_duration(&self) -> i64 {
        self.alternatives.iter().map(|a| a.duration).max().unwrap_or(0)
    }

    pub fn min_machine(&self) -> usize {
        self.alternatives.iter().map(|a| a.machine).min().unwrap_or(1)
    }

    pub fn max_machine(&self) -> usize {
        self.alternatives.iter().map(|a| a.machine).max().unwrap_or(1)
    }

    /// The duration shared by every alternative, if there is one.
    pub fn fixed_duration(&self) -> Option<i64> {
        let d = self.alternatives.first()?.duration;
        self.alternatives.iter().all(|a| a.duration == d).then_some(d)
    }

    pub fn duration_on(&self, machine: usize) -> Option<i64> {
        self.alternatives.iter().find(|a| a.machine == machine).map(|a| a.duration)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FjsInstance {
    pub n_machines: usize,
    pub jobs: Vec<Vec<Task>>,
}

impl FjsInstance {
    pub fn new(n_machines: usize, jobs: Vec<Vec<Task>>) -> Self {
        FjsInstance { n_machines, jobs }
    }

    pub fn n_jobs(&self) -> usize {
        self.jobs.len()
    }

    pub fn n_tasks(&self) -> usize {
        self.jobs.iter().map(Vec::len).sum()
    }

    /// `(job, task)` pairs, 0-based, job by job.
    pub fn task_ids(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.jobs.iter().enumerate().flat_map(|(j, ts)| (0..ts.len()).map(move |t| (j, t)))
    }

    pub fn task(&self, j: usize, t: usize) -> &Task {
        &self.jobs[j][t]
    }

    /// Writes the instance in `.fjs` format.
    pub fn to_fjs(&self) -> String {
        let mut out = format!("{} {}\n", self.n_jobs(), self.n_machines);
        for job in &self.jobs {
            write!(out, "{}", job.len()).unwrap();
            for task in job {
                write!(out, " {}", task.alternatives.len()).unwrap();
                for a in &task.alternatives {
                    write!(out, " {} {}", a.machine, a.duration).unwrap();
                }
            }
            out.push('\n');
        }
        out
    }

    /// A lower bound on the makespan: the longest job with shortest
    /// durations, or the total shortest work spread over all machines.
    pub fn trivial_lower_bound(&self) -> i64 {
        let job = self.jobs.iter().map(|ts| ts.iter().map(Task::min_duration).sum()).max().unwrap_or(0);
        let work: i64 = self.jobs.iter().flatten().map(Task::min_duration).sum();
        let m = self.n_machines.max(1) as i64;
        job.max((work + m - 1) / m)
    }
}

/// Sum over all tasks of the longest alternative: every serial schedule
/// ends by then.
pub fn horizon(inst: &FjsInstance) -> i64 {
    inst.jobs.iter().flatten().map(Task::max_duration).sum()
}

/// Parse failures, with 1-based line and token positions.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}, token {token}: malformed header ({detail})")]
    MalformedHeader { line: usize, token: usize, detail: String },
    #[error("line {line}, token {token}: truncated job line ({detail})")]
    TruncatedJobLine { line: usize, token: usize, detail: String },
    #[error("line {line}, token {token}: machine id {machine} outside 1..={n_machines}")]
    MachineIdOutOfRange { line: usize, token: usize, machine: i64, n_machines: usize },
    #[error("line {line}, token {token}: duration {value} is not positive")]
    NonPositiveDuration { line: usize, token: usize, value: i64 },
}

struct JobLine<'a> {
    line: usize,
    tokens: Vec<&'a str>,
    pos: usize,
}

impl JobLine<'_> {
    fn next(&mut self, what: &str) -> Result<(usize, i64), ParseError> {
        let token = self.pos + 1;
        let Some(raw) = self.tokens.get(self.pos) else {
            return Err(ParseError::TruncatedJobLine {
                line: self.line,
                token,
                detail: format!("missing {what}"),
            });
        };
        self.pos += 1;
        raw.parse::<i64>().map(|v| (token, v)).map_err(|_| ParseError::TruncatedJobLine {
            line: self.line,
            token,
            detail: format!("expected {what}, found `{raw}`"),
        })
    }

    fn count(&mut self, what: &str, min: i64) -> Result<usize, ParseError> {
        let (token, v) = self.next(what)?;
        if v < min {
            return Err(ParseError::TruncatedJobLine {
                line: self.line,
                token,
                detail: format!("{what} must be at least {min}, found {v}"),
            });
        }
        Ok(v as usize)
    }
}

/// Reads the `.fjs` format: a header `n_jobs n_machines [ignored...]`, then
/// one line per job `T (k (machine duration){k}){T}`.
pub fn parse_fjs(text: &str) -> Result<FjsInstance, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, toks)| !toks.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| ParseError::MalformedHeader {
        line: 1,
        token: 1,
        detail: "empty input".into(),
    })?;
    let header_count = |i: usize, what: &str| -> Result<usize, ParseError> {
        let raw = header.get(i).ok_or_else(|| ParseError::MalformedHeader {
            line: hline,
            token: i + 1,
            detail: format!("missing {what}"),
        })?;
        raw.parse::<usize>().map_err(|_| ParseError::MalformedHeader {
            line: hline,
            token: i + 1,
            detail: format!("expected {what}, found `{raw}`"),
        })
    };
    let n_jobs = header_count(0, "job count")?;
    let n_machines = header_count(1, "machine count")?;
    let mut jobs = Vec::with_capacity(n_jobs);
    let mut last_line = hline;
    for _ in 0..n_jobs {
        let Some((line, tokens)) = lines.next() else {
            return Err(ParseError::TruncatedJobLine {
                line: last_line + 1,
                token: 1,
                detail: format!("expected {n_jobs} job lines, found {}", jobs.len()),
            });
        };
        last_line = line;
        let mut jl = JobLine { line, tokens, pos: 0 };
        let n_tasks = jl.count("task count", 0)?;
        let mut tasks = Vec::with_capacity(n_tasks);
        for _ in 0..n_tasks {
            let k = jl.count("alternative count", 1)?;
            let mut alternatives = Vec::with_capacity(k);
            for _ in 0..k {
                let (mt, machine) = jl.next("machine id")?;
                if machine < 1 || machine as usize > n_machines {
                    return Err(ParseError::MachineIdOutOfRange { line, token: mt, machine, n_machines });
                }
                let (dt, duration) = jl.next("duration")?;
                if duration < 1 {
                    return Err(ParseError::NonPositiveDuration { line, token: dt, value: duration });
                }
                alternatives.push(Alternative { machine: machine as usize, duration });
            }
            tasks.push(Task { alternatives });
        }
        jobs.push(tasks);
    }
    Ok(FjsInstance { n_machines, jobs })
}

/// A random instance with at most `max_tasks` tasks, for tests and
/// oracle suites.
pub fn random_instance(rng: &mut impl Rng, max_tasks: usize) -> FjsInstance {
    let n_machines = rng.gen_range(1..=3);
    let n_jobs = rng.gen_range(1..=3.min(max_tasks.max(1)));
    let mut left = max_tasks.max(1);
    let mut jobs = Vec::new();
    for j in 0..n_jobs {
        let reserve = n_jobs - j - 1;
        let most = (left - reserve).clamp(1, 3);
        let n = rng.gen_range(1..=most);
        left -= n;
        let job = (0..n)
            .map(|_| {
                let mut ms: Vec<usize> = (1..=n_machines).collect();
                let k = rng.gen_range(1..=n_machines);
                let mut alternatives = Vec::with_capacity(k);
                for _ in 0..k {
                    let m = ms.remove(rng.gen_range(0..ms.len()));
                    alternatives.push(Alternative { machine: m, duration: rng.gen_range(1..=5) });
                }
                alternatives.sort_by_key(|a| a.machine);
                Task { alternatives }
            })
            .collect();
        jobs.push(job);
    }
    FjsInstance { n_machines, jobs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parse_one_job() {
        let inst = parse_fjs("1 2\n2 1 1 3 2 1 4 2 2\n").unwrap();
        assert_eq!(inst.n_jobs(), 1);
        assert_eq!(inst.jobs[0], vec![Task::new(&[(1, 3)]), Task::new(&[(1, 4), (2, 2)])]);
        assert_eq!(horizon(&inst), 7);
    }

    #[test]
    fn header_tail_and_blank_lines() {
        let inst = parse_fjs("\n2 3 1.5\n1 1 1 2  \n\n1 1 3 4\n\n").unwrap();
        assert_eq!(inst.n_machines, 3);
        assert_eq!(inst.n_jobs(), 2);
    }

    #[test]
    fn errors_name_positions() {
        assert_eq!(
            parse_fjs("1 3\n1 1 4 2\n").unwrap_err(),
            ParseError::MachineIdOutOfRange { line: 2, token: 3, machine: 4, n_machines: 3 }
        );
        assert_eq!(
            parse_fjs("1 3\n1 1 2 0\n").unwrap_err(),
            ParseError::NonPositiveDuration { line: 2, token: 4, value: 0 }
        );
        assert!(matches!(
            parse_fjs("1 3\n2 1 2 3\n").unwrap_err(),
            ParseError::TruncatedJobLine { line: 2, token: 5, .. }
        ));
        assert!(matches!(
            parse_fjs("2 3\n1 1 2 3\n").unwrap_err(),
            ParseError::TruncatedJobLine { line: 3, .. }
        ));
        assert!(matches!(parse_fjs("x 3\n").unwrap_err(), ParseError::MalformedHeader { token: 1, .. }));
        assert!(matches!(parse_fjs("").unwrap_err(), ParseError::MalformedHeader { .. }));
    }

    #[test]
    fn horizon_edge_cases() {
        assert_eq!(horizon(&FjsInstance::new(1, vec![vec![Task::new(&[(1, 5)])]])), 5);
        assert_eq!(horizon(&FjsInstance::new(1, Vec::new())), 0);
    }

    #[test]
    fn round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let inst = random_instance(&mut rng, 8);
            assert!(inst.n_tasks() <= 8);
            assert_eq!(parse_fjs(&inst.to_fjs()).unwrap(), inst);
        }
    }
}
