use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::mean_std;
use crate::policy::PiecewiseConstantPolicy;

use super::config::{Method, Task};

/// One (method, seed) cell of an experiment.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub method: Method,
    pub seed: u64,
    /// `None` on success, otherwise the error message.
    pub failure: Option<String>,
    pub state_cost: f64,
    pub control_cost: f64,
    pub initial_cost: f64,
    pub terminal_cost: f64,
    /// Broadcast: time-averaged rank over followers.
    pub average_rank: f64,
    /// Held-out: pairwise-concordance accuracy averaged over rotations.
    pub accuracy: f64,
    /// `(time, instantaneous cost)` at each bin start.
    pub series: Vec<(f64, f64)>,
    pub policy: Option<PiecewiseConstantPolicy>,
    pub wall_clock: f64,
}

impl RunRecord {
    pub fn empty(method: Method, seed: u64) -> Self {
        Self {
            method,
            seed,
            failure: None,
            state_cost: f64::NAN,
            control_cost: f64::NAN,
            initial_cost: f64::NAN,
            terminal_cost: f64::NAN,
            average_rank: f64::NAN,
            accuracy: f64::NAN,
            series: Vec::new(),
            policy: None,
            wall_clock: 0.0,
        }
    }

    pub fn failed(method: Method, seed: u64, error: &Error) -> Self {
        Self {
            failure: Some(error.to_string()),
            ..Self::empty(method, seed)
        }
    }

    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }
}

type Field = (&'static str, fn(&RunRecord) -> f64);

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub task: Task,
    /// Ordered by method (configuration order), then seed.
    pub records: Vec<RunRecord>,
    /// Extra lines for the summary, e.g. the chosen greedy grid point.
    pub notes: Vec<String>,
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

impl ExperimentReport {
    pub fn records_for(&self, method: Method) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter(move |r| r.method == method)
    }

    /// Mean and standard deviation of `field` over the successful seeds of `method`.
    pub fn stats(&self, method: Method, field: impl Fn(&RunRecord) -> f64) -> Option<(f64, f64)> {
        let v: Vec<f64> = self.records_for(method).filter(|r| r.is_ok()).map(field).collect();
        (!v.is_empty()).then(|| mean_std(&v))
    }

    pub fn write_report_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "method",
            "seed",
            "status",
            "state_cost",
            "control_cost",
            "initial_cost",
            "terminal_cost",
            "average_rank",
            "accuracy",
        ])?;
        for r in &self.records {
            let status = match &r.failure {
                None => "ok".to_string(),
                Some(e) => format!("error: {e}"),
            };
            w.write_record([
                r.method.name().to_string(),
                r.seed.to_string(),
                status,
                fmt_value(r.state_cost),
                fmt_value(r.control_cost),
                fmt_value(r.initial_cost),
                fmt_value(r.terminal_cost),
                fmt_value(r.average_rank),
                fmt_value(r.accuracy),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "task: {}", self.task);
        let mut methods: Vec<Method> = Vec::new();
        for r in &self.records {
            if !methods.contains(&r.method) {
                methods.push(r.method);
            }
        }
        for m in &methods {
            let total = self.records_for(*m).count();
            let ok = self.records_for(*m).filter(|r| r.is_ok()).count();
            let _ = write!(s, "{:<13} runs {ok}/{total}", m.name());
            let fields: [Field; 4] = [
                ("state_cost", |r| r.state_cost),
                ("control_cost", |r| r.control_cost),
                ("average_rank", |r| r.average_rank),
                ("accuracy", |r| r.accuracy),
            ];
            for (name, f) in fields {
                if let Some((mean, sd)) = self.stats(*m, f) {
                    if mean.is_finite() {
                        let _ = write!(s, "  {name} {mean:.6} +- {sd:.6}");
                    }
                }
            }
            s.push('\n');
        }
        for n in &self.notes {
            let _ = writeln!(s, "{n}");
        }
        s
    }

    /// Writes `report.csv`, `summary.txt`, and per-cell `series_*.csv` and
    /// `policy_*.csv`. Wall-clock times go to `timing.csv`, kept apart so
    /// the other files are reproducible byte for byte.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let create = |name: &str| -> Result<std::io::BufWriter<std::fs::File>> {
            let p = dir.join(name);
            Ok(std::io::BufWriter::new(
                std::fs::File::create(&p).map_err(|e| Error::io(&p, e))?,
            ))
        };
        self.write_report_csv(create("report.csv")?)?;
        let p = dir.join("summary.txt");
        std::fs::write(&p, self.summary()).map_err(|e| Error::io(&p, e))?;
        let mut timing = csv::Writer::from_writer(create("timing.csv")?);
        timing.write_record(["method", "seed", "seconds"])?;
        for r in &self.records {
            timing.write_record([
                r.method.name().to_string(),
                r.seed.to_string(),
                format!("{:.3}", r.wall_clock),
            ])?;
            if !r.series.is_empty() {
                let mut w = csv::Writer::from_writer(create(&format!("series_{}_{}.csv", r.method, r.seed))?);
                w.write_record(["time", "instantaneous_cost"])?;
                for (t, c) in &r.series {
                    w.write_record([t.to_string(), c.to_string()])?;
                }
                w.flush().map_err(|e| Error::io(dir, e))?;
            }
            if let Some(p) = &r.policy {
                p.save_csv(&dir.join(format!("policy_{}_{}.csv", r.method, r.seed)))?;
            }
        }
        timing.flush().map_err(|e| Error::io(dir, e))?;
        Ok(())
    }
}

/// Fraction of interval pairs ordered the same way by `predicted` and
/// `actual`. Each ordering sorts by value with ties broken by index.
pub fn pairwise_concordance(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    let n = predicted.len();
    if n != actual.len() || n < 2 {
        return Err(Error::invalid(
            "concordance needs two equal-length orderings of at least two items",
        ));
    }
    let positions = |v: &[f64]| {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
        let mut pos = vec![0usize; n];
        for (p, &i) in order.iter().enumerate() {
            pos[i] = p;
        }
        pos
    };
    let (p, a) = (positions(predicted), positions(actual));
    let mut concordant = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if (p[i] < p[j]) == (a[i] < a[j]) {
                concordant += 1;
            }
        }
    }
    Ok(concordant as f64 / (n * (n - 1) / 2) as f64)
}
