//! Output files of a run.
//!
//! * `metrics.csv`: one row per (round, period, agent): `round, period,
//!   agent, apples, tax_paid, redistribution, mixed_reward, eta, phi_0..,
//!   welfare, principal_reward`. `welfare` is the objective over the round's
//!   running per-agent totals after the period; `principal_reward` is the
//!   change it made.
//! * `rounds.csv`: one row per round with the vote, the schedule, grid apple
//!   counts, per-agent totals and the initial/terminal state hashes.
//! * `votes.csv`: round, chosen objective, η and every report.
//! * `summary.json`: welfare trajectory, per-agent run totals with their
//!   Gini coefficient, and throughput.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::welfare::WelfareObjective;

/// Gini coefficient `Σ_i Σ_j |x_i − x_j| / (2 n² μ)`; zero when every value
/// is zero.
pub fn gini(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let total: f64 = values.iter().sum();
    if values.is_empty() || total == 0.0 {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Σ_i Σ_j |x_i − x_j| = 2 Σ_k (2k − n + 1) x_(k) over the sorted order.
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(k, x)| (2.0 * k as f64 - n + 1.0) * x)
        .sum();
    weighted / (n * total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRow {
    pub round: u64,
    pub period: u64,
    pub agent: usize,
    pub apples: f64,
    pub tax_paid: f64,
    pub redistribution: f64,
    pub mixed_reward: f64,
    pub eta: f64,
    pub phi: Vec<f64>,
    pub welfare: f64,
    pub principal_reward: f64,
}

/// Everything recorded about one voting round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub episode: u64,
    pub objective: WelfareObjective,
    pub eta: f64,
    pub reports: Vec<f64>,
    pub ceiling: f64,
    pub phi: Vec<f64>,
    pub totals: Vec<u64>,
    pub welfare: f64,
    pub principal_reward: f64,
    pub apples_start: u64,
    pub apples_end: u64,
    /// Grid apple count after every tax period, with the step clock at
    /// which it was taken.
    pub period_apples: Vec<(u64, u64)>,
    pub initial_hash: u64,
    pub terminal_hash: u64,
}

pub fn objective_name(o: &WelfareObjective) -> String {
    match o {
        WelfareObjective::Utilitarian => "utilitarian".into(),
        WelfareObjective::Nash => "nash".into(),
        WelfareObjective::Egalitarian => "egalitarian".into(),
        WelfareObjective::Interpolated { eta } => format!("interpolated({eta})"),
    }
}

fn hex(h: u64) -> String {
    format!("{h:016x}")
}

/// Append-only writers for the three CSV files.
pub struct MetricsWriter {
    dir: PathBuf,
    metrics: csv::Writer<BufWriter<File>>,
    rounds: csv::Writer<BufWriter<File>>,
    votes: csv::Writer<BufWriter<File>>,
}

impl MetricsWriter {
    /// Create `dir` and the CSV files with their headers.
    pub fn create(dir: &Path, n_agents: usize, brackets: usize) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let open = |name: &str| -> Result<csv::Writer<BufWriter<File>>> {
            let path = dir.join(name);
            let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
            Ok(csv::Writer::from_writer(BufWriter::new(f)))
        };
        let mut metrics = open("metrics.csv")?;
        let mut rounds = open("rounds.csv")?;
        let mut votes = open("votes.csv")?;

        let phis: Vec<String> = (0..brackets).map(|b| format!("phi_{b}")).collect();
        let agents = |p: &'static str| (0..n_agents).map(move |i| format!("{p}{i}"));

        let mut h: Vec<String> = ["round", "period", "agent", "apples", "tax_paid", "redistribution", "mixed_reward", "eta"]
            .map(String::from)
            .to_vec();
        h.extend(phis.iter().cloned());
        h.extend(["welfare", "principal_reward"].map(String::from));
        metrics.write_record(&h)?;

        let mut h: Vec<String> = ["round", "episode", "objective", "eta", "ceiling"].map(String::from).to_vec();
        h.extend(phis.iter().cloned());
        h.extend(["welfare", "principal_reward", "apples_start", "apples_end"].map(String::from));
        h.extend(agents("total_"));
        h.extend(["initial_hash", "terminal_hash"].map(String::from));
        rounds.write_record(&h)?;

        let mut h: Vec<String> = ["round", "objective", "eta"].map(String::from).to_vec();
        h.extend(agents("report_"));
        votes.write_record(&h)?;

        let mut w = MetricsWriter {
            dir: dir.to_path_buf(),
            metrics,
            rounds,
            votes,
        };
        w.flush()?;
        Ok(w)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_period(&mut self, r: &PeriodRow) -> Result<()> {
        let mut rec = vec![
            r.round.to_string(),
            r.period.to_string(),
            r.agent.to_string(),
            r.apples.to_string(),
            r.tax_paid.to_string(),
            r.redistribution.to_string(),
            r.mixed_reward.to_string(),
            r.eta.to_string(),
        ];
        rec.extend(r.phi.iter().map(f64::to_string));
        rec.push(r.welfare.to_string());
        rec.push(r.principal_reward.to_string());
        self.metrics.write_record(&rec)?;
        Ok(())
    }

    pub fn write_round(&mut self, r: &RoundRecord) -> Result<()> {
        let mut rec = vec![
            r.round.to_string(),
            r.episode.to_string(),
            objective_name(&r.objective),
            r.eta.to_string(),
            r.ceiling.to_string(),
        ];
        rec.extend(r.phi.iter().map(f64::to_string));
        rec.extend([
            r.welfare.to_string(),
            r.principal_reward.to_string(),
            r.apples_start.to_string(),
            r.apples_end.to_string(),
        ]);
        rec.extend(r.totals.iter().map(u64::to_string));
        rec.extend([hex(r.initial_hash), hex(r.terminal_hash)]);
        self.rounds.write_record(&rec)?;

        let mut rec = vec![r.round.to_string(), objective_name(&r.objective), r.eta.to_string()];
        rec.extend(r.reports.iter().map(f64::to_string));
        self.votes.write_record(&rec)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        for (name, w) in [
            ("metrics.csv", &mut self.metrics),
            ("rounds.csv", &mut self.rounds),
            ("votes.csv", &mut self.votes),
        ] {
            w.flush().map_err(|e| Error::io(self.dir.join(name), e))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub first_round: u64,
    pub rounds: u64,
    pub env_steps: u64,
    pub elapsed_secs: f64,
    pub env_steps_per_sec: f64,
    pub welfare: Vec<f64>,
    /// Per-agent apple totals summed over the rounds in this run.
    pub totals: Vec<u64>,
    pub gini: f64,
    pub final_phi: Vec<f64>,
}

impl Summary {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("summary.json");
        let text = serde_json::to_string_pretty(self).expect("summary serializes");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("summary.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }
}

/// Reshape `rounds.csv` into long format: `round, series, value`, with
/// series `welfare`, `principal_reward`, `eta`, `ceiling`, `apples_start`,
/// `apples_end`, every `phi_b` and every `total_i`.
pub fn plot_data(dir: &Path) -> Result<PathBuf> {
    let src = dir.join("rounds.csv");
    let mut reader = csv::Reader::from_path(&src)?;
    let headers = reader.headers()?.clone();
    let wanted: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| {
            matches!(*h, "welfare" | "principal_reward" | "eta" | "ceiling" | "apples_start" | "apples_end")
                || h.starts_with("phi_")
                || h.starts_with("total_")
        })
        .map(|(i, h)| (i, h.to_string()))
        .collect();
    let round_col = headers
        .iter()
        .position(|h| h == "round")
        .ok_or_else(|| Error::invalid(format!("{} has no round column", src.display())))?;
    let dst = dir.join("plot_data.csv");
    let mut out = csv::Writer::from_path(&dst)?;
    out.write_record(["round", "series", "value"])?;
    for rec in reader.records() {
        let rec = rec?;
        for (i, name) in &wanted {
            out.write_record([&rec[round_col], name.as_str(), &rec[*i]])?;
        }
    }
    out.flush().map_err(|e| Error::io(&dst, e))?;
    Ok(dst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairwise_gini(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let diff: f64 = x.iter().flat_map(|a| x.iter().map(move |b| (a - b).abs())).sum();
        diff / (2.0 * n * n * mean)
    }

    #[test]
    fn gini_endpoints() {
        assert_eq!(gini(&[0.0; 4]), 0.0);
        assert_eq!(gini(&[3.0; 5]), 0.0);
        assert!((gini(&[0.0, 0.0, 0.0, 8.0]) - 0.75).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn gini_matches_pairwise_definition(x in prop::collection::vec(0u32..1000, 1..20)) {
            let x: Vec<f64> = x.into_iter().map(f64::from).collect();
            prop_assume!(x.iter().sum::<f64>() > 0.0);
            prop_assert!((gini(&x) - pairwise_gini(&x)).abs() < 1e-12);
        }
    }
}
