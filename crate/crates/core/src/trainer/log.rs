use std::fmt::Write as _;
use std::path::Path;

use super::TrainError;
use crate::nets::LossBundle;

/// Losses of one optimization step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    /// Global step index, starting at 1.
    pub step: u64,
    /// Epoch index, starting at 1.
    pub epoch: usize,
    pub losses: LossBundle,
    /// Mean squared error per reading between batch and reconstruction
    /// (VAE-GAN only).
    pub recon_mse: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub steps: usize,
    pub mean_recon_mse: Option<f64>,
    pub mean_l_d: f64,
    pub mean_l_generator: f64,
    /// Wall-clock time, known only for epochs run by this process.
    pub seconds: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<StepRecord>,
    /// `(epoch, seconds)` for epochs timed in this process.
    pub timings: Vec<(usize, f64)>,
}

const STEP_HEADER: &str = "step,epoch,l_prior,l_reconstruction,l_dg,l_generator,l_real,l_fake,l_noise,l_d,recon_mse";

impl TrainLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: StepRecord) {
        if let Some(last) = self.records.last() {
            assert!(record.step > last.step, "step index must increase");
        }
        self.records.push(record);
    }

    /// Drops every record after `epoch`, e.g. before resuming from a
    /// checkpoint taken at the end of that epoch.
    pub fn truncate_to_epoch(&mut self, epoch: usize) {
        self.records.retain(|r| r.epoch <= epoch);
        self.timings.retain(|(e, _)| *e <= epoch);
    }

    pub fn epochs(&self) -> Vec<EpochSummary> {
        let mut out: Vec<EpochSummary> = Vec::new();
        let mut sums = (0.0, 0.0, 0.0, true);
        for (i, r) in self.records.iter().enumerate() {
            sums.0 += r.recon_mse.unwrap_or(0.0);
            sums.1 += r.losses.l_d;
            sums.2 += r.losses.l_generator;
            sums.3 &= r.recon_mse.is_some();
            let closes = self.records.get(i + 1).is_none_or(|n| n.epoch != r.epoch);
            if closes {
                let start = out.iter().map(|e| e.steps).sum::<usize>();
                let steps = i + 1 - start;
                let n = steps as f64;
                out.push(EpochSummary {
                    epoch: r.epoch,
                    steps,
                    mean_recon_mse: sums.3.then_some(sums.0 / n),
                    mean_l_d: sums.1 / n,
                    mean_l_generator: sums.2 / n,
                    seconds: self.timings.iter().find(|(e, _)| *e == r.epoch).map(|(_, s)| *s),
                });
                sums = (0.0, 0.0, 0.0, true);
            }
        }
        out
    }

    /// Per-step CSV. Contains no timing data, so equal runs give equal bytes.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{STEP_HEADER}\n");
        for r in &self.records {
            let _ = write!(out, "{},{}", r.step, r.epoch);
            for v in r.losses.values() {
                let _ = write!(out, ",{v}");
            }
            match r.recon_mse {
                Some(m) => {
                    let _ = writeln!(out, ",{m}");
                }
                None => out.push_str(",\n"),
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, TrainError> {
        let mut lines = text.lines();
        if lines.next() != Some(STEP_HEADER) {
            return Err(TrainError::Io("train log: unexpected header".into()));
        }
        let mut log = TrainLog::new();
        for (n, line) in lines.enumerate() {
            let bad = || TrainError::Io(format!("train log line {}: malformed record", n + 2));
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 11 {
                return Err(bad());
            }
            let f = |i: usize| cells[i].parse::<f64>().map_err(|_| bad());
            let record = StepRecord {
                step: cells[0].parse().map_err(|_| bad())?,
                epoch: cells[1].parse().map_err(|_| bad())?,
                losses: LossBundle {
                    l_prior: f(2)?,
                    l_reconstruction: f(3)?,
                    l_dg: f(4)?,
                    l_generator: f(5)?,
                    l_real: f(6)?,
                    l_fake: f(7)?,
                    l_noise: f(8)?,
                    l_d: f(9)?,
                },
                recon_mse: if cells[10].is_empty() { None } else { Some(f(10)?) },
            };
            if log.records.last().is_some_and(|l| l.step >= record.step) {
                return Err(bad());
            }
            log.records.push(record);
        }
        Ok(log)
    }

    pub fn epochs_csv(&self) -> String {
        let mut out = String::from("epoch,steps,mean_recon_mse,mean_l_d,mean_l_generator,seconds\n");
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for e in self.epochs() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                e.epoch,
                e.steps,
                opt(e.mean_recon_mse),
                e.mean_l_d,
                e.mean_l_generator,
                opt(e.seconds)
            );
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), TrainError> {
        std::fs::write(path, self.to_csv()).map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, TrainError> {
        let text = std::fs::read_to_string(path).map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv(&text)
    }
}
