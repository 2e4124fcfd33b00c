use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BenchRun, RankTiming, Strategy};

use super::advice::{advise_strategy, Recommendation};
use super::metrics::{mean, median, ratio_comp_comm, ratio_comp_io, std_dev, total_time, Components, Ratio};
use super::straggler::{detect_stragglers, StragglerPolicy};

/// A repeat whose total time exceeds this multiple of the median repeat is
/// excluded from the averages (but still reported).
pub const OUTLIER_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub machine: String,
    pub policy: StragglerPolicy,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            machine: "local".to_string(),
            policy: StragglerPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerialSummary {
    pub t_total: f64,
    pub t_comp: f64,
    pub t_io: f64,
    pub r_comp_io: Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StragglerFlag {
    pub repeat: usize,
    pub rank: usize,
    pub t_n: f64,
    pub threshold: f64,
}

/// Aggregates for one worker count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n_workers: usize,
    pub t_total_mean: f64,
    pub t_total_std: f64,
    pub speedup: f64,
    pub efficiency: f64,
    /// `t_total` of every repeat, excluded ones included.
    pub t_total_repeats: Vec<f64>,
    pub component_means: Components,
    pub component_stds: Components,
    pub r_comp_comm: Ratio,
    pub stragglers: Vec<StragglerFlag>,
    pub excluded_repeats: Vec<usize>,
    /// Per-rank timings of the first repeat kept in the averages.
    pub rank_timings: Vec<RankTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub machine: String,
    pub strategy: Strategy,
    pub workload_factor: usize,
    pub repeats: usize,
    pub serial: SerialSummary,
    pub points: Vec<ScalingPoint>,
    pub advice: Recommendation,
}

impl BenchReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Indices of repeats whose total time exceeds [`OUTLIER_FACTOR`] × median.
pub fn outlier_repeats(t_totals: &[f64]) -> Vec<usize> {
    let Some(med) = median(t_totals) else {
        return Vec::new();
    };
    t_totals
        .iter()
        .enumerate()
        .filter(|&(_, &t)| t > OUTLIER_FACTOR * med)
        .map(|(i, _)| i)
        .collect()
}

struct RunAggregate {
    t_totals: Vec<f64>,
    excluded: Vec<usize>,
    kept: Vec<usize>,
    t_total_mean: f64,
    t_total_std: f64,
}

fn aggregate(run: &BenchRun) -> Result<RunAggregate> {
    run.validate()?;
    if run.repeats.is_empty() {
        return Err(Error::invalid(format!("run with {} workers has no repeats", run.n_workers)));
    }
    let t_totals = run
        .repeats
        .iter()
        .map(|r| total_time(&r.timings))
        .collect::<Result<Vec<_>>>()?;
    let excluded = outlier_repeats(&t_totals);
    let kept: Vec<usize> = (0..t_totals.len()).filter(|i| !excluded.contains(i)).collect();
    let kept_totals: Vec<f64> = kept.iter().map(|&i| t_totals[i]).collect();
    Ok(RunAggregate {
        t_total_mean: mean(kept_totals.iter().copied()),
        t_total_std: std_dev(&kept_totals),
        t_totals,
        excluded,
        kept,
    })
}

fn scaling_point(run: &BenchRun, agg: RunAggregate, t_serial: f64, policy: StragglerPolicy) -> Result<ScalingPoint> {
    let per_repeat: Vec<Components> = agg
        .kept
        .iter()
        .map(|&i| Components::rank_average(&run.repeats[i].timings))
        .collect();
    let (component_means, component_stds) = Components::mean_std(&per_repeat);

    let all_kept: Vec<RankTiming> = agg
        .kept
        .iter()
        .flat_map(|&i| run.repeats[i].timings.iter().copied())
        .collect();
    let r_comp_comm = ratio_comp_comm(&all_kept)?;

    let mut stragglers = Vec::new();
    if run.n_workers >= 2 {
        for (repeat, record) in run.repeats.iter().enumerate() {
            for v in detect_stragglers(&record.timings, policy)? {
                if v.flagged {
                    stragglers.push(StragglerFlag {
                        repeat,
                        rank: v.rank,
                        t_n: v.t_n,
                        threshold: v.threshold,
                    });
                }
            }
        }
    }

    let speedup = t_serial / agg.t_total_mean;
    Ok(ScalingPoint {
        n_workers: run.n_workers,
        t_total_mean: agg.t_total_mean,
        t_total_std: agg.t_total_std,
        speedup,
        efficiency: speedup / run.n_workers as f64,
        t_total_repeats: agg.t_totals,
        component_means,
        component_stds,
        r_comp_comm,
        stragglers,
        excluded_repeats: agg.excluded,
        rank_timings: run.repeats[agg.kept[0]].timings.clone(),
    })
}

/// Builds the report for a serial baseline and the parallel runs measured
/// against it. With no parallel runs the serial run is the only point.
pub fn emit_report(serial: &BenchRun, runs: &[BenchRun], options: &ReportOptions) -> Result<BenchReport> {
    if serial.n_workers != 1 {
        return Err(Error::invalid(format!(
            "serial baseline must use 1 worker, got {}",
            serial.n_workers
        )));
    }
    let serial_agg = aggregate(serial)?;
    let t_serial = serial_agg.t_total_mean;
    if !(t_serial > 0.0) {
        return Err(Error::invalid(format!("serial time must be positive, got {t_serial}")));
    }
    let kept_serial: Vec<&RankTiming> = serial_agg
        .kept
        .iter()
        .map(|&i| &serial.repeats[i].timings[0])
        .collect();
    let t_comp = mean(kept_serial.iter().map(|t| t.t_comp));
    let t_io = mean(kept_serial.iter().map(|t| t.t_io));
    let r_comp_io = ratio_comp_io(t_comp, t_io)?;

    let strategy = runs.first().map_or(serial.strategy, |r| r.strategy);
    let workload_factor = runs.first().map_or(serial.workload_factor, |r| r.workload_factor);
    for run in runs {
        if run.strategy != strategy || run.workload_factor != workload_factor {
            return Err(Error::invalid("all runs in a report must share strategy and workload"));
        }
    }
    let repeats = runs.iter().map(|r| r.repeats.len()).max().unwrap_or(serial.repeats.len());

    let points = if runs.is_empty() {
        vec![scaling_point(serial, serial_agg, t_serial, options.policy)?]
    } else {
        runs.iter()
            .map(|run| scaling_point(run, aggregate(run)?, t_serial, options.policy))
            .collect::<Result<Vec<_>>>()?
    };

    Ok(BenchReport {
        machine: options.machine.clone(),
        strategy,
        workload_factor,
        repeats,
        serial: SerialSummary {
            t_total: t_serial,
            t_comp,
            t_io,
            r_comp_io,
        },
        points,
        advice: advise_strategy(r_comp_io.value().unwrap_or(f64::NAN)),
    })
}

#[derive(Serialize)]
struct CsvRow {
    strategy: Strategy,
    n_workers: usize,
    workload_factor: usize,
    repeat: usize,
    rank: usize,
    t_opening_trajectory: f64,
    t_io: f64,
    t_comp: f64,
    t_end_loop: f64,
    t_all_frame: f64,
    t_rmsd: f64,
    t_comm: f64,
    t_overhead1: f64,
    t_overhead2: f64,
    t_n: f64,
    n_frames_processed: usize,
}

/// One CSV row per (run, repeat, rank) with every timing field.
pub fn write_csv(runs: &[BenchRun], writer: impl Write) -> Result<usize> {
    let mut w = csv::Writer::from_writer(writer);
    let mut rows = 0;
    for run in runs {
        for (repeat, record) in run.repeats.iter().enumerate() {
            for t in &record.timings {
                w.serialize(CsvRow {
                    strategy: run.strategy,
                    n_workers: run.n_workers,
                    workload_factor: run.workload_factor,
                    repeat,
                    rank: t.rank,
                    t_opening_trajectory: t.t_opening_trajectory,
                    t_io: t.t_io,
                    t_comp: t.t_comp,
                    t_end_loop: t.t_end_loop,
                    t_all_frame: t.t_all_frame,
                    t_rmsd: t.t_rmsd,
                    t_comm: t.t_comm,
                    t_overhead1: t.t_overhead1,
                    t_overhead2: t.t_overhead2,
                    t_n: t.t_n,
                    n_frames_processed: t.n_frames_processed,
                })?;
                rows += 1;
            }
        }
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(rows)
}
