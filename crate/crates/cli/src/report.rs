//! Output documents of the `detect` and `locate` subcommands.

use std::io::Write;
use std::path::PathBuf;

use nsp_core::noise_scale::ScaleEstimate;
use nsp_core::pipeline::{DetectOutput, DetectSettings};
use nsp_core::selection::{cusum_locate, prominence_of, GapPValue, ProminenceReport};
use nsp_core::thresholds::ThresholdSpec;
use nsp_core::{Interval, NspConfig, NspError};
use serde::{Deserialize, Serialize};

/// Everything needed to repeat a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub input: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<PathBuf>,
    pub settings: DetectSettings,
    pub config: NspConfig,
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub start: usize,
    pub end: usize,
    pub deviation: f64,
    pub threshold: f64,
    pub prominence_rank: usize,
    /// Detection order.
    pub order: usize,
    /// Search interval the detection came from.
    pub parent: Interval,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectReport {
    pub intervals: Vec<IntervalRecord>,
    pub threshold: ThresholdSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<ScaleEstimate>,
    pub prominence: ProminenceReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaps: Option<Vec<GapPValue>>,
    pub total_length: usize,
    pub manifest: RunManifest,
}

impl DetectReport {
    pub fn new(out: DetectOutput, located: &[Option<usize>], manifest: RunManifest) -> Self {
        let rank_of = |order: usize| {
            out.prominence
                .entries
                .iter()
                .find(|e| e.order == order)
                .map_or(0, |e| e.rank)
        };
        let intervals = out
            .significance
            .detections
            .iter()
            .zip(located)
            .map(|(d, loc)| IntervalRecord {
                start: d.interval.start,
                end: d.interval.end,
                deviation: d.deviation,
                threshold: out.threshold.lambda,
                prominence_rank: rank_of(d.order),
                order: d.order,
                parent: d.parent,
                location: *loc,
            })
            .collect();
        Self {
            intervals,
            threshold: out.threshold,
            scale: out.scale,
            prominence: out.prominence,
            gaps: out.gaps,
            total_length: out.total_length,
            manifest,
        }
    }

    /// Columns `kind,start,end,rank,value`: one `interval` row per detection
    /// (value = deviation) and one `location` row per located change-point.
    pub fn write_plot_csv(&self, w: impl Write) -> Result<(), NspError> {
        let io = |e: csv::Error| NspError::Io(std::io::Error::other(e));
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["kind", "start", "end", "rank", "value"])
            .map_err(io)?;
        for r in &self.intervals {
            out.write_record([
                "interval".to_string(),
                r.start.to_string(),
                r.end.to_string(),
                r.prominence_rank.to_string(),
                r.deviation.to_string(),
            ])
            .map_err(io)?;
        }
        for r in &self.intervals {
            if let Some(l) = r.location {
                out.write_record([
                    "location".to_string(),
                    l.to_string(),
                    l.to_string(),
                    r.prominence_rank.to_string(),
                    String::new(),
                ])
                .map_err(io)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocatedInterval {
    pub start: usize,
    pub end: usize,
    pub prominence_rank: usize,
    pub location: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocateReport {
    pub prominence: ProminenceReport,
    pub locations: Vec<LocatedInterval>,
}

impl LocateReport {
    pub fn new(results: &DetectReport, y: &[f64]) -> Result<Self, NspError> {
        let prominence = prominence_of(
            results
                .intervals
                .iter()
                .map(|r| (Interval::new(r.start, r.end), r.order)),
        );
        let locations = prominence
            .entries
            .iter()
            .map(|e| {
                Ok(LocatedInterval {
                    start: e.interval.start,
                    end: e.interval.end,
                    prominence_rank: e.rank,
                    location: cusum_locate(y, e.interval)?,
                })
            })
            .collect::<Result<_, NspError>>()?;
        Ok(Self {
            prominence,
            locations,
        })
    }
}
