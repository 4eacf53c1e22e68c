//! Event lists to interarrival samples and per-source features.
//!
//! Input is a CSV of photon arrivals (`time_s,energy_kev`) plus an optional
//! CSV of observation gaps (`gap_start_s,gap_end_s`). Interarrival times are
//! only taken between consecutive events of the same observation window;
//! differences that straddle a gap are discarded rather than stitched.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classify::SourceClass;
use crate::error::{Error, Result};
use crate::metrics::{self, DEFAULT_GRID_POINTS};
use crate::rng::stream_rng;
use crate::sample::PitSample;
use crate::stats;

pub const DEFAULT_ENERGY_LO: f64 = 0.5;
pub const DEFAULT_ENERGY_HI: f64 = 8.0;
pub const DEFAULT_MIN_PIT: usize = 100;

/// How far an arrival may run backwards before the file is rejected.
/// Smaller reversals are treated as timestamp ties.
pub const TIME_TOLERANCE: f64 = 1e-9;

/// An observation window `[start, end)`. The last window of a series is
/// closed on the right so that the final arrival belongs to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodInterval {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSeries {
    pub source_id: String,
    /// Non-decreasing; equal neighbours are timestamp ties.
    pub arrivals: Vec<f64>,
    pub energies: Vec<f64>,
    pub good_intervals: Vec<GoodInterval>,
}

impl EventSeries {
    /// Builds a series from raw events and gaps: sorts the events, merges the
    /// gaps, derives the good intervals as the complement of the gaps within
    /// `[first, last]` and drops events that fall inside a gap.
    pub fn from_events(
        source_id: impl Into<String>,
        mut events: Vec<(f64, f64)>,
        gaps: &[(f64, f64)],
    ) -> Result<Self> {
        let source_id = source_id.into();
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        if events.is_empty() {
            return Ok(Self {
                source_id,
                arrivals: Vec::new(),
                energies: Vec::new(),
                good_intervals: Vec::new(),
            });
        }
        let first = events[0].0;
        let last = events[events.len() - 1].0;
        let good_intervals = complement(first, last, &merge_gaps(gaps)?);
        let mut arrivals = Vec::with_capacity(events.len());
        let mut energies = Vec::with_capacity(events.len());
        for (t, e) in events {
            if locate(&good_intervals, t).is_some() {
                arrivals.push(t);
                energies.push(e);
            }
        }
        Ok(Self {
            source_id,
            arrivals,
            energies,
            good_intervals,
        })
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    /// Index of the good interval containing `t`.
    pub fn interval_of(&self, t: f64) -> Option<usize> {
        locate(&self.good_intervals, t)
    }
}

fn locate(intervals: &[GoodInterval], t: f64) -> Option<usize> {
    let i = intervals.partition_point(|iv| iv.end <= t);
    if i < intervals.len() && intervals[i].start <= t {
        return Some(i);
    }
    // the last window is closed
    match intervals.last() {
        Some(iv) if t == iv.end && iv.start <= t => Some(intervals.len() - 1),
        _ => None,
    }
}

fn merge_gaps(gaps: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    let mut sorted = gaps.to_vec();
    if let Some(&(a, b)) = sorted.iter().find(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
        return Err(Error::InvalidParameter(format!("gap [{a}, {b}) is empty or not finite")));
    }
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for (a, b) in sorted {
        match merged.last_mut() {
            Some(prev) if a <= prev.1 => prev.1 = prev.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    Ok(merged)
}

fn complement(first: f64, last: f64, gaps: &[(f64, f64)]) -> Vec<GoodInterval> {
    let mut out = Vec::new();
    let mut cursor = first;
    for &(a, b) in gaps {
        if b <= cursor {
            continue;
        }
        if a > last {
            break;
        }
        if a > cursor {
            out.push(GoodInterval { start: cursor, end: a });
        }
        cursor = b;
    }
    if cursor <= last {
        out.push(GoodInterval { start: cursor, end: last });
    }
    out
}

#[derive(Debug, Deserialize)]
struct EventRow {
    time_s: String,
    energy_kev: String,
}

#[derive(Debug, Deserialize)]
struct GapRow {
    gap_start_s: String,
    gap_end_s: String,
}

fn parse_number(field: &str, name: &str, line: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("{name} {field:?} is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("{name} is not finite"),
        });
    }
    Ok(v)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn line_of(record: &csv::StringRecord) -> usize {
    record.position().map(|p| p.line() as usize).unwrap_or(0)
}

fn read_rows<R: Read, T: serde::de::DeserializeOwned>(input: R) -> Result<Vec<(usize, T)>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = line_of(&record);
        let row: T = record.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        rows.push((line, row));
    }
    Ok(rows)
}

/// Parses an event CSV and optional gaps CSV from readers.
///
/// Arrivals must be non-decreasing up to [`TIME_TOLERANCE`]; energies must be
/// positive.
pub fn parse_events_from<R: Read, G: Read>(
    source_id: impl Into<String>,
    events: R,
    gaps: Option<G>,
) -> Result<EventSeries> {
    let mut parsed = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for (line, row) in read_rows::<_, EventRow>(events)? {
        let mut t = parse_number(&row.time_s, "time_s", line)?;
        let e = parse_number(&row.energy_kev, "energy_kev", line)?;
        if e <= 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("energy {e} keV is not positive"),
            });
        }
        if t < prev {
            if prev - t > TIME_TOLERANCE {
                return Err(Error::Parse {
                    line,
                    message: format!("arrival {t} precedes the previous arrival {prev}"),
                });
            }
            t = prev;
        }
        prev = t;
        parsed.push((t, e));
    }
    let gap_list = match gaps {
        Some(g) => read_rows::<_, GapRow>(g)?
            .into_iter()
            .map(|(line, row)| {
                let a = parse_number(&row.gap_start_s, "gap_start_s", line)?;
                let b = parse_number(&row.gap_end_s, "gap_end_s", line)?;
                if a >= b {
                    return Err(Error::Parse {
                        line,
                        message: format!("gap [{a}, {b}) is empty"),
                    });
                }
                Ok((a, b))
            })
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    EventSeries::from_events(source_id, parsed, &gap_list)
}

/// Parses event and gap files; the source id is the event file stem.
pub fn parse_events(path: &Path, gaps: Option<&Path>) -> Result<EventSeries> {
    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let events = std::fs::File::open(path)?;
    let gaps = gaps.map(std::fs::File::open).transpose()?;
    parse_events_from(source_id, events, gaps)
}

/// Keeps events with `lo <= energy <= hi`.
pub fn filter_energy(series: &EventSeries, lo: f64, hi: f64) -> Result<EventSeries> {
    if !(lo < hi) {
        return Err(Error::InvalidParameter(format!("energy band [{lo}, {hi}] is empty")));
    }
    let (arrivals, energies) = series
        .arrivals
        .iter()
        .zip(&series.energies)
        .filter(|(_, &e)| lo <= e && e <= hi)
        .map(|(&t, &e)| (t, e))
        .unzip();
    Ok(EventSeries {
        source_id: series.source_id.clone(),
        arrivals,
        energies,
        good_intervals: series.good_intervals.clone(),
    })
}

/// Differences of consecutive arrivals inside the same good interval, with
/// zero differences (ties) removed.
pub fn pit_values(series: &EventSeries) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len().saturating_sub(1));
    let mut prev: Option<(f64, usize)> = None;
    for &t in &series.arrivals {
        let Some(iv) = series.interval_of(t) else {
            prev = None;
            continue;
        };
        if let Some((p, piv)) = prev {
            let d = t - p;
            if piv == iv && d > 0.0 {
                out.push(d);
            }
        }
        prev = Some((t, iv));
    }
    out
}

pub fn extract_pits(series: &EventSeries) -> Result<PitSample> {
    PitSample::new(pit_values(series))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceFeatures {
    pub source_id: String,
    pub n_pit: usize,
    pub med_energy_kev: f64,
    pub dist_kolmogorov: f64,
    pub dist_norm_wasserstein: f64,
    pub dist_norm_zolotarev2: f64,
    pub class_label: Option<SourceClass>,
}

/// Features of one (already energy-filtered) source, or `None` when it has
/// fewer than `min_pit` interarrival times.
pub fn build_features(
    series: &EventSeries,
    min_pit: usize,
    grid_points: usize,
) -> Result<Option<SourceFeatures>> {
    let pits = pit_values(series);
    if pits.is_empty() || pits.len() < min_pit {
        return Ok(None);
    }
    let sample = PitSample::new(pits)?;
    let d = metrics::all_distances(&sample, grid_points)?;
    Ok(Some(SourceFeatures {
        source_id: series.source_id.clone(),
        n_pit: sample.len(),
        med_energy_kev: stats::median(&series.energies),
        dist_kolmogorov: d.kappa,
        dist_norm_wasserstein: d.nw,
        dist_norm_zolotarev2: d.nz2,
        class_label: None,
    }))
}

/// [`build_features`] with the default PIT threshold and grid.
pub fn build_features_default(series: &EventSeries) -> Result<Option<SourceFeatures>> {
    build_features(series, DEFAULT_MIN_PIT, DEFAULT_GRID_POINTS)
}

#[derive(Debug, Serialize, Deserialize)]
struct FeatureRow {
    source_id: String,
    n_pit: usize,
    med_energy_kev: f64,
    kappa: f64,
    nw: f64,
    nz2: f64,
    label: Option<String>,
}

pub fn write_features_csv<W: Write>(features: &[SourceFeatures], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for f in features {
        writer
            .serialize(FeatureRow {
                source_id: f.source_id.clone(),
                n_pit: f.n_pit,
                med_energy_kev: f.med_energy_kev,
                kappa: f.dist_kolmogorov,
                nw: f.dist_norm_wasserstein,
                nz2: f.dist_norm_zolotarev2,
                label: f.class_label.map(|c| c.to_string()),
            })
            .map_err(csv_error)?;
    }
    if features.is_empty() {
        writer
            .write_record(["source_id", "n_pit", "med_energy_kev", "kappa", "nw", "nz2", "label"])
            .map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a features table. Lines starting with `#` are metadata and skipped.
pub fn read_features_csv<R: Read>(input: R) -> Result<Vec<SourceFeatures>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for row in reader.deserialize::<FeatureRow>() {
        let row = row.map_err(csv_error)?;
        let class_label = match row.label.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(s) => Some(s.parse()?),
        };
        out.push(SourceFeatures {
            source_id: row.source_id,
            n_pit: row.n_pit,
            med_energy_kev: row.med_energy_kev,
            dist_kolmogorov: row.kappa,
            dist_norm_wasserstein: row.nw,
            dist_norm_zolotarev2: row.nz2,
            class_label,
        });
    }
    Ok(out)
}

/// A homogeneous Poisson source with `n_events` arrivals at rate `rate`,
/// energies uniform on the default band, chopped by `gaps`.
pub fn simulate_poisson_series(
    source_id: impl Into<String>,
    rate: f64,
    n_events: usize,
    gaps: &[(f64, f64)],
    seed: u64,
) -> Result<EventSeries> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidParameter(format!("rate must be positive, got {rate}")));
    }
    let mut rng = stream_rng(seed, 0);
    let mut t = 0.0;
    let events = (0..n_events)
        .map(|_| {
            let u: f64 = rng.random();
            t += -(1.0 - u).ln() / rate;
            (t, rng.random_range(DEFAULT_ENERGY_LO..DEFAULT_ENERGY_HI))
        })
        .collect();
    EventSeries::from_events(source_id, events, gaps)
}
