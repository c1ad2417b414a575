//! File formats and activation binarisation.
//!
//! CSV layouts:
//!
//! - events: header `time`, one timestamp (seconds) per row, ascending;
//! - drivers: header `driver_id,time`, ascending within each id;
//! - activations: header `time,value`, strictly increasing times, values ≥ 0.
//!
//! Parameters and fit reports are JSON documents with the fields `mu`,
//! `support: {a, b}` and `drivers: [{id, alpha, m, sigma}]`; a fit report adds
//! `nll_history`, `termination`, `iterations_run` and `diagnostics`.
//!
//! Floats are written in their shortest round-trip decimal form, so reading a
//! file back reproduces the written values bit for bit.
//!
//! Activation times are taken as given. Any shift that aligns activations with
//! the peak of an atom waveform has to happen upstream.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::em::{FitDiagnostics, FitReport, Termination};
use crate::error::{Error, Result};
use crate::model::{Driver, DriverParams, EventSequence, KernelSupport, ModelParams};

pub(crate) fn fmt_float(x: f64) -> String {
    format!("{x:?}")
}

/// Continuous activation values of one atom, sampled at increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationStream {
    label: String,
    samples: Vec<(f64, f64)>,
}

impl ActivationStream {
    pub fn new(label: impl Into<String>, samples: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(t, v)) in samples.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::validation(format!("activation time {t} at index {i} is invalid")));
            }
            if !v.is_finite() || v < 0.0 {
                return Err(Error::validation(format!(
                    "activation value {v} at index {i} must be finite and >= 0"
                )));
            }
            if i > 0 && samples[i - 1].0 >= t {
                return Err(Error::validation(format!(
                    "activation times not strictly increasing at index {i}"
                )));
            }
        }
        Ok(Self { label: label.into(), samples })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time of the last sample.
    pub fn duration(&self) -> Option<f64> {
        self.samples.last().map(|s| s.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinarizeRule {
    /// Keep samples whose value is strictly above the threshold.
    Absolute(f64),
    /// Keep positive samples at or above the `q`-th percentile (linear
    /// interpolation) of the strictly positive values.
    Percentile(f64),
}

/// Linear-interpolation percentile of sorted values.
fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Value threshold implied by `rule` on `stream`.
pub fn threshold_value(stream: &ActivationStream, rule: BinarizeRule) -> Result<f64> {
    if stream.is_empty() {
        return Err(Error::invalid("cannot binarise an empty activation stream"));
    }
    match rule {
        BinarizeRule::Absolute(x) => {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::invalid(format!("threshold must be finite and >= 0, got {x}")));
            }
            Ok(x)
        }
        BinarizeRule::Percentile(q) => {
            if !(0.0..100.0).contains(&q) {
                return Err(Error::invalid(format!("percentile must lie in [0, 100), got {q}")));
            }
            let mut positive: Vec<f64> =
                stream.samples.iter().map(|s| s.1).filter(|&v| v > 0.0).collect();
            if positive.is_empty() {
                return Err(Error::invalid("activation stream has no strictly positive values"));
            }
            positive.sort_by(f64::total_cmp);
            Ok(percentile_sorted(&positive, q))
        }
    }
}

/// Convert an activation stream into events.
///
/// `duration` defaults to the time of the last sample.
pub fn binarize(
    stream: &ActivationStream,
    rule: BinarizeRule,
    duration: Option<f64>,
) -> Result<EventSequence> {
    let threshold = threshold_value(stream, rule)?;
    let keep = |v: f64| match rule {
        BinarizeRule::Absolute(_) => v > threshold,
        BinarizeRule::Percentile(_) => v > 0.0 && v >= threshold,
    };
    let times = stream.samples.iter().filter(|s| keep(s.1)).map(|s| s.0).collect();
    let duration = duration.or(stream.duration()).unwrap_or(0.0);
    EventSequence::new(times, duration)
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => parse_error(line, format!("{other:?}")),
    }
}

/// Column indices of `names` in the header, or a parse error naming the
/// first missing column.
fn columns<R: Read>(rdr: &mut csv::Reader<R>, names: &[&str]) -> Result<Vec<usize>> {
    let headers = rdr.headers().map_err(csv_error)?.clone();
    names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| parse_error(1, format!("missing column '{name}'")))
        })
        .collect()
}

fn field<'r>(record: &'r csv::StringRecord, idx: usize, name: &str, line: usize) -> Result<&'r str> {
    record
        .get(idx)
        .map(str::trim)
        .ok_or_else(|| parse_error(line, format!("missing value for '{name}'")))
}

fn float_field(record: &csv::StringRecord, idx: usize, name: &str, line: usize) -> Result<f64> {
    let raw = field(record, idx, name, line)?;
    let v: f64 = raw
        .parse()
        .map_err(|_| parse_error(line, format!("cannot parse {name} '{raw}' as a number")))?;
    if !v.is_finite() {
        return Err(parse_error(line, format!("{name} must be finite, got '{raw}'")));
    }
    Ok(v)
}

/// Rows of `(line, record)` of a headed CSV.
fn records<R: Read>(rdr: &mut csv::Reader<R>) -> impl Iterator<Item = Result<(usize, csv::StringRecord)>> + '_ {
    rdr.records().map(|r| {
        let record = r.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        Ok((line, record))
    })
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Parse an events CSV. `duration` defaults to the last timestamp.
pub fn parse_events<R: Read>(input: R, duration: Option<f64>) -> Result<EventSequence> {
    let mut rdr = csv_reader(input);
    let idx = columns(&mut rdr, &["time"])?[0];
    let times = records(&mut rdr)
        .map(|r| r.and_then(|(line, rec)| float_field(&rec, idx, "time", line)))
        .collect::<Result<Vec<_>>>()?;
    let duration = match (duration, times.last()) {
        (Some(d), _) => d,
        (None, Some(&last)) => last,
        (None, None) => {
            return Err(Error::invalid("empty events file needs an explicit duration"));
        }
    };
    EventSequence::new(times, duration)
}

pub fn read_events(path: impl AsRef<Path>, duration: Option<f64>) -> Result<EventSequence> {
    parse_events(open(path.as_ref())?, duration)
}

/// Parse a drivers CSV into one [`Driver`] per id, ordered by id.
pub fn parse_drivers<R: Read>(input: R) -> Result<Vec<Driver>> {
    let mut rdr = csv_reader(input);
    let idx = columns(&mut rdr, &["driver_id", "time"])?;
    let mut grouped: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in records(&mut rdr) {
        let (line, rec) = r?;
        let id = field(&rec, idx[0], "driver_id", line)?;
        if id.is_empty() {
            return Err(parse_error(line, "empty driver_id"));
        }
        let t = float_field(&rec, idx[1], "time", line)?;
        grouped.entry(id.to_string()).or_default().push(t);
    }
    grouped.into_iter().map(|(id, times)| Driver::new(id, times)).collect()
}

pub fn read_drivers(path: impl AsRef<Path>) -> Result<Vec<Driver>> {
    parse_drivers(open(path.as_ref())?)
}

pub fn parse_activations<R: Read>(input: R, label: &str) -> Result<ActivationStream> {
    let mut rdr = csv_reader(input);
    let idx = columns(&mut rdr, &["time", "value"])?;
    let samples = records(&mut rdr)
        .map(|r| {
            r.and_then(|(line, rec)| {
                Ok((float_field(&rec, idx[0], "time", line)?, float_field(&rec, idx[1], "value", line)?))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ActivationStream::new(label, samples)
}

/// Read an activations CSV; the file stem becomes the stream label.
pub fn read_activations(path: impl AsRef<Path>) -> Result<ActivationStream> {
    let path = path.as_ref();
    let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or("activations");
    parse_activations(open(path)?, label)
}

pub fn write_events_to<W: Write>(events: &EventSequence, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time"]).map_err(csv_error)?;
    for &t in events.times() {
        w.write_record([fmt_float(t)]).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_events(events: &EventSequence, path: impl AsRef<Path>) -> Result<()> {
    write_events_to(events, create(path.as_ref())?)
}

pub fn write_drivers_to<W: Write>(drivers: &[Driver], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["driver_id", "time"]).map_err(csv_error)?;
    for d in drivers {
        for &t in d.times() {
            w.write_record([d.id().to_string(), fmt_float(t)]).map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_drivers(drivers: &[Driver], path: impl AsRef<Path>) -> Result<()> {
    write_drivers_to(drivers, create(path.as_ref())?)
}

pub fn write_activations_to<W: Write>(stream: &ActivationStream, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "value"]).map_err(csv_error)?;
    for &(t, v) in stream.samples() {
        w.write_record([fmt_float(t), fmt_float(v)]).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_activations(stream: &ActivationStream, path: impl AsRef<Path>) -> Result<()> {
    write_activations_to(stream, create(path.as_ref())?)
}

#[derive(Debug, Serialize, Deserialize)]
struct SupportDoc {
    a: f64,
    b: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct DriverDoc {
    id: String,
    alpha: f64,
    m: f64,
    sigma: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamsDoc {
    mu: f64,
    support: SupportDoc,
    drivers: Vec<DriverDoc>,
}

impl ParamsDoc {
    fn from_params(p: &ModelParams) -> Self {
        Self {
            mu: p.mu,
            support: SupportDoc { a: p.support.a(), b: p.support.b() },
            drivers: p
                .per_driver
                .iter()
                .map(|(id, d)| DriverDoc { id: id.clone(), alpha: d.alpha, m: d.m, sigma: d.sigma })
                .collect(),
        }
    }

    fn into_params(self) -> Result<ModelParams> {
        let support = KernelSupport::new(self.support.a, self.support.b)?;
        let mut per_driver = BTreeMap::new();
        for d in self.drivers {
            if per_driver.insert(d.id.clone(), DriverParams::new(d.alpha, d.m, d.sigma)?).is_some() {
                return Err(Error::validation(format!("duplicate driver id '{}'", d.id)));
            }
        }
        ModelParams::new(self.mu, per_driver, support)
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct DiagnosticsDoc {
    simplex_deviation: Vec<f64>,
    monotonicity_violations: Vec<usize>,
    divergence_iteration: Option<usize>,
    dropped_driver_events: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct FitReportDoc {
    #[serde(flatten)]
    params: ParamsDoc,
    /// Non-finite entries are written as `null`.
    nll_history: Vec<Option<f64>>,
    termination: String,
    iterations_run: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    diagnostics: Option<DiagnosticsDoc>,
}

fn finish_json(mut s: String) -> String {
    s.push('\n');
    s
}

pub fn params_to_json(params: &ModelParams) -> Result<String> {
    Ok(finish_json(serde_json::to_string_pretty(&ParamsDoc::from_params(params))?))
}

/// Parse parameters from a parameters or fit-report document.
pub fn params_from_json(text: &str) -> Result<ModelParams> {
    serde_json::from_str::<ParamsDoc>(text)?.into_params()
}

pub fn write_params(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, params_to_json(params)?)?;
    Ok(())
}

pub fn read_params(path: impl AsRef<Path>) -> Result<ModelParams> {
    params_from_json(&std::fs::read_to_string(path)?)
}

pub fn fit_report_to_json(report: &FitReport) -> Result<String> {
    let d = &report.diagnostics;
    let doc = FitReportDoc {
        params: ParamsDoc::from_params(&report.params),
        nll_history: report.nll_history.iter().map(|&v| v.is_finite().then_some(v)).collect(),
        termination: report.termination.as_str().to_string(),
        iterations_run: report.iterations_run,
        diagnostics: Some(DiagnosticsDoc {
            simplex_deviation: d.simplex_deviation.clone(),
            monotonicity_violations: d.monotonicity_violations.clone(),
            divergence_iteration: d.divergence_iteration,
            dropped_driver_events: d.dropped_driver_events,
        }),
    };
    Ok(finish_json(serde_json::to_string_pretty(&doc)?))
}

/// Parse a fit report. `null` entries of the history read back as `+∞`.
pub fn fit_report_from_json(text: &str) -> Result<FitReport> {
    let doc: FitReportDoc = serde_json::from_str(text)?;
    let termination: Termination = doc.termination.parse()?;
    let d = doc.diagnostics.unwrap_or_default();
    Ok(FitReport {
        params: doc.params.into_params()?,
        nll_history: doc.nll_history.into_iter().map(|v| v.unwrap_or(f64::INFINITY)).collect(),
        termination,
        iterations_run: doc.iterations_run,
        diagnostics: FitDiagnostics {
            simplex_deviation: d.simplex_deviation,
            monotonicity_violations: d.monotonicity_violations,
            divergence_iteration: d.divergence_iteration,
            dropped_driver_events: d.dropped_driver_events,
        },
    })
}

pub fn write_fit_report(report: &FitReport, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, fit_report_to_json(report)?)?;
    Ok(())
}

pub fn read_fit_report(path: impl AsRef<Path>) -> Result<FitReport> {
    fit_report_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(values: &[f64]) -> ActivationStream {
        let samples = values.iter().enumerate().map(|(i, &v)| ((i + 1) as f64, v)).collect();
        ActivationStream::new("atom", samples).unwrap()
    }

    #[test]
    fn zero_values_with_zero_threshold_give_no_events() {
        let ev = binarize(&stream(&[0.0, 0.0, 0.0]), BinarizeRule::Absolute(0.0), None).unwrap();
        assert!(ev.is_empty());
        assert_eq!(ev.duration(), 3.0);
    }

    #[test]
    fn percentile_sixty_of_one_to_five() {
        // Linear interpolation: rank 0.6 * 4 = 2.4 -> 3 + 0.4 * (4 - 3) = 3.4.
        let s = stream(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!((threshold_value(&s, BinarizeRule::Percentile(60.0)).unwrap() - 3.4).abs() < 1e-15);
        let ev = binarize(&s, BinarizeRule::Percentile(60.0), None).unwrap();
        assert_eq!(ev.times(), &[4.0, 5.0]);
    }

    #[test]
    fn percentile_zero_keeps_positive_samples() {
        let s = stream(&[0.0, 2.0, 0.0, 1e-12, 7.0]);
        let ev = binarize(&s, BinarizeRule::Percentile(0.0), None).unwrap();
        assert_eq!(ev.times(), &[2.0, 4.0, 5.0]);
    }

    #[test]
    fn absolute_threshold_is_strict() {
        let s = stream(&[6e-11, 7e-11, 5e-11]);
        let ev = binarize(&s, BinarizeRule::Absolute(6e-11), None).unwrap();
        assert_eq!(ev.times(), &[2.0]);
    }

    #[test]
    fn binarize_errors() {
        let empty = ActivationStream::new("x", vec![]).unwrap();
        assert!(matches!(
            binarize(&empty, BinarizeRule::Absolute(0.0), Some(1.0)),
            Err(Error::InvalidArgument(_))
        ));
        let zeros = stream(&[0.0, 0.0]);
        assert!(matches!(
            binarize(&zeros, BinarizeRule::Percentile(10.0), None),
            Err(Error::InvalidArgument(_))
        ));
        assert!(binarize(&stream(&[1.0]), BinarizeRule::Percentile(100.0), None).is_err());
        assert!(binarize(&stream(&[1.0]), BinarizeRule::Absolute(-1.0), None).is_err());
    }

    #[test]
    fn events_round_trip_is_exact() {
        let ev = EventSequence::new(vec![0.1, 1.0 / 3.0, 2.0_f64.sqrt(), 1e-300, 5.0], 7.5).err();
        assert!(ev.is_some(), "unsorted input must be rejected");
        let ev = EventSequence::new(vec![1e-300, 0.1, 1.0 / 3.0, 2.0_f64.sqrt(), 5.0], 7.5).unwrap();
        let mut buf = Vec::new();
        write_events_to(&ev, &mut buf).unwrap();
        let back = parse_events(buf.as_slice(), Some(7.5)).unwrap();
        assert_eq!(back, ev);
    }

    #[test]
    fn drivers_are_grouped_and_ordered_by_id() {
        let text = "driver_id,time\nz,0.5\na,0.1\nz,0.9\na,0.2\n";
        let drivers = parse_drivers(text.as_bytes()).unwrap();
        let ids: Vec<&str> = drivers.iter().map(Driver::id).collect();
        assert_eq!(ids, ["a", "z"]);
        assert_eq!(drivers[1].times(), &[0.5, 0.9]);
    }

    #[test]
    fn missing_column_is_named() {
        let err = parse_drivers("id,time\na,0.1\n".as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 1);
                assert!(message.contains("driver_id"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = parse_events("time\n0.1\nabc\n0.3\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = parse_events("time\n0.1\nNaN\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = parse_activations("time,value\n0.1,inf\n".as_bytes(), "x").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn unsorted_input_is_a_validation_error() {
        let err = parse_events("time\n0.3\n0.1\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err:?}");
        let err = parse_drivers("driver_id,time\na,0.3\na,0.1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err:?}");
    }

    #[test]
    fn params_json_round_trip() {
        let p = ModelParams::baseline(0.8, KernelSupport::new(0.03, 0.8).unwrap())
            .unwrap()
            .with_driver("wide", DriverParams::new(0.8, 0.4, 0.2).unwrap())
            .with_driver("sharp", DriverParams::new(0.1 + 0.2, 1.0 / 3.0, 0.05).unwrap());
        let text = params_to_json(&p).unwrap();
        assert_eq!(params_from_json(&text).unwrap(), p);
    }

    #[test]
    fn fit_report_json_round_trip() {
        let params = ModelParams::baseline(0.8, KernelSupport::new(0.0, 1.0).unwrap())
            .unwrap()
            .with_driver("d", DriverParams::new(0.0, 0.5, 0.25).unwrap());
        let report = FitReport {
            params,
            nll_history: vec![12.5, 1.0 / 7.0, f64::INFINITY],
            termination: Termination::DivergedFallback,
            iterations_run: 2,
            diagnostics: FitDiagnostics {
                simplex_deviation: vec![1e-17],
                monotonicity_violations: vec![],
                divergence_iteration: Some(1),
                dropped_driver_events: 3,
            },
        };
        let text = fit_report_to_json(&report).unwrap();
        assert!(text.contains("\"diverged_fallback\""));
        assert!(text.contains("null"));
        assert_eq!(fit_report_from_json(&text).unwrap(), report);
        // A fit report also parses as plain parameters.
        assert_eq!(params_from_json(&text).unwrap(), report.params);
    }
}
