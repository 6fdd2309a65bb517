//! CSV file formats.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back reproduces the values bit for bit.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::analysis::{SurfaceGrid, SweepOutcome};
use crate::econ::CostLine;
use crate::metrics::RocCurve;
use crate::simfleet::{attribute_names, DeviceProfile, EventLog, Record, RecordKind, N_CATEGORICAL};
use crate::tuner::{IsoLine, TraceEntry};
use crate::windowing::{DatasetRow, FeatureSchema, WindowedDataset};
use crate::{Error, Result};

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

fn parse<T: std::str::FromStr>(field: &str, what: &str, line: u64) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::Format(format!("line {line}: bad {what} {field:?}")))
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn expect_header(rdr: &mut csv::Reader<impl Read>, expected: &[String]) -> Result<()> {
    let header = rdr.headers()?;
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Format(format!(
            "unexpected header {:?}, want {:?}",
            header.iter().collect::<Vec<_>>(),
            expected
        )));
    }
    Ok(())
}

pub fn fleet_header() -> Vec<String> {
    let mut h = vec!["device_id".to_string()];
    h.extend((1..=N_CATEGORICAL).map(|i| format!("attr_{i}")));
    h.push("base_hazard".into());
    h
}

pub fn write_fleet<W: Write>(w: W, profiles: &[DeviceProfile]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(fleet_header())?;
    for p in profiles {
        let mut rec = vec![p.device_id.to_string()];
        rec.extend(p.categorical_attrs.iter().map(|(_, c)| c.to_string()));
        rec.push(p.base_hazard.to_string());
        wtr.write_record(rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_fleet<R: Read>(r: R) -> Result<Vec<DeviceProfile>> {
    let mut rdr = csv::Reader::from_reader(r);
    expect_header(&mut rdr, &fleet_header())?;
    let names = attribute_names();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let device_id = parse(&rec[0], "device_id", line)?;
        let categorical_attrs = names
            .iter()
            .enumerate()
            .map(|(i, n)| Ok((n.clone(), parse(&rec[i + 1], "attribute", line)?)))
            .collect::<Result<Vec<_>>>()?;
        let base_hazard = parse(&rec[N_CATEGORICAL + 1], "base_hazard", line)?;
        out.push(DeviceProfile {
            device_id,
            categorical_attrs,
            base_hazard,
        });
    }
    Ok(out)
}

pub const EVENTS_HEADER: [&str; 4] = ["device_id", "timestamp_h", "kind", "value"];

pub fn write_events<W: Write>(w: W, logs: &[EventLog]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(EVENTS_HEADER)?;
    for log in logs {
        let id = log.device_id.to_string();
        for r in &log.records {
            let value = r.value.map(|v| v.to_string()).unwrap_or_default();
            wtr.write_record([id.as_str(), &r.timestamp_h.to_string(), r.kind.as_str(), &value])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Reads `events.csv` into per-device logs ordered by device id. Records of
/// each device must already be in time order.
pub fn read_events<R: Read>(r: R) -> Result<Vec<EventLog>> {
    let mut rdr = csv::Reader::from_reader(r);
    let expected: Vec<String> = EVENTS_HEADER.iter().map(|s| s.to_string()).collect();
    expect_header(&mut rdr, &expected)?;
    let mut logs: BTreeMap<u32, Vec<Record>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let device_id: u32 = parse(&rec[0], "device_id", line)?;
        let timestamp_h: u64 = parse(&rec[1], "timestamp_h", line)?;
        let kind: RecordKind = rec[2].parse()?;
        let value = match (kind, &rec[3]) {
            (RecordKind::Sensor, v) => Some(parse(v, "value", line)?),
            (_, "") => None,
            (_, v) => {
                return Err(Error::Format(format!(
                    "line {line}: {} record carries value {v:?}",
                    kind.as_str()
                )))
            }
        };
        let records = logs.entry(device_id).or_default();
        if records.last().is_some_and(|r| r.timestamp_h > timestamp_h) {
            return Err(Error::Format(format!(
                "line {line}: timestamps of device {device_id} are not sorted"
            )));
        }
        records.push(Record {
            timestamp_h,
            kind,
            value,
        });
    }
    Ok(logs
        .into_iter()
        .map(|(device_id, records)| EventLog { device_id, records })
        .collect())
}

pub fn dataset_header(schema: &FeatureSchema) -> Vec<String> {
    let mut h = vec!["device_id".to_string()];
    h.extend(schema.features.iter().map(|f| f.name.clone()));
    h.push("label".into());
    h.push("window_start_h".into());
    h
}

pub fn write_dataset<W: Write>(w: W, ds: &WindowedDataset) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(dataset_header(&ds.schema))?;
    for row in &ds.rows {
        let mut rec = Vec::with_capacity(row.features.len() + 3);
        rec.push(row.device_id.to_string());
        rec.extend(row.features.iter().map(|v| v.to_string()));
        rec.push(row.label.to_string());
        rec.push(row.window_start.to_string());
        wtr.write_record(rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(r: R) -> Result<WindowedDataset> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    let width = header.len();
    if width < 4
        || &header[0] != "device_id"
        || &header[width - 2] != "label"
        || &header[width - 1] != "window_start_h"
    {
        return Err(Error::Format(
            "dataset header must be device_id,<features>,label,window_start_h".into(),
        ));
    }
    let names: Vec<&str> = header.iter().skip(1).take(width - 3).collect();
    let schema = FeatureSchema::from_names(&names);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let features = (1..width - 2)
            .map(|i| parse(&rec[i], &header[i], line))
            .collect::<Result<Vec<f64>>>()?;
        let label: u8 = parse(&rec[width - 2], "label", line)?;
        if label > 1 {
            return Err(Error::Format(format!("line {line}: label must be 0 or 1")));
        }
        rows.push(DatasetRow {
            device_id: parse(&rec[0], "device_id", line)?,
            window_start: parse(&rec[width - 1], "window_start_h", line)?,
            features,
            label,
        });
    }
    Ok(WindowedDataset { schema, rows })
}

pub fn write_roc<W: Write>(w: W, curve: &RocCurve) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["cutoff", "fpr", "tpr", "tp", "fp", "tn", "fn"])?;
    for p in &curve.points {
        let c = p.counts;
        wtr.write_record([
            p.cutoff.to_string(),
            p.fpr.to_string(),
            p.tpr.to_string(),
            c.tp.to_string(),
            c.fp.to_string(),
            c.tn.to_string(),
            c.fn_.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_trace<W: Write>(w: W, trace: &[TraceEntry]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["ntree", "mtry", "samp", "cutoff", "tp", "fp", "tn", "fn", "f1", "s"])?;
    for e in trace {
        let c = e.counts;
        wtr.write_record([
            e.ntree.to_string(),
            e.mtry.to_string(),
            e.samp.to_string(),
            e.cutoff.to_string(),
            c.tp.to_string(),
            c.fp.to_string(),
            c.tn.to_string(),
            c.fn_.to_string(),
            e.f1.to_string(),
            e.savings.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Sampled points of each iso-savings line, labelled by `name`.
pub fn write_bounds<W: Write>(w: W, lines: &[(&str, IsoLine)], samples: usize) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["line", "savings", "fpr", "tpr"])?;
    for (name, line) in lines {
        for (fpr, tpr) in line.points(samples) {
            wtr.write_record([
                name.to_string(),
                line.savings.to_string(),
                fpr.to_string(),
                tpr.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_surface<W: Write>(w: W, grid: &SurfaceGrid) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["tp", "fp", "f1", "s", "s_normalized"])?;
    for c in &grid.cells {
        wtr.write_record([
            c.tp.to_string(),
            c.fp.to_string(),
            c.f1.to_string(),
            c.s.to_string(),
            c.s_normalized.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(w: W, outcomes: &[SweepOutcome]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record([
        "gap_days",
        "pred_days",
        "reactive",
        "pdm_f1",
        "pdm_s",
        "f1_pct",
        "s_pct",
        "delta_pct",
        "error",
    ])?;
    for o in outcomes {
        let mut rec = vec![o.gap_days.to_string(), o.pred_days.to_string()];
        match &o.row {
            Ok(r) => {
                rec.extend(
                    [r.reactive, r.pdm_f1, r.pdm_s, r.f1_pct, r.s_pct, r.delta_pct]
                        .iter()
                        .map(|v| v.to_string()),
                );
                rec.push(String::new());
            }
            Err(e) => {
                rec.extend(std::iter::repeat_n(String::new(), 6));
                rec.push(e.clone());
            }
        }
        wtr.write_record(rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_costs<W: Write>(w: W, lines: &[CostLine]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["component", "current", "future", "delta"])?;
    for l in lines {
        wtr.write_record([
            l.component.clone(),
            l.current.to_string(),
            l.future.to_string(),
            l.delta.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
