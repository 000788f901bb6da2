//! CSV readers and writers for the repo-wide data formats.
//!
//! All floating-point values are printed with 15 significant digits so that
//! repeated runs produce byte-identical files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::reconstruction::FluxResponse;
use crate::reconstruction::PhaseSeries;
use crate::signal::Signal;
use crate::transmon::{CryoscopeTrace, SpectroscopyMap};

/// Fixed 15-significant-digit rendering used for every CSV float.
pub fn format_float(value: f64) -> String {
    format!("{value:.14e}")
}

fn parse_field(field: &str, line: usize, name: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| {
        Error::Parse(format!("line {line}: cannot parse {name} from '{field}'"))
    })
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = std::io::Result<String>>> {
    Ok(BufReader::new(File::open(path)?).lines())
}

// ---------------------------------------------------------------------------
// Signal: index,time_s,value
// ---------------------------------------------------------------------------

pub fn write_signal_csv(path: &Path, signal: &Signal) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "index,time_s,value")?;
    for (i, v) in signal.samples().iter().enumerate() {
        writeln!(
            w,
            "{i},{},{}",
            format_float(signal.time_at(i)),
            format_float(*v)
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Read a signal CSV; the sample rate is recovered from the time column.
pub fn read_signal_csv(path: &Path) -> Result<Signal> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in open_lines(path)?.enumerate() {
        let line = line?;
        if lineno == 0 {
            continue; // header
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!(
                "line {}: expected 3 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        times.push(parse_field(fields[1], lineno + 1, "time_s")?);
        values.push(parse_field(fields[2], lineno + 1, "value")?);
    }
    if values.len() < 2 {
        return Err(Error::Parse(
            "signal CSV needs at least two rows to recover the sample rate".into(),
        ));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::Parse("time column must be increasing".into()));
    }
    Signal::new(values, 1.0 / dt)
}

// ---------------------------------------------------------------------------
// CryoscopeTrace: tau_s,p_x,p_y
// ---------------------------------------------------------------------------

pub fn write_trace_csv(path: &Path, trace: &CryoscopeTrace) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "tau_s,p_x,p_y")?;
    for i in 0..trace.len() {
        writeln!(
            w,
            "{},{},{}",
            format_float(trace.durations_s()[i]),
            format_float(trace.p_x()[i]),
            format_float(trace.p_y()[i])
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<CryoscopeTrace> {
    let mut durations = Vec::new();
    let mut p_x = Vec::new();
    let mut p_y = Vec::new();
    for (lineno, line) in open_lines(path)?.enumerate() {
        let line = line?;
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!(
                "line {}: expected tau_s,p_x,p_y",
                lineno + 1
            )));
        }
        durations.push(parse_field(fields[0], lineno + 1, "tau_s")?);
        p_x.push(parse_field(fields[1], lineno + 1, "p_x")?);
        p_y.push(parse_field(fields[2], lineno + 1, "p_y")?);
    }
    CryoscopeTrace::new(durations, p_x, p_y)
}

// ---------------------------------------------------------------------------
// PhaseSeries: tau_s,phase_rad,quality
// ---------------------------------------------------------------------------

pub fn write_phase_csv(path: &Path, series: &PhaseSeries) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "tau_s,phase_rad,quality")?;
    for i in 0..series.len() {
        writeln!(
            w,
            "{},{},{}",
            format_float(series.durations_s()[i]),
            format_float(series.phase_rad()[i]),
            format_float(series.quality()[i])
        )?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// FluxResponse: time_s,raw_flux_phi0,normalized
// ---------------------------------------------------------------------------

pub fn write_flux_response_csv(path: &Path, response: &FluxResponse) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "time_s,raw_flux_phi0,normalized")?;
    for i in 0..response.len() {
        writeln!(
            w,
            "{},{},{}",
            format_float(response.times_s()[i]),
            format_float(response.raw_flux_phi0()[i]),
            format_float(response.normalized()[i])
        )?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// SpectroscopyMap: first row = probe frequencies, first column = voltages
// ---------------------------------------------------------------------------

pub fn write_spectroscopy_csv(path: &Path, map: &SpectroscopyMap) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let header: Vec<String> = std::iter::once(String::new())
        .chain(map.probe_frequencies_hz().iter().map(|f| format_float(*f)))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (i, row) in map.response().iter().enumerate() {
        let line: Vec<String> = std::iter::once(format_float(map.voltages_v()[i]))
            .chain(row.iter().map(|v| format_float(*v)))
            .collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_spectroscopy_csv(path: &Path) -> Result<SpectroscopyMap> {
    let mut lines = open_lines(path)?;
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty spectroscopy CSV".into()))??;
    let probes: Vec<f64> = header
        .split(',')
        .skip(1)
        .enumerate()
        .map(|(i, f)| parse_field(f, 1, &format!("probe frequency {i}")))
        .collect::<Result<_>>()?;
    let mut voltages = Vec::new();
    let mut response = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let v = parse_field(
            fields.next().unwrap_or_default(),
            lineno + 2,
            "voltage",
        )?;
        let row: Vec<f64> = fields
            .map(|f| parse_field(f, lineno + 2, "response"))
            .collect::<Result<_>>()?;
        voltages.push(v);
        response.push(row);
    }
    SpectroscopyMap::new(voltages, probes, response)
}

// ---------------------------------------------------------------------------
// Extracted peaks: voltage_v,frequency_hz
// ---------------------------------------------------------------------------

pub fn write_peaks_csv(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "voltage_v,frequency_hz")?;
    for (v, f) in points {
        writeln!(w, "{},{}", format_float(*v), format_float(*f))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::make_step;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn signal_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sig.csv");
        let s = make_step(0.75, 2e-9, 20e-9, 2.4e9).unwrap();
        write_signal_csv(&path, &s).unwrap();
        let back = read_signal_csv(&path).unwrap();
        assert_eq!(back.samples(), s.samples());
        assert_relative_eq!(back.sample_rate(), s.sample_rate(), max_relative = 1e-12);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("index,time_s,value\n"));
    }

    #[test]
    fn trace_csv_round_trip_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let trace = CryoscopeTrace::new(
            vec![0.0, 1e-9, 2e-9],
            vec![1.0, 0.75, 0.5],
            vec![0.5, 0.9, 0.6],
        )
        .unwrap();
        write_trace_csv(&path, &trace).unwrap();
        let back = read_trace_csv(&path).unwrap();
        assert_eq!(back, trace);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("tau_s,p_x,p_y\n"));
    }

    #[test]
    fn spectroscopy_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.csv");
        let map = SpectroscopyMap::new(
            vec![-1.0, 0.0, 1.0],
            vec![4.5e9, 4.6e9],
            vec![vec![1.0, 0.4], vec![0.3, 0.95], vec![0.88, 0.2]],
        )
        .unwrap();
        write_spectroscopy_csv(&path, &map).unwrap();
        let back = read_spectroscopy_csv(&path).unwrap();
        assert_eq!(back, map);
    }

    #[test]
    fn malformed_rows_are_reported_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "tau_s,p_x,p_y\n0.0,0.5,oops\n").unwrap();
        match read_trace_csv(&path) {
            Err(Error::Parse(msg)) => assert!(msg.contains("line 2"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn float_formatting_round_trips(v in -1e12f64..1e12) {
            let parsed: f64 = format_float(v).parse().unwrap();
            // 15 significant digits reproduce f64 to ~1 ulp of the 15th digit.
            prop_assert!((parsed - v).abs() <= v.abs() * 1e-14);
        }
    }
}
