//! Binary trace container and CSV emitters.
//!
//! Trace file layout, all integers and floats little-endian:
//!
//! | bytes | field                                            |
//! |-------|--------------------------------------------------|
//! | 4     | magic `TMSQ`                                     |
//! | 2     | version (1)                                      |
//! | 1     | channel count                                    |
//! | 1     | sample format: 1 = f64, 2 = f32, 3 = i16 codes   |
//! | 8     | sample rate, Hz (f64)                            |
//! | 8     | samples per channel (u64)                        |
//! | 4     | metadata length in bytes (u32)                   |
//! | …     | UTF-8 `key=value` lines                          |
//! | …     | channels, planar, in the order listed under `channels` |
//!
//! Files are written to a temporary sibling and renamed into place.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::analysis::{CovarianceScan, DelayScanResult};
use crate::config::format_f64;
use crate::dsp::Spectrum;
use crate::synth::{ChannelPair, SampleUnits, TraceSet};

pub const MAGIC: [u8; 4] = *b"TMSQ";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 28;
const RESERVED_KEYS: [&str; 3] = ["channels", "units", "adc_step"];

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("bad magic {0:?}, expected \"TMSQ\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown sample format code {0}")]
    UnknownFormat(u8),
    #[error("file truncated: need {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{0} unexpected bytes after the payload")]
    TrailingData(usize),
    #[error("metadata does not match the header: {0}")]
    MetaMismatch(String),
    #[error("metadata entry cannot be stored: {0}")]
    InvalidMeta(String),
    #[error("channel `{0}` holds values that are not 16-bit integer codes")]
    NotCodes(&'static str),
    #[error(transparent)]
    Traces(#[from] crate::synth::SynthError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    F64 = 1,
    F32 = 2,
    I16 = 3,
}

impl SampleFormat {
    fn from_code(code: u8) -> Result<Self, StoreError> {
        match code {
            1 => Ok(SampleFormat::F64),
            2 => Ok(SampleFormat::F32),
            3 => Ok(SampleFormat::I16),
            c => Err(StoreError::UnknownFormat(c)),
        }
    }

    pub fn sample_size(self) -> usize {
        match self {
            SampleFormat::F64 => 8,
            SampleFormat::F32 => 4,
            SampleFormat::I16 => 2,
        }
    }

    /// Exact format for the set: codes for digitized records, f64 otherwise.
    pub fn lossless_for(traces: &TraceSet) -> Self {
        match traces.units {
            SampleUnits::AdcCodes { .. } => SampleFormat::I16,
            SampleUnits::ShotSigma => SampleFormat::F64,
        }
    }
}

fn channels(t: &TraceSet) -> Vec<(&'static str, &[f64])> {
    let mut out: Vec<(&'static str, &[f64])> = vec![("probe", &t.probe), ("conjugate", &t.conjugate)];
    if let Some(d) = &t.dark {
        out.push(("dark_probe", &d.probe));
        out.push(("dark_conjugate", &d.conjugate));
    }
    if let Some(v) = &t.vacuum {
        out.push(("vacuum_probe", &v.probe));
        out.push(("vacuum_conjugate", &v.conjugate));
    }
    out
}

/// Encodes `traces` in the container format.
pub fn encode_traces(traces: &TraceSet, format: SampleFormat) -> Result<Vec<u8>, StoreError> {
    traces.validate()?;
    let chans = channels(traces);
    let mut meta = String::new();
    let names: Vec<&str> = chans.iter().map(|c| c.0).collect();
    meta.push_str(&format!("channels={}\n", names.join(",")));
    match traces.units {
        SampleUnits::ShotSigma => meta.push_str("units=shot_sigma\n"),
        SampleUnits::AdcCodes { step } => {
            meta.push_str("units=adc_codes\n");
            meta.push_str(&format!("adc_step={}\n", format_f64(step)));
        }
    }
    for (k, v) in &traces.meta {
        let bad = k.is_empty() || k.contains(['=', '\n']) || v.contains('\n') || RESERVED_KEYS.contains(&k.as_str());
        if bad {
            return Err(StoreError::InvalidMeta(k.clone()));
        }
        meta.push_str(&format!("{k}={v}\n"));
    }
    let n = traces.n();
    let mut out = Vec::with_capacity(HEADER_LEN + meta.len() + chans.len() * n * format.sample_size());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(chans.len() as u8);
    out.push(format as u8);
    out.extend_from_slice(&traces.fs.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(meta.as_bytes());
    for (name, data) in chans {
        match format {
            SampleFormat::F64 => data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            SampleFormat::F32 => data.iter().for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
            SampleFormat::I16 => {
                for &v in data {
                    let c = v as i16;
                    if c as f64 != v {
                        return Err(StoreError::NotCodes(name));
                    }
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, len: usize) -> Result<&'a [u8], StoreError> {
    let end = *pos + len;
    if end > bytes.len() {
        return Err(StoreError::Truncated {
            expected: end,
            found: bytes.len(),
        });
    }
    let out = &bytes[*pos..end];
    *pos = end;
    Ok(out)
}

pub fn decode_traces(bytes: &[u8]) -> Result<TraceSet, StoreError> {
    let mut pos = 0;
    let magic: [u8; 4] = take(bytes, &mut pos, 4)?.try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(StoreError::BadMagic(magic));
    }
    let version = u16::from_le_bytes(take(bytes, &mut pos, 2)?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(StoreError::UnsupportedVersion(version));
    }
    let count = take(bytes, &mut pos, 1)?[0] as usize;
    let format = SampleFormat::from_code(take(bytes, &mut pos, 1)?[0])?;
    let fs = f64::from_le_bytes(take(bytes, &mut pos, 8)?.try_into().expect("8 bytes"));
    let n = u64::from_le_bytes(take(bytes, &mut pos, 8)?.try_into().expect("8 bytes")) as usize;
    let meta_len = u32::from_le_bytes(take(bytes, &mut pos, 4)?.try_into().expect("4 bytes")) as usize;
    let meta_text = std::str::from_utf8(take(bytes, &mut pos, meta_len)?)
        .map_err(|_| StoreError::MetaMismatch("metadata is not UTF-8".into()))?;

    let mut meta = BTreeMap::new();
    for line in meta_text.lines().filter(|l| !l.is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| StoreError::MetaMismatch(format!("line `{line}` has no `=`")))?;
        meta.insert(k.to_string(), v.to_string());
    }
    let names: Vec<String> = meta
        .remove("channels")
        .ok_or_else(|| StoreError::MetaMismatch("no channel list".into()))?
        .split(',')
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    if names.len() != count {
        return Err(StoreError::MetaMismatch(format!(
            "header declares {count} channels, metadata lists {}",
            names.len()
        )));
    }
    let units = match meta.remove("units").as_deref() {
        Some("shot_sigma") => SampleUnits::ShotSigma,
        Some("adc_codes") => {
            let step = meta
                .remove("adc_step")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| StoreError::MetaMismatch("adc_codes without a valid adc_step".into()))?;
            SampleUnits::AdcCodes { step }
        }
        other => return Err(StoreError::MetaMismatch(format!("unknown units {other:?}"))),
    };

    let size = format.sample_size();
    let expected = pos + count * n * size;
    if bytes.len() < expected {
        return Err(StoreError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(StoreError::TrailingData(bytes.len() - expected));
    }
    let mut data: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for name in &names {
        let raw = take(bytes, &mut pos, n * size)?;
        let values = match format {
            SampleFormat::F64 => raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
            SampleFormat::F32 => raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect(),
            SampleFormat::I16 => raw
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes(c.try_into().expect("2 bytes")) as f64)
                .collect(),
        };
        if data.insert(name.clone(), values).is_some() {
            return Err(StoreError::MetaMismatch(format!("channel `{name}` listed twice")));
        }
    }
    let mut take_channel = |name: &str| data.remove(name);
    let probe = take_channel("probe").ok_or_else(|| StoreError::MetaMismatch("no probe channel".into()))?;
    let conjugate =
        take_channel("conjugate").ok_or_else(|| StoreError::MetaMismatch("no conjugate channel".into()))?;
    let mut pair = |a: &str, b: &str| -> Result<Option<ChannelPair>, StoreError> {
        match (take_channel(a), take_channel(b)) {
            (Some(probe), Some(conjugate)) => Ok(Some(ChannelPair { probe, conjugate })),
            (None, None) => Ok(None),
            _ => Err(StoreError::MetaMismatch(format!("`{a}` and `{b}` must appear together"))),
        }
    };
    let dark = pair("dark_probe", "dark_conjugate")?;
    let vacuum = pair("vacuum_probe", "vacuum_conjugate")?;
    if let Some(extra) = data.keys().next() {
        return Err(StoreError::MetaMismatch(format!("unknown channel `{extra}`")));
    }
    Ok(TraceSet {
        fs,
        probe,
        conjugate,
        dark,
        vacuum,
        units,
        meta,
    })
}

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<usize, StoreError> {
    let io = |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(bytes.len())
}

/// Writes `traces` in the lossless format for its units; returns the byte count.
pub fn write_traces(path: &Path, traces: &TraceSet) -> Result<usize, StoreError> {
    write_traces_as(path, traces, SampleFormat::lossless_for(traces))
}

pub fn write_traces_as(path: &Path, traces: &TraceSet, format: SampleFormat) -> Result<usize, StoreError> {
    write_atomic(path, &encode_traces(traces, format)?)
}

pub fn read_traces(path: &Path) -> Result<TraceSet, StoreError> {
    let bytes = std::fs::read(path).map_err(|source| StoreError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_traces(&bytes)
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<usize, StoreError> {
    let bytes = csv_bytes(header, rows).map_err(|source| StoreError::Csv {
        path: path.display().to_string(),
        source,
    })?;
    write_atomic(path, &bytes)
}

/// Columns `frequency_hz,value,unit[,stderr][,valid]`.
pub fn spectrum_csv(s: &Spectrum) -> Vec<u8> {
    let (header, rows) = spectrum_rows(s);
    csv_bytes(&header, rows).expect("writing to memory")
}

fn spectrum_rows(s: &Spectrum) -> (Vec<&'static str>, impl Iterator<Item = Vec<String>> + '_) {
    let mut header = vec!["frequency_hz", "value", "unit"];
    if s.stderr.is_some() {
        header.push("stderr");
    }
    if s.valid.is_some() {
        header.push("valid");
    }
    let rows = (0..s.len()).map(move |i| {
        let mut row = vec![format_f64(s.freqs[i]), format_f64(s.values[i]), s.unit.as_str().to_string()];
        if let Some(e) = &s.stderr {
            row.push(format_f64(e[i]));
        }
        if let Some(v) = &s.valid {
            row.push(if v[i] { "1" } else { "0" }.to_string());
        }
        row
    });
    (header, rows)
}

pub fn write_spectrum_csv(path: &Path, s: &Spectrum) -> Result<usize, StoreError> {
    let (header, rows) = spectrum_rows(s);
    write_csv(path, &header, rows)
}

/// Columns `delay_s,value,unit,stage`; coarse grid rows first, then the
/// refinement steps in evaluation order.
pub fn write_delay_scan_csv(path: &Path, r: &DelayScanResult) -> Result<usize, StoreError> {
    let coarse = r.delays.iter().zip(&r.objective).map(|(d, v)| (*d, *v, "coarse"));
    let fine = r.refinement.iter().map(|(d, v)| (*d, *v, "refine"));
    let rows = coarse
        .chain(fine)
        .map(|(d, v, stage)| vec![format_f64(d), format_f64(v), "db_rel_shot".into(), stage.into()]);
    write_csv(path, &["delay_s", "value", "unit", "stage"], rows)
}

/// Columns `spacing,value,unit,stderr,rel_shot`.
pub fn write_covariance_csv(path: &Path, scan: &CovarianceScan) -> Result<usize, StoreError> {
    let rel = scan.normalized();
    let rows = (0..scan.spacings.len()).map(|i| {
        vec![
            format_f64(scan.spacings[i]),
            format_f64(scan.covariances[i]),
            "per_hz".to_string(),
            format_f64(scan.standard_errors[i]),
            format_f64(rel[i]),
        ]
    });
    write_csv(path, &["spacing", "value", "unit", "stderr", "rel_shot"], rows)
}
