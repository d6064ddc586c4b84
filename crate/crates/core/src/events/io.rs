//! Event file formats.
//!
//! * CSV: header `t_us,x,y,p`, one event per line, `p` in `{1,-1}` or `{0,1}`.
//! * EVS1: magic `EVS1`, little-endian `u32` width, `u32` height, `u64` count,
//!   then packed 14-byte records `{u64 t_us, u16 x, u16 y, i8 p, i8 pad}`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::stream::{Event, EventStream, Polarity};
use crate::error::{Error, IoContext, Result};

pub const EVS1_MAGIC: &[u8; 4] = b"EVS1";
const EVS1_HEADER: usize = 4 + 4 + 4 + 8;
const EVS1_RECORD: usize = 8 + 2 + 2 + 1 + 1;

pub fn encode_evs1(stream: &EventStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(EVS1_HEADER + EVS1_RECORD * stream.len());
    out.extend_from_slice(EVS1_MAGIC);
    out.extend_from_slice(&stream.width().to_le_bytes());
    out.extend_from_slice(&stream.height().to_le_bytes());
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    for e in stream.events() {
        out.extend_from_slice(&e.t.to_le_bytes());
        out.extend_from_slice(&e.x.to_le_bytes());
        out.extend_from_slice(&e.y.to_le_bytes());
        out.push(e.polarity.sign() as u8);
        out.push(0);
    }
    out
}

pub fn decode_evs1(bytes: &[u8], path: &Path) -> Result<EventStream> {
    if bytes.len() < EVS1_HEADER {
        return Err(Error::parse(path, "offset 0", "truncated EVS1 header"));
    }
    if &bytes[..4] != EVS1_MAGIC {
        return Err(Error::parse(path, "offset 0", "bad magic, expected EVS1"));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let body = &bytes[EVS1_HEADER..];
    let expected = usize::try_from(count)
        .ok()
        .and_then(|n| n.checked_mul(EVS1_RECORD))
        .ok_or_else(|| Error::parse(path, "offset 12", format!("implausible event count {count}")))?;
    if body.len() != expected {
        return Err(Error::parse(
            path,
            format!("offset {}", EVS1_HEADER + body.len().min(expected)),
            format!("header declares {count} events ({expected} bytes), body has {} bytes", body.len()),
        ));
    }
    let mut events = Vec::with_capacity(count as usize);
    for (i, rec) in body.chunks_exact(EVS1_RECORD).enumerate() {
        let offset = EVS1_HEADER + i * EVS1_RECORD;
        let t = u64::from_le_bytes(rec[0..8].try_into().unwrap());
        let x = u16::from_le_bytes(rec[8..10].try_into().unwrap());
        let y = u16::from_le_bytes(rec[10..12].try_into().unwrap());
        let p = rec[12] as i8;
        let polarity = match p {
            1 => Polarity::Positive,
            -1 => Polarity::Negative,
            other => {
                return Err(Error::parse(path, format!("record {i} (offset {offset})"), format!("invalid polarity {other}")));
            }
        };
        events.push(Event::new(t, x, y, polarity));
    }
    EventStream::new(width, height, events).map_err(|e| Error::parse(path, "records", e.to_string()))
}

pub fn write_evs1(path: &Path, stream: &EventStream) -> Result<()> {
    fs::write(path, encode_evs1(stream)).at(path)?;
    Ok(())
}

pub fn read_evs1(path: &Path) -> Result<EventStream> {
    decode_evs1(&fs::read(path).at(path)?, path)
}

/// Reads CSV events. The sensor size is not part of the format and must be
/// supplied.
pub fn read_csv(path: &Path, width: u32, height: u32) -> Result<EventStream> {
    let reader = BufReader::new(fs::File::open(path).at(path)?);
    parse_csv(reader, path, width, height)
}

pub fn parse_csv(reader: impl BufRead, path: &Path, width: u32, height: u32) -> Result<EventStream> {
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        Some((_, Ok(header))) if header.trim().replace(' ', "") == "t_us,x,y,p" => {}
        Some((_, Ok(header))) => {
            return Err(Error::parse(path, "line 1", format!("expected header t_us,x,y,p, found {header:?}")));
        }
        Some((_, Err(e))) => return Err(e.into()),
        None => return Err(Error::parse(path, "line 1", "empty file")),
    }
    let mut events = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| Error::parse(path, format!("line {lineno}"), msg);
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", fields.len())));
        }
        let t: u64 = fields[0].parse().map_err(|_| bad(format!("bad timestamp {:?}", fields[0])))?;
        let x: u32 = fields[1].parse().map_err(|_| bad(format!("bad x {:?}", fields[1])))?;
        let y: u32 = fields[2].parse().map_err(|_| bad(format!("bad y {:?}", fields[2])))?;
        let p: i64 = fields[3].parse().map_err(|_| bad(format!("bad polarity {:?}", fields[3])))?;
        let polarity = Polarity::from_code(p).ok_or_else(|| bad(format!("polarity {p} not in {{-1, 0, 1}}")))?;
        if x >= width || y >= height {
            return Err(bad(format!("event {} at ({x}, {y}) outside {width}x{height} sensor", events.len())));
        }
        if let Some(prev) = events.last().map(|e: &Event| e.t) {
            if t < prev {
                return Err(bad(format!("event {} at t={t} precedes previous event at t={prev}", events.len())));
            }
        }
        events.push(Event::new(t, x as u16, y as u16, polarity));
    }
    EventStream::new(width, height, events)
}

pub fn write_csv(path: &Path, stream: &EventStream) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path).at(path)?);
    writeln!(w, "t_us,x,y,p")?;
    for e in stream.events() {
        writeln!(w, "{},{},{},{}", e.t, e.x, e.y, e.polarity.sign())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an event file, picking the format from the extension (`.csv`
/// needs a sensor size; anything else is read as EVS1).
pub fn read_events(path: &Path, size: Option<(u32, u32)>) -> Result<EventStream> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let (w, h) = size.ok_or_else(|| Error::invalid("CSV events need an explicit sensor size"))?;
        read_csv(path, w, h)
    } else {
        read_evs1(path)
    }
}

pub fn write_events(path: &Path, stream: &EventStream) -> Result<()> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        write_csv(path, stream)
    } else {
        write_evs1(path, stream)
    }
}
