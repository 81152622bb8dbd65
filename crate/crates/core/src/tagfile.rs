//! Time-tag files.
//!
//! Binary layout: the 8-byte magic `QTT1\0\0\0\0`, then 16-byte records of
//! one channel-code byte, seven zero bytes and a little-endian `i64`
//! timestamp in ps. Text layout: one `channel,timestamp_ps` row per record,
//! with `#` comments and an optional header row.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::{Channel, TimeTag, TimeTagStream};

pub const MAGIC: &[u8; 8] = b"QTT1\0\0\0\0";
const RECORD_BYTES: usize = 16;

pub fn write_binary<W: Write>(stream: &TimeTagStream, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    w.write_all(MAGIC)?;
    for r in stream.records() {
        let mut rec = [0u8; RECORD_BYTES];
        rec[0] = r.channel.code();
        rec[8..].copy_from_slice(&r.timestamp.to_le_bytes());
        w.write_all(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(reader: R) -> Result<TimeTagStream> {
    let mut r = BufReader::new(reader);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| Error::Parse("file too short for header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Parse("not a QTT1 time-tag file".into()));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(Error::Parse(format!(
            "truncated record at byte {}",
            8 + bytes.len() / RECORD_BYTES * RECORD_BYTES
        )));
    }
    let records = bytes
        .chunks_exact(RECORD_BYTES)
        .map(|rec| {
            let channel = Channel::from_code(rec[0])?;
            let timestamp = i64::from_le_bytes(rec[8..].try_into().expect("8 bytes"));
            Ok(TimeTag { timestamp, channel })
        })
        .collect::<Result<Vec<_>>>()?;
    TimeTagStream::from_sorted(records)
}

pub fn write_csv<W: Write>(stream: &TimeTagStream, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "channel,timestamp_ps")?;
    for r in stream.records() {
        writeln!(w, "{},{}", r.channel, r.timestamp)?;
    }
    w.flush()?;
    Ok(())
}

/// Records may appear in any order; they are sorted on load.
pub fn read_csv<R: Read>(reader: R) -> Result<TimeTagStream> {
    let mut records = Vec::new();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("channel") {
            continue;
        }
        let (ch, ts) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("line {}: expected channel,timestamp_ps", n + 1)))?;
        let channel = match ch.trim().parse::<u8>() {
            Ok(code) => Channel::from_code(code)?,
            Err(_) => ch.parse()?,
        };
        let timestamp = ts.trim().parse::<i64>().map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
        records.push(TimeTag { timestamp, channel });
    }
    Ok(TimeTagStream::from_unsorted(records))
}

/// Binary unless the extension is `csv`.
pub fn load(path: &Path) -> Result<TimeTagStream> {
    let file = std::fs::File::open(path)?;
    if is_csv(path) {
        read_csv(file)
    } else {
        read_binary(file)
    }
}

pub fn save(stream: &TimeTagStream, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    if is_csv(path) {
        write_csv(stream, file)
    } else {
        write_binary(stream, file)
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TimeTagStream {
        TimeTagStream::from_unsorted(vec![
            TimeTag { timestamp: 0, channel: Channel::Sync },
            TimeTag { timestamp: 1234, channel: Channel::XxT },
            TimeTag { timestamp: 1500, channel: Channel::XR },
            TimeTag { timestamp: -7, channel: Channel::XT },
            TimeTag { timestamp: i64::MAX, channel: Channel::XxR },
        ])
    }

    #[test]
    fn binary_roundtrip() {
        let mut buf = Vec::new();
        write_binary(&sample(), &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 5 * 16);
        assert_eq!(read_binary(&buf[..]).unwrap(), sample());
    }

    #[test]
    fn csv_roundtrip() {
        let mut buf = Vec::new();
        write_csv(&sample(), &mut buf).unwrap();
        assert_eq!(read_csv(&buf[..]).unwrap(), sample());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read_binary(&b"QTT2\0\0\0\0"[..]).is_err());
        let mut buf = Vec::new();
        write_binary(&sample(), &mut buf).unwrap();
        assert!(read_binary(&buf[..buf.len() - 3]).is_err());
        buf[8] = 9;
        assert!(read_binary(&buf[..]).is_err());
        assert!(read_csv(&b"X_T,12x\n"[..]).is_err());
        assert!(read_csv(&b"Q,12\n"[..]).is_err());
    }

    #[test]
    fn csv_accepts_codes_and_comments() {
        let s = read_csv(&b"# comment\n4,10\nXX_T,3\n"[..]).unwrap();
        assert_eq!(s.records()[0], TimeTag { timestamp: 3, channel: Channel::XxT });
        assert_eq!(s.count(Channel::Sync), 1);
    }
}
