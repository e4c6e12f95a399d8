//! Line-oriented text format for traces.
//!
//! ```text
//! #meta R=54000000 frame_len=8000 interval_us=20000 desc="outdoor run"
//! tx 0 0 ok - 3fa0...
//! rx 0 112 crc -71 3fa4...
//! rx ? 20113 phy - -
//! ```
//!
//! Each record is `<side> <seq|?> <timestamp_us> <ok|crc|phy> <rssi|-> <hex|->`.
//! Payload hex has `ceil(frame_len / 4)` lowercase digits; the most
//! significant bit of the first digit is bit 0.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::trace::{FrameRecord, ReceiveStatus, Trace, TraceMeta};

pub fn read_trace(path: impl AsRef<Path>) -> Result<Trace> {
    let file = File::open(path)?;
    read_from(BufReader::new(file))
}

pub fn write_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_to(trace, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn parse_trace(text: &str) -> Result<Trace> {
    read_from(text.as_bytes())
}

pub fn format_trace(trace: &Trace) -> String {
    let mut buf = Vec::new();
    write_to(trace, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("trace text is UTF-8")
}

pub fn write_to<W: Write>(trace: &Trace, out: &mut W) -> Result<()> {
    let m = &trace.meta;
    writeln!(
        out,
        "#meta R={} frame_len={} interval_us={} desc={}",
        m.rate,
        m.frame_len,
        m.interval_us,
        quote(&m.description)
    )?;
    for (side, frames) in [("tx", &trace.tx), ("rx", &trace.rx)] {
        for f in frames {
            write_record(out, side, f)?;
        }
    }
    Ok(())
}

fn write_record<W: Write>(out: &mut W, side: &str, f: &FrameRecord) -> Result<()> {
    let seq = f.seq.map_or_else(|| "?".to_string(), |s| s.to_string());
    let rssi = f.rssi.map_or_else(|| "-".to_string(), |r| r.to_string());
    let payload = f.payload.as_ref().map_or_else(|| "-".to_string(), BitVector::to_hex);
    writeln!(
        out,
        "{side} {seq} {} {} {rssi} {payload}",
        f.timestamp_us,
        f.status.token()
    )?;
    Ok(())
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn unquote(s: &str, line: usize) -> Result<String> {
    let inner = s
        .strip_prefix('"')
        .and_then(|r| r.strip_suffix('"'))
        .filter(|_| s.len() >= 2)
        .ok_or_else(|| Error::parse(line, "desc must be a double-quoted string"))?;
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some('"') => out.push('"'),
                Some('\\') => out.push('\\'),
                Some('n') => out.push('\n'),
                other => {
                    return Err(Error::parse(
                        line,
                        format!("invalid escape in desc: \\{}", other.unwrap_or(' ')),
                    ))
                }
            },
            '"' => return Err(Error::parse(line, "unescaped quote inside desc")),
            c => out.push(c),
        }
    }
    Ok(out)
}

fn parse_meta(text: &str, line: usize) -> Result<TraceMeta> {
    let rest = text
        .strip_prefix("#meta ")
        .ok_or_else(|| Error::parse(line, "first line must start with `#meta `"))?;
    let mut fields = rest.splitn(4, ' ');
    let mut take = |key: &str| -> Result<&str> {
        let f = fields
            .next()
            .ok_or_else(|| Error::parse(line, format!("missing meta field {key}")))?;
        f.strip_prefix(key)
            .and_then(|v| v.strip_prefix('='))
            .ok_or_else(|| Error::parse(line, format!("expected meta field {key}=, got {f:?}")))
    };
    let rate_s = take("R")?;
    let frame_len_s = take("frame_len")?;
    let interval_s = take("interval_us")?;
    let desc_s = take("desc")?;

    let rate: f64 = rate_s
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid R {rate_s:?}")))?;
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::parse(line, "R must be a positive number"));
    }
    let frame_len: usize = frame_len_s
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::parse(line, format!("invalid frame_len {frame_len_s:?}")))?;
    let interval_us: u64 = interval_s
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::parse(line, format!("invalid interval_us {interval_s:?}")))?;
    Ok(TraceMeta {
        rate,
        frame_len,
        interval_us,
        description: unquote(desc_s, line)?,
    })
}

pub fn read_from<R: BufRead>(reader: R) -> Result<Trace> {
    let mut lines = reader.lines().enumerate();
    let meta = loop {
        match lines.next() {
            Some((i, l)) => {
                let l = l?;
                if l.trim().is_empty() {
                    continue;
                }
                break parse_meta(&l, i + 1)?;
            }
            None => return Err(Error::parse(1, "empty trace file: missing #meta line")),
        }
    };
    let mut trace = Trace::new(meta);
    let mut last_ts: [Option<i64>; 2] = [None, None];

    for (i, l) in lines {
        let line = i + 1;
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = l.split(' ').collect();
        if toks.len() != 6 {
            return Err(Error::parse(
                line,
                format!("expected 6 fields, found {}", toks.len()),
            ));
        }
        let side = match toks[0] {
            "tx" => 0,
            "rx" => 1,
            other => return Err(Error::parse(line, format!("unknown side {other:?}"))),
        };
        let seq = match toks[1] {
            "?" => None,
            s => Some(
                s.parse::<u64>()
                    .map_err(|_| Error::parse(line, format!("invalid seq {s:?}")))?,
            ),
        };
        let name = format!("{} record seq {}", toks[0], toks[1]);
        let timestamp_us: i64 = toks[2]
            .parse()
            .map_err(|_| Error::parse(line, format!("{name}: invalid timestamp {:?}", toks[2])))?;
        let status = ReceiveStatus::from_token(toks[3])
            .ok_or_else(|| Error::parse(line, format!("{name}: invalid status {:?}", toks[3])))?;
        let rssi = match toks[4] {
            "-" => None,
            s => Some(
                s.parse::<i32>()
                    .map_err(|_| Error::parse(line, format!("{name}: invalid rssi {s:?}")))?,
            ),
        };
        let payload = match (toks[5], status.has_payload()) {
            ("-", false) => None,
            ("-", true) => {
                return Err(Error::parse(
                    line,
                    format!("{name}: {} frame requires a payload", status.token()),
                ))
            }
            (_, false) => {
                return Err(Error::parse(line, format!("{name}: phy frame must not carry a payload")))
            }
            (hex, true) => Some(
                BitVector::from_hex(hex, trace.meta.frame_len)
                    .map_err(|e| Error::parse(line, format!("{name}: {e}")))?,
            ),
        };
        if let Some(prev) = last_ts[side] {
            if timestamp_us < prev {
                return Err(Error::parse(
                    line,
                    format!("{name}: timestamp {timestamp_us} is before previous {prev}"),
                ));
            }
        }
        last_ts[side] = Some(timestamp_us);

        let record = FrameRecord {
            seq,
            timestamp_us,
            status,
            rssi,
            payload,
        };
        if side == 0 {
            if record.seq != Some(trace.tx.len() as u64) {
                return Err(Error::parse(
                    line,
                    format!("{name}: tx sequence numbers must be consecutive from 0"),
                ));
            }
            trace.tx.push(record);
        } else {
            trace.rx.push(record);
        }
    }
    trace
        .validate()
        .map_err(|e| Error::parse(0, format!("trace-level check failed: {e}")))?;
    Ok(trace)
}
