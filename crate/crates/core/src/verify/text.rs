//! Line-oriented history format.
//!
//! One record per line: `thread kind invocation_ts response_ts seq intact`,
//! with `kind` one of `read`/`write` and `intact` one of `1`/`0`. Lines
//! starting with `#` carry metadata (`# kind=ARC readers=8 initial_seq=0`)
//! or comments; blank lines are ignored.

use std::io::{BufRead, Write};

use super::{History, HistoryError, OpKind, OpRecord};

pub fn write_history(h: &History, mut out: impl Write) -> Result<(), HistoryError> {
    write!(out, "# readers={} initial_seq={}", h.readers, h.initial_seq)?;
    if let Some(kind) = &h.kind {
        write!(out, " kind={kind}")?;
    }
    writeln!(out)?;
    for r in &h.records {
        let kind = match r.kind {
            OpKind::Read => "read",
            OpKind::Write => "write",
        };
        writeln!(
            out,
            "{} {} {} {} {} {}",
            r.thread,
            kind,
            r.invocation_ts,
            r.response_ts,
            r.seq,
            u8::from(r.intact)
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_history(input: impl BufRead) -> Result<History, HistoryError> {
    let mut h = History::new(Vec::new());
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = n + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            parse_meta(meta, &mut h, line_no)?;
            continue;
        }
        h.records.push(parse_record(line, line_no)?);
    }
    Ok(h)
}

fn parse_meta(meta: &str, h: &mut History, line: usize) -> Result<(), HistoryError> {
    for kv in meta.split_whitespace() {
        let Some((k, v)) = kv.split_once('=') else {
            continue;
        };
        let bad = |what: &str| HistoryError::Parse {
            line,
            msg: format!("bad {what} {v:?}"),
        };
        match k {
            "readers" => h.readers = v.parse().map_err(|_| bad("reader count"))?,
            "initial_seq" => h.initial_seq = v.parse().map_err(|_| bad("initial_seq"))?,
            "kind" => h.kind = Some(v.to_string()),
            _ => {}
        }
    }
    Ok(())
}

fn parse_record(line: &str, line_no: usize) -> Result<OpRecord, HistoryError> {
    let err = |msg: String| HistoryError::Parse { line: line_no, msg };
    let fields: Vec<&str> = line.split_whitespace().collect();
    let [thread, kind, inv, resp, seq, intact] = fields[..] else {
        return Err(err(format!("expected 6 fields, found {}", fields.len())));
    };
    let num = |name: &str, s: &str| -> Result<u64, HistoryError> {
        s.parse().map_err(|_| err(format!("bad {name} {s:?}")))
    };
    let kind = match kind {
        "read" => OpKind::Read,
        "write" => OpKind::Write,
        other => return Err(err(format!("bad kind {other:?}"))),
    };
    let intact = match intact {
        "1" => true,
        "0" => false,
        other => return Err(err(format!("bad intact flag {other:?}"))),
    };
    Ok(OpRecord {
        thread: u32::try_from(num("thread", thread)?)
            .map_err(|_| err("thread out of range".into()))?,
        kind,
        invocation_ts: num("invocation_ts", inv)?,
        response_ts: num("response_ts", resp)?,
        seq: num("seq", seq)?,
        intact,
    })
}
