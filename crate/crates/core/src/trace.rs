//! Plain-text trace format.
//!
//! One record per line: `<op> <core> <addr>`, with `op` in `{L, S}`, `core` a
//! decimal id in `0..=15` and `addr` a `0x`-prefixed hexadecimal byte address.
//! Fields are separated by single spaces. Lines starting with `#` are
//! comments and blank lines are ignored.

use std::io::{self, BufRead, Write};

use crate::error::{TraceError, TraceErrorKind};
use crate::types::{MemoryRef, Op, MAX_CORES};

/// Outcome of parsing a non-failing line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parsed {
    Ref(MemoryRef),
    Skip,
}

/// Parses one line (without its terminator). `line_no` only feeds error
/// reporting.
pub fn parse_line(line: &str, line_no: u64) -> Result<Parsed, TraceError> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    if line.starts_with('#') || line.trim().is_empty() {
        return Ok(Parsed::Skip);
    }
    let fail = |column: usize, kind| TraceError {
        line: line_no,
        column,
        kind,
    };

    let mut fields = [("", 0usize); 3];
    let mut count = 0;
    let mut col = 1;
    for field in line.split(' ') {
        if count < 3 {
            fields[count] = (field, col);
        }
        count += 1;
        col += field.len() + 1;
    }
    if count != 3 || fields.iter().any(|(f, _)| f.is_empty()) {
        let found = line.split(' ').filter(|f| !f.is_empty()).count();
        let column = fields
            .iter()
            .take(count.min(3))
            .find(|(f, _)| f.is_empty())
            .map_or(1, |&(_, c)| c);
        return Err(fail(column, TraceErrorKind::FieldCount(found)));
    }

    let [(op, op_col), (core, core_col), (addr, addr_col)] = fields;
    let op = match op {
        "L" => Op::Load,
        "S" => Op::Store,
        other => return Err(fail(op_col, TraceErrorKind::UnknownOpcode(other.to_string()))),
    };

    if !core.bytes().all(|b| b.is_ascii_digit()) {
        return Err(fail(core_col, TraceErrorKind::MalformedCore(core.to_string())));
    }
    let core_id: u64 = core
        .parse()
        .map_err(|_| fail(core_col, TraceErrorKind::MalformedCore(core.to_string())))?;
    if core_id >= MAX_CORES as u64 {
        return Err(fail(core_col, TraceErrorKind::CoreOutOfRange(core_id)));
    }

    let malformed = || fail(addr_col, TraceErrorKind::MalformedAddress(addr.to_string()));
    let digits = addr.strip_prefix("0x").ok_or_else(malformed)?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(malformed());
    }
    let addr = u64::from_str_radix(digits, 16).map_err(|_| malformed())?;

    Ok(Parsed::Ref(MemoryRef {
        op,
        core: core_id as usize,
        addr,
    }))
}

/// Renders a record without its trailing newline.
pub fn write_line(r: &MemoryRef) -> String {
    let op = match r.op {
        Op::Load => 'L',
        Op::Store => 'S',
    };
    format!("{op} {} {:#x}", r.core, r.addr)
}

/// Failure while streaming a trace: either a bad line or the reader itself.
#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error(transparent)]
    Parse(#[from] TraceError),
    #[error("i/o error at line {line}: {source}")]
    Io { line: u64, source: io::Error },
}

/// Streaming reader that yields one record at a time, reusing a single line
/// buffer.
pub struct TraceReader<R> {
    inner: R,
    buf: String,
    line_no: u64,
    done: bool,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(inner: R) -> Self {
        TraceReader {
            inner,
            buf: String::with_capacity(64),
            line_no: 0,
            done: false,
        }
    }

    /// Number of the last line consumed (1-based).
    pub fn line_no(&self) -> u64 {
        self.line_no
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<(u64, MemoryRef), ReadError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.buf.clear();
            match self.inner.read_line(&mut self.buf) {
                Ok(0) => self.done = true,
                Ok(_) => {
                    self.line_no += 1;
                    let line = self.buf.strip_suffix('\n').unwrap_or(&self.buf);
                    match parse_line(line, self.line_no) {
                        Ok(Parsed::Ref(r)) => return Some(Ok((self.line_no, r))),
                        Ok(Parsed::Skip) => continue,
                        Err(e) => {
                            self.done = true;
                            return Some(Err(e.into()));
                        }
                    }
                }
                Err(source) => {
                    self.done = true;
                    return Some(Err(ReadError::Io {
                        line: self.line_no + 1,
                        source,
                    }));
                }
            }
        }
        None
    }
}

/// Buffered trace writer.
pub struct TraceWriter<W: Write> {
    inner: io::BufWriter<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(inner: W) -> Self {
        TraceWriter {
            inner: io::BufWriter::new(inner),
        }
    }

    pub fn comment(&mut self, text: &str) -> io::Result<()> {
        for line in text.lines() {
            writeln!(self.inner, "# {line}")?;
        }
        Ok(())
    }

    pub fn record(&mut self, r: &MemoryRef) -> io::Result<()> {
        let op = match r.op {
            Op::Load => 'L',
            Op::Store => 'S',
        };
        writeln!(self.inner, "{op} {} {:#x}", r.core, r.addr)
    }

    pub fn finish(self) -> io::Result<W> {
        self.inner.into_inner().map_err(|e| e.into_error())
    }
}
