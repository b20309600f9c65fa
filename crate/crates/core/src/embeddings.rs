//! Pretrained word embeddings in word2vec binary and whitespace text formats.
//!
//! Rows are stored as `f32`, the precision of the files; lookups widen to
//! `f64` for downstream arithmetic. Tokens are matched exactly, with no case
//! folding or normalization.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Vec<f32>,
}

impl EmbeddingTable {
    /// Builds a table from `(token, row)` entries in order.
    pub fn from_rows<I, S>(dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f32>)>,
        S: Into<String>,
    {
        let mut table = EmbeddingTable::with_dim(dim);
        for (token, row) in rows {
            let token = token.into();
            if row.len() != dim {
                return Err(Error::DimensionMismatch { left: dim, right: row.len() });
            }
            if !table.push(token.clone(), &row) {
                return Err(Error::DuplicateToken { token, offset: 0 });
            }
        }
        if table.is_empty() {
            return Err(Error::InvalidConfig("embedding table needs at least one entry".into()));
        }
        Ok(table)
    }

    fn with_dim(dim: usize) -> Self {
        EmbeddingTable { dim, words: Vec::new(), index: HashMap::new(), matrix: Vec::new() }
    }

    fn push(&mut self, token: String, row: &[f32]) -> bool {
        if self.index.contains_key(&token) {
            return false;
        }
        self.index.insert(token.clone(), self.words.len());
        self.words.push(token);
        self.matrix.extend_from_slice(row);
        true
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Tokens in file order.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn row(&self, idx: usize) -> &[f32] {
        &self.matrix[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn row_of(&self, token: &str) -> Option<&[f32]> {
        self.index.get(token).map(|&i| self.row(i))
    }

    /// Exact-match lookup, widened to `f64`.
    pub fn lookup(&self, token: &str) -> Option<Vec<f64>> {
        self.row_of(token).map(|r| r.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (i, word) in self.words.iter().enumerate() {
            write!(out, "{word}")?;
            for v in self.row(i) {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (i, word) in self.words.iter().enumerate() {
            out.write_all(word.as_bytes())?;
            out.write_all(b" ")?;
            for v in self.row(i) {
                out.write_all(&v.to_le_bytes())?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// On-disk format selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Binary,
    Text,
}

impl Format {
    /// `.txt` and `.vec` are text; everything else is read as binary.
    pub fn sniff(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("txt") | Some("vec") => Format::Text,
            _ => Format::Binary,
        }
    }
}

pub fn load(path: &Path, format: Option<Format>) -> Result<EmbeddingTable> {
    match format.unwrap_or_else(|| Format::sniff(path)) {
        Format::Binary => load_binary(path),
        Format::Text => load_text(path),
    }
}

pub fn load_binary(path: &Path) -> Result<EmbeddingTable> {
    read_binary(BufReader::new(File::open(path)?))
}

pub fn load_text(path: &Path) -> Result<EmbeddingTable> {
    read_text(BufReader::new(File::open(path)?))
}

struct ByteReader<R> {
    inner: R,
    offset: u64,
}

impl<R: BufRead> ByteReader<R> {
    fn peek(&mut self) -> Result<Option<u8>> {
        Ok(self.inner.fill_buf()?.first().copied())
    }

    fn bump(&mut self) {
        self.inner.consume(1);
        self.offset += 1;
    }

    /// Bytes up to (not including) `delim`, which is consumed. `None` at a
    /// clean EOF before any byte.
    fn until(&mut self, delim: u8) -> Result<Option<Vec<u8>>> {
        let start = self.offset;
        let mut buf = Vec::new();
        let n = self.inner.read_until(delim, &mut buf)?;
        self.offset += n as u64;
        if n == 0 {
            return Ok(None);
        }
        if buf.last() != Some(&delim) {
            return Err(Error::Truncated { offset: start });
        }
        buf.pop();
        Ok(Some(buf))
    }

    fn exact(&mut self, buf: &mut [u8]) -> Result<()> {
        let start = self.offset;
        self.inner.read_exact(buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Truncated { offset: start },
            _ => Error::Io(e),
        })?;
        self.offset += buf.len() as u64;
        Ok(())
    }
}

/// Parses the word2vec binary layout: an ASCII header `<count> <dim>\n`,
/// then per entry the token bytes up to a space, `dim` little-endian `f32`
/// values and an optional newline.
pub fn read_binary<R: BufRead>(reader: R) -> Result<EmbeddingTable> {
    let mut r = ByteReader { inner: reader, offset: 0 };
    let header = match r.until(b'\n') {
        Ok(Some(h)) => h,
        Ok(None) | Err(Error::Truncated { .. }) => return Err(Error::MalformedHeader { offset: 0 }),
        Err(e) => return Err(e),
    };
    let (count, dim) = parse_header(&header).ok_or(Error::MalformedHeader { offset: 0 })?;
    if dim == 0 || count == 0 {
        return Err(Error::MalformedHeader { offset: 0 });
    }

    let mut table = EmbeddingTable::with_dim(dim);
    table.matrix.reserve(count * dim);
    let mut raw = vec![0u8; dim * 4];
    let mut row = vec![0f32; dim];
    for found in 0..count {
        let entry_offset = r.offset;
        let token = match r.until(b' ')? {
            Some(t) => t,
            None => {
                return Err(Error::CountMismatch { expected: count, found, offset: entry_offset })
            }
        };
        // some writers put the newline before the token instead of after the row
        let token = token.strip_prefix(b"\n").unwrap_or(&token);
        let token = String::from_utf8_lossy(token).into_owned();
        r.exact(&mut raw)?;
        for (v, chunk) in row.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        }
        if !table.push(token.clone(), &row) {
            return Err(Error::DuplicateToken { token, offset: entry_offset });
        }
        if r.peek()? == Some(b'\n') {
            r.bump();
        }
    }
    Ok(table)
}

fn parse_header(bytes: &[u8]) -> Option<(usize, usize)> {
    let text = std::str::from_utf8(bytes).ok()?;
    let mut it = text.split_whitespace();
    let count = it.next()?.parse().ok()?;
    let dim = it.next()?.parse().ok()?;
    it.next().is_none().then_some((count, dim))
}

/// Parses whitespace-separated `token v1 … vdim` lines with an optional
/// `<count> <dim>` header. Without a header the dimension comes from the
/// first data line.
pub fn read_text<R: BufRead>(reader: R) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    let mut declared: Option<usize> = None;
    let mut header_dim: Option<usize> = None;
    let mut row = Vec::new();
    let mut last_line = 0;
    for (n, line) in reader.lines().enumerate() {
        let lineno = n + 1;
        last_line = lineno;
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => Error::Parse { line: lineno, msg: "invalid UTF-8".into() },
            _ => Error::Io(e),
        })?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if lineno == 1 && fields.len() == 2 {
            if let (Ok(c), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                declared = Some(c);
                header_dim = Some(d);
                continue;
            }
        }
        let (token, values) = fields.split_first().expect("non-empty");
        let dim = table.as_ref().map(|t| t.dim).or(header_dim).unwrap_or(values.len());
        if values.len() != dim || dim == 0 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected {dim} values, found {}", values.len()),
            });
        }
        row.clear();
        for v in values {
            let parsed: f32 = v
                .parse()
                .map_err(|_| Error::Parse { line: lineno, msg: format!("unparsable value {v:?}") })?;
            row.push(parsed);
        }
        let t = table.get_or_insert_with(|| EmbeddingTable::with_dim(dim));
        if !t.push(token.to_string(), &row) {
            return Err(Error::Parse { line: lineno, msg: format!("duplicate token {token:?}") });
        }
    }
    let table = table.ok_or(Error::Parse { line: last_line.max(1), msg: "no embeddings".into() })?;
    if let Some(expected) = declared {
        if expected != table.len() {
            return Err(Error::Parse {
                line: last_line,
                msg: format!("header declares {expected} entries, found {}", table.len()),
            });
        }
    }
    Ok(table)
}
