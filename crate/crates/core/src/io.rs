//! Bit-table files: comma-separated `0`/`1` text and the packed `PSYN1` binary.
//!
//! Packed layout: the 5 magic bytes `PSYN1`, then `p` and `n` as little-endian
//! `u64`, then the `n·p` bits in row-major order, eight per byte with the
//! first bit in the least significant position. Unused bits of the last byte
//! are zero.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::cube::{CubePoint, Dataset};
use crate::error::{Error, Result};

pub const PACKED_MAGIC: &[u8; 5] = b"PSYN1";
const PACKED_HEADER_LEN: usize = 5 + 8 + 8;

/// A rectangular `n × p` table of bits with optional column names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitTable {
    header: Option<Vec<String>>,
    width: usize,
    /// Row-major, one byte (0 or 1) per cell.
    bits: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Packed,
    /// Packed if the file starts with the magic bytes, CSV otherwise.
    Auto,
}

impl BitTable {
    pub fn new(header: Option<Vec<String>>, width: usize, bits: Vec<u8>) -> Result<Self> {
        if width == 0 {
            if !bits.is_empty() {
                return Err(Error::input("zero-width table with cells"));
            }
        } else if !bits.len().is_multiple_of(width) {
            return Err(Error::input(format!(
                "{} cells do not form rows of width {width}",
                bits.len()
            )));
        }
        if let Some(i) = bits.iter().position(|&b| b > 1) {
            return Err(Error::input(format!("cell {i} holds {}, expected 0 or 1", bits[i])));
        }
        if let Some(h) = &header {
            if h.len() != width {
                return Err(Error::input(format!("{} column names for width {width}", h.len())));
            }
        }
        Ok(BitTable { header, width, bits })
    }

    pub fn header(&self) -> Option<&[String]> {
        self.header.as_deref()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> usize {
        self.bits.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.bits[i * self.width..(i + 1) * self.width]
    }

    pub fn from_dataset(data: &Dataset, header: Option<Vec<String>>) -> Result<Self> {
        let bits = data
            .iter()
            .flat_map(|x| x.coords().iter().map(|&c| u8::from(c > 0)))
            .collect();
        BitTable::new(header, data.dim(), bits)
    }

    /// Bit `b` becomes sign `2b − 1`.
    pub fn to_dataset(&self) -> Result<Dataset> {
        if self.rows() == 0 {
            return Err(Error::input("table has no rows"));
        }
        let rows = (0..self.rows())
            .map(|i| CubePoint::new(self.row(i).iter().map(|&b| 2 * b as i8 - 1).collect()))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(self.width, rows)
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .split('\n')
            .map(|l| l.strip_suffix('\r').unwrap_or(l))
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .peekable();
        let Some(&(first_no, first)) = lines.peek() else {
            return Err(Error::input("file is empty"));
        };
        let tokens: Vec<&str> = first.split(',').map(str::trim).collect();
        let bit_tokens = tokens.iter().filter(|t| is_bit(t)).count();
        let header = if bit_tokens == 0 {
            lines.next();
            Some(tokens.iter().map(|t| t.to_string()).collect::<Vec<_>>())
        } else if bit_tokens < tokens.len() {
            return Err(Error::parse(
                format!("line {}", first_no + 1),
                "mixes bits and column names",
            ));
        } else {
            None
        };
        let width = tokens.len();
        let mut bits = Vec::with_capacity(width * text.len() / (2 * width.max(1)));
        for (no, line) in lines {
            let before = bits.len();
            for (col, tok) in line.split(',').enumerate() {
                let tok = tok.trim();
                let b = match tok {
                    "0" => 0,
                    "1" => 1,
                    _ => {
                        return Err(Error::parse(
                            format!("line {}, column {}", no + 1, col + 1),
                            format!("expected 0 or 1, found {tok:?}"),
                        ))
                    }
                };
                bits.push(b);
            }
            let got = bits.len() - before;
            if got != width {
                return Err(Error::parse(
                    format!("line {}", no + 1),
                    format!("row has {got} fields, expected {width}"),
                ));
            }
        }
        if bits.is_empty() {
            return Err(Error::input("file has a header but no rows"));
        }
        BitTable::new(header, width, bits)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.bits.len() * 2 + 64);
        if let Some(h) = &self.header {
            out.push_str(&h.join(","));
            out.push('\n');
        }
        for i in 0..self.rows() {
            for (j, &b) in self.row(i).iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                out.push(if b == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_packed(bytes: &[u8]) -> Result<Self> {
        if bytes.is_empty() {
            return Err(Error::input("file is empty"));
        }
        if bytes.len() < PACKED_MAGIC.len() || &bytes[..PACKED_MAGIC.len()] != PACKED_MAGIC {
            return Err(Error::parse("offset 0", "missing PSYN1 magic bytes"));
        }
        if bytes.len() < PACKED_HEADER_LEN {
            return Err(Error::parse(
                format!("offset {}", bytes.len()),
                "truncated header",
            ));
        }
        let read_u64 = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
        let (p, n) = (read_u64(5), read_u64(13));
        let cells = p
            .checked_mul(n)
            .and_then(|c| usize::try_from(c).ok())
            .ok_or_else(|| Error::parse("offset 5", format!("{n} rows of width {p} overflow")))?;
        let payload = &bytes[PACKED_HEADER_LEN..];
        let need = cells.div_ceil(8);
        if payload.len() != need {
            return Err(Error::parse(
                format!("offset {}", PACKED_HEADER_LEN + payload.len().min(need)),
                format!("payload has {} bytes, expected {need}", payload.len()),
            ));
        }
        if cells % 8 != 0 && payload[need - 1] >> (cells % 8) != 0 {
            return Err(Error::parse(
                format!("offset {}", PACKED_HEADER_LEN + need - 1),
                "nonzero padding bits",
            ));
        }
        let bits = (0..cells).map(|i| payload[i / 8] >> (i % 8) & 1).collect();
        BitTable::new(None, p as usize, bits)
    }

    /// Column names are not stored in the packed form.
    pub fn to_packed(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(PACKED_HEADER_LEN + self.bits.len().div_ceil(8));
        out.extend_from_slice(PACKED_MAGIC);
        out.extend_from_slice(&(self.width as u64).to_le_bytes());
        out.extend_from_slice(&(self.rows() as u64).to_le_bytes());
        for chunk in self.bits.chunks(8) {
            out.push(chunk.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | b << i));
        }
        out
    }
}

fn is_bit(tok: &str) -> bool {
    tok == "0" || tok == "1"
}

pub fn ingest_table(path: &Path, format: Format) -> Result<BitTable> {
    parse_table(&fs::read(path)?, format)
}

pub fn parse_table(bytes: &[u8], format: Format) -> Result<BitTable> {
    let packed = match format {
        Format::Packed => true,
        Format::Csv => false,
        Format::Auto => bytes.starts_with(PACKED_MAGIC),
    };
    if packed {
        BitTable::parse_packed(bytes)
    } else {
        let text = std::str::from_utf8(bytes).map_err(|e| {
            Error::parse(format!("byte {}", e.valid_up_to()), "file is not valid UTF-8")
        })?;
        BitTable::parse_csv(text)
    }
}

pub fn ingest(path: &Path, format: Format) -> Result<Dataset> {
    ingest_table(path, format)?.to_dataset()
}

/// Writes `table` to `path`; [`Format::Auto`] writes CSV.
pub fn emit(table: &BitTable, path: &Path, format: Format) -> Result<()> {
    let bytes = match format {
        Format::Packed => table.to_packed(),
        Format::Csv | Format::Auto => table.to_csv().into_bytes(),
    };
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_bits_map_to_signs() {
        let t = BitTable::parse_csv("1,0\n0,1").unwrap();
        let x = t.to_dataset().unwrap();
        assert_eq!(x.row(0).coords(), &[1, -1]);
        assert_eq!(x.row(1).coords(), &[-1, 1]);
    }

    #[test]
    fn header_and_crlf() {
        let t = BitTable::parse_csv("a,b,c\r\n1,1,0\r\n0,0,1\r\n").unwrap();
        assert_eq!(t.header().unwrap(), &["a", "b", "c"]);
        assert_eq!(t.rows(), 2);
        assert_eq!(BitTable::parse_csv(&t.to_csv()).unwrap(), t);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(BitTable::parse_csv(""), Err(Error::Input(_))));
        assert!(matches!(BitTable::parse_csv("\n\n"), Err(Error::Input(_))));
        assert!(matches!(BitTable::parse_csv("x,y\n"), Err(Error::Input(_))));
        match BitTable::parse_csv("1,0\n1\n") {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "line 2"),
            other => panic!("{other:?}"),
        }
        match BitTable::parse_csv("1,0\n1,2\n") {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "line 2, column 2"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(BitTable::parse_csv("a,1\n1,0\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn packed_round_trip_and_layout() {
        let t = BitTable::new(None, 3, vec![1, 0, 1, 1, 1, 0]).unwrap();
        let bytes = t.to_packed();
        assert_eq!(&bytes[..5], b"PSYN1");
        assert_eq!(u64::from_le_bytes(bytes[5..13].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[13..21].try_into().unwrap()), 2);
        assert_eq!(bytes[21..], [0b0001_1101]);
        assert_eq!(BitTable::parse_packed(&bytes).unwrap(), t);
    }

    #[test]
    fn packed_errors() {
        assert!(matches!(BitTable::parse_packed(b"PSYN2xxxxxxxxxxxxxxxx"), Err(Error::Parse { .. })));
        let t = BitTable::new(None, 3, vec![1, 0, 1]).unwrap();
        let mut bytes = t.to_packed();
        bytes[21] |= 0x80;
        assert!(matches!(BitTable::parse_packed(&bytes), Err(Error::Parse { .. })));
        bytes.push(0);
        assert!(matches!(BitTable::parse_packed(&bytes), Err(Error::Parse { .. })));
        assert!(matches!(BitTable::parse_packed(&bytes[..12]), Err(Error::Parse { .. })));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = BitTable::new(Some(vec!["u".into(), "v".into()]), 2, vec![0, 1, 1, 1, 0, 0]).unwrap();
        for (name, fmt) in [("a.csv", Format::Csv), ("a.bin", Format::Packed)] {
            let path = dir.path().join(name);
            emit(&t, &path, fmt).unwrap();
            let back = ingest_table(&path, Format::Auto).unwrap();
            assert_eq!(back.to_dataset().unwrap(), t.to_dataset().unwrap());
        }
    }
}
