//! Line-delimited JSON datasets.
//!
//! An optional first line `{"format_version":1}` is followed by one record
//! per line:
//!
//! ```text
//! {"source_id":"img0/12","width":4,"height":4,"qp":22,"coeffs":[5,2,0,0,1,0,0,0,0,0,0,0,0,0,0,0],"rate":17.0}
//! ```
//!
//! `coeffs` is row-major. Blank lines are ignored.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::block::{CoeffBlock, DatasetRecord};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    source_id: String,
    width: usize,
    height: usize,
    qp: i32,
    coeffs: Vec<i32>,
    rate: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub format_version: u32,
    pub records: Vec<DatasetRecord>,
}

impl DatasetFile {
    pub fn new(records: Vec<DatasetRecord>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            records,
        }
    }
}

/// Streaming record reader; holds one line in memory at a time.
pub struct DatasetReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    format_version: u32,
}

impl<R: BufRead> DatasetReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line_no: 0,
            format_version: FORMAT_VERSION,
        }
    }

    pub fn format_version(&self) -> u32 {
        self.format_version
    }

    fn parse_line(&mut self, line: &str) -> Result<Option<DatasetRecord>> {
        let err = |reason: String| Error::Parse {
            line: self.line_no,
            reason,
        };
        if line.contains("\"format_version\"") {
            let h: Header = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            if h.format_version != FORMAT_VERSION {
                return Err(err(format!("unsupported format version {}", h.format_version)));
            }
            self.format_version = h.format_version;
            return Ok(None);
        }
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let id = raw.source_id.clone();
        let block = CoeffBlock::new(raw.width, raw.height, raw.coeffs, raw.qp, raw.source_id)
            .map_err(|e| err(e.to_string()))?;
        let rec = DatasetRecord::new(block, raw.rate).map_err(|e| err(format!("{id}: {e}")))?;
        Ok(Some(rec))
    }
}

impl<R: BufRead> Iterator for DatasetReader<R> {
    type Item = Result<DatasetRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            match self.parse_line(&line) {
                Ok(Some(rec)) => return Some(Ok(rec)),
                Ok(None) => continue,
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<DatasetFile> {
    let mut reader = DatasetReader::new(BufReader::new(File::open(path)?));
    let records = reader.by_ref().collect::<Result<Vec<_>>>()?;
    Ok(DatasetFile {
        format_version: reader.format_version(),
        records,
    })
}

pub fn write_records<W: Write>(mut out: W, records: &[DatasetRecord]) -> Result<()> {
    serde_json::to_writer(&mut out, &Header {
        format_version: FORMAT_VERSION,
    })?;
    writeln!(out)?;
    for r in records {
        let raw = RawRecord {
            source_id: r.block.source_id().to_owned(),
            width: r.block.width(),
            height: r.block.height(),
            qp: r.block.qp(),
            coeffs: r.block.coeffs().to_vec(),
            rate: r.rate_bits(),
        };
        serde_json::to_writer(&mut out, &raw)?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_dataset(file: &DatasetFile, path: impl AsRef<Path>) -> Result<()> {
    write_records(BufWriter::new(File::create(path)?), &file.records)
}
