//! On-disk format for Monte-Carlo null tables.
//!
//! Layout (little-endian, format version 1):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "DKNT"
//! 4       4     format version (u32)
//! 8       1     statistic code (u8): 0 SS, 1 SRS, 2 MS, 3 MRS, 4 D, 5 DK,
//!               255 mixture LRT
//! 9       4     r (u32): block size for SS/SRS/D/DK, else 0
//! 13      4     j (u32): tested rank for MS/MRS, else 0
//! 17      4     m (u32): robustness trim for SRS/MRS, else 0
//! 21      4     n (u32): sample size the table was simulated at
//! 25      8     replicates (u64)
//! 33      8     seed (u64)
//! 41      8*R   the R statistic draws, ascending, as f64
//! ```
//!
//! Files are published atomically: writers fill a temporary sibling and
//! rename it into place, so concurrent readers only ever see complete
//! tables.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::statistics::{StatisticKind, StatisticSpec};
use crate::{Error, Result};

pub(crate) const FORMAT_VERSION: u32 = 1;
const MAGIC: [u8; 4] = *b"DKNT";
/// Statistic code reserved for mixture likelihood-ratio null tables.
pub(crate) const MIXTURE_LRT_CODE: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct TableHeader {
    pub kind_code: u8,
    pub r: u32,
    pub j: u32,
    pub m: u32,
    pub n: u32,
    pub replicates: u64,
    pub seed: u64,
}

impl TableHeader {
    pub fn for_spec(spec: &StatisticSpec, n: usize, replicates: usize, seed: u64) -> Self {
        let (r, j) = match spec.kind {
            StatisticKind::Ms | StatisticKind::Mrs => (0, spec.rank as u32),
            _ => (spec.rank as u32, 0),
        };
        Self {
            kind_code: spec.kind.code(),
            r,
            j,
            m: spec.trim.unwrap_or(0) as u32,
            n: n as u32,
            replicates: replicates as u64,
            seed,
        }
    }

    pub fn for_mixture(n: usize, replicates: usize, seed: u64) -> Self {
        Self {
            kind_code: MIXTURE_LRT_CODE,
            r: 0,
            j: 0,
            m: 0,
            n: n as u32,
            replicates: replicates as u64,
            seed,
        }
    }

    pub fn file_name(&self) -> String {
        format!(
            "dk-null-k{:03}-r{}-j{}-m{}-n{}-R{}-s{:016x}-v{}.bin",
            self.kind_code,
            self.r,
            self.j,
            self.m,
            self.n,
            self.replicates,
            self.seed,
            FORMAT_VERSION
        )
    }
}

pub(crate) fn write_table(dir: &Path, header: &TableHeader, values: &[f64]) -> Result<PathBuf> {
    debug_assert_eq!(values.len() as u64, header.replicates);
    fs::create_dir_all(dir)?;
    let final_path = dir.join(header.file_name());
    let tmp_path = dir.join(format!(
        ".{}.tmp-{}",
        header.file_name(),
        std::process::id()
    ));

    let mut buf = Vec::with_capacity(41 + values.len() * 8);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.push(header.kind_code);
    buf.extend_from_slice(&header.r.to_le_bytes());
    buf.extend_from_slice(&header.j.to_le_bytes());
    buf.extend_from_slice(&header.m.to_le_bytes());
    buf.extend_from_slice(&header.n.to_le_bytes());
    buf.extend_from_slice(&header.replicates.to_le_bytes());
    buf.extend_from_slice(&header.seed.to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }

    {
        let mut file = fs::File::create(&tmp_path)?;
        file.write_all(&buf)?;
        file.sync_all()?;
    }
    fs::rename(&tmp_path, &final_path)?;
    Ok(final_path)
}

pub(crate) fn read_table(path: &Path) -> Result<(TableHeader, Vec<f64>)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 41 {
        return Err(Error::Cache(format!("{}: truncated header", path.display())));
    }
    if bytes[0..4] != MAGIC {
        return Err(Error::Cache(format!("{}: bad magic", path.display())));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Cache(format!(
            "{}: format version {version}, expected {FORMAT_VERSION}",
            path.display()
        )));
    }
    let header = TableHeader {
        kind_code: bytes[8],
        r: u32::from_le_bytes(bytes[9..13].try_into().unwrap()),
        j: u32::from_le_bytes(bytes[13..17].try_into().unwrap()),
        m: u32::from_le_bytes(bytes[17..21].try_into().unwrap()),
        n: u32::from_le_bytes(bytes[21..25].try_into().unwrap()),
        replicates: u64::from_le_bytes(bytes[25..33].try_into().unwrap()),
        seed: u64::from_le_bytes(bytes[33..41].try_into().unwrap()),
    };
    let expected = 41 + header.replicates as usize * 8;
    if bytes.len() != expected {
        return Err(Error::Cache(format!(
            "{}: {} bytes, expected {expected}",
            path.display(),
            bytes.len()
        )));
    }
    let mut values = Vec::with_capacity(header.replicates as usize);
    for chunk in bytes[41..].chunks_exact(8) {
        values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    if values.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Cache(format!(
            "{}: values are not ascending",
            path.display()
        )));
    }
    Ok((header, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = StatisticSpec::mrs(1, 3).unwrap();
        let header = TableHeader::for_spec(&spec, 20, 4, 99);
        let values = vec![0.1, 0.2, 0.2, 5.0];
        let path = write_table(dir.path(), &header, &values).unwrap();
        let (read_header, read_values) = read_table(&path).unwrap();
        assert_eq!(read_header, header);
        assert_eq!(read_values, values);
        assert_eq!(read_header.j, 1);
        assert_eq!(read_header.r, 0);
        assert_eq!(read_header.m, 3);
    }

    #[test]
    fn rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"not a table").unwrap();
        assert!(read_table(&path).is_err());
    }
}
