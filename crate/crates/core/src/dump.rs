//! Raw matrix dumps: a 16-byte header (4-byte magic, u32 version, u32 rows K,
//! u32 cols L) followed by K*L little-endian f32 values, row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub const DUMP_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpKind {
    /// Log-power features.
    Features,
    /// Speech presence probabilities.
    Spp,
    /// Noise PSD track.
    Noise,
    /// Spectral gain map.
    Gain,
}

impl DumpKind {
    pub const ALL: [DumpKind; 4] = [DumpKind::Features, DumpKind::Spp, DumpKind::Noise, DumpKind::Gain];

    pub fn from_magic(magic: &[u8]) -> Option<DumpKind> {
        Self::ALL.into_iter().find(|k| k.magic().as_slice() == magic)
    }

    pub fn magic(self) -> &'static [u8; 4] {
        match self {
            DumpKind::Features => b"SPPF",
            DumpKind::Spp => b"SPPP",
            DumpKind::Noise => b"SPPN",
            DumpKind::Gain => b"SPPG",
        }
    }

    fn name(self) -> &'static str {
        match self {
            DumpKind::Features => "feature dump",
            DumpKind::Spp => "SPP dump",
            DumpKind::Noise => "noise dump",
            DumpKind::Gain => "gain dump",
        }
    }
}

pub fn write_matrix<W: Write>(w: &mut W, kind: DumpKind, m: &Array2<f64>) -> std::io::Result<()> {
    let (rows, cols) = m.dim();
    w.write_all(kind.magic())?;
    w.write_all(&DUMP_VERSION.to_le_bytes())?;
    w.write_all(&(rows as u32).to_le_bytes())?;
    w.write_all(&(cols as u32).to_le_bytes())?;
    for &v in m.iter() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], what: impl FnOnce() -> String) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Truncated(what()),
        _ => Error::io("<stream>", e),
    })
}

pub(crate) fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_or(r, &mut b, || format!("{what} cut short"))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_matrix<R: Read>(r: &mut R, kind: DumpKind) -> Result<Array2<f64>> {
    let mut magic = [0u8; 4];
    read_exact_or(r, &mut magic, || format!("{} header cut short", kind.name()))?;
    if &magic != kind.magic() {
        return Err(Error::Format {
            what: kind.name(),
            detail: format!(
                "magic {:?}, expected {:?}",
                String::from_utf8_lossy(&magic),
                String::from_utf8_lossy(kind.magic())
            ),
        });
    }
    let version = read_u32(r, kind.name())?;
    if version != DUMP_VERSION {
        return Err(Error::Version { what: kind.name(), found: version, expected: DUMP_VERSION });
    }
    let rows = read_u32(r, kind.name())? as usize;
    let cols = read_u32(r, kind.name())? as usize;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format { what: kind.name(), detail: "dimensions overflow".into() })?;
    let mut bytes = vec![0u8; n * 4];
    read_exact_or(r, &mut bytes, || format!("{} body shorter than {rows}x{cols}", kind.name()))?;
    let data: Vec<f64> =
        bytes.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]]))).collect();
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Shape(e.to_string()))
}

pub fn save_dump(path: impl AsRef<Path>, kind: DumpKind, m: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_matrix(&mut w, kind, m).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn load_dump(path: impl AsRef<Path>, kind: DumpKind) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix(&mut BufReader::new(file), kind)
}

/// Loads a dump of any kind, identified by its magic.
pub fn load_any_dump(path: impl AsRef<Path>) -> Result<(DumpKind, Array2<f64>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let kind = bytes.get(..4).and_then(DumpKind::from_magic).ok_or_else(|| Error::Format {
        what: "dump",
        detail: format!("{}: not a SPPF/SPPP/SPPN/SPPG file", path.display()),
    })?;
    Ok((kind, read_matrix(&mut bytes.as_slice(), kind)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn any_dump_detects_kind() {
        let dir = tempfile::tempdir().unwrap();
        let m = array![[0.5, 2.0], [3.0, 0.25]];
        for kind in DumpKind::ALL {
            let p = dir.path().join("m.bin");
            save_dump(&p, kind, &m).unwrap();
            assert_eq!(load_any_dump(&p).unwrap(), (kind, m.clone()));
        }
        let p = dir.path().join("junk.bin");
        std::fs::write(&p, b"RIFF....").unwrap();
        assert!(matches!(load_any_dump(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        write_matrix(&mut buf, DumpKind::Spp, &array![[0.5, 1.0, 0.0], [0.25, 0.75, 0.125]]).unwrap();
        assert_eq!(&buf[..4], b"SPPP");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 3);
        assert_eq!(buf.len(), 16 + 6 * 4);
        assert_eq!(f32::from_le_bytes(buf[16..20].try_into().unwrap()), 0.5);
        // row-major: second value is (0,1)
        assert_eq!(f32::from_le_bytes(buf[20..24].try_into().unwrap()), 1.0);
    }

    #[test]
    fn wrong_magic_and_truncation() {
        let mut buf = Vec::new();
        write_matrix(&mut buf, DumpKind::Noise, &array![[1.0, 2.0]]).unwrap();
        let err = read_matrix(&mut buf.as_slice(), DumpKind::Spp).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        let err = read_matrix(&mut &buf[..buf.len() - 2], DumpKind::Noise).unwrap_err();
        assert!(matches!(err, Error::Truncated(_)));
        let mut bad_version = buf.clone();
        bad_version[4] = 9;
        assert!(matches!(
            read_matrix(&mut bad_version.as_slice(), DumpKind::Noise),
            Err(Error::Version { found: 9, .. })
        ));
    }

    proptest::proptest! {
        #[test]
        fn f32_values_survive(rows in 1usize..6, cols in 1usize..6, seed in proptest::prelude::any::<u32>()) {
            let m = Array2::from_shape_fn((rows, cols), |(r, c)| {
                f64::from(((seed as usize + r * 31 + c * 7) % 1000) as f32 / 7.0)
            });
            let mut buf = Vec::new();
            write_matrix(&mut buf, DumpKind::Features, &m).unwrap();
            let back = read_matrix(&mut buf.as_slice(), DumpKind::Features).unwrap();
            proptest::prop_assert_eq!(back, m);
        }
    }
}
