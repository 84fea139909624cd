//! Little-endian read helpers shared by the binary file formats.

use std::io::Read;

use crate::error::{Error, Result};

pub(crate) fn read_magic<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(truncated)?;
    if &buf != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&buf),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("truncated file".into())
    } else {
        Error::Io(e)
    }
}

macro_rules! read_le {
    ($name:ident, $ty:ty) => {
        pub(crate) fn $name<R: Read>(r: &mut R) -> Result<$ty> {
            let mut buf = [0u8; std::mem::size_of::<$ty>()];
            r.read_exact(&mut buf).map_err(truncated)?;
            Ok(<$ty>::from_le_bytes(buf))
        }
    };
}

read_le!(read_u8, u8);
read_le!(read_u32, u32);
read_le!(read_u64, u64);
read_le!(read_f32, f32);
read_le!(read_f64, f64);

/// Reads `count` little-endian f32 values.
pub(crate) fn read_exact_array<R: Read>(r: &mut R, count: usize) -> Result<Vec<f32>> {
    // Guard absurd headers before allocating.
    if count > (1usize << 34) {
        return Err(Error::Format(format!("implausible element count {count}")));
    }
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes).map_err(truncated)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub(crate) fn write_f32s<W: std::io::Write>(w: &mut W, values: impl IntoIterator<Item = f32>) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}
