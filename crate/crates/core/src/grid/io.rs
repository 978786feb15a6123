//! SPE10-style ASCII permeability files and the binary `MRCMFIELD v1` dump.
//!
//! The ASCII layout is whitespace-separated reals: every K11 value x1-fastest,
//! then every K22 value, then every K33 value.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;

use super::{CellField, PermeabilityField, StructuredGrid};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

pub const FIELD_DUMP_MAGIC: &str = "MRCMFIELD v1";

/// Parses SPE10 ASCII content laid out on `dims`, keeping the zero-based
/// x3 layer range `layers` (all layers when `None`).
pub fn parse_spe10(
    text: &str,
    dims: [usize; 3],
    layers: Option<Range<usize>>,
    extents: [f64; 3],
) -> Result<PermeabilityField<f64>> {
    let n = dims[0] * dims[1] * dims[2];
    let mut values = Vec::with_capacity(3 * n);
    for (position, token) in text.split_ascii_whitespace().enumerate() {
        let v: f64 = token
            .parse()
            .map_err(|_| Error::Unparsable { token: token.to_string(), position })?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonPositivePermeability { index: position, value: v });
        }
        values.push(v);
    }
    if values.len() != 3 * n {
        return Err(Error::CountMismatch { expected: 3 * n, found: values.len() });
    }
    let layers = layers.unwrap_or(0..dims[2]);
    if layers.start >= layers.end || layers.end > dims[2] {
        return Err(invalid(format!("layer range {layers:?} outside 0..{}", dims[2])));
    }
    let sel = [dims[0], dims[1], layers.len()];
    let grid = StructuredGrid::new(sel, extents)?;
    let layer_size = dims[0] * dims[1];
    let comps = [0, 1, 2].map(|a| {
        let block = &values[a * n..(a + 1) * n];
        block[layers.start * layer_size..layers.end * layer_size].to_vec()
    });
    PermeabilityField::new(grid, comps)
}

pub fn import_spe10(
    path: impl AsRef<Path>,
    dims: [usize; 3],
    layers: Option<Range<usize>>,
    extents: [f64; 3],
) -> Result<PermeabilityField<f64>> {
    let text = fs::read_to_string(path)?;
    parse_spe10(&text, dims, layers, extents)
}

/// Writes the field in the same ASCII layout `import_spe10` reads. Values use
/// shortest round-trip formatting, so re-import is value-exact.
pub fn export_spe10<T: Real>(field: &PermeabilityField<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for a in 0..3 {
        for chunk in field.component(a).chunks(6) {
            let line: Vec<String> = chunk.iter().map(|v| format!("{}", v.to_f64_lossy())).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Header line followed by raw little-endian `f64` values, x1-fastest.
pub fn write_field_dump<T: Real>(path: impl AsRef<Path>, field: &CellField<T>) -> Result<()> {
    let [n1, n2, n3] = field.grid().dims();
    let mut w = BufWriter::new(fs::File::create(path)?);
    write!(w, "{FIELD_DUMP_MAGIC} {n1} {n2} {n3} f64 x-fastest\n")?;
    for v in field.values() {
        w.write_all(&v.to_f64_lossy().to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field_dump(path: impl AsRef<Path>) -> Result<([usize; 3], Vec<f64>)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| invalid("field dump has no header line"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| invalid("non-UTF-8 header"))?;
    let tokens: Vec<&str> = header.split(' ').collect();
    if tokens.len() != 7
        || tokens[0] != "MRCMFIELD"
        || tokens[1] != "v1"
        || tokens[5] != "f64"
        || tokens[6] != "x-fastest"
    {
        return Err(invalid(format!("unrecognised field dump header `{header}`")));
    }
    let mut dims = [0usize; 3];
    for a in 0..3 {
        dims[a] = tokens[2 + a]
            .parse()
            .map_err(|_| Error::Unparsable { token: tokens[2 + a].into(), position: 2 + a })?;
    }
    let n = dims[0] * dims[1] * dims[2];
    let body = &bytes[nl + 1..];
    if body.len() != 8 * n {
        return Err(Error::CountMismatch { expected: 8 * n, found: body.len() });
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((dims, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file() {
        let k = parse_spe10("1 2 3 4 5 6", [2, 1, 1], None, [2.0, 1.0, 1.0]).unwrap();
        assert_eq!(k.component(0), &[1.0, 2.0]);
        assert_eq!(k.component(1), &[3.0, 4.0]);
        assert_eq!(k.component(2), &[5.0, 6.0]);
    }

    #[test]
    fn truncated_file() {
        let err = parse_spe10("1 2 3 4 5", [2, 1, 1], None, [2.0, 1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::CountMismatch { expected: 6, found: 5 }));
    }

    #[test]
    fn zero_value_rejected() {
        let err = parse_spe10("1 2 3 0.0 5 6", [2, 1, 1], None, [2.0, 1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NonPositivePermeability { index: 3, .. }));
    }

    #[test]
    fn garbage_token_rejected() {
        let err = parse_spe10("1 2 x 4 5 6", [2, 1, 1], None, [2.0, 1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::Unparsable { position: 2, .. }));
    }

    #[test]
    fn layer_selection() {
        // dims (1,1,3): K11 = 1,2,3 ; K22 = 4,5,6 ; K33 = 7,8,9
        let k = parse_spe10("1 2 3 4 5 6 7 8 9", [1, 1, 3], Some(1..3), [1.0, 1.0, 2.0]).unwrap();
        assert_eq!(k.grid().dims(), [1, 1, 2]);
        assert_eq!(k.component(0), &[2.0, 3.0]);
        assert_eq!(k.component(2), &[8.0, 9.0]);
        assert!(parse_spe10("1 2 3 4 5 6 7 8 9", [1, 1, 3], Some(2..4), [1.0; 3]).is_err());
    }

    #[test]
    fn dump_header_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        let g = StructuredGrid::new([2, 1, 1], [2.0, 1.0, 1.0]).unwrap();
        write_field_dump(&p, &CellField::new(g, vec![1.5, -2.0]).unwrap()).unwrap();
        let bytes = fs::read(&p).unwrap();
        let header = b"MRCMFIELD v1 2 1 1 f64 x-fastest\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..header.len() + 8], &1.5f64.to_le_bytes());
        let (dims, values) = read_field_dump(&p).unwrap();
        assert_eq!(dims, [2, 1, 1]);
        assert_eq!(values, vec![1.5, -2.0]);
    }
}
