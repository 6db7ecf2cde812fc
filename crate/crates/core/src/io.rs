//! Point files (JSON) and map files (text or binary).
//!
//! Text maps: a `PAPM 1 <H> <W>` header line, then `H` lines of `W`
//! space-separated reals. Binary maps: `b"PAPM"`, version byte `0x01`,
//! `H` and `W` as little-endian `u32`, then `H * W` little-endian `f64`
//! values in row-major order. [`read_field`] detects either form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{PapmError, Result};
use crate::types::{Field, GridMap, Point, PointSet};

const MAGIC: &[u8; 4] = b"PAPM";
const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFormat {
    Text,
    Binary,
}

#[derive(Deserialize)]
struct PointFile {
    image_width: i64,
    image_height: i64,
    points: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct PointFileOut<'a> {
    image_width: u32,
    image_height: u32,
    points: &'a [[f64; 2]],
}

pub fn read_points<R: Read>(source: R) -> Result<PointSet> {
    let raw: PointFile = serde_json::from_reader(source).map_err(|e| PapmError::Parse {
        field: json_field(&e.to_string()),
        message: e.to_string(),
    })?;
    let width = extent("image_width", raw.image_width)?;
    let height = extent("image_height", raw.image_height)?;
    let points = raw
        .points
        .into_iter()
        .map(|[x, y]| Point::new(x, y))
        .collect();
    PointSet::new(width, height, points)
}

pub fn write_points<W: Write>(points: &PointSet, mut sink: W) -> Result<()> {
    let pairs: Vec<[f64; 2]> = points.points().iter().map(|p| [p.x, p.y]).collect();
    let out = PointFileOut {
        image_width: points.width(),
        image_height: points.height(),
        points: &pairs,
    };
    serde_json::to_writer(&mut sink, &out).map_err(|e| PapmError::Io(e.into()))?;
    sink.write_all(b"\n")?;
    Ok(())
}

fn extent(field: &'static str, value: i64) -> Result<u32> {
    match u32::try_from(value) {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(PapmError::InvalidExtent { field, value }),
    }
}

fn json_field(message: &str) -> String {
    for key in ["image_width", "image_height", "points"] {
        if message.contains(key) {
            return key.to_string();
        }
    }
    "document".to_string()
}

pub fn write_field<W: Write>(field: &Field, mut sink: W, format: MapFormat) -> Result<()> {
    let (rows, cols) = (field.rows(), field.cols());
    match format {
        MapFormat::Text => {
            let mut out = String::with_capacity(16 + field.values().len() * 8);
            out.push_str(&format!("PAPM 1 {rows} {cols}\n"));
            for row in field.values().chunks(cols.max(1)).take(rows) {
                let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
            sink.write_all(out.as_bytes())?;
        }
        MapFormat::Binary => {
            let rows32 = u32::try_from(rows).map_err(|_| PapmError::invalid("rows", "exceeds u32"))?;
            let cols32 = u32::try_from(cols).map_err(|_| PapmError::invalid("cols", "exceeds u32"))?;
            let mut out = Vec::with_capacity(13 + 8 * field.values().len());
            out.extend_from_slice(MAGIC);
            out.push(VERSION);
            out.extend_from_slice(&rows32.to_le_bytes());
            out.extend_from_slice(&cols32.to_le_bytes());
            for v in field.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            sink.write_all(&out)?;
        }
    }
    Ok(())
}

pub fn write_map<W: Write>(map: &GridMap, sink: W, format: MapFormat) -> Result<()> {
    write_field(map.as_field(), sink, format)
}

/// Reads a text or binary map file without the nonnegativity check.
pub fn read_field<R: Read>(mut source: R) -> Result<Field> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    if bytes.len() >= 5 && &bytes[..4] == MAGIC && bytes[4] == VERSION {
        read_binary(&bytes[5..])
    } else if bytes.starts_with(b"PAPM ") {
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| PapmError::BadHeader("text map is not valid UTF-8".into()))?;
        read_text(text)
    } else {
        Err(PapmError::BadHeader("missing PAPM magic".into()))
    }
}

pub fn read_map<R: Read>(source: R) -> Result<GridMap> {
    GridMap::from_field(read_field(source)?)
}

fn read_binary(body: &[u8]) -> Result<Field> {
    if body.len() < 8 {
        return Err(PapmError::BadHeader("truncated binary header".into()));
    }
    let rows = u32::from_le_bytes(body[0..4].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(body[4..8].try_into().unwrap()) as usize;
    let payload = &body[8..];
    if payload.len() % 8 != 0 || payload.len() / 8 != rows * cols {
        return Err(PapmError::DimensionMismatch {
            expected: rows * cols,
            found: payload.len() / 8,
        });
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Field::new(rows, cols, values)
}

fn read_text(text: &str) -> Result<Field> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "PAPM" {
        return Err(PapmError::BadHeader(format!("unexpected header `{header}`")));
    }
    if parts[1] != "1" {
        return Err(PapmError::BadHeader(format!("unsupported version `{}`", parts[1])));
    }
    let dim = |s: &str, name: &str| {
        s.parse::<usize>()
            .map_err(|_| PapmError::BadHeader(format!("bad {name} `{s}`")))
    };
    let rows = dim(parts[2], "height")?;
    let cols = dim(parts[3], "width")?;
    let mut values = Vec::with_capacity(rows * cols);
    for (line_no, line) in lines.enumerate() {
        for tok in line.split_whitespace() {
            let v = tok.parse::<f64>().map_err(|_| PapmError::Parse {
                field: format!("line {}", line_no + 2),
                message: format!("`{tok}` is not a number"),
            })?;
            values.push(v);
        }
    }
    if values.len() != rows * cols {
        return Err(PapmError::DimensionMismatch {
            expected: rows * cols,
            found: values.len(),
        });
    }
    Field::new(rows, cols, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_empty_and_single_point_files() {
        let p = read_points(&br#"{"image_width":8,"image_height":8,"points":[]}"#[..]).unwrap();
        assert_eq!(p.count(), 0);
        let p = read_points(
            &br#"{"image_width":8,"image_height":8,"points":[[4.0,4.0]],"source":"x"}"#[..],
        )
        .unwrap();
        assert_eq!(p.count(), 1);
        assert_eq!(p.points()[0], Point::new(4.0, 4.0));
    }

    #[test]
    fn point_outside_extent_names_index() {
        let err =
            read_points(&br#"{"image_width":8,"image_height":8,"points":[[9.0,1.0]]}"#[..]).unwrap_err();
        assert!(matches!(err, PapmError::OutOfExtent { index: 0, .. }));
    }

    #[test]
    fn bad_extent_and_syntax_name_the_field() {
        let err = read_points(&br#"{"image_width":0,"image_height":8,"points":[]}"#[..]).unwrap_err();
        assert!(err.to_string().contains("image_width"));
        let err = read_points(&br#"{"image_width":4,"image_height":8}"#[..]).unwrap_err();
        assert!(matches!(err, PapmError::Parse { ref field, .. } if field == "points"));
        assert!(read_points(&b"{not json"[..]).is_err());
    }

    #[test]
    fn text_format_matches_canonical_bytes() {
        let map = GridMap::new(1, 1, vec![0.5]).unwrap();
        let mut buf = Vec::new();
        write_map(&map, &mut buf, MapFormat::Text).unwrap();
        assert_eq!(buf, b"PAPM 1 1 1\n0.5\n");
        assert_eq!(read_map(&buf[..]).unwrap(), map);
    }

    #[test]
    fn zero_map_round_trips() {
        let map = GridMap::new(2, 2, vec![0.0; 4]).unwrap();
        for fmt in [MapFormat::Text, MapFormat::Binary] {
            let mut buf = Vec::new();
            write_map(&map, &mut buf, fmt).unwrap();
            assert_eq!(read_map(&buf[..]).unwrap().total_mass(), 0.0);
        }
    }

    #[test]
    fn header_and_payload_errors() {
        assert!(matches!(
            read_map(&b"PAPX 1 1 1\n0\n"[..]),
            Err(PapmError::BadHeader(_))
        ));
        assert!(matches!(
            read_map(&b"PAPM 1 2 2\n0 0\n0\n"[..]),
            Err(PapmError::DimensionMismatch { expected: 4, found: 3 })
        ));
        let mut bin = b"PAPM\x01".to_vec();
        bin.extend_from_slice(&2u32.to_le_bytes());
        bin.extend_from_slice(&1u32.to_le_bytes());
        bin.extend_from_slice(&1.0f64.to_le_bytes());
        assert!(matches!(
            read_map(&bin[..]),
            Err(PapmError::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn binary_layout_is_little_endian() {
        let map = GridMap::new(1, 2, vec![1.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        write_map(&map, &mut buf, MapFormat::Binary).unwrap();
        assert_eq!(&buf[..5], b"PAPM\x01");
        assert_eq!(&buf[5..9], &1u32.to_le_bytes());
        assert_eq!(&buf[9..13], &2u32.to_le_bytes());
        assert_eq!(&buf[13..21], &1.0f64.to_le_bytes());
        assert_eq!(buf.len(), 13 + 16);
    }

    #[test]
    fn signed_fields_round_trip_as_text() {
        let f = Field::new(1, 3, vec![-0.25, 1e-300, 3.0]).unwrap();
        let mut buf = Vec::new();
        write_field(&f, &mut buf, MapFormat::Text).unwrap();
        assert_eq!(read_field(&buf[..]).unwrap(), f);
        assert!(read_map(&buf[..]).is_err());
    }
}
