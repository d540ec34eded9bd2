//! `UDF1` field snapshots.
//!
//! Layout, all little-endian: the magic `UDF1`, then `u32` values
//! `n, N, Nt, r, kind, rep`, then `(re, im)` pairs of `f64` in row-major
//! order with time outermost. `kind` is 0 for spatial and 1 for space-time,
//! `rep` is 0 for physical and 1 for frequency. The time window and the
//! signature are not stored; the reader supplies them.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::field::{Field, Kind, Rep};
use crate::grid::Grid;

const MAGIC: &[u8; 4] = b"UDF1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub n: u32,
    pub points: u32,
    pub nt: u32,
    pub r: u32,
    pub kind: Kind,
    pub rep: Rep,
}

pub fn write_field(w: &mut impl Write, f: &Field) -> Result<()> {
    let g = f.grid();
    if g.points().iter().any(|&p| p != g.points()[0]) {
        return Err(Error::Format("snapshots need the same point count on every axis".into()));
    }
    let owned;
    let f = match f.rep() {
        Rep::Partial(_) => {
            owned = f.to_physical();
            &owned
        }
        _ => f,
    };
    w.write_all(MAGIC)?;
    let kind = match f.kind() {
        Kind::Spatial => 0u32,
        Kind::SpaceTime => 1,
    };
    let rep = u32::from(f.is_frequency());
    for v in [g.dim() as u32, g.points()[0] as u32, g.nt() as u32, g.r(), kind, rep] {
        w.write_all(&v.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(16 * f.data().len());
    for z in f.data() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_header(r: &mut impl Read) -> Result<Header> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::Format("file too short".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut vals = [0u32; 6];
    for v in vals.iter_mut() {
        let mut b = [0u8; 4];
        r.read_exact(&mut b).map_err(|_| Error::Format("truncated header".into()))?;
        *v = u32::from_le_bytes(b);
    }
    let kind = match vals[4] {
        0 => Kind::Spatial,
        1 => Kind::SpaceTime,
        k => return Err(Error::Format(format!("unknown kind {k}"))),
    };
    let rep = match vals[5] {
        0 => Rep::Physical,
        1 => Rep::Frequency,
        k => return Err(Error::Format(format!("unknown representation {k}"))),
    };
    Ok(Header { n: vals[0], points: vals[1], nt: vals[2], r: vals[3], kind, rep })
}

/// Read a snapshot; `t_half` and `eps` complete the grid description.
pub fn read_field(r: &mut impl Read, t_half: f64, eps: &[i8]) -> Result<Field> {
    let h = read_header(r)?;
    let grid = Grid::new(h.n as usize, h.points as usize, h.r, t_half, h.nt as usize, eps)?;
    let slices = match h.kind {
        Kind::Spatial => 1,
        Kind::SpaceTime => grid.nt(),
    };
    let count = slices * grid.len();
    let mut bytes = Vec::with_capacity(16 * count);
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 16 * count {
        return Err(Error::Format(format!("expected {} data bytes, found {}", 16 * count, bytes.len())));
    }
    let data = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            C64::new(re, im)
        })
        .collect();
    Field::from_vec(&grid, h.kind, h.rep, data)
}

pub fn save(path: &Path, f: &Field) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_field(&mut file, f)?;
    file.flush()?;
    Ok(())
}

pub fn load(path: &Path, t_half: f64, eps: &[i8]) -> Result<Field> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_field(&mut file, t_half, eps)
}
