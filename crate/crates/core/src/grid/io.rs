//! The `CGOF` binary container.
//!
//! Layout, all little-endian: magic `CGOF`, `u32` version, grid origin
//! `3 x f64`, extent `3 x f64`, point counts `3 x u32`, `u8` rank tag, then
//! interleaved `(re, im)` `f64` pairs. Nodes are x-fastest and the components
//! of a node are contiguous. Rank tags: 0 scalar, 1 vector, 2 matrix (two
//! `u32` dimensions follow the tag, entries row-major), 3 two-form.

use super::{Grid, ScalarField, TwoForm, VectorField, C64};
use crate::error::{Error, Result};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"CGOF";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Container {
    Scalar(ScalarField),
    Vector(VectorField),
    Matrix { grid: Grid, rows: usize, cols: usize, entries: Vec<C64> },
    TwoForm(TwoForm),
}

impl Container {
    fn grid(&self) -> &Grid {
        match self {
            Container::Scalar(f) => &f.grid,
            Container::Vector(f) => &f.grid,
            Container::Matrix { grid, .. } => grid,
            Container::TwoForm(f) => &f.grid,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Container::Scalar(_) => 0,
            Container::Vector(_) => 1,
            Container::Matrix { .. } => 2,
            Container::TwoForm(_) => 3,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let g = self.grid();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for v in g.origin.iter().chain(g.extent.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &k in &g.n {
            out.extend_from_slice(&(k as u32).to_le_bytes());
        }
        out.push(self.rank());
        fn push(out: &mut Vec<u8>, z: &C64) {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        match self {
            Container::Scalar(f) => f.values.iter().for_each(|z| push(&mut out, z)),
            Container::Vector(VectorField { comps, .. }) | Container::TwoForm(TwoForm { comps, .. }) => {
                for i in 0..g.len() {
                    for c in comps {
                        push(&mut out, &c[i]);
                    }
                }
            }
            Container::Matrix { rows, cols, entries, .. } => {
                out.extend_from_slice(&(*rows as u32).to_le_bytes());
                out.extend_from_slice(&(*cols as u32).to_le_bytes());
                entries.iter().for_each(|z| push(&mut out, z));
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let mut origin = [0.0; 3];
        let mut extent = [0.0; 3];
        for v in origin.iter_mut().chain(extent.iter_mut()) {
            *v = r.f64()?;
        }
        let mut n = [0usize; 3];
        for k in n.iter_mut() {
            *k = r.u32()? as usize;
        }
        let grid = Grid::new(origin, extent, n)?;
        let rank = r.take(1)?[0];
        let out = match rank {
            0 => {
                let values = (0..grid.len()).map(|_| r.c64()).collect::<Result<Vec<_>>>()?;
                Container::Scalar(ScalarField::new(grid, values)?)
            }
            1 | 3 => {
                let mut comps = [vec![], vec![], vec![]];
                for _ in 0..grid.len() {
                    for c in comps.iter_mut() {
                        c.push(r.c64()?);
                    }
                }
                if rank == 1 {
                    Container::Vector(VectorField::new(grid, comps)?)
                } else {
                    Container::TwoForm(TwoForm { grid, comps })
                }
            }
            2 => {
                let rows = r.u32()? as usize;
                let cols = r.u32()? as usize;
                let entries = (0..rows * cols).map(|_| r.c64()).collect::<Result<Vec<_>>>()?;
                Container::Matrix { grid, rows, cols, entries }
            }
            t => return Err(Error::Format(format!("unknown rank tag {t}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.pos + k > self.bytes.len() {
            return Err(Error::Format("truncated container".into()));
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn c64(&mut self) -> Result<C64> {
        Ok(C64::new(self.f64()?, self.f64()?))
    }
}
