//! Binary snapshot of the recursive state, for stopping and resuming a stream.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      4 bytes  "FGMS"
//! version    u32      1
//! dim        u32
//! grid_len   u32
//! grid       grid_len x f64
//! count      u64
//! gamma      f64
//! alpha      f64
//! floor      f64
//! norm       u8       0 = quadrature, 1 = euclidean
//! current    dim*grid_len x f64   (row-major by covariate)
//! average    dim*grid_len x f64
//! seed       u64      master bootstrap seed
//! chains     u32
//! per chain:
//!   iterate  dim*grid_len x f64
//!   average  dim*grid_len x f64
//!   rng key  32 bytes
//!   stream   u64
//!   word_pos u128
//! ```

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use fosr_gm::rng::RngState;
use fosr_gm::{BootstrapChain, CoefficientField, GmState, Grid, InferenceEngine, ResidualNorm, StepSchedule};

use crate::error::{CliError, IoContext, Result};

pub const MAGIC: &[u8; 4] = b"FGMS";
pub const VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Snapshot(msg.into())
}

struct Writer<W: Write> {
    inner: W,
}

impl<W: Write> Writer<W> {
    fn bytes(&mut self, b: &[u8]) -> io::Result<()> {
        self.inner.write_all(b)
    }

    fn u32(&mut self, v: u32) -> io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    fn u64(&mut self, v: u64) -> io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    fn f64(&mut self, v: f64) -> io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    fn field(&mut self, f: &CoefficientField) -> io::Result<()> {
        f.values().iter().try_for_each(|v| self.f64(*v))
    }
}

struct Reader<'a> {
    data: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() < n {
            return Err(bad("truncated"));
        }
        let (head, tail) = self.data.split_at(n);
        self.data = tail;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn field(&mut self, dim: usize, grid: &Grid) -> Result<CoefficientField> {
        let values = (0..dim * grid.len()).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Ok(CoefficientField::from_values(dim, grid.clone(), values)?)
    }
}

pub fn encode<W: Write>(engine: &InferenceEngine, out: W) -> io::Result<()> {
    let gm = engine.estimator();
    let mut w = Writer { inner: out };
    w.bytes(MAGIC)?;
    w.u32(VERSION)?;
    w.u32(gm.dim() as u32)?;
    w.u32(gm.grid().len() as u32)?;
    for t in gm.grid().points() {
        w.f64(*t)?;
    }
    w.u64(gm.count())?;
    w.f64(gm.schedule().gamma)?;
    w.f64(gm.schedule().alpha)?;
    w.f64(gm.floor())?;
    w.bytes(&[match gm.norm() {
        ResidualNorm::Quadrature => 0,
        ResidualNorm::Euclidean => 1,
    }])?;
    w.field(gm.current())?;
    w.field(gm.average())?;
    w.u64(engine.master_seed())?;
    w.u32(engine.chain_count() as u32)?;
    for c in engine.chains() {
        w.field(c.iterate())?;
        w.field(c.average())?;
        let rng = c.rng_state();
        w.bytes(&rng.seed)?;
        w.u64(rng.stream)?;
        w.bytes(&rng.word_pos.to_le_bytes())?;
    }
    Ok(())
}

pub fn decode(data: &[u8]) -> Result<InferenceEngine> {
    let mut r = Reader { data };
    if r.take(4)? != MAGIC {
        return Err(bad("not a snapshot file"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let dim = r.u32()? as usize;
    let m = r.u32()? as usize;
    if dim == 0 || m < 2 {
        return Err(bad("empty state"));
    }
    let points = (0..m).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let grid = Grid::new(points)?;
    let count = r.u64()?;
    let schedule = StepSchedule::new(r.f64()?, r.f64()?)?;
    let floor = r.f64()?;
    let norm = match r.take(1)?[0] {
        0 => ResidualNorm::Quadrature,
        1 => ResidualNorm::Euclidean,
        k => return Err(bad(format!("unknown norm tag {k}"))),
    };
    let current = r.field(dim, &grid)?;
    let average = r.field(dim, &grid)?;
    let gm = GmState::from_parts(current, average, count, schedule, floor, norm)?;
    let seed = r.u64()?;
    let chains = r.u32()? as usize;
    let mut out = Vec::with_capacity(chains);
    for _ in 0..chains {
        let iterate = r.field(dim, &grid)?;
        let avg = r.field(dim, &grid)?;
        let state = RngState {
            seed: r.array()?,
            stream: r.u64()?,
            word_pos: r.u128()?,
        };
        out.push(BootstrapChain::from_parts(iterate, avg, state)?);
    }
    if !r.data.is_empty() {
        return Err(bad("trailing bytes"));
    }
    Ok(InferenceEngine::from_parts(gm, out, seed)?)
}

pub fn save(engine: &InferenceEngine, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    encode(engine, &mut buf).at(path)?;
    fs::write(path, buf).at(path)
}

pub fn load(path: &Path) -> Result<InferenceEngine> {
    let mut data = Vec::new();
    fs::File::open(path).at(path)?.read_to_end(&mut data).at(path)?;
    decode(&data)
}
