//! Binary persistence for snapshot sets, POD bases and reduced operators.
//!
//! All numbers are 64-bit little-endian. A field block is
//!
//! ```text
//! "SFVROM1\0" nx:u64 ny:u64 lx:f64 ly:f64 tag:u64 n_params:u64 params:f64* time:f64 values:f64*
//! ```
//!
//! and a snapshot file is a plain concatenation of blocks. Basis and
//! operator files start with their own header carrying the grid and a
//! configuration fingerprint, so artifacts built for another setup are
//! refused at load time.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use sfrom_core::fv::FluxMode;
use sfrom_core::linalg::DenseMatrix;
use sfrom_core::pod::{PodBasis, SnapshotSet, Truncation};
use sfrom_core::rom::ReducedOperators;
use sfrom_core::{FieldKind, ScalarField, StructuredGrid};

pub const FIELD_MAGIC: &[u8; 8] = b"SFVROM1\0";
pub const BASIS_MAGIC: &[u8; 8] = b"SFVPOD1\0";
pub const OPERATORS_MAGIC: &[u8; 8] = b"SFVOPS1\0";

/// Upper bound on any length read from a header, to reject garbage early.
const MAX_LEN: u64 = 1 << 32;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: not a {expected} file", path.display())]
    Magic { path: PathBuf, expected: &'static str },
    #[error("{}: {message}", path.display())]
    Corrupt { path: PathBuf, message: String },
    #[error("{}: fingerprint mismatch: file has {found}, pipeline expects {expected}", path.display())]
    Fingerprint {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{}: {source}", path.display())]
    Core { path: PathBuf, source: sfrom_core::Error },
}

/// What an artifact must match to be accepted by a pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fingerprint {
    pub grid: StructuredGrid,
    /// Hash of the configuration the artifact was built from; 0 means "not tied to a config".
    pub config: u64,
}

impl Fingerprint {
    pub fn grid_only(grid: StructuredGrid) -> Self {
        Self { grid, config: 0 }
    }

    fn check(&self, path: &Path, found: &Fingerprint) -> Result<(), FormatError> {
        let grid_ok = self.grid == found.grid;
        let config_ok = self.config == 0 || found.config == 0 || self.config == found.config;
        if grid_ok && config_ok {
            return Ok(());
        }
        Err(FormatError::Fingerprint {
            path: path.to_path_buf(),
            expected: self.describe(),
            found: found.describe(),
        })
    }

    fn describe(&self) -> String {
        let g = &self.grid;
        format!(
            "{}x{} grid on {}x{} (config {:016x})",
            g.nx(),
            g.ny(),
            g.lx(),
            g.ly(),
            self.config
        )
    }
}

/// FNV-1a, used to fingerprint configurations. Stable across builds and platforms.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

struct Writer {
    path: PathBuf,
    out: BufWriter<File>,
}

impl Writer {
    fn create(path: &Path) -> Result<Self, FormatError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|source| FormatError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
        }
        let file = File::create(path).map_err(|source| FormatError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    fn bytes(&mut self, b: &[u8]) -> Result<(), FormatError> {
        self.out.write_all(b).map_err(|source| FormatError::Io {
            path: self.path.clone(),
            source,
        })
    }

    fn u64(&mut self, v: u64) -> Result<(), FormatError> {
        self.bytes(&v.to_le_bytes())
    }

    fn f64(&mut self, v: f64) -> Result<(), FormatError> {
        self.bytes(&v.to_le_bytes())
    }

    fn f64s(&mut self, v: &[f64]) -> Result<(), FormatError> {
        let mut buf = Vec::with_capacity(v.len() * 8);
        for x in v {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        self.bytes(&buf)
    }

    fn grid(&mut self, g: &StructuredGrid) -> Result<(), FormatError> {
        self.u64(g.nx() as u64)?;
        self.u64(g.ny() as u64)?;
        self.f64(g.lx())?;
        self.f64(g.ly())
    }

    fn block(&mut self, params: &[f64], time: f64, field: &ScalarField) -> Result<(), FormatError> {
        self.bytes(FIELD_MAGIC)?;
        self.grid(field.grid())?;
        self.u64(field.kind().tag())?;
        self.u64(params.len() as u64)?;
        self.f64s(params)?;
        self.f64(time)?;
        self.f64s(field.values())
    }

    fn matrix(&mut self, m: &DenseMatrix) -> Result<(), FormatError> {
        self.u64(m.rows() as u64)?;
        self.u64(m.cols() as u64)?;
        self.f64s(m.as_slice())
    }

    fn finish(mut self) -> Result<(), FormatError> {
        self.out.flush().map_err(|source| FormatError::Io {
            path: self.path,
            source,
        })
    }
}

struct Reader {
    path: PathBuf,
    input: BufReader<File>,
}

impl Reader {
    fn open(path: &Path) -> Result<Self, FormatError> {
        let file = File::open(path).map_err(|source| FormatError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self {
            path: path.to_path_buf(),
            input: BufReader::new(file),
        })
    }

    fn corrupt(&self, message: impl Into<String>) -> FormatError {
        FormatError::Corrupt {
            path: self.path.clone(),
            message: message.into(),
        }
    }

    fn core(&self, source: sfrom_core::Error) -> FormatError {
        FormatError::Core {
            path: self.path.clone(),
            source,
        }
    }

    fn exact(&mut self, buf: &mut [u8]) -> Result<(), FormatError> {
        self.input.read_exact(buf).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => self.corrupt("truncated file"),
            _ => FormatError::Io {
                path: self.path.clone(),
                source: e,
            },
        })
    }

    /// Reads a magic tag; `Ok(false)` on a clean end of file.
    fn magic_or_eof(&mut self, magic: &[u8; 8], expected: &'static str) -> Result<bool, FormatError> {
        let mut buf = [0u8; 8];
        let mut filled = 0;
        while filled < 8 {
            let n = self.input.read(&mut buf[filled..]).map_err(|source| FormatError::Io {
                path: self.path.clone(),
                source,
            })?;
            if n == 0 {
                break;
            }
            filled += n;
        }
        match filled {
            0 => Ok(false),
            8 if &buf == magic => Ok(true),
            8 => Err(FormatError::Magic {
                path: self.path.clone(),
                expected,
            }),
            _ => Err(self.corrupt("truncated file")),
        }
    }

    fn magic(&mut self, magic: &[u8; 8], expected: &'static str) -> Result<(), FormatError> {
        if self.magic_or_eof(magic, expected)? {
            Ok(())
        } else {
            Err(FormatError::Magic {
                path: self.path.clone(),
                expected,
            })
        }
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        let mut b = [0u8; 8];
        self.exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn len(&mut self) -> Result<usize, FormatError> {
        let v = self.u64()?;
        if v > MAX_LEN {
            return Err(self.corrupt(format!("implausible length {v}")));
        }
        Ok(v as usize)
    }

    fn f64(&mut self) -> Result<f64, FormatError> {
        let mut b = [0u8; 8];
        self.exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, FormatError> {
        let mut buf = vec![0u8; n * 8];
        self.exact(&mut buf)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn grid(&mut self) -> Result<StructuredGrid, FormatError> {
        let nx = self.len()?;
        let ny = self.len()?;
        let lx = self.f64()?;
        let ly = self.f64()?;
        StructuredGrid::new(nx, ny, lx, ly).map_err(|e| self.core(e))
    }

    fn kind(&mut self) -> Result<FieldKind, FormatError> {
        let tag = self.u64()?;
        FieldKind::from_tag(tag).ok_or_else(|| self.corrupt(format!("unknown field tag {tag}")))
    }

    /// Body of a field block after its magic.
    fn block_body(&mut self) -> Result<(Vec<f64>, f64, ScalarField), FormatError> {
        let grid = self.grid()?;
        let kind = self.kind()?;
        let n_params = self.len()?;
        let params = self.f64s(n_params)?;
        let time = self.f64()?;
        let values = self.f64s(grid.cell_count())?;
        let field = ScalarField::from_values(grid, kind, values).map_err(|e| self.core(e))?;
        Ok((params, time, field))
    }

    fn matrix(&mut self) -> Result<DenseMatrix, FormatError> {
        let rows = self.len()?;
        let cols = self.len()?;
        let data = self.f64s(rows * cols)?;
        DenseMatrix::from_row_major(rows, cols, data).map_err(|e| self.core(e))
    }

    fn expect_end(&mut self) -> Result<(), FormatError> {
        let mut b = [0u8; 1];
        match self.input.read(&mut b) {
            Ok(0) => Ok(()),
            Ok(_) => Err(self.corrupt("trailing bytes after payload")),
            Err(source) => Err(FormatError::Io {
                path: self.path.clone(),
                source,
            }),
        }
    }
}

/// Writes a single field as one block.
pub fn write_field(path: &Path, params: &[f64], time: f64, field: &ScalarField) -> Result<(), FormatError> {
    let mut w = Writer::create(path)?;
    w.block(params, time, field)?;
    w.finish()
}

pub fn write_snapshots(path: &Path, set: &SnapshotSet) -> Result<(), FormatError> {
    let mut w = Writer::create(path)?;
    for s in set.snapshots() {
        w.block(&s.parameters, s.time, &s.field)?;
    }
    w.finish()
}

/// Reads a snapshot file. An empty file is rejected because it carries no grid.
pub fn read_snapshots(path: &Path, expect: Option<&StructuredGrid>) -> Result<SnapshotSet, FormatError> {
    let mut r = Reader::open(path)?;
    let mut set: Option<SnapshotSet> = None;
    while r.magic_or_eof(FIELD_MAGIC, "snapshot")? {
        let (params, time, field) = r.block_body()?;
        if let Some(g) = expect {
            Fingerprint::grid_only(*g).check(path, &Fingerprint::grid_only(*field.grid()))?;
        }
        let s = set.get_or_insert_with(|| SnapshotSet::new(field.kind(), *field.grid()));
        s.push(params, time, field).map_err(|e| r.core(e))?;
    }
    set.ok_or_else(|| r.corrupt("no snapshot blocks"))
}

fn truncation_code(t: Truncation) -> (u64, f64) {
    match t {
        Truncation::Threshold(v) => (0, v),
        Truncation::Count(n) => (1, n as f64),
        Truncation::FullRank => (2, 0.0),
    }
}

pub fn write_basis(path: &Path, basis: &PodBasis, config: u64) -> Result<(), FormatError> {
    let mut w = Writer::create(path)?;
    w.bytes(BASIS_MAGIC)?;
    w.grid(basis.grid())?;
    w.u64(config)?;
    w.u64(basis.kind().tag())?;
    let (code, value) = truncation_code(basis.truncation());
    w.u64(code)?;
    w.f64(value)?;
    w.u64(basis.eigenvalues().len() as u64)?;
    w.f64s(basis.eigenvalues())?;
    w.u64(basis.len() as u64)?;
    for (k, mode) in basis.modes().iter().enumerate() {
        w.block(&[], k as f64, mode)?;
    }
    w.finish()
}

pub fn read_basis(path: &Path, expect: Option<&Fingerprint>) -> Result<PodBasis, FormatError> {
    let mut r = Reader::open(path)?;
    r.magic(BASIS_MAGIC, "POD basis")?;
    let grid = r.grid()?;
    let config = r.u64()?;
    if let Some(fp) = expect {
        fp.check(path, &Fingerprint { grid, config })?;
    }
    let kind = r.kind()?;
    let code = r.u64()?;
    let value = r.f64()?;
    let truncation = match code {
        0 => Truncation::Threshold(value),
        1 => Truncation::Count(value as usize),
        2 => Truncation::FullRank,
        other => return Err(r.corrupt(format!("unknown truncation code {other}"))),
    };
    let n_eig = r.len()?;
    let eigenvalues = r.f64s(n_eig)?;
    let n_modes = r.len()?;
    let mut modes = Vec::with_capacity(n_modes);
    for _ in 0..n_modes {
        r.magic(FIELD_MAGIC, "POD basis")?;
        let (_, _, field) = r.block_body()?;
        if *field.grid() != grid {
            return Err(r.corrupt("mode grid differs from basis header"));
        }
        modes.push(field);
    }
    r.expect_end()?;
    PodBasis::from_parts(kind, grid, modes, eigenvalues, truncation).map_err(|e| r.core(e))
}

fn flux_code(mode: FluxMode) -> u64 {
    match mode {
        FluxMode::Linear => 0,
        FluxMode::Corner => 1,
    }
}

pub fn write_operators(path: &Path, ops: &ReducedOperators, config: u64) -> Result<(), FormatError> {
    let mut w = Writer::create(path)?;
    w.bytes(OPERATORS_MAGIC)?;
    w.grid(&ops.grid)?;
    w.u64(config)?;
    w.u64(flux_code(ops.flux_mode))?;
    w.matrix(&ops.mass)?;
    w.matrix(&ops.coupling)?;
    w.matrix(&ops.diffusion)?;
    w.matrix(&ops.poisson)?;
    w.u64(ops.forcing.len() as u64)?;
    w.f64s(&ops.forcing)?;
    w.u64(ops.convection.len() as u64)?;
    w.f64s(&ops.convection)?;
    w.finish()
}

pub fn read_operators(path: &Path, expect: Option<&Fingerprint>) -> Result<ReducedOperators, FormatError> {
    let mut r = Reader::open(path)?;
    r.magic(OPERATORS_MAGIC, "reduced operator")?;
    let grid = r.grid()?;
    let config = r.u64()?;
    if let Some(fp) = expect {
        fp.check(path, &Fingerprint { grid, config })?;
    }
    let flux_mode = match r.u64()? {
        0 => FluxMode::Linear,
        1 => FluxMode::Corner,
        other => return Err(r.corrupt(format!("unknown flux mode {other}"))),
    };
    let mass = r.matrix()?;
    let coupling = r.matrix()?;
    let diffusion = r.matrix()?;
    let poisson = r.matrix()?;
    let n = r.len()?;
    let forcing = r.f64s(n)?;
    let n = r.len()?;
    let convection = r.f64s(n)?;
    r.expect_end()?;
    let ops = ReducedOperators {
        grid,
        flux_mode,
        mass,
        coupling,
        diffusion,
        poisson,
        forcing,
        convection,
    };
    ops.validate().map_err(|e| r.core(e))?;
    Ok(ops)
}
