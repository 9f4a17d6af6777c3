//! Periodic-box discretization, FFTs, Fourier symbols and quadrature norms.
//!
//! The box `[-L/2, L/2)^d` is sampled at `n` points per axis with spacing
//! `h = L/n`; grid index `i` sits at `x = (i - n/2) h`, so the box center is a
//! grid point. Wavenumbers use the usual FFT ordering: index `i` maps to
//! `(2 pi / L) * i` for `i < n/2` and `(2 pi / L) * (i - n)` otherwise, so the
//! per-axis set is `(2 pi / L) * {-n/2, .., n/2 - 1}`.
//!
//! The forward transform is unnormalized, the inverse divides by `n^d`.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid on a cube of edge `length` in `dim` dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct GridSpec {
    dim: usize,
    n_axis: usize,
    length: f64,
}

#[derive(Deserialize)]
struct RawGrid {
    dim: usize,
    n_axis: usize,
    length: f64,
}

impl TryFrom<RawGrid> for GridSpec {
    type Error = Error;

    fn try_from(r: RawGrid) -> Result<Self> {
        GridSpec::new(r.dim, r.n_axis, r.length)
    }
}

impl GridSpec {
    pub fn new(dim: usize, n_axis: usize, length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if n_axis < 8 || !n_axis.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_axis = {n_axis} must be a power of two >= 8"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("box length {length} must be positive")));
        }
        Ok(Self { dim, n_axis, length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_axis(&self) -> usize {
        self.n_axis
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n_axis as f64
    }

    /// Quadrature weight `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Total number of grid points, `n^d`.
    pub fn len(&self) -> usize {
        self.n_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Smallest nonzero angular wavenumber, `2 pi / L`.
    pub fn dk(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.length
    }

    /// Signed integer mode number of axis index `i`, in `-n/2..n/2`.
    pub fn mode(&self, i: usize) -> i64 {
        let n = self.n_axis as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Angular wavenumber of axis index `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        self.mode(i) as f64 * self.dk()
    }

    /// Physical coordinate of axis index `i`.
    pub fn coordinate(&self, i: usize) -> f64 {
        (i as f64 - (self.n_axis / 2) as f64) * self.spacing()
    }

    /// Splits a flat row-major index into per-axis indices; unused axes are 0.
    pub fn unflatten(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for a in (0..self.dim).rev() {
            out[a] = idx % self.n_axis;
            idx /= self.n_axis;
        }
        out
    }

    pub fn flatten(&self, ix: [usize; 3]) -> usize {
        ix.iter()
            .take(self.dim)
            .fold(0, |acc, &i| acc * self.n_axis + i)
    }

    /// Coordinates of a flat index; unused axes are 0.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let ix = self.unflatten(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.coordinate(ix[a]);
        }
        x
    }

    /// Wavevector of a flat index; unused axes are 0.
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let ix = self.unflatten(idx);
        let mut k = [0.0; 3];
        for a in 0..self.dim {
            k[a] = self.wavenumber(ix[a]);
        }
        k
    }

    pub fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Complex samples of a function on a [`GridSpec`], row-major over axes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    spec: GridSpec,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            values: vec![Complex64::new(0.0, 0.0); spec.len()],
        }
    }

    pub fn from_values(spec: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                spec.len()
            )));
        }
        Ok(Self { spec, values })
    }

    /// Samples `f(x)` at every grid point.
    pub fn from_fn(spec: GridSpec, f: impl Fn([f64; 3]) -> Complex64 + Sync) -> Self {
        let values = (0..spec.len())
            .into_par_iter()
            .map(|i| f(spec.point(i)))
            .collect();
        Self { spec, values }
    }

    /// Samples a real function.
    pub fn from_real_fn(spec: GridSpec, f: impl Fn([f64; 3]) -> f64 + Sync) -> Self {
        Self::from_fn(spec, |x| Complex64::new(f(x), 0.0))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|z| *z *= c);
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            spec: self.spec,
            values: self.values.iter().map(|z| z * c).collect(),
        }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: Complex64, other: &ComplexField) -> Result<Self> {
        self.spec.check_same(&other.spec)?;
        Ok(Self {
            spec: self.spec,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
        })
    }

    pub fn modulus(&self) -> Self {
        Self {
            spec: self.spec,
            values: self
                .values
                .iter()
                .map(|z| Complex64::new(z.norm(), 0.0))
                .collect(),
        }
    }

    /// Pointwise `|f|^2`.
    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    /// `int |f|^2`.
    pub fn mass(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.spec.cell_volume()
    }

    /// `||f||_2`.
    pub fn l2_norm(&self) -> f64 {
        self.mass().sqrt()
    }

    /// `||f||_p^p = int |f|^p`.
    pub fn lp_integral(&self, p: f64) -> f64 {
        self.values.iter().map(|z| z.norm().powf(p)).sum::<f64>() * self.spec.cell_volume()
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        self.lp_integral(p).powf(1.0 / p)
    }

    /// `int conj(self) * other`.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        self.spec.check_same(&other.spec)?;
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.spec.cell_volume())
    }

    /// Largest imaginary part relative to the largest modulus.
    pub fn relative_imaginary(&self) -> f64 {
        let max_abs = self.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if max_abs == 0.0 {
            return 0.0;
        }
        self.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max) / max_abs
    }

    /// Periodic shift by whole cells: `result(x) = self(x - shift * h)`.
    pub fn shifted(&self, shift: [i64; 3]) -> Self {
        let spec = self.spec;
        let n = spec.n_axis() as i64;
        let mut out = vec![Complex64::new(0.0, 0.0); spec.len()];
        for (idx, slot) in out.iter_mut().enumerate() {
            let ix = spec.unflatten(idx);
            let mut src = [0usize; 3];
            for a in 0..spec.dim() {
                src[a] = (ix[a] as i64 - shift[a]).rem_euclid(n) as usize;
            }
            *slot = self.values[spec.flatten(src)];
        }
        Self { spec, values: out }
    }

    /// Fraction of `|f|^2` carried by the outermost layer of cells on each face.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let total: f64 = self.values.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let n = self.spec.n_axis();
        let edge: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(idx, _)| {
                let ix = self.spec.unflatten(*idx);
                ix.iter()
                    .take(self.spec.dim())
                    .any(|&i| i == 0 || i == n - 1)
            })
            .map(|(_, z)| z.norm_sqr())
            .sum();
        edge / total
    }

    /// Fraction of `|f|^2` outside the ball of the given radius about the box center.
    pub fn mass_outside_radius(&self, radius: f64) -> f64 {
        let total: f64 = self.values.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let outside: f64 = (0..self.spec.len())
            .filter(|&i| {
                let x = self.spec.point(i);
                (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt() > radius
            })
            .map(|i| self.values[i].norm_sqr())
            .sum();
        outside / total
    }
}

/// Real Fourier multiplier indexed like the spectrum of a [`ComplexField`].
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl SymbolField {
    /// Builds the symbol `s(k)` from the wavevector of every mode.
    pub fn from_fn(spec: GridSpec, f: impl Fn([f64; 3]) -> f64 + Sync) -> Self {
        let values = (0..spec.len())
            .into_par_iter()
            .map(|i| f(spec.wavevector(i)))
            .collect();
        Self { spec, values }
    }

    /// `|k|^2`, the symbol of `-Laplacian`.
    pub fn neg_laplacian(spec: GridSpec) -> Self {
        Self::from_fn(spec, |k| k[0] * k[0] + k[1] * k[1] + k[2] * k[2])
    }

    /// `|k|^4`, the symbol of the bilaplacian.
    pub fn bilaplacian(spec: GridSpec) -> Self {
        Self::from_fn(spec, |k| {
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            k2 * k2
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// FFT plans for one grid. Cheap to clone and safe to share across threads.
#[derive(Clone)]
pub struct Spectral {
    spec: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("spec", &self.spec).finish()
    }
}

impl Spectral {
    pub fn new(spec: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            spec,
            forward: planner.plan_fft_forward(spec.n_axis()),
            inverse: planner.plan_fft_inverse(spec.n_axis()),
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Unnormalized forward transform, in place.
    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform including the `1/n^d` factor, in place.
    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / self.spec.len() as f64;
        data.par_iter_mut().for_each(|z| *z *= scale);
    }

    pub fn forward(&self, f: &ComplexField) -> ComplexField {
        let mut out = f.clone();
        self.forward_in_place(&mut out.values);
        out
    }

    pub fn inverse(&self, f: &ComplexField) -> ComplexField {
        let mut out = f.clone();
        self.inverse_in_place(&mut out.values);
        out
    }

    /// `IFFT(s * FFT(f))`.
    pub fn apply_symbol(&self, f: &ComplexField, symbol: &SymbolField) -> Result<ComplexField> {
        f.spec.check_same(&self.spec)?;
        symbol.spec.check_same(&self.spec)?;
        let mut out = self.forward(f);
        out.values
            .par_iter_mut()
            .zip(symbol.values.par_iter())
            .for_each(|(z, s)| *z *= *s);
        self.inverse_in_place(&mut out.values);
        Ok(out)
    }

    /// `int s(k) |f^(k)|^2` via discrete Parseval: `h^d / n^d * sum s |F|^2`.
    pub fn symbol_quadratic_form(&self, f: &ComplexField, symbol: &SymbolField) -> Result<f64> {
        f.spec.check_same(&self.spec)?;
        symbol.spec.check_same(&self.spec)?;
        let spectrum = self.forward(f);
        Ok(spectral_quadratic_form(&self.spec, spectrum.values(), symbol))
    }

    /// `||grad f||_2`.
    pub fn h1_seminorm(&self, f: &ComplexField) -> Result<f64> {
        let k2 = SymbolField::neg_laplacian(self.spec);
        Ok(self.symbol_quadratic_form(f, &k2)?.sqrt())
    }

    /// `||f||_{H^1} = (||grad f||^2 + ||f||^2)^(1/2)`.
    pub fn h1_norm(&self, f: &ComplexField) -> Result<f64> {
        let k2 = SymbolField::from_fn(self.spec, |k| 1.0 + k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
        Ok(self.symbol_quadratic_form(f, &k2)?.sqrt())
    }

    pub fn norms(&self, f: &ComplexField, p: f64) -> Result<Norms> {
        if !(p >= 1.0) {
            return Err(crate::error::invalid("p", format!("{p} < 1")));
        }
        Ok(Norms {
            l2: f.l2_norm(),
            lp: f.lp_norm(p),
            h1_seminorm: self.h1_seminorm(f)?,
        })
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.spec.len(), "buffer does not match grid");
        let n = self.spec.n_axis();
        let d = self.spec.dim();
        for axis in 0..d {
            // Each contiguous block is an `n x inner` matrix whose rows run
            // along `axis`; transpose so the transform axis is contiguous.
            let inner = n.pow((d - 1 - axis) as u32);
            if inner == 1 {
                data.par_chunks_mut(n * lines_per_task(n))
                    .for_each(|chunk| plan.process(chunk));
                continue;
            }
            data.par_chunks_mut(n * inner).for_each(|block| {
                let mut t = vec![Complex64::new(0.0, 0.0); block.len()];
                for r in 0..n {
                    for c in 0..inner {
                        t[c * n + r] = block[r * inner + c];
                    }
                }
                plan.process(&mut t);
                for r in 0..n {
                    for c in 0..inner {
                        block[r * inner + c] = t[c * n + r];
                    }
                }
            });
        }
    }
}

fn lines_per_task(n: usize) -> usize {
    (4096 / n).max(1)
}

/// `h^d / n^d * sum s(k) |F(k)|^2` for an already transformed field.
pub(crate) fn spectral_quadratic_form(spec: &GridSpec, spectrum: &[Complex64], symbol: &SymbolField) -> f64 {
    let sum = par_sum(spectrum.len(), |i| symbol.values[i] * spectrum[i].norm_sqr());
    sum * spec.cell_volume() / spec.len() as f64
}

const SUM_CHUNK: usize = 4096;

/// Parallel sum of `f(0..len)` over fixed-size chunks, so the rounding does not
/// depend on the thread count.
pub(crate) fn par_sum(len: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let partial: Vec<f64> = (0..len.div_ceil(SUM_CHUNK))
        .into_par_iter()
        .map(|c| (c * SUM_CHUNK..((c + 1) * SUM_CHUNK).min(len)).map(&f).sum())
        .collect();
    partial.iter().sum()
}

/// Quadrature norms of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub lp: f64,
    pub h1_seminorm: f64,
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"NGF1";

/// Writes the `NGF1` snapshot: magic, `u32 d`, `u32 n`, `f64 L`, then
/// `n^d` little-endian `(re, im)` pairs in row-major order.
pub fn write_snapshot<W: Write>(mut w: W, field: &ComplexField) -> Result<()> {
    let spec = field.spec();
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&(spec.dim() as u32).to_le_bytes())?;
    w.write_all(&(spec.n_axis() as u32).to_le_bytes())?;
    w.write_all(&spec.length().to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * spec.len());
    for z in field.values() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<ComplexField> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Snapshot(format!("bad magic {magic:?}")));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let d = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8)?;
    let length = f64::from_le_bytes(b8);
    let spec = GridSpec::new(d, n, length).map_err(|e| Error::Snapshot(e.to_string()))?;
    let mut raw = vec![0u8; 16 * spec.len()];
    r.read_exact(&mut raw)
        .map_err(|e| Error::Snapshot(format!("truncated payload: {e}")))?;
    let values = raw
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    let field = ComplexField::from_values(spec, values)?;
    if !field.is_finite() {
        return Err(Error::Snapshot("non-finite entries".into()));
    }
    Ok(field)
}

pub fn save_snapshot(path: impl AsRef<std::path::Path>, field: &ComplexField) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_snapshot(std::io::BufWriter::new(file), field)
}

pub fn load_snapshot(path: impl AsRef<std::path::Path>) -> Result<ComplexField> {
    let file = std::fs::File::open(path)?;
    read_snapshot(std::io::BufReader::new(file))
}
