//! Georeferenced rectangular rasters and ESRI ASCII grid I/O.
//!
//! Storage is row-major with row 0 at the *bottom* (smallest y) and every
//! coordinate refers to a cell center. The ESRI format stores the top row
//! first and may use corner georeferencing; both conventions are converted
//! at the I/O boundary only.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::num::{cast, Real};

/// Default sentinel used when a grid carries no explicit nodata value.
pub const DEFAULT_NODATA: f64 = -9999.0;

/// Slack, in cell units, when deciding whether a point lies inside the hull
/// of cell centers.
const HULL_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec<T> {
    pub nx: usize,
    pub ny: usize,
    pub dx: T,
    pub dy: T,
    /// Center of the lower-left cell.
    pub x0: T,
    pub y0: T,
    pub nodata: T,
}

impl<T: Real> GridSpec<T> {
    pub fn new(nx: usize, ny: usize, dx: T, dy: T, x0: T, y0: T) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Validation(format!(
                "grid needs at least one cell, got {nx}x{ny}"
            )));
        }
        if !(dx > T::zero() && dy > T::zero()) || !dx.is_finite() || !dy.is_finite() {
            return Err(Error::Validation(format!(
                "cell size must be positive, got dx={dx} dy={dy}"
            )));
        }
        if !x0.is_finite() || !y0.is_finite() {
            return Err(Error::Validation("grid origin must be finite".into()));
        }
        Ok(Self {
            nx,
            ny,
            dx,
            dy,
            x0,
            y0,
            nodata: T::lit(DEFAULT_NODATA),
        })
    }

    /// Square-cell grid.
    pub fn square(nx: usize, ny: usize, cell: T, x0: T, y0: T) -> Result<Self> {
        Self::new(nx, ny, cell, cell, x0, y0)
    }

    pub fn with_nodata(mut self, nodata: T) -> Self {
        self.nodata = nodata;
        self
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    #[inline]
    pub fn x_at(&self, i: usize) -> T {
        self.x0 + T::from_usize(i).unwrap() * self.dx
    }

    #[inline]
    pub fn y_at(&self, j: usize) -> T {
        self.y0 + T::from_usize(j).unwrap() * self.dy
    }

    #[inline]
    pub fn cell_area(&self) -> T {
        self.dx * self.dy
    }

    /// Center of the last column.
    pub fn x_max(&self) -> T {
        self.x_at(self.nx - 1)
    }

    pub fn y_max(&self) -> T {
        self.y_at(self.ny - 1)
    }

    /// Same geometry; the nodata sentinel is ignored.
    pub fn same_geometry(&self, other: &Self) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.dx == other.dx
            && self.dy == other.dy
            && self.x0 == other.x0
            && self.y0 == other.y0
    }

    pub(crate) fn ensure_same(&self, other: &Self, what: &str) -> Result<()> {
        if self.same_geometry(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: {}x{} @ ({}, {}) vs {}x{} @ ({}, {})",
                self.nx, self.ny, self.dx, self.dy, other.nx, other.ny, other.dx, other.dy
            )))
        }
    }

    /// Fractional cell coordinates of a point, `None` outside the hull.
    pub fn locate(&self, x: T, y: T) -> Option<(T, T)> {
        let fx = (x - self.x0) / self.dx;
        let fy = (y - self.y0) / self.dy;
        let slack = T::lit(HULL_SLACK);
        let max_x = T::from_usize(self.nx - 1).unwrap();
        let max_y = T::from_usize(self.ny - 1).unwrap();
        if !(fx >= -slack && fx <= max_x + slack && fy >= -slack && fy <= max_y + slack) {
            return None;
        }
        Some((fx.clamp_to(T::zero(), max_x), fy.clamp_to(T::zero(), max_y)))
    }

    pub fn cast<U: Real>(&self) -> GridSpec<U> {
        GridSpec {
            nx: self.nx,
            ny: self.ny,
            dx: cast(self.dx),
            dy: cast(self.dy),
            x0: cast(self.x0),
            y0: cast(self.y0),
            nodata: cast(self.nodata),
        }
    }
}

/// A raster of real values over a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    spec: GridSpec<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(spec: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Length {
                expected: spec.len(),
                actual: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|&v| v != spec.nodata && !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value at cell ({}, {})",
                k % spec.nx,
                k / spec.nx
            )));
        }
        Ok(Self { spec, values })
    }

    pub fn filled(spec: GridSpec<T>, value: T) -> Self {
        Self {
            values: vec![value; spec.len()],
            spec,
        }
    }

    /// Evaluates `f(x, y)` at every cell center.
    pub fn from_fn(spec: GridSpec<T>, mut f: impl FnMut(T, T) -> T) -> Self {
        let mut values = Vec::with_capacity(spec.len());
        for j in 0..spec.ny {
            let y = spec.y_at(j);
            for i in 0..spec.nx {
                values.push(f(spec.x_at(i), y));
            }
        }
        Self { spec, values }
    }

    /// Builds from index space, `f(i, j)`.
    pub fn from_index_fn(spec: GridSpec<T>, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(spec.len());
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                values.push(f(i, j));
            }
        }
        Self { spec, values }
    }

    #[inline]
    pub fn spec(&self) -> &GridSpec<T> {
        &self.spec
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[self.spec.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.spec.idx(i, j);
        self.values[k] = v;
    }

    #[inline]
    pub fn is_nodata_value(&self, v: T) -> bool {
        v == self.spec.nodata
    }

    pub fn is_nodata(&self, i: usize, j: usize) -> bool {
        self.is_nodata_value(self.get(i, j))
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Self {
            spec: self.spec,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Self, mut f: impl FnMut(T, T) -> T) -> Result<Self> {
        self.spec.ensure_same(&other.spec, "zip_map")?;
        Ok(Self {
            spec: self.spec,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn cast<U: Real>(&self) -> ScalarField<U> {
        ScalarField {
            spec: self.spec.cast(),
            values: self.values.iter().map(|&v| cast(v)).collect(),
        }
    }
}

/// A field tagged with the simulation time it represents.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeStampedField<T> {
    pub t: T,
    pub field: ScalarField<T>,
}

impl<T: Real> TimeStampedField<T> {
    pub fn new(t: T, field: ScalarField<T>) -> Result<Self> {
        if !(t.is_finite() && t >= T::zero()) {
            return Err(Error::Validation(format!(
                "time stamp must be finite and non-negative, got {t}"
            )));
        }
        Ok(Self { t, field })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldStats<T> {
    pub min: T,
    pub max: T,
    /// Sum of value times cell area over valid cells.
    pub integral: T,
}

/// Min, max and area integral over non-nodata cells. Rows are summed
/// independently and then combined bottom to top, so the result does not
/// depend on how rows are traversed.
pub fn field_stats<T: Real>(field: &ScalarField<T>) -> FieldStats<T> {
    let spec = field.spec();
    let mut min = T::infinity();
    let mut max = T::neg_infinity();
    let mut total = T::zero();
    for row in field.values().chunks(spec.nx) {
        let mut row_sum = T::zero();
        for &v in row {
            if field.is_nodata_value(v) {
                continue;
            }
            min = min.min(v);
            max = max.max(v);
            row_sum = row_sum + v;
        }
        total = total + row_sum;
    }
    if min > max {
        min = T::zero();
        max = T::zero();
    }
    FieldStats {
        min,
        max,
        integral: total * spec.cell_area(),
    }
}

/// Bilinear interpolation of the four cell centers surrounding `(x, y)`.
///
/// Neighbors that carry zero weight are not consulted, so sampling exactly on
/// a valid cell next to a nodata cell succeeds.
pub fn bilinear_sample<T: Real>(field: &ScalarField<T>, x: T, y: T) -> Result<T> {
    let spec = field.spec();
    let (fx, fy) = spec.locate(x, y).ok_or(Error::OutOfRange {
        x: x.as_f64(),
        y: y.as_f64(),
    })?;
    let (i0, tx) = split_index(fx, spec.nx);
    let (j0, ty) = split_index(fy, spec.ny);
    let read = |i: usize, j: usize| {
        let v = field.get(i, j);
        if field.is_nodata_value(v) {
            Err(Error::DataGap { i, j })
        } else {
            Ok(v)
        }
    };
    let row = |j: usize| -> Result<T> {
        let a = read(i0, j)?;
        if tx == T::zero() {
            return Ok(a);
        }
        let b = read(i0 + 1, j)?;
        Ok(a + tx * (b - a))
    };
    let lo = row(j0)?;
    if ty == T::zero() {
        return Ok(lo);
    }
    let hi = row(j0 + 1)?;
    Ok(lo + ty * (hi - lo))
}

/// Lower cell index and fractional offset; the upper index is always valid
/// when the offset is non-zero.
#[inline]
pub(crate) fn split_index<T: Real>(f: T, n: usize) -> (usize, T) {
    if n == 1 {
        return (0, T::zero());
    }
    let i0 = f.floor().to_usize().unwrap_or(0).min(n - 2);
    (i0, f - T::from_usize(i0).unwrap())
}

/// Resamples onto `target` by bilinear interpolation at its cell centers.
pub fn resample<T: Real>(field: &ScalarField<T>, target: &GridSpec<T>) -> Result<ScalarField<T>> {
    if field.spec().same_geometry(target) {
        let mut out = field.clone();
        out.spec.nodata = target.nodata;
        return Ok(out);
    }
    let mut values = Vec::with_capacity(target.len());
    for j in 0..target.ny {
        let y = target.y_at(j);
        for i in 0..target.nx {
            values.push(bilinear_sample(field, target.x_at(i), y)?);
        }
    }
    Ok(ScalarField { spec: *target, values })
}

// ---------------------------------------------------------------------------
// ESRI ASCII grid

/// Reads an ESRI ASCII grid (`.asc`).
pub fn read_esri_ascii<T: Real>(path: impl AsRef<Path>) -> Result<ScalarField<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_esri_ascii(&text, path)
}

/// Parses ESRI ASCII text; `origin` is only used in error messages.
pub fn parse_esri_ascii<T: Real>(text: &str, origin: &Path) -> Result<ScalarField<T>> {
    let mut lines = text.lines().enumerate().peekable();
    let mut header = EsriHeader::default();
    while let Some(&(lineno, line)) = lines.peek() {
        let mut tokens = line.split_whitespace();
        let Some(key) = tokens.next() else {
            lines.next();
            continue;
        };
        if key.parse::<f64>().is_ok() {
            break;
        }
        let value = tokens
            .next()
            .ok_or_else(|| Error::parse(origin, lineno + 1, format!("missing value for {key}")))?;
        header.set(key, value, origin, lineno + 1)?;
        lines.next();
    }
    let spec = header.into_spec::<T>(origin)?;
    let start_line = lines.peek().map(|(n, _)| n + 1).unwrap_or(0);
    let data = parse_data_block(lines.map(|(_, l)| l), &spec, origin, start_line)?;
    ScalarField::new(spec, data)
}

/// Parses `nx * ny` values stored top row first into bottom-first storage.
pub(crate) fn parse_data_block<'a, T: Real>(
    lines: impl Iterator<Item = &'a str>,
    spec: &GridSpec<T>,
    origin: &Path,
    first_line: usize,
) -> Result<Vec<T>> {
    let mut file_order = Vec::with_capacity(spec.len());
    for (offset, line) in lines.enumerate() {
        for tok in line.split_whitespace() {
            let v: T = tok
                .parse()
                .map_err(|_| Error::parse(origin, first_line + offset, format!("bad number {tok:?}")))?;
            file_order.push(v);
        }
    }
    if file_order.len() != spec.len() {
        return Err(Error::Length {
            expected: spec.len(),
            actual: file_order.len(),
        });
    }
    let mut values = vec![T::zero(); spec.len()];
    for (r, row) in file_order.chunks(spec.nx).enumerate() {
        let j = spec.ny - 1 - r;
        values[j * spec.nx..(j + 1) * spec.nx].copy_from_slice(row);
    }
    Ok(values)
}

/// Appends the data block, top row first, to `out`.
pub(crate) fn format_data_block<T: Real>(field: &ScalarField<T>, out: &mut String) {
    let spec = field.spec();
    let token = spec.nodata.to_string();
    for j in (0..spec.ny).rev() {
        for i in 0..spec.nx {
            if i > 0 {
                out.push(' ');
            }
            let v = field.get(i, j);
            if field.is_nodata_value(v) {
                out.push_str(&token);
            } else {
                // Display emits the shortest string that parses back to the
                // identical value, which is never fewer than the digits needed.
                write!(out, "{v}").unwrap();
            }
        }
        out.push('\n');
    }
}

/// Writes an ESRI ASCII grid. Cells must be square.
pub fn write_esri_ascii<T: Real>(field: &ScalarField<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = field.spec();
    if spec.dx != spec.dy {
        return Err(Error::Validation(format!(
            "ESRI ASCII needs square cells, got dx={} dy={}",
            spec.dx, spec.dy
        )));
    }
    let mut out = String::with_capacity(spec.len() * 12 + 128);
    writeln!(out, "ncols {}", spec.nx).unwrap();
    writeln!(out, "nrows {}", spec.ny).unwrap();
    writeln!(out, "xllcenter {}", spec.x0).unwrap();
    writeln!(out, "yllcenter {}", spec.y0).unwrap();
    writeln!(out, "cellsize {}", spec.dx).unwrap();
    writeln!(out, "NODATA_value {}", spec.nodata).unwrap();
    format_data_block(field, &mut out);
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(out.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

#[derive(Default)]
struct EsriHeader {
    ncols: Option<usize>,
    nrows: Option<usize>,
    x: Option<(f64, bool)>,
    y: Option<(f64, bool)>,
    cellsize: Option<f64>,
    nodata: Option<String>,
}

impl EsriHeader {
    fn set(&mut self, key: &str, value: &str, origin: &Path, line: usize) -> Result<()> {
        let num = || -> Result<f64> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(origin, line, format!("{key}: bad value {value:?}")))
        };
        let count = || -> Result<usize> {
            value
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::parse(origin, line, format!("{key}: bad count {value:?}")))
        };
        match key.to_ascii_lowercase().as_str() {
            "ncols" => self.ncols = Some(count()?),
            "nrows" => self.nrows = Some(count()?),
            "xllcorner" => self.x = Some((num()?, true)),
            "xllcenter" => self.x = Some((num()?, false)),
            "yllcorner" => self.y = Some((num()?, true)),
            "yllcenter" => self.y = Some((num()?, false)),
            "cellsize" => self.cellsize = Some(num()?),
            "nodata_value" => {
                num()?;
                self.nodata = Some(value.to_string());
            }
            _ => return Err(Error::parse(origin, line, format!("unknown header key {key}"))),
        }
        Ok(())
    }

    fn into_spec<T: Real>(self, origin: &Path) -> Result<GridSpec<T>> {
        let missing = |k: &str| Error::parse(origin, 0, format!("missing header key {k}"));
        let nx = self.ncols.ok_or_else(|| missing("ncols"))?;
        let ny = self.nrows.ok_or_else(|| missing("nrows"))?;
        let cell = self.cellsize.ok_or_else(|| missing("cellsize"))?;
        let (x, x_corner) = self.x.ok_or_else(|| missing("xllcorner"))?;
        let (y, y_corner) = self.y.ok_or_else(|| missing("yllcorner"))?;
        if cell <= 0.0 {
            return Err(Error::parse(origin, 0, "cellsize: must be positive"));
        }
        let cell_t: T = T::lit(cell);
        let shift = |v: f64, corner: bool| -> T {
            if corner {
                T::lit(v) + cell_t * T::half()
            } else {
                T::lit(v)
            }
        };
        let mut spec = GridSpec::new(nx, ny, cell_t, cell_t, shift(x, x_corner), shift(y, y_corner))?;
        if let Some(tok) = self.nodata {
            spec.nodata = tok
                .parse::<T>()
                .map_err(|_| Error::parse(origin, 0, "NODATA_value: bad value"))?;
        }
        Ok(spec)
    }
}
