//! One-way slide → water coupling through a time-stamped series of bed
//! elevation grids, plus the text exchange format for that series.
//!
//! File layout:
//!
//! ```text
//! SLIDESURGE-DTOPO 1
//! nframes <N>
//! ncols <nx>
//! nrows <ny>
//! x0 <lower-left cell center x>
//! y0 <lower-left cell center y>
//! cellsize <d>
//! t <seconds>
//! <ny rows of nx values, top row first>
//! t <seconds>
//! ...
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::num::Real;
use crate::raster::{format_data_block, resample, GridSpec, ScalarField, TimeStampedField};

pub const DTOPO_MAGIC: &str = "SLIDESURGE-DTOPO 1";

/// Default spacing between recorded bed frames, s.
pub const DEFAULT_FRAME_DT: f64 = 1.0;

/// Ordered bed-elevation frames on one grid, the first at `t = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BedMotionSeries<T> {
    frames: Vec<TimeStampedField<T>>,
}

impl<T: Real> BedMotionSeries<T> {
    pub fn new(frames: Vec<TimeStampedField<T>>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Validation("bed motion series needs at least one frame".into()))?;
        if first.t != T::zero() {
            return Err(Error::Validation(format!(
                "first bed frame must be at t = 0, got {}",
                first.t
            )));
        }
        let spec = *first.field.spec();
        for w in frames.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(Error::Validation(format!(
                    "frame times must increase strictly ({} then {})",
                    w[0].t, w[1].t
                )));
            }
            spec.ensure_same(w[1].field.spec(), "bed frame grid")?;
        }
        Ok(Self { frames })
    }

    /// Series holding a single, static bed.
    pub fn constant(bed: ScalarField<T>) -> Self {
        Self {
            frames: vec![TimeStampedField {
                t: T::zero(),
                field: bed,
            }],
        }
    }

    pub fn frames(&self) -> &[TimeStampedField<T>] {
        &self.frames
    }

    pub fn spec(&self) -> &GridSpec<T> {
        self.frames[0].field.spec()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn last_time(&self) -> T {
        self.frames.last().unwrap().t
    }

    pub(crate) fn push(&mut self, frame: TimeStampedField<T>) -> Result<()> {
        let last = self.frames.last().unwrap();
        if !(frame.t > last.t) {
            return Err(Error::Validation(format!(
                "frame time {} does not follow {}",
                frame.t, last.t
            )));
        }
        self.spec().ensure_same(frame.field.spec(), "bed frame grid")?;
        self.frames.push(frame);
        Ok(())
    }

    /// Bed at time `t` on the series' own grid: linear in time between the
    /// bracketing frames, held constant outside the recorded window.
    pub fn interpolate(&self, t: T) -> ScalarField<T> {
        let k = self.frames.partition_point(|f| f.t <= t);
        if k == 0 {
            return self.frames[0].field.clone();
        }
        if k == self.frames.len() {
            return self.frames[k - 1].field.clone();
        }
        let (a, b) = (&self.frames[k - 1], &self.frames[k]);
        if t == a.t {
            return a.field.clone();
        }
        let w = (t - a.t) / (b.t - a.t);
        a.field
            .zip_map(&b.field, |va, vb| va + w * (vb - va))
            .expect("frames share one grid")
    }

    /// Bed at time `t` resampled onto `target`.
    pub fn bed_at_time(&self, t: T, target: &GridSpec<T>) -> Result<ScalarField<T>> {
        if t < T::zero() {
            return Err(Error::Validation(format!("negative time {t}")));
        }
        let bed = self.interpolate(t);
        resample(&bed, target)
    }
}

/// Accumulates frames at a fixed cadence while a slide run advances.
#[derive(Debug)]
pub struct FrameRecorder<T> {
    frame_dt: T,
    next_index: usize,
    series: Option<BedMotionSeries<T>>,
}

impl<T: Real> FrameRecorder<T> {
    pub fn new(frame_dt: T) -> Result<Self> {
        if !(frame_dt > T::zero() && frame_dt.is_finite()) {
            return Err(Error::Validation(format!("frame_dt must be > 0, got {frame_dt}")));
        }
        Ok(Self {
            frame_dt,
            next_index: 1,
            series: None,
        })
    }

    /// Time of the next scheduled frame; solvers shorten their step to land
    /// exactly on it.
    pub fn next_time(&self) -> T {
        T::from_usize(self.next_index).unwrap() * self.frame_dt
    }

    /// Offers the field at time `t`; stored if it is the initial frame or
    /// falls on the schedule.
    pub fn offer(&mut self, t: T, field: impl FnOnce() -> ScalarField<T>) -> Result<()> {
        let due = self.next_time();
        match &mut self.series {
            None => {
                self.series = Some(BedMotionSeries::new(vec![TimeStampedField::new(t, field())?])?);
            }
            Some(series) => {
                if t >= due {
                    series.push(TimeStampedField::new(t, field())?)?;
                    while self.next_time() <= t {
                        self.next_index += 1;
                    }
                }
            }
        }
        Ok(())
    }

    /// Closes the series, appending the final state unless it is already the
    /// last frame.
    pub fn finish(mut self, t: T, field: impl FnOnce() -> ScalarField<T>) -> Result<BedMotionSeries<T>> {
        match &mut self.series {
            None => Ok(BedMotionSeries::new(vec![TimeStampedField::new(t, field())?])?),
            Some(series) => {
                if t > series.last_time() {
                    series.push(TimeStampedField::new(t, field())?)?;
                }
                Ok(self.series.unwrap())
            }
        }
    }
}

/// Writes the series in the dtopo text format.
pub fn export_dtopo<T: Real>(series: &BedMotionSeries<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = series.spec();
    if spec.dx != spec.dy {
        return Err(Error::Validation("dtopo export needs square cells".into()));
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut buf = String::new();
    writeln!(buf, "{DTOPO_MAGIC}").unwrap();
    writeln!(buf, "nframes {}", series.len()).unwrap();
    writeln!(buf, "ncols {}", spec.nx).unwrap();
    writeln!(buf, "nrows {}", spec.ny).unwrap();
    writeln!(buf, "x0 {}", spec.x0).unwrap();
    writeln!(buf, "y0 {}", spec.y0).unwrap();
    writeln!(buf, "cellsize {}", spec.dx).unwrap();
    for frame in series.frames() {
        writeln!(buf, "t {}", frame.t).unwrap();
        format_data_block(&frame.field, &mut buf);
        w.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))?;
        buf.clear();
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a dtopo file written by [`export_dtopo`].
pub fn import_dtopo<T: Real>(path: impl AsRef<Path>) -> Result<BedMotionSeries<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dtopo(&text, path)
}

pub fn parse_dtopo<T: Real>(text: &str, origin: &Path) -> Result<BedMotionSeries<T>> {
    let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l));
    let mut next = |what: &str| -> Result<(usize, &str)> {
        lines
            .next()
            .ok_or_else(|| Error::parse(origin, 0, format!("unexpected end of file, expected {what}")))
    };
    let (n, magic) = next("magic line")?;
    if magic.trim() != DTOPO_MAGIC {
        return Err(Error::parse(origin, n, format!("expected {DTOPO_MAGIC:?}")));
    }
    fn keyed<'a>(origin: &Path, (n, line): (usize, &'a str), key: &str) -> Result<&'a str> {
        let mut it = line.split_whitespace();
        match (it.next(), it.next(), it.next()) {
            (Some(k), Some(v), None) if k == key => Ok(v),
            _ => Err(Error::parse(origin, n, format!("expected `{key} <value>`"))),
        }
    }
    fn number<V: std::str::FromStr>(origin: &Path, n: usize, key: &str, v: &str) -> Result<V> {
        v.parse()
            .map_err(|_| Error::parse(origin, n, format!("{key}: bad value {v:?}")))
    }
    let mut header = |key: &str| -> Result<(usize, String)> {
        let line = next(key)?;
        Ok((line.0, keyed(origin, line, key)?.to_string()))
    };
    let (n, v) = header("nframes")?;
    let nframes: usize = number(origin, n, "nframes", &v)?;
    let (n, v) = header("ncols")?;
    let nx: usize = number(origin, n, "ncols", &v)?;
    let (n, v) = header("nrows")?;
    let ny: usize = number(origin, n, "nrows", &v)?;
    let (n, v) = header("x0")?;
    let x0: T = number(origin, n, "x0", &v)?;
    let (n, v) = header("y0")?;
    let y0: T = number(origin, n, "y0", &v)?;
    let (n, v) = header("cellsize")?;
    let cell: T = number(origin, n, "cellsize", &v)?;
    let spec = GridSpec::square(nx, ny, cell, x0, y0).map_err(|e| Error::parse(origin, n, e.to_string()))?;
    if nframes == 0 {
        return Err(Error::parse(origin, 2, "nframes must be at least 1"));
    }

    let mut frames: Vec<TimeStampedField<T>> = Vec::with_capacity(nframes);
    for _ in 0..nframes {
        let line = next("frame time line")?;
        let tn = line.0;
        let t: T = number(origin, tn, "t", keyed(origin, line, "t")?)?;
        if let Some(prev) = frames.last() {
            if !(t > prev.t) {
                return Err(Error::parse(
                    origin,
                    tn,
                    format!("frame time {t} does not increase past {}", prev.t),
                ));
            }
        } else if t != T::zero() {
            return Err(Error::parse(origin, tn, "first frame must be at t = 0"));
        }
        let mut values = vec![T::zero(); spec.len()];
        for r in 0..ny {
            let (ln, row) = next("data row")?;
            let j = ny - 1 - r;
            let mut count = 0;
            for (i, tok) in row.split_whitespace().enumerate() {
                if i >= nx {
                    return Err(Error::parse(origin, ln, format!("more than {nx} values in row")));
                }
                values[j * nx + i] = number(origin, ln, "value", tok)?;
                count += 1;
            }
            if count != nx {
                return Err(Error::parse(origin, ln, format!("expected {nx} values, found {count}")));
            }
        }
        let field = ScalarField::new(spec, values)?;
        frames.push(TimeStampedField::new(t, field)?);
    }
    if let Some((n, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::parse(origin, n, format!("trailing content {extra:?}")));
    }
    BedMotionSeries::new(frames)
}
