//! Synthetic gauges, maximum-amplitude and arrival-time fields, and runup
//! metrics.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::num::{hypot2, Real};
use crate::par::map_rows;
use crate::raster::{split_index, write_esri_ascii, GridSpec, ScalarField};
use crate::water::{SWEConfig, WaterState};

pub const DEFAULT_ARRIVAL_THRESHOLD: f64 = 0.01;
/// Sentinel for cells the wave never reached.
pub const NODATA: f64 = -9999.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Gauge<T> {
    pub id: u32,
    pub x: T,
    pub y: T,
}

impl<T: Real> Gauge<T> {
    pub fn check_inside(&self, spec: &GridSpec<T>) -> Result<()> {
        spec.locate(self.x, self.y).map(|_| ()).ok_or_else(|| {
            Error::Config(format!(
                "gauge {} at ({}, {}) lies outside the grid",
                self.id, self.x, self.y
            ))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaugeSample<T> {
    pub t: T,
    pub eta: T,
    pub h: T,
    pub u: T,
    pub v: T,
    /// The gauge sat on a dry cell; `eta` is the bed elevation.
    pub dry: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaugeSeries<T> {
    pub gauge: Gauge<T>,
    pub samples: Vec<GaugeSample<T>>,
}

impl<T: Real> GaugeSeries<T> {
    pub fn new(gauge: Gauge<T>) -> Self {
        Self {
            gauge,
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, s: GaugeSample<T>) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if !(s.t > last.t) {
                return Err(Error::Validation(format!(
                    "gauge {} samples must advance in time ({} after {})",
                    self.gauge.id, s.t, last.t
                )));
            }
        }
        self.samples.push(s);
        Ok(())
    }

    /// Largest |eta - datum| over wet samples.
    pub fn peak_anomaly(&self, datum: T) -> T {
        self.samples
            .iter()
            .filter(|s| !s.dry)
            .fold(T::zero(), |m, s| m.max((s.eta - datum).abs()))
    }

    /// First time the wet anomaly exceeds `threshold`.
    pub fn arrival(&self, datum: T, threshold: T) -> Option<T> {
        self.samples
            .iter()
            .find(|s| !s.dry && (s.eta - datum).abs() > threshold)
            .map(|s| s.t)
    }
}

/// Samples every gauge. Wet gauges interpolate bilinearly over the wet cells
/// among their four neighbours; a gauge whose nearest cell is dry records a
/// dry sample.
pub fn sample_gauges<T: Real>(
    state: &WaterState<T>,
    gauges: &[Gauge<T>],
    cfg: &SWEConfig<T>,
) -> Result<Vec<GaugeSample<T>>> {
    gauges.iter().map(|g| sample_one(state, g, cfg)).collect()
}

fn sample_one<T: Real>(state: &WaterState<T>, g: &Gauge<T>, cfg: &SWEConfig<T>) -> Result<GaugeSample<T>> {
    g.check_inside(state.spec())?;
    let spec = state.spec();
    let (fx, fy) = spec.locate(g.x, g.y).unwrap();
    let (i0, tx) = split_index(fx, spec.nx);
    let (j0, ty) = split_index(fy, spec.ny);
    let (h, hu, hv, b) = (
        state.h.values(),
        state.hu.values(),
        state.hv.values(),
        state.bed.values(),
    );
    let one = T::one();
    let corners = [
        (i0, j0, (one - tx) * (one - ty)),
        (i0 + 1, j0, tx * (one - ty)),
        (i0, j0 + 1, (one - tx) * ty),
        (i0 + 1, j0 + 1, tx * ty),
    ];
    let ni = fx.round().to_usize().unwrap_or(0).min(spec.nx - 1);
    let nj = fy.round().to_usize().unwrap_or(0).min(spec.ny - 1);
    if h[spec.idx(ni, nj)] < cfg.h_dry {
        let mut bed = T::zero();
        for &(i, j, w) in &corners {
            if w > T::zero() {
                bed = bed + w * b[spec.idx(i, j)];
            }
        }
        return Ok(GaugeSample {
            t: state.t,
            eta: bed,
            h: T::zero(),
            u: T::zero(),
            v: T::zero(),
            dry: true,
        });
    }
    let (mut ws, mut eta, mut depth, mut u, mut v) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for &(i, j, w) in &corners {
        if w == T::zero() {
            continue;
        }
        let k = spec.idx(i, j);
        if h[k] < cfg.h_dry {
            continue;
        }
        ws = ws + w;
        eta = eta + w * (h[k] + b[k]);
        depth = depth + w * h[k];
        u = u + w * (hu[k] / h[k]);
        v = v + w * (hv[k] / h[k]);
    }
    Ok(GaugeSample {
        t: state.t,
        eta: eta / ws,
        h: depth / ws,
        u: u / ws,
        v: v / ws,
        dry: false,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaxFields<T> {
    /// Largest |eta - datum| seen on each wet cell, m.
    pub max_eta: ScalarField<T>,
    pub max_speed: ScalarField<T>,
    /// First time the anomaly exceeded the threshold, s; [`NODATA`] if never.
    pub arrival: ScalarField<T>,
}

impl<T: Real> MaxFields<T> {
    pub fn new(spec: GridSpec<T>) -> Self {
        let spec = spec.with_nodata(T::lit(NODATA));
        Self {
            max_eta: ScalarField::filled(spec, T::zero()),
            max_speed: ScalarField::filled(spec, T::zero()),
            arrival: ScalarField::filled(spec, T::lit(NODATA)),
        }
    }

    pub fn update(&mut self, state: &WaterState<T>, cfg: &SWEConfig<T>, threshold: T) {
        let spec = *state.spec();
        let nx = spec.nx;
        let (h, hu, hv, b) = (
            state.h.values(),
            state.hu.values(),
            state.hv.values(),
            state.bed.values(),
        );
        let wet = |k: usize| h[k] >= cfg.h_dry;
        let anomaly = |k: usize| (h[k] + b[k] - cfg.datum).abs();
        map_rows(self.max_eta.values_mut(), nx, |j, row| {
            for (i, m) in row.iter_mut().enumerate() {
                let k = j * nx + i;
                if wet(k) {
                    *m = m.max(anomaly(k));
                }
            }
        });
        map_rows(self.max_speed.values_mut(), nx, |j, row| {
            for (i, m) in row.iter_mut().enumerate() {
                let k = j * nx + i;
                if wet(k) {
                    *m = m.max(hypot2(hu[k], hv[k]) / h[k]);
                }
            }
        });
        let nodata = T::lit(NODATA);
        map_rows(self.arrival.values_mut(), nx, |j, row| {
            for (i, a) in row.iter_mut().enumerate() {
                let k = j * nx + i;
                if *a == nodata && wet(k) && anomaly(k) > threshold {
                    *a = state.t;
                }
            }
        });
    }
}

/// Pointwise maxima of `max` and the current state.
pub fn update_max_fields<T: Real>(
    max: &MaxFields<T>,
    state: &WaterState<T>,
    cfg: &SWEConfig<T>,
    threshold: T,
) -> MaxFields<T> {
    let mut out = max.clone();
    out.update(state, cfg, threshold);
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunupReport<T> {
    pub max_runup_height: T,
    pub max_runup_distance: T,
    pub inundated_area: T,
}

impl<T: Real> RunupReport<T> {
    pub fn to_key_values(&self) -> String {
        format!(
            "max_runup_height={}\nmax_runup_distance={}\ninundated_area={}\n",
            self.max_runup_height, self.max_runup_distance, self.inundated_area
        )
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_key_values()).map_err(|e| Error::io(path, e))
    }
}

/// Runup metrics over cells that were dry at the start and later wet.
pub fn inundation_metrics<T: Real>(
    initial: &WaterState<T>,
    max: &MaxFields<T>,
    ever_wet: &[bool],
    h_dry: T,
) -> Result<RunupReport<T>> {
    let spec = *initial.spec();
    spec.ensure_same(max.max_eta.spec(), "max fields")?;
    if ever_wet.len() != spec.len() {
        return Err(Error::Length {
            expected: spec.len(),
            actual: ever_wet.len(),
        });
    }
    let h0 = initial.h.values();
    let wet0 = |i: usize, j: usize| h0[spec.idx(i, j)] >= h_dry;
    let mut shore = Vec::new();
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            if !wet0(i, j) {
                continue;
            }
            let edge = (i > 0 && !wet0(i - 1, j))
                || (i + 1 < spec.nx && !wet0(i + 1, j))
                || (j > 0 && !wet0(i, j - 1))
                || (j + 1 < spec.ny && !wet0(i, j + 1));
            if edge {
                shore.push((spec.x_at(i), spec.y_at(j)));
            }
        }
    }
    let mut report = RunupReport::<T>::default();
    let mut count = 0usize;
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let k = spec.idx(i, j);
            if wet0(i, j) || !ever_wet[k] {
                continue;
            }
            count += 1;
            report.max_runup_height = report.max_runup_height.max(max.max_eta.values()[k]);
            let (x, y) = (spec.x_at(i), spec.y_at(j));
            let d = shore
                .iter()
                .map(|&(sx, sy)| hypot2(x - sx, y - sy))
                .fold(T::infinity(), |a, b| a.min(b));
            if d.is_finite() {
                report.max_runup_distance = report.max_runup_distance.max(d);
            }
        }
    }
    report.inundated_area = T::from_usize(count).unwrap() * spec.cell_area();
    Ok(report)
}

/// One CSV per gauge series with header `t,eta,h,u,v`.
pub fn write_gauge_csv<T: Real>(series: &GaugeSeries<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("t,eta,h,u,v\n");
    for s in &series.samples {
        writeln!(out, "{},{},{},{},{}", s.t, s.eta, s.h, s.u, s.v).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes `max_eta.asc`, `max_speed.asc` and `arrival.asc` into `dir`.
pub fn write_max_fields<T: Real>(max: &MaxFields<T>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_esri_ascii(&max.max_eta, dir.join("max_eta.asc"))?;
    write_esri_ascii(&max.max_speed, dir.join("max_speed.asc"))?;
    write_esri_ascii(&max.arrival, dir.join("arrival.asc"))
}
