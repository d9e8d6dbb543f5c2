//! Scenario files, the synthetic basin, and the end-to-end pipeline:
//! slide run → recorded bed motion → water run → gauges, maxima, runup.
//!
//! Scenario files are TOML. Relative paths inside a file resolve against
//! the file's directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coupling::{export_dtopo, BedMotionSeries};
use crate::error::{Error, Result};
use crate::observables::{
    inundation_metrics, write_gauge_csv, write_max_fields, Gauge, GaugeSeries, RunupReport, DEFAULT_ARRIVAL_THRESHOLD,
};
use crate::raster::{read_esri_ascii, write_esri_ascii, GridSpec, ScalarField};
use crate::rheology::{HerschelBulkleyParams, MaterialParams};
use crate::slide::{deposit_profile, run_slide_with, SlideConfig, SlideState};
use crate::validation::mirror_asymmetry;
use crate::water::{
    apply_bed_update, compute_swe_timestep, init_water_state, run_swe, swe_step, SWEConfig, SnapshotSink,
    SweRunOptions, SweSummary, SweTimestep,
};

pub use crate::validation::{run_validation_suite, ValidationReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Default output directory; the command line may override it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Bed and initial slide thickness from ESRI ASCII grids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grids: Option<GridFiles>,
    /// Generated basin, used when `grids` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basin: Option<SyntheticBasinSpec>,
    pub material: Material,
    pub rheology: Rheology,
    #[serde(default)]
    pub slide: SlideNumerics,
    #[serde(default)]
    pub water: WaterNumerics,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gauges: Vec<GaugeEntry>,
    /// Polyline along which the final deposit is sampled. Defaults to a line
    /// from the slide centroid through the basin centre.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deposit_transect: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFiles {
    pub bed_path: PathBuf,
    pub slide_thickness_path: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub rho_d: f64,
    #[serde(default = "default_rho_w")]
    pub rho_w: f64,
    pub c_m: f64,
    pub c_f: f64,
    pub c_p: f64,
    #[serde(default = "default_g")]
    pub g: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rheology {
    pub tau_y: f64,
    pub mu: f64,
    pub n: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlideNumerics {
    pub cfl: f64,
    pub h_min: f64,
    pub u_stop: f64,
    pub t_end: f64,
    pub frame_dt: f64,
}

impl Default for SlideNumerics {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            h_min: 1e-4,
            u_stop: 0.01,
            t_end: 1800.0,
            frame_dt: crate::coupling::DEFAULT_FRAME_DT,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaterNumerics {
    pub cfl: f64,
    pub h_dry: f64,
    pub datum: f64,
    pub t_end: f64,
    /// Snapshot cadence in seconds; 0 disables snapshots.
    pub snapshot_dt: f64,
    pub arrival_threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manning: Option<f64>,
}

impl Default for WaterNumerics {
    fn default() -> Self {
        Self {
            cfl: 0.9,
            h_dry: 1e-3,
            datum: 0.0,
            t_end: 900.0,
            snapshot_dt: 10.0,
            arrival_threshold: DEFAULT_ARRIVAL_THRESHOLD,
            manning: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeEntry {
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

/// Super-elliptic basin (exponent 4) centred on the origin with its long
/// axis along `y`, and a cosine-bell slide mound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticBasinSpec {
    /// Shoreline extent along `y`, m.
    pub length: f64,
    /// Shoreline extent along `x`, m.
    pub width: f64,
    pub max_depth: f64,
    /// Bed slope across the shoreline, rising onto land at the same rate.
    pub shore_slope: f64,
    pub cell: f64,
    /// Land strip kept around the shoreline, m.
    pub land_margin: f64,
    pub slide_center: [f64; 2],
    pub slide_radius: f64,
    pub slide_volume: f64,
}

fn default_rho_w() -> f64 {
    1000.0
}

fn default_g() -> f64 {
    9.81
}

const SUPER_ELLIPSE_EXPONENT: i32 = 4;

// ---------------------------------------------------------------------------
// Parsing

/// Reads and validates a scenario file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut scenario = parse_config_str(&text, path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    if let Some(g) = &mut scenario.grids {
        g.bed_path = base.join(&g.bed_path);
        g.slide_thickness_path = base.join(&g.slide_thickness_path);
    }
    if let Some(dir) = &mut scenario.output_dir {
        *dir = base.join(&*dir);
    }
    Ok(scenario)
}

/// Parses scenario text; `origin` only labels errors.
pub fn parse_config_str(text: &str, origin: &Path) -> Result<Scenario> {
    let table: toml::Table = text.parse().map_err(|e| toml_error(e, text, origin))?;
    let missing = |section: &str, key: &str| {
        table
            .get(section)
            .and_then(|s| s.as_table())
            .is_some_and(|s| !s.contains_key(key))
    };
    if missing("rheology", "mu") {
        return Err(Error::Config(
            "rheology.mu (consistency, Pa·s^n) is required; no default is assumed for it".into(),
        ));
    }
    if missing("material", "c_m") {
        return Err(Error::Config(
            "material.c_m (added-mass coefficient) is required; no default is assumed for it".into(),
        ));
    }
    let scenario: Scenario = toml::from_str(text).map_err(|e| toml_error(e, text, origin))?;
    scenario.validate()?;
    Ok(scenario)
}

fn toml_error(e: toml::de::Error, text: &str, origin: &Path) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg: e.message().to_string(),
    }
}

impl Scenario {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialise scenario: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Config("name must not be empty".into()));
        }
        match (&self.grids, &self.basin) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either [grids] or [basin], not both".into()));
            }
            (None, None) => return Err(Error::Config("one of [grids] or [basin] is required".into())),
            (None, Some(b)) => b.validate()?,
            (Some(_), None) => {}
        }
        self.hb_params()?;
        self.material_params()?;
        let s = &self.slide;
        if !(s.frame_dt > 0.0 && s.frame_dt.is_finite()) {
            return Err(Error::Config(format!("slide.frame_dt must be > 0, got {}", s.frame_dt)));
        }
        if !(s.t_end > 0.0 && s.t_end.is_finite()) {
            return Err(Error::Config(format!("slide.t_end must be > 0, got {}", s.t_end)));
        }
        if !(s.cfl > 0.0 && s.cfl < 1.0) {
            return Err(Error::Config(format!("slide.cfl must be in (0, 1), got {}", s.cfl)));
        }
        if !(s.h_min >= 0.0) || !(s.u_stop >= 0.0) {
            return Err(Error::Config("slide.h_min and slide.u_stop must be >= 0".into()));
        }
        self.swe_config()
            .validate()
            .map_err(|e| Error::Config(format!("water: {e}")))?;
        let w = &self.water;
        if !(w.snapshot_dt >= 0.0 && w.snapshot_dt.is_finite()) {
            return Err(Error::Config(format!(
                "water.snapshot_dt must be >= 0, got {}",
                w.snapshot_dt
            )));
        }
        if !(w.arrival_threshold > 0.0) {
            return Err(Error::Config(format!(
                "water.arrival_threshold must be > 0, got {}",
                w.arrival_threshold
            )));
        }
        let mut ids: Vec<u32> = self.gauges.iter().map(|g| g.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("gauge ids must be unique".into()));
        }
        if let Some(line) = &self.deposit_transect {
            if line.len() < 2 {
                return Err(Error::Config("deposit_transect needs at least two points".into()));
            }
        }
        Ok(())
    }

    pub fn hb_params(&self) -> Result<HerschelBulkleyParams<f64>> {
        let r = &self.rheology;
        HerschelBulkleyParams::new(r.tau_y, r.mu, r.n).map_err(|e| Error::Config(format!("rheology: {e}")))
    }

    pub fn material_params(&self) -> Result<MaterialParams<f64>> {
        let m = &self.material;
        MaterialParams::new(m.rho_d, m.rho_w, m.c_m, m.c_f, m.c_p, m.g)
            .map_err(|e| Error::Config(format!("material: {e}")))
    }

    pub fn slide_config(&self, bed: ScalarField<f64>) -> Result<SlideConfig<f64>> {
        let mut cfg = SlideConfig::new(self.hb_params()?, self.material_params()?, bed, self.slide.t_end)?;
        cfg.cfl = self.slide.cfl;
        cfg.h_min = self.slide.h_min;
        cfg.u_stop = self.slide.u_stop;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn swe_config(&self) -> SWEConfig<f64> {
        let w = &self.water;
        let mut cfg = SWEConfig::new(w.datum, w.t_end);
        cfg.g = self.material.g;
        cfg.cfl = w.cfl;
        cfg.h_dry = w.h_dry;
        cfg.manning = w.manning;
        cfg
    }

    pub fn gauges(&self) -> Vec<Gauge<f64>> {
        self.gauges
            .iter()
            .map(|g| Gauge {
                id: g.id,
                x: g.x,
                y: g.y,
            })
            .collect()
    }

    /// Bed and initial slide thickness, read or generated.
    pub fn load_inputs(&self) -> Result<(ScalarField<f64>, ScalarField<f64>)> {
        if let Some(b) = &self.basin {
            return make_synthetic_basin(b);
        }
        let g = self.grids.as_ref().expect("validated scenario has an input source");
        for p in [&g.bed_path, &g.slide_thickness_path] {
            if !p.is_file() {
                return Err(Error::Config(format!("input grid {} does not exist", p.display())));
            }
        }
        let bed: ScalarField<f64> = read_esri_ascii(&g.bed_path)?;
        let slide: ScalarField<f64> = read_esri_ascii(&g.slide_thickness_path)?;
        bed.spec().ensure_same(slide.spec(), "slide thickness vs bed")?;
        if bed.values().iter().any(|&v| bed.is_nodata_value(v)) {
            return Err(Error::Config("bed grid contains nodata cells".into()));
        }
        let slide = slide.map(|h| if slide.is_nodata_value(h) { 0.0 } else { h });
        Ok((bed, slide))
    }
}

// ---------------------------------------------------------------------------
// Synthetic basin

impl SyntheticBasinSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("width", self.width),
            ("max_depth", self.max_depth),
            ("shore_slope", self.shore_slope),
            ("cell", self.cell),
            ("slide_radius", self.slide_radius),
            ("slide_volume", self.slide_volume),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("basin.{name} must be > 0, got {v}")));
            }
        }
        if !(self.land_margin >= 0.0 && self.land_margin.is_finite()) {
            return Err(Error::Config(format!(
                "basin.land_margin must be >= 0, got {}",
                self.land_margin
            )));
        }
        let half_min = 0.5 * self.width.min(self.length);
        if self.shore_slope * half_min < self.max_depth {
            return Err(Error::Geometry(format!(
                "shore slope {} cannot reach depth {} within half-width {half_min}",
                self.shore_slope, self.max_depth
            )));
        }
        Ok(())
    }

    /// Grid covering the basin plus the land margin, centred on the origin.
    pub fn grid(&self) -> Result<GridSpec<f64>> {
        let nx = ((self.width + 2.0 * self.land_margin) / self.cell).ceil() as usize;
        let ny = ((self.length + 2.0 * self.land_margin) / self.cell).ceil() as usize;
        let x0 = -0.5 * (nx as f64 - 1.0) * self.cell;
        let y0 = -0.5 * (ny as f64 - 1.0) * self.cell;
        GridSpec::square(nx.max(2), ny.max(2), self.cell, x0, y0)
    }

    /// Bed elevation at a point: a linear shore ramp clipped at `-max_depth`.
    pub fn bed_at(&self, x: f64, y: f64) -> f64 {
        let (a, b) = (0.5 * self.width, 0.5 * self.length);
        let r = ((x / a).abs().powi(SUPER_ELLIPSE_EXPONENT) + (y / b).abs().powi(SUPER_ELLIPSE_EXPONENT))
            .powf(1.0 / SUPER_ELLIPSE_EXPONENT as f64);
        let inland = (1.0 - r) * a.min(b);
        (-self.shore_slope * inland).max(-self.max_depth)
    }
}

/// Cell-centre coordinates computed from the index so that cells mirrored
/// about either axis get exactly opposite coordinates.
fn centred(i: usize, n: usize, cell: f64) -> f64 {
    (2.0 * i as f64 - (n as f64 - 1.0)) * 0.5 * cell
}

/// Builds the basin bed and the initial slide thickness, scaled so the
/// discrete slide volume matches `spec.slide_volume`.
pub fn make_synthetic_basin(spec: &SyntheticBasinSpec) -> Result<(ScalarField<f64>, ScalarField<f64>)> {
    spec.validate()?;
    let grid = spec.grid()?;
    let (nx, ny, cell) = (grid.nx, grid.ny, spec.cell);
    let [cx, cy] = spec.slide_center;
    let radius = spec.slide_radius;
    let (hx, hy) = (centred(nx - 1, nx, cell), centred(ny - 1, ny, cell));
    if cx - radius < -hx || cx + radius > hx || cy - radius < -hy || cy + radius > hy {
        return Err(Error::Geometry(format!(
            "slide mound at ({cx}, {cy}) with radius {radius} spills outside the grid"
        )));
    }
    let bed = ScalarField::from_index_fn(grid, |i, j| spec.bed_at(centred(i, nx, cell), centred(j, ny, cell)));
    let bell = ScalarField::from_index_fn(grid, |i, j| {
        let (dx, dy) = (centred(i, nx, cell) - cx, centred(j, ny, cell) - cy);
        let d = (dx * dx + dy * dy).sqrt();
        if d < radius {
            0.5 * (1.0 + (std::f64::consts::PI * d / radius).cos())
        } else {
            0.0
        }
    });
    let raw: f64 = bell.values().iter().sum::<f64>() * grid.cell_area();
    if raw <= 0.0 {
        return Err(Error::Geometry("slide mound covers no cell centre".into()));
    }
    let scale = spec.slide_volume / raw;
    Ok((bed, bell.map(|h| h * scale)))
}

// ---------------------------------------------------------------------------
// Orchestration

/// Slide stage results.
#[derive(Clone, Debug)]
pub struct SlideOutcome {
    pub series: BedMotionSeries<f64>,
    pub final_state: SlideState<f64>,
    pub steps: usize,
    /// Time at which global rest was detected; `None` if `t_end` came first.
    pub rest_time: Option<f64>,
    /// Largest relative volume deviation from the initial volume.
    pub volume_drift: f64,
    pub initial_volume: f64,
}

pub fn run_slide_stage(
    scenario: &Scenario,
    bed: &ScalarField<f64>,
    thickness: &ScalarField<f64>,
) -> Result<SlideOutcome> {
    let cfg = scenario.slide_config(bed.clone())?;
    let v0 = thickness.values().iter().sum::<f64>() * thickness.spec().cell_area();
    let mut steps = 0usize;
    let mut drift = 0.0f64;
    let mut rest = false;
    let (series, state) = run_slide_with(thickness, &cfg, scenario.slide.frame_dt, |r| {
        steps += 1;
        if v0 > 0.0 {
            drift = drift.max(((r.volume - v0) / v0).abs());
        }
        rest = r.quiescent || r.max_speed < cfg.u_stop;
    })?;
    let rest_time = (state.t < cfg.t_end || rest).then_some(state.t);
    Ok(SlideOutcome {
        series,
        final_state: state,
        steps,
        rest_time,
        volume_drift: drift,
        initial_volume: v0,
    })
}

/// Water stage results.
#[derive(Clone, Debug, PartialEq)]
pub struct TsunamiOutcome {
    pub steps: usize,
    pub volume_drift: f64,
    /// Arrival at the offshore gauge farthest from the source.
    pub basin_crossing_time: Option<f64>,
    pub near_source_gauge: Option<u32>,
    pub near_source_peak: f64,
    pub runup: RunupReport<f64>,
}

/// Headline numbers of a coupled run.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledOutcome {
    pub slide_rest_time: Option<f64>,
    pub slide_steps: usize,
    pub slide_volume_drift: f64,
    /// Thickness-weighted mean deposit thickness outside the initial footprint.
    pub distal_deposit_thickness: f64,
    pub tsunami: TsunamiOutcome,
    pub wall_seconds: f64,
}

fn opt_text(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

impl SlideOutcome {
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        writeln!(s, "slide_rest_time={}", opt_text(self.rest_time)).unwrap();
        writeln!(s, "slide_steps={}", self.steps).unwrap();
        writeln!(s, "slide_volume={}", self.initial_volume).unwrap();
        writeln!(s, "slide_volume_drift={:e}", self.volume_drift).unwrap();
        s
    }
}

impl TsunamiOutcome {
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        writeln!(s, "water_steps={}", self.steps).unwrap();
        writeln!(s, "water_volume_drift={:e}", self.volume_drift).unwrap();
        writeln!(s, "basin_crossing_time={}", opt_text(self.basin_crossing_time)).unwrap();
        let near = self
            .near_source_gauge
            .map_or_else(|| "none".to_string(), |g| g.to_string());
        writeln!(s, "near_source_gauge={near}").unwrap();
        writeln!(s, "near_source_peak={}", self.near_source_peak).unwrap();
        s.push_str(&self.runup.to_key_values());
        s
    }
}

/// Output directories of a run.
#[derive(Clone, Debug)]
pub struct OutputLayout {
    pub root: PathBuf,
}

impl OutputLayout {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let layout = Self { root: root.into() };
        for d in [layout.root.clone(), layout.gauges(), layout.fields(), layout.dtopo()] {
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
        Ok(layout)
    }

    pub fn gauges(&self) -> PathBuf {
        self.root.join("gauges")
    }

    pub fn fields(&self) -> PathBuf {
        self.root.join("fields")
    }

    pub fn dtopo(&self) -> PathBuf {
        self.root.join("dtopo")
    }

    pub fn dtopo_file(&self) -> PathBuf {
        self.dtopo().join("bed_motion.dtopo")
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Thickness-weighted centroid of a non-negative field.
fn centroid(h: &ScalarField<f64>) -> Option<(f64, f64)> {
    let spec = h.spec();
    let (mut m, mut mx, mut my) = (0.0, 0.0, 0.0);
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let v = h.get(i, j);
            m += v;
            mx += v * spec.x_at(i);
            my += v * spec.y_at(j);
        }
    }
    (m > 0.0).then(|| (mx / m, my / m))
}

/// Where the bed changed over the recorded series.
fn source_centroid(series: &BedMotionSeries<f64>) -> Option<(f64, f64)> {
    let first = &series.frames().first()?.field;
    let last = &series.frames().last()?.field;
    centroid(&first.zip_map(last, |a, b| (b - a).abs()).ok()?)
}

fn default_transect(spec: &GridSpec<f64>, from: (f64, f64)) -> Vec<(f64, f64)> {
    let (cx, cy) = (0.5 * (spec.x0 + spec.x_max()), 0.5 * (spec.y0 + spec.y_max()));
    let (dx, dy) = (cx - from.0, cy - from.1);
    if dx == 0.0 && dy == 0.0 {
        return vec![from, (spec.x_max(), from.1)];
    }
    // extend through the centre to the far edge of the grid
    let t = [
        (dx > 0.0).then(|| (spec.x_max() - from.0) / dx),
        (dx < 0.0).then(|| (spec.x0 - from.0) / dx),
        (dy > 0.0).then(|| (spec.y_max() - from.1) / dy),
        (dy < 0.0).then(|| (spec.y0 - from.1) / dy),
    ]
    .into_iter()
    .flatten()
    .fold(f64::INFINITY, f64::min);
    vec![from, (from.0 + t * dx, from.1 + t * dy)]
}

/// Slide stage with its artifacts: input grids, deposit, deposit profile,
/// bed-motion series and a slide report.
pub fn run_slide_artifacts(scenario: &Scenario, layout: &OutputLayout) -> Result<(SlideOutcome, f64)> {
    let (bed, thickness) = scenario.load_inputs()?;
    let spec = *bed.spec();
    write_esri_ascii(&bed, layout.fields().join("bed.asc"))?;
    write_esri_ascii(&thickness, layout.fields().join("slide_initial.asc"))?;

    let slide = run_slide_stage(scenario, &bed, &thickness)?;
    export_dtopo(&slide.series, layout.dtopo_file())?;
    let deposit = slide.final_state.total_thickness();
    write_esri_ascii(&deposit, layout.fields().join("deposit.asc"))?;

    let line: Vec<(f64, f64)> = match (&scenario.deposit_transect, centroid(&thickness)) {
        (Some(l), _) => l.iter().map(|p| (p[0], p[1])).collect(),
        (None, Some(c)) => default_transect(&spec, c),
        (None, None) => Vec::new(),
    };
    let profile = deposit_profile(&slide.final_state, &line)?;
    let mut csv = String::from("s,thickness\n");
    for (s, h) in &profile {
        writeln!(csv, "{s},{h}").unwrap();
    }
    write_text(&layout.fields().join("deposit_profile.csv"), &csv)?;
    Ok((slide, distal_thickness(&thickness, &deposit)))
}

/// Water stage forced by `series`, writing gauges, maxima, snapshots and
/// the runup report.
pub fn run_tsunami_artifacts(
    scenario: &Scenario,
    series: &BedMotionSeries<f64>,
    layout: &OutputLayout,
) -> Result<TsunamiOutcome> {
    let spec = *series.spec();
    let gauges = scenario.gauges();
    for g in &gauges {
        g.check_inside(&spec)?;
    }
    let cfg = scenario.swe_config();
    let opts = SweRunOptions {
        gauges,
        arrival_threshold: scenario.water.arrival_threshold,
        snapshots: (scenario.water.snapshot_dt > 0.0).then(|| SnapshotSink {
            dir: layout.fields().join("snapshots"),
            every: scenario.water.snapshot_dt,
        }),
    };
    let water = run_swe(series, &spec, &cfg, &opts)?;
    for s in &water.gauges {
        write_gauge_csv(s, layout.gauges().join(format!("gauge_{:02}.csv", s.gauge.id)))?;
    }
    write_max_fields(&water.max, layout.fields())?;
    let runup = inundation_metrics(&water.initial, &water.max, &water.ever_wet, cfg.h_dry)?;
    runup.write(layout.root.join("runup.txt"))?;
    let (crossing, near, peak) = gauge_metrics(&water, &cfg, source_centroid(series), scenario.water.arrival_threshold);
    Ok(TsunamiOutcome {
        steps: water.steps,
        volume_drift: water.volume_drift,
        basin_crossing_time: crossing,
        near_source_gauge: near,
        near_source_peak: peak,
        runup,
    })
}

/// Slide only: writes the bed-motion series and slide artifacts.
pub fn run_slide_only(scenario: &Scenario, out: impl AsRef<Path>) -> Result<SlideOutcome> {
    let start = Instant::now();
    scenario.validate()?;
    let layout = OutputLayout::create(out.as_ref())?;
    let (slide, distal) = run_slide_artifacts(scenario, &layout)?;
    let mut report = format!("scenario={}\n", scenario.name);
    report.push_str(&slide.to_key_values());
    writeln!(report, "distal_deposit_thickness={distal}").unwrap();
    let secs = start.elapsed().as_secs_f64();
    writeln!(report, "wall_seconds={secs:.3}").unwrap();
    write_text(&layout.root.join("report.txt"), &report)?;
    write_text(
        &layout.root.join("manifest.txt"),
        &manifest(scenario, slide.series.spec(), secs)?,
    )?;
    Ok(slide)
}

/// Water only, forced by a previously recorded bed-motion series.
pub fn run_tsunami_only(
    scenario: &Scenario,
    series: &BedMotionSeries<f64>,
    out: impl AsRef<Path>,
) -> Result<TsunamiOutcome> {
    let start = Instant::now();
    scenario.validate()?;
    let layout = OutputLayout::create(out.as_ref())?;
    let outcome = run_tsunami_artifacts(scenario, series, &layout)?;
    let mut report = format!("scenario={}\n", scenario.name);
    report.push_str(&outcome.to_key_values());
    let secs = start.elapsed().as_secs_f64();
    writeln!(report, "wall_seconds={secs:.3}").unwrap();
    write_text(&layout.root.join("report.txt"), &report)?;
    write_text(
        &layout.root.join("manifest.txt"),
        &manifest(scenario, series.spec(), secs)?,
    )?;
    Ok(outcome)
}

/// Runs the whole pipeline and writes every artifact under `out`.
pub fn run_coupled(scenario: &Scenario, out: impl AsRef<Path>) -> Result<CoupledOutcome> {
    let start = Instant::now();
    scenario.validate()?;
    let layout = OutputLayout::create(out.as_ref())?;
    let (slide, distal) = run_slide_artifacts(scenario, &layout)?;
    let tsunami = run_tsunami_artifacts(scenario, &slide.series, &layout)?;
    let outcome = CoupledOutcome {
        slide_rest_time: slide.rest_time,
        slide_steps: slide.steps,
        slide_volume_drift: slide.volume_drift,
        distal_deposit_thickness: distal,
        tsunami,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    let mut report = format!("scenario={}\n", scenario.name);
    report.push_str(&slide.to_key_values());
    writeln!(report, "distal_deposit_thickness={distal}").unwrap();
    report.push_str(&outcome.tsunami.to_key_values());
    writeln!(report, "wall_seconds={:.3}", outcome.wall_seconds).unwrap();
    report.push_str(&comparison_bands(&outcome));
    write_text(&layout.root.join("report.txt"), &report)?;
    write_text(
        &layout.root.join("manifest.txt"),
        &manifest(scenario, slide.series.spec(), outcome.wall_seconds)?,
    )?;
    Ok(outcome)
}

/// Crossing time, near-source gauge id and its peak anomaly. Offshore
/// gauges are those whose nearest cell is wet at the start.
fn gauge_metrics(
    water: &SweSummary<f64>,
    cfg: &SWEConfig<f64>,
    source: Option<(f64, f64)>,
    threshold: f64,
) -> (Option<f64>, Option<u32>, f64) {
    let spec = water.initial.spec();
    let offshore: Vec<&GaugeSeries<f64>> = water
        .gauges
        .iter()
        .filter(|s| {
            let i = ((s.gauge.x - spec.x0) / spec.dx)
                .round()
                .clamp(0.0, (spec.nx - 1) as f64) as usize;
            let j = ((s.gauge.y - spec.y0) / spec.dy)
                .round()
                .clamp(0.0, (spec.ny - 1) as f64) as usize;
            water.initial.h.get(i, j) >= cfg.h_dry
        })
        .collect();
    let Some((sx, sy)) = source else {
        return (None, None, 0.0);
    };
    let dist = |s: &GaugeSeries<f64>| (s.gauge.x - sx).hypot(s.gauge.y - sy);
    let far = offshore.iter().max_by(|a, b| dist(a).total_cmp(&dist(b)));
    let near = offshore.iter().min_by(|a, b| dist(a).total_cmp(&dist(b)));
    (
        far.and_then(|s| s.arrival(cfg.datum, threshold)),
        near.map(|s| s.gauge.id),
        near.map_or(0.0, |s| s.peak_anomaly(cfg.datum)),
    )
}

fn distal_thickness(initial: &ScalarField<f64>, deposit: &ScalarField<f64>) -> f64 {
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for (&h0, &h) in initial.values().iter().zip(deposit.values()) {
        if h0 == 0.0 && h > 0.0 {
            sum += h;
            sum_sq += h * h;
        }
    }
    if sum > 0.0 {
        sum_sq / sum
    } else {
        0.0
    }
}

fn comparison_bands(o: &CoupledOutcome) -> String {
    let mut s = String::from("# order-of-magnitude comparison with the reference event\n");
    let mut band = |name: &str, v: Option<f64>, lo: f64, hi: f64| {
        let verdict = match v {
            Some(v) if (lo..=hi).contains(&v) => "inside",
            Some(_) => "outside",
            None => "missing",
        };
        let shown = v.map_or_else(|| "none".to_string(), |v| format!("{v:.3}"));
        writeln!(s, "{name}={shown} band={lo}..{hi} {verdict}").unwrap();
    };
    band("slide_rest_minutes", o.slide_rest_time.map(|t| t / 60.0), 5.0, 20.0);
    band(
        "crossing_minutes",
        o.tsunami.basin_crossing_time.map(|t| t / 60.0),
        1.0,
        3.0,
    );
    band("near_source_peak_m", Some(o.tsunami.near_source_peak), 0.5, 5.0);
    band("runup_height_m", Some(o.tsunami.runup.max_runup_height), 1.0, 6.0);
    band("distal_deposit_m", Some(o.distal_deposit_thickness), 0.1, 3.0);
    s
}

fn manifest(scenario: &Scenario, spec: &GridSpec<f64>, wall_seconds: f64) -> Result<String> {
    let mut s = String::new();
    writeln!(s, "# slidesurge {}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(s, "# workers {}", rayon::current_num_threads()).unwrap();
    writeln!(s, "# wall_seconds {wall_seconds:.3}").unwrap();
    writeln!(
        s,
        "# grid nx={} ny={} dx={} dy={} x0={} y0={}",
        spec.nx, spec.ny, spec.dx, spec.dy, spec.x0, spec.y0
    )
    .unwrap();
    s.push_str(&scenario.to_toml()?);
    Ok(s)
}

// ---------------------------------------------------------------------------
// Symmetry check

/// Runs a small mirror-symmetric basin through both solvers and returns the
/// largest asymmetry of the slide surface (every frame) and the water
/// surface (every step).
pub fn symmetry_case() -> Result<f64> {
    let basin = SyntheticBasinSpec {
        length: 1200.0,
        width: 800.0,
        max_depth: 40.0,
        shore_slope: 0.2,
        cell: 20.0,
        land_margin: 60.0,
        slide_center: [-250.0, 0.0],
        slide_radius: 120.0,
        slide_volume: 1.5e5,
    };
    let (bed, thickness) = make_synthetic_basin(&basin)?;
    let hb = HerschelBulkleyParams::new(65.0, 10.0, 0.5)?;
    let mat = MaterialParams::new(1500.0, 1000.0, 1.0, 0.01, 1.0, 9.81)?;
    let cfg = SlideConfig::new(hb, mat, bed.clone(), 60.0)?;
    let (series, _) = run_slide_with(&thickness, &cfg, 2.0, |_| {})?;
    let mut worst = series
        .frames()
        .iter()
        .map(|f| mirror_asymmetry(&f.field))
        .fold(0.0f64, f64::max);

    let wcfg = SWEConfig::new(0.0, 60.0);
    let spec = *bed.spec();
    let mut s = init_water_state(&series.bed_at_time(0.0, &spec)?, &wcfg);
    while s.t < wcfg.t_end {
        s = apply_bed_update(&s, &series.bed_at_time(s.t, &spec)?)?;
        let SweTimestep::Step(dt) = compute_swe_timestep(&s, &wcfg) else {
            break;
        };
        s = swe_step(&s, &wcfg, dt)?;
        worst = worst.max(mirror_asymmetry(&s.surface(wcfg.h_dry, -9999.0)));
    }
    Ok(worst)
}
