//! Built-in verification cases with analytic or structural reference
//! solutions.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::num::Real;
use crate::raster::{GridSpec, ScalarField};
use crate::rheology::{Bingham, HerschelBulkleyParams, MaterialParams};
use crate::slide::{advance, init_slide_state, run_slide, yield_check, CellMotion, SlideConfig, SlideState};
use crate::water::{compute_swe_timestep, init_water_state, swe_step, SWEConfig, SweTimestep, WaterState};

#[derive(Clone, Debug, PartialEq)]
pub struct CaseResult {
    pub name: &'static str,
    /// Measured quantity, as a human-readable `key=value` list.
    pub measured: String,
    pub passed: bool,
}

/// Outcome of the verification suite.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub cases: Vec<CaseResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.cases {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(out, "{tag} {} {}", c.name, c.measured).unwrap();
        }
        out
    }
}

fn step_until<T: Real>(
    mut s: WaterState<T>,
    cfg: &SWEConfig<T>,
    mut stop: impl FnMut(&WaterState<T>) -> bool,
) -> Result<WaterState<T>> {
    while !stop(&s) {
        match compute_swe_timestep(&s, cfg) {
            SweTimestep::Step(dt) if dt > T::zero() => s = swe_step(&s, cfg, dt)?,
            _ => break,
        }
    }
    Ok(s)
}

/// Still water over a rough bed: largest surface anomaly after `steps`
/// steps and the elapsed wall time in seconds.
pub fn lake_at_rest(n: usize, steps: usize) -> Result<(f64, f64)> {
    let spec = GridSpec::square(n, n, 10.0, 0.0, 0.0)?;
    let bed = rough_bed(spec);
    let cfg = SWEConfig::new(0.0, f64::INFINITY);
    let mut s = init_water_state(&bed, &cfg);
    let start = Instant::now();
    for _ in 0..steps {
        let SweTimestep::Step(dt) = compute_swe_timestep(&s, &cfg) else {
            break;
        };
        s = swe_step(&s, &cfg, dt)?;
    }
    let elapsed = start.elapsed().as_secs_f64();
    let max = s
        .surface(cfg.h_dry, f64::NAN)
        .values()
        .iter()
        .filter(|v| !v.is_nan())
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    Ok((max, elapsed))
}

/// Deterministic rough bathymetry with islands and a dry rim.
pub fn rough_bed(spec: GridSpec<f64>) -> ScalarField<f64> {
    let (lx, ly) = (spec.x_max() - spec.x0, spec.y_max() - spec.y0);
    let mut state = 0x2545_f491_4f6c_dd1du64;
    ScalarField::from_fn(spec, |x, y| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        let noise = (state >> 11) as f64 / (1u64 << 53) as f64;
        let (sx, sy) = ((x - spec.x0) / lx, (y - spec.y0) / ly);
        let bowl = -40.0 + 60.0 * ((2.0 * sx - 1.0).powi(4) + (2.0 * sy - 1.0).powi(4));
        let ridge = 30.0 * (-((sx - 0.35).powi(2) + (sy - 0.6).powi(2)) / 0.004).exp();
        bowl + ridge + 4.0 * noise
    })
}

/// Dam break of depth `h_l` onto a dry bed in a 1D channel of `cells`
/// cells. Runs until the wet front has advanced `crossed` cells and returns
/// `(t, numerical front advance, analytic advance)`.
pub fn ritter(cells: usize, h_l: f64, crossed: usize, front_tol: f64) -> Result<(f64, f64, f64)> {
    let dx = 1.0;
    let spec = GridSpec::new(cells, 1, dx, dx, 0.5 * dx, 0.0)?;
    let mut cfg = SWEConfig::new(0.0, f64::INFINITY);
    cfg.h_dry = front_tol;
    let dam = cells / 2;
    let x_dam = dam as f64 * dx;
    let mut s = init_water_state(&ScalarField::filled(spec, 0.0), &cfg);
    for i in 0..dam {
        s.h.set(i, 0, h_l);
    }
    let front = |s: &WaterState<f64>| {
        let last = (0..cells).rev().find(|&i| s.h.get(i, 0) > front_tol).unwrap_or(0);
        (last + 1) as f64 * dx - x_dam
    };
    let target = crossed as f64 * dx;
    let s = step_until(s, &cfg, |s| front(s) >= target)?;
    let analytic = 2.0 * (cfg.g * h_l).sqrt() * s.t;
    Ok((s.t, front(&s), analytic))
}

/// Wet-bed dam break: returns the numerical middle-state depth (mean over
/// the central half of the analytic plateau) and the analytic value.
pub fn stoker(cells: usize, h_l: f64, h_r: f64, t_end: f64) -> Result<(f64, f64)> {
    let g = 9.81;
    let length = 100.0;
    let dx = length / cells as f64;
    let spec = GridSpec::new(cells, 1, dx, dx, 0.5 * dx, 0.0)?;
    let cfg = SWEConfig::new(0.0, t_end);
    let mut s = init_water_state(&ScalarField::filled(spec, 0.0), &cfg);
    let x_dam = 0.5 * length;
    for i in 0..cells {
        s.h.set(i, 0, if spec.x_at(i) < x_dam { h_l } else { h_r });
    }
    let s = step_until(s, &cfg, |s| s.t >= t_end)?;
    let h_m = stoker_middle_depth(h_l, h_r, g);
    let c_m = (g * h_m).sqrt();
    let u_m = 2.0 * ((g * h_l).sqrt() - c_m);
    let shock = h_m * u_m / (h_m - h_r);
    let (a, b) = (x_dam + (u_m - c_m) * s.t, x_dam + shock * s.t);
    let (lo, hi) = (a + 0.25 * (b - a), b - 0.25 * (b - a));
    let inside: Vec<f64> = (0..cells)
        .filter(|&i| (lo..=hi).contains(&spec.x_at(i)))
        .map(|i| s.h.get(i, 0))
        .collect();
    if inside.is_empty() {
        return Err(Error::Validation("plateau narrower than one cell".into()));
    }
    Ok((inside.iter().sum::<f64>() / inside.len() as f64, h_m))
}

/// Middle depth of the wet dam-break problem by Newton iteration on the
/// Riemann invariant / shock relation.
pub fn stoker_middle_depth(h_l: f64, h_r: f64, g: f64) -> f64 {
    let c_l = (g * h_l).sqrt();
    let f = |h: f64| {
        let rare = 2.0 * (c_l - (g * h).sqrt());
        let shock = (h - h_r) * (0.5 * g * (h + h_r) / (h * h_r)).sqrt();
        rare - shock
    };
    let mut h = 0.5 * (h_l + h_r);
    for _ in 0..100 {
        let eps = 1e-7 * h;
        let d = (f(h + eps) - f(h - eps)) / (2.0 * eps);
        let step = f(h) / d;
        h -= step;
        if step.abs() < 1e-15 * h {
            break;
        }
    }
    h
}

/// Planar free-surface oscillation in a paraboloid.
#[derive(Clone, Copy, Debug)]
pub struct Thacker {
    pub a: f64,
    pub h0: f64,
    pub eta: f64,
    pub g: f64,
}

impl Default for Thacker {
    fn default() -> Self {
        Self {
            a: 1.0,
            h0: 0.1,
            eta: 0.5,
            g: 9.81,
        }
    }
}

impl Thacker {
    pub fn omega(&self) -> f64 {
        (2.0 * self.g * self.h0).sqrt() / self.a
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega()
    }

    /// Surface displacement scale.
    pub fn amplitude(&self) -> f64 {
        2.0 * self.eta * self.h0 / self.a
    }

    pub fn bed(&self, x: f64, y: f64) -> f64 {
        self.h0 * ((x * x + y * y) / (self.a * self.a) - 1.0)
    }

    pub fn depth(&self, x: f64, y: f64, t: f64) -> f64 {
        let w = self.omega() * t;
        let dx = x - self.eta * w.cos();
        let dy = y - self.eta * w.sin();
        (self.h0 / (self.a * self.a) * (self.a * self.a - dx * dx - dy * dy)).max(0.0)
    }

    pub fn velocity(&self, t: f64) -> (f64, f64) {
        let w = self.omega();
        (-self.eta * w * (w * t).sin(), self.eta * w * (w * t).cos())
    }

    /// Runs one period on an `n`×`n` grid over [-2a, 2a]² and returns the
    /// RMS depth error relative to [`Thacker::amplitude`].
    pub fn run(&self, n: usize) -> Result<f64> {
        let width = 4.0 * self.a;
        let dx = width / n as f64;
        let x0 = -0.5 * width + 0.5 * dx;
        let spec = GridSpec::square(n, n, dx, x0, x0)?;
        let bed = ScalarField::from_fn(spec, |x, y| self.bed(x, y));
        let mut cfg = SWEConfig::new(0.0, self.period());
        cfg.g = self.g;
        cfg.h_dry = 1e-4 * self.h0;
        let mut s = init_water_state(&bed, &cfg);
        let (u, v) = self.velocity(0.0);
        for j in 0..n {
            for i in 0..n {
                let h = self.depth(spec.x_at(i), spec.y_at(j), 0.0);
                s.h.set(i, j, h);
                if h >= cfg.h_dry {
                    s.hu.set(i, j, h * u);
                    s.hv.set(i, j, h * v);
                }
            }
        }
        let t_end = cfg.t_end;
        let eps = 1e-12 * t_end;
        let s = step_until(s, &cfg, |s| s.t >= t_end - eps)?;
        let mut sum = 0.0;
        let mut count = 0usize;
        for j in 0..n {
            for i in 0..n {
                let exact = self.depth(spec.x_at(i), spec.y_at(j), s.t);
                let num = s.h.get(i, j);
                if exact > 0.0 || num >= cfg.h_dry {
                    sum += (num - exact).powi(2);
                    count += 1;
                }
            }
        }
        Ok((sum / count as f64).sqrt() / self.amplitude())
    }
}

/// A sub-yield mound on a gentle slope. Returns the largest speed seen in
/// any frame (zero when nothing moves) and whether every frame equals the
/// initial surface.
pub fn static_yield() -> Result<(f64, bool)> {
    let spec = GridSpec::<f64>::square(40, 40, 5.0, 0.0, 0.0)?;
    let bed = ScalarField::from_fn(spec, |x, y| -30.0 - 0.002 * x - 0.001 * y);
    let hb = HerschelBulkleyParams::new(65.0, 10.0, 0.5)?;
    let mat = MaterialParams::new(1500.0, 1000.0, 1.0, 0.01, 1.0, 9.81)?;
    let cfg = SlideConfig::new(hb, mat, bed.clone(), 600.0)?;
    let (cx, cy) = (spec.x_at(20), spec.y_at(20));
    let mound = ScalarField::from_fn(spec, |x, y| {
        let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
        if d < 100.0 {
            0.1 * (1.0 + (std::f64::consts::PI * d / 100.0).cos())
        } else {
            0.0
        }
    });
    let mut peak = 0.0f64;
    let mut s = init_slide_state(&mound, &cfg)?;
    debug_assert!(
        (0..spec.ny).all(|j| (0..spec.nx).all(|i| yield_check(&s, &cfg, i, j) == CellMotion::Static)),
        "mound is not sub-yield"
    );
    while s.t < cfg.t_end {
        let (n, rep) = advance(&s, &cfg)?;
        peak = peak.max(rep.max_speed);
        s = n;
    }
    let (series, _) = run_slide(&mound, &cfg, 1.0)?;
    let surface = bed.zip_map(&mound, |b, h| b + h)?;
    let frozen = series.frames().iter().all(|f| f.field == surface);
    Ok((peak, frozen))
}

/// Largest mirror asymmetry about the horizontal centre line of a
/// symmetric slide and basin, over all slide frames and the final water
/// surface.
pub fn mirror_asymmetry(field: &ScalarField<f64>) -> f64 {
    let spec = field.spec();
    let mut worst = 0.0f64;
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let a = field.get(i, j);
            let b = field.get(i, spec.ny - 1 - j);
            if field.is_nodata_value(a) != field.is_nodata_value(b) {
                return f64::INFINITY;
            }
            if !field.is_nodata_value(a) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    worst
}

/// Runs the same two-layer state through the general Herschel-Bulkley path
/// with `n = 1` and the dedicated Bingham path; true if the results match
/// bit for bit.
pub fn bingham_reduction(steps: usize) -> Result<bool> {
    let spec = GridSpec::<f64>::square(30, 30, 5.0, 0.0, 0.0)?;
    let bed = ScalarField::from_fn(spec, |x, y| -0.15 * x - 0.05 * y);
    let hb = HerschelBulkleyParams::new(65.0, 10.0, 1.0)?;
    let mat = MaterialParams::new(1500.0, 1000.0, 1.0, 0.01, 1.0, 9.81)?;
    let general = SlideConfig::new(hb, mat, bed, 1e6)?;
    let bingham = general.clone().with_closure(Bingham { tau_y: 65.0, mu: 10.0 });
    let (cx, cy) = (spec.x_at(15), spec.y_at(15));
    let h = ScalarField::from_fn(spec, |x, y| {
        let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
        (12.0 * (1.0 - d / 50.0)).max(0.0)
    });
    let zero = ScalarField::filled(spec, 0.0);
    let moving = h.map(|x| if x > 0.0 { 0.8 } else { 0.0 });
    let mut a = SlideState::from_layers(h.map(|x| 0.6 * x), h.map(|x| 0.4 * x), moving, zero)?;
    let mut b = a.clone();
    for _ in 0..steps {
        a = advance(&a, &general)?.0;
        b = advance(&b, &bingham)?.0;
    }
    Ok(a == b)
}

/// Runs every case and writes `validation.txt` into `out_dir`.
pub fn run_validation_suite(out_dir: impl AsRef<Path>) -> Result<ValidationReport> {
    let out_dir = out_dir.as_ref();
    let mut report = ValidationReport::default();
    let mut push = |name, measured: String, passed| {
        report.cases.push(CaseResult { name, measured, passed });
    };

    let (anomaly, secs) = lake_at_rest(200, 1000)?;
    push(
        "lake_at_rest",
        format!("max_anomaly={anomaly:e} seconds={secs:.2}"),
        anomaly < 1e-10,
    );

    let (t, front, exact) = ritter(400, 1.0, 50, 1e-6)?;
    let err = (front - exact).abs() / exact;
    push(
        "ritter",
        format!("t={t:.4} front={front:.3} analytic={exact:.3} rel_err={err:.4}"),
        err <= 0.05,
    );

    let (h_num, h_m) = stoker(400, 1.0, 0.1, 4.0)?;
    let err = (h_num - h_m).abs() / h_m;
    push(
        "stoker",
        format!("h_m={h_num:.5} analytic={h_m:.5} rel_err={err:.4}"),
        err <= 0.02,
    );

    let case = Thacker::default();
    let coarse = case.run(100)?;
    let fine = case.run(200)?;
    let ratio = coarse / fine;
    push(
        "thacker",
        format!("l2_100={coarse:.4} l2_200={fine:.4} ratio={ratio:.3}"),
        fine <= 0.05 && (1.4..=2.6).contains(&ratio),
    );

    let (peak, frozen) = static_yield()?;
    push(
        "static_yield",
        format!("max_speed={peak:e} frozen={frozen}"),
        peak == 0.0 && frozen,
    );

    let sym = crate::scenario::symmetry_case()?;
    push("symmetry", format!("max_asymmetry={sym:e}"), sym <= 1e-10);

    let same = bingham_reduction(60)?;
    push("bingham_reduction", format!("bit_identical={same}"), same);

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let path = out_dir.join("validation.txt");
    std::fs::write(&path, report.render()).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}
