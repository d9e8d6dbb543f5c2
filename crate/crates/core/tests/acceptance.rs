//! Acceptance criteria. Prints one PASS/FAIL line per criterion.
//!
//! Every reference value is computed here, independently of the library's
//! own validation helpers. The process fails only if a criterion cannot be
//! evaluated at all; set `ACCEPTANCE_STRICT=1` to also fail on any FAIL line.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use slidesurge::par::Workers;
use slidesurge::raster::{GridSpec, ScalarField};
use slidesurge::rheology::{
    form_factor_alpha, hb_strain_rate, reduced_gravity, shape_factor_beta, Bingham, HerschelBulkleyParams,
    MaterialParams,
};
use slidesurge::scenario::{make_synthetic_basin, parse_config, parse_config_str, run_coupled, run_slide_stage};
use slidesurge::slide::{advance, init_slide_state, run_slide, SlideConfig, SlideState};
use slidesurge::water::{
    apply_bed_update, compute_swe_timestep, init_water_state, swe_step, SWEConfig, SweTimestep, WaterState,
};

type Verdict = (bool, String);
type Criterion = (&'static str, fn() -> Verdict);

const G: f64 = 9.81;

fn table_material() -> MaterialParams<f64> {
    MaterialParams::new(1500.0, 1000.0, 1.0, 0.01, 1.0, G).unwrap()
}

fn table_rheology(n: f64) -> HerschelBulkleyParams<f64> {
    HerschelBulkleyParams::new(65.0, 10.0, n).unwrap()
}

fn step(s: &WaterState<f64>, cfg: &SWEConfig<f64>) -> Option<WaterState<f64>> {
    match compute_swe_timestep(s, cfg) {
        SweTimestep::Step(dt) => Some(swe_step(s, cfg, dt).unwrap()),
        SweTimestep::Quiescent => None,
    }
}

fn run_until(mut s: WaterState<f64>, cfg: &SWEConfig<f64>, done: impl Fn(&WaterState<f64>) -> bool) -> WaterState<f64> {
    while !done(&s) {
        match step(&s, cfg) {
            Some(n) => s = n,
            None => break,
        }
    }
    s
}

/// Hilly bed with pits, an island and a dry rim; values from a fixed LCG.
fn rough_bed(n: usize, cell: f64) -> ScalarField<f64> {
    let spec = GridSpec::square(n, n, cell, 0.0, 0.0).unwrap();
    let l = n as f64 * cell;
    let mut seed = 12345u64;
    ScalarField::from_fn(spec, |x, y| {
        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let r = (seed >> 33) as f64 / (1u64 << 31) as f64;
        let (u, v) = (x / l - 0.5, y / l - 0.5);
        let bowl = -25.0 + 200.0 * (u.powi(4) + v.powi(4)) * 4.0;
        let island = 30.0 * (-((u - 0.15).powi(2) + (v + 0.2).powi(2)) / 0.003).exp();
        bowl + island + 3.0 * (7.0 * u).sin() * (5.0 * v).cos() + 2.0 * r
    })
}

// 1 ---------------------------------------------------------------------------

fn well_balanced() -> Verdict {
    let bed = rough_bed(200, 5.0);
    let cfg = SWEConfig::new(0.0, f64::INFINITY);
    let mut s = init_water_state(&bed, &cfg);
    let start = Instant::now();
    for _ in 0..1000 {
        s = step(&s, &cfg).expect("lake has wet cells");
    }
    let secs = start.elapsed().as_secs_f64();
    let mut worst = 0.0f64;
    for k in 0..s.h.values().len() {
        let h = s.h.values()[k];
        if h >= cfg.h_dry {
            worst = worst.max((h + s.bed.values()[k]).abs());
        }
    }
    (
        worst < 1e-10 && secs < 30.0,
        format!("max |eta| = {worst:.2e} m, {secs:.1} s for 1000 steps"),
    )
}

// 2 ---------------------------------------------------------------------------

fn conservation() -> Verdict {
    let bed = rough_bed(120, 5.0);
    let cfg = SWEConfig::new(0.0, f64::INFINITY);
    let mut s = init_water_state(&bed, &cfg);
    let spec = *bed.spec();
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let eta = if spec.x_at(i) < 200.0 { 2.0 } else { 0.0 };
            s.h.set(i, j, (eta - bed.get(i, j)).max(0.0));
        }
    }
    let area = spec.cell_area();
    let vol = |s: &WaterState<f64>| s.h.values().iter().sum::<f64>() * area;
    let v0 = vol(&s);
    for _ in 0..1000 {
        s = step(&s, &cfg).unwrap();
    }
    let water = ((vol(&s) - v0) / v0).abs();

    let scenario = parse_config_str(SMALL_BASIN, Path::new("small.toml")).unwrap();
    let (bed, h0) = make_synthetic_basin(scenario.basin.as_ref().unwrap()).unwrap();
    let slide = run_slide_stage(&scenario, &bed, &h0).unwrap();
    let sum = |f: &ScalarField<f64>| f.values().iter().sum::<f64>();
    let slide_drift = ((sum(&slide.final_state.total_thickness()) - sum(&h0)) / sum(&h0)).abs();
    let rested = slide.rest_time.is_some();
    (
        water <= 1e-10 && slide_drift <= 1e-9 && rested,
        format!("water drift {water:.2e} per 1000 steps, slide drift {slide_drift:.2e} over full run (rest: {rested})"),
    )
}

// 3 ---------------------------------------------------------------------------

/// Middle depth of the wet dam break, by bisection on the difference between
/// the rarefaction and shock branches of the middle velocity.
fn stoker_oracle(h_l: f64, h_r: f64) -> f64 {
    let mismatch = |h: f64| {
        let rarefaction = 2.0 * ((G * h_l).sqrt() - (G * h).sqrt());
        let shock = (h - h_r) * (0.5 * G * (h + h_r) / (h * h_r)).sqrt();
        rarefaction - shock
    };
    let (mut lo, mut hi) = (h_r, h_l);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mismatch(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn channel(cells: usize, dx: f64, depth: impl Fn(f64) -> f64, h_dry: f64) -> (WaterState<f64>, SWEConfig<f64>) {
    let spec = GridSpec::new(cells, 3, dx, dx, 0.5 * dx, 0.0).unwrap();
    let mut cfg = SWEConfig::new(0.0, f64::INFINITY);
    cfg.h_dry = h_dry;
    let mut s = init_water_state(&ScalarField::filled(spec, 0.0), &cfg);
    for j in 0..3 {
        for i in 0..cells {
            s.h.set(i, j, depth(spec.x_at(i)));
        }
    }
    (s, cfg)
}

fn dam_breaks() -> Verdict {
    let cells = 400;
    let dam = 200.0;
    let tol = 1e-6;
    let (s, cfg) = channel(cells, 1.0, |x| if x < dam { 1.0 } else { 0.0 }, tol);
    let front = |s: &WaterState<f64>| {
        let last = (0..cells).rev().find(|&i| s.h.get(i, 1) > tol).unwrap();
        (last + 1) as f64 - dam
    };
    let s = run_until(s, &cfg, |s| front(s) >= 50.0);
    let exact = 2.0 * (G * 1.0f64).sqrt() * s.t;
    let ritter = (front(&s) - exact).abs() / exact;

    let (h_l, h_r, t_end) = (1.0, 0.1, 4.0);
    let length = 100.0;
    let (s, mut cfg) = channel(cells, length / cells as f64, |x| if x < 50.0 { h_l } else { h_r }, 1e-3);
    cfg.t_end = t_end;
    let s = run_until(s, &cfg, |s| s.t >= t_end);
    let h_m = stoker_oracle(h_l, h_r);
    let c_m = (G * h_m).sqrt();
    let u_m = 2.0 * ((G * h_l).sqrt() - c_m);
    let shock = h_m * u_m / (h_m - h_r);
    let (a, b) = (50.0 + (u_m - c_m) * t_end, 50.0 + shock * t_end);
    let spec = *s.spec();
    let plateau: Vec<f64> = (0..cells)
        .filter(|&i| {
            let x = spec.x_at(i);
            x > a + 0.25 * (b - a) && x < b - 0.25 * (b - a)
        })
        .map(|i| s.h.get(i, 1))
        .collect();
    let h_num = plateau.iter().sum::<f64>() / plateau.len() as f64;
    let stoker = (h_num - h_m).abs() / h_m;
    (
        ritter <= 0.05 && stoker <= 0.02,
        format!(
            "Ritter front error {:.2}% (limit 5%), Stoker middle depth error {:.3}% (limit 2%)",
            100.0 * ritter,
            100.0 * stoker
        ),
    )
}

// 4 ---------------------------------------------------------------------------

/// Planar oscillation in a paraboloid of radius `A` and centre depth `H0`.
const A: f64 = 1.0;
const H0: f64 = 0.1;
const ETA: f64 = 0.5;

fn thacker_depth(x: f64, y: f64, t: f64) -> f64 {
    let w = (2.0 * G * H0).sqrt() / A;
    let (cx, cy) = (ETA * (w * t).cos(), ETA * (w * t).sin());
    (H0 * (1.0 - ((x - cx).powi(2) + (y - cy).powi(2)) / (A * A))).max(0.0)
}

fn thacker_error(n: usize) -> f64 {
    let w = (2.0 * G * H0).sqrt() / A;
    let period = 2.0 * PI / w;
    let dx = 4.0 * A / n as f64;
    let spec = GridSpec::square(n, n, dx, -2.0 * A + 0.5 * dx, -2.0 * A + 0.5 * dx).unwrap();
    let bed = ScalarField::from_fn(spec, |x, y| H0 * ((x * x + y * y) / (A * A) - 1.0));
    let mut cfg = SWEConfig::new(0.0, period);
    cfg.h_dry = 1e-5;
    let mut s = init_water_state(&bed, &cfg);
    for j in 0..n {
        for i in 0..n {
            let h = thacker_depth(spec.x_at(i), spec.y_at(j), 0.0);
            s.h.set(i, j, h);
            if h >= cfg.h_dry {
                s.hu.set(i, j, 0.0);
                s.hv.set(i, j, h * ETA * w);
            }
        }
    }
    let s = run_until(s, &cfg, |s| s.t >= period * (1.0 - 1e-12));
    let (mut sq, mut count) = (0.0, 0usize);
    for j in 0..n {
        for i in 0..n {
            let exact = thacker_depth(spec.x_at(i), spec.y_at(j), s.t);
            let num = s.h.get(i, j);
            if exact > 0.0 || num >= cfg.h_dry {
                sq += (num - exact).powi(2);
                count += 1;
            }
        }
    }
    let amplitude = 2.0 * ETA * H0 / A;
    (sq / count as f64).sqrt() / amplitude
}

fn thacker() -> Verdict {
    let coarse = thacker_error(100);
    let fine = thacker_error(200);
    let ratio = coarse / fine;
    (
        fine <= 0.05 && (1.4..=2.6).contains(&ratio),
        format!(
            "L2 error {:.2}% of amplitude at 200x200, refinement ratio {ratio:.2}",
            100.0 * fine
        ),
    )
}

// 5 ---------------------------------------------------------------------------

/// `<u²>/<u>²` of the shear-layer profile, integrating the constitutive
/// strain rate under a linear stress ramp with Simpson's rule.
fn alpha_by_quadrature(n: f64) -> f64 {
    let p = HerschelBulkleyParams::new(20.0, 4.0, n).unwrap();
    let tau_b = 50.0;
    let rate = |z: f64| hb_strain_rate(tau_b + (p.tau_y - tau_b) * z, &p);
    let m = 4000;
    let h = 1.0 / m as f64;
    let mut u = vec![0.0; m + 1];
    for k in 0..m {
        let (a, b) = (k as f64 * h, (k + 1) as f64 * h);
        u[k + 1] = u[k] + h / 6.0 * (rate(a) + 4.0 * rate(0.5 * (a + b)) + rate(b));
    }
    let simpson = |f: &dyn Fn(f64) -> f64| {
        let mut s = f(u[0]) + f(u[m]);
        for (k, &v) in u.iter().enumerate().take(m).skip(1) {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(v);
        }
        s * h / 3.0
    };
    let mean = simpson(&|v| v);
    simpson(&|v| v * v) / (mean * mean)
}

fn rheology() -> Verdict {
    let a1 = form_factor_alpha(1.0f64).unwrap();
    let a_half = form_factor_alpha(0.5f64).unwrap();
    let q1 = alpha_by_quadrature(1.0);
    let q_half = alpha_by_quadrature(0.5);
    let alpha_ok = (a1 - 1.2).abs() <= 1e-10
        && (a_half - 8.0 / 7.0).abs() <= 1e-10
        && (a1 - q1).abs() <= 1e-10
        && (a_half - q_half).abs() <= 1e-10;
    let beta = shape_factor_beta(0.5f64).unwrap();
    let beta_ok = beta == 3.0f64.sqrt();

    let spec = GridSpec::square(30, 30, 5.0, 0.0, 0.0).unwrap();
    let bed = ScalarField::from_fn(spec, |x: f64, y: f64| -0.2 * x - 0.04 * y);
    let general = SlideConfig::new(table_rheology(1.0), table_material(), bed, 1e6).unwrap();
    let bingham = general.clone().with_closure(Bingham { tau_y: 65.0, mu: 10.0 });
    let h = ScalarField::from_fn(spec, |x: f64, y: f64| {
        (10.0 - 0.2 * (x - 70.0).hypot(y - 75.0)).max(0.0)
    });
    let u = h.map(|v| if v > 0.0 { 1.5 } else { 0.0 });
    let mut a = SlideState::from_layers(
        h.map(|v| 0.7 * v),
        h.map(|v| 0.3 * v),
        u,
        ScalarField::filled(spec, 0.0),
    )
    .unwrap();
    let mut b = a.clone();
    for _ in 0..100 {
        a = advance(&a, &general).unwrap().0;
        b = advance(&b, &bingham).unwrap().0;
    }
    let moved = a.max_speed() > 0.0;
    let identical = a == b;
    (
        alpha_ok && beta_ok && identical && moved,
        format!(
            "alpha(1) = {a1:.15}, alpha(1/2) = {a_half:.15} (quadrature diff {:.1e}, {:.1e}); beta(1/2) == sqrt 3: {beta_ok}; Bingham path bit-identical: {identical}",
            (a1 - q1).abs(),
            (a_half - q_half).abs()
        ),
    )
}

// 6 ---------------------------------------------------------------------------

fn static_yield() -> Verdict {
    let spec = GridSpec::square(50, 50, 4.0, 0.0, 0.0).unwrap();
    let bed = ScalarField::from_fn(spec, |x: f64, y: f64| {
        -40.0 - 0.003 * x + 0.002 * y + 0.5 * (x / 60.0).sin()
    });
    let mat = table_material();
    let cfg = SlideConfig::new(table_rheology(0.5), mat, bed.clone(), 900.0).unwrap();
    let mound = ScalarField::from_fn(spec, |x: f64, y: f64| {
        let d = (x - 90.0).hypot(y - 110.0);
        if d < 70.0 {
            0.36 * (1.0 + (PI * d / 70.0).cos())
        } else {
            0.0
        }
    });
    // the stress condition, checked with one-sided differences at walls
    let surf = bed.zip_map(&mound, |b, h| b + h).unwrap();
    let g_red = reduced_gravity(&mat);
    let mut worst = 0.0f64;
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let d = |a: usize, b: usize, len: f64, f: &dyn Fn(usize) -> f64| (f(b) - f(a)) / len;
            let gx = d(
                i.saturating_sub(1),
                (i + 1).min(spec.nx - 1),
                spec.dx * ((i + 1).min(spec.nx - 1) - i.saturating_sub(1)) as f64,
                &|k| surf.get(k, j),
            );
            let gy = d(
                j.saturating_sub(1),
                (j + 1).min(spec.ny - 1),
                spec.dy * ((j + 1).min(spec.ny - 1) - j.saturating_sub(1)) as f64,
                &|k| surf.get(i, k),
            );
            worst = worst.max(mat.rho_d * g_red * mound.get(i, j) * gx.hypot(gy));
        }
    }
    assert!(worst <= 65.0, "test mound is not sub-yield ({worst} Pa)");

    let mut s = init_slide_state(&mound, &cfg).unwrap();
    let mut moved = false;
    while s.t < cfg.t_end {
        let (n, _) = advance(&s, &cfg).unwrap();
        moved |= n.u.values().iter().chain(n.v.values()).any(|&v| v != 0.0);
        s = n;
    }
    let (series, last) = run_slide(&mound, &cfg, 5.0).unwrap();
    let frozen = series.frames().iter().all(|f| f.field == surf)
        && last.u.values().iter().chain(last.v.values()).all(|&v| v == 0.0);
    (
        !moved && frozen,
        format!(
            "peak basal stress {worst:.1} Pa <= 65 Pa; velocities stayed zero: {}; frames unchanged: {frozen}",
            !moved
        ),
    )
}

// 7 ---------------------------------------------------------------------------

fn mirror_gap(f: &ScalarField<f64>) -> f64 {
    let spec = f.spec();
    let mut worst = 0.0f64;
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let (a, b) = (f.get(i, j), f.get(i, spec.ny - 1 - j));
            if a.is_nan() != b.is_nan() {
                return f64::INFINITY;
            }
            if !a.is_nan() {
                worst = worst.max((a - b).abs());
            }
        }
    }
    worst
}

fn symmetry() -> Verdict {
    let scenario = parse_config_str(SMALL_BASIN, Path::new("small.toml")).unwrap();
    let (bed, h0) = make_synthetic_basin(scenario.basin.as_ref().unwrap()).unwrap();
    let base = mirror_gap(&bed).max(mirror_gap(&h0));
    assert_eq!(base, 0.0, "test basin is not mirror-symmetric");
    let cfg = scenario.slide_config(bed.clone()).unwrap();
    let (series, last) = run_slide(&h0, &cfg, 2.0).unwrap();
    let slide = series
        .frames()
        .iter()
        .map(|f| mirror_gap(&f.field))
        .fold(mirror_gap(&last.total_thickness()), f64::max);

    let wcfg = SWEConfig::new(0.0, 60.0);
    let spec = *bed.spec();
    let mut s = init_water_state(&series.bed_at_time(0.0, &spec).unwrap(), &wcfg);
    let mut water = 0.0f64;
    let mut steps = 0;
    while s.t < wcfg.t_end {
        s = apply_bed_update(&s, &series.bed_at_time(s.t, &spec).unwrap()).unwrap();
        match step(&s, &wcfg) {
            Some(n) => s = n,
            None => break,
        }
        steps += 1;
        water = water.max(mirror_gap(&s.surface(wcfg.h_dry, f64::NAN)));
    }
    (
        slide <= 1e-10 && water <= 1e-10,
        format!(
            "deposit asymmetry {slide:.1e} over {} frames, eta asymmetry {water:.1e} over {steps} steps",
            series.len()
        ),
    )
}

// 8 ---------------------------------------------------------------------------

fn collect_files(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_path_buf();
                let mut bytes = std::fs::read(&p).unwrap();
                let name = rel.to_string_lossy();
                if name == "report.txt" || name == "manifest.txt" {
                    // wall time and worker count are the only run-dependent lines
                    let text = String::from_utf8(bytes).unwrap();
                    bytes = text
                        .lines()
                        .filter(|l| !l.contains("wall_seconds") && !l.starts_with("# workers"))
                        .collect::<Vec<_>>()
                        .join("\n")
                        .into_bytes();
                }
                out.push((rel, bytes));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Verdict {
    let text = SMALL_BASIN.replace("snapshot_dt = 0.0", "snapshot_dt = 10.0");
    let scenario = parse_config_str(&text, Path::new("small.toml")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for (k, n) in [1usize, 4, 8, 1].into_iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        Workers::new(Some(n))
            .unwrap()
            .install(|| run_coupled(&scenario, &out))
            .unwrap();
        runs.push(collect_files(&out));
    }
    let files = runs[0].len();
    let same = runs.iter().all(|r| *r == runs[0]);
    (
        same && files > 10,
        format!("{files} output files bit-identical across 1, 4, 8 workers and a repeat: {same}"),
    )
}

// 9 ---------------------------------------------------------------------------

fn shipped_scenario() -> Verdict {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/aiguebelette_synthetic.toml");
    let scenario = parse_config(path).unwrap();
    let grid = scenario.basin.as_ref().unwrap().grid().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let o = run_coupled(&scenario, dir.path()).unwrap();
    let wall = start.elapsed().as_secs_f64();
    let within = |v: Option<f64>, lo: f64, hi: f64| v.is_some_and(|v| (lo..=hi).contains(&v));
    let rest = o.slide_rest_time.map(|t| t / 60.0);
    let crossing = o.tsunami.basin_crossing_time.map(|t| t / 60.0);
    let checks = [
        within(rest, 5.0, 20.0),
        within(crossing, 1.0, 3.0),
        within(Some(o.tsunami.near_source_peak), 0.5, 5.0),
        within(Some(o.tsunami.runup.max_runup_height), 1.0, 6.0),
        within(Some(o.distal_deposit_thickness), 0.1, 3.0),
        wall < 600.0 && grid.nx <= 720 && grid.ny <= 600,
    ];
    let mark = |ok: bool| if ok { "ok" } else { "OUT" };
    (
        checks.iter().all(|&c| c),
        format!(
            "(a) rest {:.1} min {} (b) crossing {:.2} min {} (c) near-source peak {:.2} m {} (d) runup {:.2} m {} (e) distal deposit {:.2} m {}; wall {wall:.0} s at {}x{} {}",
            rest.unwrap_or(f64::NAN),
            mark(checks[0]),
            crossing.unwrap_or(f64::NAN),
            mark(checks[1]),
            o.tsunami.near_source_peak,
            mark(checks[2]),
            o.tsunami.runup.max_runup_height,
            mark(checks[3]),
            o.distal_deposit_thickness,
            mark(checks[4]),
            grid.nx,
            grid.ny,
            mark(checks[5]),
        ),
    )
}

const SMALL_BASIN: &str = r#"
name = "acceptance_small"

[basin]
length = 1200.0
width = 800.0
max_depth = 40.0
shore_slope = 0.2
cell = 20.0
land_margin = 60.0
slide_center = [-250.0, 0.0]
slide_radius = 120.0
slide_volume = 1.5e5

[material]
rho_d = 1500.0
c_m = 1.0
c_f = 0.01
c_p = 1.0

[rheology]
tau_y = 65.0
mu = 10.0
n = 0.5

[slide]
t_end = 1800.0
frame_dt = 2.0

[water]
t_end = 60.0
snapshot_dt = 0.0

[[gauges]]
id = 1
x = -100.0
y = 0.0

[[gauges]]
id = 2
x = 200.0
y = 200.0

[[gauges]]
id = 3
x = 200.0
y = -200.0
"#;

fn main() {
    let criteria: [Criterion; 9] = [
        ("well-balanced lake at rest", well_balanced),
        ("volume conservation", conservation),
        ("dam-break oracles", dam_breaks),
        ("Thacker planar oscillation", thacker),
        ("rheology closure", rheology),
        ("static yield", static_yield),
        ("mirror symmetry", symmetry),
        ("determinism", determinism),
        ("shipped synthetic scenario", shipped_scenario),
    ];
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut failed = 0;
    let mut errored = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        match std::panic::catch_unwind(run) {
            Ok((ok, detail)) => {
                failed += usize::from(!ok);
                let tag = if ok { "PASS" } else { "FAIL" };
                println!(
                    "criterion {} {tag} {name}: {detail} [{:.1} s]",
                    k + 1,
                    start.elapsed().as_secs_f64()
                );
            }
            Err(_) => {
                errored += 1;
                println!("criterion {} FAIL {name}: could not be evaluated", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed - errored,
        criteria.len()
    );
    if errored > 0 || (strict && failed > 0) {
        std::process::exit(1);
    }
}
