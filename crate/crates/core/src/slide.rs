//! Depth-averaged two-layer viscoplastic mass-movement solver.
//!
//! The slide is a plug layer riding on a basal shear layer. Conserved
//! variables per cell are the total thickness `H = H_p + H_s` and the layer
//! momenta `H_p u_p` and `H_s u_s`, with `u_s = r u_p` tied to the plug
//! velocity by the shear-profile closure. Each step is split in two:
//!
//! 1. a finite-volume transport step (local Lax-Friedrichs interface fluxes,
//!    gravity forcing, inter-layer momentum exchange), and
//! 2. a friction step that removes momentum against the direction of motion
//!    and stops cells outright rather than reversing them.
//!
//! Cells whose driving stress does not exceed the yield strength and that are
//! not already moving are static: they may receive mass (deposition) but
//! neither emit flux nor have their momentum updated.

use std::cell::Cell;

use crate::coupling::{BedMotionSeries, FrameRecorder};
use crate::error::{Error, Result};
use crate::num::{hypot2, Real};
use crate::par::{map_rows, per_row};
use crate::raster::{bilinear_sample, GridSpec, ScalarField};
use crate::rheology::{
    friction_drag, pressure_drag, reduced_gravity, HerschelBulkley, HerschelBulkleyParams, LayerClosure, MaterialParams,
};

/// Below this plug speed the layer split is indeterminate; the cell is
/// treated as one unsheared plug at rest.
const REST_SPEED: f64 = 1e-8;

/// Largest tolerated relative volume deficit from positivity clamping in a
/// single transport step.
const CLAMP_DEFICIT_LIMIT: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct SlideConfig<T, C = HerschelBulkley<T>> {
    pub rheology: C,
    pub mat: MaterialParams<T>,
    pub cfl: T,
    /// Cells thinner than this carry no momentum, m.
    pub h_min: T,
    /// Global rest threshold on the maximum plug speed, m/s.
    pub u_stop: T,
    pub t_end: T,
    /// Static basal surface `b`.
    pub bed: ScalarField<T>,
}

impl<T: Real> SlideConfig<T> {
    /// Herschel-Bulkley configuration with the default numerical controls.
    pub fn new(hb: HerschelBulkleyParams<T>, mat: MaterialParams<T>, bed: ScalarField<T>, t_end: T) -> Result<Self> {
        let cfg = Self {
            rheology: HerschelBulkley::new(hb),
            mat,
            cfl: T::lit(0.5),
            h_min: T::lit(1e-4),
            u_stop: T::lit(0.01),
            t_end,
            bed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl<T: Real, C: LayerClosure<T>> SlideConfig<T, C> {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > T::zero() && self.cfl < T::one()) {
            return Err(Error::Validation(format!(
                "slide cfl must be in (0, 1), got {}",
                self.cfl
            )));
        }
        if !(self.t_end > T::zero() && self.t_end.is_finite()) {
            return Err(Error::Validation(format!(
                "slide t_end must be > 0, got {}",
                self.t_end
            )));
        }
        if !(self.h_min >= T::zero()) || !(self.u_stop >= T::zero()) {
            return Err(Error::Validation("h_min and u_stop must be >= 0".into()));
        }
        Ok(())
    }

    /// Same numerics with a different rheological closure.
    pub fn with_closure<D: LayerClosure<T>>(self, rheology: D) -> SlideConfig<T, D> {
        SlideConfig {
            rheology,
            mat: self.mat,
            cfl: self.cfl,
            h_min: self.h_min,
            u_stop: self.u_stop,
            t_end: self.t_end,
            bed: self.bed,
        }
    }

    fn consts(&self) -> Consts<T> {
        Consts {
            g_red: reduced_gravity(&self.mat),
            inertia: self.mat.added_mass_factor(),
            alpha: self.rheology.alpha(),
            r: self.rheology.r_vel(),
            tau_y: self.rheology.yield_strength(),
            rho_d: self.mat.rho_d,
        }
    }
}

#[derive(Clone, Copy)]
struct Consts<T> {
    g_red: T,
    inertia: T,
    alpha: T,
    r: T,
    tau_y: T,
    rho_d: T,
}

/// Plug/shear thicknesses and plug velocity on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SlideState<T> {
    pub h_p: ScalarField<T>,
    pub h_s: ScalarField<T>,
    /// Plug velocity components, m/s.
    pub u: ScalarField<T>,
    pub v: ScalarField<T>,
    pub t: T,
    /// `∂H_s/∂t` over the previous step, used by the explicit layer exchange.
    shear_rate: Vec<T>,
}

impl<T: Real> SlideState<T> {
    /// Builds a state from explicit layers at rest or in motion.
    pub fn from_layers(h_p: ScalarField<T>, h_s: ScalarField<T>, u: ScalarField<T>, v: ScalarField<T>) -> Result<Self> {
        let spec = *h_p.spec();
        for f in [&h_s, &u, &v] {
            spec.ensure_same(f.spec(), "slide layer")?;
        }
        for (name, f) in [("h_p", &h_p), ("h_s", &h_s)] {
            if f.values().iter().any(|&x| !(x >= T::zero() && x.is_finite())) {
                return Err(Error::Validation(format!("{name} must be finite and >= 0")));
            }
        }
        let mut state = Self {
            shear_rate: vec![T::zero(); spec.len()],
            h_p,
            h_s,
            u,
            v,
            t: T::zero(),
        };
        for k in 0..spec.len() {
            if state.h_p.values()[k] + state.h_s.values()[k] == T::zero() {
                state.u.values_mut()[k] = T::zero();
                state.v.values_mut()[k] = T::zero();
            }
        }
        Ok(state)
    }

    pub fn spec(&self) -> &GridSpec<T> {
        self.h_p.spec()
    }

    /// `H = H_p + H_s`.
    pub fn total_thickness(&self) -> ScalarField<T> {
        self.h_p.zip_map(&self.h_s, |a, b| a + b).unwrap()
    }

    pub fn volume(&self) -> T {
        let spec = self.spec();
        let nx = spec.nx;
        let (hp, hs) = (self.h_p.values(), self.h_s.values());
        let rows = per_row(spec.ny, |j| {
            let r = j * nx..(j + 1) * nx;
            hp[r.clone()]
                .iter()
                .zip(&hs[r])
                .fold(T::zero(), |a, (&p, &s)| a + (p + s))
        });
        rows.into_iter().fold(T::zero(), |a, b| a + b) * spec.cell_area()
    }

    pub fn max_speed(&self) -> T {
        self.u
            .values()
            .iter()
            .zip(self.v.values())
            .fold(T::zero(), |m, (&u, &v)| m.max(hypot2(u, v)))
    }

    pub fn moving_cell_count(&self) -> usize {
        self.u
            .values()
            .iter()
            .zip(self.v.values())
            .filter(|(&u, &v)| u != T::zero() || v != T::zero())
            .count()
    }

    /// Bed plus slide thickness.
    pub fn surface(&self, bed: &ScalarField<T>) -> ScalarField<T> {
        let nx = self.spec().nx;
        let mut out = bed.clone();
        let (hp, hs) = (self.h_p.values(), self.h_s.values());
        map_rows(out.values_mut(), nx, |j, row| {
            for (i, z) in row.iter_mut().enumerate() {
                let k = j * nx + i;
                *z = *z + (hp[k] + hs[k]);
            }
        });
        out
    }
}

/// Initial state: the whole mass is an unsheared plug at rest.
pub fn init_slide_state<T: Real, C: LayerClosure<T>>(
    initial_thickness: &ScalarField<T>,
    cfg: &SlideConfig<T, C>,
) -> Result<SlideState<T>> {
    initial_thickness
        .spec()
        .ensure_same(cfg.bed.spec(), "initial thickness vs bed")?;
    if let Some(k) = initial_thickness
        .values()
        .iter()
        .position(|&h| !(h >= T::zero() && h.is_finite()))
    {
        let nx = initial_thickness.spec().nx;
        return Err(Error::Validation(format!(
            "initial thickness must be >= 0 (cell {}, {})",
            k % nx,
            k / nx
        )));
    }
    let spec = *initial_thickness.spec();
    let zero = ScalarField::filled(spec, T::zero());
    SlideState::from_layers(initial_thickness.clone(), zero.clone(), zero.clone(), zero)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellMotion {
    Static,
    Dynamic,
}

/// Central-difference gradient with mirrored (wall) ghost cells.
#[inline]
fn gradient<T: Real>(f: &[T], spec: &GridSpec<T>, i: usize, j: usize) -> [T; 2] {
    let nx = spec.nx;
    let k = j * nx + i;
    let c = f[k];
    let e = if i + 1 < nx { f[k + 1] } else { c };
    let w = if i > 0 { f[k - 1] } else { c };
    let n = if j + 1 < spec.ny { f[k + nx] } else { c };
    let s = if j > 0 { f[k - nx] } else { c };
    let two = T::two();
    [(e - w) / (two * spec.dx), (n - s) / (two * spec.dy)]
}

/// Surface slope for driving and yield. An axis component is zero where the
/// cell sits strictly below both neighbours on that axis: material in a pit has
/// nowhere downhill to go, and the central difference would still push it into
/// the higher side.
fn surface_slope<T: Real>(f: &[T], spec: &GridSpec<T>, i: usize, j: usize) -> [T; 2] {
    let nx = spec.nx;
    let k = j * nx + i;
    let c = f[k];
    let mut g = gradient(f, spec, i, j);
    if i > 0 && i + 1 < nx && c < f[k - 1] && c < f[k + 1] {
        g[0] = T::zero();
    }
    if j > 0 && j + 1 < spec.ny && c < f[k - nx] && c < f[k + nx] {
        g[1] = T::zero();
    }
    g
}

fn free_surface<T: Real>(state: &SlideState<T>, bed: &ScalarField<T>) -> Vec<T> {
    state.surface(bed).into_values()
}

fn classify<T: Real>(state: &SlideState<T>, surface: &[T], c: &Consts<T>, k: usize, i: usize, j: usize) -> CellMotion {
    let (u, v) = (state.u.values()[k], state.v.values()[k]);
    if u != T::zero() || v != T::zero() {
        return CellMotion::Dynamic;
    }
    let h = state.h_p.values()[k] + state.h_s.values()[k];
    if h <= T::zero() {
        return CellMotion::Static;
    }
    let g = surface_slope(surface, state.spec(), i, j);
    let driving = c.rho_d * c.g_red * h * hypot2(g[0], g[1]);
    if driving > c.tau_y {
        CellMotion::Dynamic
    } else {
        CellMotion::Static
    }
}

/// Whether the earth pressure at a cell exceeds the yield strength (or the
/// cell is already moving).
pub fn yield_check<T: Real, C: LayerClosure<T>>(
    state: &SlideState<T>,
    cfg: &SlideConfig<T, C>,
    i: usize,
    j: usize,
) -> CellMotion {
    let surface = free_surface(state, &cfg.bed);
    let k = state.spec().idx(i, j);
    classify(state, &surface, &cfg.consts(), k, i, j)
}

fn dynamic_mask<T: Real>(state: &SlideState<T>, surface: &[T], c: &Consts<T>) -> Vec<bool> {
    let spec = *state.spec();
    let mut mask = vec![false; spec.len()];
    map_rows(&mut mask, spec.nx, |j, row| {
        for (i, m) in row.iter_mut().enumerate() {
            *m = classify(state, surface, c, j * spec.nx + i, i, j) == CellMotion::Dynamic;
        }
    });
    mask
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SlideTimestep<T> {
    Step(T),
    /// No cell is dynamic; nothing will move.
    Quiescent,
}

fn wave_speed<T: Real>(state: &SlideState<T>, c: &Consts<T>, k: usize) -> T {
    let h = state.h_p.values()[k] + state.h_s.values()[k];
    hypot2(state.u.values()[k], state.v.values()[k]) + (c.g_red * h).sqrt()
}

fn timestep_from_mask<T: Real>(
    state: &SlideState<T>,
    t_end: T,
    cfl: T,
    c: &Consts<T>,
    mask: &[bool],
) -> SlideTimestep<T> {
    let spec = state.spec();
    let nx = spec.nx;
    let rows = per_row(spec.ny, |j| {
        (j * nx..(j + 1) * nx)
            .filter(|&k| mask[k])
            .map(|k| wave_speed(state, c, k))
            .fold(None, |m: Option<T>, s| Some(m.map_or(s, |m| m.max(s))))
    });
    let Some(max_speed) = rows.into_iter().flatten().reduce(|a, b| a.max(b)) else {
        return SlideTimestep::Quiescent;
    };
    if max_speed <= T::zero() {
        return SlideTimestep::Quiescent;
    }
    let dt = cfl * spec.dx.min(spec.dy) / max_speed;
    SlideTimestep::Step(dt.min(t_end - state.t))
}

/// Stable step from the fastest dynamic cell, capped at the remaining time.
pub fn compute_slide_timestep<T: Real, C: LayerClosure<T>>(
    state: &SlideState<T>,
    cfg: &SlideConfig<T, C>,
) -> SlideTimestep<T> {
    let c = cfg.consts();
    let surface = free_surface(state, &cfg.bed);
    let mask = dynamic_mask(state, &surface, &c);
    timestep_from_mask(state, cfg.t_end, cfg.cfl, &c, &mask)
}

/// Interface flux of (H, H_s, H_p u_p, H_s u_s).
#[derive(Clone, Copy, Default)]
struct Flux<T> {
    h: T,
    hs: T,
    mp: [T; 2],
    ms: [T; 2],
}

/// Conserved view of one cell.
#[derive(Clone, Copy)]
struct Cons<T> {
    h: T,
    hs: T,
    mp: [T; 2],
    ms: [T; 2],
    vel: [T; 2],
    bed: T,
    dynamic: bool,
}

#[inline]
fn conserved<T: Real>(state: &SlideState<T>, bed: &[T], r: T, mask: &[bool], k: usize) -> Cons<T> {
    let hp = state.h_p.values()[k];
    let hs = state.h_s.values()[k];
    let vel = [state.u.values()[k], state.v.values()[k]];
    Cons {
        h: hp + hs,
        hs,
        mp: [hp * vel[0], hp * vel[1]],
        ms: [r * hs * vel[0], r * hs * vel[1]],
        vel,
        bed: bed[k],
        dynamic: mask[k],
    }
}

/// Local Lax-Friedrichs flux across a face with normal axis `d`.
#[inline]
fn llf_flux<T: Real>(l: &Cons<T>, r: &Cons<T>, d: usize, c: &Consts<T>) -> Flux<T> {
    if !l.dynamic && !r.dynamic {
        return Flux::default();
    }
    let speed = |s: &Cons<T>| {
        if s.dynamic {
            hypot2(s.vel[0], s.vel[1]) + (c.g_red * s.h).sqrt()
        } else {
            T::zero()
        }
    };
    let lam = speed(l).max(speed(r));
    let half = T::half();
    let un_l = l.vel[d];
    let un_r = r.vel[d];
    let usn_l = c.r * un_l;
    let usn_r = c.r * un_r;
    // Each side contributes only the part of its column standing above the
    // higher of the two beds, so the face never drives mass up the surface slope.
    let b_star = l.bed.max(r.bed);
    let above = |s: &Cons<T>| {
        if s.h > T::zero() {
            ((s.h - (b_star - s.bed)) / s.h).clamp_to(T::zero(), T::one())
        } else {
            T::zero()
        }
    };
    let (fl, fr) = (above(l), above(r));
    let fh = half * (fl * (l.mp[d] + l.ms[d]) + fr * (r.mp[d] + r.ms[d])) - half * lam * (fr * r.h - fl * l.h);
    if (!l.dynamic && fh > T::zero()) || (!r.dynamic && fh < T::zero()) {
        // static cells only ever receive mass
        return Flux::default();
    }
    let fhs = half * (fl * l.ms[d] + fr * r.ms[d]) - half * lam * (fr * r.hs - fl * l.hs);
    let mut mp = [T::zero(); 2];
    let mut ms = [T::zero(); 2];
    for a in 0..2 {
        mp[a] = half * (fl * l.mp[a] * un_l + fr * r.mp[a] * un_r) - half * lam * (fr * r.mp[a] - fl * l.mp[a]);
        ms[a] = half * (c.alpha * fl * l.ms[a] * usn_l + c.alpha * fr * r.ms[a] * usn_r)
            - half * lam * (fr * r.ms[a] - fl * l.ms[a]);
    }
    Flux { h: fh, hs: fhs, mp, ms }
}

/// Face fluxes for the whole grid: `x` faces are `(nx + 1)` per row, `y`
/// faces are `nx` per face row with `ny + 1` face rows. Wall faces are zero.
struct FaceFluxes<T> {
    x: Vec<Flux<T>>,
    y: Vec<Flux<T>>,
}

fn face_fluxes<T: Real>(state: &SlideState<T>, bed: &[T], c: &Consts<T>, mask: &[bool]) -> FaceFluxes<T> {
    let spec = *state.spec();
    let (nx, ny) = (spec.nx, spec.ny);
    let mut x = vec![Flux::default(); (nx + 1) * ny];
    map_rows(&mut x, nx + 1, |j, row| {
        for (f, out) in row.iter_mut().enumerate().take(nx).skip(1) {
            let kl = j * nx + f - 1;
            if !mask[kl] && !mask[kl + 1] {
                continue;
            }
            let l = conserved(state, bed, c.r, mask, kl);
            let r = conserved(state, bed, c.r, mask, kl + 1);
            *out = llf_flux(&l, &r, 0, c);
        }
    });
    let mut y = vec![Flux::default(); nx * (ny + 1)];
    map_rows(&mut y, nx, |jf, row| {
        if jf == 0 || jf == ny {
            return;
        }
        for (i, out) in row.iter_mut().enumerate() {
            let kl = (jf - 1) * nx + i;
            let kr = kl + nx;
            if !mask[kl] && !mask[kr] {
                continue;
            }
            let l = conserved(state, bed, c.r, mask, kl);
            let r = conserved(state, bed, c.r, mask, kr);
            *out = llf_flux(&l, &r, 1, c);
        }
    });
    FaceFluxes { x, y }
}

#[derive(Clone, Copy, Default)]
struct Updated<T> {
    h: T,
    mp: [T; 2],
    ms: [T; 2],
    deficit: T,
}

/// Splits updated conserved variables back into layers and a plug velocity.
///
/// Total momentum is preserved exactly; the shear share of it fixes the
/// shear-layer thickness through `H_s u_s = r H_s u_p`.
fn recover<T: Real>(h: T, mp: [T; 2], ms: [T; 2], r: T, h_min: T) -> (T, T, [T; 2]) {
    let at_rest = (h, T::zero(), [T::zero(); 2]);
    if h <= h_min {
        return at_rest;
    }
    let m = [mp[0] + ms[0], mp[1] + ms[1]];
    let m2 = m[0] * m[0] + m[1] * m[1];
    if m2 == T::zero() {
        return at_rest;
    }
    let share = ((ms[0] * m[0] + ms[1] * m[1]) / m2).clamp_to(T::zero(), T::one());
    let hs = share * h / (r + share * (T::one() - r));
    let hs = hs.min(h);
    let hp = h - hs;
    let denom = hp + r * hs;
    let vel = [m[0] / denom, m[1] / denom];
    if hypot2(vel[0], vel[1]) < T::lit(REST_SPEED) {
        return at_rest;
    }
    (hp, hs, vel)
}

/// Transport fractional step: conservative update of mass and layer momenta
/// without friction.
pub fn hyperbolic_step<T: Real, C: LayerClosure<T>>(
    state: &SlideState<T>,
    cfg: &SlideConfig<T, C>,
    dt: T,
) -> Result<SlideState<T>> {
    let c = cfg.consts();
    let surface = free_surface(state, &cfg.bed);
    let mask = dynamic_mask(state, &surface, &c);
    hyperbolic_with_mask(state, cfg, &c, &surface, &mask, dt)
}

fn hyperbolic_with_mask<T: Real, C: LayerClosure<T>>(
    state: &SlideState<T>,
    cfg: &SlideConfig<T, C>,
    c: &Consts<T>,
    surface: &[T],
    mask: &[bool],
    dt: T,
) -> Result<SlideState<T>> {
    let spec = *state.spec();
    let (nx, ny) = (spec.nx, spec.ny);
    let bed = cfg.bed.values();
    let fluxes = face_fluxes(state, bed, c, mask);
    let (rdx, rdy) = (dt / spec.dx, dt / spec.dy);
    let step_over_inertia = dt / c.inertia;

    let mut updated = vec![Updated::default(); spec.len()];
    map_rows(&mut updated, nx, |j, row| {
        for (i, out) in row.iter_mut().enumerate() {
            let k = j * nx + i;
            let w = &fluxes.x[j * (nx + 1) + i];
            let e = &fluxes.x[j * (nx + 1) + i + 1];
            let s = &fluxes.y[j * nx + i];
            let n = &fluxes.y[(j + 1) * nx + i];
            let cell = conserved(state, bed, c.r, mask, k);

            let mut h = cell.h - (rdx * (e.h - w.h) + rdy * (n.h - s.h));
            let mut mp = [T::zero(); 2];
            let mut ms = [T::zero(); 2];
            if cell.dynamic {
                let grad = surface_slope(surface, &spec, i, j);
                let hs = cell.hs;
                let hp = cell.h - hs;
                let shear_div = (e.hs - w.hs) / spec.dx + (n.hs - s.hs) / spec.dy;
                let exchange = state.shear_rate[k] + shear_div;
                for a in 0..2 {
                    let div_p = (e.mp[a] - w.mp[a]) / spec.dx + (n.mp[a] - s.mp[a]) / spec.dy;
                    let div_s = (e.ms[a] - w.ms[a]) / spec.dx + (n.ms[a] - s.ms[a]) / spec.dy;
                    let ex = cell.vel[a] * exchange;
                    mp[a] = cell.mp[a] - step_over_inertia * (div_p + c.g_red * hp * grad[a] + ex);
                    ms[a] = cell.ms[a] - step_over_inertia * (div_s + c.g_red * hs * grad[a] - ex);
                }
            }
            let mut deficit = T::zero();
            if h < T::zero() {
                deficit = -h;
                h = T::zero();
                mp = [T::zero(); 2];
                ms = [T::zero(); 2];
            }
            *out = Updated { h, mp, ms, deficit };
        }
    });

    let deficit: T = per_row(ny, |j| {
        updated[j * nx..(j + 1) * nx]
            .iter()
            .fold(T::zero(), |a, u| a + u.deficit)
    })
    .into_iter()
    .fold(T::zero(), |a, b| a + b);
    if deficit > T::zero() {
        let total = state.volume() / spec.cell_area();
        let rel = if total > T::zero() {
            deficit / total
        } else {
            T::infinity()
        };
        if rel > T::lit(CLAMP_DEFICIT_LIMIT) {
            return Err(Error::ConservationFault {
                what: "slide volume",
                relative: rel.as_f64(),
                limit: CLAMP_DEFICIT_LIMIT,
            });
        }
    }

    let mut next = state.clone();
    next.t = state.t + dt;
    let hs_old = state.h_s.values();
    let mut layers = vec![(T::zero(), T::zero(), [T::zero(); 2], T::zero()); spec.len()];
    map_rows(&mut layers, nx, |j, row| {
        for (i, out) in row.iter_mut().enumerate() {
            let k = j * nx + i;
            let u = &updated[k];
            let (hp, hs, vel) = recover(u.h, u.mp, u.ms, c.r, cfg.h_min);
            *out = (hp, hs, vel, (hs - hs_old[k]) / dt);
        }
    });
    for (k, (hp, hs, vel, rate)) in layers.into_iter().enumerate() {
        next.h_p.values_mut()[k] = hp;
        next.h_s.values_mut()[k] = hs;
        next.u.values_mut()[k] = vel[0];
        next.v.values_mut()[k] = vel[1];
        next.shear_rate[k] = rate;
    }
    Ok(next)
}

/// Friction fractional step. The layer split is held fixed; the plug and
/// shear momentum decrements act against the direction of motion and a cell
/// whose combined decrement exceeds its momentum stops exactly.
pub fn friction_source_step<T: Real, C: LayerClosure<T>>(
    state: &SlideState<T>,
    cfg: &SlideConfig<T, C>,
    dt: T,
) -> SlideState<T> {
    let c = cfg.consts();
    let spec = *state.spec();
    let nx = spec.nx;
    let total = state.total_thickness();
    let h_tot = total.values();
    let per_density = dt / (c.rho_d * c.inertia);

    let mut out = vec![(T::zero(), T::zero(), T::zero(), T::zero()); spec.len()];
    map_rows(&mut out, nx, |j, row| {
        for (i, o) in row.iter_mut().enumerate() {
            let k = j * nx + i;
            let hp = state.h_p.values()[k];
            let hs = state.h_s.values()[k];
            let vel = [state.u.values()[k], state.v.values()[k]];
            let speed = hypot2(vel[0], vel[1]);
            if speed == T::zero() {
                *o = (hp, hs, vel[0], vel[1]);
                continue;
            }
            let grad_h = gradient(h_tot, &spec, i, j);
            let tf = friction_drag(vel, &cfg.mat);
            let tp = pressure_drag(vel, grad_h, &cfg.mat);
            let drag = hypot2(tf[0] + tp[0], tf[1] + tp[1]);
            let plug_dec = per_density * (c.tau_y + drag);
            let shear_dec = if hs > cfg.h_min {
                per_density * cfg.rheology.basal_stress(speed, hs)
            } else {
                T::zero()
            };
            let momentum = (hp + c.r * hs) * speed;
            let remaining = momentum - (plug_dec + shear_dec);
            *o = if remaining <= T::zero() {
                (hp + hs, T::zero(), T::zero(), T::zero())
            } else {
                let scale = remaining / momentum;
                (hp, hs, vel[0] * scale, vel[1] * scale)
            };
        }
    });
    let mut next = state.clone();
    for (k, (hp, hs, u, v)) in out.into_iter().enumerate() {
        next.h_p.values_mut()[k] = hp;
        next.h_s.values_mut()[k] = hs;
        next.u.values_mut()[k] = u;
        next.v.values_mut()[k] = v;
    }
    next
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlideStepReport<T> {
    pub t: T,
    pub dt: T,
    pub max_speed: T,
    pub moving_cell_count: usize,
    pub volume: T,
    /// No dynamic cell existed; the state was carried forward unchanged.
    pub quiescent: bool,
}

/// One fractional step (transport, then friction) toward `t_end`.
pub fn advance<T: Real, C: LayerClosure<T>>(
    state: &SlideState<T>,
    cfg: &SlideConfig<T, C>,
) -> Result<(SlideState<T>, SlideStepReport<T>)> {
    advance_until(state, cfg, cfg.t_end)
}

/// Like [`advance`] but never steps past `limit` (≤ `t_end`).
pub fn advance_until<T: Real, C: LayerClosure<T>>(
    state: &SlideState<T>,
    cfg: &SlideConfig<T, C>,
    limit: T,
) -> Result<(SlideState<T>, SlideStepReport<T>)> {
    let limit = limit.min(cfg.t_end);
    if !(state.t < limit) {
        return Err(Error::Validation(format!(
            "slide already at t = {} (limit {limit})",
            state.t
        )));
    }
    let c = cfg.consts();
    let surface = free_surface(state, &cfg.bed);
    let mask = dynamic_mask(state, &surface, &c);
    match timestep_from_mask(state, limit, cfg.cfl, &c, &mask) {
        SlideTimestep::Quiescent => {
            let mut next = state.clone();
            let dt = limit - state.t;
            next.t = limit;
            next.shear_rate.iter_mut().for_each(|r| *r = T::zero());
            let report = SlideStepReport {
                t: next.t,
                dt,
                max_speed: T::zero(),
                moving_cell_count: 0,
                volume: next.volume(),
                quiescent: true,
            };
            Ok((next, report))
        }
        SlideTimestep::Step(dt) => {
            let mid = hyperbolic_with_mask(state, cfg, &c, &surface, &mask, dt)?;
            let mut next = friction_source_step(&mid, cfg, dt);
            // land exactly on the limit
            if limit - next.t <= T::epsilon() * limit.abs().max(T::one()) * T::lit(4.0) {
                next.t = limit;
            }
            let report = SlideStepReport {
                t: next.t,
                dt,
                max_speed: next.max_speed(),
                moving_cell_count: next.moving_cell_count(),
                volume: next.volume(),
                quiescent: false,
            };
            Ok((next, report))
        }
    }
}

/// Runs the slide from `initial` until `t_end` or global rest, recording
/// bed + slide thickness every `frame_dt` (plus `t = 0` and the final state).
///
/// Global rest means no cell is dynamic, or the slide has moved faster than
/// `u_stop` at some point and its maximum speed has since dropped below it.
pub fn run_slide<T: Real, C: LayerClosure<T>>(
    initial: &ScalarField<T>,
    cfg: &SlideConfig<T, C>,
    frame_dt: T,
) -> Result<(BedMotionSeries<T>, SlideState<T>)> {
    run_slide_with(initial, cfg, frame_dt, |_| {})
}

/// [`run_slide`] with a per-step report callback.
pub fn run_slide_with<T: Real, C: LayerClosure<T>>(
    initial: &ScalarField<T>,
    cfg: &SlideConfig<T, C>,
    frame_dt: T,
    mut on_step: impl FnMut(&SlideStepReport<T>),
) -> Result<(BedMotionSeries<T>, SlideState<T>)> {
    cfg.validate()?;
    let mut recorder = FrameRecorder::new(frame_dt)?;
    let mut state = init_slide_state(initial, cfg)?;
    recorder.offer(state.t, || state.surface(&cfg.bed))?;
    let has_moved = Cell::new(false);
    while state.t < cfg.t_end {
        let limit = recorder.next_time().min(cfg.t_end);
        let (next, report) = advance_until(&state, cfg, limit)?;
        state = next;
        on_step(&report);
        recorder.offer(state.t, || state.surface(&cfg.bed))?;
        if report.max_speed >= cfg.u_stop {
            has_moved.set(true);
        }
        let at_rest = report.quiescent || (has_moved.get() && report.max_speed < cfg.u_stop);
        if at_rest {
            break;
        }
    }
    let series = recorder.finish(state.t, || state.surface(&cfg.bed))?;
    Ok((series, state))
}

/// Slide thickness sampled along a polyline every half cell.
pub fn deposit_profile<T: Real>(state: &SlideState<T>, line: &[(T, T)]) -> Result<Vec<(T, T)>> {
    let total = state.total_thickness();
    let spec = state.spec();
    for &(x, y) in line {
        spec.locate(x, y).ok_or(Error::OutOfRange {
            x: x.as_f64(),
            y: y.as_f64(),
        })?;
    }
    let Some(&(x_start, y_start)) = line.first() else {
        return Ok(Vec::new());
    };
    let spacing = spec.dx * T::half();
    let mut out = vec![(T::zero(), bilinear_sample(&total, x_start, y_start)?)];
    let mut arc = T::zero();
    for seg in line.windows(2) {
        let ((xa, ya), (xb, yb)) = (seg[0], seg[1]);
        let len = hypot2(xb - xa, yb - ya);
        if len == T::zero() {
            continue;
        }
        let n = (len / spacing).ceil().to_usize().unwrap_or(1).max(1);
        for s in 1..=n {
            let f = T::from_usize(s).unwrap() / T::from_usize(n).unwrap();
            let x = xa + f * (xb - xa);
            let y = ya + f * (yb - ya);
            out.push((arc + f * len, bilinear_sample(&total, x, y)?));
        }
        arc = arc + len;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rheology::Bingham;

    fn table_mat() -> MaterialParams<f64> {
        MaterialParams::new(1500.0, 1000.0, 1.0, 0.01, 1.0, 9.81).unwrap()
    }

    fn hb() -> HerschelBulkleyParams<f64> {
        HerschelBulkleyParams::new(65.0, 10.0, 0.5).unwrap()
    }

    fn grid(n: usize) -> GridSpec<f64> {
        GridSpec::square(n, n, 5.0, 0.0, 0.0).unwrap()
    }

    fn flat_cfg(n: usize) -> SlideConfig<f64> {
        SlideConfig::new(hb(), table_mat(), ScalarField::filled(grid(n), -50.0), 100.0).unwrap()
    }

    #[test]
    fn init_state_is_plug_at_rest() {
        let cfg = flat_cfg(6);
        let h0 = ScalarField::from_index_fn(grid(6), |i, j| (i + j) as f64);
        let s = init_slide_state(&h0, &cfg).unwrap();
        assert_eq!(s.h_p, h0);
        assert!(s.h_s.values().iter().all(|&v| v == 0.0));
        assert_eq!(s.max_speed(), 0.0);
        assert_eq!(s.t, 0.0);

        let zero = init_slide_state(&ScalarField::filled(grid(6), 0.0), &cfg).unwrap();
        assert_eq!(zero.volume(), 0.0);
        assert_eq!(zero.moving_cell_count(), 0);
    }

    #[test]
    fn init_state_errors() {
        let cfg = flat_cfg(4);
        let mut h = ScalarField::filled(grid(4), 1.0);
        h.set(2, 2, -0.1);
        assert!(matches!(init_slide_state(&h, &cfg), Err(Error::Validation(_))));
        let other = ScalarField::filled(grid(5), 1.0);
        assert!(matches!(init_slide_state(&other, &cfg), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn yield_check_examples() {
        // uniform H on a flat bed
        let cfg = flat_cfg(5);
        let s = init_slide_state(&ScalarField::filled(grid(5), 10.0), &cfg).unwrap();
        assert_eq!(yield_check(&s, &cfg, 2, 2), CellMotion::Static);

        // H = 10 on a surface sloping 0.1: 1500 * 3.27 * 10 * 0.1 = 4905 Pa > 65 Pa
        let spec = grid(5);
        let bed = ScalarField::from_fn(spec, |x, _| -0.1 * x);
        let cfg = SlideConfig::new(hb(), table_mat(), bed, 10.0).unwrap();
        let s = init_slide_state(&ScalarField::filled(spec, 10.0), &cfg).unwrap();
        assert_eq!(yield_check(&s, &cfg, 2, 2), CellMotion::Dynamic);

        // H = 0.01 on slope 0.001: 0.049 Pa
        let bed = ScalarField::from_fn(spec, |x, _| -0.001 * x);
        let cfg = SlideConfig::new(hb(), table_mat(), bed, 10.0).unwrap();
        let s = init_slide_state(&ScalarField::filled(spec, 0.01), &cfg).unwrap();
        assert_eq!(yield_check(&s, &cfg, 2, 2), CellMotion::Static);
    }

    #[test]
    fn timestep_examples() {
        let spec = grid(5);
        let bed = ScalarField::from_fn(spec, |x, _| -0.1 * x);
        let cfg = SlideConfig::new(hb(), table_mat(), bed, 1000.0).unwrap();
        let s = init_slide_state(&ScalarField::filled(spec, 10.0), &cfg).unwrap();
        let SlideTimestep::Step(dt) = compute_slide_timestep(&s, &cfg) else {
            panic!("expected a step");
        };
        let g_red = 9.81 * (1.0 - 1000.0 / 1500.0);
        let want = 0.5 * 5.0 / (g_red * 10.0f64).sqrt();
        assert!((dt - want).abs() < 1e-12);
        assert!((dt - 0.437).abs() < 1e-3);

        let s2 = init_slide_state(&ScalarField::filled(spec, 20.0), &cfg).unwrap();
        let SlideTimestep::Step(dt2) = compute_slide_timestep(&s2, &cfg) else {
            panic!()
        };
        assert!((dt / dt2 - 2f64.sqrt()).abs() < 1e-12);

        let flat = flat_cfg(5);
        let rest = init_slide_state(&ScalarField::filled(spec, 10.0), &flat).unwrap();
        assert_eq!(compute_slide_timestep(&rest, &flat), SlideTimestep::Quiescent);
    }

    #[test]
    fn timestep_capped_at_end() {
        let spec = grid(5);
        let bed = ScalarField::from_fn(spec, |x, _| -0.1 * x);
        let cfg = SlideConfig::new(hb(), table_mat(), bed, 0.1).unwrap();
        let s = init_slide_state(&ScalarField::filled(spec, 10.0), &cfg).unwrap();
        assert_eq!(compute_slide_timestep(&s, &cfg), SlideTimestep::Step(0.1));
    }

    #[test]
    fn uniform_rest_is_unchanged() {
        let cfg = flat_cfg(6);
        let s = init_slide_state(&ScalarField::filled(grid(6), 3.0), &cfg).unwrap();
        let next = hyperbolic_step(&s, &cfg, 0.1).unwrap();
        assert_eq!(next.h_p, s.h_p);
        assert_eq!(next.u, s.u);
    }

    fn mound(spec: GridSpec<f64>, peak: f64, radius: f64) -> ScalarField<f64> {
        let cx = spec.x_at(spec.nx / 2);
        let cy = spec.y_at(spec.ny / 2);
        ScalarField::from_fn(spec, |x, y| {
            let d = hypot2(x - cx, y - cy);
            if d < radius {
                peak * 0.5 * (1.0 + (std::f64::consts::PI * d / radius).cos())
            } else {
                0.0
            }
        })
    }

    #[test]
    fn transport_conserves_volume() {
        let spec = grid(21);
        let bed = ScalarField::from_fn(spec, |x, y| -0.05 * x - 0.02 * y);
        let cfg = SlideConfig::new(hb(), table_mat(), bed, 100.0).unwrap();
        let mut s = init_slide_state(&mound(spec, 8.0, 30.0), &cfg).unwrap();
        let v0 = s.volume();
        for _ in 0..50 {
            let (n, rep) = advance(&s, &cfg).unwrap();
            assert!((rep.volume - v0).abs() <= 1e-12 * v0);
            s = n;
        }
        assert!(s.max_speed() > 0.0);
        assert!(s.h_p.values().iter().all(|&h| h >= 0.0));
    }

    #[test]
    fn friction_step_stops_without_reversal() {
        let cfg = flat_cfg(3);
        let spec = grid(3);
        let h = ScalarField::filled(spec, 0.01);
        let u = ScalarField::filled(spec, 1e-3);
        let z = ScalarField::filled(spec, 0.0);
        let s = SlideState::from_layers(h, z.clone(), u, z).unwrap();
        let next = friction_source_step(&s, &cfg, 0.1);
        assert!(next.u.values().iter().all(|&u| u == 0.0));
    }

    #[test]
    fn friction_step_identity_without_resistance() {
        let mat = MaterialParams::new(1500.0, 1000.0, 1.0, 0.0, 0.0, 9.81).unwrap();
        let spec = grid(3);
        let hb = HerschelBulkleyParams::new(1e-300, 10.0, 0.5).unwrap();
        let cfg = SlideConfig::new(hb, mat, ScalarField::filled(spec, 0.0), 1.0).unwrap();
        let cfg = cfg.with_closure(NoResistance);
        let h = ScalarField::filled(spec, 2.0);
        let u = ScalarField::filled(spec, 1.5);
        let v = ScalarField::filled(spec, -0.5);
        let s = SlideState::from_layers(h.clone(), h, u, v).unwrap();
        let next = friction_source_step(&s, &cfg, 0.3);
        assert_eq!(next, s);
        // at-rest cells untouched
        let rest = init_slide_state(&ScalarField::filled(spec, 2.0), &cfg).unwrap();
        assert_eq!(friction_source_step(&rest, &cfg, 0.3), rest);
    }

    struct NoResistance;
    impl LayerClosure<f64> for NoResistance {
        fn yield_strength(&self) -> f64 {
            0.0
        }
        fn alpha(&self) -> f64 {
            1.2
        }
        fn r_vel(&self) -> f64 {
            0.75
        }
        fn basal_stress(&self, _: f64, _: f64) -> f64 {
            0.0
        }
    }

    #[test]
    fn quiescent_advance_jumps_to_end() {
        let cfg = flat_cfg(4);
        let s = init_slide_state(&ScalarField::filled(grid(4), 1.0), &cfg).unwrap();
        let (next, rep) = advance(&s, &cfg).unwrap();
        assert!(rep.quiescent);
        assert_eq!(next.t, cfg.t_end);
        assert_eq!(next.h_p, s.h_p);
    }

    #[test]
    fn run_slide_zero_thickness_gives_bed_frames() {
        let cfg = flat_cfg(4);
        let (series, fin) = run_slide(&ScalarField::filled(grid(4), 0.0), &cfg, 1.0).unwrap();
        assert!(series.len() >= 2);
        for f in series.frames() {
            assert_eq!(f.field, cfg.bed);
        }
        assert_eq!(fin.volume(), 0.0);
    }

    #[test]
    fn two_layer_bingham_paths_agree_bitwise() {
        let spec = grid(17);
        let bed = ScalarField::from_fn(spec, |x, _| -0.2 * x);
        let hb1 = HerschelBulkleyParams::new(65.0, 10.0, 1.0).unwrap();
        let general = SlideConfig::new(hb1, table_mat(), bed, 30.0).unwrap();
        let bingham = general.clone().with_closure(Bingham { tau_y: 65.0, mu: 10.0 });
        let h = mound(spec, 10.0, 25.0);
        let hs = h.map(|x| 0.3 * x);
        let hp = h.map(|x| 0.7 * x);
        let u = h.map(|x| if x > 0.0 { 0.5 } else { 0.0 });
        let z = ScalarField::filled(spec, 0.0);
        let mut a = SlideState::from_layers(hp, hs, u, z).unwrap();
        let mut b = a.clone();
        for _ in 0..40 {
            a = advance(&a, &general).unwrap().0;
            b = advance(&b, &bingham).unwrap().0;
        }
        assert!(a.h_s.values().iter().any(|&x| x > 0.0));
        assert_eq!(a, b);
    }

    #[test]
    fn deposit_profile_examples() {
        let cfg = flat_cfg(9);
        let spec = grid(9);
        let s = init_slide_state(&ScalarField::filled(spec, 1.0), &cfg).unwrap();
        let prof = deposit_profile(&s, &[(0.0, 5.0), (40.0, 5.0)]).unwrap();
        assert_eq!(prof.len(), 17);
        assert!(prof.iter().all(|&(_, h)| (h - 1.0).abs() < 1e-15));
        assert_eq!(prof.last().unwrap().0, 40.0);

        let z = init_slide_state(&ScalarField::filled(spec, 0.0), &cfg).unwrap();
        let prof = deposit_profile(&z, &[(0.0, 0.0), (20.0, 20.0), (40.0, 0.0)]).unwrap();
        assert!(prof.iter().all(|&(_, h)| h == 0.0));
        assert!(matches!(
            deposit_profile(&z, &[(0.0, 0.0), (41.0, 0.0)]),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn recover_preserves_total_momentum() {
        let (hp, hs, vel) = recover(3.0f64, [1.2, -0.4], [0.6, -0.2], 0.75, 1e-4);
        assert!(hp >= 0.0 && hs >= 0.0 && (hp + hs - 3.0).abs() < 1e-15);
        let m = hp + 0.75 * hs;
        assert!((m * vel[0] - 1.8).abs() < 1e-14 && (m * vel[1] + 0.6).abs() < 1e-14);
        // plug and shear share one direction: ms = r hs u, mp = hp u
        assert!((0.75 * hs * vel[0] - 0.6).abs() < 1e-14);
        assert_eq!(recover(3.0, [0.0; 2], [0.0; 2], 0.75, 1e-4), (3.0, 0.0, [0.0; 2]));
    }
}
