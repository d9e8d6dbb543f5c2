//! Two-dimensional nonlinear shallow-water solver over a moving bed.
//!
//! First-order Godunov finite volumes with an HLLE interface flux and
//! hydrostatic reconstruction of the depths against the bed jump at each
//! face, which keeps still water over any bed exactly at rest. The two
//! directions are advanced as successive one-dimensional sweeps so the
//! explicit step stays stable at the full CFL number. Boundaries are
//! reflective walls.

use std::path::{Path, PathBuf};

use crate::coupling::BedMotionSeries;
use crate::error::{Error, Result};
use crate::num::{hypot2, Real};
use crate::observables::{sample_gauges, Gauge, GaugeSeries, MaxFields, DEFAULT_ARRIVAL_THRESHOLD};
use crate::par::{map_rows, per_row};
use crate::raster::{write_esri_ascii, GridSpec, ScalarField};

/// Largest tolerated relative mass created by clamping negative depths in
/// one step.
const CLAMP_MASS_LIMIT: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct SWEConfig<T> {
    pub g: T,
    pub cfl: T,
    /// Depth below which a cell is dry and carries no momentum, m.
    pub h_dry: T,
    /// Still-water surface elevation, m.
    pub datum: T,
    pub t_end: T,
    /// Manning coefficient for optional bottom friction, s/m^(1/3).
    pub manning: Option<T>,
}

impl<T: Real> SWEConfig<T> {
    pub fn new(datum: T, t_end: T) -> Self {
        Self {
            g: T::lit(9.81),
            cfl: T::lit(0.9),
            h_dry: T::lit(1e-3),
            datum,
            t_end,
            manning: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > T::zero() && self.cfl < T::one()) {
            return Err(Error::Validation(format!(
                "water cfl must be in (0, 1), got {}",
                self.cfl
            )));
        }
        if !(self.h_dry > T::zero()) {
            return Err(Error::Validation(format!("h_dry must be > 0, got {}", self.h_dry)));
        }
        if !(self.g > T::zero() && self.g.is_finite()) {
            return Err(Error::Validation(format!("g must be > 0, got {}", self.g)));
        }
        if !(self.t_end > T::zero() && self.t_end.is_finite()) {
            return Err(Error::Validation(format!(
                "water t_end must be > 0, got {}",
                self.t_end
            )));
        }
        if !self.datum.is_finite() {
            return Err(Error::Validation("datum must be finite".into()));
        }
        if let Some(n) = self.manning {
            if !(n >= T::zero() && n.is_finite()) {
                return Err(Error::Validation(format!("manning must be >= 0, got {n}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaterState<T> {
    pub h: ScalarField<T>,
    pub hu: ScalarField<T>,
    pub hv: ScalarField<T>,
    pub bed: ScalarField<T>,
    pub t: T,
}

impl<T: Real> WaterState<T> {
    pub fn spec(&self) -> &GridSpec<T> {
        self.h.spec()
    }

    /// Free surface `h + bed`, or nodata on dry cells.
    pub fn surface(&self, h_dry: T, nodata: T) -> ScalarField<T> {
        let spec = self.spec().with_nodata(nodata);
        let (h, b) = (self.h.values(), self.bed.values());
        let mut out = ScalarField::filled(spec, nodata);
        map_rows(out.values_mut(), spec.nx, |j, row| {
            for (i, z) in row.iter_mut().enumerate() {
                let k = j * spec.nx + i;
                if h[k] >= h_dry {
                    *z = h[k] + b[k];
                }
            }
        });
        out
    }

    /// Flow speed, zero on dry cells.
    pub fn speed(&self, h_dry: T) -> ScalarField<T> {
        let spec = *self.spec();
        let (h, hu, hv) = (self.h.values(), self.hu.values(), self.hv.values());
        let mut out = ScalarField::filled(spec, T::zero());
        map_rows(out.values_mut(), spec.nx, |j, row| {
            for (i, s) in row.iter_mut().enumerate() {
                let k = j * spec.nx + i;
                if h[k] >= h_dry {
                    *s = hypot2(hu[k], hv[k]) / h[k];
                }
            }
        });
        out
    }

    /// Total water volume, m³, summed row by row.
    pub fn volume(&self) -> T {
        let spec = self.spec();
        let h = self.h.values();
        let rows = per_row(spec.ny, |j| {
            h[j * spec.nx..(j + 1) * spec.nx].iter().fold(T::zero(), |a, &x| a + x)
        });
        rows.into_iter().fold(T::zero(), |a, b| a + b) * spec.cell_area()
    }

    fn check_finite(&self) -> Result<()> {
        for (name, f) in [("h", &self.h), ("hu", &self.hu), ("hv", &self.hv)] {
            if let Some(k) = f.values().iter().position(|x| !x.is_finite()) {
                let nx = self.spec().nx;
                return Err(Error::Domain(format!(
                    "non-finite {name} at cell ({}, {})",
                    k % nx,
                    k / nx
                )));
            }
        }
        Ok(())
    }
}

/// Lake at rest at the datum.
pub fn init_water_state<T: Real>(bed: &ScalarField<T>, cfg: &SWEConfig<T>) -> WaterState<T> {
    let spec = *bed.spec();
    let h = bed.map(|b| (cfg.datum - b).max(T::zero()));
    let zero = ScalarField::filled(spec, T::zero());
    WaterState {
        h,
        hu: zero.clone(),
        hv: zero,
        bed: bed.clone(),
        t: T::zero(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// One cell as seen from a face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellState<T> {
    pub h: T,
    pub hu: T,
    pub hv: T,
    pub b: T,
}

/// Numerical flux through a face, in the face's normal frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InterfaceFlux<T> {
    pub mass: T,
    pub normal: T,
    pub tangential: T,
    /// Hydrostatic pressure `g h*²/2` of the reconstructed left and right
    /// depths. The left cell sees `normal - p_left` as its outgoing normal
    /// momentum flux, the right cell `normal - p_right` as incoming.
    pub p_left: T,
    pub p_right: T,
    pub s_left: T,
    pub s_right: T,
}

impl<T: Real> InterfaceFlux<T> {
    fn scaled(self, theta: T) -> Self {
        Self {
            mass: self.mass * theta,
            normal: self.normal * theta,
            tangential: self.tangential * theta,
            ..self
        }
    }
}

#[inline]
fn velocity<T: Real>(h: T, m: T) -> T {
    if h > T::zero() {
        m / h
    } else {
        T::zero()
    }
}

/// Reconstructed state on one side of a face, in the face's normal frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct FaceState<T> {
    h: T,
    eta: T,
    un: T,
    ut: T,
}

impl<T: Real> FaceState<T> {
    fn of_cell(c: &CellState<T>, axis: Axis) -> Self {
        let (n, t) = match axis {
            Axis::X => (c.hu, c.hv),
            Axis::Y => (c.hv, c.hu),
        };
        Self {
            h: c.h,
            eta: c.h + c.b,
            un: velocity(c.h, n),
            ut: velocity(c.h, t),
        }
    }

    /// Mirror image across a wall.
    fn mirrored(self) -> Self {
        Self { un: -self.un, ..self }
    }
}

/// HLLE flux across a face with hydrostatic depth reconstruction.
pub fn swe_interface_flux<T: Real>(
    left: &CellState<T>,
    right: &CellState<T>,
    axis: Axis,
    cfg: &SWEConfig<T>,
) -> InterfaceFlux<T> {
    face_flux(FaceState::of_cell(left, axis), FaceState::of_cell(right, axis), cfg.g)
}

fn face_flux<T: Real>(left: FaceState<T>, right: FaceState<T>, g: T) -> InterfaceFlux<T> {
    let half = T::half();
    let b_star = (left.eta - left.h).max(right.eta - right.h);
    let hl = (left.eta - b_star).max(T::zero()).min(left.h);
    let hr = (right.eta - b_star).max(T::zero()).min(right.h);
    let p_left = half * g * hl * hl;
    let p_right = half * g * hr * hr;
    if hl == T::zero() && hr == T::zero() {
        return InterfaceFlux {
            p_left,
            p_right,
            ..Default::default()
        };
    }
    let (ul, vl, ur, vr) = (left.un, left.ut, right.un, right.ut);
    let (cl, cr) = ((g * hl).sqrt(), (g * hr).sqrt());

    let (s_left, s_right) = if hl == T::zero() {
        (ur - T::two() * cr, ur + cr)
    } else if hr == T::zero() {
        (ul - cl, ul + T::two() * cl)
    } else {
        let (rl, rr) = (hl.sqrt(), hr.sqrt());
        let u_roe = (rl * ul + rr * ur) / (rl + rr);
        let c_roe = (half * g * (hl + hr)).sqrt();
        ((ul - cl).min(u_roe - c_roe), (ur + cr).max(u_roe + c_roe))
    };

    // reconstructed conserved states and physical fluxes
    let ql = [hl, hl * ul, hl * vl];
    let qr = [hr, hr * ur, hr * vr];
    let fl = [hl * ul, hl * ul * ul + p_left, hl * ul * vl];
    let fr = [hr * ur, hr * ur * ur + p_right, hr * ur * vr];

    let f = if s_left >= T::zero() {
        fl
    } else if s_right <= T::zero() {
        fr
    } else {
        let width = s_right - s_left;
        let skew = (s_right + s_left) / width;
        let jump = s_left * s_right / width;
        let mut f = [T::zero(); 3];
        for c in 0..3 {
            f[c] = half * (fl[c] + fr[c]) - half * skew * (fr[c] - fl[c]) + jump * (qr[c] - ql[c]);
        }
        f
    };
    InterfaceFlux {
        mass: f[0],
        normal: f[1],
        tangential: f[2],
        p_left,
        p_right,
        s_left,
        s_right,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SweTimestep<T> {
    Step(T),
    /// Every cell is dry.
    Quiescent,
}

/// CFL step from the fastest wet cell, capped at the remaining time.
///
/// While some wet cell borders a dry cell it can flood, a wet/dry front is
/// moving and can travel as fast as the Riemann invariant `|u| + 2c`; the
/// step then uses that bound instead of `|u| + c`.
pub fn compute_swe_timestep<T: Real>(state: &WaterState<T>, cfg: &SWEConfig<T>) -> SweTimestep<T> {
    let spec = state.spec();
    let (nx, ny) = (spec.nx, spec.ny);
    let (h, hu, hv, b) = (
        state.h.values(),
        state.hu.values(),
        state.hv.values(),
        state.bed.values(),
    );
    let floods = |k: usize, n: usize| h[n] < cfg.h_dry && b[n] < h[k] + b[k];
    // per row: (max |u| + c, max |u| + 2c, any front)
    let rows = per_row(ny, |j| {
        let mut acc: Option<(T, T, bool)> = None;
        for i in 0..nx {
            let k = j * nx + i;
            if h[k] < cfg.h_dry {
                continue;
            }
            let front = (i > 0 && floods(k, k - 1))
                || (i + 1 < nx && floods(k, k + 1))
                || (j > 0 && floods(k, k - nx))
                || (j + 1 < ny && floods(k, k + nx));
            let u = hypot2(hu[k], hv[k]) / h[k];
            let c = (cfg.g * h[k]).sqrt();
            let (wave, invariant) = (u + c, u + (c + c));
            acc = Some(match acc {
                None => (wave, invariant, front),
                Some((w, r, f)) => (w.max(wave), r.max(invariant), f || front),
            });
        }
        acc
    });
    let Some((wave, invariant, front)) = rows
        .into_iter()
        .flatten()
        .reduce(|(w1, r1, f1), (w2, r2, f2)| (w1.max(w2), r1.max(r2), f1 || f2))
    else {
        return SweTimestep::Quiescent;
    };
    let speed = if front { invariant } else { wave };
    if !(speed > T::zero()) {
        return SweTimestep::Quiescent;
    }
    let dt = cfg.cfl * spec.dx.min(spec.dy) / speed;
    SweTimestep::Step(dt.min(cfg.t_end - state.t))
}

#[inline]
fn minmod<T: Real>(a: T, b: T) -> T {
    if a > T::zero() && b > T::zero() {
        a.min(b)
    } else if a < T::zero() && b < T::zero() {
        a.max(b)
    } else {
        T::zero()
    }
}

/// Piecewise-linear face values of one cell: index 0 is the low face,
/// index 1 the high face.
#[derive(Clone, Copy, Default)]
struct Recon<T> {
    side: [FaceState<T>; 2],
}

/// Sweep geometry along `axis`. Faces are stored row-major with
/// `faces_per_row` faces per face row.
#[derive(Clone, Copy)]
struct Layout {
    nx: usize,
    ny: usize,
    axis: Axis,
}

impl Layout {
    fn faces_per_row(&self) -> usize {
        match self.axis {
            Axis::X => self.nx + 1,
            Axis::Y => self.nx,
        }
    }
    fn face_rows(&self) -> usize {
        match self.axis {
            Axis::X => self.ny,
            Axis::Y => self.ny + 1,
        }
    }
    /// Cells on the low and high side of face `f`.
    fn sides(&self, f: usize) -> (Option<usize>, Option<usize>) {
        let (a, row) = (f % self.faces_per_row(), f / self.faces_per_row());
        match self.axis {
            Axis::X => {
                let lo = (a > 0).then(|| row * self.nx + a - 1);
                let hi = (a < self.nx).then(|| row * self.nx + a);
                (lo, hi)
            }
            Axis::Y => {
                let lo = (row > 0).then(|| (row - 1) * self.nx + a);
                let hi = (row < self.ny).then(|| row * self.nx + a);
                (lo, hi)
            }
        }
    }
    /// Low and high face of cell `(i, j)`.
    fn faces_of(&self, i: usize, j: usize) -> (usize, usize) {
        match self.axis {
            Axis::X => {
                let lo = j * (self.nx + 1) + i;
                (lo, lo + 1)
            }
            Axis::Y => (j * self.nx + i, (j + 1) * self.nx + i),
        }
    }
    /// Neighbours of cell `(i, j)` along the sweep, if interior.
    fn neighbours(&self, i: usize, j: usize) -> Option<(usize, usize)> {
        let k = j * self.nx + i;
        match self.axis {
            Axis::X if i > 0 && i + 1 < self.nx => Some((k - 1, k + 1)),
            Axis::Y if j > 0 && j + 1 < self.ny => Some((k - self.nx, k + self.nx)),
            _ => None,
        }
    }
}

fn reconstruct<T: Real>(state: &WaterState<T>, cfg: &SWEConfig<T>, layout: Layout) -> Vec<Recon<T>> {
    let nx = layout.nx;
    let axis = layout.axis;
    let centre = |k: usize| {
        FaceState::of_cell(
            &CellState {
                h: state.h.values()[k],
                hu: state.hu.values()[k],
                hv: state.hv.values()[k],
                b: state.bed.values()[k],
            },
            axis,
        )
    };
    let mut out = vec![Recon::default(); nx * layout.ny];
    map_rows(&mut out, nx, |j, row| {
        for (i, r) in row.iter_mut().enumerate() {
            let k = j * nx + i;
            let c = centre(k);
            let flat = Recon { side: [c, c] };
            *r = match layout.neighbours(i, j) {
                Some((lo, hi)) if c.h >= cfg.h_dry => {
                    let (l, h) = (centre(lo), centre(hi));
                    let half = T::half();
                    let dh = half * minmod(c.h - l.h, h.h - c.h);
                    let de = half * minmod(c.eta - l.eta, h.eta - c.eta);
                    let du = half * minmod(c.un - l.un, h.un - c.un);
                    let dv = half * minmod(c.ut - l.ut, h.ut - c.ut);
                    Recon {
                        side: [
                            FaceState {
                                h: c.h - dh,
                                eta: c.eta - de,
                                un: c.un - du,
                                ut: c.ut - dv,
                            },
                            FaceState {
                                h: c.h + dh,
                                eta: c.eta + de,
                                un: c.un + du,
                                ut: c.ut + dv,
                            },
                        ],
                    }
                }
                _ => flat,
            };
        }
    });
    out
}

/// One forward-Euler stage `U + dt L(U)` along `axis`.
fn stage<T: Real>(state: &WaterState<T>, cfg: &SWEConfig<T>, dt: T, axis: Axis, deficit: &mut T) -> WaterState<T> {
    let spec = *state.spec();
    let layout = Layout {
        nx: spec.nx,
        ny: spec.ny,
        axis,
    };
    let ratio = match axis {
        Axis::X => dt / spec.dx,
        Axis::Y => dt / spec.dy,
    };
    let recon = reconstruct(state, cfg, layout);

    let mut faces = vec![InterfaceFlux::default(); layout.faces_per_row() * layout.face_rows()];
    let fpr = layout.faces_per_row();
    map_rows(&mut faces, fpr, |row, out| {
        for (a, f) in out.iter_mut().enumerate() {
            *f = match layout.sides(row * fpr + a) {
                (Some(l), Some(r)) => face_flux(recon[l].side[1], recon[r].side[0], cfg.g),
                (None, Some(r)) => {
                    let c = recon[r].side[0];
                    InterfaceFlux {
                        mass: T::zero(),
                        ..face_flux(c.mirrored(), c, cfg.g)
                    }
                }
                (Some(l), None) => {
                    let c = recon[l].side[1];
                    InterfaceFlux {
                        mass: T::zero(),
                        ..face_flux(c, c.mirrored(), cfg.g)
                    }
                }
                (None, None) => unreachable!("face without cells"),
            };
        }
    });

    // draining-time limiter: a cell never exports more water than it holds
    let h = state.h.values();
    let mut theta = vec![T::one(); spec.len()];
    map_rows(&mut theta, spec.nx, |j, row| {
        for (i, th) in row.iter_mut().enumerate() {
            let (lo, hi) = layout.faces_of(i, j);
            let out = (faces[hi].mass.max(T::zero()) + (-faces[lo].mass).max(T::zero())) * ratio;
            let k = j * spec.nx + i;
            if out > h[k] {
                *th = h[k] / out;
            }
        }
    });
    let limited = |f: usize| -> InterfaceFlux<T> {
        let face = faces[f];
        let donor = if face.mass > T::zero() {
            layout.sides(f).0
        } else if face.mass < T::zero() {
            layout.sides(f).1
        } else {
            None
        };
        match donor {
            Some(k) if theta[k] < T::one() => face.scaled(theta[k]),
            _ => face,
        }
    };

    let mut next = state.clone();
    let mut cells = vec![(T::zero(), T::zero(), T::zero(), T::zero()); spec.len()];
    let (hu, hv) = (state.hu.values(), state.hv.values());
    let half_g = T::half() * cfg.g;
    map_rows(&mut cells, spec.nx, |j, row| {
        for (i, out) in row.iter_mut().enumerate() {
            let k = j * spec.nx + i;
            let (flo, fhi) = layout.faces_of(i, j);
            let (lo, hi) = (limited(flo), limited(fhi));
            let [m, p] = recon[k].side;
            let interior = half_g * (m.h + p.h) * (p.eta - m.eta);
            let mut hn = h[k] - ratio * (hi.mass - lo.mass);
            let mn = ((hi.normal - hi.p_left) - (lo.normal - lo.p_right)) + interior;
            let mt = hi.tangential - lo.tangential;
            let (mut un, mut vn) = match axis {
                Axis::X => (hu[k] - ratio * mn, hv[k] - ratio * mt),
                Axis::Y => (hu[k] - ratio * mt, hv[k] - ratio * mn),
            };
            let mut gap = T::zero();
            if hn < T::zero() {
                gap = -hn;
                hn = T::zero();
            }
            if hn < cfg.h_dry {
                un = T::zero();
                vn = T::zero();
            }
            *out = (hn, un, vn, gap);
        }
    });
    let gaps = per_row(spec.ny, |j| {
        cells[j * spec.nx..(j + 1) * spec.nx]
            .iter()
            .fold(T::zero(), |a, c| a + c.3)
    });
    *deficit = *deficit + gaps.into_iter().fold(T::zero(), |a, b| a + b);
    for (k, (hn, un, vn, _)) in cells.into_iter().enumerate() {
        next.h.values_mut()[k] = hn;
        next.hu.values_mut()[k] = un;
        next.hv.values_mut()[k] = vn;
    }
    next
}

/// Second-order sweep along `axis`: two Euler stages averaged (Heun).
fn sweep<T: Real>(state: &WaterState<T>, cfg: &SWEConfig<T>, dt: T, axis: Axis, deficit: &mut T) -> WaterState<T> {
    let first = stage(state, cfg, dt, axis, deficit);
    let second = stage(&first, cfg, dt, axis, deficit);
    let spec = *state.spec();
    let half = T::half();
    let mut next = second;
    let (h0, hu0, hv0) = (state.h.values(), state.hu.values(), state.hv.values());
    let avg = |dst: &mut ScalarField<T>, src: &[T]| {
        map_rows(dst.values_mut(), spec.nx, |j, row| {
            for (i, v) in row.iter_mut().enumerate() {
                *v = half * (src[j * spec.nx + i] + *v);
            }
        });
    };
    avg(&mut next.h, h0);
    avg(&mut next.hu, hu0);
    avg(&mut next.hv, hv0);
    let h = next.h.values().to_vec();
    for m in [&mut next.hu, &mut next.hv] {
        map_rows(m.values_mut(), spec.nx, |j, row| {
            for (i, v) in row.iter_mut().enumerate() {
                if h[j * spec.nx + i] < cfg.h_dry {
                    *v = T::zero();
                }
            }
        });
    }
    next
}

/// Semi-implicit Manning bottom friction.
fn apply_manning<T: Real>(state: &mut WaterState<T>, n: T, g: T, h_dry: T, dt: T) {
    let spec = *state.spec();
    let h = state.h.values().to_vec();
    let exponent = T::lit(4.0) / T::lit(3.0);
    let factor = |k: usize, hu: T, hv: T| {
        if h[k] < h_dry {
            return T::one();
        }
        let speed = hypot2(hu, hv) / h[k];
        T::one() / (T::one() + dt * g * n * n * speed / h[k].powf(exponent))
    };
    let hv0 = state.hv.values().to_vec();
    let hu0 = state.hu.values().to_vec();
    map_rows(state.hu.values_mut(), spec.nx, |j, row| {
        for (i, m) in row.iter_mut().enumerate() {
            let k = j * spec.nx + i;
            *m = *m * factor(k, hu0[k], hv0[k]);
        }
    });
    map_rows(state.hv.values_mut(), spec.nx, |j, row| {
        for (i, m) in row.iter_mut().enumerate() {
            let k = j * spec.nx + i;
            *m = *m * factor(k, hu0[k], hv0[k]);
        }
    });
}

/// Advances the state by `dt`: an x sweep followed by a y sweep, then
/// optional bottom friction.
pub fn swe_step<T: Real>(state: &WaterState<T>, cfg: &SWEConfig<T>, dt: T) -> Result<WaterState<T>> {
    let mut deficit = T::zero();
    let mid = sweep(state, cfg, dt, Axis::X, &mut deficit);
    let mut next = sweep(&mid, cfg, dt, Axis::Y, &mut deficit);
    if deficit > T::zero() {
        let total = state.volume() / state.spec().cell_area();
        let rel = if total > T::zero() {
            deficit / total
        } else {
            T::infinity()
        };
        if rel > T::lit(CLAMP_MASS_LIMIT) {
            return Err(Error::ConservationFault {
                what: "water mass",
                relative: rel.as_f64(),
                limit: CLAMP_MASS_LIMIT,
            });
        }
    }
    if let Some(n) = cfg.manning.filter(|&n| n > T::zero()) {
        apply_manning(&mut next, n, cfg.g, cfg.h_dry, dt);
    }
    next.t = state.t + dt;
    if cfg!(debug_assertions) {
        next.check_finite()?;
    }
    Ok(next)
}

/// Replaces the bed, holding the depth fixed so the surface moves with it.
pub fn apply_bed_update<T: Real>(state: &WaterState<T>, new_bed: &ScalarField<T>) -> Result<WaterState<T>> {
    state.spec().ensure_same(new_bed.spec(), "bed update")?;
    let mut next = state.clone();
    next.bed = new_bed.clone();
    Ok(next)
}

/// Snapshot output settings for [`run_swe`].
#[derive(Clone, Debug)]
pub struct SnapshotSink<T> {
    pub dir: PathBuf,
    pub every: T,
}

#[derive(Clone, Debug)]
pub struct SweRunOptions<T> {
    pub gauges: Vec<Gauge<T>>,
    pub arrival_threshold: T,
    pub snapshots: Option<SnapshotSink<T>>,
}

impl<T: Real> Default for SweRunOptions<T> {
    fn default() -> Self {
        Self {
            gauges: Vec::new(),
            arrival_threshold: T::lit(DEFAULT_ARRIVAL_THRESHOLD),
            snapshots: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweSummary<T> {
    pub initial: WaterState<T>,
    pub final_state: WaterState<T>,
    pub max: MaxFields<T>,
    pub gauges: Vec<GaugeSeries<T>>,
    /// Cells that held at least `h_dry` of water at any step.
    pub ever_wet: Vec<bool>,
    pub steps: usize,
    /// Relative change of water volume over the run.
    pub volume_drift: T,
}

/// Runs the water model on `spec` forced by `bed_motion`, which is held at
/// its last frame beyond its recorded window.
pub fn run_swe<T: Real>(
    bed_motion: &BedMotionSeries<T>,
    spec: &GridSpec<T>,
    cfg: &SWEConfig<T>,
    opts: &SweRunOptions<T>,
) -> Result<SweSummary<T>> {
    cfg.validate()?;
    for g in &opts.gauges {
        g.check_inside(spec)?;
    }
    let bed0 = bed_motion.bed_at_time(T::zero(), spec)?;
    let initial = init_water_state(&bed0, cfg);
    let mut state = initial.clone();
    let mut max = MaxFields::new(*spec);
    let mut series: Vec<GaugeSeries<T>> = opts.gauges.iter().cloned().map(GaugeSeries::new).collect();
    let mut ever_wet: Vec<bool> = state.h.values().iter().map(|&h| h >= cfg.h_dry).collect();
    let v0 = state.volume();
    let mut steps = 0usize;
    let mut next_snapshot = T::zero();
    let mut snapshot_index = 0usize;

    if let Some(sink) = &opts.snapshots {
        if !(sink.every > T::zero()) {
            return Err(Error::Validation("snapshot cadence must be > 0".into()));
        }
        std::fs::create_dir_all(&sink.dir).map_err(|e| Error::io(&sink.dir, e))?;
        write_snapshot(&state, cfg, &sink.dir, snapshot_index)?;
        snapshot_index += 1;
        next_snapshot = sink.every;
    }

    let eps = T::epsilon() * T::lit(16.0) * cfg.t_end.max(T::one());
    while cfg.t_end - state.t > eps {
        let bed = bed_motion.bed_at_time(state.t, spec)?;
        state = apply_bed_update(&state, &bed)?;
        let mut dt = match compute_swe_timestep(&state, cfg) {
            SweTimestep::Step(dt) => dt,
            SweTimestep::Quiescent => cfg.t_end - state.t,
        };
        if opts.snapshots.is_some() && state.t + dt > next_snapshot {
            dt = next_snapshot - state.t;
        }
        let t_target = state.t + dt;
        state = if state.h.values().iter().any(|&h| h > T::zero()) {
            swe_step(&state, cfg, dt)?
        } else {
            let mut s = state.clone();
            s.t = t_target;
            s
        };
        steps += 1;
        for (s, sample) in series.iter_mut().zip(sample_gauges(&state, &opts.gauges, cfg)?) {
            s.push(sample)?;
        }
        max.update(&state, cfg, opts.arrival_threshold);
        for (w, &h) in ever_wet.iter_mut().zip(state.h.values()) {
            *w |= h >= cfg.h_dry;
        }
        if let Some(sink) = &opts.snapshots {
            if state.t >= next_snapshot - eps {
                write_snapshot(&state, cfg, &sink.dir, snapshot_index)?;
                snapshot_index += 1;
                next_snapshot = next_snapshot + sink.every;
            }
        }
    }
    let drift = if v0 > T::zero() {
        (state.volume() - v0) / v0
    } else {
        T::zero()
    };
    Ok(SweSummary {
        initial,
        final_state: state,
        max,
        gauges: series,
        ever_wet,
        steps,
        volume_drift: drift,
    })
}

fn write_snapshot<T: Real>(state: &WaterState<T>, cfg: &SWEConfig<T>, dir: &Path, index: usize) -> Result<()> {
    let nodata = T::lit(-9999.0);
    write_esri_ascii(
        &state.surface(cfg.h_dry, nodata),
        dir.join(format!("eta_{index:05}.asc")),
    )?;
    write_esri_ascii(&state.h, dir.join(format!("h_{index:05}.asc")))?;
    write_esri_ascii(&state.speed(cfg.h_dry), dir.join(format!("speed_{index:05}.asc")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(n: usize, depth: f64, dx: f64) -> ScalarField<f64> {
        ScalarField::filled(GridSpec::square(n, n, dx, 0.0, 0.0).unwrap(), -depth)
    }

    #[test]
    fn init_examples() {
        let cfg = SWEConfig::new(0.0, 10.0);
        let s = init_water_state(&flat(4, 70.0, 5.0), &cfg);
        assert!(s.h.values().iter().all(|&h| h == 70.0));
        let dry = init_water_state(&flat(4, -2.0, 5.0), &cfg);
        assert!(dry.h.values().iter().all(|&h| h == 0.0));
        assert_eq!(compute_swe_timestep(&dry, &cfg), SweTimestep::Quiescent);
    }

    #[test]
    fn timestep_example() {
        let cfg = SWEConfig::new(0.0, 10.0);
        let s = init_water_state(&flat(4, 70.0, 5.0), &cfg);
        let SweTimestep::Step(dt) = compute_swe_timestep(&s, &cfg) else {
            panic!()
        };
        assert!((dt - 0.9 * 5.0 / (9.81f64 * 70.0).sqrt()).abs() < 1e-15);
        assert!((dt - 0.1717).abs() < 1e-4);
        let cfg2 = SWEConfig { g: 2.0 * 9.81, ..cfg };
        let SweTimestep::Step(dt2) = compute_swe_timestep(&s, &cfg2) else {
            panic!()
        };
        assert!((dt / dt2 - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn flux_at_rest_is_pure_pressure() {
        let cfg = SWEConfig::new(0.0, 1.0);
        let c = CellState {
            h: 2.0,
            hu: 0.0,
            hv: 0.0,
            b: -2.0,
        };
        let f = swe_interface_flux(&c, &c, Axis::X, &cfg);
        assert_eq!(f.mass, 0.0);
        assert_eq!(f.normal - f.p_left, 0.0);
        assert_eq!(f.normal - f.p_right, 0.0);
        // across a bed step with level surface
        let r = CellState {
            h: 0.5,
            hu: 0.0,
            hv: 0.0,
            b: -0.5,
        };
        let f = swe_interface_flux(&c, &r, Axis::Y, &cfg);
        assert_eq!(f.mass, 0.0);
        assert_eq!(f.normal, f.p_left);
        assert_eq!(f.normal, f.p_right);
    }

    #[test]
    fn dry_neighbour_receives_no_flux_at_rest() {
        let cfg = SWEConfig::new(0.0, 1.0);
        let wet = CellState {
            h: 1.0,
            hu: 0.0,
            hv: 0.0,
            b: -1.0,
        };
        let land = CellState {
            h: 0.0,
            hu: 0.0,
            hv: 0.0,
            b: 3.0,
        };
        let f = swe_interface_flux(&wet, &land, Axis::X, &cfg);
        assert_eq!(f, InterfaceFlux::default());
    }

    #[test]
    fn flux_is_mirror_antisymmetric() {
        let cfg = SWEConfig::new(0.0, 1.0);
        let l = CellState {
            h: 1.3,
            hu: 0.7,
            hv: -0.2,
            b: -1.1,
        };
        let r = CellState {
            h: 0.4,
            hu: -0.1,
            hv: 0.5,
            b: -0.3,
        };
        let f = swe_interface_flux(&l, &r, Axis::X, &cfg);
        let ml = CellState { hu: -r.hu, ..r };
        let mr = CellState { hu: -l.hu, ..l };
        let m = swe_interface_flux(&ml, &mr, Axis::X, &cfg);
        assert_eq!(m.mass, -f.mass);
        assert_eq!(m.normal, f.normal);
        assert_eq!(m.tangential, -f.tangential);
        assert_eq!(m.p_left, f.p_right);
    }

    #[test]
    fn lake_at_rest_over_rough_bed() {
        let spec = GridSpec::square(20, 15, 3.0, 0.0, 0.0).unwrap();
        let bed = ScalarField::from_index_fn(spec, |i, j| {
            -5.0 + 3.0 * ((i * 7 + j * 13) % 5) as f64 / 5.0 + if i > 15 { 6.0 } else { 0.0 }
        });
        let cfg = SWEConfig::new(0.0, 100.0);
        let mut s = init_water_state(&bed, &cfg);
        for _ in 0..50 {
            let SweTimestep::Step(dt) = compute_swe_timestep(&s, &cfg) else {
                panic!()
            };
            s = swe_step(&s, &cfg, dt).unwrap();
        }
        let eta = s.surface(cfg.h_dry, -9999.0);
        for &e in eta.values() {
            assert!(e == -9999.0 || e.abs() <= 1e-13, "eta {e}");
        }
        assert!(s.hu.values().iter().all(|&m| m.abs() < 1e-13));
    }

    #[test]
    fn bed_update_moves_surface() {
        let cfg = SWEConfig::new(0.0, 1.0);
        let bed = flat(5, 10.0, 2.0);
        let s = init_water_state(&bed, &cfg);
        let lifted = bed.map(|b| b + 0.5);
        let n = apply_bed_update(&s, &lifted).unwrap();
        assert_eq!(n.h, s.h);
        let eta = n.surface(cfg.h_dry, -9999.0);
        assert!(eta.values().iter().all(|&e| e == 0.5));
        // uniform lift drives no flow
        let m = swe_step(&n, &cfg, 0.1).unwrap();
        assert!(m.hu.values().iter().chain(m.hv.values()).all(|&x| x == 0.0));
        assert_eq!(apply_bed_update(&s, &bed).unwrap(), s);
        assert!(apply_bed_update(&s, &flat(6, 1.0, 2.0)).is_err());
    }

    #[test]
    fn dam_break_stays_positive_and_conserves_mass() {
        let spec = GridSpec::new(60, 3, 1.0, 1.0, 0.0, 0.0).unwrap();
        let bed = ScalarField::filled(spec, 0.0);
        let cfg = SWEConfig::new(0.0, 5.0);
        let mut s = init_water_state(&bed, &cfg);
        for k in 0..spec.len() {
            if k % 60 < 30 {
                s.h.values_mut()[k] = 1.0;
            }
        }
        let v0: f64 = s.volume();
        for _ in 0..200 {
            let SweTimestep::Step(dt) = compute_swe_timestep(&s, &cfg) else {
                break;
            };
            if dt <= 0.0 {
                break;
            }
            s = swe_step(&s, &cfg, dt).unwrap();
            assert!(s.h.values().iter().all(|&h| h >= 0.0));
        }
        assert!(((s.volume() - v0) / v0).abs() < 1e-13);
    }

    #[test]
    fn manning_only_slows() {
        let mut cfg = SWEConfig::new(0.0, 1.0);
        cfg.manning = Some(0.03);
        let mut s = init_water_state(&flat(5, 2.0, 1.0), &cfg);
        s.hu = s.hu.map(|_| 1.0);
        let n = swe_step(&s, &cfg, 0.01).unwrap();
        let c = n.hu.get(2, 2);
        assert!(c > 0.0 && c < 1.0);
        cfg.manning = Some(-1.0);
        assert!(cfg.validate().is_err());
    }
}
