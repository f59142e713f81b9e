//! Zeros of holomorphic functions in rectangles: winding numbers by adaptive
//! phase tracking, quadrisection, Newton polishing.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Rect, Result};

/// Off-centre split so subdivision lines rarely pass through zeros that sit
/// on a symmetry axis of the parent box.
const SPLIT: f64 = 0.4932;
/// Offset of interior tile lines, in tile widths.
const TILE_SHIFT: f64 = 0.0731;
const MAX_PHASE_STEP: f64 = PI / 4.0;
const MAX_EDGE_DEPTH: u32 = 40;

/// A function value together with the magnitude of the terms that produced it.
/// `value / scale` is the relative size used for residuals and for deciding
/// that a contour passes through a zero.
#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub value: Complex64,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Zero {
    pub z: Complex64,
    pub multiplicity: u32,
    /// `|f(z)| / scale` at the reported point.
    pub residual: f64,
    pub rect: Rect,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverSettings {
    /// Relative residual required of a Newton-polished simple zero.
    pub tol: f64,
    /// Boxes smaller than this (relative to `max(1, |centre|)`) are not split further.
    pub min_box: f64,
    /// Expected phase rate of `f` per unit length, used for the initial
    /// sampling of each edge.
    pub phase_rate: f64,
    /// Tile side for the initial partition of a search rectangle.
    pub tile: f64,
    /// Relative magnitude below which a contour point counts as a zero.
    pub zero_floor: f64,
    /// Tag carried into error messages (the angular mode, for resonances).
    pub tag: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol: 1e-10, min_box: 1e-6, phase_rate: 2.0, tile: 2.0, zero_floor: 1e-14, tag: 0 }
    }
}

pub struct ZeroFinder<F> {
    f: F,
    settings: SolverSettings,
}

fn rect_centre(r: &Rect) -> Complex64 {
    Complex64::new(0.5 * (r.re_min + r.re_max), 0.5 * (r.im_min + r.im_max))
}

fn contains(r: &Rect, z: Complex64) -> bool {
    z.re >= r.re_min && z.re <= r.re_max && z.im >= r.im_min && z.im <= r.im_max
}

fn corners(r: &Rect) -> [Complex64; 4] {
    [
        Complex64::new(r.re_min, r.im_min),
        Complex64::new(r.re_max, r.im_min),
        Complex64::new(r.re_max, r.im_max),
        Complex64::new(r.re_min, r.im_max),
    ]
}

impl<F> ZeroFinder<F>
where
    F: Fn(Complex64) -> Result<Sample> + Sync,
{
    pub fn new(f: F, settings: SolverSettings) -> Self {
        Self { f, settings }
    }

    fn sample(&self, z: Complex64, rect: &Rect) -> Result<Sample> {
        let s = (self.f)(z)?;
        if !(s.value.re.is_finite() && s.value.im.is_finite()) {
            return Err(self.failure(rect, format!("non-finite value at {z}")));
        }
        if s.value.norm() <= self.settings.zero_floor * s.scale {
            return Err(self.failure(rect, format!("zero on the contour near {z}")));
        }
        Ok(s)
    }

    fn failure(&self, rect: &Rect, reason: String) -> Error {
        Error::ContourFailure { rect: *rect, ell: self.settings.tag, reason }
    }

    /// Total change of `arg f` along the segment `a -> b`.
    pub fn edge_phase(&self, a: Complex64, b: Complex64, rect: &Rect) -> Result<f64> {
        let len = (b - a).norm();
        let pieces = ((len * self.settings.phase_rate / MAX_PHASE_STEP).ceil() as usize).max(2);
        let mut total = 0.0;
        let mut za = a;
        let mut fa = self.sample(a, rect)?.value;
        for k in 1..=pieces {
            let zb = if k == pieces { b } else { a + (b - a) * (k as f64 / pieces as f64) };
            let fb = self.sample(zb, rect)?.value;
            total += self.track(za, fa, zb, fb, 0, rect)?;
            za = zb;
            fa = fb;
        }
        Ok(total)
    }

    fn track(
        &self,
        za: Complex64,
        fa: Complex64,
        zb: Complex64,
        fb: Complex64,
        depth: u32,
        rect: &Rect,
    ) -> Result<f64> {
        let whole = (fb / fa).arg();
        let zm = 0.5 * (za + zb);
        let fm = self.sample(zm, rect)?.value;
        // accept when the image of the segment hugs the chord fa -> fb,
        // which stays away from the origin when the end phases are close
        let bow = (fm - 0.5 * (fa + fb)).norm();
        if whole.abs() <= MAX_PHASE_STEP && bow <= 0.25 * fa.norm().min(fb.norm()) {
            return Ok(whole);
        }
        if depth >= MAX_EDGE_DEPTH {
            return Err(self.failure(rect, format!("phase not resolved near {zm}")));
        }
        Ok(self.track(za, fa, zm, fm, depth + 1, rect)? + self.track(zm, fm, zb, fb, depth + 1, rect)?)
    }

    /// Winding number of `f` around the boundary of `rect`.
    pub fn winding(&self, rect: &Rect) -> Result<i64> {
        let c = corners(rect);
        let mut total = 0.0;
        for k in 0..4 {
            total += self.edge_phase(c[k], c[(k + 1) % 4], rect)?;
        }
        self.integral_winding(total, rect)
    }

    fn integral_winding(&self, phase: f64, rect: &Rect) -> Result<i64> {
        let w = phase / (2.0 * PI);
        if (w - w.round()).abs() > 0.25 {
            return Err(self.failure(rect, format!("winding estimate {w} is not integral")));
        }
        let w = w.round() as i64;
        if w < 0 {
            return Err(self.failure(rect, format!("negative winding {w} for an entire function")));
        }
        Ok(w)
    }

    /// All zeros in `region`, each with the winding of its isolating box.
    pub fn zeros(&self, region: &Rect) -> Result<Vec<Zero>> {
        self.zeros_where(region, |_| true)
    }

    /// As [`zeros`](Self::zeros), skipping initial tiles for which `keep` is false.
    pub fn zeros_where(&self, region: &Rect, keep: impl Fn(&Rect) -> bool + Sync) -> Result<Vec<Zero>> {
        let (tiles, windings) = self.tile_windings(region)?;
        let found: Vec<Result<Vec<Zero>>> = tiles
            .par_iter()
            .zip(windings.par_iter())
            .filter(|(t, w)| **w != 0 && keep(t))
            .map(|(t, &w)| {
                let mut out = Vec::new();
                self.isolate(t, w, &mut out)?;
                Ok(out)
            })
            .collect();
        let mut all = Vec::new();
        for part in found {
            all.extend(part?);
        }
        Ok(all)
    }

    /// Total winding around `region`, computed tile by tile.
    pub fn total_winding(&self, region: &Rect) -> Result<i64> {
        Ok(self.tile_windings(region)?.1.iter().sum())
    }

    /// Tiles of the initial partition and their windings. Shared edges are
    /// tracked once, so the tile windings add up to the winding of `region`.
    fn tile_windings(&self, region: &Rect) -> Result<(Vec<Rect>, Vec<i64>)> {
        let width = region.re_max - region.re_min;
        let height = region.im_max - region.im_min;
        let nx = ((width / self.settings.tile).ceil() as usize).max(1);
        let ny = ((height / self.settings.tile).ceil() as usize).max(1);
        // interior lines are shifted off the symmetric positions (Re λ = 0 in
        // particular), where zeros of radial problems like to sit
        let line = |k: usize, n: usize| {
            let shift = if k == 0 || k == n { 0.0 } else { TILE_SHIFT };
            (k as f64 + shift) / n as f64
        };
        let xs: Vec<f64> = (0..=nx).map(|i| region.re_min + width * line(i, nx)).collect();
        let ys: Vec<f64> = (0..=ny).map(|j| region.im_min + height * line(j, ny)).collect();
        let point = |i: usize, j: usize| Complex64::new(xs[i], ys[j]);
        let tile = |i: usize, j: usize| Rect { re_min: xs[i], re_max: xs[i + 1], im_min: ys[j], im_max: ys[j + 1] };
        // horizontal edge (i, j): point(i, j) -> point(i+1, j)
        let horizontal: Vec<f64> = (0..nx * (ny + 1))
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k % nx, k / nx);
                let owner = tile(i, j.min(ny - 1));
                self.edge_phase(point(i, j), point(i + 1, j), &owner)
            })
            .collect::<Result<_>>()?;
        // vertical edge (i, j): point(i, j) -> point(i, j+1)
        let vertical: Vec<f64> = ((0..(nx + 1) * ny).into_par_iter())
            .map(|k| {
                let (i, j) = (k % (nx + 1), k / (nx + 1));
                let owner = tile(i.min(nx - 1), j);
                self.edge_phase(point(i, j), point(i, j + 1), &owner)
            })
            .collect::<Result<_>>()?;
        let mut tiles = Vec::with_capacity(nx * ny);
        let mut windings = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let phase = horizontal[j * nx + i] + vertical[j * (nx + 1) + i + 1]
                    - horizontal[(j + 1) * nx + i]
                    - vertical[j * (nx + 1) + i];
                let t = tile(i, j);
                windings.push(self.integral_winding(phase, &t)?);
                tiles.push(t);
            }
        }
        Ok((tiles, windings))
    }

    fn isolate(&self, rect: &Rect, winding: i64, out: &mut Vec<Zero>) -> Result<()> {
        if winding == 0 {
            return Ok(());
        }
        let centre = rect_centre(rect);
        if winding == 1 {
            if let Some((z, residual)) = self.newton(centre, rect) {
                if contains(rect, z) && residual <= self.settings.tol {
                    out.push(Zero { z, multiplicity: 1, residual, rect: *rect });
                    return Ok(());
                }
            }
        }
        let size = (rect.re_max - rect.re_min).max(rect.im_max - rect.im_min);
        if size <= self.settings.min_box * centre.norm().max(1.0) {
            let (z, residual) = match self.newton(centre, rect) {
                Some((z, r)) if winding == 1 && contains(rect, z) => (z, r),
                _ => (centre, self.relative(centre)?),
            };
            out.push(Zero { z, multiplicity: winding as u32, residual, rect: *rect });
            return Ok(());
        }
        let children = split(rect);
        let mut sum = 0;
        let mut windings = [0i64; 4];
        for (w, child) in windings.iter_mut().zip(&children) {
            *w = match self.winding(child) {
                Ok(w) => w,
                // a multiple zero flattens f below the noise floor near the
                // split lines; report the cluster if the box is already small
                Err(_) if size <= 1e3 * self.settings.min_box * centre.norm().max(1.0) => {
                    out.push(Zero {
                        z: centre,
                        multiplicity: winding as u32,
                        residual: self.relative(centre)?,
                        rect: *rect,
                    });
                    return Ok(());
                }
                Err(e) => return Err(e),
            };
            sum += *w;
        }
        if sum != winding {
            return Err(self.failure(rect, format!("sub-box windings sum to {sum}, parent winding is {winding}")));
        }
        for (child, w) in children.iter().zip(windings) {
            self.isolate(child, w, out)?;
        }
        Ok(())
    }

    fn relative(&self, z: Complex64) -> Result<f64> {
        let s = (self.f)(z)?;
        Ok(s.value.norm() / s.scale)
    }

    /// Newton iteration from `start` with a central-difference
    /// derivative, stopped once the relative residual is at most `tol`.
    /// Returns the final point and its relative residual, or `None` if the
    /// iterate leaves `rect` widened by its own size on every side.
    pub fn newton(&self, start: Complex64, rect: &Rect) -> Option<(Complex64, f64)> {
        let width = rect.re_max - rect.re_min;
        let height = rect.im_max - rect.im_min;
        let near = Rect {
            re_min: rect.re_min - width,
            re_max: rect.re_max + width,
            im_min: rect.im_min - height,
            im_max: rect.im_max + height,
        };
        let mut z = start;
        for _ in 0..60 {
            let sample = (self.f)(z).ok()?;
            if sample.value.norm() <= self.settings.tol * sample.scale {
                break;
            }
            let fz = sample.value;
            let h = 1e-5 * z.norm().max(1.0);
            let fp = ((self.f)(z + h).ok()?.value - (self.f)(z - h).ok()?.value) / (2.0 * h);
            if fp.norm() == 0.0 || !fp.re.is_finite() {
                return None;
            }
            let step = fz / fp;
            z -= step;
            if !contains(&near, z) {
                return None;
            }
            if step.norm() <= 1e-15 * z.norm().max(1.0) {
                break;
            }
        }
        let residual = self.relative(z).ok()?;
        Some((z, residual))
    }
}

fn split(r: &Rect) -> [Rect; 4] {
    let xm = r.re_min + SPLIT * (r.re_max - r.re_min);
    let ym = r.im_min + SPLIT * (r.im_max - r.im_min);
    [
        Rect { re_min: r.re_min, re_max: xm, im_min: r.im_min, im_max: ym },
        Rect { re_min: xm, re_max: r.re_max, im_min: r.im_min, im_max: ym },
        Rect { re_min: xm, re_max: r.re_max, im_min: ym, im_max: r.im_max },
        Rect { re_min: r.re_min, re_max: xm, im_min: ym, im_max: r.im_max },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(a: f64, b: f64, c: f64, d: f64) -> Rect {
        Rect { re_min: a, re_max: b, im_min: c, im_max: d }
    }

    #[test]
    fn finds_polynomial_roots_with_multiplicity() {
        let roots = [Complex64::new(0.3, -0.2), Complex64::new(-1.1, -2.5), Complex64::new(2.2, -0.7)];
        let f = |z: Complex64| -> Result<Sample> {
            let mut v = Complex64::new(1.0, 0.0);
            let mut s = 1.0;
            for r in &roots {
                v *= z - r;
                s *= z.norm() + r.norm();
            }
            // double root at 2.2-0.7i
            v *= z - roots[2];
            s *= z.norm() + roots[2].norm();
            Ok(Sample { value: v, scale: s })
        };
        let finder = ZeroFinder::new(f, SolverSettings::default());
        let region = rect(-3.0, 3.0, -3.0, -0.01);
        assert_eq!(finder.total_winding(&region).unwrap(), 4);
        let zeros = finder.zeros(&region).unwrap();
        let total: u32 = zeros.iter().map(|z| z.multiplicity).sum();
        assert_eq!(total, 4);
        for r in &roots[..2] {
            assert!(zeros.iter().any(|z| (z.z - r).norm() < 1e-12 && z.multiplicity == 1));
        }
        let double = zeros.iter().find(|z| z.multiplicity == 2).unwrap();
        assert!((double.z - roots[2]).norm() < 1e-4);
    }

    #[test]
    fn zero_free_function_has_no_winding() {
        let f = |z: Complex64| Ok(Sample { value: z.exp(), scale: z.exp().norm() });
        let finder = ZeroFinder::new(f, SolverSettings::default());
        assert!(finder.zeros(&rect(-5.0, 5.0, -5.0, 5.0)).unwrap().is_empty());
    }

    #[test]
    fn contour_through_a_zero_is_reported() {
        let f = |z: Complex64| Ok(Sample { value: z - 1.0, scale: z.norm() + 1.0 });
        let finder = ZeroFinder::new(f, SolverSettings::default());
        match finder.winding(&rect(1.0, 2.0, -1.0, 1.0)) {
            Err(Error::ContourFailure { rect, .. }) => assert_eq!(rect.re_min, 1.0),
            other => panic!("expected contour failure, got {other:?}"),
        }
    }
}
