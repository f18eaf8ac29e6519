//! Argument-principle zero counting over rectangles.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::det::Scaled;
use crate::error::{Error, Result};

/// Axis-aligned closed rectangle in the complex plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        if !(re_min < re_max && im_min < im_max) {
            return Err(Error::InvalidInput(format!(
                "empty rectangle [{re_min}, {re_max}] x [{im_min}, {im_max}]"
            )));
        }
        Ok(Self {
            re_min,
            re_max,
            im_min,
            im_max,
        })
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.contains_with(z, 0.0)
    }

    pub fn contains_with(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.re_min - slack
            && z.re <= self.re_max + slack
            && z.im >= self.im_min - slack
            && z.im <= self.im_max + slack
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(
            0.5 * (self.re_min + self.re_max),
            0.5 * (self.im_min + self.im_max),
        )
    }

    /// Corners counter-clockwise from the lower-left.
    pub fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }

    /// Splits across the longer side at fraction `frac`.
    pub fn split(&self, frac: f64) -> (Rect, Rect) {
        let mut a = *self;
        let mut b = *self;
        if self.width() >= self.height() {
            let x = self.re_min + frac * self.width();
            a.re_max = x;
            b.re_min = x;
        } else {
            let y = self.im_min + frac * self.height();
            a.im_max = y;
            b.im_min = y;
        }
        (a, b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourOptions {
    /// Initial samples per edge.
    pub points_per_edge: usize,
    /// Largest accepted jump of `log f` between neighbouring samples.
    pub max_step: f64,
    pub max_depth: u32,
}

impl Default for ContourOptions {
    fn default() -> Self {
        Self {
            points_per_edge: 32,
            max_step: PI / 4.0,
            max_depth: 36,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourCount {
    /// Total change of `arg f` over `2π`.
    pub winding: f64,
    pub count: i64,
    /// `(1/2πi) ∮ z f'/f dz`: the sum of the enclosed zeros.
    pub zero_sum: Complex64,
    pub evaluations: usize,
}

struct Walker<'a, F> {
    f: &'a F,
    opts: &'a ContourOptions,
    arg: f64,
    moment: Complex64,
    evals: usize,
}

impl<F: Fn(Complex64) -> Result<Scaled>> Walker<'_, F> {
    fn eval(&mut self, z: Complex64) -> Result<Scaled> {
        self.evals += 1;
        let v = (self.f)(z)?;
        if v.value.norm() == 0.0 || !v.value.norm().is_finite() {
            return Err(Error::ZeroOnContour { at: z });
        }
        Ok(v)
    }

    fn segment(
        &mut self,
        a: Complex64,
        fa: Scaled,
        b: Complex64,
        fb: Scaled,
        depth: u32,
    ) -> Result<()> {
        let dlog = (fb.value / fa.value).ln() + (fb.log_scale - fa.log_scale);
        if dlog.norm() <= self.opts.max_step {
            self.arg += dlog.im;
            self.moment += 0.5 * (a + b) * dlog;
            return Ok(());
        }
        if depth >= self.opts.max_depth {
            return Err(Error::ZeroOnContour { at: 0.5 * (a + b) });
        }
        let m = 0.5 * (a + b);
        let fm = self.eval(m)?;
        self.segment(a, fa, m, fm, depth + 1)?;
        self.segment(m, fm, b, fb, depth + 1)
    }
}

/// Number of zeros of `f` inside `rect` (no poles assumed), with the
/// log-derivative moment that locates a single zero.
pub fn count_zeros<F>(f: &F, rect: &Rect, opts: &ContourOptions) -> Result<ContourCount>
where
    F: Fn(Complex64) -> Result<Scaled>,
{
    let mut w = Walker {
        f,
        opts,
        arg: 0.0,
        moment: Complex64::new(0.0, 0.0),
        evals: 0,
    };
    let c = rect.corners();
    let n = opts.points_per_edge.max(1);
    let mut prev_z = c[0];
    let mut prev_f = w.eval(prev_z)?;
    for e in 0..4 {
        let (a, b) = (c[e], c[(e + 1) % 4]);
        for j in 1..=n {
            let z = a + (b - a) * (j as f64 / n as f64);
            let fz = w.eval(z)?;
            w.segment(prev_z, prev_f, z, fz, 0)?;
            prev_z = z;
            prev_f = fz;
        }
    }
    let winding = w.arg / (2.0 * PI);
    Ok(ContourCount {
        winding,
        count: winding.round() as i64,
        zero_sum: w.moment / Complex64::new(0.0, 2.0 * PI),
        evaluations: w.evals,
    })
}
