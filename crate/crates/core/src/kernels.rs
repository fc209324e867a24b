//! Kernel weights for local smoothing over rescaled time `t / T`.
//!
//! Two-sided weights carry a boundary correction: near either end of the
//! sample the kernel is renormalised by its mass over the attainable part of
//! the support. One-sided weights look strictly backwards (`Left`, `s < t`) or
//! forwards (`Right`, `s >= t`) and are used to compare the local structure on
//! either side of a time point.

use crate::error::{Error, Result};

/// Default scale of the rule-of-thumb bandwidth, `2.345 / sqrt(12)`.
pub const ROT_SCALE: f64 = 0.676_943_190_624_836_3;

const QUAD_TOL: f64 = 1e-10;
const QUAD_MAX_DEPTH: u32 = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Epanechnikov,
    Uniform,
    Quartic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelSide {
    TwoSided,
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: f64,
    pub side: KernelSide,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64, side: KernelSide) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth <= 1.0) {
            return Err(Error::invalid(format!(
                "bandwidth must lie in (0, 1], got {bandwidth}"
            )));
        }
        Ok(Self {
            family,
            bandwidth,
            side,
        })
    }

    pub fn two_sided(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        Self::new(family, bandwidth, KernelSide::TwoSided)
    }

    /// Same family and bandwidth, different side.
    pub fn with_side(self, side: KernelSide) -> Self {
        Self { side, ..self }
    }

    /// Integer half-width `floor(T h)` of the kernel support in time steps.
    pub fn half_width(&self, len: usize) -> usize {
        (len as f64 * self.bandwidth + 1e-9).floor() as usize
    }
}

impl KernelFamily {
    pub fn density(self, u: f64) -> f64 {
        kernel_density(self, u)
    }
}

/// Kernel density `k(u)`, zero outside `[-1, 1]`.
pub fn kernel_density(family: KernelFamily, u: f64) -> f64 {
    if !(-1.0..=1.0).contains(&u) {
        return 0.0;
    }
    match family {
        KernelFamily::Epanechnikov => 0.75 * (1.0 - u * u),
        KernelFamily::Uniform => 0.5,
        KernelFamily::Quartic => {
            let v = 1.0 - u * u;
            15.0 / 16.0 * v * v
        }
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, QUAD_MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

fn check_index(t: usize, len: usize) -> Result<()> {
    if t == 0 || t > len {
        Err(Error::TimeOutOfRange { t, len })
    } else {
        Ok(())
    }
}

/// Mass of the kernel over the part of its support reachable from `t`.
///
/// Equals one in the interior. Left-boundary points (`t <= floor(Th)`)
/// integrate from `-t/(Th)`, right-boundary points (`t >= T - floor(Th)`)
/// integrate up to `(1 - t/T)/h`.
pub fn boundary_divisor(spec: &KernelSpec, t: usize, len: usize) -> f64 {
    let h = spec.bandwidth;
    let th = spec.half_width(len);
    let tf = t as f64;
    let n = len as f64;
    let left = t <= th;
    let right = t + th >= len;
    if !left && !right {
        return 1.0;
    }
    let lo = if left { (-tf / (n * h)).max(-1.0) } else { -1.0 };
    let hi = if right { ((1.0 - tf / n) / h).min(1.0) } else { 1.0 };
    let family = spec.family;
    adaptive_simpson(&|u| kernel_density(family, u), lo, hi, QUAD_TOL)
}

/// Boundary-corrected two-sided weight `K_{h,st}`, time indices 1-based.
pub fn boundary_weight(spec: &KernelSpec, s: usize, t: usize, len: usize) -> Result<f64> {
    if spec.side != KernelSide::TwoSided {
        return Err(Error::invalid("boundary_weight requires a two-sided kernel"));
    }
    check_index(s, len)?;
    check_index(t, len)?;
    let u = (s as f64 - t as f64) / (len as f64 * spec.bandwidth);
    let k = kernel_density(spec.family, u);
    if k == 0.0 {
        return Ok(0.0);
    }
    Ok(k / spec.bandwidth / boundary_divisor(spec, t, len))
}

/// Time window `[lo, hi]` (1-based, inclusive) of a one-sided kernel at `t`,
/// or `None` when the window is empty.
pub fn onesided_window(spec: &KernelSpec, t: usize, len: usize) -> Option<(usize, usize)> {
    let w = spec.half_width(len);
    match spec.side {
        KernelSide::Left => {
            if t <= 1 || w == 0 {
                None
            } else {
                Some((t.saturating_sub(w).max(1), t - 1))
            }
        }
        KernelSide::Right => {
            if t > len {
                None
            } else {
                Some((t, (t + w).min(len)))
            }
        }
        KernelSide::TwoSided => None,
    }
}

/// One-sided weight `2 k((s - t)/(T h)) / h` inside the side's window, zero outside.
pub fn onesided_weight(spec: &KernelSpec, s: usize, t: usize, len: usize) -> Result<f64> {
    if spec.side == KernelSide::TwoSided {
        return Err(Error::invalid("onesided_weight requires a Left or Right kernel"));
    }
    check_index(s, len)?;
    check_index(t, len)?;
    let (lo, hi) = onesided_window(spec, t, len).ok_or(Error::DegenerateWindow { t })?;
    if s < lo || s > hi {
        return Ok(0.0);
    }
    Ok(onesided_raw(spec, s, t, len))
}

fn onesided_raw(spec: &KernelSpec, s: usize, t: usize, len: usize) -> f64 {
    let u = (s as f64 - t as f64) / (len as f64 * spec.bandwidth);
    2.0 * kernel_density(spec.family, u) / spec.bandwidth
}

/// Rule-of-thumb bandwidth `c (n T)^{-1/5}`.
///
/// `n_cross` is the cross-sectional dimension pooled by the scatter matrix:
/// `q` when estimating row loadings, `p` for column loadings.
pub fn rot_bandwidth(n_cross: usize, len: usize, scale: f64) -> f64 {
    scale * ((n_cross * len) as f64).powf(-0.2)
}

/// Precomputed kernel weights for a fixed `(spec, T)`.
///
/// Boundary divisors are evaluated once on construction; afterwards the table
/// is immutable and can be shared freely across threads.
#[derive(Debug, Clone)]
pub struct KernelWeights {
    spec: KernelSpec,
    len: usize,
    divisors: Vec<f64>,
}

impl KernelWeights {
    pub fn new(spec: KernelSpec, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("series length must be positive"));
        }
        let divisors = match spec.side {
            KernelSide::TwoSided => (1..=len).map(|t| boundary_divisor(&spec, t, len)).collect(),
            _ => Vec::new(),
        };
        Ok(Self {
            spec,
            len,
            divisors,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Nonzero weights `(s, w)` contributing at time `t` (both 1-based).
    pub fn weights_at(&self, t: usize) -> Result<Vec<(usize, f64)>> {
        check_index(t, self.len)?;
        let spec = &self.spec;
        let (lo, hi) = match spec.side {
            KernelSide::TwoSided => {
                let w = spec.half_width(self.len);
                (t.saturating_sub(w).max(1), (t + w).min(self.len))
            }
            _ => onesided_window(spec, t, self.len).ok_or(Error::DegenerateWindow { t })?,
        };
        let scale = self.len as f64 * spec.bandwidth;
        let mut out = Vec::with_capacity(hi + 1 - lo);
        for s in lo..=hi {
            let w = match spec.side {
                KernelSide::TwoSided => {
                    let u = (s as f64 - t as f64) / scale;
                    kernel_density(spec.family, u) / spec.bandwidth / self.divisors[t - 1]
                }
                _ => onesided_raw(spec, s, t, self.len),
            };
            if w > 0.0 {
                out.push((s, w));
            }
        }
        Ok(out)
    }
}
