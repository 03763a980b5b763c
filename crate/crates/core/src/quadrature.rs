//! Adaptive Gauss–Kronrod quadrature, nested for low-dimensional integrals.
//!
//! Intervals are refined in order of decreasing error estimate; ties go to the
//! older interval, so the refinement sequence is reproducible.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::stats::pairwise_sum;

/// Kronrod nodes, descending, last one is the centre.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
/// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    /// Estimate of the integral of `|f|`.
    pub abs_integral: f64,
    pub evals: u64,
    pub converged: bool,
}

impl Integral {
    pub fn zero() -> Self {
        Integral { value: 0.0, error: 0.0, abs_integral: 0.0, evals: 0, converged: true }
    }
}

/// A node sample: value, absolute error already attached to it, evaluations spent.
#[derive(Clone, Copy)]
struct Sample {
    value: f64,
    error: f64,
    abs: f64,
    evals: u64,
    converged: bool,
}

struct Cell {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs: f64,
    id: u64,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error).then_with(|| other.id.cmp(&self.id))
    }
}

fn kronrod_points(a: f64, b: f64) -> [f64; 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut x = [0.0; 15];
    for i in 0..7 {
        x[2 * i] = c - h * XGK[i];
        x[2 * i + 1] = c + h * XGK[i];
    }
    x[14] = c;
    x
}

/// Applies the 15-point rule to samples laid out as in [`kronrod_points`].
fn kronrod_rule(a: f64, b: f64, s: &[Sample]) -> (f64, f64, f64, u64, bool) {
    let h = 0.5 * (b - a);
    let centre = s[14];
    let mut resk = WGK[7] * centre.value;
    let mut resg = WG[3] * centre.value;
    let mut resabs = WGK[7] * centre.abs;
    let mut inner_err = WGK[7] * centre.error;
    for i in 0..7 {
        let (lo, hi) = (s[2 * i], s[2 * i + 1]);
        resk += WGK[i] * (lo.value + hi.value);
        resabs += WGK[i] * (lo.abs + hi.abs);
        inner_err += WGK[i] * (lo.error + hi.error);
        if i % 2 == 1 {
            resg += WG[i / 2] * (lo.value + hi.value);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[7] * (centre.value - mean).abs();
    for i in 0..7 {
        resasc += WGK[i] * ((s[2 * i].value - mean).abs() + (s[2 * i + 1].value - mean).abs());
    }
    let (resk, resabs, resasc) = (resk * h, resabs * h.abs(), resasc * h.abs());
    let mut err = ((resk - resg * h)).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    err = err.max(50.0 * f64::EPSILON * resabs);
    let evals = s.iter().map(|x| x.evals).sum();
    let converged = s.iter().all(|x| x.converged);
    (resk, err + inner_err * h.abs(), resabs, evals, converged)
}

/// Adaptive Gauss–Kronrod (7/15) integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adaptive {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Adaptive { rel_tol: 1e-10, abs_tol: 0.0, max_intervals: 1000 }
    }
}

impl Adaptive {
    fn tolerance(&self, value: f64, abs: f64) -> f64 {
        // The absolute-integral floor keeps cancelling integrands from
        // refining forever around a zero value.
        self.abs_tol.max(self.rel_tol * value.abs().max(1e-3 * abs))
    }

    fn run(&self, a: f64, b: f64, eval: &dyn Fn(&[f64; 15]) -> Vec<Sample>) -> Integral {
        if a == b {
            return Integral::zero();
        }
        let mut evals = 0u64;
        let mut inner_ok = true;
        let mut next_id = 0u64;
        let mut cell = |a: f64, b: f64, evals: &mut u64, ok: &mut bool| {
            let s = eval(&kronrod_points(a, b));
            let (value, error, abs, n, conv) = kronrod_rule(a, b, &s);
            *evals += n;
            *ok &= conv;
            let c = Cell { a, b, value, error, abs, id: next_id };
            next_id += 1;
            c
        };
        let first = cell(a, b, &mut evals, &mut inner_ok);
        let (mut total, mut total_err, mut total_abs) = (first.value, first.error, first.abs);
        let mut heap = BinaryHeap::new();
        heap.push(first);
        while total_err > self.tolerance(total, total_abs) && heap.len() < self.max_intervals {
            let worst = heap.pop().expect("heap is never empty");
            let mid = 0.5 * (worst.a + worst.b);
            if !(mid > worst.a.min(worst.b) && mid < worst.a.max(worst.b)) {
                heap.push(worst);
                break;
            }
            let left = cell(worst.a, mid, &mut evals, &mut inner_ok);
            let right = cell(mid, worst.b, &mut evals, &mut inner_ok);
            total += left.value + right.value - worst.value;
            total_err += left.error + right.error - worst.error;
            total_abs += left.abs + right.abs - worst.abs;
            heap.push(left);
            heap.push(right);
        }
        let mut cells = heap.into_vec();
        cells.sort_by(|x, y| x.a.total_cmp(&y.a));
        let value = pairwise_sum(&cells.iter().map(|c| c.value).collect::<Vec<_>>());
        let error = pairwise_sum(&cells.iter().map(|c| c.error).collect::<Vec<_>>());
        let abs_integral = pairwise_sum(&cells.iter().map(|c| c.abs).collect::<Vec<_>>());
        Integral {
            value,
            error,
            abs_integral,
            evals,
            converged: inner_ok && error <= self.tolerance(value, abs_integral),
        }
    }

    /// `∫_a^b f`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> Integral {
        self.run(a, b, &|x: &[f64; 15]| {
            x.iter()
                .map(|&xi| {
                    let v = f(xi);
                    Sample { value: v, error: 0.0, abs: v.abs(), evals: 1, converged: true }
                })
                .collect()
        })
    }

    /// `∫_a^b g(x) dx` where `g(x)` is itself an integral.
    pub fn integrate_nested(&self, f: impl Fn(f64) -> Integral, a: f64, b: f64) -> Integral {
        self.run(a, b, &|x: &[f64; 15]| x.iter().map(|&xi| to_sample(f(xi))).collect())
    }

    /// As [`integrate_nested`](Self::integrate_nested), evaluating the 15 nodes of
    /// each cell in parallel.
    pub fn integrate_nested_par(&self, f: impl Fn(f64) -> Integral + Sync, a: f64, b: f64) -> Integral {
        self.run(a, b, &|x: &[f64; 15]| x.par_iter().map(|&xi| to_sample(f(xi))).collect())
    }

    /// `∫_{-∞}^{∞} f` via `x = centre + scale · u / (1 - u²)`.
    pub fn integrate_line(&self, f: impl Fn(f64) -> f64, centre: f64, scale: f64) -> Integral {
        self.integrate(
            |u| {
                let d = 1.0 - u * u;
                let x = centre + scale * u / d;
                let v = f(x) * scale * (1.0 + u * u) / (d * d);
                if v.is_finite() { v } else { 0.0 }
            },
            -1.0,
            1.0,
        )
    }

    /// Nested version of [`integrate_line`](Self::integrate_line).
    pub fn integrate_line_nested(&self, f: impl Fn(f64) -> Integral, centre: f64, scale: f64) -> Integral {
        self.integrate_nested(
            |u| {
                let d = 1.0 - u * u;
                let jac = scale * (1.0 + u * u) / (d * d);
                let mut r = f(centre + scale * u / d);
                r.value *= jac;
                r.error *= jac;
                r.abs_integral *= jac;
                r
            },
            -1.0,
            1.0,
        )
    }
}

fn to_sample(r: Integral) -> Sample {
    Sample {
        value: r.value,
        error: r.error,
        abs: r.abs_integral,
        evals: r.evals,
        converged: r.converged,
    }
}

/// Exponent of the graded substitution `x = L u^GRADING` used near singular faces.
pub const GRADING: i32 = 3;

/// Options for integrals over the gap simplex `{a, b, c > 0, a + b + c < t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub rel_tol: f64,
    /// Absolute tolerance of the whole integral; inner levels get scaled shares.
    pub abs_tol: f64,
    pub max_evals: u64,
    pub max_intervals: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { rel_tol: 1e-6, abs_tol: 0.0, max_evals: 10_000_000, max_intervals: 400 }
    }
}

impl SimplexOptions {
    /// Coarse settings used to estimate the scale `∫|f|` before the real run.
    pub fn pilot() -> Self {
        SimplexOptions { rel_tol: 1e-2, abs_tol: 0.0, max_evals: u64::MAX, max_intervals: 6 }
    }

    /// These options with `abs_tol = rel_tol · scale / 8`, unless an absolute
    /// tolerance is already set.
    pub fn with_scale(&self, scale: f64) -> Self {
        if self.abs_tol > 0.0 {
            *self
        } else {
            SimplexOptions { abs_tol: self.rel_tol * scale / 8.0, ..*self }
        }
    }
}

/// Nested adaptive integration of `f(a, b, c)` over the simplex
/// `{a, b, c > 0, a + b + c < t}`, with cubic grading towards each of the
/// faces `a = 0`, `b = 0`, `c = 0`. Faces are never evaluated.
pub fn integrate_gap_simplex(f: impl Fn(f64, f64, f64) -> f64 + Sync, t: f64, opts: &SimplexOptions) -> Integral {
    if !(t > 0.0) {
        return Integral::zero();
    }
    let g = GRADING;
    let gf = g as f64;
    // Inner errors enter the outer level through Jacobians bounded by GRADING·t.
    let share = 1.0 / (8.0 * gf * t);
    let outer = Adaptive { rel_tol: opts.rel_tol, abs_tol: opts.abs_tol, max_intervals: opts.max_intervals };
    let middle = Adaptive { rel_tol: opts.rel_tol / 8.0, abs_tol: opts.abs_tol * share, ..outer };
    let inner = Adaptive { rel_tol: opts.rel_tol / 64.0, abs_tol: opts.abs_tol * share * share, ..outer };
    let mut r = outer.integrate_nested_par(
        |u| {
            let a = t * u.powi(g);
            let ja = gf * t * u.powi(g - 1);
            let ra = t - a;
            let mut mid = middle.integrate_nested(
                |v| {
                    let b = ra * v.powi(g);
                    let jb = gf * ra * v.powi(g - 1);
                    let rb = ra - b;
                    let mut inn = inner.integrate(
                        |w| {
                            let c = rb * w.powi(g);
                            let jc = gf * rb * w.powi(g - 1);
                            f(a, b, c) * jc
                        },
                        0.0,
                        1.0,
                    );
                    scale(&mut inn, jb);
                    inn
                },
                0.0,
                1.0,
            );
            scale(&mut mid, ja);
            mid
        },
        0.0,
        1.0,
    );
    r.converged &= r.evals <= opts.max_evals && r.error <= opts.abs_tol.max(opts.rel_tol * r.value.abs());
    r
}

fn scale(r: &mut Integral, s: f64) {
    r.value *= s;
    r.error *= s.abs();
    r.abs_integral *= s.abs();
}
