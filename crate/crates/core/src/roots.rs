//! Closed-form real-root finding for polynomials of degree at most four,
//! restricted to a time interval.
//!
//! The quartic case goes through the resolvent cubic (Ferrari), followed by
//! one Newton step per root on the original polynomial to absorb the
//! floating-point error of the radical cascade.

use arrayvec::ArrayVec;

/// Relative threshold below which a leading coefficient is demoted to zero.
pub const DEGENERACY_REL_EPS: f64 = 1e-12;

/// Relative residual bound a polished root must satisfy to be reported.
pub const ROOT_RESIDUAL_EPS: f64 = 1e-9;

/// Coefficients of a real polynomial of degree at most four; `c[k]` multiplies `t^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyCoeffs {
    pub c: [f64; 5],
}

/// Real roots of a polynomial inside a closed interval.
#[derive(Debug, Clone, PartialEq)]
pub enum IntervalRoots {
    /// The polynomial is identically zero: every point of the interval is a root.
    EverywhereZero,
    /// Sorted roots inside the interval, double roots reported once.
    Roots(ArrayVec<f64, 4>),
}

impl IntervalRoots {
    /// Roots as a slice, treating the everywhere-zero case as "no isolated roots".
    pub fn as_slice(&self) -> &[f64] {
        match self {
            IntervalRoots::EverywhereZero => &[],
            IntervalRoots::Roots(r) => r.as_slice(),
        }
    }
}

impl PolyCoeffs {
    pub fn new(c: [f64; 5]) -> Self {
        Self { c }
    }

    /// Cubic with `c[k]` multiplying `t^k`.
    pub fn cubic(c0: f64, c1: f64, c2: f64, c3: f64) -> Self {
        Self::new([c0, c1, c2, c3, 0.0])
    }

    pub fn eval(&self, t: f64) -> f64 {
        let c = &self.c;
        (((c[4] * t + c[3]) * t + c[2]) * t + c[1]) * t + c[0]
    }

    pub fn eval_derivative(&self, t: f64) -> f64 {
        let c = &self.c;
        ((4.0 * c[4] * t + 3.0 * c[3]) * t + 2.0 * c[2]) * t + c[1]
    }

    fn max_abs_coeff(&self) -> f64 {
        self.c.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    /// Largest `k` with `|c[k]|` above the degeneracy threshold, or `None` for
    /// the identically-zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        let max = self.max_abs_coeff();
        if max == 0.0 {
            return None;
        }
        let eps = DEGENERACY_REL_EPS * max;
        (0..5).rev().find(|&k| self.c[k].abs() > eps)
    }

    /// Magnitude scale of the polynomial over `[t_lo, t_hi]`, used to make the
    /// root residual test relative.
    fn scale_over(&self, t_lo: f64, t_hi: f64) -> f64 {
        let m = t_lo.abs().max(t_hi.abs()).max(1.0);
        let mut scale = 0.0f64;
        let mut mk = 1.0;
        for k in 0..5 {
            scale = scale.max(self.c[k].abs() * mk);
            mk *= m;
        }
        scale
    }
}

/// All real roots of `p` in `[t_lo, t_hi]`, sorted ascending and deduplicated.
///
/// Double roots are reported once. A degree-zero nonzero polynomial has no
/// roots; the identically-zero polynomial is reported as
/// [`IntervalRoots::EverywhereZero`], never as a root list.
pub fn real_roots_in_interval(p: &PolyCoeffs, t_lo: f64, t_hi: f64) -> IntervalRoots {
    assert!(t_lo <= t_hi, "invalid interval [{t_lo}, {t_hi}]");
    let degree = match p.degree() {
        None => return IntervalRoots::EverywhereZero,
        Some(d) => d,
    };

    let mut candidates: ArrayVec<f64, 4> = ArrayVec::new();
    match degree {
        0 => {}
        1 => candidates.push(-p.c[0] / p.c[1]),
        2 => quadratic_roots(p.c[2], p.c[1], p.c[0], &mut candidates),
        3 => cubic_roots(p.c[3], p.c[2], p.c[1], p.c[0], &mut candidates),
        4 => quartic_roots(p.c[4], p.c[3], p.c[2], p.c[1], p.c[0], &mut candidates),
        _ => unreachable!(),
    }

    let span = t_hi - t_lo;
    let boundary_tol = 1e-9 * (1.0 + span);
    let scale = p.scale_over(t_lo, t_hi);

    let mut roots: ArrayVec<f64, 4> = ArrayVec::new();
    for &root in &candidates {
        if !root.is_finite() {
            continue;
        }
        let polished = newton_polish(p, root);
        if polished < t_lo - boundary_tol || polished > t_hi + boundary_tol {
            continue;
        }
        let clamped = polished.clamp(t_lo, t_hi);
        if p.eval(clamped).abs() <= ROOT_RESIDUAL_EPS * scale && !roots.is_full() {
            roots.push(clamped);
        }
    }

    roots.sort_unstable_by(f64::total_cmp);
    let dedup_tol = 1e-7 * (1.0 + span);
    let mut unique: ArrayVec<f64, 4> = ArrayVec::new();
    for &r in &roots {
        match unique.last() {
            Some(&prev) if (r - prev).abs() <= dedup_tol => {}
            _ => unique.push(r),
        }
    }
    IntervalRoots::Roots(unique)
}

/// One guarded Newton step toward the nearest root of `p`.
fn newton_polish(p: &PolyCoeffs, t: f64) -> f64 {
    let f = p.eval(t);
    let df = p.eval_derivative(t);
    if df == 0.0 {
        return t;
    }
    let step = f / df;
    if !step.is_finite() {
        return t;
    }
    let polished = t - step;
    if p.eval(polished).abs() <= f.abs() {
        polished
    } else {
        t
    }
}

/// Real roots of `a t^2 + b t + c`, numerically stable form.
fn quadratic_roots(a: f64, b: f64, c: f64, out: &mut ArrayVec<f64, 4>) {
    let disc = b * b - 4.0 * a * c;
    // A slightly negative discriminant from rounding still counts as a double root.
    let disc_tol = 1e-12 * (b * b + (4.0 * a * c).abs());
    if disc < -disc_tol {
        return;
    }
    let sq = disc.max(0.0).sqrt();
    let q = -0.5 * (b + sq.copysign(if b == 0.0 { 1.0 } else { b }));
    if q != 0.0 {
        out.push(q / a);
        out.push(c / q);
    } else {
        // b == 0 and c ~ 0: double root at the origin of the quadratic.
        out.push(0.0);
    }
}

/// Real roots of the monic depressed cubic `y^3 + p y + q`.
fn depressed_cubic_roots(p: f64, q: f64, out: &mut ArrayVec<f64, 4>) {
    if p == 0.0 && q == 0.0 {
        out.push(0.0);
        return;
    }
    let disc = -4.0 * p * p * p - 27.0 * q * q;
    if disc > 0.0 {
        // Three distinct real roots: trigonometric form (requires p < 0 here).
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        for k in 0..3 {
            out.push(m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos());
        }
    } else {
        // One real root (plus a possible double root when disc ~ 0): Cardano.
        let half_q = 0.5 * q;
        let inner = (half_q * half_q + p * p * p / 27.0).max(0.0).sqrt();
        let u = (-half_q + inner).cbrt();
        let v = (-half_q - inner).cbrt();
        out.push(u + v);
        if disc.abs() <= 1e-12 * (4.0 * p * p * p).abs().max(27.0 * q * q) {
            // Near-zero discriminant: the double root is at -(u+v)/2.
            out.push(-0.5 * (u + v));
        }
    }
}

/// Real roots of `a t^3 + b t^2 + c t + d`.
fn cubic_roots(a: f64, b: f64, c: f64, d: f64, out: &mut ArrayVec<f64, 4>) {
    let b = b / a;
    let c = c / a;
    let d = d / a;
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let mut depressed: ArrayVec<f64, 4> = ArrayVec::new();
    depressed_cubic_roots(p, q, &mut depressed);
    for y in depressed {
        if !out.is_full() {
            out.push(y - shift);
        }
    }
}

/// Real roots of `e t^4 + a t^3 + b t^2 + c t + d` via the resolvent cubic.
fn quartic_roots(e: f64, a: f64, b: f64, c: f64, d: f64, out: &mut ArrayVec<f64, 4>) {
    let a = a / e;
    let b = b / e;
    let c = c / e;
    let d = d / e;
    let shift = a / 4.0;
    // Depressed form y^4 + p y^2 + q y + r with t = y - a/4.
    let a2 = a * a;
    let p = b - 3.0 * a2 / 8.0;
    let q = c - 0.5 * a * b + a2 * a / 8.0;
    let r = d - 0.25 * a * c + a2 * b / 16.0 - 3.0 * a2 * a2 / 256.0;

    let q_scale = c.abs() + (0.5 * a * b).abs() + (a2 * a / 8.0).abs();
    if q.abs() <= 1e-12 * q_scale.max(1e-300) {
        // Biquadratic: z^2 + p z + r with z = y^2.
        let mut zs: ArrayVec<f64, 4> = ArrayVec::new();
        quadratic_roots(1.0, p, r, &mut zs);
        for z in zs {
            let z_tol = 1e-12 * (p.abs() + r.abs().sqrt()).max(1.0);
            if z >= -z_tol {
                let y = z.max(0.0).sqrt();
                push_capped(out, y - shift);
                if y > 0.0 {
                    push_capped(out, -y - shift);
                }
            }
        }
        return;
    }

    // Resolvent cubic 8 m^3 + 8 p m^2 + (2 p^2 - 8 r) m - q^2 = 0; its largest
    // real root is positive because the value at m = 0 is -q^2 < 0.
    let mut ms: ArrayVec<f64, 4> = ArrayVec::new();
    cubic_roots(8.0, 8.0 * p, 2.0 * p * p - 8.0 * r, -q * q, &mut ms);
    let m = ms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(m > 0.0) {
        return;
    }
    let s = (2.0 * m).sqrt();
    let half = 0.5 * p + m;
    let tail = q / (2.0 * s);
    let mut ys: ArrayVec<f64, 4> = ArrayVec::new();
    quadratic_roots(1.0, -s, half + tail, &mut ys);
    quadratic_roots(1.0, s, half - tail, &mut ys);
    for y in ys {
        push_capped(out, y - shift);
    }
}

fn push_capped(out: &mut ArrayVec<f64, 4>, v: f64) {
    if !out.is_full() {
        out.push(v);
    }
}
