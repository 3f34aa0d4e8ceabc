//! Real roots of a cubic on an interval, by splitting at the derivative's
//! critical points and running safeguarded Newton on each monotonic piece.

const ROOT_TOL: f64 = 1e-12;

/// Roots of a*t^3 + b*t^2 + c*t + d on [t0, t1], sorted ascending.
///
/// Degenerate leading coefficients fall back to the quadratic and linear
/// formulas. After the first cubic root is isolated the polynomial is
/// deflated and the remaining roots come from the quadratic formula.
pub fn solve_cubic(a: f64, b: f64, c: f64, d: f64, t0: f64, t1: f64) -> Vec<f64> {
    debug_assert!(t0 <= t1);
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    let mut roots = if a.abs() <= 1e-14 * scale {
        solve_quadratic(b, c, d, t0, t1)
    } else {
        solve_cubic_strict(a, b, c, d, t0, t1)
    };
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots.dedup_by(|x, y| (*x - *y).abs() <= 10.0 * ROOT_TOL);
    roots
}

fn solve_linear(c: f64, d: f64, t0: f64, t1: f64) -> Vec<f64> {
    if c == 0.0 {
        return Vec::new();
    }
    let r = -d / c;
    if r >= t0 && r <= t1 {
        vec![r]
    } else {
        Vec::new()
    }
}

fn solve_quadratic(b: f64, c: f64, d: f64, t0: f64, t1: f64) -> Vec<f64> {
    let scale = b.abs().max(c.abs()).max(d.abs());
    if scale == 0.0 || b.abs() <= 1e-14 * scale {
        return solve_linear(c, d, t0, t1);
    }
    let disc = c * c - 4.0 * b * d;
    if disc < 0.0 {
        return Vec::new();
    }
    // Numerically stable form: avoid cancellation in -c +- sqrt(disc).
    let q = -0.5 * (c + c.signum() * disc.sqrt());
    let mut out = Vec::new();
    for r in [q / b, if q != 0.0 { d / q } else { -c / b - q / b }] {
        if r.is_finite() && r >= t0 && r <= t1 {
            out.push(r);
        }
    }
    out
}

fn eval(a: f64, b: f64, c: f64, d: f64, t: f64) -> f64 {
    ((a * t + b) * t + c) * t + d
}

fn eval_d(a: f64, b: f64, c: f64, t: f64) -> f64 {
    (3.0 * a * t + 2.0 * b) * t + c
}

/// Newton iteration safeguarded by bisection on a monotonic bracket where
/// the polynomial changes sign. Returns the root.
fn newton_bisect(a: f64, b: f64, c: f64, d: f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = eval(a, b, c, d, lo);
    if flo == 0.0 {
        return lo;
    }
    let fhi = eval(a, b, c, d, hi);
    if fhi == 0.0 {
        return hi;
    }
    debug_assert!(flo * fhi < 0.0);
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = eval(a, b, c, d, t);
        if f == 0.0 {
            return t;
        }
        if f * flo < 0.0 {
            hi = t;
        } else {
            lo = t;
            flo = f;
        }
        if hi - lo <= ROOT_TOL {
            break;
        }
        let df = eval_d(a, b, c, t);
        let mut next = if df != 0.0 { t - f / df } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= ROOT_TOL {
            return next;
        }
        t = next;
    }
    0.5 * (lo + hi)
}

fn solve_cubic_strict(a: f64, b: f64, c: f64, d: f64, t0: f64, t1: f64) -> Vec<f64> {
    // Split [t0, t1] at the critical points of the cubic so each piece is
    // monotonic and holds at most one root.
    let mut cuts = vec![t0];
    let disc = 4.0 * b * b - 12.0 * a * c;
    if disc > 0.0 {
        let s = disc.sqrt();
        let mut crit = [(-2.0 * b - s) / (6.0 * a), (-2.0 * b + s) / (6.0 * a)];
        if crit[0] > crit[1] {
            crit.swap(0, 1);
        }
        for t in crit {
            if t > t0 && t < t1 {
                cuts.push(t);
            }
        }
    }
    cuts.push(t1);

    // First root on the interval.
    let mut first = None;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let flo = eval(a, b, c, d, lo);
        let fhi = eval(a, b, c, d, hi);
        if flo == 0.0 {
            first = Some(lo);
        } else if fhi == 0.0 {
            first = Some(hi);
        } else if flo * fhi < 0.0 {
            first = Some(newton_bisect(a, b, c, d, lo, hi));
        }
        if first.is_some() {
            break;
        }
    }
    let Some(r0) = first else {
        return Vec::new();
    };

    // Deflate by (t - r0) and solve the quadratic remainder.
    let qa = a;
    let qb = b + qa * r0;
    let qc = c + qb * r0;
    let mut out = vec![r0];
    for r in solve_quadratic(qa, qb, qc, t0, t1) {
        out.push(r);
    }
    out
}
