//! Scalar search helpers used by the exponent calculator.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Maximizes a unimodal `f` on `[lo, hi]` by golden-section search until the
/// bracket is narrower than `tol`. The endpoints are compared against the
/// interior estimate, so maxima on the boundary are returned exactly.
pub fn golden_section_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    debug_assert!(lo <= hi && tol > 0.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    [(mid, f(mid)), (lo, f(lo)), (hi, f(hi))].into_iter().fold((mid, f64::NEG_INFINITY), |best, cand| {
        if cand.1 > best.1 {
            cand
        } else {
            best
        }
    })
}

/// Locates the boundary of `{x : inside(x)}` on `[lo, hi]`, assuming
/// `inside(lo)` holds, `inside(hi)` fails and the set is an interval starting
/// at `lo`. Returns the midpoint of the final bracket of width `<= tol`.
pub fn bisect_boundary(inside: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
