//! Bounded scalar maximisation.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximiser of a unimodal `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol`; returns `(x, f(x))`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
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
    let x = 0.5 * (a + b);
    // The endpoints are never evaluated by the interior probes.
    [(x, f(x)), (lo, f(lo)), (hi, f(hi))]
        .into_iter()
        .fold((x, f64::NEG_INFINITY), |best, cand| {
            if cand.1 > best.1 {
                cand
            } else {
                best
            }
        })
}

/// Argmax over `points` evenly spaced samples of `[lo, hi]` (inclusive).
pub fn grid_argmax<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    assert!(points >= 2, "grid needs at least two points");
    let step = (hi - lo) / (points - 1) as f64;
    (0..points)
        .map(|i| {
            let x = lo + step * i as f64;
            (x, f(x))
        })
        .fold((lo, f64::NEG_INFINITY), |best, cand| {
            if cand.1 > best.1 {
                cand
            } else {
                best
            }
        })
}
