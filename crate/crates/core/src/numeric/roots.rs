use crate::error::{Error, Result};

/// Final bracket returned by [`bisect`]. The root lies in `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

impl Bracket {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Bisection on `[lo, hi]` until the bracket is no wider than `width`.
///
/// An exact zero at either end point collapses the bracket onto it.
pub fn bisect<F>(what: &'static str, mut f: F, lo: f64, hi: f64, width: f64) -> Result<Bracket>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        return Ok(Bracket { lo: a, hi: a, iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(Bracket { lo: b, hi: b, iterations: 0 });
    }
    if fa.signum() == fb.signum() {
        return Err(Error::RootNotBracketed {
            what,
            lo: a,
            hi: b,
            f_lo: fa,
            f_hi: fb,
        });
    }
    let mut iterations = 0;
    while b - a > width {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m)?;
        iterations += 1;
        if fm == 0.0 {
            return Ok(Bracket { lo: m, hi: m, iterations });
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(Bracket { lo: a, hi: b, iterations })
}

/// Golden-section search for the maximizer of a unimodal `f` on `[lo, hi]`.
/// End points are compared against the interior optimum so that boundary
/// maximizers are returned exactly.
pub fn golden_max<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        }
    }
    let x = 0.5 * (a + b);
    let mut best = (x, f(x)?);
    for edge in [lo, hi] {
        let fe = f(edge)?;
        if fe > best.1 {
            best = (edge, fe);
        }
    }
    Ok(best.0)
}
