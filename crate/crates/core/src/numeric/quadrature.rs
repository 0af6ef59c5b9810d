use crate::error::{Error, Result};

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

fn kronrod<F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut gauss = fc * WG[3];
    let mut kron = fc * WGK[7];
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        let fsum = f(center - dx)? + f(center + dx)?;
        kron += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    let value = kron * half;
    let err = ((kron - gauss) * half).abs();
    if !value.is_finite() {
        return Err(Error::NonFiniteEvaluation {
            what: "quadrature integrand",
            at: vec![a, b],
        });
    }
    Ok((value, err))
}

/// Globally adaptive G7–K15 quadrature of `f` over `[a, b]`: the interval
/// with the largest error estimate is bisected until the summed estimate
/// falls below `abs_tol`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, intervals: 0 });
    }
    let (value, err) = kronrod(&mut f, a, b)?;
    let mut parts = vec![(a, b, value, err)];
    loop {
        let total_err: f64 = parts.iter().map(|p| p.3).sum();
        if total_err <= opts.abs_tol {
            break;
        }
        if parts.len() >= opts.max_intervals {
            return Err(Error::QuadratureFailure {
                lo: a,
                hi: b,
                estimate: total_err,
            });
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("non-empty");
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::QuadratureFailure {
                lo: a,
                hi: b,
                estimate: total_err,
            });
        }
        let (v1, e1) = kronrod(&mut f, lo, mid)?;
        let (v2, e2) = kronrod(&mut f, mid, hi)?;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    // Sum in interval order so results do not depend on the split history.
    parts.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(QuadResult {
        value: parts.iter().map(|p| p.2).sum(),
        error: parts.iter().map(|p| p.3).sum(),
        intervals: parts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| Ok(x * x), 1.5, 3.0, QuadOptions::default()).unwrap();
        assert!((r.value - (27.0 - 3.375) / 3.0).abs() < 1e-13);
    }

    #[test]
    fn sqrt_singularity_needs_refinement() {
        let r = integrate(|x: f64| Ok(x.sqrt()), 0.0, 1.0, QuadOptions::default()).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-10);
        assert!(r.intervals > 1);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let opts = QuadOptions { abs_tol: 1e-14, max_intervals: 3 };
        let err = integrate(|x: f64| Ok(x.sqrt()), 0.0, 1.0, opts).unwrap_err();
        assert!(matches!(err, Error::QuadratureFailure { .. }));
    }
}
