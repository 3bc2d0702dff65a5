//! Fixed 16-point Gauss–Legendre quadrature.
//!
//! Exact for polynomials up to degree 31. All backbone integrals in this crate
//! have smooth integrands of bounded phase, so one fixed rule keeps the cost
//! constant per evaluation.

/// Positive abscissae of the 16-point rule on `[-1, 1]`.
const NODES: [f64; 8] = [
    0.095_012_509_837_637_440_185_319_3,
    0.281_603_550_779_258_913_230_460_5,
    0.458_016_777_657_227_386_342_419_4,
    0.617_876_244_402_643_748_446_671_8,
    0.755_404_408_355_003_033_895_101_2,
    0.865_631_202_387_831_743_880_467_9,
    0.944_575_023_073_232_576_077_988_4,
    0.989_400_934_991_649_932_596_154_2,
];

const WEIGHTS: [f64; 8] = [
    0.189_450_610_455_068_496_285_396_7,
    0.182_603_415_044_923_588_866_763_7,
    0.169_156_519_395_002_538_189_312_1,
    0.149_595_988_816_576_732_081_501_7,
    0.124_628_971_255_533_872_052_476_3,
    0.095_158_511_682_492_784_809_925_1,
    0.062_253_523_938_647_892_862_843_8,
    0.027_152_459_411_754_094_851_780_6,
];

pub const ORDER: usize = 16;

/// Nodes and weights of the rule mapped onto `[a, b]`.
pub fn points(a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    NODES
        .iter()
        .zip(WEIGHTS.iter())
        .flat_map(move |(&x, &w)| [(mid - half * x, half * w), (mid + half * x, half * w)])
}

/// Integrates a scalar function over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    points(a, b).map(|(x, w)| w * f(x)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::vec::Vec;

    // Newton iteration on the three-term Legendre recurrence, independent of the table.
    fn legendre_rule(n: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for i in 1..=n {
            let mut x = (core::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
        }
        out
    }

    #[test]
    fn table_matches_recomputed_rule() {
        let rule = legendre_rule(16);
        for (&x, &w) in NODES.iter().zip(WEIGHTS.iter()) {
            let (_, wr) = rule
                .iter()
                .find(|(xr, _)| (xr - x).abs() < 1e-14)
                .expect("node present in recomputed rule");
            assert!((wr - w).abs() < 1e-14, "weight {w} vs {wr}");
        }
    }

    #[test]
    fn exact_for_degree_31() {
        for deg in 0..=31 {
            let got = integrate(0.0, 1.0, |x| x.powi(deg));
            let exact = 1.0 / (deg as f64 + 1.0);
            assert!((got - exact).abs() < 1e-14, "degree {deg}: {got} vs {exact}");
        }
        let got = integrate(-2.0, 0.5, |x| 3.0 * x * x - x);
        assert!((got - (0.125 + 8.0 - (0.125 - 2.0))).abs() < 1e-13);
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let total: f64 = points(0.0, 0.7).map(|(_, w)| w).sum();
        assert!((total - 0.7).abs() < 1e-15);
        assert_eq!(points(0.0, 1.0).count(), ORDER);
    }
}
