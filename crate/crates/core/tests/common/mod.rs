//! Test-only reference computations, independent of the crate's closed forms.

#![allow(dead_code)]

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for Kronrod nodes 1, 3, 5 and the center.
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn kronrod_panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = KRONROD_WEIGHTS[7] * fc;
    let mut g = GAUSS_WEIGHTS[3] * fc;
    for i in 0..7 {
        let pair = f(c - h * KRONROD_NODES[i]) + f(c + h * KRONROD_NODES[i]);
        k += KRONROD_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            g += GAUSS_WEIGHTS[i / 2] * pair;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive 7/15-point Gauss-Kronrod integration to absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn go(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = kronrod_panel(f, a, b);
        if err <= tol || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        go(f, a, m, tol / 2.0, depth - 1) + go(f, m, b, tol / 2.0, depth - 1)
    }
    go(f, a, b, tol, 40)
}

/// KL between two normals by integrating `p ln(p / q)` over `mean_p +- 12 sd_p`.
pub fn kl_gaussian_quadrature(m1: f64, v1: f64, m2: f64, v2: f64) -> f64 {
    let s1 = v1.sqrt();
    let norm = 1.0 / (2.0 * std::f64::consts::PI * v1).sqrt();
    let f = move |x: f64| {
        let z1 = (x - m1) * (x - m1) / (2.0 * v1);
        let z2 = (x - m2) * (x - m2) / (2.0 * v2);
        let log_ratio = z2 - z1 - 0.5 * (v1 / v2).ln();
        norm * (-z1).exp() * log_ratio
    };
    integrate(&f, m1 - 12.0 * s1, m1 + 12.0 * s1, 1e-9)
}

/// Mean and population variance by a single compensated pass, kept apart
/// from the crate's two-pass routine.
pub fn welford(xs: &[f64]) -> (f64, f64) {
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, &x) in xs.iter().enumerate() {
        let d = x - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (x - mean);
    }
    (mean, m2 / xs.len() as f64)
}

#[test]
fn quadrature_integrates_known_functions() {
    let poly = integrate(&|x| 3.0 * x * x - x + 2.0, -1.0, 2.0, 1e-12);
    assert!((poly - (9.0 - 1.5 + 6.0)).abs() < 1e-12);
    let density = integrate(
        &|x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
        -12.0,
        12.0,
        1e-12,
    );
    assert!((density - 1.0).abs() < 1e-12);
}
