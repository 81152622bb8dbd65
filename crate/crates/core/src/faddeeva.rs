//! Faddeeva function `w(z) = exp(-z^2) erfc(-iz)` and the Gaussian-smoothed
//! exponential it produces.
//!
//! Upper half plane: Weideman's rational expansion in `Z = (L + iz)/(L - iz)`.
//! Lower half plane: reflection `w(z) = 2 exp(-z^2) - w(-z)`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

const TERMS: usize = 40;

struct Expansion {
    l: f64,
    coeffs: [f64; TERMS],
}

fn expansion() -> &'static Expansion {
    static EXP: OnceLock<Expansion> = OnceLock::new();
    EXP.get_or_init(|| {
        let n = TERMS;
        let m = 2 * n;
        let m2 = 2 * m;
        let l = (n as f64 / std::f64::consts::SQRT_2).sqrt();
        // samples of exp(-t^2)(L^2 + t^2) on t = L tan(theta/2), stored in fftshift order
        let sample = |k: i64| {
            let theta = k as f64 * PI / m as f64;
            let t = l * (0.5 * theta).tan();
            (-t * t).exp() * (l * l + t * t)
        };
        let shifted: Vec<f64> = (0..m2)
            .map(|j| {
                let j = j as i64;
                let m = m as i64;
                if j < m {
                    sample(j)
                } else if j == m {
                    0.0
                } else {
                    sample(j - 2 * m)
                }
            })
            .collect();
        let mut coeffs = [0.0; TERMS];
        for (idx, c) in coeffs.iter_mut().enumerate() {
            let k = idx + 1;
            let mut acc = 0.0;
            for (j, &f) in shifted.iter().enumerate() {
                let ang = -2.0 * PI * (j * k) as f64 / m2 as f64;
                acc += f * ang.cos();
            }
            *c = acc / m2 as f64;
        }
        Expansion { l, coeffs }
    })
}

fn w_upper(z: Complex64) -> Complex64 {
    let e = expansion();
    let i = Complex64::i();
    let denom = e.l - i * z;
    let big_z = (e.l + i * z) / denom;
    // p(Z) = sum_{k=1}^{N} a_k Z^{k-1}, Horner from the top
    let mut p = Complex64::new(0.0, 0.0);
    for &a in e.coeffs.iter().rev() {
        p = p * big_z + a;
    }
    2.0 * p / (denom * denom) + 1.0 / (PI.sqrt() * denom)
}

/// Faddeeva function on the whole complex plane.
pub fn faddeeva(z: Complex64) -> Complex64 {
    if z.im >= 0.0 {
        w_upper(z)
    } else {
        2.0 * (-z * z).exp() - w_upper(-z)
    }
}

/// Scaled complementary error function `exp(x^2) erfc(x)` for real `x`.
pub fn erfcx(x: f64) -> f64 {
    faddeeva(Complex64::new(0.0, x)).re
}

/// `int_0^inf exp(-rate s) N(t - s; 0, sigma) ds` for `Re(rate) > 0`.
///
/// Equals `0.5 exp(rate^2 sigma^2 / 2 - rate t) erfc((rate sigma^2 - t)/(sigma sqrt 2))`,
/// arranged so that neither factor overflows.
pub fn gauss_exp_convolution(rate: Complex64, t: f64, sigma: f64) -> Complex64 {
    let u = (rate * sigma * sigma - t) / (sigma * std::f64::consts::SQRT_2);
    let iu = Complex64::i() * u;
    let gauss = (-0.5 * (t / sigma).powi(2)).exp();
    if iu.im >= 0.0 {
        0.5 * gauss * w_upper(iu)
    } else {
        (0.5 * rate * rate * sigma * sigma - rate * t).exp() - 0.5 * gauss * w_upper(-iu)
    }
}

/// `int_0^inf s exp(-rate s) N(t - s; 0, sigma) ds`, real rate.
pub fn gauss_exp_moment1(rate: f64, t: f64, sigma: f64) -> f64 {
    let f = gauss_exp_convolution(rate.into(), t, sigma).re;
    (t - rate * sigma * sigma) * f + sigma / (2.0 * PI).sqrt() * (-0.5 * (t / sigma).powi(2)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    // high-precision reference values
    const REFERENCE: &[(f64, f64, f64, f64)] = &[
        (0.0, 0.0, 1.0, 0.0),
        (0.5, 0.5, 0.53315670791217491377, 0.23048823138445840871),
        (1.0, 2.0, 0.21849261527489069682, 0.092997809392601866048),
        (3.0, 0.01, 0.00090883070674158049755, 0.20114646254019640387),
        (4.5, 0.2, 0.0060328266487785170106, 0.12844259882007576271),
        (-2.0, 1.0, 0.1402395813662779437, -0.22221344017989910261),
        (6.0, 0.5, 0.0081248855864625182215, 0.094687914860126239222),
        (10.0, 0.001, 5.7287175028417533439e-6, 0.056705393651106210677),
        (0.1, 5.0, 0.11066424464977836384, 0.0021325263291299994978),
        (20.0, 20.0, 0.014113538470519280935, 0.014095907649337069551),
        (2.5, 0.0, 0.0019304541362277092422, 0.25172302461185758322),
        (0.0, 3.0, 0.17900115118138995042, 0.0),
        (5.5, 0.05, 0.00098303910042146870416, 0.10435799474271843045),
        (1.2, 0.3, 0.27919901804814110714, 0.42566729829387521312),
        (-3.3, 0.7, 0.040143686735310471067, -0.1700057145062769349),
    ];

    #[test]
    fn matches_reference_values() {
        for &(x, y, re, im) in REFERENCE {
            let w = faddeeva(Complex64::new(x, y));
            let exact = Complex64::new(re, im);
            let rel = (w - exact).norm() / exact.norm();
            assert!(rel < 1e-12, "w({x}+{y}i) = {w}, expected {exact}, rel {rel:.2e}");
        }
    }

    #[test]
    fn real_axis_real_part_is_gaussian() {
        for i in 0..60 {
            let x = -6.0 + 0.2 * i as f64;
            let w = faddeeva(Complex64::new(x, 0.0));
            assert!((w.re - (-x * x).exp()).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn lower_half_plane_reflection() {
        let z = Complex64::new(0.7, -0.4);
        let lhs = faddeeva(z);
        let rhs = 2.0 * (-z * z).exp() - faddeeva(-z);
        assert!((lhs - rhs).norm() < 1e-14);
        // conjugate symmetry: w(-conj z) = conj w(z)
        let a = faddeeva(Complex64::new(-1.3, 0.8));
        let b = faddeeva(Complex64::new(1.3, 0.8)).conj();
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn erfcx_small_argument() {
        assert!((erfcx(0.0) - 1.0).abs() < 1e-14);
        // erfcx(1) = e * erfc(1)
        assert!((erfcx(1.0) - 0.42758357615580700442).abs() < 1e-13);
    }

    fn quadrature(rate: Complex64, t: f64, sigma: f64) -> Complex64 {
        // Simpson over s in [0, t + 12 sigma]
        let hi = (t + 12.0 * sigma).max(1e-9);
        let lo = (t - 12.0 * sigma).max(0.0);
        let n = 20000;
        let h = (hi - lo) / n as f64;
        let f = |s: f64| {
            let g = (-0.5 * ((t - s) / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt());
            (-rate * s).exp() * g
        };
        let mut acc = f(lo) + f(hi);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(lo + k as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn convolution_matches_quadrature() {
        let sigma = 53.5;
        for rate in [Complex64::new(1.0 / 320.0, 0.0), Complex64::new(1.0 / 320.0, -0.0088)] {
            for t in [-300.0, -100.0, 0.0, 5.0, 60.0, 400.0, 1500.0] {
                let a = gauss_exp_convolution(rate, t, sigma);
                let b = quadrature(rate, t, sigma);
                assert!((a - b).norm() <= 1e-8 * b.norm(), "t={t} rate={rate}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn first_moment_matches_quadrature() {
        let sigma = 40.0;
        let rate = 1.0 / 250.0;
        for t in [-150.0f64, 0.0, 100.0, 900.0] {
            let hi = t + 12.0 * sigma;
            let lo = (t - 12.0 * sigma).max(0.0);
            let n = 20000;
            let h = (hi - lo) / n as f64;
            let f =
                |s: f64| s * (-rate * s).exp() * (-0.5 * ((t - s) / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt());
            let mut acc = f(lo) + f(hi);
            for k in 1..n {
                acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(lo + k as f64 * h);
            }
            let q = acc * h / 3.0;
            assert!((gauss_exp_moment1(rate, t, sigma) - q).abs() < 1e-8 * q.abs());
        }
    }
}
