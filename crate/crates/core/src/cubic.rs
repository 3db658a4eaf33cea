//! Real roots of polynomials up to degree three.
//!
//! The cubic path computes the eigenvalues of a scaled companion matrix and
//! polishes each real root with Newton's method. The discriminant decides
//! how many of the eigenvalues count as real.

use nalgebra::Matrix3;

/// Real roots of `c[0]·x³ + c[1]·x² + c[2]·x + c[3]`, ascending.
///
/// Leading zero coefficients drop the degree. A polynomial that is
/// identically zero has no isolated roots and yields an empty list.
pub fn real_roots(c: [f64; 4]) -> Vec<f64> {
    let mut roots = if c[0] != 0.0 {
        cubic(c)
    } else if c[1] != 0.0 {
        quadratic(c[1], c[2], c[3])
    } else if c[2] != 0.0 {
        vec![-c[3] / c[2]]
    } else {
        Vec::new()
    };
    roots.sort_by(f64::total_cmp);
    roots
}

/// Evaluate the cubic and its derivative with Horner's scheme.
pub fn eval(c: [f64; 4], x: f64) -> (f64, f64) {
    let f = ((c[0] * x + c[1]) * x + c[2]) * x + c[3];
    let df = (3.0 * c[0] * x + 2.0 * c[1]) * x + c[2];
    (f, df)
}

fn quadratic(a: f64, b: f64, c: f64) -> Vec<f64> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    // Avoid cancellation by computing the larger-magnitude root first.
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0, 0.0];
    }
    vec![q / a, c / q]
}

fn cubic(c: [f64; 4]) -> Vec<f64> {
    let (a2, a1, a0) = (c[1] / c[0], c[2] / c[0], c[3] / c[0]);
    // Rescale x = s·u so the monic coefficients in u are of order one.
    let s = [a2.abs(), a1.abs().sqrt(), a0.abs().cbrt()]
        .into_iter()
        .fold(0.0, f64::max);
    if s == 0.0 {
        return vec![0.0; 3];
    }
    let (b2, b1, b0) = (a2 / s, a1 / (s * s), a0 / (s * s * s));
    let companion = Matrix3::new(-b2, -b1, -b0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    let eig = companion.complex_eigenvalues();

    // Discriminant of u³ + b2·u² + b1·u + b0.
    let disc = 18.0 * b2 * b1 * b0 - 4.0 * b2.powi(3) * b0 + b2 * b2 * b1 * b1
        - 4.0 * b1.powi(3)
        - 27.0 * b0 * b0;

    let mut us: Vec<f64> = if disc >= 0.0 {
        eig.iter().map(|z| z.re).collect()
    } else {
        let best = eig
            .iter()
            .min_by(|a, b| a.im.abs().total_cmp(&b.im.abs()))
            .expect("three eigenvalues");
        vec![best.re]
    };
    for u in &mut us {
        *u = polish([1.0, b2, b1, b0], *u);
    }
    us.into_iter().map(|u| polish(c, u * s)).collect()
}

fn polish(c: [f64; 4], mut x: f64) -> f64 {
    let (mut f, _) = eval(c, x);
    for _ in 0..4 {
        let (_, df) = eval(c, x);
        if df == 0.0 || !df.is_finite() {
            break;
        }
        let next = x - f / df;
        let (fn_, _) = eval(c, next);
        if !(fn_.abs() < f.abs()) {
            break;
        }
        x = next;
        f = fn_;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn from_roots(r: [f64; 3], lead: f64) -> [f64; 4] {
        let [a, b, c] = r;
        [
            lead,
            -lead * (a + b + c),
            lead * (a * b + b * c + a * c),
            -lead * a * b * c,
        ]
    }

    #[test]
    fn three_distinct_roots() {
        let r = real_roots(from_roots([-2.0, 0.5, 3.0], 2.0));
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([-2.0, 0.5, 3.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn single_real_root() {
        // (x - 1)(x² + 1)
        let r = real_roots([1.0, -1.0, 1.0, -1.0]);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn triple_root_is_located() {
        let r = real_roots(from_roots([1.5, 1.5, 1.5], 1.0));
        assert!(!r.is_empty());
        for x in r {
            assert!((x - 1.5).abs() < 1e-4, "{x}");
        }
    }

    #[test]
    fn degenerate_degrees() {
        assert_eq!(real_roots([0.0, 0.0, 2.0, -4.0]), vec![2.0]);
        let q = real_roots([0.0, 1.0, -3.0, 2.0]);
        assert_eq!(q.len(), 2);
        assert!((q[0] - 1.0).abs() < 1e-15 && (q[1] - 2.0).abs() < 1e-15);
        assert!(real_roots([0.0, 1.0, 0.0, 1.0]).is_empty());
        assert!(real_roots([0.0; 4]).is_empty());
    }

    #[test]
    fn badly_scaled_coefficients() {
        // Coefficient magnitudes similar to the fixed-point cubic.
        let c = [1.7e14, 3.4e21, 2.3e28, -1.0e27];
        let r = real_roots(c);
        assert_eq!(r.len(), 1);
        let (f, df) = eval(c, r[0]);
        assert!(f.abs() <= 1e-9 * (df.abs() * r[0].abs() + c[3].abs()));
    }

    proptest! {
        #[test]
        fn recovers_planted_roots(a in -1e3f64..1e3, b in -1e3f64..1e3, c in -1e3f64..1e3, lead in 0.1f64..10.0) {
            let mut want = [a, b, c];
            want.sort_by(f64::total_cmp);
            prop_assume!(want[1] - want[0] > 1e-2 && want[2] - want[1] > 1e-2);
            let got = real_roots(from_roots(want, lead));
            prop_assert_eq!(got.len(), 3);
            let scale = want.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            for (g, w) in got.iter().zip(want) {
                prop_assert!((g - w).abs() < 1e-8 * scale, "{} vs {}", g, w);
            }
        }

        #[test]
        fn root_count_is_one_or_three(c in prop::array::uniform4(-1e6f64..1e6)) {
            prop_assume!(c[0].abs() > 1e-3);
            let n = real_roots(c).len();
            prop_assert!(n == 1 || n == 3);
        }
    }
}
