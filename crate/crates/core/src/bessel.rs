//! Bessel functions of the first and second kind, integer order.
//!
//! `J_n` comes from Miller's downward recurrence normalised by
//! `J_0 + 2 Σ J_2k = 1`. `Y_0`, `Y_1` come from Neumann series in the `J_k`
//! for moderate arguments and from the Hankel asymptotic expansion for large
//! ones; higher orders follow by upward recurrence, which is stable for `Y`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Above this argument Y_0, Y_1 use the asymptotic expansion.
const ASYMPTOTIC_FROM: f64 = 25.0;

/// `J_0(x) ..= J_nmax(x)` for `x ≥ 0`.
pub fn bessel_j_all(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let x = x.abs();
    let top = (nmax as f64).max(x);
    let mut m = (top + 20.0 + (40.0 * top).sqrt()) as usize;
    m += m % 2;
    let mut j = vec![0.0; m + 2];
    j[m] = 1e-30;
    let mut norm = 0.0;
    for k in (1..=m).rev() {
        j[k - 1] = 2.0 * k as f64 / x * j[k] - j[k + 1];
        if (k - 1) % 2 == 0 && k > 1 {
            norm += 2.0 * j[k - 1];
        }
        if j[k - 1].abs() > 1e250 {
            for v in j.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
            norm *= 1e-250;
        }
    }
    norm += j[0];
    for (o, v) in out.iter_mut().zip(&j) {
        *o = v / norm;
    }
    out
}

pub fn bessel_j(n: usize, x: f64) -> f64 {
    bessel_j_all(n, x)[n]
}

/// Hankel asymptotic expansion of `(J_n, Y_n)` for large `x`.
pub fn hankel_asymptotic(n: usize, x: f64) -> (f64, f64) {
    let mu = 4.0 * (n * n) as f64;
    let (mut p, mut q) = (1.0, 0.0);
    let mut term = 1.0_f64;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() > prev || term.abs() < 1e-17 {
            break;
        }
        prev = term.abs();
        // a_k / x^k with alternating signs on the even and odd subsequences.
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
    }
    let chi = x - (n as f64 * FRAC_PI_2 + FRAC_PI_4);
    let s = (2.0 / (PI * x)).sqrt();
    (s * (p * chi.cos() - q * chi.sin()), s * (p * chi.sin() + q * chi.cos()))
}

/// `(Y_0, Y_1)` from Neumann series over `J_k`.
fn y01_neumann(x: f64) -> (f64, f64) {
    let kmax = (x + 30.0 + (40.0 * x).sqrt()) as usize;
    let j = bessel_j_all(2 * kmax + 2, x);
    let lg = (x / 2.0).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    for k in 1..=kmax {
        let kf = k as f64;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * j[2 * k] / kf;
        s1 -= sign * (2.0 * kf + 1.0) / (kf * (kf + 1.0)) * j[2 * k + 1];
    }
    let y0 = 2.0 / PI * (lg * j[0] - 2.0 * s0);
    let y1 = 2.0 / PI * (lg * j[1] - j[0] / x - j[1] + s1);
    (y0, y1)
}

fn y01(x: f64) -> (f64, f64) {
    if x > ASYMPTOTIC_FROM {
        (hankel_asymptotic(0, x).1, hankel_asymptotic(1, x).1)
    } else {
        y01_neumann(x)
    }
}

/// `Y_0(x) ..= Y_nmax(x)` for `x > 0`.
pub fn bessel_y_all(nmax: usize, x: f64) -> Result<Vec<f64>> {
    if !(x > 0.0) {
        return Err(Error::param(format!("Y_n needs x > 0, got {x}")));
    }
    let (y0, y1) = y01(x);
    let mut y = vec![y0, y1];
    for k in 1..nmax {
        let next = 2.0 * k as f64 / x * y[k] - y[k - 1];
        y.push(next);
    }
    y.truncate(nmax + 1);
    Ok(y)
}

/// `(J_n(x), Y_n(x))`.
pub fn bessel_jy(n: usize, x: f64) -> Result<(f64, f64)> {
    let y = bessel_y_all(n, x)?;
    Ok((bessel_j(n, x), y[n]))
}

/// `(J_n, Y_n, J_n', Y_n')` at `x > 0`.
pub fn bessel_jy_with_derivatives(n: usize, x: f64) -> Result<(f64, f64, f64, f64)> {
    let j = bessel_j_all(n + 1, x);
    let y = bessel_y_all(n + 1, x)?;
    let (dj, dy) = if n == 0 {
        (-j[1], -y[1])
    } else {
        ((j[n - 1] - j[n + 1]) / 2.0, (y[n - 1] - y[n + 1]) / 2.0)
    };
    Ok((j[n], y[n], dj, dy))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from an established special-function library.
    const TABLE: [(usize, f64, f64, f64); 14] = [
        (0, 0.5, 0.938469807240813, -0.44451873350670656),
        (0, 2.0, 0.22389077914123562, 0.5103756726497453),
        (0, 10.0, -0.24593576445134832, 0.05567116728359934),
        (0, 35.0, -0.12684568275631256, 0.04579798719515564),
        (1, 0.1, 0.049937526036242005, -6.4589510947020266),
        (1, 3.0, 0.33905895852593626, 0.32467442479180014),
        (1, 47.5, 0.04523511047496802, 0.10657641833893297),
        (2, 1.0, 0.1149034849319005, -1.6506826068162548),
        (3, 7.3, -0.22810188905952475, 0.20747385287639492),
        (5, 0.7, 4.288240705888547e-05, -1499.9983172514858),
        (7, 15.0, 0.03446365541895916, -0.21610077401790928),
        (10, 2.0, 2.5153862827167347e-07, -129184.5422080393),
        (10, 30.0, -0.1298768939985887, 0.07505670212239714),
        (10, 50.0, -0.11384784914946938, 0.005723897182053507),
    ];

    #[test]
    fn matches_reference_table() {
        for &(n, x, j, y) in &TABLE {
            let (bj, by) = bessel_jy(n, x).unwrap();
            assert!((bj - j).abs() < 1e-10, "J_{n}({x}) = {bj}, want {j}");
            // Y_n blows up near 0, so large values are compared relatively.
            let tol = 1e-10 * y.abs().max(1.0);
            assert!((by - y).abs() < tol, "Y_{n}({x}) = {by}, want {y}");
        }
    }

    #[test]
    fn values_at_origin() {
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(1, 0.0), 0.0);
        assert!(bessel_jy(0, 0.0).is_err());
        assert!(bessel_jy(1, -1.0).is_err());
    }

    #[test]
    fn first_zero_of_j0() {
        // Ascending series as an independent route, refined by bisection.
        let series = |x: f64| {
            let mut term = 1.0;
            let mut sum = 1.0;
            for k in 1..40 {
                term *= -(x * x / 4.0) / (k * k) as f64;
                sum += term;
            }
            sum
        };
        let (mut a, mut b) = (2.0, 3.0);
        for _ in 0..60 {
            let c = 0.5 * (a + b);
            if series(a) * series(c) <= 0.0 {
                b = c;
            } else {
                a = c;
            }
        }
        assert!((a - 2.404826).abs() < 1e-6);
        assert!(bessel_j(0, 2.404826).abs() < 1e-5);
        assert!(bessel_j(0, a).abs() < 1e-12);
    }

    #[test]
    fn wronskian() {
        for n in 0..=10 {
            for x in [1.0, 5.0, 20.0, 30.0] {
                let (j, y, dj, dy) = bessel_jy_with_derivatives(n, x).unwrap();
                let w = j * dy - dj * y;
                let want = 2.0 / (PI * x);
                assert!((w - want).abs() < 1e-9 * want.max(1.0), "n={n} x={x}: {w} vs {want}");
            }
        }
    }

    #[test]
    fn series_and_asymptotic_routes_agree_at_switch() {
        for x in [20.0, 25.0, 28.0] {
            let (a0, a1) = y01_neumann(x);
            let (b0, b1) = (hankel_asymptotic(0, x).1, hankel_asymptotic(1, x).1);
            assert!((a0 - b0).abs() < 1e-12 && (a1 - b1).abs() < 1e-12, "x={x}");
            let ja = hankel_asymptotic(1, x).0;
            assert!((ja - bessel_j(1, x)).abs() < 1e-12);
        }
    }
}
