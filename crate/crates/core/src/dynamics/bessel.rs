//! Bessel functions of the first kind, orders 0 and 1.
//!
//! Power series below `SERIES_LIMIT`, Hankel asymptotic expansion above,
//! truncated at the smallest term. Both sides stay within ~1e-12 absolute
//! at the switch point.

use std::f64::consts::PI;

const SERIES_LIMIT: f64 = 12.0;

fn series(x: f64, order: u32) -> f64 {
    let q = -0.25 * x * x;
    let (mut term, mut sum) = if order == 0 {
        (1.0, 1.0)
    } else {
        (0.5 * x, 0.5 * x)
    };
    let mut k = 1.0_f64;
    loop {
        term *= q / (k * (k + order as f64));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && k > 2.0 {
            break;
        }
        k += 1.0;
        if k > 200.0 {
            break;
        }
    }
    sum
}

fn asymptotic(x: f64, order: u32) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0_f64;
    for k in 1..80 {
        let odd = (2 * k - 1) as f64;
        let next = a * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() >= a.abs() {
            break;
        }
        a = next;
        // a_k alternates between the Q (odd k) and P (even k) series.
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 1 {
            q += sign * a;
        } else {
            p += sign * a;
        }
    }
    let chi = x - (0.5 * order as f64 + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// J₀(x).
pub fn j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < SERIES_LIMIT {
        series(ax, 0)
    } else {
        asymptotic(ax, 0)
    }
}

/// J₁(x).
pub fn j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < SERIES_LIMIT {
        series(ax, 1)
    } else {
        asymptotic(ax, 1)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// d²J₀/dx² = -(J₀(x) - J₁(x)/x), with the x → 0 limit -1/2.
pub fn j0_second_derivative(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        return -0.5 + 3.0 * x * x / 16.0;
    }
    -(j0(x) - j1(x) / x)
}
