//! Small numerical kernels shared by the Young-function calculus, the norm
//! solver and the experiment harnesses.

/// `n` points log-spaced on `[lo, hi]`, endpoints included.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + step * i as f64).exp()
            }
        })
        .collect()
}

/// `ln(1 - exp(d))` for `d <= 0`, accurate near both ends.
pub fn ln_1m_exp(d: f64) -> f64 {
    if d > -std::f64::consts::LN_2 {
        (-d.exp_m1()).ln()
    } else {
        (-d.exp()).ln_1p()
    }
}

/// `ln(e^a + e^b)`.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization of a unimodal `f` on `[a, b]`.
/// Returns `(argmax, max)`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
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
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Where the best grid point of [`grid_golden_max`] sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Interior,
    /// Best at the lower end and still increasing toward it.
    Lower,
    /// Best at the upper end and still increasing there.
    Upper,
}

/// Maximizes `f(u)` over an evenly spaced grid in `u = ln y` on
/// `[ln lo, ln hi]`, then refines around the best grid point by golden
/// section. Returns `(argmax_u, max, edge)`.
pub fn grid_golden_max<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    n: usize,
    tol: f64,
) -> (f64, f64, Edge) {
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (n - 1) as f64;
    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let v = f(a + step * i as f64);
        values.push(v);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    if best == f64::NEG_INFINITY {
        return (a, best, Edge::Interior);
    }
    let edge = if best_i == n - 1 && values[n - 2] < best {
        Edge::Upper
    } else if best_i == 0 && values[1] < best {
        Edge::Lower
    } else {
        Edge::Interior
    };
    let left = a + step * best_i.saturating_sub(1) as f64;
    let right = a + step * (best_i + 1).min(n - 1) as f64;
    let (u, v) = golden_max(&f, left, right, tol);
    if v >= best {
        (u, v, edge)
    } else {
        (a + step * best_i as f64, best, edge)
    }
}

/// Smallest `x` in `[lo, hi]` with `pred(x)` true, for a predicate that is
/// monotone (false then true). Bisects in log space; relative tolerance
/// `rel_tol`. Returns `hi` side of the final bracket.
pub fn bisect_log<P: Fn(f64) -> bool>(pred: P, lo: f64, hi: f64, rel_tol: f64) -> f64 {
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..400 {
        if b - a <= rel_tol {
            break;
        }
        let m = 0.5 * (a + b);
        if pred(m.exp()) {
            b = m;
        } else {
            a = m;
        }
    }
    b.exp()
}

/// Ordinary least squares of `y` on the columns of `design` (each row one
/// observation). Solves the normal equations by Gaussian elimination with
/// partial pivoting; fine for the 2-3 column fits used here.
pub fn least_squares(design: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = design[0].len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (row, &yi) in design.iter().zip(y) {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += row[i] * row[j];
            }
            a[i][k] += row[i] * yi;
        }
    }
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for r in 0..k {
            if r != col {
                let factor = a[r][col] / a[col][col];
                for c in col..=k {
                    a[r][c] -= factor * a[col][c];
                }
            }
        }
    }
    (0..k).map(|i| a[i][k] / a[i][i]).collect()
}

/// Slope of the least-squares line through `(x, y)`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let design: Vec<Vec<f64>> = x.iter().map(|&xi| vec![xi, 1.0]).collect();
    least_squares(&design, y)[0]
}

/// 16-point Gauss-Legendre integral of `f` over `[a, b]` on `panels` panels.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    const NODES: [f64; 8] = [
        0.095_012_509_837_637_44,
        0.281_603_550_779_258_9,
        0.458_016_777_657_227_4,
        0.617_876_244_402_643_7,
        0.755_404_408_355_003,
        0.865_631_202_387_831_7,
        0.944_575_023_073_232_6,
        0.989_400_934_991_649_9,
    ];
    const WEIGHTS: [f64; 8] = [
        0.189_450_610_455_068_5,
        0.182_603_415_044_923_6,
        0.169_156_519_395_002_5,
        0.149_595_988_816_576_7,
        0.124_628_971_255_533_9,
        0.095_158_511_682_492_78,
        0.062_253_523_938_647_89,
        0.027_152_459_411_754_09,
    ];
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + h * p as f64;
        let mid = lo + 0.5 * h;
        let half = 0.5 * h;
        let mut s = 0.0;
        for (x, w) in NODES.iter().zip(WEIGHTS) {
            s += w * (f(mid - half * x) + f(mid + half * x));
        }
        total += s * half;
    }
    total
}
