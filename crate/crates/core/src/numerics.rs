//! Small numerical kernels shared across modules: deterministic seed
//! derivation, robust statistics, 1-D searches, line fits, and
//! Cayley-Menger determinants.

/// SplitMix64 step. Used for deterministic, platform-independent seed
/// derivation; never used as the simulation RNG itself.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a base seed, a domain tag, and an
/// item index. Every parallel work item gets its own derived seed so results
/// do not depend on scheduling.
pub fn derive_seed(base: u64, tag: &str, index: u64) -> u64 {
    let mut h = base ^ 0x51_7c_c1_b7_27_22_0a_95;
    for b in tag.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    splitmix64(h ^ index.wrapping_mul(0x2545_f491_4f6c_dd1d))
}

/// Median of a nonempty slice. Averages the two central order statistics for
/// even lengths.
pub fn median(values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("median: non-comparable value"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Golden-section minimization of a unimodal function on [lo, hi].
/// Returns (argmin, min). Tolerance is on the bracket width.
pub fn golden_section_min(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    bracket_tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        if (hi - lo).abs() <= bracket_tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Bisection for a root of g on [lo, hi], assuming g(lo) < 0 <= g(hi).
/// Stops when |g| <= value_tol or the bracket shrinks below x_tol.
pub fn bisect_root(
    g: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    value_tol: f64,
    x_tol: f64,
) -> f64 {
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm.abs() <= value_tol || (hi - lo) <= x_tol {
            return mid;
        }
        if gm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mid
}

/// Least-squares line fit y = slope * x + intercept.
/// Returns (slope, intercept, slope standard error). The standard error is 0
/// when there are fewer than 3 points or the residuals vanish.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len();
    assert_eq!(n, ys.len());
    assert!(n >= 2, "fit_line needs at least two points");
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if n < 3 {
        return (slope, intercept, 0.0);
    }
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let se = (ss_res / ((nf - 2.0) * sxx)).sqrt();
    (slope, intercept, se)
}

/// Determinant of a small dense matrix by Gaussian elimination with partial
/// pivoting. Sizes here never exceed 5x5.
pub fn det(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut sign = 1.0;
    let mut d = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            sign = -sign;
        }
        d *= m[col][col];
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
        }
    }
    sign * d
}

/// Cayley-Menger determinant of k+1 points given their pairwise distances.
/// `d[i][j]` are plain distances (not squared). For 4 points the value equals
/// 288 V^2 where V is the tetrahedron volume; for 3 points it equals -16 A^2.
pub fn cayley_menger(d: &[Vec<f64>]) -> f64 {
    let k = d.len();
    let mut m = vec![vec![0.0; k + 1]; k + 1];
    for i in 1..=k {
        m[0][i] = 1.0;
        m[i][0] = 1.0;
    }
    for i in 0..k {
        for j in 0..k {
            m[i + 1][j + 1] = d[i][j] * d[i][j];
        }
    }
    det(m)
}

/// Squared triangle area from side lengths via the 3-point Cayley-Menger
/// determinant. Nonnegative for any side triple satisfying the triangle
/// inequality; negative values measure its violation.
pub fn triangle_area_sq(a: f64, b: f64, c: f64) -> f64 {
    let d = vec![vec![0.0, a, b], vec![a, 0.0, c], vec![b, c, 0.0]];
    -cayley_menger(&d) / 16.0
}

/// Bootstrap standard error of the maximum of `values`: resamples with
/// replacement `rounds` times and returns the standard deviation of the
/// resampled maxima. Deterministic given the seed.
pub fn bootstrap_max_stderr(values: &[f64], rounds: usize, seed: u64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as u64;
    let mut maxima = Vec::with_capacity(rounds);
    for r in 0..rounds {
        let mut m = f64::NEG_INFINITY;
        for i in 0..n {
            let pick = splitmix64(seed ^ (r as u64).wrapping_mul(0x9e3779b1) ^ i) % n;
            m = m.max(values[pick as usize]);
        }
        maxima.push(m);
    }
    let mean = maxima.iter().sum::<f64>() / rounds as f64;
    let var = maxima.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / rounds as f64;
    var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_handles_even_and_odd_lengths() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let (x, fx) = golden_section_min(|x| (x - 0.3) * (x - 0.3), -1.0, 1.0, 1e-12, 200);
        assert!((x - 0.3).abs() < 1e-6);
        assert!(fx < 1e-12);
    }

    #[test]
    fn bisection_solves_linear_crossing() {
        let root = bisect_root(|x| x - 0.25, 0.0, 1.0, 0.0, 1e-14);
        assert!((root - 0.25).abs() < 1e-12);
    }

    #[test]
    fn fit_line_recovers_exact_slope() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let (s, b, se) = fit_line(&xs, &ys);
        assert!((s - 2.0).abs() < 1e-12);
        assert!((b - 1.0).abs() < 1e-12);
        assert!(se < 1e-12);
    }

    #[test]
    fn cayley_menger_vanishes_for_planar_quadruple() {
        // unit square in the plane
        let s2 = std::f64::consts::SQRT_2;
        let d = vec![
            vec![0.0, 1.0, s2, 1.0],
            vec![1.0, 0.0, 1.0, s2],
            vec![s2, 1.0, 0.0, 1.0],
            vec![1.0, s2, 1.0, 0.0],
        ];
        assert!(cayley_menger(&d).abs() < 1e-9);
    }

    #[test]
    fn cayley_menger_positive_for_regular_tetrahedron() {
        let d = vec![
            vec![0.0, 1.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0, 1.0],
            vec![1.0, 1.0, 0.0, 1.0],
            vec![1.0, 1.0, 1.0, 0.0],
        ];
        // volume of the unit regular tetrahedron is 1/(6 sqrt 2)
        let v2 = cayley_menger(&d) / 288.0;
        assert!((v2.sqrt() - 1.0 / (6.0 * std::f64::consts::SQRT_2)).abs() < 1e-12);
    }

    #[test]
    fn equilateral_triangle_area_is_positive() {
        let a2 = triangle_area_sq(1.0, 1.0, 1.0);
        assert!((a2 - 3.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn derived_seeds_differ_across_tags_and_indices() {
        let a = derive_seed(0, "shell", 0);
        let b = derive_seed(0, "shell", 1);
        let c = derive_seed(0, "ball", 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(0, "shell", 0));
    }
}
