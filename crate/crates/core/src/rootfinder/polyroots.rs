//! Zeros of the small monic polynomials recovered from contour moments.

use num_complex::Complex64;

/// Coefficients (lowest degree first, monic) of the polynomial whose zeros
/// have the given power sums `p₁…p_N`, via Newton's identities.
pub(crate) fn from_power_sums(power_sums: &[Complex64]) -> Vec<Complex64> {
    let n = power_sums.len();
    let mut e = vec![Complex64::new(1.0, 0.0)];
    for k in 1..=n {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 1..=k {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += e[k - i] * power_sums[i - 1] * sign;
        }
        e.push(acc / k as f64);
    }
    // Π (w - wᵢ) = Σₖ (-1)ᵏ eₖ w^{n-k}
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
    for (k, ek) in e.iter().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        coeffs[n - k] = ek * sign;
    }
    coeffs
}

fn eval_with_slope(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    coeffs
        .iter()
        .rev()
        .fold((zero, zero), |(v, d), &c| (v * z + c, d * z + v))
}

/// All zeros of a monic polynomial by Aberth–Ehrlich iteration.
pub(crate) fn aberth(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    match n {
        0 => return Vec::new(),
        1 => return vec![-coeffs[0] / coeffs[1]],
        _ => {}
    }
    // Cauchy bound on the zero moduli.
    let bound = 1.0
        + coeffs[..n]
            .iter()
            .map(|c| (c / coeffs[n]).norm())
            .fold(0.0, f64::max);
    let centre = -coeffs[n - 1] / (coeffs[n] * n as f64);
    let spread = bound.min(1.0 + centre.norm()) * 0.5;
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            centre + Complex64::from_polar(spread, angle)
        })
        .collect();

    for _ in 0..500 {
        let mut max_step = 0.0_f64;
        for i in 0..n {
            let (p, dp) = eval_with_slope(coeffs, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = z[i] - z[j];
                    if d.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let denom = Complex64::new(1.0, 0.0) - ratio * repulsion;
            let step = if denom.norm() == 0.0 || !denom.re.is_finite() {
                ratio
            } else {
                ratio / denom
            };
            if step.re.is_finite() && step.im.is_finite() {
                z[i] -= step;
                max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if max_step < 1e-15 {
            break;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn newton_identities_rebuild_polynomial() {
        let zeros = [c(0.5, 0.0), c(-0.25, 0.3), c(-0.25, -0.3)];
        let sums: Vec<Complex64> = (1..=3)
            .map(|p| zeros.iter().map(|z| z.powi(p)).sum())
            .collect();
        let coeffs = from_power_sums(&sums);
        assert_eq!(coeffs.len(), 4);
        assert!((coeffs[3] - c(1.0, 0.0)).norm() < 1e-15);
        for z in zeros {
            assert!(eval_with_slope(&coeffs, z).0.norm() < 1e-14);
        }
    }

    #[test]
    fn aberth_finds_distinct_zeros() {
        let zeros = [c(0.9, 0.1), c(-0.7, 0.0), c(0.0, 0.5), c(0.2, -0.6)];
        let sums: Vec<Complex64> = (1..=4)
            .map(|p| zeros.iter().map(|z| z.powi(p)).sum())
            .collect();
        let found = sorted(aberth(&from_power_sums(&sums)));
        for (f, e) in found.iter().zip(sorted(zeros.to_vec())) {
            assert!((f - e).norm() < 1e-12, "{f} vs {e}");
        }
    }

    #[test]
    fn aberth_on_triple_zero_clusters() {
        // (w - 0.1)^3
        let coeffs = [c(-0.001, 0.0), c(0.03, 0.0), c(-0.3, 0.0), c(1.0, 0.0)];
        for z in aberth(&coeffs) {
            assert!((z - c(0.1, 0.0)).norm() < 1e-4);
        }
    }
}
