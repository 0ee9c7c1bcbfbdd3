use num_complex::Complex64;
use qpdesign::design::{self, ControlGiven, ControlPlant, SearchWindow};
use qpdesign::rootfinder::{self, Root};
use qpdesign::{ComplexRectangle, Error, Progress, Quasipolynomial};

fn unit_square() -> ComplexRectangle {
    ComplexRectangle::new(-1.0, 1.0, -1.0, 1.0).unwrap()
}

fn oscillator() -> Quasipolynomial {
    let plant = ControlPlant::new(2, 0, vec![(2.0 * std::f64::consts::PI).powi(2), 0.0]).unwrap();
    design::solve_control_mid(&plant, ControlGiven::Delay(0.12), SearchWindow::default())
        .unwrap()
        .remove(0)
        .quasipolynomial
}

#[test]
fn constructed_multiple_roots() {
    let double = Quasipolynomial::new(1, 0, vec![-1.0], vec![1.0], 1.0).unwrap();
    let set = rootfinder::find_roots(&double, &unit_square()).unwrap();
    assert_eq!(set.roots.len(), 1);
    assert_eq!(set.roots[0].multiplicity, 2);
    assert!(set.roots[0].location.norm() < 1e-8);

    let triple = Quasipolynomial::new(2, 0, vec![2.0, -2.0], vec![-2.0], 1.0).unwrap();
    let set = rootfinder::find_roots(&triple, &unit_square()).unwrap();
    assert_eq!(set.roots.len(), 1);
    assert_eq!(set.roots[0].multiplicity, 3);
    assert!(set.roots[0].location.norm() < 1e-8);
}

#[test]
fn high_multiplicity_beyond_moment_capacity() {
    // n=3, m=2 puts a root of multiplicity 6 at s₀.
    let d = design::solve_generic_mid(3, 2, 1.0, -1.0).unwrap();
    let rect = ComplexRectangle::new(-3.0, 1.0, -2.0, 2.0).unwrap();
    let set = rootfinder::find_roots(&d.quasipolynomial, &rect).unwrap();
    let main = set
        .roots
        .iter()
        .find(|r| r.multiplicity == 6)
        .expect("sixfold root");
    assert!((main.location - Complex64::new(-1.0, 0.0)).norm() < 1e-2);
}

#[test]
fn oscillator_design_dominates_large_window() {
    let q = oscillator();
    let rect = ComplexRectangle::new(-500.0, 500.0, -500.0, 500.0).unwrap();
    let set = rootfinder::find_roots(&q, &rect).unwrap();
    let s0 = set.window_abscissa;
    assert!((s0 + 2.8592).abs() < 1e-3);
    let report = rootfinder::certify_dominance(&set, s0).unwrap();
    assert!(report.dominant);
    assert!(report.margin > 20.0);
    for r in &set.roots {
        assert!(r.location.re <= s0 + 1e-6);
    }
}

#[test]
fn sweep_splits_the_double_root() {
    let q = oscillator();
    let rect = ComplexRectangle::new(-6.0, -0.5, -3.0, 3.0).unwrap();
    let nominal = rootfinder::find_roots(&q, &rect).unwrap();
    let sweep = rootfinder::sensitivity_sweep(&q, 1e-3, 3, &rect).unwrap();
    assert_eq!(sweep.per_k.len(), 7);
    assert_eq!(sweep.per_k[&0], nominal);
    assert_eq!(nominal.roots.len(), 1);
    assert_eq!(nominal.roots[0].multiplicity, 2);
    for (k, set) in &sweep.per_k {
        if *k != 0 {
            assert_eq!(set.roots.len(), 2, "k = {k}");
            assert!(set.roots.iter().all(|r| r.multiplicity == 1));
        }
    }
}

fn nearest(roots: &[Root], z: Complex64) -> Complex64 {
    roots
        .iter()
        .map(|r| r.location)
        .min_by(|a, b| (a - z).norm().total_cmp(&(b - z).norm()))
        .unwrap()
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn simple_roots_move_linearly_with_delay() {
    let q = oscillator();
    let rect = ComplexRectangle::new(-60.0, -10.0, -80.0, 80.0).unwrap();
    let nominal = rootfinder::find_roots(&q, &rect).unwrap();
    let eps = [1e-2, 1e-3, 1e-4];
    for target in nominal.roots.iter().filter(|r| r.location.im >= 0.0) {
        let mut logs = Vec::new();
        for e in eps {
            let sweep = rootfinder::sensitivity_sweep(&q, e, 1, &rect).unwrap();
            let moved = nearest(&sweep.per_k[&1].roots, target.location);
            logs.push((moved - target.location).norm().ln());
        }
        let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
        let p = slope(&xs, &logs);
        assert!((p - 1.0).abs() < 0.1, "root {}: slope {p}", target.location);
    }
}

/// The two halves of a split double root move like √ε while their
/// centroid, an analytic function of the delay, moves like ε.
#[test]
fn double_root_splits_like_square_root() {
    let q = oscillator();
    let rect = ComplexRectangle::new(-6.0, -0.5, -3.0, 3.0).unwrap();
    let s0 = Complex64::new(rootfinder::find_roots(&q, &rect).unwrap().window_abscissa, 0.0);
    let spread_and_centroid = |e: f64| {
        let sweep = rootfinder::sensitivity_sweep(&q, e, 1, &rect).unwrap();
        let roots = &sweep.per_k[&1].roots;
        assert_eq!(roots.len(), 2);
        let spread = roots.iter().map(|r| (r.location - s0).norm()).fold(0.0, f64::max);
        let centroid = (roots[0].location + roots[1].location) * 0.5 - s0;
        (spread.ln(), centroid.norm().ln())
    };

    let small = [1e-4, 1e-5, 1e-6];
    let spread: Vec<f64> = small.iter().map(|&e| spread_and_centroid(e).0).collect();
    let xs: Vec<f64> = small.iter().map(|e| e.ln()).collect();
    let p = slope(&xs, &spread);
    assert!((p - 0.5).abs() < 0.02, "spread slope {p}");

    let eps = [1e-2, 1e-3, 1e-4];
    let centroid: Vec<f64> = eps.iter().map(|&e| spread_and_centroid(e).1).collect();
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let p = slope(&xs, &centroid);
    assert!((p - 1.0).abs() < 0.1, "centroid slope {p}");
}

#[test]
fn sweep_reports_progress_and_cancels() {
    let q = oscillator();
    let rect = ComplexRectangle::new(-100.0, 10.0, -100.0, 100.0).unwrap();
    let progress = Progress::new();
    rootfinder::sensitivity_sweep_with(&q, 1e-3, 2, &rect, &progress).unwrap();
    assert!(progress.completed() > 0);
    let cancelled = Progress::new();
    cancelled.cancel();
    assert!(matches!(
        rootfinder::sensitivity_sweep_with(&q, 1e-3, 2, &rect, &cancelled),
        Err(Error::Cancelled { .. })
    ));
}

#[test]
fn dominance_fails_for_unstable_crrid_order() {
    // Roots −1, −2 imposed; −2 is not the rightmost.
    let d = design::solve_generic_crrid(1, 0, 1.0, &[-1.0, -2.0]).unwrap();
    let rect = ComplexRectangle::new(-10.0, 2.0, -30.0, 30.0).unwrap();
    let set = rootfinder::find_roots(&d.quasipolynomial, &rect).unwrap();
    assert!(rootfinder::certify_dominance(&set, -1.0).unwrap().dominant);
    assert!(!rootfinder::certify_dominance(&set, -2.0).unwrap().dominant);
}
