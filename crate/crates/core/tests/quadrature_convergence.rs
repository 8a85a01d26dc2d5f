use confext::quadrature::{build_ball_quadrature, integrate_ball, BallQuadrature, RadialRule};
use confext::ProblemParams;
use statrs::function::beta::beta;
use std::f64::consts::PI;

// ∫_{B_1} (1 - |ξ|²)^{1-a} dξ = |S^{n-1}| · B(n/2, 2 - a) / 2
fn oracle(n: usize, a: f64) -> f64 {
    let area = if n == 2 { 2.0 * PI } else { 4.0 * PI };
    0.5 * area * beta(0.5 * n as f64, 2.0 - a)
}

fn weighted_volume(ball: &BallQuadrature, a: f64) -> f64 {
    let vals: Vec<f64> = ball.nodes().iter().map(|x| (1.0 - x.iter().map(|c| c * c).sum::<f64>()).powf(1.0 - a)).collect();
    integrate_ball(&vals, ball).unwrap()
}

#[test]
fn graded_rule_matches_beta_oracle() {
    for (n, a) in [(2, 0.5), (2, 0.9), (3, 0.0), (3, -0.5), (3, 0.5)] {
        let p = ProblemParams::new(n, a).unwrap();
        let rule = RadialRule::Graded { panels: 24, points_per_panel: 8, ratio: 0.5 };
        let ball = BallQuadrature::new(&p, rule, 8).unwrap();
        let err = (weighted_volume(&ball, a) - oracle(n, a)).abs();
        assert!(err < 1e-8, "n={n} a={a} err={err:e}");
    }
}

#[test]
fn gauss_legendre_radial_rule_converges_at_least_fourfold() {
    for (n, a) in [(2, 0.5), (2, 0.2), (3, 0.0), (3, -0.5), (3, 0.5)] {
        let p = ProblemParams::new(n, a).unwrap();
        let exact = oracle(n, a);
        let mut prev = f64::NAN;
        let mut m = 4;
        while m <= 512 {
            let ball = build_ball_quadrature(&p, m, 4).unwrap();
            let err = (weighted_volume(&ball, a) - exact).abs();
            if prev.is_finite() && prev > 1e-10 {
                assert!(err * 4.0 <= prev, "n={n} a={a} m={m}: {prev:e} -> {err:e}");
            }
            if err < 1e-10 {
                break;
            }
            prev = err;
            m *= 2;
        }
    }
}

#[test]
fn volume_and_odd_moments() {
    for (n, a, vol) in [(2, 0.5, PI), (3, 0.0, 4.0 * PI / 3.0)] {
        let p = ProblemParams::new(n, a).unwrap();
        let ball = build_ball_quadrature(&p, 8, 16).unwrap();
        let ones = vec![1.0; ball.len()];
        assert!((integrate_ball(&ones, &ball).unwrap() - vol).abs() < 1e-8);
        let x1: Vec<f64> = ball.nodes().iter().map(|x| x[0]).collect();
        assert!(integrate_ball(&x1, &ball).unwrap().abs() < 1e-10);
        assert!(ball.delta_min() > 0.0);
        assert!(ball.nodes().iter().all(|x| x.iter().map(|c| c * c).sum::<f64>().sqrt() <= 1.0 - ball.delta_min() + 1e-15));
    }
}
