use std::f64::consts::PI;

use nlspec_core::grid::neg_laplacian;
use nlspec_core::linalg::PoissonSolver;
use nlspec_core::quotient::lambda_p0p1;
use nlspec_core::solver::{
    check_admissible, contraction_ratio, fixed_point_map, fixed_ray, lambda_sweep, solve_flambda,
};
use nlspec_core::{GridFunction, Mesh, MinimizeConfig, OperatorSpec, Rhs, SolveConfig};

fn interval(n: usize) -> Mesh {
    Mesh::unit_interval(n).unwrap()
}

#[test]
fn zero_load_has_the_zero_solution() {
    let mesh = interval(64);
    let h = GridFunction::zeros(mesh);
    for (p0, p1) in [(2.0, 0.0), (2.0, 2.0), (3.0, 1.0)] {
        let r = solve_flambda(p0, p1, 1.0, &h, &SolveConfig::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.residual, 0.0);
        assert!(r.solution.is_zero());
    }
}

#[test]
fn linear_solve_matches_the_resolvent() {
    let mesh = interval(256);
    let cfg = SolveConfig::default();
    let disc = lambda_p0p1(2.0, 0.0, mesh, &MinimizeConfig::default()).unwrap().lambda_power;
    let lambda = 0.5 * disc;
    let h = Rhs::Constant { value: 1.0 }.build(mesh);
    let r = solve_flambda(2.0, 0.0, lambda, &h, &cfg).unwrap();
    assert!(r.converged && r.residual <= cfg.tol, "{}", r.residual);
    // -Lap u - lambda u = h, checked directly on the strong form
    let lhs = neg_laplacian(&r.solution).sub(&r.solution.scaled(lambda)).unwrap();
    let defect = lhs.sub(&h).unwrap().norm_l2() / h.norm_l2();
    assert!(defect <= 1e-7, "{defect}");
}

#[test]
fn linear_sweep_below_the_eigenvalue() {
    let mesh = interval(256);
    let h = Rhs::Constant { value: 1.0 }.build(mesh);
    let eig = MinimizeConfig::default();
    let disc = lambda_p0p1(2.0, 0.0, mesh, &eig).unwrap().lambda_power;
    let lambdas: Vec<f64> = [0.0, 0.25, 0.5, 0.75].iter().map(|f| f * disc).collect();
    let t = lambda_sweep(2.0, 0.0, &lambdas, &h, "constant:1", Some(disc), &SolveConfig::default(), &eig).unwrap();
    assert_eq!(t.rows.iter().filter(|r| r.converged).count(), 4);
    assert!(t.metadata.required_ok);
    for (row, l) in t.rows.iter().zip(&lambdas) {
        assert_eq!(row.lambda, *l);
        assert!(row.residual <= 1e-8);
    }
}

#[test]
fn weighted_sweep_with_small_load() {
    let mesh = interval(128);
    let unit = Rhs::Constant { value: 1.0 }.build(mesh);
    let h = unit.scaled(0.01 / unit.norm_l2());
    let eig = MinimizeConfig::default();
    let disc = lambda_p0p1(2.0, 2.0, mesh, &eig).unwrap().lambda_power;
    let lambdas: Vec<f64> = [0.0, 0.3, 0.6, 0.9].iter().map(|f| f * disc).collect();
    let t = lambda_sweep(2.0, 2.0, &lambdas, &h, "constant", Some(disc), &SolveConfig::default(), &eig).unwrap();
    assert!(t.rows.iter().all(|r| r.converged), "{:?}", t.rows);
    assert!((t.metadata.rhs_norm - 0.01).abs() < 1e-15);
}

#[test]
fn sweep_rejects_unordered_lambdas() {
    let mesh = interval(32);
    let h = GridFunction::zeros(mesh);
    let eig = MinimizeConfig::default();
    let cfg = SolveConfig::default();
    assert!(lambda_sweep(2.0, 0.0, &[1.0, 1.0], &h, "zero", Some(9.0), &cfg, &eig).is_err());
    assert!(lambda_sweep(2.0, 0.0, &[], &h, "zero", Some(9.0), &cfg, &eig).is_err());
}

#[test]
fn fixed_point_reformulation() {
    let mesh = interval(256);
    let g = OperatorSpec::power_identity(2.0).unwrap();
    let ray = fixed_ray(&g, mesh, 0, 500).unwrap();
    assert!(ray.converged);
    assert!((ray.lambda - PI * PI).abs() <= 0.01 * PI * PI);
    let v = GridFunction::ground_state(mesh);
    let mapped = fixed_point_map(ray.lambda, &g, &v).unwrap();
    assert!(mapped.sub(&v).unwrap().norm_l2() <= 0.01 * v.norm_l2());
    assert!(fixed_point_map(0.0, &g, &v).unwrap().is_zero());
    let rate = contraction_ratio(0.5 * ray.lambda, &g, mesh, 1, 60).unwrap();
    assert!((rate - 0.5).abs() < 1e-3, "{rate}");
    let solver = PoissonSolver::new(mesh);
    assert!((solver.lowest_eigenvalue() - ray.lambda).abs() <= 1e-8 * ray.lambda);
}

#[test]
fn admissibility_screen() {
    let mesh = interval(64);
    let zero = GridFunction::zeros(mesh);
    let a = check_admissible(2.0, 0.0, 1.0, &zero, 50, 1.0, 0).unwrap();
    assert!(a.admissible && a.margin >= 0.0);
    let huge = Rhs::Constant { value: 1.0 }.build(mesh);
    let huge = huge.scaled(1e6 / huge.norm_l2());
    let b = check_admissible(2.0, 0.0, 1.0, &huge, 50, 1.0, 0).unwrap();
    assert!(!b.admissible);
}
