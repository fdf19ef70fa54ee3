use fk_eit::oracle::{
    disk_neumann_analytic, fd_solve, spectral_gap, FourierBoundaryData, GridSolution, Inclusion,
    OracleProblem, PiecewiseConstantField,
};
use fk_eit::{BoundaryFunction, ConductivityField, DomainGeometry, SymMat2, Vec2};

fn uniform(value: f64) -> PiecewiseConstantField {
    PiecewiseConstantField { background: value, inclusions: Vec::new() }
}

#[test]
fn scaling_conductivity_scales_the_gap() {
    for domain in [DomainGeometry::unit_disk(), DomainGeometry::unit_square()] {
        let one = spectral_gap(&domain, &uniform(1.0), 24).unwrap();
        let two = spectral_gap(&domain, &ConductivityField::constant(SymMat2::scalar(2.0), 2.0).unwrap(), 24).unwrap();
        assert!((two / one - 2.0).abs() < 1e-6, "{one} {two}");
    }
}

#[test]
fn continuum_solves_conserve_flux() {
    let f = BoundaryFunction::Fourier { mean: 0.0, cos: vec![0.3, 1.0], sin: vec![0.0, 0.0, -0.5] };
    for domain in [DomainGeometry::unit_disk(), DomainGeometry::rectangle(Vec2::new(0.0, 0.0), Vec2::new(2.0, 1.0)).unwrap()] {
        let s = fd_solve(&OracleProblem::Continuum(f.clone()), &domain, &uniform(1.0), 32).unwrap();
        assert!(s.flux_residual <= 1e-8, "{}", s.flux_residual);
        assert!(s.solver.relative_residual <= 1e-10);
        let areas = s.grid.areas();
        let mean: f64 = s.values.iter().zip(&areas).map(|(v, a)| v * a).sum::<f64>() / areas.iter().sum::<f64>();
        assert!(mean.abs() < 1e-10);
    }
}

#[test]
fn concentric_inclusion_matches_closed_form() {
    // u = C r cos θ inside r < a, (A r + B / r) cos θ outside, ∂_r u = cos θ at r = 1
    let (a, k) = (0.5, 3.0);
    let big_a = 1.0 / (1.0 + a * a * (k - 1.0) / (k + 1.0));
    let big_b = -a * a * (k - 1.0) / (k + 1.0) * big_a;
    let exact = |x: Vec2| {
        let r = x.norm();
        let c = x.angle().cos();
        if r < a {
            (big_a + big_b / (a * a)) * r * c
        } else {
            (big_a * r + big_b / r) * c
        }
    };
    let field = PiecewiseConstantField { background: 1.0, inclusions: vec![Inclusion { center: Vec2::ZERO, radius: a, value: k }] };
    let disk = DomainGeometry::unit_disk();
    let probes = [Vec2::new(0.2, 0.1), Vec2::new(0.75, 0.0), Vec2::new(-0.3, 0.8)];
    let err = |n: usize| {
        let s = fd_solve(&OracleProblem::Continuum(BoundaryFunction::cos(1)), &disk, &field, n).unwrap();
        probes.iter().map(|p| (s.interpolate(*p) - exact(*p)).abs()).fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(32), err(64));
    assert!(fine < 5e-3 && fine < coarse, "{coarse} {fine}");
}

#[test]
fn interpolated_disk_solution_is_accurate() {
    let disk = DomainGeometry::unit_disk();
    let f = BoundaryFunction::cos(2);
    let data = FourierBoundaryData::cos(2);
    let probes = [Vec2::new(0.3, 0.2), Vec2::new(-0.5, 0.5), Vec2::new(0.1, -0.85), Vec2::new(0.95, 0.0)];
    let err = |n: usize| {
        let s = fd_solve(&OracleProblem::Continuum(f.clone()), &disk, &uniform(1.0), n).unwrap();
        probes
            .iter()
            .map(|x| (s.interpolate(*x) - disk_neumann_analytic(&data, x.norm(), x.angle()).unwrap()).abs())
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(32), err(64));
    assert!(fine < 2e-4 && fine < coarse, "{coarse} {fine}");
}

#[test]
fn grid_solutions_roundtrip_through_files() {
    let sq = DomainGeometry::unit_square();
    let s = fd_solve(&OracleProblem::Dirichlet(BoundaryFunction::sin(1)), &sq, &uniform(1.0), 16).unwrap();
    let dir = std::env::temp_dir().join(format!("fk-eit-oracle-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("solution.csv");
    s.write_csv(&path).unwrap();
    let back = GridSolution::from_csv(&std::fs::read_to_string(&path).unwrap()).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(back.grid, s.grid);
    assert_eq!(back.values, s.values);
}
