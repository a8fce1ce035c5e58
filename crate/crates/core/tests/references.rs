use liecf::harness::{
    emit_csv, parse_csv, run_convergence, run_convergence_with, standard_grid,
};
use liecf::integrators::{Family, StepperConfig};
use liecf::problems::{
    all_cases, case_by_name, rigid_body_exact, so3t_generator, so5_generator, su3_flow_problem,
    vdp_problem, AnyCase, BenchmarkCase, Case, Reference,
};
use liecf::smallmat::{Matrix, RealMatrix, Scalar};
use liecf::tableau::registry_lookup;

fn refinement_gap<T: Scalar>(case: &BenchmarkCase<T>) -> f64 {
    let Reference::SelfReference { h } = case.reference_kind() else {
        return 0.0;
    };
    let coarse = case.reference_solution().unwrap();
    let fine = case.self_reference_at(h / 2.0).unwrap();
    case.distance(coarse, &fine)
}

#[test]
fn self_references_are_refinement_stable() {
    for case in all_cases() {
        let gap = match &case {
            AnyCase::Real(c) => refinement_gap(c),
            AnyCase::Complex(c) => refinement_gap(c),
        };
        assert!(gap <= 1e-12, "{}: {gap:e}", case.as_case().name());
    }
}

#[test]
fn generators_stay_in_their_algebras() {
    let skew = |a: &RealMatrix| (a + &a.transpose()).max_abs();
    let mut seed = 0.37f64;
    let mut next = || {
        seed = (seed * 97.0 + 0.13).fract();
        seed * 2.0 - 1.0
    };
    for _ in 0..20 {
        let w: Vec<f64> = (0..25).map(|_| next()).collect();
        let y = RealMatrix::from_vec(5, 5, w).unwrap();
        assert!(skew(&so5_generator(&y)) <= 1e-14);
        let t = 3.0 * next();
        assert!(skew(&so3t_generator(t)) <= 1e-14);
        let v = RealMatrix::column(&[next(), next(), next()]);
        assert!(skew(&liecf::problems::rigid_body_generator(&v)) <= 1e-14);
    }
    let su3 = su3_flow_problem();
    let mut y = su3.y0().clone();
    for k in 0..10 {
        let a = su3.problem().generator(0.0, &y).unwrap();
        assert!((&a + &a.adjoint()).max_abs() <= 1e-14);
        assert!(a.trace().norm() <= 1e-14);
        y = liecf::smallmat::mat_mul(&liecf::smallmat::expm(&a.scale_real(0.1 * k as f64)).unwrap(), &y)
            .unwrap();
    }
}

#[test]
fn vdp_needle_near_t_1_5() {
    let case = vdp_problem();
    let cfg = StepperConfig::new(&registry_lookup("BUTCHER65").unwrap(), Family::Rkmk).unwrap();
    let mut peak: f64 = 0.0;
    case.trajectory(&cfg, 1.0 / 4096.0, 2.0, &mut |t, y| {
        if (1.4..=1.7).contains(&t) {
            peak = peak.max(y[1].abs());
        }
    })
    .unwrap();
    assert!(peak > 50.0, "peak |x'| = {peak}");
}

#[test]
fn rigid_lie_solution_tracks_closed_form() {
    let AnyCase::Real(case) = case_by_name("rigid").unwrap() else {
        unreachable!()
    };
    let cfg = StepperConfig::new(&registry_lookup("TSRKF84").unwrap(), Family::LieCf2N).unwrap();
    let mut worst: f64 = 0.0;
    case.trajectory(&cfg, 0.025, 20.0, &mut |t, y| {
        let e = rigid_body_exact(t);
        let y = Matrix::column(y);
        worst = worst.max((&y - &e).max_abs());
    })
    .unwrap();
    assert!(worst < 1e-5, "max deviation {worst:e}");
}

#[test]
fn convergence_rows_are_deterministic_and_monotone() {
    let case = case_by_name("so3t").unwrap();
    let cfg = StepperConfig::new(&registry_lookup("BWRRK33").unwrap(), Family::LieCf2N).unwrap();
    let grid = standard_grid("so3t", 3);
    let parallel = run_convergence(case.as_case(), &cfg, &grid).unwrap();
    let serial = run_convergence_with(case.as_case(), &cfg, &grid, false).unwrap();
    let d = |r: &liecf::harness::ConvergenceReport| -> Vec<u64> {
        r.rows.iter().map(|row| row.d.to_bits()).collect()
    };
    assert_eq!(d(&parallel), d(&serial));
    assert_eq!(parallel.fitted_slope.to_bits(), serial.fitted_slope.to_bits());
    let hs: Vec<f64> = parallel.rows.iter().map(|r| r.h).collect();
    assert!(hs.windows(2).all(|w| w[0] < w[1]));
    let (lo, hi) = parallel.fit_range.unwrap();
    let fit: Vec<f64> = parallel
        .rows
        .iter()
        .filter(|r| r.h >= lo && r.h <= hi)
        .map(|r| r.d)
        .collect();
    assert!(fit.windows(2).all(|w| w[0] < w[1]), "d not monotone in h: {fit:?}");
}

#[test]
fn csv_round_trip_of_a_real_sweep() {
    let case = case_by_name("rigid").unwrap();
    let cfg = StepperConfig::new(&registry_lookup("BWRRK33").unwrap(), Family::LieCf2N).unwrap();
    let report = run_convergence(case.as_case(), &cfg, &standard_grid("rigid", 3)).unwrap();
    let mut buf = Vec::new();
    emit_csv(&report, &mut buf).unwrap();
    let parsed = parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(parsed.len(), 1);
    let p = &parsed[0];
    assert_eq!(p.case_name, report.case_name);
    assert_eq!(p.scheme_name, report.scheme_name);
    assert_eq!(p.family, report.family.as_str());
    assert_eq!(p.nominal_order, report.nominal_order);
    assert_eq!(p.slope.to_bits(), report.fitted_slope.to_bits());
    assert_eq!(p.rows.len(), report.rows.len());
    for (a, b) in p.rows.iter().zip(&report.rows) {
        assert_eq!(a.0.to_bits(), b.h.to_bits());
        assert_eq!(a.1.to_bits(), b.d.to_bits());
        assert_eq!(a.2.to_bits(), b.seconds.to_bits());
    }
}

#[test]
fn fits_skip_rows_near_the_reference_floor() {
    // The full so5 grid runs YRK135 well into the reference plateau.
    let case = case_by_name("so5").unwrap();
    let cfg = StepperConfig::new(&registry_lookup("YRK135").unwrap(), Family::LieCf2N).unwrap();
    let report = run_convergence(case.as_case(), &cfg, &standard_grid("so5", 3)).unwrap();
    let floor = case.as_case().reference_floor().unwrap();
    assert!(report.rows.iter().any(|r| r.d <= 10.0 * floor));
    let (lo, _) = report.fit_range.unwrap();
    let first = report.rows.iter().find(|r| r.h == lo).unwrap();
    assert!(first.d > 10.0 * floor);
    assert!((report.fitted_slope - 5.0).abs() < 0.3, "slope {}", report.fitted_slope);
}
