//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::process::{Command, ExitCode};

use liecf::elliptic::jacobi_sn_cn_dn;
use liecf::harness::{power_of_two_grid, run_convergence, standard_grid, ConvergenceReport};
use liecf::integrators::{
    dexpinv, integrate, integrate_observed, CfCoefficients, Family, Problem, StepperConfig, Work,
};
use liecf::problems::{case_by_name, AnyCase};
use liecf::smallmat::{commutator, expm, hat, RealMatrix};
use liecf::tableau::{
    classical_order_residuals, from_butcher, lie_cf3_condition_residual, registry_lookup,
    to_butcher, williamson_constraint_residual, Scheme,
};

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn scheme(name: &str) -> Scheme {
    registry_lookup(name).expect("built-in scheme")
}

fn sweep(case: &str, name: &str, family: Family, grid: &[f64]) -> ConvergenceReport {
    let case = case_by_name(case).expect("known case");
    let cfg = StepperConfig::new(&scheme(name), family).expect("valid stepper");
    run_convergence(case.as_case(), &cfg, grid).expect("sweep runs")
}

fn in_band(r: &ConvergenceReport, lo: f64, hi: f64) -> Result<String, String> {
    let s = r.fitted_slope;
    let line = format!("{}/{}/{} slope {s:.3}", r.case_name, r.scheme_name, r.family);
    if (lo..=hi).contains(&s) {
        Ok(line)
    } else {
        Err(format!("{line} outside [{lo}, {hi}]"))
    }
}

fn coefficient_equivalence() -> Verdict {
    let mut worst: f64 = 0.0;
    for name in ["BWRRK33", "LUSCHER33"] {
        let t = scheme(name).tableau();
        let order3 = classical_order_residuals(&t, 3).max_residual_up_to(3);
        let c = t.c();
        let wc = williamson_constraint_residual(c[1], c[2]);
        let lie = lie_cf3_condition_residual(&t).map_err(|e| e.to_string())?;
        for (what, r) in [("order-3", order3), ("williamson", wc), ("lie-cf3", lie)] {
            ensure(r <= 1e-13, || format!("{name} {what} residual {r:e}"))?;
            worst = worst.max(r);
        }
    }
    Ok(format!("max residual {worst:.1e}"))
}

fn appendix_fidelity() -> Verdict {
    // Butcher coefficients printed for the minimal-error 3-stage scheme.
    let printed = [
        (1, 0, 0.45737999756938819),
        (2, 0, -0.13267640849031470),
        (2, 1, 0.92529641092092174),
    ];
    let printed_b = [0.19546562910003523, 0.41072077622489378, 0.39381359467507099];
    let Scheme::TwoN(s) = scheme("BWRRK33") else {
        return Err("BWRRK33 not stored in 2N form".into());
    };
    let t = to_butcher(&s);
    let mut worst: f64 = 0.0;
    for (i, j, v) in printed {
        worst = worst.max((t.a(i, j) - v).abs());
    }
    for (b, v) in t.b().iter().zip(printed_b) {
        worst = worst.max((b - v).abs());
    }
    ensure(worst <= 1e-14, || format!("to_butcher off by {worst:e}"))?;
    let back = from_butcher(&t).map_err(|e| e.to_string())?;
    let mut inv: f64 = 0.0;
    for (x, y) in back.a().iter().zip(s.a()).chain(back.b().iter().zip(s.b())) {
        inv = inv.max((x - y).abs());
    }
    ensure(inv <= 1e-12, || format!("from_butcher off by {inv:e}"))?;
    Ok(format!("to_butcher {worst:.1e}, round trip {inv:.1e}"))
}

fn declared_orders() -> Verdict {
    let mut parts = Vec::new();
    for (name, need) in [("BWRRK33", 3), ("LUSCHER33", 3), ("TSRKF84", 4), ("YRK135", 5)] {
        let got = classical_order_residuals(&scheme(name).tableau(), 5).satisfied_order;
        ensure(got >= need, || format!("{name} satisfies order {got}, needs {need}"))?;
        parts.push(format!("{name}={got}"));
    }
    Ok(parts.join(" "))
}

fn rigid_reports() -> Vec<(ConvergenceReport, f64, f64)> {
    let grid3 = standard_grid("rigid", 3);
    let grid4 = standard_grid("rigid", 4);
    let grid5 = standard_grid("rigid", 5);
    vec![
        (sweep("rigid", "BWRRK33", Family::LieCf2N, &grid3), 2.85, 3.3),
        (sweep("rigid", "TSRKF84", Family::LieCf2N, &grid4), 3.8, 4.3),
        (sweep("rigid", "YRK135", Family::LieCf2N, &grid5), 4.7, 5.4),
        (sweep("rigid", "LUSCHER33", Family::Rkmk, &grid3), 2.85, 3.3),
        (sweep("rigid", "RALSTON4", Family::Rkmk, &grid4), 3.8, 4.3),
        (sweep("rigid", "BUTCHER65", Family::Rkmk, &grid5), 4.7, 5.4),
    ]
}

fn shipped_reports(case: &str) -> Vec<ConvergenceReport> {
    ["BWRRK33", "TSRKF84", "YRK135"]
        .iter()
        .map(|name| {
            let order = scheme(name).declared_order();
            let grid = if case == "vdp" {
                power_of_two_grid(7, 12)
            } else {
                standard_grid(case, order)
            };
            sweep(case, name, Family::LieCf2N, &grid)
        })
        .collect()
}

fn nominal_band(reports: &[ConvergenceReport]) -> Verdict {
    let mut parts = Vec::new();
    for r in reports {
        let p = r.nominal_order as f64;
        parts.push(in_band(r, p - 0.3, p + 0.3)?);
    }
    Ok(parts.join("; "))
}

fn rigid_scaling(rigid: &[(ConvergenceReport, f64, f64)]) -> Verdict {
    let mut parts = Vec::new();
    for (r, lo, hi) in rigid {
        parts.push(in_band(r, *lo, *hi)?);
    }
    Ok(parts.join("; "))
}

fn vdp_scaling(vdp: &[ConvergenceReport]) -> Verdict {
    for r in vdp {
        ensure(!r.diverged(), || format!("{} diverged on the vdp grid", r.scheme_name))?;
    }
    nominal_band(vdp)
}

fn manifold_preservation(reports: &[&ConvergenceReport]) -> Verdict {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for r in reports {
        let drift = r
            .max_drift()
            .ok_or_else(|| format!("{} has no invariant", r.case_name))?;
        ensure(drift <= 1e-11, || {
            format!("{}/{}/{} drift {drift:e}", r.case_name, r.scheme_name, r.family)
        })?;
        worst = worst.max(drift);
        count += 1;
    }
    Ok(format!("{count} sweeps, max drift {worst:.1e}"))
}

fn negative_control() -> Verdict {
    let case = case_by_name("rigid").unwrap();
    let cfg = StepperConfig::GenericCf(CfCoefficients::low_storage(&scheme("RALSTON3").tableau()));
    let r = run_convergence(case.as_case(), &cfg, &standard_grid("rigid", 3))
        .map_err(|e| e.to_string())?;
    let s = r.fitted_slope;
    ensure(s <= 2.5, || format!("RALSTON3 in CF format reached slope {s:.3}"))?;
    Ok(format!("RALSTON3 low-storage CF slope {s:.3}"))
}

fn rodrigues(w: [f64; 3]) -> RealMatrix {
    let k = hat(w);
    let theta = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    let k2 = &k * &k;
    let mut r = RealMatrix::identity(3);
    r.axpy(theta.sin() / theta, &k);
    r.axpy((1.0 - theta.cos()) / (theta * theta), &k2);
    r
}

fn property_suites() -> Verdict {
    // Constant generator: every Lie method reproduces exp(t A) for any h.
    let k = hat([0.4, -1.1, 0.8]);
    let kk = k.clone();
    let prob = Problem::new("constant", 3, 3, move |_, _: &RealMatrix| kk.clone());
    let exact = expm(&k.scale_real(2.0)).unwrap();
    let mut commuting: f64 = 0.0;
    for name in ["BWRRK33", "TSRKF84", "YRK135"] {
        for family in [Family::LieCf2N, Family::Rkmk, Family::GenericCf] {
            let cfg = StepperConfig::new(&scheme(name), family).unwrap();
            for h in power_of_two_grid(1, 6) {
                let y = integrate(&cfg, &prob, 0.0, 2.0, h, &RealMatrix::identity(3)).unwrap();
                commuting = commuting.max((&y - &exact).max_abs());
            }
        }
    }
    ensure(commuting <= 1e-11, || format!("commuting problem error {commuting:e}"))?;

    // Per-step equivalences on the rigid body.
    let rigid = case_by_name("rigid").unwrap();
    let AnyCase::Real(rigid) = rigid else {
        unreachable!()
    };
    let y0 = rigid.y0().clone();
    let mut classical: f64 = 0.0;
    let mut lie: f64 = 0.0;
    for name in ["BWRRK33", "TSRKF84", "YRK135"] {
        let s = scheme(name);
        let step = |f| {
            StepperConfig::new(&s, f)
                .unwrap()
                .step(rigid.problem(), 0.0, 0.1, &y0)
                .unwrap()
        };
        classical = classical.max((&step(Family::Classical2N) - &step(Family::ClassicalRk)).max_abs());
        lie = lie.max((&step(Family::LieCf2N) - &step(Family::GenericCf)).max_abs());
    }
    ensure(classical <= 1e-13, || format!("2N vs RK step gap {classical:e}"))?;
    ensure(lie <= 1e-13, || format!("lie_cf_2n vs generic_cf step gap {lie:e}"))?;

    // dexpinv truncations against their closed forms.
    let u = RealMatrix::from_rows(&[[0.1, 0.3, -0.2], [0.0, 0.2, 0.5], [-0.4, 0.1, 0.0]]);
    let v = RealMatrix::from_rows(&[[1.0, 0.0, 0.5], [0.2, -0.3, 0.0], [0.0, 0.7, 0.1]]);
    let uv = commutator(&u, &v).unwrap();
    let uuv = commutator(&u, &uv).unwrap();
    let mut two = v.clone();
    two.axpy(-0.5, &uv);
    let mut three = two.clone();
    three.axpy(1.0 / 12.0, &uuv);
    ensure(
        dexpinv(&u, &v, 1).unwrap() == v
            && dexpinv(&u, &v, 2).unwrap() == two
            && dexpinv(&u, &v, 3).unwrap() == three,
        || "dexpinv truncations differ from closed forms".into(),
    )?;

    // expm against Rodrigues.
    let mut rod: f64 = 0.0;
    for w in [[0.3, -0.2, 0.9], [1.5, 2.0, -0.7], [0.0, 0.0, 3.0], [1e-3, 2e-3, -1e-3]] {
        rod = rod.max((&expm(&hat(w)).unwrap() - &rodrigues(w)).max_abs());
    }
    ensure(rod <= 1e-13, || format!("expm vs Rodrigues {rod:e}"))?;

    // Elliptic identities.
    let mut ell: f64 = 0.0;
    for mi in 0..=10 {
        let m = if mi == 10 { 0.99 } else { mi as f64 / 10.0 };
        for ui in -40..=40 {
            let u = ui as f64 / 4.0;
            let j = jacobi_sn_cn_dn(u, m).unwrap();
            ell = ell
                .max((j.sn * j.sn + j.cn * j.cn - 1.0).abs())
                .max((j.dn * j.dn + m * j.sn * j.sn - 1.0).abs());
        }
    }
    ensure(ell <= 1e-13, || format!("elliptic identity defect {ell:e}"))?;

    // Work counts: s rhs calls and s exponentials per lie_cf_2n step.
    for name in ["BWRRK33", "TSRKF84", "YRK135"] {
        let s = scheme(name);
        let cfg = StepperConfig::new(&s, Family::LieCf2N).unwrap();
        let (_, work) =
            integrate_observed(&cfg, rigid.problem(), 0.0, 1.0, 0.25, &y0, |_, _| {}).unwrap();
        let n = s.stages();
        ensure(
            work == Work {
                rhs_evals: 4 * n,
                exponentials: 4 * n,
                steps: 4,
            },
            || format!("{name} work {work:?}"),
        )?;
    }
    Ok(format!(
        "commuting {commuting:.1e}, 2N/RK {classical:.1e}, CF {lie:.1e}, Rodrigues {rod:.1e}, elliptic {ell:.1e}"
    ))
}

fn conjecture_gate() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_liecf");
    let run = |args: &[&str]| {
        Command::new(bin)
            .args(args)
            .output()
            .map_err(|e| format!("could not run liecf: {e}"))
    };
    for name in ["BWRRK33", "TSRKF84", "YRK135"] {
        let out = run(&["conjecture", "--scheme", name])?;
        ensure(out.status.success(), || {
            format!(
                "liecf conjecture --scheme {name} failed:\n{}",
                String::from_utf8_lossy(&out.stdout)
            )
        })?;
        let passes = String::from_utf8_lossy(&out.stdout).matches("PASS").count();
        ensure(passes == 5, || format!("{name}: {passes} of 5 cases passed"))?;
    }
    let out = run(&["conjecture", "--scheme", "RALSTON3"])?;
    ensure(out.status.code() == Some(1), || {
        format!("RALSTON3 exit status {:?}, expected 1", out.status.code())
    })?;
    Ok("3 shipped schemes pass on 5 cases; RALSTON3 exits 1".into())
}

fn main() -> ExitCode {
    let rigid = rigid_reports();
    let so5 = shipped_reports("so5");
    let su3 = shipped_reports("su3");
    let so3t = shipped_reports("so3t");
    let vdp = shipped_reports("vdp");
    let mut others = so5.clone();
    others.extend(su3.iter().cloned());
    others.extend(so3t.iter().cloned());
    let lie_sweeps: Vec<&ConvergenceReport> =
        rigid.iter().map(|(r, _, _)| r).chain(&others).collect();

    let results: Vec<(u32, &str, Verdict)> = vec![
        (1, "coefficient equivalence", coefficient_equivalence()),
        (2, "appendix fidelity", appendix_fidelity()),
        (3, "declared orders", declared_orders()),
        (4, "rigid body scaling", rigid_scaling(&rigid)),
        (5, "so5/su3/so3t scaling", nominal_band(&others)),
        (6, "van der Pol scaling", vdp_scaling(&vdp)),
        (7, "manifold preservation", manifold_preservation(&lie_sweeps)),
        (8, "negative control", negative_control()),
        (9, "property suites", property_suites()),
        (10, "conjecture gate", conjecture_gate()),
    ];
    let mut failed = 0;
    for (id, title, verdict) in &results {
        match verdict {
            Ok(detail) => println!("PASS criterion {id:>2} {title}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {id:>2} {title}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
