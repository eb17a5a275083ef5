//! Acceptance criteria. Prints one PASS or FAIL line per criterion followed
//! by a summary. Exits non-zero on any failure when `SFWG_ACCEPTANCE_STRICT`
//! is set.

mod common;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::DMatrix;
use sfwg::cases::case_catalog;
use sfwg::mesh::{generate_rectangular, MeshFamily, Point2};
use sfwg::norms::{
    error_vs_projection, interior_l2_error, norm_0h, observed_rate, triple_norm, triple_norm_1, vstar, b_form, ErrorNorm,
};
use sfwg::solver::{
    assemble_saddle, mean_value_check, solve_biharmonic, solve_neumann_projection, solve_ritz_projection, Discretization,
    SolverOptions,
};
use sfwg::space::WeakFunction;
use sfwg::study::{run_study, StudyConfig, StudyReport};
use sfwg::weak_gradient::{apply_weak_gradient, check_grad_ex, check_grad_ex_with};

const FAMILIES: [MeshFamily; 3] = [MeshFamily::Tri, MeshFamily::Rect, MeshFamily::Poly];

/// Collects sub-check results of one criterion.
#[derive(Default)]
struct Checks {
    pass: bool,
    notes: String,
}

impl Checks {
    fn new() -> Self {
        Self {
            pass: true,
            notes: String::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl std::fmt::Display) {
        self.pass &= ok;
        let _ = write!(self.notes, "\n    [{}] {what}", if ok { "ok" } else { "FAILED" });
    }

    fn note(&mut self, what: impl std::fmt::Display) {
        let _ = write!(self.notes, "\n    [info] {what}");
    }
}

fn study(case: u8, mesh: MeshFamily, k: usize, levels: &[usize]) -> StudyReport {
    let report = run_study(&StudyConfig::new(case, mesh, k, levels.to_vec())).expect("valid study");
    assert!(report.failures.is_empty(), "levels failed: {:?}", report.failures);
    report
}

fn rate(report: &StudyReport, n: usize, q: usize) -> f64 {
    report.row(n).and_then(|r| r.rates).map(|r| r[q]).expect("rate row")
}

fn within(c: &mut Checks, label: &str, observed: f64, target: f64, tol: f64) {
    c.check((observed - target).abs() <= tol, format!("{label}: {observed:.3} vs {target} +/- {tol}"));
}

fn at_least(c: &mut Checks, label: &str, observed: f64, bound: f64) {
    c.check(observed >= bound, format!("{label}: {observed:.3} >= {bound}"));
}

const PHI_L2: usize = 2;
const U_ENERGY: usize = 1;
const U_L2: usize = 3;

fn monotone(c: &mut Checks, report: &StudyReport) {
    let ok = report.rows.windows(2).all(|w| {
        let (a, b) = (w[0].errors(), w[1].errors());
        (0..4).all(|q| b[q] < a[q])
    });
    c.check(ok, "every error column decreases");
}

fn criterion_1() -> Checks {
    let mut c = Checks::new();
    let r = study(1, MeshFamily::Tri, 2, &[8, 16, 32]);
    within(&mut c, "u-energy rate n=32", rate(&r, 32, U_ENERGY), 2.0, 0.2);
    within(&mut c, "u-L2 rate n=32", rate(&r, 32, U_L2), 3.0, 0.2);
    within(&mut c, "phi-L2 rate n=32", rate(&r, 32, PHI_L2), 1.5, 0.2);
    let e = r.row(16).unwrap().e_u_l2;
    let ratio = e / 4.1789e-7;
    c.check((1.0 / 3.0..=3.0).contains(&ratio), format!("u-L2 error n=16: {e:.4e} vs 4.1789e-7 (ratio {ratio:.3})"));
    monotone(&mut c, &r);
    c
}

fn criterion_2() -> Checks {
    let mut c = Checks::new();
    let r = study(2, MeshFamily::Tri, 3, &[8, 16]);
    within(&mut c, "u-energy rate n=16", rate(&r, 16, U_ENERGY), 3.0, 0.2);
    within(&mut c, "u-L2 rate n=16", rate(&r, 16, U_L2), 4.0, 0.25);
    monotone(&mut c, &r);
    c
}

fn criterion_3() -> Checks {
    let mut c = Checks::new();
    let r = study(2, MeshFamily::Rect, 2, &[8, 16, 32]);
    within(&mut c, "u-energy rate n=32", rate(&r, 32, U_ENERGY), 2.0, 0.2);
    within(&mut c, "phi-L2 rate n=32", rate(&r, 32, PHI_L2), 1.5, 0.2);
    monotone(&mut c, &r);
    c
}

fn criterion_4() -> Checks {
    let mut c = Checks::new();
    for case in [1, 3] {
        let r = study(case, MeshFamily::Poly, 2, &[4, 8, 16]);
        for n in [8, 16] {
            at_least(&mut c, &format!("example {case} u-energy rate n={n}"), rate(&r, n, U_ENERGY), 1.8);
            at_least(&mut c, &format!("example {case} u-L2 rate n={n}"), rate(&r, n, U_L2), 2.6);
        }
    }
    for (case, table) in [(1, 3), (3, 8)] {
        let r = study(case, MeshFamily::Poly, 2, &[16, 32]);
        let reference = sfwg::reference::reference_table(table).unwrap();
        let printed = reference.row(2, 32).unwrap().rates;
        c.note(format!(
            "example {case} n=32: u-energy rate {:.2}, u-L2 rate {:.2} (table {table} prints {:.2}, {:.2})",
            rate(&r, 32, U_ENERGY),
            rate(&r, 32, U_L2),
            printed[U_ENERGY].unwrap(),
            printed[U_L2].unwrap()
        ));
    }
    c
}

type Scalar = fn(Point2) -> f64;

fn projection_rates(c: &mut Checks, label: &str, v: Scalar, lap: Scalar, neumann: bool) {
    let mut l2 = Vec::new();
    let mut energy = Vec::new();
    for n in [8, 16, 32] {
        let mesh = MeshFamily::Tri.generate(n).unwrap();
        let disc = Discretization::new(&mesh, 2, SolverOptions::default()).unwrap();
        let p = if neumann {
            let p = solve_neumann_projection(&disc, &lap, &|_, _| 0.0).unwrap();
            let mean = p.interior_integral(&disc.mesh, &disc.dofs).unwrap();
            c.check(mean.abs() <= 1e-10, format!("{label} n={n}: mean {mean:.1e}"));
            p
        } else {
            solve_ritz_projection(&disc, &lap).unwrap()
        };
        l2.push(interior_l2_error(&disc, v, &p).unwrap());
        energy.push(error_vs_projection(&disc, v, &p, ErrorNorm::Energy).unwrap());
    }
    for i in 1..3 {
        let n = 8 << i;
        at_least(c, &format!("{label} L2 rate n={n}"), observed_rate(l2[i - 1], l2[i]).unwrap(), 2.8);
        at_least(c, &format!("{label} energy rate n={n}"), observed_rate(energy[i - 1], energy[i]).unwrap(), 1.8);
    }
}

fn criterion_5() -> Checks {
    let mut c = Checks::new();
    projection_rates(
        &mut c,
        "Ritz sin sin",
        |p| (PI * p.x).sin() * (PI * p.y).sin(),
        |p| 2.0 * PI * PI * (PI * p.x).sin() * (PI * p.y).sin(),
        false,
    );
    projection_rates(
        &mut c,
        "Neumann cos cos",
        |p| (PI * p.x).cos() * (PI * p.y).cos(),
        |p| 2.0 * PI * PI * (PI * p.x).cos() * (PI * p.y).cos(),
        true,
    );
    c
}

fn random_weak(disc: &Discretization, seed: u64, interior_only: bool) -> WeakFunction {
    let mut v = WeakFunction::from_coeffs(&disc.dofs, common::pseudo_random(disc.dofs.n_all(), seed)).unwrap();
    if interior_only {
        for g in 0..v.coeffs.len() {
            if disc.dofs.is_boundary_dof(g) {
                v.coeffs[g] = 0.0;
            }
        }
    }
    v
}

fn criterion_6() -> Checks {
    let mut c = Checks::new();
    let discs: Vec<Discretization> = FAMILIES
        .iter()
        .flat_map(|f| {
            [2usize, 4].map(|n| Discretization::new(&f.generate(n).unwrap(), 2, SolverOptions::default()).unwrap())
        })
        .collect();

    let mut kernel: f64 = 0.0;
    let mut reproduction: f64 = 0.0;
    for disc in &discs {
        let one = WeakFunction::constant(&disc.dofs, 1.0);
        for (t, op) in disc.gradients.iter().enumerate() {
            kernel = kernel.max(apply_weak_gradient(op, &one.local(&disc.dofs, &disc.mesh, t)).unwrap().amax());
        }
        for d in 0..=2 {
            for a in 0..=d {
                let b = d - a;
                let p = move |q: Point2| q.x.powi(a as i32) * q.y.powi(b as i32);
                let qh = WeakFunction::project(&disc.mesh, &disc.dofs, p).unwrap();
                for (t, op) in disc.gradients.iter().enumerate() {
                    let g = apply_weak_gradient(op, &qh.local(&disc.dofs, &disc.mesh, t)).unwrap();
                    let vb = op.basis();
                    for &q in &disc.quadrature[t].cell.points {
                        let w = vb.evaluate(g.as_slice(), q);
                        let dx = if a > 0 { a as f64 * q.x.powi(a as i32 - 1) * q.y.powi(b as i32) } else { 0.0 };
                        let dy = if b > 0 { b as f64 * q.x.powi(a as i32) * q.y.powi(b as i32 - 1) } else { 0.0 };
                        reproduction = reproduction.max((w[0] - dx).abs()).max((w[1] - dy).abs());
                    }
                }
            }
        }
    }
    c.check(kernel <= 1e-12, format!("weak gradient of constants: {kernel:.1e} <= 1e-12"));
    c.check(reproduction <= 1e-11, format!("weak gradient reproduces grad P_k: {reproduction:.1e} <= 1e-11"));

    let mut poly_dev: f64 = 0.0;
    for disc in &discs {
        for t in 0..disc.mesh.n_elements() {
            let d = check_grad_ex(&disc.mesh, t, 2, |p| p.x * p.x * p.y, |p| [2.0 * p.x * p.y, p.x * p.x]).unwrap();
            poly_dev = poly_dev.max(d);
        }
    }
    c.check(poly_dev <= 1e-11, format!("gradEX x^2 y: {poly_dev:.1e} <= 1e-11"));
    let square = generate_rectangular(1).unwrap();
    let sin_dev = check_grad_ex(
        &square,
        0,
        2,
        |p| (PI * p.x).sin() * (PI * p.y).sin(),
        |p| [PI * (PI * p.x).cos() * (PI * p.y).sin(), PI * (PI * p.x).sin() * (PI * p.y).cos()],
    )
    .unwrap();
    c.check(sin_dev <= 1e-8, format!("gradEX sin sin on unit square, exactness 2j+2: {sin_dev:.1e} <= 1e-8"));
    let finer = check_grad_ex_with(
        &square,
        0,
        2,
        |p| (PI * p.x).sin() * (PI * p.y).sin(),
        |p| [PI * (PI * p.x).cos() * (PI * p.y).sin(), PI * (PI * p.x).sin() * (PI * p.y).cos()],
        14,
    )
    .unwrap();
    c.note(format!("gradEX sin sin on unit square, exactness 2j+4: {finer:.1e}"));

    let (mut ident, mut star): (f64, f64) = (0.0, 0.0);
    for disc in discs.iter().step_by(2) {
        let a = disc.assemble_a();
        let b = disc.assemble_b_full();
        let quad = |m: &sfwg::linalg::CscMatrix, v: &WeakFunction| -> f64 {
            m.mul_vec(&v.coeffs).iter().zip(&v.coeffs).map(|(x, y)| x * y).sum()
        };
        for s in 0..20 {
            let v = random_weak(disc, s, false);
            let (av, bv) = (quad(&a, &v), quad(&b, &v));
            ident = ident
                .max((norm_0h(disc, &v).unwrap().powi(2) - av).abs() / av)
                .max((triple_norm(disc, &v).unwrap().powi(2) - bv).abs() / bv);
        }
        for s in 0..50 {
            let psi = random_weak(disc, 500 + s, true);
            let lhs = b_form(disc, &vstar(disc, &psi).unwrap(), &psi).unwrap();
            let rhs = triple_norm_1(disc, &psi).unwrap().powi(2);
            star = star.max((lhs - rhs).abs() / rhs);
        }
    }
    c.check(ident <= 1e-12, format!("norms equal bilinear forms: {ident:.1e} <= 1e-12"));
    c.check(star <= 1e-9, format!("v* identity over 150 samples: {star:.1e} <= 1e-9"));

    let mut symmetric = true;
    let mut mean: [f64; 3] = [0.0; 3];
    for disc in discs.iter().skip(1).step_by(2) {
        for case in case_catalog() {
            symmetric &= assemble_saddle(disc, &case).unwrap().matrix.is_symmetric();
            let sol = solve_biharmonic(disc, &case).unwrap();
            let m = &mut mean[case.id as usize - 1];
            *m = m.max(mean_value_check(disc, &sol, case.boundary_flux).unwrap());
        }
    }
    c.check(symmetric, "saddle matrices are exactly symmetric");
    c.check(mean[0] <= 1e-9, format!("mean value, example 1: {:.1e} <= 1e-9", mean[0]));
    c.check(mean[1] <= 1e-8, format!("mean value, example 2: {:.1e} <= 1e-8", mean[1]));
    c.check(mean[2] <= 1e-8, format!("mean value, example 3: {:.1e} <= 1e-8", mean[2]));

    let mut oracle: f64 = 0.0;
    for family in FAMILIES {
        for k in [2, 3] {
            let mesh = family.generate(2).unwrap();
            let disc = Discretization::new(&mesh, k, SolverOptions::default()).unwrap();
            let o = common::Oracle::new(&mesh, k);
            let rel = |x: DMatrix<f64>, y: &DMatrix<f64>| common::max_abs(&(x - y)) / common::max_abs(y);
            oracle = oracle.max(rel(disc.assemble_a().to_dense(), &o.a)).max(rel(disc.assemble_b_full().to_dense(), &o.b));
        }
    }
    c.check(oracle <= 1e-11, format!("dense oracle assembly, n=2, k=2,3: {oracle:.1e} <= 1e-11"));
    c
}

fn criterion_7() -> Checks {
    let mut c = Checks::new();
    let mut worst: f64 = 0.0;
    for family in FAMILIES {
        for case in 1..=3 {
            worst = worst.max(common::permuted_difference(family, 4, case));
        }
    }
    c.check(worst <= 1e-10, format!("element permutation, n=4, all examples: {worst:.1e} <= 1e-10"));

    let run = || {
        Command::new(env!("CARGO_BIN_EXE_sfwg"))
            .args(["run", "--case", "3", "--mesh", "tri", "--levels", "4,8"])
            .output()
            .expect("cli runs")
    };
    let (a, b) = (run(), run());
    c.check(
        a.status.success() && b.status.success() && !a.stdout.is_empty() && a.stdout == b.stdout,
        "repeated CLI runs are byte-identical",
    );
    c
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Checks); 7] = [
        ("Table 1 reproduction (example 1, triangular, k=2)", criterion_1),
        ("Table 4 reproduction (example 2, triangular, k=3)", criterion_2),
        ("Table 5 reproduction (example 2, rectangular, k=2)", criterion_3),
        ("Polygonal rates (examples 1 and 3, k=2, n=4..16)", criterion_4),
        ("Ritz and Neumann projection rates", criterion_5),
        ("Structural identity suite", criterion_6),
        ("Uniqueness and determinism", criterion_7),
    ];
    let mut passed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let c = f();
        let status = if c.pass { "PASS" } else { "FAIL" };
        println!("{status} criterion {}: {name} ({:.1} s){}", i + 1, start.elapsed().as_secs_f64(), c.notes);
        passed += c.pass as usize;
    }
    println!("acceptance: {passed} of {} criteria pass", criteria.len());
    if passed < criteria.len() && std::env::var_os("SFWG_ACCEPTANCE_STRICT").is_some() {
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
