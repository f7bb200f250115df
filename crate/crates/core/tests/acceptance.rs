//! Acceptance checks. Runs every criterion, prints one PASS/FAIL line each,
//! and exits with failure if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use swarm_ocp::driver::{solve_scenario, write_artifacts};
use swarm_ocp::fem::{
    assemble_advection, assemble_mass, assemble_reaction_tensor, assemble_transport_tensors, element_mass,
    element_stiffness, element_transport, element_triple, AssembledOperators, Physics,
};
use swarm_ocp::flow::{sample_at_nodes, FlowField, DEFAULT_AMPLITUDE};
use swarm_ocp::forward::{total_mass, Stepper};
use swarm_ocp::mesh::{signed_area, BoundarySpec, Mesh};
use swarm_ocp::ocp::{
    adjoint_inner_product_test, fd_gradient_check, linearization_errors, observed_orders, random_control, CostWeights,
    OcpProblem,
};
use swarm_ocp::optimizer::{minimize, OptimizeOptions, Termination};
use swarm_ocp::output::parse_vtk_scalars;
use swarm_ocp::scenario::{Preset, Scenario};
use swarm_ocp::series::TimeGrid;

type Check = Result<String, String>;

fn small_ops() -> AssembledOperators {
    let mesh = Mesh::unit_square(4, 4).unwrap().tag_boundary(&BoundarySpec::default()).mesh;
    let flow = sample_at_nodes(&mesh, &FlowField::DoubleGyre { amplitude: DEFAULT_AMPLITUDE }).unwrap();
    let physics = Physics {
        diffusion_q: 0.01,
        diffusion_s: 0.01,
        source_value: 10.0,
    };
    AssembledOperators::assemble(&mesh, &physics, &flow).unwrap()
}

fn small_problem(ops: &AssembledOperators) -> OcpProblem<'_> {
    let n = ops.n_nodes();
    let m = total_mass(&vec![1.0; n], &ops.mass).unwrap();
    OcpProblem::new(
        ops,
        TimeGrid::new(1.5, 5).unwrap(),
        vec![1.0 / m; n],
        ops.dirichlet.prescribed().to_vec(),
        vec![0.0; n],
        CostWeights::default(),
    )
    .unwrap()
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    if elapsed < limit {
        Ok(())
    } else {
        Err(format!("took {elapsed:.2?}, limit {limit:?}"))
    }
}

fn gradient_exactness() -> Check {
    let t = Instant::now();
    let ops = small_ops();
    let p = small_problem(&ops);
    let ctrl = random_control(5, ops.n_nodes(), 1.0, &mut ChaCha8Rng::seed_from_u64(11));
    let fd = fd_gradient_check(&p, &ctrl, 20, 1e-4, 12).map_err(|e| e.to_string())?;
    within(t.elapsed(), Duration::from_secs(10))?;
    let msg = format!("max rel error {:.2e} over 20 directions in {:.2?}", fd.max_rel_error, t.elapsed());
    if fd.max_rel_error <= 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn adjoint_duality() -> Check {
    let t = Instant::now();
    let ops = small_ops();
    let p = small_problem(&ops);
    let ctrl = random_control(5, ops.n_nodes(), 1.0, &mut ChaCha8Rng::seed_from_u64(21));
    let r = adjoint_inner_product_test(&p, &ctrl, 10, 22).map_err(|e| e.to_string())?;
    within(t.elapsed(), Duration::from_secs(5))?;
    let msg = format!("max rel residual {r:.2e} over 10 trials");
    if r <= 1e-11 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn mass_conservation() -> Check {
    let scenario = Scenario::preset(Preset::Testcase1);
    let setup = scenario.build().map_err(|e| e.to_string())?;
    let p = setup.problem(scenario.weights).map_err(|e| e.to_string())?;
    let n = setup.mesh.n_nodes();
    let ctrl = random_control(setup.grid.steps(), n, 1.0, &mut ChaCha8Rng::seed_from_u64(31));
    let state = p.solve(&ctrl).map_err(|e| e.to_string())?;
    let mut drift: f64 = 0.0;
    for row in state.q.iter_rows() {
        drift = drift.max((total_mass(row, &setup.ops.mass).unwrap() - 1.0).abs());
    }
    let st = Stepper::new(&setup.ops, &setup.grid).map_err(|e| e.to_string())?;
    let m_dt = setup.ops.mass.scaled(1.0 / setup.grid.dt());
    let mut colsum: f64 = 0.0;
    for m in 0..setup.grid.steps() {
        let k = st.q_matrix(ctrl.ux.row(m), ctrl.uy.row(m)).unwrap();
        let op = k.lin_comb(1.0, &m_dt, -1.0).unwrap();
        colsum = colsum.max(op.col_sums().iter().fold(0.0, |a, v| a.max(v.abs())));
    }
    let msg = format!("mass drift {drift:.2e}, operator column sums {colsum:.2e}");
    if drift <= 1e-10 && colsum <= 1e-13 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Four-point Gauss-Legendre rule on [0, 1].
fn gauss01() -> [(f64, f64); 4] {
    let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
    let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
    let wa = (18.0 + 30f64.sqrt()) / 36.0;
    let wb = (18.0 - 30f64.sqrt()) / 36.0;
    [(-b, wb), (-a, wa), (a, wa), (b, wb)].map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
}

/// Linear basis coefficients `φ_i = c0 + c1 x + c2 y` from the Vandermonde
/// system, solved by Cramer's rule.
fn basis(v: &[[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let det3 = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let vand = [
        [1.0, v[0][0], v[0][1]],
        [1.0, v[1][0], v[1][1]],
        [1.0, v[2][0], v[2][1]],
    ];
    let d = det3(vand);
    let mut out = [[0.0; 3]; 3];
    for (i, coeffs) in out.iter_mut().enumerate() {
        for (c, coeff) in coeffs.iter_mut().enumerate() {
            let mut m = vand;
            for (r, row) in m.iter_mut().enumerate() {
                row[c] = if r == i { 1.0 } else { 0.0 };
            }
            *coeff = det3(m) / d;
        }
    }
    out
}

/// Integrates `f(φ values, x, y)` over the triangle with a collapsed
/// tensor-product Gauss rule.
fn integrate(v: &[[f64; 2]; 3], f: impl Fn([f64; 3]) -> f64) -> f64 {
    let c = basis(v);
    let jac = 2.0 * signed_area(v).abs();
    let mut sum = 0.0;
    for (u, wu) in gauss01() {
        for (s, ws) in gauss01() {
            let (r, t) = (u, s * (1.0 - u));
            let x = v[0][0] + r * (v[1][0] - v[0][0]) + t * (v[2][0] - v[0][0]);
            let y = v[0][1] + r * (v[1][1] - v[0][1]) + t * (v[2][1] - v[0][1]);
            let phi = [0, 1, 2].map(|i| c[i][0] + c[i][1] * x + c[i][2] * y);
            sum += wu * ws * (1.0 - u) * jac * f(phi);
        }
    }
    sum
}

fn element_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst: f64 = 0.0;
    let mut tested = 0;
    while tested < 20 {
        let v: [[f64; 2]; 3] = [0; 3].map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]);
        if signed_area(&v).abs() < 0.02 {
            continue;
        }
        tested += 1;
        let c = basis(&v);
        let grad = |i: usize, d: usize| c[i][1 + d];
        let err = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
        let (m, k, tri) = (element_mass(&v), element_stiffness(&v), element_triple(&v));
        let tr = [element_transport(&v, 0), element_transport(&v, 1)];
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max(err(m[i][j], integrate(&v, |p| p[i] * p[j])));
                let kij = integrate(&v, |_| grad(i, 0) * grad(j, 0) + grad(i, 1) * grad(j, 1));
                worst = worst.max(err(k[i][j], kij));
                for l in 0..3 {
                    worst = worst.max(err(tri[i][j][l], integrate(&v, |p| p[i] * p[j] * p[l])));
                    for (d, t) in tr.iter().enumerate() {
                        worst = worst.max(err(t[i][j][l], integrate(&v, |p| grad(j, d) * p[i] * p[l])));
                    }
                }
            }
        }
        let a = signed_area(&v).abs();
        for (ijk, expect) in [([0, 0, 0], a / 10.0), ([0, 0, 1], a / 30.0), ([0, 1, 2], a / 60.0)] {
            worst = worst.max(err(tri[ijk[0]][ijk[1]][ijk[2]], expect));
        }
    }
    let msg = format!("max rel deviation {worst:.2e} on 20 random triangles");
    if worst <= 1e-13 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn tensor_identities() -> Check {
    let mesh = Mesh::unit_square(8, 8).unwrap();
    let m = assemble_mass(&mesh);
    let c = assemble_reaction_tensor(&mesh);
    let (bx, by) = assemble_transport_tensors(&mesh);
    let n = mesh.n_nodes();
    let c_sum = c.sum_over(2).max_abs_diff(&m);
    let b_sum = bx.sum_over(1).max_abs().max(by.sum_over(1).max_abs());
    let ones = vec![1.0; n];
    let ax = assemble_advection(&mesh, &vec![[1.0, 0.0]; n]).unwrap();
    let ay = assemble_advection(&mesh, &vec![[0.0, 1.0]; n]).unwrap();
    let contr = bx
        .contract(&ones)
        .unwrap()
        .max_abs_diff(&ax)
        .max(by.contract(&ones).unwrap().max_abs_diff(&ay));
    let msg = format!("|ΣC - M| {c_sum:.1e}, |ΣB| {b_sum:.1e}, |B·1 - B_F| {contr:.1e}");
    if c_sum <= 1e-14 && b_sum <= 1e-14 && contr <= 1e-14 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn masses(out: &swarm_ocp::driver::RunOutcome) -> (Vec<f64>, Vec<f64>) {
    (
        out.mass_series(&out.controlled().s).unwrap(),
        out.mass_series(&out.uncontrolled.s).unwrap(),
    )
}

fn testcase2() -> Check {
    let t = Instant::now();
    let scenario = Scenario::preset(Preset::Testcase2);
    let out = solve_scenario(&scenario).map_err(|e| e.to_string())?;
    let (ctl, unc) = masses(&out);
    let times = out.times();
    let steps = times.len() - 1;
    let tail: Vec<usize> = (steps - steps / 3..=steps).collect();
    let decreasing = unc.windows(2).all(|w| w[1] < w[0]);

    let xs: Vec<f64> = tail.iter().map(|&i| times[i]).collect();
    let ys: Vec<f64> = tail.iter().map(|&i| unc[i].ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);

    let dev = |m: &[f64]| tail.iter().map(|&i| (m[i] - m[0]).abs()).sum::<f64>() / k;
    let ratio = dev(&ctl) / dev(&unc);
    within(t.elapsed(), Duration::from_secs(300))?;
    let msg = format!(
        "uncontrolled decreasing: {decreasing}, tail R² {r2:.4}, deviation ratio {ratio:.3} in {:.2?}",
        t.elapsed()
    );
    if decreasing && r2 >= 0.99 && ratio <= 0.5 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn testcase1() -> Check {
    let t = Instant::now();
    let scenario = Scenario::preset(Preset::Testcase1);
    let out = solve_scenario(&scenario).map_err(|e| e.to_string())?;
    let (ctl, unc) = masses(&out);
    let ratio = ctl.last().unwrap() / unc.last().unwrap();
    let (j0, j) = (out.cost_zero, out.report.final_cost());
    within(t.elapsed(), Duration::from_secs(300))?;
    let msg = format!("m_S(T) ratio {ratio:.3}, J {j:.4e} vs J(0) {j0:.4e} in {:.2?}", t.elapsed());
    if ratio <= 0.5 && j < j0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn optimizer_contract() -> Check {
    let monotone = |h: &[swarm_ocp::optimizer::IterRecord]| h.windows(2).all(|w| w[1].cost <= w[0].cost);
    let mut runs = 0;
    for preset in [Preset::Testcase1, Preset::Testcase2] {
        let mut s = Scenario::preset(preset);
        s.seed = Some(51);
        s.optimizer.max_iters = 30;
        let out = solve_scenario(&s).map_err(|e| e.to_string())?;
        if !monotone(&out.report.history) {
            return Err(format!("{}: J increased along accepted iterates", s.name));
        }
        runs += 1;
    }

    let mut s = Scenario::preset(Preset::Testcase1);
    s.weights = CostWeights::new(0.0, 0.0, 0.1, 0.1).unwrap();
    let setup = s.build().map_err(|e| e.to_string())?;
    let p = setup.problem(s.weights).map_err(|e| e.to_string())?;
    let c0 = random_control(setup.grid.steps(), setup.mesh.n_nodes(), 1.0, &mut ChaCha8Rng::seed_from_u64(52));
    let opts = OptimizeOptions {
        max_iters: 200,
        grad_tol: 1e-10,
        ..OptimizeOptions::default()
    };
    let rep = minimize(&p, &c0, &opts).map_err(|e| e.to_string())?;
    let norm = rep.control.norm();
    let msg = format!(
        "{} runs monotone; Tikhonov-only ‖ctrl‖ {norm:.2e} after {} iterations",
        runs + 1,
        rep.history.len() - 1
    );
    if monotone(&rep.history) && norm <= 1e-6 && rep.termination == Termination::Converged {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn linearization_order() -> Check {
    let ops = small_ops();
    let p = small_problem(&ops);
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let ctrl = random_control(5, ops.n_nodes(), 1.0, &mut rng);
    let dir = random_control(5, ops.n_nodes(), 1.0, &mut rng);
    let errs = linearization_errors(&p, &ctrl, &dir, &[1e-2, 1e-3, 1e-4, 1e-5]).map_err(|e| e.to_string())?;
    let orders = observed_orders(&errs);
    let min = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let msg = format!("observed orders {:?}", orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>());
    if min >= 0.9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn box_bound() -> Check {
    let mut s = Scenario::preset(Preset::Testcase1);
    s.optimizer.box_u = Some(1.0);
    s.output.snapshot_times = (0..=15).map(|l| 0.1 * l as f64).collect();
    let out = solve_scenario(&s).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let files = write_artifacts(&s, &out, dir.path()).map_err(|e| e.to_string())?;
    let mut max: f64 = 0.0;
    let mut snapshots = 0;
    for f in files.iter().filter(|f| f.extension().is_some_and(|e| e == "vtk")) {
        let text = std::fs::read_to_string(f).map_err(|e| e.to_string())?;
        let fields = parse_vtk_scalars(&text).map_err(|e| e.to_string())?;
        let u = fields.iter().find(|f| f.0 == "u_mag").ok_or("missing u_mag")?;
        max = u.1.iter().fold(max, |m, v| m.max(*v));
        snapshots += 1;
    }
    let msg = format!("max |u| {max:.6} over {snapshots} snapshots (bound √2)");
    if snapshots == 16 && max <= 2f64.sqrt() + 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("gradient exactness", gradient_exactness),
        ("adjoint duality", adjoint_duality),
        ("swarm mass conservation", mass_conservation),
        ("element oracles", element_oracles),
        ("tensor identities", tensor_identities),
        ("tracking test case", testcase2),
        ("regulation test case", testcase1),
        ("optimizer contract", optimizer_contract),
        ("linearization order", linearization_order),
        ("box-bound visibility", box_bound),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(msg) => println!("criterion {:>2} {name}: PASS ({msg})", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({msg})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
