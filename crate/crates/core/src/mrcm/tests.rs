use super::*;
use crate::decomposition::decompose;
use crate::grid::StructuredGrid;

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn heterogeneous(dims: [usize; 3], seed: u64) -> PermeabilityField<f64> {
    let g = StructuredGrid::new(dims, [dims[0] as f64, dims[1] as f64 * 0.5, dims[2] as f64 * 2.0]).unwrap();
    PermeabilityField::generate_channel_field(seed, g, 1e3).unwrap()
}

fn setup(
    k: &PermeabilityField<f64>,
    counts: [usize; 3],
    coarsening: [usize; 3],
    alpha: f64,
) -> (DomainDecomposition<f64>, InterfaceSpace, RobinParams<f64>) {
    let dd = decompose(k.grid(), counts).unwrap();
    let space = InterfaceSpace::new(&dd, coarsening).unwrap();
    let robin = compute_robin_params(&dd, k, alpha).unwrap();
    (dd, space, robin)
}

#[test]
fn fine_interface_space_reproduces_fine_solution() {
    let k = heterogeneous([8, 4, 4], 3);
    let g = *k.grid();
    let bc = linear_drive(g.dims(), 0, 1.0, 0.0);
    let f = CellField::from_fn(g, |c| if c == 9 { 0.3 } else { 0.0 });
    let fine = solve_fine(&k, &bc, &f, FineSolver::Direct, DEFAULT_FINE_CAP).unwrap();
    for alpha in [1e-2, 1.0, 1e2] {
        let (dd, space, robin) = setup(&k, [2, 2, 2], [1, 1, 1], alpha);
        let problem = MrcmProblem::new(&k, &bc, &f, &dd, &space, &robin).unwrap();
        let sol = solve_mrcm(&problem, &WorkerPool::serial()).unwrap();
        assert!(rel_diff(sol.pressure.values(), fine.pressure.values()) < 1e-9, "alpha {alpha}");
        for a in 0..3 {
            assert!(rel_diff(sol.velocity.axis(a), fine.velocity.axis(a)) < 1e-9 || fine.velocity.axis(a).iter().all(|v| v.abs() < 1e-14));
        }
        assert!(sol.interface_residual < 1e-10);
    }
}

#[test]
fn homogeneous_data_gives_zero_particular_solution() {
    let k = heterogeneous([4, 4, 2], 1);
    let g = *k.grid();
    let bc = BoundarySpec::uniform(g.dims(), FaceCondition::Dirichlet(0.0));
    let f = CellField::zeros(g);
    let (dd, space, robin) = setup(&k, [2, 2, 1], [2, 2, 2], 1.0);
    let problem = MrcmProblem::new(&k, &bc, &f, &dd, &space, &robin).unwrap();
    for l in 0..dd.subdomain_count() {
        let set = compute_mbfs(&problem, l).unwrap();
        assert!(set.pressures[0].iter().all(|&v| v == 0.0));
        assert_eq!(set.solves(), 2 * space.active(l).len() + 1);
    }
    let sol = solve_mrcm(&problem, &WorkerPool::serial()).unwrap();
    assert!(sol.pressure.max_abs() == 0.0 && sol.velocity.max_abs() == 0.0);
}

#[test]
fn interior_subdomain_solves_thirteen_problems() {
    let g = StructuredGrid::new([6, 6, 6], [6.0; 3]).unwrap();
    let k = PermeabilityField::homogeneous(g, [1.0; 3]).unwrap();
    let bc = linear_drive(g.dims(), 0, 1.0, 0.0);
    let f = CellField::zeros(g);
    let (dd, space, robin) = setup(&k, [3, 3, 3], [2, 2, 2], 1.0);
    let problem = MrcmProblem::new(&k, &bc, &f, &dd, &space, &robin).unwrap();
    assert_eq!(compute_mbfs(&problem, 13).unwrap().solves(), 13);
}

/// Dense Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let m = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= m * a[c][k];
            }
            b[r] -= m * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

#[test]
fn two_subdomain_interface_matches_dense_oracle() {
    // 4x2x1 grid split along x: one basis on the single 2x1 patch
    let g = StructuredGrid::new([4, 2, 1], [4.0, 2.0, 1.0]).unwrap();
    let k = PermeabilityField::homogeneous(g, [1.0; 3]).unwrap();
    let bc = linear_drive(g.dims(), 0, 1.0, 0.0);
    let f = CellField::zeros(g);
    let (dd, space, robin) = setup(&k, [2, 1, 1], [1, 2, 1], 1.0);
    assert_eq!(space.len(), 1);
    let problem = MrcmProblem::new(&k, &bc, &f, &dd, &space, &robin).unwrap();
    let mbfs: Vec<_> = (0..2).map(|l| compute_mbfs(&problem, l).unwrap()).collect();
    let sys = assemble_interface(&mbfs, 1, false).unwrap();

    // oracle: local 2x2x1 problems solved densely, fluxes through the closures by hand
    let beta = 2.0; // α H / K with H = 2, K = 1
    let t_half = 2.0;
    let t_r = 1.0 / (beta + 1.0 / t_half);
    let mut a = vec![vec![0.0; 2]; 2];
    let mut rhs = vec![0.0; 2];
    for (l, s) in [(0usize, 1.0f64), (1, -1.0)] {
        let sub = problem.k.restrict(&dd.subdomains()[l].cells).unwrap();
        let lbc = &mbfs[l].problem.bc;
        let local_f = CellField::zeros(*sub.grid());
        let sysl = crate::fv::assemble(&sub, lbc, &local_f).unwrap();
        let dense = sysl.matrix.to_dense();
        // skeleton cells: local x index 1 for the lower subdomain, 0 for the upper
        let cells: Vec<usize> = if l == 0 { vec![1, 3] } else { vec![0, 2] };
        let solve_for = |datum: f64, base: &[f64]| {
            let mut b = base.to_vec();
            for &c in &cells {
                b[c] += t_r * datum;
            }
            let p = dense_solve(dense.clone(), b);
            cells.iter().map(|&c| t_r * (p[c] - datum)).sum::<f64>()
        };
        let qbar = solve_for(0.0, &sysl.rhs);
        let zero = vec![0.0; 4];
        let qp = solve_for(1.0, &zero);
        let qu = solve_for(-beta * s, &zero);
        a[0][0] += qp;
        a[0][1] += qu;
        a[1][0] += beta * s * qp;
        a[1][1] += beta * s * qu - 2.0 * beta;
        rhs[0] -= qbar;
        rhs[1] -= beta * s * qbar;
    }
    let got = sys.matrix.to_dense();
    for i in 0..2 {
        assert!((sys.rhs[i] - rhs[i]).abs() < 1e-13, "rhs {i}: {} vs {}", sys.rhs[i], rhs[i]);
        for j in 0..2 {
            assert!((got[i][j] - a[i][j]).abs() < 1e-13, "A[{i}][{j}]: {} vs {}", got[i][j], a[i][j]);
        }
    }
}

#[test]
fn disjoint_bases_do_not_couple() {
    let g = StructuredGrid::new([6, 2, 1], [6.0, 2.0, 1.0]).unwrap();
    let k = PermeabilityField::homogeneous(g, [1.0; 3]).unwrap();
    let bc = linear_drive(g.dims(), 0, 1.0, 0.0);
    let f = CellField::zeros(g);
    let (dd, space, robin) = setup(&k, [3, 1, 1], [1, 2, 1], 1.0);
    let problem = MrcmProblem::new(&k, &bc, &f, &dd, &space, &robin).unwrap();
    let mbfs: Vec<_> = (0..3).map(|l| compute_mbfs(&problem, l).unwrap()).collect();
    let sys = assemble_interface(&mbfs, space.len(), false).unwrap();
    // bases 0 and 1 sit on patches 0|1 and 1|2; only subdomain 1 sees both,
    // so the couplings exist, but a 4-subdomain chain leaves 0 and 2 apart
    assert!(sys.matrix.get(0, 1) != 0.0);
    let g4 = StructuredGrid::new([8, 2, 1], [8.0, 2.0, 1.0]).unwrap();
    let k4 = PermeabilityField::homogeneous(g4, [1.0; 3]).unwrap();
    let bc4 = linear_drive(g4.dims(), 0, 1.0, 0.0);
    let f4 = CellField::zeros(g4);
    let (dd4, space4, robin4) = setup(&k4, [4, 1, 1], [1, 2, 1], 1.0);
    let p4 = MrcmProblem::new(&k4, &bc4, &f4, &dd4, &space4, &robin4).unwrap();
    let m4: Vec<_> = (0..4).map(|l| compute_mbfs(&p4, l).unwrap()).collect();
    let s4 = assemble_interface(&m4, 3, false).unwrap();
    assert_eq!(s4.matrix.get(0, 2), 0.0);
    assert_eq!(s4.matrix.get(0, 3 + 2), 0.0);
}

#[test]
fn reconstruction_matches_resolve_path() {
    let k = heterogeneous([8, 8, 2], 5);
    let g = *k.grid();
    let bc = linear_drive(g.dims(), 1, 2.0, -1.0);
    let f = CellField::from_fn(g, |c| (c as f64 * 0.37).sin() * 0.1);
    let (dd, space, robin) = setup(&k, [2, 2, 1], [2, 2, 1], 1.0);
    let problem = MrcmProblem::new(&k, &bc, &f, &dd, &space, &robin).unwrap();
    let pool = WorkerPool::serial();
    let mbfs: Vec<_> = (0..4).map(|l| compute_mbfs(&problem, l).unwrap()).collect();
    let sys = assemble_interface(&mbfs, space.len(), false).unwrap();
    let x = solve_interface(&sys).unwrap();
    let (p1, u1, t1) = reconstruct(&problem, &mbfs, &x, &pool).unwrap();
    let (p2, u2, t2) = reconstruct_by_resolve(&problem, &mbfs, &x, &pool).unwrap();
    assert!(rel_diff(p1.values(), p2.values()) < 1e-12);
    for a in 0..3 {
        let scale = u2.max_abs();
        assert!(u1.axis(a).iter().zip(u2.axis(a)).all(|(x, y)| (x - y).abs() <= 1e-12 * scale));
    }
    for (a, b) in t1.iter().zip(&t2) {
        assert!((a.flux[0] - b.flux[0]).abs() < 1e-10 && (a.pressure[1] - b.pressure[1]).abs() < 1e-10);
    }
}

#[test]
fn zero_coefficients_give_particular_solution() {
    let k = heterogeneous([4, 4, 2], 2);
    let g = *k.grid();
    let bc = BoundarySpec::uniform(g.dims(), FaceCondition::Dirichlet(0.0));
    let f = CellField::zeros(g);
    let (dd, space, robin) = setup(&k, [2, 1, 1], [2, 2, 2], 1.0);
    let problem = MrcmProblem::new(&k, &bc, &f, &dd, &space, &robin).unwrap();
    let mbfs: Vec<_> = (0..2).map(|l| compute_mbfs(&problem, l).unwrap()).collect();
    let x = vec![0.0; 2 * space.len()];
    let (p, u, _) = reconstruct(&problem, &mbfs, &x, &WorkerPool::serial()).unwrap();
    assert_eq!(p.max_abs(), 0.0);
    assert_eq!(u.max_abs(), 0.0);
}

#[test]
fn superposition_of_forcings() {
    let k = heterogeneous([8, 4, 2], 9);
    let g = *k.grid();
    let bc1 = linear_drive(g.dims(), 0, 1.0, 0.0);
    let bc2 = linear_drive(g.dims(), 0, -0.5, 3.0);
    let bc12 = linear_drive(g.dims(), 0, 0.5, 3.0);
    let f1 = CellField::from_fn(g, |c| if c == 5 { 1.0 } else { 0.0 });
    let f2 = CellField::from_fn(g, |c| if c == 40 { -2.0 } else { 0.0 });
    let f12 = CellField::from_fn(g, |c| f1.get(c) + f2.get(c));
    let (dd, space, robin) = setup(&k, [2, 2, 1], [2, 2, 1], 1.0);
    let run = |bc: &BoundarySpec<f64>, f: &CellField<f64>| {
        solve_mrcm(&MrcmProblem::new(&k, bc, f, &dd, &space, &robin).unwrap(), &WorkerPool::serial()).unwrap()
    };
    let (s1, s2, s12) = (run(&bc1, &f1), run(&bc2, &f2), run(&bc12, &f12));
    let sum: Vec<f64> = s1.pressure.values().iter().zip(s2.pressure.values()).map(|(a, b)| a + b).collect();
    assert!(rel_diff(&sum, s12.pressure.values()) < 1e-12);
}

#[test]
fn pure_neumann_interface_needs_pin() {
    let k = heterogeneous([4, 4, 2], 4);
    let g = *k.grid();
    let bc = BoundarySpec::no_flow(g.dims());
    let f = CellField::from_fn(g, |c| match c {
        0 => 1.0,
        31 => -1.0,
        _ => 0.0,
    });
    let (dd, space, robin) = setup(&k, [2, 2, 1], [2, 2, 2], 1.0);
    let problem = MrcmProblem::new(&k, &bc, &f, &dd, &space, &robin).unwrap();
    assert!(problem.needs_pin());
    let mbfs: Vec<_> = (0..4).map(|l| compute_mbfs(&problem, l).unwrap()).collect();
    let unpinned = assemble_interface(&mbfs, space.len(), false).unwrap();
    assert!(matches!(solve_interface(&unpinned), Err(Error::Singular { .. })));
    let sol = solve_mrcm(&problem, &WorkerPool::serial()).unwrap();
    assert!(sol.interface_residual < 1e-10);
    assert_eq!(sol.coefficients[0], 0.0);
}

#[test]
fn fine_two_cell_and_krylov_agree() {
    let g = StructuredGrid::<f64>::new([2, 1, 1], [2.0, 1.0, 1.0]).unwrap();
    let k = PermeabilityField::homogeneous(g, [1.0; 3]).unwrap();
    let bc = linear_drive([2, 1, 1], 0, 1.0, 0.0);
    let f = CellField::zeros(g);
    let d = solve_fine(&k, &bc, &f, FineSolver::Direct, DEFAULT_FINE_CAP).unwrap();
    assert!((d.pressure.get(0) - 0.75).abs() < 1e-15);
    let big = heterogeneous([8, 8, 4], 11);
    let bcb = linear_drive(big.grid().dims(), 2, 1.0, 0.0);
    let fb = CellField::zeros(*big.grid());
    let direct = solve_fine(&big, &bcb, &fb, FineSolver::Direct, DEFAULT_FINE_CAP).unwrap();
    let cfg = KrylovConfig { rtol: 1e-8, ..Default::default() };
    let kry = solve_fine(&big, &bcb, &fb, FineSolver::Krylov(cfg), DEFAULT_FINE_CAP).unwrap();
    assert!(kry.krylov.as_ref().unwrap().converged);
    assert!(rel_diff(kry.pressure.values(), direct.pressure.values()) < 1e-7);
    assert!(matches!(solve_fine(&big, &bcb, &fb, FineSolver::Direct, 10), Err(Error::TooLarge { .. })));
}

#[test]
fn incompatible_neumann_sources_rejected() {
    let g = StructuredGrid::new([3, 3, 1], [3.0, 3.0, 1.0]).unwrap();
    let k = PermeabilityField::homogeneous(g, [1.0; 3]).unwrap();
    let f = CellField::from_fn(g, |c| if c == 4 { 1.0 } else { 0.0 });
    let err = solve_fine(&k, &BoundarySpec::no_flow(g.dims()), &f, FineSolver::Direct, DEFAULT_FINE_CAP);
    assert!(matches!(err, Err(Error::Incompatible { .. })));
}
