use super::*;
use crate::mesh::build_disk_mesh;
use crate::phantom::{make_phantom, Inclusion};

fn chain_sweep(mesh: &Mesh, frequencies: Vec<f64>) -> SweepConfig {
    SweepConfig::new(frequencies, nodal_chain_patterns(mesh, 1.0).unwrap()).unwrap()
}

/// Least squares over the free off-diagonal entries of a symmetric
/// zero-row-sum matrix, solved by a generic SVD pseudo-inverse.
fn brute_force_stack(phi: &DMatrix<f64>, f: &DMatrix<f64>) -> DMatrix<f64> {
    let n = phi.nrows();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let cols = phi.ncols();
    let mut a = DMatrix::zeros(n * cols, pairs.len());
    for (p, &(i, j)) in pairs.iter().enumerate() {
        let mut basis = DMatrix::zeros(n, n);
        basis[(i, j)] = 1.0;
        basis[(j, i)] = 1.0;
        basis[(i, i)] = -1.0;
        basis[(j, j)] = -1.0;
        let img = basis * phi;
        for (k, v) in img.iter().enumerate() {
            a[(k, p)] = *v;
        }
    }
    let b = DVector::from_iterator(n * cols, f.iter().copied());
    let x = a.svd(true, true).solve(&b, 1e-12).unwrap();
    let mut s = DMatrix::zeros(n, n);
    for (p, &(i, j)) in pairs.iter().enumerate() {
        s[(i, j)] += x[p];
        s[(j, i)] += x[p];
        s[(i, i)] -= x[p];
        s[(j, j)] -= x[p];
    }
    s
}

#[test]
fn dispersion_free_columns_repeat_across_frequencies() {
    let mesh = build_disk_mesh(1.0, 0).unwrap();
    let field = ConductivityField::uniform(mesh.element_count(), 2.0).unwrap();
    let tissue = TissueModel::dispersion_free(&field);
    let patterns = vec![CurrentPattern::pair(0, 4, 1.0).unwrap(), CurrentPattern::pair(1, 5, 1.0).unwrap()];
    let cfg = SweepConfig::new(vec![10.0, 1e3, 1e5], patterns).unwrap();
    let st = simulate_sweep(&mesh, &tissue, &cfg).unwrap();
    assert_eq!(st.injection_count(), 6);
    for fi in 1..3 {
        for p in 0..2 {
            let d = (st.phi.column(fi * 2 + p) - st.phi.column(p)).amax();
            assert_eq!(d, 0.0);
        }
    }
    assert_eq!(numerical_rank(&st.gauge_reduced(), STACK_RANK_TOL), 2);
}

#[test]
fn dispersion_separates_columns() {
    let mesh = build_disk_mesh(1.0, 0).unwrap();
    let n = mesh.element_count();
    let sigma0: Vec<f64> = (0..n).map(|e| 1.0 + 0.1 * e as f64).collect();
    let sigma_inf: Vec<f64> = (0..n).map(|e| if e % 2 == 0 { 3.0 } else { 1.0 }).collect();
    let tissue = TissueModel::new(sigma0, sigma_inf, vec![1e-3; n]).unwrap();
    let cfg = SweepConfig::new(vec![1.0, 1e3], vec![CurrentPattern::pair(0, 4, 1.0).unwrap()]).unwrap();
    let st = simulate_sweep(&mesh, &tissue, &cfg).unwrap();
    assert!((st.phi.column(0) - st.phi.column(1)).amax() > 1e-3);
    assert!(tissue.dispersion_strength() > 0.0);
}

#[test]
fn model_limits() {
    let tissue = TissueModel::new(vec![1.0], vec![3.0], vec![1e-3]).unwrap();
    assert!((tissue.conductivity_at(1e-9).unwrap().values()[0] - 1.0).abs() < 1e-12);
    assert!((tissue.conductivity_at(1e12).unwrap().values()[0] - 3.0).abs() < 1e-9);
    let corner = 1.0 / (2.0 * PI * 1e-3);
    assert!((tissue.conductivity_at(corner).unwrap().values()[0] - 2.0).abs() < 1e-12);
    assert!(TissueModel::new(vec![1.0], vec![-1.0], vec![0.0]).is_err());
}

#[test]
fn config_rejects_bad_frequencies() {
    let p = vec![CurrentPattern::pair(0, 1, 1.0).unwrap()];
    assert!(SweepConfig::new(vec![], p.clone()).is_err());
    assert!(SweepConfig::new(vec![0.0], p.clone()).is_err());
    assert!(SweepConfig::new(vec![5.0, 5.0], p.clone()).is_err());
    assert!(SweepConfig::new(vec![5.0], vec![]).is_err());
}

#[test]
fn identity_potentials_return_loads() {
    // Φ spanning the gauge-free space with F already symmetric zero-row-sum.
    let mesh = build_disk_mesh(1.0, 0).unwrap();
    let field = ConductivityField::uniform(mesh.element_count(), 1.5).unwrap();
    let s = assemble(&mesh, &field).unwrap().matrix;
    let n = s.nrows();
    let phi = DMatrix::<f64>::identity(n, n);
    let st = StackedSystem::new(phi, s.clone()).unwrap();
    let sol = stack_solve(&st).unwrap();
    assert!((&sol.s_hat - &s).norm() < 1e-12 * s.norm());
}

#[test]
fn stack_solve_matches_brute_force() {
    let mesh = build_disk_mesh(1.0, 0).unwrap();
    let tissue = TissueModel::new(
        (0..8).map(|e| 1.0 + 0.2 * e as f64).collect(),
        (0..8).map(|e| 2.0 + 0.1 * e as f64).collect(),
        vec![2e-4; 8],
    )
    .unwrap();
    let cfg = chain_sweep(&mesh, vec![100.0, 1e3, 1e4]);
    let st = simulate_sweep(&mesh, &tissue, &cfg).unwrap();
    let sol = stack_solve(&st).unwrap();
    let oracle = brute_force_stack(&st.phi, &st.f);
    assert!((&sol.s_hat - &oracle).norm() <= 1e-8 * oracle.norm());
    let oracle_res = (&oracle * &st.phi - &st.f).norm();
    assert!(sol.residual <= oracle_res + 1e-10);
}

#[test]
fn recovers_conductivity_without_dispersion() {
    let mesh = build_disk_mesh(1.0, 1).unwrap();
    let inc = [Inclusion { center: [0.4, 0.1], radius: 0.3, contrast: 3.0 }];
    let phantom = make_phantom(&mesh, 1.0, &inc).unwrap();
    let tissue = TissueModel::dispersion_free(&phantom.field);
    let cfg = chain_sweep(&mesh, vec![1e3]);
    let rec = reconstruct(&mesh, &tissue, &cfg).unwrap();
    assert_eq!(rec.solution.rank, mesh.node_count() - 1);
    assert!(rec.max_relative_error() <= 1e-6, "{}", rec.max_relative_error());
    assert!(rec.field.negative.is_empty());
    let argmax = rec
        .field
        .sigma
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    assert!(phantom.members[0].contains(&argmax));
}

#[test]
fn single_pattern_is_rank_deficient() {
    let mesh = build_disk_mesh(1.0, 1).unwrap();
    let field = ConductivityField::uniform(mesh.element_count(), 1.0).unwrap();
    let tissue = TissueModel::dispersion_free(&field);
    let cfg = SweepConfig::new(vec![1e3], vec![CurrentPattern::pair(0, 8, 1.0).unwrap()]).unwrap();
    let st = simulate_sweep(&mesh, &tissue, &cfg).unwrap();
    match stack_solve(&st) {
        Err(Error::RankDeficient { rank, required }) => {
            assert_eq!(rank, 1);
            assert_eq!(required, mesh.node_count() - 1);
        }
        other => panic!("expected rank deficiency, got {other:?}"),
    }
}

#[test]
fn boundary_observation_is_partial() {
    let mesh = build_disk_mesh(1.0, 1).unwrap();
    let field = ConductivityField::uniform(mesh.element_count(), 1.0).unwrap();
    let mut cfg = chain_sweep(&mesh, vec![1e3]);
    cfg.observation = Observation::Boundary;
    let st = simulate_sweep(&mesh, &TissueModel::dispersion_free(&field), &cfg).unwrap();
    assert_eq!(st.phi.nrows(), mesh.electrodes().len());
    assert!(matches!(stack_solve(&st), Err(Error::PartialObservation { observed: 16, nodes: 25 })));
}

#[test]
fn condition_estimate_never_grows_with_columns() {
    let mesh = build_disk_mesh(1.0, 0).unwrap();
    let field = ConductivityField::uniform(mesh.element_count(), 1.0).unwrap();
    let cfg = chain_sweep(&mesh, vec![1e3]);
    let st = simulate_sweep(&mesh, &TissueModel::dispersion_free(&field), &cfg).unwrap();
    let mut last = f64::INFINITY;
    for k in 1..=st.injection_count() {
        let sub = StackedSystem::new(st.phi.columns(0, k).into_owned(), st.f.columns(0, k).into_owned()).unwrap();
        let c = sub.condition_estimate();
        assert!(c <= last * (1.0 + 1e-12), "k={k}: {c} > {last}");
        last = c;
    }
    assert!(last.is_finite());
}

#[test]
fn perturbation_stays_within_sensitivity_bound() {
    let mesh = build_disk_mesh(1.0, 0).unwrap();
    let field = ConductivityField::new((0..8).map(|e| 1.0 + 0.3 * e as f64).collect()).unwrap();
    let s = assemble(&mesh, &field).unwrap().matrix;
    let base = recover_conductivity(&s, &mesh).unwrap();
    let mut ds = DMatrix::zeros(s.nrows(), s.ncols());
    ds[(0, 1)] = 1e-6;
    ds[(1, 0)] = 1e-6;
    ds[(2, 2)] = -2e-6;
    let pert = recover_conductivity(&(&s + &ds), &mesh).unwrap();
    let dsigma: f64 = base
        .sigma
        .iter()
        .zip(&pert.sigma)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!(dsigma <= base.sensitivity * ds.norm() * (1.0 + 1e-9));
    for (a, b) in base.sigma.iter().zip(field.values()) {
        assert!((a - b).abs() < 1e-12 * b);
    }
}

#[test]
fn frequency_diversity_spans_nodes_with_few_patterns() {
    // Two boundary pairs at one frequency cannot span; adding frequencies
    // with heterogeneous dispersion adds independent columns.
    let mesh = build_disk_mesh(1.0, 0).unwrap();
    let n = mesh.element_count();
    let sigma0: Vec<f64> = (0..n).map(|e| 1.0 + 0.25 * e as f64).collect();
    let sigma_inf: Vec<f64> = (0..n).map(|e| if e % 3 == 0 { 5.0 } else { 0.5 + 0.1 * e as f64 }).collect();
    let tau: Vec<f64> = (0..n).map(|e| 1e-4 * (1.0 + e as f64)).collect();
    let tissue = TissueModel::new(sigma0, sigma_inf, tau).unwrap();
    let patterns = vec![CurrentPattern::pair(0, 4, 1.0).unwrap(), CurrentPattern::pair(2, 6, 1.0).unwrap()];
    let one = SweepConfig::new(vec![1e3], patterns.clone()).unwrap();
    let st1 = simulate_sweep(&mesh, &tissue, &one).unwrap();
    let many = SweepConfig::new(vec![10.0, 300.0, 1e3, 3e3, 1e4], patterns).unwrap();
    let st5 = simulate_sweep(&mesh, &tissue, &many).unwrap();
    let r1 = numerical_rank(&st1.gauge_reduced(), 1e-8);
    let r5 = numerical_rank(&st5.gauge_reduced(), 1e-8);
    assert_eq!(r1, 2);
    assert!(r5 > r1, "rank {r5}");
}

#[test]
fn injection_errors_are_annotated() {
    let mesh = build_disk_mesh(1.0, 0).unwrap();
    let field = ConductivityField::uniform(mesh.element_count(), 1.0).unwrap();
    let cfg = SweepConfig::new(vec![1.0, 2.0], vec![CurrentPattern::pair(0, 99, 1.0).unwrap()]).unwrap();
    match simulate_sweep(&mesh, &TissueModel::dispersion_free(&field), &cfg) {
        Err(Error::Injection { pattern: 0, .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn sweep_file_round_trip() {
    let text = "\
[mesh]
refine = 1
[model]
sigma0 = 1.0
dispersion = 0.0
[inclusions]
a = 0.4 0.0 0.3 2.0
[elements]
0 = 1.5
[frequencies]
f0 = 1e3
[nodal_patterns]
chain = 1.0
[patterns]
p0 = 0:1.0 8:-1.0
";
    let sf = parse_sweep(text).unwrap();
    let mesh = sf.build_mesh().unwrap();
    let tissue = sf.tissue_model(&mesh).unwrap();
    assert_eq!(tissue.sigma0()[0], 1.5);
    assert!(tissue.sigma0().iter().any(|&s| s == 2.0));
    let cfg = sf.sweep_config(&mesh).unwrap();
    assert_eq!(cfg.patterns.len(), 1 + mesh.node_count());
    let rec = reconstruct(&mesh, &tissue, &cfg).unwrap();
    assert!(rec.max_relative_error() < 1e-6);
}

#[test]
fn sweep_file_errors() {
    assert!(matches!(parse_sweep("[frequencies]\nf0 = 1\n"), Err(Error::Format { .. })));
    assert!(matches!(
        parse_sweep("[frequencies]\nf0 = x\n[patterns]\np = 0:1 1:-1\n"),
        Err(Error::Format { line: 2, .. })
    ));
    assert!(matches!(
        parse_sweep("[frequencies]\nf0 = 1\n[patterns]\np = 0:1 1\n"),
        Err(Error::Format { line: 4, .. })
    ));
    assert!(matches!(parse_sweep("[bogus]\nx = 1\n"), Err(Error::Format { line: 2, .. })));
}

#[test]
fn stack_matches_assembled_matrix() {
    let mesh = build_disk_mesh(1.0, 1).unwrap();
    let field = ConductivityField::new((0..32).map(|e| 0.5 + (e % 5) as f64).collect()).unwrap();
    let cfg = chain_sweep(&mesh, vec![50.0]);
    let st = simulate_sweep(&mesh, &TissueModel::dispersion_free(&field), &cfg).unwrap();
    let sol = stack_solve(&st).unwrap();
    let truth = assemble(&mesh, &field).unwrap().matrix;
    assert!((&sol.s_hat - &truth).norm() <= 1e-8 * truth.norm());
}

#[test]
fn repeated_pattern_across_frequencies_is_rank_deficient() {
    let mesh = build_disk_mesh(1.0, 1).unwrap();
    let field = ConductivityField::uniform(32, 1.0).unwrap();
    let cfg = SweepConfig::new(vec![10.0, 100.0, 1000.0], vec![CurrentPattern::pair(0, 8, 1.0).unwrap()]).unwrap();
    let st = simulate_sweep(&mesh, &TissueModel::dispersion_free(&field), &cfg).unwrap();
    assert_eq!(st.injection_count(), 3);
    assert!(matches!(stack_solve(&st), Err(Error::RankDeficient { rank: 1, .. })));
}

#[test]
fn perturbation_bound_at_two_scales() {
    let mesh = build_disk_mesh(1.0, 1).unwrap();
    let field = ConductivityField::new((0..32).map(|e| 1.0 + 0.1 * e as f64).collect()).unwrap();
    let s = assemble(&mesh, &field).unwrap().matrix;
    let n = s.nrows();
    let base = recover_conductivity(&s, &mesh).unwrap();
    for (&a, &b) in base.sigma.iter().zip(field.values()) {
        assert!((a - b).abs() <= 1e-9 * b);
    }
    let raw = DMatrix::from_fn(n, n, |i, j| (((i * 7 + j * 13) % 11) as f64 - 5.0) / 5.0);
    let sym = &raw + raw.transpose();
    for eps in [1e-8, 1e-4] {
        let ds = &sym * (eps / sym.norm());
        let rec = recover_conductivity(&(&s + &ds), &mesh).unwrap();
        let dsigma = DVector::from_iterator(32, rec.sigma.iter().zip(field.values()).map(|(a, b)| a - b)).norm();
        assert!(dsigma <= rec.sensitivity * eps * (1.0 + 1e-6), "eps {eps}: {dsigma} vs {}", rec.sensitivity * eps);
    }
}

#[test]
fn single_element_inclusion_is_localized() {
    let mesh = build_disk_mesh(1.0, 1).unwrap();
    let target = 13;
    let mut sigma = vec![1.0; 32];
    sigma[target] = 10.0;
    let field = ConductivityField::new(sigma).unwrap();
    let rec = reconstruct(&mesh, &TissueModel::dispersion_free(&field), &chain_sweep(&mesh, vec![1e3])).unwrap();
    let argmax = (0..32).max_by(|&a, &b| rec.field.sigma[a].total_cmp(&rec.field.sigma[b])).unwrap();
    assert_eq!(argmax, target);
}

#[test]
fn stack_csv_round_trip() {
    let mesh = build_disk_mesh(1.0, 0).unwrap();
    let field = ConductivityField::uniform(8, 1.0).unwrap();
    let st = simulate_sweep(&mesh, &TissueModel::dispersion_free(&field), &chain_sweep(&mesh, vec![1.0])).unwrap();
    let (phi, f) = st.to_csv(&["stack".into()]);
    let back = StackedSystem::from_csv(&phi, &f).unwrap();
    assert_eq!(back.phi, st.phi);
    assert_eq!(back.f, st.f);
    assert!(StackedSystem::from_csv(&phi, "1,2\n").is_err());
}

#[test]
fn element_models_in_sweep_file() {
    let text = "\
[mesh]
refine = 0
[model]
sigma0 = 2.0
sigma_inf = 3.0
tau = 1e-3
[elements]
1 = 4.0
2 = 1.0 5.0 2e-3
[frequencies]
f0 = 1
[nodal_patterns]
chain = 1.0
";
    let sf = parse_sweep(text).unwrap();
    let mesh = sf.build_mesh().unwrap();
    let t = sf.tissue_model(&mesh).unwrap();
    assert_eq!((t.sigma0()[0], t.sigma_inf()[0], t.tau()[0]), (2.0, 3.0, 1e-3));
    assert_eq!((t.sigma0()[1], t.sigma_inf()[1]), (4.0, 6.0));
    assert_eq!((t.sigma0()[2], t.sigma_inf()[2], t.tau()[2]), (1.0, 5.0, 2e-3));
    assert!(parse_sweep("[elements]\n1 = 1 2\n[frequencies]\nf = 1\n[patterns]\np = 0:1 1:-1\n").is_err());
}
