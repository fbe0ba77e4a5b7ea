//! Acceptance run: six criteria, one line each, non-zero exit on any failure.
//!
//! `cargo test -p eit-core --test acceptance`

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::{cramer_potentials, jittered_disk, quad_mesh, reference_assembly, triangle_mesh};
use eit_core::forward::{apply_pattern, assemble, electrode_voltage, solve_forward, ConductivityField, CurrentPattern};
use eit_core::linalg::symmetric_eigen_ascending;
use eit_core::mesh::build_disk_mesh;
use eit_core::multifreq::{
    nodal_chain_patterns, reconstruct, relative_error, simulate_sweep, stack_solve, SweepConfig, TissueModel,
};
use eit_core::phantom::{
    generate_ensemble, generate_noise_ensemble, make_phantom, make_resistor_circle_fixture, Inclusion, NoiseSpec,
    SourceSpec,
};
use eit_core::statistics::{correlation, cumulant_standard_errors, third_cumulants, MeasurementEnsemble};
use eit_core::subspace::{build_projector, fit_subspace, fitting_residual, FitTarget};
use eit_core::Error;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn circle_fit() -> eit_core::subspace::SubspaceFit {
    let fixture = make_resistor_circle_fixture();
    let ens = fixture.ensemble(1).unwrap();
    fit_subspace(correlation(&ens, false).unwrap().0, 3).unwrap()
}

fn candidate_structure() -> Outcome {
    let start = Instant::now();
    let fit = circle_fit();
    let shape = fit.projector.factor_shape();
    check(shape == (12, 9), || format!("projector factor is {}x{}", shape.0, shape.1))?;
    let set = &fit.candidates;
    check(set.len() == 9, || format!("{} candidates", set.len()))?;
    let mut positions = Vec::new();
    for (k, c) in set.candidates.iter().enumerate() {
        check(c.shape() == (4, 3), || format!("candidate {k} is {:?}", c.shape()))?;
        let big: Vec<(usize, usize)> = (0..4)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .filter(|&(i, j)| c[(i, j)].abs() > 1e-10)
            .collect();
        check(big.len() == 1, || format!("candidate {k} has {} entries above 1e-10", big.len()))?;
        let v = c[big[0]];
        check((v.abs() - 1.0).abs() <= 1e-8, || format!("candidate {k} entry is {v}"))?;
        positions.push(big[0]);
    }
    positions.sort_unstable();
    positions.dedup();
    check(positions.len() == 9, || "candidates repeat a position".into())?;
    let elapsed = start.elapsed().as_secs_f64();
    check(elapsed < 1.0, || format!("took {elapsed:.3} s"))?;
    Ok(format!("12x9 factor, 9 single-entry 4x3 candidates, {elapsed:.3} s"))
}

fn nonuniqueness() -> Outcome {
    let fit = circle_fit();
    let mut worst: f64 = 0.0;
    for c in &fit.candidates.candidates {
        worst = worst.max(fitting_residual(c, FitTarget::Subspace(&fit.decomposition)).map_err(|e| e.to_string())?);
    }
    check(worst <= 1e-8, || format!("worst residual {worst:e}"))?;
    Ok(format!("{} candidates, worst residual {worst:.1e}", fit.candidates.len()))
}

fn multifrequency_uniqueness() -> Outcome {
    let start = Instant::now();
    let mesh = build_disk_mesh(1.0, 1).map_err(|e| e.to_string())?;
    check(mesh.node_count() == 25 && mesh.element_count() == 32, || "unexpected mesh size".into())?;
    let inc = [Inclusion { center: [0.35, 0.2], radius: 0.35, contrast: 2.5 }];
    let phantom = make_phantom(&mesh, 1.0, &inc).map_err(|e| e.to_string())?;
    let tissue = TissueModel::dispersion_free(&phantom.field);
    let patterns = nodal_chain_patterns(&mesh, 1.0).map_err(|e| e.to_string())?;
    check(patterns.len() == 25, || format!("{} patterns", patterns.len()))?;
    let cfg = SweepConfig::new(vec![1e3], patterns).map_err(|e| e.to_string())?;
    let rec = reconstruct(&mesh, &tissue, &cfg).map_err(|e| e.to_string())?;
    let err = relative_error(&rec.field.sigma, phantom.field.values());
    check(err <= 1e-6, || format!("max relative error {err:e}"))?;

    let single = SweepConfig::new(vec![1e3], vec![CurrentPattern::pair(0, 8, 1.0).unwrap()]).unwrap();
    let st = simulate_sweep(&mesh, &tissue, &single).map_err(|e| e.to_string())?;
    match stack_solve(&st) {
        Err(Error::RankDeficient { .. }) => {}
        Err(e) => return Err(format!("single pattern gave {e}")),
        Ok(_) => return Err("single pattern was accepted".into()),
    }
    let elapsed = start.elapsed().as_secs_f64();
    check(elapsed < 10.0, || format!("took {elapsed:.3} s"))?;
    Ok(format!("max relative error {err:.1e}, single pattern rank deficient, {elapsed:.3} s"))
}

fn forward_physics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_recip: f64 = 0.0;
    let mut worst_rowsum: f64 = 0.0;
    let mut worst_scale: f64 = 0.0;
    for _ in 0..20 {
        let off: Vec<(f64, f64)> = (0..9).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let mesh = jittered_disk(1, &off, 0.05);
        let sigma: Vec<f64> = (0..mesh.element_count()).map(|_| rng.random_range(0.1..10.0)).collect();
        let field = ConductivityField::new(sigma).unwrap();
        let mut e: Vec<usize> = (0..16).collect();
        for i in 0..4 {
            let j = rng.random_range(i..16);
            e.swap(i, j);
        }
        let sys = assemble(&mesh, &field).unwrap();
        let top = sys.matrix.amax();
        for r in sys.matrix.row_iter() {
            worst_rowsum = worst_rowsum.max(r.sum().abs() / top);
        }
        let solve = |f: &ConductivityField, a: usize, b: usize| {
            let s = assemble(&mesh, f).unwrap();
            let p = CurrentPattern::pair(a, b, 1.0).unwrap();
            solve_forward(&apply_pattern(&s, &mesh, &p, 0).unwrap()).unwrap()
        };
        let ab = solve(&field, e[0], e[1]);
        let cd = solve(&field, e[2], e[3]);
        let v1 = electrode_voltage(&ab, &mesh, e[2], e[3]).unwrap();
        let v2 = electrode_voltage(&cd, &mesh, e[0], e[1]).unwrap();
        worst_recip = worst_recip.max((v1 - v2).abs() / v1.abs().max(v2.abs()));
        let c = rng.random_range(0.1..10.0);
        let scaled = solve(&field.scaled(c).unwrap(), e[0], e[1]);
        worst_scale = worst_scale.max((&scaled.potentials * c - &ab.potentials).amax() / ab.potentials.amax());
    }
    check(worst_recip <= 1e-9, || format!("reciprocity {worst_recip:e}"))?;
    check(worst_rowsum <= 1e-12, || format!("row sums {worst_rowsum:e}"))?;
    check(worst_scale <= 1e-10, || format!("sigma scaling {worst_scale:e}"))?;

    let mut worst_oracle: f64 = 0.0;
    for case in 0..20 {
        let jit: Vec<[f64; 2]> = (0..4).map(|_| [rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)]).collect();
        let base = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let pts: [[f64; 2]; 4] = std::array::from_fn(|i| [base[i][0] + jit[i][0], base[i][1] + jit[i][1]]);
        let (mesh, ne) = if case % 2 == 0 {
            (triangle_mesh([pts[0], pts[1], pts[2]]), 1)
        } else {
            (quad_mesh(pts), 2)
        };
        let sigma: Vec<f64> = (0..ne).map(|_| rng.random_range(0.1..10.0)).collect();
        let g = rng.random_range(0..mesh.node_count());
        let p = CurrentPattern::new(vec![(0, 1.0), (1, -0.4), (2, -0.6)]).unwrap();
        let sys = assemble(&mesh, &ConductivityField::new(sigma.clone()).unwrap()).unwrap();
        let phi = solve_forward(&apply_pattern(&sys, &mesh, &p, g).unwrap()).unwrap().potentials;
        let oracle = cramer_potentials(&reference_assembly(&mesh, &sigma), &p.load_vector(&mesh).unwrap(), g);
        worst_oracle = worst_oracle.max((&phi - &oracle).amax() / oracle.amax().max(1.0));
    }
    check(worst_oracle <= 1e-12, || format!("oracle {worst_oracle:e}"))?;
    Ok(format!(
        "reciprocity {worst_recip:.1e}, row sums {worst_rowsum:.1e}, scaling {worst_scale:.1e}, oracle {worst_oracle:.1e}"
    ))
}

fn worst_z(ens: &MeasurementEnsemble, expect: impl Fn(usize, usize, usize) -> f64) -> f64 {
    let c = third_cumulants(ens).unwrap();
    let se = cumulant_standard_errors(ens, 50).unwrap();
    let m = c.channel_count();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                worst = worst.max((c.entry(i, j, k) - expect(i, j, k)).abs() / se.entry(i, j, k));
            }
        }
    }
    worst
}

fn gaussian_suppression() -> Outcome {
    const T: usize = 100_000;
    let white = generate_noise_ensemble(4, &NoiseSpec::white(1.0).unwrap(), T, 101).unwrap();
    let colored = generate_noise_ensemble(4, &NoiseSpec::colored(1.0, vec![0.6, -0.2]).unwrap(), T, 102).unwrap();
    let a = DMatrix::from_column_slice(4, 1, &[0.9, -0.4, 0.6, 0.2]);
    let skewed = generate_ensemble(&a, &SourceSpec::skewed(1).unwrap(), &NoiseSpec::white(0.2).unwrap(), T, 103).unwrap();
    let zw = worst_z(&white, |_, _, _| 0.0);
    let zc = worst_z(&colored, |_, _, _| 0.0);
    let zs = worst_z(&skewed, |i, j, k| 2.0 * a[i] * a[j] * a[k]);
    check(zw <= 5.0, || format!("white z {zw:.2}"))?;
    check(zc <= 5.0, || format!("colored z {zc:.2}"))?;
    check(zs <= 5.0, || format!("skewed z {zs:.2}"))?;
    Ok(format!("worst z: white {zw:.2}, colored {zc:.2}, skewed rank-1 {zs:.2}"))
}

fn projector_spectrum() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst_ev: f64 = 0.0;
    let mut worst_idem: f64 = 0.0;
    for m in [4usize, 6, 8] {
        for d in 1..=3 {
            let a = DMatrix::from_fn(m, d, |_, _| rng.random_range(-1.0..1.0));
            let r = a.qr().q();
            let q = build_projector(&r, d).map_err(|e| e.to_string())?.q;
            worst_idem = worst_idem.max((&q * &q - &q).norm());
            let (vals, _) = symmetric_eigen_ascending(&q).map_err(|e| e.to_string())?;
            for (k, v) in vals.iter().enumerate() {
                let target = if k < d * d { 0.0 } else { 1.0 };
                worst_ev = worst_ev.max((v - target).abs());
            }
        }
    }
    check(worst_ev <= 1e-9, || format!("eigenvalue deviation {worst_ev:e}"))?;
    check(worst_idem <= 1e-9, || format!("idempotency {worst_idem:e}"))?;
    Ok(format!("eigenvalue deviation {worst_ev:.1e}, idempotency {worst_idem:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 6] = [
        ("candidate structure for M=4, d=3", candidate_structure),
        ("every candidate fits the subspace", nonuniqueness),
        ("stacked multi-pattern recovery", multifrequency_uniqueness),
        ("forward solver physics", forward_physics),
        ("Gaussian third-cumulant suppression", gaussian_suppression),
        ("projector spectrum", projector_spectrum),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {detail}", k + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
