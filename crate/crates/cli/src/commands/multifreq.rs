use std::fmt::Write;

use eit_core::mesh::load_mesh;
use eit_core::multifreq::{reconstruct, SweepFile};

use crate::config::RunConfig;
use crate::error::{write_file, CliResult};
use crate::image::render_pgm;
use crate::MultifreqArgs;

pub fn run(config: Option<&str>, seed: Option<u64>, args: MultifreqArgs) -> CliResult<()> {
    let mut cfg = RunConfig::new(config, seed, "reconstruct multifreq", "multifreq")?;
    let sweep_path: String = cfg.required("sweep", args.sweep)?;
    let mesh_path: Option<String> = cfg.optional("mesh", args.mesh)?;
    let out: String = cfg.required("out", args.out)?;
    let image: Option<String> = cfg.optional("image", args.image)?;
    let width = cfg.with_default("width", args.width, 64)?;
    let stack: Option<String> = cfg.optional("stack", args.stack)?;

    let sweep = SweepFile::load(&sweep_path)?;
    for section in sweep.source().sections() {
        for e in &section.entries {
            cfg.note(&format!("sweep.{}.{}", section.name, e.key), &e.value);
        }
    }
    let mesh = match &mesh_path {
        Some(p) => load_mesh(p)?,
        None => sweep.build_mesh()?,
    };
    let tissue = sweep.tissue_model(&mesh)?;
    let sweep_cfg = sweep.sweep_config(&mesh)?;
    let rec = reconstruct(&mesh, &tissue, &sweep_cfg)?;

    let header = cfg.header();
    let mut text = String::new();
    for line in &header {
        let _ = writeln!(text, "# {line}");
    }
    text.push_str("element,sigma,expected,spread\n");
    for (e, ((s, x), w)) in rec
        .field
        .sigma
        .iter()
        .zip(&rec.effective_sigma)
        .zip(&rec.frequency_spread)
        .enumerate()
    {
        let _ = writeln!(text, "{e},{s:.16e},{x:.16e},{w:.16e}");
    }
    write_file(&out, &text)?;
    if let Some(path) = &image {
        write_file(path, &render_pgm(&mesh, &rec.field.sigma, width, &header))?;
    }
    if let Some(prefix) = &stack {
        let (phi, f) = rec.stacked.to_csv(&header);
        write_file(&format!("{prefix}.phi.csv"), &phi)?;
        write_file(&format!("{prefix}.f.csv"), &f)?;
    }

    let spread = rec.frequency_spread.iter().copied().fold(0.0, f64::max);
    for line in &header {
        println!("# {line}");
    }
    println!(
        "nodes: {}, elements: {}, injections: {}",
        mesh.node_count(),
        mesh.element_count(),
        rec.stacked.injection_count()
    );
    println!("stacked rank: {} (condition estimate {:.3e})", rec.solution.rank, rec.solution.condition);
    println!("stack residual: {:.3e}", rec.solution.residual);
    println!(
        "assembly residual: {:.3e} (operator condition {:.3e})",
        rec.field.assembly_residual, rec.field.condition
    );
    println!("max relative deviation from the model field: {:.3e}", rec.max_relative_error());
    println!("largest conductivity change across the sweep: {spread:.3e}");
    if !rec.field.negative.is_empty() {
        println!("warning: {} elements have non-positive estimates", rec.field.negative.len());
    }
    println!("wrote {out}");
    if let Some(path) = &image {
        println!("wrote {path}");
    }
    Ok(())
}
