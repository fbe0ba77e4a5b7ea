use std::fmt::Write;

use eit_core::forward::{apply_pattern, assemble, electrode_voltage, solve_forward, ConductivityField, CurrentPattern};
use eit_core::mesh::load_mesh;

use crate::config::RunConfig;
use crate::error::{read_file, write_file, CliError, CliResult};
use crate::ForwardArgs;

pub fn run(config: Option<&str>, seed: Option<u64>, args: ForwardArgs) -> CliResult<()> {
    let mut cfg = RunConfig::new(config, seed, "forward", "forward")?;
    let mesh_path: String = cfg.required("mesh", args.mesh)?;
    let sigma_path: Option<String> = cfg.optional("sigma", args.sigma)?;
    let uniform = cfg.optional("uniform", args.uniform)?;
    let pattern_path: String = cfg.required("pattern", args.pattern)?;
    let out: String = cfg.required("out", args.out)?;

    let mesh = load_mesh(&mesh_path)?;
    let field = match (&sigma_path, uniform) {
        (Some(p), None) => ConductivityField::read_csv(p)?,
        (None, Some(v)) => ConductivityField::uniform(mesh.element_count(), v)?,
        _ => return Err(CliError::usage("give exactly one of --sigma and --uniform")),
    };
    if field.len() != mesh.element_count() {
        return Err(CliError::domain(format!(
            "conductivity has {} values, mesh has {} elements",
            field.len(),
            mesh.element_count()
        )));
    }
    let pattern = CurrentPattern::parse(&read_file(&pattern_path)?)?;
    let mut electrodes: Vec<_> = mesh.electrodes().to_vec();
    electrodes.sort_by_key(|e| e.id);
    let first = electrodes.first().ok_or_else(|| CliError::domain("mesh has no electrodes"))?;
    let ground = cfg.with_default("ground", args.ground, first.node)?;
    let default_ref = electrodes.iter().find(|e| e.node == ground).unwrap_or(first).id;
    let reference = cfg.with_default("reference", args.reference, default_ref)?;
    mesh.electrode(reference)?;

    let system = apply_pattern(&assemble(&mesh, &field)?, &mesh, &pattern, ground)?;
    let solution = solve_forward(&system)?;

    let mut text = String::new();
    for line in cfg.header() {
        let _ = writeln!(text, "# {line}");
    }
    text.push_str("electrode,node,voltage\n");
    for e in &electrodes {
        let v = electrode_voltage(&solution, &mesh, e.id, reference)?;
        let _ = writeln!(text, "{},{},{v:.16e}", e.id, e.node);
    }
    write_file(&out, &text)?;
    println!("wrote {out}: {} electrode voltages against electrode {reference}", electrodes.len());
    Ok(())
}
