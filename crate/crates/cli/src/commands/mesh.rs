use eit_core::mesh::{build_disk_mesh, parse_mesh, place_electrodes, write_mesh};
use eit_core::Error;

use crate::config::RunConfig;
use crate::error::{read_file, write_file, CliError, CliResult};
use crate::MeshGenArgs;

pub fn generate(config: Option<&str>, seed: Option<u64>, args: MeshGenArgs) -> CliResult<()> {
    let mut cfg = RunConfig::new(config, seed, "mesh gen", "mesh")?;
    let radius = cfg.with_default("radius", args.radius, 1.0)?;
    let refine = cfg.with_default("refine", args.refine, 1)?;
    let electrodes = cfg.optional("electrodes", args.electrodes)?;
    let out: String = cfg.required("out", args.out)?;
    let mut mesh = build_disk_mesh(radius, refine)?;
    if let Some(k) = electrodes {
        mesh = place_electrodes(mesh, k)?;
    }
    write_file(&out, &write_mesh(&mesh, &cfg.header()))?;
    println!(
        "wrote {out}: {} nodes, {} elements, {} electrodes",
        mesh.node_count(),
        mesh.element_count(),
        mesh.electrodes().len()
    );
    Ok(())
}

pub fn validate(path: &str) -> CliResult<()> {
    let text = read_file(path)?;
    match parse_mesh(&text) {
        Ok(_) => {
            println!("OK");
            Ok(())
        }
        Err(Error::Validation(report)) => {
            println!("{report}");
            Err(CliError::domain(format!("{path} failed validation")))
        }
        Err(e) => Err(e.into()),
    }
}
