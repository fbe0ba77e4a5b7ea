use std::fmt::Write;

use eit_core::mesh::{build_disk_mesh, load_mesh};
use eit_core::phantom::{PhantomDescription, PhantomWarning};

use crate::config::RunConfig;
use crate::error::{write_file, CliResult};
use crate::image::render_pgm;
use crate::PhantomArgs;

pub fn run(config: Option<&str>, seed: Option<u64>, args: PhantomArgs) -> CliResult<()> {
    let mut cfg = RunConfig::new(config, seed, "phantom", "phantom")?;
    let description_path: String = cfg.required("description", args.description)?;
    let mesh_path: Option<String> = cfg.optional("mesh", args.mesh)?;
    let mesh = match &mesh_path {
        Some(p) => load_mesh(p)?,
        None => {
            let radius = cfg.with_default("radius", args.radius, 1.0)?;
            let refine = cfg.with_default("refine", args.refine, 1)?;
            build_disk_mesh(radius, refine)?
        }
    };
    let out: String = cfg.required("out", args.out)?;
    let image: Option<String> = cfg.optional("image", args.image)?;
    let width = cfg.with_default("width", args.width, 64)?;

    let description = PhantomDescription::load(&description_path)?;
    let phantom = description.build(&mesh)?;
    for (k, inc) in description.inclusions.iter().enumerate() {
        cfg.note(
            &format!("inclusion.{k}"),
            format!("{} {} {} {}", inc.center[0], inc.center[1], inc.radius, inc.contrast),
        );
    }
    cfg.note("background", description.background);

    let header = cfg.header();
    let mut text = String::new();
    for line in &header {
        let _ = writeln!(text, "# {line}");
    }
    text.push_str("element,sigma\n");
    for (e, s) in phantom.field.values().iter().enumerate() {
        let _ = writeln!(text, "{e},{s:.16e}");
    }
    write_file(&out, &text)?;
    if let Some(path) = &image {
        write_file(path, &render_pgm(&mesh, phantom.field.values(), width, &header))?;
    }
    for (k, members) in phantom.members.iter().enumerate() {
        println!("inclusion {k}: {} elements", members.len());
    }
    for w in &phantom.warnings {
        let PhantomWarning::EmptyInclusion { index } = w;
        println!("warning: inclusion {index} covers no element centroid");
    }
    println!("wrote {out}");
    Ok(())
}
