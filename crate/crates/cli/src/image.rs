//! Element fields rasterized to ASCII portable graymaps.

use std::fmt::Write;

use eit_core::mesh::Mesh;

/// Samples the field at pixel centres over the mesh bounding box. Values
/// map linearly from `[min, max]` to gray levels 0–255; pixels outside the
/// mesh are 0. A constant field renders as 255.
pub fn render_pgm(mesh: &Mesh, values: &[f64], width: usize, header: &[String]) -> String {
    let ([x0, y0], [x1, y1]) = mesh.bounding_box();
    let width = width.max(1);
    let aspect = if x1 > x0 { (y1 - y0) / (x1 - x0) } else { 1.0 };
    let height = ((width as f64 * aspect).round() as usize).max(1);
    let dx = (x1 - x0) / width as f64;
    let dy = (y1 - y0) / height as f64;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut out = String::from("P2\n");
    for line in header {
        let _ = writeln!(out, "# {line}");
    }
    let _ = writeln!(out, "# sigma range {lo:.9e} {hi:.9e}");
    let _ = writeln!(out, "{width} {height}\n255");
    for r in 0..height {
        let y = y1 - (r as f64 + 0.5) * dy;
        let row: Vec<String> = (0..width)
            .map(|c| {
                let x = x0 + (c as f64 + 0.5) * dx;
                let gray = match mesh.locate([x, y]) {
                    None => 0,
                    Some(_) if hi <= lo => 255,
                    Some(e) => ((values[e] - lo) / (hi - lo) * 255.0).round() as u32,
                };
                gray.to_string()
            })
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use eit_core::mesh::build_disk_mesh;

    #[test]
    fn corners_are_outside_and_range_is_stretched() {
        let mesh = build_disk_mesh(1.0, 1).unwrap();
        let values: Vec<f64> = (0..mesh.element_count()).map(|e| e as f64).collect();
        let img = render_pgm(&mesh, &values, 16, &["test".into()]);
        let lines: Vec<&str> = img.lines().collect();
        assert_eq!(lines[0], "P2");
        assert_eq!(lines[1], "# test");
        assert!(lines[2].starts_with("# sigma range 0.0"));
        assert_eq!(lines[3], "16 16");
        let pixels: Vec<u32> = lines[5..].iter().flat_map(|l| l.split(' ')).map(|t| t.parse().unwrap()).collect();
        assert_eq!(pixels.len(), 256);
        assert_eq!(pixels[0], 0);
        assert!(pixels.iter().all(|&p| p <= 255));
        assert!(pixels.contains(&255));
    }
}
