use std::io::{BufRead, Write};

use nalgebra::Vector3;

use super::surface::StarSurface;
use crate::error::{Error, Result};

/// Writes the embedded surface as ASCII OFF (`OFF`, counts line, vertices,
/// triangles). Curves are written with zero faces.
pub fn write_off<W: Write>(surface: &StarSurface, mut out: W) -> Result<()> {
    let tris = surface.atlas().triangles();
    writeln!(out, "OFF")?;
    writeln!(out, "{} {} 0", surface.len(), tris.len())?;
    for p in surface.positions() {
        writeln!(out, "{} {} {}", p.x, p.y, p.z)?;
    }
    for t in tris {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

/// Vertex positions and triangles.
pub type OffMesh = (Vec<Vector3<f64>>, Vec<[usize; 3]>);

/// Reads the vertex block and triangles of an ASCII OFF file.
pub fn read_off<R: BufRead>(input: R) -> Result<OffMesh> {
    let mut tokens = Vec::new();
    for line in input.lines() {
        let line = line?;
        let line = line.split('#').next().unwrap_or("");
        tokens.extend(line.split_whitespace().map(str::to_owned));
    }
    let mut it = tokens.into_iter();
    let bad = |m: &str| Error::DataError(format!("malformed OFF: {m}"));
    if it.next().as_deref() != Some("OFF") {
        return Err(bad("missing OFF header"));
    }
    let mut num = |what: &str| -> Result<f64> {
        it.next()
            .ok_or_else(|| bad(what))?
            .parse::<f64>()
            .map_err(|_| bad(what))
    };
    let nv = num("vertex count")? as usize;
    let nf = num("face count")? as usize;
    let _ne = num("edge count")?;
    let mut verts = Vec::with_capacity(nv);
    for _ in 0..nv {
        verts.push(Vector3::new(num("x")?, num("y")?, num("z")?));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        if num("face arity")? as usize != 3 {
            return Err(bad("only triangles are supported"));
        }
        faces.push([
            num("face index")? as usize,
            num("face index")? as usize,
            num("face index")? as usize,
        ]);
    }
    Ok((verts, faces))
}

/// Writes a curve as `x,y` rows.
pub fn write_curve_csv<W: Write>(surface: &StarSurface, mut out: W) -> Result<()> {
    writeln!(out, "x,y")?;
    for p in surface.positions() {
        writeln!(out, "{},{}", p.x, p.y)?;
    }
    Ok(())
}

/// Recovers a surface on `atlas` from embedded vertex positions (`r_i = |X_i|`).
pub fn surface_from_positions(template: &StarSurface, positions: &[Vector3<f64>], t: f64) -> Result<StarSurface> {
    if positions.len() != template.len() {
        return Err(Error::DataError(format!(
            "snapshot has {} vertices, atlas has {}",
            positions.len(),
            template.len()
        )));
    }
    template.with_radii(positions.iter().map(|p| p.norm()).collect(), t)
}
