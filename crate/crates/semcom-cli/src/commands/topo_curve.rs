//! `topo-curve`: builds a triangulation and its glued cell complex from a
//! grayscale image, then writes the sparse-approximation frontier of both
//! spaces as `space,k,nse` rows.

use semcom::data::six_region_image;
use semcom::topo::{
    build_triangulation, glue_cells, laplacian_dictionary, nse_frontier, GrayImage,
};

use crate::config::ConfigError;
use crate::{CliResult, Ctx};

pub fn run(ctx: &Ctx) -> CliResult<()> {
    let mut sect = ctx.raw.section("topo-curve");
    let image_spec = sect.get_str("image").unwrap_or("builtin:six-region").to_string();
    let size = sect.get_usize("size")?.unwrap_or(64);
    let n_vertices = sect.get_usize("n_vertices")?.unwrap_or(220);
    let n_levels = sect.get_usize("n_levels")?.unwrap_or(12);
    let ks_spec = sect.get_str("ks").unwrap_or("auto").to_string();
    let explicit_ks = if ks_spec == "auto" {
        None
    } else {
        Some(
            ks_spec
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<Result<Vec<usize>, _>>()
                .map_err(|_| ConfigError(format!("ks must be `auto` or an integer list, got `{ks_spec}`")))?,
        )
    };
    sect.finish()?;

    let image: GrayImage = match image_spec.as_str() {
        "builtin:six-region" => six_region_image(size),
        path => GrayImage::read_pgm(path)?,
    };

    let tri = build_triangulation(&image, n_vertices, ctx.seed)?;
    let complex = glue_cells(&tri, n_levels)?;
    let n_tri = tri.n_triangles();
    let n_cells = complex.n_cells();
    println!("triangles = {n_tri}, cells = {n_cells}");

    let ks: Vec<usize> = match &explicit_ks {
        Some(list) => list.clone(),
        None => (1..=n_cells).collect(),
    };
    let tri_dict = laplacian_dictionary(&tri)?;
    let cell_dict = laplacian_dictionary(&complex)?;
    let tri_frontier = nse_frontier(tri.signal(), &tri_dict, &ks)?;
    let cell_frontier = nse_frontier(complex.signal(), &cell_dict, &ks)?;

    let mut rows = Vec::with_capacity(2 * ks.len());
    for (k, nse) in &tri_frontier {
        rows.push(format!("triangulation,{k},{nse}"));
    }
    for (k, nse) in &cell_frontier {
        rows.push(format!("cellcomplex,{k},{nse}"));
    }
    let path = ctx.write_csv("topo_curve.csv", "space,k,nse", &rows)?;
    println!("frontier written to {}", path.display());

    ctx.write_run_meta(
        "topo-curve",
        &[
            ("image".into(), image_spec),
            ("size".into(), size.to_string()),
            ("n_vertices".into(), n_vertices.to_string()),
            ("n_levels".into(), n_levels.to_string()),
            ("ks".into(), ks_spec),
            ("triangles".into(), n_tri.to_string()),
            ("cells".into(), n_cells.to_string()),
        ],
    )
}
