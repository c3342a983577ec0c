//! Delaunay triangulation of an image rectangle.
//!
//! Vertices are the four image corners plus interior pixel centers sampled
//! with probability proportional to Sobel gradient magnitude (plus a uniform
//! floor, so constant images still sample). The triangulation is built with
//! incremental Bowyer-Watson insertion. Every vertex lies on the
//! half-integer grid, so doubling the coordinates makes the orientation and
//! in-circle predicates exact in integer arithmetic: no epsilon tuning, and
//! results are fully deterministic for a given seed.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::topo::image::GrayImage;

/// Sampling weight added uniformly so featureless regions keep nonzero mass.
const UNIFORM_FLOOR: f64 = 0.05;

/// Triangulation of the image rectangle carrying a per-triangle signal.
#[derive(Debug, Clone)]
pub struct Triangulation {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    signal: Vec<f64>,
}

impl Triangulation {
    /// Builds from raw parts, validating the structural invariants
    /// (index bounds, non-degeneracy, signal length). Triangles are
    /// reoriented counterclockwise when needed.
    pub fn from_parts(
        vertices: Vec<[f64; 2]>,
        mut triangles: Vec<[usize; 3]>,
        signal: Vec<f64>,
    ) -> Result<Self> {
        if signal.len() != triangles.len() {
            return Err(Error::invalid("signal length != triangle count"));
        }
        for tri in triangles.iter_mut() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::invalid("triangle index out of bounds"));
            }
            let [a, b, c] = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
            let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            if cross == 0.0 {
                return Err(Error::invalid("degenerate (zero-area) triangle"));
            }
            if cross < 0.0 {
                tri.swap(1, 2);
            }
        }
        if signal.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
            return Err(Error::invalid("triangle signal must lie in [0, 1]"));
        }
        Ok(Triangulation {
            vertices,
            triangles,
            signal,
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn signal(&self) -> &[f64] {
        &self.signal
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(i);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs()
    }

    pub fn triangle_coords(&self, i: usize) -> [[f64; 2]; 3] {
        let t = self.triangles[i];
        [
            self.vertices[t[0]],
            self.vertices[t[1]],
            self.vertices[t[2]],
        ]
    }

    /// Pairs of triangle indices sharing an edge (the dual-graph edges),
    /// sorted with `i < j`.
    pub fn adjacent_pairs(&self) -> Vec<(usize, usize)> {
        let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (ti, t) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (u, v) = (t[k], t[(k + 1) % 3]);
                let key = (u.min(v), u.max(v));
                by_edge.entry(key).or_default().push(ti);
            }
        }
        let mut pairs: Vec<(usize, usize)> = by_edge
            .values()
            .filter(|ts| ts.len() == 2)
            .map(|ts| (ts[0].min(ts[1]), ts[0].max(ts[1])))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }
}

/// Doubled integer coordinates; exact for corners and pixel centers.
type IPoint = [i64; 2];

fn orient(a: IPoint, b: IPoint, c: IPoint) -> i128 {
    let abx = (b[0] - a[0]) as i128;
    let aby = (b[1] - a[1]) as i128;
    let acx = (c[0] - a[0]) as i128;
    let acy = (c[1] - a[1]) as i128;
    abx * acy - aby * acx
}

/// Positive when `p` lies strictly inside the circumcircle of the
/// counterclockwise triangle `(a, b, c)`.
fn in_circle(a: IPoint, b: IPoint, c: IPoint, p: IPoint) -> i128 {
    let rows: Vec<[i128; 3]> = [a, b, c]
        .iter()
        .map(|q| {
            let dx = (q[0] - p[0]) as i128;
            let dy = (q[1] - p[1]) as i128;
            [dx, dy, dx * dx + dy * dy]
        })
        .collect();
    let [r0, r1, r2] = [rows[0], rows[1], rows[2]];
    r0[0] * (r1[1] * r2[2] - r1[2] * r2[1]) - r0[1] * (r1[0] * r2[2] - r1[2] * r2[0])
        + r0[2] * (r1[0] * r2[1] - r1[1] * r2[0])
}

/// Incremental Bowyer-Watson over points on the doubled-coordinate grid.
/// The initial triangulation is the rectangle split along one diagonal; all
/// inserted points are strictly interior, so no super-triangle is needed.
struct Mesh {
    points: Vec<IPoint>,
    tris: Vec<[usize; 3]>,
}

impl Mesh {
    fn new_rectangle(w: i64, h: i64) -> Self {
        // Doubled coordinates of the corners.
        let points = vec![[0, 0], [2 * w, 0], [2 * w, 2 * h], [0, 2 * h]];
        Mesh {
            points,
            tris: vec![[0, 1, 2], [0, 2, 3]],
        }
    }

    fn push_ccw(&mut self, mut t: [usize; 3]) {
        let o = orient(self.points[t[0]], self.points[t[1]], self.points[t[2]]);
        debug_assert!(o != 0, "degenerate triangle in mesh");
        if o < 0 {
            t.swap(1, 2);
        }
        self.tris.push(t);
    }

    fn insert(&mut self, p: IPoint) {
        let pi = self.points.len();
        self.points.push(p);

        // Cavity: triangles whose open circumdisk contains p.
        let mut cavity = Vec::new();
        for (i, t) in self.tris.iter().enumerate() {
            if in_circle(self.points[t[0]], self.points[t[1]], self.points[t[2]], p) > 0 {
                cavity.push(i);
            }
        }
        debug_assert!(!cavity.is_empty(), "inserted point outside the mesh");

        // Boundary edges appear in exactly one cavity triangle.
        // BTreeMap keeps fan creation order deterministic.
        let mut edge_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for &i in &cavity {
            let t = self.tris[i];
            for k in 0..3 {
                let (u, v) = (t[k], t[(k + 1) % 3]);
                *edge_count.entry((u.min(v), u.max(v))).or_insert(0) += 1;
            }
        }
        let cavity_set: HashSet<usize> = cavity.iter().copied().collect();
        let mut keep = Vec::with_capacity(self.tris.len() - cavity.len());
        for (i, t) in self.tris.iter().enumerate() {
            if !cavity_set.contains(&i) {
                keep.push(*t);
            }
        }
        self.tris = keep;
        for (&(u, v), &count) in edge_count.iter() {
            if count == 1 {
                self.push_ccw([u, v, pi]);
            }
        }
    }
}

/// Sobel gradient magnitude per pixel, with clamped borders.
fn sobel_magnitude(image: &GrayImage) -> Vec<f64> {
    let (w, h) = (image.width(), image.height());
    let at = |x: isize, y: isize| -> f64 {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        image.get(xc, yc)
    };
    let mut mag = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = -at(x - 1, y - 1) + at(x + 1, y - 1) - 2.0 * at(x - 1, y)
                + 2.0 * at(x + 1, y)
                - at(x - 1, y + 1)
                + at(x + 1, y + 1);
            let gy = -at(x - 1, y - 1) - 2.0 * at(x, y - 1) - at(x + 1, y - 1)
                + at(x - 1, y + 1)
                + 2.0 * at(x, y + 1)
                + at(x + 1, y + 1);
            mag[(y as usize) * w + x as usize] = (gx * gx + gy * gy).sqrt();
        }
    }
    mag
}

/// Samples `count` distinct pixel indices with probability proportional to
/// normalized gradient magnitude plus a uniform floor.
fn sample_pixels(image: &GrayImage, count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mag = sobel_magnitude(image);
    let max_mag = mag.iter().cloned().fold(0.0_f64, f64::max);
    let weight = |i: usize| {
        let g = if max_mag > 0.0 { mag[i] / max_mag } else { 0.0 };
        g + UNIFORM_FLOOR
    };
    let mut cumulative = Vec::with_capacity(mag.len());
    let mut total = 0.0;
    for i in 0..mag.len() {
        total += weight(i);
        cumulative.push(total);
    }

    let mut taken = HashSet::with_capacity(count);
    let mut picked = Vec::with_capacity(count);
    let mut attempts = 0usize;
    let attempt_cap = 64 * count.max(1);
    while picked.len() < count && attempts < attempt_cap {
        attempts += 1;
        let u: f64 = rng.random::<f64>() * total;
        let idx = cumulative.partition_point(|&c| c <= u).min(mag.len() - 1);
        if taken.insert(idx) {
            picked.push(idx);
        }
    }
    if picked.len() < count {
        // Dense sampling regime: fill deterministically by descending weight.
        let mut rest: Vec<usize> = (0..mag.len()).filter(|i| !taken.contains(i)).collect();
        rest.sort_by(|&a, &b| weight(b).partial_cmp(&weight(a)).unwrap().then(a.cmp(&b)));
        picked.extend(rest.into_iter().take(count - picked.len()));
    }
    picked
}

/// Builds the gradient-seeded Delaunay triangulation and attaches the
/// per-triangle mean intensity. Pixel centers falling on a shared edge are
/// assigned to the lowest triangle index containing them.
pub fn build_triangulation(
    image: &GrayImage,
    n_vertices: usize,
    seed: u64,
) -> Result<Triangulation> {
    if n_vertices < 4 {
        return Err(Error::invalid("n_vertices must be at least 4"));
    }
    let (w, h) = (image.width(), image.height());
    let interior = n_vertices - 4;
    if interior > w * h {
        return Err(Error::invalid(format!(
            "cannot sample {interior} distinct pixels from a {w}x{h} image"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mesh = Mesh::new_rectangle(w as i64, h as i64);
    for idx in sample_pixels(image, interior, &mut rng) {
        let (px, py) = ((idx % w) as i64, (idx / w) as i64);
        // Pixel center (px + 0.5, py + 0.5), doubled.
        mesh.insert([2 * px + 1, 2 * py + 1]);
    }

    let vertices: Vec<[f64; 2]> = mesh
        .points
        .iter()
        .map(|p| [p[0] as f64 / 2.0, p[1] as f64 / 2.0])
        .collect();
    let triangles = mesh.tris.clone();
    let signal = triangle_signal(image, &mesh);
    Triangulation::from_parts(vertices, triangles, signal)
}

/// Mean intensity of the pixels owned by each triangle. Empty triangles
/// (no pixel center inside) fall back to the pixel under their centroid.
fn triangle_signal(image: &GrayImage, mesh: &Mesh) -> Vec<f64> {
    let (w, h) = (image.width(), image.height());
    let n_tris = mesh.tris.len();
    let mut owner = vec![usize::MAX; w * h];

    for (ti, t) in mesh.tris.iter().enumerate() {
        let [a, b, c] = [mesh.points[t[0]], mesh.points[t[1]], mesh.points[t[2]]];
        let min_x = a[0].min(b[0]).min(c[0]);
        let max_x = a[0].max(b[0]).max(c[0]);
        let min_y = a[1].min(b[1]).min(c[1]);
        let max_y = a[1].max(b[1]).max(c[1]);
        // Pixel centers are at doubled coordinate 2p + 1.
        let px_lo = ((min_x - 1) / 2).max(0) as usize;
        let px_hi = (((max_x - 1) / 2) as usize).min(w - 1);
        let py_lo = ((min_y - 1) / 2).max(0) as usize;
        let py_hi = (((max_y - 1) / 2) as usize).min(h - 1);
        for py in py_lo..=py_hi {
            for px in px_lo..=px_hi {
                let cell = py * w + px;
                if owner[cell] != usize::MAX {
                    continue;
                }
                let p = [2 * px as i64 + 1, 2 * py as i64 + 1];
                if orient(a, b, p) >= 0 && orient(b, c, p) >= 0 && orient(c, a, p) >= 0 {
                    owner[cell] = ti;
                }
            }
        }
    }

    let mut sum = vec![0.0; n_tris];
    let mut count = vec![0usize; n_tris];
    for (cell, &ti) in owner.iter().enumerate() {
        if ti != usize::MAX {
            sum[ti] += image.pixels()[cell];
            count[ti] += 1;
        }
    }
    (0..n_tris)
        .map(|ti| {
            if count[ti] > 0 {
                (sum[ti] / count[ti] as f64).clamp(0.0, 1.0)
            } else {
                let t = mesh.tris[ti];
                let cx: i64 = t.iter().map(|&v| mesh.points[v][0]).sum::<i64>() / 3;
                let cy: i64 = t.iter().map(|&v| mesh.points[v][1]).sum::<i64>() / 3;
                let px = ((cx / 2).max(0) as usize).min(w - 1);
                let py = ((cy / 2).max(0) as usize).min(h - 1);
                image.get(px, py)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delaunay_holds(mesh_vertices: &[[f64; 2]], triangles: &[[usize; 3]]) -> bool {
        let ipts: Vec<IPoint> = mesh_vertices
            .iter()
            .map(|v| [(v[0] * 2.0).round() as i64, (v[1] * 2.0).round() as i64])
            .collect();
        for t in triangles {
            let (a, b, c) = (ipts[t[0]], ipts[t[1]], ipts[t[2]]);
            let (a, b, c) = if orient(a, b, c) > 0 { (a, b, c) } else { (a, c, b) };
            for (i, p) in ipts.iter().enumerate() {
                if t.contains(&i) {
                    continue;
                }
                if in_circle(a, b, c, *p) > 0 {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn constant_image_signals_are_constant() {
        let img = GrayImage::constant(32, 32, 0.4).unwrap();
        let tri = build_triangulation(&img, 16, 9).unwrap();
        assert!(tri.n_triangles() >= 2);
        for &s in tri.signal() {
            assert!((s - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn triangulation_covers_rectangle() {
        let img = GrayImage::constant(16, 12, 0.5).unwrap();
        let tri = build_triangulation(&img, 24, 3).unwrap();
        let total: f64 = (0..tri.n_triangles()).map(|i| tri.triangle_area(i)).sum();
        assert!((total - 16.0 * 12.0).abs() < 1e-9);
    }

    #[test]
    fn empty_circumcircle_property_holds() {
        for seed in [1u64, 2, 3, 4, 5] {
            let pix: Vec<f64> = (0..20 * 20)
                .map(|i| ((i * 37 % 101) as f64) / 100.0)
                .collect();
            let img = GrayImage::new(20, 20, pix).unwrap();
            let tri = build_triangulation(&img, 40, seed).unwrap();
            assert!(
                delaunay_holds(tri.vertices(), tri.triangles()),
                "empty-circumcircle violated for seed {seed}"
            );
        }
    }

    #[test]
    fn two_tone_halves_carry_exact_levels() {
        // Left half 0, right half 1, width 2: each triangle whose pixels all
        // fall in one column must carry exactly that column's level.
        let img = GrayImage::new(2, 8, vec![0.0, 1.0].repeat(8)).unwrap();
        let tri = build_triangulation(&img, 8, 5).unwrap();
        for (i, &s) in tri.signal().iter().enumerate() {
            // Triangles lying strictly in one half have all x-coords <= 1 or >= 1.
            let xs = tri.triangle_coords(i).map(|v| v[0]);
            let max_x = xs.iter().cloned().fold(f64::MIN, f64::max);
            let min_x = xs.iter().cloned().fold(f64::MAX, f64::min);
            if max_x <= 1.0 {
                assert_eq!(s, 0.0, "triangle {i} inside the left half");
            } else if min_x >= 1.0 {
                assert_eq!(s, 1.0, "triangle {i} inside the right half");
            }
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let pix: Vec<f64> = (0..64).map(|i| (i % 7) as f64 / 6.0).collect();
        let img = GrayImage::new(8, 8, pix).unwrap();
        let a = build_triangulation(&img, 12, 77).unwrap();
        let b = build_triangulation(&img, 12, 77).unwrap();
        assert_eq!(a.triangles(), b.triangles());
        assert_eq!(a.signal(), b.signal());
    }

    #[test]
    fn rejects_too_few_vertices() {
        let img = GrayImage::constant(4, 4, 0.2).unwrap();
        assert!(matches!(
            build_triangulation(&img, 3, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn every_pixel_center_lies_in_some_triangle() {
        let pix: Vec<f64> = (0..144).map(|i| ((i % 9) as f64) / 8.0).collect();
        let img = GrayImage::new(12, 12, pix).unwrap();
        let tri = build_triangulation(&img, 20, 13).unwrap();
        let ipts: Vec<IPoint> = tri
            .vertices()
            .iter()
            .map(|v| [(v[0] * 2.0).round() as i64, (v[1] * 2.0).round() as i64])
            .collect();
        for py in 0..12i64 {
            for px in 0..12i64 {
                let p = [2 * px + 1, 2 * py + 1];
                let covered = tri.triangles().iter().any(|t| {
                    orient(ipts[t[0]], ipts[t[1]], p) >= 0
                        && orient(ipts[t[1]], ipts[t[2]], p) >= 0
                        && orient(ipts[t[2]], ipts[t[0]], p) >= 0
                });
                assert!(covered, "pixel ({px},{py}) not covered");
            }
        }
    }
}
