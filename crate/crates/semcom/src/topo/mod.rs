//! Topological signal representation: image triangulations, glued cell
//! complexes, and Laplacian eigen-dictionaries with their sparse
//! approximation frontier.

pub mod complex;
pub mod delaunay;
pub mod image;
pub mod spectral;

pub use complex::{glue_cells, glue_cells_exact, CellComplex};
pub use delaunay::{build_triangulation, Triangulation};
pub use image::GrayImage;
pub use spectral::{
    dual_laplacian, laplacian_dictionary, nse_frontier, DualGraph, SpectralDictionary,
};
