//! Reach/node geometry, tangents and orthogonal transects.

mod reach;
mod transect;

pub use reach::{centerlines_to_geojson, parse_centerlines, parse_centerlines_value, Node, Reach, Vec2};
pub use transect::{
    make_transect, node_tangent, reach_transects, transect_pixels, transect_walk, transects_to_geojson, Transect,
    TransectCell, TransectWalk, DEFAULT_HALF_LENGTH,
};
