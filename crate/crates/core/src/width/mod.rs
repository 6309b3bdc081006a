//! Node widths from water masks and width error statistics.

mod estimate;
mod stats;
mod table;

pub use estimate::{
    node_width, pixel_error_bound, widths_for_scene, Alignment, SceneWidths, SkippedNode, WidthEstimate, WidthFlags,
    WidthMode,
};
pub use stats::{median, width_error_stats, WidthErrorStats, DEFAULT_MAX_WIDTH};
pub use table::{read_width_table, write_widths_csv, WidthRow, WIDTHS_HEADER};
