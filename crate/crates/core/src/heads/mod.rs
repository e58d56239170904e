//! Attention-share analysis: per-sample and dataset shares, head ranking,
//! overlap statistics, masking sweeps and CSV exports.

mod export;
mod overlap;
mod select;
mod shares;
mod sweep;

pub use crate::model::HeadId;
pub use export::{export_heatmap, export_ranked_curve, ranked_curve, read_share_table, write_share_table};
pub use overlap::{jaccard_from_overlap, overlap_stats, OverlapStats};
pub use select::{
    rank_heads, read_assignments, select_bottom_k, select_top_k, write_assignments, HeadAssignments,
    ScoredHead,
};
pub use shares::{aggregate_shares, per_sample_shares, ShareTable};
pub use sweep::{mask_sweep, write_sweep, SweepRow};
