//! Importance-map baking: the optimal-transport assignment between a uniform
//! grid and a slice's point set, plus the baked per-texel map image.

mod assignment;
mod map;
mod polish;

pub use assignment::{solve_assignment, AssignMethod, Assignment};
pub use map::{BakeConfig, ImportanceMap, MapMeta};
pub use polish::{coarse_bins, polish_map, realized_mass, smooth_uv, PolishConfig};
