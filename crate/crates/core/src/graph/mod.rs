//! Sparse precision-matrix machinery: lasso, graphical lasso, penalty paths,
//! StARS and EBIC selection, and the methods built on them.

pub mod ebic;
pub mod glasso;
pub mod lasso;
pub mod methods;
pub mod neighborhood;
pub mod network;
pub mod path;
pub mod stars;

pub use ebic::{ebic_select, EbicSelection};
pub use glasso::{graphical_lasso, GlassoSettings, PrecisionEstimate};
pub use methods::{gcoda_fit, spieceasi_fit, spring_fit, GcodaParams, SpiecEasiMode, SpiecEasiParams, SpringParams};
pub use neighborhood::{mb_neighborhood, CombineRule};
pub use network::{BinaryNetwork, Provenance};
pub use path::{lambda_path, LambdaPath};
pub use stars::{stars_select, PathFitter, StarsParams, StarsSelection};
