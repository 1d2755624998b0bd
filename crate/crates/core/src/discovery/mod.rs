//! Tabular and time-series structure learning.

pub mod iamb;
pub mod lingam;
pub mod notears;
pub mod pc;
pub mod score;
pub mod timeseries;

pub use iamb::{iamb, iamb_cpdag, mb_to_cpdag};
pub use lingam::{direct_lingam, entropy_approx, DirectLingamFit};
pub use notears::{acyclicity, notears_linear, AugmentedObjective, NotearsConfig};
pub use pc::{pc, pc_with_test, PcConfig, SepSets};
pub use score::{local_bic, score_search, total_bic, ScoreConfig};
