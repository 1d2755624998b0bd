//! Time-series structure learning on the summary or lagged graph.

mod dynotears;
mod granger;
mod var;
mod var_lingam;

pub use dynotears::{dynotears, dynotears_cancellable, lagged_design, DynotearsConfig};
pub use granger::{f_statistic, granger_multivariate, granger_pairwise, GrangerConfig, GrangerResult};
pub use var::{fit_var, VarFit};
pub use var_lingam::{var_lingam, var_lingam_cancellable, VarLingamFit, VAR_LINGAM_PRUNE};
