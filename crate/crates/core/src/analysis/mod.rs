//! Inspection of trained models: learned residual matrices and which
//! samples one model gets right that another gets wrong.

mod diff;
mod residual;

pub use diff::{misclassification_diff, DiffReport};
pub use residual::{
    asymmetry, export_edges, read_edges_csv, residual_report, to_dot, EdgeFormat, LayerResidualReport,
    ResidualReport,
};
