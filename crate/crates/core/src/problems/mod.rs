//! Concrete bilevel problems with hand-derived oracles, plus the synthetic
//! classification data used at desk scale.

mod classification;
mod hyperclean;
mod logreg;
mod nonconvex;
mod quadratic;
mod registry;
mod synthetic;

pub use classification::{corrupt_labels, gen_classification_data, softmax_accuracy, Dataset};
pub use hyperclean::{make_hyperclean, HyperClean, HyperCleanSpec};
pub use logreg::{make_logreg, LogReg, LogRegSpec};
pub use nonconvex::{make_nonconvex_sin, NonconvexSin, NonconvexSinSpec};
pub use quadratic::{QuadraticBilevel, QuadraticSpec};
pub use registry::{
    generated_splits, oracle_instance, AnyProblem, ProblemId, SplitSpec, Splits, UnknownProblem,
};
pub use synthetic::{make_synthetic, Synthetic, SyntheticSpec};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid problem specification: {0}")]
    InvalidSpec(&'static str),
}

pub(crate) fn check_len(
    what: &'static str,
    expected: usize,
    got: usize,
) -> Result<(), ProblemError> {
    if expected == got {
        Ok(())
    } else {
        Err(ProblemError::ShapeMismatch {
            what,
            expected,
            got,
        })
    }
}
