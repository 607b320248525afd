//! Experiment drivers and synthetic data generators.

mod completion;
mod congruence;
mod dictlearn;
mod synth;

pub use completion::{
    completion_problem, mae, run_completion_cv, split_folds, write_mae_csv, ClampSpec,
    CompletionReport, Fold, MaeRow, SplitSpec,
};
pub use congruence::congruence;
pub use dictlearn::{run_dictlearn, DictInit, DictResult, DictSpec, DictStats};
pub use synth::{gen_synthetic, SynthSpec, Synthetic};
