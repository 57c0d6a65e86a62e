//! Error type shared by every module of the core crate.

use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors produced by the core engine.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two matrices had incompatible shapes for the named operation.
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    /// A matrix constructor received a buffer of the wrong length.
    DataLength {
        rows: usize,
        cols: usize,
        got: usize,
    },
    /// A matrix constructor received NaN or infinite entries.
    NonFinite(&'static str),
    /// An operation that requires data received none.
    EmptyInput(&'static str),
    /// A network layer was declared with zero width.
    ZeroWidthLayer { index: usize },
    /// The requested output head does not exist. `None` means the shared
    /// single head, `Some(t)` the head of task `t`.
    UnknownHead { task: Option<usize> },
    /// A batch label is not covered by the head being trained.
    LabelNotInHead { label: u32 },
    /// A growth plan does not have one entry per hidden layer.
    PlanLayerMismatch { plan_layers: usize, net_layers: usize },
    /// Shared-representation estimation needs at least two classes.
    TooFewClasses { found: usize },
    /// A class listed for activation statistics has no samples.
    EmptyClass { class: u32 },
    /// Two vectors that must share a dimension do not.
    VectorDimMismatch { left: usize, right: usize },
    /// A posterior snapshot does not cover the classes it must restore.
    SnapshotMismatch(&'static str),
    /// Input rows do not match the network input dimension, or tasks in one
    /// stream have different input dimensions.
    InputDimMismatch { expected: usize, found: usize },
    /// Inputs and labels of a dataset have different lengths.
    CountMismatch { inputs: usize, labels: usize },
    /// A class appears in more than one task group.
    OverlappingGroups { class: u32 },
    /// A requested class is absent from the source dataset.
    MissingClass { class: u32 },
    /// Two multi-head tasks share a class.
    ClassCollision { class: u32 },
    /// The training split of a task is empty after coreset extraction.
    EmptyTrainingSplit,
    /// Coreset replay was requested for an empty scope.
    EmptyCoresetScope,
    /// Weight-adaptation statistics need at least two snapshots.
    NotEnoughSnapshots { found: usize },
    /// A configuration value is invalid.
    InvalidConfig(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, left, right } => write!(
                f,
                "{op}: shape mismatch {}x{} vs {}x{}",
                left.0, left.1, right.0, right.1
            ),
            Error::DataLength { rows, cols, got } => write!(
                f,
                "matrix {rows}x{cols} needs {} values, got {got}",
                rows * cols
            ),
            Error::NonFinite(op) => write!(f, "{op}: non-finite value"),
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::ZeroWidthLayer { index } => write!(f, "layer {index} has zero width"),
            Error::UnknownHead { task: Some(t) } => write!(f, "no output head for task {t}"),
            Error::UnknownHead { task: None } => write!(f, "network has no shared output head"),
            Error::LabelNotInHead { label } => {
                write!(f, "label {label} is not in the trained head's class set")
            }
            Error::PlanLayerMismatch {
                plan_layers,
                net_layers,
            } => write!(
                f,
                "growth plan covers {plan_layers} layers, network has {net_layers}"
            ),
            Error::TooFewClasses { found } => {
                write!(f, "need at least 2 classes, found {found}")
            }
            Error::EmptyClass { class } => write!(f, "class {class} has no samples"),
            Error::VectorDimMismatch { left, right } => {
                write!(f, "vector dimensions differ: {left} vs {right}")
            }
            Error::SnapshotMismatch(what) => write!(f, "snapshot mismatch: {what}"),
            Error::InputDimMismatch { expected, found } => {
                write!(f, "input dimension {found}, expected {expected}")
            }
            Error::CountMismatch { inputs, labels } => {
                write!(f, "{inputs} inputs vs {labels} labels")
            }
            Error::OverlappingGroups { class } => {
                write!(f, "class {class} appears in more than one group")
            }
            Error::MissingClass { class } => write!(f, "class {class} not present in dataset"),
            Error::ClassCollision { class } => {
                write!(f, "class {class} appears in more than one multi-head task")
            }
            Error::EmptyTrainingSplit => write!(f, "training split is empty"),
            Error::EmptyCoresetScope => write!(f, "coreset scope is empty"),
            Error::NotEnoughSnapshots { found } => {
                write!(f, "need at least 2 snapshots, found {found}")
            }
            Error::InvalidConfig(what) => write!(f, "invalid config: {what}"),
        }
    }
}

impl core::error::Error for Error {}
