use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {n} exceeds the cap of {cap}")]
    DimensionTooLarge { n: usize, cap: usize },
    #[error("table length {got} does not match 2^{n} = {expected}")]
    TableLength { n: usize, got: usize, expected: usize },
    #[error("value {value} at index {index} lies outside [-1, 1]")]
    ValueOutOfRange { index: usize, value: f64 },
    #[error("level {k} outside 0..={n}")]
    LevelOutOfRange { k: usize, n: usize },
    #[error("majority needs an odd size, got {0}")]
    EvenMajority(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("operation needs a total function; input {0} is undefined")]
    PartialInput(usize),
    #[error("malformed protocol tree: {0}")]
    MalformedTree(String),
    #[error("input {value} outside a {bits}-bit domain")]
    InputOutOfDomain { value: u64, bits: usize },
    #[error("no input pair maps to z = {z:#b}")]
    EmptyConditional { z: u64 },
    #[error("gadget is not balanced")]
    UnbalancedGadget,
    #[error("population fell to {survivors} (< {n_min}) after {draws} draws at step {step}")]
    PopulationUnderflow { step: usize, survivors: usize, n_min: usize, draws: u64 },
    #[error("power iteration did not converge in {0} iterations")]
    EigenNonConvergence(usize),
    #[error("degenerate population: {0}")]
    DegeneratePopulation(String),
    #[error("ensemble has {got} runs, need at least {need}")]
    EnsembleTooSmall { got: usize, need: usize },
    #[error("quadratic form set invalid: {0}")]
    InvalidFormSet(String),
    #[error("set measure {mu} below 10/N = {floor}")]
    SetTooSmall { mu: f64, floor: f64 },
    #[error("mixture weights invalid: {0}")]
    InvalidMixture(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
