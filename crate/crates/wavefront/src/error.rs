use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("singular right-hand side: {0}")]
    Singular(String),
    #[error("step size underflow at t = {t}: last state {state:?}")]
    SingularStall { t: f64, state: Vec<f64> },
    #[error("step budget of {0} exhausted")]
    StepBudget(usize),
    #[error("state error: {0}")]
    State(String),
    #[error("bracket diagnostic: {0}")]
    Bracket(String),
    #[error("no convergence after {iterations} iterations; residual history {history:?}")]
    Convergence { iterations: usize, history: Vec<f64> },
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("front reached the domain boundary at t = {time}; partial speed estimate {partial_speed:?}")]
    Truncation { time: f64, partial_speed: Option<f64> },
    #[error("no front: {0}")]
    NoFront(String),
    #[error("interpolation error: {0}")]
    Interpolation(String),
}

pub type Result<T> = std::result::Result<T, WaveError>;
