use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("empty sequence")]
    EmptySequence,

    #[error("not graphical")]
    NotGraphical,

    #[error("not bigraphical")]
    NotBigraphical,

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("non-interior constraint: {0}")]
    NonInterior(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("block ({s},{t}): {source}")]
    Block {
        s: usize,
        t: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_block(self, s: usize, t: usize) -> Error {
        Error::Block {
            s,
            t,
            source: Box::new(self),
        }
    }
}
