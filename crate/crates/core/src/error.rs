use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("point too close to the singular set ({0})")]
    NearSingular(String),
    #[error("expression is not exactly evaluable: {0}")]
    NotExact(String),
    #[error("operator not applicable: {0}")]
    BadOperator(String),
    #[error("quadrature error: {0}")]
    Quadrature(String),
    #[error("unknown id: {0}")]
    UnknownId(String),
    #[error("inadmissible: {0}")]
    Inadmissible(String),
    #[error("field error: {0}")]
    Field(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
