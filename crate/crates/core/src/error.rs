use thiserror::Error;

use crate::bank::BankError;
use crate::features::FeatureError;
use crate::numerics::NumericsError;
use crate::scale::ScaleError;

/// Crate-level error wrapping each module's error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Text(#[from] crate::text::TextError),
    #[error(transparent)]
    Embed(#[from] crate::embed::EmbedError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
    #[error(transparent)]
    Run(#[from] crate::runner::RunError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
