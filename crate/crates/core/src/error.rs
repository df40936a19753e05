use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HedgeError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numeric failure in {context}: {detail}")]
    Numeric {
        context: &'static str,
        detail: String,
    },
}

impl HedgeError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        HedgeError::Domain(msg.into())
    }

    pub(crate) fn numeric(context: &'static str, detail: impl Into<String>) -> Self {
        HedgeError::Numeric {
            context,
            detail: detail.into(),
        }
    }

    pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(HedgeError::Dimension {
                context,
                expected,
                got,
            })
        }
    }
}

pub type Result<T> = std::result::Result<T, HedgeError>;
