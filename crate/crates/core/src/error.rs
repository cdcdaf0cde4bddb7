use thiserror::Error;

/// Errors raised by the physical, scenario, and cost models.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("battery cannot charge ({charge} kW) and discharge ({discharge} kW) in the same hour")]
    SimultaneousChargeDischarge { charge: f64, discharge: f64 },

    #[error("state of charge {soc} leaves the allowed range [{min}, {max}]")]
    SocBound { soc: f64, min: f64, max: f64 },

    #[error("series `{name}` has {actual} entries, expected {expected}")]
    LengthMismatch {
        name: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("loss evaluation needs at least one dispatch trace")]
    EmptyTraces,
}

impl ModelError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        ModelError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Returns an invalid-parameter error unless `cond` holds.
pub(crate) fn ensure(cond: bool, name: &'static str, reason: &str) -> Result<(), ModelError> {
    if cond {
        Ok(())
    } else {
        Err(ModelError::invalid(name, reason))
    }
}
