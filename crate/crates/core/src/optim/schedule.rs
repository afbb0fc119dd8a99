use crate::error::{Error, Result};

/// Multiplier `1 - step / total_steps`, falling linearly from 1 to exactly 0.
pub fn linear_schedule(step: u64, total_steps: u64) -> Result<f64> {
    if total_steps == 0 {
        return Err(Error::Plan("total_steps must be at least 1".into()));
    }
    if step > total_steps {
        return Err(Error::StepOutOfRange {
            step,
            total: total_steps,
        });
    }
    Ok((total_steps - step) as f64 / total_steps as f64)
}
