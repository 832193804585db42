use std::time::Instant;

use super::EvalContext;
use crate::error::{Error, Result};

/// Median; the mean of the two middle values for even lengths.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median wall-clock milliseconds per 1000 rows to produce probabilities.
pub fn inference_time(ctx: &EvalContext<'_>, repeats: usize) -> Result<f64> {
    if repeats < 3 {
        return Err(Error::arg("inference timing needs at least 3 repeats"));
    }
    let rows = ctx.data.n_rows().max(1) as f64;
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        let p = ctx.model.predict_proba(ctx.data, ctx.n)?;
        std::hint::black_box(&p);
        samples.push(start.elapsed().as_secs_f64() * 1e3 * 1000.0 / rows);
    }
    Ok(median(&mut samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_three_is_middle() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
