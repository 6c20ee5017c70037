use std::fmt;
use std::str::FromStr;

/// Inclusive numeric grid `start:stop:step`, or a single value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

const MAX_POINTS: usize = 1_000_000;

impl Range {
    pub fn single(v: f64) -> Self {
        Self {
            start: v,
            stop: v,
            step: 1.0,
        }
    }

    /// Grid points `start + i·step`; `stop` is included when it lands on
    /// the grid (to within 1e-9 of a step).
    pub fn values(&self) -> Result<Vec<f64>, String> {
        if self.start == self.stop {
            return Ok(vec![self.start]);
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor();
        if !(n >= 0.0) {
            return Err(format!("{self}: stop lies before start"));
        }
        if n as usize >= MAX_POINTS {
            return Err(format!("{self}: more than {MAX_POINTS} points"));
        }
        Ok((0..=n as usize).map(|i| self.start + i as f64 * self.step).collect())
    }
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| -> Result<f64, String> {
            match t.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(format!("'{t}' is not a finite number")),
            }
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts[..] {
            [v] => Ok(Self::single(num(v)?)),
            [a, b, c] => {
                let r = Self {
                    start: num(a)?,
                    stop: num(b)?,
                    step: num(c)?,
                };
                if !(r.step > 0.0) {
                    return Err(format!("'{s}': step must be positive"));
                }
                if r.stop < r.start {
                    return Err(format!("'{s}': stop lies before start"));
                }
                r.values()?;
                Ok(r)
            }
            _ => Err(format!("'{s}' is not start:stop:step")),
        }
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}
