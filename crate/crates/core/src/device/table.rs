use serde::{Deserialize, Serialize};

use super::DeviceError;

/// Piecewise-linear table on a strictly increasing grid. No extrapolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct Table {
    x: Vec<f64>,
    y: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTable {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl TryFrom<RawTable> for Table {
    type Error = DeviceError;

    fn try_from(raw: RawTable) -> Result<Self, Self::Error> {
        Table::new(raw.x, raw.y)
    }
}

impl From<Table> for RawTable {
    fn from(t: Table) -> Self {
        RawTable { x: t.x, y: t.y }
    }
}

impl Table {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, DeviceError> {
        if x.len() != y.len() {
            return Err(DeviceError::InvalidConfig(format!(
                "table axes differ in length ({} vs {})",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(DeviceError::InvalidConfig(
                "table needs at least 2 grid points".into(),
            ));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(DeviceError::InvalidConfig(
                "table grid must be strictly increasing".into(),
            ));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(DeviceError::InvalidConfig(
                "table contains non-finite values".into(),
            ));
        }
        Ok(Self { x, y })
    }

    pub fn constant(lo: f64, hi: f64, value: f64) -> Self {
        Self {
            x: vec![lo, hi],
            y: vec![value, value],
        }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        let (a, b) = self.domain();
        a <= lo && b >= hi
    }

    /// Linear interpolation; `None` outside the grid.
    pub fn eval(&self, at: f64) -> Option<f64> {
        let (lo, hi) = self.domain();
        if !(at >= lo && at <= hi) {
            return None;
        }
        let i = match self.x.partition_point(|&v| v <= at) {
            0 => 0,
            k if k >= self.x.len() => self.x.len() - 2,
            k => k - 1,
        };
        let t = (at - self.x[i]) / (self.x[i + 1] - self.x[i]);
        Some(self.y[i] + t * (self.y[i + 1] - self.y[i]))
    }
}
