/// Welford running mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningMoments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased variance; zero until two values have been seen.
    pub fn variance(&self) -> f64 {
        if self.count > 1 {
            self.m2 / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    pub fn std_dev(&self) -> f64 {
        libm::sqrt(self.variance())
    }

    /// `(value - mean) / sd`, or `value - mean` while the sd is still zero.
    pub fn standardize(&self, value: f64) -> f64 {
        let sd = self.std_dev();
        if sd > 0.0 {
            (value - self.mean) / sd
        } else {
            value - self.mean
        }
    }
}
