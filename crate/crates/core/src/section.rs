use num_complex::Complex64;

/// A section: one complex value per vertex, in that vertex's frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    values: Vec<Complex64>,
}

impl Section {
    pub fn new(values: Vec<Complex64>) -> Self {
        Section { values }
    }

    pub fn zeros(n: usize) -> Self {
        Section {
            values: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    /// `e^{ic} u`.
    pub fn with_global_phase(&self, c: f64) -> Section {
        let p = Complex64::from_polar(1.0, c);
        Section {
            values: self.values.iter().map(|z| z * p).collect(),
        }
    }

    /// The section written in frames rotated by `betas[v]` for a rank-`k`
    /// bundle: `u_v -> e^{-i k beta_v} u_v`.
    pub fn regauge(&self, rank: u32, betas: &[f64]) -> Section {
        Section {
            values: self
                .values
                .iter()
                .zip(betas)
                .map(|(z, b)| z * Complex64::from_polar(1.0, -(rank as f64) * b))
                .collect(),
        }
    }
}
