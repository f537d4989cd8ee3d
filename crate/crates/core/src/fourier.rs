use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

pub(crate) struct RealFft {
    n: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl RealFft {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = RealFftPlanner::<f64>::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Unnormalized DFT, bins `0..=n/2`.
    pub(crate) fn forward(&self, x: &[f64]) -> Vec<Complex64> {
        let mut input = x.to_vec();
        input.resize(self.n, 0.0);
        let mut out = self.forward.make_output_vec();
        self.forward
            .process(&mut input, &mut out)
            .expect("forward transform length");
        out
    }

    /// Inverse DFT scaled by `1/n`. The imaginary parts of the DC and (for
    /// even `n`) Nyquist bins are discarded.
    pub(crate) fn inverse(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        spec[0].im = 0.0;
        if self.n % 2 == 0 {
            let last = spec.len() - 1;
            spec[last].im = 0.0;
        }
        let mut out = self.inverse.make_output_vec();
        self.inverse
            .process(&mut spec, &mut out)
            .expect("inverse transform length");
        let scale = 1.0 / self.n as f64;
        out.iter_mut().for_each(|v| *v *= scale);
        out
    }
}

pub(crate) fn forward(x: &[f64]) -> Vec<Complex64> {
    RealFft::new(x.len()).forward(x)
}

pub(crate) fn inverse(spec: Vec<Complex64>, n: usize) -> Vec<f64> {
    RealFft::new(n).inverse(spec)
}
