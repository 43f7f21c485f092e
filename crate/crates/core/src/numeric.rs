//! Small numerical utilities: compensated summation and convergence-order fits.

/// Neumaier's compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Least-squares slope of `log err` against `log h`.
///
/// Returns NaN when fewer than two points are given or any error is not
/// strictly positive.
pub fn fit_order(h: &[f64], err: &[f64]) -> f64 {
    let n = h.len().min(err.len());
    if n < 2 || err[..n].iter().any(|&e| e.is_nan() || e <= 0.0) {
        return f64::NAN;
    }
    let xs: Vec<f64> = h[..n].iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err[..n].iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// `|a − b| / max(|b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}
