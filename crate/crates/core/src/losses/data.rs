use crate::error::{invalid, Result};
use crate::numkit::ParamVector;

/// One training example.
#[derive(Debug, Clone, PartialEq)]
pub enum DataPoint {
    /// A point of the data space itself, paired with `½‖θ − z‖²`.
    Anchor(ParamVector),
    Regression {
        x: ParamVector,
        y: f64,
    },
    /// `y` is a class index in `0..classes`.
    Classification {
        x: ParamVector,
        y: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    Anchor,
    Regression,
    Classification,
}

impl DataPoint {
    pub fn kind(&self) -> PointKind {
        match self {
            DataPoint::Anchor(_) => PointKind::Anchor,
            DataPoint::Regression { .. } => PointKind::Regression,
            DataPoint::Classification { .. } => PointKind::Classification,
        }
    }

    /// Anchor location or feature vector.
    pub fn features(&self) -> &ParamVector {
        match self {
            DataPoint::Anchor(z) => z,
            DataPoint::Regression { x, .. } | DataPoint::Classification { x, .. } => x,
        }
    }

    pub fn dim(&self) -> usize {
        self.features().dim()
    }
}

/// An ordered, homogeneous, non-empty collection of data points.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<DataPoint>,
    dim: usize,
    kind: PointKind,
    classes: usize,
}

impl Dataset {
    /// Builds a dataset; classification data is assumed binary.
    pub fn new(points: Vec<DataPoint>) -> Result<Self> {
        Self::with_classes(points, 2)
    }

    pub fn with_classes(points: Vec<DataPoint>, classes: usize) -> Result<Self> {
        let first = match points.first() {
            Some(p) => p,
            None => return invalid("dataset must contain at least one point"),
        };
        let kind = first.kind();
        let dim = first.dim();
        for (i, p) in points.iter().enumerate() {
            if p.kind() != kind {
                return invalid(format!("point {i} has kind {:?}, expected {kind:?}", p.kind()));
            }
            if p.dim() != dim {
                return invalid(format!("point {i} has dimension {}, expected {dim}", p.dim()));
            }
            if let DataPoint::Classification { y, .. } = p {
                if *y >= classes {
                    return invalid(format!("point {i} has class {y}, but only {classes} classes"));
                }
            }
        }
        Ok(Dataset {
            points,
            dim,
            kind,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for API symmetry with collections.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> PointKind {
        self.kind
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn get(&self, i: usize) -> Option<&DataPoint> {
        self.points.get(i)
    }

    pub fn into_points(self) -> Vec<DataPoint> {
        self.points
    }

    /// Points not listed in `exclude`, in dataset order, with their indices.
    pub fn included<'a>(
        &'a self,
        exclude: Option<&'a ForgetSpec>,
    ) -> impl Iterator<Item = (usize, &'a DataPoint)> + 'a {
        let skip = exclude.map(|f| f.indices()).unwrap_or(&[]);
        let mut next = 0;
        self.points.iter().enumerate().filter(move |(i, _)| {
            if next < skip.len() && skip[next] == *i {
                next += 1;
                false
            } else {
                true
            }
        })
    }

    pub fn included_len(&self, exclude: Option<&ForgetSpec>) -> usize {
        self.len() - exclude.map_or(0, |f| f.len())
    }

    /// Materializes `self \ exclude` as its own dataset.
    pub fn retain(&self, exclude: &ForgetSpec) -> Result<Dataset> {
        self.check_forget(exclude)?;
        let kept: Vec<DataPoint> = self.included(Some(exclude)).map(|(_, p)| p.clone()).collect();
        Dataset::with_classes(kept, self.classes)
    }

    /// The points listed in `spec`, in order.
    pub fn select(&self, spec: &ForgetSpec) -> Result<Dataset> {
        self.check_forget(spec)?;
        let picked: Vec<DataPoint> = spec.indices().iter().map(|&i| self.points[i].clone()).collect();
        Dataset::with_classes(picked, self.classes)
    }

    /// A copy with `point` appended at the end.
    pub fn with_point(&self, point: DataPoint) -> Result<Dataset> {
        let mut points = self.points.clone();
        points.push(point);
        Dataset::with_classes(points, self.classes)
    }

    pub fn check_forget(&self, spec: &ForgetSpec) -> Result<()> {
        if let Some(&last) = spec.indices().last() {
            if last >= self.len() {
                return invalid(format!(
                    "forget index {last} out of range for dataset of size {}",
                    self.len()
                ));
            }
        }
        if spec.len() >= self.len() {
            return invalid(format!(
                "forget set of size {} leaves nothing of a dataset of size {}",
                spec.len(),
                self.len()
            ));
        }
        Ok(())
    }
}

/// Indices of the points to remove: strictly increasing and in range.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ForgetSpec {
    indices: Vec<usize>,
}

impl ForgetSpec {
    /// Validates against a dataset of size `n`; requires `f < n`.
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("forget indices must be strictly increasing");
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return invalid(format!("forget index {last} out of range for n = {n}"));
            }
        }
        if indices.len() >= n {
            return invalid(format!("forget set size {} must be < n = {n}", indices.len()));
        }
        Ok(ForgetSpec { indices })
    }

    pub fn empty() -> Self {
        ForgetSpec::default()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// TrimGrad needs `f < n/2`.
    pub fn check_trimmable(&self, n: usize) -> Result<()> {
        if 2 * self.len() >= n {
            return invalid(format!(
                "trimming parameter f = {} requires f < n/2 (n = {n})",
                self.len()
            ));
        }
        Ok(())
    }

    /// Whether `f ≤ n · min{1/3, 12μ / (5(L − μ))}`, the regime in which the
    /// TrimGrad plateau bound holds.
    pub fn within_robust_regime(&self, n: usize, mu: f64, smooth_l: f64) -> bool {
        robust_regime_limit(n, mu, smooth_l) >= self.len() as f64
    }
}

/// `n · min{1/3, 12μ / (5(L − μ))}`.
pub fn robust_regime_limit(n: usize, mu: f64, smooth_l: f64) -> f64 {
    let n = n as f64;
    let cond = if smooth_l > mu {
        12.0 * mu / (5.0 * (smooth_l - mu))
    } else {
        f64::INFINITY
    };
    n * cond.min(1.0 / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn anchor(v: &[f64]) -> DataPoint {
        DataPoint::Anchor(ParamVector::new(v.to_vec()).unwrap())
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![]).is_err());
        assert!(Dataset::new(vec![anchor(&[0.0]), anchor(&[0.0, 1.0])]).is_err());
        let x = ParamVector::new(vec![1.0]).unwrap();
        let mixed = vec![anchor(&[0.0]), DataPoint::Regression { x: x.clone(), y: 1.0 }];
        assert!(Dataset::new(mixed).is_err());
        let bad_class = vec![DataPoint::Classification { x, y: 2 }];
        assert!(Dataset::new(bad_class).is_err());
    }

    #[test]
    fn forget_spec_validation() {
        assert!(ForgetSpec::new(vec![1, 1], 5).is_err());
        assert!(ForgetSpec::new(vec![2, 1], 5).is_err());
        assert!(ForgetSpec::new(vec![5], 5).is_err());
        assert!(ForgetSpec::new(vec![0, 1], 2).is_err());
        let f = ForgetSpec::new(vec![1, 3], 5).unwrap();
        assert!(f.contains(3) && !f.contains(2));
        assert!(f.check_trimmable(5).is_ok());
        assert!(f.check_trimmable(4).is_err());
    }

    #[test]
    fn included_skips_forget_indices() {
        let ds = Dataset::new((0..6).map(|i| anchor(&[i as f64])).collect()).unwrap();
        let f = ForgetSpec::new(vec![0, 2, 5], 6).unwrap();
        let kept: Vec<usize> = ds.included(Some(&f)).map(|(i, _)| i).collect();
        assert_eq!(kept, vec![1, 3, 4]);
        assert_eq!(ds.included_len(Some(&f)), 3);
        assert_eq!(ds.retain(&f).unwrap().len(), 3);
        assert_eq!(ds.select(&f).unwrap().len(), 3);
    }

    #[test]
    fn robust_regime() {
        // μ = L: only the 1/3 cap applies
        assert!((robust_regime_limit(30, 1.0, 1.0) - 10.0).abs() < 1e-12);
        // 12μ/(5(L−μ)) = 12/45 < 1/3
        assert!((robust_regime_limit(45, 1.0, 10.0) - 12.0).abs() < 1e-12);
        let f = ForgetSpec::new((0..11).collect(), 45).unwrap();
        assert!(f.within_robust_regime(45, 1.0, 10.0));
    }
}
