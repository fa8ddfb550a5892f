//! Sequences of points, normalizing sequences, and index selectors.
//!
//! Sequences are total functions on indices n >= 1 so that any probe
//! schedule, however deep, can evaluate them. Closed-form constructors are
//! provided for the shapes the rest of the crate needs; arbitrary behavior
//! comes in through `from_fn`.

use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::numerics::splitmix64;
use crate::space::Point;

/// A sequence of points x_n, n >= 1.
#[derive(Clone)]
pub struct PointSequence {
    gen: Arc<dyn Fn(u64) -> Point + Send + Sync>,
    label: String,
}

impl std::fmt::Debug for PointSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PointSequence({})", self.label)
    }
}

impl PointSequence {
    pub fn from_fn(
        label: impl Into<String>,
        gen: impl Fn(u64) -> Point + Send + Sync + 'static,
    ) -> Self {
        PointSequence {
            gen: Arc::new(gen),
            label: label.into(),
        }
    }

    pub fn constant(point: Point, label: impl Into<String>) -> Self {
        PointSequence {
            gen: Arc::new(move |_| point.clone()),
            label: label.into(),
        }
    }

    /// x_n = base + (c / n^p) * dir in Euclidean coordinates.
    pub fn radial_power(base: Vec<f64>, dir: Vec<f64>, c: f64, p: f64) -> Self {
        let label = format!("power(c={c}, p={p})");
        PointSequence {
            gen: Arc::new(move |n| {
                let s = c / (n as f64).powf(p);
                Point::Coords(base.iter().zip(&dir).map(|(b, d)| b + s * d).collect())
            }),
            label,
        }
    }

    /// x_n = base + c * q^n * dir in Euclidean coordinates.
    pub fn radial_geometric(base: Vec<f64>, dir: Vec<f64>, c: f64, q: f64) -> Self {
        let label = format!("geometric(c={c}, q={q})");
        PointSequence {
            gen: Arc::new(move |n| {
                let s = c * q.powf(n as f64);
                Point::Coords(base.iter().zip(&dir).map(|(b, d)| b + s * d).collect())
            }),
            label,
        }
    }

    /// Alternates between two sequences: `odd` on odd indices, `even` on
    /// even ones.
    pub fn interleave(odd: PointSequence, even: PointSequence) -> Self {
        let label = format!("interleave({}, {})", odd.label, even.label);
        PointSequence {
            gen: Arc::new(move |n| if n % 2 == 1 { odd.at(n) } else { even.at(n) }),
            label,
        }
    }

    /// Finite list of points, clamped at the last entry for large n. The
    /// resulting sequence is eventually constant.
    pub fn tabulated(points: Vec<Point>, label: impl Into<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("tabulated sequence is empty".into()));
        }
        Ok(PointSequence {
            gen: Arc::new(move |n| {
                let i = ((n - 1) as usize).min(points.len() - 1);
                points[i].clone()
            }),
            label: label.into(),
        })
    }

    pub fn at(&self, n: u64) -> Point {
        debug_assert!(n >= 1, "sequences are indexed from 1");
        (self.gen)(n)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// The subsequence x_{s(n)} for a strictly increasing selector s.
    pub fn restrict(&self, selector: &IndexSelector) -> PointSequence {
        let gen = self.gen.clone();
        let sel = selector.map.clone();
        PointSequence {
            gen: Arc::new(move |n| gen(sel(n))),
            label: format!("{}|{}", self.label, selector.label),
        }
    }
}

/// A normalizing sequence r_n > 0, r_n -> 0.
#[derive(Clone)]
pub struct NormalizingSequence {
    gen: Arc<dyn Fn(u64) -> f64 + Send + Sync>,
    label: String,
}

impl std::fmt::Debug for NormalizingSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "NormalizingSequence({})", self.label)
    }
}

/// The last probed value must fall below this fraction of the first for the
/// decay check to pass. Sized so that r_n = 1/sqrt(n) over the default
/// schedule (decay factor ~4.5e-3) still validates; slower tails do not.
pub const DECAY_FACTOR: f64 = 1e-2;

impl NormalizingSequence {
    pub fn from_fn(
        label: impl Into<String>,
        gen: impl Fn(u64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        NormalizingSequence {
            gen: Arc::new(gen),
            label: label.into(),
        }
    }

    /// r_n = c / n^p.
    pub fn power(c: f64, p: f64) -> Self {
        NormalizingSequence {
            gen: Arc::new(move |n| c / (n as f64).powf(p)),
            label: format!("{c}/n^{p}"),
        }
    }

    /// r_n = c * q^n.
    pub fn geometric(c: f64, q: f64) -> Self {
        NormalizingSequence {
            gen: Arc::new(move |n| c * q.powf(n as f64)),
            label: format!("{c}*{q}^n"),
        }
    }

    pub fn at(&self, n: u64) -> f64 {
        (self.gen)(n)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn restrict(&self, selector: &IndexSelector) -> NormalizingSequence {
        let gen = self.gen.clone();
        let sel = selector.map.clone();
        NormalizingSequence {
            gen: Arc::new(move |n| gen(sel(n))),
            label: format!("{}|{}", self.label, selector.label),
        }
    }

    /// Checks positivity at every probed index and numerical decay toward 0:
    /// the last probed value must be below `DECAY_FACTOR` times the first.
    pub fn validate(&self, indices: &[u64]) -> Result<()> {
        if indices.is_empty() {
            return Err(Error::InsufficientData("empty probe schedule".into()));
        }
        for &n in indices {
            let r = self.at(n);
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidNormalizingSequence(format!(
                    "{}: r_{n} = {r} is not a positive finite real",
                    self.label
                )));
            }
        }
        let first = self.at(indices[0]);
        let last = self.at(*indices.last().unwrap());
        if !(last < first && last < DECAY_FACTOR * first) {
            return Err(Error::InvalidNormalizingSequence(format!(
                "{}: no decay over the schedule (first {first}, last {last})",
                self.label
            )));
        }
        Ok(())
    }
}

/// A strictly increasing index map n -> s(n) defining a subsequence.
#[derive(Clone)]
pub struct IndexSelector {
    map: Arc<dyn Fn(u64) -> u64 + Send + Sync>,
    label: String,
}

impl std::fmt::Debug for IndexSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "IndexSelector({})", self.label)
    }
}

impl IndexSelector {
    pub fn from_fn(
        label: impl Into<String>,
        map: impl Fn(u64) -> u64 + Send + Sync + 'static,
    ) -> Self {
        IndexSelector {
            map: Arc::new(map),
            label: label.into(),
        }
    }

    pub fn identity() -> Self {
        Self::from_fn("identity", |n| n)
    }

    pub fn evens() -> Self {
        Self::from_fn("evens", |n| 2 * n)
    }

    pub fn odds() -> Self {
        Self::from_fn("odds", |n| 2 * n - 1)
    }

    pub fn squares() -> Self {
        Self::from_fn("squares", |n| n * n)
    }

    /// Random strictly increasing selector: prefix sums of seeded gaps in
    /// {1, 2, 3}. Memoized so deep probes stay affordable.
    pub fn seeded_random(seed: u64) -> Self {
        let cache: Mutex<Vec<u64>> = Mutex::new(vec![0]);
        let map = move |n: u64| {
            let mut c = cache.lock().expect("selector cache poisoned");
            while (c.len() as u64) <= n {
                let k = c.len() as u64;
                let gap = 1 + splitmix64(seed ^ k.wrapping_mul(0x9e3779b97f4a7c15)) % 3;
                let prev = *c.last().unwrap();
                c.push(prev + gap);
            }
            c[n as usize]
        };
        Self::from_fn(format!("random(seed={seed})"), map)
    }

    pub fn apply(&self, n: u64) -> u64 {
        (self.map)(n)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Verifies strict monotonicity and positivity over the probed indices.
    pub fn validate(&self, indices: &[u64]) -> Result<()> {
        let mut prev: Option<u64> = None;
        for &n in indices {
            let s = self.apply(n);
            if s == 0 {
                return Err(Error::InvalidArgument(format!(
                    "selector {} maps {n} to 0; indices start at 1",
                    self.label
                )));
            }
            if let Some(p) = prev {
                if s <= p {
                    return Err(Error::InvalidArgument(format!(
                        "selector {} is not strictly increasing at {n}",
                        self.label
                    )));
                }
            }
            prev = Some(s);
        }
        Ok(())
    }
}

/// The default selector battery used by subsequence-invariance probes.
pub fn selector_battery(seed: u64) -> Vec<IndexSelector> {
    vec![
        IndexSelector::identity(),
        IndexSelector::evens(),
        IndexSelector::odds(),
        IndexSelector::squares(),
        IndexSelector::seeded_random(seed),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_power_hits_expected_points() {
        let x = PointSequence::radial_power(vec![0.0], vec![1.0], 1.0, 1.0);
        assert_eq!(x.at(4), Point::coords([0.25]));
        assert_eq!(x.at(10), Point::coords([0.1]));
    }

    #[test]
    fn interleave_respects_parity() {
        let odd = PointSequence::constant(Point::coords([1.0]), "one");
        let even = PointSequence::constant(Point::coords([0.0]), "zero");
        let mix = PointSequence::interleave(odd, even);
        assert_eq!(mix.at(3), Point::coords([1.0]));
        assert_eq!(mix.at(8), Point::coords([0.0]));
    }

    #[test]
    fn tabulated_clamps_at_last_entry() {
        let s = PointSequence::tabulated(
            vec![Point::Index(1), Point::Index(1), Point::Index(0)],
            "tab",
        )
        .unwrap();
        assert_eq!(s.at(1), Point::Index(1));
        assert_eq!(s.at(3), Point::Index(0));
        assert_eq!(s.at(1000), Point::Index(0));
    }

    #[test]
    fn norm_validation_accepts_power_decay() {
        let r = NormalizingSequence::power(1.0, 1.0);
        let idx: Vec<u64> = vec![4, 42, 440, 198071];
        assert!(r.validate(&idx).is_ok());
        // square-root decay only drops ~222x over the default depth; it must
        // still count as a normalizing sequence
        let slow = NormalizingSequence::power(1.0, 0.5);
        let idx: Vec<u64> = vec![4, 42, 440, 198071];
        assert!(slow.validate(&idx).is_ok());
    }

    #[test]
    fn norm_validation_rejects_nonpositive_and_flat() {
        let zero = NormalizingSequence::from_fn("zero-tail", |n| if n > 10 { 0.0 } else { 1.0 });
        assert!(matches!(
            zero.validate(&[4, 7, 11, 17]),
            Err(Error::InvalidNormalizingSequence(_))
        ));
        let flat = NormalizingSequence::from_fn("flat", |_| 0.5);
        assert!(matches!(
            flat.validate(&[4, 7, 11, 17]),
            Err(Error::InvalidNormalizingSequence(_))
        ));
    }

    #[test]
    fn selectors_are_strictly_increasing() {
        let idx: Vec<u64> = (1..=200).collect();
        for sel in selector_battery(13) {
            sel.validate(&idx).unwrap();
        }
    }

    #[test]
    fn seeded_selector_is_deterministic_and_bounded() {
        let a = IndexSelector::seeded_random(5);
        let b = IndexSelector::seeded_random(5);
        for n in [1u64, 17, 300, 10_000] {
            assert_eq!(a.apply(n), b.apply(n));
            assert!(a.apply(n) >= n && a.apply(n) <= 3 * n);
        }
    }

    #[test]
    fn restriction_composes_indices() {
        let x = PointSequence::radial_power(vec![0.0], vec![1.0], 1.0, 1.0);
        let r = x.restrict(&IndexSelector::evens());
        assert_eq!(r.at(5), Point::coords([0.1]));
    }
}
