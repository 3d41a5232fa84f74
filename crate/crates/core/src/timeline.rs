//! Sets of half-open intervals on the normalized frame, kept on an integer
//! grid of 1e-12 so that unions and differences are exact.

pub(crate) const TICKS_PER_FRAME: i64 = 1_000_000_000_000;

pub(crate) fn to_ticks(fraction: f64) -> i64 {
    (fraction * TICKS_PER_FRAME as f64).round() as i64
}

pub(crate) fn to_fraction(ticks: i64) -> f64 {
    ticks as f64 / TICKS_PER_FRAME as f64
}

/// Sorted, disjoint, non-adjacent half-open intervals `[start, end)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct IntervalSet {
    spans: Vec<(i64, i64)>,
}

impl IntervalSet {
    pub fn new() -> Self {
        Self::default()
    }

    #[cfg(test)]
    pub fn full() -> Self {
        Self { spans: vec![(0, TICKS_PER_FRAME)] }
    }

    #[cfg(test)]
    pub fn from_spans(spans: impl IntoIterator<Item = (i64, i64)>) -> Self {
        let mut set = Self::new();
        for (s, e) in spans {
            set.insert(s, e);
        }
        set
    }

    pub fn spans(&self) -> &[(i64, i64)] {
        &self.spans
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn measure(&self) -> i64 {
        self.spans.iter().map(|(s, e)| e - s).sum()
    }

    pub fn insert(&mut self, start: i64, end: i64) {
        if start >= end {
            return;
        }
        let (mut s, mut e) = (start, end);
        let mut out = Vec::with_capacity(self.spans.len() + 1);
        let mut placed = false;
        for &(a, b) in &self.spans {
            if b < s {
                out.push((a, b));
            } else if a > e {
                if !placed {
                    out.push((s, e));
                    placed = true;
                }
                out.push((a, b));
            } else {
                s = s.min(a);
                e = e.max(b);
            }
        }
        if !placed {
            out.push((s, e));
        }
        self.spans = out;
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for &(s, e) in &other.spans {
            out.insert(s, e);
        }
        out
    }

    /// Frame minus this set.
    pub fn complement(&self) -> Self {
        let mut spans = Vec::new();
        let mut cursor = 0;
        for &(s, e) in &self.spans {
            if s > cursor {
                spans.push((cursor, s));
            }
            cursor = cursor.max(e);
        }
        if cursor < TICKS_PER_FRAME {
            spans.push((cursor, TICKS_PER_FRAME));
        }
        Self { spans }
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let mut spans = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.spans.len() && j < other.spans.len() {
            let (a0, a1) = self.spans[i];
            let (b0, b1) = other.spans[j];
            let (s, e) = (a0.max(b0), a1.min(b1));
            if s < e {
                spans.push((s, e));
            }
            if a1 < b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self { spans }
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.intersect(&other.complement())
    }

    /// The earliest `amount` ticks of this set (all of it if shorter).
    pub fn take_first(&self, amount: i64) -> Self {
        let mut left = amount;
        let mut spans = Vec::new();
        for &(s, e) in &self.spans {
            if left <= 0 {
                break;
            }
            let end = e.min(s + left);
            spans.push((s, end));
            left -= end - s;
        }
        Self { spans }
    }
}
