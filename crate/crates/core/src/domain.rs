use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("interval endpoints must be finite with a < b (got a={a}, b={b})")]
    BadInterval { a: f64, b: f64 },
    #[error("rectangle must satisfy a < b and c < d with finite bounds (got [{a},{b}]x[{c},{d}])")]
    BadRect { a: f64, b: f64, c: f64, d: f64 },
    #[error("expected 2 (interval) or 4 (rectangle) comma-separated numbers, got `{0}`")]
    BadSpec(String),
}

/// Closed interval `[a, b]` with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self, DomainError> {
        if a.is_finite() && b.is_finite() && a < b {
            Ok(Interval { a, b })
        } else {
            Err(DomainError::BadInterval { a, b })
        }
    }

    pub fn unit() -> Self {
        Interval { a: 0.0, b: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn mid(&self) -> f64 {
        (self.a + self.b) / 2.0
    }

    /// `n` uniformly spaced points including both endpoints.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        uniform(self.a, self.b, n)
    }

    /// The square `[a, b] x [a, b]`.
    pub fn square(&self) -> Rect {
        Rect {
            a: self.a,
            b: self.b,
            c: self.a,
            d: self.b,
        }
    }
}

/// Bidimensional interval `[a, b] x [c, d]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Rect {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, DomainError> {
        let ok = [a, b, c, d].iter().all(|v| v.is_finite()) && a < b && c < d;
        if ok {
            Ok(Rect { a, b, c, d })
        } else {
            Err(DomainError::BadRect { a, b, c, d })
        }
    }

    pub fn unit() -> Self {
        Rect {
            a: 0.0,
            b: 1.0,
            c: 0.0,
            d: 1.0,
        }
    }

    pub fn x_range(&self) -> Interval {
        Interval {
            a: self.a,
            b: self.b,
        }
    }

    pub fn y_range(&self) -> Interval {
        Interval {
            a: self.c,
            b: self.d,
        }
    }

    pub fn area(&self) -> f64 {
        (self.b - self.a) * (self.d - self.c)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.a + self.b) / 2.0, (self.c + self.d) / 2.0)
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.a, self.c),
            (self.a, self.d),
            (self.b, self.c),
            (self.b, self.d),
        ]
    }
}

/// Either kind of integration domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    Interval(Interval),
    Rect(Rect),
}

impl Domain {
    /// Parses `a,b` or `a,b,c,d`.
    pub fn parse(text: &str) -> Result<Domain, DomainError> {
        let vals: Vec<f64> = text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| DomainError::BadSpec(text.to_string()))?;
        match vals.as_slice() {
            [a, b] => Interval::new(*a, *b).map(Domain::Interval),
            [a, b, c, d] => Rect::new(*a, *b, *c, *d).map(Domain::Rect),
            _ => Err(DomainError::BadSpec(text.to_string())),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Domain::Interval(_) => 1,
            Domain::Rect(_) => 2,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Interval(iv) => write!(f, "[{}, {}]", iv.a, iv.b),
            Domain::Rect(r) => write!(f, "[{}, {}] x [{}, {}]", r.a, r.b, r.c, r.d),
        }
    }
}

impl From<Interval> for Domain {
    fn from(iv: Interval) -> Self {
        Domain::Interval(iv)
    }
}

impl From<Rect> for Domain {
    fn from(r: Rect) -> Self {
        Domain::Rect(r)
    }
}

pub(crate) fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * (i as f64) / ((n - 1) as f64)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_domains() {
        assert_eq!(
            Domain::parse("0,1").unwrap(),
            Domain::Interval(Interval::unit())
        );
        assert_eq!(
            Domain::parse(" 0, 1 ,0,1").unwrap(),
            Domain::Rect(Rect::unit())
        );
        assert!(Domain::parse("1,0").is_err());
        assert!(Domain::parse("0,1,1,1").is_err());
        assert!(Domain::parse("0,1,2").is_err());
        assert!(Domain::parse("0,x").is_err());
        assert!(Domain::parse("0,inf").is_err());
    }

    #[test]
    fn grid_hits_both_endpoints() {
        let g = Interval::new(0.1, 0.7).unwrap().grid(17);
        assert_eq!(g.len(), 17);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[16], 0.7);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
