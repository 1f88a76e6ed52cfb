//! Evaluable function abstractions shared by quadrature, class checks and
//! chain evaluation.

use crate::expr::{EvalError, EvalPoint, Expr};

/// A real function of one variable.
pub trait Univariate: Sync {
    fn at(&self, x: f64) -> Result<f64, EvalError>;
}

/// A real function of two variables.
pub trait Bivariate: Sync {
    fn at_xy(&self, x: f64, y: f64) -> Result<f64, EvalError>;
}

impl<F> Univariate for F
where
    F: Fn(f64) -> Result<f64, EvalError> + Sync,
{
    fn at(&self, x: f64) -> Result<f64, EvalError> {
        self(x)
    }
}

impl<F> Bivariate for F
where
    F: Fn(f64, f64) -> Result<f64, EvalError> + Sync,
{
    fn at_xy(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        self(x, y)
    }
}

impl Univariate for Expr {
    fn at(&self, x: f64) -> Result<f64, EvalError> {
        self.eval(EvalPoint::x(x))
    }
}

impl Bivariate for Expr {
    fn at_xy(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        self.eval(EvalPoint::xy(x, y))
    }
}

/// Wraps an infallible closure so it can be used where an evaluable is
/// expected. Non-finite outputs become [`EvalError`]s.
pub fn total1<F: Fn(f64) -> f64 + Sync>(f: F) -> impl Univariate {
    move |x: f64| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError {
                kind: crate::expr::EvalErrorKind::Overflow,
                point: EvalPoint::x(x),
            })
        }
    }
}

/// Two-variable counterpart of [`total1`].
pub fn total2<F: Fn(f64, f64) -> f64 + Sync>(f: F) -> impl Bivariate {
    move |x: f64, y: f64| {
        let v = f(x, y);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError {
                kind: crate::expr::EvalErrorKind::Overflow,
                point: EvalPoint::xy(x, y),
            })
        }
    }
}
