//! Scalar abstraction for the math-bearing parts of the crate.
//!
//! Everything that manipulates powers, gaps, queue lengths or model
//! parameters is written against [`Float`] so the same code runs in `f32`
//! or `f64`. The simulator fixes `f64` through the aliases in the crate root.

use num_traits::{FromPrimitive, NumAssign, NumCast, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

pub trait Float:
    num_traits::Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Shorthand for lossy numeric casts inside generic code.
    fn of<T: ToPrimitive>(x: T) -> Self {
        NumCast::from(x).expect("numeric cast")
    }
}

impl Float for f32 {}
impl Float for f64 {}
