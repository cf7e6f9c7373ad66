use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used for transition probabilities and path weights.
pub trait Probability:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// `numerator / denominator` computed in this scalar type.
    fn ratio(numerator: u64, denominator: u64) -> Self {
        let n = Self::from_u64(numerator).expect("count representable");
        let d = Self::from_u64(denominator).expect("count representable");
        n / d
    }

    /// Edge weight `-ln p` used by the shortest-path search.
    fn neg_ln(self) -> Self {
        -self.ln()
    }
}

impl Probability for f32 {}
impl Probability for f64 {}
