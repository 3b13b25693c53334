//! Double-length arithmetic built from error-free transformations, for
//! quantities whose rounding would otherwise accumulate over many steps.

use crate::scalar::Real;

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dd<T> {
    pub hi: T,
    pub lo: T,
}

#[inline]
pub(crate) fn two_sum<T: Real>(a: T, b: T) -> (T, T) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
pub(crate) fn quick_two_sum<T: Real>(a: T, b: T) -> (T, T) {
    let s = a + b;
    (s, b - (s - a))
}

/// Dekker's splitter `2^ceil(p/2) + 1` for a `p`-bit significand.
pub(crate) fn splitter<T: Real>() -> T {
    let p = (-T::epsilon().log2()).round() + T::one();
    (T::lit(2.0)).powf((p / T::lit(2.0)).ceil()) + T::one()
}

/// `a = hi + lo` with both halves holding half the significand bits.
#[inline]
pub(crate) fn split<T: Real>(a: T, c: T) -> (T, T) {
    let t = c * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

/// `a b = p + e` exactly; `c` is [`splitter`].
#[inline]
pub(crate) fn two_prod<T: Real>(a: T, b: T, c: T) -> (T, T) {
    two_prod_split(a, b, split(a, c), split(b, c))
}

/// [`two_prod`] with both factors already split.
#[inline]
pub(crate) fn two_prod_split<T: Real>(a: T, b: T, (ah, al): (T, T), (bh, bl): (T, T)) -> (T, T) {
    let p = a * b;
    let e = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
    (p, e)
}

impl<T: Real> Dd<T> {
    pub fn new(v: T) -> Self {
        Self {
            hi: v,
            lo: T::zero(),
        }
    }

    pub fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Self { hi, lo }
    }

    pub fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    pub fn sub(self, o: Self) -> Self {
        self.add(o.neg())
    }

    pub fn mul(self, o: Self) -> Self {
        let (p, e) = two_prod(self.hi, o.hi, splitter());
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }

    pub fn div(self, o: Self) -> Self {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(Self::new(q1)));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul(Self::new(q2)));
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo }.add(Self::new(q3))
    }

    /// `e^x` by halving the argument, a short Taylor series and repeated squaring.
    pub fn exp(x: T) -> Self {
        let mut k = 0;
        let mut r = x;
        let small = T::lit(2f64.powi(-12));
        while r.abs() > small {
            r = r / T::lit(2.0);
            k += 1;
        }
        let r = Self::new(r);
        let mut term = Self::new(T::one());
        let mut sum = Self::new(T::one());
        for i in 1..=10 {
            term = term.mul(r).div(Self::new(T::from_index(i)));
            sum = sum.add(term);
        }
        for _ in 0..k {
            sum = sum.mul(sum);
        }
        sum
    }
}
