use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Derived constants for packing type-`ell` Hamilton cycles in a `k`-graph on
/// `n` vertices.
///
/// `z = ceil((k - ell) / ell)` is the number of window edges owned by one arc
/// and `q = ell * z` is the q-tuple width; together they satisfy
/// `k/2 < k - ell <= q < k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params {
    pub k: usize,
    pub ell: usize,
    pub z: usize,
    pub q: usize,
    pub n: usize,
    /// Order of the shift digraph, `n / q`.
    pub nu_q: usize,
    /// Length of a type-`ell` Hamilton cycle, `n / ell`.
    pub nu_ell: usize,
}

impl Params {
    pub fn derive(k: usize, ell: usize, n: usize) -> Result<Self> {
        let shape = Shape::new(k, ell)?;
        if n < k {
            return Err(Error::TooFewVertices { n, k });
        }
        if n % shape.q != 0 {
            return Err(Error::Divisibility {
                n,
                q: shape.q,
                two_q: 2 * shape.q,
            });
        }
        let p = Params {
            k,
            ell,
            z: shape.z,
            q: shape.q,
            n,
            nu_q: n / shape.q,
            nu_ell: n / ell,
        };
        debug_assert!(p.check().is_ok());
        Ok(p)
    }

    fn check(&self) -> std::result::Result<(), &'static str> {
        if 2 * self.ell >= self.k {
            return Err("ell < k/2");
        }
        if self.z < 2 {
            return Err("z >= 2");
        }
        // k/2 < k - ell <= q < k
        if !(self.k < 2 * (self.k - self.ell) && self.k - self.ell <= self.q && self.q < self.k) {
            return Err("k/2 < k-ell <= q < k");
        }
        if self.n % self.q != 0 || self.nu_q * self.q != self.n || self.nu_ell * self.ell != self.n
        {
            return Err("divisibility");
        }
        Ok(())
    }

    /// The main theorem is stated for `n` a multiple of `2q`; construction
    /// only needs `q | n`.
    pub fn two_q_divides_n(&self) -> bool {
        self.n % (2 * self.q) == 0
    }

    pub fn ell_divides_k(&self) -> bool {
        self.k % self.ell == 0
    }

    /// Largest union size allowed for a family in the regularity definition.
    pub fn max_union(&self) -> usize {
        self.k + 2 * self.q
    }

    /// Largest family size `s` in the regularity definition.
    pub fn max_family(&self) -> usize {
        2 * self.z + 2
    }
}

/// The `(k, ell)`-only part of [`Params`], for computations that do not
/// involve a concrete vertex count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub k: usize,
    pub ell: usize,
    pub z: usize,
    pub q: usize,
}

impl Shape {
    pub fn new(k: usize, ell: usize) -> Result<Self> {
        if k < 3 {
            return Err(Error::UniformityTooSmall { k });
        }
        if ell < 1 {
            return Err(Error::EllTooSmall { ell });
        }
        if 2 * ell >= k {
            return Err(Error::TypeOutOfRegime { k, ell });
        }
        let z = (k - ell).div_ceil(ell);
        Ok(Shape {
            k,
            ell,
            z,
            q: ell * z,
        })
    }
}
