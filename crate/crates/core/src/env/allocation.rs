use crate::error::{Error, Result};

/// Binary slice-to-RB (`b`) and UE-to-RB (`e`) indicator matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    num_slices: usize,
    num_ues: usize,
    num_rbs: usize,
    /// Row-major `L x K`.
    b: Vec<bool>,
    /// Row-major `N x K`.
    e: Vec<bool>,
}

impl Allocation {
    pub fn empty(num_slices: usize, num_ues: usize, num_rbs: usize) -> Self {
        Self {
            num_slices,
            num_ues,
            num_rbs,
            b: vec![false; num_slices * num_rbs],
            e: vec![false; num_ues * num_rbs],
        }
    }

    /// Builds the indicator matrices from per-RB owners. Unchecked; call
    /// [`Allocation::validate`] before use.
    pub fn from_owners(
        num_slices: usize,
        num_ues: usize,
        rb_slice: &[Option<usize>],
        rb_ue: &[Option<usize>],
    ) -> Result<Self> {
        if rb_slice.len() != rb_ue.len() {
            return Err(Error::Dimension {
                context: "rb owner vectors",
                expected: rb_slice.len(),
                actual: rb_ue.len(),
            });
        }
        let mut alloc = Self::empty(num_slices, num_ues, rb_slice.len());
        for (k, (&s, &u)) in rb_slice.iter().zip(rb_ue).enumerate() {
            if let Some(l) = s {
                if l >= num_slices {
                    return Err(Error::Constraint(format!("RB {k} owned by unknown slice {l}")));
                }
                alloc.set_b(l, k, true);
            }
            if let Some(n) = u {
                if n >= num_ues {
                    return Err(Error::Constraint(format!("RB {k} assigned to unknown UE {n}")));
                }
                alloc.set_e(n, k, true);
            }
        }
        Ok(alloc)
    }

    pub fn num_slices(&self) -> usize {
        self.num_slices
    }

    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    pub fn num_rbs(&self) -> usize {
        self.num_rbs
    }

    pub fn b(&self, l: usize, k: usize) -> bool {
        self.b[l * self.num_rbs + k]
    }

    pub fn e(&self, n: usize, k: usize) -> bool {
        self.e[n * self.num_rbs + k]
    }

    pub fn set_b(&mut self, l: usize, k: usize, v: bool) {
        self.b[l * self.num_rbs + k] = v;
    }

    pub fn set_e(&mut self, n: usize, k: usize, v: bool) {
        self.e[n * self.num_rbs + k] = v;
    }

    /// RBs owned by each slice.
    pub fn slice_rb_counts(&self) -> Vec<usize> {
        (0..self.num_slices)
            .map(|l| (0..self.num_rbs).filter(|&k| self.b(l, k)).count())
            .collect()
    }

    /// RBs assigned to user `n`.
    pub fn ue_rbs(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_rbs).filter(move |&k| self.e(n, k))
    }

    /// Checks the feasibility conditions: every RB belongs to at most one
    /// slice, the number of used (slice, UE, RB) triples is at most `K`, a UE
    /// only uses RBs of its own slice, and each RB serves at most one UE.
    pub fn validate(&self, ue_slice: &[usize]) -> Result<()> {
        if ue_slice.len() != self.num_ues {
            return Err(Error::Dimension {
                context: "ue slice map",
                expected: self.num_ues,
                actual: ue_slice.len(),
            });
        }
        let mut used = 0usize;
        for k in 0..self.num_rbs {
            let owners = (0..self.num_slices).filter(|&l| self.b(l, k)).count();
            if owners > 1 {
                return Err(Error::Constraint(format!("RB {k} owned by {owners} slices")));
            }
            let mut users = 0;
            for (n, &l) in ue_slice.iter().enumerate() {
                if !self.e(n, k) {
                    continue;
                }
                if l >= self.num_slices || !self.b(l, k) {
                    return Err(Error::Constraint(format!(
                        "UE {n} uses RB {k} which slice {l} does not own"
                    )));
                }
                users += 1;
                // only one slice owns k, so b_{l',k} e_{n,k} sums to one per user
                used += 1;
            }
            if users > 1 {
                return Err(Error::Constraint(format!("RB {k} shared by {users} UEs")));
            }
        }
        if used > self.num_rbs {
            return Err(Error::Constraint(format!(
                "{used} RB assignments exceed the {} available",
                self.num_rbs
            )));
        }
        Ok(())
    }
}
