//! Phase-tracking reference signal layouts.
//!
//! Both layouts occupy the same number of subcarriers so the two reference
//! signal structures carry equal overhead: the distributed layout spreads
//! them evenly across the allocation, the block layout packs them into one
//! contiguous run of 4 PRBs.

/// Subcarriers occupied by either PTRS layout (4 PRBs).
pub const PTRS_SUBCARRIERS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtrsKind {
    None,
    Distributed,
    Block,
}

/// PTRS subcarrier positions, identical on every symbol and transmitted in
/// both spatial layers.
#[derive(Debug, Clone)]
pub struct PtrsLayout {
    pub kind: PtrsKind,
    pub subcarriers: Vec<usize>,
}

impl PtrsLayout {
    pub fn new(kind: PtrsKind, n_subcarriers: usize) -> Self {
        let subcarriers = match kind {
            PtrsKind::None => Vec::new(),
            PtrsKind::Distributed => {
                let stride = n_subcarriers / PTRS_SUBCARRIERS;
                (0..PTRS_SUBCARRIERS).map(|i| i * stride + stride / 2).collect()
            }
            PtrsKind::Block => {
                let start = (n_subcarriers - PTRS_SUBCARRIERS) / 2;
                (start..start + PTRS_SUBCARRIERS).collect()
            }
        };
        Self { kind, subcarriers }
    }

    pub fn is_ptrs_subcarrier(&self, k: usize) -> bool {
        match self.kind {
            PtrsKind::None => false,
            PtrsKind::Distributed => self.subcarriers.binary_search(&k).is_ok(),
            PtrsKind::Block => {
                let start = self.subcarriers[0];
                k >= start && k < start + PTRS_SUBCARRIERS
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layouts_have_equal_overhead() {
        let d = PtrsLayout::new(PtrsKind::Distributed, 3168);
        let b = PtrsLayout::new(PtrsKind::Block, 3168);
        assert_eq!(d.subcarriers.len(), PTRS_SUBCARRIERS);
        assert_eq!(b.subcarriers.len(), PTRS_SUBCARRIERS);
    }

    #[test]
    fn block_is_contiguous_and_centered() {
        let b = PtrsLayout::new(PtrsKind::Block, 3168);
        for w in b.subcarriers.windows(2) {
            assert_eq!(w[1], w[0] + 1);
        }
        assert_eq!(b.subcarriers[0], (3168 - 48) / 2);
    }

    #[test]
    fn distributed_spreads_across_allocation() {
        let d = PtrsLayout::new(PtrsKind::Distributed, 3168);
        assert!(d.subcarriers[0] < 66);
        assert!(*d.subcarriers.last().unwrap() > 3168 - 66);
        for w in d.subcarriers.windows(2) {
            assert_eq!(w[1] - w[0], 66);
        }
        assert!(d.subcarriers.iter().all(|&k| k < 3168));
    }

    #[test]
    fn membership_checks() {
        let d = PtrsLayout::new(PtrsKind::Distributed, 1584);
        for &k in &d.subcarriers {
            assert!(d.is_ptrs_subcarrier(k));
        }
        assert!(!d.is_ptrs_subcarrier(d.subcarriers[0] + 1));
        let none = PtrsLayout::new(PtrsKind::None, 1584);
        assert!(!none.is_ptrs_subcarrier(0));
    }
}
