use serde::{Deserialize, Serialize};

use crate::model::Strategy;

/// Core count up to which a single shared file scales reasonably for
/// compute-bound work.
pub const SHARED_FILE_CORE_CEILING: usize = 50;
/// Core count beyond which subfiling stops scaling well.
pub const SUBFILE_CORE_CEILING: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    /// 1: compute bound (ratio > 1). 2: I/O bound (ratio ≤ 1).
    pub heuristic: u8,
    pub shared_file_acceptable: bool,
    /// Cores up to which the shared file is expected to scale; absent when
    /// it should be avoided.
    pub shared_file_core_ceiling: Option<usize>,
    pub preferred: Strategy,
    pub fallback: Option<Strategy>,
    pub fallback_core_ceiling: Option<usize>,
    pub summary: String,
}

/// Picks an I/O strategy from the serial compute-to-I/O ratio. `r` may be
/// infinite (no read I/O).
pub fn advise_strategy(r_comp_io: f64) -> Recommendation {
    if r_comp_io > 1.0 {
        Recommendation {
            heuristic: 1,
            shared_file_acceptable: true,
            shared_file_core_ceiling: Some(SHARED_FILE_CORE_CEILING),
            preferred: Strategy::SharedSeq,
            fallback: Some(Strategy::DenseParallel),
            fallback_core_ceiling: None,
            summary: format!(
                "compute bound: a single shared file scales to about {SHARED_FILE_CORE_CEILING} \
                 cores; a dense parallel-readable file scales further"
            ),
        }
    } else {
        Recommendation {
            heuristic: 2,
            shared_file_acceptable: false,
            shared_file_core_ceiling: None,
            preferred: Strategy::DenseParallel,
            fallback: Some(Strategy::Subfile),
            fallback_core_ceiling: Some(SUBFILE_CORE_CEILING),
            summary: format!(
                "I/O bound: avoid a single shared file; use a dense parallel-readable file \
                 (hundreds of cores) or, failing that, one segment per process (below about \
                 {SUBFILE_CORE_CEILING} cores)"
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn io_bound_routes_to_heuristic_two() {
        let r = advise_strategy(0.3);
        assert_eq!(r.heuristic, 2);
        assert!(!r.shared_file_acceptable);
        assert_eq!(r.preferred, Strategy::DenseParallel);
        assert_eq!(r.fallback, Some(Strategy::Subfile));
        assert_eq!(advise_strategy(1.0).heuristic, 2);
        assert_eq!(advise_strategy(0.0).heuristic, 2);
    }

    #[test]
    fn compute_bound_routes_to_heuristic_one() {
        let r = advise_strategy(27.0);
        assert_eq!(r.heuristic, 1);
        assert!(r.shared_file_acceptable);
        assert_eq!(r.shared_file_core_ceiling, Some(50));
        assert_eq!(r.fallback, Some(Strategy::DenseParallel));
        assert_eq!(advise_strategy(f64::INFINITY).heuristic, 1);
        assert_eq!(advise_strategy(1.0 + 1e-9).heuristic, 1);
    }

    #[test]
    fn pure() {
        assert_eq!(advise_strategy(0.7), advise_strategy(0.7));
    }
}
