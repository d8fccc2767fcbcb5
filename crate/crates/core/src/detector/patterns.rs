//! Sign patterns of a composite snapshot and their orbits under T₁.
//!
//! Pattern `j` (0-based) is the ±1 vector whose binary form, reading +1 as 1
//! and −1 as 0 with the first element most significant, equals `j`. Index 0
//! is all −1, index 1 flips only the last element, index κ−1 is all +1.

use crate::error::{Error, Result};

/// Largest supported number of receive antennas (κ = 4096, orthant dimension 12).
pub const MAX_M: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct SignPattern {
    pub index: usize,
    pub tau: Vec<f64>,
    pub orbit_id: usize,
}

impl SignPattern {
    /// Diagonal of Γ_j.
    pub fn gamma(&self) -> &[f64] {
        &self.tau
    }
}

pub(crate) fn check_m(m: usize) -> Result<()> {
    if (1..=MAX_M).contains(&m) {
        Ok(())
    } else {
        Err(Error::UnsupportedAntennaCount(m))
    }
}

/// ±1 vector of pattern `j` for composite length `k`.
pub fn tau_of(j: usize, k: usize) -> Vec<f64> {
    (0..k)
        .map(|e| if j >> (k - 1 - e) & 1 == 1 { 1.0 } else { -1.0 })
        .collect()
}

/// Pattern index of T₁τ_j, where T₁[x; y] = [y; −x].
#[inline]
pub fn rotate_index(j: usize, m: usize) -> usize {
    let mask = (1usize << m) - 1;
    let hi = j >> m;
    let lo = j & mask;
    (lo << m) | (!hi & mask)
}

/// One T₁ orbit: `members[k]` is the index of T₁ᵏ τ_rep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Orbit {
    pub members: [usize; 4],
}

impl Orbit {
    pub fn representative(&self) -> usize {
        self.members[0]
    }
}

/// Orbits in order of their smallest member. Every orbit has exactly four
/// members because T₁²τ = −τ ≠ τ.
pub fn orbits(m: usize) -> Result<Vec<Orbit>> {
    check_m(m)?;
    let kappa = 1usize << (2 * m);
    let mut seen = vec![false; kappa];
    let mut out = Vec::with_capacity(kappa / 4);
    for j in 0..kappa {
        if seen[j] {
            continue;
        }
        let mut members = [j; 4];
        for k in 1..4 {
            members[k] = rotate_index(members[k - 1], m);
        }
        debug_assert_eq!(rotate_index(members[3], m), j);
        for &p in &members {
            seen[p] = true;
        }
        out.push(Orbit { members });
    }
    Ok(out)
}

/// All κ = 2^{2m} patterns in ascending binary order, tagged with orbit ids.
pub fn enumerate_patterns(m: usize) -> Result<Vec<SignPattern>> {
    let orbs = orbits(m)?;
    let k = 2 * m;
    let mut orbit_of = vec![0usize; 1 << k];
    for (id, o) in orbs.iter().enumerate() {
        for &p in &o.members {
            orbit_of[p] = id;
        }
    }
    Ok((0..1usize << k)
        .map(|j| SignPattern {
            index: j,
            tau: tau_of(j, k),
            orbit_id: orbit_of[j],
        })
        .collect())
}

/// Orbit classes of an enumerated pattern list, as lists of pattern indices
/// ordered by rotation power.
pub fn orbit_partition(patterns: &[SignPattern]) -> Vec<Vec<usize>> {
    let n_orbits = patterns.iter().map(|p| p.orbit_id + 1).max().unwrap_or(0);
    let k = patterns.first().map_or(0, |p| p.tau.len());
    let m = k / 2;
    let mut reps = vec![usize::MAX; n_orbits];
    for p in patterns {
        reps[p.orbit_id] = reps[p.orbit_id].min(p.index);
    }
    reps.into_iter()
        .map(|r| {
            let mut cls = vec![r];
            let mut j = rotate_index(r, m);
            while j != r {
                cls.push(j);
                j = rotate_index(j, m);
            }
            cls
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rotate_t1;

    #[test]
    fn single_antenna_listing() {
        let p = enumerate_patterns(1).unwrap();
        let taus: Vec<Vec<f64>> = p.iter().map(|s| s.tau.clone()).collect();
        assert_eq!(
            taus,
            vec![vec![-1.0, -1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![1.0, 1.0]]
        );
    }

    #[test]
    fn pattern_counts_and_extremes() {
        for m in 1..=4 {
            let p = enumerate_patterns(m).unwrap();
            assert_eq!(p.len(), 1 << (2 * m));
            assert!(p[0].tau.iter().all(|&t| t == -1.0));
            assert!(p.last().unwrap().tau.iter().all(|&t| t == 1.0));
            let mut second = vec![-1.0; 2 * m];
            second[2 * m - 1] = 1.0;
            assert_eq!(p[1].tau, second);
        }
        assert!(matches!(enumerate_patterns(0), Err(Error::UnsupportedAntennaCount(0))));
        assert!(matches!(enumerate_patterns(7), Err(Error::UnsupportedAntennaCount(7))));
    }

    #[test]
    fn single_antenna_orbit_is_everything() {
        let cls = orbit_partition(&enumerate_patterns(1).unwrap());
        // (−1,−1) → (−1,+1) → (+1,+1) → (+1,−1)
        assert_eq!(cls, vec![vec![0, 1, 3, 2]]);
    }

    #[test]
    fn orbit_counts() {
        for m in 1..=5 {
            let cls = orbit_partition(&enumerate_patterns(m).unwrap());
            assert_eq!(cls.len(), 1 << (2 * m - 2));
            assert!(cls.iter().all(|c| c.len() == 4));
        }
    }

    #[test]
    fn index_rotation_matches_vector_rotation() {
        for m in 1..=3 {
            let k = 2 * m;
            for j in 0..1 << k {
                assert_eq!(tau_of(rotate_index(j, m), k), rotate_t1(&tau_of(j, k)));
            }
        }
    }
}
