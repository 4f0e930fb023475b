//! Voxelwise majority-vote ensembling.

use crate::volume::LabelVolume;
use crate::{Error, Result};

/// Foreground where strictly more than half of the masks are foreground.
pub fn majority_vote(masks: &[LabelVolume]) -> Result<LabelVolume> {
    if masks.len() < 2 {
        return Err(Error::TooFewMasks(masks.len()));
    }
    let geometry = *masks[0].geometry();
    for m in &masks[1..] {
        geometry.ensure_same(m.geometry())?;
    }
    let mut votes = vec![0usize; geometry.voxel_count()];
    for m in masks {
        for i in m.foreground_indices() {
            votes[i] += 1;
        }
    }
    let k = masks.len();
    LabelVolume::from_bits(geometry, votes.into_iter().map(|v| u8::from(2 * v > k)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::GridGeometry;
    use proptest::prelude::*;

    fn single(bits: &[u8]) -> LabelVolume {
        LabelVolume::from_bits(GridGeometry::isotropic([bits.len(), 1, 1]).unwrap(), bits.to_vec()).unwrap()
    }

    #[test]
    fn strict_majority() {
        // voxel 0 in 3 of 5 masks, voxel 1 in 2 of 5
        let five: Vec<LabelVolume> = [[1, 1], [1, 1], [1, 0], [0, 0], [0, 0]]
            .iter()
            .map(|b| single(b))
            .collect();
        assert_eq!(majority_vote(&five).unwrap().voxels(), &[1, 0]);
        let four: Vec<LabelVolume> = [[1, 1], [1, 1], [0, 1], [0, 0]].iter().map(|b| single(b)).collect();
        assert_eq!(majority_vote(&four).unwrap().voxels(), &[0, 1]);
    }

    #[test]
    fn errors() {
        assert!(matches!(majority_vote(&[single(&[1])]), Err(Error::TooFewMasks(1))));
        assert!(matches!(
            majority_vote(&[single(&[1]), single(&[1, 0])]),
            Err(Error::GeometryMismatch(_))
        ));
    }

    proptest! {
        #[test]
        fn bounded_by_inputs(bits in proptest::collection::vec(proptest::collection::vec(0u8..2, 27), 2..6)) {
            let masks: Vec<LabelVolume> = bits.iter().map(|b| single(b)).collect();
            let out = majority_vote(&masks).unwrap();
            let total: usize = masks.iter().map(LabelVolume::foreground_count).sum();
            prop_assert!(out.foreground_count() <= total);
            let same = vec![masks[0].clone(); masks.len()];
            prop_assert_eq!(majority_vote(&same).unwrap(), masks[0].clone());
        }
    }
}
