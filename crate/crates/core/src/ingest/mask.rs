use rand::Rng;

use super::tree::{DataNode, DataTree, LeafValue};
use crate::rng::{stream_rng, Stream};

/// Replaces each leaf by a missing value independently with probability
/// `fraction`. One uniform draw is consumed per leaf position, observed or
/// not, so masks for different fractions share the same stream.
pub fn mask_missing(tree: &DataTree, fraction: f64, seed: u64) -> DataTree {
    let mut rng = stream_rng(seed, Stream::Mask);
    mask_with(tree, fraction, &mut rng)
}

pub fn mask_with<R: Rng + ?Sized>(tree: &DataTree, fraction: f64, rng: &mut R) -> DataTree {
    let fraction = fraction.clamp(0.0, 1.0);
    let mut root = tree.root.clone();
    mask_node(&mut root, fraction, rng);
    DataTree::new(root)
}

fn mask_node<R: Rng + ?Sized>(node: &mut DataNode, fraction: f64, rng: &mut R) {
    match node {
        DataNode::Het(fields) => fields
            .iter_mut()
            .for_each(|(_, c)| mask_node(c, fraction, rng)),
        DataNode::Hom(elems) => elems.iter_mut().for_each(|c| mask_node(c, fraction, rng)),
        DataNode::Leaf(v) => {
            let u: f64 = rng.random();
            if u < fraction {
                *v = LeafValue::Missing;
            }
        }
    }
}
