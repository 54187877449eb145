use std::collections::BTreeMap;

use super::{squared_distance, FaceEmbedding};
use crate::error::{Error, Result};

pub const DEFAULT_MARGIN: f64 = 0.2;

/// Indices into a batch of embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

fn require_unit(e: &FaceEmbedding, role: &str) -> Result<()> {
    if !e.is_unit() {
        return Err(Error::Precondition(format!(
            "{role} is not unit-norm (‖v‖ = {})",
            e.norm()
        )));
    }
    Ok(())
}

/// `max(‖a − p‖² − ‖a − n‖² + α, 0)` over unit embeddings.
pub fn triplet_loss(
    anchor: &FaceEmbedding,
    positive: &FaceEmbedding,
    negative: &FaceEmbedding,
    margin: f64,
) -> Result<f64> {
    require_unit(anchor, "anchor")?;
    require_unit(positive, "positive")?;
    require_unit(negative, "negative")?;
    let ap = squared_distance(&anchor.vector, &positive.vector);
    let an = squared_distance(&anchor.vector, &negative.vector);
    Ok((ap - an + margin).max(0.0))
}

/// Semi-hard triplet selection.
///
/// For every ordered `(anchor, positive)` pair of the same identity, the
/// negative is the closest one strictly farther than the positive but inside
/// the margin (`d(a,p) < d(a,n) < d(a,p) + α`). When that band is empty the
/// closest negative overall is used. Ties go to the lower batch index.
pub fn mine_triplets(batch: &[FaceEmbedding], margin: f64) -> Result<Vec<Triplet>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in batch.iter().enumerate() {
        let id = e
            .identity
            .as_deref()
            .ok_or_else(|| Error::Data(format!("embedding {i} has no identity")))?;
        groups.entry(id).or_default().push(i);
    }
    if groups.len() < 2 {
        return Err(Error::Data("triplet mining needs at least two identities".into()));
    }
    if groups.values().all(|g| g.len() < 2) {
        return Err(Error::Data(
            "triplet mining needs an identity with at least two samples".into(),
        ));
    }

    let mut triplets = Vec::new();
    for (a, anchor) in batch.iter().enumerate() {
        let id = anchor.identity.as_deref().unwrap();
        let same = &groups[id];
        if same.len() < 2 {
            continue;
        }
        // Negatives sorted by (distance, index).
        let mut negatives: Vec<(f64, usize)> = batch
            .iter()
            .enumerate()
            .filter(|(_, e)| e.identity.as_deref() != Some(id))
            .map(|(n, e)| (squared_distance(&anchor.vector, &e.vector), n))
            .collect();
        negatives.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

        for &p in same.iter().filter(|&&p| p != a) {
            let d_ap = squared_distance(&anchor.vector, &batch[p].vector);
            let first_farther = negatives.partition_point(|&(d, _)| d <= d_ap);
            let negative = match negatives.get(first_farther) {
                Some(&(d, n)) if d < d_ap + margin => n,
                _ => negatives[0].1,
            };
            triplets.push(Triplet {
                anchor: a,
                positive: p,
                negative,
            });
        }
    }
    Ok(triplets)
}
