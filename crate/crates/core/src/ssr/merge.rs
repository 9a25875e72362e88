use std::collections::BTreeMap;

use super::{SceneObject, SsrError};

/// Consolidates same-label objects whose masks overlap or touch under
/// 8-connectivity, transitively.
///
/// Each group is replaced by one object at the position of its first member
/// with the union mask; unlabeled objects never merge. Groups of two or more
/// lose their depth and attributes since neither describes the union. Ids are
/// reassigned densely from 1 in first-appearance order.
pub fn merge_same_label(objects: &[SceneObject]) -> Result<Vec<SceneObject>, SsrError> {
    let n = objects.len();
    let mut parent: Vec<usize> = (0..n).collect();

    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, o) in objects.iter().enumerate() {
        if let Some(label) = o.label.as_deref() {
            by_label.entry(label).or_default().push(i);
        }
    }
    for members in by_label.values() {
        let dilated: Vec<_> = members.iter().map(|&i| objects[i].mask.dilate(1)).collect();
        for (a_pos, &a) in members.iter().enumerate() {
            for &b in &members[a_pos + 1..] {
                if find(&mut parent, a) == find(&mut parent, b) {
                    continue;
                }
                if dilated[a_pos].intersection_area(&objects[b].mask)? > 0 {
                    union(&mut parent, a, b);
                }
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    let mut ordered: Vec<Vec<usize>> = groups.into_values().collect();
    ordered.sort_by_key(|g| g[0]);

    ordered
        .into_iter()
        .enumerate()
        .map(|(k, group)| {
            let first = &objects[group[0]];
            let id = k as u32 + 1;
            if group.len() == 1 {
                return Ok(SceneObject { id, ..first.clone() });
            }
            let mut mask = first.mask.clone();
            for &i in &group[1..] {
                mask = mask.union(&objects[i].mask)?;
            }
            Ok(SceneObject::new(id, mask, first.label.clone()))
        })
        .collect()
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    // keep the lower index as root so group order is stable
    if ra < rb {
        parent[rb] = ra;
    } else {
        parent[ra] = rb;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssr::BinaryMask;

    fn obj(id: u32, label: Option<&str>, f: impl FnMut(u32, u32) -> bool) -> SceneObject {
        SceneObject::new(id, BinaryMask::from_fn(12, 12, f).unwrap(), label.map(String::from))
    }

    #[test]
    fn adjacent_cups_merge() {
        // 3x2 block at cols 0-2 and a 2x2 block starting diagonally adjacent
        let a = obj(1, Some("cup"), |x, y| x < 3 && y < 2);
        let b = obj(2, Some("cup"), |x, y| (3..5).contains(&x) && (2..4).contains(&y));
        let merged = merge_same_label(&[a, b]).unwrap();
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].mask.area(), 10);
        assert_eq!(merged[0].id, 1);
    }

    #[test]
    fn gap_keeps_objects_apart() {
        let a = obj(1, Some("cup"), |x, y| x < 2 && y < 2);
        let b = obj(2, Some("cup"), |x, y| (4..6).contains(&x) && y < 2);
        assert_eq!(merge_same_label(&[a, b]).unwrap().len(), 2);
    }

    #[test]
    fn different_labels_and_unlabeled_never_merge() {
        let a = obj(1, Some("cup"), |x, y| x < 3 && y < 3);
        let b = obj(2, Some("mug"), |x, y| x < 4 && y < 4);
        assert_eq!(merge_same_label(&[a.clone(), b]).unwrap().len(), 2);
        let u1 = obj(1, None, |x, y| x < 3 && y < 3);
        let u2 = obj(2, None, |x, y| x < 4 && y < 4);
        assert_eq!(merge_same_label(&[u1, u2]).unwrap().len(), 2);
    }

    #[test]
    fn transitive_chain_merges_and_ids_are_dense() {
        let a = obj(5, Some("rope"), |x, y| x == 0 && y == 0);
        let other = obj(6, Some("ball"), |x, y| x == 10 && y == 10);
        let b = obj(7, Some("rope"), |x, y| x == 1 && y == 1);
        let c = obj(9, Some("rope"), |x, y| x == 2 && y == 2);
        let merged = merge_same_label(&[a, other, b, c]).unwrap();
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0].label.as_deref(), Some("rope"));
        assert_eq!(merged[0].mask.area(), 3);
        assert_eq!((merged[0].id, merged[1].id), (1, 2));
    }

    #[test]
    fn idempotent() {
        let a = obj(1, Some("cup"), |x, y| x < 3 && y < 2);
        let b = obj(2, Some("cup"), |x, y| (3..5).contains(&x) && (2..4).contains(&y));
        let c = obj(3, None, |x, y| x > 8 && y > 8);
        let once = merge_same_label(&[a, b, c]).unwrap();
        assert_eq!(merge_same_label(&once).unwrap(), once);
    }
}
