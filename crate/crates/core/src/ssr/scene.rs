use std::collections::BTreeMap;

use super::{BinaryMask, SsrError};

pub type ObjectId = u32;

/// Relative depth convention recorded in every serialized scene.
pub const DEPTH_CONVENTION: &str = "smaller_is_nearer";

/// Derived attribute attached to an object or to the whole scene.
#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue {
    Bool(bool),
    Number(f64),
    Point(f64, f64),
    Object(ObjectId),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub id: ObjectId,
    pub mask: BinaryMask,
    /// `None` means the object is unlabeled.
    pub label: Option<String>,
    /// Relative depth in `[0, 1]`; `None` until depth has been aggregated.
    pub depth: Option<f64>,
    pub attrs: BTreeMap<String, AttrValue>,
}

impl SceneObject {
    pub fn new(id: ObjectId, mask: BinaryMask, label: Option<String>) -> Self {
        Self {
            id,
            mask,
            label,
            depth: None,
            attrs: BTreeMap::new(),
        }
    }

    pub fn label_str(&self) -> &str {
        self.label.as_deref().unwrap_or("<unlabeled>")
    }
}

/// Scene representation at a given refinement revision.
///
/// Objects are kept in strictly ascending id order; refinement only ever
/// appends objects with fresh ids, so list order and id order coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRep {
    image_width: u32,
    image_height: u32,
    objects: Vec<SceneObject>,
    pub attrs: BTreeMap<String, AttrValue>,
    revision: u64,
}

impl SceneRep {
    pub fn new(
        image_width: u32,
        image_height: u32,
        objects: Vec<SceneObject>,
    ) -> Result<Self, SsrError> {
        let mut scene = Self {
            image_width,
            image_height,
            objects: Vec::with_capacity(objects.len()),
            attrs: BTreeMap::new(),
            revision: 0,
        };
        for object in objects {
            scene.push(object)?;
        }
        Ok(scene)
    }

    pub fn image_width(&self) -> u32 {
        self.image_width
    }

    pub fn image_height(&self) -> u32 {
        self.image_height
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn get(&self, id: ObjectId) -> Option<&SceneObject> {
        self.objects
            .binary_search_by_key(&id, |o| o.id)
            .ok()
            .map(|i| &self.objects[i])
    }

    pub fn get_mut(&mut self, id: ObjectId) -> Option<&mut SceneObject> {
        self.objects
            .binary_search_by_key(&id, |o| o.id)
            .ok()
            .map(move |i| &mut self.objects[i])
    }

    pub fn contains(&self, id: ObjectId) -> bool {
        self.get(id).is_some()
    }

    pub fn next_id(&self) -> ObjectId {
        self.objects.last().map_or(1, |o| o.id + 1)
    }

    /// Appends an object, enforcing the scene invariants.
    pub fn push(&mut self, object: SceneObject) -> Result<(), SsrError> {
        object.mask.check_shape(self.image_width, self.image_height)?;
        if object.mask.is_empty() {
            return Err(SsrError::InvalidScene(format!("object {} has an empty mask", object.id)));
        }
        if let Some(last) = self.objects.last() {
            if object.id <= last.id {
                return Err(SsrError::InvalidScene(format!(
                    "object id {} is not greater than previous id {}",
                    object.id, last.id
                )));
            }
        }
        if let Some(d) = object.depth {
            if !(0.0..=1.0).contains(&d) {
                return Err(SsrError::InvalidScene(format!(
                    "object {} depth {d} outside [0, 1]",
                    object.id
                )));
            }
        }
        self.objects.push(object);
        Ok(())
    }

    /// Marks one completed refinement.
    pub fn bump_revision(&mut self) {
        self.revision += 1;
    }

    pub(crate) fn set_revision(&mut self, revision: u64) {
        self.revision = revision;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(id: ObjectId) -> SceneObject {
        SceneObject::new(id, BinaryMask::full(2, 2).unwrap(), None)
    }

    #[test]
    fn ids_must_ascend() {
        assert!(SceneRep::new(2, 2, vec![obj(1), obj(3)]).is_ok());
        assert!(matches!(
            SceneRep::new(2, 2, vec![obj(2), obj(2)]),
            Err(SsrError::InvalidScene(_))
        ));
    }

    #[test]
    fn rejects_empty_and_misshaped_masks() {
        let empty = SceneObject::new(1, BinaryMask::empty(2, 2).unwrap(), None);
        assert!(SceneRep::new(2, 2, vec![empty]).is_err());
        assert!(matches!(SceneRep::new(3, 2, vec![obj(1)]), Err(SsrError::Shape(_))));
    }

    #[test]
    fn lookup_and_next_id() {
        let s = SceneRep::new(2, 2, vec![obj(1), obj(4)]).unwrap();
        assert!(s.contains(4) && !s.contains(2));
        assert_eq!(s.next_id(), 5);
        assert_eq!(SceneRep::new(2, 2, vec![]).unwrap().next_id(), 1);
    }
}
