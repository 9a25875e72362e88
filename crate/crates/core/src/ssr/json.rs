//! Canonical SSR JSON.
//!
//! ```text
//! {
//!   "attrs": {},
//!   "depth_convention": "smaller_is_nearer",
//!   "image_height": 4,
//!   "image_width": 4,
//!   "objects": {
//!     "1": {
//!       "attrs": {
//!         "centroid": {
//!           "point": [0.500000, 0.500000]
//!         }
//!       },
//!       "depth": 0.500000,
//!       "label": "cup",
//!       "mask": {
//!         "height": 4,
//!         "runs": [0, 2, 2, 2, 10],
//!         "width": 4
//!       }
//!     }
//!   },
//!   "revision": 0,
//!   "ssr_version": 1
//! }
//! ```
//!
//! Keys are sorted lexicographically (object ids included), floats carry six
//! decimals, and `label`/`depth` are `null` when absent.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer};

use super::{AttrValue, BinaryMask, SceneObject, SceneRep, SsrError, DEPTH_CONVENTION};
use crate::canonical::Canon;

pub const SSR_VERSION: i64 = 1;

pub fn ssr_serialize(scene: &SceneRep) -> String {
    scene_to_canon(scene).to_pretty()
}

pub(crate) fn scene_to_canon(scene: &SceneRep) -> Canon {
    let objects = scene
        .objects()
        .iter()
        .map(|o| (o.id.to_string(), object_to_canon(o)));
    Canon::object([
        ("attrs", attrs_to_canon(&scene.attrs)),
        ("depth_convention", Canon::str(DEPTH_CONVENTION)),
        ("image_height", Canon::Int(scene.image_height().into())),
        ("image_width", Canon::Int(scene.image_width().into())),
        ("objects", Canon::object(objects)),
        ("revision", Canon::Int(scene.revision() as i64)),
        ("ssr_version", Canon::Int(SSR_VERSION)),
    ])
}

fn object_to_canon(o: &SceneObject) -> Canon {
    Canon::object([
        ("attrs", attrs_to_canon(&o.attrs)),
        ("depth", Canon::opt_fixed(o.depth)),
        ("label", o.label.clone().map_or(Canon::Null, Canon::Str)),
        ("mask", mask_to_canon(&o.mask)),
    ])
}

pub(crate) fn mask_to_canon(m: &BinaryMask) -> Canon {
    Canon::object([
        ("height", Canon::Int(m.height().into())),
        (
            "runs",
            Canon::Array(m.runs().iter().map(|&r| Canon::Int(r.into())).collect()),
        ),
        ("width", Canon::Int(m.width().into())),
    ])
}

fn attrs_to_canon(attrs: &BTreeMap<String, AttrValue>) -> Canon {
    Canon::object(attrs.iter().map(|(k, v)| (k.clone(), attr_to_canon(v))))
}

pub(crate) fn attr_to_canon(v: &AttrValue) -> Canon {
    let (tag, value) = match v {
        AttrValue::Bool(b) => ("bool", Canon::Bool(*b)),
        AttrValue::Number(n) => ("number", Canon::Fixed(*n)),
        AttrValue::Point(x, y) => ("point", Canon::Array(vec![Canon::Fixed(*x), Canon::Fixed(*y)])),
        AttrValue::Object(id) => ("id", Canon::Int((*id).into())),
        AttrValue::Text(t) => ("text", Canon::str(t.clone())),
    };
    Canon::object([(tag, value)])
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    ssr_version: i64,
    depth_convention: String,
    image_width: u32,
    image_height: u32,
    revision: u64,
    attrs: BTreeMap<String, AttrDoc>,
    objects: ObjectEntries,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDoc {
    mask: BinaryMask,
    label: Option<String>,
    depth: Option<f64>,
    attrs: BTreeMap<String, AttrDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
enum AttrDoc {
    Bool(bool),
    Number(f64),
    Point([f64; 2]),
    Id(u32),
    Text(String),
}

impl From<AttrDoc> for AttrValue {
    fn from(a: AttrDoc) -> Self {
        match a {
            AttrDoc::Bool(b) => AttrValue::Bool(b),
            AttrDoc::Number(n) => AttrValue::Number(n),
            AttrDoc::Point([x, y]) => AttrValue::Point(x, y),
            AttrDoc::Id(id) => AttrValue::Object(id),
            AttrDoc::Text(t) => AttrValue::Text(t),
        }
    }
}

/// Object map that keeps entries in document order and rejects duplicate keys,
/// which a plain map would silently collapse.
struct ObjectEntries(Vec<(String, ObjectDoc)>);

impl<'de> Deserialize<'de> for ObjectEntries {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct EntriesVisitor;

        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = ObjectEntries;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from object id to object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<ObjectEntries, A::Error> {
                let mut entries: Vec<(String, ObjectDoc)> = Vec::new();
                while let Some(key) = map.next_key::<String>()? {
                    if entries.iter().any(|(k, _)| *k == key) {
                        return Err(de::Error::custom(format!("duplicate object id {key}")));
                    }
                    let value = map.next_value::<ObjectDoc>()?;
                    entries.push((key, value));
                }
                Ok(ObjectEntries(entries))
            }
        }

        deserializer.deserialize_map(EntriesVisitor)
    }
}

fn parse_error(field: impl Into<String>, message: impl Into<String>) -> SsrError {
    SsrError::Parse {
        field: field.into(),
        message: message.into(),
    }
}

pub fn ssr_parse(text: &str) -> Result<SceneRep, SsrError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let doc: SceneDoc = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        parse_error(if path == "." { "<root>".into() } else { path }, e.into_inner().to_string())
    })?;
    de.end()
        .map_err(|e| parse_error("<root>", e.to_string()))?;

    if doc.ssr_version != SSR_VERSION {
        return Err(parse_error(
            "ssr_version",
            format!("unsupported version {}", doc.ssr_version),
        ));
    }
    if doc.depth_convention != DEPTH_CONVENTION {
        return Err(parse_error(
            "depth_convention",
            format!("expected {DEPTH_CONVENTION:?}, got {:?}", doc.depth_convention),
        ));
    }

    let mut objects = Vec::with_capacity(doc.objects.0.len());
    for (key, o) in doc.objects.0 {
        let id: u32 = key
            .parse()
            .ok()
            .filter(|id: &u32| id.to_string() == key)
            .ok_or_else(|| parse_error(format!("objects.{key}"), "object id must be a canonical unsigned integer"))?;
        let field = |name: &str| format!("objects.{key}.{name}");
        o.mask
            .check_shape(doc.image_width, doc.image_height)
            .map_err(|e| parse_error(field("mask"), e.to_string()))?;
        if o.mask.is_empty() {
            return Err(parse_error(field("mask"), "mask has no foreground pixels"));
        }
        if let Some(d) = o.depth {
            if !(0.0..=1.0).contains(&d) {
                return Err(parse_error(field("depth"), format!("{d} outside [0, 1]")));
            }
        }
        if matches!(&o.label, Some(l) if l.is_empty()) {
            return Err(parse_error(field("label"), "label must be nonempty or null"));
        }
        objects.push(SceneObject {
            id,
            mask: o.mask,
            label: o.label,
            depth: o.depth,
            attrs: o.attrs.into_iter().map(|(k, v)| (k, v.into())).collect(),
        });
    }
    objects.sort_by_key(|o| o.id);

    let mut scene = SceneRep::new(doc.image_width, doc.image_height, objects)
        .map_err(|e| parse_error("objects", e.to_string()))?;
    scene.attrs = doc.attrs.into_iter().map(|(k, v)| (k, v.into())).collect();
    scene.set_revision(doc.revision);
    Ok(scene)
}
