//! Closed-vocabulary semantic map: rooms, partitions and labelled items with
//! axis-aligned bounding boxes.
//!
//! The room list order defines the index space used for one-hot occupancy
//! vectors throughout the simulator. Partitions are the spatial subdivisions
//! over which item relevancy is aggregated; each partition belongs to one room.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl BoundingBox {
    /// Builds a box, rejecting inverted or non-finite corners.
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        let b = BoundingBox { min, max };
        b.check()?;
        Ok(b)
    }

    fn check(&self) -> Result<()> {
        for k in 0..3 {
            if !self.min[k].is_finite() || !self.max[k].is_finite() {
                return Err(Error::MapValidation("non-finite coordinate".into()));
            }
            if self.min[k] > self.max[k] {
                return Err(Error::MapValidation(format!(
                    "min corner exceeds max corner on axis {k} ({} > {})",
                    self.min[k], self.max[k]
                )));
            }
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|k| self.max[k] - self.min[k]).product()
    }

    pub fn centroid(&self) -> [f64; 3] {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        ]
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }
}

/// Volume of the intersection of two boxes; zero when they are disjoint or
/// only touch.
pub fn overlap_volume(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let mut v = 1.0;
    for k in 0..3 {
        let lo = a.min[k].max(b.min[k]);
        let hi = a.max[k].min(b.max[k]);
        if hi <= lo {
            return 0.0;
        }
        v *= hi - lo;
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct Room {
    pub name: String,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub id: u32,
    pub label: String,
    pub position: [f64; 3],
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub id: u32,
    pub name: String,
    pub bbox: BoundingBox,
    pub room_index: usize,
}

/// Immutable after construction; share it by reference across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMap {
    rooms: Vec<Room>,
    items: Vec<Item>,
    partitions: Vec<Partition>,
}

impl SemanticMap {
    /// Validates and builds a map.
    ///
    /// A map without partitions gets one room-level partition per room,
    /// numbered by room index.
    pub fn new(rooms: Vec<Room>, items: Vec<Item>, mut partitions: Vec<Partition>) -> Result<Self> {
        if rooms.is_empty() {
            return Err(Error::MapValidation("map needs at least one room".into()));
        }
        for room in &rooms {
            room.bbox
                .check()
                .map_err(|e| Error::MapValidation(format!("room `{}`: {}", room.name, strip(e))))?;
        }
        let mut seen = BTreeSet::new();
        for item in &items {
            if !seen.insert(item.id) {
                return Err(Error::MapValidation(format!("duplicate item id {}", item.id)));
            }
            item.bbox
                .check()
                .map_err(|e| Error::MapValidation(format!("item {} (`{}`): {}", item.id, item.label, strip(e))))?;
            if item.label.trim().is_empty() {
                return Err(Error::MapValidation(format!("item {} has an empty label", item.id)));
            }
            if !item.bbox.contains(item.position) {
                return Err(Error::MapValidation(format!(
                    "item {} (`{}`): position lies outside its bounding box",
                    item.id, item.label
                )));
            }
        }
        if partitions.is_empty() {
            partitions = rooms
                .iter()
                .enumerate()
                .map(|(i, r)| Partition {
                    id: i as u32,
                    name: r.name.clone(),
                    bbox: r.bbox,
                    room_index: i,
                })
                .collect();
        }
        let mut seen = BTreeSet::new();
        for p in &partitions {
            if !seen.insert(p.id) {
                return Err(Error::MapValidation(format!("duplicate partition id {}", p.id)));
            }
            p.bbox
                .check()
                .map_err(|e| Error::MapValidation(format!("partition {}: {}", p.id, strip(e))))?;
            if p.room_index >= rooms.len() {
                return Err(Error::MapValidation(format!(
                    "partition {}: room_index {} out of range ({} rooms)",
                    p.id,
                    p.room_index,
                    rooms.len()
                )));
            }
        }
        partitions.sort_by_key(|p| p.id);
        Ok(SemanticMap {
            rooms,
            items,
            partitions,
        })
    }

    pub fn rooms(&self) -> &[Room] {
        &self.rooms
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    /// Partitions sorted by id.
    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn n_rooms(&self) -> usize {
        self.rooms.len()
    }

    pub fn item(&self, id: u32) -> Option<&Item> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn partition(&self, id: u32) -> Option<&Partition> {
        self.partitions.iter().find(|p| p.id == id)
    }

    /// Items carrying `label`, in map order.
    pub fn items_with_label<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a Item> + 'a {
        self.items.iter().filter(move |i| i.label == label)
    }

    /// Room index of every item, through its assigned partition.
    pub fn item_rooms(&self) -> BTreeMap<u32, usize> {
        assign_items_to_partitions(self)
            .into_iter()
            .map(|(item, part)| (item, self.partition(part).map(|p| p.room_index).unwrap_or(0)))
            .collect()
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::MapValidation(m) => m,
        other => other.to_string(),
    }
}

/// Assigns every item to the partition its box overlaps most.
///
/// Equal overlaps go to the lowest partition id. Items that overlap no
/// partition go to the partition whose centroid is nearest the item position
/// (again lowest id on ties). Returns an empty mapping for a map without
/// partitions.
pub fn assign_items_to_partitions(map: &SemanticMap) -> BTreeMap<u32, u32> {
    map.items
        .iter()
        .filter_map(|item| assign_item(item, &map.partitions).map(|p| (item.id, p)))
        .collect()
}

fn assign_item(item: &Item, partitions: &[Partition]) -> Option<u32> {
    // partitions are sorted by id, so strict comparisons keep the lowest id
    let mut best: Option<(u32, f64)> = None;
    for p in partitions {
        let v = overlap_volume(&item.bbox, &p.bbox);
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((p.id, v));
        }
    }
    match best {
        Some((id, v)) if v > 0.0 => Some(id),
        Some(_) => {
            let mut nearest: Option<(u32, f64)> = None;
            for p in partitions {
                let c = p.bbox.centroid();
                let d: f64 = (0..3).map(|k| (c[k] - item.position[k]).powi(2)).sum();
                if nearest.is_none_or(|(_, bd)| d < bd) {
                    nearest = Some((p.id, d));
                }
            }
            nearest.map(|(id, _)| id)
        }
        None => None,
    }
}

/// Number of items per label (`n_l`).
pub fn label_multiplicities(map: &SemanticMap) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for item in &map.items {
        *counts.entry(item.label.clone()).or_insert(0) += 1;
    }
    counts
}

// ---- file format ----

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    rooms: Vec<RoomRecord>,
    #[serde(default)]
    items: Vec<ItemRecord>,
    #[serde(default)]
    partitions: Vec<PartitionRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoomRecord {
    name: String,
    min: Vec<f64>,
    max: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ItemRecord {
    id: u32,
    label: String,
    position: Vec<f64>,
    min: Vec<f64>,
    max: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartitionRecord {
    id: u32,
    name: String,
    room_index: usize,
    min: Vec<f64>,
    max: Vec<f64>,
}

/// 2D coordinates get a unit-height z extent so one geometry path serves both.
fn point(v: &[f64], z2d: f64, what: &str) -> Result<[f64; 3]> {
    match v {
        [x, y] => Ok([*x, *y, z2d]),
        [x, y, z] => Ok([*x, *y, *z]),
        _ => Err(Error::MapValidation(format!(
            "{what}: expected 2 or 3 coordinates, got {}",
            v.len()
        ))),
    }
}

fn bbox(min: &[f64], max: &[f64], what: &str) -> Result<BoundingBox> {
    let b = BoundingBox {
        min: point(min, 0.0, what)?,
        max: point(max, 1.0, what)?,
    };
    b.check()
        .map_err(|e| Error::MapValidation(format!("{what}: {}", strip(e))))?;
    Ok(b)
}

impl SemanticMap {
    /// Parses a map from its JSON text.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: MapFile = serde_json::from_str(text).map_err(|e| Error::MapParse {
            path: "<inline>".into(),
            message: e.to_string(),
        })?;
        Self::from_file_records(file)
    }

    fn from_file_records(file: MapFile) -> Result<Self> {
        let rooms = file
            .rooms
            .iter()
            .map(|r| {
                Ok(Room {
                    name: r.name.clone(),
                    bbox: bbox(&r.min, &r.max, &format!("room `{}`", r.name))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let items = file
            .items
            .iter()
            .map(|i| {
                let what = format!("item {} (`{}`)", i.id, i.label);
                Ok(Item {
                    id: i.id,
                    label: i.label.clone(),
                    position: point(&i.position, 0.5, &what)?,
                    bbox: bbox(&i.min, &i.max, &what)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let partitions = file
            .partitions
            .iter()
            .map(|p| {
                Ok(Partition {
                    id: p.id,
                    name: p.name.clone(),
                    room_index: p.room_index,
                    bbox: bbox(&p.min, &p.max, &format!("partition {}", p.id))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SemanticMap::new(rooms, items, partitions)
    }

    /// Serializes back to the JSON file format.
    pub fn to_json(&self) -> String {
        let file = MapFile {
            rooms: self
                .rooms
                .iter()
                .map(|r| RoomRecord {
                    name: r.name.clone(),
                    min: r.bbox.min.to_vec(),
                    max: r.bbox.max.to_vec(),
                })
                .collect(),
            items: self
                .items
                .iter()
                .map(|i| ItemRecord {
                    id: i.id,
                    label: i.label.clone(),
                    position: i.position.to_vec(),
                    min: i.bbox.min.to_vec(),
                    max: i.bbox.max.to_vec(),
                })
                .collect(),
            partitions: self
                .partitions
                .iter()
                .map(|p| PartitionRecord {
                    id: p.id,
                    name: p.name.clone(),
                    room_index: p.room_index,
                    min: p.bbox.min.to_vec(),
                    max: p.bbox.max.to_vec(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("map serialization")
    }
}

/// Loads and validates a map file.
pub fn load_map(path: impl AsRef<Path>) -> Result<SemanticMap> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: MapFile = serde_json::from_str(&text).map_err(|e| Error::MapParse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    SemanticMap::from_file_records(file)
}
