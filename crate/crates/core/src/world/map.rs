use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::BuildingDef;
use crate::geom::Cell;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PlacementError {
    #[error("cell {cell} is outside the {width}x{height} map")]
    OutOfBounds { cell: Cell, width: u32, height: u32 },
    #[error("cell {cell} is already occupied by building {building_id}")]
    Overlap { cell: Cell, building_id: u32 },
}

/// One occupied cell of a placed building.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occupant {
    pub cell: Cell,
    pub building_id: u32,
    /// Index into [`WorldMap::placements`].
    pub placement: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equipment_id: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub building_id: u32,
    pub kind: String,
    pub assets: String,
    pub origin: Cell,
    /// Translated occupied cells of the building, row-major.
    pub cells: Vec<Occupant>,
}

/// A piece of equipment as it sits on the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EquipmentInstance {
    pub cell: Cell,
    pub building_id: u32,
    pub equipment_id: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MapRepr {
    width: u32,
    height: u32,
    placements: Vec<Placement>,
}

/// Placement map. The occupancy grid is derived from the placements and is
/// rebuilt on deserialization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MapRepr", into = "MapRepr")]
pub struct WorldMap {
    width: u32,
    height: u32,
    placements: Vec<Placement>,
    occupancy: Vec<Option<Occupant>>,
}

impl WorldMap {
    pub fn new(width: u32, height: u32) -> Self {
        assert!(width > 0 && height > 0, "map dimensions must be positive");
        Self {
            width,
            height,
            placements: Vec::new(),
            occupancy: vec![None; (width * height) as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn placements(&self) -> &[Placement] {
        &self.placements
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.x >= 0 && cell.y >= 0 && (cell.x as u32) < self.width && (cell.y as u32) < self.height
    }

    fn index(&self, cell: Cell) -> Result<usize, PlacementError> {
        if self.in_bounds(cell) {
            Ok(cell.y as usize * self.width as usize + cell.x as usize)
        } else {
            Err(PlacementError::OutOfBounds {
                cell,
                width: self.width,
                height: self.height,
            })
        }
    }

    pub fn occupant(&self, cell: Cell) -> Result<Option<&Occupant>, PlacementError> {
        Ok(self.occupancy[self.index(cell)?].as_ref())
    }

    /// True when the cell is off-map or covered by a building.
    pub fn is_blocked(&self, cell: Cell) -> bool {
        !matches!(self.occupant(cell), Ok(None))
    }

    /// The cells a placement of `building` at `origin` would occupy.
    fn footprint(&self, building: &BuildingDef, origin: Cell) -> Vec<Occupant> {
        building
            .occupied()
            .map(|(c, r, slot)| Occupant {
                cell: origin.offset(c as i32, r as i32),
                building_id: building.id,
                placement: self.placements.len(),
                equipment_id: (slot != 0).then_some(slot),
            })
            .collect()
    }

    /// Check that a placement would succeed without applying it.
    pub fn check_placement(&self, building: &BuildingDef, origin: Cell) -> Result<(), PlacementError> {
        for occ in self.footprint(building, origin) {
            if let Some(existing) = self.occupant(occ.cell)? {
                return Err(PlacementError::Overlap {
                    cell: occ.cell,
                    building_id: existing.building_id,
                });
            }
        }
        Ok(())
    }

    /// Place a building with its top-left block at `origin`. All-or-nothing:
    /// on error the map is unchanged. Returns the placement index.
    pub fn place_building(
        &mut self,
        building: &BuildingDef,
        origin: Cell,
    ) -> Result<usize, PlacementError> {
        self.check_placement(building, origin)?;
        let cells = self.footprint(building, origin);
        for occ in &cells {
            let i = self.index(occ.cell)?;
            self.occupancy[i] = Some(*occ);
        }
        self.placements.push(Placement {
            building_id: building.id,
            kind: building.kind.clone(),
            assets: building.assets.clone(),
            origin,
            cells,
        });
        Ok(self.placements.len() - 1)
    }

    /// The `(building id, equipment id)` at `cell`, if equipment sits there.
    pub fn resolve_equipment_at(&self, cell: Cell) -> Result<Option<(u32, u32)>, PlacementError> {
        Ok(self
            .occupant(cell)?
            .and_then(|o| o.equipment_id.map(|e| (o.building_id, e))))
    }

    /// All placed equipment in placement order, then row-major within a building.
    pub fn equipment(&self) -> impl Iterator<Item = EquipmentInstance> + '_ {
        self.placements.iter().flat_map(|p| {
            p.cells.iter().filter_map(|o| {
                o.equipment_id.map(|equipment_id| EquipmentInstance {
                    cell: o.cell,
                    building_id: o.building_id,
                    equipment_id,
                })
            })
        })
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|o| o.is_some()).count()
    }

    pub fn has_building_kind(&self, kind: &str) -> bool {
        self.placements.iter().any(|p| p.kind == kind)
    }
}

impl From<WorldMap> for MapRepr {
    fn from(m: WorldMap) -> Self {
        MapRepr {
            width: m.width,
            height: m.height,
            placements: m.placements,
        }
    }
}

impl TryFrom<MapRepr> for WorldMap {
    type Error = String;

    fn try_from(repr: MapRepr) -> Result<Self, Self::Error> {
        if repr.width == 0 || repr.height == 0 {
            return Err("map dimensions must be positive".into());
        }
        let mut map = WorldMap::new(repr.width, repr.height);
        for (index, placement) in repr.placements.into_iter().enumerate() {
            for occ in &placement.cells {
                let i = map.index(occ.cell).map_err(|e| e.to_string())?;
                if map.occupancy[i].is_some() {
                    return Err(format!("overlapping placement at {}", occ.cell));
                }
                map.occupancy[i] = Some(Occupant { placement: index, ..*occ });
            }
            map.placements.push(placement);
        }
        Ok(map)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn store(blocks: Vec<Vec<u8>>, equipment: Vec<u32>) -> BuildingDef {
        BuildingDef {
            assets: "store_v1.2_0719".into(),
            id: 1,
            price: 2000,
            kind: "store".into(),
            blocks,
            equipment_slots: equipment,
        }
    }

    #[test]
    fn single_placement_occupies_four_cells() {
        let mut map = WorldMap::new(10, 10);
        map.place_building(&store(vec![vec![1, 1], vec![1, 1]], vec![]), Cell::new(0, 0))
            .unwrap();
        assert_eq!(map.occupied_count(), 4);
    }

    #[test]
    fn overlapping_placement_rejected_and_map_unchanged() {
        let mut map = WorldMap::new(10, 10);
        let b = store(vec![vec![1, 1], vec![1, 1]], vec![]);
        map.place_building(&b, Cell::new(0, 0)).unwrap();
        let before = map.clone();
        let err = map.place_building(&b, Cell::new(1, 1)).unwrap_err();
        assert_eq!(
            err,
            PlacementError::Overlap { cell: Cell::new(1, 1), building_id: 1 }
        );
        assert_eq!(map, before);
    }

    #[test]
    fn placement_past_edge_is_out_of_bounds() {
        let mut map = WorldMap::new(10, 10);
        let err = map
            .place_building(&store(vec![vec![1, 1], vec![1, 1]], vec![]), Cell::new(9, 9))
            .unwrap_err();
        assert!(matches!(err, PlacementError::OutOfBounds { .. }));
        assert_eq!(map.occupied_count(), 0);
    }

    #[test]
    fn resolves_equipment_slots() {
        let mut map = WorldMap::new(10, 10);
        map.place_building(&store(vec![vec![1, 1], vec![1, 1]], vec![0, 0, 1, 0]), Cell::new(3, 3))
            .unwrap();
        assert_eq!(map.resolve_equipment_at(Cell::new(3, 4)).unwrap(), Some((1, 1)));
        assert_eq!(map.resolve_equipment_at(Cell::new(4, 4)).unwrap(), None);
        assert_eq!(map.resolve_equipment_at(Cell::new(0, 0)).unwrap(), None);
        assert!(matches!(
            map.resolve_equipment_at(Cell::new(-1, 0)),
            Err(PlacementError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn zero_cells_do_not_occupy() {
        let mut map = WorldMap::new(4, 4);
        let l_shape = store(vec![vec![1, 0], vec![1, 1]], vec![]);
        map.place_building(&l_shape, Cell::new(0, 0)).unwrap();
        assert!(!map.is_blocked(Cell::new(1, 0)));
        map.place_building(&store(vec![vec![1]], vec![]), Cell::new(1, 0)).unwrap();
    }

    #[test]
    fn serde_round_trip_rebuilds_occupancy() {
        let mut map = WorldMap::new(8, 6);
        map.place_building(&store(vec![vec![1, 1]], vec![1, 0]), Cell::new(2, 2)).unwrap();
        let json = serde_json::to_string(&map).unwrap();
        let back: WorldMap = serde_json::from_str(&json).unwrap();
        assert_eq!(back, map);
        assert!(back.is_blocked(Cell::new(3, 2)));
    }

    proptest! {
        // Occupancy equals the disjoint union of each successful placement's translated 1-cells.
        #[test]
        fn occupancy_is_disjoint_union(
            shapes in prop::collection::vec(
                (prop::collection::vec(prop::collection::vec(0u8..2, 3), 1..4), 0i32..12, 0i32..12),
                1..12,
            )
        ) {
            let mut map = WorldMap::new(12, 12);
            let mut expected = std::collections::BTreeSet::new();
            for (i, (blocks, x, y)) in shapes.into_iter().enumerate() {
                if blocks.iter().flatten().all(|v| *v == 0) { continue; }
                let mut b = store(blocks, vec![]);
                b.id = i as u32 + 1;
                let cells: Vec<Cell> = b.occupied().map(|(c, r, _)| Cell::new(x + c as i32, y + r as i32)).collect();
                if map.place_building(&b, Cell::new(x, y)).is_ok() {
                    for c in cells {
                        prop_assert!(expected.insert(c), "cell {c} claimed twice");
                    }
                }
            }
            let actual: std::collections::BTreeSet<Cell> = (0..12)
                .flat_map(|y| (0..12).map(move |x| Cell::new(x, y)))
                .filter(|c| map.is_blocked(*c))
                .collect();
            prop_assert_eq!(actual, expected);
        }
    }
}
