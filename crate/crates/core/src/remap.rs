// SPDX-License-Identifier: Apache-2.0

//! Compacts the wide manager-side ID space into `max_uniq_ids` dense slots.

use thiserror::Error;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct RemapEntry {
    raw_id: u32,
    active_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RemapError {
    #[error("release of inactive mapped id {0}")]
    UnderflowRelease(u16),
}

/// Result of a mapping request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapOutcome {
    Mapped(u16),
    Stall,
}

#[derive(Debug, Clone)]
pub struct RemapTable {
    entries: Vec<RemapEntry>,
}

impl RemapTable {
    pub fn new(max_uniq_ids: u16) -> Self {
        assert!(max_uniq_ids >= 1, "at least one unique id is required");
        RemapTable { entries: vec![RemapEntry::default(); max_uniq_ids as usize] }
    }

    pub fn max_uniq_ids(&self) -> u16 {
        self.entries.len() as u16
    }

    /// Existing slot for an active raw ID.
    pub fn lookup(&self, raw_id: u32) -> Option<u16> {
        self.entries
            .iter()
            .position(|e| e.active_count > 0 && e.raw_id == raw_id)
            .map(|i| i as u16)
    }

    /// Whether `map(raw_id)` would succeed, without side effects.
    pub fn can_map(&self, raw_id: u32) -> bool {
        self.lookup(raw_id).is_some() || self.entries.iter().any(|e| e.active_count == 0)
    }

    pub fn map(&mut self, raw_id: u32) -> MapOutcome {
        let slot = match self.lookup(raw_id) {
            Some(s) => s as usize,
            None => match self.entries.iter().position(|e| e.active_count == 0) {
                Some(free) => {
                    self.entries[free].raw_id = raw_id;
                    free
                }
                None => return MapOutcome::Stall,
            },
        };
        self.entries[slot].active_count += 1;
        MapOutcome::Mapped(slot as u16)
    }

    pub fn release(&mut self, mapped: u16) -> Result<(), RemapError> {
        let e = self
            .entries
            .get_mut(mapped as usize)
            .filter(|e| e.active_count > 0)
            .ok_or(RemapError::UnderflowRelease(mapped))?;
        e.active_count -= 1;
        Ok(())
    }

    pub fn active_count(&self, mapped: u16) -> u32 {
        self.entries.get(mapped as usize).map_or(0, |e| e.active_count)
    }

    pub fn raw_of(&self, mapped: u16) -> Option<u32> {
        self.entries
            .get(mapped as usize)
            .filter(|e| e.active_count > 0)
            .map(|e| e.raw_id)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.iter().all(|e| e.active_count == 0)
    }

    pub fn clear(&mut self) {
        self.entries.iter_mut().for_each(|e| e.active_count = 0);
    }
}
