//! Movie knowledge base: exact-match constraint queries and suggested values.
//!
//! Matching is case-insensitive after trimming. A record that does not define
//! a constrained slot never matches, and the value `anything` matches every
//! record. Constraints on slots that are not KB attributes (`numberofpeople`,
//! `ticket`, `taskcomplete`) are accepted and ignored.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::act::{SlotValues, UserGoal};
use crate::error::{Error, Result};
use crate::schema::{DomainSchema, ANYTHING};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbRecord {
    pub id: usize,
    pub values: SlotValues,
}

impl KbRecord {
    pub fn get(&self, slot: &str) -> Option<&str> {
        self.values.get(slot).map(String::as_str)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResult {
    pub matches: Vec<usize>,
    /// For each constrained slot, how many records match once that slot's
    /// constraint is dropped.
    pub per_slot_counts: BTreeMap<String, usize>,
}

impl QueryResult {
    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }
}

pub fn values_equal(a: &str, b: &str) -> bool {
    a.trim().eq_ignore_ascii_case(b.trim())
}

#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    schema: Arc<DomainSchema>,
    records: Vec<KbRecord>,
    /// Per slot index: lowercased value to the ids of records holding it.
    index: Vec<HashMap<String, Vec<usize>>>,
    /// Bitset of the slot indices each record defines, and their union.
    masks: Vec<Vec<u64>>,
    union: Vec<u64>,
}

impl KnowledgeBase {
    pub fn new(schema: Arc<DomainSchema>, rows: Vec<SlotValues>) -> Result<Self> {
        let mut records = Vec::with_capacity(rows.len());
        for (id, row) in rows.into_iter().enumerate() {
            let mut values = SlotValues::new();
            for (slot, value) in row {
                if schema.slot(&slot).is_none() {
                    return Err(Error::UnknownSlot(slot));
                }
                if !schema.is_informable(&slot) {
                    return Err(Error::NotInformable(slot));
                }
                let value = value.trim().to_string();
                if value.is_empty() {
                    return Err(Error::Config(format!(
                        "KB record {id} has an empty value for `{slot}`"
                    )));
                }
                values.insert(slot, value);
            }
            records.push(KbRecord { id, values });
        }
        let mut index = vec![HashMap::new(); schema.num_slots()];
        for r in &records {
            for (slot, value) in &r.values {
                let i = schema.slot_index(slot).expect("checked above");
                index[i]
                    .entry(value.to_ascii_lowercase())
                    .or_insert_with(Vec::new)
                    .push(r.id);
            }
        }
        let words = schema.num_slots().div_ceil(64);
        let mut union = vec![0u64; words];
        let masks: Vec<Vec<u64>> = records
            .iter()
            .map(|r| {
                let mut m = vec![0u64; words];
                for slot in r.values.keys() {
                    let i = schema.slot_index(slot).expect("checked above");
                    m[i / 64] |= 1 << (i % 64);
                }
                union.iter_mut().zip(&m).for_each(|(u, w)| *u |= w);
                m
            })
            .collect();
        Ok(Self {
            schema,
            records,
            index,
            masks,
            union,
        })
    }

    pub fn load(path: impl AsRef<Path>, schema: Arc<DomainSchema>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, schema)
    }

    pub fn from_json(text: &str, schema: Arc<DomainSchema>) -> Result<Self> {
        let rows: Vec<SlotValues> =
            serde_json::from_str(text).map_err(|e| Error::parse("knowledge base", e))?;
        Self::new(schema, rows)
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<&SlotValues> = self.records.iter().map(|r| &r.values).collect();
        serde_json::to_string_pretty(&rows).expect("kb serializes")
    }

    pub fn schema(&self) -> &Arc<DomainSchema> {
        &self.schema
    }

    pub fn records(&self) -> &[KbRecord] {
        &self.records
    }

    pub fn record(&self, id: usize) -> Option<&KbRecord> {
        self.records.get(id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Constraints that actually restrict the lookup: KB attributes with a
    /// value other than the wildcard.
    fn effective<'a>(
        &self,
        constraints: &'a SlotValues,
    ) -> Result<Vec<(&'a str, &'a str)>> {
        let mut out = Vec::new();
        for (slot, value) in constraints {
            if self.schema.slot(slot).is_none() {
                return Err(Error::UnknownSlot(slot.clone()));
            }
            if !self.schema.is_informable(slot) {
                return Err(Error::NotInformable(slot.clone()));
            }
            if self.schema.is_lookup(slot) && !values_equal(value, ANYTHING) {
                out.push((slot.as_str(), value.as_str()));
            }
        }
        Ok(out)
    }

    pub fn query(&self, constraints: &SlotValues) -> Result<QueryResult> {
        let active = self.effective(constraints)?;
        let k = active.len();
        let postings: Vec<&[usize]> = active
            .iter()
            .map(|(slot, value)| {
                let i = self.schema.slot_index(slot).expect("validated slot");
                self.index[i]
                    .get(&value.trim().to_ascii_lowercase())
                    .map_or(&[][..], Vec::as_slice)
            })
            .collect();
        // hits[id] counts the constraints record `id` satisfies; a record one
        // short of all of them fails exactly one.
        let mut hits = vec![0usize; self.records.len()];
        for ids in &postings {
            for &id in *ids {
                hits[id] += 1;
            }
        }
        let matches: Vec<usize> = (0..self.records.len()).filter(|&id| hits[id] == k).collect();
        let mut relaxed = vec![0usize; k];
        if k > 0 {
            let near = hits.iter().filter(|&&h| h == k - 1).count();
            for (i, ids) in postings.iter().enumerate() {
                relaxed[i] = near - ids.iter().filter(|&&id| hits[id] == k - 1).count();
            }
        }
        let mut per_slot_counts = BTreeMap::new();
        for slot in constraints.keys() {
            per_slot_counts.insert(slot.clone(), matches.len());
        }
        for (i, (slot, _)) in active.iter().enumerate() {
            *per_slot_counts.get_mut(*slot).unwrap() += relaxed[i];
        }
        Ok(QueryResult {
            matches,
            per_slot_counts,
        })
    }

    /// Distinct values of `slot` among the records matching `constraints`,
    /// in first-seen order.
    pub fn suggest_values(&self, slot: &str, constraints: &SlotValues) -> Result<Vec<String>> {
        if self.schema.slot(slot).is_none() {
            return Err(Error::UnknownSlot(slot.to_string()));
        }
        if !self.schema.is_informable(slot) {
            return Err(Error::NotInformable(slot.to_string()));
        }
        let result = self.query(constraints)?;
        Ok(self.distinct_values(slot, &result.matches))
    }

    pub fn distinct_values(&self, slot: &str, ids: &[usize]) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for &id in ids {
            if let Some(v) = self.records[id].get(slot) {
                if seen.insert(v.to_lowercase()) {
                    out.push(v.to_string());
                }
            }
        }
        out
    }

    /// For each schema slot, whether any of the records `ids` defines it.
    pub fn slots_defined(&self, ids: &[usize]) -> Vec<bool> {
        let mut seen = vec![0u64; self.union.len()];
        for &id in ids {
            seen.iter_mut().zip(&self.masks[id]).for_each(|(s, m)| *s |= m);
            if seen == self.union {
                break;
            }
        }
        (0..self.schema.num_slots())
            .map(|i| seen[i / 64] >> (i % 64) & 1 == 1)
            .collect()
    }

    /// Every distinct value a slot takes anywhere in the KB.
    pub fn vocabulary(&self, slot: &str) -> Vec<String> {
        let ids: Vec<usize> = (0..self.records.len()).collect();
        self.distinct_values(slot, &ids)
    }

    pub fn satisfiable(&self, goal: &UserGoal) -> bool {
        let Ok(result) = self.query(&goal.inform_slots) else {
            return false;
        };
        if result.is_empty() {
            return false;
        }
        let ticket = self.schema.default_request_slot();
        goal.request_slots
            .keys()
            .filter(|s| s.as_str() != ticket)
            .all(|s| {
                result
                    .matches
                    .iter()
                    .any(|&id| self.records[id].get(s).is_some())
            })
    }
}
