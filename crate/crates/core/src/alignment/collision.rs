use std::collections::HashMap;

use super::mapping::{AlignmentRecord, CollisionResolution, Scope};
use super::AlignmentError;

/// Assigns unique names per scope in the order records are offered: the
/// first claimant keeps its selection, later ones fall back to their next
/// best free candidate, then to their original name.
#[derive(Debug, Default)]
pub struct CollisionResolver {
    claimed: HashMap<Scope, HashMap<String, String>>,
}

impl CollisionResolver {
    /// Starts with the fixed names of records that were not aligned, so
    /// aligned components steer around them.
    pub fn new<'a>(fixed: impl IntoIterator<Item = &'a AlignmentRecord>) -> Self {
        let mut resolver = Self::default();
        for r in fixed {
            resolver.claim(r.scope(), &r.aligned_name, &r.path());
        }
        resolver
    }

    fn claim(&mut self, scope: Scope, name: &str, owner: &str) {
        self.claimed
            .entry(scope)
            .or_default()
            .insert(name.to_string(), owner.to_string());
    }

    fn owner(&self, scope: &Scope, name: &str) -> Option<&str> {
        self.claimed
            .get(scope)
            .and_then(|m| m.get(name))
            .map(String::as_str)
    }

    /// Settles `record.aligned_name` and `collision_resolution`. Records
    /// without a report must have been passed to [`CollisionResolver::new`].
    pub fn resolve(&mut self, record: &mut AlignmentRecord) -> Result<(), AlignmentError> {
        let Some(report) = &record.peakedness_report else {
            return Ok(());
        };
        let scope = record.scope();
        let path = record.path();
        let ranked = report.ranked();
        let free = ranked
            .iter()
            .position(|r| self.owner(&scope, &r.name).is_none());
        let (name, resolution) = match free {
            Some(0) => (ranked[0].name.clone(), CollisionResolution::None),
            Some(i) => (ranked[i].name.clone(), CollisionResolution::NextBest),
            None => match self.owner(&scope, &record.original_name) {
                None => (
                    record.original_name.clone(),
                    CollisionResolution::KeptOriginal,
                ),
                Some(holder) => {
                    let mut conflict = vec![holder.to_string(), path.clone()];
                    conflict.sort();
                    return Err(AlignmentError::Collision {
                        scope: scope.to_string(),
                        name: record.original_name.clone(),
                        conflict,
                    });
                }
            },
        };
        self.claim(scope, &name, &path);
        record.aligned_name = name;
        record.collision_resolution = resolution;
        Ok(())
    }
}

/// Batch form: resolves records given in document order.
pub fn resolve_collisions(records: &mut [AlignmentRecord]) -> Result<(), AlignmentError> {
    let mut resolver =
        CollisionResolver::new(records.iter().filter(|r| r.peakedness_report.is_none()));
    for r in records.iter_mut() {
        resolver.resolve(r)?;
    }
    Ok(())
}
