use std::collections::BTreeSet;
use std::fmt;

use super::{Circuit, PathId, Unit, UnitId};
use crate::ingest::{SchemaNode, SchemaPath};

/// The set of schema paths a unit models.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scope(pub BTreeSet<SchemaPath>);

impl Scope {
    pub fn contains(&self, p: &SchemaPath) -> bool {
        self.0.contains(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Smoothness,
    Decomposability,
    SetPlacement,
    RootScope,
    Ordering,
    Unreachable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub unit: UnitId,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unit {}: {:?}: {}", self.unit, self.kind, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StructureReport {
    pub violations: Vec<Violation>,
}

impl StructureReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn union_sorted(parts: &[&[PathId]]) -> (Vec<PathId>, bool) {
    let total: usize = parts.iter().map(|p| p.len()).sum();
    let mut all: Vec<PathId> = Vec::with_capacity(total);
    for p in parts {
        all.extend_from_slice(p);
    }
    all.sort_unstable();
    let before = all.len();
    all.dedup();
    let overlap = all.len() != before;
    (all, overlap)
}

impl Circuit {
    /// Scope of every unit as sorted path ids. Units are stored children
    /// first, so one forward sweep suffices.
    pub(crate) fn scope_ids(&self) -> Vec<Vec<PathId>> {
        let mut scopes: Vec<Vec<PathId>> = Vec::with_capacity(self.units.len());
        for u in &self.units {
            let s = match u {
                Unit::Input { leaves } => {
                    let mut ids: Vec<PathId> = leaves.iter().map(|l| l.path).collect();
                    ids.sort_unstable();
                    ids.dedup();
                    ids
                }
                Unit::Set { path, .. } => vec![*path],
                Unit::Sum { children, .. } | Unit::Product { children } => {
                    let parts: Vec<&[PathId]> = children
                        .iter()
                        .filter(|&&c| c < scopes.len())
                        .map(|&c| scopes[c].as_slice())
                        .collect();
                    union_sorted(&parts).0
                }
            };
            scopes.push(s);
        }
        scopes
    }

    fn to_scope(&self, ids: &[PathId]) -> Scope {
        Scope(ids.iter().map(|&i| self.paths[i].clone()).collect())
    }

    pub fn scope_of(&self, id: UnitId) -> Scope {
        let ids = self.scope_ids();
        self.to_scope(&ids[id])
    }

    /// Scope of each unit, indexed by unit id.
    pub fn scopes(&self) -> Vec<Scope> {
        self.scope_ids().iter().map(|s| self.to_scope(s)).collect()
    }

    /// Scope of the roots: every leaf and collection position reachable
    /// from the schema root through objects.
    pub fn full_scope(&self) -> Scope {
        Scope(
            super::anchor_items(&self.schema.root, &SchemaPath::root())
                .into_iter()
                .map(|i| i.path)
                .collect(),
        )
    }

    /// Lists every unit that breaks smoothness or decomposability, plus
    /// basic well-formedness problems. An empty report means the circuit is
    /// smooth and decomposable.
    pub fn validate_structure(&self) -> StructureReport {
        let mut violations = Vec::new();
        for (id, u) in self.units.iter().enumerate() {
            if let Some(&bad) = u.children().iter().find(|&&c| c >= id) {
                violations.push(Violation {
                    unit: id,
                    kind: ViolationKind::Ordering,
                    detail: format!("child {bad} is not stored before its parent"),
                });
            }
        }
        if !violations.is_empty() {
            return StructureReport { violations };
        }
        let scopes = self.scope_ids();
        for (id, u) in self.units.iter().enumerate() {
            match u {
                Unit::Sum { children, .. } => {
                    if let Some(&first) = children.first() {
                        for &c in &children[1..] {
                            if scopes[c] != scopes[first] {
                                violations.push(Violation {
                                    unit: id,
                                    kind: ViolationKind::Smoothness,
                                    detail: format!(
                                        "child {first} has scope {} but child {c} has scope {}",
                                        self.to_scope(&scopes[first]),
                                        self.to_scope(&scopes[c])
                                    ),
                                });
                                break;
                            }
                        }
                    }
                }
                Unit::Product { children } => {
                    let parts: Vec<&[PathId]> =
                        children.iter().map(|&c| scopes[c].as_slice()).collect();
                    if union_sorted(&parts).1 {
                        violations.push(Violation {
                            unit: id,
                            kind: ViolationKind::Decomposability,
                            detail: format!(
                                "children scopes overlap: {}",
                                children
                                    .iter()
                                    .map(|&c| self.to_scope(&scopes[c]).to_string())
                                    .collect::<Vec<_>>()
                                    .join(" / ")
                            ),
                        });
                    }
                }
                Unit::Set { path, feature, .. } => {
                    let p = &self.paths[*path];
                    let Some(SchemaNode::Hom { element, .. }) = self.schema.node(p) else {
                        violations.push(Violation {
                            unit: id,
                            kind: ViolationKind::SetPlacement,
                            detail: format!("set unit at non-collection path `{p}`"),
                        });
                        continue;
                    };
                    let expected = Scope(
                        super::anchor_items(element, &p.element())
                            .into_iter()
                            .map(|i| i.path)
                            .collect(),
                    );
                    let got = self.to_scope(&scopes[*feature]);
                    if got != expected {
                        violations.push(Violation {
                            unit: id,
                            kind: ViolationKind::SetPlacement,
                            detail: format!(
                                "feature scope {got} does not cover the element scope {expected}"
                            ),
                        });
                    }
                }
                Unit::Input { leaves } => {
                    for l in leaves {
                        let p = &self.paths[l.path];
                        if !matches!(self.schema.node(p), Some(SchemaNode::Leaf(_))) {
                            violations.push(Violation {
                                unit: id,
                                kind: ViolationKind::SetPlacement,
                                detail: format!("input unit at non-leaf path `{p}`"),
                            });
                        }
                    }
                }
            }
        }
        let full = self.full_scope();
        for &r in &self.roots {
            let s = self.to_scope(&scopes[r]);
            if s != full {
                violations.push(Violation {
                    unit: r,
                    kind: ViolationKind::RootScope,
                    detail: format!("root scope {s} differs from the full schema {full}"),
                });
            }
        }
        let mut reached = vec![false; self.units.len()];
        let mut stack: Vec<UnitId> = self.roots.clone();
        while let Some(u) = stack.pop() {
            if !std::mem::replace(&mut reached[u], true) {
                stack.extend_from_slice(self.units[u].children());
            }
        }
        if let Some(u) = reached.iter().position(|r| !r) {
            violations.push(Violation {
                unit: u,
                kind: ViolationKind::Unreachable,
                detail: "unit is not reachable from any root".into(),
            });
        }
        StructureReport { violations }
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{spsn_network, BuildConfig};
    use crate::circuit::{InputLeaf, LeafDist, Locator};
    use crate::ingest::{infer_schema, Schema};

    fn ab_schema() -> Schema {
        infer_schema([r#"{"a": 1.0, "b": 2.0}"#]).unwrap()
    }

    fn gaussian(path: PathId, field: usize, offset: usize) -> InputLeaf {
        InputLeaf {
            path,
            locator: Locator(vec![field]),
            dist: LeafDist::Gaussian {
                offset,
                standardize: None,
                integer: false,
            },
        }
    }

    fn hand_built(units: Vec<Unit>, n_params: usize) -> Circuit {
        let paths = vec![SchemaPath::root().field("a"), SchemaPath::root().field("b")];
        let root = units.len() - 1;
        Circuit::from_parts(ab_schema(), units, vec![root], vec![0.0; n_params], 0, paths).unwrap()
    }

    fn kinds(c: &Circuit) -> Vec<ViolationKind> {
        c.validate_structure().violations.iter().map(|v| v.kind).collect()
    }

    #[test]
    fn product_scope_is_union() {
        let c = hand_built(
            vec![
                Unit::Input { leaves: vec![gaussian(0, 0, 1)] },
                Unit::Input { leaves: vec![gaussian(1, 1, 3)] },
                Unit::Product { children: vec![0, 1] },
            ],
            5,
        );
        assert_eq!(c.scope_of(2), c.full_scope());
        assert_eq!(c.scope_of(2).len(), 2);
        assert!(c.validate_structure().is_ok());
    }

    #[test]
    fn sum_over_different_scopes_is_not_smooth() {
        let c = hand_built(
            vec![
                Unit::Input { leaves: vec![gaussian(0, 0, 1)] },
                Unit::Input { leaves: vec![gaussian(1, 1, 3)] },
                Unit::Sum { children: vec![0, 1], offset: 5 },
            ],
            7,
        );
        assert!(kinds(&c).contains(&ViolationKind::Smoothness));
    }

    #[test]
    fn product_over_overlapping_scopes_is_not_decomposable() {
        let c = hand_built(
            vec![
                Unit::Input { leaves: vec![gaussian(0, 0, 1), gaussian(1, 1, 3)] },
                Unit::Input { leaves: vec![gaussian(1, 1, 5)] },
                Unit::Product { children: vec![0, 1] },
            ],
            7,
        );
        assert_eq!(kinds(&c), [ViolationKind::Decomposability]);
    }

    #[test]
    fn built_roots_cover_the_schema_and_sets_sit_at_collections() {
        let schema = infer_schema([include_str!("../../tests/fixtures/molecule.json")]).unwrap();
        let c = spsn_network(&schema, &BuildConfig::default()).unwrap();
        assert!(c.validate_structure().is_ok());
        let full = c.full_scope();
        for &r in c.roots() {
            assert_eq!(c.scope_of(r), full);
        }
        let atoms = SchemaPath::root().field("atoms");
        let set = c
            .units()
            .iter()
            .position(|u| matches!(u, Unit::Set { path, .. } if c.path(*path) == &atoms))
            .unwrap();
        assert_eq!(c.scope_of(set), Scope([atoms].into_iter().collect()));
    }
}
