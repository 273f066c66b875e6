//! Problem instances: products with their routes, tool groups with machines,
//! setups, periodic maintenance and the lots to be produced.
//!
//! Instances are plain immutable data once built. [`InstanceBuilder`] checks
//! references and duplicates; the remaining type-level invariants (batch
//! bounds, maintenance windows, route contiguity) are reported by
//! [`validate_instance`] so that broken inputs can still be inspected.

mod facts;
mod generate;
mod validate;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use facts::{parse_facts, serialize_facts, ParseError, ParseErrorKind};
pub use generate::{generate_instance, GeneratorError, GeneratorParams};
pub use validate::{validate_instance, Diagnostic, DiagnosticKind};

/// A ground term of the fact format: a nonnegative integer or a symbol.
///
/// The derived order puts integers before symbols, integers numerically and
/// symbols lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Int(u64),
    Sym(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid term `{0}`: expected a decimal integer or a symbol [a-z][A-Za-z0-9_]*")]
pub struct TermError(pub String);

impl Term {
    pub fn is_int(&self) -> bool {
        matches!(self, Term::Int(_))
    }

    pub fn as_int(&self) -> Option<u64> {
        match self {
            Term::Int(v) => Some(*v),
            Term::Sym(_) => None,
        }
    }

    pub(crate) fn is_symbol(s: &str) -> bool {
        let mut chars = s.chars();
        match chars.next() {
            Some(c) if c.is_ascii_lowercase() => {}
            _ => return false,
        }
        chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
    }
}

impl FromStr for Term {
    type Err = TermError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) {
            s.parse::<u64>().map(Term::Int).map_err(|_| TermError(s.to_string()))
        } else if Term::is_symbol(s) {
            Ok(Term::Sym(s.to_string()))
        } else {
            Err(TermError(s.to_string()))
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Int(v) => write!(f, "{v}"),
            Term::Sym(s) => f.write_str(s),
        }
    }
}

impl From<u64> for Term {
    fn from(v: u64) -> Self {
        Term::Int(v)
    }
}

impl From<&str> for Term {
    /// Panics on strings that are neither integers nor symbols; meant for
    /// literals in code and tests. Use [`str::parse`] for untrusted input.
    fn from(s: &str) -> Self {
        s.parse().expect("valid term literal")
    }
}

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(into = "String", try_from = "String")]
        pub struct $name(pub Term);

        impl $name {
            pub fn new(term: impl Into<Term>) -> Self {
                $name(term.into())
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }

        impl FromStr for $name {
            type Err = TermError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                s.parse().map($name)
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.0.to_string()
            }
        }

        impl TryFrom<String> for $name {
            type Error = TermError;
            fn try_from(s: String) -> Result<Self, Self::Error> {
                s.parse()
            }
        }

        impl From<u64> for $name {
            fn from(v: u64) -> Self {
                $name(Term::Int(v))
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(Term::from(s))
            }
        }
    };
}

id_type!(
    /// Name of a tool group.
    ToolGroupId
);
id_type!(
    /// Label of a machine, unique within its tool group.
    MachineId
);
id_type!(
    /// A declared (positive) setup of some tool group.
    SetupId
);
id_type!(ProductId);
id_type!(LotId);
id_type!(
    /// Label of a periodic maintenance operation.
    MaintLabel
);

/// Setup requirement of a production operation. `Any` is setup `0` of the
/// fact format and is satisfied by whatever is currently installed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SetupReq {
    Any,
    Setup(SetupId),
}

impl SetupReq {
    pub fn setup(&self) -> Option<&SetupId> {
        match self {
            SetupReq::Any => None,
            SetupReq::Setup(s) => Some(s),
        }
    }
}

impl fmt::Display for SetupReq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetupReq::Any => f.write_str("0"),
            SetupReq::Setup(s) => s.fmt(f),
        }
    }
}

/// The `index`-th operation in the route of `product`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OpSpec {
    pub product: ProductId,
    pub index: u32,
    pub group: ToolGroupId,
    pub proc_time: u64,
    pub min_batch: u32,
    pub max_batch: u32,
    pub setup: SetupReq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub product: ProductId,
    /// Sorted by `index`; a valid route has indexes `1..=len`.
    pub steps: Vec<OpSpec>,
}

impl Route {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn step(&self, index: u32) -> Option<&OpSpec> {
        self.steps
            .binary_search_by_key(&index, |op| op.index)
            .ok()
            .map(|pos| &self.steps[pos])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetupSpec {
    pub group: ToolGroupId,
    pub id: SetupId,
    pub change_time: u64,
    /// Production slots that should run under this setup before it is
    /// changed again.
    pub min_ops: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Trigger {
    /// Counts processed lots.
    Lots,
    /// Accumulates per-lot processing time shares.
    Time,
}

impl Trigger {
    pub fn keyword(self) -> &'static str {
        match self {
            Trigger::Lots => "lots",
            Trigger::Time => "time",
        }
    }
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaintenanceSpec {
    pub group: ToolGroupId,
    pub label: MaintLabel,
    pub trigger: Trigger,
    pub min: u64,
    pub max: u64,
    pub duration: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Machine {
    pub group: ToolGroupId,
    pub id: MachineId,
}

impl fmt::Display for Machine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.group, self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lot {
    pub id: LotId,
    pub product: ProductId,
}

/// A complete scheduling problem.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Instance {
    pub routes: BTreeMap<ProductId, Route>,
    pub setups: BTreeMap<(ToolGroupId, SetupId), SetupSpec>,
    /// Per group, sorted by label.
    pub maints: BTreeMap<ToolGroupId, Vec<MaintenanceSpec>>,
    /// Per group, in declaration order.
    pub machines: BTreeMap<ToolGroupId, Vec<Machine>>,
    /// Sorted by [`compare_lot_ids`] over the full id set.
    pub lots: Vec<Lot>,
}

/// Total order on lot identifiers: numeric when every id is an integer,
/// string-lexicographic otherwise.
pub fn compare_lot_ids(a: &LotId, b: &LotId, all_int: bool) -> Ordering {
    if all_int {
        a.cmp(b)
    } else {
        a.to_string().cmp(&b.to_string())
    }
}

pub(crate) fn sort_lots(lots: &mut [Lot]) {
    let all_int = lots.iter().all(|l| l.id.0.is_int());
    lots.sort_by(|a, b| compare_lot_ids(&a.id, &b.id, all_int));
}

impl Instance {
    pub fn builder() -> InstanceBuilder {
        InstanceBuilder::default()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
            && self.setups.is_empty()
            && self.maints.is_empty()
            && self.machines.is_empty()
            && self.lots.is_empty()
    }

    pub fn route(&self, product: &ProductId) -> Option<&Route> {
        self.routes.get(product)
    }

    pub fn lot(&self, id: &LotId) -> Option<&Lot> {
        self.lots.iter().find(|l| &l.id == id)
    }

    /// Position of the lot in the instance's total lot order.
    pub fn lot_position(&self, id: &LotId) -> Option<usize> {
        self.lots.iter().position(|l| &l.id == id)
    }

    pub fn op(&self, product: &ProductId, index: u32) -> Option<&OpSpec> {
        self.routes.get(product)?.step(index)
    }

    /// Operation spec of the `index`-th step of `lot`.
    pub fn lot_op(&self, lot: &LotId, index: u32) -> Option<&OpSpec> {
        let lot = self.lot(lot)?;
        self.op(&lot.product, index)
    }

    pub fn group_machines(&self, group: &ToolGroupId) -> &[Machine] {
        self.machines.get(group).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn all_machines(&self) -> impl Iterator<Item = &Machine> {
        self.machines.values().flatten()
    }

    pub fn machine_count(&self) -> usize {
        self.machines.values().map(Vec::len).sum()
    }

    pub fn setup_spec(&self, group: &ToolGroupId, id: &SetupId) -> Option<&SetupSpec> {
        self.setups.get(&(group.clone(), id.clone()))
    }

    pub fn maintenances(&self, group: &ToolGroupId) -> &[MaintenanceSpec] {
        self.maints.get(group).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn maintenance(&self, group: &ToolGroupId, label: &MaintLabel) -> Option<&MaintenanceSpec> {
        self.maintenances(group).iter().find(|m| &m.label == label)
    }

    /// Total number of production operations over all lots.
    pub fn operation_count(&self) -> usize {
        self.lots
            .iter()
            .map(|l| self.routes.get(&l.product).map_or(0, Route::len))
            .sum()
    }

    pub fn groups(&self) -> BTreeSet<&ToolGroupId> {
        self.machines.keys().collect()
    }
}

/// Which kind of declaration an error refers to, with its position among
/// declarations of that kind as handed to the builder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeclRef {
    Route(usize),
    Setup(usize),
    Maintenance(usize),
    Machine(usize),
    Lot(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("duplicate declaration: {what}")]
    Duplicate { what: String, decl: DeclRef },
    #[error("dangling reference: {what}")]
    Dangling { what: String, decl: DeclRef },
}

impl BuildError {
    pub fn decl(&self) -> DeclRef {
        match self {
            BuildError::Duplicate { decl, .. } | BuildError::Dangling { decl, .. } => *decl,
        }
    }
}

/// Collects declarations in any order and assembles an [`Instance`].
#[derive(Debug, Default, Clone)]
pub struct InstanceBuilder {
    ops: Vec<OpSpec>,
    setups: Vec<SetupSpec>,
    maints: Vec<MaintenanceSpec>,
    machines: Vec<Machine>,
    lots: Vec<Lot>,
}

impl InstanceBuilder {
    pub fn route_step(&mut self, op: OpSpec) -> &mut Self {
        self.ops.push(op);
        self
    }

    pub fn setup(&mut self, spec: SetupSpec) -> &mut Self {
        self.setups.push(spec);
        self
    }

    pub fn maintenance(&mut self, spec: MaintenanceSpec) -> &mut Self {
        self.maints.push(spec);
        self
    }

    pub fn machine(&mut self, group: impl Into<ToolGroupId>, id: impl Into<MachineId>) -> &mut Self {
        self.machines.push(Machine {
            group: group.into(),
            id: id.into(),
        });
        self
    }

    pub fn lot(&mut self, id: impl Into<LotId>, product: impl Into<ProductId>) -> &mut Self {
        self.lots.push(Lot {
            id: id.into(),
            product: product.into(),
        });
        self
    }

    pub fn build(self) -> Result<Instance, BuildError> {
        let mut inst = Instance::default();

        for (n, m) in self.machines.into_iter().enumerate() {
            let list = inst.machines.entry(m.group.clone()).or_default();
            if list.iter().any(|x| x.id == m.id) {
                return Err(BuildError::Duplicate {
                    what: format!("tool({},{})", m.group, m.id),
                    decl: DeclRef::Machine(n),
                });
            }
            list.push(m);
        }

        for (n, op) in self.ops.into_iter().enumerate() {
            if !inst.machines.contains_key(&op.group) {
                return Err(BuildError::Dangling {
                    what: format!(
                        "route({},{},..) names tool group {} without machines",
                        op.product, op.index, op.group
                    ),
                    decl: DeclRef::Route(n),
                });
            }
            let route = inst.routes.entry(op.product.clone()).or_insert_with(|| Route {
                product: op.product.clone(),
                steps: Vec::new(),
            });
            match route.steps.binary_search_by_key(&op.index, |s| s.index) {
                Ok(_) => {
                    return Err(BuildError::Duplicate {
                        what: format!("route({},{},..)", op.product, op.index),
                        decl: DeclRef::Route(n),
                    })
                }
                Err(pos) => route.steps.insert(pos, op),
            }
        }

        for (n, s) in self.setups.into_iter().enumerate() {
            if !inst.machines.contains_key(&s.group) {
                return Err(BuildError::Dangling {
                    what: format!("setup({},{},..) names tool group without machines", s.group, s.id),
                    decl: DeclRef::Setup(n),
                });
            }
            let key = (s.group.clone(), s.id.clone());
            if inst.setups.contains_key(&key) {
                return Err(BuildError::Duplicate {
                    what: format!("setup({},{},..)", s.group, s.id),
                    decl: DeclRef::Setup(n),
                });
            }
            inst.setups.insert(key, s);
        }

        for (n, m) in self.maints.into_iter().enumerate() {
            if !inst.machines.contains_key(&m.group) {
                return Err(BuildError::Dangling {
                    what: format!("pm({},{},..) names tool group without machines", m.group, m.label),
                    decl: DeclRef::Maintenance(n),
                });
            }
            let list = inst.maints.entry(m.group.clone()).or_default();
            match list.binary_search_by(|x| x.label.cmp(&m.label)) {
                Ok(_) => {
                    return Err(BuildError::Duplicate {
                        what: format!("pm({},{},..)", m.group, m.label),
                        decl: DeclRef::Maintenance(n),
                    })
                }
                Err(pos) => list.insert(pos, m),
            }
        }

        let mut seen = BTreeSet::new();
        for (n, lot) in self.lots.iter().enumerate() {
            if !seen.insert(&lot.id) {
                return Err(BuildError::Duplicate {
                    what: format!("lot({})", lot.id),
                    decl: DeclRef::Lot(n),
                });
            }
            if !inst.routes.contains_key(&lot.product) {
                return Err(BuildError::Dangling {
                    what: format!("lot({},{}) names product without a route", lot.id, lot.product),
                    decl: DeclRef::Lot(n),
                });
            }
        }
        inst.lots = self.lots;
        sort_lots(&mut inst.lots);
        Ok(inst)
    }
}
