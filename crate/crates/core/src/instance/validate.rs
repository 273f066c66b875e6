use std::fmt;

use super::{Instance, SetupReq};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagnosticKind {
    EmptyRoute,
    RouteIndexGap,
    BatchBoundsInverted,
    ZeroMaxBatch,
    ZeroMinBatch,
    GroupWithoutMachines,
    UndeclaredSetup,
    MaintenanceBoundsInverted,
    ZeroMaintenanceMax,
    LotWithoutRoute,
}

impl DiagnosticKind {
    pub fn invariant(self) -> &'static str {
        match self {
            DiagnosticKind::EmptyRoute => "route is empty",
            DiagnosticKind::RouteIndexGap => "route indexes are not contiguous from 1",
            DiagnosticKind::BatchBoundsInverted => "min_batch exceeds max_batch",
            DiagnosticKind::ZeroMaxBatch => "max_batch must be positive",
            DiagnosticKind::ZeroMinBatch => "min_batch must be positive",
            DiagnosticKind::GroupWithoutMachines => "tool group has no machines",
            DiagnosticKind::UndeclaredSetup => "required setup is not declared for the tool group",
            DiagnosticKind::MaintenanceBoundsInverted => "maintenance min exceeds max",
            DiagnosticKind::ZeroMaintenanceMax => "maintenance max must be positive",
            DiagnosticKind::LotWithoutRoute => "lot product has no route",
        }
    }
}

/// One violated instance invariant and the entity it was found on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub entity: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.invariant(), self.entity)
    }
}

/// Checks the type-level invariants of an instance. Returns an empty list
/// for a valid instance.
pub fn validate_instance(inst: &Instance) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |kind, entity: String| out.push(Diagnostic { kind, entity });

    for (product, route) in &inst.routes {
        if route.steps.is_empty() {
            push(DiagnosticKind::EmptyRoute, format!("product {product}"));
        }
        for (pos, op) in route.steps.iter().enumerate() {
            let name = format!("route({},{})", op.product, op.index);
            if op.index as usize != pos + 1 {
                push(DiagnosticKind::RouteIndexGap, name.clone());
            }
            if op.max_batch == 0 {
                push(DiagnosticKind::ZeroMaxBatch, name.clone());
            }
            if op.min_batch == 0 {
                push(DiagnosticKind::ZeroMinBatch, name.clone());
            }
            if op.min_batch > op.max_batch {
                push(DiagnosticKind::BatchBoundsInverted, name.clone());
            }
            if inst.group_machines(&op.group).is_empty() {
                push(DiagnosticKind::GroupWithoutMachines, format!("{name} on {}", op.group));
            }
            if let SetupReq::Setup(s) = &op.setup {
                if inst.setup_spec(&op.group, s).is_none() {
                    push(
                        DiagnosticKind::UndeclaredSetup,
                        format!("{name} requires {s} on {}", op.group),
                    );
                }
            }
        }
    }
    for list in inst.maints.values() {
        for m in list {
            let name = format!("pm({},{})", m.group, m.label);
            if m.max == 0 {
                push(DiagnosticKind::ZeroMaintenanceMax, name.clone());
            }
            if m.min > m.max {
                push(DiagnosticKind::MaintenanceBoundsInverted, name);
            }
        }
    }
    for lot in &inst.lots {
        if !inst.routes.contains_key(&lot.product) {
            push(
                DiagnosticKind::LotWithoutRoute,
                format!("lot({},{})", lot.id, lot.product),
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::REFERENCE_FACTS;
    use crate::instance::parse_facts;

    #[test]
    fn reference_instance_is_clean() {
        assert_eq!(validate_instance(&parse_facts(REFERENCE_FACTS).unwrap()), vec![]);
    }

    #[test]
    fn inverted_batch_bounds() {
        let inst = parse_facts("tool(g,1). route(1,1,g,5,3,2,0). lot(1,1).").unwrap();
        let diags = validate_instance(&inst);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::BatchBoundsInverted);
        assert_eq!(diags[0].to_string(), "min_batch exceeds max_batch: route(1,1)");
    }

    #[test]
    fn inverted_maintenance_window() {
        let inst = parse_facts("tool(g,1). pm(g,m,lots,5,2,10).").unwrap();
        let diags = validate_instance(&inst);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::MaintenanceBoundsInverted);
    }

    #[test]
    fn gaps_and_undeclared_setups() {
        let inst = parse_facts("tool(g,1). route(1,2,g,5,1,1,s).").unwrap();
        let kinds: Vec<_> = validate_instance(&inst).into_iter().map(|d| d.kind).collect();
        assert_eq!(kinds, [DiagnosticKind::RouteIndexGap, DiagnosticKind::UndeclaredSetup]);
    }

    #[test]
    fn hand_built_dangling_entities() {
        let mut inst = parse_facts(REFERENCE_FACTS).unwrap();
        inst.machines.clear();
        inst.routes.clear();
        let kinds: Vec<_> = validate_instance(&inst).into_iter().map(|d| d.kind).collect();
        assert_eq!(
            kinds,
            [DiagnosticKind::LotWithoutRoute, DiagnosticKind::LotWithoutRoute]
        );
    }
}
