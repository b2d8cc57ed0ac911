//! The abstract CFG: nodes `(pc, sub)`, state-changing and guard edges, and
//! per-edge Def/Use variable sets for every opcode family.

pub mod build;
pub mod dot;
pub mod effect;
pub mod state;
pub mod step;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::frontend::{Contract, VarId};
use crate::u256::U256;

pub use build::{build_cfg, BuildError};
pub use effect::{CallApplied, CallKind, CallPhase, CallSemantics, CallSpec, Effect, GasCost};
pub use state::{CfgState, World};
pub use step::{step, StepError};

/// A symbolic location: a concrete 256-bit constant or the top element that
/// stands for all dynamic cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Loc {
    Const(U256),
    Top,
}

impl Loc {
    pub fn constant(&self) -> Option<U256> {
        match self {
            Loc::Const(v) => Some(*v),
            Loc::Top => None,
        }
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Loc::Const(v) => write!(f, "{}", v),
            Loc::Top => write!(f, "TOP"),
        }
    }
}

/// Scalar components of the local execution environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LocalVar {
    Actor,
    Input,
    Sender,
    Value,
    Code,
}

impl LocalVar {
    pub fn name(self) -> &'static str {
        match self {
            LocalVar::Actor => "actor",
            LocalVar::Input => "input",
            LocalVar::Sender => "sender",
            LocalVar::Value => "value",
            LocalVar::Code => "code",
        }
    }
}

/// Scalar components of the global environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GlobalVar {
    Parent,
    Beneficiary,
    Difficulty,
    Number,
    GasLimit,
    Timestamp,
    Origin,
    Prize,
}

impl GlobalVar {
    pub const ALL: [GlobalVar; 8] = [
        GlobalVar::Parent,
        GlobalVar::Beneficiary,
        GlobalVar::Difficulty,
        GlobalVar::Number,
        GlobalVar::GasLimit,
        GlobalVar::Timestamp,
        GlobalVar::Origin,
        GlobalVar::Prize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GlobalVar::Parent => "parent",
            GlobalVar::Beneficiary => "beneficiary",
            GlobalVar::Difficulty => "difficulty",
            GlobalVar::Number => "number",
            GlobalVar::GasLimit => "gaslimit",
            GlobalVar::Timestamp => "timestamp",
            GlobalVar::Origin => "origin",
            GlobalVar::Prize => "prize",
        }
    }
}

/// A CFG state variable. Memory and storage cells are split into the static
/// layer (written at statically known addresses) and the dynamic layer
/// (written at unknown addresses); gas, the active-word counter, and the
/// external world are indexed per program counter.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variable {
    Stack(VarId),
    MemS(Loc),
    MemD(Loc),
    StorS(Loc),
    StorD(Loc),
    Gas(u32),
    Msize(u32),
    Local(LocalVar),
    Global(GlobalVar),
    External(u32),
    Temporal(Box<Variable>),
}

impl Variable {
    pub fn tmp(inner: Variable) -> Variable {
        debug_assert!(!matches!(inner, Variable::Temporal(_)), "Temporal never nests");
        Variable::Temporal(Box::new(inner))
    }

    pub fn is_temporal(&self) -> bool {
        matches!(self, Variable::Temporal(_))
    }

    /// Strips one temporal layer.
    pub fn base(&self) -> &Variable {
        match self {
            Variable::Temporal(inner) => inner,
            other => other,
        }
    }

    /// May the two variables denote the same state cell? Top locations stand
    /// for all cells of their layer; external snapshots alias across pcs.
    pub fn overlaps(&self, other: &Variable) -> bool {
        use Variable::*;
        match (self, other) {
            (Stack(a), Stack(b)) => a == b,
            (MemS(a), MemS(b)) | (MemD(a), MemD(b)) | (StorS(a), StorS(b)) | (StorD(a), StorD(b)) => {
                matches!(a, Loc::Top) || matches!(b, Loc::Top) || a == b
            }
            (Gas(a), Gas(b)) | (Msize(a), Msize(b)) => a == b,
            (Local(a), Local(b)) => a == b,
            (Global(a), Global(b)) => a == b,
            (External(_), External(_)) => true,
            (Temporal(a), Temporal(b)) => a.overlaps(b),
            _ => false,
        }
    }

    /// Does a definition of `self` end the reach of a flowing definition of
    /// `flowing`? Only exact concrete matches kill; a Top write is weak.
    pub fn kills(&self, flowing: &Variable) -> bool {
        use Variable::*;
        match (self, flowing) {
            (MemS(Loc::Const(a)), MemS(Loc::Const(b)))
            | (MemD(Loc::Const(a)), MemD(Loc::Const(b)))
            | (StorS(Loc::Const(a)), StorS(Loc::Const(b)))
            | (StorD(Loc::Const(a)), StorD(Loc::Const(b))) => a == b,
            (MemS(_), _) | (MemD(_), _) | (StorS(_), _) | (StorD(_), _) => false,
            (External(_), External(_)) => true,
            (Temporal(a), Temporal(b)) => a.kills(b),
            (a, b) => a == b && !matches!(a, Temporal(_)),
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variable::Stack(v) => write!(f, "{}", v),
            Variable::MemS(l) => write!(f, "mem.S[{}]", l),
            Variable::MemD(l) => write!(f, "mem.D[{}]", l),
            Variable::StorS(l) => write!(f, "stor.S[{}]", l),
            Variable::StorD(l) => write!(f, "stor.D[{}]", l),
            Variable::Gas(pc) => write!(f, "gas@{}", pc),
            Variable::Msize(pc) => write!(f, "msize@{}", pc),
            Variable::Local(v) => write!(f, "el.{}", v.name()),
            Variable::Global(v) => write!(f, "eg.{}", v.name()),
            Variable::External(pc) => write!(f, "world@{}", pc),
            Variable::Temporal(v) => write!(f, "tmp({})", v),
        }
    }
}

pub type VarSet = BTreeSet<Variable>;

/// Does the set contain a member that may alias `var`?
pub fn set_overlaps(set: &VarSet, var: &Variable) -> bool {
    set.iter().any(|v| v.overlaps(var))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeId {
    /// `(pc, sub)`: sub 0 is the initial node for the pc.
    N(u32, u16),
    Halt,
    Exception,
}

impl NodeId {
    pub fn pc(&self) -> Option<u32> {
        match self {
            NodeId::N(pc, _) => Some(*pc),
            _ => None,
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::N(pc, sub) => write!(f, "({},{})", pc, sub),
            NodeId::Halt => write!(f, "halt"),
            NodeId::Exception => write!(f, "exception"),
        }
    }
}

/// A guard predicate on the branch condition variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Guard {
    pub cond: VarId,
    pub nonzero: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Label {
    State(Effect),
    Guard(Guard),
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub label: Label,
    pub defs: VarSet,
    pub uses: VarSet,
}

impl Edge {
    pub fn is_guard(&self) -> bool {
        matches!(self.label, Label::Guard(_))
    }
}

/// The materialized abstract CFG for one contract.
#[derive(Debug, Clone)]
pub struct Cfg {
    pub contract: Contract,
    pub callstack_depth: u32,
    pub edges: Vec<Edge>,
    pub out: BTreeMap<NodeId, Vec<usize>>,
    pub call_specs: BTreeMap<u32, CallSpec>,
}

impl Cfg {
    pub fn out_edges(&self, node: NodeId) -> impl Iterator<Item = &Edge> {
        self.out
            .get(&node)
            .into_iter()
            .flatten()
            .map(move |&i| &self.edges[i])
    }

    pub fn nodes(&self) -> BTreeSet<NodeId> {
        let mut nodes = BTreeSet::new();
        for e in &self.edges {
            nodes.insert(e.src);
            nodes.insert(e.dst);
        }
        nodes.insert(NodeId::Halt);
        nodes.insert(NodeId::Exception);
        nodes
    }

    /// Rule-derived Def and Use sets of an edge.
    pub fn def_use<'a>(&'a self, edge: &'a Edge) -> (&'a VarSet, &'a VarSet) {
        (&edge.defs, &edge.uses)
    }

    pub fn entry(&self) -> NodeId {
        NodeId::N(self.contract.entry, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_family_semantics() {
        let top = Variable::MemD(Loc::Top);
        let c = Variable::MemD(Loc::Const(U256::from_u64(4)));
        let s = Variable::MemS(Loc::Const(U256::from_u64(4)));
        assert!(top.overlaps(&c));
        assert!(c.overlaps(&top));
        assert!(!c.overlaps(&s));
        assert!(Variable::External(3).overlaps(&Variable::External(9)));
        assert!(!Variable::Gas(3).overlaps(&Variable::Gas(9)));
    }

    #[test]
    fn kill_is_concrete_only() {
        let top = Variable::MemD(Loc::Top);
        let c = Variable::MemD(Loc::Const(U256::from_u64(4)));
        assert!(!top.kills(&c));
        assert!(!c.kills(&top));
        assert!(c.kills(&c));
        assert!(Variable::Stack(VarId(1)).kills(&Variable::Stack(VarId(1))));
    }
}
