//! Edge effects as interpretable data, plus the call abstraction interface.

use std::collections::BTreeMap;

use super::state::{CfgState, World};
use crate::frontend::{BinOp, EnvOp, VarId};
use crate::u256::U256;

/// An address operand: refined to a constant by preprocessing, or read from
/// a stack variable at runtime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Addr {
    Known(U256),
    Reg(VarId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GasCost {
    Const(u64),
    /// EXP: 10 for zero exponent, else 10 + 10 * byte length of the exponent.
    Exp { exponent: VarId },
    /// Memory word access: extension cost for a 32-byte window plus a base.
    MemWord { addr: Addr, base: u64 },
    /// Window operations: extension cost plus base plus per-word charge.
    WindowWords {
        pos: Addr,
        len: Addr,
        base: u64,
        per_word: u64,
    },
    /// LOGn: extension cost + 375 + 8 per byte + 375 per topic.
    Log { pos: VarId, len: VarId, topics: u8 },
    /// SSTORE: 20000 when a zero slot becomes non-zero, else 5000.
    Sstore { key: Addr, val: VarId },
    /// SELFDESTRUCT: 37000 when the beneficiary account is new, else 5000.
    SelfDestruct { beneficiary: VarId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsizeExt {
    Word { addr: Addr },
    Window { pos: Addr, len: Addr },
}

/// Phases of the transaction-initiating instruction chains. Updates land in
/// temporal variables first and are carried over one by one afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CallPhase {
    Outcome,
    GasTemp,
    MsizeTemp,
    MemCellTemp(U256),
    /// Batch write of the whole known output window (unknown-input case).
    MemWindowTemp,
    MemRestTemp,
    CarryOutcome,
    CarryGas,
    CarryMsize,
    CarryMemCell(U256),
    CarryMemWindow,
    CarryMemRest,
    Reset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CallKind {
    Call,
    StaticCall,
    Create,
    Create2,
}

impl CallKind {
    pub fn mutates_world(self) -> bool {
        !matches!(self, CallKind::StaticCall)
    }
}

/// Static description of one call site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallSpec {
    pub pc: u32,
    pub pc_next: u32,
    pub kind: CallKind,
    pub y: VarId,
    pub gas: Option<VarId>,
    pub to: Option<VarId>,
    pub value: Option<VarId>,
    pub salt: Option<VarId>,
    pub in_off: VarId,
    pub in_len: VarId,
    pub out_off: Option<VarId>,
    pub out_len: Option<VarId>,
    pub pre_in_off: Option<U256>,
    pub pre_in_len: Option<U256>,
    pub pre_out_off: Option<U256>,
    pub pre_out_len: Option<U256>,
    /// Grounded word addresses of the known input window (empty otherwise).
    pub in_cells: Vec<U256>,
    /// Grounded word addresses of the known output window (empty otherwise).
    pub out_cells: Vec<U256>,
}

impl CallSpec {
    pub fn input_known(&self) -> bool {
        self.pre_in_off.is_some() && self.pre_in_len.is_some()
    }

    pub fn output_known(&self) -> bool {
        self.out_off.is_some() && self.pre_out_off.is_some() && self.pre_out_len.is_some()
    }

    /// Node-splitting offset for the memory phase, following the known/unknown
    /// window case table. The full-memory fan of the unknown-output cases is
    /// grounded to a single batch edge over the dynamic layer.
    pub fn node_offset(&self) -> NodeOffset {
        if self.kind == CallKind::Create || self.kind == CallKind::Create2 {
            return NodeOffset::NoMemory;
        }
        match (self.input_known(), self.output_known()) {
            (true, true) => NodeOffset::Cells(self.out_cells.len()),
            (true, false) => NodeOffset::FullFan,
            (false, true) => NodeOffset::One,
            (false, false) => NodeOffset::Zero,
        }
    }

    /// Number of memory-phase edges actually materialized.
    pub fn mem_phase_edges(&self) -> usize {
        match self.node_offset() {
            NodeOffset::Cells(n) => n + 1,
            NodeOffset::One => 2,
            NodeOffset::FullFan | NodeOffset::Zero => 1,
            NodeOffset::NoMemory => 0,
        }
    }
}

/// The four cases of the appendix node-offset table (plus the create case,
/// which has no memory phase at all).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeOffset {
    /// Both windows known: one node per output cell.
    Cells(usize),
    /// Input known, output unknown: the fan over all cells, grounded.
    FullFan,
    /// Input unknown, output known.
    One,
    /// Both unknown.
    Zero,
    NoMemory,
}

/// Result view of applying a call at a given site: the pieces the phase
/// edges pick apart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallApplied {
    pub y: U256,
    pub world: World,
    pub gas_next: U256,
    pub msize_next: U256,
    /// Post-call contents of the output window, keyed by word address.
    pub mem_out: BTreeMap<U256, U256>,
}

/// Closes the call abstraction with a concrete world model. Implementations
/// must be pure functions of the variables in the corresponding Use sets:
/// the call arguments, the input-window memory, the available gas, the
/// actor, the global environment, the contract storage, and the world
/// snapshot; `msize` may only influence `gas_next` and `msize_next`.
pub trait CallSemantics {
    fn apply_call(&self, spec: &CallSpec, state: &CfgState) -> CallApplied;
}

/// Refuses to step call edges; sufficient for call-free contracts.
pub struct NoCalls;

impl CallSemantics for NoCalls {
    fn apply_call(&self, spec: &CallSpec, _state: &CfgState) -> CallApplied {
        panic!(
            "contract has a {} at pc {} but no call semantics were provided",
            match spec.kind {
                CallKind::Call => "CALL",
                CallKind::StaticCall => "STATICCALL",
                CallKind::Create => "CREATE",
                CallKind::Create2 => "CREATE2",
            },
            spec.pc
        );
    }
}

/// One state-changing edge effect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    Id,
    Const { y: VarId, val: U256 },
    Copy { y: VarId, x: VarId },
    Bin { op: BinOp, y: VarId, a: VarId, b: VarId },
    Exp { y: VarId, a: VarId, b: VarId },
    IsZero { y: VarId, x: VarId },
    Not { y: VarId, x: VarId },
    AddMod { y: VarId, xs: [VarId; 3] },
    MulMod { y: VarId, xs: [VarId; 3] },
    Sha3 { y: VarId, off: VarId, len: VarId },
    EnvRead { y: VarId, src: EnvOp },
    CallDataLoad { y: VarId, x: VarId },
    Balance { y: VarId, x: VarId },
    ExtCodeSize { y: VarId, x: VarId },
    BlockHash { y: VarId, x: VarId },
    GasRead { y: VarId, pc: u32 },
    MsizeRead { y: VarId, pc: u32 },
    MemLoad { y: VarId, addr: Addr },
    MemStoreDyn { off: VarId, val: VarId },
    MemStoreS { loc: U256, val: VarId },
    MemClearD { loc: U256 },
    StorLoad { y: VarId, addr: Addr },
    StorStoreDyn { key: VarId, val: VarId },
    StorStoreS { loc: U256, val: VarId },
    StorClearD { loc: U256 },
    CallDataCopy { mpos: VarId, dpos: VarId, len: VarId },
    CodeCopy { mpos: VarId, cpos: VarId, len: VarId },
    ExtCodeCopy { addr: VarId, mpos: VarId, cpos: VarId, len: VarId },
    SelfDestruct { beneficiary: VarId },
    GasCharge { pc: u32, to_pcs: Vec<u32>, cost: GasCost },
    MsizeExtend { pc: u32, to_pc: u32, ext: MsizeExt },
    CallPhase { pc: u32, phase: CallPhase },
}
