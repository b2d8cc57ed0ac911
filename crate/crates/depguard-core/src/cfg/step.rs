//! Concrete execution of CFG edges: `step` applies the unique enabled edge
//! out of a node.

use super::effect::{Addr, CallPhase, CallSemantics, Effect, GasCost, MsizeExt};
use super::state::{CfgState, TempVal};
use super::{Cfg, Edge, Label, Loc, NodeId, Variable};
use crate::frontend::{BinOp, EnvOp, Op};
use crate::keccak;
use crate::u256::U256;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum StepError {
    #[error("node {0} has no outgoing edges")]
    NoEdges(NodeId),
    #[error("no guard enabled at node {0}")]
    Stuck(NodeId),
}

/// Applies the unique enabled edge out of `node`. Guard fans leave the state
/// unchanged; state edges apply their transformer.
pub fn step(
    cfg: &Cfg,
    node: NodeId,
    state: &CfgState,
    calls: &dyn CallSemantics,
) -> Result<(NodeId, CfgState), StepError> {
    let mut it = cfg.out_edges(node).peekable();
    if it.peek().is_none() {
        return Err(StepError::NoEdges(node));
    }
    let mut enabled: Option<&Edge> = None;
    for edge in cfg.out_edges(node) {
        match &edge.label {
            Label::State(_) => {
                enabled = Some(edge);
                break;
            }
            Label::Guard(g) => {
                let holds = state.var(g.cond).is_zero() != g.nonzero;
                if holds {
                    if enabled.is_some() {
                        // guards must be mutually exclusive
                        unreachable!("two guards enabled at {}", node);
                    }
                    enabled = Some(edge);
                }
            }
        }
    }
    let edge = enabled.ok_or(StepError::Stuck(node))?;
    let next = match &edge.label {
        Label::Guard(_) => state.clone(),
        Label::State(effect) => apply_effect(cfg, effect, state, calls),
    };
    Ok((edge.dst, next))
}

/// Runs between initial nodes: one `step` burst until the next `(pc, 0)`,
/// halt, or exception node.
pub fn multi_step(
    cfg: &Cfg,
    node: NodeId,
    state: &CfgState,
    calls: &dyn CallSemantics,
) -> Result<(NodeId, CfgState), StepError> {
    let (mut n, mut st) = step(cfg, node, state, calls)?;
    loop {
        match n {
            NodeId::N(_, 0) | NodeId::Halt | NodeId::Exception => return Ok((n, st)),
            _ => {
                let (n2, st2) = step(cfg, n, &st, calls)?;
                n = n2;
                st = st2;
            }
        }
    }
}

fn bool_word(b: bool) -> U256 {
    if b {
        U256::ONE
    } else {
        U256::ZERO
    }
}

pub(crate) fn eval_bin(op: BinOp, a: U256, b: U256) -> U256 {
    match op {
        BinOp::Add => a.wrapping_add(b),
        BinOp::Sub => a.wrapping_sub(b),
        BinOp::Mul => a.wrapping_mul(b),
        BinOp::Div => a.div(b),
        BinOp::Sdiv => a.sdiv(b),
        BinOp::Mod => a.rem(b),
        BinOp::Smod => a.smod(b),
        BinOp::Lt => bool_word(a < b),
        BinOp::Gt => bool_word(a > b),
        BinOp::Slt => bool_word(a.slt(b)),
        BinOp::Sgt => bool_word(b.slt(a)),
        BinOp::Eq => bool_word(a == b),
        BinOp::And => a.bitand(b),
        BinOp::Or => a.bitor(b),
        BinOp::Xor => a.bitxor(b),
        BinOp::Byte => U256::byte(a, b),
        BinOp::SignExtend => U256::signextend(a, b),
    }
}

/// Active words after touching `[pos, pos+len)`; saturates on overflow.
pub fn mem_extend(aw: U256, pos: U256, len: U256) -> U256 {
    if len.is_zero() {
        return aw;
    }
    match pos.checked_add(len) {
        Some(end) => aw.max(end.ceil_div32()),
        None => U256::MAX,
    }
}

/// Quadratic memory cost; effectively infinite past 2^32 active words.
pub fn mem_cost(aw: U256) -> U256 {
    if aw > U256::from_u64(u32::MAX as u64) {
        return U256::MAX;
    }
    let aw64 = aw.low_u64();
    let quad = U256::from_u128((aw64 as u128) * (aw64 as u128) / 512);
    U256::from_u64(3 * aw64).wrapping_add(quad)
}

fn mem_extension_cost(aw: U256, pos: U256, len: U256) -> U256 {
    let aw2 = mem_extend(aw, pos, len);
    mem_cost(aw2).wrapping_sub(mem_cost(aw))
}

/// The block-hash model: a deterministic mix of the parent hash and the
/// requested number. Shared with the oracle by construction.
pub fn blockhash_model(parent: U256, number: U256) -> U256 {
    let mut input = Vec::with_capacity(64);
    input.extend_from_slice(&parent.to_be_bytes());
    input.extend_from_slice(&number.to_be_bytes());
    U256::from_be_bytes(&keccak::keccak256(&input))
}

/// Hashes a memory window through a word-addressed view; the cell sequence
/// is capped, with the raw offset and length always mixed in.
pub fn hash_mem_window(off: U256, len: U256, mut word_at: impl FnMut(U256) -> U256) -> U256 {
    const CELL_CAP: u64 = 4096;
    let mut input = Vec::new();
    input.extend_from_slice(&off.to_be_bytes());
    input.extend_from_slice(&len.to_be_bytes());
    if !len.is_zero() {
        let words = len.ceil_div32().to_u64().unwrap_or(CELL_CAP).min(CELL_CAP);
        let mut addr = off;
        for _ in 0..words {
            input.extend_from_slice(&word_at(addr).to_be_bytes());
            match addr.checked_add(U256::from_u64(32)) {
                Some(a) => addr = a,
                None => break,
            }
        }
    }
    U256::from_be_bytes(&keccak::keccak256(&input))
}

/// Reads a 32-byte big-endian word from a byte buffer, zero-extended.
pub fn word_from_bytes(bytes: &[u8], offset: U256) -> U256 {
    let mut word = [0u8; 32];
    if let Some(off) = offset.to_u64() {
        let off = off as usize;
        for (i, slot) in word.iter_mut().enumerate() {
            if off + i < bytes.len() {
                *slot = bytes[off + i];
            }
        }
    }
    U256::from_be_bytes(&word)
}

pub(crate) fn eval_gas_cost(cost: &GasCost, pc: u32, st: &CfgState) -> U256 {
    match cost {
        GasCost::Const(n) => U256::from_u64(*n),
        GasCost::Exp { exponent } => {
            let e = st.var(*exponent);
            if e.is_zero() {
                U256::from_u64(10)
            } else {
                U256::from_u64(10 + 10 * e.byte_len() as u64)
            }
        }
        GasCost::MemWord { addr, base } => {
            let aw = st.msize.at(pc);
            mem_extension_cost(aw, st.addr(*addr), U256::from_u64(32))
                .wrapping_add(U256::from_u64(*base))
        }
        GasCost::WindowWords {
            pos,
            len,
            base,
            per_word,
        } => {
            let aw = st.msize.at(pc);
            let l = st.addr(*len);
            mem_extension_cost(aw, st.addr(*pos), l)
                .wrapping_add(U256::from_u64(*base))
                .wrapping_add(U256::from_u64(*per_word).wrapping_mul(l.ceil_div32()))
        }
        GasCost::Log { pos, len, topics } => {
            let aw = st.msize.at(pc);
            let l = st.var(*len);
            mem_extension_cost(aw, st.var(*pos), l)
                .wrapping_add(U256::from_u64(375 + 375 * *topics as u64))
                .wrapping_add(U256::from_u64(8).wrapping_mul(l))
        }
        GasCost::Sstore { key, val } => {
            let cur = st.load_stor(st.addr(*key));
            if !st.var(*val).is_zero() && cur.is_zero() {
                U256::from_u64(20000)
            } else {
                U256::from_u64(5000)
            }
        }
        GasCost::SelfDestruct { beneficiary } => {
            let addr = truncate_address(st.var(*beneficiary));
            if st.world.accounts.contains_key(&addr) {
                U256::from_u64(5000)
            } else {
                U256::from_u64(37000)
            }
        }
    }
}

pub fn truncate_address(a: U256) -> U256 {
    // low 160 bits
    U256([a.0[0], a.0[1], a.0[2] & 0xffff_ffff, 0])
}

fn apply_effect(cfg: &Cfg, effect: &Effect, st: &CfgState, calls: &dyn CallSemantics) -> CfgState {
    let mut out = st.clone();
    match effect {
        Effect::Id => {}
        Effect::Const { y, val } => out.set_var(*y, *val),
        Effect::Copy { y, x } => out.set_var(*y, st.var(*x)),
        Effect::Bin { op, y, a, b } => out.set_var(*y, eval_bin(*op, st.var(*a), st.var(*b))),
        Effect::Exp { y, a, b } => out.set_var(*y, st.var(*a).exp(st.var(*b))),
        Effect::IsZero { y, x } => out.set_var(*y, bool_word(st.var(*x).is_zero())),
        Effect::Not { y, x } => out.set_var(*y, st.var(*x).not()),
        Effect::AddMod { y, xs } => {
            out.set_var(*y, U256::addmod(st.var(xs[0]), st.var(xs[1]), st.var(xs[2])))
        }
        Effect::MulMod { y, xs } => {
            out.set_var(*y, U256::mulmod(st.var(xs[0]), st.var(xs[1]), st.var(xs[2])))
        }
        Effect::Sha3 { y, off, len } => {
            let h = hash_mem_window(st.var(*off), st.var(*len), |a| st.load_mem(a));
            out.set_var(*y, h);
        }
        Effect::EnvRead { y, src } => {
            let v = match src {
                EnvOp::Address => st.local.actor,
                EnvOp::Caller => st.local.sender,
                EnvOp::CallValue => st.local.value,
                EnvOp::CallDataSize => U256::from_u64(st.local.input.len() as u64),
                EnvOp::CodeSize => U256::from_u64(st.local.code.len() as u64),
                EnvOp::Origin => st.global.origin,
                EnvOp::GasPrice => st.global.prize,
                EnvOp::Coinbase => st.global.beneficiary,
                EnvOp::Timestamp => st.global.timestamp,
                EnvOp::Number => st.global.number,
                EnvOp::Difficulty => st.global.difficulty,
                EnvOp::GasLimit => st.global.gaslimit,
            };
            out.set_var(*y, v);
        }
        Effect::CallDataLoad { y, x } => {
            out.set_var(*y, word_from_bytes(&st.local.input, st.var(*x)));
        }
        Effect::Balance { y, x } => {
            let addr = truncate_address(st.var(*x));
            let v = if addr == truncate_address(st.local.actor) {
                st.world.this_balance
            } else {
                st.world
                    .accounts
                    .get(&addr)
                    .map(|a| a.balance)
                    .unwrap_or(U256::ZERO)
            };
            out.set_var(*y, v);
        }
        Effect::ExtCodeSize { y, x } => {
            let addr = truncate_address(st.var(*x));
            let v = if addr == truncate_address(st.local.actor) {
                U256::from_u64(st.local.code.len() as u64)
            } else {
                st.world
                    .accounts
                    .get(&addr)
                    .map(|a| U256::from_u64(a.code_seed % 24_577))
                    .unwrap_or(U256::ZERO)
            };
            out.set_var(*y, v);
        }
        Effect::BlockHash { y, x } => {
            out.set_var(*y, blockhash_model(st.global.parent, st.var(*x)));
        }
        Effect::GasRead { y, pc } => out.set_var(*y, st.gas.at(*pc)),
        Effect::MsizeRead { y, pc } => out.set_var(*y, st.msize.at(*pc)),
        Effect::MemLoad { y, addr } => out.set_var(*y, st.load_mem(st.addr(*addr))),
        Effect::MemStoreDyn { off, val } => {
            out.mem_d.insert(st.var(*off), st.var(*val));
        }
        Effect::MemStoreS { loc, val } => {
            out.mem_s.insert(*loc, st.var(*val));
        }
        Effect::MemClearD { loc } => {
            out.mem_d.remove(loc);
        }
        Effect::StorLoad { y, addr } => out.set_var(*y, st.load_stor(st.addr(*addr))),
        Effect::StorStoreDyn { key, val } => {
            out.stor_d.insert(st.var(*key), st.var(*val));
        }
        Effect::StorStoreS { loc, val } => {
            out.stor_s.insert(*loc, st.var(*val));
        }
        Effect::StorClearD { loc } => {
            out.stor_d.remove(loc);
        }
        Effect::CallDataCopy { mpos, dpos, len } => {
            copy_into_mem(&mut out, st, st.var(*mpos), st.var(*dpos), st.var(*len), true);
        }
        Effect::CodeCopy { mpos, cpos, len } => {
            copy_into_mem(&mut out, st, st.var(*mpos), st.var(*cpos), st.var(*len), false);
        }
        Effect::ExtCodeCopy {
            addr,
            mpos,
            cpos,
            len,
        } => {
            // external code is modeled from the account's code seed
            let a = truncate_address(st.var(*addr));
            let seed = st.world.accounts.get(&a).map(|acc| acc.code_seed).unwrap_or(0);
            let mpos = st.var(*mpos);
            let cpos = st.var(*cpos);
            let l = st.var(*len);
            for (i, cell) in window_iter(mpos, l).enumerate() {
                let w = keccak::mix64(&[seed, cpos.low_u64(), i as u64]);
                out.mem_d.insert(cell, U256::from_u64(w));
            }
        }
        Effect::SelfDestruct { beneficiary } => {
            let addr = truncate_address(st.var(*beneficiary));
            let bal = st.world.this_balance;
            let acct = out.world.accounts.entry(addr).or_default();
            acct.balance = acct.balance.wrapping_add(bal);
            out.world.this_balance = U256::ZERO;
        }
        Effect::GasCharge { pc, to_pcs, cost } => {
            let g = st.gas.at(*pc);
            let cost = eval_gas_cost(cost, *pc, st);
            for q in to_pcs {
                out.gas.set(*q, g.wrapping_sub(cost));
            }
        }
        Effect::MsizeExtend { pc, to_pc, ext } => {
            let aw = st.msize.at(*pc);
            let aw2 = match ext {
                MsizeExt::Word { addr } => mem_extend(aw, st.addr(*addr), U256::from_u64(32)),
                MsizeExt::Window { pos, len } => mem_extend(aw, st.addr(*pos), st.addr(*len)),
            };
            out.msize.set(*to_pc, aw2);
        }
        Effect::CallPhase { pc, phase } => {
            apply_call_phase(cfg, *pc, *phase, st, &mut out, calls);
        }
    }
    out
}

/// Word cells covering `[pos, pos+len)` for the concrete copy loops.
fn window_iter(pos: U256, len: U256) -> Vec<U256> {
    super::build::window_cells(pos, len).unwrap_or_else(|| {
        // over the cap: still write the capped prefix deterministically
        super::build::window_cells(pos, U256::from_u64(32 * 128)).unwrap_or_default()
    })
}

fn copy_into_mem(out: &mut CfgState, st: &CfgState, mpos: U256, dpos: U256, len: U256, from_input: bool) {
    let src = if from_input {
        &st.local.input
    } else {
        &st.local.code
    };
    for (i, cell) in window_iter(mpos, len).into_iter().enumerate() {
        let off = dpos.wrapping_add(U256::from_u64(32 * i as u64));
        out.mem_d.insert(cell, word_from_bytes(src, off));
    }
}

fn apply_call_phase(
    cfg: &Cfg,
    pc: u32,
    phase: CallPhase,
    st: &CfgState,
    out: &mut CfgState,
    calls: &dyn CallSemantics,
) {
    let spec = &cfg.call_specs[&pc];
    let y_key = Variable::Stack(spec.y);
    let ext_key = Variable::External(spec.pc_next);
    let gas_key = Variable::Gas(spec.pc_next);
    let msize_key = Variable::Msize(spec.pc_next);
    match phase {
        CallPhase::Outcome => {
            let a = calls.apply_call(spec, st);
            out.temps.insert(y_key, TempVal::Word(a.y));
            if spec.kind.mutates_world() {
                out.temps.insert(ext_key, TempVal::World(a.world));
            }
        }
        CallPhase::GasTemp => {
            let a = calls.apply_call(spec, st);
            out.temps.insert(gas_key, TempVal::Word(a.gas_next));
        }
        CallPhase::MsizeTemp => {
            let a = calls.apply_call(spec, st);
            out.temps.insert(msize_key, TempVal::Word(a.msize_next));
        }
        CallPhase::MemCellTemp(c) => {
            let a = calls.apply_call(spec, st);
            let v = a.mem_out.get(&c).copied().unwrap_or(U256::ZERO);
            out.temps
                .insert(Variable::MemS(Loc::Const(c)), TempVal::Word(v));
        }
        CallPhase::MemWindowTemp => {
            let a = calls.apply_call(spec, st);
            for &c in &spec.out_cells {
                let v = a.mem_out.get(&c).copied().unwrap_or(U256::ZERO);
                out.temps
                    .insert(Variable::MemS(Loc::Const(c)), TempVal::Word(v));
            }
        }
        CallPhase::MemRestTemp => {
            if spec.output_known() {
                for &c in &spec.out_cells {
                    out.temps
                        .insert(Variable::MemD(Loc::Const(c)), TempVal::OptWord(None));
                }
            } else {
                let a = calls.apply_call(spec, st);
                let patch = a.mem_out.iter().map(|(k, v)| (*k, Some(*v))).collect();
                out.temps
                    .insert(Variable::MemD(Loc::Top), TempVal::DPatch(patch));
            }
        }
        CallPhase::CarryOutcome => {
            if let Some(TempVal::Word(v)) = st.temps.get(&y_key) {
                out.set_var(spec.y, *v);
            }
            if spec.kind.mutates_world() {
                if let Some(TempVal::World(w)) = st.temps.get(&ext_key) {
                    out.world = w.clone();
                }
            }
        }
        CallPhase::CarryGas => {
            if let Some(TempVal::Word(v)) = st.temps.get(&gas_key) {
                out.gas.set(spec.pc_next, *v);
            }
        }
        CallPhase::CarryMsize => {
            if let Some(TempVal::Word(v)) = st.temps.get(&msize_key) {
                out.msize.set(spec.pc_next, *v);
            }
        }
        CallPhase::CarryMemCell(c) => {
            if let Some(TempVal::Word(v)) = st.temps.get(&Variable::MemS(Loc::Const(c))) {
                out.mem_s.insert(c, *v);
            }
        }
        CallPhase::CarryMemWindow => {
            for &c in &spec.out_cells {
                if let Some(TempVal::Word(v)) = st.temps.get(&Variable::MemS(Loc::Const(c))) {
                    out.mem_s.insert(c, *v);
                }
            }
        }
        CallPhase::CarryMemRest => {
            if spec.output_known() {
                for &c in &spec.out_cells {
                    if let Some(TempVal::OptWord(w)) =
                        st.temps.get(&Variable::MemD(Loc::Const(c)))
                    {
                        match w {
                            Some(v) => {
                                out.mem_d.insert(c, *v);
                            }
                            None => {
                                out.mem_d.remove(&c);
                            }
                        }
                    }
                }
            } else if let Some(TempVal::DPatch(patch)) = st.temps.get(&Variable::MemD(Loc::Top)) {
                for (addr, w) in patch {
                    match w {
                        Some(v) => {
                            out.mem_d.insert(*addr, *v);
                        }
                        None => {
                            out.mem_d.remove(addr);
                        }
                    }
                }
            }
        }
        CallPhase::Reset => {
            out.temps.clear();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::build::build_cfg;
    use crate::cfg::effect::NoCalls;
    use crate::frontend::load_contract;

    fn run_to_halt(hex: &str, init: CfgState) -> (NodeId, CfgState) {
        let cfg = build_cfg(&load_contract(hex).unwrap(), 0).unwrap();
        let mut node = cfg.entry();
        let mut st = init;
        for _ in 0..10_000 {
            match node {
                NodeId::Halt | NodeId::Exception => return (node, st),
                _ => {
                    let (n, s) = step(&cfg, node, &st, &NoCalls).unwrap();
                    node = n;
                    st = s;
                }
            }
        }
        panic!("did not halt");
    }

    fn fresh(gas: u64) -> CfgState {
        let mut st = CfgState::default();
        st.gas = super::super::state::PcIndexed::constant(U256::from_u64(gas));
        st
    }

    #[test]
    fn add_value_and_gas() {
        // PUSH1 5; PUSH1 3; ADD; STOP: r = 8, gas drops by 3+3+3
        let (end, st) = run_to_halt("600560030100", fresh(100));
        assert_eq!(end, NodeId::Halt);
        assert_eq!(st.var(crate::frontend::VarId(2)), U256::from_u64(8));
        assert_eq!(st.gas.at(5), U256::from_u64(100 - 9));
    }

    #[test]
    fn jumpi_guard_falls_through_on_zero() {
        // PUSH1 0; PUSH1 7; JUMPI; STOP; JUMPDEST; INVALID
        let (end, st) = run_to_halt("6000600757005bfe", fresh(100));
        assert_eq!(end, NodeId::Halt);
        // jumpi deducts 10 at the fall-through landing pc
        assert_eq!(st.gas.at(5), U256::from_u64(100 - 3 - 3 - 10));
    }

    #[test]
    fn jumpi_takes_branch_on_nonzero() {
        let (end, _) = run_to_halt("6001600757005bfe", fresh(100));
        assert_eq!(end, NodeId::Exception);
    }

    #[test]
    fn two_layer_store_load() {
        // PUSH1 7; PUSH1 64; MSTORE; PUSH1 64; MLOAD; STOP
        let (_, st) = run_to_halt("60076040526040510000", fresh(100_000));
        // MLOAD result lands in the last defined stack variable
        let y = st
            .stack
            .keys()
            .max()
            .copied()
            .expect("mload output present");
        assert_eq!(st.var(y), U256::from_u64(7));
    }

    #[test]
    fn mem_cost_formula() {
        assert_eq!(mem_cost(U256::from_u64(0)), U256::ZERO);
        // 3*aw + aw^2/512 at aw=32: 96 + 2 = 98
        assert_eq!(mem_cost(U256::from_u64(32)), U256::from_u64(98));
        assert_eq!(
            mem_extend(U256::ZERO, U256::from_u64(64), U256::from_u64(32)),
            U256::from_u64(3)
        );
        assert_eq!(mem_extend(U256::from_u64(9), U256::ZERO, U256::ZERO), U256::from_u64(9));
    }
}
