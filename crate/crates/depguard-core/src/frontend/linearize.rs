//! Abstract-stack simulation turning a raw instruction stream into SSA form.
//!
//! PUSH and DUP become ASSIGN, SWAP and POP disappear into the abstract
//! stack. Join points require identical stack shapes (the same variable ids
//! at the same depths); contracts that would need phi nodes are rejected.

use std::collections::{BTreeMap, HashMap};

use super::opcode::{raw_info, BinOp, EnvOp, Op};
use super::preprocess::fold;
use super::{Contract, Instr, RawInstruction, VarId};
use crate::u256::U256;

pub const STACK_LIMIT: usize = 1024;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum LinearizeError {
    #[error("stack shapes disagree at join point pc {0}")]
    StackHeightMismatch(u32),
    #[error("abstract stack exceeds {STACK_LIMIT} slots at pc {0}")]
    UnboundedStack(u32),
    #[error("jump destination at pc {0} is not resolvable to a constant")]
    DynamicJump(u32),
    #[error("stack underflow at pc {0}")]
    StackUnderflow(u32),
    #[error("jump at pc {pc} targets {target}, which is not a JUMPDEST")]
    BadJumpTarget { pc: u32, target: U256 },
    #[error("unsupported opcode at pc {0} (DELEGATECALL/CALLCODE are refused)")]
    UnsupportedOpcode(u32),
}

struct Sim<'a> {
    raw: &'a [RawInstruction],
    /// raw pc -> index in `raw`
    index: HashMap<u32, usize>,
    code_end: u32,
    next_var: u32,
    consts: HashMap<VarId, U256>,
    emitted: BTreeMap<u32, Instr>,
    visited: HashMap<u32, Vec<VarId>>,
    worklist: Vec<(usize, Vec<VarId>)>,
}

impl<'a> Sim<'a> {
    fn fresh(&mut self) -> VarId {
        let v = VarId(self.next_var);
        self.next_var += 1;
        v
    }

    fn pop(&self, stack: &mut Vec<VarId>, pc: u32) -> Result<VarId, LinearizeError> {
        stack.pop().ok_or(LinearizeError::StackUnderflow(pc))
    }

    /// pc of the first emitting raw instruction at index >= `idx`; the
    /// synthetic terminal STOP at `code_end` if the stream runs out.
    fn next_emit_pc(&self, idx: usize) -> u32 {
        for ri in &self.raw[idx..] {
            if emits(ri.opcode) {
                return ri.pc;
            }
        }
        self.code_end
    }

    fn resolve_jump_target(
        &self,
        pc: u32,
        dest: VarId,
    ) -> Result<(u32, usize, U256), LinearizeError> {
        let val = *self
            .consts
            .get(&dest)
            .ok_or(LinearizeError::DynamicJump(pc))?;
        let target = val
            .to_u64()
            .filter(|&t| t <= u32::MAX as u64)
            .ok_or(LinearizeError::BadJumpTarget { pc, target: val })? as u32;
        let idx = *self
            .index
            .get(&target)
            .ok_or(LinearizeError::BadJumpTarget { pc, target: val })?;
        if self.raw[idx].opcode != 0x5b {
            return Err(LinearizeError::BadJumpTarget { pc, target: val });
        }
        Ok((target, idx, val))
    }

    fn run(&mut self) -> Result<(), LinearizeError> {
        while let Some((start, stack)) = self.worklist.pop() {
            self.walk(start, stack)?;
        }
        Ok(())
    }

    /// Walks one linear path, queueing branch targets, until the path halts.
    fn walk(&mut self, start: usize, mut stack: Vec<VarId>) -> Result<(), LinearizeError> {
        let mut idx = start;
        loop {
            if idx >= self.raw.len() {
                // Execution falls off the end of the code: implicit STOP.
                match self.visited.get(&self.code_end) {
                    Some(prev) if *prev != stack => {
                        return Err(LinearizeError::StackHeightMismatch(self.code_end))
                    }
                    Some(_) => return Ok(()),
                    None => {
                        self.visited.insert(self.code_end, stack.clone());
                        self.emit_stop(self.code_end);
                        return Ok(());
                    }
                }
            }
            let ri = &self.raw[idx];
            let pc = ri.pc;
            match self.visited.get(&pc) {
                Some(prev) if *prev != stack => {
                    return Err(LinearizeError::StackHeightMismatch(pc))
                }
                Some(_) => return Ok(()),
                None => {
                    self.visited.insert(pc, stack.clone());
                }
            }
            match ri.opcode {
                0xf2 | 0xf4 => return Err(LinearizeError::UnsupportedOpcode(pc)),
                // PUSHn
                0x60..=0x7f => {
                    let val = U256::from_be_bytes(ri.immediate.as_deref().unwrap());
                    let y = self.fresh();
                    self.consts.insert(y, val);
                    self.push_checked(&mut stack, y, pc)?;
                    self.emit(
                        pc,
                        Instr {
                            op: Op::Assign,
                            outs: vec![y],
                            ins: vec![],
                            imm: Some(val),
                            pc_next: self.next_emit_pc(idx + 1),
                            pre: vec![],
                        },
                    );
                }
                // DUPn
                0x80..=0x8f => {
                    let n = (ri.opcode - 0x7f) as usize;
                    if stack.len() < n {
                        return Err(LinearizeError::StackUnderflow(pc));
                    }
                    let src = stack[stack.len() - n];
                    let y = self.fresh();
                    if let Some(c) = self.consts.get(&src).copied() {
                        self.consts.insert(y, c);
                    }
                    self.push_checked(&mut stack, y, pc)?;
                    self.emit(
                        pc,
                        Instr {
                            op: Op::Assign,
                            outs: vec![y],
                            ins: vec![src],
                            imm: None,
                            pc_next: self.next_emit_pc(idx + 1),
                            pre: vec![None],
                        },
                    );
                }
                // SWAPn: pure permutation of the abstract stack.
                0x90..=0x9f => {
                    let n = (ri.opcode - 0x8f) as usize;
                    if stack.len() < n + 1 {
                        return Err(LinearizeError::StackUnderflow(pc));
                    }
                    let top = stack.len() - 1;
                    stack.swap(top, top - n);
                }
                0x50 => {
                    self.pop(&mut stack, pc)?;
                }
                0x56 => {
                    let dest = self.pop(&mut stack, pc)?;
                    let (target, tidx, val) = self.resolve_jump_target(pc, dest)?;
                    self.emit(
                        pc,
                        Instr {
                            op: Op::Jump,
                            outs: vec![],
                            ins: vec![dest],
                            imm: None,
                            pc_next: target,
                            pre: vec![Some(val)],
                        },
                    );
                    idx = tidx;
                    continue;
                }
                0x57 => {
                    let dest = self.pop(&mut stack, pc)?;
                    let cond = self.pop(&mut stack, pc)?;
                    let (_, tidx, val) = self.resolve_jump_target(pc, dest)?;
                    self.emit(
                        pc,
                        Instr {
                            op: Op::JumpI,
                            outs: vec![],
                            ins: vec![dest, cond],
                            imm: None,
                            pc_next: self.next_emit_pc(idx + 1),
                            pre: vec![Some(val), None],
                        },
                    );
                    self.worklist.push((tidx, stack.clone()));
                }
                _ => {
                    let info = raw_info(ri.opcode).expect("decoder only emits known opcodes");
                    let op = lin_op(ri.opcode);
                    let mut ins = Vec::with_capacity(info.pops as usize);
                    for _ in 0..info.pops {
                        ins.push(self.pop(&mut stack, pc)?);
                    }
                    let mut outs = Vec::new();
                    if info.pushes == 1 {
                        let y = self.fresh();
                        if let Some(c) = self.try_fold(op, &ins, pc) {
                            self.consts.insert(y, c);
                        }
                        self.push_checked(&mut stack, y, pc)?;
                        outs.push(y);
                    }
                    let halting = op.is_halting();
                    let pre = vec![None; ins.len()];
                    self.emit(
                        pc,
                        Instr {
                            op,
                            outs,
                            ins,
                            imm: None,
                            pc_next: self.next_emit_pc(idx + 1),
                            pre,
                        },
                    );
                    if halting {
                        return Ok(());
                    }
                }
            }
            idx += 1;
        }
    }

    fn try_fold(&self, op: Op, ins: &[VarId], pc: u32) -> Option<U256> {
        if op == Op::Pc {
            return Some(U256::from_u64(pc as u64));
        }
        let args: Option<Vec<U256>> = ins.iter().map(|v| self.consts.get(v).copied()).collect();
        fold(op, &args?)
    }

    fn push_checked(
        &self,
        stack: &mut Vec<VarId>,
        v: VarId,
        pc: u32,
    ) -> Result<(), LinearizeError> {
        if stack.len() >= STACK_LIMIT {
            return Err(LinearizeError::UnboundedStack(pc));
        }
        stack.push(v);
        Ok(())
    }

    fn emit(&mut self, pc: u32, instr: Instr) {
        self.emitted.insert(pc, instr);
    }

    fn emit_stop(&mut self, pc: u32) {
        self.emit(
            pc,
            Instr {
                op: Op::Stop,
                outs: vec![],
                ins: vec![],
                imm: None,
                pc_next: pc,
                pre: vec![],
            },
        );
    }
}

fn emits(opcode: u8) -> bool {
    !matches!(opcode, 0x50 | 0x90..=0x9f)
}

fn lin_op(opcode: u8) -> Op {
    match opcode {
        0x00 => Op::Stop,
        0x01 => Op::Bin(BinOp::Add),
        0x02 => Op::Bin(BinOp::Mul),
        0x03 => Op::Bin(BinOp::Sub),
        0x04 => Op::Bin(BinOp::Div),
        0x05 => Op::Bin(BinOp::Sdiv),
        0x06 => Op::Bin(BinOp::Mod),
        0x07 => Op::Bin(BinOp::Smod),
        0x08 => Op::AddMod,
        0x09 => Op::MulMod,
        0x0a => Op::Exp,
        0x0b => Op::Bin(BinOp::SignExtend),
        0x10 => Op::Bin(BinOp::Lt),
        0x11 => Op::Bin(BinOp::Gt),
        0x12 => Op::Bin(BinOp::Slt),
        0x13 => Op::Bin(BinOp::Sgt),
        0x14 => Op::Bin(BinOp::Eq),
        0x15 => Op::IsZero,
        0x16 => Op::Bin(BinOp::And),
        0x17 => Op::Bin(BinOp::Or),
        0x18 => Op::Bin(BinOp::Xor),
        0x19 => Op::Not,
        0x1a => Op::Bin(BinOp::Byte),
        0x20 => Op::Sha3,
        0x30 => Op::Env(EnvOp::Address),
        0x31 => Op::Balance,
        0x32 => Op::Env(EnvOp::Origin),
        0x33 => Op::Env(EnvOp::Caller),
        0x34 => Op::Env(EnvOp::CallValue),
        0x35 => Op::CallDataLoad,
        0x36 => Op::Env(EnvOp::CallDataSize),
        0x37 => Op::CallDataCopy,
        0x38 => Op::Env(EnvOp::CodeSize),
        0x39 => Op::CodeCopy,
        0x3a => Op::Env(EnvOp::GasPrice),
        0x3b => Op::ExtCodeSize,
        0x3c => Op::ExtCodeCopy,
        0x40 => Op::BlockHash,
        0x41 => Op::Env(EnvOp::Coinbase),
        0x42 => Op::Env(EnvOp::Timestamp),
        0x43 => Op::Env(EnvOp::Number),
        0x44 => Op::Env(EnvOp::Difficulty),
        0x45 => Op::Env(EnvOp::GasLimit),
        0x51 => Op::MLoad,
        0x52 => Op::MStore,
        0x54 => Op::SLoad,
        0x55 => Op::SStore,
        0x58 => Op::Pc,
        0x59 => Op::MSize,
        0x5a => Op::Gas,
        0x5b => Op::JumpDest,
        0xa0..=0xa4 => Op::Log(opcode - 0xa0),
        0xf0 => Op::Create,
        0xf1 => Op::Call,
        0xf3 => Op::Return,
        0xf5 => Op::Create2,
        0xfa => Op::StaticCall,
        0xfe => Op::Invalid,
        0xff => Op::SelfDestruct,
        other => unreachable!("opcode 0x{:02x} handled before lowering", other),
    }
}

pub fn linearize(raw: &[RawInstruction]) -> Result<Contract, LinearizeError> {
    let code_end = raw
        .last()
        .map(|ri| ri.pc + 1 + ri.immediate.as_ref().map_or(0, |i| i.len() as u32))
        .unwrap_or(0);
    let mut sim = Sim {
        raw,
        index: raw.iter().enumerate().map(|(i, r)| (r.pc, i)).collect(),
        code_end,
        next_var: 0,
        consts: HashMap::new(),
        emitted: BTreeMap::new(),
        visited: HashMap::new(),
        worklist: vec![(0, Vec::new())],
    };
    sim.run()?;
    if sim.emitted.is_empty() {
        sim.emit_stop(code_end);
    }
    let entry = *sim.emitted.keys().next().unwrap();
    let contract = Contract {
        code: sim.emitted,
        entry,
        source_hash: String::new(),
        warnings: Vec::new(),
    };
    debug_assert!(contract.check_ssa().is_ok());
    Ok(contract)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::decode::decode;

    fn lin(bytes: &[u8]) -> Result<Contract, LinearizeError> {
        let (raw, _) = decode(bytes);
        linearize(&raw)
    }

    #[test]
    fn stop_only() {
        let c = lin(&[0x00]).unwrap();
        assert_eq!(c.code.len(), 1);
        assert_eq!(c.code[&0].op, Op::Stop);
        assert_eq!(c.entry, 0);
    }

    #[test]
    fn push_push_add_stop() {
        // Worked abstract-stack run: ASSIGN(s0,5); ASSIGN(s1,3); ADD(s2,s1,s0); STOP
        let c = lin(&[0x60, 0x05, 0x60, 0x03, 0x01, 0x00]).unwrap();
        assert_eq!(c.code[&0].op, Op::Assign);
        assert_eq!(c.code[&0].imm, Some(U256::from_u64(5)));
        assert_eq!(c.code[&2].imm, Some(U256::from_u64(3)));
        let add = &c.code[&4];
        assert_eq!(add.op, Op::Bin(BinOp::Add));
        // first pop is the top of stack (the later PUSH)
        assert_eq!(add.ins, vec![VarId(1), VarId(0)]);
        assert_eq!(add.outs, vec![VarId(2)]);
        assert_eq!(add.pc_next, 5);
        assert_eq!(c.code[&5].op, Op::Stop);
        assert!(c.check_ssa().is_ok());
    }

    #[test]
    fn swap_and_pop_disappear() {
        // PUSH1 1, PUSH1 2, SWAP1, POP, POP, STOP: nothing but assigns remain.
        let c = lin(&[0x60, 0x01, 0x60, 0x02, 0x90, 0x50, 0x50, 0x00]).unwrap();
        let ops: Vec<Op> = c.code.values().map(|i| i.op).collect();
        assert_eq!(ops, vec![Op::Assign, Op::Assign, Op::Stop]);
        // fall-through pc_next skips the vanished SWAP/POP bytes
        assert_eq!(c.code[&2].pc_next, 7);
    }

    #[test]
    fn implicit_stop_at_code_end() {
        let c = lin(&[0x60, 0x01, 0x50]).unwrap();
        assert_eq!(c.code[&3].op, Op::Stop);
    }

    #[test]
    fn conditional_jump_shapes() {
        // PUSH1 0; PUSH1 6; JUMPI; STOP; JUMPDEST@6; STOP
        let c = lin(&[0x60, 0x00, 0x60, 0x06, 0x57, 0x00, 0x5b, 0x00]).unwrap();
        let ji = &c.code[&4];
        assert_eq!(ji.op, Op::JumpI);
        assert_eq!(ji.pc_next, 5);
        assert_eq!(ji.pre[0], Some(U256::from_u64(6)));
        assert_eq!(ji.successors(), vec![5, 6]);
    }

    #[test]
    fn join_height_mismatch_is_rejected() {
        // Two paths reach JUMPDEST@7 with stack depths 1 vs 0:
        //   PUSH1 0 (cond), PUSH1 7 (dest), JUMPI -> depth 0 at join
        //   fall-through: PUSH1 1, then into JUMPDEST -> depth 1 at join
        let err = lin(&[0x60, 0x00, 0x60, 0x07, 0x57, 0x60, 0x01, 0x5b, 0x00]).unwrap_err();
        assert_eq!(err, LinearizeError::StackHeightMismatch(7));
    }

    #[test]
    fn dynamic_jump_is_rejected() {
        // CALLER; JUMP
        let err = lin(&[0x33, 0x56]).unwrap_err();
        assert_eq!(err, LinearizeError::DynamicJump(1));
    }

    #[test]
    fn folded_jump_target_resolves() {
        // PUSH1 2; PUSH1 4; ADD; JUMP; <pad>; JUMPDEST@6; STOP
        let c = lin(&[0x60, 0x02, 0x60, 0x04, 0x01, 0x56, 0x5b, 0x00]).unwrap();
        assert_eq!(c.code[&5].pc_next, 6);
    }

    #[test]
    fn jump_to_non_jumpdest_is_rejected() {
        let err = lin(&[0x60, 0x00, 0x56]).unwrap_err();
        assert!(matches!(err, LinearizeError::BadJumpTarget { pc: 2, .. }));
    }

    #[test]
    fn delegatecall_is_refused() {
        let mut bytes = vec![0x60, 0x00]; // one stack slot
        bytes.extend([0x80, 0x80, 0x80, 0x80, 0x80]); // dup to six
        bytes.push(0xf4);
        let err = lin(&bytes).unwrap_err();
        assert_eq!(err, LinearizeError::UnsupportedOpcode(7));
    }

    #[test]
    fn underflow_is_reported() {
        let err = lin(&[0x01]).unwrap_err();
        assert_eq!(err, LinearizeError::StackUnderflow(0));
    }
}
