//! Expansion of linearized instructions into their CFG rule chains.

use std::collections::BTreeMap;

use super::effect::{Addr, CallKind, CallPhase, CallSpec, Effect, GasCost, MsizeExt, NodeOffset};
use super::{Cfg, Edge, GlobalVar, Guard, Label, Loc, LocalVar, NodeId, VarSet, Variable};
use crate::frontend::{Contract, EnvOp, Instr, Op, VarId};
use crate::u256::U256;

/// Windows wider than this many words are treated as statically unknown.
pub const WINDOW_CELL_CAP: usize = 128;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum BuildError {
    #[error("unsupported opcode at pc {0}")]
    UnsupportedOpcode(u32),
}

macro_rules! vars {
    ($($v:expr),* $(,)?) => {{
        let mut s = VarSet::new();
        $(s.insert($v);)*
        s
    }};
}

fn stack(v: VarId) -> Variable {
    Variable::Stack(v)
}

fn gas_at(pc: u32) -> Variable {
    Variable::Gas(pc)
}

fn msize_at(pc: u32) -> Variable {
    Variable::Msize(pc)
}

fn mem_pair(loc: Loc) -> [Variable; 2] {
    [Variable::MemS(loc), Variable::MemD(loc)]
}

fn stor_pair(loc: Loc) -> [Variable; 2] {
    [Variable::StorS(loc), Variable::StorD(loc)]
}

fn env_var(src: EnvOp) -> Variable {
    match src {
        EnvOp::Address => Variable::Local(LocalVar::Actor),
        EnvOp::Caller => Variable::Local(LocalVar::Sender),
        EnvOp::CallValue => Variable::Local(LocalVar::Value),
        EnvOp::CallDataSize => Variable::Local(LocalVar::Input),
        EnvOp::CodeSize => Variable::Local(LocalVar::Code),
        EnvOp::Origin => Variable::Global(GlobalVar::Origin),
        EnvOp::GasPrice => Variable::Global(GlobalVar::Prize),
        EnvOp::Coinbase => Variable::Global(GlobalVar::Beneficiary),
        EnvOp::Timestamp => Variable::Global(GlobalVar::Timestamp),
        EnvOp::Number => Variable::Global(GlobalVar::Number),
        EnvOp::Difficulty => Variable::Global(GlobalVar::Difficulty),
        EnvOp::GasLimit => Variable::Global(GlobalVar::GasLimit),
    }
}

/// Word addresses of the memory window `[off, off + len)` in the aligned
/// cell model; `None` when the window exceeds the grounding cap.
pub fn window_cells(off: U256, len: U256) -> Option<Vec<U256>> {
    if len.is_zero() {
        return Some(vec![]);
    }
    let words = len.ceil_div32();
    let count = words.to_u64().filter(|&w| w <= WINDOW_CELL_CAP as u64)?;
    let mut cells = Vec::with_capacity(count as usize);
    let step = U256::from_u64(32);
    let mut addr = off;
    for _ in 0..count {
        cells.push(addr);
        addr = addr.checked_add(step)?;
    }
    Some(cells)
}

/// One edge under construction; `dst` is filled while wiring the chain.
struct Proto {
    label: Label,
    defs: VarSet,
    uses: VarSet,
}

impl Proto {
    fn state(e: Effect, defs: VarSet, uses: VarSet) -> Proto {
        Proto {
            label: Label::State(e),
            defs,
            uses,
        }
    }
}

enum Tail {
    /// Final edge flows to `(pc_next, 0)`.
    Next,
    Halt,
    Exception,
    /// JUMPI: two guard edges out of the last intermediate node.
    Branch { cond: VarId, target: u32 },
    /// JUMP: single edge straight to the target's initial node.
    Jump(u32),
}

struct Chain {
    protos: Vec<Proto>,
    tail: Tail,
}

pub fn build_cfg(contract: &Contract, callstack_depth: u32) -> Result<Cfg, BuildError> {
    let mut edges = Vec::new();
    let mut call_specs = BTreeMap::new();
    for (&pc, instr) in &contract.code {
        let chain = expand(pc, instr, &mut call_specs);
        wire(pc, instr, chain, &mut edges);
    }
    let mut out: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for (i, e) in edges.iter().enumerate() {
        out.entry(e.src).or_default().push(i);
    }
    Ok(Cfg {
        contract: contract.clone(),
        callstack_depth,
        edges,
        out,
        call_specs,
    })
}

fn wire(pc: u32, instr: &Instr, chain: Chain, edges: &mut Vec<Edge>) {
    let n = chain.protos.len();
    debug_assert!(n > 0);
    for (i, proto) in chain.protos.into_iter().enumerate() {
        let src = NodeId::N(pc, i as u16);
        let is_last = i + 1 == n;
        let dst = if !is_last {
            NodeId::N(pc, (i + 1) as u16)
        } else {
            match chain.tail {
                Tail::Next => NodeId::N(instr.pc_next, 0),
                Tail::Halt => NodeId::Halt,
                Tail::Exception => NodeId::Exception,
                Tail::Jump(target) => NodeId::N(target, 0),
                // the guard fan hangs off the node after the last state edge
                Tail::Branch { .. } => NodeId::N(pc, (i + 1) as u16),
            }
        };
        edges.push(Edge {
            src,
            dst,
            label: proto.label,
            defs: proto.defs,
            uses: proto.uses,
        });
    }
    if let Tail::Branch { cond, target } = chain.tail {
        let fan = NodeId::N(pc, n as u16);
        edges.push(Edge {
            src: fan,
            dst: NodeId::N(instr.pc_next, 0),
            label: Label::Guard(Guard {
                cond,
                nonzero: false,
            }),
            defs: VarSet::new(),
            uses: vars![stack(cond)],
        });
        edges.push(Edge {
            src: fan,
            dst: NodeId::N(target, 0),
            label: Label::Guard(Guard {
                cond,
                nonzero: true,
            }),
            defs: VarSet::new(),
            uses: vars![stack(cond)],
        });
    }
}

/// Constant-cost gas proto deducting `cost` on the way to `pc_next`.
fn gas_const(pc: u32, pc_next: u32, cost: u64) -> Proto {
    Proto::state(
        Effect::GasCharge {
            pc,
            to_pcs: vec![pc_next],
            cost: GasCost::Const(cost),
        },
        vars![gas_at(pc_next)],
        vars![gas_at(pc)],
    )
}

fn expand(pc: u32, instr: &Instr, call_specs: &mut BTreeMap<u32, CallSpec>) -> Chain {
    let next = instr.pc_next;
    let y = instr.outs.first().copied();
    let ins = &instr.ins;
    let pre = &instr.pre;

    match instr.op {
        Op::Stop => Chain {
            protos: vec![Proto::state(Effect::Id, VarSet::new(), VarSet::new())],
            tail: Tail::Halt,
        },
        Op::Invalid => Chain {
            protos: vec![Proto::state(Effect::Id, VarSet::new(), VarSet::new())],
            tail: Tail::Exception,
        },
        Op::JumpDest => Chain {
            protos: vec![gas_const(pc, next, 1)],
            tail: Tail::Next,
        },
        Op::Jump => {
            let target = pre[0].unwrap().low_u64() as u32;
            Chain {
                protos: vec![gas_const(pc, target, 8)],
                tail: Tail::Jump(target),
            }
        }
        Op::JumpI => {
            let target = pre[0].unwrap().low_u64() as u32;
            let cond = ins[1];
            Chain {
                protos: vec![Proto::state(
                    Effect::GasCharge {
                        pc,
                        to_pcs: vec![next, target],
                        cost: GasCost::Const(10),
                    },
                    vars![gas_at(next), gas_at(target)],
                    vars![gas_at(pc)],
                )],
                tail: Tail::Branch { cond, target },
            }
        }
        Op::Assign => {
            let y = y.unwrap();
            let value = match instr.imm {
                Some(val) => Proto::state(
                    Effect::Const { y, val },
                    vars![stack(y)],
                    VarSet::new(),
                ),
                None => Proto::state(
                    Effect::Copy { y, x: ins[0] },
                    vars![stack(y)],
                    vars![stack(ins[0])],
                ),
            };
            Chain {
                protos: vec![value, gas_const(pc, next, 3)],
                tail: Tail::Next,
            }
        }
        Op::Bin(op) => {
            let y = y.unwrap();
            Chain {
                protos: vec![
                    Proto::state(
                        Effect::Bin {
                            op,
                            y,
                            a: ins[0],
                            b: ins[1],
                        },
                        vars![stack(y)],
                        vars![stack(ins[0]), stack(ins[1])],
                    ),
                    gas_const(pc, next, op.gas()),
                ],
                tail: Tail::Next,
            }
        }
        Op::Exp => {
            let y = y.unwrap();
            Chain {
                protos: vec![
                    Proto::state(
                        Effect::Exp {
                            y,
                            a: ins[0],
                            b: ins[1],
                        },
                        vars![stack(y)],
                        vars![stack(ins[0]), stack(ins[1])],
                    ),
                    Proto::state(
                        Effect::GasCharge {
                            pc,
                            to_pcs: vec![next],
                            cost: GasCost::Exp { exponent: ins[1] },
                        },
                        vars![gas_at(next)],
                        vars![gas_at(pc), stack(ins[1])],
                    ),
                ],
                tail: Tail::Next,
            }
        }
        Op::IsZero | Op::Not => {
            let y = y.unwrap();
            let x = ins[0];
            let eff = if instr.op == Op::IsZero {
                Effect::IsZero { y, x }
            } else {
                Effect::Not { y, x }
            };
            Chain {
                protos: vec![
                    Proto::state(eff, vars![stack(y)], vars![stack(x)]),
                    gas_const(pc, next, 3),
                ],
                tail: Tail::Next,
            }
        }
        Op::AddMod | Op::MulMod => {
            let y = y.unwrap();
            let xs = [ins[0], ins[1], ins[2]];
            let eff = if instr.op == Op::AddMod {
                Effect::AddMod { y, xs }
            } else {
                Effect::MulMod { y, xs }
            };
            Chain {
                protos: vec![
                    Proto::state(
                        eff,
                        vars![stack(y)],
                        vars![stack(xs[0]), stack(xs[1]), stack(xs[2])],
                    ),
                    gas_const(pc, next, 8),
                ],
                tail: Tail::Next,
            }
        }
        Op::Sha3 => {
            let y = y.unwrap();
            let (off, len) = (ins[0], ins[1]);
            let [ms, md] = mem_pair(Loc::Top);
            Chain {
                protos: vec![
                    Proto::state(
                        Effect::Sha3 { y, off, len },
                        vars![stack(y)],
                        vars![stack(off), stack(len), ms, md],
                    ),
                    Proto::state(
                        Effect::GasCharge {
                            pc,
                            to_pcs: vec![next],
                            cost: GasCost::WindowWords {
                                pos: Addr::Reg(off),
                                len: Addr::Reg(len),
                                base: 30,
                                per_word: 6,
                            },
                        },
                        vars![gas_at(next)],
                        vars![gas_at(pc), msize_at(pc), stack(off), stack(len)],
                    ),
                    msize_window(pc, next, Addr::Reg(off), Addr::Reg(len)),
                ],
                tail: Tail::Next,
            }
        }
        Op::Env(src) => {
            let y = y.unwrap();
            Chain {
                protos: vec![
                    Proto::state(
                        Effect::EnvRead { y, src },
                        vars![stack(y)],
                        vars![env_var(src)],
                    ),
                    gas_const(pc, next, 2),
                ],
                tail: Tail::Next,
            }
        }
        Op::CallDataLoad => {
            let y = y.unwrap();
            let x = ins[0];
            Chain {
                protos: vec![
                    Proto::state(
                        Effect::CallDataLoad { y, x },
                        vars![stack(y)],
                        vars![Variable::Local(LocalVar::Input), stack(x)],
                    ),
                    gas_const(pc, next, 3),
                ],
                tail: Tail::Next,
            }
        }
        Op::Balance | Op::ExtCodeSize => {
            let y = y.unwrap();
            let x = ins[0];
            let (eff, cost) = if instr.op == Op::Balance {
                (Effect::Balance { y, x }, 400)
            } else {
                (Effect::ExtCodeSize { y, x }, 700)
            };
            Chain {
                protos: vec![
                    Proto::state(eff, vars![stack(y)], vars![Variable::External(pc), stack(x)]),
                    gas_const(pc, next, cost),
                ],
                tail: Tail::Next,
            }
        }
        Op::BlockHash => {
            let y = y.unwrap();
            let x = ins[0];
            Chain {
                protos: vec![
                    Proto::state(
                        Effect::BlockHash { y, x },
                        vars![stack(y)],
                        vars![Variable::Global(GlobalVar::Parent), stack(x)],
                    ),
                    gas_const(pc, next, 20),
                ],
                tail: Tail::Next,
            }
        }
        Op::Pc => {
            let y = y.unwrap();
            Chain {
                protos: vec![
                    Proto::state(
                        Effect::Const {
                            y,
                            val: U256::from_u64(pc as u64),
                        },
                        vars![stack(y)],
                        VarSet::new(),
                    ),
                    gas_const(pc, next, 2),
                ],
                tail: Tail::Next,
            }
        }
        Op::Gas => {
            let y = y.unwrap();
            Chain {
                protos: vec![
                    Proto::state(Effect::GasRead { y, pc }, vars![stack(y)], vars![gas_at(pc)]),
                    gas_const(pc, next, 2),
                ],
                tail: Tail::Next,
            }
        }
        Op::MSize => {
            let y = y.unwrap();
            Chain {
                protos: vec![
                    Proto::state(
                        Effect::MsizeRead { y, pc },
                        vars![stack(y)],
                        vars![msize_at(pc)],
                    ),
                    gas_const(pc, next, 2),
                ],
                tail: Tail::Next,
            }
        }
        Op::MLoad => {
            let y = y.unwrap();
            let x = ins[0];
            let mut protos = Vec::new();
            match pre[0] {
                Some(v) => {
                    let [ms, md] = mem_pair(Loc::Const(v));
                    protos.push(Proto::state(
                        Effect::MemLoad {
                            y,
                            addr: Addr::Known(v),
                        },
                        vars![stack(y)],
                        vars![ms, md],
                    ));
                    protos.push(gas_memword(pc, next, Addr::Known(v), 3));
                    protos.push(msize_word(pc, next, Addr::Known(v)));
                }
                None => {
                    let [ms, md] = mem_pair(Loc::Top);
                    protos.push(Proto::state(
                        Effect::MemLoad {
                            y,
                            addr: Addr::Reg(x),
                        },
                        vars![stack(y)],
                        vars![ms, md, stack(x)],
                    ));
                    protos.push(gas_memword(pc, next, Addr::Reg(x), 3));
                    protos.push(msize_word(pc, next, Addr::Reg(x)));
                }
            }
            Chain {
                protos,
                tail: Tail::Next,
            }
        }
        Op::MStore => {
            let (off, val) = (ins[0], ins[1]);
            let mut protos = Vec::new();
            match pre[0] {
                Some(v) => {
                    protos.push(Proto::state(
                        Effect::MemStoreS { loc: v, val },
                        vars![Variable::MemS(Loc::Const(v))],
                        vars![stack(val)],
                    ));
                    protos.push(Proto::state(
                        Effect::MemClearD { loc: v },
                        vars![Variable::MemD(Loc::Const(v))],
                        VarSet::new(),
                    ));
                    protos.push(gas_memword(pc, next, Addr::Known(v), 3));
                    protos.push(msize_word(pc, next, Addr::Known(v)));
                }
                None => {
                    let md = Variable::MemD(Loc::Top);
                    protos.push(Proto::state(
                        Effect::MemStoreDyn { off, val },
                        vars![md.clone()],
                        vars![md, stack(off), stack(val)],
                    ));
                    protos.push(gas_memword(pc, next, Addr::Reg(off), 3));
                    protos.push(msize_word(pc, next, Addr::Reg(off)));
                }
            }
            Chain {
                protos,
                tail: Tail::Next,
            }
        }
        Op::SLoad => {
            let y = y.unwrap();
            let x = ins[0];
            let value = match pre[0] {
                Some(v) => {
                    let [ss, sd] = stor_pair(Loc::Const(v));
                    Proto::state(
                        Effect::StorLoad {
                            y,
                            addr: Addr::Known(v),
                        },
                        vars![stack(y)],
                        vars![ss, sd],
                    )
                }
                None => {
                    let [ss, sd] = stor_pair(Loc::Top);
                    Proto::state(
                        Effect::StorLoad {
                            y,
                            addr: Addr::Reg(x),
                        },
                        vars![stack(y)],
                        vars![ss, sd, stack(x)],
                    )
                }
            };
            Chain {
                protos: vec![value, gas_const(pc, next, 200)],
                tail: Tail::Next,
            }
        }
        Op::SStore => {
            let (key, val) = (ins[0], ins[1]);
            let mut protos = Vec::new();
            match pre[0] {
                Some(v) => {
                    let [ss, sd] = stor_pair(Loc::Const(v));
                    protos.push(Proto::state(
                        Effect::StorStoreS { loc: v, val },
                        vars![Variable::StorS(Loc::Const(v))],
                        vars![stack(val)],
                    ));
                    protos.push(Proto::state(
                        Effect::StorClearD { loc: v },
                        vars![Variable::StorD(Loc::Const(v))],
                        VarSet::new(),
                    ));
                    protos.push(Proto::state(
                        Effect::GasCharge {
                            pc,
                            to_pcs: vec![next],
                            cost: GasCost::Sstore {
                                key: Addr::Known(v),
                                val,
                            },
                        },
                        vars![gas_at(next)],
                        vars![gas_at(pc), stack(val), ss, sd],
                    ));
                }
                None => {
                    let sd_top = Variable::StorD(Loc::Top);
                    let ss_top = Variable::StorS(Loc::Top);
                    protos.push(Proto::state(
                        Effect::StorStoreDyn { key, val },
                        vars![sd_top.clone()],
                        vars![sd_top.clone(), stack(key), stack(val)],
                    ));
                    protos.push(Proto::state(
                        Effect::GasCharge {
                            pc,
                            to_pcs: vec![next],
                            cost: GasCost::Sstore {
                                key: Addr::Reg(key),
                                val,
                            },
                        },
                        vars![gas_at(next)],
                        vars![gas_at(pc), stack(key), stack(val), ss_top, sd_top],
                    ));
                }
            }
            Chain {
                protos,
                tail: Tail::Next,
            }
        }
        Op::CallDataCopy | Op::CodeCopy => {
            let (mpos, dpos, len) = (ins[0], ins[1], ins[2]);
            let (eff, src) = if instr.op == Op::CallDataCopy {
                (
                    Effect::CallDataCopy { mpos, dpos, len },
                    Variable::Local(LocalVar::Input),
                )
            } else {
                (
                    Effect::CodeCopy {
                        mpos,
                        cpos: dpos,
                        len,
                    },
                    Variable::Local(LocalVar::Code),
                )
            };
            let md = Variable::MemD(Loc::Top);
            Chain {
                protos: vec![
                    Proto::state(
                        eff,
                        vars![md.clone()],
                        vars![md, src, stack(mpos), stack(dpos), stack(len)],
                    ),
                    gas_window(pc, next, mpos, len, 3, 3),
                    msize_window(pc, next, Addr::Reg(mpos), Addr::Reg(len)),
                ],
                tail: Tail::Next,
            }
        }
        Op::ExtCodeCopy => {
            let (addr, mpos, cpos, len) = (ins[0], ins[1], ins[2], ins[3]);
            let md = Variable::MemD(Loc::Top);
            Chain {
                protos: vec![
                    Proto::state(
                        Effect::ExtCodeCopy {
                            addr,
                            mpos,
                            cpos,
                            len,
                        },
                        vars![md.clone()],
                        vars![
                            md,
                            Variable::External(pc),
                            stack(addr),
                            stack(mpos),
                            stack(cpos),
                            stack(len)
                        ],
                    ),
                    gas_window(pc, next, mpos, len, 700, 3),
                    msize_window(pc, next, Addr::Reg(mpos), Addr::Reg(len)),
                ],
                tail: Tail::Next,
            }
        }
        Op::Log(topics) => {
            let (pos, len) = (ins[0], ins[1]);
            Chain {
                protos: vec![
                    Proto::state(
                        Effect::GasCharge {
                            pc,
                            to_pcs: vec![next],
                            cost: GasCost::Log { pos, len, topics },
                        },
                        vars![gas_at(next)],
                        vars![gas_at(pc), msize_at(pc), stack(pos), stack(len)],
                    ),
                    msize_window(pc, next, Addr::Reg(pos), Addr::Reg(len)),
                ],
                tail: Tail::Next,
            }
        }
        Op::Return => {
            let (pos, len) = (ins[0], ins[1]);
            Chain {
                protos: vec![
                    gas_window(pc, next, pos, len, 0, 0),
                    msize_window(pc, next, Addr::Reg(pos), Addr::Reg(len)),
                ],
                tail: Tail::Halt,
            }
        }
        Op::SelfDestruct => {
            let x = ins[0];
            Chain {
                protos: vec![
                    Proto::state(
                        Effect::GasCharge {
                            pc,
                            to_pcs: vec![next],
                            cost: GasCost::SelfDestruct { beneficiary: x },
                        },
                        vars![gas_at(next)],
                        vars![gas_at(pc), Variable::External(pc), stack(x)],
                    ),
                    Proto::state(
                        Effect::SelfDestruct { beneficiary: x },
                        vars![Variable::External(next)],
                        vars![
                            Variable::External(pc),
                            stack(x),
                            Variable::Local(LocalVar::Actor)
                        ],
                    ),
                ],
                tail: Tail::Halt,
            }
        }
        Op::Call | Op::StaticCall | Op::Create | Op::Create2 => {
            let spec = call_spec(pc, instr);
            let chain = call_chain(&spec);
            call_specs.insert(pc, spec);
            chain
        }
    }
}

fn gas_memword(pc: u32, next: u32, addr: Addr, base: u64) -> Proto {
    let mut uses = vars![gas_at(pc), msize_at(pc)];
    if let Addr::Reg(x) = addr {
        uses.insert(stack(x));
    }
    Proto::state(
        Effect::GasCharge {
            pc,
            to_pcs: vec![next],
            cost: GasCost::MemWord { addr, base },
        },
        vars![gas_at(next)],
        uses,
    )
}

fn msize_word(pc: u32, next: u32, addr: Addr) -> Proto {
    let mut uses = vars![msize_at(pc)];
    if let Addr::Reg(x) = addr {
        uses.insert(stack(x));
    }
    Proto::state(
        Effect::MsizeExtend {
            pc,
            to_pc: next,
            ext: MsizeExt::Word { addr },
        },
        vars![msize_at(next)],
        uses,
    )
}

fn gas_window(pc: u32, next: u32, pos: VarId, len: VarId, base: u64, per_word: u64) -> Proto {
    Proto::state(
        Effect::GasCharge {
            pc,
            to_pcs: vec![next],
            cost: GasCost::WindowWords {
                pos: Addr::Reg(pos),
                len: Addr::Reg(len),
                base,
                per_word,
            },
        },
        vars![gas_at(next)],
        vars![gas_at(pc), msize_at(pc), stack(pos), stack(len)],
    )
}

fn msize_window(pc: u32, next: u32, pos: Addr, len: Addr) -> Proto {
    let mut uses = vars![msize_at(pc)];
    if let Addr::Reg(x) = pos {
        uses.insert(stack(x));
    }
    if let Addr::Reg(x) = len {
        uses.insert(stack(x));
    }
    Proto::state(
        Effect::MsizeExtend {
            pc,
            to_pc: next,
            ext: MsizeExt::Window { pos, len },
        },
        vars![msize_at(next)],
        uses,
    )
}

fn call_spec(pc: u32, instr: &Instr) -> CallSpec {
    let ins = &instr.ins;
    let pre = &instr.pre;
    let y = instr.outs[0];
    let (kind, gas, to, value, salt, io, is_, oo, os, wi) = match instr.op {
        // CALL(g, to, va, io, is, oo, os)
        Op::Call => (
            CallKind::Call,
            Some(ins[0]),
            Some(ins[1]),
            Some(ins[2]),
            None,
            ins[3],
            ins[4],
            Some(ins[5]),
            Some(ins[6]),
            3usize,
        ),
        // STATICCALL(g, to, io, is, oo, os)
        Op::StaticCall => (
            CallKind::StaticCall,
            Some(ins[0]),
            Some(ins[1]),
            None,
            None,
            ins[2],
            ins[3],
            Some(ins[4]),
            Some(ins[5]),
            2,
        ),
        // CREATE(va, io, is)
        Op::Create => (
            CallKind::Create,
            None,
            None,
            Some(ins[0]),
            None,
            ins[1],
            ins[2],
            None,
            None,
            1,
        ),
        // CREATE2(va, io, is, salt)
        Op::Create2 => (
            CallKind::Create2,
            None,
            None,
            Some(ins[0]),
            Some(ins[3]),
            ins[1],
            ins[2],
            None,
            None,
            1,
        ),
        _ => unreachable!(),
    };
    let mut pre_in_off = pre[wi];
    let mut pre_in_len = pre[wi + 1];
    let (mut pre_out_off, mut pre_out_len) = if oo.is_some() {
        (pre[wi + 2], pre[wi + 3])
    } else {
        (None, None)
    };
    let in_cells = match (pre_in_off, pre_in_len) {
        (Some(o), Some(l)) => match window_cells(o, l) {
            Some(cells) => cells,
            None => {
                pre_in_off = None;
                pre_in_len = None;
                vec![]
            }
        },
        _ => vec![],
    };
    let out_cells = match (pre_out_off, pre_out_len) {
        (Some(o), Some(l)) => match window_cells(o, l) {
            Some(cells) => cells,
            None => {
                pre_out_off = None;
                pre_out_len = None;
                vec![]
            }
        },
        _ => vec![],
    };
    CallSpec {
        pc,
        pc_next: instr.pc_next,
        kind,
        y,
        gas,
        to,
        value,
        salt,
        in_off: io,
        in_len: is_,
        out_off: oo,
        out_len: os,
        pre_in_off,
        pre_in_len,
        pre_out_off,
        pre_out_len,
        in_cells,
        out_cells,
    }
}

/// Variables the overall call outcome may depend on: the call arguments, the
/// input memory window, the available gas, the calling account, the global
/// environment, and the contract's own storage (readable via reentrancy).
fn call_base_uses(spec: &CallSpec) -> VarSet {
    let mut uses = VarSet::new();
    for arg in [spec.gas, spec.to, spec.value, spec.salt].into_iter().flatten() {
        uses.insert(stack(arg));
    }
    uses.insert(gas_at(spec.pc));
    uses.insert(Variable::Local(LocalVar::Actor));
    for g in GlobalVar::ALL {
        uses.insert(Variable::Global(g));
    }
    uses.insert(Variable::External(spec.pc));
    uses.insert(Variable::StorS(Loc::Top));
    uses.insert(Variable::StorD(Loc::Top));
    if spec.input_known() {
        for &c in &spec.in_cells {
            uses.insert(Variable::MemS(Loc::Const(c)));
            uses.insert(Variable::MemD(Loc::Const(c)));
        }
    } else {
        uses.insert(Variable::MemS(Loc::Top));
        uses.insert(Variable::MemD(Loc::Top));
        uses.insert(stack(spec.in_off));
        uses.insert(stack(spec.in_len));
    }
    uses
}

fn unresolved_out_window(spec: &CallSpec) -> Vec<Variable> {
    let mut v = Vec::new();
    if spec.pre_out_off.is_none() {
        if let Some(oo) = spec.out_off {
            v.push(stack(oo));
        }
    }
    if spec.pre_out_len.is_none() {
        if let Some(os) = spec.out_len {
            v.push(stack(os));
        }
    }
    v
}

fn call_chain(spec: &CallSpec) -> Chain {
    let pc = spec.pc;
    let next = spec.pc_next;
    let phase = |p: CallPhase, defs: VarSet, uses: VarSet| {
        Proto::state(Effect::CallPhase { pc, phase: p }, defs, uses)
    };
    let mut protos = Vec::new();
    let mut temporals: VarSet = VarSet::new();

    // outcome: return value, and the external world for mutating kinds
    let mut outcome_defs = vars![Variable::tmp(stack(spec.y))];
    if spec.kind.mutates_world() {
        outcome_defs.insert(Variable::tmp(Variable::External(next)));
    }
    temporals.extend(outcome_defs.iter().cloned());
    protos.push(phase(CallPhase::Outcome, outcome_defs, call_base_uses(spec)));

    // gas: depends additionally on the active words and the output window
    let mut gas_uses = call_base_uses(spec);
    gas_uses.insert(msize_at(pc));
    gas_uses.extend(unresolved_out_window(spec));
    let gas_def = Variable::tmp(gas_at(next));
    temporals.insert(gas_def.clone());
    protos.push(phase(CallPhase::GasTemp, vars![gas_def], gas_uses));

    // active words: only the windows and the previous counter
    let mut msize_uses = vars![msize_at(pc)];
    if spec.pre_in_off.is_none() {
        msize_uses.insert(stack(spec.in_off));
    }
    if spec.pre_in_len.is_none() {
        msize_uses.insert(stack(spec.in_len));
    }
    msize_uses.extend(unresolved_out_window(spec));
    let msize_def = Variable::tmp(msize_at(next));
    temporals.insert(msize_def.clone());
    protos.push(phase(CallPhase::MsizeTemp, vars![msize_def], msize_uses));

    // memory phase per the node-offset case table
    match spec.node_offset() {
        NodeOffset::Cells(_) => {
            for &c in &spec.out_cells {
                let mut uses = call_base_uses(spec);
                uses.insert(Variable::MemS(Loc::Const(c)));
                uses.insert(Variable::MemD(Loc::Const(c)));
                let def = Variable::tmp(Variable::MemS(Loc::Const(c)));
                temporals.insert(def.clone());
                protos.push(phase(CallPhase::MemCellTemp(c), vars![def], uses));
            }
            let mut defs = VarSet::new();
            for &c in &spec.out_cells {
                let d = Variable::tmp(Variable::MemD(Loc::Const(c)));
                temporals.insert(d.clone());
                defs.insert(d);
            }
            protos.push(phase(CallPhase::MemRestTemp, defs, VarSet::new()));
        }
        NodeOffset::One => {
            // output known, input not: every output cell already reads the
            // whole memory, so node splitting buys nothing and the window is
            // written by a single batch edge
            let mut defs = VarSet::new();
            for &c in &spec.out_cells {
                let d = Variable::tmp(Variable::MemS(Loc::Const(c)));
                temporals.insert(d.clone());
                defs.insert(d);
            }
            protos.push(phase(CallPhase::MemWindowTemp, defs, call_base_uses(spec)));
            let mut clears = VarSet::new();
            for &c in &spec.out_cells {
                let d = Variable::tmp(Variable::MemD(Loc::Const(c)));
                temporals.insert(d.clone());
                clears.insert(d);
            }
            protos.push(phase(CallPhase::MemRestTemp, clears, VarSet::new()));
        }
        NodeOffset::FullFan | NodeOffset::Zero => {
            // output placement unknown: the whole dynamic layer may be written
            let mut uses = call_base_uses(spec);
            uses.insert(Variable::MemS(Loc::Top));
            uses.insert(Variable::MemD(Loc::Top));
            uses.extend(unresolved_out_window(spec));
            let def = Variable::tmp(Variable::MemD(Loc::Top));
            temporals.insert(def.clone());
            protos.push(phase(CallPhase::MemRestTemp, vars![def], uses));
        }
        NodeOffset::NoMemory => {}
    }

    // carry-over, one variable group per node
    let mut carry_out_defs = vars![stack(spec.y)];
    let mut carry_out_uses = vars![Variable::tmp(stack(spec.y))];
    if spec.kind.mutates_world() {
        carry_out_defs.insert(Variable::External(next));
        carry_out_uses.insert(Variable::tmp(Variable::External(next)));
    }
    protos.push(phase(CallPhase::CarryOutcome, carry_out_defs, carry_out_uses));
    protos.push(phase(
        CallPhase::CarryGas,
        vars![gas_at(next)],
        vars![Variable::tmp(gas_at(next))],
    ));
    protos.push(phase(
        CallPhase::CarryMsize,
        vars![msize_at(next)],
        vars![Variable::tmp(msize_at(next))],
    ));
    match spec.node_offset() {
        NodeOffset::Cells(_) => {
            for &c in &spec.out_cells {
                protos.push(phase(
                    CallPhase::CarryMemCell(c),
                    vars![Variable::MemS(Loc::Const(c))],
                    vars![Variable::tmp(Variable::MemS(Loc::Const(c)))],
                ));
            }
            let mut defs = VarSet::new();
            let mut uses = VarSet::new();
            for &c in &spec.out_cells {
                defs.insert(Variable::MemD(Loc::Const(c)));
                uses.insert(Variable::tmp(Variable::MemD(Loc::Const(c))));
            }
            protos.push(phase(CallPhase::CarryMemRest, defs, uses));
        }
        NodeOffset::One => {
            let mut defs = VarSet::new();
            let mut uses = VarSet::new();
            for &c in &spec.out_cells {
                defs.insert(Variable::MemS(Loc::Const(c)));
                uses.insert(Variable::tmp(Variable::MemS(Loc::Const(c))));
            }
            protos.push(phase(CallPhase::CarryMemWindow, defs, uses));
            let mut cdefs = VarSet::new();
            let mut cuses = VarSet::new();
            for &c in &spec.out_cells {
                cdefs.insert(Variable::MemD(Loc::Const(c)));
                cuses.insert(Variable::tmp(Variable::MemD(Loc::Const(c))));
            }
            protos.push(phase(CallPhase::CarryMemRest, cdefs, cuses));
        }
        NodeOffset::FullFan | NodeOffset::Zero => {
            protos.push(phase(
                CallPhase::CarryMemRest,
                vars![Variable::MemD(Loc::Top)],
                vars![Variable::tmp(Variable::MemD(Loc::Top))],
            ));
        }
        NodeOffset::NoMemory => {}
    }

    // finally all temporal variables are set back to bottom
    protos.push(phase(CallPhase::Reset, temporals, VarSet::new()));

    Chain {
        protos,
        tail: Tail::Next,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{asm, load_contract};

    fn cfg_of(hex: &str) -> Cfg {
        build_cfg(&load_contract(hex).unwrap(), 0).unwrap()
    }

    #[test]
    fn add_chain_matches_rule() {
        // PUSH1 5; PUSH1 3; ADD; STOP
        let cfg = cfg_of("6005600301 00");
        let add_edges: Vec<&Edge> = cfg
            .edges
            .iter()
            .filter(|e| e.src.pc() == Some(4))
            .collect();
        assert_eq!(add_edges.len(), 2);
        // value edge: Def {Stack y}, Use {x1, x2}
        let value = &add_edges[0];
        assert_eq!(value.src, NodeId::N(4, 0));
        assert_eq!(value.dst, NodeId::N(4, 1));
        assert_eq!(value.defs, vars![stack(VarId(2))]);
        assert_eq!(value.uses, vars![stack(VarId(0)), stack(VarId(1))]);
        // gas edge: Def {Gas(pc')}, Use {Gas(pc)}
        let gas = &add_edges[1];
        assert_eq!(gas.dst, NodeId::N(5, 0));
        assert_eq!(gas.defs, vars![gas_at(5)]);
        assert_eq!(gas.uses, vars![gas_at(4)]);
        match &gas.label {
            Label::State(Effect::GasCharge {
                cost: GasCost::Const(3),
                ..
            }) => {}
            other => panic!("unexpected label {:?}", other),
        }
    }

    #[test]
    fn jumpi_gas_then_guard_fan() {
        // PUSH1 0; PUSH1 7; JUMPI; STOP; JUMPDEST; STOP
        let cfg = cfg_of("6000600757005b00");
        let edges: Vec<&Edge> = cfg.edges.iter().filter(|e| e.src.pc() == Some(4)).collect();
        assert_eq!(edges.len(), 3);
        match &edges[0].label {
            Label::State(Effect::GasCharge {
                cost: GasCost::Const(10),
                ..
            }) => {}
            other => panic!("unexpected {:?}", other),
        }
        // gas lands at both potential landing pcs
        assert_eq!(edges[0].defs, vars![gas_at(5), gas_at(7)]);
        let guards: Vec<&Edge> = edges[1..].to_vec();
        assert!(guards.iter().all(|e| e.is_guard() && e.defs.is_empty()));
        assert_eq!(guards[0].uses, vars![stack(VarId(1))]);
        let dsts: Vec<NodeId> = guards.iter().map(|e| e.dst).collect();
        assert_eq!(dsts, vec![NodeId::N(5, 0), NodeId::N(7, 0)]);
    }

    #[test]
    fn stop_is_a_single_identity_edge() {
        let cfg = cfg_of("00");
        assert_eq!(cfg.edges.len(), 1);
        let e = &cfg.edges[0];
        assert_eq!(e.src, NodeId::N(0, 0));
        assert_eq!(e.dst, NodeId::Halt);
        assert!(e.defs.is_empty() && e.uses.is_empty());
        assert_eq!(e.label, Label::State(Effect::Id));
    }

    #[test]
    fn mstore_unknown_offset_defs_dynamic_layer() {
        // CALLER; PUSH1 1; SWAP1 no -- keep: PUSH1 1; CALLER; MSTORE => offset = caller
        let cfg = cfg_of("60013352 00");
        let e = cfg
            .edges
            .iter()
            .find(|e| matches!(e.label, Label::State(Effect::MemStoreDyn { .. })))
            .unwrap();
        assert_eq!(e.defs, vars![Variable::MemD(Loc::Top)]);
        assert!(e.uses.contains(&Variable::MemD(Loc::Top)));
        assert!(!e.uses.contains(&Variable::MemS(Loc::Top)));
    }

    #[test]
    fn mstore_known_offset_splits_layers() {
        // PUSH1 7; PUSH1 64; MSTORE
        let cfg = cfg_of("6007604052 00");
        let edges: Vec<&Edge> = cfg.edges.iter().filter(|e| e.src.pc() == Some(4)).collect();
        assert_eq!(edges.len(), 4);
        let loc = Loc::Const(U256::from_u64(64));
        assert_eq!(edges[0].defs, vars![Variable::MemS(loc)]);
        assert_eq!(edges[0].uses, vars![stack(VarId(0))]);
        assert_eq!(edges[1].defs, vars![Variable::MemD(loc)]);
        assert!(edges[1].uses.is_empty());
    }

    #[test]
    fn caller_reads_sender() {
        let cfg = cfg_of("3300");
        let e = &cfg.edges[0];
        assert_eq!(e.defs, vars![stack(VarId(0))]);
        assert_eq!(e.uses, vars![Variable::Local(LocalVar::Sender)]);
    }

    #[test]
    fn call_chain_known_windows() {
        // CALL with fully known windows: in [0,32), out [32,64)
        let asm_text = "\
0: ASSIGN(s0; 0x20) -> 2   # out len
2: ASSIGN(s1; 0x20) -> 4   # out off
4: ASSIGN(s2; 0x20) -> 6   # in len
6: ASSIGN(s3; 0x0) -> 8    # in off
8: ASSIGN(s4; 0x0) -> 10   # value
10: ASSIGN(s5; 0x2a) -> 12 # to
12: ASSIGN(s6; 0xffff) -> 14 # gas
14: CALL(s7; s6, s5, s4, s3, s2, s1, s0) -> 15 ; pre=[_,_,_,0x0,0x20,0x20,0x20]
15: STOP -> exit
";
        let contract = asm::parse(asm_text).unwrap();
        let cfg = build_cfg(&contract, 0).unwrap();
        let spec = &cfg.call_specs[&14];
        assert_eq!(spec.node_offset(), NodeOffset::Cells(1));
        assert_eq!(spec.in_cells, vec![U256::ZERO]);
        assert_eq!(spec.out_cells, vec![U256::from_u64(32)]);
        let chain: Vec<&Edge> = cfg.edges.iter().filter(|e| e.src.pc() == Some(14)).collect();
        // outcome, gas, msize, cell, rest, carry x3, carry cell, carry rest, reset
        assert_eq!(chain.len(), 11);
        let outcome = chain[0];
        assert!(outcome
            .defs
            .contains(&Variable::tmp(Variable::External(15))));
        assert!(outcome.uses.contains(&Variable::Global(GlobalVar::Timestamp)));
        assert!(outcome.uses.contains(&Variable::StorD(Loc::Top)));
        assert!(outcome
            .uses
            .contains(&Variable::MemS(Loc::Const(U256::ZERO))));
        assert!(!outcome.uses.contains(&Variable::MemS(Loc::Top)));
        // last edge resets every temporal written by the chain
        let reset = chain.last().unwrap();
        assert!(reset.defs.iter().all(|v| v.is_temporal()));
        assert_eq!(reset.dst, NodeId::N(15, 0));
    }

    #[test]
    fn create_chain_has_no_memory_phase() {
        let asm_text = "\
0: ASSIGN(s0; 0x20) -> 2
2: ASSIGN(s1; 0x0) -> 4
4: ASSIGN(s2; 0x0) -> 6
6: CREATE(s3; s2, s1, s0) -> 7 ; pre=[_,0x0,0x20]
7: STOP -> exit
";
        let contract = asm::parse(asm_text).unwrap();
        let cfg = build_cfg(&contract, 0).unwrap();
        let chain: Vec<&Edge> = cfg.edges.iter().filter(|e| e.src.pc() == Some(6)).collect();
        assert_eq!(chain.len(), 7);
        assert_eq!(cfg.call_specs[&6].node_offset(), NodeOffset::NoMemory);
    }
}
