//! Text format for linearized contracts, one instruction per line:
//!
//! ```text
//! <pc>: OP(outs; ins) -> <pc_next> ; pre=[v|_,...]
//! ```
//!
//! Program counters are decimal, values hex with a `0x` prefix, halting
//! instructions print `-> exit`, and an ASSIGN lowered from PUSH carries its
//! constant in the input position.

use std::collections::BTreeMap;

use super::opcode::Op;
use super::{Contract, FrontendError, Instr, VarId};
use crate::u256::U256;

/// Expected (outs, ins) arity; ASSIGN accepts 0 or 1 inputs.
pub fn arity(op: Op) -> (usize, usize) {
    match op {
        Op::Stop | Op::JumpDest | Op::Invalid => (0, 0),
        Op::Bin(_) | Op::Exp | Op::Sha3 => (1, 2),
        Op::IsZero | Op::Not => (1, 1),
        Op::AddMod | Op::MulMod => (1, 3),
        Op::Env(_) | Op::Pc | Op::MSize | Op::Gas => (1, 0),
        Op::CallDataLoad | Op::ExtCodeSize | Op::Balance | Op::BlockHash => (1, 1),
        Op::CallDataCopy | Op::CodeCopy => (0, 3),
        Op::ExtCodeCopy => (0, 4),
        Op::MLoad | Op::SLoad => (1, 1),
        Op::MStore | Op::SStore | Op::Return => (0, 2),
        Op::Jump | Op::SelfDestruct => (0, 1),
        Op::JumpI => (0, 2),
        Op::Assign => (1, 1),
        Op::Log(n) => (0, n as usize + 2),
        Op::Create => (1, 3),
        Op::Create2 => (1, 4),
        Op::Call => (1, 7),
        Op::StaticCall => (1, 6),
    }
}

pub fn print_instr(pc: u32, instr: &Instr) -> String {
    let mut s = format!("{}: {}", pc, instr.op.name());
    let ins_strs: Vec<String> = if instr.op == Op::Assign && instr.imm.is_some() {
        vec![instr.imm.unwrap().to_string()]
    } else {
        instr.ins.iter().map(|v| v.to_string()).collect()
    };
    if !instr.outs.is_empty() || !ins_strs.is_empty() {
        let outs: Vec<String> = instr.outs.iter().map(|v| v.to_string()).collect();
        s.push_str(&format!("({}; {})", outs.join(", "), ins_strs.join(", ")));
    }
    if instr.op.is_halting() {
        s.push_str(" -> exit");
    } else {
        s.push_str(&format!(" -> {}", instr.pc_next));
    }
    if !instr.ins.is_empty() {
        let slots: Vec<String> = instr
            .pre
            .iter()
            .map(|p| p.map_or_else(|| "_".to_string(), |v| v.to_string()))
            .collect();
        s.push_str(&format!(" ; pre=[{}]", slots.join(",")));
    }
    s
}

pub fn print(contract: &Contract) -> String {
    let mut out = String::new();
    for (&pc, instr) in &contract.code {
        out.push_str(&print_instr(pc, instr));
        out.push('\n');
    }
    out
}

fn err(line: usize, msg: impl Into<String>) -> FrontendError {
    FrontendError::Asm {
        line,
        msg: msg.into(),
    }
}

fn parse_var(tok: &str, line: usize) -> Result<VarId, FrontendError> {
    let n = tok
        .strip_prefix('s')
        .and_then(|t| t.parse::<u32>().ok())
        .ok_or_else(|| err(line, format!("expected stack variable, got `{}`", tok)))?;
    Ok(VarId(n))
}

pub fn parse(text: &str) -> Result<Contract, FrontendError> {
    let mut code: BTreeMap<u32, Instr> = BTreeMap::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw_line.split('#').next().unwrap().trim();
        if content.is_empty() {
            continue;
        }
        let (pc_str, rest) = content
            .split_once(':')
            .ok_or_else(|| err(line, "missing `pc:` prefix"))?;
        let pc: u32 = pc_str
            .trim()
            .parse()
            .map_err(|_| err(line, "program counter must be decimal"))?;
        let rest = rest.trim();

        // split off `; pre=[...]`
        let (head, pre_part) = match rest.rsplit_once("; pre=[") {
            Some((h, p)) => {
                let p = p
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, "unterminated pre list"))?;
                (h.trim(), Some(p))
            }
            None => (rest, None),
        };
        let (op_part, tgt_part) = head
            .split_once("->")
            .ok_or_else(|| err(line, "missing `->` successor"))?;
        let op_part = op_part.trim();
        let tgt_part = tgt_part.trim();

        let (name, args) = match op_part.split_once('(') {
            Some((n, a)) => {
                let a = a
                    .trim_end()
                    .strip_suffix(')')
                    .ok_or_else(|| err(line, "unterminated argument list"))?;
                (n.trim(), Some(a))
            }
            None => (op_part.trim(), None),
        };
        let op = Op::from_name(name).ok_or_else(|| err(line, format!("unknown op `{}`", name)))?;

        let mut outs = Vec::new();
        let mut ins = Vec::new();
        let mut imm = None;
        if let Some(args) = args {
            let (o, i) = args
                .split_once(';')
                .ok_or_else(|| err(line, "argument list needs `outs; ins`"))?;
            for tok in o.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                outs.push(parse_var(tok, line)?);
            }
            for tok in i.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                if let Some(hex) = tok.strip_prefix("0x") {
                    if op != Op::Assign || imm.is_some() {
                        return Err(err(line, "constant operand is only valid as ASSIGN source"));
                    }
                    imm = Some(
                        U256::from_hex(hex).map_err(|e| err(line, e.to_string()))?,
                    );
                } else {
                    ins.push(parse_var(tok, line)?);
                }
            }
        }

        let (want_outs, want_ins) = arity(op);
        if outs.len() != want_outs {
            return Err(err(line, format!("{} expects {} outputs", op, want_outs)));
        }
        let ok_ins = if op == Op::Assign {
            (imm.is_some() && ins.is_empty()) || (imm.is_none() && ins.len() == 1)
        } else {
            ins.len() == want_ins && imm.is_none()
        };
        if !ok_ins {
            return Err(err(line, format!("{} has a malformed input list", op)));
        }

        let pc_next = if tgt_part == "exit" {
            if !op.is_halting() {
                return Err(err(line, "`exit` successor on a non-halting op"));
            }
            pc
        } else {
            tgt_part
                .split_whitespace()
                .next()
                .unwrap_or("")
                .parse()
                .map_err(|_| err(line, "successor must be decimal or `exit`"))?
        };

        let mut pre = vec![None; ins.len()];
        if let Some(p) = pre_part {
            let slots: Vec<&str> = if p.trim().is_empty() {
                vec![]
            } else {
                p.split(',').map(str::trim).collect()
            };
            if slots.len() != ins.len() {
                return Err(err(line, "pre list length must match the input count"));
            }
            for (i, tok) in slots.iter().enumerate() {
                if *tok != "_" {
                    pre[i] =
                        Some(U256::from_hex(tok).map_err(|e| err(line, e.to_string()))?);
                }
            }
        }
        if matches!(op, Op::Jump | Op::JumpI) && pre.first().copied().flatten().is_none() {
            return Err(err(line, "jump destinations must carry a constant pre[0]"));
        }
        if op == Op::Jump {
            let tgt = pre[0].unwrap();
            if U256::from_u64(pc_next as u64) != tgt {
                return Err(err(line, "JUMP successor must equal pre[0]"));
            }
        }

        if code
            .insert(
                pc,
                Instr {
                    op,
                    outs,
                    ins,
                    imm,
                    pc_next,
                    pre,
                },
            )
            .is_some()
        {
            return Err(err(line, format!("duplicate instruction at pc {}", pc)));
        }
    }

    if code.is_empty() {
        return Err(err(0, "empty listing"));
    }
    let entry = *code.keys().next().unwrap();
    let contract = Contract {
        code,
        entry,
        source_hash: String::new(),
        warnings: Vec::new(),
    };
    validate(&contract)?;
    Ok(contract)
}

fn validate(contract: &Contract) -> Result<(), FrontendError> {
    if let Err(v) = contract.check_ssa() {
        return Err(err(0, format!("variable {} has multiple definitions", v)));
    }
    for (&pc, instr) in &contract.code {
        for succ in instr.successors() {
            if !contract.code.contains_key(&succ) {
                return Err(err(
                    0,
                    format!("pc {} flows to {}, which holds no instruction", pc, succ),
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::decode::decode;
    use crate::frontend::linearize::linearize;
    use crate::frontend::preprocess::preprocess;

    #[test]
    fn print_examples() {
        let (raw, _) = decode(&[0x00]);
        let c = preprocess(linearize(&raw).unwrap());
        assert_eq!(print(&c), "0: STOP -> exit\n");
    }

    #[test]
    fn roundtrip_through_text() {
        let (raw, _) = decode(&[0x60, 0x05, 0x60, 0x03, 0x01, 0x60, 0x00, 0x55, 0x00]);
        let c = preprocess(linearize(&raw).unwrap());
        let text = print(&c);
        let c2 = parse(&text).unwrap();
        assert_eq!(c.code, c2.code);
        assert_eq!(c.entry, c2.entry);
    }

    #[test]
    fn rejects_double_definition() {
        let text = "0: ASSIGN(s0; 0x1) -> 2\n2: ASSIGN(s0; 0x2) -> 4\n4: STOP -> exit\n";
        assert!(parse(text).is_err());
    }

    #[test]
    fn rejects_dangling_successor() {
        let text = "0: ASSIGN(s0; 0x1) -> 9\n";
        assert!(parse(text).is_err());
    }

    #[test]
    fn jumpi_line_parses() {
        let text = "\
0: ASSIGN(s0; 0x1) -> 2
2: JUMPI(; s0, s0) -> 3 ; pre=[0x5,_]
3: STOP -> exit
5: JUMPDEST -> 6
6: STOP -> exit
";
        let c = parse(text).unwrap();
        assert_eq!(c.code[&2].successors(), vec![3, 5]);
    }
}
