//! Raw EVM opcode table (one fixed revision) and the linearized opcode set.

use std::fmt;

/// Raw opcode classification used by the decoder and the abstract-stack
/// simulation. `pops`/`pushes` describe the stack effect of the raw opcode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawInfo {
    pub name: &'static str,
    pub pops: u8,
    pub pushes: u8,
    /// Number of immediate bytes following the opcode (PUSH only).
    pub imm: u8,
}

/// Returns the table entry for a raw byte, or `None` for bytes outside the
/// supported instruction set (those decode as INVALID with a warning).
pub fn raw_info(byte: u8) -> Option<RawInfo> {
    let e = |name, pops, pushes| RawInfo { name, pops, pushes, imm: 0 };
    Some(match byte {
        0x00 => e("STOP", 0, 0),
        0x01 => e("ADD", 2, 1),
        0x02 => e("MUL", 2, 1),
        0x03 => e("SUB", 2, 1),
        0x04 => e("DIV", 2, 1),
        0x05 => e("SDIV", 2, 1),
        0x06 => e("MOD", 2, 1),
        0x07 => e("SMOD", 2, 1),
        0x08 => e("ADDMOD", 3, 1),
        0x09 => e("MULMOD", 3, 1),
        0x0a => e("EXP", 2, 1),
        0x0b => e("SIGNEXTEND", 2, 1),
        0x10 => e("LT", 2, 1),
        0x11 => e("GT", 2, 1),
        0x12 => e("SLT", 2, 1),
        0x13 => e("SGT", 2, 1),
        0x14 => e("EQ", 2, 1),
        0x15 => e("ISZERO", 1, 1),
        0x16 => e("AND", 2, 1),
        0x17 => e("OR", 2, 1),
        0x18 => e("XOR", 2, 1),
        0x19 => e("NOT", 1, 1),
        0x1a => e("BYTE", 2, 1),
        0x20 => e("SHA3", 2, 1),
        0x30 => e("ADDRESS", 0, 1),
        0x31 => e("BALANCE", 1, 1),
        0x32 => e("ORIGIN", 0, 1),
        0x33 => e("CALLER", 0, 1),
        0x34 => e("CALLVALUE", 0, 1),
        0x35 => e("CALLDATALOAD", 1, 1),
        0x36 => e("CALLDATASIZE", 0, 1),
        0x37 => e("CALLDATACOPY", 3, 0),
        0x38 => e("CODESIZE", 0, 1),
        0x39 => e("CODECOPY", 3, 0),
        0x3a => e("GASPRICE", 0, 1),
        0x3b => e("EXTCODESIZE", 1, 1),
        0x3c => e("EXTCODECOPY", 4, 0),
        0x40 => e("BLOCKHASH", 1, 1),
        0x41 => e("COINBASE", 0, 1),
        0x42 => e("TIMESTAMP", 0, 1),
        0x43 => e("NUMBER", 0, 1),
        0x44 => e("DIFFICULTY", 0, 1),
        0x45 => e("GASLIMIT", 0, 1),
        0x50 => e("POP", 1, 0),
        0x51 => e("MLOAD", 1, 1),
        0x52 => e("MSTORE", 2, 0),
        0x54 => e("SLOAD", 1, 1),
        0x55 => e("SSTORE", 2, 0),
        0x56 => e("JUMP", 1, 0),
        0x57 => e("JUMPI", 2, 0),
        0x58 => e("PC", 0, 1),
        0x59 => e("MSIZE", 0, 1),
        0x5a => e("GAS", 0, 1),
        0x5b => e("JUMPDEST", 0, 0),
        0x60..=0x7f => RawInfo {
            name: "PUSH",
            pops: 0,
            pushes: 1,
            imm: byte - 0x5f,
        },
        0x80..=0x8f => RawInfo { name: "DUP", pops: 0, pushes: 1, imm: 0 },
        0x90..=0x9f => RawInfo { name: "SWAP", pops: 0, pushes: 0, imm: 0 },
        0xa0..=0xa4 => RawInfo {
            name: "LOG",
            pops: 2 + (byte - 0xa0),
            pushes: 0,
            imm: 0,
        },
        0xf0 => e("CREATE", 3, 1),
        0xf1 => e("CALL", 7, 1),
        0xf2 => e("CALLCODE", 7, 1),
        0xf3 => e("RETURN", 2, 0),
        0xf4 => e("DELEGATECALL", 6, 1),
        0xf5 => e("CREATE2", 4, 1),
        0xfa => e("STATICCALL", 6, 1),
        0xfe => e("INVALID", 0, 0),
        0xff => e("SELFDESTRUCT", 1, 0),
        _ => return None,
    })
}

/// Pure binary stack operations with constant gas cost (the 3/5 groups).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Sdiv,
    Mod,
    Smod,
    Lt,
    Gt,
    Slt,
    Sgt,
    Eq,
    And,
    Or,
    Xor,
    Byte,
    SignExtend,
}

impl BinOp {
    pub fn gas(self) -> u64 {
        use BinOp::*;
        match self {
            Add | Sub | Lt | Gt | Slt | Sgt | Eq | And | Or | Xor | Byte => 3,
            Mul | Div | Sdiv | Mod | Smod | SignExtend => 5,
        }
    }

    pub fn name(self) -> &'static str {
        use BinOp::*;
        match self {
            Add => "ADD",
            Sub => "SUB",
            Mul => "MUL",
            Div => "DIV",
            Sdiv => "SDIV",
            Mod => "MOD",
            Smod => "SMOD",
            Lt => "LT",
            Gt => "GT",
            Slt => "SLT",
            Sgt => "SGT",
            Eq => "EQ",
            And => "AND",
            Or => "OR",
            Xor => "XOR",
            Byte => "BYTE",
            SignExtend => "SIGNEXTEND",
        }
    }
}

/// Scalar environment sources with a dedicated read opcode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EnvOp {
    Address,
    Caller,
    CallValue,
    CallDataSize,
    CodeSize,
    Origin,
    GasPrice,
    Coinbase,
    Timestamp,
    Number,
    Difficulty,
    GasLimit,
}

impl EnvOp {
    pub fn name(self) -> &'static str {
        use EnvOp::*;
        match self {
            Address => "ADDRESS",
            Caller => "CALLER",
            CallValue => "CALLVALUE",
            CallDataSize => "CALLDATASIZE",
            CodeSize => "CODESIZE",
            Origin => "ORIGIN",
            GasPrice => "GASPRICE",
            Coinbase => "COINBASE",
            Timestamp => "TIMESTAMP",
            Number => "NUMBER",
            Difficulty => "DIFFICULTY",
            GasLimit => "GASLIMIT",
        }
    }
}

/// Linearized instruction set: stack shuffling is gone, PUSH/DUP became
/// ASSIGN, and every remaining instruction works on named SSA variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Stop,
    Bin(BinOp),
    Exp,
    Sha3,
    IsZero,
    Not,
    AddMod,
    MulMod,
    Env(EnvOp),
    CallDataLoad,
    CallDataCopy,
    CodeCopy,
    ExtCodeSize,
    ExtCodeCopy,
    Balance,
    BlockHash,
    MLoad,
    MStore,
    SLoad,
    SStore,
    Jump,
    JumpI,
    Pc,
    MSize,
    Gas,
    JumpDest,
    Assign,
    Log(u8),
    Create,
    Create2,
    Call,
    StaticCall,
    Return,
    Invalid,
    SelfDestruct,
}

impl Op {
    pub fn name(self) -> String {
        match self {
            Op::Stop => "STOP".into(),
            Op::Bin(b) => b.name().into(),
            Op::Exp => "EXP".into(),
            Op::Sha3 => "SHA3".into(),
            Op::IsZero => "ISZERO".into(),
            Op::Not => "NOT".into(),
            Op::AddMod => "ADDMOD".into(),
            Op::MulMod => "MULMOD".into(),
            Op::Env(e) => e.name().into(),
            Op::CallDataLoad => "CALLDATALOAD".into(),
            Op::CallDataCopy => "CALLDATACOPY".into(),
            Op::CodeCopy => "CODECOPY".into(),
            Op::ExtCodeSize => "EXTCODESIZE".into(),
            Op::ExtCodeCopy => "EXTCODECOPY".into(),
            Op::Balance => "BALANCE".into(),
            Op::BlockHash => "BLOCKHASH".into(),
            Op::MLoad => "MLOAD".into(),
            Op::MStore => "MSTORE".into(),
            Op::SLoad => "SLOAD".into(),
            Op::SStore => "SSTORE".into(),
            Op::Jump => "JUMP".into(),
            Op::JumpI => "JUMPI".into(),
            Op::Pc => "PC".into(),
            Op::MSize => "MSIZE".into(),
            Op::Gas => "GAS".into(),
            Op::JumpDest => "JUMPDEST".into(),
            Op::Assign => "ASSIGN".into(),
            Op::Log(n) => format!("LOG{}", n),
            Op::Create => "CREATE".into(),
            Op::Create2 => "CREATE2".into(),
            Op::Call => "CALL".into(),
            Op::StaticCall => "STATICCALL".into(),
            Op::Return => "RETURN".into(),
            Op::Invalid => "INVALID".into(),
            Op::SelfDestruct => "SELFDESTRUCT".into(),
        }
    }

    pub fn from_name(s: &str) -> Option<Op> {
        let op = match s {
            "STOP" => Op::Stop,
            "ADD" => Op::Bin(BinOp::Add),
            "SUB" => Op::Bin(BinOp::Sub),
            "MUL" => Op::Bin(BinOp::Mul),
            "DIV" => Op::Bin(BinOp::Div),
            "SDIV" => Op::Bin(BinOp::Sdiv),
            "MOD" => Op::Bin(BinOp::Mod),
            "SMOD" => Op::Bin(BinOp::Smod),
            "LT" => Op::Bin(BinOp::Lt),
            "GT" => Op::Bin(BinOp::Gt),
            "SLT" => Op::Bin(BinOp::Slt),
            "SGT" => Op::Bin(BinOp::Sgt),
            "EQ" => Op::Bin(BinOp::Eq),
            "AND" => Op::Bin(BinOp::And),
            "OR" => Op::Bin(BinOp::Or),
            "XOR" => Op::Bin(BinOp::Xor),
            "BYTE" => Op::Bin(BinOp::Byte),
            "SIGNEXTEND" => Op::Bin(BinOp::SignExtend),
            "EXP" => Op::Exp,
            "SHA3" => Op::Sha3,
            "ISZERO" => Op::IsZero,
            "NOT" => Op::Not,
            "ADDMOD" => Op::AddMod,
            "MULMOD" => Op::MulMod,
            "ADDRESS" => Op::Env(EnvOp::Address),
            "CALLER" => Op::Env(EnvOp::Caller),
            "CALLVALUE" => Op::Env(EnvOp::CallValue),
            "CALLDATASIZE" => Op::Env(EnvOp::CallDataSize),
            "CODESIZE" => Op::Env(EnvOp::CodeSize),
            "ORIGIN" => Op::Env(EnvOp::Origin),
            "GASPRICE" => Op::Env(EnvOp::GasPrice),
            "COINBASE" => Op::Env(EnvOp::Coinbase),
            "TIMESTAMP" => Op::Env(EnvOp::Timestamp),
            "NUMBER" => Op::Env(EnvOp::Number),
            "DIFFICULTY" => Op::Env(EnvOp::Difficulty),
            "GASLIMIT" => Op::Env(EnvOp::GasLimit),
            "CALLDATALOAD" => Op::CallDataLoad,
            "CALLDATACOPY" => Op::CallDataCopy,
            "CODECOPY" => Op::CodeCopy,
            "EXTCODESIZE" => Op::ExtCodeSize,
            "EXTCODECOPY" => Op::ExtCodeCopy,
            "BALANCE" => Op::Balance,
            "BLOCKHASH" => Op::BlockHash,
            "MLOAD" => Op::MLoad,
            "MSTORE" => Op::MStore,
            "SLOAD" => Op::SLoad,
            "SSTORE" => Op::SStore,
            "JUMP" => Op::Jump,
            "JUMPI" => Op::JumpI,
            "PC" => Op::Pc,
            "MSIZE" => Op::MSize,
            "GAS" => Op::Gas,
            "JUMPDEST" => Op::JumpDest,
            "ASSIGN" => Op::Assign,
            "CREATE" => Op::Create,
            "CREATE2" => Op::Create2,
            "CALL" => Op::Call,
            "STATICCALL" => Op::StaticCall,
            "RETURN" => Op::Return,
            "INVALID" => Op::Invalid,
            "SELFDESTRUCT" => Op::SelfDestruct,
            _ => {
                if let Some(n) = s.strip_prefix("LOG") {
                    let n: u8 = n.parse().ok()?;
                    if n > 4 {
                        return None;
                    }
                    return Some(Op::Log(n));
                }
                return None;
            }
        };
        Some(op)
    }

    /// Instructions that terminate the control flow (no successor pc).
    pub fn is_halting(self) -> bool {
        matches!(self, Op::Stop | Op::Return | Op::Invalid | Op::SelfDestruct)
    }

    pub fn is_call_like(self) -> bool {
        matches!(self, Op::Call | Op::StaticCall | Op::Create | Op::Create2)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_covers_push_widths() {
        assert_eq!(raw_info(0x60).unwrap().imm, 1);
        assert_eq!(raw_info(0x7f).unwrap().imm, 32);
        assert_eq!(raw_info(0x5b).unwrap().name, "JUMPDEST");
        assert!(raw_info(0x21).is_none());
        assert!(raw_info(0xfd).is_none()); // REVERT is outside the modeled set
    }

    #[test]
    fn op_name_roundtrip() {
        for s in ["ADD", "SHA3", "LOG3", "STATICCALL", "ASSIGN", "SELFDESTRUCT"] {
            assert_eq!(Op::from_name(s).unwrap().name(), s);
        }
        assert!(Op::from_name("DELEGATECALL").is_none());
        assert!(Op::from_name("LOG9").is_none());
    }
}
