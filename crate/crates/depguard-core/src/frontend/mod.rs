//! Bytecode frontend: decoding, SSA linearization, and sound preprocessing.

pub mod asm;
pub mod decode;
pub mod linearize;
pub mod opcode;
pub mod preprocess;

use std::collections::BTreeMap;
use std::fmt;

use crate::u256::U256;
pub use opcode::{BinOp, EnvOp, Op};

/// An SSA stack variable, assigned by exactly one instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub u32);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// One raw instruction as decoded from the byte stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawInstruction {
    pub pc: u32,
    pub opcode: u8,
    pub immediate: Option<Vec<u8>>,
}

/// A linearized instruction. `pre` has one slot per entry of `ins` and holds
/// precomputed constants where a unique value is provable on all paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instr {
    pub op: Op,
    pub outs: Vec<VarId>,
    pub ins: Vec<VarId>,
    /// Constant payload of an ASSIGN lowered from PUSH.
    pub imm: Option<U256>,
    /// Fall-through successor. For JUMP this equals the jump target.
    pub pc_next: u32,
    pub pre: Vec<Option<U256>>,
}

impl Instr {
    /// All successor program counters in the control flow.
    pub fn successors(&self) -> Vec<u32> {
        match self.op {
            op if op.is_halting() => vec![],
            Op::Jump => vec![self.pc_next],
            Op::JumpI => {
                let target = self.pre[0].expect("JUMPI target is constant by construction");
                vec![self.pc_next, target.low_u64() as u32]
            }
            _ => vec![self.pc_next],
        }
    }

    pub fn jumpi_target(&self) -> Option<u32> {
        match self.op {
            Op::JumpI => self.pre[0].map(|v| v.low_u64() as u32),
            _ => None,
        }
    }
}

/// A linearized contract: a map from program counters to instructions.
#[derive(Debug, Clone, Default)]
pub struct Contract {
    pub code: BTreeMap<u32, Instr>,
    pub entry: u32,
    /// Hex digest of the source bytes (or the asm text) this was built from.
    pub source_hash: String,
    pub warnings: Vec<String>,
}

impl Contract {
    pub fn instr(&self, pc: u32) -> Option<&Instr> {
        self.code.get(&pc)
    }

    /// pc of the unique defining instruction per SSA variable.
    pub fn var_defs(&self) -> BTreeMap<VarId, u32> {
        let mut defs = BTreeMap::new();
        for (&pc, instr) in &self.code {
            for &v in &instr.outs {
                defs.insert(v, pc);
            }
        }
        defs
    }

    /// Verifies the single-assignment property by scanning all outputs.
    pub fn check_ssa(&self) -> Result<(), VarId> {
        let mut seen = std::collections::BTreeSet::new();
        for instr in self.code.values() {
            for &v in &instr.outs {
                if !seen.insert(v) {
                    return Err(v);
                }
            }
        }
        Ok(())
    }

    /// All constants appearing in filled `pre` slots or ASSIGN immediates:
    /// the finite location domain used to ground the dependency rules.
    pub fn known_constants(&self) -> std::collections::BTreeSet<U256> {
        let mut set = std::collections::BTreeSet::new();
        for instr in self.code.values() {
            for slot in instr.pre.iter().flatten() {
                set.insert(*slot);
            }
            if let Some(v) = instr.imm {
                set.insert(v);
            }
        }
        set
    }

    pub fn contains_op(&self, op: Op) -> bool {
        self.code.values().any(|i| i.op == op)
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum FrontendError {
    #[error("invalid hex input: {0}")]
    Hex(String),
    #[error("asm parse error on line {line}: {msg}")]
    Asm { line: usize, msg: String },
    #[error(transparent)]
    Linearize(#[from] linearize::LinearizeError),
}

/// Parses whitespace-tolerant hex, with or without a `0x` prefix.
pub fn parse_hex(text: &str) -> Result<Vec<u8>, FrontendError> {
    let cleaned: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let cleaned = cleaned.strip_prefix("0x").unwrap_or(&cleaned);
    if cleaned.len() % 2 != 0 {
        return Err(FrontendError::Hex("odd number of hex digits".into()));
    }
    let mut out = Vec::with_capacity(cleaned.len() / 2);
    let bytes = cleaned.as_bytes();
    for i in (0..bytes.len()).step_by(2) {
        let hi = (bytes[i] as char).to_digit(16);
        let lo = (bytes[i + 1] as char).to_digit(16);
        match (hi, lo) {
            (Some(h), Some(l)) => out.push((h * 16 + l) as u8),
            _ => {
                return Err(FrontendError::Hex(format!(
                    "non-hex characters at offset {}",
                    i
                )))
            }
        }
    }
    Ok(out)
}

/// Loads a contract from either input format: hex bytecode or the linearized
/// assembly listing. The format is detected from the content.
pub fn load_contract(text: &str) -> Result<Contract, FrontendError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(FrontendError::Hex("empty input".into()));
    }
    let looks_hex = trimmed
        .chars()
        .all(|c| c.is_ascii_hexdigit() || c.is_whitespace() || c == 'x');
    if looks_hex && !trimmed.contains(':') {
        let bytes = parse_hex(trimmed)?;
        let (raw, warnings) = decode::decode(&bytes);
        let mut contract = linearize::linearize(&raw)?;
        contract.warnings.extend(warnings);
        contract.source_hash = source_digest(&bytes);
        Ok(preprocess::preprocess(contract))
    } else {
        let mut contract = asm::parse(text)?;
        contract.source_hash = source_digest(text.as_bytes());
        Ok(preprocess::preprocess(contract))
    }
}

/// FNV-1a digest of the source; a cheap stable identifier for reports.
pub fn source_digest(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{:016x}", hash)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_parsing_tolerates_whitespace_and_prefix() {
        assert_eq!(parse_hex("0x60 01").unwrap(), vec![0x60, 0x01]);
        assert_eq!(parse_hex("6001\n00").unwrap(), vec![0x60, 0x01, 0x00]);
        assert!(parse_hex("0x123").is_err());
        assert!(parse_hex("zz").is_err());
    }
}
