//! Byte-stream decoding into raw instructions.

use super::opcode::raw_info;
use super::RawInstruction;

/// Decodes a byte string into a gap-free instruction stream. Unknown bytes
/// degrade to INVALID (0xfe) and are recorded as warnings; a PUSH whose
/// immediate runs past the end of the code is padded with zero bytes, which
/// matches the zero-extension behavior of the EVM.
pub fn decode(bytes: &[u8]) -> (Vec<RawInstruction>, Vec<String>) {
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    let mut pc = 0usize;
    while pc < bytes.len() {
        let byte = bytes[pc];
        match raw_info(byte) {
            Some(info) if info.imm > 0 => {
                let want = info.imm as usize;
                let end = (pc + 1 + want).min(bytes.len());
                let mut imm = bytes[pc + 1..end].to_vec();
                if imm.len() < want {
                    warnings.push(format!(
                        "truncated PUSH{} at pc {}: padded {} missing bytes with zeros",
                        want,
                        pc,
                        want - imm.len()
                    ));
                    imm.resize(want, 0);
                }
                out.push(RawInstruction {
                    pc: pc as u32,
                    opcode: byte,
                    immediate: Some(imm),
                });
                pc += 1 + want;
            }
            Some(_) => {
                out.push(RawInstruction {
                    pc: pc as u32,
                    opcode: byte,
                    immediate: None,
                });
                pc += 1;
            }
            None => {
                warnings.push(format!(
                    "unknown opcode 0x{:02x} at pc {}: kept as INVALID",
                    byte, pc
                ));
                out.push(RawInstruction {
                    pc: pc as u32,
                    opcode: 0xfe,
                    immediate: None,
                });
                pc += 1;
            }
        }
    }
    (out, warnings)
}

/// Re-encodes a decoded stream; inverse of `decode` on well-formed input.
pub fn encode(stream: &[RawInstruction]) -> Vec<u8> {
    let mut out = Vec::new();
    for ri in stream {
        out.push(ri.opcode);
        if let Some(imm) = &ri.immediate {
            out.extend_from_slice(imm);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_stop() {
        let (s, w) = decode(&[0x00]);
        assert!(w.is_empty());
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].pc, 0);
        assert_eq!(s[0].opcode, 0x00);
    }

    #[test]
    fn push_immediate() {
        // 0x6001: verified against the EVM opcode table (PUSH1 = 0x60).
        let (s, w) = decode(&[0x60, 0x01]);
        assert!(w.is_empty());
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].immediate.as_deref(), Some(&[1u8][..]));
    }

    #[test]
    fn push_push_add() {
        // 0x6005600301 = PUSH1 5, PUSH1 3, ADD per the reference table.
        let (s, w) = decode(&[0x60, 0x05, 0x60, 0x03, 0x01]);
        assert!(w.is_empty());
        let pcs: Vec<u32> = s.iter().map(|r| r.pc).collect();
        assert_eq!(pcs, vec![0, 2, 4]);
        assert_eq!(s[2].opcode, 0x01);
    }

    #[test]
    fn unknown_byte_degrades() {
        let (s, w) = decode(&[0x0c, 0x00]);
        assert_eq!(s[0].opcode, 0xfe);
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("unknown opcode"));
    }

    #[test]
    fn truncated_push_pads() {
        let (s, w) = decode(&[0x61, 0xaa]);
        assert_eq!(s[0].immediate.as_deref(), Some(&[0xaa, 0x00][..]));
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn roundtrip() {
        let bytes = vec![0x60, 0x05, 0x60, 0x03, 0x01, 0x5b, 0x00];
        let (s, _) = decode(&bytes);
        assert_eq!(encode(&s), bytes);
    }
}
