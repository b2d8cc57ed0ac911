//! Concrete CFG states: the two-layered memory and storage maps, pc-indexed
//! gas and active-word families, environments, the external world snapshot,
//! and the temporal variable store used by the call chains.

use std::collections::BTreeMap;

use super::{GlobalVar, Loc, LocalVar, Variable};
use crate::frontend::VarId;
use crate::u256::U256;

/// External account state as seen through the world snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Account {
    pub balance: U256,
    pub nonce: u64,
    /// Stands in for the account code; the world model derives behavior
    /// deterministically from it.
    pub code_seed: u64,
    pub storage: BTreeMap<U256, U256>,
}

/// Opaque snapshot of everything living outside the analyzed contract's own
/// storage: balances, nonces, and other accounts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct World {
    pub seed: u64,
    pub this_balance: U256,
    pub this_nonce: u64,
    pub accounts: BTreeMap<U256, Account>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LocalEnv {
    pub actor: U256,
    pub input: Vec<u8>,
    pub sender: U256,
    pub value: U256,
    pub code: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GlobalEnv {
    pub parent: U256,
    pub beneficiary: U256,
    pub difficulty: U256,
    pub number: U256,
    pub gaslimit: U256,
    pub timestamp: U256,
    pub origin: U256,
    pub prize: U256,
}

impl GlobalEnv {
    pub fn get(&self, v: GlobalVar) -> U256 {
        match v {
            GlobalVar::Parent => self.parent,
            GlobalVar::Beneficiary => self.beneficiary,
            GlobalVar::Difficulty => self.difficulty,
            GlobalVar::Number => self.number,
            GlobalVar::GasLimit => self.gaslimit,
            GlobalVar::Timestamp => self.timestamp,
            GlobalVar::Origin => self.origin,
            GlobalVar::Prize => self.prize,
        }
    }

    pub fn set(&mut self, v: GlobalVar, val: U256) {
        let slot = match v {
            GlobalVar::Parent => &mut self.parent,
            GlobalVar::Beneficiary => &mut self.beneficiary,
            GlobalVar::Difficulty => &mut self.difficulty,
            GlobalVar::Number => &mut self.number,
            GlobalVar::GasLimit => &mut self.gaslimit,
            GlobalVar::Timestamp => &mut self.timestamp,
            GlobalVar::Origin => &mut self.origin,
            GlobalVar::Prize => &mut self.prize,
        };
        *slot = val;
    }
}

/// A pc-indexed scalar family initialized as a constant function.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PcIndexed {
    pub default: U256,
    pub overrides: BTreeMap<u32, U256>,
}

impl PcIndexed {
    pub fn constant(v: U256) -> Self {
        PcIndexed {
            default: v,
            overrides: BTreeMap::new(),
        }
    }

    pub fn at(&self, pc: u32) -> U256 {
        self.overrides.get(&pc).copied().unwrap_or(self.default)
    }

    pub fn set(&mut self, pc: u32, v: U256) {
        self.overrides.insert(pc, v);
    }
}

/// A temporal value awaiting carry-over into its target variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TempVal {
    Word(U256),
    /// Pending write into a dynamic-layer cell; `None` clears it.
    OptWord(Option<U256>),
    World(World),
    /// Batch patch of the dynamic memory layer.
    DPatch(BTreeMap<U256, Option<U256>>),
}

/// Generic view of a variable's value, used by the perturbation tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Word(U256),
    MaybeWord(Option<U256>),
    Bytes(Vec<u8>),
    World(World),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CfgState {
    pub stack: BTreeMap<VarId, U256>,
    pub mem_s: BTreeMap<U256, U256>,
    /// Entries hold non-bottom dynamic values; an absent key is bottom.
    pub mem_d: BTreeMap<U256, U256>,
    pub stor_s: BTreeMap<U256, U256>,
    pub stor_d: BTreeMap<U256, U256>,
    pub gas: PcIndexed,
    pub msize: PcIndexed,
    pub local: LocalEnv,
    pub global: GlobalEnv,
    pub world: World,
    /// Temporal copies, keyed by their non-temporal target.
    pub temps: BTreeMap<Variable, TempVal>,
}

impl CfgState {
    pub fn var(&self, v: VarId) -> U256 {
        self.stack.get(&v).copied().unwrap_or(U256::ZERO)
    }

    pub fn set_var(&mut self, v: VarId, val: U256) {
        self.stack.insert(v, val);
    }

    /// Two-layered read: the dynamic layer wins unless it is bottom.
    pub fn load_mem(&self, addr: U256) -> U256 {
        match self.mem_d.get(&addr) {
            Some(v) => *v,
            None => self.mem_s.get(&addr).copied().unwrap_or(U256::ZERO),
        }
    }

    pub fn load_stor(&self, key: U256) -> U256 {
        match self.stor_d.get(&key) {
            Some(v) => *v,
            None => self.stor_s.get(&key).copied().unwrap_or(U256::ZERO),
        }
    }

    /// Generic read used by tests; family placeholders are not readable.
    pub fn get(&self, var: &Variable) -> Option<Value> {
        Some(match var {
            Variable::Stack(v) => Value::Word(self.var(*v)),
            Variable::MemS(Loc::Const(a)) => {
                Value::Word(self.mem_s.get(a).copied().unwrap_or(U256::ZERO))
            }
            Variable::MemD(Loc::Const(a)) => Value::MaybeWord(self.mem_d.get(a).copied()),
            Variable::StorS(Loc::Const(a)) => {
                Value::Word(self.stor_s.get(a).copied().unwrap_or(U256::ZERO))
            }
            Variable::StorD(Loc::Const(a)) => Value::MaybeWord(self.stor_d.get(a).copied()),
            Variable::Gas(pc) => Value::Word(self.gas.at(*pc)),
            Variable::Msize(pc) => Value::Word(self.msize.at(*pc)),
            Variable::Local(LocalVar::Actor) => Value::Word(self.local.actor),
            Variable::Local(LocalVar::Sender) => Value::Word(self.local.sender),
            Variable::Local(LocalVar::Value) => Value::Word(self.local.value),
            Variable::Local(LocalVar::Input) => Value::Bytes(self.local.input.clone()),
            Variable::Local(LocalVar::Code) => Value::Bytes(self.local.code.clone()),
            Variable::Global(g) => Value::Word(self.global.get(*g)),
            Variable::External(_) => Value::World(self.world.clone()),
            Variable::MemS(Loc::Top)
            | Variable::MemD(Loc::Top)
            | Variable::StorS(Loc::Top)
            | Variable::StorD(Loc::Top)
            | Variable::Temporal(_) => return None,
        })
    }

    /// Generic write used by tests; ignores family placeholders.
    pub fn set(&mut self, var: &Variable, value: Value) {
        match (var, value) {
            (Variable::Stack(v), Value::Word(w)) => self.set_var(*v, w),
            (Variable::MemS(Loc::Const(a)), Value::Word(w)) => {
                self.mem_s.insert(*a, w);
            }
            (Variable::MemD(Loc::Const(a)), Value::MaybeWord(w)) => {
                match w {
                    Some(w) => self.mem_d.insert(*a, w),
                    None => self.mem_d.remove(a),
                };
            }
            (Variable::StorS(Loc::Const(a)), Value::Word(w)) => {
                self.stor_s.insert(*a, w);
            }
            (Variable::StorD(Loc::Const(a)), Value::MaybeWord(w)) => {
                match w {
                    Some(w) => self.stor_d.insert(*a, w),
                    None => self.stor_d.remove(a),
                };
            }
            (Variable::Gas(pc), Value::Word(w)) => self.gas.set(*pc, w),
            (Variable::Msize(pc), Value::Word(w)) => self.msize.set(*pc, w),
            (Variable::Local(LocalVar::Actor), Value::Word(w)) => self.local.actor = w,
            (Variable::Local(LocalVar::Sender), Value::Word(w)) => self.local.sender = w,
            (Variable::Local(LocalVar::Value), Value::Word(w)) => self.local.value = w,
            (Variable::Local(LocalVar::Input), Value::Bytes(b)) => self.local.input = b,
            (Variable::Local(LocalVar::Code), Value::Bytes(b)) => self.local.code = b,
            (Variable::Global(g), Value::Word(w)) => self.global.set(*g, w),
            (Variable::External(_), Value::World(w)) => self.world = w,
            _ => {}
        }
    }

    /// Value of the call-argument operand: the preprocessed constant when
    /// available, otherwise the stack variable.
    pub fn addr(&self, a: super::effect::Addr) -> U256 {
        match a {
            super::effect::Addr::Known(v) => v,
            super::effect::Addr::Reg(x) => self.var(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_layer_read_prefers_dynamic() {
        let mut st = CfgState::default();
        let a = U256::from_u64(64);
        st.mem_s.insert(a, U256::from_u64(1));
        assert_eq!(st.load_mem(a), U256::from_u64(1));
        st.mem_d.insert(a, U256::from_u64(2));
        assert_eq!(st.load_mem(a), U256::from_u64(2));
        st.mem_d.remove(&a);
        assert_eq!(st.load_mem(a), U256::from_u64(1));
    }
}
