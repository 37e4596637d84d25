use std::collections::BTreeMap;
use std::fmt;

use crate::bv::Bv;
use crate::smtlib::{Formula, Sort, SymbolId};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Bool(bool),
    Bv(Bv),
    Array(ArrayValue),
    Fun(FunValue),
}

/// An array as a default element plus explicit overrides.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArrayValue {
    pub index_sort: Sort,
    pub default: Box<Value>,
    pub overrides: BTreeMap<Value, Value>,
}

/// A function table with a default result for unlisted argument tuples.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FunValue {
    pub default: Box<Value>,
    pub table: BTreeMap<Vec<Value>, Value>,
}

/// Number of values of a scalar sort, saturating at `u128::MAX`.
pub fn domain_size(sort: &Sort) -> u128 {
    match sort {
        Sort::Bool => 2,
        Sort::BitVec(w) if *w < 128 => 1u128 << w,
        _ => u128::MAX,
    }
}

impl Value {
    /// All-zero value of a sort: `false`, `0`, the constant-zero array or function.
    pub fn zero(sort: &Sort) -> Value {
        match sort {
            Sort::Bool => Value::Bool(false),
            Sort::BitVec(w) => Value::Bv(Bv::zero(*w)),
            Sort::Array(i, e) => Value::Array(ArrayValue {
                index_sort: (**i).clone(),
                default: Box::new(Value::zero(e)),
                overrides: BTreeMap::new(),
            }),
            Sort::Fun(_, r) => Value::Fun(FunValue {
                default: Box::new(Value::zero(r)),
                table: BTreeMap::new(),
            }),
        }
    }

    /// Builds a Bool or bit-vector value from bits, least significant first.
    pub fn from_bits(sort: &Sort, bits: &[bool]) -> Value {
        match sort {
            Sort::Bool => Value::Bool(bits[0]),
            Sort::BitVec(_) => Value::Bv(Bv::from_bits(bits)),
            _ => panic!("from_bits on non-scalar sort {sort}"),
        }
    }

    pub fn as_bool(&self) -> bool {
        match self {
            Value::Bool(b) => *b,
            other => panic!("expected Bool, got {other}"),
        }
    }

    pub fn as_bv(&self) -> &Bv {
        match self {
            Value::Bv(b) => b,
            other => panic!("expected bit-vector, got {other}"),
        }
    }

    pub fn as_array(&self) -> &ArrayValue {
        match self {
            Value::Array(a) => a,
            other => panic!("expected array, got {other}"),
        }
    }

    /// Bit `i` of a scalar value; Bool values have a single bit.
    pub fn bit(&self, i: u32) -> bool {
        match self {
            Value::Bool(b) => {
                debug_assert_eq!(i, 0);
                *b
            }
            Value::Bv(v) => v.bit(i),
            other => panic!("bit of non-scalar value {other}"),
        }
    }

    pub fn width(&self) -> Option<u32> {
        match self {
            Value::Bool(_) => Some(1),
            Value::Bv(v) => Some(v.width()),
            _ => None,
        }
    }

    /// Semantic equality: arrays compare pointwise over their index domain.
    pub fn semantic_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Array(a), Value::Array(b)) => a.semantic_eq(b),
            _ => self == other,
        }
    }
}

impl ArrayValue {
    pub fn get(&self, index: &Value) -> &Value {
        self.overrides.get(index).unwrap_or(&self.default)
    }

    pub fn store(&self, index: Value, value: Value) -> ArrayValue {
        let mut r = self.clone();
        if value == *r.default {
            r.overrides.remove(&index);
        } else {
            r.overrides.insert(index, value);
        }
        r
    }

    pub fn semantic_eq(&self, other: &ArrayValue) -> bool {
        let mut keys: Vec<&Value> = self.overrides.keys().collect();
        keys.extend(
            other
                .overrides
                .keys()
                .filter(|k| !self.overrides.contains_key(*k)),
        );
        if keys.iter().any(|k| self.get(k) != other.get(k)) {
            return false;
        }
        // Indices outside every override read the defaults.
        (keys.len() as u128) >= domain_size(&self.index_sort) || self.default == other.default
    }
}

impl FunValue {
    pub fn apply(&self, args: &[Value]) -> &Value {
        self.table.get(args).unwrap_or(&self.default)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Bv(v) => write!(f, "{v}"),
            Value::Array(a) => {
                for _ in &a.overrides {
                    write!(f, "(store ")?;
                }
                write!(
                    f,
                    "((as const (Array {} {})) {})",
                    a.index_sort,
                    value_sort(&a.default),
                    a.default
                )?;
                for (k, v) in &a.overrides {
                    write!(f, " {k} {v})")?;
                }
                Ok(())
            }
            Value::Fun(fv) => {
                write!(f, "(lambda-table")?;
                for (k, v) in &fv.table {
                    write!(f, " (")?;
                    for (i, a) in k.iter().enumerate() {
                        if i > 0 {
                            write!(f, " ")?;
                        }
                        write!(f, "{a}")?;
                    }
                    write!(f, " -> {v})")?;
                }
                write!(f, " (else {}))", fv.default)
            }
        }
    }
}

/// Sort of a scalar value.
pub fn value_sort(v: &Value) -> Sort {
    match v {
        Value::Bool(_) => Sort::Bool,
        Value::Bv(b) => Sort::BitVec(b.width()),
        Value::Array(a) => Sort::array(a.index_sort.clone(), value_sort(&a.default)),
        Value::Fun(_) => panic!("function values have no term sort"),
    }
}

/// A map from symbols to values, indexed by symbol id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Assignment {
    values: Vec<Option<Value>>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every symbol of `f` bound to its zero value.
    pub fn zeros(f: &Formula) -> Self {
        let mut a = Assignment::new();
        for s in f.symbol_ids() {
            a.set(s, Value::zero(&f.symbol(s).sort));
        }
        a
    }

    pub fn get(&self, s: SymbolId) -> Option<&Value> {
        self.values.get(s.index()).and_then(Option::as_ref)
    }

    pub fn set(&mut self, s: SymbolId, v: Value) {
        if self.values.len() <= s.index() {
            self.values.resize(s.index() + 1, None);
        }
        self.values[s.index()] = Some(v);
    }

    pub fn iter(&self) -> impl Iterator<Item = (SymbolId, &Value)> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.as_ref().map(|v| (SymbolId(i as u32), v)))
    }

    /// True when every symbol of `f` is bound to a value of its sort.
    pub fn is_total_for(&self, f: &Formula) -> bool {
        f.symbol_ids()
            .all(|s| match (self.get(s), &f.symbol(s).sort) {
                (Some(Value::Bool(_)), Sort::Bool) => true,
                (Some(Value::Bv(b)), Sort::BitVec(w)) => b.width() == *w,
                (Some(Value::Array(_)), Sort::Array(..)) => true,
                (Some(Value::Fun(_)), Sort::Fun(..)) => true,
                _ => false,
            })
    }

    /// Values of the tracked variable bits of `f`, in `var_bits` order.
    pub fn tracked_bits(&self, f: &Formula) -> Vec<bool> {
        f.var_bits()
            .iter()
            .map(|tb| self.get(tb.symbol).map(|v| v.bit(tb.bit)).unwrap_or(false))
            .collect()
    }

    /// Restriction to the given symbols.
    pub fn restrict(&self, symbols: impl IntoIterator<Item = SymbolId>) -> Assignment {
        let mut a = Assignment::new();
        for s in symbols {
            if let Some(v) = self.get(s) {
                a.set(s, v.clone());
            }
        }
        a
    }
}
