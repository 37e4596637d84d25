use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Bool,
    BitVec(u32),
    Array(Box<Sort>, Box<Sort>),
    Fun(Vec<Sort>, Box<Sort>),
}

impl Sort {
    pub fn array(index: Sort, element: Sort) -> Sort {
        Sort::Array(Box::new(index), Box::new(element))
    }

    pub fn is_bool(&self) -> bool {
        matches!(self, Sort::Bool)
    }

    pub fn is_bv(&self) -> bool {
        matches!(self, Sort::BitVec(_))
    }

    pub fn is_array(&self) -> bool {
        matches!(self, Sort::Array(..))
    }

    /// Bool and bit-vector sorts: the sorts whose terms carry tracked bits.
    pub fn is_scalar(&self) -> bool {
        matches!(self, Sort::Bool | Sort::BitVec(_))
    }

    /// Number of bits for scalar sorts (Bool counts as one).
    pub fn bit_width(&self) -> Option<u32> {
        match self {
            Sort::Bool => Some(1),
            Sort::BitVec(w) => Some(*w),
            _ => None,
        }
    }

    pub fn bv_width(&self) -> Option<u32> {
        match self {
            Sort::BitVec(w) => Some(*w),
            _ => None,
        }
    }

    pub fn array_parts(&self) -> Option<(&Sort, &Sort)> {
        match self {
            Sort::Array(i, e) => Some((i, e)),
            _ => None,
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Bool => write!(f, "Bool"),
            Sort::BitVec(w) => write!(f, "(_ BitVec {w})"),
            Sort::Array(i, e) => write!(f, "(Array {i} {e})"),
            Sort::Fun(args, ret) => {
                write!(f, "(")?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ") {ret}")
            }
        }
    }
}
