use std::fmt;

/// Three-valued truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kleene {
    True,
    False,
    Unknown,
}

impl Kleene {
    pub fn and(self, other: Kleene) -> Kleene {
        kleene_and(self, other)
    }

    pub fn or(self, other: Kleene) -> Kleene {
        kleene_or(self, other)
    }

    pub fn from_bool(b: bool) -> Kleene {
        if b {
            Kleene::True
        } else {
            Kleene::False
        }
    }

    /// Kleene conjunction of an iterator; `True` when empty. Stops at the
    /// first `False`.
    pub fn all(items: impl IntoIterator<Item = Kleene>) -> Kleene {
        let mut acc = Kleene::True;
        for k in items {
            acc = acc.and(k);
            if acc == Kleene::False {
                break;
            }
        }
        acc
    }
}

pub fn kleene_and(a: Kleene, b: Kleene) -> Kleene {
    match (a, b) {
        (Kleene::False, _) | (_, Kleene::False) => Kleene::False,
        (Kleene::True, Kleene::True) => Kleene::True,
        _ => Kleene::Unknown,
    }
}

pub fn kleene_or(a: Kleene, b: Kleene) -> Kleene {
    !kleene_and(!a, !b)
}

impl std::ops::Not for Kleene {
    type Output = Kleene;

    fn not(self) -> Kleene {
        match self {
            Kleene::True => Kleene::False,
            Kleene::False => Kleene::True,
            Kleene::Unknown => Kleene::Unknown,
        }
    }
}

impl fmt::Display for Kleene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kleene::True => "true",
            Kleene::False => "false",
            Kleene::Unknown => "unknown",
        })
    }
}
