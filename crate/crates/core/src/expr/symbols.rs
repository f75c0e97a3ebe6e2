use thiserror::Error;

use super::Symbol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Coordinate,
    Momentum,
    Parameter,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymbolTableError {
    #[error("symbol `{0}` declared twice")]
    Duplicate(String),
    #[error("{coordinates} coordinates but {momenta} momenta")]
    Unbalanced { coordinates: usize, momenta: usize },
    #[error("`{0}` is not a valid identifier")]
    BadName(String),
}

/// Ordered, role-tagged list of the names an expression may mention.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolTable {
    entries: Vec<(Symbol, Role)>,
}

fn valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, name: &str, role: Role) -> Result<Symbol, SymbolTableError> {
        if !valid_identifier(name) {
            return Err(SymbolTableError::BadName(name.to_string()));
        }
        if self.get(name).is_some() {
            return Err(SymbolTableError::Duplicate(name.to_string()));
        }
        let s = Symbol::new(name);
        self.entries.push((s.clone(), role));
        Ok(s)
    }

    /// Builder form of [`SymbolTable::declare`]; panics on a duplicate or invalid name.
    pub fn with(mut self, name: &str, role: Role) -> Self {
        self.declare(name, role).expect("valid symbol declaration");
        self
    }

    pub fn get(&self, name: &str) -> Option<&Symbol> {
        self.entries.iter().find(|(s, _)| s.as_str() == name).map(|(s, _)| s)
    }

    pub fn role(&self, name: &str) -> Option<Role> {
        self.entries.iter().find(|(s, _)| s.as_str() == name).map(|(_, r)| *r)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, Role)> {
        self.entries.iter().map(|(s, r)| (s, *r))
    }

    pub fn with_role(&self, role: Role) -> Vec<Symbol> {
        self.entries
            .iter()
            .filter(|(_, r)| *r == role)
            .map(|(s, _)| s.clone())
            .collect()
    }

    pub fn coordinates(&self) -> Vec<Symbol> {
        self.with_role(Role::Coordinate)
    }

    pub fn momenta(&self) -> Vec<Symbol> {
        self.with_role(Role::Momentum)
    }

    pub fn parameters(&self) -> Vec<Symbol> {
        self.with_role(Role::Parameter)
    }

    /// Checks that coordinates and momenta come in equal numbers.
    pub fn check_balanced(&self) -> Result<(), SymbolTableError> {
        let (c, m) = (self.coordinates().len(), self.momenta().len());
        if c == m {
            Ok(())
        } else {
            Err(SymbolTableError::Unbalanced { coordinates: c, momenta: m })
        }
    }

    /// Union of two tables; entries already present in `self` are kept.
    pub fn merged(&self, other: &SymbolTable) -> SymbolTable {
        let mut out = self.clone();
        for (s, r) in &other.entries {
            if !out.contains(s.as_str()) {
                out.entries.push((s.clone(), *r));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_and_balance() {
        let mut t = SymbolTable::new();
        t.declare("x", Role::Coordinate).unwrap();
        assert_eq!(t.declare("x", Role::Momentum), Err(SymbolTableError::Duplicate("x".into())));
        assert!(t.check_balanced().is_err());
        t.declare("p_x", Role::Momentum).unwrap();
        t.declare("a1", Role::Parameter).unwrap();
        assert!(t.check_balanced().is_ok());
        assert_eq!(t.role("a1"), Some(Role::Parameter));
        assert!(t.declare("2x", Role::Parameter).is_err());
    }
}
