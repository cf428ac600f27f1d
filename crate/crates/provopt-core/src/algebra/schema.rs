use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::AlgebraError;

/// Ordered list of attribute names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Schema(Vec<String>);

impl Schema {
    pub fn new(names: Vec<String>) -> Result<Self, AlgebraError> {
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(AlgebraError::DuplicateAttribute(n.clone()));
            }
        }
        Ok(Schema(names))
    }

    pub fn from_names<I, S>(names: I) -> Result<Self, AlgebraError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(names.into_iter().map(Into::into).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn iter(&self) -> core::slice::Iter<'_, String> {
        self.0.iter()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.iter().any(|n| n == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|n| n == name)
    }

    pub fn resolve(&self, name: &str) -> Result<usize, AlgebraError> {
        self.index_of(name)
            .ok_or_else(|| AlgebraError::UnresolvedAttribute(name.into()))
    }

    /// Concatenation, failing on a name clash.
    pub fn concat(&self, other: &Schema) -> Result<Schema, AlgebraError> {
        let mut names = self.0.clone();
        names.extend(other.0.iter().cloned());
        Schema::new(names)
    }

    pub fn into_names(self) -> Vec<String> {
        self.0
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(n)?;
        }
        f.write_str(")")
    }
}

impl<'a> IntoIterator for &'a Schema {
    type Item = &'a String;
    type IntoIter = core::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}
