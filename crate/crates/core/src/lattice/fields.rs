use std::ops::{Deref, DerefMut};

macro_rules! field_type {
    ($(#[$meta:meta])* $name:ident, $elem:ty) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct $name(Vec<$elem>);

        impl $name {
            pub fn zeros(len: usize) -> Self {
                Self(vec![<$elem>::default(); len])
            }

            pub fn from_vec(values: Vec<$elem>) -> Self {
                Self(values)
            }

            pub fn into_vec(self) -> Vec<$elem> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = [$elem];
            fn deref(&self) -> &[$elem] {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut [$elem] {
                &mut self.0
            }
        }

        impl From<Vec<$elem>> for $name {
            fn from(values: Vec<$elem>) -> Self {
                Self(values)
            }
        }
    };
}

field_type!(
    /// Real values indexed by vertex.
    VertexField,
    f64
);
field_type!(
    /// Real values on oriented edges; the reverse direction carries the negated value.
    EdgeField,
    f64
);
field_type!(
    /// Integer heights indexed by vertex.
    IntegerField,
    i64
);

impl EdgeField {
    /// Value on the directed edge `tail → head` of the oriented edge `e`,
    /// or its negation when traversed backwards.
    pub fn directed(&self, e: usize, forward: bool) -> f64 {
        if forward {
            self.0[e]
        } else {
            -self.0[e]
        }
    }
}

impl IntegerField {
    pub fn to_real(&self) -> VertexField {
        VertexField(self.0.iter().map(|&m| m as f64).collect())
    }
}

/// `⟨a, b⟩ = Σ a_i b_i`.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
