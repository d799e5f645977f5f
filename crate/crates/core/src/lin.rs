//! Formal linear combinations with rational coefficients.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::linalg::{format_rational, Rational};

/// A finite linear combination of basis symbols of type `T`.
/// Zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Lin<T: Ord>(pub BTreeMap<T, Rational>);

impl<T: Ord> Default for Lin<T> {
    fn default() -> Self {
        Lin(BTreeMap::new())
    }
}

impl<T: Ord> Lin<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(t: T, c: Rational) -> Self {
        let mut l = Self::new();
        l.add(t, c);
        l
    }

    pub fn add(&mut self, t: T, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.0.get_mut(&t) {
            Some(v) => {
                *v += c;
                if v.is_zero() {
                    self.0.remove(&t);
                }
            }
            None => {
                self.0.insert(t, c);
            }
        }
    }

    pub fn add_all(&mut self, other: Lin<T>) {
        for (t, c) in other.0 {
            self.add(t, c);
        }
    }

    pub fn scaled(mut self, s: &Rational) -> Self {
        if s.is_zero() {
            return Self::new();
        }
        for v in self.0.values_mut() {
            *v *= s;
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, &Rational)> {
        self.0.iter()
    }

    pub fn into_iter(self) -> impl Iterator<Item = (T, Rational)> {
        self.0.into_iter()
    }

    pub fn map<U: Ord>(self, f: impl Fn(T) -> U) -> Lin<U> {
        let mut out = Lin::new();
        for (t, c) in self.0 {
            out.add(f(t), c);
        }
        out
    }

    /// Sum of `f` over the terms, weighted by the coefficients.
    pub fn flat_map<U: Ord>(&self, mut f: impl FnMut(&T) -> Lin<U>) -> Lin<U> {
        let mut out = Lin::new();
        for (t, c) in &self.0 {
            out.add_all(f(t).scaled(c));
        }
        out
    }

    pub fn sub(&mut self, other: &Lin<T>)
    where
        T: Clone,
    {
        for (t, c) in &other.0 {
            self.add(t.clone(), -c.clone());
        }
    }

    pub fn format_with(&self, name: impl Fn(&T) -> String) -> String {
        if self.0.is_empty() {
            return "0".to_string();
        }
        let mut parts = Vec::new();
        for (t, c) in &self.0 {
            parts.push(format!("({})·{}", format_rational(c), name(t)));
        }
        parts.join(" + ")
    }
}

impl<T: Ord> FromIterator<(T, Rational)> for Lin<T> {
    fn from_iter<I: IntoIterator<Item = (T, Rational)>>(iter: I) -> Self {
        let mut l = Lin::new();
        for (t, c) in iter {
            l.add(t, c);
        }
        l
    }
}

/// FNV-1a hasher for the hot interning maps; the default hasher dominates
/// profiles on short keys like exponent vectors.
#[derive(Default)]
pub struct Fnv(u64);

impl std::hash::Hasher for Fnv {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        let mut h = if self.0 == 0 { 0xcbf2_9ce4_8422_2325 } else { self.0 };
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        self.0 = h;
    }
}

pub type FnvMap<K, V> = std::collections::HashMap<K, V, std::hash::BuildHasherDefault<Fnv>>;
