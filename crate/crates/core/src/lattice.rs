//! Lattice geometry and the composite configuration label of robot plus
//! environment.
//!
//! A [`Configuration`] fixes every degree of freedom in the computational
//! basis: the on-board head (`p`, `k`), the on-board qubits `t`, the memory
//! and output registers, the control qubit, the robot position `j` and the
//! environment qubits `s`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on either lattice length; bit strings are packed into a `u64`.
pub const MAX_SITES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Cyclic,
    Bounded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry", into = "RawGeometry")]
pub struct LatticeGeometry {
    env_size: usize,
    env_boundary: Boundary,
    onboard_size: usize,
    head_states: usize,
    register_dim: usize,
}

#[derive(Serialize, Deserialize)]
struct RawGeometry {
    env_size: usize,
    #[serde(default)]
    env_boundary: Boundary,
    onboard_size: usize,
    head_states: usize,
    register_dim: usize,
}

impl TryFrom<RawGeometry> for LatticeGeometry {
    type Error = Error;

    fn try_from(raw: RawGeometry) -> Result<Self> {
        LatticeGeometry::new(
            raw.env_size,
            raw.env_boundary,
            raw.onboard_size,
            raw.head_states,
            raw.register_dim,
        )
    }
}

impl From<LatticeGeometry> for RawGeometry {
    fn from(g: LatticeGeometry) -> Self {
        RawGeometry {
            env_size: g.env_size,
            env_boundary: g.env_boundary,
            onboard_size: g.onboard_size,
            head_states: g.head_states,
            register_dim: g.register_dim,
        }
    }
}

impl LatticeGeometry {
    pub fn new(
        env_size: usize,
        env_boundary: Boundary,
        onboard_size: usize,
        head_states: usize,
        register_dim: usize,
    ) -> Result<Self> {
        for (name, value) in [
            ("env_size", env_size),
            ("onboard_size", onboard_size),
            ("head_states", head_states),
            ("register_dim", register_dim),
        ] {
            if value == 0 {
                return Err(Error::Geometry(format!("{name} must be at least 1")));
            }
        }
        if env_size > MAX_SITES || onboard_size > MAX_SITES {
            return Err(Error::Geometry(format!(
                "lattices are limited to {MAX_SITES} sites"
            )));
        }
        Ok(Self {
            env_size,
            env_boundary,
            onboard_size,
            head_states,
            register_dim,
        })
    }

    /// Cyclic environment of `env_size` sites with the given on-board sizes.
    pub fn cyclic(
        env_size: usize,
        onboard_size: usize,
        head_states: usize,
        register_dim: usize,
    ) -> Result<Self> {
        Self::new(
            env_size,
            Boundary::Cyclic,
            onboard_size,
            head_states,
            register_dim,
        )
    }

    pub fn env_size(&self) -> usize {
        self.env_size
    }

    pub fn env_boundary(&self) -> Boundary {
        self.env_boundary
    }

    pub fn onboard_size(&self) -> usize {
        self.onboard_size
    }

    pub fn head_states(&self) -> usize {
        self.head_states
    }

    pub fn register_dim(&self) -> usize {
        self.register_dim
    }

    pub fn with_env_size(self, env_size: usize) -> Result<Self> {
        Self::new(
            env_size,
            self.env_boundary,
            self.onboard_size,
            self.head_states,
            self.register_dim,
        )
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.env_boundary = boundary;
        self
    }

    /// Robot position after a displacement, `None` when a bounded lattice is
    /// left.
    pub fn shift_env(&self, j: usize, dj: i8) -> Option<usize> {
        shift_site(j, dj, self.env_size, self.env_boundary)
    }

    /// On-board head position after a displacement; the on-board track is
    /// always closed.
    pub fn shift_onboard(&self, k: usize, dk: i8) -> usize {
        shift_site(k, dk, self.onboard_size, Boundary::Cyclic).expect("cyclic shift")
    }

    /// Hop distance between two robot positions (wrap-around counts on a ring).
    pub fn env_distance(&self, a: usize, b: usize) -> usize {
        site_distance(a, b, self.env_size, self.env_boundary)
    }

    pub fn onboard_distance(&self, a: usize, b: usize) -> usize {
        site_distance(a, b, self.onboard_size, Boundary::Cyclic)
    }
}

fn shift_site(x: usize, d: i8, size: usize, boundary: Boundary) -> Option<usize> {
    let target = x as i64 + d as i64;
    match boundary {
        Boundary::Cyclic => Some(target.rem_euclid(size as i64) as usize),
        Boundary::Bounded => (0..size as i64)
            .contains(&target)
            .then_some(target as usize),
    }
}

fn site_distance(a: usize, b: usize, size: usize, boundary: Boundary) -> usize {
    let d = a.abs_diff(b);
    match boundary {
        Boundary::Cyclic => d.min(size - d),
        Boundary::Bounded => d,
    }
}

/// Fixed-length string of qubit values, site 0 leftmost.
///
/// Site `q` lives at bit `len - 1 - q` so that the derived ordering of equal
/// length strings is the lexicographic order of their text form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BitString {
    len: u8,
    bits: u64,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        assert!(len <= MAX_SITES, "bit string longer than {MAX_SITES}");
        Self {
            len: len as u8,
            bits: 0,
        }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut out = Self::zeros(bits.len());
        for (q, &b) in bits.iter().enumerate() {
            out = out.with(q, b);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn mask(&self, q: usize) -> u64 {
        debug_assert!(q < self.len());
        1u64 << (self.len() - 1 - q)
    }

    pub fn get(&self, q: usize) -> u8 {
        u8::from(self.bits & self.mask(q) != 0)
    }

    pub fn with(mut self, q: usize, value: u8) -> Self {
        let m = self.mask(q);
        if value & 1 == 1 {
            self.bits |= m;
        } else {
            self.bits &= !m;
        }
        self
    }

    pub fn count_ones(&self) -> u32 {
        self.bits.count_ones()
    }

    /// Positions where `self` and `other` differ.
    pub fn diff_sites(&self, other: &BitString) -> Vec<usize> {
        (0..self.len())
            .filter(|&q| self.get(q) != other.get(q))
            .collect()
    }

    /// Lattice translation by `by` sites to the right on a ring.
    pub fn rotate_right(&self, by: usize) -> Self {
        let n = self.len();
        let mut out = Self::zeros(n);
        for q in 0..n {
            out = out.with((q + by) % n, self.get(q));
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len()).map(|q| self.get(q))
    }

    /// All strings of length `len`, in lexicographic order.
    pub fn all(len: usize) -> impl Iterator<Item = BitString> {
        assert!(len < MAX_SITES);
        (0..(1u64 << len)).map(move |bits| BitString {
            len: len as u8,
            bits,
        })
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        if text.len() > MAX_SITES {
            return Err(Error::Configuration(format!(
                "bit string {text:?} longer than {MAX_SITES}"
            )));
        }
        let bits = text
            .chars()
            .map(|ch| match ch {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Configuration(format!(
                    "bit string {text:?} contains {other:?}"
                ))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(BitString::from_bits(&bits))
    }
}

impl Serialize for BitString {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// One computational-basis label of robot plus environment.
///
/// Field order is the basis order: `(p, k, t, l1, l2, c, j, s)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration {
    pub(crate) p: usize,
    pub(crate) k: usize,
    pub(crate) t: BitString,
    pub(crate) l1: usize,
    pub(crate) l2: usize,
    pub(crate) c: u8,
    pub(crate) j: usize,
    pub(crate) s: BitString,
}

impl Configuration {
    /// Validated constructor over `geometry`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        geometry: &LatticeGeometry,
        p: usize,
        k: usize,
        t: &str,
        l1: usize,
        l2: usize,
        c: u8,
        j: usize,
        s: &str,
    ) -> Result<Self> {
        let cfg = Self {
            p,
            k,
            t: t.parse()?,
            l1,
            l2,
            c,
            j,
            s: s.parse()?,
        };
        cfg.validate(geometry)?;
        Ok(cfg)
    }

    /// Frame state `p=0 k=0 t=0…0` with the given registers, robot position
    /// and environment.
    pub fn start(
        geometry: &LatticeGeometry,
        output: usize,
        j: usize,
        env: BitString,
    ) -> Result<Self> {
        let cfg = Self {
            p: 0,
            k: 0,
            t: BitString::zeros(geometry.onboard_size()),
            l1: 0,
            l2: output,
            c: 0,
            j,
            s: env,
        };
        cfg.validate(geometry)?;
        Ok(cfg)
    }

    pub fn parse(geometry: &LatticeGeometry, text: &str) -> Result<Self> {
        let cfg: Configuration = text.parse()?;
        cfg.validate(geometry)?;
        Ok(cfg)
    }

    pub fn validate(&self, g: &LatticeGeometry) -> Result<()> {
        let range = |name: &str, value: usize, bound: usize| {
            if value >= bound {
                Err(Error::Configuration(format!(
                    "{name}={value} out of range [0, {bound})"
                )))
            } else {
                Ok(())
            }
        };
        range("p", self.p, g.head_states())?;
        range("k", self.k, g.onboard_size())?;
        range("l1", self.l1, g.register_dim())?;
        range("l2", self.l2, g.register_dim())?;
        range("c", self.c as usize, 2)?;
        range("j", self.j, g.env_size())?;
        if self.t.len() != g.onboard_size() {
            return Err(Error::Configuration(format!(
                "t has length {}, expected {}",
                self.t.len(),
                g.onboard_size()
            )));
        }
        if self.s.len() != g.env_size() {
            return Err(Error::Configuration(format!(
                "s has length {}, expected {}",
                self.s.len(),
                g.env_size()
            )));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.p
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn t(&self) -> BitString {
        self.t
    }
    pub fn memory(&self) -> usize {
        self.l1
    }
    pub fn output(&self) -> usize {
        self.l2
    }
    pub fn control(&self) -> u8 {
        self.c
    }
    pub fn j(&self) -> usize {
        self.j
    }
    pub fn s(&self) -> BitString {
        self.s
    }

    /// Environment qubit under the robot.
    pub fn local_env(&self) -> u8 {
        self.s.get(self.j)
    }

    /// On-board qubit under the on-board head.
    pub fn local_onboard(&self) -> u8 {
        self.t.get(self.k)
    }

    /// Same configuration with a different environment string; the length is
    /// not checked here.
    pub fn with_env(mut self, s: BitString) -> Self {
        self.s = s;
        self
    }

    pub fn with_position(mut self, j: usize) -> Self {
        self.j = j;
        self
    }

    pub fn with_registers(mut self, memory: usize, output: usize) -> Self {
        self.l1 = memory;
        self.l2 = output;
        self
    }

    pub fn with_control(mut self, c: u8) -> Self {
        self.c = c;
        self
    }

    pub fn with_head(mut self, p: usize, k: usize, t: BitString) -> Self {
        self.p = p;
        self.k = k;
        self.t = t;
        self
    }

    /// Environment translation: robot and environment pattern move `by`
    /// sites to the right (ring only).
    pub fn translate_env(&self, g: &LatticeGeometry, by: usize) -> Self {
        let mut out = *self;
        out.j = (self.j + by) % g.env_size();
        out.s = self.s.rotate_right(by);
        out
    }

    /// On-board translation of head and track.
    pub fn translate_onboard(&self, g: &LatticeGeometry, by: usize) -> Self {
        let mut out = *self;
        out.k = (self.k + by) % g.onboard_size();
        out.t = self.t.rotate_right(by);
        out
    }

    /// Whether the on-board machine sits in its rest frame `p=0, k=0, t=0…0`.
    pub fn onboard_at_rest(&self) -> bool {
        self.p == 0 && self.k == 0 && self.t.count_ones() == 0
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "p={} k={} t={} l1={} l2={} c={} j={} s={}",
            self.p, self.k, self.t, self.l1, self.l2, self.c, self.j, self.s
        )
    }
}

impl FromStr for Configuration {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let fail = |reason: String| Error::ConfigurationParse {
            text: text.to_string(),
            reason,
        };
        const KEYS: [&str; 8] = ["p", "k", "t", "l1", "l2", "c", "j", "s"];
        let fields: Vec<&str> = text.split(' ').collect();
        if fields.len() != KEYS.len() {
            return Err(fail(format!(
                "expected {} space-separated fields, found {}",
                KEYS.len(),
                fields.len()
            )));
        }
        let mut values = [""; 8];
        for (slot, (field, key)) in fields.iter().zip(KEYS).enumerate() {
            let (name, value) = field
                .split_once('=')
                .ok_or_else(|| fail(format!("field {field:?} has no '='")))?;
            if name != key {
                return Err(fail(format!("expected key {key:?}, found {name:?}")));
            }
            values[slot] = value;
        }
        let int = |slot: usize| -> Result<usize> {
            values[slot]
                .parse::<usize>()
                .map_err(|e| fail(format!("{}: {e}", KEYS[slot])))
        };
        let bits = |slot: usize| -> Result<BitString> {
            values[slot]
                .parse::<BitString>()
                .map_err(|e| fail(format!("{}: {e}", KEYS[slot])))
        };
        let c = int(5)?;
        if c > 1 {
            return Err(fail(format!("control must be 0 or 1, found {c}")));
        }
        Ok(Configuration {
            p: int(0)?,
            k: int(1)?,
            t: bits(2)?,
            l1: int(3)?,
            l2: int(4)?,
            c: c as u8,
            j: int(6)?,
            s: bits(7)?,
        })
    }
}

impl Serialize for Configuration {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Configuration {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> LatticeGeometry {
        LatticeGeometry::cyclic(4, 2, 2, 2).unwrap()
    }

    #[test]
    fn all_zero_configuration_is_valid() {
        let c = Configuration::new(&geom(), 0, 0, "00", 0, 0, 0, 0, "0000").unwrap();
        assert_eq!(c.to_string(), "p=0 k=0 t=00 l1=0 l2=0 c=0 j=0 s=0000");
    }

    #[test]
    fn out_of_range_position_is_rejected() {
        let err = Configuration::new(&geom(), 0, 0, "00", 0, 0, 0, 4, "0000").unwrap_err();
        assert!(err.to_string().contains("j=4"), "{err}");
    }

    #[test]
    fn wrong_env_length_is_rejected() {
        let err = Configuration::new(&geom(), 0, 0, "00", 0, 0, 0, 0, "000").unwrap_err();
        assert!(err.to_string().contains("length 3"), "{err}");
    }

    #[test]
    fn zero_sized_geometry_is_rejected() {
        assert!(LatticeGeometry::cyclic(0, 1, 1, 1).is_err());
        assert!(LatticeGeometry::cyclic(1, 1, 1, 0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let text = "p=1 k=1 t=10 l1=1 l2=0 c=1 j=3 s=0110";
        let c = Configuration::parse(&geom(), text).unwrap();
        assert_eq!(c.to_string(), text);
        assert!("p=1 k=1".parse::<Configuration>().is_err());
        assert!("p=1 k=1 t=10 l1=1 l2=0 c=2 j=3 s=0110"
            .parse::<Configuration>()
            .is_err());
    }

    #[test]
    fn bit_order_is_lexicographic() {
        let a: BitString = "0111".parse().unwrap();
        let b: BitString = "1000".parse().unwrap();
        assert!(a < b);
        assert_eq!(a.get(0), 0);
        assert_eq!(b.get(0), 1);
        assert_eq!(b.rotate_right(1).to_string(), "0100");
        assert_eq!(
            "1001"
                .parse::<BitString>()
                .unwrap()
                .rotate_right(1)
                .to_string(),
            "1100"
        );
    }

    #[test]
    fn shifts_respect_boundary() {
        let g = geom();
        assert_eq!(g.shift_env(3, 1), Some(0));
        assert_eq!(g.with_boundary(Boundary::Bounded).shift_env(3, 1), None);
        assert_eq!(g.env_distance(0, 3), 1);
        assert_eq!(g.with_boundary(Boundary::Bounded).env_distance(0, 3), 3);
    }
}
