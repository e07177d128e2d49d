//! Core domain types shared by every stage of the pipeline: IPv4 addresses and
//! prefixes, AS numbers, ISO-3166 country codes, and the three path kinds
//! (IP-level traceroutes, AS-level paths, country-level paths).
//!
//! Everything here is an immutable value type and freely shareable across
//! threads. All address handling is IPv4 only.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use std::net::Ipv4Addr;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("malformed IPv4 address `{0}`")]
    BadAddr(String),
    #[error("malformed prefix `{0}`: expected a.b.c.d/len")]
    BadPrefix(String),
    #[error("prefix length {0} out of range 0..=32")]
    BadPrefixLen(u8),
    #[error("malformed AS number `{0}`")]
    BadAsn(String),
    #[error("AS number must be nonzero")]
    ZeroAsn,
    #[error("malformed country code `{0}`: expected two ASCII letters")]
    BadCountry(String),
}

/// An IPv4 prefix `base/len` with host bits cleared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Prefix {
    base: u32,
    len: u8,
}

impl Prefix {
    /// Builds a canonical prefix, clearing any host bits below `len`.
    pub fn new(base: Ipv4Addr, len: u8) -> Result<Self, ParseError> {
        if len > 32 {
            return Err(ParseError::BadPrefixLen(len));
        }
        let raw = u32::from(base);
        let masked = if len == 0 { 0 } else { raw & (u32::MAX << (32 - len)) };
        Ok(Prefix { base: masked, len })
    }

    pub fn base(&self) -> Ipv4Addr {
        Ipv4Addr::from(self.base)
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    /// Number of addresses covered: `2^(32-len)`. Always positive.
    pub fn size(&self) -> u64 {
        1u64 << (32 - self.len)
    }

    /// True if `ip` falls inside this prefix.
    pub fn contains(&self, ip: Ipv4Addr) -> bool {
        let raw = u32::from(ip);
        if self.len == 0 {
            return true;
        }
        (raw & (u32::MAX << (32 - self.len))) == self.base
    }

    /// The `i`-th bit of the base address, counting from the most significant.
    /// Used by longest-prefix-match tries.
    pub fn bit(&self, i: u8) -> bool {
        debug_assert!(i < 32);
        self.base & (1 << (31 - i)) != 0
    }
}

impl FromStr for Prefix {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let (addr, len) = s
            .split_once('/')
            .ok_or_else(|| ParseError::BadPrefix(s.to_string()))?;
        let base: Ipv4Addr = addr
            .parse()
            .map_err(|_| ParseError::BadAddr(addr.to_string()))?;
        let len: u8 = len
            .parse()
            .map_err(|_| ParseError::BadPrefix(s.to_string()))?;
        Prefix::new(base, len)
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.base(), self.len)
    }
}

/// Parses `a.b.c.d/len`, canonicalizing host bits to zero.
pub fn parse_prefix(text: &str) -> Result<Prefix, ParseError> {
    text.parse()
}

/// An Autonomous System number. Always nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Asn(u32);

impl Asn {
    pub fn new(value: u32) -> Result<Self, ParseError> {
        if value == 0 {
            return Err(ParseError::ZeroAsn);
        }
        Ok(Asn(value))
    }

    pub fn value(&self) -> u32 {
        self.0
    }
}

impl FromStr for Asn {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let v: u32 = s.parse().map_err(|_| ParseError::BadAsn(s.to_string()))?;
        Asn::new(v)
    }
}

impl fmt::Display for Asn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A two-letter ISO 3166 country code, stored uppercase.
///
/// The registry feeds also contain the vague regional codes `EU` and `AP`
/// plus `HK`; those survive parsing but are normalized away by the geo
/// database before any other module sees them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CountryCode([u8; 2]);

impl CountryCode {
    pub const CHINA: CountryCode = CountryCode(*b"CN");
    pub const HONG_KONG: CountryCode = CountryCode(*b"HK");

    pub fn new(code: &str) -> Result<Self, ParseError> {
        let bytes = code.as_bytes();
        if bytes.len() != 2 || !bytes.iter().all(|b| b.is_ascii_alphabetic()) {
            return Err(ParseError::BadCountry(code.to_string()));
        }
        Ok(CountryCode([
            bytes[0].to_ascii_uppercase(),
            bytes[1].to_ascii_uppercase(),
        ]))
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).expect("country codes are ASCII")
    }

    /// True for the regional codes (`EU`, `AP`) that name a region rather
    /// than a country and must fall back to a per-IP lookup.
    pub fn is_vague(&self) -> bool {
        self.0 == *b"EU" || self.0 == *b"AP"
    }
}

impl FromStr for CountryCode {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        CountryCode::new(s)
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An AS-level path in RIB convention: first element is the AS nearest the
/// observation point, last element is the origin AS of the prefix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AsPath(Vec<Asn>);

impl AsPath {
    pub fn new(hops: Vec<Asn>) -> Self {
        AsPath(hops)
    }

    pub fn hops(&self) -> &[Asn] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Option<Asn> {
        self.0.first().copied()
    }

    /// The origin AS of the announced prefix (last element).
    pub fn origin(&self) -> Option<Asn> {
        self.0.last().copied()
    }

    pub fn contains(&self, asn: Asn) -> bool {
        self.0.contains(&asn)
    }

    /// No AS appears twice.
    pub fn is_loop_free(&self) -> bool {
        let mut seen = std::collections::HashSet::with_capacity(self.0.len());
        self.0.iter().all(|a| seen.insert(*a))
    }

    /// New path with `head` prepended.
    pub fn prepend(&self, head: Asn) -> AsPath {
        let mut hops = Vec::with_capacity(self.0.len() + 1);
        hops.push(head);
        hops.extend_from_slice(&self.0);
        AsPath(hops)
    }

    /// The suffix starting at index `i` (toward the origin).
    pub fn suffix(&self, i: usize) -> &[Asn] {
        &self.0[i..]
    }
}

impl fmt::Display for AsPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for asn in &self.0 {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{asn}")?;
            first = false;
        }
        Ok(())
    }
}

/// A country-level path: the deduplicated sequence of countries a route
/// traverses. Never holds two equal codes in a row; non-consecutive repeats
/// (traffic re-entering a country) are legitimate and kept.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CountryPath(Vec<CountryCode>);

impl CountryPath {
    /// Builds a path from raw codes, collapsing consecutive duplicates.
    pub fn from_codes<I: IntoIterator<Item = CountryCode>>(codes: I) -> Self {
        let mut out: Vec<CountryCode> = Vec::new();
        for c in codes {
            if out.last() != Some(&c) {
                out.push(c);
            }
        }
        CountryPath(out)
    }

    pub fn codes(&self) -> &[CountryCode] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Option<CountryCode> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<CountryCode> {
        self.0.last().copied()
    }

    pub fn contains(&self, c: CountryCode) -> bool {
        self.0.contains(&c)
    }
}

impl fmt::Display for CountryPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for c in &self.0 {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
            first = false;
        }
        Ok(())
    }
}

/// Collapses consecutive duplicate codes, preserving order otherwise.
pub fn dedupe_countries<I: IntoIterator<Item = CountryCode>>(codes: I) -> CountryPath {
    CountryPath::from_codes(codes)
}

/// A raw traceroute: the router IPs a probe traversed, `None` where a hop
/// did not respond.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Traceroute {
    pub src: Ipv4Addr,
    pub dst: Ipv4Addr,
    pub hops: Vec<Option<Ipv4Addr>>,
}

impl Traceroute {
    /// A traceroute with any unresponsive hop is incomplete. Incomplete
    /// traces are excluded from direct path measurements but still feed
    /// the ingress tables segment by segment.
    pub fn is_complete(&self) -> bool {
        !self.hops.is_empty() && self.hops.iter().all(|h| h.is_some())
    }
}
