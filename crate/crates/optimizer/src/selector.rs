//! Candidate ranking via an instruction-throughput cost model.
//!
//! A candidate declares how many dynamic instructions of each class one
//! execution of the region costs ([`OpCounts`]); an [`ArchProfile`] maps each
//! class to a reciprocal throughput in cycles. The estimated cost is the
//! plain sum `Σ count × recip_throughput`, kept in exact rational arithmetic
//! so that ranking never depends on floating-point rounding.
//!
//! Profiles are plain-text `key=value` files (see `profiles/haswell.arch`);
//! the two shipped profiles are also compiled in as builtins.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::registry::Candidate;

/// Instruction classes the cost model distinguishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum OpClass {
    Fma,
    Mul,
    Add,
    Perm,
    Load,
    Store,
}

impl OpClass {
    pub const ALL: [OpClass; 6] = [
        OpClass::Fma,
        OpClass::Mul,
        OpClass::Add,
        OpClass::Perm,
        OpClass::Load,
        OpClass::Store,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OpClass::Fma => "fma",
            OpClass::Mul => "mul",
            OpClass::Add => "add",
            OpClass::Perm => "perm",
            OpClass::Load => "load",
            OpClass::Store => "store",
        }
    }
}

/// Dynamic instruction counts for one execution of a region.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub fma: u64,
    pub mul: u64,
    pub add: u64,
    pub perm: u64,
    pub load: u64,
    pub store: u64,
}

impl OpCounts {
    pub fn get(&self, class: OpClass) -> u64 {
        match class {
            OpClass::Fma => self.fma,
            OpClass::Mul => self.mul,
            OpClass::Add => self.add,
            OpClass::Perm => self.perm,
            OpClass::Load => self.load,
            OpClass::Store => self.store,
        }
    }

    pub fn get_mut(&mut self, class: OpClass) -> &mut u64 {
        match class {
            OpClass::Fma => &mut self.fma,
            OpClass::Mul => &mut self.mul,
            OpClass::Add => &mut self.add,
            OpClass::Perm => &mut self.perm,
            OpClass::Load => &mut self.load,
            OpClass::Store => &mut self.store,
        }
    }

    /// Real floating-point operations, with an fma worth two.
    pub fn total_flops(&self) -> u64 {
        self.mul + 2 * self.fma + self.add
    }

    pub fn merge(&mut self, other: &OpCounts) {
        for class in OpClass::ALL {
            *self.get_mut(class) += other.get(class);
        }
    }
}

impl fmt::Display for OpCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "fma={} mul={} add={} perm={} load={} store={}",
            self.fma, self.mul, self.add, self.perm, self.load, self.store
        )
    }
}

/// Exact cycle count; a ratio of big integers so comparisons are never
/// subject to rounding.
pub type Cycles = BigRational;

/// Per-class reciprocal throughputs for one target microarchitecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchProfile {
    pub name: String,
    pub vector_bits: u32,
    pub has_fma: bool,
    recip: [BigRational; 6],
}

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("{source_name}:{line}: unknown key `{key}`")]
    UnknownKey {
        source_name: String,
        line: usize,
        key: String,
    },
    #[error("{source_name}:{line}: duplicate key `{key}`")]
    DuplicateKey {
        source_name: String,
        line: usize,
        key: String,
    },
    #[error("{source_name}:{line}: invalid value for `{key}`: {reason}")]
    BadValue {
        source_name: String,
        line: usize,
        key: String,
        reason: String,
    },
    #[error("{source_name}: missing mandatory key `{key}`")]
    MissingKey { source_name: String, key: String },
    #[error("{source_name}:{line}: expected `key=value`")]
    NotKeyValue { source_name: String, line: usize },
    #[error("no builtin architecture profile named `{0}` (available: {1})")]
    UnknownBuiltin(String, String),
}

const BUILTIN_PROFILES: [(&str, &str); 2] = [
    ("haswell", include_str!("../profiles/haswell.arch")),
    ("generic-nofma", include_str!("../profiles/generic-nofma.arch")),
];

impl ArchProfile {
    /// Parse the `key=value` profile format. `source_name` is used in
    /// diagnostics only.
    pub fn parse(text: &str, source_name: &str) -> Result<ArchProfile, ProfileError> {
        let mut name: Option<String> = None;
        let mut vector_bits: Option<u32> = None;
        let mut has_fma: Option<bool> = None;
        let mut recip: [Option<BigRational>; 6] = Default::default();
        let mut seen = BTreeSet::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            // Strip trailing comments, then whitespace.
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ProfileError::NotKeyValue {
                    source_name: source_name.to_string(),
                    line: line_no,
                });
            };
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(ProfileError::DuplicateKey {
                    source_name: source_name.to_string(),
                    line: line_no,
                    key: key.to_string(),
                });
            }
            let bad = |reason: &str| ProfileError::BadValue {
                source_name: source_name.to_string(),
                line: line_no,
                key: key.to_string(),
                reason: reason.to_string(),
            };
            match key {
                "name" => {
                    if value.is_empty() {
                        return Err(bad("empty name"));
                    }
                    name = Some(value.to_string());
                }
                "vector_bits" => {
                    vector_bits = Some(value.parse().map_err(|_| bad("expected an integer"))?)
                }
                "has_fma" => match value {
                    "true" => has_fma = Some(true),
                    "false" => has_fma = Some(false),
                    _ => return Err(bad("expected `true` or `false`")),
                },
                _ => match key.strip_prefix("recip.") {
                    Some(class_name) => {
                        let Some(class) =
                            OpClass::ALL.iter().find(|c| c.as_str() == class_name)
                        else {
                            return Err(ProfileError::UnknownKey {
                                source_name: source_name.to_string(),
                                line: line_no,
                                key: key.to_string(),
                            });
                        };
                        let ratio = parse_decimal(value).ok_or_else(|| {
                            bad("expected a positive decimal number")
                        })?;
                        if ratio <= BigRational::zero() {
                            return Err(bad("reciprocal throughput must be > 0"));
                        }
                        recip[*class as usize] = Some(ratio);
                    }
                    None => {
                        return Err(ProfileError::UnknownKey {
                            source_name: source_name.to_string(),
                            line: line_no,
                            key: key.to_string(),
                        })
                    }
                },
            }
        }

        let missing = |key: &str| ProfileError::MissingKey {
            source_name: source_name.to_string(),
            key: key.to_string(),
        };
        let mut recips = Vec::with_capacity(6);
        for class in OpClass::ALL {
            recips.push(
                recip[class as usize]
                    .take()
                    .ok_or_else(|| missing(&format!("recip.{}", class.as_str())))?,
            );
        }
        Ok(ArchProfile {
            name: name.ok_or_else(|| missing("name"))?,
            vector_bits: vector_bits.ok_or_else(|| missing("vector_bits"))?,
            has_fma: has_fma.ok_or_else(|| missing("has_fma"))?,
            recip: recips.try_into().expect("six classes"),
        })
    }

    /// Look up a compiled-in profile by name.
    pub fn builtin(name: &str) -> Result<ArchProfile, ProfileError> {
        for (builtin_name, text) in BUILTIN_PROFILES {
            if builtin_name == name {
                return Ok(ArchProfile::parse(text, builtin_name)
                    .expect("shipped profile must parse"));
            }
        }
        Err(ProfileError::UnknownBuiltin(
            name.to_string(),
            builtin_names().join(", "),
        ))
    }

    /// Resolve `--arch` values: builtin names take precedence, anything else
    /// is treated as a path to a profile file.
    pub fn resolve(spec: &str) -> Result<ArchProfile, String> {
        if BUILTIN_PROFILES.iter().any(|(n, _)| *n == spec) {
            return Ok(ArchProfile::builtin(spec).expect("checked"));
        }
        let path = Path::new(spec);
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read architecture profile `{spec}`: {e}"))?;
        ArchProfile::parse(&text, spec).map_err(|e| e.to_string())
    }

    pub fn recip(&self, class: OpClass) -> &BigRational {
        &self.recip[class as usize]
    }
}

pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN_PROFILES.iter().map(|(n, _)| *n).collect()
}

/// Parse a non-negative plain decimal (`"2"`, `"0.5"`, `"1.25"`) into an
/// exact rational. Returns `None` for anything else (signs, exponents, hex).
fn parse_decimal(s: &str) -> Option<BigRational> {
    let (int_part, frac_part) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let all_digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
    if !(int_part.is_empty() || all_digits(int_part)) {
        return None;
    }
    if !(frac_part.is_empty() || all_digits(frac_part)) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = digits.parse().ok()?;
    let denom = BigInt::from(10u32).pow(frac_part.len() as u32);
    Some(BigRational::new(numer, denom))
}

#[derive(Debug, Error, PartialEq)]
pub enum SelectError {
    #[error("candidate declares {fma} fma ops but profile `{profile}` has no FMA unit")]
    InadmissibleCandidate { fma: u64, profile: String },
    #[error("no candidate is admissible on profile `{profile}`")]
    NoAdmissibleCandidate { profile: String },
}

/// Estimated cost of one candidate, exact.
#[derive(Debug, Clone, PartialEq)]
pub struct CostEstimate {
    pub candidate_label: String,
    pub cycles: Cycles,
}

impl CostEstimate {
    /// Lossy conversion for display.
    pub fn cycles_f64(&self) -> f64 {
        rational_to_f64(&self.cycles)
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    let numer = r.numer().to_string().parse::<f64>().unwrap_or(f64::NAN);
    let denom = r.denom().to_string().parse::<f64>().unwrap_or(f64::NAN);
    numer / denom
}

/// `Σ count × recip_throughput` over all op classes.
pub fn estimate_cost(counts: &OpCounts, arch: &ArchProfile) -> Result<Cycles, SelectError> {
    if counts.fma > 0 && !arch.has_fma {
        return Err(SelectError::InadmissibleCandidate {
            fma: counts.fma,
            profile: arch.name.clone(),
        });
    }
    let mut cycles = BigRational::zero();
    for class in OpClass::ALL {
        let count = BigRational::from(BigInt::from(counts.get(class)));
        cycles += count * arch.recip(class);
    }
    Ok(cycles)
}

/// Cost of one candidate within a [`Selection`]; `cycles` is `None` when the
/// candidate is inadmissible on the profile.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedCandidate {
    pub label: String,
    pub cycles: Option<Cycles>,
}

impl RankedCandidate {
    pub fn cycles_f64(&self) -> Option<f64> {
        self.cycles.as_ref().map(rational_to_f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Index of the winner in the candidate list (emission order).
    pub winner: usize,
    /// One entry per candidate, in emission order.
    pub costs: Vec<RankedCandidate>,
}

/// Pick the admissible candidate with the lowest estimated cost; ties go to
/// the earliest emitted.
pub fn select(candidates: &[Candidate], arch: &ArchProfile) -> Result<Selection, SelectError> {
    let mut costs = Vec::with_capacity(candidates.len());
    let mut winner: Option<(usize, Cycles)> = None;
    for (idx, cand) in candidates.iter().enumerate() {
        let cycles = estimate_cost(&cand.op_counts, arch).ok();
        if let Some(cycles) = &cycles {
            let better = match &winner {
                Some((_, best)) => cycles < best,
                None => true,
            };
            if better {
                winner = Some((idx, cycles.clone()));
            }
        }
        costs.push(RankedCandidate {
            label: cand.label.clone(),
            cycles,
        });
    }
    match winner {
        Some((idx, _)) => Ok(Selection {
            winner: idx,
            costs,
        }),
        None => Err(SelectError::NoAdmissibleCandidate {
            profile: arch.name.clone(),
        }),
    }
}
