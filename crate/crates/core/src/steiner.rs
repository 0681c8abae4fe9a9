//! Steiner (n, r, 3) systems: construction, verification and persistence.
//!
//! The spherical family (q² + 1, q + 1, 3) is built as the orbit of
//! GF(q) ∪ {∞} inside GF(q²) ∪ {∞} under all Möbius maps with nonzero
//! determinant. Points are labelled 1..=q² following the canonical field
//! element order, with ∞ as point q² + 1.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{prime_power, FieldSpec};
use crate::report::CheckResult;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SteinerSystem {
    n: u32,
    r: u32,
    blocks: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub n: u32,
    pub r: u32,
    /// Blocks through each pair, when the divisibility condition makes it integral.
    pub pair_count: Option<u64>,
    /// Blocks through each point, when integral.
    pub point_count: Option<u64>,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Steiner ({}, {}, 3) verification", self.n, self.r)?;
        for c in &self.checks {
            writeln!(f, "  {c}")?;
        }
        Ok(())
    }
}

/// Necessary conditions for a Steiner (n, r, 3) system to exist.
pub fn divisibility_ok(n: u64, r: u64) -> bool {
    if r < 3 || n <= r {
        return false;
    }
    (n - 2).is_multiple_of(r - 2)
        && ((n - 1) * (n - 2)).is_multiple_of((r - 1) * (r - 2))
        && (n * (n - 1) * (n - 2)).is_multiple_of(r * (r - 1) * (r - 2))
}

pub(crate) fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Combinatorial-number-system rank of a 0-based triple a < b < c.
fn triple_rank(a: u64, b: u64, c: u64) -> usize {
    (binomial(c, 3) + binomial(b, 2) + a) as usize
}

fn pair_rank(a: u64, b: u64) -> usize {
    (binomial(b, 2) + a) as usize
}

impl SteinerSystem {
    /// Wraps a block list after shape checks, sorting each block and the
    /// block list into canonical form. Does not check the Steiner property;
    /// use [`SteinerSystem::verify`].
    pub fn new(n: u32, r: u32, blocks: Vec<Vec<u32>>) -> Result<Self> {
        if r < 3 || n < r {
            return Err(Error::InvalidArgument(format!(
                "need n >= r >= 3, got n = {n}, r = {r}"
            )));
        }
        let mut canon = Vec::with_capacity(blocks.len());
        for mut b in blocks {
            b.sort_unstable();
            if b.len() != r as usize {
                return Err(Error::InvalidArgument(format!(
                    "block {b:?} has {} points, expected {r}",
                    b.len()
                )));
            }
            if b.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidArgument(format!("block {b:?} repeats a point")));
            }
            if b[0] < 1 || b[b.len() - 1] > n {
                return Err(Error::InvalidArgument(format!("block {b:?} leaves [1, {n}]")));
            }
            canon.push(b);
        }
        canon.sort();
        Ok(SteinerSystem { n, r, blocks: canon })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn blocks(&self) -> &[Vec<u32>] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// The spherical Steiner (q² + 1, q + 1, 3) system.
    pub fn construct_spherical(q: u64) -> Result<Self> {
        Self::construct_spherical_with(q, Exec::default())
    }

    pub fn construct_spherical_with(q: u64, exec: Exec) -> Result<Self> {
        let (p, k) = prime_power(q)
            .ok_or_else(|| Error::InvalidArgument(format!("{q} is not a prime power")))?;
        let field = FieldSpec::new(p, 2 * k)?;
        let tables = FieldTables::new(&field);
        let order = tables.order;
        let inf = order as u32;
        let one = field.rank(&field.one());

        let base: Vec<u32> = field
            .subfield_elements(q)?
            .iter()
            .map(|e| field.rank(e))
            .chain(std::iter::once(inf))
            .collect();

        // One task per value of `a`; each yields the distinct images it saw.
        let partial: Vec<HashSet<Vec<u32>>> = exec.map_range(order, |a| {
            let a = a as u32;
            let mut seen = HashSet::new();
            let mut image = |c: u32, b: u32, d: u32| {
                let mut img: Vec<u32> =
                    base.iter().map(|&x| tables.mobius(a, b, c, d, x) + 1).collect();
                img.sort_unstable();
                seen.insert(img);
            };
            // c = 1: every (b, d) with a·d − b ≠ 0.
            for b in 0..order as u32 {
                for d in 0..order as u32 {
                    if tables.mul(a, d) != b {
                        image(one, b, d);
                    }
                }
            }
            // c = 0, d = 1: affine maps x -> a·x + b with a ≠ 0.
            if a != 0 {
                for b in 0..order as u32 {
                    image(0, b, one);
                }
            }
            seen
        });
        let orbit: BTreeSet<Vec<u32>> = partial.into_iter().flatten().collect();

        let expected = q * (q * q + 1);
        if orbit.len() as u64 != expected {
            return Err(Error::Internal(format!(
                "orbit has {} blocks, expected q(q^2+1) = {expected}",
                orbit.len()
            )));
        }
        Self::new(order as u32 + 1, q as u32 + 1, orbit.into_iter().collect())
    }

    pub fn verify(&self) -> VerificationReport {
        let (n, r) = (self.n as u64, self.r as u64);
        let mut checks = Vec::new();

        let mut triples = vec![0u32; binomial(n, 3) as usize];
        let mut pairs = vec![0u32; binomial(n, 2) as usize];
        let mut points = vec![0u32; n as usize];
        for b in &self.blocks {
            let z: Vec<u64> = b.iter().map(|&x| x as u64 - 1).collect();
            for (x, &zx) in z.iter().enumerate() {
                points[zx as usize] += 1;
                for (y, &zy) in z.iter().enumerate().skip(x + 1) {
                    pairs[pair_rank(zx, zy)] += 1;
                    for &zw in &z[y + 1..] {
                        triples[triple_rank(zx, zy, zw)] += 1;
                    }
                }
            }
        }

        let bad_triple = triples.iter().position(|&c| c != 1);
        checks.push(match bad_triple {
            None => CheckResult::pass(
                "triple coverage",
                format!("all {} triples covered exactly once", triples.len()),
            ),
            Some(idx) => {
                let w = unrank_triple(idx as u64, n);
                CheckResult::fail(
                    "triple coverage",
                    format!("triple covered {} times", triples[idx]),
                    Some(w),
                )
            }
        });

        let pair_count = ((n - 2) % (r - 2) == 0 && n > 2).then(|| (n - 2) / (r - 2));
        checks.push(uniform_count_check(
            "pair count",
            &pairs,
            pair_count,
            |idx| unrank_pair(idx as u64),
        ));

        let point_num = (n - 1) * (n - 2);
        let point_den = (r - 1) * (r - 2);
        let point_count = (point_num % point_den == 0).then(|| point_num / point_den);
        checks.push(uniform_count_check("point count", &points, point_count, |idx| {
            vec![idx as u32 + 1]
        }));

        let num = binomial(n, 3);
        let den = binomial(r, 3);
        let expected_blocks = num.is_multiple_of(den).then(|| num / den);
        checks.push(match expected_blocks {
            Some(e) if e == self.blocks.len() as u64 => {
                CheckResult::pass("block count", format!("{e} blocks = C(n,3)/C(r,3)"))
            }
            Some(e) => CheckResult::fail(
                "block count",
                format!("{} blocks, expected C(n,3)/C(r,3) = {e}", self.blocks.len()),
                None,
            ),
            None => CheckResult::fail(
                "block count",
                format!("C(r,3) = {den} does not divide C(n,3) = {num}"),
                None,
            ),
        });

        VerificationReport { n: self.n, r: self.r, pair_count, point_count, checks }
    }

    /// Parses the text format: `steiner n r 3` then one block per line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (hline, header) = lines
            .next()
            .ok_or(Error::Parse { line: 1, message: "empty file".into() })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse_num = |tok: &str, line: usize| {
            tok.parse::<u32>().map_err(|_| Error::Parse {
                line,
                message: format!("expected an integer, found {tok:?}"),
            })
        };
        if fields.len() != 4 || fields[0] != "steiner" {
            return Err(Error::Parse { line: hline, message: "expected header `steiner n r 3`".into() });
        }
        let n = parse_num(fields[1], hline)?;
        let r = parse_num(fields[2], hline)?;
        if parse_num(fields[3], hline)? != 3 {
            return Err(Error::Parse { line: hline, message: "only s = 3 is supported".into() });
        }
        if r < 3 || n < r {
            return Err(Error::Parse { line: hline, message: format!("need n >= r >= 3, got ({n}, {r})") });
        }

        let mut blocks = Vec::new();
        for (lineno, line) in lines {
            let block = line
                .split_whitespace()
                .map(|t| parse_num(t, lineno))
                .collect::<Result<Vec<u32>>>()?;
            if block.len() != r as usize {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("block has {} points, expected {r}", block.len()),
                });
            }
            if block.iter().any(|&x| x < 1 || x > n) {
                return Err(Error::Parse { line: lineno, message: format!("point outside [1, {n}]") });
            }
            if block.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Parse {
                    line: lineno,
                    message: "points must be strictly ascending".into(),
                });
            }
            blocks.push(block);
        }
        Self::new(n, r, blocks)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("steiner {} {} 3\n", self.n, self.r);
        for b in &self.blocks {
            let line: Vec<String> = b.iter().map(u32::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Reads a design file, rejecting it unless it verifies.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let sys = Self::parse(&fs::read_to_string(path)?)?;
        let report = sys.verify();
        if !report.passed() {
            return Err(Error::InvalidDesign(Box::new(report)));
        }
        Ok(sys)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn uniform_count_check(
    name: &str,
    counts: &[u32],
    expected: Option<u64>,
    witness: impl Fn(usize) -> Vec<u32>,
) -> CheckResult {
    let Some(e) = expected else {
        return CheckResult::fail(name, "expected count is not an integer", None);
    };
    match counts.iter().position(|&c| c as u64 != e) {
        None => CheckResult::pass(name, format!("every {} lies in exactly {e} blocks", name.split(' ').next().unwrap_or(name))),
        Some(idx) => CheckResult::fail(
            name,
            format!("lies in {} blocks, expected {e}", counts[idx]),
            Some(witness(idx)),
        ),
    }
}

/// Largest `x` with C(x, k) <= rank.
fn largest_below(rank: u64, k: u64, upper: u64) -> u64 {
    let mut x = k - 1;
    while x + 1 < upper && binomial(x + 1, k) <= rank {
        x += 1;
    }
    x
}

fn unrank_triple(rank: u64, n: u64) -> Vec<u32> {
    let c = largest_below(rank, 3, n);
    let rest = rank - binomial(c, 3);
    let b = largest_below(rest, 2, c);
    let a = rest - binomial(b, 2);
    vec![a as u32 + 1, b as u32 + 1, c as u32 + 1]
}

fn unrank_pair(rank: u64) -> Vec<u32> {
    let b = largest_below(rank, 2, u64::MAX);
    let a = rank - binomial(b, 2);
    vec![a as u32 + 1, b as u32 + 1]
}

/// Dense operation tables over field ranks; ∞ is encoded as `order`.
struct FieldTables {
    order: usize,
    add: Vec<u32>,
    mul: Vec<u32>,
    inv: Vec<u32>,
}

impl FieldTables {
    fn new(f: &FieldSpec) -> Self {
        let order = f.order() as usize;
        let elems = f.elements();
        let mut add = vec![0; order * order];
        let mut mul = vec![0; order * order];
        for (i, a) in elems.iter().enumerate() {
            for (j, b) in elems.iter().enumerate() {
                add[i * order + j] = f.rank(&f.add(a, b));
                mul[i * order + j] = f.rank(&f.mul(a, b));
            }
        }
        let inv = elems
            .iter()
            .map(|a| f.inv(a).map(|x| f.rank(&x)).unwrap_or(0))
            .collect();
        FieldTables { order, add, mul, inv }
    }

    fn add(&self, a: u32, b: u32) -> u32 {
        self.add[a as usize * self.order + b as usize]
    }

    fn mul(&self, a: u32, b: u32) -> u32 {
        self.mul[a as usize * self.order + b as usize]
    }

    fn div(&self, num: u32, den: u32) -> u32 {
        self.mul(num, self.inv[den as usize])
    }

    /// x -> (a·x + b) / (c·x + d) on the projective line.
    fn mobius(&self, a: u32, b: u32, c: u32, d: u32, x: u32) -> u32 {
        let inf = self.order as u32;
        if x == inf {
            return if c == 0 { inf } else { self.div(a, c) };
        }
        let den = self.add(self.mul(c, x), d);
        if den == 0 {
            return inf;
        }
        let num = self.add(self.mul(a, x), b);
        self.div(num, den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(name: &str) -> String {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
        fs::read_to_string(path).unwrap()
    }

    /// Brute-force oracle: does every triple lie in exactly one block?
    fn brute_triple_cover(sys: &SteinerSystem) -> bool {
        let n = sys.n();
        for a in 1..=n {
            for b in a + 1..=n {
                for c in b + 1..=n {
                    let hits = sys
                        .blocks()
                        .iter()
                        .filter(|bl| bl.contains(&a) && bl.contains(&b) && bl.contains(&c))
                        .count();
                    if hits != 1 {
                        return false;
                    }
                }
            }
        }
        true
    }

    #[test]
    fn divisibility_examples() {
        assert!(divisibility_ok(10, 4));
        assert!(divisibility_ok(8, 4));
        assert!(!divisibility_ok(9, 4));
        assert!(divisibility_ok(5, 3));
        assert!(!divisibility_ok(4, 4));
    }

    #[test]
    fn q2_is_every_triple_of_five() {
        let sys = SteinerSystem::construct_spherical(2).unwrap();
        assert_eq!((sys.n(), sys.r(), sys.block_count()), (5, 3, 10));
        let mut all = Vec::new();
        for a in 1..=5 {
            for b in a + 1..=5 {
                for c in b + 1..=5 {
                    all.push(vec![a, b, c]);
                }
            }
        }
        assert_eq!(sys.blocks(), all.as_slice());
        assert!(brute_triple_cover(&sys));
    }

    #[test]
    fn q3_shape() {
        let sys = SteinerSystem::construct_spherical(3).unwrap();
        assert_eq!((sys.n(), sys.r(), sys.block_count()), (10, 4, 30));
        let report = sys.verify();
        assert!(report.passed(), "{report}");
        assert_eq!(report.pair_count, Some(4));
        assert_eq!(report.point_count, Some(12));
        assert!(brute_triple_cover(&sys));
    }

    #[test]
    fn constructed_systems_verify() {
        for q in [2u64, 3, 4, 5] {
            let sys = SteinerSystem::construct_spherical(q).unwrap();
            let report = sys.verify();
            assert!(report.passed(), "q = {q}: {report}");
            assert_eq!(sys.block_count() as u64, q * (q * q + 1));
            assert_eq!(report.pair_count, Some(q + 1));
            assert_eq!(report.point_count, Some(q * (q + 1)));
        }
    }

    #[test]
    fn construction_is_deterministic_across_policies() {
        let a = SteinerSystem::construct_spherical_with(4, Exec::Sequential).unwrap();
        let b = SteinerSystem::construct_spherical_with(4, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_non_prime_power() {
        assert!(matches!(
            SteinerSystem::construct_spherical(6),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn fixtures_verify() {
        let sys = SteinerSystem::parse(&fixture("steiner_10_4_3.txt")).unwrap();
        let report = sys.verify();
        assert!(report.passed());
        assert_eq!((report.pair_count, report.point_count), (Some(4), Some(12)));

        let sys = SteinerSystem::parse(&fixture("steiner_8_4_3.txt")).unwrap();
        assert_eq!((sys.n(), sys.r(), sys.block_count()), (8, 4, 14));
        let report = sys.verify();
        assert!(report.passed());
        assert_eq!((report.pair_count, report.point_count), (Some(3), Some(7)));
    }

    #[test]
    fn removed_block_yields_witness_triple() {
        let sys = SteinerSystem::parse(&fixture("steiner_10_4_3.txt")).unwrap();
        let removed = sys.blocks()[0].clone();
        let damaged =
            SteinerSystem::new(10, 4, sys.blocks()[1..].to_vec()).unwrap();
        let report = damaged.verify();
        assert!(!report.passed());
        let triple = &report.checks[0];
        assert_eq!(triple.name, "triple coverage");
        assert!(!triple.passed);
        let w = triple.witness.clone().unwrap();
        assert!(w.iter().all(|x| removed.contains(x)), "{w:?} not in {removed:?}");
    }

    #[test]
    fn text_round_trip() {
        let sys = SteinerSystem::construct_spherical(2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.txt");
        sys.save(&path).unwrap();
        assert_eq!(SteinerSystem::load(&path).unwrap(), sys);
    }

    #[test]
    fn malformed_files_report_line_numbers() {
        let err = SteinerSystem::parse("steiner 5 3 3\n1 2 3\n1 2 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = SteinerSystem::parse("steiner 5 3 3\n1 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = SteinerSystem::parse("design 5 3 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(SteinerSystem::parse("").is_err());
    }

    #[test]
    fn load_rejects_non_steiner_design() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        fs::write(&path, "steiner 5 3 3\n1 2 3\n1 2 4\n").unwrap();
        assert!(matches!(SteinerSystem::load(&path), Err(Error::InvalidDesign(_))));
    }

    #[test]
    fn unranking_inverts_ranking() {
        let n = 9;
        for c in 0..n {
            for b in 0..c {
                for a in 0..b {
                    let w = unrank_triple(triple_rank(a, b, c) as u64, n);
                    assert_eq!(w, vec![a as u32 + 1, b as u32 + 1, c as u32 + 1]);
                }
                assert_eq!(unrank_pair(pair_rank(b, c) as u64), vec![b as u32 + 1, c as u32 + 1]);
            }
        }
    }
}
