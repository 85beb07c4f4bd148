//! Built-in two- and three-patch models with closed-form reference values.
//!
//! Every entry carries named parameter slots with defaults, a model builder
//! and a set of oracles. Each oracle has machine-checkable domain predicates;
//! an oracle outside its domain is skipped rather than compared.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::path::{Breakpoint, PatchModel};
use crate::simplex::Verdict;

/// Parameter values by slot name (`a`, `b`, `a1`, ..., `m`, `eps`).
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Bindings(BTreeMap<String, f64>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> f64 {
        self.0.get(name).copied().unwrap_or(f64::NAN)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl fmt::Display for Bindings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(", "))
    }
}

#[derive(Clone, Copy)]
pub struct Predicate {
    pub description: &'static str,
    pub holds: fn(&Bindings) -> bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Sigma,
    Chi,
    /// `m → 0`
    LambdaZeroT,
    /// `T → 0` at the bound `m`
    LambdaMZero,
    /// `T → ∞` at the bound `m`
    LambdaMInf,
    /// `m → ∞`
    LambdaInfT,
    LambdaZeroZero,
    LambdaZeroInf,
    LambdaInfZero,
    /// `Λ(m, T)` at finite arguments
    LambdaMT,
    H3,
    H4,
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantity::Sigma => "sigma",
            Quantity::Chi => "chi",
            Quantity::LambdaZeroT => "Λ(0,T)",
            Quantity::LambdaMZero => "Λ(m,0)",
            Quantity::LambdaMInf => "Λ(m,∞)",
            Quantity::LambdaInfT => "Λ(∞,T)",
            Quantity::LambdaZeroZero => "Λ(0,0)",
            Quantity::LambdaZeroInf => "Λ(0,∞)",
            Quantity::LambdaInfZero => "Λ(∞,0)",
            Quantity::LambdaMT => "Λ(m,T)",
            Quantity::H3 => "H3",
            Quantity::H4 => "H4",
        })
    }
}

#[derive(Clone, Copy)]
pub enum Expected {
    Equal(fn(&Bindings) -> f64),
    AtMost(fn(&Bindings) -> f64),
    Verdict(Verdict),
}

#[derive(Clone)]
pub struct Oracle {
    pub quantity: Quantity,
    pub expected: Expected,
    pub domain: Vec<Predicate>,
}

impl Oracle {
    fn eq(quantity: Quantity, f: fn(&Bindings) -> f64) -> Self {
        Self {
            quantity,
            expected: Expected::Equal(f),
            domain: Vec::new(),
        }
    }

    fn verdict(quantity: Quantity, v: Verdict) -> Self {
        Self {
            quantity,
            expected: Expected::Verdict(v),
            domain: Vec::new(),
        }
    }

    fn at_most(quantity: Quantity, f: fn(&Bindings) -> f64) -> Self {
        Self {
            quantity,
            expected: Expected::AtMost(f),
            domain: Vec::new(),
        }
    }

    fn when(mut self, description: &'static str, holds: fn(&Bindings) -> bool) -> Self {
        self.domain.push(Predicate { description, holds });
        self
    }

    pub fn in_domain(&self, b: &Bindings) -> bool {
        self.domain.iter().all(|p| (p.holds)(b))
    }
}

#[derive(Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    /// Model parameter slots with default values.
    pub params: Vec<(&'static str, f64)>,
    /// Restrictions on the model parameters themselves.
    pub domain: Vec<Predicate>,
    builder: fn(&Bindings) -> Result<PatchModel>,
    pub oracles: Vec<Oracle>,
}

impl CatalogEntry {
    pub fn defaults(&self) -> Bindings {
        let mut b = Bindings::new();
        for (k, v) in &self.params {
            b.set(k, *v);
        }
        b
    }

    /// Defaults overridden by `overrides`; unknown slots other than `m` are rejected.
    pub fn bind(&self, overrides: &Bindings) -> Result<Bindings> {
        let mut b = self.defaults();
        for (k, v) in overrides.iter() {
            if k != "m" && !self.params.iter().any(|(p, _)| *p == k) {
                return Err(Error::Domain(format!(
                    "`{}` has no parameter `{k}` (slots: {})",
                    self.name,
                    self.params.iter().map(|p| p.0).collect::<Vec<_>>().join(", ")
                )));
            }
            b.set(k, v);
        }
        Ok(b)
    }

    pub fn check_domain(&self, b: &Bindings) -> Result<()> {
        for p in &self.domain {
            if !(p.holds)(b) {
                return Err(Error::Domain(format!("{}: {} ({b})", self.name, p.description)));
            }
        }
        Ok(())
    }

    pub fn model(&self, b: &Bindings) -> Result<PatchModel> {
        self.check_domain(b)?;
        (self.builder)(b)
    }

    pub fn default_model(&self) -> PatchModel {
        self.model(&self.defaults()).expect("defaults lie in the domain")
    }

    pub fn oracle(&self, q: Quantity) -> Option<&Oracle> {
        self.oracles.iter().find(|o| o.quantity == q)
    }

    /// Value of an equality oracle, if it applies to these bindings.
    pub fn expected_value(&self, q: Quantity, b: &Bindings) -> Option<f64> {
        match self.oracle(q) {
            Some(o) if o.in_domain(b) => match o.expected {
                Expected::Equal(f) => Some(f(b)),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn expected_verdict(&self, q: Quantity, b: &Bindings) -> Option<Verdict> {
        self.oracles
            .iter()
            .filter(|o| o.quantity == q && o.in_domain(b))
            .find_map(|o| match o.expected {
                Expected::Verdict(v) => Some(v),
                _ => None,
            })
    }
}

pub fn find(name: &str) -> Result<CatalogEntry> {
    catalog()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownEntry(name.to_string()))
}

fn half() -> Vec<Breakpoint> {
    vec![Breakpoint::zero(), Breakpoint::ratio(1, 2)]
}

fn thirds() -> Vec<Breakpoint> {
    vec![Breakpoint::zero(), Breakpoint::ratio(1, 3), Breakpoint::ratio(2, 3)]
}

/// Unit-rate migration from patch `from` to patch `to`.
pub fn one_way(n: usize, from: usize, to: usize) -> SquareMatrix {
    let mut rows = vec![vec![0.0; n]; n];
    rows[to][from] = 1.0;
    rows[from][from] = -1.0;
    SquareMatrix::from_rows(&rows).expect("valid")
}

/// Unit-rate exchange between patches `i` and `j`.
pub fn symmetric(n: usize, i: usize, j: usize) -> SquareMatrix {
    one_way(n, i, j).plus(&one_way(n, j, i)).expect("same size")
}

fn prop_ordered(b: &Bindings) -> bool {
    b.get("a1") >= b.get("b2") && b.get("a2") >= b.get("b1")
}

fn two_patch_worst(b: &Bindings) -> Result<PatchModel> {
    let (a1, b1, a2, b2) = (b.get("a1"), b.get("b1"), b.get("a2"), b.get("b2"));
    PatchModel::piecewise_constant(
        half(),
        vec![vec![a1, b2], vec![b1, a2]],
        vec![one_way(2, 0, 1), one_way(2, 1, 0)],
    )
}

fn two_patch_best(b: &Bindings) -> Result<PatchModel> {
    let (a1, b1, a2, b2) = (b.get("a1"), b.get("b1"), b.get("a2"), b.get("b2"));
    PatchModel::piecewise_constant(
        half(),
        vec![vec![a1, b2], vec![b1, a2]],
        vec![one_way(2, 1, 0), one_way(2, 0, 1)],
    )
}

fn two_patch_epsilon(b: &Bindings) -> Result<PatchModel> {
    let (a, bb, e) = (b.get("a"), b.get("b"), b.get("eps"));
    let l1 = one_way(2, 0, 1).plus(&one_way(2, 1, 0).scaled(e))?;
    let l2 = one_way(2, 1, 0).plus(&one_way(2, 0, 1).scaled(e))?;
    PatchModel::piecewise_constant(half(), vec![vec![a, bb], vec![bb, a]], vec![l1, l2])
}

fn rbar2(b: &Bindings) -> (f64, f64) {
    (
        0.5 * (b.get("a1") + b.get("b1")),
        0.5 * (b.get("a2") + b.get("b2")),
    )
}

fn two_patch_common() -> Vec<Oracle> {
    vec![
        Oracle::eq(Quantity::Sigma, |b| 0.5 * (b.get("b1") + b.get("b2"))),
        Oracle::eq(Quantity::Chi, |b| 0.5 * (b.get("a1") + b.get("a2"))),
        Oracle::eq(Quantity::LambdaZeroT, |b| {
            let (r1, r2) = rbar2(b);
            r1.max(r2)
        }),
        Oracle::eq(Quantity::LambdaMZero, |b| {
            let (r1, r2) = rbar2(b);
            let m = b.get("m");
            0.5 * (r1 + r2 - m + ((r1 - r2).powi(2) + m * m).sqrt())
        })
        .when("m >= 0", |b| b.get("m") >= 0.0),
        Oracle::eq(Quantity::LambdaZeroZero, |b| {
            let (r1, r2) = rbar2(b);
            r1.max(r2)
        }),
        Oracle::eq(Quantity::LambdaInfZero, |b| {
            let (r1, r2) = rbar2(b);
            0.5 * (r1 + r2)
        }),
        Oracle::eq(Quantity::LambdaZeroInf, |b| 0.5 * (b.get("a1") + b.get("a2"))),
        Oracle::verdict(Quantity::H4, Verdict::VerifiedSampled),
    ]
}

fn not_at_threshold(b: &Bindings) -> bool {
    let m = b.get("m");
    let t1 = b.get("a1") - b.get("b2");
    let t2 = b.get("a2") - b.get("b1");
    m > 0.0 && (m - t1).abs() > 1e-6 && (m - t2).abs() > 1e-6
}

fn three_patch_common() -> Vec<Oracle> {
    vec![
        Oracle::eq(Quantity::Sigma, |b| b.get("b")),
        Oracle::eq(Quantity::Chi, |b| b.get("a")),
        Oracle::eq(Quantity::LambdaZeroT, |b| (b.get("a") + 2.0 * b.get("b")) / 3.0),
        Oracle::eq(Quantity::LambdaMZero, |b| (b.get("a") + 2.0 * b.get("b")) / 3.0)
            .when("m >= 0", |b| b.get("m") >= 0.0),
        Oracle::eq(Quantity::LambdaZeroZero, |b| (b.get("a") + 2.0 * b.get("b")) / 3.0),
        Oracle::eq(Quantity::LambdaInfZero, |b| (b.get("a") + 2.0 * b.get("b")) / 3.0),
        Oracle::verdict(Quantity::H4, Verdict::Violated),
    ]
}

fn a_above_b(b: &Bindings) -> bool {
    b.get("a") > b.get("b")
}

/// Seasons of a three-patch model as (growth triple, migration matrix).
fn three_season(seasons: [([f64; 3], SquareMatrix); 3]) -> Result<PatchModel> {
    let (rates, mats): (Vec<Vec<f64>>, Vec<SquareMatrix>) =
        seasons.into_iter().map(|(r, l)| (r.to_vec(), l)).unzip();
    PatchModel::piecewise_constant(thirds(), rates, mats)
}

fn growth_triples(b: &Bindings) -> ([f64; 3], [f64; 3], [f64; 3]) {
    let (a, bb) = (b.get("a"), b.get("b"));
    ([a, bb, bb], [bb, a, bb], [bb, bb, a])
}

fn bb_symmetric(b: &Bindings) -> Result<PatchModel> {
    let (g1, g2, g3) = growth_triples(b);
    three_season([
        (g3, symmetric(3, 0, 1)),
        (g2, symmetric(3, 0, 2)),
        (g1, symmetric(3, 1, 2)),
    ])
}

fn ab_symmetric(b: &Bindings) -> Result<PatchModel> {
    let (g1, g2, g3) = growth_triples(b);
    three_season([
        (g1, symmetric(3, 0, 1)),
        (g3, symmetric(3, 0, 2)),
        (g2, symmetric(3, 1, 2)),
    ])
}

// One-way cycle models: each season moves migrants along a single edge of
// the cycle 1 → 2 → 3 → 1.

fn cycle_bb_1(b: &Bindings) -> Result<PatchModel> {
    let (g1, g2, g3) = growth_triples(b);
    three_season([(g3, one_way(3, 0, 1)), (g2, one_way(3, 2, 0)), (g1, one_way(3, 1, 2))])
}

fn cycle_bb_2(b: &Bindings) -> Result<PatchModel> {
    let (g1, g2, g3) = growth_triples(b);
    three_season([(g3, one_way(3, 0, 1)), (g1, one_way(3, 1, 2)), (g2, one_way(3, 2, 0))])
}

fn cycle_ba_1(b: &Bindings) -> Result<PatchModel> {
    let (g1, g2, g3) = growth_triples(b);
    three_season([(g2, one_way(3, 0, 1)), (g1, one_way(3, 2, 0)), (g3, one_way(3, 1, 2))])
}

fn cycle_ba_2(b: &Bindings) -> Result<PatchModel> {
    let (g1, g2, g3) = growth_triples(b);
    three_season([(g2, one_way(3, 0, 1)), (g3, one_way(3, 1, 2)), (g1, one_way(3, 2, 0))])
}

fn cycle_ab_1(b: &Bindings) -> Result<PatchModel> {
    let (g1, g2, g3) = growth_triples(b);
    three_season([(g1, one_way(3, 0, 1)), (g3, one_way(3, 2, 0)), (g2, one_way(3, 1, 2))])
}

fn cycle_ab_2(b: &Bindings) -> Result<PatchModel> {
    let (g1, g2, g3) = growth_triples(b);
    three_season([(g1, one_way(3, 0, 1)), (g2, one_way(3, 1, 2)), (g3, one_way(3, 2, 0))])
}

fn m_positive(b: &Bindings) -> bool {
    b.get("m") > 0.0
}

pub fn catalog() -> Vec<CatalogEntry> {
    let two_params = vec![("a1", 1.0), ("b1", -2.0), ("a2", 2.0), ("b2", -1.0)];
    let two_domain = vec![Predicate {
        description: "a1 >= b2 and a2 >= b1",
        holds: prop_ordered,
    }];
    let three_params = vec![("a", 1.0), ("b", -1.0)];
    let three_domain = vec![Predicate {
        description: "a >= b",
        holds: |b| b.get("a") >= b.get("b"),
    }];

    let mut worst = two_patch_common();
    worst.extend([
        Oracle::eq(Quantity::LambdaInfT, |b| 0.5 * (b.get("b1") + b.get("b2"))),
        Oracle::eq(Quantity::LambdaMInf, |b| {
            let (a1, b1, a2, b2, m) = (b.get("a1"), b.get("b1"), b.get("a2"), b.get("b2"), b.get("m"));
            if m < a1 - b2 {
                0.5 * (a1 + a2) - m
            } else if m <= a2 - b1 {
                0.5 * (a2 + b2 - m)
            } else {
                0.5 * (b1 + b2)
            }
        })
        .when("m > 0", m_positive)
        .when("a1 - b2 <= a2 - b1", |b| b.get("a1") - b.get("b2") <= b.get("a2") - b.get("b1")),
        Oracle::verdict(Quantity::H3, Verdict::VerifiedSampled)
            .when("m > 0 away from a1 - b2 and a2 - b1", not_at_threshold),
    ]);

    let mut best = two_patch_common();
    best.extend([
        Oracle::eq(Quantity::LambdaInfT, |b| 0.5 * (b.get("a1") + b.get("a2"))),
        Oracle::eq(Quantity::LambdaMInf, |b| 0.5 * (b.get("a1") + b.get("a2"))).when("m > 0", m_positive),
        Oracle::verdict(Quantity::H3, Verdict::VerifiedSampled).when("m > 0", m_positive),
    ]);

    let epsilon = vec![
        Oracle::eq(Quantity::Sigma, |b| b.get("b")),
        Oracle::eq(Quantity::Chi, |b| b.get("a")),
        Oracle::eq(Quantity::LambdaZeroT, |b| 0.5 * (b.get("a") + b.get("b"))),
        Oracle::eq(Quantity::LambdaMZero, |b| 0.5 * (b.get("a") + b.get("b")))
            .when("m >= 0", |b| b.get("m") >= 0.0),
        Oracle::eq(Quantity::LambdaZeroZero, |b| 0.5 * (b.get("a") + b.get("b"))),
        Oracle::eq(Quantity::LambdaInfZero, |b| 0.5 * (b.get("a") + b.get("b"))),
        Oracle::eq(Quantity::LambdaZeroInf, |b| b.get("a")),
        Oracle::eq(Quantity::LambdaInfT, |b| {
            let e = b.get("eps");
            (b.get("b") + e * b.get("a")) / (1.0 + e)
        }),
        Oracle::verdict(Quantity::H4, Verdict::VerifiedSampled),
    ];

    let mut bb_sym = three_patch_common();
    bb_sym.extend([
        Oracle::at_most(Quantity::LambdaMT, |b| 0.5 * (b.get("a") + b.get("b"))).when("m > 0", m_positive),
        Oracle::verdict(Quantity::H3, Verdict::Violated).when("m > 0", m_positive),
    ]);

    let mut ab_sym = three_patch_common();
    ab_sym.extend([
        Oracle::eq(Quantity::LambdaMInf, |b| {
            let (a, bb, m) = (b.get("a"), b.get("b"), b.get("m"));
            0.5 * (a + bb - 2.0 * m + ((a - bb).powi(2) + 4.0 * m * m).sqrt())
        })
        .when("m > 0", m_positive),
        Oracle::eq(Quantity::LambdaZeroInf, |b| b.get("a")),
        Oracle::verdict(Quantity::H3, Verdict::VerifiedSampled).when("m > 0", m_positive),
    ]);

    let cycle = |h3: Verdict| {
        let mut o = three_patch_common();
        o.push(Oracle::verdict(Quantity::H3, h3).when("m > 0", m_positive));
        o
    };
    let mut ba_2 = cycle(Verdict::VerifiedSampled);
    ba_2.extend([
        Oracle::eq(Quantity::LambdaMInf, |b| b.get("a")).when("m > 0", m_positive),
        Oracle::eq(Quantity::LambdaZeroInf, |b| b.get("a")),
    ]);
    let mut ab_2 = three_patch_common();
    ab_2.extend([
        Oracle::eq(Quantity::LambdaMInf, |b| b.get("a") - b.get("m"))
            .when("0 < m < a - b", |b| m_positive(b) && b.get("m") < b.get("a") - b.get("b")),
        Oracle::eq(Quantity::LambdaZeroInf, |b| b.get("a")),
        Oracle::verdict(Quantity::H3, Verdict::VerifiedSampled)
            .when("0 < m < a - b", |b| m_positive(b) && b.get("m") < b.get("a") - b.get("b") - 1e-6),
        Oracle::verdict(Quantity::H3, Verdict::Violated).when("m > a - b", |b| b.get("m") > b.get("a") - b.get("b") + 1e-6),
    ]);

    let entry = |name, description, params: &Vec<(&'static str, f64)>, domain: &Vec<Predicate>, builder, oracles: Vec<Oracle>| {
        let three = params.iter().any(|p| p.0 == "a") && !params.iter().any(|p| p.0 == "eps");
        let oracles = oracles
            .into_iter()
            .map(|o| {
                // equal rates make every dominant eigenvalue degenerate
                if three && o.quantity == Quantity::H3 {
                    o.when("a > b", a_above_b)
                } else {
                    o
                }
            })
            .collect();
        CatalogEntry {
            name,
            description,
            params: params.clone(),
            domain: domain.clone(),
            builder,
            oracles,
        }
    };

    vec![
        entry(
            "two-patch-worst",
            "two patches alternating good and bad seasons; all migrants move to the currently worse patch",
            &two_params,
            &two_domain,
            two_patch_worst as fn(&Bindings) -> Result<PatchModel>,
            worst,
        ),
        entry(
            "two-patch-best",
            "two patches alternating good and bad seasons; all migrants move to the currently better patch",
            &two_params,
            &two_domain,
            two_patch_best,
            best,
        ),
        entry(
            "two-patch-epsilon",
            "two patches with rates a/b swapping each half period; migration mostly towards the worse patch, eps back",
            &vec![("a", 1.0), ("b", -0.5), ("eps", 0.25)],
            &vec![
                Predicate {
                    description: "a > b",
                    holds: a_above_b,
                },
                Predicate {
                    description: "eps > 0",
                    holds: |b| b.get("eps") > 0.0,
                },
            ],
            two_patch_epsilon,
            epsilon,
        ),
        entry(
            "three-patch-bb-symmetric",
            "three patches, one good (a) patch rotating each third; symmetric exchange between the two bad (b) patches",
            &three_params,
            &three_domain,
            bb_symmetric,
            bb_sym,
        ),
        entry(
            "three-patch-ab-symmetric",
            "three patches, one good (a) patch rotating each third; symmetric exchange between the good patch and one bad patch",
            &three_params,
            &three_domain,
            ab_symmetric,
            ab_sym,
        ),
        entry(
            "cycle-bb-1",
            "one-way cycle, each season moves migrants between the two bad patches (first season order)",
            &three_params,
            &three_domain,
            cycle_bb_1,
            cycle(Verdict::Violated),
        ),
        entry(
            "cycle-bb-2",
            "one-way cycle, bad-to-bad migration with the last two seasons swapped",
            &three_params,
            &three_domain,
            cycle_bb_2,
            cycle(Verdict::Violated),
        ),
        entry(
            "cycle-ba-1",
            "one-way cycle, each season moves migrants from a bad patch into the good one (first season order)",
            &three_params,
            &three_domain,
            cycle_ba_1,
            cycle(Verdict::Violated),
        ),
        entry(
            "cycle-ba-2",
            "one-way cycle, bad-to-good migration with the last two seasons swapped",
            &three_params,
            &three_domain,
            cycle_ba_2,
            ba_2,
        ),
        entry(
            "cycle-ab-1",
            "one-way cycle, each season moves migrants from the good patch into a bad one (first season order)",
            &three_params,
            &three_domain,
            cycle_ab_1,
            cycle(Verdict::Violated),
        ),
        entry(
            "cycle-ab-2",
            "one-way cycle, good-to-bad migration with the last two seasons swapped",
            &three_params,
            &three_domain,
            cycle_ab_2,
            ab_2,
        ),
    ]
}

/// Values computed by the numerical pipeline for one parameter binding.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ComputedQuantities {
    pub values: BTreeMap<Quantity, f64>,
    pub verdicts: BTreeMap<Quantity, Verdict>,
}

impl ComputedQuantities {
    pub fn set(&mut self, q: Quantity, v: f64) -> &mut Self {
        self.values.insert(q, v);
        self
    }

    pub fn set_verdict(&mut self, q: Quantity, v: Verdict) -> &mut Self {
        self.verdicts.insert(q, v);
        self
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { abs: 1e-10, rel: 0.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleRow {
    pub quantity: Quantity,
    pub expected: String,
    pub computed: String,
    pub abs_err: Option<f64>,
    pub rel_err: Option<f64>,
    /// `None` when the oracle was skipped.
    pub pass: Option<bool>,
    pub note: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleTable {
    pub entry: String,
    pub bindings: Bindings,
    pub rows: Vec<OracleRow>,
}

impl OracleTable {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass != Some(false))
    }
}

impl fmt::Display for OracleTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} [{}]", self.entry, self.bindings)?;
        writeln!(
            f,
            "{:<8} {:>22} {:>22} {:>10} {:>10}  status",
            "quantity", "expected", "computed", "abs err", "rel err"
        )?;
        for r in &self.rows {
            let e = |v: Option<f64>| v.map(|x| format!("{x:.2e}")).unwrap_or_else(|| "-".into());
            let status = match r.pass {
                Some(true) => "pass".to_string(),
                Some(false) => "FAIL".to_string(),
                None => format!("skip ({})", r.note),
            };
            writeln!(
                f,
                "{:<8} {:>22} {:>22} {:>10} {:>10}  {status}",
                r.quantity.to_string(),
                r.expected,
                r.computed,
                e(r.abs_err),
                e(r.rel_err)
            )?;
        }
        Ok(())
    }
}

/// Compares computed quantities against the entry's oracles.
pub fn oracle_check(
    entry: &CatalogEntry,
    bindings: &Bindings,
    computed: &ComputedQuantities,
    tol: &Tolerances,
) -> Result<OracleTable> {
    entry.check_domain(bindings)?;
    let mut rows = Vec::new();
    for o in &entry.oracles {
        if !o.in_domain(bindings) {
            let failed: Vec<&str> = o
                .domain
                .iter()
                .filter(|p| !(p.holds)(bindings))
                .map(|p| p.description)
                .collect();
            rows.push(OracleRow {
                quantity: o.quantity,
                expected: "-".into(),
                computed: "-".into(),
                abs_err: None,
                rel_err: None,
                pass: None,
                note: format!("outside domain: {}", failed.join(", ")),
            });
            continue;
        }
        let row = match o.expected {
            Expected::Equal(f) | Expected::AtMost(f) => {
                let exp = f(bindings);
                let at_most = matches!(o.expected, Expected::AtMost(_));
                match computed.values.get(&o.quantity) {
                    None => OracleRow {
                        quantity: o.quantity,
                        expected: format!("{exp}"),
                        computed: "-".into(),
                        abs_err: None,
                        rel_err: None,
                        pass: None,
                        note: "not computed".into(),
                    },
                    Some(&c) => {
                        let err = if at_most { (c - exp).max(0.0) } else { (c - exp).abs() };
                        let rel = if exp != 0.0 { err / exp.abs() } else { err };
                        let bound = tol.abs.max(tol.rel * exp.abs());
                        OracleRow {
                            quantity: o.quantity,
                            expected: if at_most { format!("<= {exp}") } else { format!("{exp}") },
                            computed: format!("{c}"),
                            abs_err: Some(err),
                            rel_err: Some(rel),
                            pass: Some(err <= bound),
                            note: String::new(),
                        }
                    }
                }
            }
            Expected::Verdict(v) => match computed.verdicts.get(&o.quantity) {
                None => OracleRow {
                    quantity: o.quantity,
                    expected: v.to_string(),
                    computed: "-".into(),
                    abs_err: None,
                    rel_err: None,
                    pass: None,
                    note: "not computed".into(),
                },
                Some(&c) => OracleRow {
                    quantity: o.quantity,
                    expected: v.to_string(),
                    computed: c.to_string(),
                    abs_err: None,
                    rel_err: None,
                    pass: Some(c == v),
                    note: String::new(),
                },
            },
        };
        rows.push(row);
    }
    Ok(OracleTable {
        entry: entry.name.to_string(),
        bindings: bindings.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eleven_entries_with_unique_names() {
        let c = catalog();
        assert_eq!(c.len(), 11);
        let mut names: Vec<_> = c.iter().map(|e| e.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 11);
    }

    #[test]
    fn every_default_model_is_valid_and_irreducible_on_average() {
        for e in catalog() {
            let m = e.default_model();
            assert!(m.satisfies_h2(), "{}", e.name);
        }
    }

    #[test]
    fn growth_rate_closed_form_at_unit_coupling() {
        let e = find("three-patch-ab-symmetric").unwrap();
        let b = e.defaults().with("m", 1.0);
        let v = e.expected_value(Quantity::LambdaMInf, &b).unwrap();
        assert!((v - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        let e = find("cycle-ba-2").unwrap();
        assert_eq!(e.expected_value(Quantity::LambdaMInf, &e.defaults().with("m", 7.0)), Some(1.0));
        let e = find("two-patch-worst").unwrap();
        assert_eq!(e.expected_value(Quantity::LambdaInfT, &e.defaults()), Some(-1.5));
    }

    #[test]
    fn worst_direction_middle_band() {
        let e = find("two-patch-worst").unwrap();
        let b = e.defaults().with("m", 3.0);
        assert_eq!(e.expected_value(Quantity::LambdaMInf, &b), Some(0.5 * (2.0 - 1.0 - 3.0)));
    }

    #[test]
    fn domain_violations() {
        let e = find("three-patch-bb-symmetric").unwrap();
        let b = e.bind(&Bindings::new().with("a", -2.0)).unwrap();
        assert!(matches!(e.model(&b), Err(Error::Domain(_))));
        assert!(e.bind(&Bindings::new().with("zz", 1.0)).is_err());
        assert!(matches!(find("nope"), Err(Error::UnknownEntry(_))));
    }

    #[test]
    fn inequality_oracle_and_table() {
        let e = find("three-patch-bb-symmetric").unwrap();
        let b = e.defaults().with("m", 1.0);
        let mut c = ComputedQuantities::default();
        c.set(Quantity::LambdaMT, -0.3).set(Quantity::Chi, 1.0);
        c.set_verdict(Quantity::H3, Verdict::Violated);
        let t = oracle_check(&e, &b, &c, &Tolerances::default()).unwrap();
        assert!(t.all_pass(), "{t}");
        let row = t.rows.iter().find(|r| r.quantity == Quantity::LambdaMT).unwrap();
        assert_eq!(row.pass, Some(true));
        c.set(Quantity::LambdaMT, 0.1);
        let t = oracle_check(&e, &b, &c, &Tolerances::default()).unwrap();
        assert!(!t.all_pass());
    }

    #[test]
    fn degenerate_equal_rates_collapse() {
        let e = find("three-patch-ab-symmetric").unwrap();
        let b = e.bind(&Bindings::new().with("a", 0.3).with("b", 0.3)).unwrap().with("m", 1.0);
        assert!(e.model(&b).is_ok());
        for q in [Quantity::Sigma, Quantity::Chi, Quantity::LambdaZeroT, Quantity::LambdaMInf] {
            assert!((e.expected_value(q, &b).unwrap() - 0.3).abs() < 1e-15);
        }
        assert_eq!(e.expected_verdict(Quantity::H3, &b), None);
        let e = find("two-patch-worst").unwrap();
        let b = e
            .bind(&Bindings::new().with("a1", 0.3).with("b1", 0.3).with("a2", 0.3).with("b2", 0.3))
            .unwrap()
            .with("m", 2.0);
        for q in [Quantity::Sigma, Quantity::Chi, Quantity::LambdaZeroT, Quantity::LambdaMZero, Quantity::LambdaMInf, Quantity::LambdaInfT] {
            let v = e.expected_value(q, &b).unwrap();
            assert!((v - 0.3).abs() < 1e-15, "{q}: {v}");
        }
    }
}
