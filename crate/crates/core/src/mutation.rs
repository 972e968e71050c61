//! Mutation sites, mutant enumeration and single-active-mutant execution.
//!
//! Every comparison, arithmetic step, counter increment and modifier check of
//! the contract model is evaluated through a typed site handle
//! ([`CmpSite`], [`MathSite`], [`StepSite`], [`GuardSite`]). A handle looks up
//! the mutant bound to the current thread; when the bound mutant targets the
//! handle's site the mutated operator is used, otherwise the original one.
//! Binding is per thread, so independent workers can run different mutants
//! concurrently.

use std::cell::{Cell, RefCell};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_traits::{CheckedRem, PrimInt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sites;

/// Integer type usable at an arithmetic site.
pub trait Word: PrimInt + CheckedRem {}

impl<T: PrimInt + CheckedRem> Word for T {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SiteId(pub u16);

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MutantId(pub u32);

impl fmt::Display for MutantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Arithmetic failure of a checked operation. The contract turns these into
/// reverts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum ArithFault {
    #[error("arithmetic overflow")]
    Overflow,
    #[error("arithmetic underflow")]
    Underflow,
    #[error("division by zero")]
    DivZero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SiteKind {
    Comparison,
    Arithmetic,
    Increment,
    Guard,
}

impl SiteKind {
    pub const ALL: [SiteKind; 4] = [
        SiteKind::Comparison,
        SiteKind::Arithmetic,
        SiteKind::Increment,
        SiteKind::Guard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SiteKind::Comparison => "COMPARISON",
            SiteKind::Arithmetic => "ARITHMETIC",
            SiteKind::Increment => "INCREMENT",
            SiteKind::Guard => "GUARD",
        }
    }
}

impl fmt::Display for SiteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SiteKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SiteKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown site kind `{s}`"))
    }
}

/// The six mutation operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Operator {
    ConditionBoundary,
    ConditionNegation,
    MathInversion,
    IncrementsInversion,
    IncrementsMirror,
    ModifierRemoval,
}

impl Operator {
    pub const ALL: [Operator; 6] = [
        Operator::ConditionBoundary,
        Operator::ConditionNegation,
        Operator::MathInversion,
        Operator::IncrementsInversion,
        Operator::IncrementsMirror,
        Operator::ModifierRemoval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Operator::ConditionBoundary => "CONDITION_BOUNDARY",
            Operator::ConditionNegation => "CONDITION_NEGATION",
            Operator::MathInversion => "MATH_INVERSION",
            Operator::IncrementsInversion => "INCREMENTS_INVERSION",
            Operator::IncrementsMirror => "INCREMENTS_MIRROR",
            Operator::ModifierRemoval => "MODIFIER_REMOVAL",
        }
    }

    /// Site kind this operator applies to.
    pub fn site_kind(self) -> SiteKind {
        match self {
            Operator::ConditionBoundary | Operator::ConditionNegation => SiteKind::Comparison,
            Operator::MathInversion => SiteKind::Arithmetic,
            Operator::IncrementsInversion | Operator::IncrementsMirror => SiteKind::Increment,
            Operator::ModifierRemoval => SiteKind::Guard,
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Operator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Operator::ALL
            .into_iter()
            .find(|o| o.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown mutation operator `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn eval<T: Ord + ?Sized>(self, lhs: &T, rhs: &T) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
        }
    }

    /// Inclusive/exclusive counterpart. Equality operators have none.
    pub const fn boundary(self) -> Option<CmpOp> {
        match self {
            CmpOp::Lt => Some(CmpOp::Le),
            CmpOp::Le => Some(CmpOp::Lt),
            CmpOp::Gt => Some(CmpOp::Ge),
            CmpOp::Ge => Some(CmpOp::Gt),
            CmpOp::Eq | CmpOp::Ne => None,
        }
    }

    pub const fn negation(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CmpOp::Lt => "LT",
            CmpOp::Le => "LE",
            CmpOp::Gt => "GT",
            CmpOp::Ge => "GE",
            CmpOp::Eq => "EQ",
            CmpOp::Ne => "NE",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MathOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl MathOp {
    /// ADD<->SUB, MUL<->DIV. REM has no inverse.
    pub const fn inverse(self) -> Option<MathOp> {
        match self {
            MathOp::Add => Some(MathOp::Sub),
            MathOp::Sub => Some(MathOp::Add),
            MathOp::Mul => Some(MathOp::Div),
            MathOp::Div => Some(MathOp::Mul),
            MathOp::Rem => None,
        }
    }

    pub fn apply<T: Word>(self, lhs: T, rhs: T) -> Result<T, ArithFault> {
        match self {
            MathOp::Add => lhs.checked_add(&rhs).ok_or(ArithFault::Overflow),
            MathOp::Sub => lhs.checked_sub(&rhs).ok_or(ArithFault::Underflow),
            MathOp::Mul => lhs.checked_mul(&rhs).ok_or(ArithFault::Overflow),
            MathOp::Div => lhs.checked_div(&rhs).ok_or(ArithFault::DivZero),
            MathOp::Rem => lhs.checked_rem(&rhs).ok_or(ArithFault::DivZero),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MathOp::Add => "ADD",
            MathOp::Sub => "SUB",
            MathOp::Mul => "MUL",
            MathOp::Div => "DIV",
            MathOp::Rem => "MOD",
        }
    }
}

/// Compound assignment of a counter or per-address ledger entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StepOp {
    /// `x += d`
    AddAssign,
    /// `x -= d`
    SubAssign,
    /// `x = d`, the mirror of `x += d` (the `=+` misparse)
    Assign,
}

impl StepOp {
    pub const fn inverse(self) -> Option<StepOp> {
        match self {
            StepOp::AddAssign => Some(StepOp::SubAssign),
            StepOp::SubAssign => Some(StepOp::AddAssign),
            StepOp::Assign => None,
        }
    }

    pub const fn mirror(self) -> Option<StepOp> {
        match self {
            StepOp::AddAssign | StepOp::SubAssign => Some(StepOp::Assign),
            StepOp::Assign => None,
        }
    }

    pub fn apply<T: Word>(self, current: T, delta: T) -> Result<T, ArithFault> {
        match self {
            StepOp::AddAssign => current.checked_add(&delta).ok_or(ArithFault::Overflow),
            StepOp::SubAssign => current.checked_sub(&delta).ok_or(ArithFault::Underflow),
            StepOp::Assign => Ok(delta),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StepOp::AddAssign => "ADD_ASSIGN",
            StepOp::SubAssign => "SUB_ASSIGN",
            StepOp::Assign => "ASSIGN",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GuardOp {
    Enforced,
    Removed,
}

/// Operator evaluated at a site, original or mutated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "op", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SiteOp {
    Cmp(CmpOp),
    Math(MathOp),
    Step(StepOp),
    Guard(GuardOp),
}

impl SiteOp {
    pub const fn kind(self) -> SiteKind {
        match self {
            SiteOp::Cmp(_) => SiteKind::Comparison,
            SiteOp::Math(_) => SiteKind::Arithmetic,
            SiteOp::Step(_) => SiteKind::Increment,
            SiteOp::Guard(_) => SiteKind::Guard,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SiteOp::Cmp(op) => op.name(),
            SiteOp::Math(op) => op.name(),
            SiteOp::Step(op) => op.name(),
            SiteOp::Guard(GuardOp::Enforced) => "GUARD",
            SiteOp::Guard(GuardOp::Removed) => "NO_GUARD",
        }
    }

    /// Variants produced by the six operators, in operator order.
    pub fn variants(self) -> Vec<(Operator, SiteOp)> {
        match self {
            SiteOp::Cmp(op) => {
                let mut out = Vec::with_capacity(2);
                if let Some(b) = op.boundary() {
                    out.push((Operator::ConditionBoundary, SiteOp::Cmp(b)));
                }
                out.push((Operator::ConditionNegation, SiteOp::Cmp(op.negation())));
                out
            }
            SiteOp::Math(op) => op
                .inverse()
                .map(|inv| (Operator::MathInversion, SiteOp::Math(inv)))
                .into_iter()
                .collect(),
            SiteOp::Step(op) => op
                .inverse()
                .map(|inv| (Operator::IncrementsInversion, SiteOp::Step(inv)))
                .into_iter()
                .chain(
                    op.mirror()
                        .map(|m| (Operator::IncrementsMirror, SiteOp::Step(m))),
                )
                .collect(),
            SiteOp::Guard(GuardOp::Enforced) => {
                vec![(Operator::ModifierRemoval, SiteOp::Guard(GuardOp::Removed))]
            }
            SiteOp::Guard(GuardOp::Removed) => Vec::new(),
        }
    }
}

impl fmt::Display for SiteOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Static description of one instrumented site.
#[derive(Clone, Copy, Debug)]
pub struct SiteSpec {
    pub label: &'static str,
    pub op: SiteOp,
    /// Operators known to be semantics-preserving at this site.
    pub equivalent: &'static [Operator],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationSite {
    pub site_id: SiteId,
    pub kind: SiteKind,
    pub original_op: SiteOp,
    pub label: String,
    #[serde(default)]
    pub equivalent: Vec<Operator>,
}

impl MutationSite {
    pub fn new(site_id: SiteId, original_op: SiteOp, label: impl Into<String>) -> Self {
        Self {
            site_id,
            kind: original_op.kind(),
            original_op,
            label: label.into(),
            equivalent: Vec::new(),
        }
    }
}

/// Ordered set of mutation sites.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SiteRegistry {
    sites: Vec<MutationSite>,
}

impl SiteRegistry {
    /// Sites instrumented in the contract model.
    pub fn contract() -> Self {
        let sites = sites::TABLE
            .iter()
            .enumerate()
            .map(|(i, spec)| MutationSite {
                site_id: SiteId(i as u16),
                kind: spec.op.kind(),
                original_op: spec.op,
                label: spec.label.to_string(),
                equivalent: spec.equivalent.to_vec(),
            })
            .collect();
        Self { sites }
    }

    pub fn from_sites(sites: Vec<MutationSite>) -> Self {
        Self { sites }
    }

    pub fn sites(&self) -> &[MutationSite] {
        &self.sites
    }

    pub fn get(&self, id: SiteId) -> Option<&MutationSite> {
        self.sites.iter().find(|s| s.site_id == id)
    }

    pub fn by_label(&self, label: &str) -> Option<&MutationSite> {
        self.sites.iter().find(|s| s.label == label)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }
}

/// One operator variant applied to one site.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutant {
    pub mutant_id: MutantId,
    pub site: SiteId,
    pub label: String,
    pub operator: Operator,
    pub original_op: SiteOp,
    pub mutated_op: SiteOp,
    pub equivalent_hint: bool,
}

/// Deterministic mutant census: sites in registry order, operators in
/// operator order within a site.
pub fn enumerate_mutants(registry: &SiteRegistry) -> Vec<Mutant> {
    let mut out = Vec::new();
    for site in registry.sites() {
        for (operator, mutated_op) in site.original_op.variants() {
            out.push(Mutant {
                mutant_id: MutantId(out.len() as u32),
                site: site.site_id,
                label: site.label.clone(),
                operator,
                original_op: site.original_op,
                mutated_op,
                equivalent_hint: site.equivalent.contains(&operator),
            });
        }
    }
    out
}

/// Mutants of the contract model.
pub fn contract_mutants() -> Vec<Mutant> {
    enumerate_mutants(&SiteRegistry::contract())
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MutationError {
    #[error("mutant on site {active} is already active in this execution context")]
    AlreadyActive { active: SiteId },
}

thread_local! {
    static ACTIVE: Cell<Option<(SiteId, SiteOp)>> = const { Cell::new(None) };
    static COVERAGE: RefCell<Option<BTreeSet<SiteId>>> = const { RefCell::new(None) };
}

struct ActivationGuard;

impl Drop for ActivationGuard {
    fn drop(&mut self) {
        ACTIVE.with(|a| a.set(None));
    }
}

/// Runs `f` with `mutant` bound to the current thread. `None` runs the
/// original program. The binding is released when `f` returns or unwinds.
pub fn with_active_mutant<R>(
    mutant: Option<&Mutant>,
    f: impl FnOnce() -> R,
) -> Result<R, MutationError> {
    let Some(mutant) = mutant else {
        return Ok(f());
    };
    if let Some((active, _)) = ACTIVE.with(Cell::get) {
        return Err(MutationError::AlreadyActive { active });
    }
    ACTIVE.with(|a| a.set(Some((mutant.site, mutant.mutated_op))));
    let _guard = ActivationGuard;
    Ok(f())
}

/// The mutant site bound to this thread, if any.
pub fn active_site() -> Option<SiteId> {
    ACTIVE.with(Cell::get).map(|(site, _)| site)
}

/// Runs `f` and returns the set of sites it evaluated.
pub fn coverage_trace<R>(f: impl FnOnce() -> R) -> (R, BTreeSet<SiteId>) {
    let outer = COVERAGE.with(|c| c.borrow_mut().replace(BTreeSet::new()));
    let result = f();
    let trace = COVERAGE.with(|c| {
        let mut slot = c.borrow_mut();
        let trace = slot.take().unwrap_or_default();
        *slot = outer.map(|mut o| {
            o.extend(trace.iter().copied());
            o
        });
        trace
    });
    (result, trace)
}

fn resolve(id: SiteId) -> Option<SiteOp> {
    COVERAGE.with(|c| {
        if let Some(set) = c.borrow_mut().as_mut() {
            set.insert(id);
        }
    });
    match ACTIVE.with(Cell::get) {
        Some((site, op)) if site == id => Some(op),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CmpSite {
    pub id: SiteId,
    pub original: CmpOp,
}

impl CmpSite {
    pub const fn site_op(self) -> SiteOp {
        SiteOp::Cmp(self.original)
    }

    pub fn eval<T: Ord>(self, lhs: T, rhs: T) -> bool {
        let op = match resolve(self.id) {
            Some(SiteOp::Cmp(op)) => op,
            _ => self.original,
        };
        op.eval(&lhs, &rhs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MathSite {
    pub id: SiteId,
    pub original: MathOp,
}

impl MathSite {
    pub const fn site_op(self) -> SiteOp {
        SiteOp::Math(self.original)
    }

    pub fn apply<T: Word>(self, lhs: T, rhs: T) -> Result<T, ArithFault> {
        let op = match resolve(self.id) {
            Some(SiteOp::Math(op)) => op,
            _ => self.original,
        };
        op.apply(lhs, rhs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepSite {
    pub id: SiteId,
    pub original: StepOp,
}

impl StepSite {
    pub const fn site_op(self) -> SiteOp {
        SiteOp::Step(self.original)
    }

    pub fn apply<T: Word>(self, current: T, delta: T) -> Result<T, ArithFault> {
        let op = match resolve(self.id) {
            Some(SiteOp::Step(op)) => op,
            _ => self.original,
        };
        op.apply(current, delta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GuardSite {
    pub id: SiteId,
    pub original: GuardOp,
}

impl GuardSite {
    pub const fn site_op(self) -> SiteOp {
        SiteOp::Guard(self.original)
    }

    /// True when the modifier lets execution through. A removed modifier does
    /// not evaluate its predicate.
    pub fn check(self, predicate: impl FnOnce() -> bool) -> bool {
        let op = match resolve(self.id) {
            Some(SiteOp::Guard(op)) => op,
            _ => self.original,
        };
        match op {
            GuardOp::Enforced => predicate(),
            GuardOp::Removed => true,
        }
    }
}
