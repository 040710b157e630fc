//! Batch verification over many instances.
//!
//! With the `parallel` feature the work is spread over the rayon pool;
//! without it the same functions run in a plain loop. Results always come
//! back in input order, so output does not depend on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identities::{
    derive_seed, random_instance, random_shape, verify, IdentityId, IdentityInstance, Reading, Status,
    VerificationReport,
};

/// Largest `r` drawn by the fuzzer.
pub const FUZZ_R_MAX: u32 = 4;

/// Number of shapes tried for one fuzz case before giving up.
const SHAPE_ATTEMPTS: u64 = 32;

/// Maps `f` over `items`, in parallel when the feature is on.
pub fn map_ordered<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

pub fn verify_batch(instances: &[IdentityInstance]) -> Vec<VerificationReport> {
    map_ordered(instances, verify)
}

pub fn verify_batch_sequential(instances: &[IdentityInstance]) -> Vec<VerificationReport> {
    instances.iter().map(verify).collect()
}

/// One fuzz case: the `index`-th instance of `id` under `seed`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FuzzCase {
    pub id: IdentityId,
    pub index: u64,
}

impl FuzzCase {
    pub fn seed(&self, seed: u64) -> u64 {
        derive_seed(seed, self.id.number() as u64, self.index)
    }
}

pub fn fuzz_cases(ids: &[IdentityId], count: u64) -> Vec<FuzzCase> {
    ids.iter().flat_map(|&id| (0..count).map(move |index| FuzzCase { id, index })).collect()
}

/// Draws a shape and then a pole-free instance for a case. Shapes that
/// admit no pole-free instance are replaced by fresh ones.
pub fn generate(case: FuzzCase, seed: u64, cap: u32, reading: Reading) -> Result<IdentityInstance> {
    let base = case.seed(seed);
    let mut last = Error::ExhaustedRetries(0);
    for attempt in 0..SHAPE_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base, 0, attempt));
        let shape = random_shape(&mut rng, case.id);
        match random_instance(derive_seed(base, 1, attempt), case.id, &shape, FUZZ_R_MAX, cap) {
            Ok(inst) => return Ok(inst.with_reading(reading)),
            Err(e @ Error::ExhaustedRetries(_)) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CaseOutcome {
    pub id: IdentityId,
    pub index: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<IdentityInstance>,
    pub report: VerificationReport,
}

pub fn run_case(case: FuzzCase, seed: u64, cap: u32, reading: Reading) -> CaseOutcome {
    match generate(case, seed, cap, reading) {
        Ok(inst) => {
            let report = verify(&inst);
            CaseOutcome { id: case.id, index: case.index, instance: Some(inst), report }
        }
        Err(e) => CaseOutcome {
            id: case.id,
            index: case.index,
            instance: None,
            report: VerificationReport::from_error(&e, cap),
        },
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FuzzRow {
    pub id: Option<IdentityId>,
    pub total: u64,
    pub pass: u64,
    pub fail: u64,
    pub pole: u64,
    pub not_applicable: u64,
}

impl FuzzRow {
    fn record(&mut self, status: Status) {
        self.total += 1;
        match status {
            Status::Pass => self.pass += 1,
            Status::Fail => self.fail += 1,
            Status::Pole => self.pole += 1,
            Status::NotApplicable => self.not_applicable += 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FuzzSummary {
    pub seed: u64,
    pub count: u64,
    pub cap: u32,
    pub reading: Reading,
    pub rows: Vec<FuzzRow>,
    /// Every case that did not pass, in (id, index) order.
    pub failures: Vec<CaseOutcome>,
}

impl FuzzSummary {
    pub fn any_fail(&self) -> bool {
        self.rows.iter().any(|r| r.fail > 0)
    }
}

pub fn summarize(seed: u64, count: u64, cap: u32, reading: Reading, ids: &[IdentityId], outcomes: Vec<CaseOutcome>) -> FuzzSummary {
    let mut rows: Vec<FuzzRow> = ids.iter().map(|&id| FuzzRow { id: Some(id), ..FuzzRow::default() }).collect();
    let mut failures = Vec::new();
    for o in outcomes {
        if let Some(row) = rows.iter_mut().find(|r| r.id == Some(o.id)) {
            row.record(o.report.status);
        }
        if o.report.status != Status::Pass {
            failures.push(o);
        }
    }
    FuzzSummary { seed, count, cap, reading, rows, failures }
}

/// `count` random instances per id, verified and tallied.
pub fn fuzz(seed: u64, count: u64, cap: u32, reading: Reading, ids: &[IdentityId]) -> FuzzSummary {
    let cases = fuzz_cases(ids, count);
    let outcomes = map_ordered(&cases, |&c| run_case(c, seed, cap, reading));
    summarize(seed, count, cap, reading, ids, outcomes)
}

/// Same as [`fuzz`] without any thread pool.
pub fn fuzz_sequential(seed: u64, count: u64, cap: u32, reading: Reading, ids: &[IdentityId]) -> FuzzSummary {
    let outcomes = fuzz_cases(ids, count).into_iter().map(|c| run_case(c, seed, cap, reading)).collect();
    summarize(seed, count, cap, reading, ids, outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_matches_sequential() {
        let ids = [IdentityId::Eq5, IdentityId::Eq12, IdentityId::Eq20];
        assert_eq!(fuzz(11, 4, 6, Reading::Corrected, &ids), fuzz_sequential(11, 4, 6, Reading::Corrected, &ids));
    }

    #[test]
    fn case_order_is_id_major() {
        let cases = fuzz_cases(&[IdentityId::Eq7, IdentityId::Eq5], 2);
        let got: Vec<_> = cases.iter().map(|c| (c.id, c.index)).collect();
        assert_eq!(got, vec![(IdentityId::Eq7, 0), (IdentityId::Eq7, 1), (IdentityId::Eq5, 0), (IdentityId::Eq5, 1)]);
    }
}
