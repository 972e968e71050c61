//! Acceptance criteria 1 to 8. Prints one line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mtlab::config::{beneficiary, donor, organizer, CampaignParams, TestEnv};
use mtlab::contract::{Campaign, CampaignConfig, Phase};
use mtlab::harness::{run_baseline, run_matrix, KillMatrix, Outcome};
use mtlab::mutation::{contract_mutants, Operator, SiteRegistry};
use mtlab::relations::{all_mr_ids, targeted_mutant};
use mtlab::types::{Address, Amount, BlockContext};

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn baseline_soundness() -> Check {
    let base = CampaignParams::default();
    let mut envs = TestEnv::sweep(&base, 42);
    envs.push(TestEnv::default());
    let t = Instant::now();
    let report = run_baseline(&envs, &all_mr_ids()).map_err(|e| e.to_string())?;
    let took = t.elapsed();
    if took >= Duration::from_secs(10) {
        return Err(format!("took {took:.2?}"));
    }
    Ok(format!(
        "{} runs over {} envs in {took:.2?}",
        report.runs, report.envs
    ))
}

fn targeted_kills() -> Check {
    let env = TestEnv::default();
    let mut missed = Vec::new();
    for mr in all_mr_ids() {
        let m = targeted_mutant(mr).map_err(|e| e.to_string())?;
        let matrix =
            run_matrix(&[mr], std::slice::from_ref(&m), &env).map_err(|e| e.to_string())?;
        let outcome = matrix.outcome(mr, m.mutant_id);
        if outcome != Some(Outcome::Killed) {
            missed.push(format!("MR{mr} {} {}: {outcome:?}", m.operator, m.label));
        }
    }
    if missed.is_empty() {
        Ok("all 17 targeted mutants killed".into())
    } else {
        Err(missed.join("; "))
    }
}

fn default_matrix() -> KillMatrix {
    run_matrix(&all_mr_ids(), &contract_mutants(), &TestEnv::default()).expect("default matrix")
}

fn operator_coverage(m: &KillMatrix) -> Check {
    let killed = m.killed_distinct();
    let mut missing = Vec::new();
    for op in Operator::ALL {
        let total = m.mutants.iter().filter(|x| x.operator == op).count();
        let k = m
            .mutants
            .iter()
            .filter(|x| x.operator == op && killed.contains(&x.mutant_id))
            .count();
        if total == 0 || k == 0 {
            missing.push(format!("{op} ({k}/{total})"));
        }
    }
    if m.mutants.len() < 100 {
        return Err(format!("only {} mutants", m.mutants.len()));
    }
    if !missing.is_empty() {
        return Err(format!("no kill for {}", missing.join(", ")));
    }
    Ok(format!(
        "{} mutants over {} sites, every operator killed",
        m.mutants.len(),
        SiteRegistry::contract().len()
    ))
}

fn overall_detection() -> Check {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| e.to_string())?;
    let t = Instant::now();
    let m = pool.install(default_matrix);
    let took = t.elapsed();
    let rate = m.overall_detection();
    let line = format!(
        "overall {rate:.4} ({} of {}), single-threaded {took:.2?}",
        m.killed_distinct().len(),
        m.mutants.len()
    );
    if rate >= 0.20 && took < Duration::from_secs(60) {
        Ok(line)
    } else {
        Err(line)
    }
}

fn trend(m: &KillMatrix) -> Check {
    let mut ranked: Vec<(u8, f64)> = m
        .mrs
        .iter()
        .map(|&mr| (mr, m.kill_rate(mr).unwrap_or(-1.0)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let rank = |mr: u8| ranked.iter().position(|r| r.0 == mr).unwrap() + 1;
    let top: Vec<String> = ranked
        .iter()
        .take(4)
        .map(|(mr, r)| format!("MR{mr}={r:.4}"))
        .collect();
    let line = format!(
        "MR1 rank {}, MR2 rank {} [{}]",
        rank(1),
        rank(2),
        top.join(", ")
    );
    if rank(1) <= 3 && rank(2) <= 3 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn random_amount(rng: &mut ChaCha8Rng, min: u128) -> Amount {
    Amount(match rng.gen_range(0..20) {
        0 => 0,
        1 => min.saturating_sub(1),
        2 => u128::MAX - rng.gen_range(0..4u128),
        3 => rng.gen::<u128>() >> rng.gen_range(0..8),
        _ => min + rng.gen_range(0..=4 * min.max(1)),
    })
}

fn fuzz_sequence(seed: u64) -> Result<(usize, Phase), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let orgs: Vec<Address> = (0..rng.gen_range(1..=4)).map(organizer).collect();
    let bens: Vec<Address> = (0..rng.gen_range(1..=4)).map(beneficiary).collect();
    let min = if rng.gen_bool(0.5) { 1 } else { 100 };
    let config = CampaignConfig {
        organizers: orgs.clone(),
        beneficiaries: bens.clone(),
        min_donation: Amount(min),
        start_time: 100,
        duration: rng.gen_range(20..400),
        max_participants: 10,
        max_reward: Amount(rng.gen_range(0..1000)),
    };
    let mut now = 99;
    let mut c = Campaign::deploy(
        config.clone(),
        BlockContext {
            now,
            sender: orgs[0],
        },
    )
    .map_err(|e| format!("deploy rejected: {e:?}"))?;
    let pool: Vec<Address> = orgs
        .iter()
        .chain(&bens)
        .copied()
        .chain((0..3).map(donor))
        .collect();
    let len = rng.gen_range(1..=40);
    let mut accepted = 0;
    let opening = if rng.gen_bool(0.5) {
        orgs.len().min(len)
    } else {
        0
    };
    for step in 0..len {
        match rng.gen_range(0..10) {
            0 => now += rng.gen_range(0..=config.duration),
            1..=3 => now += rng.gen_range(0..=3),
            _ => {}
        }
        if step == 0 && rng.gen_bool(0.8) {
            now = config.start_time;
        }
        let op = if step < opening {
            0
        } else {
            rng.gen_range(0..8)
        };
        // mostly the role the operation expects, sometimes anyone
        let role: &[Address] = match op {
            0 | 3 | 7 => &orgs,
            5 => &bens,
            _ => &pool,
        };
        let sender = if step < opening {
            orgs[step]
        } else if rng.gen_bool(0.8) {
            role[rng.gen_range(0..role.len())]
        } else {
            pool[rng.gen_range(0..pool.len())]
        };
        let ctx = BlockContext { now, sender };
        let before = c.clone();
        let obs = match op {
            0 if step < opening => c.organizer_donate(ctx, Amount(min)),
            0 => c.organizer_donate(ctx, random_amount(&mut rng, min)),
            1 => c.donate_uniform(ctx, random_amount(&mut rng, min)),
            2 => {
                let mut shares = BTreeMap::new();
                for &b in &bens {
                    if rng.gen_bool(0.7) {
                        shares.insert(b, random_amount(&mut rng, min));
                    }
                }
                c.donate_split(ctx, &shares)
            }
            3 => c.add_milestone(
                ctx,
                random_amount(&mut rng, min),
                random_amount(&mut rng, 1),
            ),
            4 => c.end_campaign(ctx),
            5 => c.withdraw(ctx),
            6 => c.refund_unreached(ctx),
            _ => c.close_contract(ctx),
        };
        accepted += obs.last_tx_result.is_accepted() as usize;
        if !obs.last_tx_result.is_accepted() && c.storage() != before.storage() {
            return Err(format!(
                "seed {seed} step {step}: reverted transaction changed storage"
            ));
        }
        let s = c.storage();
        if Some(s.inflow_total) != s.balance.0.checked_add(s.outflow_total.0).map(Amount) {
            return Err(format!(
                "seed {seed} step {step}: inflow {} != balance {} + outflow {}",
                s.inflow_total.0, s.balance.0, s.outflow_total.0
            ));
        }
        if !c.is_conserved() {
            return Err(format!("seed {seed} step {step}: audit {:?}", c.audit()));
        }
    }
    Ok((accepted, c.phase()))
}

fn conservation_fuzz() -> Check {
    let results: Vec<_> = (0..1000u64).map(fuzz_sequence).collect();
    let failures: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    let accepted: usize = results.iter().flatten().map(|r| r.0).sum();
    let past_donation = results
        .iter()
        .flatten()
        .filter(|r| r.1 >= Phase::Ended)
        .count();
    match failures.first() {
        None => Ok(format!(
            "1000 sequences, {accepted} accepted transactions, {past_donation} reached ENDED or CLOSED, no breach"
        )),
        Some(first) => Err(format!("{} failing sequences, first: {first}", failures.len())),
    }
}

fn determinism() -> Check {
    let dir = std::env::temp_dir().join(format!("mtlab-acceptance-{}", std::process::id()));
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_mtlab"))
            .args(["run", "--seed", "42", "--format", "json", "--out"])
            .arg(&out)
            .env_remove("MTLAB_SEED")
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("run {run} exited with {}", status.status));
        }
        outputs.push(std::fs::read(out.join("kill_matrix.json")).map_err(|e| e.to_string())?);
    }
    let _ = std::fs::remove_dir_all(&dir);
    if outputs[0] == outputs[1] {
        Ok(format!(
            "two runs byte-identical ({} bytes)",
            outputs[0].len()
        ))
    } else {
        Err("kill_matrix.json differs between runs".into())
    }
}

fn classification_fidelity() -> Check {
    let fixture = contract_mutants()
        .into_iter()
        .find(|m| {
            m.label == "deploy::organizers_non_empty" && m.operator == Operator::ConditionNegation
        })
        .ok_or("fixture mutant missing")?;
    let m = run_matrix(
        &all_mr_ids(),
        std::slice::from_ref(&fixture),
        &TestEnv::default(),
    )
    .map_err(|e| e.to_string())?;
    let report = mtlab::report::MatrixReport::from_matrix(&m);
    for row in &report.per_mr {
        if (row.killed, row.alive, row.error) != (0, 0, 1) || row.rate.is_some() {
            return Err(format!("MR{} row {:?}", row.mr, row));
        }
    }
    let csv = report.per_mr_csv().map_err(|e| e.to_string())?;
    if !csv.lines().skip(1).all(|l| l.ends_with(",0,0,1,1,n/a")) {
        return Err("per_mr.csv does not show the ERROR column with rate n/a".into());
    }
    Ok(format!(
        "fixture {} is ERROR for all 17 relations, rate n/a",
        fixture.mutant_id
    ))
}

fn main() -> ExitCode {
    let matrix = default_matrix();
    let criteria: Vec<Criterion> = vec![
        ("1 baseline soundness", Box::new(baseline_soundness)),
        ("2 targeted-kill completeness", Box::new(targeted_kills)),
        (
            "3 operator coverage",
            Box::new(|| operator_coverage(&matrix)),
        ),
        ("4 overall detection", Box::new(overall_detection)),
        ("5 trend", Box::new(|| trend(&matrix))),
        ("6 conservation fuzz", Box::new(conservation_fuzz)),
        ("7 determinism", Box::new(determinism)),
        (
            "8 classification fidelity",
            Box::new(classification_fidelity),
        ),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        match check() {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({detail})");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
