//! Any Raw injection is handled like the canonical garbage literal, which is
//! what lets the enumerator use a single garbage representative.

use mad_lab::adversary::{ActionTemplate, CorruptionSchedule, ProcSet, RoundScript, ScriptedEdge, ScriptedStrategy};
use mad_lab::engine::{execute, FaultType};
use mad_lab::model::{all_bit_vectors, Bit, Value};
use mad_lab::protocols::{AuthCa, GcCa, Madabsm, Protocol, StatCons, WcRound};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn injected<P: Protocol>(p: &P, fault: FaultType, x: &[P::Input], round: usize, lit: Value) -> (Vec<Vec<String>>, String) {
    let mut rounds = vec![RoundScript::default(); round + 1];
    rounds[round].corrupted = ProcSet::EMPTY.with(0);
    for to in 1..p.n() {
        rounds[round].actions.push(ScriptedEdge { from: 0, to, action: ActionTemplate::Literal(lit.clone()) });
    }
    let mut adv = ScriptedStrategy::new(rounds);
    let tr = execute(p, x, &mut adv, fault, CorruptionSchedule::mobile(1), 200).unwrap();
    let states = tr.rounds.iter().map(|r| r.states.clone()).collect();
    (states, format!("{:?}", tr.outputs))
}

fn raw_values(seed: u64) -> Vec<Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..5)
        .map(|_| {
            let len = rng.random_range(0..24);
            Value::Raw((0..len).map(|_| rng.random()).collect())
        })
        .collect()
}

fn all_equivalent<P: Protocol>(p: &P, fault: FaultType, inputs: &[Vec<P::Input>], rounds: usize) {
    for (k, x) in inputs.iter().enumerate() {
        for r in 0..rounds {
            let reference = injected(p, fault, x, r, Value::garbage());
            for raw in raw_values(k as u64 * 97 + r as u64) {
                assert_eq!(injected(p, fault, x, r, raw.clone()), reference, "{} round {r} with {raw}", p.name());
            }
        }
    }
}

#[test]
fn raw_payloads_match_garbage() {
    let bits4 = all_bit_vectors(4);
    all_equivalent(&WcRound::new(4, 1).unwrap(), FaultType::Byzantine, &bits4, 1);
    all_equivalent(&GcCa::new(4, 1).unwrap(), FaultType::Byzantine, &bits4, 2);
    all_equivalent(&AuthCa::new(3, 1).unwrap(), FaultType::AuthByzantine, &all_bit_vectors(3), 4);
    let m = Madabsm::new(3, 1, vec![Value::Bit(Bit::Zero), Value::Bit(Bit::One)]).unwrap();
    let m_inputs: Vec<Vec<Value>> = all_bit_vectors(3).iter().map(|x| x.iter().map(|&b| Value::Bit(b)).collect()).collect();
    all_equivalent(&m, FaultType::AuthByzantine, &m_inputs, 2);
    let sc = StatCons::new(GcCa::new(4, 1).unwrap());
    let rounds = sc.rounds().unwrap();
    all_equivalent(&sc, FaultType::Byzantine, &bits4[..4], rounds);
}
