//! Weak consensus (one round) and the two-round graded consensus built on it,
//! against a mobile Byzantine adversary with `3t < n`.

use crate::model::{check_commit_adopt, Bit, CAOutput, Clause, ProcessorId, RoundNumber, TaskVerdict, Value};

use super::{broadcast, check_size, more_than_two_thirds, Protocol, ProtocolError, RoundDomain};

fn bits_domain() -> RoundDomain {
    RoundDomain::Scalar(vec![Value::Bit(Bit::Zero), Value::Bit(Bit::One)])
}

fn tally(incoming: &[Option<Value>]) -> [usize; 2] {
    let mut c = [0; 2];
    for b in incoming.iter().flatten().filter_map(Value::as_bit) {
        c[b.index()] += 1;
    }
    c
}

/// Weak-consensus output for round-1 tallies `[|P0|, |P1|]`: `Bit` or `Bot`.
pub fn wc_output(n: usize, counts: [usize; 2]) -> Value {
    if more_than_two_thirds(counts[0], n) {
        Value::Bit(Bit::Zero)
    } else if more_than_two_thirds(counts[1], n) {
        Value::Bit(Bit::One)
    } else {
        Value::Bot
    }
}

/// Graded-consensus threshold on the chosen bit's second-round count.
pub fn gc_threshold_met(count: usize, n: usize) -> bool {
    more_than_two_thirds(count, n)
}

/// Weak-consistency and persistency checks over one round of `y` outputs.
fn wc_findings(inputs: &[Bit], ys: &[Value]) -> Vec<&'static str> {
    let mut failed = Vec::new();
    let mut non_bot = ys.iter().filter_map(Value::as_bit);
    if let Some(first) = non_bot.next() {
        if non_bot.any(|b| b != first) {
            failed.push("wc_weak_consistency");
        }
    }
    if let Some(&v) = inputs.first() {
        if inputs.iter().all(|&x| x == v) && ys.iter().any(|y| *y != Value::Bit(v)) {
            failed.push("wc_persistency");
        }
    }
    failed
}

/// The weak-consensus round on its own.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WcRound {
    n: usize,
    t: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WcState {
    pub input: Bit,
    pub y: Option<Value>,
}

impl WcRound {
    pub fn new(n: usize, t: usize) -> Result<Self, ProtocolError> {
        check_size(n, t)?;
        Ok(WcRound { n, t })
    }
}

impl Protocol for WcRound {
    type Input = Bit;
    type State = WcState;
    type Output = Value;

    fn name(&self) -> String {
        "wc".into()
    }

    fn n(&self) -> usize {
        self.n
    }

    fn rounds(&self) -> Option<usize> {
        Some(1)
    }

    fn domain(&self, _step: usize) -> RoundDomain {
        bits_domain()
    }

    fn init(&self, _me: ProcessorId, input: &Bit) -> WcState {
        WcState { input: *input, y: None }
    }

    fn send(&self, state: &WcState, _round: RoundNumber) -> Vec<Value> {
        broadcast(self.n, Value::Bit(state.input))
    }

    fn receive(&self, state: &mut WcState, _round: RoundNumber, incoming: &[Option<Value>]) {
        if state.y.is_none() {
            state.y = Some(wc_output(self.n, tally(incoming)));
        }
    }

    fn output(&self, state: &WcState) -> Option<Value> {
        state.y.clone()
    }

    /// Weak consistency (one non-⊥ value) and persistency; only promised for `3t < n`.
    fn verdict(&self, inputs: &[Bit], outputs: &[Value]) -> TaskVerdict {
        if 3 * self.t >= self.n {
            return TaskVerdict::ok();
        }
        let failed = wc_findings(inputs, outputs);
        TaskVerdict::from_findings(failed.iter().map(|f| {
            let clause = if *f == "wc_persistency" { Clause::Clause1 } else { Clause::Consistency };
            (clause, None)
        }))
    }
}

/// Graded consensus: weak consensus, then a grading round on the `y` values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GcCa {
    n: usize,
    t: usize,
}

impl GcCa {
    /// Builds the machine for any `t < n`; running with `3t >= n` is allowed
    /// (see [`GcCa::beyond_bound`]).
    pub fn new(n: usize, t: usize) -> Result<Self, ProtocolError> {
        check_size(n, t)?;
        Ok(GcCa { n, t })
    }

    pub fn beyond_bound(&self) -> bool {
        3 * self.t >= self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GcState {
    pub input: Bit,
    step: u8,
    /// Weak-consensus output after round 1 (`Bit` or `Bot`).
    pub y: Option<Value>,
    pub result: Option<CAOutput>,
}

impl Protocol for GcCa {
    type Input = Bit;
    type State = GcState;
    type Output = CAOutput;

    fn name(&self) -> String {
        "gc_ca".into()
    }

    fn n(&self) -> usize {
        self.n
    }

    fn rounds(&self) -> Option<usize> {
        Some(2)
    }

    fn domain(&self, step: usize) -> RoundDomain {
        match step {
            0 => bits_domain(),
            _ => RoundDomain::Scalar(vec![Value::Bit(Bit::Zero), Value::Bit(Bit::One), Value::Bot]),
        }
    }

    fn init(&self, _me: ProcessorId, input: &Bit) -> GcState {
        GcState { input: *input, step: 0, y: None, result: None }
    }

    fn send(&self, state: &GcState, _round: RoundNumber) -> Vec<Value> {
        match state.step {
            0 => broadcast(self.n, Value::Bit(state.input)),
            _ => broadcast(self.n, state.y.clone().unwrap_or(Value::Bot)),
        }
    }

    fn receive(&self, state: &mut GcState, _round: RoundNumber, incoming: &[Option<Value>]) {
        match state.step {
            0 => state.y = Some(wc_output(self.n, tally(incoming))),
            1 => {
                let c = tally(incoming);
                let b = if c[0] >= c[1] { Bit::Zero } else { Bit::One };
                state.result = Some(if gc_threshold_met(c[b.index()], self.n) {
                    CAOutput::commit(b)
                } else {
                    CAOutput::adopt(b)
                });
            }
            _ => {}
        }
        state.step = state.step.saturating_add(1);
    }

    fn output(&self, state: &GcState) -> Option<CAOutput> {
        state.result
    }

    fn verdict(&self, inputs: &[Bit], outputs: &[CAOutput]) -> TaskVerdict {
        check_commit_adopt(inputs, outputs).expect("engine supplies n outputs")
    }

    /// Weak-consensus properties of the first round; promised for `3t < n`.
    fn audit(&self, inputs: &[Bit], states: &[GcState]) -> Vec<&'static str> {
        let Some(ys) = states.iter().map(|s| s.y.clone()).collect::<Option<Vec<_>>>() else {
            return vec!["wc_termination"];
        };
        if self.beyond_bound() {
            return Vec::new();
        }
        wc_findings(inputs, &ys)
    }
}
