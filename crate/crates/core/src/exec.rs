//! Operational semantics: a deterministic round-robin scheduler over logical
//! threads, depth-first branching at measurements and probabilistic choices,
//! and merging of identical final worlds into an exact distribution.

use crate::channel::{self, ChannelKind, ChannelState, Progress};
use crate::measure::measure_subset;
use crate::operator::{embed, replace_bits};
use crate::program::{PartyId, Program};
use crate::state::{Amplitude, LinalgError, StateVector};
use crate::world::{RuntimeError, World};

/// An exact probability distribution over final worlds.
#[derive(Debug, Clone)]
pub struct Distribution {
    branches: Vec<(f64, World)>,
}

impl Distribution {
    /// Merges equal worlds (probabilities summed, first-seen order kept) and
    /// validates that probabilities are positive and total 1 within 1e-9.
    pub fn from_branches(outcomes: Vec<(f64, World)>) -> Result<Self, RuntimeError> {
        let mut branches: Vec<(f64, World)> = Vec::new();
        for (prob, world) in outcomes {
            if prob <= 0.0 {
                return Err(RuntimeError::BadProbability { prob });
            }
            match branches.iter_mut().find(|(_, w)| w.merges_with(&world)) {
                Some((p, _)) => *p += prob,
                None => branches.push((prob, world)),
            }
        }
        let total: f64 = branches.iter().map(|(p, _)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(RuntimeError::ProbabilityLeak { total });
        }
        Ok(Distribution { branches })
    }

    pub fn branches(&self) -> &[(f64, World)] {
        &self.branches
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.branches.iter().map(|(p, _)| p).sum()
    }
}

/// Fired after every primitive step; branching statements fire once per
/// resulting branch.
pub struct StepEvent<'a> {
    /// Surface rendering of the statement that executed.
    pub statement: String,
    /// Party annotation of that statement, if any.
    pub party: Option<PartyId>,
    /// The branch's accumulated probability.
    pub weight: f64,
    /// The world immediately after the step.
    pub world: &'a World,
}

#[derive(Debug, Clone)]
enum Task {
    Run(Program),
    /// Scope-exit marker for a channel declaration.
    CloseChan(String),
}

#[derive(Debug, Clone)]
struct Thread {
    /// Statement stack; the last element runs next.
    tasks: Vec<Task>,
    parent: Option<usize>,
    /// Number of live child threads (a forked thread resumes when it hits 0).
    waiting: usize,
    done: bool,
}

#[derive(Debug, Clone)]
struct Machine {
    weight: f64,
    world: World,
    threads: Vec<Thread>,
    /// Round-robin position: the next scan starts at this thread.
    turn: usize,
}

enum Stepped {
    InPlace,
    Forked(Vec<Machine>),
}

/// Short label for step events and deadlock reports: the head primitive of
/// `p`, or a one-line form of a structured statement.
fn event_label(p: &Program) -> String {
    match p {
        Program::Seq(a, _) => event_label(a),
        Program::Par(..) => "par".to_string(),
        Program::If { party, cond, .. } => format!("{party}: if {cond}"),
        Program::ProbIf { prob, .. } => format!("prob {prob}"),
        Program::DeclChan {
            name,
            kind,
            writer,
            reader,
            ..
        } => format!("chan {name} {kind} {writer} -> {reader}"),
        Program::DeclQChan {
            name,
            writer,
            reader,
            ..
        } => format!("qchan {name} {writer} -> {reader}"),
        other => other.to_string(),
    }
}

fn task_label(t: &Task) -> String {
    match t {
        Task::Run(p) => event_label(p),
        Task::CloseChan(name) => format!("end chan {name}"),
    }
}

fn check_owned(
    world: &World,
    party: &PartyId,
    qubits: &[usize],
    statement: &str,
) -> Result<(), RuntimeError> {
    let n = world.qubits();
    for &q in qubits {
        if q >= n {
            return Err(LinalgError::QubitOutOfRange {
                index: q,
                qubits: n,
            }
            .into());
        }
        let owner = world.owner_of(q);
        if owner != party {
            return Err(RuntimeError::Ownership {
                statement: statement.into(),
                qubit: q,
                owner: owner.to_string(),
                party: party.to_string(),
            });
        }
    }
    Ok(())
}

impl Machine {
    fn initial(program: &Program, world: &World) -> Machine {
        Machine {
            weight: 1.0,
            world: world.clone(),
            threads: vec![Thread {
                tasks: vec![Task::Run(program.clone())],
                parent: None,
                waiting: 0,
                done: false,
            }],
            turn: 0,
        }
    }

    /// Marks exhausted threads done and wakes their parents, to a fixpoint.
    fn settle(&mut self) {
        loop {
            let mut changed = false;
            for i in 0..self.threads.len() {
                let ready = !self.threads[i].done
                    && self.threads[i].waiting == 0
                    && self.threads[i].tasks.is_empty();
                if ready {
                    self.threads[i].done = true;
                    if let Some(p) = self.threads[i].parent {
                        self.threads[p].waiting -= 1;
                    }
                    changed = true;
                }
            }
            if !changed {
                return;
            }
        }
    }

    fn complete(&self) -> bool {
        self.threads.iter().all(|t| t.done)
    }

    /// Expands `Seq` heads in place; expansion is structural and free.
    fn expand_head(&mut self, idx: usize) {
        loop {
            match self.threads[idx].tasks.last() {
                Some(Task::Run(Program::Seq(..))) => {
                    let Some(Task::Run(Program::Seq(a, b))) = self.threads[idx].tasks.pop() else {
                        unreachable!("matched above");
                    };
                    self.threads[idx].tasks.push(Task::Run(*b));
                    self.threads[idx].tasks.push(Task::Run(*a));
                }
                _ => return,
            }
        }
    }

    /// True iff the thread's head statement is a receive that would block
    /// right now. Malformed receives (unknown channel, wrong endpoint or
    /// kind) count as runnable so that executing them reports the error.
    fn head_blocked(&self, idx: usize) -> bool {
        let head = match self.threads[idx].tasks.last() {
            Some(Task::Run(p)) => p,
            _ => return false,
        };
        let (name, party, classical) = match head {
            Program::RecvC { party, channel, .. } => (channel, party, true),
            Program::RecvQ { party, channel, .. } => (channel, party, false),
            _ => return false,
        };
        match self.world.channels.get(name) {
            Some(ch) => {
                ch.kind.is_classical() == classical
                    && &ch.reader == party
                    && ch.is_empty_for_reader()
            }
            None => false,
        }
    }

    /// Picks the next runnable thread (round-robin from `turn`) and executes
    /// one primitive step. `Ok(None)` means no thread could run.
    fn pick_and_execute(
        &mut self,
    ) -> Result<Option<(Stepped, String, Option<PartyId>)>, RuntimeError> {
        let count = self.threads.len();
        for offset in 0..count {
            let idx = (self.turn + offset) % count;
            if self.threads[idx].done
                || self.threads[idx].waiting > 0
                || self.threads[idx].tasks.is_empty()
            {
                continue;
            }
            self.expand_head(idx);
            if self.head_blocked(idx) {
                continue;
            }
            return self.execute_thread(idx).map(Some);
        }
        Ok(None)
    }

    /// Formats the statements every blocked thread is stuck on.
    fn blocked_report(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        for t in &self.threads {
            if !t.done && t.waiting == 0 {
                if let Some(task) = t.tasks.last() {
                    parts.push(task_label(task));
                }
            }
        }
        if parts.is_empty() {
            "(no statements pending)".to_string()
        } else {
            parts.join("; ")
        }
    }

    fn execute_thread(
        &mut self,
        idx: usize,
    ) -> Result<(Stepped, String, Option<PartyId>), RuntimeError> {
        let task = self.threads[idx].tasks.pop().expect("runnable thread");
        self.turn = idx + 1;
        let label = task_label(&task);
        let program = match task {
            Task::CloseChan(name) => {
                channel::remove(&mut self.world, &name);
                return Ok((Stepped::InPlace, label, None));
            }
            Task::Run(p) => p,
        };
        let party = program.party().cloned();
        let stepped = match program {
            Program::Ok => Stepped::InPlace,
            Program::Assign { var, expr, .. } => {
                let value = crate::expr::eval_expr(&expr, &self.world.classical)?;
                self.world.classical.insert(var, value);
                Stepped::InPlace
            }
            Program::InitQubits { party, qubits } => {
                check_owned(&self.world, &party, &qubits, &label)?;
                let branches = measure_subset(&self.world.state, &qubits)?;
                let n = self.world.qubits();
                let forks = branches
                    .into_iter()
                    .map(|b| {
                        let mut amps = vec![Amplitude::ZERO; 1 << n];
                        for x in 0..1usize << n {
                            let a = b.post_state.amplitude(x);
                            if a != Amplitude::ZERO {
                                amps[replace_bits(x, 0, &qubits, n)] = a;
                            }
                        }
                        let mut fork = self.clone();
                        fork.weight *= b.prob;
                        fork.world.state =
                            StateVector::new(n, amps).expect("reset permutes amplitudes");
                        fork
                    })
                    .collect();
                Stepped::Forked(forks)
            }
            Program::Apply {
                party,
                gate,
                targets,
            } => {
                check_owned(&self.world, &party, &targets, &label)?;
                let op = gate.to_operator();
                if op.qubits() != targets.len() {
                    return Err(LinalgError::TargetArity {
                        targets: targets.len(),
                        arity: op.qubits(),
                    }
                    .into());
                }
                let placed = embed(&op, &targets, self.world.qubits())?;
                self.world.state = placed.apply(&self.world.state)?;
                Stepped::InPlace
            }
            Program::Measure {
                party,
                targets,
                vars,
            } => {
                check_owned(&self.world, &party, &targets, &label)?;
                if vars.len() != targets.len() {
                    return Err(RuntimeError::MeasureArity {
                        vars: vars.len(),
                        targets: targets.len(),
                    });
                }
                let branches = measure_subset(&self.world.state, &targets)?;
                let k = targets.len();
                let forks = branches
                    .into_iter()
                    .map(|b| {
                        let mut fork = self.clone();
                        fork.weight *= b.prob;
                        fork.world.state = b.post_state;
                        for (j, var) in vars.iter().enumerate() {
                            let bit = (b.outcome >> (k - 1 - j)) & 1;
                            fork.world.classical.insert(var.clone(), bit as i64);
                        }
                        fork
                    })
                    .collect();
                Stepped::Forked(forks)
            }
            Program::SendC {
                party,
                channel: name,
                expr,
            } => {
                let value = crate::expr::eval_expr(&expr, &self.world.classical)?;
                channel::send_classical(&mut self.world, &party, &name, value, &label)?;
                Stepped::InPlace
            }
            Program::RecvC {
                party,
                channel: name,
                var,
            } => {
                match channel::recv_classical(&mut self.world, &party, &name, &var, &label)? {
                    Progress::Stepped => Stepped::InPlace,
                    Progress::Blocked => unreachable!("readiness was checked before executing"),
                }
            }
            Program::SendQ {
                party,
                channel: name,
                qubit,
            } => {
                channel::send_quantum(&mut self.world, &party, &name, qubit, &label)?;
                Stepped::InPlace
            }
            Program::RecvQ {
                party,
                channel: name,
                qubit,
            } => {
                match channel::recv_quantum(&mut self.world, &party, &name, qubit, &label)? {
                    Progress::Stepped => Stepped::InPlace,
                    Progress::Blocked => unreachable!("readiness was checked before executing"),
                }
            }
            Program::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                let value = crate::expr::eval_expr(&cond, &self.world.classical)?;
                let chosen = if value != 0 { then_branch } else { else_branch };
                self.threads[idx].tasks.push(Task::Run(*chosen));
                Stepped::InPlace
            }
            Program::ProbIf {
                prob,
                then_branch,
                else_branch,
            } => {
                if !(0.0..=1.0).contains(&prob) || !prob.is_finite() {
                    return Err(RuntimeError::BadProbability { prob });
                }
                let mut forks = Vec::new();
                for (p, branch) in [(prob, then_branch), (1.0 - prob, else_branch)] {
                    if p == 0.0 {
                        continue;
                    }
                    let mut fork = self.clone();
                    fork.weight *= p;
                    fork.threads[idx].tasks.push(Task::Run(*branch));
                    forks.push(fork);
                }
                Stepped::Forked(forks)
            }
            Program::Par(left, right) => {
                for side in [left, right] {
                    self.threads.push(Thread {
                        tasks: vec![Task::Run(*side)],
                        parent: Some(idx),
                        waiting: 0,
                        done: false,
                    });
                }
                self.threads[idx].waiting = 2;
                Stepped::InPlace
            }
            Program::DeclChan {
                name,
                kind,
                writer,
                reader,
                body,
            } => {
                channel::declare(
                    &mut self.world,
                    &name,
                    ChannelState::new(kind, writer, reader),
                )?;
                self.threads[idx].tasks.push(Task::CloseChan(name));
                self.threads[idx].tasks.push(Task::Run(*body));
                Stepped::InPlace
            }
            Program::DeclQChan {
                name,
                writer,
                reader,
                body,
            } => {
                channel::declare(
                    &mut self.world,
                    &name,
                    ChannelState::new(ChannelKind::Quantum, writer, reader),
                )?;
                self.threads[idx].tasks.push(Task::CloseChan(name));
                self.threads[idx].tasks.push(Task::Run(*body));
                Stepped::InPlace
            }
            Program::Seq(..) => unreachable!("sequences are expanded before execution"),
        };
        Ok((stepped, label, party))
    }
}

fn run_machine(
    mut machine: Machine,
    hook: &mut dyn FnMut(&StepEvent<'_>),
    out: &mut Vec<(f64, Result<World, RuntimeError>)>,
) {
    loop {
        machine.settle();
        if machine.complete() {
            out.push((machine.weight, Ok(machine.world)));
            return;
        }
        match machine.pick_and_execute() {
            Ok(Some((Stepped::InPlace, statement, party))) => {
                hook(&StepEvent {
                    statement,
                    party,
                    weight: machine.weight,
                    world: &machine.world,
                });
            }
            Ok(Some((Stepped::Forked(forks), statement, party))) => {
                for fork in forks {
                    hook(&StepEvent {
                        statement: statement.clone(),
                        party: party.clone(),
                        weight: fork.weight,
                        world: &fork.world,
                    });
                    run_machine(fork, hook, out);
                }
                return;
            }
            Ok(None) => {
                let report = machine.blocked_report();
                out.push((
                    machine.weight,
                    Err(RuntimeError::Deadlock { statements: report }),
                ));
                return;
            }
            Err(e) => {
                out.push((machine.weight, Err(e)));
                return;
            }
        }
    }
}

/// Runs `program` from `w0`, yielding the merged exact distribution over
/// final worlds. The first branch error (in depth-first order) aborts.
pub fn run(program: &Program, w0: &World) -> Result<Distribution, RuntimeError> {
    run_with_hook(program, w0, &mut |_| {})
}

/// `run` with a step hook: `hook` fires after every primitive step with the
/// statement's label and the post-step world, once per branch for branching
/// statements.
pub fn run_with_hook(
    program: &Program,
    w0: &World,
    hook: &mut dyn FnMut(&StepEvent<'_>),
) -> Result<Distribution, RuntimeError> {
    let mut outcomes = Vec::new();
    run_machine(Machine::initial(program, w0), hook, &mut outcomes);
    let mut worlds = Vec::with_capacity(outcomes.len());
    for (weight, result) in outcomes {
        worlds.push((weight, result?));
    }
    Distribution::from_branches(worlds)
}

/// Runs `program` keeping per-branch results: errors do not abort sibling
/// branches, so callers can observe that (say) every branch fails.
pub fn run_branch_outcomes(
    program: &Program,
    w0: &World,
) -> Vec<(f64, Result<World, RuntimeError>)> {
    let mut outcomes = Vec::new();
    run_machine(Machine::initial(program, w0), &mut |_| {}, &mut outcomes);
    outcomes
}

/// Parallel composition as an operation: `run(P ‖ Q)`.
pub fn step_parallel(p: Program, q: Program, w0: &World) -> Result<Distribution, RuntimeError> {
    run(&Program::par(p, q), w0)
}
