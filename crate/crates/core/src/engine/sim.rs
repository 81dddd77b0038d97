//! The event loop behind `simulate_iteration`.
//!
//! Phase one (rollout plus verification) is event-driven: a worker pool
//! serves the request chains, completions trigger verification per the
//! policy, judges queue on a capacity-limited pool, and the abort mode can
//! cut stragglers. Phase two (batch build, weight transfer, reference
//! forward, train step) is a closed-form schedule over the configured
//! durations, chained onto the time all rewards are ready.
//!
//! Determinism: events at equal timestamps order by class (completions,
//! then the abort, then judges) and sample id; every random draw is keyed
//! by sample id rather than by event order, so policies never perturb each
//! other's draws.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::error::{Error, Result};
use crate::gym::Trajectory;
use crate::reward::{aggregate, plan_verification, RewardRecord, SchedClass, VerifierTask};

use super::trace::{sort_trace, Stage, TraceEvent};
use super::{
    AbortCache, AbortMode, CacheEntry, IterationMetrics, Policy, Resources, RewardConfig,
    RewardTrigger, SimOutcome, StageTime,
};

/// Total-ordered simulation time.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Time(f64);

impl Eq for Time {}

impl PartialOrd for Time {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Time {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Ev {
    time: Time,
    class: u8,
    sample: u64,
    idx: u64,
}

const CLASS_COMPLETE: u8 = 0;
const CLASS_ABORT: u8 = 1;
const CLASS_JUDGE_DONE: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
enum RunState {
    Waiting,
    Running { worker: usize, start: f64 },
    Done,
    Cut,
}

struct TrajRun<'a> {
    traj: &'a Trajectory,
    /// Absolute index of the next step to run; steps below it are complete.
    front: u32,
    /// Cached decode tokens for the front step, from a prior iteration.
    resume_tokens: u64,
    /// First step of this iteration (earlier steps completed previously).
    base_step: u32,
    state: RunState,
}

#[derive(Debug, Clone, Copy)]
struct RunningReq {
    step: u32,
    pre_decode_sec: f64,
    decode_sec: f64,
    response_tokens: u64,
    prior_tokens: u64,
}

struct VerifState {
    tasks: Vec<VerifierTask>,
    pending: usize,
    max_finish: f64,
    started: BTreeMap<usize, f64>,
}

pub(super) fn run(
    trajectories: &[Trajectory],
    resources: &Resources,
    policy: &Policy,
    reward: &RewardConfig,
    seed: u64,
    cache_in: &AbortCache,
) -> Result<SimOutcome> {
    resources.validate()?;
    policy.validate()?;
    reward.validate()?;
    if trajectories.is_empty() {
        return Err(Error::Argument("no trajectories to simulate".into()));
    }
    {
        let mut ids = BTreeSet::new();
        for t in trajectories {
            if t.is_empty() {
                return Err(Error::Validation(format!(
                    "trajectory {} is empty",
                    t.sample_id
                )));
            }
            if !ids.insert(t.sample_id) {
                return Err(Error::Validation(format!(
                    "duplicate sample id {}",
                    t.sample_id
                )));
            }
        }
    }

    let mut sim = Sim {
        resources,
        policy,
        reward,
        seed,
        runs: BTreeMap::new(),
        heap: BinaryHeap::new(),
        ready: BTreeSet::new(),
        ready_times: BTreeMap::new(),
        free_workers: (0..resources.rollout_workers).collect(),
        running: BTreeMap::new(),
        verifs: BTreeMap::new(),
        judge_running: 0,
        judge_queue: BTreeSet::new(),
        completed_order: Vec::new(),
        rollout_end: None,
        reward_ready: BTreeMap::new(),
        records: Vec::new(),
        cache_out: cache_in.clone(),
        reuse_hits: 0,
        carried: 0,
        dropped: 0,
        latencies: Vec::new(),
        busy: BTreeMap::new(),
        trace: Vec::new(),
    };

    // Materialize per-trajectory state, applying cached progress.
    for t in trajectories {
        let (base_step, resume_tokens) = match cache_in.entries.get(&t.sample_id) {
            Some(entry) if policy.abort_reuse => {
                if entry.completed_steps as usize >= t.len() {
                    return Err(Error::Validation(format!(
                        "cache entry for sample {} points past its {}-step chain",
                        t.sample_id,
                        t.len()
                    )));
                }
                let req = &t.requests[entry.completed_steps as usize];
                if entry.tokens_generated >= req.expected_response_tokens {
                    return Err(Error::Validation(format!(
                        "cache entry for sample {} has generated >= response tokens",
                        t.sample_id
                    )));
                }
                sim.cache_out.entries.remove(&t.sample_id);
                sim.reuse_hits += 1;
                let tokens = if policy.restart_resumed {
                    0
                } else {
                    entry.tokens_generated
                };
                (entry.completed_steps, tokens)
            }
            _ => (0, 0),
        };
        sim.runs.insert(
            t.sample_id,
            TrajRun {
                traj: t,
                front: base_step,
                resume_tokens,
                base_step,
                state: RunState::Waiting,
            },
        );
    }
    if policy.abort_reuse {
        if let Some((id, _)) = cache_in
            .entries
            .iter()
            .find(|(id, _)| !sim.runs.contains_key(id))
        {
            return Err(Error::Validation(format!(
                "cache entry references sample {id} which is not in this workload"
            )));
        }
    }

    if let AbortMode::Time { deadline_sec } = policy.abort {
        sim.heap.push(Reverse(Ev {
            time: Time(deadline_sec),
            class: CLASS_ABORT,
            sample: 0,
            idx: 0,
        }));
    }

    // All front requests are ready at t = 0.
    let ids: Vec<u64> = sim.runs.keys().copied().collect();
    for id in ids {
        sim.mark_ready(id, 0.0);
    }
    sim.assign_ready(0.0);

    while let Some(Reverse(ev)) = sim.heap.pop() {
        match ev.class {
            CLASS_COMPLETE => sim.on_complete(ev.time.0, ev.sample, ev.idx as u32)?,
            CLASS_ABORT => sim.on_abort(ev.time.0)?,
            CLASS_JUDGE_DONE => sim.on_judge_done(ev.time.0, ev.sample, ev.idx as usize)?,
            _ => unreachable!("unknown event class"),
        }
    }

    sim.finish()
}

struct Sim<'a> {
    resources: &'a Resources,
    policy: &'a Policy,
    reward: &'a RewardConfig,
    seed: u64,
    runs: BTreeMap<u64, TrajRun<'a>>,
    heap: BinaryHeap<Reverse<Ev>>,
    /// Requests ready to start, ordered by (ready time, sample id).
    ready: BTreeSet<(Time, u64)>,
    ready_times: BTreeMap<(u64, u32), f64>,
    free_workers: BTreeSet<usize>,
    running: BTreeMap<usize, (u64, RunningReq)>,
    verifs: BTreeMap<u64, VerifState>,
    judge_running: usize,
    /// Judge tasks waiting for capacity, ordered by (enqueue time, sample,
    /// verifier index).
    judge_queue: BTreeSet<(Time, u64, usize)>,
    completed_order: Vec<u64>,
    rollout_end: Option<f64>,
    reward_ready: BTreeMap<u64, f64>,
    records: Vec<RewardRecord>,
    cache_out: AbortCache,
    reuse_hits: u64,
    carried: u64,
    dropped: u64,
    latencies: Vec<f64>,
    busy: BTreeMap<Stage, Vec<(f64, f64)>>,
    trace: Vec<TraceEvent>,
}

impl<'a> Sim<'a> {
    fn emit(
        &mut self,
        time: f64,
        stage: Stage,
        kind: &'static str,
        request: Option<(u64, u32)>,
        detail: String,
    ) {
        self.trace.push(TraceEvent {
            time,
            stage,
            kind,
            request,
            detail,
        });
    }

    fn add_busy(&mut self, stage: Stage, start: f64, end: f64) {
        if end > start {
            self.busy.entry(stage).or_default().push((start, end));
        }
    }

    fn final_step(&self, sample: u64) -> u32 {
        self.runs[&sample].traj.len() as u32 - 1
    }

    fn mark_ready(&mut self, sample: u64, time: f64) {
        let front = self.runs[&sample].front;
        self.ready.insert((Time(time), sample));
        self.ready_times.insert((sample, front), time);
        self.emit(
            time,
            Stage::Rollout,
            "request_ready",
            Some((sample, front)),
            String::new(),
        );
    }

    fn assign_ready(&mut self, now: f64) {
        while !self.free_workers.is_empty() && !self.ready.is_empty() {
            let &(ready_at, sample) = self.ready.iter().next().expect("non-empty");
            self.ready.remove(&(ready_at, sample));
            let worker = *self.free_workers.iter().next().expect("non-empty");
            self.free_workers.remove(&worker);

            let (step, prior, traj) = {
                let run = &self.runs[&sample];
                let prior = if run.front == run.base_step {
                    run.resume_tokens
                } else {
                    0
                };
                (run.front, prior, run.traj)
            };
            let req = &traj.requests[step as usize];
            let vit: u64 = req.new_visuals.iter().map(|v| v.merged_tokens()).sum();
            let pre_decode_sec = vit as f64 / self.resources.vit_tokens_per_sec
                + req.context_tokens as f64 / self.resources.prefill_tokens_per_sec;
            let remaining = req.expected_response_tokens.saturating_sub(prior);
            let decode_sec = remaining as f64 / self.resources.decode_tokens_per_sec;

            self.runs.get_mut(&sample).expect("known sample").state =
                RunState::Running { worker, start: now };
            self.running.insert(
                worker,
                (
                    sample,
                    RunningReq {
                        step,
                        pre_decode_sec,
                        decode_sec,
                        response_tokens: req.expected_response_tokens,
                        prior_tokens: prior,
                    },
                ),
            );
            self.heap.push(Reverse(Ev {
                time: Time(now + pre_decode_sec + decode_sec),
                class: CLASS_COMPLETE,
                sample,
                idx: step as u64,
            }));
            self.emit(
                now,
                Stage::Rollout,
                "request_start",
                Some((sample, step)),
                format!("worker={worker}"),
            );
        }
    }

    fn on_complete(&mut self, now: f64, sample: u64, step: u32) -> Result<()> {
        let state = self.runs[&sample].state;
        let RunState::Running { worker, start } = state else {
            // The abort cut this trajectory while its completion event was
            // already in the heap.
            return Ok(());
        };
        debug_assert_eq!(
            self.running.get(&worker).map(|(s, r)| (*s, r.step)),
            Some((sample, step))
        );
        self.running.remove(&worker);
        self.free_workers.insert(worker);
        let finished = {
            let run = self.runs.get_mut(&sample).expect("known sample");
            run.front += 1;
            let finished = run.front as usize == run.traj.len();
            run.state = if finished {
                RunState::Done
            } else {
                RunState::Waiting
            };
            finished
        };
        self.add_busy(Stage::Rollout, start, now);
        let ready_at = self.ready_times[&(sample, step)];
        self.latencies.push(now - ready_at);
        self.emit(
            now,
            Stage::Rollout,
            "request_complete",
            Some((sample, step)),
            String::new(),
        );

        if finished {
            self.completed_order.push(sample);
            if self.policy.reward_trigger == RewardTrigger::PerRequestCallback {
                self.plan_sample_verification(sample, now)?;
            }
            if let AbortMode::Count { complete_k } = self.policy.abort {
                if self.completed_order.len() as u64 == complete_k {
                    self.cutoff(now)?;
                    return Ok(());
                }
            }
            self.note_if_rollout_finished(now)?;
        } else {
            self.mark_ready(sample, now);
        }
        self.assign_ready(now);
        Ok(())
    }

    fn unresolved(&self) -> bool {
        self.runs
            .values()
            .any(|r| !matches!(r.state, RunState::Done | RunState::Cut))
    }

    fn note_if_rollout_finished(&mut self, now: f64) -> Result<()> {
        if self.rollout_end.is_none() && !self.unresolved() {
            self.rollout_end = Some(now);
            if self.policy.reward_trigger == RewardTrigger::BatchBarrier {
                let mut done = self.completed_order.clone();
                done.sort_unstable();
                for sample in done {
                    self.plan_sample_verification(sample, now)?;
                }
            }
        }
        Ok(())
    }

    fn on_abort(&mut self, now: f64) -> Result<()> {
        if self.rollout_end.is_some() {
            return Ok(());
        }
        self.cutoff(now)
    }

    /// Cut every unfinished trajectory at `now`.
    fn cutoff(&mut self, now: f64) -> Result<()> {
        let victims: Vec<u64> = self
            .runs
            .iter()
            .filter(|(_, r)| !matches!(r.state, RunState::Done | RunState::Cut))
            .map(|(id, _)| *id)
            .collect();
        if !victims.is_empty() {
            self.emit(
                now,
                Stage::Rollout,
                "abort_fired",
                None,
                format!("victims={}", victims.len()),
            );
        }
        for sample in victims {
            let (state, front, base_step, resume_tokens) = {
                let r = &self.runs[&sample];
                (r.state, r.front, r.base_step, r.resume_tokens)
            };
            let tokens = match state {
                RunState::Running { worker, start } => {
                    let (_, req) = self.running.remove(&worker).expect("running entry");
                    self.free_workers.insert(worker);
                    let elapsed = now - start;
                    let decode_done = (elapsed - req.pre_decode_sec).clamp(0.0, req.decode_sec);
                    let generated =
                        (decode_done * self.resources.decode_tokens_per_sec).floor() as u64;
                    self.add_busy(Stage::Rollout, start, now);
                    (req.prior_tokens + generated).min(req.response_tokens.saturating_sub(1))
                }
                RunState::Waiting => {
                    let ready_at = self.ready_times[&(sample, front)];
                    self.ready.remove(&(Time(ready_at), sample));
                    if front == base_step {
                        resume_tokens
                    } else {
                        0
                    }
                }
                _ => unreachable!("victims are unresolved"),
            };
            self.runs.get_mut(&sample).expect("known sample").state = RunState::Cut;
            if self.policy.abort_reuse {
                self.cache_out.entries.insert(
                    sample,
                    CacheEntry {
                        completed_steps: front,
                        tokens_generated: tokens,
                    },
                );
                self.carried += 1;
            } else {
                self.dropped += 1;
            }
            self.emit(
                now,
                Stage::Rollout,
                "request_aborted",
                Some((sample, front)),
                format!("tokens_generated={tokens}"),
            );
        }
        self.note_if_rollout_finished(now)
    }

    fn plan_sample_verification(&mut self, sample: u64, now: f64) -> Result<()> {
        let tasks = plan_verification(sample, &self.reward.verifiers, self.seed)?;
        let step = self.final_step(sample);
        self.emit(
            now,
            Stage::Reward,
            "verify_planned",
            Some((sample, step)),
            format!("tasks={}", tasks.len()),
        );
        let mut state = VerifState {
            tasks,
            pending: 0,
            max_finish: now,
            started: BTreeMap::new(),
        };
        let mut to_queue = Vec::new();
        let mut inline_windows = Vec::new();
        for (idx, task) in state.tasks.iter().enumerate() {
            match task.class {
                SchedClass::Inline => {
                    let finish = now + task.latency_sec;
                    state.started.insert(idx, now);
                    if finish > state.max_finish {
                        state.max_finish = finish;
                    }
                    inline_windows.push((task.verifier.clone(), finish));
                }
                SchedClass::Dispatch => {
                    state.pending += 1;
                    to_queue.push(idx);
                }
            }
        }
        let all_inline = state.pending == 0;
        self.verifs.insert(sample, state);
        for (name, finish) in inline_windows {
            self.add_busy(Stage::Reward, now, finish);
            self.emit(now, Stage::Reward, "verifier_start", Some((sample, step)), name.clone());
            self.emit(finish, Stage::Reward, "verifier_done", Some((sample, step)), name);
        }
        for idx in to_queue {
            self.judge_queue.insert((Time(now), sample, idx));
        }
        if all_inline {
            self.finalize_reward(sample)?;
        } else {
            self.start_queued_judges(now);
        }
        Ok(())
    }

    fn start_queued_judges(&mut self, now: f64) {
        loop {
            if let Some(cap) = self.resources.judge_capacity {
                if self.judge_running >= cap {
                    return;
                }
            }
            let Some(&key) = self.judge_queue.iter().next() else {
                return;
            };
            self.judge_queue.remove(&key);
            let (_, sample, idx) = key;
            self.judge_running += 1;
            let (latency, name) = {
                let state = self.verifs.get_mut(&sample).expect("planned suite");
                state.started.insert(idx, now);
                (state.tasks[idx].latency_sec, state.tasks[idx].verifier.clone())
            };
            let finish = now + latency;
            self.heap.push(Reverse(Ev {
                time: Time(finish),
                class: CLASS_JUDGE_DONE,
                sample,
                idx: idx as u64,
            }));
            self.add_busy(Stage::Reward, now, finish);
            let step = self.final_step(sample);
            self.emit(now, Stage::Reward, "verifier_start", Some((sample, step)), name);
        }
    }

    fn on_judge_done(&mut self, now: f64, sample: u64, idx: usize) -> Result<()> {
        self.judge_running -= 1;
        let (name, done) = {
            let state = self.verifs.get_mut(&sample).expect("planned suite");
            state.pending -= 1;
            if now > state.max_finish {
                state.max_finish = now;
            }
            (state.tasks[idx].verifier.clone(), state.pending == 0)
        };
        let step = self.final_step(sample);
        self.emit(now, Stage::Reward, "verifier_done", Some((sample, step)), name);
        if done {
            self.finalize_reward(sample)?;
        }
        self.start_queued_judges(now);
        Ok(())
    }

    fn finalize_reward(&mut self, sample: u64) -> Result<()> {
        let (scores, spans, ready_at) = {
            let state = self.verifs.get(&sample).expect("planned suite");
            let scores: BTreeMap<String, f64> = state
                .tasks
                .iter()
                .map(|t| (t.verifier.clone(), t.score))
                .collect();
            let spans: BTreeMap<String, (f64, f64)> = state
                .tasks
                .iter()
                .enumerate()
                .map(|(idx, t)| {
                    let start = state.started[&idx];
                    (t.verifier.clone(), (start, start + t.latency_sec))
                })
                .collect();
            (scores, spans, state.max_finish)
        };
        let weights = self.reward.weights();
        let value = aggregate(&scores, &weights, &self.reward.aggregation)?;
        self.reward_ready.insert(sample, ready_at);
        self.records.push(RewardRecord {
            sample_id: sample,
            scores,
            spans,
            reward: value,
        });
        let step = self.final_step(sample);
        self.emit(
            ready_at,
            Stage::Reward,
            "reward_ready",
            Some((sample, step)),
            crate::report::fmt_sig(value),
        );
        Ok(())
    }

    fn finish(mut self) -> Result<SimOutcome> {
        let rollout_end = self
            .rollout_end
            .expect("rollout resolved before the heap drained");
        debug_assert!(self.judge_queue.is_empty());
        let rewards_done = self
            .reward_ready
            .values()
            .fold(rollout_end, |acc, &t| acc.max(t));

        // Phase two. Batch build and the old-policy weight transfer start
        // once the batch content is final and rewarded; the training step
        // waits for both. Reference weights move after the channel frees;
        // with prefetch only the part not hidden inside the preceding stage
        // delays the reference forward.
        let t0 = rewards_done.max(rollout_end);
        let completed = self.completed_order.len() as u64;
        let batch_dur = self.resources.batch_fixed_sec
            + self.resources.batch_per_sample_sec * completed as f64;
        let wt_dur = self.resources.weight_bytes as f64 / self.resources.transfer_bandwidth;
        let (batch_iv, wt_iv, t1) = if self.policy.overlap_batch_with_transfer {
            let batch_iv = (t0, t0 + batch_dur);
            let wt_iv = (t0, t0 + wt_dur);
            (batch_iv, wt_iv, batch_iv.1.max(wt_iv.1))
        } else {
            let batch_iv = (t0, t0 + batch_dur);
            let wt_iv = (batch_iv.1, batch_iv.1 + wt_dur);
            (batch_iv, wt_iv, wt_iv.1)
        };
        let prev_window = if self.policy.overlap_batch_with_transfer {
            t1 - t0
        } else {
            wt_dur
        };
        let ref_tx_dur =
            self.resources.ref_weight_bytes as f64 / self.resources.transfer_bandwidth;
        let (ref_tx_iv, ref_start) = if self.policy.ref_prefetch {
            let delay = (ref_tx_dur - prev_window).max(0.0);
            let end = t1 + delay;
            ((end - ref_tx_dur, end), end)
        } else {
            ((t1, t1 + ref_tx_dur), t1 + ref_tx_dur)
        };
        let ref_iv = (ref_start, ref_start + self.resources.ref_forward_sec);
        let train_iv = (ref_iv.1, ref_iv.1 + self.resources.train_step_sec);
        let makespan = train_iv.1;

        self.add_busy(Stage::BatchBuild, batch_iv.0, batch_iv.1);
        self.add_busy(Stage::WeightTransfer, wt_iv.0, wt_iv.1);
        self.add_busy(Stage::WeightTransfer, ref_tx_iv.0, ref_tx_iv.1);
        self.add_busy(Stage::RefForward, ref_iv.0, ref_iv.1);
        self.add_busy(Stage::TrainStep, train_iv.0, train_iv.1);
        for (t, stage, kind) in [
            (batch_iv.0, Stage::BatchBuild, "batch_start"),
            (batch_iv.1, Stage::BatchBuild, "batch_done"),
            (wt_iv.0, Stage::WeightTransfer, "transfer_start"),
            (wt_iv.1, Stage::WeightTransfer, "transfer_done"),
            (ref_tx_iv.0, Stage::WeightTransfer, "ref_transfer_start"),
            (ref_tx_iv.1, Stage::WeightTransfer, "ref_transfer_done"),
            (ref_iv.0, Stage::RefForward, "ref_start"),
            (ref_iv.1, Stage::RefForward, "ref_done"),
            (train_iv.0, Stage::TrainStep, "train_start"),
            (train_iv.1, Stage::TrainStep, "train_done"),
        ] {
            self.emit(t, stage, kind, None, String::new());
        }
        self.emit(
            makespan,
            Stage::TrainStep,
            "iteration_done",
            None,
            String::new(),
        );

        let mut stages = BTreeMap::new();
        let mut busy_intervals = BTreeMap::new();
        let mut busy_total = 0.0;
        for stage in Stage::ALL {
            let merged = union_intervals(self.busy.remove(&stage).unwrap_or_default());
            let busy: f64 = merged.iter().map(|(s, e)| e - s).sum();
            busy_total += busy;
            stages.insert(
                stage,
                StageTime {
                    busy_sec: busy,
                    idle_sec: (makespan - busy).max(0.0),
                },
            );
            busy_intervals.insert(stage, merged);
        }
        let bubble_fraction = if makespan > 0.0 {
            1.0 - busy_total / (Stage::ALL.len() as f64 * makespan)
        } else {
            0.0
        };

        self.latencies.sort_by(|a, b| a.total_cmp(b));
        let metrics = IterationMetrics {
            makespan_sec: makespan,
            stages,
            scheduled: self.runs.len() as u64,
            completed,
            aborted_count: self.carried + self.dropped,
            carried: self.carried,
            dropped: self.dropped,
            reuse_hits: self.reuse_hits,
            request_latency_p50_sec: percentile(&self.latencies, 50.0),
            request_latency_p99_sec: percentile(&self.latencies, 99.0),
            bubble_fraction,
        };
        debug_assert!(metrics.conserves_trajectories());

        self.records.sort_by_key(|r| r.sample_id);
        sort_trace(&mut self.trace);
        Ok(SimOutcome {
            metrics,
            trace: self.trace,
            records: self.records,
            cache: self.cache_out,
            busy_intervals,
        })
    }
}

fn union_intervals(mut intervals: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    intervals.retain(|(s, e)| e > s);
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (s, e) in intervals {
        match merged.last_mut() {
            Some((_, ce)) if s <= *ce => *ce = ce.max(e),
            _ => merged.push((s, e)),
        }
    }
    merged
}

/// Nearest-rank percentile over an ascending-sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((q / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}
