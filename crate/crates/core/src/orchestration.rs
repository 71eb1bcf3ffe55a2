//! Makespan of an offloadable task batch under four execution strategies:
//! on the requesting device, on a mobile device cloud of nearby peers, on one
//! edge server, and split across collaborating edge servers.
//!
//! Every remote task is uploaded over its executor's link and then computed
//! (store-and-forward, no pipelining). The requesting device pays each
//! executor's `offload_overhead` once per task it dispatches; that cost is
//! serial, because one device does all the dispatching.

use std::collections::VecDeque;
use std::fmt;

use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::scalar::{mega, Scalar};
use crate::seed::{stream_rng, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaskBatch<T> {
    pub n_tasks: usize,
    pub input_bits_per_task: T,
    pub work_per_task: T,
}

/// Bits of one 481 x 321 image at 24 bits per pixel.
pub const RAW_IMAGE_BITS: f64 = 481.0 * 321.0 * 24.0;

/// JPEG at roughly 10:1 over raw RGB.
pub const COMPRESSED_IMAGE_BITS: f64 = RAW_IMAGE_BITS / 10.0;

impl<T: Scalar> TaskBatch<T> {
    pub fn new(n_tasks: usize, input_bits_per_task: T, work_per_task: T) -> Result<Self> {
        if n_tasks == 0 {
            return Err(invalid("batch needs at least one task"));
        }
        if !(input_bits_per_task > T::zero()) {
            return Err(invalid("input size per task must be positive"));
        }
        if !(work_per_task > T::zero()) {
            return Err(invalid("work per task must be positive"));
        }
        Ok(Self {
            n_tasks,
            input_bits_per_task,
            work_per_task,
        })
    }

    /// Twenty edge-detection tasks, one compressed image each, 16 work units
    /// per image.
    pub fn reference() -> Self {
        Self::new(20, T::lit(COMPRESSED_IMAGE_BITS), T::lit(16.0)).expect("valid batch")
    }

    pub fn total_work(&self) -> T {
        self.work_per_task * T::from_count(self.n_tasks)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NodeKind {
    LocalDevice,
    PeerDevice,
    EdgeServer,
}

/// How long a peer stays reachable: Normal(mean, std) seconds, truncated at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Availability<T> {
    pub mean: T,
    pub std_dev: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResourceNode<T> {
    pub kind: NodeKind,
    /// Work units per second.
    pub speed: T,
    /// Mbps; zero for the requesting device itself.
    pub link_rate: T,
    pub availability: Option<Availability<T>>,
    /// Seconds the requester spends per task dispatched to this node.
    pub offload_overhead: T,
}

impl<T: Scalar> ResourceNode<T> {
    pub fn local(speed: T) -> Self {
        Self {
            kind: NodeKind::LocalDevice,
            speed,
            link_rate: T::zero(),
            availability: None,
            offload_overhead: T::zero(),
        }
    }

    pub fn peer(speed: T, link_rate: T, mean: T, std_dev: T) -> Self {
        Self {
            kind: NodeKind::PeerDevice,
            speed,
            link_rate,
            availability: Some(Availability { mean, std_dev }),
            offload_overhead: T::zero(),
        }
    }

    pub fn edge(speed: T, link_rate: T, offload_overhead: T) -> Self {
        Self {
            kind: NodeKind::EdgeServer,
            speed,
            link_rate,
            availability: None,
            offload_overhead,
        }
    }

    fn validate(&self, expected: NodeKind) -> Result<()> {
        if self.kind != expected {
            return Err(invalid(format!("expected a {expected:?}, got a {:?}", self.kind)));
        }
        if !(self.speed > T::zero()) {
            return Err(invalid("node speed must be positive"));
        }
        if expected != NodeKind::LocalDevice && !(self.link_rate > T::zero()) {
            return Err(invalid("remote node needs a positive link rate"));
        }
        if !(self.offload_overhead >= T::zero()) {
            return Err(invalid("offload overhead must be >= 0"));
        }
        if let Some(a) = self.availability {
            if !(a.std_dev >= T::zero()) {
                return Err(invalid("availability std dev must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn transfer_time(&self, bits: T) -> T {
        bits / (self.link_rate * mega::<T>())
    }

    /// Upload plus compute for one task on this node.
    pub fn task_time(&self, batch: &TaskBatch<T>) -> T {
        let compute = batch.work_per_task / self.speed;
        if self.kind == NodeKind::LocalDevice {
            compute
        } else {
            self.transfer_time(batch.input_bits_per_task) + compute
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExecutionStrategy {
    Local,
    Mdc,
    SingleMec,
    CollabMec(usize),
}

impl fmt::Display for ExecutionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecutionStrategy::Local => f.write_str("local"),
            ExecutionStrategy::Mdc => f.write_str("mdc"),
            ExecutionStrategy::SingleMec => f.write_str("mec"),
            ExecutionStrategy::CollabMec(k) => write!(f, "collab-mec-{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExecutionReport<T> {
    pub strategy: ExecutionStrategy,
    pub makespan: T,
    pub reassignments: u64,
    /// Work units of fully completed tasks.
    pub completed_work: T,
}

pub fn estimate_local<T: Scalar>(batch: &TaskBatch<T>, device: &ResourceNode<T>) -> Result<ExecutionReport<T>> {
    TaskBatch::new(batch.n_tasks, batch.input_bits_per_task, batch.work_per_task)?;
    device.validate(NodeKind::LocalDevice)?;
    Ok(ExecutionReport {
        strategy: ExecutionStrategy::Local,
        makespan: batch.total_work() / device.speed,
        reassignments: 0,
        completed_work: batch.total_work(),
    })
}

struct PeerState<T> {
    node: ResourceNode<T>,
    leaves_at: T,
    free_at: T,
    alive: bool,
    /// (task id, earliest start)
    queue: VecDeque<(usize, T)>,
}

enum PeerEvent {
    Complete,
    Depart,
}

/// Round-robin execution on peer devices with churn.
///
/// Each peer's availability is drawn once per run from its own stream. A peer
/// that cannot finish its current task before leaving departs at its
/// availability time; that task and everything queued behind it are dealt
/// round-robin to the peers still present, which re-download the inputs.
pub fn estimate_mdc<T: Scalar>(
    batch: &TaskBatch<T>,
    peers: &[ResourceNode<T>],
    seed: u64,
) -> Result<ExecutionReport<T>> {
    TaskBatch::new(batch.n_tasks, batch.input_bits_per_task, batch.work_per_task)?;
    if peers.is_empty() {
        return Err(invalid("mobile device cloud needs at least one peer"));
    }
    let mut state = Vec::with_capacity(peers.len());
    for (i, node) in peers.iter().enumerate() {
        node.validate(NodeKind::PeerDevice)?;
        let leaves_at = match node.availability {
            None => T::infinity(),
            Some(a) => {
                let normal = Normal::new(a.mean.as_f64(), a.std_dev.as_f64())
                    .map_err(|e| invalid(e.to_string()))?;
                let mut rng = stream_rng(seed, Domain::PeerAvailability, i);
                T::lit(normal.sample(&mut rng).max(0.0))
            }
        };
        state.push(PeerState {
            node: *node,
            leaves_at,
            free_at: T::zero(),
            alive: true,
            queue: VecDeque::new(),
        });
    }

    let n = state.len();
    let mut cursor = 0usize;
    let mut dispatch_overhead = T::zero();
    for task in 0..batch.n_tasks {
        let p = cursor % n;
        cursor += 1;
        state[p].queue.push_back((task, T::zero()));
        dispatch_overhead = dispatch_overhead + state[p].node.offload_overhead;
    }

    let mut makespan = T::zero();
    let mut completed = 0usize;
    let mut reassignments = 0u64;
    while completed < batch.n_tasks {
        let mut next: Option<(T, usize, PeerEvent)> = None;
        for (i, p) in state.iter().enumerate() {
            let Some(&(_, ready)) = p.queue.front() else { continue };
            if !p.alive {
                continue;
            }
            let finish = p.free_at.max(ready) + p.node.task_time(batch);
            let ev = if finish <= p.leaves_at {
                (finish, i, PeerEvent::Complete)
            } else {
                (p.leaves_at.max(ready), i, PeerEvent::Depart)
            };
            if next.as_ref().is_none_or(|(t, _, _)| ev.0 < *t) {
                next = Some(ev);
            }
        }
        let (now, i, kind) = next.expect("pending tasks imply a live peer with a queue");
        match kind {
            PeerEvent::Complete => {
                state[i].queue.pop_front();
                state[i].free_at = now;
                completed += 1;
                makespan = makespan.max(now);
            }
            PeerEvent::Depart => {
                state[i].alive = false;
                let orphans: Vec<usize> = state[i].queue.drain(..).map(|(t, _)| t).collect();
                if !state.iter().any(|p| p.alive && p.leaves_at > now) {
                    return Err(Error::IncompleteExecution(format!(
                        "all peers left by t = {now} s with {} of {} tasks unfinished",
                        batch.n_tasks - completed,
                        batch.n_tasks
                    )));
                }
                for task in orphans {
                    let p = loop {
                        let c = cursor % n;
                        cursor += 1;
                        if state[c].alive && state[c].leaves_at > now {
                            break c;
                        }
                    };
                    state[p].queue.push_back((task, now));
                    dispatch_overhead = dispatch_overhead + state[p].node.offload_overhead;
                    reassignments += 1;
                }
            }
        }
    }

    Ok(ExecutionReport {
        strategy: ExecutionStrategy::Mdc,
        makespan: makespan + dispatch_overhead,
        reassignments,
        completed_work: T::from_count(completed) * batch.work_per_task,
    })
}

/// Splits the batch evenly over the first `k` servers (remainder to the
/// lowest ids).
pub fn estimate_mec<T: Scalar>(
    batch: &TaskBatch<T>,
    servers: &[ResourceNode<T>],
    k: usize,
) -> Result<ExecutionReport<T>> {
    TaskBatch::new(batch.n_tasks, batch.input_bits_per_task, batch.work_per_task)?;
    if k == 0 || k > servers.len() {
        return Err(invalid(format!(
            "k = {k} must be between 1 and the {} available servers",
            servers.len()
        )));
    }
    let (base, extra) = (batch.n_tasks / k, batch.n_tasks % k);
    let mut slowest = T::zero();
    let mut dispatch_overhead = T::zero();
    for (s, server) in servers[..k].iter().enumerate() {
        server.validate(NodeKind::EdgeServer)?;
        let tasks = T::from_count(base + usize::from(s < extra));
        slowest = slowest.max(tasks * server.task_time(batch));
        dispatch_overhead = dispatch_overhead + tasks * server.offload_overhead;
    }
    Ok(ExecutionReport {
        strategy: if k == 1 {
            ExecutionStrategy::SingleMec
        } else {
            ExecutionStrategy::CollabMec(k)
        },
        makespan: dispatch_overhead + slowest,
        reassignments: 0,
        completed_work: batch.total_work(),
    })
}

/// Relative makespan reduction of `k` servers over one.
pub fn collab_gain<T: Scalar>(batch: &TaskBatch<T>, servers: &[ResourceNode<T>], k: usize) -> Result<T> {
    let single = estimate_mec(batch, servers, 1)?.makespan;
    let collab = estimate_mec(batch, servers, k)?.makespan;
    Ok(T::one() - collab / single)
}

/// Bisects the per-task offload overhead of `k` identical `server`s so the
/// `k`-server gain over one server equals `target`.
pub fn calibrate_overhead<T: Scalar>(
    batch: &TaskBatch<T>,
    server: &ResourceNode<T>,
    k: usize,
    target: T,
) -> Result<T> {
    let gain_at = |overhead: T| {
        let s = ResourceNode { offload_overhead: overhead, ..*server };
        collab_gain(batch, &vec![s; k], k)
    };
    let ceiling = gain_at(T::zero())?;
    if !(target > T::zero() && target <= ceiling) {
        return Err(invalid(format!(
            "target gain {target} outside (0, {ceiling}] reachable with {k} servers"
        )));
    }
    let (mut lo, mut hi) = (T::zero(), server.task_time(batch).max(T::lit(1e-9)));
    while gain_at(hi)? > target {
        hi = hi + hi;
    }
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if gain_at(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / T::lit(2.0))
}

/// The nodes available to one requesting device.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inventory<T> {
    pub local: ResourceNode<T>,
    pub peers: Vec<ResourceNode<T>>,
    pub servers: Vec<ResourceNode<T>>,
}

/// Collaboration gain the reference edge servers are calibrated to.
pub const REFERENCE_COLLAB_GAIN: f64 = 0.40;

impl<T: Scalar> Inventory<T> {
    /// Phone-class local device and five peers (speed 1, 1 Mbps links,
    /// availability Normal(`mean_availability`, 5 s)), plus two edge servers
    /// eight times faster on 1 Mbps links with overhead calibrated to a 40 %
    /// two-server gain on `batch`.
    pub fn reference(batch: &TaskBatch<T>, mean_availability: T) -> Result<Self> {
        let link = T::one();
        let edge = ResourceNode::edge(T::lit(8.0), link, T::zero());
        let overhead = calibrate_overhead(batch, &edge, 2, T::lit(REFERENCE_COLLAB_GAIN))?;
        let edge = ResourceNode { offload_overhead: overhead, ..edge };
        Ok(Self {
            local: ResourceNode::local(T::one()),
            peers: vec![ResourceNode::peer(T::one(), link, mean_availability, T::lit(5.0)); 5],
            servers: vec![edge; 2],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison<T> {
    /// Local, MDC (mean makespan over seeds, reassignments summed), single
    /// MEC, collaborative MEC.
    pub reports: Vec<ExecutionReport<T>>,
}

impl<T: Scalar> Comparison<T> {
    /// Strategies from slowest to fastest.
    pub fn ordering(&self) -> Vec<ExecutionStrategy> {
        let mut r = self.reports.clone();
        r.sort_by(|a, b| b.makespan.partial_cmp(&a.makespan).expect("finite makespans"));
        r.into_iter().map(|r| r.strategy).collect()
    }

    /// Local > MDC > single MEC > collaborative MEC, strictly.
    pub fn is_expected_order(&self) -> bool {
        self.reports.windows(2).all(|w| w[0].makespan > w[1].makespan)
    }

    pub fn get(&self, strategy: ExecutionStrategy) -> Option<&ExecutionReport<T>> {
        self.reports.iter().find(|r| r.strategy == strategy)
    }
}

pub fn compare_strategies<T: Scalar>(
    batch: &TaskBatch<T>,
    inventory: &Inventory<T>,
    k: usize,
    seeds: &[u64],
) -> Result<Comparison<T>> {
    if seeds.is_empty() {
        return Err(invalid("MDC comparison needs at least one seed"));
    }
    let local = estimate_local(batch, &inventory.local)?;
    let mut mdc_sum = T::zero();
    let mut reassignments = 0;
    for &seed in seeds {
        let r = estimate_mdc(batch, &inventory.peers, seed)?;
        mdc_sum = mdc_sum + r.makespan;
        reassignments += r.reassignments;
    }
    let mdc = ExecutionReport {
        strategy: ExecutionStrategy::Mdc,
        makespan: mdc_sum / T::from_count(seeds.len()),
        reassignments,
        completed_work: batch.total_work(),
    };
    let single = estimate_mec(batch, &inventory.servers, 1)?;
    let collab = estimate_mec(batch, &inventory.servers, k)?;
    Ok(Comparison {
        reports: vec![local, mdc, single, collab],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(n: usize, bits: f64, work: f64) -> TaskBatch<f64> {
        TaskBatch::new(n, bits, work).unwrap()
    }

    #[test]
    fn local_is_work_over_speed() {
        let b = batch(20, 1e6, 1.0);
        let r = estimate_local(&b, &ResourceNode::local(1.0)).unwrap();
        assert_eq!(r.makespan, 20.0);
        assert_eq!(r.reassignments, 0);
        let fast = estimate_local(&b, &ResourceNode::local(2.0)).unwrap();
        assert_eq!(fast.makespan, 10.0);
        assert!(TaskBatch::new(20, 1e6, 0.0).is_err());
        assert!(estimate_local(&b, &ResourceNode::edge(1.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn reference_batch_bits() {
        assert_eq!(RAW_IMAGE_BITS, 3_705_624.0);
        let b = TaskBatch::<f64>::reference();
        assert!((b.input_bits_per_task - 370_562.4).abs() < 1e-6);
    }

    #[test]
    fn single_peer_equals_local_plus_transfer() {
        let b = batch(20, 2e6, 3.0);
        let r = estimate_mdc(&b, &[ResourceNode::peer(1.0, 1.0, 1e9, 0.0)], 1).unwrap();
        assert!((r.makespan - (60.0 + 40.0)).abs() < 1e-9);
    }

    #[test]
    fn deterministic_round_robin() {
        // 4 equal peers, 20 equal tasks: 5 tasks each, each 1 s upload + 2 s compute.
        let b = batch(20, 1e6, 2.0);
        let peers = vec![ResourceNode::peer(1.0, 1.0, 1e9, 0.0); 4];
        let r = estimate_mdc(&b, &peers, 7).unwrap();
        assert!((r.makespan - 15.0).abs() < 1e-9);
        assert_eq!(r.reassignments, 0);
        assert_eq!(r.completed_work, 40.0);
    }

    #[test]
    fn departure_reassigns_remaining_tasks() {
        // Task time 4 s. Peer 0 leaves at 6 s while running task 3, which goes
        // to peer 1 at t = 6 and runs 8..12.
        let b = batch(6, 1e6, 3.0);
        let mut peers = vec![ResourceNode::peer(1.0, 1.0, 1000.0, 0.0); 3];
        peers[0] = ResourceNode::peer(1.0, 1.0, 6.0, 0.0);
        let r = estimate_mdc(&b, &peers, 0).unwrap();
        assert_eq!(r.reassignments, 1);
        assert!((r.makespan - 12.0).abs() < 1e-9);
        assert_eq!(r.completed_work, 18.0);

        // Peer 0 leaves at 3 s before finishing anything: tasks 0 and 3 go to
        // peers 1 and 2, both finishing at 12.
        peers[0] = ResourceNode::peer(1.0, 1.0, 3.0, 0.0);
        let r = estimate_mdc(&b, &peers, 0).unwrap();
        assert_eq!(r.reassignments, 2);
        assert!((r.makespan - 12.0).abs() < 1e-9);
    }

    #[test]
    fn everyone_leaving_is_an_error() {
        let b = batch(6, 1e6, 3.0);
        let peers = vec![ResourceNode::peer(1.0, 1.0, 1.0, 0.0); 3];
        assert!(matches!(estimate_mdc(&b, &peers, 0), Err(Error::IncompleteExecution(_))));
        assert!(estimate_mdc(&b, &[], 0).is_err());
    }

    #[test]
    fn mdc_is_seed_deterministic() {
        let b = batch(20, 1e6, 4.0);
        let peers = vec![ResourceNode::peer(1.0, 1.0, 40.0, 5.0); 6];
        let a = estimate_mdc(&b, &peers, 3);
        let c = estimate_mdc(&b, &peers, 3);
        assert_eq!(a, c);
    }

    #[test]
    fn mec_split_cases() {
        let servers = vec![ResourceNode::edge(8.0, 1.0, 0.0); 2];
        let one = batch(1, 1e6, 8.0);
        assert_eq!(
            estimate_mec(&one, &servers, 1).unwrap().makespan,
            estimate_mec(&one, &servers, 2).unwrap().makespan
        );
        let b = batch(20, 1e6, 8.0);
        let m1 = estimate_mec(&b, &servers, 1).unwrap().makespan;
        let m2 = estimate_mec(&b, &servers, 2).unwrap().makespan;
        assert_eq!(m2, m1 / 2.0);
        assert!(estimate_mec(&b, &servers, 0).is_err());
        assert!(estimate_mec(&b, &servers, 3).is_err());
    }

    #[test]
    fn uneven_split_gives_remainder_to_low_ids() {
        let servers = vec![ResourceNode::edge(1.0, 1.0, 0.0); 3];
        let b = batch(7, 1e6, 1.0);
        // ceil(7/3) = 3 tasks of 2 s on server 0.
        assert_eq!(estimate_mec(&b, &servers, 3).unwrap().makespan, 6.0);
    }

    #[test]
    fn calibration_hits_target() {
        let b = TaskBatch::<f64>::reference();
        let edge = ResourceNode::edge(8.0, 1.0, 0.0);
        let o = calibrate_overhead(&b, &edge, 2, 0.40).unwrap();
        let servers = vec![ResourceNode { offload_overhead: o, ..edge }; 2];
        assert!((collab_gain(&b, &servers, 2).unwrap() - 0.40).abs() < 1e-9);
        // Closed form for an even split: overhead = task_time / 4.
        assert!((o - edge.task_time(&b) / 4.0).abs() < 1e-9);
        assert!(calibrate_overhead(&b, &edge, 2, 0.6).is_err());
    }

    #[test]
    fn reference_ordering() {
        let b = TaskBatch::<f64>::reference();
        for mu in [100.0, 200.0] {
            let inv = Inventory::reference(&b, mu).unwrap();
            let seeds: Vec<u64> = (0..20).collect();
            let cmp = compare_strategies(&b, &inv, 2, &seeds).unwrap();
            assert!(cmp.is_expected_order(), "mu {mu}: {:?}", cmp.reports);
            assert_eq!(
                cmp.ordering(),
                vec![
                    ExecutionStrategy::Local,
                    ExecutionStrategy::Mdc,
                    ExecutionStrategy::SingleMec,
                    ExecutionStrategy::CollabMec(2)
                ]
            );
        }
    }

    #[test]
    fn strategy_labels() {
        assert_eq!(ExecutionStrategy::CollabMec(2).to_string(), "collab-mec-2");
        assert_eq!(ExecutionStrategy::SingleMec.to_string(), "mec");
    }
}
