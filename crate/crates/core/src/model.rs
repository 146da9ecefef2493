//! Semantic substrate: variables, global states, bounded synchronous runs,
//! perfect-recall observations and per-agent indistinguishability partitions.
//!
//! Global states are bit-packed into `u64` words according to a [`Signature`]
//! layout and stored time-major, one layer per time step. An agent's local
//! state at a point is the sequence of its observable-variable records from
//! time 0 up to that point; partitions are built incrementally by interning
//! `(block at t-1, record at t)`, which is exact because the intern table
//! compares full keys.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type Value = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Domain {
    Bool,
    /// Inclusive integer range.
    Range {
        lo: Value,
        hi: Value,
    },
}

impl Domain {
    pub fn values(&self) -> Vec<Value> {
        match *self {
            Domain::Bool => vec![0, 1],
            Domain::Range { lo, hi } => (lo..=hi).collect(),
        }
    }

    pub fn contains(&self, v: Value) -> bool {
        match *self {
            Domain::Bool => v == 0 || v == 1,
            Domain::Range { lo, hi } => lo <= v && v <= hi,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(*self, Domain::Range { lo, hi } if lo > hi)
    }

    pub fn is_bool(&self) -> bool {
        matches!(self, Domain::Bool)
    }

    fn lo(&self) -> Value {
        match *self {
            Domain::Bool => 0,
            Domain::Range { lo, .. } => lo,
        }
    }

    fn width(&self) -> u32 {
        let span = match *self {
            Domain::Bool => 1,
            Domain::Range { lo, hi } => (hi - lo) as u64,
        };
        (64 - span.leading_zeros()).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Owner {
    Environment,
    Agent(AgentId),
}

/// How a variable is initialised at time 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Fixed(Value),
    /// Any domain value, subject to the scenario constraint.
    Free,
    /// Environment randomness, resampled at every step; 0 at time 0.
    Fresh,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableDecl {
    pub name: String,
    pub domain: Domain,
    pub owner: Owner,
    pub observable_by: Vec<AgentId>,
    pub init: Init,
    /// History variables are written once, at this step; programs may not
    /// read them earlier.
    pub assigned_at: Option<usize>,
}

impl VariableDecl {
    pub fn env(name: impl Into<String>, domain: Domain, init: Init) -> Self {
        VariableDecl {
            name: name.into(),
            domain,
            owner: Owner::Environment,
            observable_by: Vec::new(),
            init,
            assigned_at: None,
        }
    }

    pub fn local(agent: AgentId, name: impl Into<String>, domain: Domain, init: Init) -> Self {
        VariableDecl {
            name: name.into(),
            domain,
            owner: Owner::Agent(agent),
            observable_by: vec![agent],
            init,
            assigned_at: None,
        }
    }

    pub fn observed_by(mut self, agents: impl IntoIterator<Item = AgentId>) -> Self {
        for a in agents {
            if !self.observable_by.contains(&a) {
                self.observable_by.push(a);
            }
        }
        self
    }

    pub fn assigned_at(mut self, step: usize) -> Self {
        self.assigned_at = Some(step);
        self
    }
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    word: usize,
    shift: u32,
    mask: u64,
    lo: Value,
}

type Words = SmallVec<[u64; 2]>;

/// Variable declarations, agents, horizon and the packed layout.
#[derive(Debug, Clone)]
pub struct Signature {
    agents: Vec<String>,
    vars: Vec<VariableDecl>,
    qualified: Vec<String>,
    index: HashMap<String, VarId>,
    slots: Vec<Slot>,
    stride: usize,
    horizon: usize,
    obs_masks: Vec<Words>,
    elided: Vec<String>,
}

impl Signature {
    pub fn new(agents: Vec<String>, vars: Vec<VariableDecl>, horizon: usize) -> Result<Self> {
        let mut agent_names = std::collections::HashSet::new();
        for a in &agents {
            if !agent_names.insert(a.as_str()) {
                return Err(Error::model(format!("duplicate agent `{a}`")));
            }
        }
        let mut qualified = Vec::with_capacity(vars.len());
        let mut index = HashMap::new();
        let mut slots = Vec::with_capacity(vars.len());
        let (mut word, mut shift) = (0usize, 0u32);
        for (i, v) in vars.iter().enumerate() {
            if v.domain.is_empty() {
                return Err(Error::model(format!(
                    "variable `{}` has an empty domain",
                    v.name
                )));
            }
            if let Some(a) = v.observable_by.iter().find(|a| a.0 >= agents.len()) {
                return Err(Error::model(format!(
                    "variable `{}` observable by undeclared agent #{}",
                    v.name, a.0
                )));
            }
            let q = match v.owner {
                Owner::Environment => v.name.clone(),
                Owner::Agent(a) => {
                    let owner = agents.get(a.0).ok_or_else(|| {
                        Error::model(format!("variable `{}` owned by undeclared agent", v.name))
                    })?;
                    format!("{owner}.{}", v.name)
                }
            };
            if index.insert(q.clone(), VarId(i)).is_some() {
                return Err(Error::model(format!("duplicate variable `{q}`")));
            }
            if let Init::Fixed(x) = v.init {
                if !v.domain.contains(x) {
                    return Err(Error::model(format!(
                        "initial value {x} of `{q}` outside its domain"
                    )));
                }
            }
            let width = v.domain.width();
            if shift + width > 64 {
                word += 1;
                shift = 0;
            }
            let mask = if width == 64 {
                u64::MAX
            } else {
                (1u64 << width) - 1
            };
            slots.push(Slot {
                word,
                shift,
                mask,
                lo: v.domain.lo(),
            });
            shift += width;
            qualified.push(q);
        }
        let stride = if vars.is_empty() { 1 } else { word + 1 };
        let obs_masks = (0..agents.len())
            .map(|a| {
                let mut m: Words = SmallVec::from_elem(0, stride);
                for (v, s) in vars.iter().zip(&slots) {
                    if v.observable_by.contains(&AgentId(a)) {
                        m[s.word] |= s.mask << s.shift;
                    }
                }
                m
            })
            .collect();
        Ok(Signature {
            agents,
            vars,
            qualified,
            index,
            slots,
            stride,
            horizon,
            obs_masks,
            elided: Vec::new(),
        })
    }

    /// Names that exist in the full model but were quotiented out of this one.
    pub fn with_elided(mut self, names: impl IntoIterator<Item = String>) -> Self {
        self.elided.extend(names);
        self
    }

    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn agent_name(&self, a: AgentId) -> &str {
        &self.agents[a.0]
    }

    pub fn agent_id(&self, name: &str) -> Result<AgentId> {
        self.agents
            .iter()
            .position(|a| a == name)
            .map(AgentId)
            .ok_or_else(|| Error::UnknownAgent(name.to_string()))
    }

    pub fn vars(&self) -> &[VariableDecl] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &VariableDecl {
        &self.vars[id.0]
    }

    pub fn qualified_name(&self, id: VarId) -> &str {
        &self.qualified[id.0]
    }

    pub fn var_id(&self, qualified: &str) -> Result<VarId> {
        if let Some(&id) = self.index.get(qualified) {
            return Ok(id);
        }
        let bare = qualified.rsplit('.').next().unwrap_or(qualified);
        if self.elided.iter().any(|e| e == qualified || e == bare) {
            return Err(Error::ElidedVariable(qualified.to_string()));
        }
        Err(Error::UnknownVariable(qualified.to_string()))
    }

    pub fn is_elided(&self, name: &str) -> bool {
        self.elided.iter().any(|e| e == name)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn observable(&self, agent: AgentId, var: VarId) -> bool {
        self.vars[var.0].observable_by.contains(&agent)
    }

    pub(crate) fn get(&self, words: &[u64], var: VarId) -> Value {
        let s = self.slots[var.0];
        ((words[s.word] >> s.shift) & s.mask) as Value + s.lo
    }

    pub(crate) fn set(&self, words: &mut [u64], var: VarId, value: Value) {
        let s = self.slots[var.0];
        let raw = (value - s.lo) as u64 & s.mask;
        words[s.word] = (words[s.word] & !(s.mask << s.shift)) | (raw << s.shift);
    }

    fn masked(&self, agent: AgentId, words: &[u64]) -> Words {
        self.obs_masks[agent.0]
            .iter()
            .zip(words)
            .map(|(m, w)| m & w)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalState {
    pub time: usize,
    /// Indexed by [`VarId`].
    pub values: Vec<Value>,
}

impl GlobalState {
    pub fn get(&self, var: VarId) -> Value {
        self.values[var.0]
    }

    pub fn pack(&self, sig: &Signature) -> Vec<u64> {
        let mut words = vec![0; sig.stride()];
        for (i, v) in self.values.iter().enumerate() {
            sig.set(&mut words, VarId(i), *v);
        }
        words
    }

    pub fn unpack(sig: &Signature, words: &[u64], time: usize) -> Self {
        GlobalState {
            time,
            values: (0..sig.vars().len())
                .map(|i| sig.get(words, VarId(i)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub states: Vec<GlobalState>,
}

impl Run {
    pub fn initial(&self) -> &GlobalState {
        &self.states[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    pub run: usize,
    pub time: usize,
}

impl Point {
    pub fn new(run: usize, time: usize) -> Self {
        Point { run, time }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(run {}, t={})", self.run, self.time)
    }
}

/// Perfect-recall local state: one record of observable values per time.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObservationHistory {
    pub agent: AgentId,
    pub records: Vec<Vec<(VarId, Value)>>,
}

impl ObservationHistory {
    pub fn time(&self) -> usize {
        self.records.len() - 1
    }

    /// Value of `var` in the most recent record, if the agent observes it.
    pub fn latest(&self, var: VarId) -> Option<Value> {
        self.value_at(self.time(), var)
    }

    pub fn value_at(&self, time: usize, var: VarId) -> Option<Value> {
        self.records
            .get(time)?
            .iter()
            .find(|(v, _)| *v == var)
            .map(|(_, x)| *x)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndistPartition {
    pub agent: AgentId,
    pub time: usize,
    block_of: Vec<u32>,
    num_blocks: usize,
}

impl IndistPartition {
    pub fn block(&self, run: usize) -> u32 {
        self.block_of[run]
    }

    pub fn block_ids(&self) -> &[u32] {
        &self.block_of
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn same_block(&self, a: usize, b: usize) -> bool {
        self.block_of[a] == self.block_of[b]
    }

    pub fn members(&self, block: u32) -> Vec<Point> {
        self.block_of
            .iter()
            .enumerate()
            .filter(|(_, b)| **b == block)
            .map(|(r, _)| Point::new(r, self.time))
            .collect()
    }

    pub fn blocks(&self) -> Vec<Vec<Point>> {
        let mut out = vec![Vec::new(); self.num_blocks];
        for (r, b) in self.block_of.iter().enumerate() {
            out[*b as usize].push(Point::new(r, self.time));
        }
        out
    }
}

/// Where a run came from: its initial assignment and key schedule indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct RunOrigin {
    pub initial: usize,
    pub schedule: usize,
}

/// A finite set of bounded synchronous runs plus memoized partitions.
///
/// Immutable once construction completes; all reads are `&self`.
#[derive(Debug, Clone)]
pub struct InterpretedSystem {
    sig: Arc<Signature>,
    origins: Vec<RunOrigin>,
    layers: Vec<Vec<u64>>,
    partitions: Vec<Vec<IndistPartition>>,
}

impl InterpretedSystem {
    pub(crate) fn new(
        sig: Arc<Signature>,
        origins: Vec<RunOrigin>,
        layer0: Vec<u64>,
    ) -> Result<Self> {
        let mut sys = InterpretedSystem {
            sig,
            origins,
            layers: Vec::new(),
            partitions: Vec::new(),
        };
        sys.push_layer(layer0)?;
        Ok(sys)
    }

    pub(crate) fn push_layer(&mut self, layer: Vec<u64>) -> Result<()> {
        let t = self.layers.len();
        if t > self.sig.horizon {
            return Err(Error::model(format!(
                "layer {t} beyond horizon {}",
                self.sig.horizon
            )));
        }
        if layer.len() != self.origins.len() * self.sig.stride {
            return Err(Error::model("layer size does not match run count"));
        }
        let parts = (0..self.sig.agents.len())
            .map(|a| {
                let prev = self.partitions.last().map(|p| &p[a]);
                compute_partition(&self.sig, &layer, AgentId(a), prev, t)
            })
            .collect();
        self.layers.push(layer);
        self.partitions.push(parts);
        Ok(())
    }

    /// Recompute the partitions of the last layer after in-place writes.
    pub(crate) fn refresh_last_partitions(&mut self) {
        let t = self.layers.len() - 1;
        let parts = (0..self.sig.agents.len())
            .map(|a| {
                let prev = t.checked_sub(1).map(|p| &self.partitions[p][a]);
                compute_partition(&self.sig, &self.layers[t], AgentId(a), prev, t)
            })
            .collect();
        self.partitions[t] = parts;
    }

    pub(crate) fn layer_mut(&mut self, t: usize) -> &mut [u64] {
        &mut self.layers[t]
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn signature_arc(&self) -> Arc<Signature> {
        self.sig.clone()
    }

    /// Last time step present (equals the signature horizon once complete).
    pub fn horizon(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn run_count(&self) -> usize {
        self.origins.len()
    }

    pub fn origin(&self, run: usize) -> RunOrigin {
        self.origins[run]
    }

    pub fn agents(&self) -> &[String] {
        self.sig.agents()
    }

    pub(crate) fn layer(&self, t: usize) -> &[u64] {
        &self.layers[t]
    }

    pub(crate) fn partitions_at(&self, t: usize) -> &[IndistPartition] {
        &self.partitions[t]
    }

    pub(crate) fn words(&self, p: Point) -> &[u64] {
        let s = self.sig.stride;
        &self.layers[p.time][p.run * s..(p.run + 1) * s]
    }

    pub fn check_point(&self, p: Point) -> Result<()> {
        if p.run >= self.run_count() || p.time > self.horizon() {
            return Err(Error::usage(format!("point {p} outside system")));
        }
        Ok(())
    }

    pub fn check_agent(&self, a: AgentId) -> Result<()> {
        if a.0 >= self.sig.agents.len() {
            return Err(Error::usage(format!("agent #{} not declared", a.0)));
        }
        Ok(())
    }

    fn check_time(&self, t: usize) -> Result<()> {
        if t > self.horizon() {
            return Err(Error::usage(format!(
                "time {t} exceeds horizon {}",
                self.horizon()
            )));
        }
        Ok(())
    }

    pub fn value(&self, p: Point, var: VarId) -> Value {
        self.sig.get(self.words(p), var)
    }

    pub fn value_of(&self, p: Point, qualified: &str) -> Result<Value> {
        self.check_point(p)?;
        Ok(self.value(p, self.sig.var_id(qualified)?))
    }

    pub fn state(&self, p: Point) -> Result<GlobalState> {
        self.check_point(p)?;
        Ok(GlobalState::unpack(&self.sig, self.words(p), p.time))
    }

    pub fn run(&self, run: usize) -> Result<Run> {
        self.check_point(Point::new(run, 0))?;
        let states = (0..=self.horizon())
            .map(|t| GlobalState::unpack(&self.sig, self.words(Point::new(run, t)), t));
        Ok(Run {
            states: states.collect(),
        })
    }

    pub fn points_at(&self, t: usize) -> Result<Vec<Point>> {
        self.check_time(t)?;
        Ok((0..self.run_count()).map(|r| Point::new(r, t)).collect())
    }

    pub fn observation_of(&self, p: Point, agent: AgentId) -> Result<ObservationHistory> {
        self.check_point(p)?;
        self.check_agent(agent)?;
        let observed: Vec<VarId> = (0..self.sig.vars.len())
            .map(VarId)
            .filter(|v| self.sig.observable(agent, *v))
            .collect();
        let records = (0..=p.time)
            .map(|t| {
                let w = self.words(Point::new(p.run, t));
                observed.iter().map(|v| (*v, self.sig.get(w, *v))).collect()
            })
            .collect();
        Ok(ObservationHistory { agent, records })
    }

    pub fn partition(&self, agent: AgentId, t: usize) -> Result<&IndistPartition> {
        self.check_agent(agent)?;
        self.check_time(t)?;
        Ok(&self.partitions[t][agent.0])
    }

    /// Index of the run whose initial assignment and schedule are `origin`.
    pub fn find_run(&self, origin: RunOrigin) -> Option<usize> {
        self.origins.binary_search(&origin).ok()
    }
}

fn compute_partition(
    sig: &Signature,
    layer: &[u64],
    agent: AgentId,
    prev: Option<&IndistPartition>,
    time: usize,
) -> IndistPartition {
    let stride = sig.stride;
    let runs = layer.len() / stride;
    let mut table: HashMap<(u32, Words), u32> = HashMap::with_capacity(runs.min(1 << 20));
    let mut block_of = Vec::with_capacity(runs);
    for r in 0..runs {
        let key = (
            prev.map_or(0, |p| p.block_of[r]),
            sig.masked(agent, &layer[r * stride..(r + 1) * stride]),
        );
        let next = table.len() as u32;
        block_of.push(*table.entry(key).or_insert(next));
    }
    IndistPartition {
        agent,
        time,
        block_of,
        num_blocks: table.len(),
    }
}

pub fn observation_of(
    system: &InterpretedSystem,
    point: Point,
    agent: AgentId,
) -> Result<ObservationHistory> {
    system.observation_of(point, agent)
}

pub fn points_at(system: &InterpretedSystem, time: usize) -> Result<Vec<Point>> {
    system.points_at(time)
}

pub fn build_partition(
    system: &InterpretedSystem,
    agent: AgentId,
    time: usize,
) -> Result<IndistPartition> {
    system.partition(agent, time).cloned()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> InterpretedSystem {
        // Two agents; A observes x, B observes y. Two steps: y copies x at t=1.
        let a = AgentId(0);
        let b = AgentId(1);
        let vars = vec![
            VariableDecl::env("x", Domain::Range { lo: 0, hi: 2 }, Init::Free).observed_by([a]),
            VariableDecl::env("y", Domain::Bool, Init::Fixed(0)).observed_by([b]),
        ];
        let sig = Arc::new(Signature::new(vec!["A".into(), "B".into()], vars, 1).unwrap());
        let origins: Vec<_> = (0..3)
            .map(|i| RunOrigin {
                initial: i,
                schedule: 0,
            })
            .collect();
        let mut l0 = vec![0u64; 3 * sig.stride()];
        for r in 0..3 {
            sig.set(&mut l0[r..r + 1], VarId(0), r as Value);
        }
        let mut sys = InterpretedSystem::new(sig.clone(), origins, l0.clone()).unwrap();
        let mut l1 = l0;
        for r in 0..3 {
            let x = sig.get(&l1[r..r + 1], VarId(0));
            sig.set(&mut l1[r..r + 1], VarId(1), (x == 2) as Value);
        }
        sys.push_layer(l1).unwrap();
        sys
    }

    #[test]
    fn packing_round_trips() {
        let vars = vec![
            VariableDecl::env("a", Domain::Range { lo: -3, hi: 40 }, Init::Free),
            VariableDecl::env("b", Domain::Bool, Init::Free),
        ];
        let sig = Signature::new(vec![], vars, 0).unwrap();
        let mut w = vec![0; sig.stride()];
        sig.set(&mut w, VarId(0), -3);
        sig.set(&mut w, VarId(1), 1);
        assert_eq!(sig.get(&w, VarId(0)), -3);
        sig.set(&mut w, VarId(0), 40);
        assert_eq!(sig.get(&w, VarId(0)), 40);
        assert_eq!(sig.get(&w, VarId(1)), 1);
    }

    #[test]
    fn rejects_bad_declarations() {
        let dup = vec![
            VariableDecl::env("a", Domain::Bool, Init::Free),
            VariableDecl::env("a", Domain::Bool, Init::Free),
        ];
        assert!(Signature::new(vec![], dup, 0).is_err());
        let empty = vec![VariableDecl::env(
            "a",
            Domain::Range { lo: 1, hi: 0 },
            Init::Free,
        )];
        assert!(Signature::new(vec![], empty, 0).is_err());
        let ghost =
            vec![VariableDecl::env("a", Domain::Bool, Init::Free).observed_by([AgentId(3)])];
        assert!(Signature::new(vec!["A".into()], ghost, 0).is_err());
    }

    #[test]
    fn partitions_follow_observations() {
        let sys = tiny();
        let a = AgentId(0);
        let b = AgentId(1);
        assert_eq!(sys.partition(a, 0).unwrap().num_blocks(), 3);
        assert_eq!(sys.partition(b, 0).unwrap().num_blocks(), 1);
        let pb = sys.partition(b, 1).unwrap();
        assert_eq!(pb.num_blocks(), 2);
        assert!(pb.same_block(0, 1));
        assert!(!pb.same_block(0, 2));
        assert!(sys.partition(a, 2).is_err());
    }

    #[test]
    fn observation_prefix_has_one_record_per_time() {
        let sys = tiny();
        let h = sys.observation_of(Point::new(2, 1), AgentId(1)).unwrap();
        assert_eq!(h.records.len(), 2);
        assert_eq!(h.latest(VarId(1)), Some(1));
        assert_eq!(h.latest(VarId(0)), None);
        assert!(sys.observation_of(Point::new(5, 0), AgentId(0)).is_err());
        assert!(sys.observation_of(Point::new(0, 0), AgentId(7)).is_err());
    }

    #[test]
    fn points_at_validates_time() {
        let sys = tiny();
        assert_eq!(sys.points_at(0).unwrap().len(), 3);
        assert!(sys.points_at(2).is_err());
    }
}
