//! Pull-based three-echelon supply-chain environment.
//!
//! Echelon 0 is the retailer, 1 the warehouse and 2 the factory. A step runs
//! five phases in a fixed order:
//!
//! 1. arrivals: pipeline entries due this step land at their destination,
//!    clamped to capacity (overflow is discarded and reported);
//! 2. demand: customer demand is served from retailer stock, unmet demand
//!    is lost and counts as one stockout event;
//! 3. ordering: the reorder point always updates; if the retailer is below
//!    it and nothing is in transit, every echelon orders from upstream,
//!    clipped by upstream stock and by its own headroom;
//! 4. reward: holding plus stockout cost on post-phase inventories;
//! 5. the day advances and termination is checked.

use serde::{Deserialize, Serialize};

use crate::demand::{DemandStream, Task};
use crate::error::{Error, Result};
use crate::rng::{stream, SimRng};

pub const ECHELONS: usize = 3;
pub const OBS_DIM: usize = 10;

/// Which pipeline entries close the order gate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransitGate {
    /// Only shipments headed for the retailer block new orders.
    #[default]
    Retailer,
    /// Any shipment anywhere in the chain blocks new orders.
    System,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub capacities: [i64; ECHELONS],
    pub holding_costs: [f64; ECHELONS],
    pub stockout_cost: f64,
    /// Warehouse processing time (PT_1), days.
    pub processing_time_warehouse: i64,
    /// Factory processing time (PT_2), days.
    pub processing_time_factory: i64,
    /// Retailer service time (ST_0), days.
    pub service_time: i64,
    pub max_days: i64,
    pub max_stockouts: u32,
    pub initial_inventory: [i64; ECHELONS],
    pub max_order: [i64; ECHELONS],
    pub reorder_point_max: i64,
    pub transit_gate: TransitGate,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            capacities: [30, 30, 30],
            holding_costs: [1000.0, 5.0, 1000.0],
            stockout_cost: 10000.0,
            processing_time_warehouse: 3,
            processing_time_factory: 1,
            service_time: 0,
            max_days: 30,
            max_stockouts: 3,
            initial_inventory: [10, 0, 0],
            max_order: [10, 30, 30],
            reorder_point_max: 10,
            transit_gate: TransitGate::Retailer,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let costs_ok = self
            .holding_costs
            .iter()
            .all(|c| c.is_finite() && *c >= 0.0)
            && self.stockout_cost.is_finite()
            && self.stockout_cost >= 0.0;
        if !costs_ok {
            return Err(Error::Config("costs must be finite and >= 0".into()));
        }
        for i in 0..ECHELONS {
            if self.capacities[i] <= 0 {
                return Err(Error::Config(format!(
                    "capacity of echelon {i} must be > 0"
                )));
            }
            if self.max_order[i] < 0 || self.max_order[i] > self.capacities[i] {
                return Err(Error::Config(format!(
                    "max_order of echelon {i} must lie in [0, capacity]"
                )));
            }
            if self.initial_inventory[i] < 0 || self.initial_inventory[i] > self.capacities[i] {
                return Err(Error::Config(format!(
                    "initial inventory of echelon {i} must lie in [0, capacity]"
                )));
            }
        }
        if self.max_days <= 0 {
            return Err(Error::Config("max_days must be > 0".into()));
        }
        if self.processing_time_warehouse < 0
            || self.processing_time_factory < 0
            || self.service_time < 0
            || self.reorder_point_max < 0
        {
            return Err(Error::Config(
                "lead times and reorder_point_max must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Number of discrete choices per action head: Q_0, Q_1, Q_2, R_0.
    pub fn head_sizes(&self) -> [usize; 4] {
        [
            self.max_order[0] as usize + 1,
            self.max_order[1] as usize + 1,
            self.max_order[2] as usize + 1,
            self.reorder_point_max as usize + 1,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineEntry {
    pub destination: usize,
    pub quantity: i64,
    pub arrival_day: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub day: i64,
    pub inventories: [i64; ECHELONS],
    pub pipeline: Vec<PipelineEntry>,
    pub stockout_count: u32,
    pub demand_stream: DemandStream,
    pub last_demand: i64,
    pub reorder_point: i64,
    pub done: bool,
}

impl EnvState {
    pub fn in_transit(&self) -> [i64; ECHELONS] {
        let mut out = [0; ECHELONS];
        for e in &self.pipeline {
            out[e.destination] += e.quantity;
        }
        out
    }
}

/// Order quantities per echelon plus the retailer reorder point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionVector {
    pub orders: [i64; ECHELONS],
    pub reorder_point: i64,
}

impl ActionVector {
    pub fn new(q0: i64, q1: i64, q2: i64, r0: i64) -> Self {
        Self {
            orders: [q0, q1, q2],
            reorder_point: r0,
        }
    }

    /// Builds an action from raw head indices (Q_0, Q_1, Q_2, R_0).
    pub fn from_indices(idx: [usize; 4]) -> Self {
        Self::new(idx[0] as i64, idx[1] as i64, idx[2] as i64, idx[3] as i64)
    }

    pub fn clamped(self, config: &EnvConfig) -> Self {
        let mut out = self;
        for i in 0..ECHELONS {
            out.orders[i] = out.orders[i].clamp(0, config.max_order[i]);
        }
        out.reorder_point = out.reorder_point.clamp(0, config.reorder_point_max);
        out
    }
}

pub type Observation = [f64; OBS_DIM];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    /// Zero-based day index on which this step was taken.
    pub day: i64,
    pub demand: i64,
    pub sold: i64,
    pub unmet_demand: i64,
    pub stockout_count: u32,
    pub orders_placed: bool,
    /// The action after clamping to its declared ranges.
    pub action: ActionVector,
    /// Quantity each echelon obtained from upstream this step.
    pub shipped: [i64; ECHELONS],
    /// Quantity accepted into each inventory from arrivals (and, for the
    /// factory, same-day production).
    pub received: [i64; ECHELONS],
    /// Arrival quantity discarded because the destination was full.
    pub overflow: [i64; ECHELONS],
    /// Quantity each echelon sent downstream.
    pub shipped_out: [i64; ECHELONS],
    pub inventories: [i64; ECHELONS],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Shared reward: stockout penalty on unmet demand plus holding cost on
/// every echelon.
pub fn compute_reward(inventories: &[i64; ECHELONS], demand: i64, config: &EnvConfig) -> f64 {
    let unmet = (demand - inventories[0]).max(0);
    let mut r = -config.stockout_cost * unmet as f64;
    for i in 0..ECHELONS {
        r -= config.holding_costs[i] * inventories[i].min(config.capacities[i]) as f64;
    }
    r
}

pub fn is_order_triggered(state: &EnvState, gate: TransitGate) -> bool {
    let blocked = match gate {
        TransitGate::Retailer => state.pipeline.iter().any(|e| e.destination == 0),
        TransitGate::System => !state.pipeline.is_empty(),
    };
    state.inventories[0] < state.reorder_point && !blocked
}

pub fn clip_order(requested: i64, upstream_available: i64, headroom: i64) -> i64 {
    requested.min(upstream_available).min(headroom).max(0)
}

pub fn observation_vector(state: &EnvState, config: &EnvConfig) -> Observation {
    let inv = state.inventories;
    let transit = state.in_transit();
    [
        inv[0] as f64,
        inv[1] as f64,
        inv[2] as f64,
        state.last_demand as f64,
        transit[0] as f64,
        transit[1] as f64,
        transit[2] as f64,
        config.processing_time_warehouse as f64,
        config.processing_time_factory as f64,
        config.service_time as f64,
    ]
}

/// Builds a fresh episode state around an existing demand stream.
pub fn initial_state(config: &EnvConfig, demand_stream: DemandStream) -> EnvState {
    EnvState {
        day: 0,
        inventories: config.initial_inventory,
        pipeline: Vec::new(),
        stockout_count: 0,
        demand_stream,
        last_demand: 0,
        reorder_point: 0,
        done: false,
    }
}

/// Fresh state with a demand stream seeded for phase 0 of `seed`.
pub fn reset(config: &EnvConfig, task: Task, seed: u64) -> (EnvState, Observation) {
    let stream = demand_stream_for(task, seed, 0);
    let state = initial_state(config, stream);
    let obs = observation_vector(&state, config);
    (state, obs)
}

/// Demand stream for the given run seed and schedule phase.
pub fn demand_stream_for(task: Task, seed: u64, phase: u64) -> DemandStream {
    DemandStream::new(
        task.config(),
        SimRng::new(seed, stream::DEMAND_BASE + phase),
    )
}

/// Advances `state` by one day. See the module docs for phase semantics.
pub fn step(state: &mut EnvState, config: &EnvConfig, action: ActionVector) -> Result<StepResult> {
    if state.done {
        return Err(Error::Usage(
            "step called on a finished episode; reset first".into(),
        ));
    }
    let action = action.clamped(config);
    let today = state.day;
    let mut received = [0i64; ECHELONS];
    let mut overflow = [0i64; ECHELONS];
    let mut shipped = [0i64; ECHELONS];
    let mut shipped_out = [0i64; ECHELONS];

    // 1. arrivals
    let due = today + 1;
    let mut pending = Vec::with_capacity(state.pipeline.len());
    for entry in state.pipeline.drain(..) {
        if entry.arrival_day <= due {
            let d = entry.destination;
            let room = config.capacities[d] - state.inventories[d];
            let accepted = entry.quantity.min(room.max(0));
            state.inventories[d] += accepted;
            received[d] += accepted;
            overflow[d] += entry.quantity - accepted;
        } else {
            pending.push(entry);
        }
    }
    state.pipeline = pending;

    // 2. demand
    let demand = state.demand_stream.next_demand();
    let sold = demand.min(state.inventories[0]);
    state.inventories[0] -= sold;
    let unmet = demand - sold;
    if unmet > 0 {
        state.stockout_count += 1;
    }
    state.last_demand = demand;

    // 3. ordering
    state.reorder_point = action.reorder_point;
    let orders_placed = is_order_triggered(state, config.transit_gate);
    if orders_placed {
        let transit = state.in_transit();
        let headroom =
            |s: &EnvState, i: usize| config.capacities[i] - s.inventories[i] - transit[i];

        let q0 = clip_order(action.orders[0], state.inventories[1], headroom(state, 0));
        if q0 > 0 {
            state.inventories[1] -= q0;
            state.pipeline.push(PipelineEntry {
                destination: 0,
                quantity: q0,
                arrival_day: today + 1 + config.processing_time_warehouse + config.service_time,
            });
        }
        shipped[0] = q0;
        shipped_out[1] = q0;

        let q1 = clip_order(action.orders[1], state.inventories[2], headroom(state, 1));
        if q1 > 0 {
            state.inventories[2] -= q1;
            state.pipeline.push(PipelineEntry {
                destination: 1,
                quantity: q1,
                arrival_day: today + 1 + config.processing_time_factory,
            });
        }
        shipped[1] = q1;
        shipped_out[2] = q1;

        // raw material is unlimited; production lands the same day
        let q2 = clip_order(action.orders[2], i64::MAX, headroom(state, 2));
        state.inventories[2] += q2;
        shipped[2] = q2;
        received[2] += q2;
    }

    // 4. reward. Post-sale I_0 is zero whenever demand went unmet, so
    // passing the unmet quantity charges exactly the lost sales.
    let reward = compute_reward(&state.inventories, unmet, config);

    // 5. clock and termination
    state.day += 1;
    state.done = state.stockout_count > config.max_stockouts || state.day > config.max_days;

    Ok(StepResult {
        observation: observation_vector(state, config),
        reward,
        done: state.done,
        info: StepInfo {
            day: today,
            demand,
            sold,
            unmet_demand: unmet,
            stockout_count: state.stockout_count,
            orders_placed,
            action,
            shipped,
            received,
            overflow,
            shipped_out,
            inventories: state.inventories,
        },
    })
}

/// A single environment instance bound to a task.
///
/// Episode resets keep the demand stream running; only [`reseed`](Self::reseed)
/// or [`set_task`](Self::set_task) replaces it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupplyChainEnv {
    config: EnvConfig,
    task: Task,
    state: EnvState,
}

impl SupplyChainEnv {
    pub fn new(config: EnvConfig, task: Task, seed: u64) -> Result<Self> {
        config.validate()?;
        let (state, _) = reset(&config, task, seed);
        Ok(Self {
            config,
            task,
            state,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    /// Starts a new episode, keeping the demand stream phase.
    pub fn reset(&mut self) -> Observation {
        let stream = self.state.demand_stream.clone();
        self.state = initial_state(&self.config, stream);
        self.observation()
    }

    /// Starts a new episode with a freshly seeded demand stream.
    pub fn reseed(&mut self, seed: u64) -> Observation {
        self.set_task(self.task, seed, 0)
    }

    /// Switches demand regime and starts a new episode.
    pub fn set_task(&mut self, task: Task, seed: u64, phase: u64) -> Observation {
        self.task = task;
        self.state = initial_state(&self.config, demand_stream_for(task, seed, phase));
        self.observation()
    }

    pub fn step(&mut self, action: ActionVector) -> Result<StepResult> {
        step(&mut self.state, &self.config, action)
    }

    pub fn observation(&self) -> Observation {
        observation_vector(&self.state, &self.config)
    }
}

/// One row of the step-trace CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub day: i64,
    pub task: String,
    #[serde(rename = "I0")]
    pub i0: i64,
    #[serde(rename = "I1")]
    pub i1: i64,
    #[serde(rename = "I2")]
    pub i2: i64,
    pub demand: i64,
    #[serde(rename = "Q0")]
    pub q0: i64,
    #[serde(rename = "Q1")]
    pub q1: i64,
    #[serde(rename = "Q2")]
    pub q2: i64,
    #[serde(rename = "R0")]
    pub r0: i64,
    pub shipped0: i64,
    pub shipped1: i64,
    pub shipped2: i64,
    pub reward: f64,
    pub stockouts: u32,
    pub done: bool,
}

pub const TRACE_HEADER: [&str; 16] = [
    "day",
    "task",
    "I0",
    "I1",
    "I2",
    "demand",
    "Q0",
    "Q1",
    "Q2",
    "R0",
    "shipped0",
    "shipped1",
    "shipped2",
    "reward",
    "stockouts",
    "done",
];

impl TraceRow {
    pub fn new(task: Task, result: &StepResult) -> Self {
        let info = &result.info;
        Self {
            day: info.day,
            task: task.name().to_string(),
            i0: info.inventories[0],
            i1: info.inventories[1],
            i2: info.inventories[2],
            demand: info.demand,
            q0: info.action.orders[0],
            q1: info.action.orders[1],
            q2: info.action.orders[2],
            r0: info.action.reorder_point,
            shipped0: info.shipped[0],
            shipped1: info.shipped[1],
            shipped2: info.shipped[2],
            reward: result.reward,
            stockouts: info.stockout_count,
            done: result.done,
        }
    }
}
