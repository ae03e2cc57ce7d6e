use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::SweepPlan;
use super::results::{Checkpoint, PointKey};
use crate::error::{Error, Result};
use crate::flicker::{FlickermeterState, PST_FLOOR};
use crate::frontend::{FirDecimator, FirFilter};
use crate::signal::{modulate_in_place, CarrierGenerator, CarrierSpec, ModulatingGenerator, ModulatingSpec, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub m_c: f64,
    pub shape: Shape,
    pub f_m: f64,
    pub depth: f64,
    pub pst: f64,
    pub below_floor: bool,
    pub wall_time: f64,
}

impl PointRecord {
    pub fn key(&self) -> PointKey {
        PointKey::new(self.m_c, self.shape, self.f_m, self.depth)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub m_c: f64,
    pub shape: Shape,
    pub f_m: f64,
    pub depth: f64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub package: String,
    pub version: String,
    pub target_os: String,
    pub target_arch: String,
    pub workers: usize,
    pub resumed_points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub plan_name: String,
    pub stage: u8,
    pub fingerprint: String,
    pub metadata: RunMetadata,
    /// Successful points in plan grid order.
    pub records: Vec<PointRecord>,
    pub failures: Vec<PointFailure>,
    /// Points skipped because the run was cancelled.
    pub cancelled: usize,
}

impl SweepResult {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty() && self.cancelled == 0
    }

    pub fn find(&self, m_c: f64, shape: Shape, f_m: f64, depth: f64) -> Option<&PointRecord> {
        let key = PointKey::new(m_c, shape, f_m, depth);
        self.records.iter().find(|r| r.key() == key)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; 0 means one.
    pub workers: usize,
    /// Append-only results file used to resume interrupted sweeps.
    pub checkpoint: Option<PathBuf>,
    /// Set to stop scheduling new points.
    pub cancel: Option<Arc<AtomicBool>>,
}

/// One grid cell of a plan.
#[derive(Debug, Clone, Copy)]
pub struct GridPoint {
    pub carrier: CarrierSpec,
    pub modulating: ModulatingSpec,
}

/// Grid cells in carrier → shape → f_m → depth order.
pub fn grid_points(plan: &SweepPlan) -> Vec<GridPoint> {
    let mut points = Vec::with_capacity(plan.grid_len());
    for carrier in &plan.carriers {
        for &shape in &plan.shapes {
            for &f_m in &plan.fm_grid {
                for &depth in &plan.depth_grid {
                    points.push(GridPoint {
                        carrier: *carrier,
                        modulating: ModulatingSpec {
                            shape,
                            f_m,
                            depth,
                            phase: plan.phase,
                        },
                    });
                }
            }
        }
    }
    points
}

/// Synthesizes `settle + measure` seconds of the modulated carrier in
/// one-second chunks, band-limits and decimates them, and measures Pst over
/// the window following the settling interval.
pub fn run_point(carrier: &CarrierSpec, modulating: &ModulatingSpec, plan: &SweepPlan) -> Result<PointRecord> {
    plan.validate()?;
    let filter = plan.chain.design()?;
    Ok(run_point_with_filter(carrier, modulating, plan, &filter)?.0)
}

/// As [`run_point`], also returning the meter so its P_inst trace can be dumped.
pub fn run_point_traced(
    carrier: &CarrierSpec,
    modulating: &ModulatingSpec,
    plan: &SweepPlan,
) -> Result<(PointRecord, FlickermeterState)> {
    plan.validate()?;
    let filter = plan.chain.design()?;
    run_point_with_filter(carrier, modulating, plan, &filter)
}

fn run_point_with_filter(
    carrier: &CarrierSpec,
    modulating: &ModulatingSpec,
    plan: &SweepPlan,
    filter: &FirFilter,
) -> Result<(PointRecord, FlickermeterState)> {
    let started = Instant::now();
    let fs = plan.chain.synthesis_rate;
    let carrier_gen = CarrierGenerator::new(*carrier, fs)?;
    let mod_gen = ModulatingGenerator::new(*modulating, fs)?;
    let mut decimator = FirDecimator::new(filter, plan.chain.decimation)?;
    let meter_config = plan.flickermeter_config();
    let mut meter = FlickermeterState::new(meter_config)?;
    let needed = meter_config.required_input_samples();

    let chunk = fs.round() as usize;
    let mut u = vec![0.0; chunk];
    let mut m = vec![0.0; chunk];
    let mut decimated = Vec::with_capacity(chunk / plan.chain.decimation + 1);
    let mut start = 0u64;
    while meter.samples_pushed() < needed {
        carrier_gen.fill(start, &mut u);
        mod_gen.fill(start, &mut m);
        modulate_in_place(&mut u, &m, modulating.depth)?;
        decimated.clear();
        decimator.process(&u, &mut decimated);
        let remaining = (needed - meter.samples_pushed()) as usize;
        meter.push(&decimated[..remaining.min(decimated.len())])?;
        start += chunk as u64;
    }
    let reading = meter.pst()?;
    let record = PointRecord {
        m_c: carrier.m_c,
        shape: modulating.shape,
        f_m: modulating.f_m,
        depth: modulating.depth,
        pst: reading.pst,
        below_floor: reading.pst < PST_FLOOR,
        wall_time: if plan.record_wall_time {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        },
    };
    Ok((record, meter))
}

pub fn run_stage1(plan: &SweepPlan, options: &SweepOptions) -> Result<SweepResult> {
    if plan.stage != 1 {
        return Err(Error::Plan(format!("expected a stage 1 plan, got stage {}", plan.stage)));
    }
    run_sweep(plan, options)
}

pub fn run_stage2(plan: &SweepPlan, options: &SweepOptions) -> Result<SweepResult> {
    if plan.stage != 2 {
        return Err(Error::Plan(format!("expected a stage 2 plan, got stage {}", plan.stage)));
    }
    run_sweep(plan, options)
}

enum Outcome {
    Done(PointRecord),
    Failed(PointFailure),
    Skipped,
}

/// Evaluates every grid point on a worker pool. Points already present in
/// the checkpoint are reused; new points are appended to it as they finish.
pub fn run_sweep(plan: &SweepPlan, options: &SweepOptions) -> Result<SweepResult> {
    plan.validate()?;
    let filter = plan.chain.design()?;
    let fingerprint = plan.fingerprint();

    let (previous, writer) = match &options.checkpoint {
        Some(path) => {
            let (cp, records) = Checkpoint::open(path, &fingerprint)?;
            (records, Some(Mutex::new(cp)))
        }
        None => (Vec::new(), None),
    };
    let previous: HashMap<PointKey, PointRecord> = previous.into_iter().map(|r| (r.key(), r)).collect();

    let workers = options.workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Plan(format!("worker pool: {e}")))?;

    let points = grid_points(plan);
    let mut resumed = 0;
    let outcomes: Vec<Outcome> = pool.install(|| {
        points
            .par_iter()
            .map(|p| {
                let key = PointKey::new(p.carrier.m_c, p.modulating.shape, p.modulating.f_m, p.modulating.depth);
                if let Some(done) = previous.get(&key) {
                    return Ok(Outcome::Done(*done));
                }
                if options.cancel.as_ref().is_some_and(|c| c.load(Ordering::SeqCst)) {
                    return Ok(Outcome::Skipped);
                }
                match run_point_with_filter(&p.carrier, &p.modulating, plan, &filter) {
                    Ok((record, _)) => {
                        if let Some(w) = &writer {
                            w.lock().expect("checkpoint lock").append(&record)?;
                        }
                        Ok(Outcome::Done(record))
                    }
                    Err(e) => Ok(Outcome::Failed(PointFailure {
                        m_c: p.carrier.m_c,
                        shape: p.modulating.shape,
                        f_m: p.modulating.f_m,
                        depth: p.modulating.depth,
                        error: e.to_string(),
                    })),
                }
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut cancelled = 0;
    for o in outcomes {
        match o {
            Outcome::Done(r) => {
                if previous.contains_key(&r.key()) {
                    resumed += 1;
                }
                records.push(r);
            }
            Outcome::Failed(f) => failures.push(f),
            Outcome::Skipped => cancelled += 1,
        }
    }

    Ok(SweepResult {
        plan_name: plan.name.clone(),
        stage: plan.stage,
        fingerprint,
        metadata: RunMetadata {
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            target_os: std::env::consts::OS.into(),
            target_arch: std::env::consts::ARCH.into(),
            workers,
            resumed_points: resumed,
        },
        records,
        failures,
        cancelled,
    })
}
