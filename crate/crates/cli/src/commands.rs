//! Command implementations behind the CLI subcommands.

use std::path::Path;

use serde_json::{json, Map, Value};

use rollsim_core::balance::{balance_dp, brute_force_pack, imbalance, pack_joint, BinNorm, ItemCost};
use rollsim_core::error::{Error, Result};
use rollsim_core::gym::{expand_trajectory, trajectory_load, Trajectory};
use rollsim_core::memory::{comm_buffer_bytes, peak_activation, BufferPath, BufferRegistry};
use rollsim_core::partition::{
    build_dispatch, mtp_cross_stage_bytes, mtp_head_input, naive_gather_volume, partition_compat,
    plan_shards, upstream_dispatch_volume, MtpLayout, MtpOption,
};
use rollsim_core::report::to_stable_document;
use rollsim_core::reward::source_report;
use rollsim_core::workload::{write_trace, RolloutSample, VisualInput};
use rollsim_core::{compare_policies, engine::trace_to_string, PolicyRun};

use crate::config::{Scenario, SweepParam};
use crate::output::Artifacts;
use crate::report::{
    dispatch_to_value, metrics_csv, metrics_to_value, pack_plan_to_value, partition_plan_to_value,
    sources_to_value, timeline_csv,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

fn expand_all(scenario: &Scenario, samples: &[RolloutSample]) -> Result<Vec<Trajectory>> {
    samples
        .iter()
        .map(|s| expand_trajectory(s, &scenario.task, scenario.seed))
        .collect()
}

fn config_value(scenario: &Scenario) -> Value {
    serde_json::to_value(scenario).expect("scenario serializes")
}

/// Generate a workload trace at `<out>/trace.jsonl`.
pub fn cmd_gen(scenario: &Scenario, base_dir: &Path) -> Result<Artifacts> {
    let samples = scenario.samples(base_dir)?;
    let mut buf = Vec::new();
    write_trace(&samples, &mut buf)?;
    let mut artifacts = Artifacts::default();
    artifacts.add(
        "trace.jsonl",
        String::from_utf8(buf).expect("trace is utf-8"),
    );
    Ok(artifacts)
}

fn memory_value(scenario: &Scenario, samples: &[RolloutSample]) -> Result<Option<Value>> {
    let Some(section) = &scenario.memory else {
        return Ok(None);
    };
    let mut out = Map::new();
    if let Some(model) = &section.model {
        // Worst-case sample: the one with the most merged visual tokens.
        let worst = samples
            .iter()
            .max_by_key(|s| (s.vit_tokens(), std::cmp::Reverse(s.id)));
        if let Some(sample) = worst {
            let naive = peak_activation(&sample.visuals, &model.naive())?;
            let optimized = peak_activation(&sample.visuals, &model.recompute_offload())?;
            let configured = peak_activation(&sample.visuals, model)?;
            out.insert(
                "peak_activation".into(),
                json!({
                    "sample_id": sample.id,
                    "image_count": sample.visuals.len(),
                    "merged_tokens": sample.vit_tokens(),
                    "naive_bytes": naive,
                    "recompute_offload_bytes": optimized,
                    "configured_bytes": configured,
                }),
            );
        }
    }
    if !section.buffers.is_empty() {
        let mut registry = BufferRegistry::new(section.buffers.clone())?;
        let (gpu_before, host_before) = comm_buffer_bytes(&registry);
        for name in &section.migrate_to_host {
            registry.migrate(name, BufferPath::HostComm)?;
        }
        let (gpu_after, host_after) = comm_buffer_bytes(&registry);
        out.insert(
            "buffers".into(),
            json!({
                "gpu_before_bytes": gpu_before,
                "host_before_bytes": host_before,
                "gpu_after_bytes": gpu_after,
                "host_after_bytes": host_after,
                "gpu_reduction_bytes": gpu_before - gpu_after,
            }),
        );
    }
    if out.is_empty() {
        Ok(None)
    } else {
        Ok(Some(Value::Object(out)))
    }
}

fn run_policies(scenario: &Scenario, samples: &[RolloutSample]) -> Result<Vec<PolicyRun>> {
    let trajectories = expand_all(scenario, samples)?;
    compare_policies(
        &trajectories,
        &scenario.resources,
        &scenario.policies,
        &scenario.reward,
        scenario.seed,
        scenario.iterations,
    )
}

/// Run `compare_policies` and write the JSON report, per-run timelines and
/// event traces.
pub fn cmd_simulate(scenario: &Scenario, base_dir: &Path, format: Format) -> Result<Artifacts> {
    let samples = scenario.samples(base_dir)?;
    let runs = run_policies(scenario, &samples)?;

    let mut artifacts = Artifacts::default();
    let mut policies = Map::new();
    let mut csv_rows = Vec::new();
    for run in &runs {
        let mut iterations = Vec::new();
        for (i, out) in run.iterations.iter().enumerate() {
            let sources = source_report(
                &out.records,
                &samples,
                &scenario.reward.pass_ks,
                scenario.reward.success_threshold,
            )?;
            iterations.push(json!({
                "metrics": metrics_to_value(&out.metrics),
                "sources": sources_to_value(&sources),
            }));
            artifacts.add(
                format!("timeline_{}_iter{}.csv", run.policy.name, i),
                timeline_csv(out),
            );
            artifacts.add(
                format!("trace_{}_iter{}.jsonl", run.policy.name, i),
                trace_to_string(&out.trace),
            );
            csv_rows.push((run.policy.name.clone(), i, &out.metrics));
        }
        policies.insert(run.policy.name.clone(), json!({"iterations": iterations}));
    }

    let mut report = Map::new();
    report.insert("config".into(), config_value(scenario));
    if let Some(memory) = memory_value(scenario, &samples)? {
        report.insert("memory".into(), memory);
    }
    report.insert("policies".into(), Value::Object(policies));

    match format {
        Format::Json => artifacts.add("report.json", to_stable_document(&Value::Object(report))),
        Format::Csv => {
            let rows: Vec<(String, usize, &rollsim_core::IterationMetrics)> = csv_rows;
            artifacts.add("report.csv", metrics_csv(&rows));
        }
    }
    Ok(artifacts)
}

fn packing_items(scenario: &Scenario, samples: &[RolloutSample]) -> Result<Vec<ItemCost>> {
    if let Some(section) = &scenario.packing {
        if let Some(items) = &section.items {
            return Ok(items.clone());
        }
    }
    let trajectories = expand_all(scenario, samples)?;
    Ok(trajectories
        .iter()
        .map(|t| {
            let (seq, vit) = trajectory_load(t);
            ItemCost {
                id: t.sample_id,
                seq_tokens: seq,
                vit_tokens: vit,
            }
        })
        .collect())
}

/// Pack the workload (or explicit items) and report plan, imbalance and
/// the optimal objective when the oracle fits.
pub fn cmd_pack(scenario: &Scenario, base_dir: &Path, format: Format) -> Result<Artifacts> {
    let section = scenario
        .packing
        .as_ref()
        .ok_or_else(|| Error::config("packing", "section required for the pack command"))?
        .clone();
    let samples = scenario.samples(base_dir)?;
    let items = packing_items(scenario, &samples)?;
    let norm = BinNorm::from_items(&items);
    let plan = pack_joint(&items, section.num_bins, &norm, section.policy)?;
    let ratios = imbalance(&plan);

    let mut pack = Map::new();
    pack.insert("plan".into(), pack_plan_to_value(&plan, ratios));
    if section.run_oracle {
        match brute_force_pack(&items, section.num_bins, &norm) {
            Ok(optimal) => {
                pack.insert(
                    "oracle".into(),
                    json!({
                        "objective": optimal.objective,
                        "ratio": if optimal.objective > 0.0 {
                            plan.objective / optimal.objective
                        } else {
                            1.0
                        },
                    }),
                );
            }
            Err(Error::TooLarge(reason)) => {
                pack.insert("oracle_skipped".into(), json!(reason));
            }
            Err(e) => return Err(e),
        }
    }
    if scenario.topology.dp > 1 {
        // Round-robin producers model which DP rank rolled out each item.
        let producers: Vec<usize> = (0..items.len()).map(|i| i % scenario.topology.dp).collect();
        let (dp_plan, dispatch) =
            balance_dp(&items, scenario.topology.dp, &producers, section.bytes_per_token)?;
        pack.insert(
            "dp_balance".into(),
            json!({
                "plan": pack_plan_to_value(&dp_plan, imbalance(&dp_plan)),
                "dispatch": dispatch_to_value(&dispatch),
            }),
        );
    }

    let report = json!({"config": config_value(scenario), "pack": Value::Object(pack)});
    let mut artifacts = Artifacts::default();
    match format {
        Format::Json => artifacts.add("report.json", to_stable_document(&report)),
        Format::Csv => {
            let mut csv = String::from("bin,seq_load,vit_load\n");
            for (bin, (s, v)) in plan.loads.iter().enumerate() {
                csv.push_str(&format!("{bin},{s},{v}\n"));
            }
            artifacts.add("report.csv", csv);
        }
    }
    Ok(artifacts)
}

/// Shard a visual, account communication volumes, plan the dispatch and
/// compare the MMTP head-input options.
pub fn cmd_partition(scenario: &Scenario, base_dir: &Path, format: Format) -> Result<Artifacts> {
    let section = scenario.partition.clone().unwrap_or(crate::config::PartitionSection {
        visual: None,
        producers: crate::config::ProducerAssignment::Single { rank: 0 },
        layout_sample: None,
    });
    let samples = scenario.samples(base_dir)?;
    let visual: VisualInput = match section.visual {
        Some(v) => v,
        None => samples
            .iter()
            .flat_map(|s| s.visuals.iter())
            .next()
            .copied()
            .ok_or_else(|| {
                Error::Validation("no visual to partition: workload has no images".into())
            })?,
    };
    let topo = &scenario.topology;
    let plan = plan_shards(&visual, topo.cp, topo.tp);
    let naive = naive_gather_volume(&visual, topo);
    let upstream = upstream_dispatch_volume(&plan, &visual, topo)?;
    let producers = section.producers.producers(topo.cp * topo.tp);
    let dispatch = build_dispatch(&plan, &producers, &visual, topo)?;

    let layout_sample = match section.layout_sample {
        Some(id) => samples
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::Validation(format!("layout_sample {id} not in workload")))?,
        None => samples
            .first()
            .ok_or_else(|| Error::Validation("workload is empty".into()))?,
    };
    let mut mtp = Map::new();
    for (key, option) in [
        ("pass_embeddings", MtpOption::PassEmbeddings),
        ("mask_visual", MtpOption::MaskVisual),
        ("image_token", MtpOption::ImageToken),
    ] {
        let layout = MtpLayout::from_sample(layout_sample, option)?;
        let head = mtp_head_input(&layout);
        let compat = partition_compat(&layout, topo.cp);
        mtp.insert(
            key.to_string(),
            json!({
                "cross_stage_bytes": mtp_cross_stage_bytes(&layout, topo),
                "head_slots": head.slots.len(),
                "input_slots": layout.slots.len(),
                "needs_offset_remap": compat.needs_offset_remap,
                "needs_embedding_shard_alignment": compat.needs_embedding_shard_alignment,
            }),
        );
    }

    let partition = json!({
        "visual": serde_json::to_value(visual).expect("visual serializes"),
        "merged_tokens": visual.merged_tokens(),
        "raw_tokens": visual.raw_tokens(),
        "plan": partition_plan_to_value(&plan),
        "naive_gather_bytes": naive,
        "upstream_dispatch_bytes": upstream,
        "dispatch": dispatch_to_value(&dispatch),
        "dispatch_transfer_sec": dispatch.transfer_sec(topo),
        "mtp": Value::Object(mtp),
        "layout_sample_id": layout_sample.id,
    });
    let report = json!({"config": config_value(scenario), "partition": partition});
    let mut artifacts = Artifacts::default();
    match format {
        Format::Json => artifacts.add("report.json", to_stable_document(&report)),
        Format::Csv => {
            let mut csv = String::from("cp_rank,tp_rank,start,end\n");
            for s in &plan.shards {
                csv.push_str(&format!("{},{},{},{}\n", s.cp_rank, s.tp_rank, s.start, s.end));
            }
            artifacts.add("report.csv", csv);
        }
    }
    Ok(artifacts)
}

fn set_path(target: &mut Value, path: &str, new: Value) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    let mut cur = target;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        if let Ok(idx) = part.parse::<usize>() {
            let arr = cur.as_array_mut().ok_or_else(|| {
                Error::config(path, format!("`{part}` indexes into a non-array"))
            })?;
            if idx >= arr.len() {
                return Err(Error::config(path, format!("index {idx} out of bounds")));
            }
            if last {
                arr[idx] = new;
                return Ok(());
            }
            cur = &mut arr[idx];
        } else {
            let obj = cur.as_object_mut().ok_or_else(|| {
                Error::config(path, format!("`{part}` indexes into a non-object"))
            })?;
            if last {
                obj.insert(part.to_string(), new);
                return Ok(());
            }
            cur = obj
                .get_mut(*part)
                .ok_or_else(|| Error::config(path, format!("`{part}` not found")))?;
        }
    }
    Err(Error::config(path, "empty path"))
}

fn grid_points(params: &[SweepParam]) -> Vec<Vec<(String, Value)>> {
    let mut points: Vec<Vec<(String, Value)>> = vec![vec![]];
    for param in params {
        let mut next = Vec::with_capacity(points.len() * param.values.len());
        for point in &points {
            for value in &param.values {
                let mut extended = point.clone();
                extended.push((param.path.clone(), value.clone()));
                next.push(extended);
            }
        }
        points = next;
    }
    points
}

/// Grid over named config paths; one summary row per point, ordered by
/// grid index regardless of execution order.
pub fn cmd_sweep(
    scenario: &Scenario,
    raw: &Value,
    base_dir: &Path,
    parallel: usize,
    format: Format,
) -> Result<Artifacts> {
    let sweep = scenario
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep", "section required for the sweep command"))?;
    let points = grid_points(&sweep.parameters);

    let run_point = |(index, overrides): (usize, &Vec<(String, Value)>)| -> Result<Value> {
        let mut doc = raw.clone();
        if let Some(obj) = doc.as_object_mut() {
            obj.insert("seed".into(), json!(scenario.seed));
            obj.remove("sweep");
        }
        for (path, value) in overrides {
            set_path(&mut doc, path, value.clone())?;
        }
        let point_scenario = Scenario::from_value(doc)?;
        let samples = point_scenario.samples(base_dir)?;
        let runs = run_policies(&point_scenario, &samples)?;
        let mut policies = Map::new();
        for run in &runs {
            let iterations: Vec<Value> = run
                .iterations
                .iter()
                .map(|out| {
                    json!({
                        "makespan_sec": out.metrics.makespan_sec,
                        "completed": out.metrics.completed,
                        "aborted_count": out.metrics.aborted_count,
                        "reuse_hits": out.metrics.reuse_hits,
                        "bubble_fraction": out.metrics.bubble_fraction,
                    })
                })
                .collect();
            policies.insert(run.policy.name.clone(), json!(iterations));
        }
        let over: Map<String, Value> = overrides
            .iter()
            .map(|(p, v)| (p.clone(), v.clone()))
            .collect();
        Ok(json!({
            "grid_index": index,
            "overrides": Value::Object(over),
            "policies": Value::Object(policies),
        }))
    };

    let indexed: Vec<(usize, &Vec<(String, Value)>)> = points.iter().enumerate().collect();
    let rows: Result<Vec<Value>> = if parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel)
            .build()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            indexed.par_iter().map(|p| run_point(*p)).collect()
        })
    } else {
        indexed.iter().map(|p| run_point(*p)).collect()
    };
    let rows = rows?;

    let report = json!({"config": config_value(scenario), "sweep": rows});
    let mut artifacts = Artifacts::default();
    match format {
        Format::Json => artifacts.add("report.json", to_stable_document(&report)),
        Format::Csv => {
            let mut csv = String::from("grid_index,policy,iteration,makespan_sec,completed,aborted_count,reuse_hits\n");
            for row in &rows {
                let index = row["grid_index"].as_u64().expect("index");
                for (name, iters) in row["policies"].as_object().expect("policies") {
                    for (i, m) in iters.as_array().expect("iterations").iter().enumerate() {
                        csv.push_str(&format!(
                            "{},{},{},{},{},{},{}\n",
                            index,
                            name,
                            i,
                            rollsim_core::report::fmt_sig(
                                m["makespan_sec"].as_f64().expect("f64")
                            ),
                            m["completed"].as_u64().expect("u64"),
                            m["aborted_count"].as_u64().expect("u64"),
                            m["reuse_hits"].as_u64().expect("u64"),
                        ));
                    }
                }
            }
            artifacts.add("report.csv", csv);
        }
    }
    Ok(artifacts)
}
