use std::fmt::Display;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use median_consensus::cohesion::{enumerate_maximal_cohesive_sets, NodeSet, DEFAULT_ENUMERATION_BOUND};
use median_consensus::dynamics::{
    default_budget, ensemble, replica_rng, run, EnsembleConfig, InitialSampler, InitialSpec, ReplicaSchedule,
    ScheduleKind, Step, Trajectory, UpdateSchedule,
};
use median_consensus::equilibria::{
    build_update_sequence, classify, decide_consensus_from_distinct, decide_consensus_reachable,
    enumerate_equilibria, is_equilibrium_structural, ClassifyBounds, ConsensusCertificate,
    DEFAULT_DECISION_BOUND, DEFAULT_STATE_BUDGET,
};
use median_consensus::hardness::{
    brute_force_nae3sat, build_svc, certificate_from_assignment, parse_instance, reduction_roundtrip,
    RoundtripBounds, DEFAULT_SAT_BOUND,
};
use median_consensus::io::{self, NetworkFormat};
use median_consensus::{fixtures, Error, Network, Rational, Scalar};
use serde::Serialize;
use serde_json::{json, Value};

use crate::{Cli, Command, Emit, Fixture, InitialArgs, InputFormat, Status};

pub fn dispatch(cli: &Cli) -> Result<Status> {
    match &cli.command {
        Command::Simulate(args) => simulate(cli, args),
        Command::Ensemble(args) => ensemble_cmd(cli, &args.init),
        Command::Analyze => analyze(cli),
        Command::Classify(args) => classify_cmd(cli, args.cohesion_bound),
        Command::Equilibria(args) => equilibria(cli, args.labels, args.values.as_deref()),
        Command::Sequence(init) => sequence(cli, init),
        Command::Decide(args) => decide(cli, args),
        Command::Reduce(args) => reduce(cli, args),
        Command::VerifyCert(args) => verify_cert(cli, &args.cert),
        Command::Generate(args) => generate(cli, args),
    }
}

fn load(cli: &Cli) -> Result<Network> {
    let path = cli.network.as_deref().ok_or_else(|| anyhow!("--network is required"))?;
    let format = cli.format.map(|f| match f {
        InputFormat::Csv => NetworkFormat::Csv,
        InputFormat::Json => NetworkFormat::Json,
    });
    io::load_network(path, format).with_context(|| format!("loading {}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => io::write_atomic(p, text.as_bytes()).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Wraps a result in the common report envelope. No timings, so identical
/// invocations give identical bytes.
fn report<T: Serialize>(cli: &Cli, result: &T) -> Result<String> {
    pretty(&json!({
        "tool": "median-consensus",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cli,
        "result": result,
    }))
}

fn strings<T: Display>(values: &[T]) -> Vec<String> {
    values.iter().map(ToString::to_string).collect()
}

fn string_trajectory(t: &Trajectory<Rational>) -> Trajectory<String> {
    Trajectory {
        initial: strings(&t.initial).into(),
        steps: t
            .steps
            .iter()
            .map(|s| Step {
                time: s.time,
                node: s.node,
                old: s.old.to_string(),
                new: s.new.to_string(),
            })
            .collect(),
        terminal: strings(&t.terminal).into(),
        converged: t.converged,
        steps_used: t.steps_used,
    }
}

fn initial_spec(init: &InitialArgs) -> Result<InitialSpec> {
    if let Some(path) = &init.initial {
        return Ok(InitialSpec::Explicit(io::parse_opinions(&read(path)?)?));
    }
    match (init.labels, init.grid, init.distinct) {
        (Some(0), _, _) => bail!("--labels must be at least 1"),
        (Some(k), _, _) => Ok(InitialSpec::IidLabels { k }),
        (_, Some(0), _) => bail!("--grid must be at least 1"),
        (_, Some(resolution), _) => Ok(InitialSpec::IidGrid { resolution }),
        (_, _, true) => Ok(InitialSpec::Distinct),
        _ => bail!("an initial state is required: --initial, --labels, --grid or --distinct"),
    }
}

/// One initial state, drawn the same way as replica 0 of an ensemble.
fn initial_state(cli: &Cli, net: &Network, init: &InitialArgs) -> Result<Vec<Rational>> {
    let spec = initial_spec(init)?;
    let x0 = spec.sample(net.n(), &mut replica_rng(cli.seed, 0));
    if x0.len() != net.n() {
        return Err(Error::DimensionMismatch {
            expected: net.n(),
            found: x0.len(),
        }
        .into());
    }
    Ok(x0)
}

fn simulate(cli: &Cli, args: &crate::SimulateArgs) -> Result<Status> {
    let net = load(cli)?;
    let x0 = initial_state(cli, &net, &args.init)?;
    let schedule = match &args.schedule {
        Some(path) => UpdateSchedule::sequence(io::parse_sequence(&read(path)?)?),
        None => UpdateSchedule {
            kind: ScheduleKind::UniformRandom {
                seed: cli.seed,
                stream: 1,
            },
            budget: cli.budget.unwrap_or_else(|| default_budget(net.n())),
        },
    };
    let traj = run(&net, &x0, &schedule)?;
    let traj = string_trajectory(&traj);

    if let Some(path) = &cli.out {
        let text = match cli.emit.unwrap_or(Emit::Json) {
            Emit::Json => pretty(&traj)?,
            Emit::Csv => io::trajectory_to_csv(&traj),
            Emit::Dot => bail!("trajectories are written as json or csv"),
        };
        write(Some(path), &text)?;
    }
    if let Some(path) = &args.final_grid {
        let cols = args.cols.unwrap_or(1);
        if cols == 0 || net.n() % cols != 0 {
            bail!("--cols {cols} does not divide the node count {}", net.n());
        }
        let text: String = traj.terminal.chunks(cols).map(|row| row.join(",") + "\n").collect();
        write(Some(path), &text)?;
    }

    let result = json!({
        "n": net.n(),
        "schedule": schedule,
        "converged": traj.converged,
        "consensus": traj.terminal.is_consensus(),
        "steps_used": traj.steps_used,
        "changes": traj.steps.len(),
        "initial": traj.initial,
        "terminal": traj.terminal,
        "steps": if cli.out.is_none() { Some(&traj.steps) } else { None },
    });
    write(None, &report(cli, &result)?)?;
    Ok(if traj.converged { Status::Success } else { Status::BudgetExhausted })
}

fn ensemble_cmd(cli: &Cli, init: &InitialArgs) -> Result<Status> {
    let net = load(cli)?;
    let spec = initial_spec(init)?;
    let config = EnsembleConfig {
        replicas: cli.replicas.unwrap_or(100),
        seed: cli.seed,
        budget: cli.budget.unwrap_or_else(|| default_budget(net.n())),
        schedule: ReplicaSchedule::UniformRandom,
    };
    let rep = ensemble(&net, &spec, &config)?;
    let result = json!({ "initial": spec.describe(), "ensemble": rep });
    write(cli.out.as_deref(), &report(cli, &result)?)?;
    Ok(Status::Success)
}

fn analyze(cli: &Cli) -> Result<Status> {
    let net = load(cli)?;
    if let Some(emit) = cli.emit {
        let text = match emit {
            Emit::Json => io::network_to_json(&net),
            Emit::Csv => io::network_to_csv(&net),
            Emit::Dot => io::network_to_dot(&net),
        };
        write(cli.out.as_deref(), &text)?;
        return Ok(Status::Success);
    }
    let bound = cli.bound.unwrap_or(DEFAULT_ENUMERATION_BOUND);
    let decisive = net.decisive_subgraph();
    let sets: Option<Vec<NodeSet>> = if net.n() <= bound {
        Some(enumerate_maximal_cohesive_sets(&net, bound)?)
    } else {
        None
    };
    let result = json!({
        "n": net.n(),
        "edges": net.edge_count(),
        "decisive_edges": decisive.decisive_edges().collect::<Vec<_>>(),
        "indecisive_edges": decisive.indecisive_edges().collect::<Vec<_>>(),
        "globally_reachable_node": decisive.globally_reachable_node(),
        "cohesion_bound": bound,
        "maximal_cohesive_sets": sets.as_ref().map(|s| s.iter().map(|m| m.members().to_vec()).collect::<Vec<_>>()),
        "nontrivial_maximal_cohesive_set": sets.as_ref().map(|s| s.iter().any(|m| !m.is_full())),
    });
    write(cli.out.as_deref(), &report(cli, &result)?)?;
    Ok(Status::Success)
}

fn classify_cmd(cli: &Cli, cohesion: usize) -> Result<Status> {
    let net = load(cli)?;
    let bounds = ClassifyBounds {
        cohesion,
        decision: cli.bound.unwrap_or(DEFAULT_DECISION_BOUND),
        replicas: cli.replicas.unwrap_or(200),
        seed: cli.seed,
    };
    let rep = classify(&net, &bounds)?;
    write(cli.out.as_deref(), &report(cli, &rep)?)?;
    Ok(Status::Success)
}

fn equilibria(cli: &Cli, labels: usize, values: Option<&[String]>) -> Result<Status> {
    let net = load(cli)?;
    let labels: Vec<Rational> = match values {
        Some(v) => io::parse_opinions(&v.join(","))?,
        None if labels == 0 => bail!("--labels must be at least 1"),
        None => (0..labels as i64).map(|k| Rational::from_fraction(k, 1)).collect(),
    };
    let budget = cli.bound.map_or(DEFAULT_STATE_BUDGET, |b| b as u128);
    let found = enumerate_equilibria(&net, &labels, budget)?;
    let mut structural_agrees = true;
    for x in &found {
        structural_agrees &= is_equilibrium_structural(&net, x)?;
    }
    let mut sorted = labels.clone();
    sorted.sort();
    sorted.dedup();
    let result = json!({
        "labels": strings(&sorted),
        "count": found.len(),
        "non_consensus": found.iter().filter(|x| !x.is_consensus()).count(),
        "structural_check_agrees": structural_agrees,
        "equilibria": found.iter().map(|x| strings(x)).collect::<Vec<_>>(),
    });
    write(cli.out.as_deref(), &report(cli, &result)?)?;
    Ok(Status::Success)
}

fn sequence(cli: &Cli, init: &InitialArgs) -> Result<Status> {
    let net = load(cli)?;
    let x0 = initial_state(cli, &net, init)?;
    let seq = build_update_sequence(&net, &x0)?;
    let nodes = match &seq.schedule.kind {
        ScheduleKind::Sequence { nodes } => nodes.clone(),
        ScheduleKind::UniformRandom { .. } => unreachable!("constructed sequences are explicit"),
    };
    let result = json!({
        "initial": strings(&x0),
        "length": nodes.len(),
        "sequence": nodes,
        "terminal": strings(&seq.terminal),
        "consensus": seq.terminal.is_consensus(),
    });
    write(cli.out.as_deref(), &report(cli, &result)?)?;
    Ok(Status::Success)
}

fn decide(cli: &Cli, args: &crate::DecideArgs) -> Result<Status> {
    let net = load(cli)?;
    let decision = decide_consensus_reachable(&net, cli.bound.unwrap_or(DEFAULT_DECISION_BOUND))?;
    let order = if args.order_type {
        Some(decide_consensus_from_distinct(&net, args.order_bound)?)
    } else {
        None
    };
    if let (Some(path), Some(cert)) = (&args.cert_out, &decision.certificate) {
        write(Some(path), &pretty(cert)?)?;
    }
    let result = json!({
        "n": net.n(),
        "decision": decision,
        "order_type": order,
        "agree": order.as_ref().map(|o| o.reachable == decision.reachable),
    });
    write(cli.out.as_deref(), &report(cli, &result)?)?;
    Ok(Status::Success)
}

/// Replays a certificate, separating bad input (exit 1) from a certificate
/// that parses but does not check out (exit 5).
fn check_certificate(net: &Network, path: &Path) -> Result<(bool, Option<String>)> {
    let cert: ConsensusCertificate =
        serde_json::from_str(&read(path)?).with_context(|| format!("parsing certificate {}", path.display()))?;
    match cert.verify(net) {
        Ok(()) => Ok((true, None)),
        Err(e @ (Error::ReplayMismatch(_) | Error::InvalidNode { .. } | Error::DimensionMismatch { .. })) => {
            Ok((false, Some(e.to_string())))
        }
        Err(e) => Err(e.into()),
    }
}

fn reduce(cli: &Cli, args: &crate::ReduceArgs) -> Result<Status> {
    let inst = parse_instance(&read(&args.instance)?)?;
    let svc = build_svc::<Rational>(&inst);
    let net = &svc.network;
    let sat_bound = cli.bound.unwrap_or(DEFAULT_SAT_BOUND);
    let mut status = Status::Success;

    let network_value: Option<Value> = match &cli.out {
        Some(path) => {
            let text = match cli.emit.unwrap_or(Emit::Json) {
                Emit::Json => io::network_to_json(net),
                Emit::Csv => io::network_to_csv(net),
                Emit::Dot => io::network_to_dot(net),
            };
            write(Some(path), &text)?;
            None
        }
        None => Some(serde_json::from_str(&io::network_to_json(net))?),
    };

    let solve = if args.solve {
        let assignment = brute_force_nae3sat(&inst, sat_bound)?;
        let cert = assignment
            .as_ref()
            .map(|a| certificate_from_assignment(&svc, a))
            .transpose()?;
        if let (Some(path), Some(c)) = (&args.cert_out, &cert) {
            write(Some(path), &pretty(c)?)?;
        }
        if assignment.is_none() {
            status = Status::Unsatisfiable;
        }
        Some(json!({ "satisfiable": assignment.is_some(), "assignment": assignment, "certificate": cert }))
    } else {
        None
    };

    let roundtrip = if args.check {
        let rt = reduction_roundtrip::<Rational>(
            &inst,
            RoundtripBounds {
                sat: sat_bound,
                ..RoundtripBounds::default()
            },
        )?;
        if !rt.agree() {
            status = Status::VerificationFailed;
        }
        Some(json!({ "agree": rt.agree(), "report": rt }))
    } else {
        None
    };

    let verification = match &args.verify_cert {
        Some(path) => {
            let (valid, reason) = check_certificate(net, path)?;
            if !valid {
                status = Status::VerificationFailed;
            }
            Some(json!({ "valid": valid, "reason": reason }))
        }
        None => None,
    };

    let result = json!({
        "variables": inst.num_vars(),
        "clauses": inst.clauses().len(),
        "nodes": net.n(),
        "roles": strings(&svc.roles),
        "network": network_value,
        "solve": solve,
        "roundtrip": roundtrip,
        "verification": verification,
    });
    write(None, &report(cli, &result)?)?;
    Ok(status)
}

fn verify_cert(cli: &Cli, cert: &Path) -> Result<Status> {
    let net = load(cli)?;
    let (valid, reason) = check_certificate(&net, cert)?;
    let result = json!({ "valid": valid, "reason": reason });
    write(cli.out.as_deref(), &report(cli, &result)?)?;
    Ok(if valid { Status::Success } else { Status::VerificationFailed })
}

fn generate(cli: &Cli, args: &crate::GenerateArgs) -> Result<Status> {
    let positive = |v: usize, flag: &str| if v == 0 { Err(anyhow!("--{flag} must be positive")) } else { Ok(v) };
    let net: Network = match args.kind {
        Fixture::Complete => fixtures::complete_uniform(positive(args.n, "n")?),
        Fixture::CompleteNoLoops => fixtures::complete_without_self_loops(positive(args.n, "n")?),
        Fixture::Isolated => fixtures::isolated(positive(args.n, "n")?),
        Fixture::Ring => fixtures::ring(positive(args.n, "n")?),
        Fixture::Cliques => {
            if args.sizes.is_empty() || args.sizes.contains(&0) {
                bail!("--sizes must list positive clique sizes");
            }
            fixtures::disjoint_cliques(&args.sizes)
        }
        Fixture::Bridged => {
            let bridge = Rational::parse_exact(&args.bridge)
                .ok_or_else(|| anyhow!("`{}` is not an exact number", args.bridge))?;
            if bridge <= Rational::from_fraction(0, 1) || bridge >= Rational::from_fraction(1, 1) {
                bail!("--bridge must lie strictly between 0 and 1");
            }
            fixtures::bridged_cliques(positive(args.n, "n")?, bridge)
        }
        Fixture::Star => fixtures::star_with_light_link(),
        Fixture::Lattice => fixtures::lattice(positive(args.rows, "rows")?, positive(args.cols, "cols")?),
    };
    let text = match cli.emit.unwrap_or(Emit::Json) {
        Emit::Json => io::network_to_json(&net),
        Emit::Csv => io::network_to_csv(&net),
        Emit::Dot => io::network_to_dot(&net),
    };
    write(cli.out.as_deref(), &text)?;
    Ok(Status::Success)
}
